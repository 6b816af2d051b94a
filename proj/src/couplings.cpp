#include "supercorr/couplings.hpp"

#include <cmath>
#include <stdexcept>

namespace supercorr {

Mat3c green_tensor(const Vec3& r_vec) {
    const double r = r_vec.norm();
    if (!(r > 0.0)) throw std::domain_error("green_tensor: zero separation");
    const double kr = wave_number * r;
    const cdouble phase = std::exp(cdouble(0.0, kr));
    const cdouble pre = phase / (4.0 * pi * kr * kr * r);
    const cdouble iso = cdouble(kr * kr - 1.0, kr);           // (k^2 r^2 + i k r - 1)
    const cdouble dir = cdouble(-kr * kr + 3.0, -3.0 * kr);   // (-k^2 r^2 - 3 i k r + 3)

    Mat3c g{};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            const double rr = r_vec[i] * r_vec[j] / (r * r);
            g[i][j] = pre * (iso * (i == j ? 1.0 : 0.0) + dir * rr);
        }
    }
    return g;
}

namespace {

cdouble projected_green(const Vec3& r, const PolVec& d) {
    const Mat3c g = green_tensor(r);
    cdouble acc = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) acc += std::conj(d[i]) * g[i][j] * d[j];
    return acc;
}

}  // namespace

double projected_dissipation(const Vec3& r, const PolVec& d) {
    return (6.0 * pi / wave_number) * projected_green(r, d).imag();
}

double projected_exchange(const Vec3& r, const PolVec& d) {
    return -(3.0 * pi / wave_number) * projected_green(r, d).real();
}

CouplingModel build_free_space(const EmitterArray& array, bool include_hamiltonian) {
    const int n = array.n();
    if (n < 1) throw std::invalid_argument("build_free_space: empty emitter array");

    CouplingModel m;
    m.n = n;
    m.reservoir = Reservoir::free_space;
    m.gamma.assign(static_cast<std::size_t>(n) * n, 0.0);
    if (include_hamiltonian) m.jmat.assign(static_cast<std::size_t>(n) * n, 0.0);

    for (int a = 0; a < n; ++a) m.gamma[static_cast<std::size_t>(a) * n + a] = m.unit_rate;
    for (int a = 0; a < n; ++a) {
        for (int b = a + 1; b < n; ++b) {
            const Vec3 r = array.positions[a] - array.positions[b];
            if (!(r.norm() > 0.0))
                throw std::domain_error("build_free_space: coincident emitters");
            const double gab = m.unit_rate * projected_dissipation(r, array.polarization);
            m.gamma[static_cast<std::size_t>(a) * n + b] = gab;
            m.gamma[static_cast<std::size_t>(b) * n + a] = gab;
            if (include_hamiltonian) {
                const double jab = m.unit_rate * projected_exchange(r, array.polarization);
                m.jmat[static_cast<std::size_t>(a) * n + b] = jab;
                m.jmat[static_cast<std::size_t>(b) * n + a] = jab;
            }
        }
    }
    return m;
}

CouplingModel build_waveguide(int n, double ka) {
    if (n < 1) throw std::invalid_argument("build_waveguide: need at least one emitter");
    CouplingModel m;
    m.n = n;
    m.reservoir = Reservoir::waveguide;
    m.waveguide_phase = ka;
    m.gamma.resize(static_cast<std::size_t>(n) * n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            m.gamma[static_cast<std::size_t>(a) * n + b] =
                m.unit_rate * std::cos(ka * std::abs(a - b));
    return m;
}

CouplingModel build_dicke(int n) {
    if (n < 1) throw std::invalid_argument("build_dicke: need at least one emitter");
    CouplingModel m;
    m.n = n;
    m.reservoir = Reservoir::free_space;
    m.gamma.assign(static_cast<std::size_t>(n) * n, m.unit_rate);
    return m;
}

JumpDecomposition jump_decomposition(const CouplingModel& model) {
    const SymmetricEigen eig = eigen_symmetric(model.gamma, model.n);

    JumpDecomposition jd;
    jd.n = model.n;
    jd.rates = eig.values;
    jd.coefficients = eig.vectors;
    for (double& rate : jd.rates) {
        if (rate < 0.0) {
            if (rate < -1e-9 * model.unit_rate)
                throw std::domain_error(
                    "jump_decomposition: dissipation matrix has a negative eigenvalue " +
                    std::to_string(rate) + "; coupling construction is broken");
            rate = 0.0;
        }
    }
    return jd;
}

double emission_rate(const CouplingModel& model, const std::vector<cdouble>& corr) {
    const int n = model.n;
    if (corr.size() != static_cast<std::size_t>(n) * n)
        throw std::domain_error("emission_rate: correlation matrix size mismatch");
    for (int a = 0; a < n; ++a) {
        const cdouble diag = corr[static_cast<std::size_t>(a) * n + a];
        if (std::abs(diag.imag()) > 1e-8 || diag.real() < -1e-8 || diag.real() > 1.0 + 1e-8)
            throw std::domain_error("emission_rate: diagonal occupation out of range");
        for (int b = a + 1; b < n; ++b) {
            const cdouble upper = corr[static_cast<std::size_t>(a) * n + b];
            const cdouble lower = corr[static_cast<std::size_t>(b) * n + a];
            if (std::abs(upper - std::conj(lower)) > 1e-8)
                throw std::domain_error("emission_rate: correlation matrix not Hermitian");
        }
    }
    cdouble acc = 0.0;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            acc += model.gamma[static_cast<std::size_t>(a) * n + b] *
                   corr[static_cast<std::size_t>(a) * n + b];
    return acc.real();
}

}  // namespace supercorr
