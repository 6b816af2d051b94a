#include <doctest.h>

#include <cmath>
#include <random>

#include "supercorr/couplings.hpp"

using namespace supercorr;

TEST_CASE("projected dissipation closed-form values") {
    // z-polarized pair one wavelength apart along x
    CHECK(projected_dissipation({1, 0, 0}, polarization_vector(Polarization::linear)) ==
          doctest::Approx(3.0 / (8.0 * pi * pi)).epsilon(1e-12));
    // circular in-plane pair half a wavelength apart along z
    CHECK(projected_dissipation({0, 0, 0.5}, polarization_vector(Polarization::circular)) ==
          doctest::Approx(-3.0 / (2.0 * pi * pi)).epsilon(1e-12));
}

TEST_CASE("short-distance limit recovers the single-emitter rate") {
    for (auto pol : {Polarization::circular, Polarization::linear}) {
        const double v = projected_dissipation({1e-3, 0, 0}, polarization_vector(pol));
        CHECK(std::abs(v - 1.0) < 1e-5);
    }
}

TEST_CASE("green tensor rejects zero separation") {
    CHECK_THROWS_AS(green_tensor({0, 0, 0}), std::domain_error);
}

TEST_CASE("free-space couplings") {
    EmitterArray single;
    single.positions = {{0, 0, 0}};
    single.polarization = polarization_vector(Polarization::linear);
    const CouplingModel m1 = build_free_space(single, false);
    CHECK(m1.n == 1);
    CHECK(m1.gamma[0] == 1.0);

    const EmitterArray pair = build_lattice(LatticeKind::chain, {2}, 1.0, Polarization::linear);
    const CouplingModel m2 = build_free_space(pair, false);
    CHECK(m2.g(0, 1) == doctest::Approx(3.0 / (8.0 * pi * pi)).epsilon(1e-12));
    CHECK(m2.g(0, 0) == 1.0);
    CHECK(m2.g(1, 0) == m2.g(0, 1));
    CHECK(!m2.has_hamiltonian());

    // Ideal-limit approach: the pair deviation falls off as (k0 a)^2 / 5.
    const EmitterArray close = build_lattice(LatticeKind::chain, {2}, 0.02, Polarization::linear);
    const double dev_002 = std::abs(build_free_space(close, false).g(0, 1) - 1.0);
    CHECK(dev_002 < 5e-3);
    const EmitterArray closer = build_lattice(LatticeKind::chain, {2}, 0.01, Polarization::linear);
    const double dev_001 = std::abs(build_free_space(closer, false).g(0, 1) - 1.0);
    CHECK(dev_002 / dev_001 == doctest::Approx(4.0).epsilon(0.02));

    EmitterArray coincident;
    coincident.positions = {{0, 0, 0}, {0, 0, 0}};
    coincident.polarization = polarization_vector(Polarization::linear);
    CHECK_THROWS_AS(build_free_space(coincident, false), std::domain_error);

    const CouplingModel with_h = build_free_space(pair, true);
    CHECK(with_h.has_hamiltonian());
    CHECK(with_h.jmat[0] == 0.0);  // no self-shift
    CHECK(with_h.jmat[1] != 0.0);
}

TEST_CASE("free-space couplings approach the ideal limit as spacing shrinks") {
    for (auto pol : {Polarization::circular, Polarization::linear}) {
        const EmitterArray pair = build_lattice(LatticeKind::chain, {2}, 1e-3, pol);
        CHECK(std::abs(build_free_space(pair, false).g(0, 1) - 1.0) < 1e-5);
    }
    // Larger index distances deviate as (k0 |i-j| a)^2 / 5; still tiny here.
    const EmitterArray arr = build_lattice(LatticeKind::chain, {4}, 1e-3, Polarization::circular);
    const CouplingModel m = build_free_space(arr, false);
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) CHECK(std::abs(m.g(a, b) - 1.0) < 1e-4);
}

TEST_CASE("waveguide coupling matrix is the exact cosine") {
    const CouplingModel m = build_waveguide(5, pi / 4.0);
    CHECK(m.g(0, 1) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
    CHECK(m.g(0, 2) == doctest::Approx(std::cos(pi / 2.0)).epsilon(1e-15));
    const CouplingModel mh = build_waveguide(4, pi / 2.0);
    CHECK(mh.g(0, 2) == doctest::Approx(-1.0).epsilon(1e-15));

    const CouplingModel ideal = build_waveguide(6, 2.0 * pi);
    for (double v : ideal.gamma) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("jump decomposition of the two-emitter ideal matrix") {
    const JumpDecomposition jd = jump_decomposition(build_dicke(2));
    REQUIRE(jd.rates.size() == 2);
    CHECK(jd.rates[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(jd.rates[1] == doctest::Approx(0.0).epsilon(1e-12));
    const double s = 1.0 / std::sqrt(2.0);
    CHECK(jd.c(0, 0) == doctest::Approx(s).epsilon(1e-12));
    CHECK(jd.c(0, 1) == doctest::Approx(s).epsilon(1e-12));
    CHECK(std::abs(jd.c(1, 0) * jd.c(1, 1) + s * s) < 1e-12);  // (1,-1)/sqrt(2) up to order
}

TEST_CASE("rank-one waveguide matrix at ka = pi") {
    const JumpDecomposition jd = jump_decomposition(build_waveguide(3, pi));
    CHECK(jd.rates[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(jd.rates[1] == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(jd.rates[2] == doctest::Approx(0.0).epsilon(1e-10));
    // dominant mode (1,-1,1)/sqrt(3) with the positive-component convention
    const double s = 1.0 / std::sqrt(3.0);
    CHECK(jd.c(0, 0) == doctest::Approx(s).epsilon(1e-10));
    CHECK(jd.c(0, 1) == doctest::Approx(-s).epsilon(1e-10));
    CHECK(jd.c(0, 2) == doctest::Approx(s).epsilon(1e-10));
}

TEST_CASE("decomposition invariants on random geometries") {
    std::mt19937 rng(3u);
    std::uniform_real_distribution<double> unif(0.05, 1.2);
    for (int trial = 0; trial < 8; ++trial) {
        const int n = 2 + trial;
        const EmitterArray arr = build_lattice(LatticeKind::chain, {n}, unif(rng),
                                               trial % 2 ? Polarization::circular
                                                         : Polarization::linear);
        const CouplingModel m = build_free_space(arr, false);
        const JumpDecomposition jd = jump_decomposition(m);
        for (int i = 0; i < n; ++i) {
            double sum_rule = 0.0;
            for (int k = 0; k < n; ++k) sum_rule += jd.rates[k] * jd.c(k, i) * jd.c(k, i);
            CHECK(std::abs(sum_rule - 1.0) < 1e-10);
            for (int j = 0; j < n; ++j) {
                double rec = 0.0;
                for (int k = 0; k < n; ++k) rec += jd.rates[k] * jd.c(k, i) * jd.c(k, j);
                CHECK(std::abs(rec - m.g(i, j)) < 1e-10);
            }
        }
    }
}

TEST_CASE("negative eigenvalues beyond round-off are a hard error") {
    CouplingModel bad;
    bad.n = 2;
    bad.gamma = {1.0, 1.1, 1.1, 1.0};  // eigenvalues 2.1 and -0.1
    CHECK_THROWS_AS(jump_decomposition(bad), std::domain_error);

    CouplingModel borderline;
    borderline.n = 2;
    const double eps = 5e-10;
    borderline.gamma = {1.0, 1.0 + eps, 1.0 + eps, 1.0};  // smallest eigenvalue -5e-10
    const JumpDecomposition jd = jump_decomposition(borderline);
    CHECK(jd.rates[1] == 0.0);  // clamped
}

TEST_CASE("asymmetric matrices are rejected") {
    CouplingModel bad;
    bad.n = 2;
    bad.gamma = {1.0, 0.25, 0.5, 1.0};
    CHECK_THROWS_AS(jump_decomposition(bad), std::domain_error);
}

TEST_CASE("emission rate site form") {
    const CouplingModel m = build_waveguide(4, 1.1);
    std::vector<cdouble> corr(16, 0.0);
    for (int i = 0; i < 4; ++i) corr[i * 4 + i] = 1.0;
    CHECK(emission_rate(m, corr) == doctest::Approx(4.0).epsilon(1e-12));

    std::fill(corr.begin(), corr.end(), cdouble(0.0));
    CHECK(emission_rate(m, corr) == 0.0);
}

TEST_CASE("emission rate agrees between the site and mode forms") {
    std::mt19937 rng(11u);
    std::normal_distribution<double> gauss;
    for (int trial = 0; trial < 6; ++trial) {
        const int n = 3 + trial;
        const CouplingModel m = build_waveguide(n, 0.3 + 0.4 * trial);
        const JumpDecomposition jd = jump_decomposition(m);
        std::vector<cdouble> x(std::size_t(n) * n);
        for (auto& v : x) v = cdouble(gauss(rng), gauss(rng));
        std::vector<cdouble> corr(std::size_t(n) * n, 0.0);
        double max_diag = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                cdouble acc = 0.0;
                for (int k = 0; k < n; ++k)
                    acc += x[std::size_t(i) * n + k] * std::conj(x[std::size_t(j) * n + k]);
                corr[std::size_t(i) * n + j] = acc;
                if (i == j) max_diag = std::max(max_diag, acc.real());
            }
        for (auto& v : corr) v *= 0.9 / max_diag;

        const double site = emission_rate(m, corr);
        double mode = 0.0;
        for (int k = 0; k < n; ++k) {
            cdouble q = 0.0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    q += jd.c(k, i) * corr[std::size_t(i) * n + j] * jd.c(k, j);
            mode += jd.rates[k] * q.real();
        }
        CHECK(std::abs(site - mode) < 1e-10 * std::max(1.0, std::abs(site)));
    }
}

TEST_CASE("emission rate is linear in the correlations") {
    const CouplingModel m = build_waveguide(3, 0.7);
    std::vector<cdouble> a(9, 0.0), b(9, 0.0);
    for (int i = 0; i < 3; ++i) {
        a[i * 3 + i] = 0.5;
        b[i * 3 + i] = 0.25;
    }
    a[1] = a[3] = cdouble(0.1, 0.02);
    a[3] = std::conj(a[1]);
    b[5] = cdouble(-0.05, 0.01);
    b[7] = std::conj(b[5]);
    std::vector<cdouble> sum(9);
    for (int i = 0; i < 9; ++i) sum[i] = a[i] + b[i];
    CHECK(emission_rate(m, sum) ==
          doctest::Approx(emission_rate(m, a) + emission_rate(m, b)).epsilon(1e-12));
}

TEST_CASE("emission rate rejects broken correlation matrices") {
    const CouplingModel m = build_waveguide(2, 0.5);
    std::vector<cdouble> corr(4, 0.0);
    corr[1] = cdouble(0.3, 0.0);
    corr[2] = cdouble(0.1, 0.0);  // not the conjugate
    CHECK_THROWS_AS(emission_rate(m, corr), std::domain_error);

    std::vector<cdouble> over(4, 0.0);
    over[0] = 1.5;  // occupation beyond one
    CHECK_THROWS_AS(emission_rate(m, over), std::domain_error);
}
