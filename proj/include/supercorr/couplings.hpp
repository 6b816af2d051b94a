#pragma once

#include <array>
#include <vector>

#include "supercorr/geometry.hpp"
#include "supercorr/symmetric_eigen.hpp"
#include "supercorr/types.hpp"

namespace supercorr {

enum class Reservoir { free_space, waveguide };

// Pairwise dissipative couplings (and, optionally, the coherent exchange
// matrix) that define the master equation. All rates in units of the
// single-emitter decay rate; its value sits on every diagonal entry.
struct CouplingModel {
    int n = 0;
    std::vector<double> gamma;  // n x n, symmetric, diag = 1
    std::vector<double> jmat;   // n x n coherent couplings, diag 0; empty if absent
    Reservoir reservoir = Reservoir::free_space;
    double waveguide_phase = 0.0;  // ka, meaningful for waveguide only
    double unit_rate = unit_decay_rate;

    double g(int a, int b) const { return gamma[static_cast<std::size_t>(a) * n + b]; }
    bool has_hamiltonian() const { return !jmat.empty(); }
};

struct JumpDecomposition {
    std::vector<double> rates;         // eigenvalues, descending, clamped at 0
    std::vector<double> coefficients;  // row k = mode k amplitudes c_{k,n}
    int n = 0;
    double c(int k, int idx) const {
        return coefficients[static_cast<std::size_t>(k) * n + idx];
    }
};

using Mat3c = std::array<std::array<cdouble, 3>, 3>;

// Free-space electromagnetic propagator between two points separated by
// r (in wavelength units), at the transition frequency.
Mat3c green_tensor(const Vec3& r);

// (6*pi/k0) * Im[d^dag G d]: the pairwise decay rate in units of the
// single-emitter rate.
double projected_dissipation(const Vec3& r, const PolVec& d);
// -(3*pi/k0) * Re[d^dag G d]: the coherent exchange rate in the same units.
double projected_exchange(const Vec3& r, const PolVec& d);

CouplingModel build_free_space(const EmitterArray& array, bool include_hamiltonian);

// Equidistant chain coupled through a one-dimensional reservoir:
// gamma[n][m] = cos(ka * |n - m|).
CouplingModel build_waveguide(int n, double ka);

// Ideal all-to-all matrix (every entry 1); the permutation-symmetric limit.
CouplingModel build_dicke(int n);

// Eigendecomposition of the dissipation matrix into collective jump modes.
// Eigenvalues in [-1e-9, 0) are clamped to zero; anything more negative is a
// construction bug and throws std::domain_error.
JumpDecomposition jump_decomposition(const CouplingModel& model);

// R = sum_{nm} gamma[n][m] * corr[n][m] for a Hermitian one-body correlation
// matrix corr (row-major n x n). Throws std::domain_error when corr is not
// Hermitian to 1e-8 or diagonal entries leave [-1e-8, 1+1e-8].
double emission_rate(const CouplingModel& model, const std::vector<cdouble>& corr);

}  // namespace supercorr
