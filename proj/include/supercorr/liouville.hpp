#pragma once

#include <vector>

#include "supercorr/couplings.hpp"
#include "supercorr/integrator.hpp"
#include "supercorr/trajectory.hpp"
#include "supercorr/types.hpp"

namespace supercorr {

// Exact density-matrix evolution; the ground-truth oracle for small N.
// Memory grows as 4^N (the integrator keeps ~10 copies of rho), so the
// emitter count is capped.
inline constexpr int default_exact_cap = 14;

struct DensityState {
    std::vector<cdouble> rho;  // 2^n x 2^n row-major, basis bit n set = emitter n excited
    int n_emitters = 0;
    double time = 0.0;
    std::size_t dim() const { return std::size_t(1) << n_emitters; }
};

// Health spot check: unit trace to 1e-8, Hermiticity to 1e-10, diagonal
// entries >= -1e-6. Throws std::runtime_error naming the violated property.
void validate_density_state(const cdouble* rho, int n_emitters);

DensityState fully_inverted_state(int n_emitters);

// Right-hand side of the master equation: pairwise-damped jump terms plus,
// when requested, the coherent exchange commutator. Matrix-free in the sense
// that no superoperator is ever materialized.
void lindblad_derivative(const DensityState& state, const CouplingModel& model,
                         bool with_hamiltonian, std::vector<cdouble>& out,
                         int threads = 1);

// One-body correlations <sigma^+_a sigma^-_b> extracted from rho.
std::vector<cdouble> one_body_correlations(const DensityState& state);
std::vector<cdouble> one_body_correlations(const cdouble* rho, int n_emitters);

Trajectory evolve_exact(const CouplingModel& model, bool with_hamiltonian,
                        const IntegratorConfig& cfg, const EvolveOptions& opts = {},
                        int cap = default_exact_cap);

Trajectory evolve_exact(const EmitterArray& array, bool with_hamiltonian,
                        const IntegratorConfig& cfg, const EvolveOptions& opts = {},
                        int cap = default_exact_cap);

}  // namespace supercorr
