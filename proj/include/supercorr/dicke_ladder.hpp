#pragma once

#include <vector>

#include "supercorr/integrator.hpp"
#include "supercorr/trajectory.hpp"

namespace supercorr {

// Permutation-symmetric limit (all pairwise couplings equal): the fully
// inverted state cascades down the N+1 symmetric states as a birth-death
// process with rate h_m out of the m-excitation rung.

// h_m = m (N - m + 1) for m = 0..N.
std::vector<double> ladder_rates(int n);

// Closed-form estimate of the peak time, ln(N-1)/(N+1). Requires N >= 2.
double peak_time_formula(int n);
// Textbook delay-time estimate ln(N)/N.
double peak_time_literature(int n);

Trajectory evolve_ladder(int n, const IntegratorConfig& cfg, const EvolveOptions& opts = {});

}  // namespace supercorr
