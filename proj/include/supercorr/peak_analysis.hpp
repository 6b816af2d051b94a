#pragma once

#include <string>
#include <utility>
#include <vector>

#include "supercorr/trajectory.hpp"

namespace supercorr {

struct PeakResult {
    double r_peak = 0.0;       // in units of Gamma
    double t_peak = 0.0;       // in 1/Gamma
    bool refined = false;      // quadratic sub-sample refinement applied
    bool boundary_peak = false;  // maximum at t = 0
    std::string method;
    int n_emitters = 0;
};

// Global maximum of R(t) over the sampled trajectory. Interior maxima are
// refined by the parabola through the three bracketing samples; a maximum at
// the first sample is reported as a boundary peak at t = 0. Needs at least
// three samples. Ties within round-off resolve to the earliest time.
PeakResult find_peak(const Trajectory& traj);

struct ScalingFit {
    double exponent = 0.0;       // beta in R_peak ~ prefactor * N^beta
    double log_prefactor = 0.0;  // natural log
    double rms_residual = 0.0;   // in log space
};

// Least-squares line through (log N, log R_peak). All inputs must be positive
// and at least three points are required.
ScalingFit fit_scaling(const std::vector<std::pair<double, double>>& points);

}  // namespace supercorr
