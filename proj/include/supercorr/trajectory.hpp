#pragma once

#include <string>
#include <vector>

namespace supercorr {

struct TrajectorySample {
    double t = 0.0;           // time in 1/Gamma
    double rate = 0.0;        // emission rate R(t) in units of Gamma
    double excitation = 0.0;  // remaining excited population N_exc(t)
};

enum class RunStatus { ok, integration_failure };

struct TrajectoryMeta {
    std::string method;
    int n_emitters = 0;
    std::string geometry;
    double rel_tol = 0.0;
    double abs_tol = 0.0;
    double wall_time_s = 0.0;
    long accepted_steps = 0;
    long rejected_steps = 0;
    double photons_emitted = 0.0;   // integral of R, carried as an ODE component
    double final_excitation = 0.0;
    long negative_rate_clamps = 0;
    long excitation_rise_events = 0;
    // max over accepted steps of |dN_exc/dt + R|; zero up to round-off for a
    // correct dissipator.
    double max_balance_residual = 0.0;
    std::string stop_reason;        // t_max | past_peak | depleted | failed
    RunStatus status = RunStatus::ok;
    std::string status_detail;
};

struct Trajectory {
    std::vector<TrajectorySample> samples;
    TrajectoryMeta meta;

    // Throws std::runtime_error when the run did not complete cleanly.
    void require_ok() const;
    double final_time() const { return samples.empty() ? 0.0 : samples.back().t; }
};

enum class StopRule {
    t_max_only,  // integrate to t_max
    past_peak,   // stop once R has dropped below a fraction of its running max
    depleted     // stop once N_exc has dropped below a fraction of N
};

struct EvolveOptions {
    StopRule stop = StopRule::t_max_only;
    double past_peak_fraction = 0.05;
    double depleted_fraction = 1e-3;
    int threads = 1;
    bool use_reference_evaluator = false;  // cumulant engine: force the slow path
    std::vector<double> sample_times;      // extra dense-output sample points
};

}  // namespace supercorr
