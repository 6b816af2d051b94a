#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "supercorr/integrator.hpp"
#include "supercorr/trajectory.hpp"

namespace supercorr {

// Turns accepted integrator steps into trajectory samples, enforces the
// bookkeeping invariants and decides when to stop. The observables:
//   rate(y):            R in units of Gamma
//   excitation(y):      N_exc
//   excitation_slope(f) the same linear functional applied to dy/dt
struct TrajectoryRecorder {
    std::function<double(std::span<const double>)> rate;
    std::function<double(std::span<const double>)> excitation;
    std::function<double(std::span<const double>)> excitation_slope;
    int n_emitters = 0;
    StopRule stop = StopRule::t_max_only;
    double past_peak_fraction = 0.05;
    double depleted_fraction = 1e-3;
    std::vector<double> sample_times;  // optional extra sample points, ascending
    int sample_stride = 1;

    Trajectory traj;
    double run_max_rate = 0.0;
    double prev_rate = 0.0;
    double prev_excitation = 0.0;
    long stride_count = 0;
    std::size_t next_sample = 0;
    std::vector<double> scratch;

    void record(double t, double r_raw, double n_exc) {
        // keep sample times strictly increasing (grid points can coincide
        // with step ends)
        if (!traj.samples.empty() && t <= traj.samples.back().t) return;
        TrajectorySample s;
        s.t = t;
        s.rate = r_raw;
        if (s.rate < 0.0) {
            if (s.rate < -1e-8) ++traj.meta.negative_rate_clamps;
            s.rate = 0.0;
        }
        s.excitation = n_exc;
        if (!traj.samples.empty() && n_exc > prev_excitation + 1e-8)
            ++traj.meta.excitation_rise_events;
        prev_excitation = n_exc;
        traj.samples.push_back(s);
    }

    void start(std::span<const double> y0) {
        const double r0 = rate(y0);
        prev_rate = r0;
        run_max_rate = r0;
        prev_excitation = excitation(y0);
        record(0.0, r0, prev_excitation);
    }

    StepDecision on_step(const StepView& view) {
        // Dense samples requested inside this step.
        while (next_sample < sample_times.size() && sample_times[next_sample] <= view.t_new) {
            const double ts = sample_times[next_sample];
            if (ts > view.t_old) {
                scratch.resize(view.y.size());
                const double theta = (ts - view.t_old) / (view.t_new - view.t_old);
                view.dense->evaluate(theta, scratch);
                record(ts, rate(scratch), excitation(scratch));
            }
            ++next_sample;
        }

        const double r = rate(view.y);
        const double n_exc = excitation(view.y);
        const double balance = std::abs(excitation_slope(view.dydt) + r);
        if (balance > traj.meta.max_balance_residual) traj.meta.max_balance_residual = balance;

        ++stride_count;
        const bool due = (stride_count % std::max(1, sample_stride)) == 0;

        bool stop_now = false;
        if (stop == StopRule::depleted && n_exc < depleted_fraction * n_emitters)
            stop_now = true;
        if (stop == StopRule::past_peak && r < past_peak_fraction * run_max_rate &&
            r < prev_rate)
            stop_now = true;

        if (due || stop_now) record(view.t_new, r, n_exc);
        if (r > run_max_rate) run_max_rate = r;
        prev_rate = r;
        if (stop_now) {
            traj.meta.stop_reason =
                (stop == StopRule::depleted) ? "depleted" : "past_peak";
            return StepDecision::stop;
        }
        return StepDecision::continue_run;
    }

    StepObserver observer() {
        return [this](const StepView& v) { return on_step(v); };
    }

    // Folds the integrator outcome into the trajectory metadata.
    void finish(const IntegrationResult& res, std::span<const double> y_final) {
        traj.meta.accepted_steps = res.accepted_steps;
        traj.meta.rejected_steps = res.rejected_steps;
        traj.meta.final_excitation = excitation(y_final);
        if (!res.ok) {
            traj.meta.status = RunStatus::integration_failure;
            traj.meta.status_detail = res.error + " at t = " + std::to_string(res.t_final);
            traj.meta.stop_reason = "failed";
        } else if (traj.meta.stop_reason.empty()) {
            traj.meta.stop_reason = "t_max";
        }
        // Make sure the final state is represented.
        if (res.ok &&
            (traj.samples.empty() || traj.samples.back().t < res.t_final - 1e-15)) {
            record(res.t_final, rate(y_final), excitation(y_final));
        }
    }
};

class WallTimer {
  public:
    WallTimer() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
            .count();
    }

  private:
    std::chrono::steady_clock::time_point start_;
};

}  // namespace supercorr
