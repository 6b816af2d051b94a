#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace supercorr {

struct IntegratorConfig {
    double rel_tol = 1e-6;
    double abs_tol = 1e-9;
    double t_max = 5.0;        // in 1/Gamma
    long max_steps = 2000000;
    int sample_stride = 1;     // record every k-th accepted step
};

// dy/dt = f(t, y); must not modify y.
using DerivFn = std::function<void(double, std::span<const double>, std::span<double>)>;

// Continuous extension of the last accepted step (4th-order interpolant).
class DenseStep {
  public:
    // theta in [0, 1] maps to [t_old, t_new].
    void evaluate(double theta, std::span<double> out) const;
    double t_old() const { return t_old_; }
    double t_new() const { return t_old_ + h_; }

  private:
    friend class Rk45Driver;
    double t_old_ = 0.0, h_ = 0.0;
    const std::vector<double>* rcont_[5] = {nullptr, nullptr, nullptr, nullptr, nullptr};
};

struct StepView {
    double t_old = 0.0;
    double t_new = 0.0;
    std::span<const double> y;     // state after the step
    std::span<const double> dydt;  // derivative at (t_new, y)
    const DenseStep* dense = nullptr;
};

enum class StepDecision { continue_run, stop };
using StepObserver = std::function<StepDecision(const StepView&)>;

struct IntegrationResult {
    bool ok = true;
    std::string error;       // set when !ok
    double t_final = 0.0;
    long accepted_steps = 0;
    long rejected_steps = 0;
    bool stopped_by_observer = false;
};

// Embedded Dormand-Prince 4(5) with PI step control and max-norm mixed error
// |e_i| / (abs_tol + rel_tol*|y_i|). Integrates y in place from t=0 to
// cfg.t_max unless the observer stops the run. Failures (NaN, step underflow,
// max_steps) are reported in the result, with y left at the last good state.
IntegrationResult integrate_adaptive(const DerivFn& f, std::vector<double>& y,
                                     const IntegratorConfig& cfg,
                                     const StepObserver& observer);

}  // namespace supercorr
