#include "supercorr/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace supercorr {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                 a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                 a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                 a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
// 5th-order minus embedded 4th-order weights (error estimator).
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
// Dense-output weights.
constexpr double d1 = -12715105075.0 / 11282082432.0;
constexpr double d3 = 87487479700.0 / 32700410799.0;
constexpr double d4 = -10690763975.0 / 1880347072.0;
constexpr double d5 = 701980252875.0 / 199316789632.0;
constexpr double d6 = -1453857185.0 / 822651844.0;
constexpr double d7 = 69997945.0 / 29380423.0;

constexpr double step_safety = 0.9;
constexpr double fac_min = 0.2;   // max shrink per step: h/5
constexpr double fac_max = 10.0;  // max growth per step
constexpr double pi_beta = 0.04;  // PI stabilization
constexpr double expo1 = 0.2 - pi_beta * 0.75;

}  // namespace

void DenseStep::evaluate(double theta, std::span<double> out) const {
    const double th1 = 1.0 - theta;
    const auto& r1 = *rcont_[0];
    const auto& r2 = *rcont_[1];
    const auto& r3 = *rcont_[2];
    const auto& r4 = *rcont_[3];
    const auto& r5 = *rcont_[4];
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = r1[i] + theta * (r2[i] + th1 * (r3[i] + theta * (r4[i] + th1 * r5[i])));
    }
}

class Rk45Driver {
  public:
    Rk45Driver(const DerivFn& f, std::vector<double>& y, const IntegratorConfig& cfg,
               const StepObserver& observer)
        : f_(f), y_(y), cfg_(cfg), observer_(observer), n_(y.size()) {
        for (auto* v : {&k1_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &y_new_, &y_stage_, &y_old_})
            v->assign(n_, 0.0);
        for (auto& r : rcont_) r.assign(n_, 0.0);
    }

    IntegrationResult run() {
        IntegrationResult res;
        double t = 0.0;
        f_(t, y_, k1_);
        double h = initial_step(t);
        double facold = 1e-4;
        bool just_rejected = false;

        while (t < cfg_.t_max) {
            if (res.accepted_steps + res.rejected_steps >= cfg_.max_steps) {
                return fail(res, t, "max_steps exceeded");
            }
            const double remaining = cfg_.t_max - t;
            if (remaining <= 1e-14 * cfg_.t_max) break;  // done up to round-off
            h = std::min(h, remaining);
            if (!(h > std::abs(t) * 1e-14 + 1e-300)) {
                return fail(res, t, "step size underflow");
            }

            stages(t, h);
            const double err = error_norm();
            if (!std::isfinite(err)) {
                // NaN in the derivative or state; shrink and retry a few times,
                // then give up.
                ++res.rejected_steps;
                just_rejected = true;
                h *= 0.25;
                if (h < std::abs(t) * 1e-14 + 1e-300) {
                    return fail(res, t, "non-finite state (NaN/Inf) during step");
                }
                continue;
            }

            if (err <= 1.0) {
                // Accept.
                ++res.accepted_steps;
                const double t_new = t + h;
                dense_ready_ = false;
                last_t_ = t;
                last_h_ = h;
                std::swap(y_old_, y_);   // y_old_ <- previous state
                std::swap(y_, y_new_);   // y_ <- accepted state
                // FSAL: k7 = f(t_new, y_new).
                if (observer_) {
                    DenseStep dense = make_dense_handle();
                    StepView view{t, t_new, std::span<const double>(y_),
                                  std::span<const double>(k7_), &dense};
                    if (observer_(view) == StepDecision::stop) {
                        res.t_final = t_new;
                        res.stopped_by_observer = true;
                        return res;
                    }
                }
                std::swap(k1_, k7_);
                t = t_new;

                // PI controller.
                const double fac11 = std::pow(std::max(err, 1e-32), expo1);
                double fac = fac11 / std::pow(facold, pi_beta);
                fac = std::max(1.0 / fac_max, std::min(1.0 / fac_min, fac / step_safety));
                double h_new = h / fac;
                if (just_rejected) h_new = std::min(h_new, h);
                just_rejected = false;
                facold = std::max(err, 1e-4);
                h = h_new;
            } else {
                ++res.rejected_steps;
                just_rejected = true;
                const double fac11 = std::pow(err, expo1);
                h /= std::min(1.0 / fac_min, fac11 / step_safety);
            }
        }
        res.t_final = cfg_.t_max;
        return res;
    }

  private:
    IntegrationResult fail(IntegrationResult res, double t, const std::string& why) {
        res.ok = false;
        res.error = why;
        res.t_final = t;
        return res;
    }

    void stages(double t, double h) {
        auto& y = y_;
        for (std::size_t i = 0; i < n_; ++i) y_stage_[i] = y[i] + h * a21 * k1_[i];
        f_(t + c2 * h, y_stage_, k2_);
        for (std::size_t i = 0; i < n_; ++i)
            y_stage_[i] = y[i] + h * (a31 * k1_[i] + a32 * k2_[i]);
        f_(t + c3 * h, y_stage_, k3_);
        for (std::size_t i = 0; i < n_; ++i)
            y_stage_[i] = y[i] + h * (a41 * k1_[i] + a42 * k2_[i] + a43 * k3_[i]);
        f_(t + c4 * h, y_stage_, k4_);
        for (std::size_t i = 0; i < n_; ++i)
            y_stage_[i] =
                y[i] + h * (a51 * k1_[i] + a52 * k2_[i] + a53 * k3_[i] + a54 * k4_[i]);
        f_(t + c5 * h, y_stage_, k5_);
        for (std::size_t i = 0; i < n_; ++i)
            y_stage_[i] = y[i] + h * (a61 * k1_[i] + a62 * k2_[i] + a63 * k3_[i] +
                                      a64 * k4_[i] + a65 * k5_[i]);
        f_(t + h, y_stage_, k6_);
        for (std::size_t i = 0; i < n_; ++i)
            y_new_[i] = y[i] + h * (a71 * k1_[i] + a73 * k3_[i] + a74 * k4_[i] +
                                    a75 * k5_[i] + a76 * k6_[i]);
        f_(t + h, y_new_, k7_);
        h_cur_ = h;
    }

    double error_norm() const {
        double err = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            const double e = h_cur_ * (e1 * k1_[i] + e3 * k3_[i] + e4 * k4_[i] +
                                       e5 * k5_[i] + e6 * k6_[i] + e7 * k7_[i]);
            const double sc =
                cfg_.abs_tol + cfg_.rel_tol * std::max(std::abs(y_[i]), std::abs(y_new_[i]));
            err = std::max(err, std::abs(e) / sc);
        }
        return err;
    }

    double initial_step(double t) {
        // Hairer's hinit, max-norm variant.
        double d0 = 0.0, d1n = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            const double sc = cfg_.abs_tol + cfg_.rel_tol * std::abs(y_[i]);
            d0 = std::max(d0, std::abs(y_[i]) / sc);
            d1n = std::max(d1n, std::abs(k1_[i]) / sc);
        }
        double h0 = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * (d0 / d1n);
        h0 = std::min(h0, cfg_.t_max);
        for (std::size_t i = 0; i < n_; ++i) y_stage_[i] = y_[i] + h0 * k1_[i];
        f_(t + h0, y_stage_, k2_);
        double d2 = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            const double sc = cfg_.abs_tol + cfg_.rel_tol * std::abs(y_[i]);
            d2 = std::max(d2, std::abs(k2_[i] - k1_[i]) / sc);
        }
        d2 /= h0;
        const double dm = std::max(d1n, d2);
        double h1 = (dm <= 1e-15) ? std::max(1e-6, h0 * 1e-3)
                                  : std::pow(0.01 / dm, 0.2);
        return std::min({100.0 * h0, h1, cfg_.t_max});
    }

    DenseStep make_dense_handle() {
        if (!dense_ready_) build_rcont();
        DenseStep d;
        d.t_old_ = last_t_;
        d.h_ = last_h_;
        for (int j = 0; j < 5; ++j) d.rcont_[j] = &rcont_[j];
        return d;
    }

    void build_rcont() {
        // y_old_ holds the pre-step state, y_ the accepted one, k7_ = f(t_new).
        const double h = last_h_;
        for (std::size_t i = 0; i < n_; ++i) {
            const double ydiff = y_[i] - y_old_[i];
            const double bspl = h * k1_[i] - ydiff;
            rcont_[0][i] = y_old_[i];
            rcont_[1][i] = ydiff;
            rcont_[2][i] = bspl;
            rcont_[3][i] = ydiff - h * k7_[i] - bspl;
            rcont_[4][i] = h * (d1 * k1_[i] + d3 * k3_[i] + d4 * k4_[i] + d5 * k5_[i] +
                                d6 * k6_[i] + d7 * k7_[i]);
        }
        dense_ready_ = true;
    }

    const DerivFn& f_;
    std::vector<double>& y_;
    const IntegratorConfig& cfg_;
    const StepObserver& observer_;
    std::size_t n_;
    std::vector<double> k1_, k2_, k3_, k4_, k5_, k6_, k7_, y_new_, y_stage_, y_old_;
    std::vector<double> rcont_[5];
    double h_cur_ = 0.0, last_t_ = 0.0, last_h_ = 0.0;
    bool dense_ready_ = false;
};

IntegrationResult integrate_adaptive(const DerivFn& f, std::vector<double>& y,
                                     const IntegratorConfig& cfg,
                                     const StepObserver& observer) {
    Rk45Driver driver(f, y, cfg, observer);
    return driver.run();
}

}  // namespace supercorr
