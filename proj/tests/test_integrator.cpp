#include <doctest.h>

#include <cmath>
#include <vector>

#include "supercorr/dicke_ladder.hpp"
#include "supercorr/integrator.hpp"
#include "supercorr/types.hpp"

using namespace supercorr;

TEST_CASE("scalar exponential decay") {
    std::vector<double> y{1.0};
    IntegratorConfig cfg;
    cfg.t_max = 1.0;
    auto res = integrate_adaptive(
        [](double, std::span<const double> s, std::span<double> ds) { ds[0] = -s[0]; }, y,
        cfg, nullptr);
    CHECK(res.ok);
    CHECK(std::abs(y[0] - std::exp(-1.0)) < 1e-6);
}

TEST_CASE("harmonic oscillator over one period") {
    std::vector<double> y{1.0, 0.0};
    IntegratorConfig cfg;
    cfg.t_max = 2.0 * pi;
    cfg.rel_tol = 1e-8;
    cfg.abs_tol = 1e-10;
    auto res = integrate_adaptive(
        [](double, std::span<const double> s, std::span<double> ds) {
            ds[0] = s[1];
            ds[1] = -s[0];
        },
        y, cfg, nullptr);
    CHECK(res.ok);
    CHECK(std::abs(y[0] - 1.0) < 1e-5);
    CHECK(std::abs(y[1]) < 1e-5);
}

TEST_CASE("dense output matches the analytic solution inside steps") {
    std::vector<double> y{0.0};
    IntegratorConfig cfg;
    cfg.t_max = 2.0;
    cfg.rel_tol = 1e-8;
    cfg.abs_tol = 1e-11;
    double worst = 0.0;
    auto res = integrate_adaptive(
        [](double t, std::span<const double>, std::span<double> ds) { ds[0] = std::cos(t); },
        y, cfg,
        [&](const StepView& v) {
            std::vector<double> u(1);
            for (double theta : {0.25, 0.5, 0.75}) {
                v.dense->evaluate(theta, u);
                const double t = v.t_old + theta * (v.t_new - v.t_old);
                worst = std::max(worst, std::abs(u[0] - std::sin(t)));
            }
            return StepDecision::continue_run;
        });
    CHECK(res.ok);
    CHECK(worst < 1e-7);
}

TEST_CASE("adaptive ladder run matches a fixed-step reference") {
    // Fixed-step RK4 at dt = 1e-5 as the brute-force reference for N = 50.
    const int n = 50;
    const std::vector<double> h = ladder_rates(n);
    std::vector<double> p(n + 1, 0.0);
    p[n] = 1.0;
    auto rate = [&](const std::vector<double>& q) {
        double r = 0;
        for (int m = 1; m <= n; ++m) r += h[m] * q[m];
        return r;
    };
    auto deriv = [&](const std::vector<double>& q, std::vector<double>& dq) {
        for (int m = 0; m <= n; ++m)
            dq[m] = (m + 1 <= n ? h[m + 1] * q[m + 1] : 0.0) - h[m] * q[m];
    };
    const double dt = 1e-5;
    std::vector<double> k1(n + 1), k2(n + 1), k3(n + 1), k4(n + 1), tmp(n + 1);
    std::vector<double> grid = {0.02, 0.05, 0.08, 0.12, 0.2};
    std::vector<double> ref;
    double t = 0.0;
    std::size_t gi = 0;
    while (gi < grid.size()) {
        if (t >= grid[gi] - dt / 2) {
            ref.push_back(rate(p));
            ++gi;
        }
        deriv(p, k1);
        for (int i = 0; i <= n; ++i) tmp[i] = p[i] + 0.5 * dt * k1[i];
        deriv(tmp, k2);
        for (int i = 0; i <= n; ++i) tmp[i] = p[i] + 0.5 * dt * k2[i];
        deriv(tmp, k3);
        for (int i = 0; i <= n; ++i) tmp[i] = p[i] + dt * k3[i];
        deriv(tmp, k4);
        for (int i = 0; i <= n; ++i)
            p[i] += dt / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
        t += dt;
    }

    IntegratorConfig cfg;
    cfg.rel_tol = 1e-9;
    cfg.abs_tol = 1e-12;
    cfg.t_max = 0.25;
    EvolveOptions opts;
    opts.stop = StopRule::t_max_only;
    opts.sample_times = grid;
    const Trajectory traj = evolve_ladder(n, cfg, opts);
    traj.require_ok();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        double got = -1;
        for (const auto& s : traj.samples)
            if (std::abs(s.t - grid[i]) < 1e-9) got = s.rate;
        REQUIRE(got >= 0);
        CHECK(std::abs(got - ref[i]) / ref[i] < 1e-6);
    }
}

TEST_CASE("max_steps exhaustion is reported, not looped") {
    std::vector<double> y{1.0};
    IntegratorConfig cfg;
    cfg.t_max = 1e6;
    cfg.max_steps = 50;
    auto res = integrate_adaptive(
        [](double, std::span<const double> s, std::span<double> ds) { ds[0] = -s[0]; }, y,
        cfg, nullptr);
    CHECK(!res.ok);
    CHECK(res.error.find("max_steps") != std::string::npos);
}

TEST_CASE("integration is deterministic") {
    auto run = [] {
        std::vector<double> y{1.0, 0.3};
        IntegratorConfig cfg;
        cfg.t_max = 3.0;
        integrate_adaptive(
            [](double, std::span<const double> s, std::span<double> ds) {
                ds[0] = -s[0] + 0.1 * s[1];
                ds[1] = -2.0 * s[1];
            },
            y, cfg, nullptr);
        return y;
    };
    const auto a = run();
    const auto b = run();
    CHECK(a[0] == b[0]);
    CHECK(a[1] == b[1]);
}
