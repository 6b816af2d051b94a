#include "supercorr/validate_suite.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include "supercorr/couplings.hpp"
#include "supercorr/cumulant_engine.hpp"
#include "supercorr/dicke_ladder.hpp"
#include "supercorr/geometry.hpp"
#include "supercorr/liouville.hpp"
#include "supercorr/moment_compiler.hpp"
#include "supercorr/peak_analysis.hpp"
#include "trajectory_recorder.hpp"

namespace supercorr {

namespace {

// Pinned acceptance tolerances.
constexpr double dicke_asymptote_target = 0.200;
constexpr double dicke_asymptote_tol = 0.004;
constexpr double dicke_asymptote_budget_s = 1.0;
constexpr double peak_formula_tol = 0.03;
constexpr double peak_formula_budget_s = 5.0;
constexpr double two_atom_grid_tol = 1e-6;
constexpr double two_atom_peak_tol = 0.02;
constexpr double oracle_rate_tol = 0.05;
constexpr double oracle_time_tol = 0.10;
constexpr double oracle_budget_s = 120.0;
constexpr double waveguide_beta_tol = 0.1;
constexpr double waveguide_time_consistency_tol = 0.15;
constexpr double waveguide_budget_s = 300.0;
constexpr double chain_ratio_tol = 0.10;
constexpr double chain_beta_tol = 0.15;
constexpr double chain_budget_s = 1800.0;
constexpr double balance_step_tol = 1e-8;    // times N*Gamma
constexpr double photon_total_tol = 0.01;    // |integral R - N| / N after depletion
constexpr double algebra_tol = 1e-10;
// Depletion caps for the conservation reruns; runs whose subradiant floor
// projects past the cap are reported with the premise unmet.
constexpr double ladder_deplete_t_max = 100.0;
constexpr double exact_deplete_t_max = 300.0;
constexpr double cumulant_deplete_t_max = 25000.0;

double two_atom_rate(double t) { return 2.0 * std::exp(-2.0 * t) * (1.0 + 2.0 * t); }

std::vector<double> grid(double t0, double t1, double dt) {
    std::vector<double> g;
    for (double t = t0; t <= t1 + 1e-12; t += dt) g.push_back(t);
    return g;
}

double sample_at(const Trajectory& traj, double t) {
    for (const auto& s : traj.samples)
        if (std::abs(s.t - t) < 1e-9) return s.rate;
    throw std::runtime_error("validation: missing sample at t = " + std::to_string(t));
}

std::string fmt(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof(buf), format, args);
    va_end(args);
    return buf;
}

struct RunDef {
    std::string label;
    int n = 0;
    std::function<Trajectory(StopRule, const IntegratorConfig&, int)> make;
    IntegratorConfig fast_cfg;
    StopRule fast_stop = StopRule::past_peak;
    double deplete_t_max = cumulant_deplete_t_max;
};

class Suite {
  public:
    explicit Suite(int threads) : threads_(std::max(1, threads)) { define_runs(); }

    ValidationReport run(std::vector<int> selection) {
        if (selection.empty()) selection = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
        ValidationReport report;
        for (int id : selection) {
            WallTimer timer;
            CheckResult res;
            try {
                res = dispatch(id);
            } catch (const std::exception& e) {
                res.id = id;
                res.name = "check " + std::to_string(id);
                res.pass = false;
                res.detail = std::string("exception: ") + e.what();
            }
            res.wall_s = timer.seconds();
            std::printf("[%2d] %s  %-28s %s  (%.1f s)\n", res.id,
                        res.pass ? "PASS" : "FAIL", res.name.c_str(), res.detail.c_str(),
                        res.wall_s);
            std::fflush(stdout);
            report.checks.push_back(std::move(res));
        }
        return report;
    }

  private:
    int threads_;
    std::map<std::string, RunDef> runs_;
    std::map<std::string, Trajectory> fast_cache_;

    void add_run(RunDef def) { runs_[def.label] = std::move(def); }

    void define_runs() {
        // Dicke ladder runs (criteria 1 and 2).
        for (int n : {10, 50, 100, 200}) {
            RunDef def;
            def.label = "ladder N=" + std::to_string(n);
            def.n = n;
            def.fast_cfg.t_max = 2.0;
            def.deplete_t_max = ladder_deplete_t_max;
            def.make = [n](StopRule stop, const IntegratorConfig& cfg, int) {
                EvolveOptions opts;
                opts.stop = stop;
                return evolve_ladder(n, cfg, opts);
            };
            add_run(def);
        }

        // Two-atom analytic runs (criterion 3), tight tolerances, fixed grid.
        const std::vector<double> two_atom_grid_pts = grid(0.05, 3.0, 0.05);
        auto tight = []() {
            IntegratorConfig cfg;
            cfg.rel_tol = 1e-9;
            cfg.abs_tol = 1e-12;
            cfg.t_max = 3.0;
            return cfg;
        };
        {
            RunDef def;
            def.label = "two-atom exact";
            def.n = 2;
            def.fast_cfg = tight();
            def.fast_stop = StopRule::t_max_only;
            def.deplete_t_max = exact_deplete_t_max;
            def.make = [two_atom_grid_pts](StopRule stop, const IntegratorConfig& cfg, int) {
                EvolveOptions opts;
                opts.stop = stop;
                if (stop == StopRule::t_max_only) opts.sample_times = two_atom_grid_pts;
                return evolve_exact(build_dicke(2), false, cfg, opts);
            };
            add_run(def);
        }
        {
            RunDef def;
            def.label = "two-atom ladder";
            def.n = 2;
            def.fast_cfg = tight();
            def.fast_stop = StopRule::t_max_only;
            def.deplete_t_max = ladder_deplete_t_max;
            def.make = [two_atom_grid_pts](StopRule stop, const IntegratorConfig& cfg, int) {
                EvolveOptions opts;
                opts.stop = stop;
                if (stop == StopRule::t_max_only) opts.sample_times = two_atom_grid_pts;
                return evolve_ladder(2, cfg, opts);
            };
            add_run(def);
        }
        {
            RunDef def;
            def.label = "two-atom cumulant3";
            def.n = 2;
            def.fast_cfg = tight();
            def.fast_stop = StopRule::t_max_only;
            def.deplete_t_max = exact_deplete_t_max;
            def.make = [](StopRule stop, const IntegratorConfig& cfg, int) {
                EvolveOptions opts;
                opts.stop = stop;
                return evolve_moments(build_dicke(2), 3, cfg, opts);
            };
            add_run(def);
        }

        // Small-N oracle configurations (criteria 4 and 5).
        auto add_model_run = [this](const std::string& label, int n,
                                    std::function<CouplingModel()> model_fn,
                                    const std::string& kind, double deplete_cap) {
            RunDef def;
            def.label = label;
            def.n = n;
            def.fast_cfg.t_max = 4.0;
            def.deplete_t_max = deplete_cap;
            if (kind == "exact") {
                def.make = [model_fn](StopRule stop, const IntegratorConfig& cfg,
                                      int threads) {
                    EvolveOptions opts;
                    opts.stop = stop;
                    opts.threads = threads;
                    return evolve_exact(model_fn(), false, cfg, opts);
                };
            } else {
                const int order = kind == "cumulant2" ? 2 : 3;
                def.make = [model_fn, order](StopRule stop, const IntegratorConfig& cfg,
                                             int threads) {
                    EvolveOptions opts;
                    opts.stop = stop;
                    opts.threads = threads;
                    return evolve_moments(model_fn(), order, cfg, opts);
                };
            }
            add_run(def);
        };
        auto dicke8 = []() { return build_dicke(8); };
        auto chain8 = []() {
            return build_free_space(
                build_lattice(LatticeKind::chain, {8}, 0.2, Polarization::circular), false);
        };
        auto wg8 = []() { return build_waveguide(8, pi / 2.0); };
        auto square9 = []() {
            return build_free_space(
                build_lattice(LatticeKind::square, {3, 3}, 0.2, Polarization::circular),
                false);
        };
        add_model_run("oracle dicke8 exact", 8, dicke8, "exact", exact_deplete_t_max);
        add_model_run("oracle dicke8 cumulant3", 8, dicke8, "cumulant3",
                      cumulant_deplete_t_max);
        add_model_run("oracle dicke8 cumulant2", 8, dicke8, "cumulant2",
                      cumulant_deplete_t_max);
        add_model_run("oracle chain8 exact", 8, chain8, "exact", exact_deplete_t_max);
        add_model_run("oracle chain8 cumulant3", 8, chain8, "cumulant3",
                      cumulant_deplete_t_max);
        add_model_run("oracle chain8 cumulant2", 8, chain8, "cumulant2",
                      cumulant_deplete_t_max);
        add_model_run("oracle waveguide8 exact", 8, wg8, "exact", exact_deplete_t_max);
        add_model_run("oracle waveguide8 cumulant3", 8, wg8, "cumulant3",
                      cumulant_deplete_t_max);
        add_model_run("oracle waveguide8 cumulant2", 8, wg8, "cumulant2",
                      cumulant_deplete_t_max);
        add_model_run("oracle square9 cumulant2", 9, square9, "cumulant2",
                      cumulant_deplete_t_max);
        add_model_run("oracle square9 cumulant3", 9, square9, "cumulant3",
                      cumulant_deplete_t_max);

        // Waveguide sweeps (criterion 6).
        for (double ka : {pi / 4.0, pi}) {
            for (int n = 20; n <= 100; n += 10) {
                RunDef def;
                def.label = fmt("waveguide ka=%.6f N=%d", ka, n);
                def.n = n;
                def.fast_cfg.t_max = 2.0;
                def.make = [n, ka](StopRule stop, const IntegratorConfig& cfg, int threads) {
                    EvolveOptions opts;
                    opts.stop = stop;
                    opts.threads = threads;
                    return evolve_moments(build_waveguide(n, ka), 2, cfg, opts);
                };
                add_run(def);
            }
        }

        // Free-space chain sweep (criterion 7).
        for (int n : {100, 144, 196}) {
            RunDef def;
            def.label = fmt("chain a=0.1 N=%d", n);
            def.n = n;
            def.fast_cfg.t_max = 3.0;
            def.make = [n](StopRule stop, const IntegratorConfig& cfg, int threads) {
                EvolveOptions opts;
                opts.stop = stop;
                opts.threads = threads;
                const EmitterArray arr =
                    build_lattice(LatticeKind::chain, {n}, 0.1, Polarization::circular);
                return evolve_moments(build_free_space(arr, false), 2, cfg, opts);
            };
            add_run(def);
        }
    }

    const Trajectory& fast(const std::string& label) {
        auto it = fast_cache_.find(label);
        if (it != fast_cache_.end()) return it->second;
        const RunDef& def = runs_.at(label);
        Trajectory traj = def.make(def.fast_stop, def.fast_cfg, threads_);
        traj.require_ok();
        return fast_cache_.emplace(label, std::move(traj)).first->second;
    }

    CheckResult dispatch(int id) {
        switch (id) {
            case 1: return check_dicke_asymptote();
            case 2: return check_dicke_peak_time();
            case 3: return check_two_atom();
            case 4: return check_small_n_oracle();
            case 5: return check_order2_overestimation();
            case 6: return check_waveguide_scaling();
            case 7: return check_chain_scaling();
            case 8: return check_conservation();
            case 9: return check_coupling_algebra();
            case 10: return check_hamiltonian_influence();
            case 11: return check_symbolic_layer();
            default: throw std::domain_error("unknown check id");
        }
    }

    CheckResult check_dicke_asymptote() {
        CheckResult res{1, "Dicke asymptote N=200", false, ""};
        WallTimer timer;
        const PeakResult pk = find_peak(fast("ladder N=200"));
        const double wall = timer.seconds();
        const double ratio = pk.r_peak / (200.0 * 200.0);
        res.pass = std::abs(ratio - dicke_asymptote_target) <= dicke_asymptote_tol &&
                   wall < dicke_asymptote_budget_s;
        res.detail = fmt("R_peak/(G N^2) = %.5f (target %.3f +- %.3f), %.2f s", ratio,
                         dicke_asymptote_target, dicke_asymptote_tol, wall);
        return res;
    }

    CheckResult check_dicke_peak_time() {
        CheckResult res{2, "Dicke peak time vs formula", false, ""};
        WallTimer timer;
        double worst = 0.0;
        int worst_n = 0;
        for (int n : {10, 50, 100, 200}) {
            const PeakResult pk = find_peak(fast("ladder N=" + std::to_string(n)));
            const double formula = peak_time_formula(n);
            const double dev = std::abs(pk.t_peak - formula) / formula;
            if (dev > worst) {
                worst = dev;
                worst_n = n;
            }
        }
        const double wall = timer.seconds();
        res.pass = worst <= peak_formula_tol && wall < peak_formula_budget_s;
        res.detail = fmt("max |t_peak - ln(N-1)/(N+1)| / formula = %.1f%% at N=%d "
                         "(tolerance %.0f%%), %.2f s",
                         100.0 * worst, worst_n, 100.0 * peak_formula_tol, wall);
        return res;
    }

    CheckResult check_two_atom() {
        CheckResult res{3, "two-atom analytic oracle", false, ""};
        const Trajectory& exact = fast("two-atom exact");
        const Trajectory& ladder = fast("two-atom ladder");
        double worst = 0.0;
        for (double t : grid(0.05, 3.0, 0.05)) {
            const double ref = two_atom_rate(t);
            worst = std::max(worst, std::abs(sample_at(exact, t) - ref) / ref);
            worst = std::max(worst, std::abs(sample_at(ladder, t) - ref) / ref);
        }
        const PeakResult pk3 = find_peak(fast("two-atom cumulant3"));
        const double peak_dev = std::abs(pk3.r_peak - 2.0) / 2.0;
        res.pass = worst <= two_atom_grid_tol && peak_dev <= two_atom_peak_tol;
        res.detail = fmt("exact/ladder max rel dev %.2e (tol 1e-6); order-3 peak dev "
                         "%.2e (tol 2e-2)",
                         worst, peak_dev);
        return res;
    }

    CheckResult check_small_n_oracle() {
        CheckResult res{4, "order-3 vs exact at N=8", false, ""};
        WallTimer timer;
        double worst_rate = 0.0, worst_time = 0.0;
        for (const char* cfg : {"dicke8", "chain8", "waveguide8"}) {
            const PeakResult pe = find_peak(fast(std::string("oracle ") + cfg + " exact"));
            const PeakResult p3 =
                find_peak(fast(std::string("oracle ") + cfg + " cumulant3"));
            worst_rate = std::max(worst_rate, std::abs(p3.r_peak - pe.r_peak) / pe.r_peak);
            worst_time = std::max(worst_time, std::abs(p3.t_peak - pe.t_peak) / pe.t_peak);
        }
        const double wall = timer.seconds();
        res.pass = worst_rate <= oracle_rate_tol && worst_time <= oracle_time_tol &&
                   wall < oracle_budget_s;
        res.detail = fmt("max rate dev %.2f%% (tol 5%%), max time dev %.2f%% (tol 10%%), "
                         "%.0f s",
                         100 * worst_rate, 100 * worst_time, wall);
        return res;
    }

    CheckResult check_order2_overestimation() {
        CheckResult res{5, "order-2 overestimation", false, ""};
        double min_margin = 1e300;
        std::string detail;
        for (const char* cfg : {"dicke8", "chain8", "waveguide8", "square9"}) {
            const PeakResult p2 =
                find_peak(fast(std::string("oracle ") + cfg + " cumulant2"));
            const PeakResult p3 =
                find_peak(fast(std::string("oracle ") + cfg + " cumulant3"));
            min_margin = std::min(min_margin, (p2.r_peak - p3.r_peak) / p3.r_peak);
        }
        res.pass = min_margin >= -1e-9;
        res.detail = fmt("min (R2 - R3)/R3 over 4 configurations = %+.3f%%",
                         100 * min_margin);
        return res;
    }

    CheckResult check_waveguide_scaling() {
        CheckResult res{6, "waveguide quadratic scaling", false, ""};
        WallTimer timer;
        bool ok = true;
        std::string detail;
        for (double ka : {pi / 4.0, pi}) {
            std::vector<std::pair<double, double>> pts;
            std::vector<double> consistency;
            for (int n = 20; n <= 100; n += 10) {
                const PeakResult pk = find_peak(fast(fmt("waveguide ka=%.6f N=%d", ka, n)));
                pts.push_back({double(n), pk.r_peak});
                consistency.push_back(pk.t_peak * n / std::log(double(n)));
            }
            const ScalingFit fit = fit_scaling(pts);
            double mean = 0.0;
            for (double c : consistency) mean += c;
            mean /= consistency.size();
            double worst_c = 0.0;
            for (double c : consistency)
                worst_c = std::max(worst_c, std::abs(c - mean) / mean);
            const bool series_ok = std::abs(fit.exponent - 2.0) <= waveguide_beta_tol &&
                                   worst_c <= waveguide_time_consistency_tol;
            ok = ok && series_ok;
            detail += fmt("ka=%s: beta=%.3f, t_peak*N/lnN spread %.0f%%%s; ",
                          ka > 1.0 ? "pi" : "pi/4", fit.exponent, 100 * worst_c,
                          series_ok ? "" : " (!)");
        }
        const double wall = timer.seconds();
        ok = ok && wall < waveguide_budget_s;
        res.pass = ok;
        res.detail = detail + fmt("%.0f s", wall);
        return res;
    }

    CheckResult check_chain_scaling() {
        CheckResult res{7, "1D chain linear scaling", false, ""};
        WallTimer timer;
        std::vector<std::pair<double, double>> pts;
        std::vector<double> ratios;
        for (int n : {100, 144, 196}) {
            const PeakResult pk = find_peak(fast(fmt("chain a=0.1 N=%d", n)));
            pts.push_back({double(n), pk.r_peak});
            ratios.push_back(pk.r_peak / n);
        }
        double mean = 0.0;
        for (double r : ratios) mean += r;
        mean /= ratios.size();
        double worst = 0.0;
        for (double r : ratios) worst = std::max(worst, std::abs(r - mean) / mean);
        const ScalingFit fit = fit_scaling(pts);
        const double wall = timer.seconds();
        res.pass = worst <= chain_ratio_tol && std::abs(fit.exponent - 1.0) <= chain_beta_tol &&
                   wall < chain_budget_s;
        res.detail = fmt("R_peak/N spread %.1f%% (tol 10%%), beta = %.3f (tol 1 +- 0.15), "
                         "%.0f s",
                         100 * worst, fit.exponent, wall);
        return res;
    }

    CheckResult check_conservation() {
        CheckResult res{8, "photon-number conservation", false, ""};
        double worst_step = 0.0;
        double worst_total = 0.0;
        int depleted = 0, unreachable = 0, failed = 0;
        std::string failures;

        // Per-step balance residuals on the criteria's own runs.
        for (const auto& [label, def] : runs_) {
            const Trajectory& quick = fast(label);
            worst_step = std::max(worst_step, quick.meta.max_balance_residual / def.n);
        }

        // Depletion reruns, independent jobs over the worker budget.
        std::vector<const RunDef*> defs;
        for (const auto& [label, def] : runs_) defs.push_back(&def);
        std::vector<Trajectory> reruns(defs.size());
        {
            std::atomic<std::size_t> next{0};
            const int workers = std::max(1, std::min<int>(threads_, int(defs.size())));
            auto body = [&]() {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= defs.size()) return;
                    IntegratorConfig cfg;
                    cfg.t_max = defs[i]->deplete_t_max;
                    cfg.sample_stride = 32;
                    cfg.max_steps = 4000000;
                    reruns[i] = defs[i]->make(StopRule::depleted, cfg,
                                              workers > 1 ? 1 : threads_);
                }
            };
            std::vector<std::thread> pool;
            for (int w = 1; w < workers; ++w) pool.emplace_back(body);
            body();
            for (auto& th : pool) th.join();
        }

        for (std::size_t i = 0; i < defs.size(); ++i) {
            const RunDef& def = *defs[i];
            const std::string& label = def.label;
            Trajectory& dep = reruns[i];
            worst_step = std::max(worst_step, dep.meta.max_balance_residual / def.n);
            const double identity =
                std::abs(dep.meta.photons_emitted + dep.meta.final_excitation - def.n) /
                def.n;
            if (identity > 1e-6) {
                ++failed;
                failures += " [" + label + ": bookkeeping identity broken]";
                continue;
            }
            if (dep.meta.status != RunStatus::ok) {
                // A loud closure-breakdown abort far past the peak ends the
                // truncation's validity window before depletion; the premise
                // is unreachable for that run. Anything else is a failure.
                const bool breakdown = dep.meta.status_detail.find("closure breakdown") !=
                                       std::string::npos;
                const double t_peak = find_peak(dep).t_peak;
                if (breakdown && dep.final_time() > 10.0 * std::max(t_peak, 1e-3)) {
                    ++unreachable;
                } else {
                    ++failed;
                    failures += " [" + label + ": " + dep.meta.status_detail + "]";
                }
                continue;
            }
            if (dep.meta.stop_reason == "depleted") {
                ++depleted;
                worst_total = std::max(
                    worst_total, std::abs(dep.meta.photons_emitted - def.n) / def.n);
            } else {
                // Premise (N_exc < 1e-3 N) not reachable under the cap; verify
                // the remainder really is a subradiant floor, not a budget
                // artifact.
                const double rate = dep.samples.back().rate;
                const double n_exc = dep.meta.final_excitation;
                const double eff = n_exc > 0 ? rate / n_exc : 0.0;
                const double target = 1e-3 * def.n;
                const double projected =
                    eff > 0 ? dep.final_time() + std::log(n_exc / target) / eff : 1e300;
                if (projected < 2.0 * def.deplete_t_max) {
                    ++failed;  // would deplete soon; the cap is not the issue
                    failures += " [" + label + ": undersized depletion cap]";
                } else {
                    ++unreachable;
                }
            }
        }
        res.pass = failed == 0 && worst_step <= balance_step_tol &&
                   worst_total <= photon_total_tol && depleted > 0;
        res.detail = fmt("step balance max %.1e NG (tol 1e-8); %d runs depleted with "
                         "max |photons-N|/N %.2e (tol 1e-2); %d depletion-unreachable "
                         "(identity verified); %d failed%s",
                         worst_step, depleted, worst_total, unreachable, failed,
                         failures.c_str());
        return res;
    }

    CheckResult check_coupling_algebra() {
        CheckResult res{9, "coupling algebra", false, ""};
        std::mt19937 rng(20240817u);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        double worst_orth = 0.0, worst_sum = 0.0, worst_rec = 0.0, worst_emission = 0.0;
        for (int trial = 0; trial < 20; ++trial) {
            const int n = 2 + int(unif(rng) * 10.99);
            const double a = 0.05 + 1.45 * unif(rng);
            const Polarization pol =
                trial % 2 == 0 ? Polarization::circular : Polarization::linear;
            CouplingModel model;
            switch (trial % 6) {
                case 0: model = build_free_space(
                            build_lattice(LatticeKind::chain, {n}, a, pol), false);
                        break;
                case 1: model = build_free_space(
                            build_lattice(LatticeKind::ring, {std::max(n, 3)}, a, pol),
                            false);
                        break;
                case 2: model = build_free_space(
                            build_lattice(LatticeKind::square, {2, 1 + n / 2}, a, pol),
                            false);
                        break;
                case 3: model = build_free_space(
                            build_lattice(LatticeKind::cube, {2, 2, 1 + n / 4}, a, pol),
                            false);
                        break;
                case 4: model = build_waveguide(n, 2.0 * pi * unif(rng)); break;
                default: {
                    EmitterArray arr;
                    arr.kind = LatticeKind::custom;
                    arr.polarization = polarization_vector(pol);
                    while (arr.n() < n) {
                        Vec3 cand{1.2 * unif(rng), 1.2 * unif(rng), 1.2 * unif(rng)};
                        bool far = true;
                        for (const Vec3& p : arr.positions)
                            far = far && (p - cand).norm() > 0.03;
                        if (far) arr.positions.push_back(cand);
                    }
                    model = build_free_space(arr, false);
                }
            }
            const int nn = model.n;
            const JumpDecomposition jd = jump_decomposition(model);
            for (int k = 0; k < nn; ++k)
                for (int l = 0; l < nn; ++l) {
                    double dot = 0.0;
                    for (int i = 0; i < nn; ++i) dot += jd.c(k, i) * jd.c(l, i);
                    worst_orth = std::max(worst_orth, std::abs(dot - (k == l ? 1.0 : 0.0)));
                }
            for (int i = 0; i < nn; ++i) {
                double s = 0.0;
                for (int k = 0; k < nn; ++k) s += jd.rates[k] * jd.c(k, i) * jd.c(k, i);
                worst_sum = std::max(worst_sum, std::abs(s - model.unit_rate));
            }
            for (int i = 0; i < nn; ++i)
                for (int j = 0; j < nn; ++j) {
                    double s = 0.0;
                    for (int k = 0; k < nn; ++k) s += jd.rates[k] * jd.c(k, i) * jd.c(k, j);
                    worst_rec = std::max(worst_rec, std::abs(s - model.g(i, j)));
                }

            // Two forms of the emission rate on a random Hermitian correlation.
            std::normal_distribution<double> gauss(0.0, 1.0);
            std::vector<cdouble> m(std::size_t(nn) * nn);
            for (auto& v : m) v = cdouble(gauss(rng), gauss(rng));
            std::vector<cdouble> corr(std::size_t(nn) * nn, 0.0);
            double max_diag = 0.0;
            for (int i = 0; i < nn; ++i)
                for (int j = 0; j < nn; ++j) {
                    cdouble acc = 0.0;
                    for (int k = 0; k < nn; ++k)
                        acc += m[std::size_t(i) * nn + k] *
                               std::conj(m[std::size_t(j) * nn + k]);
                    corr[std::size_t(i) * nn + j] = acc;
                    if (i == j) max_diag = std::max(max_diag, acc.real());
                }
            for (auto& v : corr) v *= 0.9 / max_diag;
            const double site_form = emission_rate(model, corr);
            double eigen_form = 0.0;
            for (int k = 0; k < nn; ++k) {
                cdouble mode = 0.0;
                for (int i = 0; i < nn; ++i)
                    for (int j = 0; j < nn; ++j)
                        mode += jd.c(k, i) * corr[std::size_t(i) * nn + j] * jd.c(k, j);
                eigen_form += jd.rates[k] * mode.real();
            }
            worst_emission =
                std::max(worst_emission, std::abs(site_form - eigen_form) /
                                             std::max(1.0, std::abs(site_form)));
        }
        res.pass = worst_orth <= algebra_tol && worst_sum <= algebra_tol &&
                   worst_rec <= algebra_tol && worst_emission <= algebra_tol;
        res.detail = fmt("orthonormality %.1e, sum rule %.1e, reconstruction %.1e, "
                         "emission forms %.1e (tol 1e-10)",
                         worst_orth, worst_sum, worst_rec, worst_emission);
        return res;
    }

    CheckResult check_hamiltonian_influence() {
        CheckResult res{10, "coherent-coupling influence", false, ""};
        IntegratorConfig cfg;
        cfg.t_max = 3.0;
        EvolveOptions opts;
        opts.stop = StopRule::past_peak;
        opts.threads = threads_;
        double gap_small = 0.0, gap_large = 0.0, peak_off_small = 0.0, peak_on_small = 0.0;
        for (double a : {0.05, 0.15}) {
            const EmitterArray ring =
                build_lattice(LatticeKind::ring, {10}, a, Polarization::circular);
            const CouplingModel model = build_free_space(ring, true);
            Trajectory off = evolve_exact(model, false, cfg, opts);
            Trajectory on = evolve_exact(model, true, cfg, opts);
            off.require_ok();
            on.require_ok();
            const double r_off = find_peak(off).r_peak;
            const double r_on = find_peak(on).r_peak;
            if (a < 0.1) {
                gap_small = r_off - r_on;
                peak_off_small = r_off;
                peak_on_small = r_on;
            } else {
                gap_large = r_off - r_on;
            }
        }
        res.pass = peak_on_small <= peak_off_small + 1e-9 && gap_small > gap_large;
        res.detail = fmt("ring N=10: a=0.05 peak %.3f -> %.3f with H (gap %.3f); "
                         "a=0.15 gap %.3f (must shrink)",
                         peak_off_small, peak_on_small, gap_small, gap_large);
        return res;
    }

    CheckResult check_symbolic_layer() {
        CheckResult res{11, "symbolic layer", false, ""};
        // Three-operator expansion pattern with generic charge-neutral content.
        const std::vector<std::pair<int, SiteOp>> zzz = {
            {0, SiteOp::z}, {1, SiteOp::z}, {2, SiteOp::z}};
        const MomentExpansion e3 = cumulant_expand(zzz, 2, false);
        bool eq4 = e3.terms.size() == 4;
        int singles = 0, triple_products = 0;
        for (const auto& t : e3.terms) {
            if (t.blocks.size() == 2 && std::abs(t.coeff - 1.0) < 1e-14) ++singles;
            if (t.blocks.size() == 3 && std::abs(t.coeff + 2.0) < 1e-14) ++triple_products;
        }
        eq4 = eq4 && singles == 3 && triple_products == 1;

        // Charge pruning leaves exactly the population-times-coherence term.
        const std::vector<std::pair<int, SiteOp>> pmz = {
            {0, SiteOp::plus}, {1, SiteOp::minus}, {2, SiteOp::z}};
        const MomentExpansion ep = cumulant_expand(pmz, 2, true);
        const bool pruned_ok = ep.terms.size() == 1 && ep.terms[0].blocks.size() == 2 &&
                               std::abs(ep.terms[0].coeff - 1.0) < 1e-14;

        // Bell-number bookkeeping at M = 4.
        const bool bell_ok = set_partitions(4).size() == 15;
        const std::vector<std::pair<int, SiteOp>> zzzz = {
            {0, SiteOp::z}, {1, SiteOp::z}, {2, SiteOp::z}, {3, SiteOp::z}};
        const bool fourteen_ok = cumulant_expand(zzzz, 3, false).terms.size() == 14;

        // Normal-ordering confluence on random products.
        std::mt19937 rng(777u);
        std::uniform_int_distribution<int> site_dist(0, 3), op_dist(0, 2), len_dist(2, 6);
        int confluent = 0;
        const int trials = 1000;
        for (int t = 0; t < trials; ++t) {
            const int len = len_dist(rng);
            std::vector<std::pair<int, SiteOp>> ops;
            for (int i = 0; i < len; ++i)
                ops.push_back({site_dist(rng), static_cast<SiteOp>(op_dist(rng))});
            SpinPoly left{SpinMonomial{}};
            for (const auto& [site, op] : ops) left = right_multiply(left, site, op);
            SpinPoly right{SpinMonomial{}};
            for (auto it = ops.rbegin(); it != ops.rend(); ++it)
                right = left_multiply(right, it->first, it->second);
            left = collect(std::move(left));
            right = collect(std::move(right));
            bool same = left.size() == right.size();
            for (std::size_t i = 0; same && i < left.size(); ++i)
                same = left[i].sites == right[i].sites &&
                       std::abs(left[i].coeff - right[i].coeff) < 1e-12;
            if (same) ++confluent;
        }
        res.pass = eq4 && pruned_ok && bell_ok && fourteen_ok && confluent == trials;
        res.detail = fmt("3-op expansion %s; pruning %s; partitions(4)=15 %s; 14 terms %s; "
                         "confluence %d/%d",
                         eq4 ? "ok" : "BAD", pruned_ok ? "ok" : "BAD",
                         bell_ok ? "ok" : "BAD", fourteen_ok ? "ok" : "BAD", confluent,
                         trials);
        return res;
    }
};

}  // namespace

ValidationReport run_validation(const std::vector<int>& selection, int threads) {
    Suite suite(threads);
    return suite.run(selection);
}

int cmd_validate(const std::vector<int>& selection, int threads) {
    const ValidationReport report = run_validation(selection, threads);
    std::printf("%s\n", report.all_pass() ? "ALL CHECKS PASSED" : "CHECK FAILURES PRESENT");
    return report.all_pass() ? 0 : 1;
}

}  // namespace supercorr
