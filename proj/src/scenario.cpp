#include "supercorr/scenario.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <thread>

#include <json.hpp>

#include "supercorr/cumulant_engine.hpp"
#include "supercorr/dicke_ladder.hpp"
#include "supercorr/errors.hpp"
#include "trajectory_recorder.hpp"

namespace supercorr {

using nlohmann::json;

const char* to_string(Method m) {
    switch (m) {
        case Method::exact: return "exact";
        case Method::exact_with_hamiltonian: return "exact_with_hamiltonian";
        case Method::dicke: return "dicke";
        case Method::cumulant2: return "cumulant2";
        case Method::cumulant3: return "cumulant3";
    }
    return "?";
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

void reject_unknown_keys(const json& obj, const std::vector<std::string>& allowed,
                         const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        bool ok = false;
        for (const auto& a : allowed) ok = ok || (key == a);
        if (!ok)
            throw config_error("config: unknown key '" + key + "' in " + where);
    }
}

double get_number(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || !j[key].is_number())
        throw config_error("config: " + where + " needs numeric '" + key + "'");
    return j[key].get<double>();
}

GeometrySpec parse_geometry(const json& g) {
    reject_unknown_keys(g, {"kind", "dims", "a", "polarization", "path"}, "geometry");
    GeometrySpec spec;
    const std::string kind = g.value("kind", "");
    if (kind == "chain") spec.kind = LatticeKind::chain;
    else if (kind == "ring") spec.kind = LatticeKind::ring;
    else if (kind == "square") spec.kind = LatticeKind::square;
    else if (kind == "cube") spec.kind = LatticeKind::cube;
    else if (kind == "custom") spec.kind = LatticeKind::custom;
    else throw config_error("config: geometry.kind must be chain|ring|square|cube|custom");

    if (spec.kind == LatticeKind::custom) {
        if (!g.contains("path") || !g["path"].is_string())
            throw config_error("config: custom geometry needs 'path'");
        spec.custom_path = g["path"].get<std::string>();
        if (g.contains("dims") || g.contains("a") || g.contains("polarization"))
            throw config_error("config: custom geometry takes only 'path'");
        return spec;
    }
    if (!g.contains("dims") || !g["dims"].is_array() || g["dims"].empty())
        throw config_error("config: geometry.dims must be a non-empty array");
    for (const auto& d : g["dims"]) {
        if (!d.is_number_integer() || d.get<int>() < 1)
            throw config_error("config: geometry.dims entries must be positive integers");
        spec.dims.push_back(d.get<int>());
    }
    if (g.contains("a")) spec.spacing = get_number(g, "a", "geometry");
    const std::string pol = g.value("polarization", "circular");
    if (pol == "circular") spec.polarization = Polarization::circular;
    else if (pol == "linear") spec.polarization = Polarization::linear;
    else throw config_error("config: polarization must be circular|linear");
    return spec;
}

int lattice_total(const GeometrySpec& g) {
    int n = 1;
    for (int d : g.dims) n *= d;
    return n;
}

// Side lengths for a requested total emitter number in an N-sweep.
std::optional<std::vector<int>> dims_for_total(LatticeKind kind, int n) {
    switch (kind) {
        case LatticeKind::chain:
        case LatticeKind::ring: return std::vector<int>{n};
        case LatticeKind::square: {
            const int s = static_cast<int>(std::lround(std::sqrt(double(n))));
            if (s * s != n) return std::nullopt;
            return std::vector<int>{s, s};
        }
        case LatticeKind::cube: {
            const int s = static_cast<int>(std::lround(std::cbrt(double(n))));
            if (s * s * s != n) return std::nullopt;
            return std::vector<int>{s, s, s};
        }
        default: return std::nullopt;
    }
}

}  // namespace

ScenarioConfig parse_scenario_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw config_error(std::string("config: invalid JSON: ") + e.what());
    }
    reject_unknown_keys(j,
                        {"geometry", "reservoir", "method", "integrator", "stop",
                         "exact_cap", "sweep", "output"},
                        "top level");

    ScenarioConfig cfg;
    if (!j.contains("geometry"))
        throw config_error("config: missing 'geometry'");
    cfg.geometry = parse_geometry(j["geometry"]);

    if (j.contains("reservoir")) {
        const json& r = j["reservoir"];
        reject_unknown_keys(r, {"type", "ka"}, "reservoir");
        const std::string type = r.value("type", "free_space");
        if (type == "free_space") {
            cfg.reservoir = Reservoir::free_space;
            if (r.contains("ka"))
                throw config_error("config: 'ka' only applies to waveguide reservoirs");
        } else if (type == "waveguide") {
            cfg.reservoir = Reservoir::waveguide;
            cfg.waveguide_ka = get_number(r, "ka", "reservoir");
        } else {
            throw config_error("config: reservoir.type must be free_space|waveguide");
        }
    }

    const std::string method = j.value("method", "");
    if (method == "exact") cfg.method = Method::exact;
    else if (method == "exact_with_hamiltonian") cfg.method = Method::exact_with_hamiltonian;
    else if (method == "dicke") cfg.method = Method::dicke;
    else if (method == "cumulant2") cfg.method = Method::cumulant2;
    else if (method == "cumulant3") cfg.method = Method::cumulant3;
    else throw config_error(
        "config: method must be exact|exact_with_hamiltonian|dicke|cumulant2|cumulant3");

    if (j.contains("integrator")) {
        const json& i = j["integrator"];
        reject_unknown_keys(i, {"rel_tol", "abs_tol", "t_max", "max_steps", "sample_stride"},
                            "integrator");
        if (i.contains("rel_tol")) cfg.integrator.rel_tol = get_number(i, "rel_tol", "integrator");
        if (i.contains("abs_tol")) cfg.integrator.abs_tol = get_number(i, "abs_tol", "integrator");
        if (i.contains("t_max")) cfg.integrator.t_max = get_number(i, "t_max", "integrator");
        if (i.contains("max_steps"))
            cfg.integrator.max_steps = static_cast<long>(get_number(i, "max_steps", "integrator"));
        if (i.contains("sample_stride"))
            cfg.integrator.sample_stride =
                static_cast<int>(get_number(i, "sample_stride", "integrator"));
        if (cfg.integrator.rel_tol <= 0 || cfg.integrator.abs_tol <= 0 ||
            cfg.integrator.t_max <= 0)
            throw config_error("config: integrator tolerances and t_max must be positive");
    }

    const std::string stop = j.value("stop", "depleted");
    if (stop == "t_max") cfg.stop = StopRule::t_max_only;
    else if (stop == "past_peak") cfg.stop = StopRule::past_peak;
    else if (stop == "depleted") cfg.stop = StopRule::depleted;
    else throw config_error("config: stop must be t_max|past_peak|depleted");

    if (j.contains("exact_cap")) {
        if (!j["exact_cap"].is_number_integer())
            throw config_error("config: exact_cap must be an integer");
        cfg.exact_cap = j["exact_cap"].get<int>();
    }

    if (j.contains("sweep")) {
        const json& s = j["sweep"];
        reject_unknown_keys(s, {"N", "a", "ka"}, "sweep");
        if (s.contains("N"))
            for (const auto& v : s["N"]) cfg.sweep.n_values.push_back(v.get<int>());
        if (s.contains("a"))
            for (const auto& v : s["a"]) cfg.sweep.a_values.push_back(v.get<double>());
        if (s.contains("ka"))
            for (const auto& v : s["ka"]) cfg.sweep.ka_values.push_back(v.get<double>());
    }

    if (j.contains("output")) {
        const json& o = j["output"];
        reject_unknown_keys(o, {"dir", "formats"}, "output");
        if (o.contains("dir")) cfg.output_dir = o["dir"].get<std::string>();
        if (o.contains("formats"))
            for (const auto& f : o["formats"]) {
                const std::string fmt = f.get<std::string>();
                if (fmt == "json") cfg.write_json = true;
                else if (fmt != "csv")
                    throw config_error("config: output.formats entries must be csv|json");
            }
    }

    // Cross-field validation.
    if (cfg.reservoir == Reservoir::waveguide) {
        if (cfg.method == Method::exact_with_hamiltonian)
            throw config_error(
                "config: the waveguide reservoir model has no coherent coupling term");
        if (cfg.geometry.kind == LatticeKind::custom)
            throw config_error("config: waveguide reservoirs take an indexed chain, not "
                               "custom positions");
        if (cfg.method == Method::dicke) {
            const double r = std::remainder(cfg.waveguide_ka, 2.0 * pi);
            if (std::abs(r) > 1e-12)
                throw config_error(
                    "config: the dicke method needs ka to be a multiple of 2*pi");
        }
    } else if (cfg.method != Method::dicke && cfg.geometry.kind != LatticeKind::custom &&
               !cfg.geometry.spacing) {
        throw config_error("config: free-space lattices need geometry.a");
    }

    if (!cfg.sweep.empty()) {
        if (cfg.geometry.kind == LatticeKind::custom)
            throw config_error("config: sweeps need a parametric geometry, not custom");
        if (!cfg.sweep.ka_values.empty() && cfg.reservoir != Reservoir::waveguide)
            throw config_error("config: a ka sweep needs a waveguide reservoir");
        if (!cfg.sweep.a_values.empty() && cfg.reservoir != Reservoir::free_space)
            throw config_error("config: an a sweep needs the free-space reservoir");
        if (!cfg.sweep.a_values.empty() && !cfg.sweep.ka_values.empty())
            throw config_error("config: sweep over either a or ka, not both");
    }

    const int n0 = cfg.geometry.kind == LatticeKind::custom ? 0 : lattice_total(cfg.geometry);
    if ((cfg.method == Method::exact || cfg.method == Method::exact_with_hamiltonian) &&
        cfg.sweep.empty() && n0 > cfg.exact_cap)
        throw config_error("config: exact methods are capped at N = " +
                           std::to_string(cfg.exact_cap));
    return cfg;
}

ScenarioConfig parse_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("config: cannot open '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_scenario_text(text);
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

PointResult run_point(const ScenarioConfig& cfg, std::optional<int> n_override,
                      std::optional<double> a_override, std::optional<double> ka_override,
                      int threads, bool keep_trajectory) {
    PointResult pt;
    pt.method = to_string(cfg.method);
    WallTimer timer;
    try {
        EmitterArray array;
        double ka = ka_override.value_or(cfg.waveguide_ka);
        if (cfg.geometry.kind == LatticeKind::custom) {
            array = load_custom(cfg.geometry.custom_path);
            if (cfg.reservoir == Reservoir::free_space) pt.polarization = "custom";
        } else {
            std::vector<int> dims = cfg.geometry.dims;
            if (n_override) {
                const auto d = dims_for_total(cfg.geometry.kind, *n_override);
                if (!d) {
                    pt.n = *n_override;
                    pt.status = "invalid_N_for_lattice";
                    pt.wall_time_s = timer.seconds();
                    return pt;
                }
                dims = *d;
            }
            const double a = a_override.value_or(cfg.geometry.spacing.value_or(1.0));
            array = build_lattice(cfg.geometry.kind, dims, a, cfg.geometry.polarization);
            if (cfg.reservoir == Reservoir::free_space && cfg.method != Method::dicke) {
                pt.a = a;
                pt.polarization =
                    cfg.geometry.polarization == Polarization::circular ? "circular" : "linear";
            }
        }
        pt.n = array.n();
        if (cfg.reservoir == Reservoir::waveguide) pt.ka = ka;

        if (cfg.method == Method::cumulant3 && pt.n > 200)
            std::cerr << "warning: cumulant3 beyond N = 200 gets expensive and less tested\n";
        if (cfg.method == Method::cumulant2 && pt.n > 400)
            std::cerr << "warning: cumulant2 beyond N = 400 gets expensive and less tested\n";

        EvolveOptions opts;
        opts.stop = cfg.stop;
        opts.threads = threads;

        Trajectory traj;
        switch (cfg.method) {
            case Method::dicke:
                traj = evolve_ladder(pt.n, cfg.integrator, opts);
                break;
            case Method::exact:
            case Method::exact_with_hamiltonian: {
                if (pt.n > cfg.exact_cap)
                    throw capacity_error("exact method capped at N = " +
                                         std::to_string(cfg.exact_cap));
                const bool with_h = cfg.method == Method::exact_with_hamiltonian;
                if (cfg.reservoir == Reservoir::waveguide) {
                    traj = evolve_exact(build_waveguide(pt.n, ka), with_h, cfg.integrator,
                                        opts, cfg.exact_cap);
                } else {
                    traj = evolve_exact(build_free_space(array, with_h), with_h,
                                        cfg.integrator, opts, cfg.exact_cap);
                }
                break;
            }
            case Method::cumulant2:
            case Method::cumulant3: {
                const int order = cfg.method == Method::cumulant2 ? 2 : 3;
                const CouplingModel model = cfg.reservoir == Reservoir::waveguide
                                                ? build_waveguide(pt.n, ka)
                                                : build_free_space(array, false);
                traj = evolve_moments(model, order, cfg.integrator, opts);
                break;
            }
        }
        traj.meta.geometry = to_string(cfg.geometry.kind);
        pt.method = traj.meta.method;
        if (traj.meta.status != RunStatus::ok) pt.status = "integration_failure";
        pt.peak = find_peak(traj);
        if (keep_trajectory) pt.trajectory = std::move(traj);
    } catch (const config_error&) {
        throw;
    } catch (const std::exception& e) {
        pt.status = std::string("error: ") + e.what();
    }
    pt.wall_time_s = timer.seconds();
    return pt;
}

namespace {

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

std::string peaks_csv_header() {
    return "method,N,a,ka,pol,R_peak,t_peak,boundary,status,walltime_s\n";
}

std::string peaks_csv_row(const PointResult& pt) {
    std::string row = pt.method;
    row += "," + std::to_string(pt.n);
    row += ",";
    if (pt.a) row += format_double(*pt.a);
    row += ",";
    if (pt.ka) row += format_double(*pt.ka);
    row += "," + pt.polarization;
    row += "," + format_double(pt.peak.r_peak);
    row += "," + format_double(pt.peak.t_peak);
    row += pt.peak.boundary_peak ? ",1" : ",0";
    row += "," + (pt.status.empty() ? std::string("ok") : pt.status);
    row += "," + format_double(pt.wall_time_s) + "\n";
    return row;
}

json point_json(const PointResult& pt) {
    json j;
    j["method"] = pt.method;
    j["N"] = pt.n;
    if (pt.a) j["a"] = *pt.a;
    if (pt.ka) j["ka"] = *pt.ka;
    if (!pt.polarization.empty()) j["pol"] = pt.polarization;
    j["R_peak"] = pt.peak.r_peak;
    j["t_peak"] = pt.peak.t_peak;
    j["boundary"] = pt.peak.boundary_peak;
    j["status"] = pt.status;
    j["walltime_s"] = pt.wall_time_s;
    return j;
}

json meta_json(const ScenarioConfig& cfg, int threads) {
    json j;
    j["integrator"] = {{"rel_tol", cfg.integrator.rel_tol},
                       {"abs_tol", cfg.integrator.abs_tol},
                       {"t_max", cfg.integrator.t_max},
                       {"max_steps", cfg.integrator.max_steps},
                       {"sample_stride", cfg.integrator.sample_stride}};
    j["method"] = to_string(cfg.method);
    j["threads"] = threads;
    j["stop"] = cfg.stop == StopRule::t_max_only
                    ? "t_max"
                    : (cfg.stop == StopRule::past_peak ? "past_peak" : "depleted");
    return j;
}

}  // namespace

int cmd_simulate(const ScenarioConfig& cfg, int threads) {
    std::filesystem::create_directories(cfg.output_dir);
    PointResult pt = run_point(cfg, std::nullopt, std::nullopt, std::nullopt, threads, true);

    std::string traj_csv = "t,R,N_exc\n";
    for (const TrajectorySample& s : pt.trajectory.samples) {
        traj_csv += format_double(s.t) + "," + format_double(s.rate) + "," +
                    format_double(s.excitation) + "\n";
    }
    const std::filesystem::path dir(cfg.output_dir);
    write_text_file(dir / "trajectory.csv", traj_csv);
    write_text_file(dir / "peaks.csv", peaks_csv_header() + peaks_csv_row(pt));

    json meta = meta_json(cfg, threads);
    meta["run"] = point_json(pt);
    meta["steps"] = pt.trajectory.meta.accepted_steps;
    meta["photons_emitted"] = pt.trajectory.meta.photons_emitted;
    meta["final_excitation"] = pt.trajectory.meta.final_excitation;
    meta["stop_reason"] = pt.trajectory.meta.stop_reason;
    write_text_file(dir / "run_meta.json", meta.dump(2) + "\n");

    if (cfg.write_json) {
        json jt = json::array();
        for (const TrajectorySample& s : pt.trajectory.samples)
            jt.push_back({{"t", s.t}, {"R", s.rate}, {"N_exc", s.excitation}});
        write_text_file(dir / "trajectory.json", jt.dump(2) + "\n");
        write_text_file(dir / "peaks.json", json::array({point_json(pt)}).dump(2) + "\n");
    }

    if (pt.status == "ok") return 0;
    return pt.status == "integration_failure" ? 3 : 2;
}

int cmd_sweep(const ScenarioConfig& cfg, int threads) {
    if (cfg.sweep.empty())
        throw config_error("config: sweep command needs a 'sweep' section with at least "
                           "one axis");
    std::filesystem::create_directories(cfg.output_dir);

    // Point grid: N values crossed with the a or ka series.
    std::vector<int> n_values = cfg.sweep.n_values;
    if (n_values.empty()) n_values.push_back(lattice_total(cfg.geometry));
    struct SeriesKey {
        std::optional<double> a, ka;
    };
    std::vector<SeriesKey> series;
    if (!cfg.sweep.a_values.empty())
        for (double a : cfg.sweep.a_values) series.push_back({a, std::nullopt});
    else if (!cfg.sweep.ka_values.empty())
        for (double ka : cfg.sweep.ka_values) series.push_back({std::nullopt, ka});
    else
        series.push_back({std::nullopt, std::nullopt});

    struct Job {
        std::size_t series_idx;
        int n;
    };
    std::vector<Job> jobs;
    for (std::size_t si = 0; si < series.size(); ++si)
        for (int n : n_values) jobs.push_back({si, n});

    std::vector<PointResult> results(jobs.size());
    std::atomic<std::size_t> next{0};
    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(jobs.size())));
    const int inner_threads = workers > 1 ? 1 : threads;
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            const Job& job = jobs[i];
            results[i] = run_point(cfg, job.n, series[job.series_idx].a,
                                   series[job.series_idx].ka, inner_threads, false);
        }
    };
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    // Single collector writes rows in job order.
    std::string csv = peaks_csv_header();
    std::size_t n_ok = 0;
    for (const PointResult& pt : results) {
        csv += peaks_csv_row(pt);
        if (pt.status == "ok") ++n_ok;
    }
    const std::filesystem::path dir(cfg.output_dir);
    write_text_file(dir / "peaks.csv", csv);

    json scaling = json::array();
    for (std::size_t si = 0; si < series.size(); ++si) {
        json entry;
        if (series[si].a) entry["a"] = *series[si].a;
        if (series[si].ka) entry["ka"] = *series[si].ka;
        json pts = json::array();
        std::vector<std::pair<double, double>> fit_pts;
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            if (jobs[i].series_idx != si || results[i].status != "ok") continue;
            pts.push_back({{"N", results[i].n},
                           {"R_peak", results[i].peak.r_peak},
                           {"t_peak", results[i].peak.t_peak}});
            if (results[i].peak.r_peak > 0)
                fit_pts.push_back({double(results[i].n), results[i].peak.r_peak});
        }
        entry["points"] = pts;
        if (fit_pts.size() >= 3) {
            const ScalingFit fit = fit_scaling(fit_pts);
            entry["fit"] = {{"beta", fit.exponent},
                            {"log_prefactor", fit.log_prefactor},
                            {"rms_residual", fit.rms_residual}};
        } else {
            entry["fit"] = nullptr;
        }
        scaling.push_back(entry);
    }
    json scaling_doc;
    scaling_doc["series"] = scaling;
    write_text_file(dir / "scaling.json", scaling_doc.dump(2) + "\n");

    json meta = meta_json(cfg, threads);
    meta["points_total"] = jobs.size();
    meta["points_ok"] = n_ok;
    write_text_file(dir / "run_meta.json", meta.dump(2) + "\n");

    if (cfg.write_json) {
        json jp = json::array();
        for (const PointResult& pt : results) jp.push_back(point_json(pt));
        write_text_file(dir / "peaks.json", jp.dump(2) + "\n");
    }
    return n_ok > 0 ? 0 : 3;
}

}  // namespace supercorr
