#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "supercorr/couplings.hpp"
#include "supercorr/geometry.hpp"
#include "supercorr/integrator.hpp"
#include "supercorr/liouville.hpp"
#include "supercorr/peak_analysis.hpp"
#include "supercorr/trajectory.hpp"

namespace supercorr {

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Method { exact, exact_with_hamiltonian, dicke, cumulant2, cumulant3 };

const char* to_string(Method m);

struct GeometrySpec {
    LatticeKind kind = LatticeKind::chain;
    std::vector<int> dims;
    std::optional<double> spacing;
    Polarization polarization = Polarization::circular;
    std::string custom_path;  // kind == custom
};

struct SweepSpec {
    std::vector<int> n_values;
    std::vector<double> a_values;
    std::vector<double> ka_values;
    bool empty() const { return n_values.empty() && a_values.empty() && ka_values.empty(); }
};

struct ScenarioConfig {
    GeometrySpec geometry;
    Reservoir reservoir = Reservoir::free_space;
    double waveguide_ka = 0.0;
    Method method = Method::cumulant2;
    IntegratorConfig integrator;
    StopRule stop = StopRule::depleted;
    int exact_cap = default_exact_cap;
    SweepSpec sweep;
    std::string output_dir = "out";
    bool write_json = false;
};

// Strict parse: unknown keys anywhere are errors.
ScenarioConfig parse_scenario_file(const std::string& path);
ScenarioConfig parse_scenario_text(const std::string& text);

struct PointResult {
    int n = 0;
    std::optional<double> a;
    std::optional<double> ka;
    std::string polarization;   // empty when not meaningful
    std::string method;
    std::string status = "ok";  // "ok" or a failure tag
    PeakResult peak;
    double wall_time_s = 0.0;
    Trajectory trajectory;      // populated for simulate; sweeps keep peaks only
};

// One scenario evaluation; overrides replace the swept quantities.
PointResult run_point(const ScenarioConfig& cfg, std::optional<int> n_override,
                      std::optional<double> a_override, std::optional<double> ka_override,
                      int threads, bool keep_trajectory);

int cmd_simulate(const ScenarioConfig& cfg, int threads);
int cmd_sweep(const ScenarioConfig& cfg, int threads);

// Formatting helpers shared with the validation suite.
std::string format_double(double v);  // 17 significant digits, locale-free

}  // namespace supercorr
