#pragma once

#include <string>
#include <vector>

namespace supercorr {

struct CheckResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    double wall_s = 0.0;
};

struct ValidationReport {
    std::vector<CheckResult> checks;
    bool all_pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return !checks.empty();
    }
};

// Runs the numbered validation checks (empty selection = all) and prints one
// PASS/FAIL line per check to stdout as they complete.
ValidationReport run_validation(const std::vector<int>& selection, int threads);

// CLI entry: exit code 0 iff every check passed.
int cmd_validate(const std::vector<int>& selection, int threads);

}  // namespace supercorr
