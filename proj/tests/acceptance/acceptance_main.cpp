// Acceptance gate: one line per criterion, nonzero exit on any failure.

#include <cstdlib>
#include <cstring>
#include <string>
#include <thread>
#include <vector>

#include "supercorr/validate_suite.hpp"

int main(int argc, char** argv) {
    std::vector<int> selection;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
            selection.push_back(std::atoi(argv[++i]));
        }
    }
    int threads = static_cast<int>(std::thread::hardware_concurrency());
    if (const char* env = std::getenv("SUPERCORR_THREADS")) threads = std::atoi(env);
    if (threads < 1) threads = 1;
    return supercorr::cmd_validate(selection, threads);
}
