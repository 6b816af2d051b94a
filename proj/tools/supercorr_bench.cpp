// Derivative-cost scaling harness. Doubling N multiplies the third-order
// derivative cost by ~16 (O(N^4)) and the second-order cost by ~8 (O(N^3));
// run this by hand after touching the engine hot loops.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <vector>

#include "supercorr/couplings.hpp"
#include "supercorr/cumulant_engine.hpp"

using namespace supercorr;

namespace {

double time_derivative(const CouplingModel& model, int order, int reps) {
    CumulantEngine engine(model, order);
    MomentState s = engine.initial_state();
    MomentState ds;
    engine.derivative(s, ds);  // warm up buffers
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r) engine.derivative(s, ds);
    const double dt =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return dt / reps;
}

}  // namespace

int main(int argc, char** argv) {
    const int base = argc > 1 ? std::atoi(argv[1]) : 32;
    bool ok = true;

    for (int order : {2, 3}) {
        const double expected = order == 3 ? 16.0 : 8.0;
        const int reps = order == 3 ? 3 : 20;
        const double small = time_derivative(build_waveguide(base, 0.9), order, reps);
        const double large = time_derivative(build_waveguide(2 * base, 0.9), order,
                                             order == 3 ? 1 : 5);
        const double ratio = large / small;
        const bool within = ratio > expected / 2.0 && ratio < expected * 2.0;
        ok = ok && within;
        std::printf("order %d: N=%d -> %.3f ms, N=%d -> %.3f ms, ratio %.1fx "
                    "(expected ~%.0fx) %s\n",
                    order, base, 1e3 * small, 2 * base, 1e3 * large, ratio, expected,
                    within ? "ok" : "OUT OF RANGE");
    }
    return ok ? 0 : 1;
}
