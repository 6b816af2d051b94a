#include <doctest.h>

#include <cmath>

#include "supercorr/couplings.hpp"
#include "supercorr/errors.hpp"
#include "supercorr/liouville.hpp"
#include "supercorr/peak_analysis.hpp"

using namespace supercorr;

TEST_CASE("single emitter decays exponentially") {
    IntegratorConfig cfg;
    cfg.t_max = 4.0;
    EvolveOptions opts;
    for (double t = 0.25; t < 4.0; t += 0.25) opts.sample_times.push_back(t);
    const Trajectory traj = evolve_exact(build_dicke(1), false, cfg, opts);
    traj.require_ok();
    for (const auto& s : traj.samples) {
        CHECK(std::abs(s.rate - std::exp(-s.t)) < 1e-5);
        CHECK(std::abs(s.excitation - std::exp(-s.t)) < 1e-5);
    }
}

TEST_CASE("single-emitter derivative of the inverted state") {
    const DensityState st = fully_inverted_state(1);
    std::vector<cdouble> out;
    lindblad_derivative(st, build_dicke(1), false, out);
    // d rho = |g><g| - |e><e| at unit rate
    CHECK(out[0].real() == doctest::Approx(1.0));   // ground gain
    CHECK(out[3].real() == doctest::Approx(-1.0));  // excited loss
    CHECK(std::abs(out[1]) < 1e-15);
}

TEST_CASE("derivative is trace-free and Hermitian") {
    const int n = 3;
    DensityState st = fully_inverted_state(n);
    // spread some population and coherence within an excitation sector
    const std::size_t d = st.dim();
    st.rho[(d - 1) * d + (d - 1)] = 0.4;
    st.rho[1 * d + 1] = 0.3;
    st.rho[2 * d + 2] = 0.3;
    st.rho[1 * d + 2] = cdouble(0.05, 0.02);
    st.rho[2 * d + 1] = std::conj(st.rho[1 * d + 2]);

    const EmitterArray arr = build_lattice(LatticeKind::chain, {n}, 0.3, Polarization::circular);
    std::vector<cdouble> out;
    lindblad_derivative(st, build_free_space(arr, false), false, out);
    cdouble trace = 0.0;
    for (std::size_t i = 0; i < d; ++i) trace += out[i * d + i];
    CHECK(std::abs(trace) < 1e-12);
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = r; c < d; ++c)
            CHECK(std::abs(out[r * d + c] - std::conj(out[c * d + r])) < 1e-12);
}

TEST_CASE("two-emitter ideal cascade matches the closed form") {
    IntegratorConfig cfg;
    cfg.rel_tol = 1e-9;
    cfg.abs_tol = 1e-12;
    cfg.t_max = 3.0;
    EvolveOptions opts;
    for (double t = 0.1; t < 3.0; t += 0.1) opts.sample_times.push_back(t);
    const Trajectory traj = evolve_exact(build_dicke(2), false, cfg, opts);
    traj.require_ok();
    for (const auto& s : traj.samples) {
        const double ref = 2.0 * std::exp(-2.0 * s.t) * (1.0 + 2.0 * s.t);
        CHECK(std::abs(s.rate - ref) / ref < 1e-6);
    }
}

TEST_CASE("independent emitters peak at t = 0 with rate N") {
    CouplingModel indep;
    indep.n = 5;
    indep.gamma.assign(25, 0.0);
    for (int i = 0; i < 5; ++i) indep.gamma[i * 5 + i] = 1.0;
    IntegratorConfig cfg;
    cfg.t_max = 2.0;
    EvolveOptions opts;
    for (double t = 0.2; t < 2.0; t += 0.2) opts.sample_times.push_back(t);
    const Trajectory traj = evolve_exact(indep, false, cfg, opts);
    traj.require_ok();
    const PeakResult pk = find_peak(traj);
    CHECK(pk.boundary_peak);
    CHECK(pk.r_peak == doctest::Approx(5.0).epsilon(1e-9));
    for (const auto& s : traj.samples)
        CHECK(std::abs(s.rate - 5.0 * std::exp(-s.t)) < 1e-5);
}

TEST_CASE("zero coherent matrix reproduces the plain path bit for bit") {
    const EmitterArray arr = build_lattice(LatticeKind::chain, {3}, 0.2, Polarization::linear);
    CouplingModel m = build_free_space(arr, false);
    m.jmat.assign(9, 0.0);  // present but zero
    IntegratorConfig cfg;
    cfg.t_max = 1.5;
    const Trajectory off = evolve_exact(m, false, cfg);
    const Trajectory on = evolve_exact(m, true, cfg);
    REQUIRE(off.samples.size() == on.samples.size());
    for (std::size_t i = 0; i < off.samples.size(); ++i) {
        CHECK(off.samples[i].t == on.samples[i].t);
        CHECK(off.samples[i].rate == on.samples[i].rate);
        CHECK(off.samples[i].excitation == on.samples[i].excitation);
    }
}

TEST_CASE("coherent exchange lowers the small-ring peak") {
    const EmitterArray ring = build_lattice(LatticeKind::ring, {6}, 0.05, Polarization::circular);
    const CouplingModel m = build_free_space(ring, true);
    IntegratorConfig cfg;
    cfg.t_max = 2.0;
    EvolveOptions opts;
    opts.stop = StopRule::past_peak;
    const double off = find_peak(evolve_exact(m, false, cfg, opts)).r_peak;
    const double on = find_peak(evolve_exact(m, true, cfg, opts)).r_peak;
    CHECK(on <= off + 1e-9);
}

TEST_CASE("photon bookkeeping closes") {
    IntegratorConfig cfg;
    cfg.t_max = 60.0;
    EvolveOptions opts;
    opts.stop = StopRule::depleted;
    const Trajectory traj = evolve_exact(build_dicke(4), false, cfg, opts);
    traj.require_ok();
    CHECK(traj.meta.stop_reason == "depleted");
    CHECK(std::abs(traj.meta.photons_emitted - 4.0) / 4.0 < 5e-3);
    CHECK(traj.meta.max_balance_residual < 1e-8 * 4.0);
}

TEST_CASE("capacity and dimension guards") {
    CHECK_THROWS_AS(evolve_exact(build_dicke(5), false, IntegratorConfig{}, EvolveOptions{}, 4),
                    capacity_error);
    DensityState st = fully_inverted_state(2);
    std::vector<cdouble> out;
    CHECK_THROWS_AS(lindblad_derivative(st, build_dicke(3), false, out), std::domain_error);
}

TEST_CASE("density-state health checks") {
    DensityState st = fully_inverted_state(2);
    CHECK_NOTHROW(validate_density_state(st.rho.data(), 2));

    DensityState drift = st;
    drift.rho[0] = 0.1;  // trace 1.1
    CHECK_THROWS_WITH_AS(validate_density_state(drift.rho.data(), 2),
                         doctest::Contains("trace"), std::runtime_error);

    DensityState negative = st;
    negative.rho[15] = 1.0 + 2e-6;
    negative.rho[0] = -2e-6;
    CHECK_THROWS_WITH_AS(validate_density_state(negative.rho.data(), 2),
                         doctest::Contains("population"), std::runtime_error);

    DensityState skewed = st;
    skewed.rho[1] = cdouble(0.0, 1e-6);  // upper without conjugate partner
    CHECK_THROWS_WITH_AS(validate_density_state(skewed.rho.data(), 2),
                         doctest::Contains("Hermiticity"), std::runtime_error);
}

TEST_CASE("one-body correlations of the inverted state") {
    const DensityState st = fully_inverted_state(3);
    const std::vector<cdouble> corr = one_body_correlations(st);
    const CouplingModel m = build_dicke(3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(std::abs(corr[i * 3 + j] - (i == j ? 1.0 : 0.0)) < 1e-15);
    CHECK(emission_rate(m, corr) == doctest::Approx(3.0));
}
