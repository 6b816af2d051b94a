#include "supercorr/liouville.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "supercorr/errors.hpp"
#include "supercorr/parallel.hpp"
#include "trajectory_recorder.hpp"

namespace supercorr {

namespace {

// Sparse hop operator sum_{nm} w[n][m] sigma^+_n sigma^-_m in the number
// basis; real entries, symmetric for symmetric weights.
struct HopOperator {
    std::size_t dim = 0;
    std::vector<std::size_t> row_start;
    std::vector<std::size_t> col;
    std::vector<double> val;

    static HopOperator build(const std::vector<double>& w, int n, bool skip_diagonal) {
        const std::size_t d = std::size_t(1) << n;
        // Count and fill in two passes, rows ascending.
        HopOperator op;
        op.dim = d;
        op.row_start.assign(d + 1, 0);
        std::vector<std::vector<std::pair<std::size_t, double>>> rows(d);
        for (std::size_t b = 0; b < d; ++b) {
            for (int m = 0; m < n; ++m) {
                if (!(b >> m & 1u)) continue;
                // diagonal term n == m
                if (!skip_diagonal) rows[b].push_back({b, w[std::size_t(m) * n + m]});
                const std::size_t bm = b ^ (std::size_t(1) << m);
                for (int a = 0; a < n; ++a) {
                    if (a == m || (bm >> a & 1u)) continue;
                    const double wv = w[std::size_t(a) * n + m];
                    if (wv == 0.0) continue;
                    rows[bm | (std::size_t(1) << a)].push_back({b, wv});
                }
            }
        }
        std::size_t nnz = 0;
        for (std::size_t r = 0; r < d; ++r) {
            op.row_start[r] = nnz;
            nnz += rows[r].size();
        }
        op.row_start[d] = nnz;
        op.col.resize(nnz);
        op.val.resize(nnz);
        std::size_t k = 0;
        for (std::size_t r = 0; r < d; ++r)
            for (const auto& [c, v] : rows[r]) {
                op.col[k] = c;
                op.val[k] = v;
                ++k;
            }
        return op;
    }

    // out = op * rho (dense rho, row-major dim x dim), rows split over threads.
    void left_apply(const cdouble* rho, cdouble* out, int threads) const {
        parallel_for(threads, 0, dim, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t r = lo; r < hi; ++r) {
                cdouble* dst = out + r * dim;
                for (std::size_t i = 0; i < dim; ++i) dst[i] = 0.0;
                for (std::size_t k = row_start[r]; k < row_start[r + 1]; ++k) {
                    const cdouble* src = rho + col[k] * dim;
                    const double w = val[k];
                    for (std::size_t i = 0; i < dim; ++i) dst[i] += w * src[i];
                }
            }
        });
    }

    // trace(op * rho)
    cdouble trace_with(const cdouble* rho) const {
        cdouble acc = 0.0;
        for (std::size_t r = 0; r < dim; ++r)
            for (std::size_t k = row_start[r]; k < row_start[r + 1]; ++k)
                acc += val[k] * rho[col[k] * dim + r];
        return acc;
    }
};

struct ExactWorkspace {
    int n = 0;
    std::size_t dim = 0;
    HopOperator damping;   // sum gamma_nm sigma^+_n sigma^-_m
    HopOperator exchange;  // sum J_nm sigma^+_n sigma^-_m (off-diagonal only)
    bool with_hamiltonian = false;
    std::vector<cdouble> buf;

    ExactWorkspace(const CouplingModel& model, bool with_h) {
        n = model.n;
        dim = std::size_t(1) << n;
        damping = HopOperator::build(model.gamma, n, false);
        with_hamiltonian = with_h && model.has_hamiltonian();
        if (with_hamiltonian) exchange = HopOperator::build(model.jmat, n, true);
        buf.resize(dim * dim);
    }

    void derivative(const CouplingModel& model, const cdouble* rho, cdouble* out,
                    int threads) {
        const int nn = n;
        const std::size_t d = dim;

        // Jump part: out[r][c] += gamma_nm rho[r+bn][c+bm], over rows without
        // bit n and columns without bit m.
        parallel_for(threads, 0, d, [&](std::size_t row_lo, std::size_t row_hi) {
            for (std::size_t r = row_lo; r < row_hi; ++r) {
                cdouble* dst = out + r * d;
                for (std::size_t i = 0; i < d; ++i) dst[i] = 0.0;
                for (int a = 0; a < nn; ++a) {
                    const std::size_t ba = std::size_t(1) << a;
                    if (r & ba) continue;
                    const cdouble* src = rho + (r | ba) * d;
                    for (int m = 0; m < nn; ++m) {
                        const std::size_t bm = std::size_t(1) << m;
                        const double w = model.gamma[std::size_t(a) * nn + m];
                        // columns with bit m clear, in contiguous runs
                        for (std::size_t chi = 0; chi < d; chi += 2 * bm) {
                            cdouble* dc = dst + chi;
                            const cdouble* sc = src + chi + bm;
                            for (std::size_t clo = 0; clo < bm; ++clo)
                                dc[clo] += w * sc[clo];
                        }
                    }
                }
            }
        });

        // Anticommutator: out -= (K rho + (K rho)^dagger) / 2 with K symmetric
        // real and rho Hermitian.
        damping.left_apply(rho, buf.data(), threads);
        const cdouble* b = buf.data();
        parallel_for(threads, 0, d, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t r = lo; r < hi; ++r)
                for (std::size_t c = 0; c < d; ++c)
                    out[r * d + c] -= 0.5 * (b[r * d + c] + std::conj(b[c * d + r]));
        });

        if (with_hamiltonian) {
            // -i [H, rho] = -i (M - M^dagger) with M = H rho.
            exchange.left_apply(rho, buf.data(), threads);
            parallel_for(threads, 0, d, [&](std::size_t lo, std::size_t hi) {
                for (std::size_t r = lo; r < hi; ++r)
                    for (std::size_t c = 0; c < d; ++c) {
                        const cdouble comm = b[r * d + c] - std::conj(b[c * d + r]);
                        out[r * d + c] += cdouble(comm.imag(), -comm.real());
                    }
            });
        }
    }
};

double excitation_of(const cdouble* rho, std::size_t d) {
    double e = 0.0;
    for (std::size_t bidx = 0; bidx < d; ++bidx)
        e += std::popcount(bidx) * rho[bidx * d + bidx].real();
    return e;
}

}  // namespace

DensityState fully_inverted_state(int n_emitters) {
    DensityState st;
    st.n_emitters = n_emitters;
    const std::size_t d = st.dim();
    st.rho.assign(d * d, 0.0);
    st.rho[(d - 1) * d + (d - 1)] = 1.0;
    return st;
}

void lindblad_derivative(const DensityState& state, const CouplingModel& model,
                         bool with_hamiltonian, std::vector<cdouble>& out, int threads) {
    if (model.n != state.n_emitters)
        throw std::domain_error("lindblad_derivative: model/state dimension mismatch");
    if (state.n_emitters > default_exact_cap)
        throw capacity_error("lindblad_derivative: N exceeds the exact-solver cap");
    ExactWorkspace ws(model, with_hamiltonian);
    out.resize(state.rho.size());
    ws.derivative(model, state.rho.data(), out.data(), threads);
}

std::vector<cdouble> one_body_correlations(const cdouble* rho, int n_emitters) {
    const int n = n_emitters;
    const std::size_t d = std::size_t(1) << n;
    std::vector<cdouble> corr(std::size_t(n) * n, 0.0);
    // <sigma^+_a sigma^-_m> = sum over basis states b containing m (and, for
    // a != m, not containing a) of rho[b][b - bm + ba].
    for (int a = 0; a < n; ++a) {
        const std::size_t ba = std::size_t(1) << a;
        for (int m = 0; m < n; ++m) {
            const std::size_t bm = std::size_t(1) << m;
            cdouble acc = 0.0;
            for (std::size_t b = 0; b < d; ++b) {
                if (!(b & bm)) continue;
                if (a != m && ((b ^ bm) & ba)) continue;
                acc += rho[b * d + ((b ^ bm) | ba)];
            }
            corr[std::size_t(a) * n + m] = acc;
        }
    }
    return corr;
}

std::vector<cdouble> one_body_correlations(const DensityState& state) {
    return one_body_correlations(state.rho.data(), state.n_emitters);
}

void validate_density_state(const cdouble* rho, int n_emitters) {
    const std::size_t d = std::size_t(1) << n_emitters;
    cdouble trace = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const cdouble diag = rho[i * d + i];
        trace += diag;
        if (diag.real() < -1e-6)
            throw std::runtime_error("density matrix: negative population " +
                                     std::to_string(diag.real()));
    }
    if (std::abs(trace - 1.0) > 1e-8)
        throw std::runtime_error("density matrix: trace drifted to " +
                                 std::to_string(trace.real()));
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = r + 1; c < d; ++c)
            if (std::abs(rho[r * d + c] - std::conj(rho[c * d + r])) > 1e-10)
                throw std::runtime_error("density matrix: lost Hermiticity");
}

Trajectory evolve_exact(const CouplingModel& model, bool with_hamiltonian,
                        const IntegratorConfig& cfg, const EvolveOptions& opts, int cap) {
    const int n = model.n;
    if (n > cap) {
        const double gib = std::ldexp(16.0, 2 * n) / (1024.0 * 1024.0 * 1024.0);
        throw capacity_error("evolve_exact: N = " + std::to_string(n) +
                             " exceeds the cap of " + std::to_string(cap) +
                             " (rho alone would need ~" + std::to_string(gib) + " GiB)");
    }
    const std::size_t d = std::size_t(1) << n;
    ExactWorkspace ws(model, with_hamiltonian);

    // State: interleaved complex rho followed by the photon counter.
    std::vector<double> y(2 * d * d + 1, 0.0);
    y[2 * ((d - 1) * d + (d - 1))] = 1.0;

    auto rho_of = [d](std::span<const double> s) {
        return reinterpret_cast<const cdouble*>(s.data());
    };
    // Sampled rates go through the validated bilinear form so a broken state
    // surfaces as a domain error rather than a silently wrong number.
    auto rate_of = [&model, n, rho_of](std::span<const double> s) {
        return emission_rate(model, one_body_correlations(rho_of(s), n));
    };
    auto exc_of = [d, rho_of](std::span<const double> s) {
        return excitation_of(rho_of(s), d);
    };

    const int threads = std::max(1, opts.threads);
    DerivFn deriv = [&ws, &model, d, threads, rho_of](double, std::span<const double> s,
                                                      std::span<double> ds) {
        ws.derivative(model, rho_of(s), reinterpret_cast<cdouble*>(ds.data()), threads);
        ds[2 * d * d] = ws.damping.trace_with(rho_of(s)).real();
    };

    TrajectoryRecorder rec;
    rec.rate = rate_of;
    rec.excitation = exc_of;
    rec.excitation_slope = [d, rho_of](std::span<const double> s) {
        return excitation_of(rho_of(s), d);
    };
    rec.n_emitters = n;
    rec.stop = opts.stop;
    rec.past_peak_fraction = opts.past_peak_fraction;
    rec.depleted_fraction = opts.depleted_fraction;
    rec.sample_times = opts.sample_times;
    rec.sample_stride = cfg.sample_stride;
    rec.traj.meta.method = with_hamiltonian ? "exact_with_hamiltonian" : "exact";
    rec.traj.meta.n_emitters = n;
    rec.traj.meta.rel_tol = cfg.rel_tol;
    rec.traj.meta.abs_tol = cfg.abs_tol;

    WallTimer timer;
    rec.start(y);
    // Spot-check the state's health periodically, not per step.
    auto base_observer = rec.observer();
    long steps_seen = 0;
    std::string health_error;
    StepObserver observer = [&](const StepView& view) {
        if ((++steps_seen & 63) == 0) {
            try {
                validate_density_state(rho_of(view.y), n);
            } catch (const std::exception& e) {
                health_error = e.what();
                return StepDecision::stop;
            }
        }
        return base_observer(view);
    };
    const IntegrationResult res = integrate_adaptive(deriv, y, cfg, observer);
    rec.finish(res, y);
    if (!health_error.empty()) {
        rec.traj.meta.status = RunStatus::integration_failure;
        rec.traj.meta.status_detail = health_error;
        rec.traj.meta.stop_reason = "failed";
    }
    rec.traj.meta.photons_emitted = y[2 * d * d];
    rec.traj.meta.wall_time_s = timer.seconds();
    return rec.traj;
}

Trajectory evolve_exact(const EmitterArray& array, bool with_hamiltonian,
                        const IntegratorConfig& cfg, const EvolveOptions& opts, int cap) {
    const CouplingModel model = build_free_space(array, with_hamiltonian);
    Trajectory traj = evolve_exact(model, with_hamiltonian, cfg, opts, cap);
    traj.meta.geometry = to_string(array.kind);
    return traj;
}

}  // namespace supercorr
