#include "supercorr/cumulant_engine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "supercorr/liouville.hpp"
#include "supercorr/parallel.hpp"
#include "trajectory_recorder.hpp"

namespace supercorr {

// ---------------------------------------------------------------------------
// Layout
// ---------------------------------------------------------------------------

MomentLayout::MomentLayout(int n, int order) : n_(n), order_(order) {
    if (n < 1) throw std::invalid_argument("MomentLayout: N must be >= 1");
    if (order != 2 && order != 3)
        throw std::invalid_argument("MomentLayout: order must be 2 or 3");
    n_pairs_ = static_cast<std::size_t>(n) * (n - 1) / 2;
    zzz_count_ = n >= 3 ? static_cast<std::size_t>(n) * (n - 1) * (n - 2) / 6 : 0;

    pair_.assign(static_cast<std::size_t>(n) * n, -1);
    std::int32_t next = 0;
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b) {
            pair_[static_cast<std::size_t>(a) * n + b] = next;
            pair_[static_cast<std::size_t>(b) * n + a] = next;
            ++next;
        }

    z_off_ = 0;
    pm_off_ = z_off_ + n;
    zz_off_ = pm_off_ + 2 * n_pairs_;
    total_ = zz_off_ + n_pairs_;
    if (order == 3) {
        pmz_off_ = total_;
        total_ += 2 * n_pairs_ * (n >= 2 ? n - 2 : 0);
        zzz_off_ = total_;
        total_ += zzz_count_;

        zzz_base_.assign(n_pairs_, 0);
        std::int32_t rank = 0;
        for (int a = 0; a < n; ++a)
            for (int b = a + 1; b < n; ++b) {
                zzz_base_[pair(a, b)] = rank;
                rank += std::max(0, n - 1 - b);
            }
    }
}

double MomentLayout::zzz(const double* s, int a, int b, int c) const {
    int lo = a, mid = b, hi = c;
    if (lo > mid) std::swap(lo, mid);
    if (mid > hi) std::swap(mid, hi);
    if (lo > mid) std::swap(lo, mid);
    return s[zzz_pos(lo, mid, hi)];
}

// ---------------------------------------------------------------------------
// Compiled evaluation plan
// ---------------------------------------------------------------------------

namespace {

enum class SumKind : std::uint8_t {
    loop,        // explicit summation
    pm_x_sum,    // factor <s+_x s-_m>: contract through C * Gamma
    pm_sum_x,    // factor <s+_m s-_x>
    z_sum,       // factor z_m
    gamma_only,  // no factor carries the summation index
};

struct FastFactor {
    VarClass cls;
    std::int8_t s0 = 0, s1 = 0, s2 = 0;
};

struct FastTerm {
    double coeff = 0.0;
    std::int8_t ga = 0, gb = 0;  // local: both free; summed: ga free
    std::uint8_t nfac = 0;
    FastFactor fac[3];
    // contraction plan (summed terms only)
    SumKind kind = SumKind::loop;
    std::int8_t x_slot = 0;      // free slot inside the contracted factor
    std::uint8_t nother = 0;
    FastFactor other[2];
};

struct FastClass {
    VarClass cls = VarClass::Z;
    int arity = 1;
    std::vector<FastTerm> local;
    std::vector<FastTerm> summed;
};

FastFactor make_factor(const FactorRef& f) {
    return {f.cls, f.slot[0], f.slot[1], f.slot[2]};
}

bool refers_sum(const FastFactor& f) {
    const int arity = class_arity(f.cls);
    return f.s0 == sum_site || (arity > 1 && f.s1 == sum_site) ||
           (arity > 2 && f.s2 == sum_site);
}

FastClass compile_class(const ClassTemplate& tmpl) {
    FastClass fc;
    fc.cls = tmpl.cls;
    fc.arity = tmpl.arity;
    for (const TemplateTerm& t : tmpl.local) {
        FastTerm ft;
        ft.coeff = t.coeff;
        ft.ga = t.g_a;
        ft.gb = t.g_b;
        ft.nfac = static_cast<std::uint8_t>(t.factors.size());
        for (std::size_t i = 0; i < t.factors.size(); ++i) ft.fac[i] = make_factor(t.factors[i]);
        fc.local.push_back(ft);
    }
    for (const TemplateTerm& t : tmpl.summed) {
        FastTerm ft;
        ft.coeff = t.coeff;
        ft.ga = t.g_a;  // free slot; g_b is the summation index
        ft.gb = t.g_b;
        ft.nfac = static_cast<std::uint8_t>(t.factors.size());
        for (std::size_t i = 0; i < t.factors.size(); ++i) ft.fac[i] = make_factor(t.factors[i]);

        int sum_factors = 0, sum_at = -1;
        for (int i = 0; i < ft.nfac; ++i)
            if (refers_sum(ft.fac[i])) {
                ++sum_factors;
                sum_at = i;
            }
        if (sum_factors == 0) {
            ft.kind = SumKind::gamma_only;
        } else if (sum_factors == 1) {
            const FastFactor& f = ft.fac[sum_at];
            if (f.cls == VarClass::PM && f.s1 == sum_site && f.s0 != sum_site) {
                ft.kind = SumKind::pm_x_sum;
                ft.x_slot = f.s0;
            } else if (f.cls == VarClass::PM && f.s0 == sum_site && f.s1 != sum_site) {
                ft.kind = SumKind::pm_sum_x;
                ft.x_slot = f.s1;
            } else if (f.cls == VarClass::Z) {
                ft.kind = SumKind::z_sum;
            } else {
                ft.kind = SumKind::loop;
            }
        } else {
            ft.kind = SumKind::loop;
        }
        if (ft.kind != SumKind::loop) {
            for (int i = 0; i < ft.nfac; ++i) {
                if (i == sum_at && ft.kind != SumKind::gamma_only) continue;
                if (ft.nother == 2) {  // plan only carries two spectators
                    ft.kind = SumKind::loop;
                    ft.nother = 0;
                    break;
                }
                ft.other[ft.nother++] = ft.fac[i];
            }
        }
        fc.summed.push_back(ft);
    }
    return fc;
}

}  // namespace

// ---------------------------------------------------------------------------
// Engine implementation
// ---------------------------------------------------------------------------

struct CumulantEngine::Impl {
    CouplingModel model;
    int order = 2;
    MomentSystem system;
    MomentLayout layout;
    std::vector<FastClass> classes;
    std::vector<double> row_sum;  // per row of the coupling matrix

    // per-call workspaces (one evolution per engine instance)
    mutable std::vector<cdouble> corr;      // one-body matrix C
    mutable std::vector<cdouble> corr_g;    // C * Gamma
    mutable std::vector<double> gz;         // Gamma * z

    Impl(const CouplingModel& m, int ord)
        : model(m), order(ord), system(compile_system(ord)), layout(m.n, ord) {
        for (const ClassTemplate& t : system.templates) classes.push_back(compile_class(t));
        const int n = model.n;
        row_sum.assign(n, 0.0);
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) row_sum[a] += model.g(a, b);
        corr.assign(static_cast<std::size_t>(n) * n, 0.0);
        corr_g.assign(static_cast<std::size_t>(n) * n, 0.0);
        gz.assign(n, 0.0);
    }

    double factor_real(const FastFactor& f, const int* idx, int m, const double* s) const;
    cdouble factor_value(const FastFactor& f, const int* idx, int m, const double* s) const;
    cdouble eval_instance(const FastClass& fc, const int* idx, const double* s,
                          bool reference) const;
    void eval_pair_block(const FastClass& fc, int a, int b, const double* s, double* out,
                         bool reference) const;
    void materialize(const double* s, int threads) const;
    void eval_all(const double* s, double* out, int threads, bool reference) const;
};

void CumulantEngine::Impl::eval_pair_block(const FastClass& fc, int a, int b,
                                           const double* s, double* out,
                                           bool reference) const {
    const int n = layout.n();
    switch (fc.cls) {
        case VarClass::PM: {
            const int idx[3] = {a, b, -1};
            const cdouble v = eval_instance(fc, idx, s, reference);
            double* dst = out + layout.pm_pos(a, b);
            dst[0] = v.real();
            dst[1] = v.imag();
            break;
        }
        case VarClass::ZZ: {
            const int idx[3] = {a, b, -1};
            out[layout.zz_pos(a, b)] = eval_instance(fc, idx, s, reference).real();
            break;
        }
        case VarClass::PMZ: {
            for (int p = 0; p < n; ++p) {
                if (p == a || p == b) continue;
                const int idx[3] = {a, b, p};
                const cdouble v = eval_instance(fc, idx, s, reference);
                double* dst = out + layout.pmz_pos(a, b, p);
                dst[0] = v.real();
                dst[1] = v.imag();
            }
            break;
        }
        case VarClass::ZZZ: {
            for (int c = b + 1; c < n; ++c) {
                const int idx[3] = {a, b, c};
                out[layout.zzz_pos(a, b, c)] = eval_instance(fc, idx, s, reference).real();
            }
            break;
        }
        default: break;
    }
}

double CumulantEngine::Impl::factor_real(const FastFactor& f, const int* idx, int m,
                                         const double* s) const {
    auto rs = [&](std::int8_t slot) { return slot == sum_site ? m : idx[slot]; };
    switch (f.cls) {
        case VarClass::Z: return layout.z(s, rs(f.s0));
        case VarClass::ZZ: return layout.zz(s, rs(f.s0), rs(f.s1));
        case VarClass::ZZZ: return layout.zzz(s, rs(f.s0), rs(f.s1), rs(f.s2));
        default: return 0.0;  // unreachable
    }
}

cdouble CumulantEngine::Impl::factor_value(const FastFactor& f, const int* idx, int m,
                                           const double* s) const {
    auto rs = [&](std::int8_t slot) { return slot == sum_site ? m : idx[slot]; };
    switch (f.cls) {
        case VarClass::PM: {
            const int a = rs(f.s0), b = rs(f.s1);
            return corr[static_cast<std::size_t>(a) * layout.n() + b];
        }
        case VarClass::PMZ: return layout.pmz(s, rs(f.s0), rs(f.s1), rs(f.s2));
        default: return factor_real(f, idx, m, s);
    }
}

void CumulantEngine::Impl::materialize(const double* s, int threads) const {
    const int n = layout.n();
    // One-body correlation matrix with occupations on the diagonal.
    for (int a = 0; a < n; ++a) {
        corr[static_cast<std::size_t>(a) * n + a] = 0.5 * (1.0 + layout.z(s, a));
        for (int b = a + 1; b < n; ++b) {
            const double* p = s + layout.pm_pos(a, b);
            corr[static_cast<std::size_t>(a) * n + b] = {p[0], p[1]};
            corr[static_cast<std::size_t>(b) * n + a] = {p[0], -p[1]};
        }
    }
    const double* gamma = model.gamma.data();
    parallel_for(threads, 0, static_cast<std::size_t>(n), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t x = lo; x < hi; ++x) {
            const cdouble* crow = corr.data() + x * n;
            for (int g = 0; g < n; ++g) {
                const double* grow = gamma + static_cast<std::size_t>(g) * n;
                cdouble acc = 0.0;
                for (int m = 0; m < n; ++m) acc += crow[m] * grow[m];
                corr_g[x * n + g] = acc;
            }
        }
    });
    for (int g = 0; g < n; ++g) {
        const double* grow = gamma + static_cast<std::size_t>(g) * n;
        double acc = 0.0;
        for (int m = 0; m < n; ++m) acc += grow[m] * layout.z(s, m);
        gz[g] = acc;
    }
}

cdouble CumulantEngine::Impl::eval_instance(const FastClass& fc, const int* idx,
                                            const double* s, bool reference) const {
    const int n = layout.n();
    const double* gamma = model.gamma.data();
    cdouble acc = 0.0;

    for (const FastTerm& t : fc.local) {
        cdouble prod = t.coeff * gamma[static_cast<std::size_t>(idx[t.ga]) * n + idx[t.gb]];
        for (int i = 0; i < t.nfac; ++i) prod *= factor_value(t.fac[i], idx, -1, s);
        acc += prod;
    }

    for (const FastTerm& t : fc.summed) {
        const int g = idx[t.ga];
        const double* grow = gamma + static_cast<std::size_t>(g) * n;
        if (!reference && t.kind != SumKind::loop) {
            cdouble base;
            switch (t.kind) {
                case SumKind::pm_x_sum: {
                    const int x = idx[t.x_slot];
                    base = corr_g[static_cast<std::size_t>(x) * n + g];
                    for (int fi = 0; fi < fc.arity; ++fi) {
                        const int m = idx[fi];
                        base -= grow[m] * corr[static_cast<std::size_t>(x) * n + m];
                    }
                    break;
                }
                case SumKind::pm_sum_x: {
                    const int x = idx[t.x_slot];
                    base = std::conj(corr_g[static_cast<std::size_t>(x) * n + g]);
                    for (int fi = 0; fi < fc.arity; ++fi) {
                        const int m = idx[fi];
                        base -= grow[m] *
                                std::conj(corr[static_cast<std::size_t>(x) * n + m]);
                    }
                    break;
                }
                case SumKind::z_sum: {
                    base = gz[g];
                    for (int fi = 0; fi < fc.arity; ++fi) {
                        const int m = idx[fi];
                        base -= grow[m] * layout.z(s, m);
                    }
                    break;
                }
                default: {  // gamma_only
                    base = row_sum[g];
                    for (int fi = 0; fi < fc.arity; ++fi) base -= grow[idx[fi]];
                    break;
                }
            }
            cdouble prod = t.coeff * base;
            for (int i = 0; i < t.nother; ++i) prod *= factor_value(t.other[i], idx, -1, s);
            acc += prod;
        } else {
            const int i0 = idx[0];
            const int i1 = fc.arity > 1 ? idx[1] : -1;
            const int i2 = fc.arity > 2 ? idx[2] : -1;
            cdouble sum = 0.0;
            for (int m = 0; m < n; ++m) {
                if (m == i0 || m == i1 || m == i2) continue;
                cdouble prod = grow[m];
                for (int i = 0; i < t.nfac; ++i) prod *= factor_value(t.fac[i], idx, m, s);
                sum += prod;
            }
            acc += t.coeff * sum;
        }
    }
    return acc;
}

void CumulantEngine::Impl::eval_all(const double* s, double* out, int threads,
                                    bool reference) const {
    const int n = layout.n();
    materialize(s, threads);

    for (const FastClass& fc : classes) {
        switch (fc.cls) {
            case VarClass::Z:
                parallel_for(threads, 0, static_cast<std::size_t>(n),
                             [&](std::size_t lo, std::size_t hi) {
                                 for (std::size_t i = lo; i < hi; ++i) {
                                     const int idx[3] = {static_cast<int>(i), -1, -1};
                                     out[layout.z_pos(i)] =
                                         eval_instance(fc, idx, s, reference).real();
                                 }
                             });
                break;
            case VarClass::PM:
            case VarClass::ZZ:
            case VarClass::PMZ:
            case VarClass::ZZZ: {
                parallel_for(
                    threads, 0, layout.pair_count(), [&](std::size_t lo, std::size_t hi) {
                        // decode the first pair of the chunk
                        std::size_t k = 0;
                        int a = 0, b = 1;
                        while (k + static_cast<std::size_t>(n - 1 - a) <= lo) {
                            k += n - 1 - a;
                            ++a;
                        }
                        b = a + 1 + static_cast<int>(lo - k);
                        for (std::size_t p = lo; p < hi; ++p) {
                            eval_pair_block(fc, a, b, s, out, reference);
                            if (++b == n) {
                                ++a;
                                b = a + 1;
                            }
                        }
                    });
                break;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Public surface
// ---------------------------------------------------------------------------

CumulantEngine::CumulantEngine(const CouplingModel& model, int order)
    : impl_(std::make_unique<Impl>(model, order)) {
    const int min_n = order;
    if (model.n < min_n)
        throw std::invalid_argument("CumulantEngine: need N >= truncation order");
}

CumulantEngine::~CumulantEngine() = default;

const MomentLayout& CumulantEngine::layout() const { return impl_->layout; }
const MomentSystem& CumulantEngine::system() const { return impl_->system; }

MomentState CumulantEngine::initial_state() const {
    const MomentLayout& lay = impl_->layout;
    MomentState st;
    st.n = lay.n();
    st.order = lay.order();
    st.data.assign(lay.size(), 0.0);
    for (int i = 0; i < lay.n(); ++i) st.data[lay.z_pos(i)] = 1.0;
    for (int a = 0; a < lay.n(); ++a)
        for (int b = a + 1; b < lay.n(); ++b) st.data[lay.zz_pos(a, b)] = 1.0;
    if (lay.order() == 3)
        for (int a = 0; a < lay.n(); ++a)
            for (int b = a + 1; b < lay.n(); ++b)
                for (int c = b + 1; c < lay.n(); ++c) st.data[lay.zzz_pos(a, b, c)] = 1.0;
    return st;
}

void CumulantEngine::derivative(std::span<const double> state, std::span<double> out,
                                int threads, bool reference) const {
    impl_->eval_all(state.data(), out.data(), std::max(1, threads), reference);
}

void CumulantEngine::derivative(const MomentState& s, MomentState& ds, int threads,
                                bool reference) const {
    ds.n = s.n;
    ds.order = s.order;
    ds.time = s.time;
    ds.data.resize(s.data.size());
    derivative(std::span<const double>(s.data), std::span<double>(ds.data), threads,
               reference);
}

double CumulantEngine::emission(std::span<const double> state) const {
    const MomentLayout& lay = impl_->layout;
    const CouplingModel& model = impl_->model;
    const double* s = state.data();
    double r = 0.0;
    for (int i = 0; i < lay.n(); ++i) r += 0.5 * (1.0 + lay.z(s, i));
    r *= model.unit_rate;
    for (int a = 0; a < lay.n(); ++a)
        for (int b = a + 1; b < lay.n(); ++b)
            r += 2.0 * model.g(a, b) * s[lay.pm_pos(a, b)];
    return r;
}

double CumulantEngine::excitation(std::span<const double> state) const {
    const MomentLayout& lay = impl_->layout;
    double e = 0.0;
    for (int i = 0; i < lay.n(); ++i) e += 0.5 * (1.0 + lay.z(state.data(), i));
    return e;
}

double CumulantEngine::excitation_slope(std::span<const double> derivative) const {
    const MomentLayout& lay = impl_->layout;
    double e = 0.0;
    for (int i = 0; i < lay.n(); ++i) e += 0.5 * lay.z(derivative.data(), i);
    return e;
}

Trajectory evolve_moments(const CouplingModel& model, int order, const IntegratorConfig& cfg,
                          const EvolveOptions& opts) {
    if (order != 2 && order != 3)
        throw std::invalid_argument("evolve_moments: order must be 2 or 3");
    if (model.n < order) {
        // Too few emitters for this truncation's variable set; the exact
        // solver is cheap there.
        Trajectory traj = evolve_exact(model, false, cfg, opts);
        traj.meta.method = "cumulant" + std::to_string(order) + "(exact)";
        return traj;
    }

    CumulantEngine engine(model, order);
    const MomentLayout& lay = engine.layout();
    const std::size_t nm = lay.size();

    MomentState init = engine.initial_state();
    std::vector<double> y = std::move(init.data);
    y.push_back(0.0);  // photon counter

    const int threads = std::max(1, opts.threads);
    const bool reference = opts.use_reference_evaluator;

    DerivFn deriv = [&engine, nm, threads, reference](double, std::span<const double> s,
                                                      std::span<double> ds) {
        engine.derivative(s.first(nm), ds.first(nm), threads, reference);
        ds[nm] = engine.emission(s.first(nm));
    };

    TrajectoryRecorder rec;
    rec.rate = [&engine, nm](std::span<const double> s) {
        return engine.emission(s.first(nm));
    };
    rec.excitation = [&engine, nm](std::span<const double> s) {
        return engine.excitation(s.first(nm));
    };
    rec.excitation_slope = [&engine, nm](std::span<const double> ds) {
        return engine.excitation_slope(ds.first(nm));
    };
    rec.n_emitters = model.n;
    rec.stop = opts.stop;
    rec.past_peak_fraction = opts.past_peak_fraction;
    rec.depleted_fraction = opts.depleted_fraction;
    rec.sample_times = opts.sample_times;
    rec.sample_stride = cfg.sample_stride;
    rec.traj.meta.method = "cumulant" + std::to_string(order);
    rec.traj.meta.n_emitters = model.n;
    rec.traj.meta.rel_tol = cfg.rel_tol;
    rec.traj.meta.abs_tol = cfg.abs_tol;

    // A z value escaping [-1, 1] by more than 1e-3 signals closure breakdown;
    // stop loudly rather than integrating garbage.
    bool breakdown = false;
    auto base_observer = rec.observer();
    StepObserver observer = [&](const StepView& view) {
        for (int i = 0; i < lay.n(); ++i) {
            const double z = lay.z(view.y.data(), i);
            if (std::abs(z) > 1.0 + 1e-3) {
                breakdown = true;
                return StepDecision::stop;
            }
        }
        return base_observer(view);
    };

    WallTimer timer;
    rec.start(y);
    const IntegrationResult res = integrate_adaptive(deriv, y, cfg, observer);
    rec.finish(res, y);
    if (breakdown) {
        rec.traj.meta.status = RunStatus::integration_failure;
        rec.traj.meta.status_detail =
            "closure breakdown: an inversion moment left [-1,1] by more than 1e-3";
        rec.traj.meta.stop_reason = "failed";
    }
    rec.traj.meta.photons_emitted = y[nm];
    rec.traj.meta.wall_time_s = timer.seconds();
    return rec.traj;
}

}  // namespace supercorr
