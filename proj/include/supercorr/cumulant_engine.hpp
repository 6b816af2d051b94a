#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "supercorr/couplings.hpp"
#include "supercorr/integrator.hpp"
#include "supercorr/moment_compiler.hpp"
#include "supercorr/trajectory.hpp"

namespace supercorr {

// Packed layout of the U(1)-allowed correlators. Real blocks: z (length N),
// zz and zzz (one entry per unordered tuple). Complex blocks, stored as
// re/im pairs with only one Hermitian partner kept: pm for a < b, pmz with
// the raising index below the lowering one.
class MomentLayout {
  public:
    MomentLayout(int n, int order);

    int n() const { return n_; }
    int order() const { return order_; }
    std::size_t size() const { return total_; }

    std::size_t z_pos(int i) const { return z_off_ + i; }
    std::size_t pm_pos(int a, int b) const { return pm_off_ + 2 * pair(a, b); }
    std::size_t zz_pos(int a, int b) const { return zz_off_ + pair(a, b); }
    std::size_t pmz_pos(int a, int b, int p) const {
        return pmz_off_ + 2 * (pair(a, b) * (n_ - 2) + squeeze(p, a, b));
    }
    std::size_t zzz_pos(int a, int b, int c) const {
        return zzz_off_ + zzz_base_[pair(a, b)] + (c - b - 1);
    }

    std::size_t pair_count() const { return n_pairs_; }
    std::size_t pmz_count() const { return n_pairs_ * (n_ >= 2 ? n_ - 2 : 0); }
    std::size_t zzz_count() const { return zzz_count_; }

    // Value accessors with Hermitian canonicalization.
    double z(const double* s, int i) const { return s[z_off_ + i]; }
    cdouble pm(const double* s, int a, int b) const {
        if (a < b) {
            const double* p = s + pm_pos(a, b);
            return {p[0], p[1]};
        }
        const double* p = s + pm_pos(b, a);
        return {p[0], -p[1]};
    }
    double zz(const double* s, int a, int b) const {
        return a < b ? s[zz_pos(a, b)] : s[zz_pos(b, a)];
    }
    cdouble pmz(const double* s, int a, int b, int p) const {
        if (a < b) {
            const double* q = s + pmz_pos(a, b, p);
            return {q[0], q[1]};
        }
        const double* q = s + pmz_pos(b, a, p);
        return {q[0], -q[1]};
    }
    double zzz(const double* s, int a, int b, int c) const;

    std::size_t pair(int a, int b) const {
        return pair_[static_cast<std::size_t>(a) * n_ + b];
    }
    static int squeeze(int p, int a, int b) { return p - (p > a) - (p > b); }

  private:
    int n_ = 0, order_ = 2;
    std::size_t z_off_ = 0, pm_off_ = 0, zz_off_ = 0, pmz_off_ = 0, zzz_off_ = 0,
                total_ = 0;
    std::size_t n_pairs_ = 0, zzz_count_ = 0;
    std::vector<std::int32_t> pair_;      // symmetric lookup table
    std::vector<std::int32_t> zzz_base_;  // per pair (a<b): rank base for the third index
};

struct MomentState {
    int n = 0;
    int order = 2;
    double time = 0.0;
    std::vector<double> data;
};

class CumulantEngine {
  public:
    // Compiles (and verifies) the equation templates and prepares the packed
    // evaluation plan for this coupling model.
    CumulantEngine(const CouplingModel& model, int order);
    ~CumulantEngine();

    const MomentLayout& layout() const;
    const MomentSystem& system() const;

    MomentState initial_state() const;  // fully inverted product state

    // d(state)/dt. The reference flag forces the plain per-term summation
    // path; the default path contracts eligible coupling sums through the
    // one-body correlation matrix.
    void derivative(std::span<const double> state, std::span<double> out, int threads = 1,
                    bool reference = false) const;
    void derivative(const MomentState& s, MomentState& ds, int threads = 1,
                    bool reference = false) const;

    double emission(std::span<const double> state) const;
    double excitation(std::span<const double> state) const;
    double excitation_slope(std::span<const double> derivative) const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Adaptive evolution of the closed moment system from the fully inverted
// state. Emitter counts below the truncation order fall back to the exact
// density-matrix solver.
Trajectory evolve_moments(const CouplingModel& model, int order, const IntegratorConfig& cfg,
                          const EvolveOptions& opts = {});

}  // namespace supercorr
