#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "supercorr/types.hpp"

namespace supercorr {

// ---------------------------------------------------------------------------
// On-site spin algebra
// ---------------------------------------------------------------------------

enum class SiteOp : std::uint8_t { plus, minus, z };

struct OpTerm {
    cdouble coeff;
    std::optional<SiteOp> op;  // nullopt = identity
};

// Product a*b of two on-site operators as a linear combination over
// {1, plus, minus, z}.
std::vector<OpTerm> multiply_onsite(SiteOp a, SiteOp b);

// ---------------------------------------------------------------------------
// Symbolic monomials over abstract site indices
// ---------------------------------------------------------------------------

// Site ids 0..arity-1 stand for the free indices of an equation template;
// negative ids are reserved for summation indices.
inline constexpr int sum_site = -1;

struct SpinMonomial {
    std::vector<std::pair<int, SiteOp>> sites;  // sorted by site id, one op per site
    cdouble coeff{1.0, 0.0};
};
using SpinPoly = std::vector<SpinMonomial>;

SpinPoly left_multiply(const SpinPoly& p, int site, SiteOp op);
SpinPoly right_multiply(const SpinPoly& p, int site, SiteOp op);
SpinPoly collect(SpinPoly p);  // combine identical monomials, drop zeros
int charge(const SpinMonomial& m);  // #plus - #minus

// ---------------------------------------------------------------------------
// Joint-cumulant expansion
// ---------------------------------------------------------------------------

// All partitions of {0..m-1}, each a list of blocks of element indices.
std::vector<std::vector<std::vector<int>>> set_partitions(int m);

struct MomentExpansion {
    struct Term {
        double coeff;
        // Each block is one expectation factor: the (site, op) pairs it holds.
        std::vector<std::vector<std::pair<int, SiteOp>>> blocks;
    };
    std::vector<Term> terms;
};

// Expansion of an M-operator average with the joint cumulant set to zero,
// M = truncation + 1. Site indices must be pairwise distinct. When
// prune_charge is set, products containing a factor with unbalanced
// raising/lowering content are dropped (they vanish for the inverted
// initial state).
MomentExpansion cumulant_expand(const std::vector<std::pair<int, SiteOp>>& ops,
                                int truncation, bool prune_charge = true);

// ---------------------------------------------------------------------------
// Equation-of-motion templates
// ---------------------------------------------------------------------------

enum class VarClass : std::uint8_t { Z, PM, ZZ, PMZ, ZZZ };

const char* to_string(VarClass c);
int class_arity(VarClass c);
// Number of stored instances for N emitters (Hermitian partners counted once).
std::size_t class_instance_count(VarClass c, int n);

struct FactorRef {
    VarClass cls;
    std::array<std::int8_t, 3> slot;  // 0..arity-1 = free index, -1 = summation index
};

struct TemplateTerm {
    double coeff = 0.0;
    std::int8_t g_a = 0, g_b = 0;   // coupling entry gamma(slot_a, slot_b)
    std::vector<FactorRef> factors;
};

struct ClassTemplate {
    VarClass cls = VarClass::Z;
    int arity = 0;
    std::vector<TemplateTerm> local;   // all indices bound to free slots
    std::vector<TemplateTerm> summed;  // one index summed over the rest of the array
};

// Adjoint-dissipator equation of motion for one correlator class, closed at
// the given truncation (2 or 3).
ClassTemplate derive_eom(VarClass cls, int truncation);

struct MomentSystem {
    int order = 0;
    std::vector<ClassTemplate> templates;
    const ClassTemplate& tmpl(VarClass c) const;
    std::string debug_dump() const;  // plain-text equations for inspection
};

// Derives all class templates for the requested truncation and verifies the
// closure-free content against a brute-force three-emitter density-matrix
// oracle before returning. Throws std::logic_error if the check fails.
MomentSystem compile_system(int truncation);

// ---------------------------------------------------------------------------
// Reference (map-backed) moment store and template evaluation; the slow,
// obviously-correct route used for verification and tests.
// ---------------------------------------------------------------------------

struct MomentStore {
    int n = 0;
    std::map<std::array<int, 4>, cdouble> vals;

    void set(VarClass c, std::array<int, 3> idx, cdouble v);
    cdouble get(VarClass c, std::array<int, 3> idx) const;  // canonicalizes + conjugates
};

cdouble eval_template_instance(const ClassTemplate& tmpl, std::array<int, 3> idx,
                               const MomentStore& store, const std::vector<double>& gamma,
                               int n);

}  // namespace supercorr
