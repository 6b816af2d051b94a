#include "supercorr/moment_compiler.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace supercorr {

// ---------------------------------------------------------------------------
// On-site algebra
// ---------------------------------------------------------------------------

std::vector<OpTerm> multiply_onsite(SiteOp a, SiteOp b) {
    using O = SiteOp;
    if (a == O::plus && b == O::minus)
        return {{cdouble(0.5, 0.0), std::nullopt}, {cdouble(0.5, 0.0), O::z}};
    if (a == O::minus && b == O::plus)
        return {{cdouble(0.5, 0.0), std::nullopt}, {cdouble(-0.5, 0.0), O::z}};
    if (a == O::z && b == O::plus) return {{cdouble(1.0, 0.0), O::plus}};
    if (a == O::plus && b == O::z) return {{cdouble(-1.0, 0.0), O::plus}};
    if (a == O::z && b == O::minus) return {{cdouble(-1.0, 0.0), O::minus}};
    if (a == O::minus && b == O::z) return {{cdouble(1.0, 0.0), O::minus}};
    if (a == O::z && b == O::z) return {{cdouble(1.0, 0.0), std::nullopt}};
    return {};  // plus*plus, minus*minus
}

namespace {

// Multiply the operator at one site of a monomial, from the left or right.
SpinPoly multiply_impl(const SpinPoly& p, int site, SiteOp op, bool from_left) {
    SpinPoly out;
    for (const SpinMonomial& mono : p) {
        auto it = std::find_if(mono.sites.begin(), mono.sites.end(),
                               [site](const auto& s) { return s.first == site; });
        if (it == mono.sites.end()) {
            SpinMonomial m = mono;
            m.sites.push_back({site, op});
            std::sort(m.sites.begin(), m.sites.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            out.push_back(std::move(m));
            continue;
        }
        const SiteOp existing = it->second;
        const auto products = from_left ? multiply_onsite(op, existing)
                                        : multiply_onsite(existing, op);
        for (const OpTerm& t : products) {
            SpinMonomial m = mono;
            m.coeff *= t.coeff;
            auto jt = std::find_if(m.sites.begin(), m.sites.end(),
                                   [site](const auto& s) { return s.first == site; });
            if (t.op)
                jt->second = *t.op;
            else
                m.sites.erase(jt);
            out.push_back(std::move(m));
        }
    }
    return out;
}

}  // namespace

SpinPoly left_multiply(const SpinPoly& p, int site, SiteOp op) {
    return multiply_impl(p, site, op, true);
}

SpinPoly right_multiply(const SpinPoly& p, int site, SiteOp op) {
    return multiply_impl(p, site, op, false);
}

SpinPoly collect(SpinPoly p) {
    std::sort(p.begin(), p.end(), [](const SpinMonomial& a, const SpinMonomial& b) {
        return a.sites < b.sites;
    });
    SpinPoly out;
    for (const SpinMonomial& m : p) {
        if (!out.empty() && out.back().sites == m.sites)
            out.back().coeff += m.coeff;
        else
            out.push_back(m);
    }
    out.erase(std::remove_if(out.begin(), out.end(),
                             [](const SpinMonomial& m) {
                                 return std::abs(m.coeff) < 1e-14;
                             }),
              out.end());
    return out;
}

int charge(const SpinMonomial& m) {
    int q = 0;
    for (const auto& [site, op] : m.sites) {
        if (op == SiteOp::plus) ++q;
        if (op == SiteOp::minus) --q;
    }
    return q;
}

// ---------------------------------------------------------------------------
// Partitions and the cumulant expansion
// ---------------------------------------------------------------------------

namespace {

void partitions_rec(int elem, int m, std::vector<std::vector<int>>& cur,
                    std::vector<std::vector<std::vector<int>>>& out) {
    if (elem == m) {
        out.push_back(cur);
        return;
    }
    // index-based: recursion appends blocks past the current size
    const std::size_t n_blocks = cur.size();
    for (std::size_t bi = 0; bi < n_blocks; ++bi) {
        cur[bi].push_back(elem);
        partitions_rec(elem + 1, m, cur, out);
        cur[bi].pop_back();
    }
    cur.push_back({elem});
    partitions_rec(elem + 1, m, cur, out);
    cur.pop_back();
}

int block_charge(const std::vector<std::pair<int, SiteOp>>& block) {
    int q = 0;
    for (const auto& [site, op] : block) {
        if (op == SiteOp::plus) ++q;
        if (op == SiteOp::minus) --q;
    }
    return q;
}

}  // namespace

std::vector<std::vector<std::vector<int>>> set_partitions(int m) {
    std::vector<std::vector<std::vector<int>>> out;
    std::vector<std::vector<int>> cur;
    partitions_rec(0, m, cur, out);
    return out;
}

MomentExpansion cumulant_expand(const std::vector<std::pair<int, SiteOp>>& ops,
                                int truncation, bool prune_charge) {
    const int m = static_cast<int>(ops.size());
    if (m != truncation + 1)
        throw std::domain_error(
            "cumulant_expand: only the first out-of-closure order is expanded "
            "(need M = truncation + 1)");
    for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j)
            if (ops[i].first == ops[j].first)
                throw std::domain_error(
                    "cumulant_expand: repeated site index; normal-order first");

    MomentExpansion out;
    double fact[5] = {1, 1, 2, 6, 24};
    for (const auto& partition : set_partitions(m)) {
        const int np = static_cast<int>(partition.size());
        if (np < 2) continue;  // the full block is the moment being solved for
        // kappa = 0  =>  <O_1..O_M> = -sum_{|P|>=2} (|P|-1)! (-1)^{|P|-1} prod(...)
        const double coeff = ((np % 2 == 0) ? 1.0 : -1.0) * fact[np - 1];
        MomentExpansion::Term term;
        term.coeff = coeff;
        bool dead = false;
        for (const auto& block : partition) {
            std::vector<std::pair<int, SiteOp>> ops_block;
            for (int e : block) ops_block.push_back(ops[e]);
            if (prune_charge && block_charge(ops_block) != 0) {
                dead = true;
                break;
            }
            term.blocks.push_back(std::move(ops_block));
        }
        if (!dead) out.terms.push_back(std::move(term));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Classes and templates
// ---------------------------------------------------------------------------

const char* to_string(VarClass c) {
    switch (c) {
        case VarClass::Z: return "z";
        case VarClass::PM: return "pm";
        case VarClass::ZZ: return "zz";
        case VarClass::PMZ: return "pmz";
        case VarClass::ZZZ: return "zzz";
    }
    return "?";
}

int class_arity(VarClass c) {
    switch (c) {
        case VarClass::Z: return 1;
        case VarClass::PM:
        case VarClass::ZZ: return 2;
        default: return 3;
    }
}

std::size_t class_instance_count(VarClass c, int n) {
    const std::size_t nn = n;
    switch (c) {
        case VarClass::Z: return nn;
        case VarClass::PM:
        case VarClass::ZZ: return nn * (nn - 1) / 2;
        case VarClass::PMZ: return nn * (nn - 1) / 2 * (nn >= 2 ? nn - 2 : 0);
        case VarClass::ZZZ: return n >= 3 ? nn * (nn - 1) * (nn - 2) / 6 : 0;
    }
    return 0;
}

namespace {

constexpr std::int8_t no_slot = -9;

std::optional<FactorRef> classify_block(const std::vector<std::pair<int, SiteOp>>& block) {
    FactorRef ref{VarClass::Z, {no_slot, no_slot, no_slot}};
    int plus_site = no_slot, minus_site = no_slot;
    std::vector<int> z_sites;
    for (const auto& [site, op] : block) {
        switch (op) {
            case SiteOp::plus:
                if (plus_site != no_slot) return std::nullopt;
                plus_site = site;
                break;
            case SiteOp::minus:
                if (minus_site != no_slot) return std::nullopt;
                minus_site = site;
                break;
            case SiteOp::z: z_sites.push_back(site); break;
        }
    }
    const bool has_pm = plus_site != no_slot || minus_site != no_slot;
    if (has_pm && (plus_site == no_slot || minus_site == no_slot))
        return std::nullopt;  // unbalanced charge
    switch (block.size()) {
        case 1:
            if (has_pm) return std::nullopt;
            ref.cls = VarClass::Z;
            ref.slot = {static_cast<std::int8_t>(z_sites[0]), no_slot, no_slot};
            return ref;
        case 2:
            if (has_pm) {
                ref.cls = VarClass::PM;
                ref.slot = {static_cast<std::int8_t>(plus_site),
                            static_cast<std::int8_t>(minus_site), no_slot};
            } else {
                ref.cls = VarClass::ZZ;
                ref.slot = {static_cast<std::int8_t>(z_sites[0]),
                            static_cast<std::int8_t>(z_sites[1]), no_slot};
            }
            return ref;
        case 3:
            if (has_pm) {
                if (z_sites.size() != 1) return std::nullopt;
                ref.cls = VarClass::PMZ;
                ref.slot = {static_cast<std::int8_t>(plus_site),
                            static_cast<std::int8_t>(minus_site),
                            static_cast<std::int8_t>(z_sites[0])};
            } else {
                ref.cls = VarClass::ZZZ;
                ref.slot = {static_cast<std::int8_t>(z_sites[0]),
                            static_cast<std::int8_t>(z_sites[1]),
                            static_cast<std::int8_t>(z_sites[2])};
            }
            return ref;
        default: return std::nullopt;
    }
}

SpinMonomial defining_monomial(VarClass c) {
    SpinMonomial m;
    switch (c) {
        case VarClass::Z: m.sites = {{0, SiteOp::z}}; break;
        case VarClass::PM: m.sites = {{0, SiteOp::plus}, {1, SiteOp::minus}}; break;
        case VarClass::ZZ: m.sites = {{0, SiteOp::z}, {1, SiteOp::z}}; break;
        case VarClass::PMZ:
            m.sites = {{0, SiteOp::plus}, {1, SiteOp::minus}, {2, SiteOp::z}};
            break;
        case VarClass::ZZZ:
            m.sites = {{0, SiteOp::z}, {1, SiteOp::z}, {2, SiteOp::z}};
            break;
    }
    return m;
}

// <sigma^+_n A sigma^-_m> - <sigma^+_n sigma^-_m A>/2 - <A sigma^+_n sigma^-_m>/2
SpinPoly dissipator_piece(const SpinMonomial& a, int n, int m) {
    SpinPoly base{a};
    SpinPoly p1 = left_multiply(right_multiply(base, m, SiteOp::minus), n, SiteOp::plus);
    SpinPoly p2 = left_multiply(left_multiply(base, m, SiteOp::minus), n, SiteOp::plus);
    SpinPoly p3 = right_multiply(right_multiply(base, n, SiteOp::plus), m, SiteOp::minus);
    SpinPoly sum;
    for (SpinMonomial& t : p1) sum.push_back(std::move(t));
    for (SpinMonomial& t : p2) {
        t.coeff *= -0.5;
        sum.push_back(std::move(t));
    }
    for (SpinMonomial& t : p3) {
        t.coeff *= -0.5;
        sum.push_back(std::move(t));
    }
    return collect(std::move(sum));
}

struct TermKey {
    std::int8_t g_a, g_b;
    std::vector<std::array<std::int8_t, 4>> factors;
    bool operator<(const TermKey& o) const {
        if (g_a != o.g_a) return g_a < o.g_a;
        if (g_b != o.g_b) return g_b < o.g_b;
        return factors < o.factors;
    }
};

class TermAccumulator {
  public:
    void add(std::int8_t ga, std::int8_t gb, double coeff,
             std::vector<FactorRef> factors) {
        // The coupling matrix is symmetric; order the reference so mirror
        // contributions merge (free slots ascending, sum index last).
        if (gb != sum_site && (ga == sum_site || ga > gb)) std::swap(ga, gb);
        TermKey key{ga, gb, {}};
        std::sort(factors.begin(), factors.end(), [](const FactorRef& a, const FactorRef& b) {
            if (a.cls != b.cls) return a.cls < b.cls;
            return a.slot < b.slot;
        });
        for (const FactorRef& f : factors)
            key.factors.push_back({static_cast<std::int8_t>(f.cls), f.slot[0], f.slot[1],
                                   f.slot[2]});
        auto [it, inserted] = acc_.try_emplace(key, std::pair(coeff, factors));
        if (!inserted) it->second.first += coeff;
    }

    void emit(ClassTemplate& tmpl) const {
        for (const auto& [key, val] : acc_) {
            const auto& [coeff, factors] = val;
            if (std::abs(coeff) < 1e-14) continue;
            TemplateTerm term;
            term.coeff = coeff;
            term.g_a = key.g_a;
            term.g_b = key.g_b;
            term.factors = factors;
            const bool has_sum =
                key.g_a == sum_site || key.g_b == sum_site ||
                std::any_of(factors.begin(), factors.end(), [](const FactorRef& f) {
                    return f.slot[0] == sum_site || f.slot[1] == sum_site ||
                           f.slot[2] == sum_site;
                });
            (has_sum ? tmpl.summed : tmpl.local).push_back(std::move(term));
        }
    }

  private:
    std::map<TermKey, std::pair<double, std::vector<FactorRef>>> acc_;
};

}  // namespace

ClassTemplate derive_eom(VarClass cls, int truncation) {
    if (truncation != 2 && truncation != 3)
        throw std::domain_error("derive_eom: truncation must be 2 or 3");
    const int arity = class_arity(cls);
    if (arity > truncation)
        throw std::domain_error("derive_eom: class outside the truncation's variable set");

    const SpinMonomial a = defining_monomial(cls);

    // Both summation indices outside the operator content cancel identically;
    // confirm the algebra agrees before dropping those cases.
    if (!dissipator_piece(a, sum_site, sum_site).empty() ||
        !dissipator_piece(a, sum_site, -2).empty())
        throw std::logic_error("derive_eom: outside-pair terms failed to cancel");

    std::vector<std::pair<std::pair<std::int8_t, std::int8_t>, SpinPoly>> cases;
    for (std::int8_t p = 0; p < arity; ++p)
        for (std::int8_t q = 0; q < arity; ++q)
            cases.push_back({{p, q}, dissipator_piece(a, p, q)});
    for (std::int8_t p = 0; p < arity; ++p) {
        cases.push_back({{p, sum_site}, dissipator_piece(a, p, sum_site)});
        cases.push_back({{sum_site, p}, dissipator_piece(a, sum_site, p)});
    }

    TermAccumulator acc;
    for (const auto& [gref, poly] : cases) {
        for (const SpinMonomial& mono : poly) {
            if (charge(mono) != 0) continue;  // vanishes in the U(1) sector
            if (std::abs(mono.coeff.imag()) > 1e-14)
                throw std::logic_error("derive_eom: complex coefficient in dissipator");
            const double c0 = mono.coeff.real();
            const int order = static_cast<int>(mono.sites.size());
            if (order <= truncation) {
                std::vector<FactorRef> factors;
                if (order > 0) {
                    const auto ref = classify_block(mono.sites);
                    if (!ref) throw std::logic_error("derive_eom: unclassifiable moment");
                    factors.push_back(*ref);
                }
                acc.add(gref.first, gref.second, c0, std::move(factors));
            } else if (order == truncation + 1) {
                const MomentExpansion exp = cumulant_expand(mono.sites, truncation, true);
                for (const auto& term : exp.terms) {
                    std::vector<FactorRef> factors;
                    bool dead = false;
                    for (const auto& block : term.blocks) {
                        const auto ref = classify_block(block);
                        if (!ref) {
                            dead = true;
                            break;
                        }
                        factors.push_back(*ref);
                    }
                    if (!dead)
                        acc.add(gref.first, gref.second, c0 * term.coeff,
                                std::move(factors));
                }
            } else {
                throw std::logic_error("derive_eom: moment order exceeds truncation + 1");
            }
        }
    }

    ClassTemplate tmpl;
    tmpl.cls = cls;
    tmpl.arity = arity;
    acc.emit(tmpl);
    return tmpl;
}

const ClassTemplate& MomentSystem::tmpl(VarClass c) const {
    for (const auto& t : templates)
        if (t.cls == c) return t;
    throw std::domain_error("MomentSystem: class not part of this truncation");
}

// ---------------------------------------------------------------------------
// Reference store and evaluation
// ---------------------------------------------------------------------------

namespace {

struct CanonicalRef {
    std::array<int, 4> key;
    bool conjugate;
};

CanonicalRef canonical_key(VarClass c, std::array<int, 3> idx) {
    switch (c) {
        case VarClass::Z: return {{0, idx[0], -1, -1}, false};
        case VarClass::PM:
            if (idx[0] < idx[1]) return {{1, idx[0], idx[1], -1}, false};
            return {{1, idx[1], idx[0], -1}, true};
        case VarClass::ZZ: {
            const int lo = std::min(idx[0], idx[1]), hi = std::max(idx[0], idx[1]);
            return {{2, lo, hi, -1}, false};
        }
        case VarClass::PMZ:
            if (idx[0] < idx[1]) return {{3, idx[0], idx[1], idx[2]}, false};
            return {{3, idx[1], idx[0], idx[2]}, true};
        case VarClass::ZZZ: {
            std::array<int, 3> s = idx;
            std::sort(s.begin(), s.end());
            return {{4, s[0], s[1], s[2]}, false};
        }
    }
    return {{-1, -1, -1, -1}, false};
}

}  // namespace

void MomentStore::set(VarClass c, std::array<int, 3> idx, cdouble v) {
    const CanonicalRef ref = canonical_key(c, idx);
    vals[ref.key] = ref.conjugate ? std::conj(v) : v;
}

cdouble MomentStore::get(VarClass c, std::array<int, 3> idx) const {
    const CanonicalRef ref = canonical_key(c, idx);
    const auto it = vals.find(ref.key);
    if (it == vals.end()) throw std::logic_error("MomentStore: missing moment");
    return ref.conjugate ? std::conj(it->second) : it->second;
}

cdouble eval_template_instance(const ClassTemplate& tmpl, std::array<int, 3> idx,
                               const MomentStore& store, const std::vector<double>& gamma,
                               int n) {
    auto resolve = [&idx](std::int8_t slot, int m_index) {
        return slot == sum_site ? m_index : idx[slot];
    };
    auto factor_value = [&](const FactorRef& f, int m_index) {
        std::array<int, 3> fidx{0, 0, 0};
        for (int s = 0; s < class_arity(f.cls); ++s) fidx[s] = resolve(f.slot[s], m_index);
        return store.get(f.cls, fidx);
    };

    cdouble acc = 0.0;
    for (const TemplateTerm& term : tmpl.local) {
        cdouble prod = term.coeff;
        prod *= gamma[static_cast<std::size_t>(resolve(term.g_a, -1)) * n +
                      resolve(term.g_b, -1)];
        for (const FactorRef& f : term.factors) prod *= factor_value(f, -1);
        acc += prod;
    }
    for (int m = 0; m < n; ++m) {
        bool is_free = false;
        for (int s = 0; s < tmpl.arity; ++s) is_free = is_free || (idx[s] == m);
        if (is_free) continue;
        for (const TemplateTerm& term : tmpl.summed) {
            cdouble prod = term.coeff;
            prod *= gamma[static_cast<std::size_t>(resolve(term.g_a, m)) * n +
                          resolve(term.g_b, m)];
            for (const FactorRef& f : term.factors) prod *= factor_value(f, m);
            acc += prod;
        }
    }
    return acc;
}

// ---------------------------------------------------------------------------
// Debug dump
// ---------------------------------------------------------------------------

namespace {

std::string slot_name(std::int8_t s) {
    switch (s) {
        case 0: return "i";
        case 1: return "j";
        case 2: return "k";
        case sum_site: return "m";
        default: return "?";
    }
}

std::string term_text(const TemplateTerm& t) {
    std::ostringstream os;
    os << (t.coeff < 0 ? "- " : "+ ");
    os << std::abs(t.coeff);
    os << "*g(" << slot_name(t.g_a) << "," << slot_name(t.g_b) << ")";
    for (const FactorRef& f : t.factors) {
        os << "*" << to_string(f.cls) << "(";
        for (int s = 0; s < class_arity(f.cls); ++s)
            os << (s ? "," : "") << slot_name(f.slot[s]);
        os << ")";
    }
    return os.str();
}

}  // namespace

std::string MomentSystem::debug_dump() const {
    std::ostringstream os;
    os << "moment system, truncation order " << order << "\n";
    for (const ClassTemplate& t : templates) {
        os << "d " << to_string(t.cls) << "(";
        for (int s = 0; s < t.arity; ++s) os << (s ? "," : "") << slot_name(s);
        os << ")/dt =\n";
        for (const TemplateTerm& term : t.local) os << "    " << term_text(term) << "\n";
        if (!t.summed.empty()) {
            os << "    sum over m outside {";
            for (int s = 0; s < t.arity; ++s) os << (s ? "," : "") << slot_name(s);
            os << "} of:\n";
            for (const TemplateTerm& term : t.summed)
                os << "        " << term_text(term) << "\n";
        }
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Three-emitter brute-force verification oracle
// ---------------------------------------------------------------------------

namespace {

constexpr int oracle_n = 3;
constexpr int oracle_dim = 8;
using M8 = std::array<cdouble, oracle_dim * oracle_dim>;

M8 site_matrix(int site, SiteOp op) {
    M8 m{};
    const int bit = 1 << site;
    for (int b = 0; b < oracle_dim; ++b) {
        switch (op) {
            case SiteOp::plus:
                if (!(b & bit)) m[(b | bit) * oracle_dim + b] = 1.0;
                break;
            case SiteOp::minus:
                if (b & bit) m[(b ^ bit) * oracle_dim + b] = 1.0;
                break;
            case SiteOp::z:
                m[b * oracle_dim + b] = (b & bit) ? 1.0 : -1.0;
                break;
        }
    }
    return m;
}

M8 mat_mul(const M8& a, const M8& b) {
    M8 c{};
    for (int i = 0; i < oracle_dim; ++i)
        for (int k = 0; k < oracle_dim; ++k) {
            const cdouble aik = a[i * oracle_dim + k];
            if (aik == cdouble(0.0)) continue;
            for (int j = 0; j < oracle_dim; ++j)
                c[i * oracle_dim + j] += aik * b[k * oracle_dim + j];
        }
    return c;
}

M8 dagger(const M8& a) {
    M8 c{};
    for (int i = 0; i < oracle_dim; ++i)
        for (int j = 0; j < oracle_dim; ++j)
            c[i * oracle_dim + j] = std::conj(a[j * oracle_dim + i]);
    return c;
}

cdouble trace_mul(const M8& a, const M8& b) {  // tr(a b)
    cdouble acc = 0.0;
    for (int i = 0; i < oracle_dim; ++i)
        for (int k = 0; k < oracle_dim; ++k)
            acc += a[i * oracle_dim + k] * b[k * oracle_dim + i];
    return acc;
}

M8 lindblad_rhs_3(const M8& rho, const std::vector<double>& gamma) {
    M8 out{};
    for (int a = 0; a < oracle_n; ++a) {
        const M8 sm_a = site_matrix(a, SiteOp::minus);
        const M8 sp_a = site_matrix(a, SiteOp::plus);
        for (int b = 0; b < oracle_n; ++b) {
            const double w = gamma[a * oracle_n + b];
            const M8 sm_b = site_matrix(b, SiteOp::minus);
            const M8 sp_b = site_matrix(b, SiteOp::plus);
            const M8 jump = mat_mul(mat_mul(sm_a, rho), sp_b);
            const M8 hop = mat_mul(sp_a, sm_b);
            const M8 anti1 = mat_mul(hop, rho);
            const M8 anti2 = mat_mul(rho, hop);
            for (int i = 0; i < oracle_dim * oracle_dim; ++i)
                out[i] += w * (jump[i] - 0.5 * (anti1[i] + anti2[i]));
        }
    }
    return out;
}

std::vector<std::pair<int, SiteOp>> class_ops(VarClass c, std::array<int, 3> idx) {
    switch (c) {
        case VarClass::Z: return {{idx[0], SiteOp::z}};
        case VarClass::PM: return {{idx[0], SiteOp::plus}, {idx[1], SiteOp::minus}};
        case VarClass::ZZ: return {{idx[0], SiteOp::z}, {idx[1], SiteOp::z}};
        case VarClass::PMZ:
            return {{idx[0], SiteOp::plus}, {idx[1], SiteOp::minus}, {idx[2], SiteOp::z}};
        case VarClass::ZZZ:
            return {{idx[0], SiteOp::z}, {idx[1], SiteOp::z}, {idx[2], SiteOp::z}};
    }
    return {};
}

cdouble oracle_expect(const M8& rho, VarClass c, std::array<int, 3> idx) {
    M8 op{};
    for (int i = 0; i < oracle_dim; ++i) op[i * oracle_dim + i] = 1.0;
    for (const auto& [site, o] : class_ops(c, idx)) op = mat_mul(op, site_matrix(site, o));
    return trace_mul(op, rho);
}

std::vector<std::pair<VarClass, std::array<int, 3>>> oracle_instances(int order) {
    std::vector<std::pair<VarClass, std::array<int, 3>>> inst;
    for (int i = 0; i < oracle_n; ++i) inst.push_back({VarClass::Z, {i, -1, -1}});
    for (int a = 0; a < oracle_n; ++a)
        for (int b = a + 1; b < oracle_n; ++b) {
            inst.push_back({VarClass::PM, {a, b, -1}});
            inst.push_back({VarClass::ZZ, {a, b, -1}});
        }
    if (order >= 3) {
        for (int a = 0; a < oracle_n; ++a)
            for (int b = a + 1; b < oracle_n; ++b)
                for (int p = 0; p < oracle_n; ++p) {
                    if (p == a || p == b) continue;
                    inst.push_back({VarClass::PMZ, {a, b, p}});
                }
        inst.push_back({VarClass::ZZZ, {0, 1, 2}});
    }
    return inst;
}

MomentStore store_from_rho(const M8& rho, int order) {
    MomentStore store;
    store.n = oracle_n;
    for (const auto& [cls, idx] : oracle_instances(3))  // always fill all classes
        store.set(cls, idx, oracle_expect(rho, cls, idx));
    (void)order;
    return store;
}

M8 random_charge_diagonal_rho(std::mt19937& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    M8 x{};
    for (auto& v : x) v = cdouble(dist(rng), dist(rng));
    M8 rho = mat_mul(x, dagger(x));
    // keep only coherences within fixed total-excitation sectors
    for (int i = 0; i < oracle_dim; ++i)
        for (int j = 0; j < oracle_dim; ++j)
            if (std::popcount(unsigned(i)) != std::popcount(unsigned(j)))
                rho[i * oracle_dim + j] = 0.0;
    cdouble tr = 0.0;
    for (int i = 0; i < oracle_dim; ++i) tr += rho[i * oracle_dim + i];
    for (auto& v : rho) v /= tr;
    return rho;
}

void rk4_step(M8& rho, const std::vector<double>& gamma, double dt) {
    const M8 k1 = lindblad_rhs_3(rho, gamma);
    M8 tmp;
    for (int i = 0; i < oracle_dim * oracle_dim; ++i) tmp[i] = rho[i] + 0.5 * dt * k1[i];
    const M8 k2 = lindblad_rhs_3(tmp, gamma);
    for (int i = 0; i < oracle_dim * oracle_dim; ++i) tmp[i] = rho[i] + 0.5 * dt * k2[i];
    const M8 k3 = lindblad_rhs_3(tmp, gamma);
    for (int i = 0; i < oracle_dim * oracle_dim; ++i) tmp[i] = rho[i] + dt * k3[i];
    const M8 k4 = lindblad_rhs_3(tmp, gamma);
    for (int i = 0; i < oracle_dim * oracle_dim; ++i)
        rho[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

void verify_templates(const MomentSystem& system) {
    std::mt19937 rng(0x5eedu);
    std::uniform_real_distribution<double> coupling(-0.9, 0.9);
    std::vector<double> gamma(oracle_n * oracle_n, 0.0);
    for (int a = 0; a < oracle_n; ++a) {
        gamma[a * oracle_n + a] = 1.0;
        for (int b = a + 1; b < oracle_n; ++b)
            gamma[a * oracle_n + b] = gamma[b * oracle_n + a] = coupling(rng);
    }

    const M8 rho0 = random_charge_diagonal_rho(rng);
    const MomentStore store0 = store_from_rho(rho0, system.order);

    // Second-order forward finite difference of exactly propagated moments.
    const double delta = 5e-4;
    M8 rho1 = rho0;
    for (int s = 0; s < 50; ++s) rk4_step(rho1, gamma, delta / 50.0);
    M8 rho2 = rho1;
    for (int s = 0; s < 50; ++s) rk4_step(rho2, gamma, delta / 50.0);

    // At three emitters the summed closure terms have nothing to act on, so
    // order 3 is closure-free everywhere; at order 2 only the single-site
    // class is.
    const std::vector<std::pair<VarClass, std::array<int, 3>>> targets =
        (system.order >= 3) ? oracle_instances(3) : oracle_instances(0);
    std::vector<std::pair<VarClass, std::array<int, 3>>> checks;
    for (const auto& t : targets)
        if (system.order >= 3 || t.first == VarClass::Z) checks.push_back(t);

    const M8 rhs = lindblad_rhs_3(rho0, gamma);
    for (const auto& [cls, idx] : checks) {
        const cdouble templ =
            eval_template_instance(system.tmpl(cls), idx, store0, gamma, oracle_n);
        const cdouble m0 = oracle_expect(rho0, cls, idx);
        const cdouble m1 = oracle_expect(rho1, cls, idx);
        const cdouble m2 = oracle_expect(rho2, cls, idx);
        const cdouble fd = (-3.0 * m0 + 4.0 * m1 - m2) / (2.0 * delta);
        if (std::abs(templ - fd) > 1e-3 * std::max(1.0, std::abs(fd)))
            throw std::logic_error(std::string("compile_system: template for class ") +
                                   to_string(cls) +
                                   " disagrees with the exact three-emitter oracle");
        // Sharper adjoint check against tr(A * d rho/dt).
        const cdouble adj = oracle_expect(rhs, cls, idx);
        if (std::abs(templ - adj) > 1e-9 * std::max(1.0, std::abs(adj)))
            throw std::logic_error(std::string("compile_system: template for class ") +
                                   to_string(cls) + " fails the adjoint-derivative check");
    }
}

}  // namespace

MomentSystem compile_system(int truncation) {
    if (truncation != 2 && truncation != 3)
        throw std::domain_error("compile_system: truncation must be 2 or 3");
    MomentSystem system;
    system.order = truncation;
    system.templates.push_back(derive_eom(VarClass::Z, truncation));
    system.templates.push_back(derive_eom(VarClass::PM, truncation));
    system.templates.push_back(derive_eom(VarClass::ZZ, truncation));
    if (truncation == 3) {
        system.templates.push_back(derive_eom(VarClass::PMZ, truncation));
        system.templates.push_back(derive_eom(VarClass::ZZZ, truncation));
    }
    verify_templates(system);
    return system;
}

}  // namespace supercorr
