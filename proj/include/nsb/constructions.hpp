#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nsb/criteria.hpp"
#include "nsb/family.hpp"
#include "nsb/groups.hpp"
#include "nsb/measures.hpp"
#include "nsb/permwitness.hpp"

namespace nsb {

struct Constraint {
    std::string name;
    double lhs = 0.0;
    std::string relation;  // "<=", "<", ">=", ">", "==", "~=" (relative tolerance)
    double rhs = 0.0;
    double tol = 0.0;
    bool holds = false;
};

inline bool evaluate(const Constraint& c) {
    if (c.relation == "<=") return c.lhs <= c.rhs;
    if (c.relation == "<") return c.lhs < c.rhs;
    if (c.relation == ">=") return c.lhs >= c.rhs;
    if (c.relation == ">") return c.lhs > c.rhs;
    if (c.relation == "==") return c.lhs == c.rhs;
    if (c.relation == "~=") return std::fabs(c.lhs - c.rhs) <= c.tol * std::max(1.0, std::fabs(c.rhs));
    throw std::invalid_argument("unknown relation " + c.relation);
}

inline Constraint make_constraint(std::string name, double lhs, std::string rel, double rhs, double tol = 0.0) {
    Constraint c{std::move(name), lhs, std::move(rel), rhs, tol, false};
    c.holds = evaluate(c);
    return c;
}

inline bool all_hold(const std::vector<Constraint>& cs) {
    return std::all_of(cs.begin(), cs.end(), [](const Constraint& c) { return evaluate(c); });
}

inline std::vector<std::string> failing(const std::vector<Constraint>& cs) {
    std::vector<std::string> out;
    for (const auto& c : cs)
        if (!evaluate(c)) out.push_back(c.name);
    return out;
}

struct Construction {
    MeasureFamily family;
    std::vector<Constraint> constraints;
    std::vector<std::string> substitutions;
    std::optional<TypeWitness> witness;
    std::vector<Window> windows;  // nested summation windows natural to the construction
    std::string expected_type;
};

namespace detail {

inline void require_valid(const Construction& c) {
    auto bad = failing(c.constraints);
    if (!bad.empty()) {
        std::string msg = "construction '" + c.family.name + "' violates:";
        for (auto& b : bad) msg += " " + b;
        throw std::runtime_error(msg);
    }
}

inline std::string itos(int64_t v) { return std::to_string(v); }

inline Interval minkowski(Interval a, Interval b) { return {a.lo + b.lo, a.hi + b.hi}; }

inline bool contains(Interval outer, Interval inner) { return outer.lo <= inner.lo && inner.hi <= outer.hi; }

// |(G + F) \ F| for intervals.
inline uint64_t enlarged_boundary(Interval G, Interval F) {
    return minkowski(G, F).size() - F.size();
}

inline std::vector<Window> box_windows(const std::vector<Interval>& boxes, std::size_t from = 1) {
    std::vector<Window> w;
    for (std::size_t i = from; i < boxes.size(); ++i) w.push_back(Window::interval(boxes[i].lo, boxes[i].hi));
    return w;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Lattice-type construction from a subset A of G x X0.

struct Prop51Spec {
    std::string name = "prop51";
    DiscreteMeasure base;
    double lambda = 0.5;
    // Sections A_h: either constant on the classes of a ZClasses partition, or a finite table
    // (A_h empty off the table).
    std::optional<ZClasses> classes;
    std::vector<std::vector<int64_t>> class_sections;
    std::map<int64_t, std::vector<int64_t>> table;
    std::vector<int64_t> generators{1, -1};
};

inline std::vector<int64_t> prop51_section(const Prop51Spec& s, int64_t h) {
    if (s.classes) return s.class_sections.at(s.classes->cls(h));
    auto it = s.table.find(h);
    return it == s.table.end() ? std::vector<int64_t>{} : it->second;
}

inline double prop51_log_rho(const DiscreteMeasure& base, double lambda, const std::vector<int64_t>& section) {
    double m = mass_of(base, section);
    return -std::log(lambda * m + (1.0 - m));
}

inline DiscreteMeasure prop51_measure(const DiscreteMeasure& base, double lambda, const std::vector<int64_t>& section) {
    std::set<int64_t> in(section.begin(), section.end());
    std::vector<double> lw = base.logw;
    double ll = std::log(lambda);
    for (std::size_t i = 0; i < base.size(); ++i)
        if (in.count(base.labels[i])) lw[i] += ll;
    return DiscreteMeasure::from_logw(base.labels, std::move(lw), base.tail_mass);
}

namespace detail {

// Calls f(h_class_or_key, h_plus_g_class_or_key, multiplicity) over all h with differing sections.
template <class F>
void prop51_pairs(const Prop51Spec& s, int64_t g, F&& f) {
    if (s.classes) {
        const ZClasses& Z = *s.classes;
        Interval all = whole_line().span;
        for (std::size_t i = 0; i < Z.size(); ++i)
            for (std::size_t j = 0; j < Z.size(); ++j) {
                if (i == j) continue;
                uint64_t c = Z.pair_count(i, j, g, all);
                if (c) f(s.class_sections[i], s.class_sections[j], c);
            }
        return;
    }
    std::set<int64_t> hs;
    for (auto& [h, sec] : s.table) {
        hs.insert(h);
        hs.insert(h - g);
    }
    for (int64_t h : hs) {
        auto a = prop51_section(s, h), b = prop51_section(s, h + g);
        if (a != b) f(a, b, uint64_t{1});
    }
}

}  // namespace detail

// zeta(g.A sym A) = sum_h mu0(A_h sym A_{h+g}).
inline double zeta_symdiff(const Prop51Spec& s, int64_t g) {
    double z = 0.0;
    detail::prop51_pairs(s, g, [&](const std::vector<int64_t>& a, const std::vector<int64_t>& b, uint64_t c) {
        std::vector<int64_t> d;
        std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(d));
        z += static_cast<double>(c) * mass_of(s.base, d);
    });
    return z;
}

struct SetminusCounts {
    std::map<int64_t, uint64_t> forward;   // label x -> #{h : x in A_h, x not in A_{h+g}}
    std::map<int64_t, uint64_t> backward;  // label x -> #{h : x in A_{h+g}, x not in A_h}
    double zeta_forward = 0.0;             // zeta(g.A \ A)
    double zeta_backward = 0.0;            // zeta(A \ g.A)
};

inline SetminusCounts zeta_setminus(const Prop51Spec& s, int64_t g) {
    SetminusCounts r;
    detail::prop51_pairs(s, g, [&](const std::vector<int64_t>& a, const std::vector<int64_t>& b, uint64_t c) {
        std::vector<int64_t> ab, ba;
        std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(ab));
        std::set_difference(b.begin(), b.end(), a.begin(), a.end(), std::back_inserter(ba));
        for (auto x : ab) r.forward[x] += c;
        for (auto x : ba) r.backward[x] += c;
    });
    // One fixed label order for both sums.
    for (std::size_t i = 0; i < s.base.size(); ++i) {
        int64_t x = s.base.labels[i];
        auto f = r.forward.find(x), b = r.backward.find(x);
        if (f != r.forward.end()) r.zeta_forward += static_cast<double>(f->second) * s.base.prob(i);
        if (b != r.backward.end()) r.zeta_backward += static_cast<double>(b->second) * s.base.prob(i);
    }
    return r;
}

// Partial sums of sum_h mu0(A_h)^2 over the windows.
inline std::vector<double> section_square_sums(const Prop51Spec& s, const std::vector<Window>& windows) {
    std::vector<double> out;
    for (const auto& w : windows) {
        double t = 0.0;
        if (s.classes) {
            for (std::size_t i = 0; i < s.classes->size(); ++i) {
                double m = mass_of(s.base, s.class_sections[i]);
                t += static_cast<double>(s.classes->count(i, w.span)) * m * m;
            }
        } else {
            for (auto& [h, sec] : s.table)
                if (h >= w.span.lo && h <= w.span.hi) {
                    double m = mass_of(s.base, sec);
                    t += m * m;
                }
        }
        out.push_back(t);
    }
    return out;
}

// Labels x whose section A^x = {h : x in A_h} is infinite.
inline std::vector<int64_t> infinite_sections(const Prop51Spec& s) {
    if (!s.classes) return {};
    return s.class_sections.back();
}

inline Construction build_prop51(const Prop51Spec& s) {
    if (!(s.lambda > 0.0 && s.lambda < 1.0)) throw std::invalid_argument("lambda must lie in (0,1)");
    if (s.classes && s.class_sections.size() != s.classes->size())
        throw std::invalid_argument("one section per class required");
    auto sorted_sections = [&](std::vector<int64_t> v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        for (auto x : v)
            if (s.base.index_of(x) < 0) throw std::invalid_argument("section label outside X0");
        return v;
    };
    Prop51Spec spec = s;
    for (auto& sec : spec.class_sections) sec = sorted_sections(sec);
    for (auto& [h, sec] : spec.table) sec = sorted_sections(sec);

    Construction c;
    MeasureFamily& f = c.family;
    f.name = s.name;
    f.group = Group(GroupSpec{GroupKind::Z, 1, 2});
    f.reference = Measure{spec.base};
    f.lambda = s.lambda;
    f.lattice_period = std::log(s.lambda);
    f.bounded_rn = true;
    double loglam = std::log(s.lambda);
    if (spec.classes) {
        f.classes = spec.classes;
        for (const auto& sec : spec.class_sections) f.class_measures.push_back(prop51_measure(spec.base, s.lambda, sec));
    } else {
        f.rule = [spec](const Element& g) -> Measure {
            return prop51_measure(spec.base, spec.lambda, prop51_section(spec, g.coords.at(0)));
        };
    }
    f.lattice = [spec](const Element& g, int64_t x) {
        auto sec = prop51_section(spec, g.coords.at(0));
        bool in = std::binary_search(sec.begin(), sec.end(), x);
        return LatticeForm{prop51_log_rho(spec.base, spec.lambda, sec), in ? 1 : 0};
    };
    if (spec.classes) {
        // Exact remainder of the class model outside the window.
        MeasureFamily copy = f;
        f.tail = [copy](const Element& g, const Window& w) {
            auto h2 = [](const Measure& p, const Measure& q) { return pair_stats(p, q).h2; };
            double full = sum_over_window(copy, g, whole_line(), h2);
            double part = sum_over_window(copy, g, w, h2);
            return std::max(0.0, full - part);
        };
    } else {
        int64_t lo = spec.table.empty() ? 0 : spec.table.begin()->first;
        int64_t hi = spec.table.empty() ? 0 : spec.table.rbegin()->first;
        f.tail = [lo, hi](const Element& g, const Window& w) {
            int64_t a = iabs(g.coords.at(0));
            if (!w.is_interval) return kInf;
            return (w.span.lo <= lo - a && w.span.hi >= hi + a) ? 0.0 : kInf;
        };
    }

    // Exact lattice property on every class / table entry.
    double worst = 0.0;
    auto check_lattice = [&](const std::vector<int64_t>& sec) {
        DiscreteMeasure m = prop51_measure(spec.base, s.lambda, sec);
        double lr = prop51_log_rho(spec.base, s.lambda, sec);
        for (std::size_t i = 0; i < m.size(); ++i) {
            bool in = std::binary_search(sec.begin(), sec.end(), m.labels[i]);
            double resid = m.logw[i] - spec.base.logw[i] - lr - (in ? loglam : 0.0);
            worst = std::max(worst, std::fabs(resid));
        }
    };
    if (spec.classes)
        for (const auto& sec : spec.class_sections) check_lattice(sec);
    else {
        check_lattice({});
        for (auto& [h, sec] : spec.table) check_lattice(sec);
    }
    c.constraints.push_back(make_constraint("lattice residual of log dmu_g/dmu0", worst, "<=", 1e-12));
    for (auto g : s.generators) {
        double z = zeta_symdiff(spec, g);
        f.meta["zeta_symdiff[" + detail::itos(g) + "]"] = z;
        c.constraints.push_back(make_constraint("zeta(gA sym A) finite, g=" + detail::itos(g), z, "<", kInf));
        auto sm = zeta_setminus(spec, g);
        c.constraints.push_back(make_constraint("zeta(gA\\A) = zeta(A\\gA), g=" + detail::itos(g),
                                                sm.zeta_forward, "==", sm.zeta_backward));
    }
    f.meta["infinite_sections"] = static_cast<double>(infinite_sections(spec).size());
    f.meta["lambda"] = s.lambda;
    c.expected_type = "III_lambda";
    detail::require_valid(c);
    return c;
}

// ---------------------------------------------------------------------------
// Desk instance of the amenable III_lambda corollary on Z: F_n = [-2^{n+2}, 2^{n+2} - 1],
// mu0(n) = 2^{-n}, A = {(g, n) : g in F_n}.

inline Interval cor52_box(int n) {
    int64_t r = int64_t{1} << (n + 2);
    return {-r, r - 1};
}

inline Prop51Spec cor52_spec(double lambda, int levels = 30, int labels = 40) {
    if (levels < 2 || levels > 56 || labels < levels + 1) throw std::invalid_argument("bad cor52 sizes");
    std::vector<int64_t> lab;
    std::vector<double> lw;
    for (int n = 1; n <= labels; ++n) {
        lab.push_back(n);
        lw.push_back(-n * std::log(2.0));
    }
    Prop51Spec s;
    s.name = "cor52-desk";
    s.base = DiscreteMeasure::from_logw(lab, lw, std::ldexp(1.0, -labels));
    s.lambda = lambda;
    std::vector<Interval> boxes;
    for (int n = 1; n <= levels; ++n) boxes.push_back(cor52_box(n));
    s.classes = ZClasses(boxes);
    // class i < levels is F_{i+1} \ F_i with A_h = [i+1, inf); the outer class has A_h = [levels+1, inf)
    for (int i = 0; i <= levels; ++i) {
        std::vector<int64_t> sec;
        for (int n = i + 1; n <= labels; ++n) sec.push_back(n);
        s.class_sections.push_back(sec);
    }
    return s;
}

inline Construction build_cor52(double lambda, int levels = 30, int labels = 40) {
    Prop51Spec s = cor52_spec(lambda, levels, labels);
    Construction c = build_prop51(s);
    c.family.caveats = {"G_n = [-4,4] for every n (enlargers do not grow)",
                        "labels truncated at " + detail::itos(labels),
                        "sections frozen beyond F_" + detail::itos(levels)};
    c.substitutions = c.family.caveats;
    double rho = 0.0;
    for (int n = 1; n <= levels; ++n) rho += 1.0 / static_cast<double>(cor52_box(n).size());
    for (int n = 1; n <= levels; ++n) {
        Interval F = cor52_box(n);
        std::string tag = "n=" + detail::itos(n);
        for (int64_t g = -4; g <= 4; ++g) {
            Interval shifted{F.lo + g, F.hi + g};
            double sym = 2.0 * static_cast<double>(F.size() - intersect(F, shifted).size());
            c.constraints.push_back(make_constraint("|gF sym F|/|F| <= 2^-n, g=" + detail::itos(g) + " " + tag,
                                                    sym / static_cast<double>(F.size()), "<=", std::ldexp(1.0, -n)));
        }
        if (n >= 2)
            c.constraints.push_back(make_constraint("|F_n| >= 2|F_{n-1}| " + tag, static_cast<double>(F.size()), ">=",
                                                    2.0 * static_cast<double>(cor52_box(n - 1).size())));
    }
    c.constraints.push_back(make_constraint("|F_1| >= 2", static_cast<double>(cor52_box(1).size()), ">=", 2.0));
    for (int64_t g = -4; g <= 4; ++g)
        c.constraints.push_back(make_constraint("zeta(gA sym A) <= 2 rho^-1, g=" + detail::itos(g),
                                                zeta_symdiff(s, g), "<=", 2.0 / rho));
    for (int n = 1; n <= levels; ++n) c.windows.push_back(Window::interval(cor52_box(n).lo, cor52_box(n).hi));
    TypeWitness w;
    w.nu = Measure{s.base};
    w.lattice_exact = true;
    w.class_constant = true;
    w.p = std::log(lambda);
    w.t = [s](const Element& g) { return prop51_log_rho(s.base, s.lambda, prop51_section(s, g.coords.at(0))); };
    w.log_rho = w.t;
    c.witness = w;
    c.family.meta["rho"] = rho;
    detail::require_valid(c);
    return c;
}

// ---------------------------------------------------------------------------
// mu_k(n) proportional to 2^{-n^2}, times lambda when 2^{n^2} >= |k|; labels 1..K.

// Smallest n >= 1 with 2^{n^2} >= |k|.
inline int example55_threshold(int64_t k) {
    uint64_t a = static_cast<uint64_t>(iabs(k));
    for (int n = 1;; ++n) {
        int e = n * n;
        if (e >= 64 || (uint64_t{1} << e) >= a) return n;
    }
}

inline Prop51Spec example55_spec(double lambda, int K = 8) {
    if (K < 2 || K > 8) throw std::invalid_argument("K must lie in [2, 8]");
    std::vector<int64_t> lab;
    std::vector<double> lw;
    for (int n = 1; n <= K; ++n) {
        lab.push_back(n);
        lw.push_back(-static_cast<double>(n * n) * std::log(2.0));
    }
    Prop51Spec s;
    s.name = "example55";
    s.base = DiscreteMeasure::from_logw(lab, lw, std::ldexp(1.0, -(K + 1) * (K + 1)));
    s.lambda = lambda;
    // box m: |k| <= 2^{m^2}, m = 1..7 (2^49 < kFar)
    std::vector<Interval> boxes;
    for (int m = 1; m <= 7; ++m) {
        int64_t r = int64_t{1} << (m * m);
        boxes.push_back({-r, r});
    }
    s.classes = ZClasses(boxes);
    for (int m = 1; m <= 8; ++m) {
        std::vector<int64_t> sec;
        for (int n = m; n <= K; ++n) sec.push_back(n);
        s.class_sections.push_back(sec);
    }
    return s;
}

inline Construction build_example55(double lambda = 0.5, int K = 8) {
    Prop51Spec s = example55_spec(lambda, K);
    Construction c = build_prop51(s);
    c.family.caveats = {"labels truncated at " + detail::itos(K)};
    c.substitutions = c.family.caveats;
    for (const auto& b : s.classes->boxes()) c.windows.push_back(Window::interval(b.lo, b.hi));
    TypeWitness w;
    w.nu = Measure{s.base};
    w.lattice_exact = true;
    w.class_constant = true;
    w.p = std::log(lambda);
    w.t = [s](const Element& g) { return prop51_log_rho(s.base, s.lambda, prop51_section(s, g.coords.at(0))); };
    w.log_rho = w.t;
    c.witness = w;
    return c;
}

// ---------------------------------------------------------------------------
// N(g) = n for g in F_n \ F_{n-1}, on Z with interval schedules.

struct NFunction {
    std::vector<Interval> F;  // F[0] = {0}

    // Level of h; F.size() when h lies beyond the last set.
    int64_t operator()(int64_t h) const {
        for (std::size_t n = 0; n < F.size(); ++n)
            if (h >= F[n].lo && h <= F[n].hi) return static_cast<int64_t>(n);
        return static_cast<int64_t>(F.size());
    }
};

inline NFunction build_N_function(std::vector<Interval> F, const std::vector<Interval>& G) {
    if (F.empty() || F[0].lo != 0 || F[0].hi != 0) throw std::invalid_argument("F_0 must be {e}");
    if (G.size() != F.size()) throw std::invalid_argument("one enlarger per level (G_0 unused)");
    for (std::size_t n = 1; n < F.size(); ++n) {
        if (G[n].lo != -G[n].hi) throw std::invalid_argument("G_n must be symmetric");
        if (n > 1 && !detail::contains(G[n], G[n - 1])) throw std::invalid_argument("G_n must increase");
        if (!detail::contains(F[n], detail::minkowski(G[n], F[n - 1])))
            throw std::invalid_argument("schedule violates G_n F_{n-1} in F_n at n=" + std::to_string(n));
    }
    return NFunction{std::move(F)};
}

struct Lemma52Report {
    uint64_t checked = 0;
    uint64_t violations = 0;
};

// Both set identities and the support containment, for h and g in [-radius, radius] (g in G_n)
// and every k >= n with F_{k+1} in the schedule.
inline Lemma52Report verify_lemma52(const NFunction& N, const std::vector<Interval>& G, int64_t radius) {
    Lemma52Report r;
    std::size_t K = N.F.size() - 1;
    for (std::size_t n = 1; n <= K; ++n) {
        for (int64_t g = std::max(G[n].lo, -radius); g <= std::min(G[n].hi, radius); ++g) {
            for (int64_t h = -radius; h <= radius; ++h) {
                int64_t nh = N(h), ngh = N(h + g);
                for (std::size_t k = n; k < K; ++k) {
                    const Interval& Fk = N.F[k];
                    bool in_h = h >= Fk.lo && h <= Fk.hi, in_gh = h + g >= Fk.lo && h + g <= Fk.hi;
                    bool lhs1 = in_h && !in_gh;  // F_k \ g^-1 F_k
                    bool rhs1 = nh == static_cast<int64_t>(k) && ngh == static_cast<int64_t>(k + 1);
                    bool lhs2 = !in_h && in_gh;  // g^-1 F_k \ F_k
                    bool rhs2 = nh == static_cast<int64_t>(k + 1) && ngh == static_cast<int64_t>(k);
                    r.checked += 2;
                    if (lhs1 != rhs1) ++r.violations;
                    if (lhs2 != rhs2) ++r.violations;
                }
                if (nh != ngh && ngh <= static_cast<int64_t>(K) && nh <= static_cast<int64_t>(K)) {
                    const Interval& P = N.F[n - 1];
                    bool covered = (h >= P.lo && h <= P.hi) || (h + g >= P.lo && h + g <= P.hi);
                    for (std::size_t k = n; k <= K && !covered; ++k) {
                        const Interval& Fk = N.F[k];
                        bool a = h >= Fk.lo && h <= Fk.hi, b = h + g >= Fk.lo && h + g <= Fk.hi;
                        covered = a != b;
                    }
                    ++r.checked;
                    if (!covered) ++r.violations;
                }
            }
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Stable type III_0 candidate on Z.

struct Thm53Level {
    int n = 0;
    double lambda = 0.0;
    Interval G{0, 0};
    Interval F{0, 0};
    double eps = 0.0;
    double gamma = 0.0;
    double rho = 0.0;
};

struct Thm53Build {
    Construction c;
    std::vector<Thm53Level> levels;  // index n = 0..K
    std::vector<DiscreteMeasure> mu;  // mu_0..mu_K
    DiscreteMeasure nu;
};

inline double lambda_n(int n) {
    if (n < 0 || n > 4) throw std::out_of_range("lambda_n capped at n = 4");
    return std::ldexp(1.0, 1 << n);
}

// Closed form of int (dmu_n/dmu_m) dmu_n for n < m.
inline double thm53_moment_closed(const Thm53Level& a, const Thm53Level& b) {
    double ln = a.lambda, lm = b.lambda;
    return (1.0 / (a.rho * a.rho)) * b.rho *
           (1.0 - a.eps + ln * ln * (a.eps - b.eps) + ln * ln / lm * b.eps);
}

inline double moment(const DiscreteMeasure& p, const DiscreteMeasure& q) {
    return std::exp(2.0 * d_divergence(p, q));
}

// Smallest L >= lo with pred([-L, L]) under a monotone predicate; throws past the cap.
inline int64_t minimal_half_width(int64_t lo, const std::function<bool(int64_t)>& pred, int64_t cap = int64_t{1} << 58) {
    int64_t hi = std::max<int64_t>(lo, 1);
    while (!pred(hi)) {
        if (hi > cap / 2) throw std::runtime_error("induction stalls: search cap reached");
        hi *= 2;
    }
    int64_t a = lo;
    while (a < hi) {
        int64_t mid = a + (hi - a) / 2;
        if (pred(mid)) hi = mid; else a = mid + 1;
    }
    return hi;
}

inline std::vector<Constraint> verify_thm53(const Thm53Build& b) {
    std::vector<Constraint> cs;
    std::size_t K = b.levels.size() - 1;
    for (std::size_t n = 1; n <= K; ++n) {
        const auto& L = b.levels[n];
        const auto& P = b.levels[n - 1];
        std::string t = " n=" + detail::itos(static_cast<int64_t>(n));
        double Fs = static_cast<double>(L.F.size());
        Interval GF = detail::minkowski(L.G, P.F);
        cs.push_back(make_constraint("G_n F_{n-1} u F_{n-1} in F_n" + t,
                                     detail::contains(L.F, GF) && detail::contains(L.F, P.F) ? 1 : 0, "==", 1));
        cs.push_back(make_constraint("H_n in G_n" + t, detail::contains(L.G, {-static_cast<int64_t>(n), static_cast<int64_t>(n)}) ? 1 : 0, "==", 1));
        cs.push_back(make_constraint("|F_n| >= 2^n lambda_{n+1}" + t, Fs, ">=", std::ldexp(lambda_n(static_cast<int>(n) + 1), static_cast<int>(n))));
        cs.push_back(make_constraint("|F_n| >= lambda_n |F_{n-1}|" + t, Fs, ">=", L.lambda * static_cast<double>(P.F.size())));
        cs.push_back(make_constraint("|G_nF_n\\F_n|/|F_n| <= 2^-n/lambda_{n+1}" + t,
                                     static_cast<double>(detail::enlarged_boundary(L.G, L.F)) / Fs, "<=",
                                     std::ldexp(1.0, -static_cast<int>(n)) / lambda_n(static_cast<int>(n) + 1)));
        cs.push_back(make_constraint("|F_n| >= 2|F_{n-1}|" + t, Fs, ">=", 2.0 * static_cast<double>(P.F.size())));
        cs.push_back(make_constraint("eps_n = 1/|F_n|" + t, L.eps, "~=", 1.0 / Fs, 1e-15));
        cs.push_back(make_constraint("gamma_n = lambda_{n+1} eps_n" + t, L.gamma, "~=", lambda_n(static_cast<int>(n) + 1) * L.eps, 1e-15));
        cs.push_back(make_constraint("gamma_n <= 1" + t, L.gamma, "<=", 1.0));
        cs.push_back(make_constraint("rho_n >= 1" + t, L.rho, ">=", 1.0));
        cs.push_back(make_constraint("rho_n <= 1 + gamma_n" + t, L.rho, "<=", 1.0 + L.gamma));
        cs.push_back(make_constraint("rho_n <= 2" + t, L.rho, "<=", 2.0));
        if (n >= 2) {
            cs.push_back(make_constraint("eps decreasing" + t, L.eps, "<", P.eps));
            cs.push_back(make_constraint("gamma decreasing" + t, L.gamma, "<", P.gamma));
        }
    }
    for (std::size_t n = 0; n <= K; ++n)
        for (std::size_t m = n + 1; m <= K; ++m) {
            std::string t = " n=" + detail::itos(static_cast<int64_t>(n)) + " m=" + detail::itos(static_cast<int64_t>(m));
            double exact = moment(b.mu[n], b.mu[m]);
            double reverse = moment(b.mu[m], b.mu[n]);
            double bound = std::exp(3.0 * b.levels[n].gamma);
            cs.push_back(make_constraint("moment closed form" + t, exact, "~=", thm53_moment_closed(b.levels[n], b.levels[m]), 1e-12));
            cs.push_back(make_constraint("int dmu_n/dmu_m dmu_n <= exp(3 gamma_n)" + t, exact, "<=", bound));
            cs.push_back(make_constraint("int dmu_m/dmu_n dmu_m <= exp(3 gamma_n)" + t, reverse, "<=", bound));
        }
    return cs;
}

inline Thm53Build build_thm53(int K = 3, bool desk_scale = true) {
    if (K < 1 || K > 3) throw std::invalid_argument("levels must lie in [1, 3] (lambda_{K+1} capped at n = 4)");
    Thm53Build b;
    Thm53Level l0;
    l0.n = 0;
    l0.lambda = lambda_n(0);
    l0.eps = 1.0;
    l0.gamma = lambda_n(1);
    l0.rho = 1.0 + (l0.lambda - 1.0);
    b.levels.push_back(l0);
    std::vector<std::string> subs;
    for (int n = 1; n <= K; ++n) {
        const Thm53Level& P = b.levels.back();
        Thm53Level L;
        L.n = n;
        L.lambda = lambda_n(n);
        double need = std::exp(static_cast<double>(n) * static_cast<double>(P.F.size()));
        int64_t gh = n;  // at least H_n = [-n, n]
        if (need < 1e15) {
            gh = std::max<int64_t>(gh, static_cast<int64_t>(std::ceil((need - 1.0) / 2.0)));
        } else if (desk_scale) {
            gh = std::max<int64_t>(gh, static_cast<int64_t>(n) * static_cast<int64_t>(P.F.size()));
            subs.push_back("|G_" + detail::itos(n) + "| >= exp(n|F_{n-1}|) replaced by G_n = [-n|F_{n-1}|, n|F_{n-1}|]");
        } else {
            throw std::runtime_error("induction stalls: |G_n| >= exp(n|F_{n-1}|) is out of reach at n=" + std::to_string(n));
        }
        L.G = {-gh, gh};
        double lam_next = lambda_n(n + 1);
        Interval GF = detail::minkowski(L.G, P.F);
        int64_t lo = std::max(iabs(GF.lo), iabs(P.F.lo));
        auto ok = [&](int64_t half) {
            Interval F{-half, half};
            double Fs = static_cast<double>(F.size());
            return detail::contains(F, GF) && Fs >= std::ldexp(lam_next, n) && Fs >= L.lambda * static_cast<double>(P.F.size()) &&
                   static_cast<double>(detail::enlarged_boundary(L.G, F)) / Fs <= std::ldexp(1.0, -n) / lam_next &&
                   Fs >= 2.0 * static_cast<double>(P.F.size());
        };
        int64_t half = minimal_half_width(lo, ok);
        L.F = {-half, half};
        L.eps = 1.0 / static_cast<double>(L.F.size());
        L.gamma = lam_next * L.eps;
        L.rho = 1.0 + L.eps * (L.lambda - 1.0);
        b.levels.push_back(L);
        b.c.family.meta["minimal_L[" + detail::itos(n) + "]"] = static_cast<double>(half);
    }
    subs.push_back("lambda_n = 2^(2^n) capped at n = 4, so the induction stops at n = " + detail::itos(K));
    subs.push_back("coordinates beyond F_" + detail::itos(K) + " carry nu");

    // X0: label j in 1..K is U_j \ U_{j-1} with mass eps_{j-1} - eps_j; label K+1 is X0 \ U_K.
    std::vector<int64_t> lab;
    std::vector<double> w;
    for (int j = 1; j <= K; ++j) {
        lab.push_back(j);
        w.push_back(b.levels[j - 1].eps - b.levels[j].eps);
    }
    lab.push_back(K + 1);
    w.push_back(b.levels[K].eps);
    b.nu = DiscreteMeasure::from_weights(lab, w);
    for (int n = 0; n <= K; ++n) {
        const auto& L = b.levels[n];
        std::vector<double> lw = b.nu.logw;
        for (std::size_t i = 0; i < lw.size(); ++i)
            lw[i] += -std::log(L.rho) + (b.nu.labels[i] > n ? std::log(L.lambda) : 0.0);
        b.mu.push_back(DiscreteMeasure::from_logw(lab, lw));
    }

    MeasureFamily& f = b.c.family;
    f.name = "thm53-desk";
    f.group = Group(GroupSpec{GroupKind::Z, 1, 2});
    std::vector<Interval> boxes;
    for (const auto& L : b.levels) boxes.push_back(L.F);
    f.classes = ZClasses(boxes);
    for (const auto& m : b.mu) f.class_measures.push_back(m);
    f.class_measures.push_back(b.nu);
    f.reference = Measure{b.nu};
    f.bounded_rn = true;
    f.lattice_period = std::log(2.0);
    auto levels = b.levels;
    auto classes = *f.classes;
    f.lattice = [levels, classes](const Element& g, int64_t x) {
        std::size_t n = classes.cls(g.coords.at(0));
        if (n >= levels.size()) return LatticeForm{0.0, 0};
        const auto& L = levels[n];
        int64_t k = x > static_cast<int64_t>(n) ? (int64_t{1} << n) : 0;
        return LatticeForm{-std::log(L.rho), k};
    };
    MeasureFamily copy = f;
    f.tail = [copy](const Element& g, const Window& w) {
        auto h2 = [](const Measure& p, const Measure& q) { return pair_stats(p, q).h2; };
        return std::max(0.0, sum_over_window(copy, g, whole_line(), h2) - sum_over_window(copy, g, w, h2));
    };
    f.caveats = subs;
    b.c.substitutions = subs;
    b.c.windows = detail::box_windows(boxes);
    b.c.expected_type = "III_0";
    // rho_0 = lambda_0 and U_0 = {} make mu_0 = nu.
    b.c.constraints = verify_thm53(b);
    b.c.constraints.push_back(make_constraint("mu_0 = nu", d_divergence(b.mu[0], b.nu), "<=", 1e-15));
    if (1.0 * static_cast<double>(b.levels[1].G.size()) >= std::exp(1.0))
        b.c.constraints.push_back(make_constraint("|G_1| >= exp(|F_0|)", static_cast<double>(b.levels[1].G.size()), ">=", std::exp(1.0)));
    detail::require_valid(b.c);
    return b;
}

// ---------------------------------------------------------------------------
// Type II_infinity candidate on Z.

struct Thm54Level {
    int n = 0;
    double delta = 0.0;          // from the definition
    double delta_running = 0.0;  // delta_{n-1} rho_{n-1}^{|F_{n-1} \ F_{n-2}|}
    int64_t k = 0;
    std::vector<int64_t> S;
    Interval G{0, 0};
    Interval F{0, 0};
    double rho = 0.0;
    double gap = 0.0;  // 1 - rho_n, kept separately since rho_n rounds to 1 in double for large n
    double eta = 0.0;  // weight of mu_n off U_n
};

struct Thm54Build {
    Construction c;
    std::vector<Thm54Level> levels;  // n = 0..K
    DiscreteMeasure nu;
    std::vector<DiscreteMeasure> mu;  // mu_0..mu_K
};

inline std::vector<Constraint> verify_thm54(const Thm54Build& b) {
    std::vector<Constraint> cs;
    std::size_t K = b.levels.size() - 1;
    for (std::size_t n = 1; n <= K; ++n) {
        const auto& L = b.levels[n];
        const auto& P = b.levels[n - 1];
        int ni = static_cast<int>(n);
        std::string t = " n=" + detail::itos(ni);
        double ring = static_cast<double>(L.F.size() - P.F.size());
        uint64_t bnd = detail::enlarged_boundary(L.G, L.F);
        cs.push_back(make_constraint("(1-rho_n)|F_n\\F_{n-1}| = 1" + t, L.gap * ring, "~=", 1.0, 1e-12));
        cs.push_back(make_constraint("(1-delta_n)^k_n < 2^-n" + t, std::pow(1.0 - L.delta, static_cast<double>(L.k)), "<", std::ldexp(1.0, -ni)));
        cs.push_back(make_constraint("delta_n two ways" + t, L.delta, "~=", L.delta_running, 1e-12));
        cs.push_back(make_constraint("rho_n^|G_nF_n\\F_n| >= 1 - 2^-n-1" + t, std::exp(static_cast<double>(bnd) * std::log1p(-L.gap)), ">=", 1.0 - std::ldexp(1.0, -ni - 1)));
        cs.push_back(make_constraint("G_n F_{n-1} in F_n" + t, detail::contains(L.F, detail::minkowski(L.G, P.F)) ? 1 : 0, "==", 1));
        cs.push_back(make_constraint("|F_n| >= 2|F_{n-1}|" + t, static_cast<double>(L.F.size()), ">=", 2.0 * static_cast<double>(P.F.size())));
        cs.push_back(make_constraint("(1-rho_{n-1})|F_n\\F_{n-1}| > 1" + t, P.gap * ring, ">", 1.0));
        cs.push_back(make_constraint("|G_nF_n\\F_n|/|F_n| <= 2^-n-3" + t, static_cast<double>(bnd) / static_cast<double>(L.F.size()), "<=", std::ldexp(1.0, -ni - 3)));
        cs.push_back(make_constraint("rho_{n-1} < rho_n < 1" + t, (P.gap > L.gap && L.gap > 0.0) ? 1 : 0, "==", 1));
        cs.push_back(make_constraint("|S_n| = k_n" + t, static_cast<double>(L.S.size()), "==", static_cast<double>(L.k)));
        bool avoid = true, disjoint = true, inside = true;
        int64_t diam = 2 * P.F.hi;  // F_{n-1} - F_{n-1} = [-2L, 2L]
        std::vector<int64_t> centers{0};
        for (auto s : L.S) {
            if ((s >= P.G.lo && s <= P.G.hi) || iabs(s) <= diam) avoid = false;
            if (!(s >= L.G.lo && s <= L.G.hi) || (s >= P.G.lo && s <= P.G.hi)) inside = false;
            centers.push_back(s);
        }
        std::sort(centers.begin(), centers.end());
        for (std::size_t i = 1; i < centers.size(); ++i)
            if (centers[i] + P.F.lo <= centers[i - 1] + P.F.hi) disjoint = false;
        cs.push_back(make_constraint("S_n avoids G_{n-1} u F_{n-1}F_{n-1}^-1" + t, avoid ? 1 : 0, "==", 1));
        cs.push_back(make_constraint("translates gF_{n-1}, g in {e} u S_n, disjoint" + t, disjoint ? 1 : 0, "==", 1));
        cs.push_back(make_constraint("S_n in G_n \\ G_{n-1}" + t, inside ? 1 : 0, "==", 1));
        cs.push_back(make_constraint("G_{n-1} u H_n in G_n" + t,
                                     detail::contains(L.G, P.G) && detail::contains(L.G, {-ni, ni}) ? 1 : 0, "==", 1));
    }
    return cs;
}

inline Thm54Build build_thm54(int K = 5) {
    if (K < 1 || K > 5) throw std::invalid_argument("levels must lie in [1, 5] (int64 range)");
    Thm54Build b;
    Thm54Level l0;
    l0.rho = 0.5;
    l0.gap = 0.5;
    l0.eta = 1.0 / 8.0;
    b.levels.push_back(l0);
    double log_delta_def = 0.0;
    for (int n = 1; n <= K; ++n) {
        const Thm54Level& P = b.levels.back();
        Thm54Level L;
        L.n = n;
        // delta_n = rho_0 prod_{k<n} rho_k^{|F_k \ F_{k-1}|}
        log_delta_def = std::log(b.levels[0].rho);
        for (int k = 1; k < n; ++k)
            log_delta_def += static_cast<double>(b.levels[k].F.size() - b.levels[k - 1].F.size()) * std::log1p(-b.levels[k].gap);
        L.delta = std::exp(log_delta_def);
        if (n == 1) {
            L.delta_running = b.levels[0].rho;
        } else {
            const auto& Q = b.levels[n - 2];
            L.delta_running = P.delta_running * std::exp(static_cast<double>(P.F.size() - Q.F.size()) * std::log1p(-P.gap));
        }
        L.k = 1;
        while (!(std::pow(1.0 - L.delta, static_cast<double>(L.k)) < std::ldexp(1.0, -n))) ++L.k;
        // Greedy in the order 1, -1, 2, -2, ...; each side packs translates at spacing |F_{n-1}|.
        int64_t floor_abs = std::max(P.G.hi, 2 * P.F.hi);
        int64_t step = static_cast<int64_t>(P.F.size());
        int64_t next_pos = floor_abs + 1, next_neg = floor_abs + 1;
        while (static_cast<int64_t>(L.S.size()) < L.k) {
            if (next_pos <= next_neg) {
                L.S.push_back(next_pos);
                next_pos += step;
            } else {
                L.S.push_back(-next_neg);
                next_neg += step;
            }
        }
        int64_t gh = std::max<int64_t>(P.G.hi, n);
        for (auto s : L.S) gh = std::max(gh, iabs(s));
        L.G = {-gh, gh};
        Interval GF = detail::minkowski(L.G, P.F);
        auto ok = [&](int64_t half) {
            Interval F{-half, half};
            double Fs = static_cast<double>(F.size());
            double ring = static_cast<double>(F.size() - P.F.size());
            return detail::contains(F, GF) && Fs >= 2.0 * static_cast<double>(P.F.size()) && P.gap * ring > 1.0 &&
                   static_cast<double>(detail::enlarged_boundary(L.G, F)) / Fs <= std::ldexp(1.0, -n - 3);
        };
        int64_t half = minimal_half_width(std::max(iabs(GF.lo), P.F.hi), ok);
        L.F = {-half, half};
        L.gap = 1.0 / static_cast<double>(L.F.size() - P.F.size());
        L.rho = 1.0 - L.gap;
        L.eta = std::ldexp(1.0, -3 * (n + 1)) / static_cast<double>(L.F.size());
        b.levels.push_back(L);
    }
    // X0: label 0 = U_0, label j = U_j \ U_{j-1}, label K+1 = X0 \ U_K.
    std::vector<int64_t> lab;
    std::vector<double> w;
    lab.push_back(0);
    w.push_back(b.levels[0].rho);
    for (int j = 1; j <= K; ++j) {
        lab.push_back(j);
        w.push_back(b.levels[j - 1].gap - b.levels[j].gap);
    }
    lab.push_back(K + 1);
    w.push_back(b.levels[K].gap);
    b.nu = DiscreteMeasure::from_weights(lab, w);
    for (int n = 0; n <= K; ++n) {
        const auto& L = b.levels[n];
        double in_mass = 1.0 - L.gap, out_mass = L.gap;
        std::vector<double> mw;
        for (std::size_t i = 0; i < lab.size(); ++i) {
            double nu_i = b.nu.prob(i);
            mw.push_back(lab[i] <= n ? (1.0 - L.eta) * nu_i / in_mass : L.eta * nu_i / out_mass);
        }
        b.mu.push_back(DiscreteMeasure::from_weights(lab, mw));
    }
    MeasureFamily& f = b.c.family;
    f.name = "thm54-desk";
    f.group = Group(GroupSpec{GroupKind::Z, 1, 2});
    std::vector<Interval> boxes;
    for (const auto& L : b.levels) boxes.push_back(L.F);
    f.classes = ZClasses(boxes);
    for (const auto& m : b.mu) f.class_measures.push_back(m);
    f.class_measures.push_back(b.nu);
    f.reference = Measure{b.nu};
    MeasureFamily copy = f;
    f.tail = [copy](const Element& g, const Window& win) {
        auto h2 = [](const Measure& p, const Measure& q) { return pair_stats(p, q).h2; };
        return std::max(0.0, sum_over_window(copy, g, whole_line(), h2) - sum_over_window(copy, g, win, h2));
    };
    b.c.substitutions = {"H_n = [-n, n]", "induction stops at n = " + detail::itos(K),
                         "mu_n puts mass eta_n = 8^-(n+1)/|F_n| off U_n",
                         "coordinates beyond F_" + detail::itos(K) + " carry nu"};
    f.caveats = b.c.substitutions;
    b.c.windows = detail::box_windows(boxes);
    b.c.expected_type = "II_inf";
    TypeWitness wit;
    wit.nu = Measure{b.nu};
    wit.class_constant = true;
    auto classes = *f.classes;
    wit.U = [classes, K](const Element& g) {
        std::size_t n = classes.cls(g.coords.at(0));
        std::vector<int64_t> U;
        int64_t top = n <= static_cast<std::size_t>(K) ? static_cast<int64_t>(n) : K + 1;
        for (int64_t j = 0; j <= top; ++j) U.push_back(j);
        return U;
    };
    b.c.witness = wit;
    b.c.constraints = verify_thm54(b);
    detail::require_valid(b.c);
    return b;
}

// ---------------------------------------------------------------------------
// Blocks b_1 < b_2 < ... and F(n) = k + j/b_k for |n| = a_{k-1} + j, 0 <= j < b_k.

struct ThmESchedule {
    std::vector<int64_t> b;  // explicit prefix; doubled beyond

    int64_t block(int s) const {
        if (s < 1) throw std::out_of_range("blocks start at 1");
        if (static_cast<std::size_t>(s) <= b.size()) return b[static_cast<std::size_t>(s - 1)];
        int extra = s - static_cast<int>(b.size());
        if (extra > 62 - 13) throw std::overflow_error("block index too large");
        return b.back() << extra;
    }

    // a_k = b_1 + ... + b_k, a_0 = 0.
    __int128 a(int k) const {
        __int128 s = 0;
        for (int j = 1; j <= k; ++j) s += block(j);
        return s;
    }

    double F(int64_t n) const {
        __int128 m = n < 0 ? -static_cast<__int128>(n) : static_cast<__int128>(n);
        __int128 start = 0;
        for (int k = 1;; ++k) {
            int64_t bk = block(k);
            if (m < start + bk) return static_cast<double>(k) + static_cast<double>(m - start) / static_cast<double>(bk);
            start += bk;
        }
    }

    // b_n >= exp(n^3 a_{n-1}) on the explicit prefix.
    bool paper_schedule() const {
        for (std::size_t n = 1; n <= b.size(); ++n) {
            double rhs = std::pow(static_cast<double>(n), 3) * static_cast<double>(a(static_cast<int>(n) - 1));
            if (std::log(static_cast<double>(b[n - 1])) < rhs) return false;
        }
        return true;
    }
};

inline ThmESchedule make_thmE_schedule(std::vector<int64_t> b = {1, 8, 64, 512, 4096}) {
    if (b.empty()) throw std::invalid_argument("empty block sequence");
    for (std::size_t s = 0; s < b.size(); ++s) {
        if (b[s] < 1) throw std::invalid_argument("blocks must be positive");
        if (s > 0 && b[s] <= b[s - 1]) throw std::invalid_argument("block sequence must increase");
        if (s > 0 && b[s] < 2 * b[s - 1]) throw std::invalid_argument("block sequence needs b_s >= 2 b_{s-1}");
    }
    return ThmESchedule{std::move(b)};
}

inline double thmE_c(const ThmESchedule& s, int64_t N, int64_t n) { return s.F(n - N) - s.F(n); }

struct CocycleNorm {
    double partial = 0.0;  // sum over the window of c_N(n)^2
    double tail = 0.0;     // certified bound on the rest
    double upper = 0.0;    // sqrt(partial + tail)
    int S = 0;
};

// ||c_N||_2^2 summed exactly over |n| <= a_S (+N on the right); the rest is bounded by
// sum_{s>S} 2 b_s (N / b_{s-1})^2, valid for N <= b_S.
inline CocycleNorm thmE_cocycle_norm(const ThmESchedule& s, int64_t N, int S = 12) {
    if (N < 1 || N > s.block(S)) throw std::invalid_argument("need 1 <= N <= b_S");
    CocycleNorm r;
    r.S = S;
    auto lim = static_cast<int64_t>(s.a(S));
    std::vector<double> Fv;
    Fv.reserve(static_cast<std::size_t>(2 * lim + N + 1 + N));
    for (int64_t n = -lim - N; n <= lim + N; ++n) Fv.push_back(s.F(n));
    for (int64_t n = -lim; n <= lim + N; ++n) {
        double c = Fv[static_cast<std::size_t>(n - N + lim + N)] - Fv[static_cast<std::size_t>(n + lim + N)];
        r.partial += c * c;
    }
    double t = 0.0;
    for (int q = S + 1; q <= S + 40; ++q) {
        double bq = static_cast<double>(s.block(q)), bp = static_cast<double>(s.block(q - 1));
        t += 2.0 * bq * (static_cast<double>(N) / bp) * (static_cast<double>(N) / bp);
    }
    // geometric remainder beyond S+40 (ratio 1/2 once blocks double)
    double bq = static_cast<double>(s.block(S + 40));
    t += 2.0 * 2.0 * bq * 2.0 * (static_cast<double>(N) / bq) * (static_cast<double>(N) / bq);
    r.tail = t;
    r.upper = std::sqrt(r.partial + r.tail);
    return r;
}

inline double thmE_chain_rhs(const ThmESchedule& s, int k, int64_t N) {
    return 4.0 * k * std::sqrt(static_cast<double>(s.a(k - 1))) + 2.0 * static_cast<double>(N) / std::sqrt(static_cast<double>(s.block(k)));
}

inline MeasureFamily build_thmE(const ThmESchedule& s) {
    MeasureFamily f;
    f.name = "thmE";
    f.group = Group(GroupSpec{GroupKind::Z, 1, 2});
    f.rule = [s](const Element& g) -> Measure {
        double Fg = s.F(g.coords.at(0));
        double p0 = 0.5 * std::exp(-Fg);
        return DiscreteMeasure::from_logw({0, 1}, {std::log(p0), std::log1p(-p0)});
    };
    f.meta["paper_schedule"] = s.paper_schedule() ? 1.0 : 0.0;
    f.caveats = {"desk block schedule; the growth condition b_n >= exp(n^3 a_{n-1}) does not hold"};
    if (s.paper_schedule()) f.caveats.clear();
    return f;
}

struct FlipSchedule {
    double a = 0.1, b = 0.2, c = 0.12, d = 0.18;
    int64_t n0 = 0;
    std::vector<int64_t> k;  // k[m - n0]
    ThmESchedule sched;

    int64_t k_at(int64_t m) const { return k.at(static_cast<std::size_t>(m - n0)); }
    int64_t horizon() const { return n0 + static_cast<int64_t>(k.size()) - 1; }

    double log_mu(int64_t n, int x) const {
        double p0 = 0.5 * std::exp(-sched.F(n));
        return x == 0 ? std::log(p0) : std::log1p(-p0);
    }

    // log r_m = log mu_{2m}(0) mu_{2m+k}(1) / (mu_{2m}(1) mu_{2m+k}(0))
    double log_r(int64_t m) const {
        int64_t u = 2 * m, v = 2 * m + k_at(m);
        return log_mu(u, 0) + log_mu(v, 1) - log_mu(u, 1) - log_mu(v, 0);
    }
};

inline FlipSchedule build_flip_schedule(const ThmESchedule& s, double a, double b, double c, double d, int64_t m_max) {
    if (!(0 < a && a < c && c < d && d < b)) throw std::invalid_argument("need 0 < a < c < d < b");
    FlipSchedule fs;
    fs.a = a;
    fs.b = b;
    fs.c = c;
    fs.d = d;
    fs.sched = s;
    double margin = std::min((b - d) / 2.0, (c - a) / 2.0);
    // Increments F(m+1) - F(m) are nonincreasing on m >= 0 and mu_m(1) increases, so checking at
    // m = 2 n0 covers every m >= 2 n0.
    int64_t n0 = 1;
    while (true) {
        int64_t m = 2 * n0;
        double inc = s.F(m + 1) - s.F(m);
        double p0 = 0.5 * std::exp(-s.F(m));
        if (inc < (d - c) / 2.0 && inc < c && std::fabs(std::log1p(-p0)) < margin) break;
        if (++n0 > (int64_t{1} << 40)) throw std::runtime_error("no admissible n0");
    }
    fs.n0 = n0;
    auto gap = [&](int64_t n, int64_t k) { return s.F(2 * n + k) - s.F(2 * n); };
    int64_t k = 1;
    while (!(gap(n0, k) > c && gap(n0, k) < d)) {
        if (gap(n0, k) >= d) throw std::runtime_error("odd k overshoots (c, d)");
        k += 2;
    }
    fs.k.push_back(k);
    for (int64_t n = n0 + 1; n <= m_max; ++n) {
        if (!(gap(n, k) > c)) {
            while (!(gap(n, k) > c && gap(n, k) < d)) {
                k += 2;
                if (gap(n, k) >= d) throw std::runtime_error("odd k overshoots (c, d)");
            }
        }
        fs.k.push_back(k);
    }
    return fs;
}

// ---------------------------------------------------------------------------
// Translated density families d mu_g(t) = phi(t + F(g)) dt on Z.

struct DensityFamilySpec {
    std::string name = "thmD";
    Density phi = Density::Laplace;
    std::function<double(int64_t)> shift;
    double bound = 0.0;           // sup |F|
    double lipschitz = 1.0;       // M
    bool lipschitz_of_log = true;  // case 1: log phi is M-Lipschitz; case 2: (log phi)' is
    double moment_alpha = 1.0;
    // Bound on sum_{h outside w} H^2(mu_{g+h}, mu_h); empty means uncertified.
    std::function<double(int64_t, const Window&)> h2_tail;
};

// Largest slope of log phi (or of its derivative) between neighbouring grid points.
inline double measured_lipschitz(Density d, bool of_log, double lo = -20.0, double hi = 20.0, int points = 40001) {
    double h = (hi - lo) / (points - 1);
    auto f = [&](double t) {
        if (of_log) return log_phi(d, t);
        return (log_phi(d, t + 1e-5) - log_phi(d, t - 1e-5)) / 2e-5;
    };
    double best = 0.0, prev = f(lo);
    for (int i = 1; i < points; ++i) {
        double cur = f(lo + i * h);
        best = std::max(best, std::fabs(cur - prev) / h);
        prev = cur;
    }
    return best;
}

inline Construction build_thmD(const DensityFamilySpec& spec) {
    if (!spec.shift) throw std::invalid_argument("shift rule required");
    if (!std::isfinite(spec.bound)) throw std::invalid_argument("F must be bounded");
    Construction c;
    MeasureFamily& f = c.family;
    f.name = spec.name;
    f.group = Group(GroupSpec{GroupKind::Z, 1, 2});
    auto sh = spec.shift;
    double bound = spec.bound;
    f.rule = [sh, bound, phi = spec.phi](const Element& g) -> Measure {
        double s = sh(g.coords.at(0));
        if (std::fabs(s) > bound) throw std::invalid_argument("shift exceeds the declared bound");
        return DensityMeasure{phi, s};
    };
    f.reference = DensityMeasure{spec.phi, sh(0)};
    double kappa = spec.lipschitz_of_log ? 0.75 * spec.lipschitz * spec.lipschitz : spec.lipschitz;
    f.meta["kappa"] = kappa;
    f.meta["bound"] = spec.bound;
    if (spec.h2_tail) {
        auto t = spec.h2_tail;
        f.tail = [t](const Element& g, const Window& w) { return t(g.coords.at(0), w); };
    } else {
        f.caveats.push_back("no certified tail for the Kakutani sums");
    }
    double measured = measured_lipschitz(spec.phi, spec.lipschitz_of_log);
    c.constraints.push_back(make_constraint("declared Lipschitz constant within 1%", measured, "~=", spec.lipschitz, 0.01));
    c.expected_type = "III_1";
    detail::require_valid(c);
    return c;
}

// Laplace phi with F(n) = 6 tanh(n/8): bounded, and F is not in l^2 so c is no l^2 coboundary.
inline DensityFamilySpec laplace_thmD_spec() {
    DensityFamilySpec s;
    s.name = "thmD-laplace";
    s.phi = Density::Laplace;
    s.shift = [](int64_t n) { return 6.0 * std::tanh(static_cast<double>(n) / 8.0); };
    s.bound = 6.0;
    s.lipschitz = 1.0;
    s.lipschitz_of_log = true;
    // H^2 <= delta^2/8 for Laplace shifts, |F'(x)| <= 3 exp(-|x|/4), so beyond [-R, R] with
    // R >= |g| the omitted sum is at most (9 g^2/4) exp(-(R+1-|g|)/2) / (1 - exp(-1/2)).
    s.h2_tail = [](int64_t g, const Window& w) {
        if (!w.is_interval) return kInf;
        int64_t R = std::min(-w.span.lo, w.span.hi), a = iabs(g);
        if (R < a) return kInf;
        double gg = static_cast<double>(a);
        return (9.0 * gg * gg / 4.0) * std::exp(-(static_cast<double>(R + 1 - a)) / 2.0) / (1.0 - std::exp(-0.5));
    };
    return s;
}

// ---------------------------------------------------------------------------
// The almost invariant set W_a on Z * Z/aZ.

inline std::function<bool(const Element&)> w_a_set(int a) {
    if (a < 2) throw std::invalid_argument("a >= 2 required");
    Group G(GroupSpec{GroupKind::FreeProdZ_Za, 1, a});
    return [G](const Element& g) { return G.in_W(g); };
}

// |gW sym W| counted over a precomputed region.
inline uint64_t w_symdiff(const Group& G, const Element& g, const std::vector<Element>& region) {
    uint64_t c = 0;
    Element gi = G.inv(g);
    for (const auto& h : region)
        if (G.in_W(h) != G.in_W(G.mul(gi, h))) ++c;
    return c;
}

inline uint64_t w_symdiff(const Group& G, const Element& g, int64_t radius) { return w_symdiff(G, g, G.ball(radius)); }

struct Remark62Constants {
    double beta = 0.0;
    double alpha = 0.0;
    double beta_quadrature = 0.0;   // -log int sqrt(phi(t+k) phi(t)) dt
    double alpha_quadrature = 0.0;  // (1/2) log theta(k)
};

inline Remark62Constants remark62_constants(double kappa) {
    Remark62Constants r;
    double k2 = kappa * kappa;
    r.beta = std::log1p(k2 / 4.0);
    r.alpha = std::log1p(2.0 * k2 + 5.0 * k2 * k2 / 8.0);
    if (kappa == 0.0) return r;
    DensityMeasure p{Density::Cauchy2, kappa}, q{Density::Cauchy2, 0.0};
    r.beta_quadrature = -std::log1p(-hellinger2(p, q));
    r.alpha_quadrature = 0.5 * std::log(theta_quadrature(Density::Cauchy2, kappa));
    return r;
}

inline MeasureFamily build_remark62(double kappa, int a = 2) {
    MeasureFamily f;
    f.name = "remark62";
    f.group = Group(GroupSpec{GroupKind::FreeProdZ_Za, 1, a});
    Group G = f.group;
    f.rule = [G, kappa](const Element& g) -> Measure {
        return DensityMeasure{Density::Cauchy2, G.in_W(g) ? kappa : 0.0};
    };
    f.reference = DensityMeasure{Density::Cauchy2, kappa};
    f.meta["kappa"] = kappa;
    return f;
}

// Squared cocycle norms kappa^2 |gW sym W| = kappa^2 |g| over the ball.
inline std::vector<double> remark62_norms(double kappa, int a, int64_t radius) {
    Group G(GroupSpec{GroupKind::FreeProdZ_Za, 1, a});
    std::vector<double> out;
    for (const auto& g : G.ball(radius)) out.push_back(kappa * kappa * static_cast<double>(G.word_length(g)));
    return out;
}

}  // namespace nsb
