#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "nsb/family.hpp"
#include "nsb/measures.hpp"

namespace nsb {

inline double cutoff_T(double kappa, double t) {
    if (!(kappa > 0)) throw std::invalid_argument("cutoff needs kappa > 0");
    return std::clamp(t, -kappa, kappa);
}

struct PairStats {
    double h2 = 0.0;       // H^2(p, q)
    double neglog = 0.0;   // -log(1 - H^2)
    double d = 0.0;        // D(q, p)
};

namespace detail {

inline bool same_measure(const Measure& a, const Measure& b) {
    if (a.index() != b.index()) return false;
    if (is_discrete(a)) {
        const auto& x = std::get<DiscreteMeasure>(a);
        const auto& y = std::get<DiscreteMeasure>(b);
        return x.labels == y.labels && x.logw == y.logw;
    }
    const auto& x = std::get<DensityMeasure>(a);
    const auto& y = std::get<DensityMeasure>(b);
    return x.phi == y.phi && x.shift == y.shift;
}

// Per-thread cache of shift-pair statistics. Translated densities only depend on the shift
// difference.
inline PairStats density_pair(const DensityMeasure& p, const DensityMeasure& q) {
    thread_local std::map<std::tuple<int, double>, PairStats> cache;
    double delta = p.shift - q.shift;
    auto key = std::make_tuple(static_cast<int>(p.phi), delta);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    DensityMeasure a{p.phi, delta}, b{p.phi, 0.0};
    PairStats s;
    s.h2 = hellinger2(a, b);
    s.neglog = -std::log1p(-s.h2);
    s.d = d_divergence(b, a);
    if (cache.size() > 100000) cache.clear();
    cache.emplace(key, s);
    return s;
}

}  // namespace detail

// Statistics of the pair (mu_gh, mu_h) = (p, q): H^2(p,q), -log(1-H^2) and D(q, p).
inline PairStats pair_stats(const Measure& p, const Measure& q) {
    if (detail::same_measure(p, q)) return {};
    if (!is_discrete(p) && !is_discrete(q)) {
        const auto& a = std::get<DensityMeasure>(p);
        const auto& b = std::get<DensityMeasure>(q);
        if (a.phi == b.phi) return detail::density_pair(a, b);
    }
    PairStats s;
    s.h2 = hellinger2(p, q);
    s.neglog = -std::log1p(-s.h2);
    s.d = d_divergence(q, p);
    return s;
}

struct KakutaniSum {
    double partial = 0.0;
    double tail = kInf;  // +inf means uncertified
};

inline double certified_tail(const MeasureFamily& fam, const Element& g, const Window& w) {
    if (g == fam.identity()) return 0.0;
    return fam.tail ? fam.tail(g, w) : kInf;
}

inline KakutaniSum kakutani_sum(const MeasureFamily& fam, const Element& g, const Window& w) {
    KakutaniSum k;
    k.partial = sum_over_window(fam, g, w, [](const Measure& p, const Measure& q) {
        return pair_stats(p, q).h2;
    });
    k.tail = certified_tail(fam, g, w);
    return k;
}

struct CocycleRecord {
    uint64_t g_index = 0;
    std::string g_label;
    double hellinger_sum = 0.0;
    double neglog_sum = 0.0;
    double C = 0.0;
    int64_t window_radius = 0;
    double tail_bound = kInf;
};

inline CocycleRecord c_of_g(const MeasureFamily& fam, const Element& g, const Window& w) {
    CocycleRecord r;
    r.g_label = fam.group.label(g);
    r.g_index = fam.group.index(g);
    r.window_radius = w.radius;
    r.tail_bound = certified_tail(fam, g, w);
    if (g == fam.identity()) return r;
    double hs = 0.0, nl = 0.0, cs = 0.0;
    auto accumulate = [&](const PairStats& s, double weight) {
        if (!(s.h2 <= s.neglog + 1e-15 && s.neglog <= s.d * (1 + 1e-9) + 1e-12))
            throw std::logic_error("divergence chain violated in c_of_g");
        hs += weight * s.h2;
        nl += weight * s.neglog;
        cs += weight * s.d;
    };
    if (fam.class_backed() && w.is_interval) {
        const ZClasses& Z = *fam.classes;
        for (std::size_t i = 0; i < Z.size(); ++i)
            for (std::size_t j = 0; j < Z.size(); ++j) {
                if (i == j) continue;
                uint64_t c = Z.pair_count(i, j, g.coords[0], w.span);
                if (c) accumulate(pair_stats(fam.class_measures[j], fam.class_measures[i]),
                                  static_cast<double>(c));
            }
    } else {
        w.for_each(fam.group, [&](const Element& h) {
            accumulate(pair_stats(fam.at(fam.group.mul(g, h)), fam.at(h)), 1.0);
        });
    }
    r.hellinger_sum = hs;
    r.neglog_sum = nl;
    r.C = cs;
    return r;
}

// Window covering every coordinate where a class-backed family on Z can differ.
inline Window whole_line() { return Window::interval(-(kFar >> 2), kFar >> 2); }

// 1 - H^2(g^{-1}mu, mu) over the window as the product of coordinate affinities.
inline double product_affinity(const MeasureFamily& fam, const Element& g, const Window& w) {
    double logp = 0.0;
    w.for_each(fam.group, [&](const Element& h) {
        logp += std::log1p(-hellinger2(fam.at(fam.group.mul(g, h)), fam.at(h)));
    });
    return std::exp(logp);
}

// The same affinity by brute force over joint configurations of the coordinates where mu_gh
// and mu_h differ: sum_x sqrt(P(x) Q(x)). Discrete families only.
inline double joint_affinity(const MeasureFamily& fam, const Element& g, const Window& w,
                             uint64_t max_states = 5'000'000) {
    std::vector<std::pair<DiscreteMeasure, DiscreteMeasure>> coords;
    w.for_each(fam.group, [&](const Element& h) {
        Measure p = fam.at(fam.group.mul(g, h)), q = fam.at(h);
        if (detail::same_measure(p, q)) return;
        coords.emplace_back(std::get<DiscreteMeasure>(p), std::get<DiscreteMeasure>(q));
    });
    uint64_t states = 1;
    for (auto& [p, q] : coords) {
        detail::require_same_support(p, q);
        states *= p.size();
        if (states > max_states) throw std::length_error("joint configuration space too large");
    }
    std::vector<std::size_t> idx(coords.size(), 0);
    double total = 0.0;
    for (uint64_t s = 0; s < states; ++s) {
        double lp = 0.0, lq = 0.0;
        for (std::size_t c = 0; c < coords.size(); ++c) {
            lp += coords[c].first.logw[idx[c]];
            lq += coords[c].second.logw[idx[c]];
        }
        total += std::exp(0.5 * (lp + lq));
        for (std::size_t c = 0; c < coords.size(); ++c) {
            if (++idx[c] < coords[c].first.size()) break;
            idx[c] = 0;
        }
    }
    return total;
}

// ---------------------------------------------------------------------------
// Growth of sub-level sets.

struct CountRow {
    double s = 0.0;
    uint64_t count = 0;
    double slope = 0.0;  // log(count) / s
};

struct PoincareEstimate {
    double estimate = 0.0;  // max of slope over the grid; a lower estimate only
    double last = 0.0;      // slope at the largest threshold
    std::vector<CountRow> table;
};

inline PoincareEstimate poincare_exponent(const std::vector<double>& norms,
                                          std::vector<double> s_grid) {
    if (s_grid.empty()) throw std::invalid_argument("empty threshold grid");
    std::sort(s_grid.begin(), s_grid.end());
    std::vector<double> sorted = norms;
    std::sort(sorted.begin(), sorted.end());
    PoincareEstimate out;
    for (double s : s_grid) {
        if (!(s > 0)) throw std::invalid_argument("thresholds must be positive");
        auto c = static_cast<uint64_t>(std::upper_bound(sorted.begin(), sorted.end(), s) - sorted.begin());
        double slope = c > 0 ? std::log(static_cast<double>(c)) / s : -kInf;
        out.table.push_back({s, c, slope});
        out.estimate = std::max(out.estimate, slope);
    }
    out.last = std::max(0.0, out.table.back().slope);
    return out;
}

struct GrowthReport {
    std::vector<CountRow> rows;
    double slope_estimate = 0.0;  // slope at the largest threshold
    double max_slope = 0.0;
    bool saturated = false;
    std::string verdict;  // "evidence > 6" | "evidence <= 6" | "saturated"
};

// Radius of g for saturation checks: |g|_inf on Z^d, word length on the free product.
inline int64_t element_radius(const Group& G, const Element& g) {
    if (G.free_product()) return G.word_length(g);
    int64_t r = 0;
    for (auto c : g.coords) r = std::max(r, iabs(c));
    return r;
}

// Counts |{g in ball : C(g) <= s and C(g^-1) <= s}|. `c_window` is the window used for each
// C(g); class-backed families on Z default to the whole line.
inline GrowthReport growth_report(const MeasureFamily& fam, std::vector<double> s_grid,
                                  int64_t ball_radius, std::optional<Window> c_window = {}) {
    if (s_grid.empty()) throw std::invalid_argument("empty threshold grid");
    std::sort(s_grid.begin(), s_grid.end());
    Window cw = c_window ? *c_window
                         : (fam.class_backed() ? whole_line() : Window::ball(fam.group, 2 * ball_radius));
    std::vector<std::pair<double, int64_t>> sym;  // (max(C(g), C(g^-1)), radius)
    std::map<Element, double> memo;
    auto C = [&](const Element& g) {
        auto it = memo.find(g);
        if (it != memo.end()) return it->second;
        double v = c_of_g(fam, g, cw).C;
        memo.emplace(g, v);
        return v;
    };
    for (const auto& g : fam.group.ball(ball_radius))
        sym.emplace_back(std::max(C(g), C(fam.group.inv(g))), element_radius(fam.group, g));
    GrowthReport rep;
    int64_t far = 0;
    for (double s : s_grid) {
        uint64_t c = 0;
        for (auto& [v, r] : sym)
            if (v <= s) {
                ++c;
                if (s == s_grid.back()) far = std::max(far, r);
            }
        double slope = c > 0 ? std::log(static_cast<double>(c)) / s : 0.0;
        rep.rows.push_back({s, c, slope});
        rep.max_slope = std::max(rep.max_slope, slope);
    }
    rep.slope_estimate = rep.rows.back().slope;
    rep.saturated = far >= ball_radius;
    rep.verdict = rep.saturated ? "saturated" : (rep.slope_estimate > 6.0 ? "evidence > 6" : "evidence <= 6");
    return rep;
}

struct DissipativityTable {
    double partial = 0.0;
    std::vector<double> shell_increments;  // index = shell radius
};

// Partial sum of exp(-||c_g||^2) grouped by shell radius.
inline DissipativityTable dissipativity_sum(const std::vector<std::pair<int64_t, double>>& radius_norm) {
    DissipativityTable t;
    for (auto& [r, n] : radius_norm) {
        if (r < 0) throw std::invalid_argument("negative radius");
        if (static_cast<std::size_t>(r) >= t.shell_increments.size()) t.shell_increments.resize(r + 1, 0.0);
        t.shell_increments[r] += std::exp(-n);
    }
    for (double v : t.shell_increments) t.partial += v;
    return t;
}

}  // namespace nsb
