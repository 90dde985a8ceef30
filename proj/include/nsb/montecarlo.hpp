#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "nsb/constructions.hpp"
#include "nsb/criteria.hpp"
#include "nsb/family.hpp"
#include "nsb/measures.hpp"
#include "nsb/permwitness.hpp"
#include "nsb/rng.hpp"

namespace nsb {

// Point of the product space over a window of Z. Coordinates are drawn on demand: x_h comes from
// its own stream derive_seed(seed, h), so any coordinate can be read without materializing the
// rest, and (g.x)_h = x_{h-g} is a relabeling.
struct Configuration {
    Interval window{0, 0};
    int64_t offset = 0;  // value(h) = base(h - offset)
    uint64_t seed = 0;
    std::shared_ptr<const MeasureFamily> law;
    std::map<int64_t, double> fixed;  // overrides, in base coordinates
    // Drawn coordinates, shared by shifted copies (the draws do not depend on overrides).
    std::shared_ptr<std::unordered_map<int64_t, double>> drawn = std::make_shared<std::unordered_map<int64_t, double>>();

    double base(int64_t h) const {
        auto it = fixed.find(h);
        if (it != fixed.end()) return it->second;
        if (!law) throw std::logic_error("configuration without a law");
        auto d = drawn->find(h);
        if (d != drawn->end()) return d->second;
        Rng rng(derive_seed(seed, static_cast<uint64_t>(h)));
        double v = sample(law->at(h), rng);
        drawn->emplace(h, v);
        return v;
    }

    double value(int64_t h) const { return base(h - offset); }

    std::vector<double> materialize() const {
        if (window.size() > 10'000'000) throw std::length_error("window too large to materialize");
        std::vector<double> v;
        for (int64_t h = window.lo; h <= window.hi; ++h) v.push_back(value(h));
        return v;
    }
};

inline Configuration sample_configuration(const MeasureFamily& fam, Interval window, uint64_t seed) {
    if (fam.group.spec().kind != GroupKind::Z) throw std::invalid_argument("configurations live on Z");
    Configuration x;
    x.window = window;
    x.seed = seed;
    x.law = std::make_shared<const MeasureFamily>(fam);
    return x;
}

// Configuration with explicit coordinates on the window (outside values are unavailable).
inline Configuration explicit_configuration(Interval window, const std::vector<double>& values) {
    if (values.size() != window.size()) throw std::invalid_argument("one value per window coordinate");
    Configuration x;
    x.window = window;
    for (std::size_t i = 0; i < values.size(); ++i) x.fixed[window.lo + static_cast<int64_t>(i)] = values[i];
    return x;
}

inline Configuration shift(const Configuration& x, int64_t g) {
    Configuration y = x;
    y.offset += g;
    y.window = {x.window.lo + g, x.window.hi + g};
    return y;
}

struct RNEstimate {
    double log_value = 0.0;
    double tail = kInf;  // bound on |omitted log terms|; +inf means uncertified
    bool certified() const { return std::isfinite(tail); }
};

namespace detail {

inline void check_support(const Measure& m, double v) {
    if (is_discrete(m) && std::get<DiscreteMeasure>(m).index_of(static_cast<int64_t>(v)) < 0)
        throw std::out_of_range("coordinate outside support: " + std::to_string(v));
}

// Calls f(h, mu_{h+g}, mu_h) for every h in w where the two may differ.
template <class F>
void for_each_changing(const MeasureFamily& fam, int64_t g, Interval w, F&& f) {
    if (fam.class_backed()) {
        const ZClasses& Z = *fam.classes;
        for (std::size_t i = 0; i < Z.size(); ++i)
            for (std::size_t j = 0; j < Z.size(); ++j) {
                if (i == j) continue;
                for (auto a : Z.region(i))
                    for (auto b : Z.region(j)) {
                        Interval sh{b.lo == -kFar ? -kFar : b.lo - g, b.hi == kFar ? kFar : b.hi - g};
                        Interval r = intersect(intersect(a, sh), w);
                        for (int64_t h = r.lo; h <= r.hi; ++h) f(h, fam.class_measures[j], fam.class_measures[i]);
                    }
            }
        return;
    }
    if (w.size() > 50'000'000) throw std::length_error("window too large for a rule-based family");
    for (int64_t h = w.lo; h <= w.hi; ++h) f(h, fam.at(h + g), fam.at(h));
}

}  // namespace detail

// log d(g^-1 mu)/dmu(x) restricted to the window: sum_h log dmu_{g+h}/dmu_h(x_h).
inline RNEstimate log_rn(const MeasureFamily& fam, int64_t g, const Configuration& x) {
    RNEstimate r;
    if (g == 0) {
        r.tail = 0.0;
        return r;
    }
    double s = 0.0;
    detail::for_each_changing(fam, g, x.window, [&](int64_t h, const Measure& p, const Measure& q) {
        double v = x.value(h);
        detail::check_support(q, v);
        s += log_rn(p, q, v);
    });
    r.log_value = s;
    if (fam.class_backed()) {
        // Omitted terms vanish exactly when every class change lies inside the window.
        bool inside = true;
        const ZClasses& Z = *fam.classes;
        for (std::size_t i = 0; i < Z.size() && inside; ++i)
            for (std::size_t j = 0; j < Z.size() && inside; ++j)
                if (i != j && Z.pair_count(i, j, g, whole_line().span) != Z.pair_count(i, j, g, x.window)) inside = false;
        if (inside) r.tail = 0.0;
    } else if (fam.tail && fam.tail(z_elem(g), Window::interval(x.window.lo, x.window.hi)) == 0.0) {
        r.tail = 0.0;
    }
    return r;
}

struct MaharamState {
    Configuration x;
    double t = 0.0;
};

inline MaharamState maharam_step(const MeasureFamily& fam, const MaharamState& s, int64_t g) {
    return {shift(s.x, g), s.t + log_rn(fam, g, s.x).log_value};
}

// Median and 90th percentile by linear interpolation between order statistics.
inline double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw std::invalid_argument("quantile of an empty sample");
    std::sort(v.begin(), v.end());
    double pos = q * static_cast<double>(v.size() - 1);
    auto i = static_cast<std::size_t>(std::floor(pos));
    if (i + 1 >= v.size()) return v.back();
    double f = pos - static_cast<double>(i);
    return v[i] + f * (v[i + 1] - v[i]);
}

// Runs f(i) for i in [0, n) on up to `threads` workers; results depend only on i.
template <class F>
void parallel_for(uint64_t n, int threads, F&& f) {
    threads = std::max(1, threads);
    if (threads == 1 || n < 2) {
        for (uint64_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w)
        pool.emplace_back([&, w] {
            for (uint64_t i = static_cast<uint64_t>(w); i < n; i += static_cast<uint64_t>(threads)) f(i);
        });
    for (auto& t : pool) t.join();
}

struct LatticeWindowStat {
    int64_t radius = 0;
    double median = 0.0;
    double p90 = 0.0;
    std::vector<double> values;  // pooled over samples, then generators
};

struct LatticeStat {
    double p = 0.0;
    std::vector<LatticeWindowStat> windows;
};

// d(log_rn(g, x), pZ) over windows [-R, R], pooled over samples and the generators.
inline LatticeStat lattice_stat(const MeasureFamily& fam, double p, const std::vector<int64_t>& radii, uint64_t samples,
                                uint64_t seed, const std::vector<int64_t>& generators = {1, -1}, int threads = 1) {
    if (p == 0.0) throw std::invalid_argument("p must be nonzero");
    LatticeStat out;
    out.p = p;
    for (std::size_t wi = 0; wi < radii.size(); ++wi) {
        int64_t R = radii[wi];
        LatticeWindowStat ws;
        ws.radius = R;
        std::vector<double> vals(samples * generators.size());
        parallel_for(samples, threads, [&](uint64_t s) {
            Configuration x = sample_configuration(fam, {-R, R}, derive_seed(derive_seed(seed, wi), s));
            for (std::size_t k = 0; k < generators.size(); ++k)
                vals[s * generators.size() + k] = lattice_distance(log_rn(fam, generators[k], x).log_value, p);
        });
        ws.values = vals;
        ws.median = quantile(vals, 0.5);
        ws.p90 = quantile(vals, 0.9);
        out.windows.push_back(std::move(ws));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Recurrence weights.

using FiniteLaw = std::vector<std::pair<int64_t, double>>;

inline FiniteLaw uniform_law(int64_t n) {
    FiniteLaw eta;
    for (int64_t g = -n; g <= n; ++g) eta.push_back({g, 1.0 / static_cast<double>(2 * n + 1)});
    return eta;
}

struct RecurrenceWeights {
    std::vector<std::pair<int64_t, double>> p;  // (g, p(g, x))
    double total = 0.0;
    double at_identity = 0.0;
};

// p(g, x[, t]) = sum_h eta(h) eta(h - g) w(g) / sum_k eta(h - k) w(k), w(g) = d(g^-1 mu)/dmu(x),
// times F_alpha(t, log w) = exp(-alpha|t + log w| + alpha|t|) when t is given.
inline RecurrenceWeights recurrence_weights(const MeasureFamily& fam, const FiniteLaw& eta, const Configuration& x,
                                            std::optional<double> t = std::nullopt, double alpha = 0.5) {
    double mass = 0.0;
    std::map<int64_t, double> e;
    for (auto [g, w] : eta) {
        if (!(w >= 0.0)) throw std::invalid_argument("eta must be nonnegative");
        e[g] += w;
        mass += w;
    }
    if (std::fabs(mass - 1.0) > 1e-12) throw std::invalid_argument("eta is not a probability measure");
    // Differences h - k over the support.
    std::map<int64_t, double> log_w;
    for (auto& [h, a] : e)
        for (auto& [k, b] : e) {
            int64_t g = h - k;
            if (log_w.count(g)) continue;
            double lw = log_rn(fam, g, x).log_value;
            if (t) lw += -alpha * std::fabs(*t + lw) + alpha * std::fabs(*t);
            log_w[g] = lw;
        }
    std::map<int64_t, double> p;
    for (auto& [h, a] : e) {
        if (a == 0.0) continue;
        // Denominator over k with eta(h - k) > 0, i.e. k = h - j for j in the support.
        std::vector<double> terms;
        for (auto& [j, b] : e)
            if (b > 0.0) terms.push_back(std::log(b) + log_w.at(h - j));
        double log_den = log_sum_exp(terms);
        for (auto& [j, b] : e) {
            if (b == 0.0) continue;
            int64_t g = h - j;
            p[g] += a * std::exp(std::log(b) + log_w.at(g) - log_den);
        }
    }
    RecurrenceWeights r;
    for (auto& [g, v] : p) {
        r.p.push_back({g, v});
        r.total += v;
    }
    r.at_identity = p.count(0) ? p[0] : 0.0;
    return r;
}

struct RecurrenceEstimate {
    int64_t n = 0;
    double mean = 0.0;     // estimate of ||p(e, .)||_1
    double stderr_ = 0.0;
    double worst_normalization = 0.0;  // max |sum_g p(g,x) - 1| over samples
};

inline RecurrenceEstimate recurrence_norm(const MeasureFamily& fam, int64_t n, Interval window, uint64_t samples,
                                          uint64_t seed, int threads = 1) {
    FiniteLaw eta = uniform_law(n);
    std::vector<double> v(samples), norm(samples);
    parallel_for(samples, threads, [&](uint64_t s) {
        Configuration x = sample_configuration(fam, window, derive_seed(seed, s));
        auto w = recurrence_weights(fam, eta, x);
        v[s] = w.at_identity;
        norm[s] = std::fabs(w.total - 1.0);
    });
    RecurrenceEstimate r;
    r.n = n;
    double m = 0.0, m2 = 0.0;
    for (double a : v) m += a;
    m /= static_cast<double>(samples);
    for (double a : v) m2 += (a - m) * (a - m);
    r.mean = m;
    r.stderr_ = samples > 1 ? std::sqrt(m2 / static_cast<double>(samples - 1) / static_cast<double>(samples)) : 0.0;
    r.worst_normalization = *std::max_element(norm.begin(), norm.end());
    return r;
}

// ---------------------------------------------------------------------------
// Flip probe on the block family.

struct FlipResult {
    bool found = false;
    int64_t m = 0;
    int pair_before[2] = {0, 0};
    double log_ratio = 0.0;        // log r_m or -log r_m
    double log_ratio_check = 0.0;  // log mu(x) - log mu(sigma x) over the two coordinates
    Configuration flipped;
};

inline FlipResult flip_at(const FlipSchedule& fs, const Configuration& x, int64_t m) {
    FlipResult r;
    int64_t u = 2 * m, v = 2 * m + fs.k_at(m);
    int a = static_cast<int>(x.value(u)), b = static_cast<int>(x.value(v));
    r.m = m;
    r.pair_before[0] = a;
    r.pair_before[1] = b;
    r.found = a != b;
    r.flipped = x;
    r.flipped.fixed[u - x.offset] = b;
    r.flipped.fixed[v - x.offset] = a;
    if (!r.found) return r;
    r.log_ratio = a == 0 ? fs.log_r(m) : -fs.log_r(m);
    r.log_ratio_check = fs.log_mu(u, a) + fs.log_mu(v, b) - fs.log_mu(u, b) - fs.log_mu(v, a);
    return r;
}

inline FlipResult flip_probe(const FlipSchedule& fs, const Configuration& x) {
    for (int64_t m = fs.n0; m <= fs.horizon(); ++m) {
        int64_t u = 2 * m, v = 2 * m + fs.k_at(m);
        if (x.value(u) != x.value(v)) return flip_at(fs, x, m);
    }
    FlipResult r;
    r.m = fs.horizon() + 1;
    r.flipped = x;
    return r;
}

// ---------------------------------------------------------------------------
// Flow sums sum_h (log dmu_h/dnu(x_h) + log nu(U_h)), or the lattice form
// sum_h (log dmu_h/dnu(x_h) - log rho_h) reduced mod p.

inline double flow_term(const MeasureFamily& fam, const TypeWitness& w, int64_t h, double v) {
    Measure mh = fam.at(h);
    const Measure& nu = *w.nu;
    double lr = log_rn(mh, nu, v);
    if (w.log_rho) return lr - w.log_rho(z_elem(h));
    double lu = 0.0;
    if (w.U) lu = std::log(mass_of(std::get<DiscreteMeasure>(nu), w.U(z_elem(h))));
    return lr + lu;
}

inline std::vector<double> perm_flow_sum(const MeasureFamily& fam, const TypeWitness& w, const Configuration& x,
                                         const std::vector<int64_t>& radii) {
    if (!w.nu) throw std::invalid_argument("witness needs nu");
    std::vector<double> out;
    double s = 0.0;
    int64_t prev = -1;
    for (int64_t R : radii) {
        for (int64_t h = -R; h <= R; ++h)
            if (h < -prev || h > prev) s += flow_term(fam, w, h, x.value(h));
        prev = R;
        out.push_back(w.log_rho && w.p ? wrap(s, *w.p) : s);
    }
    return out;
}

// Draws the partial sums over nested interval windows of a class-backed family in distribution:
// within a class all terms are i.i.d., so only the label counts matter and they are multinomial.
inline std::vector<double> perm_flow_sample(const MeasureFamily& fam, const TypeWitness& w,
                                            const std::vector<Window>& windows, uint64_t seed) {
    if (!fam.class_backed() || !w.nu) throw std::invalid_argument("class-backed family and witness nu required");
    const ZClasses& Z = *fam.classes;
    std::mt19937_64 eng(seed);
    std::vector<double> out;
    double s = 0.0;
    Interval prev{1, 0};
    for (const auto& win : windows) {
        for (std::size_t i = 0; i < Z.size(); ++i) {
            uint64_t fresh = Z.count(i, win.span) - (prev.hi < prev.lo ? 0 : Z.count(i, prev));
            if (fresh == 0) continue;
            const auto& mi = std::get<DiscreteMeasure>(fam.class_measures[i]);
            int64_t h = representative(Z, i).coords[0];
            std::vector<double> suffix(mi.size() + 1, 0.0);
            for (std::size_t l = mi.size(); l-- > 0;) suffix[l] = suffix[l + 1] + mi.prob(l);
            uint64_t left = fresh;
            for (std::size_t l = 0; l < mi.size() && left > 0; ++l) {
                uint64_t c = left;
                if (l + 1 < mi.size()) {
                    double q = std::clamp(mi.prob(l) / suffix[l], 0.0, 1.0);
                    std::binomial_distribution<uint64_t> bin(left, q);
                    c = bin(eng);
                }
                left -= c;
                if (c) s += static_cast<double>(c) * flow_term(fam, w, h, static_cast<double>(mi.labels[l]));
            }
        }
        prev = win.span;
        out.push_back(w.log_rho && w.p ? wrap(s, *w.p) : s);
    }
    return out;
}

}  // namespace nsb
