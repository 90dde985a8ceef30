#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <numbers>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nsb/criteria.hpp"
#include "nsb/permwitness.hpp"
#include "nsb/rng.hpp"

namespace nsb {

// Finitely supported probability measure on R. Continuous increment laws are represented by
// midpoint discretisations on a grid. When `period` is set, atoms are offset + k * period.
struct LineMeasure {
    std::vector<double> atoms;
    std::vector<double> probs;
    std::optional<double> offset;
    std::optional<double> period;
    std::vector<int64_t> ks;

    static LineMeasure from(std::vector<double> atoms, std::vector<double> w) {
        if (atoms.size() != w.size() || atoms.empty()) throw std::invalid_argument("bad line measure");
        double z = 0.0;
        for (double x : w) {
            if (!(x >= 0)) throw std::invalid_argument("negative weight");
            z += x;
        }
        LineMeasure m;
        for (std::size_t i = 0; i < atoms.size(); ++i)
            if (w[i] > 0) {
                m.atoms.push_back(atoms[i]);
                m.probs.push_back(w[i] / z);
            }
        return m;
    }

    template <class F>
    double expect(F&& f) const {
        double s = 0.0;
        for (std::size_t i = 0; i < atoms.size(); ++i) s += probs[i] * f(atoms[i]);
        return s;
    }

    double mean() const { return expect([](double t) { return t; }); }
    double variance() const {
        double m = mean();
        return expect([&](double t) { return (t - m) * (t - m); });
    }
    double mass(double lo, double hi) const {
        return expect([&](double t) { return t >= lo && t <= hi ? 1.0 : 0.0; });
    }
};

inline LineMeasure dirac(double c) { return LineMeasure::from({c}, {1.0}); }

inline LineMeasure rademacher(double scale = 1.0) { return LineMeasure::from({-scale, scale}, {0.5, 0.5}); }

// Midpoint grid of `cells` cells on [a, b] weighted by pdf.
inline LineMeasure discretize(const std::function<double(double)>& pdf, double a, double b, int cells) {
    std::vector<double> x, w;
    double h = (b - a) / cells;
    for (int i = 0; i < cells; ++i) {
        double t = a + (i + 0.5) * h;
        x.push_back(t);
        w.push_back(pdf(t));
    }
    return LineMeasure::from(std::move(x), std::move(w));
}

inline LineMeasure uniform_line(double a, double b, int cells = 64) {
    return discretize([](double) { return 1.0; }, a, b, cells);
}

inline LineMeasure gauss_line(double mean, double sd, double width = 6.0, int cells = 41) {
    return discretize([&](double t) { double z = (t - mean) / sd; return std::exp(-0.5 * z * z); },
                      mean - width * sd, mean + width * sd, cells);
}

inline LineMeasure lattice_line(double offset, double period, std::vector<int64_t> ks, std::vector<double> w) {
    std::vector<double> x;
    for (auto k : ks) x.push_back(offset + static_cast<double>(k) * period);
    LineMeasure m = LineMeasure::from(std::move(x), std::move(w));
    m.offset = offset;
    m.period = period;
    m.ks = std::move(ks);
    return m;
}

struct TailWalkSpec {
    std::string name;
    std::function<LineMeasure(int64_t)> step;  // n >= 1
    double x0 = 0.0;
};

// ---------------------------------------------------------------------------

inline double double_cutoff_energy(const LineMeasure& m, double kappa) {
    double e = 0.0;
    for (std::size_t i = 0; i < m.atoms.size(); ++i)
        for (std::size_t j = 0; j < m.atoms.size(); ++j) {
            double c = cutoff_T(kappa, m.atoms[i] - m.atoms[j]);
            e += m.probs[i] * m.probs[j] * c * c;
        }
    return e;
}

struct Center {
    double a = 0.0;
    double lhs = 0.0;  // int T(t-a)^2 dmu
    double eps = 0.0;  // int int T(t-s)^2 dmu dmu
};

inline Center center_measure(const LineMeasure& m, double kappa) {
    Center c;
    c.eps = double_cutoff_energy(m, kappa);
    if (c.eps > kappa * kappa / 8.0) {
        c.a = 0.0;
    } else {
        // Interval [b - k/2, b + k/2] of maximal mass; its left end may sit on an atom.
        double best = -1.0, lo = 0.0;
        for (double left : m.atoms) {
            double ms = m.mass(left, left + kappa);
            if (ms > best) {
                best = ms;
                lo = left;
            }
        }
        double hi = lo + kappa;
        double num = m.expect([&](double t) { return t >= lo && t <= hi ? t : 0.0; });
        c.a = num / best;
    }
    c.lhs = m.expect([&](double t) { double v = cutoff_T(kappa, t - c.a); return v * v; });
    return c;
}

struct CriterionReport {
    std::string id;
    std::vector<double> terms;
    std::vector<double> centers;
    Trend trend;  // partial sums at the checkpoints
    bool fires = false;
};

// Checkpoints 8, 64, 512, ... up to N (N itself included).
inline std::vector<int64_t> checkpoints(int64_t N) {
    std::vector<int64_t> c;
    for (int64_t k = 8; k < N; k *= 8) c.push_back(k);
    c.push_back(N);
    return c;
}

inline Trend checkpoint_trend(const std::vector<double>& terms, int64_t N) {
    std::vector<int64_t> cps = checkpoints(N);
    std::vector<double> partial;
    double s = 0.0;
    std::size_t idx = 0;
    for (int64_t n = 1; n <= N; ++n) {
        s += terms[static_cast<std::size_t>(n - 1)];
        if (idx < cps.size() && n == cps[idx]) {
            partial.push_back(s);
            ++idx;
        }
    }
    return make_trend(cps, partial);
}

inline CriterionReport semifinite_criterion(const TailWalkSpec& spec, double kappa, int64_t N) {
    if (N < 1) throw std::invalid_argument("horizon must be positive");
    CriterionReport r;
    r.id = "semifinite";
    for (int64_t n = 1; n <= N; ++n) {
        Center c = center_measure(spec.step(n), kappa);
        r.centers.push_back(c.a);
        r.terms.push_back(c.lhs);
    }
    r.trend = checkpoint_trend(r.terms, N);
    r.fires = r.trend.cauchy;
    return r;
}

inline CriterionReport eigenvalue_criterion(const TailWalkSpec& spec, double p, int64_t N) {
    if (p == 0.0) throw std::invalid_argument("p must be nonzero");
    CriterionReport r;
    r.id = "eigenvalue";
    for (int64_t n = 1; n <= N; ++n) {
        LineMeasure m = spec.step(n);
        double ratio = m.period ? *m.period / p : 0.0;
        if (m.period && ratio == std::round(ratio) && ratio != 0.0) {
            // Atoms sit on offset + pZ exactly.
            r.centers.push_back(*m.offset);
            r.terms.push_back(0.0);
            continue;
        }
        double w = 2.0 * std::numbers::pi / p;
        std::complex<double> z(m.expect([&](double t) { return std::cos(w * t); }),
                               m.expect([&](double t) { return std::sin(w * t); }));
        double t_n = std::abs(z) == 0.0 ? 0.0 : p * std::arg(z) / (2.0 * std::numbers::pi);
        r.centers.push_back(t_n);
        r.terms.push_back(m.expect([&](double t) { double d = lattice_distance(t - t_n, p); return d * d; }));
    }
    r.trend = checkpoint_trend(r.terms, N);
    r.fires = r.trend.cauchy;
    return r;
}

struct SubsetSelection {
    bool sufficient = false;  // false: "insufficient horizon"
    std::vector<std::pair<int64_t, int64_t>> blocks;  // [n_k, m_k], 1-based
    std::vector<int64_t> indices;
    double sum_a = 0.0;
    double sum_b = 0.0;
};

// Greedy blocks [n_k, m_k]: b_n/a_n <= 2^-k on [n_k, N] and block a-sum in [M, 2M].
inline SubsetSelection select_subset(const std::vector<double>& a, const std::vector<double>& b, double M, int64_t N) {
    if (static_cast<int64_t>(a.size()) < N || static_cast<int64_t>(b.size()) < N)
        throw std::invalid_argument("sequences shorter than the horizon");
    if (!(M > 0)) throw std::invalid_argument("M must be positive");
    auto ratio = [&](int64_t n) {
        double an = a[static_cast<std::size_t>(n - 1)], bn = b[static_cast<std::size_t>(n - 1)];
        if (bn == 0.0) return 0.0;
        return an > 0 ? bn / an : kInf;
    };
    // suffix_max[n] = max ratio over [n, N]
    std::vector<double> suffix(static_cast<std::size_t>(N) + 2, 0.0);
    for (int64_t n = N; n >= 1; --n) suffix[static_cast<std::size_t>(n)] = std::max(ratio(n), suffix[static_cast<std::size_t>(n + 1)]);
    SubsetSelection s;
    int64_t start = 1;
    for (int k = 1; start <= N; ++k) {
        double bound = std::ldexp(1.0, -k);
        int64_t n = start;
        while (n <= N && suffix[static_cast<std::size_t>(n)] > bound) ++n;
        if (n > N) break;
        double acc = 0.0;
        int64_t m = n;
        while (m <= N && acc < M) {
            acc += a[static_cast<std::size_t>(m - 1)];
            if (acc >= M) break;
            ++m;
        }
        if (m > N) break;
        s.blocks.push_back({n, m});
        for (int64_t i = n; i <= m; ++i) {
            s.indices.push_back(i);
            s.sum_a += a[static_cast<std::size_t>(i - 1)];
            s.sum_b += b[static_cast<std::size_t>(i - 1)];
        }
        start = m + 1;
    }
    s.sufficient = !s.blocks.empty();
    return s;
}

struct OreReport {
    bool bounded_support = false;
    Trend variance;                 // sum Var zeta_n
    Trend outside_mass;             // sum over I = N of zeta_n(R \ [-C, C])
    Trend truncated_variance;       // sum over I = N of Var nu_n
    SubsetSelection selection;      // certificate for point 3 from the little-o sequences
    Trend selected_outside;
    Trend selected_variance;
    std::vector<double> ratio4;     // zeta_n(R \ [-C,C]) / Var nu_n
    std::vector<double> ratio5;     // int_{|t|>C} t^2 / Var zeta_n
    std::vector<std::vector<double>> concentration;  // point 2 diagnostic per eps
    std::vector<double> eps_grid;
    bool fires1 = false, fires3 = false, fires4 = false, fires5 = false;
    std::vector<std::string> fired;
};

namespace detail {

// Little-o evidence on the horizon: the largest ratio over the last checkpoint block is below
// 1e-2 and below a quarter of the largest ratio over the block before.
inline bool little_o(const std::vector<double>& r, int64_t N) {
    auto cps = checkpoints(N);
    if (cps.size() < 3) return false;
    auto block_max = [&](int64_t lo, int64_t hi) {
        double m = 0.0;
        for (int64_t n = lo + 1; n <= hi; ++n) m = std::max(m, r[static_cast<std::size_t>(n - 1)]);
        return m;
    };
    std::size_t k = cps.size();
    double last = block_max(cps[k - 2], cps[k - 1]);
    double prev = block_max(cps[k - 3], cps[k - 2]);
    return last < 1e-2 && (last == 0.0 || last < 0.25 * prev);
}

inline Trend restricted_trend(const std::vector<double>& v, const std::vector<int64_t>& idx, int64_t N) {
    std::vector<double> masked(static_cast<std::size_t>(N), 0.0);
    for (auto i : idx) masked[static_cast<std::size_t>(i - 1)] = v[static_cast<std::size_t>(i - 1)];
    return checkpoint_trend(masked, N);
}

}  // namespace detail

inline OreReport ore_periodicity(const TailWalkSpec& spec, double C, int64_t N) {
    if (!(C > 0)) throw std::invalid_argument("C must be positive");
    OreReport r;
    r.eps_grid = {0.1, 0.5, 1.0};
    r.concentration.assign(r.eps_grid.size(), {});
    std::vector<double> var, out, tvar, tail2;
    r.bounded_support = true;
    for (int64_t n = 1; n <= N; ++n) {
        LineMeasure m = spec.step(n);
        double inside = m.mass(-C, C);
        if (inside < 1.0) r.bounded_support = false;
        var.push_back(m.variance());
        out.push_back(1.0 - inside);
        double tv = 0.0;
        if (inside > 0) {
            double mu = m.expect([&](double t) { return std::fabs(t) <= C ? t : 0.0; }) / inside;
            tv = m.expect([&](double t) { return std::fabs(t) <= C ? (t - mu) * (t - mu) : 0.0; }) / inside;
        }
        tvar.push_back(tv);
        tail2.push_back(m.expect([&](double t) { return std::fabs(t) > C ? t * t : 0.0; }));
        r.ratio4.push_back(tv > 0 ? out.back() / tv : (out.back() > 0 ? kInf : 0.0));
        r.ratio5.push_back(var.back() > 0 ? tail2.back() / var.back() : (tail2.back() > 0 ? kInf : 0.0));
        // Diagnostic for point 2: mass of [-C, C] outside [c - eps, c + eps] around the
        // heaviest atom inside [-C, C].
        double c = 0.0, best = -1.0;
        for (std::size_t i = 0; i < m.atoms.size(); ++i)
            if (std::fabs(m.atoms[i]) <= C && m.probs[i] > best) {
                best = m.probs[i];
                c = m.atoms[i];
            }
        for (std::size_t e = 0; e < r.eps_grid.size(); ++e) {
            double eps = r.eps_grid[e];
            r.concentration[e].push_back(
                m.expect([&](double t) { return std::fabs(t) <= C && std::fabs(t - c) > eps ? 1.0 : 0.0; }));
        }
    }
    r.variance = checkpoint_trend(var, N);
    r.outside_mass = checkpoint_trend(out, N);
    r.truncated_variance = checkpoint_trend(tvar, N);
    double M = std::max(1e-12, *std::max_element(tvar.begin(), tvar.end()));
    r.selection = select_subset(tvar, out, M, N);
    r.selected_outside = detail::restricted_trend(out, r.selection.indices, N);
    r.selected_variance = detail::restricted_trend(tvar, r.selection.indices, N);

    r.fires1 = r.bounded_support && r.variance.divergent;
    bool full3 = r.outside_mass.cauchy && r.truncated_variance.divergent;
    bool sel3 = r.selection.sufficient && r.selected_outside.cauchy && r.selected_variance.divergent;
    r.fires3 = full3 || sel3;
    r.fires4 = detail::little_o(r.ratio4, N) && r.truncated_variance.divergent;
    double sup2 = 0.0;
    for (int64_t n = 1; n <= N; ++n) {
        LineMeasure m = spec.step(n);
        sup2 = std::max(sup2, m.expect([](double t) { return t * t; }));
    }
    r.fires5 = std::isfinite(sup2) && detail::little_o(r.ratio5, N) && r.variance.divergent;
    if (r.fires1) r.fired.push_back("ore1");
    if (r.fires3) r.fired.push_back("ore3");
    if (r.fires4) r.fired.push_back("ore4");
    if (r.fires5) r.fired.push_back("ore5");
    return r;
}

inline double sample_line(const LineMeasure& m, Rng& rng) {
    double u = rng.uniform(), c = 0.0;
    for (std::size_t i = 0; i < m.atoms.size(); ++i) {
        c += m.probs[i];
        if (u < c) return m.atoms[i];
    }
    return m.atoms.back();
}

// X_0 = spec.x0, X_n = X_{n-1} + omega_n with omega_n ~ zeta_n.
inline std::vector<double> simulate_walk(const TailWalkSpec& spec, int64_t steps, Rng& rng) {
    std::vector<double> x{spec.x0};
    for (int64_t n = 1; n <= steps; ++n) x.push_back(x.back() + sample_line(spec.step(n), rng));
    return x;
}

// Paths with per-path streams derived from the master seed; identical for any thread count.
inline std::vector<std::vector<double>> simulate_paths(const TailWalkSpec& spec, int64_t steps, int64_t paths,
                                                       uint64_t seed) {
    std::vector<std::vector<double>> out(static_cast<std::size_t>(paths));
    for (int64_t i = 0; i < paths; ++i) {
        Rng rng(derive_seed(seed, static_cast<uint64_t>(i)));
        out[static_cast<std::size_t>(i)] = simulate_walk(spec, steps, rng);
    }
    return out;
}

// Reference walks: i.i.d. Rademacher; Gaussian steps with sd 1/n; Rademacher contaminated by a
// far atom at 10n with mass 1/(2n^2); steps on 1/2 + Z.
inline TailWalkSpec named_walk(const std::string& name) {
    TailWalkSpec s;
    s.name = name;
    if (name == "rademacher") {
        s.step = [](int64_t) { return rademacher(); };
    } else if (name == "gauss-decay") {
        s.step = [](int64_t n) { return gauss_line(0.0, 1.0 / static_cast<double>(n)); };
    } else if (name == "contaminated") {
        s.step = [](int64_t n) {
            double q = 1.0 / (2.0 * static_cast<double>(n) * static_cast<double>(n));
            return LineMeasure::from({-1.0, 1.0, 10.0 * static_cast<double>(n)}, {(1 - q) / 2, (1 - q) / 2, q});
        };
    } else if (name == "lattice") {
        s.step = [](int64_t) { return lattice_line(0.5, 1.0, {-1, 0}, {0.5, 0.5}); };
    } else {
        throw std::invalid_argument("unknown walk: " + name);
    }
    return s;
}

}  // namespace nsb
