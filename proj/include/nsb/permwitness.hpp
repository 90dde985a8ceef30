#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nsb/criteria.hpp"
#include "nsb/family.hpp"
#include "nsb/measures.hpp"
#include "nsb/quadrature.hpp"

namespace nsb {

// Representative of (x mod pZ) in (-|p|/2, |p|/2].
inline double wrap(double x, double p) {
    double q = std::fabs(p);
    if (!(q > 0)) throw std::invalid_argument("lattice period must be nonzero");
    double r = x - q * std::round(x / q);
    if (r <= -0.5 * q) r += q;
    if (r > 0.5 * q) r -= q;
    return r;
}

inline double lattice_distance(double x, double p) { return std::fabs(wrap(x, p)); }

// Thresholds for the finite-scale convergence flags.
inline constexpr double kCauchyIncrement = 1e-3;
inline constexpr double kCauchyRatio = 0.25;
inline constexpr int kDivergenceWindows = 3;

struct Trend {
    std::vector<int64_t> radii;
    std::vector<double> partial;
    std::vector<double> increments;
    bool cauchy = false;
    bool divergent = false;
};

// Increments are the differences of consecutive partial sums (the first is the first partial).
inline Trend make_trend(std::vector<int64_t> radii, std::vector<double> partial) {
    Trend t;
    t.radii = std::move(radii);
    t.partial = std::move(partial);
    for (std::size_t i = 0; i < t.partial.size(); ++i)
        t.increments.push_back(i == 0 ? t.partial[0] : t.partial[i] - t.partial[i - 1]);
    std::size_t n = t.increments.size();
    if (n >= 2) {
        double last = std::fabs(t.increments[n - 1]), prev = std::fabs(t.increments[n - 2]);
        t.cauchy = last < kCauchyIncrement && (last == 0.0 || last < kCauchyRatio * prev);
    }
    if (n >= static_cast<std::size_t>(kDivergenceWindows) + 1) {
        t.divergent = true;
        for (std::size_t i = n - kDivergenceWindows; i < n; ++i)
            if (!(t.increments[i] >= kCauchyIncrement)) t.divergent = false;
    }
    return t;
}

inline std::vector<int64_t> radii_of(const std::vector<Window>& ws) {
    std::vector<int64_t> r;
    for (const auto& w : ws) r.push_back(w.radius);
    return r;
}

// Sums of f(mu_g, g) over each of the nested windows.
template <class F>
std::vector<double> window_partials(const MeasureFamily& fam, const std::vector<Window>& windows,
                                    F&& f, bool class_constant) {
    std::vector<double> out;
    if (fam.class_backed() && class_constant) {
        const ZClasses& Z = *fam.classes;
        std::vector<double> per_class(Z.size());
        for (std::size_t i = 0; i < Z.size(); ++i) per_class[i] = f(fam.class_measures[i], representative(Z, i));
        for (const auto& w : windows) {
            if (!w.is_interval) throw std::invalid_argument("class sums need interval windows");
            double s = 0.0;
            for (std::size_t i = 0; i < Z.size(); ++i) {
                uint64_t c = Z.count(i, w.span);
                if (c) s += static_cast<double>(c) * per_class[i];
            }
            out.push_back(s);
        }
        return out;
    }
    for (const auto& w : windows) {
        double s = 0.0;
        w.for_each(fam.group, [&](const Element& g) { s += f(fam.at(g), g); });
        out.push_back(s);
    }
    return out;
}

struct TypeWitness {
    std::optional<Measure> nu;
    std::function<std::vector<int64_t>(const Element&)> U;  // labels of U_g
    std::function<double(const Element&)> t;                // shifts t_g
    std::function<double(const Element&)> log_rho;          // log rho_g
    std::optional<double> p;
    bool class_constant = false;  // rules depend on g only through the family's class
    bool lattice_exact = false;   // log dmu_g/dnu available as the family's LatticeForm
};

inline Trend check_II1(const MeasureFamily& fam, const Measure& nu, const std::vector<Window>& windows) {
    auto part = window_partials(
        fam, windows, [&](const Measure& m, const Element&) { return pair_stats(m, nu).h2; }, true);
    return make_trend(radii_of(windows), std::move(part));
}

struct AlphaSum {
    std::string generator;
    Trend trend;
    bool vanishes = false;
};

// Partial sums of sum_h (f(gh) - f(h)) over nested windows.
inline std::vector<double> difference_partials(const MeasureFamily& fam, const Element& g,
                                               const std::vector<Window>& windows,
                                               const std::function<double(const Element&)>& f,
                                               bool class_constant) {
    std::vector<double> out;
    for (const auto& w : windows) {
        double s = 0.0;
        if (fam.class_backed() && class_constant && w.is_interval) {
            const ZClasses& Z = *fam.classes;
            std::vector<double> v(Z.size());
            for (std::size_t i = 0; i < Z.size(); ++i) v[i] = f(representative(Z, i));
            for (std::size_t i = 0; i < Z.size(); ++i)
                for (std::size_t j = 0; j < Z.size(); ++j) {
                    if (i == j || v[i] == v[j]) continue;
                    uint64_t c = Z.pair_count(i, j, g.coords.at(0), w.span);
                    if (c) s += static_cast<double>(c) * (v[j] - v[i]);
                }
        } else {
            w.for_each(fam.group, [&](const Element& h) { s += f(fam.group.mul(g, h)) - f(h); });
        }
        out.push_back(s);
    }
    return out;
}

struct IIinfVerdict {
    Trend hellinger;       // sum H^2(mu_g, nu(U_g)^-1 nu|U_g)
    Trend outside_mu;      // sum mu_g(X0 \ U_g)
    Trend outside_nu;      // sum nu(X0 \ U_g)
    std::vector<AlphaSum> alpha;
    bool degenerate = false;  // U_g = X0 throughout
    bool consistent = false;
};

inline IIinfVerdict check_IIinf(const MeasureFamily& fam, const TypeWitness& w,
                                const std::vector<Window>& windows, const std::vector<Element>& generators) {
    if (!w.nu || !w.U) throw std::invalid_argument("II_inf check needs nu and U_g");
    const auto& nu = std::get<DiscreteMeasure>(*w.nu);
    auto radii = radii_of(windows);
    auto restricted = [&](const Element& g) {
        auto U = w.U(g);
        if (!(mass_of(nu, U) > 0)) throw std::invalid_argument("witness set U_g is null");
        return restrict_normalize(nu, U);
    };
    // Summed over the complement directly: 1 - m(U) cancels when m(U) is within 1e-16 of 1.
    auto mass_out = [&](const DiscreteMeasure& m, std::vector<int64_t> U) {
        std::sort(U.begin(), U.end());
        double s = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i)
            if (!std::binary_search(U.begin(), U.end(), m.labels[i])) s += m.prob(i);
        return s;
    };
    IIinfVerdict v;
    v.hellinger = make_trend(radii, window_partials(fam, windows, [&](const Measure& m, const Element& g) {
        auto r = restricted(g);
        const auto& mg = std::get<DiscreteMeasure>(m);
        // H^2 against a measure living on a subset: extend by zero weights.
        double s = 0.0;
        for (std::size_t i = 0; i < mg.size(); ++i) {
            long j = r.index_of(mg.labels[i]);
            double q = j < 0 ? 0.0 : r.prob(static_cast<std::size_t>(j));
            double d = std::sqrt(mg.prob(i)) - std::sqrt(q);
            s += d * d;
        }
        return std::min(1.0, 0.5 * s);
    }, w.class_constant));
    v.outside_mu = make_trend(radii, window_partials(fam, windows, [&](const Measure& m, const Element& g) {
        return mass_out(std::get<DiscreteMeasure>(m), w.U(g));
    }, w.class_constant));
    v.outside_nu = make_trend(radii, window_partials(fam, windows, [&](const Measure&, const Element& g) {
        return mass_out(nu, w.U(g));
    }, w.class_constant));
    v.degenerate = v.outside_nu.partial.back() == 0.0;
    bool alpha_ok = true;
    for (const auto& g : generators) {
        auto f = [&](const Element& h) { return std::log1p(-mass_out(nu, w.U(h))); };
        AlphaSum a;
        a.generator = fam.group.label(g);
        a.trend = make_trend(radii, difference_partials(fam, g, windows, f, w.class_constant));
        a.vanishes = std::fabs(a.trend.partial.back()) < kCauchyIncrement;
        alpha_ok = alpha_ok && a.vanishes;
        v.alpha.push_back(std::move(a));
    }
    v.consistent = !v.degenerate && v.hellinger.cauchy && v.outside_mu.cauchy && v.outside_nu.divergent && alpha_ok;
    return v;
}

// Shift t with |z| = exp(-2 pi i t / p) z for z = int exp(2 pi i L / p) dm.
template <class Expect>
double phase_center(double p, Expect&& expect_exp) {
    std::complex<double> z = expect_exp(2.0 * std::numbers::pi / p);
    if (std::abs(z) == 0.0) return 0.0;
    return p * std::arg(z) / (2.0 * std::numbers::pi);
}

namespace detail {

// int f(log dm/dnu(x)) dm(x) for discrete m, nu on a common support.
template <class F>
double expect_log_rn(const DiscreteMeasure& m, const DiscreteMeasure& nu, F&& f) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) s += m.prob(i) * f(m.logw[i] - nu.log_prob(m.labels[i]));
    return s;
}

template <class F>
double expect_log_rn(const DensityMeasure& m, const DensityMeasure& nu, F&& f) {
    std::vector<double> k = m.kinks();
    for (double x : nu.kinks()) k.push_back(x);
    QuadOptions opt;
    opt.abs_tol = 1e-9;
    opt.initial_pieces = 32;
    auto r = integrate_line([&](double x) {
        double lp = m.log_pdf(x);
        return std::exp(lp) * f(lp - nu.log_pdf(x));
    }, k, opt);
    return r.value;
}

}  // namespace detail

// Term int d(log dmu_g/dnu - t_g, pZ)^2 dmu_g.
inline double t_invariant_term(const MeasureFamily& fam, const Measure& mg, const Element& g, double p,
                               const TypeWitness& w, const Measure& nu) {
    if (w.lattice_exact && fam.lattice && fam.lattice_period && is_discrete(mg)) {
        const auto& m = std::get<DiscreteMeasure>(mg);
        double t = w.t ? w.t(g) : 0.0;
        double s = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i) {
            LatticeForm lf = fam.lattice(g, m.labels[i]);
            double residual = lf.offset - t;
            double k_part = static_cast<double>(lf.k) * *fam.lattice_period;
            double d = lattice_distance(residual + k_part, p);
            s += m.prob(i) * d * d;
        }
        return s;
    }
    return std::visit([&](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        const auto& n = std::get<T>(nu);
        double t;
        if (w.t) {
            t = w.t(g);
        } else {
            t = phase_center(p, [&](double omega) {
                double re = detail::expect_log_rn(m, n, [&](double l) { return std::cos(omega * l); });
                double im = detail::expect_log_rn(m, n, [&](double l) { return std::sin(omega * l); });
                return std::complex<double>(re, im);
            });
        }
        return detail::expect_log_rn(m, n, [&](double l) {
            double d = lattice_distance(l - t, p);
            return d * d;
        });
    }, mg);
}

inline Trend check_T_invariant(const MeasureFamily& fam, double p, const TypeWitness& w,
                               const std::vector<Window>& windows) {
    if (p == 0.0) throw std::invalid_argument("p must be nonzero");
    Measure nu = w.nu ? *w.nu : fam.at(fam.identity());
    auto part = window_partials(fam, windows, [&](const Measure& m, const Element& g) {
        return t_invariant_term(fam, m, g, p, w, nu);
    }, w.class_constant);
    return make_trend(radii_of(windows), std::move(part));
}

struct AlphaReport {
    Trend raw;                     // partial sums in R
    std::vector<double> mod_p;     // the same reduced into (-|p|/2, |p|/2]
    Trend absolute;                // partial sums of |log rho_gh - log rho_h|
    bool summable = false;
    bool converged = false;
    double value = 0.0;            // last partial mod p
};

inline AlphaReport alpha_homomorphism(const MeasureFamily& fam, const std::function<double(const Element&)>& log_rho,
                                      double p, const Element& g, const std::vector<Window>& windows,
                                      bool class_constant = false) {
    AlphaReport a;
    auto radii = radii_of(windows);
    a.raw = make_trend(radii, difference_partials(fam, g, windows, log_rho, class_constant));
    std::vector<double> absp;
    for (const auto& w : windows) {
        double s = 0.0;
        if (fam.class_backed() && class_constant && w.is_interval) {
            const ZClasses& Z = *fam.classes;
            for (std::size_t i = 0; i < Z.size(); ++i)
                for (std::size_t j = 0; j < Z.size(); ++j) {
                    if (i == j) continue;
                    double d = std::fabs(log_rho(representative(Z, j)) - log_rho(representative(Z, i)));
                    if (d == 0.0) continue;
                    s += static_cast<double>(Z.pair_count(i, j, g.coords.at(0), w.span)) * d;
                }
        } else {
            w.for_each(fam.group, [&](const Element& h) { s += std::fabs(log_rho(fam.group.mul(g, h)) - log_rho(h)); });
        }
        absp.push_back(s);
    }
    a.absolute = make_trend(radii, std::move(absp));
    for (double v : a.raw.partial) a.mod_p.push_back(wrap(v, p));
    a.summable = a.absolute.cauchy;
    a.value = a.mod_p.back();
    std::size_t n = a.mod_p.size();
    a.converged = n >= 2 && std::fabs(wrap(a.mod_p[n - 1] - a.mod_p[n - 2], p)) < 1e-9;
    return a;
}

struct Cluster {
    std::string representative;  // label of the first member in canonical order
    std::size_t size = 0;
    bool in_last_shell = false;  // heuristic for "attained infinitely often"
};

// Single-linkage clustering of {mu_g : g in ball(R)} under the Hellinger distance H. Clusters
// with members in the outer shell (R_prev, R] are reported as limit-point candidates.
inline std::vector<Cluster> hellinger_limit_points(const MeasureFamily& fam, int64_t r_prev, int64_t r,
                                                   double tol) {
    // Points are (measure, label, reaches the outer shell). Class-backed families contribute
    // one point per class meeting the ball.
    struct Point {
        Measure m;
        std::string label;
        bool outer;
    };
    std::vector<Point> pts;
    if (fam.class_backed()) {
        const ZClasses& Z = *fam.classes;
        for (std::size_t i = 0; i < Z.size(); ++i) {
            if (Z.count(i, {-r, r}) == 0) continue;
            uint64_t inner = r_prev >= 0 ? Z.count(i, {-r_prev, r_prev}) : 0;
            Element rep = representative(Z, i);
            pts.push_back({fam.class_measures[i], fam.group.label(rep), Z.count(i, {-r, r}) > inner});
        }
    } else {
        for (const auto& g : fam.group.ball(r))
            pts.push_back({fam.at(g), fam.group.label(g), element_radius(fam.group, g) > r_prev});
    }
    std::size_t n = pts.size();
    std::vector<std::size_t> parent(n);
    for (std::size_t i = 0; i < n; ++i) parent[i] = i;
    std::function<std::size_t(std::size_t)> find = [&](std::size_t i) {
        return parent[i] == i ? i : parent[i] = find(parent[i]);
    };
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            if (find(i) == find(j)) continue;
            double h = detail::same_measure(pts[i].m, pts[j].m) ? 0.0 : std::sqrt(pair_stats(pts[i].m, pts[j].m).h2);
            if (h <= tol) parent[find(j)] = find(i);
        }
    std::vector<Cluster> out;
    std::vector<long> slot(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t root = find(i);
        if (slot[root] < 0) {
            slot[root] = static_cast<long>(out.size());
            out.push_back({pts[i].label, 0, false});
        }
        auto& c = out[static_cast<std::size_t>(slot[root])];
        ++c.size;
        c.in_last_shell = c.in_last_shell || pts[i].outer;
    }
    return out;
}

}  // namespace nsb
