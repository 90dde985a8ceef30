#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "nsb/quadrature.hpp"
#include "nsb/rng.hpp"

namespace nsb {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// log(sum exp(v)), -inf for an empty range.
inline double log_sum_exp(const std::vector<double>& v) {
    if (v.empty()) return -kInf;
    double m = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

// ---------------------------------------------------------------------------
// Base densities on the real line.

enum class Density { Laplace, Cauchy2, Gauss };

inline std::string density_name(Density d) {
    switch (d) {
        case Density::Laplace: return "laplace";
        case Density::Cauchy2: return "cauchy2";
        case Density::Gauss: return "gauss";
    }
    return "?";
}

inline Density density_from_name(const std::string& s) {
    if (s == "laplace") return Density::Laplace;
    if (s == "cauchy2") return Density::Cauchy2;
    if (s == "gauss") return Density::Gauss;
    throw std::invalid_argument("unknown density '" + s + "'");
}

inline double log_phi(Density d, double t) {
    switch (d) {
        case Density::Laplace: return -std::log(2.0) - std::fabs(t);
        case Density::Cauchy2: return std::log(2.0 / std::numbers::pi) - 2.0 * std::log1p(t * t);
        case Density::Gauss: return -0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * t * t;
    }
    return -kInf;
}

inline double phi(Density d, double t) { return std::exp(log_phi(d, t)); }

inline double phi_cdf(Density d, double t) {
    switch (d) {
        case Density::Laplace: return t < 0 ? 0.5 * std::exp(t) : 1.0 - 0.5 * std::exp(-t);
        case Density::Cauchy2:
            return 0.5 + (std::atan(t) + t / (1.0 + t * t)) / std::numbers::pi;
        case Density::Gauss: return 0.5 * std::erfc(-t / std::numbers::sqrt2);
    }
    return 0.0;
}

// Points where log phi is not smooth.
inline std::vector<double> phi_kinks(Density d) {
    if (d == Density::Laplace) return {0.0};
    return {};
}

// ---------------------------------------------------------------------------
// Measures.

// Probability measure on a countable set of integer labels, stored in log space. `tail_mass`
// bounds the mass of labels that were truncated away; weights over `labels` sum to one.
struct DiscreteMeasure {
    std::vector<int64_t> labels;
    std::vector<double> logw;
    double tail_mass = 0.0;

    static DiscreteMeasure from_logw(std::vector<int64_t> labels, std::vector<double> logw,
                                     double tail_mass = 0.0) {
        if (labels.size() != logw.size() || labels.empty())
            throw std::invalid_argument("labels and weights must be nonempty and of equal size");
        std::vector<std::size_t> order(labels.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](auto i, auto j) { return labels[i] < labels[j]; });
        DiscreteMeasure m;
        m.tail_mass = tail_mass;
        for (auto i : order) {
            if (!m.labels.empty() && m.labels.back() == labels[i])
                throw std::invalid_argument("duplicate label");
            if (!std::isfinite(logw[i])) throw std::invalid_argument("weights must be positive");
            m.labels.push_back(labels[i]);
            m.logw.push_back(logw[i]);
        }
        double z = log_sum_exp(m.logw);
        for (auto& w : m.logw) w -= z;
        return m;
    }

    static DiscreteMeasure from_weights(std::vector<int64_t> labels, const std::vector<double>& w,
                                        double tail_mass = 0.0) {
        std::vector<double> lw(w.size());
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (!(w[i] > 0)) throw std::invalid_argument("weights must be positive");
            lw[i] = std::log(w[i]);
        }
        return from_logw(std::move(labels), std::move(lw), tail_mass);
    }

    std::size_t size() const { return labels.size(); }
    double prob(std::size_t i) const { return std::exp(logw[i]); }

    // Position of `label`, or -1.
    long index_of(int64_t label) const {
        auto it = std::lower_bound(labels.begin(), labels.end(), label);
        if (it == labels.end() || *it != label) return -1;
        return static_cast<long>(it - labels.begin());
    }

    double log_prob(int64_t label) const {
        long i = index_of(label);
        if (i < 0) throw std::out_of_range("point outside support: " + std::to_string(label));
        return logw[static_cast<std::size_t>(i)];
    }
};

// dnu_s(t) = phi(t + s) dt.
struct DensityMeasure {
    Density phi = Density::Laplace;
    double shift = 0.0;

    double log_pdf(double t) const { return log_phi(phi, t + shift); }
    std::vector<double> kinks() const {
        auto k = phi_kinks(phi);
        for (auto& x : k) x -= shift;
        return k;
    }
};

using Measure = std::variant<DiscreteMeasure, DensityMeasure>;

inline bool is_discrete(const Measure& m) { return std::holds_alternative<DiscreteMeasure>(m); }

inline DiscreteMeasure two_point(double a) {
    if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("two-point mass must lie in (0,1)");
    return DiscreteMeasure::from_logw({0, 1}, {std::log(a), std::log1p(-a)});
}

namespace detail {

inline void require_same_support(const DiscreteMeasure& p, const DiscreteMeasure& q) {
    if (p.labels != q.labels) throw std::invalid_argument("measures are not equivalent");
}

inline std::vector<double> pair_kinks(const DensityMeasure& p, const DensityMeasure& q) {
    auto k = p.kinks();
    auto k2 = q.kinks();
    k.insert(k.end(), k2.begin(), k2.end());
    return k;
}

template <class F>
double visit_pair(const Measure& p, const Measure& q, F&& f) {
    if (is_discrete(p) != is_discrete(q)) throw std::invalid_argument("measures are not equivalent");
    if (is_discrete(p)) return f(std::get<DiscreteMeasure>(p), std::get<DiscreteMeasure>(q));
    return f(std::get<DensityMeasure>(p), std::get<DensityMeasure>(q));
}

}  // namespace detail

// log dp/dq at x.
inline double log_rn(const Measure& p, const Measure& q, double x) {
    return detail::visit_pair(p, q, [&](const auto& a, const auto& b) -> double {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, DiscreteMeasure>) {
            auto label = static_cast<int64_t>(x);
            return a.log_prob(label) - b.log_prob(label);
        } else {
            return a.log_pdf(x) - b.log_pdf(x);
        }
    });
}

// H^2(p, q) = (1/2) int (sqrt(dp) - sqrt(dq))^2, in [0, 1].
inline double hellinger2(const DiscreteMeasure& p, const DiscreteMeasure& q) {
    detail::require_same_support(p, q);
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        double d = std::exp(0.5 * p.logw[i]) - std::exp(0.5 * q.logw[i]);
        s += d * d;
    }
    return std::min(1.0, 0.5 * s);
}

inline double hellinger2(const DensityMeasure& p, const DensityMeasure& q,
                         const QuadOptions& opt = {}) {
    if (p.phi == q.phi && p.shift == q.shift) return 0.0;
    auto r = integrate_line(
        [&](double t) {
            double d = std::exp(0.5 * p.log_pdf(t)) - std::exp(0.5 * q.log_pdf(t));
            return d * d;
        },
        detail::pair_kinks(p, q), opt);
    return std::clamp(0.5 * r.value, 0.0, 1.0);
}

inline double hellinger2(const Measure& p, const Measure& q) {
    return detail::visit_pair(p, q, [](const auto& a, const auto& b) { return hellinger2(a, b); });
}

// D(p, q) = (1/2) log int (dp/dq) dp. Returns +inf when the integral diverges.
inline double d_divergence(const DiscreteMeasure& p, const DiscreteMeasure& q) {
    detail::require_same_support(p, q);
    std::vector<double> t(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) t[i] = 2.0 * p.logw[i] - q.logw[i];
    return std::max(0.0, 0.5 * log_sum_exp(t));
}

inline double d_divergence(const DensityMeasure& p, const DensityMeasure& q,
                           const QuadOptions& opt = {}) {
    if (p.phi == q.phi && p.shift == q.shift) return 0.0;
    auto r = integrate_line([&](double t) { return std::exp(2.0 * p.log_pdf(t) - q.log_pdf(t)); },
                            detail::pair_kinks(p, q), opt);
    if (r.capped || !std::isfinite(r.value)) return kInf;
    return std::max(0.0, 0.5 * std::log(r.value));
}

inline double d_divergence(const Measure& p, const Measure& q) {
    return detail::visit_pair(p, q, [](const auto& a, const auto& b) { return d_divergence(a, b); });
}

// theta(s) = int phi(t+s)^2 / phi(t) dt by quadrature.
inline double theta_quadrature(Density d, double s, const QuadOptions& opt = {}) {
    std::vector<double> k = phi_kinks(d);
    for (double x : phi_kinks(d)) k.push_back(x - s);
    auto r = integrate_line([&](double t) { return std::exp(2.0 * log_phi(d, t + s) - log_phi(d, t)); },
                            k, opt);
    if (r.capped || !std::isfinite(r.value)) return kInf;
    return r.value;
}

inline double theta_laplace(double s) {
    double a = std::fabs(s);
    return (2.0 / 3.0) * std::exp(a) + (1.0 / 3.0) * std::exp(-2.0 * a);
}

inline double theta(Density d, double s) {
    if (d == Density::Laplace) return theta_laplace(s);
    if (d == Density::Gauss) return std::exp(s * s);
    return theta_quadrature(d, s);
}

// Increasing bijection (0,1) -> R; inverse of the Laplace distribution function.
inline double zeta_map(double a) {
    if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("zeta_map needs a in (0,1)");
    return a <= 0.5 ? std::log(2.0 * a) : -std::log(2.0 * (1.0 - a));
}

struct MomentBound {
    double moment;  // a^2/b + (1-a)^2/(1-b)
    double bound;   // exp(|zeta(a) - zeta(b)|^2)
};

inline MomentBound two_point_moment_bound(double a, double b) {
    double dz = zeta_map(a) - zeta_map(b);
    return {a * a / b + (1.0 - a) * (1.0 - a) / (1.0 - b), std::exp(dz * dz)};
}

// nu restricted to U and renormalised. Labels of U outside the support are ignored.
inline DiscreteMeasure restrict_normalize(const DiscreteMeasure& nu, const std::vector<int64_t>& U) {
    std::vector<int64_t> lab;
    std::vector<double> lw;
    for (auto u : U) {
        long i = nu.index_of(u);
        if (i < 0) continue;
        lab.push_back(u);
        lw.push_back(nu.logw[static_cast<std::size_t>(i)]);
    }
    if (lab.empty()) throw std::invalid_argument("restriction to a null set");
    return DiscreteMeasure::from_logw(std::move(lab), std::move(lw));
}

inline double mass_of(const DiscreteMeasure& nu, const std::vector<int64_t>& U) {
    double s = 0.0;
    for (auto u : U) {
        long i = nu.index_of(u);
        if (i >= 0) s += nu.prob(static_cast<std::size_t>(i));
    }
    return s;
}

inline DiscreteMeasure pushforward(const DiscreteMeasure& m, const std::function<int64_t(int64_t)>& pi) {
    std::vector<int64_t> lab;
    std::vector<std::vector<double>> parts;
    for (std::size_t i = 0; i < m.size(); ++i) {
        int64_t y = pi(m.labels[i]);
        auto it = std::find(lab.begin(), lab.end(), y);
        if (it == lab.end()) {
            lab.push_back(y);
            parts.push_back({m.logw[i]});
        } else {
            parts[static_cast<std::size_t>(it - lab.begin())].push_back(m.logw[i]);
        }
    }
    std::vector<double> lw;
    for (auto& p : parts) lw.push_back(log_sum_exp(p));
    return DiscreteMeasure::from_logw(std::move(lab), std::move(lw), m.tail_mass);
}

// ---------------------------------------------------------------------------
// Sampling.

inline double standard_quantile(Density d, double u) {
    switch (d) {
        case Density::Laplace: return u < 0.5 ? std::log(2.0 * u) : -std::log(2.0 * (1.0 - u));
        case Density::Cauchy2: {
            // Monotone CDF: bracket then Newton with bisection fallback.
            double lo = -1.0, hi = 1.0;
            while (phi_cdf(d, lo) > u) lo *= 2.0;
            while (phi_cdf(d, hi) < u) hi *= 2.0;
            double t = 0.5 * (lo + hi);
            for (int it = 0; it < 200; ++it) {
                double f = phi_cdf(d, t) - u;
                if (f > 0) hi = t; else lo = t;
                double nt = t - f / phi(d, t);
                t = (nt > lo && nt < hi) ? nt : 0.5 * (lo + hi);
                if (hi - lo < 1e-15 * std::max(1.0, std::fabs(t))) break;
            }
            return t;
        }
        case Density::Gauss: break;
    }
    throw std::invalid_argument("no closed-form quantile");
}

inline int64_t sample(const DiscreteMeasure& m, Rng& rng) {
    double u = rng.uniform();
    double c = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        c += m.prob(i);
        if (u < c) return m.labels[i];
    }
    return m.labels.back();
}

inline double sample(const DensityMeasure& m, Rng& rng) {
    double y;
    if (m.phi == Density::Gauss) {
        double u1 = rng.uniform(), u2 = rng.uniform();
        y = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    } else {
        y = standard_quantile(m.phi, rng.uniform());
    }
    return y - m.shift;
}

inline double sample(const Measure& m, Rng& rng) {
    if (is_discrete(m)) return static_cast<double>(sample(std::get<DiscreteMeasure>(m), rng));
    return sample(std::get<DensityMeasure>(m), rng);
}

}  // namespace nsb
