#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace nsb {

struct QuadOptions {
    double abs_tol = 1e-10;
    std::size_t max_evals = 1'000'000;
    int max_depth = 48;
    int initial_pieces = 8;
};

struct QuadResult {
    double value = 0.0;
    std::size_t evals = 0;
    bool capped = false;  // evaluation budget or depth exhausted somewhere
};

namespace detail {

template <class F>
struct Simpson {
    F& f;
    const QuadOptions& opt;
    QuadResult& res;

    double eval(double x) {
        ++res.evals;
        double y = f(x);
        return std::isfinite(y) ? y : (std::isnan(y) ? 0.0 : y);
    }

    double recurse(double a, double b, double fa, double fm, double fb, double whole, double tol,
                   int depth) {
        double m = 0.5 * (a + b);
        double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
        double flm = eval(lm), frm = eval(rm);
        double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        double delta = left + right - whole;
        if (depth <= 0 || res.evals >= opt.max_evals) {
            res.capped = true;
            return left + right + delta / 15.0;
        }
        if (std::fabs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
        return recurse(a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
               recurse(m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
    }

    double piece(double a, double b, double tol) {
        double fa = eval(a), fb = eval(b), fm = eval(0.5 * (a + b));
        double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        return recurse(a, b, fa, fm, fb, whole, tol, opt.max_depth);
    }
};

}  // namespace detail

// Adaptive Simpson on [a, b]; the interval is first cut into opt.initial_pieces pieces.
template <class F>
QuadResult integrate(F&& f, double a, double b, const QuadOptions& opt = {}) {
    QuadResult res;
    if (!(b > a)) return res;
    detail::Simpson<F> s{f, opt, res};
    int k = std::max(1, opt.initial_pieces);
    double h = (b - a) / k;
    double tol = opt.abs_tol / k;
    for (int i = 0; i < k; ++i) {
        double lo = a + i * h, hi = (i + 1 == k) ? b : a + (i + 1) * h;
        res.value += s.piece(lo, hi, tol);
    }
    return res;
}

// Integral over the real line. The integrand must decay at +-infinity. The line is split at
// the sorted breakpoints (kinks of the integrand); the two infinite tails are mapped to [0, 1)
// by t = b + u / (1 - u).
template <class F>
QuadResult integrate_line(F&& f, std::vector<double> breaks, const QuadOptions& opt = {}) {
    if (breaks.empty()) breaks.push_back(0.0);
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    std::size_t pieces = breaks.size() + 1;
    QuadOptions sub = opt;
    sub.abs_tol = opt.abs_tol / static_cast<double>(pieces);
    QuadResult total;
    auto add = [&](const QuadResult& r) {
        total.value += r.value;
        total.evals += r.evals;
        total.capped = total.capped || r.capped;
        sub.max_evals = opt.max_evals > total.evals ? opt.max_evals - total.evals : 1;
    };
    const double lo = breaks.front(), hi = breaks.back();
    add(integrate(
        [&](double u) {
            if (u >= 1.0) return 0.0;
            double w = 1.0 - u;
            return f(lo - u / w) / (w * w);
        },
        0.0, 1.0, sub));
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) add(integrate(f, breaks[i], breaks[i + 1], sub));
    add(integrate(
        [&](double u) {
            if (u >= 1.0) return 0.0;
            double w = 1.0 - u;
            return f(hi + u / w) / (w * w);
        },
        0.0, 1.0, sub));
    return total;
}

}  // namespace nsb
