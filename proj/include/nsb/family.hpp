#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nsb/groups.hpp"
#include "nsb/measures.hpp"

namespace nsb {

// Sentinel for "unbounded" interval ends on Z. Far from overflow when |g| < 2^61.
inline constexpr int64_t kFar = int64_t{1} << 61;

struct Interval {
    int64_t lo;
    int64_t hi;  // inclusive; empty when hi < lo
    uint64_t size() const { return hi < lo ? 0 : static_cast<uint64_t>(hi - lo) + 1; }
};

inline Interval intersect(Interval a, Interval b) {
    return {std::max(a.lo, b.lo), std::min(a.hi, b.hi)};
}

// Nested integer boxes B_0 ⊂ B_1 ⊂ ... partitioning Z into classes: class i is B_i \ B_{i-1},
// and class size() - 1 is everything outside the last box.
class ZClasses {
public:
    ZClasses() = default;
    explicit ZClasses(std::vector<Interval> boxes) : boxes_(std::move(boxes)) {
        for (std::size_t i = 0; i < boxes_.size(); ++i) {
            if (boxes_[i].hi < boxes_[i].lo) throw std::invalid_argument("empty class box");
            if (i > 0 && (boxes_[i].lo > boxes_[i - 1].lo || boxes_[i].hi < boxes_[i - 1].hi))
                throw std::invalid_argument("class boxes must be nested");
        }
    }

    std::size_t size() const { return boxes_.size() + 1; }
    const std::vector<Interval>& boxes() const { return boxes_; }

    std::size_t cls(int64_t h) const {
        for (std::size_t i = 0; i < boxes_.size(); ++i)
            if (h >= boxes_[i].lo && h <= boxes_[i].hi) return i;
        return boxes_.size();
    }

    // Class i as at most two disjoint intervals.
    std::vector<Interval> region(std::size_t i) const {
        Interval outer = i < boxes_.size() ? boxes_[i] : Interval{-kFar, kFar};
        if (i == 0) return {outer};
        const Interval& inner = boxes_[i - 1];
        std::vector<Interval> r;
        if (inner.lo > outer.lo) r.push_back({outer.lo, inner.lo - 1});
        if (inner.hi < outer.hi) r.push_back({inner.hi + 1, outer.hi});
        return r;
    }

    uint64_t count(std::size_t i, Interval w) const {
        uint64_t c = 0;
        for (auto r : region(i)) c += intersect(r, w).size();
        return c;
    }

    // #{h in w : cls(h) = i, cls(h + g) = j}.
    uint64_t pair_count(std::size_t i, std::size_t j, int64_t g, Interval w) const {
        uint64_t c = 0;
        for (auto a : region(i))
            for (auto b : region(j)) {
                Interval shifted{b.lo == -kFar ? -kFar : b.lo - g, b.hi == kFar ? kFar : b.hi - g};
                c += intersect(intersect(a, shifted), w).size();
            }
        return c;
    }

private:
    std::vector<Interval> boxes_;
};

// Some member of class i.
inline Element representative(const ZClasses& Z, std::size_t i) {
    auto r = Z.region(i);
    const Interval& first = r.back();
    return z_elem(first.hi == kFar ? first.lo : first.hi);
}

// Finite subset of G used as a summation window.
struct Window {
    int64_t radius = 0;
    bool is_interval = true;     // [lo, hi] in Z
    Interval span{0, 0};
    std::vector<Element> elements;

    static Window interval(int64_t lo, int64_t hi) {
        Window w;
        w.radius = std::max(iabs(lo), iabs(hi));
        w.span = {lo, hi};
        return w;
    }

    // Metric ball: [-r, r] on Z, explicit enumeration otherwise.
    static Window ball(const Group& G, int64_t r) {
        if (G.spec().kind == GroupKind::Z) return interval(-r, r);
        Window w;
        w.radius = r;
        w.is_interval = false;
        w.elements = G.ball(r);
        return w;
    }

    uint64_t size() const { return is_interval ? span.size() : elements.size(); }

    template <class F>
    void for_each(const Group& G, F&& f) const {
        if (is_interval) {
            for (int64_t h = span.lo; h <= span.hi; ++h) f(Element{{h}, {}});
            (void)G;
        } else {
            for (const auto& h : elements) f(h);
        }
    }
};

// log dmu_g/dref(x) = offset + k * period, with k an integer.
struct LatticeForm {
    double offset = 0.0;
    int64_t k = 0;
};

struct MeasureFamily {
    std::string name;
    Group group{GroupSpec{}};
    std::function<Measure(const Element&)> rule;

    // Optional class structure on Z: mu_h = class_measures[classes.cls(h)].
    std::optional<ZClasses> classes;
    std::vector<Measure> class_measures;

    std::optional<Measure> reference;     // nu, when the construction supplies one
    std::optional<double> lambda;         // declared lattice ratio
    std::optional<double> lattice_period; // p with log dmu_g/dref in offset_g + pZ
    std::function<LatticeForm(const Element&, int64_t)> lattice;

    // Certified bound on the omitted part of sum_h H^2(mu_gh, mu_h) outside a window.
    std::function<double(const Element&, const Window&)> tail;

    bool bounded_rn = false;  // declares sup_g |log dmu_g/dmu_e| < inf pointwise
    std::vector<std::string> caveats;
    std::map<std::string, double> meta;

    bool class_backed() const { return classes.has_value() && group.spec().kind == GroupKind::Z; }

    Measure at(const Element& g) const {
        if (class_backed()) return class_measures.at(classes->cls(g.coords.at(0)));
        if (!rule) throw std::logic_error("family '" + name + "' has no rule");
        return rule(g);
    }

    Measure at(int64_t n) const { return at(z_elem(n)); }

    Element identity() const { return group.identity(); }
};

// Log Radon-Nikodym derivative dmu_g/dmu_e at a base point.
inline double family_log_rn(const MeasureFamily& fam, const Element& g, double x) {
    return log_rn(fam.at(g), fam.at(fam.identity()), x);
}

inline MeasureFamily constant_family(const Group& G, const Measure& nu, std::string name = "constant") {
    MeasureFamily f;
    f.name = std::move(name);
    f.group = G;
    f.rule = [nu](const Element&) { return nu; };
    if (G.spec().kind == GroupKind::Z) {
        f.classes = ZClasses{};
        f.class_measures = {nu};
    }
    f.reference = nu;
    f.bounded_rn = true;
    f.tail = [](const Element&, const Window&) { return 0.0; };
    return f;
}

// Sum of term(mu_gh, mu_h) over h in the window. Class-backed families on Z are summed by
// counting class pairs, so the window may be astronomically large.
template <class Term>
double sum_over_window(const MeasureFamily& fam, const Element& g, const Window& w, Term&& term) {
    if (fam.class_backed() && w.is_interval) {
        const ZClasses& Z = *fam.classes;
        int64_t gz = g.coords.at(0);
        double s = 0.0;
        for (std::size_t i = 0; i < Z.size(); ++i)
            for (std::size_t j = 0; j < Z.size(); ++j) {
                if (i == j) continue;
                uint64_t c = Z.pair_count(i, j, gz, w.span);
                if (c == 0) continue;
                s += static_cast<double>(c) * term(fam.class_measures[j], fam.class_measures[i]);
            }
        return s;
    }
    double s = 0.0;
    w.for_each(fam.group, [&](const Element& h) {
        s += term(fam.at(fam.group.mul(g, h)), fam.at(h));
    });
    return s;
}

// Sum of f(mu_g) over g in the window.
template <class Term>
double sum_over_elements(const MeasureFamily& fam, const Window& w, Term&& f) {
    if (fam.class_backed() && w.is_interval) {
        double s = 0.0;
        for (std::size_t i = 0; i < fam.classes->size(); ++i) {
            uint64_t c = fam.classes->count(i, w.span);
            if (c) s += static_cast<double>(c) * f(fam.class_measures[i]);
        }
        return s;
    }
    double s = 0.0;
    w.for_each(fam.group, [&](const Element& g) { s += f(fam.at(g)); });
    return s;
}

}  // namespace nsb
