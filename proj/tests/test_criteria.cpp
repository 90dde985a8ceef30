#include <gtest/gtest.h>

#include <cmath>

#include "nsb/criteria.hpp"
#include "nsb/rng.hpp"

using namespace nsb;

namespace {

Group Z() { return Group(GroupSpec{GroupKind::Z, 1, 2}); }

// Random nested boxes with random two-point class measures.
MeasureFamily random_class_family(Rng& rng, bool keep_classes) {
    std::vector<Interval> boxes;
    int64_t lo = -static_cast<int64_t>(rng.below(3)), hi = static_cast<int64_t>(rng.below(3));
    int n = 1 + static_cast<int>(rng.below(4));
    for (int i = 0; i < n; ++i) {
        boxes.push_back({lo, hi});
        lo -= static_cast<int64_t>(1 + rng.below(4));
        hi += static_cast<int64_t>(1 + rng.below(4));
    }
    ZClasses Zc(boxes);
    std::vector<Measure> ms;
    for (std::size_t i = 0; i < Zc.size(); ++i) ms.push_back(two_point(0.05 + 0.9 * rng.uniform()));
    MeasureFamily f;
    f.name = "random";
    f.group = Z();
    if (keep_classes) {
        f.classes = Zc;
        f.class_measures = ms;
    } else {
        f.rule = [Zc, ms](const Element& g) { return ms[Zc.cls(g.coords[0])]; };
    }
    return f;
}

}  // namespace

TEST(Criteria, Cutoff) {
    EXPECT_DOUBLE_EQ(cutoff_T(1.0, 3.0), 1.0);
    EXPECT_DOUBLE_EQ(cutoff_T(1.0, -3.0), -1.0);
    EXPECT_DOUBLE_EQ(cutoff_T(2.0, 0.5), 0.5);
    EXPECT_THROW(cutoff_T(0.0, 1.0), std::invalid_argument);
}

TEST(Criteria, PairCountMatchesBruteForce) {
    Rng rng(1);
    for (int trial = 0; trial < 300; ++trial) {
        auto f = random_class_family(rng, true);
        const ZClasses& Zc = *f.classes;
        int64_t g = static_cast<int64_t>(rng.below(21)) - 10;
        Interval w{-static_cast<int64_t>(rng.below(30)), static_cast<int64_t>(rng.below(30))};
        for (std::size_t i = 0; i < Zc.size(); ++i)
            for (std::size_t j = 0; j < Zc.size(); ++j) {
                uint64_t brute = 0;
                for (int64_t h = w.lo; h <= w.hi; ++h) brute += Zc.cls(h) == i && Zc.cls(h + g) == j;
                ASSERT_EQ(Zc.pair_count(i, j, g, w), brute);
            }
    }
}

TEST(Criteria, KakutaniSumClassCountingAgreesWithEnumeration) {
    Rng a(2), b(2);
    for (int trial = 0; trial < 300; ++trial) {
        auto fc = random_class_family(a, true);
        auto fr = random_class_family(b, false);
        int64_t g = static_cast<int64_t>(a.below(15)) - 7;
        b.below(15);
        Window w = Window::interval(-40, 40);
        double kc = kakutani_sum(fc, z_elem(g), w).partial;
        double kr = kakutani_sum(fr, z_elem(g), w).partial;
        EXPECT_NEAR(kc, kr, 1e-12 * (1 + kr));
        auto rc = c_of_g(fc, z_elem(g), w), rr = c_of_g(fr, z_elem(g), w);
        EXPECT_NEAR(rc.C, rr.C, 1e-12 * (1 + rr.C));
        EXPECT_NEAR(rc.neglog_sum, rr.neglog_sum, 1e-12 * (1 + rr.neglog_sum));
    }
}

TEST(Criteria, DivergenceChainProperty) {
    Rng rng(4);
    for (int i = 0; i < 10000; ++i) {
        double a = 0.001 + 0.998 * rng.uniform(), b = 0.001 + 0.998 * rng.uniform();
        auto s = pair_stats(two_point(a), two_point(b));
        EXPECT_LE(s.h2, s.neglog + 1e-15);
        EXPECT_LE(s.neglog, s.d * (1 + 1e-12) + 1e-15);
    }
    for (double sh : {0.1, 1.0, 4.0}) {
        for (Density d : {Density::Laplace, Density::Gauss, Density::Cauchy2}) {
            auto s = pair_stats(DensityMeasure{d, sh}, DensityMeasure{d, 0.0});
            EXPECT_LE(s.h2, s.neglog);
            EXPECT_LE(s.neglog, s.d * (1 + 1e-9));
        }
    }
}

TEST(Criteria, ProductAffinityMatchesJointEnumeration) {
    Rng rng(8);
    for (int trial = 0; trial < 200; ++trial) {
        auto f = random_class_family(rng, false);
        int64_t g = static_cast<int64_t>(rng.below(7)) - 3;
        Window w = Window::interval(-8, 8);
        double prod = product_affinity(f, z_elem(g), w);
        double joint = joint_affinity(f, z_elem(g), w);
        EXPECT_NEAR(prod, joint, 1e-12);
        double k = kakutani_sum(f, z_elem(g), w).partial;
        EXPECT_LE(prod, std::exp(-k) + 1e-12);
    }
}

TEST(Criteria, IdentityHasZeroCocycle) {
    Rng rng(9);
    auto f = random_class_family(rng, true);
    auto r = c_of_g(f, f.identity(), Window::interval(-10, 10));
    EXPECT_EQ(r.C, 0.0);
    EXPECT_EQ(r.tail_bound, 0.0);
}

TEST(Criteria, PoincareExponentOnSyntheticNorms) {
    // |{norm <= s}| = floor(e^{2s}) gives slope close to 2.
    std::vector<double> norms;
    for (int k = 1; k <= 3000; ++k) norms.push_back(0.5 * std::log(static_cast<double>(k)));
    auto est = poincare_exponent(norms, {1.0, 2.0, 3.0, 4.0});
    EXPECT_EQ(est.table[0].count, static_cast<uint64_t>(std::floor(std::exp(2.0))));
    EXPECT_NEAR(est.table[2].slope, std::log(403.0) / 3.0, 1e-12);
    EXPECT_LE(est.estimate, 2.0);
    EXPECT_GT(est.estimate, 1.9);
    EXPECT_THROW(poincare_exponent(norms, {}), std::invalid_argument);
}

TEST(Criteria, GrowthOfConstantFamilyIsSaturated) {
    auto f = constant_family(Z(), two_point(0.3));
    auto rep = growth_report(f, {1.0, 2.0}, 8);
    EXPECT_TRUE(rep.saturated);
    EXPECT_EQ(rep.rows.back().count, 17u);
    EXPECT_EQ(rep.verdict, "saturated");
}

TEST(Criteria, DissipativityGroupsByShell) {
    auto t = dissipativity_sum({{0, 0.0}, {1, 1.0}, {1, 2.0}, {3, 0.5}});
    ASSERT_EQ(t.shell_increments.size(), 4u);
    EXPECT_DOUBLE_EQ(t.shell_increments[1], std::exp(-1.0) + std::exp(-2.0));
    EXPECT_DOUBLE_EQ(t.shell_increments[2], 0.0);
    EXPECT_NEAR(t.partial, 1 + std::exp(-1.0) + std::exp(-2.0) + std::exp(-0.5), 1e-15);
    EXPECT_THROW(dissipativity_sum({{-1, 0.0}}), std::invalid_argument);
}

TEST(Criteria, FreeProductWindowSums) {
    Group G(GroupSpec{GroupKind::FreeProdZ_Za, 1, 2});
    auto f = constant_family(G, two_point(0.4));
    Window w = Window::ball(G, 3);
    EXPECT_EQ(w.size(), Group::ball_count(2, 3));
    EXPECT_EQ(kakutani_sum(f, G.t_pow(1), w).partial, 0.0);
}
