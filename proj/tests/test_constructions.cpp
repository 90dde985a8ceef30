#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "nsb/constructions.hpp"
#include "nsb/rng.hpp"

using namespace nsb;

namespace {

DiscreteMeasure geometric_base(int labels) {
    std::vector<int64_t> lab;
    std::vector<double> w;
    for (int n = 1; n <= labels; ++n) {
        lab.push_back(n);
        w.push_back(std::ldexp(1.0, -n));
    }
    return DiscreteMeasure::from_weights(lab, w);
}

Prop51Spec random_table_spec(Rng& rng) {
    Prop51Spec s;
    s.name = "table";
    s.base = geometric_base(6);
    s.lambda = 0.2 + 0.6 * rng.uniform();
    int entries = 1 + static_cast<int>(rng.below(12));
    for (int i = 0; i < entries; ++i) {
        int64_t h = static_cast<int64_t>(rng.below(41)) - 20;
        std::vector<int64_t> sec;
        for (int64_t x = 1; x <= 6; ++x)
            if (rng.below(2)) sec.push_back(x);
        s.table[h] = sec;
    }
    return s;
}

// Direct evaluation: mu_k(n) proportional to 2^{-n^2}, times lambda once 2^{n^2} >= |k|.
double example55_direct(int64_t k, int n, double lambda, int K) {
    auto big = [&](int m) { return m * m >= 63 || (int64_t{1} << (m * m)) >= iabs(k); };
    double z = 0.0;
    for (int m = 1; m <= K; ++m) z += std::ldexp(1.0, -m * m) * (big(m) ? lambda : 1.0);
    return std::ldexp(1.0, -n * n) * (big(n) ? lambda : 1.0) / z;
}

}  // namespace

TEST(Constraints, Relations) {
    EXPECT_TRUE(make_constraint("a", 1.0, "<=", 1.0).holds);
    EXPECT_FALSE(make_constraint("a", 1.0, "<", 1.0).holds);
    EXPECT_TRUE(make_constraint("a", 1.0 + 1e-13, "~=", 1.0, 1e-12).holds);
    EXPECT_FALSE(make_constraint("a", 1.1, "~=", 1.0, 1e-12).holds);
    EXPECT_THROW(make_constraint("a", 1.0, "=>", 1.0), std::invalid_argument);
    std::vector<Constraint> cs{make_constraint("ok", 0, "==", 0), make_constraint("bad", 1, "==", 0)};
    EXPECT_FALSE(all_hold(cs));
    EXPECT_EQ(failing(cs), std::vector<std::string>{"bad"});
}

TEST(Prop51, EmptySetGivesConstantFamily) {
    Prop51Spec s;
    s.base = geometric_base(5);
    s.table[0] = {};
    auto c = build_prop51(s);
    for (int64_t h = -5; h <= 5; ++h) {
        auto m = std::get<DiscreteMeasure>(c.family.at(h));
        for (std::size_t i = 0; i < m.size(); ++i) EXPECT_NEAR(m.logw[i], s.base.logw[i], 1e-15);
        EXPECT_EQ(prop51_log_rho(s.base, s.lambda, prop51_section(s, h)), 0.0);
    }
    EXPECT_EQ(zeta_symdiff(s, 1), 0.0);
}

TEST(Prop51, LatticePropertyAtEveryPoint) {
    Rng rng(51);
    for (int trial = 0; trial < 200; ++trial) {
        auto s = random_table_spec(rng);
        auto c = build_prop51(s);
        for (int64_t h = -22; h <= 22; ++h) {
            auto m = std::get<DiscreteMeasure>(c.family.at(h));
            double rho = std::exp(prop51_log_rho(s.base, s.lambda, prop51_section(s, h)));
            for (std::size_t i = 0; i < m.size(); ++i) {
                double ratio = std::exp(m.logw[i] - s.base.logw[i]) / rho;
                EXPECT_TRUE(std::fabs(ratio - 1.0) < 1e-12 || std::fabs(ratio - s.lambda) < 1e-12) << ratio;
            }
        }
    }
}

TEST(Prop51, SetminusBalanceAndAlphaOnTables) {
    Rng rng(52);
    for (int trial = 0; trial < 1000; ++trial) {
        auto s = random_table_spec(rng);
        int64_t g = static_cast<int64_t>(rng.below(11)) - 5;
        auto sm = zeta_setminus(s, g);
        EXPECT_EQ(sm.zeta_forward, sm.zeta_backward);
        EXPECT_EQ(sm.forward, sm.backward);

        // Brute force: both set differences counted label by label over a covering window.
        std::map<int64_t, uint64_t> fwd;
        for (int64_t h = -30; h <= 30; ++h) {
            auto a = prop51_section(s, h), b = prop51_section(s, h + g);
            for (auto x : a)
                if (!std::count(b.begin(), b.end(), x)) ++fwd[x];
        }
        EXPECT_EQ(sm.forward, fwd);

        auto c = build_prop51(s);
        std::vector<Window> ws{Window::interval(-40, 40), Window::interval(-80, 80)};
        auto lr = [&](const Element& h) { return prop51_log_rho(s.base, s.lambda, prop51_section(s, h.coords[0])); };
        auto part = difference_partials(c.family, z_elem(g), ws, lr, false);
        EXPECT_NEAR(part.back(), 0.0, 1e-12);
    }
}

TEST(Prop51, ClassAndTableRoutesAgree) {
    // The same A given as classes and as an explicit table on [-40, 40].
    // With two labels every section change happens at |k| <= 17.
    auto cs = example55_spec(0.5, 2);
    Prop51Spec ts;
    ts.base = cs.base;
    ts.lambda = cs.lambda;
    for (int64_t h = -40; h <= 40; ++h) ts.table[h] = prop51_section(cs, h);
    for (int64_t g : {1, 3}) {
        double zt = 0.0;
        for (int64_t h = -40; h + g <= 40; ++h) {
            std::vector<int64_t> a = ts.table[h], b = ts.table[h + g], d;
            std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(d));
            zt += mass_of(ts.base, d);
        }
        EXPECT_NEAR(zeta_symdiff(cs, g), zt, 1e-15);
    }
}

TEST(Cor52, ConstraintsAndAlmostInvariance) {
    auto c = build_cor52(0.5);
    EXPECT_TRUE(all_hold(c.constraints));
    EXPECT_FALSE(c.substitutions.empty());
    double rho = c.family.meta.at("rho");
    auto s = cor52_spec(0.5);
    for (int64_t g = -4; g <= 4; ++g) EXPECT_LE(zeta_symdiff(s, g), 2.0 / rho);
    EXPECT_EQ(cor52_box(1).size(), 16u);
    EXPECT_EQ(c.expected_type, "III_lambda");
}

TEST(Example55, MatchesDirectTable) {
    for (double lambda : {0.5, 0.25}) {
        auto c = build_example55(lambda, 8);
        Rng rng(55);
        std::vector<int64_t> ks{0, 1, 2, 3, 16, 17, 512, 513, -513, int64_t{1} << 40};
        for (int i = 0; i < 200; ++i) ks.push_back(static_cast<int64_t>(rng.next() >> (1 + rng.below(62))) * (rng.below(2) ? 1 : -1));
        for (auto k : ks) {
            auto m = std::get<DiscreteMeasure>(c.family.at(k));
            for (int n = 1; n <= 8; ++n)
                EXPECT_NEAR(m.prob(static_cast<std::size_t>(n - 1)), example55_direct(k, n, lambda, 8), 1e-14)
                    << "k=" << k << " n=" << n;
        }
    }
}

TEST(NFunction, LevelsAndSetIdentities) {
    std::vector<Interval> F{{0, 0}}, G{{0, 0}};
    for (int n = 1; n <= 3; ++n) {
        int64_t r = int64_t{1} << (2 * n);
        F.push_back({-r, r});
        G.push_back({-3 * (r / 4), 3 * (r / 4)});
    }
    auto N = build_N_function(F, G);
    std::set<int64_t> hit;
    for (int64_t h = -100; h <= 100; ++h)
        if (N(h) == 1 && N(h + 1) == 2) hit.insert(h);
    EXPECT_EQ(hit, std::set<int64_t>{4});
    for (int64_t h = -100; h <= 100; ++h) EXPECT_EQ(N(h + 0), N(h));
    auto rep = verify_lemma52(N, G, 64);
    EXPECT_GT(rep.checked, 0u);
    EXPECT_EQ(rep.violations, 0u);
}

TEST(NFunction, RejectsBadSchedule) {
    EXPECT_THROW(build_N_function({{0, 0}, {-2, 2}}, {{0, 0}, {-3, 3}}), std::invalid_argument);
    EXPECT_THROW(build_N_function({{-1, 1}}, {{0, 0}}), std::invalid_argument);
}

TEST(Thm53, FirstLevelAndMoments) {
    auto b = build_thm53(3);
    EXPECT_TRUE(all_hold(b.c.constraints));
    EXPECT_LE(b.levels[1].F.hi, 10000);
    for (std::size_t n = 1; n < b.levels.size(); ++n) {
        EXPECT_GE(b.levels[n].rho, 1.0);
        EXPECT_LE(b.levels[n].rho, 2.0);
    }
    for (std::size_t n = 0; n < b.mu.size(); ++n)
        for (std::size_t m = n + 1; m < b.mu.size(); ++m) {
            double direct = 0.0;
            for (std::size_t i = 0; i < b.mu[n].size(); ++i) direct += b.mu[n].prob(i) * b.mu[n].prob(i) / b.mu[m].prob(i);
            EXPECT_NEAR(moment(b.mu[n], b.mu[m]), direct, 1e-12 * direct);
            EXPECT_LE(direct, std::exp(3.0 * b.levels[n].gamma));
        }
    EXPECT_FALSE(b.c.substitutions.empty());
    EXPECT_THROW(lambda_n(5), std::out_of_range);
}

TEST(Thm53, MinimalHalfWidthIsMinimal) {
    for (int64_t target : {1, 2, 7, 1000, 123456}) {
        auto L = minimal_half_width(0, [&](int64_t x) { return x >= target; });
        EXPECT_EQ(L, target);
    }
    EXPECT_THROW(minimal_half_width(0, [](int64_t) { return false; }, 1024), std::runtime_error);
}

TEST(Thm54, ScheduleAndWitnessShape) {
    auto b = build_thm54(5);
    EXPECT_TRUE(all_hold(b.c.constraints));
    for (std::size_t n = 1; n < b.levels.size(); ++n) {
        EXPECT_NEAR(b.levels[n].delta, b.levels[n].delta_running, 1e-12 * b.levels[n].delta);
        uint64_t bnd = b.levels[n].G.size() + b.levels[n].F.size() - 1 - b.levels[n].F.size();
        double lhs = std::exp(static_cast<double>(bnd) * std::log1p(-b.levels[n].gap));
        EXPECT_GE(lhs, 1.0 - std::ldexp(1.0, -static_cast<int>(n) - 1));
    }
    auto v = check_IIinf(b.c.family, *b.c.witness, b.c.windows, {z_elem(1), z_elem(-1)});
    EXPECT_TRUE(v.hellinger.cauchy);
    EXPECT_TRUE(v.outside_mu.cauchy);
    for (std::size_t i = 1; i < v.outside_nu.increments.size(); ++i) EXPECT_NEAR(v.outside_nu.increments[i], 1.0, 1e-9);
}

TEST(ThmE, BlockBoundariesAreCoherent) {
    auto s = make_thmE_schedule({1, 8, 64, 512});
    for (int k = 1; k <= 6; ++k) {
        auto ak = static_cast<int64_t>(s.a(k));
        EXPECT_EQ(s.F(ak), static_cast<double>(k + 1));
        EXPECT_EQ(s.F(-ak), static_cast<double>(k + 1));
        double bk = static_cast<double>(s.block(k));
        EXPECT_NEAR(s.F(ak - 1), k + (bk - 1) / bk, 1e-15);
    }
    EXPECT_FALSE(s.paper_schedule());
    EXPECT_THROW(make_thmE_schedule({1, 1}), std::invalid_argument);
    EXPECT_THROW(make_thmE_schedule({1, 3, 5}), std::invalid_argument);
}

TEST(ThmE, CocycleNormChain) {
    auto s = make_thmE_schedule({1, 8, 64, 512});
    for (int k = 1; k <= 4; ++k) {
        auto root = static_cast<int64_t>(std::floor(std::sqrt(static_cast<double>(s.block(k)))));
        for (int64_t N = 1; N <= root; ++N) {
            auto c = thmE_cocycle_norm(s, N, 10);
            EXPECT_LE(c.upper, thmE_chain_rhs(s, k, N)) << "k=" << k << " N=" << N;
        }
    }
}

TEST(ThmE, CocycleNormPartialMatchesDirectSum) {
    auto s = make_thmE_schedule({1, 8, 64});
    auto c = thmE_cocycle_norm(s, 3, 6);
    auto lim = static_cast<int64_t>(s.a(6));
    double direct = 0.0;
    for (int64_t n = -lim; n <= lim + 3; ++n) direct += std::pow(thmE_c(s, 3, n), 2);
    EXPECT_NEAR(c.partial, direct, 1e-9);
    EXPECT_GT(c.tail, 0.0);
}

TEST(ThmE, CocycleIdentityProperty) {
    auto s = make_thmE_schedule();
    Rng rng(77);
    for (int i = 0; i < 10000; ++i) {
        int64_t N = static_cast<int64_t>(rng.below(2001)) - 1000, M = static_cast<int64_t>(rng.below(2001)) - 1000;
        int64_t n = static_cast<int64_t>(rng.below(200001)) - 100000;
        EXPECT_NEAR(thmE_c(s, N + M, n), thmE_c(s, N, n) + thmE_c(s, M, n - N), 1e-12);
    }
}

TEST(ThmE, MassAtZeroDecreases) {
    auto s = make_thmE_schedule();
    auto f = build_thmE(s);
    double prev = 1.0;
    for (int64_t n = 0; n <= 5000; n += 7) {
        double p0 = std::get<DiscreteMeasure>(f.at(n)).prob(0);
        EXPECT_LE(p0, prev);
        EXPECT_NEAR(p0, 0.5 * std::exp(-s.F(n)), 1e-15);
        prev = p0;
    }
    EXPECT_LT(prev, 0.5 * std::exp(-5.0));
}

TEST(ThmD, ZeroShiftIsConstant) {
    DensityFamilySpec spec;
    spec.shift = [](int64_t) { return 0.0; };
    spec.bound = 0.0;
    auto c = build_thmD(spec);
    EXPECT_EQ(kakutani_sum(c.family, z_elem(3), Window::interval(-50, 50)).partial, 0.0);
    EXPECT_DOUBLE_EQ(c.family.meta.at("kappa"), 0.75);
}

TEST(ThmD, GaussianTranslationMap) {
    DensityFamilySpec spec;
    spec.phi = Density::Gauss;
    spec.shift = [](int64_t n) { return std::sin(static_cast<double>(n)); };
    spec.bound = 1.0;
    spec.lipschitz = 1.0;
    spec.lipschitz_of_log = false;
    auto c = build_thmD(spec);
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        int64_t g = static_cast<int64_t>(rng.below(201)) - 100;
        double x = 10 * (rng.uniform() - 0.5);
        double lhs = std::get<DensityMeasure>(c.family.at(g)).log_pdf(x);
        double y = x + std::sin(static_cast<double>(g));
        EXPECT_NEAR(lhs, -0.5 * std::log(2 * std::numbers::pi) - 0.5 * y * y, 1e-12);
    }
}

TEST(ThmD, RejectsWrongLipschitzAndUnbounded) {
    auto spec = laplace_thmD_spec();
    EXPECT_NO_THROW(build_thmD(spec));
    spec.lipschitz = 2.0;
    EXPECT_THROW(build_thmD(spec), std::runtime_error);
    spec = laplace_thmD_spec();
    spec.bound = kInf;
    EXPECT_THROW(build_thmD(spec), std::invalid_argument);
}

TEST(ThmD, LaplaceTailBoundCoversRemainder) {
    auto c = build_thmD(laplace_thmD_spec());
    for (int64_t g : {1, 3}) {
        double far = kakutani_sum(c.family, z_elem(g), Window::interval(-400, 400)).partial;
        auto near = kakutani_sum(c.family, z_elem(g), Window::interval(-40, 40));
        EXPECT_LE(far - near.partial, near.tail);
    }
}

TEST(AlmostInvariantSet, Membership) {
    auto W = w_a_set(3);
    Group G(GroupSpec{GroupKind::FreeProdZ_Za, 1, 3});
    EXPECT_TRUE(W(G.identity()));
    EXPECT_EQ(w_symdiff(G, G.t_pow(1), 5), 1u);
    EXPECT_EQ(w_symdiff(G, G.s_pow(1), 5), 0u);
    EXPECT_THROW(w_a_set(1), std::invalid_argument);
}

TEST(AlmostInvariantSet, CocycleNormsScaleWithWordLength) {
    for (double kappa : {0.5, 1.0}) {
        Group G(GroupSpec{GroupKind::FreeProdZ_Za, 1, 2});
        auto norms = remark62_norms(kappa, 2, 4);
        auto ball = G.ball(4), region = G.ball(5);
        ASSERT_EQ(norms.size(), ball.size());
        for (std::size_t i = 0; i < ball.size(); ++i)
            EXPECT_DOUBLE_EQ(norms[i], kappa * kappa * static_cast<double>(w_symdiff(G, ball[i], region)));
    }
}

TEST(CauchyConstants, Values) {
    auto z = remark62_constants(0.0);
    EXPECT_EQ(z.beta, 0.0);
    EXPECT_EQ(z.alpha, 0.0);
    auto one = remark62_constants(1.0);
    EXPECT_NEAR(one.beta, 0.223144, 5e-7);
    EXPECT_NEAR(one.alpha, 1.287854, 5e-7);
    auto two = remark62_constants(2.0);
    EXPECT_NEAR(two.beta, std::log(2.0), 1e-15);
    EXPECT_NEAR(two.alpha, std::log(19.0), 1e-14);
}

TEST(CauchyConstants, BetaMatchesQuadrature) {
    for (double kappa : {0.25, 0.5, 1.0, 2.0, 4.0}) {
        auto r = remark62_constants(kappa);
        EXPECT_NEAR(r.beta, r.beta_quadrature, 1e-6) << kappa;
    }
}

TEST(CauchyConstants, AlphaClosedFormIsLogTheta) {
    // The closed form equals log theta(kappa); the half-log definition is half of it.
    for (double kappa : {0.25, 0.5, 1.0, 2.0}) {
        auto r = remark62_constants(kappa);
        EXPECT_NEAR(r.alpha, std::log(theta_quadrature(Density::Cauchy2, kappa)), 1e-6) << kappa;
        EXPECT_NEAR(r.alpha_quadrature, 0.5 * r.alpha, 1e-6) << kappa;
    }
}
