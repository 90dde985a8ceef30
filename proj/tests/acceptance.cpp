// Acceptance gate: one PASS/FAIL line per criterion. With a numeric argument only that
// criterion runs; the exit status is nonzero iff a selected criterion fails.

#include <chrono>
#include <cstdio>
#include <deque>
#include <map>
#include <numbers>
#include <sstream>
#include <thread>

#include "nsb/report.hpp"
#include "nsb/tailflow.hpp"

using namespace nsb;

namespace {

constexpr uint64_t kSeed = 20240601;

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            if (!pass) detail << "; ";
            else detail.str("");
            pass = false;
            detail << what;
        }
    }
};

std::string fmt(double v) {
    std::ostringstream o;
    o.precision(10);
    o << v;
    return o.str();
}

double rel_err(double a, double b) { return std::fabs(a - b) / std::max(std::fabs(b), 1e-300); }

int threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

// 1. Closed forms against adaptive quadrature.
void closed_forms(Outcome& o) {
    const double tol = 1e-6;
    double worst = 0.0;
    for (double s : {0.5, 1.0, 2.0}) {
        double closed = 2.0 / 3.0 * std::exp(s) + 1.0 / 3.0 * std::exp(-2 * s);
        double e = rel_err(closed, theta_quadrature(Density::Laplace, s));
        worst = std::max(worst, e);
        o.require(e < tol, "theta_Laplace(" + fmt(s) + ") rel err " + fmt(e));
        o.require(rel_err(theta_laplace(s), closed) < 1e-15, "theta_laplace closed form mismatch");
    }
    for (double k : {0.5, 1.0, 2.0}) {
        auto r = remark62_constants(k);
        double eb = rel_err(r.beta, r.beta_quadrature), ea = rel_err(r.alpha, r.alpha_quadrature);
        worst = std::max({worst, eb, ea});
        o.require(eb < tol, "beta(" + fmt(k) + ") rel err " + fmt(eb));
        o.require(ea < tol, "alpha(" + fmt(k) + ") closed " + fmt(r.alpha) + " vs quadrature " + fmt(r.alpha_quadrature));
    }
    if (o.pass) o.detail << "worst rel err " << fmt(worst);
}

// 0-1 BFS over the Cayley graph; torsion steps are free.
uint64_t bfs_ball(int a, int64_t m) {
    Group G(GroupSpec{GroupKind::FreeProdZ_Za, 1, a});
    std::map<Element, int64_t> dist{{G.identity(), 0}};
    std::deque<Element> dq{G.identity()};
    while (!dq.empty()) {
        Element g = dq.front();
        dq.pop_front();
        int64_t d = dist[g];
        std::vector<std::pair<Element, int64_t>> nb;
        for (int k = 1; k < a; ++k) nb.push_back({G.mul(g, G.s_pow(k)), 0});
        nb.push_back({G.mul(g, G.t_pow(1)), 1});
        nb.push_back({G.mul(g, G.t_pow(-1)), 1});
        for (auto& [h, c] : nb) {
            if (d + c > m) continue;
            auto it = dist.find(h);
            if (it != dist.end() && it->second <= d + c) continue;
            dist[h] = d + c;
            if (c == 0) dq.push_front(h);
            else dq.push_back(h);
        }
    }
    return dist.size();
}

// 2. Free-product combinatorics.
void free_products(Outcome& o) {
    uint64_t checked = 0;
    for (int a : {2, 3}) {
        for (int64_t m = 0; m <= 5; ++m) {
            uint64_t c = Group::ball_count(a, m), b = bfs_ball(a, m);
            o.require(c == b, "ball_count(" + std::to_string(a) + "," + std::to_string(m) + ")=" + std::to_string(c) +
                                  " BFS=" + std::to_string(b));
        }
        Group G(GroupSpec{GroupKind::FreeProdZ_Za, 1, a});
        // Counted over the ball of radius |g| + 1.
        std::vector<std::vector<Element>> balls;
        for (int64_t r = 0; r <= 5; ++r) balls.push_back(G.ball(r));
        for (const auto& g : balls[4]) {
            ++checked;
            auto d = w_symdiff(G, g, balls[static_cast<std::size_t>(G.word_length(g)) + 1]);
            o.require(d == static_cast<uint64_t>(G.word_length(g)), "|gW sym W| != |g| at " + G.label(g));
        }
    }
    if (o.pass) o.detail << "12 ball counts, " << checked << " symmetric differences";
}

// 3. Inequality suites, 10^4 cases each.
void inequality_suites(Outcome& o) {
    const int n = 10000;
    Rng rng(kSeed);
    auto random_discrete = [&](int k) {
        std::vector<int64_t> lab(k);
        std::vector<double> w(k);
        for (int i = 0; i < k; ++i) {
            lab[i] = i;
            w[i] = 1e-3 + rng.uniform();
        }
        return DiscreteMeasure::from_weights(lab, w);
    };
    uint64_t chain = 0, push = 0, moment = 0, center = 0, sine = 0;
    for (int i = 0; i < n; ++i) {
        auto p = random_discrete(2 + static_cast<int>(rng.below(6)));
        auto q = random_discrete(static_cast<int>(p.size()));
        auto s = pair_stats(p, q);
        if (!(s.h2 <= s.neglog + 1e-15 && s.neglog <= s.d * (1 + 1e-12) + 1e-15)) ++chain;
    }
    for (int i = 0; i < n; ++i) {
        int k = 2 + static_cast<int>(rng.below(7));
        auto p = random_discrete(k), q = random_discrete(k);
        std::vector<int64_t> assign(static_cast<std::size_t>(k));
        uint64_t buckets = 1 + rng.below(static_cast<uint64_t>(k));
        for (auto& v : assign) v = static_cast<int64_t>(rng.below(buckets));
        auto pi = [&](int64_t l) { return assign[static_cast<std::size_t>(l)]; };
        if (d_divergence(pushforward(p, pi), pushforward(q, pi)) > d_divergence(p, q) + 1e-12) ++push;
    }
    for (int i = 0; i < n; ++i) {
        double a = 1e-3 + 0.998 * rng.uniform(), b = 1e-3 + 0.998 * rng.uniform();
        auto mb = two_point_moment_bound(a, b);
        double direct = std::exp(std::pow(zeta_map(a) - zeta_map(b), 2));
        if (rel_err(mb.bound, direct) > 1e-12 || mb.moment > direct * (1 + 1e-12)) ++moment;
    }
    for (int i = 0; i < n; ++i) {
        int k = 1 + static_cast<int>(rng.below(12));
        double spread = std::pow(10.0, 2 * rng.uniform() - 1.5);
        std::vector<double> x(static_cast<std::size_t>(k)), w(static_cast<std::size_t>(k));
        for (int j = 0; j < k; ++j) {
            x[j] = spread * (rng.uniform() - 0.5) * 8;
            w[j] = rng.uniform() + 1e-3;
        }
        double kappa = std::array<double, 3>{0.5, 1.0, 2.0}[rng.below(3)];
        auto m = LineMeasure::from(x, w);
        auto c = center_measure(m, kappa);
        double eps = 0.0, lhs = 0.0;
        for (std::size_t u = 0; u < m.atoms.size(); ++u) {
            double d = std::clamp(m.atoms[u] - c.a, -kappa, kappa);
            lhs += m.probs[u] * d * d;
            for (std::size_t v = 0; v < m.atoms.size(); ++v) {
                double e = std::clamp(m.atoms[u] - m.atoms[v], -kappa, kappa);
                eps += m.probs[u] * m.probs[v] * e * e;
            }
        }
        if (lhs > 8 * eps + 1e-12) ++center;
    }
    for (int i = 0; i < n; ++i) {
        double x = -5.0 + 10.0 * (i + 0.5) / n;
        double d = lattice_distance(x, 1.0), s = std::sin(std::numbers::pi * x);
        if (4 * d * d > s * s + 1e-12 || s * s > std::numbers::pi * std::numbers::pi * d * d + 1e-12) ++sine;
    }
    o.require(chain == 0, std::to_string(chain) + " divergence chain violations");
    o.require(push == 0, std::to_string(push) + " pushforward violations");
    o.require(moment == 0, std::to_string(moment) + " moment bound violations");
    o.require(center == 0, std::to_string(center) + " centering violations");
    o.require(sine == 0, std::to_string(sine) + " sine sandwich violations");
    if (o.pass) o.detail << "5 x 10^4 cases, 0 violations";
}

// 4. Product Hellinger identity against joint enumeration.
void product_identity(Outcome& o) {
    auto c = build_example55(0.5, 8);
    double worst = 0.0;
    for (int64_t r : {8, 16, 32, 64, 128, 256})
        for (int64_t g : {1, -1, 2, -2}) {
            Window w = Window::interval(-r, r);
            double prod = product_affinity(c.family, z_elem(g), w);
            double joint = joint_affinity(c.family, z_elem(g), w, 20'000'000);
            worst = std::max(worst, std::fabs(prod - joint));
        }
    o.require(worst <= 1e-12, "max |product - joint| = " + fmt(worst));
    if (o.pass) o.detail << "max |product - joint| = " << fmt(worst);
}

// 5. Prop 5.1 bound on random finite tables.
void prop51_bound(Outcome& o) {
    Rng rng(kSeed + 5);
    uint64_t bound_viol = 0, balance_viol = 0, checks = 0;
    double tightest = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        Prop51Spec s;
        s.name = "random";
        s.lambda = std::array<double, 3>{0.25, 0.5, 0.75}[trial % 3];
        std::vector<int64_t> lab;
        std::vector<double> w;
        for (int64_t x = 1; x <= 8; ++x) {
            lab.push_back(x);
            w.push_back(1e-2 + rng.uniform());
        }
        s.base = DiscreteMeasure::from_weights(lab, w);
        int entries = 1 + static_cast<int>(rng.below(40));
        for (int e = 0; e < entries; ++e) {
            std::vector<int64_t> sec;
            for (int64_t x = 1; x <= 8; ++x)
                if (rng.below(3) == 0) sec.push_back(x);
            s.table[static_cast<int64_t>(rng.below(65)) - 32] = sec;
        }
        auto c = build_prop51(s);
        int64_t g = 1 + static_cast<int64_t>(rng.below(8));
        Window cover = Window::interval(-48, 48);
        double rhs = 0.5 / (s.lambda * s.lambda) * zeta_symdiff(s, g);
        for (int64_t sg : {g, -g}) {
            ++checks;
            double C = c_of_g(c.family, z_elem(sg), cover).C;
            if (C > rhs * (1 + 1e-12) + 1e-15) ++bound_viol;
            if (rhs > 0) tightest = std::max(tightest, C / rhs);
            auto sm = zeta_setminus(s, sg);
            if (sm.zeta_forward != sm.zeta_backward || sm.forward != sm.backward) ++balance_viol;
        }
    }
    o.require(bound_viol == 0, std::to_string(bound_viol) + " bound violations");
    o.require(balance_viol == 0, std::to_string(balance_viol) + " setminus imbalances");
    if (o.pass) o.detail << checks << " checks, max C/bound = " << fmt(tightest);
}

// 6. Cocycle norm chain and cocycle identity.
void thmE_chain(Outcome& o) {
    auto s = make_thmE_schedule({1, 8, 64, 512, 4096});
    uint64_t chain = 0, pairs = 0;
    for (int k = 1; k <= 5; ++k) {
        auto root = static_cast<int64_t>(std::floor(std::sqrt(static_cast<double>(s.block(k)))));
        for (int64_t N = 1; N <= root; ++N) {
            ++pairs;
            auto c = thmE_cocycle_norm(s, N);
            if (!(c.upper <= thmE_chain_rhs(s, k, N))) ++chain;
        }
    }
    Rng rng(kSeed + 6);
    uint64_t ident = 0;
    for (int i = 0; i < 10000; ++i) {
        int64_t N = static_cast<int64_t>(rng.below(8193)) - 4096, M = static_cast<int64_t>(rng.below(8193)) - 4096;
        int64_t n = static_cast<int64_t>(rng.below(2'000'001)) - 1'000'000;
        if (std::fabs(thmE_c(s, N + M, n) - (thmE_c(s, N, n) + thmE_c(s, M, n - N))) > 1e-12) ++ident;
    }
    o.require(chain == 0, std::to_string(chain) + " of " + std::to_string(pairs) + " chain violations");
    o.require(ident == 0, std::to_string(ident) + " cocycle identity failures");
    if (o.pass) o.detail << pairs << " (k, N) pairs, 10^4 identity points";
}

// 7. Poincare exponent scaling on the almost invariant set family, a = 2.
void poincare_scaling(Outcome& o) {
    auto n1 = remark62_norms(1.0, 2, 8), n2 = remark62_norms(2.0, 2, 8);
    std::vector<double> g1, g2;
    for (int s = 1; s <= 8; ++s) {
        g1.push_back(s);
        g2.push_back(4.0 * s);
    }
    auto e1 = poincare_exponent(n1, g1), e2 = poincare_exponent(n2, g2);
    bool same_counts = true;
    for (std::size_t i = 0; i < e1.table.size(); ++i) same_counts &= e1.table[i].count == e2.table[i].count;
    o.require(same_counts, "count tables differ");
    o.require(rel_err(e2.estimate, e1.estimate / 4.0) <= 1e-15, "kappa=2 estimate " + fmt(e2.estimate) + " vs " + fmt(e1.estimate / 4.0));
    double target = 0.85 * std::log(3.0);
    o.require(e1.estimate >= target, "kappa=1 estimate " + fmt(e1.estimate) + " < " + fmt(target));
    if (o.pass) o.detail << "kappa=1 " << fmt(e1.estimate) << ", kappa=2 " << fmt(e2.estimate) << ", target " << fmt(target);
}

// 8. Tail boundary flow criteria on the reference walks.
void tailflow_suite(Outcome& o) {
    const int64_t N = 32768;
    auto rad = named_walk("rademacher");
    auto ore_r = ore_periodicity(rad, 2.0, N);
    o.require(ore_r.fires1, "Rademacher: Ore criterion 1 silent");
    o.require(!semifinite_criterion(rad, 1.0, N).fires, "Rademacher: semifinite fires");
    auto gd = named_walk("gauss-decay");
    o.require(semifinite_criterion(gd, 1.0, N).fires, "n^-2 variances: semifinite silent");
    o.require(ore_periodicity(gd, 2.0, N).fired.empty(), "n^-2 variances: an Ore criterion fires");
    auto con = ore_periodicity(named_walk("contaminated"), 2.0, N);
    o.require(con.fires3, "contaminated: criterion 3 silent");
    o.require(con.selection.sufficient && !con.selection.blocks.empty(), "contaminated: no subset certificate");
    auto lat = eigenvalue_criterion(named_walk("lattice"), 1.0, N);
    double sum = 0.0;
    for (double t : lat.terms) sum += t;
    o.require(sum == 0.0, "lattice: eigenvalue sum " + fmt(sum));
    if (o.pass) o.detail << "horizon " << N << ", certificate blocks " << con.selection.blocks.size();
}

// 9. Seed-pinned Monte Carlo shapes.
void monte_carlo(Outcome& o) {
    int th = threads();
    std::ostringstream d;
    {
        auto c = build_cor52(0.5);
        auto st = lattice_stat(c.family, std::log(0.5), {8, 16, 32, 64}, 500, kSeed, {1, -1}, th);
        bool dec = true;
        for (std::size_t i = 1; i < st.windows.size(); ++i) dec &= st.windows[i].median < st.windows[i - 1].median;
        double fin = st.windows.back().median;
        o.require(dec, "(a) medians not decreasing");
        o.require(fin < 0.05, "(a) final median " + fmt(fin));
        d << "(a) " << fmt(st.windows.front().median) << "->" << fmt(fin);
    }
    {
        auto f = build_thmD(laplace_thmD_spec()).family;
        d << " (b)";
        for (double p : ClassifyConfig{}.p_grid) {
            auto st = lattice_stat(f, p, {8, 16, 32, 64}, 300, kSeed, {1, -1}, th);
            double fin = st.windows.back().median;
            o.require(fin > 0.2, "(b) p=" + fmt(p) + " final median " + fmt(fin));
            d << " p=" << fmt(p) << ":" << fmt(fin);
        }
    }
    {
        auto c = build_example55(0.5, 8);
        std::vector<double> m;
        for (int64_t n : {4, 8, 16, 32}) m.push_back(recurrence_norm(c.family, n, whole_line().span, 400, kSeed, th).mean);
        bool dec = true;
        for (std::size_t i = 1; i < m.size(); ++i) dec &= m[i] < m[i - 1];
        o.require(dec, "(c) recurrence norms not decreasing");
        o.require(m.back() < 0.5 * m.front(), "(c) final " + fmt(m.back()) + " vs initial " + fmt(m.front()));
        d << " (c) " << fmt(m.front()) << "->" << fmt(m.back());
    }
    {
        auto s = make_thmE_schedule();
        auto fs = build_flip_schedule(s, 0.1, 0.2, 0.12, 0.18, 1 << 20);
        auto f = build_thmE(s);
        std::vector<int> bad(10000, 0);
        parallel_for(10000, th, [&](uint64_t i) {
            auto x = sample_configuration(f, {0, kFar >> 3}, derive_seed(kSeed, i));
            auto r = flip_probe(fs, x);
            double a = std::fabs(r.log_ratio);
            bool in_set = r.found && a == std::fabs(fs.log_r(r.m));
            bool in_range = a >= fs.a && a <= fs.b;
            bad[i] = !(in_set && in_range);
        });
        int nbad = 0;
        for (int v : bad) nbad += v;
        o.require(nbad == 0, "(d) " + std::to_string(nbad) + " probes outside the predicted set");
        d << " (d) " << 10000 - nbad << "/10000";
    }
    if (o.pass) o.detail << d.str();
    else o.detail << " [" << d.str() << "]";
}

// 10. Construction validators and the N-function set identities.
void validators(Outcome& o) {
    auto t53 = build_thm53(3);
    auto t54 = build_thm54(5);
    auto v53 = verify_thm53(t53), v54 = verify_thm54(t54);
    for (const auto& f : failing(v53)) o.require(false, "thm53: " + f);
    for (const auto& f : failing(v54)) o.require(false, "thm54: " + f);
    o.require(all_hold(t53.c.constraints) && all_hold(t54.c.constraints), "recorded constraint list fails");
    auto has = [](const std::vector<Constraint>& cs, const std::string& prefix) {
        return std::any_of(cs.begin(), cs.end(), [&](const Constraint& c) { return c.name.rfind(prefix, 0) == 0; });
    };
    o.require(has(v53, "rho_n >= 1") && has(v53, "rho_n <= 2") && has(v53, "int dmu_n/dmu_m dmu_n <= exp(3 gamma_n)"),
              "thm53 constraint list incomplete");
    o.require(has(v54, "(1-rho_n)|F_n\\F_{n-1}| = 1") && has(v54, "(1-delta_n)^k_n < 2^-n"), "thm54 constraint list incomplete");
    std::vector<Interval> F, G;
    for (const auto& L : t54.levels) {
        F.push_back(L.F);
        G.push_back(L.G);
    }
    auto rep = verify_lemma52(build_N_function(F, G), G, 64);
    o.require(rep.violations == 0, std::to_string(rep.violations) + " set identity violations");
    // Dense schedule where every G_n meets the checked ball.
    std::vector<Interval> Fd{{0, 0}, {-4, 4}, {-16, 16}, {-64, 64}, {-256, 256}};
    std::vector<Interval> Gd{{0, 0}, {-3, 3}, {-12, 12}, {-48, 48}, {-192, 192}};
    auto dense = verify_lemma52(build_N_function(Fd, Gd), Gd, 64);
    o.require(dense.violations == 0, std::to_string(dense.violations) + " set identity violations (dense)");
    if (o.pass)
        o.detail << v53.size() + v54.size() << " constraints, " << rep.checked + dense.checked << " set identity checks";
}

// 11. End-to-end suite with byte-identical reruns.
void pipeline(Outcome& o) {
    ClassifyConfig cfg;
    cfg.threads = threads();
    auto m = paper_examples_manifest();
    auto a = run_suite(m, cfg), b = run_suite(m, cfg);
    for (const auto& d : a.diffs) o.require(false, d);
    bool same = a.reports.size() == b.reports.size();
    for (std::size_t i = 0; same && i < a.reports.size(); ++i)
        same = render(a.reports[i].second, "json") == render(b.reports[i].second, "json");
    o.require(same, "reports differ on rerun");
    if (o.pass) {
        for (const auto& [name, rep] : a.reports) o.detail << name << "=" << rep["type"].get<std::string>() << " ";
        o.detail << "(reruns identical)";
    }
}

struct Criterion {
    int id;
    const char* name;
    void (*run)(Outcome&);
};

const Criterion kCriteria[] = {
    {1, "closed forms vs quadrature", closed_forms},
    {2, "free-product combinatorics", free_products},
    {3, "inequality suites", inequality_suites},
    {4, "product Hellinger identity", product_identity},
    {5, "almost invariant set bound", prop51_bound},
    {6, "cocycle norm chain", thmE_chain},
    {7, "Poincare scaling", poincare_scaling},
    {8, "tail flow criteria", tailflow_suite},
    {9, "Monte Carlo shapes", monte_carlo},
    {10, "construction validators", validators},
    {11, "pipeline end-to-end", pipeline},
};

}  // namespace

int main(int argc, char** argv) {
    int only = argc > 1 ? std::atoi(argv[1]) : 0;
    bool all_pass = true, ran = false;
    for (const auto& c : kCriteria) {
        if (only && c.id != only) continue;
        ran = true;
        Outcome o;
        auto t0 = std::chrono::steady_clock::now();
        try {
            c.run(o);
        } catch (const std::exception& e) {
            o.require(false, std::string("exception: ") + e.what());
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("criterion %2d %s  %s: %s (%.1fs)\n", c.id, o.pass ? "PASS" : "FAIL", c.name, o.detail.str().c_str(), secs);
        std::fflush(stdout);
        all_pass &= o.pass;
    }
    if (!ran) {
        std::fprintf(stderr, "unknown criterion %s\n", argv[1]);
        return 2;
    }
    return all_pass ? 0 : 1;
}
