#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nsb/constructions.hpp"
#include "nsb/criteria.hpp"
#include "nsb/montecarlo.hpp"
#include "nsb/permwitness.hpp"
#include "nsb/tailflow.hpp"

namespace nsb {

using json = nlohmann::ordered_json;

inline constexpr const char* kSpecVersion = "1.0";

inline std::string fnv1a_hex(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream o;
    o << std::hex << std::setw(16) << std::setfill('0') << h;
    return o.str();
}

// A family plus whatever its construction knows about it.
struct BuiltFamily {
    MeasureFamily family;
    std::optional<TypeWitness> witness;
    std::vector<Window> windows;
    std::vector<Constraint> constraints;
    std::vector<std::string> substitutions;
    std::string expected_type;
    json config;
    std::string hash;
};

inline std::vector<Window> radius_windows(const Group& G, const std::vector<int64_t>& radii) {
    std::vector<Window> w;
    for (auto r : radii) w.push_back(Window::ball(G, r));
    return w;
}

inline BuiltFamily from_construction(Construction c) {
    BuiltFamily b;
    b.family = std::move(c.family);
    b.witness = std::move(c.witness);
    b.windows = std::move(c.windows);
    b.constraints = std::move(c.constraints);
    b.substitutions = std::move(c.substitutions);
    b.expected_type = std::move(c.expected_type);
    return b;
}

// Family configs: {"spec_version": "1.0", "family": name, ...parameters}.
inline BuiltFamily build_family(const json& cfg) {
    if (!cfg.contains("family")) throw std::invalid_argument("config needs a \"family\" field");
    if (cfg.contains("spec_version") && cfg["spec_version"] != kSpecVersion)
        throw std::invalid_argument("unsupported spec_version " + cfg["spec_version"].dump());
    std::string name = cfg["family"];
    BuiltFamily b;
    if (name == "constant") {
        double a = cfg.value("a", 1.0 / 3.0);
        Group G(GroupSpec{GroupKind::Z, 1, 2});
        b.family = constant_family(G, two_point(a), "nu^G");
        b.windows = radius_windows(G, {8, 16, 32, 64, 128, 256});
        TypeWitness w;
        w.nu = two_point(a);
        w.U = [](const Element&) { return std::vector<int64_t>{0, 1}; };
        w.class_constant = true;
        b.witness = w;
        b.expected_type = "II_1";
    } else if (name == "example55") {
        b = from_construction(build_example55(cfg.value("lambda", 0.5), cfg.value("K", 8)));
    } else if (name == "cor52") {
        b = from_construction(build_cor52(cfg.value("lambda", 0.5), cfg.value("levels", 30), cfg.value("labels", 40)));
    } else if (name == "prop51") {
        Prop51Spec s;
        s.name = "prop51-table";
        s.lambda = cfg.value("lambda", 0.5);
        std::vector<int64_t> lab;
        std::vector<double> w;
        for (auto& [k, v] : cfg.at("base").items()) {
            lab.push_back(std::stoll(k));
            w.push_back(v.get<double>());
        }
        s.base = DiscreteMeasure::from_weights(lab, w);
        for (auto& [k, v] : cfg.at("table").items()) s.table[std::stoll(k)] = v.get<std::vector<int64_t>>();
        b = from_construction(build_prop51(s));
        int64_t lo = s.table.empty() ? 0 : s.table.begin()->first, hi = s.table.empty() ? 0 : s.table.rbegin()->first;
        int64_t r = std::max(iabs(lo), iabs(hi)) + 1;
        for (int64_t k = 1; k <= 8; k *= 2) b.windows.push_back(Window::interval(-k * r, k * r));
        TypeWitness wit;
        wit.nu = Measure{s.base};
        wit.lattice_exact = true;
        wit.p = std::log(s.lambda);
        wit.t = [s](const Element& g) { return prop51_log_rho(s.base, s.lambda, prop51_section(s, g.coords.at(0))); };
        wit.log_rho = wit.t;
        b.witness = wit;
    } else if (name == "thm53") {
        auto t = build_thm53(cfg.value("levels", 3));
        b = from_construction(std::move(t.c));
    } else if (name == "thm54") {
        auto t = build_thm54(cfg.value("levels", 5));
        b = from_construction(std::move(t.c));
    } else if (name == "thmD-laplace") {
        b = from_construction(build_thmD(laplace_thmD_spec()));
        b.windows = radius_windows(b.family.group, {8, 16, 32, 64, 128, 256});
    } else if (name == "thmE") {
        auto blocks = cfg.value("blocks", std::vector<int64_t>{1, 8, 64, 512, 4096});
        auto s = make_thmE_schedule(blocks);
        b.family = build_thmE(s);
        b.windows = radius_windows(b.family.group, {8, 16, 32, 64, 128, 256});
        b.substitutions = b.family.caveats;
        b.expected_type = "III_1";
    } else if (name == "remark62") {
        int a = cfg.value("a", 2);
        b.family = build_remark62(cfg.value("kappa", 1.0), a);
        b.windows = radius_windows(b.family.group, {1, 2, 3, 4});
        b.expected_type = "";
    } else {
        throw std::invalid_argument("unknown family: " + name);
    }
    json canon = cfg;
    canon["spec_version"] = kSpecVersion;
    b.config = canon;
    b.hash = fnv1a_hex(canon.dump());
    for (const auto& c : b.substitutions)
        if (std::find(b.family.caveats.begin(), b.family.caveats.end(), c) == b.family.caveats.end())
            b.family.caveats.push_back(c);
    return b;
}

// ---------------------------------------------------------------------------
// JSON views.

inline json to_json(const Trend& t) {
    return json{{"radii", t.radii}, {"partial", t.partial}, {"increments", t.increments},
                {"cauchy", t.cauchy}, {"divergent", t.divergent}};
}

inline json to_json(const Constraint& c) {
    return json{{"name", c.name}, {"lhs", c.lhs}, {"relation", c.relation}, {"rhs", c.rhs}, {"tol", c.tol},
                {"holds", evaluate(c)}};
}

inline json num_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json to_json(const LatticeStat& s) {
    json w = json::array();
    for (const auto& x : s.windows)
        w.push_back({{"radius", x.radius}, {"median", x.median}, {"p90", x.p90}, {"samples", x.values.size()}});
    return json{{"p", s.p}, {"windows", w}};
}

inline json to_json(const CriterionReport& r) {
    return json{{"id", r.id}, {"trend", to_json(r.trend)}, {"fires", r.fires}};
}

inline json to_json(const OreReport& r) {
    return json{{"bounded_support", r.bounded_support},
                {"variance", to_json(r.variance)},
                {"outside_mass", to_json(r.outside_mass)},
                {"truncated_variance", to_json(r.truncated_variance)},
                {"selection", {{"sufficient", r.selection.sufficient}, {"blocks", r.selection.blocks.size()},
                               {"sum_a", r.selection.sum_a}, {"sum_b", r.selection.sum_b}}},
                {"selected_outside", to_json(r.selected_outside)},
                {"selected_variance", to_json(r.selected_variance)},
                {"fires", {{"1", r.fires1}, {"3", r.fires3}, {"4", r.fires4}, {"5", r.fires5}}},
                {"fired", r.fired}};
}

inline json construction_json(const BuiltFamily& b) {
    json cs = json::array();
    for (const auto& c : b.constraints) cs.push_back(to_json(c));
    json meta = json::object();
    for (const auto& [k, v] : b.family.meta) meta[k] = num_or_null(v);
    std::vector<int64_t> radii = radii_of(b.windows);
    return json{{"spec_version", kSpecVersion},
                {"family", b.family.name},
                {"hash", b.hash},
                {"config", b.config},
                {"expected_type", b.expected_type},
                {"all_constraints_hold", all_hold(b.constraints)},
                {"constraints", cs},
                {"substitutions", b.substitutions},
                {"caveats", b.family.caveats},
                {"windows", radii},
                {"meta", meta}};
}

// ---------------------------------------------------------------------------
// Classification.

struct ClassifyConfig {
    uint64_t seed = 20240601;
    uint64_t samples = 200;
    std::vector<int64_t> lattice_radii{8, 16, 32, 64};
    std::vector<double> p_grid{1.0, 0.5, 2.0};
    double lattice_threshold = 0.05;    // final median below this: lattice concentration
    double spread_threshold = 0.2;      // final median / |p| above this: no concentration
    int threads = 1;
};

inline std::string lambda_label(double lambda) {
    double inv = 1.0 / lambda;
    if (std::fabs(inv - std::round(inv)) < 1e-12) return "1/" + std::to_string(static_cast<int64_t>(std::round(inv)));
    std::ostringstream o;
    o << lambda;
    return o.str();
}

inline json classify(const BuiltFamily& b, const ClassifyConfig& cfg = {}) {
    const MeasureFamily& fam = b.family;
    bool on_Z = fam.group.spec().kind == GroupKind::Z;
    json rep;
    rep["spec_version"] = kSpecVersion;
    rep["family"] = {{"name", fam.name}, {"hash", b.hash}, {"config", b.config}};
    json tables = json::object();
    std::vector<std::string> caveats = fam.caveats;

    std::vector<Element> gens;
    if (on_Z) gens = {z_elem(1), z_elem(-1)};
    else if (fam.group.free_product()) gens = {fam.group.t_pow(1), fam.group.t_pow(-1), fam.group.s_pow(1)};
    else for (int i = 0; i < fam.group.spec().d; ++i) {
        Element e = fam.group.identity();
        e.coords[i] = 1;
        gens.push_back(e);
    }
    const Window& last = b.windows.back();

    // Nonsingularity.
    json kak = json::array();
    bool uncertified = false;
    for (const auto& g : gens) {
        Window w = fam.class_backed() ? whole_line() : last;
        auto k = kakutani_sum(fam, g, w);
        if (!std::isfinite(k.tail)) uncertified = true;
        kak.push_back({{"g", fam.group.label(g)}, {"window_radius", w.radius}, {"partial", k.partial},
                       {"tail", num_or_null(k.tail)}});
    }
    tables["kakutani"] = kak;
    if (uncertified) caveats.push_back("uncertified Kakutani tail");

    // Conservativeness.
    std::vector<double> s_grid{1, 2, 4, 8};
    int64_t ball_r = on_Z ? 16 : 3;
    auto gr = growth_report(fam, s_grid, ball_r);
    json rows = json::array();
    for (auto& r : gr.rows) rows.push_back({{"s", r.s}, {"count", r.count}, {"slope", r.slope}});
    tables["growth"] = {{"rows", rows}, {"slope_estimate", gr.slope_estimate}, {"saturated", gr.saturated},
                        {"verdict", gr.verdict}};
    {
        std::vector<std::pair<int64_t, double>> rn;
        Window cw = fam.class_backed() ? whole_line() : Window::ball(fam.group, 2 * ball_r);
        for (const auto& g : fam.group.ball(ball_r))
            rn.push_back({element_radius(fam.group, g), c_of_g(fam, g, cw).C});
        auto d = dissipativity_sum(rn);
        tables["dissipativity"] = {{"partial", d.partial}, {"shell_increments", d.shell_increments}};
    }
    if (on_Z) {
        json rec = json::array();
        Interval rw = fam.class_backed() ? whole_line().span : Interval{-256, 256};
        for (int64_t n : {4, 8, 16}) {
            auto r = recurrence_norm(fam, n, rw, cfg.samples / 2, derive_seed(cfg.seed, 17 + static_cast<uint64_t>(n)), cfg.threads);
            rec.push_back({{"n", n}, {"mean", r.mean}, {"stderr", r.stderr_}, {"normalization_error", r.worst_normalization}});
        }
        tables["recurrence"] = rec;
    }

    // Type II_1.
    Measure nu = fam.reference ? *fam.reference : fam.at(fam.identity());
    Trend ii1 = check_II1(fam, nu, b.windows);
    tables["II1"] = to_json(ii1);

    // Type II_inf.
    std::optional<IIinfVerdict> iiinf;
    if (b.witness && b.witness->U && b.witness->nu) {
        iiinf = check_IIinf(fam, *b.witness, b.windows, gens);
        json alpha = json::array();
        for (auto& a : iiinf->alpha) alpha.push_back({{"g", a.generator}, {"trend", to_json(a.trend)}, {"vanishes", a.vanishes}});
        tables["IIinf"] = {{"hellinger", to_json(iiinf->hellinger)}, {"outside_mu", to_json(iiinf->outside_mu)},
                           {"outside_nu", to_json(iiinf->outside_nu)}, {"alpha", alpha},
                           {"degenerate", iiinf->degenerate}, {"consistent", iiinf->consistent}};
    }

    // T-invariant sweep and lattice profile.
    std::vector<double> grid;
    if (fam.lambda) grid.push_back(std::log(*fam.lambda));
    for (double p : cfg.p_grid) grid.push_back(p);
    TypeWitness tw = b.witness ? *b.witness : TypeWitness{};
    json tinv = json::array(), lat = json::array();
    std::vector<bool> t_cauchy, concentrated, spread;
    for (double p : grid) {
        TypeWitness wp = tw;
        // Witness shifts are tied to the witness lattice; other p use phase centering.
        if (!(wp.p && *wp.p == p)) {
            wp.t = nullptr;
            wp.lattice_exact = false;
        }
        Trend t = check_T_invariant(fam, p, wp, b.windows);
        tinv.push_back({{"p", p}, {"trend", to_json(t)}});
        t_cauchy.push_back(t.cauchy);
        if (on_Z) {
            auto ls = lattice_stat(fam, p, cfg.lattice_radii, cfg.samples, cfg.seed, {1, -1}, cfg.threads);
            double med = ls.windows.back().median;
            json j = to_json(ls);
            j["final_median_over_p"] = med / std::fabs(p);
            lat.push_back(j);
            concentrated.push_back(med < cfg.lattice_threshold);
            spread.push_back(med / std::fabs(p) > cfg.spread_threshold);
        }
    }
    tables["T_invariant"] = tinv;
    if (on_Z) tables["lattice_stat"] = lat;

    std::optional<bool> alpha_vanishes;
    if (fam.lambda && tw.log_rho) {
        json al = json::array();
        bool all = true;
        double p = std::log(*fam.lambda);
        for (const auto& g : gens) {
            auto a = alpha_homomorphism(fam, tw.log_rho, p, g, b.windows, tw.class_constant);
            bool v = a.converged && std::fabs(a.value) < 1e-9;
            all = all && v;
            al.push_back({{"g", fam.group.label(g)}, {"raw", to_json(a.raw)}, {"mod_p", a.mod_p},
                          {"converged", a.converged}, {"value", a.value}, {"vanishes", v}});
        }
        tables["alpha"] = al;
        alpha_vanishes = all;
    }

    // Verdict.
    std::string verdict, type;
    std::vector<std::string> cites;
    if (ii1.cauchy) {
        verdict = "type II_1 (mu ~ nu^G evidence)";
        type = "II_1";
        cites = {"II1", "kakutani"};
    } else if (iiinf && iiinf->consistent) {
        verdict = "consistent with type II_inf";
        type = "II_inf";
        cites = {"IIinf", "II1"};
    } else if (fam.lambda && t_cauchy[0] && alpha_vanishes.value_or(false) && on_Z && concentrated[0]) {
        verdict = "consistent with type III_{" + lambda_label(*fam.lambda) + "}, lambda = " + lambda_label(*fam.lambda);
        type = "III_lambda";
        cites = {"T_invariant", "alpha", "lattice_stat", "II1"};
    } else if (on_Z && !ii1.cauchy && std::none_of(t_cauchy.begin(), t_cauchy.end(), [](bool v) { return v; }) &&
               std::all_of(spread.begin(), spread.end(), [](bool v) { return v; })) {
        verdict = "consistent with type III_1 (no lattice concentration at any grid p)";
        type = "III_1";
        cites = {"T_invariant", "lattice_stat", "II1"};
    } else {
        verdict = "undetermined beyond type-II_1 test";
        type = "undetermined";
        cites = {"II1"};
    }
    std::vector<std::string> notes;
    if (gr.saturated) {
        notes.push_back("ball-limited");
        verdict += " [ball-limited]";
    }
    rep["verdict"] = verdict;
    rep["type"] = type;
    if (type == "III_lambda") rep["lambda"] = *fam.lambda;
    rep["cites"] = cites;
    rep["annotations"] = notes;
    rep["p_grid"] = grid;
    rep["caveats"] = caveats;
    rep["tables"] = tables;
    return rep;
}

// ---------------------------------------------------------------------------
// Scenario manifests: {"spec_version": ..., "scenarios": [{"name", "family": {...},
// "expect": {"type": ..., "lambda": ...}}]}.

inline json paper_examples_manifest() {
    return json{{"spec_version", kSpecVersion},
                {"scenarios",
                 json::array({
                     {{"name", "nu-G"}, {"family", {{"family", "constant"}, {"a", 1.0 / 3.0}}}, {"expect", {{"type", "II_1"}}}},
                     {{"name", "example55"}, {"family", {{"family", "example55"}, {"lambda", 0.5}}},
                      {"expect", {{"type", "III_lambda"}, {"lambda", 0.5}}}},
                     {{"name", "thm54-desk"}, {"family", {{"family", "thm54"}, {"levels", 5}}}, {"expect", {{"type", "II_inf"}}}},
                     {{"name", "thmD-laplace"}, {"family", {{"family", "thmD-laplace"}}}, {"expect", {{"type", "III_1"}}}},
                 })}};
}

struct SuiteResult {
    bool ok = true;
    std::vector<std::string> diffs;
    std::vector<std::pair<std::string, json>> reports;  // scenario name, report
};

inline std::vector<std::string> compare_expectation(const std::string& name, const json& expect, const json& report) {
    std::vector<std::string> d;
    for (auto& [k, v] : expect.items()) {
        if (!report.contains(k)) {
            d.push_back(name + ": " + k + " expected " + v.dump() + " got <missing>");
            continue;
        }
        const json& got = report[k];
        bool same = v.is_number() && got.is_number() ? std::fabs(v.get<double>() - got.get<double>()) <= 1e-12 : v == got;
        if (!same) d.push_back(name + ": " + k + " expected " + v.dump() + " got " + got.dump());
    }
    return d;
}

inline SuiteResult run_suite(const json& manifest, const ClassifyConfig& cfg = {}) {
    SuiteResult res;
    if (!manifest.contains("scenarios")) return res;
    const json& sc = manifest["scenarios"];
    std::vector<json> reports(sc.size());
    std::vector<std::string> errors(sc.size());
    for (const auto& s : sc)
        if (!s.contains("name") || !s.contains("family")) throw std::invalid_argument("scenario needs name and family");
    ClassifyConfig inner = cfg;
    inner.threads = 1;
    parallel_for(sc.size(), cfg.threads, [&](uint64_t i) {
        try {
            reports[i] = classify(build_family(sc[i]["family"]), inner);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    for (std::size_t i = 0; i < sc.size(); ++i) {
        std::string name = sc[i]["name"];
        if (!errors[i].empty()) throw std::invalid_argument("scenario " + name + ": " + errors[i]);
        auto d = compare_expectation(name, sc[i].value("expect", json::object()), reports[i]);
        res.diffs.insert(res.diffs.end(), d.begin(), d.end());
        res.reports.push_back({name, reports[i]});
    }
    res.ok = res.diffs.empty();
    return res;
}

// Flattens a JSON document into path,value rows.
inline void flatten_csv(const json& j, const std::string& path, std::ostream& out) {
    if (j.is_object()) {
        for (auto& [k, v] : j.items()) flatten_csv(v, path.empty() ? k : path + "." + k, out);
    } else if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i) flatten_csv(j[i], path + "[" + std::to_string(i) + "]", out);
    } else {
        std::string v = j.is_string() ? j.get<std::string>() : j.dump();
        if (v.find_first_of(",\"\n") != std::string::npos) {
            std::string q = "\"";
            for (char c : v) q += c == '"' ? std::string("\"\"") : std::string(1, c);
            v = q + "\"";
        }
        out << path << "," << v << "\n";
    }
}

inline std::string render(const json& j, const std::string& format) {
    if (format == "csv") {
        std::ostringstream o;
        o << "path,value\n";
        flatten_csv(j, "", o);
        return o.str();
    }
    if (format != "json") throw std::invalid_argument("format must be json or csv");
    return j.dump(2) + "\n";
}

}  // namespace nsb
