#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "nsb/report.hpp"

namespace fs = std::filesystem;
using nsb::json;

namespace {

struct Globals {
    uint64_t seed = 20240601;
    int threads = 1;
    std::string out_dir;
    std::string format = "json";
};

json load_json(const std::string& arg) {
    if (!arg.empty() && arg.front() == '{') return json::parse(arg);
    std::ifstream in(arg);
    if (!in) throw std::runtime_error("cannot open " + arg);
    return json::parse(in);
}

// Writes to --out, else <out-dir>/<stem>.<format>, else stdout.
void emit(const Globals& g, const json& doc, const std::string& out, const std::string& stem) {
    std::string text = nsb::render(doc, g.format);
    std::string path = out;
    if (path.empty() && !g.out_dir.empty()) {
        fs::create_directories(g.out_dir);
        path = (fs::path(g.out_dir) / (stem + "." + g.format)).string();
    }
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << text;
}

std::vector<int64_t> parse_list(const std::string& s) {
    std::vector<int64_t> v;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) v.push_back(std::stoll(tok));
    return v;
}

json simulate(const Globals& g, const json& cfg, const std::string& stat, const std::vector<int64_t>& windows,
              uint64_t samples, std::optional<double> p_opt, const std::string& hist_csv) {
    json out{{"spec_version", nsb::kSpecVersion}, {"stat", stat}, {"seed", g.seed}, {"samples", samples}};
    if (stat == "flip") {
        auto blocks = cfg.value("blocks", std::vector<int64_t>{1, 8, 64, 512, 4096});
        auto sched = nsb::make_thmE_schedule(blocks);
        auto fsch = nsb::build_flip_schedule(sched, cfg.value("a", 0.1), cfg.value("b", 0.2), cfg.value("c", 0.12),
                                             cfg.value("d", 0.18), cfg.value("horizon", int64_t{1} << 20));
        auto fam = nsb::build_thmE(sched);
        std::map<int64_t, uint64_t> hist;
        std::vector<double> ratios(samples);
        std::vector<int64_t> ms(samples);
        nsb::parallel_for(samples, g.threads, [&](uint64_t i) {
            auto x = nsb::sample_configuration(fam, {0, nsb::kFar >> 3}, nsb::derive_seed(g.seed, i));
            auto r = nsb::flip_probe(fsch, x);
            ms[i] = r.found ? r.m : -1;
            ratios[i] = r.log_ratio;
        });
        uint64_t missing = 0;
        for (uint64_t i = 0; i < samples; ++i) {
            if (ms[i] < 0) ++missing;
            else ++hist[ratios[i] > 0 ? ms[i] : -ms[i]];
        }
        json h = json::array();
        for (auto& [m, c] : hist) h.push_back({{"m", std::llabs(m)}, {"direction", m > 0 ? "r" : "r^-1"}, {"count", c},
                                               {"log_ratio", (m > 0 ? 1 : -1) * fsch.log_r(std::llabs(m))}});
        out["n0"] = fsch.n0;
        out["interval"] = {fsch.a, fsch.b};
        out["missing"] = missing;
        out["histogram"] = h;
        if (!hist_csv.empty()) {
            std::ofstream f(hist_csv);
            f << "m,direction,count,log_ratio\n";
            for (auto& r : h) f << r["m"] << "," << r["direction"].get<std::string>() << "," << r["count"] << "," << r["log_ratio"] << "\n";
        }
        return out;
    }
    auto b = nsb::build_family(cfg);
    out["family"] = {{"name", b.family.name}, {"hash", b.hash}};
    out["caveats"] = b.family.caveats;
    if (stat == "lattice") {
        double p = p_opt ? *p_opt : (b.family.lambda ? std::log(*b.family.lambda) : 1.0);
        auto ls = nsb::lattice_stat(b.family, p, windows, samples, g.seed, {1, -1}, g.threads);
        out["lattice"] = nsb::to_json(ls);
        if (!hist_csv.empty()) {
            std::ofstream f(hist_csv);
            f << "radius,value\n";
            for (auto& w : ls.windows)
                for (double v : w.values) f << w.radius << "," << v << "\n";
        }
    } else if (stat == "recurrence") {
        json rows = json::array();
        nsb::Interval rw = b.family.class_backed() ? nsb::whole_line().span : nsb::Interval{-1024, 1024};
        for (auto n : windows) {
            auto r = nsb::recurrence_norm(b.family, n, rw, samples, nsb::derive_seed(g.seed, static_cast<uint64_t>(n)), g.threads);
            rows.push_back({{"n", n}, {"mean", r.mean}, {"stderr", r.stderr_}, {"normalization_error", r.worst_normalization}});
        }
        out["recurrence"] = rows;
    } else if (stat == "permflow") {
        if (!b.witness || !b.witness->nu) throw std::invalid_argument("permflow needs a family with a witness");
        json rows = json::array();
        std::vector<std::vector<double>> sums(samples);
        bool aggregated = b.family.class_backed();
        std::vector<nsb::Window> ws = b.windows;
        if (!aggregated) {
            ws.clear();
            for (auto r : windows) ws.push_back(nsb::Window::interval(-r, r));
        }
        nsb::parallel_for(samples, g.threads, [&](uint64_t i) {
            uint64_t s = nsb::derive_seed(g.seed, i);
            if (aggregated) {
                sums[i] = nsb::perm_flow_sample(b.family, *b.witness, ws, s);
            } else {
                int64_t R = ws.back().radius;
                auto x = nsb::sample_configuration(b.family, {-R, R}, s);
                sums[i] = nsb::perm_flow_sum(b.family, *b.witness, x, nsb::radii_of(ws));
            }
        });
        uint64_t settled = 0;
        for (auto& v : sums)
            if (v.size() >= 2 && std::fabs(v.back() - v[v.size() - 2]) < nsb::kCauchyIncrement) ++settled;
        out["windows"] = nsb::radii_of(ws);
        out["aggregated_by_class"] = aggregated;
        out["settled_fraction"] = static_cast<double>(settled) / static_cast<double>(samples);
        json first = json::array();
        for (std::size_t i = 0; i < std::min<std::size_t>(samples, 16); ++i) first.push_back(sums[i]);
        out["first_samples"] = first;
    } else {
        throw std::invalid_argument("unknown stat: " + stat);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bernoulli action toolkit: constructions, classification, simulation"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "master seed");
    app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--out-dir", g.out_dir, "directory for reports");
    app.add_option("--format", g.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));

    std::string family, out;
    auto* construct = app.add_subcommand("construct", "build a family and print its constraint list");
    construct->add_option("--family", family, "family config (file or inline JSON)")->required();
    construct->add_option("--out", out, "output file");

    uint64_t samples = 200;
    auto* classify = app.add_subcommand("classify", "run the classification pipeline");
    classify->add_option("--family", family, "family config (file or inline JSON)")->required();
    classify->add_option("--samples", samples, "Monte Carlo samples per statistic");
    classify->add_option("--out", out, "output file");

    std::string stat, windows = "4,8,16,32", hist_csv;
    std::optional<double> p;
    auto* simulate_cmd = app.add_subcommand("simulate", "Monte Carlo statistics");
    simulate_cmd->add_option("--family", family, "family config (file or inline JSON)")->required();
    simulate_cmd->add_option("--stat", stat, "statistic")->required()->check(CLI::IsMember({"lattice", "recurrence", "flip", "permflow"}));
    simulate_cmd->add_option("--windows", windows, "comma-separated window radii (or n for recurrence)");
    simulate_cmd->add_option("--samples", samples, "samples");
    simulate_cmd->add_option("--p", p, "lattice period");
    simulate_cmd->add_option("--out", out, "output file");
    simulate_cmd->add_option("--histogram-csv", hist_csv, "also write the raw histogram as CSV");

    std::string walk = "rademacher";
    int64_t N = 32768;
    double C = 2.0, kappa = 1.0, tp = 1.0;
    auto* tail = app.add_subcommand("tailflow", "tail boundary flow criteria for a reference walk");
    tail->add_option("--walk", walk, "rademacher | gauss-decay | contaminated | lattice");
    tail->add_option("--N", N, "number of steps");
    tail->add_option("--C", C, "truncation level");
    tail->add_option("--kappa", kappa, "cutoff for the semifinite criterion");
    tail->add_option("--p", tp, "period for the eigenvalue criterion");
    tail->add_option("--out", out, "output file");

    std::string manifest;
    auto* suite = app.add_subcommand("suite", "run a scenario manifest");
    suite->add_option("manifest", manifest, "manifest file, inline JSON, or paper-examples")->required();

    CLI11_PARSE(app, argc, argv);
    try {
        if (construct->parsed()) {
            auto b = nsb::build_family(load_json(family));
            emit(g, nsb::construction_json(b), out, b.family.name + "-construct");
        } else if (classify->parsed()) {
            nsb::ClassifyConfig cfg;
            cfg.seed = g.seed;
            cfg.samples = samples;
            cfg.threads = g.threads;
            auto b = nsb::build_family(load_json(family));
            emit(g, nsb::classify(b, cfg), out, b.family.name + "-classify");
        } else if (simulate_cmd->parsed()) {
            emit(g, simulate(g, load_json(family), stat, parse_list(windows), samples, p, hist_csv), out, "simulate-" + stat);
        } else if (tail->parsed()) {
            auto spec = nsb::named_walk(walk);
            json doc{{"spec_version", nsb::kSpecVersion},
                     {"walk", walk},
                     {"N", N},
                     {"ore", nsb::to_json(nsb::ore_periodicity(spec, C, N))},
                     {"semifinite", nsb::to_json(nsb::semifinite_criterion(spec, kappa, N))},
                     {"eigenvalue", nsb::to_json(nsb::eigenvalue_criterion(spec, tp, N))}};
            emit(g, doc, out, "tailflow-" + walk);
        } else if (suite->parsed()) {
            json m = manifest == "paper-examples" ? nsb::paper_examples_manifest() : load_json(manifest);
            nsb::ClassifyConfig cfg;
            cfg.seed = g.seed;
            cfg.threads = g.threads;
            auto res = nsb::run_suite(m, cfg);
            for (auto& [name, rep] : res.reports) {
                if (!g.out_dir.empty()) emit(g, rep, "", name);
                std::cout << name << ": " << rep["verdict"].get<std::string>() << "\n";
            }
            for (auto& d : res.diffs) std::cerr << "DIFF " << d << "\n";
            std::cout << (res.ok ? "suite ok" : "suite FAILED") << " (" << res.reports.size() << " scenarios)\n";
            return res.ok ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
