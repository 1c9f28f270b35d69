#include "qdal/report.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "qdal/loop.hpp"
#include "qdal/runner.hpp"
#include "qdal/svg.hpp"

namespace qdal {

namespace fs = std::filesystem;

namespace {

struct Inventory {
    std::vector<Strategy> strategies;
    std::vector<std::uint64_t> seeds;
};

// Strategy and seed grid from the manifest, or from the run files if the manifest is unusable.
Inventory inventory(const fs::path& dir, std::vector<std::string>& gaps) {
    Inventory inv;
    std::ifstream in(dir / "manifest.json");
    if (in) {
        try {
            const auto j = nlohmann::json::parse(in);
            for (const auto& name : j.at("config").at("strategies")) {
                const auto s = parse_strategy(name.get<std::string>());
                if (!s) {
                    throw std::runtime_error("unknown strategy " + name.dump());
                }
                inv.strategies.push_back(*s);
            }
            inv.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
            if (j.value("status", "") != "complete") {
                gaps.push_back("manifest status is '" + j.value("status", "") + "'");
            }
            return inv;
        } catch (const std::exception& e) {
            gaps.push_back(std::string("manifest.json unreadable: ") + e.what());
            inv = {};
        }
    } else {
        gaps.push_back("manifest.json missing");
    }
    if (!fs::is_directory(dir / "runs")) {
        return inv;
    }
    for (const auto& entry : fs::directory_iterator(dir / "runs")) {
        const auto stem = entry.path().stem().string();
        const auto pos = stem.rfind("_seed");
        if (entry.path().extension() != ".csv" || pos == std::string::npos) {
            continue;
        }
        const auto s = parse_strategy(stem.substr(0, pos));
        if (!s) {
            continue;
        }
        try {
            const auto seed = std::stoull(stem.substr(pos + 5));
            if (std::find(inv.strategies.begin(), inv.strategies.end(), *s) == inv.strategies.end()) {
                inv.strategies.push_back(*s);
            }
            if (std::find(inv.seeds.begin(), inv.seeds.end(), seed) == inv.seeds.end()) {
                inv.seeds.push_back(seed);
            }
        } catch (const std::exception&) {
        }
    }
    std::sort(inv.strategies.begin(), inv.strategies.end());
    std::sort(inv.seeds.begin(), inv.seeds.end());
    return inv;
}

bool same_grid(const std::vector<MetricsRow>& a, const std::vector<MetricsRow>& b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](const auto& x, const auto& y) {
               return x.labeled_size == y.labeled_size;
           });
}

std::string prefix(Strategy s, const std::string& run, const MetricsRow& r) {
    return std::string(strategy_name(s)) + ',' + run + ',' + std::to_string(r.round) + ',' +
           std::to_string(r.labeled_size);
}

std::string prefix(Strategy s, const std::string& run, const AggregateRow& r) {
    return std::string(strategy_name(s)) + ',' + run + ',' + std::to_string(r.round) + ',' +
           std::to_string(r.labeled_size);
}

void write_file(const fs::path& path, const std::string& text, ReportSummary& summary) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write '" + path.string() + "'");
    }
    out << text;
    summary.files.push_back(path);
}

}  // namespace

ReportSummary cmd_report(const fs::path& results_dir, bool svg) {
    ReportSummary summary;
    if (!fs::is_directory(results_dir)) {
        summary.exit_code = kExitConfigError;
        summary.gaps.push_back("results directory '" + results_dir.string() + "' does not exist");
        return summary;
    }
    summary.report_dir = results_dir / "report";
    fs::create_directories(summary.report_dir);
    auto& gaps = summary.gaps;
    if (fs::exists(results_dir / "FAILED")) {
        gaps.push_back("results directory carries a FAILED marker");
    }
    const Inventory inv = inventory(results_dir, gaps);

    std::map<Strategy, std::vector<LearningCurve>> curves;
    for (const auto s : inv.strategies) {
        auto& group = curves[s];
        for (const auto seed : inv.seeds) {
            const auto path = results_dir / "runs" / (run_file_stem(s, seed) + ".csv");
            if (!fs::exists(path)) {
                gaps.push_back("missing run " + path.filename().string());
                continue;
            }
            try {
                LearningCurve c;
                c.strategy = s;
                c.run_seed = seed;
                c.rows = read_run_csv(path);
                if (c.rows.empty()) {
                    gaps.push_back("empty run " + path.filename().string());
                    continue;
                }
                if (!group.empty() && !same_grid(group.front().rows, c.rows)) {
                    gaps.push_back("incomplete run " + path.filename().string() + " (" +
                                   std::to_string(c.rows.size()) + " of " +
                                   std::to_string(group.front().rows.size()) + " rounds)");
                    continue;
                }
                group.push_back(std::move(c));
            } catch (const std::exception& e) {
                gaps.push_back(e.what());
            }
        }
    }

    std::map<Strategy, std::vector<AggregateRow>> means;
    for (const auto& [s, group] : curves) {
        means[s] = aggregate_curves(group);
    }

    std::string lc = "strategy,run,round,labeled_size,discrete_rmse,se\n";
    std::string dist = "strategy,run,round,labeled_size,dist_l0,dist_l1,dist_l2\n";
    std::string plr = "strategy,run,round,labeled_size,level,rmse,se\n";
    for (const auto& [s, group] : curves) {
        for (const auto& c : group) {
            const auto run = std::to_string(c.run_seed);
            for (const auto& r : c.rows) {
                lc += prefix(s, run, r) + ',' + format_number(r.discrete_rmse) + ",\n";
                dist += prefix(s, run, r);
                for (const double d : r.labeled_level_dist) {
                    dist += ',' + format_number(d);
                }
                dist += '\n';
                for (int k = 0; k < kNumLevels; ++k) {
                    plr += prefix(s, run, r) + ',' + std::to_string(k) + ',' +
                           (r.per_level_rmse[k] ? format_number(*r.per_level_rmse[k]) : std::string()) + ",\n";
                }
            }
        }
        for (const auto& a : means[s]) {
            lc += prefix(s, "mean", a) + ',' + format_number(a.discrete_rmse.mean) + ',' +
                  format_number(a.discrete_rmse.se) + '\n';
            dist += prefix(s, "mean", a);
            for (const auto& d : a.labeled_level_dist) {
                dist += ',' + format_number(d.mean);
            }
            dist += '\n';
            for (int k = 0; k < kNumLevels; ++k) {
                const auto& p = a.per_level_rmse[k];
                plr += prefix(s, "mean", a) + ',' + std::to_string(k) + ',' +
                       (p ? format_number(p->mean) : std::string()) + ',' + (p ? format_number(p->se) : std::string()) +
                       '\n';
            }
        }
    }

    // Paired per seed against Uniform on the same seed.
    std::string gain = "strategy,run,round,labeled_size,active_gain,se\n";
    std::map<Strategy, std::vector<std::pair<double, std::vector<double>>>> gain_means;  // x, values
    const auto uni_it = curves.find(Strategy::uniform);
    if (uni_it == curves.end() || uni_it->second.empty()) {
        if (!curves.empty()) {
            gaps.push_back("no uniform runs: active gain not computed");
        }
    } else {
        for (const auto& [s, group] : curves) {
            std::vector<std::vector<double>> per_round;
            std::vector<const MetricsRow*> grid;
            for (const auto& c : group) {
                const auto partner = std::find_if(uni_it->second.begin(), uni_it->second.end(),
                                                  [&](const LearningCurve& u) { return u.run_seed == c.run_seed; });
                if (partner == uni_it->second.end()) {
                    gaps.push_back("no uniform partner for " + run_file_stem(s, c.run_seed));
                    continue;
                }
                if (!same_grid(partner->rows, c.rows)) {
                    gaps.push_back("grid mismatch with uniform for " + run_file_stem(s, c.run_seed));
                    continue;
                }
                const auto g = active_gain(c, *partner);
                per_round.resize(g.size());
                grid.resize(g.size());
                for (std::size_t i = 0; i < g.size(); ++i) {
                    gain += prefix(s, std::to_string(c.run_seed), c.rows[i]) + ',' + format_number(g[i]) + ",\n";
                    per_round[i].push_back(g[i]);
                    grid[i] = &c.rows[i];
                }
            }
            for (std::size_t i = 0; i < per_round.size(); ++i) {
                const auto m = mean_se(per_round[i]);
                gain += prefix(s, "mean", *grid[i]) + ',' + format_number(m.mean) + ',' + format_number(m.se) + '\n';
            }
        }
    }

    std::string base = "baseline,runs,discrete_rmse,se\n";
    std::map<std::string, std::vector<double>> baseline_values;
    if (std::ifstream in(results_dir / "baselines.csv"); in) {
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            std::istringstream fields(line);
            std::string name, seed, rmse;
            if (std::getline(fields, name, ',') && std::getline(fields, seed, ',') && std::getline(fields, rmse, ',')) {
                try {
                    baseline_values[name].push_back(std::stod(rmse));
                } catch (const std::exception&) {
                    gaps.push_back("unreadable baselines.csv line: " + line);
                }
            }
        }
        for (const auto& [name, values] : baseline_values) {
            const auto m = mean_se(values);
            base += name + ',' + std::to_string(values.size()) + ',' + format_number(m.mean) + ',' +
                    format_number(m.se) + '\n';
        }
    } else {
        gaps.push_back("baselines.csv missing");
    }

    try {
        const auto& d = summary.report_dir;
        write_file(d / "learning_curves.csv", lc, summary);
        write_file(d / "active_gain.csv", gain, summary);
        write_file(d / "level_distribution.csv", dist, summary);
        write_file(d / "per_level_rmse.csv", plr, summary);
        write_file(d / "baselines_summary.csv", base, summary);

        if (svg) {
            svg::LineChart curve{"Learning curves", "labeled examples", "discrete RMSE", {}};
            svg::LineChart hard{"Share of level 2 in the labeled set", "labeled examples", "share", {}};
            svg::LineChart levels{"Per-level RMSE (final round)", "level", "RMSE", {}};
            for (const auto& [s, rows] : means) {
                svg::Series a{std::string(strategy_name(s)), {}, {}}, b = a, c = a;
                for (const auto& r : rows) {
                    a.x.push_back(static_cast<double>(r.labeled_size));
                    a.y.push_back(r.discrete_rmse.mean);
                    b.x.push_back(static_cast<double>(r.labeled_size));
                    b.y.push_back(r.labeled_level_dist[2].mean);
                }
                if (!rows.empty()) {
                    for (int k = 0; k < kNumLevels; ++k) {
                        if (const auto& p = rows.back().per_level_rmse[k]) {
                            c.x.push_back(k);
                            c.y.push_back(p->mean);
                        }
                    }
                }
                curve.series.push_back(std::move(a));
                hard.series.push_back(std::move(b));
                levels.series.push_back(std::move(c));
            }
            svg::LineChart gains{"Active gain over Uniform", "labeled examples", "RMSE(uniform) - RMSE(strategy)", {}};
            std::istringstream rows(gain);
            std::string line;
            std::getline(rows, line);
            std::map<std::string, svg::Series> by_strategy;
            while (std::getline(rows, line)) {
                std::vector<std::string> f;
                std::istringstream fields(line);
                for (std::string x; std::getline(fields, x, ',');) {
                    f.push_back(x);
                }
                if (f.size() >= 5 && f[1] == "mean") {
                    auto& series = by_strategy[f[0]];
                    series.name = f[0];
                    series.x.push_back(std::stod(f[3]));
                    series.y.push_back(std::stod(f[4]));
                }
            }
            for (auto& [name, series] : by_strategy) {
                gains.series.push_back(std::move(series));
            }
            write_file(d / "learning_curves.svg", svg::render(curve), summary);
            write_file(d / "active_gain.svg", svg::render(gains), summary);
            write_file(d / "level_distribution.svg", svg::render(hard), summary);
            write_file(d / "per_level_rmse.svg", svg::render(levels), summary);
        }

        const auto gaps_path = d / "gaps.txt";
        if (gaps.empty()) {
            fs::remove(gaps_path);
        } else {
            std::string text;
            for (const auto& g : gaps) {
                text += g + '\n';
            }
            write_file(gaps_path, text, summary);
        }
    } catch (const std::exception& e) {
        summary.exit_code = kExitRuntimeFailure;
        gaps.push_back(e.what());
    }
    return summary;
}

}  // namespace qdal
