#include "qdal/runner.hpp"

#include <array>
#include <atomic>
#include <charconv>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

namespace qdal {

namespace fs = std::filesystem;

namespace {

std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write '" + path.string() + "'");
    }
    out << text;
}

std::string optional_field(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

std::optional<double> parse_optional(std::string_view field, const fs::path& path, std::size_t lineno) {
    if (field.empty()) {
        return std::nullopt;
    }
    double v = 0.0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
        throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": bad number '" +
                                 std::string(field) + "'");
    }
    return v;
}

struct Cell {
    enum class Kind { al, baseline } kind;
    Strategy strategy = Strategy::uniform;
    Baseline baseline = Baseline::random;
    std::uint64_t seed = 0;
};

}  // namespace

std::string run_file_stem(Strategy strategy, std::uint64_t seed) {
    return std::string(strategy_name(strategy)) + "_seed" + std::to_string(seed);
}

std::string format_number(double v) {
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

std::string run_csv_header() {
    return "round,labeled_size,discrete_rmse,rmse_l0,rmse_l1,rmse_l2,dist_l0,dist_l1,dist_l2,wall_time_s\n";
}

std::string format_run_csv_row(const MetricsRow& row) {
    std::string s = std::to_string(row.round) + ',' + std::to_string(row.labeled_size) + ',' +
                    format_number(row.discrete_rmse);
    for (const auto& r : row.per_level_rmse) {
        s += ',' + optional_field(r);
    }
    for (const double d : row.labeled_level_dist) {
        s += ',' + format_number(d);
    }
    s += ',' + format_number(row.wall_time_s) + '\n';
    return s;
}

std::vector<MetricsRow> read_run_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot read '" + path.string() + "'");
    }
    std::string line;
    std::getline(in, line);
    if (line + '\n' != run_csv_header()) {
        throw std::runtime_error(path.string() + ": unexpected header");
    }
    std::vector<MetricsRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        std::vector<std::string_view> f;
        std::string_view rest(line);
        while (true) {
            const auto pos = rest.find(',');
            f.push_back(rest.substr(0, pos));
            if (pos == std::string_view::npos) {
                break;
            }
            rest.remove_prefix(pos + 1);
        }
        if (f.size() != 10) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected 10 columns");
        }
        MetricsRow row;
        row.round = static_cast<int>(*parse_optional(f[0], path, lineno));
        row.labeled_size = static_cast<std::size_t>(*parse_optional(f[1], path, lineno));
        row.discrete_rmse = *parse_optional(f[2], path, lineno);
        for (int k = 0; k < kNumLevels; ++k) {
            row.per_level_rmse[k] = parse_optional(f[3 + k], path, lineno);
            row.labeled_level_dist[k] = parse_optional(f[6 + k], path, lineno).value_or(0.0);
        }
        row.wall_time_s = parse_optional(f[9], path, lineno).value_or(0.0);
        rows.push_back(row);
    }
    return rows;
}

std::vector<AggregateRow> aggregate_curves(std::span<const LearningCurve> curves) {
    if (curves.size() >= 2) {
        return aggregate_runs(curves);
    }
    if (curves.empty()) {
        return {};
    }
    std::vector<AggregateRow> out;
    for (const auto& r : curves.front().rows) {
        AggregateRow a;
        a.round = r.round;
        a.labeled_size = r.labeled_size;
        a.runs = 1;
        a.discrete_rmse = {r.discrete_rmse, 0.0};
        for (int k = 0; k < kNumLevels; ++k) {
            if (r.per_level_rmse[k]) {
                a.per_level_rmse[k] = MeanSe{*r.per_level_rmse[k], 0.0};
            }
            a.labeled_level_dist[k] = {r.labeled_level_dist[k], 0.0};
        }
        out.push_back(a);
    }
    return out;
}

std::string aggregate_csv(Strategy strategy, const std::vector<AggregateRow>& rows, bool with_header) {
    std::string s;
    if (with_header) {
        s += "strategy,round,labeled_size,runs,discrete_rmse_mean,discrete_rmse_se";
        for (int k = 0; k < kNumLevels; ++k) {
            s += ",rmse_l" + std::to_string(k) + "_mean,rmse_l" + std::to_string(k) + "_se";
        }
        for (int k = 0; k < kNumLevels; ++k) {
            s += ",dist_l" + std::to_string(k) + "_mean,dist_l" + std::to_string(k) + "_se";
        }
        s += '\n';
    }
    for (const auto& r : rows) {
        s += std::string(strategy_name(strategy)) + ',' + std::to_string(r.round) + ',' +
             std::to_string(r.labeled_size) + ',' + std::to_string(r.runs) + ',' +
             format_number(r.discrete_rmse.mean) + ',' + format_number(r.discrete_rmse.se);
        for (const auto& p : r.per_level_rmse) {
            s += ',' + (p ? format_number(p->mean) : std::string()) + ',' +
                 (p ? format_number(p->se) : std::string());
        }
        for (const auto& d : r.labeled_level_dist) {
            s += ',' + format_number(d.mean) + ',' + format_number(d.se);
        }
        s += '\n';
    }
    return s;
}

Diagnostics cmd_validate(const ExperimentConfig& config) {
    Diagnostics d;
    d.resolved = to_json(config);
    const auto& loop = config.loop;
    const auto& acq = loop.acquisition;
    if (acq.pool_subset_m < acq.batch_k) {
        d.fatal.push_back("pool_subset_m (" + std::to_string(acq.pool_subset_m) + ") is smaller than batch_k (" +
                          std::to_string(acq.batch_k) + ")");
    }
    if (acq.batch_k == 0) {
        d.fatal.push_back("batch_k must be positive");
    } else if (loop.final_labeled < loop.initial_labeled) {
        d.fatal.push_back("final_labeled is below initial_labeled");
    } else if ((loop.final_labeled - loop.initial_labeled) % acq.batch_k != 0) {
        d.fatal.push_back("acquisition schedule: final_labeled - initial_labeled = " +
                          std::to_string(loop.final_labeled - loop.initial_labeled) + " is not divisible by batch_k = " +
                          std::to_string(acq.batch_k));
    }
    try {
        RegressorConfig rc = loop.regressor;
        rc.input_dim = std::max<std::size_t>(rc.input_dim, 1);
        rc.validate();
    } catch (const std::exception& e) {
        d.fatal.push_back(e.what());
    }
    if (acq.mc_samples < 2 && std::any_of(config.strategies.begin(), config.strategies.end(),
                                          [](Strategy s) { return s != Strategy::uniform; })) {
        d.fatal.push_back("variance strategies need mc_samples >= 2");
    }
    if (!(acq.beta >= 0.0)) {
        d.fatal.push_back("beta must be non-negative");
    }

    std::optional<Dataset> dataset;
    try {
        dataset = materialize_dataset(config);
        d.notes.push_back("dataset: train " + std::to_string(dataset->train.size()) + ", val " +
                          std::to_string(dataset->val.size()) + ", test " + std::to_string(dataset->test.size()) +
                          ", dim " + std::to_string(dataset->dim));
    } catch (const std::exception& e) {
        d.fatal.push_back(std::string("dataset: ") + e.what());
    }
    if (dataset && d.fatal.empty()) {
        try {
            loop.validate(&*dataset);
            const auto quota = apportion(loop.initial_labeled, dataset->level_distribution);
            d.notes.push_back("initial stratification: " + std::to_string(quota[0]) + "/" +
                              std::to_string(quota[1]) + "/" + std::to_string(quota[2]) + ", " +
                              std::to_string(loop.rounds()) + " acquisition rounds");
        } catch (const std::exception& e) {
            d.fatal.push_back(e.what());
        }
    }
    return d;
}

Diagnostics cmd_validate(const fs::path& config_path) {
    try {
        return cmd_validate(load_config(config_path));
    } catch (const std::exception& e) {
        Diagnostics d;
        d.fatal.push_back(e.what());
        return d;
    }
}

RunSummary cmd_run(const ExperimentConfig& config, const RunOptions& options) {
    std::ostream& log = options.log != nullptr ? *options.log : std::cerr;
    RunSummary summary;
    summary.results_dir = config.output_dir;

    if (config.isa) {
        kernels::set_active_isa(*config.isa);
    }

    // Configuration problems are reported before anything is written.
    Dataset dataset;
    try {
        if (config.strategies.empty()) {
            throw ConfigError("no strategies configured (valid strategies: " + valid_strategy_names() + ")");
        }
        dataset = materialize_dataset(config);
        LoopConfig lc = config.loop;
        lc.regressor.input_dim = dataset.dim;
        lc.validate(&dataset);
        lc.regressor.validate();
    } catch (const std::exception& e) {
        summary.exit_code = kExitConfigError;
        summary.errors.emplace_back(e.what());
        return summary;
    }

    const fs::path out = config.output_dir;
    fs::create_directories(out / "runs");
    fs::create_directories(out / "acquisitions");
    fs::remove(out / "FAILED");

    std::vector<Cell> cells;
    for (const auto s : config.strategies) {
        for (const auto seed : config.seeds) {
            cells.push_back({Cell::Kind::al, s, Baseline::random, seed});
        }
    }
    for (const auto b : config.baselines) {
        for (const auto seed : config.seeds) {
            cells.push_back({Cell::Kind::baseline, Strategy::uniform, b, seed});
        }
    }

    nlohmann::ordered_json manifest;
    manifest["manifest_version"] = 1;
    manifest["tool"] = "qdal";
    manifest["version"] = kVersion;
    manifest["status"] = "running";
    manifest["started_at"] = iso_timestamp();
    manifest["isa"] = std::string(kernels::isa_name(kernels::active_isa()));
    manifest["seeds"] = config.seeds;
    manifest["config"] = to_json(config);
    {
        nlohmann::ordered_json runs = nlohmann::ordered_json::array();
        nlohmann::ordered_json acqs = nlohmann::ordered_json::array();
        for (const auto& c : cells) {
            if (c.kind == Cell::Kind::al) {
                runs.push_back("runs/" + run_file_stem(c.strategy, c.seed) + ".csv");
                acqs.push_back("acquisitions/" + run_file_stem(c.strategy, c.seed) + ".jsonl");
            }
        }
        manifest["artifacts"] = {{"runs", runs},
                                 {"acquisitions", acqs},
                                 {"aggregate", "aggregate.csv"},
                                 {"baselines", "baselines.csv"}};
    }
    write_text(out / "manifest.json", manifest.dump(2) + '\n');

    std::vector<std::optional<LearningCurve>> curves(cells.size());
    std::vector<std::optional<MetricsRow>> baseline_rows(cells.size());
    std::vector<std::string> failures(cells.size());
    std::mutex log_mutex;
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            const auto& cell = cells[i];
            try {
                if (cell.kind == Cell::Kind::baseline) {
                    baseline_rows[i] = run_baseline(dataset, cell.baseline, config.loop, cell.seed);
                    if (!options.quiet) {
                        std::lock_guard lock(log_mutex);
                        log << "[" << baseline_name(cell.baseline) << " seed " << cell.seed
                            << "] discrete_rmse " << baseline_rows[i]->discrete_rmse << '\n';
                    }
                    continue;
                }
                LoopConfig lc = config.loop;
                lc.acquisition.strategy = cell.strategy;
                const auto stem = run_file_stem(cell.strategy, cell.seed);
                std::ofstream csv(out / "runs" / (stem + ".csv"), std::ios::binary);
                std::ofstream jsonl(out / "acquisitions" / (stem + ".jsonl"), std::ios::binary);
                if (!csv || !jsonl) {
                    throw std::runtime_error("cannot open result files for " + stem);
                }
                csv << run_csv_header() << std::flush;
                auto observer = [&](const MetricsRow& row, const AcquisitionRecord* record) {
                    if (record != nullptr) {
                        jsonl << record->to_json_line() << '\n' << std::flush;
                    }
                    csv << format_run_csv_row(row) << std::flush;
                    if (!options.quiet) {
                        std::lock_guard lock(log_mutex);
                        log << "[" << stem << "] round " << row.round << " labeled " << row.labeled_size
                            << " discrete_rmse " << row.discrete_rmse << '\n';
                    }
                };
                curves[i] = run_al(dataset, lc, cell.seed, observer);
            } catch (const std::exception& e) {
                failures[i] = e.what();
            }
        }
    };

    unsigned threads = config.threads != 0 ? config.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(cells.size()));
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 1; t < threads; ++t) {
            pool.emplace_back(worker);
        }
        worker();
    }

    std::string aggregate;
    bool header = true;
    for (const auto s : config.strategies) {
        std::vector<LearningCurve> done;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (cells[i].kind == Cell::Kind::al && cells[i].strategy == s && curves[i]) {
                done.push_back(*curves[i]);
            }
        }
        try {
            aggregate += aggregate_csv(s, aggregate_curves(done), header);
            header = false;
        } catch (const std::exception& e) {
            summary.errors.push_back(std::string("aggregate ") + std::string(strategy_name(s)) + ": " + e.what());
        }
    }
    if (header) {
        aggregate = aggregate_csv(Strategy::uniform, {}, true);
    }
    write_text(out / "aggregate.csv", aggregate);

    std::string baselines = "baseline,seed,discrete_rmse,rmse_l0,rmse_l1,rmse_l2,wall_time_s\n";
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (cells[i].kind == Cell::Kind::baseline && baseline_rows[i]) {
            const auto& r = *baseline_rows[i];
            baselines += std::string(baseline_name(cells[i].baseline)) + ',' + std::to_string(cells[i].seed) + ',' +
                         format_number(r.discrete_rmse);
            for (const auto& p : r.per_level_rmse) {
                baselines += ',' + optional_field(p);
            }
            baselines += ',' + format_number(r.wall_time_s) + '\n';
        }
    }
    write_text(out / "baselines.csv", baselines);

    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (!failures[i].empty()) {
            const auto& c = cells[i];
            const std::string name = c.kind == Cell::Kind::al ? run_file_stem(c.strategy, c.seed)
                                                              : std::string(baseline_name(c.baseline)) + "_seed" +
                                                                    std::to_string(c.seed);
            summary.errors.push_back(name + ": " + failures[i]);
        }
    }

    manifest["finished_at"] = iso_timestamp();
    if (summary.errors.empty()) {
        manifest["status"] = "complete";
    } else {
        manifest["status"] = "failed";
        manifest["errors"] = summary.errors;
        std::string text;
        for (const auto& e : summary.errors) {
            text += e + '\n';
        }
        write_text(out / "FAILED", text);
        summary.exit_code = kExitRuntimeFailure;
    }
    write_text(out / "manifest.json", manifest.dump(2) + '\n');
    return summary;
}

}  // namespace qdal
