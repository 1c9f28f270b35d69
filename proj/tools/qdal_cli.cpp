// qdal: run, report on and validate active-learning experiments.

#include <iostream>

#include <CLI11.hpp>

#include "qdal/config.hpp"
#include "qdal/report.hpp"
#include "qdal/runner.hpp"

namespace {

int do_run(const std::string& config_path, const std::string& out, const std::string& seeds,
           const std::string& strategies, bool quiet, unsigned threads, const std::string& isa) {
    qdal::ExperimentConfig config;
    try {
        if (config_path.empty()) {
            config = qdal::default_config();
            qdal::apply_env_overrides(config);
        } else {
            config = qdal::load_config(config_path);
        }
        if (!out.empty()) {
            config.output_dir = out;
        }
        if (!seeds.empty()) {
            config.seeds = qdal::parse_seed_list(qdal::split_comma_list(seeds));
        }
        if (!strategies.empty()) {
            config.strategies = qdal::parse_strategy_list(qdal::split_comma_list(strategies));
        }
        if (threads != 0) {
            config.threads = threads;
        }
        if (!isa.empty()) {
            config.isa = qdal::kernels::parse_isa(isa);
            if (!config.isa) {
                throw qdal::ConfigError("--isa must be 'scalar' or 'avx2', got '" + isa + "'");
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return qdal::kExitConfigError;
    }

    qdal::RunOptions options;
    options.quiet = quiet;
    const auto summary = qdal::cmd_run(config, options);
    for (const auto& e : summary.errors) {
        std::cerr << "error: " << e << '\n';
    }
    if (summary.exit_code == qdal::kExitOk && !quiet) {
        std::cerr << "results written to " << summary.results_dir.string() << '\n';
    }
    return summary.exit_code;
}

int do_report(const std::string& dir, bool svg) {
    const auto summary = qdal::cmd_report(dir, svg);
    for (const auto& g : summary.gaps) {
        std::cerr << "gap: " << g << '\n';
    }
    for (const auto& f : summary.files) {
        std::cout << f.string() << '\n';
    }
    return summary.exit_code;
}

int do_validate(const std::string& config_path) {
    const auto d = qdal::cmd_validate(config_path);
    for (const auto& n : d.notes) {
        std::cerr << "note: " << n << '\n';
    }
    for (const auto& f : d.fatal) {
        std::cerr << "fatal: " << f << '\n';
    }
    if (!d.resolved.is_null()) {
        std::cout << d.resolved.dump(2) << '\n';
    }
    return d.ok() ? qdal::kExitOk : qdal::kExitConfigError;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Uncertainty-driven active learning for difficulty estimation", "qdal"};
    app.set_version_flag("--version", qdal::kVersion);
    app.require_subcommand(1);

    std::string config_path, out, seeds, strategies, isa, report_dir;
    bool quiet = false, svg = false;
    unsigned threads = 0;

    auto* run = app.add_subcommand("run", "Run the strategy x seed grid and write results");
    run->add_option("--config", config_path, "JSON config or run manifest (default: built-in desk-scale config)");
    run->add_option("--out", out, "Results directory");
    run->add_option("--seeds", seeds, "Comma-separated seeds");
    run->add_option("--strategies", strategies, "Comma-separated strategies");
    run->add_flag("--quiet", quiet, "Suppress progress output");
    run->add_option("--threads", threads, "Worker threads (0 = hardware concurrency)");
    run->add_option("--isa", isa, "Kernel ISA: scalar or avx2");

    auto* report = app.add_subcommand("report", "Write figure-data CSVs for a results directory");
    report->add_option("results_dir", report_dir, "Results directory")->required();
    report->add_flag("--svg", svg, "Also render SVG line charts");

    auto* validate = app.add_subcommand("validate", "Check a config and print it fully resolved");
    validate->add_option("--config", config_path, "JSON config")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? qdal::kExitOk : qdal::kExitConfigError;
    }

    if (*run) {
        return do_run(config_path, out, seeds, strategies, quiet, threads, isa);
    }
    if (*report) {
        return do_report(report_dir, svg);
    }
    return do_validate(config_path);
}
