#pragma once

// `report` subcommand: tidy figure-data CSVs computed from a results directory.
//
// Written to <results>/report/:
//   learning_curves.csv     strategy,run,round,labeled_size,discrete_rmse,se
//   active_gain.csv         strategy,run,round,labeled_size,active_gain,se
//   level_distribution.csv  strategy,run,round,labeled_size,dist_l0,dist_l1,dist_l2
//   per_level_rmse.csv      strategy,run,round,labeled_size,level,rmse,se
//   baselines_summary.csv   baseline,runs,discrete_rmse,se
//   gaps.txt                missing or unreadable inputs, one per line (only if any)
// `run` is a seed or "mean". Every number is derived from runs/*.csv and baselines.csv.

#include <filesystem>
#include <string>
#include <vector>

namespace qdal {

struct ReportSummary {
    int exit_code = 0;
    std::filesystem::path report_dir;
    std::vector<std::string> gaps;
    std::vector<std::filesystem::path> files;
};

ReportSummary cmd_report(const std::filesystem::path& results_dir, bool svg = false);

}  // namespace qdal
