#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "run_config.hpp"

namespace ssg::cli {

struct RunOptions {
  bool strict = false;
  std::optional<int> expandOrder;
  std::optional<std::string> expandObservable;
};

enum ExitCode { kOk = 0, kConfigError = 1, kNumericFailure = 2, kComparisonFailure = 3 };

// runs one subcommand, writing its files under cfg.outputDir; progress goes to log
ExitCode run_command(const std::string& command, const RunConfig& cfg, const RunOptions& opt, std::ostream& log);

struct CompareRow {
  std::string observable;
  int order = 0;
  double series = 0.0, seriesError = 0.0;
  double mc = 0.0, mcStderr = 0.0;
  double z = 0.0;
};
// joins series and mc CSV files on (observable, order); only the CSV contracts are read
std::vector<CompareRow> compare_csv(const std::vector<std::string>& seriesFiles, const std::string& mcFile);

std::string correlation_id(const std::string& f1, const std::string& f2);
std::string expectation_id(const std::string& f);

}  // namespace ssg::cli
