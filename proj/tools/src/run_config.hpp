#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ssg/kernels.hpp"

namespace ssg::cli {

struct SeriesSettings {
  std::int64_t budget = 1 << 16;
  std::uint64_t seed = 1;
  std::vector<int> orders{0, 1};
  std::vector<std::pair<std::string, std::string>> correlations;
  std::vector<std::string> expectations;
  std::vector<double> quantumHbar;  // extra quantum rows for each correlation pair
};

struct QTableSettings {
  int nT = 32;
  int nX = 64;
  int budget = 8;
  Interpolation interpolation = Interpolation::tricubic;
};

struct McSettings {
  double spacing = 0.02;
  std::int64_t samples = 10000;
  std::uint64_t seed = 1;
};

struct BoundsSettings {
  double p = 1.5;
  std::vector<int> orders{1, 2};
  int grid = 17;
  int conditioningGrid = 256;
  bool measure = true;
};

struct ExpandSettings {
  int order = 2;
  std::string observable = "field";
};

struct RunConfig {
  ModelParams params;
  std::map<std::string, SmearingFunction> smearings;
  std::string interaction = "g";
  SeriesSettings series;
  QTableSettings qTable;
  McSettings mc;
  BoundsSettings bounds;
  ExpandSettings expand;
  std::vector<std::string> commands;
  std::string outputDir = "out";

  const SmearingFunction& smearing(const std::string& name) const;
  const SmearingFunction& g() const { return smearing(interaction); }
};

// schema-checked parse; every problem is an Error of kind Config
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

// cross-field checks that depend on which commands run
void validate(const RunConfig& c, const std::vector<std::string>& commands);

extern const std::vector<std::string> kCommands;

}  // namespace ssg::cli
