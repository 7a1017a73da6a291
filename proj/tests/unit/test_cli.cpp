#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "run_config.hpp"
#include "ssg/errors.hpp"

using namespace ssg;
using namespace ssg::cli;
namespace fs = std::filesystem;

namespace {

nlohmann::json base() {
  return nlohmann::json::parse(R"({
    "model": {"m": 0, "a": 1.5, "t": -1, "sign_convention": "paper"},
    "smearings": {"g": [{"t": 0, "x": 0, "radius": 0.4, "amplitude": 3}],
                  "f1": [{"t": 0.5, "x": 0.1, "radius": 0.2}]},
    "series": {"budget": 4096, "orders": [0, 1], "expectations": ["f1"], "correlations": [["f1", "f1"]]},
    "mc": {"spacing": 0.05, "samples": 200, "seed": 3}
  })");
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::DegenerateConfiguration;  // sentinel: nothing thrown
}

}  // namespace

TEST(Cli, ParsesSnakeCaseConfig) {
  const RunConfig c = parse_config(base());
  EXPECT_EQ(c.params.a, 1.5);
  EXPECT_EQ(c.params.T, -1.0);
  EXPECT_EQ(c.params.signConvention, SignConvention::paper);
  EXPECT_EQ(c.series.budget, 4096);
  EXPECT_EQ(c.smearing("f1").bumps.front().amplitude, 1.0);
  EXPECT_EQ(c.mc.samples, 200);
}

TEST(Cli, RejectsBadConfigs) {
  auto with = [](auto edit) {
    auto j = base();
    edit(j);
    return kind_of([&] { parse_config(j); });
  };
  EXPECT_EQ(with([](auto& j) { j["model"]["mass"] = 1.0; }), ErrorKind::Config);
  EXPECT_EQ(with([](auto& j) { j["extra"] = 1; }), ErrorKind::Config);
  EXPECT_EQ(with([](auto& j) { j["series"]["expectations"] = {"nope"}; }), ErrorKind::Config);
  EXPECT_EQ(with([](auto& j) { j["model"]["a"] = "big"; }), ErrorKind::Config);
  EXPECT_EQ(with([](auto& j) { j["model"]["sign_convention"] = "other"; }), ErrorKind::Config);
  EXPECT_EQ(with([](auto& j) { j["commands"] = {"fly"}; }), ErrorKind::Config);
}

TEST(Cli, ValidatesAlphaAndDiamond) {
  RunConfig c = parse_config(base());
  EXPECT_NO_THROW(validate(c, {"bounds"}));
  c.params.a = 4.0;  // alpha = 16 / 4 pi > 1
  EXPECT_EQ(kind_of([&] { validate(c, {"bounds"}); }), ErrorKind::Config);
  EXPECT_NO_THROW(validate(c, {"corr"}));
  c.series.quantumHbar = {0.5};
  EXPECT_NO_THROW(validate(c, {"corr"}));
  c.series.quantumHbar = {1.0};
  EXPECT_EQ(kind_of([&] { validate(c, {"corr"}); }), ErrorKind::Config);
  c = parse_config(base());
  c.smearings["g"] = single_bump(0.9, 0.0, 0.4);
  EXPECT_EQ(kind_of([&] { validate(c, {"mc"}); }), ErrorKind::Config);
}

TEST(Cli, CompareJoinsTheCsvContracts) {
  const fs::path dir = fs::temp_directory_path() / "ssg_cli_compare";
  fs::create_directories(dir);
  std::ofstream(dir / "corr.csv") << "order,observable,value_re,value_im,error,samples,seed,hbar\n"
                                  << "0,\"phi(a)phi(b)\",1.0,0,0.1,1024,1,0\n"
                                  << "0,\"phi(a)phi(b)\",9.0,0,0.1,1024,1,0.5\n"
                                  << "1,\"phi(a)phi(b)\",2.0,0,0.0,1024,1,0\n";
  std::ofstream(dir / "mc.csv") << "observable,order,mean,stderr,samples,seed,dt,dx,nT,nX\n"
                                << "\"phi(a)phi(b)\",0,1.3,0.2,100,1,0.1,0.1,5,5\n"
                                << "\"phi(a)phi(b)\",1,2.0,0.0,100,1,0.1,0.1,5,5\n"
                                << "\"phi(c)\",0,0.0,0.1,100,1,0.1,0.1,5,5\n";
  const auto rows = compare_csv({(dir / "corr.csv").string()}, (dir / "mc.csv").string());
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].observable, "phi(a)phi(b)");
  EXPECT_NEAR(rows[0].z, 0.3 / std::hypot(0.1, 0.2), 1e-12);
  EXPECT_EQ(rows[1].z, 0.0);
  EXPECT_EQ(kind_of([&] { compare_csv({}, (dir / "missing.csv").string()); }), ErrorKind::Config);
  fs::remove_all(dir);
}

TEST(Cli, PipelineAndStrictCompare) {
  RunConfig c = parse_config(base());
  c.outputDir = (fs::temp_directory_path() / "ssg_cli_pipeline").string();
  fs::remove_all(c.outputDir);
  std::ostringstream log;
  RunOptions opt;
  opt.strict = true;
  for (const char* cmd : {"coeff", "corr", "mc"}) EXPECT_EQ(run_command(cmd, c, opt, log), kOk) << cmd;
  EXPECT_EQ(run_command("compare", c, opt, log), kOk) << log.str();
  // a series value far from the Monte Carlo estimate trips --strict
  std::ofstream(fs::path(c.outputDir) / "corr.csv") << "order,observable,value_re,value_im,error,samples,seed,hbar\n"
                                                    << "0,\"phi(f1)phi(f1)\",1e3,0,1e-6,1,1,0\n";
  EXPECT_EQ(run_command("compare", c, opt, log), kComparisonFailure);
  opt.strict = false;
  EXPECT_EQ(run_command("compare", c, opt, log), kOk);
  opt.expandOrder = 2;
  EXPECT_EQ(run_command("expand", c, opt, log), kOk);
  std::ifstream dot(fs::path(c.outputDir) / "expand_field_n2.dot");
  std::stringstream ss;
  ss << dot.rdbuf();
  EXPECT_NE(ss.str().find("cluster_3"), std::string::npos);
  EXPECT_EQ(ss.str().find("cluster_4"), std::string::npos);
  fs::remove_all(c.outputDir);
}
