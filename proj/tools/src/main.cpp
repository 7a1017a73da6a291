#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "ssg/errors.hpp"

namespace {

// tees progress to stderr and a timestamped run.log kept apart from the data files
class RunLog : public std::stringbuf {
 public:
  int sync() override {
    const std::string s = str();
    str("");
    std::cerr << s;
    if (file_.is_open()) {
      const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
      std::istringstream lines(s);
      for (std::string line; std::getline(lines, line);)
        file_ << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ") << " " << line << "\n";
      file_.flush();
    }
    return 0;
  }
  void open(const std::string& dir) {
    std::filesystem::create_directories(dir);
    file_.open(std::filesystem::path(dir) / "run.log", std::ios::app);
  }

 private:
  std::ofstream file_;
};

}  // namespace

int main(int argc, char** argv) {
  using namespace ssg::cli;
  CLI::App app{"Perturbative sine-Gordon toolkit: noise covariance, series coefficients, bounds and lattice Monte Carlo"};
  std::string configPath, outDir;
  std::uint64_t seed = 0;
  RunOptions opt;
  app.add_option("--config", configPath, "JSON run configuration");
  auto* outOpt = app.add_option("--out", outDir, "output directory (overrides output_dir)");
  auto* seedOpt = app.add_option("--seed", seed, "seed for quadrature and Monte Carlo (overrides the config)");
  app.add_flag("--strict", opt.strict, "exit 3 when any comparison z-score exceeds 3");

  const std::vector<std::pair<std::string, std::string>> subs = {
      {"compute-q", "build and save the Q table"},
      {"coeff", "expectation coefficients from the series"},
      {"corr", "two-point correlation coefficients from the series"},
      {"bounds", "term bounds with measured magnitudes"},
      {"mc", "lattice Monte Carlo estimates"},
      {"compare", "z-scores between series and Monte Carlo CSV outputs"},
      {"expand", "term graphs as JSON and DOT"}};
  std::map<std::string, CLI::App*> handles;
  int order = -1;
  std::string obs;
  for (const auto& [name, help] : subs) {
    auto* s = app.add_subcommand(name, help);
    s->fallthrough();
    handles[name] = s;
  }
  handles["expand"]->add_option("--order", order, "perturbative order");
  handles["expand"]->add_option("--obs", obs, "field, product, classical, qs, J or M");
  app.require_subcommand(0, 1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  std::string command;
  for (const auto& [name, s] : handles)
    if (s->parsed()) command = name;
  if (order >= 0) opt.expandOrder = order;
  if (!obs.empty()) opt.expandObservable = obs;

  RunLog buf;
  std::ostream log(&buf);
  try {
    RunConfig cfg;
    if (!configPath.empty()) {
      cfg = load_config(configPath);
    } else if (!command.empty() && command != "expand") {
      std::cerr << "error: " << command << " needs --config\n";
      return kConfigError;
    }
    if (*outOpt) cfg.outputDir = outDir;
    if (*seedOpt) cfg.series.seed = cfg.mc.seed = seed;

    std::vector<std::string> commands = command.empty() ? cfg.commands : std::vector<std::string>{command};
    if (commands.empty()) {
      std::cout << app.help();
      return kOk;
    }
    validate(cfg, commands);
    buf.open(cfg.outputDir);
    ExitCode result = kOk;
    for (const auto& c : commands) {
      log << "running " << c << std::endl;
      const ExitCode r = run_command(c, cfg, opt, log);
      log.flush();
      if (r != kOk) result = r;
    }
    return result;
  } catch (const ssg::Error& e) {
    log.flush();
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ssg::ErrorKind::Config ? kConfigError : kNumericFailure;
  } catch (const std::exception& e) {
    log.flush();
    std::cerr << "error: " << e.what() << "\n";
    return kNumericFailure;
  }
}
