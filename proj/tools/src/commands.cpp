#include "commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "ssg/algebra.hpp"
#include "ssg/bounds.hpp"
#include "ssg/errors.hpp"
#include "ssg/numerics.hpp"
#include "ssg/series.hpp"
#include "ssg/spde_mc.hpp"

namespace ssg::cli {

namespace fs = std::filesystem;

std::string correlation_id(const std::string& f1, const std::string& f2) { return "phi(" + f1 + ")phi(" + f2 + ")"; }
std::string expectation_id(const std::string& f) { return "phi(" + f + ")"; }

namespace {

std::ofstream open_out(const RunConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.outputDir);
  const fs::path path = fs::path(cfg.outputDir) / name;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Config, "cannot write " + path.string());
  return out;
}

std::shared_ptr<const QKernel> q_kernel(const RunConfig& cfg) {
  if (cfg.params.m == 0.0) return std::make_shared<QKernel>(QKernel::massless(cfg.params));
  auto table = std::make_shared<QTable>(build_q_table(cfg.params, cfg.qTable.nT, cfg.qTable.nX, cfg.qTable.budget,
                                                      cfg.qTable.interpolation, default_workers()));
  return std::make_shared<QKernel>(QKernel::tabulated(table));
}

SeriesContext series_context(const RunConfig& cfg) {
  SeriesContext ctx;
  ctx.params = cfg.params;
  ctx.g = cfg.g();
  ctx.smearings = cfg.smearings;
  ctx.q = q_kernel(cfg);
  ctx.budget = cfg.series.budget;
  ctx.seed = cfg.series.seed;
  ctx.quad.workers = default_workers();
  return ctx;
}

void compute_q(const RunConfig& cfg, std::ostream& log) {
  const QTable t = build_q_table(cfg.params, cfg.qTable.nT, cfg.qTable.nX, cfg.qTable.budget,
                                 cfg.qTable.interpolation, default_workers());
  fs::create_directories(cfg.outputDir);
  const std::string path = (fs::path(cfg.outputDir) / "q_table.bin").string();
  save_q_table(t, path);
  log << "compute-q: " << t.nT << "x" << t.nT << "x" << t.nX << " table written to " << path << "\n";
}

void coeff(const RunConfig& cfg, std::ostream& log) {
  const SeriesContext ctx = series_context(cfg);
  auto out = open_out(cfg, "coeff.csv");
  out << csv_header() << "\n";
  for (const auto& f : cfg.series.expectations)
    for (int n : cfg.series.orders) {
      SeriesCoefficient c = expectation_coefficient(n, cfg.smearing(f), ctx);
      c.observable = expectation_id(f);
      out << csv_row(c) << "\n";
      log << "coeff: " << c.observable << " order " << n << " = " << c.value.real() << " +- " << c.value.error << "\n";
    }
}

void corr(const RunConfig& cfg, std::ostream& log) {
  const SeriesContext ctx = series_context(cfg);
  auto out = open_out(cfg, "corr.csv");
  out << csv_header() << "\n";
  for (const auto& [a, b] : cfg.series.correlations) {
    for (int n : cfg.series.orders) {
      SeriesCoefficient c = correlation_coefficient(n, cfg.smearing(a), cfg.smearing(b), ctx);
      c.observable = correlation_id(a, b);
      out << csv_row(c) << "\n";
      log << "corr: " << c.observable << " order " << n << " = " << c.value.real() << " +- " << c.value.error << "\n";
    }
    for (double h : cfg.series.quantumHbar)
      for (int n : cfg.series.orders) {
        SeriesCoefficient c = quantum_coefficient(n, h, Observable::product({a, b}), ctx);
        c.observable = correlation_id(a, b);
        c.hbar = h;
        out << csv_row(c) << "\n";
      }
  }
}

void bounds(const RunConfig& cfg, std::ostream& log) {
  const SeriesContext ctx = series_context(cfg);
  BoundInputs in;
  in.params = cfg.params;
  in.g = ctx.g;
  in.cQ = c_q_constant(*ctx.q, cfg.params.a, cfg.params.mu, cfg.bounds.grid);
  in.K = conditioning_constants(cfg.params, cfg.bounds.conditioningGrid).K;
  auto csv = open_out(cfg, "bounds.csv");
  csv << bound_csv_header() << "\n";
  nlohmann::json reports = nlohmann::json::array();
  for (int n : cfg.bounds.orders) {
    std::optional<double> measured;
    if (cfg.bounds.measure && n > 0) {
      const QuadResult v = evaluate_terms(qs_term(n), ctx, cfg.params.hbar);
      measured = std::abs(v.value) + 3.0 * v.error;
    }
    const BoundReport r = qs_term_bound(n, cfg.bounds.p, in, measured);
    csv << bound_csv_row(r) << "\n";
    reports.push_back(to_json(r));
    log << "bounds: n = " << n << " bound " << r.boundValue << (r.satisfied ? " satisfied" : " VIOLATED") << "\n";
  }
  nlohmann::json doc = {{"reports", reports}, {"tail_after_max_order", nullptr}};
  if (!cfg.bounds.orders.empty()) {
    int maxN = 0;
    for (int n : cfg.bounds.orders) maxN = std::max(maxN, n);
    const double tail = tail_bound(maxN, cfg.bounds.p, in);
    if (std::isfinite(tail)) doc["tail_after_max_order"] = tail;
    log << "bounds: tail after order " << maxN << " = " << tail << "\n";
  }
  open_out(cfg, "bounds.json") << doc.dump(2) << "\n";
}

void mc(const RunConfig& cfg, std::ostream& log) {
  std::vector<McObservable> obs;
  std::vector<SmearingFunction> probes{cfg.g()};
  for (int n : cfg.series.orders) {
    if (n > 2) continue;
    for (const auto& f : cfg.series.expectations) obs.push_back({expectation_id(f), n, {cfg.smearing(f)}});
    for (const auto& [a, b] : cfg.series.correlations)
      obs.push_back({correlation_id(a, b), n, {cfg.smearing(a), cfg.smearing(b)}});
  }
  for (const auto& o : obs)
    for (const auto& f : o.factors) probes.push_back(f);
  const LatticeGrid grid = LatticeGrid::covering(probes, cfg.params.T, cfg.mc.spacing);
  const auto est = estimate_correlators(obs, grid, cfg.params, cfg.g(), cfg.mc.samples, cfg.mc.seed);
  auto out = open_out(cfg, "mc.csv");
  out << mc_csv_header() << "\n";
  for (std::size_t i = 0; i < obs.size(); ++i) {
    out << mc_csv_row(obs[i], est[i], grid) << "\n";
    log << "mc: " << obs[i].id << " order " << obs[i].order << " = " << est[i].mean << " +- " << est[i].stderr_
        << "\n";
  }
}

ExitCode compare(const RunConfig& cfg, const RunOptions& opt, std::ostream& log) {
  std::vector<std::string> series;
  for (const char* f : {"coeff.csv", "corr.csv"})
    if (fs::exists(fs::path(cfg.outputDir) / f)) series.push_back((fs::path(cfg.outputDir) / f).string());
  const auto rows = compare_csv(series, (fs::path(cfg.outputDir) / "mc.csv").string());
  auto out = open_out(cfg, "compare.csv");
  out << "observable,order,series,series_error,mc,mc_stderr,z\n";
  out.precision(17);
  bool bad = false;
  for (const auto& r : rows) {
    out << '"' << r.observable << "\"," << r.order << "," << r.series << "," << r.seriesError << "," << r.mc << ","
        << r.mcStderr << "," << r.z << "\n";
    bad = bad || !(r.z <= 3.0);
    log << "compare: " << r.observable << " order " << r.order << " z = " << r.z << "\n";
  }
  if (rows.empty()) log << "compare: no observable appears in both pipelines\n";
  return bad && opt.strict ? kComparisonFailure : kOk;
}

void expand(const RunConfig& cfg, const RunOptions& opt, std::ostream& log) {
  const int n = opt.expandOrder.value_or(cfg.expand.order);
  const std::string which = opt.expandObservable.value_or(cfg.expand.observable);
  if (n < 0 || n > 4) throw Error(ErrorKind::Config, "expand order must lie in 0..4");
  Expansion terms;
  if (which == "field")
    terms = picture_terms(n, Observable::field("f"));
  else if (which == "product")
    terms = picture_terms(n, default_observable(2));
  else if (which == "classical")
    terms = classical_term(n, Observable::field("f"));
  else if (which == "qs")
    terms = qs_term(n);
  else if (which == "J")
    terms = interacting_field_term_J(n);
  else if (which == "M")
    terms = interacting_field_term_M(n);
  else
    throw Error(ErrorKind::Config, "expand observable must be field, product, classical, qs, J or M");
  const std::string stem = "expand_" + which + "_n" + std::to_string(n);
  open_out(cfg, stem + ".json") << to_json(terms).dump(2) << "\n";
  open_out(cfg, stem + ".dot") << graph_render(terms, stem);
  log << "expand: " << terms.size() << " graphs for " << which << " at order " << n << "\n";
}

// minimal CSV reader for the files this tool writes: quoted first-or-second field, no embedded quotes
std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
    } else if (ch == ',' && !quoted) {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<std::map<std::string, std::string>> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, "compare needs " + path + "; run the producing command first");
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Config, path + " has no header row");
  const auto header = split_csv(line);
  std::vector<std::map<std::string, std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) throw Error(ErrorKind::Config, path + ": malformed row");
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < cells.size(); ++i) row[header[i]] = cells[i];
    rows.push_back(std::move(row));
  }
  return rows;
}

double number(const std::map<std::string, std::string>& row, const std::string& key) {
  auto it = row.find(key);
  if (it == row.end()) throw Error(ErrorKind::Config, "CSV column " + key + " missing");
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw Error(ErrorKind::Config, "CSV column " + key + " is not a number");
  }
}

}  // namespace

std::vector<CompareRow> compare_csv(const std::vector<std::string>& seriesFiles, const std::string& mcFile) {
  std::map<std::pair<std::string, int>, std::pair<double, double>> series;
  for (const auto& f : seriesFiles)
    for (const auto& row : read_csv(f)) {
      if (number(row, "hbar") != 0.0) continue;
      series[{row.at("observable"), static_cast<int>(number(row, "order"))}] = {number(row, "value_re"),
                                                                               number(row, "error")};
    }
  std::vector<CompareRow> out;
  for (const auto& row : read_csv(mcFile)) {
    const std::pair<std::string, int> key{row.at("observable"), static_cast<int>(number(row, "order"))};
    auto it = series.find(key);
    if (it == series.end()) continue;
    CompareRow r;
    r.observable = key.first;
    r.order = key.second;
    r.series = it->second.first;
    r.seriesError = it->second.second;
    r.mc = number(row, "mean");
    r.mcStderr = number(row, "stderr");
    const double err = std::hypot(r.seriesError, r.mcStderr);
    const double diff = std::abs(r.series - r.mc);
    r.z = err > 0.0 ? diff / err : (diff == 0.0 ? 0.0 : INFINITY);
    out.push_back(r);
  }
  return out;
}

ExitCode run_command(const std::string& command, const RunConfig& cfg, const RunOptions& opt, std::ostream& log) {
  validate(cfg, {command});
  if (command == "compute-q")
    compute_q(cfg, log);
  else if (command == "coeff")
    coeff(cfg, log);
  else if (command == "corr")
    corr(cfg, log);
  else if (command == "bounds")
    bounds(cfg, log);
  else if (command == "mc")
    mc(cfg, log);
  else if (command == "compare")
    return compare(cfg, opt, log);
  else if (command == "expand")
    expand(cfg, opt, log);
  else
    throw Error(ErrorKind::Config, "unknown command " + command);
  return kOk;
}

}  // namespace ssg::cli
