#include "run_config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "ssg/errors.hpp"

namespace ssg::cli {

const std::vector<std::string> kCommands = {"compute-q", "coeff", "corr", "bounds", "mc", "compare", "expand"};

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorKind::Config, msg); }

// reads the keys of one JSON object and rejects any it was not asked about
class Fields {
 public:
  Fields(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_ + " must be an object");
  }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      fail(path_ + "." + key + " has the wrong type");
    }
  }

  const nlohmann::json* child(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) fail("unknown field " + path_ + "." + it.key());
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void parse_model(const nlohmann::json& j, ModelParams& p) {
  Fields f(j, "model");
  f.get("m", p.m);
  f.get("a", p.a);
  f.get("hbar", p.hbar);
  f.get("lambda", p.lambda);
  f.get("mu", p.mu);
  f.get("mu_ref", p.muRef);
  f.get("t", p.T);
  f.get("ramp_width", p.rampWidth);
  f.get("lightcone_floor", p.lightconeFloor);
  std::string conv = to_string(p.signConvention);
  f.get("sign_convention", conv);
  try {
    p.signConvention = parse_sign_convention(conv);
  } catch (const std::exception&) {
    fail("model.sign_convention must be \"paper\" or \"green\"");
  }
  f.finish();
  if (p.m < 0.0) fail("model.m must be >= 0");
  if (!(p.a > 0.0)) fail("model.a must be > 0");
  if (!(p.hbar > 0.0)) fail("model.hbar must be > 0");
  if (p.lambda < 0.0) fail("model.lambda must be >= 0");
  if (!(p.mu > 0.0) || !(p.muRef > 0.0)) fail("model.mu and model.mu_ref must be > 0");
  if (!(p.rampWidth > 0.0)) fail("model.ramp_width must be > 0");
}

SmearingFunction parse_smearing(const nlohmann::json& j, const std::string& name) {
  if (!j.is_array() || j.empty()) fail("smearing " + name + " must be a nonempty list of bumps");
  SmearingFunction s;
  for (const auto& b : j) {
    Fields f(b, "smearings." + name + "[]");
    Bump bump;
    f.get("t", bump.center.t);
    f.get("x", bump.center.x);
    f.get("radius", bump.radius);
    f.get("amplitude", bump.amplitude);
    f.finish();
    if (!(bump.radius > 0.0)) fail("smearing " + name + ": radius must be > 0");
    s.bumps.push_back(bump);
  }
  return s;
}

}  // namespace

const SmearingFunction& RunConfig::smearing(const std::string& name) const {
  auto it = smearings.find(name);
  if (it == smearings.end()) fail("smearing \"" + name + "\" is not defined");
  return it->second;
}

RunConfig parse_config(const nlohmann::json& j) {
  RunConfig c;
  Fields top(j, "config");
  if (auto* m = top.child("model")) parse_model(*m, c.params);
  if (auto* s = top.child("smearings")) {
    if (!s->is_object()) fail("smearings must be an object of named bump lists");
    for (auto it = s->begin(); it != s->end(); ++it) c.smearings[it.key()] = parse_smearing(it.value(), it.key());
  }
  top.get("interaction", c.interaction);
  if (auto* s = top.child("series")) {
    Fields f(*s, "series");
    f.get("budget", c.series.budget);
    f.get("seed", c.series.seed);
    f.get("orders", c.series.orders);
    std::vector<std::vector<std::string>> pairs;
    f.get("correlations", pairs);
    for (const auto& pr : pairs) {
      if (pr.size() != 2) fail("series.correlations entries must name two smearings");
      c.series.correlations.emplace_back(pr[0], pr[1]);
    }
    f.get("expectations", c.series.expectations);
    f.get("quantum_hbar", c.series.quantumHbar);
    f.finish();
  }
  if (auto* s = top.child("q_table")) {
    Fields f(*s, "q_table");
    f.get("n_t", c.qTable.nT);
    f.get("n_x", c.qTable.nX);
    f.get("budget", c.qTable.budget);
    std::string interp = "tricubic";
    f.get("interpolation", interp);
    if (interp == "tricubic")
      c.qTable.interpolation = Interpolation::tricubic;
    else if (interp == "trilinear")
      c.qTable.interpolation = Interpolation::trilinear;
    else
      fail("q_table.interpolation must be \"tricubic\" or \"trilinear\"");
    f.finish();
  }
  if (auto* s = top.child("mc")) {
    Fields f(*s, "mc");
    f.get("spacing", c.mc.spacing);
    f.get("samples", c.mc.samples);
    f.get("seed", c.mc.seed);
    f.finish();
  }
  if (auto* s = top.child("bounds")) {
    Fields f(*s, "bounds");
    f.get("p", c.bounds.p);
    f.get("orders", c.bounds.orders);
    f.get("grid", c.bounds.grid);
    f.get("conditioning_grid", c.bounds.conditioningGrid);
    f.get("measure", c.bounds.measure);
    f.finish();
  }
  if (auto* s = top.child("expand")) {
    Fields f(*s, "expand");
    f.get("order", c.expand.order);
    f.get("observable", c.expand.observable);
    f.finish();
  }
  top.get("commands", c.commands);
  top.get("output_dir", c.outputDir);
  top.finish();

  for (const auto& cmd : c.commands)
    if (std::find(kCommands.begin(), kCommands.end(), cmd) == kCommands.end()) fail("unknown command " + cmd);
  for (int n : c.series.orders)
    if (n < 0 || n > 3) fail("series.orders must lie in 0..3");
  if (c.series.budget < 1024) fail("series.budget must be at least 1024");
  if (c.qTable.nT < 2 || c.qTable.nX < 2) fail("q_table needs at least two nodes per axis");
  if (!(c.mc.spacing > 0.0)) fail("mc.spacing must be > 0");
  for (const auto& [a, b] : c.series.correlations) {
    c.smearing(a);
    c.smearing(b);
  }
  for (const auto& a : c.series.expectations) c.smearing(a);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

void validate(const RunConfig& c, const std::vector<std::string>& commands) {
  auto wants = [&](const char* cmd) { return std::find(commands.begin(), commands.end(), cmd) != commands.end(); };
  const bool series = wants("coeff") || wants("corr") || wants("mc") || wants("bounds");
  if (series) {
    const SmearingFunction& g = c.g();
    if (!g.inside_diamond(c.params.mu)) fail("the interaction support must fit inside the diamond D_mu");
  }
  const bool quantum = wants("corr") && !c.series.quantumHbar.empty();
  if (wants("bounds") || quantum) {
    ModelParams p = c.params;
    for (double h : quantum ? c.series.quantumHbar : std::vector<double>{}) {
      p.hbar = h;
      if (p.alpha() >= 1.0) fail("alpha = a^2 hbar / 4 pi must be < 1 for quantum coefficients");
    }
    if (wants("bounds") && c.params.alpha() >= 1.0) fail("alpha = a^2 hbar / 4 pi must be < 1 for bounds");
  }
  if (wants("expand") && (c.expand.order < 0 || c.expand.order > 4)) fail("expand.order must lie in 0..4");
}

}  // namespace ssg::cli
