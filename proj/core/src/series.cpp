#include "ssg/series.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "ssg/errors.hpp"

namespace ssg {

namespace {

using cd = std::complex<double>;
constexpr int kMaxPoints = 16;
enum BasisSlot { kQ = 0, kH = 1, kH0 = 2, kR = 3, kSlots = 4 };

struct EdgePlan {
  int a, b;
  std::vector<std::pair<Kernel, cd>> parts;  // coefficient already carries hbar^h
  int multiplicity;
  bool exponential;
};

struct TermPlan {
  cd prefactor;
  std::vector<int> vertexCharge;
  std::vector<int> vertexDegree;
  std::vector<char> vertexDressed;
  std::vector<const SmearingFunction*> vertexSmearing;
  std::vector<EdgePlan> edges;
  int agnostic = 0;
};

struct Group {
  std::vector<std::string> vertexSmearings;
  std::vector<std::string> legSmearings;  // sorted
  std::vector<TermPlan> terms;
  std::vector<SingularLink> links;
};

const SmearingFunction& lookup(const SeriesContext& ctx, const std::string& id) {
  if (id == "g") return ctx.g;
  auto it = ctx.smearings.find(id);
  if (it == ctx.smearings.end()) throw Error(ErrorKind::Config, "unknown smearing '" + id + "'");
  return it->second;
}

bool has_hbar_singular_part(const KernelExpr& k) {
  for (const auto& [key, c] : k.terms())
    if (key.second > 0 && key.first != Kernel::Q && key.first != Kernel::DeltaR && key.first != Kernel::DeltaA &&
        key.first != Kernel::Delta && !c.is_zero())
      return true;
  return false;
}

class Evaluator {
 public:
  Evaluator(const SeriesContext& ctx, const SpacetimePoint* pts) : ctx_(ctx), pts_(pts) {
    filled_.fill(0);
  }

  double basis(BasisSlot s, int a, int b) {
    const std::size_t idx = (static_cast<std::size_t>(s) * kMaxPoints + a) * kMaxPoints + b;
    if (filled_[idx]) return cache_[idx];
    const ModelParams& p = ctx_.params;
    double v = 0.0;
    switch (s) {
      case kQ: v = ctx_.q_kernel()(pts_[a], pts_[b]); break;
      case kH: v = hadamard_regularized(pts_[a] - pts_[b], p, false); break;
      case kH0: v = hadamard_regularized(pts_[a] - pts_[b], p, true); break;
      case kR: v = retarded_massive(pts_[a] - pts_[b], p.m, p.signConvention); break;
      default: break;
    }
    filled_[idx] = 1;
    cache_[idx] = v;
    return v;
  }

  cd kernel(Kernel k, int a, int b) {
    const cd I(0.0, 1.0);
    switch (k) {
      case Kernel::Q: return basis(kQ, std::min(a, b), std::max(a, b));
      case Kernel::H: return basis(kH, std::min(a, b), std::max(a, b));
      case Kernel::H0: return basis(kH0, std::min(a, b), std::max(a, b));
      case Kernel::DeltaR: return basis(kR, a, b);
      case Kernel::DeltaA: return basis(kR, b, a);
      case Kernel::Delta: return basis(kR, a, b) - basis(kR, b, a);
      case Kernel::Omega: return kernel(Kernel::H, a, b) + 0.5 * I * (basis(kR, a, b) - basis(kR, b, a));
      case Kernel::DeltaF: return kernel(Kernel::H, a, b) + 0.5 * I * (basis(kR, a, b) + basis(kR, b, a));
      case Kernel::DeltaAF: return kernel(Kernel::H, a, b) - 0.5 * I * (basis(kR, a, b) + basis(kR, b, a));
    }
    return 0.0;
  }

  cd edge(const EdgePlan& e) {
    cd s = 0.0;
    for (const auto& [k, c] : e.parts) s += c * kernel(k, e.a, e.b);
    return s;
  }

 private:
  const SeriesContext& ctx_;
  const SpacetimePoint* pts_;
  std::array<double, kSlots * kMaxPoints * kMaxPoints> cache_{};
  std::array<char, kSlots * kMaxPoints * kMaxPoints> filled_{};
};

cd evaluate_term(const TermPlan& t, const SeriesContext& ctx, Evaluator& ev, const std::vector<double>& vertexWeight) {
  const int n = static_cast<int>(t.vertexCharge.size());
  const double a = ctx.params.a;
  cd w = t.prefactor;
  for (int j = 0; j < n; ++j) w *= vertexWeight[j];
  if (w == 0.0) return 0.0;

  std::vector<cd> expo;
  std::vector<const EdgePlan*> expEdges;
  cd lin = 1.0;
  for (const auto& e : t.edges) {
    const cd v = ev.edge(e);
    if (e.exponential) {
      expo.push_back(v);
      expEdges.push_back(&e);
    } else {
      lin *= std::pow(v, e.multiplicity);
    }
  }
  if (lin == 0.0) return 0.0;
  w *= lin;

  std::vector<int> agn;
  int fixedDeg = 0;
  for (int j = 0; j < n; ++j) {
    if (t.vertexCharge[j] == 0)
      agn.push_back(j);
    else
      fixedDeg += t.vertexDegree[j];
  }
  // sigma -> -sigma on every agnostic vertex leaves the exponents unchanged and flips the
  // vertex factors by (-1)^deg, so with no resolved charges the pair sums exactly
  bool paired = !agn.empty() && fixedDeg == 0 && agn.size() == static_cast<std::size_t>(n);
  int agnDeg = 0;
  for (int j : agn) agnDeg += t.vertexDegree[j];
  if (paired && agnDeg % 2) return 0.0;

  std::vector<int> sigma(n);
  for (int j = 0; j < n; ++j) sigma[j] = t.vertexCharge[j];
  const std::size_t A = agn.size();
  const unsigned combos = paired ? 1u << (A - 1) : 1u << A;
  cd total = 0.0;
  for (unsigned mask = 0; mask < combos; ++mask) {
    for (std::size_t q = 0; q < A; ++q) {
      const unsigned bit = paired ? (q == 0 ? 0u : (mask >> (q - 1)) & 1u) : (mask >> q) & 1u;
      sigma[agn[q]] = bit ? -1 : 1;
    }
    cd term = 1.0;
    for (int j = 0; j < n; ++j) {
      const int d = t.vertexDegree[j];
      if (d) term *= std::pow(cd(0.0, sigma[j] * a), d);
    }
    cd ex = 0.0;
    for (std::size_t k = 0; k < expEdges.size(); ++k)
      ex += -static_cast<double>(sigma[expEdges[k]->a] * sigma[expEdges[k]->b]) * a * a * expo[k];
    total += term * std::exp(ex);
  }
  if (paired) total *= 2.0;
  return w * total * std::pow(0.5, static_cast<double>(A));
}

std::vector<Group> plan(const Expansion& terms, const SeriesContext& ctx, double hbar) {
  std::map<std::pair<std::vector<std::string>, std::vector<std::string>>, std::size_t> index;
  std::vector<Group> groups;
  const double alpha = ctx.params.a * ctx.params.a * hbar / (4.0 * std::numbers::pi);
  for (const auto& t : terms) {
    if (t.coeff.is_zero()) continue;
    const int n = t.n(), m = t.m();
    if (n + m > kMaxPoints) throw Error(ErrorKind::Config, "term has too many integration points");
    std::vector<std::string> vs, ls;
    for (const auto& v : t.vertices) vs.push_back(v.smearing);
    for (const auto& l : t.legs) ls.push_back(l.smearing);
    std::vector<std::string> sorted = ls;
    std::sort(sorted.begin(), sorted.end());
    auto key = std::make_pair(vs, sorted);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, groups.size()).first;
      groups.push_back({vs, sorted, {}, {}});
    }
    Group& grp = groups[it->second];
    // leg l -> point index, duplicates of an id take successive slots
    std::vector<int> legPoint(m);
    std::vector<char> taken(m, 0);
    for (int l = 0; l < m; ++l)
      for (int s = 0; s < m; ++s)
        if (!taken[s] && sorted[s] == ls[l]) {
          taken[s] = 1;
          legPoint[l] = n + s;
          break;
        }
    auto point = [&](int e) { return e < n ? e : legPoint[e - n]; };

    TermPlan tp;
    int hpow = t.hbarPrefactor;
    tp.prefactor = t.coeff.to_complex();
    for (int j = 0; j < n; ++j) {
      tp.vertexCharge.push_back(t.vertices[j].charge);
      tp.vertexDegree.push_back(t.degree(j) + t.vertices[j].extraDerivatives);
      tp.vertexDressed.push_back(t.vertices[j].dressed);
      tp.vertexSmearing.push_back(&lookup(ctx, t.vertices[j].smearing));
      if (t.vertices[j].charge == 0) ++tp.agnostic;
    }
    for (const auto& e : t.edges) {
      EdgePlan ep{point(e.a), point(e.b), {}, e.multiplicity, e.exponential};
      if (e.exponential && (ep.a >= n || ep.b >= n))
        throw Error(ErrorKind::Config, "exponential edges must join two vertices");
      for (const auto& [key2, c] : e.kernel.terms()) {
        cd cc = c.to_complex();
        if (key2.second != 0) cc *= std::pow(hbar, key2.second);
        ep.parts.emplace_back(key2.first, cc);
      }
      if (e.exponential && e.a < n && e.b < n && alpha > 0.0 && has_hbar_singular_part(e.kernel)) {
        if (alpha >= 1.0) throw Error(ErrorKind::InvalidExponent, "alpha = a^2 hbar / 4pi must be below 1");
        const int i = std::min(e.a, e.b), j = std::max(e.a, e.b);
        const bool hasParent = std::any_of(grp.links.begin(), grp.links.end(), [j](const SingularLink& l) { return l.j == j; });
        if (!hasParent) grp.links.push_back({i, j, alpha});
      }
      tp.edges.push_back(std::move(ep));
    }
    if (hpow != 0) tp.prefactor *= std::pow(hbar, hpow);
    grp.terms.push_back(std::move(tp));
  }
  return groups;
}

}  // namespace

const QKernel& SeriesContext::q_kernel() const {
  if (!q) throw Error(ErrorKind::Config, "series context has no Q kernel");
  return *q;
}

QuadResult evaluate_terms(const Expansion& terms, const SeriesContext& ctxIn, double hbar) {
  SeriesContext ctx = ctxIn;
  if (!ctx.q) ctx.q = std::make_shared<QKernel>(QKernel::automatic(ctx.params));
  const auto groups = plan(terms, ctx, hbar);
  QuadResult total;
  total.value = 0.0;
  total.seed = ctx.seed;
  double er2 = 0.0, ei2 = 0.0;
  for (const auto& grp : groups) {
    if (grp.terms.empty()) continue;
    const int n = static_cast<int>(grp.vertexSmearings.size());
    const int P = n + static_cast<int>(grp.legSmearings.size());
    IntegrandSpec spec;
    std::vector<const SmearingFunction*> pointSmearing;
    for (const auto& s : grp.vertexSmearings) pointSmearing.push_back(&lookup(ctx, s));
    for (const auto& s : grp.legSmearings) pointSmearing.push_back(&lookup(ctx, s));
    for (const auto* s : pointSmearing) spec.boxes.push_back(s->null_box());
    spec.links = grp.links;
    const double a2 = ctx.params.a * ctx.params.a;
    spec.integrand = [&, n, P](const SpacetimePoint* pts) -> cd {
      double legWeight = 1.0;
      for (int l = n; l < P && legWeight != 0.0; ++l) legWeight *= (*pointSmearing[l])(pts[l]);
      if (legWeight == 0.0) return 0.0;
      std::vector<double> bare(n);
      for (int j = 0; j < n; ++j) bare[j] = (*pointSmearing[j])(pts[j]);
      if (std::any_of(bare.begin(), bare.end(), [](double x) { return x == 0.0; })) return 0.0;
      Evaluator ev(ctx, pts);
      std::vector<double> dress(n);
      for (int j = 0; j < n; ++j) dress[j] = bare[j] * std::exp(-0.5 * a2 * ev.basis(kQ, j, j));
      std::vector<double> w(n);
      cd sum = 0.0;
      for (const auto& t : grp.terms) {
        for (int j = 0; j < n; ++j) w[j] = t.vertexDressed[j] ? dress[j] : bare[j];
        sum += evaluate_term(t, ctx, ev, w);
      }
      return legWeight * sum;
    };
    if (P == 0) {
      for (const auto& t : grp.terms) total.value += t.prefactor;
      continue;
    }
    const QuadResult r = integrate(spec, ctx.budget, ctx.seed, ctx.quad);
    total.value += r.value;
    er2 += r.error_re * r.error_re;
    ei2 += r.error_im * r.error_im;
    total.samples += r.samples;
  }
  total.error_re = std::sqrt(er2);
  total.error_im = std::sqrt(ei2);
  total.error = std::hypot(total.error_re, total.error_im);
  return total;
}

QuadResult physical_value(const QuadResult& raw, int n, SignConvention c) {
  if (c == SignConvention::paper) return raw;
  QuadResult r = raw;
  r.value = std::conj(raw.value) * (n % 2 ? -1.0 : 1.0);
  return r;
}

namespace {

SeriesCoefficient classical(int n, const Observable& obs, const std::string& id, const SeriesContext& ctx) {
  if (n < 0 || n > ctx.maxOrder) throw Error(ErrorKind::Config, "order outside the configured range");
  const Expansion terms = drop_free_legs(apply_gamma_q(classical_term(n, obs)));
  SeriesCoefficient c;
  c.n = n;
  c.observable = id;
  c.termCount = terms.size();
  c.hbar = 0.0;
  // grade-0 terms carry no net hbar, so the numeric value used here is immaterial
  QuadResult raw = evaluate_terms(terms, ctx, 1.0);
  raw = scaled(raw, 1.0 / factorial(n).convert_to<double>());
  c.value = physical_value(raw, n, ctx.params.signConvention);
  c.value.seed = ctx.seed;
  return c;
}

}  // namespace

SeriesCoefficient expectation_coefficient(int n, const SmearingFunction& f, const SeriesContext& ctxIn) {
  SeriesContext ctx = ctxIn;
  ctx.smearings["f"] = f;
  return classical(n, Observable::field("f"), "phi(f)", ctx);
}

SeriesCoefficient correlation_coefficient(int n, const SmearingFunction& f1, const SmearingFunction& f2,
                                          const SeriesContext& ctxIn) {
  SeriesContext ctx = ctxIn;
  ctx.smearings["f1"] = f1;
  ctx.smearings["f2"] = f2;
  return classical(n, Observable::product({"f1", "f2"}), "phi(f1)phi(f2)", ctx);
}

QuadResult order1_correction_oracle(const SmearingFunction& f1, const SmearingFunction& f2, const SeriesContext& ctxIn) {
  SeriesContext ctx = ctxIn;
  if (!ctx.q) ctx.q = std::make_shared<QKernel>(QKernel::automatic(ctx.params));
  const ModelParams& p = ctx.params;
  // E[X sin(aY)] = a Cov(X, Y) exp(-a^2 Var(Y) / 2); the source of the first-order field is -a g sin(a psi0)
  // propagated by the Green kernel, which is retarded_sign * DeltaR
  const double s = -retarded_sign(p.signConvention);
  const QKernel& Q = *ctx.q;
  IntegrandSpec spec;
  spec.boxes = {f1.null_box(), f2.null_box(), ctx.g.null_box()};
  spec.integrand = [&](const SpacetimePoint* z) -> cd {
    const double w = f1(z[0]) * f2(z[1]);
    if (w == 0.0) return 0.0;
    const double gy = ctx.g(z[2]);
    if (gy == 0.0) return 0.0;
    const double gq = gy * std::exp(-0.5 * p.a * p.a * Q(z[2], z[2]));
    const double r1 = retarded_massive(z[1] - z[2], p.m, p.signConvention) * Q(z[0], z[2]);
    const double r2 = retarded_massive(z[0] - z[2], p.m, p.signConvention) * Q(z[1], z[2]);
    return s * p.a * p.a * w * gq * (r1 + r2);
  };
  return integrate(spec, ctx.budget, ctx.seed, ctx.quad);
}

SeriesCoefficient quantum_coefficient(int n, double hbar, const Observable& obs, const SeriesContext& ctx) {
  if (n < 0 || n > ctx.maxOrder) throw Error(ErrorKind::Config, "order outside the configured range");
  if (hbar < 0.0) throw Error(ErrorKind::Config, "hbar must be nonnegative");
  std::string id;
  for (const auto& f : obs.fields) id += "phi(" + f + ")";
  if (!obs.localVertex.empty()) id += "V(" + obs.localVertex + ")";
  if (hbar == 0.0 || n == 0) {
    SeriesCoefficient c = classical(n, obs, id, ctx);
    c.hbar = hbar;
    return c;
  }
  const double alpha = ctx.params.a * ctx.params.a * hbar / (4.0 * std::numbers::pi);
  if (alpha >= 1.0) throw Error(ErrorKind::InvalidExponent, "alpha = a^2 hbar / 4pi must be below 1");
  const Expansion terms = drop_free_legs(apply_gamma_q(bogoliubov_terms(n, obs, {-1, true})));
  SeriesCoefficient c;
  c.n = n;
  c.observable = id;
  c.termCount = terms.size();
  c.hbar = hbar;
  QuadResult raw = evaluate_terms(terms, ctx, hbar);
  raw = scaled(raw, 1.0 / factorial(n).convert_to<double>());
  c.value = physical_value(raw, n, ctx.params.signConvention);
  c.value.seed = ctx.seed;
  return c;
}

std::string csv_header() { return "order,observable,value_re,value_im,error,samples,seed,hbar"; }

std::string csv_row(const SeriesCoefficient& c) {
  std::ostringstream os;
  os << std::setprecision(17) << c.n << ",\"" << c.observable << "\"," << c.value.value.real() << ","
     << c.value.value.imag() << "," << c.value.error << "," << c.value.samples << "," << c.value.seed << ","
     << c.hbar;
  return os.str();
}

}  // namespace ssg
