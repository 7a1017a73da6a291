#include "ssg/algebra.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>

namespace ssg {

// ---------------------------------------------------------------------------
// exact scalars

CRational CRational::i_pow(int k) {
  switch (((k % 4) + 4) % 4) {
    case 0: return {Rational(1), Rational(0)};
    case 1: return {Rational(0), Rational(1)};
    case 2: return {Rational(-1), Rational(0)};
    default: return {Rational(0), Rational(-1)};
  }
}

CRational& CRational::operator*=(const CRational& o) {
  Rational r = re * o.re - im * o.im;
  Rational i = re * o.im + im * o.re;
  re = std::move(r);
  im = std::move(i);
  return *this;
}

std::complex<double> CRational::to_complex() const { return {re.convert_to<double>(), im.convert_to<double>()}; }

std::string CRational::str() const {
  if (im == 0) return re.str();
  if (re == 0) return im.str() + "i";
  return re.str() + (im > 0 ? "+" : "") + im.str() + "i";
}

namespace {

CRational inverse(const CRational& c) {
  const Rational d = c.re * c.re + c.im * c.im;
  if (d == 0) throw Error(ErrorKind::DegenerateConfiguration, "division by zero coefficient");
  return {c.re / d, -c.im / d};
}

const CRational kHalfI{Rational(0), Rational(1, 2)};

}  // namespace

Rational factorial(int n) {
  Rational r(1);
  for (int k = 2; k <= n; ++k) r *= k;
  return r;
}

Rational binomial(int n, int k) {
  if (k < 0 || k > n) return Rational(0);
  return factorial(n) / (factorial(k) * factorial(n - k));
}

// ---------------------------------------------------------------------------
// kernels

namespace {
constexpr const char* kKernelNames[] = {"Q", "H", "H0", "DeltaR", "DeltaA", "Delta", "Omega", "DeltaF", "DeltaAF"};
}

const char* kernel_name(Kernel k) { return kKernelNames[static_cast<int>(k)]; }

Kernel kernel_from_name(const std::string& s) {
  for (int i = 0; i < 9; ++i)
    if (s == kKernelNames[i]) return static_cast<Kernel>(i);
  throw Error(ErrorKind::Config, "unknown kernel '" + s + "'");
}

KernelExpr KernelExpr::basis(Kernel k, int hbarPower, const CRational& c) {
  KernelExpr e;
  e.add(k, hbarPower, c);
  return e;
}

void KernelExpr::add(Kernel k, int hbarPower, const CRational& c) {
  if (c.is_zero()) return;
  auto& slot = terms_[{k, hbarPower}];
  slot += c;
  if (slot.is_zero()) terms_.erase({k, hbarPower});
}

KernelExpr& KernelExpr::operator+=(const KernelExpr& o) {
  for (const auto& [key, c] : o.terms_) add(key.first, key.second, c);
  return *this;
}

KernelExpr operator-(const KernelExpr& a, const KernelExpr& b) { return a + CRational(-1) * b; }

KernelExpr operator*(const CRational& c, const KernelExpr& k) {
  KernelExpr r;
  for (const auto& [key, v] : k.terms_) r.add(key.first, key.second, c * v);
  return r;
}

KernelExpr KernelExpr::to_basis() const {
  KernelExpr r;
  for (const auto& [key, c] : terms_) {
    const int h = key.second;
    switch (key.first) {
      case Kernel::Q:
      case Kernel::H:
      case Kernel::H0:
      case Kernel::DeltaR:
      case Kernel::DeltaA: r.add(key.first, h, c); break;
      case Kernel::Delta:
        r.add(Kernel::DeltaR, h, c);
        r.add(Kernel::DeltaA, h, -c);
        break;
      case Kernel::Omega:
        r.add(Kernel::H, h, c);
        r.add(Kernel::DeltaR, h, c * kHalfI);
        r.add(Kernel::DeltaA, h, -(c * kHalfI));
        break;
      case Kernel::DeltaF:
        r.add(Kernel::H, h, c);
        r.add(Kernel::DeltaR, h, c * kHalfI);
        r.add(Kernel::DeltaA, h, c * kHalfI);
        break;
      case Kernel::DeltaAF:
        r.add(Kernel::H, h, c);
        r.add(Kernel::DeltaR, h, -(c * kHalfI));
        r.add(Kernel::DeltaA, h, -(c * kHalfI));
        break;
    }
  }
  return r;
}

bool KernelExpr::is_symmetric() const {
  for (const auto& [key, c] : terms_) {
    switch (key.first) {
      case Kernel::DeltaR:
      case Kernel::DeltaA:
      case Kernel::Delta:
      case Kernel::Omega: return false;
      default: break;
    }
  }
  return true;
}

KernelExpr KernelExpr::transpose() const {
  if (is_symmetric()) return *this;
  KernelExpr r;
  for (const auto& [key, c] : to_basis().terms_) {
    Kernel k = key.first;
    if (k == Kernel::DeltaR)
      k = Kernel::DeltaA;
    else if (k == Kernel::DeltaA)
      k = Kernel::DeltaR;
    r.add(k, key.second, c);
  }
  return r;
}

KernelExpr KernelExpr::real_part() const {
  KernelExpr r;
  for (const auto& [key, c] : to_basis().terms_) r.add(key.first, key.second, CRational(c.re));
  return r;
}

bool KernelExpr::singular_at_coincidence() const {
  return std::any_of(terms_.begin(), terms_.end(), [](const auto& kv) { return kv.first.first != Kernel::Q; });
}

int KernelExpr::min_hbar() const {
  if (terms_.empty()) return 0;
  int h = terms_.begin()->first.second;
  for (const auto& [key, c] : terms_) h = std::min(h, key.second);
  return h;
}

std::string KernelExpr::str() const {
  if (terms_.empty()) return "0";
  std::string s;
  for (const auto& [key, c] : terms_) {
    if (!s.empty()) s += " + ";
    s += "(" + c.str() + ")" + kernel_name(key.first);
    if (key.second) s += "@" + std::to_string(key.second);
  }
  return s;
}

// ---------------------------------------------------------------------------
// permutation search shared by the canonical forms

namespace {

// groups: lists of indices with equal descriptors, in canonical group order.
// Calls fn(pos) with pos[old index] = new index for every product of in-group permutations.
void for_each_group_permutation(const std::vector<std::vector<int>>& groups, int total,
                                const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> pos(total, 0);
  std::vector<std::vector<int>> cur = groups;
  for (auto& g : cur) std::sort(g.begin(), g.end());
  std::vector<int> offset(groups.size(), 0);
  for (std::size_t g = 1; g < groups.size(); ++g) offset[g] = offset[g - 1] + static_cast<int>(groups[g - 1].size());
  std::function<void(std::size_t)> rec = [&](std::size_t g) {
    if (g == cur.size()) {
      fn(pos);
      return;
    }
    auto& grp = cur[g];
    std::sort(grp.begin(), grp.end());
    do {
      for (std::size_t k = 0; k < grp.size(); ++k) pos[grp[k]] = offset[g] + static_cast<int>(k);
      rec(g + 1);
    } while (std::next_permutation(grp.begin(), grp.end()));
  };
  rec(0);
}

std::vector<std::vector<int>> group_by(const std::vector<std::string>& desc, std::vector<std::string>* sortedDesc) {
  std::map<std::string, std::vector<int>> m;
  for (int i = 0; i < static_cast<int>(desc.size()); ++i) m[desc[i]].push_back(i);
  std::vector<std::vector<int>> groups;
  for (auto& [d, idx] : m) {
    groups.push_back(idx);
    if (sortedDesc)
      for (std::size_t k = 0; k < idx.size(); ++k) sortedDesc->push_back(d);
  }
  return groups;
}

std::string join(const std::vector<std::string>& parts, const char* sep) {
  std::string s;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) s += sep;
    s += parts[i];
  }
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// generators

int VertexGenerator::free_leg_count() const {
  return static_cast<int>(std::count_if(legs.begin(), legs.end(), [](const ExternalLeg& l) { return l.free; }));
}

VertexGenerator unit_generator() { return {}; }

VertexGenerator vertex_generator(int charge, const std::string& smearing) {
  return dressed_vertex(charge, smearing, KernelExpr{});
}

VertexGenerator dressed_vertex(int charge, const std::string& smearing, const KernelExpr& dressing) {
  VertexGenerator g;
  g.charges = {charge};
  g.smearingIds = {smearing};
  g.selfWeights = {dressing};
  return g;
}

VertexGenerator field_generator(const std::string& smearing) {
  VertexGenerator g;
  g.legs.push_back({smearing, true});
  return g;
}

namespace {

VertexGenerator concat(const VertexGenerator& A, const VertexGenerator& B) {
  VertexGenerator r = A;
  const int nA = A.vertex_count();
  const int mA = static_cast<int>(A.legs.size());
  auto shift = [&](Endpoint e) {
    e.index += e.leg ? mA : nA;
    return e;
  };
  r.charges.insert(r.charges.end(), B.charges.begin(), B.charges.end());
  r.smearingIds.insert(r.smearingIds.end(), B.smearingIds.begin(), B.smearingIds.end());
  r.selfWeights.insert(r.selfWeights.end(), B.selfWeights.begin(), B.selfWeights.end());
  for (const auto& [ij, k] : B.pairExponents) r.pairExponents[{ij.first + nA, ij.second + nA}] = k;
  r.legs.insert(r.legs.end(), B.legs.begin(), B.legs.end());
  for (const auto& c : B.contractions) r.contractions.push_back({shift(c.a), shift(c.b), c.kernel});
  r.scalar = A.scalar * B.scalar;
  r.aPower = A.aPower + B.aPower;
  return r;
}

// factor i * c for a derivative hitting a vertex of charge c
void hit_vertex(VertexGenerator& g, int v) {
  g.scalar *= CRational(Rational(0), Rational(g.charges[v]));
  g.aPower += 1;
}

std::vector<int> free_legs_in(const VertexGenerator& g, int lo, int hi) {
  std::vector<int> out;
  for (int l = lo; l < hi; ++l)
    if (g.legs[l].free) out.push_back(l);
  return out;
}

}  // namespace

Functional pointwise_product(const Functional& A, const Functional& B) {
  Functional out;
  for (const auto& a : A)
    for (const auto& b : B) out.push_back(concat(a, b));
  return out;
}

Functional star_product(const VertexGenerator& A, const VertexGenerator& B, const KernelExpr& K) {
  VertexGenerator base = concat(A, B);
  if (K.is_zero()) return {base};
  const int nA = A.vertex_count(), nB = B.vertex_count();
  const int mA = static_cast<int>(A.legs.size()), mB = static_cast<int>(B.legs.size());
  for (int i = 0; i < nA; ++i)
    for (int j = 0; j < nB; ++j) {
      auto& slot = base.pairExponents[{i, nA + j}];
      slot += K;
    }
  const auto aLegs = free_legs_in(base, 0, mA);
  const auto bLegs = free_legs_in(base, mA, mA + mB);

  Functional out;
  std::function<void(std::size_t, VertexGenerator&)> recB = [&](std::size_t k, VertexGenerator& g) {
    if (k == bLegs.size()) {
      out.push_back(g);
      return;
    }
    const int l = bLegs[k];
    recB(k + 1, g);
    if (!g.legs[l].free) return;
    for (int i = 0; i < nA; ++i) {
      VertexGenerator h = g;
      h.legs[l].free = false;
      h.contractions.push_back({{false, i}, {true, l}, K});
      hit_vertex(h, i);
      recB(k + 1, h);
    }
  };
  std::function<void(std::size_t, VertexGenerator&)> recA = [&](std::size_t k, VertexGenerator& g) {
    if (k == aLegs.size()) {
      recB(0, g);
      return;
    }
    const int l = aLegs[k];
    recA(k + 1, g);
    for (int r : bLegs) {
      if (!g.legs[r].free) continue;
      VertexGenerator h = g;
      h.legs[l].free = false;
      h.legs[r].free = false;
      h.contractions.push_back({{true, l}, {true, r}, K});
      recA(k + 1, h);
    }
    for (int j = 0; j < nB; ++j) {
      VertexGenerator h = g;
      h.legs[l].free = false;
      h.contractions.push_back({{true, l}, {false, nA + j}, K});
      hit_vertex(h, nA + j);
      recA(k + 1, h);
    }
  };
  recA(0, base);
  return out;
}

Functional star_product(const Functional& A, const Functional& B, const KernelExpr& K) {
  Functional out;
  for (const auto& a : A)
    for (const auto& b : B) {
      auto t = star_product(a, b, K);
      out.insert(out.end(), t.begin(), t.end());
    }
  return out;
}

Functional gamma_deform(const VertexGenerator& A, const KernelExpr& K) {
  if (K.is_zero()) return {A};
  const int n = A.vertex_count();
  const bool charged = std::any_of(A.charges.begin(), A.charges.end(), [](int c) { return c != 0; });
  if (charged && K.singular_at_coincidence())
    throw Error(ErrorKind::SingularCoincidence, "deformation kernel " + K.str() + " has no coincidence limit");
  VertexGenerator base = A;
  for (int i = 0; i < n; ++i) base.selfWeights[i] += K;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) base.pairExponents[{i, j}] += K;
  const auto legs = free_legs_in(base, 0, static_cast<int>(base.legs.size()));

  Functional out;
  std::function<void(std::size_t, VertexGenerator&)> rec = [&](std::size_t k, VertexGenerator& g) {
    if (k == legs.size()) {
      out.push_back(g);
      return;
    }
    const int l = legs[k];
    if (!g.legs[l].free) {
      rec(k + 1, g);
      return;
    }
    rec(k + 1, g);
    for (std::size_t q = k + 1; q < legs.size(); ++q) {
      const int r = legs[q];
      if (!g.legs[r].free) continue;
      VertexGenerator h = g;
      h.legs[l].free = false;
      h.legs[r].free = false;
      h.contractions.push_back({{true, l}, {true, r}, K});
      rec(k + 1, h);
    }
    for (int j = 0; j < n; ++j) {
      VertexGenerator h = g;
      h.legs[l].free = false;
      h.contractions.push_back({{true, l}, {false, j}, K});
      hit_vertex(h, j);
      rec(k + 1, h);
    }
  };
  rec(0, base);
  return out;
}

Functional gamma_deform(const Functional& A, const KernelExpr& K) {
  Functional out;
  for (const auto& a : A) {
    auto t = gamma_deform(a, K);
    out.insert(out.end(), t.begin(), t.end());
  }
  return out;
}

Functional gamma_inverse(const Functional& A, const KernelExpr& K) { return gamma_deform(A, CRational(-1) * K); }

Functional time_ordered(const std::vector<Functional>& factors, const KernelExpr& K) {
  if (factors.empty()) return {unit_generator()};
  Functional acc = factors.front();
  for (std::size_t i = 1; i < factors.size(); ++i) acc = star_product(acc, factors[i], K);
  return acc;
}

Functional evaluate_at_zero(const Functional& A) {
  Functional out;
  for (const auto& g : A)
    if (g.free_leg_count() == 0) out.push_back(g);
  return out;
}

Functional leibniz_expand(const Functional& A, const Functional& B, const std::vector<std::string>& fields,
                          const KernelExpr& K) {
  const int m = static_cast<int>(fields.size());
  Functional out;
  for (unsigned mask = 0; mask < (1u << m); ++mask) {
    std::vector<std::string> contracted, spectator;
    for (int f = 0; f < m; ++f) (mask >> f & 1u ? contracted : spectator).push_back(fields[f]);
    Functional rest{unit_generator()};
    for (const auto& s : spectator) rest = pointwise_product(rest, {field_generator(s)});

    for (const auto& a : A) {
      // distribute the contracted fields over the derivatives of A
      Functional primed;
      std::function<void(std::size_t, VertexGenerator&)> rec = [&](std::size_t k, VertexGenerator& g) {
        if (k == contracted.size()) {
          primed.push_back(g);
          return;
        }
        const int newLeg = static_cast<int>(g.legs.size());
        for (int i = 0; i < g.vertex_count(); ++i) {
          VertexGenerator h = g;
          h.legs.push_back({contracted[k], false});
          h.contractions.push_back({{false, i}, {true, newLeg}, K});
          hit_vertex(h, i);
          rec(k + 1, h);
        }
        for (int l = 0; l < newLeg; ++l) {
          if (!g.legs[l].free) continue;
          VertexGenerator h = g;
          h.legs[l].free = false;
          h.legs.push_back({contracted[k], false});
          h.contractions.push_back({{true, l}, {true, newLeg}, K});
          rec(k + 1, h);
        }
      };
      VertexGenerator start = a;
      rec(0, start);
      auto prod = star_product(primed, B, K);
      prod = pointwise_product(prod, rest);
      out.insert(out.end(), prod.begin(), prod.end());
    }
  }
  return out;
}

namespace {

struct GenKey {
  std::string key;
  CRational factor{1};
};

GenKey generator_key(const VertexGenerator& g) {
  const int n = g.vertex_count();
  const int m = static_cast<int>(g.legs.size());
  std::vector<std::string> vdesc(n), ldesc(m);
  for (int i = 0; i < n; ++i)
    vdesc[i] = std::to_string(g.charges[i]) + "|" + g.smearingIds[i] + "|" + g.selfWeights[i].to_basis().str();
  for (int l = 0; l < m; ++l) ldesc[l] = g.legs[l].smearing + (g.legs[l].free ? "|free" : "|bound");
  std::vector<std::string> vs, ls;
  auto vgroups = group_by(vdesc, &vs);
  auto lgroups = group_by(ldesc, &ls);
  const std::string head = "V[" + join(vs, ";") + "]L[" + join(ls, ";") + "]a" + std::to_string(g.aPower);

  GenKey best;
  bool have = false;
  for_each_group_permutation(vgroups, n, [&](const std::vector<int>& vpos) {
    for_each_group_permutation(lgroups, m, [&](const std::vector<int>& lpos) {
      std::vector<std::string> ex, cs;
      for (const auto& [ij, k] : g.pairExponents) {
        if (k.is_zero()) continue;
        int a = vpos[ij.first], b = vpos[ij.second];
        KernelExpr kk = k;
        if (a > b) {
          std::swap(a, b);
          kk = kk.transpose();
        }
        ex.push_back(std::to_string(a) + "," + std::to_string(b) + ":" + kk.to_basis().str());
      }
      CRational factor(1);
      for (const auto& c : g.contractions) {
        int a = c.a.leg ? 1000 + lpos[c.a.index] : vpos[c.a.index];
        int b = c.b.leg ? 1000 + lpos[c.b.index] : vpos[c.b.index];
        KernelExpr kk = c.kernel;
        if (a > b) {
          std::swap(a, b);
          kk = kk.transpose();
        }
        kk = kk.to_basis();
        if (kk.is_zero()) {
          factor = CRational(0);
          continue;
        }
        const CRational lead = kk.terms().begin()->second;
        factor *= lead;
        kk = inverse(lead) * kk;
        cs.push_back(std::to_string(a) + "," + std::to_string(b) + ":" + kk.str());
      }
      std::sort(ex.begin(), ex.end());
      std::sort(cs.begin(), cs.end());
      std::string key = head + "E[" + join(ex, ";") + "]C[" + join(cs, ";") + "]";
      if (!have || key < best.key) {
        best = {std::move(key), factor};
        have = true;
      }
    });
  });
  return best;
}

}  // namespace

std::map<std::string, CRational> term_multiset(const Functional& A) {
  std::map<std::string, CRational> out;
  for (const auto& g : A) {
    auto k = generator_key(g);
    out[k.key] += g.scalar * k.factor;
  }
  for (auto it = out.begin(); it != out.end();) it = it->second.is_zero() ? out.erase(it) : std::next(it);
  return out;
}

Functional simplify(const Functional& A) {
  struct Slot {
    VertexGenerator rep;
    CRational repFactor;
    CRational total;
  };
  std::map<std::string, Slot> slots;
  for (const auto& g : A) {
    auto k = generator_key(g);
    auto it = slots.find(k.key);
    if (it == slots.end())
      slots.emplace(k.key, Slot{g, k.factor, g.scalar * k.factor});
    else
      it->second.total += g.scalar * k.factor;
  }
  Functional out;
  for (auto& [key, s] : slots) {
    if (s.total.is_zero() || s.repFactor.is_zero()) continue;
    s.rep.scalar = s.total * inverse(s.repFactor);
    out.push_back(std::move(s.rep));
  }
  return out;
}

// ---------------------------------------------------------------------------
// term graphs

int TermGraph::left_block_size() const {
  return static_cast<int>(std::count_if(vertices.begin(), vertices.end(), [](const TGVertex& v) { return v.block == kAntiTimeOrdered; }));
}

int TermGraph::right_block_size() const {
  return static_cast<int>(std::count_if(vertices.begin(), vertices.end(), [](const TGVertex& v) { return v.block == kTimeOrdered; }));
}

int TermGraph::degree(int endpoint) const {
  int d = 0;
  for (const auto& e : edges) {
    if (e.exponential) continue;
    if (e.a == endpoint) d += e.multiplicity;
    if (e.b == endpoint) d += e.multiplicity;
  }
  return d;
}

bool TermGraph::leg_free(int l) const { return degree(n() + l) == 0; }

int TermGraph::free_leg_count() const {
  int c = 0;
  for (int l = 0; l < m(); ++l) c += leg_free(l) ? 1 : 0;
  return c;
}

int TermGraph::contraction_count() const {
  int c = 0;
  for (const auto& e : edges)
    if (!e.exponential) c += e.multiplicity;
  return c;
}

bool TermGraph::connected_to_legs() const {
  const int N = n() + m();
  std::vector<int> parent(N);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
  for (const auto& e : edges)
    if (!e.exponential) parent[find(e.a)] = find(e.b);
  std::set<int> legRoots;
  for (int l = 0; l < m(); ++l) legRoots.insert(find(n() + l));
  for (int v = 0; v < n(); ++v)
    if (!legRoots.count(find(v))) return false;
  return true;
}

int hbar_grade(const TermGraph& t) {
  int g = t.hbarPrefactor;
  for (const auto& e : t.edges)
    if (!e.exponential) g += e.multiplicity * e.kernel.min_hbar();
  return g;
}

std::string canonical_key(const TermGraph& t, KeyMode mode, bool eraseBlocks) {
  const int n = t.n(), m = t.m();
  std::vector<std::string> vdesc(n), ldesc(m);
  for (int i = 0; i < n; ++i) {
    const auto& v = t.vertices[i];
    std::ostringstream s;
    if (mode == KeyMode::labeled) s << "#" << v.label << "|";
    s << (eraseBlocks ? std::string("*") : std::to_string(v.block)) << "|" << v.charge << "|" << v.smearing << "|"
      << v.extraDerivatives << "|" << (v.dressed ? "Q" : "-");
    vdesc[i] = s.str();
  }
  for (int l = 0; l < m; ++l)
    ldesc[l] = (mode == KeyMode::labeled ? "#" + std::to_string(t.legs[l].label) + "|" : std::string()) + t.legs[l].smearing;
  std::vector<std::string> vs, ls;
  auto vgroups = group_by(vdesc, &vs);
  auto lgroups = group_by(ldesc, &ls);
  const std::string head =
      "h" + std::to_string(t.hbarPrefactor) + "V[" + join(vs, ";") + "]L[" + join(ls, ";") + "]";

  std::string best;
  bool have = false;
  for_each_group_permutation(vgroups, n, [&](const std::vector<int>& vpos) {
    for_each_group_permutation(lgroups, m, [&](const std::vector<int>& lpos) {
      std::vector<std::string> es;
      for (const auto& e : t.edges) {
        int a = e.a < n ? vpos[e.a] : 1000 + lpos[e.a - n];
        int b = e.b < n ? vpos[e.b] : 1000 + lpos[e.b - n];
        KernelExpr kk = e.kernel;
        if (a > b) {
          std::swap(a, b);
          kk = kk.transpose();
        }
        es.push_back(std::to_string(a) + "," + std::to_string(b) + ":" + kk.str() + "^" +
                     std::to_string(e.multiplicity) + (e.exponential ? "e" : ""));
      }
      std::sort(es.begin(), es.end());
      std::string key = head + "E[" + join(es, ";") + "]";
      if (!have || key < best) {
        best = std::move(key);
        have = true;
      }
    });
  });
  return best;
}

Expansion merge_terms(const Expansion& terms, KeyMode mode, bool eraseBlocks) {
  std::map<std::string, TermGraph> slots;
  for (const auto& t : terms) {
    auto key = canonical_key(t, mode, eraseBlocks);
    auto it = slots.find(key);
    if (it == slots.end())
      slots.emplace(std::move(key), t);
    else
      it->second.coeff += t.coeff;
  }
  Expansion out;
  for (auto& [k, t] : slots)
    if (!t.coeff.is_zero()) out.push_back(std::move(t));
  return out;
}

Expansion vertex_term(int block, int label, const std::string& smearing) {
  TermGraph t;
  TGVertex v;
  v.block = block;
  v.label = label;
  v.smearing = smearing;
  t.vertices.push_back(v);
  return {t};
}

Expansion fields_term(const std::vector<std::string>& smearings) {
  TermGraph t;
  for (std::size_t l = 0; l < smearings.size(); ++l) t.legs.push_back({smearings[l], static_cast<int>(l)});
  return {t};
}

namespace {

TermGraph concat(const TermGraph& A, const TermGraph& B) {
  TermGraph r;
  const int nA = A.n(), nB = B.n(), mA = A.m();
  const int n = nA + nB;
  r.vertices = A.vertices;
  r.vertices.insert(r.vertices.end(), B.vertices.begin(), B.vertices.end());
  r.legs = A.legs;
  r.legs.insert(r.legs.end(), B.legs.begin(), B.legs.end());
  auto mapA = [&](int e) { return e < nA ? e : n + (e - nA); };
  auto mapB = [&](int e) { return e < nB ? nA + e : n + mA + (e - nB); };
  for (auto e : A.edges) {
    e.a = mapA(e.a);
    e.b = mapA(e.b);
    r.edges.push_back(std::move(e));
  }
  for (auto e : B.edges) {
    e.a = mapB(e.a);
    e.b = mapB(e.b);
    r.edges.push_back(std::move(e));
  }
  r.coeff = A.coeff * B.coeff;
  r.hbarPrefactor = A.hbarPrefactor + B.hbarPrefactor;
  return r;
}

void add_exponential(TermGraph& t, int a, int b, const KernelExpr& K) {
  for (auto& e : t.edges) {
    if (!e.exponential) continue;
    if (e.a == a && e.b == b) {
      e.kernel += K;
      return;
    }
    if (e.a == b && e.b == a) {
      e.kernel += K.transpose();
      return;
    }
  }
  t.edges.push_back({a, b, K, 1, true});
}

}  // namespace

Expansion pointwise(const Expansion& A, const Expansion& B) {
  Expansion out;
  for (const auto& a : A)
    for (const auto& b : B) out.push_back(concat(a, b));
  return out;
}

Expansion star(const Expansion& A, const Expansion& B, const KernelExpr& K, const StarOptions& opt) {
  if (!opt.exponentialVertexPairs && opt.maxEdges < 0)
    throw Error(ErrorKind::Config, "polynomial star expansion needs a finite edge budget");
  Expansion out;
  for (const auto& ta : A)
    for (const auto& tb : B) {
      TermGraph base = concat(ta, tb);
      const int nA = ta.n(), nB = tb.n(), n = nA + nB, mA = ta.m();
      int budget = opt.maxEdges < 0 ? 1 << 20 : opt.maxEdges - base.contraction_count();
      if (budget < 0) continue;
      std::vector<int> aLegs, bLegs;
      for (int l = 0; l < ta.m(); ++l)
        if (ta.leg_free(l)) aLegs.push_back(n + l);
      for (int l = 0; l < tb.m(); ++l)
        if (tb.leg_free(l)) bLegs.push_back(n + mA + l);

      std::vector<std::pair<int, int>> pairs;
      for (int i = 0; i < nA; ++i)
        for (int j = 0; j < nB; ++j) pairs.push_back({i, nA + j});
      if (opt.exponentialVertexPairs)
        for (auto [i, j] : pairs) add_exponential(base, i, j, K);

      std::vector<char> used(n + base.m(), 0);
      std::function<void(std::size_t, TermGraph&, int)> recB = [&](std::size_t k, TermGraph& g, int left) {
        if (k == bLegs.size()) {
          out.push_back(g);
          return;
        }
        const int l = bLegs[k];
        recB(k + 1, g, left);
        if (used[l] || left == 0) return;
        for (int i = 0; i < nA; ++i) {
          TermGraph h = g;
          h.edges.push_back({i, l, K, 1, false});
          recB(k + 1, h, left - 1);
        }
      };
      std::function<void(std::size_t, TermGraph&, int)> recA = [&](std::size_t k, TermGraph& g, int left) {
        if (k == aLegs.size()) {
          recB(0, g, left);
          return;
        }
        const int l = aLegs[k];
        recA(k + 1, g, left);
        if (left == 0) return;
        for (int r : bLegs) {
          if (used[r]) continue;
          TermGraph h = g;
          h.edges.push_back({l, r, K, 1, false});
          used[r] = 1;
          recA(k + 1, h, left - 1);
          used[r] = 0;
        }
        for (int j = nA; j < n; ++j) {
          TermGraph h = g;
          h.edges.push_back({l, j, K, 1, false});
          recA(k + 1, h, left - 1);
        }
      };
      std::function<void(std::size_t, TermGraph&, int)> recPairs = [&](std::size_t k, TermGraph& g, int left) {
        if (opt.exponentialVertexPairs || k == pairs.size()) {
          recA(0, g, left);
          return;
        }
        recPairs(k + 1, g, left);
        for (int mult = 1; mult <= left; ++mult) {
          TermGraph h = g;
          h.edges.push_back({pairs[k].first, pairs[k].second, K, mult, false});
          h.coeff *= CRational(Rational(1) / factorial(mult));
          recPairs(k + 1, h, left - mult);
        }
      };
      recPairs(0, base, budget);
    }
  return out;
}

Expansion apply_gamma_q(const Expansion& terms) {
  const KernelExpr Q = KernelExpr::basis(Kernel::Q);
  Expansion out;
  for (const auto& t : terms) {
    TermGraph base = t;
    const int n = t.n();
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) add_exponential(base, i, j, Q);
    for (auto& v : base.vertices) v.dressed = true;
    std::vector<int> legs;
    for (int l = 0; l < t.m(); ++l)
      if (t.leg_free(l)) legs.push_back(n + l);
    std::vector<char> used(n + t.m(), 0);
    std::function<void(std::size_t, TermGraph&)> rec = [&](std::size_t k, TermGraph& g) {
      if (k == legs.size()) {
        out.push_back(g);
        return;
      }
      const int l = legs[k];
      if (used[l]) {
        rec(k + 1, g);
        return;
      }
      rec(k + 1, g);
      for (std::size_t q = k + 1; q < legs.size(); ++q) {
        const int r = legs[q];
        if (used[r]) continue;
        TermGraph h = g;
        h.edges.push_back({l, r, Q, 1, false});
        used[r] = 1;
        rec(k + 1, h);
        used[r] = 0;
      }
      for (int j = 0; j < n; ++j) {
        TermGraph h = g;
        h.edges.push_back({j, l, Q, 1, false});
        rec(k + 1, h);
      }
    };
    rec(0, base);
  }
  return out;
}

Expansion drop_free_legs(const Expansion& terms) {
  Expansion out;
  for (const auto& t : terms)
    if (t.free_leg_count() == 0) out.push_back(t);
  return out;
}

Expansion scale(const Expansion& terms, const CRational& c, int hbarShift) {
  Expansion out = terms;
  for (auto& t : out) {
    t.coeff *= c;
    t.hbarPrefactor += hbarShift;
  }
  return out;
}

Expansion to_basis(const Expansion& terms) {
  Expansion out;
  for (const auto& t : terms) {
    std::vector<TermGraph> partial;
    TermGraph skeleton = t;
    skeleton.edges.clear();
    for (const auto& e : t.edges)
      if (e.exponential) skeleton.edges.push_back(e);
    partial.push_back(skeleton);
    for (const auto& e : t.edges) {
      if (e.exponential) continue;
      const KernelExpr kb = e.kernel.to_basis();
      std::vector<std::pair<KernelExpr::Key, CRational>> parts(kb.terms().begin(), kb.terms().end());
      // distribute the multiplicity over the basis terms (multinomial expansion)
      std::vector<TermGraph> next;
      std::vector<int> ks(parts.size(), 0);
      std::function<void(std::size_t, int)> rec = [&](std::size_t p, int left) {
        if (p + 1 == parts.size() || parts.empty()) {
          if (parts.empty()) return;
          ks[p] = left;
          Rational mult = factorial(e.multiplicity);
          CRational c(1);
          for (std::size_t q = 0; q < parts.size(); ++q) {
            mult /= factorial(ks[q]);
            for (int r = 0; r < ks[q]; ++r) c *= parts[q].second;
          }
          c *= CRational(mult);
          for (const auto& base : partial) {
            TermGraph h = base;
            h.coeff *= c;
            for (std::size_t q = 0; q < parts.size(); ++q) {
              if (!ks[q]) continue;
              Kernel k = parts[q].first.first;
              int a = e.a, b = e.b;
              if (k == Kernel::DeltaA) {
                k = Kernel::DeltaR;
                std::swap(a, b);
              } else if (k != Kernel::DeltaR && a > b) {
                std::swap(a, b);
              }
              KernelExpr kk = KernelExpr::basis(k, parts[q].first.second);
              bool merged = false;
              for (auto& x : h.edges)
                if (!x.exponential && x.a == a && x.b == b && x.kernel == kk) {
                  x.multiplicity += ks[q];
                  merged = true;
                  break;
                }
              if (!merged) h.edges.push_back({a, b, kk, ks[q], false});
            }
            next.push_back(std::move(h));
          }
          return;
        }
        for (int k = 0; k <= left; ++k) {
          ks[p] = k;
          rec(p + 1, left - k);
        }
      };
      rec(0, e.multiplicity);
      partial = std::move(next);
    }
    out.insert(out.end(), partial.begin(), partial.end());
  }
  return out;
}

namespace {

// arcs u -> v meaning v lies in the causal future of u
std::vector<std::pair<int, int>> retarded_arcs(const TermGraph& t) {
  std::vector<std::pair<int, int>> arcs;
  for (const auto& e : t.edges) {
    if (e.exponential) continue;
    for (const auto& [key, c] : e.kernel.terms()) {
      if (key.first == Kernel::DeltaR) arcs.push_back({e.b, e.a});
      if (key.first == Kernel::DeltaA) arcs.push_back({e.a, e.b});
    }
  }
  return arcs;
}

}  // namespace

bool has_retarded_cycle(const TermGraph& t) {
  const int N = t.n() + t.m();
  std::vector<std::vector<int>> adj(N);
  for (auto [u, v] : retarded_arcs(t)) adj[u].push_back(v);
  std::vector<int> state(N, 0);
  std::function<bool(int)> dfs = [&](int u) {
    state[u] = 1;
    for (int v : adj[u]) {
      if (state[v] == 1) return true;
      if (state[v] == 0 && dfs(v)) return true;
    }
    state[u] = 2;
    return false;
  };
  for (int u = 0; u < N; ++u)
    if (state[u] == 0 && dfs(u)) return true;
  return false;
}

bool violates_earliest(const TermGraph& t, int earliestLabel) {
  int h = -1;
  for (int i = 0; i < t.n(); ++i)
    if (t.vertices[i].label == earliestLabel) h = i;
  if (h < 0) return false;
  for (auto [u, v] : retarded_arcs(t))
    if (v == h) return true;
  return false;
}

Observable default_observable(int m) {
  if (m == 1) return Observable::field("f");
  std::vector<std::string> fs;
  for (int l = 1; l <= m; ++l) fs.push_back("f" + std::to_string(l));
  return Observable::product(fs);
}

namespace {

Expansion observable_term(const Observable& obs, int label) {
  if (!obs.localVertex.empty()) return vertex_term(kExternal, label, obs.localVertex);
  return fields_term(obs.fields);
}

}  // namespace

Expansion bogoliubov_terms(int n, const Observable& obs, const StarOptions& opt, int firstLabel) {
  const KernelExpr Kaf = KernelExpr::basis(Kernel::DeltaAF, 1);
  const KernelExpr Kf = KernelExpr::basis(Kernel::DeltaF, 1);
  const KernelExpr Kw = KernelExpr::basis(Kernel::Omega, 1);
  Expansion out;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    Expansion left{TermGraph{}}, right{TermGraph{}};
    for (int j = 0; j < n; ++j) {
      if (mask >> j & 1u)
        left = star(left, vertex_term(kAntiTimeOrdered, firstLabel + j), Kaf, opt);
      else
        right = star(right, vertex_term(kTimeOrdered, firstLabel + j), Kf, opt);
    }
    right = star(right, observable_term(obs, firstLabel + n), Kf, opt);
    auto terms = star(left, right, Kw, opt);
    const int ell = std::popcount(mask);
    CRational c = CRational::i_pow(n) * CRational(ell % 2 ? -1 : 1);
    terms = scale(terms, c, -n);
    out.insert(out.end(), terms.begin(), terms.end());
  }
  return out;
}

Certificate uncontracted_cancellation(int n, int m, int maxEdges) {
  if (maxEdges < 0) maxEdges = n + m;
  Certificate cert;
  cert.n = n;
  cert.m = m;
  auto terms = bogoliubov_terms(n, default_observable(m), {maxEdges, false}, 0);
  std::map<std::string, std::pair<CRational, TermGraph>> sums;
  for (auto t : terms) {
    int marked = -1;
    for (int i = 0; i < t.n(); ++i)
      if (t.vertices[i].label == 0) marked = i;
    if (marked < 0 || t.degree(marked) != 0) continue;
    ++cert.termsChecked;
    t.vertices[marked].block = -1;
    auto key = canonical_key(t, KeyMode::labeled);
    auto it = sums.find(key);
    if (it == sums.end())
      sums.emplace(key, std::make_pair(t.coeff, t));
    else
      it->second.first += t.coeff;
  }
  cert.groups = sums.size();
  for (const auto& [key, s] : sums) {
    if (!s.first.is_zero()) {
      cert.ok = false;
      cert.detail = key + " -> " + s.first.str();
      throw Error(ErrorKind::CancellationFailure, "uncontracted terms do not cancel: " + cert.detail);
    }
  }
  return cert;
}

namespace {

// basis rewrite of the lowest strata, blocks erased, causal cycles removed
Expansion graded_strata(int n, const Observable& obs) {
  auto terms = bogoliubov_terms(n, obs, {n, false}, 0);
  auto basis = to_basis(terms);
  Expansion kept;
  for (auto& t : basis) {
    for (auto& v : t.vertices)
      if (v.block != kExternal) v.block = kTimeOrdered;
    if (!has_retarded_cycle(t)) kept.push_back(std::move(t));
  }
  return merge_terms(kept, KeyMode::labeled);
}

}  // namespace

int hbar_floor(int n, int m) {
  auto terms = graded_strata(n, default_observable(m));
  int floor = 1 << 20;
  for (const auto& t : terms) floor = std::min(floor, hbar_grade(t));
  if (terms.empty()) floor = 0;
  if (floor < 0) {
    for (const auto& t : terms)
      if (hbar_grade(t) < 0)
        throw Error(ErrorKind::NegativeGrade,
                    "term with grade " + std::to_string(hbar_grade(t)) + ": " + canonical_key(t, KeyMode::labeled));
  }
  return floor;
}

Expansion classical_term(int n, const Observable& obs) {
  Expansion out;
  for (auto& t : graded_strata(n, obs)) {
    const int g = hbar_grade(t);
    if (g < 0)
      throw Error(ErrorKind::NegativeGrade, "negative grade term: " + canonical_key(t, KeyMode::labeled));
    if (g == 0) out.push_back(std::move(t));
  }
  return out;
}

Expansion picture_terms(int n, const Observable& obs) {
  auto terms = bogoliubov_terms(n, obs, {n, false}, 0);
  Expansion kept;
  for (auto& t : terms)
    if (t.contraction_count() == n && t.connected_to_legs()) kept.push_back(std::move(t));
  kept = merge_terms(kept, KeyMode::isomorphic);
  return scale(kept, CRational(Rational(1) / factorial(n)));
}

namespace {

Expansion charge_sectors(int n, Kernel k, int iPower) {
  if (n == 0) return {TermGraph{}};
  const KernelExpr K = KernelExpr::basis(Kernel::Q) + KernelExpr::basis(k, 1);
  Expansion out;
  for (int plus = 0; plus <= n; ++plus) {
    TermGraph t;
    for (int j = 0; j < n; ++j) {
      TGVertex v;
      v.charge = j < plus ? 1 : -1;
      v.dressed = true;
      v.label = j;
      t.vertices.push_back(v);
    }
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) t.edges.push_back({i, j, K, 1, true});
    t.coeff = CRational::i_pow(iPower) * CRational(binomial(n, plus) / (factorial(n) * Rational(1u << n)));
    t.hbarPrefactor = -n;
    out.push_back(std::move(t));
  }
  return out;
}

Expansion field_term(int n, const std::string& f, bool markLeft) {
  const KernelExpr Q = KernelExpr::basis(Kernel::Q);
  const KernelExpr Kaf = Q + KernelExpr::basis(Kernel::DeltaAF, 1);
  const KernelExpr Kf = Q + KernelExpr::basis(Kernel::DeltaF, 1);
  const KernelExpr Kw = Q + KernelExpr::basis(Kernel::Omega, 1);
  Expansion out;
  for (int ell = 0; ell <= n; ++ell) {
    const int weight = markLeft ? ell : n - ell;
    if (weight == 0) continue;
    TermGraph t;
    for (int j = 0; j < n; ++j) {
      TGVertex v;
      v.block = j < ell ? kAntiTimeOrdered : kTimeOrdered;
      v.dressed = true;
      v.label = j;
      t.vertices.push_back(v);
    }
    t.legs.push_back({f, 0});
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        const bool li = i < ell, lj = j < ell;
        t.edges.push_back({i, j, li && lj ? Kaf : (!li && !lj ? Kf : Kw), 1, true});
      }
    const int marked = markLeft ? 0 : ell;
    t.edges.push_back({marked, n, markLeft ? Kw : Kf, 1, false});
    Rational w = binomial(n, ell) * weight / factorial(n);
    if (ell % 2) w = -w;
    t.coeff = CRational::i_pow(n) * CRational(w);
    t.hbarPrefactor = -n;
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

Expansion qs_term(int n) { return charge_sectors(n, Kernel::DeltaF, n); }

Expansion inverse_qs_term(int n) { return charge_sectors(n, Kernel::DeltaAF, -n); }

Expansion interacting_field_term_J(int n, const std::string& f) {
  if (n == 0) return fields_term({f});
  return field_term(n, f, true);
}

Expansion interacting_field_term_M(int n, const std::string& f) {
  if (n == 0) return {};
  return field_term(n, f, false);
}

Expansion wick_expand(int p, const std::vector<std::string>& smearings) {
  std::vector<std::string> fs = smearings;
  for (int l = static_cast<int>(fs.size()); l < p; ++l) fs.push_back("f" + std::to_string(l + 1));
  fs.resize(p);
  return apply_gamma_q(fields_term(fs));
}

std::vector<std::vector<std::vector<int>>> set_partitions(int n) {
  std::vector<std::vector<std::vector<int>>> out;
  std::vector<std::vector<int>> cur;
  std::function<void(int)> rec = [&](int i) {
    if (i == n) {
      out.push_back(cur);
      return;
    }
    for (std::size_t b = 0; b < cur.size(); ++b) {
      cur[b].push_back(i);
      rec(i + 1);
      cur[b].pop_back();
    }
    cur.push_back({i});
    rec(i + 1);
    cur.pop_back();
  };
  rec(0);
  return out;
}

ConnectedDecomposition connected_decomposition(int nFactors, const KernelExpr& K, int maxEdges) {
  const StarOptions opt{maxEdges, false};
  auto product_of = [&](const std::vector<int>& block) {
    Expansion acc{TermGraph{}};
    for (int j : block) acc = star(acc, vertex_term(kTimeOrdered, j), K, opt);
    return acc;
  };
  auto truncate = [&](Expansion e) {
    Expansion out;
    for (auto& t : e)
      if (t.contraction_count() <= maxEdges) out.push_back(std::move(t));
    return merge_terms(out, KeyMode::labeled);
  };
  ConnectedDecomposition d;
  std::vector<int> all(nFactors);
  std::iota(all.begin(), all.end(), 0);
  d.full = truncate(product_of(all));
  Expansion conn;
  for (const auto& pi : set_partitions(nFactors)) {
    const int k = static_cast<int>(pi.size());
    Rational mu = factorial(k - 1);
    if ((k - 1) % 2) mu = -mu;
    d.partitions.push_back({pi, CRational(mu)});
    Expansion prod{TermGraph{}};
    for (const auto& b : pi) prod = pointwise(prod, product_of(b));
    prod = scale(prod, CRational(mu));
    conn.insert(conn.end(), prod.begin(), prod.end());
  }
  d.connected = truncate(conn);
  return d;
}

Expansion retarded_commutator_residual(int n, const Observable& obs, int maxEdges) {
  const StarOptions opt{maxEdges, false};
  const KernelExpr Kw = KernelExpr::basis(Kernel::Omega, 1);
  auto lhs = bogoliubov_terms(n + 1, obs, opt, 0);
  auto R = bogoliubov_terms(n, obs, opt, 1);
  auto Vh = vertex_term(kTimeOrdered, 0);
  auto left = star(Vh, R, Kw, opt);
  auto right = scale(star(R, Vh, Kw, opt), CRational(-1));
  Expansion all = lhs;
  for (auto* part : {&left, &right}) {
    auto s = scale(*part, CRational::i_pow(1), -1);
    all.insert(all.end(), s.begin(), s.end());
  }
  Expansion kept;
  for (auto& t : to_basis(all)) {
    for (auto& v : t.vertices)
      if (v.block != kExternal) v.block = kTimeOrdered;
    if (has_retarded_cycle(t) || violates_earliest(t, 0)) continue;
    kept.push_back(std::move(t));
  }
  return merge_terms(kept, KeyMode::labeled);
}

// ---------------------------------------------------------------------------
// rendering

namespace {

const char* edge_color(const KernelExpr& k) {
  for (const auto& [key, c] : k.terms()) {
    switch (key.first) {
      case Kernel::DeltaF: return "black";
      case Kernel::Omega: return "green";
      case Kernel::DeltaAF: return "red";
      case Kernel::DeltaR:
      case Kernel::DeltaA:
      case Kernel::Delta: return "orange";
      case Kernel::H:
      case Kernel::H0: return "gray";
      case Kernel::Q: break;
    }
  }
  return "blue";
}

std::string endpoint_name(const TermGraph& t, int e, const std::string& prefix) {
  return e < t.n() ? prefix + "v" + std::to_string(e) : prefix + "f" + std::to_string(e - t.n());
}

void render_body(std::ostringstream& s, const TermGraph& t, const std::string& prefix, const std::string& indent) {
  for (int i = 0; i < t.n(); ++i) {
    const auto& v = t.vertices[i];
    s << indent << prefix << "v" << i << " [shape=circle, style=filled, fillcolor=black, width=0.12, label=\"\", xlabel=\""
      << v.smearing << (v.dressed ? "_Q" : "") << (v.block == kAntiTimeOrdered ? " L" : v.block == kTimeOrdered ? " T" : " X")
      << "\"];\n";
  }
  for (int l = 0; l < t.m(); ++l)
    s << indent << prefix << "f" << l << " [shape=circle, style=filled, fillcolor=purple, width=0.12, label=\"\", xlabel=\""
      << t.legs[l].smearing << "\"];\n";
  for (const auto& e : t.edges) {
    s << indent << endpoint_name(t, e.a, prefix) << " -- " << endpoint_name(t, e.b, prefix) << " [color=" << edge_color(e.kernel)
      << ", label=\"" << e.kernel.str();
    if (e.multiplicity > 1) s << " x" << e.multiplicity;
    s << "\"" << (e.exponential ? ", style=dashed" : "") << "];\n";
  }
}

}  // namespace

std::string graph_render(const TermGraph& t, const std::string& name) {
  std::ostringstream s;
  s << "graph " << name << " {\n";
  if (t.n() + t.m() > 0) {
    s << "  label=\"coeff " << t.coeff.str() << " hbar^" << hbar_grade(t) << "\";\n";
    render_body(s, t, "", "  ");
  }
  s << "}\n";
  return s.str();
}

std::string graph_render(const Expansion& terms, const std::string& name) {
  std::ostringstream s;
  s << "graph " << name << " {\n";
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const auto& t = terms[k];
    s << "  subgraph cluster_" << k << " {\n";
    s << "    label=\"coeff " << t.coeff.str() << " hbar^" << hbar_grade(t) << "\";\n";
    render_body(s, t, "t" + std::to_string(k) + "_", "    ");
    s << "  }\n";
  }
  s << "}\n";
  return s.str();
}

namespace {

nlohmann::json rational_json(const Rational& r) {
  return {{"num", numerator(r).str()}, {"den", denominator(r).str()}};
}

}  // namespace

nlohmann::json to_json(const TermGraph& t) {
  nlohmann::json j;
  j["vertices"] = nlohmann::json::array();
  for (const auto& v : t.vertices)
    j["vertices"].push_back({{"block", v.block},
                             {"charge", v.charge},
                             {"smearing", v.smearing},
                             {"extra_derivatives", v.extraDerivatives},
                             {"dressed", v.dressed},
                             {"label", v.label}});
  j["legs"] = nlohmann::json::array();
  for (const auto& l : t.legs) j["legs"].push_back({{"smearing", l.smearing}, {"label", l.label}});
  j["edges"] = nlohmann::json::array();
  for (const auto& e : t.edges) {
    nlohmann::json k = nlohmann::json::array();
    for (const auto& [key, c] : e.kernel.terms())
      k.push_back({{"kernel", kernel_name(key.first)}, {"hbar", key.second}, {"re", rational_json(c.re)}, {"im", rational_json(c.im)}});
    j["edges"].push_back({{"a", e.a}, {"b", e.b}, {"kernel", k}, {"multiplicity", e.multiplicity}, {"exponential", e.exponential}});
  }
  // coefficient as r * i^k when it is real or imaginary
  if (t.coeff.im == 0) {
    j["coeff_num"] = numerator(t.coeff.re).str();
    j["coeff_den"] = denominator(t.coeff.re).str();
    j["i_power"] = 0;
  } else if (t.coeff.re == 0) {
    j["coeff_num"] = numerator(t.coeff.im).str();
    j["coeff_den"] = denominator(t.coeff.im).str();
    j["i_power"] = 1;
  } else {
    j["coeff_num"] = nullptr;
    j["coeff_den"] = nullptr;
    j["i_power"] = nullptr;
  }
  j["coeff_re"] = rational_json(t.coeff.re);
  j["coeff_im"] = rational_json(t.coeff.im);
  j["hbar_prefactor"] = t.hbarPrefactor;
  j["hbar_degree"] = hbar_grade(t);
  return j;
}

nlohmann::json to_json(const Expansion& terms) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& t : terms) j.push_back(to_json(t));
  return j;
}

}  // namespace ssg
