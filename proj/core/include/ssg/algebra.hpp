#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <complex>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "ssg/errors.hpp"

namespace ssg {

using Rational = boost::multiprecision::cpp_rational;

// Exact complex rational: re + i*im
struct CRational {
  Rational re{0};
  Rational im{0};

  CRational() = default;
  CRational(long long r) : re(r) {}
  CRational(Rational r, Rational i = Rational(0)) : re(std::move(r)), im(std::move(i)) {}

  static CRational i_pow(int k);
  bool is_zero() const { return re == 0 && im == 0; }
  CRational conj() const { return {re, -im}; }
  std::complex<double> to_complex() const;
  std::string str() const;

  CRational operator-() const { return {-re, -im}; }
  CRational& operator+=(const CRational& o) {
    re += o.re;
    im += o.im;
    return *this;
  }
  CRational& operator-=(const CRational& o) {
    re -= o.re;
    im -= o.im;
    return *this;
  }
  CRational& operator*=(const CRational& o);
  friend CRational operator+(CRational a, const CRational& b) { return a += b; }
  friend CRational operator-(CRational a, const CRational& b) { return a -= b; }
  friend CRational operator*(CRational a, const CRational& b) { return a *= b; }
  friend bool operator==(const CRational& a, const CRational& b) { return a.re == b.re && a.im == b.im; }
};

Rational factorial(int n);
Rational binomial(int n, int k);

// ---------------------------------------------------------------------------
// Kernel expressions

enum class Kernel { Q, H, H0, DeltaR, DeltaA, Delta, Omega, DeltaF, DeltaAF };

const char* kernel_name(Kernel k);
Kernel kernel_from_name(const std::string& s);

// Formal linear combination of kernels K(x, y), each with an hbar power.
// DeltaA(x, y) is read as DeltaR(y, x), so {Q, H, H0, DeltaR, DeltaA} is a
// basis closed under transposition.
class KernelExpr {
 public:
  using Key = std::pair<Kernel, int>;

  KernelExpr() = default;
  static KernelExpr basis(Kernel k, int hbarPower = 0, const CRational& c = CRational(1));

  const std::map<Key, CRational>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  void add(Kernel k, int hbarPower, const CRational& c);

  KernelExpr& operator+=(const KernelExpr& o);
  friend KernelExpr operator+(KernelExpr a, const KernelExpr& b) { return a += b; }
  friend KernelExpr operator-(const KernelExpr& a, const KernelExpr& b);
  friend KernelExpr operator*(const CRational& c, const KernelExpr& k);
  friend bool operator==(const KernelExpr& a, const KernelExpr& b) { return a.terms_ == b.terms_; }

  // rewrite over {Q, H, H0, DeltaR, DeltaA}
  KernelExpr to_basis() const;
  // K(y, x) expressed as an expression in (x, y)
  KernelExpr transpose() const;
  // real part of the coefficients after the basis rewrite
  KernelExpr real_part() const;
  bool is_symmetric() const;
  // true if the kernel has no finite coincidence limit (anything but Q)
  bool singular_at_coincidence() const;
  int min_hbar() const;
  std::string str() const;

 private:
  std::map<Key, CRational> terms_;
};

// ---------------------------------------------------------------------------
// Charged vertex generators (the exponential functional class)

struct Endpoint {
  bool leg = false;
  int index = 0;
  auto operator<=>(const Endpoint&) const = default;
};

struct Contraction {
  Endpoint a;
  Endpoint b;
  KernelExpr kernel;  // factor kernel(a, b)
};

struct ExternalLeg {
  std::string smearing;
  bool free = true;
};

// scalar * int prod(smearings) exp(i sum c_j a phi(x_j)) exp(-sum_{i<j} c_i c_j a^2 P_ij(x_i, x_j))
//   * exp(-sum_j c_j^2 a^2/2 S_j(x_j, x_j)) * a^aPower * prod(contractions) * prod(free legs)
struct VertexGenerator {
  std::vector<int> charges;  // in units of a
  std::vector<std::string> smearingIds;
  std::map<std::pair<int, int>, KernelExpr> pairExponents;
  std::vector<KernelExpr> selfWeights;
  std::vector<ExternalLeg> legs;
  std::vector<Contraction> contractions;
  CRational scalar{1};
  int aPower = 0;

  int vertex_count() const { return static_cast<int>(charges.size()); }
  int free_leg_count() const;
};

using Functional = std::vector<VertexGenerator>;

VertexGenerator unit_generator();
VertexGenerator vertex_generator(int charge, const std::string& smearing);
// vertex with a Gaussian self-dressing, e.g. V_{a, g_Q} = dressed_vertex(1, "g", Q)
VertexGenerator dressed_vertex(int charge, const std::string& smearing, const KernelExpr& dressing);
VertexGenerator field_generator(const std::string& smearing);

Functional pointwise_product(const Functional& A, const Functional& B);
Functional star_product(const VertexGenerator& A, const VertexGenerator& B, const KernelExpr& K);
Functional star_product(const Functional& A, const Functional& B, const KernelExpr& K);
Functional gamma_deform(const VertexGenerator& A, const KernelExpr& K);
Functional gamma_deform(const Functional& A, const KernelExpr& K);
Functional gamma_inverse(const Functional& A, const KernelExpr& K);
Functional time_ordered(const std::vector<Functional>& factors, const KernelExpr& K);
Functional evaluate_at_zero(const Functional& A);
// A *_K (B Phi_1 ... Phi_m) written as a sum over which fields are contracted into A
Functional leibniz_expand(const Functional& A, const Functional& B, const std::vector<std::string>& fields,
                          const KernelExpr& K);
// merges terms with equal canonical structure and drops zeros
Functional simplify(const Functional& A);
// canonical structure -> summed scalar; invariant under relabelling of vertices and legs
std::map<std::string, CRational> term_multiset(const Functional& A);

// ---------------------------------------------------------------------------
// Term graphs (charge-agnostic expansions of Bogoliubov-type products)

enum Block : int { kAntiTimeOrdered = 0, kTimeOrdered = 1, kExternal = 2 };

struct TGVertex {
  int block = kTimeOrdered;
  int charge = 0;  // 0: symmetric cos vertex, +-1: resolved charge
  std::string smearing = "g";
  int extraDerivatives = 0;
  bool dressed = false;  // smearing g replaced by g_Q
  int label = -1;
};

struct TGLeg {
  std::string smearing = "f";
  int label = -1;
};

struct TGEdge {
  int a = 0;
  int b = 0;  // endpoints: [0, n) vertices, [n, n + m) legs
  KernelExpr kernel;
  int multiplicity = 1;
  bool exponential = false;  // factor exp(-c_a c_b a^2 kernel) instead of kernel^multiplicity
};

struct TermGraph {
  std::vector<TGVertex> vertices;
  std::vector<TGLeg> legs;
  std::vector<TGEdge> edges;
  CRational coeff{1};
  int hbarPrefactor = 0;

  int n() const { return static_cast<int>(vertices.size()); }
  int m() const { return static_cast<int>(legs.size()); }
  int left_block_size() const;
  int right_block_size() const;
  int external_count() const { return m(); }
  bool leg_free(int l) const;
  int free_leg_count() const;
  // number of contraction-edge ends at the endpoint (exponential edges excluded)
  int degree(int endpoint) const;
  int contraction_count() const;
  bool connected_to_legs() const;
};

using Expansion = std::vector<TermGraph>;

int hbar_grade(const TermGraph& t);

enum class KeyMode { labeled, isomorphic };
std::string canonical_key(const TermGraph& t, KeyMode mode, bool eraseBlocks = false);
Expansion merge_terms(const Expansion& terms, KeyMode mode, bool eraseBlocks = false);

struct StarOptions {
  int maxEdges = -1;  // truncation on contraction edges; -1 only allowed with exponential pairs
  bool exponentialVertexPairs = false;
};

Expansion vertex_term(int block, int label, const std::string& smearing = "g");
Expansion fields_term(const std::vector<std::string>& smearings);
Expansion pointwise(const Expansion& A, const Expansion& B);
Expansion star(const Expansion& A, const Expansion& B, const KernelExpr& K, const StarOptions& opt);
// Gamma_Q: Q exponents on vertex pairs, dressing of the vertices, Q pairings of free legs
Expansion apply_gamma_q(const Expansion& terms);
Expansion drop_free_legs(const Expansion& terms);
Expansion scale(const Expansion& terms, const CRational& c, int hbarShift = 0);

// rewrite every contraction edge over the kernel basis, with orientation normalised
Expansion to_basis(const Expansion& terms);
// causal support: a directed cycle of retarded edges vanishes
bool has_retarded_cycle(const TermGraph& t);
// a vertex flagged as earliest cannot lie in the future of any other point
bool violates_earliest(const TermGraph& t, int earliestLabel);

struct Observable {
  std::vector<std::string> fields;  // product of linear legs
  std::string localVertex;          // nonempty: a local cos vertex instead of fields
  static Observable field(const std::string& f) { return {{f}, ""}; }
  static Observable product(std::vector<std::string> fs) { return {std::move(fs), ""}; }
};

Observable default_observable(int m);

// R_{n,m}(V^n, F) = (i/hbar)^n sum_L (-1)^|L| Tbar(V_L) *_{hbar omega} T(V_{L^c}, F)
Expansion bogoliubov_terms(int n, const Observable& obs, const StarOptions& opt, int firstLabel = 0);

struct Certificate {
  bool ok = true;
  int n = 0;
  int m = 0;
  std::size_t termsChecked = 0;
  std::size_t groups = 0;
  std::string detail;
};

Certificate uncontracted_cancellation(int n, int m, int maxEdges = -1);
int hbar_floor(int n, int m);
// hbar^0 stratum in the kernel basis (only retarded edges survive)
Expansion classical_term(int n, const Observable& obs);
// kernel-symbol graphs of the lowest stratum with every vertex linked to a leg (the appendix picture)
Expansion picture_terms(int n, const Observable& obs);

Expansion qs_term(int n);
Expansion inverse_qs_term(int n);
Expansion interacting_field_term_J(int n, const std::string& f = "f");
Expansion interacting_field_term_M(int n, const std::string& f = "f");
Expansion wick_expand(int p, const std::vector<std::string>& smearings = {});

struct ConnectedDecomposition {
  std::vector<std::pair<std::vector<std::vector<int>>, CRational>> partitions;  // Moebius weights
  Expansion full;
  Expansion connected;
};
ConnectedDecomposition connected_decomposition(int nFactors, const KernelExpr& K, int maxEdges);

// R_{n+1,m}(V_h, V^n, F) + (i/hbar)[V_h, R_{n,m}]_{hbar omega} with h earliest; empty when the identity holds
Expansion retarded_commutator_residual(int n, const Observable& obs, int maxEdges);

std::string graph_render(const TermGraph& t, const std::string& name = "term");
std::string graph_render(const Expansion& terms, const std::string& name = "expansion");
nlohmann::json to_json(const TermGraph& t);
nlohmann::json to_json(const Expansion& terms);

std::vector<std::vector<std::vector<int>>> set_partitions(int n);

}  // namespace ssg
