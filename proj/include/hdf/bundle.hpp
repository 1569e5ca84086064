#pragma once

#include <optional>
#include <string>
#include <vector>

#include <boost/rational.hpp>

#include "hdf/curve.hpp"

namespace hdf {

using Rational = boost::rational<i64>;

// A rank-r bundle.  On P^1 the transition g (Laurent in t) maps chart-0
// coordinates to chart-1 coordinates: x_1(1/t) = g(t) x_0(t).  O(a) has
// g = t^{-a}.  On the one-chart curves g is the identity and carries the rank.
struct Bundle {
  Curve curve;
  PMat g;

  Bundle(const Curve& C, PMat transition) : curve(C), g(std::move(transition)) {}
  static Bundle trivial(const Curve& C, int r);
  static Bundle split(const Curve& C, const std::vector<int>& a);
  int rank() const { return g.rows(); }
  const Ring& ring() const { return curve.ring(); }
};

// theta = Theta[alpha] d(alpha-coordinate); chart-1 matrices are in s.
struct HiggsBundle {
  Bundle E;
  std::vector<PMat> theta;
};

// nabla = d + A[alpha] d(alpha-coordinate)
struct FlatBundle {
  Bundle E;
  std::vector<PMat> A;
};

// E = E^0 + ... + E^w, basis ordered by grade (grade 0 first); theta maps
// E^i to E^{i-1}, i.e. only the blocks (i-1, i) are nonzero.  The transition
// is block diagonal.
struct GradedHiggsBundle {
  HiggsBundle H;
  std::vector<int> ranks;

  int weight() const { return static_cast<int>(ranks.size()) - 1; }
  int offset(int i) const;
  int rank() const { return H.E.rank(); }
  const Curve& curve() const { return H.E.curve; }
  Bundle piece(int i) const;
  PMat theta_block(int chart, int i) const;  // E^i -> E^{i-1}
};

// A saturated subbundle: per chart a basis (columns) of a direct summand.
struct Subbundle {
  std::vector<PMat> gens;
  int rank() const { return gens.at(0).cols(); }
};

// steps[i-1] = Fil^i for i = 1..n; Fil^0 is everything, Fil^{n+1} = 0.
struct HodgeFiltration {
  std::vector<Subbundle> steps;
  int level() const { return static_cast<int>(steps.size()); }
};

struct DeRhamBundle {
  FlatBundle V;
  HodgeFiltration fil;
};

// ---- validation -------------------------------------------------------------
bool higgs_charts_compatible(const HiggsBundle& H);
bool flat_charts_compatible(const FlatBundle& F);
// smallest e with Theta^e = 0, or -1 if not nilpotent (checked up to rank)
int nilpotency_exponent(const HiggsBundle& H);
bool is_graded_valid(const GradedHiggsBundle& G);
void require_field(const Ring& R, const char* what);

// chart-1 data built from chart-0 data through g (entries must land in k[s])
PMat higgs_chart1(const Bundle& E, const PMat& theta0);
PMat flat_chart1(const Bundle& E, const PMat& A0);
HiggsBundle make_higgs(const Bundle& E, const PMat& theta0);
FlatBundle make_flat(const Bundle& E, const PMat& A0);
GradedHiggsBundle make_graded(const Bundle& E, const std::vector<int>& ranks, const PMat& theta0);

// ---- frames -------------------------------------------------------------------
// new coordinates = M[alpha] * old coordinates
Bundle change_frame(const Bundle& E, const std::vector<PMat>& M);
HiggsBundle change_frame(const HiggsBundle& H, const std::vector<PMat>& M);
FlatBundle change_frame(const FlatBundle& F, const std::vector<PMat>& M);
Subbundle change_frame(const Subbundle& S, const std::vector<PMat>& M);
// A -> M A M^{-1} + M d(M^{-1})
PMat gauge(const PMat& A, const PMat& M);
PMat gauge(const PMat& A, const PMat& M, const PMat& Minv);

// ---- numerical invariants ---------------------------------------------------
std::vector<int> splitting_type(const Bundle& E);
int degree(const Bundle& E);
Rational slope(const Bundle& E);

// Frames (chart 0, chart 1) in which the transition is diag(t^{-a}).
struct Normalization {
  std::vector<int> a;
  std::vector<PMat> frames;
};
Normalization normalize(const Bundle& E);

// ---- Frobenius pullback -------------------------------------------------------
// t -> t^p together with x -> x^p on coefficients (identity on F_p).
PMat frobenius_twist(const PMat& M);
Bundle frobenius_pullback(const Bundle& E);
// the Higgs matrices of F^*theta relative to the pulled-back one-form basis
HiggsBundle frobenius_pullback(const HiggsBundle& H);
// pullback connection: d(t^p) = 0, so the result is the canonical connection
FlatBundle frobenius_pullback(const FlatBundle& F);

// ---- subbundles ----------------------------------------------------------------
// basis of the saturation of the column span over the chart ring, canonical
// (column Hermite form); r x 0 when the span is zero
PMat saturate_chart(const PMat& gens, CurveKind kind);
PMat canonical_basis(const PMat& W);
// smallest saturated subbundle containing the chart-0 span
Subbundle saturate(const Bundle& E, const PMat& gens0);
Subbundle zero_subbundle(const Bundle& E);
Subbundle whole_subbundle(const Bundle& E);
bool same_subbundle(const Subbundle& a, const Subbundle& b);
bool contains(const Subbundle& big, const Subbundle& small);
Subbundle sum(const Bundle& E, const Subbundle& a, const Subbundle& b);

// For a saturated basis S of a chart: [S | C] invertible with inverse [L ; K].
struct ChartSplit {
  PMat S, C, L, K;
};
ChartSplit split_chart(const PMat& S, CurveKind kind);

Bundle sub_bundle(const Bundle& E, const Subbundle& S);  // induced transition
int degree(const Bundle& E, const Subbundle& S);
Rational slope(const Bundle& E, const Subbundle& S);

// Quotient with the chart splittings used to present it.
struct Quotient {
  Bundle Q;
  std::vector<ChartSplit> split;
};
Quotient quotient(const Bundle& E, const Subbundle& S);

bool is_invariant(const HiggsBundle& H, const Subbundle& S);
bool is_invariant(const FlatBundle& F, const Subbundle& S);
HiggsBundle restrict(const HiggsBundle& H, const Subbundle& S);
HiggsBundle quotient(const HiggsBundle& H, const Quotient& Q);
FlatBundle restrict(const FlatBundle& F, const Subbundle& S);
FlatBundle quotient(const FlatBundle& F, const Quotient& Q);

// ---- Harder-Narasimhan ----------------------------------------------------------
struct HNFiltration {
  std::vector<Subbundle> flag;  // proper nonzero steps, increasing
  std::vector<Rational> slopes; // slopes of the successive quotients
  Rational mu_max;
  int r_max = 0;
};
HNFiltration hn_filtration(const Bundle& E);

// ---- Hodge filtrations and grading -------------------------------------------------
HodgeFiltration trivial_filtration();
bool is_transversal(const DeRhamBundle& D, int* bad_index = nullptr);

// The grading together with the adapted frames: column block i of frames[alpha]
// is a basis of E^i lifted into Fil^i.
struct Grading {
  GradedHiggsBundle G;
  std::vector<PMat> frames;
};
Grading grade_with_frames(const DeRhamBundle& D);
GradedHiggsBundle grade(const DeRhamBundle& D);
DeRhamBundle reduce_filtration(const DeRhamBundle& D);
bool same_filtration(const HodgeFiltration& a, const HodgeFiltration& b);

// Per-grade Birkhoff normalization (block-diagonal frames).
struct GradedNormalization {
  GradedHiggsBundle G;
  std::vector<std::vector<int>> a;  // exponents per grade
  std::vector<PMat> frames;         // new = frames * old
};
GradedNormalization normalize_graded(const GradedHiggsBundle& G);

// ---- isomorphism search ------------------------------------------------------------
struct IsoOptions {
  int field_degree = 1;       // search in F_{p^f}
  int affine_degree = 2;      // entry degree bound on one-chart curves
  long long budget = 200000;  // enumerated coefficient vectors before random fallback
  std::uint64_t seed = 1;
  int random_tries = 4000;
};
struct GradedIso {
  std::vector<PMat> phi;  // per chart, B-coordinates = phi * A-coordinates
  bool lex_least = false; // found by the exhaustive lexicographic scan
  int solution_dim = 0;
};
std::optional<GradedIso> graded_higgs_isomorphic(const GradedHiggsBundle& A, const GradedHiggsBundle& B,
                                                 const IsoOptions& opt = {});
// exact certificate check of a claimed isomorphism
bool verify_graded_iso(const GradedHiggsBundle& A, const GradedHiggsBundle& B, const std::vector<PMat>& phi);

// base change of all matrices to another coefficient ring (F_p -> F_{p^f} etc.)
GradedHiggsBundle to_ring(const GradedHiggsBundle& G, const Ring& S);
HiggsBundle to_ring(const HiggsBundle& H, const Ring& S);
FlatBundle to_ring(const FlatBundle& F, const Ring& S);
Bundle to_ring(const Bundle& E, const Ring& S);

}  // namespace hdf
