#include "hdf/bundle.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <tuple>

#include "hdf/errors.hpp"
#include "hdf/linalg.hpp"

namespace hdf {

namespace {

CurveKind chart_kind(const Curve& C) { return C.kind == CurveKind::Torus ? CurveKind::Torus : CurveKind::AffineLine; }

// multiply every nonzero column by a power of t so its lowest exponent is 0
PMat shift_cols_poly(const PMat& M) {
  PMat R = M;
  for (int j = 0; j < M.cols(); ++j) {
    int lo = INT32_MAX;
    for (int i = 0; i < M.rows(); ++i)
      if (!M(i, j).is_zero()) lo = std::min(lo, M(i, j).lo());
    if (lo == INT32_MAX || lo == 0) continue;
    for (int i = 0; i < M.rows(); ++i) R(i, j) = M(i, j).shift(-lo);
  }
  return R;
}

bool is_chart_unit(const LPoly& d, CurveKind kind) {
  const LPoly r = d.ring().is_field() ? d : d.to_ring(Ring::zmod(d.ring().p(), 1));
  if (kind == CurveKind::Torus) return r.is_unit_monomial();
  return r.is_unit_monomial() && r.lo() == 0 && d.lo() >= 0;
}

}  // namespace

void require_field(const Ring& R, const char* what) {
  if (!R.is_field()) throw WrongModulus(std::string(what) + " needs coefficients in a field, got " + R.name());
}

Bundle Bundle::trivial(const Curve& C, int r) { return Bundle(C, PMat::identity(C.ring(), r)); }

Bundle Bundle::split(const Curve& C, const std::vector<int>& a) {
  if (!C.projective()) return trivial(C, static_cast<int>(a.size()));
  std::vector<LPoly> d;
  for (int x : a) d.push_back(LPoly::monomial(C.ring(), 1, -x));
  if (d.empty()) return Bundle(C, PMat(C.ring(), 0, 0));
  return Bundle(C, PMat::diag(d));
}

int GradedHiggsBundle::offset(int i) const {
  int o = 0;
  for (int j = 0; j < i; ++j) o += ranks[j];
  return o;
}

Bundle GradedHiggsBundle::piece(int i) const {
  int o = offset(i);
  return Bundle(H.E.curve, H.E.g.block(o, o, ranks[i], ranks[i]));
}

PMat GradedHiggsBundle::theta_block(int chart, int i) const {
  return H.theta.at(chart).block(offset(i - 1), offset(i), ranks[i - 1], ranks[i]);
}

// ---- validation -----------------------------------------------------------------

PMat higgs_chart1(const Bundle& E, const PMat& theta0) {
  PMat t = (E.g * theta0 * inverse(E.g)).scale(dt_ds(E.ring()));
  PMat s = t.swap_var();
  if (!s.is_polynomial()) throw ContractViolation("Higgs field has a pole at infinity");
  return s;
}

PMat flat_chart1(const Bundle& E, const PMat& A0) {
  PMat gi = inverse(E.g);
  PMat t = (E.g * A0 * gi + E.g * gi.derivative()).scale(dt_ds(E.ring()));
  PMat s = t.swap_var();
  if (!s.is_polynomial()) throw ContractViolation("connection has a pole at infinity");
  return s;
}

HiggsBundle make_higgs(const Bundle& E, const PMat& theta0) {
  if (!E.curve.in_chart_ring(theta0, 0)) throw ContractViolation("Higgs matrix outside the chart ring");
  HiggsBundle H{E, {theta0}};
  if (E.curve.projective()) H.theta.push_back(higgs_chart1(E, theta0));
  return H;
}

FlatBundle make_flat(const Bundle& E, const PMat& A0) {
  if (!E.curve.in_chart_ring(A0, 0)) throw ContractViolation("connection matrix outside the chart ring");
  FlatBundle F{E, {A0}};
  if (E.curve.projective()) F.A.push_back(flat_chart1(E, A0));
  return F;
}

GradedHiggsBundle make_graded(const Bundle& E, const std::vector<int>& ranks, const PMat& theta0) {
  GradedHiggsBundle G{make_higgs(E, theta0), ranks};
  if (!is_graded_valid(G)) throw ContractViolation("not a graded Higgs bundle");
  return G;
}

bool higgs_charts_compatible(const HiggsBundle& H) {
  const Curve& C = H.E.curve;
  if (static_cast<int>(H.theta.size()) != C.charts()) return false;
  for (int c = 0; c < C.charts(); ++c)
    if (!C.in_chart_ring(H.theta[c], c)) return false;
  if (!C.projective()) return true;
  PMat rhs = (H.E.g * H.theta[0] * inverse(H.E.g)).scale(dt_ds(H.E.ring()));
  return H.theta[1].swap_var() == rhs;
}

bool flat_charts_compatible(const FlatBundle& F) {
  const Curve& C = F.E.curve;
  if (static_cast<int>(F.A.size()) != C.charts()) return false;
  for (int c = 0; c < C.charts(); ++c)
    if (!C.in_chart_ring(F.A[c], c)) return false;
  if (!C.projective()) return true;
  PMat gi = inverse(F.E.g);
  PMat rhs = (F.E.g * F.A[0] * gi + F.E.g * gi.derivative()).scale(dt_ds(F.E.ring()));
  return F.A[1].swap_var() == rhs;
}

int nilpotency_exponent(const HiggsBundle& H) {
  const int r = H.E.rank();
  if (r == 0) return 0;
  PMat P = PMat::identity(H.E.ring(), r);
  for (int e = 0; e <= r; ++e) {
    if (P.is_zero()) return e;
    P = P * H.theta[0];
  }
  return -1;
}

bool is_graded_valid(const GradedHiggsBundle& G) {
  int sum = 0;
  for (int x : G.ranks) {
    if (x < 0) return false;
    sum += x;
  }
  if (sum != G.rank() || G.ranks.empty()) return false;
  auto grade_of = [&](int idx) {
    int i = 0, o = 0;
    while (idx >= o + G.ranks[i]) o += G.ranks[i++];
    return i;
  };
  const int r = G.rank();
  for (int a = 0; a < r; ++a)
    for (int b = 0; b < r; ++b) {
      int ga = grade_of(a), gb = grade_of(b);
      if (ga != gb && !G.H.E.g(a, b).is_zero()) return false;
      for (auto& T : G.H.theta)
        if (ga != gb - 1 && !T(a, b).is_zero()) return false;
    }
  return higgs_charts_compatible(G.H);
}

// ---- frames -------------------------------------------------------------------------

PMat gauge(const PMat& A, const PMat& M, const PMat& Minv) { return M * A * Minv + M * Minv.derivative(); }

PMat gauge(const PMat& A, const PMat& M) { return gauge(A, M, inverse(M)); }

Bundle change_frame(const Bundle& E, const std::vector<PMat>& M) {
  if (!E.curve.projective()) return E;
  return Bundle(E.curve, M[1].swap_var() * E.g * inverse(M[0]));
}

HiggsBundle change_frame(const HiggsBundle& H, const std::vector<PMat>& M) {
  HiggsBundle R{change_frame(H.E, M), {}};
  for (std::size_t c = 0; c < H.theta.size(); ++c) R.theta.push_back(M[c] * H.theta[c] * inverse(M[c]));
  return R;
}

FlatBundle change_frame(const FlatBundle& F, const std::vector<PMat>& M) {
  FlatBundle R{change_frame(F.E, M), {}};
  for (std::size_t c = 0; c < F.A.size(); ++c) R.A.push_back(gauge(F.A[c], M[c]));
  return R;
}

Subbundle change_frame(const Subbundle& S, const std::vector<PMat>& M) {
  Subbundle R;
  for (std::size_t c = 0; c < S.gens.size(); ++c) R.gens.push_back(canonical_basis(M[c] * S.gens[c]));
  return R;
}

// ---- invariants ----------------------------------------------------------------------

std::vector<int> splitting_type(const Bundle& E) {
  if (!E.curve.projective()) return std::vector<int>(E.rank(), 0);
  if (E.rank() == 0) return {};
  return birkhoff_factorize(E.g).a;
}

int degree(const Bundle& E) {
  if (!E.curve.projective() || E.rank() == 0) return 0;
  LPoly d = det(E.g);
  if (!d.is_unit_monomial()) throw NonInvertible("transition determinant is not a unit monomial");
  return -d.lo();
}

Rational slope(const Bundle& E) {
  if (E.rank() == 0) throw ContractViolation("slope of a rank-0 bundle");
  return Rational(degree(E), E.rank());
}

Normalization normalize(const Bundle& E) {
  const Ring& R = E.ring();
  const int r = E.rank();
  if (!E.curve.projective() || r == 0) {
    Normalization n{std::vector<int>(r, 0), {PMat::identity(R, r)}};
    if (E.curve.projective()) n.frames.push_back(PMat::identity(R, r));
    return n;
  }
  auto b = birkhoff_factorize(E.g);
  return {b.a, {b.P, inverse(b.Q).swap_var()}};
}

// ---- Frobenius ------------------------------------------------------------------------

PMat frobenius_twist(const PMat& M) {
  const Ring& R = M.ring();
  require_field(R, "Frobenius pullback");
  const int p = static_cast<int>(R.p());
  return M.map([&](const LPoly& x) {
    LPoly y = R.is_galois() ? x.map([&](i64 c) { return R.frobenius(c); }) : x;
    return y.subst_power(p);
  });
}

Bundle frobenius_pullback(const Bundle& E) {
  require_field(E.ring(), "Frobenius pullback");
  if (!E.curve.projective()) return E;
  return Bundle(E.curve, frobenius_twist(E.g));
}

HiggsBundle frobenius_pullback(const HiggsBundle& H) {
  HiggsBundle R{frobenius_pullback(H.E), {}};
  for (auto& T : H.theta) R.theta.push_back(frobenius_twist(T));
  return R;
}

FlatBundle frobenius_pullback(const FlatBundle& F) {
  FlatBundle R{frobenius_pullback(F.E), {}};
  for (auto& A : F.A) R.A.push_back(PMat(A.ring(), A.rows(), A.cols()));
  return R;
}

// ---- subbundles -------------------------------------------------------------------------

PMat canonical_basis(const PMat& W) {
  if (W.cols() == 0) return W;
  auto h = hermite_rows(W.transpose());
  return h.H.rows_range(0, h.rank).transpose();
}

PMat saturate_chart(const PMat& gens, CurveKind kind) {
  const Ring& R = gens.ring();
  require_field(R, "saturation");
  if (kind != CurveKind::Torus && !gens.is_polynomial()) throw ContractViolation("generators outside the chart ring");
  PMat G = shift_cols_poly(gens);
  if (G.cols() == 0 || G.is_zero()) return PMat(R, gens.rows(), 0);
  auto h = hermite_rows(G, false);
  return canonical_basis(h.Uinv.cols_range(0, h.rank));
}

ChartSplit split_chart(const PMat& S, CurveKind kind) {
  const Ring& R = S.ring();
  const int r = S.rows(), rho = S.cols();
  PMat Sp = S;
  std::vector<int> sh(rho, 0);
  if (kind == CurveKind::Torus) {
    Sp = shift_cols_poly(S);
    for (int j = 0; j < rho; ++j)
      for (int i = 0; i < r; ++i)
        if (!S(i, j).is_zero()) {
          sh[j] = Sp(i, j).lo() - S(i, j).lo();
          break;
        }
  }
  if (!Sp.is_polynomial()) throw ContractViolation("split_chart: basis outside the chart ring");
  auto h = hermite_rows(Sp, false);
  if (h.rank != rho) throw ContractViolation("split_chart: columns are dependent");
  PMat T = h.H.rows_range(0, rho);
  if (rho > 0 && !is_chart_unit(det(T), CurveKind::AffineLine))
    throw ContractViolation("split_chart: span is not saturated");
  ChartSplit cs{S, h.Uinv.cols_range(rho, r - rho), PMat(R, rho, r), h.U.rows_range(rho, r - rho)};
  if (rho > 0) {
    cs.L = inverse(T) * h.U.rows_range(0, rho);
    if (kind == CurveKind::Torus)
      for (int j = 0; j < rho; ++j)
        for (int c = 0; c < r; ++c) cs.L(j, c) = cs.L(j, c).shift(sh[j]);
  }
  return cs;
}

Subbundle zero_subbundle(const Bundle& E) {
  Subbundle S;
  for (int c = 0; c < E.curve.charts(); ++c) S.gens.push_back(PMat(E.ring(), E.rank(), 0));
  return S;
}

Subbundle whole_subbundle(const Bundle& E) {
  Subbundle S;
  for (int c = 0; c < E.curve.charts(); ++c) S.gens.push_back(PMat::identity(E.ring(), E.rank()));
  return S;
}

Subbundle saturate(const Bundle& E, const PMat& gens0) {
  const CurveKind k = chart_kind(E.curve);
  Subbundle S{{saturate_chart(gens0, k)}};
  if (S.gens[0].cols() == 0) throw ZeroSubsheaf("all generators vanish");
  if (E.curve.projective()) {
    PMat X = (E.g * S.gens[0]).swap_var();
    S.gens.push_back(saturate_chart(shift_cols_poly(X), CurveKind::AffineLine));
  }
  return S;
}

bool same_subbundle(const Subbundle& a, const Subbundle& b) {
  if (a.rank() != b.rank()) return false;
  return canonical_basis(a.gens[0]) == canonical_basis(b.gens[0]);
}

bool contains(const Subbundle& big, const Subbundle& small) {
  if (small.rank() == 0) return true;
  if (big.rank() < small.rank()) return false;
  // chart ring kind does not matter for the membership test on polynomial bases
  auto cs = split_chart(big.gens[0], CurveKind::Torus);
  return (cs.K * small.gens[0]).is_zero();
}

Subbundle sum(const Bundle& E, const Subbundle& a, const Subbundle& b) {
  if (a.rank() == 0) return b;
  if (b.rank() == 0) return a;
  return saturate(E, PMat::hcat(a.gens[0], b.gens[0]));
}

Bundle sub_bundle(const Bundle& E, const Subbundle& S) {
  const int rho = S.rank();
  if (!E.curve.projective()) return Bundle::trivial(E.curve, rho);
  if (rho == 0) return Bundle(E.curve, PMat(E.ring(), 0, 0));
  auto c1 = split_chart(S.gens[1], CurveKind::AffineLine);
  return Bundle(E.curve, c1.L.swap_var() * E.g * S.gens[0]);
}

int degree(const Bundle& E, const Subbundle& S) { return degree(sub_bundle(E, S)); }

Rational slope(const Bundle& E, const Subbundle& S) { return Rational(degree(E, S), S.rank()); }

Quotient quotient(const Bundle& E, const Subbundle& S) {
  const CurveKind k = chart_kind(E.curve);
  Quotient Q{Bundle::trivial(E.curve, E.rank() - S.rank()), {}};
  for (int c = 0; c < E.curve.charts(); ++c) Q.split.push_back(split_chart(S.gens[c], k));
  if (E.curve.projective()) Q.Q.g = Q.split[1].K.swap_var() * E.g * Q.split[0].C;
  return Q;
}

bool is_invariant(const HiggsBundle& H, const Subbundle& S) {
  if (S.rank() == 0 || S.rank() == H.E.rank()) return true;
  auto cs = split_chart(S.gens[0], chart_kind(H.E.curve));
  return (cs.K * H.theta[0] * S.gens[0]).is_zero();
}

bool is_invariant(const FlatBundle& F, const Subbundle& S) {
  if (S.rank() == 0 || S.rank() == F.E.rank()) return true;
  auto cs = split_chart(S.gens[0], chart_kind(F.E.curve));
  return (cs.K * (S.gens[0].derivative() + F.A[0] * S.gens[0])).is_zero();
}

HiggsBundle restrict(const HiggsBundle& H, const Subbundle& S) {
  HiggsBundle R{sub_bundle(H.E, S), {}};
  const CurveKind k = chart_kind(H.E.curve);
  for (int c = 0; c < H.E.curve.charts(); ++c) {
    auto cs = split_chart(S.gens[c], k);
    R.theta.push_back(cs.L * H.theta[c] * S.gens[c]);
  }
  return R;
}

HiggsBundle quotient(const HiggsBundle& H, const Quotient& Q) {
  HiggsBundle R{Q.Q, {}};
  for (std::size_t c = 0; c < H.theta.size(); ++c) R.theta.push_back(Q.split[c].K * H.theta[c] * Q.split[c].C);
  return R;
}

FlatBundle restrict(const FlatBundle& F, const Subbundle& S) {
  FlatBundle R{sub_bundle(F.E, S), {}};
  const CurveKind k = chart_kind(F.E.curve);
  for (int c = 0; c < F.E.curve.charts(); ++c) {
    auto cs = split_chart(S.gens[c], k);
    R.A.push_back(cs.L * (S.gens[c].derivative() + F.A[c] * S.gens[c]));
  }
  return R;
}

FlatBundle quotient(const FlatBundle& F, const Quotient& Q) {
  FlatBundle R{Q.Q, {}};
  for (std::size_t c = 0; c < F.A.size(); ++c) {
    const PMat& C = Q.split[c].C;
    R.A.push_back(Q.split[c].K * (C.derivative() + F.A[c] * C));
  }
  return R;
}

// ---- HN -----------------------------------------------------------------------------

HNFiltration hn_filtration(const Bundle& E) {
  require_field(E.ring(), "hn_filtration");
  HNFiltration hn;
  const int r = E.rank();
  if (r == 0) throw ContractViolation("HN filtration of a rank-0 bundle");
  if (!E.curve.projective()) {
    hn.mu_max = 0;
    hn.r_max = r;
    hn.slopes = {Rational(0)};
    return hn;
  }
  auto nz = normalize(E);
  PMat Pinv = inverse(nz.frames[0]);
  const auto& a = nz.a;
  int j = 0;
  while (j < r) {
    int k = j;
    while (k < r && a[k] == a[j]) ++k;
    hn.slopes.push_back(Rational(a[j]));
    if (k < r) hn.flag.push_back(saturate(E, Pinv.cols_range(0, k)));
    j = k;
  }
  hn.mu_max = Rational(a[0]);
  hn.r_max = static_cast<int>(std::count(a.begin(), a.end(), a[0]));
  return hn;
}

// ---- grading ------------------------------------------------------------------------

HodgeFiltration trivial_filtration() { return {}; }

namespace {

struct AdaptedFrames {
  std::vector<PMat> B;  // per chart
  std::vector<int> ranks;
};

AdaptedFrames adapted_frames(const DeRhamBundle& D) {
  const Bundle& E = D.V.E;
  const Ring& R = E.ring();
  const int r = E.rank(), n = D.fil.level();
  const CurveKind k = chart_kind(E.curve);
  AdaptedFrames out;
  out.ranks.assign(n + 1, 0);
  for (int c = 0; c < E.curve.charts(); ++c) {
    std::vector<PMat> b(n + 1, PMat(R, r, 0));
    PMat bas(R, r, 0);
    for (int i = n; i >= 0; --i) {
      PMat Si = (i == 0) ? PMat::identity(R, r) : D.fil.steps[i - 1].gens[c];
      auto si = split_chart(Si, k);
      PMat X = si.L * bas;
      if (Si * X != bas) throw ContractViolation("filtration is not decreasing at step " + std::to_string(i));
      auto sx = split_chart(X, k);
      b[i] = Si * sx.C;
      bas = PMat::hcat(bas, b[i]);
      out.ranks[i] = b[i].cols();
    }
    PMat B(R, r, 0);
    for (int i = 0; i <= n; ++i) B = PMat::hcat(B, b[i]);
    out.B.push_back(B);
  }
  return out;
}

// first grade index k with a nonzero block (j, k), j < k-1
int transversality_defect(const PMat& A, const std::vector<int>& ranks) {
  std::vector<int> off(ranks.size() + 1, 0);
  for (std::size_t i = 0; i < ranks.size(); ++i) off[i + 1] = off[i] + ranks[i];
  for (std::size_t kk = 2; kk < ranks.size(); ++kk)
    for (std::size_t j = 0; j + 1 < kk; ++j)
      if (!A.block(off[j], off[kk], ranks[j], ranks[kk]).is_zero()) return static_cast<int>(kk);
  return -1;
}

}  // namespace

bool is_transversal(const DeRhamBundle& D, int* bad_index) {
  auto af = adapted_frames(D);
  for (std::size_t c = 0; c < af.B.size(); ++c) {
    PMat Ap = gauge(D.V.A[c], inverse(af.B[c]), af.B[c]);
    int k = transversality_defect(Ap, af.ranks);
    if (k >= 0) {
      if (bad_index) *bad_index = k;
      return false;
    }
  }
  return true;
}

Grading grade_with_frames(const DeRhamBundle& D) {
  const Bundle& E = D.V.E;
  const Ring& R = E.ring();
  auto af = adapted_frames(D);
  const int w = D.fil.level();
  std::vector<int> off(w + 2, 0);
  for (int i = 0; i <= w; ++i) off[i + 1] = off[i] + af.ranks[i];
  Grading out{GradedHiggsBundle{HiggsBundle{E, {}}, af.ranks}, af.B};
  for (std::size_t c = 0; c < af.B.size(); ++c) {
    PMat Ap = gauge(D.V.A[c], inverse(af.B[c]), af.B[c]);
    int k = transversality_defect(Ap, af.ranks);
    if (k >= 0) throw TransversalityViolated(k, "nabla(Fil^" + std::to_string(k) + ") is not inside Fil^" + std::to_string(k - 1));
    PMat Th(R, E.rank(), E.rank());
    for (int i = 1; i <= w; ++i) Th.set_block(off[i - 1], off[i], Ap.block(off[i - 1], off[i], af.ranks[i - 1], af.ranks[i]));
    out.G.H.theta.push_back(Th);
  }
  if (E.curve.projective()) {
    PMat gp = inverse(af.B[1].swap_var()) * E.g * af.B[0];
    PMat gd(R, E.rank(), E.rank());
    for (int i = 0; i <= w; ++i) gd.set_block(off[i], off[i], gp.block(off[i], off[i], af.ranks[i], af.ranks[i]));
    out.G.H.E = Bundle(E.curve, gd);
  } else {
    out.G.H.E = Bundle::trivial(E.curve, E.rank());
  }
  return out;
}

GradedHiggsBundle grade(const DeRhamBundle& D) { return grade_with_frames(D).G; }

DeRhamBundle reduce_filtration(const DeRhamBundle& D) {
  DeRhamBundle out{D.V, {}};
  const int r = D.V.E.rank();
  int prev_rank = r;
  const Subbundle* prev = nullptr;
  for (auto& s : D.fil.steps) {
    if (s.rank() == 0) break;
    bool same = prev ? same_subbundle(*prev, s) : (s.rank() == prev_rank);
    if (same) continue;
    out.fil.steps.push_back(s);
    prev = &s;
  }
  return out;
}

bool same_filtration(const HodgeFiltration& a, const HodgeFiltration& b) {
  if (a.level() != b.level()) return false;
  for (int i = 0; i < a.level(); ++i)
    if (!same_subbundle(a.steps[i], b.steps[i])) return false;
  return true;
}

GradedNormalization normalize_graded(const GradedHiggsBundle& G) {
  const Ring& R = G.H.E.ring();
  const int r = G.rank();
  const int charts = G.curve().charts();
  std::vector<PMat> frames(charts, PMat(R, r, r));
  GradedNormalization out{G, {}, {}};
  for (int i = 0; i <= G.weight(); ++i) {
    int o = G.offset(i);
    auto nz = normalize(G.piece(i));
    out.a.push_back(nz.a);
    for (int c = 0; c < charts; ++c) frames[c].set_block(o, o, nz.frames[c]);
  }
  out.G.H = change_frame(G.H, frames);
  out.frames = frames;
  return out;
}

// ---- base change ------------------------------------------------------------------------

Bundle to_ring(const Bundle& E, const Ring& S) { return Bundle(E.curve.with_ring(S), E.g.to_ring(S)); }

HiggsBundle to_ring(const HiggsBundle& H, const Ring& S) {
  HiggsBundle R{to_ring(H.E, S), {}};
  for (auto& T : H.theta) R.theta.push_back(T.to_ring(S));
  return R;
}

FlatBundle to_ring(const FlatBundle& F, const Ring& S) {
  FlatBundle R{to_ring(F.E, S), {}};
  for (auto& A : F.A) R.A.push_back(A.to_ring(S));
  return R;
}

GradedHiggsBundle to_ring(const GradedHiggsBundle& G, const Ring& S) { return {to_ring(G.H, S), G.ranks}; }

// ---- isomorphism search -------------------------------------------------------------------

bool verify_graded_iso(const GradedHiggsBundle& A0, const GradedHiggsBundle& B0, const std::vector<PMat>& phi) {
  if (A0.ranks != B0.ranks || phi.empty()) return false;
  const Ring& F = phi[0].ring();
  GradedHiggsBundle A = (&A0.H.E.ring() == &F) ? A0 : to_ring(A0, F);
  GradedHiggsBundle B = (&B0.H.E.ring() == &F) ? B0 : to_ring(B0, F);
  const Curve& C = A.curve();
  if (static_cast<int>(phi.size()) != C.charts()) return false;
  const CurveKind k = chart_kind(C);
  for (int c = 0; c < C.charts(); ++c) {
    const PMat& P = phi[c];
    if (!C.in_chart_ring(P, c)) return false;
    for (int i = 0; i <= A.weight(); ++i)
      for (int j = 0; j <= A.weight(); ++j)
        if (i != j && !P.block(A.offset(i), A.offset(j), A.ranks[i], A.ranks[j]).is_zero()) return false;
    if (!is_chart_unit(det(P), k)) return false;
    if (P * A.H.theta[c] != B.H.theta[c] * P) return false;
  }
  if (C.projective() && phi[1].swap_var() * A.H.E.g != B.H.E.g * phi[0]) return false;
  return true;
}

std::optional<GradedIso> graded_higgs_isomorphic(const GradedHiggsBundle& A, const GradedHiggsBundle& B,
                                                 const IsoOptions& opt) {
  if (A.ranks != B.ranks || A.curve().kind != B.curve().kind) return std::nullopt;
  const Ring& R = A.H.E.ring();
  if (&R != &B.H.E.ring()) throw WrongModulus("isomorphism search between different coefficient rings");
  require_field(R, "graded_higgs_isomorphic");
  const Curve& C = A.curve();
  const int r = A.rank();
  if (A.H.E.g == B.H.E.g && A.H.theta == B.H.theta) {
    GradedIso id{{}, true, 0};
    for (int c = 0; c < C.charts(); ++c) id.phi.push_back(PMat::identity(R, r));
    return id;
  }
  // coefficient field
  const Ring* Fp = &R;
  if (opt.field_degree > 1) {
    if (R.is_galois()) {
      if (R.f() != opt.field_degree) throw WrongModulus("data field and search field differ");
    } else {
      Fp = &Ring::gf(R.p(), opt.field_degree);
    }
  }
  const Ring& F = *Fp;
  auto NA = normalize_graded(&F == &R ? A : to_ring(A, F));
  auto NB = normalize_graded(&F == &R ? B : to_ring(B, F));
  for (int i = 0; i <= A.weight(); ++i)
    if (NA.a[i] != NB.a[i]) return std::nullopt;

  // unknowns: (row, col, exponent) inside the diagonal blocks
  struct Unk {
    int i, j, e;
  };
  std::vector<Unk> unk;
  std::vector<int> ea, eb;  // split exponent of each basis vector
  for (int i = 0; i <= A.weight(); ++i)
    for (int x = 0; x < A.ranks[i]; ++x) {
      ea.push_back(NA.a[i][x]);
      eb.push_back(NB.a[i][x]);
    }
  for (int gI = 0; gI <= A.weight(); ++gI) {
    int o = A.offset(gI);
    for (int x = 0; x < A.ranks[gI]; ++x)
      for (int y = 0; y < A.ranks[gI]; ++y) {
        int j = o + x, k = o + y;
        int lo = 0, hi = opt.affine_degree;
        if (C.projective()) hi = eb[j] - ea[k];
        if (C.kind == CurveKind::Torus) lo = -opt.affine_degree;
        for (int e = lo; e <= hi; ++e) unk.push_back({j, k, e});
      }
  }
  const PMat& TA = NA.G.H.theta[0];
  const PMat& TB = NB.G.H.theta[0];
  // equations: coefficient of t^e in entry (a, b) of phi*TA - TB*phi
  std::map<std::tuple<int, int, int>, int> eq_index;
  std::vector<std::vector<std::pair<int, i64>>> cols(unk.size());
  auto add = [&](int u, int a, int b, int e, i64 v) {
    if (!v) return;
    auto key = std::make_tuple(a, b, e);
    auto it = eq_index.find(key);
    int idx = (it == eq_index.end()) ? (eq_index[key] = static_cast<int>(eq_index.size())) : it->second;
    cols[u].push_back({idx, v});
  };
  for (std::size_t u = 0; u < unk.size(); ++u) {
    auto [j, k, e] = unk[u];
    // (E_jk t^e TA): row j gets t^e * TA(k, :)
    for (int b = 0; b < r; ++b)
      for (auto& [x, v] : TA(k, b).terms()) add(static_cast<int>(u), j, b, x + e, v);
    // -(TB E_jk t^e): column k gets -t^e * TB(:, j)
    for (int a = 0; a < r; ++a)
      for (auto& [x, v] : TB(a, j).terms()) add(static_cast<int>(u), a, k, x + e, F.neg(v));
  }
  SMat M(F, std::max<int>(1, static_cast<int>(eq_index.size())), static_cast<int>(unk.size()));
  for (std::size_t u = 0; u < unk.size(); ++u)
    for (auto& [row, v] : cols[u]) M(row, static_cast<int>(u)) = F.add(M(row, static_cast<int>(u)), v);
  auto ker = unk.empty() ? std::vector<std::vector<i64>>{} : kernel_basis_field(M);
  const int d = static_cast<int>(ker.size());
  if (d == 0) return std::nullopt;

  auto build = [&](const std::vector<i64>& c) {
    std::vector<i64> x(unk.size(), 0);
    for (int l = 0; l < d; ++l)
      if (c[l])
        for (std::size_t u = 0; u < unk.size(); ++u) x[u] = F.add(x[u], F.mul(c[l], ker[l][u]));
    PMat P(F, r, r);
    for (std::size_t u = 0; u < unk.size(); ++u)
      if (x[u]) P(unk[u].i, unk[u].j) += LPoly::monomial(F, x[u], unk[u].e);
    return P;
  };
  const CurveKind kind = chart_kind(C);
  auto invertible = [&](const PMat& P) {
    for (int gI = 0; gI <= A.weight(); ++gI) {
      if (A.ranks[gI] == 0) continue;
      int o = A.offset(gI);
      if (!is_chart_unit(det(P.block(o, o, A.ranks[gI], A.ranks[gI])), kind)) return false;
    }
    return true;
  };
  std::optional<PMat> found;
  bool lex = false;
  {
    std::vector<i64> c(d, 0);
    long long steps = 0;
    for (;;) {
      if (++steps > opt.budget) break;
      PMat P = build(c);
      if (invertible(P)) {
        found = P;
        lex = true;
        break;
      }
      int l = d - 1;
      while (l >= 0 && ++c[l] == F.size()) c[l--] = 0;
      if (l < 0) break;
    }
  }
  if (!found) {
    std::mt19937_64 g(opt.seed);
    std::uniform_int_distribution<i64> dist(0, F.size() - 1);
    for (int it = 0; it < opt.random_tries && !found; ++it) {
      std::vector<i64> c(d);
      for (auto& v : c) v = dist(g);
      PMat P = build(c);
      if (invertible(P)) found = P;
    }
  }
  if (!found) return std::nullopt;
  // back to the given frames
  GradedIso res{{}, lex, d};
  PMat phi0 = inverse(NB.frames[0]) * *found * NA.frames[0];
  res.phi.push_back(phi0);
  if (C.projective()) {
    PMat phi1n = (NB.G.H.E.g * *found * inverse(NA.G.H.E.g)).swap_var();
    res.phi.push_back(inverse(NB.frames[1]) * phi1n * NA.frames[1]);
  }
  return res;
}

}  // namespace hdf
