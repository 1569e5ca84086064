#pragma once

#include <string>
#include <vector>

#include "hdf/matrix.hpp"

namespace hdf {

// AffineLine: one chart k[t].  Torus: one chart k[t, 1/t] (the overlap of the
// two standard charts of P^1).  ProjectiveLine: charts U_0 = Spec k[t] and
// U_1 = Spec k[s], s = 1/t.  Chart-1 data is always stored as polynomials in s.
enum class CurveKind { AffineLine, Torus, ProjectiveLine };

struct Curve {
  CurveKind kind = CurveKind::ProjectiveLine;
  const Ring* R = nullptr;  // Z/p^m (or F_{p^f} after base change)

  static Curve affine(const Ring& R) { return {CurveKind::AffineLine, &R}; }
  static Curve torus(const Ring& R) { return {CurveKind::Torus, &R}; }
  static Curve projective(const Ring& R) { return {CurveKind::ProjectiveLine, &R}; }

  const Ring& ring() const { return *R; }
  i64 p() const { return R->p(); }
  int m() const { return R->m(); }
  int charts() const { return kind == CurveKind::ProjectiveLine ? 2 : 1; }
  bool projective() const { return kind == CurveKind::ProjectiveLine; }
  std::string name() const;
  Curve with_ring(const Ring& S) const { return {kind, &S}; }
  // membership of a function in the ring of chart `chart` (in its own variable)
  bool in_chart_ring(const LPoly& f, int chart) const;
  bool in_chart_ring(const PMat& M, int chart) const;
  bool operator==(const Curve& o) const { return kind == o.kind && R == o.R; }
};

// f(t) = t^p + p*h(t) over Z/p^{m+1}, written in the chart's own coordinate.
struct FrobeniusLifting {
  int chart = 0;
  LPoly image;
};

struct LiftingAtlas {
  Curve curve;
  std::vector<FrobeniusLifting> lifts;  // one per chart
  const Ring& lift_ring() const { return lifts.at(0).image.ring(); }
};

// t -> t^p + p*h with h over Z/p^m (least residues lifted); validates shape.
FrobeniusLifting make_lifting(const Curve& C, int chart, const LPoly& h);
FrobeniusLifting lifting_from_image(const Curve& C, int chart, const LPoly& image);
LiftingAtlas default_atlas(const Curve& C);
LiftingAtlas make_atlas(const Curve& C, const std::vector<LPoly>& hs);

// (f'(t))/p reduced into `target` (Z/p^m).
LPoly dF_over_p(const FrobeniusLifting& F, const Ring& target);
LPoly dF_over_p(const LPoly& image, const Ring& target);
// (f_a - f_b)/p reduced into `target`.
LPoly lifting_difference_z(const LPoly& fa, const LPoly& fb, const Ring& target);
// coefficientwise a/p^k for a polynomial divisible by p^k, landing in `target`
LPoly div_p_into(const LPoly& a, int k, const Ring& target);

// 1/F for F = t^k (1 + p u) with k = +-p, as a Laurent polynomial.
LPoly invert_lifting(const LPoly& F);
// The chart-1 lifting of P^1 written in the t coordinate: 1/F_1(1/t).
LPoly chart1_lifting_in_t(const FrobeniusLifting& F1);
// The lifting of `chart` expressed in the t coordinate (identity for chart 0).
LPoly lifting_in_t(const LiftingAtlas& A, int chart);

// f(F(t)) for Laurent f; Finv must be 1/F (needed only for negative exponents).
LPoly compose_laurent(const LPoly& f, const LPoly& F, const LPoly& Finv);
PMat compose_laurent(const PMat& M, const LPoly& F, const LPoly& Finv);

// One-forms: a(t) dt on U_0 equals b(s) ds on U_1 with b = -t^2 a.
LPoly form_to_chart1(const LPoly& a_t);
LPoly form_to_chart0(const LPoly& b_s);
// d t / d s written in t: -t^2
LPoly dt_ds(const Ring& R);

}  // namespace hdf
