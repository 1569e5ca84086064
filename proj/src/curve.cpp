#include "hdf/curve.hpp"

#include "hdf/errors.hpp"

namespace hdf {

std::string Curve::name() const {
  switch (kind) {
    case CurveKind::AffineLine: return "A1";
    case CurveKind::Torus: return "Gm";
    case CurveKind::ProjectiveLine: return "P1";
  }
  return "?";
}

bool Curve::in_chart_ring(const LPoly& f, int chart) const {
  if (chart < 0 || chart >= charts()) return false;
  if (kind == CurveKind::Torus) return true;
  return f.is_polynomial();
}

bool Curve::in_chart_ring(const PMat& M, int chart) const {
  for (int i = 0; i < M.rows(); ++i)
    for (int j = 0; j < M.cols(); ++j)
      if (!in_chart_ring(M(i, j), chart)) return false;
  return true;
}

namespace {

const Ring& lift_ring_of(const Curve& C) {
  if (C.ring().is_galois()) throw WrongModulus("Frobenius liftings need a Z/p^m base");
  return Ring::zmod(C.p(), C.m() + 1);
}

void validate_image(const Curve& C, int chart, const LPoly& f) {
  const Ring& L = f.ring();
  if (L.p() != C.p() || L.m() != C.m() + 1) throw WrongModulus("lifting must live over Z/p^{m+1}");
  if (!C.in_chart_ring(f, chart)) throw ContractViolation("lifting image outside the chart ring");
  LPoly r = (f - LPoly::monomial(L, 1, static_cast<int>(C.p())));
  if (r.min_val() < 1) throw ContractViolation("lifting is not congruent to t^p mod p");
}

}  // namespace

FrobeniusLifting make_lifting(const Curve& C, int chart, const LPoly& h) {
  const Ring& L = lift_ring_of(C);
  LPoly ph = h.to_ring(L).scale(L.from_int(C.p()));
  LPoly f = LPoly::monomial(L, 1, static_cast<int>(C.p())) + ph;
  validate_image(C, chart, f);
  return {chart, f};
}

FrobeniusLifting lifting_from_image(const Curve& C, int chart, const LPoly& image) {
  validate_image(C, chart, image);
  return {chart, image};
}

LiftingAtlas default_atlas(const Curve& C) {
  LiftingAtlas A{C, {}};
  for (int c = 0; c < C.charts(); ++c) A.lifts.push_back(make_lifting(C, c, LPoly(C.ring())));
  return A;
}

LiftingAtlas make_atlas(const Curve& C, const std::vector<LPoly>& hs) {
  if (static_cast<int>(hs.size()) != C.charts()) throw ContractViolation("one lifting per chart expected");
  LiftingAtlas A{C, {}};
  for (int c = 0; c < C.charts(); ++c) A.lifts.push_back(make_lifting(C, c, hs[c]));
  return A;
}

LPoly div_p_into(const LPoly& a, int k, const Ring& target) {
  const Ring& R = a.ring();
  std::map<int, i64> t;
  for (auto& [e, v] : a.terms()) t[e] = target.from_int(R.div_p_pow(v, k));
  return LPoly::from_map(target, t);
}

LPoly dF_over_p(const LPoly& image, const Ring& target) {
  return div_p_into(image.derivative(), 1, target);
}

LPoly dF_over_p(const FrobeniusLifting& F, const Ring& target) { return dF_over_p(F.image, target); }

LPoly lifting_difference_z(const LPoly& fa, const LPoly& fb, const Ring& target) {
  return div_p_into(fa - fb, 1, target);
}

LPoly invert_lifting(const LPoly& F) {
  const Ring& R = F.ring();
  if (F.is_zero()) throw NonInvertible("zero lifting");
  // leading unit monomial: the exponent whose coefficient is a unit
  int k = 0;
  int units = 0;
  for (auto& [e, v] : F.terms())
    if (R.is_unit(v)) {
      k = e;
      ++units;
    }
  if (units != 1) throw NonInvertible("lifting is not a unit monomial modulo p");
  i64 c = F.coeff(k);
  LPoly mono_inv = LPoly::monomial(R, R.inv(c), -k);
  LPoly pu = F * mono_inv - LPoly::constant(R, 1);  // divisible by p
  LPoly s = LPoly::constant(R, 1), term = LPoly::constant(R, 1);
  for (int j = 1; j <= R.m(); ++j) {
    term = term * (-pu);
    if (term.is_zero()) break;
    s += term;
  }
  return s * mono_inv;
}

LPoly chart1_lifting_in_t(const FrobeniusLifting& F1) { return invert_lifting(F1.image.swap_var()); }

LPoly lifting_in_t(const LiftingAtlas& A, int chart) {
  if (chart == 0) return A.lifts.at(0).image;
  return chart1_lifting_in_t(A.lifts.at(1));
}

LPoly compose_laurent(const LPoly& f, const LPoly& F, const LPoly& Finv) {
  const Ring& R = f.ring();
  LPoly res(R);
  if (f.is_zero()) return res;
  LPoly Fr = F.to_ring(R);
  for (auto& [e, v] : f.terms()) {
    LPoly pw = (e >= 0) ? Fr.pow(e) : Finv.to_ring(R).pow(-e);
    res += pw.scale(v);
  }
  return res;
}

PMat compose_laurent(const PMat& M, const LPoly& F, const LPoly& Finv) {
  return M.map([&](const LPoly& x) { return compose_laurent(x, F, Finv); });
}

LPoly dt_ds(const Ring& R) { return LPoly::monomial(R, R.neg(1), 2); }

LPoly form_to_chart1(const LPoly& a_t) { return (a_t * dt_ds(a_t.ring())).swap_var(); }

LPoly form_to_chart0(const LPoly& b_s) {
  // b(s) ds = b(1/t) * (-t^{-2}) dt
  const Ring& R = b_s.ring();
  return b_s.swap_var() * LPoly::monomial(R, R.neg(1), -2);
}

}  // namespace hdf
