#include "hdf/cartier.hpp"

#include "hdf/errors.hpp"

namespace hdf {

void validate(const CartierInput& in) {
  const Ring& R = in.H.E.ring();
  require_field(R, "inverse Cartier transform");
  const Curve& C = in.H.E.curve;
  if (in.atlas.curve.kind != C.kind || static_cast<int>(in.atlas.lifts.size()) != C.charts())
    throw ContractViolation("atlas does not match the curve");
  if (in.atlas.lift_ring().p() != R.p() || in.atlas.lift_ring().m() != 2) throw WrongModulus("atlas must live over Z/p^2");
  if (!higgs_charts_compatible(in.H)) throw ContractViolation("Higgs field is not chart compatible");
  int e = nilpotency_exponent(in.H);
  if (e < 0 || e > R.p() - 1)
    throw ExponentTooLarge("nilpotency exponent " + std::to_string(e) + " exceeds p-1 = " + std::to_string(R.p() - 1));
}

PMat taylor_exp(const PMat& M, const LPoly& z) {
  const Ring& R = M.ring();
  const int n = M.rows();
  PMat S = PMat::identity(R, n), term = PMat::identity(R, n);
  for (int j = 1;; ++j) {
    term = (term * M).scale(z);
    if (term.is_zero()) break;
    if (j >= R.p()) throw ExponentTooLarge("Taylor sum does not terminate before p");
    S = S + term.scale(R.inv(R.from_int(j)));
  }
  return S;
}

PMat pulled_theta(const HiggsBundle& H, int chart) { return frobenius_twist(H.theta.at(chart)); }

LPoly chart_dF(const LiftingAtlas& A, int chart, const Ring& R) {
  const Ring& Fp = Ring::zmod(R.p(), 1);
  return dF_over_p(A.lifts.at(chart), Fp).to_ring(R);
}

LPoly overlap_z(const LiftingAtlas& A, const Ring& R) {
  const Ring& Fp = Ring::zmod(R.p(), 1);
  return lifting_difference_z(lifting_in_t(A, 0), lifting_in_t(A, 1), Fp).to_ring(R);
}

FlatBundle inverse_cartier_1(const CartierInput& in) {
  validate(in);
  const HiggsBundle& H = in.H;
  const Ring& R = H.E.ring();
  const Curve& C = H.E.curve;
  std::vector<PMat> A;
  for (int c = 0; c < C.charts(); ++c) A.push_back(pulled_theta(H, c).scale(chart_dF(in.atlas, c, R)));
  if (!C.projective()) return FlatBundle{Bundle::trivial(C, H.E.rank()), A};
  PMat T = frobenius_twist(H.E.g) * taylor_exp(pulled_theta(H, 0), overlap_z(in.atlas, R));
  return FlatBundle{Bundle(C, T), A};
}

FlatBundle inverse_cartier_1(const HiggsBundle& H, const LiftingAtlas& A) { return inverse_cartier_1(CartierInput{H, A}); }

std::vector<PMat> p_curvature(const FlatBundle& F) {
  const Ring& R = F.E.ring();
  if (!R.is_field()) throw WrongModulus("p-curvature needs characteristic p");
  std::vector<PMat> out;
  for (auto& A : F.A) {
    PMat M = PMat::identity(R, A.rows());
    for (int k = 0; k < R.p(); ++k) M = M.derivative() + A * M;
    out.push_back(M);
  }
  return out;
}

bool verify_flat_iso(const FlatBundle& F, const FlatBundle& G, const std::vector<PMat>& M) {
  const Curve& C = F.E.curve;
  if (static_cast<int>(M.size()) != C.charts()) return false;
  for (int c = 0; c < C.charts(); ++c) {
    if (!C.in_chart_ring(M[c], c)) return false;
    if (!(C.kind == CurveKind::Torus ? is_invertible_laurent(M[c]) : is_invertible_poly(M[c]))) return false;
    // horizontal: M' + A_G M - M A_F = 0
    if (!(M[c].derivative() + G.A[c] * M[c] - M[c] * F.A[c]).is_zero()) return false;
  }
  if (C.projective() && M[1].swap_var() * F.E.g != G.E.g * M[0]) return false;
  return true;
}

std::vector<PMat> atlas_change_iso(const HiggsBundle& H, const LiftingAtlas& A, const LiftingAtlas& B) {
  const Ring& R = H.E.ring();
  const Ring& Fp = Ring::zmod(R.p(), 1);
  std::vector<PMat> M;
  for (int c = 0; c < H.E.curve.charts(); ++c) {
    // the frame over lifting A expressed in the frame over lifting B
    LPoly z = lifting_difference_z(A.lifts[c].image, B.lifts[c].image, Fp).to_ring(R);
    M.push_back(taylor_exp(pulled_theta(H, c), z));
  }
  return M;
}

OVReport ov_sign_check(const CartierInput& in, const std::vector<int>& grade_ranks) {
  validate(in);
  OVReport rep;
  const HiggsBundle& H = in.H;
  const Ring& R = H.E.ring();
  const Curve& C = H.E.curve;
  HiggsBundle Hneg = H;
  for (auto& T : Hneg.theta) T = -T;
  FlatBundle ours_neg = inverse_cartier_1(Hneg, in.atlas);
  FlatBundle ours = inverse_cartier_1(H, in.atlas);

  // connection: nabla_can - (dF/p) F^*theta, built independently
  for (int c = 0; c < C.charts(); ++c) {
    PMat ov = -(pulled_theta(H, c).scale(chart_dF(in.atlas, c, R)));
    if (ov != ours_neg.A[c]) {
      rep.connection = false;
      rep.detail += "connection mismatch on chart " + std::to_string(c) + "; ";
    }
  }
  if (C.projective()) {
    // J = exp(-xi F^*theta), xi = (F_0 - F_1)/p, summed directly from powers
    const PMat N = pulled_theta(H, 0);
    const LPoly xi = overlap_z(in.atlas, R);
    PMat J = PMat::identity(R, H.E.rank()), pw = PMat::identity(R, H.E.rank());
    i64 fact = 1;
    for (int j = 1; j < R.p(); ++j) {
      pw = pw * N.scale(-xi);
      fact = R.mul(fact, R.from_int(j));
      J = J + pw.scale(R.inv(fact));
    }
    if (frobenius_twist(H.E.g) * J != ours_neg.E.g) {
      rep.gluing = false;
      rep.detail += "gluing mismatch; ";
    }
    // and our gluing on theta is the OV exponential evaluated on -theta
    if (taylor_exp(N, xi) != taylor_exp(-N, -xi)) {
      rep.gluing = false;
      rep.detail += "exponential sign mismatch; ";
    }
  }
  auto psi = p_curvature(ours);
  auto psi_neg = p_curvature(ours_neg);
  for (int c = 0; c < C.charts(); ++c) {
    PMat Ft = pulled_theta(H, c);
    if (psi[c] != Ft.scale(R.from_int(kPCurvatureSign)) || psi_neg[c] != Ft.scale(R.from_int(-kPCurvatureSign))) {
      rep.curvature = false;
      rep.detail += "p-curvature sign mismatch on chart " + std::to_string(c) + "; ";
    }
  }
  if (!grade_ranks.empty()) {
    std::vector<LPoly> d;
    for (std::size_t i = 0; i < grade_ranks.size(); ++i)
      for (int k = 0; k < grade_ranks[i]; ++k) d.push_back(LPoly::constant(R, (i % 2) ? R.neg(1) : 1));
    PMat s = PMat::diag(d);
    std::vector<PMat> M(C.charts(), s);  // F^* of a constant F_p matrix is itself
    if (!verify_flat_iso(ours, ours_neg, M)) {
      rep.grade_sign = false;
      rep.detail += "grade sign does not intertwine; ";
    }
  }
  return rep;
}

}  // namespace hdf
