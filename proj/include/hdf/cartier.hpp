#pragma once

#include <string>
#include <vector>

#include "hdf/bundle.hpp"

namespace hdf {

// Nilpotent Higgs bundle over F_p (or F_{p^f}) plus liftings over Z/p^2.
struct CartierInput {
  HiggsBundle H;
  LiftingAtlas atlas;
};
// throws ExponentTooLarge / WrongModulus / ContractViolation
void validate(const CartierInput& in);

// sum_{j} M^j z^j / j!  (M nilpotent with M^{p-1} = 0)
PMat taylor_exp(const PMat& M, const LPoly& z);

// F^*Theta on a chart: t -> t^p and Frobenius on coefficients
PMat pulled_theta(const HiggsBundle& H, int chart);
// dF/p of the chart lifting, in the coefficient ring of H
LPoly chart_dF(const LiftingAtlas& A, int chart, const Ring& R);
// (F_0 - F_1)/p on the overlap, written in t
LPoly overlap_z(const LiftingAtlas& A, const Ring& R);

// Per chart: frame e (x) 1, connection d + (dF/p) F^*Theta.  On P^1 the
// transition is F^*g * exp(z F^*Theta_0) with z = (F_0 - F_1)/p.
FlatBundle inverse_cartier_1(const CartierInput& in);
FlatBundle inverse_cartier_1(const HiggsBundle& H, const LiftingAtlas& A);

// Matrices of (nabla_{d/dalpha})^p per chart (characteristic p only).
std::vector<PMat> p_curvature(const FlatBundle& F);
// The fixed sign: p_curvature(C^{-1}(E, theta)) = kPCurvatureSign * F^*Theta.
constexpr int kPCurvatureSign = -1;

// M is a morphism of flat bundles F -> G (per chart, G-coords = M * F-coords)
bool verify_flat_iso(const FlatBundle& F, const FlatBundle& G, const std::vector<PMat>& M);
// Taylor isomorphism C^{-1}_A(H) -> C^{-1}_B(H) between two atlases
std::vector<PMat> atlas_change_iso(const HiggsBundle& H, const LiftingAtlas& A, const LiftingAtlas& B);

struct OVReport {
  bool gluing = true;       // exp(z F^*theta) = exp(-xi F^*(-theta))
  bool connection = true;   // nabla_can - (dF/p) F^*theta equals ours on -theta
  bool curvature = true;    // p-curvature signs on both sides
  bool grade_sign = true;   // for graded input, C^{-1}(E,-theta) = C^{-1}(E,theta) via F^*diag((-1)^i)
  std::string detail;
  bool ok() const { return gluing && connection && curvature && grade_sign; }
};
// grade_ranks empty for ungraded input
OVReport ov_sign_check(const CartierInput& in, const std::vector<int>& grade_ranks = {});

}  // namespace hdf
