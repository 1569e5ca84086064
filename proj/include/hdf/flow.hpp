#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hdf/cartier.hpp"
#include "hdf/filtration.hpp"

namespace hdf {

// Canonical: simpson_filtration from the trivial start (P^1 only).
// Supplied: supplied[i] is used at step i; missing entries are trivial.
// GradeInduced: Fil^k spanned by the grades >= k of the input.
enum class FilPolicy { Canonical, Supplied, GradeInduced };

struct FlowPolicy {
  FilPolicy rule = FilPolicy::Canonical;
  std::vector<HodgeFiltration> supplied;
  int max_steps = 4;
  int max_iter = 64;  // xi iterations per canonical step
  IsoOptions iso;     // field degree and budget of the intertwiner search
};

struct FlowStep {
  FlatBundle H;
  HodgeFiltration fil;
  GradedHiggsBundle next;
};

// throws PolicyFiltrationInvalid, NotNablaSemistable, ExponentTooLarge, ...
FlowStep flow_step(const GradedHiggsBundle& G, const FlowPolicy& policy, const LiftingAtlas& atlas, int index = 0);
HodgeFiltration grade_induced_filtration(const GradedHiggsBundle& G, const FlatBundle& H);

struct Period {
  int e = 0;
  int f = 1;
  GradedIso phi;  // E_{e+f} -> E_e
};

struct FlowTrace {
  std::vector<GradedHiggsBundle> E;  // E_0 .. E_N
  std::vector<FlatBundle> H;         // H_i = C^{-1}(E_i), i < N
  std::vector<HodgeFiltration> fil;  // Fil_i on H_i
  std::vector<int> degrees;
  std::vector<Rational> mu_max;      // P^1 only; empty otherwise
  std::vector<Rational> bundle_mu_max;  // of the underlying bundle of H_i (P^1 only)
  std::vector<bool> semistable;      // P^1 only
  bool degree_scaling = true;
  bool semistability_preserved = true;
  std::string stopped;               // error that ended the run early, if any
  std::optional<Period> period;
};

FlowTrace run_flow(const GradedHiggsBundle& G0, const FlowPolicy& policy, const LiftingAtlas& atlas);
// smallest (e, f) in lexicographic order with E_{e+f} isomorphic to E_e
std::optional<Period> detect_period(const std::vector<GradedHiggsBundle>& stages, const IsoOptions& opt = {});

// ---- periodic tuples ---------------------------------------------------------------

struct PeriodicTuple {
  GradedHiggsBundle E;
  std::vector<HodgeFiltration> fils;  // Fil_0 .. Fil_{f-1}
  std::vector<PMat> phi;              // per chart, E_f -> E_0
  LiftingAtlas atlas;
  int period() const { return static_cast<int>(fils.size()); }
};

struct TupleStages {
  std::vector<GradedHiggsBundle> E;  // E_0 .. E_f
  std::vector<FlatBundle> H;         // C^{-1}(E_i), i <= f
};
// throws PolicyFiltrationInvalid
TupleStages unfold(const PeriodicTuple& T);
bool verify_tuple(const PeriodicTuple& T);

// graded part (diagonal grade blocks) of a filtered map
PMat graded_part(const PMat& M, const std::vector<int>& ranks);
PMat graded_part(const PMat& M, const std::vector<int>& row_ranks, const std::vector<int>& col_ranks);
// the map Gr(HA, FilA) -> Gr(HB, FilB) induced by the flat isomorphism Psi (per chart)
std::vector<PMat> regrade(const DeRhamBundle& A, const DeRhamBundle& B, const std::vector<PMat>& Psi);
// (F^*psi)^{-1}(FilB) on C^{-1}(A) for a graded isomorphism psi: A -> B
HodgeFiltration pull_filtration(const FlatBundle& HA, const std::vector<PMat>& Psi, const HodgeFiltration& filB);
std::vector<PMat> frobenius_twist(const std::vector<PMat>& M);

// psi: A.E -> B.E; checks filtrations correspond and phi_B psi_f = psi_0 phi_A
bool verify_tuple_iso(const PeriodicTuple& A, const PeriodicTuple& B, const std::vector<PMat>& psi);

PeriodicTuple shift_tuple(const PeriodicTuple& T);
PeriodicTuple lengthen_tuple(const PeriodicTuple& T, int l);

PeriodicTuple to_ring(const PeriodicTuple& T, const Ring& S);

// ---- F_{p^f} endomorphism structure -------------------------------------------------

struct PackedTuple {
  PeriodicTuple T;        // one-periodic
  std::vector<PMat> s;    // per chart, the endomorphism xi + xi^p + ...
  i64 xi = 0;
  int f = 1;
  std::vector<int> slot_ranks;   // rank of E_i
  bool companion_identity = false;
  bool endomorphism = false;
};

// minimal polynomial of xi over F_p (low to high); throws NotPrimitive unless degree f
std::vector<i64> minimal_polynomial(const Ring& K, i64 xi, int f);
// the block identity rot * diag(xi^{p^i}) = diag(xi^{p^{i+1}}) * rot with rot(i, i+1) = 1, rot(f-1, 0) = phi
bool companion_identity(const PMat& phi, i64 xi, int f);

// T must be defined over F_{p^f} (f = period), xi a generator of it
PackedTuple pack_endostructure(const PeriodicTuple& T, i64 xi);

struct Unpacked {
  PeriodicTuple T;                          // period f
  std::vector<std::vector<PMat>> embed;     // embed[i][chart]: E_i-eigenspace basis inside G
};
// throws BadMinimalPolynomial
Unpacked unpack_endostructure(const PeriodicTuple& T1, const std::vector<PMat>& s, i64 xi, int f);

// ---- relative Frobenius ------------------------------------------------------------------

struct FrobeniusCertificate {
  std::vector<PMat> Phi;   // per chart, C^{-1}(Gr_Fil H) -> H
  bool invertible = false;
  bool horizontal = false;
  bool taylor = false;
  std::string failure;     // which condition broke
  bool ok() const { return invertible && horizontal && taylor; }
};
// `other` is a second atlas for the lifting-change part of the Taylor check
FrobeniusCertificate build_relative_frobenius(const PeriodicTuple& T, const LiftingAtlas& other);

}  // namespace hdf
