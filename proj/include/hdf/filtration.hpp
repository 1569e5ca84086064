#pragma once

#include <string>
#include <vector>

#include "hdf/bundle.hpp"

namespace hdf {

// Maximal destabilizing subobject.  For a graded Higgs bundle `pieces[i]` is
// I^i inside E^i (piece coordinates) and `I` the direct sum in the
// coordinates of the whole bundle; for a flat bundle there is one piece.
struct DestabilizerReport {
  Subbundle I;
  std::vector<Subbundle> pieces;
  std::vector<int> ranks;
  std::vector<int> degrees;
  int degree = 0;
  Rational mu_max;
  int r_max = 0;
  bool semistable = false;  // I is everything
};

struct SemistabilityResult {
  bool semistable = false;
  DestabilizerReport witness;  // I itself when semistable
};

// Exact: the destabilizer of a Higgs bundle on P^1 is O(mu)^rho inside
// ker(theta), spanned by theta-killed sections of E(-mu); for flat bundles by
// horizontal sections.  Degrees are scanned downward from the top exponent.
DestabilizerReport higgs_destabilizer(const GradedHiggsBundle& G);
DestabilizerReport nabla_destabilizer(const FlatBundle& V);

SemistabilityResult is_higgs_semistable(const GradedHiggsBundle& G);
SemistabilityResult is_nabla_semistable(const FlatBundle& V);
// throws SemistableInput
DestabilizerReport max_destabilizer_graded(const GradedHiggsBundle& G);

// Bounded exhaustive search: every saturated graded subobject whose line
// summands have degree >= min_degree, built as saturated spans of enumerated
// line maps.  Throws SearchBudgetExceeded.
struct EnumBounds {
  int min_degree = -2;
  long long budget = 2000000;
};
DestabilizerReport destabilizer_by_enumeration(const GradedHiggsBundle& G, const EnumBounds& b = {});
DestabilizerReport nabla_destabilizer_by_enumeration(const FlatBundle& V, const EnumBounds& b = {});

// theta-closure of the graded HN steps; always a valid invariant subobject,
// not always the maximal one.
DestabilizerReport destabilizer_heuristic(const GradedHiggsBundle& G);

// ---- xi operator -----------------------------------------------------------------

struct XiStep {
  explicit XiStep(const GradedHiggsBundle& G) : before(G), after(G) {}
  HodgeFiltration fil;        // xi(Fil), level n+1, unreduced
  DestabilizerReport I;       // of Gr_Fil
  GradedHiggsBundle before;   // Gr_Fil
  GradedHiggsBundle after;    // Gr_xi(Fil)
  bool exact_sequence = false;
  bool transversal = false;
};
// throws SemistableInput
XiStep xi_step(const DeRhamBundle& D);

struct XiLogEntry {
  int step = 0;
  int level = 0;          // level of xi^step(Fil)
  int reduced_level = 0;
  Rational mu_max;
  int r_max = 0;
  bool semistable = false;
  int window = 0;         // steps until the next strict descent (0: none needed)
};

struct DescentCertificate {
  bool monotone = true;         // mu_max, then r_max never increase
  bool window_descent = true;   // strict drop within max(level, 1) steps
  bool exact_sequences = true;
  bool transversal = true;
  bool terminal_semistable = false;
  std::string detail;
  bool ok() const { return monotone && window_descent && exact_sequences && transversal && terminal_semistable; }
};

struct SimpsonResult {
  explicit SimpsonResult(const GradedHiggsBundle& G) : graded(G) {}
  HodgeFiltration fil;   // reduced and anchored: Fil^0 = V, Fil^1 != V
  HodgeFiltration raw;   // xi^k(start)
  GradedHiggsBundle graded;
  std::vector<XiLogEntry> log;
  DescentCertificate cert;
  int iterations = 0;
};

// Iterate xi from `start` until the grading is semistable.  Throws
// NotNablaSemistable, IterationBudgetExceeded.
SimpsonResult xi_iterate(const FlatBundle& V, const HodgeFiltration& start, int max_iter = 64);
SimpsonResult simpson_filtration(const FlatBundle& V, int max_iter = 64);

// ranks and degrees of a graded piece (0 for empty pieces)
int piece_degree(const GradedHiggsBundle& G, int i);

}  // namespace hdf
