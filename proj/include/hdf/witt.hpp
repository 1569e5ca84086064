#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hdf/cartier.hpp"
#include "hdf/filtration.hpp"

namespace hdf {

// A derivation f * d/dx on a chart, x the chart coordinate.
using Derivation = LPoly;

// nabla(s) = (p s' + B s) dx per chart; on P^1 the transition is E.g.
struct PConnectionModule {
  Bundle E;
  std::vector<PMat> B;
  int level = 0;  // declared bound
  int rank() const { return E.rank(); }
  const Ring& ring() const { return E.ring(); }
};

PMat p_gauge(const PMat& B, const PMat& M, const PMat& Minv);
bool p_charts_compatible(const PConnectionModule& M);
PMat apply_p_connection(const PConnectionModule& M, int chart, const Derivation& D, const PMat& s);
// every (level+1)-fold composite of nabla_{d/dx} kills the frame and the samples
bool has_level(const PConnectionModule& M, int level, const std::vector<PMat>& samples = {});

class TwistedFlatModule {
 public:
  // slot presentation used to evaluate gamma
  class Model {
   public:
    virtual ~Model() = default;
    virtual PMat gamma(int chart, const std::vector<Derivation>& D, const PMat& s) const = 0;
  };

  PConnectionModule pconn;
  std::vector<int> ranks;  // grade blocks of the frame, grade 0 first
  std::string construction;
  std::shared_ptr<const Model> model;

  int rank() const { return pconn.rank(); }
  const Ring& ring() const { return pconn.ring(); }
  i64 p() const { return ring().p(); }
  int n() const { return ring().m(); }
  const Curve& curve() const { return pconn.E.curve; }
  std::vector<int> grades() const;

  PMat nabla(int chart, const Derivation& D, const PMat& s) const { return apply_p_connection(pconn, chart, D, s); }
  // gamma_m(D_1, ..., D_{p-1+m})(s), m = D.size() - (p-1)
  PMat gamma(int chart, const std::vector<Derivation>& D, const PMat& s) const;
};

// (H, nabla, Fil) in a filtered frame: Fil^i is spanned by the frame vectors of grade >= i.
struct FilteredConnection {
  FlatBundle H;
  std::vector<int> ranks;
  int level() const { return static_cast<int>(ranks.size()) - 1; }
};

// (E, theta) over Z/p^n together with (Hbar, nablabar, Filbar) over Z/p^{n-1}, stored in a
// filtered frame whose graded pieces are identified with E mod p^{n-1} (psibar = 1).
struct LiftingInputTuple {
  GradedHiggsBundle E;
  std::optional<FilteredConnection> Hbar;  // empty for n = 1
  std::optional<DeRhamBundle> user;        // Hbar in the coordinates it was given in
  std::vector<PMat> frames;                // user coordinates = frames * normal coordinates
  int n() const { return E.H.E.ring().m(); }
};

LiftingInputTuple first_level_tuple(const GradedHiggsBundle& E);
// throws ContractViolation (psibar not compatible), LevelTooHigh, WrongModulus
LiftingInputTuple make_lifting_tuple(const GradedHiggsBundle& E, const FilteredConnection& Hbar);
LiftingInputTuple make_lifting_tuple(const GradedHiggsBundle& E, const DeRhamBundle& Hbar, const std::vector<PMat>& psibar);
// the same tuple with Hbar presented in the frame fbar' = fbar * U (U filtered, unipotent)
LiftingInputTuple reframe(const LiftingInputTuple& T, const std::vector<PMat>& U);
// reduction to Z/p^{n-1}
LiftingInputTuple reduce_tuple(const LiftingInputTuple& T);

// M with grade blocks (k', k): kept for k' = k, lifted and multiplied by p^{k'-k} for k' > k
PMat filtered_descend(const PMat& M, const std::vector<int>& ranks, const Ring& target);

// throws NotFree, LevelTooHigh
FilteredConnection local_filtered_lifting(const LiftingInputTuple& T);
TwistedFlatModule gn_construct(const FilteredConnection& H);
TwistedFlatModule sharp_construct(const LiftingInputTuple& T);

struct Equivalence {
  std::vector<PMat> lambda;  // per chart, gn coordinates = lambda * sharp coordinates
  bool horizontal = false;
  bool gamma_compatible = false;
  bool invertible = false;
  bool ok() const { return horizontal && gamma_compatible && invertible; }
};
Equivalence verify_equivalence(const TwistedFlatModule& from, const TwistedFlatModule& to, const std::vector<PMat>& lambda,
                                std::uint64_t seed = 1, int samples = 6);
// lambda solved linearly with identity grade-diagonal blocks, entries of degree <= deg
Equivalence equivalence_check(const TwistedFlatModule& gn, const TwistedFlatModule& sharp, int deg = 2,
                              std::uint64_t seed = 1);

struct GammaReport {
  std::vector<int> checked = std::vector<int>(6, 0);
  std::vector<int> failed = std::vector<int>(6, 0);
  std::string first_failure;
  bool ok() const;
};
GammaReport gamma_relations_check(const TwistedFlatModule& M, std::uint64_t seed, int samples = 4);

// ---- F_n -------------------------------------------------------------------------------

// (p - 1) + n p
int taylor_bound(i64 p, int n);
// v_p(p^{j+1-p} / j!) for j >= p, v_p(1/j!) = 0 for j < p
int taylor_coefficient_valuation(i64 p, int j);

struct FnOptions {
  int bound = -1;  // default taylor_bound
  int extra = 0;   // further terms that must vanish
};
// sum_j F_b^*(nabla(d)^j / j! e) z^j, z = (F_a - F_b)/p, the high terms through gamma.
// Fb, Fb_inv over Z/p^{n+1}, z over Z/p^n.  throws TruncationBoundExceeded
PMat taylor_transition(const TwistedFlatModule& M, int chart, const LPoly& Fb, const LPoly& Fb_inv, const LPoly& z,
                       const FnOptions& opt = {});

// atlas over the curve of M (lifts over Z/p^{n+1}); throws WrongModulus, ContractViolation
FlatBundle fn_apply(const TwistedFlatModule& M, const LiftingAtlas& atlas, const FnOptions& opt = {});
// per chart, F_n with atlas a -> F_n with atlas b
std::vector<PMat> fn_atlas_change(const TwistedFlatModule& M, const LiftingAtlas& a, const LiftingAtlas& b,
                                  const FnOptions& opt = {});

FlatBundle cn_inverse(const LiftingInputTuple& T, const LiftingAtlas& atlas);
LiftingAtlas reduce_atlas(const LiftingAtlas& A);

struct ReductionReport {
  FlatBundle reduced;   // cn_inverse mod p^{n-1}
  FlatBundle previous;  // C_{n-1}^{-1} of the reduced tuple
  std::vector<PMat> iso;
  bool ok = false;
};
ReductionReport mod_reduction_check(const LiftingInputTuple& T, const LiftingAtlas& atlas);

// ---- flows over Z/p^n ---------------------------------------------------------------------

struct WittStep {
  FlatBundle H;                 // cn_inverse output
  std::vector<PMat> frames;     // adapted frames of the lifted filtration
  GradedHiggsBundle next;
  std::optional<std::vector<PMat>> psi;  // next -> E lifting the tuple's identification
};
// fil: lifted filtration on cn_inverse(T) (n = 2); filbar: the filtration it must lift.
// throws NoLiftedFiltration, TransversalityViolated, NotFree
WittStep w2_flow_step(const LiftingInputTuple& T, const HodgeFiltration& fil, const HodgeFiltration& filbar,
                      const LiftingAtlas& atlas, int psi_degree = 2);
// adapted frames over Z/p^n for a filtration lifting a mod-p one
std::vector<PMat> lifted_adapted_frames(const FlatBundle& H, const HodgeFiltration& fil);

// For two level-one filtrations on H over Z/p^2 with the same reduction: the
// endomorphism (f / p) of Gr mod p in the grading frames of A's reduction
// (zero iff they coincide).
struct LiftDifference {
  GradedHiggsBundle gr;      // Gr mod p
  std::vector<PMat> endo;
  bool higgs_morphism = false;
  bool nilpotent = false;
  bool zero = false;
};
LiftDifference lift_difference(const FlatBundle& H, const HodgeFiltration& A, const HodgeFiltration& B);

}  // namespace hdf
