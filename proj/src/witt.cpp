#include "hdf/witt.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <tuple>

#include "hdf/errors.hpp"
#include "hdf/flow.hpp"
#include "hdf/generate.hpp"
#include "hdf/linalg.hpp"

namespace hdf {

namespace {

std::vector<int> offsets(const std::vector<int>& ranks) {
  std::vector<int> off(ranks.size() + 1, 0);
  for (std::size_t i = 0; i < ranks.size(); ++i) off[i + 1] = off[i] + ranks[i];
  return off;
}

std::vector<int> grade_list(const std::vector<int>& ranks) {
  std::vector<int> g;
  for (std::size_t i = 0; i < ranks.size(); ++i) g.insert(g.end(), ranks[i], static_cast<int>(i));
  return g;
}

const Ring& bar_ring(const Ring& R) {
  if (R.is_galois() || R.m() < 2) throw WrongModulus("no mod p^{n-1} ring below " + R.name());
  return Ring::zmod(R.p(), R.m() - 1);
}

CurveKind kind_of(const Curve& C) { return C.kind == CurveKind::Torus ? CurveKind::Torus : CurveKind::AffineLine; }

// exponent window of the chart ring used by the linear searches
std::pair<int, int> window(const Curve& C, int deg) {
  if (C.kind == CurveKind::Torus) return {-deg, deg};
  return {0, deg};
}

bool unit_mod_p(const LPoly& d, CurveKind kind) {
  const Ring& Fp = Ring::zmod(d.ring().p(), 1);
  LPoly r = d.to_ring(Fp);
  if (!r.is_unit_monomial()) return false;
  return kind == CurveKind::Torus || r.lo() == 0;
}

PMat restrict_grade(const PMat& s, const std::vector<int>& grades, int k) {
  PMat out(s.ring(), s.rows(), 1);
  for (int e = 0; e < s.rows(); ++e)
    if (grades[e] == k) out(e, 0) = s(e, 0);
  return out;
}

PMat unit_column(const Ring& R, int r, int e) {
  PMat v(R, r, 1);
  v(e, 0) = LPoly::constant(R, 1);
  return v;
}

PMat add_into(std::map<int, PMat>& slots, int i, const PMat& v) {
  auto it = slots.find(i);
  if (it == slots.end()) return slots.emplace(i, v).first->second;
  it->second = it->second + v;
  return it->second;
}

// first grade k (as a block column) with a nonzero block (k', k), k' < k - 1
int transversality_defect(const PMat& A, const std::vector<int>& ranks) {
  auto off = offsets(ranks);
  for (std::size_t k = 0; k < ranks.size(); ++k)
    for (std::size_t kp = 0; kp + 1 < k; ++kp)
      if (!A.block(off[kp], off[k], ranks[kp], ranks[k]).is_zero()) return static_cast<int>(k);
  return -1;
}

bool lower_filtered(const PMat& g, const std::vector<int>& ranks) {
  auto off = offsets(ranks);
  for (std::size_t k = 0; k < ranks.size(); ++k)
    for (std::size_t kp = 0; kp < k; ++kp)
      if (!g.block(off[kp], off[k], ranks[kp], ranks[k]).is_zero()) return false;
  return true;
}

// B(e', e) = Theta for k' = k - 1, p^{k'-k+1} A for k' >= k
PMat twisted_matrix(const PMat& A, const PMat& Theta, const std::vector<int>& grades) {
  const Ring& R = Theta.ring();
  const int r = Theta.rows();
  PMat B(R, r, r);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j) {
      const int d = grades[i] - grades[j];
      if (d == -1)
        B(i, j) = Theta(i, j);
      else if (d >= 0)
        B(i, j) = A(i, j).to_ring(R).scale(R.p_pow(d + 1));
    }
  return B;
}

PMat sharp_transition(const PMat& gE, const PMat& Gbar, const std::vector<int>& ranks) {
  const Ring& R = gE.ring();
  PMat G = filtered_descend(Gbar, ranks, R);
  auto off = offsets(ranks);
  for (std::size_t k = 0; k < ranks.size(); ++k) G.set_block(off[k], off[k], gE.block(off[k], off[k], ranks[k], ranks[k]));
  return G;
}

HodgeFiltration coordinate_filtration(const Curve& C, const Ring& R, const std::vector<int>& ranks) {
  auto off = offsets(ranks);
  const int r = off.back();
  HodgeFiltration fil;
  for (std::size_t i = 1; i < ranks.size(); ++i) {
    std::vector<int> idx;
    for (int e = off[i]; e < r; ++e) idx.push_back(e);
    Subbundle S;
    for (int c = 0; c < C.charts(); ++c) S.gens.push_back(PMat::identity(R, r).select_cols(idx));
    fil.steps.push_back(S);
  }
  return fil;
}

PMat div_p_matrix(const PMat& M, const Ring& target) {
  return M.map([&](const LPoly& x) { return div_p_into(x, 1, target); });
}

i64 factorial_unit_inverse(const Ring& R, int j) {
  const i64 p = R.p();
  i64 u = 1;
  for (int i = 2; i <= j; ++i) {
    i64 x = i;
    while (x % p == 0) x /= p;
    u = R.mul(u, R.from_int(x));
  }
  return R.inv(u);
}

int vp_factorial(i64 p, int j) {
  int v = 0;
  for (i64 q = p; q <= j; q *= p) v += static_cast<int>(j / q);
  return v;
}

LPoly apply_derivation(const Derivation& D, const LPoly& f) { return D * f.derivative(); }

// affine system F(X) = 0, X per chart with the listed free entries
struct Unknown {
  int chart, i, j, e;
};
using AffineMap = std::function<std::vector<PMat>(const std::vector<PMat>&)>;

std::optional<std::vector<PMat>> solve_affine(const Ring& K, const std::vector<std::pair<int, int>>& dims,
                                              const std::vector<Unknown>& unk, const AffineMap& F) {
  std::vector<PMat> X0;
  for (auto& [r, c] : dims) X0.emplace_back(K, r, c);
  std::vector<PMat> r0 = F(X0);
  std::map<std::tuple<int, int, int, int>, int> row;
  auto index_of = [&](const std::vector<PMat>& v) {
    for (std::size_t q = 0; q < v.size(); ++q)
      for (int i = 0; i < v[q].rows(); ++i)
        for (int j = 0; j < v[q].cols(); ++j)
          for (auto& [e, c] : v[q](i, j).terms()) row.emplace(std::make_tuple(static_cast<int>(q), i, j, e), 0);
  };
  index_of(r0);
  std::vector<std::vector<PMat>> cols;
  for (auto& u : unk) {
    auto X = X0;
    X[u.chart](u.i, u.j) = LPoly::monomial(K, 1, u.e);
    auto v = F(X);
    for (std::size_t q = 0; q < v.size(); ++q) v[q] = v[q] - r0[q];
    index_of(v);
    cols.push_back(std::move(v));
  }
  int k = 0;
  for (auto& [key, idx] : row) idx = k++;
  SMat A(K, k, static_cast<int>(unk.size()));
  std::vector<i64> b(k, 0);
  auto scatter = [&](const std::vector<PMat>& v, const std::function<void(int, i64)>& put) {
    for (std::size_t q = 0; q < v.size(); ++q)
      for (int i = 0; i < v[q].rows(); ++i)
        for (int j = 0; j < v[q].cols(); ++j)
          for (auto& [e, c] : v[q](i, j).terms()) put(row.at(std::make_tuple(static_cast<int>(q), i, j, e)), c);
  };
  for (std::size_t u = 0; u < unk.size(); ++u) scatter(cols[u], [&](int r, i64 c) { A(r, static_cast<int>(u)) = c; });
  scatter(r0, [&](int r, i64 c) { b[r] = K.neg(c); });
  LinearSolution sol;
  try {
    sol = solve_linear_mod(A, b);
  } catch (const NoSolution&) {
    return std::nullopt;
  }
  auto X = X0;
  for (std::size_t u = 0; u < unk.size(); ++u)
    if (sol.particular[u] != 0)
      X[unk[u].chart](unk[u].i, unk[u].j) += LPoly::monomial(K, sol.particular[u], unk[u].e);
  return X;
}

// ---- slot models ----------------------------------------------------------------------

// H~ = coker([-1] - p) on the sum of Fil^i: slot i holds a vector of Fil^i.
class GnModel : public TwistedFlatModule::Model {
 public:
  GnModel(std::vector<PMat> A, std::vector<int> grades) : A_(std::move(A)), grades_(std::move(grades)) {}

  PMat gamma(int chart, const std::vector<Derivation>& D, const PMat& s) const override {
    const Ring& R = s.ring();
    const int N = static_cast<int>(D.size());
    const int m = N - static_cast<int>(R.p() - 1);
    std::map<int, PMat> slots;
    for (int k : grades_) slots.emplace(k, restrict_grade(s, grades_, k));
    for (int idx = N - 1; idx >= 0; --idx) {
      const bool shift = idx >= m;
      std::map<int, PMat> next;
      for (auto& [i, v] : slots) {
        if (!shift && i >= 0) throw ContractViolation("nabla'/p applied outside the negative slots");
        add_into(next, shift ? i - 1 : i, (v.derivative() + A_[chart] * v).scale(D[idx]));
      }
      slots = std::move(next);
    }
    PMat out(R, s.rows(), 1);
    for (auto& [i, v] : slots)
      for (int e = 0; e < s.rows(); ++e) {
        if (v(e, 0).is_zero()) continue;
        if (grades_[e] < i) throw ContractViolation("slot element outside Fil^i");
        out(e, 0) += v(e, 0).scale(R.p_pow(grades_[e] - i));
      }
    return out;
  }

 private:
  std::vector<PMat> A_;
  std::vector<int> grades_;
};

// H^# = coker(eps) on the sum of Filbar^i x_{Ebar^i} E^i: slot i holds (x, y) with x a
// lift of the Filbar^i component (only its p-multiples survive) and y in E^i.
class SharpModel : public TwistedFlatModule::Model {
 public:
  SharpModel(std::vector<PMat> Abar, std::vector<PMat> Theta, std::vector<int> grades, int n)
      : Abar_(std::move(Abar)), Theta_(std::move(Theta)), grades_(std::move(grades)), n_(n) {}

  PMat gamma(int chart, const std::vector<Derivation>& D, const PMat& s) const override {
    const Ring& R = s.ring();
    const int N = static_cast<int>(D.size());
    const int m = N - static_cast<int>(R.p() - 1);
    std::map<int, std::pair<PMat, PMat>> slots;
    for (int k : grades_) {
      PMat v = restrict_grade(s, grades_, k);
      slots.emplace(k, std::make_pair(v, v));
    }
    for (int idx = N - 1; idx >= 0; --idx) {
      const bool shift = idx >= m;
      std::map<int, std::pair<PMat, PMat>> next;
      for (auto& [i, xy] : slots) {
        if (!shift && i >= 0) throw ContractViolation("nabla''/p applied outside the negative slots");
        PMat x = (xy.first.derivative() + Abar_[chart] * xy.first).scale(D[idx]);
        PMat y = shift ? (Theta_[chart] * xy.second).scale(D[idx]) : PMat(R, s.rows(), 1);
        const int j = shift ? i - 1 : i;
        auto it = next.find(j);
        if (it == next.end())
          next.emplace(j, std::make_pair(x, y));
        else
          it->second = {it->second.first + x, it->second.second + y};
      }
      slots = std::move(next);
    }
    PMat out(R, s.rows(), 1);
    for (auto& [i, xy] : slots)
      for (int e = 0; e < s.rows(); ++e) {
        const int k = grades_[e];
        if (k == i)
          out(e, 0) += xy.second(e, 0);
        else if (!xy.second(e, 0).is_zero())
          throw ContractViolation("E-component outside its grade");
        if (k > i)
          out(e, 0) += xy.first(e, 0).scale(R.p_pow(k - i));
        else if (k < i && !xy.first(e, 0).is_zero() && xy.first(e, 0).min_val() < n_ - 1)
          throw ContractViolation("slot element outside Filbar^i");
      }
    return out;
  }

 private:
  std::vector<PMat> Abar_, Theta_;
  std::vector<int> grades_;
  int n_;
};

// graded Higgs bundle of H in the adapted frames B (x = B y)
GradedHiggsBundle grade_in_frames(const FlatBundle& H, const std::vector<PMat>& B, const std::vector<int>& ranks) {
  const Ring& R = H.E.ring();
  const Curve& C = H.E.curve;
  auto off = offsets(ranks);
  const int r = H.E.rank();
  GradedHiggsBundle G{HiggsBundle{Bundle::trivial(C, r), {}}, ranks};
  for (int c = 0; c < C.charts(); ++c) {
    PMat Bi = inverse(B[c]);
    PMat Ap = gauge(H.A[c], Bi, B[c]);
    int k = transversality_defect(Ap, ranks);
    if (k >= 0) throw TransversalityViolated(k, "nabla(Fil^" + std::to_string(k) + ") is not inside Fil^" + std::to_string(k - 1));
    PMat Th(R, r, r);
    for (std::size_t i = 1; i < ranks.size(); ++i)
      Th.set_block(off[i - 1], off[i], Ap.block(off[i - 1], off[i], ranks[i - 1], ranks[i]));
    G.H.theta.push_back(Th);
  }
  if (C.projective()) G.H.E = Bundle(C, graded_part(inverse(B[1].swap_var()) * H.E.g * B[0], ranks));
  return G;
}

// adapted frames over Z/p^n reducing to the mod-p grading frames `bar`
std::vector<PMat> lift_frames(const FlatBundle& H, const HodgeFiltration& fil, const std::vector<PMat>& bar,
                              const std::vector<int>& ranks) {
  const Ring& R = H.E.ring();
  const Ring& Fp = Ring::zmod(R.p(), 1);
  const Curve& C = H.E.curve;
  auto off = offsets(ranks);
  const int r = H.E.rank();
  std::vector<PMat> out;
  for (int c = 0; c < C.charts(); ++c) {
    PMat B(R, r, r);
    B.set_block(0, 0, bar[c].cols_range(0, ranks[0]).to_ring(R));
    for (std::size_t i = 1; i < ranks.size(); ++i) {
      const PMat& S = fil.steps[i - 1].gens[c];
      ChartSplit cs = [&] {
        try {
          return split_chart(S.to_ring(Fp), kind_of(C));
        } catch (const ContractViolation& e) {
          throw NotFree(std::string("lifted filtration step is not a direct summand: ") + e.what());
        }
      }();
      PMat coeff = cs.L * bar[c].cols_range(off[i], ranks[i]);
      B.set_block(0, off[i], S * coeff.to_ring(R));
    }
    if (B.to_ring(Fp) != bar[c]) throw ContractViolation("lifted frame does not reduce to the mod-p frame");
    PMat Bi = inverse(B);
    for (std::size_t i = 1; i < ranks.size(); ++i) {
      PMat Y = Bi * fil.steps[i - 1].gens[c];
      if (!Y.rows_range(0, off[i]).is_zero()) throw NoLiftedFiltration("filtration steps are not nested");
      if (fil.steps[i - 1].gens[c].cols() != r - off[i]) throw NoLiftedFiltration("filtration step has the wrong rank");
    }
    out.push_back(B);
  }
  return out;
}

HodgeFiltration reduce_fil(const HodgeFiltration& fil, const Ring& S) {
  HodgeFiltration out;
  for (auto& st : fil.steps) {
    Subbundle b;
    for (auto& g : st.gens) b.gens.push_back(g.to_ring(S));
    out.steps.push_back(b);
  }
  return out;
}

}  // namespace

// ---- p-connections ------------------------------------------------------------------------

PMat p_gauge(const PMat& B, const PMat& M, const PMat& Minv) {
  return M * B * Minv + (M * Minv.derivative()).scale(B.ring().p_pow(1));
}

bool p_charts_compatible(const PConnectionModule& M) {
  const Curve& C = M.E.curve;
  if (static_cast<int>(M.B.size()) != C.charts()) return false;
  for (int c = 0; c < C.charts(); ++c)
    if (!C.in_chart_ring(M.B[c], c)) return false;
  if (!C.projective()) return true;
  PMat gi = inverse(M.E.g);
  PMat rhs = p_gauge(M.B[0], M.E.g, gi).scale(dt_ds(M.ring()));
  return M.B[1].swap_var() == rhs;
}

PMat apply_p_connection(const PConnectionModule& M, int chart, const Derivation& D, const PMat& s) {
  return (s.derivative().scale(M.ring().p_pow(1)) + M.B.at(chart) * s).scale(D);
}

bool has_level(const PConnectionModule& M, int level, const std::vector<PMat>& samples) {
  const Ring& R = M.ring();
  const LPoly one = LPoly::constant(R, 1);
  for (int c = 0; c < M.E.curve.charts(); ++c) {
    for (auto v : samples) {
      for (int k = 0; k <= level; ++k) v = apply_p_connection(M, c, one, v);
      if (!v.is_zero()) return false;
    }
    // nabla^{l+1}(f e) = sum_a C(l+1, a) p^a f^(a) nabla^{l+1-a}(e)
    const int k = level + 1;
    for (int e = 0; e < M.rank(); ++e) {
      std::vector<PMat> pw{unit_column(R, M.rank(), e)};
      for (int j = 0; j < k; ++j) pw.push_back(apply_p_connection(M, c, one, pw.back()));
      i64 binom = 1;
      for (int a = 0; a <= k; ++a) {
        if (a > 0) binom = binom * (k - a + 1) / a;
        const i64 coef = R.mul(R.from_int(binom), R.p_pow(a));
        if (!pw[k - a].scale(LPoly::constant(R, coef)).is_zero()) return false;
      }
    }
  }
  return true;
}

std::vector<int> TwistedFlatModule::grades() const { return grade_list(ranks); }

PMat TwistedFlatModule::gamma(int chart, const std::vector<Derivation>& D, const PMat& s) const {
  if (static_cast<i64>(D.size()) < p() - 1) throw ContractViolation("gamma_m needs p - 1 + m derivations");
  return model->gamma(chart, D, s);
}

// ---- tuples -------------------------------------------------------------------------------

LiftingInputTuple first_level_tuple(const GradedHiggsBundle& E) {
  const Ring& R = E.H.E.ring();
  if (R.is_galois() || R.m() != 1) throw WrongModulus("first level tuples live over Z/p");
  if (E.weight() > R.p() - 2) throw LevelTooHigh("weight " + std::to_string(E.weight()) + " exceeds p - 2");
  if (!is_graded_valid(E)) throw ContractViolation("not a graded Higgs bundle");
  return LiftingInputTuple{E, std::nullopt, std::nullopt, {}};
}

LiftingInputTuple make_lifting_tuple(const GradedHiggsBundle& E, const FilteredConnection& Hbar) {
  const Ring& R = E.H.E.ring();
  if (R.is_galois()) throw WrongModulus("tuples live over Z/p^n");
  if (R.m() < 2) throw ContractViolation("n = 1 tuples carry no mod p^{n-1} data");
  const Ring& Rb = Hbar.H.E.ring();
  if (&Rb != &bar_ring(R)) throw WrongModulus("Hbar must live over " + bar_ring(R).name());
  const Curve& C = E.curve();
  if (Hbar.H.E.curve.kind != C.kind) throw ContractViolation("curves differ");
  if (E.weight() > R.p() - 2) throw LevelTooHigh("weight " + std::to_string(E.weight()) + " exceeds p - 2");
  if (Hbar.ranks != E.ranks || Hbar.H.E.rank() != E.rank()) throw NotFree("graded ranks of Hbar and E differ");
  if (!is_graded_valid(E)) throw ContractViolation("not a graded Higgs bundle");
  auto off = offsets(E.ranks);
  for (int c = 0; c < C.charts(); ++c) {
    const PMat& A = Hbar.H.A.at(c);
    int k = transversality_defect(A, E.ranks);
    if (k >= 0) throw TransversalityViolated(k, "Hbar is not transversal");
    for (int i = 1; i <= E.weight(); ++i)
      if (A.block(off[i - 1], off[i], E.ranks[i - 1], E.ranks[i]) !=
          E.theta_block(c, i).to_ring(Rb))
        throw ContractViolation("psibar does not match theta mod p^{n-1}");
  }
  if (C.projective()) {
    if (!lower_filtered(Hbar.H.E.g, E.ranks)) throw ContractViolation("Hbar transition does not preserve the filtration");
    if (graded_part(Hbar.H.E.g, E.ranks) != graded_part(E.H.E.g, E.ranks).to_ring(Rb))
      throw ContractViolation("psibar does not match the transition of E mod p^{n-1}");
    if (!flat_charts_compatible(Hbar.H)) throw ContractViolation("Hbar is not chart compatible");
  }
  LiftingInputTuple T{E, Hbar, DeRhamBundle{Hbar.H, coordinate_filtration(C, Rb, E.ranks)}, {}};
  for (int c = 0; c < C.charts(); ++c) T.frames.push_back(PMat::identity(Rb, E.rank()));
  return T;
}

LiftingInputTuple make_lifting_tuple(const GradedHiggsBundle& E, const DeRhamBundle& Hbar, const std::vector<PMat>& psibar) {
  const Ring& R = E.H.E.ring();
  const Ring& Rb = bar_ring(R);
  if (&Hbar.V.E.ring() != &Rb) throw WrongModulus("Hbar must live over " + Rb.name());
  if (!Rb.is_field()) throw ContractViolation("beyond n = 2 give Hbar in a filtered frame");
  Grading gr = grade_with_frames(Hbar);
  if (!verify_graded_iso(gr.G, to_ring(E, Rb), psibar)) throw ContractViolation("psibar is not a graded isomorphism Gr(Hbar) -> E mod p");
  std::vector<PMat> frames, M;
  for (std::size_t c = 0; c < psibar.size(); ++c) {
    frames.push_back(gr.frames[c] * inverse(psibar[c]));
    M.push_back(inverse(frames.back()));
  }
  LiftingInputTuple T = make_lifting_tuple(E, FilteredConnection{change_frame(Hbar.V, M), E.ranks});
  T.user = Hbar;
  T.frames = frames;
  return T;
}

LiftingInputTuple reframe(const LiftingInputTuple& T, const std::vector<PMat>& U) {
  if (!T.Hbar) throw ContractViolation("n = 1 tuples have no frame to change");
  auto off = offsets(T.E.ranks);
  std::vector<PMat> Ui;
  for (auto& u : U) {
    if (!lower_filtered(u, T.E.ranks)) throw ContractViolation("frame change does not preserve the filtration");
    if (graded_part(u, T.E.ranks) != PMat::identity(u.ring(), u.rows())) throw ContractViolation("frame change is not unipotent");
    Ui.push_back(inverse(u));
  }
  LiftingInputTuple out = make_lifting_tuple(T.E, FilteredConnection{change_frame(T.Hbar->H, Ui), T.E.ranks});
  out.user = T.user;
  out.frames.clear();
  for (std::size_t c = 0; c < U.size(); ++c) out.frames.push_back(T.frames[c] * U[c]);
  return out;
}

LiftingInputTuple reduce_tuple(const LiftingInputTuple& T) {
  const Ring& R = T.E.H.E.ring();
  const Ring& Rb = bar_ring(R);
  GradedHiggsBundle Eb = to_ring(T.E, Rb);
  if (Rb.m() == 1) return first_level_tuple(Eb);
  const Ring& Rbb = bar_ring(Rb);
  return make_lifting_tuple(Eb, FilteredConnection{to_ring(T.Hbar->H, Rbb), T.E.ranks});
}

PMat filtered_descend(const PMat& M, const std::vector<int>& ranks, const Ring& target) {
  auto g = grade_list(ranks);
  PMat out(target, M.rows(), M.cols());
  for (int i = 0; i < M.rows(); ++i)
    for (int j = 0; j < M.cols(); ++j) {
      if (M(i, j).is_zero()) continue;
      const int d = g[i] - g[j];
      if (d < 0) throw ContractViolation("map does not preserve the filtration");
      out(i, j) = M(i, j).to_ring(target).scale(target.p_pow(d));
    }
  return out;
}

// ---- the two constructions ------------------------------------------------------------------

FilteredConnection local_filtered_lifting(const LiftingInputTuple& T) {
  const GradedHiggsBundle& E = T.E;
  const Ring& R = E.H.E.ring();
  const Curve& C = E.curve();
  const int r = E.rank();
  if (T.Hbar && T.Hbar->H.E.rank() != r) throw NotFree("Hbar and E have different ranks");
  auto g = grade_list(E.ranks);
  FilteredConnection out{FlatBundle{E.H.E, {}}, E.ranks};
  for (int c = 0; c < C.charts(); ++c) {
    PMat A(R, r, r);
    PMat Ab = T.Hbar ? T.Hbar->H.A[c].to_ring(R) : PMat(R, r, r);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j) {
        if (g[i] == g[j] - 1)
          A(i, j) = E.H.theta[c](i, j);
        else if (g[i] >= g[j])
          A(i, j) = Ab(i, j);
      }
    out.H.A.push_back(A);
  }
  if (C.projective() && T.Hbar) {
    PMat G = T.Hbar->H.E.g.to_ring(R);
    auto off = offsets(E.ranks);
    for (std::size_t k = 0; k < E.ranks.size(); ++k)
      G.set_block(off[k], off[k], E.H.E.g.block(off[k], off[k], E.ranks[k], E.ranks[k]));
    out.H.E = Bundle(C, G);
  }
  return out;
}

TwistedFlatModule gn_construct(const FilteredConnection& H) {
  const Ring& R = H.H.E.ring();
  const Curve& C = H.H.E.curve;
  if (R.is_galois()) throw WrongModulus("twisted modules live over Z/p^n");
  if (H.level() > R.p() - 2) throw LevelTooHigh("filtration level " + std::to_string(H.level()) + " exceeds p - 2");
  int sum = 0;
  for (int k : H.ranks) sum += k;
  if (sum != H.H.E.rank()) throw NotFree("graded ranks do not add up to the rank");
  auto g = grade_list(H.ranks);
  std::vector<PMat> B;
  for (int c = 0; c < C.charts(); ++c) {
    int k = transversality_defect(H.H.A[c], H.ranks);
    if (k >= 0) throw TransversalityViolated(k, "connection is not transversal");
    B.push_back(twisted_matrix(H.H.A[c], H.H.A[c], g));
  }
  PMat G = C.projective() ? filtered_descend(H.H.E.g, H.ranks, R) : H.H.E.g;
  return TwistedFlatModule{PConnectionModule{Bundle(C, G), B, static_cast<int>(R.p()) - 3 + R.m()}, H.ranks, "gn",
                           std::make_shared<GnModel>(H.H.A, g)};
}

TwistedFlatModule sharp_construct(const LiftingInputTuple& T) {
  const GradedHiggsBundle& E = T.E;
  const Ring& R = E.H.E.ring();
  const Curve& C = E.curve();
  const int r = E.rank();
  if (E.weight() > R.p() - 2) throw LevelTooHigh("weight " + std::to_string(E.weight()) + " exceeds p - 2");
  auto g = grade_list(E.ranks);
  std::vector<PMat> B, Abar;
  for (int c = 0; c < C.charts(); ++c) {
    Abar.push_back(T.Hbar ? T.Hbar->H.A[c].to_ring(R) : PMat(R, r, r));
    B.push_back(twisted_matrix(Abar.back(), E.H.theta[c], g));
  }
  PMat G = E.H.E.g;
  if (C.projective() && T.Hbar) G = sharp_transition(E.H.E.g, T.Hbar->H.E.g, E.ranks);
  return TwistedFlatModule{PConnectionModule{Bundle(C, G), B, static_cast<int>(R.p()) - 3 + R.m()}, E.ranks, "sharp",
                           std::make_shared<SharpModel>(Abar, E.H.theta, g, R.m())};
}

// ---- equivalence and relations ---------------------------------------------------------------

Equivalence verify_equivalence(const TwistedFlatModule& from, const TwistedFlatModule& to, const std::vector<PMat>& lambda,
                               std::uint64_t seed, int samples) {
  Equivalence eq{lambda, false, false, false};
  const Curve& C = from.curve();
  const Ring& R = from.ring();
  if (static_cast<int>(lambda.size()) != C.charts()) return eq;
  eq.horizontal = eq.invertible = true;
  for (int c = 0; c < C.charts(); ++c) {
    const PMat& L = lambda[c];
    if (!C.in_chart_ring(L, c)) eq.horizontal = false;
    if (!(L.derivative().scale(R.p_pow(1)) + to.pconn.B[c] * L - L * from.pconn.B[c]).is_zero()) eq.horizontal = false;
    if (!unit_mod_p(det(L), kind_of(C))) eq.invertible = false;
  }
  if (C.projective() && lambda[1].swap_var() * from.pconn.E.g != to.pconn.E.g * lambda[0]) eq.horizontal = false;
  Rng rng(seed);
  auto [lo, hi] = window(C, 1);
  eq.gamma_compatible = true;
  for (int k = 0; k < samples && eq.gamma_compatible; ++k) {
    const int c = k % C.charts();
    const int m = k % 2;
    std::vector<Derivation> D;
    for (int i = 0; i < R.p() - 1 + m; ++i) D.push_back(random_poly(rng, R, lo, hi));
    PMat s(R, from.rank(), 1);
    for (int e = 0; e < from.rank(); ++e) s(e, 0) = random_poly(rng, R, lo, hi);
    if (lambda[c] * from.gamma(c, D, s) != to.gamma(c, D, lambda[c] * s)) eq.gamma_compatible = false;
  }
  return eq;
}

Equivalence equivalence_check(const TwistedFlatModule& gn, const TwistedFlatModule& sharp, int deg, std::uint64_t seed) {
  const Curve& C = sharp.curve();
  const Ring& R = sharp.ring();
  const int r = sharp.rank();
  if (gn.rank() != r || gn.ranks != sharp.ranks) return Equivalence{};
  auto g = sharp.grades();
  auto [lo, hi] = window(C, deg);
  std::vector<Unknown> unk;
  std::vector<std::pair<int, int>> dims;
  for (int c = 0; c < C.charts(); ++c) {
    dims.emplace_back(r, r);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j)
        if (g[i] != g[j])
          for (int e = lo; e <= hi; ++e) unk.push_back({c, i, j, e});
  }
  auto lam = [&](const std::vector<PMat>& X) {
    std::vector<PMat> L;
    for (auto& x : X) L.push_back(PMat::identity(R, r) + x);
    return L;
  };
  AffineMap F = [&](const std::vector<PMat>& X) {
    auto L = lam(X);
    std::vector<PMat> res;
    for (int c = 0; c < C.charts(); ++c)
      res.push_back(L[c].derivative().scale(R.p_pow(1)) + gn.pconn.B[c] * L[c] - L[c] * sharp.pconn.B[c]);
    if (C.projective()) res.push_back(L[1].swap_var() * sharp.pconn.E.g - gn.pconn.E.g * L[0]);
    return res;
  };
  auto X = solve_affine(R, dims, unk, F);
  if (!X) return Equivalence{};
  return verify_equivalence(sharp, gn, lam(*X), seed);
}

bool GammaReport::ok() const {
  int total = 0;
  for (int i = 0; i < 6; ++i) {
    if (failed[i]) return false;
    total += checked[i];
  }
  return total > 0;
}

GammaReport gamma_relations_check(const TwistedFlatModule& M, std::uint64_t seed, int samples) {
  GammaReport rep;
  const Ring& R = M.ring();
  const Curve& C = M.curve();
  const int p = static_cast<int>(R.p());
  const int r = M.rank();
  Rng rng(seed);
  auto [lo, hi] = window(C, 1);
  auto fn = [&] { return random_poly(rng, R, lo, hi); };
  auto ders = [&](int N) {
    std::vector<Derivation> D;
    for (int i = 0; i < N; ++i) D.push_back(fn());
    return D;
  };
  auto section = [&] {
    PMat s(R, r, 1);
    for (int e = 0; e < r; ++e) s(e, 0) = fn();
    return s;
  };
  auto record = [&](int rel, int c, int m, bool ok) {
    ++rep.checked[rel - 1];
    if (!ok) {
      ++rep.failed[rel - 1];
      if (rep.first_failure.empty())
        rep.first_failure = "relation " + std::to_string(rel) + " on chart " + std::to_string(c) + " with m = " + std::to_string(m);
    }
  };
  auto nabla_chain = [&](int c, const std::vector<Derivation>& D, PMat s) {
    for (int i = static_cast<int>(D.size()) - 1; i >= 0; --i) s = M.nabla(c, D[i], s);
    return s;
  };
  for (int k = 0; k < samples; ++k)
    for (int c = 0; c < C.charts(); ++c) {
      // (1) p^m gamma_m = nabla_{D_1} ... nabla_{D_{p-1+m}}
      for (int m = 0; m <= 2; ++m) {
        auto D = ders(p - 1 + m);
        PMat s = section();
        record(1, c, m, M.gamma(c, D, s).scale(R.p_pow(m)) == nabla_chain(c, D, s));
      }
      // (2) linearity in one slot
      for (int m = 0; m <= 1; ++m) {
        auto D = ders(p - 1 + m);
        const int i = static_cast<int>(rng() % D.size());
        const i64 a = random_elem(rng, R), b = random_elem(rng, R);
        Derivation D1 = fn(), D2 = fn();
        PMat s = section();
        auto Da = D, Db = D, Dab = D;
        Da[i] = D1;
        Db[i] = D2;
        Dab[i] = D1.scale(a) + D2.scale(b);
        record(2, c, m, M.gamma(c, Dab, s) == M.gamma(c, Da, s).scale(a) + M.gamma(c, Db, s).scale(b));
      }
      // (3) commutation with a function
      for (int m = 1; m <= 2; ++m) {
        const int N = p - 1 + m;
        auto D = ders(N);
        PMat s = section();
        LPoly f = fn();
        PMat rhs = M.gamma(c, D, s).scale(f);
        for (int i = 0; i + 1 < N; ++i) {
          std::vector<Derivation> E(D.begin(), D.begin() + i);
          E.push_back(apply_derivation(D[i], f) * D[i + 1]);
          E.insert(E.end(), D.begin() + i + 2, D.end());
          rhs = rhs + M.gamma(c, E, s);
        }
        std::vector<Derivation> E(D.begin(), D.end() - 1);
        rhs = rhs + M.gamma(c, E, s.scale(apply_derivation(D[N - 1], f)));
        record(3, c, m, M.gamma(c, D, s.scale(f)) == rhs);
      }
      // (4) swapping neighbours
      for (int m = 1; m <= 2; ++m) {
        const int N = p - 1 + m;
        auto D = ders(N);
        PMat s = section();
        const int i = static_cast<int>(rng() % (N - 1));
        auto S = D;
        std::swap(S[i], S[i + 1]);
        std::vector<Derivation> E(D.begin(), D.begin() + i);
        E.push_back(D[i] * D[i + 1].derivative() - D[i + 1] * D[i].derivative());
        E.insert(E.end(), D.begin() + i + 2, D.end());
        record(4, c, m, M.gamma(c, D, s) == M.gamma(c, S, s) + M.gamma(c, E, s));
      }
      // (5) gamma_{m1} gamma_{m2} = p^{p-1} gamma_{p-1+m1+m2}
      for (int m1 = 0; m1 <= 1; ++m1)
        for (int m2 = 0; m2 <= 1; ++m2) {
          const int N1 = p - 1 + m1, N2 = p - 1 + m2;
          auto D = ders(N1 + N2);
          PMat s = section();
          std::vector<Derivation> D1(D.begin(), D.begin() + N1), D2(D.begin() + N1, D.end());
          record(5, c, m1 + m2, M.gamma(c, D1, M.gamma(c, D2, s)) == M.gamma(c, D, s).scale(R.p_pow(p - 1)));
        }
      // (6) gamma_m(D_1..) nabla_{D_{p+m}} = nabla_{D_1} gamma_m(D_2..) = p gamma_{m+1}
      for (int m = 0; m <= 1; ++m) {
        const int N = p - 1 + m;
        auto D = ders(N + 1);
        PMat s = section();
        std::vector<Derivation> head(D.begin(), D.end() - 1), tail(D.begin() + 1, D.end());
        PMat a = M.gamma(c, head, M.nabla(c, D[N], s));
        PMat b = M.nabla(c, D[0], M.gamma(c, tail, s));
        PMat d = M.gamma(c, D, s).scale(R.p_pow(1));
        record(6, c, m, a == b && b == d);
      }
    }
  return rep;
}

// ---- F_n -----------------------------------------------------------------------------------

int taylor_bound(i64 p, int n) { return static_cast<int>(p - 1 + n * p); }

int taylor_coefficient_valuation(i64 p, int j) {
  return std::max(0, j + 1 - static_cast<int>(p)) - vp_factorial(p, j);
}

PMat taylor_transition(const TwistedFlatModule& M, int chart, const LPoly& Fb, const LPoly& Fb_inv, const LPoly& z,
                       const FnOptions& opt) {
  const Ring& R = M.ring();
  const int p = static_cast<int>(R.p());
  const int n = R.m();
  const int r = M.rank();
  const int bound = opt.bound >= 0 ? opt.bound : taylor_bound(p, n);
  const int last = bound + std::max(opt.extra, p);
  const LPoly one = LPoly::constant(R, 1);
  PMat T(R, r, r);
  for (int e = 0; e < r; ++e) {
    const PMat s = unit_column(R, r, e);
    PMat v = s;
    LPoly zj = one;
    PMat col(R, r, 1);
    for (int j = 0; j <= last; ++j) {
      if (j > 0) zj = zj * z;
      const int val = taylor_coefficient_valuation(p, j);
      if (val < n) {
        PMat w = j < p - 1 ? v : M.gamma(chart, std::vector<Derivation>(j, one), s);
        const i64 cj = R.mul(R.p_pow(val), factorial_unit_inverse(R, j));
        PMat term = compose_laurent(w, Fb, Fb_inv).scale(cj).scale(zj);
        if (j <= bound)
          col = col + term;
        else if (!term.is_zero())
          throw TruncationBoundExceeded("Taylor term of degree " + std::to_string(j) + " survives past the bound " +
                                        std::to_string(bound));
      }
      if (j + 1 < p - 1) v = M.nabla(chart, one, v);
    }
    T.set_block(0, e, col);
  }
  return T;
}

namespace {
void check_atlas(const TwistedFlatModule& M, const LiftingAtlas& atlas) {
  const Ring& R = M.ring();
  const Curve& C = M.curve();
  if (atlas.curve.kind != C.kind || static_cast<int>(atlas.lifts.size()) != C.charts())
    throw ContractViolation("atlas does not match the curve");
  const Ring& L = atlas.lift_ring();
  if (L.is_galois() || L.p() != R.p() || L.m() != R.m() + 1)
    throw WrongModulus("liftings must live over Z/p^" + std::to_string(R.m() + 1));
}
}  // namespace

FlatBundle fn_apply(const TwistedFlatModule& M, const LiftingAtlas& atlas, const FnOptions& opt) {
  check_atlas(M, atlas);
  const Ring& R = M.ring();
  const Curve& C = M.curve();
  std::vector<PMat> A;
  for (int c = 0; c < C.charts(); ++c) {
    const LPoly& F = atlas.lifts[c].image;
    A.push_back(compose_laurent(M.pconn.B[c], F, invert_lifting(F)).scale(dF_over_p(F, R)));
  }
  if (!C.projective()) return FlatBundle{Bundle::trivial(C, M.rank()), A};
  const LPoly F1 = lifting_in_t(atlas, 1);
  const LPoly F1inv = invert_lifting(F1);
  const LPoly z = lifting_difference_z(lifting_in_t(atlas, 0), F1, R);
  PMat T = compose_laurent(M.pconn.E.g, F1, F1inv) * taylor_transition(M, 0, F1, F1inv, z, opt);
  return FlatBundle{Bundle(C, T), A};
}

std::vector<PMat> fn_atlas_change(const TwistedFlatModule& M, const LiftingAtlas& a, const LiftingAtlas& b,
                                  const FnOptions& opt) {
  check_atlas(M, a);
  check_atlas(M, b);
  std::vector<PMat> out;
  for (int c = 0; c < M.curve().charts(); ++c) {
    const LPoly& Fb = b.lifts[c].image;
    LPoly z = lifting_difference_z(a.lifts[c].image, Fb, M.ring());
    out.push_back(taylor_transition(M, c, Fb, invert_lifting(Fb), z, opt));
  }
  return out;
}

FlatBundle cn_inverse(const LiftingInputTuple& T, const LiftingAtlas& atlas) { return fn_apply(sharp_construct(T), atlas); }

LiftingAtlas reduce_atlas(const LiftingAtlas& A) {
  const Ring& R = A.curve.ring();
  LiftingAtlas out{A.curve.with_ring(bar_ring(R)), {}};
  for (auto& F : A.lifts) out.lifts.push_back(FrobeniusLifting{F.chart, F.image.to_ring(R)});
  return out;
}

ReductionReport mod_reduction_check(const LiftingInputTuple& T, const LiftingAtlas& atlas) {
  const Ring& R = T.E.H.E.ring();
  const Ring& Rb = bar_ring(R);
  FlatBundle H = cn_inverse(T, atlas);
  FlatBundle red = to_ring(H, Rb);
  LiftingAtlas ra = reduce_atlas(atlas);
  FlatBundle prev = Rb.m() == 1 ? inverse_cartier_1(to_ring(T.E.H, Rb), ra) : cn_inverse(reduce_tuple(T), ra);
  std::vector<PMat> iso;
  for (int c = 0; c < H.E.curve.charts(); ++c) iso.push_back(PMat::identity(Rb, H.E.rank()));
  bool ok = verify_flat_iso(red, prev, iso);
  return ReductionReport{red, prev, iso, ok};
}

// ---- flows over Z/p^n -------------------------------------------------------------------------

std::vector<PMat> lifted_adapted_frames(const FlatBundle& H, const HodgeFiltration& fil) {
  const Ring& Fp = Ring::zmod(H.E.ring().p(), 1);
  HodgeFiltration fb = reduce_fil(fil, Fp);
  Grading gb = grade_with_frames(DeRhamBundle{to_ring(H, Fp), fb});
  return lift_frames(H, fil, gb.frames, gb.G.ranks);
}

WittStep w2_flow_step(const LiftingInputTuple& T, const HodgeFiltration& fil, const HodgeFiltration& filbar,
                      const LiftingAtlas& atlas, int psi_degree) {
  if (T.n() != 2) throw ContractViolation("w2_flow_step works over Z/p^2");
  const Ring& R = T.E.H.E.ring();
  const Ring& Fp = Ring::zmod(R.p(), 1);
  FlatBundle H = cn_inverse(T, atlas);
  const Curve& C = H.E.curve;
  if (fil.level() != filbar.level())
    throw NoLiftedFiltration("lifted filtration has " + std::to_string(fil.level()) + " steps, the mod p one " +
                             std::to_string(filbar.level()));
  HodgeFiltration red = reduce_fil(fil, Fp);
  for (int i = 0; i < fil.level(); ++i) {
    if (static_cast<int>(fil.steps[i].gens.size()) != C.charts())
      throw NoLiftedFiltration("step " + std::to_string(i + 1) + " is missing charts");
    if (!same_subbundle(red.steps[i], filbar.steps[i]))
      throw NoLiftedFiltration("step " + std::to_string(i + 1) + " does not reduce to the mod p filtration");
  }
  FlatBundle Hb = to_ring(H, Fp);
  Grading gb = grade_with_frames(DeRhamBundle{Hb, filbar});
  const auto& ranks = gb.G.ranks;
  auto frames = lift_frames(H, fil, gb.frames, ranks);
  WittStep out{H, frames, grade_in_frames(H, frames, ranks), std::nullopt};
  if (!higgs_charts_compatible(out.next.H)) throw ContractViolation("graded Higgs field is not chart compatible");

  // psi lifting the tuple's identification, when the tuple's Hbar is this H mod p
  if (!T.user || ranks != T.E.ranks) return out;
  if (Hb.A != T.user->V.A || (C.projective() && Hb.E.g != T.user->V.E.g) || !same_filtration(filbar, T.user->fil))
    return out;
  const int r = H.E.rank();
  std::vector<PMat> target;
  for (int c = 0; c < C.charts(); ++c) target.push_back(graded_part(inverse(T.frames[c]) * gb.frames[c], ranks).to_ring(R));
  auto g = grade_list(ranks);
  auto [lo, hi] = window(C, psi_degree);
  std::vector<Unknown> unk;
  std::vector<std::pair<int, int>> dims;
  for (int c = 0; c < C.charts(); ++c) {
    dims.emplace_back(r, r);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j)
        if (g[i] == g[j])
          for (int e = lo; e <= hi; ++e) unk.push_back({c, i, j, e});
  }
  const GradedHiggsBundle& N = out.next;
  auto psi_of = [&](const std::vector<PMat>& X) {
    std::vector<PMat> P;
    for (int c = 0; c < C.charts(); ++c) P.push_back(target[c] + X[c].to_ring(R).scale(R.p_pow(1)));
    return P;
  };
  auto residual = [&](const std::vector<PMat>& P) {
    std::vector<PMat> res;
    for (int c = 0; c < C.charts(); ++c) res.push_back(P[c] * N.H.theta[c] - T.E.H.theta[c] * P[c]);
    if (C.projective()) res.push_back(P[1].swap_var() * N.H.E.g - T.E.H.E.g * P[0]);
    return res;
  };
  for (auto& x : residual(target))
    if (!x.is_zero() && x.min_val() < 1) return out;
  AffineMap F = [&](const std::vector<PMat>& X) {
    std::vector<PMat> res;
    for (auto& x : residual(psi_of(X))) res.push_back(div_p_matrix(x, Fp));
    return res;
  };
  auto X = solve_affine(Fp, dims, unk, F);
  if (!X) return out;
  auto psi = psi_of(*X);
  if (verify_graded_iso(N, T.E, psi)) out.psi = psi;
  return out;
}

LiftDifference lift_difference(const FlatBundle& H, const HodgeFiltration& A, const HodgeFiltration& B) {
  const Ring& R = H.E.ring();
  const Ring& Fp = Ring::zmod(R.p(), 1);
  if (R.m() != 2) throw ContractViolation("lift_difference works over Z/p^2");
  if (A.level() != 1 || B.level() != 1) throw ContractViolation("lift_difference compares level-one filtrations");
  HodgeFiltration fa = reduce_fil(A, Fp), fbr = reduce_fil(B, Fp);
  if (!same_subbundle(fa.steps[0], fbr.steps[0])) throw NoLiftedFiltration("the filtrations differ mod p");
  Grading gb = grade_with_frames(DeRhamBundle{to_ring(H, Fp), fa});
  const auto& ranks = gb.G.ranks;
  auto BA = lift_frames(H, A, gb.frames, ranks);
  auto BB = lift_frames(H, B, gb.frames, ranks);
  const int r = H.E.rank();
  LiftDifference out{gb.G, {}, true, true, true};
  for (std::size_t c = 0; c < BA.size(); ++c) {
    PMat M = inverse(BB[c]) * BA[c];
    PMat blk = M.block(0, ranks[0], ranks[0], ranks[1]);
    PMat f(Fp, r, r);
    f.set_block(0, ranks[0], div_p_matrix(blk, Fp));
    if (!f.is_zero()) out.zero = false;
    if (f * gb.G.H.theta[c] != gb.G.H.theta[c] * f) out.higgs_morphism = false;
    if (!(f * f).is_zero()) out.nilpotent = false;
    out.endo.push_back(f);
  }
  if (H.E.curve.projective() && out.endo[1].swap_var() * gb.G.H.E.g != gb.G.H.E.g * out.endo[0]) out.higgs_morphism = false;
  return out;
}

}  // namespace hdf
