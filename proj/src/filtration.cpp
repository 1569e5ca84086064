#include "hdf/filtration.hpp"

#include <climits>
#include <functional>
#include <map>
#include <set>

#include "hdf/errors.hpp"
#include "hdf/linalg.hpp"

namespace hdf {

namespace {

void require_p1(const Curve& C, const char* what) {
  if (!C.projective()) throw ContractViolation(std::string(what) + " needs the projective line");
  require_field(C.ring(), what);
}

// coordinates (j, e) of H^0(O(a_1) + ... + O(a_n) twisted by -d): x_j of degree <= a_j - d
std::vector<std::pair<int, int>> section_coords(const std::vector<int>& a, int d) {
  std::vector<std::pair<int, int>> idx;
  for (int j = 0; j < static_cast<int>(a.size()); ++j)
    for (int e = 0; e <= a[j] - d; ++e) idx.push_back({j, e});
  return idx;
}

PMat section_column(const Ring& R, int n, const std::vector<std::pair<int, int>>& idx, const std::vector<i64>& c) {
  std::vector<std::map<int, i64>> terms(n);
  for (std::size_t k = 0; k < idx.size(); ++k)
    if (c[k]) terms[idx[k].first][idx[k].second] = c[k];
  PMat x(R, n, 1);
  for (int j = 0; j < n; ++j) x(j, 0) = LPoly::from_map(R, terms[j]);
  return x;
}

// basis of {x : (deriv ? x' : 0) + M x = 0} among sections of E(-d), E split with exponents a
std::vector<PMat> section_kernel(const Ring& R, const std::vector<int>& a, int d, const PMat* M, bool deriv) {
  const int n = static_cast<int>(a.size());
  auto idx = section_coords(a, d);
  std::vector<PMat> out;
  if (idx.empty()) return out;
  std::map<std::pair<int, int>, int> rows;
  std::vector<std::tuple<int, int, i64>> entries;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    auto [j, e] = idx[k];
    PMat x(R, n, 1);
    x(j, 0) = LPoly::monomial(R, 1, e);
    PMat y = M ? (*M) * x : PMat(R, 0, 1);
    if (deriv) y = y.rows() ? y + x.derivative() : x.derivative();
    for (int i = 0; i < y.rows(); ++i) {
      const LPoly& f = y(i, 0);
      if (f.is_zero()) continue;
      for (int q = f.lo(); q <= f.hi(); ++q) {
        i64 v = f.coeff(q);
        if (!v) continue;
        auto key = std::make_pair(i, q);
        auto it = rows.find(key);
        int r = it == rows.end() ? (rows[key] = static_cast<int>(rows.size())) : it->second;
        entries.push_back({r, static_cast<int>(k), v});
      }
    }
  }
  if (rows.empty()) {
    for (std::size_t k = 0; k < idx.size(); ++k) {
      std::vector<i64> c(idx.size(), 0);
      c[k] = 1;
      out.push_back(section_column(R, n, idx, c));
    }
    return out;
  }
  SMat A(R, static_cast<int>(rows.size()), static_cast<int>(idx.size()));
  for (auto& [r, c, v] : entries) A(r, c) = R.add(A(r, c), v);
  auto sol = solve_linear_mod(A, std::vector<i64>(A.rows(), 0));
  for (auto& v : sol.kernel) out.push_back(section_column(R, n, idx, v));
  return out;
}

PMat hcat_all(const Ring& R, int n, const std::vector<PMat>& cols) {
  PMat M(R, n, 0);
  for (auto& c : cols) M = PMat::hcat(M, c);
  return M;
}

Subbundle graded_sum(const GradedHiggsBundle& G, const std::vector<Subbundle>& pieces) {
  const Ring& R = G.H.E.ring();
  int rho = 0;
  for (auto& s : pieces) rho += s.rank();
  Subbundle I;
  for (int c = 0; c < G.curve().charts(); ++c) {
    PMat M(R, G.rank(), rho);
    int col = 0;
    for (int i = 0; i <= G.weight(); ++i) {
      if (pieces[i].rank() == 0) continue;
      M.set_block(G.offset(i), col, pieces[i].gens[c]);
      col += pieces[i].rank();
    }
    I.gens.push_back(M);
  }
  return I;
}

DestabilizerReport graded_report(const GradedHiggsBundle& G, std::vector<Subbundle> pieces) {
  DestabilizerReport rep;
  rep.I = graded_sum(G, pieces);
  for (int i = 0; i <= G.weight(); ++i) {
    int deg = pieces[i].rank() ? degree(G.piece(i), pieces[i]) : 0;
    rep.ranks.push_back(pieces[i].rank());
    rep.degrees.push_back(deg);
    rep.degree += deg;
  }
  rep.pieces = std::move(pieces);
  rep.r_max = rep.I.rank();
  if (rep.r_max == 0) throw ContractViolation("empty destabilizer");
  rep.mu_max = Rational(rep.degree, rep.r_max);
  rep.semistable = rep.r_max == G.rank();
  return rep;
}

DestabilizerReport flat_report(const FlatBundle& V, const Subbundle& S) {
  DestabilizerReport rep;
  rep.I = S;
  rep.pieces = {S};
  rep.r_max = S.rank();
  rep.degree = degree(V.E, S);
  rep.ranks = {rep.r_max};
  rep.degrees = {rep.degree};
  rep.mu_max = Rational(rep.degree, rep.r_max);
  rep.semistable = rep.r_max == V.E.rank();
  return rep;
}

bool lex_greater(const Rational& mu, int r, const Rational& mu0, int r0) { return mu > mu0 || (mu == mu0 && r > r0); }

// all saturated subbundles (zero included) whose line summands have degree >= dmin
std::vector<Subbundle> saturated_subbundles(const Bundle& E, int dmin, long long& budget) {
  const Ring& R = E.ring();
  const int n = E.rank();
  std::vector<Subbundle> out{zero_subbundle(E)};
  if (n == 0) return out;
  auto nz = normalize(E);
  PMat Pinv = inverse(nz.frames[0]);
  std::set<std::string> seen{out[0].gens[0].str()};
  std::vector<Subbundle> lines;
  const i64 q = R.size();
  for (int d = nz.a.front(); d >= dmin; --d) {
    auto idx = section_coords(nz.a, d);
    const int D = static_cast<int>(idx.size());
    // projective points: leading nonzero coordinate equal to 1
    for (int lead = 0; lead < D; ++lead) {
      std::vector<i64> c(D, 0);
      c[lead] = 1;
      for (;;) {
        if (--budget < 0) throw SearchBudgetExceeded("line maps in degree " + std::to_string(d));
        auto L = saturate(E, Pinv * section_column(R, n, idx, c));
        if (seen.insert(L.gens[0].str()).second) {
          lines.push_back(L);
          out.push_back(L);
        }
        int k = lead + 1;
        while (k < D && ++c[k] == q) c[k++] = 0;
        if (k == D) break;
      }
    }
  }
  for (std::size_t s = 1; s < out.size(); ++s) {
    if (out[s].rank() == n) continue;
    for (auto& L : lines) {
      if (--budget < 0) throw SearchBudgetExceeded("saturated sums");
      if (contains(out[s], L)) continue;
      auto T = sum(E, out[s], L);
      if (seen.insert(T.gens[0].str()).second) out.push_back(T);
    }
  }
  return out;
}

}  // namespace

int piece_degree(const GradedHiggsBundle& G, int i) { return G.ranks[i] ? degree(G.piece(i)) : 0; }

DestabilizerReport higgs_destabilizer(const GradedHiggsBundle& G) {
  require_p1(G.curve(), "Higgs semistability");
  const Ring& R = G.H.E.ring();
  const int w = G.weight();
  std::vector<Normalization> nz(w + 1);
  std::vector<PMat> Pinv(w + 1, PMat(R, 0, 0));
  int top = INT_MIN, bot = INT_MAX;
  for (int i = 0; i <= w; ++i) {
    if (!G.ranks[i]) continue;
    nz[i] = normalize(G.piece(i));
    Pinv[i] = inverse(nz[i].frames[0]);
    top = std::max(top, nz[i].a.front());
    bot = std::min(bot, nz[i].a.back());
  }
  std::vector<PMat> Th(w + 1, PMat(R, 0, 0));
  for (int i = 1; i <= w; ++i)
    if (G.ranks[i] && G.ranks[i - 1]) Th[i] = nz[i - 1].frames[0] * G.theta_block(0, i) * Pinv[i];
  for (int d = top; d >= bot; --d) {
    std::vector<std::vector<PMat>> K(w + 1);
    bool any = false;
    for (int i = 0; i <= w; ++i) {
      if (!G.ranks[i]) continue;
      bool free = i == 0 || !G.ranks[i - 1];
      K[i] = section_kernel(R, nz[i].a, d, free ? nullptr : &Th[i], false);
      any = any || !K[i].empty();
    }
    if (!any) continue;
    std::vector<Subbundle> pieces;
    for (int i = 0; i <= w; ++i) {
      Bundle Ei = G.piece(i);
      pieces.push_back(K[i].empty() ? zero_subbundle(Ei) : saturate(Ei, Pinv[i] * hcat_all(R, G.ranks[i], K[i])));
    }
    return graded_report(G, std::move(pieces));
  }
  throw ContractViolation("no theta-killed section found");
}

DestabilizerReport nabla_destabilizer(const FlatBundle& V) {
  require_p1(V.E.curve, "nabla semistability");
  const Ring& R = V.E.ring();
  auto nz = normalize(V.E);
  PMat Pinv = inverse(nz.frames[0]);
  PMat A = gauge(V.A[0], nz.frames[0], Pinv);
  for (int d = nz.a.front(); d >= nz.a.back(); --d) {
    auto K = section_kernel(R, nz.a, d, &A, true);
    if (K.empty()) continue;
    return flat_report(V, saturate(V.E, Pinv * hcat_all(R, V.E.rank(), K)));
  }
  throw ContractViolation("no horizontal section found");
}

SemistabilityResult is_higgs_semistable(const GradedHiggsBundle& G) {
  auto rep = higgs_destabilizer(G);
  return {rep.semistable, rep};
}

SemistabilityResult is_nabla_semistable(const FlatBundle& V) {
  auto rep = nabla_destabilizer(V);
  return {rep.semistable, rep};
}

DestabilizerReport max_destabilizer_graded(const GradedHiggsBundle& G) {
  auto rep = higgs_destabilizer(G);
  if (rep.semistable) throw SemistableInput("graded Higgs bundle is semistable");
  return rep;
}

DestabilizerReport destabilizer_by_enumeration(const GradedHiggsBundle& G, const EnumBounds& b) {
  require_p1(G.curve(), "destabilizer enumeration");
  const int w = G.weight();
  long long budget = b.budget;
  std::vector<std::vector<Subbundle>> cand(w + 1);
  std::vector<std::vector<int>> degs(w + 1);
  for (int i = 0; i <= w; ++i) {
    Bundle Ei = G.piece(i);
    cand[i] = saturated_subbundles(Ei, b.min_degree, budget);
    for (auto& s : cand[i]) degs[i].push_back(s.rank() ? degree(Ei, s) : 0);
  }
  // theta(S_i) inside S_{i-1}
  auto compatible = [&](int i, const Subbundle& Si, const Subbundle& Sl) {
    if (Si.rank() == 0) return true;
    PMat img = G.theta_block(0, i) * Si.gens[0];
    if (img.is_zero()) return true;
    if (Sl.rank() == 0) return false;
    if (Sl.rank() == G.ranks[i - 1]) return true;
    return (split_chart(Sl.gens[0], CurveKind::AffineLine).K * img).is_zero();
  };
  std::vector<int> choice(w + 1, 0), best;
  Rational best_mu;
  int best_r = 0;
  std::function<void(int, int, int)> dfs = [&](int i, int deg, int rk) {
    if (--budget < 0) throw SearchBudgetExceeded("graded candidates");
    if (i < 0) {
      if (rk == 0) return;
      Rational mu(deg, rk);
      if (best.empty() || lex_greater(mu, rk, best_mu, best_r)) {
        best = choice;
        best_mu = mu;
        best_r = rk;
      }
      return;
    }
    for (std::size_t k = 0; k < cand[i].size(); ++k) {
      if (i < w && !compatible(i + 1, cand[i + 1][choice[i + 1]], cand[i][k])) continue;
      choice[i] = static_cast<int>(k);
      dfs(i - 1, deg + degs[i][k], rk + cand[i][k].rank());
    }
  };
  dfs(w, 0, 0);
  std::vector<Subbundle> pieces;
  for (int i = 0; i <= w; ++i) pieces.push_back(cand[i][best[i]]);
  return graded_report(G, std::move(pieces));
}

DestabilizerReport nabla_destabilizer_by_enumeration(const FlatBundle& V, const EnumBounds& b) {
  require_p1(V.E.curve, "destabilizer enumeration");
  long long budget = b.budget;
  auto cand = saturated_subbundles(V.E, b.min_degree, budget);
  const Subbundle* best = nullptr;
  Rational best_mu;
  int best_r = 0;
  for (auto& s : cand) {
    if (s.rank() == 0 || !is_invariant(V, s)) continue;
    Rational mu = slope(V.E, s);
    if (!best || lex_greater(mu, s.rank(), best_mu, best_r)) {
      best = &s;
      best_mu = mu;
      best_r = s.rank();
    }
  }
  return flat_report(V, *best);
}

DestabilizerReport destabilizer_heuristic(const GradedHiggsBundle& G) {
  require_p1(G.curve(), "destabilizer heuristic");
  const Ring& R = G.H.E.ring();
  const int w = G.weight();
  std::vector<HNFiltration> hn(w + 1);
  std::set<Rational> thresholds;
  for (int i = 0; i <= w; ++i) {
    if (!G.ranks[i]) continue;
    hn[i] = hn_filtration(G.piece(i));
    thresholds.insert(hn[i].slopes.begin(), hn[i].slopes.end());
  }
  std::optional<DestabilizerReport> best;
  for (auto it = thresholds.rbegin(); it != thresholds.rend(); ++it) {
    std::vector<Subbundle> J(w + 1);
    for (int i = 0; i <= w; ++i) {
      Bundle Ei = G.piece(i);
      if (!G.ranks[i]) {
        J[i] = zero_subbundle(Ei);
        continue;
      }
      std::size_t k = 0;
      while (k < hn[i].slopes.size() && hn[i].slopes[k] >= *it) ++k;
      J[i] = k == 0 ? zero_subbundle(Ei) : k == hn[i].slopes.size() ? whole_subbundle(Ei) : hn[i].flag[k - 1];
    }
    for (int i = w; i >= 1; --i) {
      if (J[i].rank() == 0 || !G.ranks[i - 1]) continue;
      PMat img = G.theta_block(0, i) * J[i].gens[0];
      if (img.is_zero()) continue;
      J[i - 1] = saturate(G.piece(i - 1), PMat::hcat(J[i - 1].rank() ? J[i - 1].gens[0] : PMat(R, G.ranks[i - 1], 0), img));
    }
    int rk = 0;
    for (auto& s : J) rk += s.rank();
    if (!rk) continue;
    auto rep = graded_report(G, J);
    if (!best || lex_greater(rep.mu_max, rep.r_max, best->mu_max, best->r_max)) best = rep;
  }
  return *best;
}

// ---- xi --------------------------------------------------------------------------------

namespace {

XiStep xi_from(const DeRhamBundle& D, const Grading& gr, const DestabilizerReport& I) {
  const Bundle& E = D.V.E;
  const Ring& R = E.ring();
  const int r = E.rank(), n = D.fil.level();
  const GradedHiggsBundle& G = gr.G;
  XiStep out(G);
  out.I = I;
  for (int i = 0; i <= n; ++i) {
    PMat gens = i + 1 <= n ? D.fil.steps[i].gens[0] : PMat(R, r, 0);
    if (G.ranks[i] && I.pieces[i].rank())
      gens = PMat::hcat(gens, gr.frames[0].cols_range(G.offset(i), G.ranks[i]) * I.pieces[i].gens[0]);
    out.fil.steps.push_back(gens.cols() == 0 || gens.is_zero() ? zero_subbundle(E) : saturate(E, gens));
  }
  DeRhamBundle nd{D.V, out.fil};
  out.transversal = is_transversal(nd);
  if (!out.transversal) return out;
  out.after = grade(nd);
  out.exact_sequence = true;
  for (int i = 0; i <= n + 1; ++i) {
    int rk = (i <= n ? G.ranks[i] - I.ranks[i] : 0) + (i >= 1 ? I.ranks[i - 1] : 0);
    int dg = (i <= n ? piece_degree(G, i) - I.degrees[i] : 0) + (i >= 1 ? I.degrees[i - 1] : 0);
    if (out.after.ranks[i] != rk || piece_degree(out.after, i) != dg) out.exact_sequence = false;
  }
  return out;
}

int reduced_level(const DeRhamBundle& D) { return reduce_filtration(D).fil.level(); }

}  // namespace

XiStep xi_step(const DeRhamBundle& D) {
  require_p1(D.V.E.curve, "xi step");
  Grading gr = grade_with_frames(D);
  auto I = higgs_destabilizer(gr.G);
  if (I.semistable) throw SemistableInput("grading is already semistable");
  return xi_from(D, gr, I);
}

SimpsonResult xi_iterate(const FlatBundle& V, const HodgeFiltration& start, int max_iter) {
  require_p1(V.E.curve, "xi iteration");
  auto ns = is_nabla_semistable(V);
  if (!ns.semistable)
    throw NotNablaSemistable("invariant subbundle of rank " + std::to_string(ns.witness.r_max) + " and slope " +
                             std::to_string(ns.witness.mu_max.numerator()) + "/" +
                             std::to_string(ns.witness.mu_max.denominator()));
  DeRhamBundle D{V, start};
  SimpsonResult res(grade(D));
  const Rational muV = slope(V.E);
  for (int k = 0;; ++k) {
    Grading gr = grade_with_frames(D);
    auto I = higgs_destabilizer(gr.G);
    res.log.push_back({k, D.fil.level(), reduced_level(D), I.mu_max, I.r_max, I.semistable, 0});
    if (I.semistable) break;
    if (k >= max_iter) {
      std::string trail;
      for (auto& e : res.log)
        trail += "(" + std::to_string(e.mu_max.numerator()) + "/" + std::to_string(e.mu_max.denominator()) + "," +
                 std::to_string(e.r_max) + ")";
      throw IterationBudgetExceeded("xi iteration did not terminate in " + std::to_string(max_iter) + " steps: " + trail);
    }
    auto st = xi_from(D, gr, I);
    if (!st.transversal) {
      res.cert.transversal = false;
      res.cert.detail += "xi step " + std::to_string(k) + " broke transversality; ";
      throw ContractViolation("xi step produced a non-transversal filtration");
    }
    if (!st.exact_sequence) {
      res.cert.exact_sequences = false;
      res.cert.detail += "exact sequence bookkeeping failed at step " + std::to_string(k) + "; ";
    }
    D.fil = st.fil;
  }
  res.iterations = static_cast<int>(res.log.size()) - 1;
  auto& L = res.log;
  for (std::size_t k = 0; k + 1 < L.size(); ++k)
    if (lex_greater(L[k + 1].mu_max, L[k + 1].r_max, L[k].mu_max, L[k].r_max)) {
      res.cert.monotone = false;
      res.cert.detail += "increase at step " + std::to_string(k + 1) + "; ";
    }
  for (std::size_t k = 0; k < L.size(); ++k) {
    if (L[k].semistable) continue;
    std::size_t j = k + 1;
    while (j < L.size() && !lex_greater(L[k].mu_max, L[k].r_max, L[j].mu_max, L[j].r_max)) ++j;
    L[k].window = static_cast<int>(j - k);
    if (j == L.size() || static_cast<int>(j - k) > std::max(L[k].level, 1)) {
      res.cert.window_descent = false;
      res.cert.detail += "no strict descent within the window after step " + std::to_string(k) + "; ";
    }
  }
  if (L.back().mu_max != muV) res.cert.detail += "terminal slope differs from the slope of V; ";
  res.raw = D.fil;
  DeRhamBundle red = reduce_filtration(D);
  res.fil = red.fil;
  res.graded = grade(red);
  res.cert.terminal_semistable = is_higgs_semistable(res.graded).semistable && L.back().mu_max == muV;
  return res;
}

SimpsonResult simpson_filtration(const FlatBundle& V, int max_iter) { return xi_iterate(V, trivial_filtration(), max_iter); }

}  // namespace hdf
