#include "hdf/generate.hpp"

#include <algorithm>

#include "hdf/errors.hpp"

namespace hdf {

i64 random_elem(Rng& g, const Ring& R) { return std::uniform_int_distribution<i64>(0, R.size() - 1)(g); }

i64 random_unit(Rng& g, const Ring& R) {
  for (;;) {
    i64 u = random_elem(g, R);
    if (R.is_unit(u)) return u;
  }
}

LPoly random_poly(Rng& g, const Ring& R, int lo, int hi) {
  std::map<int, i64> t;
  for (int e = lo; e <= hi; ++e) t[e] = random_elem(g, R);
  return LPoly::from_map(R, t);
}

PMat random_unimodular(Rng& g, const Ring& R, int n, int steps, int deg) {
  PMat M = PMat::identity(R, n);
  if (n == 0) return M;
  for (int i = 0; i < n; ++i) M(i, i) = LPoly::constant(R, random_unit(g, R));
  std::uniform_int_distribution<int> idx(0, n - 1);
  for (int s = 0; s < steps; ++s) {
    int i = idx(g), j = idx(g);
    if (i == j) continue;
    PMat E = PMat::identity(R, n);
    E(i, j) = random_poly(g, R, 0, deg);
    M = E * M;
  }
  return M;
}

GradedHiggsBundle random_split_graded(Rng& g, const Curve& C, const std::vector<std::vector<int>>& exps,
                                      double density, int affine_degree) {
  const Ring& R = C.ring();
  std::vector<int> ranks, all;
  for (auto& e : exps) {
    ranks.push_back(static_cast<int>(e.size()));
    all.insert(all.end(), e.begin(), e.end());
  }
  Bundle E = Bundle::split(C, all);
  const int r = static_cast<int>(all.size());
  PMat Th(R, r, r);
  std::bernoulli_distribution keep(density);
  std::vector<int> off(exps.size() + 1, 0);
  for (std::size_t i = 0; i < exps.size(); ++i) off[i + 1] = off[i] + ranks[i];
  for (std::size_t i = 1; i < exps.size(); ++i)
    for (int a = 0; a < ranks[i - 1]; ++a)
      for (int b = 0; b < ranks[i]; ++b) {
        if (!keep(g)) continue;
        // O(exps[i][b]) -> O(exps[i-1][a]) (x) Omega
        int hi = C.projective() ? exps[i - 1][a] - exps[i][b] - 2 : affine_degree;
        int lo = (C.kind == CurveKind::Torus) ? -affine_degree : 0;
        if (hi < lo) continue;
        Th(off[i - 1] + a, off[i] + b) = random_poly(g, R, lo, hi);
      }
  return make_graded(E, ranks, Th);
}

GradedHiggsBundle scramble(Rng& g, const GradedHiggsBundle& G, int steps, int deg) {
  const Ring& R = G.H.E.ring();
  const int r = G.rank();
  std::vector<PMat> M(G.curve().charts(), PMat(R, r, r));
  for (int i = 0; i <= G.weight(); ++i) {
    int o = G.offset(i), n = G.ranks[i];
    for (auto& m : M) m.set_block(o, o, random_unimodular(g, R, n, steps, deg));
  }
  return {change_frame(G.H, M), G.ranks};
}

GradedHiggsBundle random_graded(Rng& g, const CorpusParams& P) {
  if (P.weight > P.p - 2) throw ContractViolation("weight exceeds p-2");
  if (P.rank < 1 || P.rank > 4) throw ContractViolation("rank must be in 1..4");
  if (P.weight + 1 > P.rank) throw ContractViolation("weight too large for the rank");
  const Ring& R = Ring::zmod(P.p, 1);
  Curve C = Curve::projective(R);
  // distribute the rank over grades, each grade nonempty
  std::vector<int> ranks(P.weight + 1, 1);
  for (int k = P.weight + 1; k < P.rank; ++k) ranks[std::uniform_int_distribution<int>(0, P.weight)(g)]++;
  std::uniform_int_distribution<int> ex(-P.max_exp, P.max_exp);
  for (int attempt = 0;; ++attempt) {
    std::vector<std::vector<int>> exps;
    int total = 0;
    for (int x : ranks) {
      std::vector<int> e(x);
      for (auto& v : e) {
        v = ex(g);
        total += v;
      }
      std::sort(e.rbegin(), e.rend());
      exps.push_back(e);
    }
    if (P.degree_zero && total != 0 && attempt < 1000) continue;
    if (P.degree_zero && total != 0) {
      // fix up the last exponent
      exps.back().back() -= total;
      std::sort(exps.back().rbegin(), exps.back().rend());
    }
    auto G = random_split_graded(g, C, exps, P.density);
    return scramble(g, G);
  }
}

}  // namespace hdf
