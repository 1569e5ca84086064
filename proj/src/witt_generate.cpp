#include "hdf/witt_generate.hpp"

#include <algorithm>

#include "hdf/flow.hpp"

namespace hdf {

std::vector<int> random_ranks(Rng& g, int p, int max_rank) {
  const int w = std::uniform_int_distribution<int>(0, std::min(p - 2, max_rank - 1))(g);
  std::vector<int> ranks(w + 1, 1);
  const int r = std::uniform_int_distribution<int>(w + 1, max_rank)(g);
  for (int k = w + 1; k < r; ++k) ranks[std::uniform_int_distribution<int>(0, w)(g)]++;
  return ranks;
}

std::vector<int> grades_of(const std::vector<int>& ranks) {
  std::vector<int> gr;
  for (std::size_t i = 0; i < ranks.size(); ++i) gr.insert(gr.end(), ranks[i], static_cast<int>(i));
  return gr;
}

LiftingInputTuple random_chart_tuple(Rng& g, i64 p, int n, CurveKind kind, int max_rank) {
  const Ring& R = Ring::zmod(p, n);
  const Ring& Rb = Ring::zmod(p, n - 1);
  Curve C{kind, &R};
  const int lo = kind == CurveKind::Torus ? -1 : 0;
  auto ranks = random_ranks(g, static_cast<int>(p), max_rank);
  auto gr = grades_of(ranks);
  const int r = static_cast<int>(gr.size());
  PMat Th(R, r, r), Ab(Rb, r, r);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j) {
      if (gr[i] == gr[j] - 1) {
        Th(i, j) = random_poly(g, R, lo, 1);
        Ab(i, j) = Th(i, j).to_ring(Rb);
      } else if (gr[i] >= gr[j]) {
        Ab(i, j) = random_poly(g, Rb, lo, 1);
      }
    }
  GradedHiggsBundle E = make_graded(Bundle::trivial(C, r), ranks, Th);
  Curve Cb{kind, &Rb};
  return make_lifting_tuple(E, FilteredConnection{FlatBundle{Bundle::trivial(Cb, r), {Ab}}, ranks});
}

std::vector<PMat> random_unipotent(Rng& g, const LiftingInputTuple& T) {
  const Ring& Rb = T.Hbar->H.E.ring();
  auto gr = grades_of(T.E.ranks);
  const int r = T.E.rank();
  const int lo = T.E.curve().kind == CurveKind::Torus ? -1 : 0;
  std::vector<PMat> U;
  for (int c = 0; c < T.E.curve().charts(); ++c) {
    PMat u = PMat::identity(Rb, r);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j)
        if (gr[i] > gr[j]) u(i, j) = random_poly(g, Rb, lo, 1);
    U.push_back(u);
  }
  return U;
}

LiftingInputTuple random_p1_tuple(Rng& g, int p, int max_rank) {
  CorpusParams P;
  P.p = p;
  P.rank = std::uniform_int_distribution<int>(1, max_rank)(g);
  P.weight = std::uniform_int_distribution<int>(0, std::min(p - 2, P.rank - 1))(g);
  P.max_exp = 1;
  GradedHiggsBundle G = random_graded(g, P);
  const Ring& Fp = G.H.E.ring();
  Curve C = G.curve();
  LiftingAtlas A0 = make_atlas(C, {random_poly(g, Fp, 0, 1), random_poly(g, Fp, 0, 1)});
  FlatBundle V = inverse_cartier_1(G.H, A0);
  DeRhamBundle D{V, grade_induced_filtration(G, V)};
  Grading gr = grade_with_frames(D);
  GradedNormalization N = normalize_graded(gr.G);
  const Ring& R = Ring::zmod(p, 2);
  Curve C2 = C.with_ring(R);
  const i64 c = random_elem(g, R);
  PMat th = N.G.H.theta[0].to_ring(R);
  th = th + th.scale(R.mul(c, R.p_pow(1)));
  GradedHiggsBundle E = make_graded(Bundle(C2, N.G.H.E.g.to_ring(R)), N.G.ranks, th);
  return make_lifting_tuple(E, D, N.frames);
}

LiftingAtlas random_atlas(Rng& g, const Curve& C, int deg) {
  std::vector<LPoly> hs;
  const int lo = C.kind == CurveKind::Torus ? -1 : 0;
  for (int c = 0; c < C.charts(); ++c) hs.push_back(random_poly(g, C.ring(), lo, deg));
  return make_atlas(C, hs);
}

PMat random_section(Rng& g, const Ring& R, int r, int lo, int hi) {
  PMat s(R, r, 1);
  for (int e = 0; e < r; ++e) s(e, 0) = random_poly(g, R, lo, hi);
  return s;
}

}  // namespace hdf
