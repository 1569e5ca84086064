#include "doctest.h"

#include "hdf/errors.hpp"
#include "hdf/witt.hpp"
#include "support/witt_gen.hpp"

using namespace hdf;
using namespace hdf::testing;

namespace {

PMat nilpotent2(const Ring& R, const LPoly& f) {
  PMat N(R, 2, 2);
  N(0, 1) = f;
  return N;
}

HodgeFiltration line_filtration(const Curve& C, const PMat& v) {
  Subbundle S;
  for (int c = 0; c < C.charts(); ++c) S.gens.push_back(v);
  return HodgeFiltration{{S}};
}

PMat column(const Ring& R, i64 a, i64 b) {
  PMat v(R, 2, 1);
  v(0, 0) = LPoly::constant(R, a);
  v(1, 0) = LPoly::constant(R, b);
  return v;
}

// E = Omega + O on a one-chart curve with theta = id, Omega trivialized by `form`
// (dt on the affine line, dt/t on the torus); Hbar = (O^2, d + theta), Filbar = Omega.
LiftingInputTuple omega_tuple(i64 p, CurveKind kind) {
  const Ring& R = Ring::zmod(p, 2);
  const Ring& Fp = Ring::zmod(p, 1);
  LPoly th = kind == CurveKind::Torus ? LPoly::monomial(R, 1, -1) : LPoly::constant(R, 1);
  GradedHiggsBundle E = make_graded(Bundle::trivial(Curve{kind, &R}, 2), {1, 1}, nilpotent2(R, th));
  FlatBundle Hb{Bundle::trivial(Curve{kind, &Fp}, 2), {nilpotent2(Fp, th.to_ring(Fp))}};
  return make_lifting_tuple(E, FilteredConnection{Hb, {1, 1}});
}

}  // namespace

TEST_CASE("filtered lifting follows the exponent rule") {
  Rng g(11);
  const Ring& R = Ring::zmod(3, 3);
  Curve C = Curve::affine(R);
  PMat A(R, 2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) A(i, j) = rand_poly(g, R, 0, 2);
  TwistedFlatModule M = gn_construct(FilteredConnection{FlatBundle{Bundle::trivial(C, 2), {A}}, {1, 1}});
  CHECK(M.pconn.B[0](0, 0) == A(0, 0).scale(3));
  CHECK(M.pconn.B[0](0, 1) == A(0, 1));
  CHECK(M.pconn.B[0](1, 0) == A(1, 0).scale(9));
  CHECK(M.pconn.B[0](1, 1) == A(1, 1).scale(3));

  // trivial filtration: p times the connection
  TwistedFlatModule M0 = gn_construct(FilteredConnection{FlatBundle{Bundle::trivial(C, 2), {A}}, {2}});
  CHECK(M0.pconn.B[0] == A.scale(3));

  PMat bad(R, 3, 3);
  bad(0, 2) = LPoly::constant(R, 1);
  CHECK_THROWS_AS(gn_construct(FilteredConnection{FlatBundle{Bundle::trivial(C, 3), {bad}}, {1, 1, 1}}), LevelTooHigh);
  const Ring& R5 = Ring::zmod(5, 2);
  PMat bad5(R5, 3, 3);
  bad5(0, 2) = LPoly::constant(R5, 1);
  CHECK_THROWS_AS(gn_construct(FilteredConnection{FlatBundle{Bundle::trivial(Curve::affine(R5), 3), {bad5}}, {1, 1, 1}}),
                  TransversalityViolated);
}

TEST_CASE("lifting tuples are validated") {
  const Ring& R = Ring::zmod(3, 2);
  const Ring& Fp = Ring::zmod(3, 1);
  GradedHiggsBundle E = make_graded(Bundle::trivial(Curve::affine(R), 2), {1, 1}, nilpotent2(R, LPoly::constant(R, 1)));
  FlatBundle wrong{Bundle::trivial(Curve::affine(Fp), 2), {nilpotent2(Fp, LPoly::constant(Fp, 2))}};
  CHECK_THROWS_AS(make_lifting_tuple(E, FilteredConnection{wrong, {1, 1}}), ContractViolation);
  FlatBundle over9{Bundle::trivial(Curve::affine(R), 2), {nilpotent2(R, LPoly::constant(R, 1))}};
  CHECK_THROWS_AS(make_lifting_tuple(E, FilteredConnection{over9, {1, 1}}), WrongModulus);

  const Ring& R3 = Ring::zmod(3, 2);
  PMat T3(R3, 3, 3);
  T3(0, 1) = T3(1, 2) = LPoly::constant(R3, 1);
  GradedHiggsBundle E3 = make_graded(Bundle::trivial(Curve::affine(R3), 3), {1, 1, 1}, T3);
  FlatBundle H3{Bundle::trivial(Curve::affine(Fp), 3), {T3.to_ring(Fp)}};
  CHECK_THROWS_AS(make_lifting_tuple(E3, FilteredConnection{H3, {1, 1, 1}}), LevelTooHigh);
}

TEST_CASE("local filtered lifting reduces to the tuple") {
  Rng g(5);
  for (int k = 0; k < 12; ++k) {
    const i64 p = k % 2 ? 5 : 3;
    auto kind = k % 3 == 0 ? CurveKind::Torus : CurveKind::AffineLine;
    LiftingInputTuple T = random_chart_tuple(g, p, 2, kind);
    FilteredConnection H = local_filtered_lifting(T);
    const Ring& Rb = T.Hbar->H.E.ring();
    CHECK(H.H.A[0].to_ring(Rb) == T.Hbar->H.A[0]);
    auto gl = grades_of(T.E.ranks);
    for (int i = 0; i < T.E.rank(); ++i)
      for (int j = 0; j < T.E.rank(); ++j)
        if (gl[i] == gl[j] - 1) CHECK(H.H.A[0](i, j) == T.E.H.theta[0](i, j));
  }
  Rng g2(6);
  for (int k = 0; k < 4; ++k) {
    LiftingInputTuple T = random_p1_tuple(g2, 3);
    FilteredConnection H = local_filtered_lifting(T);
    CHECK(graded_part(H.H.E.g, T.E.ranks) == graded_part(T.E.H.E.g, T.E.ranks));
    CHECK(H.H.E.g.to_ring(T.Hbar->H.E.ring()) == T.Hbar->H.E.g);
  }
}

TEST_CASE("the two constructions agree") {
  Rng g(7);
  int n_ok = 0;
  for (int k = 0; k < 16; ++k) {
    const i64 p = k % 2 ? 5 : 3;
    auto kind = k % 4 == 1 ? CurveKind::Torus : CurveKind::AffineLine;
    LiftingInputTuple T = random_chart_tuple(g, p, 2, kind);
    TwistedFlatModule S = sharp_construct(T);
    TwistedFlatModule G = gn_construct(local_filtered_lifting(T));
    CHECK(S.pconn.B == G.pconn.B);
    Equivalence id = verify_equivalence(S, G, {PMat::identity(S.ring(), S.rank())});
    CHECK(id.ok());

    // lifting built on another frame of Hbar
    auto U = random_unipotent(g, T);
    LiftingInputTuple T2 = reframe(T, U);
    TwistedFlatModule G2 = gn_construct(local_filtered_lifting(T2));
    std::vector<PMat> lam;
    for (auto& u : U) lam.push_back(filtered_descend(inverse(u), T.E.ranks, S.ring()));
    CHECK(verify_equivalence(S, G2, lam).ok());
    Equivalence eq = equivalence_check(G2, S, 2, k);
    CHECK(eq.ok());
    n_ok += eq.ok();
  }
  CHECK(n_ok == 16);
}

TEST_CASE("the two constructions agree on P^1") {
  Rng g(8);
  for (int k = 0; k < 4; ++k) {
    LiftingInputTuple T = random_p1_tuple(g, k % 2 ? 5 : 3);
    TwistedFlatModule S = sharp_construct(T);
    CHECK(p_charts_compatible(S.pconn));
    TwistedFlatModule G = gn_construct(local_filtered_lifting(T));
    Equivalence eq = equivalence_check(G, S, 2, k);
    CHECK(eq.ok());
  }
}

TEST_CASE("gamma relations") {
  Rng g(9);
  for (int k = 0; k < 6; ++k) {
    const i64 p = k % 2 ? 5 : 3;
    LiftingInputTuple T = random_chart_tuple(g, p, 2, k % 3 ? CurveKind::AffineLine : CurveKind::Torus);
    for (auto M : {sharp_construct(T), gn_construct(local_filtered_lifting(T))}) {
      GammaReport rep = gamma_relations_check(M, k + 1, 2);
      CHECK_MESSAGE(rep.ok(), rep.first_failure);
    }
  }
  LiftingInputTuple T = random_p1_tuple(g, 3);
  GammaReport rep = gamma_relations_check(sharp_construct(T), 3, 2);
  CHECK_MESSAGE(rep.ok(), rep.first_failure);

  // relation (3) with f = t on the weight-one instance
  LiftingInputTuple W = omega_tuple(3, CurveKind::AffineLine);
  TwistedFlatModule M = sharp_construct(W);
  const Ring& R = M.ring();
  LPoly t = LPoly::monomial(R, 1, 1), one = LPoly::constant(R, 1);
  std::vector<Derivation> D(3, one);
  PMat s = column(R, 1, 1);
  PMat lhs = M.gamma(0, D, s.scale(t));
  PMat rhs = M.gamma(0, D, s).scale(t) + M.gamma(0, {one, one}, s).scale(LPoly::constant(R, 3));
  CHECK(lhs == rhs);
}

TEST_CASE("level of the twisted modules") {
  Rng g(10);
  for (int k = 0; k < 6; ++k) {
    const i64 p = k % 2 ? 5 : 3;
    LiftingInputTuple T = random_chart_tuple(g, p, 2, CurveKind::AffineLine);
    TwistedFlatModule M = sharp_construct(T);
    CHECK(has_level(M.pconn, M.pconn.level, {random_section(g, M.ring(), M.rank(), 0, 2)}));
  }
  TwistedFlatModule M = sharp_construct(omega_tuple(3, CurveKind::AffineLine));
  CHECK(M.pconn.level == 2);
  CHECK(has_level(M.pconn, 2));
  CHECK_FALSE(has_level(M.pconn, 1));
}

TEST_CASE("F_1 reproduces the inverse Cartier transform") {
  Rng g(12);
  for (int k = 0; k < 10; ++k) {
    CorpusParams P;
    P.p = k % 2 ? 5 : 3;
    P.rank = 1 + k % 3;
    P.weight = std::min(P.rank - 1, static_cast<int>(P.p) - 2);
    GradedHiggsBundle G = random_graded(g, P);
    LiftingAtlas A = random_atlas(g, G.curve());
    FlatBundle ours = cn_inverse(first_level_tuple(G), A);
    FlatBundle ref = inverse_cartier_1(G.H, A);
    CHECK(ours.A == ref.A);
    CHECK(ours.E.g == ref.E.g);
  }
  const Ring& Fp = Ring::zmod(3, 1);
  GradedHiggsBundle E = make_graded(Bundle::trivial(Curve::affine(Fp), 2), {1, 1}, nilpotent2(Fp, LPoly::constant(Fp, 1)));
  FlatBundle H = cn_inverse(first_level_tuple(E), default_atlas(Curve::affine(Fp)));
  CHECK(H.A[0] == nilpotent2(Fp, LPoly::monomial(Fp, 1, 2)));
}

TEST_CASE("F_2 glues and reduces to F_1") {
  Rng g(13);
  for (int k = 0; k < 8; ++k) {
    LiftingInputTuple T = random_p1_tuple(g, k % 2 ? 5 : 3);
    LiftingAtlas A = random_atlas(g, T.E.curve());
    FlatBundle H = cn_inverse(T, A);
    CHECK(flat_charts_compatible(H));
    ReductionReport rep = mod_reduction_check(T, A);
    CHECK(rep.ok);
  }
  for (int k = 0; k < 6; ++k) {
    LiftingInputTuple T = random_chart_tuple(g, k % 2 ? 5 : 3, 2, k % 3 ? CurveKind::AffineLine : CurveKind::Torus);
    CHECK(mod_reduction_check(T, random_atlas(g, T.E.curve())).ok);
  }
}

TEST_CASE("Taylor gluing cocycle") {
  Rng g(14);
  for (int k = 0; k < 10; ++k) {
    const int n = 1 + k % 2;
    const i64 p = k % 4 < 2 ? 3 : 5;
    auto make = [&]() {
      if (n == 2) return random_p1_tuple(g, static_cast<int>(p));
      CorpusParams P;
      P.p = p;
      P.rank = 2;
      P.weight = 1;
      return first_level_tuple(random_graded(g, P));
    };
    LiftingInputTuple T = make();
    TwistedFlatModule M = sharp_construct(T);
    LiftingAtlas a = random_atlas(g, M.curve()), b = random_atlas(g, M.curve()), c = random_atlas(g, M.curve());
    auto ab = fn_atlas_change(M, a, b), bc = fn_atlas_change(M, b, c), ac = fn_atlas_change(M, a, c);
    for (int ch = 0; ch < M.curve().charts(); ++ch) CHECK(ac[ch] == bc[ch] * ab[ch]);
    CHECK(verify_flat_iso(fn_apply(M, a), fn_apply(M, b), ab));
  }
}

TEST_CASE("Taylor truncation") {
  for (i64 p : {3, 5, 7})
    for (int n = 1; n <= 3; ++n)
      for (int j = taylor_bound(p, n) + 1; j < 200; ++j) CHECK(taylor_coefficient_valuation(p, j) >= n);
  CHECK(taylor_coefficient_valuation(3, 3) == 0);
  CHECK(taylor_coefficient_valuation(3, 6) == 2);

  Rng g(15);
  LiftingInputTuple T = random_p1_tuple(g, 3);
  TwistedFlatModule M = sharp_construct(T);
  LiftingAtlas a = random_atlas(g, M.curve()), b = random_atlas(g, M.curve());
  auto base = fn_atlas_change(M, a, b);
  FnOptions more;
  more.extra = 3 * 3;
  CHECK(fn_atlas_change(M, a, b, more) == base);

  TwistedFlatModule W = sharp_construct(omega_tuple(3, CurveKind::AffineLine));
  const Ring& R = W.ring();
  Curve C = W.curve();
  LiftingAtlas x = make_atlas(C, {LPoly::monomial(R, 1, 1)}), y = default_atlas(C);
  FnOptions tiny;
  tiny.bound = 0;
  CHECK_THROWS_AS(fn_atlas_change(W, x, y, tiny), TruncationBoundExceeded);
}

TEST_CASE("omega example on the affine line") {
  LiftingInputTuple T = omega_tuple(3, CurveKind::AffineLine);
  const Ring& R = T.E.H.E.ring();
  Curve C = T.E.curve();
  TwistedFlatModule M = sharp_construct(T);
  CHECK(M.pconn.B[0] == nilpotent2(R, LPoly::constant(R, 1)));
  LiftingAtlas A = default_atlas(C);
  FlatBundle H = cn_inverse(T, A);
  CHECK(H.A[0] == nilpotent2(R, LPoly::monomial(R, 1, 2)));

  const Ring& Fp = Ring::zmod(3, 1);
  HodgeFiltration fil = line_filtration(C, column(R, 0, 1));
  HodgeFiltration filbar = line_filtration(C.with_ring(Fp), column(Fp, 0, 1));
  WittStep st = w2_flow_step(T, fil, filbar, A);
  CHECK(st.next.H.theta[0] == nilpotent2(R, LPoly::monomial(R, 1, 2)));
  CHECK_FALSE(st.psi.has_value());
  // the mod 3 reduction is the char-p step
  FlatBundle Hp = inverse_cartier_1(to_ring(T.E.H, Fp), reduce_atlas(A));
  CHECK(to_ring(H, Fp).A == Hp.A);

  CHECK_THROWS_AS(w2_flow_step(T, line_filtration(C, column(R, 1, 0)), filbar, A), NoLiftedFiltration);
  CHECK_THROWS_AS(w2_flow_step(T, HodgeFiltration{}, filbar, A), NoLiftedFiltration);
}

TEST_CASE("omega example on the torus is one-periodic") {
  for (i64 p : {3, 5}) {
    const Ring& R = Ring::zmod(p, 2);
    const Ring& Fp = Ring::zmod(p, 1);
    GradedHiggsBundle E =
        make_graded(Bundle::trivial(Curve::torus(R), 2), {1, 1}, nilpotent2(R, LPoly::monomial(R, 1, -1)));
    Curve Cp = Curve::torus(Fp);
    FlatBundle Hb = inverse_cartier_1(to_ring(E.H, Fp), default_atlas(Cp));
    HodgeFiltration filbar = line_filtration(Cp, column(Fp, 0, 1));
    std::vector<PMat> id{PMat::identity(Fp, 2)};
    LiftingInputTuple T = make_lifting_tuple(E, DeRhamBundle{Hb, filbar}, id);
    LiftingAtlas A = default_atlas(E.curve());
    WittStep st = w2_flow_step(T, line_filtration(E.curve(), column(R, 0, 1)), filbar, A);
    CHECK(st.next.H.theta[0] == E.H.theta[0]);
    REQUIRE(st.psi.has_value());
    CHECK((*st.psi)[0] == PMat::identity(R, 2));
  }
}

TEST_CASE("distinct lifted filtrations leave a nilpotent endomorphism mod p") {
  LiftingInputTuple T = omega_tuple(3, CurveKind::AffineLine);
  const Ring& R = T.E.H.E.ring();
  Curve C = T.E.curve();
  FlatBundle H = cn_inverse(T, default_atlas(C));
  int distinct = 0;
  for (i64 a = 0; a < 3; ++a)
    for (i64 b = 0; b < 3; ++b) {
      auto A = line_filtration(C, column(R, 3 * a, 1)), B = line_filtration(C, column(R, 3 * b, 1));
      LiftDifference d = lift_difference(H, A, B);
      CHECK(d.zero == (a == b));
      CHECK(d.higgs_morphism);
      CHECK(d.nilpotent);
      distinct += !d.zero;
    }
  CHECK(distinct == 6);
}

TEST_CASE("Taylor gluing on one-chart curves") {
  Rng g(77);
  for (int k = 0; k < 12; ++k) {
    LiftingInputTuple T =
        random_chart_tuple(g, k % 2 ? 5 : 3, 2, k % 4 < 2 ? CurveKind::Torus : CurveKind::AffineLine);
    TwistedFlatModule M = sharp_construct(T);
    LiftingAtlas a = random_atlas(g, M.curve()), b = random_atlas(g, M.curve());
    CHECK(verify_flat_iso(fn_apply(M, a), fn_apply(M, b), fn_atlas_change(M, a, b)));
  }
}
