#include "doctest.h"
#include "hdf/curve.hpp"
#include "hdf/errors.hpp"
#include "support/rand.hpp"

using namespace hdf;
using hdf::testing::Rng;

namespace {
LPoly T(const Ring& R, int e, i64 c = 1) { return LPoly::monomial(R, c, e); }
}  // namespace

TEST_CASE("default atlases") {
  const Ring& F3 = Ring::zmod(3, 1);
  auto A = default_atlas(Curve::affine(F3));
  REQUIRE(A.lifts.size() == 1);
  CHECK(A.lift_ring().size() == 9);
  CHECK(A.lifts[0].image == T(A.lift_ring(), 3));

  auto P = default_atlas(Curve::projective(F3));
  REQUIRE(P.lifts.size() == 2);
  CHECK(P.lifts[1].image == T(P.lift_ring(), 3));
  // chart-1 lifting written in t agrees with chart 0 on the overlap
  CHECK(lifting_in_t(P, 1) == T(P.lift_ring(), 3));
  CHECK(lifting_difference_z(lifting_in_t(P, 0), lifting_in_t(P, 1), F3).is_zero());

  auto P9 = default_atlas(Curve::projective(Ring::zmod(3, 2)));
  CHECK(P9.lift_ring().size() == 27);
}

TEST_CASE("dF/p closed forms") {
  const Ring& F3 = Ring::zmod(3, 1);
  auto C3 = Curve::affine(F3);
  CHECK(dF_over_p(default_atlas(C3).lifts[0], F3) == T(F3, 2));
  CHECK(dF_over_p(make_lifting(C3, 0, T(F3, 1)), F3) == T(F3, 2) + T(F3, 0));

  const Ring& Z25 = Ring::zmod(5, 2);
  auto C5 = Curve::affine(Z25);
  CHECK(dF_over_p(make_lifting(C5, 0, T(Z25, 2)), Z25) == T(Z25, 4) + T(Z25, 1, 2));

  for (int p : {3, 5, 7}) {
    const Ring& F = Ring::zmod(p, 1);
    CHECK(dF_over_p(default_atlas(Curve::affine(F)).lifts[0], F) == T(F, p - 1));
  }
  // h' appears: t^p + p h  ->  t^{p-1} + h'
  Rng g(4);
  const Ring& Z9 = Ring::zmod(3, 2);
  for (int it = 0; it < 30; ++it) {
    LPoly h = testing::rand_poly(g, Z9, 0, 4);
    auto L = make_lifting(Curve::affine(Z9), 0, h);
    CHECK(dF_over_p(L, Z9) == T(Z9, 2) + h.derivative());
  }
}

TEST_CASE("lifting validation") {
  const Ring& F3 = Ring::zmod(3, 1);
  auto C = Curve::affine(F3);
  const Ring& Z9 = Ring::zmod(3, 2);
  CHECK_THROWS_AS(lifting_from_image(C, 0, T(Z9, 3) + T(Z9, 1)), ContractViolation);
  CHECK_THROWS_AS(lifting_from_image(C, 0, T(F3, 3)), WrongModulus);
  CHECK_THROWS_AS(make_lifting(C, 0, T(F3, -1)), ContractViolation);
  // Laurent h is fine on the torus
  CHECK_NOTHROW(make_lifting(Curve::torus(F3), 0, T(F3, -1)));
}

TEST_CASE("lifting difference examples") {
  const Ring& F3 = Ring::zmod(3, 1);
  auto C = Curve::affine(F3);
  auto a = make_lifting(C, 0, T(F3, 1));
  auto b = default_atlas(C).lifts[0];
  CHECK(lifting_difference_z(a.image, b.image, F3) == T(F3, 1));
  CHECK(lifting_difference_z(a.image, a.image, F3).is_zero());
}

TEST_CASE("z is additive over three liftings") {
  Rng g(17);
  for (auto* R : {&Ring::zmod(3, 1), &Ring::zmod(3, 2), &Ring::zmod(5, 1), &Ring::zmod(5, 2)}) {
    auto C = Curve::affine(*R);
    for (int it = 0; it < 25; ++it) {
      auto f1 = make_lifting(C, 0, testing::rand_poly(g, *R, 0, 3));
      auto f2 = make_lifting(C, 0, testing::rand_poly(g, *R, 0, 3));
      auto f3 = make_lifting(C, 0, testing::rand_poly(g, *R, 0, 3));
      LPoly z21 = lifting_difference_z(f2.image, f1.image, *R);
      LPoly z32 = lifting_difference_z(f3.image, f2.image, *R);
      LPoly z31 = lifting_difference_z(f3.image, f1.image, *R);
      CHECK(z31 == z21 + z32);
    }
  }
}

TEST_CASE("chart-1 lifting in t and its inverse") {
  Rng g(9);
  const Ring& Z9 = Ring::zmod(3, 2);
  auto C = Curve::projective(Z9);
  for (int it = 0; it < 20; ++it) {
    auto A = make_atlas(C, {testing::rand_poly(g, Z9, 0, 3), testing::rand_poly(g, Z9, 0, 3)});
    const Ring& L = A.lift_ring();
    LPoly F1t = lifting_in_t(A, 1);
    // F1t * F1(1/t) = 1
    CHECK(F1t * A.lifts[1].image.swap_var() == LPoly::constant(L, 1));
    // reduces to t^p mod p
    CHECK((F1t - T(L, 3)).min_val() >= 1);
    LPoly inv = invert_lifting(A.lifts[0].image);
    CHECK(inv * A.lifts[0].image == LPoly::constant(L, 1));
  }
}

TEST_CASE("Laurent composition with a lifting") {
  const Ring& Z9 = Ring::zmod(3, 2);
  auto A = make_atlas(Curve::torus(Z9), {T(Z9, 2) + T(Z9, -1)});
  const Ring& L = A.lift_ring();
  LPoly F = A.lifts[0].image, Fi = invert_lifting(F);
  LPoly f = T(L, 2) + T(L, -2, 4) + LPoly::constant(L, 7);
  LPoly lhs = compose_laurent(f, F, Fi);
  CHECK(lhs == F * F + (Fi * Fi).scale(4) + LPoly::constant(L, 7));
  // composition is a ring map
  LPoly h = T(L, -1) + T(L, 1, 5);
  CHECK(compose_laurent(f * h, F, Fi) == lhs * compose_laurent(h, F, Fi));
}

TEST_CASE("one-forms across charts") {
  Rng g(21);
  const Ring& F5 = Ring::zmod(5, 1);
  for (int it = 0; it < 40; ++it) {
    LPoly a = testing::rand_poly(g, F5, -3, 3);
    CHECK(form_to_chart0(form_to_chart1(a)) == a);
    LPoly b = testing::rand_poly(g, F5, -3, 3);
    CHECK(form_to_chart1(form_to_chart0(b)) == b);
  }
  // dt = -s^{-2} ds
  CHECK(form_to_chart1(LPoly::constant(F5, 1)) == T(F5, -2, 4));
  // the cotangent line has transition -t^2, i.e. degree -2 up to a unit
  CHECK(dt_ds(F5) == T(F5, 2, 4));
}
