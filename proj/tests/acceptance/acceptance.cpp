// Acceptance run: one line per criterion, exit status 0 iff every attainable criterion passes.
#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "hdf/cartier.hpp"
#include "hdf/errors.hpp"
#include "hdf/filtration.hpp"
#include "hdf/flow.hpp"
#include "hdf/generate.hpp"
#include "hdf/witt.hpp"
#include "hdf/witt_generate.hpp"
#include "support/instances.hpp"

using namespace hdf;
using namespace hdf::testing;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  bool unattainable = false;  // fails for a documented structural reason
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double x) {
  char b[64];
  std::snprintf(b, sizeof b, f, x);
  return b;
}

// nilpotent graded Higgs bundle on a one-chart curve, theta entries random in the (k-1, k) blocks
GradedHiggsBundle random_chart_graded(Rng& g, const Curve& C, const std::vector<int>& ranks) {
  const Ring& R = C.ring();
  auto gr = grades_of(ranks);
  const int r = static_cast<int>(gr.size());
  const int lo = C.kind == CurveKind::Torus ? -2 : 0;
  PMat Th(R, r, r);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j)
      if (gr[i] == gr[j] - 1) Th(i, j) = random_poly(g, R, lo, 2);
  return make_graded(Bundle::trivial(C, r), ranks, Th);
}

GradedHiggsBundle random_p1(Rng& g, int p, int max_rank, int max_exp = 2) {
  CorpusParams P;
  P.p = p;
  P.rank = std::uniform_int_distribution<int>(1, max_rank)(g);
  P.weight = std::uniform_int_distribution<int>(0, std::min(p - 2, P.rank - 1))(g);
  P.max_exp = max_exp;
  return random_graded(g, P);
}

bool p_curvature_law(const HiggsBundle& H, const LiftingAtlas& A) {
  FlatBundle F = inverse_cartier_1(H, A);
  auto psi = p_curvature(F);
  const Ring& R = H.E.ring();
  for (int c = 0; c < H.E.curve.charts(); ++c)
    if (psi[c] != pulled_theta(H, c).scale(R.from_int(kPCurvatureSign))) return false;
  return true;
}

// ---- criteria ------------------------------------------------------------------------------

Outcome c1() {
  double worst = 0;
  int cases = 0;
  for (int p : {3, 5, 7})
    for (int r = 1; r <= 4; ++r) {
      auto t0 = Clock::now();
      const Ring& R = Ring::zmod(p, 1);
      Curve C = Curve::projective(R);
      FlatBundle F = inverse_cartier_1(HiggsBundle{Bundle::trivial(C, r), {PMat(R, r, r), PMat(R, r, r)}},
                                       default_atlas(C));
      bool ok = F.E.g == PMat::identity(R, r);
      for (auto& A : F.A) ok = ok && A.is_zero();
      for (auto& psi : p_curvature(F)) ok = ok && psi.is_zero();
      worst = std::max(worst, seconds_since(t0));
      ++cases;
      if (!ok) return {false, "p = " + std::to_string(p) + ", r = " + std::to_string(r) + " is not trivial"};
    }
  return {worst < 1.0, std::to_string(cases) + " cases, slowest " + fmt("%.3f s", worst)};
}

Outcome c2() {
  auto t0 = Clock::now();
  Rng g(102);
  int n = 0;
  for (int k = 0; k < 120; ++k) {
    const int p = k % 3 == 0 ? 3 : k % 3 == 1 ? 5 : 7;
    GradedHiggsBundle G = random_p1(g, p, 4);
    FlowPolicy pol;
    pol.rule = k % 2 ? FilPolicy::GradeInduced : FilPolicy::Supplied;
    LiftingAtlas A = random_atlas(g, G.curve());
    FlowStep st = flow_step(G, pol, A);
    if (degree(st.next.H.E) != p * degree(G.H.E) || degree(st.H.E) != p * degree(G.H.E))
      return {false, "instance " + std::to_string(k) + ": degree " + std::to_string(degree(G.H.E)) + " -> " +
                         std::to_string(degree(st.next.H.E))};
    ++n;
  }
  const double t = seconds_since(t0);
  return {t < 10.0, std::to_string(n) + " P^1 instances, " + fmt("%.2f s", t)};
}

Outcome c3() {
  Rng g(103);
  int n = 0;
  for (int k = 0; k < 36; ++k) {
    GradedHiggsBundle G = random_p1(g, k % 2 ? 5 : 3, 3);
    if (!p_curvature_law(G.H, random_atlas(g, G.curve()))) return {false, "P^1 instance " + std::to_string(k)};
    ++n;
  }
  for (int k = 0; k < 24; ++k) {
    const int p = k % 3 == 0 ? 3 : k % 3 == 1 ? 5 : 7;
    const Ring& R = Ring::zmod(p, 1);
    Curve C = k % 2 ? Curve::torus(R) : Curve::affine(R);
    std::vector<int> ranks = p == 3 ? std::vector<int>{1, 2} : std::vector<int>{1, 1, 1};
    GradedHiggsBundle G = random_chart_graded(g, C, ranks);
    if (!p_curvature_law(G.H, random_atlas(g, C))) return {false, "chart instance " + std::to_string(k)};
    ++n;
  }
  return {true, std::to_string(n) + " instances, rank <= 3"};
}

Outcome c4() {
  Rng g(104);
  int n1 = 0, n2 = 0;
  for (int k = 0; k < 50; ++k) {
    GradedHiggsBundle G = random_p1(g, k % 2 ? 5 : 3, 3);
    LiftingAtlas a = random_atlas(g, G.curve()), b = random_atlas(g, G.curve()), c = random_atlas(g, G.curve());
    // G_xy: output with atlas y in terms of output with atlas x
    auto G21 = atlas_change_iso(G.H, b, a), G32 = atlas_change_iso(G.H, c, b), G31 = atlas_change_iso(G.H, c, a);
    for (int ch = 0; ch < G.curve().charts(); ++ch)
      if (G31[ch] != G21[ch] * G32[ch]) return {false, "n = 1, triple " + std::to_string(k)};
    if (!verify_flat_iso(inverse_cartier_1(G.H, c), inverse_cartier_1(G.H, a), G31))
      return {false, "n = 1, triple " + std::to_string(k) + " is not horizontal"};
    ++n1;
  }
  for (int k = 0; k < 50; ++k) {
    LiftingInputTuple T = k % 5 == 4 ? random_chart_tuple(g, k % 2 ? 5 : 3, 2, CurveKind::Torus)
                                     : random_p1_tuple(g, k % 2 ? 5 : 3);
    TwistedFlatModule M = sharp_construct(T);
    LiftingAtlas a = random_atlas(g, M.curve()), b = random_atlas(g, M.curve()), c = random_atlas(g, M.curve());
    auto G21 = fn_atlas_change(M, b, a), G32 = fn_atlas_change(M, c, b), G31 = fn_atlas_change(M, c, a);
    for (int ch = 0; ch < M.curve().charts(); ++ch)
      if (G31[ch] != G21[ch] * G32[ch]) return {false, "n = 2, triple " + std::to_string(k)};
    if (!verify_flat_iso(fn_apply(M, c), fn_apply(M, a), G31))
      return {false, "n = 2, triple " + std::to_string(k) + " is not horizontal"};
    ++n2;
  }
  return {true, std::to_string(n1) + " triples at n = 1, " + std::to_string(n2) + " at n = 2"};
}

Outcome c5() {
  auto t0 = Clock::now();
  Rng g(105);
  int runs = 0, steps = 0, trivial_start = 0;
  for (int attempt = 0; attempt < 400 && runs < 32; ++attempt) {
    const int p = attempt % 2 ? 5 : 3;
    const Ring& R = Ring::zmod(p, 1);
    Curve C = Curve::projective(R);
    const int r = 2 + attempt % 3;
    FlatBundle V = random_semistable_flat(g, C, r, attempt % 3 - 1);
    SimpsonResult s0 = simpson_filtration(V);
    if (!s0.cert.ok()) return {false, "trivial start, attempt " + std::to_string(attempt) + ": " + s0.cert.detail};
    ++trivial_start;
    PMat v(R, r, 1);
    for (int i = 0; i < r; ++i) v(i, 0) = random_poly(g, R, 0, 2);
    auto F = osculating(V, v, 1 + attempt % (r - 1));
    if (!F) continue;
    SimpsonResult s = xi_iterate(V, *F, 64);
    if (!s.cert.ok()) return {false, "attempt " + std::to_string(attempt) + ": " + s.cert.detail};
    if (!is_higgs_semistable(s.graded).semistable) return {false, "terminal grading not semistable"};
    steps += s.iterations;
    ++runs;
  }
  const double t = seconds_since(t0);
  return {runs >= 30 && steps > 0 && t < 60.0,
          std::to_string(runs) + " runs from osculating starts (" + std::to_string(steps) + " xi steps), " +
              std::to_string(trivial_start) + " trivial starts stop at once, " + fmt("%.2f s", t)};
}

Outcome c6() {
  int n = 0;
  for (int p : {3, 5, 7}) {
    const Ring& R = Ring::zmod(p, 1);
    Curve C = Curve::projective(R);
    FlatBundle V = frobenius_pullback(FlatBundle{Bundle::split(C, {0, 1}), {PMat(R, 2, 2), PMat(R, 2, 2)}});
    if (splitting_type(V.E) != std::vector<int>{p, 0}) return {false, "unexpected splitting type"};
    if (is_nabla_semistable(V).semistable) return {false, "accepted for p = " + std::to_string(p)};
    try {
      simpson_filtration(V);
      return {false, "simpson_filtration accepted p = " + std::to_string(p)};
    } catch (const NotNablaSemistable&) {
      ++n;
    }
  }
  return {true, "O + O(p) rejected for p = 3, 5, 7 (" + std::to_string(n) + " refusals)"};
}

Outcome c7() {
  int n = 0;
  for (auto [p, f] : std::vector<std::pair<int, int>>{{3, 2}, {3, 3}, {5, 2}}) {
    PeriodicTuple T0 = torus_tuple(p, f);
    const Ring& K = T0.E.H.E.ring();
    const i64 xi = K.primitive_element();
    PackedTuple P = pack_endostructure(T0, xi);
    if (!P.companion_identity || !P.endomorphism || !verify_tuple(P.T))
      return {false, "packing failed for (" + std::to_string(p) + ", " + std::to_string(f) + ")"};
    Unpacked U = unpack_endostructure(P.T, P.s, xi, f);
    if (!verify_tuple(U.T) || !verify_tuple_iso(U.T, T0, slot0_iso(P, U)))
      return {false, "round trip failed for (" + std::to_string(p) + ", " + std::to_string(f) + ")"};
    ++n;
  }
  return {true, std::to_string(n) + " (p, f) pairs: identity exact, round trip certified"};
}

Outcome c8() {
  Rng g(108);
  int corpus = 0, periodic_corpus = 0, certified = 0;
  auto certify = [&](const PeriodicTuple& T, const LiftingAtlas& other) {
    if (!verify_tuple(T)) return false;
    FrobeniusCertificate c = build_relative_frobenius(T, other);
    if (!c.ok()) return false;
    ++certified;
    return true;
  };
  // random corpus: flows whose first stage is already periodic
  for (int k = 0; k < 40; ++k) {
    const int p = k % 2 ? 5 : 3;
    CorpusParams P;
    P.p = p;
    P.rank = 1 + k % 3;
    P.weight = 0;
    P.max_exp = 1;
    P.degree_zero = k % 4 == 0;
    GradedHiggsBundle G = random_graded(g, P);
    ++corpus;
    FlowPolicy pol;
    pol.rule = FilPolicy::Canonical;
    pol.max_steps = 1;
    LiftingAtlas A = default_atlas(G.curve());
    FlowTrace tr = run_flow(G, pol, A);
    if (!tr.stopped.empty() || !tr.period || tr.period->e != 0 || tr.period->f != 1) continue;
    ++periodic_corpus;
    if (!certify(tuple_from_trace(tr, 1, tr.period->phi.phi, A), random_atlas(g, G.curve())))
      return {false, "corpus instance " + std::to_string(k)};
  }
  // one-periodic families
  for (int p : {3, 5, 7}) {
    const Ring& R = Ring::zmod(p, 1);
    Curve C = Curve::projective(R);
    for (int r : {1, 2, 3}) {
      GradedHiggsBundle G = trivial_semistable(g, C, {r});
      FlowPolicy pol;
      pol.rule = FilPolicy::Supplied;
      pol.max_steps = 1;
      FlowTrace tr = run_flow(G, pol, default_atlas(C));
      if (!tr.period) return {false, "(O^r, 0) not periodic"};
      if (!certify(tuple_from_trace(tr, 1, tr.period->phi.phi, default_atlas(C)), random_atlas(g, C)))
        return {false, "(O^" + std::to_string(r) + ", 0), p = " + std::to_string(p)};
    }
    PeriodicTuple T = torus_tuple(p, 1);
    if (!certify(T, random_atlas(g, T.E.curve(), 2))) return {false, "torus tuple p = " + std::to_string(p)};
  }
  return {true, std::to_string(certified) + " one-periodic tuples certified (" + std::to_string(periodic_corpus) +
                    " of " + std::to_string(corpus) + " random corpus instances, the rest from (O^r, 0) and torus)"};
}

Outcome c9() {
  Rng g(109);
  int n9 = 0, n25 = 0, rel = 0;
  for (int k = 0; k < 44; ++k) {
    const i64 p = k % 2 ? 5 : 3;
    LiftingInputTuple T = k >= 40 ? random_p1_tuple(g, static_cast<int>(p))
                                  : random_chart_tuple(g, p, 2, k % 4 == 1 ? CurveKind::Torus : CurveKind::AffineLine);
    TwistedFlatModule S = sharp_construct(T);
    // the filtered lifting is built on a different frame of Hbar
    auto U = random_unipotent(g, T);
    TwistedFlatModule Gn = gn_construct(local_filtered_lifting(reframe(T, U)));
    std::vector<PMat> lam;
    for (auto& u : U) lam.push_back(filtered_descend(inverse(u), T.E.ranks, S.ring()));
    if (!verify_equivalence(S, Gn, lam, k + 1).ok()) return {false, "canonical lambda, instance " + std::to_string(k)};
    if (!equivalence_check(Gn, S, 2, k + 1).ok()) return {false, "solved lambda, instance " + std::to_string(k)};
    for (auto* M : {&S, &Gn}) {
      GammaReport rep = gamma_relations_check(*M, k + 1, 2);
      if (!rep.ok()) return {false, M->construction + ": " + rep.first_failure};
      for (int c : rep.checked) rel += c;
    }
    (p == 3 ? n9 : n25)++;
  }
  return {n9 + n25 >= 30, std::to_string(n9) + " over Z/9, " + std::to_string(n25) + " over Z/25, " +
                              std::to_string(rel) + " gamma-relation evaluations"};
}

Outcome c10() {
  Rng g(110);
  int n = 0;
  for (int k = 0; k < 36; ++k) {
    LiftingInputTuple T = k % 3 == 2 ? random_chart_tuple(g, k % 2 ? 5 : 3, 2,
                                                          k % 2 ? CurveKind::Torus : CurveKind::AffineLine)
                                     : random_p1_tuple(g, k % 2 ? 5 : 3);
    LiftingAtlas A = random_atlas(g, T.E.curve());
    ReductionReport rep = mod_reduction_check(T, A);
    const Ring& Fp = Ring::zmod(T.E.curve().p(), 1);
    FlatBundle direct = inverse_cartier_1(to_ring(T.E.H, Fp), reduce_atlas(A));
    const bool same_target = direct.A == rep.previous.A && direct.E.g == rep.previous.E.g;
    if (!rep.ok || !same_target || !verify_flat_iso(rep.reduced, direct, rep.iso))
      return {false, "instance " + std::to_string(k)};
    ++n;
  }
  return {true, std::to_string(n) + " instances with isomorphism certificates"};
}

Outcome c11() {
  auto t0 = Clock::now();
  bool closed = true, torus_periodic = true;
  std::string why;
  for (i64 p : {3, 5, 7}) {
    const Ring& R = Ring::zmod(p, 2);
    const Ring& Fp = Ring::zmod(p, 1);
    PMat N(R, 2, 2), Nb(Fp, 2, 2), v(R, 2, 1), vb(Fp, 2, 1);
    N(0, 1) = LPoly::constant(R, 1);
    Nb(0, 1) = LPoly::constant(Fp, 1);
    v(1, 0) = LPoly::constant(R, 1);
    vb(1, 0) = LPoly::constant(Fp, 1);
    for (int h = 0; h < 2; ++h) {
      // F(t) = t^p + p h t, dF/p = t^{p-1} + h
      Curve C = Curve::affine(R);
      GradedHiggsBundle E = make_graded(Bundle::trivial(C, 2), {1, 1}, N);
      LiftingInputTuple T = make_lifting_tuple(E, FilteredConnection{FlatBundle{Bundle::trivial(C.with_ring(Fp), 2), {Nb}}, {1, 1}});
      LiftingAtlas A = make_atlas(C, {LPoly::monomial(R, h, 1)});
      WittStep st = w2_flow_step(T, HodgeFiltration{{Subbundle{{v}}}}, HodgeFiltration{{Subbundle{{vb}}}}, A);
      LPoly dF = LPoly::monomial(R, 1, static_cast<int>(p) - 1) + LPoly::constant(R, h);
      PMat expect(R, 2, 2);
      expect(0, 1) = dF;
      if (st.H.A[0] != expect || st.next.H.theta[0] != expect) {
        closed = false;
        why = "closed form mismatch at p = " + std::to_string(p);
      }
      // psi would need (1,0)-component 1/(dF/p), not a polynomial
      if (st.psi) {
        closed = false;
        why = "unexpected isomorphism on A^1";
      }
    }
    // the same instance on the torus with Omega trivialized by dt/t
    GradedHiggsBundle Et = make_graded(Bundle::trivial(Curve::torus(R), 2), {1, 1}, [&] {
      PMat M(R, 2, 2);
      M(0, 1) = LPoly::monomial(R, 1, -1);
      return M;
    }());
    Curve Cp = Curve::torus(Fp);
    FlatBundle Hb = inverse_cartier_1(to_ring(Et.H, Fp), default_atlas(Cp));
    HodgeFiltration fb{{Subbundle{{vb}}}};
    LiftingInputTuple Tt = make_lifting_tuple(Et, DeRhamBundle{Hb, fb}, {PMat::identity(Fp, 2)});
    WittStep st = w2_flow_step(Tt, HodgeFiltration{{Subbundle{{v}}}}, fb, default_atlas(Et.curve()));
    if (!st.psi || (*st.psi)[0](1, 1) != LPoly::constant(R, 1) || !verify_graded_iso(st.next, Et, *st.psi))
      torus_periodic = false;
  }
  const double t = seconds_since(t0);
  Outcome o;
  o.unattainable = true;
  o.pass = false;
  o.detail = std::string("closed forms ") + (closed ? "match" : "MISMATCH: " + why) +
             " (A = next theta = (dF/p) F^*theta, h = 0, 1); not 1-periodic on A^1: dF/p mod p is never a unit in "
             "k[t]; torus analogue " +
             (torus_periodic ? "is 1-periodic with psi_01 = id" : "FAILED") + ", " + fmt("%.2f s", t);
  if (!closed || !torus_periodic || t >= 5.0) o.unattainable = false;
  return o;
}

Outcome c12() {
  Rng g(112);
  int n = 0;
  for (int k = 0; k < 40; ++k) {
    GradedHiggsBundle G = random_p1(g, k % 3 == 0 ? 3 : k % 3 == 1 ? 5 : 7, 4);
    OVReport rep = ov_sign_check({G.H, random_atlas(g, G.curve())}, G.ranks);
    if (!rep.ok()) return {false, "P^1 instance " + std::to_string(k) + ": " + rep.detail};
    ++n;
  }
  for (int k = 0; k < 20; ++k) {
    const int p = k % 2 ? 5 : 7;
    const Ring& R = Ring::zmod(p, 1);
    Curve C = k % 4 < 2 ? Curve::affine(R) : Curve::torus(R);
    GradedHiggsBundle G = random_chart_graded(g, C, {1, 1, 2});
    OVReport ungraded = ov_sign_check({G.H, random_atlas(g, C)});
    OVReport graded = ov_sign_check({G.H, random_atlas(g, C)}, G.ranks);
    if (!ungraded.ok() || !graded.ok()) return {false, "chart instance " + std::to_string(k)};
    ++n;
  }
  return {true, std::to_string(n) + " nilpotent instances"};
}

Outcome c13() {
  Rng g(113);
  int n = 0, terms = 0;
  for (int k = 0; k < 24; ++k) {
    const int p = k % 3 == 0 ? 3 : k % 3 == 1 ? 5 : 7;
    const Ring& R = Ring::zmod(p, 1);
    Curve C = Curve::projective(R);
    GradedHiggsBundle G = trivial_semistable(g, C, k % 2 ? std::vector<int>{1, 1} : std::vector<int>{2});
    if (degree(G.H.E) != 0 || nilpotency_exponent(G.H) < 0) return {false, "bad instance"};
    FlowPolicy pol;
    pol.max_steps = 4;
    FlowTrace tr = run_flow(G, pol, random_atlas(g, C));
    if (!tr.stopped.empty() || tr.E.size() != 5) return {false, "instance " + std::to_string(k) + ": " + tr.stopped};
    for (auto& E : tr.E) {
      SemistabilityResult s = is_higgs_semistable(E);
      if (!s.semistable) return {false, "instance " + std::to_string(k) + " lost semistability"};
      ++terms;
    }
    ++n;
  }
  return {true, std::to_string(n) + " instances x 4 steps, " + std::to_string(terms) +
                    " terms semistable (on P^1 such instances have theta = 0)"};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"Cartier transform of (O^r, 0)", c1},
      {"degree scaling", c2},
      {"p-curvature law", c3},
      {"Taylor gluing cocycle", c4},
      {"xi descent and termination", c5},
      {"negative control O + O(p)", c6},
      {"companion identity and pack/unpack", c7},
      {"relative Frobenius certificates", c8},
      {"T_n equivalence and gamma relations", c9},
      {"C_2^{-1} reduces to C_1^{-1}", c10},
      {"Hasse-Witt example on the affine line", c11},
      {"sign comparison", c12},
      {"rank-2 strong semistability", c13},
  };
  int failed = 0, unattainable = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw ") + e.what()};
    }
    std::printf("criterion %2zu: %s  %s: %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail.c_str());
    if (!o.pass) (o.unattainable ? unattainable : failed)++;
  }
  std::printf("%d failed, %d unattainable as stated\n", failed, unattainable);
  return failed == 0 ? 0 : 1;
}
