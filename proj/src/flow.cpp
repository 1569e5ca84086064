#include "hdf/flow.hpp"

#include <algorithm>

#include "hdf/errors.hpp"

namespace hdf {

namespace {

std::vector<int> offsets(const std::vector<int>& ranks) {
  std::vector<int> off(ranks.size() + 1, 0);
  for (std::size_t i = 0; i < ranks.size(); ++i) off[i + 1] = off[i] + ranks[i];
  return off;
}

std::vector<int> padded(std::vector<int> r, std::size_t n) {
  if (r.size() > n) throw ContractViolation("grading longer than expected");
  r.resize(n, 0);
  return r;
}

// new = P * old, old ordered slot-major (slot i, grade k), new ordered grade-major
PMat grade_major_perm(const Ring& R, const std::vector<std::vector<int>>& slot_ranks) {
  const std::size_t n = slot_ranks.at(0).size();
  int total = 0;
  std::vector<std::vector<int>> start(slot_ranks.size());
  for (std::size_t i = 0; i < slot_ranks.size(); ++i) {
    auto off = offsets(slot_ranks[i]);
    for (std::size_t k = 0; k < n; ++k) start[i].push_back(total + off[k]);
    total += off.back();
  }
  PMat P(R, total, total);
  int row = 0;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < slot_ranks.size(); ++i)
      for (int j = 0; j < slot_ranks[i][k]; ++j) P(row++, start[i][k] + j) = LPoly::constant(R, 1);
  return P;
}

struct DirectSum {
  GradedHiggsBundle G;
  PMat P;  // grade-major <- slot-major
  std::vector<std::vector<int>> slot_ranks;
};

DirectSum graded_direct_sum(const std::vector<GradedHiggsBundle>& Es) {
  const Curve& C = Es.at(0).curve();
  const Ring& R = C.ring();
  std::size_t n = 0;
  for (auto& E : Es) n = std::max(n, E.ranks.size());
  std::vector<std::vector<int>> sr;
  std::vector<PMat> gs;
  std::vector<std::vector<PMat>> th(C.charts());
  for (auto& E : Es) {
    sr.push_back(padded(E.ranks, n));
    gs.push_back(E.H.E.g);
    for (int c = 0; c < C.charts(); ++c) th[c].push_back(E.H.theta[c]);
  }
  PMat P = grade_major_perm(R, sr);
  PMat Pinv = P.transpose();
  HiggsBundle sum{Bundle(C, PMat::blockdiag(R, gs)), {}};
  for (int c = 0; c < C.charts(); ++c) sum.theta.push_back(PMat::blockdiag(R, th[c]));
  std::vector<int> ranks(n, 0);
  for (auto& r : sr)
    for (std::size_t k = 0; k < n; ++k) ranks[k] += r[k];
  HiggsBundle H = change_frame(sum, std::vector<PMat>(C.charts(), P));
  (void)Pinv;
  return {GradedHiggsBundle{H, ranks}, P, sr};
}

Subbundle sub_to_ring(const Subbundle& S, const Ring& R) {
  Subbundle out;
  for (auto& g : S.gens) out.gens.push_back(g.to_ring(R));
  return out;
}

HodgeFiltration fil_to_ring(const HodgeFiltration& F, const Ring& R) {
  HodgeFiltration out;
  for (auto& s : F.steps) out.steps.push_back(sub_to_ring(s, R));
  return out;
}

void check_filtration(const DeRhamBundle& D) {
  const int r = D.V.E.rank();
  const int charts = D.V.E.curve.charts();
  for (int k = 0; k < D.fil.level(); ++k) {
    const Subbundle& S = D.fil.steps[k];
    if (static_cast<int>(S.gens.size()) != charts)
      throw PolicyFiltrationInvalid("Fil^" + std::to_string(k + 1) + " has the wrong number of charts");
    for (auto& g : S.gens)
      if (g.rows() != r) throw PolicyFiltrationInvalid("Fil^" + std::to_string(k + 1) + " has the wrong ambient rank");
    if (k > 0 && !contains(D.fil.steps[k - 1], S))
      throw PolicyFiltrationInvalid("Fil^" + std::to_string(k + 1) + " is not inside Fil^" + std::to_string(k));
  }
  int bad = -1;
  try {
    if (!is_transversal(D, &bad))
      throw PolicyFiltrationInvalid("Griffiths transversality fails at Fil^" + std::to_string(bad));
  } catch (const PolicyFiltrationInvalid&) {
    throw;
  } catch (const Error& e) {
    throw PolicyFiltrationInvalid(e.what());
  }
}

GradedHiggsBundle checked_grade(const DeRhamBundle& D) {
  check_filtration(D);
  try {
    return grade(D);
  } catch (const Error& e) {
    throw PolicyFiltrationInvalid(e.what());
  }
}

bool chart_unit(const LPoly& d, const Curve& C) {
  if (d.is_zero()) return false;
  if (C.kind == CurveKind::Torus) return d.lo() == d.hi() && d.ring().is_unit(d.coeff(d.lo()));
  return d.lo() == 0 && d.hi() == 0 && d.ring().is_unit(d.coeff(0));
}

// quick invariants before the intertwiner search
bool may_be_isomorphic(const GradedHiggsBundle& A, const GradedHiggsBundle& B) {
  if (A.ranks != B.ranks || !(A.curve() == B.curve())) return false;
  if (!A.curve().projective()) return true;
  for (int i = 0; i <= A.weight(); ++i)
    if (A.ranks[i] > 0 && splitting_type(A.piece(i)) != splitting_type(B.piece(i))) return false;
  return true;
}

PMat mat_pow_sum(const std::vector<i64>& poly, const PMat& s) {
  const Ring& R = s.ring();
  PMat acc(R, s.rows(), s.cols());
  PMat pw = PMat::identity(R, s.rows());
  for (i64 c : poly) {
    acc = acc + pw.scale(R.from_int(c));
    pw = pw * s;
  }
  return acc;
}

}  // namespace

// ---- single step and traces -------------------------------------------------------------

HodgeFiltration grade_induced_filtration(const GradedHiggsBundle& G, const FlatBundle& H) {
  HodgeFiltration fil;
  const int r = G.rank();
  for (int k = 1; k <= G.weight(); ++k) {
    int o = G.offset(k);
    if (o == r) break;
    PMat gens(H.E.ring(), r, r - o);
    for (int j = 0; j < r - o; ++j) gens(o + j, j) = LPoly::constant(H.E.ring(), 1);
    fil.steps.push_back(saturate(H.E, gens));
  }
  return fil;
}

namespace {

HodgeFiltration policy_filtration(const GradedHiggsBundle& G, const FlatBundle& H, const FlowPolicy& policy, int index) {
  switch (policy.rule) {
    case FilPolicy::Canonical:
      if (!G.curve().projective()) throw ContractViolation("the canonical filtration is defined on P^1 only");
      return simpson_filtration(H, policy.max_iter).fil;
    case FilPolicy::Supplied:
      if (index < static_cast<int>(policy.supplied.size())) return policy.supplied[index];
      return trivial_filtration();
    case FilPolicy::GradeInduced:
      return grade_induced_filtration(G, H);
  }
  return trivial_filtration();
}

}  // namespace

FlowStep flow_step(const GradedHiggsBundle& G, const FlowPolicy& policy, const LiftingAtlas& atlas, int index) {
  FlatBundle H = inverse_cartier_1(G.H, atlas);
  HodgeFiltration fil = policy_filtration(G, H, policy, index);
  DeRhamBundle D{H, fil};
  GradedHiggsBundle next = checked_grade(D);
  if (degree(next.H.E) != G.curve().p() * degree(G.H.E)) throw ContractViolation("degree did not scale by p");
  return {H, fil, next};
}

FlowTrace run_flow(const GradedHiggsBundle& G0, const FlowPolicy& policy, const LiftingAtlas& atlas) {
  FlowTrace tr;
  const bool proj = G0.curve().projective();
  const i64 p = G0.curve().p();
  auto record = [&](const GradedHiggsBundle& E) {
    tr.E.push_back(E);
    tr.degrees.push_back(degree(E.H.E));
    if (proj) {
      auto ss = is_higgs_semistable(E);
      tr.mu_max.push_back(ss.witness.mu_max);
      tr.semistable.push_back(ss.semistable);
    }
  };
  record(G0);
  const bool track = proj && policy.rule == FilPolicy::Canonical && tr.semistable[0];
  for (int i = 0; i < policy.max_steps; ++i) {
    const GradedHiggsBundle& cur = tr.E.back();
    FlatBundle H = inverse_cartier_1(cur.H, atlas);
    if (proj) tr.bundle_mu_max.push_back(hn_filtration(H.E).mu_max);
    tr.H.push_back(H);
    try {
      HodgeFiltration fil = policy_filtration(cur, H, policy, i);
      GradedHiggsBundle next = checked_grade({H, fil});
      tr.fil.push_back(fil);
      record(next);
    } catch (const Error& e) {
      tr.stopped = "step " + std::to_string(i) + ": " + e.what();
      break;
    }
    if (tr.degrees.back() != p * tr.degrees[tr.degrees.size() - 2]) tr.degree_scaling = false;
    if (track && !tr.semistable.back()) tr.semistability_preserved = false;
  }
  tr.period = detect_period(tr.E, policy.iso);
  return tr;
}

std::optional<Period> detect_period(const std::vector<GradedHiggsBundle>& stages, const IsoOptions& opt) {
  const int n = static_cast<int>(stages.size());
  for (int e = 0; e < n; ++e) {
    for (int f = 1; e + f < n; ++f) {
      const auto& A = stages[e + f];
      const auto& B = stages[e];
      if (!may_be_isomorphic(A, B)) continue;
      auto iso = graded_higgs_isomorphic(A, B, opt);
      if (iso) return Period{e, f, *iso};
    }
  }
  return std::nullopt;
}

// ---- periodic tuples ----------------------------------------------------------------------

TupleStages unfold(const PeriodicTuple& T) {
  TupleStages S;
  S.E.push_back(T.E);
  for (int i = 0; i < T.period(); ++i) {
    FlatBundle H = inverse_cartier_1(S.E.back().H, T.atlas);
    S.H.push_back(H);
    S.E.push_back(checked_grade({H, T.fils[i]}));
  }
  S.H.push_back(inverse_cartier_1(S.E.back().H, T.atlas));
  return S;
}

bool verify_tuple(const PeriodicTuple& T) {
  if (T.period() < 1) return false;
  try {
    auto S = unfold(T);
    return verify_graded_iso(S.E.back(), S.E.front(), T.phi);
  } catch (const Error&) {
    return false;
  }
}

PMat graded_part(const PMat& M, const std::vector<int>& ranks) { return graded_part(M, ranks, ranks); }

PMat graded_part(const PMat& M, const std::vector<int>& row_ranks, const std::vector<int>& col_ranks) {
  if (row_ranks.size() != col_ranks.size()) throw ContractViolation("graded_part: grade counts differ");
  auto ro = offsets(row_ranks), co = offsets(col_ranks);
  PMat out(M.ring(), M.rows(), M.cols());
  for (std::size_t i = 0; i < row_ranks.size(); ++i)
    out.set_block(ro[i], co[i], M.block(ro[i], co[i], row_ranks[i], col_ranks[i]));
  return out;
}

std::vector<PMat> regrade(const DeRhamBundle& A, const DeRhamBundle& B, const std::vector<PMat>& Psi) {
  auto ga = grade_with_frames(A);
  auto gb = grade_with_frames(B);
  std::size_t n = std::max(ga.G.ranks.size(), gb.G.ranks.size());
  auto ra = padded(ga.G.ranks, n), rb = padded(gb.G.ranks, n);
  std::vector<PMat> out;
  for (std::size_t c = 0; c < Psi.size(); ++c) {
    PMat M = inverse(gb.frames[c]) * Psi[c] * ga.frames[c];
    out.push_back(graded_part(M, rb, ra));
  }
  return out;
}

HodgeFiltration pull_filtration(const FlatBundle& HA, const std::vector<PMat>& Psi, const HodgeFiltration& filB) {
  HodgeFiltration out;
  PMat inv = inverse(Psi.at(0));
  for (auto& s : filB.steps) {
    if (s.rank() == 0) {
      out.steps.push_back(zero_subbundle(HA.E));
      continue;
    }
    out.steps.push_back(saturate(HA.E, inv * s.gens[0]));
  }
  return out;
}

std::vector<PMat> frobenius_twist(const std::vector<PMat>& M) {
  std::vector<PMat> out;
  for (auto& m : M) out.push_back(frobenius_twist(m));
  return out;
}

bool verify_tuple_iso(const PeriodicTuple& A, const PeriodicTuple& B, const std::vector<PMat>& psi) {
  if (A.period() != B.period() || A.period() < 1) return false;
  try {
    auto SA = unfold(A), SB = unfold(B);
    std::vector<PMat> cur = psi;
    if (!verify_graded_iso(SA.E[0], SB.E[0], cur)) return false;
    for (int i = 0; i < A.period(); ++i) {
      auto Psi = frobenius_twist(cur);
      if (!verify_flat_iso(SA.H[i], SB.H[i], Psi)) return false;
      if (!same_filtration(pull_filtration(SA.H[i], Psi, B.fils[i]), A.fils[i])) return false;
      cur = regrade({SA.H[i], A.fils[i]}, {SB.H[i], B.fils[i]}, Psi);
      if (!verify_graded_iso(SA.E[i + 1], SB.E[i + 1], cur)) return false;
    }
    for (std::size_t c = 0; c < psi.size(); ++c)
      if (B.phi[c] * cur[c] != psi[c] * A.phi[c]) return false;
    return true;
  } catch (const Error&) {
    return false;
  }
}

PeriodicTuple shift_tuple(const PeriodicTuple& T) {
  auto S = unfold(T);
  const int f = T.period();
  auto Phi = frobenius_twist(T.phi);
  HodgeFiltration last = pull_filtration(S.H[f], Phi, T.fils[0]);
  PeriodicTuple out{S.E[1], {}, {}, T.atlas};
  for (int i = 1; i < f; ++i) out.fils.push_back(T.fils[i]);
  out.fils.push_back(last);
  out.phi = regrade({S.H[f], last}, {S.H[0], T.fils[0]}, Phi);
  return out;
}

PeriodicTuple lengthen_tuple(const PeriodicTuple& T, int l) {
  if (l < 1) throw ContractViolation("lengthen_tuple: factor must be positive");
  auto S = unfold(T);
  const int f = T.period();
  std::vector<GradedHiggsBundle> E = S.E;   // E_0 .. E_f
  std::vector<FlatBundle> H(S.H.begin(), S.H.begin() + f);
  std::vector<HodgeFiltration> fils = T.fils;
  std::vector<PMat> psi = T.phi;             // E_j -> E_{j-f}
  std::vector<PMat> total = T.phi;           // E_j -> E_0
  for (int j = f; j < l * f; ++j) {
    FlatBundle Hj = inverse_cartier_1(E[j].H, T.atlas);
    auto Psi = frobenius_twist(psi);
    HodgeFiltration Fj = pull_filtration(Hj, Psi, fils[j - f]);
    E.push_back(checked_grade({Hj, Fj}));
    psi = regrade({Hj, Fj}, {H[j - f], fils[j - f]}, Psi);
    H.push_back(Hj);
    fils.push_back(Fj);
    if ((j + 1) % f == 0)
      for (std::size_t c = 0; c < total.size(); ++c) total[c] = total[c] * psi[c];
  }
  return {T.E, fils, total, T.atlas};
}

PeriodicTuple to_ring(const PeriodicTuple& T, const Ring& S) {
  PeriodicTuple out{to_ring(T.E, S), {}, {}, T.atlas};
  for (auto& F : T.fils) out.fils.push_back(fil_to_ring(F, S));
  for (auto& m : T.phi) out.phi.push_back(m.to_ring(S));
  return out;
}

// ---- endomorphism structure ------------------------------------------------------------------

std::vector<i64> minimal_polynomial(const Ring& K, i64 xi, int f) {
  if (f < 1) throw NotPrimitive("field degree must be positive");
  std::vector<i64> conj;
  for (int i = 0; i < f; ++i) conj.push_back(gf_conjugate(K, xi, i));
  if (gf_conjugate(K, xi, f) != xi) throw NotPrimitive("xi is not in F_{p^" + std::to_string(f) + "}");
  for (int i = 0; i < f; ++i)
    for (int j = i + 1; j < f; ++j)
      if (conj[i] == conj[j]) throw NotPrimitive("xi does not generate F_{p^" + std::to_string(f) + "}");
  std::vector<i64> poly{1};
  for (i64 c : conj) {
    std::vector<i64> next(poly.size() + 1, 0);
    for (std::size_t k = 0; k < poly.size(); ++k) {
      next[k + 1] = K.add(next[k + 1], poly[k]);
      next[k] = K.sub(next[k], K.mul(c, poly[k]));
    }
    poly = next;
  }
  for (i64 c : poly)
    if (c >= K.p()) throw ContractViolation("minimal polynomial has coefficients outside F_p");
  return poly;
}

bool companion_identity(const PMat& phi, i64 xi, int f) {
  const Ring& K = phi.ring();
  const int r = phi.rows();
  PMat rot(K, f * r, f * r);
  for (int i = 0; i + 1 < f; ++i) rot.set_block(i * r, (i + 1) * r, PMat::identity(K, r));
  rot.set_block((f - 1) * r, 0, phi);
  std::vector<LPoly> d0, d1;
  for (int i = 0; i < f; ++i)
    for (int j = 0; j < r; ++j) {
      d0.push_back(LPoly::constant(K, gf_conjugate(K, xi, i)));
      d1.push_back(LPoly::constant(K, gf_conjugate(K, xi, i + 1)));
    }
  return rot * PMat::diag(d0) == PMat::diag(d1) * rot;
}

PackedTuple pack_endostructure(const PeriodicTuple& T, i64 xi) {
  const int f = T.period();
  const Curve& C = T.E.curve();
  const Ring& K = C.ring();
  minimal_polynomial(K, xi, f);
  auto S = unfold(T);
  std::vector<GradedHiggsBundle> slots(S.E.begin(), S.E.begin() + f);
  DirectSum ds = graded_direct_sum(slots);
  const int charts = C.charts();
  const int r = T.E.rank();

  // Fil on C^{-1}(G): the direct sum of the Fil_i
  FlatBundle HG = inverse_cartier_1(ds.G.H, T.atlas);
  int L = 0;
  for (auto& F : T.fils) L = std::max(L, F.level());
  HodgeFiltration filG;
  for (int k = 1; k <= L; ++k) {
    std::vector<PMat> parts;
    for (int i = 0; i < f; ++i) {
      if (k <= T.fils[i].level()) parts.push_back(T.fils[i].steps[k - 1].gens[0]);
      else parts.push_back(PMat(K, r, 0));
    }
    PMat gens = ds.P * PMat::blockdiag(K, parts);
    filG.steps.push_back(gens.cols() == 0 ? zero_subbundle(HG.E) : saturate(HG.E, gens));
  }
  auto gG = grade_with_frames({HG, filG});

  // adapted frames of the sum built from the frames of the summands
  std::vector<Grading> gi;
  std::vector<std::vector<int>> out_slots;
  for (int i = 0; i < f; ++i) {
    gi.push_back(grade_with_frames({S.H[i], T.fils[i]}));
    out_slots.push_back(padded(gi.back().G.ranks, gG.G.ranks.size()));
  }
  PMat Psig = grade_major_perm(K, out_slots);
  std::vector<PMat> phit;
  for (int c = 0; c < charts; ++c) {
    std::vector<PMat> fr;
    for (int i = 0; i < f; ++i) fr.push_back(gi[i].frames[c]);
    PMat BS = ds.P * PMat::blockdiag(K, fr) * Psig.transpose();
    PMat Cc = graded_part(inverse(BS) * gG.frames[c], gG.G.ranks);
    // slot i of the source holds E_{i+1}; it goes to slot i+1 (E_f to slot 0 through phi)
    PMat M(K, f * r, f * r);
    for (int i = 0; i + 1 < f; ++i) M.set_block((i + 1) * r, i * r, PMat::identity(K, r));
    M.set_block(0, (f - 1) * r, T.phi[c]);
    phit.push_back(ds.P * M * Psig.transpose() * Cc);
  }

  std::vector<LPoly> sd;
  for (int i = 0; i < f; ++i)
    for (int j = 0; j < r; ++j) sd.push_back(LPoly::constant(K, gf_conjugate(K, xi, i)));
  PMat s = ds.P * PMat::diag(sd) * ds.P.transpose();

  PackedTuple out{PeriodicTuple{ds.G, {filG}, phit, T.atlas}, std::vector<PMat>(charts, s), xi, f, {}, false, false};
  for (int i = 0; i < f; ++i) out.slot_ranks.push_back(slots[i].rank());
  out.companion_identity = true;
  for (int c = 0; c < charts; ++c) out.companion_identity = out.companion_identity && companion_identity(T.phi[c], xi, f);

  bool endo = verify_tuple(out.T);
  for (int c = 0; c < charts; ++c) endo = endo && s * ds.G.H.theta[c] == ds.G.H.theta[c] * s;
  if (C.projective()) endo = endo && s * ds.G.H.E.g == ds.G.H.E.g * s;
  PMat Fs = frobenius_twist(s);
  for (auto& st : filG.steps) endo = endo && (st.rank() == 0 || contains(st, saturate(HG.E, Fs * st.gens[0])));
  auto grFs = regrade({HG, filG}, {HG, filG}, std::vector<PMat>(charts, Fs));
  for (int c = 0; c < charts; ++c) endo = endo && phit[c] * grFs[c] == s * phit[c];
  out.endomorphism = endo;
  return out;
}

Unpacked unpack_endostructure(const PeriodicTuple& T1, const std::vector<PMat>& s, i64 xi, int f) {
  if (T1.period() != 1) throw ContractViolation("unpack expects a one-periodic tuple");
  const GradedHiggsBundle& G = T1.E;
  const Curve& C = G.curve();
  const Ring& K = C.ring();
  const int charts = C.charts();
  const int n = G.rank();
  auto m = minimal_polynomial(K, xi, f);
  for (int c = 0; c < charts; ++c)
    if (!mat_pow_sum(m, s[c]).is_zero()) throw BadMinimalPolynomial("the minimal polynomial of xi does not kill s");
  for (int c = 0; c < charts; ++c) {
    if (s[c] * G.H.theta[c] != G.H.theta[c] * s[c]) throw ContractViolation("s does not commute with theta");
    if (graded_part(s[c], G.ranks) != s[c]) throw ContractViolation("s does not preserve the grading");
  }
  if (C.projective() && s[1].swap_var() * G.H.E.g != G.H.E.g * s[0]) throw ContractViolation("s is not a bundle map");

  std::vector<i64> lam;
  for (int i = 0; i < f; ++i) lam.push_back(gf_conjugate(K, xi, i));
  const auto off = offsets(G.ranks);
  const int W = G.weight();

  struct Piece {
    GradedHiggsBundle E;
    std::vector<PMat> emb, proj;
  };
  std::vector<Piece> pieces;
  for (int i = 0; i < f; ++i) {
    std::vector<PMat> pi;
    for (int c = 0; c < charts; ++c) {
      PMat P = PMat::identity(K, n);
      for (int j = 0; j < f; ++j) {
        if (j == i) continue;
        i64 d = K.inv(K.sub(lam[i], lam[j]));
        P = P * (s[c] - PMat::identity(K, n).scale(lam[j])).scale(d);
      }
      pi.push_back(P);
    }
    std::vector<int> ranks;
    std::vector<PMat> gblocks;
    std::vector<std::vector<PMat>> eb(charts), lb(charts);
    for (int k = 0; k <= W; ++k) {
      Bundle Ek = G.piece(k);
      PMat blk = pi[0].block(off[k], off[k], G.ranks[k], G.ranks[k]);
      Subbundle Sk = blk.is_zero() || G.ranks[k] == 0 ? zero_subbundle(Ek) : saturate(Ek, blk);
      ranks.push_back(Sk.rank());
      if (Sk.rank() > 0) gblocks.push_back(sub_bundle(Ek, Sk).g);
      for (int c = 0; c < charts; ++c) {
        eb[c].push_back(Sk.gens[c]);
        if (Sk.rank() > 0) {
          auto cs = split_chart(Sk.gens[c], c == 0 ? (C.kind == CurveKind::Torus ? CurveKind::Torus : CurveKind::AffineLine)
                                                   : CurveKind::AffineLine);
          lb[c].push_back(cs.L);
        } else {
          lb[c].push_back(PMat(K, 0, G.ranks[k]));
        }
      }
    }
    Piece pc{GradedHiggsBundle{HiggsBundle{Bundle::trivial(C, 1), {}}, ranks}, {}, {}};
    for (int c = 0; c < charts; ++c) {
      pc.emb.push_back(PMat::blockdiag(K, eb[c]));
      pc.proj.push_back(PMat::blockdiag(K, lb[c]) * pi[c]);
    }
    int ri = pc.emb[0].cols();
    Bundle Ei = C.projective() ? Bundle(C, PMat::blockdiag(K, gblocks)) : Bundle::trivial(C, ri);
    std::vector<PMat> th;
    for (int c = 0; c < charts; ++c) th.push_back(PMat::blockdiag(K, lb[c]) * G.H.theta[c] * pc.emb[c]);
    pc.E = GradedHiggsBundle{HiggsBundle{Ei, th}, ranks};
    pieces.push_back(std::move(pc));
  }

  FlatBundle HG = inverse_cartier_1(G.H, T1.atlas);
  const HodgeFiltration& Fil = T1.fils[0];
  std::vector<FlatBundle> Hs;
  std::vector<HodgeFiltration> Fs;
  std::vector<std::vector<PMat>> chi;  // Gr(C^{-1} G_i, Fil_i) -> G_{i+1}
  for (int i = 0; i < f; ++i) {
    FlatBundle Hi = inverse_cartier_1(pieces[i].E.H, T1.atlas);
    auto Fp = frobenius_twist(pieces[i].proj);
    HodgeFiltration Fi;
    for (auto& st : Fil.steps) {
      PMat gens = st.rank() == 0 ? PMat(K, Hi.E.rank(), 0) : Fp[0] * st.gens[0];
      bool zero = gens.cols() == 0 || gens.is_zero();
      Fi.steps.push_back(zero ? zero_subbundle(Hi.E) : saturate(Hi.E, gens));
    }
    auto into = regrade({Hi, Fi}, {HG, Fil}, frobenius_twist(pieces[i].emb));
    const Piece& nxt = pieces[(i + 1) % f];
    std::vector<PMat> ch;
    for (int c = 0; c < charts; ++c) ch.push_back(nxt.proj[c] * T1.phi[c] * into[c]);
    Hs.push_back(Hi);
    Fs.push_back(Fi);
    chi.push_back(ch);
  }

  PeriodicTuple out{pieces[0].E, {}, {}, T1.atlas};
  GradedHiggsBundle cur = pieces[0].E;
  std::vector<PMat> psi(charts, PMat::identity(K, cur.rank()));
  for (int i = 0; i < f; ++i) {
    FlatBundle H = inverse_cartier_1(cur.H, T1.atlas);
    auto Psi = frobenius_twist(psi);
    HodgeFiltration Fi = pull_filtration(H, Psi, Fs[i]);
    GradedHiggsBundle next = checked_grade({H, Fi});
    auto rg = regrade({H, Fi}, {Hs[i], Fs[i]}, Psi);
    for (int c = 0; c < charts; ++c) psi[c] = chi[i][c] * rg[c];
    out.fils.push_back(Fi);
    cur = next;
  }
  out.phi = psi;
  Unpacked res{out, {}};
  for (auto& pc : pieces) res.embed.push_back(pc.emb);
  return res;
}

// ---- relative Frobenius -------------------------------------------------------------------------

FrobeniusCertificate build_relative_frobenius(const PeriodicTuple& T, const LiftingAtlas& other) {
  if (T.period() != 1) throw ContractViolation("relative Frobenius needs a one-periodic tuple");
  FrobeniusCertificate cert;
  auto S = unfold(T);
  const FlatBundle& H = S.H[0];
  const FlatBundle& HGr = S.H[1];
  const Curve& C = T.E.curve();
  cert.Phi = frobenius_twist(T.phi);
  cert.invertible = true;
  cert.horizontal = true;
  for (int c = 0; c < C.charts(); ++c) {
    const PMat& P = cert.Phi[c];
    if (!C.in_chart_ring(P, c) || !chart_unit(det(P), C)) cert.invertible = false;
    if (!(P.derivative() + H.A[c] * P - P * HGr.A[c]).is_zero()) cert.horizontal = false;
  }
  cert.taylor = true;
  if (C.projective() && cert.Phi[1].swap_var() * HGr.E.g != H.E.g * cert.Phi[0]) cert.taylor = false;
  auto TE = atlas_change_iso(T.E.H, T.atlas, other);
  auto TG = atlas_change_iso(S.E[1].H, T.atlas, other);
  for (int c = 0; c < C.charts(); ++c)
    if (TE[c] * cert.Phi[c] != cert.Phi[c] * TG[c]) cert.taylor = false;
  if (!cert.invertible) cert.failure = "invertibility";
  else if (!cert.horizontal) cert.failure = "horizontality";
  else if (!cert.taylor) cert.failure = "Taylor compatibility";
  return cert;
}

}  // namespace hdf
