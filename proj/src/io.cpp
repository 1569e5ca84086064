#include "hdf/io.hpp"

#include <openssl/evp.h>

#include <cstdio>

namespace hdf::io {

namespace {

[[noreturn]] void fail(const std::string& at, const std::string& msg) { throw InputError("MalformedInput", at, msg); }

std::string child(const std::string& at, const std::string& key) { return at + "/" + key; }
std::string child(const std::string& at, std::size_t i) { return at + "/" + std::to_string(i); }

const json& field(const json& j, const std::string& key, const std::string& at) {
  if (!j.is_object()) fail(at, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) fail(child(at, key), "missing field");
  return *it;
}

i64 int_from(const json& j, const std::string& at) {
  if (!j.is_number_integer()) fail(at, "expected an integer");
  return j.get<i64>();
}

std::vector<int> ints_from(const json& j, const std::string& at) {
  if (!j.is_array()) fail(at, "expected an array");
  std::vector<int> v;
  for (std::size_t i = 0; i < j.size(); ++i) v.push_back(static_cast<int>(int_from(j[i], child(at, i))));
  return v;
}

const char* kind_name(CurveKind k) {
  switch (k) {
    case CurveKind::AffineLine: return "A1";
    case CurveKind::Torus: return "Gm";
    default: return "P1";
  }
}

// library errors raised while assembling an object are reported at that object
template <class F>
decltype(auto) located(const std::string& at, F&& build) {
  try {
    return build();
  } catch (const InputError&) {
    throw;
  } catch (const Error& e) {
    throw InputError(e.kind(), at, e.what());
  }
}

Bundle bundle_from(const json& j, const std::string& at) {
  Curve C = curve_from(field(j, "curve", at), child(at, "curve"));
  PMat g = mat_from(field(j, "g", at), C.ring(), child(at, "g"));
  if (g.rows() != g.cols()) fail(child(at, "g"), "transition must be square");
  return located(at, [&] {
    if (!C.projective() && g != PMat::identity(C.ring(), g.rows()))
      throw ContractViolation("one-chart curves carry the identity transition");
    if (C.projective() && !is_invertible_laurent(g)) throw NonInvertible("transition is not invertible");
    return Bundle(C, g);
  });
}

// chart-0 matrix plus an optional chart-1 copy that must agree with the transition
std::vector<PMat> chart_family(const json& j, const Bundle& E, const std::string& at,
                               PMat (*chart1)(const Bundle&, const PMat&)) {
  auto Ms = mats_from(j, E.ring(), at);
  if (Ms.empty()) fail(at, "expected at least one chart matrix");
  for (std::size_t i = 0; i < Ms.size(); ++i)
    if (Ms[i].rows() != E.rank() || Ms[i].cols() != E.rank()) fail(child(at, i), "size does not match the rank");
  if (static_cast<int>(Ms.size()) > E.curve.charts()) fail(at, "more chart matrices than charts");
  if (!E.curve.projective()) return Ms;
  PMat M1 = located(at, [&] { return chart1(E, Ms[0]); });
  if (Ms.size() == 2 && Ms[1] != M1) throw InputError("ContractViolation", child(at, 1), "chart-1 matrix does not glue");
  return {Ms[0], M1};
}

}  // namespace

// ---- writers -------------------------------------------------------------------------

json to_json(const Ring& R) {
  json j{{"p", R.p()}};
  if (R.is_galois()) {
    j["f"] = R.f();
    j["modulus"] = R.modulus();
  } else {
    j["m"] = R.m();
  }
  return j;
}

json to_json(const Curve& C) { return json{{"kind", kind_name(C.kind)}, {"ring", to_json(C.ring())}}; }

json to_json(const LPoly& f) { return json{{"lo", f.lo()}, {"c", f.coeffs()}}; }

json to_json(const PMat& M) {
  json rows = json::array();
  for (int i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (int k = 0; k < M.cols(); ++k) row.push_back(to_json(M(i, k)));
    rows.push_back(row);
  }
  return rows;
}

json to_json(const std::vector<PMat>& Ms) {
  json a = json::array();
  for (auto& M : Ms) a.push_back(to_json(M));
  return a;
}

json to_json(const Rational& q) {
  return q.denominator() == 1 ? std::to_string(q.numerator())
                              : std::to_string(q.numerator()) + "/" + std::to_string(q.denominator());
}

json to_json(const Bundle& E) { return json{{"curve", to_json(E.curve)}, {"g", to_json(E.g)}}; }

json to_json(const HiggsBundle& H) {
  json j = to_json(H.E);
  j["theta"] = to_json(H.theta);
  return j;
}

json to_json(const FlatBundle& F) {
  json j = to_json(F.E);
  j["A"] = to_json(F.A);
  return j;
}

json to_json(const GradedHiggsBundle& G) {
  json j = to_json(G.H);
  j["ranks"] = G.ranks;
  return j;
}

json to_json(const HodgeFiltration& F) {
  json steps = json::array();
  for (auto& S : F.steps) steps.push_back(to_json(S.gens));
  return json{{"steps", steps}};
}

json to_json(const DeRhamBundle& D) { return json{{"flat", to_json(D.V)}, {"filtration", to_json(D.fil)}}; }

json to_json(const LiftingAtlas& A) {
  json hs = json::array();
  const Ring& R = A.curve.ring();
  for (auto& L : A.lifts) {
    LPoly tp = LPoly::monomial(A.lift_ring(), 1, static_cast<int>(R.p()));
    hs.push_back(to_json(div_p_into(L.image - tp, 1, R)));
  }
  return json{{"h", hs}};
}

json to_json(const FlowTrace& T) {
  json j;
  json E = json::array(), H = json::array(), fil = json::array(), mu = json::array(), bmu = json::array();
  for (auto& G : T.E) E.push_back(to_json(G));
  for (auto& F : T.H) H.push_back(to_json(F));
  for (auto& F : T.fil) fil.push_back(to_json(F));
  for (auto& q : T.mu_max) mu.push_back(to_json(q));
  for (auto& q : T.bundle_mu_max) bmu.push_back(to_json(q));
  j["E"] = E;
  j["H"] = H;
  j["fil"] = fil;
  j["degrees"] = T.degrees;
  j["mu_max"] = mu;
  j["bundle_mu_max"] = bmu;
  json ss = json::array();
  for (bool b : T.semistable) ss.push_back(b);
  j["semistable"] = ss;
  j["degree_scaling"] = T.degree_scaling;
  j["semistability_preserved"] = T.semistability_preserved;
  j["stopped"] = T.stopped;
  if (T.period)
    j["period"] = json{{"e", T.period->e}, {"f", T.period->f}, {"phi", to_json(T.period->phi.phi)}};
  else
    j["period"] = nullptr;
  return j;
}

json to_json(const PConnectionModule& M) {
  json j = to_json(M.E);
  j["B"] = to_json(M.B);
  j["level"] = M.level;
  return j;
}

json to_json(const LiftingInputTuple& T) {
  json j{{"E", to_json(T.E)}};
  if (T.Hbar) j["Hbar"] = json{{"flat", to_json(T.Hbar->H)}, {"ranks", T.Hbar->ranks}};
  return j;
}

// ---- readers ---------------------------------------------------------------------------

const Ring& ring_from(const json& j, const std::string& at) {
  const i64 p = int_from(field(j, "p", at), child(at, "p"));
  if (p < 2 || p > 1000 || !is_prime(p)) fail(child(at, "p"), "p must be a prime below 1000");
  if (j.contains("f")) {
    const i64 f = int_from(j["f"], child(at, "f"));
    if (f < 1 || f > 8) fail(child(at, "f"), "field degree out of range");
    if (j.contains("modulus")) {
      std::vector<i64> mod;
      const json& mj = j["modulus"];
      if (!mj.is_array()) fail(child(at, "modulus"), "expected an array");
      for (std::size_t i = 0; i < mj.size(); ++i) mod.push_back(int_from(mj[i], child(child(at, "modulus"), i)));
      return located(child(at, "modulus"), [&]() -> const Ring& { return Ring::gf(p, static_cast<int>(f), mod); });
    }
    return Ring::gf(p, static_cast<int>(f));
  }
  const i64 m = j.contains("m") ? int_from(j["m"], child(at, "m")) : 1;
  if (m < 1 || m > 6) fail(child(at, "m"), "modulus power out of range");
  return Ring::zmod(p, static_cast<int>(m));
}

Curve curve_from(const json& j, const std::string& at) {
  const json& k = field(j, "kind", at);
  if (!k.is_string()) fail(child(at, "kind"), "expected a string");
  const std::string s = k.get<std::string>();
  CurveKind kind;
  if (s == "P1")
    kind = CurveKind::ProjectiveLine;
  else if (s == "A1")
    kind = CurveKind::AffineLine;
  else if (s == "Gm")
    kind = CurveKind::Torus;
  else
    fail(child(at, "kind"), "unknown curve kind '" + s + "'");
  return Curve{kind, &ring_from(field(j, "ring", at), child(at, "ring"))};
}

LPoly poly_from(const json& j, const Ring& R, const std::string& at) {
  auto elem = [&](const json& x, const std::string& where) {
    const i64 c = int_from(x, where);
    if (c < 0 || c >= R.size()) fail(where, "coefficient outside [0, " + std::to_string(R.size()) + ")");
    return c;
  };
  if (j.is_number_integer()) return LPoly::constant(R, elem(j, at));
  const i64 lo = int_from(field(j, "lo", at), child(at, "lo"));
  const json& c = field(j, "c", at);
  if (!c.is_array()) fail(child(at, "c"), "expected an array");
  if (lo < -10000 || lo > 10000 || c.size() > 20000) fail(at, "exponents out of range");
  std::vector<i64> cs;
  for (std::size_t i = 0; i < c.size(); ++i) cs.push_back(elem(c[i], child(child(at, "c"), i)));
  return LPoly(R, static_cast<int>(lo), cs);
}

PMat mat_from(const json& j, const Ring& R, const std::string& at) {
  if (!j.is_array()) fail(at, "expected an array of rows");
  const int r = static_cast<int>(j.size());
  int c = -1;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array()) fail(child(at, i), "expected a row");
    if (c < 0) c = static_cast<int>(j[i].size());
    if (static_cast<int>(j[i].size()) != c) fail(child(at, i), "ragged row");
  }
  PMat M(R, r, std::max(c, 0));
  for (int i = 0; i < r; ++i)
    for (int k = 0; k < c; ++k) M(i, k) = poly_from(j[i][k], R, child(child(at, i), k));
  return M;
}

std::vector<PMat> mats_from(const json& j, const Ring& R, const std::string& at) {
  if (!j.is_array()) fail(at, "expected an array of matrices");
  std::vector<PMat> v;
  for (std::size_t i = 0; i < j.size(); ++i) v.push_back(mat_from(j[i], R, child(at, i)));
  return v;
}

HiggsBundle higgs_from(const json& j, const std::string& at) {
  Bundle E = bundle_from(j, at);
  auto th = chart_family(field(j, "theta", at), E, child(at, "theta"), &higgs_chart1);
  return HiggsBundle{E, th};
}

FlatBundle flat_from(const json& j, const std::string& at) {
  Bundle E = bundle_from(j, at);
  auto A = chart_family(field(j, "A", at), E, child(at, "A"), &flat_chart1);
  return FlatBundle{E, A};
}

GradedHiggsBundle graded_from(const json& j, const std::string& at) {
  HiggsBundle H = higgs_from(j, at);
  auto ranks = ints_from(field(j, "ranks", at), child(at, "ranks"));
  int total = 0;
  for (int r : ranks) {
    if (r < 0) fail(child(at, "ranks"), "negative rank");
    total += r;
  }
  if (ranks.empty() || total != H.E.rank()) fail(child(at, "ranks"), "ranks do not sum to the rank");
  return located(at, [&] {
    GradedHiggsBundle G = make_graded(H.E, ranks, H.theta[0]);
    if (!is_graded_valid(G)) throw ContractViolation("theta is not of degree -1 for the grading");
    return G;
  });
}

HodgeFiltration filtration_from(const json& j, const Curve& C, const std::string& at) {
  const json& steps = field(j, "steps", at);
  if (!steps.is_array()) fail(child(at, "steps"), "expected an array");
  HodgeFiltration F;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const std::string w = child(child(at, "steps"), i);
    auto gens = mats_from(steps[i], C.ring(), w);
    if (static_cast<int>(gens.size()) != C.charts()) fail(w, "one basis per chart expected");
    for (std::size_t c = 1; c < gens.size(); ++c)
      if (gens[c].cols() != gens[0].cols()) fail(child(w, c), "rank differs between charts");
    F.steps.push_back(Subbundle{gens});
  }
  return F;
}

DeRhamBundle de_rham_from(const json& j, const std::string& at) {
  FlatBundle V = flat_from(field(j, "flat", at), child(at, "flat"));
  HodgeFiltration F = filtration_from(field(j, "filtration", at), V.E.curve, child(at, "filtration"));
  for (std::size_t i = 0; i < F.steps.size(); ++i)
    for (auto& g : F.steps[i].gens)
      if (g.rows() != V.E.rank()) fail(child(child(at, "filtration/steps"), i), "basis size does not match the rank");
  return DeRhamBundle{V, F};
}

LiftingAtlas atlas_from(const json& j, const Curve& C, const std::string& at) {
  auto hs_j = field(j, "h", at);
  if (!hs_j.is_array() || static_cast<int>(hs_j.size()) != C.charts()) fail(child(at, "h"), "one h per chart expected");
  std::vector<LPoly> hs;
  for (std::size_t i = 0; i < hs_j.size(); ++i) hs.push_back(poly_from(hs_j[i], C.ring(), child(child(at, "h"), i)));
  return located(at, [&] { return make_atlas(C, hs); });
}

LiftingInputTuple tuple_from(const json& j, const std::string& at) {
  GradedHiggsBundle E = graded_from(field(j, "E", at), child(at, "E"));
  if (E.H.E.ring().m() == 1 && !j.contains("Hbar") && !j.contains("user"))
    return located(at, [&] { return first_level_tuple(E); });
  if (j.contains("user")) {
    DeRhamBundle D = de_rham_from(j["user"], child(at, "user"));
    auto psi = mats_from(field(j, "psibar", at), D.V.E.ring(), child(at, "psibar"));
    return located(at, [&] { return make_lifting_tuple(E, D, psi); });
  }
  const json& hb = field(j, "Hbar", at);
  FlatBundle H = flat_from(field(hb, "flat", child(at, "Hbar")), child(at, "Hbar/flat"));
  auto ranks = ints_from(field(hb, "ranks", child(at, "Hbar")), child(at, "Hbar/ranks"));
  return located(at, [&] { return make_lifting_tuple(E, FilteredConnection{H, ranks}); });
}

// ---- documents ------------------------------------------------------------------------

json document(const std::string& type, json payload) {
  json j{{"schema", kSchema}, {"type", type}};
  for (auto& [k, v] : payload.items()) j[k] = v;
  return j;
}

json parse_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError("MalformedInput", "", std::string("byte ") + std::to_string(e.byte) + ": JSON syntax error");
  }
}

void expect_document(const json& j, const std::string& type) {
  if (!j.is_object()) fail("", "expected an object");
  const json& s = field(j, "schema", "");
  if (!s.is_string() || s.get<std::string>() != kSchema) fail("/schema", std::string("expected \"") + kSchema + "\"");
  if (type.empty()) return;
  const json& t = field(j, "type", "");
  if (!t.is_string() || t.get<std::string>() != type) fail("/type", "expected \"" + type + "\"");
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr);
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

}  // namespace hdf::io
