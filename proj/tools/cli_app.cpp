#include "cli_app.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "hdf/cartier.hpp"
#include "hdf/filtration.hpp"
#include "hdf/flow.hpp"
#include "hdf/generate.hpp"
#include "hdf/io.hpp"
#include "hdf/witt.hpp"
#include "hdf/witt_generate.hpp"

namespace hdf::cli {

namespace fs = std::filesystem;
using io::json;

namespace {

struct Options {
  std::string in;
  std::string out;
  std::optional<int> p;
  std::optional<int> m;
  int f = 1;
  int steps = 3;
  std::string policy;
  std::uint64_t seed = 1;
  std::optional<long long> budget;
  // check / gen-corpus
  std::string suite;
  int rank = 2;
  int weight = 1;
  int count = 10;
  int max_exp = 2;
};

struct Check {
  std::string name;
  bool pass = true;
  json counterexample = nullptr;
};

struct Result {
  std::string file;  // output name inside --out
  json doc;
  std::vector<Check> checks;
  std::vector<std::pair<std::string, json>> extra_files;
};

long long resolve_budget(const Options& o, long long fallback) {
  if (o.budget) return *o.budget;
  if (const char* env = std::getenv("HDF_BUDGET")) {
    char* end = nullptr;
    long long v = std::strtoll(env, &end, 10);
    if (end && *end == '\0' && v > 0) return v;
    throw ContractViolation("HDF_BUDGET must be a positive integer");
  }
  return fallback;
}

std::string read_input(const std::string& path) {
  if (path.empty()) throw ContractViolation("--in is required");
  std::ostringstream ss;
  if (path == "-") {
    ss << std::cin.rdbuf();
  } else {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ContractViolation("cannot read " + path);
    ss << f.rdbuf();
  }
  return ss.str();
}

void write_atomic(const fs::path& path, const std::string& bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw ContractViolation("cannot write " + tmp.string());
    f << bytes;
    if (!f.flush()) throw ContractViolation("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

void require_ring(const Options& o, const Ring& R) {
  if (o.p && *o.p != R.p())
    throw ContractViolation("--p " + std::to_string(*o.p) + " does not match the input (p = " + std::to_string(R.p()) + ")");
  if (o.m && *o.m != R.m())
    throw ContractViolation("--modulus-power " + std::to_string(*o.m) + " does not match the input (m = " +
                            std::to_string(R.m()) + ")");
}

json checks_json(const std::vector<Check>& cs) {
  json a = json::array();
  for (auto& c : cs) {
    json j{{"name", c.name}, {"pass", c.pass}};
    if (!c.counterexample.is_null()) j["counterexample"] = c.counterexample;
    a.push_back(j);
  }
  return a;
}

LiftingAtlas atlas_or_default(const json& doc, const Curve& C, const std::string& at) {
  if (doc.contains("atlas")) return io::atlas_from(doc["atlas"], C, at + "/atlas");
  return default_atlas(C);
}

// ---- flow run ------------------------------------------------------------------------

FilPolicy parse_policy(const std::string& s, const Curve& C) {
  if (s.empty()) return C.projective() ? FilPolicy::Canonical : FilPolicy::GradeInduced;
  if (s == "canonical") return FilPolicy::Canonical;
  if (s == "grade-induced") return FilPolicy::GradeInduced;
  if (s == "supplied") return FilPolicy::Supplied;
  throw ContractViolation("unknown policy '" + s + "'");
}

Result flow_run(const Options& o, const json& doc) {
  io::expect_document(doc);
  const std::string type = doc.value("type", "");
  json ej;
  std::string at;
  if (type == "graded_higgs") {
    ej = doc;
  } else if (type == "flow_input") {
    if (!doc.contains("E")) throw io::InputError("MalformedInput", "/E", "missing field");
    ej = doc["E"];
    at = "/E";
  } else {
    throw io::InputError("MalformedInput", "/type", "expected \"graded_higgs\" or \"flow_input\"");
  }
  GradedHiggsBundle G = io::graded_from(ej, at);
  require_ring(o, G.H.E.ring());
  if (o.steps < 0 || o.steps > 64) throw ContractViolation("--steps must be in 0..64");
  FlowPolicy pol;
  pol.rule = parse_policy(o.policy, G.curve());
  if (pol.rule == FilPolicy::Canonical && !G.curve().projective())
    throw ContractViolation("the canonical policy needs P^1");
  pol.max_steps = o.steps;
  pol.iso.field_degree = o.f;
  pol.iso.seed = o.seed;
  pol.iso.budget = resolve_budget(o, pol.iso.budget);
  if (doc.contains("supplied")) {
    const json& s = doc["supplied"];
    if (!s.is_array()) throw io::InputError("MalformedInput", "/supplied", "expected an array");
    for (std::size_t i = 0; i < s.size(); ++i)
      pol.supplied.push_back(io::filtration_from(s[i], G.curve(), "/supplied/" + std::to_string(i)));
  }
  LiftingAtlas A = atlas_or_default(doc, G.curve(), "");
  FlowTrace T = run_flow(G, pol, A);

  Result r;
  r.file = "trace.json";
  r.checks.push_back({"degree_scaling", T.degree_scaling, T.degree_scaling ? json(nullptr) : json{{"degrees", T.degrees}}});
  if (G.curve().projective())
    r.checks.push_back({"semistability_preserved", T.semistability_preserved,
                        T.semistability_preserved ? json(nullptr) : io::to_json(T).at("semistable")});
  r.checks.push_back({"completed", T.stopped.empty(), T.stopped.empty() ? json(nullptr) : json{{"stopped", T.stopped}}});
  json certs = json::array();
  const std::size_t done = std::min({T.H.size(), T.fil.size(), T.E.size() - 1});
  for (std::size_t i = 0; i < done; ++i) {
    const Ring& R = T.H[i].E.ring();
    bool curv = true;
    auto psi = p_curvature(T.H[i]);
    for (int c = 0; c < G.curve().charts(); ++c)
      curv = curv && psi[c] == pulled_theta(T.E[i].H, c).scale(R.from_int(kPCurvatureSign));
    const bool glue = flat_charts_compatible(T.H[i]);
    const bool transversal = is_transversal(DeRhamBundle{T.H[i], T.fil[i]});
    const bool graded = is_graded_valid(T.E[i + 1]);
    const std::string s = "step " + std::to_string(i) + ": ";
    r.checks.push_back({s + "p_curvature", curv});
    r.checks.push_back({s + "gluing", glue});
    r.checks.push_back({s + "transversal", transversal});
    r.checks.push_back({s + "graded", graded});
    certs.push_back(json{{"step", i}, {"p_curvature", curv}, {"gluing", glue}, {"transversal", transversal},
                         {"graded", graded}});
  }
  if (T.period) {
    const bool ok = verify_graded_iso(T.E[T.period->e + T.period->f], T.E[T.period->e], T.period->phi.phi);
    r.checks.push_back({"period_certificate", ok});
  }
  json tj = io::to_json(T);
  tj["certificates"] = certs;
  tj["checks"] = checks_json(r.checks);
  r.doc = io::document("flow_trace", tj);
  return r;
}

// ---- cartier apply -------------------------------------------------------------------

Result cartier_apply(const Options& o, const json& doc) {
  io::expect_document(doc);
  const std::string type = doc.value("type", "");
  HiggsBundle H = [&] {
    if (type == "graded_higgs") return io::graded_from(doc).H;
    if (type == "higgs") return io::higgs_from(doc);
    if (type == "cartier_input") {
      if (!doc.contains("H")) throw io::InputError("MalformedInput", "/H", "missing field");
      const json& h = doc["H"];
      return h.contains("ranks") ? io::graded_from(h, "/H").H : io::higgs_from(h, "/H");
    }
    throw io::InputError("MalformedInput", "/type", "expected \"higgs\", \"graded_higgs\" or \"cartier_input\"");
  }();
  require_ring(o, H.E.ring());
  std::vector<int> ranks;
  if (type == "graded_higgs") ranks = doc["ranks"].get<std::vector<int>>();
  LiftingAtlas A = atlas_or_default(doc, H.E.curve, "");
  FlatBundle F = inverse_cartier_1(H, A);

  Result r;
  r.file = "cartier.json";
  const Ring& R = H.E.ring();
  auto psi = p_curvature(F);
  bool curv = true;
  for (int c = 0; c < H.E.curve.charts(); ++c)
    curv = curv && psi[c] == pulled_theta(H, c).scale(R.from_int(kPCurvatureSign));
  r.checks.push_back({"p_curvature", curv});
  r.checks.push_back({"gluing", flat_charts_compatible(F)});
  if (H.E.curve.projective()) {
    const bool ok = degree(F.E) == R.p() * degree(H.E);
    r.checks.push_back({"degree_scaling", ok, ok ? json(nullptr) : json{{"in", degree(H.E)}, {"out", degree(F.E)}}});
  }
  OVReport ov = ov_sign_check({H, A}, ranks);
  r.checks.push_back({"ov_sign", ov.ok(), ov.ok() ? json(nullptr) : json{{"detail", ov.detail}}});
  json j{{"flat", io::to_json(F)}, {"atlas", io::to_json(A)}, {"p_curvature", io::to_json(psi)}};
  j["checks"] = checks_json(r.checks);
  r.doc = io::document("cartier_output", j);
  return r;
}

// ---- filtration compute ---------------------------------------------------------------

Result filtration_compute(const Options& o, const json& doc) {
  io::expect_document(doc, "flat");
  FlatBundle V = io::flat_from(doc);
  require_ring(o, V.E.ring());
  const int max_iter = static_cast<int>(resolve_budget(o, 64));
  SimpsonResult S = simpson_filtration(V, max_iter);
  Result r;
  r.file = "filtration.json";
  r.checks.push_back({"monotone", S.cert.monotone});
  r.checks.push_back({"window_descent", S.cert.window_descent});
  r.checks.push_back({"exact_sequences", S.cert.exact_sequences});
  r.checks.push_back({"transversal", S.cert.transversal});
  r.checks.push_back({"terminal_semistable", S.cert.terminal_semistable,
                      S.cert.terminal_semistable ? json(nullptr) : json{{"detail", S.cert.detail}}});
  json log = json::array();
  for (auto& e : S.log)
    log.push_back(json{{"step", e.step},
                       {"level", e.level},
                       {"reduced_level", e.reduced_level},
                       {"mu_max", io::to_json(e.mu_max)},
                       {"r_max", e.r_max},
                       {"semistable", e.semistable}});
  json j{{"filtration", io::to_json(S.fil)}, {"graded", io::to_json(S.graded)}, {"iterations", S.iterations},
         {"log", log}};
  j["checks"] = checks_json(r.checks);
  r.doc = io::document("simpson_filtration", j);
  return r;
}

// ---- witt ----------------------------------------------------------------------------------

Result witt_lift(const Options& o, const json& doc) {
  io::expect_document(doc, "lifting_tuple");
  LiftingInputTuple T = io::tuple_from(doc);
  require_ring(o, T.E.H.E.ring());
  TwistedFlatModule S = sharp_construct(T);
  Result r;
  r.file = "lift.json";
  json j;
  j["sharp"] = io::to_json(S.pconn);
  r.checks.push_back({"sharp_level", has_level(S.pconn, S.pconn.level)});
  GammaReport gs = gamma_relations_check(S, o.seed);
  r.checks.push_back({"sharp_gamma_relations", gs.ok(), gs.ok() ? json(nullptr) : json{{"detail", gs.first_failure}}});
  if (T.Hbar) {
    FilteredConnection L = local_filtered_lifting(T);
    TwistedFlatModule Gn = gn_construct(L);
    j["filtered_lifting"] = json{{"flat", io::to_json(L.H)}, {"ranks", L.ranks}};
    j["gn"] = io::to_json(Gn.pconn);
    GammaReport gg = gamma_relations_check(Gn, o.seed);
    r.checks.push_back({"gn_gamma_relations", gg.ok(), gg.ok() ? json(nullptr) : json{{"detail", gg.first_failure}}});
    Equivalence eq = equivalence_check(Gn, S, 2, o.seed);
    r.checks.push_back({"equivalence", eq.ok()});
    if (eq.ok()) j["lambda"] = io::to_json(eq.lambda);
  }
  LiftingAtlas A = atlas_or_default(doc, T.E.curve(), "");
  FlatBundle H = cn_inverse(T, A);
  j["cn_inverse"] = io::to_json(H);
  r.checks.push_back({"gluing", flat_charts_compatible(H)});
  if (T.n() >= 2) r.checks.push_back({"mod_reduction", mod_reduction_check(T, A).ok});
  j["checks"] = checks_json(r.checks);
  r.doc = io::document("witt_lift", j);
  return r;
}

Result witt_flow_step(const Options& o, const json& doc) {
  io::expect_document(doc, "witt_flow_step_input");
  if (!doc.contains("tuple")) throw io::InputError("MalformedInput", "/tuple", "missing field");
  LiftingInputTuple T = io::tuple_from(doc["tuple"], "/tuple");
  require_ring(o, T.E.H.E.ring());
  const Curve& C = T.E.curve();
  for (const char* k : {"fil", "filbar"})
    if (!doc.contains(k)) throw io::InputError("MalformedInput", std::string("/") + k, "missing field");
  HodgeFiltration fil = io::filtration_from(doc["fil"], C, "/fil");
  HodgeFiltration filbar = io::filtration_from(doc["filbar"], C.with_ring(Ring::zmod(C.p(), 1)), "/filbar");
  LiftingAtlas A = atlas_or_default(doc, C, "");
  WittStep st = w2_flow_step(T, fil, filbar, A);
  Result r;
  r.file = "flow_step.json";
  r.checks.push_back({"graded", is_graded_valid(st.next)});
  r.checks.push_back({"gluing", flat_charts_compatible(st.H)});
  if (st.psi) r.checks.push_back({"psi_certificate", verify_graded_iso(st.next, T.E, *st.psi)});
  json j{{"H", io::to_json(st.H)}, {"frames", io::to_json(st.frames)}, {"next", io::to_json(st.next)}};
  j["one_periodic"] = st.psi.has_value();
  j["psi"] = st.psi ? io::to_json(*st.psi) : json(nullptr);
  j["checks"] = checks_json(r.checks);
  r.doc = io::document("witt_flow_step", j);
  return r;
}

// ---- check -----------------------------------------------------------------------------------

struct Tally {
  std::string name;
  int checked = 0;
  int failed = 0;
  json first = nullptr;
  void add(bool ok, const json& witness) {
    ++checked;
    if (!ok && failed++ == 0) first = witness;
  }
};

std::vector<i64> suite_primes(const Options& o) {
  if (o.p) return {*o.p};
  return {3, 5};
}

std::vector<Tally> cocycle_suite(const Options& o, int count) {
  Tally c1{"cocycle_n1"}, i1{"atlas_change_iso_n1"}, c2{"cocycle_n2"}, i2{"atlas_change_iso_n2"};
  Rng g(o.seed);
  auto primes = suite_primes(o);
  for (int k = 0; k < count; ++k) {
    const int n = o.m ? *o.m : 1 + k % 2;
    const i64 p = primes[k % primes.size()];
    json where{{"instance", k}, {"p", p}, {"n", n}};
    if (n == 1) {
      CorpusParams P;
      P.p = static_cast<int>(p);
      P.rank = 2 + k % 2;
      P.weight = 1;
      GradedHiggsBundle G = random_graded(g, P);
      LiftingAtlas a = random_atlas(g, G.curve()), b = random_atlas(g, G.curve()), c = random_atlas(g, G.curve());
      auto ab = atlas_change_iso(G.H, a, b), bc = atlas_change_iso(G.H, b, c), ac = atlas_change_iso(G.H, a, c);
      bool ok = true;
      for (int ch = 0; ch < G.curve().charts(); ++ch) ok = ok && ac[ch] == bc[ch] * ab[ch];
      c1.add(ok, where);
      i1.add(verify_flat_iso(inverse_cartier_1(G.H, a), inverse_cartier_1(G.H, b), ab), where);
    } else if (n == 2) {
      LiftingInputTuple T = random_p1_tuple(g, static_cast<int>(p));
      TwistedFlatModule M = sharp_construct(T);
      LiftingAtlas a = random_atlas(g, M.curve()), b = random_atlas(g, M.curve()), c = random_atlas(g, M.curve());
      auto ab = fn_atlas_change(M, a, b), bc = fn_atlas_change(M, b, c), ac = fn_atlas_change(M, a, c);
      bool ok = true;
      for (int ch = 0; ch < M.curve().charts(); ++ch) ok = ok && ac[ch] == bc[ch] * ab[ch];
      c2.add(ok, where);
      i2.add(verify_flat_iso(fn_apply(M, a), fn_apply(M, b), ab), where);
    } else {
      throw ContractViolation("the cocycle suite runs at modulus power 1 or 2");
    }
  }
  std::vector<Tally> out;
  for (auto* t : {&c1, &i1, &c2, &i2})
    if (t->checked) out.push_back(*t);
  return out;
}

std::vector<Tally> gamma_suite(const Options& o, int count) {
  static const char* names[6] = {"relation_1", "relation_2", "relation_3", "relation_4", "relation_5", "relation_6"};
  std::vector<Tally> rel;
  for (auto* nm : names) rel.push_back(Tally{nm});
  Tally eq{"equivalence"};
  Rng g(o.seed);
  auto primes = suite_primes(o);
  const int n = o.m ? *o.m : 2;
  if (n < 2 || n > 3) throw ContractViolation("the gamma-relations suite runs at modulus power 2 or 3");
  for (int k = 0; k < count; ++k) {
    const i64 p = primes[k % primes.size()];
    const CurveKind kind = k % 3 == 2 ? CurveKind::Torus : CurveKind::AffineLine;
    LiftingInputTuple T = random_chart_tuple(g, p, n, kind);
    TwistedFlatModule S = sharp_construct(T);
    TwistedFlatModule Gn = gn_construct(local_filtered_lifting(T));
    json where{{"instance", k}, {"p", p}, {"n", n}, {"curve", io::to_json(T.E.curve())["kind"]}};
    for (auto* M : {&S, &Gn}) {
      GammaReport rep = gamma_relations_check(*M, o.seed + static_cast<std::uint64_t>(k), 2);
      for (int i = 0; i < 6; ++i) {
        json w = where;
        w["construction"] = M->construction;
        if (!rep.first_failure.empty()) w["detail"] = rep.first_failure;
        rel[i].checked += rep.checked[i];
        if (rep.failed[i] && rel[i].failed == 0) rel[i].first = w;
        rel[i].failed += rep.failed[i];
      }
    }
    eq.add(equivalence_check(Gn, S, 2, o.seed + static_cast<std::uint64_t>(k)).ok(), where);
  }
  rel.push_back(eq);
  return rel;
}

Result check(const Options& o) {
  const int count = static_cast<int>(resolve_budget(o, 12));
  if (count < 1 || count > 10000) throw ContractViolation("budget must be in 1..10000");
  std::vector<Tally> ts;
  if (o.suite == "cocycle")
    ts = cocycle_suite(o, count);
  else if (o.suite == "gamma-relations")
    ts = gamma_suite(o, count);
  else
    throw ContractViolation("unknown suite '" + o.suite + "'");
  Result r;
  r.file = "check.json";
  json inv = json::array();
  for (auto& t : ts) {
    r.checks.push_back({t.name, t.failed == 0, t.first});
    json j{{"name", t.name}, {"checked", t.checked}, {"passed", t.checked - t.failed}, {"failed", t.failed}};
    if (!t.first.is_null()) j["counterexample"] = t.first;
    inv.push_back(j);
  }
  r.doc = io::document("check_report",
                       json{{"suite", o.suite}, {"seed", o.seed}, {"instances", count}, {"invariants", inv}});
  return r;
}

// ---- gen-corpus ------------------------------------------------------------------------------

Result gen_corpus(const Options& o) {
  if (!o.p) throw ContractViolation("--p is required");
  const int p = *o.p;
  if (p != 3 && p != 5 && p != 7) throw ContractViolation("p must be 3, 5 or 7");
  if (o.m && *o.m != 1) throw ContractViolation("corpus instances live over F_p");
  if (o.rank < 1 || o.rank > 4) throw ContractViolation("rank must be in 1..4");
  if (o.weight < 0 || o.weight > p - 2) throw ContractViolation("weight " + std::to_string(o.weight) + " exceeds p - 2");
  if (o.weight + 1 > o.rank) throw ContractViolation("weight + 1 exceeds the rank");
  if (o.max_exp < 0 || o.max_exp > 6) throw ContractViolation("|splitting exponents| must be at most 6");
  if (o.count < 0 || o.count > 100000) throw ContractViolation("count out of range");
  Rng g(o.seed);
  CorpusParams P;
  P.p = p;
  P.rank = o.rank;
  P.weight = o.weight;
  P.max_exp = o.max_exp;
  Result r;
  r.file = "corpus.json";
  Tally valid{"graded_valid"}, nil{"nilpotency_exponent"};
  json names = json::array();
  for (int k = 0; k < o.count; ++k) {
    GradedHiggsBundle G = random_graded(g, P);
    const int e = nilpotency_exponent(G.H);
    valid.add(is_graded_valid(G), json{{"instance", k}});
    nil.add(e >= 0 && e <= std::min(o.rank, p - 1), json{{"instance", k}, {"exponent", e}});
    char buf[32];
    std::snprintf(buf, sizeof buf, "instance_%04d.json", k);
    json d = io::document("graded_higgs", io::to_json(G));
    r.extra_files.push_back({buf, d});
    names.push_back(buf);
  }
  for (auto* t : {&valid, &nil}) r.checks.push_back({t->name, t->failed == 0, t->first});
  json j{{"p", p}, {"rank", o.rank}, {"weight", o.weight}, {"max_exp", o.max_exp}, {"seed", o.seed}, {"count", o.count},
         {"files", names}};
  if (o.out.empty()) {
    json inst = json::array();
    for (auto& [n, d] : r.extra_files) inst.push_back(d);
    j["instances"] = inst;
    r.extra_files.clear();
  }
  j["checks"] = checks_json(r.checks);
  r.doc = io::document("corpus", j);
  return r;
}

// ---- driver ------------------------------------------------------------------------------------

json error_object(const std::string& kind, const std::string& message, const std::string& location) {
  return io::document("error", json{{"error", json{{"kind", kind}, {"message", message}, {"location", location}}}});
}

void add_common(CLI::App* s, Options& o, bool input) {
  if (input) s->add_option("--in", o.in, "input JSON document ('-' for stdin)");
  s->add_option("--out", o.out, "output directory (results and manifest.json)");
  s->add_option("--p", o.p, "prime (checked against the input)");
  s->add_option("--modulus-power", o.m, "coefficient ring Z/p^m");
  s->add_option("--field-degree", o.f, "isomorphism search over F_{p^f}")->check(CLI::Range(1, 6));
  s->add_option("--steps", o.steps, "flow steps");
  s->add_option("--policy", o.policy, "canonical | grade-induced | supplied");
  s->add_option("--seed", o.seed, "random seed");
  s->add_option("--budget", o.budget, "search budget (overrides HDF_BUDGET)");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Higgs-de Rham flows on P^1 and its open charts", "hdf"};
  app.require_subcommand(1);
  Options o;
  std::string command;

  auto* flow = app.add_subcommand("flow", "Higgs-de Rham flows")->require_subcommand(1);
  auto* flow_run_c = flow->add_subcommand("run", "run a flow from a graded Higgs bundle");
  add_common(flow_run_c, o, true);
  auto* cartier = app.add_subcommand("cartier", "inverse Cartier transform")->require_subcommand(1);
  auto* cartier_c = cartier->add_subcommand("apply", "C^{-1} of a nilpotent Higgs bundle");
  add_common(cartier_c, o, true);
  auto* fil = app.add_subcommand("filtration", "Hodge filtrations")->require_subcommand(1);
  auto* fil_c = fil->add_subcommand("compute", "Simpson filtration of a flat bundle");
  add_common(fil_c, o, true);
  auto* witt = app.add_subcommand("witt", "truncated Witt rings")->require_subcommand(1);
  auto* lift_c = witt->add_subcommand("lift", "twisted modules and C_n^{-1} of a lifting tuple");
  add_common(lift_c, o, true);
  auto* step_c = witt->add_subcommand("flow-step", "one flow step over Z/p^2");
  add_common(step_c, o, true);
  auto* check_c = app.add_subcommand("check", "run an invariant suite");
  add_common(check_c, o, false);
  check_c->add_option("--suite", o.suite, "cocycle | gamma-relations")->required();
  auto* corpus_c = app.add_subcommand("gen-corpus", "random graded Higgs bundles on P^1");
  add_common(corpus_c, o, false);
  corpus_c->add_option("--rank", o.rank);
  corpus_c->add_option("--weight", o.weight);
  corpus_c->add_option("--count", o.count);
  corpus_c->add_option("--max-exp", o.max_exp, "bound on |splitting exponents|");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    out << dump(error_object("UsageError", e.what(), ""));
    err << "hdf: " << e.what() << "\n";
    return 2;
  }

  std::string input_digest;
  try {
    Result r;
    auto load = [&] {
      std::string text = read_input(o.in);
      input_digest = io::sha256_hex(text);
      return io::parse_text(text);
    };
    if (flow_run_c->parsed()) {
      command = "flow run";
      r = flow_run(o, load());
    } else if (cartier_c->parsed()) {
      command = "cartier apply";
      r = cartier_apply(o, load());
    } else if (fil_c->parsed()) {
      command = "filtration compute";
      r = filtration_compute(o, load());
    } else if (lift_c->parsed()) {
      command = "witt lift";
      r = witt_lift(o, load());
    } else if (step_c->parsed()) {
      command = "witt flow-step";
      r = witt_flow_step(o, load());
    } else if (check_c->parsed()) {
      command = "check";
      r = check(o);
    } else {
      command = "gen-corpus";
      r = gen_corpus(o);
    }

    bool pass = true;
    for (auto& c : r.checks) pass = pass && c.pass;
    const std::string body = dump(r.doc);
    if (o.out.empty()) {
      out << body;
    } else {
      fs::create_directories(o.out);
      json outputs = json::array();
      write_atomic(fs::path(o.out) / r.file, body);
      outputs.push_back(json{{"path", r.file}, {"sha256", io::sha256_hex(body)}});
      for (auto& [name, d] : r.extra_files) {
        const std::string b = dump(d);
        write_atomic(fs::path(o.out) / name, b);
        outputs.push_back(json{{"path", name}, {"sha256", io::sha256_hex(b)}});
      }
      json params{{"p", o.p ? json(*o.p) : json(nullptr)},
                  {"m", o.m ? json(*o.m) : json(nullptr)},
                  {"f", o.f},
                  {"steps", o.steps},
                  {"budget", o.budget ? json(*o.budget) : json(nullptr)},
                  {"policy", o.policy},
                  {"seed", o.seed}};
      if (!o.suite.empty()) params["suite"] = o.suite;
      json man{{"command", command},
               {"input_digest", input_digest.empty() ? json(nullptr) : json(input_digest)},
               {"parameters", params},
               {"outputs", outputs},
               {"checks", checks_json(r.checks)},
               {"pass", pass}};
      write_atomic(fs::path(o.out) / "manifest.json", dump(io::document("run_manifest", man)));
      out << (pass ? "pass" : "FAIL") << " " << command << " -> " << o.out << "\n";
    }
    if (!pass) {
      for (auto& c : r.checks)
        if (!c.pass) err << "hdf: check failed: " << c.name << "\n";
      return 1;
    }
    return 0;
  } catch (const io::InputError& e) {
    out << dump(error_object(e.kind(), e.what(), e.location()));
    err << "hdf: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    out << dump(error_object(e.kind(), e.what(), ""));
    err << "hdf: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    out << dump(error_object("InternalError", e.what(), ""));
    err << "hdf: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace hdf::cli
