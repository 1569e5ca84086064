#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "cli_app.hpp"
#include "hdf/io.hpp"

using namespace hdf;
namespace fs = std::filesystem;
using io::json;

namespace {

struct Run {
  int code;
  std::string out;
};

Run hdf_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = cli::run(args, out, err);
  return {code, out.str()};
}

fs::path scratch(const std::string& name) {
  fs::path d = fs::temp_directory_path() / ("hdf_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

fs::path put(const fs::path& dir, const std::string& name, const json& j) {
  fs::path p = dir / name;
  std::ofstream(p) << j.dump();
  return p;
}

json p1_graded(i64 p, const std::vector<int>& a, const PMat* theta = nullptr) {
  const Ring& R = Ring::zmod(p, 1);
  Bundle E = Bundle::split(Curve::projective(R), a);
  const int r = static_cast<int>(a.size());
  PMat th = theta ? *theta : PMat(R, r, r);
  std::vector<int> ranks = theta ? std::vector<int>(r, 1) : std::vector<int>{r};
  return io::document("graded_higgs", io::to_json(make_graded(E, ranks, th)));
}

json omega_tuple_doc(i64 p) {
  const Ring& R = Ring::zmod(p, 2);
  const Ring& Fp = Ring::zmod(p, 1);
  PMat N(R, 2, 2), Nb(Fp, 2, 2);
  N(0, 1) = LPoly::constant(R, 1);
  Nb(0, 1) = LPoly::constant(Fp, 1);
  GradedHiggsBundle E = make_graded(Bundle::trivial(Curve::affine(R), 2), {1, 1}, N);
  FlatBundle Hb{Bundle::trivial(Curve::affine(Fp), 2), {Nb}};
  return io::document("lifting_tuple",
                      json{{"E", io::to_json(E)}, {"Hbar", json{{"flat", io::to_json(Hb)}, {"ranks", {1, 1}}}}});
}

}  // namespace

TEST_CASE("flow run: trivial input has a constant trace of period (0, 1)") {
  auto d = scratch("trivial");
  auto in = put(d, "in.json", p1_graded(3, {0, 0}));
  Run r = hdf_run({"flow", "run", "--in", in.string(), "--steps", "2", "--out", (d / "o").string()});
  CHECK(r.code == 0);
  json t = io::parse_text(slurp(d / "o" / "trace.json"));
  CHECK(t["degrees"] == json({0, 0, 0}));
  REQUIRE(t["period"].is_object());
  CHECK(t["period"]["e"] == 0);
  CHECK(t["period"]["f"] == 1);
  json m = io::parse_text(slurp(d / "o" / "manifest.json"));
  CHECK(m["command"] == "flow run");
  CHECK(m["input_digest"] == io::sha256_hex(slurp(in)));
  CHECK(m["outputs"][0]["sha256"] == io::sha256_hex(slurp(d / "o" / "trace.json")));
  CHECK(m["pass"] == true);
}

TEST_CASE("flow run: degree one input") {
  auto d = scratch("deg1");
  auto in = put(d, "in.json", p1_graded(3, {1}));
  Run r = hdf_run({"flow", "run", "--in", in.string(), "--steps", "2"});
  CHECK(r.code == 0);
  json t = io::parse_text(r.out);
  CHECK(t["schema"] == "hdf/1");
  CHECK(t["degrees"] == json({1, 3, 9}));
  CHECK(t["period"].is_null());
  // every emitted stage re-parses to a valid graded Higgs bundle
  for (std::size_t i = 0; i < t["E"].size(); ++i) {
    GradedHiggsBundle G = io::graded_from(t["E"][i]);
    CHECK(io::to_json(G) == t["E"][i]);
  }
}

TEST_CASE("flow run: reruns are byte identical") {
  auto d = scratch("det");
  const Ring& R = Ring::zmod(5, 1);
  PMat th(R, 2, 2);
  th(0, 1) = LPoly(R, 0, {1, 2});
  auto in = put(d, "in.json", p1_graded(5, {1, -2}, &th));
  for (auto o : {"a", "b"})
    CHECK(hdf_run({"flow", "run", "--in", in.string(), "--policy", "grade-induced", "--out", (d / o).string()}).code ==
          0);
  // the canonical policy stops on this unstable input: an invariant failure, still deterministic
  for (auto o : {"c", "e"}) CHECK(hdf_run({"flow", "run", "--in", in.string(), "--out", (d / o).string()}).code == 1);
  CHECK(slurp(d / "c" / "manifest.json") == slurp(d / "e" / "manifest.json"));
  for (auto f : {"trace.json", "manifest.json"}) CHECK(slurp(d / "a" / f) == slurp(d / "b" / f));
}

TEST_CASE("contract errors exit with 2 and an error object") {
  auto d = scratch("errors");
  {
    std::ofstream(d / "bad.json") << "{\"schema\": \"hdf/1\", ";
    Run r = hdf_run({"flow", "run", "--in", (d / "bad.json").string()});
    CHECK(r.code == 2);
    json e = io::parse_text(r.out);
    CHECK(e["type"] == "error");
    CHECK(e["error"]["kind"] == "MalformedInput");
    CHECK(e["error"].contains("location"));
  }
  {
    json j = p1_graded(3, {0, 0});
    j["theta"][0][1][0] = json{{"lo", 0}, {"c", {7}}};
    Run r = hdf_run({"flow", "run", "--in", put(d, "coef.json", j).string()});
    CHECK(r.code == 2);
    CHECK(io::parse_text(r.out)["error"]["location"] == "/theta/0/1/0/c/0");
  }
  {
    json j = p1_graded(3, {0, 0});
    j["curve"]["kind"] = "P2";
    Run r = hdf_run({"flow", "run", "--in", put(d, "kind.json", j).string()});
    CHECK(io::parse_text(r.out)["error"]["location"] == "/curve/kind");
  }
  {
    json j = p1_graded(3, {0, 0});
    j.erase("ranks");
    CHECK(io::parse_text(hdf_run({"flow", "run", "--in", put(d, "ranks.json", j).string()}).out)["error"]["location"] ==
          "/ranks");
  }
  auto in = put(d, "ok.json", p1_graded(3, {0, 0}));
  CHECK(hdf_run({"flow", "run", "--in", in.string(), "--p", "5"}).code == 2);
  CHECK(hdf_run({"flow", "run", "--in", in.string(), "--policy", "nonsense"}).code == 2);
  CHECK(hdf_run({"flow", "run"}).code == 2);
  CHECK(hdf_run({"frobnicate"}).code == 2);
  CHECK(hdf_run({}).code == 2);
}

TEST_CASE("check suites") {
  Run c = hdf_run({"check", "--suite", "cocycle", "--seed", "1", "--budget", "6"});
  CHECK(c.code == 0);
  json j = io::parse_text(c.out);
  for (auto& inv : j["invariants"]) {
    CHECK(inv["failed"] == 0);
    CHECK(inv["checked"].get<int>() > 0);
  }
  Run g = hdf_run({"check", "--suite", "gamma-relations", "--seed", "1", "--budget", "4"});
  CHECK(g.code == 0);
  for (auto& inv : io::parse_text(g.out)["invariants"]) CHECK(inv["failed"] == 0);
  CHECK(hdf_run({"check", "--suite", "unknown"}).code == 2);

  ::setenv("HDF_BUDGET", "2", 1);
  CHECK(io::parse_text(hdf_run({"check", "--suite", "cocycle"}).out)["instances"] == 2);
  CHECK(io::parse_text(hdf_run({"check", "--suite", "cocycle", "--budget", "3"}).out)["instances"] == 3);
  ::setenv("HDF_BUDGET", "many", 1);
  CHECK(hdf_run({"check", "--suite", "cocycle"}).code == 2);
  ::unsetenv("HDF_BUDGET");
}

TEST_CASE("gen-corpus") {
  auto d = scratch("corpus");
  Run r = hdf_run({"gen-corpus", "--p", "3", "--rank", "2", "--weight", "1", "--count", "10", "--seed", "7", "--out",
                   (d / "c").string()});
  CHECK(r.code == 0);
  int files = 0;
  for (auto& e : fs::directory_iterator(d / "c")) {
    const std::string name = e.path().filename().string();
    if (name.rfind("instance_", 0) != 0) continue;
    ++files;
    json j = io::parse_text(slurp(e.path()));
    io::expect_document(j, "graded_higgs");
    GradedHiggsBundle G = io::graded_from(j);
    CHECK(is_graded_valid(G));
    CHECK(G.weight() == 1);
    CHECK(G.rank() == 2);
  }
  CHECK(files == 10);
  json m = io::parse_text(slurp(d / "c" / "manifest.json"));
  CHECK(m["outputs"].size() == 11);

  Run r5 = hdf_run({"gen-corpus", "--p", "5", "--rank", "4", "--weight", "3", "--count", "4", "--seed", "2"});
  CHECK(r5.code == 0);
  for (auto& inst : io::parse_text(r5.out)["instances"]) {
    GradedHiggsBundle G = io::graded_from(inst);
    int e = nilpotency_exponent(G.H);
    CHECK(e >= 1);
    CHECK(e <= 4);
  }
  CHECK(hdf_run({"gen-corpus", "--p", "3", "--weight", "2", "--rank", "3"}).code == 2);
  CHECK(hdf_run({"gen-corpus", "--p", "11"}).code == 2);
  CHECK(hdf_run({"gen-corpus", "--p", "3", "--max-exp", "7"}).code == 2);
}

TEST_CASE("cartier apply and filtration compute") {
  auto d = scratch("cartier");
  const Ring& R = Ring::zmod(3, 1);
  PMat th(R, 2, 2);
  th(0, 1) = LPoly(R, 0, {1, 1});
  json in = p1_graded(3, {1, -2}, &th);
  Run r = hdf_run({"cartier", "apply", "--in", put(d, "in.json", in).string()});
  CHECK(r.code == 0);
  json out = io::parse_text(r.out);
  FlatBundle F = io::flat_from(out["flat"]);
  CHECK(degree(F.E) == -3);

  PMat M = PMat::identity(R, 2);
  M(0, 1) = LPoly::monomial(R, 1, 1);
  FlatBundle V = change_frame(FlatBundle{Bundle::trivial(Curve::projective(R), 2), {PMat(R, 2, 2), PMat(R, 2, 2)}},
                              {M, PMat::identity(R, 2)});
  Run f = hdf_run({"filtration", "compute", "--in",
                   put(d, "flat.json", io::document("flat", io::to_json(V))).string()});
  CHECK(f.code == 0);
  json s = io::parse_text(f.out);
  CHECK(s["graded"]["ranks"] == json({2}));
  // C^{-1} of an unstable Higgs bundle is not nabla-semistable
  Run u = hdf_run({"filtration", "compute", "--in",
                   put(d, "unstable.json", io::document("flat", io::to_json(F))).string()});
  CHECK(u.code == 2);
  CHECK(io::parse_text(u.out)["error"]["kind"] == "NotNablaSemistable");

  // exponent above p - 1
  PMat n3(R, 3, 3);
  n3(0, 1) = n3(1, 2) = LPoly::constant(R, 1);
  json bad = io::document("higgs", io::to_json(make_higgs(Bundle::trivial(Curve::affine(R), 3), n3)));
  Run b = hdf_run({"cartier", "apply", "--in", put(d, "bad.json", bad).string()});
  CHECK(b.code == 2);
  CHECK(io::parse_text(b.out)["error"]["kind"] == "ExponentTooLarge");
}

TEST_CASE("witt lift and flow-step") {
  auto d = scratch("witt");
  json t = omega_tuple_doc(3);
  Run r = hdf_run({"witt", "lift", "--in", put(d, "tuple.json", t).string()});
  CHECK(r.code == 0);
  json j = io::parse_text(r.out);
  CHECK(j["sharp"]["level"] == 2);
  CHECK(j["sharp"]["B"] == j["gn"]["B"]);

  const Ring& R = Ring::zmod(3, 2);
  const Ring& Fp = Ring::zmod(3, 1);
  PMat v(R, 2, 1), vb(Fp, 2, 1);
  v(1, 0) = LPoly::constant(R, 1);
  vb(1, 0) = LPoly::constant(Fp, 1);
  json step = io::document("witt_flow_step_input",
                           json{{"tuple", t},
                                {"fil", io::to_json(HodgeFiltration{{Subbundle{{v}}}})},
                                {"filbar", io::to_json(HodgeFiltration{{Subbundle{{vb}}}})}});
  Run s = hdf_run({"witt", "flow-step", "--in", put(d, "step.json", step).string()});
  CHECK(s.code == 0);
  json sj = io::parse_text(s.out);
  CHECK(sj["one_periodic"] == false);
  GradedHiggsBundle next = io::graded_from(sj["next"]);
  CHECK(next.H.theta[0](0, 1) == LPoly::monomial(R, 1, 2));

  step["fil"] = io::to_json(HodgeFiltration{});
  Run e = hdf_run({"witt", "flow-step", "--in", put(d, "step2.json", step).string()});
  CHECK(e.code == 2);
  CHECK(io::parse_text(e.out)["error"]["kind"] == "NoLiftedFiltration");

  json wrong = t;
  wrong["Hbar"]["flat"]["A"][0][0][1] = json{{"lo", 0}, {"c", {2}}};
  Run w = hdf_run({"witt", "lift", "--in", put(d, "wrong.json", wrong).string()});
  CHECK(w.code == 2);
  CHECK(io::parse_text(w.out)["error"]["kind"] == "ContractViolation");
}
