#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "hdf/errors.hpp"
#include "hdf/flow.hpp"
#include "hdf/witt.hpp"

namespace hdf::io {

using json = nlohmann::ordered_json;

inline constexpr const char* kSchema = "hdf/1";

// Raised while reading a document; location() is a JSON pointer into the input.
class InputError : public Error {
 public:
  InputError(const std::string& kind, std::string location, const std::string& msg)
      : Error(kind, msg + " at " + (location.empty() ? "/" : location)), location_(std::move(location)) {}
  const std::string& location() const noexcept { return location_; }

 private:
  std::string location_;
};

json to_json(const Ring& R);
json to_json(const Curve& C);
json to_json(const LPoly& f);
json to_json(const PMat& M);
json to_json(const std::vector<PMat>& Ms);
json to_json(const Rational& q);
json to_json(const Bundle& E);
json to_json(const HiggsBundle& H);
json to_json(const FlatBundle& F);
json to_json(const GradedHiggsBundle& G);
json to_json(const HodgeFiltration& F);
json to_json(const DeRhamBundle& D);
json to_json(const LiftingAtlas& A);
json to_json(const FlowTrace& T);
json to_json(const PConnectionModule& M);
json to_json(const LiftingInputTuple& T);

// Every reader takes the pointer of its argument for error locations.
const Ring& ring_from(const json& j, const std::string& at = "");
Curve curve_from(const json& j, const std::string& at = "");
LPoly poly_from(const json& j, const Ring& R, const std::string& at = "");
PMat mat_from(const json& j, const Ring& R, const std::string& at = "");
std::vector<PMat> mats_from(const json& j, const Ring& R, const std::string& at = "");
HiggsBundle higgs_from(const json& j, const std::string& at = "");
FlatBundle flat_from(const json& j, const std::string& at = "");
GradedHiggsBundle graded_from(const json& j, const std::string& at = "");
HodgeFiltration filtration_from(const json& j, const Curve& C, const std::string& at = "");
DeRhamBundle de_rham_from(const json& j, const std::string& at = "");
LiftingAtlas atlas_from(const json& j, const Curve& C, const std::string& at = "");
LiftingInputTuple tuple_from(const json& j, const std::string& at = "");

// {"schema": "hdf/1", "type": type, ...payload}
json document(const std::string& type, json payload);
// parses text; throws InputError("MalformedInput", ...) with the byte offset
json parse_text(const std::string& text);
// checks the schema tag and, when given, the type tag
void expect_document(const json& j, const std::string& type = "");

std::string sha256_hex(const std::string& bytes);

}  // namespace hdf::io
