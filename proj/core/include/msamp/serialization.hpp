#pragma once

#include <string>

#include <json.hpp>

#include "msamp/amp.hpp"
#include "msamp/mixture.hpp"
#include "msamp/pseudomax.hpp"
#include "msamp/solvability.hpp"
#include "msamp/state_evolution.hpp"

namespace msamp {

using json = nlohmann::json;

// Non-finite numbers become null.
json number(double x);
json vec_to_json(const Vec& v);
Vec vec_from_json(const json& j);
json mat_to_json(const Mat& m);

MixtureSpec spec_from_json(const json& j);
json spec_to_json(const MixtureSpec& spec);
MixtureSpec load_spec(const std::string& path);

json to_json(const SolvabilityReport& rep);
json to_json(const PhiResiduals& res);
json to_json(const PhiPath& path);
PhiPath phi_from_json(const json& j);
PhiPath load_phi(const std::string& path);
json to_json(const AlgResult& res);
json to_json(const IampSchedule& sch);
json to_json(const SEPrediction& pred);
// Traces and scalars; iterate vectors only with `vectors`.
json to_json(const AmpRun& run, bool vectors = false);
json to_json(const AmpOptions& opt);
AmpOptions amp_options_from_json(const json& j);
json to_json(const TreeSpec& tree);
TreeSpec tree_from_json(const json& j);

json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const json& j);

}  // namespace msamp
