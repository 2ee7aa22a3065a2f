#pragma once

#include "json.hpp"

#include <string>
#include <vector>

#include "dtbsm/empirical.hpp"
#include "dtbsm/mdp.hpp"
#include "dtbsm/metrics.hpp"
#include "dtbsm/transport.hpp"

namespace dtbsm {

using Json = nlohmann::json;

// File schemas:
//   MDP          {"num_states", "num_actions", "gamma",
//                 "rewards": [s][a], "transitions": [s][a][s']}
//   values       {"values": [...], "residual", "iterations"}
//   policy       {"policy": [...]}
//   metric       {"n", "apriori_error", "r_max", "d": [i][j]}
//   bound report {"max_dbar_diag", "max_dtv_diag", "dt_suboptimality",
//                 "bound_bsm", "bound_tv", "actual_regret"}  (null when the BSM is skipped)
//   transport    {"plan": [i][j], "mu", "nu", "value"}

/// Throws Parse for structural problems and the validate_mdp errors otherwise.
TabularMdp mdp_from_json(const Json& j, const ValidationOptions& options = {});
Json to_json(const TabularMdp& mdp);

Json to_json(const ValueVector& v);
Json to_json(const Policy& pi);
/// Accepts {"policy": [...]} or a bare array.
Policy policy_from_json(const Json& j);

Json to_json(const MetricTable& m);
Json to_json(const DiagMetric& m);
Json to_json(const BoundReport& r);
Json to_json(const TransportSolution& t);
Json to_json(const CheckOutcome& c);
Json to_json(const SamplePlan& p);

/// Parses text, mapping nlohmann parse errors to ErrorCode::Parse.
Json parse_json(const std::string& text, const char* what = "JSON");
/// Reads a whole file; throws Io.
std::string read_file(const std::string& path);

/// Compact, deterministic serialization with a trailing newline.
std::string dump(const Json& j);

}  // namespace dtbsm
