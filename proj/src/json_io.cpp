#include "dtbsm/json_io.hpp"

#include <fstream>
#include <sstream>

#include "dtbsm/error.hpp"

namespace dtbsm {

namespace {

[[noreturn]] void schema_error(const std::string& what) {
  throw Error(ErrorCode::Parse, "MDP JSON: " + what);
}

const Json& field(const Json& j, const char* key) {
  if (!j.is_object()) schema_error("top level must be an object");
  auto it = j.find(key);
  if (it == j.end()) schema_error(std::string("missing field `") + key + "`");
  return *it;
}

std::size_t as_size(const Json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_number_unsigned()) schema_error(std::string("`") + key + "` must be a nonnegative integer");
  return v.get<std::size_t>();
}

double as_number(const Json& v, const std::string& where) {
  if (!v.is_number()) schema_error(where + " must be a number");
  return v.get<double>();
}

void expect_array(const Json& v, std::size_t n, const std::string& where) {
  if (!v.is_array()) schema_error(where + " must be an array");
  if (v.size() != n) {
    std::ostringstream msg;
    msg << where << " has " << v.size() << " entries, expected " << n;
    schema_error(msg.str());
  }
}

std::string at(const char* name, std::size_t s) { return std::string(name) + "[" + std::to_string(s) + "]"; }

std::string at(const char* name, std::size_t s, std::size_t a) {
  return at(name, s) + "[" + std::to_string(a) + "]";
}

Json table(const std::vector<double>& flat, std::size_t rows, std::size_t cols) {
  Json out = Json::array();
  for (std::size_t i = 0; i < rows; ++i) {
    out.push_back(std::vector<double>(flat.begin() + static_cast<std::ptrdiff_t>(i * cols),
                                      flat.begin() + static_cast<std::ptrdiff_t>((i + 1) * cols)));
  }
  return out;
}

Json optional_number(const std::optional<double>& x) { return x ? Json(*x) : Json(nullptr); }

}  // namespace

TabularMdp mdp_from_json(const Json& j, const ValidationOptions& options) {
  const auto S = as_size(j, "num_states");
  const auto A = as_size(j, "num_actions");
  const double gamma = as_number(field(j, "gamma"), "`gamma`");
  const auto& r = field(j, "rewards");
  const auto& p = field(j, "transitions");
  expect_array(r, S, "rewards");
  expect_array(p, S, "transitions");
  std::vector<double> rewards;
  std::vector<double> transitions;
  rewards.reserve(S * A);
  transitions.reserve(S * A * S);
  for (std::size_t s = 0; s < S; ++s) {
    expect_array(r[s], A, at("rewards", s));
    expect_array(p[s], A, at("transitions", s));
    for (std::size_t a = 0; a < A; ++a) {
      rewards.push_back(as_number(r[s][a], at("rewards", s, a)));
      expect_array(p[s][a], S, at("transitions", s, a));
      for (std::size_t t = 0; t < S; ++t)
        transitions.push_back(as_number(p[s][a][t], at("transitions", s, a) + "[" + std::to_string(t) + "]"));
    }
  }
  return validate_mdp(S, A, gamma, std::move(rewards), std::move(transitions), options);
}

Json to_json(const TabularMdp& mdp) {
  const auto S = mdp.num_states();
  const auto A = mdp.num_actions();
  Json transitions = Json::array();
  for (std::size_t s = 0; s < S; ++s) {
    Json per_action = Json::array();
    for (std::size_t a = 0; a < A; ++a) {
      auto row = mdp.row(s, a);
      per_action.push_back(std::vector<double>(row.begin(), row.end()));
    }
    transitions.push_back(std::move(per_action));
  }
  return Json{{"num_states", S},
              {"num_actions", A},
              {"gamma", mdp.gamma()},
              {"rewards", table(mdp.rewards(), S, A)},
              {"transitions", std::move(transitions)}};
}

Json to_json(const ValueVector& v) {
  return Json{{"values", v.values}, {"residual", v.residual}, {"iterations", v.iterations}};
}

Json to_json(const Policy& pi) { return Json{{"policy", pi.actions()}}; }

Policy policy_from_json(const Json& j) {
  const Json* arr = &j;
  if (j.is_object()) {
    auto it = j.find("policy");
    if (it == j.end()) throw Error(ErrorCode::Parse, "policy JSON: missing field `policy`");
    arr = &*it;
  }
  if (!arr->is_array()) throw Error(ErrorCode::Parse, "policy JSON: expected an array of actions");
  std::vector<ActionIndex> actions;
  for (std::size_t s = 0; s < arr->size(); ++s) {
    const auto& v = (*arr)[s];
    if (!v.is_number_unsigned())
      throw Error(ErrorCode::Parse, "policy JSON: entry " + std::to_string(s) + " is not a nonnegative integer");
    actions.push_back(v.get<ActionIndex>());
  }
  return Policy(std::move(actions));
}

Json to_json(const MetricTable& m) {
  return Json{{"n", m.iterations},
              {"apriori_error", m.apriori_error},
              {"r_max", m.r_max},
              {"d", table(m.d, m.size, m.size)}};
}

Json to_json(const DiagMetric& m) {
  return Json{{"d_tv", m.d_tv}, {"r_max", m.r_max}, {"max", m.max()}};
}

Json to_json(const BoundReport& r) {
  return Json{{"max_dbar_diag", optional_number(r.max_dbar_diag)},
              {"max_dtv_diag", r.max_dtv_diag},
              {"dt_suboptimality", r.dt_suboptimality},
              {"bound_bsm", optional_number(r.bound_bsm)},
              {"bound_tv", r.bound_tv},
              {"actual_regret", r.actual_regret}};
}

Json to_json(const TransportSolution& t) {
  // Potentials are often negated zeros; print them as 0.
  auto potentials = [](std::vector<double> v) {
    for (auto& x : v) x += 0.0;
    return v;
  };
  return Json{{"plan", table(t.plan, t.size, t.size)},
              {"mu", potentials(t.mu)},
              {"nu", potentials(t.nu)},
              {"value", t.value}};
}

Json to_json(const CheckOutcome& c) {
  return Json{{"passed", c.passed},
              {"checked", c.checked},
              {"violations", c.violations},
              {"worst_margin", c.checked > 0 ? Json(c.worst_margin) : Json(nullptr)},
              {"location", c.location}};
}

Json to_json(const SamplePlan& p) {
  return Json{{"epsilon", p.epsilon}, {"alpha", p.alpha}, {"k_required", p.k_required}, {"degenerate", p.degenerate}};
}

Json parse_json(const std::string& text, const char* what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::Parse, std::string(what) + ": " + e.what());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open `" + path + "`");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::Io, "failed reading `" + path + "`");
  return buf.str();
}

std::string dump(const Json& j) { return j.dump() + "\n"; }

}  // namespace dtbsm
