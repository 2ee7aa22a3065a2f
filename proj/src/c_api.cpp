#include "dtbsm/dtbsm.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <new>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dtbsm/empirical.hpp"
#include "dtbsm/envgen.hpp"
#include "dtbsm/error.hpp"
#include "dtbsm/experiment.hpp"
#include "dtbsm/json_io.hpp"
#include "dtbsm/mdp.hpp"
#include "dtbsm/metrics.hpp"
#include "dtbsm/transport.hpp"

struct dtbsm_mdp {
  dtbsm::TabularMdp mdp;
};

namespace {

using dtbsm::ErrorCode;
using dtbsm::Json;

thread_local std::string last_error;

dtbsm_status status_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return DTBSM_ERR_INVALID_ARGUMENT;
    case ErrorCode::Parse: return DTBSM_ERR_PARSE;
    case ErrorCode::Io: return DTBSM_ERR_IO;
    case ErrorCode::RowNotStochastic: return DTBSM_ERR_ROW_NOT_STOCHASTIC;
    case ErrorCode::BadGamma: return DTBSM_ERR_BAD_GAMMA;
    case ErrorCode::NonFiniteEntry: return DTBSM_ERR_NON_FINITE_ENTRY;
    case ErrorCode::ActionOutOfRange: return DTBSM_ERR_ACTION_OUT_OF_RANGE;
    case ErrorCode::ShapeMismatch: return DTBSM_ERR_SHAPE_MISMATCH;
    case ErrorCode::GammaMismatch: return DTBSM_ERR_GAMMA_MISMATCH;
    case ErrorCode::NotADistribution: return DTBSM_ERR_NOT_A_DISTRIBUTION;
    case ErrorCode::CostShapeMismatch: return DTBSM_ERR_COST_SHAPE_MISMATCH;
    case ErrorCode::NoSamples: return DTBSM_ERR_NO_SAMPLES;
    case ErrorCode::SamplerOutOfRange: return DTBSM_ERR_SAMPLER_OUT_OF_RANGE;
    case ErrorCode::Coverage: return DTBSM_ERR_COVERAGE;
    case ErrorCode::StateSpaceTooLarge: return DTBSM_ERR_STATE_SPACE_TOO_LARGE;
    case ErrorCode::InfeasibleDemand: return DTBSM_ERR_INFEASIBLE_DEMAND;
    case ErrorCode::InvariantViolation: return DTBSM_ERR_INVARIANT_VIOLATION;
  }
  return DTBSM_ERR_INTERNAL;
}

dtbsm_status fail(dtbsm_status status, const char* what) {
  last_error = what;
  return status;
}

// Runs `body`, translating exceptions into status codes.
template <typename F>
dtbsm_status guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return DTBSM_OK;
  } catch (const dtbsm::Error& e) {
    return fail(status_of(e.code()), e.what());
  } catch (const Json::exception& e) {
    return fail(DTBSM_ERR_PARSE, e.what());
  } catch (const std::bad_alloc&) {
    return fail(DTBSM_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(DTBSM_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(DTBSM_ERR_INTERNAL, "unknown exception");
  }
}

void require(const void* p, const char* name) {
  if (p == nullptr) throw dtbsm::Error(ErrorCode::InvalidArgument, std::string(name) + " must not be NULL");
}

char* copy_string(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

// Allocates every requested output before publishing any, so a failure
// leaves all out-parameters untouched.
class Outputs {
 public:
  ~Outputs() {
    for (auto& [dst, s] : pending_) std::free(s);
  }
  void add(char** dst, const std::string& text) {
    if (dst != nullptr) pending_.emplace_back(dst, copy_string(text));
  }
  void publish() {
    for (auto& [dst, s] : pending_) *dst = std::exchange(s, nullptr);
  }

 private:
  std::vector<std::pair<char**, char*>> pending_;
};

dtbsm::MdpPair make_pair(const dtbsm_mdp* real, const dtbsm_mdp* twin) {
  require(real, "real");
  require(twin, "twin");
  return dtbsm::MdpPair::create(real->mdp, twin->mdp);
}

dtbsm::MetricStoppingRule metric_rule(double delta, std::size_t steps) {
  if (steps > 0) return dtbsm::MetricStoppingRule::steps(steps);
  return dtbsm::MetricStoppingRule::tolerance(delta > 0.0 ? delta : dtbsm::kDefaultMetricTolerance);
}

dtbsm_mdp* wrap(dtbsm::TabularMdp mdp) { return new dtbsm_mdp{std::move(mdp)}; }

std::vector<double> numbers(const Json& j, const char* name) {
  if (!j.is_array()) throw dtbsm::Error(ErrorCode::Parse, std::string("`") + name + "` must be an array");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw dtbsm::Error(ErrorCode::Parse, std::string("`") + name + "` must hold numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

dtbsm::EmpiricalModel sample_side(const dtbsm::TabularMdp& mdp, const char* trace_path, std::uint64_t k,
                                  std::uint64_t seed) {
  if (trace_path == nullptr) return dtbsm::collect(dtbsm::MdpSampler(mdp), k, seed);
  std::ifstream in(trace_path);
  if (!in) throw dtbsm::Error(ErrorCode::Io, std::string("cannot open `") + trace_path + "`");
  const auto trace = dtbsm::read_trace_csv(in);
  try {
    return dtbsm::collect(dtbsm::TraceSampler(mdp.num_states(), mdp.num_actions(), trace), k, seed);
  } catch (const dtbsm::Error& e) {
    if (e.code() != ErrorCode::Coverage) throw;
    throw dtbsm::Error(ErrorCode::Coverage, std::string(trace_path) + ": " + e.what());
  }
}

}  // namespace

extern "C" {

const char* dtbsm_last_error(void) { return last_error.c_str(); }

const char* dtbsm_status_name(dtbsm_status status) {
  switch (status) {
    case DTBSM_OK: return "Ok";
    case DTBSM_ERR_INVALID_ARGUMENT: return dtbsm::to_string(ErrorCode::InvalidArgument);
    case DTBSM_ERR_PARSE: return dtbsm::to_string(ErrorCode::Parse);
    case DTBSM_ERR_IO: return dtbsm::to_string(ErrorCode::Io);
    case DTBSM_ERR_ROW_NOT_STOCHASTIC: return dtbsm::to_string(ErrorCode::RowNotStochastic);
    case DTBSM_ERR_BAD_GAMMA: return dtbsm::to_string(ErrorCode::BadGamma);
    case DTBSM_ERR_NON_FINITE_ENTRY: return dtbsm::to_string(ErrorCode::NonFiniteEntry);
    case DTBSM_ERR_ACTION_OUT_OF_RANGE: return dtbsm::to_string(ErrorCode::ActionOutOfRange);
    case DTBSM_ERR_SHAPE_MISMATCH: return dtbsm::to_string(ErrorCode::ShapeMismatch);
    case DTBSM_ERR_GAMMA_MISMATCH: return dtbsm::to_string(ErrorCode::GammaMismatch);
    case DTBSM_ERR_NOT_A_DISTRIBUTION: return dtbsm::to_string(ErrorCode::NotADistribution);
    case DTBSM_ERR_COST_SHAPE_MISMATCH: return dtbsm::to_string(ErrorCode::CostShapeMismatch);
    case DTBSM_ERR_NO_SAMPLES: return dtbsm::to_string(ErrorCode::NoSamples);
    case DTBSM_ERR_SAMPLER_OUT_OF_RANGE: return dtbsm::to_string(ErrorCode::SamplerOutOfRange);
    case DTBSM_ERR_COVERAGE: return dtbsm::to_string(ErrorCode::Coverage);
    case DTBSM_ERR_STATE_SPACE_TOO_LARGE: return dtbsm::to_string(ErrorCode::StateSpaceTooLarge);
    case DTBSM_ERR_INFEASIBLE_DEMAND: return dtbsm::to_string(ErrorCode::InfeasibleDemand);
    case DTBSM_ERR_INVARIANT_VIOLATION: return dtbsm::to_string(ErrorCode::InvariantViolation);
    case DTBSM_ERR_INTERNAL: return "InternalError";
  }
  return "UnknownStatus";
}

void dtbsm_string_free(char* s) { std::free(s); }

dtbsm_status dtbsm_mdp_from_json(const char* json, dtbsm_mdp** out) {
  return guarded([&] {
    require(json, "json");
    require(out, "out");
    *out = wrap(dtbsm::mdp_from_json(dtbsm::parse_json(json, "MDP JSON")));
  });
}

dtbsm_status dtbsm_mdp_load(const char* path, dtbsm_mdp** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = wrap(dtbsm::mdp_from_json(dtbsm::parse_json(dtbsm::read_file(path), path)));
  });
}

dtbsm_status dtbsm_mdp_to_json(const dtbsm_mdp* mdp, char** out) {
  return guarded([&] {
    require(mdp, "mdp");
    require(out, "out");
    *out = copy_string(dtbsm::dump(dtbsm::to_json(mdp->mdp)));
  });
}

void dtbsm_mdp_free(dtbsm_mdp* mdp) { delete mdp; }

size_t dtbsm_mdp_num_states(const dtbsm_mdp* mdp) { return mdp ? mdp->mdp.num_states() : 0; }
size_t dtbsm_mdp_num_actions(const dtbsm_mdp* mdp) { return mdp ? mdp->mdp.num_actions() : 0; }
double dtbsm_mdp_gamma(const dtbsm_mdp* mdp) { return mdp ? mdp->mdp.gamma() : 0.0; }

dtbsm_status dtbsm_solve(const dtbsm_mdp* mdp, double tol, char** values_json, char** policy_json,
                         double* residual) {
  return guarded([&] {
    require(mdp, "mdp");
    const auto rule = dtbsm::StoppingRule::tolerance(tol > 0.0 ? tol : dtbsm::kDefaultValueTolerance);
    const auto v = dtbsm::value_iteration(mdp->mdp, rule);
    Outputs out;
    out.add(values_json, dtbsm::dump(dtbsm::to_json(v)));
    if (policy_json != nullptr) out.add(policy_json, dtbsm::dump(dtbsm::to_json(dtbsm::greedy_policy(mdp->mdp, v))));
    out.publish();
    if (residual != nullptr) *residual = v.residual;
  });
}

dtbsm_status dtbsm_evaluate(const dtbsm_mdp* mdp, const char* policy_json, double tol, char** values_json) {
  return guarded([&] {
    require(mdp, "mdp");
    require(policy_json, "policy_json");
    require(values_json, "values_json");
    const auto pi = dtbsm::policy_from_json(dtbsm::parse_json(policy_json, "policy JSON"));
    const auto rule = dtbsm::StoppingRule::tolerance(tol > 0.0 ? tol : dtbsm::kDefaultValueTolerance);
    *values_json = copy_string(dtbsm::dump(dtbsm::to_json(dtbsm::policy_evaluation(mdp->mdp, pi, rule))));
  });
}

dtbsm_status dtbsm_bsm(const dtbsm_mdp* real, const dtbsm_mdp* twin, double delta, size_t steps,
                       char** metric_json) {
  return guarded([&] {
    require(metric_json, "metric_json");
    const auto pair = make_pair(real, twin);
    *metric_json = copy_string(dtbsm::dump(dtbsm::to_json(dtbsm::dtbsm(pair, metric_rule(delta, steps)))));
  });
}

dtbsm_status dtbsm_dtv(const dtbsm_mdp* real, const dtbsm_mdp* twin, char** metric_json) {
  return guarded([&] {
    require(metric_json, "metric_json");
    const auto pair = make_pair(real, twin);
    *metric_json = copy_string(dtbsm::dump(dtbsm::to_json(dtbsm::dtv_metric(pair))));
  });
}

dtbsm_status dtbsm_bound(const dtbsm_mdp* real, const dtbsm_mdp* twin, const char* policy_json, double delta,
                         int skip_bsm, char** report_json, int* within_bound) {
  return guarded([&] {
    require(report_json, "report_json");
    const auto pair = make_pair(real, twin);
    const auto pi = policy_json != nullptr
                        ? dtbsm::policy_from_json(dtbsm::parse_json(policy_json, "policy JSON"))
                        : dtbsm::greedy_policy(pair.twin(), dtbsm::value_iteration(pair.twin()));
    dtbsm::BoundOptions options;
    options.stop = metric_rule(delta, 0);
    options.skip_bsm = skip_bsm != 0;
    const auto report = dtbsm::theorem1_bounds(pair, pi, options);
    double tightest = report.bound_tv;
    if (report.bound_bsm) tightest = std::min(tightest, *report.bound_bsm);
    *report_json = copy_string(dtbsm::dump(dtbsm::to_json(report)));
    if (within_bound != nullptr) *within_bound = report.actual_regret <= tightest + 1e-6 ? 1 : 0;
  });
}

dtbsm_status dtbsm_check(const dtbsm_mdp* real, const dtbsm_mdp* twin, size_t samples, uint64_t seed,
                         char** report_json, int* all_passed) {
  return guarded([&] {
    require(report_json, "report_json");
    const auto pair = make_pair(real, twin);
    const auto metric = dtbsm::dtbsm(pair);
    const auto v_real = dtbsm::value_iteration(pair.real());
    const auto v_twin = dtbsm::value_iteration(pair.twin());
    const auto dtv = dtbsm::dtv_metric(pair);

    const auto value_bound = dtbsm::check_corollary1(metric, v_real.values, v_twin.values);
    const auto quadrilateral = samples == 0 ? dtbsm::check_quadrilateral_exhaustive(metric)
                                            : dtbsm::check_quadrilateral(metric, samples, seed);
    const auto tv_domination = dtbsm::check_lemma6(metric, dtv, pair.gamma());
    const auto envelope = dtbsm::check_convergence_envelope(pair);
    const bool passed = value_bound.passed && quadrilateral.passed && tv_domination.passed && envelope.passed;

    const Json report{{"value_bound", dtbsm::to_json(value_bound)},
                      {"quadrilateral", dtbsm::to_json(quadrilateral)},
                      {"tv_domination", dtbsm::to_json(tv_domination)},
                      {"convergence_envelope", dtbsm::to_json(envelope)},
                      {"passed", passed}};
    *report_json = copy_string(dtbsm::dump(report));
    if (all_passed != nullptr) *all_passed = passed ? 1 : 0;
  });
}

dtbsm_status dtbsm_wasserstein(const char* problem_json, char** solution_json) {
  return guarded([&] {
    require(problem_json, "problem_json");
    require(solution_json, "solution_json");
    const auto j = dtbsm::parse_json(problem_json, "transport JSON");
    if (!j.is_object()) throw dtbsm::Error(ErrorCode::Parse, "transport JSON must be an object");
    const auto p = numbers(j.at("p"), "p");
    const auto q = numbers(j.at("q"), "q");
    const auto& rows = j.at("cost");
    if (!rows.is_array()) throw dtbsm::Error(ErrorCode::Parse, "`cost` must be an array of rows");
    std::vector<double> flat;
    for (const auto& row : rows) {
      const auto r = numbers(row, "cost");
      if (r.size() != rows.size()) throw dtbsm::Error(ErrorCode::CostShapeMismatch, "`cost` must be square");
      flat.insert(flat.end(), r.begin(), r.end());
    }
    const auto cost = dtbsm::CostTable::create(rows.size(), std::move(flat));
    *solution_json = copy_string(dtbsm::dump(dtbsm::to_json(dtbsm::wasserstein(p, q, cost))));
  });
}

dtbsm_status dtbsm_required_samples(double epsilon, double alpha, double gamma, double r_max, size_t num_states,
                                    uint64_t* k, int* degenerate) {
  return guarded([&] {
    require(k, "k");
    const auto plan = dtbsm::required_samples(epsilon, alpha, gamma, r_max, num_states);
    *k = plan.k_required;
    if (degenerate != nullptr) *degenerate = plan.degenerate ? 1 : 0;
  });
}

dtbsm_status dtbsm_sample(const dtbsm_mdp* real, const dtbsm_mdp* twin, const char* real_trace_path,
                          const char* twin_trace_path, double epsilon, double alpha, uint64_t k, uint64_t seed,
                          char** result_json) {
  return guarded([&] {
    require(result_json, "result_json");
    const auto pair = make_pair(real, twin);
    const double r_max = dtbsm::compute_rmax(pair);
    dtbsm::SamplePlan plan;
    if (k == 0) {
      plan = dtbsm::required_samples(epsilon, alpha, pair.gamma(), r_max, pair.num_states());
    } else {
      plan.alpha = alpha;
      plan.k_required = k;
      plan.degenerate = r_max == 0.0;
      plan.epsilon = dtbsm::certified_epsilon(k, alpha, pair.gamma(), r_max, pair.num_states());
    }
    const auto model_real = sample_side(pair.real(), real_trace_path, plan.k_required, dtbsm::stream_seed(seed, {0}));
    const auto model_twin = sample_side(pair.twin(), twin_trace_path, plan.k_required, dtbsm::stream_seed(seed, {1}));
    const auto metric = dtbsm::empirical_dtv_metric(pair, model_real, model_twin);
    Json result{{"plan", dtbsm::to_json(plan)}, {"d_tv_hat", metric.d_tv}, {"r_max", metric.r_max}, {"max", metric.max()}};
    Json warnings = Json::array();
    if (plan.degenerate) warnings.push_back("R_max is 0: the metric is degenerate and one sample per pair suffices");
    result["warnings"] = std::move(warnings);
    *result_json = copy_string(dtbsm::dump(result));
  });
}

dtbsm_status dtbsm_gen_admission(const char* config_text, dtbsm_mdp** out) {
  return guarded([&] {
    require(out, "out");
    dtbsm::AdmissionConfig cfg;
    if (config_text != nullptr) {
      std::istringstream in(config_text);
      cfg = dtbsm::read_admission_config(in);
    }
    *out = wrap(dtbsm::admission_mdp(cfg));
  });
}

dtbsm_status dtbsm_gen_random(size_t num_states, size_t num_actions, double gamma, double sparsity, uint64_t seed,
                              dtbsm_mdp** out) {
  return guarded([&] {
    require(out, "out");
    *out = wrap(dtbsm::random_mdp(num_states, num_actions, gamma, sparsity, seed));
  });
}

dtbsm_status dtbsm_perturb(const dtbsm_mdp* mdp, double reward_noise, double transition_noise, uint64_t seed,
                           dtbsm_mdp** out) {
  return guarded([&] {
    require(mdp, "mdp");
    require(out, "out");
    *out = wrap(dtbsm::perturb(mdp->mdp, reward_noise, transition_noise, seed));
  });
}

dtbsm_status dtbsm_experiment(const char* spec_path, const uint64_t* seed_override, char** csv,
                              char** summary_json, char** output_path, size_t* bound_violations) {
  return guarded([&] {
    require(spec_path, "spec_path");
    std::ifstream in(spec_path);
    if (!in) throw dtbsm::Error(ErrorCode::Io, std::string("cannot open `") + spec_path + "`");
    auto spec = dtbsm::read_experiment_spec(in, std::filesystem::path(spec_path).parent_path().string());
    if (seed_override != nullptr) spec.seed = *seed_override;
    const auto base = dtbsm::load_experiment_base(spec);
    const auto result = dtbsm::run_experiment(spec, base);
    Outputs out;
    out.add(csv, dtbsm::records_csv(result.records));
    out.add(summary_json, dtbsm::dump(dtbsm::to_json(result.summary)));
    out.add(output_path, spec.output_path);
    out.publish();
    if (bound_violations != nullptr) *bound_violations = result.summary.bound_violations;
  });
}

}  // extern "C"
