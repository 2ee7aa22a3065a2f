#include "dtbsm/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dtbsm/empirical.hpp"
#include "dtbsm/error.hpp"
#include "dtbsm/metrics.hpp"
#include "dtbsm/random.hpp"
#include "dtbsm/transport.hpp"
#include "internal/kv_config.hpp"

namespace dtbsm {

namespace {

std::string resolve(const std::string& base_dir, const std::string& path) {
  if (path.empty() || base_dir.empty()) return path;
  const std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

// Shortest text that reads back to the same double.
void append_number(std::string& out, double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  out.append(buf, res.ptr);
}

double max_reward_gap(const TabularMdp& a, const TabularMdp& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.rewards().size(); ++k)
    m = std::max(m, std::abs(a.rewards()[k] - b.rewards()[k]));
  return m;
}

double max_transition_tv(const TabularMdp& a, const TabularMdp& b) {
  double m = 0.0;
  for (std::size_t s = 0; s < a.num_states(); ++s)
    for (std::size_t act = 0; act < a.num_actions(); ++act)
      m = std::max(m, tv_distance(a.row(s, act), b.row(s, act)));
  return m;
}

constexpr double kBoundSlack = 1e-6;

}  // namespace

ExperimentSpec read_experiment_spec(std::istream& in, const std::string& base_dir) {
  ExperimentSpec spec;
  for (const auto& [key, value] : kv::read(in, "experiment spec")) {
    if (key == "mode") {
      if (value == "reward_sweep") {
        spec.mode = SweepMode::Reward;
      } else if (value == "transition_sweep") {
        spec.mode = SweepMode::Transition;
      } else {
        kv::bad_value(key, value, "reward_sweep or transition_sweep");
      }
    } else if (key == "base_mdp") {
      spec.base_mdp = resolve(base_dir, value);
    } else if (key == "base_admission") {
      spec.base_admission = resolve(base_dir, value);
    } else if (key == "noise_grid") {
      spec.noise_grid = kv::reals(key, value);
    } else if (key == "trials_per_level") {
      spec.trials_per_level = kv::count(key, value);
    } else if (key == "gamma_override") {
      spec.gamma_override = kv::real(key, value);
    } else if (key == "output_path") {
      spec.output_path = resolve(base_dir, value);
    } else if (key == "seed") {
      spec.seed = kv::count(key, value);
    } else if (key == "bsm_state_cap") {
      spec.bsm_state_cap = kv::count(key, value);
    } else if (key == "delta") {
      spec.delta = kv::real(key, value);
    } else if (key == "rollouts") {
      spec.rollouts = kv::count(key, value);
    } else {
      throw Error(ErrorCode::Parse, "experiment spec: unknown key `" + key + "`");
    }
  }
  check_experiment_spec(spec);
  return spec;
}

void check_experiment_spec(const ExperimentSpec& spec) {
  if (spec.base_mdp.empty() == spec.base_admission.empty())
    throw Error(ErrorCode::InvalidArgument, "experiment spec needs exactly one of base_mdp and base_admission");
  if (spec.noise_grid.empty()) throw Error(ErrorCode::InvalidArgument, "noise_grid must not be empty");
  for (std::size_t l = 0; l < spec.noise_grid.size(); ++l) {
    const double x = spec.noise_grid[l];
    if (!(x >= 0.0) || !std::isfinite(x))
      throw Error(ErrorCode::InvalidArgument, "noise_grid entries must be finite and nonnegative");
    if (l > 0 && !(x > spec.noise_grid[l - 1]))
      throw Error(ErrorCode::InvalidArgument, "noise_grid must be strictly ascending");
  }
  if (spec.trials_per_level == 0) throw Error(ErrorCode::InvalidArgument, "trials_per_level must be at least 1");
  if (spec.gamma_override && !(*spec.gamma_override > 0.0 && *spec.gamma_override < 1.0))
    throw Error(ErrorCode::BadGamma, "gamma_override must lie in (0, 1)");
  if (!(spec.delta > 0.0)) throw Error(ErrorCode::InvalidArgument, "delta must be positive");
  if (spec.rollouts == 0) throw Error(ErrorCode::InvalidArgument, "rollouts must be at least 1");
}

TabularMdp load_experiment_base(const ExperimentSpec& spec) {
  check_experiment_spec(spec);
  TabularMdp base = [&] {
    if (!spec.base_mdp.empty()) return mdp_from_json(parse_json(read_file(spec.base_mdp), spec.base_mdp.c_str()));
    std::ifstream in(spec.base_admission);
    if (!in) throw Error(ErrorCode::Io, "cannot open `" + spec.base_admission + "`");
    return admission_mdp(read_admission_config(in));
  }();
  if (!spec.gamma_override) return base;
  return validate_mdp(base.num_states(), base.num_actions(), *spec.gamma_override, base.rewards(),
                      base.transitions());
}

double average_reward_gap(const TabularMdp& mdp, const Policy& optimal, const Policy& pi,
                          std::size_t rollouts, std::uint64_t seed) {
  check_policy(mdp, optimal);
  check_policy(mdp, pi);
  const auto horizon = static_cast<std::size_t>(std::ceil(10.0 / (1.0 - mdp.gamma())));
  const MdpSampler sampler(mdp);
  double gap = 0.0;
  for (std::size_t r = 0; r < rollouts; ++r) {
    const auto stream = stream_seed(seed, {r});
    const auto start = Rng(stream).index(mdp.num_states());
    double total[2] = {0.0, 0.0};
    const Policy* policies[2] = {&optimal, &pi};
    for (int which = 0; which < 2; ++which) {
      Rng rng(stream_seed(stream, {1}));
      StateIndex s = start;
      for (std::size_t t = 0; t < horizon; ++t) {
        const auto a = (*policies[which])(s);
        total[which] += mdp.reward(s, a);
        s = sampler.sample_next(s, a, t, rng);
      }
    }
    gap += (total[0] - total[1]) / static_cast<double>(horizon);
  }
  return gap / static_cast<double>(rollouts);
}

ExperimentResult run_experiment(const ExperimentSpec& spec, const TabularMdp& real) {
  check_experiment_spec(spec);
  const auto v_real = value_iteration(real);
  const auto pi_real = greedy_policy(real, v_real);
  const bool with_bsm = real.num_states() <= spec.bsm_state_cap;

  ExperimentResult result;
  for (std::size_t l = 0; l < spec.noise_grid.size(); ++l) {
    const double level = spec.noise_grid[l];
    for (std::size_t t = 0; t < spec.trials_per_level; ++t) {
      ExperimentRecord rec;
      rec.noise_level = level;
      rec.seed = stream_seed(spec.seed, {l, t});
      const bool reward_mode = spec.mode == SweepMode::Reward;
      auto twin = perturb(real, reward_mode ? level : 0.0, reward_mode ? 0.0 : level, rec.seed);
      rec.discrepancy_x = reward_mode ? max_reward_gap(real, twin) : max_transition_tv(real, twin);

      const auto pair = MdpPair::create(real, std::move(twin));
      const auto v_twin = value_iteration(pair.twin());
      const auto pi = greedy_policy(pair.twin(), v_twin);
      const double dt_sub = suboptimality(pair.twin(), pi, v_twin);
      rec.regret = suboptimality(real, pi, v_real);

      const auto dtv = dtv_metric(pair);
      std::optional<MetricTable> metric;
      if (with_bsm) metric = dtbsm(pair, MetricStoppingRule::tolerance(spec.delta));
      const auto report =
          assemble_bound_report(real.gamma(), dtv, metric ? &*metric : nullptr, dt_sub, rec.regret);
      rec.bound_tv = report.bound_tv;
      rec.bound_bsm = report.bound_bsm;
      rec.avg_reward_gap = average_reward_gap(real, pi_real, pi, spec.rollouts, stream_seed(rec.seed, {2}));
      result.records.push_back(rec);
    }
  }
  result.summary = summarize(result.records);
  return result;
}

ExperimentSummary summarize(const std::vector<ExperimentRecord>& records) {
  ExperimentSummary out;
  for (const auto& rec : records) {
    if (out.levels.empty() || out.levels.back().noise_level != rec.noise_level) {
      out.levels.push_back({});
      out.levels.back().noise_level = rec.noise_level;
    }
    auto& lv = out.levels.back();
    lv.worst_regret = lv.trials == 0 ? rec.regret : std::max(lv.worst_regret, rec.regret);
    lv.max_discrepancy_x = lv.trials == 0 ? rec.discrepancy_x : std::max(lv.max_discrepancy_x, rec.discrepancy_x);
    lv.mean_discrepancy_x += rec.discrepancy_x;
    ++lv.trials;
    if (rec.regret > rec.bound_tv + kBoundSlack) ++out.bound_violations;
    if (rec.bound_bsm && rec.regret > *rec.bound_bsm + kBoundSlack) ++out.bound_violations;
  }
  for (auto& lv : out.levels) lv.mean_discrepancy_x /= static_cast<double>(lv.trials);

  const auto L = out.levels.size();
  if (L >= 2) {
    std::size_t rising = 0;
    for (std::size_t l = 1; l < L; ++l)
      if (out.levels[l].worst_regret >= out.levels[l - 1].worst_regret) ++rising;
    out.monotone_fraction = static_cast<double>(rising) / static_cast<double>(L - 1);

    double mx = 0.0;
    double my = 0.0;
    for (const auto& lv : out.levels) {
      mx += lv.mean_discrepancy_x;
      my += lv.worst_regret;
    }
    mx /= static_cast<double>(L);
    my /= static_cast<double>(L);
    double sxx = 0.0;
    double syy = 0.0;
    double sxy = 0.0;
    for (const auto& lv : out.levels) {
      const double dx = lv.mean_discrepancy_x - mx;
      const double dy = lv.worst_regret - my;
      sxx += dx * dx;
      syy += dy * dy;
      sxy += dx * dy;
    }
    if (sxx > 0.0) out.slope = sxy / sxx;
    if (sxx > 0.0 && syy > 0.0) out.pearson = sxy / std::sqrt(sxx * syy);
  }
  return out;
}

std::string records_csv(const std::vector<ExperimentRecord>& records) {
  std::string out = "noise_level,seed,discrepancy_x,regret,bound_tv,bound_bsm,avg_reward_gap\n";
  for (const auto& rec : records) {
    append_number(out, rec.noise_level);
    out += ',';
    out += std::to_string(rec.seed);
    out += ',';
    append_number(out, rec.discrepancy_x);
    out += ',';
    append_number(out, rec.regret);
    out += ',';
    append_number(out, rec.bound_tv);
    out += ',';
    if (rec.bound_bsm) append_number(out, *rec.bound_bsm);
    out += ',';
    append_number(out, rec.avg_reward_gap);
    out += '\n';
  }
  return out;
}

Json to_json(const ExperimentSummary& summary) {
  Json levels = Json::array();
  for (const auto& lv : summary.levels) {
    levels.push_back(Json{{"noise_level", lv.noise_level},
                          {"trials", lv.trials},
                          {"worst_regret", lv.worst_regret},
                          {"mean_discrepancy_x", lv.mean_discrepancy_x},
                          {"max_discrepancy_x", lv.max_discrepancy_x}});
  }
  auto opt = [](const std::optional<double>& x) { return x ? Json(*x) : Json(nullptr); };
  return Json{{"levels", std::move(levels)},
              {"worst_regret_aggregation", "max over trials"},
              {"slope", opt(summary.slope)},
              {"monotone_fraction", summary.monotone_fraction},
              {"pearson", opt(summary.pearson)},
              {"bound_violations", summary.bound_violations}};
}

}  // namespace dtbsm
