// dtbsm command-line interface. Talks to the library only through dtbsm.h.
//
// Exit codes: 0 success, 1 validation or parse failure, 2 an internal
// invariant (such as a transfer bound) was violated.

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "dtbsm/dtbsm.h"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitInvariant = 2;

struct CommandError {
  dtbsm_status status;
  std::string message;
};

struct MdpDeleter {
  void operator()(dtbsm_mdp* m) const { dtbsm_mdp_free(m); }
};
using MdpHandle = std::unique_ptr<dtbsm_mdp, MdpDeleter>;

struct StringDeleter {
  void operator()(char* s) const { dtbsm_string_free(s); }
};
using OwnedString = std::unique_ptr<char, StringDeleter>;

void check(dtbsm_status status) {
  if (status != DTBSM_OK) throw CommandError{status, dtbsm_last_error()};
}

MdpHandle load(const std::string& path) {
  dtbsm_mdp* m = nullptr;
  check(dtbsm_mdp_load(path.c_str(), &m));
  return MdpHandle(m);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CommandError{DTBSM_ERR_IO, "cannot open `" + path + "`"};
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// Writes to `path`, or stdout when it is empty.
void emit(const char* text, const std::string& path) {
  if (path.empty()) {
    std::fputs(text, stdout);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw CommandError{DTBSM_ERR_IO, "cannot write `" + path + "`"};
}

std::string mdp_json(const dtbsm_mdp* m) {
  char* text = nullptr;
  check(dtbsm_mdp_to_json(m, &text));
  return OwnedString(text).get();
}

struct Options {
  std::uint64_t seed = 0;
  std::string out;
  std::string policy_out;
  std::string mdp;
  std::string real;
  std::string twin;
  std::string policy;
  std::string file;
  std::string real_trace;
  std::string twin_trace;
  std::string summary;
  double tol = 0.0;
  double delta = 0.0;
  std::size_t steps = 0;
  bool skip_bsm = false;
  std::size_t samples = 10000;
  double epsilon = 0.1;
  double alpha = 0.05;
  std::uint64_t k = 0;
  std::size_t states = 0;
  std::size_t actions = 0;
  double gamma = 0.9;
  double sparsity = 1.0;
  double reward_noise = 0.0;
  double transition_noise = 0.0;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Digital-twin bisimulation metrics, transfer bounds and admission-control experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  auto* seed_opt = app.add_option("--seed", o.seed, "Seed for randomized commands");

  auto out_flag = [&](CLI::App* cmd) { cmd->add_option("--out", o.out, "Output file (default stdout)"); };
  auto pair_args = [&](CLI::App* cmd) {
    cmd->add_option("real", o.real, "Real MDP JSON")->required();
    cmd->add_option("twin", o.twin, "Digital-twin MDP JSON")->required();
  };

  auto* solve = app.add_subcommand("solve", "Optimal values by value iteration plus the greedy policy");
  solve->add_option("mdp", o.mdp, "MDP JSON")->required();
  solve->add_option("--tol", o.tol, "Certified residual target (default 1e-10)");
  solve->add_option("--out", o.out, "Values file; stdout then only gets the residual certificate");
  solve->add_option("--policy-out", o.policy_out, "Policy file");

  auto* eval = app.add_subcommand("eval", "Value of a fixed policy");
  eval->add_option("mdp", o.mdp, "MDP JSON")->required();
  eval->add_option("policy", o.policy, "Policy JSON")->required();
  eval->add_option("--tol", o.tol, "Certified residual target (default 1e-10)");
  out_flag(eval);

  auto* bsm = app.add_subcommand("bsm", "Truncated DT-BSM table between two MDPs");
  pair_args(bsm);
  bsm->add_option("--delta", o.delta, "Apriori error target (default 1e-9)");
  bsm->add_option("--steps", o.steps, "Fixed iteration count (overrides --delta)");
  out_flag(bsm);

  auto* dtv = app.add_subcommand("dtv", "TV-based diagonal metric");
  pair_args(dtv);
  out_flag(dtv);

  auto* bound = app.add_subcommand("bound", "Transfer bounds for a policy (twin-optimal by default)");
  pair_args(bound);
  bound->add_option("policy", o.policy, "Policy JSON");
  bound->add_option("--delta", o.delta, "Apriori error target of the DT-BSM (default 1e-9)");
  bound->add_flag("--skip-bsm", o.skip_bsm, "Only the TV bound");
  out_flag(bound);

  auto* chk = app.add_subcommand("check", "Run the metric property suites on a pair");
  pair_args(chk);
  chk->add_option("--samples", o.samples, "Random quadrilateral quadruples (0: exhaustive)");
  out_flag(chk);

  auto* transport = app.add_subcommand("transport", "Solve one W1 problem {p, q, cost}");
  transport->add_option("problem", o.file, "Problem JSON")->required();
  out_flag(transport);

  auto* sample = app.add_subcommand("sample", "Empirical TV-based metric from simulated or recorded samples");
  pair_args(sample);
  sample->add_option("--real-trace", o.real_trace, "CSV state,action,next_state for the real side");
  sample->add_option("--twin-trace", o.twin_trace, "CSV state,action,next_state for the twin side");
  sample->add_option("--epsilon", o.epsilon, "Target accuracy");
  sample->add_option("--alpha", o.alpha, "One minus the confidence level");
  sample->add_option("--k", o.k, "Samples per state-action pair (default from epsilon, alpha)");
  out_flag(sample);

  auto* gen_adm = app.add_subcommand("gen-admission", "Admission-control MDP from a key-value config");
  gen_adm->add_option("config", o.file, "Config file (default: built-in three-slice setup)");
  out_flag(gen_adm);

  auto* gen_rand = app.add_subcommand("gen-random", "Random MDP");
  gen_rand->add_option("--states", o.states, "Number of states")->required();
  gen_rand->add_option("--actions", o.actions, "Number of actions")->required();
  gen_rand->add_option("--gamma", o.gamma, "Discount factor");
  gen_rand->add_option("--sparsity", o.sparsity, "Fraction of states in each row's support");
  out_flag(gen_rand);

  auto* pert = app.add_subcommand("perturb", "Noisy digital twin of an MDP");
  pert->add_option("mdp", o.mdp, "MDP JSON")->required();
  pert->add_option("--reward-noise", o.reward_noise, "Half-width of the uniform reward noise");
  pert->add_option("--transition-noise", o.transition_noise, "Largest mixing weight of the noise row");
  out_flag(pert);

  auto* exp = app.add_subcommand("experiment", "Noise sweep; CSV to the spec's output_path, summary to stdout");
  exp->add_option("spec", o.file, "Experiment spec file")->required();
  exp->add_option("--out", o.out, "CSV path (overrides output_path)");
  exp->add_option("--summary", o.summary, "Summary JSON file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitFailure;
  }

  try {
    int exit_code = 0;
    char* text = nullptr;
    char* extra = nullptr;
    if (*solve) {
      auto m = load(o.mdp);
      double residual = 0.0;
      check(dtbsm_solve(m.get(), o.tol, &text, &extra, &residual));
      OwnedString values(text);
      OwnedString policy(extra);
      if (o.out.empty()) {
        std::fputs(values.get(), stdout);
        std::fputs(policy.get(), stdout);
      } else {
        emit(values.get(), o.out);
        std::printf("certified residual: %.17g\n", residual);
      }
      if (!o.policy_out.empty()) emit(policy.get(), o.policy_out);
    } else if (*eval) {
      auto m = load(o.mdp);
      check(dtbsm_evaluate(m.get(), read_text(o.policy).c_str(), o.tol, &text));
      emit(OwnedString(text).get(), o.out);
    } else if (*bsm) {
      auto r = load(o.real);
      auto t = load(o.twin);
      check(dtbsm_bsm(r.get(), t.get(), o.delta, o.steps, &text));
      emit(OwnedString(text).get(), o.out);
    } else if (*dtv) {
      auto r = load(o.real);
      auto t = load(o.twin);
      check(dtbsm_dtv(r.get(), t.get(), &text));
      emit(OwnedString(text).get(), o.out);
    } else if (*bound) {
      auto r = load(o.real);
      auto t = load(o.twin);
      const std::string policy = o.policy.empty() ? std::string() : read_text(o.policy);
      int within = 1;
      check(dtbsm_bound(r.get(), t.get(), o.policy.empty() ? nullptr : policy.c_str(), o.delta,
                        o.skip_bsm ? 1 : 0, &text, &within));
      emit(OwnedString(text).get(), o.out);
      if (!within) {
        std::fputs("error: actual regret exceeds the transfer bound\n", stderr);
        exit_code = kExitInvariant;
      }
    } else if (*chk) {
      auto r = load(o.real);
      auto t = load(o.twin);
      int passed = 1;
      check(dtbsm_check(r.get(), t.get(), o.samples, o.seed, &text, &passed));
      emit(OwnedString(text).get(), o.out);
      if (!passed) {
        std::fputs("error: a metric property check failed\n", stderr);
        exit_code = kExitInvariant;
      }
    } else if (*transport) {
      check(dtbsm_wasserstein(read_text(o.file).c_str(), &text));
      emit(OwnedString(text).get(), o.out);
    } else if (*sample) {
      auto r = load(o.real);
      auto t = load(o.twin);
      check(dtbsm_sample(r.get(), t.get(), o.real_trace.empty() ? nullptr : o.real_trace.c_str(),
                         o.twin_trace.empty() ? nullptr : o.twin_trace.c_str(), o.epsilon, o.alpha, o.k, o.seed,
                         &text));
      emit(OwnedString(text).get(), o.out);
    } else if (*gen_adm) {
      const std::string config = o.file.empty() ? std::string() : read_text(o.file);
      dtbsm_mdp* m = nullptr;
      check(dtbsm_gen_admission(o.file.empty() ? nullptr : config.c_str(), &m));
      emit(mdp_json(MdpHandle(m).get()).c_str(), o.out);
    } else if (*gen_rand) {
      dtbsm_mdp* m = nullptr;
      check(dtbsm_gen_random(o.states, o.actions, o.gamma, o.sparsity, o.seed, &m));
      emit(mdp_json(MdpHandle(m).get()).c_str(), o.out);
    } else if (*pert) {
      auto base = load(o.mdp);
      dtbsm_mdp* m = nullptr;
      check(dtbsm_perturb(base.get(), o.reward_noise, o.transition_noise, o.seed, &m));
      emit(mdp_json(MdpHandle(m).get()).c_str(), o.out);
    } else if (*exp) {
      char* path = nullptr;
      std::size_t violations = 0;
      const std::uint64_t* seed = seed_opt->count() > 0 ? &o.seed : nullptr;
      check(dtbsm_experiment(o.file.c_str(), seed, &text, &extra, &path, &violations));
      OwnedString csv(text);
      OwnedString summary(extra);
      OwnedString output_path(path);
      const std::string target = o.out.empty() ? std::string(output_path.get()) : o.out;
      if (target.empty()) throw CommandError{DTBSM_ERR_INVALID_ARGUMENT, "no output_path in spec and no --out"};
      emit(csv.get(), target);
      emit(summary.get(), o.summary);
      if (violations > 0) {
        std::fprintf(stderr, "error: %zu record(s) exceed their transfer bound\n", violations);
        exit_code = kExitInvariant;
      }
    }
    return exit_code;
  } catch (const CommandError& e) {
    std::fprintf(stderr, "error [%s]: %s\n", dtbsm_status_name(e.status), e.message.c_str());
    return e.status == DTBSM_ERR_INVARIANT_VIOLATION ? kExitInvariant : kExitFailure;
  }
}
