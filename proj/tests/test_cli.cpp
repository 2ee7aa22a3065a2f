#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kCli = DTBSM_CLI_PATH;
const std::string kData = DTBSM_TEST_DATA_DIR;

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

fs::path scratch() {
  static const fs::path dir = [] {
    auto d = fs::current_path() / "cli_scratch";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Run run(const std::string& args) {
  const auto out = scratch() / "stdout.txt";
  const auto err = scratch() / "stderr.txt";
  const std::string cmd = "'" + kCli + "' " + args + " >'" + out.string() + "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::string data(const std::string& name) { return "'" + kData + "/" + name + "'"; }

std::string write_scratch(const std::string& name, const std::string& text) {
  const auto path = scratch() / name;
  std::ofstream(path, std::ios::binary) << text;
  return "'" + path.string() + "'";
}

}  // namespace

TEST_CASE("solve prints values then policy") {
  auto r = run("solve " + data("real4.json"));
  REQUIRE(r.code == 0);
  std::istringstream lines(r.out);
  std::string first, second;
  std::getline(lines, first);
  std::getline(lines, second);
  auto values = json::parse(first);
  CHECK(values["values"].size() == 4);
  CHECK(values["residual"].get<double>() <= 1e-10);
  CHECK(json::parse(second)["policy"].size() == 4);

  auto to_file = run("solve " + data("real4.json") + " --out " + write_scratch("v.json", "") + " --policy-out " +
                     write_scratch("p.json", "") + " --tol 1e-6");
  REQUIRE(to_file.code == 0);
  CHECK(to_file.out.rfind("certified residual: ", 0) == 0);
  CHECK(json::parse(slurp(scratch() / "v.json"))["residual"].get<double>() <= 1e-6);
  CHECK(json::parse(slurp(scratch() / "p.json")) == json::parse(second));
}

TEST_CASE("eval agrees with solve on the greedy policy") {
  auto solved = run("solve " + data("real4.json") + " --out " + write_scratch("v.json", "") + " --policy-out " +
                    write_scratch("p.json", ""));
  REQUIRE(solved.code == 0);
  auto r = run("eval " + data("real4.json") + " '" + (scratch() / "p.json").string() + "'");
  REQUIRE(r.code == 0);
  auto optimal = json::parse(slurp(scratch() / "v.json"))["values"];
  auto evaluated = json::parse(r.out)["values"];
  REQUIRE(evaluated.size() == optimal.size());
  for (std::size_t s = 0; s < optimal.size(); ++s)
    CHECK(evaluated[s].get<double>() == doctest::Approx(optimal[s].get<double>()).epsilon(1e-8));

  auto bad = run("eval " + data("real4.json") + " " + write_scratch("bad.json", R"({"policy":[0,0,0,5]})"));
  CHECK(bad.code == 1);
  CHECK(bad.err.rfind("error [", 0) == 0);
}

TEST_CASE("bsm, dtv and bound") {
  auto b = json::parse(run("bsm " + data("real4.json") + " " + data("twin4.json")).out);
  CHECK(b["d"].size() == 4);
  CHECK(b["apriori_error"].get<double>() <= 1e-9);
  auto fixed = json::parse(run("bsm " + data("real4.json") + " " + data("twin4.json") + " --steps 3").out);
  CHECK(fixed["n"] == 3);

  auto same = json::parse(run("dtv " + data("real4.json") + " " + data("real4.json")).out);
  for (const auto& v : same["d"]) CHECK(v.get<double>() == 0.0);

  auto r = run("bound " + data("real4.json") + " " + data("twin4.json"));
  REQUIRE(r.code == 0);
  auto report = json::parse(r.out);
  CHECK(report["actual_regret"].get<double>() <= report["bound_bsm"].get<double>());
  CHECK(report["bound_bsm"].get<double>() <= report["bound_tv"].get<double>());

  auto tv_only = json::parse(run("bound --skip-bsm " + data("real4.json") + " " + data("twin4.json")).out);
  CHECK(tv_only["bound_bsm"].is_null());
  CHECK(tv_only["bound_tv"] == report["bound_tv"]);
}

TEST_CASE("check reports every suite") {
  auto r = run("check " + data("real4.json") + " " + data("twin4.json") + " --samples 0");
  REQUIRE(r.code == 0);
  auto j = json::parse(r.out);
  CHECK(j["passed"] == true);
  CHECK(j["quadrilateral"]["checked"] == 256);
  for (const char* key : {"value_bound", "tv_domination", "convergence_envelope"}) CHECK(j[key]["passed"] == true);
}

TEST_CASE("transport") {
  auto r = run("transport " + write_scratch("w.json", R"({"p":[1,0],"q":[0,1],"cost":[[0,2],[2,0]]})"));
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out)["value"].get<double>() == doctest::Approx(2.0));

  auto bad = run("transport " + write_scratch("w.json", R"({"p":[0.5,0.6],"q":[0,1],"cost":[[0,1],[1,0]]})"));
  CHECK(bad.code == 1);
  CHECK(bad.err.find("[NotADistribution]") != std::string::npos);
}

TEST_CASE("sample from models and traces") {
  auto r = run("sample " + data("real4.json") + " " + data("twin4.json") + " --k 200 --seed 3");
  REQUIRE(r.code == 0);
  auto j = json::parse(r.out);
  CHECK(j["d_tv_hat"].size() == 4);
  CHECK(j["plan"]["k_required"] == 200);

  auto traced = run("sample " + data("real4.json") + " " + data("twin4.json") + " --real-trace " +
                    data("real4_trace.csv") + " --k 1 --seed 3");
  CHECK(traced.code == 0);

  auto short_trace = run("sample " + data("real4.json") + " " + data("twin4.json") + " --real-trace " +
                         data("real4_trace.csv") + " --k 100000");
  CHECK(short_trace.code == 1);
  CHECK(short_trace.err.find("[CoverageError]") != std::string::npos);
}

TEST_CASE("generators") {
  auto adm = run("gen-admission " + data("admission_small.cfg"));
  REQUIRE(adm.code == 0);
  CHECK(json::parse(adm.out)["num_states"] == 16);

  auto def = json::parse(run("gen-admission").out);
  CHECK(def["num_states"] == 208);
  CHECK(def["num_actions"] == 8);

  auto rnd = json::parse(run("gen-random --states 5 --actions 3 --gamma 0.8 --sparsity 0.4 --seed 11").out);
  CHECK(rnd["num_states"] == 5);
  CHECK(rnd["gamma"] == 0.8);

  auto bad = run("gen-random --states 0 --actions 3");
  CHECK(bad.code == 1);
  CHECK(bad.err.rfind("error [", 0) == 0);

  auto p = run("perturb " + data("real4.json") + " --reward-noise 0.1 --transition-noise 0.2 --seed 2");
  REQUIRE(p.code == 0);
  auto twin = json::parse(p.out);
  auto real = json::parse(slurp(kData + "/real4.json"));
  CHECK(twin["num_states"] == real["num_states"]);
  CHECK(twin["rewards"] != real["rewards"]);
}

TEST_CASE("experiment writes csv and summary") {
  const auto csv = (scratch() / "sweep.csv").string();
  auto r = run("experiment " + data("small_sweep.spec") + " --out '" + csv + "'");
  REQUIRE(r.code == 0);
  auto summary = json::parse(r.out);
  CHECK(summary["levels"].size() == 3);
  CHECK(summary["bound_violations"] == 0);
  const auto first = slurp(csv);
  CHECK(first.rfind("noise_level,seed,", 0) == 0);

  REQUIRE(run("--seed 99 experiment " + data("small_sweep.spec") + " --out '" + csv + "'").code == 0);
  const auto reseeded = slurp(csv);
  CHECK(reseeded != first);
  REQUIRE(run("experiment " + data("small_sweep.spec") + " --seed 99 --out '" + csv + "'").code == 0);
  CHECK(slurp(csv) == reseeded);

  auto missing = run("experiment " + write_scratch("x.spec", "mode = reward_sweep\nbase_mdp = none.json\n"
                                                             "noise_grid = 0\noutput_path = x.csv\n"));
  CHECK(missing.code == 1);
  CHECK(missing.err.find("[IoError]") != std::string::npos);
}

TEST_CASE("errors and usage") {
  auto io = run("solve " + data("no_such.json"));
  CHECK(io.code == 1);
  CHECK(io.err == "error [IoError]: cannot open `" + kData + "/no_such.json`\n");
  CHECK(io.out.empty());

  auto parse = run("solve " + write_scratch("broken.json", "{\"gamma\": 0.9,"));
  CHECK(parse.code == 1);
  CHECK(parse.err.rfind("error [ParseError]: ", 0) == 0);

  CHECK(run("").code == 1);
  CHECK(run("frobnicate").code == 1);
  CHECK(run("solve").code == 1);
  CHECK(run("--help").code == 0);
}

TEST_CASE("seed position and byte-identical reruns") {
  const std::string cmd = "gen-random --states 6 --actions 2 --sparsity 0.5";
  auto before = run("--seed 17 " + cmd);
  auto after = run(cmd + " --seed 17");
  REQUIRE(before.code == 0);
  CHECK(before.out == after.out);
  CHECK(run("--seed 18 " + cmd).out != before.out);

  for (const std::string& args : {"sample " + data("real4.json") + " " + data("twin4.json") + " --k 50 --seed 4",
                                 "check " + data("real4.json") + " " + data("twin4.json") + " --seed 4",
                                 "bound " + data("real4.json") + " " + data("twin4.json")}) {
    auto a = run(args);
    auto b = run(args);
    CHECK(a.code == 0);
    CHECK(a.out == b.out);
  }
}
