#include "curefit/cli.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace curefit;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

const std::string kData = std::string(CUREFIT_DATA_DIR) + "/e1684.csv";

std::vector<std::string> ecog_fit(std::vector<std::string> extra = {}) {
  std::vector<std::string> args{"fit",         "--input",  kData,         "--time",   "FAILTIME",
                                "--event",     "FAILCENS", "--incidence", "TRT,AGE,SEX", "--latency",
                                "TRT,AGE,SEX", "--center", "AGE"};
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

TEST_CASE("usage errors exit 2") {
  auto r = run({"fit", "--input", kData, "--time", "FAILTIME", "--incidence", "TRT", "--latency", "TRT"});
  CHECK(r.code == 2);
  CHECK(r.err.find("--event") != std::string::npos);
  CHECK(r.err.find("Usage") != std::string::npos);

  r = run({"simulate", "--preset", "cure99"});
  CHECK(r.code == 2);
  for (const char* p : {"cure25", "cure50", "cure75"}) CHECK(r.err.find(p) != std::string::npos);

  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run(ecog_fit({"--boot-reps", "50"})).code == 2);
  CHECK(run(ecog_fit({"--se", "jackknife"})).code == 2);
  CHECK(run({"fit", "--input", "/nonexistent.csv", "--time", "t", "--event", "d", "--incidence", "x", "--latency",
             "x"})
            .code == 2);
  CHECK(run({"fit", "--input", kData, "--time", "FAILTIME", "--event", "FAILCENS", "--incidence", "NOPE",
             "--latency", "TRT"})
            .code == 2);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("data errors exit 3") {
  const fs::path path = fs::temp_directory_path() / "curefit_cli_bad.csv";
  std::ofstream(path) << "t,d,x\n1,1,0\n2,2,1\n";
  const auto r = run({"fit", "--input", path.string(), "--time", "t", "--event", "d", "--incidence", "x", "--latency",
                      "x"});
  CHECK(r.code == 3);
  CHECK(r.err.find("row 2") != std::string::npos);
}

TEST_CASE("fit text report") {
  const auto r = run(ecog_fit({"--se", "analytic"}));
  REQUIRE(r.code == 0);
  CHECK(r.out.find("Logistic component (incidence)") != std::string::npos);
  CHECK(r.out.find("Cox PH component (latency)") != std::string::npos);
  for (const char* name : {"Intercept", "TRT", "AGE", "SEX"}) CHECK(r.out.find(name) != std::string::npos);
}

TEST_CASE("fit JSON agrees with the text report and round-trips") {
  const auto text = run(ecog_fit());
  const auto js = run(ecog_fit({"--format", "json"}));
  REQUIRE(text.code == 0);
  REQUIRE(js.code == 0);
  const auto doc = nlohmann::json::parse(js.out);
  CHECK(doc["n"] == 284);
  CHECK(doc["events"] == 196);
  CHECK(doc["fit"]["converged"] == true);
  const auto& inf = doc["inference"];
  CHECK(inf["method"] == "analytic");
  CHECK(inf["block_mode"] == "stacked");
  REQUIRE(inf["estimates"].size() == 7);
  for (const auto* block : {"incidence", "latency"}) {
    for (const auto& row : inf[block]) {
      CHECK(text.out.find(fixed4(row["estimate"].get<double>())) != std::string::npos);
      CHECK(text.out.find(fixed4(row["se"].get<double>())) != std::string::npos);
    }
  }
  // Serialising the parsed document reproduces it exactly.
  CHECK(nlohmann::json::parse(doc.dump(2)) == doc);
  CHECK(doc.dump(2) + "\n" == js.out);
}

TEST_CASE("fit with bootstrap SEs keeps the estimates") {
  const auto analytic = nlohmann::json::parse(run(ecog_fit({"--format", "json"})).out);
  const auto boot = run(ecog_fit({"--format", "json", "--se", "bootstrap", "--boot-reps", "20", "--seed", "1"}));
  REQUIRE(boot.code == 0);
  const auto doc = nlohmann::json::parse(boot.out);
  CHECK(doc["inference"]["method"] == "bootstrap");
  CHECK(doc["inference"]["boot_reps"] == 20);
  CHECK(doc["inference"]["estimates"] == analytic["inference"]["estimates"]);
  CHECK(doc["inference"]["se"] != analytic["inference"]["se"]);
}

TEST_CASE("output file and verbose alternate block") {
  const fs::path path = fs::temp_directory_path() / "curefit_cli_out.json";
  fs::remove(path);
  const auto r = run(ecog_fit({"--format", "json", "--verbose", "--output", path.string()}));
  REQUIRE(r.code == 0);
  CHECK(r.out.empty());
  std::ifstream in(path);
  const auto doc = nlohmann::json::parse(in);
  CHECK(doc["alternate_block_mode"]["block_mode"] == "separate");
}

TEST_CASE("non-convergence exits 4 with a report") {
  const auto r = run(ecog_fit({"--em-max-iter", "3"}));
  CHECK(r.code == 4);
  CHECK(r.out.find("did NOT converge") != std::string::npos);
}

TEST_CASE("simulate") {
  auto r = run({"simulate", "--preset", "cure25", "--reps", "1", "--seed", "2"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("NA") != std::string::npos);

  r = run({"simulate", "--preset", "cure50", "--n", "100", "--reps", "4", "--seed", "7", "--format", "json"});
  REQUIRE(r.code == 0);
  const auto doc = nlohmann::json::parse(r.out);
  CHECK(doc["config"]["preset"] == "cure50");
  CHECK(doc["n_success"] == 4);
  REQUIRE(doc["parameters"].size() == 5);
  CHECK(doc["parameters"][0]["parameter"] == "b0");
  const auto again = run({"simulate", "--preset", "cure50", "--n", "100", "--reps", "4", "--seed", "7", "--format",
                          "json", "--threads", "3"});
  CHECK(again.out == r.out);
}

TEST_CASE("options from a config file") {
  const fs::path cfg = fs::temp_directory_path() / "curefit_cli.toml";
  std::ofstream(cfg) << "[simulate]\npreset = \"cure75\"\nreps = 2\nn = 80\nformat = \"json\"\n";
  const auto r = run({"--config", cfg.string(), "simulate"});
  REQUIRE(r.code == 0);
  const auto doc = nlohmann::json::parse(r.out);
  CHECK(doc["config"]["preset"] == "cure75");
  CHECK(doc["config"]["reps"] == 2);
  CHECK(doc["config"]["n"] == 80);
}
