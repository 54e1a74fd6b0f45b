#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path& scratch() {
  static const fs::path p = [] {
    fs::path d = fs::temp_directory_path() / ("dftphys_cli_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

// Runs the CLI with `args`; stdout and stderr go to `log`.
int run(const std::string& args, const std::string& log = "log.txt") {
  const std::string cmd = std::string("'") + DFTPHYS_CLI + "' " + args + " > '" + (scratch() / log).string() +
                          "' 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

std::string path(const std::string& name) { return (scratch() / name).string(); }

}  // namespace

TEST(Cli, UnknownVariantExitsTwoAndListsVariants) {
  write(scratch() / "bad.json", R"({"application": "static", "variant": "DFT-Z9", "simulate": {"n": 5}})");
  EXPECT_EQ(run("simulate --config " + path("bad.json") + " --out " + path("bad"), "bad.txt"), 2);
  const std::string err = slurp(scratch() / "bad.txt");
  EXPECT_NE(err.find("DFT-Z9"), std::string::npos);
  EXPECT_NE(err.find("DFT-B2"), std::string::npos);
  EXPECT_NE(err.find("MNL-E"), std::string::npos);
}

TEST(Cli, UnknownConfigKeyExitsTwo) {
  write(scratch() / "typo.json", R"({"application": "static", "varaint": "MNL-B"})");
  EXPECT_EQ(run("simulate --config " + path("typo.json") + " --out " + path("typo")), 2);
}

TEST(Cli, SimulateRowsParametersAndTrajectories) {
  write(scratch() / "sim.json", R"({"application": "static", "variant": "DFT-B2", "seed": 5,
    "simulate": {"n": 10, "trajectories": 2,
                 "truth": {"beta_condition": 2.42, "beta_size": 1.44, "beta_transport": 1.38,
                           "phi1": 3.04e-5, "sigma_eps": 38.39, "tau": 7}}})");
  ASSERT_EQ(run("simulate --config " + path("sim.json") + " --out " + path("sim")), 0);
  EXPECT_EQ(count_lines(slurp(scratch() / "sim" / "simulated.csv")), 11u);
  const auto truth = nlohmann::json::parse(slurp(scratch() / "sim" / "truth.json"));
  const std::vector<std::pair<std::string, bool>> rows{
      {"beta_kitchen", true},    {"beta_condition", false}, {"beta_size", false}, {"beta_transport", false},
      {"gamma_kitchen", true},   {"gamma_condition", true}, {"gamma_size", true}, {"gamma_transport", true},
      {"phi1", false},           {"phi2", true},            {"sigma_eps", false}, {"tau", true}};
  ASSERT_EQ(truth["parameters"].size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(truth["parameters"][i]["name"], rows[i].first);
    EXPECT_EQ(truth["parameters"][i]["fixed"], rows[i].second) << rows[i].first;
  }
  // Two trajectories of tau + 1 = 8 rows each, plus the header.
  EXPECT_EQ(count_lines(slurp(scratch() / "sim" / "trajectories.csv")), 17u);

  ASSERT_EQ(run("simulate --config " + path("sim.json") + " --out " + path("sim2")), 0);
  EXPECT_EQ(slurp(scratch() / "sim" / "simulated.csv"), slurp(scratch() / "sim2" / "simulated.csv"));
}

TEST(Cli, EstimateWithoutFreeParameters) {
  write(scratch() / "s.json", R"({"application": "static", "variant": "MNL-B", "simulate": {"n": 40}})");
  ASSERT_EQ(run("simulate --config " + path("s.json") + " --out " + path("s")), 0);
  write(scratch() / "e.json", R"({"application": "static", "variant": "MNL-B",
    "parameters": {"beta_kitchen": {"fixed": true}, "beta_condition": {"fixed": true},
                   "beta_size": {"fixed": true}, "beta_transport": {"fixed": true}}})");
  EXPECT_EQ(run("estimate --config " + path("e.json") + " --data " + path("s/simulated.csv") + " --out " + path("e")),
            0);
  const auto fit = nlohmann::json::parse(slurp(scratch() / "e" / "fit.json"));
  EXPECT_EQ(fit["k"], 0);
}

TEST(Cli, EstimateMissingDataExitsTwo) {
  write(scratch() / "m.json", R"({"application": "static", "variant": "MNL-B"})");
  EXPECT_EQ(run("estimate --config " + path("m.json") + " --data " + path("nope.csv") + " --out " + path("m")), 2);
}

TEST(Cli, ValidateIsWellFormedAndRepeatable) {
  write(scratch() / "v.json", R"({"validate": {"cases": 3, "threshold": 0}})");
  ASSERT_EQ(run("validate --config " + path("v.json") + " --draws 100 --seed 3 --out " + path("v1")), 0);
  ASSERT_EQ(run("validate --config " + path("v.json") + " --draws 100 --seed 3 --out " + path("v2")), 0);
  const std::string a = slurp(scratch() / "v1" / "validation.txt");
  EXPECT_EQ(a, slurp(scratch() / "v2" / "validation.txt"));
  EXPECT_NE(a.find("/3 cases"), std::string::npos);
  write(scratch() / "v3.json", R"({"validate": {"cases": 3, "threshold": 4}})");
  EXPECT_EQ(run("validate --config " + path("v3.json") + " --draws 100 --seed 3 --out " + path("v3")), 3);
}

TEST(Cli, PreprocessGolden) {
  const fs::path in = SAMPLES_DIR "/preprocess";
  ASSERT_EQ(run("preprocess --signals " + (in / "signals.csv").string() + " --events " + (in / "events.csv").string() +
                " --fixations " + (in / "fixations.csv").string() + " --out " + path("pp")),
            0);
  for (const char* f : {"features.csv", "fixation_features.csv", "preprocess_summary.txt"})
    EXPECT_EQ(slurp(scratch() / "pp" / f), slurp(fs::path(GOLDEN_DIR) / "preprocess" / f)) << f;

  // Its own output is not a signal file.
  EXPECT_EQ(run("preprocess --signals " + path("pp/features.csv") + " --events " + (in / "events.csv").string() +
                " --out " + path("pp2")),
            2);
  write(scratch() / "empty.csv", "");
  EXPECT_EQ(run("preprocess --fixations " + path("empty.csv") + " --out " + path("pp3")), 2);
  EXPECT_EQ(run("preprocess --signals " + (in / "signals.csv").string() + " --out " + path("pp4")), 2);
}
