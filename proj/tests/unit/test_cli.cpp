#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "json.hpp"

using nlohmann::json;

namespace {

const std::string kData = PARTIALID_DATA_DIR;

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = partialid::cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string temp_file(const std::string& name, const std::string& contents) {
  const auto path = std::filesystem::temp_directory_path() / ("partialid_cli_test_" + name);
  std::ofstream(path) << contents;
  return path.string();
}

void collect_numbers(const json& j, std::vector<double>& out) {
  if (j.is_number()) {
    out.push_back(j.get<double>());
  } else if (j.is_structured()) {
    for (const auto& v : j) collect_numbers(v, out);
  }
}

// Numeric tokens of a report, skipping digits that are part of a name
// such as NDE0 or S(1).
std::vector<std::string> numeric_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  auto is_name = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'; };
  while (i < text.size()) {
    const bool neg = text[i] == '-' && i + 1 < text.size() && std::isdigit(static_cast<unsigned char>(text[i + 1]));
    if ((std::isdigit(static_cast<unsigned char>(text[i])) || neg) && (i == 0 || !is_name(text[i - 1]))) {
      std::size_t j = i + (neg ? 1 : 0);
      while (j < text.size() && (std::isdigit(static_cast<unsigned char>(text[j])) || text[j] == '.' ||
                                 text[j] == 'e' || ((text[j] == '-' || text[j] == '+') && text[j - 1] == 'e'))) {
        ++j;
      }
      out.push_back(text.substr(i, j - i));
      i = j;
    } else {
      ++i;
    }
  }
  return out;
}

std::string format(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

// Every number printed in the text report appears in the JSON report, at
// the precision the text shows.
void check_text_numbers_in_json(const std::vector<std::string>& args) {
  auto text_args = args;
  text_args.insert(text_args.end(), {"--output", "text"});
  auto json_args = args;
  json_args.insert(json_args.end(), {"--output", "json"});
  const Run t = run(text_args);
  const Run j = run(json_args);
  REQUIRE(t.code == 0);
  REQUIRE(j.code == 0);
  std::vector<double> numbers;
  collect_numbers(json::parse(j.out), numbers);
  std::set<std::string> shown;
  for (double v : numbers) {
    shown.insert(format("%.3f", v));
    shown.insert(format("%.3g", v));
    shown.insert(format("%.0f", v));
    shown.insert(format("%g", v));
  }
  const auto tokens = numeric_tokens(t.out);
  CHECK(!tokens.empty());
  for (const auto& tok : tokens) {
    CAPTURE(tok);
    CHECK(shown.count(tok) == 1);
  }
}

struct NoColor {
  NoColor() { setenv("PARTIALID_NO_COLOR", "1", 1); }
  ~NoColor() { unsetenv("PARTIALID_NO_COLOR"); }
};

}  // namespace

TEST_CASE("AZT bounds through the command line") {
  const Run r = run({"ate-bounds", "--input", kData + "/azt.json"});
  REQUIRE(r.code == 0);
  CHECK(r.err.empty());
  const auto j = json::parse(r.out);
  CHECK(j["naive"].get<double>() == doctest::Approx(-0.476).epsilon(0.002));
  CHECK(j["bounds"]["lo"].get<double>() == doctest::Approx(-0.7));
  CHECK(j["bounds"]["hi"].get<double>() == doctest::Approx(0.3));
  CHECK(j["bounds_exact"]["lo"] == "-7/10");
  CHECK(j["bounds_exact"]["hi"] == "3/10");
  CHECK(j["provenance"]["subcommand"] == "ate-bounds");
  CHECK(j["provenance"]["input_digest"].get<std::string>().rfind("fnv1a64:", 0) == 0);
}

TEST_CASE("assumptions and confounder scenario") {
  const Run mts = run({"ate-bounds", "--input", kData + "/azt.json", "--assumptions", "mts"});
  REQUIRE(mts.code == 0);
  CHECK(json::parse(mts.out)["bounds"]["hi"].get<double>() == doctest::Approx(-0.4762).epsilon(1e-3));

  const Run both = run({"ate-bounds", "--input", kData + "/azt.json", "--assumptions", "mts,mtr"});
  CHECK(both.code == 3);
  CHECK(both.out.empty());
  CHECK(both.err.find("residual") != std::string::npos);

  const Run adj = run({"ate-bounds", "--input", kData + "/azt.json", "--gamma0", "0.5", "--gamma1", "0.2"});
  REQUIRE(adj.code == 0);
  const auto j = json::parse(adj.out);
  CHECK(j["bias_adjusted"]["value"].get<double>() == doctest::Approx(-0.4762 - 0.1).epsilon(1e-3));

  CHECK(run({"ate-bounds", "--input", kData + "/azt.json", "--gamma0", "2"}).code == 2);
  CHECK(run({"ate-bounds", "--input", kData + "/azt.json", "--assumptions", "mtx"}).code == 2);
}

TEST_CASE("rescaled summary input") {
  const auto path = temp_file("summary.json",
                              R"({"design": "ate_summary", "mean_y": {"z0": 20, "z1": 60}, "pz": {"z0": 0.5, "z1": 0.5}})");
  const Run r = run({"ate-bounds", "--input", path, "--rescale", "0,100"});
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  CHECK(j["naive"].get<double>() == doctest::Approx(40.0));
  CHECK(j["bounds"]["hi"].get<double>() - j["bounds"]["lo"].get<double>() == doctest::Approx(100.0));
  CHECK(run({"ate-bounds", "--input", path}).code == 2);
}

TEST_CASE("GATE through the command line") {
  const Run r = run({"gate", "--input", kData + "/cholestyramine.json"});
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  CHECK(j["closed_form"]["lo"].get<double>() == doctest::Approx(0.392));
  CHECK(j["closed_form"]["hi"].get<double>() == doctest::Approx(0.780));
  CHECK(j["agree"] == true);
  CHECK(j["lp"]["lo"].get<double>() == doctest::Approx(0.392));
  CHECK(j["iv_estimand"].get<double>() == doctest::Approx(0.760).epsilon(1e-3));
  CHECK(j["excludes_zero"] == true);
  CHECK(!j["certificates"]["argmin"].empty());

  const Run counts = run({"gate", "--input", kData + "/cholestyramine_counts.json"});
  REQUIRE(counts.code == 0);
  CHECK(json::parse(counts.out)["closed_form"]["lo"].get<double>() == doctest::Approx(0.391).epsilon(2e-3));
}

TEST_CASE("data contradicting the assumptions exit with status 3") {
  const auto path = temp_file("violating.json", R"({"design": "three_var", "counts": {
    "z0": {"y0s0": 0, "y0s1": 50, "y1s0": 50, "y1s1": 0},
    "z1": {"y0s0": 90, "y0s1": 10, "y1s0": 0, "y1s1": 0}}})");
  const Run r = run({"gate", "--input", path});
  CHECK(r.code == 3);
  CHECK(r.out.empty());
  CHECK(r.err.rfind("lp: ", 0) == 0);

  const auto reversed = temp_file("reversed.json", R"({"design": "three_var", "outcome_defined_when_s0": false,
    "counts": {"z0": {"s0": 90, "y0s1": 5, "y1s1": 5}, "z1": {"s0": 50, "y0s1": 25, "y1s1": 25}}})");
  const Run p = run({"principal", "--input", reversed});
  CHECK(p.code == 3);
  CHECK(p.out.empty());
}

TEST_CASE("malformed input exits with status 2 and prints nothing") {
  const auto broken = temp_file("broken.json", R"({"design": "two_arm", "counts": {"z0": )");
  for (const char* cmd : {"ate-bounds", "gate", "principal", "mediation", "uncertainty"}) {
    CAPTURE(cmd);
    const Run r = run({cmd, "--input", broken});
    CHECK(r.code == 2);
    CHECK(r.out.empty());
    CHECK(r.err.rfind("data: ", 0) == 0);
  }
  const auto negative = temp_file("negative.json", R"({"design": "two_arm",
    "counts": {"z1": {"y1": -3, "y0": 900}, "z0": {"y1": 500, "y0": 100}}})");
  CHECK(run({"ate-bounds", "--input", negative}).code == 2);
  CHECK(run({"ate-bounds", "--input", "/nonexistent/file.json"}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({}).code == 2);
  CHECK(run({"principal", "--input", kData + "/pertussis.json", "--gamma-grid", "1:0:1"}).code == 2);
  CHECK(run({"principal", "--input", kData + "/pertussis.json", "--alpha", "1.5"}).code == 2);
  CHECK(run({"uncertainty", "--input", kData + "/pertussis.json", "--band", "--B", "50"}).code == 2);
  // A design the subcommand cannot use.
  CHECK(run({"principal", "--input", kData + "/azt.json"}).code == 2);
}

TEST_CASE("help and version") {
  const Run h = run({"--help"});
  CHECK(h.code == 0);
  CHECK(h.out.find("principal") != std::string::npos);
  const Run v = run({"--version"});
  CHECK(v.code == 0);
  CHECK(v.out.find("0.1.0") != std::string::npos);
}

TEST_CASE("options before or after the subcommand") {
  const Run a = run({"--input", kData + "/azt.json", "ate-bounds"});
  const Run b = run({"ate-bounds", "--input", kData + "/azt.json"});
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
}

TEST_CASE("principal curve and CSV") {
  const Run r = run({"principal", "--input", kData + "/pertussis.json", "--gamma-grid", "-1:1:1", "--infinite-endpoints"});
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  CHECK(j["bounds"]["lo"].get<double>() == doctest::Approx(-0.566).epsilon(1e-3));
  CHECK(j["curve"].size() == 5);
  CHECK(j["curve"][2]["beta_hat"].get<double>() == doctest::Approx(-0.305).epsilon(2e-3));
  CHECK(j["diagnostics"]["p_value_upper"].get<double>() < 1e-4);

  const Run csv = run({"principal", "--input", kData + "/pertussis.csv", "--format", "csv", "--gamma-grid", "0",
                       "--output", "csv"});
  REQUIRE(csv.code == 0);
  CHECK(csv.out.rfind("gamma,beta_hat,se,ci_lo,ci_hi\n", 0) == 0);
  CHECK(std::count(csv.out.begin(), csv.out.end(), '\n') == 2);
}

TEST_CASE("mediation through the command line") {
  const Run r = run({"mediation", "--input", kData + "/cholestyramine.json"});
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  CHECK(j["total"].get<double>() == doctest::Approx(0.465));
  CHECK(j["identified"].is_null());
  CHECK(j.contains("nde0"));
  CHECK(j.contains("nie1"));
}

TEST_CASE("msm simulation defaults to CSV") {
  const Run r = run({"msm-sim", "--config", kData + "/sim.json", "--gamma-grid", "-1:1:1"});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("gamma,eta1,se\n", 0) == 0);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 4);

  const auto cohort = (std::filesystem::temp_directory_path() / "partialid_cli_test_cohort.csv").string();
  const Run exp = run({"msm-sim", "--config", kData + "/sim.json", "--gamma-grid", "0", "--export-cohort", cohort});
  REQUIRE(exp.code == 0);
  const Run imp = run({"msm-sim", "--cohort", cohort, "--gamma-grid", "0"});
  REQUIRE(imp.code == 0);
  CHECK(imp.out == exp.out);

  const auto bad = temp_file("bad_config.json", R"({"tau": 4, "colour": "red"})");
  CHECK(run({"msm-sim", "--config", bad}).code == 2);
}

TEST_CASE("output is byte-identical across runs") {
  const std::vector<std::vector<std::string>> cmds = {
      {"ate-bounds", "--input", kData + "/azt.json"},
      {"gate", "--input", kData + "/cholestyramine.json"},
      {"principal", "--input", kData + "/pertussis.json"},
      {"mediation", "--input", kData + "/cholestyramine_counts.json", "--monotone"},
      {"msm-sim", "--config", kData + "/sim.json", "--output", "json", "--seed", "3"},
      {"uncertainty", "--input", kData + "/pertussis.json", "--band", "--B", "300", "--seed", "11"},
  };
  for (const auto& c : cmds) {
    CAPTURE(c[0]);
    const Run a = run(c);
    const Run b = run(c);
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);
  }
  const Run s1 = run({"uncertainty", "--input", kData + "/pertussis.json", "--band", "--B", "300", "--seed", "11"});
  const Run s2 = run({"uncertainty", "--input", kData + "/pertussis.json", "--band", "--B", "300", "--seed", "12"});
  CHECK(s1.out != s2.out);
}

TEST_CASE("uncertainty report") {
  const Run r = run({"uncertainty", "--input", kData + "/pertussis.json"});
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  REQUIRE(j["rows"].size() == 4);
  const auto& first = j["rows"][0];
  CHECK(first["ignorance"]["lo"].get<double>() == doctest::Approx(-0.49).epsilon(0.02));
  CHECK(first["strong"]["excludes_zero"] == true);
}

TEST_CASE("text numbers all appear in the JSON report") {
  NoColor guard;
  check_text_numbers_in_json({"ate-bounds", "--input", kData + "/azt.json", "--gamma0", "0.3", "--gamma1", "-0.5"});
  check_text_numbers_in_json({"gate", "--input", kData + "/cholestyramine.json"});
  check_text_numbers_in_json({"principal", "--input", kData + "/pertussis.json", "--gamma-grid", "-2:2:0.5"});
  check_text_numbers_in_json({"mediation", "--input", kData + "/cholestyramine_counts.json"});
  check_text_numbers_in_json({"mediation", "--input", kData + "/cholestyramine_counts.json", "--monotone"});
  check_text_numbers_in_json({"msm-sim", "--config", kData + "/sim.json", "--gamma-grid", "0:1:0.5"});
  check_text_numbers_in_json({"uncertainty", "--input", kData + "/pertussis.json", "--band", "--B", "200"});
}

TEST_CASE("text styling follows the environment") {
  unsetenv("PARTIALID_NO_COLOR");
  const Run styled = run({"ate-bounds", "--input", kData + "/azt.json", "--output", "text"});
  CHECK(styled.out.find('\033') != std::string::npos);
  NoColor guard;
  const Run plain = run({"ate-bounds", "--input", kData + "/azt.json", "--output", "text"});
  CHECK(plain.out.find('\033') == std::string::npos);
}

TEST_CASE("input digest") {
  CHECK(partialid::cli::fnv1a64("") == "cbf29ce484222325");
  CHECK(partialid::cli::fnv1a64("a") == "af63dc4c8601ec8c");
}
