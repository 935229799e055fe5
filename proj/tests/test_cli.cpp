#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "zenmet/cli.hpp"

using namespace zenmet;
using cli::ConfigError;
using cli::RunConfig;
using doctest::Approx;

namespace {

namespace fs = std::filesystem;

fs::path temp_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "zenmet_cli_tests";
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(is.good());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// Splits a rendered CSV into (echo key-value lines, data lines per table).
struct ParsedCsv {
  std::vector<std::string> echo_lines;  // without the "# config: " prefix
  std::vector<std::vector<std::vector<std::string>>> tables;  // incl. header
};

ParsedCsv parse_csv(const std::string& text) {
  ParsedCsv out;
  std::stringstream ss(text);
  std::string line;
  bool any_table_marker = false;
  while (std::getline(ss, line)) {
    if (line.rfind("# config: ", 0) == 0) {
      out.echo_lines.push_back(line.substr(10));
      continue;
    }
    if (line.rfind("# table: ", 0) == 0) {
      out.tables.emplace_back();
      any_table_marker = true;
      continue;
    }
    if (!line.empty() && line[0] == '#') continue;
    if (line.empty()) continue;
    if (out.tables.empty()) {
      if (any_table_marker) FAIL("data before first table marker");
      out.tables.emplace_back();
    }
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    out.tables.back().push_back(cells);
  }
  return out;
}

}  // namespace

TEST_CASE("defaults match the documented record") {
  const RunConfig cfg = cli::parse_config({});
  CHECK(cfg.gamma == Approx(M_PI).epsilon(1e-15));
  CHECK(cfg.eta == 0.02);
  CHECK(cfg.omega_c == 300.0);
  CHECK(cfg.s == 1.0);
  CHECK(cfg.N == 100.0);
  CHECK(cfg.beta == Approx(0.05).epsilon(1e-15));  // auto -> (2 sqrt N)^-1
  CHECK(cfg.beta_auto);
  CHECK(cfg.h == Approx(0.2 / 300.0).epsilon(1e-15));
  CHECK(cfg.h_auto);
  CHECK(cfg.t_max == 100.0);
  CHECK(cfg.digits == 17);
}

TEST_CASE("flags, files, and precedence") {
  const RunConfig cfg = cli::parse_config(
      {"--gamma", "3.14159265", "--eta", "0.02", "--omega-c", "300", "--s", "1"});
  CHECK(cfg.gamma == Approx(3.14159265));
  CHECK(cfg.omega_c == 300.0);

  const std::string file_text = "eta = 0.01   # comment\n\n# full-line comment\nN = 400\n";
  const RunConfig file_only = cli::parse_config({}, &file_text);
  CHECK(file_only.eta == 0.01);
  CHECK(file_only.N == 400.0);
  CHECK(file_only.beta == Approx(0.025));  // auto re-resolves against file N

  const RunConfig both = cli::parse_config({"--eta", "0.03"}, &file_text);
  CHECK(both.eta == 0.03);  // flag wins
  CHECK(both.N == 400.0);   // file still applies
}

TEST_CASE("config errors carry the offending key") {
  auto msg_of = [](std::vector<std::string> args) {
    try {
      cli::parse_config(args);
      return std::string("no error");
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
  };
  CHECK(msg_of({"--beta", "0.7"}).find("beta must lie in [0, 0.5)") != std::string::npos);
  CHECK(msg_of({"--frobnicate", "1"}).find("unknown key") != std::string::npos);
  CHECK(msg_of({"--eta", "abc"}).find("unparsable") != std::string::npos);
  CHECK(msg_of({"--eta"}).find("missing value") != std::string::npos);
  CHECK(msg_of({"eta", "1"}).find("expected --key") != std::string::npos);
  CHECK(msg_of({"--t-max", "-5"}).find("t_max") != std::string::npos);
  CHECK(msg_of({"--values", "3,2"}).find("strictly increasing") != std::string::npos);

  const std::string bad_file = "eta = 0.01\nwhat = ever\n";
  try {
    cli::parse_config({}, &bad_file);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("ZM_THREADS overrides the threads key") {
  setenv("ZM_THREADS", "3", 1);
  const RunConfig cfg = cli::parse_config({"--threads", "7"});
  CHECK(cfg.threads == 3);
  setenv("ZM_THREADS", "x", 1);
  CHECK_THROWS_AS(cli::parse_config({}), ConfigError);
  unsetenv("ZM_THREADS");
  const RunConfig cfg2 = cli::parse_config({"--threads", "7"});
  CHECK(cfg2.threads == 7);
}

TEST_CASE("spectrum run: atomic CSV with echo round trip") {
  const fs::path out = temp_dir() / "spectrum.csv";
  const RunConfig cfg = cli::parse_config({"--out", out.string()});
  cli::run_subcommand("spectrum", cfg);
  const std::string text = slurp(out);
  const ParsedCsv parsed = parse_csv(text);

  // Echo block re-parses to an identical RunConfig.
  std::string echo_text;
  for (const auto& line : parsed.echo_lines) echo_text += line + "\n";
  const RunConfig back = cli::parse_config({}, &echo_text);
  CHECK(back == cfg);

  REQUIRE(parsed.tables.size() == 1);
  const auto& table = parsed.tables[0];
  REQUIRE(table.size() == 2);  // header + one row
  CHECK(table[0] == std::vector<std::string>{"exists", "varpi_b", "Z", "y0"});
  CHECK(table[1][0] == "true");
  const double varpi_b = std::stod(table[1][1]);
  const double Z = std::stod(table[1][2]);
  CHECK(varpi_b == Approx(-1.70099149768).epsilon(1e-8));
  CHECK(Z == Approx(0.931907127618).epsilon(1e-8));
  CHECK(std::stod(table[1][3]) == Approx(1.0 + M_PI - 6.0).epsilon(1e-10));

  // Identical configs give byte-identical files.
  cli::run_subcommand("spectrum", cfg);
  CHECK(slurp(out) == text);
}

TEST_CASE("dynamics run: noiseless amplitude stays on the unit circle") {
  const fs::path out = temp_dir() / "dynamics.csv";
  const RunConfig cfg = cli::parse_config({"--out", out.string(), "--eta", "0",
                                           "--omega-c", "1", "--t-max", "3"});
  cli::run_subcommand("dynamics", cfg);
  const ParsedCsv parsed = parse_csv(slurp(out));
  REQUIRE(parsed.tables.size() == 1);
  const auto& table = parsed.tables[0];
  CHECK(table[0] == std::vector<std::string>{"t", "re_c", "im_c", "abs_c"});
  REQUIRE(table.size() == 152);  // header + 151 steps at h = 0.02
  for (std::size_t i = 1; i < table.size(); ++i)
    CHECK(std::stod(table[i][3]) == Approx(1.0).epsilon(1e-10));
}

TEST_CASE("precision run emits the local-minima footer") {
  const fs::path out = temp_dir() / "precision.csv";
  const RunConfig cfg = cli::parse_config({"--out", out.string(), "--eta", "0",
                                           "--omega-c", "1", "--t-max", "3",
                                           "--h", "0.002"});
  cli::run_subcommand("precision", cfg);
  const std::string text = slurp(out);
  CHECK(text.find("# table: precision") != std::string::npos);
  CHECK(text.find("# table: local_minima") != std::string::npos);
  const ParsedCsv parsed = parse_csv(text);
  REQUIRE(parsed.tables.size() == 2);
  REQUIRE(parsed.tables[1].size() == 4);  // header + three minima
  const double t0 = std::stod(parsed.tables[1][1][0]);
  CHECK(std::fabs(t0 - 0.5) < 0.02);  // grid step + the 1/t envelope pull
  const double dg0 = std::stod(parsed.tables[1][1][1]);
  const InputState st(100.0, 0.05);
  CHECK(dg0 == Approx(ideal_min_delta_gamma(st, t0)).epsilon(0.02));
}

TEST_CASE("sweep run writes the table with the axis column") {
  const fs::path out = temp_dir() / "sweep.csv";
  const RunConfig cfg = cli::parse_config({"--out", out.string(), "--axis", "omega_c",
                                           "--values", "207.0,207.2", "--t-max", "5",
                                           "--h", "0.002", "--threads", "2"});
  cli::run_subcommand("sweep", cfg);
  const ParsedCsv parsed = parse_csv(slurp(out));
  REQUIRE(parsed.tables.size() == 1);
  const auto& table = parsed.tables[0];
  CHECK(table[0][0] == "omega_c");
  REQUIRE(table.size() == 3);
  CHECK(table[1][1] == "false");
  CHECK(table[2][1] == "true");
}

TEST_CASE("exit codes and partial-output behaviour") {
  const fs::path out = temp_dir() / "codes.csv";
  CHECK(cli::main_impl({"spectrum", "--out", out.string()}) == 0);
  const std::string before = slurp(out);

  CHECK(cli::main_impl({"unknown-subcommand"}) == 2);
  CHECK(cli::main_impl({"spectrum", "--beta", "0.7"}) == 2);
  CHECK(cli::main_impl({"sweep", "--out", out.string()}) == 2);  // missing values
  CHECK(cli::main_impl({"reproduce", "--out", out.string()}) == 2);  // missing target
  CHECK(cli::main_impl({"reproduce", "figX", "--out", out.string()}) == 2);
  CHECK(cli::main_impl({"spectrum", "--out", "/nonexistent_dir_zm/x.csv"}) == 3);
  CHECK(cli::main_impl({"--help"}) == 0);

  // The failed runs never touched the previous output.
  CHECK(slurp(out) == before);
  CHECK_FALSE(fs::exists(out.string() + ".tmp"));
}

TEST_CASE("reproduce accepts the positional target") {
  const fs::path out = temp_dir() / "fig1b.csv";
  const int rc = cli::main_impl({"reproduce", "fig1b", "--out", out.string(),
                                 "--values", "207.0,207.2", "--t-max", "5",
                                 "--h", "0.002", "--threads", "2"});
  CHECK(rc == 0);
  const std::string text = slurp(out);
  CHECK(text.find("# table: fig1b_plateau") != std::string::npos);
  CHECK(text.find("# table: fig1b_spectrum_levels") != std::string::npos);
}
