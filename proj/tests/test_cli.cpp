#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "detail/spec_string.hpp"
#include "warpflow/cli.hpp"
#include "warpflow/error.hpp"
#include "warpflow/surface.hpp"

using namespace warpflow;
using namespace warpflow::cli;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result call(std::vector<std::string> args) {
  args.insert(args.begin(), "warpflow");
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    FAIL("no column " << name);
    return 0;
  }
  double num(std::size_t row, const std::string& name) const {
    return detail::to_double(rows.at(row).at(col(name)), name);
  }
};

// Unquoted CSV; every row must match the header width.
Csv parse_csv(const std::string& text) {
  Csv csv;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    for (auto c : detail::split(line, ',')) cells.emplace_back(c);
    if (first) {
      csv.header = cells;
      first = false;
    } else {
      REQUIRE(cells.size() == csv.header.size());
      csv.rows.push_back(cells);
    }
  }
  return csv;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("warpflow_test_" + name);
}

}  // namespace

TEST_CASE("config round trip through JSON and --config") {
  const auto r = call({"evolve", "--space", "hyperbolic", "--flow", "sx", "--k", "2", "--t-final", "0.5",
                       "--orders", "1,2.5", "--grid", "16x32", "--workers", "3", "--print-config"});
  REQUIRE(r.code == exit_ok);
  const auto j = nlohmann::json::parse(r.out);
  const auto c = config_from_json(j);
  CHECK(c.command == "evolve");
  CHECK(c.k == 2);
  CHECK(c.orders == std::vector<double>{1.0, 2.5});
  CHECK(to_json(c) == j);
  CHECK(config_from_json(to_json(c)) == c);

  const auto path = temp_path("config.json");
  std::ofstream(path) << j.dump();
  const auto again = call({"evolve", "--config", path.string(), "--print-config"});
  REQUIRE(again.code == exit_ok);
  CHECK(nlohmann::json::parse(again.out) == j);

  // Flags override the file.
  const auto over = call({"evolve", "--config", path.string(), "--t-final", "2", "--print-config"});
  REQUIRE(over.code == exit_ok);
  CHECK(config_from_json(nlohmann::json::parse(over.out)).t_final == 2.0);

  RunConfig defaults;
  defaults.r = 1.5;
  CHECK(config_from_json(to_json(defaults)) == defaults);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"colour", 1}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"n", "two"}}), ConfigError);
  std::ofstream(path) << R"({"bogus": true})";
  CHECK(call({"verify", "--config", path.string()}).code == exit_usage);
  std::filesystem::remove(path);
}

TEST_CASE("worker count from the environment") {
  ::setenv("WARPFLOW_WORKERS", "4", 1);
  auto r = call({"probe", "--space", "hyperbolic", "--print-config"});
  CHECK(config_from_json(nlohmann::json::parse(r.out)).workers == 4);
  r = call({"probe", "--space", "hyperbolic", "--workers", "2", "--print-config"});
  CHECK(config_from_json(nlohmann::json::parse(r.out)).workers == 2);
  ::setenv("WARPFLOW_WORKERS", "many", 1);
  CHECK(call({"probe"}).code == exit_usage);
  ::unsetenv("WARPFLOW_WORKERS");
}

TEST_CASE("usage errors exit 64") {
  CHECK(call({}).code == exit_usage);
  CHECK(call({"frobnicate"}).code == exit_usage);
  CHECK(call({"evolve", "--space", "sphere", "--flow", "euclidean-inverse", "--k", "1"}).code == exit_usage);
  CHECK(call({"evolve", "--flow", "bgl", "--space", "sphere", "--k", "1"}).code == exit_usage);
  CHECK(call({"evolve", "--t-final", "-1"}).code == exit_usage);
  CHECK(call({"evolve", "--space", "moon"}).code == exit_usage);
  CHECK(call({"evolve", "--grid", "3x5"}).code == exit_usage);
  CHECK(call({"verify", "--space", "hyperbolic", "--verify", "hyperbolic-ref:k=1,l=2"}).code == exit_usage);
  CHECK(call({"verify", "--verify", "weinstock", "--space", "sphere"}).code == exit_usage);
  CHECK(call({"verify", "--verify", "nonsense"}).code == exit_usage);
  CHECK(call({"verify"}).code == exit_usage);
  CHECK(call({"verify", "--verify", "all", "--format", "xml"}).code == exit_usage);
  CHECK(call({"reference", "--space", "hyperbolic"}).code == exit_usage);
  CHECK(call({"reference", "--space", "euclidean", "--r", "1"}).code == exit_usage);
  CHECK(call({"sweep", "--vary", "eps"}).code == exit_usage);
  CHECK(call({"dump-surface", "--surface-file", "/nonexistent/surface.csv"}).code == exit_usage);
  CHECK(call({"--help"}).code == exit_ok);
}

TEST_CASE("verify") {
  auto r = call({"verify", "--grid", "32x64", "--verify", "all"});
  CHECK(r.code == exit_ok);
  auto csv = parse_csv(r.out);
  CHECK(csv.header == std::vector<std::string>{"name", "k", "ell", "lhs", "rhs", "deficit", "relative_deficit",
                                               "equality_expected", "class_flags"});
  CHECK(csv.rows.size() >= 10);
  for (std::size_t i = 0; i < csv.rows.size(); ++i) CHECK(std::abs(csv.num(i, "relative_deficit")) <= 1e-6);

  r = call({"verify", "--grid", "32x64", "--surface", "legendre:r0=1,eps=0.2,l=2", "--verify", "weinstock"});
  CHECK(r.code == exit_ok);
  csv = parse_csv(r.out);
  CHECK(csv.rows.at(0).at(0) == "weinstock");
  CHECK(csv.num(0, "deficit") > 0.0);

  // Outside the k-convex class the Phi-quermass inequality fails; that is a finding.
  r = call({"verify", "--grid", "48x96", "--surface", "legendre:r0=1,eps=0.3,l=6", "--verify", "phi-quermass:k=2"});
  CHECK(r.code == exit_finding);
  CHECK(r.err.find("finding") != std::string::npos);
  CHECK(parse_csv(r.out).rows.at(0).back().find("k_convex=0") != std::string::npos);

  for (const char* space : {"hyperbolic", "sphere"}) {
    r = call({"verify", "--space", space, "--grid", "32x64", "--surface", "round:r0=0.7", "--verify", "all",
              "--format", "json"});
    CHECK(r.code == exit_ok);
    for (const auto& row : nlohmann::json::parse(r.out)) CHECK(std::abs(row["relative_deficit"].get<double>()) <= 1e-6);
  }
  r = call({"verify", "--n", "1", "--surface", "round:r0=2", "--verify", "curve"});
  CHECK(r.code == exit_ok);
  r = call({"verify", "--n", "1", "--surface", "legendre:r0=1,eps=0.3,l=5", "--verify", "curve"});
  CHECK(r.code == exit_error);
}

TEST_CASE("evolve") {
  auto r = call({"evolve", "--space", "hyperbolic", "--flow", "sx", "--k", "1", "--surface", "round:r0=1",
                 "--grid", "16x32", "--t-final", "1", "--report-dt", "0.25"});
  CHECK(r.code == exit_ok);
  auto csv = parse_csv(r.out);
  REQUIRE(csv.rows.size() == 5);
  const std::vector<std::string> lead{"t", "area", "volume", "W0", "W1", "W2", "W3", "momentum_k1",
                                      "phiE0", "phiE1", "phiE2", "monotone_hyp_k1", "monotone_hyp_W0",
                                      "monotone_hyp_W1", "newton_maclaurin_k1", "minH", "minE1",
                                      "min_static_margin", "dt"};
  CHECK(csv.header == lead);
  for (std::size_t i = 1; i < csv.rows.size(); ++i) {
    CHECK(std::abs(csv.num(i, "area") / csv.num(0, "area") - 1) < 1e-10);
    CHECK(std::abs(csv.num(i, "monotone_hyp_k1") / csv.num(0, "monotone_hyp_k1") - 1) < 1e-10);
  }

  const auto surf = temp_path("final.csv");
  r = call({"evolve", "--grid", "16x32", "--surface", "legendre:r0=1,eps=0.2,l=2", "--t-final", "0.3",
            "--orders", "1,2", "--format", "json", "--final-surface", surf.string()});
  CHECK(r.code == exit_ok);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["termination"] == "reached_t_final");
  CHECK(j["samples"].size() == 4);
  CHECK(j["samples"][0].contains("Q_imcf_k2"));
  CHECK(j["samples"][0].contains("momentum_k2"));
  CHECK(j["samples"][0]["min_static_margin"].is_null());
  std::stringstream ss;
  ss << std::ifstream(surf).rdbuf();
  const auto last = surface_from_csv(ss.str(), make_space_form(0));
  CHECK(last.u.size() == 16u * 32u);
  CHECK(std::abs(last.u[0] - 1.2) < 0.3);
  std::filesystem::remove(surf);

  // Sphere IMCF reaching the equator is an expected stop.
  r = call({"evolve", "--space", "sphere", "--grid", "16x32", "--surface", "round:r0=1.2", "--t-final", "5",
            "--report-dt", "0.5"});
  CHECK(r.code == exit_ok);
  CHECK(r.err.find("cone_violation") != std::string::npos);

  // Inadmissible start.
  r = call({"evolve", "--grid", "16x32", "--surface", "legendre:r0=1,eps=-0.6,l=6"});
  CHECK(r.code == exit_error);
}

TEST_CASE("outputs are byte-identical across worker counts") {
  const std::vector<std::string> base{"evolve", "--space", "hyperbolic", "--flow", "sx", "--grid", "16x32",
                                      "--surface", "bandlimited:seed=5,r0=1,amp=0.05,lmax=3",
                                      "--t-final", "0.2", "--report-dt", "0.1"};
  auto a_args = base, b_args = base;
  a_args.insert(a_args.end(), {"--workers", "1"});
  b_args.insert(b_args.end(), {"--workers", "4"});
  const auto a = call(a_args), b = call(b_args);
  CHECK(a.code == exit_ok);
  CHECK(a.out == b.out);
  const auto va = call({"verify", "--grid", "32x64", "--surface", "bandlimited:seed=2,r0=1,amp=0.05,lmax=4",
                        "--verify", "all", "--workers", "1"});
  const auto vb = call({"verify", "--grid", "32x64", "--surface", "bandlimited:seed=2,r0=1,amp=0.05,lmax=4",
                        "--verify", "all", "--workers", "4"});
  CHECK(va.out == vb.out);
}

TEST_CASE("reference and probe") {
  auto r = call({"reference", "--space", "hyperbolic", "--k", "1", "--ell", "0", "--r", "1"});
  REQUIRE(r.code == exit_ok);
  auto csv = parse_csv(r.out);
  CHECK(csv.num(0, "value") == doctest::Approx(12.3758).epsilon(1e-5));
  CHECK(csv.num(1, "value") == doctest::Approx(std::numbers::pi * (std::sinh(2.0) - 2)).epsilon(1e-12));
  r = call({"reference", "--space", "hyperbolic", "--ell", "0", "--invert", detail::format_double(csv.num(1, "value"))});
  CHECK(parse_csv(r.out).num(0, "r") == doctest::Approx(1.0).epsilon(1e-10));
  r = call({"reference", "--space", "sphere", "--ell", "1", "--invert", "100"});
  CHECK(r.code == exit_error);

  r = call({"probe", "--space", "hyperbolic", "--r-max", "20", "--samples", "100", "--format", "json"});
  REQUIRE(r.code == exit_ok);
  const auto j = nlohmann::json::parse(r.out);
  for (const auto& v : j["verdicts"]) CHECK(v["holds"].get<bool>());
  CHECK(j["samples"].size() == 100);
  r = call({"probe", "--space", "custom:power_cubic,beta=1,a=0,c=1", "--r-max", "100"});
  csv = parse_csv(r.out);
  bool seen = false;
  for (std::size_t i = 0; i < csv.rows.size(); ++i) {
    if (csv.rows[i][0] == "dlambda_bounded") {
      CHECK(csv.rows[i][1] == "0");
      seen = true;
    }
    if (csv.rows[i][0] == "liminf_curvature_ratio") CHECK(csv.num(i, "value") == doctest::Approx(2.0 / 3).epsilon(0.01));
  }
  CHECK(seen);
}

TEST_CASE("sweep") {
  auto r = call({"sweep", "--grid", "32x64", "--surface", "legendre:r0=1,eps=0,l=2", "--vary", "eps=0:0.3:0.05",
                 "--verify", "boundary-momentum:k=1"});
  REQUIRE(r.code == exit_ok);
  auto csv = parse_csv(r.out);
  REQUIRE(csv.rows.size() == 7);
  CHECK(csv.rows[3][csv.col("value")] == "0.15");
  CHECK(std::abs(csv.num(0, "deficit")) < 1e-12);
  for (std::size_t i = 1; i < csv.rows.size(); ++i) CHECK(csv.num(i, "deficit") > csv.num(i - 1, "deficit"));
  CHECK(r.err.find("min deficit boundary-momentum k=1: 0 at eps=0") != std::string::npos);

  r = call({"sweep", "--grid", "32x64", "--k-list", "1,1.5,2,3"});
  REQUIRE(r.code == exit_ok);
  csv = parse_csv(r.out);
  REQUIRE(csv.rows.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(csv.num(i, "relative_deficit")) < 1e-12);

  r = call({"sweep", "--grid", "24x48", "--surface", "bandlimited:seed=1,r0=1,amp=0.05,lmax=4", "--vary",
            "seed=1:20:1"});
  REQUIRE(r.code == exit_ok);
  csv = parse_csv(r.out);
  REQUIRE(csv.rows.size() == 20);
  for (std::size_t i = 0; i < 20; ++i) CHECK(csv.num(i, "deficit") > 0.0);
}

TEST_CASE("dump-surface round trip") {
  auto r = call({"dump-surface", "--grid", "16x32", "--surface", "legendre:r0=1,eps=0.1,l=3"});
  REQUIRE(r.code == exit_ok);
  const auto e = make_space_form(0);
  const auto g = surface_from_csv(r.out, e);
  CHECK(g.grid.dims_string() == "16x32");
  const auto path = temp_path("surface.csv");
  std::ofstream(path) << r.out;
  const auto again = call({"dump-surface", "--surface-file", path.string()});
  CHECK(again.out == r.out);
  const auto v = call({"verify", "--surface-file", path.string(), "--verify", "kwong-miao:k=1"});
  CHECK(v.code == exit_ok);
  std::filesystem::remove(path);
  r = call({"dump-surface", "--n", "1", "--grid", "64", "--format", "json"});
  CHECK(nlohmann::json::parse(r.out)["u"].size() == 64);
}
