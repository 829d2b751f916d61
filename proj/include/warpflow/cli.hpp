#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace warpflow::cli {

/// Everything a run needs. Defaults are the flag defaults; a JSON file passed
/// with --config replaces them and explicit flags override the file.
struct RunConfig {
  std::string command;
  std::string space = "euclidean";
  int n = 2;
  std::string grid;  ///< empty: 64x128 for n = 2, 512 for n = 1
  std::string surface = "round:r0=1";
  std::string surface_file;  ///< CSV surface; replaces `surface` and fixes n

  std::string flow = "imcf";
  int k = 1;
  double t_final = 1.0;
  double report_dt = 0.1;
  double cfl = 0.2;
  double max_rel_step = 1e-3;
  double eps_mono = 1e-6;
  double tol = 1e-9;
  std::vector<double> orders;  ///< imcf momentum orders; empty means {k}

  std::vector<std::string> verify;  ///< `name[:k=..,l=..]` or `all`
  double tolerance = 1e-6;          ///< verify/sweep pass if relative_deficit >= -tolerance

  int ell = 0;
  std::optional<double> r;
  std::optional<double> invert;
  std::string quantity = "both";  ///< reference: xi, chi or both

  double r_max = 20.0;
  int samples = 100;

  std::string vary;  ///< sweep: `key=from:to:step` over a surface parameter
  std::vector<double> k_list;

  std::string out;
  std::string final_surface;
  std::string format = "csv";
  int workers = 1;

  bool operator==(const RunConfig&) const = default;
};

nlohmann::json to_json(const RunConfig& config);
/// Throws ConfigError on unknown keys or wrongly typed values.
RunConfig config_from_json(const nlohmann::json& j);

/// Cross-field checks (flow vs ambient, verify items, ranges). Throws ConfigError.
void validate_config(const RunConfig& config);

/// One requested inequality.
struct VerifyItem {
  std::string name;
  std::optional<double> k;
  std::optional<int> ell;
};
VerifyItem parse_verify_item(const std::string& text);
/// Expands `all` into the inequalities that apply to the ambient and dimension.
std::vector<VerifyItem> expand_verify(const std::vector<std::string>& items, const std::string& space,
                                      int n);

/// Exit codes.
inline constexpr int exit_ok = 0;
inline constexpr int exit_finding = 2;
inline constexpr int exit_error = 1;
inline constexpr int exit_usage = 64;

/// Full command line, argv[0] included. Results go to --out or `out`,
/// summaries and diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace warpflow::cli
