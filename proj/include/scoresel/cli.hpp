#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "scoresel/trainer.hpp"

namespace scoresel {

/// Fully resolved run configuration. Every field remembers whether it came
/// from the user's config file or from the built-in default.
struct RunConfig {
  std::string data;
  bool has_header = true;
  std::string label_column;  // empty: unlabeled
  std::array<double, 3> ratios{0.72, 0.08, 0.20};
  std::uint64_t split_seed = 0;
  bool standardize = true;
  TrainConfig train;
  bool ols = true;
  bool classify = true;
  double ridge_eps = 1e-8;
  std::size_t n_trees = 50;
  std::string out_dir = "out";
  std::size_t jobs = 1;

  std::uint64_t sweep_seed = 0;
  std::vector<std::size_t> n_values{500, 1000, 1500, 2000};
  std::vector<double> lambda_values;  // empty: default grid
  std::vector<std::size_t> k_values{2, 3, 4, 5, 6, 7, 8};
  std::size_t deletions = 3;
  std::vector<std::uint64_t> overlap_seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};

  nlohmann::json sources;  // key -> "user" | "default"
};

/// Parse a JSON config object. Unknown keys and ill-typed values raise
/// ConfigError naming the key.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);
nlohmann::json resolved_config_json(const RunConfig& cfg);

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name. Returns 0 on success, 2 for bad configuration or usage,
/// 1 for runtime failures.
int run_command(const std::vector<std::string>& args, std::ostream& out,
                std::ostream& err);

}  // namespace scoresel
