#ifndef ACME_CLI_HPP
#define ACME_CLI_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "acme/analytic.hpp"
#include "acme/core.hpp"

namespace acme::cli {

struct RunConfig {
  std::string data_path;
  std::vector<std::string> covariate_cols;
  std::string treatment_col;
  std::string outcome_col;
  std::optional<double> known_propensity;
  // Any of: observational, median-optimal, mean-optimal, treat-all,
  // treat-none, threshold.
  std::vector<std::string> policies = {"observational", "median-optimal",
                                       "treat-all", "treat-none",
                                       "mean-optimal"};
  std::optional<std::pair<std::string, double>> threshold;  // column, cutoff
  std::uint64_t fold_seed = 1;
  std::string out_path;
  std::string hist_out;  // defaults to <out stem>_contrast_hist.csv
  std::string median_method = "linear";  // "linear" or "knn"
  int knn_k = 25;
  int hist_bins = 30;
};

struct LoadedData {
  Dataset data;
  std::size_t excluded_missing_outcome = 0;
};

// Header-mapped CSV ingestion. Rows with an empty outcome field are
// excluded (counted); any other schema violation raises an error naming the
// offending data row.
LoadedData dataset_from_csv(const std::string& path,
                            const std::vector<std::string>& covariate_cols,
                            const std::string& treatment_col,
                            const std::string& outcome_col);

// Lossless for finite decimals: doubles are written with 17 significant
// digits.
void write_dataset_csv(const Dataset& data, const std::string& path,
                       const std::vector<std::string>& covariate_cols,
                       const std::string& treatment_col,
                       const std::string& outcome_col);

DiscreteModel model_from_json_file(const std::string& path);
DiscreteModel model_from_json_text(const std::string& text);

// Write-temp-rename so readers never observe partial files.
void atomic_write_file(const std::string& path, const std::string& content);

int cmd_evaluate(const RunConfig& cfg);
int cmd_illustrate(const std::string& model_path, const std::string& out_path,
                   const std::string& json_out = "");
int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 std::optional<std::size_t> reps_override = std::nullopt);

}  // namespace acme::cli

#endif  // ACME_CLI_HPP
