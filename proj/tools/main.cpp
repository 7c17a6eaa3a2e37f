#include <cstdio>
#include <exception>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "acme/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "acme-otr: policy value estimation under the average conditional "
      "median effect, median-optimal regime learning, exact finite-support "
      "illustrations, and simulation campaigns"};
  app.require_subcommand(1);

  // evaluate
  acme::cli::RunConfig run;
  std::string covariates_csv;
  std::string threshold_spec;
  auto* eval = app.add_subcommand(
      "evaluate", "Estimate policy values from a CSV dataset");
  eval->add_option("--data", run.data_path, "input CSV")->required();
  eval->add_option("--covariates", covariates_csv,
                   "comma-separated covariate column names")
      ->required();
  eval->add_option("--treatment", run.treatment_col, "treatment column (0/1)")
      ->required();
  eval->add_option("--outcome", run.outcome_col, "outcome column")->required();
  double propensity_value = -1.0;
  eval->add_option("--propensity", propensity_value,
                   "known propensity in (0,1); omit to fit a logistic model");
  std::string policies_csv =
      "observational,median-optimal,treat-all,treat-none,mean-optimal";
  eval->add_option("--policies", policies_csv,
                   "comma-separated policies, or 'all'");
  eval->add_option("--threshold", threshold_spec,
                   "custom rule 'column>value' (adds policy 'threshold')");
  eval->add_option("--seed", run.fold_seed, "fold-split seed");
  eval->add_option("--median-method", run.median_method, "linear or knn");
  eval->add_option("--knn-k", run.knn_k, "neighbourhood size for knn");
  eval->add_option("--out", run.out_path, "output report JSON")->required();
  eval->add_option("--hist-out", run.hist_out,
                   "median-contrast histogram CSV path");

  // illustrate
  std::string model_path, table_out, values_out;
  auto* illus = app.add_subcommand(
      "illustrate", "Exact decision table for a finite-support model");
  illus->add_option("--model", model_path, "model JSON")->required();
  illus->add_option("--out", table_out, "output table CSV")->required();
  illus->add_option("--json-out", values_out, "values JSON path");

  // simulate
  std::string sim_config, sim_out_dir;
  std::size_t reps_override = 0;
  auto* sim = app.add_subcommand("simulate", "Run simulation campaigns");
  sim->add_option("--config", sim_config, "simulation config JSON")->required();
  sim->add_option("--out-dir", sim_out_dir, "output directory")->required();
  sim->add_option("--reps", reps_override,
                  "override replication counts (smoke runs)");

  CLI11_PARSE(app, argc, argv);

  auto split_csv = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
      if (c == ',') {
        if (!cur.empty()) out.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
  };

  try {
    if (eval->parsed()) {
      run.covariate_cols = split_csv(covariates_csv);
      if (propensity_value > 0.0) run.known_propensity = propensity_value;
      if (policies_csv == "all")
        policies_csv =
            "observational,median-optimal,treat-all,treat-none,mean-optimal";
      run.policies = split_csv(policies_csv);
      if (!threshold_spec.empty()) {
        const auto pos = threshold_spec.find('>');
        if (pos == std::string::npos)
          throw std::invalid_argument(
              "--threshold must look like 'column>value'");
        run.threshold = {threshold_spec.substr(0, pos),
                         std::stod(threshold_spec.substr(pos + 1))};
        run.policies.push_back("threshold");
      }
      return acme::cli::cmd_evaluate(run);
    }
    if (illus->parsed())
      return acme::cli::cmd_illustrate(model_path, table_out, values_out);
    if (sim->parsed())
      return acme::cli::cmd_simulate(
          sim_config, sim_out_dir,
          reps_override > 0 ? std::optional<std::size_t>(reps_override)
                            : std::nullopt);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "acme-otr: %s\n", e.what());
    return 2;
  }
  return 0;
}
