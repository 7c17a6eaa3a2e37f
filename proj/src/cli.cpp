#include "acme/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "acme/estimator.hpp"
#include "acme/math_util.hpp"
#include "acme/nuisance.hpp"
#include "acme/simulation.hpp"

namespace acme::cli {

using nlohmann::json;

namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

bool parse_double(const std::string& s, double* out) {
  if (s.empty()) return false;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return false;
  *out = v;
  return true;
}

}  // namespace

LoadedData dataset_from_csv(const std::string& path,
                            const std::vector<std::string>& covariate_cols,
                            const std::string& treatment_col,
                            const std::string& outcome_col) {
  if (covariate_cols.empty())
    throw std::invalid_argument("csv: need at least one covariate column");
  std::ifstream in(path);
  if (!in) throw std::runtime_error("csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("csv: '" + path + "' is empty");
  const auto header = split_csv_line(line);
  auto col_index = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw std::runtime_error("csv: column '" + name + "' not found in header");
    return static_cast<std::size_t>(it - header.begin());
  };
  std::vector<std::size_t> xcols;
  for (const auto& c : covariate_cols) xcols.push_back(col_index(c));
  const std::size_t acol = col_index(treatment_col);
  const std::size_t ycol = col_index(outcome_col);

  std::vector<std::vector<double>> xs;
  std::vector<int> as;
  std::vector<double> ys;
  std::size_t excluded = 0;
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    ++row_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw std::runtime_error("csv: data row " + std::to_string(row_no) +
                               " has " + std::to_string(fields.size()) +
                               " fields, expected " +
                               std::to_string(header.size()));
    if (fields[ycol].empty()) {  // missing outcome: excluded, not an error
      ++excluded;
      continue;
    }
    double y;
    if (!parse_double(fields[ycol], &y))
      throw std::runtime_error("csv: data row " + std::to_string(row_no) +
                               ": outcome '" + fields[ycol] + "' is not numeric");
    double av;
    if (!parse_double(fields[acol], &av) || (av != 0.0 && av != 1.0))
      throw std::runtime_error("csv: data row " + std::to_string(row_no) +
                               ": treatment '" + fields[acol] +
                               "' must be 0 or 1");
    std::vector<double> xrow(xcols.size());
    for (std::size_t j = 0; j < xcols.size(); ++j)
      if (!parse_double(fields[xcols[j]], &xrow[j]))
        throw std::runtime_error("csv: data row " + std::to_string(row_no) +
                                 ": covariate '" + fields[xcols[j]] +
                                 "' is not numeric");
    xs.push_back(std::move(xrow));
    as.push_back(static_cast<int>(av));
    ys.push_back(y);
  }
  if (xs.empty())
    throw std::runtime_error("csv: no usable data rows in '" + path + "'");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(xs.size()),
                    static_cast<Eigen::Index>(xcols.size()));
  Eigen::VectorXd y(static_cast<Eigen::Index>(ys.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j = 0; j < xcols.size(); ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = xs[i][j];
    y[static_cast<Eigen::Index>(i)] = ys[i];
  }
  return LoadedData{Dataset(std::move(x), std::move(as), std::move(y)),
                    excluded};
}

void write_dataset_csv(const Dataset& data, const std::string& path,
                       const std::vector<std::string>& covariate_cols,
                       const std::string& treatment_col,
                       const std::string& outcome_col) {
  if (static_cast<int>(covariate_cols.size()) != data.dim())
    throw std::invalid_argument("write_dataset_csv: covariate name count mismatch");
  std::string out;
  for (const auto& c : covariate_cols) out += c + ",";
  out += treatment_col + "," + outcome_col + "\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (int j = 0; j < data.dim(); ++j)
      out += fmt17(data.covariates()(static_cast<Eigen::Index>(i), j)) + ",";
    out += std::to_string(data.treatment(i)) + "," + fmt17(data.outcome(i)) +
           "\n";
  }
  atomic_write_file(path, out);
}

void atomic_write_file(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp + "'");
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

namespace {

ArmDistribution arm_from_json(const json& j, const std::string& ptr) {
  if (!j.is_object() || !j.contains("type"))
    throw std::runtime_error("model json: expected arm object with 'type' at " + ptr);
  const std::string type = j.at("type").get<std::string>();
  if (type == "gaussian") {
    if (!j.contains("mu") || !j.contains("sigma"))
      throw std::runtime_error("model json: gaussian arm needs mu and sigma at " + ptr);
    return ArmDistribution::gaussian(j.at("mu").get<double>(),
                                     j.at("sigma").get<double>());
  }
  if (type == "mixture") {
    if (!j.contains("components") || !j.at("components").is_array() ||
        j.at("components").empty())
      throw std::runtime_error(
          "model json: mixture arm needs a nonempty 'components' array at " +
          ptr);
    std::vector<MixtureComponent> comps;
    std::size_t ci = 0;
    for (const auto& cj : j.at("components")) {
      const std::string cptr = ptr + "/components/" + std::to_string(ci++);
      if (!cj.contains("w") || !cj.contains("mu") || !cj.contains("sigma"))
        throw std::runtime_error(
            "model json: mixture component needs w, mu, sigma at " + cptr);
      comps.push_back({cj.at("w").get<double>(), cj.at("mu").get<double>(),
                       cj.at("sigma").get<double>()});
    }
    return ArmDistribution::mixture(std::move(comps));
  }
  throw std::runtime_error("model json: unknown arm type '" + type + "' at " +
                           ptr);
}

}  // namespace

DiscreteModel model_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("model json: parse error: ") + e.what());
  }
  if (!j.contains("support") || !j.at("support").is_array() ||
      j.at("support").empty())
    throw std::runtime_error(
        "model json: expected a nonempty 'support' array at /support");
  DiscreteModel model;
  std::size_t i = 0;
  for (const auto& pj : j.at("support")) {
    const std::string ptr = "/support/" + std::to_string(i++);
    SupportPoint pt;
    if (!pj.contains("label") || !pj.at("label").is_string())
      throw std::runtime_error("model json: missing string 'label' at " + ptr);
    pt.label = pj.at("label").get<std::string>();
    if (!pj.contains("p") || !pj.at("p").is_number())
      throw std::runtime_error("model json: missing numeric 'p' at " + ptr);
    pt.p = pj.at("p").get<double>();
    if (pj.contains("pi")) pt.pi = pj.at("pi").get<double>();
    if (!pj.contains("arm0") || !pj.contains("arm1"))
      throw std::runtime_error("model json: missing arm0/arm1 at " + ptr);
    pt.arm[0] = arm_from_json(pj.at("arm0"), ptr + "/arm0");
    pt.arm[1] = arm_from_json(pj.at("arm1"), ptr + "/arm1");
    model.support.push_back(std::move(pt));
  }
  model.validate();
  return model;
}

DiscreteModel model_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("model json: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_json_text(ss.str());
}

namespace {

json estimate_to_json(const ValueEstimate& est) {
  json folds = json::array();
  for (const auto& f : est.fold_report)
    folds.push_back({{"psi", f.psi}, {"n", f.n}});
  return json{
      {"psi_hat", est.psi_hat},
      {"se", est.se},
      {"ci_lower", est.ci_lower},
      {"ci_upper", est.ci_upper},
      {"estimator",
       est.estimator == EstimatorKind::DoublyRobust ? "dr" : "plugin"},
      {"n", est.n},
      {"folds", folds},
      {"degenerate_ci", est.degenerate_ci},
      {"se_is_descriptive", est.se_is_descriptive},
  };
}

FitConfig fit_config_from_run(const RunConfig& cfg) {
  FitConfig fc;
  if (cfg.median_method == "knn")
    fc.median_method = KnnLocalMedian{cfg.knn_k};
  else if (cfg.median_method != "linear")
    throw std::invalid_argument("unknown median method '" + cfg.median_method +
                                "' (use linear or knn)");
  if (cfg.known_propensity)
    fc.propensity_method = KnownPropensity{cfg.known_propensity, {}};
  return fc;
}

std::string default_hist_path(const std::string& out_path) {
  std::filesystem::path p(out_path);
  const std::string stem = p.stem().string();
  return (p.parent_path() / (stem + "_contrast_hist.csv")).string();
}

std::string histogram_csv(const std::vector<double>& values, int bins) {
  if (bins < 1) throw std::invalid_argument("histogram: need at least one bin");
  const auto [mn_it, mx_it] = std::minmax_element(values.begin(), values.end());
  double lo = *mn_it, hi = *mx_it;
  if (lo == hi) {  // degenerate: one bin around the common value
    lo -= 0.5;
    hi += 0.5;
  }
  const double w = (hi - lo) / bins;
  std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
  for (double v : values) {
    auto b = static_cast<long>((v - lo) / w);
    if (b < 0) b = 0;
    if (b >= bins) b = bins - 1;
    ++counts[static_cast<std::size_t>(b)];
  }
  std::string out = "bin_left,bin_right,count\n";
  for (int b = 0; b < bins; ++b)
    out += fmt17(lo + b * w) + "," + fmt17(lo + (b + 1) * w) + "," +
           std::to_string(counts[static_cast<std::size_t>(b)]) + "\n";
  return out;
}

}  // namespace

int cmd_evaluate(const RunConfig& cfg) {
  const LoadedData loaded = dataset_from_csv(cfg.data_path, cfg.covariate_cols,
                                             cfg.treatment_col, cfg.outcome_col);
  const Dataset& data = loaded.data;
  if (data.arm_count(0) == 0 || data.arm_count(1) == 0)
    throw std::runtime_error(
        "evaluate: data contains a single treatment arm; both arms are "
        "required");
  const FitConfig fc = fit_config_from_run(cfg);

  json policies_out = json::array();
  std::vector<double> contrast;
  for (const auto& name : cfg.policies) {
    PolicyRequest request = [&]() -> PolicyRequest {
      if (name == "observational")
        return PolicyRequest::fixed_policy(PolicySpec::recorded_treatment());
      if (name == "treat-all")
        return PolicyRequest::fixed_policy(PolicySpec::treat_all());
      if (name == "treat-none")
        return PolicyRequest::fixed_policy(PolicySpec::treat_none());
      if (name == "median-optimal") return PolicyRequest::learn_median_optimal();
      if (name == "mean-optimal") return PolicyRequest::learn_mean_optimal();
      if (name == "threshold") {
        if (!cfg.threshold)
          throw std::invalid_argument(
              "evaluate: threshold policy requested without --threshold");
        const auto it = std::find(cfg.covariate_cols.begin(),
                                  cfg.covariate_cols.end(),
                                  cfg.threshold->first);
        if (it == cfg.covariate_cols.end())
          throw std::invalid_argument("evaluate: threshold column '" +
                                      cfg.threshold->first +
                                      "' is not a covariate column");
        const auto j =
            static_cast<Eigen::Index>(it - cfg.covariate_cols.begin());
        const double cut = cfg.threshold->second;
        return PolicyRequest::fixed_policy(PolicySpec::covariate_rule(
            [j, cut](const Eigen::VectorXd& x) { return x[j] > cut ? 1 : 0; },
            data.dim(),
            cfg.threshold->first + ">" + fmt17(cut)));
      }
      throw std::invalid_argument("evaluate: unknown policy '" + name + "'");
    }();
    const CrossFitOutput out =
        crossfit_evaluate(data, fc, request, cfg.fold_seed);
    if (contrast.empty()) contrast = out.median_contrast;
    policies_out.push_back({{"name", name},
                            {"dr", estimate_to_json(out.dr)},
                            {"plugin", estimate_to_json(out.plugin)}});
  }

  const std::string hist_path =
      cfg.hist_out.empty() ? default_hist_path(cfg.out_path) : cfg.hist_out;
  atomic_write_file(hist_path, histogram_csv(contrast, cfg.hist_bins));

  json report{
      {"schema_version", 1},
      {"command", "evaluate"},
      {"config",
       {{"data", cfg.data_path},
        {"covariates", cfg.covariate_cols},
        {"treatment", cfg.treatment_col},
        {"outcome", cfg.outcome_col},
        {"propensity",
         cfg.known_propensity ? json(*cfg.known_propensity) : json("logistic")},
        {"policies", cfg.policies},
        {"fold_seed", cfg.fold_seed},
        {"median_method", cfg.median_method},
        {"knn_k", cfg.knn_k}}},
      {"n_rows_used", data.size()},
      {"n_excluded_missing_outcome", loaded.excluded_missing_outcome},
      {"policies", policies_out},
      {"median_contrast_histogram_file", hist_path},
  };
  atomic_write_file(cfg.out_path, report.dump(2) + "\n");
  return 0;
}

int cmd_illustrate(const std::string& model_path, const std::string& out_path,
                   const std::string& json_out) {
  const DiscreteModel model = model_from_json_file(model_path);
  const OptimalPolicyTable table = optimal_policies(model);

  std::string csv =
      "label,p,pi,mean0,mean1,sd0,sd1,median0,median1,"
      "dec_mean,dec_mme,dec_acme,indiff_mean,indiff_mme,indiff_acme\n";
  for (std::size_t i = 0; i < model.support.size(); ++i) {
    const auto& pt = model.support[i];
    csv += pt.label + "," + fmt17(pt.p) + "," + fmt17(pt.pi) + "," +
           fmt17(pt.arm[0].mean()) + "," + fmt17(pt.arm[1].mean()) + "," +
           fmt17(pt.arm[0].sd()) + "," + fmt17(pt.arm[1].sd()) + "," +
           fmt17(conditional_median(model, i, 0)) + "," +
           fmt17(conditional_median(model, i, 1)) + "," +
           std::to_string(table.mean_decision[i]) + "," +
           std::to_string(table.mme_decision[i]) + "," +
           std::to_string(table.acme_decision[i]) + "," +
           (table.mean_indifferent[i] ? "1" : "0") + "," +
           (table.mme_indifferent[i] ? "1" : "0") + "," +
           (table.acme_indifferent[i] ? "1" : "0") + "\n";
  }
  atomic_write_file(out_path, csv);

  json values{
      {"schema_version", 1},
      {"command", "illustrate"},
      {"model", model_path},
      {"mean_optimal", {{"decisions", table.mean_decision}}},
      {"mme_optimal",
       {{"decisions", table.mme_decision},
        {"marginal_median", table.mme_optimal_value},
        {"maximizers", table.mme_maximizers}}},
      {"acme_optimal",
       {{"decisions", table.acme_decision},
        {"value", acme_value(model, table.acme_decision)}}},
  };
  json per_label = json::array();
  for (std::size_t i = 0; i < model.support.size(); ++i)
    per_label.push_back({{"label", model.support[i].label},
                         {"median0", conditional_median(model, i, 0)},
                         {"median1", conditional_median(model, i, 1)},
                         {"mean0", model.support[i].arm[0].mean()},
                         {"mean1", model.support[i].arm[1].mean()}});
  values["per_label"] = per_label;
  const std::string jpath =
      json_out.empty() ? out_path + ".values.json" : json_out;
  atomic_write_file(jpath, values.dump(2) + "\n");
  return 0;
}

namespace {

PolicySpec simulate_policy(const std::string& name) {
  if (name == "x1-positive")
    return PolicySpec::covariate_rule(
        [](const Eigen::VectorXd& x) { return x[0] > 0.0 ? 1 : 0; },
        std::nullopt, "x1-positive");
  if (name == "treat-all") return PolicySpec::treat_all();
  if (name == "treat-none") return PolicySpec::treat_none();
  throw std::invalid_argument("simulate: unknown fixed policy '" + name + "'");
}

double simulate_truth(const std::string& policy_name) {
  if (policy_name == "x1-positive") return lognormal_x1_policy_value();
  if (policy_name == "treat-all" || policy_name == "median-optimal")
    return lognormal_treat_all_value();
  if (policy_name == "treat-none") return std::exp(0.1);
  throw std::invalid_argument("simulate: no truth for policy '" + policy_name +
                              "'");
}

struct AssertionOutcome {
  std::string description;
  bool pass = false;
  std::string detail;
};

}  // namespace

int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 std::optional<std::size_t> reps_override) {
  std::ifstream in(config_path);
  if (!in)
    throw std::runtime_error("simulate: cannot open config '" + config_path +
                             "'");
  json cfg;
  in >> cfg;
  std::filesystem::create_directories(out_dir);
  const auto seed = cfg.value("seed", std::uint64_t{1});
  const LognormalDgp dgp;

  json out_summary{{"schema_version", 1},
                   {"command", "simulate"},
                   {"config", cfg},
                   {"seed", seed}};
  std::optional<ExperimentReport> rmse_report;
  std::string rmse_policy_name = "x1-positive";

  // Built-in truth values are cross-checked against the Monte Carlo oracle
  // before any experiment runs.
  const auto oracle_draws = cfg.value("oracle_draws", std::size_t{10000000});
  const bool verify_truth = cfg.value("verify_truth", true);
  std::vector<std::string> verified;
  auto check_truth = [&](const std::string& policy_name) {
    if (!verify_truth) return;
    const std::string canon =
        policy_name == "median-optimal" ? "treat-all" : policy_name;
    if (std::find(verified.begin(), verified.end(), canon) != verified.end())
      return;
    verified.push_back(canon);
    const double closed = simulate_truth(canon);
    const PolicySpec pol = simulate_policy(canon);
    auto [mc, se] = lognormal_policy_value_mc(dgp, pol, oracle_draws,
                                              derive_seed(seed, 0x0AC1EULL));
    if (std::abs(mc - closed) > 3.0 * se)
      throw std::runtime_error(
          "simulate: built-in truth for policy '" + canon + "' (" +
          std::to_string(closed) + ") disagrees with the " +
          std::to_string(oracle_draws) + "-draw oracle (" +
          std::to_string(mc) + " +- " + std::to_string(se) + ")");
    std::printf("[info] truth check '%s': closed form %.6f, oracle %.6f (se %.2g)\n",
                canon.c_str(), closed, mc, se);
  };
  if (cfg.contains("rmse") && !cfg.at("rmse").contains("truth"))
    check_truth(cfg.at("rmse").value("policy", std::string("x1-positive")));
  if (cfg.contains("coverage"))
    for (const auto& cj : cfg.at("coverage"))
      if (!cj.contains("truth"))
        check_truth(cj.value("policy", std::string("x1-positive")));

  if (cfg.contains("rmse")) {
    const auto& rj = cfg.at("rmse");
    std::vector<std::size_t> ns =
        rj.contains("ns") ? rj.at("ns").get<std::vector<std::size_t>>()
                          : default_n_grid();
    std::vector<double> alphas =
        rj.contains("alphas") ? rj.at("alphas").get<std::vector<double>>()
                              : default_alpha_grid();
    std::size_t reps = rj.value("reps", std::size_t{1000});
    if (reps_override) reps = *reps_override;
    rmse_policy_name = rj.value("policy", std::string("x1-positive"));
    PerturbConfig pc;
    pc.density_floor = rj.value("density_floor", 1e-3);
    pc.zero_eps = rj.value("zero_eps", false);
    if (rj.value("granularity", std::string("per_replication")) == "per_point")
      pc.granularity = PerturbGranularity::PerPoint;
    const double truth = rj.contains("truth")
                             ? rj.at("truth").get<double>()
                             : simulate_truth(rmse_policy_name);
    rmse_report = rmse_experiment(dgp, simulate_policy(rmse_policy_name),
                                  truth, ns, alphas, reps, seed, pc);
    atomic_write_file(out_dir + "/rmse.csv", rmse_report->to_csv());
    json cells = json::array();
    for (const auto& c : rmse_report->cells)
      cells.push_back({{"n", c.n},
                       {"alpha", c.alpha},
                       {"estimator", c.estimator == EstimatorKind::DoublyRobust
                                         ? "dr"
                                         : "plugin"},
                       {"rmse", c.rmse},
                       {"mc_se", c.mc_se},
                       {"reps", c.reps}});
    json rj_out{{"seed", seed}, {"truth", truth}, {"cells", cells}};
    atomic_write_file(out_dir + "/rmse.json", rj_out.dump(2) + "\n");
    out_summary["rmse_csv"] = out_dir + "/rmse.csv";
  }

  json coverage_results = json::array();
  if (cfg.contains("coverage")) {
    for (const auto& cj : cfg.at("coverage")) {
      const std::string name = cj.value("name", std::string("coverage"));
      const std::string pol = cj.value("policy", std::string("x1-positive"));
      const auto n = cj.value("n", std::size_t{5000});
      auto reps = cj.value("reps", std::size_t{1000});
      if (reps_override) reps = std::max<std::size_t>(*reps_override, 100);
      const double truth =
          cj.contains("truth") ? cj.at("truth").get<double>() : simulate_truth(pol);
      const PolicyRequest request =
          pol == "median-optimal"
              ? PolicyRequest::learn_median_optimal()
              : PolicyRequest::fixed_policy(simulate_policy(pol));
      const CoverageResult res = coverage_experiment(
          dgp, request, n, reps, truth, derive_seed(seed, 0xabcdULL));
      coverage_results.push_back({{"name", name},
                                  {"policy", pol},
                                  {"n", n},
                                  {"reps", res.reps},
                                  {"truth", truth},
                                  {"coverage", res.coverage},
                                  {"avg_ci_width", res.avg_ci_width}});
    }
    atomic_write_file(out_dir + "/coverage.json",
                      coverage_results.dump(2) + "\n");
  }

  // Configured assertions; any failure flips the exit code.
  std::vector<AssertionOutcome> outcomes;
  if (cfg.contains("assertions")) {
    for (const auto& aj : cfg.at("assertions")) {
      const std::string type = aj.at("type").get<std::string>();
      AssertionOutcome oc;
      try {
        const bool needs_rmse = type == "dr_le_plugin_factor" ||
                                type == "plugin_rmse_decreasing_in_alpha" ||
                                type == "dr_near_clt_floor";
        if (needs_rmse && !rmse_report)
          throw std::runtime_error("assertion needs an rmse section");
        if (type == "dr_le_plugin_factor") {
          const auto n = aj.at("n").get<std::size_t>();
          const double alpha = aj.at("alpha").get<double>();
          const double factor = aj.at("factor").get<double>();
          const auto& dr =
              rmse_report->cell(n, alpha, EstimatorKind::DoublyRobust);
          const auto& pi = rmse_report->cell(n, alpha, EstimatorKind::PlugIn);
          oc.description = "dr rmse <= " + fmt17(factor) + " * plugin rmse @ n=" +
                           std::to_string(n) + ", alpha=" + fmt17(alpha);
          oc.pass = dr.rmse <= factor * pi.rmse;
          oc.detail = "dr=" + fmt17(dr.rmse) + " plugin=" + fmt17(pi.rmse);
        } else if (type == "plugin_rmse_decreasing_in_alpha") {
          const auto n = aj.at("n").get<std::size_t>();
          oc.description =
              "plugin log-rmse decreasing in alpha @ n=" + std::to_string(n);
          std::vector<std::pair<double, double>> seq;
          for (const auto& c : rmse_report->cells)
            if (c.n == n && c.estimator == EstimatorKind::PlugIn)
              seq.emplace_back(c.alpha, c.rmse);
          std::sort(seq.begin(), seq.end());
          oc.pass = seq.size() >= 2;
          for (std::size_t i = 1; i < seq.size(); ++i)
            if (seq[i].second >= seq[i - 1].second) oc.pass = false;
          std::string s;
          for (const auto& [a, r] : seq) s += fmt17(r) + " ";
          oc.detail = "rmse by alpha: " + s;
        } else if (type == "dr_near_clt_floor") {
          const auto n = aj.at("n").get<std::size_t>();
          const double alpha = aj.at("alpha").get<double>();
          const double rel_tol = aj.at("rel_tol").get<double>();
          const PolicySpec pol = simulate_policy(rmse_policy_name);
          const double sigma2 = analytic_variance_bound(
              dgp.true_nuisances(),
              [&dgp](std::mt19937_64& eng) { return dgp.sample_x(eng); }, pol,
              1000000, derive_seed(seed, 0xf1007ULL));
          const double floor = std::sqrt(sigma2 / static_cast<double>(n));
          const auto& dr =
              rmse_report->cell(n, alpha, EstimatorKind::DoublyRobust);
          oc.description = "dr rmse within " + fmt17(rel_tol * 100) +
                           "% of clt floor @ n=" + std::to_string(n) +
                           ", alpha=" + fmt17(alpha);
          oc.pass = std::abs(dr.rmse - floor) <= rel_tol * floor;
          oc.detail = "dr=" + fmt17(dr.rmse) + " floor=" + fmt17(floor) +
                      " ratio=" + fmt17(dr.rmse / floor);
        } else if (type == "coverage_within") {
          const std::string name = aj.at("name").get<std::string>();
          const double lo = aj.at("lo").get<double>();
          const double hi = aj.at("hi").get<double>();
          oc.description =
              "coverage of '" + name + "' in [" + fmt17(lo) + ", " + fmt17(hi) + "]";
          oc.pass = false;
          for (const auto& cr : coverage_results)
            if (cr.at("name") == name) {
              const double c = cr.at("coverage").get<double>();
              oc.pass = c >= lo && c <= hi;
              oc.detail = "coverage=" + fmt17(c);
            }
        } else {
          oc.description = "unknown assertion type '" + type + "'";
          oc.pass = false;
        }
      } catch (const std::exception& e) {
        oc.pass = false;
        oc.detail = std::string("error: ") + e.what();
      }
      outcomes.push_back(std::move(oc));
    }
  }

  bool all_pass = true;
  json aj_out = json::array();
  for (const auto& oc : outcomes) {
    all_pass = all_pass && oc.pass;
    std::printf("[%s] %s%s%s\n", oc.pass ? "PASS" : "FAIL",
                oc.description.c_str(), oc.detail.empty() ? "" : " : ",
                oc.detail.c_str());
    aj_out.push_back(
        {{"description", oc.description}, {"pass", oc.pass}, {"detail", oc.detail}});
  }
  out_summary["assertions"] = aj_out;
  out_summary["all_pass"] = all_pass;
  if (cfg.contains("coverage")) out_summary["coverage"] = coverage_results;
  atomic_write_file(out_dir + "/summary.json", out_summary.dump(2) + "\n");
  return all_pass ? 0 : 1;
}

}  // namespace acme::cli
