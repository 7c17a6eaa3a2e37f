#include "acme/estimator.hpp"

#include <cmath>
#include <stdexcept>

#include "acme/analytic.hpp"
#include "acme/math_util.hpp"

namespace acme {

CrossFitPlan make_crossfit_plan(const Dataset& data, std::uint64_t seed) {
  if (data.size() < 3)
    throw std::invalid_argument("crossfit: need at least 3 observations");
  auto folds = split_folds(data, 3, seed);
  CrossFitPlan plan;
  plan.folds = {std::move(folds[0]), std::move(folds[1]), std::move(folds[2])};
  plan.seed = seed;
  return plan;
}

double eif_contribution(const DataRow& row, const PolicySpec& policy,
                        const NuisanceSet& nuis) {
  const int d = policy.decide(row.x, row.a);
  double correction = 0.0;
  if (row.a == d) {
    const double p_arm = nuis.propensity_of_arm(row.x, row.a);
    const double m_a = nuis.median_at(row.a, row.x);
    const double f_a = nuis.density_at(row.a, row.x);
    const double half_minus_ind = 0.5 - (row.y <= m_a ? 1.0 : 0.0);
    correction = half_minus_ind / (p_arm * f_a);
  }
  return correction + nuis.median_at(d, row.x);
}

namespace {

ValueEstimate estimate_from_contributions(std::vector<double> contribs,
                                          EstimatorKind kind,
                                          bool descriptive_se) {
  ValueEstimate est;
  est.estimator = kind;
  est.n = contribs.size();
  est.psi_hat = mean(contribs);
  if (contribs.size() >= 2) {
    est.se = sample_sd(contribs) / std::sqrt(static_cast<double>(contribs.size()));
  } else {
    est.se = 0.0;
    est.degenerate_ci = true;
  }
  est.se_is_descriptive = descriptive_se;
  est.fold_report = {{est.psi_hat, est.n}};
  est.contributions = std::move(contribs);
  est.finalize_interval();
  return est;
}

}  // namespace

ValueEstimate plugin_value(const Dataset& eval_data, const Evaluator& m0,
                           const Evaluator& m1, const PolicySpec& policy) {
  const std::size_t n = eval_data.size();
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::VectorXd x = eval_data.covariate(i);
    const int d = policy.decide(x, eval_data.treatment(i));
    values[i] = d == 1 ? m1(x) : m0(x);
  }
  return estimate_from_contributions(std::move(values), EstimatorKind::PlugIn,
                                     /*descriptive_se=*/true);
}

ValueEstimate dr_value(const Dataset& eval_data, const NuisanceSet& nuis,
                       const PolicySpec& policy) {
  const std::size_t n = eval_data.size();
  std::vector<double> contribs(n);
  for (std::size_t i = 0; i < n; ++i)
    contribs[i] = eif_contribution(eval_data.row(i), policy, nuis);
  return estimate_from_contributions(std::move(contribs),
                                     EstimatorKind::DoublyRobust,
                                     /*descriptive_se=*/false);
}

PolicySpec learn_median_optimal(Evaluator m1, Evaluator m0) {
  return PolicySpec::learned_median_optimal(std::move(m1), std::move(m0));
}

namespace {

const char* fold_name(int f) {
  static const char* names[] = {"D1", "D2", "D3"};
  return names[f];
}

void require_both_arms(const Dataset& fold_data, int fold_idx,
                       const char* role) {
  if (fold_data.arm_count(0) == 0 || fold_data.arm_count(1) == 0) {
    const int missing = fold_data.arm_count(0) == 0 ? 0 : 1;
    throw std::runtime_error(std::string("crossfit: ") + role + " fold " +
                             fold_name(fold_idx) + " has no rows with a=" +
                             std::to_string(missing));
  }
}

}  // namespace

CrossFitOutput crossfit_evaluate(const Dataset& data, const FitConfig& cfg,
                                 const PolicyRequest& request,
                                 std::uint64_t seed) {
  if (request.kind == PolicyRequest::Kind::Fixed && !request.fixed)
    throw std::invalid_argument("crossfit: fixed policy request without a policy");
  const CrossFitPlan plan = make_crossfit_plan(data, seed);
  const std::size_t n = data.size();

  std::vector<double> dr_contribs(n, 0.0);
  std::vector<double> plugin_values(n, 0.0);
  std::vector<double> contrast(n, 0.0);
  std::vector<FoldEstimate> dr_folds, pi_folds;

  for (const auto& order : CrossFitPlan::orders) {
    const Dataset train = data.subset(plan.folds[order[0]]);
    const Dataset dens = data.subset(plan.folds[order[1]]);
    const auto& eval_idx = plan.folds[order[2]];
    const Dataset eval = data.subset(eval_idx);

    require_both_arms(train, order[0], "training");
    require_both_arms(dens, order[1], "density");

    NuisanceSet nuis;
    nuis.clip = cfg.clip;
    nuis.pi = fit_propensity(train, cfg);
    nuis.median[0] = fit_conditional_median(train, 0, cfg);
    nuis.median[1] = fit_conditional_median(train, 1, cfg);
    nuis.density_at_median[0] =
        fit_density_at_median(dens, 0, nuis.median[0], cfg.kernel, cfg);
    nuis.density_at_median[1] =
        fit_density_at_median(dens, 1, nuis.median[1], cfg.kernel, cfg);

    PolicySpec policy = [&] {
      switch (request.kind) {
        case PolicyRequest::Kind::Fixed:
          return *request.fixed;
        case PolicyRequest::Kind::LearnMedianOptimal:
          return PolicySpec::learned_median_optimal(nuis.median[1],
                                                    nuis.median[0]);
        case PolicyRequest::Kind::LearnMeanOptimal: {
          nuis.mean[0] = fit_conditional_mean(train, 0, cfg);
          nuis.mean[1] = fit_conditional_mean(train, 1, cfg);
          return PolicySpec::learned_mean_optimal(nuis.mean[1], nuis.mean[0]);
        }
      }
      throw std::logic_error("unreachable policy request kind");
    }();

    std::vector<double> fold_dr(eval.size());
    std::vector<double> fold_pi(eval.size());
    for (std::size_t i = 0; i < eval.size(); ++i) {
      const DataRow row = eval.row(i);
      fold_dr[i] = eif_contribution(row, policy, nuis);
      const int d = policy.decide(row.x, row.a);
      fold_pi[i] = nuis.median_at(d, row.x);
      dr_contribs[static_cast<std::size_t>(eval_idx[i])] = fold_dr[i];
      plugin_values[static_cast<std::size_t>(eval_idx[i])] = fold_pi[i];
      contrast[static_cast<std::size_t>(eval_idx[i])] =
          nuis.median_at(1, row.x) - nuis.median_at(0, row.x);
    }
    dr_folds.push_back({mean(fold_dr), fold_dr.size()});
    pi_folds.push_back({mean(fold_pi), fold_pi.size()});
  }

  auto assemble = [n](const std::vector<FoldEstimate>& folds,
                      std::vector<double> pooled, EstimatorKind kind,
                      bool descriptive) {
    ValueEstimate est;
    est.estimator = kind;
    est.n = n;
    std::vector<double> fold_psis;
    for (const auto& f : folds) fold_psis.push_back(f.psi);
    est.psi_hat = mean(fold_psis);  // unweighted mean of rotation estimates
    est.se = n >= 2 ? sample_sd(pooled) / std::sqrt(static_cast<double>(n)) : 0.0;
    est.degenerate_ci = n < 2;
    est.se_is_descriptive = descriptive;
    est.fold_report = folds;
    est.contributions = std::move(pooled);
    est.finalize_interval();
    return est;
  };

  CrossFitOutput out;
  out.dr = assemble(dr_folds, std::move(dr_contribs),
                    EstimatorKind::DoublyRobust, false);
  out.plugin = assemble(pi_folds, std::move(plugin_values),
                        EstimatorKind::PlugIn, true);
  out.median_contrast = std::move(contrast);
  return out;
}

ValueEstimate crossfit_value(const Dataset& data, const FitConfig& cfg,
                             const PolicyRequest& request,
                             std::uint64_t seed) {
  return crossfit_evaluate(data, cfg, request, seed).dr;
}

double analytic_variance_bound(const DiscreteModel& model,
                               const std::vector<int>& policy) {
  if (policy.size() != model.support.size())
    throw std::invalid_argument(
        "analytic_variance_bound: policy must cover every support label");
  double first_term = 0.0;
  double m_mean = 0.0, m_sq = 0.0;
  for (std::size_t i = 0; i < model.support.size(); ++i) {
    const auto& pt = model.support[i];
    const int d = policy[i];
    const double m0 = conditional_median(model, i, 0);
    const double m1 = conditional_median(model, i, 1);
    const double f0 = pt.arm[0].pdf(m0);
    const double f1 = pt.arm[1].pdf(m1);
    const double md = d == 1 ? m1 : m0;
    first_term += pt.p * (d == 1 ? 1.0 / (4.0 * pt.pi * f1 * f1)
                                 : 1.0 / (4.0 * (1.0 - pt.pi) * f0 * f0));
    m_mean += pt.p * md;
    m_sq += pt.p * md * md;
  }
  return first_term + (m_sq - m_mean * m_mean);
}

double analytic_variance_bound(
    const NuisanceSet& truth,
    const std::function<Eigen::VectorXd(std::mt19937_64&)>& sample_x,
    const PolicySpec& policy, std::size_t n_mc, std::uint64_t seed) {
  if (n_mc < 1000)
    throw std::invalid_argument(
        "analytic_variance_bound: need n_mc >= 1000 for sampler input");
  std::mt19937_64 eng(derive_seed(seed, 0x76617262ULL));
  std::vector<double> bracket(n_mc), md(n_mc);
  for (std::size_t i = 0; i < n_mc; ++i) {
    const Eigen::VectorXd x = sample_x(eng);
    const int d = policy.decide(x);
    const double f = truth.density_at(d, x);
    const double p_arm = truth.propensity_of_arm(x, d);
    bracket[i] = 1.0 / (4.0 * p_arm * f * f);
    md[i] = truth.median_at(d, x);
  }
  const double m_mean = mean(md);
  std::vector<double> dev(n_mc);
  for (std::size_t i = 0; i < n_mc; ++i) {
    const double e = md[i] - m_mean;
    dev[i] = e * e;
  }
  return mean(bracket) + pairwise_sum(dev) / static_cast<double>(n_mc);
}

}  // namespace acme
