#ifndef ACME_ESTIMATOR_HPP
#define ACME_ESTIMATOR_HPP

#include <cstdint>
#include <random>

#include "acme/core.hpp"
#include "acme/nuisance.hpp"

namespace acme {

struct DiscreteModel;  // analytic.hpp

// Three-fold plan with the fixed rotation orders. In each order the first
// fold trains the propensity and medians, the second trains the densities,
// and the third is the evaluation fold; every observation is evaluated
// exactly once across the three orders.
struct CrossFitPlan {
  std::array<std::vector<int>, 3> folds;
  std::uint64_t seed = 0;
  static constexpr std::array<std::array<int, 3>, 3> orders{
      {{0, 1, 2}, {0, 2, 1}, {1, 2, 0}}};
};

CrossFitPlan make_crossfit_plan(const Dataset& data, std::uint64_t seed);

// Uncentered influence contribution for one observation:
//   1{a=d(x)} / (a pi + (1-a)(1-pi)) * (1/2 - 1{y <= mhat_a(x)}) / fhat_a(x)
//   + mhat_{d(x)}(x)
double eif_contribution(const DataRow& row, const PolicySpec& policy,
                        const NuisanceSet& nuis);

// Plug-in estimator: sample mean of mhat_{d(x)}(x) over eval_data. The
// reported se is descriptive only. Medians must come from a disjoint sample.
ValueEstimate plugin_value(const Dataset& eval_data, const Evaluator& m0,
                           const Evaluator& m1, const PolicySpec& policy);

// Bias-corrected estimator: mean of eif_contribution over eval_data, with
// the Wald interval built from the contribution standard deviation.
ValueEstimate dr_value(const Dataset& eval_data, const NuisanceSet& nuis,
                       const PolicySpec& policy);

struct PolicyRequest {
  enum class Kind { Fixed, LearnMedianOptimal, LearnMeanOptimal };
  Kind kind = Kind::Fixed;
  std::optional<PolicySpec> fixed;

  static PolicyRequest fixed_policy(PolicySpec p) {
    return {Kind::Fixed, std::move(p)};
  }
  static PolicyRequest learn_median_optimal() {
    return {Kind::LearnMedianOptimal, std::nullopt};
  }
  static PolicyRequest learn_mean_optimal() {
    return {Kind::LearnMeanOptimal, std::nullopt};
  }
};

struct CrossFitOutput {
  ValueEstimate dr;
  ValueEstimate plugin;
  // mhat_1(x_i) - mhat_0(x_i) for every row, from the rotation where the row
  // was in the evaluation fold.
  std::vector<double> median_contrast;
};

// Full three-fold cross-fitted evaluation: fits nuisances per rotation,
// learns the policy per rotation when requested, and pools per-observation
// contributions across the three evaluation folds.
CrossFitOutput crossfit_evaluate(const Dataset& data, const FitConfig& cfg,
                                 const PolicyRequest& request,
                                 std::uint64_t seed);

ValueEstimate crossfit_value(const Dataset& data, const FitConfig& cfg,
                             const PolicyRequest& request, std::uint64_t seed);

PolicySpec learn_median_optimal(Evaluator m1, Evaluator m0);

// Efficiency bound sigma_d^2 for a finite-support model, by enumeration.
double analytic_variance_bound(const DiscreteModel& model,
                               const std::vector<int>& policy);

// Monte Carlo version for continuous covariates: truth supplies the exact
// pi, m_a and f_{a,m}; sample_x draws covariate vectors.
double analytic_variance_bound(
    const NuisanceSet& truth,
    const std::function<Eigen::VectorXd(std::mt19937_64&)>& sample_x,
    const PolicySpec& policy, std::size_t n_mc, std::uint64_t seed);

}  // namespace acme

#endif  // ACME_ESTIMATOR_HPP
