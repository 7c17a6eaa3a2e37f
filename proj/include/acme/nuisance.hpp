#ifndef ACME_NUISANCE_HPP
#define ACME_NUISANCE_HPP

#include <optional>
#include <variant>
#include <vector>

#include "acme/core.hpp"

namespace acme {

// Gaussian kernel K(u) = (2*pi)^{-1/2} exp(-u^2/2). A missing bandwidth
// means "use Silverman's rule on the fitting residuals".
struct KernelSpec {
  std::optional<double> bandwidth;  // must be > 0 when set
};

struct LinearQuantile {};
struct KnnLocalMedian {
  int k = 25;
};
using MedianMethod = std::variant<LinearQuantile, KnnLocalMedian>;

struct LogisticPropensity {};
struct KnownPropensity {
  // Either a constant value or a full evaluator.
  std::optional<double> value;
  Evaluator fn;
};
using PropensityMethod = std::variant<LogisticPropensity, KnownPropensity>;

struct KnnRegression {
  // Defaults to ceil(m^{4/5}) capped at the arm size m.
  std::optional<int> k;
};
struct NadarayaWatson {
  double bandwidth_x = 1.0;
};
using DensityRegressor = std::variant<KnnRegression, NadarayaWatson>;

struct LinearLeastSquares {};
struct KnnMean {
  int k = 25;
};
using MeanMethod = std::variant<LinearLeastSquares, KnnMean>;

struct FitConfig {
  MedianMethod median_method = LinearQuantile{};
  PropensityMethod propensity_method = LogisticPropensity{};
  DensityRegressor density_regressor = KnnRegression{};
  MeanMethod mean_method = LinearLeastSquares{};
  KernelSpec kernel{};
  ClipConfig clip{};
  double grad_tol = 1e-8;
  int max_iter = 500;
};

// Affine model b0 + b.x; doubles as the fitted evaluator for the linear
// quantile/mean methods.
struct LinearModel {
  Eigen::VectorXd coef;  // [intercept, slopes...]
  double operator()(const Eigen::VectorXd& x) const;
};

struct LogisticFitDiagnostics {
  Eigen::VectorXd coef;
  std::vector<double> loglik_trace;  // one entry per Newton iteration
  double grad_norm = 0.0;            // max-norm of the mean-scale gradient
  int iterations = 0;
};

struct PinballFitDiagnostics {
  Eigen::VectorXd coef;
  double grad_norm = 0.0;
  int iterations = 0;
  double smoothed_loss = 0.0;
};

// P(A=1|X=x) via logistic maximum likelihood (Newton with step halving) or
// the supplied known propensity. Output is clipped per cfg.clip.
Evaluator fit_propensity(const Dataset& data, const FitConfig& cfg);
Evaluator fit_propensity(const Dataset& data, const FitConfig& cfg,
                         LogisticFitDiagnostics* diag);

// Conditional median of Y given X on one treatment arm. LinearQuantile
// minimizes the mean pinball loss |r|/2 smoothed near the kink;
// KnnLocalMedian takes the sample median among the k nearest neighbours.
Evaluator fit_conditional_median(const Dataset& data, int arm,
                                 const FitConfig& cfg);
Evaluator fit_conditional_median(const Dataset& data, int arm,
                                 const FitConfig& cfg,
                                 PinballFitDiagnostics* diag);

// Conditional density of Y at the estimated conditional median: regresses
// the kernel-smoothed spike (1/h) K((y - mhat(x))/h) on x within the arm.
// Output is clipped below at cfg.clip.f_min.
Evaluator fit_density_at_median(const Dataset& data, int arm,
                                const Evaluator& median_model,
                                const KernelSpec& kernel,
                                const FitConfig& cfg);

// Conditional mean of Y given X on one arm (least squares or k-NN mean).
Evaluator fit_conditional_mean(const Dataset& data, int arm,
                               const FitConfig& cfg);

// h = 0.9 min(sd, IQR/1.34) n^{-1/5} with type-7 quantiles; if IQR is zero,
// h = 0.9 sd n^{-1/5}. All-identical inputs are an error.
double silverman_bandwidth(const std::vector<double>& residuals);

// Mean smoothed pinball loss at tau = 1/2 with the kink smoothing used by
// the solver; exposed for optimality checks.
double mean_pinball_loss_smoothed(const Eigen::MatrixXd& x,
                                  const Eigen::VectorXd& y,
                                  const Eigen::VectorXd& coef);

}  // namespace acme

#endif  // ACME_NUISANCE_HPP
