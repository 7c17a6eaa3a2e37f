#ifndef ACME_CORE_HPP
#define ACME_CORE_HPP

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace acme {

// Pointwise nuisance evaluator. Must be pure: evaluating twice at the same
// covariate vector returns the same value, with no interior mutation.
using Evaluator = std::function<double(const Eigen::VectorXd&)>;

struct DataRow {
  Eigen::VectorXd x;
  int a = 0;
  double y = 0.0;
};

// Observational sample of (covariates, binary treatment, outcome) rows.
// Immutable after construction; rows keep their insertion order so fold
// splits are reproducible.
class Dataset {
 public:
  Dataset(Eigen::MatrixXd x, std::vector<int> a, Eigen::VectorXd y);

  std::size_t size() const { return static_cast<std::size_t>(x_.rows()); }
  int dim() const { return static_cast<int>(x_.cols()); }

  const Eigen::MatrixXd& covariates() const { return x_; }
  const std::vector<int>& treatments() const { return a_; }
  const Eigen::VectorXd& outcomes() const { return y_; }

  Eigen::VectorXd covariate(std::size_t i) const {
    return x_.row(static_cast<Eigen::Index>(i)).transpose();
  }
  int treatment(std::size_t i) const { return a_[i]; }
  double outcome(std::size_t i) const {
    return y_[static_cast<Eigen::Index>(i)];
  }
  DataRow row(std::size_t i) const {
    return DataRow{covariate(i), treatment(i), outcome(i)};
  }

  Dataset subset(const std::vector<int>& indices) const;
  // Indices of rows with treatment == arm, in dataset order.
  std::vector<int> arm_indices(int arm) const;
  std::size_t arm_count(int arm) const;

 private:
  Eigen::MatrixXd x_;
  std::vector<int> a_;
  Eigen::VectorXd y_;
};

enum class PolicyKind {
  CovariateRule,
  LearnedMedianOptimal,
  LearnedMeanOptimal,
  TreatAll,
  TreatNone,
  RecordedTreatment,
};

// A deterministic treatment rule. All variants except RecordedTreatment are
// pure functions of the covariates; RecordedTreatment echoes the observed
// treatment of the row it is evaluated against.
class PolicySpec {
 public:
  static PolicySpec treat_all();
  static PolicySpec treat_none();
  static PolicySpec recorded_treatment();
  static PolicySpec covariate_rule(std::function<int(const Eigen::VectorXd&)> rule,
                                   std::optional<int> dim = std::nullopt,
                                   std::string name = "covariate-rule");
  // Treats when m1(x) > m0(x); ties resolve to no treatment.
  static PolicySpec learned_median_optimal(Evaluator m1, Evaluator m0);
  // Treats when mu1(x) > mu0(x); ties resolve to no treatment.
  static PolicySpec learned_mean_optimal(Evaluator mu1, Evaluator mu0);

  PolicyKind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  // True when the decision is a function of x alone.
  bool pure() const { return kind_ != PolicyKind::RecordedTreatment; }

  // Decision for a pure policy; throws for RecordedTreatment.
  int decide(const Eigen::VectorXd& x) const;
  // Decision given the observed treatment (covers all variants).
  int decide(const Eigen::VectorXd& x, int observed_a) const;

 private:
  PolicySpec(PolicyKind kind, std::string name) : kind_(kind), name_(std::move(name)) {}

  void check_dim(const Eigen::VectorXd& x) const;

  PolicyKind kind_;
  std::string name_;
  std::function<int(const Eigen::VectorXd&)> rule_;
  Evaluator lhs_, rhs_;  // fitted arm summaries for the learned variants
  std::optional<int> dim_;
};

int evaluate_policy(const PolicySpec& policy, const DataRow& row);

struct ClipConfig {
  double eps_clip = 0.01;  // propensity clipped into [eps, 1-eps]
  double f_min = 1e-3;     // lower clip for densities at the median
};

// Fitted (or true) nuisance functions. Accessors apply the configured clips,
// which enforce the boundedness the estimators assume on fitted objects.
struct NuisanceSet {
  Evaluator pi;
  std::array<Evaluator, 2> median;
  std::array<Evaluator, 2> density_at_median;
  std::array<Evaluator, 2> mean{};  // optional; needed for mean-optimal rules
  ClipConfig clip{};

  double pi_at(const Eigen::VectorXd& x) const;
  // P(A=a | X=x) with the clip applied.
  double propensity_of_arm(const Eigen::VectorXd& x, int a) const;
  double median_at(int a, const Eigen::VectorXd& x) const;
  double density_at(int a, const Eigen::VectorXd& x) const;
  bool has_mean() const { return static_cast<bool>(mean[0]) && static_cast<bool>(mean[1]); }
  double mean_at(int a, const Eigen::VectorXd& x) const;
};

enum class EstimatorKind { PlugIn, DoublyRobust };

struct FoldEstimate {
  double psi = 0.0;
  std::size_t n = 0;
};

// A policy value estimate with its Wald interval. When per-observation
// contributions are retained, psi_hat is their mean and se their sample
// standard deviation over sqrt(n).
struct ValueEstimate {
  double psi_hat = 0.0;
  double se = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  EstimatorKind estimator = EstimatorKind::DoublyRobust;
  std::size_t n = 0;
  std::vector<FoldEstimate> fold_report;
  std::vector<double> contributions;
  bool degenerate_ci = false;     // single observation: se reported as 0
  bool se_is_descriptive = false; // plug-in se carries no inference guarantee

  void finalize_interval();  // sets ci_* = psi_hat -+ z975 * se
};

// Seeded partition of {0..n-1} into k folds whose sizes differ by at most
// one. Identical (row order, k, seed) give identical folds.
std::vector<std::vector<int>> split_folds(const Dataset& data, int k,
                                          std::uint64_t seed);
std::vector<std::vector<int>> split_fold_indices(std::size_t n, int k,
                                                 std::uint64_t seed);

}  // namespace acme

#endif  // ACME_CORE_HPP
