#include "acme/core.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "acme/math_util.hpp"

namespace acme {

Dataset::Dataset(Eigen::MatrixXd x, std::vector<int> a, Eigen::VectorXd y)
    : x_(std::move(x)), a_(std::move(a)), y_(std::move(y)) {
  const auto n = x_.rows();
  if (n < 1) throw std::invalid_argument("Dataset: need at least one row");
  if (x_.cols() < 1)
    throw std::invalid_argument("Dataset: covariate dimension must be >= 1");
  if (static_cast<Eigen::Index>(a_.size()) != n || y_.size() != n)
    throw std::invalid_argument("Dataset: column lengths disagree");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (a_[static_cast<std::size_t>(i)] != 0 &&
        a_[static_cast<std::size_t>(i)] != 1)
      throw std::invalid_argument("Dataset: treatment must be 0 or 1 (row " +
                                  std::to_string(i) + ")");
    if (!std::isfinite(y_[i]))
      throw std::invalid_argument("Dataset: outcome must be finite (row " +
                                  std::to_string(i) + ")");
    for (Eigen::Index j = 0; j < x_.cols(); ++j)
      if (!std::isfinite(x_(i, j)))
        throw std::invalid_argument("Dataset: covariate must be finite (row " +
                                    std::to_string(i) + ")");
  }
}

Dataset Dataset::subset(const std::vector<int>& indices) const {
  if (indices.empty()) throw std::invalid_argument("Dataset::subset: empty index set");
  Eigen::MatrixXd xs(static_cast<Eigen::Index>(indices.size()), x_.cols());
  std::vector<int> as(indices.size());
  Eigen::VectorXd ys(static_cast<Eigen::Index>(indices.size()));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(indices[i]);
    if (r < 0 || r >= x_.rows())
      throw std::out_of_range("Dataset::subset: index out of range");
    xs.row(static_cast<Eigen::Index>(i)) = x_.row(r);
    as[i] = a_[static_cast<std::size_t>(r)];
    ys[static_cast<Eigen::Index>(i)] = y_[r];
  }
  return Dataset(std::move(xs), std::move(as), std::move(ys));
}

std::vector<int> Dataset::arm_indices(int arm) const {
  std::vector<int> idx;
  for (std::size_t i = 0; i < a_.size(); ++i)
    if (a_[i] == arm) idx.push_back(static_cast<int>(i));
  return idx;
}

std::size_t Dataset::arm_count(int arm) const {
  std::size_t c = 0;
  for (int ai : a_)
    if (ai == arm) ++c;
  return c;
}

PolicySpec PolicySpec::treat_all() {
  return PolicySpec(PolicyKind::TreatAll, "treat-all");
}

PolicySpec PolicySpec::treat_none() {
  return PolicySpec(PolicyKind::TreatNone, "treat-none");
}

PolicySpec PolicySpec::recorded_treatment() {
  return PolicySpec(PolicyKind::RecordedTreatment, "observational");
}

PolicySpec PolicySpec::covariate_rule(
    std::function<int(const Eigen::VectorXd&)> rule, std::optional<int> dim,
    std::string name) {
  PolicySpec p(PolicyKind::CovariateRule, std::move(name));
  p.rule_ = std::move(rule);
  p.dim_ = dim;
  return p;
}

PolicySpec PolicySpec::learned_median_optimal(Evaluator m1, Evaluator m0) {
  PolicySpec p(PolicyKind::LearnedMedianOptimal, "median-optimal");
  p.lhs_ = std::move(m1);
  p.rhs_ = std::move(m0);
  return p;
}

PolicySpec PolicySpec::learned_mean_optimal(Evaluator mu1, Evaluator mu0) {
  PolicySpec p(PolicyKind::LearnedMeanOptimal, "mean-optimal");
  p.lhs_ = std::move(mu1);
  p.rhs_ = std::move(mu0);
  return p;
}

void PolicySpec::check_dim(const Eigen::VectorXd& x) const {
  if (dim_ && *dim_ != static_cast<int>(x.size()))
    throw std::invalid_argument("policy '" + name_ + "' expects covariates of dimension " +
                                std::to_string(*dim_) + ", got " +
                                std::to_string(x.size()));
}

int PolicySpec::decide(const Eigen::VectorXd& x) const {
  check_dim(x);
  switch (kind_) {
    case PolicyKind::TreatAll:
      return 1;
    case PolicyKind::TreatNone:
      return 0;
    case PolicyKind::CovariateRule: {
      const int d = rule_(x);
      if (d != 0 && d != 1)
        throw std::logic_error("covariate rule returned a value outside {0,1}");
      return d;
    }
    case PolicyKind::LearnedMedianOptimal:
    case PolicyKind::LearnedMeanOptimal:
      return lhs_(x) > rhs_(x) ? 1 : 0;
    case PolicyKind::RecordedTreatment:
      throw std::logic_error(
          "RecordedTreatment policy needs an observed treatment; evaluate it "
          "against a dataset row");
  }
  throw std::logic_error("unreachable policy kind");
}

int PolicySpec::decide(const Eigen::VectorXd& x, int observed_a) const {
  if (kind_ == PolicyKind::RecordedTreatment) {
    check_dim(x);
    return observed_a;
  }
  return decide(x);
}

int evaluate_policy(const PolicySpec& policy, const DataRow& row) {
  return policy.decide(row.x, row.a);
}

namespace {
double clamp(double v, double lo, double hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}
}  // namespace

double NuisanceSet::pi_at(const Eigen::VectorXd& x) const {
  return clamp(pi(x), clip.eps_clip, 1.0 - clip.eps_clip);
}

double NuisanceSet::propensity_of_arm(const Eigen::VectorXd& x, int a) const {
  const double p = pi_at(x);
  return a == 1 ? p : 1.0 - p;
}

double NuisanceSet::median_at(int a, const Eigen::VectorXd& x) const {
  return median[static_cast<std::size_t>(a)](x);
}

double NuisanceSet::density_at(int a, const Eigen::VectorXd& x) const {
  const double f = density_at_median[static_cast<std::size_t>(a)](x);
  return f < clip.f_min ? clip.f_min : f;
}

double NuisanceSet::mean_at(int a, const Eigen::VectorXd& x) const {
  if (!has_mean())
    throw std::logic_error("NuisanceSet: no conditional mean evaluators fitted");
  return mean[static_cast<std::size_t>(a)](x);
}

void ValueEstimate::finalize_interval() {
  ci_lower = psi_hat - kZ975 * se;
  ci_upper = psi_hat + kZ975 * se;
}

namespace {

// Unbiased bounded draw by rejection; stable across platforms.
std::uint64_t bounded_rand(std::mt19937_64& eng, std::uint64_t bound) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t r = eng();
  while (r >= limit) r = eng();
  return r % bound;
}

}  // namespace

std::vector<std::vector<int>> split_fold_indices(std::size_t n, int k,
                                                 std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("split_folds: need k >= 2");
  if (n < static_cast<std::size_t>(k))
    throw std::invalid_argument("split_folds: need n >= k (n=" +
                                std::to_string(n) + ", k=" + std::to_string(k) +
                                ")");
  std::vector<int> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = static_cast<int>(i);
  std::mt19937_64 eng(derive_seed(seed, 0x666f6c64ULL));
  for (std::size_t i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(bounded_rand(eng, i + 1));
    std::swap(perm[i], perm[j]);
  }
  std::vector<std::vector<int>> folds(static_cast<std::size_t>(k));
  const std::size_t base = n / static_cast<std::size_t>(k);
  const std::size_t extra = n % static_cast<std::size_t>(k);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < static_cast<std::size_t>(k); ++f) {
    const std::size_t sz = base + (f < extra ? 1 : 0);
    folds[f].assign(perm.begin() + static_cast<std::ptrdiff_t>(pos),
                    perm.begin() + static_cast<std::ptrdiff_t>(pos + sz));
    std::sort(folds[f].begin(), folds[f].end());
    pos += sz;
  }
  return folds;
}

std::vector<std::vector<int>> split_folds(const Dataset& data, int k,
                                          std::uint64_t seed) {
  return split_fold_indices(data.size(), k, seed);
}

}  // namespace acme
