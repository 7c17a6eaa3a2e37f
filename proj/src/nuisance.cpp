#include "acme/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

#include "acme/math_util.hpp"

namespace acme {

namespace {

constexpr double kPinballSmoothing = 1e-6;

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd z(x.rows(), x.cols() + 1);
  z.col(0).setOnes();
  z.rightCols(x.cols()) = x;
  return z;
}

double sample_median(std::vector<double> v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid),
                   v.end());
  const double hi = v[mid];
  if (n % 2 == 1) return hi;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid - 1),
                   v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (v[mid - 1] + hi);
}

// Indices of the k nearest rows of x to the query q (Euclidean distance,
// ties broken by row index so the neighbourhood is deterministic).
std::vector<int> knn_indices(const Eigen::MatrixXd& x,
                             const Eigen::VectorXd& q, int k) {
  const auto n = x.rows();
  if (q.size() != x.cols())
    throw std::invalid_argument("knn: query dimension mismatch");
  std::vector<std::pair<double, int>> dist(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    dist[static_cast<std::size_t>(i)] = {
        (x.row(i).transpose() - q).squaredNorm(), static_cast<int>(i)};
  const auto kk = std::min<std::ptrdiff_t>(k, n);
  std::nth_element(dist.begin(), dist.begin() + (kk - 1), dist.end());
  std::vector<int> idx(static_cast<std::size_t>(kk));
  for (std::ptrdiff_t i = 0; i < kk; ++i)
    idx[static_cast<std::size_t>(i)] = dist[static_cast<std::size_t>(i)].second;
  return idx;
}

struct ArmData {
  std::shared_ptr<Eigen::MatrixXd> x;
  std::shared_ptr<Eigen::VectorXd> y;
};

ArmData arm_view(const Dataset& data, int arm, const char* op) {
  const auto idx = data.arm_indices(arm);
  if (idx.empty())
    throw std::runtime_error(std::string(op) + ": no observations with a=" +
                             std::to_string(arm));
  auto x = std::make_shared<Eigen::MatrixXd>(
      static_cast<Eigen::Index>(idx.size()), data.dim());
  auto y = std::make_shared<Eigen::VectorXd>(
      static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    x->row(static_cast<Eigen::Index>(i)) =
        data.covariates().row(idx[i]);
    (*y)[static_cast<Eigen::Index>(i)] =
        data.outcomes()[idx[i]];
  }
  return {std::move(x), std::move(y)};
}

Eigen::VectorXd weighted_least_squares(const Eigen::MatrixXd& z,
                                       const Eigen::VectorXd& y,
                                       const Eigen::VectorXd& sqrt_w) {
  Eigen::MatrixXd zw = sqrt_w.asDiagonal() * z;
  Eigen::VectorXd yw = sqrt_w.cwiseProduct(y);
  return zw.colPivHouseholderQr().solve(yw);
}

double bernoulli_loglik(const Eigen::VectorXd& eta,
                        const std::vector<int>& a) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double e = eta[i];
    // log(1 + exp(e)) computed without overflow
    const double softplus = e > 0 ? e + std::log1p(std::exp(-e))
                                  : std::log1p(std::exp(e));
    ll += a[static_cast<std::size_t>(i)] * e - softplus;
  }
  return ll;
}

LogisticFitDiagnostics logistic_mle(const Eigen::MatrixXd& x,
                                    const std::vector<int>& a, double tol,
                                    int max_iter) {
  const Eigen::MatrixXd z = with_intercept(x);
  const auto n = z.rows();
  const auto p = z.cols();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd av(n);
  for (Eigen::Index i = 0; i < n; ++i)
    av[i] = static_cast<double>(a[static_cast<std::size_t>(i)]);

  LogisticFitDiagnostics diag;
  Eigen::VectorXd eta = z * b;
  double ll = bernoulli_loglik(eta, a);
  diag.loglik_trace.push_back(ll);
  double grad_norm = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd prob(n);
    for (Eigen::Index i = 0; i < n; ++i) prob[i] = expit(eta[i]);
    Eigen::VectorXd g = z.transpose() * (av - prob);
    grad_norm = g.lpNorm<Eigen::Infinity>() / static_cast<double>(n);
    diag.iterations = it;
    if (grad_norm <= tol) {
      diag.coef = b;
      diag.grad_norm = grad_norm;
      return diag;
    }
    Eigen::VectorXd w = prob.array() * (1.0 - prob.array());
    Eigen::MatrixXd h = z.transpose() * w.asDiagonal() * z;
    h.diagonal().array() += 1e-10 * (h.trace() / static_cast<double>(p) + 1.0);
    Eigen::VectorXd step = h.ldlt().solve(g);
    // Step halving keeps the log-likelihood non-decreasing.
    double scale = 1.0;
    Eigen::VectorXd b_new;
    double ll_new = -std::numeric_limits<double>::infinity();
    for (int half = 0; half < 40; ++half) {
      b_new = b + scale * step;
      ll_new = bernoulli_loglik(z * b_new, a);
      if (ll_new >= ll) break;
      scale *= 0.5;
    }
    if (ll_new < ll) break;  // no ascent direction left
    b = b_new;
    eta = z * b;
    ll = ll_new;
    diag.loglik_trace.push_back(ll);
  }
  throw std::runtime_error(
      "fit_propensity: logistic fit did not converge; final mean gradient "
      "max-norm " +
      std::to_string(grad_norm));
}

PinballFitDiagnostics pinball_fit(const Eigen::MatrixXd& x,
                                  const Eigen::VectorXd& y, double tol,
                                  int max_iter) {
  const Eigen::MatrixXd z = with_intercept(x);
  const auto n = z.rows();
  const double eps = kPinballSmoothing;

  Eigen::VectorXd b = Eigen::VectorXd::Zero(z.cols());
  b[0] = sample_median(std::vector<double>(y.data(), y.data() + y.size()));

  auto gradient = [&](const Eigen::VectorXd& coef) {
    Eigen::VectorXd r = y - z * coef;
    Eigen::VectorXd s(n);
    for (Eigen::Index i = 0; i < n; ++i)
      s[i] = r[i] / (2.0 * std::sqrt(r[i] * r[i] + eps * eps));
    return Eigen::VectorXd(-(z.transpose() * s) / static_cast<double>(n));
  };

  PinballFitDiagnostics diag;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd g = gradient(b);
    diag.grad_norm = g.lpNorm<Eigen::Infinity>();
    diag.iterations = it;
    if (diag.grad_norm <= tol) break;
    // Majorize sqrt(r^2 + eps^2) by a quadratic at the current residuals and
    // minimize it: a weighted least squares step. The smoothed loss is
    // non-increasing along these steps.
    Eigen::VectorXd r = y - z * b;
    Eigen::VectorXd sqrt_w(n);
    for (Eigen::Index i = 0; i < n; ++i)
      sqrt_w[i] = 1.0 / std::sqrt(std::sqrt(r[i] * r[i] + eps * eps));
    Eigen::VectorXd b_new = weighted_least_squares(z, y, sqrt_w);
    if ((b_new - b).lpNorm<Eigen::Infinity>() == 0.0) break;
    b = b_new;
  }
  diag.coef = b;
  diag.grad_norm = gradient(b).lpNorm<Eigen::Infinity>();
  diag.smoothed_loss = mean_pinball_loss_smoothed(x, y, b);
  return diag;
}

Evaluator clipped_below(Evaluator f, double floor) {
  return [f = std::move(f), floor](const Eigen::VectorXd& x) {
    const double v = f(x);
    return v < floor ? floor : v;
  };
}

// ceil(n^{4/5}) on the fitting sample, capped at the arm subsample size.
int default_density_k(std::size_t n, std::size_t arm_size) {
  const auto k = static_cast<int>(
      std::ceil(std::pow(static_cast<double>(n), 0.8)));
  return std::min<int>(k, static_cast<int>(arm_size));
}

}  // namespace

double LinearModel::operator()(const Eigen::VectorXd& x) const {
  if (x.size() + 1 != coef.size())
    throw std::invalid_argument("LinearModel: covariate dimension mismatch");
  return coef[0] + coef.tail(coef.size() - 1).dot(x);
}

double mean_pinball_loss_smoothed(const Eigen::MatrixXd& x,
                                  const Eigen::VectorXd& y,
                                  const Eigen::VectorXd& coef) {
  const Eigen::MatrixXd z = with_intercept(x);
  Eigen::VectorXd r = y - z * coef;
  double s = 0.0;
  const double eps = kPinballSmoothing;
  for (Eigen::Index i = 0; i < r.size(); ++i)
    s += 0.5 * std::sqrt(r[i] * r[i] + eps * eps);
  return s / static_cast<double>(r.size());
}

Evaluator fit_propensity(const Dataset& data, const FitConfig& cfg) {
  return fit_propensity(data, cfg, nullptr);
}

Evaluator fit_propensity(const Dataset& data, const FitConfig& cfg,
                         LogisticFitDiagnostics* diag_out) {
  const ClipConfig clip = cfg.clip;
  if (const auto* known = std::get_if<KnownPropensity>(&cfg.propensity_method)) {
    if (known->value) {
      const double v = *known->value;
      if (!(v > 0.0 && v < 1.0))
        throw std::invalid_argument("fit_propensity: known value must be in (0,1)");
      return [v, clip](const Eigen::VectorXd&) {
        return std::clamp(v, clip.eps_clip, 1.0 - clip.eps_clip);
      };
    }
    if (!known->fn)
      throw std::invalid_argument("fit_propensity: known propensity has neither value nor evaluator");
    Evaluator fn = known->fn;
    return [fn = std::move(fn), clip](const Eigen::VectorXd& x) {
      return std::clamp(fn(x), clip.eps_clip, 1.0 - clip.eps_clip);
    };
  }
  if (data.arm_count(0) == 0 || data.arm_count(1) == 0)
    throw std::runtime_error(
        "fit_propensity: logistic fit needs both treatment arms present");
  LogisticFitDiagnostics diag =
      logistic_mle(data.covariates(), data.treatments(), cfg.grad_tol,
                   cfg.max_iter);
  if (diag_out) *diag_out = diag;
  LinearModel lin{diag.coef};
  return [lin = std::move(lin), clip](const Eigen::VectorXd& x) {
    return std::clamp(expit(lin(x)), clip.eps_clip, 1.0 - clip.eps_clip);
  };
}

Evaluator fit_conditional_median(const Dataset& data, int arm,
                                 const FitConfig& cfg) {
  return fit_conditional_median(data, arm, cfg, nullptr);
}

Evaluator fit_conditional_median(const Dataset& data, int arm,
                                 const FitConfig& cfg,
                                 PinballFitDiagnostics* diag_out) {
  ArmData ad = arm_view(data, arm, "fit_conditional_median");
  if (const auto* knn = std::get_if<KnnLocalMedian>(&cfg.median_method)) {
    if (knn->k < 1)
      throw std::invalid_argument("KnnLocalMedian: k must be >= 1");
    const int k = knn->k;
    return [x = ad.x, y = ad.y, k](const Eigen::VectorXd& q) {
      const auto idx = knn_indices(*x, q, k);
      std::vector<double> vals(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i)
        vals[i] = (*y)[idx[i]];
      return sample_median(std::move(vals));
    };
  }
  PinballFitDiagnostics diag =
      pinball_fit(*ad.x, *ad.y, cfg.grad_tol, cfg.max_iter);
  if (diag_out) *diag_out = diag;
  return LinearModel{diag.coef};
}

double silverman_bandwidth(const std::vector<double>& residuals) {
  if (residuals.size() < 2)
    throw std::invalid_argument("silverman_bandwidth: need at least 2 values");
  const bool all_same = std::all_of(
      residuals.begin(), residuals.end(),
      [&](double v) { return v == residuals.front(); });
  if (all_same)
    throw std::invalid_argument(
        "silverman_bandwidth: undefined for identical values");
  const double sd = sample_sd(residuals);
  const double iqr = iqr_type7(residuals);
  const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  return 0.9 * spread *
         std::pow(static_cast<double>(residuals.size()), -0.2);
}

Evaluator fit_density_at_median(const Dataset& data, int arm,
                                const Evaluator& median_model,
                                const KernelSpec& kernel,
                                const FitConfig& cfg) {
  ArmData ad = arm_view(data, arm, "fit_density_at_median");
  const auto m = ad.y->size();
  Eigen::VectorXd resid(m);
  for (Eigen::Index i = 0; i < m; ++i)
    resid[i] = (*ad.y)[i] - median_model(ad.x->row(i).transpose());

  const double f_min = cfg.clip.f_min;
  const bool degenerate = [&] {
    for (Eigen::Index i = 1; i < m; ++i)
      if (resid[i] != resid[0]) return false;
    return true;
  }();
  if (degenerate && !kernel.bandwidth) {
    // Point mass: the conditional distribution has no spread around the
    // fitted median, so the density is a spike (at the median) or zero
    // (away from it).
    const double v = resid[0] == 0.0 ? std::numeric_limits<double>::max()
                                     : f_min;
    return [v](const Eigen::VectorXd&) { return v; };
  }

  double h;
  if (kernel.bandwidth) {
    h = *kernel.bandwidth;
    if (!(h > 0.0))
      throw std::invalid_argument("fit_density_at_median: bandwidth must be > 0");
  } else {
    h = silverman_bandwidth(
        std::vector<double>(resid.data(), resid.data() + m));
  }

  auto targets = std::make_shared<Eigen::VectorXd>(m);
  for (Eigen::Index i = 0; i < m; ++i)
    (*targets)[i] = normal_pdf(resid[i] / h) / h;

  if (const auto* nw = std::get_if<NadarayaWatson>(&cfg.density_regressor)) {
    const double hx = nw->bandwidth_x;
    if (!(hx > 0.0))
      throw std::invalid_argument("NadarayaWatson: bandwidth_x must be > 0");
    return clipped_below(
        [x = ad.x, targets, hx](const Eigen::VectorXd& q) {
          double num = 0.0, den = 0.0;
          for (Eigen::Index i = 0; i < x->rows(); ++i) {
            const double w = std::exp(
                -0.5 * (x->row(i).transpose() - q).squaredNorm() / (hx * hx));
            num += w * (*targets)[i];
            den += w;
          }
          return den > 0.0 ? num / den : 0.0;
        },
        f_min);
  }
  const auto& knn = std::get<KnnRegression>(cfg.density_regressor);
  int k = knn.k ? *knn.k
                : default_density_k(data.size(), static_cast<std::size_t>(m));
  if (k < 1) throw std::invalid_argument("KnnRegression: k must be >= 1");
  k = std::min<int>(k, static_cast<int>(m));
  return clipped_below(
      [x = ad.x, targets, k](const Eigen::VectorXd& q) {
        const auto idx = knn_indices(*x, q, k);
        double s = 0.0;
        for (int i : idx) s += (*targets)[i];
        return s / static_cast<double>(idx.size());
      },
      f_min);
}

Evaluator fit_conditional_mean(const Dataset& data, int arm,
                               const FitConfig& cfg) {
  ArmData ad = arm_view(data, arm, "fit_conditional_mean");
  if (const auto* knn = std::get_if<KnnMean>(&cfg.mean_method)) {
    if (knn->k < 1) throw std::invalid_argument("KnnMean: k must be >= 1");
    const int k = knn->k;
    return [x = ad.x, y = ad.y, k](const Eigen::VectorXd& q) {
      const auto idx = knn_indices(*x, q, k);
      double s = 0.0;
      for (int i : idx) s += (*y)[i];
      return s / static_cast<double>(idx.size());
    };
  }
  const Eigen::MatrixXd z = with_intercept(*ad.x);
  Eigen::VectorXd coef = z.colPivHouseholderQr().solve(*ad.y);
  return LinearModel{std::move(coef)};
}

}  // namespace acme
