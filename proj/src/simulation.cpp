#include "acme/simulation.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <mutex>
#include <thread>

#include "acme/math_util.hpp"

namespace acme {

namespace {
constexpr double kSqrt2Pi = 2.5066282746310005;
}

double LognormalDgp::pi(const Eigen::VectorXd& x) const {
  return expit(linear(x));
}

double LognormalDgp::median(int a, const Eigen::VectorXd& x) const {
  return std::exp(linear(x) + a);
}

double LognormalDgp::density_at_median(int a, const Eigen::VectorXd& x) const {
  return 1.0 / (std::exp(linear(x) + a) * scale * kSqrt2Pi);
}

double LognormalDgp::mean(int a, const Eigen::VectorXd& x) const {
  return std::exp(linear(x) + a + 0.5 * scale * scale);
}

NuisanceSet LognormalDgp::true_nuisances(ClipConfig clip) const {
  NuisanceSet nuis;
  nuis.clip = clip;
  const LognormalDgp dgp = *this;
  nuis.pi = [dgp](const Eigen::VectorXd& x) { return dgp.pi(x); };
  for (int a = 0; a < 2; ++a) {
    nuis.median[static_cast<std::size_t>(a)] =
        [dgp, a](const Eigen::VectorXd& x) { return dgp.median(a, x); };
    nuis.density_at_median[static_cast<std::size_t>(a)] =
        [dgp, a](const Eigen::VectorXd& x) {
          return dgp.density_at_median(a, x);
        };
    nuis.mean[static_cast<std::size_t>(a)] =
        [dgp, a](const Eigen::VectorXd& x) { return dgp.mean(a, x); };
  }
  return nuis;
}

Eigen::VectorXd LognormalDgp::sample_x(std::mt19937_64& eng) const {
  std::normal_distribution<double> std_normal;
  Eigen::VectorXd x(dim());
  for (int j = 0; j < dim(); ++j) x[j] = std_normal(eng);
  return x;
}

double lognormal_x1_policy_value() {
  return std::exp(0.1) *
         (std::exp(1.0) * normal_cdf(0.2) + normal_cdf(-0.2));
}

double lognormal_treat_all_value() { return std::exp(1.1); }

std::pair<double, double> lognormal_policy_value_mc(const LognormalDgp& dgp,
                                                    const PolicySpec& policy,
                                                    std::size_t n_draws,
                                                    std::uint64_t seed) {
  std::mt19937_64 eng(derive_seed(seed, 0x6f7261636cULL));
  double sum = 0.0, sumsq = 0.0;
  for (std::size_t i = 0; i < n_draws; ++i) {
    const Eigen::VectorXd x = dgp.sample_x(eng);
    const double v = dgp.median(policy.decide(x), x);
    sum += v;
    sumsq += v * v;
  }
  const double m = sum / static_cast<double>(n_draws);
  const double var =
      (sumsq - static_cast<double>(n_draws) * m * m) /
      static_cast<double>(n_draws - 1);
  return {m, std::sqrt(var / static_cast<double>(n_draws))};
}

Dataset sample_dgp(const LognormalDgp& dgp, std::size_t n,
                   std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_dgp: need n >= 1");
  std::mt19937_64 eng(derive_seed(seed, 0x64677073ULL));
  std::normal_distribution<double> std_normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), dgp.dim());
  std::vector<int> a(n);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (int j = 0; j < dgp.dim(); ++j) x(r, j) = std_normal(eng);
    const double t = dgp.beta.dot(x.row(r).transpose());
    a[i] = unif(eng) < expit(t) ? 1 : 0;
    y[r] = std::exp(t + a[i] + dgp.scale * std_normal(eng));
  }
  return Dataset(std::move(x), std::move(a), std::move(y));
}

namespace {

// Deterministic standard normal derived from a seed and the bit pattern of
// the covariates; makes per-point perturbations pure functions of x.
double hashed_normal(std::uint64_t stream, const Eigen::VectorXd& x) {
  std::uint64_t h = stream;
  for (Eigen::Index j = 0; j < x.size(); ++j)
    h = splitmix64(h ^ std::bit_cast<std::uint64_t>(x[j]));
  const double u =
      (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;  // u in (0,1)
  return normal_quantile(u);
}

}  // namespace

NuisanceSet perturbed_nuisances(const LognormalDgp& dgp,
                                const PerturbConfig& cfg,
                                std::uint64_t seed) {
  NuisanceSet nuis;
  nuis.clip = ClipConfig{cfg.eps_clip, cfg.density_floor};
  const double mu = std::pow(static_cast<double>(cfg.n), -cfg.alpha);

  if (cfg.zero_eps) {
    NuisanceSet truth = dgp.true_nuisances(nuis.clip);
    return truth;
  }

  if (cfg.granularity == PerturbGranularity::PerReplication) {
    std::mt19937_64 eng(derive_seed(seed, 0x70657274ULL));
    std::normal_distribution<double> std_normal;
    const double e1 = mu + mu * std_normal(eng);
    const double e2 = mu + mu * std_normal(eng);
    const double e3 = mu + mu * std_normal(eng);
    nuis.pi = [dgp, e1](const Eigen::VectorXd& x) {
      return expit(dgp.linear(x) + e1);
    };
    for (int a = 0; a < 2; ++a) {
      nuis.median[static_cast<std::size_t>(a)] =
          [dgp, a, e2](const Eigen::VectorXd& x) {
            return dgp.median(a, x) + e2;
          };
      nuis.density_at_median[static_cast<std::size_t>(a)] =
          [dgp, a, e3](const Eigen::VectorXd& x) {
            return dgp.density_at_median(a, x) + e3;
          };
    }
    return nuis;
  }

  // PerPoint: each nuisance gets an independent draw per covariate vector,
  // realized as a seeded hash so evaluators stay pure.
  const std::uint64_t s1 = derive_seed(seed, 0x70707431ULL);
  const std::uint64_t s2 = derive_seed(seed, 0x70707432ULL);
  const std::uint64_t s3 = derive_seed(seed, 0x70707433ULL);
  nuis.pi = [dgp, mu, s1](const Eigen::VectorXd& x) {
    return expit(dgp.linear(x) + mu + mu * hashed_normal(s1, x));
  };
  for (int a = 0; a < 2; ++a) {
    nuis.median[static_cast<std::size_t>(a)] =
        [dgp, a, mu, s2](const Eigen::VectorXd& x) {
          return dgp.median(a, x) + mu + mu * hashed_normal(s2, x);
        };
    nuis.density_at_median[static_cast<std::size_t>(a)] =
        [dgp, a, mu, s3](const Eigen::VectorXd& x) {
          return dgp.density_at_median(a, x) + mu + mu * hashed_normal(s3, x);
        };
  }
  return nuis;
}

unsigned max_worker_threads() {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  if (const char* env = std::getenv("ACME_OTR_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1 && static_cast<unsigned>(cap) < hw)
      hw = static_cast<unsigned>(cap);
  }
  return hw;
}

namespace {

// Runs fn(i) for i in [0, count) across worker threads. Output slots are
// per-index, so the result is invariant to scheduling. The first worker
// exception is rethrown on the calling thread.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
  const unsigned workers =
      std::min<unsigned>(max_worker_threads(),
                         static_cast<unsigned>(std::max<std::size_t>(count, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr error;
  std::mutex error_mutex;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += workers) fn(i);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

double rmse_of(const std::vector<double>& errors) {
  std::vector<double> sq(errors.size());
  for (std::size_t i = 0; i < errors.size(); ++i) sq[i] = errors[i] * errors[i];
  return std::sqrt(mean(sq));
}

double rmse_mc_se(const std::vector<double>& errors, double rmse) {
  if (errors.size() < 2 || rmse == 0.0) return 0.0;
  std::vector<double> sq(errors.size());
  for (std::size_t i = 0; i < errors.size(); ++i) sq[i] = errors[i] * errors[i];
  const double se_mean_sq =
      sample_sd(sq) / std::sqrt(static_cast<double>(sq.size()));
  return se_mean_sq / (2.0 * rmse);
}

}  // namespace

std::string ExperimentReport::to_csv() const {
  std::string out = "n,alpha,estimator,rmse,mc_se,reps\n";
  char buf[256];
  for (const auto& c : cells) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%s,%.17g,%.17g,%zu\n", c.n,
                  c.alpha,
                  c.estimator == EstimatorKind::DoublyRobust ? "dr" : "plugin",
                  c.rmse, c.mc_se, c.reps);
    out += buf;
  }
  return out;
}

const ExperimentCell& ExperimentReport::cell(std::size_t n, double alpha,
                                             EstimatorKind est) const {
  for (const auto& c : cells)
    if (c.n == n && c.alpha == alpha && c.estimator == est) return c;
  throw std::out_of_range("ExperimentReport: no such cell");
}

ExperimentReport rmse_experiment(const LognormalDgp& dgp,
                                 const PolicySpec& policy, double truth,
                                 const std::vector<std::size_t>& ns,
                                 const std::vector<double>& alphas,
                                 std::size_t reps, std::uint64_t seed,
                                 const PerturbConfig& base_cfg) {
  if (reps < 2) throw std::invalid_argument("rmse_experiment: need reps >= 2");
  ExperimentReport report;
  report.seed = seed;
  std::uint64_t cell_id = 0;
  for (std::size_t n : ns) {
    for (double alpha : alphas) {
      PerturbConfig cfg = base_cfg;
      cfg.alpha = alpha;
      cfg.n = n;
      std::vector<double> err_dr(reps), err_pi(reps);
      parallel_for(reps, [&](std::size_t r) {
        const std::uint64_t data_seed = derive_seed(seed, cell_id, r, 0);
        const std::uint64_t nuis_seed = derive_seed(seed, cell_id, r, 1);
        const Dataset data = sample_dgp(dgp, n, data_seed);
        const NuisanceSet nuis = perturbed_nuisances(dgp, cfg, nuis_seed);
        const ValueEstimate dr = dr_value(data, nuis, policy);
        const ValueEstimate pi =
            plugin_value(data, nuis.median[0], nuis.median[1], policy);
        err_dr[r] = dr.psi_hat - truth;
        err_pi[r] = pi.psi_hat - truth;
      });
      for (EstimatorKind kind :
           {EstimatorKind::DoublyRobust, EstimatorKind::PlugIn}) {
        const auto& errs =
            kind == EstimatorKind::DoublyRobust ? err_dr : err_pi;
        ExperimentCell cell;
        cell.n = n;
        cell.alpha = alpha;
        cell.estimator = kind;
        cell.reps = reps;
        cell.rmse = rmse_of(errs);
        cell.mc_se = rmse_mc_se(errs, cell.rmse);
        report.cells.push_back(cell);
      }
      ++cell_id;
    }
  }
  return report;
}

CoverageResult coverage_experiment(const LognormalDgp& dgp,
                                   const PolicyRequest& request,
                                   std::size_t n, std::size_t reps,
                                   double truth, std::uint64_t seed,
                                   const PerturbConfig* perturb) {
  if (reps < 100)
    throw std::invalid_argument("coverage_experiment: need reps >= 100");
  if (request.kind == PolicyRequest::Kind::LearnMeanOptimal)
    throw std::invalid_argument(
        "coverage_experiment: mean-optimal learning not supported here");
  if (request.kind == PolicyRequest::Kind::Fixed && !request.fixed)
    throw std::invalid_argument(
        "coverage_experiment: fixed policy request without a policy");
  std::vector<double> hit(reps), width(reps);
  parallel_for(reps, [&](std::size_t r) {
    const std::uint64_t data_seed = derive_seed(seed, 0xc0feULL, r, 0);
    const Dataset data = sample_dgp(dgp, n, data_seed);
    NuisanceSet nuis =
        perturb ? perturbed_nuisances(dgp, *perturb,
                                      derive_seed(seed, 0xc0feULL, r, 1))
                : dgp.true_nuisances();
    const PolicySpec policy =
        request.kind == PolicyRequest::Kind::Fixed
            ? *request.fixed
            : PolicySpec::learned_median_optimal(nuis.median[1],
                                                 nuis.median[0]);
    const ValueEstimate est = dr_value(data, nuis, policy);
    hit[r] = (est.ci_lower <= truth && truth <= est.ci_upper) ? 1.0 : 0.0;
    width[r] = est.ci_upper - est.ci_lower;
  });
  CoverageResult res;
  res.reps = reps;
  res.coverage = mean(hit);
  res.avg_ci_width = mean(width);
  return res;
}

MarginCurve margin_probe(const std::vector<double>& gamma_samples,
                         const std::vector<double>& t_grid) {
  if (gamma_samples.empty())
    throw std::invalid_argument("margin_probe: no contrast samples");
  for (double t : t_grid)
    if (!(t > 0.0))
      throw std::invalid_argument("margin_probe: t grid must be positive");
  MarginCurve curve;
  curve.t = t_grid;
  curve.prob.resize(t_grid.size());
  for (std::size_t j = 0; j < t_grid.size(); ++j) {
    std::size_t c = 0;
    for (double g : gamma_samples)
      if (std::abs(g) <= t_grid[j]) ++c;
    curve.prob[j] =
        static_cast<double>(c) / static_cast<double>(gamma_samples.size());
  }
  // log-log least squares over strictly positive probabilities
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t m = 0;
  for (std::size_t j = 0; j < t_grid.size(); ++j) {
    if (curve.prob[j] <= 0.0) continue;
    const double lx = std::log(t_grid[j]);
    const double ly = std::log(curve.prob[j]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++m;
  }
  if (m >= 2) {
    const double denom = static_cast<double>(m) * sxx - sx * sx;
    if (denom != 0.0)
      curve.loglog_slope = (static_cast<double>(m) * sxy - sx * sy) / denom;
  }
  return curve;
}

MarginCurve margin_probe(const LognormalDgp& dgp,
                         const std::vector<double>& t_grid, std::size_t n_mc,
                         std::uint64_t seed) {
  std::mt19937_64 eng(derive_seed(seed, 0x6d617267ULL));
  std::vector<double> gamma(n_mc);
  for (std::size_t i = 0; i < n_mc; ++i) {
    const Eigen::VectorXd x = dgp.sample_x(eng);
    gamma[i] = dgp.median(1, x) - dgp.median(0, x);
  }
  return margin_probe(gamma, t_grid);
}

std::vector<double> default_alpha_grid() {
  return {0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5};
}

std::vector<std::size_t> default_n_grid() { return {100, 1000, 5000}; }

}  // namespace acme
