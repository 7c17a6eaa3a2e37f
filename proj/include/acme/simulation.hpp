#ifndef ACME_SIMULATION_HPP
#define ACME_SIMULATION_HPP

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "acme/core.hpp"
#include "acme/estimator.hpp"

namespace acme {

// X ~ N(0, I_5), logit pi(x) = x.beta with beta = (.2,...,.2), and
// Y | X, A lognormal with log-location x.beta + A and log-scale 0.25.
struct LognormalDgp {
  Eigen::VectorXd beta = Eigen::VectorXd::Constant(5, 0.2);
  double scale = 0.25;

  int dim() const { return static_cast<int>(beta.size()); }
  double linear(const Eigen::VectorXd& x) const { return beta.dot(x); }
  double pi(const Eigen::VectorXd& x) const;
  double median(int a, const Eigen::VectorXd& x) const;      // exp(x.beta + a)
  double density_at_median(int a, const Eigen::VectorXd& x) const;
  double mean(int a, const Eigen::VectorXd& x) const;

  NuisanceSet true_nuisances(ClipConfig clip = {}) const;
  Eigen::VectorXd sample_x(std::mt19937_64& eng) const;
};

// Exact policy value E[m_d(X)] for the rule 1{x_1 > 0}:
// e^{0.1} (e Phi(0.2) + Phi(-0.2)).
double lognormal_x1_policy_value();
// Exact value for treat-all: e^{1.1}.
double lognormal_treat_all_value();
// Monte Carlo oracle for E[m_d(X)] under an arbitrary pure policy.
// Returns (estimate, standard error).
std::pair<double, double> lognormal_policy_value_mc(const LognormalDgp& dgp,
                                                    const PolicySpec& policy,
                                                    std::size_t n_draws,
                                                    std::uint64_t seed);

Dataset sample_dgp(const LognormalDgp& dgp, std::size_t n, std::uint64_t seed);

enum class PerturbGranularity { PerReplication, PerPoint };

// Nuisance perturbation: pihat = expit(logit(pi) + e1), mhat_a = m_a + e2,
// fhat_a = f_{a,m} + e3 with e_k ~ N(n^{-alpha}, n^{-2 alpha}). The L2 error
// of each perturbed nuisance is Theta(n^{-alpha}) by construction.
struct PerturbConfig {
  double alpha = 0.25;
  std::size_t n = 1000;
  PerturbGranularity granularity = PerturbGranularity::PerReplication;
  bool zero_eps = false;     // e_k identically zero: nuisances are exact
  double density_floor = 1e-3;  // f_min applied to the perturbed density
  double eps_clip = 0.01;
};

NuisanceSet perturbed_nuisances(const LognormalDgp& dgp,
                                const PerturbConfig& cfg, std::uint64_t seed);

struct ExperimentCell {
  std::size_t n = 0;
  double alpha = 0.0;
  EstimatorKind estimator = EstimatorKind::DoublyRobust;
  double rmse = 0.0;
  double mc_se = 0.0;  // Monte Carlo se of the RMSE estimate (delta method)
  std::size_t reps = 0;
};

struct ExperimentReport {
  std::vector<ExperimentCell> cells;
  std::uint64_t seed = 0;
  std::string to_csv() const;  // long format: n,alpha,estimator,rmse,mc_se,reps
  const ExperimentCell& cell(std::size_t n, double alpha,
                             EstimatorKind est) const;
};

// RMSE of the plug-in and bias-corrected estimators against `truth` over a
// (n, alpha) grid of perturbation strengths, `reps` replications per cell.
// Per-replication RNG streams are derived from (seed, cell, replication) so
// results do not depend on thread scheduling.
ExperimentReport rmse_experiment(const LognormalDgp& dgp,
                                 const PolicySpec& policy, double truth,
                                 const std::vector<std::size_t>& ns,
                                 const std::vector<double>& alphas,
                                 std::size_t reps, std::uint64_t seed,
                                 const PerturbConfig& base_cfg = {});

struct CoverageResult {
  double coverage = 0.0;
  double avg_ci_width = 0.0;
  std::size_t reps = 0;
};

// Fraction of replications whose 95% Wald interval covers `truth`, using the
// exact nuisances (optionally perturbed) and either a fixed policy or the
// median-optimal policy learned from the supplied nuisances.
CoverageResult coverage_experiment(const LognormalDgp& dgp,
                                   const PolicyRequest& request, std::size_t n,
                                   std::size_t reps, double truth,
                                   std::uint64_t seed,
                                   const PerturbConfig* perturb = nullptr);

struct MarginCurve {
  std::vector<double> t;
  std::vector<double> prob;    // P(|gamma(X)| <= t)
  double loglog_slope = 0.0;   // least-squares slope over positive entries
};

MarginCurve margin_probe(const std::vector<double>& gamma_samples,
                         const std::vector<double>& t_grid);
MarginCurve margin_probe(const LognormalDgp& dgp,
                         const std::vector<double>& t_grid, std::size_t n_mc,
                         std::uint64_t seed);

// Default grids used by the simulation experiments.
std::vector<double> default_alpha_grid();
std::vector<std::size_t> default_n_grid();

// Worker cap: min(ACME_OTR_THREADS, hardware concurrency), at least 1.
unsigned max_worker_threads();

}  // namespace acme

#endif  // ACME_SIMULATION_HPP
