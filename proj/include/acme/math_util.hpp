#ifndef ACME_MATH_UTIL_HPP
#define ACME_MATH_UTIL_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace acme {

// 97.5% standard normal quantile used for all Wald intervals.
inline constexpr double kZ975 = 1.959964;

double normal_pdf(double x);
double normal_cdf(double x);
// Inverse standard normal CDF, p in (0,1). Accurate to ~1e-15.
double normal_quantile(double p);

inline double expit(double t) {
  if (t >= 0) {
    const double e = std::exp(-t);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(t);
  return e / (1.0 + e);
}
double logit(double p);

// Deterministic summation: pairwise reduction in index order, so results do
// not depend on thread scheduling or accumulation chunking.
double pairwise_sum(std::span<const double> v);
double mean(std::span<const double> v);
// Unbiased (n-1) sample variance / standard deviation.
double sample_variance(std::span<const double> v);
double sample_sd(std::span<const double> v);

// Linear-interpolation quantile on unsorted data (R type 7).
double quantile_type7(std::vector<double> v, double p);
double iqr_type7(const std::vector<double>& v);

// splitmix64; used to derive independent RNG streams from (seed, stream ids).
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a = 0,
                          std::uint64_t b = 0, std::uint64_t c = 0);

// Root of f on [lo, hi] (f(lo), f(hi) of opposite sign) by bisection.
// Stops once the bracket width is below width_tol.
double bisect_root(const std::function<double(double)>& f, double lo,
                   double hi, double width_tol = 1e-12, int max_iter = 300);

}  // namespace acme

#endif  // ACME_MATH_UTIL_HPP
