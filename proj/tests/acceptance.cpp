// End-to-end acceptance suite. Each criterion prints one [PASS]/[FAIL] line;
// the exit code is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "acme/analytic.hpp"
#include "acme/cli.hpp"
#include "acme/estimator.hpp"
#include "acme/math_util.hpp"
#include "acme/simulation.hpp"

using namespace acme;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Criterion {
  std::string name;
  std::function<bool(std::string&)> run;
  double time_limit_sec = 0.0;  // 0 = no stated limit
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// ---- independent oracles (kept free of the library's root finder) ----

double oracle_phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double oracle_bisect_median(const std::function<double(double)>& cdf,
                            double lo, double hi) {
  for (int i = 0; i < 200 && hi - lo > 1e-12; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (cdf(mid) < 0.5)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double case1_mixture_cdf(double y) {
  return 0.2 * oracle_phi(y - 22.0) + 0.8 * oracle_phi(y + 5.0);
}

PolicySpec x1_positive() {
  return PolicySpec::covariate_rule(
      [](const Eigen::VectorXd& x) { return x[0] > 0.0 ? 1 : 0; },
      std::nullopt, "x1-positive");
}

std::string data_dir() { return ACME_DATA_DIR; }

DiscreteModel random_gaussian_model(std::mt19937_64& eng, int min_labels = 2,
                                    int max_labels = 4) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int L = min_labels +
                static_cast<int>(eng() % static_cast<std::uint64_t>(
                                              max_labels - min_labels + 1));
  DiscreteModel m;
  double psum = 0.0;
  for (int i = 0; i < L; ++i) {
    SupportPoint pt;
    pt.label = "g" + std::to_string(i);
    pt.p = 0.2 + u(eng);
    psum += pt.p;
    pt.pi = 0.3 + 0.4 * u(eng);
    for (int a = 0; a < 2; ++a)
      pt.arm[static_cast<std::size_t>(a)] =
          ArmDistribution::gaussian(-3.0 + 6.0 * u(eng), 0.6 + 1.2 * u(eng));
    m.support.push_back(std::move(pt));
  }
  for (auto& pt : m.support) pt.p /= psum;
  m.validate();
  return m;
}

// Pbar from P: means shifted up, sigmas inflated, propensities nudged, all
// proportional to lambda so the remainder's second-order terms have one sign.
DiscreteModel perturb_model(const DiscreteModel& m, double lambda,
                            std::mt19937_64& eng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  DiscreteModel mb = m;
  for (auto& pt : mb.support) {
    pt.pi = std::clamp(pt.pi + lambda * (-0.05 + 0.1 * u(eng)), 0.05, 0.95);
    for (int a = 0; a < 2; ++a) {
      auto& arm = pt.arm[static_cast<std::size_t>(a)];
      const double du = 0.5 + 0.5 * u(eng);
      const double dv = 0.3 + 0.5 * u(eng);
      for (auto& c : arm.components) {
        c.mu += lambda * du;
        c.sigma *= 1.0 + lambda * dv;
      }
    }
  }
  return mb;
}

bool load_decisions(const std::string& values_json, std::vector<int>& mean_d,
                    std::vector<int>& mme_d, std::vector<int>& acme_d) {
  std::ifstream in(values_json);
  if (!in) return false;
  json j;
  in >> j;
  mean_d = j.at("mean_optimal").at("decisions").get<std::vector<int>>();
  mme_d = j.at("mme_optimal").at("decisions").get<std::vector<int>>();
  acme_d = j.at("acme_optimal").at("decisions").get<std::vector<int>>();
  return true;
}

}  // namespace

int main() {
  std::vector<Criterion> criteria;
  const LognormalDgp dgp;
  const double psi_x1 = lognormal_x1_policy_value();

  // Truth-consistency gate: the closed-form constant and the 1e7-draw
  // oracle must agree before any experiment consumes it.
  const auto [psi_mc, psi_mc_se] =
      lognormal_policy_value_mc(dgp, x1_positive(), 10000000, 0x0AC1);
  const bool truth_ok = std::abs(psi_mc - psi_x1) <= 3.0 * psi_mc_se;
  std::printf("[info] truth check x1-positive: closed form %.6f, oracle %.6f (se %.2g)%s\n",
              psi_x1, psi_mc, psi_mc_se, truth_ok ? "" : "  ** DISAGREE **");

  // Shared across criteria 5 and 6: the efficiency bound for the x1 rule.
  double sigma2_cache = -1.0;
  auto sigma2 = [&] {
    if (sigma2_cache < 0.0)
      sigma2_cache = analytic_variance_bound(
          dgp.true_nuisances(),
          [&](std::mt19937_64& eng) { return dgp.sample_x(eng); },
          x1_positive(), 1000000, 0xACC5);
    return sigma2_cache;
  };

  criteria.push_back({"1: decision table on both bundled cases (via the CLI)",
                      [&](std::string& detail) {
    const fs::path out = fs::temp_directory_path() / "acme_acceptance";
    fs::create_directories(out);
    const std::string cli = ACME_CLI_PATH;
    bool ok = true;
    for (int k = 1; k <= 2; ++k) {
      const std::string model = data_dir() + "/case" + std::to_string(k) + ".json";
      const std::string table = (out / ("case" + std::to_string(k) + ".csv")).string();
      const std::string values = (out / ("case" + std::to_string(k) + ".json")).string();
      const std::string cmd = "\"" + cli + "\" illustrate --model \"" + model +
                              "\" --out \"" + table + "\" --json-out \"" +
                              values + "\" > /dev/null 2>&1";
      if (std::system(cmd.c_str()) != 0) {
        detail = "CLI invocation failed for case " + std::to_string(k);
        return false;
      }
      std::vector<int> mean_d, mme_d, acme_d;
      if (!load_decisions(values, mean_d, mme_d, acme_d)) return false;
      if (k == 1)
        ok = ok && mean_d == std::vector<int>{0, 1} &&
             mme_d == std::vector<int>{0, 1} && acme_d == std::vector<int>{0, 0};
      else
        ok = ok && mean_d == std::vector<int>{0, 1} &&
             mme_d == std::vector<int>{0, 0} && acme_d == std::vector<int>{0, 0};
      detail += "case" + std::to_string(k) + " mean/mme/acme on G2 = " +
                std::to_string(mean_d[1]) + "/" + std::to_string(mme_d[1]) +
                "/" + std::to_string(acme_d[1]) + "  ";
    }
    return ok;
  }, 1.0});

  criteria.push_back({"2: mixture and marginal medians vs bisection oracle (1e-3)",
                      [&](std::string& detail) {
    const auto case1 = cli::model_from_json_file(data_dir() + "/case1.json");
    const auto case2 = cli::model_from_json_file(data_dir() + "/case2.json");

    const double med_mix = conditional_median(case1, 1, 1);
    const double oracle_mix = oracle_bisect_median(case1_mixture_cdf, -60, 60);

    const double mm1_treat = marginal_median_value(case1, {0, 1});
    const double o1_treat = oracle_bisect_median(
        [](double m) { return 0.5 * oracle_phi(m - 9.0) + 0.5 * case1_mixture_cdf(m); },
        -60, 60);
    const double mm1_none = marginal_median_value(case1, {0, 0});
    const double mm2_treat = marginal_median_value(case2, {0, 1});
    const double o2_treat = oracle_bisect_median(
        [](double m) {
          return 0.5 * oracle_phi((m + 4.0) / 2.0) + 0.5 * case1_mixture_cdf(m);
        },
        -60, 60);
    const double mm2_none = marginal_median_value(case2, {0, 0});

    detail = "G2 treated median " + fmt(med_mix) + " (oracle " + fmt(oracle_mix) +
             "); case1 " + fmt(mm1_treat) + "/" + fmt(mm1_none) + "; case2 " +
             fmt(mm2_treat) + "/" + fmt(mm2_none);
    return std::abs(med_mix - oracle_mix) <= 1e-3 &&
           std::abs(med_mix - (-4.6814)) <= 1e-3 &&
           std::abs(mm1_treat - o1_treat) <= 1e-3 &&
           std::abs(mm1_none - 4.5) <= 1e-3 &&
           std::abs(mm2_treat - o2_treat) <= 1e-3 &&
           std::abs(mm2_treat - (-4.403)) <= 1e-3 &&
           std::abs(mm2_none - (-4.0 / 3.0)) <= 1e-9;
  }});

  criteria.push_back({"3: gaussian closed form vs bisection (1e-8, 100 draws)",
                      [&](std::string& detail) {
    std::mt19937_64 eng(303);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
      // Ranges keep the mean gap within a few sds so the CDF equation has a
      // resolvable slope at the root; far-separated tiny-sigma groups make
      // the equation flat below double precision.
      const double mu0 = -2.5 + 5 * u(eng), mu1 = -2.5 + 5 * u(eng);
      const double s0 = 0.9 + 1.6 * u(eng), s1 = 0.9 + 1.6 * u(eng);
      DiscreteModel m;
      SupportPoint p0, p1;
      p0.label = "0";
      p0.p = 0.5;
      p0.arm[0] = p0.arm[1] = ArmDistribution::gaussian(mu0, s0);
      p1.label = "1";
      p1.p = 0.5;
      p1.arm[0] = p1.arm[1] = ArmDistribution::gaussian(mu1, s1);
      m.support = {p0, p1};
      m.validate();
      const double closed = gaussian_marginal_median_closed_form(mu0, s0, mu1, s1);
      worst = std::max(worst,
                       std::abs(marginal_median_value(m, {0, 0}) - closed));
    }
    detail = "max |bisection - closed form| = " + fmt(worst);
    return worst <= 1e-8;
  }, 1.0});

  criteria.push_back({"4: expansion residual <= 1e-8 and quadratic remainder (20 pairs)",
                      [&](std::string& detail) {
    std::mt19937_64 eng(404);
    double worst_resid = 0.0, worst_ratio_lo = 10.0, worst_ratio_hi = 0.0;
    for (int t = 0; t < 20; ++t) {
      const auto m = random_gaussian_model(eng);
      std::vector<int> policy(m.support.size());
      for (auto& d : policy) d = static_cast<int>(eng() & 1U);
      // the same (u, v, w) draws at lambda and lambda/2
      const auto state = eng;
      auto eng1 = state, eng2 = state;
      const double lambda = 0.08;
      const auto mb1 = perturb_model(m, lambda, eng1);
      const auto mb2 = perturb_model(m, lambda / 2.0, eng2);
      eng = eng1;
      const auto r1 = von_mises_check(m, mb1, policy);
      const auto r2 = von_mises_check(m, mb2, policy);
      worst_resid = std::max({worst_resid, std::abs(r1.residual),
                              std::abs(r2.residual)});
      const double ratio = r1.remainder / r2.remainder;
      worst_ratio_lo = std::min(worst_ratio_lo, ratio);
      worst_ratio_hi = std::max(worst_ratio_hi, ratio);
    }
    detail = "max |residual| = " + fmt(worst_resid) + ", remainder ratios in [" +
             fmt(worst_ratio_lo) + ", " + fmt(worst_ratio_hi) + "]";
    return worst_resid <= 1e-8 && worst_ratio_lo >= 3.5 && worst_ratio_hi <= 4.5;
  }});

  criteria.push_back({"5: efficiency bound formula vs monte carlo Var(xi) (2%)",
                      [&](std::string& detail) {
    const double bound = sigma2();
    const auto data = sample_dgp(dgp, 1000000, 0xDA7A);
    const auto est = dr_value(data, dgp.true_nuisances(), x1_positive());
    const double mc = sample_variance(est.contributions);
    detail = "bound " + fmt(bound) + " vs mc " + fmt(mc) + " (rel " +
             fmt(std::abs(bound - mc) / mc) + ")";
    return std::abs(bound - mc) / mc <= 0.02;
  }, 60.0});

  // Criterion 6 runs one experiment and is judged in three parts.
  std::shared_ptr<ExperimentReport> rmse_report;
  auto ensure_rmse = [&] {
    if (!rmse_report) {
      PerturbConfig base;
      base.density_floor = 0.1;  // keeps the perturbed density within the
                                 // boundedness the estimator assumes
      rmse_report = std::make_shared<ExperimentReport>(rmse_experiment(
          dgp, x1_positive(), psi_x1, {5000}, default_alpha_grid(), 1000,
          0x51E5, base));
    }
    return rmse_report;
  };

  criteria.push_back({"6a: dr rmse <= 0.5 x plug-in rmse (n=5000, alpha=0.25)",
                      [&](std::string& detail) {
    const auto rep = ensure_rmse();
    const double dr = rep->cell(5000, 0.25, EstimatorKind::DoublyRobust).rmse;
    const double pi = rep->cell(5000, 0.25, EstimatorKind::PlugIn).rmse;
    detail = "dr " + fmt(dr) + " vs plugin " + fmt(pi) + " (ratio " +
             fmt(dr / pi) + ")";
    return dr <= 0.5 * pi;
  }, 900.0});

  criteria.push_back({"6b: dr rmse within 25% of the clt floor (n=5000, alpha=0.25)",
                      [&](std::string& detail) {
    const auto rep = ensure_rmse();
    const double dr = rep->cell(5000, 0.25, EstimatorKind::DoublyRobust).rmse;
    const double floor = std::sqrt(sigma2() / 5000.0);
    detail = "dr " + fmt(dr) + " vs floor " + fmt(floor) + " (ratio " +
             fmt(dr / floor) +
             "); the n^-alpha mean offset of the perturbations leaves a "
             "second-order bias of about " +
             fmt(std::sqrt(std::max(dr * dr - floor * floor, 0.0))) +
             " at this n, which no clipping removes";
    return std::abs(dr - floor) <= 0.25 * floor;
  }});

  criteria.push_back({"6c: plug-in log-rmse strictly decreasing in alpha",
                      [&](std::string& detail) {
    const auto rep = ensure_rmse();
    bool dec = true;
    std::string seq;
    double prev = 0.0;
    bool first = true;
    for (double a : default_alpha_grid()) {
      const double r = rep->cell(5000, a, EstimatorKind::PlugIn).rmse;
      if (!first && r >= prev) dec = false;
      prev = r;
      first = false;
      seq += fmt(r) + " ";
    }
    detail = "plug-in rmse by alpha: " + seq;
    return dec;
  }});

  criteria.push_back({"7: truth recovery with exact nuisances (n=1e5, 3 se)",
                      [&](std::string& detail) {
    if (!truth_ok) {
      detail = "closed form " + fmt(psi_x1) + " vs oracle " + fmt(psi_mc) +
               " disagree";
      return false;
    }
    const auto data = sample_dgp(dgp, 100000, 0x7007);
    const auto est = dr_value(data, dgp.true_nuisances(), x1_positive());
    detail = "psi_hat " + fmt(est.psi_hat) + " vs " + fmt(psi_x1) + " (" +
             fmt(std::abs(est.psi_hat - psi_x1) / est.se) + " se)";
    return std::abs(est.psi_hat - psi_x1) <= 3.0 * est.se;
  }});

  criteria.push_back({"8: wald coverage in [93%, 97%] for fixed and learned policies",
                      [&](std::string& detail) {
    // Truth for the learned policy comes from a pre-registered Monte Carlo
    // oracle (1e7 draws, fixed seed); the closed form must agree first.
    auto [oracle, oracle_se] = lognormal_policy_value_mc(
        dgp, PolicySpec::treat_all(), 10000000, 0x09AC1E);
    if (std::abs(oracle - lognormal_treat_all_value()) > 3.0 * oracle_se) {
      detail = "learned-policy oracle " + fmt(oracle) +
               " disagrees with the closed form " +
               fmt(lognormal_treat_all_value());
      return false;
    }
    const auto fixed = coverage_experiment(
        dgp, PolicyRequest::fixed_policy(x1_positive()), 5000, 1000, psi_x1,
        0xC0FE);
    const auto learned = coverage_experiment(
        dgp, PolicyRequest::learn_median_optimal(), 5000, 1000, oracle,
        0xBEEF);
    detail = "fixed " + fmt(fixed.coverage) + ", learned " +
             fmt(learned.coverage);
    return fixed.coverage >= 0.93 && fixed.coverage <= 0.97 &&
           learned.coverage >= 0.93 && learned.coverage <= 0.97;
  }});

  criteria.push_back({"9: median-comparison policy maximizes the value (50 models)",
                      [&](std::string& detail) {
    std::mt19937_64 eng(909);
    double worst_gap = 0.0;
    for (int t = 0; t < 50; ++t) {
      const auto m = random_gaussian_model(eng, 2, 5);
      const auto table = optimal_policies(m);
      const double rule_value = acme_value(m, table.acme_decision);
      const std::size_t L = m.support.size();
      std::vector<int> pol(L);
      double best = -1e300;
      for (std::size_t mask = 0; mask < (std::size_t{1} << L); ++mask) {
        for (std::size_t i = 0; i < L; ++i)
          pol[i] = static_cast<int>((mask >> i) & 1U);
        best = std::max(best, acme_value(m, pol));
      }
      worst_gap = std::max(worst_gap, best - rule_value);
    }
    detail = "max enumeration advantage over the rule = " + fmt(worst_gap);
    return worst_gap <= 1e-10;
  }});

  criteria.push_back({"10: across-group flip pair and flip condition vs enumeration",
                      [&](std::string& detail) {
    const auto case1 = cli::model_from_json_file(data_dir() + "/case1.json");
    const auto case2 = cli::model_from_json_file(data_dir() + "/case2.json");
    if (!(case1.support[1].arm[0] == case2.support[1].arm[0]) ||
        !(case1.support[1].arm[1] == case2.support[1].arm[1])) {
      detail = "G2 arms differ between the bundled cases";
      return false;
    }
    const auto t1 = optimal_policies(case1);
    const auto t2 = optimal_policies(case2);
    if (!(t1.mme_decision[1] == 1 && t2.mme_decision[1] == 0 &&
          t1.acme_decision[1] == t2.acme_decision[1])) {
      detail = "flip pattern not reproduced";
      return false;
    }

    std::mt19937_64 eng(1010);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int decisive = 0, agree = 0, draws = 0;
    while (decisive < 100 && draws < 20000) {
      ++draws;
      TwoGroupGaussianModel model;
      const double s0 = 0.5 + u(eng);
      const double ratio = 1.5 + 2.5 * u(eng);
      const double mu0 = 0.5 + 1.5 * u(eng);
      const double umax = std::min(ratio - 0.05, 3.0);
      const double uu = 1.05 + (umax - 1.05) * u(eng);
      model.arms[1][0] = {mu0, s0};
      model.arms[1][1] = {mu0 * uu, s0 * ratio};
      for (int a = 0; a < 2; ++a)
        model.arms[0][static_cast<std::size_t>(a)] = {-8.0 + 16.0 * u(eng),
                                                      0.2 + 2.8 * u(eng)};
      const auto flip = mme_flip_condition(model);
      if (flip.status != MmeFlipStatus::TreatsGroupOne &&
          flip.status != MmeFlipStatus::SparesGroupOne)
        continue;
      ++decisive;
      const auto table = optimal_policies(model.to_discrete_model());
      const int expected =
          flip.status == MmeFlipStatus::TreatsGroupOne ? 1 : 0;
      if (!table.mme_indifferent[1] && table.mme_decision[1] == expected)
        ++agree;
    }
    detail = "flip pair ok; condition vs enumeration " + std::to_string(agree) +
             "/" + std::to_string(decisive) + " decisive draws";
    return decisive == 100 && agree == 100;
  }});

  int failures = 0;
  for (auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    if (c.time_limit_sec > 0.0 && secs > c.time_limit_sec) {
      ok = false;
      detail += " [exceeded " + fmt(c.time_limit_sec) + "s limit]";
    }
    std::printf("[%s] criterion %s : %s (%.1fs)\n", ok ? "PASS" : "FAIL",
                c.name.c_str(), detail.c_str(), secs);
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  if (failures > 0)
    std::printf("%d criterion(s) failed\n", failures);
  else
    std::printf("all criteria passed\n");
  return failures;
}
