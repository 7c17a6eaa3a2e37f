#include "acme/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "acme/math_util.hpp"

namespace acme {

ArmDistribution ArmDistribution::gaussian(double mu, double sigma) {
  return ArmDistribution{{MixtureComponent{1.0, mu, sigma}}};
}

ArmDistribution ArmDistribution::mixture(std::vector<MixtureComponent> comps) {
  return ArmDistribution{std::move(comps)};
}

double ArmDistribution::cdf(double y) const {
  double s = 0.0;
  for (const auto& c : components)
    s += c.w * normal_cdf((y - c.mu) / c.sigma);
  return s;
}

double ArmDistribution::pdf(double y) const {
  double s = 0.0;
  for (const auto& c : components)
    s += c.w * normal_pdf((y - c.mu) / c.sigma) / c.sigma;
  return s;
}

double ArmDistribution::pdf_deriv(double y) const {
  double s = 0.0;
  for (const auto& c : components) {
    const double u = (y - c.mu) / c.sigma;
    s += -c.w * u * normal_pdf(u) / (c.sigma * c.sigma);
  }
  return s;
}

double ArmDistribution::mean() const {
  double s = 0.0;
  for (const auto& c : components) s += c.w * c.mu;
  return s;
}

double ArmDistribution::variance() const {
  const double m = mean();
  double s = 0.0;
  for (const auto& c : components)
    s += c.w * (c.sigma * c.sigma + (c.mu - m) * (c.mu - m));
  return s;
}

double ArmDistribution::sd() const { return std::sqrt(variance()); }

std::pair<double, double> ArmDistribution::bracket() const {
  double lo = components.front().mu, hi = components.front().mu;
  double max_sigma = 0.0;
  for (const auto& c : components) {
    lo = std::min(lo, c.mu);
    hi = std::max(hi, c.mu);
    max_sigma = std::max(max_sigma, c.sigma);
  }
  return {lo - 12.0 * max_sigma, hi + 12.0 * max_sigma};
}

void DiscreteModel::validate() const {
  if (support.empty())
    throw std::invalid_argument("DiscreteModel: empty support");
  double psum = 0.0;
  for (const auto& pt : support) {
    if (pt.p < 0.0)
      throw std::invalid_argument("DiscreteModel: negative probability at label '" +
                                  pt.label + "'");
    if (!(pt.pi > 0.0 && pt.pi < 1.0))
      throw std::invalid_argument("DiscreteModel: propensity must be in (0,1) at label '" +
                                  pt.label + "'");
    psum += pt.p;
    for (int a = 0; a < 2; ++a) {
      const auto& arm = pt.arm[static_cast<std::size_t>(a)];
      if (arm.components.empty())
        throw std::invalid_argument("DiscreteModel: arm without components at label '" +
                                    pt.label + "'");
      double wsum = 0.0;
      for (const auto& c : arm.components) {
        if (!(c.w > 0.0))
          throw std::invalid_argument("DiscreteModel: mixture weights must be positive");
        if (!(c.sigma > 0.0))
          throw std::invalid_argument("DiscreteModel: sigmas must be positive");
        wsum += c.w;
      }
      if (std::abs(wsum - 1.0) > 1e-12)
        throw std::invalid_argument("DiscreteModel: mixture weights must sum to 1");
    }
  }
  if (std::abs(psum - 1.0) > 1e-12)
    throw std::invalid_argument("DiscreteModel: probabilities must sum to 1");
}

namespace {

double median_of(const ArmDistribution& arm) {
  if (arm.is_gaussian()) return arm.components.front().mu;
  const auto [lo, hi] = arm.bracket();
  return bisect_root([&](double m) { return arm.cdf(m) - 0.5; }, lo, hi);
}

void check_policy_size(const DiscreteModel& model,
                       const std::vector<int>& policy, const char* op) {
  if (policy.size() != model.support.size())
    throw std::invalid_argument(std::string(op) +
                                ": policy must decide every support label");
  for (int d : policy)
    if (d != 0 && d != 1)
      throw std::invalid_argument(std::string(op) + ": decisions must be 0 or 1");
}

}  // namespace

double conditional_median(const DiscreteModel& model, std::size_t x_index,
                          int a) {
  if (x_index >= model.support.size())
    throw std::out_of_range("conditional_median: label index out of range");
  if (a != 0 && a != 1)
    throw std::invalid_argument("conditional_median: arm must be 0 or 1");
  return median_of(model.support[x_index].arm[static_cast<std::size_t>(a)]);
}

double marginal_median_value(const DiscreteModel& model,
                             const std::vector<int>& policy) {
  check_policy_size(model, policy, "marginal_median_value");
  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (std::size_t i = 0; i < model.support.size(); ++i) {
    const auto [l, h] =
        model.support[i].arm[static_cast<std::size_t>(policy[i])].bracket();
    lo = first ? l : std::min(lo, l);
    hi = first ? h : std::max(hi, h);
    first = false;
  }
  auto f = [&](double m) {
    double s = 0.0;
    for (std::size_t i = 0; i < model.support.size(); ++i)
      s += model.support[i].p *
           model.support[i].arm[static_cast<std::size_t>(policy[i])].cdf(m);
    return s - 0.5;
  };
  return bisect_root(f, lo, hi);
}

double acme_value(const DiscreteModel& model, const std::vector<int>& policy) {
  check_policy_size(model, policy, "acme_value");
  double s = 0.0;
  for (std::size_t i = 0; i < model.support.size(); ++i)
    s += model.support[i].p * conditional_median(model, i, policy[i]);
  return s;
}

double gaussian_marginal_median_closed_form(double mu_d0, double sigma_d0,
                                            double mu_d1, double sigma_d1) {
  return (sigma_d1 * mu_d0 + sigma_d0 * mu_d1) / (sigma_d0 + sigma_d1);
}

OptimalPolicyTable optimal_policies(const DiscreteModel& model) {
  const std::size_t L = model.support.size();
  if (L > 20)
    throw std::invalid_argument(
        "optimal_policies: enumeration capped at 20 support labels");
  OptimalPolicyTable table;
  for (std::size_t i = 0; i < L; ++i) {
    const auto& pt = model.support[i];
    const double mu0 = pt.arm[0].mean(), mu1 = pt.arm[1].mean();
    table.mean_decision.push_back(mu1 > mu0 ? 1 : 0);
    table.mean_indifferent.push_back(mu1 == mu0);
    const double m0 = conditional_median(model, i, 0);
    const double m1 = conditional_median(model, i, 1);
    table.acme_decision.push_back(m1 > m0 ? 1 : 0);
    table.acme_indifferent.push_back(m1 == m0);
  }

  const std::size_t n_policies = std::size_t{1} << L;
  std::vector<int> policy(L);
  double best = -std::numeric_limits<double>::infinity();
  std::vector<std::pair<double, std::vector<int>>> values;
  values.reserve(n_policies);
  for (std::size_t mask = 0; mask < n_policies; ++mask) {
    for (std::size_t i = 0; i < L; ++i)
      policy[i] = static_cast<int>((mask >> i) & 1U);
    const double v = marginal_median_value(model, policy);
    values.emplace_back(v, policy);
    best = std::max(best, v);
  }
  const double tie_tol = 1e-9;
  for (auto& [v, pol] : values)
    if (v >= best - tie_tol) table.mme_maximizers.push_back(pol);
  table.mme_optimal_value = best;
  for (std::size_t i = 0; i < L; ++i) {
    bool saw0 = false, saw1 = false;
    for (const auto& pol : table.mme_maximizers)
      (pol[i] == 1 ? saw1 : saw0) = true;
    const bool indiff = saw0 && saw1;
    table.mme_indifferent.push_back(indiff);
    table.mme_decision.push_back(indiff ? 0 : table.mme_maximizers.front()[i]);
  }
  return table;
}

AgreementCheck mean_median_agreement_check(double mu1, double mu0, double m1, double m0,
                                 double sd1, double sd0) {
  AgreementCheck out;
  const double gap = sd1 + sd0;
  out.covered = std::abs(mu1 - mu0) > gap && std::abs(m1 - m0) > gap;
  out.same_sign = (mu1 > mu0) == (m1 > m0);
  return out;
}

DiscreteModel TwoGroupGaussianModel::to_discrete_model() const {
  DiscreteModel model;
  for (std::size_t g = 0; g < 2; ++g) {
    SupportPoint pt;
    pt.label = g == 0 ? "0" : "1";
    pt.p = 0.5;
    for (std::size_t a = 0; a < 2; ++a)
      pt.arm[a] = ArmDistribution::gaussian(arms[g][a].mu, arms[g][a].sigma);
    model.support.push_back(std::move(pt));
  }
  model.validate();
  return model;
}

MmeFlipResult mme_flip_condition(const TwoGroupGaussianModel& model) {
  MmeFlipResult out;
  const double mu1_1 = model.arms[1][1].mu, mu0_1 = model.arms[1][0].mu;
  const double s1_1 = model.arms[1][1].sigma, s0_1 = model.arms[1][0].sigma;
  const bool hypotheses = s1_1 > s0_1 && mu1_1 > mu0_1 && mu0_1 > 0.0 &&
                          mu1_1 / mu0_1 < s1_1 / s0_1;
  if (!hypotheses) {
    out.status = MmeFlipStatus::NotCovered;
    return out;
  }
  const double rhs = s1_1 * mu0_1 - s0_1 * mu1_1;
  int greater = 0, less = 0;
  for (std::size_t a = 0; a < 2; ++a) {
    const double lhs =
        (s1_1 - s0_1) * model.arms[0][a].mu + (mu1_1 - mu0_1) * model.arms[0][a].sigma;
    out.condition_holds[a] = lhs > rhs;
    if (lhs > rhs) ++greater;
    if (lhs < rhs) ++less;
  }
  if (greater == 2)
    out.status = MmeFlipStatus::TreatsGroupOne;
  else if (less == 2)
    out.status = MmeFlipStatus::SparesGroupOne;
  else
    out.status = MmeFlipStatus::Indeterminate;
  return out;
}

RemainderReport von_mises_check(const DiscreteModel& p,
                                const DiscreteModel& p_bar,
                                const std::vector<int>& policy) {
  if (p.support.size() != p_bar.support.size())
    throw std::invalid_argument("von_mises_check: support sizes differ");
  for (std::size_t i = 0; i < p.support.size(); ++i)
    if (p.support[i].label != p_bar.support[i].label)
      throw std::invalid_argument("von_mises_check: support labels differ at index " +
                                  std::to_string(i));
  check_policy_size(p, policy, "von_mises_check");

  RemainderReport rep;
  rep.lhs = acme_value(p_bar, policy) - acme_value(p, policy);

  // integral of xi_d(.; Pbar) under P, by iterated expectation: the
  // indicator term becomes a CDF of P evaluated at Pbar's median.
  double xi_bar_under_p = 0.0;
  double remainder = 0.0;
  double second_order = 0.0;
  for (std::size_t i = 0; i < p.support.size(); ++i) {
    const auto& pt = p.support[i];
    const auto& pt_bar = p_bar.support[i];
    const int d = policy[i];
    const double pi = pt.pi, pi_bar = pt_bar.pi;

    std::array<double, 2> m{}, m_bar{}, f_bar{}, f{}, cdf_p_at_mbar{};
    for (int a = 0; a < 2; ++a) {
      const auto ia = static_cast<std::size_t>(a);
      m[ia] = median_of(pt.arm[ia]);
      m_bar[ia] = median_of(pt_bar.arm[ia]);
      f[ia] = pt.arm[ia].pdf(m[ia]);
      f_bar[ia] = pt_bar.arm[ia].pdf(m_bar[ia]);
      cdf_p_at_mbar[ia] = pt.arm[ia].cdf(m_bar[ia]);
    }
    const double m_bar_d = m_bar[static_cast<std::size_t>(d)];

    const double term1 =
        d == 1 ? (pi / pi_bar) * (0.5 - cdf_p_at_mbar[1]) / f_bar[1] : 0.0;
    const double term0 = d == 0 ? ((1.0 - pi) / (1.0 - pi_bar)) *
                                      (0.5 - cdf_p_at_mbar[0]) / f_bar[0]
                                : 0.0;
    xi_bar_under_p += pt.p * (term1 + term0 + m_bar_d);

    // First-principles remainder: the CDF increments are exact, including
    // the F_{a,m}(x) = 1/2 evaluation.
    const double cdf_p_at_m1 = pt.arm[1].cdf(m[1]);
    const double cdf_p_at_m0 = pt.arm[0].cdf(m[0]);
    const double r1 = m_bar[1] - m[1] -
                      (pi / pi_bar) * (cdf_p_at_mbar[1] - cdf_p_at_m1) / f_bar[1];
    const double r0 = m_bar[0] - m[0] -
                      ((1.0 - pi) / (1.0 - pi_bar)) *
                          (cdf_p_at_mbar[0] - cdf_p_at_m0) / f_bar[0];
    remainder += pt.p * (d == 1 ? r1 : r0);

    // Product form; the unknown interior point of the Taylor remainder is
    // approximated by the midpoint between the two medians.
    for (int a = 0; a < 2; ++a) {
      const auto ia = static_cast<std::size_t>(a);
      if ((a == 1 && d != 1) || (a == 0 && d != 0)) continue;
      const double dm = m_bar[ia] - m[ia];
      const double fprime =
          pt.arm[ia].pdf_deriv(0.5 * (m[ia] + m_bar[ia]));
      double val;
      if (a == 1) {
        val = dm / (pi_bar * f_bar[1]) *
              ((pi_bar - pi) * f_bar[1] + (f_bar[1] - f[1]) * pi -
               dm * fprime * pi / 2.0);
      } else {
        val = dm / ((1.0 - pi_bar) * f_bar[0]) *
              ((f_bar[0] - f[0]) + (pi - pi_bar) * f_bar[0] +
               (f[0] - f_bar[0]) * pi - dm * fprime * (1.0 - pi) / 2.0);
      }
      second_order += pt.p * val;
    }
  }
  rep.eif_term = acme_value(p_bar, policy) - xi_bar_under_p;
  rep.remainder = remainder;
  rep.residual = rep.lhs - rep.eif_term - rep.remainder;
  rep.second_order = second_order;
  rep.form_gap = std::abs(rep.remainder - rep.second_order);
  // The three pieces satisfy an exact identity; anything beyond floating
  // point noise means a formula error.
  if (std::abs(rep.residual) > 1e-8)
    throw std::logic_error(
        "von_mises_check: decomposition residual " +
        std::to_string(rep.residual) + " exceeds 1e-8");
  return rep;
}

}  // namespace acme
