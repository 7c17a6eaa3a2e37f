#ifndef ACME_ANALYTIC_HPP
#define ACME_ANALYTIC_HPP

#include <array>
#include <string>
#include <vector>

namespace acme {

struct MixtureComponent {
  double w = 1.0;
  double mu = 0.0;
  double sigma = 1.0;
  bool operator==(const MixtureComponent&) const = default;
};

// Outcome distribution of one (group, arm) cell: a Gaussian or a finite
// Gaussian mixture. A single component is treated as an exact Gaussian.
struct ArmDistribution {
  std::vector<MixtureComponent> components;

  static ArmDistribution gaussian(double mu, double sigma);
  static ArmDistribution mixture(std::vector<MixtureComponent> comps);

  bool is_gaussian() const { return components.size() == 1; }
  double cdf(double y) const;
  double pdf(double y) const;
  double pdf_deriv(double y) const;
  double mean() const;
  double variance() const;
  double sd() const;
  // Interval holding all but < 1e-30 of the mass; used to bracket medians.
  std::pair<double, double> bracket() const;

  bool operator==(const ArmDistribution&) const = default;
};

struct SupportPoint {
  std::string label;
  double p = 0.0;
  double pi = 0.5;  // P(A=1 | X = this label)
  std::array<ArmDistribution, 2> arm;
};

// Fully specified generative model with finite covariate support.
struct DiscreteModel {
  std::vector<SupportPoint> support;
  void validate() const;  // throws on malformed probabilities/weights/sigmas
};

// Median of Y | X = support[x_index], A = a. Gaussians are exact; mixtures
// are solved by bisection on the mixture CDF.
double conditional_median(const DiscreteModel& model, std::size_t x_index,
                          int a);

// Median m of the outcome distribution induced by the policy:
// root of sum_x p(x) F_{d(x)}(m | x) = 1/2.
double marginal_median_value(const DiscreteModel& model,
                             const std::vector<int>& policy);

// E_X[m_{d(X)}(X)].
double acme_value(const DiscreteModel& model, const std::vector<int>& policy);

// Closed-form marginal median for a two-point support with Gaussian arms:
// the sd-weighted average of the two chosen means.
double gaussian_marginal_median_closed_form(double mu_d0, double sigma_d0,
                                            double mu_d1, double sigma_d1);

struct OptimalPolicyTable {
  std::vector<int> mean_decision, mme_decision, acme_decision;
  std::vector<bool> mean_indifferent, mme_indifferent, acme_indifferent;
  std::vector<std::vector<int>> mme_maximizers;
  double mme_optimal_value = 0.0;
};

// Per-label mean/median comparisons plus exhaustive marginal-median search
// over all 2^L policies. Indifferent labels report decision 0 with the flag
// set. Supports of more than 20 labels are rejected (enumeration cap).
OptimalPolicyTable optimal_policies(const DiscreteModel& model);

struct AgreementCheck {
  bool covered = false;    // both contrasts exceed sd1 + sd0
  bool same_sign = false;  // valid content only when covered
};

AgreementCheck mean_median_agreement_check(double mu1, double mu0, double m1, double m0,
                                 double sd1, double sd0);

struct GaussianArmParams {
  double mu = 0.0;
  double sigma = 1.0;
};

// Two equally likely groups (labels 0 and 1) with Gaussian arms.
struct TwoGroupGaussianModel {
  std::array<std::array<GaussianArmParams, 2>, 2> arms;  // arms[group][a]
  DiscreteModel to_discrete_model() const;
};

enum class MmeFlipStatus {
  TreatsGroupOne,
  SparesGroupOne,
  Indeterminate,  // boundary or mixed-arm outcome, no assertion made
  NotCovered,     // hypotheses on the group-1 arms fail
};

struct MmeFlipResult {
  MmeFlipStatus status = MmeFlipStatus::NotCovered;
  std::array<bool, 2> condition_holds{false, false};  // per group-0 arm a
};

// Evaluates, for each group-0 arm, the inequality
//   (sigma_1(1)-sigma_0(1)) mu_a(0) + (mu_1(1)-mu_0(1)) sigma_a(0)
//     > sigma_1(1) mu_0(1) - sigma_0(1) mu_1(1)
// under the hypotheses sigma_1(1) > sigma_0(1), mu_1(1) > mu_0(1) > 0 and
// mu_1(1)/mu_0(1) < sigma_1(1)/sigma_0(1). When it holds (fails) for both
// arms, the marginal-median-optimal policy treats (spares) group 1.
MmeFlipResult mme_flip_condition(const TwoGroupGaussianModel& model);

// Numeric decomposition of psi_d(Pbar) - psi_d(P) into the influence term
// and the remainder, all by exact CDF evaluations on the two models.
struct RemainderReport {
  double lhs = 0.0;        // psi_d(Pbar) - psi_d(P)
  double eif_term = 0.0;   // integral of phi_d(.; Pbar) d(Pbar - P)
  double remainder = 0.0;  // R_d(Pbar, P), first-principles form
  double residual = 0.0;   // lhs - eif_term - remainder
  // Product-form remainder with the Taylor derivative taken at the midpoint
  // of the two medians; differs from `remainder` by a higher-order amount.
  double second_order = 0.0;
  double form_gap = 0.0;  // |remainder - second_order|
};

RemainderReport von_mises_check(const DiscreteModel& p,
                                const DiscreteModel& p_bar,
                                const std::vector<int>& policy);

}  // namespace acme

#endif  // ACME_ANALYTIC_HPP
