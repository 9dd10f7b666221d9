#include <doctest.h>

#include <cmath>

#include "msmic/simulate.hpp"
#include "testdgp.hpp"
#include "testutil.hpp"

using namespace msmic;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("generate: identical seeds give bit-identical frames") {
  const DGPSpec dgp = testutil::two_arm_confounded();
  const TreatmentFrame a = generate(dgp, 500, 42);
  const TreatmentFrame b = generate(dgp, 500, 42);
  CHECK(a.outcomes() == b.outcomes());
  CHECK(a.assignments() == b.assignments());
  CHECK(a.z_matrix() == b.z_matrix());
  CHECK(a.x_matrix(0) == b.x_matrix(0));
  CHECK(a.x_matrix(1) == b.x_matrix(1));
  const TreatmentFrame c = generate(dgp, 500, 43);
  CHECK(a.outcomes() != c.outcomes());
}

TEST_CASE("generate: arm share matches an intercept-only propensity") {
  DGPSpec dgp = testutil::two_arm_confounded();
  dgp.alpha0 << std::log(0.3 / 0.7), 0.0;  // e^(1) = 0.3 flat
  const int n = 1000000;
  const TreatmentFrame frame = generate(dgp, n, 4242);
  const double share =
      static_cast<double>(frame.arm_counts()[0]) / static_cast<double>(n);
  const double sigma = std::sqrt(0.3 * 0.7 / n);
  CHECK(std::abs(share - 0.3) <= 3.0 * sigma);
}

TEST_CASE("generate: assignment tracks the propensity within z deciles") {
  const DGPSpec dgp = testutil::two_arm_confounded();
  const int n = 1000000;
  const TreatmentFrame frame = generate(dgp, n, 515);
  std::vector<double> zs(n);
  for (int i = 0; i < n; ++i) zs[i] = frame.z(i)[0];
  std::vector<double> sorted = zs;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> cuts(11);
  for (int b = 0; b <= 10; ++b)
    cuts[b] = sorted[std::min<long>(n - 1, static_cast<long>(b * (n / 10.0)))];

  std::vector<double> taken(10, 0), expect(10, 0);
  std::vector<int> count(10, 0);
  for (int i = 0; i < n; ++i) {
    int b = 0;
    while (b < 9 && zs[i] > cuts[b + 1]) ++b;
    taken[b] += frame.t(i, 0);
    expect[b] += sigmoid(0.3 + 0.8 * zs[i]);
    ++count[b];
  }
  for (int b = 0; b < 10; ++b) {
    const double p = expect[b] / count[b];
    const double se = std::sqrt(p * (1.0 - p) / count[b]);
    CHECK(std::abs(taken[b] / count[b] - p) <= 3.0 * se);
  }
}

TEST_CASE("dgp validation: positivity scan rejects extreme assignment") {
  DGPSpec dgp = testutil::two_arm_confounded();
  dgp.alpha0 << 0.0, 4.0;  // e^(1) collapses in the z tails
  CHECK_THROWS_AS(dgp.validate(), ConfigError);
}

TEST_CASE("population structure solver agrees with independent quadrature") {
  const DGPSpec dgp = testutil::two_arm_confounded(1.0, 2.0);
  const OutcomeMarginalFamily family(OutcomeKind::GaussianLinear);
  SUBCASE("all-ones target reproduces the intercepts") {
    const Eigen::VectorXd theta =
        ipw_pseudo_true_theta(dgp, {}, family, TargetPopulation::uniform(2));
    CHECK(theta[0] == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(theta[1] == doctest::Approx(2.0).epsilon(1e-8));
  }
  SUBCASE("treated-population target matches Simpson integration") {
    const TargetPopulation att(Eigen::Vector2d(1.0, 0.0));
    const Eigen::VectorXd theta = ipw_pseudo_true_theta(dgp, {}, family, att);
    for (int h = 0; h < 2; ++h) {
      const double num = testutil::normal_expect([&](double z) {
        return sigmoid(0.3 + 0.8 * z) *
               (dgp.outcome[h].intercept + 0.8 * z);
      });
      const double den = testutil::normal_expect(
          [&](double z) { return sigmoid(0.3 + 0.8 * z); });
      CHECK(theta[h] == doctest::Approx(num / den).epsilon(1e-6));
    }
  }
}

TEST_CASE("population nuisance limits agree with independent quadrature") {
  DGPSpec dgp = testutil::two_arm_confounded(1.0, 2.0);
  SUBCASE("propensity limit with z dropped") {
    dgp.fit_propensity_drop_z = true;
    const Eigen::VectorXd alpha_star = propensity_limit(dgp);
    const double expect = testutil::normal_expect(
        [&](double z) { return sigmoid(0.3 + 0.8 * z); });
    CHECK(sigmoid(alpha_star[0]) == doctest::Approx(expect).epsilon(1e-8));
  }
  SUBCASE("conditional limit with z dropped") {
    dgp.fit_outcome_drop_z = true;
    const OutcomeConditionalFamily cond = dgp.fitted_conditional();
    const Eigen::VectorXd beta_star = conditional_limit(dgp, cond);
    for (int h = 0; h < 2; ++h) {
      const double num = testutil::normal_expect([&](double z) {
        const double e1 = sigmoid(0.3 + 0.8 * z);
        const double eh = h == 0 ? e1 : 1.0 - e1;
        return eh * (dgp.outcome[h].intercept + 0.8 * z);
      });
      const double den = testutil::normal_expect([&](double z) {
        const double e1 = sigmoid(0.3 + 0.8 * z);
        return h == 0 ? e1 : 1.0 - e1;
      });
      CHECK(beta_star[h] == doctest::Approx(num / den).epsilon(1e-8));
    }
  }
  SUBCASE("correctly specified propensity limit is the truth") {
    const Eigen::VectorXd alpha_star = propensity_limit(dgp);
    CHECK(alpha_star[0] == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(alpha_star[1] == doctest::Approx(0.8).epsilon(1e-12));
  }
}

TEST_CASE("cb population limits") {
  const DGPSpec dgp = testutil::cb_linear();
  const ContrastSpec contrast(Eigen::Vector2d(1.0, -1.0));
  // the balancing moment vanishes at the true assignment parameters
  const Eigen::VectorXd alpha_star = cb_alpha_limit(dgp, contrast);
  CHECK(alpha_star[0] == doctest::Approx(0.4).epsilon(1e-8));
  CHECK(alpha_star[1] == doctest::Approx(0.8).epsilon(1e-8));
  const Eigen::VectorXd theta = cb_true_contrast(dgp, contrast);
  CHECK(theta[0] == doctest::Approx(0.7).epsilon(1e-14));
  CHECK(theta[1] == doctest::Approx(0.7).epsilon(1e-14));
}

TEST_CASE("mc risk: one-arm gaussian risk matches the entropy oracle") {
  const DGPSpec dgp = testutil::one_arm_gaussian();
  RecipeSpec recipe;
  recipe.recipe = FitRecipe::IPWKnown;
  const TargetPopulation d = TargetPopulation::uniform(1);
  const int n = 1000;
  const MCEstimate risk = mc_risk(dgp, recipe, d, n, 300, 661);
  // -2 E[log f] at the truth: 1 + log(2 pi) per record
  const double entropy = n * (1.0 + std::log(2.0 * M_PI));
  CHECK(std::abs(risk.mean - entropy) <= 3.0 * risk.se + 2.0 * 2.0);
}

TEST_CASE("mc risk: the true structure does not lose to its neighbors") {
  DGPSpec dgp = testutil::one_arm_gaussian();
  dgp.n_random_x = 2;  // second random column carries no effect
  dgp.outcome[0].x_coef = Eigen::Vector2d(0.5, 0.0);
  dgp.true_support = {0, 1};
  const TargetPopulation d = TargetPopulation::uniform(1);
  RecipeSpec truth;
  truth.recipe = FitRecipe::IPWKnown;
  truth.x_cols = {0, 1};
  RecipeSpec over = truth;
  over.x_cols = {0, 1, 2};  // spurious extra regressor
  RecipeSpec under = truth;
  under.x_cols = {0};  // drops the live slope: misspecified
  const MCEstimate risk_true = mc_risk(dgp, truth, d, 1000, 200, 677);
  const MCEstimate risk_over = mc_risk(dgp, over, d, 1000, 200, 677);
  const MCEstimate risk_under = mc_risk(dgp, under, d, 1000, 200, 677);
  CHECK(risk_over.mean >= risk_true.mean - 3.0 * (risk_true.se + risk_over.se));
  CHECK(risk_under.mean >= risk_true.mean - 3.0 * (risk_true.se + risk_under.se));
}

TEST_CASE("mc risk: standard errors follow the replication-count scaling") {
  const DGPSpec dgp = testutil::one_arm_gaussian();
  RecipeSpec recipe;
  recipe.recipe = FitRecipe::IPWKnown;
  const TargetPopulation d = TargetPopulation::uniform(1);
  const MCEstimate base = mc_risk(dgp, recipe, d, 400, 200, 691);
  const MCEstimate wide = mc_risk(dgp, recipe, d, 400, 800, 691);
  // quadrupling replications halves the standard error
  CHECK(wide.se / base.se == doctest::Approx(0.5).epsilon(0.20));
}

TEST_CASE("mc bias: one-arm gaussian optimism approaches 2p") {
  const DGPSpec dgp = testutil::one_arm_gaussian();
  RecipeSpec recipe;
  recipe.recipe = FitRecipe::IPWKnown;
  const TargetPopulation d = TargetPopulation::uniform(1);
  const BiasMatchReport report = mc_bias(dgp, recipe, d, 1000, 400, 701);
  CHECK(std::abs(report.mc_bias - 4.0) <= 3.0 * report.mc_se + 0.1);
  CHECK(report.penalty_mean == doctest::Approx(4.0).epsilon(0.10));
}

TEST_CASE("selection: a single candidate always wins") {
  const DGPSpec dgp = testutil::two_arm_confounded();
  RecipeSpec base;
  const TargetPopulation d = TargetPopulation::uniform(2);
  const SelectionResult result = selection_experiment(
      dgp, {{0, 1}}, CriterionKind::IPWIC2, base, d, 500, 20, 881);
  CHECK(result.wins[0] == result.reps - result.failures);
  CHECK(result.failures == 0);
}

TEST_CASE("selection: the true structure is preferred at scale") {
  // flat treatment effect: arm-2 indicator is spurious
  DGPSpec dgp = testutil::two_arm_confounded(1.0, 1.0);
  dgp.arm_design.resize(2, 2);
  dgp.arm_design << 1.0, 0.0, 1.0, 1.0;  // shared intercept + arm-2 indicator
  dgp.true_support = {0};
  RecipeSpec base;
  const TargetPopulation d = TargetPopulation::uniform(2);
  const SelectionResult result = selection_experiment(
      dgp, {{0}, {0, 1}}, CriterionKind::IPWIC2, base, d, 2000, 120, 883);
  CHECK(result.wins[0] > result.wins[1]);
}

TEST_CASE("experiment failure accounting rejects broken recipes") {
  // tiny samples routinely miss an arm, so most replications fail
  const DGPSpec dgp = testutil::two_arm_confounded();
  RecipeSpec recipe;
  recipe.recipe = FitRecipe::IPWUnknown;
  const TargetPopulation d = TargetPopulation::uniform(2);
  CHECK_THROWS_AS(mc_estimator(dgp, recipe, d, 2, 40, 887), ExperimentError);
}
