#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "msmic/balance.hpp"
#include "msmic/criteria.hpp"
#include "msmic/estimators.hpp"
#include "msmic/frame.hpp"

namespace msmic {

// True outcome law of one arm given confounders z and the shared random
// regressor block xr: Gaussian N(intercept + z_coef'z + x_coef'xr, sd^2) or
// Bernoulli(sigmoid(intercept + z_coef'z)); Bernoulli arms take no x_coef.
struct ArmLaw {
  OutcomeKind kind = OutcomeKind::GaussianLinear;
  double intercept = 0.0;
  Eigen::VectorXd z_coef;  // length dim_z (empty means zero)
  Eigen::VectorXd x_coef;  // length n_random_x (empty means zero)
  double sd = 1.0;
};

// Data-generating process with controlled confounding. Confounders are iid
// standard normal; assignment is multinomial logistic at alpha0; regressors
// x^(h) concatenate a deterministic per-arm design row with shared standard
// normal columns. The strongly ignorable assignment and positivity conditions
// hold by construction (assignment depends on z only; positivity is scanned
// over a large fixed z sample at validation).
struct DGPSpec {
  int arms = 2;
  int dim_z = 1;
  Eigen::MatrixXd alpha0;      // (arms-1) x (dim_z+1) true propensity params
  std::vector<ArmLaw> outcome; // one law per arm
  Eigen::MatrixXd arm_design;  // arms x k deterministic regressor columns
  int n_random_x = 0;          // appended shared N(0,1) regressor columns

  std::vector<int> true_support;  // x columns with nonzero effect (bookkeeping)
  bool fit_propensity_drop_z = false;  // misspecify the fitted assignment model
  bool fit_outcome_drop_z = false;     // misspecify the fitted outcome model

  int dim_x() const {
    return static_cast<int>(arm_design.cols()) + n_random_x;
  }

  // shape checks plus the positivity scan (cached after the first call)
  void validate() const;

  // fitted nuisance models implied by the misspecification switches
  PropensityModel fitted_propensity() const;
  OutcomeConditionalFamily fitted_conditional(double variance = 1.0) const;

 private:
  mutable bool positivity_checked_ = false;
};

// Reproducible draw of n records; same (spec, n, seed) gives identical frames.
TreatmentFrame generate(const DGPSpec& dgp, int n, std::uint64_t seed);

// ---- population (limit) quantities, by Gauss-Hermite quadrature ----

// Marginal-structure parameter targeted by the weighted estimating equation
// for the candidate regressor columns (empty = all columns).
Eigen::VectorXd ipw_pseudo_true_theta(const DGPSpec& dgp,
                                      const std::vector<int>& x_cols,
                                      const OutcomeMarginalFamily& family,
                                      const TargetPopulation& d);

// Limit of the fitted (possibly z-dropping) propensity MLE; equals alpha0
// exactly when the fitted model contains the truth.
Eigen::VectorXd propensity_limit(const DGPSpec& dgp);

// Limit of the fitted outcome-conditional MLE.
Eigen::VectorXd conditional_limit(const DGPSpec& dgp,
                                  const OutcomeConditionalFamily& conditional);

// Limit of the covariate-balancing parameters and the true contrast effect.
Eigen::VectorXd cb_alpha_limit(const DGPSpec& dgp, const ContrastSpec& contrast);
Eigen::VectorXd cb_true_contrast(const DGPSpec& dgp, const ContrastSpec& contrast);

// ---- Monte Carlo experiments ----

enum class FitRecipe { IPWKnown, IPWUnknown, DR, CB };

// What to fit per replication. The marginal family kind follows the DGP's
// outcome kind; nuisance models follow the DGP misspecification switches.
struct RecipeSpec {
  FitRecipe recipe = FitRecipe::IPWUnknown;
  LossSpec loss;
  double marginal_variance = 1.0;
  double conditional_variance = 1.0;
  std::vector<int> x_cols;  // candidate structure; empty = all columns
  std::optional<ContrastSpec> contrast;  // CB only
  WeightPolicy policy;
};

// One recipe fit on one frame.
struct RecipeFit {
  Eigen::VectorXd theta;
  Eigen::VectorXd alpha;  // fitted, known, or balancing parameters
  Eigen::VectorXd beta;   // DR only
};

RecipeFit fit_recipe(const TreatmentFrame& frame, const DGPSpec& dgp,
                     const RecipeSpec& recipe, const TargetPopulation& d);

// criterion matching the recipe, evaluated at the fit
CriterionReport recipe_criterion(const TreatmentFrame& frame, const DGPSpec& dgp,
                                 const RecipeSpec& recipe,
                                 const TargetPopulation& d,
                                 const RecipeFit& fit);

struct MCEstimate {
  double mean = 0.0;
  double se = 0.0;
  int n = 0;
  int reps = 0;
  int failures = 0;
};

// Risk by brute force: fit on a fresh frame, evaluate the criterion-scale fit
// term on an independent copy frame drawn from the same process.
MCEstimate mc_risk(const DGPSpec& dgp, const RecipeSpec& recipe,
                   const TargetPopulation& d, int n, int reps,
                   std::uint64_t seed);

// Optimism (in-sample vs fresh-copy gap) against the analytic penalty.
struct BiasMatchReport {
  double penalty_mean = 0.0;  // analytic penalty averaged over replications
  double mc_bias = 0.0;       // Monte Carlo optimism estimate (penalty scale)
  double mc_se = 0.0;         // standard error of mc_bias
  double z = 0.0;             // (penalty_mean - mc_bias) / paired SE
  int n = 0;
  int reps = 0;
  int failures = 0;
  std::vector<double> optimism;  // per successful replication
  std::vector<double> penalty;
  std::vector<double> d2, d3;    // DR recipe only
  Eigen::MatrixXd thetas;        // successful replications x p
};

BiasMatchReport mc_bias(const DGPSpec& dgp, const RecipeSpec& recipe,
                        const TargetPopulation& d, int n, int reps,
                        std::uint64_t seed);

// Estimator sampling study: per-replication parameter estimates.
struct EstimatorStudy {
  Eigen::MatrixXd thetas;  // successful replications x p
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
  int failures = 0;
};

EstimatorStudy mc_estimator(const DGPSpec& dgp, const RecipeSpec& recipe,
                            const TargetPopulation& d, int n, int reps,
                            std::uint64_t seed);

// Model selection frequencies: how often each candidate regressor subset
// minimizes the criterion.
struct SelectionResult {
  std::vector<std::vector<int>> candidates;
  std::vector<int> wins;
  int reps = 0;
  int failures = 0;
};

SelectionResult selection_experiment(const DGPSpec& dgp,
                                     const std::vector<std::vector<int>>& candidates,
                                     CriterionKind criterion,
                                     const RecipeSpec& base,
                                     const TargetPopulation& d, int n, int reps,
                                     std::uint64_t seed);

}  // namespace msmic
