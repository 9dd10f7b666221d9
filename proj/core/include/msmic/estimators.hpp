#pragma once

#include <Eigen/Dense>

#include "msmic/families.hpp"
#include "msmic/frame.hpp"
#include "msmic/newton.hpp"

namespace msmic {

// Extreme-propensity handling. A floor of 0 disables flooring entirely; a
// positive floor clips per-arm propensities from below wherever an inverse
// propensity enters, and the number of affected records is surfaced (the
// weight table warns on stderr) rather than silently absorbed.
struct WeightPolicy {
  double propensity_floor = 0.0;
};

// Per-record propensities and target-population weights for a whole frame.
struct WeightTable {
  Eigen::MatrixXd probs;    // N x H, floored when the policy says so
  Eigen::MatrixXd weights;  // N x H target weights built from floored probs
  double min_propensity = 1.0;  // pre-floor minimum over records and arms
  int floored_records = 0;      // records with at least one floored arm
};

WeightTable compute_weights(const TreatmentFrame& frame,
                            const PropensityModel& model,
                            const Eigen::VectorXd& alpha,
                            const TargetPopulation& d,
                            const WeightPolicy& policy = {});

// Assignment-model maximum likelihood for the multinomial logistic
// propensity. Requires every arm observed at least once. Separation shows up
// as parameter divergence and is reported naming the runaway arm.
FitResult fit_propensity(const TreatmentFrame& frame,
                         const PropensityModel& model,
                         const NewtonOptions& options = {});

// Per-arm conditional outcome maximum likelihood; beta stacks arm blocks.
FitResult fit_outcome_conditional(const TreatmentFrame& frame,
                                  const OutcomeConditionalFamily& conditional,
                                  const NewtonOptions& options = {});

// Unweighted M-estimator of the marginal family over observed arms (the
// plain MLE under the log-likelihood loss). Used as the Newton start and as
// the one-arm reduction reference.
FitResult solve_unweighted(const TreatmentFrame& frame,
                           const OutcomeMarginalFamily& family,
                           const NewtonOptions& options = {});

// Inverse-probability-weighted estimator: solves the weighted score equation
// (1/N) sum_i t_i^(h) w^(h)(z_i; alpha) d zeta / d theta = 0.
FitResult solve_ipw(const TreatmentFrame& frame,
                    const OutcomeMarginalFamily& family,
                    const PropensityModel& model, const Eigen::VectorXd& alpha,
                    const TargetPopulation& d, const WeightPolicy& policy = {},
                    const NewtonOptions& options = {});

// Doubly robust estimator: augments the weighted score with the
// conditional-expectation kernel so that either a correct assignment model or
// a correct outcome model yields consistency. alpha and beta come from their
// own fits (the stacked system is block-triangular, so solving sequentially
// is exact).
FitResult solve_dr(const TreatmentFrame& frame,
                   const OutcomeMarginalFamily& family,
                   const PropensityModel& model, const Eigen::VectorXd& alpha,
                   const OutcomeConditionalFamily& conditional,
                   const Eigen::VectorXd& beta, const TargetPopulation& d,
                   const WeightPolicy& policy = {},
                   const NewtonOptions& options = {});

// The doubly robust moment for record i:
//   m = sum_h [ t^(h) w^(h) dzeta/dtheta
//             + (sum_k d^(k) t^(k) - t^(h) w^(h)) dg^(h)/dtheta ]
// and its analytic parameter Jacobians.
Eigen::VectorXd dr_moment_value(const TreatmentFrame& frame, int i,
                                const OutcomeMarginalFamily& family,
                                const PropensityModel& model,
                                const Eigen::VectorXd& alpha,
                                const OutcomeConditionalFamily& conditional,
                                const Eigen::VectorXd& beta,
                                const Eigen::VectorXd& theta,
                                const TargetPopulation& d,
                                const WeightPolicy& policy = {});

Eigen::MatrixXd dr_moment_dalpha(const TreatmentFrame& frame, int i,
                                 const OutcomeMarginalFamily& family,
                                 const PropensityModel& model,
                                 const Eigen::VectorXd& alpha,
                                 const OutcomeConditionalFamily& conditional,
                                 const Eigen::VectorXd& beta,
                                 const Eigen::VectorXd& theta,
                                 const TargetPopulation& d,
                                 const WeightPolicy& policy = {});

Eigen::MatrixXd dr_moment_dbeta(const TreatmentFrame& frame, int i,
                                const OutcomeMarginalFamily& family,
                                const PropensityModel& model,
                                const Eigen::VectorXd& alpha,
                                const OutcomeConditionalFamily& conditional,
                                const Eigen::VectorXd& beta,
                                const Eigen::VectorXd& theta,
                                const TargetPopulation& d,
                                const WeightPolicy& policy = {});

}  // namespace msmic
