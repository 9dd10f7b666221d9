#pragma once

#include <Eigen/Dense>

#include "msmic/criteria.hpp"
#include "msmic/estimators.hpp"
#include "msmic/frame.hpp"

namespace msmic {

// Covariate-balancing estimation of a direct contrast effect for the linear
// model y^(h) = x' theta^(h) + tau(z) + eps with shared regressors x and a
// contrast c over arms. Shipped for two arms with a logistic propensity: the
// balancing display solves exactly dim_z + 1 moments, which just-identifies
// that configuration.
struct CBFit {
  Eigen::VectorXd alpha;      // balancing propensity parameters (1 + dim_z)
  Eigen::RowVectorXd lambda;  // residual/score cross moment, 1 x (1 + dim_z)
  Eigen::MatrixXd I;          // balancing information, (1+dim_z) x (1+dim_z)
  Eigen::VectorXd theta;      // contrast-effect coefficients (dim_x)
};

// Balancing parameters: solve
//   (1/N) sum_i sum_h t_i^(h) / e^(h)(z_i; alpha) c^(h) (1, z_i)' = 0
// so that inverse-probability-weighted confounder moments match across arms.
Eigen::VectorXd solve_cb_alpha(const TreatmentFrame& frame,
                               const ContrastSpec& contrast,
                               const NewtonOptions& options = {});

// residual of the balancing moment at alpha (for independent re-checks)
Eigen::VectorXd cb_balance_moment(const TreatmentFrame& frame,
                                  const ContrastSpec& contrast,
                                  const Eigen::VectorXd& alpha);

// Direct contrast estimator
//   (sum_i x_i x_i')^-1 sum_i x_i sum_h t_i^(h)/e^(h)(z_i; alpha) c^(h) y_i.
// Exactly linear in the outcomes.
Eigen::VectorXd cb_estimate(const TreatmentFrame& frame,
                            const Eigen::VectorXd& alpha_cb,
                            const ContrastSpec& contrast);

// Squared-error information criterion for the balanced direct estimator.
// fit = sum_i (contrast-weighted HT combination - x_i' theta)^2; the penalty
// corrects the in-sample optimism with the lambda/I adjustment accounting for
// the estimated balancing parameters. Residuals stand in for tau + eps. The
// report reuses matrix slots: A holds the regressor gram, I1 the balancing
// information, Lambda1 the lambda row.
CriterionReport cb_criterion(const TreatmentFrame& frame,
                             const Eigen::VectorXd& theta,
                             const Eigen::VectorXd& alpha_cb,
                             const ContrastSpec& contrast);

// convenience: balance, estimate, then collect lambda/I at the solution
CBFit fit_cb(const TreatmentFrame& frame, const ContrastSpec& contrast,
             const NewtonOptions& options = {});

}  // namespace msmic
