#pragma once

#include <string>

#include <Eigen/Dense>

#include "msmic/estimators.hpp"
#include "msmic/families.hpp"
#include "msmic/frame.hpp"

namespace msmic {

enum class CriterionKind { QICW, IPWIC1, IPWIC2, DRIC, CBIC, ObsWeightIC };

std::string criterion_name(CriterionKind kind);

// Empirical sandwich/penalty matrices. Population expectations involving
// unobserved potential outcomes are replaced by assignment-weighted sample
// averages, which are unbiased for their targets because E[t^(h) | z] equals
// the propensity.
//   A  = (1/N) sum_i t w (-d2 zeta/dtheta2)            p x p
//   B  = (1/N) sum_i t w^2 (score)(score)'             p x p
//   I1 = (1/N) sum_i t (dlog e)(dlog e)'               q x q
//   I2 = (1/N) sum_i t (dlog p)(dlog p)'               r x r
//   Lambda1 = -(1/N) sum_i t (dw/dalpha)(score)'       q x p
//   Lambda2 =  (1/N) sum_i (t/e) w (score)(de/dalpha)' p x q
//   C1 = A^-1 [(1/N) sum_i dm/dalpha'] I1^-1           p x q
//   C2 = A^-1 [(1/N) sum_i dm/dbeta']  I2^-1           p x r
//   D1 = (1/N) sum_i [t w (sum_k dg^(k)) - t w^2 dg^(a)](score)'  p x p
//   D2 = (1/N) sum_i t w (score)' C1 (dlog e)          scalar
//   D3 = (1/N) sum_i t w (score)' C2 (dlog p)          scalar
struct PenaltyMatrices {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::MatrixXd I1;
  Eigen::MatrixXd I2;
  Eigen::MatrixXd Lambda1;
  Eigen::MatrixXd Lambda2;
  Eigen::MatrixXd C1;
  Eigen::MatrixXd C2;
  Eigen::MatrixXd D1;
  double D2 = 0.0;
  double D3 = 0.0;
};

struct CriterionDiagnostics {
  double min_propensity = 1.0;  // pre-floor minimum over records and arms
  double cond_A = 0.0;
  int floored_records = 0;
};

struct CriterionReport {
  CriterionKind kind = CriterionKind::QICW;
  double fit_term = 0.0;  // -2 x weighted loss sum (CB: residual sum of squares)
  double penalty = 0.0;
  double value = 0.0;     // fit_term + penalty, exactly
  PenaltyMatrices matrices;
  CriterionDiagnostics diagnostics;
};

// A and B at (theta, alpha); when alpha was estimated (alpha_known = false)
// additionally I1, Lambda1 and Lambda2 for the nuisance correction.
PenaltyMatrices penalty_matrices_ipw(const TreatmentFrame& frame,
                                     const OutcomeMarginalFamily& family,
                                     const PropensityModel& model,
                                     const Eigen::VectorXd& theta,
                                     const Eigen::VectorXd& alpha,
                                     const TargetPopulation& d, bool alpha_known,
                                     const WeightPolicy& policy = {});

// AIC-type criterion for the inverse-probability-weighted fit. Penalty is
// 2 tr(A^-1 B) with known propensity parameters and
// 2 tr[A^-1 (B - Lambda2 I1^-1 Lambda1)] with estimated ones (the whole
// corrected second-moment matrix sits inside A^-1; the coupling-free form
// would not reduce to the doubly robust criterion's degenerate-kernel case).
CriterionReport ipwic(const TreatmentFrame& frame,
                      const OutcomeMarginalFamily& family,
                      const PropensityModel& model, const Eigen::VectorXd& theta,
                      const Eigen::VectorXd& alpha, const TargetPopulation& d,
                      bool alpha_known, const WeightPolicy& policy = {});

// Same fit term with the flat 2p penalty (number-of-parameters correction).
CriterionReport qicw(const TreatmentFrame& frame,
                     const OutcomeMarginalFamily& family,
                     const PropensityModel& model, const Eigen::VectorXd& theta,
                     const Eigen::VectorXd& alpha, const TargetPopulation& d,
                     const WeightPolicy& policy = {});

// Criterion-weight variant targeting the observed population: the criterion
// weight becomes sum_k d^(k) e^(k) and B drops its inverse-propensity factor.
// With d = all-ones the penalty is asymptotically 2p. The variant's B
// occupies the report's B slot.
CriterionReport observed_weight_variant(const TreatmentFrame& frame,
                                        const OutcomeMarginalFamily& family,
                                        const PropensityModel& model,
                                        const Eigen::VectorXd& theta,
                                        const Eigen::VectorXd& alpha,
                                        const TargetPopulation& d,
                                        const WeightPolicy& policy = {});

// Full doubly robust matrix set: A, B, I1, I2, C1, C2, D1, D2, D3.
PenaltyMatrices penalty_matrices_dr(const TreatmentFrame& frame,
                                    const OutcomeMarginalFamily& family,
                                    const PropensityModel& model,
                                    const Eigen::VectorXd& alpha,
                                    const OutcomeConditionalFamily& conditional,
                                    const Eigen::VectorXd& beta,
                                    const Eigen::VectorXd& theta,
                                    const TargetPopulation& d,
                                    const WeightPolicy& policy = {});

// Which weight multiplies the loss sum in the doubly robust criterion's fit
// term. TargetWeight (w^(h), matching the risk and the other criteria) is the
// default; InversePropensity (t/e) is the literal display variant. The two
// coincide when d is all-ones.
enum class DricFitWeight { TargetWeight, InversePropensity };

// Doubly robust criterion: penalty 2 tr[A^-1 (B + D1)] + 2 D2 + 2 D3. D2
// vanishes asymptotically when the outcome model is correct and D3 when the
// assignment model is correct, so the correction stays valid whenever either
// model is right.
CriterionReport dric(const TreatmentFrame& frame,
                     const OutcomeMarginalFamily& family,
                     const PropensityModel& model, const Eigen::VectorXd& alpha,
                     const OutcomeConditionalFamily& conditional,
                     const Eigen::VectorXd& beta, const Eigen::VectorXd& theta,
                     const TargetPopulation& d, const WeightPolicy& policy = {},
                     DricFitWeight fit_weight = DricFitWeight::TargetWeight);

}  // namespace msmic
