#pragma once

#include <vector>

#include <Eigen/Dense>

#include "msmic/errors.hpp"
#include "msmic/frame.hpp"

namespace msmic {

enum class OutcomeKind { GaussianLinear, BernoulliLogit };

// Loss kernel zeta(y | x; theta). LogLikelihood is log f; DensityPower is the
// outlier-robust family (1/gamma) f^gamma - (1/(1+gamma)) Integral f^(1+gamma),
// which recovers log f up to an additive constant as gamma -> 0.
enum class LossKind { LogLikelihood, DensityPower };

struct LossSpec {
  LossKind kind = LossKind::LogLikelihood;
  double gamma = 0.5;  // density-power exponent, must be > 0
};

// Marginal outcome family f(y | x; theta) with a pluggable loss. Gaussian uses
// a fixed known variance (default 1); theta covers the mean regression only.
class OutcomeMarginalFamily {
 public:
  explicit OutcomeMarginalFamily(OutcomeKind kind, LossSpec loss = {},
                                 double variance = 1.0);

  OutcomeKind kind() const { return kind_; }
  const LossSpec& loss() const { return loss_; }
  double variance() const { return variance_; }

  double loss_value(double y, const Eigen::VectorXd& x,
                    const Eigen::VectorXd& theta) const;
  Eigen::VectorXd loss_score(double y, const Eigen::VectorXd& x,
                             const Eigen::VectorXd& theta) const;
  Eigen::MatrixXd loss_hessian(double y, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& theta) const;

  // d(score)/dy, used by the quadrature fallback for cross derivatives
  Eigen::VectorXd loss_score_dy(double y, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& theta) const;

  // plain density and log-density, independent of the chosen loss
  double density(double y, const Eigen::VectorXd& x,
                 const Eigen::VectorXd& theta) const;
  double log_density(double y, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& theta) const;

 private:
  void check_outcome(double y) const;

  OutcomeKind kind_;
  LossSpec loss_;
  double variance_;
};

// Multinomial logistic propensity with the last arm as reference. The
// parameter matrix is flattened row-block by arm: alpha = (alpha_1, ...,
// alpha_{H-1}), each block of length 1 + #used confounders (intercept always
// included). A subset of confounder columns may be used, which is how a
// misspecified fitted propensity (dropping z) is expressed.
class PropensityModel {
 public:
  PropensityModel(int arms, int dim_z);
  PropensityModel(int arms, int dim_z, std::vector<int> z_cols);

  int arms() const { return arms_; }
  int dim_z() const { return dim_z_; }
  const std::vector<int>& z_cols() const { return z_cols_; }
  int design_dim() const { return 1 + static_cast<int>(z_cols_.size()); }
  int param_dim() const { return (arms_ - 1) * design_dim(); }

  // (1, z[used columns])
  Eigen::VectorXd design(const Eigen::VectorXd& z) const;

  // assignment probabilities over arms; overflow-safe normalization
  Eigen::VectorXd probs(const Eigen::VectorXd& z,
                        const Eigen::VectorXd& alpha) const;

  // d e^(h) / d alpha, rows h = 1..H, columns flattened alpha
  Eigen::MatrixXd dprobs_dalpha(const Eigen::VectorXd& z,
                                const Eigen::VectorXd& probs) const;
  // d log e^(h) / d alpha
  Eigen::MatrixXd dlogprobs_dalpha(const Eigen::VectorXd& z,
                                   const Eigen::VectorXd& probs) const;

  // per-record negative Hessian of the assignment log-likelihood (free of t)
  Eigen::MatrixXd loglik_neg_hessian(const Eigen::VectorXd& z,
                                     const Eigen::VectorXd& probs) const;

 private:
  int arms_;
  int dim_z_;
  std::vector<int> z_cols_;
};

// Target-population weights w^(h) = sum_k d^(k) e^(k) / e^(h) and their
// alpha-derivatives. The defining identity e^(h) w^(h) = sum_k d^(k) e^(k)
// holds for every arm.
Eigen::VectorXd target_weights(const Eigen::VectorXd& probs,
                               const TargetPopulation& d);

// d w^(h) / d alpha, rows h = 1..H; requires probs from the same model/alpha
Eigen::MatrixXd dweights_dalpha(const PropensityModel& model,
                                const Eigen::VectorXd& z,
                                const Eigen::VectorXd& probs,
                                const TargetPopulation& d);

enum class ConditionalKind {
  GaussianLinear,  // y | z ~ N(beta_h' (1,z), fixed variance)
  BernoulliLogit,  // y | z ~ Bernoulli(sigmoid(beta_h' (1,z)))
  Degenerate,      // no model: conditional-expectation kernel identically zero
};

// How the conditional-expectation kernel is evaluated. Closed uses the
// analytic forms for the shipped family pairings; Quadrature is an opt-in
// Gauss-Hermite path valid for continuous (Gaussian) conditionals only.
enum class GKernelMode { Closed, Quadrature };

// Per-arm conditional law p^(h)(y | z; beta) together with the
// conditional-expectation kernel g^(h)(x, z; theta, beta) = E[zeta(y|x;theta)]
// under p^(h), and its theta- and theta/beta-derivatives. beta stacks the
// per-arm coefficient blocks; a confounder subset expresses a misspecified
// fitted outcome model.
class OutcomeConditionalFamily {
 public:
  OutcomeConditionalFamily(ConditionalKind kind, int arms, int dim_z,
                           double variance = 1.0);
  OutcomeConditionalFamily(ConditionalKind kind, int arms, int dim_z,
                           std::vector<int> z_cols, double variance = 1.0);

  static OutcomeConditionalFamily degenerate(int arms, int dim_z) {
    return OutcomeConditionalFamily(ConditionalKind::Degenerate, arms, dim_z);
  }

  ConditionalKind kind() const { return kind_; }
  int arms() const { return arms_; }
  int dim_z() const { return dim_z_; }
  const std::vector<int>& z_cols() const { return z_cols_; }
  double variance() const { return variance_; }
  int design_dim() const {
    return kind_ == ConditionalKind::Degenerate
               ? 0
               : 1 + static_cast<int>(z_cols_.size());
  }
  int param_dim() const { return arms_ * design_dim(); }

  void set_g_mode(GKernelMode mode, int quadrature_nodes = 64);
  GKernelMode g_mode() const { return g_mode_; }

  Eigen::VectorXd design(const Eigen::VectorXd& z) const;
  Eigen::VectorXd beta_block(int h, const Eigen::VectorXd& beta) const;

  // conditional mean (Gaussian) or success probability (Bernoulli)
  double mean(int h, const Eigen::VectorXd& z,
              const Eigen::VectorXd& beta) const;

  // conditional log-density and its beta-derivatives (block h only is live)
  double logp(int h, double y, const Eigen::VectorXd& z,
              const Eigen::VectorXd& beta) const;
  Eigen::VectorXd dlogp_dbeta(int h, double y, const Eigen::VectorXd& z,
                              const Eigen::VectorXd& beta) const;
  Eigen::MatrixXd d2logp_dbeta2(int h, double y, const Eigen::VectorXd& z,
                                const Eigen::VectorXd& beta) const;

  // conditional-expectation kernel of the marginal family's loss
  double g_value(const OutcomeMarginalFamily& family, int h,
                 const Eigen::VectorXd& x, const Eigen::VectorXd& z,
                 const Eigen::VectorXd& theta, const Eigen::VectorXd& beta) const;
  Eigen::VectorXd g_grad_theta(const OutcomeMarginalFamily& family, int h,
                               const Eigen::VectorXd& x, const Eigen::VectorXd& z,
                               const Eigen::VectorXd& theta,
                               const Eigen::VectorXd& beta) const;
  Eigen::MatrixXd g_hess_theta(const OutcomeMarginalFamily& family, int h,
                               const Eigen::VectorXd& x, const Eigen::VectorXd& z,
                               const Eigen::VectorXd& theta,
                               const Eigen::VectorXd& beta) const;
  // d^2 g / d theta d beta', dimensions p x r
  Eigen::MatrixXd g_cross_theta_beta(const OutcomeMarginalFamily& family, int h,
                                     const Eigen::VectorXd& x,
                                     const Eigen::VectorXd& z,
                                     const Eigen::VectorXd& theta,
                                     const Eigen::VectorXd& beta) const;

 private:
  void require_pairing(const OutcomeMarginalFamily& family) const;

  ConditionalKind kind_;
  int arms_;
  int dim_z_;
  std::vector<int> z_cols_;
  double variance_;
  GKernelMode g_mode_ = GKernelMode::Closed;
  int quadrature_nodes_ = 64;
};

// Gauss-Hermite nodes/weights for integrals against exp(-t^2), via the
// Golub-Welsch tridiagonal eigenproblem.
void gauss_hermite(int n, Eigen::VectorXd& nodes, Eigen::VectorXd& weights);

}  // namespace msmic
