#include "msmic/families.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace msmic {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double sigmoid(double eta) {
  if (eta >= 0.0) {
    return 1.0 / (1.0 + std::exp(-eta));
  }
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

// log(1 + exp(eta)) without overflow
double softplus(double eta) {
  if (eta > 0.0) return eta + std::log1p(std::exp(-eta));
  return std::log1p(std::exp(eta));
}

}  // namespace

OutcomeMarginalFamily::OutcomeMarginalFamily(OutcomeKind kind, LossSpec loss,
                                             double variance)
    : kind_(kind), loss_(loss), variance_(variance) {
  if (variance_ <= 0.0) throw ConfigError("outcome family: variance must be positive");
  if (loss_.kind == LossKind::DensityPower && !(loss_.gamma > 0.0))
    throw ConfigError("outcome family: density-power exponent must be positive");
}

void OutcomeMarginalFamily::check_outcome(double y) const {
  if (kind_ == OutcomeKind::BernoulliLogit && y != 0.0 && y != 1.0)
    throw DataError("bernoulli outcome must be 0 or 1, got " + std::to_string(y));
}

double OutcomeMarginalFamily::log_density(double y, const Eigen::VectorXd& x,
                                          const Eigen::VectorXd& theta) const {
  check_outcome(y);
  const double eta = x.dot(theta);
  if (kind_ == OutcomeKind::GaussianLinear) {
    const double r = y - eta;
    return -0.5 * (r * r / variance_ + kLog2Pi + std::log(variance_));
  }
  return y * eta - softplus(eta);
}

double OutcomeMarginalFamily::density(double y, const Eigen::VectorXd& x,
                                      const Eigen::VectorXd& theta) const {
  return std::exp(log_density(y, x, theta));
}

double OutcomeMarginalFamily::loss_value(double y, const Eigen::VectorXd& x,
                                         const Eigen::VectorXd& theta) const {
  if (loss_.kind == LossKind::LogLikelihood) return log_density(y, x, theta);

  check_outcome(y);
  const double g = loss_.gamma;
  const double eta = x.dot(theta);
  if (kind_ == OutcomeKind::GaussianLinear) {
    const double r = y - eta;
    // kappa = (2 pi v)^(-g/2); integral f^(1+g) = kappa / sqrt(1+g)
    const double kappa = std::exp(-0.5 * g * (kLog2Pi + std::log(variance_)));
    const double fg = kappa * std::exp(-0.5 * g * r * r / variance_);
    return fg / g - kappa / ((1.0 + g) * std::sqrt(1.0 + g));
  }
  const double mu = sigmoid(eta);
  const double fy = y == 1.0 ? mu : 1.0 - mu;
  const double mass = std::pow(mu, 1.0 + g) + std::pow(1.0 - mu, 1.0 + g);
  return std::pow(fy, g) / g - mass / (1.0 + g);
}

Eigen::VectorXd OutcomeMarginalFamily::loss_score(
    double y, const Eigen::VectorXd& x, const Eigen::VectorXd& theta) const {
  check_outcome(y);
  const double eta = x.dot(theta);
  if (loss_.kind == LossKind::LogLikelihood) {
    if (kind_ == OutcomeKind::GaussianLinear) return x * ((y - eta) / variance_);
    return x * (y - sigmoid(eta));
  }
  const double g = loss_.gamma;
  if (kind_ == OutcomeKind::GaussianLinear) {
    const double r = y - eta;
    const double kappa = std::exp(-0.5 * g * (kLog2Pi + std::log(variance_)));
    const double fg = kappa * std::exp(-0.5 * g * r * r / variance_);
    // the integral term is odd around the mean and vanishes
    return x * (fg * r / variance_);
  }
  const double mu = sigmoid(eta);
  const double fy = y == 1.0 ? mu : 1.0 - mu;
  // f^g dlogf/deta - sum_u f(u)^(1+g) dlogf(u)/deta, with dlogf/deta = u - mu
  const double tilt = mu * (1.0 - mu) *
                      (std::pow(mu, g) - std::pow(1.0 - mu, g));
  return x * (std::pow(fy, g) * (y - mu) - tilt);
}

Eigen::MatrixXd OutcomeMarginalFamily::loss_hessian(
    double y, const Eigen::VectorXd& x, const Eigen::VectorXd& theta) const {
  check_outcome(y);
  const double eta = x.dot(theta);
  const Eigen::MatrixXd xxt = x * x.transpose();
  if (loss_.kind == LossKind::LogLikelihood) {
    if (kind_ == OutcomeKind::GaussianLinear) return -xxt / variance_;
    const double mu = sigmoid(eta);
    return -mu * (1.0 - mu) * xxt;
  }
  const double g = loss_.gamma;
  if (kind_ == OutcomeKind::GaussianLinear) {
    const double r = y - eta;
    const double kappa = std::exp(-0.5 * g * (kLog2Pi + std::log(variance_)));
    const double fg = kappa * std::exp(-0.5 * g * r * r / variance_);
    return xxt * (fg * (g * r * r / variance_ - 1.0) / variance_);
  }
  const double mu = sigmoid(eta);
  const double fy = y == 1.0 ? mu : 1.0 - mu;
  const double dmu = mu * (1.0 - mu);
  // d/deta [f^g (y-mu)] = f^g {g (y-mu)^2 - dmu}
  const double first = std::pow(fy, g) * (g * (y - mu) * (y - mu) - dmu);
  // tilt(mu) = mu^(1+g)(1-mu) - mu(1-mu)^(1+g); chain through dmu
  const double dtilt_dmu = (1.0 + g) * std::pow(mu, g) * (1.0 - mu) -
                           std::pow(mu, 1.0 + g) - std::pow(1.0 - mu, 1.0 + g) +
                           mu * (1.0 + g) * std::pow(1.0 - mu, g);
  return xxt * (first - dtilt_dmu * dmu);
}

Eigen::VectorXd OutcomeMarginalFamily::loss_score_dy(
    double y, const Eigen::VectorXd& x, const Eigen::VectorXd& theta) const {
  if (kind_ != OutcomeKind::GaussianLinear)
    throw ConfigError("loss_score_dy: continuous outcome families only");
  const double eta = x.dot(theta);
  if (loss_.kind == LossKind::LogLikelihood) return x / variance_;
  const double g = loss_.gamma;
  const double r = y - eta;
  const double kappa = std::exp(-0.5 * g * (kLog2Pi + std::log(variance_)));
  const double fg = kappa * std::exp(-0.5 * g * r * r / variance_);
  return x * (fg * (1.0 - g * r * r / variance_) / variance_);
}

PropensityModel::PropensityModel(int arms, int dim_z)
    : arms_(arms), dim_z_(dim_z) {
  if (arms_ < 1) throw ConfigError("propensity: need at least one arm");
  z_cols_.resize(dim_z);
  for (int j = 0; j < dim_z; ++j) z_cols_[j] = j;
}

PropensityModel::PropensityModel(int arms, int dim_z, std::vector<int> z_cols)
    : arms_(arms), dim_z_(dim_z), z_cols_(std::move(z_cols)) {
  if (arms_ < 1) throw ConfigError("propensity: need at least one arm");
  for (int c : z_cols_) {
    if (c < 0 || c >= dim_z_)
      throw ConfigError("propensity: confounder column " + std::to_string(c) +
                        " out of range");
  }
}

Eigen::VectorXd PropensityModel::design(const Eigen::VectorXd& z) const {
  if (z.size() != dim_z_) throw ConfigError("propensity: confounder dimension mismatch");
  Eigen::VectorXd v(design_dim());
  v[0] = 1.0;
  for (std::size_t j = 0; j < z_cols_.size(); ++j) v[1 + j] = z[z_cols_[j]];
  return v;
}

Eigen::VectorXd PropensityModel::probs(const Eigen::VectorXd& z,
                                       const Eigen::VectorXd& alpha) const {
  if (alpha.size() != param_dim())
    throw ConfigError("propensity: parameter dimension mismatch");
  const int m = design_dim();
  Eigen::VectorXd logits = Eigen::VectorXd::Zero(arms_);
  if (arms_ > 1) {
    const Eigen::VectorXd v = design(z);
    for (int h = 0; h < arms_ - 1; ++h)
      logits[h] = alpha.segment(h * m, m).dot(v);
  }
  const double top = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - top).exp();
  e /= e.sum();
  return e;
}

Eigen::MatrixXd PropensityModel::dprobs_dalpha(const Eigen::VectorXd& z,
                                               const Eigen::VectorXd& probs) const {
  const int m = design_dim();
  const Eigen::VectorXd v = design(z);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(arms_, param_dim());
  for (int h = 0; h < arms_; ++h) {
    for (int j = 0; j < arms_ - 1; ++j) {
      const double coef = probs[h] * ((h == j ? 1.0 : 0.0) - probs[j]);
      out.row(h).segment(j * m, m) = coef * v.transpose();
    }
  }
  return out;
}

Eigen::MatrixXd PropensityModel::dlogprobs_dalpha(
    const Eigen::VectorXd& z, const Eigen::VectorXd& probs) const {
  const int m = design_dim();
  const Eigen::VectorXd v = design(z);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(arms_, param_dim());
  for (int h = 0; h < arms_; ++h) {
    for (int j = 0; j < arms_ - 1; ++j) {
      const double coef = (h == j ? 1.0 : 0.0) - probs[j];
      out.row(h).segment(j * m, m) = coef * v.transpose();
    }
  }
  return out;
}

Eigen::MatrixXd PropensityModel::loglik_neg_hessian(
    const Eigen::VectorXd& z, const Eigen::VectorXd& probs) const {
  const int m = design_dim();
  const Eigen::VectorXd v = design(z);
  const Eigen::MatrixXd vvt = v * v.transpose();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(param_dim(), param_dim());
  for (int j = 0; j < arms_ - 1; ++j) {
    for (int k = 0; k < arms_ - 1; ++k) {
      const double coef = probs[j] * ((j == k ? 1.0 : 0.0) - probs[k]);
      out.block(j * m, k * m, m, m) = coef * vvt;
    }
  }
  return out;
}

Eigen::VectorXd target_weights(const Eigen::VectorXd& probs,
                               const TargetPopulation& d) {
  if (probs.size() != d.arms())
    throw ConfigError("target weights: arm count mismatch");
  const double s = d.d().dot(probs);
  return s * probs.cwiseInverse();
}

Eigen::MatrixXd dweights_dalpha(const PropensityModel& model,
                                const Eigen::VectorXd& z,
                                const Eigen::VectorXd& probs,
                                const TargetPopulation& d) {
  const int m = model.design_dim();
  const int arms = model.arms();
  const Eigen::VectorXd v = model.design(z);
  const double s = d.d().dot(probs);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(arms, model.param_dim());
  // d w^(h) / d alpha_j = (d^(j) e^(j) - s 1[h=j]) / e^(h) * (1,z)
  for (int h = 0; h < arms; ++h) {
    for (int j = 0; j < arms - 1; ++j) {
      const double coef =
          (d.d()[j] * probs[j] - (h == j ? s : 0.0)) / probs[h];
      out.row(h).segment(j * m, m) = coef * v.transpose();
    }
  }
  return out;
}

OutcomeConditionalFamily::OutcomeConditionalFamily(ConditionalKind kind,
                                                   int arms, int dim_z,
                                                   double variance)
    : kind_(kind), arms_(arms), dim_z_(dim_z), variance_(variance) {
  if (arms_ < 1) throw ConfigError("conditional family: need at least one arm");
  if (variance_ <= 0.0)
    throw ConfigError("conditional family: variance must be positive");
  if (kind_ != ConditionalKind::Degenerate) {
    z_cols_.resize(dim_z);
    for (int j = 0; j < dim_z; ++j) z_cols_[j] = j;
  }
}

OutcomeConditionalFamily::OutcomeConditionalFamily(ConditionalKind kind,
                                                   int arms, int dim_z,
                                                   std::vector<int> z_cols,
                                                   double variance)
    : kind_(kind),
      arms_(arms),
      dim_z_(dim_z),
      z_cols_(std::move(z_cols)),
      variance_(variance) {
  if (arms_ < 1) throw ConfigError("conditional family: need at least one arm");
  if (variance_ <= 0.0)
    throw ConfigError("conditional family: variance must be positive");
  if (kind_ == ConditionalKind::Degenerate) z_cols_.clear();
  for (int c : z_cols_) {
    if (c < 0 || c >= dim_z_)
      throw ConfigError("conditional family: confounder column " +
                        std::to_string(c) + " out of range");
  }
}

void OutcomeConditionalFamily::set_g_mode(GKernelMode mode, int quadrature_nodes) {
  if (mode == GKernelMode::Quadrature && kind_ != ConditionalKind::GaussianLinear)
    throw ConfigError("quadrature kernel mode needs a continuous conditional law");
  if (quadrature_nodes < 2) throw ConfigError("quadrature: need at least 2 nodes");
  g_mode_ = mode;
  quadrature_nodes_ = quadrature_nodes;
}

Eigen::VectorXd OutcomeConditionalFamily::design(const Eigen::VectorXd& z) const {
  if (z.size() != dim_z_)
    throw ConfigError("conditional family: confounder dimension mismatch");
  Eigen::VectorXd v(design_dim());
  if (design_dim() == 0) return v;
  v[0] = 1.0;
  for (std::size_t j = 0; j < z_cols_.size(); ++j) v[1 + j] = z[z_cols_[j]];
  return v;
}

Eigen::VectorXd OutcomeConditionalFamily::beta_block(
    int h, const Eigen::VectorXd& beta) const {
  if (beta.size() != param_dim())
    throw ConfigError("conditional family: parameter dimension mismatch");
  const int m = design_dim();
  return beta.segment(h * m, m);
}

double OutcomeConditionalFamily::mean(int h, const Eigen::VectorXd& z,
                                      const Eigen::VectorXd& beta) const {
  if (kind_ == ConditionalKind::Degenerate)
    throw ConfigError("degenerate conditional family has no mean");
  const double lin = beta_block(h, beta).dot(design(z));
  return kind_ == ConditionalKind::GaussianLinear ? lin : sigmoid(lin);
}

double OutcomeConditionalFamily::logp(int h, double y, const Eigen::VectorXd& z,
                                      const Eigen::VectorXd& beta) const {
  if (kind_ == ConditionalKind::Degenerate) return 0.0;
  const double lin = beta_block(h, beta).dot(design(z));
  if (kind_ == ConditionalKind::GaussianLinear) {
    const double r = y - lin;
    return -0.5 * (r * r / variance_ + kLog2Pi + std::log(variance_));
  }
  if (y != 0.0 && y != 1.0)
    throw DataError("bernoulli conditional outcome must be 0 or 1");
  return y * lin - softplus(lin);
}

Eigen::VectorXd OutcomeConditionalFamily::dlogp_dbeta(
    int h, double y, const Eigen::VectorXd& z, const Eigen::VectorXd& beta) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(param_dim());
  if (kind_ == ConditionalKind::Degenerate) return out;
  const int m = design_dim();
  const Eigen::VectorXd v = design(z);
  const double lin = beta_block(h, beta).dot(v);
  const double resid = kind_ == ConditionalKind::GaussianLinear
                           ? (y - lin) / variance_
                           : y - sigmoid(lin);
  out.segment(h * m, m) = resid * v;
  return out;
}

Eigen::MatrixXd OutcomeConditionalFamily::d2logp_dbeta2(
    int h, double /*y*/, const Eigen::VectorXd& z,
    const Eigen::VectorXd& beta) const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(param_dim(), param_dim());
  if (kind_ == ConditionalKind::Degenerate) return out;
  const int m = design_dim();
  const Eigen::VectorXd v = design(z);
  double coef;
  if (kind_ == ConditionalKind::GaussianLinear) {
    coef = -1.0 / variance_;
  } else {
    const double mu = sigmoid(beta_block(h, beta).dot(v));
    coef = -mu * (1.0 - mu);
  }
  out.block(h * m, h * m, m, m) = coef * (v * v.transpose());
  return out;
}

void OutcomeConditionalFamily::require_pairing(
    const OutcomeMarginalFamily& family) const {
  const bool ok =
      (kind_ == ConditionalKind::GaussianLinear &&
       family.kind() == OutcomeKind::GaussianLinear) ||
      (kind_ == ConditionalKind::BernoulliLogit &&
       family.kind() == OutcomeKind::BernoulliLogit);
  if (!ok)
    throw ConfigError(
        "unsupported outcome/conditional family pairing (no closed kernel); "
        "quadrature mode covers continuous conditionals only");
}

namespace {

// E[exp(-a (y - mu0)^2)] under y ~ N(mean, var):
// with S = 1 + 2 a var, value = S^(-1/2) exp(-a delta^2 / S), delta = mean-mu0.
struct GaussianTilt {
  double value;
};

GaussianTilt gaussian_tilt(double a, double var, double delta) {
  const double s = 1.0 + 2.0 * a * var;
  return {std::exp(-a * delta * delta / s) / std::sqrt(s)};
}

}  // namespace

double OutcomeConditionalFamily::g_value(const OutcomeMarginalFamily& family,
                                         int h, const Eigen::VectorXd& x,
                                         const Eigen::VectorXd& z,
                                         const Eigen::VectorXd& theta,
                                         const Eigen::VectorXd& beta) const {
  if (kind_ == ConditionalKind::Degenerate) return 0.0;
  require_pairing(family);
  if (kind_ == ConditionalKind::BernoulliLogit) {
    const double mu = mean(h, z, beta);
    return mu * family.loss_value(1.0, x, theta) +
           (1.0 - mu) * family.loss_value(0.0, x, theta);
  }
  const double m = mean(h, z, beta);
  if (g_mode_ == GKernelMode::Quadrature) {
    Eigen::VectorXd nodes, weights;
    gauss_hermite(quadrature_nodes_, nodes, weights);
    const double scale = std::sqrt(2.0 * variance_);
    double acc = 0.0;
    for (int j = 0; j < nodes.size(); ++j)
      acc += weights[j] * family.loss_value(m + scale * nodes[j], x, theta);
    return acc / std::sqrt(M_PI);
  }
  const double sigma2 = family.variance();
  const double mu0 = x.dot(theta);
  const double delta = m - mu0;
  if (family.loss().kind == LossKind::LogLikelihood) {
    return -0.5 * ((delta * delta + variance_) / sigma2 + kLog2Pi +
                   std::log(sigma2));
  }
  const double g = family.loss().gamma;
  const double kappa = std::exp(-0.5 * g * (kLog2Pi + std::log(sigma2)));
  const GaussianTilt t = gaussian_tilt(0.5 * g / sigma2, variance_, delta);
  return kappa * t.value / g - kappa / ((1.0 + g) * std::sqrt(1.0 + g));
}

Eigen::VectorXd OutcomeConditionalFamily::g_grad_theta(
    const OutcomeMarginalFamily& family, int h, const Eigen::VectorXd& x,
    const Eigen::VectorXd& z, const Eigen::VectorXd& theta,
    const Eigen::VectorXd& beta) const {
  if (kind_ == ConditionalKind::Degenerate)
    return Eigen::VectorXd::Zero(theta.size());
  require_pairing(family);
  if (kind_ == ConditionalKind::BernoulliLogit) {
    const double mu = mean(h, z, beta);
    return mu * family.loss_score(1.0, x, theta) +
           (1.0 - mu) * family.loss_score(0.0, x, theta);
  }
  const double m = mean(h, z, beta);
  if (g_mode_ == GKernelMode::Quadrature) {
    Eigen::VectorXd nodes, weights;
    gauss_hermite(quadrature_nodes_, nodes, weights);
    const double scale = std::sqrt(2.0 * variance_);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(theta.size());
    for (int j = 0; j < nodes.size(); ++j)
      acc += weights[j] * family.loss_score(m + scale * nodes[j], x, theta);
    return acc / std::sqrt(M_PI);
  }
  const double sigma2 = family.variance();
  const double delta = m - x.dot(theta);
  if (family.loss().kind == LossKind::LogLikelihood) return x * (delta / sigma2);
  const double g = family.loss().gamma;
  const double kappa = std::exp(-0.5 * g * (kLog2Pi + std::log(sigma2)));
  const double s = 1.0 + g * variance_ / sigma2;
  const GaussianTilt t = gaussian_tilt(0.5 * g / sigma2, variance_, delta);
  return x * (kappa * t.value * delta / (sigma2 * s));
}

Eigen::MatrixXd OutcomeConditionalFamily::g_hess_theta(
    const OutcomeMarginalFamily& family, int h, const Eigen::VectorXd& x,
    const Eigen::VectorXd& z, const Eigen::VectorXd& theta,
    const Eigen::VectorXd& beta) const {
  const int p = static_cast<int>(theta.size());
  if (kind_ == ConditionalKind::Degenerate) return Eigen::MatrixXd::Zero(p, p);
  require_pairing(family);
  if (kind_ == ConditionalKind::BernoulliLogit) {
    const double mu = mean(h, z, beta);
    return mu * family.loss_hessian(1.0, x, theta) +
           (1.0 - mu) * family.loss_hessian(0.0, x, theta);
  }
  const double m = mean(h, z, beta);
  if (g_mode_ == GKernelMode::Quadrature) {
    Eigen::VectorXd nodes, weights;
    gauss_hermite(quadrature_nodes_, nodes, weights);
    const double scale = std::sqrt(2.0 * variance_);
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(p, p);
    for (int j = 0; j < nodes.size(); ++j)
      acc += weights[j] * family.loss_hessian(m + scale * nodes[j], x, theta);
    return acc / std::sqrt(M_PI);
  }
  const double sigma2 = family.variance();
  const double delta = m - x.dot(theta);
  const Eigen::MatrixXd xxt = x * x.transpose();
  if (family.loss().kind == LossKind::LogLikelihood) return -xxt / sigma2;
  const double g = family.loss().gamma;
  const double kappa = std::exp(-0.5 * g * (kLog2Pi + std::log(sigma2)));
  const double s = 1.0 + g * variance_ / sigma2;
  const GaussianTilt t = gaussian_tilt(0.5 * g / sigma2, variance_, delta);
  const double curve =
      kappa * t.value * (1.0 - g * delta * delta / (sigma2 * s)) / (sigma2 * s);
  return -curve * xxt;
}

Eigen::MatrixXd OutcomeConditionalFamily::g_cross_theta_beta(
    const OutcomeMarginalFamily& family, int h, const Eigen::VectorXd& x,
    const Eigen::VectorXd& z, const Eigen::VectorXd& theta,
    const Eigen::VectorXd& beta) const {
  const int p = static_cast<int>(theta.size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(p, param_dim());
  if (kind_ == ConditionalKind::Degenerate) return out;
  require_pairing(family);
  const int m = design_dim();
  const Eigen::VectorXd v = design(z);
  if (kind_ == ConditionalKind::BernoulliLogit) {
    const double mu = mean(h, z, beta);
    const Eigen::VectorXd dscore =
        family.loss_score(1.0, x, theta) - family.loss_score(0.0, x, theta);
    out.block(0, h * m, p, m) = (mu * (1.0 - mu)) * dscore * v.transpose();
    return out;
  }
  const double mz = mean(h, z, beta);
  // d/d(mean) of the theta-gradient, chained through the linear mean in beta
  Eigen::VectorXd dgrad_dmean(p);
  if (g_mode_ == GKernelMode::Quadrature) {
    Eigen::VectorXd nodes, weights;
    gauss_hermite(quadrature_nodes_, nodes, weights);
    const double scale = std::sqrt(2.0 * variance_);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(p);
    for (int j = 0; j < nodes.size(); ++j)
      acc += weights[j] * family.loss_score_dy(mz + scale * nodes[j], x, theta);
    dgrad_dmean = acc / std::sqrt(M_PI);
  } else {
    const double sigma2 = family.variance();
    const double delta = mz - x.dot(theta);
    if (family.loss().kind == LossKind::LogLikelihood) {
      dgrad_dmean = x / sigma2;
    } else {
      const double g = family.loss().gamma;
      const double kappa = std::exp(-0.5 * g * (kLog2Pi + std::log(sigma2)));
      const double s = 1.0 + g * variance_ / sigma2;
      const GaussianTilt t = gaussian_tilt(0.5 * g / sigma2, variance_, delta);
      dgrad_dmean =
          x * (kappa * t.value * (1.0 - g * delta * delta / (sigma2 * s)) /
               (sigma2 * s));
    }
  }
  out.block(0, h * m, p, m) = dgrad_dmean * v.transpose();
  return out;
}

void gauss_hermite(int n, Eigen::VectorXd& nodes, Eigen::VectorXd& weights) {
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    const double b = std::sqrt(i / 2.0);
    jac(i, i - 1) = b;
    jac(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
  nodes = es.eigenvalues();
  weights.resize(n);
  const double total = std::sqrt(M_PI);
  for (int i = 0; i < n; ++i) {
    const double v0 = es.eigenvectors()(0, i);
    weights[i] = total * v0 * v0;
  }
}

}  // namespace msmic
