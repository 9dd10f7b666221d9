#include "msmic/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "msmic/newton.hpp"
#include "msmic/parallel.hpp"
#include "msmic/rng.hpp"

namespace msmic {

namespace {

Eigen::VectorXd flatten_alpha(const Eigen::MatrixXd& a) {
  Eigen::VectorXd flat(a.rows() * a.cols());
  for (int j = 0; j < a.rows(); ++j)
    flat.segment(j * a.cols(), a.cols()) = a.row(j);
  return flat;
}

std::vector<int> resolve_cols(const std::vector<int>& cols, int dim_x) {
  if (!cols.empty()) return cols;
  std::vector<int> all(dim_x);
  for (int j = 0; j < dim_x; ++j) all[j] = j;
  return all;
}

OutcomeKind dgp_outcome_kind(const DGPSpec& dgp) {
  const OutcomeKind kind = dgp.outcome.at(0).kind;
  for (const auto& law : dgp.outcome) {
    if (law.kind != kind)
      throw ConfigError("dgp: mixed outcome kinds across arms are not supported");
  }
  return kind;
}

}  // namespace

void DGPSpec::validate() const {
  if (arms < 1) throw ConfigError("dgp: need at least one arm");
  if (dim_z < 0) throw ConfigError("dgp: negative confounder dimension");
  if (alpha0.rows() != arms - 1 || (arms > 1 && alpha0.cols() != dim_z + 1))
    throw ConfigError("dgp: propensity parameter shape mismatch");
  if (static_cast<int>(outcome.size()) != arms)
    throw ConfigError("dgp: need one outcome law per arm");
  if (arm_design.rows() != arms)
    throw ConfigError("dgp: arm design row count mismatch");
  if (n_random_x < 0) throw ConfigError("dgp: negative random regressor count");
  for (const auto& law : outcome) {
    if (law.z_coef.size() != 0 && law.z_coef.size() != dim_z)
      throw ConfigError("dgp: outcome z coefficient length mismatch");
    if (law.x_coef.size() != 0 && law.x_coef.size() != n_random_x)
      throw ConfigError("dgp: outcome x coefficient length mismatch");
    if (law.kind == OutcomeKind::GaussianLinear && law.sd <= 0.0)
      throw ConfigError("dgp: gaussian arm needs positive sd");
    if (law.kind == OutcomeKind::BernoulliLogit && law.x_coef.size() != 0)
      throw ConfigError("dgp: bernoulli arms do not take random-x effects");
  }
  for (int c : true_support) {
    if (c < 0 || c >= dim_x())
      throw ConfigError("dgp: true support column out of range");
  }

  if (positivity_checked_) return;
  // positivity scan: the smallest propensity over a large z sample must stay
  // clear of zero, otherwise inverse weights are unbounded
  if (arms > 1) {
    const PropensityModel model(arms, dim_z);
    const Eigen::VectorXd alpha = flatten_alpha(alpha0);
    Rng rng(0x5eedULL);
    double min_prob = 1.0;
    Eigen::VectorXd z(dim_z);
    constexpr int kScanPoints = 1000000;
    for (int i = 0; i < kScanPoints; ++i) {
      for (int j = 0; j < dim_z; ++j) z[j] = rng.normal();
      min_prob = std::min(min_prob, model.probs(z, alpha).minCoeff());
    }
    if (min_prob < 0.01)
      throw ConfigError("dgp: positivity violated, min propensity " +
                        std::to_string(min_prob) + " < 0.01 over scan");
  }
  positivity_checked_ = true;
}

PropensityModel DGPSpec::fitted_propensity() const {
  if (fit_propensity_drop_z) return PropensityModel(arms, dim_z, {});
  return PropensityModel(arms, dim_z);
}

OutcomeConditionalFamily DGPSpec::fitted_conditional(double variance) const {
  const ConditionalKind kind = dgp_outcome_kind(*this) == OutcomeKind::GaussianLinear
                                   ? ConditionalKind::GaussianLinear
                                   : ConditionalKind::BernoulliLogit;
  if (fit_outcome_drop_z)
    return OutcomeConditionalFamily(kind, arms, dim_z, std::vector<int>{}, variance);
  return OutcomeConditionalFamily(kind, arms, dim_z, variance);
}

TreatmentFrame generate(const DGPSpec& dgp, int n, std::uint64_t seed) {
  dgp.validate();
  const int arms = dgp.arms;
  const int k_fixed = static_cast<int>(dgp.arm_design.cols());
  const int dim_x = dgp.dim_x();
  const PropensityModel model(arms, dgp.dim_z);
  const Eigen::VectorXd alpha = flatten_alpha(dgp.alpha0);

  Eigen::VectorXd y(n);
  std::vector<int> arm(n);
  Eigen::MatrixXd z(n, dgp.dim_z);
  std::vector<Eigen::MatrixXd> x(arms, Eigen::MatrixXd(n, dim_x));

  Rng rng(seed);
  Eigen::VectorXd zi(dgp.dim_z);
  // fixed draw order per record: z, assignment, shared x block, outcome
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < dgp.dim_z; ++j) zi[j] = rng.normal();
    z.row(i) = zi;
    const int a = arms == 1 ? 0 : rng.categorical(model.probs(zi, alpha));
    arm[i] = a;
    Eigen::VectorXd xr(dgp.n_random_x);
    for (int j = 0; j < dgp.n_random_x; ++j) xr[j] = rng.normal();
    for (int h = 0; h < arms; ++h) {
      x[h].row(i).head(k_fixed) = dgp.arm_design.row(h);
      x[h].row(i).tail(dgp.n_random_x) = xr;
    }
    const ArmLaw& law = dgp.outcome[a];
    double mean = law.intercept;
    if (law.z_coef.size() > 0) mean += law.z_coef.dot(zi);
    if (law.x_coef.size() > 0) mean += law.x_coef.dot(xr);
    if (law.kind == OutcomeKind::GaussianLinear) {
      y[i] = mean + law.sd * rng.normal();
    } else {
      const double mu = 1.0 / (1.0 + std::exp(-mean));
      y[i] = rng.bernoulli(mu) ? 1.0 : 0.0;
    }
  }
  return TreatmentFrame(std::move(y), std::move(arm), std::move(x), std::move(z));
}

// ---------------------------------------------------------------------------
// population quantities by tensor Gauss-Hermite quadrature
// ---------------------------------------------------------------------------

namespace {

struct QuadGrid {
  Eigen::MatrixXd points;   // #points x dims, coordinates of N(0, I) nodes
  Eigen::VectorXd weights;  // probability weights, sum to 1
};

QuadGrid standard_normal_grid(int dims, int nodes_per_dim = 32) {
  if (dims > 4)
    throw ConfigError("quadrature: population solver supports at most 4 dims");
  QuadGrid grid;
  if (dims == 0) {
    grid.points.resize(1, 0);
    grid.weights = Eigen::VectorXd::Ones(1);
    return grid;
  }
  Eigen::VectorXd nodes, weights;
  gauss_hermite(nodes_per_dim, nodes, weights);
  const double norm = std::sqrt(M_PI);
  long total = 1;
  for (int d = 0; d < dims; ++d) total *= nodes_per_dim;
  grid.points.resize(total, dims);
  grid.weights.resize(total);
  for (long idx = 0; idx < total; ++idx) {
    long rem = idx;
    double w = 1.0;
    for (int d = 0; d < dims; ++d) {
      const int j = static_cast<int>(rem % nodes_per_dim);
      rem /= nodes_per_dim;
      grid.points(idx, d) = std::sqrt(2.0) * nodes[j];
      w *= weights[j] / norm;
    }
    grid.weights[idx] = w;
  }
  return grid;
}

// expectation of the loss score/hessian over the true outcome law of arm h
// at confounders z and shared regressors xr
struct ArmMoment {
  Eigen::VectorXd score;
  Eigen::MatrixXd hessian;
};

ArmMoment arm_loss_moment(const DGPSpec& dgp, int h, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& z, const Eigen::VectorXd& xr,
                          const OutcomeMarginalFamily& family,
                          const Eigen::VectorXd& theta) {
  const ArmLaw& law = dgp.outcome[h];
  double mean = law.intercept;
  if (law.z_coef.size() > 0) mean += law.z_coef.dot(z);
  if (law.x_coef.size() > 0) mean += law.x_coef.dot(xr);
  ArmMoment mom;
  if (law.kind == OutcomeKind::BernoulliLogit) {
    const double mu = 1.0 / (1.0 + std::exp(-mean));
    mom.score = mu * family.loss_score(1.0, x, theta) +
                (1.0 - mu) * family.loss_score(0.0, x, theta);
    mom.hessian = mu * family.loss_hessian(1.0, x, theta) +
                  (1.0 - mu) * family.loss_hessian(0.0, x, theta);
    return mom;
  }
  // inner quadrature over the gaussian outcome (exact for the quadratic
  // log-likelihood pieces, accurate for the density-power loss)
  static thread_local Eigen::VectorXd nodes, weights;
  if (nodes.size() == 0) gauss_hermite(32, nodes, weights);
  const double norm = std::sqrt(M_PI);
  mom.score = Eigen::VectorXd::Zero(theta.size());
  mom.hessian = Eigen::MatrixXd::Zero(theta.size(), theta.size());
  for (int j = 0; j < nodes.size(); ++j) {
    const double yj = mean + law.sd * std::sqrt(2.0) * nodes[j];
    const double wj = weights[j] / norm;
    mom.score += wj * family.loss_score(yj, x, theta);
    mom.hessian += wj * family.loss_hessian(yj, x, theta);
  }
  return mom;
}

Eigen::VectorXd arm_regressors(const DGPSpec& dgp, int h,
                               const std::vector<int>& cols,
                               const Eigen::VectorXd& xr) {
  const int k_fixed = static_cast<int>(dgp.arm_design.cols());
  Eigen::VectorXd full(dgp.dim_x());
  full.head(k_fixed) = dgp.arm_design.row(h);
  full.tail(dgp.n_random_x) = xr;
  Eigen::VectorXd out(cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) out[j] = full[cols[j]];
  return out;
}

}  // namespace

Eigen::VectorXd ipw_pseudo_true_theta(const DGPSpec& dgp,
                                      const std::vector<int>& x_cols,
                                      const OutcomeMarginalFamily& family,
                                      const TargetPopulation& d) {
  dgp.validate();
  const std::vector<int> cols = resolve_cols(x_cols, dgp.dim_x());
  const int p = static_cast<int>(cols.size());
  const QuadGrid grid = standard_normal_grid(dgp.dim_z + dgp.n_random_x);
  const PropensityModel true_model(dgp.arms, dgp.dim_z);
  const Eigen::VectorXd alpha = flatten_alpha(dgp.alpha0);

  auto residual = [&](const Eigen::VectorXd& theta) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(p);
    for (long i = 0; i < grid.points.rows(); ++i) {
      const Eigen::VectorXd z = grid.points.row(i).head(dgp.dim_z);
      const Eigen::VectorXd xr = grid.points.row(i).tail(dgp.n_random_x);
      const double sd =
          dgp.arms == 1 ? d.d()[0]
                        : d.d().dot(true_model.probs(z, alpha));
      for (int h = 0; h < dgp.arms; ++h) {
        const Eigen::VectorXd x = arm_regressors(dgp, h, cols, xr);
        acc += grid.weights[i] * sd *
               arm_loss_moment(dgp, h, x, z, xr, family, theta).score;
      }
    }
    return acc;
  };
  auto jacobian = [&](const Eigen::VectorXd& theta) {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(p, p);
    for (long i = 0; i < grid.points.rows(); ++i) {
      const Eigen::VectorXd z = grid.points.row(i).head(dgp.dim_z);
      const Eigen::VectorXd xr = grid.points.row(i).tail(dgp.n_random_x);
      const double sd =
          dgp.arms == 1 ? d.d()[0]
                        : d.d().dot(true_model.probs(z, alpha));
      for (int h = 0; h < dgp.arms; ++h) {
        const Eigen::VectorXd x = arm_regressors(dgp, h, cols, xr);
        acc += grid.weights[i] * sd *
               arm_loss_moment(dgp, h, x, z, xr, family, theta).hessian;
      }
    }
    return acc;
  };

  Eigen::VectorXd start = Eigen::VectorXd::Zero(p);
  if (family.loss().kind == LossKind::DensityPower) {
    // redescending loss: start from the log-likelihood limit
    const OutcomeMarginalFamily loglik(family.kind(), {}, family.variance());
    start = ipw_pseudo_true_theta(dgp, x_cols, loglik, d);
  }
  NewtonOptions options;
  options.tol = 1e-11;
  return newton_solve(residual, jacobian, start, options,
                      "population structure solve")
      .params;
}

Eigen::VectorXd propensity_limit(const DGPSpec& dgp) {
  dgp.validate();
  const Eigen::VectorXd alpha0 = flatten_alpha(dgp.alpha0);
  if (!dgp.fit_propensity_drop_z || dgp.arms == 1) return alpha0;

  const PropensityModel true_model(dgp.arms, dgp.dim_z);
  const PropensityModel fitted = dgp.fitted_propensity();
  const int q = fitted.param_dim();
  const int m = fitted.design_dim();
  const QuadGrid grid = standard_normal_grid(dgp.dim_z);

  auto residual = [&](const Eigen::VectorXd& a) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(q);
    for (long i = 0; i < grid.points.rows(); ++i) {
      const Eigen::VectorXd z = grid.points.row(i);
      const Eigen::VectorXd e_true = true_model.probs(z, alpha0);
      const Eigen::VectorXd e_fit = fitted.probs(z, a);
      const Eigen::VectorXd v = fitted.design(z);
      for (int j = 0; j < dgp.arms - 1; ++j)
        acc.segment(j * m, m) +=
            grid.weights[i] * (e_true[j] - e_fit[j]) * v;
    }
    return acc;
  };
  auto jacobian = [&](const Eigen::VectorXd& a) {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(q, q);
    for (long i = 0; i < grid.points.rows(); ++i) {
      const Eigen::VectorXd z = grid.points.row(i);
      acc -= grid.weights[i] *
             fitted.loglik_neg_hessian(z, fitted.probs(z, a));
    }
    return acc;
  };

  NewtonOptions options;
  options.tol = 1e-11;
  return newton_solve(residual, jacobian, Eigen::VectorXd::Zero(q), options,
                      "population propensity solve")
      .params;
}

Eigen::VectorXd conditional_limit(const DGPSpec& dgp,
                                  const OutcomeConditionalFamily& conditional) {
  dgp.validate();
  const int r = conditional.param_dim();
  if (r == 0) return Eigen::VectorXd(0);
  const int m = conditional.design_dim();
  const PropensityModel true_model(dgp.arms, dgp.dim_z);
  const Eigen::VectorXd alpha0 = flatten_alpha(dgp.alpha0);
  const QuadGrid grid = standard_normal_grid(dgp.dim_z);

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(r);
  for (int h = 0; h < dgp.arms; ++h) {
    const ArmLaw& law = dgp.outcome[h];
    // assignment-weighted population regression of E[y | z] on the design
    auto mean_true = [&](const Eigen::VectorXd& z) {
      double mval = law.intercept;
      if (law.z_coef.size() > 0) mval += law.z_coef.dot(z);
      return law.kind == OutcomeKind::GaussianLinear
                 ? mval
                 : 1.0 / (1.0 + std::exp(-mval));
    };
    auto weight = [&](const Eigen::VectorXd& z) {
      return dgp.arms == 1 ? 1.0 : true_model.probs(z, alpha0)[h];
    };
    if (conditional.kind() == ConditionalKind::GaussianLinear) {
      Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(m, m);
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
      for (long i = 0; i < grid.points.rows(); ++i) {
        const Eigen::VectorXd z = grid.points.row(i);
        const Eigen::VectorXd v = conditional.design(z);
        const double w = grid.weights[i] * weight(z);
        gram += w * v * v.transpose();
        rhs += w * v * mean_true(z);
      }
      beta.segment(h * m, m) = gram.ldlt().solve(rhs);
    } else {
      auto residual = [&](const Eigen::VectorXd& bh) {
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(m);
        for (long i = 0; i < grid.points.rows(); ++i) {
          const Eigen::VectorXd z = grid.points.row(i);
          const Eigen::VectorXd v = conditional.design(z);
          const double fitted_mu = 1.0 / (1.0 + std::exp(-bh.dot(v)));
          acc += grid.weights[i] * weight(z) * (mean_true(z) - fitted_mu) * v;
        }
        return acc;
      };
      auto jacobian = [&](const Eigen::VectorXd& bh) {
        Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(m, m);
        for (long i = 0; i < grid.points.rows(); ++i) {
          const Eigen::VectorXd z = grid.points.row(i);
          const Eigen::VectorXd v = conditional.design(z);
          const double fitted_mu = 1.0 / (1.0 + std::exp(-bh.dot(v)));
          acc -= grid.weights[i] * weight(z) * fitted_mu * (1.0 - fitted_mu) *
                 (v * v.transpose());
        }
        return acc;
      };
      NewtonOptions options;
      options.tol = 1e-11;
      beta.segment(h * m, m) =
          newton_solve(residual, jacobian, Eigen::VectorXd::Zero(m), options,
                       "population conditional solve")
              .params;
    }
  }
  return beta;
}

Eigen::VectorXd cb_alpha_limit(const DGPSpec& dgp, const ContrastSpec& contrast) {
  dgp.validate();
  if (dgp.arms != 2) throw ConfigError("cb limit: two arms only");
  const PropensityModel model(dgp.arms, dgp.dim_z);
  const Eigen::VectorXd alpha0 = flatten_alpha(dgp.alpha0);
  const int m = model.design_dim();
  const QuadGrid grid = standard_normal_grid(dgp.dim_z);

  auto residual = [&](const Eigen::VectorXd& a) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(m);
    for (long i = 0; i < grid.points.rows(); ++i) {
      const Eigen::VectorXd z = grid.points.row(i);
      const Eigen::VectorXd e_true = model.probs(z, alpha0);
      const Eigen::VectorXd e_fit = model.probs(z, a);
      const Eigen::VectorXd v = model.design(z);
      double coef = 0.0;
      for (int h = 0; h < dgp.arms; ++h)
        coef += contrast.c()[h] * e_true[h] / e_fit[h];
      acc += grid.weights[i] * coef * v;
    }
    return acc;
  };
  auto jacobian = [&](const Eigen::VectorXd& a) {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(m, m);
    for (long i = 0; i < grid.points.rows(); ++i) {
      const Eigen::VectorXd z = grid.points.row(i);
      const Eigen::VectorXd e_true = model.probs(z, alpha0);
      const Eigen::VectorXd e_fit = model.probs(z, a);
      const Eigen::MatrixXd dlog = model.dlogprobs_dalpha(z, e_fit);
      const Eigen::VectorXd v = model.design(z);
      for (int h = 0; h < dgp.arms; ++h)
        acc -= grid.weights[i] * contrast.c()[h] * e_true[h] / e_fit[h] * v *
               dlog.row(h);
    }
    return acc;
  };

  NewtonOptions options;
  options.tol = 1e-11;
  return newton_solve(residual, jacobian, Eigen::VectorXd::Zero(m), options,
                      "population balancing solve")
      .params;
}

Eigen::VectorXd cb_true_contrast(const DGPSpec& dgp, const ContrastSpec& contrast) {
  dgp.validate();
  if (dgp.arm_design.cols() != 1 || (dgp.arm_design.array() != 1.0).any())
    throw ConfigError(
        "cb contrast: expects a single shared intercept design column");
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(dgp.dim_x());
  for (int h = 0; h < dgp.arms; ++h) {
    theta[0] += contrast.c()[h] * dgp.outcome[h].intercept;
    for (int j = 0; j < dgp.outcome[h].x_coef.size(); ++j)
      theta[1 + j] += contrast.c()[h] * dgp.outcome[h].x_coef[j];
  }
  return theta;
}

// ---------------------------------------------------------------------------
// replication machinery
// ---------------------------------------------------------------------------

namespace {

OutcomeMarginalFamily recipe_family(const DGPSpec& dgp, const RecipeSpec& recipe) {
  return OutcomeMarginalFamily(dgp_outcome_kind(dgp), recipe.loss,
                               recipe.marginal_variance);
}

// -2 sum_i t w(z_i; model, alpha) zeta(y_i | x_i; theta)
double weighted_fit_term(const TreatmentFrame& frame,
                         const OutcomeMarginalFamily& family,
                         const PropensityModel& model,
                         const Eigen::VectorXd& alpha, const TargetPopulation& d,
                         const Eigen::VectorXd& theta) {
  double acc = 0.0;
  for (int i = 0; i < frame.size(); ++i) {
    const int a = frame.arm(i);
    const Eigen::VectorXd w =
        target_weights(model.probs(frame.z(i), alpha), d);
    acc += w[a] * family.loss_value(frame.y(i), frame.x(i, a), theta);
  }
  return -2.0 * acc;
}

double cb_rss(const TreatmentFrame& frame, const ContrastSpec& contrast,
              const Eigen::VectorXd& alpha, const Eigen::VectorXd& theta) {
  const PropensityModel model(frame.arms(), frame.dim_z());
  double acc = 0.0;
  for (int i = 0; i < frame.size(); ++i) {
    const int a = frame.arm(i);
    const Eigen::VectorXd e = model.probs(frame.z(i), alpha);
    const double r =
        contrast.c()[a] / e[a] * frame.y(i) - frame.x(i, 0).dot(theta);
    acc += r * r;
  }
  return acc;
}

const ContrastSpec& require_contrast(const RecipeSpec& recipe) {
  if (!recipe.contrast)
    throw ConfigError("recipe: covariate balancing needs a contrast");
  return *recipe.contrast;
}

CriterionKind canonical_kind(FitRecipe recipe) {
  switch (recipe) {
    case FitRecipe::IPWKnown: return CriterionKind::IPWIC1;
    case FitRecipe::IPWUnknown: return CriterionKind::IPWIC2;
    case FitRecipe::DR: return CriterionKind::DRIC;
    case FitRecipe::CB: return CriterionKind::CBIC;
  }
  return CriterionKind::IPWIC2;
}

FitRecipe recipe_for_kind(CriterionKind kind) {
  switch (kind) {
    case CriterionKind::IPWIC1: return FitRecipe::IPWKnown;
    case CriterionKind::DRIC: return FitRecipe::DR;
    case CriterionKind::CBIC: return FitRecipe::CB;
    case CriterionKind::QICW:
    case CriterionKind::IPWIC2:
    case CriterionKind::ObsWeightIC: return FitRecipe::IPWUnknown;
  }
  return FitRecipe::IPWUnknown;
}

CriterionReport evaluate_criterion(CriterionKind kind,
                                   const TreatmentFrame& sub,
                                   const DGPSpec& dgp, const RecipeSpec& recipe,
                                   const TargetPopulation& d,
                                   const RecipeFit& fit) {
  const OutcomeMarginalFamily family = recipe_family(dgp, recipe);
  switch (kind) {
    case CriterionKind::QICW:
      return qicw(sub, family, dgp.fitted_propensity(), fit.theta, fit.alpha, d,
                  recipe.policy);
    case CriterionKind::IPWIC1:
      return ipwic(sub, family, PropensityModel(dgp.arms, dgp.dim_z), fit.theta,
                   fit.alpha, d, /*alpha_known=*/true, recipe.policy);
    case CriterionKind::IPWIC2:
      return ipwic(sub, family, dgp.fitted_propensity(), fit.theta, fit.alpha,
                   d, /*alpha_known=*/false, recipe.policy);
    case CriterionKind::ObsWeightIC:
      return observed_weight_variant(sub, family, dgp.fitted_propensity(),
                                     fit.theta, fit.alpha, d, recipe.policy);
    case CriterionKind::DRIC:
      return dric(sub, family, dgp.fitted_propensity(), fit.alpha,
                  dgp.fitted_conditional(recipe.conditional_variance), fit.beta,
                  fit.theta, d, recipe.policy);
    case CriterionKind::CBIC:
      return cb_criterion(sub, fit.theta, fit.alpha, require_contrast(recipe));
  }
  throw ConfigError("unknown criterion kind");
}

}  // namespace

RecipeFit fit_recipe(const TreatmentFrame& frame, const DGPSpec& dgp,
                     const RecipeSpec& recipe, const TargetPopulation& d) {
  const std::vector<int> cols = resolve_cols(recipe.x_cols, frame.dim_x());
  const TreatmentFrame sub = frame.select_regressors(cols);
  const OutcomeMarginalFamily family = recipe_family(dgp, recipe);

  RecipeFit fit;
  switch (recipe.recipe) {
    case FitRecipe::IPWKnown: {
      const PropensityModel model(dgp.arms, dgp.dim_z);
      fit.alpha = flatten_alpha(dgp.alpha0);
      fit.theta =
          solve_ipw(sub, family, model, fit.alpha, d, recipe.policy).params;
      break;
    }
    case FitRecipe::IPWUnknown: {
      const PropensityModel model = dgp.fitted_propensity();
      fit.alpha = fit_propensity(sub, model).params;
      fit.theta =
          solve_ipw(sub, family, model, fit.alpha, d, recipe.policy).params;
      break;
    }
    case FitRecipe::DR: {
      const PropensityModel model = dgp.fitted_propensity();
      const OutcomeConditionalFamily conditional =
          dgp.fitted_conditional(recipe.conditional_variance);
      fit.alpha = fit_propensity(sub, model).params;
      fit.beta = fit_outcome_conditional(sub, conditional).params;
      fit.theta = solve_dr(sub, family, model, fit.alpha, conditional, fit.beta,
                           d, recipe.policy)
                      .params;
      break;
    }
    case FitRecipe::CB: {
      const ContrastSpec& contrast = require_contrast(recipe);
      fit.alpha = solve_cb_alpha(sub, contrast);
      fit.theta = cb_estimate(sub, fit.alpha, contrast);
      break;
    }
  }
  return fit;
}

CriterionReport recipe_criterion(const TreatmentFrame& frame, const DGPSpec& dgp,
                                 const RecipeSpec& recipe,
                                 const TargetPopulation& d,
                                 const RecipeFit& fit) {
  const std::vector<int> cols = resolve_cols(recipe.x_cols, frame.dim_x());
  const TreatmentFrame sub = frame.select_regressors(cols);
  return evaluate_criterion(canonical_kind(recipe.recipe), sub, dgp, recipe, d,
                            fit);
}

namespace {

struct RepSlot {
  bool ok = false;
  double optimism = 0.0;
  double penalty = 0.0;
  double risk = 0.0;
  double d2 = 0.0;
  double d3 = 0.0;
  Eigen::VectorXd theta;
  int winner = -1;
};

void check_failures(int reps, int failures) {
  if (failures * 20 > reps)
    throw ExperimentError("experiment: " + std::to_string(failures) + " of " +
                          std::to_string(reps) +
                          " replications failed (> 5%)");
}

// Reference (limit) weight model for the in-sample/copy fit terms: the fitted
// propensity's functional form at its population limit.
struct LimitWeightModel {
  PropensityModel model;
  Eigen::VectorXd alpha;
};

LimitWeightModel limit_weight_model(const DGPSpec& dgp, const RecipeSpec& recipe) {
  if (recipe.recipe == FitRecipe::IPWKnown)
    return {PropensityModel(dgp.arms, dgp.dim_z), flatten_alpha(dgp.alpha0)};
  return {dgp.fitted_propensity(), propensity_limit(dgp)};
}

}  // namespace

MCEstimate mc_risk(const DGPSpec& dgp, const RecipeSpec& recipe,
                   const TargetPopulation& d, int n, int reps,
                   std::uint64_t seed) {
  dgp.validate();
  const std::vector<int> cols = resolve_cols(recipe.x_cols, dgp.dim_x());
  const OutcomeMarginalFamily family = recipe_family(dgp, recipe);
  const bool is_cb = recipe.recipe == FitRecipe::CB;
  // fit terms are evaluated at the limit of the estimated weights, for the
  // balancing recipe just like for the likelihood ones
  const LimitWeightModel limit =
      is_cb ? LimitWeightModel{PropensityModel(dgp.arms, dgp.dim_z),
                               cb_alpha_limit(dgp, require_contrast(recipe))}
            : limit_weight_model(dgp, recipe);

  std::vector<RepSlot> slots(reps);
  parallel_for(reps, [&](int rep) {
    try {
      const TreatmentFrame frame =
          generate(dgp, n, mix_seed(seed, 2 * static_cast<std::uint64_t>(rep)));
      const TreatmentFrame copy = generate(
          dgp, n, mix_seed(seed, 2 * static_cast<std::uint64_t>(rep) + 1));
      const RecipeFit fit = fit_recipe(frame, dgp, recipe, d);
      const TreatmentFrame copy_sub = copy.select_regressors(cols);
      if (is_cb) {
        slots[rep].risk =
            cb_rss(copy_sub, require_contrast(recipe), limit.alpha, fit.theta);
      } else {
        slots[rep].risk = weighted_fit_term(copy_sub, family, limit.model,
                                            limit.alpha, d, fit.theta);
      }
      slots[rep].ok = true;
    } catch (const FitError&) {
    } catch (const DataError&) {
    }
  });

  MCEstimate est;
  est.n = n;
  est.reps = reps;
  CompensatedSum sum, sumsq;
  int used = 0;
  for (const auto& slot : slots) {
    if (!slot.ok) continue;
    ++used;
    sum.add(slot.risk);
    sumsq.add(slot.risk * slot.risk);
  }
  est.failures = reps - used;
  check_failures(reps, est.failures);
  est.mean = sum.value() / used;
  const double var = (sumsq.value() - used * est.mean * est.mean) / (used - 1);
  est.se = std::sqrt(std::max(var, 0.0) / used);
  return est;
}

BiasMatchReport mc_bias(const DGPSpec& dgp, const RecipeSpec& recipe,
                        const TargetPopulation& d, int n, int reps,
                        std::uint64_t seed) {
  dgp.validate();
  const std::vector<int> cols = resolve_cols(recipe.x_cols, dgp.dim_x());
  const OutcomeMarginalFamily family = recipe_family(dgp, recipe);
  const bool is_cb = recipe.recipe == FitRecipe::CB;

  // fixed reference parameters: the optimism estimator subtracts the fit term
  // at the population limit from both the in-sample and copy terms, which
  // leaves the mean unchanged (frames are exchangeable) and removes the
  // O(sqrt(N)) noise common to both. Weights are frozen at their limit in
  // every fit-term evaluation; the fitted parameters still carry the
  // weight-estimation influence.
  Eigen::VectorXd theta_ref;
  LimitWeightModel limit{PropensityModel(dgp.arms, dgp.dim_z), Eigen::VectorXd()};
  if (is_cb) {
    const ContrastSpec& contrast = require_contrast(recipe);
    Eigen::VectorXd full = cb_true_contrast(dgp, contrast);
    theta_ref.resize(cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j) theta_ref[j] = full[cols[j]];
    limit.alpha = cb_alpha_limit(dgp, contrast);
  } else {
    theta_ref = ipw_pseudo_true_theta(dgp, cols, family, d);
    limit = limit_weight_model(dgp, recipe);
  }

  std::vector<RepSlot> slots(reps);
  parallel_for(reps, [&](int rep) {
    try {
      const TreatmentFrame frame =
          generate(dgp, n, mix_seed(seed, 2 * static_cast<std::uint64_t>(rep)));
      const TreatmentFrame copy = generate(
          dgp, n, mix_seed(seed, 2 * static_cast<std::uint64_t>(rep) + 1));
      const RecipeFit fit = fit_recipe(frame, dgp, recipe, d);
      const TreatmentFrame in_sub = frame.select_regressors(cols);
      const TreatmentFrame copy_sub = copy.select_regressors(cols);

      double in_hat, in_ref, copy_hat, copy_ref;
      if (is_cb) {
        const ContrastSpec& contrast = require_contrast(recipe);
        in_hat = cb_rss(in_sub, contrast, limit.alpha, fit.theta);
        in_ref = cb_rss(in_sub, contrast, limit.alpha, theta_ref);
        copy_hat = cb_rss(copy_sub, contrast, limit.alpha, fit.theta);
        copy_ref = cb_rss(copy_sub, contrast, limit.alpha, theta_ref);
      } else {
        in_hat = weighted_fit_term(in_sub, family, limit.model, limit.alpha, d,
                                   fit.theta);
        in_ref = weighted_fit_term(in_sub, family, limit.model, limit.alpha, d,
                                   theta_ref);
        copy_hat = weighted_fit_term(copy_sub, family, limit.model, limit.alpha,
                                     d, fit.theta);
        copy_ref = weighted_fit_term(copy_sub, family, limit.model, limit.alpha,
                                     d, theta_ref);
      }
      slots[rep].optimism = (copy_hat - copy_ref) - (in_hat - in_ref);

      const CriterionReport report =
          recipe_criterion(frame, dgp, recipe, d, fit);
      slots[rep].penalty = report.penalty;
      slots[rep].d2 = report.matrices.D2;
      slots[rep].d3 = report.matrices.D3;
      slots[rep].theta = fit.theta;
      slots[rep].ok = true;
    } catch (const FitError&) {
    } catch (const DataError&) {
    }
  });

  BiasMatchReport report;
  report.n = n;
  report.reps = reps;
  int used = 0;
  for (const auto& slot : slots)
    if (slot.ok) ++used;
  report.failures = reps - used;
  check_failures(reps, report.failures);

  report.optimism.reserve(used);
  report.penalty.reserve(used);
  report.d2.reserve(used);
  report.d3.reserve(used);
  report.thetas.resize(used, theta_ref.size());
  CompensatedSum sum_opt, sum_pen, sum_diff, sum_diff_sq, sum_opt_sq;
  int row = 0;
  for (const auto& slot : slots) {
    if (!slot.ok) continue;
    report.optimism.push_back(slot.optimism);
    report.penalty.push_back(slot.penalty);
    report.d2.push_back(slot.d2);
    report.d3.push_back(slot.d3);
    report.thetas.row(row++) = slot.theta;
    sum_opt.add(slot.optimism);
    sum_opt_sq.add(slot.optimism * slot.optimism);
    sum_pen.add(slot.penalty);
    const double diff = slot.penalty - slot.optimism;
    sum_diff.add(diff);
    sum_diff_sq.add(diff * diff);
  }
  report.mc_bias = sum_opt.value() / used;
  report.penalty_mean = sum_pen.value() / used;
  const double var_opt =
      (sum_opt_sq.value() - used * report.mc_bias * report.mc_bias) / (used - 1);
  report.mc_se = std::sqrt(std::max(var_opt, 0.0) / used);
  const double mean_diff = sum_diff.value() / used;
  const double var_diff =
      (sum_diff_sq.value() - used * mean_diff * mean_diff) / (used - 1);
  const double se_diff = std::sqrt(std::max(var_diff, 0.0) / used);
  report.z = se_diff > 0.0 ? mean_diff / se_diff : 0.0;
  return report;
}

EstimatorStudy mc_estimator(const DGPSpec& dgp, const RecipeSpec& recipe,
                            const TargetPopulation& d, int n, int reps,
                            std::uint64_t seed) {
  dgp.validate();
  std::vector<RepSlot> slots(reps);
  parallel_for(reps, [&](int rep) {
    try {
      const TreatmentFrame frame =
          generate(dgp, n, mix_seed(seed, 2 * static_cast<std::uint64_t>(rep)));
      slots[rep].theta = fit_recipe(frame, dgp, recipe, d).theta;
      slots[rep].ok = true;
    } catch (const FitError&) {
    } catch (const DataError&) {
    }
  });

  EstimatorStudy study;
  int used = 0;
  for (const auto& slot : slots)
    if (slot.ok) ++used;
  study.failures = reps - used;
  check_failures(reps, study.failures);
  int dim = 0;
  for (const auto& slot : slots)
    if (slot.ok) dim = static_cast<int>(slot.theta.size());
  study.thetas.resize(used, dim);
  int row = 0;
  for (const auto& slot : slots)
    if (slot.ok) study.thetas.row(row++) = slot.theta;
  study.mean = study.thetas.colwise().mean();
  Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
  for (int i = 0; i < used; ++i) {
    const Eigen::VectorXd dev = study.thetas.row(i).transpose() - study.mean;
    var += dev.cwiseProduct(dev);
  }
  study.sd = (var / (used - 1)).cwiseSqrt();
  return study;
}

SelectionResult selection_experiment(
    const DGPSpec& dgp, const std::vector<std::vector<int>>& candidates,
    CriterionKind criterion, const RecipeSpec& base, const TargetPopulation& d,
    int n, int reps, std::uint64_t seed) {
  dgp.validate();
  if (candidates.empty()) throw ConfigError("selection: no candidates");
  RecipeSpec recipe = base;
  recipe.recipe = recipe_for_kind(criterion);

  std::vector<RepSlot> slots(reps);
  parallel_for(reps, [&](int rep) {
    try {
      const TreatmentFrame frame =
          generate(dgp, n, mix_seed(seed, 2 * static_cast<std::uint64_t>(rep)));
      int best = -1;
      double best_value = 0.0;
      for (std::size_t c = 0; c < candidates.size(); ++c) {
        RecipeSpec cand = recipe;
        cand.x_cols = candidates[c];
        const RecipeFit fit = fit_recipe(frame, dgp, cand, d);
        const TreatmentFrame sub = frame.select_regressors(
            resolve_cols(cand.x_cols, frame.dim_x()));
        const double value =
            evaluate_criterion(criterion, sub, dgp, cand, d, fit).value;
        if (best < 0 || value < best_value) {
          best = static_cast<int>(c);
          best_value = value;
        }
      }
      slots[rep].winner = best;
      slots[rep].ok = true;
    } catch (const FitError&) {
    } catch (const DataError&) {
    }
  });

  SelectionResult result;
  result.candidates = candidates;
  result.wins.assign(candidates.size(), 0);
  result.reps = reps;
  int used = 0;
  for (const auto& slot : slots) {
    if (!slot.ok) continue;
    ++used;
    ++result.wins[slot.winner];
  }
  result.failures = reps - used;
  check_failures(reps, result.failures);
  return result;
}

}  // namespace msmic
