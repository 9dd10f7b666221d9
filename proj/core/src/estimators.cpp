#include "msmic/estimators.hpp"

#include <cmath>
#include <iostream>
#include <string>

namespace msmic {

WeightTable compute_weights(const TreatmentFrame& frame,
                            const PropensityModel& model,
                            const Eigen::VectorXd& alpha,
                            const TargetPopulation& d,
                            const WeightPolicy& policy) {
  if (d.arms() != frame.arms())
    throw ConfigError("weights: target population arm count mismatch");
  const int n = frame.size();
  const int arms = frame.arms();
  WeightTable table;
  table.probs.resize(n, arms);
  table.weights.resize(n, arms);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd e = model.probs(frame.z(i), alpha);
    table.min_propensity = std::min(table.min_propensity, e.minCoeff());
    if (policy.propensity_floor > 0.0) {
      bool clipped = false;
      for (int h = 0; h < arms; ++h) {
        if (e[h] < policy.propensity_floor) {
          e[h] = policy.propensity_floor;
          clipped = true;
        }
      }
      if (clipped) ++table.floored_records;
    }
    table.probs.row(i) = e;
    table.weights.row(i) = target_weights(e, d);
  }
  if (table.floored_records > 0) {
    std::cerr << "warning: propensity floor " << policy.propensity_floor
              << " touched " << table.floored_records << " of " << n
              << " records; criteria are biased under clipping\n";
  }
  return table;
}

FitResult fit_propensity(const TreatmentFrame& frame,
                         const PropensityModel& model,
                         const NewtonOptions& options) {
  if (model.arms() != frame.arms())
    throw ConfigError("propensity fit: arm count mismatch");
  const auto counts = frame.arm_counts();
  for (int h = 0; h < frame.arms(); ++h) {
    if (counts[h] == 0)
      throw DataError("propensity fit: arm " + std::to_string(h + 1) +
                      " has no records");
  }
  const int n = frame.size();
  const int q = model.param_dim();
  const int m = model.design_dim();

  auto residual = [&](const Eigen::VectorXd& alpha) {
    Eigen::VectorXd score = Eigen::VectorXd::Zero(q);
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd v = model.design(frame.z(i));
      const Eigen::VectorXd e = model.probs(frame.z(i), alpha);
      const int a = frame.arm(i);
      // score block j: (1[a=j] - e_j) (1,z)
      for (int j = 0; j < frame.arms() - 1; ++j)
        score.segment(j * m, m) += ((a == j ? 1.0 : 0.0) - e[j]) * v;
    }
    return Eigen::VectorXd(score / n);
  };
  auto jacobian = [&](const Eigen::VectorXd& alpha) {
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(q, q);
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd e = model.probs(frame.z(i), alpha);
      hess -= model.loglik_neg_hessian(frame.z(i), e);
    }
    return Eigen::MatrixXd(hess / n);
  };
  auto describe = [&](const Eigen::VectorXd& alpha) {
    int worst = 0;
    double worst_norm = 0.0;
    for (int j = 0; j < frame.arms() - 1; ++j) {
      const double norm = alpha.segment(j * m, m).lpNorm<Eigen::Infinity>();
      if (norm > worst_norm) {
        worst_norm = norm;
        worst = j;
      }
    }
    return "possible separation, arm " + std::to_string(worst + 1) +
           " coefficients runaway";
  };

  FitResult fit = newton_solve(residual, jacobian, Eigen::VectorXd::Zero(q),
                               options, "propensity fit", describe);
  fit.observed_information *= n;  // information of the full sample
  return fit;
}

FitResult fit_outcome_conditional(const TreatmentFrame& frame,
                                  const OutcomeConditionalFamily& conditional,
                                  const NewtonOptions& options) {
  if (conditional.arms() != frame.arms())
    throw ConfigError("conditional fit: arm count mismatch");
  const auto counts = frame.arm_counts();
  for (int h = 0; h < frame.arms(); ++h) {
    if (counts[h] == 0)
      throw DataError("conditional fit: arm " + std::to_string(h + 1) +
                      " has no records");
  }
  const int n = frame.size();
  const int r = conditional.param_dim();
  const int m = conditional.design_dim();

  auto residual = [&](const Eigen::VectorXd& beta) {
    Eigen::VectorXd score = Eigen::VectorXd::Zero(r);
    for (int i = 0; i < n; ++i)
      score += conditional.dlogp_dbeta(frame.arm(i), frame.y(i), frame.z(i), beta);
    return Eigen::VectorXd(score / n);
  };
  auto jacobian = [&](const Eigen::VectorXd& beta) {
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(r, r);
    for (int i = 0; i < n; ++i)
      hess += conditional.d2logp_dbeta2(frame.arm(i), frame.y(i), frame.z(i), beta);
    return Eigen::MatrixXd(hess / n);
  };
  auto describe = [&](const Eigen::VectorXd& beta) {
    int worst = 0;
    double worst_norm = 0.0;
    for (int h = 0; h < frame.arms(); ++h) {
      const double norm = beta.segment(h * m, m).lpNorm<Eigen::Infinity>();
      if (norm > worst_norm) {
        worst_norm = norm;
        worst = h;
      }
    }
    return "possible separation, arm " + std::to_string(worst + 1) +
           " coefficients runaway";
  };

  FitResult fit = newton_solve(residual, jacobian, Eigen::VectorXd::Zero(r),
                               options, "conditional fit", describe);
  fit.observed_information *= n;
  return fit;
}

namespace {

// Weighted score system shared by the unweighted and IPW fits; weights are a
// per-record multiplier on the assigned arm's loss derivatives.
FitResult solve_weighted_score(const TreatmentFrame& frame,
                               const OutcomeMarginalFamily& family,
                               const Eigen::VectorXd& record_weight,
                               const NewtonOptions& options,
                               const std::string& label,
                               const Eigen::VectorXd* init = nullptr) {
  const int n = frame.size();
  const int p = frame.dim_x();
  auto residual = [&](const Eigen::VectorXd& theta) {
    Eigen::VectorXd score = Eigen::VectorXd::Zero(p);
    for (int i = 0; i < n; ++i) {
      const int a = frame.arm(i);
      score +=
          record_weight[i] * family.loss_score(frame.y(i), frame.x(i, a), theta);
    }
    return Eigen::VectorXd(score / n);
  };
  auto jacobian = [&](const Eigen::VectorXd& theta) {
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(p, p);
    for (int i = 0; i < n; ++i) {
      const int a = frame.arm(i);
      hess += record_weight[i] *
              family.loss_hessian(frame.y(i), frame.x(i, a), theta);
    }
    return Eigen::MatrixXd(hess / n);
  };
  const Eigen::VectorXd start = init ? *init : Eigen::VectorXd::Zero(p);
  FitResult fit = newton_solve(residual, jacobian, start, options, label);
  fit.observed_information *= n;
  return fit;
}

}  // namespace

FitResult solve_unweighted(const TreatmentFrame& frame,
                           const OutcomeMarginalFamily& family,
                           const NewtonOptions& options) {
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(frame.size());
  if (family.loss().kind == LossKind::DensityPower) {
    // the robust loss redescends, so far-off starts can sit on a flat spot;
    // seed it from the log-likelihood solution
    const OutcomeMarginalFamily loglik(family.kind(), {}, family.variance());
    const Eigen::VectorXd start =
        solve_weighted_score(frame, loglik, ones, options, "unweighted fit")
            .params;
    return solve_weighted_score(frame, family, ones, options, "unweighted fit",
                                &start);
  }
  return solve_weighted_score(frame, family, ones, options, "unweighted fit");
}

FitResult solve_ipw(const TreatmentFrame& frame,
                    const OutcomeMarginalFamily& family,
                    const PropensityModel& model, const Eigen::VectorXd& alpha,
                    const TargetPopulation& d, const WeightPolicy& policy,
                    const NewtonOptions& options) {
  const WeightTable table = compute_weights(frame, model, alpha, d, policy);
  Eigen::VectorXd w(frame.size());
  for (int i = 0; i < frame.size(); ++i) w[i] = table.weights(i, frame.arm(i));
  const FitResult start = solve_unweighted(frame, family, options);
  return solve_weighted_score(frame, family, w, options, "ipw fit",
                              &start.params);
}

namespace {

struct DrRecordContext {
  int arm;
  double weight;        // w^(a)(z_i)
  double d_assigned;    // d^(a)
  Eigen::VectorXd probs;
};

DrRecordContext dr_context(const TreatmentFrame& frame, int i,
                           const PropensityModel& model,
                           const Eigen::VectorXd& alpha,
                           const TargetPopulation& d,
                           const WeightPolicy& policy) {
  DrRecordContext ctx;
  ctx.arm = frame.arm(i);
  Eigen::VectorXd e = model.probs(frame.z(i), alpha);
  if (policy.propensity_floor > 0.0)
    e = e.cwiseMax(policy.propensity_floor);
  ctx.probs = e;
  const Eigen::VectorXd w = target_weights(e, d);
  ctx.weight = w[ctx.arm];
  ctx.d_assigned = d.d()[ctx.arm];
  return ctx;
}

}  // namespace

Eigen::VectorXd dr_moment_value(const TreatmentFrame& frame, int i,
                                const OutcomeMarginalFamily& family,
                                const PropensityModel& model,
                                const Eigen::VectorXd& alpha,
                                const OutcomeConditionalFamily& conditional,
                                const Eigen::VectorXd& beta,
                                const Eigen::VectorXd& theta,
                                const TargetPopulation& d,
                                const WeightPolicy& policy) {
  const DrRecordContext ctx = dr_context(frame, i, model, alpha, d, policy);
  Eigen::VectorXd value =
      ctx.weight * family.loss_score(frame.y(i), frame.x(i, ctx.arm), theta);
  for (int h = 0; h < frame.arms(); ++h) {
    const double coef = ctx.d_assigned - (h == ctx.arm ? ctx.weight : 0.0);
    if (coef != 0.0)
      value += coef * conditional.g_grad_theta(family, h, frame.x(i, h),
                                               frame.z(i), theta, beta);
  }
  return value;
}

Eigen::MatrixXd dr_moment_dalpha(const TreatmentFrame& frame, int i,
                                 const OutcomeMarginalFamily& family,
                                 const PropensityModel& model,
                                 const Eigen::VectorXd& alpha,
                                 const OutcomeConditionalFamily& conditional,
                                 const Eigen::VectorXd& beta,
                                 const Eigen::VectorXd& theta,
                                 const TargetPopulation& d,
                                 const WeightPolicy& policy) {
  const DrRecordContext ctx = dr_context(frame, i, model, alpha, d, policy);
  // only the assigned arm's weight derivative survives the t indicator
  const Eigen::MatrixXd dw =
      dweights_dalpha(model, frame.z(i), ctx.probs, d);
  const Eigen::VectorXd score =
      family.loss_score(frame.y(i), frame.x(i, ctx.arm), theta);
  const Eigen::VectorXd ggrad = conditional.g_grad_theta(
      family, ctx.arm, frame.x(i, ctx.arm), frame.z(i), theta, beta);
  return (score - ggrad) * dw.row(ctx.arm);
}

Eigen::MatrixXd dr_moment_dbeta(const TreatmentFrame& frame, int i,
                                const OutcomeMarginalFamily& family,
                                const PropensityModel& model,
                                const Eigen::VectorXd& alpha,
                                const OutcomeConditionalFamily& conditional,
                                const Eigen::VectorXd& beta,
                                const Eigen::VectorXd& theta,
                                const TargetPopulation& d,
                                const WeightPolicy& policy) {
  const DrRecordContext ctx = dr_context(frame, i, model, alpha, d, policy);
  Eigen::MatrixXd out =
      Eigen::MatrixXd::Zero(frame.dim_x(), conditional.param_dim());
  for (int h = 0; h < frame.arms(); ++h) {
    const double coef = ctx.d_assigned - (h == ctx.arm ? ctx.weight : 0.0);
    if (coef != 0.0)
      out += coef * conditional.g_cross_theta_beta(family, h, frame.x(i, h),
                                                   frame.z(i), theta, beta);
  }
  return out;
}

FitResult solve_dr(const TreatmentFrame& frame,
                   const OutcomeMarginalFamily& family,
                   const PropensityModel& model, const Eigen::VectorXd& alpha,
                   const OutcomeConditionalFamily& conditional,
                   const Eigen::VectorXd& beta, const TargetPopulation& d,
                   const WeightPolicy& policy, const NewtonOptions& options) {
  if (conditional.arms() != frame.arms())
    throw ConfigError("dr fit: conditional family arm count mismatch");
  const WeightTable table = compute_weights(frame, model, alpha, d, policy);
  const int n = frame.size();
  const int p = frame.dim_x();

  auto residual = [&](const Eigen::VectorXd& theta) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(p);
    for (int i = 0; i < n; ++i) {
      const int a = frame.arm(i);
      const double w = table.weights(i, a);
      const double da = d.d()[a];
      acc += w * family.loss_score(frame.y(i), frame.x(i, a), theta);
      for (int h = 0; h < frame.arms(); ++h) {
        const double coef = da - (h == a ? w : 0.0);
        if (coef != 0.0)
          acc += coef * conditional.g_grad_theta(family, h, frame.x(i, h),
                                                 frame.z(i), theta, beta);
      }
    }
    return Eigen::VectorXd(acc / n);
  };
  auto jacobian = [&](const Eigen::VectorXd& theta) {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(p, p);
    for (int i = 0; i < n; ++i) {
      const int a = frame.arm(i);
      const double w = table.weights(i, a);
      const double da = d.d()[a];
      acc += w * family.loss_hessian(frame.y(i), frame.x(i, a), theta);
      for (int h = 0; h < frame.arms(); ++h) {
        const double coef = da - (h == a ? w : 0.0);
        if (coef != 0.0)
          acc += coef * conditional.g_hess_theta(family, h, frame.x(i, h),
                                                 frame.z(i), theta, beta);
      }
    }
    return Eigen::MatrixXd(acc / n);
  };

  const FitResult start = solve_unweighted(frame, family, options);
  FitResult fit = newton_solve(residual, jacobian, start.params, options,
                               "dr fit");
  fit.observed_information *= n;
  return fit;
}

}  // namespace msmic
