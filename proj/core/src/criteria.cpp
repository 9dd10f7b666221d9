#include "msmic/criteria.hpp"

#include <cmath>

#include "msmic/newton.hpp"

namespace msmic {

std::string criterion_name(CriterionKind kind) {
  switch (kind) {
    case CriterionKind::QICW: return "QICw";
    case CriterionKind::IPWIC1: return "IPWIC1";
    case CriterionKind::IPWIC2: return "IPWIC2";
    case CriterionKind::DRIC: return "DRIC";
    case CriterionKind::CBIC: return "CB-IC";
    case CriterionKind::ObsWeightIC: return "ObsWeightIC";
  }
  return "?";
}

namespace {

double weighted_loss_sum(const TreatmentFrame& frame,
                         const OutcomeMarginalFamily& family,
                         const WeightTable& table, const Eigen::VectorXd& theta) {
  double acc = 0.0;
  for (int i = 0; i < frame.size(); ++i) {
    const int a = frame.arm(i);
    acc += table.weights(i, a) *
           family.loss_value(frame.y(i), frame.x(i, a), theta);
  }
  return acc;
}

}  // namespace

PenaltyMatrices penalty_matrices_ipw(const TreatmentFrame& frame,
                                     const OutcomeMarginalFamily& family,
                                     const PropensityModel& model,
                                     const Eigen::VectorXd& theta,
                                     const Eigen::VectorXd& alpha,
                                     const TargetPopulation& d, bool alpha_known,
                                     const WeightPolicy& policy) {
  const int n = frame.size();
  const int p = frame.dim_x();
  const int q = model.param_dim();
  const WeightTable table = compute_weights(frame, model, alpha, d, policy);

  PenaltyMatrices m;
  m.A = Eigen::MatrixXd::Zero(p, p);
  m.B = Eigen::MatrixXd::Zero(p, p);
  const bool nuisance = !alpha_known && q > 0;
  m.I1 = Eigen::MatrixXd::Zero(q, q);
  m.Lambda1 = Eigen::MatrixXd::Zero(q, p);
  m.Lambda2 = Eigen::MatrixXd::Zero(p, q);

  for (int i = 0; i < n; ++i) {
    const int a = frame.arm(i);
    const double w = table.weights(i, a);
    const Eigen::VectorXd x = frame.x(i, a);
    const Eigen::VectorXd score = family.loss_score(frame.y(i), x, theta);
    m.A -= w * family.loss_hessian(frame.y(i), x, theta);
    m.B += (w * w) * (score * score.transpose());
    if (nuisance) {
      const Eigen::VectorXd e = table.probs.row(i);
      const Eigen::MatrixXd dlog = model.dlogprobs_dalpha(frame.z(i), e);
      m.I1 += dlog.row(a).transpose() * dlog.row(a);
      const Eigen::MatrixXd dw = dweights_dalpha(model, frame.z(i), e, d);
      m.Lambda1 -= dw.row(a).transpose() * score.transpose();
      const Eigen::MatrixXd dprob = model.dprobs_dalpha(frame.z(i), e);
      m.Lambda2 += (w / e[a]) * score * dprob.row(a);
    }
  }
  m.A /= n;
  m.B /= n;
  if (nuisance) {
    m.I1 /= n;
    m.Lambda1 /= n;
    m.Lambda2 /= n;
  }
  return m;
}

namespace {

CriterionReport ipw_report(CriterionKind kind, const TreatmentFrame& frame,
                           const OutcomeMarginalFamily& family,
                           const PropensityModel& model,
                           const Eigen::VectorXd& theta,
                           const Eigen::VectorXd& alpha,
                           const TargetPopulation& d, bool alpha_known,
                           const WeightPolicy& policy) {
  CriterionReport report;
  report.kind = kind;
  const WeightTable table = compute_weights(frame, model, alpha, d, policy);
  report.fit_term = -2.0 * weighted_loss_sum(frame, family, table, theta);
  report.matrices =
      penalty_matrices_ipw(frame, family, model, theta, alpha, d, alpha_known,
                           policy);
  report.diagnostics.min_propensity = table.min_propensity;
  report.diagnostics.floored_records = table.floored_records;
  report.diagnostics.cond_A = condition_number(report.matrices.A);

  if (kind == CriterionKind::QICW) {
    report.penalty = 2.0 * frame.dim_x();
  } else {
    const Eigen::MatrixXd a_inv = inverse_checked(report.matrices.A, "A");
    double trace = (a_inv * report.matrices.B).trace();
    if (!alpha_known && model.param_dim() > 0) {
      // estimated nuisance shrinks the sandwich: A^-1 (B - L2 I1^-1 L1)
      const Eigen::MatrixXd i1_inv = inverse_checked(report.matrices.I1, "I1");
      trace -= (a_inv * report.matrices.Lambda2 * i1_inv *
                report.matrices.Lambda1)
                   .trace();
    }
    report.penalty = 2.0 * trace;
  }
  report.value = report.fit_term + report.penalty;
  return report;
}

}  // namespace

CriterionReport ipwic(const TreatmentFrame& frame,
                      const OutcomeMarginalFamily& family,
                      const PropensityModel& model, const Eigen::VectorXd& theta,
                      const Eigen::VectorXd& alpha, const TargetPopulation& d,
                      bool alpha_known, const WeightPolicy& policy) {
  return ipw_report(alpha_known ? CriterionKind::IPWIC1 : CriterionKind::IPWIC2,
                    frame, family, model, theta, alpha, d, alpha_known, policy);
}

CriterionReport qicw(const TreatmentFrame& frame,
                     const OutcomeMarginalFamily& family,
                     const PropensityModel& model, const Eigen::VectorXd& theta,
                     const Eigen::VectorXd& alpha, const TargetPopulation& d,
                     const WeightPolicy& policy) {
  return ipw_report(CriterionKind::QICW, frame, family, model, theta, alpha, d,
                    /*alpha_known=*/true, policy);
}

CriterionReport observed_weight_variant(const TreatmentFrame& frame,
                                        const OutcomeMarginalFamily& family,
                                        const PropensityModel& model,
                                        const Eigen::VectorXd& theta,
                                        const Eigen::VectorXd& alpha,
                                        const TargetPopulation& d,
                                        const WeightPolicy& policy) {
  CriterionReport report;
  report.kind = CriterionKind::ObsWeightIC;
  const int n = frame.size();
  const int p = frame.dim_x();
  const WeightTable table = compute_weights(frame, model, alpha, d, policy);

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(p, p);
  double loss_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const int a_i = frame.arm(i);
    const double w = table.weights(i, a_i);
    const double e = table.probs(i, a_i);
    const Eigen::VectorXd x = frame.x(i, a_i);
    const Eigen::VectorXd score = family.loss_score(frame.y(i), x, theta);
    // criterion weight sum_k d^(k) e^(k) = e^(a) w^(a)
    loss_sum += (w * e) * family.loss_value(frame.y(i), x, theta);
    a -= w * family.loss_hessian(frame.y(i), x, theta);
    // B without the inverse-propensity factor: t w^2 e (score)(score)'
    b += (w * w * e) * (score * score.transpose());
  }
  a /= n;
  b /= n;

  report.fit_term = -2.0 * loss_sum;
  report.matrices.A = a;
  report.matrices.B = b;
  report.diagnostics.min_propensity = table.min_propensity;
  report.diagnostics.floored_records = table.floored_records;
  report.diagnostics.cond_A = condition_number(a);
  report.penalty = 2.0 * (inverse_checked(a, "A") * b).trace();
  report.value = report.fit_term + report.penalty;
  return report;
}

PenaltyMatrices penalty_matrices_dr(const TreatmentFrame& frame,
                                    const OutcomeMarginalFamily& family,
                                    const PropensityModel& model,
                                    const Eigen::VectorXd& alpha,
                                    const OutcomeConditionalFamily& conditional,
                                    const Eigen::VectorXd& beta,
                                    const Eigen::VectorXd& theta,
                                    const TargetPopulation& d,
                                    const WeightPolicy& policy) {
  const int n = frame.size();
  const int p = frame.dim_x();
  const int q = model.param_dim();
  const int r = conditional.param_dim();
  const int arms = frame.arms();
  const WeightTable table = compute_weights(frame, model, alpha, d, policy);

  PenaltyMatrices m;
  m.A = Eigen::MatrixXd::Zero(p, p);
  m.B = Eigen::MatrixXd::Zero(p, p);
  m.I1 = Eigen::MatrixXd::Zero(q, q);
  m.I2 = Eigen::MatrixXd::Zero(r, r);
  m.D1 = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd m_alpha = Eigen::MatrixXd::Zero(p, q);  // (1/N) sum dm/dalpha'
  Eigen::MatrixXd m_beta = Eigen::MatrixXd::Zero(p, r);   // (1/N) sum dm/dbeta'
  Eigen::MatrixXd k1 = Eigen::MatrixXd::Zero(q, p);  // (1/N) sum t w (dlog e)(score)'
  Eigen::MatrixXd k2 = Eigen::MatrixXd::Zero(r, p);  // (1/N) sum t w (dlog p)(score)'

  for (int i = 0; i < n; ++i) {
    const int a = frame.arm(i);
    const double w = table.weights(i, a);
    const double da = d.d()[a];
    const Eigen::VectorXd e = table.probs.row(i);
    const Eigen::VectorXd x_a = frame.x(i, a);
    const Eigen::VectorXd score = family.loss_score(frame.y(i), x_a, theta);

    m.A -= w * family.loss_hessian(frame.y(i), x_a, theta);
    m.B += (w * w) * (score * score.transpose());

    Eigen::VectorXd g_sum = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd g_assigned = Eigen::VectorXd::Zero(p);
    for (int h = 0; h < arms; ++h) {
      const Eigen::VectorXd grad = conditional.g_grad_theta(
          family, h, frame.x(i, h), frame.z(i), theta, beta);
      g_sum += grad;
      if (h == a) g_assigned = grad;
      const double coef = da - (h == a ? w : 0.0);
      if (coef != 0.0 && r > 0)
        m_beta += coef * conditional.g_cross_theta_beta(
                             family, h, frame.x(i, h), frame.z(i), theta, beta);
    }
    m.D1 += (w * g_sum - (w * w) * g_assigned) * score.transpose();

    if (q > 0) {
      const Eigen::MatrixXd dlog = model.dlogprobs_dalpha(frame.z(i), e);
      m.I1 += dlog.row(a).transpose() * dlog.row(a);
      k1 += w * dlog.row(a).transpose() * score.transpose();
      const Eigen::MatrixXd dw = dweights_dalpha(model, frame.z(i), e, d);
      m_alpha += (score - g_assigned) * dw.row(a);
    }
    if (r > 0) {
      const Eigen::VectorXd dlogp =
          conditional.dlogp_dbeta(a, frame.y(i), frame.z(i), beta);
      m.I2 += dlogp * dlogp.transpose();
      k2 += w * dlogp * score.transpose();
    }
  }
  m.A /= n;
  m.B /= n;
  m.I1 /= n;
  m.I2 /= n;
  m.D1 /= n;
  m_alpha /= n;
  m_beta /= n;
  k1 /= n;
  k2 /= n;

  const Eigen::MatrixXd a_inv = inverse_checked(m.A, "A");
  if (q > 0) {
    const Eigen::MatrixXd i1_inv = inverse_checked(m.I1, "I1");
    m.C1 = a_inv * m_alpha * i1_inv;
    m.D2 = (m.C1 * k1).trace();
  } else {
    m.C1 = Eigen::MatrixXd::Zero(p, 0);
    m.D2 = 0.0;
  }
  if (r > 0) {
    const Eigen::MatrixXd i2_inv = inverse_checked(m.I2, "I2");
    m.C2 = a_inv * m_beta * i2_inv;
    m.D3 = (m.C2 * k2).trace();
  } else {
    m.C2 = Eigen::MatrixXd::Zero(p, 0);
    m.D3 = 0.0;
  }
  return m;
}

CriterionReport dric(const TreatmentFrame& frame,
                     const OutcomeMarginalFamily& family,
                     const PropensityModel& model, const Eigen::VectorXd& alpha,
                     const OutcomeConditionalFamily& conditional,
                     const Eigen::VectorXd& beta, const Eigen::VectorXd& theta,
                     const TargetPopulation& d, const WeightPolicy& policy,
                     DricFitWeight fit_weight) {
  CriterionReport report;
  report.kind = CriterionKind::DRIC;
  const WeightTable table = compute_weights(frame, model, alpha, d, policy);

  double loss_sum = 0.0;
  for (int i = 0; i < frame.size(); ++i) {
    const int a = frame.arm(i);
    const double w = fit_weight == DricFitWeight::TargetWeight
                         ? table.weights(i, a)
                         : 1.0 / table.probs(i, a);
    loss_sum += w * family.loss_value(frame.y(i), frame.x(i, a), theta);
  }
  report.fit_term = -2.0 * loss_sum;
  report.matrices = penalty_matrices_dr(frame, family, model, alpha, conditional,
                                        beta, theta, d, policy);
  report.diagnostics.min_propensity = table.min_propensity;
  report.diagnostics.floored_records = table.floored_records;
  report.diagnostics.cond_A = condition_number(report.matrices.A);

  const Eigen::MatrixXd a_inv = inverse_checked(report.matrices.A, "A");
  const double trace =
      (a_inv * (report.matrices.B + report.matrices.D1)).trace();
  report.penalty = 2.0 * (trace + report.matrices.D2 + report.matrices.D3);
  report.value = report.fit_term + report.penalty;
  return report;
}

}  // namespace msmic
