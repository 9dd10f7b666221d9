#include "msmic/newton.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace msmic {

namespace {

std::string format_vector(const Eigen::VectorXd& v) {
  std::ostringstream os;
  os << "[";
  for (int i = 0; i < v.size(); ++i) {
    if (i) os << ", ";
    os << v[i];
  }
  os << "]";
  return os.str();
}

}  // namespace

FitResult newton_solve(const ResidualFn& residual, const JacobianFn& jacobian,
                       Eigen::VectorXd init, const NewtonOptions& options,
                       const std::string& label,
                       const DivergenceLabelFn& describe) {
  FitResult fit;
  if (init.size() == 0) {
    // zero-parameter system (e.g. one-arm propensity): trivially solved
    fit.params = init;
    fit.converged = true;
    fit.observed_information.resize(0, 0);
    return fit;
  }

  Eigen::VectorXd x = std::move(init);
  Eigen::VectorXd g = residual(x);
  double gnorm = g.lpNorm<Eigen::Infinity>();

  for (int iter = 0; iter < options.max_iter; ++iter) {
    if (!std::isfinite(gnorm))
      throw FitError(label + ": non-finite estimating equation");
    if (gnorm <= options.tol) {
      fit.params = x;
      fit.converged = true;
      fit.iterations = iter;
      fit.grad_norm = gnorm;
      fit.observed_information = -jacobian(x);
      return fit;
    }

    const Eigen::MatrixXd jac = jacobian(x);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    if (!lu.isInvertible()) {
      const Eigen::MatrixXd kernel = lu.kernel();
      throw FitError(label + ": singular system, null direction " +
                     format_vector(kernel.col(0).normalized()));
    }
    const Eigen::VectorXd delta = lu.solve(-g);

    double step = 1.0;
    Eigen::VectorXd x_next;
    Eigen::VectorXd g_next;
    double gnorm_next = gnorm;
    bool improved = false;
    for (int halving = 0; halving <= options.max_halvings; ++halving) {
      x_next = x + step * delta;
      g_next = residual(x_next);
      gnorm_next = g_next.lpNorm<Eigen::Infinity>();
      if (std::isfinite(gnorm_next) && gnorm_next < gnorm) {
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) {
      // full precision reached: accept if already essentially at a root
      if (std::isfinite(gnorm_next) && gnorm_next <= options.tol) {
        x = x_next;
        g = g_next;
        gnorm = gnorm_next;
        continue;
      }
      throw FitError(label + ": line search stalled at residual norm " +
                     std::to_string(gnorm));
    }
    x = x_next;
    g = g_next;
    gnorm = gnorm_next;

    if (x.lpNorm<Eigen::Infinity>() > options.param_bound) {
      std::string msg = label + ": parameters diverging (norm > " +
                        std::to_string(options.param_bound) + ")";
      if (describe) msg += "; " + describe(x);
      throw FitError(msg);
    }
  }

  if (gnorm <= options.tol) {
    fit.params = x;
    fit.converged = true;
    fit.iterations = options.max_iter;
    fit.grad_norm = gnorm;
    fit.observed_information = -jacobian(x);
    return fit;
  }
  throw FitError(label + ": no convergence after " +
                 std::to_string(options.max_iter) +
                 " iterations, residual norm " + std::to_string(gnorm));
}

double condition_number(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 1.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const double smax = svd.singularValues()(0);
  const double smin = svd.singularValues()(svd.singularValues().size() - 1);
  if (smin <= 0.0) return std::numeric_limits<double>::infinity();
  return smax / smin;
}

Eigen::MatrixXd inverse_checked(const Eigen::MatrixXd& m, const std::string& name,
                                double cond_limit) {
  if (m.rows() != m.cols()) throw FitError(name + ": not square");
  if (m.size() == 0) return m;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  const double cond =
      smin > 0.0 ? sv(0) / smin : std::numeric_limits<double>::infinity();
  if (!(cond <= cond_limit)) {
    std::ostringstream os;
    os << name << ": ill-conditioned (cond = " << cond << " > " << cond_limit
       << ")";
    throw FitError(os.str());
  }
  return svd.matrixV() * sv.cwiseInverse().asDiagonal() *
         svd.matrixU().transpose();
}

}  // namespace msmic
