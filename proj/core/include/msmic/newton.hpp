#pragma once

#include <functional>
#include <string>

#include <Eigen/Dense>

#include "msmic/errors.hpp"

namespace msmic {

struct FitResult {
  Eigen::VectorXd params;
  bool converged = false;
  int iterations = 0;
  double grad_norm = 0.0;                // sup-norm of the system at params
  Eigen::MatrixXd observed_information;  // negative Jacobian at params
};

struct NewtonOptions {
  int max_iter = 100;
  double tol = 1e-8;        // sup-norm on the estimating equation
  int max_halvings = 40;    // step-halving line search budget
  double param_bound = 1e3; // sup-norm divergence guard (separation etc.)
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using JacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;
// invoked on failure to label what was diverging (e.g. which arm)
using DivergenceLabelFn = std::function<std::string(const Eigen::VectorXd&)>;

// Damped Newton on residual(x) = 0 with jacobian = d residual / d x'. Steps
// are halved until the sup-norm of the residual decreases. Throws FitError on
// nonconvergence, divergence past param_bound, or a singular Jacobian (the
// message carries the null direction). Returned results always satisfy
// grad_norm <= tol.
FitResult newton_solve(const ResidualFn& residual, const JacobianFn& jacobian,
                       Eigen::VectorXd init, const NewtonOptions& options = {},
                       const std::string& label = "newton",
                       const DivergenceLabelFn& describe = nullptr);

// Inverse with a hard conditioning gate: singular values are inspected and
// cond > limit raises FitError carrying the condition number. Used for every
// penalty-matrix inversion so a degenerate candidate fails loudly instead of
// silently pseudo-inverting.
Eigen::MatrixXd inverse_checked(const Eigen::MatrixXd& m, const std::string& name,
                                double cond_limit = 1e10);

double condition_number(const Eigen::MatrixXd& m);

}  // namespace msmic
