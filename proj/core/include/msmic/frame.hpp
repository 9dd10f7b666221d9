#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "msmic/errors.hpp"

namespace msmic {

// One observation materialized row-wise. Columnar storage lives in
// TreatmentFrame; this is the convenience view used at API boundaries.
struct SampleRecord {
  double y = 0.0;                  // observed outcome (assigned arm only)
  Eigen::VectorXd t;               // one-hot assignment over arms
  std::vector<Eigen::VectorXd> x;  // regressors per arm
  Eigen::VectorXd z;               // confounders
};

// N i.i.d. records: observed outcome, assignment, per-arm regressors and
// confounders. Assignment is stored as an arm index, which makes the one-hot
// invariant (exactly one arm assigned) hold by construction; ingestion
// validates raw one-hot columns before reaching this type. Immutable after
// construction and safe to share across threads.
class TreatmentFrame {
 public:
  TreatmentFrame(Eigen::VectorXd y, std::vector<int> arm,
                 std::vector<Eigen::MatrixXd> x_by_arm, Eigen::MatrixXd z);

  int size() const { return static_cast<int>(y_.size()); }
  int arms() const { return arms_; }
  int dim_x() const { return dim_x_; }
  int dim_z() const { return dim_z_; }

  double y(int i) const { return y_[i]; }
  int arm(int i) const { return arm_[i]; }
  double t(int i, int h) const { return arm_[i] == h ? 1.0 : 0.0; }

  Eigen::VectorXd x(int i, int h) const { return x_by_arm_[h].row(i); }
  Eigen::VectorXd z(int i) const { return z_.row(i); }

  const Eigen::VectorXd& outcomes() const { return y_; }
  const std::vector<int>& assignments() const { return arm_; }
  const Eigen::MatrixXd& x_matrix(int h) const { return x_by_arm_[h]; }
  const Eigen::MatrixXd& z_matrix() const { return z_; }

  SampleRecord record(int i) const;

  std::vector<int> arm_counts() const;

  // true when every arm shares the same regressor values record by record
  bool shared_regressors() const;

  // sub-model frame keeping only the given regressor columns (all arms)
  TreatmentFrame select_regressors(const std::vector<int>& cols) const;

 private:
  int arms_ = 0;
  int dim_x_ = 0;
  int dim_z_ = 0;
  Eigen::VectorXd y_;
  std::vector<int> arm_;
  std::vector<Eigen::MatrixXd> x_by_arm_;  // per arm: N x dim_x
  Eigen::MatrixXd z_;                      // N x dim_z
};

// Target-population multipliers d: arm k counts d^(k) times its actual size.
// (1,0)/(0,1) reproduce treated/untreated targets; all-ones is the actual
// population.
class TargetPopulation {
 public:
  explicit TargetPopulation(Eigen::VectorXd d);

  static TargetPopulation uniform(int arms) {
    return TargetPopulation(Eigen::VectorXd::Ones(arms));
  }

  const Eigen::VectorXd& d() const { return d_; }
  int arms() const { return static_cast<int>(d_.size()); }

 private:
  Eigen::VectorXd d_;
};

// Contrast coefficients over arms, summing to zero (validated exactly on
// construction; contrasts are integer-like by convention).
class ContrastSpec {
 public:
  explicit ContrastSpec(Eigen::VectorXd c);

  const Eigen::VectorXd& c() const { return c_; }
  int arms() const { return static_cast<int>(c_.size()); }

 private:
  Eigen::VectorXd c_;
};

}  // namespace msmic
