#include "msmic/frame.hpp"

#include <cmath>
#include <string>

namespace msmic {

TreatmentFrame::TreatmentFrame(Eigen::VectorXd y, std::vector<int> arm,
                               std::vector<Eigen::MatrixXd> x_by_arm,
                               Eigen::MatrixXd z)
    : y_(std::move(y)),
      arm_(std::move(arm)),
      x_by_arm_(std::move(x_by_arm)),
      z_(std::move(z)) {
  const int n = static_cast<int>(y_.size());
  arms_ = static_cast<int>(x_by_arm_.size());
  if (arms_ < 1) throw ConfigError("frame: need at least one arm");
  dim_x_ = static_cast<int>(x_by_arm_[0].cols());
  dim_z_ = static_cast<int>(z_.cols());
  if (static_cast<int>(arm_.size()) != n)
    throw DataError("frame: outcome and assignment lengths differ");
  if (z_.rows() != n) throw DataError("frame: confounder row count mismatch");
  for (int h = 0; h < arms_; ++h) {
    if (x_by_arm_[h].rows() != n || x_by_arm_[h].cols() != dim_x_)
      throw DataError("frame: regressor matrix shape mismatch at arm " +
                      std::to_string(h + 1));
  }
  for (int i = 0; i < n; ++i) {
    if (arm_[i] < 0 || arm_[i] >= arms_)
      throw DataError("frame: assignment out of range at row " +
                      std::to_string(i + 1));
    if (!std::isfinite(y_[i]))
      throw DataError("frame: non-finite outcome at row " + std::to_string(i + 1));
  }
}

SampleRecord TreatmentFrame::record(int i) const {
  SampleRecord r;
  r.y = y_[i];
  r.t = Eigen::VectorXd::Zero(arms_);
  r.t[arm_[i]] = 1.0;
  r.x.reserve(arms_);
  for (int h = 0; h < arms_; ++h) r.x.push_back(x(i, h));
  r.z = z(i);
  return r;
}

std::vector<int> TreatmentFrame::arm_counts() const {
  std::vector<int> counts(arms_, 0);
  for (int a : arm_) ++counts[a];
  return counts;
}

bool TreatmentFrame::shared_regressors() const {
  for (int h = 1; h < arms_; ++h) {
    if (x_by_arm_[h] != x_by_arm_[0]) return false;
  }
  return true;
}

TreatmentFrame TreatmentFrame::select_regressors(
    const std::vector<int>& cols) const {
  if (cols.empty()) throw ConfigError("frame: empty regressor selection");
  std::vector<Eigen::MatrixXd> sub(arms_);
  for (int h = 0; h < arms_; ++h) {
    sub[h].resize(size(), static_cast<int>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
      if (cols[j] < 0 || cols[j] >= dim_x_)
        throw ConfigError("frame: regressor column " + std::to_string(cols[j]) +
                          " out of range");
      sub[h].col(static_cast<int>(j)) = x_by_arm_[h].col(cols[j]);
    }
  }
  return TreatmentFrame(y_, arm_, std::move(sub), z_);
}

TargetPopulation::TargetPopulation(Eigen::VectorXd d) : d_(std::move(d)) {
  if (d_.size() < 1) throw ConfigError("target population: empty weight vector");
  bool any_positive = false;
  for (int k = 0; k < d_.size(); ++k) {
    if (!(d_[k] >= 0.0))
      throw ConfigError("target population: weights must be nonnegative");
    if (d_[k] > 0.0) any_positive = true;
  }
  if (!any_positive)
    throw ConfigError("target population: at least one weight must be positive");
}

ContrastSpec::ContrastSpec(Eigen::VectorXd c) : c_(std::move(c)) {
  if (c_.size() < 2) throw ConfigError("contrast: need at least two arms");
  if (c_.sum() != 0.0) throw ConfigError("contrast: coefficients must sum to zero");
  if (c_.cwiseAbs().maxCoeff() == 0.0) throw ConfigError("contrast: all zero");
}

}  // namespace msmic
