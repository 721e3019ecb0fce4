#include "bahop/gp.hpp"

#include <cmath>
#include <numbers>

#include "bahop/errors.hpp"

namespace bahop {

double GaussianProcess::kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
  return std::exp(-(a - b).squaredNorm() / (2.0 * length_scale_ * length_scale_));
}

void GaussianProcess::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const Eigen::Index n = x.rows();
  if (n == 0 || y.size() != n) throw NumericalError("gp: empty or mismatched training data");
  x_ = x;
  y_mean_ = y.mean();
  const double var = (y.array() - y_mean_).square().sum() / static_cast<double>(n);
  y_scale_ = var > 0.0 ? std::sqrt(var) : 1.0;
  const Eigen::VectorXd ys = (y.array() - y_mean_) / y_scale_;

  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      k(i, j) = k(j, i) = kernel(x_.row(i).transpose(), x_.row(j).transpose());
    }
  }
  double jitter = noise_;
  for (retries_ = 0; retries_ <= 3; ++retries_) {
    Eigen::MatrixXd kj = k;
    kj.diagonal().array() += jitter;
    llt_.compute(kj);
    if (llt_.info() == Eigen::Success) {
      alpha_ = llt_.solve(ys);
      return;
    }
    jitter *= 100.0;
  }
  throw NumericalError("gp: kernel matrix not positive definite after 3 jitter retries");
}

GaussianProcess::Prediction GaussianProcess::predict(const Eigen::VectorXd& x) const {
  Eigen::VectorXd ks(x_.rows());
  for (Eigen::Index i = 0; i < x_.rows(); ++i) ks(i) = kernel(x_.row(i).transpose(), x);
  const double mean = ks.dot(alpha_);
  const Eigen::VectorXd v = llt_.matrixL().solve(ks);
  const double var = std::max(0.0, 1.0 - v.squaredNorm());
  return {y_mean_ + y_scale_ * mean, y_scale_ * std::sqrt(var)};
}

double expected_improvement(double mean, double stddev, double best) {
  const double gain = mean - best;
  if (stddev <= 1e-12) return std::max(gain, 0.0);
  const double z = gain / stddev;
  const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  return gain * cdf + stddev * pdf;
}

}  // namespace bahop
