#pragma once

#include <vector>

#include <Eigen/Dense>

namespace bahop {

/// Zero-mean Gaussian process with an isotropic RBF kernel (unit signal
/// variance) over standardised targets.
class GaussianProcess {
 public:
  GaussianProcess(double length_scale, double noise) : length_scale_(length_scale), noise_(noise) {}

  /// Rows of `x` are inputs. Retries the Cholesky factorisation with growing
  /// diagonal jitter up to 3 times, then throws NumericalError.
  void fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

  struct Prediction {
    double mean;
    double stddev;
  };
  /// Prediction in the original target units.
  Prediction predict(const Eigen::VectorXd& x) const;

  double kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;
  int jitter_retries() const { return retries_; }

 private:
  double length_scale_;
  double noise_;
  Eigen::MatrixXd x_;
  Eigen::VectorXd alpha_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double y_mean_ = 0.0;
  double y_scale_ = 1.0;
  int retries_ = 0;
};

/// Expected improvement of a maximisation target over `best`.
double expected_improvement(double mean, double stddev, double best);

}  // namespace bahop
