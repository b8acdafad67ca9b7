#include "bdconv/distributions.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "bdconv/error.hpp"

namespace bdconv {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Eigen::LLT<Matrix> factor_with_jitter(const Matrix& m, const char* who) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() == Eigen::Success) return llt;
  const double scale = m.trace() / static_cast<double>(m.rows());
  for (int k = 0; k < 4; ++k) {
    const double eps = 1e-12 * std::pow(10.0, 4.0 * k / 3.0);
    Matrix jittered = m;
    jittered.diagonal().array() += eps * std::abs(scale);
    llt.compute(jittered);
    if (llt.info() == Eigen::Success) return llt;
  }
  const double smallest = Eigen::SelfAdjointEigenSolver<Matrix>(m, Eigen::EigenvaluesOnly)
                              .eigenvalues()
                              .minCoeff();
  throw NumericalFailure(std::string(who) + ": matrix is not positive definite", smallest);
}

}  // namespace

void SliceSamplerConfig::validate() const {
  if (!(initial_width > 0.0)) throw InvalidArgument("SliceSamplerConfig: initial_width must be positive");
  if (max_stepout < 1 || max_shrink < 1)
    throw InvalidArgument("SliceSamplerConfig: step-out and shrink bounds must be >= 1");
}

Vector sample_mv_gaussian(const GaussianPosteriorParams& params, Rng& rng) {
  const Index d = params.mean.size();
  if (params.covariance.rows() != d || params.covariance.cols() != d)
    throw InvalidArgument("sample_mv_gaussian: covariance dimension mismatch");
  const auto llt = factor_with_jitter(params.covariance, "sample_mv_gaussian");
  Vector z(d);
  for (Index i = 0; i < d; ++i) z[i] = rng.normal();
  return params.mean + llt.matrixL() * z;
}

double sample_gamma(double shape, double rate, Rng& rng) {
  if (!(shape > 0.0) || !(rate > 0.0))
    throw InvalidArgument("sample_gamma: shape and rate must be positive");
  return rng.standard_gamma(shape) / rate;
}

double sample_inverse_gamma(double alpha, double beta, Rng& rng) {
  if (!(alpha > 0.0) || !(beta > 0.0))
    throw InvalidArgument("sample_inverse_gamma: alpha and beta must be positive");
  return beta / rng.standard_gamma(alpha);
}

double log_t_marginal(double x, double alpha_x, double beta_x) {
  if (!(alpha_x > 0.0) || !(beta_x > 0.0))
    throw InvalidArgument("log_t_marginal: alpha_x and beta_x must be positive");
  return alpha_x * std::log(beta_x) - 0.5 * std::log(2.0 * std::numbers::pi) -
         std::lgamma(alpha_x) + std::lgamma(alpha_x + 0.5) -
         (alpha_x + 0.5) * std::log(0.5 * x * x + beta_x);
}

double log_ig_density(double x, double alpha, double beta) {
  if (!(x > 0.0) || !(alpha > 0.0) || !(beta > 0.0)) return kNegInf;
  return alpha * std::log(beta) - std::lgamma(alpha) - (alpha + 1.0) * std::log(x) - beta / x;
}

double log_gamma_density(double x, double shape, double rate) {
  if (!(x > 0.0) || !(shape > 0.0) || !(rate > 0.0)) return kNegInf;
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

double log_gaussian_density(double x, double mean, double var) {
  if (!(var > 0.0)) return kNegInf;
  const double d = x - mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * d * d / var;
}

double slice_sample(const LogDensity& log_density, double current,
                    const SliceSamplerConfig& config, Rng& rng) {
  const double f0 = log_density(current);
  if (!std::isfinite(f0))
    throw InvalidArgument("slice_sample: log density is not finite at the current point");
  const double level = f0 + std::log(rng.uniform());

  const double w = config.initial_width;
  double left = current - w * rng.uniform();
  double right = left + w;
  int steps_left = static_cast<int>(std::floor(config.max_stepout * rng.uniform()));
  int steps_right = config.max_stepout - 1 - steps_left;
  while (steps_left > 0 && log_density(left) > level) {
    left -= w;
    --steps_left;
  }
  while (steps_right > 0 && log_density(right) > level) {
    right += w;
    --steps_right;
  }

  for (int i = 0; i < config.max_shrink; ++i) {
    const double candidate = left + rng.uniform() * (right - left);
    if (log_density(candidate) >= level) return candidate;
    if (candidate < current)
      left = candidate;
    else
      right = candidate;
  }
  throw NumericalFailure("slice_sample: shrinkage did not find a point on the slice");
}

double slice_sample_log_scale(const LogDensity& log_density, double current,
                              const SliceSamplerConfig& config, Rng& rng) {
  if (!(current > 0.0)) throw InvalidArgument("slice_sample_log_scale: current must be positive");
  const auto on_log_scale = [&](double u) {
    const double value = std::exp(u);
    if (!(value > 0.0) || !std::isfinite(value)) return kNegInf;
    return log_density(value) + u;
  };
  return std::exp(slice_sample(on_log_scale, std::log(current), config, rng));
}

PrecisionGaussian::PrecisionGaussian(const Matrix& precision, const Vector& linear)
    : llt_(factor_with_jitter(precision, "PrecisionGaussian")), linear_(linear) {
  if (linear.size() != precision.rows())
    throw InvalidArgument("PrecisionGaussian: dimension mismatch");
  mean_ = llt_.solve(linear_);
}

Matrix PrecisionGaussian::covariance() const {
  return llt_.solve(Matrix::Identity(mean_.size(), mean_.size()));
}

double PrecisionGaussian::log_det_precision() const {
  return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
}

Vector PrecisionGaussian::sample(Rng& rng) const {
  Vector z(mean_.size());
  for (Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  // P = L L^T, so L^-T z has covariance P^-1.
  return mean_ + llt_.matrixU().solve(z);
}

BandedCholesky::BandedCholesky(Matrix band) : factor_(std::move(band)) {
  const Index n = factor_.cols();
  const Index p = factor_.rows() - 1;
  for (Index j = 0; j < n; ++j) {
    double diag = factor_(0, j);
    if (!(diag > 0.0)) throw NumericalFailure("BandedCholesky: matrix is not positive definite", diag);
    diag = std::sqrt(diag);
    factor_(0, j) = diag;
    const Index reach = std::min(p, n - 1 - j);
    factor_.col(j).segment(1, reach) /= diag;
    // Rank-one update of the trailing band.
    for (Index c = 1; c <= reach; ++c) {
      const double lc = factor_(c, j);
      if (lc == 0.0) continue;
      double* __restrict dst = &factor_(0, j + c);
      const double* __restrict src = &factor_(c, j);
      for (Index d = 0; d + c <= reach; ++d) dst[d] -= lc * src[d];
    }
  }
}

double BandedCholesky::log_det() const { return 2.0 * factor_.row(0).array().log().sum(); }

Vector BandedCholesky::solve_lower(const Vector& b) const {
  const Index n = size();
  const Index p = bandwidth();
  Vector z = b;
  for (Index j = 0; j < n; ++j) {
    z[j] /= factor_(0, j);
    const Index reach = std::min(p, n - 1 - j);
    z.segment(j + 1, reach) -= z[j] * factor_.col(j).segment(1, reach);
  }
  return z;
}

Vector BandedCholesky::solve_upper(const Vector& b) const {
  const Index n = size();
  const Index p = bandwidth();
  Vector z = b;
  for (Index j = n - 1; j >= 0; --j) {
    const Index reach = std::min(p, n - 1 - j);
    z[j] = (z[j] - factor_.col(j).segment(1, reach).dot(z.segment(j + 1, reach))) / factor_(0, j);
  }
  return z;
}

}  // namespace bdconv
