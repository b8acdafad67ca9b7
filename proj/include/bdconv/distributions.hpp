#pragma once

#include <functional>

#include "bdconv/rng.hpp"
#include "bdconv/types.hpp"

namespace bdconv {

struct GaussianPosteriorParams {
  Vector mean;
  Matrix covariance;
};

struct SliceSamplerConfig {
  double initial_width = 1.0;
  int max_stepout = 50;
  int max_shrink = 100;

  void validate() const;
};

// Draws from N(mean, covariance). If the Cholesky factorization fails, a
// ridge eps * trace/dim * I is added with eps escalating from 1e-12 to 1e-8
// over four retries before NumericalFailure is thrown.
Vector sample_mv_gaussian(const GaussianPosteriorParams& params, Rng& rng);

// Gamma in the rate parameterization: density ~ x^(shape-1) exp(-rate x).
double sample_gamma(double shape, double rate, Rng& rng);

// Inverse gamma with density ~ x^-(alpha+1) exp(-beta / x).
double sample_inverse_gamma(double alpha, double beta, Rng& rng);

// Log of the Student-t marginal of x when x | s ~ N(0, s), s ~ IG(alpha, beta).
double log_t_marginal(double x, double alpha_x, double beta_x);

double log_ig_density(double x, double alpha, double beta);
double log_gamma_density(double x, double shape, double rate);
double log_gaussian_density(double x, double mean, double var);

using LogDensity = std::function<double(double)>;

// One stepping-out / shrinkage slice sampling update (Neal 2003).
double slice_sample(const LogDensity& log_density, double current,
                    const SliceSamplerConfig& config, Rng& rng);

// Slice update of a positive variable carried out on u = log(value); the
// log-Jacobian u is added to the target.
double slice_sample_log_scale(const LogDensity& log_density, double current,
                              const SliceSamplerConfig& config, Rng& rng);

// Gaussian given in information form, N(P^-1 b, P^-1), factored once so the
// same factor serves the mean, the draw and the log-determinant.
class PrecisionGaussian {
 public:
  PrecisionGaussian(const Matrix& precision, const Vector& linear);

  const Vector& mean() const noexcept { return mean_; }
  Matrix covariance() const;
  // log |P|
  double log_det_precision() const;
  // b^T P^-1 b
  double quadratic() const { return linear_.dot(mean_); }
  Vector sample(Rng& rng) const;

 private:
  Eigen::LLT<Matrix> llt_;
  Vector linear_;
  Vector mean_;
};

// Symmetric positive-definite band matrix stored as lower diagonals:
// band(d, j) holds A(j + d, j) for d = 0..bandwidth.
class BandedCholesky {
 public:
  BandedCholesky(Matrix band);

  Index size() const noexcept { return factor_.cols(); }
  Index bandwidth() const noexcept { return factor_.rows() - 1; }
  double log_det() const;
  // Solves L z = b, then L^T z = b.
  Vector solve_lower(const Vector& b) const;
  Vector solve_upper(const Vector& b) const;
  Vector solve(const Vector& b) const { return solve_upper(solve_lower(b)); }

 private:
  Matrix factor_;
};

}  // namespace bdconv
