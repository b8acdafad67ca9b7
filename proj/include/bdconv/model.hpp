#pragma once

#include "bdconv/types.hpp"

namespace bdconv {

// Gamma(shape, rate) priors on alpha_x and beta_x and an IG(shape, scale)
// prior on sigma_v^2. Zero shape and rate give the improper 1/value prior.
struct Hyperpriors {
  double alpha_shape = 0.0;
  double alpha_rate = 0.0;
  double beta_shape = 0.0;
  double beta_rate = 0.0;
  double sigma_v_shape = 0.0;
  double sigma_v_scale = 0.0;
  void validate() const;
};

// Dimensions and fixed quantities of the convolution model y = X A gamma + v.
// The observation covers the full linear-convolution support, N = K + T - 1.
struct ModelConfig {
  Index K = 0;
  Index T = 0;
  Index L = 0;
  Matrix A;  // T x L pulse subspace basis, h = A gamma
  double sigma_gamma_sq = 10.0;
  Hyperpriors hyper;

  Index N() const noexcept { return K + T - 1; }

  static ModelConfig make(Index K, Matrix A, double sigma_gamma_sq = 10.0);
  void validate() const;
};

// One full draw of the NIG model unknowns.
struct ParameterState {
  Vector x;
  Vector sigma_x_sq;
  Vector gamma;
  double sigma_v_sq = 1.0;
  double alpha_x = 1.0;
  double beta_x = 1.0;

  void validate(const ModelConfig& config) const;
};

struct Measurement {
  Vector y;
};

// N x K convolution matrix of h: column j is h shifted down by j samples.
Matrix build_toeplitz_H(const Vector& h, Index K);

// N x T convolution matrix of x, so that build_toeplitz_X(x, T) * h equals
// build_toeplitz_H(h, K) * x.
Matrix build_toeplitz_X(const Vector& x, Index T);

// Full linear convolution, length a.size() + b.size() - 1.
Vector convolve(const Vector& a, const Vector& b);

// H^T y for the convolution matrix of `h` with K columns, computed without
// materializing H. y must have length K + h.size() - 1.
Vector correlate(const Vector& y, const Vector& h, Index K);

// r[k] = sum_t v[t] v[t + k] for k = 0..max_lag (zero past the support).
Vector autocorrelation(const Vector& v, Index max_lag);

// Gaussian log-likelihood of y given (x, gamma, sigma_v^2), including the
// -(N/2) log(2 pi) constant.
double log_likelihood(const Measurement& measurement, const Vector& x, const Vector& gamma,
                      double sigma_v_sq, const ModelConfig& config);

// Squared norm of y - conv(A gamma, x).
double residual_norm_sq(const Vector& y, const Vector& x, const Vector& h);

}  // namespace bdconv
