#include "bdconv/model.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "bdconv/error.hpp"

namespace bdconv {

ModelConfig ModelConfig::make(Index K, Matrix A, double sigma_gamma_sq) {
  ModelConfig config;
  config.K = K;
  config.T = A.rows();
  config.L = A.cols();
  config.A = std::move(A);
  config.sigma_gamma_sq = sigma_gamma_sq;
  config.validate();
  return config;
}

void Hyperpriors::validate() const {
  for (double v : {alpha_shape, alpha_rate, beta_shape, beta_rate, sigma_v_shape, sigma_v_scale})
    if (!(v >= 0.0)) throw InvalidArgument("Hyperpriors: parameters must be non-negative");
}

void ModelConfig::validate() const {
  if (K < 1 || T < 1 || L < 1) throw InvalidArgument("ModelConfig: K, T and L must be positive");
  if (L > T) throw InvalidArgument("ModelConfig: subspace dimension L exceeds pulse length T");
  if (A.rows() != T || A.cols() != L)
    throw InvalidArgument("ModelConfig: basis must be T x L");
  if (!(sigma_gamma_sq > 0.0)) throw InvalidArgument("ModelConfig: sigma_gamma_sq must be positive");
  hyper.validate();
}

void ParameterState::validate(const ModelConfig& config) const {
  if (x.size() != config.K || sigma_x_sq.size() != config.K)
    throw InvalidArgument("ParameterState: x and sigma_x_sq must have length K");
  if (gamma.size() != config.L) throw InvalidArgument("ParameterState: gamma must have length L");
  for (Index n = 0; n < sigma_x_sq.size(); ++n) {
    if (!(sigma_x_sq[n] > 0.0))
      throw InvalidArgument("ParameterState: sigma_x_sq[" + std::to_string(n) + "] is not positive");
  }
  if (!(sigma_v_sq > 0.0)) throw InvalidArgument("ParameterState: sigma_v_sq must be positive");
  if (!(alpha_x > 0.0)) throw InvalidArgument("ParameterState: alpha_x must be positive");
  if (!(beta_x > 0.0)) throw InvalidArgument("ParameterState: beta_x must be positive");
}

Matrix build_toeplitz_H(const Vector& h, Index K) {
  if (h.size() < 1 || K < 1) throw InvalidArgument("build_toeplitz_H: empty pulse or K < 1");
  const Index T = h.size();
  Matrix H = Matrix::Zero(K + T - 1, K);
  for (Index j = 0; j < K; ++j) H.col(j).segment(j, T) = h;
  return H;
}

Matrix build_toeplitz_X(const Vector& x, Index T) {
  if (x.size() < 1 || T < 1) throw InvalidArgument("build_toeplitz_X: empty sequence or T < 1");
  const Index K = x.size();
  Matrix X = Matrix::Zero(K + T - 1, T);
  for (Index j = 0; j < T; ++j) X.col(j).segment(j, K) = x;
  return X;
}

Vector convolve(const Vector& a, const Vector& b) {
  if (a.size() == 0 || b.size() == 0) throw InvalidArgument("convolve: empty input");
  Vector out = Vector::Zero(a.size() + b.size() - 1);
  for (Index i = 0; i < a.size(); ++i) {
    if (a[i] != 0.0) out.segment(i, b.size()) += a[i] * b;
  }
  return out;
}

Vector correlate(const Vector& y, const Vector& h, Index K) {
  const Index T = h.size();
  if (y.size() != K + T - 1) throw InvalidArgument("correlate: y length must be K + T - 1");
  Vector out(K);
  for (Index j = 0; j < K; ++j) out[j] = y.segment(j, T).dot(h);
  return out;
}

Vector autocorrelation(const Vector& v, Index max_lag) {
  Vector r = Vector::Zero(max_lag + 1);
  const Index n = v.size();
  for (Index k = 0; k <= max_lag && k < n; ++k) r[k] = v.head(n - k).dot(v.tail(n - k));
  return r;
}

double residual_norm_sq(const Vector& y, const Vector& x, const Vector& h) {
  return (y - convolve(h, x)).squaredNorm();
}

double log_likelihood(const Measurement& measurement, const Vector& x, const Vector& gamma,
                      double sigma_v_sq, const ModelConfig& config) {
  if (!(sigma_v_sq > 0.0)) throw InvalidArgument("log_likelihood: sigma_v_sq must be positive");
  if (x.size() != config.K || gamma.size() != config.L || measurement.y.size() != config.N())
    throw InvalidArgument("log_likelihood: dimension mismatch");
  const Vector h = config.A * gamma;
  const double rss = residual_norm_sq(measurement.y, x, h);
  const double n = static_cast<double>(config.N());
  return -0.5 * n * std::log(2.0 * std::numbers::pi * sigma_v_sq) - rss / (2.0 * sigma_v_sq);
}

}  // namespace bdconv
