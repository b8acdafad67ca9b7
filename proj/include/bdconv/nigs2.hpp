#pragma once

#include "bdconv/conditionals.hpp"
#include "bdconv/nigs1.hpp"

namespace bdconv {

// Sliding block l_n = {n, ..., n + Q - 1} of the sparse sequence.
struct WindowState {
  Index Q = 1;
  Index n = 0;

  void validate(Index K) const;
};

// n = mod(i - 1, K - Q + 1) for the i-th iteration (i >= 1).
Index window_advance(Index i, Index K, Index Q);

struct Nigs2Config {
  SliceSamplerConfig slice;
  AmbiguityMoves moves;
  Index window = 10;  // Q, clamped to K
  Index iterations = 10000;
  StepHook on_step;

  void validate() const;
};

struct BlockPosterior {
  Vector mean;        // mu_l = Sigma_l H_l^T (y - H_~l x_~l) / sigma_v^2
  Matrix covariance;  // Sigma_l = (H_l^T H_l / sigma_v^2 + Sigma_x,l^-1)^-1
  Matrix D;           // I - H_l Sigma_l H_l^T / sigma_v^2
};

// Conditional of the block x_l given x_~l (entries of `x` inside the window
// are ignored). D is N x N.
BlockPosterior block_posterior_params(const Vector& y, const Matrix& H, const WindowState& window,
                                      const Vector& x, const Vector& sigma_x_sq_block,
                                      double sigma_v_sq);

// Marginal of x_~l with x_l integrated out, in the closed form
//   Sigma_~l = (H_~l^T D_l H_~l / sigma_v^2 + Sigma_x,~l^-1)^-1,
//   mu_~l    = Sigma_~l H_~l^T D_l^T y / sigma_v^2.
GaussianPosteriorParams complement_posterior_params(const Vector& y, const Matrix& H,
                                                    const WindowState& window,
                                                    const Vector& sigma_x_sq, double sigma_v_sq);

// Statistics of the block system for fixed x_~l: G = H_l^T H_l and
// c = H_l^T (y - H_~l x_~l).
struct BlockSystem {
  Matrix gram;
  Vector c;
};

BlockSystem block_system(const Vector& y, const Vector& h, const WindowState& window, const Vector& x);

// Unnormalized log p(sigma_x,l^2 | y, x_~l, gamma, sigma_v^2, alpha_x, beta_x):
//   1/2 log|Sigma_l| - 1/2 log|Sigma_x,l| + 1/2 mu_l^T Sigma_l^-1 mu_l
//   + sum log IG(sigma^2; alpha_x, beta_x).
double sigma_block_log_target(const Vector& sigma_sq_block, const BlockSystem& system,
                              double sigma_v_sq, double alpha_x, double beta_x);
double sigma_block_log_target(const Vector& sigma_sq_block, const Vector& y, const Vector& x,
                              const Matrix& H, const WindowState& window, double sigma_v_sq,
                              double alpha_x, double beta_x);

// Unnormalized log p(sigma_v^2 | y, x) with gamma integrated out:
//   -(N/2) log s + 1/2 log|Sigma_g| + 1/2 mu_g^T Sigma_g^-1 mu_g - y^T y / (2 s) + log prior(s),
// with log prior(s) = -log s by default.
double sigma_v_marginal_log_target(double sigma_v_sq, const GammaSystem& system, Index N,
                                   double sigma_gamma_sq, const Hyperpriors& hyper = {});
double sigma_v_marginal_log_target(double sigma_v_sq, const Vector& y, const Matrix& X,
                                   const Matrix& A, double sigma_gamma_sq, const Hyperpriors& hyper = {});

// Draws x_~l from its marginal. Drawing x jointly from its full
// conditional and keeping the entries outside the window yields exactly
// that marginal, at banded cost.
void step4_sample_x_complement(ParameterState& state, const Measurement& measurement,
                               const ModelConfig& config, const WindowState& window, Rng& rng);
// One componentwise log-scale slice sweep over the block variances.
void step5_sample_sigma_block(ParameterState& state, const Measurement& measurement,
                              const ModelConfig& config, const WindowState& window,
                              const SliceSamplerConfig& slice, Rng& rng);
void step6_sample_x_block(ParameterState& state, const Measurement& measurement,
                          const ModelConfig& config, const WindowState& window, Rng& rng);
void step7_sample_sigma_v(ParameterState& state, const Measurement& measurement,
                          const ModelConfig& config, const SliceSamplerConfig& slice, Rng& rng);

// One iteration (i >= 1) of the partially collapsed sampler: steps 1-3 as in
// the classical sampler, then x_~l, sigma_x,l^2, x_l, sigma_v^2 (gamma
// marginalized), gamma, and the ambiguity moves when enabled.
IterationReport nigs2_iterate(ParameterState& state, const Measurement& measurement,
                              const ModelConfig& config, const Nigs2Config& nigs, Index iteration,
                              Rng& rng);

}  // namespace bdconv
