#include "bdconv/nigs2.hpp"

#include <cmath>
#include <limits>

#include "bdconv/error.hpp"
#include "step_guard.hpp"

namespace bdconv {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<Index> complement_indices(Index K, const WindowState& w) {
  std::vector<Index> idx;
  idx.reserve(static_cast<std::size_t>(K - w.Q));
  for (Index k = 0; k < K; ++k)
    if (k < w.n || k >= w.n + w.Q) idx.push_back(k);
  return idx;
}

Matrix select_columns(const Matrix& m, const std::vector<Index>& cols) {
  Matrix out(m.rows(), static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Index>(j)) = m.col(cols[j]);
  return out;
}

}  // namespace

void WindowState::validate(Index K) const {
  if (Q < 1 || Q > K) throw InvalidArgument("WindowState: need 1 <= Q <= K");
  if (n < 0 || n > K - Q) throw InvalidArgument("WindowState: window start out of range");
}

Index window_advance(Index i, Index K, Index Q) {
  if (Q > K || Q < 1) throw InvalidArgument("window_advance: need 1 <= Q <= K");
  if (i < 1) throw InvalidArgument("window_advance: iterations are counted from 1");
  return (i - 1) % (K - Q + 1);
}

void Nigs2Config::validate() const {
  slice.validate();
  moves.validate();
  if (window < 1) throw InvalidArgument("Nigs2Config: window must be >= 1");
  if (iterations < 1) throw InvalidArgument("Nigs2Config: iterations must be >= 1");
}

BlockPosterior block_posterior_params(const Vector& y, const Matrix& H, const WindowState& window,
                                      const Vector& x, const Vector& sigma_x_sq_block,
                                      double sigma_v_sq) {
  const Index K = H.cols();
  window.validate(K);
  if (sigma_x_sq_block.size() != window.Q || x.size() != K || y.size() != H.rows())
    throw InvalidArgument("block_posterior_params: dimension mismatch");
  const Matrix Hl = H.middleCols(window.n, window.Q);
  Vector x_rest = x;
  x_rest.segment(window.n, window.Q).setZero();
  const Vector y_rest = y - H * x_rest;

  Matrix precision = Hl.transpose() * Hl / sigma_v_sq;
  precision.diagonal().array() += sigma_x_sq_block.array().inverse();
  const PrecisionGaussian g(precision, Hl.transpose() * y_rest / sigma_v_sq);
  BlockPosterior out;
  out.mean = g.mean();
  out.covariance = g.covariance();
  out.D = Matrix::Identity(H.rows(), H.rows()) - Hl * out.covariance * Hl.transpose() / sigma_v_sq;
  return out;
}

GaussianPosteriorParams complement_posterior_params(const Vector& y, const Matrix& H,
                                                    const WindowState& window,
                                                    const Vector& sigma_x_sq, double sigma_v_sq) {
  const Index K = H.cols();
  window.validate(K);
  const auto rest = complement_indices(K, window);
  const Matrix Hl = H.middleCols(window.n, window.Q);
  const Matrix Hr = select_columns(H, rest);

  Matrix block_precision = Hl.transpose() * Hl / sigma_v_sq;
  block_precision.diagonal().array() += sigma_x_sq.segment(window.n, window.Q).array().inverse();
  const Matrix block_cov = PrecisionGaussian(block_precision, Vector::Zero(window.Q)).covariance();
  const Matrix D = Matrix::Identity(H.rows(), H.rows()) - Hl * block_cov * Hl.transpose() / sigma_v_sq;

  Matrix precision = Hr.transpose() * D * Hr / sigma_v_sq;
  for (std::size_t j = 0; j < rest.size(); ++j)
    precision(static_cast<Index>(j), static_cast<Index>(j)) += 1.0 / sigma_x_sq[rest[j]];
  const PrecisionGaussian g(precision, Hr.transpose() * D.transpose() * y / sigma_v_sq);
  return {g.mean(), g.covariance()};
}

BlockSystem block_system(const Vector& y, const Vector& h, const WindowState& window, const Vector& x) {
  const Index K = x.size();
  const Index T = h.size();
  window.validate(K);
  Vector x_rest = x;
  x_rest.segment(window.n, window.Q).setZero();
  const Vector y_rest = y - convolve(h, x_rest);
  const Vector r = autocorrelation(h, window.Q - 1);
  BlockSystem s;
  s.gram.resize(window.Q, window.Q);
  for (Index i = 0; i < window.Q; ++i)
    for (Index j = 0; j < window.Q; ++j) s.gram(i, j) = r[std::abs(i - j)];
  s.c.resize(window.Q);
  for (Index j = 0; j < window.Q; ++j) s.c[j] = y_rest.segment(window.n + j, T).dot(h);
  return s;
}

double sigma_block_log_target(const Vector& sigma_sq_block, const BlockSystem& system,
                              double sigma_v_sq, double alpha_x, double beta_x) {
  if (!(sigma_sq_block.array() > 0.0).all() || !(sigma_v_sq > 0.0)) return kNegInf;
  Matrix precision = system.gram / sigma_v_sq;
  precision.diagonal().array() += sigma_sq_block.array().inverse();
  const Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success) return kNegInf;
  const Vector b = system.c / sigma_v_sq;
  const double log_det_precision = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double quad = b.dot(llt.solve(b));
  const double log_det_prior = sigma_sq_block.array().log().sum();
  double prior = 0.0;
  for (Index j = 0; j < sigma_sq_block.size(); ++j) prior += log_ig_density(sigma_sq_block[j], alpha_x, beta_x);
  return -0.5 * log_det_precision - 0.5 * log_det_prior + 0.5 * quad + prior;
}

double sigma_block_log_target(const Vector& sigma_sq_block, const Vector& y, const Vector& x,
                              const Matrix& H, const WindowState& window, double sigma_v_sq,
                              double alpha_x, double beta_x) {
  window.validate(H.cols());
  const Matrix Hl = H.middleCols(window.n, window.Q);
  Vector x_rest = x;
  x_rest.segment(window.n, window.Q).setZero();
  BlockSystem s;
  s.gram = Hl.transpose() * Hl;
  s.c = Hl.transpose() * (y - H * x_rest);
  return sigma_block_log_target(sigma_sq_block, s, sigma_v_sq, alpha_x, beta_x);
}

double sigma_v_marginal_log_target(double sigma_v_sq, const GammaSystem& system, Index N,
                                   double sigma_gamma_sq, const Hyperpriors& hyper) {
  if (!(sigma_v_sq > 0.0)) return kNegInf;
  const double log_s = std::log(sigma_v_sq);
  return -0.5 * static_cast<double>(N) * log_s +
         gamma_evidence_term(system, sigma_v_sq, sigma_gamma_sq) - (0.5 * system.yty + hyper.sigma_v_scale) / sigma_v_sq -
         (1.0 + hyper.sigma_v_shape) * log_s;
}

double sigma_v_marginal_log_target(double sigma_v_sq, const Vector& y, const Matrix& X,
                                   const Matrix& A, double sigma_gamma_sq, const Hyperpriors& hyper) {
  const Matrix B = X * A;
  GammaSystem s;
  s.BtB = B.transpose() * B;
  s.Bty = B.transpose() * y;
  s.yty = y.squaredNorm();
  return sigma_v_marginal_log_target(sigma_v_sq, s, y.size(), sigma_gamma_sq, hyper);
}

void step4_sample_x_complement(ParameterState& state, const Measurement& measurement,
                               const ModelConfig& config, const WindowState& window, Rng& rng) {
  window.validate(config.K);
  if (window.Q == config.K) return;
  const Vector h = config.A * state.gamma;
  const Vector draw =
      sample_x_posterior(x_posterior_band(measurement.y, h, state.sigma_x_sq, state.sigma_v_sq), rng);
  const Vector block = state.x.segment(window.n, window.Q);
  state.x = draw;
  state.x.segment(window.n, window.Q) = block;
}

void step5_sample_sigma_block(ParameterState& state, const Measurement& measurement,
                              const ModelConfig& config, const WindowState& window,
                              const SliceSamplerConfig& slice, Rng& rng) {
  const Vector h = config.A * state.gamma;
  const BlockSystem system = block_system(measurement.y, h, window, state.x);
  Vector block = state.sigma_x_sq.segment(window.n, window.Q);
  for (Index j = 0; j < window.Q; ++j) {
    const auto target = [&](double v) {
      const double saved = block[j];
      block[j] = v;
      const double out = sigma_block_log_target(block, system, state.sigma_v_sq, state.alpha_x, state.beta_x);
      block[j] = saved;
      return out;
    };
    block[j] = slice_sample_log_scale(target, block[j], slice, rng);
  }
  state.sigma_x_sq.segment(window.n, window.Q) = block;
}

void step6_sample_x_block(ParameterState& state, const Measurement& measurement,
                          const ModelConfig& config, const WindowState& window, Rng& rng) {
  const Vector h = config.A * state.gamma;
  const BlockSystem system = block_system(measurement.y, h, window, state.x);
  Matrix precision = system.gram / state.sigma_v_sq;
  precision.diagonal().array() += state.sigma_x_sq.segment(window.n, window.Q).array().inverse();
  const PrecisionGaussian g(precision, system.c / state.sigma_v_sq);
  state.x.segment(window.n, window.Q) = g.sample(rng);
}

void step7_sample_sigma_v(ParameterState& state, const Measurement& measurement,
                          const ModelConfig& config, const SliceSamplerConfig& slice, Rng& rng) {
  const GammaSystem system = gamma_system(measurement.y, state.x, config.A);
  const Index N = config.N();
  const auto target = [&](double s) {
    return sigma_v_marginal_log_target(s, system, N, config.sigma_gamma_sq, config.hyper);
  };
  state.sigma_v_sq = slice_sample_log_scale(target, state.sigma_v_sq, slice, rng);
}

IterationReport nigs2_iterate(ParameterState& state, const Measurement& measurement,
                              const ModelConfig& config, const Nigs2Config& nigs, Index iteration,
                              Rng& rng) {
  const Index Q = std::min(nigs.window, config.K);
  const WindowState window{Q, window_advance(iteration, config.K, Q)};
  const detail::StepRunner run{nigs.on_step};
  run("step1_sample_alpha_x", [&] { step1_sample_alpha_x(state, nigs.slice, rng, config.hyper); });
  run("step2_sample_beta_x", [&] { step2_sample_beta_x(state, rng, config.hyper); });
  run("step3_sample_sigma_x", [&] { step3_sample_sigma_x(state, rng); });
  run("step4_sample_x_complement", [&] { step4_sample_x_complement(state, measurement, config, window, rng); });
  run("step5_sample_sigma_block",
      [&] { step5_sample_sigma_block(state, measurement, config, window, nigs.slice, rng); });
  run("step6_sample_x_block", [&] { step6_sample_x_block(state, measurement, config, window, rng); });
  run("step7_sample_sigma_v", [&] { step7_sample_sigma_v(state, measurement, config, nigs.slice, rng); });
  run("step8_sample_gamma", [&] { step5_sample_gamma(state, measurement, config, rng); });
  IterationReport report;
  if (nigs.moves.enabled) {
    run("ambiguity_moves",
        [&] { report = run_ambiguity_moves(state, measurement, config, nigs.moves, rng); });
  }
  return report;
}

}  // namespace bdconv
