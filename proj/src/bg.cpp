#include "bdconv/bg.hpp"

#include <algorithm>
#include <cmath>

#include "bdconv/conditionals.hpp"
#include "bdconv/distributions.hpp"
#include "bdconv/error.hpp"

namespace bdconv {

namespace {

constexpr int kMaxTuple = 8;
using SmallMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxTuple, kMaxTuple>;
using SmallVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxTuple, 1>;

double log_sum_exp(const std::vector<double>& w) {
  const double m = *std::max_element(w.begin(), w.end());
  double acc = 0.0;
  for (double v : w) acc += std::exp(v - m);
  return m + std::log(acc);
}

// Active-set system of one tuple pattern.
struct PatternSystem {
  Eigen::LLT<SmallMatrix> llt;
  SmallVector b;
  int active = 0;
};

PatternSystem pattern_system(unsigned mask, const Vector& c, const Matrix& gram,
                             const BgHyperparams& hyper, double sigma_v_sq) {
  const int M = static_cast<int>(c.size());
  int idx[kMaxTuple];
  int k = 0;
  for (int j = 0; j < M; ++j)
    if (mask & (1u << j)) idx[k++] = j;
  PatternSystem p;
  p.active = k;
  SmallMatrix precision(k, k);
  p.b.resize(k);
  for (int i = 0; i < k; ++i) {
    p.b[i] = c[idx[i]] / sigma_v_sq;
    for (int j = 0; j < k; ++j) precision(i, j) = gram(idx[i], idx[j]) / sigma_v_sq;
    precision(i, i) += 1.0 / hyper.sigma_x_sq;
  }
  p.llt.compute(precision);
  return p;
}

void sample_gamma_and_noise(BgState& state, const Measurement& measurement, const ModelConfig& config,
                            Rng& rng) {
  const GammaSystem system = gamma_system(measurement.y, state.x, config.A);
  state.gamma = gamma_conditional(system, state.sigma_v_sq, config.sigma_gamma_sq).sample(rng);
  const double rss = residual_norm_sq(measurement.y, state.x, config.A * state.gamma);
  if (!(rss > 0.0)) throw InvalidArgument("BG sampler: zero residual gives a degenerate inverse gamma");
  state.sigma_v_sq = sample_inverse_gamma(0.5 * static_cast<double>(config.N()) + config.hyper.sigma_v_shape,
                                         0.5 * rss + config.hyper.sigma_v_scale, rng);
}

}  // namespace

void BgState::validate(const ModelConfig& config) const {
  if (static_cast<Index>(s.size()) != config.K || x.size() != config.K)
    throw InvalidArgument("BgState: s and x must have length K");
  if (gamma.size() != config.L) throw InvalidArgument("BgState: gamma must have length L");
  if (!(sigma_v_sq > 0.0)) throw InvalidArgument("BgState: sigma_v_sq must be positive");
  for (Index n = 0; n < config.K; ++n)
    if (s[static_cast<std::size_t>(n)] == 0 && x[n] != 0.0)
      throw InvalidArgument("BgState: x_n must be zero where s_n = 0");
}

void BgHyperparams::validate() const {
  if (!(pi0 > 0.0 && pi0 < 1.0)) throw InvalidArgument("BgHyperparams: pi0 must lie in (0, 1)");
  if (!(sigma_x_sq > 0.0)) throw InvalidArgument("BgHyperparams: sigma_x_sq must be positive");
}

PairPosterior pair_posterior_odds(Index n, const Vector& residual, const Vector& h,
                                  const BgHyperparams& hyper, double sigma_v_sq) {
  const double c = residual.segment(n, h.size()).dot(h);
  const double energy = h.squaredNorm();
  PairPosterior out;
  out.var = 1.0 / (energy / sigma_v_sq + 1.0 / hyper.sigma_x_sq);
  out.mean = out.var * c / sigma_v_sq;
  const double log_odds = std::log1p(-hyper.pi0) - std::log(hyper.pi0) +
                          0.5 * std::log(out.var / hyper.sigma_x_sq) +
                          0.5 * out.mean * out.mean / out.var;
  out.p_s1 = 1.0 / (1.0 + std::exp(-log_odds));
  return out;
}

std::vector<double> tuple_log_weights(const Vector& c, const Matrix& gram, const BgHyperparams& hyper,
                                      double sigma_v_sq) {
  const int M = static_cast<int>(c.size());
  if (M < 1 || M > kMaxTuple) throw InvalidArgument("tuple_log_weights: tuple length must be in [1, 8]");
  const double log_on = std::log1p(-hyper.pi0);
  const double log_off = std::log(hyper.pi0);
  std::vector<double> w(std::size_t{1} << M);
  for (unsigned mask = 0; mask < w.size(); ++mask) {
    const PatternSystem p = pattern_system(mask, c, gram, hyper, sigma_v_sq);
    double lw = p.active * log_on + (M - p.active) * log_off;
    if (p.active > 0) {
      const double log_det = 2.0 * p.llt.matrixLLT().diagonal().array().log().sum();
      lw += -0.5 * log_det - 0.5 * p.active * std::log(hyper.sigma_x_sq) +
            0.5 * p.b.dot(p.llt.solve(p.b));
    }
    w[mask] = lw;
  }
  return w;
}

BgState initialize_bg_state(const Measurement& measurement, const ModelConfig& config,
                            const BgHyperparams& hyper, Rng& rng) {
  config.validate();
  hyper.validate();
  BgState s;
  s.s.assign(static_cast<std::size_t>(config.K), 0);
  s.x = Vector::Zero(config.K);
  const double sx = std::sqrt(hyper.sigma_x_sq);
  for (Index n = 0; n < config.K; ++n) {
    if (rng.uniform() < 1.0 - hyper.pi0) {
      s.s[static_cast<std::size_t>(n)] = 1;
      s.x[n] = sx * rng.normal();
    }
  }
  s.gamma.resize(config.L);
  const double sg = std::sqrt(config.sigma_gamma_sq);
  for (Index l = 0; l < config.L; ++l) s.gamma[l] = sg * rng.normal();
  const Vector& y = measurement.y;
  const double var_y = (y.array() - y.mean()).square().sum() / static_cast<double>(y.size());
  s.sigma_v_sq = var_y > 0.0 ? 0.1 * var_y : 1.0;
  return s;
}

void bgs_iterate(BgState& state, const Measurement& measurement, const ModelConfig& config,
                 const BgHyperparams& hyper, Rng& rng) {
  const Vector h = config.A * state.gamma;
  const Index T = h.size();
  // Rebuilt every sweep because gamma changes between sweeps.
  Vector residual = measurement.y - convolve(h, state.x);
  for (Index n = 0; n < config.K; ++n) {
    auto seg = residual.segment(n, T);
    if (state.x[n] != 0.0) seg += state.x[n] * h;
    const PairPosterior pp = pair_posterior_odds(n, residual, h, hyper, state.sigma_v_sq);
    if (rng.uniform() < pp.p_s1) {
      state.s[static_cast<std::size_t>(n)] = 1;
      state.x[n] = pp.mean + std::sqrt(pp.var) * rng.normal();
      seg -= state.x[n] * h;
    } else {
      state.s[static_cast<std::size_t>(n)] = 0;
      state.x[n] = 0.0;
    }
  }
  sample_gamma_and_noise(state, measurement, config, rng);
}

void mtuple_iterate(BgState& state, const Measurement& measurement, const ModelConfig& config,
                    const BgHyperparams& hyper, int M, Rng& rng, Index stride) {
  if (M < 1 || M > kMaxTuple) throw InvalidArgument("mtuple_iterate: M must be in [1, 8]");
  if (M > config.K) throw InvalidArgument("mtuple_iterate: M exceeds K");
  if (stride < 1) throw InvalidArgument("mtuple_iterate: stride must be >= 1");
  const Vector h = config.A * state.gamma;
  const Index T = h.size();
  const Vector r = autocorrelation(h, M - 1);
  Matrix gram(M, M);
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < M; ++j) gram(i, j) = r[std::abs(i - j)];

  Vector residual = measurement.y - convolve(h, state.x);
  Vector c(M);
  const Index last = config.K - M;
  for (Index t = 0;; t += stride) {
    if (t > last) {
      if (t - stride == last) break;
      t = last;  // cover the tail when the stride does not land on it
    }
    for (int j = 0; j < M; ++j)
      if (state.x[t + j] != 0.0) residual.segment(t + j, T) += state.x[t + j] * h;
    for (int j = 0; j < M; ++j) c[j] = residual.segment(t + j, T).dot(h);

    const std::vector<double> w = tuple_log_weights(c, gram, hyper, state.sigma_v_sq);
    const double norm = log_sum_exp(w);
    double u = rng.uniform();
    unsigned mask = 0;
    for (; mask + 1 < w.size(); ++mask) {
      u -= std::exp(w[mask] - norm);
      if (u <= 0.0) break;
    }

    const PatternSystem p = pattern_system(mask, c, gram, hyper, state.sigma_v_sq);
    SmallVector amp;
    if (p.active > 0) {
      SmallVector z(p.active);
      for (int i = 0; i < p.active; ++i) z[i] = rng.normal();
      amp = p.llt.solve(p.b) + p.llt.matrixU().solve(z);
    }
    int k = 0;
    for (int j = 0; j < M; ++j) {
      const auto site = static_cast<std::size_t>(t + j);
      if (mask & (1u << j)) {
        state.s[site] = 1;
        state.x[t + j] = amp[k++];
        residual.segment(t + j, T) -= state.x[t + j] * h;
      } else {
        state.s[site] = 0;
        state.x[t + j] = 0.0;
      }
    }
    if (t == last) break;
  }
  sample_gamma_and_noise(state, measurement, config, rng);
}

}  // namespace bdconv
