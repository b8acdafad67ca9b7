#pragma once

#include <cstdint>
#include <vector>

#include "bdconv/model.hpp"
#include "bdconv/rng.hpp"

namespace bdconv {

// Spike-and-slab state: x_n = 0 exactly wherever s_n = 0.
struct BgState {
  std::vector<std::uint8_t> s;
  Vector x;
  Vector gamma;
  double sigma_v_sq = 1.0;

  void validate(const ModelConfig& config) const;
};

// pi0 = P(s_n = 0); sigma_x_sq is the slab variance. The pulse prior
// variance is taken from ModelConfig::sigma_gamma_sq.
struct BgHyperparams {
  double pi0 = 0.94;
  double sigma_x_sq = 1.0;

  void validate() const;
};

struct PairPosterior {
  double p_s1 = 0.0;  // P(s_n = 1 | y, x_~n, gamma, sigma_v^2)
  double mean = 0.0;  // slab conditional of x_n given s_n = 1
  double var = 0.0;
};

// `residual` is y - H x with the contribution of x_n removed; the column of
// H for index n is the pulse h starting at row n.
PairPosterior pair_posterior_odds(Index n, const Vector& residual, const Vector& h,
                                  const BgHyperparams& hyper, double sigma_v_sq);

// Unnormalized log posterior weight of each of the 2^M indicator patterns of
// a tuple (bit j of the index is s_{t+j}), with the tuple amplitudes
// integrated out. `c` holds H_t^T r for the residual r without the tuple;
// `gram` is H_t^T H_t.
std::vector<double> tuple_log_weights(const Vector& c, const Matrix& gram, const BgHyperparams& hyper,
                                      double sigma_v_sq);

// s_n ~ Bernoulli(1 - pi0), slab draws for active sites, gamma from its
// prior, sigma_v^2 = 0.1 var(y).
BgState initialize_bg_state(const Measurement& measurement, const ModelConfig& config,
                            const BgHyperparams& hyper, Rng& rng);

// Classical sampler: site-by-site (s_n, x_n) sweep with a running residual,
// then gamma, then sigma_v^2.
void bgs_iterate(BgState& state, const Measurement& measurement, const ModelConfig& config,
                 const BgHyperparams& hyper, Rng& rng);

// M-tuple sampler: sweeps windows {t, ..., t + M - 1} with the given stride,
// drawing the tuple indicators jointly over all 2^M patterns and then the
// active amplitudes; then gamma and sigma_v^2 as in the classical sampler.
void mtuple_iterate(BgState& state, const Measurement& measurement, const ModelConfig& config,
                    const BgHyperparams& hyper, int M, Rng& rng, Index stride = 1);

}  // namespace bdconv
