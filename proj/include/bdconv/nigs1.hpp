#pragma once

#include <functional>
#include <string_view>

#include "bdconv/ambiguity.hpp"
#include "bdconv/distributions.hpp"
#include "bdconv/model.hpp"

namespace bdconv {

// Called with the step name after each step of an iteration completes.
using StepHook = std::function<void(std::string_view)>;

struct AmbiguityMoves {
  bool enabled = true;
  ScaleMoveConfig scale;
  AcceptanceForm shift_form = AcceptanceForm::exact;
  Index shift_max_step = 1;

  void validate() const;
};

struct Nigs1Config {
  SliceSamplerConfig slice;
  AmbiguityMoves moves;
  Index iterations = 10000;
  StepHook on_step;

  void validate() const;
};

struct IterationReport {
  MoveResult scale;
  MoveResult shift;
  bool moves_ran = false;
};

// Starting point: alpha_x, beta_x ~ IG(2, 1); sigma_x^2 from its IG prior;
// gamma ~ N(0, sigma_gamma^2 I); sigma_v^2 = 0.1 var(y); x from its
// Gaussian conditional given the rest.
ParameterState initialize_state(const Measurement& measurement, const ModelConfig& config, Rng& rng);

// Unnormalized log p(alpha_x | sigma_x^2, beta_x) under the 1/alpha_x prior:
//   K a log(beta) - K lgamma(a) - (a + 1) sum log sigma_n^2 + log prior(a),
// with log prior(a) = -log a by default.
// Returns -inf for alpha_x <= 0.
double alpha_x_log_target(double alpha_x, const Vector& sigma_x_sq, double beta_x,
                          const Hyperpriors& hyper = {});

void step1_sample_alpha_x(ParameterState& state, const SliceSamplerConfig& slice, Rng& rng,
                          const Hyperpriors& hyper = {});
// beta_x ~ Gamma(shape K alpha_x + b_shape, rate sum 1 / sigma_n^2 + b_rate).
void step2_sample_beta_x(ParameterState& state, Rng& rng, const Hyperpriors& hyper = {});
// sigma_n^2 ~ IG(alpha_x + 1/2, x_n^2 / 2 + beta_x), independently.
void step3_sample_sigma_x(ParameterState& state, Rng& rng);
void step4_sample_x(ParameterState& state, const Measurement& measurement,
                    const ModelConfig& config, Rng& rng);
void step5_sample_gamma(ParameterState& state, const Measurement& measurement,
                        const ModelConfig& config, Rng& rng);
// sigma_v^2 ~ IG(N / 2 + v_shape, ||y - X A gamma||^2 / 2 + v_scale). A zero residual is rejected.
void step6_sample_sigma_v(ParameterState& state, const Measurement& measurement,
                          const ModelConfig& config, Rng& rng);

// Runs the scale and then the shift compensation move.
IterationReport run_ambiguity_moves(ParameterState& state, const Measurement& measurement,
                                    const ModelConfig& config, const AmbiguityMoves& moves, Rng& rng);

// One iteration of the classical Gibbs sampler: steps 1-6 in order, then
// the ambiguity moves when enabled. Failures are rethrown as StepFailure.
IterationReport nigs1_iterate(ParameterState& state, const Measurement& measurement,
                              const ModelConfig& config, const Nigs1Config& nigs, Rng& rng);

}  // namespace bdconv
