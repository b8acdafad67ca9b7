#pragma once

#include <string>
#include <utility>
#include <vector>

#include "bdconv/types.hpp"

namespace bdconv {

// Convergence threshold for the multivariate scale reduction factor.
inline constexpr double kMpsrfThreshold = 1.2;

// q parallel chains; chains[j] is (samples x monitored coordinates).
struct ChainSet {
  std::vector<Matrix> chains;
  std::vector<std::string> monitored;

  void validate() const;
};

// Multivariate potential scale reduction factor over the last
// `use_last_fraction` of each chain; i is the retained count per chain.
// Throws DiagnosticUndefined when the within-chain covariance is singular
// after regularization.
double mpsrf(const ChainSet& chain_set, double use_last_fraction = 0.5);

struct MpsrfPoint {
  Index iter = 0;   // samples generated so far (per chain)
  double rhat = 0;  // NaN where the diagnostic is undefined
};

// R-hat at every multiple of `cadence` samples, each using the last
// `use_last_fraction` of the samples generated up to that point.
std::vector<MpsrfPoint> mpsrf_trace(const ChainSet& chain_set, Index cadence,
                                    double use_last_fraction = 0.5);

// First checkpoint with R-hat <= threshold, or -1 when never reached.
Index first_convergence(const std::vector<MpsrfPoint>& trace, double threshold = kMpsrfThreshold);

// Coordinatewise mean after discarding the first floor(n * burn_in_fraction) samples.
Vector posterior_mean(const Matrix& chain, double burn_in_fraction = 0.75);

double nmse(const Vector& truth, const Vector& estimate);

struct NmsePair {
  double x = 0.0;
  double h = 0.0;
};

struct SuccessRate {
  double rate_x = 0.0;
  double rate_h = 0.0;
};

SuccessRate success_rate(const std::vector<NmsePair>& results, double tau);

}  // namespace bdconv
