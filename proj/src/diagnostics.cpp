#include "bdconv/diagnostics.hpp"

#include <cmath>
#include <limits>

#include "bdconv/error.hpp"

namespace bdconv {

namespace {

Index retained_count(Index n, double fraction) {
  return n - static_cast<Index>(std::floor(static_cast<double>(n) * (1.0 - fraction)));
}

// R-hat from per-chain window means (columns of `means`) and the summed
// within-chain scatter over all chains.
double rhat_from_moments(const Matrix& means, const Matrix& scatter, Index i) {
  const Index q = means.cols();
  const Index dim = means.rows();
  if (i < 2) throw DiagnosticUndefined("mpsrf: need at least two retained samples per chain");
  Matrix sw = scatter / static_cast<double>(q * (i - 1));
  const double tr = sw.trace();
  if (!(tr > 0.0) || !std::isfinite(tr)) throw DiagnosticUndefined("mpsrf: within-chain covariance is zero");
  // The ridge 1e-10 * trace / dim is added only when S_w is singular or
  // has a pivot below it, so well-conditioned cases stay exact.
  const double ridge = 1e-10 * tr / static_cast<double>(dim);
  Eigen::LLT<Matrix> llt(sw);
  if (llt.info() != Eigen::Success || (llt.matrixLLT().diagonal().array().square() < ridge).any()) {
    sw.diagonal().array() += ridge;
    llt.compute(sw);
  }
  if (llt.info() != Eigen::Success)
    throw DiagnosticUndefined("mpsrf: within-chain covariance is singular");

  // S_b = D D^T / (q - 1); the nonzero spectrum of S_w^{-1} S_b is that of
  // (L^{-1} D)^T (L^{-1} D) / (q - 1).
  const Vector grand = means.rowwise().mean();
  Matrix d = means.colwise() - grand;
  llt.matrixL().solveInPlace(d);
  const Matrix small = d.transpose() * d / static_cast<double>(q - 1);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(small, Eigen::EigenvaluesOnly);
  const double lambda = std::max(0.0, eig.eigenvalues().maxCoeff());
  const double di = static_cast<double>(i);
  const double dq = static_cast<double>(q);
  return (di - 1.0) / di + (dq + 1.0) / dq * lambda;
}

}  // namespace

void ChainSet::validate() const {
  if (chains.size() < 2) throw InvalidArgument("ChainSet: need at least two chains");
  const Index n = chains.front().rows();
  const Index dim = chains.front().cols();
  for (const Matrix& c : chains)
    if (c.rows() != n || c.cols() != dim) throw InvalidArgument("ChainSet: chains must have equal shapes");
  if (dim == 0) throw InvalidArgument("ChainSet: no monitored coordinates");
  if (!monitored.empty() && static_cast<Index>(monitored.size()) != dim)
    throw InvalidArgument("ChainSet: monitored names do not match the coordinate count");
}

double mpsrf(const ChainSet& chain_set, double use_last_fraction) {
  chain_set.validate();
  if (!(use_last_fraction > 0.0 && use_last_fraction <= 1.0))
    throw InvalidArgument("mpsrf: use_last_fraction must lie in (0, 1]");
  const Index q = static_cast<Index>(chain_set.chains.size());
  const Index n = chain_set.chains.front().rows();
  const Index dim = chain_set.chains.front().cols();
  const Index i = retained_count(n, use_last_fraction);
  Matrix means(dim, q);
  Matrix scatter = Matrix::Zero(dim, dim);
  for (Index j = 0; j < q; ++j) {
    const auto window = chain_set.chains[static_cast<std::size_t>(j)].bottomRows(i);
    means.col(j) = window.colwise().mean().transpose();
    const Matrix centered = window.rowwise() - means.col(j).transpose();
    scatter.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose());
  }
  scatter.triangularView<Eigen::StrictlyUpper>() = scatter.transpose();
  return rhat_from_moments(means, scatter, i);
}

std::vector<MpsrfPoint> mpsrf_trace(const ChainSet& chain_set, Index cadence, double use_last_fraction) {
  chain_set.validate();
  if (cadence < 1) throw InvalidArgument("mpsrf_trace: cadence must be >= 1");
  if (!(use_last_fraction > 0.0 && use_last_fraction <= 1.0))
    throw InvalidArgument("mpsrf_trace: use_last_fraction must lie in (0, 1]");
  const std::size_t q = chain_set.chains.size();
  const Index n = chain_set.chains.front().rows();
  const Index dim = chain_set.chains.front().cols();

  // Running first and second moments of each chain's window, shifted by a
  // per-chain reference to limit cancellation.
  std::vector<Vector> ref(q), s1(q);
  std::vector<Matrix> s2(q);
  for (std::size_t j = 0; j < q; ++j) {
    ref[j] = chain_set.chains[j].bottomRows(retained_count(n, 0.5)).colwise().mean().transpose();
    s1[j] = Vector::Zero(dim);
    s2[j] = Matrix::Zero(dim, dim);
  }
  auto accumulate = [&](std::size_t j, Index begin, Index end, double sign) {
    if (end <= begin) return;
    const Matrix block = chain_set.chains[j].middleRows(begin, end - begin).rowwise() - ref[j].transpose();
    s1[j] += sign * block.colwise().sum().transpose();
    s2[j].selfadjointView<Eigen::Lower>().rankUpdate(block.transpose(), sign);
  };

  std::vector<MpsrfPoint> out;
  Index start = 0, stop = 0;
  for (Index c = cadence; c <= n; c += cadence) {
    const Index i = retained_count(c, use_last_fraction);
    const Index new_start = c - i;
    for (std::size_t j = 0; j < q; ++j) {
      accumulate(j, stop, c, 1.0);
      accumulate(j, start, new_start, -1.0);
    }
    start = new_start;
    stop = c;

    Matrix means(dim, static_cast<Index>(q));
    Matrix scatter = Matrix::Zero(dim, dim);
    for (std::size_t j = 0; j < q; ++j) {
      const Vector m = s1[j] / static_cast<double>(i);
      Matrix w = s2[j].selfadjointView<Eigen::Lower>();
      w.noalias() -= static_cast<double>(i) * m * m.transpose();
      scatter += w;
      means.col(static_cast<Index>(j)) = m + ref[j];
    }
    double r = std::numeric_limits<double>::quiet_NaN();
    try {
      r = rhat_from_moments(means, scatter, i);
    } catch (const DiagnosticUndefined&) {
    }
    out.push_back({c, r});
  }
  return out;
}

Index first_convergence(const std::vector<MpsrfPoint>& trace, double threshold) {
  for (const MpsrfPoint& p : trace)
    if (p.rhat <= threshold) return p.iter;
  return -1;
}

Vector posterior_mean(const Matrix& chain, double burn_in_fraction) {
  if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0))
    throw InvalidArgument("posterior_mean: burn_in_fraction must lie in [0, 1)");
  const Index skip = static_cast<Index>(std::floor(static_cast<double>(chain.rows()) * burn_in_fraction));
  const Index kept = chain.rows() - skip;
  if (kept < 1) throw InvalidArgument("posterior_mean: empty retention window");
  return chain.bottomRows(kept).colwise().mean().transpose();
}

double nmse(const Vector& truth, const Vector& estimate) {
  if (truth.size() != estimate.size()) throw InvalidArgument("nmse: size mismatch");
  const double denom = truth.squaredNorm();
  if (!(denom > 0.0)) throw InvalidArgument("nmse: truth has zero norm");
  return (truth - estimate).squaredNorm() / denom;
}

SuccessRate success_rate(const std::vector<NmsePair>& results, double tau) {
  if (results.empty()) throw InvalidArgument("success_rate: no results");
  double nx = 0.0, nh = 0.0;
  for (const NmsePair& r : results) {
    if (r.x <= tau) nx += 1.0;
    if (r.h <= tau) nh += 1.0;
  }
  const double n = static_cast<double>(results.size());
  return {nx / n, nh / n};
}

}  // namespace bdconv
