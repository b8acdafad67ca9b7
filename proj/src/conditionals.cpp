#include "bdconv/conditionals.hpp"

#include "bdconv/error.hpp"

namespace bdconv {

GaussianPosteriorParams x_posterior_params(const Vector& y, const Matrix& H,
                                           const Vector& sigma_x_sq, double sigma_v_sq) {
  if (!(sigma_v_sq > 0.0) || !(sigma_x_sq.array() > 0.0).all())
    throw InvalidArgument("x_posterior_params: variances must be positive");
  if (H.cols() != sigma_x_sq.size() || H.rows() != y.size())
    throw InvalidArgument("x_posterior_params: dimension mismatch");
  Matrix precision = H.transpose() * H / sigma_v_sq;
  precision.diagonal().array() += sigma_x_sq.array().inverse();
  const PrecisionGaussian g(precision, H.transpose() * y / sigma_v_sq);
  return {g.mean(), g.covariance()};
}

GaussianPosteriorParams gamma_posterior_params(const Vector& y, const Matrix& X, const Matrix& A,
                                               double sigma_v_sq, double sigma_gamma_sq) {
  if (!(sigma_v_sq > 0.0) || !(sigma_gamma_sq > 0.0))
    throw InvalidArgument("gamma_posterior_params: variances must be positive");
  const Matrix B = X * A;
  Matrix precision = B.transpose() * B / sigma_v_sq;
  precision.diagonal().array() += 1.0 / sigma_gamma_sq;
  const PrecisionGaussian g(precision, B.transpose() * y / sigma_v_sq);
  return {g.mean(), g.covariance()};
}

XPosteriorBand x_posterior_band(const Vector& y, const Vector& h, const Vector& sigma_x_sq,
                                double sigma_v_sq) {
  if (!(sigma_v_sq > 0.0)) throw InvalidArgument("x_posterior_band: sigma_v_sq must be positive");
  const Index K = sigma_x_sq.size();
  const Index T = h.size();
  const Index width = std::min(T, K);
  const Vector r = autocorrelation(h, width - 1) / sigma_v_sq;
  XPosteriorBand out;
  out.band.resize(width, K);
  for (Index j = 0; j < K; ++j) {
    for (Index d = 0; d < width; ++d) out.band(d, j) = (j + d < K) ? r[d] : 0.0;
    out.band(0, j) += 1.0 / sigma_x_sq[j];
  }
  out.linear = correlate(y, h, K) / sigma_v_sq;
  return out;
}

Vector sample_x_posterior(const XPosteriorBand& posterior, Rng& rng, Vector* mean) {
  const BandedCholesky chol(posterior.band);
  // P = L L^T: mean = L^-T L^-1 b and the draw is L^-T (L^-1 b + z).
  Vector w = chol.solve_lower(posterior.linear);
  if (mean != nullptr) *mean = chol.solve_upper(w);
  for (Index i = 0; i < w.size(); ++i) w[i] += rng.normal();
  return chol.solve_upper(w);
}

GammaSystem gamma_system(const Vector& y, const Vector& x, const Matrix& A) {
  const Index T = A.rows();
  const Index K = x.size();
  if (y.size() != K + T - 1) throw InvalidArgument("gamma_system: dimension mismatch");
  // X^T X is symmetric Toeplitz in the autocorrelation of x.
  const Vector r = autocorrelation(x, T - 1);
  Matrix XtX(T, T);
  for (Index i = 0; i < T; ++i)
    for (Index j = 0; j < T; ++j) XtX(i, j) = r[std::abs(i - j)];
  GammaSystem s;
  if (A.rows() == A.cols() && A.isIdentity(0.0)) {
    s.BtB = std::move(XtX);
    s.Bty = correlate(y, x, T);
  } else {
    s.BtB = A.transpose() * XtX * A;
    s.Bty = A.transpose() * correlate(y, x, T);
  }
  s.yty = y.squaredNorm();
  return s;
}

PrecisionGaussian gamma_conditional(const GammaSystem& system, double sigma_v_sq,
                                    double sigma_gamma_sq) {
  Matrix precision = system.BtB / sigma_v_sq;
  precision.diagonal().array() += 1.0 / sigma_gamma_sq;
  return PrecisionGaussian(precision, system.Bty / sigma_v_sq);
}

double gamma_evidence_term(const GammaSystem& system, double sigma_v_sq, double sigma_gamma_sq) {
  const PrecisionGaussian g = gamma_conditional(system, sigma_v_sq, sigma_gamma_sq);
  return -0.5 * g.log_det_precision() + 0.5 * g.quadratic();
}

}  // namespace bdconv
