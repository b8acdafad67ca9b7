#pragma once

#include "bdconv/distributions.hpp"
#include "bdconv/model.hpp"

namespace bdconv {

// Gaussian full conditionals of x and gamma shared by every sampler.
//
// p(x | y, sigma_x^2, gamma, sigma_v^2) = N(mu_x, Sigma_x) with
//   Sigma_x = (H^T H / sigma_v^2 + diag(sigma_x^2)^-1)^-1,
//   mu_x    = Sigma_x H^T y / sigma_v^2.
// p(gamma | y, x, sigma_v^2) = N(mu_g, Sigma_g) with B = X A,
//   Sigma_g = (B^T B / sigma_v^2 + I / sigma_gamma^2)^-1,
//   mu_g    = Sigma_g B^T y / sigma_v^2.

GaussianPosteriorParams x_posterior_params(const Vector& y, const Matrix& H,
                                           const Vector& sigma_x_sq, double sigma_v_sq);

GaussianPosteriorParams gamma_posterior_params(const Vector& y, const Matrix& X, const Matrix& A,
                                               double sigma_v_sq, double sigma_gamma_sq);

// Band form of the x-conditional. H^T H is Toeplitz with bandwidth T - 1
// (every column of H carries the whole pulse), so the precision is banded.
struct XPosteriorBand {
  Matrix band;    // T x K, band(d, j) = P(j + d, j)
  Vector linear;  // H^T y / sigma_v^2
};

XPosteriorBand x_posterior_band(const Vector& y, const Vector& h, const Vector& sigma_x_sq,
                                double sigma_v_sq);

// One joint draw from the band-form conditional. `mean`, when given,
// receives the conditional mean.
Vector sample_x_posterior(const XPosteriorBand& posterior, Rng& rng, Vector* mean = nullptr);

// Sufficient statistics of y = B gamma + v for fixed x, with B = X A.
struct GammaSystem {
  Matrix BtB;
  Vector Bty;
  double yty = 0.0;
};

GammaSystem gamma_system(const Vector& y, const Vector& x, const Matrix& A);

// Information-form conditional of gamma built from a GammaSystem.
PrecisionGaussian gamma_conditional(const GammaSystem& system, double sigma_v_sq,
                                    double sigma_gamma_sq);

// log of the gamma-marginalized likelihood factor
//   |Sigma_g|^1/2 exp(mu_g^T Sigma_g^-1 mu_g / 2),
// i.e. the part of p(y | x, sigma_v^2) that depends on x through B.
double gamma_evidence_term(const GammaSystem& system, double sigma_v_sq, double sigma_gamma_sq);

}  // namespace bdconv
