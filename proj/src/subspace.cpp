#include "bdconv/subspace.hpp"

#include <cmath>
#include <numbers>

#include "bdconv/error.hpp"

namespace bdconv {

double default_dps_bandwidth(Index T, Index L) {
  return static_cast<double>(L) / (2.0 * static_cast<double>(T));
}

SubspaceBasis dps_basis(Index T, double W, Index L) {
  if (T < 1 || L < 1 || L > T) throw InvalidArgument("dps_basis: need 1 <= L <= T");
  if (!(W > 0.0) || !(W < 0.5)) throw InvalidArgument("dps_basis: W must lie in (0, 0.5)");

  // Tridiagonal matrix commuting with the sinc concentration kernel; its
  // eigenvectors are the Slepian sequences with the same ordering.
  Vector diag(T);
  Vector off(std::max<Index>(T - 1, 0));
  const double c = std::cos(2.0 * std::numbers::pi * W);
  for (Index n = 0; n < T; ++n) {
    const double m = 0.5 * static_cast<double>(T - 1 - 2 * n);
    diag[n] = m * m * c;
  }
  for (Index n = 1; n < T; ++n) off[n - 1] = 0.5 * static_cast<double>(n * (T - n));

  Eigen::SelfAdjointEigenSolver<Matrix> solver;
  solver.computeFromTridiagonal(diag, off, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw NumericalFailure("dps_basis: eigen-solver did not converge");

  SubspaceBasis basis;
  basis.kind = BasisKind::dps;
  basis.bandwidth = W;
  basis.matrix.resize(T, L);
  // Eigenvalues come back ascending; the most concentrated sequence has the
  // largest eigenvalue.
  for (Index l = 0; l < L; ++l) {
    Vector v = solver.eigenvectors().col(T - 1 - l);
    v.normalize();
    for (Index n = 0; n < T; ++n) {
      if (std::abs(v[n]) > 1e-12) {
        if (v[n] < 0.0) v = -v;
        break;
      }
    }
    basis.matrix.col(l) = v;
  }
  return basis;
}

SubspaceBasis identity_basis(Index T) {
  if (T < 1) throw InvalidArgument("identity_basis: T must be positive");
  SubspaceBasis basis;
  basis.matrix = Matrix::Identity(T, T);
  basis.kind = BasisKind::identity;
  return basis;
}

double band_concentration(const Vector& v, double W) {
  const Index T = v.size();
  double num = 0.0;
  for (Index m = 0; m < T; ++m) {
    for (Index n = 0; n < T; ++n) {
      const double k = (m == n) ? 2.0 * W
                                : std::sin(2.0 * std::numbers::pi * W * static_cast<double>(m - n)) /
                                      (std::numbers::pi * static_cast<double>(m - n));
      num += v[m] * k * v[n];
    }
  }
  return num / v.squaredNorm();
}

Vector pulse_cosine_decay(Index n_count) {
  Vector h(n_count);
  for (Index n = 0; n < n_count; ++n) {
    const double t = static_cast<double>(n);
    h[n] = std::cos((t - 10.0) * std::numbers::pi / 4.0) *
           std::exp(-std::pow(std::abs(0.225 * t - 2.0), 1.5));
  }
  return h;
}

Vector pulse_gaussian_derivative(double f_c, double f_s, Index n_count) {
  if (!(f_s > 2.0 * f_c)) throw InvalidArgument("pulse_gaussian_derivative: need f_s > 2 f_c");
  Vector h(n_count);
  for (Index n = 0; n < n_count; ++n) {
    const double u = static_cast<double>(n) * std::numbers::pi * f_c / f_s - 2.0;
    h[n] = 2.0 * u * std::exp(0.5 - 2.0 * u * u);
  }
  return h;
}

}  // namespace bdconv
