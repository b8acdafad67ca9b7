#pragma once

#include "bdconv/types.hpp"

namespace bdconv {

enum class BasisKind { identity, dps };

struct SubspaceBasis {
  Matrix matrix;  // T x L
  BasisKind kind = BasisKind::identity;
  double bandwidth = 0.0;  // half-bandwidth W in cycles/sample, DPS only
};

// Half-bandwidth giving a Slepian dimension 2TW equal to L.
double default_dps_bandwidth(Index T, Index L);

// First L discrete prolate spheroidal sequences of length T and
// half-bandwidth W, ordered by decreasing in-band energy concentration.
// Each column is unit norm with its first nonzero entry positive.
SubspaceBasis dps_basis(Index T, double W, Index L);

SubspaceBasis identity_basis(Index T);

// Fraction of a sequence's energy inside |f| <= W, i.e. v^T S v / v^T v with
// the sinc kernel S(m, n) = sin(2 pi W (m - n)) / (pi (m - n)).
double band_concentration(const Vector& v, double W);

// h_n = cos((n - 10) pi / 4) exp(-|0.225 n - 2|^1.5)
Vector pulse_cosine_decay(Index n_count = 21);

// h_n = 2 u exp(0.5 - 2 u^2) with u = n pi f_c / f_s - 2 (unit peak magnitude).
Vector pulse_gaussian_derivative(double f_c = 2.0, double f_s = 36.0, Index n_count = 23);

}  // namespace bdconv
