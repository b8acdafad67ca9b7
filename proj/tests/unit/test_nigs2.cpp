#include <cmath>
#include <string>
#include <vector>

#include "bdconv/error.hpp"
#include "bdconv/nigs2.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace bdconv;

namespace {

std::vector<Index> outside(Index K, const WindowState& w) {
  std::vector<Index> idx;
  for (Index i = 0; i < K; ++i)
    if (i < w.n || i >= w.n + w.Q) idx.push_back(i);
  return idx;
}

}  // namespace

TEST_CASE("window advance") {
  CHECK(window_advance(1, 300, 10) == 0);
  CHECK(window_advance(291, 300, 10) == 290);
  CHECK(window_advance(292, 300, 10) == 0);
  CHECK(window_advance(1, 5, 4) == 0);
  CHECK(window_advance(2, 5, 4) == 1);
  CHECK(window_advance(3, 5, 4) == 0);
  CHECK_THROWS_AS(window_advance(1, 5, 6), InvalidArgument);
  CHECK_THROWS_AS(window_advance(0, 5, 2), InvalidArgument);
}

TEST_CASE("collapsed complement equals the marginal of the full x conditional") {
  Rng rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    const Index K = 2 + static_cast<Index>(rng.uniform() * 11);  // 2..12
    const Index T = 1 + static_cast<Index>(rng.uniform() * 4);
    const Index Q = 1 + static_cast<Index>(rng.uniform() * (K - 1));
    const WindowState w{Q, static_cast<Index>(rng.uniform() * (K - Q + 1))};
    const Matrix H = build_toeplitz_H(oracle::random_vector(T, rng), K);
    const Vector y = oracle::random_vector(K + T - 1, rng);
    const Vector sx = oracle::random_positive(K, rng, 0.05, 3.0);
    const double sv = 0.05 + rng.uniform();
    const auto full = x_posterior_params(y, H, sx, sv);
    const auto comp = complement_posterior_params(y, H, w, sx, sv);
    const auto idx = outside(K, w);
    double dev = 0.0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      dev = std::max(dev, std::abs(comp.mean[i] - full.mean[idx[i]]));
      for (std::size_t j = 0; j < idx.size(); ++j)
        dev = std::max(dev, std::abs(comp.covariance(i, j) - full.covariance(idx[i], idx[j])));
    }
    CHECK(dev < 1e-8);
  }
}

TEST_CASE("block conditional properties") {
  Rng rng(42);
  const Index K = 8, T = 3, N = K + T - 1;
  const WindowState w{3, 2};
  Matrix H = build_toeplitz_H(oracle::random_vector(T, rng), K);
  const Vector y = oracle::random_vector(N, rng);
  const Vector x = oracle::random_vector(K, rng);
  const Vector sb = oracle::random_positive(3, rng);
  const double sv = 0.3;

  const BlockPosterior bp = block_posterior_params(y, H, w, x, sb, sv);
  CHECK((bp.D - bp.D.transpose()).norm() < 1e-12);
  Eigen::SelfAdjointEigenSolver<Matrix> es(bp.D);
  CHECK(es.eigenvalues().minCoeff() > -1e-12);
  CHECK(es.eigenvalues().maxCoeff() < 1.0 + 1e-12);

  // Conditional of a Gaussian: x_l | x_~l from the full joint precision.
  const auto full = x_posterior_params(y, H, [&] {
    Vector s = oracle::random_positive(K, rng);
    s.segment(2, 3) = sb;
    return s;
  }(), sv);
  const Matrix P = full.covariance.inverse();
  const Matrix Pll = P.block(2, 2, 3, 3);
  // x_l | x_~l ~ N(mu_l - P_ll^-1 P_l~l (x_~l - mu_~l), P_ll^-1).
  Vector diff = x - full.mean;
  diff.segment(2, 3).setZero();
  const Vector expected_mean = full.mean.segment(2, 3) - Pll.ldlt().solve((P * diff).segment(2, 3));
  CHECK((bp.mean - expected_mean).norm() < 1e-9);
  CHECK((bp.covariance - Matrix(Pll.inverse())).norm() < 1e-9);

  // Q = 1 scalar algebra.
  const WindowState w1{1, 4};
  const BlockPosterior b1 = block_posterior_params(y, H, w1, x, Vector::Constant(1, 0.7), sv);
  const double var = 1.0 / (H.col(4).squaredNorm() / sv + 1.0 / 0.7);
  Vector r = y - H * x + H.col(4) * x[4];
  CHECK(b1.covariance(0, 0) == doctest::Approx(var).epsilon(1e-12));
  CHECK(b1.mean[0] == doctest::Approx(var * H.col(4).dot(r) / sv).epsilon(1e-12));

  // Detached block.
  H.block(0, 2, N, 3).setZero();
  const BlockPosterior d = block_posterior_params(y, H, w, x, sb, sv);
  CHECK((d.D - Matrix::Identity(N, N)).norm() < 1e-14);
  CHECK((d.covariance - Matrix(sb.asDiagonal())).norm() < 1e-14);
  CHECK(d.mean.norm() < 1e-14);
  const auto comp = complement_posterior_params(y, H, w, Vector::Ones(K), sv);
  const auto restricted = x_posterior_params(y, H, Vector::Ones(K), sv);
  const auto idx = outside(K, w);
  for (std::size_t i = 0; i < idx.size(); ++i) CHECK(comp.mean[i] == doctest::Approx(restricted.mean[idx[i]]));
}

TEST_CASE("sigma block target is the x_l-marginal likelihood times the prior") {
  Rng rng(43);
  const Index K = 7, T = 3, N = K + T - 1;
  const WindowState w{2, 3};
  const Matrix H = build_toeplitz_H(oracle::random_vector(T, rng), K);
  const Vector y = oracle::random_vector(N, rng);
  const Vector x = oracle::random_vector(K, rng);
  const double sv = 0.4, ax = 1.3, bx = 0.6;
  Vector ytilde = y - H * x + H.middleCols(3, 2) * x.segment(3, 2);
  const Matrix Hl = H.middleCols(3, 2);
  auto brute = [&](const Vector& s) {
    const Matrix C = sv * Matrix::Identity(N, N) + Hl * s.asDiagonal() * Hl.transpose();
    return oracle::log_mvn_zero_mean(ytilde, C) + log_ig_density(s[0], ax, bx) + log_ig_density(s[1], ax, bx);
  };
  Vector s0(2);
  s0 << 0.5, 1.2;
  const double ref_t = sigma_block_log_target(s0, y, x, H, w, sv, ax, bx);
  const double ref_b = brute(s0);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector s = oracle::random_positive(2, rng, 0.01, 5.0);
    const double t = sigma_block_log_target(s, y, x, H, w, sv, ax, bx);
    CHECK(t - ref_t == doctest::Approx(brute(s) - ref_b).epsilon(1e-8));
  }
  Vector bad = s0;
  bad[1] = -1.0;
  CHECK(sigma_block_log_target(bad, y, x, H, w, sv, ax, bx) == -INFINITY);

  // Detached block: only the prior remains.
  Matrix H0 = H;
  H0.middleCols(3, 2).setZero();
  Vector s1(2);
  s1 << 2.0, 0.3;
  const double dt = sigma_block_log_target(s1, y, x, H0, w, sv, ax, bx) - sigma_block_log_target(s0, y, x, H0, w, sv, ax, bx);
  const double dp = log_ig_density(2.0, ax, bx) + log_ig_density(0.3, ax, bx) - log_ig_density(0.5, ax, bx) -
                    log_ig_density(1.2, ax, bx);
  CHECK(dt == doctest::Approx(dp).epsilon(1e-12));
}

TEST_CASE("sigma block target grid mean grows with the data correlation") {
  Rng rng(44);
  const Index K = 3, T = 2;
  const WindowState w{1, 1};
  const Matrix H = build_toeplitz_H(Vector::Ones(T), K);
  const Vector x = Vector::Zero(K);
  auto grid_mean = [&](double amp) {
    const Vector y = amp * H.col(1);
    return oracle::GridDensity(
               [&](double s) { return s <= 0.0 ? -INFINITY : sigma_block_log_target(Vector::Constant(1, s), y, x, H, w, 0.1, 3.0, 1.0); },
               0.0, 200.0, 100001)
        .mean;
  };
  CHECK(grid_mean(3.0) > grid_mean(1.0));
}

TEST_CASE("step 5 stationary law matches grid quadrature") {
  Rng rng(45);
  const Index K = 3, T = 2;
  const ModelConfig c = ModelConfig::make(K, Matrix::Identity(T, T));
  ParameterState s;
  s.x = Vector::Zero(K);
  s.x << 0.5, 0.0, -0.3;
  s.sigma_x_sq = Vector::Ones(K);
  s.gamma = Vector::Ones(T);
  s.sigma_v_sq = 0.2;
  s.alpha_x = 2.0;
  s.beta_x = 1.0;
  Measurement m{Vector::Zero(K + T - 1)};
  m.y << 0.4, 1.2, 0.9, -0.2;
  const WindowState w{1, 1};
  SliceSamplerConfig slice;
  std::vector<double> draws;
  for (int i = 0; i < 150000; ++i) {
    step5_sample_sigma_block(s, m, c, w, slice, rng);
    if (i % 3 == 0) draws.push_back(s.sigma_x_sq[1]);
  }
  const Matrix H = build_toeplitz_H(s.gamma, K);
  const oracle::GridDensity grid(
      [&](double v) { return v <= 0.0 ? -INFINITY : sigma_block_log_target(Vector::Constant(1, v), m.y, s.x, H, w, 0.2, 2.0, 1.0); },
      0.0, 300.0, 400001);
  CHECK(oracle::ks_statistic(draws, [&](double v) { return grid.cdf(v); }) < 0.02);
  CHECK(s.sigma_x_sq[0] == 1.0);
  CHECK(s.sigma_x_sq[2] == 1.0);
}

TEST_CASE("step 6 block draw matches the scalar posterior") {
  Rng rng(46);
  const Index K = 3, T = 2;
  const ModelConfig c = ModelConfig::make(K, Matrix::Identity(T, T));
  ParameterState s;
  s.x = Vector::Zero(K);
  s.sigma_x_sq = Vector::Constant(K, 0.8);
  s.gamma = Vector::Zero(T);
  s.gamma << 1.0, -0.5;
  s.sigma_v_sq = 0.3;
  Measurement m{Vector::Zero(4)};
  m.y << 0.1, 0.9, -0.4, 0.2;
  const WindowState w{1, 1};
  const Matrix H = build_toeplitz_H(s.gamma, K);
  const BlockPosterior bp = block_posterior_params(m.y, H, w, s.x, Vector::Constant(1, 0.8), 0.3);
  double s1 = 0.0, s2 = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    step6_sample_x_block(s, m, c, w, rng);
    s1 += s.x[1];
    s2 += s.x[1] * s.x[1];
  }
  const double mean = s1 / n;
  CHECK(mean == doctest::Approx(bp.mean[0]).epsilon(0.02));
  CHECK(s2 / n - mean * mean == doctest::Approx(bp.covariance(0, 0)).epsilon(0.03));
  CHECK(s.x[0] == 0.0);
  CHECK(s.x[2] == 0.0);
}

TEST_CASE("sigma_v marginal target") {
  Rng rng(47);
  const Index K = 4, T = 2, N = K + T - 1;
  const Matrix A = Matrix::Identity(T, T);
  const Vector y = oracle::random_vector(N, rng);
  const Vector x = oracle::random_vector(K, rng);
  const Matrix X = build_toeplitz_X(x, T);
  const double sg = 3.0;
  const Matrix BBt = X * A * A.transpose() * X.transpose();
  auto brute = [&](double s) {
    return oracle::log_mvn_zero_mean(y, s * Matrix::Identity(N, N) + sg * BBt) - std::log(s);
  };
  const double t0 = sigma_v_marginal_log_target(0.5, y, X, A, sg), b0 = brute(0.5);
  for (double s : {0.01, 0.2, 1.0, 4.0, 30.0})
    CHECK(sigma_v_marginal_log_target(s, y, X, A, sg) - t0 == doctest::Approx(brute(s) - b0).epsilon(1e-9));
  const GammaSystem sys = gamma_system(y, x, A);
  CHECK(sigma_v_marginal_log_target(0.7, sys, N, sg) == doctest::Approx(sigma_v_marginal_log_target(0.7, y, X, A, sg)));
  CHECK(sigma_v_marginal_log_target(0.0, y, X, A, sg) == -INFINITY);

  // B = 0: inverse gamma shape.
  const Matrix X0 = Matrix::Zero(N, T);
  const double yy = y.squaredNorm();
  const double c0 = sigma_v_marginal_log_target(1.0, y, X0, A, sg) - log_ig_density(1.0, N / 2.0, yy / 2.0);
  for (double s : {0.1, 0.5, 3.0})
    CHECK(sigma_v_marginal_log_target(s, y, X0, A, sg) - log_ig_density(s, N / 2.0, yy / 2.0) ==
          doctest::Approx(c0).epsilon(1e-10));
  // Scale check with B = 0.
  const double c = 2.5;
  const double d1 = sigma_v_marginal_log_target(0.3 * c, std::sqrt(c) * y, X0, A, sg) - sigma_v_marginal_log_target(0.3, y, X0, A, sg);
  const double d2 = sigma_v_marginal_log_target(1.7 * c, std::sqrt(c) * y, X0, A, sg) - sigma_v_marginal_log_target(1.7, y, X0, A, sg);
  CHECK(d1 == doctest::Approx(d2).epsilon(1e-10));

  // An IG(a, b) prior replaces 1/s.
  Hyperpriors hp;
  hp.sigma_v_shape = 2.0;
  hp.sigma_v_scale = 0.3;
  for (double s : {0.1, 1.0, 5.0})
    CHECK(sigma_v_marginal_log_target(s, y, X, A, sg, hp) - sigma_v_marginal_log_target(s, y, X, A, sg) ==
          doctest::Approx(-2.0 * std::log(s) - 0.3 / s).epsilon(1e-10));
}

TEST_CASE("sigma_v marginal target matches quadrature over gamma") {
  // L = 1, N = 2.
  Vector y(2);
  y << 0.7, -0.4;
  Vector x(1);
  x << 1.3;
  const Matrix A = Matrix::Ones(2, 1) / std::sqrt(2.0);
  const Matrix X = build_toeplitz_X(x, 2);
  const double sg = 2.0;
  auto quad = [&](double s) {
    double z = 0.0;
    const double dg = 1e-4;
    for (double g = -30.0; g <= 30.0; g += dg) {
      const Vector r = y - X * A * Vector::Constant(1, g);
      z += std::exp(-r.squaredNorm() / (2.0 * s) - g * g / (2.0 * sg)) * dg;
    }
    return std::log(z) - std::log(2.0 * M_PI * s) - 0.5 * std::log(2.0 * M_PI * sg) - std::log(s);
  };
  const double t0 = sigma_v_marginal_log_target(0.5, y, X, A, sg), q0 = quad(0.5);
  for (double s : {0.05, 0.3, 2.0, 10.0}) {
    const double rel = std::exp((sigma_v_marginal_log_target(s, y, X, A, sg) - t0) - (quad(s) - q0));
    CHECK(rel == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("step 7 stationary law matches grid quadrature") {
  Rng rng(48);
  const Index K = 3, T = 2;
  const ModelConfig c = ModelConfig::make(K, Matrix::Identity(T, T), 2.0);
  ParameterState s;
  s.x = Vector::Zero(K);
  s.x << 0.8, -0.2, 0.5;
  s.sigma_x_sq = Vector::Ones(K);
  s.gamma = Vector::Ones(T);
  Measurement m{Vector::Zero(4)};
  m.y << 0.9, 0.5, 0.1, 0.6;
  SliceSamplerConfig slice;
  std::vector<double> draws;
  for (int i = 0; i < 150000; ++i) {
    step7_sample_sigma_v(s, m, c, slice, rng);
    if (i % 3 == 0) draws.push_back(s.sigma_v_sq);
  }
  const Matrix X = build_toeplitz_X(s.x, T);
  const oracle::GridDensity grid(
      [&](double v) { return v <= 0.0 ? -INFINITY : sigma_v_marginal_log_target(v, m.y, X, c.A, 2.0); }, 0.0, 2000.0,
      2000001);
  CHECK(oracle::ks_statistic(draws, [&](double v) { return grid.cdf(v); }) < 0.02);
}

TEST_CASE("complement step is a no-op when the window covers x") {
  Rng rng(49);
  const ModelConfig c = ModelConfig::make(4, Matrix::Identity(2, 2));
  Measurement m{oracle::random_vector(5, rng)};
  ParameterState s = initialize_state(m, c, rng);
  const Vector before = s.x;
  step4_sample_x_complement(s, m, c, WindowState{4, 0}, rng);
  CHECK(s.x == before);
}

TEST_CASE("nigs2 step order") {
  Rng rng(50);
  const ModelConfig c = ModelConfig::make(6, Matrix::Identity(2, 2));
  Measurement m{oracle::random_vector(7, rng)};
  ParameterState s = initialize_state(m, c, rng);
  std::vector<std::string> seen;
  Nigs2Config cfg;
  cfg.window = 3;
  cfg.on_step = [&](std::string_view n) { seen.emplace_back(n); };
  nigs2_iterate(s, m, c, cfg, 1, rng);
  const std::vector<std::string> expected = {
      "step1_sample_alpha_x",  "step2_sample_beta_x",  "step3_sample_sigma_x", "step4_sample_x_complement",
      "step5_sample_sigma_block", "step6_sample_x_block", "step7_sample_sigma_v", "step8_sample_gamma",
      "ambiguity_moves"};
  CHECK(seen == expected);
}
