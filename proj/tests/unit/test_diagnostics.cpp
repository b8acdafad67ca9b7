#include <cmath>

#include "bdconv/diagnostics.hpp"
#include "bdconv/error.hpp"
#include "bdconv/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace bdconv;

namespace {

ChainSet scalar_chains(std::initializer_list<std::initializer_list<double>> values) {
  ChainSet set;
  for (const auto& c : values) {
    Matrix m(static_cast<Index>(c.size()), 1);
    Index i = 0;
    for (double v : c) m(i++, 0) = v;
    set.chains.push_back(m);
  }
  set.monitored = {"x0"};
  return set;
}

}  // namespace

TEST_CASE("mpsrf hand example") {
  const ChainSet set = scalar_chains({{0.0, 2.0}, {1.0, 3.0}});
  CHECK(std::abs(mpsrf(set, 1.0) - 0.875) < 1e-12);
}

TEST_CASE("mpsrf of identical chains is (i - 1) / i") {
  Rng rng(81);
  ChainSet set;
  const Matrix c = Matrix::Random(40, 3);
  set.chains = {c, c, c};
  set.monitored = {"a", "b", "c"};
  CHECK(mpsrf(set, 0.5) == doctest::Approx(19.0 / 20.0).epsilon(1e-10));
}

TEST_CASE("mpsrf of constant chains is undefined") {
  const ChainSet set = scalar_chains({{1.0, 1.0, 1.0}, {2.0, 2.0, 2.0}});
  CHECK_THROWS_AS(mpsrf(set, 1.0), DiagnosticUndefined);
}

TEST_CASE("mpsrf validates the chain set") {
  ChainSet one = scalar_chains({{0.0, 1.0}});
  CHECK_THROWS_AS(mpsrf(one, 1.0), InvalidArgument);
  ChainSet ragged = scalar_chains({{0.0, 1.0}, {0.0, 1.0, 2.0}});
  CHECK_THROWS_AS(mpsrf(ragged, 1.0), InvalidArgument);
}

TEST_CASE("mpsrf lower bound and affine invariance") {
  Rng rng(82);
  const Index d = 4, n = 200;
  ChainSet set;
  for (int j = 0; j < 5; ++j) {
    Matrix c(n, d);
    for (Index i = 0; i < n; ++i)
      for (Index k = 0; k < d; ++k) c(i, k) = rng.normal() + 0.3 * j * (k == 1);
    set.chains.push_back(c);
  }
  set.monitored = {"a", "b", "c", "d"};
  const double r = mpsrf(set, 0.5);
  CHECK(r >= 99.0 / 100.0);
  const Matrix M = Matrix::Random(d, d) + 3.0 * Matrix::Identity(d, d);
  const Vector shift = Vector::LinSpaced(d, -2.0, 5.0);
  ChainSet moved = set;
  for (Matrix& c : moved.chains) c = (c * M.transpose()).rowwise() + shift.transpose();
  CHECK(mpsrf(moved, 0.5) == doctest::Approx(r).epsilon(1e-8));
}

TEST_CASE("mpsrf of well mixed chains is close to one") {
  Rng rng(83);
  ChainSet set;
  for (int j = 0; j < 10; ++j) {
    Matrix c(2000, 5);
    for (Index i = 0; i < c.rows(); ++i)
      for (Index k = 0; k < 5; ++k) c(i, k) = rng.normal();
    set.chains.push_back(c);
  }
  set.monitored = {"a", "b", "c", "d", "e"};
  CHECK(mpsrf(set, 0.5) < 1.02);
}

TEST_CASE("mpsrf trace matches direct evaluation at each checkpoint") {
  Rng rng(84);
  ChainSet set;
  for (int j = 0; j < 3; ++j) {
    Matrix c(1000, 2);
    double a = 0.0, b = 0.0;
    for (Index i = 0; i < c.rows(); ++i) {
      a = 0.9 * a + rng.normal();
      b = 0.5 * b + rng.normal() + 0.01 * j;
      c(i, 0) = a;
      c(i, 1) = b;
    }
    set.chains.push_back(c);
  }
  set.monitored = {"a", "b"};
  const auto trace = mpsrf_trace(set, 100, 0.5);
  CHECK(trace.size() == 10);
  for (const MpsrfPoint& p : trace) {
    ChainSet head;
    head.monitored = set.monitored;
    for (const Matrix& c : set.chains) head.chains.push_back(c.topRows(p.iter));
    CHECK(p.rhat == doctest::Approx(mpsrf(head, 0.5)).epsilon(1e-9));
  }
  CHECK(first_convergence(trace, 1e9) == 100);
  CHECK(first_convergence(trace, 0.0) == -1);
  std::vector<MpsrfPoint> with_nan = {{100, std::nan("")}, {200, 1.5}, {300, 1.1}};
  CHECK(first_convergence(with_nan) == 300);
}

TEST_CASE("posterior mean") {
  Matrix c(4, 1);
  c << 1, 2, 3, 4;
  CHECK(posterior_mean(c, 0.5)[0] == doctest::Approx(3.5));
  CHECK(posterior_mean(Matrix::Constant(8, 2, 1.25))[1] == 1.25);
  Matrix long_chain(8, 1);
  long_chain << 1, 2, 3, 4, 5, 6, 7, 8;
  CHECK(posterior_mean(long_chain)[0] == doctest::Approx(7.5));
  CHECK_THROWS_AS(posterior_mean(c, 1.0), InvalidArgument);
  CHECK_THROWS_AS(posterior_mean(Matrix(0, 1), 0.5), InvalidArgument);
}

TEST_CASE("nmse") {
  Vector t(2), e(2);
  t << 1, 0;
  e << 0, 1;
  CHECK(nmse(t, t) == 0.0);
  CHECK(nmse(t, Vector::Zero(2)) == 1.0);
  CHECK(nmse(t, e) == 2.0);
  CHECK_THROWS_AS(nmse(Vector::Zero(2), e), InvalidArgument);
  Rng rng(85);
  const Vector a = oracle::random_vector(5, rng), b = oracle::random_vector(5, rng);
  const Matrix Q = Eigen::HouseholderQR<Matrix>(Matrix::Random(5, 5)).householderQ();
  CHECK(nmse(Q * a, Q * b) == doctest::Approx(nmse(a, b)).epsilon(1e-12));
}

TEST_CASE("success rate") {
  const std::vector<NmsePair> all = {{0.01, 0.02}, {0.05, 0.0}};
  CHECK(success_rate(all, 0.1).rate_x == 1.0);
  CHECK(success_rate(all, 0.1).rate_h == 1.0);
  const std::vector<NmsePair> half = {{0.01, 0.5}, {0.5, 0.01}, {0.09, 0.2}, {0.2, 0.05}};
  CHECK(success_rate(half, 0.1).rate_x == 0.5);
  CHECK(success_rate(half, 0.1).rate_h == 0.5);
  CHECK(success_rate({{0.1, 0.1}}, 0.1).rate_x == 1.0);
  CHECK_THROWS_AS(success_rate({}, 0.1), InvalidArgument);
}
