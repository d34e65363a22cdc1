#include <doctest.h>

#include <cmath>
#include <vector>

#include "tlsuff/glm.hpp"
#include "tlsuff/simgen.hpp"

using namespace tlsuff;

TEST_CASE("default gamma truncates and pads") {
  const Vector g8 = default_gamma(8);
  REQUIRE(g8.size() == 8);
  CHECK(g8[0] == 0.5);
  CHECK(g8[4] == 0.5);
  CHECK(g8[5] == -1.25);
  CHECK(g8[6] == 0.0);
  CHECK(g8[7] == 0.0);

  const Vector g4 = default_gamma(4);
  REQUIRE(g4.size() == 4);
  for (int k = 0; k < 4; ++k) CHECK(g4[k] == 0.5);

  const Vector g10 = default_gamma(10);
  REQUIRE(g10.size() == 10);
  CHECK(g10[5] == -1.25);
  CHECK(g10[8] == 0.0);
  CHECK(g10[9] == 0.0);
}

TEST_CASE("spec validation rejects bad parameters") {
  GenSpec s;
  s.p = 10;
  s.K = 4;
  s.gamma = default_gamma(4);
  CHECK_NOTHROW(s.validate());

  GenSpec bad = s;
  bad.p = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = s;
  bad.K = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = s;
  bad.rho = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = s;
  bad.rho = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = s;
  bad.rho = -0.3;
  CHECK_NOTHROW(bad.validate());
  bad = s;
  bad.gamma = default_gamma(5);
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("AR(1) rows have the stationary covariance") {
  RngStream rng(501);
  const Eigen::Index n = 100000, p = 4;
  const double rho = 0.5;
  const Matrix X = sample_ar1_rows(n, p, rho, rng);

  const Matrix C = X.transpose() * X / static_cast<double>(n);
  for (int j = 0; j < p; ++j) {
    for (int k = 0; k < p; ++k) {
      CHECK(std::fabs(C(j, k) - std::pow(rho, std::abs(j - k))) < 0.02);
    }
  }
  CHECK(std::fabs(X.mean()) < 0.01);
}

TEST_CASE("rho = 0 gives independent columns") {
  RngStream rng(502);
  const Matrix X = sample_ar1_rows(50000, 3, 0.0, rng);
  const Matrix C = X.transpose() * X / 50000.0;
  CHECK(std::fabs(C(0, 1)) < 0.02);
  CHECK(std::fabs(C(1, 2)) < 0.02);
  CHECK(std::fabs(C(0, 0) - 1.0) < 0.03);
}

TEST_CASE("AR(1) sampling is deterministic in the stream key") {
  RngStream a(503), b(503);
  const Matrix X1 = sample_ar1_rows(20, 6, 0.5, a);
  const Matrix X2 = sample_ar1_rows(20, 6, 0.5, b);
  CHECK((X1 - X2).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("coefficient columns are differences of unit vectors") {
  RngStream rng(504);
  const int p = 40, K = 5;
  const Vector gamma = default_gamma(K);
  const GroundTruth t = gen_coefficients(p, K, gamma, rng);

  REQUIRE(t.B.rows() == p);
  REQUIRE(t.B.cols() == K);
  CHECK(std::fabs(t.beta0_dir.norm() - 1.0) < 1e-12);
  for (int k = 0; k < K; ++k) {
    CHECK(t.B.col(k).norm() <= 2.0 + 1e-12);
    // column + normalized beta~_0 must itself be a unit vector
    CHECK(std::fabs((t.B.col(k) + t.beta0_dir).norm() - 1.0) < 1e-12);
  }
  CHECK((t.theta - t.B * gamma).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("mean squared column norm approaches 2 in high dimension") {
  const int p = 200, K = 3;
  const Vector gamma = default_gamma(K);
  double acc = 0.0;
  int count = 0;
  for (int rep = 0; rep < 100; ++rep) {
    RngStream rng(600 + static_cast<std::uint64_t>(rep));
    const GroundTruth t = gen_coefficients(p, K, gamma, rng);
    for (int k = 0; k < K; ++k) {
      acc += t.B.col(k).squaredNorm();
      ++count;
    }
  }
  CHECK(acc / count == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("source labels are uniform when the coefficients vanish") {
  GenSpec s;
  s.p = 6;
  s.K = 3;
  s.gamma = default_gamma(3);
  GroundTruth t;
  t.B = Matrix::Zero(6, 3);
  t.theta = Vector::Zero(6);
  t.beta0_dir = Vector::Unit(6, 0);

  RngStream xr(701), lr(702);
  const Eigen::Index N = 40000;
  const SourceDataset d = gen_source(N, s, t, xr, lr);
  REQUIRE(d.ys.size() == N);

  std::vector<double> counts(4, 0.0);
  for (Eigen::Index i = 0; i < N; ++i) {
    REQUIRE(d.ys[i] >= 0);
    REQUIRE(d.ys[i] <= 3);
    counts[static_cast<size_t>(d.ys[i])] += 1.0;
  }
  // chi-square against the uniform law, 3 degrees of freedom
  double chi2 = 0.0;
  const double expect = N / 4.0;
  for (double c : counts) chi2 += (c - expect) * (c - expect) / expect;
  CHECK(chi2 < 16.3);  // 99.9% point of chi-square(3)
}

TEST_CASE("source labels follow the softmax when coefficients are nonzero") {
  GenSpec s;
  s.p = 5;
  s.K = 2;
  s.gamma = default_gamma(2);
  RngStream cr(703);
  const GroundTruth t = gen_coefficients(s.p, s.K, s.gamma, cr);

  RngStream xr(704), lr(705);
  const Eigen::Index N = 60000;
  const SourceDataset d = gen_source(N, s, t, xr, lr);

  const Matrix P = multinomial_probs(d.Xs, t.B);
  for (int k = 0; k <= 2; ++k) {
    double freq = 0.0;
    for (Eigen::Index i = 0; i < N; ++i) freq += d.ys[i] == k ? 1.0 : 0.0;
    CHECK(std::fabs(freq / N - P.col(k).mean()) < 0.01);
  }
}

TEST_CASE("target draws respect the link and the shift") {
  GenSpec s;
  s.p = 8;
  s.K = 3;
  s.gamma = default_gamma(3);
  RngStream cr(706);
  const GroundTruth t = gen_coefficients(s.p, s.K, s.gamma, cr);

  SUBCASE("null mechanism matches the working probabilities") {
    RngStream xr(707), lr(708);
    const Eigen::Index n = 60000;
    const TargetDataset d = gen_target(n, s, t, xr, lr);
    const Vector eta = (d.X * t.B) * s.gamma;
    double rate = 0.0, expect = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      rate += d.y[i];
      expect += sigmoid(eta[i]);
    }
    CHECK(std::fabs(rate / n - expect / n) < 0.01);
  }

  SUBCASE("the shift enters through the first covariate") {
    GenSpec shifted = s;
    shifted.delta = 5.0;
    RngStream xr1(709), lr1(710), xr2(709), lr2(710);
    const Eigen::Index n = 30000;
    const TargetDataset d = gen_target(n, shifted, t, xr1, lr1);
    const Vector eta = (d.X * t.B) * s.gamma + 5.0 * d.X.col(0);
    double rate = 0.0, expect = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      rate += d.y[i];
      expect += sigmoid(eta[i]);
    }
    CHECK(std::fabs(rate / n - expect / n) < 0.012);

    // same streams, delta 0: covariates identical, labels differ
    const TargetDataset d0 = gen_target(n, s, t, xr2, lr2);
    CHECK((d.X - d0.X).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK((d.y - d0.y).lpNorm<Eigen::Infinity>() > 0);
  }
}

TEST_CASE("generation is deterministic end to end") {
  GenSpec s;
  s.p = 10;
  s.K = 4;
  s.gamma = default_gamma(4);

  auto run = [&]() {
    RngStream cr(801), xr(802), lr(803), txr(804), tlr(805);
    const GroundTruth t = gen_coefficients(s.p, s.K, s.gamma, cr);
    const SourceDataset src = gen_source(500, s, t, xr, lr);
    const TargetDataset tgt = gen_target(200, s, t, txr, tlr);
    return std::make_tuple(t.B, src.Xs, src.ys, tgt.X, tgt.y);
  };
  const auto a = run();
  const auto b = run();
  CHECK((std::get<0>(a) - std::get<0>(b)).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((std::get<1>(a) - std::get<1>(b)).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((std::get<2>(a) - std::get<2>(b)).lpNorm<Eigen::Infinity>() == 0);
  CHECK((std::get<3>(a) - std::get<3>(b)).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((std::get<4>(a) - std::get<4>(b)).lpNorm<Eigen::Infinity>() == 0);
}
