#include <beinf/distribution.hpp>

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace beinf;

namespace {

BeinfParams random_params(std::mt19937_64& gen) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> shape(0.1, 50.0);
  double p0 = unit(gen);
  double p1 = unit(gen);
  const double scale = unit(gen) * 0.98 / (p0 + p1);  // p0 + p1 < 0.98
  return {p0 * scale, p1 * scale, shape(gen), shape(gen)};
}

}  // namespace

TEST(Parametrization, ToGamlssExamples) {
  const auto g1 = to_gamlss({0.0, 0.0, 1.0, 1.0});
  EXPECT_DOUBLE_EQ(g1.mu, 0.5);
  EXPECT_DOUBLE_EQ(g1.sigma, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(g1.nu, 0.0);
  EXPECT_DOUBLE_EQ(g1.tau, 0.0);

  const auto g2 = to_gamlss({0.2, 0.3, 2.0, 2.0});
  EXPECT_NEAR(g2.mu, 0.5, 1e-15);
  EXPECT_NEAR(g2.sigma, 0.2, 1e-15);
  EXPECT_NEAR(g2.nu, 0.4, 1e-15);
  EXPECT_NEAR(g2.tau, 0.6, 1e-15);

  EXPECT_THROW(to_gamlss({0.5, 0.5, 2.0, 3.0}), DegenerateError);
}

TEST(Parametrization, FromGamlssExamples) {
  const auto p1 = from_gamlss({0.5, 1.0 / 3.0, 0.0, 0.0});
  EXPECT_NEAR(p1.p0, 0.0, 1e-15);
  EXPECT_NEAR(p1.p1, 0.0, 1e-15);
  EXPECT_NEAR(p1.a, 1.0, 1e-14);
  EXPECT_NEAR(p1.b, 1.0, 1e-14);

  const auto p2 = from_gamlss({0.5, 0.2, 0.4, 0.6});
  EXPECT_NEAR(p2.p0, 0.2, 1e-15);
  EXPECT_NEAR(p2.p1, 0.3, 1e-15);
  EXPECT_NEAR(p2.a, 2.0, 1e-14);
  EXPECT_NEAR(p2.b, 2.0, 1e-14);

  EXPECT_THROW(from_gamlss({0.0, 0.2, 0.1, 0.1}), DomainError);
  EXPECT_THROW(from_gamlss({0.5, 1.0, 0.1, 0.1}), DomainError);
  EXPECT_THROW(from_gamlss({0.5, 0.2, -0.1, 0.1}), DomainError);
}

TEST(Parametrization, RoundTripProperty) {
  std::mt19937_64 gen(31);
  std::uniform_real_distribution<double> open(1e-3, 1.0 - 1e-3);
  std::uniform_real_distribution<double> ratio(0.0, 20.0);
  for (int i = 0; i < 1000; ++i) {
    const GamlssParams g{open(gen), open(gen), ratio(gen), ratio(gen)};
    const auto back = to_gamlss(from_gamlss(g));
    EXPECT_NEAR(back.mu, g.mu, 1e-12);
    EXPECT_NEAR(back.sigma, g.sigma, 1e-12);
    EXPECT_NEAR(back.nu, g.nu, 1e-12);
    EXPECT_NEAR(back.tau, g.tau, 1e-12);

    const auto p = random_params(gen);
    const auto pb = from_gamlss(to_gamlss(p));
    EXPECT_NEAR(pb.p0, p.p0, 1e-12);
    EXPECT_NEAR(pb.p1, p.p1, 1e-12);
    EXPECT_NEAR(pb.a, p.a, 1e-12 * p.a);
    EXPECT_NEAR(pb.b, p.b, 1e-12 * p.b);
  }
}

TEST(BetaPdf, ClosedForms) {
  EXPECT_NEAR(beta_pdf(0.5, 1.0, 1.0), 1.0, 1e-14);
  EXPECT_NEAR(beta_pdf(0.5, 2.0, 2.0), 1.5, 1e-14);
  EXPECT_NEAR(beta_pdf(0.25, 2.0, 3.0), 1.6875, 1e-14);
  EXPECT_THROW(beta_pdf(0.0, 2.0, 2.0), DomainError);
  EXPECT_THROW(beta_pdf(1.0, 2.0, 2.0), DomainError);
}

TEST(BeinfPdf, Branches) {
  const BeinfParams p{0.2, 0.1, 2.0, 2.0};
  EXPECT_DOUBLE_EQ(beinf_pdf(0.0, p), 0.2);
  EXPECT_DOUBLE_EQ(beinf_pdf(1.0, p), 0.1);
  EXPECT_NEAR(beinf_pdf(0.5, p), 1.05, 1e-14);
  EXPECT_THROW(beinf_pdf(1.5, p), DomainError);
}

TEST(BeinfCdf, Examples) {
  const BeinfParams p{0.2, 0.1, 2.0, 2.0};
  EXPECT_DOUBLE_EQ(beinf_cdf(0.0, p), 0.2);
  EXPECT_DOUBLE_EQ(beinf_cdf(1.0, p), 1.0);
  EXPECT_NEAR(beinf_cdf(0.5, p), 0.55, 1e-15);
  EXPECT_DOUBLE_EQ(beinf_cdf(1.0, {0.0, 0.0, 3.0, 7.0}), 1.0);
  // Left limit at 1 is 1 - p1.
  EXPECT_NEAR(beinf_cdf(std::nextafter(1.0, 0.0), p), 0.9, 1e-12);
}

TEST(BeinfCdf, MonotoneWithJumps) {
  std::mt19937_64 gen(77);
  for (int i = 0; i < 100; ++i) {
    const auto p = random_params(gen);
    EXPECT_DOUBLE_EQ(beinf_cdf(0.0, p), p.p0);
    EXPECT_DOUBLE_EQ(beinf_cdf(1.0, p), 1.0);
    double prev = beinf_cdf(0.0, p);
    for (int k = 1; k <= 200; ++k) {
      const double v = beinf_cdf(k / 200.0, p);
      EXPECT_GE(v, prev - 1e-15);
      prev = v;
    }
  }
}

TEST(BeinfQuantile, Examples) {
  const BeinfParams p{0.2, 0.1, 2.0, 2.0};
  EXPECT_EQ(beinf_quantile(0.1, p), 0.0);
  EXPECT_EQ(beinf_quantile(0.2, p), 0.0);
  EXPECT_EQ(beinf_quantile(0.95, p), 1.0);
  EXPECT_NEAR(beinf_quantile(0.55, p), 0.5, 1e-12);
}

TEST(BeinfQuantile, GeneralizedInverseOfCdf) {
  std::mt19937_64 gen(3);
  for (int i = 0; i < 200; ++i) {
    const auto p = random_params(gen);
    for (int k = 1; k < 100; ++k) {
      const double q = k / 100.0;
      const double r = beinf_quantile(q, p);
      const double c = beinf_cdf(r, p);
      // cdf(quantile(q)) >= q, with equality on the continuous part.
      EXPECT_GE(c, q - 1e-9);
      if (r > 0.0 && r < 1.0) {
        EXPECT_NEAR(c, q, 1e-9);
      }
      // Minimality: anything smaller has cdf < q.
      if (r > 0.0) {
        const double smaller = r == 1.0 ? std::nextafter(1.0, 0.0) : std::max(0.0, r - 1e-6);
        EXPECT_LT(beinf_cdf(smaller, p), q + 1e-9);
      }
    }
  }
}

TEST(BeinfSample, DegenerateMasses) {
  const auto zeros = beinf_sample({1.0, 0.0, 2.0, 2.0}, 5, 1);
  EXPECT_EQ(zeros, std::vector<double>(5, 0.0));
  const auto ones = beinf_sample({0.0, 1.0, 2.0, 2.0}, 3, 1);
  EXPECT_EQ(ones, std::vector<double>(3, 1.0));
  EXPECT_TRUE(beinf_sample({0.2, 0.1, 2.0, 2.0}, 0, 1).empty());
}

TEST(BeinfSample, DeterministicGivenSeed) {
  const BeinfParams p{0.2, 0.1, 2.0, 3.0};
  EXPECT_EQ(beinf_sample(p, 500, 42), beinf_sample(p, 500, 42));
  EXPECT_NE(beinf_sample(p, 500, 42), beinf_sample(p, 500, 43));
}

TEST(BeinfSample, ZeroFractionMonteCarlo) {
  const BeinfParams p{0.2, 0.1, 2.0, 2.0};
  const auto draws = beinf_sample(p, 100000, 2718);
  const double zeros = static_cast<double>(std::count(draws.begin(), draws.end(), 0.0));
  const double ones = static_cast<double>(std::count(draws.begin(), draws.end(), 1.0));
  EXPECT_NEAR(zeros / 1e5, 0.2, 0.005);
  EXPECT_NEAR(ones / 1e5, 0.1, 0.005);
}

TEST(BeinfMean, Examples) {
  EXPECT_DOUBLE_EQ(beinf_mean({0.0, 0.0, 1.0, 1.0}), 0.5);
  EXPECT_DOUBLE_EQ(beinf_mean({0.0, 1.0, 4.0, 9.0}), 1.0);
  EXPECT_NEAR(beinf_mean({0.2, 0.1, 2.0, 2.0}), 0.45, 1e-15);
}

TEST(BeinfMean, MonteCarloOracle) {
  const BeinfParams p{0.2, 0.1, 2.0, 2.0};
  const auto draws = beinf_sample(p, 1000000, 161803);
  const double mean = std::accumulate(draws.begin(), draws.end(), 0.0) / static_cast<double>(draws.size());
  EXPECT_NEAR(mean, 0.45, 0.001);
}

TEST(BeinfDistribution, NormalizationByQuadrature) {
  std::mt19937_64 gen(1234);
  for (int i = 0; i < 100; ++i) {
    const auto p = random_params(gen);
    const double beta_mass = oracle::integrate_unit_density(
        [](double r, double a, double b) { return beta_pdf(r, a, b); }, p.a, p.b);
    EXPECT_NEAR(p.p0 + p.p1 + (1.0 - p.p0 - p.p1) * beta_mass, 1.0, 1e-8) << p.a << " " << p.b;
  }
}

TEST(BeinfSample, KolmogorovSmirnov) {
  const BeinfParams p{0.15, 0.25, 0.7, 3.5};
  const auto draws = beinf_sample(p, 100000, 9001);
  const double d = oracle::ks_distance(
      draws, [&](double v) { return beinf_cdf(v, p); },
      [&](double v) {
        if (v == 0.0) return 0.0;
        if (v == 1.0) return 1.0 - p.p1;
        return beinf_cdf(v, p);
      });
  EXPECT_LT(d, oracle::ks_critical_1pct(draws.size()));
}
