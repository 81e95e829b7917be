#include <gtest/gtest.h>

#include <cmath>

#include "fastrates/catalog.hpp"
#include "fastrates/divergences.hpp"
#include "support.hpp"

using namespace fastrates;
using testing_support::uniform_index;

TEST(Divergence, HandValues) {
  std::vector<double> p{1.0, 0.0}, q{0.5, 0.5};
  EXPECT_NEAR(kl_divergence(p, q), std::log(2.0), 1e-15);
  EXPECT_EQ(kl_divergence(q, p), inf);
  EXPECT_NEAR(squared_hellinger(p, q), 2.0 * (1.0 - std::sqrt(0.5)), 1e-15);
  EXPECT_NEAR(total_variation_l1(p, q), 1.0, 1e-15);
  EXPECT_NEAR(renyi_divergence(p, q, 0.5), -2.0 * std::log(std::sqrt(0.5)), 1e-15);
  std::vector<double> a{0.0, 1.0};
  EXPECT_EQ(renyi_divergence(p, a, 0.5), inf);
  EXPECT_THROW(renyi_divergence(p, q, 1.0), std::domain_error);
  EXPECT_THROW(kl_divergence(p, std::vector<double>{1.0}), std::invalid_argument);
}

TEST(Divergence, ClassicalInequalities) {
  Rng rng = substream(71, 0);
  for (int t = 0; t < 500; ++t) {
    std::size_t k = 2 + uniform_index(rng, 6);
    auto p = random_probs(rng, k), q = random_probs(rng, k);
    double kl = kl_divergence(p, q), h2 = squared_hellinger(p, q), tv = total_variation_l1(p, q);
    EXPECT_GE(kl, 0.0);
    EXPECT_LE(h2, kl + 1e-12);
    EXPECT_LE(0.5 * tv * tv, kl + 1e-12);
    EXPECT_NEAR(generalized_hellinger(p, q, 0.5), h2, 1e-12);
    double prev = 0.0;
    for (double alpha : {0.1, 0.3, 0.5, 0.7, 0.9, 0.999}) {
      double r = renyi_divergence(p, q, alpha);
      EXPECT_GE(r, prev - 1e-12);
      EXPECT_LE(r, kl + 1e-9);
      prev = r;
    }
    EXPECT_NEAR(renyi_divergence(p, q, 1.0 - 1e-7), kl, 1e-5 * (1.0 + kl));
    EXPECT_EQ(kl_divergence(p, p), 0.0);
  }
}

TEST(Tilt, NormalizedAndWellSpecifiedRecoversModel) {
  Rng rng = substream(72, 0);
  for (int t = 0; t < 50; ++t) {
    auto m = random_density_model(rng, 5, 3, true);
    for (std::size_t f = 0; f < 3; ++f) {
      auto td = tilted_density(m.problem.probs, excess_loss(m.problem, f), 1.0);
      EXPECT_NEAR(sum(td.density), 1.0, 1e-12);
      for (std::size_t z = 0; z < 5; ++z) EXPECT_NEAR(td.density[z], m.densities[f][z], 1e-12);
    }
  }
  EXPECT_THROW(tilted_density(std::vector<double>{1.0}, std::vector<double>{inf}, 1.0), std::domain_error);
}

TEST(MisspecMetric, SquaredHellingerWhenWellSpecified) {
  Rng rng = substream(73, 0);
  for (int t = 0; t < 50; ++t) {
    auto m = random_density_model(rng, 5, 4, true);
    for (std::size_t f = 0; f < 4; ++f)
      for (std::size_t g = 0; g < 4; ++g) {
        double d = misspec_metric(m.problem, f, g, 1.0);
        EXPECT_NEAR(d, squared_hellinger(m.densities[f], m.densities[g]), 1e-12);
        EXPECT_NEAR(d, misspec_metric(m.problem, g, f, 1.0), 1e-14);
      }
    EXPECT_EQ(misspec_metric(m.problem, 2, 2, 1.0), 0.0);
  }
}

TEST(MisspecMetric, RootSatisfiesTriangleInequality) {
  Rng rng = substream(74, 0);
  for (int t = 0; t < 100; ++t) {
    auto pr = random_problem(rng, 5, 3, 3.0);
    double eb = 0.1 + 2.0 * uniform01(rng);
    double ab = std::sqrt(misspec_metric(pr, 0, 1, eb)), bc = std::sqrt(misspec_metric(pr, 1, 2, eb)),
           ac = std::sqrt(misspec_metric(pr, 0, 2, eb));
    EXPECT_LE(ac, ab + bc + 1e-12);
  }
}

TEST(Ratio, GFunctionValuesAndContinuity) {
  EXPECT_NEAR(ratio_g(0.0, std::exp(1.0)), -1.0 - (1.0 - std::exp(1.0)), 1e-14);
  EXPECT_NEAR(ratio_g(0.5, 4.0), 2.0 * (1.0 - 2.0) + 3.0, 1e-14);
  EXPECT_EQ(ratio_g(0.5, 0.0), 1.0);
  EXPECT_EQ(ratio_g(0.5, 1.0), 0.0);
  for (double eta : {0.0, 0.25, 0.5, 0.9})
    for (double x : {0.49, 0.5, 0.51, -0.49, -0.5, -0.51}) {
      double r = std::exp(x);
      double direct = (eta == 0.0 ? -x : -std::expm1(eta * x) / eta) + std::expm1(x);
      EXPECT_NEAR(ratio_g(eta, r), direct, 1e-14 * (1.0 + std::abs(direct)));
    }
  EXPECT_NEAR(ratio_h(0.2, 0.5, 1.0), 0.8 / 0.5, 1e-15);
  EXPECT_NEAR(ratio_h(0.2, 0.5, 1.0 + 1e-6), 0.8 / 0.5, 1e-5);
}

TEST(Ratio, ConstantAtZeroHalfE) {
  auto rc = ratio_constant(0.0, 0.5, std::exp(1.0));
  EXPECT_NEAR(rc.upper_bound, 3.0, 1e-15);
  EXPECT_LE(rc.C, rc.upper_bound);
  EXPECT_NEAR(rc.C, ratio_h(0.0, 0.5, std::exp(-1.0)), 1e-12);
  EXPECT_THROW(ratio_constant(0.5, 0.5, 2.0), std::domain_error);
  EXPECT_THROW(ratio_constant(0.0, 0.5, 1.0), std::domain_error);
}

TEST(Ratio, HDecreasingAndBoundedByConstant) {
  Rng rng = substream(75, 0);
  for (int t = 0; t < 30; ++t) {
    double eta = 0.05 + 0.9 * uniform01(rng);
    double ep = uniform01(rng) < 0.3 ? 0.0 : eta * uniform01(rng);
    double V = 1.0 + std::exp(5.0 * uniform01(rng));
    auto rc = ratio_constant(ep, eta, V);
    EXPECT_LE(rc.C, rc.upper_bound * (1.0 + 1e-12));
    double prev = inf;
    for (int i = 0; i <= 1000; ++i) {
      double r = std::exp(std::log(1.0 / V) + (std::log(1e3) - std::log(1.0 / V)) * i / 1000.0);
      double h = ratio_h(ep, eta, r);
      EXPECT_LE(h, prev * (1.0 + 1e-12));
      EXPECT_LE(h, rc.C * (1.0 + 1e-10));
      prev = h;
    }
  }
}

TEST(CuConstant, ValuesAndPole) {
  for (double eb : {0.5, 1.0, 8.0})
    for (double u : {1.0, 2.0})
      EXPECT_NEAR(cu_constant(eb / 2.0, eb, u, 1.0), (eb * u / 2.0 + 1.0) * 2.0, 1e-12);
  EXPECT_NEAR(cu_constant(0.25, 1.0, 2.0, 0.5), (0.5 + 1.0) / (0.5 * 0.75), 1e-14);
  EXPECT_GT(cu_constant(1.0 - 1e-7, 1.0, 1.0, 1.0), 1e6);
  EXPECT_THROW(cu_constant(1.0, 1.0, 1.0, 1.0), std::domain_error);
}

TEST(KlVsHellinger, BoundedRatioPairsGiveLogVPlusTwo) {
  Rng rng = substream(76, 0);
  for (int t = 0; t < 500; ++t) {
    double V = 1.0 + std::exp(4.0 * uniform01(rng));
    auto [p, q] = random_bounded_ratio_pair(rng, 2 + uniform_index(rng, 6), V);
    double kl = kl_divergence(p, q), h2 = squared_hellinger(p, q);
    auto rc = ratio_constant(0.0, 0.5, V);
    EXPECT_LE(kl, rc.C * h2 * (1.0 + 1e-10) + 1e-15);
    EXPECT_LE(kl, (std::log(V) + 2.0) * h2 * (1.0 + 1e-10) + 1e-15);
  }
}

TEST(KlVsHellinger, CertifiedWellSpecifiedModels) {
  Rng rng = substream(77, 0);
  for (int t = 0; t < 50; ++t) {
    auto m = random_density_model(rng, 5, 4, true);
    ProblemFamily fam(m.problem);
    double umax = 0.0;
    for (std::size_t f = 0; f < 4; ++f)
      for (double x : fam.excess_distribution(f).values) umax = std::max(umax, std::abs(x));
    for (double eta : {0.1, 0.5, 0.9}) {
      auto rep = kl_vs_hellinger_bound(m.problem, eta, 1.0, umax + 1e-9, 1.0);
      EXPECT_TRUE(rep.holds);
      EXPECT_GE(rep.worst_margin, -1e-10);
      for (const auto& r : rep.per_predictor) EXPECT_LE(r.hellinger, r.annealed + 1e-12);
    }
  }
}

TEST(KlVsHellinger, RefusesUncertifiedInput) {
  auto pr = make_problem({0.5, 0.5}, Matrix::from_rows({{1.0, 1.0}, {2.0, 0.0}}));
  EXPECT_THROW(kl_vs_hellinger_bound(pr, 0.1, 1.0, 1.0, 1.0), std::domain_error);
}

TEST(KlVsHellinger, TauFormWithConstantThreshold) {
  Rng rng = substream(78, 0);
  for (int t = 0; t < 30; ++t) {
    auto m = random_density_model(rng, 4, 3, true);
    auto rep = kl_vs_hellinger_tau(m.problem, 0.5, 1.0, TauFunction::constant(50.0), 1.0, 0.01);
    EXPECT_TRUE(rep.holds);
  }
}

TEST(ExpTail, CorollaryOnWellSpecifiedModels) {
  Rng rng = substream(79, 0);
  for (int t = 0; t < 50; ++t) {
    auto m = random_density_model(rng, 5, 4, true, 3.0);
    auto rep = exp_tail_bound(m.problem, 0.5, 1.0, 0.5);
    EXPECT_TRUE(rep.holds) << rep.worst_margin;
  }
}

TEST(WongShen, BothBoundsCoverTheRisk) {
  Rng rng = substream(80, 0);
  for (int t = 0; t < 100; ++t) {
    auto m = random_density_model(rng, 5, 4, true, 3.0);
    for (std::size_t f = 1; f < 4; ++f) {
      auto w = wong_shen_comparison(m.truth, m.densities, f, 0.5);
      EXPECT_NEAR(w.risk, kl_divergence(m.truth, m.densities[f]), 1e-15);
      EXPECT_GE(w.our_bound, w.risk - 1e-12);
      if (w.in_regime) {
        EXPECT_GE(w.their_bound, w.risk - 1e-12);
      }
    }
  }
}
