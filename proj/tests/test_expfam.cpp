#include <gtest/gtest.h>

#include <cmath>

#include "fastrates/catalog.hpp"
#include "fastrates/conditions.hpp"
#include "fastrates/expfam.hpp"
#include "support.hpp"

using namespace fastrates;
using testing_support::uniform_index;

namespace {

GridDistribution binomial_on_poisson_grid(int trials, double p, int ymax = 200) {
  QuadGrid g = integer_grid(0, ymax);
  std::vector<double> d(g.nodes.size(), 0.0);
  for (int k = 0; k <= trials; ++k)
    d[k] = std::exp(std::lgamma(trials + 1.0) - std::lgamma(k + 1.0) - std::lgamma(trials - k + 1.0) + k * std::log(p) +
                    (trials - k) * std::log1p(-p));
  return grid_distribution(g, d);
}

GridDistribution random_small_count_law(Rng& rng, int support, int ymax = 60) {
  QuadGrid g = integer_grid(0, ymax);
  std::vector<double> d(g.nodes.size(), 0.0);
  auto w = random_probs(rng, static_cast<std::size_t>(support));
  for (int k = 0; k < support; ++k) d[k] = w[k];
  return grid_distribution(g, d);
}

GridDistribution uniform_law(double center, double half_width) {
  QuadGrid g = uniform_grid(center - half_width, center + half_width, 401);
  return grid_distribution(g, std::vector<double>(401, 1.0));
}

struct GlmCase {
  GlmSpec spec;
  GlmTruth truth;
};

// Gaussian base, identity link, design (1, x) for x in {0, 1, 2}; beta0 = (0.25, -0.25).
GlmCase gaussian_glm(double noise_sd) {
  std::vector<std::vector<double>> design{{1.0, 0.0}, {1.0, 1.0}, {1.0, 2.0}};
  std::vector<std::vector<double>> grid;
  for (int a = -2; a <= 2; ++a)
    for (int b = -2; b <= 2; ++b) grid.push_back({0.25 * a, 0.25 * b});
  GlmCase c{identity_link_glm(gaussian_location(1.0, -10.0, 10.0), design, {0.3, 0.3, 0.4}, grid), {}};
  std::vector<double> beta0{0.25, -0.25};
  for (std::size_t x = 0; x < design.size(); ++x)
    c.truth.conditional.push_back(gaussian_on_grid(c.spec.linear(beta0, x), noise_sd));
  c.truth.mean_well_specified = true;
  c.truth.beta0 = beta0;
  return c;
}

}  // namespace

TEST(ExpFamily, GaussianDensityAtZeroIsStandardNormal) {
  auto fam = gaussian_location(1.0, -3.0, 3.0);
  auto d = expfam_density(fam, 0.0);
  EXPECT_LT(std::abs(d.defect), 1e-8);
  for (std::size_t i = 0; i < d.mass.size(); i += 37) {
    double y = d.grid.nodes[i];
    double expect = d.grid.weights[i] * std::exp(-0.5 * y * y) / std::sqrt(2.0 * std::numbers::pi);
    EXPECT_NEAR(d.mass[i], expect, 1e-10);
  }
  EXPECT_THROW(expfam_density(fam, 3.5), std::domain_error);
}

TEST(ExpFamily, MeanAndVarianceIdentities) {
  std::vector<ExpFamily> fams{gaussian_location(1.5, -2.0, 2.0), bernoulli_family(-3.0, 3.0), poisson_family(-1.0, 2.5)};
  for (const auto& fam : fams)
    for (double t : linspace(fam.lo, fam.hi, 13)) {
      auto d = expfam_density(fam, t);
      EXPECT_NEAR(d.mean(), fam.dF(t), 1e-6) << fam.name << " " << t;
      EXPECT_NEAR(d.variance(), fam.d2F(t), 1e-6) << fam.name << " " << t;
      EXPECT_LT(std::abs(d.defect), 1e-8) << fam.name << " " << t;
    }
}

TEST(ExpFamily, IneccsiOnRegisteredFamilies) {
  auto g = check_ineccsi(gaussian_location(2.0, -1.0, 1.0));
  EXPECT_TRUE(g.holds);
  EXPECT_DOUBLE_EQ(g.inf_d2F, 4.0);
  EXPECT_DOUBLE_EQ(g.sup_d2F, 4.0);
  EXPECT_DOUBLE_EQ(g.sup_F, 2.0);
  EXPECT_TRUE(check_ineccsi(bernoulli_family(-4.0, 4.0)).holds);
  auto p = check_ineccsi(poisson_family(-1.0, 2.0));
  EXPECT_TRUE(p.holds);
  EXPECT_NEAR(p.sup_dF, std::exp(2.0), 1e-12);

  auto flat = gaussian_location(1.0, -1.0, 1.0);
  flat.d2F = [](double t) { return t * t; };
  EXPECT_FALSE(check_ineccsi(flat).holds);
  auto nonmono = gaussian_location(1.0, -1.0, 1.0);
  nonmono.dF = [](double t) { return -t; };
  EXPECT_FALSE(check_ineccsi(nonmono).mean_increasing);
}

TEST(Projection, WellSpecifiedRecoversParameter) {
  auto fam = poisson_family(-1.0, 2.0);
  for (double t0 : {-0.7, 0.0, 0.4, 1.9}) EXPECT_NEAR(expfam_projection(fam, expfam_density(fam, t0)), t0, 1e-9);
  auto bern = bernoulli_family(-3.0, 3.0);
  EXPECT_NEAR(expfam_projection(bern, expfam_density(bern, 1.3)), 1.3, 1e-12);
}

TEST(Projection, DeterministicFourGivesMeanFour) {
  auto fam = poisson_family(-1.0, 3.0);
  std::vector<double> d(fam.base_grid.nodes.size(), 0.0);
  d[4] = 1.0;
  auto P = grid_distribution(fam.base_grid, d);
  double ts = expfam_projection(fam, P);
  EXPECT_NEAR(fam.dF(ts), 4.0, 1e-12);
  EXPECT_NEAR(ts, std::log(4.0), 1e-12);
  auto rep = central_threshold(fam, P, linspace(-1.0, 3.0, 41), 64.0);
  EXPECT_EQ(rep.true_variance, 0.0);
  EXPECT_EQ(rep.variance_ratio, inf);
  EXPECT_EQ(rep.eta_bar, 64.0);
}

TEST(Projection, GaussianClosedFormAndRange) {
  auto fam = gaussian_location(2.0, -1.0, 1.0);
  auto P = gaussian_on_grid(1.2, 0.7);
  EXPECT_NEAR(expfam_projection(fam, P), 1.2 / 4.0, 1e-12);
  EXPECT_THROW(expfam_projection(fam, gaussian_on_grid(9.0, 1.0)), std::domain_error);
  auto bare = poisson_family(-1.0, 1.0);
  bare.mean_inverse = nullptr;
  EXPECT_NEAR(expfam_projection(bare, expfam_density(bare, 0.3)), 0.3, 1e-10);
  EXPECT_THROW(expfam_projection(bare, expfam_density(poisson_family(-1.0, 2.0), 1.5)), std::domain_error);
}

TEST(CentralMoment, ClosedFormMatchesDirectGrid) {
  Rng rng = substream(91, 0);
  auto fam = poisson_family(-2.0, 2.0, 60);
  for (int t = 0; t < 50; ++t) {
    auto P = random_small_count_law(rng, 2 + static_cast<int>(uniform_index(rng, 8)));
    double ts = expfam_projection(fam, P);
    for (double th : linspace(-2.0, 2.0, 9))
      for (double eta : {0.1, 0.5, 1.0, 2.0}) {
        auto c = central_moment_expfam(fam, P, th, eta, ts);
        EXPECT_NEAR(c.closed_form, c.direct, 1e-10 * std::max(1.0, c.direct));
      }
    EXPECT_NEAR(central_moment_expfam(fam, P, ts, 0.7).closed_form, 1.0, 1e-14);
  }
  EXPECT_THROW(central_moment_expfam(fam, binomial_on_poisson_grid(5, 0.5, 60), 0.0, 0.0), std::domain_error);
}

TEST(CentralMoment, GaussianThresholdIsVarianceRatio) {
  auto fam = gaussian_location(1.0, -3.0, 3.0);
  auto th = linspace(-3.0, 3.0, 121);
  for (double sd : {std::sqrt(2.0), 1.0, 0.5}) {
    auto P = gaussian_on_grid(0.0, sd);
    double ratio = 1.0 / (sd * sd);
    auto rep = central_threshold(fam, P, th);
    EXPECT_NEAR(rep.eta_bar, ratio, 1e-6 * ratio);
    EXPECT_NEAR(rep.variance_ratio, ratio, 1e-9);
    double worst_below = -inf, worst_above = -inf;
    for (double t : th) {
      worst_below = std::max(worst_below, central_moment_expfam(fam, P, t, ratio - 0.05, 0.0).closed_form);
      worst_above = std::max(worst_above, central_moment_expfam(fam, P, t, ratio + 0.05, 0.0).closed_form);
    }
    EXPECT_LE(worst_below, 1.0);
    EXPECT_GT(worst_above, 1.0);
  }
}

TEST(CentralMoment, LocalLimitTendsToVarianceRatio) {
  auto fam = poisson_family(-1.0, 3.0);
  auto P = binomial_on_poisson_grid(10, 0.4);  // mean 4, variance 2.4
  double ratio = 4.0 / 2.4;
  std::vector<double> radii{1.0, 0.1, 1e-2, 1e-3};
  auto sweep = local_limit_sweep(fam, P, radii);
  ASSERT_EQ(sweep.size(), 4u);
  EXPECT_NEAR(sweep.back().eta_bar, ratio, 0.02 * ratio);
  for (std::size_t i = 1; i < sweep.size(); ++i) EXPECT_GE(sweep[i].eta_bar, sweep[i - 1].eta_bar * (1.0 - 1e-9));
}

TEST(CentralMoment, AboveRatioSomeThetaViolates) {
  Rng rng = substream(92, 0);
  auto fam = poisson_family(-2.0, 3.0, 60);
  for (int t = 0; t < 40; ++t) {
    auto P = random_small_count_law(rng, 2 + static_cast<int>(uniform_index(rng, 10)));
    double ts = expfam_projection(fam, P);
    double ratio = fam.d2F(ts) / P.variance();
    auto th = linspace(std::max(-2.0, ts - 0.05), std::min(3.0, ts + 0.05), 41);
    bool violated = false;
    for (double x : th) violated |= central_moment_expfam(fam, P, x, ratio + 0.05, ts).log_moment > 0.0;
    EXPECT_TRUE(violated);
    EXPECT_LE(central_threshold(fam, P, th).eta_bar, ratio * (1.0 + 1e-6));
  }
}

TEST(ExpfamProblem, FiniteThresholdAgreesWithFamilyThreshold) {
  auto fam = gaussian_location(1.0, -2.0, 2.0);
  auto P = gaussian_on_grid(0.0, std::sqrt(2.0), 201);
  auto th = linspace(-2.0, 2.0, 41);
  auto pr = expfam_problem(fam, P, th);
  EXPECT_EQ(comparator_of(pr), 20u);
  double a = max_central_eta(pr), b = central_threshold(fam, P, th).eta_bar;
  EXPECT_NEAR(a, b, 1e-5);
  EXPECT_THROW(expfam_problem(fam, P, std::vector<double>{3.0}), std::domain_error);
}

TEST(Glm, CentralCertificateTracksDispersion) {
  auto matched = glm_central_certificate(gaussian_glm(1.0).spec, gaussian_glm(1.0).truth);
  ASSERT_TRUE(matched.holds);
  EXPECT_NEAR(matched.constants.at("eta_bar"), 1.0, 1e-6);

  auto over = gaussian_glm(std::sqrt(2.0));
  auto rep_over = glm_central_certificate(over.spec, over.truth);
  ASSERT_TRUE(rep_over.holds);
  EXPECT_NEAR(rep_over.constants.at("eta_bar"), 0.5, 1e-6);

  auto under = gaussian_glm(0.8);
  auto rep_under = glm_central_certificate(under.spec, under.truth);
  ASSERT_TRUE(rep_under.holds);
  EXPECT_GT(rep_under.constants.at("eta_bar"), 1.0);
  EXPECT_NEAR(rep_under.constants.at("eta_bar"), 1.0 / 0.64, 1e-5);
}

TEST(Glm, ConditionFailuresAreReported) {
  auto c = gaussian_glm(1.0);
  auto cond = check_glm_conditions(c.spec, c.truth);
  EXPECT_TRUE(cond.link_ok);
  EXPECT_TRUE(cond.mgf_ok);
  EXPECT_TRUE(cond.mean_ok);
  ASSERT_TRUE(cond.beta_star.has_value());
  EXPECT_EQ(c.spec.beta_grid[*cond.beta_star], (std::vector<double>{0.25, -0.25}));

  auto shifted = c;
  shifted.truth.conditional[1] = gaussian_on_grid(0.1, 1.0);
  auto rep = glm_central_certificate(shifted.spec, shifted.truth);
  EXPECT_FALSE(rep.holds);
  ASSERT_EQ(rep.notes.size(), 1u);
  EXPECT_NE(rep.notes[0].find("condition 3"), std::string::npos);

  auto narrow = c;
  narrow.spec.family = gaussian_location(1.0, -0.3, 0.3);
  auto cond2 = check_glm_conditions(narrow.spec, narrow.truth);
  EXPECT_FALSE(cond2.link_ok);

  auto short_truth = c;
  short_truth.truth.conditional.pop_back();
  EXPECT_THROW(check_glm_conditions(short_truth.spec, short_truth.truth), std::invalid_argument);
}

TEST(Glm, RiskIdentityUnderMatchedMean) {
  auto c = gaussian_glm(1.0);
  for (const auto& b : c.spec.beta_grid) EXPECT_LE(glm_risk_identity(c.spec, c.truth, b).gap, 1e-10);

  // uniform noise with the same conditional mean
  auto u = c;
  for (std::size_t x = 0; x < u.spec.design.size(); ++x)
    u.truth.conditional[x] = uniform_law(u.spec.linear(*u.truth.beta0, x), 1.5);
  for (const auto& b : u.spec.beta_grid) EXPECT_LE(glm_risk_identity(u.spec, u.truth, b).gap, 1e-6);

  // d = 2, four design points, over-dispersed Gaussian noise
  auto four = gaussian_glm(1.7);
  four.spec.design.push_back({1.0, -1.0});
  four.spec.design_probs = {0.25, 0.25, 0.25, 0.25};
  four.truth.conditional.push_back(gaussian_on_grid(four.spec.linear(*four.truth.beta0, 3), 1.7));
  for (const auto& b : four.spec.beta_grid) {
    auto r = glm_risk_identity(four.spec, four.truth, b);
    EXPECT_LE(r.gap, 1e-8);
    EXPECT_GE(r.risk_under_P, -1e-12);
  }

  auto flagless = c;
  flagless.truth.mean_well_specified = false;
  EXPECT_THROW(glm_risk_identity(flagless.spec, flagless.truth, c.spec.beta_grid[0]), std::domain_error);
}

TEST(Glm, ExponentialTailCertifiedOnGrid) {
  auto c = gaussian_glm(1.3);
  auto cond = check_glm_conditions(c.spec, c.truth, 0.5);
  EXPECT_TRUE(cond.mgf_ok);
  EXPECT_TRUE(std::isfinite(cond.sup_conditional_mgf));
  auto pr = glm_problem(c.spec, c.truth);
  EXPECT_NEAR(sum(pr.probs), 1.0, 1e-12);
  auto tail = check_uniform_exp_tail(pr, 0.5);
  EXPECT_TRUE(tail.holds);
  EXPECT_TRUE(std::isfinite(tail.log_M));
}

TEST(Entrobound, WellSpecifiedHasUnitConstant) {
  Rng rng = substream(93, 0);
  for (int t = 0; t < 50; ++t) {
    auto m = random_density_model(rng, 5, 4, true);
    auto rep = entrobound_check(m.truth, m.densities);
    EXPECT_TRUE(rep.applicable);
    EXPECT_NEAR(rep.C, 1.0, 1e-12);
    EXPECT_TRUE(rep.holds);
    EXPECT_GE(rep.worst_pinsker_margin, -1e-12);
  }
}

TEST(Entrobound, TiltedBernoulliWithConstantTwo) {
  std::vector<double> p{0.2, 0.8};
  std::vector<std::vector<double>> model{{0.9, 0.1}, {0.6, 0.4}};
  auto rep = entrobound_check(p, model);
  EXPECT_EQ(rep.comparator, 1u);
  EXPECT_NEAR(rep.C, 2.0, 1e-15);
  EXPECT_TRUE(rep.holds);
  EXPECT_GE(rep.worst_margin, 0.0);
}

TEST(Entrobound, HoldsOnRandomMisspecifiedModels) {
  Rng rng = substream(94, 0);
  for (int t = 0; t < 100; ++t) {
    auto m = random_density_model(rng, 4, 3, false);
    auto rep = entrobound_check(m.truth, m.densities);
    ASSERT_TRUE(rep.applicable);
    EXPECT_GE(rep.C, 1.0 - 1e-12);
    EXPECT_TRUE(rep.holds) << rep.worst_margin;
    EXPECT_GE(rep.worst_pinsker_margin, -1e-12);
  }
  std::vector<std::vector<double>> holes{{1.0, 0.0}};
  auto rep = entrobound_check(std::vector<double>{0.5, 0.5}, holes);
  EXPECT_FALSE(rep.applicable);
  EXPECT_EQ(rep.C, inf);
}

TEST(IcSlope, LogarithmicGrowthWithUnitSlope) {
  std::vector<std::size_t> ns;
  for (int k = 4; k <= 12; ++k) ns.push_back(std::size_t{1} << k);
  auto th = linspace(-3.0, 3.0, 6001);
  auto rep = bic_slope_diagnostic(1.0, 1.0, 0.3, th, 1.0, ns, 200, 17);
  ASSERT_EQ(rep.points.size(), ns.size());
  EXPECT_NEAR(rep.slope, 1.0, 0.25);
  auto again = bic_slope_diagnostic(1.0, 1.0, 0.3, th, 1.0, ns, 200, 17, 3);
  EXPECT_EQ(rep.slope, again.slope);
}

TEST(Ols, ExactLineAndErrors) {
  std::vector<double> x{0.0, 1.0, 2.0}, y{1.0, 3.0, 5.0};
  auto [b, a] = ols_fit(x, y);
  EXPECT_NEAR(b, 2.0, 1e-15);
  EXPECT_NEAR(a, 1.0, 1e-15);
  EXPECT_THROW(ols_fit(std::vector<double>{1.0, 1.0}, std::vector<double>{0.0, 1.0}), std::invalid_argument);
}
