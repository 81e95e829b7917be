#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fastrates/catalog.hpp"
#include "fastrates/conditions.hpp"
#include "fastrates/grip.hpp"
#include "support.hpp"

using namespace fastrates;
using testing_support::uniform_index;

namespace {

const std::vector<double> kEps{0.0, 0.01, 0.05, 0.1, 0.5, 1.0, 2.0};

FiniteProblem constant_pair() {
  // excess loss of row 1: 1 w.p. 1/2, -1/2 w.p. 1/2 (mean 1/4)
  return make_problem({0.5, 0.5}, Matrix::from_rows({{1.0, 1.0}, {2.0, 0.5}}));
}

}  // namespace

TEST(StrongCentral, WellSpecifiedLogLoss) {
  Rng rng = substream(31, 0);
  for (int t = 0; t < 50; ++t) {
    auto m = random_density_model(rng, 5, 4, true);
    EXPECT_NEAR(max_central_moment(ProblemFamily(m.problem), 1.0), 1.0, 1e-12);
    EXPECT_TRUE(check_strong_central(m.problem, 1.0).holds);
    EXPECT_GE(max_central_eta(m.problem), 1.0 - 1e-9);
  }
}

TEST(StrongCentral, SingletonReachesCap) {
  auto pr = make_problem({0.2, 0.8}, Matrix::from_rows({{3.0, 1.0}}));
  EXPECT_EQ(max_central_eta(pr), 1e6);
  EXPECT_EQ(max_central_eta(pr, 1e-10, 50.0), 50.0);
}

TEST(StrongCentral, ClosedFormThreshold) {
  // E exp(-eta L) = (e^{-eta} + e^{eta/2}) / 2 = 1 at the root found by bisection below
  auto pr = constant_pair();
  double eta = max_central_eta(pr, 1e-13);
  EXPECT_NEAR(0.5 * (std::exp(-eta) + std::exp(eta / 2.0)), 1.0, 1e-9);
  EXPECT_TRUE(check_strong_central(pr, eta * 0.999).holds);
  EXPECT_FALSE(check_strong_central(pr, eta * 1.01).holds);
}

TEST(StrongCentral, MonotoneInEta) {
  Rng rng = substream(32, 0);
  for (int t = 0; t < 100; ++t) {
    auto pr = random_problem(rng, 4, 3, 2.0);
    double eb = max_central_eta(pr);
    if (eb == 0.0 || eb == 1e6) continue;
    for (double s : {0.1, 0.5, 0.9, 1.0}) EXPECT_TRUE(check_strong_central(pr, eb * s).holds);
    EXPECT_FALSE(check_strong_central(pr, eb * 1.5).holds);
  }
}

TEST(StrongCentral, WrongComparatorFailsEverywhere) {
  Rng rng = substream(33, 0);
  for (int t = 0; t < 50; ++t) {
    auto pr = random_problem(rng, 4, 3, 2.0);
    std::size_t best = find_comparator(pr);
    std::size_t other = (best + 1) % 3;
    if (excess_risk(pr, best, other) >= 0.0) continue;
    pr.comparator_index = other;
    EXPECT_EQ(max_central_eta(pr, 1e-10, 1e6, 0.0), 0.0);
    EXPECT_FALSE(check_strong_central(pr, 1e-3).holds);
  }
}

TEST(StrongCentral, TiedPairFailsForEveryEta) {
  auto pr = tied_pair_problem();
  for (double eta : {1e-4, 0.1, 1.0, 10.0}) EXPECT_FALSE(check_strong_central(pr, eta).holds);
}

TEST(VCentral, ConstantMatchesStrong) {
  auto pr = constant_pair();
  double eb = max_central_eta(pr);
  EXPECT_TRUE(check_v_central(pr, VFunction::constant(eb), kEps).holds);
  auto twice = check_v_central(pr, VFunction::constant(2.0 * eb), kEps);
  EXPECT_FALSE(twice.holds);
  EXPECT_EQ(twice.constants.at("breaking_epsilon"), 0.0);
}

TEST(VCentral, DoublingBreaksOnRandomProblems) {
  Rng rng = substream(34, 0);
  int checked = 0;
  for (int t = 0; t < 100; ++t) {
    auto pr = random_problem(rng, 4, 3, 2.0);
    double eb = max_central_eta(pr);
    if (eb == 0.0 || eb == 1e6) continue;
    ++checked;
    EXPECT_TRUE(check_v_central(pr, VFunction::constant(eb), std::vector<double>{0.0}).holds);
    EXPECT_FALSE(check_v_central(pr, VFunction::constant(2.0 * eb), std::vector<double>{0.0}).holds);
  }
  EXPECT_GT(checked, 10);
}

TEST(VCentral, TiedPairHoldsWithLinearV) {
  auto pr = tied_pair_problem();
  std::vector<double> grid{0.0, 0.001, 0.01, 0.1, 0.5, 1.0, 3.0, 5.0};
  EXPECT_TRUE(check_v_central(pr, VFunction::power(1.0, 1.0, 10.0), grid).holds);
  EXPECT_FALSE(check_v_central(pr, VFunction::constant(0.01), grid).holds);
}

TEST(VCentral, ComparatorSearchNeverHurts) {
  Rng rng = substream(35, 0);
  for (int t = 0; t < 50; ++t) {
    auto pr = random_problem(rng, 4, 4, 2.0);
    auto v = VFunction::power(2.0, 1.0, 5.0);
    auto fixed = check_v_central(pr, v, kEps);
    auto searched = check_v_central(pr, v, kEps, 1e-9, true);
    EXPECT_GE(searched.margin, fixed.margin - 1e-12);
  }
}

TEST(VFunction, ShapesAndValidation) {
  EXPECT_EQ(VFunction::constant(2.0)(123.0), 2.0);
  auto p = VFunction::power(3.0, 0.5, 2.0);
  EXPECT_NEAR(p(0.25), 1.5, 1e-15);
  EXPECT_EQ(p(100.0), 2.0);
  EXPECT_EQ(p(0.0), 0.0);
  auto t = VFunction::tabulated({{0.5, 1.0}, {0.0, 0.5}});
  EXPECT_EQ(t(0.2), 0.5);
  EXPECT_EQ(t(0.7), 1.0);
  EXPECT_THROW(VFunction::constant(0.0), std::domain_error);
  EXPECT_THROW(VFunction::power(1.0, 1.0, inf), std::domain_error);
  EXPECT_THROW(VFunction::tabulated({{0.0, 2.0}, {1.0, 1.0}}), std::domain_error);
}

TEST(VPpc, StrongCentralGivesZeroGap) {
  Rng rng = substream(36, 0);
  for (int t = 0; t < 20; ++t) {
    auto m = random_density_model(rng, 4, 3, true);
    auto r = check_v_ppc(m.problem, VFunction::constant(1.0), std::vector<double>{0.0, 0.1});
    EXPECT_TRUE(r.holds);
    EXPECT_LE(r.constants.at("max_gap"), 1e-7);
  }
}

TEST(VPpc, TransferFromSmallerLoss) {
  Rng rng = substream(37, 0);
  auto v = VFunction::power(1.0, 1.0, 4.0);
  for (int t = 0; t < 30; ++t) {
    auto pr = random_problem(rng, 4, 3, 3.0);
    auto same = verify_ppc_smaller_loss(pr, pr, v, kEps);
    EXPECT_EQ(same.smaller.holds, same.original.holds);
    EXPECT_TRUE(verify_ppc_smaller_loss(pr, truncate_losses(pr, 0.5), v, kEps).transfers);
    // a random dominated pair that agrees on the comparator
    FiniteProblem sm = pr;
    std::size_t c = comparator_of(pr);
    for (std::size_t f = 0; f < 3; ++f)
      for (std::size_t z = 0; z < 4; ++z)
        if (f != c) sm.loss(f, z) = pr.loss(f, z) * uniform01(rng);
    EXPECT_TRUE(verify_ppc_smaller_loss(pr, sm, v, kEps).transfers);
  }
}

TEST(VPpc, TransferRejectsLargerLoss) {
  auto pr = constant_pair();
  auto bigger = pr;
  bigger.loss(1, 0) += 1.0;
  auto v = VFunction::constant(1.0);
  EXPECT_THROW(verify_ppc_smaller_loss(pr, bigger, v, kEps), std::invalid_argument);
  auto shifted = pr;
  shifted.loss(0, 0) -= 0.5;
  EXPECT_THROW(verify_ppc_smaller_loss(pr, shifted, v, kEps), std::invalid_argument);
}

TEST(Truncation, CapsAtComparatorPlusU) {
  auto pr = constant_pair();
  auto tr = truncate_losses(pr, 0.5);
  EXPECT_EQ(tr.loss(1, 0), 1.5);
  EXPECT_EQ(tr.loss(1, 1), 0.5);
  EXPECT_EQ(tr.loss(0, 0), 1.0);
}

TEST(Witness, BoundedLossAtMaximum) {
  Rng rng = substream(38, 0);
  for (int t = 0; t < 50; ++t) {
    auto pr = random_problem(rng, 5, 4, 3.0);
    double umax = 0.0;
    auto fam = ProblemFamily(pr);
    for (std::size_t f = 0; f < 4; ++f)
      for (double x : fam.excess_distribution(f).values) umax = std::max(umax, std::abs(x));
    auto r = check_witness(pr, umax + 1e-12, 1.0);
    EXPECT_TRUE(r.holds);
    EXPECT_NEAR(r.constants.at("c_best"), 1.0, 1e-12);
  }
}

TEST(Witness, UnwitnessedFamilyFails) {
  UnwitnessedFamily fam(200);
  for (double u : {1.0, 10.0, 100.0}) {
    auto r = check_witness(fam, u, 0.01);
    EXPECT_FALSE(r.holds) << u;
    EXPECT_EQ(r.constants.at("c_best"), 0.0);
  }
}

TEST(Witness, KnownCBest) {
  auto pr = constant_pair();
  // E[L 1{L <= 1/2}] = -1/4, E[L] = 1/4
  auto r = check_witness(pr, 0.5, 0.5);
  EXPECT_FALSE(r.holds);
  EXPECT_EQ(r.constants.at("c_best"), 0.0);
  EXPECT_TRUE(check_witness(pr, 1.0, 1.0).holds);
  EXPECT_THROW(check_witness(pr, 1.0, 1.5), std::domain_error);
  EXPECT_THROW(check_witness(pr, 0.0, 0.5), std::domain_error);
}

TEST(TauFunction, ShapesAndClamp) {
  auto lin = TauFunction::linear(4.0, 2.0);
  EXPECT_EQ(lin(1.0), 4.0);
  EXPECT_EQ(lin(6.0), 12.0);
  auto pw = TauFunction::power(0.5, 0.5);
  EXPECT_EQ(pw(1.0), 1.0);
  EXPECT_TRUE(pw.clamped(1.0));
  EXPECT_NEAR(pw(0.01), 5.0, 1e-12);
  auto ls = TauFunction::log_shape(1.0, 1.0);
  EXPECT_NEAR(ls(0.01), std::log(200.0), 1e-12);
  EXPECT_EQ(ls(10.0), 1.0);
}

// The tail integral gives E[L 1{L > t}] = t P(L > t) + int_t^inf P(L > s) ds
// <= t P(L > t) + (M / kappa) e^{-kappa t}; with the log-shaped threshold the second
// term is exactly E[L] / 2.
TEST(TauWitness, UniformTailBoundsTheTruncatedPart) {
  Rng rng = substream(39, 0);
  for (int t = 0; t < 300; ++t) {
    auto pr = random_problem(rng, 5, 4, 4.0);
    ProblemFamily fam(pr);
    for (double kappa : {0.1, 1.0, 3.0}) {
      auto tail = check_uniform_exp_tail(pr, kappa);
      ASSERT_TRUE(tail.holds);
      for (std::size_t f = 0; f < fam.size(); ++f) {
        auto d = fam.excess_distribution(f);
        double mean = expect(d.probs, d.values);
        if (!(mean > 0.0)) continue;
        double thr = tail.tau(mean), above = 0.0, p_above = 0.0;
        for (std::size_t i = 0; i < d.values.size(); ++i)
          if (d.values[i] > thr) {
            above += d.probs[i] * d.values[i];
            p_above += d.probs[i];
          }
        double integral = tail.M_kappa / kappa * std::exp(-kappa * thr);
        EXPECT_LE(above, thr * p_above + integral + 1e-12);
        if (!tail.tau.clamped(mean)) {
          EXPECT_NEAR(integral, 0.5 * mean, 1e-9 * (1.0 + mean));
        }
      }
    }
  }
}

// Dropping the t P(L > t) term is not harmless: here the log-shaped threshold with
// c = 1/2 is violated.
TEST(TauWitness, LogShapeThresholdCanMissHalf) {
  auto pr = make_problem({0.9, 0.1}, Matrix::from_rows({{0.0, 0.0}, {0.0, 3.0}}));
  auto tail = check_uniform_exp_tail(pr, 3.0);
  double mean = 0.3;
  EXPECT_LT(tail.tau(mean), 3.0);
  auto r = check_tau_witness(pr, tail.tau, 0.5);
  EXPECT_FALSE(r.holds);
  EXPECT_EQ(r.constants.at("c_best"), 0.0);
}

TEST(TauWitness, GaussianShiftLinearThreshold) {
  GaussianLocationShift fam({0.0, 0.1, 0.5, 1.0, 2.0, 4.0, 8.0});
  const double c = 1.0 - std::sqrt(2.0 / std::numbers::pi);
  EXPECT_TRUE(check_tau_witness(fam, TauFunction::linear(4.0, 2.0), c).holds);
  EXPECT_TRUE(check_tau_witness(fam, TauFunction::linear(2.0, 1.0), c).holds);
}

TEST(Bernstein, MinimalConstant) {
  auto pr = no_bernstein_bounded::problem(1000);
  auto r = check_bernstein(pr, 1.0, 1e6);
  double bmin = r.constants.at("B_min");
  EXPECT_NEAR(bmin, no_bernstein_bounded::second_moment(1000.0) / no_bernstein_bounded::excess_risk(), 1e-6 * bmin);
  EXPECT_TRUE(r.holds);
  EXPECT_TRUE(check_bernstein(pr, 1.0, bmin * (1.0 + 1e-9)).holds);
  auto bad = check_bernstein(pr, 1.0, bmin * 0.99);
  EXPECT_FALSE(bad.holds);
  EXPECT_EQ(*bad.violator, 999u);
}

TEST(Bernstein, ViolatorFormula) {
  auto pr = no_bernstein_bounded::problem(2000);
  auto r = check_bernstein(pr, 1.0, 1e6);
  EXPECT_FALSE(r.holds);
  double j = no_bernstein_bounded::bernstein_violator(1.0, 1e6);
  EXPECT_EQ(j, 1065.0);
  EXPECT_FALSE(check_bernstein(no_bernstein_bounded::problem(1065), 1.0, 1e6).holds);
  EXPECT_TRUE(check_bernstein(no_bernstein_bounded::problem(1064), 1.0, 1e6).holds);
}

TEST(Bernstein, ZeroLossHoldsVacuously) {
  auto pr = make_problem({0.5, 0.5}, Matrix(3, 2, 0.0));
  auto r = check_bernstein(pr, 0.5, 1e-3);
  EXPECT_TRUE(r.holds);
  EXPECT_EQ(r.constants.at("B_min"), 0.0);
  EXPECT_THROW(check_bernstein(pr, 1.5, 1.0), std::domain_error);
}

TEST(UniformTail, BoundedValuesAndDivergence) {
  auto pr = constant_pair();
  auto r = check_uniform_exp_tail(pr, 2.0);
  EXPECT_TRUE(r.holds);
  EXPECT_NEAR(r.M_kappa, 0.5 * (std::exp(2.0) + std::exp(-1.0)), 1e-12);
  std::vector<double> growing{1.0, 3.0, 7.0, 13.0, 21.0}, settling{1.0, 1.5, 1.75, 1.875, 1.9375};
  EXPECT_TRUE(detect_divergence(growing).divergent);
  EXPECT_FALSE(detect_divergence(settling).divergent);
  std::vector<double> blown{1.0, inf};
  EXPECT_TRUE(detect_divergence(blown).divergent);
}

TEST(UniformTail, BoundedExampleDiverges) {
  std::vector<double> logs;
  for (double j : {10.0, 20.0, 40.0, 80.0}) logs.push_back(no_bernstein_bounded::log_exp_moment(0.1, j));
  EXPECT_TRUE(detect_divergence(logs).divergent);
}

TEST(SmallBall, WeakenedConversion) {
  auto [a, b] = smallball_to_weakened(1.0, 0.5);
  EXPECT_EQ(a, 4.0);
  EXPECT_EQ(b, 0.25);
  EXPECT_THROW(smallball_to_weakened(1.0, 1.0), std::domain_error);
}

TEST(SmallBall, ImpliesWeakenedForm) {
  Rng rng = substream(40, 0);
  int used = 0;
  for (int t = 0; t < 200; ++t) {
    auto pr = random_squared_problem(rng, 6, 4);
    const double kappa = 0.5;
    auto sb = check_small_ball(pr, kappa, 0.01, PairSet::All);
    double eps = sb.constants.at("min_probability");
    if (!(eps > 0.0) || !(eps < 1.0)) continue;
    ++used;
    auto [c1, c2] = smallball_to_weakened(kappa * kappa, eps);
    auto w = check_weakened_small_ball(squared_differences(ProblemPredictions(pr), PairSet::All), c1, c2);
    EXPECT_TRUE(w.holds) << t;
  }
  EXPECT_GT(used, 50);
}

TEST(SmallBall, IndicatorFamilyFails) {
  NoSmallBall fam(200);
  auto r = check_small_ball(fam, 0.5, 0.01, PairSet::VsComparator);
  EXPECT_FALSE(r.holds);
  EXPECT_LT(r.constants.at("min_probability"), 1e-4);
}

TEST(SlowRate, GapBelowBound) {
  Rng rng = substream(41, 0);
  for (int t = 0; t < 60; ++t) {
    auto pr = random_problem(rng, 4, 2 + uniform_index(rng, 2), 1.0);
    ASSERT_TRUE(truncated_excess_positive(pr, 1.0));
    double rc = risk(pr, comparator_of(pr));
    double eta = std::min(1.0 / rc, 0.5 + 3.0 * uniform01(rng));
    auto g = ppc_gap(pr, eta);
    EXPECT_LE(g.gap, slow_rate_bound(pr, eta, 1.0) + 1e-9);
  }
}

TEST(SlowRate, PositivityRequirement) {
  auto pr = constant_pair();
  EXPECT_FALSE(truncated_excess_positive(pr, 0.5));
  EXPECT_TRUE(truncated_excess_positive(pr, 1.0));
}
