#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <limits>
#include <numbers>
#include <vector>

#include "gaplab/diffusion.hpp"
#include "gaplab/gaussian.hpp"
#include "gaplab/parallel.hpp"
#include "gaplab/quadrature.hpp"
#include "gaplab/rng.hpp"

namespace {

using namespace gaplab;

TEST(CounterRng, ReplayIsBitExact) {
  CounterRng a(42, 7), b(42, 7);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(CounterRng, StreamsDiffer) {
  CounterRng a(42, 0), b(42, 1), c(43, 0);
  EXPECT_NE(a.next_u64(), b.next_u64());
  CounterRng a2(42, 0);
  EXPECT_NE(a2.next_u64(), c.next_u64());
}

TEST(CounterRng, UniformInOpenInterval) {
  CounterRng rng(1, 0);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(CounterRng, NormalMoments) {
  CounterRng rng(5, 0);
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  const double mean = s / n;
  const double var = s2 / n - mean * mean;
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_NEAR(var, 1.0, 0.02);
}

TEST(ParallelFor, ResultIndependentOfWorkerCount) {
  const std::size_t n = 1000;
  auto fill = [&](std::size_t workers) {
    std::vector<double> out(n);
    parallel_for(n, [&](std::size_t i) {
      CounterRng rng(9, i);
      out[i] = rng.normal();
    }, workers);
    return out;
  };
  EXPECT_EQ(fill(1), fill(4));
  EXPECT_EQ(fill(1), fill(13));
}

TEST(Quadrature, KnownIntegrals) {
  EXPECT_NEAR(integrate([](double x) { return x * x; }, 0.0, 1.0), 1.0 / 3.0,
              1e-9);
  EXPECT_NEAR(integrate([](double x) { return std::sin(x); }, 0.0,
                        std::numbers::pi),
              2.0, 1e-9);
  EXPECT_EQ(integrate([](double x) { return x; }, 2.0, 2.0), 0.0);
}

// Constant-coefficient OU closed form: dZ = (-a Z + b)dt + h dB.
TEST(LinearSdeLaw, MatchesOuClosedForm) {
  const double a = 1.3, b = 0.7, h = 0.9, t = 2.0;
  const double mu0 = 0.4, var0 = 0.25;
  const GaussianLaw law = linear_sde_law([a](double) { return -a; },
                                         [b](double) { return b; },
                                         [h](double) { return h; },
                                         GaussianLaw(mu0, var0), t);
  const double mean_exact =
      std::exp(-a * t) * mu0 + b / a * (1.0 - std::exp(-a * t));
  const double var_exact =
      std::exp(-2.0 * a * t) * var0 + h * h / (2.0 * a) * (1.0 - std::exp(-2.0 * a * t));
  EXPECT_NEAR(law.mu(), mean_exact, 1e-9);
  EXPECT_NEAR(law.var(), var_exact, 1e-9);
}

TEST(LinearSdeLaw, VarianceExplodingGrowth) {
  const GaussianLaw law = linear_sde_law(
      [](double) { return 0.0; }, [](double) { return 0.0; },
      [](double s) { return std::sqrt(2.0 * s); }, GaussianLaw(0.3, 1.0), 3.0);
  EXPECT_NEAR(law.mu(), 0.3, 1e-10);
  EXPECT_NEAR(law.var(), 1.0 + 9.0, 1e-8);
}

TEST(LinearSdeLaw, CoefficientBlowUpThrows) {
  EXPECT_THROW(linear_sde_law([](double s) {
                 return s > 0.5 ? std::numeric_limits<double>::infinity() : 0.0;
               },
                              [](double) { return 0.0; },
                              [](double) { return 1.0; }, GaussianLaw(0.0, 1.0),
                              1.0),
               std::runtime_error);
}

TEST(GaussianKl, HandValues) {
  // KL(N(0,1) || N(1,1)) = 1/2
  EXPECT_NEAR(gaussian_kl(GaussianLaw(0.0, 1.0), GaussianLaw(1.0, 1.0)), 0.5,
              1e-12);
  // KL(N(1,4) || N(0,1)) = 2 - log 2
  EXPECT_NEAR(gaussian_kl(GaussianLaw(1.0, 4.0), GaussianLaw(0.0, 1.0)),
              2.0 - std::log(2.0), 1e-12);
  EXPECT_NEAR(gaussian_kl(GaussianLaw(0.7, 2.3), GaussianLaw(0.7, 2.3)), 0.0,
              1e-12);
  EXPECT_THROW(gaussian_kl(GaussianLaw(0.0, 1.0), GaussianLaw(0.0, 0.0)),
               std::invalid_argument);
}

TEST(RewardExpectation, ClosedFormVsSampling) {
  const GaussianLaw law(0.4, 1.7);
  EXPECT_NEAR(reward_expectation(law, 1.0), -(1.7 + 0.36), 1e-12);
  CounterRng rng(3, 0);
  double s = 0.0;
  const int n = 400000;
  for (int i = 0; i < n; ++i) {
    const double x = 0.4 + std::sqrt(1.7) * rng.normal();
    s += quadratic_reward(x, 1.0);
  }
  EXPECT_NEAR(s / n, reward_expectation(law, 1.0), 0.02);
}

TEST(ForwardMarginal, GenericLinearMatchesVeClosedForm) {
  const DiffusionModel generic = DiffusionModel::generic_linear(
      [](double) { return 0.0; }, [](double s) { return std::sqrt(2.0 * s); },
      3.0);
  const GaussianLaw law = forward_marginal(generic, GaussianLaw(0.5, 1.0), 2.0);
  EXPECT_NEAR(law.mu(), 0.5, 1e-8);
  EXPECT_NEAR(law.var(), 1.0 + 4.0, 1e-7);
}

TEST(ForwardMarginal, VpUnitVarianceIsExact) {
  const DiffusionModel vp = DiffusionModel::vp(3.0);
  const GaussianLaw law = forward_marginal(vp, GaussianLaw(0.8, 1.0), 1.7);
  EXPECT_DOUBLE_EQ(law.var(), 1.0);
  EXPECT_NEAR(law.mu(), 0.8 * std::exp(-0.5 * 1.7 * 1.7), 1e-12);
}

double mixture_log_density(double t, const std::vector<double>& x,
                           const MixtureLaw& prior, const DiffusionModel& model) {
  double acc = 0.0;
  for (std::size_t i = 0; i < prior.components(); ++i) {
    const GaussianLaw law = forward_marginal(
        model, GaussianLaw(prior.means[i], prior.covariances[i]), t);
    double comp = prior.weights[i];
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double dm = x[j] - law.mean[j];
      comp *= std::exp(-0.5 * dm * dm / law.variance[j]) /
              std::sqrt(2.0 * std::numbers::pi * law.variance[j]);
    }
    acc += comp;
  }
  return std::log(acc);
}

TEST(MixtureScore, MatchesFiniteDifferenceOfLogDensity) {
  MixtureLaw prior;
  prior.weights = {0.3, 0.7};
  prior.means = {{1.0, -0.5}, {-1.0, 0.2}};
  prior.covariances = {{1.0, 2.0}, {0.5, 1.0}};
  for (const auto& model :
       {DiffusionModel::ve(4.0, 2), DiffusionModel::vp(4.0, 2)}) {
    for (double t : {0.0, 0.5, 2.0}) {
      for (double x0 : {-1.2, 0.3, 1.7}) {
        const std::vector<double> x{x0, 0.4};
        const std::vector<double> s = mixture_score(t, x, prior, model);
        const double h = 1e-5;
        for (std::size_t j = 0; j < 2; ++j) {
          std::vector<double> xp = x, xm = x;
          xp[j] += h;
          xm[j] -= h;
          const double fd = (mixture_log_density(t, xp, prior, model) -
                             mixture_log_density(t, xm, prior, model)) /
                            (2.0 * h);
          EXPECT_NEAR(s[j], fd, 1e-5) << "t=" << t << " j=" << j;
        }
      }
    }
  }
}

TEST(MixtureScore, SingleComponentReducesToGaussianScore) {
  MixtureLaw prior;
  prior.weights = {1.0};
  prior.means = {{0.0}};
  prior.covariances = {{1.0}};
  const DiffusionModel ve = DiffusionModel::ve(3.0);
  const std::vector<double> s = mixture_score(2.0, {0.7}, prior, ve);
  EXPECT_NEAR(s[0], ve_score(2.0, 0.7), 1e-12);
}

TEST(MixtureLaw, ValidationGates) {
  MixtureLaw bad;
  bad.weights = {0.5, 0.6};
  bad.means = {{0.0}, {1.0}};
  bad.covariances = {{1.0}, {1.0}};
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad.weights = {0.5, 0.5};
  bad.means = {{0.0}, {1.0, 2.0}};
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(ScoreModel, ShiftsAndBases) {
  const ScoreModel ve = ScoreModel::exact_ve(10.0);
  EXPECT_NEAR(ve(2.0, 1.0), -1.0 / 5.0, 1e-12);
  const ScoreModel shifted = ve.with_constant_shift({0.5});
  EXPECT_NEAR(shifted(2.0, 1.0), -1.5 / 5.0, 1e-12);
  const ScoreModel vp = ScoreModel::exact_vp().with_decayed_shift({2.0});
  const double t = 1.3;
  EXPECT_NEAR(vp(t, 0.4), -(0.4 + 2.0 * std::exp(-0.5 * t * t)), 1e-12);
  const ScoreModel lin = ScoreModel::linear(-0.5);
  EXPECT_DOUBLE_EQ(lin(7.0, 3.0), -1.5);
}

TEST(GaussianLaw, Validation) {
  EXPECT_THROW(GaussianLaw(0.0, -1.0), std::invalid_argument);
  EXPECT_THROW(GaussianLaw({0.0, 1.0}, {1.0}), std::invalid_argument);
}

}  // namespace
