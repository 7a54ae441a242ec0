#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "gaplab/finetune.hpp"
#include "gaplab/quadrature.hpp"

using namespace gaplab;

namespace {

// Independent oracle for the controlled backward process: integrate the exact
// mean/variance ODEs of the time-inhomogeneous linear SDE instead of using
// the closed forms under test.
GaussianLaw backward_law_ve(double theta, double eta, double T) {
  const double p = 1.0 + eta * eta;
  auto a = [=](double t) {
    const double tau = T - t;
    return -p * tau / (1.0 + tau * tau);
  };
  auto b = [=](double t) { return theta * a(t); };
  auto h = [=](double t) { return eta * std::sqrt(2.0 * (T - t)); };
  return linear_sde_law(a, b, h, GaussianLaw(0.0, T * T), T, 1e-12);
}

GaussianLaw backward_law_vp(double theta, double eta, double T) {
  const double p = 1.0 + eta * eta;
  auto a = [=](double t) { return -eta * eta * (T - t); };
  auto b = [=](double t) {
    const double tau = T - t;
    return -p * tau * theta * std::exp(-0.5 * tau * tau);
  };
  auto h = [=](double t) { return eta * std::sqrt(2.0 * (T - t)); };
  return linear_sde_law(a, b, h, GaussianLaw(0.0, 1.0), T, 1e-12);
}

}  // namespace

TEST(TerminalLaw, VeMatchesQuadratureOracle) {
  for (double eta : {0.0, 0.5, 1.0, 1.5}) {
    for (double T : {1.0, 3.0, 10.0}) {
      for (double theta : {-1.0, 0.7}) {
        const GaussianLaw closed = terminal_law_ve(theta, eta, T);
        const GaussianLaw oracle = backward_law_ve(theta, eta, T);
        EXPECT_NEAR(closed.mu(), oracle.mu(), 1e-8)
            << "eta=" << eta << " T=" << T << " theta=" << theta;
        EXPECT_NEAR(closed.var(), oracle.var(), 1e-8)
            << "eta=" << eta << " T=" << T << " theta=" << theta;
      }
    }
  }
}

TEST(TerminalLaw, VpMatchesQuadratureOracle) {
  for (double eta : {0.0, 0.5, 1.0, 1.5}) {
    for (double T : {1.0, 3.0}) {
      for (double theta : {-1.0, 0.7}) {
        const GaussianLaw closed = terminal_law_vp(theta, eta, T);
        const GaussianLaw oracle = backward_law_vp(theta, eta, T);
        EXPECT_NEAR(closed.mu(), oracle.mu(), 1e-8)
            << "eta=" << eta << " T=" << T << " theta=" << theta;
        EXPECT_NEAR(closed.var(), oracle.var(), 1e-8)
            << "eta=" << eta << " T=" << T << " theta=" << theta;
      }
    }
  }
}

TEST(TerminalLaw, ZeroControlIsReference) {
  const GaussianLaw ve = terminal_law_ve(0.0, 1.2, 4.0);
  EXPECT_DOUBLE_EQ(ve.mu(), 0.0);
  const GaussianLaw vp = terminal_law_vp(0.0, 1.2, 4.0);
  EXPECT_DOUBLE_EQ(vp.mu(), 0.0);
  EXPECT_DOUBLE_EQ(vp.var(), 1.0);
}

TEST(TerminalLaw, RejectsDegenerateHorizon) {
  EXPECT_THROW(terminal_law_ve(1.0, 1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(terminal_law_vp(1.0, 1.0, -2.0), std::invalid_argument);
}

TEST(FinetuneSpecTest, Validation) {
  FinetuneSpec spec;
  EXPECT_NO_THROW(spec.validate());
  FinetuneSpec bad = spec;
  bad.beta = 0.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = spec;
  bad.eta = -0.1;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = spec;
  bad.T = 0.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = spec;
  bad.model = ModelKind::GenericLinear;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(OptimalTheta, MatchesGridSearch) {
  struct Case {
    ModelKind model;
    double eta, beta, T;
  };
  const Case cases[] = {
      {ModelKind::VE, 0.0, 2.0, 10.0}, {ModelKind::VE, 1.0, 2.0, 10.0},
      {ModelKind::VE, 1.0, 1.0, 5.0},  {ModelKind::VE, 0.5, 4.0, 3.0},
      {ModelKind::VE, 2.0, 2.0, 20.0}, {ModelKind::VP, 0.0, 2.0, 3.0},
      {ModelKind::VP, 1.0, 2.0, 3.0},  {ModelKind::VP, 1.0, 1.0, 2.0},
      {ModelKind::VP, 0.5, 4.0, 2.0},
  };
  for (const Case& c : cases) {
    FinetuneSpec spec;
    spec.model = c.model;
    spec.eta = c.eta;
    spec.beta = c.beta;
    spec.T = c.T;
    const double theta_star = optimal_theta(spec);
    double best_theta = 0.0;
    double best_val = -std::numeric_limits<double>::infinity();
    const double step = 1e-4;
    for (double th = theta_star - 0.5; th <= theta_star + 0.5; th += step) {
      const double v = objective_F(th, spec);
      if (v > best_val) {
        best_val = v;
        best_theta = th;
      }
    }
    EXPECT_NEAR(best_theta, theta_star, 2e-4)
        << "model=" << static_cast<int>(c.model) << " eta=" << c.eta
        << " beta=" << c.beta << " T=" << c.T;
  }
}

TEST(OptimalTheta, SdeMeanAtOptimumIsRegularizedTarget) {
  // At theta* the SDE terminal mean equals target/(1 + beta/2) exactly.
  for (ModelKind model : {ModelKind::VE, ModelKind::VP}) {
    for (double eta : {0.25, 1.0, 1.75}) {
      for (double beta : {0.5, 2.0, 8.0}) {
        FinetuneSpec spec;
        spec.model = model;
        spec.eta = eta;
        spec.beta = beta;
        spec.T = model == ModelKind::VE ? 10.0 : 3.0;
        const double theta = optimal_theta(spec);
        const GaussianLaw sde = terminal_law(spec, theta, eta);
        EXPECT_NEAR(sde.mu(), 1.0 / (1.0 + 0.5 * beta), 1e-13);
      }
    }
  }
}

TEST(OptimalTheta, ThetaShrinksWithRegularization) {
  FinetuneSpec spec;
  spec.model = ModelKind::VE;
  double prev = -std::numeric_limits<double>::infinity();
  for (double beta : {0.5, 1.0, 2.0, 4.0, 16.0}) {
    spec.beta = beta;
    const double th = optimal_theta(spec);
    EXPECT_LT(th, 0.0);
    EXPECT_GT(th, prev);  // |theta*| decreases as beta grows
    prev = th;
  }
}

TEST(ProcessTripleTest, OdeShadowsSameControl) {
  FinetuneSpec spec;
  spec.eta = 1.4;
  const double theta = -0.8;
  const ProcessTriple triple = process_triple(spec, theta);
  const GaussianLaw ode = terminal_law(spec, theta, 0.0);
  EXPECT_DOUBLE_EQ(triple.ode_law.mu(), ode.mu());
  EXPECT_DOUBLE_EQ(triple.ode_law.var(), ode.var());
  // Reference never depends on theta.
  EXPECT_DOUBLE_EQ(triple.ref_law.mu(), 0.0);
}

TEST(ObjectiveF, ConcaveAroundOptimum) {
  FinetuneSpec spec;
  spec.eta = 1.0;
  const double theta = optimal_theta(spec);
  const double at = objective_F(theta, spec);
  EXPECT_GT(at, objective_F(theta - 0.1, spec));
  EXPECT_GT(at, objective_F(theta + 0.1, spec));
}
