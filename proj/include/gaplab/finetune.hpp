#pragma once

#include <cmath>
#include <stdexcept>

#include "gaplab/diffusion.hpp"
#include "gaplab/gaussian.hpp"

namespace gaplab {

// Entropy-regularized fine-tuning problem: maximize
//   F_eta(theta) = E[r(Y_T^theta)] - beta KL(Y_T^theta || N(0, I))
// with quadratic reward anchored at `target`. KL is taken on terminal laws
// (not path-wise) against the pretrained data law N(0, I).
struct FinetuneSpec {
  ModelKind model = ModelKind::VE;
  double eta = 1.0;
  double beta = 2.0;
  double T = 10.0;
  double target = 1.0;

  void validate() const {
    if (model == ModelKind::GenericLinear)
      throw std::invalid_argument("FinetuneSpec: model must be VE or VP");
    if (!(beta > 0.0)) throw std::invalid_argument("FinetuneSpec: beta must be > 0");
    if (!(eta >= 0.0)) throw std::invalid_argument("FinetuneSpec: eta must be >= 0");
    if (!(T > 0.0)) throw std::invalid_argument("FinetuneSpec: T must be > 0");
  }
};

struct ProcessTriple {
  GaussianLaw ref_law;
  GaussianLaw sde_law;
  GaussianLaw ode_law;
};

// Terminal law of the VE parametrized backward process:
//   N(theta (1+T^2)^{-(1+eta^2)/2} - theta, 1 - (1+T^2)^{-(1+eta^2)})
inline GaussianLaw terminal_law_ve(double theta, double eta, double T) {
  if (!(T > 0.0)) throw std::invalid_argument("terminal_law_ve: T must be > 0");
  const double p = 1.0 + eta * eta;
  const double c = std::pow(1.0 + T * T, -0.5 * p);
  return GaussianLaw(theta * c - theta, 1.0 - c * c);
}

// Terminal law of the VP parametrized backward process with decayed control:
//   N(theta e^{-(1+eta^2) T^2/2} - theta, 1)
inline GaussianLaw terminal_law_vp(double theta, double eta, double T) {
  if (!(T > 0.0)) throw std::invalid_argument("terminal_law_vp: T must be > 0");
  const double c = std::exp(-0.5 * (1.0 + eta * eta) * T * T);
  return GaussianLaw(theta * c - theta, 1.0);
}

inline GaussianLaw terminal_law(const FinetuneSpec& spec, double theta,
                                double eta) {
  return spec.model == ModelKind::VE ? terminal_law_ve(theta, eta, spec.T)
                                     : terminal_law_vp(theta, eta, spec.T);
}

// Entropy-regularized objective F(theta) = E[r(Y_T^theta)] - beta KL(Y_T^theta || N(0, I)).
// The KL reference is the pretrained data law N(0, I), not the terminal law of the
// zero-control backward process: the two coincide for VP, while for VE the backward
// terminal variance 1 - c^2 falls short of 1 by the squared contraction factor.
// Regularizing against N(0, I) is what makes the closed-form maximizers below exact.
inline double objective_F(double theta, const FinetuneSpec& spec) {
  spec.validate();
  const GaussianLaw law = terminal_law(spec, theta, spec.eta);
  const GaussianLaw ref(std::vector<double>(law.dim(), 0.0),
                        std::vector<double>(law.dim(), 1.0));
  return reward_expectation(law, spec.target) - spec.beta * gaussian_kl(law, ref);
}

// theta*_eta = -[(1 + beta/2)(1 - (1+T^2)^{-(1+eta^2)/2})]^{-1}
inline double optimal_theta_ve(double eta, double beta, double T) {
  if (!(T > 0.0)) throw std::invalid_argument("degenerate horizon");
  const double c = std::pow(1.0 + T * T, -0.5 * (1.0 + eta * eta));
  return -1.0 / ((1.0 + 0.5 * beta) * (1.0 - c));
}

// theta*_eta = -[(1 + beta/2)(1 - e^{-(1+eta^2) T^2/2})]^{-1}
inline double optimal_theta_vp(double eta, double beta, double T) {
  if (!(T > 0.0)) throw std::invalid_argument("degenerate horizon");
  const double c = std::exp(-0.5 * (1.0 + eta * eta) * T * T);
  return -1.0 / ((1.0 + 0.5 * beta) * (1.0 - c));
}

inline double optimal_theta(const FinetuneSpec& spec) {
  return spec.model == ModelKind::VE
             ? optimal_theta_ve(spec.eta, spec.beta, spec.T)
             : optimal_theta_vp(spec.eta, spec.beta, spec.T);
}

// Exact terminal laws of the reference (theta = 0), SDE (theta, eta) and ODE
// (same theta, eta = 0 in the dynamics) processes.
inline ProcessTriple process_triple(const FinetuneSpec& spec, double theta) {
  spec.validate();
  ProcessTriple t;
  t.ref_law = terminal_law(spec, 0.0, spec.eta);
  t.sde_law = terminal_law(spec, theta, spec.eta);
  t.ode_law = terminal_law(spec, theta, 0.0);
  return t;
}

}  // namespace gaplab
