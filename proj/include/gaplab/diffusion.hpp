#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gaplab/gaussian.hpp"
#include "gaplab/quadrature.hpp"

namespace gaplab {

enum class ModelKind { VE, VP, GenericLinear };

// Forward dynamics dX = a(t) X dt + g(t) dB with linear drift rate a.
// VE: a = 0, g = sqrt(2t); VP: a = -t, g = sqrt(2t).
struct DiffusionModel {
  ModelKind kind = ModelKind::VE;
  std::function<double(double)> drift_coeff;  // a(t)
  std::function<double(double)> diffusion;    // g(t) >= 0
  double horizon_T = 1.0;
  std::size_t dim = 1;

  static DiffusionModel ve(double T, std::size_t dim = 1) {
    DiffusionModel m;
    m.kind = ModelKind::VE;
    m.drift_coeff = [](double) { return 0.0; };
    m.diffusion = [](double t) { return std::sqrt(2.0 * t); };
    m.horizon_T = T;
    m.dim = dim;
    return m;
  }

  static DiffusionModel vp(double T, std::size_t dim = 1) {
    DiffusionModel m;
    m.kind = ModelKind::VP;
    m.drift_coeff = [](double t) { return -t; };
    m.diffusion = [](double t) { return std::sqrt(2.0 * t); };
    m.horizon_T = T;
    m.dim = dim;
    return m;
  }

  static DiffusionModel generic_linear(std::function<double(double)> a,
                                       std::function<double(double)> g, double T,
                                       std::size_t dim = 1) {
    DiffusionModel m;
    m.kind = ModelKind::GenericLinear;
    m.drift_coeff = std::move(a);
    m.diffusion = std::move(g);
    m.horizon_T = T;
    m.dim = dim;
    return m;
  }

  std::string name() const {
    switch (kind) {
      case ModelKind::VE: return "ve";
      case ModelKind::VP: return "vp";
      default: return "generic";
    }
  }
};

// Backward prior: VE starts from N(0, T^2 I), VP from N(0, I).
inline GaussianLaw backward_prior(const DiffusionModel& model) {
  std::vector<double> mean(model.dim, 0.0);
  std::vector<double> var(model.dim,
                          model.kind == ModelKind::VE
                              ? model.horizon_T * model.horizon_T
                              : 1.0);
  return GaussianLaw(std::move(mean), std::move(var));
}

// Exact score of the VE model with N(0,1) data: -x / (t^2 + 1).
inline double ve_score(double t, double x) { return -x / (t * t + 1.0); }

// Exact score of the VP model with N(0,1) data: -x.
inline double vp_score(double /*t*/, double x) { return -x; }

// Forward marginal of a diagonal Gaussian prior under VE/VP.
// VE: mean mu0, var var0 + t^2. VP: mean e^{-t^2/2} mu0,
// var e^{-t^2} var0 + 1 - e^{-t^2} (exactly 1 for var0 = 1).
inline GaussianLaw forward_marginal(const DiffusionModel& model,
                                    const GaussianLaw& prior, double t) {
  if (prior.dim() != model.dim)
    throw std::invalid_argument("forward_marginal: prior dimension mismatch");
  std::vector<double> mean(prior.dim()), var(prior.dim());
  switch (model.kind) {
    case ModelKind::VE:
      for (std::size_t i = 0; i < prior.dim(); ++i) {
        mean[i] = prior.mean[i];
        var[i] = prior.variance[i] + t * t;
      }
      break;
    case ModelKind::VP: {
      const double e = std::exp(-0.5 * t * t);
      for (std::size_t i = 0; i < prior.dim(); ++i) {
        mean[i] = e * prior.mean[i];
        var[i] = prior.variance[i] == 1.0
                     ? 1.0
                     : e * e * prior.variance[i] + (1.0 - e * e);
      }
      break;
    }
    case ModelKind::GenericLinear: {
      auto zero = [](double) { return 0.0; };
      for (std::size_t i = 0; i < prior.dim(); ++i) {
        const GaussianLaw coord = linear_sde_law(
            model.drift_coeff, zero, model.diffusion,
            GaussianLaw(prior.mean[i], prior.variance[i]), t);
        mean[i] = coord.mu();
        var[i] = coord.var();
      }
      break;
    }
  }
  return GaussianLaw(std::move(mean), std::move(var));
}

// Score of the forward-diffused mixture at time t. Component i at time t is
// N(m_i(t), C_i(t)) per forward_marginal; responsibilities use max-subtracted
// exponentials.
inline std::vector<double> mixture_score(double t, const std::vector<double>& x,
                                         const MixtureLaw& prior,
                                         const DiffusionModel& model) {
  prior.validate();
  if (model.kind == ModelKind::GenericLinear)
    throw std::invalid_argument("mixture_score: model kind must be VE or VP");
  if (x.size() != prior.dim())
    throw std::invalid_argument("mixture_score: state dimension mismatch");

  const std::size_t k = prior.components();
  const std::size_t d = prior.dim();
  std::vector<double> log_w(k);
  std::vector<std::vector<double>> comp_mean(k), comp_var(k);
  for (std::size_t i = 0; i < k; ++i) {
    const GaussianLaw law = forward_marginal(
        model, GaussianLaw(prior.means[i], prior.covariances[i]), t);
    double lw = std::log(prior.weights[i]);
    for (std::size_t j = 0; j < d; ++j) {
      const double v = law.variance[j];
      if (!(v > 0.0)) throw std::runtime_error("singular component");
      const double dm = x[j] - law.mean[j];
      lw += -0.5 * std::log(v) - 0.5 * dm * dm / v;
    }
    log_w[i] = lw;
    comp_mean[i] = law.mean;
    comp_var[i] = law.variance;
  }

  double lmax = log_w[0];
  for (double lw : log_w) lmax = std::max(lmax, lw);
  double norm = 0.0;
  std::vector<double> resp(k);
  for (std::size_t i = 0; i < k; ++i) {
    resp[i] = std::exp(log_w[i] - lmax);
    norm += resp[i];
  }

  std::vector<double> score(d, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    const double r = resp[i] / norm;
    for (std::size_t j = 0; j < d; ++j)
      score[j] += r * (-(x[j] - comp_mean[i][j]) / comp_var[i][j]);
  }
  return score;
}

enum class ScoreBase { ExactGaussian, ExactMixture, ExactVP, Linear };
enum class ControlForm { None, ConstantShift, DecayedShift };

// Analytic score oracle with an optional control applied by shifting the
// score argument: ConstantShift evaluates s(t, x + theta); DecayedShift
// scales the shift by e^{-t^2/2} in the forward-time argument t, which
// reproduces the decayed-control SDE when assembled into the backward drift.
struct ScoreModel {
  ScoreBase base = ScoreBase::ExactVP;
  GaussianLaw gaussian_prior;
  MixtureLaw mixture_prior;
  DiffusionModel forward_model;  // used by ExactGaussian / ExactMixture
  ControlForm control = ControlForm::None;
  std::vector<double> theta;
  double linear_slope = -1.0;  // used by ScoreBase::Linear

  static ScoreModel exact_ve(double T = 1.0) {
    ScoreModel s;
    s.base = ScoreBase::ExactGaussian;
    s.gaussian_prior = GaussianLaw(0.0, 1.0);
    s.forward_model = DiffusionModel::ve(T);
    return s;
  }

  static ScoreModel exact_vp() {
    ScoreModel s;
    s.base = ScoreBase::ExactVP;
    return s;
  }

  // Time-independent linear score s(t, x) = slope * x; the workhorse of the
  // synthetic dissipative test system.
  static ScoreModel linear(double slope) {
    ScoreModel s;
    s.base = ScoreBase::Linear;
    s.linear_slope = slope;
    return s;
  }

  static ScoreModel exact_mixture(MixtureLaw prior, DiffusionModel model) {
    ScoreModel s;
    s.base = ScoreBase::ExactMixture;
    s.mixture_prior = std::move(prior);
    s.forward_model = std::move(model);
    return s;
  }

  ScoreModel with_constant_shift(std::vector<double> th) const {
    ScoreModel s = *this;
    s.control = ControlForm::ConstantShift;
    s.theta = std::move(th);
    return s;
  }

  ScoreModel with_decayed_shift(std::vector<double> th) const {
    ScoreModel s = *this;
    s.control = ControlForm::DecayedShift;
    s.theta = std::move(th);
    return s;
  }

  double shift(double t, std::size_t coord) const {
    switch (control) {
      case ControlForm::None: return 0.0;
      case ControlForm::ConstantShift: return theta[coord];
      case ControlForm::DecayedShift:
        return theta[coord] * std::exp(-0.5 * t * t);
    }
    return 0.0;
  }

  // Marginal moments of coordinate `coord` at time t (VE/VP closed forms,
  // quadrature for generic linear models). Allocation-free.
  void marginal_moments(double t, std::size_t coord, double& mean,
                        double& var) const {
    const double mu0 = gaussian_prior.mean[coord];
    const double var0 = gaussian_prior.variance[coord];
    switch (forward_model.kind) {
      case ModelKind::VE:
        mean = mu0;
        var = var0 + t * t;
        return;
      case ModelKind::VP: {
        const double e = std::exp(-0.5 * t * t);
        mean = e * mu0;
        var = var0 == 1.0 ? 1.0 : e * e * var0 + (1.0 - e * e);
        return;
      }
      case ModelKind::GenericLinear: {
        auto zero = [](double) { return 0.0; };
        const GaussianLaw law = linear_sde_law(
            forward_model.drift_coeff, zero, forward_model.diffusion,
            GaussianLaw(mu0, var0), t);
        mean = law.mu();
        var = law.var();
        return;
      }
    }
  }

  // 1-D fast path.
  double operator()(double t, double x) const {
    const double xs = x + shift(t, 0);
    switch (base) {
      case ScoreBase::Linear: return linear_slope * xs;
      case ScoreBase::ExactVP: return -xs;
      case ScoreBase::ExactGaussian: {
        double mean, var;
        marginal_moments(t, 0, mean, var);
        return -(xs - mean) / var;
      }
      case ScoreBase::ExactMixture: {
        const std::vector<double> v =
            mixture_score(t, std::vector<double>{xs}, mixture_prior, forward_model);
        return v[0];
      }
    }
    return 0.0;
  }

  std::vector<double> eval(double t, const std::vector<double>& x) const {
    std::vector<double> xs(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) xs[j] = x[j] + shift(t, j);
    switch (base) {
      case ScoreBase::Linear: {
        for (double& v : xs) v = linear_slope * v;
        return xs;
      }
      case ScoreBase::ExactVP: {
        for (double& v : xs) v = -v;
        return xs;
      }
      case ScoreBase::ExactGaussian: {
        std::vector<double> out(x.size());
        for (std::size_t j = 0; j < x.size(); ++j) {
          double mean, var;
          marginal_moments(t, j, mean, var);
          out[j] = -(xs[j] - mean) / var;
        }
        return out;
      }
      case ScoreBase::ExactMixture:
        return mixture_score(t, xs, mixture_prior, forward_model);
    }
    return xs;
  }
};

}  // namespace gaplab
