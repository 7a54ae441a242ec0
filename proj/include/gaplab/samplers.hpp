#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "gaplab/diffusion.hpp"
#include "gaplab/parallel.hpp"
#include "gaplab/rng.hpp"
#include "gaplab/time_grid.hpp"
#include "gaplab/trajectory.hpp"

namespace gaplab {

enum class OdeScheme { RK4, Euler };

namespace detail {

inline void check_finite(double v, std::size_t step, std::size_t traj) {
  if (!std::isfinite(v))
    throw std::runtime_error("diverged at step " + std::to_string(step) +
                             ", trajectory " + std::to_string(traj));
}

// Backward drift of Eq.-style sampler at backward time t:
//   -f(T-t, y) + c * g^2(T-t) * s(T-t, y),  c = (1 + eta^2)/2 (SDE), 1/2 (ODE)
template <typename ScoreFn>
double backward_drift(const DiffusionModel& model, const ScoreFn& score,
                      double coeff, double t, double y) {
  const double tau = model.horizon_T - t;
  const double g = model.diffusion(tau);
  return -model.drift_coeff(tau) * y + coeff * g * g * score(tau, y);
}

}  // namespace detail

// Euler-Maruyama integration of
//   dY = (-f(T-t,Y) + (1+eta^2)/2 g^2(T-t) s(T-t,Y)) dt + eta g(T-t) dB
// from the model's backward prior. Trajectory i draws from substream
// (seed, i): first the initial state, then one normal per step.
inline TrajectoryBatch integrate_sde(const DiffusionModel& model,
                                     const ScoreModel& score, double eta,
                                     const TimeGrid& grid, std::size_t n,
                                     std::uint64_t seed, bool keep_paths = false) {
  if (!(eta >= 0.0)) throw std::invalid_argument("integrate_sde: eta must be >= 0");
  const GaussianLaw prior = backward_prior(model);
  const std::size_t d = model.dim;
  const std::size_t steps = grid.n_steps;

  TrajectoryBatch batch;
  batch.model_id = model.name();
  batch.eta = eta;
  batch.seed = seed;
  batch.grid = grid;
  batch.n = n;
  batch.dim = d;
  batch.terminal.resize(n * d);
  batch.has_paths = keep_paths;
  if (keep_paths) batch.paths.resize(n * (steps + 1) * d);

  const double coeff = 0.5 * (1.0 + eta * eta);

  if (d == 1) {
    parallel_for(n, [&](std::size_t i) {
      CounterRng rng(seed, i);
      double y = prior.mu() + std::sqrt(prior.var()) * rng.normal();
      if (keep_paths) batch.paths[i * (steps + 1)] = y;
      for (std::size_t k = 0; k < steps; ++k) {
        const double t = grid.nodes[k];
        const double dt = grid.dt(k);
        const double tau = model.horizon_T - t;
        const double g = model.diffusion(tau);
        const double drift = -model.drift_coeff(tau) * y +
                             coeff * g * g * score(tau, y);
        y += drift * dt + eta * g * std::sqrt(dt) * rng.normal();
        detail::check_finite(y, k, i);
        if (keep_paths) batch.paths[i * (steps + 1) + k + 1] = y;
      }
      batch.terminal[i] = y;
    });
    return batch;
  }

  parallel_for(n, [&](std::size_t i) {
    CounterRng rng(seed, i);
    std::vector<double> y(d);
    for (std::size_t j = 0; j < d; ++j)
      y[j] = prior.mean[j] + std::sqrt(prior.variance[j]) * rng.normal();
    if (keep_paths)
      for (std::size_t j = 0; j < d; ++j) batch.paths[(i * (steps + 1)) * d + j] = y[j];
    for (std::size_t k = 0; k < steps; ++k) {
      const double t = grid.nodes[k];
      const double dt = grid.dt(k);
      const double tau = model.horizon_T - t;
      const double g = model.diffusion(tau);
      const double a = model.drift_coeff(tau);
      const std::vector<double> s = score.eval(tau, y);
      const double noise_scale = eta * g * std::sqrt(dt);
      for (std::size_t j = 0; j < d; ++j) {
        y[j] += (-a * y[j] + coeff * g * g * s[j]) * dt + noise_scale * rng.normal();
        detail::check_finite(y[j], k, i);
      }
      if (keep_paths)
        for (std::size_t j = 0; j < d; ++j)
          batch.paths[(i * (steps + 1) + k + 1) * d + j] = y[j];
    }
    for (std::size_t j = 0; j < d; ++j) batch.terminal[i * d + j] = y[j];
  });
  return batch;
}

// Probability-flow ODE dY = (-f(T-t,Y) + 1/2 g^2(T-t) s(T-t,Y)) dt.
// Randomness only in the initial draw (first normal of substream i, matching
// integrate_sde so eta = 0 Euler runs couple exactly).
inline TrajectoryBatch integrate_ode(const DiffusionModel& model,
                                     const ScoreModel& score, const TimeGrid& grid,
                                     std::size_t n, std::uint64_t seed,
                                     bool keep_paths = false,
                                     OdeScheme scheme = OdeScheme::RK4) {
  const GaussianLaw prior = backward_prior(model);
  const std::size_t d = model.dim;
  const std::size_t steps = grid.n_steps;

  TrajectoryBatch batch;
  batch.model_id = model.name();
  batch.eta = 0.0;
  batch.seed = seed;
  batch.grid = grid;
  batch.n = n;
  batch.dim = d;
  batch.terminal.resize(n * d);
  batch.has_paths = keep_paths;
  if (keep_paths) batch.paths.resize(n * (steps + 1) * d);

  if (d == 1) {
    parallel_for(n, [&](std::size_t i) {
      CounterRng rng(seed, i);
      double y = prior.mu() + std::sqrt(prior.var()) * rng.normal();
      if (keep_paths) batch.paths[i * (steps + 1)] = y;
      for (std::size_t k = 0; k < steps; ++k) {
        const double t = grid.nodes[k];
        const double dt = grid.dt(k);
        if (scheme == OdeScheme::Euler) {
          y += detail::backward_drift(model, score, 0.5, t, y) * dt;
        } else {
          const double k1 = detail::backward_drift(model, score, 0.5, t, y);
          const double k2 =
              detail::backward_drift(model, score, 0.5, t + 0.5 * dt, y + 0.5 * dt * k1);
          const double k3 =
              detail::backward_drift(model, score, 0.5, t + 0.5 * dt, y + 0.5 * dt * k2);
          const double k4 =
              detail::backward_drift(model, score, 0.5, t + dt, y + dt * k3);
          y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        detail::check_finite(y, k, i);
        if (keep_paths) batch.paths[i * (steps + 1) + k + 1] = y;
      }
      batch.terminal[i] = y;
    });
    return batch;
  }

  auto drift_vec = [&](double t, const std::vector<double>& y) {
    const double tau = model.horizon_T - t;
    const double g = model.diffusion(tau);
    const double a = model.drift_coeff(tau);
    std::vector<double> s = score.eval(tau, y);
    for (std::size_t j = 0; j < d; ++j) s[j] = -a * y[j] + 0.5 * g * g * s[j];
    return s;
  };

  parallel_for(n, [&](std::size_t i) {
    CounterRng rng(seed, i);
    std::vector<double> y(d);
    for (std::size_t j = 0; j < d; ++j)
      y[j] = prior.mean[j] + std::sqrt(prior.variance[j]) * rng.normal();
    if (keep_paths)
      for (std::size_t j = 0; j < d; ++j) batch.paths[(i * (steps + 1)) * d + j] = y[j];
    std::vector<double> tmp(d);
    for (std::size_t k = 0; k < steps; ++k) {
      const double t = grid.nodes[k];
      const double dt = grid.dt(k);
      if (scheme == OdeScheme::Euler) {
        const std::vector<double> k1 = drift_vec(t, y);
        for (std::size_t j = 0; j < d; ++j) y[j] += dt * k1[j];
      } else {
        const std::vector<double> k1 = drift_vec(t, y);
        for (std::size_t j = 0; j < d; ++j) tmp[j] = y[j] + 0.5 * dt * k1[j];
        const std::vector<double> k2 = drift_vec(t + 0.5 * dt, tmp);
        for (std::size_t j = 0; j < d; ++j) tmp[j] = y[j] + 0.5 * dt * k2[j];
        const std::vector<double> k3 = drift_vec(t + 0.5 * dt, tmp);
        for (std::size_t j = 0; j < d; ++j) tmp[j] = y[j] + dt * k3[j];
        const std::vector<double> k4 = drift_vec(t + dt, tmp);
        for (std::size_t j = 0; j < d; ++j)
          y[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
      }
      for (std::size_t j = 0; j < d; ++j) detail::check_finite(y[j], k, i);
      if (keep_paths)
        for (std::size_t j = 0; j < d; ++j)
          batch.paths[(i * (steps + 1) + k + 1) * d + j] = y[j];
    }
    for (std::size_t j = 0; j < d; ++j) batch.terminal[i * d + j] = y[j];
  });
  return batch;
}

enum class ScheduleKind { VpQuadratic, Cosine, Custom };

struct AlphaSchedule {
  std::vector<double> alphas;  // non-increasing, alphas[0] = 1; flat only at
                               // the clamp floor
  TimeGrid grid;

  std::size_t size() const { return alphas.size(); }
};

inline constexpr double kAlphaClamp = 1e-5;

inline AlphaSchedule build_alpha_schedule(ScheduleKind kind, const TimeGrid& grid,
                                          std::vector<double> custom = {}) {
  AlphaSchedule sched;
  sched.grid = grid;
  if (kind == ScheduleKind::Custom) {
    sched.alphas = std::move(custom);
  } else {
    sched.alphas.resize(grid.nodes.size());
    for (std::size_t k = 0; k < grid.nodes.size(); ++k) {
      const double t = grid.nodes[k];
      // vp_quadratic: alpha_t = e^{-t^2}, so f = 1/2 (dlog alpha/dt) x = -t x
      const double a = kind == ScheduleKind::VpQuadratic
                           ? std::exp(-t * t)
                           : std::pow(std::cos(0.5 * std::numbers::pi * t /
                                               grid.horizon_T),
                                      2.0);
      sched.alphas[k] = std::max(a, kAlphaClamp);
    }
  }
  if (sched.alphas.empty() || sched.alphas.front() != 1.0)
    throw std::invalid_argument("invalid schedule");
  for (std::size_t k = 1; k < sched.alphas.size(); ++k) {
    const bool at_clamp = sched.alphas[k] == kAlphaClamp &&
                          sched.alphas[k] == sched.alphas[k - 1];
    if ((!(sched.alphas[k] < sched.alphas[k - 1]) && !at_clamp) ||
        !(sched.alphas[k] > 0.0))
      throw std::invalid_argument("invalid schedule");
  }
  return sched;
}

// Variance of the injected gDDIM noise; zero at eta = 0 and saturating at
// 1 - alpha_prev as eta grows. alpha_prev is the earlier-time (larger) value.
inline double gddim_sigma_sq(double alpha_now, double alpha_prev, double eta) {
  if (!(alpha_now > 0.0 && alpha_now <= alpha_prev && alpha_prev <= 1.0))
    throw std::invalid_argument("schedule order");
  if (eta == 0.0 || alpha_now == alpha_prev) return 0.0;
  const double e2 = eta * eta;
  const double ratio = ((1.0 - alpha_prev) / (1.0 - alpha_now)) *
                       (alpha_now / alpha_prev);
  double s = (1.0 - alpha_prev) * (1.0 - std::pow(ratio, e2));
  if (s < 0.0) s = 0.0;
  if (s > 1.0 - alpha_prev) s = 1.0 - alpha_prev;
  return s;
}

inline double gddim_step(double x, double alpha_now, double alpha_prev, double eta,
                         double score_value, double noise) {
  const double sig_sq = gddim_sigma_sq(alpha_now, alpha_prev, eta);
  const double c = 1.0 - alpha_prev - sig_sq;
  if (c < 0.0) throw std::runtime_error("schedule inconsistency");
  const double r = std::sqrt(alpha_prev / alpha_now);
  return r * x +
         (r * (1.0 - alpha_now) - std::sqrt(c * (1.0 - alpha_now))) * score_value +
         std::sqrt(sig_sq) * noise;
}

// Iterates gddim_step from the last schedule index down to 0 starting from
// x_T ~ N(0, I). Deterministic given seed.
inline TrajectoryBatch gddim_sample(const AlphaSchedule& schedule,
                                    const ScoreModel& score, double eta,
                                    std::size_t n, std::uint64_t seed) {
  const std::size_t last = schedule.size() - 1;
  TrajectoryBatch batch;
  batch.model_id = "gddim";
  batch.eta = eta;
  batch.seed = seed;
  batch.grid = schedule.grid;
  batch.n = n;
  batch.dim = 1;
  batch.terminal.resize(n);

  parallel_for(n, [&](std::size_t i) {
    CounterRng rng(seed, i);
    double x = rng.normal();
    for (std::size_t k = last; k > 0; --k) {
      const double t = schedule.grid.nodes[k];
      const double s = score(t, x);
      x = gddim_step(x, schedule.alphas[k], schedule.alphas[k - 1], eta, s,
                     rng.normal());
      detail::check_finite(x, k, i);
    }
    batch.terminal[i] = x;
  });
  return batch;
}

}  // namespace gaplab
