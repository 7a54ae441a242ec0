#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "gaplab/diffusion.hpp"
#include "gaplab/finetune.hpp"
#include "gaplab/parallel.hpp"
#include "gaplab/rng.hpp"
#include "gaplab/samplers.hpp"
#include "gaplab/time_grid.hpp"
#include "gaplab/trajectory.hpp"

namespace gaplab {

using RewardFn = std::function<double(const std::vector<double>&)>;

// Gaussian step policy pi(x_{k+1} | x_k): the Euler transition of the
// eta-SDE with learnable control theta in the score argument.
struct PolicySpec {
  DiffusionModel model;  // VE or VP
  ControlForm control_form = ControlForm::ConstantShift;
  std::vector<double> theta;
  double eta_train = 1.0;
  TimeGrid grid;

  void validate() const {
    if (model.kind == ModelKind::GenericLinear)
      throw std::invalid_argument("PolicySpec: model must be VE or VP");
    if (!(eta_train > 0.0))
      throw std::invalid_argument("PolicySpec: eta_train must be > 0");
    if (control_form == ControlForm::None)
      throw std::invalid_argument("PolicySpec: control form required");
    if (theta.size() != model.dim)
      throw std::invalid_argument("PolicySpec: theta dimension mismatch");
  }

  ScoreModel score() const {
    ScoreModel s = model.kind == ModelKind::VE
                       ? ScoreModel::exact_ve(model.horizon_T)
                       : ScoreModel::exact_vp();
    return control_form == ControlForm::ConstantShift
               ? s.with_constant_shift(theta)
               : s.with_decayed_shift(theta);
  }

  PolicySpec with_theta(std::vector<double> th) const {
    PolicySpec p = *this;
    p.theta = std::move(th);
    return p;
  }
};

struct RolloutGroup {
  TrajectoryBatch batch;       // paths kept; states are the step statistics
  std::vector<double> rewards;
  std::vector<double> logp;    // cumulative path log-likelihood per trajectory

  std::size_t size() const { return batch.n; }
};

struct TrainConfig {
  std::size_t iterations = 100;
  std::size_t batch_size = 256;     // rollouts per DDPO iteration
  std::size_t group_size = 16;      // G
  std::size_t groups_per_iter = 8;  // GRPO groups per iteration
  double learning_rate = 0.05;
  double clip_eps = 0.2;
  double beta = 0.0;     // KL weight; 0 disables the analytic KL term
  double momentum = 0.0; // 0 = plain gradient ascent
  std::size_t epochs = 1;           // GRPO sample-reuse epochs per batch
  std::size_t eval_samples = 1024;  // ODE-sampled reward estimate per iteration
  std::uint64_t seed = 1;

  void validate() const {
    if (iterations == 0) throw std::invalid_argument("TrainConfig: iterations");
    // learning rate 0 is admitted as the degenerate "frozen policy" case
    if (!(learning_rate >= 0.0))
      throw std::invalid_argument("TrainConfig: learning rate must be >= 0");
    if (!(clip_eps > 0.0 && clip_eps < 1.0))
      throw std::invalid_argument("TrainConfig: clip eps must be in (0, 1)");
    if (group_size < 2) throw std::invalid_argument("TrainConfig: group size >= 2");
    if (!(beta >= 0.0)) throw std::invalid_argument("TrainConfig: beta must be >= 0");
    if (epochs == 0) throw std::invalid_argument("TrainConfig: epochs >= 1");
  }
};

struct IterRecord {
  std::size_t iter = 0;
  std::vector<double> theta;
  double j_sde = 0.0;      // mean rollout reward under the eta-SDE policy
  double j_ode = 0.0;      // ODE-sampled reward at the same theta
  double gap = 0.0;        // |j_ode - j_sde|
  double grad_norm = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<double> theta;
  std::vector<IterRecord> log;
};

namespace detail {

// d(score)/dx is constant in x for the exact VE/VP scores.
inline double score_dx(const PolicySpec& policy, double tau) {
  return policy.model.kind == ModelKind::VE ? -1.0 / (tau * tau + 1.0) : -1.0;
}

inline double shift_scale(const PolicySpec& policy, double tau) {
  return policy.control_form == ControlForm::ConstantShift
             ? 1.0
             : std::exp(-0.5 * tau * tau);
}

inline std::uint64_t iter_seed(std::uint64_t seed, std::size_t iter) {
  // splitmix-style decorrelation of per-iteration rollout streams
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (iter + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

struct StepStats {
  double tau, g, a, sigma_sq, dt;
};

inline StepStats step_stats(const PolicySpec& policy, std::size_t k) {
  StepStats s;
  const double t = policy.grid.nodes[k];
  s.dt = policy.grid.dt(k);
  s.tau = policy.model.horizon_T - t;
  s.g = policy.model.diffusion(s.tau);
  s.a = policy.model.drift_coeff(s.tau);
  s.sigma_sq = policy.eta_train * policy.eta_train * s.g * s.g * s.dt;
  return s;
}

}  // namespace detail

// Log-density of x_next under the Euler transition from x_now at step k:
// mean = x_now + drift(theta) dt, variance = eta^2 g^2(T - t_k) dt per coord.
inline double step_log_density(const std::vector<double>& x_next,
                               const std::vector<double>& x_now,
                               const PolicySpec& policy, std::size_t step_index) {
  policy.validate();
  if (x_next.size() != policy.model.dim || x_now.size() != policy.model.dim)
    throw std::invalid_argument("step_log_density: state dimension mismatch");
  const detail::StepStats st = detail::step_stats(policy, step_index);
  if (!(st.sigma_sq > 0.0)) throw std::runtime_error("degenerate policy step");
  const ScoreModel score = policy.score();
  const std::vector<double> s = score.eval(st.tau, x_now);
  const double coeff = 0.5 * (1.0 + policy.eta_train * policy.eta_train);
  double lp = 0.0;
  for (std::size_t j = 0; j < x_now.size(); ++j) {
    const double mean =
        x_now[j] + (-st.a * x_now[j] + coeff * st.g * st.g * s[j]) * st.dt;
    const double d = x_next[j] - mean;
    lp += -0.5 * std::log(2.0 * std::numbers::pi * st.sigma_sq) -
          0.5 * d * d / st.sigma_sq;
  }
  return lp;
}

inline double step_log_density(double x_next, double x_now,
                               const PolicySpec& policy, std::size_t step_index) {
  return step_log_density(std::vector<double>{x_next}, std::vector<double>{x_now},
                          policy, step_index);
}

// On-policy rollout of `n` trajectories; stores full paths and the cumulative
// log-likelihood accumulated from the drawn noise.
inline RolloutGroup rollout(const PolicySpec& policy, std::size_t n,
                            std::uint64_t seed, const RewardFn& reward) {
  policy.validate();
  const std::size_t d = policy.model.dim;
  const std::size_t steps = policy.grid.n_steps;
  const GaussianLaw prior = backward_prior(policy.model);
  const ScoreModel score = policy.score();
  const double coeff = 0.5 * (1.0 + policy.eta_train * policy.eta_train);

  RolloutGroup group;
  TrajectoryBatch& batch = group.batch;
  batch.model_id = policy.model.name();
  batch.eta = policy.eta_train;
  batch.seed = seed;
  batch.grid = policy.grid;
  batch.n = n;
  batch.dim = d;
  batch.terminal.resize(n * d);
  batch.has_paths = true;
  batch.paths.resize(n * (steps + 1) * d);
  group.rewards.resize(n);
  group.logp.resize(n);

  parallel_for(n, [&](std::size_t i) {
    CounterRng rng(seed, i);
    std::vector<double> y(d);
    for (std::size_t j = 0; j < d; ++j)
      y[j] = prior.mean[j] + std::sqrt(prior.variance[j]) * rng.normal();
    for (std::size_t j = 0; j < d; ++j)
      batch.paths[(i * (steps + 1)) * d + j] = y[j];
    double lp = 0.0;
    for (std::size_t k = 0; k < steps; ++k) {
      const detail::StepStats st = detail::step_stats(policy, k);
      const double sigma = std::sqrt(st.sigma_sq);
      const std::vector<double> s = score.eval(st.tau, y);
      for (std::size_t j = 0; j < d; ++j) {
        const double xi = rng.normal();
        y[j] += (-st.a * y[j] + coeff * st.g * st.g * s[j]) * st.dt + sigma * xi;
        detail::check_finite(y[j], k, i);
        lp += -0.5 * std::log(2.0 * std::numbers::pi * st.sigma_sq) - 0.5 * xi * xi;
      }
      for (std::size_t j = 0; j < d; ++j)
        batch.paths[(i * (steps + 1) + k + 1) * d + j] = y[j];
    }
    for (std::size_t j = 0; j < d; ++j) batch.terminal[i * d + j] = y[j];
    group.logp[i] = lp;
    group.rewards[i] = reward(y);
  });
  return group;
}

// Per-trajectory score function d(log p_theta(path))/d(theta), recomputed
// from the stored states at the policy's current theta.
inline std::vector<double> path_theta_score(const RolloutGroup& group,
                                            const PolicySpec& policy,
                                            std::size_t traj) {
  const std::size_t d = policy.model.dim;
  const std::size_t steps = policy.grid.n_steps;
  const ScoreModel score = policy.score();
  const double coeff = 0.5 * (1.0 + policy.eta_train * policy.eta_train);
  std::vector<double> grad(d, 0.0);
  std::vector<double> x_now(d);
  for (std::size_t k = 0; k < steps; ++k) {
    const detail::StepStats st = detail::step_stats(policy, k);
    for (std::size_t j = 0; j < d; ++j) x_now[j] = group.batch.path_at(traj, k, j);
    const std::vector<double> s = score.eval(st.tau, x_now);
    const double dmean_dtheta = coeff * st.g * st.g * st.dt *
                                detail::shift_scale(policy, st.tau) *
                                detail::score_dx(policy, st.tau);
    for (std::size_t j = 0; j < d; ++j) {
      const double mean =
          x_now[j] + (-st.a * x_now[j] + coeff * st.g * st.g * s[j]) * st.dt;
      const double resid = group.batch.path_at(traj, k + 1, j) - mean;
      grad[j] += resid / st.sigma_sq * dmean_dtheta;
    }
  }
  return grad;
}

// REINFORCE estimate of the policy gradient, optionally with the batch-mean
// reward baseline.
inline std::vector<double> ddpo_gradient(const RolloutGroup& batch,
                                         const PolicySpec& policy,
                                         bool use_baseline = true) {
  policy.validate();
  const std::size_t n = batch.size();
  if (n == 0) throw std::invalid_argument("ddpo_gradient: empty batch");
  double baseline = 0.0;
  if (use_baseline) {
    for (double r : batch.rewards) baseline += r;
    baseline /= static_cast<double>(n);
  }
  const std::size_t d = policy.model.dim;
  std::vector<double> grad(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<double> sc = path_theta_score(batch, policy, i);
    const double w = batch.rewards[i] - baseline;
    for (std::size_t j = 0; j < d; ++j) grad[j] += w * sc[j];
  }
  for (double& g : grad) g /= static_cast<double>(n);
  return grad;
}

namespace detail {

// d/d(theta) of the terminal KL against the pretrained data law N(0, I),
// available in closed form: the theta-dependent part of the KL is
// ((c-1) theta)^2 / 2 per coordinate, so the gradient is (c-1)^2 theta.
inline std::vector<double> kl_gradient(const PolicySpec& policy) {
  const double T = policy.model.horizon_T;
  const double p = 1.0 + policy.eta_train * policy.eta_train;
  const double c = policy.model.kind == ModelKind::VE
                       ? std::pow(1.0 + T * T, -0.5 * p)
                       : std::exp(-0.5 * p * T * T);
  std::vector<double> g(policy.theta.size());
  for (std::size_t j = 0; j < g.size(); ++j)
    g[j] = (c - 1.0) * (c - 1.0) * policy.theta[j];
  return g;
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double mean_ode_reward(const PolicySpec& policy, const RewardFn& reward,
                              std::size_t n, std::uint64_t seed) {
  const TrajectoryBatch ode =
      integrate_ode(policy.model, policy.score(), policy.grid, n, seed);
  std::vector<double> x(ode.dim);
  double s = 0.0;
  for (std::size_t i = 0; i < ode.n; ++i) {
    for (std::size_t j = 0; j < ode.dim; ++j) x[j] = ode.terminal_at(i, j);
    s += reward(x);
  }
  return s / static_cast<double>(ode.n);
}

inline void check_theta(const std::vector<double>& theta) {
  for (double v : theta)
    if (!std::isfinite(v) || std::abs(v) > 1e3)
      throw std::runtime_error("training diverged");
}

}  // namespace detail

inline TrainResult ddpo_train(const PolicySpec& policy_init,
                              const TrainConfig& config, const RewardFn& reward) {
  policy_init.validate();
  config.validate();
  PolicySpec policy = policy_init;
  const std::size_t d = policy.model.dim;
  std::vector<double> velocity(d, 0.0);

  TrainResult result;
  result.log.reserve(config.iterations);
  for (std::size_t it = 0; it < config.iterations; ++it) {
    const auto started = std::chrono::steady_clock::now();
    const std::uint64_t s = detail::iter_seed(config.seed, it);
    const RolloutGroup batch = rollout(policy, config.batch_size, s, reward);
    std::vector<double> grad = ddpo_gradient(batch, policy, /*use_baseline=*/true);
    if (config.beta > 0.0) {
      const std::vector<double> klg = detail::kl_gradient(policy);
      for (std::size_t j = 0; j < d; ++j) grad[j] -= config.beta * klg[j];
    }
    double gnorm = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      velocity[j] = config.momentum * velocity[j] + grad[j];
      policy.theta[j] += config.learning_rate * velocity[j];
      gnorm += grad[j] * grad[j];
    }
    detail::check_theta(policy.theta);

    IterRecord rec;
    rec.iter = it;
    rec.theta = policy.theta;
    rec.j_sde = detail::mean_of(batch.rewards);
    rec.j_ode = detail::mean_ode_reward(policy, reward, config.eval_samples, s);
    rec.gap = std::abs(rec.j_ode - rec.j_sde);
    rec.grad_norm = std::sqrt(gnorm);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                started)
                      .count();
    result.log.push_back(std::move(rec));
  }
  result.theta = policy.theta;
  return result;
}

// Group-normalized advantages: (r_i - mean) / population std.
inline std::vector<double> grpo_advantages(const std::vector<double>& rewards) {
  if (rewards.size() < 2) throw std::invalid_argument("degenerate group");
  const double mean = detail::mean_of(rewards);
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(rewards.size());
  if (!(var > 0.0)) throw std::runtime_error("degenerate group");
  const double sd = std::sqrt(var);
  std::vector<double> adv(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) / sd;
  return adv;
}

struct GrpoEval {
  double value = 0.0;
  std::vector<double> gradient;
};

// Clipped surrogate over per-step likelihood ratios:
//   mean over groups, members, steps of min(rho A, clip(rho, 1 +/- eps) A).
// Gradient is taken in theta_new; clipped terms contribute zero.
inline GrpoEval grpo_objective(const std::vector<RolloutGroup>& groups,
                               const PolicySpec& policy_template,
                               const std::vector<double>& theta_new,
                               const std::vector<double>& theta_old, double eps) {
  if (!(eps > 0.0 && eps < 1.0))
    throw std::invalid_argument("grpo_objective: eps must be in (0, 1)");
  const PolicySpec pol_new = policy_template.with_theta(theta_new);
  const PolicySpec pol_old = policy_template.with_theta(theta_old);
  pol_new.validate();
  pol_old.validate();
  const std::size_t d = pol_new.model.dim;
  const std::size_t steps = pol_new.grid.n_steps;

  GrpoEval out;
  out.gradient.assign(d, 0.0);
  double total_terms = 0.0;

  std::vector<double> x_now(d), x_next(d);
  const ScoreModel score_new = pol_new.score();
  const ScoreModel score_old = pol_old.score();
  const double coeff = 0.5 * (1.0 + pol_new.eta_train * pol_new.eta_train);

  for (const RolloutGroup& group : groups) {
    const std::vector<double> adv = grpo_advantages(group.rewards);
    for (std::size_t i = 0; i < group.size(); ++i) {
      for (std::size_t k = 0; k < steps; ++k) {
        const detail::StepStats st = detail::step_stats(pol_new, k);
        for (std::size_t j = 0; j < d; ++j) {
          x_now[j] = group.batch.path_at(i, k, j);
          x_next[j] = group.batch.path_at(i, k + 1, j);
        }
        const std::vector<double> s_new = score_new.eval(st.tau, x_now);
        const std::vector<double> s_old = score_old.eval(st.tau, x_now);
        double lp_new = 0.0, lp_old = 0.0;
        const double dmean_dtheta = coeff * st.g * st.g * st.dt *
                                    detail::shift_scale(pol_new, st.tau) *
                                    detail::score_dx(pol_new, st.tau);
        std::vector<double> dlp(d, 0.0);
        for (std::size_t j = 0; j < d; ++j) {
          const double mean_new =
              x_now[j] + (-st.a * x_now[j] + coeff * st.g * st.g * s_new[j]) * st.dt;
          const double mean_old =
              x_now[j] + (-st.a * x_now[j] + coeff * st.g * st.g * s_old[j]) * st.dt;
          const double rn = x_next[j] - mean_new;
          const double ro = x_next[j] - mean_old;
          lp_new += -0.5 * rn * rn / st.sigma_sq;
          lp_old += -0.5 * ro * ro / st.sigma_sq;
          dlp[j] = rn / st.sigma_sq * dmean_dtheta;
        }
        const double rho = std::exp(lp_new - lp_old);
        if (!std::isfinite(rho)) throw std::runtime_error("ratio overflow");
        const double a = adv[i];
        const double unclipped = rho * a;
        const double clipped =
            std::min(std::max(rho, 1.0 - eps), 1.0 + eps) * a;
        out.value += std::min(unclipped, clipped);
        if (unclipped <= clipped)
          for (std::size_t j = 0; j < d; ++j)
            out.gradient[j] += rho * a * dlp[j];
        total_terms += 1.0;
      }
    }
  }
  if (total_terms > 0.0) {
    out.value /= total_terms;
    for (double& g : out.gradient) g /= total_terms;
  }
  return out;
}

inline TrainResult grpo_train(const PolicySpec& policy_init,
                              const TrainConfig& config, const RewardFn& reward) {
  policy_init.validate();
  config.validate();
  PolicySpec policy = policy_init;
  const std::size_t d = policy.model.dim;
  std::vector<double> velocity(d, 0.0);

  TrainResult result;
  result.log.reserve(config.iterations);
  for (std::size_t it = 0; it < config.iterations; ++it) {
    const auto started = std::chrono::steady_clock::now();
    const std::uint64_t s = detail::iter_seed(config.seed, it);
    const std::vector<double> theta_old = policy.theta;

    std::vector<RolloutGroup> groups;
    groups.reserve(config.groups_per_iter);
    double reward_sum = 0.0;
    std::size_t reward_count = 0;
    for (std::size_t g = 0; g < config.groups_per_iter; ++g) {
      RolloutGroup group = rollout(policy, config.group_size,
                                   s + 0x51ED270B * (g + 1), reward);
      for (double r : group.rewards) {
        reward_sum += r;
        ++reward_count;
      }
      // skip degenerate groups (all rewards identical): no advantage signal
      const double first = group.rewards.front();
      bool degenerate = true;
      for (double r : group.rewards)
        if (r != first) { degenerate = false; break; }
      if (!degenerate) groups.push_back(std::move(group));
    }

    double gnorm = 0.0;
    if (!groups.empty()) {
      for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const GrpoEval eval = grpo_objective(groups, policy, policy.theta,
                                             theta_old, config.clip_eps);
        gnorm = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          velocity[j] = config.momentum * velocity[j] + eval.gradient[j];
          policy.theta[j] += config.learning_rate * velocity[j];
          gnorm += eval.gradient[j] * eval.gradient[j];
        }
        detail::check_theta(policy.theta);
      }
    }

    IterRecord rec;
    rec.iter = it;
    rec.theta = policy.theta;
    rec.j_sde = reward_count ? reward_sum / static_cast<double>(reward_count) : 0.0;
    rec.j_ode = detail::mean_ode_reward(policy, reward, config.eval_samples, s);
    rec.gap = std::abs(rec.j_ode - rec.j_sde);
    rec.grad_norm = std::sqrt(gnorm);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                started)
                      .count();
    result.log.push_back(std::move(rec));
  }
  result.theta = policy.theta;
  return result;
}

}  // namespace gaplab
