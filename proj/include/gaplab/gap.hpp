#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "gaplab/diffusion.hpp"
#include "gaplab/finetune.hpp"
#include "gaplab/gaussian.hpp"
#include "gaplab/samplers.hpp"
#include "gaplab/trajectory.hpp"

namespace gaplab {

enum class GapMethod { Analytic, MonteCarlo };

struct GapReport {
  double j_ref = 0.0, j_sde = 0.0, j_ode = 0.0;
  double se_ref = 0.0, se_sde = 0.0, se_ode = 0.0;
  double delta = 0.0;         // |j_ode - j_sde|
  double signed_gap = 0.0;    // j_ode - j_sde (sign differs by algorithm)
  double se_delta = 0.0;
  double improvement = 0.0;   // j_ode - j_ref
  double bound_value = 0.0;
  bool bound_satisfied = false;
  GapMethod method = GapMethod::Analytic;
};

// Leading-order theorem bounds and the finite-T slack used to test them.
inline double gap_bound(ModelKind model, double T) {
  return model == ModelKind::VE ? 1.0 / (2.0 * T) : 0.5 * std::exp(-T * T);
}

inline double gap_bound_slack(ModelKind model, double T) {
  return model == ModelKind::VE ? 1.0 / (T * T) : std::exp(-2.0 * T * T);
}

/// Exact non-asymptotic inequality chain for the VE gap, valid at all T:
//   |Delta| <= Tbar^{-1} + bbar^2 Tbar^{-1} + 2 bbar (1-bbar) Tbar^{-1/2},
// with Tbar = 1 + T^2 and bbar = (1 + beta/2)^{-1}.
inline double ve_gap_chain_bound(double beta, double T) {
  const double tbar = 1.0 + T * T;
  const double bbar = 1.0 / (1.0 + 0.5 * beta);
  return 1.0 / tbar + bbar * bbar / tbar +
         2.0 * bbar * (1.0 - bbar) / std::sqrt(tbar);
}

// Closed-form gap report at the optimal theta*.
inline GapReport analytic_gap(const FinetuneSpec& spec) {
  spec.validate();
  const double theta = optimal_theta(spec);
  const ProcessTriple triple = process_triple(spec, theta);
  GapReport r;
  r.method = GapMethod::Analytic;
  r.j_ref = reward_expectation(triple.ref_law, spec.target);
  r.j_sde = reward_expectation(triple.sde_law, spec.target);
  r.j_ode = reward_expectation(triple.ode_law, spec.target);
  r.signed_gap = r.j_ode - r.j_sde;
  r.delta = std::abs(r.signed_gap);
  r.improvement = r.j_ode - r.j_ref;
  r.bound_value = gap_bound(spec.model, spec.T);
  r.bound_satisfied = r.delta <= r.bound_value + gap_bound_slack(spec.model, spec.T);
  return r;
}

namespace detail {

// Plug-in mean reward with standard error (sample std / sqrt(n)).
inline void reward_stats(const TrajectoryBatch& batch,
                         const std::vector<double>& anchor, double& mean,
                         double& se) {
  const std::size_t n = batch.n;
  if (n == 0) throw std::invalid_argument("reward_stats: empty batch");
  if (batch.dim != anchor.size())
    throw std::invalid_argument("mismatched dimensions");
  double s = 0.0;
  std::vector<double> x(batch.dim);
  std::vector<double> rewards(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < batch.dim; ++j) x[j] = batch.terminal_at(i, j);
    rewards[i] = quadratic_reward(x, anchor);
    s += rewards[i];
  }
  mean = s / static_cast<double>(n);
  double q = 0.0;
  for (double ri : rewards) {
    const double d = ri - mean;
    q += d * d;
  }
  se = std::sqrt(q / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
}

}  // namespace detail

// Monte Carlo gap report from three terminal-sample batches; sde and ode must
// be evaluated at the same theta. Delta error bars combine in quadrature.
inline GapReport mc_gap(const TrajectoryBatch& ref, const TrajectoryBatch& sde,
                        const TrajectoryBatch& ode,
                        const std::vector<double>& anchor) {
  if (ref.dim != sde.dim || sde.dim != ode.dim ||
      ref.grid.horizon_T != sde.grid.horizon_T ||
      sde.grid.horizon_T != ode.grid.horizon_T)
    throw std::invalid_argument("mismatched dimensions");
  GapReport r;
  r.method = GapMethod::MonteCarlo;
  detail::reward_stats(ref, anchor, r.j_ref, r.se_ref);
  detail::reward_stats(sde, anchor, r.j_sde, r.se_sde);
  detail::reward_stats(ode, anchor, r.j_ode, r.se_ode);
  r.signed_gap = r.j_ode - r.j_sde;
  r.delta = std::abs(r.signed_gap);
  r.se_delta = std::sqrt(r.se_sde * r.se_sde + r.se_ode * r.se_ode);
  r.improvement = r.j_ode - r.j_ref;
  return r;
}

/// Exact 1-D W2 between empirical distributions: quantile (order-statistic)
// coupling. Unequal counts are matched by linear quantile interpolation.
inline double w2_1d(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("w2_1d: empty input");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const std::size_t n = std::max(a.size(), b.size());
  auto quantile = [](const std::vector<double>& v, double u) {
    const double pos = u * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double w = pos - static_cast<double>(lo);
    return (1.0 - w) * v[lo] + w * v[hi];
  };
  double s = 0.0;
  if (a.size() == b.size()) {
    for (std::size_t i = 0; i < n; ++i) {
      const double d = a[i] - b[i];
      s += d * d;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const double u = n == 1 ? 0.0
                              : static_cast<double>(i) / static_cast<double>(n - 1);
      const double d = quantile(a, u) - quantile(b, u);
      s += d * d;
    }
  }
  return std::sqrt(s / static_cast<double>(n));
}

// Synchronous-coupling displacement: sqrt(mean |Y_T^SDE - Y_T^ODE|^2) over
// batches sharing initial draws; upper-bounds W2 by the coupling definition.
inline double coupled_l2(const TrajectoryBatch& sde, const TrajectoryBatch& ode) {
  if (sde.seed != ode.seed) throw std::invalid_argument("uncoupled batches");
  if (sde.n != ode.n || sde.dim != ode.dim ||
      sde.grid.n_steps != ode.grid.n_steps ||
      sde.grid.horizon_T != ode.grid.horizon_T)
    throw std::invalid_argument("uncoupled batches");
  double s = 0.0;
  for (std::size_t i = 0; i < sde.n; ++i)
    for (std::size_t j = 0; j < sde.dim; ++j) {
      const double d = sde.terminal_at(i, j) - ode.terminal_at(i, j);
      s += d * d;
    }
  return std::sqrt(s / static_cast<double>(sde.n));
}

struct W2Assumptions {
  double m = 0.0;      // dissipativity constant of f
  double L = 0.0;      // score Lipschitz constant
  double A = 0.0;      // sup_t E|Y^SDE_t|^2
  double g_inf = 0.0;  // sup |g|
  double eta = 0.0;
  double kappa = 0.0;  // strict-negativity margin (derived)
  double C = 0.0;      // reward Lipschitz constant, 0 = unsupplied

  // -2m + (L + eta^2/4) g_inf^2 <= -kappa < 0 must hold or the bound is
  // inapplicable.
  double negativity() const {
    return -2.0 * m + (L + 0.25 * eta * eta) * g_inf * g_inf;
  }
};

// Right-hand side of the W2 theorem:
//   eta |g|_inf sqrt((L^2 A + 1)(1 - e^{-kappa T}) / kappa)
inline double w2_bound(const W2Assumptions& assumptions, double T) {
  const double neg = assumptions.negativity();
  if (!(neg < 0.0))
    throw std::runtime_error("bound inapplicable (vacuous regime)");
  const double kappa = -neg;
  const double L = assumptions.L;
  return assumptions.eta * assumptions.g_inf *
         std::sqrt((L * L * assumptions.A + 1.0) * (1.0 - std::exp(-kappa * T)) /
                   kappa);
}

inline double w2_reward_gap_bound(const W2Assumptions& assumptions, double T) {
  if (!(assumptions.C > 0.0))
    throw std::invalid_argument("w2_reward_gap_bound: C not supplied");
  return assumptions.C * w2_bound(assumptions, T);
}

// Empirical assumption constants: m-hat and L-hat from difference quotients
// over sampled state pairs, A-hat as the max per-step second moment of the
// batch (needs kept paths). Estimates, not certificates; g_inf is the
// caller's to supply (the batch does not carry the diffusion coefficient).
inline W2Assumptions estimate_assumptions(
    const std::function<double(double, double)>& f, const ScoreModel& score,
    const TrajectoryBatch& sde) {
  W2Assumptions out;
  out.eta = sde.eta;

  const double T = sde.grid.horizon_T;
  std::vector<double> probes;
  for (int i = -20; i <= 20; ++i) probes.push_back(0.35 * static_cast<double>(i));

  double m_hat = std::numeric_limits<double>::infinity();
  double l_hat = 0.0;
  const std::size_t time_probes = 64;
  for (std::size_t k = 0; k <= time_probes; ++k) {
    const double t = T * static_cast<double>(k) / static_cast<double>(time_probes);
    for (std::size_t i = 0; i + 1 < probes.size(); ++i) {
      const double y1 = probes[i], y2 = probes[i + 1];
      const double dy = y2 - y1;
      m_hat = std::min(m_hat, -(f(t, y2) - f(t, y1)) * dy / (dy * dy));
      l_hat = std::max(l_hat, std::abs(score(t, y2) - score(t, y1)) / std::abs(dy));
    }
  }
  out.m = m_hat;
  out.L = l_hat;

  double a_hat = 0.0;
  if (sde.has_paths) {
    const std::size_t steps = sde.grid.n_steps;
    for (std::size_t k = 0; k <= steps; ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i < sde.n; ++i)
        for (std::size_t j = 0; j < sde.dim; ++j) {
          const double v = sde.path_at(i, k, j);
          s += v * v;
        }
      a_hat = std::max(a_hat, s / static_cast<double>(sde.n));
    }
  } else {
    double s = 0.0;
    for (double v : sde.terminal) s += v * v;
    a_hat = s / static_cast<double>(sde.n);
  }
  out.A = a_hat;
  out.kappa = -out.negativity();
  return out;
}

// Monte Carlo gap experiment for a mixture target under the orthogonality
// corollary: reward anchor r with mu_i . r = 0, unit isotropic components and
// centered mixture mean. The control theta* acts along the anchor direction
// only.
inline GapReport mixture_gap_experiment(const MixtureLaw& prior,
                                        const std::vector<double>& anchor,
                                        double eta, double T, std::size_t n,
                                        std::uint64_t seed, double beta = 2.0,
                                        std::size_t n_steps = 400) {
  prior.validate();
  const std::size_t d = prior.dim();
  if (anchor.size() != d)
    throw std::invalid_argument("mixture_gap_experiment: anchor dimension");

  double anchor_norm = 0.0;
  for (double v : anchor) anchor_norm += v * v;
  anchor_norm = std::sqrt(anchor_norm);
  if (!(anchor_norm > 0.0)) throw std::invalid_argument("corollary inapplicable");

  for (std::size_t i = 0; i < prior.components(); ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < d; ++j) dot += prior.means[i][j] * anchor[j];
    if (std::abs(dot) > 1e-12) throw std::invalid_argument("corollary inapplicable");
    for (double v : prior.covariances[i])
      if (std::abs(v - 1.0) > 1e-12)
        throw std::invalid_argument("corollary inapplicable");
  }
  for (std::size_t j = 0; j < d; ++j) {
    double c = 0.0;
    for (std::size_t i = 0; i < prior.components(); ++i)
      c += prior.weights[i] * prior.means[i][j];
    if (std::abs(c) > 1e-12) throw std::invalid_argument("corollary inapplicable");
  }

  const DiffusionModel model = DiffusionModel::ve(T, d);
  const double theta_star = optimal_theta_ve(eta, beta, T);
  std::vector<double> theta_vec(d, 0.0);
  for (std::size_t j = 0; j < d; ++j)
    theta_vec[j] = theta_star * anchor[j] / anchor_norm;

  const ScoreModel ref_score = ScoreModel::exact_mixture(prior, model);
  const ScoreModel tuned = ref_score.with_constant_shift(theta_vec);
  const TimeGrid grid(T, n_steps);

  const TrajectoryBatch ref = integrate_sde(model, ref_score, eta, grid, n, seed);
  // sde/ode share a seed: the common initial draws couple the estimators
  // and shrink the variance of the measured gap.
  const TrajectoryBatch sde =
      integrate_sde(model, tuned, eta, grid, n, seed + 1);
  const TrajectoryBatch ode = integrate_ode(model, tuned, grid, n, seed + 1);

  GapReport r = mc_gap(ref, sde, ode, anchor);
  r.bound_value = gap_bound(ModelKind::VE, T);
  r.bound_satisfied = r.delta <= r.bound_value + 3.0 * r.se_delta;
  return r;
}

}  // namespace gaplab
