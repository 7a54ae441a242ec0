#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>

#include "gaplab/gaussian.hpp"

namespace gaplab {

inline constexpr double kQuadratureTol = 1e-10;
inline constexpr std::size_t kQuadratureMaxNodes = std::size_t{1} << 20;

// Adaptive composite Simpson on a doubling uniform grid.
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = kQuadratureTol) {
  if (a == b) return 0.0;
  std::size_t n = 16;
  auto simpson = [&](std::size_t m) {
    const double h = (b - a) / static_cast<double>(m);
    double s = f(a) + f(b);
    for (std::size_t j = 1; j < m; ++j)
      s += (j % 2 == 1 ? 4.0 : 2.0) * f(a + h * static_cast<double>(j));
    return s * h / 3.0;
  };
  double prev = simpson(n);
  while (n < kQuadratureMaxNodes) {
    n *= 2;
    const double cur = simpson(n);
    if (std::abs(cur - prev) < tol) return cur;
    prev = cur;
  }
  return prev;
}

// Exact Gaussian law of dZ = (a(s) Z + b(s)) ds + h(s) dB at time t for a
// Gaussian initial condition. With F(t) = int_0^t a:
//   mean(t) = e^{F(t)} (mu0 + int_0^t e^{-F(s)} b(s) ds)
//   var(t)  = e^{2F(t)} (var0 + int_0^t e^{-2F(s)} h(s)^2 ds)
// The three integrals are coupled through F, so they are advanced together
// with classic fourth-order steps on a doubling grid (tolerance 1e-10,
// node cap 2^20).
inline GaussianLaw linear_sde_law(const std::function<double(double)>& a,
                                  const std::function<double(double)>& b,
                                  const std::function<double(double)>& h,
                                  const GaussianLaw& init, double t,
                                  double tol = kQuadratureTol) {
  if (init.dim() != 1)
    throw std::invalid_argument("linear_sde_law: expects a 1-D initial law");
  if (t == 0.0) return init;

  auto eval_checked = [](const std::function<double(double)>& f, double s) {
    const double v = f(s);
    if (!std::isfinite(v)) throw std::runtime_error("coefficient blow-up");
    return v;
  };

  auto solve = [&](std::size_t n, double& F, double& M, double& V) {
    const double dt = t / static_cast<double>(n);
    F = 0.0;
    M = 0.0;
    V = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double s0 = dt * static_cast<double>(k);
      const double sm = s0 + 0.5 * dt;
      const double s1 = s0 + dt;
      const double a0 = eval_checked(a, s0), am = eval_checked(a, sm),
                   a1 = eval_checked(a, s1);
      const double b0 = eval_checked(b, s0), bm = eval_checked(b, sm),
                   b1 = eval_checked(b, s1);
      const double h0 = eval_checked(h, s0), hm = eval_checked(h, sm),
                   h1 = eval_checked(h, s1);
      // RK4 for F' = a, M' = e^{-F} b, V' = e^{-2F} h^2 (a,b,h depend on s only)
      const double Fm = F + 0.5 * dt * a0;                      // midpoint estimates of F
      const double Fm2 = F + 0.5 * dt * am;
      const double F1 = F + dt * am;
      M += dt / 6.0 *
           (std::exp(-F) * b0 + 2.0 * std::exp(-Fm) * bm + 2.0 * std::exp(-Fm2) * bm +
            std::exp(-F1) * b1);
      V += dt / 6.0 *
           (std::exp(-2.0 * F) * h0 * h0 + 4.0 * std::exp(-(Fm + Fm2)) * hm * hm +
            std::exp(-2.0 * F1) * h1 * h1);
      F += dt / 6.0 * (a0 + 4.0 * am + a1);
    }
  };

  std::size_t n = 64;
  double F, M, V;
  solve(n, F, M, V);
  double mean_prev = std::exp(F) * (init.mu() + M);
  double var_prev = std::exp(2.0 * F) * (init.var() + V);
  while (n < kQuadratureMaxNodes) {
    n *= 2;
    solve(n, F, M, V);
    const double mean_cur = std::exp(F) * (init.mu() + M);
    const double var_cur = std::exp(2.0 * F) * (init.var() + V);
    if (std::abs(mean_cur - mean_prev) < tol && std::abs(var_cur - var_prev) < tol)
      return GaussianLaw(mean_cur, var_cur);
    mean_prev = mean_cur;
    var_prev = var_cur;
  }
  return GaussianLaw(mean_prev, var_prev);
}

}  // namespace gaplab
