#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace gaplab {

// Gaussian with diagonal covariance. Scalar convenience accessors cover the
// 1-D case used throughout the VE/VP analysis.
struct GaussianLaw {
  std::vector<double> mean;
  std::vector<double> variance;  // diagonal entries, each >= 0

  GaussianLaw() = default;
  GaussianLaw(double mu, double var) : mean{mu}, variance{var} { validate(); }
  GaussianLaw(std::vector<double> mu, std::vector<double> var)
      : mean(std::move(mu)), variance(std::move(var)) {
    validate();
  }

  std::size_t dim() const { return mean.size(); }
  double mu() const { return mean.at(0); }
  double var() const { return variance.at(0); }

  void validate() const {
    if (mean.size() != variance.size())
      throw std::invalid_argument("GaussianLaw: mean/variance dimension mismatch");
    for (double v : variance)
      if (!(v >= 0.0)) throw std::invalid_argument("GaussianLaw: negative variance");
  }
};

struct MixtureLaw {
  std::vector<double> weights;
  std::vector<std::vector<double>> means;
  std::vector<std::vector<double>> covariances;  // diagonal entries per component

  std::size_t components() const { return weights.size(); }
  std::size_t dim() const { return means.empty() ? 0 : means.front().size(); }

  void validate() const {
    if (weights.empty() || weights.size() != means.size() ||
        weights.size() != covariances.size())
      throw std::invalid_argument("MixtureLaw: component count mismatch");
    double total = 0.0;
    for (double w : weights) {
      if (!(w > 0.0)) throw std::invalid_argument("MixtureLaw: weights must be positive");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw std::invalid_argument("MixtureLaw: weights must sum to 1");
    const std::size_t d = dim();
    for (std::size_t i = 0; i < means.size(); ++i)
      if (means[i].size() != d || covariances[i].size() != d)
        throw std::invalid_argument("MixtureLaw: components must share dimension");
  }
};

inline double quadratic_reward(const std::vector<double>& x,
                               const std::vector<double>& anchor) {
  if (x.size() != anchor.size())
    throw std::invalid_argument("quadratic_reward: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - anchor[i];
    s += d * d;
  }
  return -s;
}

inline double quadratic_reward(double x, double anchor) {
  const double d = x - anchor;
  return -d * d;
}

// KL(p || q) for diagonal Gaussians, summed coordinate-wise.
inline double gaussian_kl(const GaussianLaw& p, const GaussianLaw& q) {
  if (p.dim() != q.dim())
    throw std::invalid_argument("gaussian_kl: dimension mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.dim(); ++i) {
    const double s1 = p.variance[i];
    const double s2 = q.variance[i];
    if (!(s2 > 0.0)) throw std::invalid_argument("gaussian_kl: singular q");
    const double dm = p.mean[i] - q.mean[i];
    kl += 0.5 * std::log(s2 / s1) + (s1 + dm * dm) / (2.0 * s2) - 0.5;
  }
  return kl;
}

// E[-(X - anchor)^2] for Gaussian X: -(trace(var) + |mean - anchor|^2).
inline double reward_expectation(const GaussianLaw& law,
                                 const std::vector<double>& anchor) {
  if (law.dim() != anchor.size())
    throw std::invalid_argument("reward_expectation: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < law.dim(); ++i) {
    const double d = law.mean[i] - anchor[i];
    s += law.variance[i] + d * d;
  }
  return -s;
}

inline double reward_expectation(const GaussianLaw& law, double anchor) {
  return reward_expectation(law, std::vector<double>{anchor});
}

}  // namespace gaplab
