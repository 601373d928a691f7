#pragma once

#include <cmath>

#include "tfb/quadrature.hpp"
#include "tfb/types.hpp"

namespace tfb {

enum class Loss { squared, absolute, logistic };

inline double softplus(double z) {
  if (z > 30.0) return z;
  if (z < -30.0) return std::exp(z);
  return std::log1p(std::exp(z));
}

/// Pointwise loss value ell(y, yhat).
inline double loss_value(Loss loss, double y, double yhat) {
  switch (loss) {
    case Loss::squared:
      return (y - yhat) * (y - yhat);
    case Loss::absolute:
      return std::abs(y - yhat);
    case Loss::logistic:
      return softplus(-y * yhat);
  }
  throw InvalidParameter("loss_value: unknown loss");
}

/// Conditional excess loss E_eps[ell(ystar + eps, yhat) - ell(ystar + eps, ystar)]
/// for centered Gaussian noise of the given sd. Squared loss reduces to
/// (yhat - ystar)^2; absolute loss integrates piecewise around its kinks;
/// logistic uses Gauss-Hermite.
inline double conditional_excess(Loss loss, double noise_sd, double yhat, double ystar) {
  switch (loss) {
    case Loss::squared:
      return (yhat - ystar) * (yhat - ystar);
    case Loss::absolute: {
      if (noise_sd <= 0.0) return std::abs(ystar - yhat);
      const double c = ystar - yhat;
      return gaussian_expectation_kinked(
          [&](double e) { return std::abs(c + e) - std::abs(e); }, noise_sd, {-c, 0.0});
    }
    case Loss::logistic: {
      auto f = [&](double e) {
        const double y = ystar + e;
        return softplus(-y * yhat) - softplus(-y * ystar);
      };
      if (noise_sd <= 0.0) return f(0.0);
      return gaussian_expectation(f, noise_sd);
    }
  }
  throw InvalidParameter("conditional_excess: unknown loss");
}

}  // namespace tfb
