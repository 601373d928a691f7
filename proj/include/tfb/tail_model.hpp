#pragma once

#include "tfb/types.hpp"

namespace tfb {

enum class TailRegime { subgaussian, heavytail };

/// Input-tail description for the unbounded regimes plus the robust-loss
/// and truncation constants attached to them.
struct TailModel {
  TailRegime regime = TailRegime::subgaussian;

  // sub-Gaussian: P(|X|_F >= t) <= (T+d) exp(-t^2 / (2 nu^2)).
  double nu = 1.0;

  // heavy tail: P(|X_ij| > x) <= C x^(-beta), entrywise, x >= x_min.
  double beta = 3.0;
  double C = 1.0;
  double x_min = 1.0;

  // matrix shape the tail statements refer to
  Index T = 1;
  Index d = 1;

  double B_psi = 1.0;    // robust-loss derivative cap
  double alpha = 1.0;    // robust-loss scale
  double C_trunc = 2.0;  // explicit multiplier for the truncation-bias terms

  void validate() const {
    if (T < 1 || d < 1) throw InvalidParameter("TailModel: shape must be >= 1x1");
    if (!(B_psi > 0.0) || !(alpha > 0.0) || !(C_trunc > 0.0))
      throw InvalidParameter("TailModel: B_psi, alpha, C_trunc must be > 0");
    if (regime == TailRegime::subgaussian) {
      if (!(nu > 0.0)) throw InvalidParameter("TailModel: nu must be > 0");
    } else {
      if (!(beta > 2.0)) throw InvalidParameter("TailModel: beta must be > 2");
      if (!(C > 0.0) || !(x_min > 0.0))
        throw InvalidParameter("TailModel: C and x_min must be > 0");
    }
  }
};

}  // namespace tfb
