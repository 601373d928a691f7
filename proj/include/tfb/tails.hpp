#pragma once

#include <utility>
#include <vector>

#include "tfb/tail_model.hpp"
#include "tfb/types.hpp"

namespace tfb {

/// max of the spectral norms of the empirical second-moment matrices
/// mean(X^T X) and mean(X X^T).
double second_moment_proxy(const std::vector<Mat>& samples);

/// Truncation-bias term for sub-Gaussian inputs:
/// C_trunc * kappa * (T+d) * (M^2 + 2 nu^2) * exp(-M^2 / (2 nu^2)).
double subgaussian_tail_term(double kappa, const TailModel& tail, double M);

/// Truncation-bias term for heavy-tailed inputs:
/// kappa * B_psi * C * (T d)^(1 + beta/2) * (beta / (beta - 2)) * M^(2 - beta).
double heavy_tail_term(const TailModel& tail, double kappa, double M);

/// Threshold balancing complexity growth against truncation bias:
/// nu * sqrt(2 log((T+d) n)) (sub-Gaussian) or n^(1/(beta-2)) (heavy tail).
double optimal_threshold(const TailModel& tail, long n);

/// Catoni-damped loss (1/alpha) log(1 + x + x^2/2) with x = alpha * loss.
/// Lies in [0, loss] and is 1-Lipschitz in the base loss.
double robust_loss(double loss_value, double alpha);

struct TruncationOutcome {
  std::vector<std::pair<Mat, double>> data;
  double rate = 0.0;  // fraction of inputs actually truncated
};

/// Project every input onto the Frobenius ball of radius M.
TruncationOutcome truncate_dataset(const std::vector<std::pair<Mat, double>>& data, double M);

}  // namespace tfb
