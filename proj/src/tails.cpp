#include "tfb/tails.hpp"

#include <cmath>

#include "tfb/matrix_kit.hpp"

namespace tfb {

double second_moment_proxy(const std::vector<Mat>& samples) {
  if (samples.empty()) throw InvalidParameter("second_moment_proxy: empty sample list");
  const Index rows = samples.front().rows();
  const Index cols = samples.front().cols();
  Mat gram_cols = Mat::Zero(cols, cols);  // mean of X^T X
  Mat gram_rows = Mat::Zero(rows, rows);  // mean of X X^T
  for (const auto& X : samples) {
    if (X.rows() != rows || X.cols() != cols)
      throw InvalidParameter("second_moment_proxy: samples must share a shape");
    gram_cols.noalias() += X.transpose() * X;
    gram_rows.noalias() += X * X.transpose();
  }
  const double inv_n = 1.0 / static_cast<double>(samples.size());
  return std::max(spectral_norm(gram_cols * inv_n), spectral_norm(gram_rows * inv_n));
}

double subgaussian_tail_term(double kappa, const TailModel& tail, double M) {
  if (M < 0.0) throw InvalidParameter("subgaussian_tail_term: M must be >= 0");
  tail.validate();
  if (tail.regime != TailRegime::subgaussian)
    throw InvalidParameter("subgaussian_tail_term: tail model is not sub-Gaussian");
  const double nu2 = tail.nu * tail.nu;
  const double dims = static_cast<double>(tail.T + tail.d);
  return tail.C_trunc * kappa * dims * (M * M + 2.0 * nu2) * std::exp(-M * M / (2.0 * nu2));
}

double heavy_tail_term(const TailModel& tail, double kappa, double M) {
  if (!(M > 0.0)) throw InvalidParameter("heavy_tail_term: M must be > 0");
  if (!(tail.beta > 2.0)) throw InvalidParameter("heavy_tail_term: beta must be > 2");
  tail.validate();
  const double td = static_cast<double>(tail.T) * static_cast<double>(tail.d);
  return kappa * tail.B_psi * tail.C * std::pow(td, 1.0 + tail.beta / 2.0) *
         (tail.beta / (tail.beta - 2.0)) * std::pow(M, 2.0 - tail.beta);
}

double optimal_threshold(const TailModel& tail, long n) {
  if (n < 2) throw InvalidParameter("optimal_threshold: n must be >= 2");
  tail.validate();
  if (tail.regime == TailRegime::subgaussian) {
    const double dims = static_cast<double>(tail.T + tail.d);
    return tail.nu * std::sqrt(2.0 * std::log(dims * static_cast<double>(n)));
  }
  return std::pow(static_cast<double>(n), 1.0 / (tail.beta - 2.0));
}

double robust_loss(double loss_value, double alpha) {
  if (loss_value < 0.0) throw InvalidParameter("robust_loss: loss must be >= 0");
  if (!(alpha > 0.0)) throw InvalidParameter("robust_loss: alpha must be > 0");
  const double x = alpha * loss_value;
  return std::log1p(x + 0.5 * x * x) / alpha;
}

TruncationOutcome truncate_dataset(const std::vector<std::pair<Mat, double>>& data, double M) {
  if (!(M > 0.0)) throw InvalidParameter("truncate_dataset: M must be > 0");
  TruncationOutcome out;
  out.data.reserve(data.size());
  std::size_t truncated = 0;
  for (const auto& [X, y] : data) {
    if (X.norm() > M) ++truncated;
    out.data.emplace_back(project_frobenius_ball(X, M), y);
  }
  out.rate = data.empty() ? 0.0 : static_cast<double>(truncated) / static_cast<double>(data.size());
  return out;
}

}  // namespace tfb
