#pragma once

#include <string>
#include <vector>

#include "tfb/losses.hpp"
#include "tfb/rng.hpp"
#include "tfb/transformer.hpp"
#include "tfb/types.hpp"

namespace tfb {

/// Excess-loss values g(X_i; f_j) over a finite class (rows) and a sample
/// (columns); the object offset complexity is computed on.
struct FunctionClassSample {
  Mat values;            // N_f x n
  double value_cap = 0;  // tracked max |entry|

  static FunctionClassSample from_matrix(Mat G);
  Index class_size() const { return values.rows(); }
  Index sample_size() const { return values.cols(); }
};

enum class OffsetMethod { exact, monte_carlo };

struct OffsetEstimate {
  double value = 0.0;
  double std_error = 0.0;  // 0 for exact
  OffsetMethod method = OffsetMethod::exact;
  long n_draws = 0;
  double beta = 0.0;
};

/// Exact offset complexity by enumeration of all 2^n sign vectors:
/// 2^-n sum_tau max_j [ (1/n) sum_i tau_i G_ji - (beta/n) sum_i G_ji^2 ].
/// Requires n <= 20; larger samples must use the Monte Carlo estimator.
OffsetEstimate offset_complexity_exact(const FunctionClassSample& fc, double beta,
                                       int workers = 1);

/// Monte Carlo estimate over n_draws i.i.d. sign vectors. Each draw has its
/// own substream and results reduce in draw order, so the estimate is
/// identical for every worker count.
OffsetEstimate offset_complexity_mc(const FunctionClassSample& fc, double beta, long n_draws,
                                    RngStream stream, int workers = 1);

/// Build a finite-grid excess-loss class: grid_size parameter sets are
/// sampled, projected to the budget, and evaluated against the teacher on
/// the given inputs under centered Gaussian noise. include_teacher prepends
/// the teacher's own (all-zero) row.
FunctionClassSample build_class_sample(const ArchSpec& spec, const ParamBudget& budget, Loss loss,
                                       const TransformerParams& teacher,
                                       const std::vector<Mat>& X_sample, long grid_size,
                                       RngStream stream, double noise_sd,
                                       bool include_teacher = false);

/// Matrix-series concentration statistics for Z = sum_k g_k B_k with
/// standard normal or Rademacher coefficients.
struct MatrixSeriesBounds {
  double variance = 0.0;    // max(|sum B B^T|, |sum B^T B|) in spectral norm
  double mean_bound = 0.0;  // sqrt(2 v log(d1 + d2))
  Index d1 = 0, d2 = 0;

  double tail(double t) const {
    if (variance <= 0.0) return t > 0.0 ? 0.0 : static_cast<double>(d1 + d2);
    return static_cast<double>(d1 + d2) * std::exp(-t * t / (2.0 * variance));
  }
};

MatrixSeriesBounds matrix_series_bounds(const std::vector<Mat>& series);

/// CSV dump / reload of the value matrix (full double precision).
void write_class_sample_csv(const FunctionClassSample& fc, const std::string& path);
FunctionClassSample read_class_sample_csv(const std::string& path);

}  // namespace tfb
