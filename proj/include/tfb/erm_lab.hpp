#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tfb/bounds.hpp"
#include "tfb/losses.hpp"
#include "tfb/rng.hpp"
#include "tfb/tails.hpp"
#include "tfb/transformer.hpp"

namespace tfb {

enum class DataRegime { bounded, subgaussian, heavytail };

struct OptimizerConfig {
  double step_size = 0.1;
  int steps = 200;
  int restarts = 2;
};

struct TruncationConfig {
  std::optional<double> M;  // unset -> optimal_threshold per cell
};

struct DeltaGridConfig {
  double lo = 1e-6;
  double hi = 1.0;
  int points = 32;
};

struct ExperimentConfig {
  ArchSpec arch;
  ParamBudget budget;
  DataRegime data_regime = DataRegime::bounded;
  Loss loss = Loss::squared;
  double noise_sd = 0.1;
  std::vector<long> n_grid;
  long n_test = 10000;
  std::vector<std::uint64_t> seeds;
  OptimizerConfig optimizer;
  std::vector<BoundFamily> bound_families;
  std::optional<TruncationConfig> truncation;
  DeltaGridConfig delta;
  std::uint64_t seed_base = 0;

  void validate() const;
};

struct Dataset {
  std::vector<Mat> X;
  Vec y;
  TransformerParams teacher;
  double truncation_rate = 0.0;
  std::optional<double> truncation_threshold;
};

/// Sample a budget-projected teacher and a size-n dataset for the configured
/// regime; Y = teacher(X) + centered Gaussian noise. The teacher substream
/// does not depend on n, so cells sharing a seed share their teacher.
Dataset generate_dataset(const ExperimentConfig& config, long n, RngStream stream);

/// Mean training loss (robust-damped in the heavy-tail regime).
double empirical_risk(const ExperimentConfig& config, const TransformerParams& params,
                      const Dataset& data);

struct TrainResult {
  TransformerParams params;
  double final_risk = 0.0;
  double teacher_risk = 0.0;
  double optimizer_gap = 0.0;  // max(0, final - teacher) on the training set
};

/// Projected gradient descent (central-difference gradients) with restarts;
/// returns the best run by final empirical risk. An explicit init seeds
/// restart 0. Throws OptimizerFailure on divergence.
TrainResult train_erm(const ExperimentConfig& config, const Dataset& data, RngStream stream,
                      const std::optional<TransformerParams>& init = std::nullopt);

struct RiskEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Monte Carlo population excess risk R(fitted) - R(teacher) on a fresh
/// sample, with the conditional expectation over Y taken in closed form or
/// by quadrature.
RiskEstimate estimate_excess_risk(const TransformerParams& fitted,
                                  const TransformerParams& teacher,
                                  const ExperimentConfig& config, long n_test, RngStream stream);

struct FamilyCell {
  double bound = 0.0;
  double ratio = 0.0;  // bound / empirical
  double delta = 0.0;
  std::optional<double> threshold;
};

struct CellResult {
  long n = 0;
  std::uint64_t seed = 0;
  double empirical = 0.0;
  double std_error = 0.0;
  std::vector<std::pair<BoundFamily, FamilyCell>> bounds;
  double fitted_risk = 0.0;
  double optimizer_gap = 0.0;
  double truncation_rate = 0.0;
  double kappa_used = 0.0;
  bool failed = false;
  std::string failure;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<CellResult> cells;                        // ordered by (n, seed)
  std::vector<std::pair<long, double>> median_empirical;  // per-n medians
  // adjacent per-n median increases; more than one flags optimizer trouble
  int median_inversions = 0;
};

/// Full grid: generate, (optionally) truncate, train, estimate, and evaluate
/// every requested bound family per (n, seed) cell. Optimizer failures flag
/// their cell without aborting the grid. Deterministic for any worker count.
ExperimentResult run_experiment(const ExperimentConfig& config, int workers = 1);

/// Lipschitz constant of the excess loss for the configured loss: squared
/// uses 2 (B + output bound) with the truncation threshold standing in for
/// B_X when one applies; absolute and logistic are 1-Lipschitz.
double effective_kappa(const ExperimentConfig& config, std::optional<double> threshold);

/// JSON (full precision) plus CSV rows (n, seed, family, empirical, se,
/// bound, ratio, truncation_rate, optimizer_gap) at <stem>.json / <stem>.csv.
void write_result(const ExperimentResult& result, const std::string& path_stem);

}  // namespace tfb
