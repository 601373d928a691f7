#include "tfb/erm_lab.hpp"

#include <algorithm>
#include <cmath>

#include "tfb/parallel.hpp"
#include "tfb/quadrature.hpp"

namespace tfb {

void ExperimentConfig::validate() const {
  arch.validate();
  budget.validate();
  if (n_grid.empty()) throw InvalidParameter("ExperimentConfig: n_grid must be nonempty");
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    if (n_grid[i] < 1) throw InvalidParameter("ExperimentConfig: sample sizes must be >= 1");
    if (i > 0 && n_grid[i] <= n_grid[i - 1])
      throw InvalidParameter("ExperimentConfig: n_grid must be strictly ascending");
  }
  if (n_test < 10000) throw InvalidParameter("ExperimentConfig: n_test must be >= 10^4");
  if (seeds.empty()) throw InvalidParameter("ExperimentConfig: seeds must be nonempty");
  if (optimizer.restarts < 1) throw InvalidParameter("ExperimentConfig: restarts must be >= 1");
  if (optimizer.steps < 1 || !(optimizer.step_size > 0.0))
    throw InvalidParameter("ExperimentConfig: optimizer steps/step_size invalid");
  if (noise_sd < 0.0) throw InvalidParameter("ExperimentConfig: noise_sd must be >= 0");
  if (!(delta.lo > 0.0) || delta.hi < delta.lo || delta.points < 1)
    throw InvalidParameter("ExperimentConfig: bad delta grid");
  const bool wants_subg =
      data_regime == DataRegime::subgaussian ||
      std::count(bound_families.begin(), bound_families.end(), BoundFamily::subgaussian) > 0;
  const bool wants_heavy =
      data_regime == DataRegime::heavytail ||
      std::count(bound_families.begin(), bound_families.end(), BoundFamily::heavytail) > 0;
  if (wants_subg && (!budget.tail || budget.tail->regime != TailRegime::subgaussian))
    throw InvalidParameter("ExperimentConfig: sub-Gaussian regime requires a matching tail model");
  if (wants_heavy && (!budget.tail || budget.tail->regime != TailRegime::heavytail))
    throw InvalidParameter("ExperimentConfig: heavy-tail regime requires a matching tail model");
}

namespace {

MatrixDist regime_dist(const ExperimentConfig& config) {
  switch (config.data_regime) {
    case DataRegime::bounded:
      return UniformBallDist{config.budget.B_X};
    case DataRegime::subgaussian: {
      const double nu = config.budget.tail ? config.budget.tail->nu : 1.0;
      const double dim = static_cast<double>(std::max(config.arch.T, config.arch.d));
      return GaussianDist{nu / std::sqrt(dim)};
    }
    case DataRegime::heavytail: {
      const TailModel& t = *config.budget.tail;
      return ParetoDist{t.beta, t.x_min};
    }
  }
  throw InvalidParameter("generate_dataset: unknown data regime");
}

Mat draw_input(const ExperimentConfig& config, RngStream stream) {
  return sample_matrix(regime_dist(config), config.arch.T, config.arch.d, stream);
}

// Training loss; Catoni-damped in the heavy-tail regime.
double train_loss(const ExperimentConfig& config, double y, double yhat) {
  const double base = loss_value(config.loss, y, yhat);
  if (config.data_regime == DataRegime::heavytail) {
    const double alpha = config.budget.tail ? config.budget.tail->alpha : 1.0;
    return robust_loss(base, alpha);
  }
  return base;
}

// Conditional excess loss matching the training objective.
double cell_excess(const ExperimentConfig& config, double yhat, double ystar) {
  if (config.data_regime != DataRegime::heavytail)
    return conditional_excess(config.loss, config.noise_sd, yhat, ystar);
  const double alpha = config.budget.tail ? config.budget.tail->alpha : 1.0;
  auto f = [&](double e) {
    const double y = ystar + e;
    return robust_loss(loss_value(config.loss, y, yhat), alpha) -
           robust_loss(loss_value(config.loss, y, ystar), alpha);
  };
  if (config.noise_sd <= 0.0) return f(0.0);
  if (config.loss == Loss::absolute)
    return gaussian_expectation_kinked(f, config.noise_sd, {yhat - ystar, 0.0});
  return gaussian_expectation(f, config.noise_sd);
}

constexpr std::uint64_t kTagTeacher = 0;
constexpr std::uint64_t kTagData = 1;
constexpr std::uint64_t kTagTrain = 2;
constexpr std::uint64_t kTagTest = 3;

}  // namespace

Dataset generate_dataset(const ExperimentConfig& config, long n, RngStream stream) {
  config.arch.validate();
  config.budget.validate();
  if (n < 1) throw InvalidParameter("generate_dataset: n must be >= 1");
  if (config.data_regime != DataRegime::bounded && !config.budget.tail)
    throw InvalidParameter("generate_dataset: unbounded regime requires a tail model");
  Dataset data;
  // Teacher substream is independent of n: cells sharing a seed share a teacher.
  data.teacher = project_params(
      sample_params(config.arch, substream(stream, kTagTeacher)), config.budget, config.arch);
  const RngStream draws = substream(stream, kTagData, static_cast<std::uint64_t>(n));
  data.X.reserve(static_cast<std::size_t>(n));
  data.y.resize(n);
  for (long i = 0; i < n; ++i) {
    const RngStream point = substream(draws, static_cast<std::uint64_t>(i));
    data.X.push_back(draw_input(config, substream(point, 0)));
    double y = forward(data.teacher, data.X.back(), config.arch);
    if (config.noise_sd > 0.0) y += config.noise_sd * Rng(substream(point, 1)).gaussian();
    data.y(i) = y;
  }
  return data;
}

double empirical_risk(const ExperimentConfig& config, const TransformerParams& params,
                      const Dataset& data) {
  if (data.X.empty()) throw InvalidParameter("empirical_risk: empty dataset");
  double acc = 0.0;
  for (std::size_t i = 0; i < data.X.size(); ++i)
    acc += train_loss(config, data.y(static_cast<Index>(i)),
                      forward(params, data.X[i], config.arch));
  return acc / static_cast<double>(data.X.size());
}

TrainResult train_erm(const ExperimentConfig& config, const Dataset& data, RngStream stream,
                      const std::optional<TransformerParams>& init) {
  if (data.X.empty()) throw InvalidParameter("train_erm: empty dataset");
  const ArchSpec& spec = config.arch;
  auto risk_of = [&](const Vec& theta) {
    return empirical_risk(config, unflatten_params(theta, spec), data);
  };

  std::optional<Vec> best_theta;
  double best_risk = std::numeric_limits<double>::infinity();
  const Index P = param_count(spec);

  // Each restart descends from the best of a small random init batch; the
  // batch streams are keyed by restart index, so adding restarts never
  // changes earlier ones.
  constexpr int kInitBatch = 32;
  for (int r = 0; r < config.optimizer.restarts; ++r) {
    TransformerParams start;
    if (r == 0 && init) {
      start = *init;
    } else {
      const RngStream batch = substream(stream, static_cast<std::uint64_t>(r));
      double best_init = std::numeric_limits<double>::infinity();
      for (int j = 0; j < kInitBatch; ++j) {
        TransformerParams cand = project_params(
            sample_params(spec, substream(batch, static_cast<std::uint64_t>(j))), config.budget,
            spec);
        const double cand_risk = empirical_risk(config, cand, data);
        if (cand_risk < best_init) {
          best_init = cand_risk;
          start = std::move(cand);
        }
      }
    }
    Vec theta = flatten_params(start);
    double risk = risk_of(theta);
    if (!std::isfinite(risk))
      throw OptimizerFailure("train_erm: non-finite risk at initialization (restart " +
                             std::to_string(r) + ")");
    double lr = config.optimizer.step_size;
    Vec grad(P);
    for (int step = 0; step < config.optimizer.steps; ++step) {
      for (Index j = 0; j < P; ++j) {
        const double h = 1e-4 * std::max(1.0, std::abs(theta(j)));
        Vec probe = theta;
        probe(j) = theta(j) + h;
        const double up = risk_of(probe);
        probe(j) = theta(j) - h;
        const double down = risk_of(probe);
        grad(j) = (up - down) / (2.0 * h);
      }
      if (!grad.allFinite())
        throw OptimizerFailure("train_erm: non-finite gradient (restart " + std::to_string(r) +
                               ", step " + std::to_string(step) + ")");
      bool improved = false;
      double trial_lr = lr;
      for (int half = 0; half < 12; ++half) {
        const Vec cand = flatten_params(project_params(
            unflatten_params(theta - trial_lr * grad, spec), config.budget, spec));
        const double cand_risk = risk_of(cand);
        if (!std::isfinite(cand_risk))
          throw OptimizerFailure("train_erm: risk diverged (restart " + std::to_string(r) +
                                 ", step " + std::to_string(step) + ")");
        if (cand_risk < risk) {
          theta = cand;
          risk = cand_risk;
          lr = std::min(trial_lr * 1.5, config.optimizer.step_size);
          improved = true;
          break;
        }
        trial_lr *= 0.5;
      }
      if (!improved) break;  // no descent direction at this resolution
    }
    // Coordinate polish: a projected 1-D grid refinement per parameter.
    // Runs per restart, so best-of over a restart prefix stays monotone.
    auto project_theta = [&](Vec v) {
      return flatten_params(project_params(unflatten_params(v, spec), config.budget, spec));
    };
    for (int round = 0; round < 2; ++round) {
      for (Index j = 0; j < P; ++j) {
        double center = theta(j);
        double span = 0.5 * std::max(1.0, std::abs(center));
        for (int level = 0; level < 3; ++level) {
          double best_x = center;
          for (int g = -3; g <= 3; ++g) {
            if (g == 0) continue;
            Vec probe = theta;
            probe(j) = center + span * static_cast<double>(g) / 3.0;
            probe = project_theta(probe);
            const double probe_risk = risk_of(probe);
            if (probe_risk < risk) {
              risk = probe_risk;
              theta = probe;
              best_x = probe(j);
            }
          }
          center = best_x;
          span *= 0.25;
        }
      }
    }
    if (risk < best_risk) {
      best_risk = risk;
      best_theta = theta;
    }
  }

  TrainResult out;
  out.params = unflatten_params(*best_theta, spec);
  out.final_risk = best_risk;
  out.teacher_risk = empirical_risk(config, data.teacher, data);
  out.optimizer_gap = std::max(0.0, out.final_risk - out.teacher_risk);
  return out;
}

RiskEstimate estimate_excess_risk(const TransformerParams& fitted,
                                  const TransformerParams& teacher,
                                  const ExperimentConfig& config, long n_test, RngStream stream) {
  if (n_test < 10000) throw InvalidParameter("estimate_excess_risk: n_test must be >= 10^4");
  std::vector<double> excess(static_cast<std::size_t>(n_test));
  for (long i = 0; i < n_test; ++i) {
    const Mat X = draw_input(config, substream(stream, static_cast<std::uint64_t>(i)));
    excess[static_cast<std::size_t>(i)] =
        cell_excess(config, forward(fitted, X, config.arch), forward(teacher, X, config.arch));
  }
  long double sum = 0.0L;
  for (const double v : excess) sum += v;
  const double mean = static_cast<double>(sum / static_cast<long double>(n_test));
  long double ss = 0.0L;
  for (const double v : excess) ss += static_cast<long double>(v - mean) * (v - mean);
  RiskEstimate est;
  est.mean = mean;
  est.std_error =
      n_test > 1 ? std::sqrt(static_cast<double>(ss) / (n_test - 1)) / std::sqrt(static_cast<double>(n_test))
                 : 0.0;
  return est;
}

double effective_kappa(const ExperimentConfig& config, std::optional<double> threshold) {
  switch (config.loss) {
    case Loss::squared: {
      ParamBudget b = config.budget;
      if (threshold) b.B_X = *threshold;
      return 2.0 * (config.budget.B + output_bound(config.arch, b));
    }
    case Loss::absolute:
    case Loss::logistic:
      return 1.0;
  }
  throw InvalidParameter("effective_kappa: unknown loss");
}

ExperimentResult run_experiment(const ExperimentConfig& config, int workers) {
  config.validate();
  ExperimentResult result;
  result.config = config;
  const std::size_t n_cells = config.n_grid.size() * config.seeds.size();
  result.cells.resize(n_cells);
  const RngStream root{config.seed_base, 0};
  const std::vector<double> grid = delta_grid(config.delta.lo, config.delta.hi,
                                              config.delta.points);

  parallel_for(n_cells, workers, [&](std::size_t idx) {
    const std::size_t ni = idx / config.seeds.size();
    const std::size_t si = idx % config.seeds.size();
    const long n = config.n_grid[ni];
    const std::uint64_t seed = config.seeds[si];
    CellResult cell;
    cell.n = n;
    cell.seed = seed;
    try {
      const RngStream seed_stream = substream(root, seed);
      Dataset data = generate_dataset(config, n, seed_stream);

      std::optional<double> threshold;
      if (config.truncation) {
        threshold = config.truncation->M
                        ? *config.truncation->M
                        : optimal_threshold(*config.budget.tail, std::max<long>(n, 2));
        std::vector<std::pair<Mat, double>> pairs;
        pairs.reserve(data.X.size());
        for (std::size_t i = 0; i < data.X.size(); ++i)
          pairs.emplace_back(data.X[i], data.y(static_cast<Index>(i)));
        TruncationOutcome trunc = truncate_dataset(pairs, *threshold);
        for (std::size_t i = 0; i < data.X.size(); ++i) data.X[i] = trunc.data[i].first;
        data.truncation_rate = trunc.rate;
        data.truncation_threshold = threshold;
        cell.truncation_rate = trunc.rate;
      }

      const TrainResult fit = train_erm(config, data, substream(seed_stream, kTagTrain,
                                                                static_cast<std::uint64_t>(n)));
      cell.fitted_risk = fit.final_risk;
      cell.optimizer_gap = fit.optimizer_gap;

      const RiskEstimate est = estimate_excess_risk(
          fit.params, data.teacher, config, config.n_test,
          substream(seed_stream, kTagTest, static_cast<std::uint64_t>(n)));
      cell.empirical = est.mean;
      cell.std_error = est.std_error;

      const double kappa = effective_kappa(config, threshold);
      cell.kappa_used = kappa;
      ParamBudget bound_budget = config.budget;
      bound_budget.kappa = kappa;
      for (const BoundFamily family : config.bound_families) {
        const BoundReport rep = minimize_over_delta(
            [&](double d) {
              return evaluate_bound_family(family, config.arch, bound_budget, n, d, 0.0,
                                           threshold);
            },
            grid);
        FamilyCell fc;
        fc.bound = rep.total;
        fc.ratio = rep.total / cell.empirical;
        fc.delta = rep.delta;
        fc.threshold = rep.threshold;
        cell.bounds.emplace_back(family, fc);
      }
    } catch (const OptimizerFailure& err) {
      cell.failed = true;
      cell.failure = err.what();
    }
    result.cells[idx] = std::move(cell);
  });

  for (const long n : config.n_grid) {
    std::vector<double> values;
    for (const auto& cell : result.cells)
      if (cell.n == n && !cell.failed) values.push_back(cell.empirical);
    if (values.empty()) continue;
    std::sort(values.begin(), values.end());
    const std::size_t m = values.size();
    const double median =
        m % 2 == 1 ? values[m / 2] : 0.5 * (values[m / 2 - 1] + values[m / 2]);
    result.median_empirical.emplace_back(n, median);
  }
  for (std::size_t i = 1; i < result.median_empirical.size(); ++i)
    if (result.median_empirical[i].second > result.median_empirical[i - 1].second)
      ++result.median_inversions;
  return result;
}

}  // namespace tfb
