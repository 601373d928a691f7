#include <doctest.h>

#include <cmath>

#include "tfb/erm_lab.hpp"
#include "tfb/serialize.hpp"

using namespace tfb;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.arch.kind = ArchKind::SH;
  cfg.arch.T = 2;
  cfg.arch.d = 1;
  cfg.arch.k = 1;
  cfg.budget.budget_mode = BudgetMode::l11;
  cfg.data_regime = DataRegime::bounded;
  cfg.loss = Loss::squared;
  cfg.noise_sd = 0.1;
  cfg.n_grid = {16, 64};
  cfg.n_test = 10000;
  cfg.seeds = {1, 2, 3};
  cfg.optimizer.step_size = 0.2;
  cfg.optimizer.steps = 60;
  cfg.optimizer.restarts = 2;
  cfg.bound_families = {BoundFamily::offset_generic, BoundFamily::norm, BoundFamily::rank};
  return cfg;
}

}  // namespace

TEST_CASE("generate_dataset determinism, noiseless labels and bounded inputs") {
  ExperimentConfig cfg = tiny_config();
  cfg.noise_sd = 0.0;
  const Dataset a = generate_dataset(cfg, 20, RngStream{1, 0});
  const Dataset b = generate_dataset(cfg, 20, RngStream{1, 0});
  CHECK(a.y == b.y);
  for (std::size_t i = 0; i < a.X.size(); ++i) CHECK(a.X[i] == b.X[i]);
  for (std::size_t i = 0; i < a.X.size(); ++i) {
    CHECK(a.y(static_cast<Index>(i)) == forward(a.teacher, a.X[i], cfg.arch));
    CHECK(spectral_norm(a.X[i]) <= cfg.budget.B_X * (1 + 1e-12));
  }
  // teacher does not depend on n
  const Dataset c = generate_dataset(cfg, 40, RngStream{1, 0});
  CHECK(c.teacher.readout == a.teacher.readout);
  CHECK(c.teacher.layers[0][0].value == a.teacher.layers[0][0].value);
  // distinct streams give distinct data
  const Dataset d = generate_dataset(cfg, 20, RngStream{1, 1});
  CHECK(a.y != d.y);
  cfg.noise_sd = 0.3;
  const Dataset noisy = generate_dataset(cfg, 20, RngStream{1, 0});
  CHECK(noisy.y != a.y);
}

TEST_CASE("train_erm stays at the teacher on noiseless data") {
  ExperimentConfig cfg = tiny_config();
  cfg.noise_sd = 0.0;
  cfg.optimizer.steps = 20;
  const Dataset data = generate_dataset(cfg, 32, RngStream{2, 0});
  const TrainResult fit = train_erm(cfg, data, RngStream{2, 1}, data.teacher);
  CHECK(fit.final_risk <= 1e-8);
  CHECK(fit.optimizer_gap == 0.0);
}

TEST_CASE("train_erm beats a 10^4-point random parameter search") {
  ExperimentConfig cfg = tiny_config();
  cfg.optimizer.steps = 120;
  cfg.optimizer.restarts = 3;
  const Dataset data = generate_dataset(cfg, 32, RngStream{3, 0});
  const TrainResult fit = train_erm(cfg, data, RngStream{3, 1});
  double best_random = std::numeric_limits<double>::infinity();
  for (std::uint64_t j = 0; j < 10000; ++j) {
    const TransformerParams p = project_params(
        sample_params(cfg.arch, substream(RngStream{3, 2}, j)), cfg.budget, cfg.arch);
    best_random = std::min(best_random, empirical_risk(cfg, p, data));
  }
  CHECK(fit.final_risk <= best_random + 1e-12);
}

TEST_CASE("doubling restarts never increases the returned risk") {
  ExperimentConfig cfg = tiny_config();
  cfg.optimizer.steps = 40;
  const Dataset data = generate_dataset(cfg, 24, RngStream{4, 0});
  cfg.optimizer.restarts = 2;
  const double risk2 = train_erm(cfg, data, RngStream{4, 1}).final_risk;
  cfg.optimizer.restarts = 4;
  const double risk4 = train_erm(cfg, data, RngStream{4, 1}).final_risk;
  CHECK(risk4 <= risk2 + 1e-15);
}

TEST_CASE("estimate_excess_risk at the teacher is exactly zero") {
  ExperimentConfig cfg = tiny_config();
  const Dataset data = generate_dataset(cfg, 16, RngStream{5, 0});
  const RiskEstimate est =
      estimate_excess_risk(data.teacher, data.teacher, cfg, 10000, RngStream{5, 1});
  CHECK(est.mean == 0.0);
  CHECK(est.std_error == 0.0);
  CHECK_THROWS_AS(estimate_excess_risk(data.teacher, data.teacher, cfg, 100, RngStream{5, 1}),
                  InvalidParameter);
}

TEST_CASE("estimate_excess_risk matches an independent second sample") {
  ExperimentConfig cfg = tiny_config();
  cfg.noise_sd = 0.0;
  const Dataset data = generate_dataset(cfg, 16, RngStream{6, 0});
  // a deliberately wrong model
  TransformerParams off = data.teacher;
  off.readout *= 0.5;
  const RiskEstimate est =
      estimate_excess_risk(off, data.teacher, cfg, 20000, RngStream{6, 1});
  // independent direct MC of E[(f - f*)^2] on a fresh stream
  double sum = 0.0, sumsq = 0.0;
  const long m = 20000;
  for (long i = 0; i < m; ++i) {
    const Mat X = sample_matrix(UniformBallDist{cfg.budget.B_X}, cfg.arch.T, cfg.arch.d,
                                substream(RngStream{6, 2}, static_cast<std::uint64_t>(i)));
    const double diff = forward(off, X, cfg.arch) - forward(data.teacher, X, cfg.arch);
    sum += diff * diff;
    sumsq += diff * diff * diff * diff;
  }
  const double mean = sum / m;
  const double se = std::sqrt((sumsq / m - mean * mean) / m);
  CHECK(std::abs(est.mean - mean) <= 4.0 * std::sqrt(est.std_error * est.std_error + se * se));
  CHECK(est.mean >= -4.0 * est.std_error);
}

TEST_CASE("effective_kappa per loss") {
  ExperimentConfig cfg = tiny_config();
  CHECK(effective_kappa(cfg, std::nullopt) ==
        doctest::Approx(2.0 * (cfg.budget.B + output_bound(cfg.arch, cfg.budget))));
  CHECK(effective_kappa(cfg, 3.0) > effective_kappa(cfg, std::nullopt));
  cfg.loss = Loss::absolute;
  CHECK(effective_kappa(cfg, std::nullopt) == 1.0);
  cfg.loss = Loss::logistic;
  CHECK(effective_kappa(cfg, std::nullopt) == 1.0);
}

TEST_CASE("config validation rejects bad grids") {
  ExperimentConfig cfg = tiny_config();
  cfg.n_grid = {};
  CHECK_THROWS_AS(cfg.validate(), InvalidParameter);
  cfg = tiny_config();
  cfg.n_grid = {64, 16};
  CHECK_THROWS_AS(cfg.validate(), InvalidParameter);
  cfg = tiny_config();
  cfg.n_test = 100;
  CHECK_THROWS_AS(cfg.validate(), InvalidParameter);
  cfg = tiny_config();
  cfg.bound_families = {BoundFamily::subgaussian};
  CHECK_THROWS_AS(cfg.validate(), InvalidParameter);  // no tail model configured
}

TEST_CASE("run_experiment grid: domination, determinism, worker independence") {
  ExperimentConfig cfg = tiny_config();
  const ExperimentResult r1 = run_experiment(cfg, 1);
  REQUIRE(r1.cells.size() == cfg.n_grid.size() * cfg.seeds.size());
  for (const auto& cell : r1.cells) {
    REQUIRE_FALSE(cell.failed);
    REQUIRE(cell.bounds.size() == cfg.bound_families.size());
    for (const auto& [family, fc] : cell.bounds) {
      CHECK(fc.bound >= cell.empirical - 4.0 * cell.std_error - cell.optimizer_gap);
      CHECK(fc.bound > 0.0);
    }
    CHECK(cell.empirical >= -4.0 * cell.std_error);
  }
  REQUIRE(r1.median_empirical.size() == 2);

  const ExperimentResult r2 = run_experiment(cfg, 1);
  CHECK(to_json(r1).dump() == to_json(r2).dump());
  const ExperimentResult r3 = run_experiment(cfg, 3);
  CHECK(to_json(r1).dump() == to_json(r3).dump());
}

TEST_CASE("run_experiment heavy-tail regime with auto truncation") {
  ExperimentConfig cfg = tiny_config();
  cfg.data_regime = DataRegime::heavytail;
  TailModel tail;
  tail.regime = TailRegime::heavytail;
  tail.beta = 4.0;
  tail.T = cfg.arch.T;
  tail.d = cfg.arch.d;
  cfg.budget.tail = tail;
  cfg.budget.budget_mode = BudgetMode::rank;
  cfg.budget.r_v = 1;
  cfg.budget.r_c = 1;
  cfg.budget.r_QK = 1;
  cfg.n_grid = {32};
  cfg.seeds = {1, 2};
  cfg.bound_families = {BoundFamily::heavytail};
  cfg.truncation = TruncationConfig{};  // auto threshold
  cfg.optimizer.steps = 30;
  const ExperimentResult r = run_experiment(cfg, 1);
  for (const auto& cell : r.cells) {
    REQUIRE_FALSE(cell.failed);
    CHECK(cell.truncation_rate >= 0.0);
    CHECK(cell.truncation_rate < 1.0);
    REQUIRE(cell.bounds.size() == 1);
    CHECK(cell.bounds[0].second.threshold.has_value());
    CHECK(*cell.bounds[0].second.threshold ==
          doctest::Approx(std::pow(32.0, 0.5)));  // n^(1/(beta-2))
    CHECK(cell.bounds[0].second.bound >= cell.empirical - 4.0 * cell.std_error -
                                             cell.optimizer_gap);
  }
}
