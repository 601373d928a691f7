#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "tfb/serialize.hpp"

namespace {

using tfb::Json;

struct CommonOpts {
  std::string config_path;
  std::string out_path;
  std::string format = "table";
  std::optional<std::uint64_t> seed;
  int workers = 1;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool config_required = true) {
  auto* c = cmd->add_option("--config", opts.config_path, "config JSON path");
  if (config_required) c->required();
  cmd->add_option("--out", opts.out_path, "output path");
  cmd->add_option("--format", opts.format, "json | csv | table")
      ->check(CLI::IsMember({"json", "csv", "table"}));
  cmd->add_option("--seed", opts.seed, "seed override");
  cmd->add_option("--workers", opts.workers, "worker threads (never changes results)")
      ->check(CLI::PositiveNumber);
}

// Plain-text table; cells already formatted.
struct TextTable {
  std::vector<std::string> headers;
  std::vector<std::vector<std::string>> rows;
};

std::string fmt6(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string render_table(const TextTable& t) {
  std::vector<std::size_t> width(t.headers.size());
  for (std::size_t c = 0; c < t.headers.size(); ++c) width[c] = t.headers[c].size();
  for (const auto& row : t.rows)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::string out;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      out += row[c];
      if (c + 1 < row.size()) out += std::string(width[c] - row[c].size() + 2, ' ');
    }
    out += "\n";
  };
  emit(t.headers);
  std::string rule;
  for (std::size_t c = 0; c < width.size(); ++c) rule += std::string(width[c], '-') + (c + 1 < width.size() ? "  " : "");
  out += rule + "\n";
  for (const auto& row : t.rows) emit(row);
  return out;
}

std::string render_csv(const TextTable& t) {
  std::string out;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) out += row[c] + (c + 1 < row.size() ? "," : "");
    out += "\n";
  };
  emit(t.headers);
  for (const auto& row : t.rows) emit(row);
  return out;
}

void deliver(const CommonOpts& opts, const Json& json_payload, const TextTable& table) {
  std::string text;
  if (opts.format == "json") text = json_payload.dump(2) + "\n";
  else if (opts.format == "csv") text = render_csv(table);
  else text = render_table(table);
  std::cout << text;
  if (!opts.out_path.empty()) {
    std::ofstream out(opts.out_path);
    if (!out) throw tfb::IoError("cannot open output path: " + opts.out_path);
    out << text;
    if (!out) throw tfb::IoError("write failed: " + opts.out_path);
  }
}

// ---- bound ----------------------------------------------------------------

struct BoundRun {
  tfb::ArchSpec arch;
  tfb::ParamBudget budget;
  std::vector<long> n_grid;
  std::vector<tfb::BoundFamily> families;
  std::optional<double> threshold;  // fixed truncation M, if configured
  tfb::DeltaGridConfig delta;
};

BoundRun bound_from_root(const Json& root) {
  tfb::check_root(root, {"arch", "budget", "experiment"});
  BoundRun run;
  run.arch = tfb::arch_from_json(root.at("arch"));
  run.budget = tfb::budget_from_json(root.at("budget"));
  if (root.contains("tail"))
    run.budget.tail = tfb::tail_from_json(root.at("tail"), &run.arch);
  if (root.contains("delta_grid")) run.delta = tfb::delta_grid_from_json(root.at("delta_grid"));
  const Json& e = root.at("experiment");
  if (!e.contains("n_grid") || !e.contains("bound_families"))
    throw tfb::ConfigError("bound: experiment section needs n_grid and bound_families");
  run.n_grid = e.at("n_grid").get<std::vector<long>>();
  for (const auto& f : e.at("bound_families"))
    run.families.push_back(tfb::bound_family_from_string(f.get<std::string>()));
  if (e.contains("truncation") && e.at("truncation").contains("M") &&
      !e.at("truncation").at("M").is_string())
    run.threshold = e.at("truncation").at("M").get<double>();
  if (run.n_grid.empty() || run.families.empty())
    throw tfb::ConfigError("bound: n_grid and bound_families must be nonempty");
  return run;
}

int cmd_bound(const CommonOpts& opts) {
  const BoundRun run = bound_from_root(tfb::load_json_file(opts.config_path));
  const auto grid = tfb::delta_grid(run.delta.lo, run.delta.hi, run.delta.points);
  Json reports = Json::array();
  TextTable table;
  table.headers = {"family", "n",     "delta",      "penalty", "complexity",
                   "disc",   "trunc", "approx", "total"};
  for (const long n : run.n_grid) {
    for (const auto family : run.families) {
      const tfb::BoundReport rep = tfb::minimize_over_delta(
          [&](double d) {
            return tfb::evaluate_bound_family(family, run.arch, run.budget, n, d, 0.0,
                                              run.threshold);
          },
          grid);
      reports.push_back(tfb::to_json(rep));
      table.rows.push_back({tfb::to_string(family), std::to_string(n), fmt6(rep.delta),
                            fmt6(rep.penalty_constant), fmt6(rep.complexity_term),
                            fmt6(rep.discretization_term), fmt6(rep.truncation_term),
                            fmt6(rep.approximation_term), fmt6(rep.total)});
    }
  }
  deliver(opts, Json{{"reports", reports}}, table);
  return 0;
}

// ---- cover ----------------------------------------------------------------

int cmd_cover(const CommonOpts& opts) {
  const Json root = tfb::load_json_file(opts.config_path);
  tfb::check_root(root, {"arch", "budget"});
  const tfb::ArchSpec arch = tfb::arch_from_json(root.at("arch"));
  const tfb::ParamBudget budget = tfb::budget_from_json(root.at("budget"));
  tfb::DeltaGridConfig dg;
  if (root.contains("delta_grid")) dg = tfb::delta_grid_from_json(root.at("delta_grid"));
  const auto grid = tfb::delta_grid(dg.lo, dg.hi, dg.points);

  const tfb::NormComplexity norm = tfb::norm_complexity_terms(budget, arch);
  tfb::RankCaps caps;
  caps.r_v = budget.r_v.value_or(std::min(arch.d, arch.k));
  caps.r_c = budget.r_c.value_or(std::min(arch.k, arch.d));
  caps.r_QK = budget.r_QK.value_or(arch.d);
  const auto comps = tfb::rank_components(arch, budget, caps);

  Json j;
  j["C1"] = tfb::covering_constant(arch, budget);
  j["gamma"] = norm.gamma;
  j["eta"] = norm.eta;
  j["tau"] = norm.tau;
  Json jcomps = Json::array();
  for (const auto& c : comps)
    jcomps.push_back({{"name", c.name}, {"r", c.rank}, {"C", c.C}, {"beta", c.beta}});
  j["rank_components"] = jcomps;
  Json per_delta = Json::array();
  TextTable table;
  table.headers = {"delta", "log_cover_norm", "rank_objective", "alloc_mismatch"};
  for (const double d : grid) {
    const double gamma_total = norm.total();
    const double log_cover_norm = std::log(gamma_total * gamma_total * gamma_total / (d * d));
    std::vector<double> r, C, beta;
    for (const auto& c : comps) {
      r.push_back(c.rank);
      C.push_back(c.C);
      beta.push_back(c.beta);
    }
    const tfb::AllocationResult alloc = tfb::rank_allocation(r, C, beta, d, budget.B_X);
    per_delta.push_back(
        {{"delta", d}, {"log_cover_norm", log_cover_norm}, {"allocation", tfb::to_json(alloc)}});
    table.rows.push_back({fmt6(d), fmt6(log_cover_norm), fmt6(alloc.objective),
                          alloc.objective_mismatch ? "yes" : "no"});
  }
  j["per_delta"] = per_delta;
  deliver(opts, j, table);
  return 0;
}

// ---- offset ---------------------------------------------------------------

int cmd_offset(const CommonOpts& opts) {
  const Json root = tfb::load_json_file(opts.config_path);
  const tfb::OffsetRunConfig run = tfb::offset_from_root(root);
  const tfb::ArchSpec arch = tfb::arch_from_json(root.at("arch"));
  tfb::ParamBudget budget = tfb::budget_from_json(root.at("budget"));
  if (root.contains("tail")) budget.tail = tfb::tail_from_json(root.at("tail"), &arch);

  const tfb::RngStream stream{opts.seed.value_or(0), 0};
  const tfb::TransformerParams teacher =
      tfb::project_params(tfb::sample_params(arch, tfb::substream(stream, 0)), budget, arch);
  std::vector<tfb::Mat> sample;
  sample.reserve(static_cast<std::size_t>(run.n));
  tfb::MatrixDist dist = tfb::UniformBallDist{budget.B_X};
  if (run.data_regime == tfb::DataRegime::subgaussian)
    dist = tfb::GaussianDist{(budget.tail ? budget.tail->nu : 1.0) /
                             std::sqrt(static_cast<double>(std::max(arch.T, arch.d)))};
  else if (run.data_regime == tfb::DataRegime::heavytail)
    dist = tfb::ParetoDist{budget.tail ? budget.tail->beta : 3.0,
                           budget.tail ? budget.tail->x_min : 1.0};
  for (long i = 0; i < run.n; ++i)
    sample.push_back(tfb::sample_matrix(dist, arch.T, arch.d,
                                        tfb::substream(stream, 1, static_cast<std::uint64_t>(i))));
  const tfb::FunctionClassSample fc =
      tfb::build_class_sample(arch, budget, tfb::Loss::squared, teacher, sample, run.grid_size,
                              tfb::substream(stream, 2), run.noise_sd, run.include_teacher);
  const double beta =
      run.beta.value_or(fc.value_cap > 0.0 ? 1.0 / (2.0 * fc.value_cap) : 1.0);

  Json j;
  j["value_cap"] = fc.value_cap;
  j["beta"] = beta;
  j["class_size"] = fc.class_size();
  j["sample_size"] = fc.sample_size();
  TextTable table;
  table.headers = {"method", "value", "std_error", "n_draws"};
  if (run.method != "mc") {
    const tfb::OffsetEstimate exact = tfb::offset_complexity_exact(fc, beta, opts.workers);
    j["exact"] = tfb::to_json(exact);
    table.rows.push_back({"exact", fmt6(exact.value), "0", std::to_string(exact.n_draws)});
  }
  if (run.method != "exact") {
    const tfb::OffsetEstimate mc =
        tfb::offset_complexity_mc(fc, beta, run.n_draws, tfb::substream(stream, 3), opts.workers);
    j["monte_carlo"] = tfb::to_json(mc);
    table.rows.push_back(
        {"monte_carlo", fmt6(mc.value), fmt6(mc.std_error), std::to_string(mc.n_draws)});
  }
  j["finite_class_bound"] =
      tfb::finite_class_offset_bound(fc.class_size(), fc.sample_size(), beta);
  deliver(opts, j, table);
  return 0;
}

// ---- tails ----------------------------------------------------------------

int cmd_tails(const CommonOpts& opts) {
  const Json root = tfb::load_json_file(opts.config_path);
  tfb::check_root(root, {"tail"});
  std::optional<tfb::ArchSpec> arch;
  if (root.contains("arch")) arch = tfb::arch_from_json(root.at("arch"));
  const tfb::TailModel tail = tfb::tail_from_json(root.at("tail"), arch ? &*arch : nullptr);
  double kappa = 1.0;
  if (root.contains("budget")) kappa = tfb::budget_from_json(root.at("budget")).kappa;
  std::vector<long> n_list = {64, 256, 1024};
  if (root.contains("experiment") && root.at("experiment").contains("n_grid"))
    n_list = root.at("experiment").at("n_grid").get<std::vector<long>>();

  constexpr long kDraws = 20000;
  const tfb::RngStream stream{opts.seed.value_or(0), 0};
  tfb::MatrixDist dist =
      tail.regime == tfb::TailRegime::subgaussian
          ? tfb::MatrixDist(tfb::GaussianDist{tail.nu / std::sqrt(static_cast<double>(
                                                  std::max(tail.T, tail.d)))})
          : tfb::MatrixDist(tfb::ParetoDist{tail.beta, tail.x_min});

  Json rows = Json::array();
  TextTable table;
  table.headers = {"n", "threshold", "tail_term", "empirical_trunc_rate", "rate_bound"};
  for (const long n : n_list) {
    const double M = tfb::optimal_threshold(tail, std::max<long>(n, 2));
    const double term = tail.regime == tfb::TailRegime::subgaussian
                            ? tfb::subgaussian_tail_term(kappa, tail, M)
                            : tfb::heavy_tail_term(tail, kappa, M);
    long truncated = 0;
    for (long i = 0; i < kDraws; ++i) {
      const tfb::Mat X = tfb::sample_matrix(
          dist, tail.T, tail.d,
          tfb::substream(stream, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(i)));
      if (X.norm() > M) ++truncated;
    }
    const double rate = static_cast<double>(truncated) / static_cast<double>(kDraws);
    const double rate_bound =
        tail.regime == tfb::TailRegime::subgaussian
            ? static_cast<double>(tail.T + tail.d) * std::exp(-M * M / (2.0 * tail.nu * tail.nu))
            : tail.C * std::pow(static_cast<double>(tail.T * tail.d), 1.0 + tail.beta / 2.0) *
                  std::pow(M, -tail.beta);
    rows.push_back({{"n", n},
                    {"threshold", M},
                    {"tail_term", term},
                    {"empirical_trunc_rate", rate},
                    {"rate_bound", rate_bound}});
    table.rows.push_back({std::to_string(n), fmt6(M), fmt6(term), fmt6(rate), fmt6(rate_bound)});
  }
  Json j;
  j["regime"] = tfb::to_string(tail.regime);
  j["kappa"] = kappa;
  j["rows"] = rows;
  deliver(opts, j, table);
  return 0;
}

// ---- erm / report ----------------------------------------------------------

int cmd_erm(const CommonOpts& opts) {
  tfb::ExperimentConfig cfg = tfb::experiment_from_root(tfb::load_json_file(opts.config_path));
  if (opts.seed) cfg.seed_base = *opts.seed;
  const tfb::ExperimentResult result = tfb::run_experiment(cfg, opts.workers);
  std::size_t failed = 0;
  for (const auto& c : result.cells) failed += c.failed ? 1u : 0u;
  if (!opts.out_path.empty()) tfb::write_result(result, opts.out_path);

  TextTable table;
  table.headers = {"n", "seed", "empirical", "se", "best_family", "best_bound", "gap"};
  for (const auto& c : result.cells) {
    if (c.failed) {
      table.rows.push_back({std::to_string(c.n), std::to_string(c.seed), "FAILED", "-", "-", "-",
                            "-"});
      continue;
    }
    double best = std::numeric_limits<double>::infinity();
    std::string best_name = "-";
    for (const auto& [family, fc] : c.bounds)
      if (fc.bound < best) {
        best = fc.bound;
        best_name = tfb::to_string(family);
      }
    table.rows.push_back({std::to_string(c.n), std::to_string(c.seed), fmt6(c.empirical),
                          fmt6(c.std_error), best_name,
                          std::isfinite(best) ? fmt6(best) : "-", fmt6(c.optimizer_gap)});
  }
  if (opts.format == "csv") {
    std::cout << tfb::result_csv(result);
  } else if (opts.format == "json") {
    std::cout << tfb::to_json(result).dump(2) << "\n";
  } else {
    std::cout << render_table(table);
    for (const auto& [n, med] : result.median_empirical)
      std::cout << "median(n=" << n << ") = " << fmt6(med) << "\n";
  }
  if (failed == result.cells.size() && !result.cells.empty()) {
    std::cerr << "all cells failed\n";
    return 3;
  }
  return 0;
}

int cmd_report(const CommonOpts& opts) {
  const tfb::ExperimentResult result = tfb::read_result(opts.config_path);
  TextTable table;
  table.headers = {"n",     "seed",  "family", "empirical", "se",
                   "bound", "ratio", "trunc_rate", "opt_gap"};
  for (const auto& c : result.cells) {
    for (const auto& [family, fc] : c.bounds)
      table.rows.push_back({std::to_string(c.n), std::to_string(c.seed), tfb::to_string(family),
                            fmt6(c.empirical), fmt6(c.std_error), fmt6(fc.bound), fmt6(fc.ratio),
                            fmt6(c.truncation_rate), fmt6(c.optimizer_gap)});
  }
  deliver(opts, tfb::to_json(result), table);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tfb: excess-risk bound laboratory for small attention models"};
  app.require_subcommand(1);
  CommonOpts bound_opts, cover_opts, offset_opts, tails_opts, erm_opts, report_opts;
  auto* bound = app.add_subcommand("bound", "evaluate excess-risk bounds from a config");
  add_common(bound, bound_opts);
  auto* cover = app.add_subcommand("cover", "print covering numbers and scale allocations");
  add_common(cover, cover_opts);
  auto* offset = app.add_subcommand("offset", "exact / Monte Carlo offset complexity");
  add_common(offset, offset_opts);
  auto* tails = app.add_subcommand("tails", "tail terms, thresholds and truncation rates");
  add_common(tails, tails_opts);
  auto* erm = app.add_subcommand("erm", "run an ERM experiment grid");
  add_common(erm, erm_opts);
  auto* report = app.add_subcommand("report", "render a stored result JSON (--config <result>)");
  add_common(report, report_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);  // prints usage to stderr
    return 1;
  }

  try {
    if (bound->parsed()) return cmd_bound(bound_opts);
    if (cover->parsed()) return cmd_cover(cover_opts);
    if (offset->parsed()) return cmd_offset(offset_opts);
    if (tails->parsed()) return cmd_tails(tails_opts);
    if (erm->parsed()) return cmd_erm(erm_opts);
    if (report->parsed()) return cmd_report(report_opts);
  } catch (const tfb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const tfb::InvalidParameter& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
