#include "tfb/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <set>

namespace tfb {

Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("invalid JSON in " + path + ": " + e.what());
  }
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu:
      return "relu";
    case Activation::tanh:
      return "tanh";
    case Activation::identity:
      return "identity";
  }
  return "?";
}

std::string to_string(BudgetMode m) {
  switch (m) {
    case BudgetMode::spectral:
      return "spectral";
    case BudgetMode::l11:
      return "l11";
    case BudgetMode::rank:
      return "rank";
  }
  return "?";
}

std::string to_string(DataRegime r) {
  switch (r) {
    case DataRegime::bounded:
      return "bounded";
    case DataRegime::subgaussian:
      return "subgaussian";
    case DataRegime::heavytail:
      return "heavytail";
  }
  return "?";
}

std::string to_string(Loss l) {
  switch (l) {
    case Loss::squared:
      return "squared";
    case Loss::absolute:
      return "absolute";
    case Loss::logistic:
      return "logistic";
  }
  return "?";
}

std::string to_string(TailRegime r) {
  return r == TailRegime::subgaussian ? "subgaussian" : "heavytail";
}

std::string to_string(OffsetMethod m) {
  return m == OffsetMethod::exact ? "exact" : "monte_carlo";
}

namespace {

[[noreturn]] void bad_value(const std::string& where, const std::string& got) {
  throw ConfigError("unknown value for " + where + ": '" + got + "'");
}

}  // namespace

ArchKind arch_kind_from_string(const std::string& s) {
  if (s == "SH") return ArchKind::SH;
  if (s == "MH") return ArchKind::MH;
  if (s == "ML") return ArchKind::ML;
  bad_value("arch.kind", s);
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "identity") return Activation::identity;
  bad_value("arch.activation", s);
}

BudgetMode budget_mode_from_string(const std::string& s) {
  if (s == "spectral") return BudgetMode::spectral;
  if (s == "l11") return BudgetMode::l11;
  if (s == "rank") return BudgetMode::rank;
  bad_value("budget.budget_mode", s);
}

DataRegime data_regime_from_string(const std::string& s) {
  if (s == "bounded") return DataRegime::bounded;
  if (s == "subgaussian") return DataRegime::subgaussian;
  if (s == "heavytail") return DataRegime::heavytail;
  bad_value("experiment.data_regime", s);
}

Loss loss_from_string(const std::string& s) {
  if (s == "squared") return Loss::squared;
  if (s == "absolute") return Loss::absolute;
  if (s == "logistic") return Loss::logistic;
  bad_value("loss", s);
}

BoundFamily bound_family_from_string(const std::string& s) {
  if (s == "offset-generic") return BoundFamily::offset_generic;
  if (s == "norm") return BoundFamily::norm;
  if (s == "rank") return BoundFamily::rank;
  if (s == "subgaussian") return BoundFamily::subgaussian;
  if (s == "heavytail") return BoundFamily::heavytail;
  bad_value("bound_families", s);
}

TailRegime tail_regime_from_string(const std::string& s) {
  if (s == "subgaussian") return TailRegime::subgaussian;
  if (s == "heavytail") return TailRegime::heavytail;
  bad_value("tail.regime", s);
}

namespace {

void check_keys(const Json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items())
    if (!ok.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

template <typename T>
T require(const Json& obj, const std::string& where, const char* key) {
  if (!obj.contains(key)) throw ConfigError(where + " is missing required key '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError("bad value for " + where + "." + key + ": " + e.what());
  }
}

template <typename T>
T optional_or(const Json& obj, const std::string& where, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError("bad value for " + where + "." + key + ": " + e.what());
  }
}

}  // namespace

ArchSpec arch_from_json(const Json& j) {
  check_keys(j, "arch", {"kind", "T", "d", "k", "H", "L", "activation", "cls_index"});
  ArchSpec spec;
  spec.kind = arch_kind_from_string(require<std::string>(j, "arch", "kind"));
  spec.T = require<Index>(j, "arch", "T");
  spec.d = require<Index>(j, "arch", "d");
  spec.k = optional_or<Index>(j, "arch", "k", spec.d);
  spec.H = optional_or<int>(j, "arch", "H", 1);
  spec.L = optional_or<int>(j, "arch", "L", 1);
  spec.activation =
      activation_from_string(optional_or<std::string>(j, "arch", "activation", "relu"));
  spec.cls_index = optional_or<Index>(j, "arch", "cls_index", 0);
  spec.validate();
  return spec;
}

TailModel tail_from_json(const Json& j, const ArchSpec* shape_default) {
  check_keys(j, "tail",
             {"regime", "nu", "beta", "C", "x_min", "T", "d", "B_psi", "alpha", "C_trunc"});
  TailModel tail;
  tail.regime = tail_regime_from_string(require<std::string>(j, "tail", "regime"));
  tail.nu = optional_or<double>(j, "tail", "nu", 1.0);
  tail.beta = optional_or<double>(j, "tail", "beta", 3.0);
  tail.C = optional_or<double>(j, "tail", "C", 1.0);
  tail.x_min = optional_or<double>(j, "tail", "x_min", 1.0);
  tail.T = optional_or<Index>(j, "tail", "T", shape_default ? shape_default->T : 1);
  tail.d = optional_or<Index>(j, "tail", "d", shape_default ? shape_default->d : 1);
  tail.B_psi = optional_or<double>(j, "tail", "B_psi", 1.0);
  tail.alpha = optional_or<double>(j, "tail", "alpha", 1.0);
  tail.C_trunc = optional_or<double>(j, "tail", "C_trunc", 2.0);
  tail.validate();
  return tail;
}

ParamBudget budget_from_json(const Json& j) {
  check_keys(j, "budget",
             {"B_v", "B_c", "B_QK", "B_w", "B_x", "B_X", "B", "kappa", "L_sigma", "r_v", "r_c",
              "r_QK", "budget_mode", "C1"});
  ParamBudget b;
  b.B_v = require<double>(j, "budget", "B_v");
  b.B_c = require<double>(j, "budget", "B_c");
  b.B_QK = require<double>(j, "budget", "B_QK");
  b.B_w = require<double>(j, "budget", "B_w");
  b.B_x = optional_or<double>(j, "budget", "B_x", 1.0);
  b.B_X = optional_or<double>(j, "budget", "B_X", 1.0);
  b.B = optional_or<double>(j, "budget", "B", 1.0);
  b.kappa = optional_or<double>(j, "budget", "kappa", 1.0);
  b.L_sigma = optional_or<double>(j, "budget", "L_sigma", 1.0);
  if (j.contains("r_v")) b.r_v = require<Index>(j, "budget", "r_v");
  if (j.contains("r_c")) b.r_c = require<Index>(j, "budget", "r_c");
  if (j.contains("r_QK")) b.r_QK = require<Index>(j, "budget", "r_QK");
  b.budget_mode =
      budget_mode_from_string(optional_or<std::string>(j, "budget", "budget_mode", "spectral"));
  if (j.contains("C1")) b.C1 = require<double>(j, "budget", "C1");
  b.validate();
  return b;
}

DeltaGridConfig delta_grid_from_json(const Json& j) {
  check_keys(j, "delta_grid", {"min", "max", "points"});
  DeltaGridConfig g;
  g.lo = optional_or<double>(j, "delta_grid", "min", 1e-6);
  g.hi = optional_or<double>(j, "delta_grid", "max", 1.0);
  g.points = optional_or<int>(j, "delta_grid", "points", 32);
  if (!(g.lo > 0.0) || g.hi < g.lo || g.points < 1)
    throw ConfigError("delta_grid: need 0 < min <= max and points >= 1");
  return g;
}

void check_root(const Json& root, std::initializer_list<const char*> required) {
  check_keys(root, "config", {"arch", "budget", "tail", "experiment", "offset", "delta_grid"});
  for (const char* key : required)
    if (!root.contains(key))
      throw ConfigError(std::string("config is missing required section '") + key + "'");
}

ExperimentConfig experiment_from_root(const Json& root) {
  check_root(root, {"arch", "budget", "experiment"});
  ExperimentConfig cfg;
  cfg.arch = arch_from_json(root.at("arch"));
  cfg.budget = budget_from_json(root.at("budget"));
  if (root.contains("tail")) cfg.budget.tail = tail_from_json(root.at("tail"), &cfg.arch);
  if (root.contains("delta_grid")) cfg.delta = delta_grid_from_json(root.at("delta_grid"));
  const Json& e = root.at("experiment");
  check_keys(e, "experiment",
             {"data_regime", "loss", "noise_sd", "n_grid", "n_test", "seeds", "optimizer",
              "bound_families", "truncation", "seed_base"});
  cfg.data_regime =
      data_regime_from_string(optional_or<std::string>(e, "experiment", "data_regime", "bounded"));
  cfg.loss = loss_from_string(optional_or<std::string>(e, "experiment", "loss", "squared"));
  cfg.noise_sd = optional_or<double>(e, "experiment", "noise_sd", 0.1);
  cfg.n_grid = require<std::vector<long>>(e, "experiment", "n_grid");
  cfg.n_test = optional_or<long>(e, "experiment", "n_test", 10000);
  cfg.seeds = require<std::vector<std::uint64_t>>(e, "experiment", "seeds");
  if (e.contains("optimizer")) {
    const Json& o = e.at("optimizer");
    check_keys(o, "experiment.optimizer", {"step_size", "steps", "restarts"});
    cfg.optimizer.step_size = optional_or<double>(o, "optimizer", "step_size", 0.1);
    cfg.optimizer.steps = optional_or<int>(o, "optimizer", "steps", 200);
    cfg.optimizer.restarts = optional_or<int>(o, "optimizer", "restarts", 2);
  }
  for (const std::string& name :
       require<std::vector<std::string>>(e, "experiment", "bound_families"))
    cfg.bound_families.push_back(bound_family_from_string(name));
  if (e.contains("truncation")) {
    const Json& t = e.at("truncation");
    check_keys(t, "experiment.truncation", {"M"});
    TruncationConfig trunc;
    if (t.contains("M") && !t.at("M").is_string()) trunc.M = require<double>(t, "truncation", "M");
    else if (t.contains("M") && t.at("M").get<std::string>() != "auto")
      throw ConfigError("truncation.M must be a number or \"auto\"");
    cfg.truncation = trunc;
  }
  cfg.seed_base = optional_or<std::uint64_t>(e, "experiment", "seed_base", 0);
  cfg.validate();
  return cfg;
}

OffsetRunConfig offset_from_root(const Json& root) {
  check_root(root, {"arch", "budget", "offset"});
  const Json& o = root.at("offset");
  check_keys(o, "offset",
             {"grid_size", "n", "n_draws", "beta", "method", "noise_sd", "data_regime",
              "include_teacher"});
  OffsetRunConfig cfg;
  cfg.grid_size = require<long>(o, "offset", "grid_size");
  cfg.n = require<long>(o, "offset", "n");
  cfg.n_draws = optional_or<long>(o, "offset", "n_draws", 100000);
  if (o.contains("beta") && !o.at("beta").is_string())
    cfg.beta = require<double>(o, "offset", "beta");
  else if (o.contains("beta") && o.at("beta").get<std::string>() != "auto")
    throw ConfigError("offset.beta must be a number or \"auto\"");
  cfg.method = optional_or<std::string>(o, "offset", "method", "both");
  if (cfg.method != "exact" && cfg.method != "mc" && cfg.method != "both")
    throw ConfigError("offset.method must be exact | mc | both");
  cfg.noise_sd = optional_or<double>(o, "offset", "noise_sd", 0.0);
  cfg.data_regime =
      data_regime_from_string(optional_or<std::string>(o, "offset", "data_regime", "bounded"));
  cfg.include_teacher = optional_or<bool>(o, "offset", "include_teacher", false);
  if (cfg.grid_size < 1 || cfg.n < 1) throw ConfigError("offset: grid_size and n must be >= 1");
  return cfg;
}

Json to_json(const ArchSpec& spec) {
  Json j;
  j["kind"] = to_string(spec.kind);
  j["T"] = spec.T;
  j["d"] = spec.d;
  j["k"] = spec.k;
  j["H"] = spec.H;
  j["L"] = spec.L;
  j["activation"] = to_string(spec.activation);
  j["cls_index"] = spec.cls_index;
  return j;
}

Json to_json(const ParamBudget& b) {
  Json j;
  j["B_v"] = b.B_v;
  j["B_c"] = b.B_c;
  j["B_QK"] = b.B_QK;
  j["B_w"] = b.B_w;
  j["B_x"] = b.B_x;
  j["B_X"] = b.B_X;
  j["B"] = b.B;
  j["kappa"] = b.kappa;
  j["L_sigma"] = b.L_sigma;
  if (b.r_v) j["r_v"] = *b.r_v;
  if (b.r_c) j["r_c"] = *b.r_c;
  if (b.r_QK) j["r_QK"] = *b.r_QK;
  j["budget_mode"] = to_string(b.budget_mode);
  if (b.C1) j["C1"] = *b.C1;
  if (b.tail) j["tail"] = to_json(*b.tail);
  return j;
}

Json to_json(const TailModel& tail) {
  Json j;
  j["regime"] = to_string(tail.regime);
  if (tail.regime == TailRegime::subgaussian) {
    j["nu"] = tail.nu;
  } else {
    j["beta"] = tail.beta;
    j["C"] = tail.C;
    j["x_min"] = tail.x_min;
  }
  j["T"] = tail.T;
  j["d"] = tail.d;
  j["B_psi"] = tail.B_psi;
  j["alpha"] = tail.alpha;
  j["C_trunc"] = tail.C_trunc;
  return j;
}

namespace {

Json matrix_to_json(const Mat& W) {
  Json rows = Json::array();
  for (Index i = 0; i < W.rows(); ++i) {
    Json row = Json::array();
    for (Index j = 0; j < W.cols(); ++j) row.push_back(W(i, j));
    rows.push_back(row);
  }
  return rows;
}

Mat matrix_from_json(const Json& j) {
  if (!j.is_array() || j.empty()) throw ConfigError("weight matrix must be a nonempty array");
  const Index rows = static_cast<Index>(j.size());
  const Index cols = static_cast<Index>(j.at(0).size());
  Mat W(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    if (static_cast<Index>(j.at(static_cast<std::size_t>(i)).size()) != cols)
      throw ConfigError("ragged weight matrix");
    for (Index c = 0; c < cols; ++c)
      W(i, c) = j.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(c)).get<double>();
  }
  return W;
}

}  // namespace

Json to_json(const TransformerParams& params) {
  Json layers = Json::array();
  for (const auto& layer : params.layers) {
    Json heads = Json::array();
    for (const auto& h : layer)
      heads.push_back({{"query_key", matrix_to_json(h.query_key)},
                       {"value", matrix_to_json(h.value)},
                       {"out_proj", matrix_to_json(h.out_proj)}});
    layers.push_back(heads);
  }
  Json readout = Json::array();
  for (Index i = 0; i < params.readout.size(); ++i) readout.push_back(params.readout(i));
  return Json{{"layers", layers}, {"readout", readout}};
}

TransformerParams params_from_json(const Json& j, const ArchSpec& spec) {
  check_keys(j, "params", {"layers", "readout"});
  TransformerParams p;
  for (const auto& layer : j.at("layers")) {
    std::vector<HeadWeights> heads;
    for (const auto& h : layer) {
      check_keys(h, "params.layers[][]", {"query_key", "value", "out_proj"});
      heads.push_back({matrix_from_json(h.at("query_key")), matrix_from_json(h.at("value")),
                       matrix_from_json(h.at("out_proj"))});
    }
    p.layers.push_back(std::move(heads));
  }
  const auto& r = j.at("readout");
  p.readout.resize(static_cast<Index>(r.size()));
  for (Index i = 0; i < p.readout.size(); ++i)
    p.readout(i) = r.at(static_cast<std::size_t>(i)).get<double>();
  validate_shapes(p, spec);
  return p;
}

Json to_json(const BoundReport& r) {
  Json j;
  j["family"] = to_string(r.family);
  j["kind"] = to_string(r.kind);
  j["n"] = r.n;
  j["delta"] = r.delta;
  j["penalty_constant"] = r.penalty_constant;
  j["complexity_term"] = r.complexity_term;
  j["discretization_term"] = r.discretization_term;
  j["truncation_term"] = r.truncation_term;
  j["approximation_term"] = r.approximation_term;
  j["total"] = r.total;
  if (r.threshold) j["threshold"] = *r.threshold;
  j["arch"] = to_json(r.arch_echo);
  j["budget"] = to_json(r.budget_echo);
  return j;
}

Json to_json(const AllocationResult& a) {
  Json j;
  j["epsilons"] = a.epsilons;
  j["multiplier"] = a.multiplier;
  j["objective"] = a.objective;
  j["b"] = a.b;
  j["objective_at_point"] = a.objective_at_point;
  j["objective_mismatch"] = a.objective_mismatch;
  return j;
}

Json to_json(const OffsetEstimate& est) {
  Json j;
  j["value"] = est.value;
  j["std_error"] = est.std_error;
  j["method"] = to_string(est.method);
  j["n_draws"] = est.n_draws;
  j["beta"] = est.beta;
  return j;
}

Json to_json(const ExperimentConfig& cfg) {
  Json j;
  j["arch"] = to_json(cfg.arch);
  j["budget"] = to_json(cfg.budget);
  j["data_regime"] = to_string(cfg.data_regime);
  j["loss"] = to_string(cfg.loss);
  j["noise_sd"] = cfg.noise_sd;
  j["n_grid"] = cfg.n_grid;
  j["n_test"] = cfg.n_test;
  j["seeds"] = cfg.seeds;
  j["optimizer"] = {{"step_size", cfg.optimizer.step_size},
                    {"steps", cfg.optimizer.steps},
                    {"restarts", cfg.optimizer.restarts}};
  Json fams = Json::array();
  for (const auto f : cfg.bound_families) fams.push_back(to_string(f));
  j["bound_families"] = fams;
  if (cfg.truncation) {
    if (cfg.truncation->M) j["truncation"] = {{"M", *cfg.truncation->M}};
    else j["truncation"] = {{"M", "auto"}};
  }
  j["delta_grid"] = {{"min", cfg.delta.lo}, {"max", cfg.delta.hi}, {"points", cfg.delta.points}};
  j["seed_base"] = cfg.seed_base;
  return j;
}

Json to_json(const ExperimentResult& result) {
  Json j;
  j["config"] = to_json(result.config);
  Json cells = Json::array();
  for (const auto& c : result.cells) {
    Json jc;
    jc["n"] = c.n;
    jc["seed"] = c.seed;
    jc["empirical"] = c.empirical;
    jc["std_error"] = c.std_error;
    Json bounds = Json::array();
    for (const auto& [family, fc] : c.bounds) {
      Json jb;
      jb["family"] = to_string(family);
      jb["bound"] = fc.bound;
      jb["ratio"] = fc.ratio;
      jb["delta"] = fc.delta;
      if (fc.threshold) jb["threshold"] = *fc.threshold;
      bounds.push_back(jb);
    }
    jc["bounds"] = bounds;
    jc["fitted_risk"] = c.fitted_risk;
    jc["optimizer_gap"] = c.optimizer_gap;
    jc["truncation_rate"] = c.truncation_rate;
    jc["kappa_used"] = c.kappa_used;
    jc["failed"] = c.failed;
    if (c.failed) jc["failure"] = c.failure;
    cells.push_back(jc);
  }
  j["cells"] = cells;
  Json medians = Json::array();
  for (const auto& [n, m] : result.median_empirical) medians.push_back({{"n", n}, {"median", m}});
  j["median_empirical"] = medians;
  j["median_inversions"] = result.median_inversions;
  return j;
}

ExperimentConfig experiment_config_from_json(const Json& j) {
  ExperimentConfig cfg;
  cfg.arch = arch_from_json(j.at("arch"));
  Json budget = j.at("budget");
  Json tail;
  const bool has_tail = budget.contains("tail");
  if (has_tail) {
    tail = budget.at("tail");
    budget.erase("tail");
  }
  cfg.budget = budget_from_json(budget);
  if (has_tail) cfg.budget.tail = tail_from_json(tail, &cfg.arch);
  cfg.data_regime = data_regime_from_string(j.at("data_regime").get<std::string>());
  cfg.loss = loss_from_string(j.at("loss").get<std::string>());
  cfg.noise_sd = j.at("noise_sd").get<double>();
  cfg.n_grid = j.at("n_grid").get<std::vector<long>>();
  cfg.n_test = j.at("n_test").get<long>();
  cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  cfg.optimizer.step_size = j.at("optimizer").at("step_size").get<double>();
  cfg.optimizer.steps = j.at("optimizer").at("steps").get<int>();
  cfg.optimizer.restarts = j.at("optimizer").at("restarts").get<int>();
  for (const auto& f : j.at("bound_families"))
    cfg.bound_families.push_back(bound_family_from_string(f.get<std::string>()));
  if (j.contains("truncation")) {
    TruncationConfig trunc;
    if (!j.at("truncation").at("M").is_string())
      trunc.M = j.at("truncation").at("M").get<double>();
    cfg.truncation = trunc;
  }
  cfg.delta.lo = j.at("delta_grid").at("min").get<double>();
  cfg.delta.hi = j.at("delta_grid").at("max").get<double>();
  cfg.delta.points = j.at("delta_grid").at("points").get<int>();
  cfg.seed_base = j.at("seed_base").get<std::uint64_t>();
  return cfg;
}

ExperimentResult result_from_json(const Json& j) {
  ExperimentResult result;
  result.config = experiment_config_from_json(j.at("config"));
  for (const auto& jc : j.at("cells")) {
    CellResult c;
    c.n = jc.at("n").get<long>();
    c.seed = jc.at("seed").get<std::uint64_t>();
    c.empirical = jc.at("empirical").get<double>();
    c.std_error = jc.at("std_error").get<double>();
    for (const auto& jb : jc.at("bounds")) {
      FamilyCell fc;
      fc.bound = jb.at("bound").get<double>();
      fc.ratio = jb.at("ratio").get<double>();
      fc.delta = jb.at("delta").get<double>();
      if (jb.contains("threshold")) fc.threshold = jb.at("threshold").get<double>();
      c.bounds.emplace_back(bound_family_from_string(jb.at("family").get<std::string>()), fc);
    }
    c.fitted_risk = jc.at("fitted_risk").get<double>();
    c.optimizer_gap = jc.at("optimizer_gap").get<double>();
    c.truncation_rate = jc.at("truncation_rate").get<double>();
    c.kappa_used = jc.at("kappa_used").get<double>();
    c.failed = jc.at("failed").get<bool>();
    if (jc.contains("failure")) c.failure = jc.at("failure").get<std::string>();
    result.cells.push_back(std::move(c));
  }
  for (const auto& jm : j.at("median_empirical"))
    result.median_empirical.emplace_back(jm.at("n").get<long>(), jm.at("median").get<double>());
  result.median_inversions = j.at("median_inversions").get<int>();
  return result;
}

ExperimentResult read_result(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_result: cannot open " + path);
  try {
    return result_from_json(Json::parse(in));
  } catch (const Json::exception& e) {
    throw IoError("read_result: malformed result file " + path + ": " + e.what());
  }
}

namespace {

std::string full_precision(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string result_csv(const ExperimentResult& result) {
  std::string out = "n,seed,family,empirical,se,bound,ratio,truncation_rate,optimizer_gap\n";
  for (const auto& c : result.cells) {
    for (const auto& [family, fc] : c.bounds) {
      out += std::to_string(c.n) + "," + std::to_string(c.seed) + "," + to_string(family) + "," +
             full_precision(c.empirical) + "," + full_precision(c.std_error) + "," +
             full_precision(fc.bound) + "," + full_precision(fc.ratio) + "," +
             full_precision(c.truncation_rate) + "," + full_precision(c.optimizer_gap) + "\n";
    }
  }
  return out;
}

void write_result(const ExperimentResult& result, const std::string& path_stem) {
  std::string stem = path_stem;
  if (stem.size() > 5 && stem.substr(stem.size() - 5) == ".json")
    stem = stem.substr(0, stem.size() - 5);
  {
    std::ofstream out(stem + ".json");
    if (!out) throw IoError("write_result: cannot open " + stem + ".json");
    out << to_json(result).dump(2) << "\n";
    if (!out) throw IoError("write_result: write failed for " + stem + ".json");
  }
  {
    std::ofstream out(stem + ".csv");
    if (!out) throw IoError("write_result: cannot open " + stem + ".csv");
    out << result_csv(result);
    if (!out) throw IoError("write_result: write failed for " + stem + ".csv");
  }
}

}  // namespace tfb
