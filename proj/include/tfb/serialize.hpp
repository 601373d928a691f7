#pragma once

#include <json.hpp>

#include <string>

#include "tfb/bounds.hpp"
#include "tfb/erm_lab.hpp"
#include "tfb/offset_mc.hpp"

namespace tfb {

/// Config-file problems: missing files, parse failures, unknown keys,
/// values out of range. CLI maps these to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Json = nlohmann::json;

Json load_json_file(const std::string& path);

// enum <-> string
std::string to_string(Activation a);
std::string to_string(BudgetMode m);
std::string to_string(DataRegime r);
std::string to_string(Loss l);
std::string to_string(TailRegime r);
std::string to_string(OffsetMethod m);
ArchKind arch_kind_from_string(const std::string& s);
Activation activation_from_string(const std::string& s);
BudgetMode budget_mode_from_string(const std::string& s);
DataRegime data_regime_from_string(const std::string& s);
Loss loss_from_string(const std::string& s);
BoundFamily bound_family_from_string(const std::string& s);
TailRegime tail_regime_from_string(const std::string& s);

// section parsers (strict: unknown keys are errors)
ArchSpec arch_from_json(const Json& j);
TailModel tail_from_json(const Json& j, const ArchSpec* shape_default);
ParamBudget budget_from_json(const Json& j);
DeltaGridConfig delta_grid_from_json(const Json& j);

/// Validate the top-level schema (keys: arch, budget, tail, experiment,
/// offset, delta_grid) and require the sections the caller names.
void check_root(const Json& root, std::initializer_list<const char*> required);

/// Assemble an ExperimentConfig from a full config document.
ExperimentConfig experiment_from_root(const Json& root);

/// Settings for the `offset` subcommand.
struct OffsetRunConfig {
  long grid_size = 8;
  long n = 10;
  long n_draws = 100000;
  std::optional<double> beta;  // unset -> 1 / (2 value_cap)
  std::string method = "both";  // exact | mc | both
  double noise_sd = 0.0;
  DataRegime data_regime = DataRegime::bounded;
  bool include_teacher = false;
};
OffsetRunConfig offset_from_root(const Json& root);

// writers
Json to_json(const ArchSpec& spec);
Json to_json(const ParamBudget& budget);
Json to_json(const TailModel& tail);
Json to_json(const TransformerParams& params);
TransformerParams params_from_json(const Json& j, const ArchSpec& spec);
Json to_json(const BoundReport& report);
Json to_json(const AllocationResult& alloc);
Json to_json(const OffsetEstimate& est);
Json to_json(const ExperimentConfig& config);
Json to_json(const ExperimentResult& result);

// result round-trip
ExperimentConfig experiment_config_from_json(const Json& j);
ExperimentResult result_from_json(const Json& j);
ExperimentResult read_result(const std::string& path);

std::string result_csv(const ExperimentResult& result);

}  // namespace tfb
