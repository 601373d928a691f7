#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tfb/matrix_kit.hpp"
#include "tfb/tail_model.hpp"
#include "tfb/types.hpp"

namespace tfb {

enum class ArchKind { SH, MH, ML };
enum class Activation { relu, tanh, identity };

/// Architecture descriptor. The scalar readout is taken at row cls_index.
struct ArchSpec {
  ArchKind kind = ArchKind::SH;
  Index T = 1;  // sequence length
  Index d = 1;  // embedding width
  Index k = 1;  // value width
  int H = 1;    // heads (MH; 1 otherwise)
  int L = 1;    // layers (ML; 1 otherwise)
  Activation activation = Activation::relu;
  Index cls_index = 0;

  int layer_count() const { return kind == ArchKind::ML ? L : 1; }
  int head_count() const { return kind == ArchKind::MH ? H : 1; }
  void validate() const;
};

enum class BudgetMode { spectral, l11, rank };

/// Every constant the bound evaluations consume.
struct ParamBudget {
  double B_v = 1.0;
  double B_c = 1.0;
  double B_QK = 1.0;
  double B_w = 1.0;
  double B_x = 1.0;  // [CLS]-token l2 cap
  double B_X = 1.0;  // input spectral cap
  double B = 1.0;    // target magnitude cap
  double kappa = 1.0;
  double L_sigma = 1.0;
  std::optional<Index> r_v, r_c, r_QK;  // rank caps (rank mode)
  BudgetMode budget_mode = BudgetMode::spectral;
  std::optional<double> C1;  // covering-constant override; default log(2dk+1)
  std::optional<TailModel> tail;

  void validate() const;
};

/// One attention head: scores use query_key (d x d), values flow through
/// value (d x k), the head output is mapped back by out_proj (k x d).
struct HeadWeights {
  Mat query_key;
  Mat value;
  Mat out_proj;
};

struct TransformerParams {
  std::vector<std::vector<HeadWeights>> layers;  // [layer][head]
  Vec readout;                                   // length d
};

double activation_lipschitz(Activation act);
Mat apply_activation(Activation act, const Mat& Z);

void validate_shapes(const TransformerParams& params, const ArchSpec& spec);

/// sigma(softmax(X Wqk X^T) X Wv) Wc, the T x d output of one head.
Mat head_output(const Mat& X, const HeadWeights& head, Activation act);

double forward_single_head(const TransformerParams& params, const Mat& X, const ArchSpec& spec);
double forward_multi_head(const TransformerParams& params, const Mat& X, const ArchSpec& spec);
/// Multi-layer pass; requires k == d. If trace is non-null it receives every
/// intermediate X^(l+1) after the outer row projection.
double forward_multi_layer(const TransformerParams& params, const Mat& X, const ArchSpec& spec,
                           std::vector<Mat>* trace = nullptr);
/// Dispatch on spec.kind.
double forward(const TransformerParams& params, const Mat& X, const ArchSpec& spec);

/// Enforce the budget by scaling (spectral / l11 modes) or rank truncation
/// followed by spectral scaling (rank mode). The readout is always scaled
/// onto the l2 ball of radius B_w. Output passes check_budget.
TransformerParams project_params(const TransformerParams& params, const ParamBudget& budget,
                                 const ArchSpec& spec);

struct ConstraintCheck {
  std::string name;
  double measured = 0.0;
  double cap = 0.0;
  bool pass = false;
};

struct BudgetAudit {
  std::vector<ConstraintCheck> checks;
  bool pass = true;
};

/// Measure every active constraint against its cap (tolerance 1e-9).
BudgetAudit check_budget(const TransformerParams& params, const ParamBudget& budget,
                         const ArchSpec& spec);

/// Gaussian-initialized parameter set (pre-projection), deterministic per stream.
TransformerParams sample_params(const ArchSpec& spec, RngStream stream, double sd = 1.0);

/// Deterministic almost-sure bound on |f(X)| for budget-respecting params
/// and |X|_{2->2} <= B_X: B_w B_c B_v L_sigma B_X (SH), H times that (MH),
/// B_w (ML).
double output_bound(const ArchSpec& spec, const ParamBudget& budget);

// Flat parameter vector (optimizer surface); layout is layers in order,
// heads in order, query_key then value then out_proj entries row-major,
// readout last.
Vec flatten_params(const TransformerParams& params);
TransformerParams unflatten_params(const Vec& theta, const ArchSpec& spec);
Index param_count(const ArchSpec& spec);

}  // namespace tfb
