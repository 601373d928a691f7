#include "tfb/transformer.hpp"

#include <cmath>

namespace tfb {

void ArchSpec::validate() const {
  if (T < 1 || d < 1 || k < 1) throw InvalidParameter("ArchSpec: T, d, k must be >= 1");
  if (H < 1 || L < 1) throw InvalidParameter("ArchSpec: H, L must be >= 1");
  if (cls_index < 0 || cls_index >= T) throw InvalidParameter("ArchSpec: cls_index out of range");
  if (kind == ArchKind::ML && k != d)
    throw InvalidParameter("ArchSpec: multi-layer blocks require k == d");
}

void ParamBudget::validate() const {
  if (!(B_v > 0 && B_c > 0 && B_w > 0 && B_x > 0 && B_X > 0))
    throw InvalidParameter("ParamBudget: norm caps must be > 0");
  if (B_QK < 0 || B < 0) throw InvalidParameter("ParamBudget: B_QK and B must be >= 0");
  if (!(kappa > 0) || !(L_sigma > 0))
    throw InvalidParameter("ParamBudget: kappa and L_sigma must be > 0");
  for (const auto& r : {r_v, r_c, r_QK})
    if (r && *r < 1) throw InvalidParameter("ParamBudget: rank caps must be >= 1");
  if (C1 && !(*C1 > 0)) throw InvalidParameter("ParamBudget: C1 must be > 0");
  if (tail) tail->validate();
}

double activation_lipschitz(Activation) {
  return 1.0;  // relu, tanh and identity are all 1-Lipschitz with sigma(0) = 0
}

Mat apply_activation(Activation act, const Mat& Z) {
  switch (act) {
    case Activation::relu:
      return Z.cwiseMax(0.0);
    case Activation::tanh:
      return Z.array().tanh().matrix();
    case Activation::identity:
      return Z;
  }
  throw InvalidParameter("apply_activation: unknown activation");
}

void validate_shapes(const TransformerParams& params, const ArchSpec& spec) {
  spec.validate();
  const auto layers = static_cast<std::size_t>(spec.layer_count());
  const auto heads = static_cast<std::size_t>(spec.head_count());
  if (params.layers.size() != layers)
    throw InvalidParameter("TransformerParams: layer count mismatch");
  for (const auto& layer : params.layers) {
    if (layer.size() != heads) throw InvalidParameter("TransformerParams: head count mismatch");
    for (const auto& h : layer) {
      if (h.query_key.rows() != spec.d || h.query_key.cols() != spec.d)
        throw InvalidParameter("TransformerParams: query_key must be d x d");
      if (h.value.rows() != spec.d || h.value.cols() != spec.k)
        throw InvalidParameter("TransformerParams: value must be d x k");
      if (h.out_proj.rows() != spec.k || h.out_proj.cols() != spec.d)
        throw InvalidParameter("TransformerParams: out_proj must be k x d");
      if (!h.query_key.allFinite() || !h.value.allFinite() || !h.out_proj.allFinite())
        throw InvalidParameter("TransformerParams: non-finite weight entries");
    }
  }
  if (params.readout.size() != spec.d)
    throw InvalidParameter("TransformerParams: readout must have length d");
  if (!params.readout.allFinite())
    throw InvalidParameter("TransformerParams: non-finite readout entries");
}

Mat head_output(const Mat& X, const HeadWeights& head, Activation act) {
  const Mat scores = X * head.query_key * X.transpose();
  const Mat attn = row_softmax(scores);
  return apply_activation(act, attn * X * head.value) * head.out_proj;
}

static void check_input(const Mat& X, const ArchSpec& spec) {
  if (X.rows() != spec.T || X.cols() != spec.d)
    throw InvalidParameter("forward: X must be T x d");
  if (!X.allFinite()) throw InvalidParameter("forward: X has non-finite entries");
}

double forward_single_head(const TransformerParams& params, const Mat& X, const ArchSpec& spec) {
  if (spec.kind != ArchKind::SH) throw InvalidParameter("forward_single_head: spec.kind != SH");
  validate_shapes(params, spec);
  check_input(X, spec);
  const Mat Y = head_output(X, params.layers[0][0], spec.activation);
  return params.readout.dot(Y.row(spec.cls_index));
}

double forward_multi_head(const TransformerParams& params, const Mat& X, const ArchSpec& spec) {
  if (spec.kind != ArchKind::MH) throw InvalidParameter("forward_multi_head: spec.kind != MH");
  validate_shapes(params, spec);
  check_input(X, spec);
  Mat Y = head_output(X, params.layers[0][0], spec.activation);
  for (int h = 1; h < spec.H; ++h) Y += head_output(X, params.layers[0][h], spec.activation);
  return params.readout.dot(Y.row(spec.cls_index));
}

double forward_multi_layer(const TransformerParams& params, const Mat& X, const ArchSpec& spec,
                           std::vector<Mat>* trace) {
  if (spec.kind != ArchKind::ML) throw InvalidParameter("forward_multi_layer: spec.kind != ML");
  validate_shapes(params, spec);
  check_input(X, spec);
  Mat cur = X;
  for (int l = 0; l < spec.L; ++l) {
    const Mat phi = head_output(cur, params.layers[l][0], spec.activation);
    cur = project_rows_unit_ball(apply_activation(spec.activation, project_rows_unit_ball(phi)));
    if (trace) trace->push_back(cur);
  }
  return params.readout.dot(cur.row(spec.cls_index));
}

double forward(const TransformerParams& params, const Mat& X, const ArchSpec& spec) {
  switch (spec.kind) {
    case ArchKind::SH:
      return forward_single_head(params, X, spec);
    case ArchKind::MH:
      return forward_multi_head(params, X, spec);
    case ArchKind::ML:
      return forward_multi_layer(params, X, spec);
  }
  throw InvalidParameter("forward: unknown architecture kind");
}

namespace {

Mat scale_to_cap(const Mat& W, double measured, double cap) {
  if (measured <= cap) return W;
  return (cap / measured) * W;
}

Mat project_one(const Mat& W, double cap, std::optional<Index> rank_cap, BudgetMode mode) {
  switch (mode) {
    case BudgetMode::spectral:
      return scale_to_cap(W, spectral_norm(W), cap);
    case BudgetMode::l11:
      return scale_to_cap(W, norm_l11(W), cap);
    case BudgetMode::rank: {
      Mat R = W;
      if (rank_cap) {
        if (*rank_cap > std::min(W.rows(), W.cols()))
          throw InvalidParameter("project_params: rank cap exceeds matrix dimensions");
        R = rank_truncate(W, *rank_cap);
      }
      return scale_to_cap(R, spectral_norm(R), cap);
    }
  }
  throw InvalidParameter("project_params: unknown budget mode");
}

}  // namespace

TransformerParams project_params(const TransformerParams& params, const ParamBudget& budget,
                                 const ArchSpec& spec) {
  validate_shapes(params, spec);
  budget.validate();
  TransformerParams out = params;
  for (auto& layer : out.layers) {
    for (auto& h : layer) {
      h.query_key = project_one(h.query_key, budget.B_QK, budget.r_QK, budget.budget_mode);
      h.value = project_one(h.value, budget.B_v, budget.r_v, budget.budget_mode);
      h.out_proj = project_one(h.out_proj, budget.B_c, budget.r_c, budget.budget_mode);
    }
  }
  const double wn = out.readout.norm();
  if (wn > budget.B_w) out.readout *= budget.B_w / wn;
  return out;
}

namespace {

constexpr double kAuditTol = 1e-9;

double numeric_rank(const Mat& W) {
  Eigen::JacobiSVD<Mat> svd(W);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) <= 0.0) return 0.0;
  double r = 0.0;
  for (Index i = 0; i < sv.size(); ++i)
    if (sv(i) > kAuditTol * sv(0)) r += 1.0;
  return r;
}

void add_check(BudgetAudit& audit, const std::string& name, double measured, double cap) {
  const bool ok = measured <= cap + kAuditTol * (1.0 + cap);
  audit.checks.push_back({name, measured, cap, ok});
  audit.pass = audit.pass && ok;
}

}  // namespace

BudgetAudit check_budget(const TransformerParams& params, const ParamBudget& budget,
                         const ArchSpec& spec) {
  validate_shapes(params, spec);
  BudgetAudit audit;
  const bool l11 = budget.budget_mode == BudgetMode::l11;
  auto norm_of = [&](const Mat& W) { return l11 ? norm_l11(W) : spectral_norm(W); };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    for (std::size_t h = 0; h < params.layers[l].size(); ++h) {
      const auto& hw = params.layers[l][h];
      const std::string at = "[" + std::to_string(l) + "][" + std::to_string(h) + "]";
      add_check(audit, "query_key" + at, norm_of(hw.query_key), budget.B_QK);
      add_check(audit, "value" + at, norm_of(hw.value), budget.B_v);
      add_check(audit, "out_proj" + at, norm_of(hw.out_proj), budget.B_c);
      if (budget.budget_mode == BudgetMode::rank) {
        if (budget.r_QK)
          add_check(audit, "rank(query_key)" + at, numeric_rank(hw.query_key),
                    static_cast<double>(*budget.r_QK));
        if (budget.r_v)
          add_check(audit, "rank(value)" + at, numeric_rank(hw.value),
                    static_cast<double>(*budget.r_v));
        if (budget.r_c)
          add_check(audit, "rank(out_proj)" + at, numeric_rank(hw.out_proj),
                    static_cast<double>(*budget.r_c));
      }
    }
  }
  add_check(audit, "readout", params.readout.norm(), budget.B_w);
  return audit;
}

TransformerParams sample_params(const ArchSpec& spec, RngStream stream, double sd) {
  spec.validate();
  TransformerParams p;
  p.layers.resize(static_cast<std::size_t>(spec.layer_count()));
  std::uint64_t tag = 0;
  for (auto& layer : p.layers) {
    layer.resize(static_cast<std::size_t>(spec.head_count()));
    for (auto& h : layer) {
      h.query_key = sample_matrix(GaussianDist{sd}, spec.d, spec.d, substream(stream, tag++));
      h.value = sample_matrix(GaussianDist{sd}, spec.d, spec.k, substream(stream, tag++));
      h.out_proj = sample_matrix(GaussianDist{sd}, spec.k, spec.d, substream(stream, tag++));
    }
  }
  p.readout = sample_matrix(GaussianDist{sd}, spec.d, 1, substream(stream, tag++)).col(0);
  return p;
}

double output_bound(const ArchSpec& spec, const ParamBudget& budget) {
  switch (spec.kind) {
    case ArchKind::SH:
      return budget.B_w * budget.B_c * budget.B_v * budget.L_sigma * budget.B_X;
    case ArchKind::MH:
      return spec.H * budget.B_w * budget.B_c * budget.B_v * budget.L_sigma * budget.B_X;
    case ArchKind::ML:
      return budget.B_w;
  }
  throw InvalidParameter("output_bound: unknown architecture kind");
}

Index param_count(const ArchSpec& spec) {
  const Index per_head = spec.d * spec.d + spec.d * spec.k + spec.k * spec.d;
  return spec.layer_count() * spec.head_count() * per_head + spec.d;
}

Vec flatten_params(const TransformerParams& params) {
  Index total = 0;
  for (const auto& layer : params.layers)
    for (const auto& h : layer)
      total += h.query_key.size() + h.value.size() + h.out_proj.size();
  total += params.readout.size();
  Vec theta(total);
  Index at = 0;
  auto put = [&](const Mat& W) {
    for (Index i = 0; i < W.rows(); ++i)
      for (Index j = 0; j < W.cols(); ++j) theta(at++) = W(i, j);
  };
  for (const auto& layer : params.layers) {
    for (const auto& h : layer) {
      put(h.query_key);
      put(h.value);
      put(h.out_proj);
    }
  }
  for (Index i = 0; i < params.readout.size(); ++i) theta(at++) = params.readout(i);
  return theta;
}

TransformerParams unflatten_params(const Vec& theta, const ArchSpec& spec) {
  if (theta.size() != param_count(spec))
    throw InvalidParameter("unflatten_params: length mismatch");
  TransformerParams p;
  p.layers.resize(static_cast<std::size_t>(spec.layer_count()));
  Index at = 0;
  auto take = [&](Index rows, Index cols) {
    Mat W(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) W(i, j) = theta(at++);
    return W;
  };
  for (auto& layer : p.layers) {
    layer.resize(static_cast<std::size_t>(spec.head_count()));
    for (auto& h : layer) {
      h.query_key = take(spec.d, spec.d);
      h.value = take(spec.d, spec.k);
      h.out_proj = take(spec.k, spec.d);
    }
  }
  p.readout = take(spec.d, 1).col(0);
  return p;
}

}  // namespace tfb
