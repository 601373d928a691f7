#include "tfb/bounds.hpp"

#include <cmath>

#include "tfb/tails.hpp"

namespace tfb {

std::string to_string(BoundFamily family) {
  switch (family) {
    case BoundFamily::offset_generic:
      return "offset-generic";
    case BoundFamily::norm:
      return "norm";
    case BoundFamily::rank:
      return "rank";
    case BoundFamily::subgaussian:
      return "subgaussian";
    case BoundFamily::heavytail:
      return "heavytail";
  }
  return "?";
}

std::string to_string(ArchKind kind) {
  switch (kind) {
    case ArchKind::SH:
      return "SH";
    case ArchKind::MH:
      return "MH";
    case ArchKind::ML:
      return "ML";
  }
  return "?";
}

double covering_constant(const ArchSpec& spec, const ParamBudget& budget) {
  if (budget.C1) return *budget.C1;
  return std::log(2.0 * static_cast<double>(spec.d) * static_cast<double>(spec.k) + 1.0);
}

double penalty_constant(const ArchSpec& spec, const ParamBudget& budget) {
  const double kappa = budget.kappa;
  switch (spec.kind) {
    case ArchKind::SH:
      return 2.0 * kappa * budget.B +
             2.0 * kappa * budget.B_w * budget.B_c * budget.B_v * budget.L_sigma * budget.B_X;
    case ArchKind::MH:
      return 2.0 * kappa * budget.B + 2.0 * kappa * spec.H * budget.B_w * budget.B_c * budget.B_v *
                                          budget.L_sigma * budget.B_X;
    case ArchKind::ML:
      return 2.0 * kappa * (budget.B + budget.B_w);
  }
  throw InvalidParameter("penalty_constant: unknown architecture kind");
}

BoundReport excess_risk_from_log_cover(double penalty, long n, double log_cover, double kappa,
                                       double delta, double approx) {
  if (n < 1) throw InvalidParameter("excess_risk_from_log_cover: n must be >= 1");
  if (delta < 0.0) throw InvalidParameter("excess_risk_from_log_cover: delta must be >= 0");
  BoundReport r;
  r.n = n;
  r.delta = delta;
  r.penalty_constant = penalty;
  r.complexity_term = (2.0 * penalty / static_cast<double>(n)) * (1.0 + log_cover);
  r.discretization_term = 8.0 * kappa * delta;
  r.truncation_term = 0.0;
  r.approximation_term = approx;
  r.total = r.complexity_term + r.discretization_term + r.truncation_term + r.approximation_term;
  return r;
}

double log_cover_l11_linear(double B_x, double B_W, double eps, Index d, Index k) {
  if (!(eps > 0.0)) throw InvalidParameter("log_cover_l11_linear: eps must be > 0");
  if (d < 1 || k < 1) throw InvalidParameter("log_cover_l11_linear: d, k must be >= 1");
  return (B_x * B_x * B_W * B_W / (eps * eps)) *
         std::log(2.0 * static_cast<double>(d) * static_cast<double>(k) + 1.0);
}

double log_cover_rank_linear(double B_x, double B_W, double eps, Index r) {
  if (!(eps > 0.0)) throw InvalidParameter("log_cover_rank_linear: eps must be > 0");
  if (r < 1) throw InvalidParameter("log_cover_rank_linear: r must be >= 1");
  const double rr = static_cast<double>(r);
  const double v = 0.5 * rr * std::log(4.0 * B_x * B_x * B_W * B_W * rr / (eps * eps));
  return std::max(0.0, v);
}

std::vector<double> alpha_products(const ParamBudget& budget, int L) {
  if (L < 1) throw InvalidParameter("alpha_products: L must be >= 1");
  const double c = budget.L_sigma * budget.B_c * budget.B_v * (1.0 + 4.0 * budget.B_QK);
  std::vector<double> alpha(static_cast<std::size_t>(L));
  for (int i = 1; i <= L; ++i)
    alpha[static_cast<std::size_t>(i - 1)] = std::pow(c, static_cast<double>(L - i + 1));
  return alpha;
}

namespace {

double pow23(double x) { return std::cbrt(x * x); }

}  // namespace

NormComplexity norm_complexity_terms(const ParamBudget& budget, const ArchSpec& spec) {
  const double C1_13 = std::cbrt(covering_constant(spec, budget));
  const double Bx23 = pow23(budget.B_x);
  const double Ls = budget.L_sigma;
  const double Bc = budget.B_c, Bv = budget.B_v, Bw = budget.B_w;
  NormComplexity out;
  switch (spec.kind) {
    case ArchKind::SH: {
      out.gamma = C1_13 * Bx23 * (pow23(Bw * Ls) + pow23(Bw * Ls * Bc * Bv)) +
                  C1_13 * Bx23 * (pow23(Bw * Ls * Bc * Bv) + 1.0);
      return out;
    }
    case ArchKind::MH: {
      const double H = static_cast<double>(spec.H);
      out.gamma = C1_13 * Bx23 * (pow23(H * Bw * Ls) + 2.0 * pow23(H * Bw * Ls * Bc * Bv)) +
                  C1_13 * Bx23 * pow23(H);
      return out;
    }
    case ArchKind::ML: {
      const auto alpha = alpha_products(budget, spec.L);
      const double a1 = alpha[0];
      out.gamma = C1_13 * pow23(2.0 * Ls * Bc * Bv * a1 * Bw * budget.B_x * budget.B_x) +
                  C1_13 * Bx23 * (1.0 + pow23(a1 * Bw) + pow23(a1 * Bw * Ls * Bv));
      out.tau.reserve(alpha.size());
      for (int i = 2; i <= spec.L; ++i) {
        const double ai = alpha[static_cast<std::size_t>(i - 1)];
        out.tau.push_back(pow23(ai) + pow23(2.0 * ai * Ls * Bc * Bv) + pow23(ai * Ls * Bv));
      }
      double tau_sum = 0.0;
      for (double t : out.tau) tau_sum += t;
      out.eta = C1_13 * pow23(Bw) * tau_sum;
      return out;
    }
  }
  throw InvalidParameter("norm_complexity_terms: unknown architecture kind");
}

BoundReport norm_bound(const ArchSpec& spec, const ParamBudget& budget, long n, double delta,
                       double approx) {
  if (!(delta > 0.0)) throw InvalidParameter("norm_bound: delta must be > 0");
  const double gamma_total = norm_complexity_terms(budget, spec).total();
  const double log_cover = std::log(gamma_total * gamma_total * gamma_total / (delta * delta));
  BoundReport r = excess_risk_from_log_cover(penalty_constant(spec, budget), n, log_cover,
                                             budget.kappa, delta, approx);
  r.family = BoundFamily::norm;
  r.kind = spec.kind;
  r.arch_echo = spec;
  r.budget_echo = budget;
  return r;
}

AllocationResult rank_allocation(const std::vector<double>& r, const std::vector<double>& C,
                                 const std::vector<double>& beta, double eps, double B_X) {
  const std::size_t m = r.size();
  if (m == 0 || C.size() != m || beta.size() != m)
    throw InvalidParameter("rank_allocation: r, C, beta must have equal nonzero lengths");
  if (!(eps > 0.0) || !(B_X > 0.0))
    throw InvalidParameter("rank_allocation: eps and B_X must be > 0");
  double weight_sum = 0.0;  // sum_k r_k C_k
  for (std::size_t i = 0; i < m; ++i) {
    if (!(r[i] >= 1.0) || !(C[i] > 0.0) || !(beta[i] > 0.0))
      throw InvalidParameter("rank_allocation: need r_i >= 1, C_i > 0, beta_i > 0");
    weight_sum += r[i] * C[i];
  }
  AllocationResult out;
  out.epsilons.resize(m);
  out.b.resize(m);
  out.multiplier = 2.0 * weight_sum / eps;
  for (std::size_t i = 0; i < m; ++i) {
    out.epsilons[i] = eps * r[i] * C[i] / (beta[i] * weight_sum);
    out.b[i] = std::sqrt(B_X * beta[i] * weight_sum) / std::sqrt(r[i] * C[i]);
    out.objective += r[i] * C[i] * std::log(out.b[i] * out.b[i] / (eps * eps));
    out.objective_at_point +=
        r[i] * C[i] * std::log(r[i] * B_X * B_X / (out.epsilons[i] * out.epsilons[i]));
  }
  out.objective_mismatch =
      std::abs(out.objective - out.objective_at_point) >
      1e-9 * std::max(1.0, std::max(std::abs(out.objective), std::abs(out.objective_at_point)));
  return out;
}

std::vector<RankComponent> rank_components(const ArchSpec& spec, const ParamBudget& budget,
                                           const RankCaps& ranks) {
  if (ranks.r_v < 1 || ranks.r_c < 1 || ranks.r_QK < 1)
    throw InvalidParameter("rank_components: rank caps must be >= 1");
  if (ranks.r_v > std::min(spec.d, spec.k) || ranks.r_c > std::min(spec.k, spec.d) ||
      ranks.r_QK > spec.d)
    throw InvalidParameter("rank_components: rank caps exceed matrix dimensions");
  const double Ls = budget.L_sigma, Bc = budget.B_c, Bv = budget.B_v, Bw = budget.B_w;
  constexpr double kCoverC = 0.5;  // r/2 prefactor of the rank covering bound
  std::vector<RankComponent> comps;
  if (spec.kind == ArchKind::SH || spec.kind == ArchKind::MH) {
    const double H = spec.kind == ArchKind::MH ? static_cast<double>(spec.H) : 1.0;
    comps.push_back({"c", static_cast<double>(ranks.r_c), kCoverC, H * Bw * Ls});
    comps.push_back({"QK", static_cast<double>(ranks.r_QK), kCoverC, H * 2.0 * Bw * Ls * Bc * Bv});
    comps.push_back({"v", static_cast<double>(ranks.r_v), kCoverC, H * Bw * Ls * Bc});
    comps.push_back({"w", 1.0, kCoverC, H * Bc});
    return comps;
  }
  // ML: 3L+1 components; k = 1 is the readout, then out_proj, value and
  // query_key blocks per layer with the layered weight recursion.
  const auto alpha = alpha_products(budget, spec.L);
  comps.push_back({"w", 1.0, kCoverC, 1.0});
  for (int l = 1; l <= spec.L; ++l)
    comps.push_back({"c[" + std::to_string(l) + "]", static_cast<double>(ranks.r_c), kCoverC,
                     alpha[static_cast<std::size_t>(l - 1)] * Bw});
  for (int l = 1; l <= spec.L; ++l)
    comps.push_back({"v[" + std::to_string(l) + "]", static_cast<double>(ranks.r_v), kCoverC,
                     alpha[static_cast<std::size_t>(l - 1)] * Bw * Ls * Bv});
  for (int l = 1; l <= spec.L; ++l)
    comps.push_back({"QK[" + std::to_string(l) + "]", static_cast<double>(ranks.r_QK), kCoverC,
                     alpha[static_cast<std::size_t>(l - 1)] * 2.0 * Ls * Bc * Bv * Bw});
  return comps;
}

BoundReport rank_bound(const ArchSpec& spec, const ParamBudget& budget, const RankCaps& ranks,
                       long n, double delta, double approx, AllocationResult* allocation_out) {
  if (!(delta > 0.0)) throw InvalidParameter("rank_bound: delta must be > 0");
  const auto comps = rank_components(spec, budget, ranks);
  std::vector<double> r, C, beta;
  for (const auto& c : comps) {
    r.push_back(c.rank);
    C.push_back(c.C);
    beta.push_back(c.beta);
  }
  const AllocationResult alloc = rank_allocation(r, C, beta, delta, budget.B_X);
  if (allocation_out) *allocation_out = alloc;
  BoundReport rep = excess_risk_from_log_cover(penalty_constant(spec, budget), n, alloc.objective,
                                               budget.kappa, delta, approx);
  rep.family = BoundFamily::rank;
  rep.kind = spec.kind;
  rep.arch_echo = spec;
  rep.budget_echo = budget;
  return rep;
}

double finite_class_offset_bound(long N, long n, double beta) {
  if (N < 1 || n < 1) throw InvalidParameter("finite_class_offset_bound: N, n must be >= 1");
  if (!(beta > 0.0)) throw InvalidParameter("finite_class_offset_bound: beta must be > 0");
  return (1.0 + std::log(static_cast<double>(N))) / (2.0 * static_cast<double>(n) * beta);
}

std::vector<double> delta_grid(double lo, double hi, int points) {
  if (!(lo > 0.0) || !(hi >= lo) || points < 1) throw InvalidParameter("delta_grid: bad range");
  std::vector<double> grid(static_cast<std::size_t>(points));
  if (points == 1) {
    grid[0] = lo;
    return grid;
  }
  const double step = std::log(hi / lo) / static_cast<double>(points - 1);
  for (int i = 0; i < points; ++i) grid[static_cast<std::size_t>(i)] = lo * std::exp(step * i);
  return grid;
}

namespace {

RankCaps caps_from_budget(const ArchSpec& spec, const ParamBudget& budget) {
  RankCaps caps;
  caps.r_v = budget.r_v.value_or(std::min(spec.d, spec.k));
  caps.r_c = budget.r_c.value_or(std::min(spec.k, spec.d));
  caps.r_QK = budget.r_QK.value_or(spec.d);
  return caps;
}

}  // namespace

BoundReport evaluate_bound_family(BoundFamily family, const ArchSpec& spec,
                                  const ParamBudget& budget, long n, double delta, double approx,
                                  std::optional<double> threshold) {
  switch (family) {
    case BoundFamily::norm:
      return norm_bound(spec, budget, n, delta, approx);
    case BoundFamily::rank:
      return rank_bound(spec, budget, caps_from_budget(spec, budget), n, delta, approx);
    case BoundFamily::offset_generic: {
      // Generic covering-number assembly instantiated with the budget
      // mode's closed-form cover.
      BoundReport r = budget.budget_mode == BudgetMode::rank
                          ? rank_bound(spec, budget, caps_from_budget(spec, budget), n, delta,
                                       approx)
                          : norm_bound(spec, budget, n, delta, approx);
      r.family = BoundFamily::offset_generic;
      return r;
    }
    case BoundFamily::subgaussian: {
      if (!budget.tail || budget.tail->regime != TailRegime::subgaussian)
        throw InvalidParameter("evaluate_bound_family: sub-Gaussian tail model required");
      const TailModel& tail = *budget.tail;
      const double M = threshold ? *threshold : optimal_threshold(tail, n);
      ParamBudget truncated = budget;
      truncated.B_X = M;
      truncated.B_x = M;
      BoundReport r = norm_bound(spec, truncated, n, delta, approx);
      r.family = BoundFamily::subgaussian;
      r.threshold = M;
      r.truncation_term = subgaussian_tail_term(budget.kappa, tail, M);
      r.total += r.truncation_term;
      return r;
    }
    case BoundFamily::heavytail: {
      if (!budget.tail || budget.tail->regime != TailRegime::heavytail)
        throw InvalidParameter("evaluate_bound_family: heavy-tail model required");
      const TailModel& tail = *budget.tail;
      const double M = threshold ? *threshold : optimal_threshold(tail, n);
      ParamBudget truncated = budget;
      truncated.B_X = M;
      truncated.B_x = M;
      truncated.kappa = budget.kappa * tail.B_psi;  // composite robust loss is
                                                    // (kappa B_psi)-Lipschitz
      BoundReport r = rank_bound(spec, truncated, caps_from_budget(spec, truncated), n, delta,
                                 approx);
      r.family = BoundFamily::heavytail;
      r.threshold = M;
      r.truncation_term = heavy_tail_term(tail, budget.kappa, M);
      r.total += r.truncation_term;
      return r;
    }
  }
  throw InvalidParameter("evaluate_bound_family: unknown family");
}

BoundReport minimize_over_delta(const std::function<BoundReport(double)>& eval,
                                const std::vector<double>& grid) {
  if (grid.empty()) throw InvalidParameter("minimize_over_delta: empty grid");
  BoundReport best = eval(grid.front());
  for (std::size_t i = 1; i < grid.size(); ++i) {
    BoundReport r = eval(grid[i]);
    if (r.total < best.total) best = r;
  }
  return best;
}

}  // namespace tfb
