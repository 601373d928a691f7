#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tfb/transformer.hpp"
#include "tfb/types.hpp"

namespace tfb {

enum class BoundFamily { offset_generic, norm, rank, subgaussian, heavytail };

std::string to_string(BoundFamily family);
std::string to_string(ArchKind kind);

/// Evaluated excess-risk bound, decomposed into its named terms.
/// total == complexity + discretization + truncation + approximation.
struct BoundReport {
  BoundFamily family = BoundFamily::offset_generic;
  ArchKind kind = ArchKind::SH;
  long n = 1;
  double delta = 0.0;
  double penalty_constant = 0.0;
  double complexity_term = 0.0;
  double discretization_term = 0.0;
  double truncation_term = 0.0;
  double approximation_term = 0.0;
  double total = 0.0;
  std::optional<double> threshold;  // truncation M, when a truncated regime applies
  ArchSpec arch_echo;
  ParamBudget budget_echo;
};

/// Solution of the covering-scale allocation problem
/// min sum_i r_i C_i log(r_i B_X^2 / eps_i^2) s.t. sum_i beta_i eps_i = eps.
struct AllocationResult {
  std::vector<double> epsilons;
  double multiplier = 0.0;  // Lagrange multiplier (2 / eps) sum_k r_k C_k
  double objective = 0.0;   // sum_i r_i C_i log(b_i^2 / eps^2)
  std::vector<double> b;    // effective bounds b_i
  // The b_i form and the integrand r_i B_X^2 / eps_i^2 disagree dimensionally
  // in general; both evaluations are reported and the gap is flagged.
  double objective_at_point = 0.0;  // sum_i r_i C_i log(r_i B_X^2 / eps_i^2)
  bool objective_mismatch = false;
};

/// Covering constant C1: explicit override if set, else log(2 d k + 1).
double covering_constant(const ArchSpec& spec, const ParamBudget& budget);

/// Offset penalty scale M: 2 kappa B + 2 kappa B_w B_c B_v L_sigma B_X (SH),
/// the H-scaled variant (MH), or 2 kappa (B + B_w) (ML).
double penalty_constant(const ArchSpec& spec, const ParamBudget& budget);

/// Generic excess-risk assembly from a log covering number:
/// (2 penalty / n)(1 + log_cover) + 8 kappa delta + approx.
BoundReport excess_risk_from_log_cover(double penalty, long n, double log_cover, double kappa,
                                       double delta, double approx);

/// (B_x^2 B_W^2 / eps^2) log(2 d k + 1) for l11-ball linear maps.
double log_cover_l11_linear(double B_x, double B_W, double eps, Index d, Index k);

/// max(0, (r/2) log(4 B_x^2 B_W^2 r / eps^2)) for rank-r linear maps.
double log_cover_rank_linear(double B_x, double B_W, double eps, Index r);

/// alpha_i = c^(L-i+1) with c = L_sigma B_c B_v (1 + 4 B_QK), i = 1..L.
std::vector<double> alpha_products(const ParamBudget& budget, int L);

/// Norm-based complexity terms. SH/MH populate gamma only; ML also carries
/// eta and the per-layer tau_2..tau_L.
struct NormComplexity {
  double gamma = 0.0;
  double eta = 0.0;
  std::vector<double> tau;  // tau_i for i = 2..L (ML only)
  double total() const { return gamma + eta; }
};
NormComplexity norm_complexity_terms(const ParamBudget& budget, const ArchSpec& spec);

/// Norm-based bound: (2 penalty / n)(1 + log(Gamma^3 / delta^2)) + 8 kappa delta
/// + approx, with Gamma = gamma_SH | gamma_MH | gamma_ML + eta_ML.
BoundReport norm_bound(const ArchSpec& spec, const ParamBudget& budget, long n, double delta,
                       double approx);

/// Closed-form optimal scales eps_j = eps r_j C_j / (beta_j sum_k r_k C_k).
AllocationResult rank_allocation(const std::vector<double>& r, const std::vector<double>& C,
                                 const std::vector<double>& beta, double eps, double B_X);

/// Rank caps per weight family (readout is always rank 1).
struct RankCaps {
  Index r_v = 1;
  Index r_c = 1;
  Index r_QK = 1;
};

/// One row of the rank-covering component list fed to the allocation.
struct RankComponent {
  std::string name;
  double rank = 1.0;
  double C = 0.5;
  double beta = 1.0;
};

/// Component list for the rank-based bound: {c, QK, v, w} for SH (MH scales
/// the weights by H), or the 3L+1-entry layered list for ML.
std::vector<RankComponent> rank_components(const ArchSpec& spec, const ParamBudget& budget,
                                           const RankCaps& ranks);

/// Rank-based bound: (2 penalty / n)(1 + sum_i r_i C_i log(b_i^2 / delta^2))
/// + 8 kappa delta + approx, scales allocated at eps = delta.
BoundReport rank_bound(const ArchSpec& spec, const ParamBudget& budget, const RankCaps& ranks,
                       long n, double delta, double approx,
                       AllocationResult* allocation_out = nullptr);

/// Finite-class offset bound (1 + log N) / (2 n beta).
double finite_class_offset_bound(long N, long n, double beta);

/// Log-spaced delta grid, 32 points on [1e-6, 1] by default.
std::vector<double> delta_grid(double lo = 1e-6, double hi = 1.0, int points = 32);

/// Evaluate one bound family at a fixed delta. The sub-Gaussian family is
/// the norm bound with B_x and B_X replaced by the truncation threshold M
/// plus the sub-Gaussian bias term; the heavy-tail family is the rank bound
/// under the same substitution with kappa scaled by B_psi plus the
/// polynomial bias term. M defaults to optimal_threshold(tail, n).
/// offset_generic instantiates the generic covering-number assembly with
/// the budget mode's closed-form cover (rank mode -> rank cover, else norm).
BoundReport evaluate_bound_family(BoundFamily family, const ArchSpec& spec,
                                  const ParamBudget& budget, long n, double delta, double approx,
                                  std::optional<double> threshold = std::nullopt);

/// Minimize a delta-parametrized bound over a delta grid.
BoundReport minimize_over_delta(const std::function<BoundReport(double)>& eval,
                                const std::vector<double>& grid);

}  // namespace tfb
