#pragma once

#include <optional>
#include <string>
#include <vector>

#include "switchctl/grid.hpp"
#include "switchctl/npds_solver.hpp"

namespace switchctl {

struct ContinuationParams {
  double epsilon0 = 0.5;
  double delta0 = 0.5;
  double shrink = 0.5;
  /// Sup-norm difference between successive rungs that ends a ladder.
  double stop_threshold = 1e-4;
  int rung_cap = 40;
  /// Inner solves along the ladder. Newton by default: damped Picard stalls
  /// once epsilon or delta drop below a few 1e-3.
  NpdsMethod method = NpdsMethod::Newton;
  double relaxation = 0.5;
  int max_iterations = 500;
  double tolerance = 1e-10;

  void check() const;
  /// 10 * stop_threshold.
  double region_tolerance() const { return 10.0 * stop_threshold; }
  SolveParams solve_params(double epsilon, double delta) const;
};

struct Rung {
  double epsilon = 0.0;
  double delta = 0.0;
  int iterations = 0;
  double residual_sup = 0.0;
  /// Sup-norm distance to the previous rung (0 for the first one).
  double difference = 0.0;
};

/// Result of a ladder. `certified` is false when the rung cap was hit first
/// or a rung failed to solve; `u` then holds the last solved rung.
struct LadderResult {
  RegimeField u;
  std::vector<Rung> rungs;
  bool certified = false;
  /// For the epsilon ladder: the delta ladder run inside each epsilon rung.
  std::vector<std::vector<Rung>> inner;
  /// For the epsilon ladder: the field of the previous epsilon rung.
  std::optional<RegimeField> previous;
  /// Field of the first rung (delta_0 for a delta ladder).
  RegimeField head;
  /// Why the ladder ended early (empty when certified or capped).
  std::string failure;
};

/// Stop rule shared by both ladders: stop at rung k >= 1 once d_k is below
/// the threshold and not above d_{k-1} (d_0 = 0, floor 1e-10), so a ladder
/// still climbing towards its peak difference is not cut early.
bool ladder_stops(const std::vector<Rung>& rungs, double threshold);

/// delta_0 > delta_1 > ... at fixed epsilon, warm-starting each rung from the
/// previous one (or from warm_start for the first).
LadderResult continuation_delta(double epsilon, const ContinuationParams& params, const Discretization& disc,
                                const std::optional<RegimeField>& warm_start = std::nullopt);

/// epsilon_0 > epsilon_1 > ..., each rung a full delta ladder. The delta_0
/// rung is warm-started from the delta_0 rung of the previous epsilon, which
/// is far closer than the previous small-delta limit.
LadderResult continuation_epsilon(const ContinuationParams& params, const Discretization& disc);

/// Throws LadderStall if the ladder was not certified.
void require_certified(const LadderResult& ladder, const std::string& what);

/// Per-node residual of the penalized-limit system at interior nodes:
///   A = [c - D]u + psi_eps(|Du|^2 - g^2) - h,   B = u - Mu   (B = -inf when m = 1)
struct ComplementarityReport {
  RegimeField a;
  RegimeField b;
  /// Gradient constraint |Du| - g (only for the limit system).
  std::optional<RegimeField> gradient;
  /// sup over interior nodes of max(terms) and of -max(terms).
  double sup_max = 0.0;
  double sup_neg_max = 0.0;
  /// max over interior nodes of |Du| - g (limit system only).
  double gradient_excess = 0.0;
};

ComplementarityReport residual_pc1(const RegimeField& u_eps, double epsilon, const Discretization& disc);

/// Three-term version max{[c - D]u - h, |Du| - g, u - Mu}.
ComplementarityReport residual_esd5(const RegimeField& u, const Discretization& disc);

/// Certification tolerance max(1e-3, c * h) for limit residuals.
double certification_tolerance(const Grid& grid, double c = 1.0);

enum class RegionLabel { Continuation, Switching, GradientBinding };

std::string_view to_string(RegionLabel label);

struct RegionMap {
  int regimes = 0;
  double tolerance = 0.0;
  /// Indexed [regime][node]; exterior and boundary nodes are Continuation and
  /// carry no flags.
  std::vector<std::vector<RegionLabel>> labels;
  std::vector<std::vector<bool>> switching;
  std::vector<std::vector<bool>> binding;
  /// Achieving targets k with |u_l - u_k - theta_lk| <= tol, per Switching node.
  std::vector<std::vector<std::vector<int>>> targets;

  RegionLabel label(int l, int node) const { return labels[static_cast<size_t>(l)][static_cast<size_t>(node)]; }
  int count(int l, RegionLabel label) const;
};

/// Switching iff u_l - M_l u >= -tol; GradientBinding iff |Du_l| - g_l >= -tol.
/// A node meeting both criteria is labelled Switching; both flags are kept.
RegionMap extract_regions(const RegimeField& u_eps, const Discretization& disc, double tol);

struct DecompositionViolation {
  int regime = 0;
  int node = 0;
};

struct DecompositionReport {
  std::vector<DecompositionViolation> violations;
  /// Switching nodes that break u_l <= u_k + theta_lk + tol for some k.
  std::vector<DecompositionViolation> incoherent;
  int switching_nodes = 0;
  bool passed() const { return violations.empty() && incoherent.empty(); }
};

/// Each Switching node of regime l needs some k != l with
/// |u_l - u_k - theta_lk| <= tol at which regime k is not switching.
DecompositionReport check_region_decomposition(const RegionMap& regions, const RegimeField& u_eps,
                                               const ProblemSpec& spec, double tol);

void write_regions_csv(std::ostream& out, const RegionMap& regions, const Grid& grid);

}  // namespace switchctl
