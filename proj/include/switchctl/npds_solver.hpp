#pragma once

#include <optional>

#include "switchctl/grid.hpp"
#include "switchctl/problem.hpp"

namespace switchctl {

enum class NpdsMethod {
  /// Damped fixed-point iteration on the frozen-nonlinearity map.
  Picard,
  /// Newton on the full system with a backtracking line search. Needed once
  /// the penalties get stiff (small epsilon or delta), where Picard stalls.
  Newton,
};

struct SolveParams {
  double epsilon = 0.1;
  double delta = 0.1;
  double relaxation = 0.5;
  int max_iterations = 2000;
  /// Stop once the sup-norm update is below this and the residual is below
  /// 10 * tolerance.
  double tolerance = 1e-10;
  NpdsMethod method = NpdsMethod::Picard;

  void check() const;
};

struct SolveResult {
  RegimeField u;
  int iterations = 0;
  double final_update = 0.0;
  double residual_sup = 0.0;
  /// Relaxation actually in use at exit (Picard halves it on a stall).
  double relaxation = 0.0;
  RegimeField vtilde;
};

/// [c_l - D_l] v_l = source_l at interior nodes, v_l = 0 elsewhere, one sparse
/// LU factorization per regime.
RegimeField solve_linear_dirichlet(const RegimeField& source, const Discretization& disc);
RegimeField solve_linear_dirichlet(const RegimeField& source, const ProblemSpec& spec,
                                   const Grid& grid);

/// Linear upper bound: the Dirichlet solution with source h_l.
RegimeField compute_vtilde(const Discretization& disc);
RegimeField compute_vtilde(const ProblemSpec& spec, const Grid& grid);

/// F_l(u) = [c_l - D_l]u_l + psi_eps(|Du_l|^2 - g_l^2) + sum_k psi_delta(u_l - u_k - theta_lk) - h_l
/// at interior nodes, 0 elsewhere.
RegimeField residual_npds(const RegimeField& u, const SolveParams& params, const Discretization& disc);
RegimeField residual_npds(const RegimeField& u, const SolveParams& params, const ProblemSpec& spec,
                          const Grid& grid);

/// Solves the penalized system at fixed (epsilon, delta). Starts from
/// warm_start if given, else from vtilde. Throws NoConvergence after
/// max_iterations.
SolveResult solve_npds(const SolveParams& params, const Discretization& disc,
                       const std::optional<RegimeField>& warm_start = std::nullopt);
SolveResult solve_npds(const SolveParams& params, const ProblemSpec& spec, const Grid& grid,
                       const std::optional<RegimeField>& warm_start = std::nullopt);

}  // namespace switchctl
