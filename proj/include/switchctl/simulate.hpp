#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>

#include "switchctl/control.hpp"
#include "switchctl/problem.hpp"

namespace switchctl {

struct SimParams {
  double dt = 1e-3;
  int paths = 1000;
  std::uint64_t seed = 1;
  /// Hard cap on the horizon; the tail bound may pick a shorter one.
  double horizon_cap = 100.0;
  /// Horizon T solves scale * exp(-c_min T) = tail_tolerance.
  double tail_tolerance = 1e-6;
  /// Drop the Brownian term (deterministic paths).
  bool zero_volatility = false;
  /// Worker threads; 0 reads SWITCHCTL_THREADS, then the hardware count.
  int threads = 0;

  void check() const;
};

struct PathCostEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int paths = 0;
  /// Paths that left the open domain before the horizon.
  int absorbed = 0;
  /// Paths still inside at the horizon.
  int truncated = 0;
  double horizon = 0.0;
};

/// min(horizon_cap, max(log(scale / tail), 0) / c_min).
double simulation_horizon(const SimParams& params, double value_scale, double min_discount);

/// Monte Carlo cost of the feedback policy from (x0, l0). The value scale
/// for the horizon is sup vtilde of the policy's discretization.
PathCostEstimate simulate_policy(const FeedbackPolicy& policy, const Vec& x0, int l0, const SimParams& params);

struct StrategyAction {
  /// Unit vector whenever rate or jump is nonzero; the state moves along -direction.
  Vec direction;
  double rate = 0.0;
  double jump = 0.0;
};

/// Deterministic strategy. Both rules see the step [t, t + dt) and must be
/// safe to call concurrently.
struct AdmissibleStrategy {
  std::function<StrategyAction(double t, double dt, const Vec& x, int regime)> control;
  /// Returns the new regime, or nullopt to stay.
  std::function<std::optional<int>(double t, double dt, const Vec& x, int regime)> switching;
  /// Largest allowed rate (2 C / eps inside the penalized class).
  double rate_cap = std::numeric_limits<double>::infinity();
};

enum class CostMode {
  /// Control charged g * rate, jumps through the path integral of g.
  Singular,
  /// Control charged through the Legendre cost l^eps(rate); no jumps.
  Penalized,
};

/// Monte Carlo cost of an admissible strategy. `epsilon` is used only in
/// Penalized mode. The horizon uses sup h / c_min sampled on a lattice as the
/// value scale.
PathCostEstimate simulate_admissible(const AdmissibleStrategy& strategy, const Vec& x0, int l0,
                                     const SimParams& params, const ProblemSpec& spec,
                                     CostMode mode = CostMode::Singular, double epsilon = 0.0);

/// size * int_0^1 g(x - s * size * n) ds by 16-point Gauss-Legendre.
double jump_cost(const ScalarFunction& g, const Vec& x, const Vec& n, double size);

/// 16-point Gauss-Legendre nodes and weights on [0, 1].
const std::array<std::array<double, 2>, 16>& gauss_legendre16();

}  // namespace switchctl
