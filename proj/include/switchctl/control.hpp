#pragma once

#include <memory>
#include <vector>

#include "switchctl/grid.hpp"
#include "switchctl/penalty.hpp"

namespace switchctl {

struct ControlAction {
  /// Unit vector; the state is pushed along -direction.
  Vec direction;
  double rate = 0.0;
  /// |Du^eps_l(x)|, kept for the on-policy running cost.
  double grad_norm = 0.0;
};

/// Feedback strategy read off a penalized solution u^eps: the rate
/// 2 psi_eps'(|Du|^2 - g^2)|Du| along Du/|Du|, and a switch whenever
/// u_l - M_l u reaches -switch_tolerance.
class FeedbackPolicy {
 public:
  /// The discretization must outlive the policy.
  FeedbackPolicy(const Discretization& disc, RegimeField u_eps, double epsilon, double switch_tolerance = 1e-3);

  const Discretization& discretization() const { return *disc_; }
  const RegimeField& field() const { return u_; }
  const Penalty& penalty() const { return penalty_; }
  double epsilon() const { return penalty_.epsilon(); }
  double switch_tolerance() const { return switch_tolerance_; }
  const Vec& gamma0() const { return gamma0_; }
  /// max node gradient norm over regimes.
  double c4() const { return c4_; }
  /// 2 * c4 / epsilon.
  double rate_cap() const { return 2.0 * c4_ / penalty_.epsilon(); }

  ControlAction control_at(const Vec& x, int l) const;
  double value_at(const Vec& x, int l) const;
  bool should_switch(const Vec& x, int l) const;
  /// argmin_{k != l} u_k(x) + theta_lk, lowest index on ties.
  int next_regime(const Vec& x, int l) const;

 private:
  const Discretization* disc_;
  RegimeField u_;
  Penalty penalty_;
  double switch_tolerance_;
  Vec gamma0_;
  double c4_ = 0.0;
  std::vector<Eigen::MatrixXd> node_gradients_;
};

}  // namespace switchctl
