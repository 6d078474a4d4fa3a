#include "switchctl/control.hpp"

#include <cmath>

#include "switchctl/error.hpp"

namespace switchctl {

FeedbackPolicy::FeedbackPolicy(const Discretization& disc, RegimeField u_eps, double epsilon,
                               double switch_tolerance)
    : disc_(&disc), u_(std::move(u_eps)), penalty_(epsilon), switch_tolerance_(switch_tolerance) {
  if (u_.regimes() != disc.regimes() || u_.nodes() != disc.grid().size()) {
    throw Error(ErrorKind::InvalidArgument, "policy field does not match the discretization");
  }
  if (!(switch_tolerance >= 0.0)) throw Error(ErrorKind::InvalidArgument, "switch tolerance must be >= 0");
  gamma0_ = Vec::Zero(disc.grid().dim());
  gamma0_(0) = 1.0;
  for (int l = 0; l < u_.regimes(); ++l) {
    node_gradients_.push_back(disc.gradients(u_[l]));
    if (node_gradients_.back().rows() > 0) {
      c4_ = std::max(c4_, node_gradients_.back().rowwise().norm().maxCoeff());
    }
  }
}

ControlAction FeedbackPolicy::control_at(const Vec& x, int l) const {
  const Vec grad = interpolate_gradient(node_gradients_[static_cast<size_t>(l)], disc_->grid(), x);
  const double norm = grad.norm();
  const double g = disc_->spec().regime(l).control_cost(x);
  ControlAction a;
  a.grad_norm = norm;
  a.direction = norm > 1e-12 ? Vec(grad / norm) : gamma0_;
  a.rate = 2.0 * penalty_.derivative(norm * norm - g * g) * norm;
  // The interpolated gradient is a convex combination of node gradients, so
  // its norm never exceeds c4.
  if (a.rate > rate_cap() + 1e-9) throw Error(ErrorKind::InvalidArgument, "feedback rate exceeds its cap");
  return a;
}

double FeedbackPolicy::value_at(const Vec& x, int l) const { return interpolate(u_[l], disc_->grid(), x); }

bool FeedbackPolicy::should_switch(const Vec& x, int l) const {
  const int m = u_.regimes();
  if (m == 1) {
    value_at(x, l);  // still rejects points outside the domain
    return false;
  }
  std::vector<double> values(static_cast<size_t>(m));
  for (int k = 0; k < m; ++k) values[static_cast<size_t>(k)] = value_at(x, k);
  const auto choice = switching_operator(values, disc_->spec().costs(), l);
  return values[static_cast<size_t>(l)] - choice.value >= -switch_tolerance_;
}

int FeedbackPolicy::next_regime(const Vec& x, int l) const {
  const int m = u_.regimes();
  std::vector<double> values(static_cast<size_t>(m));
  for (int k = 0; k < m; ++k) values[static_cast<size_t>(k)] = value_at(x, k);
  return switching_operator(values, disc_->spec().costs(), l).regime;
}

}  // namespace switchctl
