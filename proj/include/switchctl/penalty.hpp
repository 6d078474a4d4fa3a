#pragma once

namespace switchctl {

/// Base penalty phi: 0 for t <= 0, t^2/4 on (0, 2), t - 1 for t >= 2.
/// Convex, nondecreasing and C^1 (the quadratic bridge is C^1, not C^inf).
double phi(double t);
double phi_prime(double t);

/// psi_eps(t) = phi(t / eps).
class Penalty {
 public:
  explicit Penalty(double epsilon);

  double epsilon() const { return epsilon_; }
  double operator()(double t) const { return phi(t / epsilon_); }
  double derivative(double t) const { return phi_prime(t / epsilon_) / epsilon_; }

 private:
  double epsilon_;
};

/// l^eps(y, x) = sup_{rho >= 0} rho * |y| - psi_eps(rho^2 - g^2), the Legendre
/// transform of gamma -> psi_eps(|gamma|^2 - g^2) reduced to the radial variable.
/// Golden-section search on an expanding bracket, then bisection on the
/// stationarity condition |y| = 2 psi_eps'(rho^2 - g^2) rho.
double legendre(double y_norm, double g, const Penalty& penalty);

/// Closed form of l^eps at the maximizing rate for gradient magnitude p:
/// 2 psi_eps'(p^2 - g^2) p^2 - psi_eps(p^2 - g^2).
double legendre_on_policy(double grad_norm, double g, const Penalty& penalty);

}  // namespace switchctl
