#include "switchctl/penalty.hpp"

#include <algorithm>
#include <cmath>

#include "switchctl/error.hpp"

namespace switchctl {

double phi(double t) {
  if (t <= 0.0) return 0.0;
  if (t < 2.0) return 0.25 * t * t;
  return t - 1.0;
}

double phi_prime(double t) {
  if (t <= 0.0) return 0.0;
  if (t < 2.0) return 0.5 * t;
  return 1.0;
}

Penalty::Penalty(double epsilon) : epsilon_(epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw Error(ErrorKind::InvalidArgument, "penalty parameter must be positive");
  }
}

namespace {

// Stationarity residual of rho -> rho*y - psi(rho^2 - g^2); nonincreasing in rho.
double slope(double rho, double y, double g, const Penalty& p) {
  return y - 2.0 * p.derivative(rho * rho - g * g) * rho;
}

}  // namespace

double legendre(double y_norm, double g, const Penalty& penalty) {
  if (!(y_norm >= 0.0) || !(g >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "legendre requires y_norm >= 0 and g >= 0");
  }
  auto objective = [&](double rho) { return rho * y_norm - penalty(rho * rho - g * g); };

  double hi = std::max(g, 1.0) + 0.5 * penalty.epsilon() * y_norm + 10.0;
  // The objective is concave in rho on [0, inf) past the inactive zone; keep
  // expanding while the right end still climbs.
  while (slope(hi, y_norm, g, penalty) > 0.0) hi *= 2.0;

  // Golden section on [0, hi].
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = 0.0;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = objective(c);
  double fd = objective(d);
  for (int it = 0; it < 200 && (b - a) > 1e-10 * (1.0 + b); ++it) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = objective(d);
    }
  }
  // The objective is concave, so its derivative changes sign once. Refine by
  // bisection on the stationarity condition, starting from the golden bracket
  // when it straddles the root.
  double lo = a;
  double up = b;
  if (slope(lo, y_norm, g, penalty) < 0.0) lo = 0.0;
  if (slope(up, y_norm, g, penalty) > 0.0) up = hi;
  for (int it = 0; it < 200 && up - lo > 1e-15 * (1.0 + up); ++it) {
    const double mid = 0.5 * (lo + up);
    if (slope(mid, y_norm, g, penalty) > 0.0) {
      lo = mid;
    } else {
      up = mid;
    }
  }
  return std::max(objective(0.5 * (lo + up)), 0.0);
}

double legendre_on_policy(double grad_norm, double g, const Penalty& penalty) {
  if (!(grad_norm >= 0.0)) throw Error(ErrorKind::InvalidArgument, "grad_norm must be >= 0");
  const double t = grad_norm * grad_norm - g * g;
  return 2.0 * penalty.derivative(t) * grad_norm * grad_norm - penalty(t);
}

}  // namespace switchctl
