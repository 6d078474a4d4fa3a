#include "switchctl/hjb_limits.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "switchctl/error.hpp"
#include "switchctl/io.hpp"
#include "switchctl/penalty.hpp"

namespace switchctl {

void ContinuationParams::check() const {
  if (!(epsilon0 > 0.0) || !(delta0 > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "initial epsilon and delta must be positive");
  }
  if (!(shrink > 0.0 && shrink < 1.0)) throw Error(ErrorKind::InvalidArgument, "shrink must lie in (0, 1)");
  if (!(stop_threshold > 0.0)) throw Error(ErrorKind::InvalidArgument, "stop threshold must be positive");
  if (rung_cap < 2) throw Error(ErrorKind::InvalidArgument, "rung cap must be at least 2");
}

SolveParams ContinuationParams::solve_params(double epsilon, double delta) const {
  SolveParams p;
  p.epsilon = epsilon;
  p.delta = delta;
  p.relaxation = relaxation;
  p.max_iterations = max_iterations;
  p.tolerance = tolerance;
  p.method = method;
  return p;
}

bool ladder_stops(const std::vector<Rung>& rungs, double threshold) {
  if (rungs.size() < 2) return false;
  const double d = rungs.back().difference;
  const double before = rungs.size() >= 3 ? rungs[rungs.size() - 2].difference : 0.0;
  return d < threshold && d <= std::max(before, 1e-10);
}

namespace {

// Solves at (epsilon, delta) from the rung at (epsilon, from_delta). When
// Newton fails from the warm start, the delta step is split geometrically
// (up to `depth` times), and a cold start from the linear bound is the last
// resort.
SolveResult solve_rung(const ContinuationParams& params, double epsilon, double delta, double from_delta,
                       const Discretization& disc, const std::optional<RegimeField>& warm, int depth = 6) {
  const SolveParams p = params.solve_params(epsilon, delta);
  if (!warm) return solve_npds(p, disc);
  try {
    return solve_npds(p, disc, warm);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NoConvergence) throw;
  }
  if (depth > 0 && from_delta != delta) {
    try {
      const double mid = std::sqrt(delta * from_delta);
      const SolveResult half = solve_rung(params, epsilon, mid, from_delta, disc, warm, depth - 1);
      return solve_rung(params, epsilon, delta, mid, disc, half.u, depth - 1);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NoConvergence) throw;
    }
  }
  return solve_npds(p, disc);
}

}  // namespace

LadderResult continuation_delta(double epsilon, const ContinuationParams& params, const Discretization& disc,
                                const std::optional<RegimeField>& warm_start) {
  params.check();
  if (!(epsilon > 0.0)) throw Error(ErrorKind::InvalidArgument, "epsilon must be positive");
  LadderResult out;
  std::optional<RegimeField> warm = warm_start;
  double delta = params.delta0;
  for (int k = 0; k < params.rung_cap; ++k, delta *= params.shrink) {
    SolveResult res;
    try {
      res = solve_rung(params, epsilon, delta, k == 0 ? delta : delta / params.shrink, disc, warm);
    } catch (const Error& e) {
      // The first rung has nothing to fall back on.
      if (k == 0 || (e.kind() != ErrorKind::NoConvergence && e.kind() != ErrorKind::LinearSolveFailure)) throw;
      out.failure = e.what();
      break;
    }
    Rung rung{epsilon, delta, res.iterations, res.residual_sup, 0.0};
    if (!out.rungs.empty()) rung.difference = res.u.sup_distance(out.u);
    out.rungs.push_back(rung);
    out.u = std::move(res.u);
    if (k == 0) out.head = out.u;
    warm = out.u;
    // A single regime has no delta term: every rung is the same solve.
    if (disc.regimes() == 1 || ladder_stops(out.rungs, params.stop_threshold)) {
      out.certified = true;
      break;
    }
  }
  return out;
}

LadderResult continuation_epsilon(const ContinuationParams& params, const Discretization& disc) {
  params.check();
  LadderResult out;
  bool inner_ok = true;
  RegimeField head;
  double epsilon = params.epsilon0;
  for (int k = 0; k < params.rung_cap; ++k, epsilon *= params.shrink) {
    std::optional<RegimeField> warm;
    if (k > 0) warm = head;
    LadderResult inner;
    try {
      inner = continuation_delta(epsilon, params, disc, warm);
    } catch (const Error& e) {
      if (k == 0 || (e.kind() != ErrorKind::NoConvergence && e.kind() != ErrorKind::LinearSolveFailure)) throw;
      out.failure = e.what();
      break;
    }
    if (!inner.failure.empty()) {
      if (k == 0) throw Error(ErrorKind::NoConvergence, inner.failure);
      out.failure = inner.failure;
      break;
    }
    inner_ok = inner_ok && inner.certified;
    head = std::move(inner.head);
    Rung rung = inner.rungs.back();
    rung.iterations = 0;
    for (const auto& r : inner.rungs) rung.iterations += r.iterations;
    rung.difference = k > 0 ? inner.u.sup_distance(out.u) : 0.0;
    out.rungs.push_back(rung);
    out.inner.push_back(std::move(inner.rungs));
    if (k > 0) out.previous = std::move(out.u);
    out.u = std::move(inner.u);
    if (ladder_stops(out.rungs, params.stop_threshold)) {
      out.certified = inner_ok;
      break;
    }
  }
  return out;
}

void require_certified(const LadderResult& ladder, const std::string& what) {
  if (ladder.certified) return;
  if (!ladder.failure.empty()) {
    throw Error(ErrorKind::LadderStall, what + " ladder stopped after " + std::to_string(ladder.rungs.size()) +
                                            " rungs: " + ladder.failure);
  }
  throw Error(ErrorKind::LadderStall, what + " ladder hit the rung cap after " +
                                          std::to_string(ladder.rungs.size()) + " rungs");
}

// ---------------------------------------------------------------------------
// Residuals

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// u_l - M_l u at interior nodes; -inf for a single regime.
RegimeField switching_gap(const RegimeField& u, const Discretization& disc) {
  const int m = disc.regimes();
  RegimeField b(m, disc.grid().size());
  std::vector<double> values(static_cast<size_t>(m));
  for (int p : disc.grid().interior()) {
    for (int k = 0; k < m; ++k) values[static_cast<size_t>(k)] = u[k](p);
    for (int l = 0; l < m; ++l) {
      b[l](p) = m == 1 ? kNegInf : u[l](p) - switching_operator(values, disc.spec().costs(), l).value;
    }
  }
  return b;
}

RegimeField linear_part(const RegimeField& u, const Discretization& disc) {
  RegimeField a(disc.regimes(), disc.grid().size());
  for (int l = 0; l < disc.regimes(); ++l) {
    const Eigen::VectorXd du = disc.apply_generator(u[l], l);
    for (int p : disc.grid().interior()) {
      a[l](p) = disc.discount(l)(p) * u[l](p) - du(p) - disc.running_cost(l)(p);
    }
  }
  return a;
}

void check_field(const RegimeField& u, const Discretization& disc) {
  if (u.regimes() != disc.regimes() || u.nodes() != disc.grid().size()) {
    throw Error(ErrorKind::InvalidArgument, "field shape does not match the discretization");
  }
}

void summarize(ComplementarityReport& rep, const Discretization& disc) {
  rep.sup_max = kNegInf;
  rep.sup_neg_max = kNegInf;
  rep.gradient_excess = kNegInf;
  for (int l = 0; l < disc.regimes(); ++l) {
    for (int p : disc.grid().interior()) {
      double v = std::max(rep.a[l](p), rep.b[l](p));
      if (rep.gradient) {
        v = std::max(v, (*rep.gradient)[l](p));
        rep.gradient_excess = std::max(rep.gradient_excess, (*rep.gradient)[l](p));
      }
      rep.sup_max = std::max(rep.sup_max, v);
      rep.sup_neg_max = std::max(rep.sup_neg_max, -v);
    }
  }
  if (disc.grid().interior().empty()) rep.sup_max = rep.sup_neg_max = 0.0;
  if (!rep.gradient || disc.grid().interior().empty()) rep.gradient_excess = 0.0;
}

}  // namespace

ComplementarityReport residual_pc1(const RegimeField& u_eps, double epsilon, const Discretization& disc) {
  check_field(u_eps, disc);
  const Penalty pe(epsilon);
  ComplementarityReport rep;
  rep.a = linear_part(u_eps, disc);
  for (int l = 0; l < disc.regimes(); ++l) {
    const Eigen::VectorXd grad = disc.gradient_norm(u_eps[l]);
    const Eigen::VectorXd& g = disc.control_cost(l);
    for (int p : disc.grid().interior()) rep.a[l](p) += pe(grad(p) * grad(p) - g(p) * g(p));
  }
  rep.b = switching_gap(u_eps, disc);
  summarize(rep, disc);
  return rep;
}

ComplementarityReport residual_esd5(const RegimeField& u, const Discretization& disc) {
  check_field(u, disc);
  ComplementarityReport rep;
  rep.a = linear_part(u, disc);
  rep.b = switching_gap(u, disc);
  RegimeField grad(disc.regimes(), disc.grid().size());
  for (int l = 0; l < disc.regimes(); ++l) {
    const Eigen::VectorXd norm = disc.gradient_norm(u[l]);
    for (int p : disc.grid().interior()) grad[l](p) = norm(p) - disc.control_cost(l)(p);
  }
  rep.gradient = std::move(grad);
  summarize(rep, disc);
  return rep;
}

double certification_tolerance(const Grid& grid, double c) { return std::max(1e-3, c * grid.h()); }

// ---------------------------------------------------------------------------
// Regions

std::string_view to_string(RegionLabel label) {
  switch (label) {
    case RegionLabel::Continuation: return "continuation";
    case RegionLabel::Switching: return "switching";
    case RegionLabel::GradientBinding: return "gradient_binding";
  }
  return "unknown";
}

int RegionMap::count(int l, RegionLabel which) const {
  const auto& row = labels[static_cast<size_t>(l)];
  return static_cast<int>(std::count(row.begin(), row.end(), which));
}

RegionMap extract_regions(const RegimeField& u_eps, const Discretization& disc, double tol) {
  check_field(u_eps, disc);
  const int m = disc.regimes();
  const int n = disc.grid().size();
  const auto& theta = disc.spec().costs();
  RegionMap map;
  map.regimes = m;
  map.tolerance = tol;
  map.labels.assign(static_cast<size_t>(m), std::vector<RegionLabel>(static_cast<size_t>(n), RegionLabel::Continuation));
  map.switching.assign(static_cast<size_t>(m), std::vector<bool>(static_cast<size_t>(n), false));
  map.binding.assign(static_cast<size_t>(m), std::vector<bool>(static_cast<size_t>(n), false));
  map.targets.assign(static_cast<size_t>(m), std::vector<std::vector<int>>(static_cast<size_t>(n)));
  const RegimeField gap = switching_gap(u_eps, disc);
  for (int l = 0; l < m; ++l) {
    const auto sl = static_cast<size_t>(l);
    const Eigen::VectorXd grad = disc.gradient_norm(u_eps[l]);
    for (int p : disc.grid().interior()) {
      const auto sp = static_cast<size_t>(p);
      const bool sw = gap[l](p) >= -tol;
      const bool gb = grad(p) - disc.control_cost(l)(p) >= -tol;
      map.switching[sl][sp] = sw;
      map.binding[sl][sp] = gb;
      if (sw) {
        map.labels[sl][sp] = RegionLabel::Switching;
        for (int k = 0; k < m; ++k) {
          if (k != l && std::abs(u_eps[l](p) - u_eps[k](p) - theta(l, k)) <= tol) {
            map.targets[sl][sp].push_back(k);
          }
        }
      } else if (gb) {
        map.labels[sl][sp] = RegionLabel::GradientBinding;
      }
    }
  }
  return map;
}

DecompositionReport check_region_decomposition(const RegionMap& regions, const RegimeField& u_eps,
                                               const ProblemSpec& spec, double tol) {
  if (u_eps.regimes() != regions.regimes || spec.regimes() != regions.regimes) {
    throw Error(ErrorKind::InvalidArgument, "region map and field disagree on the regime count");
  }
  const auto& theta = spec.costs();
  const int m = regions.regimes;
  DecompositionReport rep;
  for (int l = 0; l < m; ++l) {
    const auto& sw = regions.switching[static_cast<size_t>(l)];
    for (int p = 0; p < static_cast<int>(sw.size()); ++p) {
      if (!sw[static_cast<size_t>(p)]) continue;
      ++rep.switching_nodes;
      bool found = false;
      bool coherent = true;
      for (int k = 0; k < m; ++k) {
        if (k == l) continue;
        const double gap = u_eps[l](p) - u_eps[k](p) - theta(l, k);
        if (gap > tol) coherent = false;
        if (std::abs(gap) <= tol && !regions.switching[static_cast<size_t>(k)][static_cast<size_t>(p)]) found = true;
      }
      if (!found) rep.violations.push_back({l, p});
      if (!coherent) rep.incoherent.push_back({l, p});
    }
  }
  return rep;
}

void write_regions_csv(std::ostream& out, const RegionMap& regions, const Grid& grid) {
  out << (grid.dim() == 1 ? "x1" : "x1,x2") << ",regime,label,targets\n";
  for (int l = 0; l < regions.regimes; ++l) {
    for (int p : grid.interior()) {
      const Vec x = grid.coordinate(p);
      for (int k = 0; k < grid.dim(); ++k) out << format_double(x(k)) << ',';
      out << l + 1 << ',' << to_string(regions.label(l, p)) << ',';
      const auto& t = regions.targets[static_cast<size_t>(l)][static_cast<size_t>(p)];
      for (size_t i = 0; i < t.size(); ++i) out << (i ? " " : "") << t[i] + 1;
      out << '\n';
    }
  }
}

}  // namespace switchctl
