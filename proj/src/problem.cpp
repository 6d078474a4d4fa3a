#include "switchctl/problem.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>

#include "switchctl/error.hpp"

namespace switchctl {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::SingleRegime: return "SingleRegime";
    case ErrorKind::DegenerateEllipticity: return "DegenerateEllipticity";
    case ErrorKind::NegativeCost: return "NegativeCost";
    case ErrorKind::NonpositiveDiscount: return "NonpositiveDiscount";
    case ErrorKind::NotValidated: return "NotValidated";
    case ErrorKind::OutOfDomain: return "OutOfDomain";
    case ErrorKind::LinearSolveFailure: return "LinearSolveFailure";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::LadderStall: return "LadderStall";
    case ErrorKind::ChatterGuard: return "ChatterGuard";
    case ErrorKind::InadmissibleJump: return "InadmissibleJump";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

std::string_view to_string(IssueKind kind) {
  switch (kind) {
    case IssueKind::ShapeMismatch: return "ShapeMismatch";
    case IssueKind::NegativeSwitchingCost: return "NegativeSwitchingCost";
    case IssueKind::TriangleViolation: return "TriangleViolation";
    case IssueKind::ZeroCostLoop: return "ZeroCostLoop";
    case IssueKind::DegenerateEllipticity: return "DegenerateEllipticity";
    case IssueKind::NegativeCost: return "NegativeCost";
    case IssueKind::NonpositiveDiscount: return "NonpositiveDiscount";
  }
  return "Unknown";
}

Vec make_point(std::initializer_list<double> coords) {
  Vec x(static_cast<Eigen::Index>(coords.size()));
  Eigen::Index i = 0;
  for (double c : coords) x(i++) = c;
  return x;
}

// ---------------------------------------------------------------------------
// Domain

Domain Domain::interval(double lower, double upper) {
  if (!(lower < upper) || !std::isfinite(lower) || !std::isfinite(upper)) {
    throw Error(ErrorKind::InvalidArgument, "interval requires finite lower < upper");
  }
  Domain d;
  d.kind_ = DomainKind::Interval;
  d.lower_ = make_point({lower});
  d.upper_ = make_point({upper});
  d.center_ = make_point({0.5 * (lower + upper)});
  return d;
}

Domain Domain::rectangle(const Vec& lower, const Vec& upper) {
  if (lower.size() != 2 || upper.size() != 2) {
    throw Error(ErrorKind::InvalidArgument, "rectangle requires two-dimensional corners");
  }
  for (int k = 0; k < 2; ++k) {
    if (!(lower(k) < upper(k)) || !std::isfinite(lower(k)) || !std::isfinite(upper(k))) {
      throw Error(ErrorKind::InvalidArgument, "rectangle requires finite lower < upper on every axis");
    }
  }
  Domain d;
  d.kind_ = DomainKind::Rectangle;
  d.lower_ = lower;
  d.upper_ = upper;
  d.center_ = 0.5 * (lower + upper);
  return d;
}

Domain Domain::disk(const Vec& center, double radius) {
  if (center.size() != 2) throw Error(ErrorKind::InvalidArgument, "disk requires a 2D center");
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw Error(ErrorKind::InvalidArgument, "disk requires a positive radius");
  }
  Domain d;
  d.kind_ = DomainKind::Disk;
  d.center_ = center;
  d.radius_ = radius;
  d.lower_ = center.array() - radius;
  d.upper_ = center.array() + radius;
  return d;
}

bool Domain::contains(const Vec& x) const {
  if (x.size() != lower_.size()) return false;
  if (kind_ == DomainKind::Disk) return (x - center_).norm() <= radius_;
  return ((x.array() >= lower_.array()) && (x.array() <= upper_.array())).all();
}

bool Domain::contains_interior(const Vec& x) const {
  if (x.size() != lower_.size()) return false;
  if (kind_ == DomainKind::Disk) return (x - center_).norm() < radius_;
  return ((x.array() > lower_.array()) && (x.array() < upper_.array())).all();
}

// ---------------------------------------------------------------------------
// Catalog functions

ScalarFunction ScalarFunction::constant(double value) {
  ScalarFunction f;
  f.kind = FunctionKind::Constant;
  f.value = value;
  return f;
}

ScalarFunction ScalarFunction::affine(double value, std::array<double, 2> slope,
                                      std::array<double, 2> center) {
  ScalarFunction f;
  f.kind = FunctionKind::Affine;
  f.value = value;
  f.slope = slope;
  f.center = center;
  return f;
}

ScalarFunction ScalarFunction::quadratic(double value, std::array<double, 2> slope,
                                         std::array<double, 2> curvature,
                                         std::array<double, 2> center) {
  ScalarFunction f;
  f.kind = FunctionKind::Quadratic;
  f.value = value;
  f.slope = slope;
  f.curvature = curvature;
  f.center = center;
  return f;
}

ScalarFunction ScalarFunction::cosine_bump(double value, double amplitude,
                                           std::array<double, 2> center, double width) {
  if (!(width > 0.0)) throw Error(ErrorKind::InvalidArgument, "cosine bump width must be positive");
  ScalarFunction f;
  f.kind = FunctionKind::CosineBump;
  f.value = value;
  f.amplitude = amplitude;
  f.center = center;
  f.width = width;
  return f;
}

double ScalarFunction::operator()(const Vec& x) const {
  const auto d = static_cast<size_t>(x.size());
  switch (kind) {
    case FunctionKind::Constant:
      return value;
    case FunctionKind::Affine:
    case FunctionKind::Quadratic: {
      double out = value;
      for (size_t i = 0; i < d; ++i) {
        const double dx = x(static_cast<Eigen::Index>(i)) - center[i];
        out += slope[i] * dx;
        if (kind == FunctionKind::Quadratic) out += curvature[i] * dx * dx;
      }
      return out;
    }
    case FunctionKind::CosineBump: {
      double r2 = 0.0;
      for (size_t i = 0; i < d; ++i) {
        const double dx = x(static_cast<Eigen::Index>(i)) - center[i];
        r2 += dx * dx;
      }
      const double s = std::min(std::sqrt(r2) / width, 1.0);
      return value + amplitude * 0.5 * (1.0 + std::cos(std::numbers::pi * s));
    }
  }
  return value;
}

bool ScalarFunction::is_constant_zero() const {
  return kind == FunctionKind::Constant && value == 0.0;
}

// ---------------------------------------------------------------------------
// Regime coefficients

RegimeCoefficients RegimeCoefficients::isotropic(int dim, double diffusion, double discount,
                                                 double running_cost, double control_cost) {
  if (dim < 1 || dim > 2) throw Error(ErrorKind::InvalidArgument, "dimension must be 1 or 2");
  RegimeCoefficients r;
  const auto n = static_cast<size_t>(dim);
  r.diffusion.assign(n * n, ScalarFunction::constant(0.0));
  for (size_t i = 0; i < n; ++i) r.diffusion[i * n + i] = ScalarFunction::constant(diffusion);
  r.drift.assign(n, ScalarFunction::constant(0.0));
  r.discount = ScalarFunction::constant(discount);
  r.running_cost = ScalarFunction::constant(running_cost);
  r.control_cost = ScalarFunction::constant(control_cost);
  return r;
}

int RegimeCoefficients::dim() const { return static_cast<int>(drift.size()); }

Mat RegimeCoefficients::diffusion_at(const Vec& x) const {
  const int d = dim();
  Mat a(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      const double v = diffusion[static_cast<size_t>(i * d + j)](x);
      a(i, j) = v;
      a(j, i) = v;
    }
  }
  return a;
}

Vec RegimeCoefficients::drift_at(const Vec& x) const {
  Vec b(dim());
  for (int i = 0; i < dim(); ++i) b(i) = drift[static_cast<size_t>(i)](x);
  return b;
}

bool RegimeCoefficients::diagonal_diffusion() const {
  const int d = dim();
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      if (i != j && !diffusion[static_cast<size_t>(i * d + j)].is_constant_zero()) return false;
    }
  }
  return true;
}

SwitchingCosts SwitchingCosts::uniform(int regimes, double cost) {
  Eigen::MatrixXd t = Eigen::MatrixXd::Constant(regimes, regimes, cost);
  t.diagonal().setZero();
  return SwitchingCosts(std::move(t));
}

// ---------------------------------------------------------------------------
// ProblemSpec

ProblemSpec::ProblemSpec(Domain domain, std::vector<RegimeCoefficients> regimes,
                         SwitchingCosts costs)
    : domain_(std::move(domain)), regimes_(std::move(regimes)), costs_(std::move(costs)) {
  if (regimes_.empty()) throw Error(ErrorKind::InvalidArgument, "at least one regime is required");
  const int d = domain_.dim();
  for (const auto& r : regimes_) {
    if (r.dim() != d || r.diffusion.size() != static_cast<size_t>(d * d)) {
      throw Error(ErrorKind::InvalidArgument, "regime coefficient dimension does not match domain");
    }
  }
  if (costs_.theta.rows() != this->regimes() || costs_.theta.cols() != this->regimes()) {
    throw Error(ErrorKind::InvalidArgument, "switching cost matrix must be m x m");
  }
}

bool ProblemSpec::diagonal_diffusion() const {
  return std::all_of(regimes_.begin(), regimes_.end(),
                     [](const RegimeCoefficients& r) { return r.diagonal_diffusion(); });
}

std::vector<Issue> ValidationReport::of_kind(IssueKind kind) const {
  std::vector<Issue> out;
  std::copy_if(issues.begin(), issues.end(), std::back_inserter(out),
               [kind](const Issue& i) { return i.kind == kind; });
  return out;
}

// ---------------------------------------------------------------------------
// Switching cost validation

namespace {

std::string cycle_text(const std::vector<int>& cycle) {
  std::ostringstream os;
  for (size_t i = 0; i < cycle.size(); ++i) {
    if (i) os << "->";
    os << cycle[i] + 1;
  }
  return os.str();
}

// Elementary cycles of a small digraph, each reported once starting from its
// smallest vertex.
std::vector<std::vector<int>> elementary_cycles(const std::vector<std::vector<int>>& adj) {
  const int n = static_cast<int>(adj.size());
  std::vector<std::vector<int>> cycles;
  std::vector<int> path;
  std::vector<bool> on_path(static_cast<size_t>(n), false);
  std::function<void(int, int)> dfs = [&](int start, int v) {
    for (int w : adj[static_cast<size_t>(v)]) {
      if (w == start) {
        auto c = path;
        c.push_back(start);
        cycles.push_back(std::move(c));
      } else if (w > start && !on_path[static_cast<size_t>(w)]) {
        on_path[static_cast<size_t>(w)] = true;
        path.push_back(w);
        dfs(start, w);
        path.pop_back();
        on_path[static_cast<size_t>(w)] = false;
      }
    }
  };
  for (int s = 0; s < n; ++s) {
    path = {s};
    on_path[static_cast<size_t>(s)] = true;
    dfs(s, s);
    on_path[static_cast<size_t>(s)] = false;
  }
  return cycles;
}

}  // namespace

ValidationReport validate_switching_costs(const SwitchingCosts& costs, int m) {
  ValidationReport report;
  if (m < 1 || costs.theta.rows() != m || costs.theta.cols() != m) {
    report.issues.push_back({IssueKind::ShapeMismatch, {}, 0.0, 0.0,
                             "switching cost matrix must be m x m with m >= 1"});
    return report;
  }
  const auto& t = costs.theta;
  for (int l = 0; l < m; ++l) {
    for (int k = 0; k < m; ++k) {
      if (l != k && !(t(l, k) >= 0.0)) {
        std::ostringstream os;
        os << "theta(" << l + 1 << "," << k + 1 << ") = " << t(l, k) << " < 0";
        report.issues.push_back({IssueKind::NegativeSwitchingCost, {l, k}, t(l, k), 0.0, os.str()});
      }
    }
  }
  for (int l1 = 0; l1 < m; ++l1) {
    for (int l2 = 0; l2 < m; ++l2) {
      for (int l3 = 0; l3 < m; ++l3) {
        if (l1 == l2 || l2 == l3 || l1 == l3) continue;
        const double lhs = t(l1, l3);
        const double rhs = t(l1, l2) + t(l2, l3);
        if (lhs > rhs) {
          std::ostringstream os;
          os << "(" << l1 + 1 << "," << l2 + 1 << "," << l3 + 1 << "): " << lhs << " > " << rhs;
          report.issues.push_back({IssueKind::TriangleViolation, {l1, l2, l3}, lhs, rhs, os.str()});
        }
      }
    }
  }
  std::vector<std::vector<int>> zero_edges(static_cast<size_t>(m));
  for (int l = 0; l < m; ++l) {
    for (int k = 0; k < m; ++k) {
      if (l != k && t(l, k) == 0.0) zero_edges[static_cast<size_t>(l)].push_back(k);
    }
  }
  for (auto& cycle : elementary_cycles(zero_edges)) {
    report.issues.push_back({IssueKind::ZeroCostLoop, cycle, 0.0, 0.0, cycle_text(cycle)});
  }
  return report;
}

// ---------------------------------------------------------------------------
// Coefficient validation

namespace {

double min_eigenvalue(const Mat& a) {
  if (a.rows() == 1) return a(0, 0);
  const double tr = a(0, 0) + a(1, 1);
  const double diff = a(0, 0) - a(1, 1);
  return 0.5 * (tr - std::hypot(diff, 2.0 * a(0, 1)));
}

std::vector<Vec> lattice(const Domain& domain, int samples) {
  const int d = domain.dim();
  const int n = std::max(samples, 1);
  auto coord = [&](int axis, int i) {
    if (n == 1) return 0.5 * (domain.lower()(axis) + domain.upper()(axis));
    return domain.lower()(axis) +
           (domain.upper()(axis) - domain.lower()(axis)) * static_cast<double>(i) / (n - 1);
  };
  std::vector<Vec> pts;
  if (d == 1) {
    for (int i = 0; i < n; ++i) pts.push_back(make_point({coord(0, i)}));
  } else {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        Vec x = make_point({coord(0, i), coord(1, j)});
        if (domain.kind() == DomainKind::Disk && !domain.contains(x)) {
          // Pull boundary-straddling lattice points onto the circle.
          const Vec r = x - domain.center();
          x = domain.center() + r * (domain.radius() / r.norm());
          if (!domain.contains(x)) continue;
        }
        pts.push_back(x);
      }
    }
  }
  if (pts.empty()) pts.push_back(domain.center());
  return pts;
}

Vec project(const Domain& domain, Vec x) {
  if (domain.kind() == DomainKind::Disk) {
    const Vec r = x - domain.center();
    const double n = r.norm();
    if (n > domain.radius()) x = domain.center() + r * (domain.radius() / n);
    return x;
  }
  return x.cwiseMax(domain.lower()).cwiseMin(domain.upper());
}

// Lattice minimum followed by compass search from the best lattice point.
double sampled_minimum(const Domain& domain, const std::vector<Vec>& pts, int samples,
                       const std::function<double(const Vec&)>& f) {
  size_t best = 0;
  double fmin = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < pts.size(); ++i) {
    const double v = f(pts[i]);
    if (v < fmin) {
      fmin = v;
      best = i;
    }
  }
  Vec x = pts[best];
  const double diameter = (domain.upper() - domain.lower()).norm();
  double step = diameter / std::max(samples - 1, 1);
  const double floor = 1e-12 * diameter;
  const int d = domain.dim();
  while (step > floor) {
    bool improved = false;
    for (int axis = 0; axis < d && !improved; ++axis) {
      for (double sign : {1.0, -1.0}) {
        Vec y = x;
        y(axis) += sign * step;
        y = project(domain, y);
        const double v = f(y);
        if (v < fmin) {
          fmin = v;
          x = y;
          improved = true;
          break;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  return fmin;
}

}  // namespace

ValidationReport validate_coefficients(const ProblemSpec& spec, int samples) {
  if (samples < 1) throw Error(ErrorKind::InvalidArgument, "samples must be >= 1");
  ValidationReport report;
  const auto pts = lattice(spec.domain(), samples);
  CoefficientStats stats{std::numeric_limits<double>::infinity(),
                         std::numeric_limits<double>::infinity(),
                         std::numeric_limits<double>::infinity(),
                         std::numeric_limits<double>::infinity()};
  for (int l = 0; l < spec.regimes(); ++l) {
    const auto& r = spec.regime(l);
    const double theta = sampled_minimum(spec.domain(), pts, samples,
                                         [&](const Vec& x) { return min_eigenvalue(r.diffusion_at(x)); });
    const double cmin = sampled_minimum(spec.domain(), pts, samples,
                                        [&](const Vec& x) { return r.discount(x); });
    const double hmin = sampled_minimum(spec.domain(), pts, samples,
                                        [&](const Vec& x) { return r.running_cost(x); });
    const double gmin = sampled_minimum(spec.domain(), pts, samples,
                                        [&](const Vec& x) { return r.control_cost(x); });
    stats.theta = std::min(stats.theta, theta);
    stats.min_discount = std::min(stats.min_discount, cmin);
    stats.min_running_cost = std::min(stats.min_running_cost, hmin);
    stats.min_control_cost = std::min(stats.min_control_cost, gmin);
    const std::string tag = "regime " + std::to_string(l + 1) + ": ";
    if (!(theta > 0.0)) {
      report.issues.push_back({IssueKind::DegenerateEllipticity, {l}, theta, 0.0,
                               tag + "min eigenvalue of a = " + std::to_string(theta)});
    }
    if (!(cmin > 0.0)) {
      report.issues.push_back({IssueKind::NonpositiveDiscount, {l}, cmin, 0.0,
                               tag + "min discount = " + std::to_string(cmin)});
    }
    if (!(hmin >= 0.0)) {
      report.issues.push_back({IssueKind::NegativeCost, {l}, hmin, 0.0,
                               tag + "min running cost = " + std::to_string(hmin)});
    }
    if (!(gmin >= 0.0)) {
      report.issues.push_back({IssueKind::NegativeCost, {l}, gmin, 0.0,
                               tag + "min control cost = " + std::to_string(gmin)});
    }
  }
  report.stats = stats;
  return report;
}

ValidationReport validate(const ProblemSpec& spec, int samples) {
  ValidationReport report = validate_switching_costs(spec.costs(), spec.regimes());
  ValidationReport coeff = validate_coefficients(spec, samples);
  report.issues.insert(report.issues.end(), coeff.issues.begin(), coeff.issues.end());
  report.stats = coeff.stats;
  return report;
}

ProblemSpec validated(ProblemSpec spec, int samples) {
  const ValidationReport report = validate(spec, samples);
  if (!report.passed()) {
    const Issue& first = report.issues.front();
    ErrorKind kind = ErrorKind::InvalidArgument;
    switch (first.kind) {
      case IssueKind::DegenerateEllipticity: kind = ErrorKind::DegenerateEllipticity; break;
      case IssueKind::NegativeCost: kind = ErrorKind::NegativeCost; break;
      case IssueKind::NonpositiveDiscount: kind = ErrorKind::NonpositiveDiscount; break;
      default: break;
    }
    throw Error(kind, std::string(to_string(first.kind)) + " " + first.message);
  }
  spec.validated_ = true;
  return spec;
}

SwitchChoice switching_operator(std::span<const double> values, const SwitchingCosts& costs,
                                int regime) {
  const int m = static_cast<int>(values.size());
  if (m < 2) throw Error(ErrorKind::SingleRegime, "switching operator needs at least two regimes");
  if (regime < 0 || regime >= m) throw Error(ErrorKind::InvalidArgument, "regime index out of range");
  SwitchChoice best{std::numeric_limits<double>::infinity(), -1};
  for (int k = 0; k < m; ++k) {
    if (k == regime) continue;
    const double v = values[static_cast<size_t>(k)] + costs(regime, k);
    if (v < best.value) best = {v, k};
  }
  return best;
}

}  // namespace switchctl
