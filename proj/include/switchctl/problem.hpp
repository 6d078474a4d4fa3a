#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace switchctl {

/// Point or vector in R^d, d <= 2, stored inline.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 2, 1>;
/// d x d matrix, d <= 2, stored inline.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, 2, 2>;

Vec make_point(std::initializer_list<double> coords);

enum class DomainKind { Interval, Rectangle, Disk };

/// Bounded convex domain. Interval and Rectangle are boxes; Disk is a ball in d = 2.
class Domain {
 public:
  static Domain interval(double lower, double upper);
  static Domain rectangle(const Vec& lower, const Vec& upper);
  static Domain disk(const Vec& center, double radius);

  DomainKind kind() const { return kind_; }
  int dim() const { return static_cast<int>(lower_.size()); }
  /// Bounding box. For boxes this is the domain itself.
  const Vec& lower() const { return lower_; }
  const Vec& upper() const { return upper_; }
  const Vec& center() const { return center_; }
  double radius() const { return radius_; }

  bool contains(const Vec& x) const;           // closed set
  bool contains_interior(const Vec& x) const;  // open set

 private:
  Domain() = default;
  DomainKind kind_ = DomainKind::Interval;
  Vec lower_, upper_, center_;
  double radius_ = 0.0;
};

enum class FunctionKind { Constant, Affine, Quadratic, CosineBump };

/// Catalog coefficient function. Parameters are plain numbers so a problem
/// round-trips through a config file without loss.
///
///   Constant:   value
///   Affine:     value + <slope, x - center>
///   Quadratic:  value + <slope, x - center> + sum_i curvature_i (x_i - center_i)^2
///   CosineBump: value + amplitude * (1 + cos(pi s)) / 2,  s = min(|x - center| / width, 1)
struct ScalarFunction {
  FunctionKind kind = FunctionKind::Constant;
  double value = 0.0;
  std::array<double, 2> slope{0.0, 0.0};
  std::array<double, 2> curvature{0.0, 0.0};
  std::array<double, 2> center{0.0, 0.0};
  double amplitude = 0.0;
  double width = 1.0;

  static ScalarFunction constant(double value);
  static ScalarFunction affine(double value, std::array<double, 2> slope,
                               std::array<double, 2> center = {0.0, 0.0});
  static ScalarFunction quadratic(double value, std::array<double, 2> slope,
                                  std::array<double, 2> curvature,
                                  std::array<double, 2> center = {0.0, 0.0});
  static ScalarFunction cosine_bump(double value, double amplitude,
                                    std::array<double, 2> center, double width);

  double operator()(const Vec& x) const;
  bool is_constant_zero() const;
};

/// Coefficients of one regime: a (symmetric, row-major d*d entries), b, c, h, g.
struct RegimeCoefficients {
  std::vector<ScalarFunction> diffusion;
  std::vector<ScalarFunction> drift;
  ScalarFunction discount;
  ScalarFunction running_cost;
  ScalarFunction control_cost;

  /// a = diffusion * I, b = 0, constant c, h, g.
  static RegimeCoefficients isotropic(int dim, double diffusion, double discount,
                                      double running_cost, double control_cost);

  int dim() const;
  Mat diffusion_at(const Vec& x) const;
  Vec drift_at(const Vec& x) const;
  bool diagonal_diffusion() const;
};

/// Switching costs theta(l, k) >= 0; the diagonal is unused.
struct SwitchingCosts {
  Eigen::MatrixXd theta;

  SwitchingCosts() = default;
  explicit SwitchingCosts(Eigen::MatrixXd matrix) : theta(std::move(matrix)) {}
  /// All off-diagonal entries equal to `cost`.
  static SwitchingCosts uniform(int regimes, double cost);

  int regimes() const { return static_cast<int>(theta.rows()); }
  double operator()(int from, int to) const { return theta(from, to); }
};

class ProblemSpec {
 public:
  ProblemSpec(Domain domain, std::vector<RegimeCoefficients> regimes, SwitchingCosts costs);

  const Domain& domain() const { return domain_; }
  int dim() const { return domain_.dim(); }
  int regimes() const { return static_cast<int>(regimes_.size()); }
  const RegimeCoefficients& regime(int l) const { return regimes_.at(static_cast<size_t>(l)); }
  const SwitchingCosts& costs() const { return costs_; }
  bool validated() const { return validated_; }
  bool diagonal_diffusion() const;

 private:
  friend ProblemSpec validated(ProblemSpec spec, int samples);
  Domain domain_;
  std::vector<RegimeCoefficients> regimes_;
  SwitchingCosts costs_;
  bool validated_ = false;
};

enum class IssueKind {
  ShapeMismatch,
  NegativeSwitchingCost,
  TriangleViolation,
  ZeroCostLoop,
  DegenerateEllipticity,
  NegativeCost,
  NonpositiveDiscount,
};

std::string_view to_string(IssueKind kind);

/// One violated hypothesis. Regime indices are zero-based.
///  TriangleViolation: regimes = (l1, l2, l3), lhs = theta(l1,l3), rhs = theta(l1,l2)+theta(l2,l3)
///  ZeroCostLoop:      regimes = closed cycle, first == last
///  coefficient kinds: regimes = {l}, lhs = offending sampled minimum
struct Issue {
  IssueKind kind;
  std::vector<int> regimes;
  double lhs = 0.0;
  double rhs = 0.0;
  std::string message;
};

struct CoefficientStats {
  double theta = 0.0;
  double min_discount = 0.0;
  double min_running_cost = 0.0;
  double min_control_cost = 0.0;
};

struct ValidationReport {
  std::vector<Issue> issues;
  std::optional<CoefficientStats> stats;

  bool passed() const { return issues.empty(); }
  std::vector<Issue> of_kind(IssueKind kind) const;
};

/// Checks nonnegativity, the triangle inequality over distinct triples and
/// absence of zero-cost cycles. Violations are report entries, never exceptions.
ValidationReport validate_switching_costs(const SwitchingCosts& costs, int regimes);

/// Samples the closed domain on a regular lattice (`samples` points per axis),
/// then refines each sampled minimum by compass search.
ValidationReport validate_coefficients(const ProblemSpec& spec, int samples = 64);

/// Both validations merged.
ValidationReport validate(const ProblemSpec& spec, int samples = 64);

/// Returns the spec marked validated; throws Error with the kind of the first issue otherwise.
ProblemSpec validated(ProblemSpec spec, int samples = 64);

struct SwitchChoice {
  double value;
  int regime;
};

/// M_l u = min_{k != l} values[k] + theta(l, k); lowest index wins ties.
/// Throws SingleRegime when only one regime exists.
SwitchChoice switching_operator(std::span<const double> values, const SwitchingCosts& costs,
                                int regime);

}  // namespace switchctl
