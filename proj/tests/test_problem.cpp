#include <doctest.h>

#include <vector>

#include "fixtures.hpp"
#include "switchctl/error.hpp"
#include "switchctl/problem.hpp"

using namespace switchctl;
using switchctl::testing::Rng;

namespace {

SwitchingCosts costs_of(std::vector<std::vector<double>> rows) {
  const int m = static_cast<int>(rows.size());
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) t(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
  return SwitchingCosts(t);
}

ProblemSpec unit_square(RegimeCoefficients r) {
  return ProblemSpec(Domain::rectangle(make_point({-1, -1}), make_point({1, 1})), {r},
                     SwitchingCosts::uniform(1, 0.0));
}

}  // namespace

TEST_CASE("switching costs: symmetric positive pass") {
  auto rep = validate_switching_costs(costs_of({{0, 1}, {1, 0}}), 2);
  CHECK(rep.passed());
}

TEST_CASE("switching costs: zero loop reported as a closed cycle") {
  auto rep = validate_switching_costs(costs_of({{0, 0}, {0, 0}}), 2);
  auto loops = rep.of_kind(IssueKind::ZeroCostLoop);
  REQUIRE(loops.size() == 1);
  CHECK(loops[0].regimes == std::vector<int>{0, 1, 0});
  CHECK(rep.of_kind(IssueKind::TriangleViolation).empty());
}

TEST_CASE("switching costs: triangle violation 5 > 2") {
  auto rep = validate_switching_costs(costs_of({{0, 1, 5}, {1, 0, 1}, {1, 1, 0}}), 3);
  REQUIRE(rep.issues.size() == 1);
  const Issue& is = rep.issues[0];
  CHECK(is.kind == IssueKind::TriangleViolation);
  CHECK(is.regimes == std::vector<int>{0, 1, 2});
  CHECK(is.lhs == 5.0);
  CHECK(is.rhs == 2.0);
}

TEST_CASE("switching costs: negative entry and shape mismatch") {
  CHECK_FALSE(validate_switching_costs(costs_of({{0, -1}, {1, 0}}), 2)
                  .of_kind(IssueKind::NegativeSwitchingCost).empty());
  CHECK_FALSE(validate_switching_costs(costs_of({{0, 1}, {1, 0}}), 3).of_kind(IssueKind::ShapeMismatch).empty());
}

TEST_CASE("switching costs: positive off-diagonals never form a zero loop") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int m = 2 + rng.below(4);
    Eigen::MatrixXd t(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) t(i, j) = i == j ? 0.0 : rng.uniform(1e-3, 3.0);
    CHECK(validate_switching_costs(SwitchingCosts(t), m).of_kind(IssueKind::ZeroCostLoop).empty());
  }
}

TEST_CASE("switching costs: zero edges forming a 3-cycle") {
  auto rep = validate_switching_costs(costs_of({{0, 0, 1}, {1, 0, 0}, {0, 1, 0}}), 3);
  auto loops = rep.of_kind(IssueKind::ZeroCostLoop);
  REQUIRE(loops.size() == 1);
  CHECK(loops[0].regimes.size() == 4);
  CHECK(loops[0].regimes.front() == loops[0].regimes.back());
}

TEST_CASE("coefficients: constant identity data passes with theta 1") {
  auto rep = validate_coefficients(unit_square(RegimeCoefficients::isotropic(2, 1.0, 1.0, 1.0, 1.0)));
  CHECK(rep.passed());
  REQUIRE(rep.stats.has_value());
  CHECK(rep.stats->theta == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(rep.stats->min_discount == 1.0);
}

TEST_CASE("coefficients: diag(x1^2, 1) degenerates at the origin") {
  auto r = RegimeCoefficients::isotropic(2, 1.0, 1.0, 1.0, 1.0);
  r.diffusion[0] = ScalarFunction::quadratic(0.0, {0, 0}, {1, 0});
  auto spec = unit_square(r);
  auto rep = validate_coefficients(spec);
  CHECK_FALSE(rep.of_kind(IssueKind::DegenerateEllipticity).empty());
  try {
    validated(spec);
    FAIL("expected DegenerateEllipticity");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateEllipticity);
  }
}

TEST_CASE("coefficients: zero discount and negative cost") {
  auto spec = unit_square(RegimeCoefficients::isotropic(2, 1.0, 0.0, 1.0, 1.0));
  CHECK_FALSE(validate_coefficients(spec).of_kind(IssueKind::NonpositiveDiscount).empty());
  CHECK_THROWS_AS(validated(spec), Error);

  auto neg = unit_square(RegimeCoefficients::isotropic(2, 1.0, 1.0, -0.5, 1.0));
  CHECK_FALSE(validate_coefficients(neg).of_kind(IssueKind::NegativeCost).empty());
}

TEST_CASE("validated flag") {
  auto r = RegimeCoefficients::isotropic(1, 1.0, 1.0, 1.0, 1.0);
  ProblemSpec raw(Domain::interval(0, 1), {r}, SwitchingCosts::uniform(1, 0.0));
  CHECK_FALSE(raw.validated());
  CHECK(validated(raw).validated());
}

TEST_CASE("switching operator examples") {
  {
    std::vector<double> v{2, 3};
    auto s = switching_operator(v, costs_of({{0, 0.5}, {0.5, 0}}), 0);
    CHECK(s.value == 3.5);
    CHECK(s.regime == 1);
  }
  {
    std::vector<double> v{0, 0, 0};
    auto s = switching_operator(v, costs_of({{0, 1, 1}, {1, 0, 1}, {1, 1, 0}}), 0);
    CHECK(s.value == 1.0);
    CHECK(s.regime == 1);
  }
  {
    std::vector<double> v{5, 1, 4};
    auto s = switching_operator(v, costs_of({{0, 1, 1}, {2, 0, 0.5}, {1, 1, 0}}), 1);
    CHECK(s.value == 4.5);
    CHECK(s.regime == 2);
  }
}

TEST_CASE("switching operator with one regime") {
  std::vector<double> v{1.0};
  try {
    switching_operator(v, SwitchingCosts::uniform(1, 0.0), 0);
    FAIL("expected SingleRegime");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SingleRegime);
  }
}

TEST_CASE("switching operator: monotone and a lower envelope") {
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    const int m = 2 + rng.below(4);
    Eigen::MatrixXd t(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) t(i, j) = i == j ? 0.0 : rng.uniform(0.0, 2.0);
    SwitchingCosts costs(t);
    std::vector<double> v(static_cast<size_t>(m));
    for (auto& x : v) x = rng.uniform(-3.0, 3.0);
    const int l = rng.below(m);
    auto s = switching_operator(v, costs, l);
    for (int k = 0; k < m; ++k) {
      if (k == l) continue;
      CHECK(s.value <= v[static_cast<size_t>(k)] + costs(l, k));
    }
    CHECK(s.regime != l);
    CHECK(s.value == v[static_cast<size_t>(s.regime)] + costs(l, s.regime));

    auto raised = v;
    raised[static_cast<size_t>(rng.below(m))] += rng.uniform(0.0, 1.0);
    CHECK(switching_operator(raised, costs, l).value >= s.value);
  }
}
