#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "switchctl/error.hpp"
#include "switchctl/hjb_limits.hpp"
#include "switchctl/simulate.hpp"

using namespace switchctl;

namespace {

// m = 1, a = 1/2 (unit volatility), b = 0, h = c = 1, huge g on a huge interval.
ProblemSpec far_walls(double h = 1.0, double c = 1.0) {
  std::vector<RegimeCoefficients> r{RegimeCoefficients::isotropic(1, 0.5, c, h, 1e6)};
  return validated(ProblemSpec(Domain::interval(-1e9, 1e9), r, SwitchingCosts::uniform(1, 0.0)));
}

AdmissibleStrategy do_nothing() {
  AdmissibleStrategy s;
  s.control = [](double, double, const Vec&, int) { return StrategyAction{make_point({1.0}), 0.0, 0.0}; };
  s.switching = [](double, double, const Vec&, int) { return std::optional<int>{}; };
  return s;
}

void check_shape(const PathCostEstimate& e, int paths) {
  CHECK(e.paths == paths);
  CHECK(e.standard_error >= 0.0);
  CHECK(e.absorbed + e.truncated <= paths);
  CHECK(e.ci_low <= e.mean);
  CHECK(e.mean <= e.ci_high);
}

}  // namespace

TEST_CASE("horizon from the tail bound") {
  SimParams p;
  CHECK(simulation_horizon(p, 1.0, 1.0) == doctest::Approx(std::log(1e6)));
  CHECK(simulation_horizon(p, 1.0, 2.0) == doctest::Approx(std::log(1e6) / 2));
  CHECK(simulation_horizon(p, 1e-7, 1.0) == 0.0);
  CHECK(simulation_horizon(p, 1e300, 1e-3) == p.horizon_cap);
}

TEST_CASE("sim params are checked") {
  SimParams p;
  p.dt = 0.0;
  CHECK_THROWS_AS(p.check(), Error);
  p = SimParams{};
  p.paths = 0;
  CHECK_THROWS_AS(p.check(), Error);
}

TEST_CASE("uncontrolled policy: discounted unit cost integrates to one") {
  Discretization disc(far_walls(), Grid(Domain::interval(-1e9, 1e9), {3}));
  FeedbackPolicy pol(disc, RegimeField(1, 3), 0.1);
  SimParams p;
  p.paths = 200;
  auto e = simulate_policy(pol, make_point({0.0}), 0, p);
  check_shape(e, 200);
  CHECK(std::abs(e.mean - 1.0) <= 3 * e.standard_error + 1e-3);
  CHECK(e.absorbed == 0);
}

TEST_CASE("zero volatility: deterministic left-endpoint sum") {
  std::vector<RegimeCoefficients> r{RegimeCoefficients::isotropic(1, 1.0, 2.0, 1.5, 1e6)};
  Discretization disc(validated(ProblemSpec(Domain::interval(0, 1), r, SwitchingCosts::uniform(1, 0.0))),
                      Grid(Domain::interval(0, 1), {11}));
  FeedbackPolicy pol(disc, RegimeField(1, 11), 0.1);
  SimParams p;
  p.paths = 7;
  p.zero_volatility = true;
  p.dt = 1e-2;
  auto e = simulate_policy(pol, make_point({0.5}), 0, p);
  check_shape(e, 7);
  CHECK(e.truncated == 7);
  CHECK(e.standard_error <= 1e-12);
  const long steps = std::lround(std::ceil(e.horizon / p.dt - 1e-9));
  double sum = 0.0;
  for (long k = 0; k < steps; ++k) sum += p.dt * 1.5 * std::exp(-2.0 * p.dt * static_cast<double>(k));
  CHECK(e.mean == doctest::Approx(sum).epsilon(1e-9));
  CHECK(std::abs(e.mean - 1.5 / 2.0) <= 1e-2);
}

TEST_CASE("determinism across thread counts and seeds") {
  auto disc = testing::line_disc(testing::two_regime_line(), 101);
  auto lad = continuation_delta(0.1, ContinuationParams{}, disc);
  FeedbackPolicy pol(disc, lad.u, 0.1);
  SimParams p;
  p.paths = 300;
  p.dt = 1e-3;
  p.threads = 1;
  auto a = simulate_policy(pol, make_point({0.3}), 0, p);
  p.threads = 4;
  auto b = simulate_policy(pol, make_point({0.3}), 0, p);
  CHECK(a.mean == b.mean);
  CHECK(a.standard_error == b.standard_error);
  p.seed = 2;
  auto c = simulate_policy(pol, make_point({0.3}), 0, p);
  CHECK(c.mean != a.mean);
}

TEST_CASE("policy cost matches the penalized field") {
  auto disc = testing::line_disc(testing::two_regime_line(), 201);
  auto lad = continuation_delta(0.1, ContinuationParams{}, disc);
  FeedbackPolicy pol(disc, lad.u, 0.1);
  SimParams p;
  p.paths = 2000;
  p.dt = 1e-3;
  p.seed = 99;
  for (double x0 : {0.3, 0.5}) {
    auto e = simulate_policy(pol, make_point({x0}), 0, p);
    check_shape(e, 2000);
    CHECK(std::abs(e.mean - pol.value_at(make_point({x0}), 0)) <= 3 * e.standard_error + 2e-2);
    CHECK(e.absorbed + e.truncated == 2000);
  }
}

TEST_CASE("do-nothing strategy matches the uncontrolled value") {
  SimParams p;
  p.paths = 200;
  auto e = simulate_admissible(do_nothing(), make_point({0.0}), 0, p, far_walls());
  check_shape(e, 200);
  CHECK(std::abs(e.mean - 1.0) <= 3 * e.standard_error + 1e-3);
}

TEST_CASE("jump cost quadrature") {
  CHECK(jump_cost(ScalarFunction::constant(0.7), make_point({0.5}), make_point({1.0}), 0.3) ==
        doctest::Approx(0.21).epsilon(1e-14));
  const double c = jump_cost(ScalarFunction::affine(0.0, {1.0, 0.0}), make_point({0.8}), make_point({1.0}), 0.4);
  CHECK(std::abs(c - 0.24) <= 1e-12);

  double wsum = 0.0, moment = 0.0;
  for (const auto& [x, w] : gauss_legendre16()) {
    CHECK(x > 0.0);
    CHECK(x < 1.0);
    wsum += w;
    moment += w * std::pow(x, 31);
  }
  CHECK(wsum == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(moment == doctest::Approx(1.0 / 32.0).epsilon(1e-13));
}

TEST_CASE("jumps leaving the domain are rejected") {
  auto spec = testing::one_regime_line();
  AdmissibleStrategy s = do_nothing();
  s.control = [](double t, double, const Vec&, int) {
    return StrategyAction{make_point({1.0}), 0.0, t == 0.0 ? 0.9 : 0.0};
  };
  SimParams p;
  p.paths = 4;
  try {
    simulate_admissible(s, make_point({0.8}), 0, p, spec);
    FAIL("expected InadmissibleJump");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InadmissibleJump);
  }
}

TEST_CASE("penalized mode has no jumps") {
  auto spec = testing::one_regime_line();
  AdmissibleStrategy s = do_nothing();
  s.control = [](double, double, const Vec&, int) { return StrategyAction{make_point({1.0}), 0.0, 0.1}; };
  SimParams p;
  p.paths = 4;
  CHECK_THROWS_AS(simulate_admissible(s, make_point({0.5}), 0, p, spec, CostMode::Penalized, 0.1), Error);
}

TEST_CASE("jump to the boundary costs the path integral of g") {
  // g(x) = x, jump from 0.8 by 0.8 ends the path on the boundary
  std::vector<RegimeCoefficients> r{RegimeCoefficients::isotropic(1, 1.0, 1.0, 1e-3, 1.0)};
  r[0].control_cost = ScalarFunction::affine(0.0, {1.0, 0.0});
  auto spec = validated(ProblemSpec(Domain::interval(0, 1), r, SwitchingCosts::uniform(1, 0.0)));
  AdmissibleStrategy s = do_nothing();
  s.control = [](double, double, const Vec&, int) { return StrategyAction{make_point({1.0}), 0.0, 0.8}; };
  SimParams p;
  p.paths = 3;
  auto e = simulate_admissible(s, make_point({0.8}), 0, p, spec);
  CHECK(e.mean == doctest::Approx(0.32).epsilon(1e-12));
  CHECK(e.absorbed == 3);
}
