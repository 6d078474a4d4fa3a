#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fixtures.hpp"
#include "switchctl/error.hpp"
#include "switchctl/grid.hpp"

using namespace switchctl;
using switchctl::testing::Rng;

namespace {

ProblemSpec square_spec(double a, double b1, double b2) {
  auto r = RegimeCoefficients::isotropic(2, a, 1.0, 1.0, 1.0);
  r.drift = {ScalarFunction::constant(b1), ScalarFunction::constant(b2)};
  return validated(ProblemSpec(Domain::rectangle(make_point({0, 0}), make_point({1, 1})), {r},
                               SwitchingCosts::uniform(1, 0.0)));
}

RegimeField field_of(const Grid& grid, const std::function<double(const Vec&)>& f) {
  RegimeField u(1, grid.size());
  for (int i = 0; i < grid.size(); ++i)
    if (grid.kind(i) != NodeKind::Exterior) u[0](i) = f(grid.coordinate(i));
  return u;
}

}  // namespace

TEST_CASE("interval layout") {
  Grid grid(Domain::interval(0, 1), {11});
  CHECK(grid.size() == 11);
  CHECK(grid.spacing(0) == doctest::Approx(0.1));
  CHECK(grid.kind(0) == NodeKind::Boundary);
  CHECK(grid.kind(10) == NodeKind::Boundary);
  CHECK(grid.interior().size() == 9);
  CHECK(grid.coordinate(3)(0) == doctest::Approx(0.3));
}

TEST_CASE("disk mask: interior nodes only touch interior or boundary nodes") {
  Grid grid(Domain::disk(make_point({0, 0}), 1.0), {41, 41});
  int exterior = 0;
  for (int node = 0; node < grid.size(); ++node) {
    if (grid.kind(node) == NodeKind::Exterior) ++exterior;
    if (grid.kind(node) != NodeKind::Interior) continue;
    CHECK(grid.domain().contains_interior(grid.coordinate(node)));
    for (int axis = 0; axis < 2; ++axis)
      for (int dir : {-1, 1}) {
        const int nb = grid.neighbor(node, axis, dir);
        REQUIRE(nb >= 0);
        CHECK(grid.kind(nb) != NodeKind::Exterior);
      }
  }
  CHECK(exterior > 0);
}

TEST_CASE("generator: constants vanish, quadratics exact") {
  auto spec = testing::one_regime_line();
  Grid grid(spec.domain(), {51});
  auto c = field_of(grid, [](const Vec&) { return 3.0; });
  CHECK(apply_generator(c, 0, spec, grid).cwiseAbs().maxCoeff() <= 1e-9);

  auto q = field_of(grid, [](const Vec& x) { return x(0) * x(0); });
  auto du = apply_generator(q, 0, spec, grid);
  for (int node : grid.interior()) CHECK(du(node) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(du(0) == 0.0);
  CHECK(du(50) == 0.0);
}

TEST_CASE("generator: drift along x1") {
  auto spec = square_spec(1.0, 1.0, 0.0);
  Grid grid(spec.domain(), {21, 21});
  auto u = field_of(grid, [](const Vec& x) { return x(0); });
  auto du = apply_generator(u, 0, spec, grid);
  for (int node : grid.interior()) CHECK(du(node) == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("generator requires a validated spec") {
  auto r = RegimeCoefficients::isotropic(1, 1.0, 1.0, 1.0, 1.0);
  ProblemSpec raw(Domain::interval(0, 1), {r}, SwitchingCosts::uniform(1, 0.0));
  Grid grid(raw.domain(), {11});
  RegimeField u(1, grid.size());
  try {
    apply_generator(u, 0, raw, grid);
    FAIL("expected NotValidated");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NotValidated);
  }
}

TEST_CASE("generator is linear") {
  Rng rng(21);
  auto spec = square_spec(0.7, -0.4, 1.3);
  Grid grid(spec.domain(), {17, 13});
  for (int trial = 0; trial < 20; ++trial) {
    RegimeField u(1, grid.size()), v(1, grid.size()), w(1, grid.size());
    const double al = rng.uniform(-2, 2), be = rng.uniform(-2, 2);
    for (int i = 0; i < grid.size(); ++i) {
      u[0](i) = rng.uniform(-1, 1);
      v[0](i) = rng.uniform(-1, 1);
      w[0](i) = al * u[0](i) + be * v[0](i);
    }
    Eigen::VectorXd lhs = apply_generator(w, 0, spec, grid);
    Eigen::VectorXd rhs = al * apply_generator(u, 0, spec, grid) + be * apply_generator(v, 0, spec, grid);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("assembled operator is an M-matrix for diagonal diffusion") {
  Rng rng(22);
  for (int trial = 0; trial < 30; ++trial) {
    auto r = RegimeCoefficients::isotropic(2, 1.0, rng.uniform(0.1, 2.0), 1.0, 1.0);
    r.diffusion = {ScalarFunction::affine(rng.uniform(0.5, 2.0), {rng.uniform(-0.3, 0.3), 0.0}),
                   ScalarFunction::constant(0.0), ScalarFunction::constant(0.0),
                   ScalarFunction::constant(rng.uniform(0.2, 1.5))};
    r.drift = {ScalarFunction::affine(rng.uniform(-3, 3), {rng.uniform(-2, 2), rng.uniform(-2, 2)}),
               ScalarFunction::constant(rng.uniform(-3, 3))};
    auto spec = validated(ProblemSpec(Domain::rectangle(make_point({0, 0}), make_point({1, 1})), {r},
                                      SwitchingCosts::uniform(1, 0.0)));
    Grid grid(spec.domain(), {9 + rng.below(8), 9 + rng.below(8)});
    SparseCols a = assemble_operator(spec, grid, 0);
    Eigen::MatrixXd dense(a);
    for (int i = 0; i < dense.rows(); ++i) {
      double off = 0.0;
      for (int j = 0; j < dense.cols(); ++j) {
        if (i == j) continue;
        CHECK(dense(i, j) <= 0.0);
        off += std::abs(dense(i, j));
      }
      CHECK(dense(i, i) > off);
    }
  }
}

TEST_CASE("gradient norm: constants and affine fields") {
  Grid grid(Domain::rectangle(make_point({0, 0}), make_point({1, 2})), {13, 17});
  RegimeField c = field_of(grid, [](const Vec&) { return 5.0; });
  CHECK(gradient_norm(c, 0, grid).cwiseAbs().maxCoeff() <= 1e-10);

  RegimeField a = field_of(grid, [](const Vec& x) { return 3.0 * x(0) - 4.0 * x(1) + 1.0; });
  auto gn = gradient_norm(a, 0, grid);
  for (int node = 0; node < grid.size(); ++node) CHECK(gn(node) == doctest::Approx(5.0).epsilon(1e-10));
}

TEST_CASE("gradient norm: |x|^2/2 gives |x| to second order") {
  double prev = 0.0;
  for (int n : {21, 41}) {
    Grid grid(Domain::rectangle(make_point({-1, -1}), make_point({1, 1})), {n, n});
    RegimeField u = field_of(grid, [](const Vec& x) { return 0.5 * x.squaredNorm(); });
    auto gn = gradient_norm(u, 0, grid);
    double err = 0.0;
    for (int node : grid.interior()) err = std::max(err, std::abs(gn(node) - grid.coordinate(node).norm()));
    if (n == 41) CHECK(err <= prev / 3.0 + 1e-12);
    prev = err;
    CHECK(err <= 2.0 * grid.h() * grid.h() + 1e-12);
  }
}

TEST_CASE("interpolation: nodes, affine fields, quadratic cell centres") {
  Grid grid(Domain::rectangle(make_point({0, 0}), make_point({1, 1})), {11, 11});
  RegimeField a = field_of(grid, [](const Vec& x) { return 2.0 * x(0) - x(1) + 0.5; });
  for (int node = 0; node < grid.size(); node += 7)
    CHECK(interpolate(a, 0, grid, grid.coordinate(node)) == a[0](node));
  Rng rng(23);
  for (int i = 0; i < 200; ++i) {
    Vec x = make_point({rng.uniform(), rng.uniform()});
    CHECK(interpolate(a, 0, grid, x) == doctest::Approx(2.0 * x(0) - x(1) + 0.5).epsilon(1e-12));
    Vec g = interpolate_gradient(a, 0, grid, x);
    CHECK(g(0) == doctest::Approx(2.0));
    CHECK(g(1) == doctest::Approx(-1.0));
  }
  RegimeField q = field_of(grid, [](const Vec& x) { return x.squaredNorm(); });
  const double h = grid.h();
  for (int i = 0; i + 1 < 11; ++i) {
    Vec x = make_point({(i + 0.5) * h, 0.35});
    CHECK(std::abs(interpolate(q, 0, grid, x) - x.squaredNorm()) <= h * h);
  }
}

TEST_CASE("interpolation outside the domain") {
  Grid grid(Domain::disk(make_point({0, 0}), 1.0), {21, 21});
  RegimeField u(1, grid.size());
  try {
    interpolate(u, 0, grid, make_point({0.9, 0.9}));
    FAIL("expected OutOfDomain");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::OutOfDomain);
  }
  CHECK(interpolate(u, 0, grid, make_point({0.2, 0.1})) == 0.0);
}

TEST_CASE("field csv layout") {
  Grid grid(Domain::interval(0, 1), {3});
  RegimeField u(2, 3);
  u[1](1) = 0.1;
  std::ostringstream out;
  write_field_csv(out, u, grid);
  CHECK(out.str() ==
        "x1,regime,value\n0,1,0\n0.5,1,0\n1,1,0\n0,2,0\n0.5,2,0.10000000000000001\n1,2,0\n");
}
