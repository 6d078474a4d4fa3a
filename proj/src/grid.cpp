#include "switchctl/grid.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "switchctl/error.hpp"
#include "switchctl/io.hpp"

namespace switchctl {

// ---------------------------------------------------------------------------
// Grid

Grid::Grid(const Domain& domain, std::vector<int> nodes_per_axis)
    : domain_(domain), counts_(std::move(nodes_per_axis)) {
  if (static_cast<int>(counts_.size()) != domain_.dim()) {
    throw Error(ErrorKind::InvalidArgument, "grid needs one node count per axis");
  }
  for (int n : counts_) {
    if (n < 3) throw Error(ErrorKind::InvalidArgument, "grid needs at least 3 nodes per axis");
  }
  if (counts_.size() == 1) counts_.push_back(1);
  for (int k = 0; k < dim(); ++k) {
    spacing_.push_back((domain_.upper()(k) - domain_.lower()(k)) / (counts_[static_cast<size_t>(k)] - 1));
  }

  const int total = counts_[0] * counts_[1];
  kinds_.assign(static_cast<size_t>(total), NodeKind::Interior);
  if (domain_.kind() == DomainKind::Disk) {
    std::vector<bool> inside(static_cast<size_t>(total));
    for (int p = 0; p < total; ++p) inside[static_cast<size_t>(p)] = domain_.contains(coordinate(p));
    for (int p = 0; p < total; ++p) {
      if (!inside[static_cast<size_t>(p)]) {
        kinds_[static_cast<size_t>(p)] = NodeKind::Exterior;
        continue;
      }
      bool all_in = domain_.contains_interior(coordinate(p));
      for (int k = 0; k < 2 && all_in; ++k) {
        for (int dir : {-1, 1}) {
          const int q = neighbor(p, k, dir);
          if (q < 0 || !domain_.contains_interior(coordinate(q))) all_in = false;
        }
      }
      kinds_[static_cast<size_t>(p)] = all_in ? NodeKind::Interior : NodeKind::Boundary;
    }
  } else {
    for (int p = 0; p < total; ++p) {
      const auto [i, j] = multi_index(p);
      bool edge = (i == 0 || i == counts_[0] - 1);
      if (dim() == 2) edge = edge || j == 0 || j == counts_[1] - 1;
      if (edge) kinds_[static_cast<size_t>(p)] = NodeKind::Boundary;
    }
  }

  interior_index_.assign(static_cast<size_t>(total), -1);
  for (int p = 0; p < total; ++p) {
    if (kinds_[static_cast<size_t>(p)] == NodeKind::Interior) {
      interior_index_[static_cast<size_t>(p)] = static_cast<int>(interior_.size());
      interior_.push_back(p);
    }
  }
}

double Grid::h() const { return *std::max_element(spacing_.begin(), spacing_.end()); }

Vec Grid::coordinate(int node) const {
  const auto idx = multi_index(node);
  Vec x(dim());
  for (int k = 0; k < dim(); ++k) {
    const int n = counts_[static_cast<size_t>(k)];
    const int i = idx[static_cast<size_t>(k)];
    // Hit the upper face exactly.
    x(k) = (i == n - 1) ? domain_.upper()(k) : domain_.lower()(k) + i * spacing_[static_cast<size_t>(k)];
  }
  return x;
}

int Grid::neighbor(int node, int axis, int dir) const {
  auto idx = multi_index(node);
  idx[static_cast<size_t>(axis)] += dir;
  const int v = idx[static_cast<size_t>(axis)];
  if (v < 0 || v >= counts_[static_cast<size_t>(axis)]) return -1;
  return index(idx[0], idx[1]);
}

int Grid::nearest_node(const Vec& x) const {
  std::array<int, 2> idx{0, 0};
  for (int k = 0; k < dim(); ++k) {
    const double s = (x(k) - domain_.lower()(k)) / spacing_[static_cast<size_t>(k)];
    idx[static_cast<size_t>(k)] =
        std::clamp(static_cast<int>(std::floor(s + 0.5)), 0, counts_[static_cast<size_t>(k)] - 1);
  }
  return index(idx[0], idx[1]);
}

// ---------------------------------------------------------------------------
// RegimeField

RegimeField::RegimeField(int regimes, int nodes)
    : data_(static_cast<size_t>(regimes), Eigen::VectorXd::Zero(nodes)) {}

double RegimeField::sup_distance(const RegimeField& other) const {
  if (other.regimes() != regimes() || other.nodes() != nodes()) {
    throw Error(ErrorKind::InvalidArgument, "field shapes differ");
  }
  double d = 0.0;
  for (int l = 0; l < regimes(); ++l) d = std::max(d, ((*this)[l] - other[l]).cwiseAbs().maxCoeff());
  return d;
}

double RegimeField::sup_norm() const {
  double d = 0.0;
  for (const auto& v : data_) d = std::max(d, v.cwiseAbs().maxCoeff());
  return d;
}

bool RegimeField::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](const Eigen::VectorXd& v) { return v.allFinite(); });
}

// ---------------------------------------------------------------------------
// Stencils

std::vector<SparseRows> gradient_operators(const Grid& grid) {
  const int n = grid.size();
  std::vector<SparseRows> ops;
  auto usable = [&](int q) { return q >= 0 && grid.kind(q) != NodeKind::Exterior; };
  for (int k = 0; k < grid.dim(); ++k) {
    const double h = grid.spacing(k);
    std::vector<Eigen::Triplet<double>> t;
    auto central = [&](int p, int m1, int p1) {
      t.emplace_back(p, p1, 0.5 / h);
      t.emplace_back(p, m1, -0.5 / h);
    };
    auto one_sided = [&](int p, int q1, int q2, double sign) {
      // sign = +1 forward, -1 backward
      if (q2 >= 0) {
        t.emplace_back(p, p, -1.5 * sign / h);
        t.emplace_back(p, q1, 2.0 * sign / h);
        t.emplace_back(p, q2, -0.5 * sign / h);
      } else {
        t.emplace_back(p, p, -sign / h);
        t.emplace_back(p, q1, sign / h);
      }
    };
    for (int p = 0; p < n; ++p) {
      if (grid.kind(p) == NodeKind::Exterior) continue;
      const int m1 = grid.neighbor(p, k, -1);
      const int p1 = grid.neighbor(p, k, +1);
      const int m2 = usable(m1) ? grid.neighbor(m1, k, -1) : -1;
      const int p2 = usable(p1) ? grid.neighbor(p1, k, +1) : -1;
      if (grid.kind(p) == NodeKind::Interior) {
        const bool bm = grid.kind(m1) == NodeKind::Boundary;
        const bool bp = grid.kind(p1) == NodeKind::Boundary;
        if (bm && !bp && usable(p2)) {
          one_sided(p, p1, p2, 1.0);
        } else if (bp && !bm && usable(m2)) {
          one_sided(p, m1, m2, -1.0);
        } else {
          central(p, m1, p1);
        }
      } else {
        if (usable(m1) && usable(p1)) {
          central(p, m1, p1);
        } else if (usable(p1)) {
          one_sided(p, p1, usable(p2) ? p2 : -1, 1.0);
        } else if (usable(m1)) {
          one_sided(p, m1, usable(m2) ? m2 : -1, -1.0);
        }
      }
    }
    SparseRows op(n, n);
    op.setFromTriplets(t.begin(), t.end());
    ops.push_back(std::move(op));
  }
  return ops;
}

namespace {

SparseRows build_generator(const RegimeCoefficients& coeff, const Grid& grid) {
  const int n = grid.size();
  const int d = grid.dim();
  std::vector<Eigen::Triplet<double>> t;
  for (int p : grid.interior()) {
    const Vec x = grid.coordinate(p);
    const Mat a = coeff.diffusion_at(x);
    const Vec v = -coeff.drift_at(x);
    for (int k = 0; k < d; ++k) {
      const double h = grid.spacing(k);
      const int m1 = grid.neighbor(p, k, -1);
      const int p1 = grid.neighbor(p, k, +1);
      t.emplace_back(p, m1, a(k, k) / (h * h));
      t.emplace_back(p, p1, a(k, k) / (h * h));
      t.emplace_back(p, p, -2.0 * a(k, k) / (h * h));
      if (v(k) > 0.0) {
        t.emplace_back(p, p1, v(k) / h);
        t.emplace_back(p, p, -v(k) / h);
      } else if (v(k) < 0.0) {
        t.emplace_back(p, p, v(k) / h);
        t.emplace_back(p, m1, -v(k) / h);
      }
    }
    if (d == 2 && a(0, 1) != 0.0) {
      // 2 a01 u_xy with the four-point cross.
      const double w = 2.0 * a(0, 1) / (4.0 * grid.spacing(0) * grid.spacing(1));
      const auto [i, j] = grid.multi_index(p);
      t.emplace_back(p, grid.index(i + 1, j + 1), w);
      t.emplace_back(p, grid.index(i - 1, j - 1), w);
      t.emplace_back(p, grid.index(i + 1, j - 1), -w);
      t.emplace_back(p, grid.index(i - 1, j + 1), -w);
    }
  }
  SparseRows op(n, n);
  op.setFromTriplets(t.begin(), t.end());
  return op;
}

SparseCols restrict_dirichlet(const SparseRows& generator, const Eigen::VectorXd& discount,
                              const Grid& grid) {
  const auto& interior = grid.interior();
  const int ni = static_cast<int>(interior.size());
  std::vector<Eigen::Triplet<double>> t;
  for (int r = 0; r < ni; ++r) {
    const int p = interior[static_cast<size_t>(r)];
    t.emplace_back(r, r, discount(p));
    for (SparseRows::InnerIterator it(generator, p); it; ++it) {
      const int c = grid.interior_index(static_cast<int>(it.col()));
      if (c >= 0) t.emplace_back(r, c, -it.value());
    }
  }
  SparseCols op(ni, ni);
  op.setFromTriplets(t.begin(), t.end());
  op.makeCompressed();
  return op;
}

Eigen::VectorXd sample(const ScalarFunction& f, const Grid& grid) {
  Eigen::VectorXd v(grid.size());
  for (int p = 0; p < grid.size(); ++p) v(p) = f(grid.coordinate(p));
  return v;
}

void require_validated(const ProblemSpec& spec) {
  if (!spec.validated()) throw Error(ErrorKind::NotValidated, "problem spec has not been validated");
}

}  // namespace

Discretization::Discretization(ProblemSpec spec, Grid grid)
    : spec_(std::move(spec)), grid_(std::move(grid)) {
  require_validated(spec_);
  if (grid_.dim() != spec_.dim()) throw Error(ErrorKind::InvalidArgument, "grid and spec dimensions differ");
  monotone_ = spec_.diagonal_diffusion();
  gradient_ = gradient_operators(grid_);
  for (int l = 0; l < spec_.regimes(); ++l) {
    const auto& r = spec_.regime(l);
    generator_.push_back(build_generator(r, grid_));
    c_.push_back(sample(r.discount, grid_));
    h_.push_back(sample(r.running_cost, grid_));
    g_.push_back(sample(r.control_cost, grid_));
    dirichlet_.push_back(restrict_dirichlet(generator_.back(), c_.back(), grid_));
  }
}

Eigen::VectorXd Discretization::apply_generator(const Eigen::VectorXd& u, int l) const {
  return generator(l) * u;
}

Eigen::MatrixXd Discretization::gradients(const Eigen::VectorXd& u) const {
  Eigen::MatrixXd g(grid_.size(), grid_.dim());
  for (int k = 0; k < grid_.dim(); ++k) g.col(k) = gradient_[static_cast<size_t>(k)] * u;
  return g;
}

Eigen::VectorXd Discretization::gradient_norm(const Eigen::VectorXd& u) const {
  return gradients(u).rowwise().norm();
}

Eigen::VectorXd apply_generator(const RegimeField& field, int l, const ProblemSpec& spec,
                                const Grid& grid) {
  require_validated(spec);
  if (!field.all_finite()) throw Error(ErrorKind::InvalidArgument, "field has non-finite entries");
  return build_generator(spec.regime(l), grid) * field[l];
}

Eigen::VectorXd gradient_norm(const RegimeField& field, int l, const Grid& grid) {
  const auto ops = gradient_operators(grid);
  Eigen::MatrixXd g(grid.size(), grid.dim());
  for (int k = 0; k < grid.dim(); ++k) g.col(k) = ops[static_cast<size_t>(k)] * field[l];
  return g.rowwise().norm();
}

SparseCols assemble_operator(const ProblemSpec& spec, const Grid& grid, int l) {
  require_validated(spec);
  return restrict_dirichlet(build_generator(spec.regime(l), grid), sample(spec.regime(l).discount, grid),
                            grid);
}

// ---------------------------------------------------------------------------
// Interpolation

namespace {

struct Cell {
  std::array<int, 4> nodes{};
  std::array<double, 4> weights{};
  int count = 0;
};

Cell locate(const Grid& grid, const Vec& x) {
  if (x.size() != grid.dim() || !grid.domain().contains(x)) {
    throw Error(ErrorKind::OutOfDomain, "point outside the closed domain");
  }
  std::array<int, 2> base{0, 0};
  std::array<double, 2> frac{0.0, 0.0};
  for (int k = 0; k < grid.dim(); ++k) {
    double s = (x(k) - grid.domain().lower()(k)) / grid.spacing(k);
    // node coordinates are lower + i*h; undo the rounding so nodes hit exactly
    const double r = std::round(s);
    if (std::abs(s - r) <= 1e-9) s = r;
    const int i = std::clamp(static_cast<int>(std::floor(s)), 0, grid.nodes(k) - 2);
    base[static_cast<size_t>(k)] = i;
    frac[static_cast<size_t>(k)] = std::clamp(s - i, 0.0, 1.0);
  }
  Cell c;
  if (grid.dim() == 1) {
    c.nodes = {base[0], base[0] + 1, 0, 0};
    c.weights = {1.0 - frac[0], frac[0], 0.0, 0.0};
    c.count = 2;
  } else {
    const auto [i, j] = base;
    const double tx = frac[0];
    const double ty = frac[1];
    c.nodes = {grid.index(i, j), grid.index(i + 1, j), grid.index(i, j + 1), grid.index(i + 1, j + 1)};
    c.weights = {(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty};
    c.count = 4;
  }
  return c;
}

}  // namespace

double interpolate(const Eigen::VectorXd& values, const Grid& grid, const Vec& x) {
  const Cell c = locate(grid, x);
  double v = 0.0;
  for (int i = 0; i < c.count; ++i) {
    v += c.weights[static_cast<size_t>(i)] * values(c.nodes[static_cast<size_t>(i)]);
  }
  return v;
}

double interpolate(const RegimeField& field, int l, const Grid& grid, const Vec& x) {
  return interpolate(field[l], grid, x);
}

Vec interpolate_gradient(const Eigen::MatrixXd& node_gradients, const Grid& grid, const Vec& x) {
  const Cell c = locate(grid, x);
  Vec g = Vec::Zero(grid.dim());
  for (int i = 0; i < c.count; ++i) {
    g += c.weights[static_cast<size_t>(i)] *
         node_gradients.row(c.nodes[static_cast<size_t>(i)]).transpose();
  }
  return g;
}

Vec interpolate_gradient(const RegimeField& field, int l, const Grid& grid, const Vec& x) {
  const auto ops = gradient_operators(grid);
  Eigen::MatrixXd g(grid.size(), grid.dim());
  for (int k = 0; k < grid.dim(); ++k) g.col(k) = ops[static_cast<size_t>(k)] * field[l];
  return interpolate_gradient(g, grid, x);
}

void write_field_csv(std::ostream& out, const RegimeField& field, const Grid& grid) {
  out << (grid.dim() == 1 ? "x1" : "x1,x2") << ",regime,value\n";
  for (int l = 0; l < field.regimes(); ++l) {
    for (int p = 0; p < grid.size(); ++p) {
      const Vec x = grid.coordinate(p);
      for (int k = 0; k < grid.dim(); ++k) out << format_double(x(k)) << ',';
      out << l + 1 << ',' << format_double(field[l](p)) << '\n';
    }
  }
}

}  // namespace switchctl
