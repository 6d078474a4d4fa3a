#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "switchctl/problem.hpp"

namespace switchctl {

enum class NodeKind : std::uint8_t { Interior, Boundary, Exterior };

/// Uniform tensor grid over the domain's bounding box. Box domains put their
/// boundary nodes on the box faces; a disk masks nodes outside it as exterior
/// and treats the first layer inside as boundary.
class Grid {
 public:
  Grid(const Domain& domain, std::vector<int> nodes_per_axis);

  const Domain& domain() const { return domain_; }
  int dim() const { return domain_.dim(); }
  int nodes(int axis) const { return counts_[static_cast<size_t>(axis)]; }
  double spacing(int axis) const { return spacing_[static_cast<size_t>(axis)]; }
  /// Largest spacing over the axes.
  double h() const;
  int size() const { return static_cast<int>(kinds_.size()); }

  int index(int i, int j = 0) const { return i + counts_[0] * j; }
  std::array<int, 2> multi_index(int node) const { return {node % counts_[0], node / counts_[0]}; }
  Vec coordinate(int node) const;
  NodeKind kind(int node) const { return kinds_[static_cast<size_t>(node)]; }

  /// Neighbor along `axis` in direction `dir` (+1 / -1); -1 when it leaves the box.
  int neighbor(int node, int axis, int dir) const;

  const std::vector<int>& interior() const { return interior_; }
  /// Position of `node` among interior unknowns, or -1.
  int interior_index(int node) const { return interior_index_[static_cast<size_t>(node)]; }

  /// Node nearest to x (ties resolved toward the lower index).
  int nearest_node(const Vec& x) const;

 private:
  Domain domain_;
  std::vector<int> counts_;
  std::vector<double> spacing_;
  std::vector<NodeKind> kinds_;
  std::vector<int> interior_;
  std::vector<int> interior_index_;
};

/// One scalar array per regime over all grid nodes.
class RegimeField {
 public:
  RegimeField() = default;
  RegimeField(int regimes, int nodes);

  int regimes() const { return static_cast<int>(data_.size()); }
  int nodes() const { return data_.empty() ? 0 : static_cast<int>(data_.front().size()); }
  Eigen::VectorXd& operator[](int l) { return data_[static_cast<size_t>(l)]; }
  const Eigen::VectorXd& operator[](int l) const { return data_[static_cast<size_t>(l)]; }

  /// max_l max_node |this - other|.
  double sup_distance(const RegimeField& other) const;
  double sup_norm() const;
  bool all_finite() const;

 private:
  std::vector<Eigen::VectorXd> data_;
};

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using SparseCols = Eigen::SparseMatrix<double, Eigen::ColMajor>;

/// Per-axis gradient stencils over all nodes (rows for exterior nodes are empty).
/// Interior nodes: central differences, except second-order one-sided away
/// from an adjacent boundary node along that axis. Boundary nodes: one-sided
/// into the grid.
std::vector<SparseRows> gradient_operators(const Grid& grid);

/// Finite-difference operators of a validated problem on a grid.
class Discretization {
 public:
  Discretization(ProblemSpec spec, Grid grid);

  const ProblemSpec& spec() const { return spec_; }
  const Grid& grid() const { return grid_; }
  int regimes() const { return spec_.regimes(); }
  /// False when some regime has non-diagonal diffusion (the cross stencil
  /// breaks the M-matrix property).
  bool monotone() const { return monotone_; }

  /// D_l u at interior nodes, zero elsewhere.
  Eigen::VectorXd apply_generator(const Eigen::VectorXd& u, int l) const;
  /// N x d node gradients.
  Eigen::MatrixXd gradients(const Eigen::VectorXd& u) const;
  Eigen::VectorXd gradient_norm(const Eigen::VectorXd& u) const;

  const SparseRows& generator(int l) const { return generator_[static_cast<size_t>(l)]; }
  const std::vector<SparseRows>& gradient() const { return gradient_; }
  /// c_l - D_l restricted to interior unknowns.
  const SparseCols& dirichlet_operator(int l) const { return dirichlet_[static_cast<size_t>(l)]; }

  /// Coefficients sampled at every node.
  const Eigen::VectorXd& discount(int l) const { return c_[static_cast<size_t>(l)]; }
  const Eigen::VectorXd& running_cost(int l) const { return h_[static_cast<size_t>(l)]; }
  const Eigen::VectorXd& control_cost(int l) const { return g_[static_cast<size_t>(l)]; }

 private:
  ProblemSpec spec_;
  Grid grid_;
  bool monotone_ = true;
  std::vector<SparseRows> generator_;
  std::vector<SparseRows> gradient_;
  std::vector<SparseCols> dirichlet_;
  std::vector<Eigen::VectorXd> c_, h_, g_;
};

/// tr[a_l D^2 u_l] - <b_l, D u_l> at interior nodes (boundary and exterior rows are 0).
/// Second derivatives are central, mixed ones use the four-point cross and the
/// drift is upwinded along -b_l.
Eigen::VectorXd apply_generator(const RegimeField& field, int l, const ProblemSpec& spec,
                                const Grid& grid);

/// |D u_l| at every non-exterior node.
Eigen::VectorXd gradient_norm(const RegimeField& field, int l, const Grid& grid);

/// c_l - D_l on interior unknowns.
SparseCols assemble_operator(const ProblemSpec& spec, const Grid& grid, int l);

/// Multilinear interpolation of node values. Throws OutOfDomain outside the closed domain.
double interpolate(const Eigen::VectorXd& values, const Grid& grid, const Vec& x);
double interpolate(const RegimeField& field, int l, const Grid& grid, const Vec& x);

/// Componentwise multilinear interpolation of node gradients (N x d).
Vec interpolate_gradient(const Eigen::MatrixXd& node_gradients, const Grid& grid, const Vec& x);
Vec interpolate_gradient(const RegimeField& field, int l, const Grid& grid, const Vec& x);

/// CSV: header `x1[,x2],regime,value`, one row per node and regime (regime
/// numbering starts at 1), values with 17 significant digits.
void write_field_csv(std::ostream& out, const RegimeField& field, const Grid& grid);

}  // namespace switchctl
