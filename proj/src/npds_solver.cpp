#include "switchctl/npds_solver.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include <Eigen/SparseLU>

#include "switchctl/error.hpp"
#include "switchctl/penalty.hpp"

namespace switchctl {

void SolveParams::check() const {
  if (!(epsilon > 0.0) || !(delta > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "epsilon and delta must be positive");
  }
  if (!(relaxation > 0.0 && relaxation <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "relaxation must lie in (0, 1]");
  }
  if (!(tolerance > 0.0)) throw Error(ErrorKind::InvalidArgument, "tolerance must be positive");
  if (max_iterations < 1) throw Error(ErrorKind::InvalidArgument, "max_iterations must be >= 1");
}

namespace {

using Lu = Eigen::SparseLU<SparseCols, Eigen::COLAMDOrdering<int>>;

class LinearSolver {
 public:
  explicit LinearSolver(const Discretization& disc) : disc_(disc), lu_(static_cast<size_t>(disc.regimes())) {
    for (int l = 0; l < disc.regimes(); ++l) {
      auto& lu = lu_[static_cast<size_t>(l)];
      if (disc.grid().interior().empty()) continue;
      lu.compute(disc.dirichlet_operator(l));
      if (lu.info() != Eigen::Success) {
        throw Error(ErrorKind::LinearSolveFailure, "factorization of regime " + std::to_string(l + 1) +
                                                       " failed: " + lu.lastErrorMessage());
      }
    }
  }

  RegimeField solve(const RegimeField& source) const {
    const Grid& grid = disc_.grid();
    const auto& interior = grid.interior();
    RegimeField v(disc_.regimes(), grid.size());
    if (interior.empty()) return v;
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(interior.size()));
    for (int l = 0; l < disc_.regimes(); ++l) {
      for (size_t r = 0; r < interior.size(); ++r) rhs(static_cast<Eigen::Index>(r)) = source[l](interior[r]);
      // SparseLU::solve is logically const but not declared so.
      Eigen::VectorXd x = const_cast<Lu&>(lu_[static_cast<size_t>(l)]).solve(rhs);
      if (!x.allFinite()) {
        throw Error(ErrorKind::LinearSolveFailure, "non-finite solution in regime " + std::to_string(l + 1));
      }
      for (size_t r = 0; r < interior.size(); ++r) v[l](interior[r]) = x(static_cast<Eigen::Index>(r));
    }
    return v;
  }

 private:
  const Discretization& disc_;
  std::vector<Lu> lu_;
};

void check_source(const RegimeField& source, const Discretization& disc) {
  if (source.regimes() != disc.regimes() || source.nodes() != disc.grid().size()) {
    throw Error(ErrorKind::InvalidArgument, "source shape does not match the discretization");
  }
  if (!source.all_finite()) throw Error(ErrorKind::InvalidArgument, "source has non-finite entries");
}

// Penalty terms at interior nodes; zero elsewhere.
RegimeField nonlinearity(const RegimeField& w, const SolveParams& params, const Discretization& disc) {
  const Penalty pe(params.epsilon);
  const Penalty pd(params.delta);
  const auto& theta = disc.spec().costs();
  const int m = disc.regimes();
  RegimeField out(m, disc.grid().size());
  for (int l = 0; l < m; ++l) {
    const Eigen::VectorXd grad = disc.gradient_norm(w[l]);
    const Eigen::VectorXd& g = disc.control_cost(l);
    for (int p : disc.grid().interior()) {
      double v = pe(grad(p) * grad(p) - g(p) * g(p));
      for (int k = 0; k < m; ++k) {
        if (k != l) v += pd(w[l](p) - w[k](p) - theta(l, k));
      }
      out[l](p) = v;
    }
  }
  return out;
}

RegimeField residual(const RegimeField& u, const SolveParams& params, const Discretization& disc) {
  RegimeField r = nonlinearity(u, params, disc);
  for (int l = 0; l < disc.regimes(); ++l) {
    const Eigen::VectorXd du = disc.apply_generator(u[l], l);
    for (int p : disc.grid().interior()) {
      r[l](p) += disc.discount(l)(p) * u[l](p) - du(p) - disc.running_cost(l)(p);
    }
  }
  return r;
}

RegimeField zero_outside(RegimeField u, const Grid& grid) {
  for (int l = 0; l < u.regimes(); ++l) {
    for (int p = 0; p < grid.size(); ++p) {
      if (grid.kind(p) != NodeKind::Interior) u[l](p) = 0.0;
    }
  }
  return u;
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

SolveResult picard(const SolveParams& params, const Discretization& disc, RegimeField u,
                   RegimeField vtilde, const LinearSolver& linear) {
  const int m = disc.regimes();
  double rho = params.relaxation;
  double previous = INFINITY;
  int rising = 0;
  SolveResult out;
  for (int it = 1; it <= params.max_iterations; ++it) {
    const RegimeField n = nonlinearity(u, params, disc);
    RegimeField source(m, disc.grid().size());
    for (int l = 0; l < m; ++l) source[l] = disc.running_cost(l) - n[l];
    const RegimeField t = linear.solve(source);
    double update = 0.0;
    for (int l = 0; l < m; ++l) {
      const Eigen::VectorXd step = rho * (t[l] - u[l]);
      update = std::max(update, step.cwiseAbs().maxCoeff());
      u[l] += step;
    }
    if (!u.all_finite()) throw Error(ErrorKind::NoConvergence, "Picard iterate became non-finite");
    if (update < params.tolerance) {
      const double res = residual(u, params, disc).sup_norm();
      if (res <= 10.0 * params.tolerance || update == 0.0) {
        out.u = std::move(u);
        out.iterations = it;
        out.final_update = update;
        out.residual_sup = res;
        out.relaxation = rho;
        out.vtilde = std::move(vtilde);
        return out;
      }
    }
    // Halve the relaxation after a sustained rise in the update norm.
    rising = update > previous ? rising + 1 : 0;
    previous = update;
    if (rising >= 10 && rho > 1.0 / 1024.0) {
      rho *= 0.5;
      rising = 0;
    }
    out.final_update = update;
  }
  throw Error(ErrorKind::NoConvergence, "Picard did not converge in " + std::to_string(params.max_iterations) +
                                            " iterations (last update " + sci(out.final_update) + ")");
}

SparseCols newton_jacobian(const RegimeField& u, const SolveParams& params, const Discretization& disc) {
  const Grid& grid = disc.grid();
  const auto& interior = grid.interior();
  const int ni = static_cast<int>(interior.size());
  const int m = disc.regimes();
  const int d = grid.dim();
  const Penalty pe(params.epsilon);
  const Penalty pd(params.delta);
  const auto& theta = disc.spec().costs();
  std::vector<Eigen::Triplet<double>> t;
  for (int l = 0; l < m; ++l) {
    const int off = l * ni;
    const auto& a = disc.dirichlet_operator(l);
    for (int c = 0; c < a.outerSize(); ++c) {
      for (SparseCols::InnerIterator it(a, c); it; ++it) {
        t.emplace_back(off + static_cast<int>(it.row()), off + c, it.value());
      }
    }
    const Eigen::MatrixXd grads = disc.gradients(u[l]);
    const Eigen::VectorXd& g = disc.control_cost(l);
    for (int r = 0; r < ni; ++r) {
      const int p = interior[static_cast<size_t>(r)];
      const double norm2 = grads.row(p).squaredNorm();
      const double w = 2.0 * pe.derivative(norm2 - g(p) * g(p));
      if (w != 0.0) {
        for (int k = 0; k < d; ++k) {
          const double gk = w * grads(p, k);
          for (SparseRows::InnerIterator it(disc.gradient()[static_cast<size_t>(k)], p); it; ++it) {
            const int c = grid.interior_index(static_cast<int>(it.col()));
            if (c >= 0) t.emplace_back(off + r, off + c, gk * it.value());
          }
        }
      }
      for (int k = 0; k < m; ++k) {
        if (k == l) continue;
        const double s = pd.derivative(u[l](p) - u[k](p) - theta(l, k));
        if (s != 0.0) {
          t.emplace_back(off + r, off + r, s);
          t.emplace_back(off + r, k * ni + r, -s);
        }
      }
    }
  }
  SparseCols j(m * ni, m * ni);
  j.setFromTriplets(t.begin(), t.end());
  j.makeCompressed();
  return j;
}

// Sum of squared residuals; the line-search merit. The sup norm stalls on
// the penalty kinks, where single nodes trade places as the maximum.
double energy(const RegimeField& f) {
  double e = 0.0;
  for (int l = 0; l < f.regimes(); ++l) e += f[l].squaredNorm();
  return e;
}

SolveResult newton(const SolveParams& params, const Discretization& disc, RegimeField u, RegimeField vtilde) {
  const Grid& grid = disc.grid();
  const auto& interior = grid.interior();
  const int ni = static_cast<int>(interior.size());
  const int m = disc.regimes();
  SolveResult out;
  out.relaxation = 1.0;
  RegimeField f = residual(u, params, disc);
  double fnorm = f.sup_norm();
  double merit = energy(f);
  for (int it = 1; it <= params.max_iterations; ++it) {
    const SparseCols j = newton_jacobian(u, params, disc);
    Lu lu;
    lu.compute(j);
    if (lu.info() != Eigen::Success) {
      throw Error(ErrorKind::LinearSolveFailure, "Newton Jacobian factorization failed: " + lu.lastErrorMessage());
    }
    Eigen::VectorXd rhs(m * ni);
    for (int l = 0; l < m; ++l) {
      for (int r = 0; r < ni; ++r) rhs(l * ni + r) = -f[l](interior[static_cast<size_t>(r)]);
    }
    const Eigen::VectorXd step = lu.solve(rhs);
    if (!step.allFinite()) throw Error(ErrorKind::LinearSolveFailure, "Newton step is non-finite");

    // Backtracking on the residual energy.
    double alpha = 1.0;
    bool accepted = false;
    RegimeField trial;
    RegimeField ftrial;
    double tnorm = fnorm;
    double tmerit = merit;
    for (int k = 0; k < 40; ++k, alpha *= 0.5) {
      trial = u;
      for (int l = 0; l < m; ++l) {
        for (int r = 0; r < ni; ++r) trial[l](interior[static_cast<size_t>(r)]) += alpha * step(l * ni + r);
      }
      ftrial = residual(trial, params, disc);
      tnorm = ftrial.sup_norm();
      tmerit = energy(ftrial);
      if (tmerit <= (1.0 - 2e-4 * alpha) * merit) {
        accepted = true;
        break;
      }
    }
    const double update = alpha * step.cwiseAbs().maxCoeff();
    if (!accepted) {
      // At the rounding floor no step decreases the residual any further.
      if (fnorm <= 10.0 * params.tolerance) {
        out.iterations = it;
        break;
      }
      throw Error(ErrorKind::NoConvergence, "Newton line search failed at residual " + sci(fnorm));
    }
    u = std::move(trial);
    f = std::move(ftrial);
    fnorm = tnorm;
    merit = tmerit;
    out.final_update = update;
    out.iterations = it;
    if ((update < params.tolerance && fnorm <= 10.0 * params.tolerance) || fnorm == 0.0) break;
    if (it == params.max_iterations) {
      throw Error(ErrorKind::NoConvergence, "Newton did not converge in " + std::to_string(params.max_iterations) +
                                                " iterations (residual " + sci(fnorm) + ")");
    }
  }
  out.u = std::move(u);
  out.residual_sup = fnorm;
  out.vtilde = std::move(vtilde);
  return out;
}

}  // namespace

RegimeField solve_linear_dirichlet(const RegimeField& source, const Discretization& disc) {
  check_source(source, disc);
  return LinearSolver(disc).solve(source);
}

RegimeField solve_linear_dirichlet(const RegimeField& source, const ProblemSpec& spec, const Grid& grid) {
  return solve_linear_dirichlet(source, Discretization(spec, grid));
}

RegimeField compute_vtilde(const Discretization& disc) {
  RegimeField h(disc.regimes(), disc.grid().size());
  for (int l = 0; l < disc.regimes(); ++l) h[l] = disc.running_cost(l);
  return solve_linear_dirichlet(h, disc);
}

RegimeField compute_vtilde(const ProblemSpec& spec, const Grid& grid) {
  return compute_vtilde(Discretization(spec, grid));
}

RegimeField residual_npds(const RegimeField& u, const SolveParams& params, const Discretization& disc) {
  params.check();
  check_source(u, disc);
  return residual(u, params, disc);
}

RegimeField residual_npds(const RegimeField& u, const SolveParams& params, const ProblemSpec& spec,
                          const Grid& grid) {
  return residual_npds(u, params, Discretization(spec, grid));
}

SolveResult solve_npds(const SolveParams& params, const Discretization& disc,
                       const std::optional<RegimeField>& warm_start) {
  params.check();
  const LinearSolver linear(disc);
  RegimeField h(disc.regimes(), disc.grid().size());
  for (int l = 0; l < disc.regimes(); ++l) h[l] = disc.running_cost(l);
  RegimeField vtilde = linear.solve(h);
  RegimeField start = vtilde;
  if (warm_start) {
    check_source(*warm_start, disc);
    start = zero_outside(*warm_start, disc.grid());
  }
  if (params.method == NpdsMethod::Newton) return newton(params, disc, std::move(start), std::move(vtilde));
  return picard(params, disc, std::move(start), std::move(vtilde), linear);
}

SolveResult solve_npds(const SolveParams& params, const ProblemSpec& spec, const Grid& grid,
                       const std::optional<RegimeField>& warm_start) {
  return solve_npds(params, Discretization(spec, grid), warm_start);
}

}  // namespace switchctl
