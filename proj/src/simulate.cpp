#include "switchctl/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <random>
#include <thread>
#include <vector>

#include "switchctl/error.hpp"
#include "switchctl/npds_solver.hpp"

namespace switchctl {

void SimParams::check() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorKind::InvalidArgument, "dt must be positive");
  if (paths < 1) throw Error(ErrorKind::InvalidArgument, "paths must be >= 1");
  if (!(horizon_cap > 0.0) || !std::isfinite(horizon_cap)) {
    throw Error(ErrorKind::InvalidArgument, "horizon cap must be positive and finite");
  }
  if (!(tail_tolerance > 0.0)) throw Error(ErrorKind::InvalidArgument, "tail tolerance must be positive");
  if (threads < 0) throw Error(ErrorKind::InvalidArgument, "threads must be >= 0");
}

double simulation_horizon(const SimParams& params, double value_scale, double min_discount) {
  if (!(min_discount > 0.0)) throw Error(ErrorKind::NonpositiveDiscount, "horizon needs a positive discount");
  if (!(value_scale > params.tail_tolerance)) return 0.0;
  return std::min(params.horizon_cap, std::log(value_scale / params.tail_tolerance) / min_discount);
}

const std::array<std::array<double, 2>, 16>& gauss_legendre16() {
  static const auto table = [] {
    constexpr int n = 16;
    std::array<std::array<double, 2>, 16> t{};
    for (int i = 0; i < n; ++i) {
      // Newton on P_n from the Chebyshev-like initial guess.
      double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0;
        double p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      // Map [-1, 1] -> [0, 1].
      t[static_cast<size_t>(i)] = {0.5 * (1.0 - x), 1.0 / ((1.0 - x * x) * dp * dp)};
    }
    std::sort(t.begin(), t.end());
    return t;
  }();
  return table;
}

double jump_cost(const ScalarFunction& g, const Vec& x, const Vec& n, double size) {
  double sum = 0.0;
  for (const auto& [s, w] : gauss_legendre16()) sum += w * g(Vec(x - s * size * n));
  return size * sum;
}

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

int worker_count(const SimParams& params) {
  if (params.threads > 0) return params.threads;
  if (const char* env = std::getenv("SWITCHCTL_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

struct PathOutcome {
  double cost = 0.0;
  bool absorbed = false;
  bool truncated = false;
};

struct PathState {
  Vec x;
  int regime = 0;
  double r = 0.0;  // accumulated discount
  double cost = 0.0;
};

/// sigma with sigma sigma^T = 2a.
Mat volatility(const RegimeCoefficients& c, const Vec& x) {
  const Mat a2 = 2.0 * c.diffusion_at(x);
  Eigen::LLT<Mat> llt(a2);
  if (llt.info() != Eigen::Success) throw Error(ErrorKind::DegenerateEllipticity, "diffusion is not positive definite");
  return llt.matrixL();
}

// Runs `one(path, rng)` for every path; per-path seeds come from the master
// seed and the path index, the reduction runs in path order.
template <class One>
PathCostEstimate run_paths(const SimParams& params, double horizon, const One& one) {
  const int n = params.paths;
  std::vector<PathOutcome> out(static_cast<size_t>(n));
  const int workers = std::min(worker_count(params), n);
  std::vector<std::exception_ptr> errors(static_cast<size_t>(workers));
  std::vector<int> error_at(static_cast<size_t>(workers), n);
  auto work = [&](int w) {
    const int begin = static_cast<int>(static_cast<long long>(n) * w / workers);
    const int end = static_cast<int>(static_cast<long long>(n) * (w + 1) / workers);
    for (int i = begin; i < end; ++i) {
      std::mt19937_64 rng(splitmix64(params.seed ^ splitmix64(static_cast<std::uint64_t>(i))));
      try {
        out[static_cast<size_t>(i)] = one(i, rng);
      } catch (...) {
        errors[static_cast<size_t>(w)] = std::current_exception();
        error_at[static_cast<size_t>(w)] = i;
        return;
      }
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  // Contiguous chunks: the first failing worker holds the lowest failing path.
  for (int w = 0; w < workers; ++w) {
    if (errors[static_cast<size_t>(w)]) std::rethrow_exception(errors[static_cast<size_t>(w)]);
  }

  PathCostEstimate est;
  est.paths = n;
  est.horizon = horizon;
  double sum = 0.0;
  for (const auto& o : out) {
    sum += o.cost;
    est.absorbed += o.absorbed ? 1 : 0;
    est.truncated += o.truncated ? 1 : 0;
  }
  est.mean = sum / n;
  double ss = 0.0;
  for (const auto& o : out) ss += (o.cost - est.mean) * (o.cost - est.mean);
  est.standard_error = n > 1 ? std::sqrt(ss / (n - 1) / n) : 0.0;
  constexpr double z95 = 1.959963984540054;
  est.ci_low = est.mean - z95 * est.standard_error;
  est.ci_high = est.mean + z95 * est.standard_error;
  return est;
}

// One Euler-Maruyama move with the control velocity `push` (direction * rate).
void euler_step(PathState& s, const RegimeCoefficients& c, const Vec& push, double dt, bool zero_volatility,
                std::mt19937_64& rng, std::normal_distribution<double>& normal) {
  const Vec x = s.x;
  Vec next = x - (c.drift_at(x) + push) * dt;
  if (!zero_volatility) {
    Vec xi(x.size());
    for (int k = 0; k < x.size(); ++k) xi(k) = normal(rng);
    next += volatility(c, x) * xi * std::sqrt(dt);
  }
  s.r += c.discount(x) * dt;
  s.x = next;
}

void check_start(const Domain& domain, const Vec& x0, int l0, int regimes) {
  if (x0.size() != domain.dim() || !domain.contains(x0)) {
    throw Error(ErrorKind::OutOfDomain, "start point outside the closed domain");
  }
  if (l0 < 0 || l0 >= regimes) throw Error(ErrorKind::InvalidArgument, "start regime out of range");
}

// sup h and min c on a 64-per-axis lattice of the bounding box, restricted to the domain.
std::array<double, 2> sampled_scale(const ProblemSpec& spec) {
  const Domain& dom = spec.domain();
  const int s = 64;
  double hmax = 0.0;
  double cmin = INFINITY;
  const int ny = dom.dim() == 2 ? s : 1;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < s; ++i) {
      Vec x(dom.dim());
      x(0) = dom.lower()(0) + (dom.upper()(0) - dom.lower()(0)) * i / (s - 1);
      if (dom.dim() == 2) x(1) = dom.lower()(1) + (dom.upper()(1) - dom.lower()(1)) * j / (s - 1);
      if (!dom.contains(x)) continue;
      for (int l = 0; l < spec.regimes(); ++l) {
        hmax = std::max(hmax, spec.regime(l).running_cost(x));
        cmin = std::min(cmin, spec.regime(l).discount(x));
      }
    }
  }
  return {hmax, cmin};
}

}  // namespace

PathCostEstimate simulate_policy(const FeedbackPolicy& policy, const Vec& x0, int l0, const SimParams& params) {
  params.check();
  const Discretization& disc = policy.discretization();
  const ProblemSpec& spec = disc.spec();
  const Domain& dom = spec.domain();
  check_start(dom, x0, l0, spec.regimes());

  const double scale = compute_vtilde(disc).sup_norm();
  double cmin = INFINITY;
  for (int l = 0; l < spec.regimes(); ++l) {
    for (int p = 0; p < disc.grid().size(); ++p) {
      if (disc.grid().kind(p) != NodeKind::Exterior) cmin = std::min(cmin, disc.discount(l)(p));
    }
  }
  const double horizon = simulation_horizon(params, scale, cmin);
  const long long steps = static_cast<long long>(std::ceil(horizon / params.dt - 1e-9));
  const auto& theta = spec.costs();

  auto one = [&](int, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    PathState s{x0, l0, 0.0, 0.0};
    PathOutcome o;
    if (!dom.contains_interior(s.x)) {
      o.absorbed = true;
      return o;
    }
    for (long long k = 0; k < steps; ++k) {
      if (policy.should_switch(s.x, s.regime)) {
        const int next = policy.next_regime(s.x, s.regime);
        s.cost += std::exp(-s.r) * theta(s.regime, next);
        s.regime = next;
        if (policy.should_switch(s.x, s.regime)) {
          throw Error(ErrorKind::ChatterGuard, "second switch requested at the same time point");
        }
      }
      const RegimeCoefficients& c = spec.regime(s.regime);
      const ControlAction a = policy.control_at(s.x, s.regime);
      const double running = c.running_cost(s.x) + legendre_on_policy(a.grad_norm, c.control_cost(s.x), policy.penalty());
      s.cost += std::exp(-s.r) * running * params.dt;
      euler_step(s, c, Vec(a.direction * a.rate), params.dt, params.zero_volatility, rng, normal);
      if (!dom.contains_interior(s.x)) {
        o.absorbed = true;
        o.cost = s.cost;
        return o;
      }
    }
    o.truncated = true;
    o.cost = s.cost;
    return o;
  };
  return run_paths(params, horizon, one);
}

PathCostEstimate simulate_admissible(const AdmissibleStrategy& strategy, const Vec& x0, int l0,
                                     const SimParams& params, const ProblemSpec& spec, CostMode mode,
                                     double epsilon) {
  params.check();
  if (!spec.validated()) throw Error(ErrorKind::NotValidated, "problem spec has not been validated");
  if (!strategy.control) throw Error(ErrorKind::InvalidArgument, "strategy has no control rule");
  const Domain& dom = spec.domain();
  check_start(dom, x0, l0, spec.regimes());
  std::optional<Penalty> penalty;
  if (mode == CostMode::Penalized) penalty.emplace(epsilon);

  const auto [hmax, cmin] = sampled_scale(spec);
  const double horizon = simulation_horizon(params, hmax / cmin, cmin);
  const long long steps = static_cast<long long>(std::ceil(horizon / params.dt - 1e-9));
  const auto& theta = spec.costs();

  auto one = [&](int, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    PathState s{x0, l0, 0.0, 0.0};
    PathOutcome o;
    // Penalized mode: strategies hold rates piecewise constant, so one cached
    // Legendre evaluation covers most steps.
    double memo_y = -1.0;
    double memo_g = -1.0;
    double memo_value = 0.0;
    if (!dom.contains_interior(s.x)) {
      o.absorbed = true;
      return o;
    }
    for (long long k = 0; k < steps; ++k) {
      const double t = static_cast<double>(k) * params.dt;
      if (strategy.switching) {
        if (auto next = strategy.switching(t, params.dt, s.x, s.regime); next && *next != s.regime) {
          if (*next < 0 || *next >= spec.regimes()) throw Error(ErrorKind::InvalidArgument, "switch target out of range");
          s.cost += std::exp(-s.r) * theta(s.regime, *next);
          s.regime = *next;
          if (auto again = strategy.switching(t, params.dt, s.x, s.regime); again && *again != s.regime) {
            throw Error(ErrorKind::ChatterGuard, "second switch requested at the same time point");
          }
        }
      }
      const RegimeCoefficients& c = spec.regime(s.regime);
      const StrategyAction a = strategy.control(t, params.dt, s.x, s.regime);
      if (a.rate < 0.0 || a.jump < 0.0) throw Error(ErrorKind::InvalidArgument, "negative control rate or jump");
      if (a.rate > strategy.rate_cap) throw Error(ErrorKind::InvalidArgument, "control rate exceeds the cap");
      if ((a.rate > 0.0 || a.jump > 0.0) && std::abs(a.direction.norm() - 1.0) > 1e-9) {
        throw Error(ErrorKind::InvalidArgument, "control direction is not a unit vector");
      }
      if (a.jump > 0.0) {
        if (mode == CostMode::Penalized) throw Error(ErrorKind::InvalidArgument, "jumps are not allowed in penalized mode");
        const Vec landing = s.x - a.direction * a.jump;
        if (!dom.contains(landing)) throw Error(ErrorKind::InadmissibleJump, "jump leaves the closed domain");
        s.cost += std::exp(-s.r) * jump_cost(c.control_cost, s.x, a.direction, a.jump);
        s.x = landing;
        if (!dom.contains_interior(s.x)) {
          o.absorbed = true;
          o.cost = s.cost;
          return o;
        }
      }
      const double g = c.control_cost(s.x);
      double control = 0.0;
      if (mode == CostMode::Singular) {
        control = g * a.rate;
      } else {
        if (a.rate != memo_y || g != memo_g) {
          memo_y = a.rate;
          memo_g = g;
          memo_value = legendre(a.rate, g, *penalty);
        }
        control = memo_value;
      }
      s.cost += std::exp(-s.r) * (c.running_cost(s.x) + control) * params.dt;
      const Vec push = a.rate > 0.0 ? Vec(a.direction * a.rate) : Vec(Vec::Zero(s.x.size()));
      euler_step(s, c, push, params.dt, params.zero_volatility, rng, normal);
      if (!dom.contains_interior(s.x)) {
        o.absorbed = true;
        o.cost = s.cost;
        return o;
      }
    }
    o.truncated = true;
    o.cost = s.cost;
    return o;
  };
  return run_paths(params, horizon, one);
}

}  // namespace switchctl
