#pragma once

#include <cstdint>
#include <vector>

#include "switchctl/grid.hpp"
#include "switchctl/problem.hpp"

namespace switchctl::testing {

// Two regimes on (0,1): a=1, b=0, c=1, g=0.3, h=(h1,h2), symmetric theta.
inline ProblemSpec two_regime_line(double h1 = 1.0, double h2 = 0.5, double theta = 0.2, double g = 0.3) {
  std::vector<RegimeCoefficients> r{RegimeCoefficients::isotropic(1, 1.0, 1.0, h1, g),
                                    RegimeCoefficients::isotropic(1, 1.0, 1.0, h2, g)};
  return validated(ProblemSpec(Domain::interval(0.0, 1.0), std::move(r), SwitchingCosts::uniform(2, theta)));
}

inline ProblemSpec one_regime_line(double h = 1.0, double g = 0.3) {
  std::vector<RegimeCoefficients> r{RegimeCoefficients::isotropic(1, 1.0, 1.0, h, g)};
  return validated(ProblemSpec(Domain::interval(0.0, 1.0), std::move(r), SwitchingCosts::uniform(1, 0.0)));
}

inline Discretization line_disc(ProblemSpec spec, int n) {
  Grid grid(spec.domain(), {n});
  return Discretization(std::move(spec), std::move(grid));
}

// splitmix64, enough for hand-rolled generators in property tests
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  double uniform(double lo = 0.0, double hi = 1.0) {
    return lo + (hi - lo) * static_cast<double>(next() >> 11) * 0x1.0p-53;
  }
  int below(int n) { return static_cast<int>(next() % static_cast<std::uint64_t>(n)); }

 private:
  std::uint64_t state_;
};

}  // namespace switchctl::testing
