#ifndef UTM_GRID_HPP
#define UTM_GRID_HPP

#include <string>
#include <vector>

#include "utm/common.hpp"

namespace utm {

/// Values on a tensor grid, stored x-major: u[ix * ts.size() + it].
struct SolutionGrid {
  std::vector<double> xs;
  std::vector<double> ts;
  std::vector<cplx> u;
  std::string scheme;
  /// Estimated error of the values (Richardson for the oracle, 0 when not estimated).
  double error_estimate = 0.0;

  cplx& at(std::size_t ix, std::size_t it) { return u[ix * ts.size() + it]; }
  const cplx& at(std::size_t ix, std::size_t it) const { return u[ix * ts.size() + it]; }
  double max_abs_imag() const {
    double m = 0.0;
    for (const cplx& v : u) m = std::max(m, std::abs(v.imag()));
    return m;
  }
};

}  // namespace utm

#endif  // UTM_GRID_HPP
