#ifndef UTM_ORACLE_HPP
#define UTM_ORACLE_HPP

#include <map>
#include <vector>

#include "utm/assembly.hpp"
#include "utm/grid.hpp"

namespace utm::oracle {

/// Uniform grid x_j = j X_max / (n_x - 1) and n_t time steps of length dt.
struct Grid {
  double X_max = 30.0;
  int n_x = 1201;
  double dt = 1.0 / 160;
  int n_t = 160;
};

/// Finite-difference weights for the n-th derivative at z from the given nodes.
std::vector<double> fd_weights(double z, const std::vector<double>& nodes, int n);

/// Crank-Nicolson march on the grid; returns u at every grid node and every step (t = k dt).
SolutionGrid fd_solve(const ProblemSpec& spec, const Grid& g);

struct Settings {
  double h = 0.0125;      // fine grid spacing
  double dt = 1.0 / 320;  // fine time step upper bound
  double X_max = 0.0;     // 0: max(30, data truncation radius)
};

/// Fine and coarse (2h, 2dt) solves sampled at (xs, ts); the values are the fine solution and
/// error_estimate is max |fine - coarse| / 3 over the requested points.
SolutionGrid fd_reference(const ProblemSpec& spec, const std::vector<double>& xs,
                          const std::vector<double>& ts, const Settings& s = {});

struct Manufactured {
  expr::Expression f;
  expr::Expression u0;
  std::vector<expr::Expression> g;  // g[k] = d^k u*/dx^k at x = 0, for k below the mass order
};

/// Applies the family operator to u_star symbolically.
Manufactured manufacture_forcing(const ProblemSpec& spec, const expr::Expression& u_star);

/// Copy of spec with f, u0 and the given boundary data replaced by those of u_star.
ProblemSpec manufactured_problem(const ProblemSpec& spec, const expr::Expression& u_star);

struct CompareReport {
  double linf = 0.0;  // relative to max |fd|
  double l2 = 0.0;
  double abs_linf = 0.0;
  double scale = 0.0;
  int points = 0;
  double oracle_estimate = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// Discrepancy over x <= x_limit with the corner layer x + t < 0.01 excluded. The default
/// tolerance is max(1e-3, 3 * fd.error_estimate).
CompareReport compare(const SolutionGrid& utm, const SolutionGrid& fd, double x_limit,
                      double tolerance = -1.0);

}  // namespace utm::oracle

#endif  // UTM_ORACLE_HPP
