#ifndef UTM_QUADRATURE_HPP
#define UTM_QUADRATURE_HPP

#include <array>
#include <cmath>
#include <concepts>
#include <functional>
#include <type_traits>
#include <vector>

#include "utm/common.hpp"

namespace utm::quad {

/// Gauss-Legendre rule on [-1, 1], nodes in increasing order.
struct GaussRule {
  std::vector<double> x;
  std::vector<double> w;
  int size() const { return static_cast<int>(x.size()); }
};

/// Supported orders: 4, 8, 12, 16, 20.
const GaussRule& gauss_legendre(int n);
inline const GaussRule& gl16() { return gauss_legendre(16); }

/// S(i, j) = integral from -1 to x_i of the j-th Lagrange basis polynomial of the rule,
/// stored row-major; integrates interpolants cumulatively.
const std::vector<double>& integration_matrix(int n);

/// Adaptive Gauss-Kronrod (15 point) on [a, b]; throws NumericalError when the
/// error estimate stays above max(rel_tol*|I|, abs_tol).
double integrate_fn(const std::function<double(double)>& f, double a, double b, double rel_tol,
                    double abs_tol = 0.0);
cplx integrate_fn(const std::function<cplx(double)>& f, double a, double b, double rel_tol,
                  double abs_tol = 0.0);

/// Dispatches on the result type of an arbitrary callable.
template <class F>
  requires std::invocable<F, double>
auto integrate(F&& f, double a, double b, double rel_tol, double abs_tol = 0.0) {
  using R = std::invoke_result_t<F, double>;
  if constexpr (std::is_same_v<R, cplx>)
    return integrate_fn(std::function<cplx(double)>(std::forward<F>(f)), a, b, rel_tol, abs_tol);
  else
    return integrate_fn(std::function<double(double)>(std::forward<F>(f)), a, b, rel_tol, abs_tol);
}

/// Composite Simpson rule with n (even) panels; used as an independent reference.
template <class F>
auto simpson(F&& f, double a, double b, int n) {
  const double h = (b - a) / n;
  auto s = f(a) + f(b);
  for (int k = 1; k < n; ++k) s += f(a + k * h) * (k % 2 ? 4.0 : 2.0);
  return s * (h / 3.0);
}

}  // namespace utm::quad

#endif  // UTM_QUADRATURE_HPP
