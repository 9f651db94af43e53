#ifndef UTM_COMMON_HPP
#define UTM_COMMON_HPP

#include <complex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace utm {

using cplx = std::complex<double>;
inline constexpr cplx I{0.0, 1.0};

/// Base class for solver errors.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// The problem violates a modelling assumption (bad coefficients, degenerate family, ...).
class AssumptionError : public Error {
public:
  using Error::Error;
};

/// A numerical procedure failed (non-convergence, overflow, singular system, ...).
class NumericalError : public Error {
public:
  using Error::Error;
};

/// Fixed-order pairwise summation; the result depends only on the input order.
template <class T>
T pairwise_sum(std::span<const T> v) {
  if (v.size() <= 8) {
    T s{};
    for (const T& x : v) s += x;
    return s;
  }
  const std::size_t h = v.size() / 2;
  return pairwise_sum(v.first(h)) + pairwise_sum(v.subspan(h));
}

template <class T>
T pairwise_sum(const std::vector<T>& v) {
  return pairwise_sum(std::span<const T>(v));
}

}  // namespace utm

#endif  // UTM_COMMON_HPP
