#include "utm/quadrature.hpp"

#include <algorithm>
#include <tuple>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/format.h>

namespace utm::quad {

namespace {

template <int N>
GaussRule make_rule() {
  using G = boost::math::quadrature::gauss<double, N>;
  const auto& a = G::abscissa();
  const auto& w = G::weights();
  GaussRule r;
  r.x.assign(N, 0.0);
  r.w.assign(N, 0.0);
  // boost stores the non-negative half (including 0 for odd N); mirror it.
  const int h = static_cast<int>(a.size());
  for (int k = 0; k < h; ++k) {
    const int hi = N / 2 + (N % 2) + k - (N % 2 ? 1 : 0);
    r.x[hi] = a[k];
    r.w[hi] = w[k];
    r.x[N - 1 - hi] = -a[k];
    r.w[N - 1 - hi] = w[k];
  }
  return r;
}

}  // namespace

const GaussRule& gauss_legendre(int n) {
  static const GaussRule r4 = make_rule<4>(), r8 = make_rule<8>(), r12 = make_rule<12>(),
                         r16 = make_rule<16>(), r20 = make_rule<20>();
  switch (n) {
    case 4: return r4;
    case 8: return r8;
    case 12: return r12;
    case 16: return r16;
    case 20: return r20;
  }
  throw Error(fmt::format("unsupported Gauss-Legendre order {}", n));
}

const std::vector<double>& integration_matrix(int n) {
  static const auto build = [](int m) {
    const GaussRule& g = gauss_legendre(m);
    const GaussRule& g20 = gauss_legendre(20);
    std::vector<double> S(static_cast<std::size_t>(m) * m, 0.0);
    for (int i = 0; i < m; ++i) {
      const double half = (g.x[i] + 1) / 2;
      for (int q = 0; q < g20.size(); ++q) {
        const double s = -1 + half * (1 + g20.x[q]);
        for (int j = 0; j < m; ++j) {
          double l = 1.0;
          for (int k = 0; k < m; ++k)
            if (k != j) l *= (s - g.x[k]) / (g.x[j] - g.x[k]);
          S[i * m + j] += half * g20.w[q] * l;
        }
      }
    }
    return S;
  };
  static const std::vector<double> s4 = build(4), s8 = build(8), s12 = build(12), s16 = build(16);
  switch (n) {
    case 4: return s4;
    case 8: return s8;
    case 12: return s12;
    case 16: return s16;
  }
  throw Error(fmt::format("unsupported integration matrix order {}", n));
}

namespace {

double gk_tolerance(double rel_tol, double abs_tol, double value, double l1) {
  return std::max({rel_tol * value, abs_tol, 1e-15 * l1});
}

/// Kronrod 15-point rule on [-1, 1] with the embedded Gauss 7-point weights (0 off the Gauss nodes).
struct KronrodRule {
  std::vector<double> x, wk, wg;
};

const KronrodRule& kronrod15() {
  static const KronrodRule rule = [] {
    using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
    using G = boost::math::quadrature::gauss<double, 7>;
    KronrodRule r;
    const auto& ka = GK::abscissa();
    const auto& kw = GK::weights();
    const auto& ga = G::abscissa();
    const auto& gw = G::weights();
    for (std::size_t k = 0; k < ka.size(); ++k) {
      double g = 0.0;
      for (std::size_t j = 0; j < ga.size(); ++j)
        if (std::abs(ga[j] - ka[k]) < 1e-14) g = gw[j];
      for (double sgn : {1.0, -1.0}) {
        if (k == 0 && sgn < 0) continue;
        r.x.push_back(sgn * ka[k]);
        r.wk.push_back(kw[k]);
        r.wg.push_back(g);
      }
    }
    return r;
  }();
  return rule;
}

template <class T>
struct Segment {
  T kronrod;
  double error;
  double l1;
};

template <class T>
Segment<T> kronrod_segment(const std::function<T(double)>& f, double a, double b) {
  const KronrodRule& r = kronrod15();
  const double c = (a + b) / 2, h = (b - a) / 2;
  T k = 0.0, g = 0.0;
  double l1 = 0.0;
  for (std::size_t i = 0; i < r.x.size(); ++i) {
    const T v = f(c + h * r.x[i]);
    k += r.wk[i] * v;
    g += r.wg[i] * v;
    l1 += r.wk[i] * std::abs(v);
  }
  return {k * h, std::abs(k - g) * h, l1 * std::abs(h)};
}

/// Bisection on the interval with the largest error until the total error meets the tolerance.
template <class T>
T gk_integrate(const std::function<T(double)>& f, double a, double b, double rel_tol,
               double abs_tol) {
  if (a == b) return 0.0;
  struct Piece {
    double a, b;
    Segment<T> s;
  };
  std::vector<Piece> pieces{{a, b, kronrod_segment(f, a, b)}};
  const auto totals = [&] {
    T v = 0.0;
    double e = 0.0, l = 0.0;
    for (const auto& p : pieces) {
      v += p.s.kronrod;
      e += p.s.error;
      l += p.s.l1;
    }
    return std::tuple{v, e, l};
  };
  constexpr std::size_t kMaxPieces = 4096;
  for (;;) {
    const auto [v, err, l1] = totals();
    if (!std::isfinite(std::abs(v)))
      throw NumericalError(fmt::format("quadrature produced a non-finite value on [{}, {}]", a, b));
    const double tol = gk_tolerance(rel_tol, abs_tol, std::abs(v), l1);
    if (err <= tol) return v;
    if (pieces.size() >= kMaxPieces) {
      if (err > 10 * tol)
        throw NumericalError(fmt::format(
            "adaptive quadrature did not converge on [{}, {}] (error estimate {:.3g})", a, b, err));
      return v;
    }
    const auto worst = std::max_element(pieces.begin(), pieces.end(), [](const auto& p, const auto& q) {
      return p.s.error < q.s.error;
    });
    const double lo = worst->a, hi = worst->b, mid = (lo + hi) / 2;
    *worst = {lo, mid, kronrod_segment(f, lo, mid)};
    pieces.push_back({mid, hi, kronrod_segment(f, mid, hi)});
  }
}

}  // namespace

double integrate_fn(const std::function<double(double)>& f, double a, double b, double rel_tol,
                 double abs_tol) {
  return gk_integrate(f, a, b, rel_tol, abs_tol);
}

cplx integrate_fn(const std::function<cplx(double)>& f, double a, double b, double rel_tol,
               double abs_tol) {
  return gk_integrate(f, a, b, rel_tol, abs_tol);
}

}  // namespace utm::quad
