#include "utm/poly.hpp"

#include <algorithm>

#include <Eigen/Dense>
#include <fmt/format.h>

namespace utm::poly {

cplx eval(const Poly& p, cplx z) {
  cplx s = 0;
  for (auto it = p.rbegin(); it != p.rend(); ++it) s = s * z + *it;
  return s;
}

std::pair<cplx, cplx> eval_d(const Poly& p, cplx z) {
  cplx s = 0, ds = 0;
  for (auto it = p.rbegin(); it != p.rend(); ++it) {
    ds = ds * z + s;
    s = s * z + *it;
  }
  return {s, ds};
}

Poly trim(Poly p) {
  while (!p.empty() && p.back() == 0.0) p.pop_back();
  return p;
}

double scale(const Poly& p, cplx z) {
  double s = 0, zk = 1;
  for (const cplx& c : p) {
    s += std::abs(c) * zk;
    zk *= std::abs(z);
  }
  return s;
}

std::vector<cplx> roots(const Poly& p_in) {
  const Poly p = trim(p_in);
  if (p.size() < 2) return {};
  const int n = static_cast<int>(p.size()) - 1;
  Eigen::MatrixXcd comp = Eigen::MatrixXcd::Zero(n, n);
  for (int k = 0; k < n; ++k) comp(0, k) = -p[n - 1 - k] / p[n];
  for (int k = 1; k < n; ++k) comp(k, k - 1) = 1.0;
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(comp, false);
  if (es.info() != Eigen::Success) throw NumericalError("companion eigenvalue solve failed");
  std::vector<cplx> r(es.eigenvalues().data(), es.eigenvalues().data() + n);
  for (cplx& z : r) {
    for (int it = 0; it < 8; ++it) {
      const auto [f, df] = eval_d(p, z);
      if (df == 0.0) break;
      const cplx step = f / df;
      z -= step;
      if (std::abs(step) <= 1e-16 * (1 + std::abs(z))) break;
    }
  }
  return r;
}

}  // namespace utm::poly
