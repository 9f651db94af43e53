#ifndef UTM_POLY_HPP
#define UTM_POLY_HPP

#include <vector>

#include "utm/common.hpp"

namespace utm::poly {

/// Coefficients in ascending order: p(z) = c[0] + c[1] z + ...
using Poly = std::vector<cplx>;

cplx eval(const Poly& p, cplx z);
/// Value and derivative.
std::pair<cplx, cplx> eval_d(const Poly& p, cplx z);
Poly trim(Poly p);
/// Sum of |c_k| |z|^k, the natural scale for residuals.
double scale(const Poly& p, cplx z);

/// All roots via companion-matrix eigenvalues followed by Newton polishing.
std::vector<cplx> roots(const Poly& p);

}  // namespace utm::poly

#endif  // UTM_POLY_HPP
