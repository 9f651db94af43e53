#ifndef UTM_DISPERSION_HPP
#define UTM_DISPERSION_HPP

#include <functional>
#include <string>
#include <vector>

#include "utm/common.hpp"
#include "utm/expr.hpp"
#include "utm/poly.hpp"

namespace utm {

/// A scalar coefficient function of t given by an expression.
class CoefFn {
public:
  CoefFn() : CoefFn(expr::num(0)) {}
  explicit CoefFn(const expr::Expression& e);

  double operator()(double t) const { return constant_ ? value_ : fn_(t); }
  bool constant() const { return constant_; }
  bool zero() const { return constant_ && value_ == 0.0; }
  /// Exact for constants, adaptive quadrature otherwise.
  double integral(double t) const;
  const expr::Expression& expression() const { return e_; }

private:
  expr::Expression e_;
  expr::Compiled fn_;
  bool constant_ = true;
  double value_ = 0.0;
};

enum Slot { kAlpha = 0, kBeta = 1, kGamma = 2, kDelta = 3 };

/// One term of P = d/dt + sum a_n(t) d^n/dx^n d/dt + sum b_n(t) d^n/dx^n.
struct OperatorTerm {
  int order;
  bool mass;    // true: multiplies the time derivative (a_n), false: b_n
  double sign;  // a_n or b_n = sign * coefficient[slot]
  Slot slot;
};

struct FamilyInfo {
  int family = 1;
  int nu = 1;
  std::string name;
  /// Families 1, 3, 8, 9: denominator 1 + alpha(t) lambda^k, kept inside the time integrals.
  bool scalar_profile = false;
  int mass_order = 2;
  std::vector<OperatorTerm> terms;
  std::vector<Slot> constant_slots;
  std::vector<Slot> used_slots;
  /// Admissible sets of prescribed boundary-derivative orders.
  std::vector<std::vector<int>> boundary_sets;
};

FamilyInfo family_info(int family, int nu = 1);
/// Accepts "1".."9" or a family name.
int family_from_name(const std::string& name);

struct SymmetryMap {
  enum class Kind { Linear, Inversion, Tracked };
  Kind kind = Kind::Linear;
  cplx mu = -1.0;  // Linear: sigma = mu * lambda
  double c = 1.0;  // Inversion: sigma = 1 / (c lambda)
  /// Tracked: coefficients (ascending in sigma) of the defining polynomial at lambda.
  std::function<poly::Poly(cplx)> q;
  cplx seed_lambda = 0.0;
  cplx seed_sigma = 0.0;
  int contour = 0;
  std::string label;

  /// Continuation along a path; tracked maps start from the seed and walk node to node.
  std::vector<cplx> along(const std::vector<cplx>& path, bool closed = false) const;
  /// Single point; tracked maps follow the straight segment from the seed.
  cplx operator()(cplx lambda) const;
};

struct PoleSet {
  std::vector<cplx> all;    // every zero of the denominator at the given t
  std::vector<cplx> upper;  // upper half-plane zeros ordered by argument
  double c0 = 0.0;          // inf over t of the root modulus, shrunk by 1%
  double C0 = 0.0;          // sup over t, enlarged by 1%
  bool C0_finite = true;
};

struct Family7Check {
  double value;
  double scale;
  bool pass;
};
Family7Check validate_family7(double alpha, double beta, double gamma);

class DispersionModel {
public:
  DispersionModel(int family, int nu, const std::vector<expr::Expression>& coefficients,
                  double T_max);

  const FamilyInfo& info() const { return info_; }
  int family() const { return info_.family; }
  int nu() const { return info_.nu; }
  int degree() const { return info_.mass_order; }
  bool scalar_profile() const { return info_.scalar_profile; }
  double T_max() const { return T_max_; }
  const CoefFn& coef(Slot s) const { return coef_[s]; }
  double term_value(const OperatorTerm& term, double t) const {
    return term.sign * coef_[term.slot](t);
  }

  /// Mass coefficients constant in t: Omega factors as a lambda-prefactor times integrals.
  bool factored() const { return factored_; }

  cplx Pi(cplx lambda, double t) const;
  cplx N(cplx lambda, double t) const;
  poly::Poly Pi_poly(double t) const;
  cplx omega(cplx lambda, double t) const;
  cplx big_omega(cplx lambda, double t) const;
  /// Limit of omega as |lambda| -> infinity along the real axis.
  double omega_inf(double t) const;
  double big_omega_inf(double t) const;

  PoleSet poles(double t) const;
  /// Targets of the upper half-plane contours: ray angles (scalar profile) or poles.
  std::vector<double> ray_angles() const;
  const PoleSet& reference_poles() const { return ref_poles_; }

  std::vector<SymmetryMap> symmetry_maps() const;
  std::vector<SymmetryMap> maps_for(int contour) const;
  int contour_count() const;

  std::string describe() const;

private:
  FamilyInfo info_;
  std::vector<CoefFn> coef_;
  double T_max_;
  bool factored_ = true;
  PoleSet ref_poles_;
};

}  // namespace utm

#endif  // UTM_DISPERSION_HPP
