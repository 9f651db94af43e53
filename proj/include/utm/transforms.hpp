#ifndef UTM_TRANSFORMS_HPP
#define UTM_TRANSFORMS_HPP

#include <functional>
#include <span>
#include <vector>

#include "utm/common.hpp"
#include "utm/dispersion.hpp"
#include "utm/expr.hpp"

namespace utm {

/// A rapidly decreasing function of x (optionally of t) with certified truncation metadata.
class HalfLineProfile {
public:
  HalfLineProfile() = default;
  /// Samples the profile on [0, 400] (and at several t in [0, T_max]) to certify decay.
  HalfLineProfile(const expr::Expression& e, double T_max = 0.0);

  double operator()(double x, double t = 0.0) const {
    if (zero_) return 0.0;
    return fn_(x, t);
  }
  bool zero() const { return zero_; }
  bool time_dependent() const { return time_dependent_; }
  double X_max() const { return X_max_; }
  double decay_rate() const { return decay_rate_; }
  double max_abs() const { return max_abs_; }
  const expr::Expression& expression() const { return e_; }

private:
  expr::Expression e_;
  expr::Compiled fn_;
  bool zero_ = true;
  bool time_dependent_ = false;
  double X_max_ = 0.0;
  double decay_rate_ = INFINITY;
  double max_abs_ = 0.0;
};

/// Adaptive evaluation of the half-line transform: integral over y >= 0 of p(y,t) exp(-i lambda y).
/// Requires Im lambda <= eps_imag; a positive eps_imag must stay below the certified decay rate.
cplx half_line_ft(const HalfLineProfile& p, cplx lambda, double t = 0.0, double eps_imag = 0.0);

/// Precomputed samples of a profile at fixed times on Gauss-Legendre panels of several widths,
/// so that transforms at many arguments reduce to dot products.
class FourierBank {
public:
  FourierBank() = default;
  /// `sigmas` lists every argument that will be requested; it fixes the panel tiers.
  FourierBank(const HalfLineProfile& p, std::vector<double> taus, std::span<const cplx> sigmas,
              double eps_imag = 1e-12);

  std::size_t n_times() const { return taus_.size(); }
  const std::vector<double>& taus() const { return taus_; }
  /// Writes the transform at sigma for every stored time into out[0..n_times).
  void transform(cplx sigma, cplx* out) const;
  bool zero() const { return zero_; }

private:
  struct Tier {
    double L = 1.0;
    double length = 0.0;
    std::vector<double> y;
    std::vector<double> vals;  // n_times x y.size(), weights folded in
  };
  int tier_index(double mod) const;
  double cutoff(cplx sigma) const;

  std::vector<double> taus_;
  std::vector<Tier> tiers_;
  double X_max_ = 0.0;
  double eps_imag_ = 1e-12;
  bool zero_ = true;
};

enum class DenomMode { Inside, Outside };

/// Integral over [0, t] of exp(Omega(lambda,tau)) w(tau) D(lambda,tau) d tau with
/// D = 1/Pi(lambda,tau) (Inside) or 1 (Outside).
cplx time_weighted(const DispersionModel& m, const std::function<double(double)>& w, cplx lambda,
                   double t, DenomMode mode);

/// Same with w(tau) replaced by the transform of f(., tau) at `arg`; Omega uses lambda.
cplx fhat_time_weighted(const DispersionModel& m, const HalfLineProfile& f, cplx lambda, cplx arg,
                        double t, DenomMode mode);

}  // namespace utm

#endif  // UTM_TRANSFORMS_HPP
