#include "utm/dispersion.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "utm/quadrature.hpp"

namespace utm {

namespace {

constexpr const char* kSlotNames[4] = {"alpha", "beta", "gamma", "delta"};
constexpr int kTSamples = 1024;

cplx ipow(cplx z, int n) {
  cplx r = 1.0;
  for (int k = 0; k < n; ++k) r *= z;
  return r;
}

const std::vector<std::string>& family_names() {
  static const std::vector<std::string> names = {
      "pseudo-parabolic",     "bbm-type",          "fourth-order-pseudo-parabolic",
      "fourth-order-bbm",     "mixed-fourth-order", "mixed-fourth-order-advective",
      "sixth-order-mixed",    "sixth-order-pseudo-parabolic", "general-order"};
  return names;
}

}  // namespace

// ---------------------------------------------------------------- CoefFn

CoefFn::CoefFn(const expr::Expression& e) : e_(expr::fold(e)) {
  for (const auto& v : expr::variables(e_))
    if (v != "t")
      throw AssumptionError(
          fmt::format("coefficient '{}' may depend on t only (found '{}')", expr::print(e_), v));
  constant_ = !expr::depends_on(e_, "t");
  if (constant_)
    value_ = expr::eval(e_, {});
  else
    fn_ = expr::Compiled(e_, {"t"});
}

double CoefFn::integral(double t) const {
  if (constant_) return value_ * t;
  if (t == 0.0) return 0.0;
  return quad::integrate([this](double s) { return fn_(s); }, 0.0, t, 1e-13, 1e-15);
}

// ---------------------------------------------------------------- families

FamilyInfo family_info(int family, int nu) {
  FamilyInfo f;
  f.family = family;
  if (family < 1 || family > 9) throw AssumptionError(fmt::format("unknown family {}", family));
  f.name = family_names()[family - 1];
  if (family != 9) nu = (family == 1 || family == 2) ? 1 : (family <= 7 ? 2 : 3);
  if (family == 9 && (nu < 1 || nu > 6))
    throw AssumptionError(fmt::format("family 9 requires 1 <= nu <= 6 (got {})", nu));
  f.nu = nu;
  auto m = [](int n, double s, Slot sl) { return OperatorTerm{n, true, s, sl}; };
  auto b = [](int n, double s, Slot sl) { return OperatorTerm{n, false, s, sl}; };
  switch (family) {
    case 1:
      f.terms = {m(2, -1, kAlpha), b(2, -1, kBeta), b(0, 1, kGamma)};
      f.scalar_profile = true;
      f.boundary_sets = {{0}, {1}};
      break;
    case 2:
      f.terms = {m(2, -1, kAlpha), b(1, 1, kBeta)};
      f.constant_slots = {kAlpha};
      f.boundary_sets = {{0}};
      break;
    case 3:
      f.terms = {m(4, 1, kAlpha), b(4, 1, kBeta), b(0, 1, kGamma)};
      f.scalar_profile = true;
      f.boundary_sets = {{0, 1}};
      break;
    case 4:
      f.terms = {m(4, 1, kAlpha), b(2, -1, kBeta)};
      f.constant_slots = {kAlpha};
      f.boundary_sets = {{0, 1}};
      break;
    case 5:
      f.terms = {m(4, 1, kAlpha), m(2, -1, kBeta), b(4, 1, kGamma)};
      f.constant_slots = {kAlpha, kBeta};
      f.boundary_sets = {{0, 1}};
      break;
    case 6:
      f.terms = {m(4, 1, kAlpha), m(2, -1, kBeta), b(1, 1, kGamma)};
      f.constant_slots = {kAlpha, kBeta};
      f.boundary_sets = {{0, 1}};
      break;
    case 7:
      f.terms = {m(6, -1, kAlpha), m(4, 1, kBeta), m(2, -1, kGamma), b(2, -1, kDelta)};
      f.constant_slots = {kAlpha, kBeta, kGamma};
      f.boundary_sets = {{0, 1, 2}};
      break;
    case 8:
      f.terms = {m(6, -1, kAlpha), b(6, -1, kBeta), b(0, 1, kGamma)};
      f.scalar_profile = true;
      f.boundary_sets = {{0, 1, 2}};
      break;
    case 9: {
      const double s = (nu % 2) ? -1.0 : 1.0;
      f.terms = {m(2 * nu, s, kAlpha), b(2 * nu, s, kBeta), b(0, 1, kGamma)};
      f.scalar_profile = true;
      std::vector<int> given(nu);
      for (int k = 0; k < nu; ++k) given[k] = k;
      f.boundary_sets = {given};
      break;
    }
  }
  f.mass_order = 0;
  for (const auto& t : f.terms) {
    if (t.mass) f.mass_order = std::max(f.mass_order, t.order);
    if (std::find(f.used_slots.begin(), f.used_slots.end(), t.slot) == f.used_slots.end())
      f.used_slots.push_back(t.slot);
  }
  std::sort(f.used_slots.begin(), f.used_slots.end());
  return f;
}

int family_from_name(const std::string& name) {
  if (name.size() == 1 && name[0] >= '1' && name[0] <= '9') return name[0] - '0';
  std::string low;
  for (char c : name) low.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  const auto& names = family_names();
  for (std::size_t k = 0; k < names.size(); ++k)
    if (names[k] == low) return static_cast<int>(k) + 1;
  throw AssumptionError(fmt::format("unknown operator family '{}'", name));
}

// ---------------------------------------------------------------- symmetry maps

std::vector<cplx> SymmetryMap::along(const std::vector<cplx>& path, bool closed) const {
  std::vector<cplx> out;
  out.reserve(path.size());
  if (kind == Kind::Linear) {
    for (cplx z : path) out.push_back(mu * z);
    return out;
  }
  if (kind == Kind::Inversion) {
    for (cplx z : path) {
      if (z == 0.0) throw NumericalError("inversion map evaluated at lambda = 0");
      out.push_back(1.0 / (c * z));
    }
    return out;
  }

  cplx lam = seed_lambda, sig = seed_sigma;
  {
    const auto p = q(lam);
    if (std::abs(poly::eval(p, sig)) > 1e-9 * poly::scale(p, sig))
      throw NumericalError(fmt::format("map {}: seed ({}, {}) is not a root of its defining polynomial",
                                       label, fmt::to_string(lam.real()), fmt::to_string(sig.real())));
  }
  auto step_to = [&](cplx target) {
    const cplx start = lam;
    double s = 0.0, h = 1.0;
    while (s < 1.0) {
      const double hh = std::min(h, 1.0 - s);
      const cplx next = start + (target - start) * (s + hh);
      const auto r = poly::roots(q(next));
      double d1 = INFINITY, d2 = INFINITY;
      cplx best = sig;
      for (cplx z : r) {
        const double d = std::abs(z - sig);
        if (d < d1) {
          d2 = d1;
          d1 = d;
          best = z;
        } else if (d < d2) {
          d2 = d;
        }
      }
      if (d2 - d1 <= 1e-8 * (1.0 + std::abs(sig)))
        throw NumericalError(fmt::format(
            "map {}: branch tracking is ambiguous at lambda = {:.12g}{:+.12g}i", label,
            next.real(), next.imag()));
      if (d1 > 0.3 * d2 && hh > 1e-7) {
        h = hh / 2;
        continue;
      }
      sig = best;
      s += hh;
      h = std::min(1.0, 2 * hh);
    }
    lam = target;
  };
  for (cplx z : path) {
    step_to(z);
    out.push_back(sig);
  }
  if (closed && !path.empty()) {
    step_to(path.front());
    if (std::abs(sig - out.front()) > 1e-8 * (1.0 + std::abs(sig)))
      throw NumericalError(fmt::format("map {}: tracked branch does not close around the contour",
                                       label));
  }
  return out;
}

cplx SymmetryMap::operator()(cplx lambda) const { return along({lambda}).front(); }

// ---------------------------------------------------------------- family 7

Family7Check validate_family7(double a, double b, double g) {
  Eigen::Matrix<double, 5, 5> m;
  m << a, 0, 3 * a, 0, 0,      //
      b, a, 2 * b, 3 * a, 0,   //
      g, b, g, 2 * b, 3 * a,   //
      1, g, 0, g, 2 * b,       //
      0, 1, 0, 0, g;
  double scale = 1.0;
  for (int c = 0; c < 5; ++c) scale *= m.col(c).norm();
  const double det = m.fullPivLu().determinant();
  return {det, scale, std::abs(det) > 1e-12 * scale};
}

// ---------------------------------------------------------------- model

DispersionModel::DispersionModel(int family, int nu,
                                 const std::vector<expr::Expression>& coefficients, double T_max)
    : info_(family_info(family, nu)), coef_(4), T_max_(T_max) {
  if (!(T_max > 0.0) || !std::isfinite(T_max))
    throw AssumptionError(fmt::format("T_max must be positive and finite (got {})", T_max));
  if (coefficients.size() > 4) throw AssumptionError("at most four coefficients (alpha..delta)");
  for (std::size_t s = 0; s < coefficients.size(); ++s) {
    coef_[s] = CoefFn(coefficients[s]);
    const bool used = std::find(info_.used_slots.begin(), info_.used_slots.end(),
                                static_cast<Slot>(s)) != info_.used_slots.end();
    if (!used && !coef_[s].zero())
      throw AssumptionError(fmt::format("coefficient {} is not used by family {}", kSlotNames[s],
                                        info_.family));
  }
  for (Slot s : info_.constant_slots)
    if (!coef_[s].constant())
      throw AssumptionError(fmt::format("family {} requires a constant {} (got '{}')",
                                        info_.family, kSlotNames[s],
                                        expr::print(coef_[s].expression())));

  for (int k = 0; k < kTSamples; ++k) {
    const double t = T_max_ * k / (kTSamples - 1);
    for (Slot s : info_.used_slots) {
      const double v = coef_[s](t);
      if (!std::isfinite(v))
        throw AssumptionError(fmt::format("{}(t) is not finite at t = {}", kSlotNames[s], t));
    }
    if (!(coef_[kAlpha](t) > 0.0))
      throw AssumptionError(fmt::format("alpha(t) > 0 is violated at t = {} (alpha = {})", t,
                                        coef_[kAlpha](t)));
    if (info_.family == 1 && coef_[kBeta](t) == 0.0)
      throw AssumptionError(fmt::format("family 1 requires beta(t) != 0; violated at t = {}", t));
  }

  for (const auto& term : info_.terms)
    if (term.mass && !coef_[term.slot].constant()) factored_ = false;

  if (info_.family == 5 || info_.family == 6) {
    const double a = coef_[kAlpha](0), b = coef_[kBeta](0);
    const double disc = 4 * a - b * b;
    if (std::abs(disc) <= 1e-12 * std::max(4 * a, b * b))
      throw AssumptionError(fmt::format(
          "family {}: 4*alpha = beta^2, so Pi(lambda) = 1 + beta*lambda^2 + alpha*lambda^4 has two "
          "double zeros; this degenerate case is not supported",
          info_.family));
    if (disc < 0 && b < 0)
      throw AssumptionError(fmt::format(
          "family {}: 4*alpha < beta^2 with beta < 0 puts zeros of Pi on the real axis",
          info_.family));
  }
  if (info_.family == 7) {
    const auto chk = validate_family7(coef_[kAlpha](0), coef_[kBeta](0), coef_[kGamma](0));
    if (!chk.pass)
      throw AssumptionError(fmt::format(
          "family 7: the resultant R(w, w') of w(mu) = alpha*mu^3 + beta*mu^2 + gamma*mu + 1 "
          "vanishes (value {:.3g}, scale {:.3g}); Pi has repeated zeros",
          chk.value, chk.scale));
  }

  ref_poles_ = poles(0.0);
  if (info_.scalar_profile) {
    double lo = INFINITY, hi = 0.0;
    for (int k = 0; k < kTSamples; ++k) {
      const double t = T_max_ * k / (kTSamples - 1);
      const double r = std::pow(coef_[kAlpha](t), -1.0 / info_.mass_order);
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    ref_poles_.c0 = 0.99 * lo;
    ref_poles_.C0 = 1.01 * hi;
    ref_poles_.C0_finite = std::isfinite(hi);
  }
  if (static_cast<int>(ref_poles_.upper.size()) * 2 != info_.mass_order)
    throw AssumptionError(fmt::format(
        "family {}: the denominator must have {} zeros in the upper half-plane (found {})",
        info_.family, info_.mass_order / 2, ref_poles_.upper.size()));
  for (cplx z : ref_poles_.all)
    if (std::abs(z.imag()) <= 1e-9 * (1 + std::abs(z)))
      throw AssumptionError(fmt::format("denominator has a zero on the real axis ({:.6g})",
                                        z.real()));
}

poly::Poly DispersionModel::Pi_poly(double t) const {
  poly::Poly p(info_.mass_order + 1, 0.0);
  p[0] = 1.0;
  for (const auto& term : info_.terms)
    if (term.mass) p[term.order] += term_value(term, t) * ipow(I, term.order);
  return p;
}

cplx DispersionModel::Pi(cplx lambda, double t) const {
  cplx s = 1.0;
  for (const auto& term : info_.terms)
    if (term.mass) s += term_value(term, t) * ipow(I * lambda, term.order);
  return s;
}

cplx DispersionModel::N(cplx lambda, double t) const {
  cplx s = 0.0;
  for (const auto& term : info_.terms)
    if (!term.mass) s += term_value(term, t) * ipow(I * lambda, term.order);
  return s;
}

cplx DispersionModel::omega(cplx lambda, double t) const {
  const cplx p = Pi(lambda, t);
  const double sc = 1.0 + std::pow(std::abs(lambda), info_.mass_order);
  if (std::abs(p) <= 1e-12 * sc)
    throw NumericalError(fmt::format("lambda = {:.12g}{:+.12g}i is within 1e-12 of a pole at t = {}",
                                     lambda.real(), lambda.imag(), t));
  return N(lambda, t) / p;
}

cplx DispersionModel::big_omega(cplx lambda, double t) const {
  if (t == 0.0) return 0.0;
  if (factored_) {
    cplx s = 0.0;
    for (const auto& term : info_.terms)
      if (!term.mass) s += term.sign * coef_[term.slot].integral(t) * ipow(I * lambda, term.order);
    const cplx p = Pi(lambda, 0.0);
    if (std::abs(p) <= 1e-12 * (1.0 + std::pow(std::abs(lambda), info_.mass_order)))
      throw NumericalError("big_omega evaluated at a pole of the denominator");
    return s / p;
  }
  return quad::integrate([&](double tau) { return omega(lambda, tau); }, 0.0, t, 1e-10, 1e-14);
}

double DispersionModel::omega_inf(double t) const {
  int top_n = -1;
  double top_b = 0.0, top_a = 0.0;
  for (const auto& term : info_.terms)
    if (!term.mass && term.order > top_n) top_n = term.order;
  if (top_n < info_.mass_order) return 0.0;
  for (const auto& term : info_.terms) {
    if (term.order != top_n) continue;
    (term.mass ? top_a : top_b) += term_value(term, t);
  }
  return top_b / top_a;
}

double DispersionModel::big_omega_inf(double t) const {
  if (t == 0.0) return 0.0;
  bool all_const = true;
  for (Slot s : info_.used_slots) all_const = all_const && coef_[s].constant();
  if (all_const) return omega_inf(0.0) * t;
  return quad::integrate([this](double tau) { return omega_inf(tau); }, 0.0, t, 1e-13, 1e-15);
}

PoleSet DispersionModel::poles(double t) const {
  const poly::Poly p = Pi_poly(t);
  PoleSet ps;
  ps.all = poly::roots(p);
  const int k = info_.mass_order;
  if (static_cast<int>(ps.all.size()) != k)
    throw NumericalError(fmt::format("expected {} zeros of the denominator, found {}", k,
                                     ps.all.size()));
  for (cplx z : ps.all) {
    if (std::abs(poly::eval(p, z)) > 1e-10 * (1.0 + std::pow(std::abs(z), k)))
      throw NumericalError("denominator root finding did not converge");
  }
  double scale = 0.0;
  for (cplx z : ps.all) scale = std::max(scale, std::abs(z));
  for (std::size_t a = 0; a < ps.all.size(); ++a)
    for (std::size_t b = a + 1; b < ps.all.size(); ++b)
      if (std::abs(ps.all[a] - ps.all[b]) <= 1e-6 * scale)
        throw NumericalError(fmt::format("denominator has a repeated zero near {:.8g}{:+.8g}i",
                                         ps.all[a].real(), ps.all[a].imag()));
  for (cplx z : ps.all)
    if (z.imag() > 0) ps.upper.push_back(z);
  std::sort(ps.upper.begin(), ps.upper.end(),
            [](cplx a, cplx b) { return std::arg(a) < std::arg(b); });
  double lo = INFINITY, hi = 0.0;
  for (cplx z : ps.upper) {
    lo = std::min(lo, std::abs(z));
    hi = std::max(hi, std::abs(z));
  }
  ps.c0 = 0.99 * lo;
  ps.C0 = 1.01 * hi;
  return ps;
}

std::vector<double> DispersionModel::ray_angles() const {
  std::vector<double> r;
  if (info_.scalar_profile) {
    const int nu = info_.mass_order / 2;
    for (int j = 1; j <= nu; ++j) r.push_back(std::numbers::pi * (2 * j - 1) / (2.0 * nu));
  } else {
    for (cplx z : ref_poles_.upper) r.push_back(std::arg(z));
  }
  return r;
}

int DispersionModel::contour_count() const {
  return static_cast<int>(info_.scalar_profile ? info_.mass_order / 2 : ref_poles_.upper.size());
}

std::vector<SymmetryMap> DispersionModel::maps_for(int j) const {
  std::vector<SymmetryMap> out;
  const int fam = info_.family;
  if (info_.scalar_profile) {
    const int nu = info_.mass_order / 2;
    const int jj = j + 1;
    std::vector<int> ms{nu};
    for (int m = nu - jj + 1; m <= 2 * nu - jj; ++m)
      if (m != nu) ms.push_back(m);
    for (int m : ms) {
      SymmetryMap s;
      s.kind = SymmetryMap::Kind::Linear;
      s.mu = std::polar(1.0, std::numbers::pi * m / nu);
      if (m == nu) s.mu = -1.0;
      if (2 * m == nu) s.mu = I;
      if (2 * m == 3 * nu) s.mu = -I;
      s.contour = j;
      s.label = m == nu ? "-lambda" : fmt::format("exp(i*pi*{}/{})*lambda", m, nu);
      if (2 * m == nu) s.label = "i*lambda";
      if (2 * m == 3 * nu) s.label = "-i*lambda";
      out.push_back(s);
    }
    return out;
  }

  const cplx lj = ref_poles_.upper.at(j);
  const double a = coef_[kAlpha](0), b = coef_[kBeta](0), g = coef_[kGamma](0);
  SymmetryMap neg;
  neg.kind = SymmetryMap::Kind::Linear;
  neg.mu = -1.0;
  neg.contour = j;
  neg.label = "-lambda";
  switch (fam) {
    case 2: {
      SymmetryMap s;
      s.kind = SymmetryMap::Kind::Inversion;
      s.c = a;
      s.contour = j;
      s.label = "1/(alpha*lambda)";
      out.push_back(s);
      break;
    }
    case 4: {
      out.push_back(neg);
      SymmetryMap s;
      s.kind = SymmetryMap::Kind::Inversion;
      s.c = std::sqrt(a);
      s.contour = j;
      s.label = "1/(sqrt(alpha)*lambda)";
      out.push_back(s);
      break;
    }
    case 5: {
      out.push_back(neg);
      SymmetryMap s;
      s.kind = SymmetryMap::Kind::Tracked;
      s.q = [b](cplx l) { return poly::Poly{l * l, 0.0, 1.0 + b * l * l}; };
      s.seed_lambda = lj;
      s.seed_sigma = 1.0 / (lj * std::sqrt(a));
      s.contour = j;
      s.label = "sigma1: (1+beta*lambda^2)*sigma^2 + lambda^2 = 0";
      out.push_back(s);
      break;
    }
    case 6: {
      for (int k = 0; k < 2; ++k) {
        SymmetryMap s;
        s.kind = SymmetryMap::Kind::Tracked;
        s.q = [a, b](cplx l) {
          return poly::Poly{-1.0, b * l + a * l * l * l, a * l * l, a * l};
        };
        s.seed_lambda = lj;
        s.seed_sigma = -ref_poles_.upper.at(k);
        s.contour = j;
        s.label = fmt::format("sigma{}{}: root of the cubic, sigma(lambda{}) = -lambda{}", j + 1,
                              k + 1, j + 1, k + 1);
        out.push_back(s);
      }
      break;
    }
    case 7: {
      for (int k = 0; k < 3; ++k) {
        if (k == j) {
          out.push_back(neg);
          continue;
        }
        SymmetryMap s;
        s.kind = SymmetryMap::Kind::Tracked;
        s.q = [a, b](cplx l) {
          const cplx l2 = l * l;
          return poly::Poly{-1.0, 0.0, b * l2 + a * l2 * l2, 0.0, a * l2};
        };
        s.seed_lambda = lj;
        s.seed_sigma = -ref_poles_.upper.at(k);
        s.contour = j;
        s.label = fmt::format("sigma{}{}: root of the quartic, sigma(lambda{}) = -lambda{}", j + 1,
                              k + 1, j + 1, k + 1);
        out.push_back(s);
      }
      (void)g;
      break;
    }
    default: break;
  }
  return out;
}

std::vector<SymmetryMap> DispersionModel::symmetry_maps() const {
  std::vector<SymmetryMap> all;
  for (int j = 0; j < contour_count(); ++j) {
    auto m = maps_for(j);
    all.insert(all.end(), m.begin(), m.end());
  }
  return all;
}

std::string DispersionModel::describe() const {
  auto term_str = [&](const OperatorTerm& t) {
    // a_n (i lambda)^n = a_n i^n lambda^n; report the real or imaginary factor.
    const int n = t.order;
    const double re = (n % 4 == 0) ? 1 : (n % 4 == 2 ? -1 : 0);
    const double im = (n % 4 == 1) ? 1 : (n % 4 == 3 ? -1 : 0);
    const double s = t.sign * (re != 0 ? re : im);
    std::string c = expr::print(coef_[t.slot].expression());
    std::string lam = n == 0 ? "" : (n == 1 ? "*lambda" : fmt::format("*lambda^{}", n));
    return fmt::format("{} {}({}){}", s < 0 ? "-" : "+", im != 0 ? "i*" : "", c, lam);
  };
  std::string num, den = "1";
  for (const auto& t : info_.terms) (t.mass ? den : num) += " " + term_str(t);
  if (!num.empty() && num[1] == '+') num = num.substr(3);
  return fmt::format("omega(lambda,t) = ({}) / ({})", num, den);
}

}  // namespace utm
