#include "utm/transforms.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "utm/quadrature.hpp"

namespace utm {

namespace {

constexpr double kSampleEnd = 400.0;
constexpr double kSampleStep = 0.05;
constexpr double kEnvelope = 1e-14;
// exp(-39) is below 1e-16.
constexpr double kDecayCut = 39.0;
// GL16 on a panel spanning a phase of 8 radians is exact to rounding.
constexpr double kPhasePerPanel = 8.0;

}  // namespace

HalfLineProfile::HalfLineProfile(const expr::Expression& e, double T_max) : e_(expr::fold(e)) {
  for (const auto& v : expr::variables(e_))
    if (v != "x" && v != "t")
      throw AssumptionError(fmt::format("profile '{}' may depend on x and t only (found '{}')",
                                        expr::print(e_), v));
  time_dependent_ = expr::depends_on(e_, "t");
  zero_ = e_.is_num(0.0);
  if (zero_) {
    decay_rate_ = INFINITY;
    return;
  }
  fn_ = expr::Compiled(e_, {"x", "t"});
  std::vector<double> ts{0.0};
  if (time_dependent_)
    for (int k = 1; k <= 8; ++k) ts.push_back(T_max * k / 8.0);
  const int n = static_cast<int>(kSampleEnd / kSampleStep) + 1;
  std::vector<double> env(n, 0.0);
  for (int i = 0; i < n; ++i)
    for (double t : ts) {
      const double v = fn_(i * kSampleStep, t);
      if (!std::isfinite(v))
        throw AssumptionError(fmt::format("profile '{}' is not finite at x = {}, t = {}",
                                          expr::print(e_), i * kSampleStep, t));
      env[i] = std::max(env[i], std::abs(v));
    }
  max_abs_ = *std::max_element(env.begin(), env.end());
  if (max_abs_ == 0.0) {
    zero_ = true;
    return;
  }
  const double thr = kEnvelope * max_abs_;
  int last = n - 1;
  if (env[last] > thr)
    throw AssumptionError(fmt::format(
        "profile '{}' is not rapidly decreasing: |p({})| = {:.3g} exceeds 1e-14 of its maximum",
        expr::print(e_), kSampleEnd, env[last]));
  while (last > 0 && env[last - 1] <= thr) --last;
  X_max_ = std::max(1.0, last * kSampleStep);
  const int half = last / 2;
  if (env[half] > 0 && env[last] > 0 && last > half)
    decay_rate_ = std::log(env[half] / env[last]) / ((last - half) * kSampleStep);
  else
    decay_rate_ = std::log(env[half] / thr) / std::max(kSampleStep, (last - half) * kSampleStep);
}

cplx half_line_ft(const HalfLineProfile& p, cplx lambda, double t, double eps_imag) {
  if (eps_imag > 0 && eps_imag >= p.decay_rate())
    throw AssumptionError(fmt::format(
        "half_line_ft: above-axis margin {} is not covered by the certified decay rate {:.3g}",
        eps_imag, p.decay_rate()));
  if (lambda.imag() > std::max(0.0, eps_imag))
    throw AssumptionError(fmt::format(
        "half_line_ft: Im lambda = {} exceeds the admissible bound {}", lambda.imag(),
        std::max(0.0, eps_imag)));
  if (p.zero()) return 0.0;
  double Y = p.X_max();
  if (lambda.imag() < 0) Y = std::min(Y, kDecayCut / -lambda.imag());
  const double L = std::min(1.0, std::numbers::pi / std::max(1e-300, std::abs(lambda.real())));
  const int panels = std::max(1, static_cast<int>(std::ceil(Y / L)));
  const double h = Y / panels;
  std::vector<cplx> parts(panels);
  for (int k = 0; k < panels; ++k) {
    parts[k] = quad::integrate(
        [&](double y) { return p(y, t) * std::exp(-I * lambda * y); }, k * h, (k + 1) * h, 1e-12,
        1e-17 * p.max_abs());
  }
  return pairwise_sum(parts);
}

// ---------------------------------------------------------------- bank

FourierBank::FourierBank(const HalfLineProfile& p, std::vector<double> taus,
                         std::span<const cplx> sigmas, double eps_imag)
    : taus_(std::move(taus)), X_max_(p.X_max()), eps_imag_(eps_imag), zero_(p.zero()) {
  if (zero_) return;
  // Tier k uses panel width 2^(-k/2); find the needed tiers and their lengths.
  std::vector<double> need;
  for (cplx s : sigmas) {
    if (s.imag() > eps_imag_)
      throw AssumptionError(fmt::format(
          "transform argument {:.6g}{:+.6g}i lies above the admissible bound", s.real(),
          s.imag()));
    const int k = tier_index(std::abs(s));
    if (static_cast<int>(need.size()) <= k) need.resize(k + 1, 0.0);
    need[k] = std::max(need[k], cutoff(s));
  }
  const auto& gl = quad::gl16();
  tiers_.resize(need.size());
  for (std::size_t k = 0; k < need.size(); ++k) {
    Tier& tr = tiers_[k];
    tr.L = std::pow(2.0, -0.5 * k);
    if (need[k] == 0.0) continue;
    const int panels = std::max(1, static_cast<int>(std::ceil(need[k] / tr.L)));
    tr.length = panels * tr.L;
    const double half = tr.L / 2;
    std::vector<double> w;
    for (int pnl = 0; pnl < panels; ++pnl)
      for (int i = 0; i < gl.size(); ++i) {
        tr.y.push_back(pnl * tr.L + half * (1 + gl.x[i]));
        w.push_back(half * gl.w[i]);
      }
    const std::size_t ny = tr.y.size();
    tr.vals.assign(ny * taus_.size(), 0.0);
    const expr::Compiled fn(p.expression(), {"x", "t"});
    for (std::size_t q = 0; q < taus_.size(); ++q) {
      const double tq = taus_[q];
      const double* cols[2] = {tr.y.data(), &tq};
      const std::size_t strides[2] = {1, 0};
      double* dst = tr.vals.data() + q * ny;
      fn.eval_batch(cols, strides, ny, dst);
      for (std::size_t i = 0; i < ny; ++i) dst[i] *= w[i];
    }
  }
}

int FourierBank::tier_index(double mod) const {
  const double Lmax = kPhasePerPanel / std::max(mod, 1e-300);
  if (Lmax >= 1.0) return 0;
  return static_cast<int>(std::ceil(-2.0 * std::log2(Lmax)));
}

double FourierBank::cutoff(cplx s) const {
  if (s.imag() < 0) return std::min(X_max_, kDecayCut / -s.imag());
  return X_max_;
}

void FourierBank::transform(cplx sigma, cplx* out) const {
  const std::size_t nt = taus_.size();
  if (zero_) {
    std::fill(out, out + nt, cplx(0.0));
    return;
  }
  const int k = tier_index(std::abs(sigma));
  if (k >= static_cast<int>(tiers_.size()) || tiers_[k].y.empty() ||
      tiers_[k].length + 1e-9 < cutoff(sigma))
    throw NumericalError(fmt::format("transform argument {:.6g}{:+.6g}i was not registered",
                                     sigma.real(), sigma.imag()));
  const Tier& tr = tiers_[k];
  const double Y = cutoff(sigma);
  std::size_t n = tr.y.size();
  while (n > 0 && tr.y[n - 1] > Y + tr.L) --n;
  std::vector<double> cr(n), ci(n);
  const double a = sigma.imag(), b = sigma.real();
  for (std::size_t i = 0; i < n; ++i) {
    const double y = tr.y[i];
    const double mag = std::exp(a * y);
    cr[i] = mag * std::cos(b * y);
    ci[i] = -mag * std::sin(b * y);
  }
  const std::size_t ny = tr.y.size();
  for (std::size_t q = 0; q < nt; ++q) {
    const double* v = tr.vals.data() + q * ny;
    double sr = 0.0, si = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sr += v[i] * cr[i];
      si += v[i] * ci[i];
    }
    out[q] = {sr, si};
  }
}

// ---------------------------------------------------------------- time-weighted

namespace {

cplx weighted_integral(const DispersionModel& m, cplx lambda, double t, DenomMode mode,
                       const std::function<cplx(double)>& weight) {
  if (t == 0.0) return 0.0;
  return quad::integrate(
      [&](double tau) -> cplx {
        const cplx om = m.big_omega(lambda, tau);
        if (om.real() > 700)
          throw NumericalError(fmt::format(
              "exponent overflow: Re Omega = {:.4g} at lambda = {:.6g}{:+.6g}i, tau = {}",
              om.real(), lambda.real(), lambda.imag(), tau));
        cplx v = std::exp(om) * weight(tau);
        if (mode == DenomMode::Inside) v /= m.Pi(lambda, tau);
        return v;
      },
      0.0, t, 1e-10, 1e-15);
}

}  // namespace

cplx time_weighted(const DispersionModel& m, const std::function<double(double)>& w, cplx lambda,
                   double t, DenomMode mode) {
  return weighted_integral(m, lambda, t, mode, [&](double tau) { return cplx(w(tau)); });
}

cplx fhat_time_weighted(const DispersionModel& m, const HalfLineProfile& f, cplx lambda, cplx arg,
                        double t, DenomMode mode) {
  if (f.zero()) return 0.0;
  return weighted_integral(m, lambda, t, mode,
                           [&](double tau) { return half_line_ft(f, arg, tau); });
}

}  // namespace utm
