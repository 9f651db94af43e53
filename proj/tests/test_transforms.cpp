#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "utm/transforms.hpp"

namespace {

using utm::cplx;
using utm::DenomMode;
using utm::DispersionModel;
using utm::HalfLineProfile;
using utm::I;
using utm::expr::parse;

DispersionModel model(int family, std::vector<const char*> coefs, int nu = 1) {
  std::vector<utm::expr::Expression> c;
  for (const char* s : coefs) c.push_back(parse(s));
  return DispersionModel(family, nu, c, 1.0);
}

template <class F>
cplx simpson(F&& f, double a, double b, int n) {
  const double h = (b - a) / n;
  cplx s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * (h / 3);
}

TEST(HalfLineTransform, ExponentialAtZero) {
  const HalfLineProfile p(parse("exp(-x)"));
  EXPECT_LT(std::abs(utm::half_line_ft(p, 0.0) - 1.0), 1e-12);
}

TEST(HalfLineTransform, ExponentialClosedForm) {
  const HalfLineProfile p(parse("exp(-x)"));
  const cplx v = utm::half_line_ft(p, 2.0);
  EXPECT_LT(std::abs(v - cplx(0.2, -0.4)), 1e-12);
  // Antiderivative: integral of exp(-(1 + i lambda) y) is 1 / (1 + i lambda).
  for (cplx l : {cplx(-7.5), cplx(30.0, -0.5), cplx(0.3, -2.0)})
    EXPECT_LT(std::abs(utm::half_line_ft(p, l) - 1.0 / (1.0 + I * l)), 1e-10 * std::abs(v));
}

TEST(HalfLineTransform, UpperHalfPlaneBeyondDecayIsRejected) {
  const HalfLineProfile p(parse("exp(-x)"));
  EXPECT_THROW(utm::half_line_ft(p, cplx(0, 3)), utm::Error);
  EXPECT_THROW(utm::half_line_ft(p, cplx(0, 0.1)), utm::Error);
  EXPECT_THROW(utm::half_line_ft(p, cplx(0, 3), 0.0, 3.0), utm::Error);
}

TEST(HalfLineTransform, Linearity) {
  const HalfLineProfile p(parse("x*exp(-x)")), q(parse("exp(-2*x)*cos(x)"));
  const double a = 0.7, b = -1.3;
  const HalfLineProfile s(parse("0.7*x*exp(-x) - 1.3*exp(-2*x)*cos(x)"));
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> u(-20, 20), v(-1, 0);
  for (int k = 0; k < 10; ++k) {
    const cplx l(u(rng), v(rng));
    const cplx lhs = utm::half_line_ft(s, l);
    const cplx rhs = a * utm::half_line_ft(p, l) + b * utm::half_line_ft(q, l);
    EXPECT_LE(std::abs(lhs - rhs), 1e-12 * std::max(std::abs(lhs), 1e-3));
  }
}

TEST(HalfLineTransform, DecaysAlongRealAxis) {
  const HalfLineProfile p(parse("x*exp(-x)"));
  double prev = INFINITY;
  for (double l : {10.0, 100.0, 1000.0}) {
    const double a = std::abs(utm::half_line_ft(p, l));
    EXPECT_LT(a, prev);
    prev = a;
  }
}

TEST(HalfLineTransform, TruncationIsAdequate) {
  // x e^{-x} has transform 1 / (1 + i lambda)^2.
  const HalfLineProfile p(parse("x*exp(-x)"));
  EXPECT_GE(p.X_max(), 30.0);
  for (double l : {0.0, 0.5, 3.0}) {
    const cplx exact = 1.0 / ((1.0 + I * l) * (1.0 + I * l));
    EXPECT_LE(std::abs(utm::half_line_ft(p, l) - exact), 1e-12 * std::abs(exact));
  }
}

TEST(FourierBank, MatchesAdaptiveTransform) {
  const HalfLineProfile f(parse("exp(-t)*x*exp(-x) + x^2*exp(-2*x)*t"), 1.0);
  const std::vector<cplx> sig{cplx(0.0), cplx(3.0, -0.2), cplx(-40.0, -1e-13), cplx(0.1, -5.0)};
  const std::vector<double> taus{0.0, 0.3, 1.0};
  const utm::FourierBank bank(f, taus, sig);
  for (cplx s : sig) {
    std::vector<cplx> out(taus.size());
    bank.transform(s, out.data());
    for (std::size_t k = 0; k < taus.size(); ++k) {
      const cplx ref = utm::half_line_ft(f, s, taus[k], 1e-12);
      EXPECT_LE(std::abs(out[k] - ref), 1e-11 * std::max(1.0, std::abs(ref)));
    }
  }
}

TEST(TimeWeighted, ZeroWeight) {
  const auto m = model(1, {"1", "1", "0"});
  for (double t : {0.0, 0.5, 1.0})
    EXPECT_EQ(utm::time_weighted(m, [](double) { return 0.0; }, cplx(1, 2), t, DenomMode::Inside),
              cplx(0.0));
}

TEST(TimeWeighted, EmptyIntervalIsExactlyZero) {
  const auto m = model(1, {"1", "1", "0.1"});
  EXPECT_EQ(utm::time_weighted(m, [](double) { return 1.0; }, 0.7, 0.0, DenomMode::Inside),
            cplx(0.0));
}

TEST(TimeWeighted, ConstantIntegrandWithoutDispersion) {
  // Family 9 with nu = 1 has the same operator as family 1 but allows beta = 0, so Omega = 0.
  const auto m = model(9, {"1", "0", "0"}, 1);
  for (cplx l : {cplx(0.5), cplx(2.0, 0.3)})
    EXPECT_LT(std::abs(utm::time_weighted(m, [](double) { return 1.0; }, l, 0.8, DenomMode::Inside) -
                       0.8 / (1.0 + l * l)),
              1e-13);
}

TEST(TimeWeighted, MatchesSimpsonReference) {
  const auto m = model(1, {"1", "1", "0"});
  const double l = 2.0;
  const cplx ref = simpson(
      [&](double tau) { return std::exp(tau * l * l / (1 + l * l)) * tau / (1 + l * l); }, 0, 1,
      10000);
  EXPECT_LT(std::abs(utm::time_weighted(m, [](double tau) { return tau; }, l, 1.0,
                                        DenomMode::Inside) -
                     ref),
            1e-7);
}

TEST(FhatTimeWeighted, ZeroForcing) {
  const auto m = model(1, {"1", "1", "0"});
  const HalfLineProfile f(parse("0"), 1.0);
  EXPECT_EQ(utm::fhat_time_weighted(m, f, 1.0, -1.0, 0.7, DenomMode::Inside), cplx(0.0));
}

TEST(FhatTimeWeighted, AllFactorsConstant) {
  const auto m = model(9, {"1", "0", "0"}, 1);
  const HalfLineProfile f(parse("exp(-x)"), 1.0);
  EXPECT_LT(std::abs(utm::fhat_time_weighted(m, f, 0.0, 0.0, 1.0, DenomMode::Inside) - 1.0),
            1e-12);
}

TEST(FhatTimeWeighted, MatchesNestedSimpson) {
  const auto m = model(1, {"1", "1", "0"});
  const HalfLineProfile f(parse("exp(-x)*exp(-t)"), 1.0);
  const double l = 1.0;
  const auto inner = [&](double tau) {
    return simpson([&](double y) { return std::exp(-y - tau) * std::exp(-I * l * y); }, 0, 40,
                   4000);
  };
  const cplx ref = simpson(
      [&](double tau) { return std::exp(tau * l * l / (1 + l * l)) / (1 + l * l) * inner(tau); }, 0,
      0.5, 200);
  EXPECT_LT(std::abs(utm::fhat_time_weighted(m, f, l, l, 0.5, DenomMode::Inside) - ref), 1e-6);
}

TEST(FhatTimeWeighted, MappedArgumentUsesUnmappedOmega) {
  const auto m = model(1, {"1", "1", "0.2"});
  const HalfLineProfile f(parse("exp(-x)"), 1.0);
  const cplx l(0.3, 1.5), s = -l;
  const cplx pi = 1.0 + l * l;
  const cplx w = m.omega(l, 0.0);
  // Omega = t w, fhat(s) = 1/(1 + i s): integral of exp(tau w) / pi d tau times fhat.
  const cplx ref = (std::exp(0.6 * w) - 1.0) / w / pi / (1.0 + I * s);
  EXPECT_LT(std::abs(utm::fhat_time_weighted(m, f, l, s, 0.6, DenomMode::Inside) - ref),
            1e-9 * std::abs(ref));
}

}  // namespace
