#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "utm/contours.hpp"
#include "utm/dispersion.hpp"

namespace {

using utm::cplx;
using utm::DispersionModel;
using utm::I;
using utm::expr::parse;

constexpr double kPi = std::numbers::pi;

DispersionModel model(int family, std::vector<const char*> coefs, int nu = 1, double T = 1.0) {
  std::vector<utm::expr::Expression> c;
  for (const char* s : coefs) c.push_back(parse(s));
  return DispersionModel(family, nu, c, T);
}

/// Composite Simpson rule with n (even) panels.
template <class F>
cplx simpson(F&& f, double a, double b, int n) {
  const double h = (b - a) / n;
  cplx s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * (h / 3);
}

/// Determinant by expansion over all permutations.
double permutation_det(const std::vector<std::vector<double>>& m) {
  const int n = static_cast<int>(m.size());
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  double det = 0.0;
  do {
    int inversions = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) inversions += p[i] > p[j];
    double term = inversions % 2 ? -1.0 : 1.0;
    for (int i = 0; i < n; ++i) term *= m[i][p[i]];
    det += term;
  } while (std::next_permutation(p.begin(), p.end()));
  return det;
}

std::vector<std::vector<double>> resultant_matrix(double a, double b, double g) {
  return {{a, 0, 3 * a, 0, 0},
          {b, a, 2 * b, 3 * a, 0},
          {g, b, g, 2 * b, 3 * a},
          {1, g, 0, g, 2 * b},
          {0, 1, 0, 0, g}};
}

double cubic_discriminant(double a, double b, double c, double d) {
  return 18 * a * b * c * d - 4 * b * b * b * d + b * b * c * c - 4 * a * c * c * c -
         27 * a * a * d * d;
}

TEST(DispersionModel, PseudoParabolicOmegaAtOne) {
  const auto m = model(1, {"1", "1", "0"});
  EXPECT_NEAR(std::abs(m.omega(1.0, 0.3) - 0.5), 0.0, 1e-15);
}

TEST(DispersionModel, BbmTypeOmega) {
  const auto m = model(2, {"1", "1"});
  for (cplx l : {cplx(0.7), cplx(1.3, -0.4)})
    EXPECT_LT(std::abs(m.omega(l, 0.2) - I * l / (1.0 + l * l)), 1e-15);
}

TEST(DispersionModel, DoubleZerosAreRejected) {
  try {
    model(5, {"1", "2", "1"});
    FAIL() << "4 alpha = beta^2 must be rejected";
  } catch (const utm::AssumptionError& e) {
    EXPECT_NE(std::string(e.what()).find("has two double zeros"), std::string::npos);
  }
  EXPECT_THROW(model(6, {"1", "2", "1"}), utm::AssumptionError);
}

TEST(DispersionModel, AssumptionViolationsAreNamed) {
  EXPECT_THROW(model(1, {"1 - 2*t", "1", "0"}), utm::AssumptionError);
  EXPECT_THROW(model(1, {"1", "0", "1"}), utm::AssumptionError);
  EXPECT_THROW(model(2, {"1 + t", "1"}), utm::AssumptionError);
  EXPECT_THROW(model(2, {"1", "1", "1"}), utm::AssumptionError);
}

TEST(DispersionModel, OmegaIsEvenForEvenFamilies) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-3, 3);
  const auto m = model(1, {"1", "1", "0"});
  for (int k = 0; k < 100; ++k) {
    const cplx l(u(rng), u(rng));
    EXPECT_LE(std::abs(m.omega(-l, 0.5) - m.omega(l, 0.5)), 1e-13 * std::abs(m.omega(l, 0.5)));
  }
}

TEST(DispersionModel, LargeLambdaApproachesRatio) {
  const auto m = model(1, {"1", "1", "0"});
  const double l = 1e3;
  EXPECT_NEAR(m.omega(l, 0.0).real(), l * l / (1 + l * l), 1e-15);
  EXPECT_NEAR(m.omega_inf(0.0), 1.0, 0.0);
}

TEST(DispersionModel, BigOmegaConstantCoefficients) {
  const auto m = model(3, {"2", "1", "0.3"});
  const cplx l(0.8, 0.2);
  EXPECT_LT(std::abs(m.big_omega(l, 0.7) - 0.7 * m.omega(l, 0.0)), 1e-14);
}

TEST(DispersionModel, BigOmegaAtZeroIsGammaIntegral) {
  const auto m = model(1, {"1", "1", "cos(t)"});
  EXPECT_NEAR(std::abs(m.big_omega(0.0, 0.9) - std::sin(0.9)), 0.0, 1e-12);
}

TEST(DispersionModel, BigOmegaMatchesSimpsonReference) {
  const auto m = model(1, {"2 + sin(t)", "1", "0"}, 1, 2.0);
  const double l = 2.0;
  const cplx ref =
      simpson([&](double t) { return cplx(l * l / (1 + (2 + std::sin(t)) * l * l)); }, 0, 1, 10000);
  EXPECT_LT(std::abs(m.big_omega(l, 1.0) - ref), 1e-8);
}

TEST(DispersionPoles, PseudoParabolicUnitAlpha) {
  const auto ps = model(1, {"1", "1", "0"}).poles(0.0);
  ASSERT_EQ(ps.all.size(), 2u);
  for (cplx z : {I, -I}) {
    double d = INFINITY;
    for (cplx p : ps.all) d = std::min(d, std::abs(p - z));
    EXPECT_LT(d, 1e-12);
  }
}

TEST(DispersionPoles, FourthOrderBbm) {
  const auto ps = model(4, {"1", "1"}).poles(0.0);
  ASSERT_EQ(ps.all.size(), 4u);
  const cplx e1 = std::polar(1.0, kPi / 4), e3 = std::polar(1.0, 3 * kPi / 4);
  for (cplx z : {e1, e3, -e1, -e3}) {
    double d = INFINITY;
    for (cplx p : ps.all) d = std::min(d, std::abs(p - z));
    EXPECT_LT(d, 1e-12);
  }
  ASSERT_EQ(ps.upper.size(), 2u);
  EXPECT_LT(std::abs(ps.upper[0] - e1), 1e-12);
  EXPECT_LT(std::abs(ps.upper[1] - e3), 1e-12);
}

TEST(DispersionPoles, ResidualCountAndPairing) {
  struct Case {
    int family;
    std::vector<const char*> c;
    int nu;
  };
  const std::vector<Case> cases{{1, {"1.5", "1", "0"}, 1},       {3, {"0.5", "1", "0"}, 1},
                                {4, {"2", "1"}, 1},              {5, {"1", "1", "1"}, 1},
                                {6, {"1", "3", "1"}, 1},         {7, {"1", "1", "1", "1"}, 1},
                                {8, {"1", "1", "0"}, 1},         {9, {"0.7", "1", "0"}, 5}};
  for (const auto& cs : cases) {
    const auto m = model(cs.family, cs.c, cs.nu);
    const auto ps = m.poles(0.0);
    const int k = m.degree();
    ASSERT_EQ(static_cast<int>(ps.all.size()), k) << cs.family;
    EXPECT_EQ(static_cast<int>(ps.upper.size()), k / 2) << cs.family;
    for (cplx z : ps.all) {
      EXPECT_LE(std::abs(m.Pi(z, 0.0)), 1e-10 * (1 + std::pow(std::abs(z), k))) << cs.family;
      double d = INFINITY;
      for (cplx w : ps.all) d = std::min(d, std::abs(w + z));
      EXPECT_LT(d, 1e-10) << cs.family;
    }
  }
}

TEST(DispersionResultant, CubicWithoutDoubleRoot) {
  const auto m = resultant_matrix(1, 0, 0);
  const auto chk = utm::validate_family7(1, 0, 0);
  EXPECT_NEAR(chk.value, permutation_det(m), 1e-12);
  // Resultant of 1 + mu^3 and 3 mu^2 is 27; the discriminant is -27.
  EXPECT_NEAR(chk.value, 27.0, 1e-12);
  EXPECT_TRUE(chk.pass);
}

TEST(DispersionResultant, AgreesWithDiscriminantInVanishing) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(0.2, 2.0);
  for (int k = 0; k < 20; ++k) {
    const double a = u(rng), b = u(rng) - 1, g = u(rng) - 1;
    const double det = permutation_det(resultant_matrix(a, b, g));
    EXPECT_NEAR(utm::validate_family7(a, b, g).value, det, 1e-12 * (1 + std::abs(det)));
    const bool disc_zero = std::abs(cubic_discriminant(a, b, g, 1)) < 1e-12;
    EXPECT_EQ(utm::validate_family7(a, b, g).pass, !disc_zero);
  }
}

TEST(DispersionResultant, DoubleRootFails) {
  for (auto [c, d] : {std::pair{0.5, 2.0}, std::pair{1.0, 3.0}, std::pair{-0.7, 1.2}}) {
    // (1 + c mu)^2 (1 + d mu) = 1 + (2c + d) mu + (c^2 + 2cd) mu^2 + c^2 d mu^3.
    const double g = 2 * c + d, b = c * c + 2 * c * d, a = c * c * d;
    EXPECT_NEAR(cubic_discriminant(a, b, g, 1), 0.0, 1e-12);
    EXPECT_FALSE(utm::validate_family7(a, b, g).pass);
  }
  EXPECT_THROW(model(7, {"2", "5", "4", "1"}), utm::AssumptionError);
}

std::vector<cplx> multipliers(const DispersionModel& m) {
  std::vector<cplx> out;
  for (const auto& s : m.symmetry_maps()) out.push_back(s.mu);
  return out;
}

bool contains(const std::vector<cplx>& v, cplx z) {
  return std::any_of(v.begin(), v.end(), [&](cplx w) { return std::abs(w - z) < 1e-14; });
}

TEST(DispersionMaps, FourthOrderPseudoParabolicRotations) {
  const auto mu = multipliers(model(3, {"1", "1", "0"}));
  EXPECT_TRUE(contains(mu, -1.0));
  EXPECT_TRUE(contains(mu, I));
  EXPECT_TRUE(contains(mu, -I));
}

TEST(DispersionMaps, BbmInversion) {
  const auto maps = model(2, {"1", "1"}).symmetry_maps();
  ASSERT_EQ(maps.size(), 1u);
  EXPECT_EQ(maps[0].kind, utm::SymmetryMap::Kind::Inversion);
  EXPECT_LT(std::abs(maps[0](cplx(0.3, 0.9)) - 1.0 / cplx(0.3, 0.9)), 1e-15);
}

TEST(DispersionMaps, FourthOrderBbmKeepsMinusLambdaAndInverse) {
  const auto maps = model(4, {"1", "1"}).maps_for(0);
  ASSERT_EQ(maps.size(), 2u);
  const cplx l(0.6, 0.8);
  EXPECT_LT(std::abs(maps[0](l) + l), 1e-15);
  EXPECT_LT(std::abs(maps[1](l) - 1.0 / l), 1e-15);
  for (const auto& s : model(4, {"1", "1"}).symmetry_maps())
    EXPECT_GT(std::abs(s(l) + 1.0 / l), 0.1);
}

TEST(DispersionMaps, TrackedRootsStartAtMinusPoles) {
  const auto m = model(6, {"1", "1", "1"});
  const auto& up = m.reference_poles().upper;
  ASSERT_EQ(up.size(), 2u);
  const auto maps = m.maps_for(0);
  ASSERT_EQ(maps.size(), 2u);
  EXPECT_LT(std::abs(maps[0](up[0]) + up[0]), 1e-10);
  EXPECT_LT(std::abs(maps[1](up[0]) + up[1]), 1e-10);
}

/// Nodes of a small loop around each upper pole, or of the ray neighbourhoods.
std::vector<std::vector<cplx>> domain_nodes(const DispersionModel& m) {
  std::vector<std::vector<cplx>> out;
  const auto& ps = m.reference_poles();
  for (int j = 0; j < m.contour_count(); ++j) {
    if (m.scalar_profile()) {
      const double th = m.ray_angles()[j];
      const int nu = m.degree() / 2;
      out.push_back(utm::build_ray_neighborhood(th, ps.c0, 0.25 * ps.c0 * std::sin(kPi / (2 * nu)),
                                                ps.c0 + 6)
                        .nodes);
    } else {
      double d = INFINITY;
      for (cplx z : ps.all)
        if (z != ps.upper[j]) d = std::min(d, std::abs(z - ps.upper[j]));
      // Shrink the loop until it encloses no branch point of the tracked maps.
      double r = 0.25 * d;
      for (;; r *= 0.7) {
        const auto nodes = utm::build_loop(ps.upper[j], r, 64).nodes;
        try {
          for (const auto& s : m.maps_for(j)) s.along(nodes, true);
        } catch (const utm::NumericalError&) {
          if (r < 1e-3 * d) throw;
          continue;
        }
        out.push_back(nodes);
        break;
      }
    }
  }
  return out;
}

TEST(DispersionMaps, OmegaInvariantAlongContours) {
  struct Case {
    int family;
    std::vector<const char*> c;
    int nu;
  };
  const std::vector<Case> cases{{1, {"1 + 0.5*sin(t)", "1 + t", "0.1"}, 1},
                                {2, {"1", "2 + cos(t)"}, 1},
                                {3, {"1 + 0.3*t", "1", "0.2"}, 1},
                                {4, {"1.5", "exp(-t)"}, 1},
                                {5, {"1", "1", "1 + t"}, 1},
                                {6, {"1", "1", "1 + t^2"}, 1},
                                {7, {"1", "1", "1", "1 + t"}, 1},
                                {8, {"2", "1", "0"}, 1},
                                {9, {"1", "1", "0"}, 4}};
  std::mt19937 rng(3);
  for (const auto& cs : cases) {
    const auto m = model(cs.family, cs.c, cs.nu);
    const auto nodes = domain_nodes(m);
    for (int j = 0; j < m.contour_count(); ++j) {
      const auto maps = m.maps_for(j);
      std::uniform_int_distribution<std::size_t> pick(0, nodes[j].size() - 1);
      for (const auto& s : maps) {
        const auto img = s.along(nodes[j], true);
        for (int r = 0; r < 10; ++r) {
          const std::size_t i = pick(rng);
          for (double t : {0.1, 0.9}) {
            const cplx a = m.big_omega(nodes[j][i], t), b = m.big_omega(img[i], t);
            EXPECT_LE(std::abs(a - b), 1e-9 * (1 + std::abs(a))) << cs.family << " " << s.label;
          }
        }
      }
    }
  }
}

TEST(DispersionMaps, MixedFourthOrderIdentity) {
  const auto m = model(5, {"1", "1", "1"});
  const double beta = 1.0;
  const cplx l1 = m.reference_poles().upper[0];
  const auto s1 = m.maps_for(0)[1];
  for (double r : {0.05, 0.1, 0.2})
    for (int k = 0; k < 8; ++k) {
      const cplx l = l1 + std::polar(r, 2 * kPi * k / 8);
      const cplx lhs = m.Pi(s1(l), 0.0);
      const cplx rhs = m.Pi(l, 0.0) / ((1.0 + beta * l * l) * (1.0 + beta * l * l));
      EXPECT_LE(std::abs(lhs - rhs), 1e-10 * std::max(1.0, std::abs(rhs)));
    }
}

TEST(DispersionMaps, QuotientIdentities) {
  {
    const auto m = model(6, {"1", "1", "1"});
    const auto nodes = domain_nodes(m);
    for (int j = 0; j < 2; ++j)
      for (const auto& s : m.maps_for(j)) {
        const auto img = s.along(nodes[j], true);
        for (std::size_t i = 0; i < img.size(); ++i)
          EXPECT_LE(std::abs(m.Pi(img[i], 0) / m.Pi(nodes[j][i], 0) - img[i] / nodes[j][i]),
                    1e-9);
      }
  }
  {
    const auto m = model(7, {"1", "1", "1", "1"});
    const auto nodes = domain_nodes(m);
    for (int j = 0; j < 3; ++j)
      for (const auto& s : m.maps_for(j)) {
        const auto img = s.along(nodes[j], true);
        for (std::size_t i = 0; i < img.size(); ++i) {
          const cplx q = img[i] / nodes[j][i];
          EXPECT_LE(std::abs(m.Pi(img[i], 0) / m.Pi(nodes[j][i], 0) - q * q), 1e-9);
        }
      }
  }
}

TEST(DispersionMaps, ImagesStayInLowerHalfPlane) {
  for (int fam = 1; fam <= 8; ++fam) {
    std::vector<const char*> c;
    switch (fam) {
      case 2:
      case 4: c = {"1", "1"}; break;
      case 7: c = {"1", "1", "1", "1"}; break;
      default: c = {"1", "1", "1"};
    }
    const auto m = model(fam, c);
    const auto nodes = domain_nodes(m);
    for (int j = 0; j < m.contour_count(); ++j)
      for (const auto& s : m.maps_for(j))
        for (cplx z : s.along(nodes[j], true)) EXPECT_LE(z.imag(), 1e-12 * (1 + std::abs(z))) << fam;
  }
}

}  // namespace
