#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>

#include <fmt/format.h>

#include "utm/contours.hpp"
#include "utm/oracle.hpp"

namespace {

using utm::cplx;
using utm::I;
using utm::Numerics;
using utm::ProblemSpec;
using utm::SolutionEvaluator;
using utm::SolutionGrid;
using utm::expr::parse;

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

ProblemSpec spec(int family, std::vector<const char*> coefs, const char* u0,
                 std::map<int, const char*> boundary, const char* f = "0", int nu = 1) {
  ProblemSpec s;
  s.family = family;
  s.nu = nu;
  for (const char* c : coefs) s.coefficients.push_back(parse(c));
  s.u0 = parse(u0);
  s.f = parse(f);
  for (const auto& [k, g] : boundary) s.boundary[k] = parse(g);
  return s;
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / (n - 1);
  return v;
}

const std::vector<double> kXs = linspace(0.25, 4.0, 16);
const std::vector<double> kTs = linspace(1.0 / 16, 1.0, 16);

ProblemSpec family1_dirichlet() {
  return spec(1, {"1", "1", "0.1"}, "x*exp(-x)", {{0, "0"}});
}
ProblemSpec family3_problem() {
  return spec(3, {"1", "1", "0.1"}, "x^2*exp(-x)", {{0, "0"}, {1, "0"}});
}

/// Grids produced by criteria 3 to 5, checked for realness by criterion 7.
std::vector<std::pair<std::string, SolutionGrid>> g_real_data;

double rel(cplx a, cplx b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

/// Nodes of the contours bounding the domain where the maps are needed.
std::vector<std::vector<cplx>> domain_nodes(const utm::DispersionModel& m) {
  std::vector<std::vector<cplx>> out;
  const auto& ps = m.reference_poles();
  for (int j = 0; j < m.contour_count(); ++j) {
    if (m.scalar_profile()) {
      const int nu = m.degree() / 2;
      out.push_back(utm::build_ray_neighborhood(m.ray_angles()[j], ps.c0,
                                                0.25 * ps.c0 * std::sin(kPi / (2 * nu)),
                                                ps.c0 + 8)
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

Outcome symmetry_suite() {
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
                                {8, {"2 + sin(t)", "1 + t", "0.3"}, 1},
                                {9, {"1 + t", "1", "0.1"}, 3}};
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> ut(0.0, 1.0);
  double worst = 0.0;
  int checks = 0;
  for (const auto& cs : cases) {
    std::vector<utm::expr::Expression> c;
    for (const char* s : cs.c) c.push_back(parse(s));
    const utm::DispersionModel m(cs.family, cs.nu, c, 1.0);
    const auto nodes = domain_nodes(m);
    std::vector<std::pair<int, std::vector<std::vector<cplx>>>> images;
    for (int j = 0; j < m.contour_count(); ++j) {
      std::vector<std::vector<cplx>> per_map;
      for (const auto& s : m.maps_for(j)) per_map.push_back(s.along(nodes[j], true));
      images.emplace_back(j, per_map);
    }
    for (int r = 0; r < 50; ++r) {
      const int j = r % m.contour_count();
      std::uniform_int_distribution<std::size_t> pick(0, nodes[j].size() - 1);
      const std::size_t i = pick(rng);
      const cplx l = nodes[j][i];
      // The images are computed once; each must preserve Omega at every sampled time.
      std::vector<double> times{ut(rng)};
      for (int k = 0; k < 4; ++k) times.push_back(ut(rng));
      for (const auto& img : images[j].second)
        for (double t : times) {
          const cplx a = m.big_omega(l, t), b = m.big_omega(img[i], t);
          worst = std::max(worst, std::abs(a - b) / (1 + std::abs(a)));
          ++checks;
        }
    }
  }
  return {worst <= 1e-9, fmt::format("{} checks, max relative Omega mismatch {:.2e}", checks, worst)};
}

/// Largest relative deviation of det from the closed form, allowing one overall sign per
/// contour (the sign depends only on the order of the rows).
double signed_mismatch(const std::vector<cplx>& det, const std::vector<cplx>& closed) {
  double best = INFINITY;
  for (double s : {1.0, -1.0}) {
    double m = 0.0;
    for (std::size_t i = 0; i < det.size(); ++i) m = std::max(m, rel(det[i], s * closed[i]));
    best = std::min(best, m);
  }
  return best;
}

Outcome determinant_suite() {
  double worst = 0.0;
  std::string detail;
  // Fourth-order pseudo-parabolic: lambda (1 + i) and lambda (-1 + i).
  {
    const SolutionEvaluator ev(family3_problem());
    const auto rep = ev.elimination_report();
    const cplx factor[2] = {cplx(1, 1), cplx(-1, 1)};
    double m = 0.0;
    for (int j = 0; j < 2; ++j) {
      const auto& cr = rep.contours[j];
      for (std::size_t i = 0; i < cr.nodes.size(); ++i)
        m = std::max(m, rel(cr.det_numeric[i], cr.nodes[i] * factor[j]));
    }
    worst = std::max(worst, m);
    detail += fmt::format("quartic {:.1e}", m);
  }
  // Mixed fourth order: i (lambda + sigma1) / (Pi(lambda) Pi(sigma1)).
  {
    const SolutionEvaluator ev(spec(5, {"1", "1", "1"}, "x^2*exp(-x)", {{0, "0"}, {1, "0"}}));
    const auto rep = ev.elimination_report();
    double m = 0.0;
    for (std::size_t j = 0; j < rep.contours.size(); ++j) {
      std::vector<cplx> det, closed;
      for (cplx l : rep.contours[j].nodes) {
        const auto ns = ev.elimination_at(static_cast<int>(j), l);
        const cplx s1 = ns.sigma[1];
        det.push_back(ns.det);
        closed.push_back(I * (l + s1) / (ev.model().Pi(l, 0) * ev.model().Pi(s1, 0)));
      }
      m = std::max(m, signed_mismatch(det, closed));
    }
    worst = std::max(worst, m);
    detail += fmt::format(", mixed {:.1e}", m);
  }
  // Sixth order: alpha^3 i prod_{l<k} (sigma_l - sigma_k) / prod Pi(sigma).
  {
    const double alpha = 1.5;
    const SolutionEvaluator ev(spec(7, {"1.5", "1", "1", "1"}, "x^3*exp(-x)",
                                    {{0, "0"}, {1, "0"}, {2, "0"}}));
    const auto rep = ev.elimination_report();
    double m = 0.0;
    for (std::size_t j = 0; j < rep.contours.size(); ++j) {
      std::vector<cplx> det, closed;
      for (cplx l : rep.contours[j].nodes) {
        const auto ns = ev.elimination_at(static_cast<int>(j), l);
        cplx c = alpha * alpha * alpha * I;
        for (std::size_t a = 0; a < ns.sigma.size(); ++a) {
          c /= ev.model().Pi(ns.sigma[a], 0);
          for (std::size_t b = a + 1; b < ns.sigma.size(); ++b) c *= ns.sigma[a] - ns.sigma[b];
        }
        det.push_back(ns.det);
        closed.push_back(c);
      }
      m = std::max(m, signed_mismatch(det, closed));
    }
    worst = std::max(worst, m);
    detail += fmt::format(", sextic {:.1e}", m);
  }
  // Sixth-order pseudo-parabolic: 3 x 3 system nonsingular and well conditioned.
  double cond = 0.0, det_ratio = INFINITY;
  {
    const SolutionEvaluator ev(
        spec(8, {"1", "1", "0.1"}, "x^3*exp(-x)", {{0, "0"}, {1, "0"}, {2, "0"}}));
    for (const auto& cr : ev.elimination_report().contours) {
      cond = std::max(cond, cr.multiplier_condition);
      det_ratio = std::min(det_ratio, cr.min_det_ratio);
    }
  }
  detail += fmt::format("; 3x3 condition {:.3g}, min |det|/scale {:.2e}", cond, det_ratio);
  return {worst <= 1e-10 && cond < 1e3 && det_ratio > 1e-8, detail};
}

Outcome identity_recovery() {
  const std::vector<ProblemSpec> problems{
      family1_dirichlet(),
      spec(2, {"1", "1"}, "x*exp(-x)", {{0, "0"}}),
      family3_problem(),
      spec(4, {"1", "1"}, "x^2*exp(-x)", {{0, "0"}, {1, "0"}}),
  };
  std::vector<double> xs;
  for (int i = 1; i <= 40; ++i) xs.push_back(0.1 * i);
  double worst = 0.0;
  for (const auto& s : problems) {
    const SolutionEvaluator ev(s);
    const auto g = ev.evaluate_grid(xs, {0.0});
    for (std::size_t i = 0; i < xs.size(); ++i)
      worst = std::max(worst, std::abs(g.at(i, 0) - utm::expr::eval(s.u0, {{"x", xs[i]}})));
    g_real_data.emplace_back(fmt::format("identity family {}", s.family), g);
  }
  return {worst <= 1e-6, fmt::format("max |u(x,0) - u0(x)| = {:.2e}", worst)};
}

Outcome family1_oracle() {
  const std::vector<std::pair<std::string, ProblemSpec>> problems{
      {"Dirichlet", family1_dirichlet()},
      {"Neumann", spec(1, {"1", "1", "0.1"}, "x*exp(-x)", {{1, "exp(-t)"}})}};
  bool pass = true;
  std::string detail;
  for (const auto& [name, s] : problems) {
    const auto u = SolutionEvaluator(s).evaluate_grid(kXs, kTs);
    const auto fd = utm::oracle::fd_reference(s, kXs, kTs);
    const auto r = utm::oracle::compare(u, fd, 4.0, 1e-3);
    pass = pass && r.pass;
    detail += fmt::format("{}{} {:.2e} (oracle est {:.1e})", detail.empty() ? "" : ", ", name,
                          r.linf, r.oracle_estimate);
    g_real_data.emplace_back("family 1 " + name, u);
  }
  return {pass, detail};
}

Outcome manufactured_suite() {
  struct Case {
    int family;
    std::vector<const char*> c;
    int nu;
  };
  const std::vector<Case> cases{{1, {"1", "1", "0.1"}, 1}, {2, {"1", "1"}, 1},
                                {3, {"1", "1", "0.1"}, 1}, {4, {"1", "1"}, 1},
                                {5, {"1", "1", "1"}, 1},   {6, {"1", "1", "1"}, 1},
                                {7, {"1", "1", "1", "1"}, 1}, {8, {"1", "1", "0.1"}, 1},
                                {9, {"1", "1", "0.1"}, 1}, {9, {"1", "1", "0.1"}, 3}};
  bool pass = true;
  std::string detail;
  for (const auto& cs : cases) {
    ProblemSpec s;
    s.family = cs.family;
    s.nu = cs.nu;
    for (const char* c : cs.c) s.coefficients.push_back(parse(c));
    const utm::FamilyInfo info = utm::family_info(cs.family, cs.nu);
    for (int k : info.boundary_sets.front()) s.boundary[k] = parse("0");
    const int m = s.boundary.rbegin()->first + 1;
    const auto us = parse(fmt::format("exp(-t)*x^{}*exp(-x)", m));
    s = utm::oracle::manufactured_problem(s, us);
    const auto u = SolutionEvaluator(s).evaluate_grid(kXs, kTs);
    const auto fd = utm::oracle::fd_reference(s, kXs, kTs);
    const auto r = utm::oracle::compare(u, fd, 4.0);
    pass = pass && r.pass;
    const std::string name =
        cs.family == 9 ? fmt::format("9/nu{}", cs.nu) : fmt::format("{}", cs.family);
    detail += fmt::format("{}F{} {:.1e}{}", detail.empty() ? "" : " ", name, r.linf,
                          r.pass ? "" : "(FAIL)");
    g_real_data.emplace_back("manufactured family " + name, u);
  }
  return {pass, detail};
}

Outcome deformation_invariance() {
  double worst = 0.0;
  std::string detail;
  for (const auto& [name, s] :
       std::vector<std::pair<std::string, ProblemSpec>>{{"family 1", family1_dirichlet()},
                                                        {"family 3", family3_problem()}}) {
    const Numerics base;
    const cplx u0 = SolutionEvaluator(s, base).evaluate(1.0, 0.5);
    const auto& ps = SolutionEvaluator(s, base).model().reference_poles();
    const int nu = SolutionEvaluator(s, base).model().degree() / 2;
    const double w = base.width_scale * ps.c0 * std::sin(kPi / (2.0 * nu));
    double R = 0.0;
    for (double th : SolutionEvaluator(s, base).model().ray_angles())
      R = std::max(R, std::max(2 * ps.C0, ps.c0 + 37.0 / std::sin(th)));
    std::vector<std::pair<std::string, Numerics>> variants;
    Numerics n = base;
    n.R_contour = 2 * R;
    variants.emplace_back("2R", n);
    n = base;
    n.width = 0.5 * w;
    variants.emplace_back("w/2", n);
    n = base;
    n.width = 2 * w;
    variants.emplace_back("2w", n);
    n = base;
    n.geometry = "loop";
    n.width = w;
    variants.emplace_back("loop", n);
    n.width = 1.5 * w;
    variants.emplace_back("loop x1.5", n);
    double m = 0.0;
    for (const auto& [label, num] : variants)
      m = std::max(m, rel(SolutionEvaluator(s, num).evaluate(1.0, 0.5), u0));
    worst = std::max(worst, m);
    detail += fmt::format("{}{} {:.1e}", detail.empty() ? "" : ", ", name, m);
  }
  return {worst <= 1e-6, "max relative change: " + detail};
}

Outcome realness_and_linearity() {
  double worst_imag = 0.0;
  std::string where;
  for (const auto& [name, g] : g_real_data)
    for (cplx v : g.u) {
      const double r = std::abs(v.imag()) / (1 + std::abs(v.real()));
      if (r > worst_imag) {
        worst_imag = r;
        where = name;
      }
    }
  const char* coefs = "1 + 0.5*sin(t)";
  const auto a = spec(1, {coefs, "1", "0.1"}, "x*exp(-x)", {{0, "sin(t)"}}, "t*exp(-x)");
  const auto b = spec(1, {coefs, "1", "0.1"}, "x^2*exp(-2*x)", {{0, "t^2"}}, "x*exp(-x)*cos(t)");
  const auto ab = spec(1, {coefs, "1", "0.1"}, "x*exp(-x) + x^2*exp(-2*x)",
                       {{0, "sin(t) + t^2"}}, "t*exp(-x) + x*exp(-x)*cos(t)");
  const std::vector<double> xs = linspace(0.25, 4.0, 6), ts = linspace(0.25, 1.0, 4);
  const auto ua = SolutionEvaluator(a).evaluate_grid(xs, ts);
  const auto ub = SolutionEvaluator(b).evaluate_grid(xs, ts);
  const auto uab = SolutionEvaluator(ab).evaluate_grid(xs, ts);
  double lin = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < uab.u.size(); ++i) {
    lin = std::max(lin, std::abs(uab.u[i] - ua.u[i] - ub.u[i]));
    scale = std::max(scale, std::abs(uab.u[i]));
  }
  lin /= scale;
  return {worst_imag <= 1e-6 && lin <= 1e-9 && !g_real_data.empty(),
          fmt::format("max |Im u|/(1+|Re u|) {:.1e} over {} grids{}; superposition {:.1e}",
                      worst_imag, g_real_data.size(), where.empty() ? "" : " (" + where + ")",
                      lin)};
}

Outcome degenerate_inputs() {
  std::string detail;
  bool pass = true;
  for (int fam : {5, 6}) {
    try {
      SolutionEvaluator ev(spec(fam, {"1", "2", "1"}, "x^2*exp(-x)", {{0, "0"}, {1, "0"}}));
      pass = false;
      detail += fmt::format("family {} accepted; ", fam);
    } catch (const utm::AssumptionError& e) {
      const bool cited = std::string(e.what()).find("has two double zeros") != std::string::npos;
      pass = pass && cited;
      detail += fmt::format("family {} rejected{}; ", fam, cited ? "" : " without diagnostic");
    }
  }
  try {
    SolutionEvaluator ev(
        spec(7, {"2", "5", "4", "1"}, "x^3*exp(-x)", {{0, "0"}, {1, "0"}, {2, "0"}}));
    pass = false;
    detail += "family 7 double root accepted";
  } catch (const utm::AssumptionError& e) {
    const bool cited = std::string(e.what()).find("resultant") != std::string::npos;
    pass = pass && cited;
    detail += cited ? "family 7 double root rejected" : "family 7 rejected without diagnostic";
  }
  return {pass, detail};
}

utm::expr::Expression random_expr(std::mt19937& rng, int depth) {
  using namespace utm::expr;
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 2 : 11);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  switch (pick(rng)) {
    case 0: return num(std::round(coef(rng) * 100) / 100);
    case 1: return var("x");
    case 2: return var("t");
    case 3: return add(random_expr(rng, depth - 1), random_expr(rng, depth - 1));
    case 4: return sub(random_expr(rng, depth - 1), random_expr(rng, depth - 1));
    case 5: return mul(random_expr(rng, depth - 1), random_expr(rng, depth - 1));
    case 6:
      return div(random_expr(rng, depth - 1),
                 add(num(2.5), call(Fn::Sin, random_expr(rng, depth - 1))));
    case 7: return call(Fn::Exp, call(Fn::Sin, random_expr(rng, depth - 1)));
    case 8: return call(Fn::Sin, random_expr(rng, depth - 1));
    case 9: return call(Fn::Cos, random_expr(rng, depth - 1));
    case 10: return call(Fn::Sqrt, add(num(1.5), call(Fn::Cos, random_expr(rng, depth - 1))));
    default:
      return pow(random_expr(rng, depth - 1), num(std::uniform_int_distribution<int>(2, 3)(rng)));
  }
}

Outcome expression_suite() {
  using namespace utm::expr;
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> pt(-1.5, 1.5);
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    const Expression e = random_expr(rng, 4);
    const std::string v = k % 2 ? "x" : "t";
    const Expression d = differentiate(e, v);
    Bindings b{{"x", pt(rng)}, {"t", pt(rng)}};
    const double h = 1e-5;
    Bindings bp = b, bm = b;
    bp[v] += h;
    bm[v] -= h;
    const double fd = (eval(e, bp) - eval(e, bm)) / (2 * h);
    const double exact = eval(d, b);
    worst = std::max(worst, std::abs(exact - fd) / (1 + std::abs(exact)));
  }
  return {worst <= 1e-6, fmt::format("200 expressions, max relative deviation {:.1e}", worst)};
}

Outcome determinism() {
  const auto s = spec(3, {"1 + 0.3*t", "1", "0.1"}, "x^2*exp(-x)", {{0, "0"}, {1, "sin(t)"}},
                      "t*x*exp(-x)");
  const SolutionEvaluator ev(s);
  const auto g1 = ev.evaluate_grid(kXs, kTs, 1);
  const auto g4 = ev.evaluate_grid(kXs, kTs, 4);
  const auto g8 = ev.evaluate_grid(kXs, kTs, 8);
  int diff = 0;
  for (std::size_t i = 0; i < g1.u.size(); ++i) diff += (g1.u[i] != g4.u[i]) + (g1.u[i] != g8.u[i]);
  return {diff == 0, fmt::format("{} values, {} differ across 1/4/8 threads", g1.u.size(), diff)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"symmetry maps preserve Omega", 10, symmetry_suite},
      {"elimination determinants", 10, determinant_suite},
      {"initial data recovery", 60, identity_recovery},
      {"family 1 oracle agreement", 120, family1_oracle},
      {"manufactured solutions, all families", 1200, manufactured_suite},
      {"contour deformation invariance", 60, deformation_invariance},
      {"realness and linearity", 60, realness_and_linearity},
      {"degenerate inputs rejected", 1, degenerate_inputs},
      {"symbolic differentiation", 5, expression_suite},
      {"thread determinism", 60, determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = sec <= criteria[i].budget;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("[%s] %2zu %s: %s (%.2f s of %.0f s)\n", pass ? "PASS" : "FAIL", i + 1,
                criteria[i].name, o.detail.c_str(), sec, criteria[i].budget);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
