#include "utm/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <numbers>
#include <set>
#include <thread>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "utm/quadrature.hpp"

namespace utm {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kImageTol = 1e-12;

cplx ipow(cplx z, int n) {
  cplx r = 1.0;
  for (int k = 0; k < n; ++k) r *= z;
  return r;
}

/// (i lambda)^d as a polynomial in lambda.
poly::Poly ipoly(int d, cplx scale = 1.0) {
  poly::Poly p(d + 1, 0.0);
  p[d] = scale * ipow(I, d);
  return p;
}

void add_into(poly::Poly& a, const poly::Poly& b) {
  if (a.size() < b.size()) a.resize(b.size(), 0.0);
  for (std::size_t k = 0; k < b.size(); ++k) a[k] += b[k];
}

/// Runs body(i) for i in [0, n) on `threads` workers with static contiguous blocks.
template <class F>
void parallel_for(std::size_t n, int threads, F&& body) {
  threads = std::max(1, std::min<int>(threads, static_cast<int>(n)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      const std::size_t lo = n * w / threads, hi = n * (w + 1) / threads;
      try {
        for (std::size_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct TimeGrid {
  int order = 8;
  std::vector<double> breaks;  // 0 = b_0 < b_1 < ...
  std::vector<double> nodes;   // panel p occupies [p*order, (p+1)*order)
  std::vector<double> weights;
  std::vector<int> t_break;  // for each requested t, index of its break
  int panels() const { return static_cast<int>(breaks.size()) - 1; }
};

TimeGrid make_time_grid(const std::vector<double>& ts, double panel, int order) {
  TimeGrid g;
  g.order = order;
  std::vector<double> uniq(ts.begin(), ts.end());
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  g.breaks.push_back(0.0);
  for (double t : uniq) {
    if (t <= 0.0) continue;
    const double prev = g.breaks.back();
    const int m = std::max(1, static_cast<int>(std::ceil((t - prev) / panel - 1e-12)));
    for (int k = 1; k < m; ++k) g.breaks.push_back(prev + (t - prev) * k / m);
    g.breaks.push_back(t);
  }
  const auto& gl = quad::gauss_legendre(order);
  for (int p = 0; p < g.panels(); ++p) {
    const double a = g.breaks[p], b = g.breaks[p + 1], h = (b - a) / 2;
    for (int i = 0; i < order; ++i) {
      g.nodes.push_back(a + h * (1 + gl.x[i]));
      g.weights.push_back(h * gl.w[i]);
    }
  }
  for (double t : ts) {
    const auto it = std::find(g.breaks.begin(), g.breaks.end(), t);
    g.t_break.push_back(t <= 0.0 ? 0 : static_cast<int>(it - g.breaks.begin()));
  }
  return g;
}

}  // namespace

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("UTM_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 1;
}

// ---------------------------------------------------------------- construction

SolutionEvaluator::SolutionEvaluator(const ProblemSpec& spec, const Numerics& num)
    : spec_(spec), num_(num) {
  model_ = std::make_shared<DispersionModel>(spec.family, spec.nu, spec.coefficients, spec.T_max);
  const FamilyInfo& info = model_->info();

  std::vector<int> given;
  for (const auto& [k, e] : spec.boundary) given.push_back(k);
  if (std::find(info.boundary_sets.begin(), info.boundary_sets.end(), given) ==
      info.boundary_sets.end()) {
    std::string allowed;
    for (const auto& s : info.boundary_sets) {
      allowed += allowed.empty() ? "{" : ", {";
      for (std::size_t i = 0; i < s.size(); ++i) allowed += (i ? "," : "") + std::to_string(s[i]);
      allowed += "}";
    }
    throw AssumptionError(fmt::format(
        "family {} accepts boundary data for derivative orders {} (got {{{}}})", info.family,
        allowed, fmt::join(given, ",")));
  }

  if (expr::depends_on(spec.u0, "t"))
    throw AssumptionError("initial datum u0 must not depend on t");
  u0_ = HalfLineProfile(spec.u0, 0.0);
  f_ = HalfLineProfile(spec.f, spec.T_max);

  const int K = info.mass_order;
  g_.assign(K, expr::num(0));
  gp_.assign(K, expr::num(0));
  for (const auto& [k, e] : spec.boundary) {
    for (const auto& v : expr::variables(e))
      if (v != "t")
        throw AssumptionError(fmt::format("boundary datum g{} may depend on t only", k));
    g_[k] = expr::fold(e);
    gp_[k] = expr::differentiate(e, "t");
    expr::Expression d = spec.u0;
    for (int j = 0; j < k; ++j) d = expr::differentiate(d, "x");
    const double u0k = expr::eval(d, {{"x", 0.0}});
    const double gk = expr::eval(g_[k], {{"t", 0.0}});
    if (std::abs(u0k - gk) > 1e-10)
      warnings_.push_back(fmt::format(
          "compatibility: d^{}u0/dx^{}(0) = {:.10g} differs from g{}(0) = {:.10g}", k, k, u0k, k,
          gk));
  }
  build_weights();
}

void SolutionEvaluator::build_weights() {
  const FamilyInfo& info = model_->info();
  const int K = info.mass_order;
  for (int k = 0; k < K; ++k) {
    const bool known = spec_.boundary.count(k) > 0;
    std::vector<int> orders;
    bool any_b = false, all_a_const = true;
    for (const auto& t : info.terms) {
      if (t.order <= k) continue;
      if (std::find(orders.begin(), orders.end(), t.order) == orders.end())
        orders.push_back(t.order);
      if (!t.mass) any_b = true;
      if (t.mass && !model_->coef(t.slot).constant()) all_a_const = false;
    }
    std::sort(orders.begin(), orders.end(), std::greater<>());
    if (orders.empty()) continue;
    if (!any_b && all_a_const && orders.size() > 1) {
      BoundaryWeight w;
      w.k = k;
      w.order = -1;
      w.known = known;
      for (const auto& t : info.terms)
        if (t.mass && t.order > k) add_into(w.P, ipoly(t.order - 1 - k, model_->term_value(t, 0)));
      w.label = fmt::format("g{}'", k);
      weights_.push_back(w);
      continue;
    }
    if (!known && orders.size() > 1)
      throw AssumptionError(fmt::format(
          "family {}: the unknown boundary value of order {} enters through several independent "
          "time transforms and cannot be eliminated",
          info.family, k));
    for (int n : orders) {
      BoundaryWeight w;
      w.k = k;
      w.order = n;
      w.known = known;
      bool has_a = false, has_b = false, a_const = true;
      for (const auto& t : info.terms)
        if (t.order == n) {
          if (t.mass) {
            has_a = true;
            a_const = model_->coef(t.slot).constant();
          } else {
            has_b = true;
          }
        }
      if (has_a && !has_b && a_const) {
        // Constant mass coefficient: fold it into the polynomial.
        double a = 0.0;
        for (const auto& t : info.terms)
          if (t.order == n && t.mass) a += model_->term_value(t, 0);
        w.P = ipoly(n - 1 - k, a);
        w.order = -1;
        w.label = fmt::format("g{}'", k);
      } else {
        w.P = ipoly(n - 1 - k);
        w.label = fmt::format("G{}[n={}]", k, n);
      }
      weights_.push_back(w);
    }
  }
  // Unknown weights first, by decreasing k; known ones after.
  std::stable_sort(weights_.begin(), weights_.end(), [](const auto& a, const auto& b) {
    if (a.known != b.known) return !a.known;
    return a.k > b.k;
  });
  int unknown = 0;
  for (const auto& w : weights_) unknown += !w.known;
  const auto maps0 = model_->maps_for(0);
  if (unknown != static_cast<int>(maps0.size()))
    throw AssumptionError(fmt::format(
        "family {}: {} unknown boundary transforms but {} symmetry maps per contour", info.family,
        unknown, maps0.size()));
}

std::vector<IntegralTerm> SolutionEvaluator::terms() const {
  std::vector<IntegralTerm> out;
  out.push_back({"real line", "u0", "lambda"});
  out.push_back({"real line", "f", "lambda"});
  const auto maps = model_->maps_for(0);
  bool any_known = false;
  for (const auto& w : weights_) any_known = any_known || w.known;
  if (any_known) {
    out.push_back({"contours", "boundary", "lambda"});
    if (!model_->scalar_profile())
      for (const auto& m : maps) out.push_back({"contours", "boundary-mapped", m.label});
  }
  for (const auto& m : maps) out.push_back({"contours", "u0-mapped", m.label});
  for (const auto& m : maps) out.push_back({"contours", "f-mapped", m.label});
  return out;
}

// ---------------------------------------------------------------- contours

Contour SolutionEvaluator::real_line(double /*x_min*/, double x_max) const {
  const double R = num_.R_line > 0 ? num_.R_line : 100.0;
  const double L = std::min(num_.line_panel, 8.0 / std::max(x_max, 1e-3));
  const int m = static_cast<int>(std::ceil(1.5 * R / L));
  return build_real_line(R, 2 * std::max(m, 4));
}

namespace {

struct ContourSet {
  std::vector<Contour> contours;
  std::vector<std::vector<SymmetryMap>> maps;
  std::vector<std::vector<std::vector<cplx>>> images;  // [contour][map][node]
};

double max_image_imag(const std::vector<std::vector<cplx>>& im) {
  double m = -INFINITY;
  for (const auto& v : im)
    for (cplx z : v) m = std::max(m, z.imag() / (1.0 + std::abs(z)));
  return m;
}

}  // namespace

static ContourSet build_contour_set(const DispersionModel& model, const Numerics& num,
                                    double x_min, double x_max) {
  ContourSet cs;
  const double x_eff = std::max(x_min, 0.01);
  const int nc = model.contour_count();
  if (model.scalar_profile()) {
    const PoleSet& ps = model.reference_poles();
    const int nu = model.degree() / 2;
    const double w =
        num.width > 0 ? num.width : num.width_scale * ps.c0 * std::sin(kPi / (2.0 * nu));
    const auto angles = model.ray_angles();
    for (int j = 0; j < nc; ++j) {
      const double th = angles[j];
      Contour c;
      if (num.geometry == "loop") {
        c = build_segment_loop(ps.c0 * std::polar(1.0, th), ps.C0 * std::polar(1.0, th), w, 8);
      } else if (num.geometry == "ray") {
        const double R = num.R_contour > 0
                             ? num.R_contour
                             : std::max(2.0 * ps.C0, ps.c0 + 37.0 / (x_eff * std::sin(th)));
        const double osc = 8.0 / (std::max(x_max, 1e-3) * std::abs(std::cos(th)) + 1e-300);
        const double fine_until = ps.C0_finite ? std::min(ps.C0 + w, R) : R;
        c = build_ray_neighborhood(th, ps.c0, w, R, std::min(num.contour_panel, osc), 1, fine_until);
      } else {
        throw AssumptionError(fmt::format("unknown contour geometry '{}'", num.geometry));
      }
      auto maps = model.maps_for(j);
      std::vector<std::vector<cplx>> im;
      for (const auto& m : maps) im.push_back(m.along(c.nodes, true));
      if (max_image_imag(im) > kImageTol)
        throw NumericalError(fmt::format(
            "{}: a symmetry image leaves the lower half-plane (max Im sigma = {:.3g}); reduce the "
            "width",
            c.describe(), max_image_imag(im)));
      cs.contours.push_back(std::move(c));
      cs.maps.push_back(std::move(maps));
      cs.images.push_back(std::move(im));
    }
    return cs;
  }

  const PoleSet& ps = model.reference_poles();
  for (int j = 0; j < nc; ++j) {
    const cplx lj = ps.upper[j];
    std::vector<cplx> others;
    double dmin = INFINITY;
    for (cplx z : ps.all)
      if (z != lj) {
        others.push_back(z);
        dmin = std::min(dmin, std::abs(z - lj));
      }
    double r = num.loop_radius > 0 ? num.loop_radius : num.loop_scale * dmin;
    auto maps = model.maps_for(j);
    for (int attempt = 0;; ++attempt) {
      std::string why;
      try {
        Contour c = build_loop(lj, r, num.loop_nodes, others);
        std::vector<std::vector<cplx>> im;
        for (const auto& m : maps) im.push_back(m.along(c.nodes, true));
        if (max_image_imag(im) <= kImageTol) {
          cs.contours.push_back(std::move(c));
          cs.images.push_back(std::move(im));
          break;
        }
        why = fmt::format("a symmetry image leaves the lower half-plane (max Im sigma = {:.3g})",
                          max_image_imag(im));
      } catch (const NumericalError& e) {
        why = e.what();
      }
      if (num.loop_radius > 0 || attempt >= 12)
        throw NumericalError(fmt::format("loop around pole {:.6g}{:+.6g}i: {}", lj.real(),
                                         lj.imag(), why));
      r *= 0.7;
    }
    cs.maps.push_back(std::move(maps));
  }
  return cs;
}

std::vector<Contour> SolutionEvaluator::contours(double x_min, double x_max) const {
  return build_contour_set(*model_, num_, x_min, x_max).contours;
}

// ---------------------------------------------------------------- elimination

SolutionEvaluator::NodeSystem SolutionEvaluator::node_system(int /*contour*/,
                                                             const std::vector<SymmetryMap>& maps,
                                                             cplx lambda, cplx* sigmas) const {
  const bool scalar = model_->scalar_profile();
  const int nm = static_cast<int>(maps.size());
  const int nw = static_cast<int>(weights_.size());
  NodeSystem ns;
  ns.sigma.assign(sigmas, sigmas + nm);
  ns.kappa.assign(nw, 0.0);
  ns.rho.assign(nm, 0.0);
  ns.rho_f.assign(nm, 0.0);
  const cplx pil = scalar ? cplx(1.0) : model_->Pi(lambda, 0.0);
  std::vector<cplx> pis(nm, 1.0);
  if (!scalar)
    for (int m = 0; m < nm; ++m) pis[m] = model_->Pi(sigmas[m], 0.0);

  Eigen::MatrixXcd C(nm, nm);
  Eigen::VectorXcd c(nm);
  for (int q = 0; q < nm; ++q) {
    c(q) = poly::eval(weights_[q].P, lambda) / pil;
    for (int m = 0; m < nm; ++m) C(m, q) = poly::eval(weights_[q].P, sigmas[m]) / pis[m];
  }
  if (nm > 0) {
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(C.transpose());
    ns.det = lu.determinant();
    double sc = 1.0;
    for (int m = 0; m < nm; ++m) sc *= C.row(m).norm();
    ns.det_scale = sc;
    if (!(std::abs(ns.det) > 1e-8 * sc))
      throw NumericalError(fmt::format(
          "elimination determinant vanishes at lambda = {:.8g}{:+.8g}i (|det| / scale = {:.3g})",
          lambda.real(), lambda.imag(), std::abs(ns.det) / sc));
    const Eigen::VectorXcd rho = lu.solve(c);
    for (int m = 0; m < nm; ++m) {
      ns.rho[m] = rho(m);
      ns.rho_f[m] = rho(m) / pis[m];
    }
  } else {
    ns.det = 1.0;
  }
  for (int q = nm; q < nw; ++q) {
    cplx v = poly::eval(weights_[q].P, lambda) / pil;
    for (int m = 0; m < nm; ++m) v -= ns.rho[m] * poly::eval(weights_[q].P, sigmas[m]) / pis[m];
    ns.kappa[q] = v;
  }
  return ns;
}

SolutionEvaluator::NodeSystem SolutionEvaluator::elimination_at(int contour, cplx lambda) const {
  const auto maps = model_->maps_for(contour);
  std::vector<cplx> sig;
  for (const auto& m : maps) sig.push_back(m(lambda));
  return node_system(contour, maps, lambda, sig.data());
}

// ---------------------------------------------------------------- evaluation

cplx SolutionEvaluator::evaluate(double x, double t) const {
  return evaluate_grid({x}, {t}).u.front();
}

SolutionGrid SolutionEvaluator::evaluate_grid(const std::vector<double>& xs,
                                              const std::vector<double>& ts, int threads) const {
  SolutionGrid out;
  out.xs = xs;
  out.ts = ts;
  out.scheme = "utm";
  out.u.assign(xs.size() * ts.size(), 0.0);
  if (xs.empty() || ts.empty()) return out;
  for (double x : xs)
    if (!(x >= 0) || !std::isfinite(x)) throw Error(fmt::format("evaluation point x = {} < 0", x));
  for (double t : ts)
    if (!(t >= 0) || t > spec_.T_max * (1 + 1e-12))
      throw Error(fmt::format("evaluation time t = {} outside [0, T_max = {}]", t, spec_.T_max));
  const int nthreads = resolve_threads(threads > 0 ? threads : num_.threads);

  const FamilyInfo& info = model_->info();
  const bool scalar = model_->scalar_profile();
  const bool factored = model_->factored();
  const double x_min = *std::min_element(xs.begin(), xs.end());
  const double x_max = *std::max_element(xs.begin(), xs.end());
  const std::size_t nt = ts.size();

  const TimeGrid tg = make_time_grid(ts, num_.tau_panel, num_.tau_order);
  const int n_tau = static_cast<int>(tg.nodes.size());
  const int n_br = static_cast<int>(tg.breaks.size());
  const int ord = tg.order;

  // Coefficients and boundary weights on the time grid.
  const std::size_t n_terms = info.terms.size();
  std::vector<std::vector<double>> coef_at(n_terms, std::vector<double>(n_tau));
  std::vector<std::vector<double>> coef_int_at(n_terms, std::vector<double>(n_tau));
  std::vector<std::vector<double>> coef_int_br(n_terms, std::vector<double>(n_br));
  for (std::size_t a = 0; a < n_terms; ++a) {
    const auto& term = info.terms[a];
    const CoefFn& cf = model_->coef(term.slot);
    for (int i = 0; i < n_tau; ++i) {
      coef_at[a][i] = term.sign * cf(tg.nodes[i]);
      if (factored && !term.mass) coef_int_at[a][i] = term.sign * cf.integral(tg.nodes[i]);
    }
    if (factored && !term.mass)
      for (int b = 0; b < n_br; ++b) coef_int_br[a][b] = term.sign * cf.integral(tg.breaks[b]);
  }
  const int nw = static_cast<int>(weights_.size());
  std::vector<std::vector<double>> wq(nw, std::vector<double>(n_tau, 0.0));
  for (int q = 0; q < nw; ++q) {
    const auto& w = weights_[q];
    if (!w.known) continue;
    const expr::Compiled g(g_[w.k], {"t"}), gp(gp_[w.k], {"t"});
    for (int i = 0; i < n_tau; ++i) {
      const double tau = tg.nodes[i];
      if (w.order < 0) {
        wq[q][i] = gp(tau);
        continue;
      }
      double a = 0.0, b = 0.0;
      for (std::size_t k = 0; k < n_terms; ++k)
        if (info.terms[k].order == w.order) (info.terms[k].mass ? a : b) += coef_at[k][i];
      wq[q][i] = a * gp(tau) + b * g(tau);
    }
  }
  std::vector<double> e_inf(nt);
  for (std::size_t k = 0; k < nt; ++k) e_inf[k] = std::exp(-model_->big_omega_inf(ts[k]));

  // Contours, images and the node list.
  const Contour line = real_line(x_min, x_max);
  const ContourSet cs = build_contour_set(*model_, num_, x_min, x_max);
  struct NodeRef {
    int contour;  // -1: real line
    int index;
  };
  std::vector<NodeRef> nodes;
  for (std::size_t i = 0; i < line.size(); ++i) nodes.push_back({-1, static_cast<int>(i)});
  for (std::size_t c = 0; c < cs.contours.size(); ++c)
    for (std::size_t i = 0; i < cs.contours[c].size(); ++i)
      nodes.push_back({static_cast<int>(c), static_cast<int>(i)});

  std::vector<cplx> sig_all(line.nodes.begin(), line.nodes.end());
  for (const auto& im : cs.images)
    for (const auto& v : im) sig_all.insert(sig_all.end(), v.begin(), v.end());
  const FourierBank u0_bank(u0_, {0.0}, sig_all);
  const FourierBank f_bank(f_, tg.nodes, sig_all);
  const bool have_f = !f_.zero();
  bool have_known = false;
  for (const auto& w : weights_) have_known = have_known || w.known;

  const std::vector<double>& S = quad::integration_matrix(ord);

  // Node values V[node * nt + k] such that u = E_inf u0 + sum w e^{i lambda x} V / (2 pi).
  std::vector<cplx> V(nodes.size() * nt, 0.0);
  parallel_for(nodes.size(), nthreads, [&](std::size_t ni) {
    const NodeRef nr = nodes[ni];
    const bool on_line = nr.contour < 0;
    const cplx lam = on_line ? line.nodes[nr.index] : cs.contours[nr.contour].nodes[nr.index];

    // Omega on the time grid.
    std::vector<cplx> om(n_tau), om_br(n_br), dfac(n_tau, 1.0);
    if (factored) {
      const cplx pil = model_->Pi(lam, 0.0);
      std::vector<cplx> pw(n_terms);
      for (std::size_t a = 0; a < n_terms; ++a) pw[a] = ipow(I * lam, info.terms[a].order) / pil;
      for (int i = 0; i < n_tau; ++i) {
        cplx s = 0.0;
        for (std::size_t a = 0; a < n_terms; ++a)
          if (!info.terms[a].mass) s += pw[a] * coef_int_at[a][i];
        om[i] = s;
      }
      for (int b = 0; b < n_br; ++b) {
        cplx s = 0.0;
        for (std::size_t a = 0; a < n_terms; ++a)
          if (!info.terms[a].mass) s += pw[a] * coef_int_br[a][b];
        om_br[b] = s;
      }
      if (scalar)
        for (int i = 0; i < n_tau; ++i) dfac[i] = 1.0 / pil;
    } else {
      std::vector<cplx> w_om(n_tau), pw(n_terms);
      for (std::size_t a = 0; a < n_terms; ++a) pw[a] = ipow(I * lam, info.terms[a].order);
      for (int i = 0; i < n_tau; ++i) {
        cplx num = 0.0, den = 1.0;
        for (std::size_t a = 0; a < n_terms; ++a)
          (info.terms[a].mass ? den : num) += coef_at[a][i] * pw[a];
        w_om[i] = num / den;
        dfac[i] = 1.0 / den;
      }
      om_br[0] = 0.0;
      for (int p = 0; p < n_br - 1; ++p) {
        const double h = (tg.breaks[p + 1] - tg.breaks[p]) / 2;
        cplx acc = 0.0;
        for (int j = 0; j < ord; ++j) acc += tg.weights[p * ord + j] * w_om[p * ord + j];
        for (int i = 0; i < ord; ++i) {
          cplx s = 0.0;
          for (int j = 0; j < ord; ++j) s += S[i * ord + j] * w_om[p * ord + j];
          om[p * ord + i] = om_br[p] + h * s;
        }
        om_br[p + 1] = om_br[p] + acc;
      }
    }

    double shift = 0.0;
    for (int i = 0; i < n_tau; ++i) shift = std::max(shift, om[i].real());
    std::vector<cplx> A(n_tau);
    for (int i = 0; i < n_tau; ++i) A[i] = tg.weights[i] * std::exp(om[i] - shift) * dfac[i];

    // Per-node sources on the time grid, accumulated panel by panel.
    std::vector<cplx> src(n_tau, 0.0);
    cplx u0_term = 0.0;
    std::vector<cplx> buf(n_tau);
    if (on_line) {
      cplx u0h;
      u0_bank.transform(lam, &u0h);
      u0_term = u0h;
      if (have_f) {
        f_bank.transform(lam, buf.data());
        const cplx inv = scalar ? cplx(1.0) : 1.0 / model_->Pi(lam, 0.0);
        for (int i = 0; i < n_tau; ++i) src[i] = buf[i] * inv;
      }
    } else {
      const auto& maps = cs.maps[nr.contour];
      const int nm = static_cast<int>(maps.size());
      std::vector<cplx> sig(nm);
      for (int m = 0; m < nm; ++m) sig[m] = cs.images[nr.contour][m][nr.index];
      const NodeSystem ns = node_system(nr.contour, maps, lam, sig.data());
      for (int m = 0; m < nm; ++m) {
        cplx u0h;
        u0_bank.transform(sig[m], &u0h);
        u0_term -= ns.rho[m] * u0h;
        if (have_f) {
          f_bank.transform(sig[m], buf.data());
          for (int i = 0; i < n_tau; ++i) src[i] -= ns.rho_f[m] * buf[i];
        }
      }
      if (have_known)
        for (int q = 0; q < nw; ++q) {
          if (!weights_[q].known || ns.kappa[q] == 0.0) continue;
          for (int i = 0; i < n_tau; ++i) src[i] += ns.kappa[q] * wq[q][i];
        }
    }

    // Prefix sums at the breaks.
    std::vector<cplx> pre(n_br, 0.0);
    for (int p = 0; p < n_br - 1; ++p) {
      cplx s = 0.0;
      for (int j = 0; j < ord; ++j) s += A[p * ord + j] * src[p * ord + j];
      pre[p + 1] = pre[p] + s;
    }
    for (std::size_t k = 0; k < nt; ++k) {
      const int b = tg.t_break[k];
      const cplx E = std::exp(-om_br[b]);
      cplx tw = 0.0;
      if (b > 0) {
        const double ex = shift - om_br[b].real();
        if (ex > 700)
          throw NumericalError(fmt::format(
              "exponent overflow in a time transform at lambda = {:.6g}{:+.6g}i, t = {}",
              lam.real(), lam.imag(), ts[k]));
        tw = std::exp(cplx(shift, 0.0) - om_br[b]) * pre[b];
      }
      cplx v;
      if (on_line)
        v = (E - e_inf[k]) * u0_term + tw;
      else
        v = E * u0_term + tw;
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
        throw NumericalError(fmt::format("non-finite integrand at lambda = {:.6g}{:+.6g}i, t = {}",
                                         lam.real(), lam.imag(), ts[k]));
      V[ni * nt + k] = v;
    }
  });

  // Assemble u(x, t) with fixed-order summation.
  const expr::Compiled u0fn(u0_.expression(), {"x"});
  parallel_for(xs.size(), nthreads, [&](std::size_t ix) {
    const double x = xs[ix];
    std::vector<cplx> ph(nodes.size());
    for (std::size_t ni = 0; ni < nodes.size(); ++ni) {
      const NodeRef nr = nodes[ni];
      const Contour& c = nr.contour < 0 ? line : cs.contours[nr.contour];
      ph[ni] = c.weights[nr.index] * std::exp(I * c.nodes[nr.index] * x);
    }
    const double u0x = u0_.zero() ? 0.0 : u0fn(x);
    std::vector<cplx> terms(nodes.size());
    for (std::size_t k = 0; k < nt; ++k) {
      for (std::size_t ni = 0; ni < nodes.size(); ++ni) terms[ni] = ph[ni] * V[ni * nt + k];
      out.at(ix, k) = e_inf[k] * u0x + pairwise_sum(terms) / (2 * kPi);
    }
  });
  return out;
}

// ---------------------------------------------------------------- report

EliminationReport SolutionEvaluator::elimination_report() const {
  EliminationReport rep;
  rep.weights = weights_;
  const ContourSet cs = build_contour_set(*model_, num_, 1.0, 1.0);
  const int fam = model_->family();
  const double a = model_->coef(kAlpha)(0);
  for (std::size_t c = 0; c < cs.contours.size(); ++c) {
    ContourReport cr;
    cr.label = cs.contours[c].describe();
    const auto& maps = cs.maps[c];
    const int nm = static_cast<int>(maps.size());
    for (const auto& m : maps) cr.maps.push_back(m.label);
    cr.nodes = cs.contours[c].nodes;
    cr.max_image_imag = max_image_imag(cs.images[c]);
    cr.min_det_ratio = INFINITY;
    for (std::size_t i = 0; i < cr.nodes.size(); ++i) {
      const cplx l = cr.nodes[i];
      std::vector<cplx> s(nm);
      for (int m = 0; m < nm; ++m) s[m] = cs.images[c][m][i];
      const NodeSystem ns = node_system(static_cast<int>(c), maps, l, s.data());
      cr.det_numeric.push_back(ns.det);
      cr.min_det_ratio = std::min(cr.min_det_ratio, std::abs(ns.det) / ns.det_scale);
      auto Pi = [&](cplx z) { return model_->Pi(z, 0.0); };
      cplx closed = 0.0;
      bool have = true;
      switch (fam) {
        case 3:
          closed = c == 0 ? l * cplx(1, 1) : l * cplx(-1, 1);
          cr.closed_form = c == 0 ? "lambda*(1+i)" : "lambda*(-1+i)";
          break;
        case 4:
          closed = a * a * I * (l + s[1]) / (Pi(l) * Pi(s[1]));
          cr.closed_form = "alpha^2*i*(lambda+sigma)/(Pi(lambda)*Pi(sigma))";
          break;
        case 5:
          closed = I * (l + s[1]) / (Pi(l) * Pi(s[1]));
          cr.closed_form = "i*(lambda+sigma1)/(Pi(lambda)*Pi(sigma1))";
          break;
        case 6:
          closed = a * a * I * (s[1] - s[0]) / (Pi(s[0]) * Pi(s[1]));
          cr.closed_form = "alpha^2*i*(sigma2-sigma1)/(Pi(sigma1)*Pi(sigma2))";
          break;
        case 7: {
          cplx v = a * a * a * I;
          for (int k = 0; k < nm; ++k)
            for (int m = k + 1; m < nm; ++m) v *= s[m] - s[k];
          for (int k = 0; k < nm; ++k) v /= Pi(s[k]);
          closed = v;
          cr.closed_form = "alpha^3*i*prod_{k<l}(sigma_l-sigma_k)/prod Pi(sigma_k)";
          break;
        }
        default: have = false;
      }
      if (have) {
        cr.det_closed.push_back(closed);
        cr.max_rel_mismatch =
            std::max(cr.max_rel_mismatch, std::abs(ns.det - closed) / std::abs(closed));
      }
    }
    if (model_->scalar_profile() && nm > 0) {
      // Unit multiplier matrix: rows (i mu_m)^(K-1-k) over the unknown orders.
      Eigen::MatrixXcd M(nm, nm);
      for (int m = 0; m < nm; ++m)
        for (int q = 0; q < nm; ++q) M(m, q) = poly::eval(weights_[q].P, maps[m].mu);
      Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M);
      const auto sv = svd.singularValues();
      cr.multiplier_condition = sv(0) / sv(sv.size() - 1);
    }
    for (int m = 0; m < nm; ++m)
      cr.dropped.push_back(fmt::format(
          "integral over the contour of e^(i lambda x) rho_{}(lambda) u_hat({}, t) d lambda = 0: "
          "the integrand is analytic inside the contour because the image stays in the lower "
          "half-plane (max Im sigma / (1+|sigma|) on the nodes = {:.3g})",
          m + 1, maps[m].label, max_image_imag({cs.images[c][m]})));
    rep.contours.push_back(std::move(cr));
  }
  return rep;
}

}  // namespace utm
