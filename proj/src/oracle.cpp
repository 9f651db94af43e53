#include "utm/oracle.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <fmt/format.h>

namespace utm::oracle {

std::vector<double> fd_weights(double z, const std::vector<double>& nodes, int n) {
  const int np = static_cast<int>(nodes.size());
  if (n < 0 || np <= n) throw Error("fd_weights: need more nodes than the derivative order");
  // Fornberg's recursion; c[j][k] is the weight of node j for the k-th derivative.
  std::vector<std::vector<double>> c(np, std::vector<double>(n + 1, 0.0));
  double c1 = 1.0, c4 = nodes[0] - z;
  c[0][0] = 1.0;
  for (int i = 1; i < np; ++i) {
    const int mn = std::min(i, n);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = nodes[i] - z;
    for (int j = 0; j < i; ++j) {
      const double c3 = nodes[i] - nodes[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(np);
  for (int j = 0; j < np; ++j) w[j] = c[j][n];
  return w;
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

expr::Expression coef_expr(const ProblemSpec& spec, Slot s) {
  return static_cast<std::size_t>(s) < spec.coefficients.size() ? spec.coefficients[s]
                                                                 : expr::num(0);
}

/// Crank-Nicolson stepper for M(t) u_t + S(t) u = f on a uniform grid with boundary rows.
class Marcher {
public:
  Marcher(const ProblemSpec& spec, double X_max, int n_x)
      : spec_(spec), model_(spec.family, spec.nu, spec.coefficients, spec.T_max),
        n_(n_x), h_(X_max / (n_x - 1)), f_(spec.f, {"x", "t"}) {
    const FamilyInfo& info = model_.info();
    const int K = info.mass_order;
    if (n_x < 2 * K + 4)
      throw Error(fmt::format("oracle grid needs at least {} points (got {})", 2 * K + 4, n_x));
    for (const auto& [k, e] : spec.boundary) {
      known_.push_back(k);
      g_.emplace_back(e, std::vector<std::string>{"t"});
    }
    for (const auto& term : info.terms) {
      if (ops_.count(term.order)) continue;
      ops_[term.order] = derivative_matrix(term.order);
    }
    for (int k : known_) bc_[k] = boundary_weights(k);

    x_.resize(n_);
    for (int j = 0; j < n_; ++j) x_[j] = j * h_;
    u_.resize(n_);
    const expr::Compiled u0(spec.u0, {"x"});
    for (int j = 0; j < n_; ++j) u_(j) = u0(x_[j]);
    u_scale_ = 1.0 + u_.cwiseAbs().maxCoeff();
    if (!std::isfinite(u_scale_)) throw NumericalError("initial datum is not finite on the grid");
  }

  const Eigen::VectorXd& u() const { return u_; }
  const std::vector<double>& x() const { return x_; }
  double h() const { return h_; }

  void step(double t0, double dt) {
    const double tm = t0 + dt / 2, t1 = t0 + dt;
    std::vector<double> key{dt};
    const FamilyInfo& info = model_.info();
    for (const auto& term : info.terms) key.push_back(model_.term_value(term, tm));
    SpMat M(n_, n_), S(n_, n_);
    M.setIdentity();
    for (std::size_t a = 0; a < info.terms.size(); ++a) {
      const auto& term = info.terms[a];
      (term.mass ? M : S) += key[a + 1] * ops_.at(term.order);
    }
    if (key != key_) {
      SpMat A = M + (dt / 2) * S;
      A.makeCompressed();
      SpMat B = apply_boundary_rows(A);
      if (!analyzed_) {
        lu_.analyzePattern(B);
        analyzed_ = true;
      }
      lu_.factorize(B);
      if (lu_.info() != Eigen::Success)
        throw NumericalError(fmt::format(
            "oracle: singular banded matrix at t = {} (bandwidth {})", tm, bandwidth()));
      key_ = key;
    }
    Eigen::VectorXd fm(n_);
    for (int j = 0; j < n_; ++j) fm(j) = f_(x_[j], tm);
    Eigen::VectorXd rhs = dt * (fm - S * u_);
    for (std::size_t r = 0; r < known_.size(); ++r) {
      const int k = known_[r];
      double cur = 0.0;
      const auto& w = bc_.at(k);
      for (std::size_t j = 0; j < w.size(); ++j) cur += w[j] * u_(j);
      rhs(r) = g_[r](t1) - cur;
    }
    Eigen::VectorXd du = lu_.solve(rhs);
    u_ += du;
    const double m = u_.cwiseAbs().maxCoeff();
    if (!std::isfinite(m) || m > 1e10 * u_scale_)
      throw NumericalError(fmt::format("oracle: instability detected at t = {} (max |u| = {:.3g})",
                                       t1, m));
  }

private:
  SpMat derivative_matrix(int n) const {
    const int p = (n + 1) / 2;
    std::vector<Triplet> trip;
    std::vector<double> centered_nodes;
    for (int i = -p; i <= p; ++i) centered_nodes.push_back(i * h_);
    const auto wc = fd_weights(0.0, centered_nodes, n);
    for (int j = 0; j < n_; ++j) {
      if (j - p >= 0) {
        for (int i = -p; i <= p; ++i)
          if (j + i < n_ && wc[i + p] != 0.0) trip.emplace_back(j, j + i, wc[i + p]);
      } else {
        std::vector<double> nodes;
        for (int i = 0; i <= std::max(n + 1, j + p); ++i) nodes.push_back(i * h_);
        const auto w = fd_weights(j * h_, nodes, n);
        for (std::size_t i = 0; i < w.size(); ++i) trip.emplace_back(j, i, w[i]);
      }
    }
    SpMat D(n_, n_);
    D.setFromTriplets(trip.begin(), trip.end());
    return D;
  }

  std::vector<double> boundary_weights(int k) const {
    std::vector<double> nodes;
    for (int i = 0; i <= k + 1; ++i) nodes.push_back(i * h_);
    if (k == 0) return {1.0};
    return fd_weights(0.0, nodes, k);
  }

  SpMat apply_boundary_rows(const SpMat& A) const {
    const int nb = static_cast<int>(known_.size());
    std::vector<Triplet> trip;
    for (int c = 0; c < A.outerSize(); ++c)
      for (SpMat::InnerIterator it(A, c); it; ++it)
        if (it.row() >= nb) trip.emplace_back(it.row(), it.col(), it.value());
    for (int r = 0; r < nb; ++r) {
      const auto& w = bc_.at(known_[r]);
      for (std::size_t j = 0; j < w.size(); ++j) trip.emplace_back(r, j, w[j]);
    }
    SpMat B(n_, n_);
    B.setFromTriplets(trip.begin(), trip.end());
    B.makeCompressed();
    return B;
  }

  int bandwidth() const {
    int b = 0;
    for (const auto& [n, D] : ops_) b = std::max(b, (n + 1) / 2);
    return 2 * b + 1;
  }

  const ProblemSpec& spec_;
  DispersionModel model_;
  int n_;
  double h_;
  expr::Compiled f_;
  std::vector<int> known_;
  std::vector<expr::Compiled> g_;
  std::map<int, SpMat> ops_;
  std::map<int, std::vector<double>> bc_;
  std::vector<double> x_;
  Eigen::VectorXd u_;
  double u_scale_ = 1.0;
  std::vector<double> key_;
  bool analyzed_ = false;
  Eigen::SparseLU<SpMat> lu_;
};

/// 6-point Lagrange interpolation of grid values at x.
double interpolate(const Eigen::VectorXd& u, double h, double x) {
  const int n = static_cast<int>(u.size());
  int i0 = static_cast<int>(std::floor(x / h)) - 2;
  i0 = std::clamp(i0, 0, n - 6);
  double s = 0.0;
  for (int i = i0; i < i0 + 6; ++i) {
    double l = 1.0;
    for (int j = i0; j < i0 + 6; ++j)
      if (j != i) l *= (x - j * h) / ((i - j) * h);
    s += l * u(i);
  }
  return s;
}

/// Marches through the sorted output times with `steps[k]` equal steps on interval k.
std::vector<std::vector<double>> sample(const ProblemSpec& spec, double X_max, int n_x,
                                        const std::vector<double>& times,
                                        const std::vector<int>& steps,
                                        const std::vector<double>& xs) {
  Marcher m(spec, X_max, n_x);
  std::vector<std::vector<double>> out;
  double t = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double dt = (times[k] - t) / std::max(steps[k], 1);
    for (int s = 0; s < steps[k]; ++s) m.step(t + s * dt, dt);
    t = times[k];
    std::vector<double> row(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) row[i] = interpolate(m.u(), m.h(), xs[i]);
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace

SolutionGrid fd_solve(const ProblemSpec& spec, const Grid& g) {
  Marcher m(spec, g.X_max, g.n_x);
  SolutionGrid out;
  out.scheme = "crank-nicolson";
  out.xs = m.x();
  for (int k = 0; k <= g.n_t; ++k) out.ts.push_back(k * g.dt);
  if (g.n_t * g.dt > spec.T_max * (1 + 1e-12))
    throw Error(fmt::format("oracle grid reaches t = {} beyond T_max = {}", g.n_t * g.dt,
                            spec.T_max));
  out.u.assign(out.xs.size() * out.ts.size(), 0.0);
  for (int k = 0; k <= g.n_t; ++k) {
    if (k > 0) m.step((k - 1) * g.dt, g.dt);
    for (std::size_t j = 0; j < out.xs.size(); ++j) out.at(j, k) = m.u()(j);
  }
  return out;
}

SolutionGrid fd_reference(const ProblemSpec& spec, const std::vector<double>& xs,
                          const std::vector<double>& ts, const Settings& s) {
  double X = s.X_max;
  if (X <= 0) {
    X = 30.0;
    X = std::max(X, HalfLineProfile(spec.u0, 0.0).X_max());
    X = std::max(X, HalfLineProfile(spec.f, spec.T_max).X_max());
  }
  for (double x : xs)
    if (x < 0 || x > X) throw Error(fmt::format("oracle: x = {} outside [0, {}]", x, X));
  for (double t : ts)
    if (t < 0 || t > spec.T_max * (1 + 1e-12))
      throw Error(fmt::format("oracle: t = {} outside [0, T_max]", t));
  const int half_cells = static_cast<int>(std::ceil(X / (2 * s.h)));
  const int n_fine = 2 * half_cells + 1;
  X = 2 * half_cells * s.h;

  std::vector<double> times(ts.begin(), ts.end());
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  std::vector<int> fine_steps, coarse_steps;
  double prev = 0.0;
  for (double t : times) {
    const int m = static_cast<int>(std::ceil((t - prev) / (2 * s.dt) - 1e-9));
    coarse_steps.push_back(t > prev ? std::max(m, 1) : 0);
    fine_steps.push_back(2 * coarse_steps.back());
    prev = t;
  }
  const auto fine = sample(spec, X, n_fine, times, fine_steps, xs);
  const auto coarse = sample(spec, X, half_cells + 1, times, coarse_steps, xs);

  SolutionGrid out;
  out.scheme = "crank-nicolson";
  out.xs = xs;
  out.ts = ts;
  out.u.assign(xs.size() * ts.size(), 0.0);
  double est = 0.0;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const std::size_t r = std::lower_bound(times.begin(), times.end(), ts[k]) - times.begin();
    for (std::size_t i = 0; i < xs.size(); ++i) {
      out.at(i, k) = fine[r][i];
      est = std::max(est, std::abs(fine[r][i] - coarse[r][i]) / 3.0);
    }
  }
  out.error_estimate = est;
  return out;
}

Manufactured manufacture_forcing(const ProblemSpec& spec, const expr::Expression& u_star) {
  const FamilyInfo info = family_info(spec.family, spec.nu);
  const int K = info.mass_order;
  std::vector<expr::Expression> dx{expr::fold(u_star)}, dxt;
  for (int n = 1; n <= K; ++n) dx.push_back(expr::fold(expr::differentiate(dx.back(), "x")));
  for (const auto& d : dx) dxt.push_back(expr::fold(expr::differentiate(d, "t")));
  expr::Expression f = dxt[0];
  for (const auto& term : info.terms) {
    const auto c = expr::mul(expr::num(term.sign), coef_expr(spec, term.slot));
    f = expr::add(f, expr::mul(c, term.mass ? dxt[term.order] : dx[term.order]));
  }
  f = expr::fold(f);
  constexpr std::size_t kMaxNodes = 1000000;
  if (expr::node_count(f) > kMaxNodes)
    throw Error(fmt::format("manufactured forcing has {} nodes (limit {})", expr::node_count(f),
                            kMaxNodes));
  Manufactured m;
  m.f = f;
  m.u0 = expr::fold(expr::substitute(u_star, "t", expr::num(0)));
  for (int k = 0; k < K; ++k) m.g.push_back(expr::fold(expr::substitute(dx[k], "x", expr::num(0))));
  return m;
}

ProblemSpec manufactured_problem(const ProblemSpec& spec, const expr::Expression& u_star) {
  const Manufactured m = manufacture_forcing(spec, u_star);
  ProblemSpec out = spec;
  out.f = m.f;
  out.u0 = m.u0;
  for (auto& [k, e] : out.boundary) e = m.g.at(k);
  return out;
}

CompareReport compare(const SolutionGrid& utm, const SolutionGrid& fd, double x_limit,
                      double tolerance) {
  if (utm.xs != fd.xs || utm.ts != fd.ts)
    throw Error("compare: the two grids have different x or t nodes");
  CompareReport r;
  double num2 = 0.0, den2 = 0.0;
  for (std::size_t i = 0; i < fd.xs.size(); ++i)
    for (std::size_t k = 0; k < fd.ts.size(); ++k) {
      const double x = fd.xs[i], t = fd.ts[k];
      if (x > x_limit || x + t < 0.01) continue;
      const double d = std::abs(utm.at(i, k) - fd.at(i, k));
      r.abs_linf = std::max(r.abs_linf, d);
      r.scale = std::max(r.scale, std::abs(fd.at(i, k)));
      num2 += d * d;
      den2 += std::norm(fd.at(i, k));
      ++r.points;
    }
  if (r.points == 0) throw Error("compare: no grid points inside the comparison region");
  r.linf = r.scale > 0 ? r.abs_linf / r.scale : r.abs_linf;
  r.l2 = den2 > 0 ? std::sqrt(num2 / den2) : std::sqrt(num2);
  r.oracle_estimate = fd.error_estimate;
  r.tolerance = tolerance >= 0 ? tolerance : std::max(1e-3, 3 * fd.error_estimate);
  r.pass = r.linf <= r.tolerance;
  return r;
}

}  // namespace utm::oracle
