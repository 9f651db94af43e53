#include "utm/contours.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "utm/quadrature.hpp"

namespace utm {

namespace {

constexpr double kPi = std::numbers::pi;

/// Appends GL16 nodes of the straight segment a -> b.
void add_segment(Contour& c, cplx a, cplx b) {
  const auto& gl = quad::gl16();
  const cplx half = (b - a) / 2.0;
  const cplx mid = (a + b) / 2.0;
  for (int i = 0; i < gl.size(); ++i) {
    c.nodes.push_back(mid + half * gl.x[i]);
    c.weights.push_back(half * gl.w[i]);
  }
}

/// Appends GL16 nodes of the arc center + r e^{i phi}, phi from p0 to p1.
void add_arc(Contour& c, cplx center, double r, double p0, double p1) {
  const auto& gl = quad::gl16();
  const double half = (p1 - p0) / 2, mid = (p0 + p1) / 2;
  for (int i = 0; i < gl.size(); ++i) {
    const double phi = mid + half * gl.x[i];
    const cplx e = std::polar(1.0, phi);
    c.nodes.push_back(center + r * e);
    c.weights.push_back(I * r * e * (half * gl.w[i]));
  }
}

void check_loop(const Contour& c, std::span<const cplx> exclude, bool require_upper,
                const std::function<bool(cplx)>& inside) {
  for (cplx p : exclude)
    if (inside(p))
      throw NumericalError(fmt::format("{} encloses the excluded pole {:.6g}{:+.6g}i",
                                       c.describe(), p.real(), p.imag()));
  if (require_upper)
    for (cplx z : c.nodes)
      if (!(z.imag() > 0))
        throw NumericalError(fmt::format("{} crosses the real axis", c.describe()));
}

}  // namespace

std::string Contour::describe() const {
  switch (kind) {
    case Kind::RealLine: return fmt::format("real line [-{:.6g}, {:.6g}]", R, R);
    case Kind::RayNeighborhood:
      return fmt::format("ray neighbourhood (theta {:.6g}, c0 {:.6g}, width {:.6g}, R {:.6g})",
                         theta, c0, width, R);
    case Kind::ClosedLoop:
      return fmt::format("loop (center {:.6g}{:+.6g}i, radius {:.6g})", center.real(),
                         center.imag(), radius);
    case Kind::SegmentLoop:
      return fmt::format("segment loop ([{:.6g}{:+.6g}i, {:.6g}{:+.6g}i], radius {:.6g})",
                         center.real(), center.imag(), seg_end.real(), seg_end.imag(), radius);
  }
  return "contour";
}

Contour build_real_line(double R, int n_panels) {
  if (!(R > 0)) throw Error("build_real_line: R must be positive");
  if (n_panels < 8) throw Error("build_real_line: at least 8 panels are required");
  Contour c;
  c.kind = Contour::Kind::RealLine;
  c.R = R;
  c.n_panels = n_panels;
  const int m = (n_panels + 1) / 2;
  std::vector<double> edges(m + 1);
  for (int k = 0; k <= m; ++k) edges[k] = R * std::pow(static_cast<double>(k) / m, 1.5);
  for (int k = m; k > 0; --k) add_segment(c, -edges[k], -edges[k - 1]);
  for (int k = 0; k < m; ++k) add_segment(c, edges[k], edges[k + 1]);
  return c;
}

Contour build_ray_neighborhood(double theta, double c0, double w, double R, double panel_max,
                               int density, double fine_until) {
  const double s = std::sin(std::min(theta, kPi - theta));
  if (!(w > 0) || !(w < c0 * s))
    throw NumericalError(fmt::format(
        "ray neighbourhood width {:.6g} violates 0 < w < c0 sin(theta) = {:.6g}", w, c0 * s));
  if (!(R > c0)) throw NumericalError("ray neighbourhood: R must exceed c0");
  Contour c;
  c.kind = Contour::Kind::RayNeighborhood;
  c.closed = true;
  c.theta = theta;
  c.c0 = c0;
  c.width = w;
  c.R = R;
  c.panel_max = panel_max;
  c.n = density;
  c.fine_until = fine_until < 0 ? R : std::min(fine_until, R);

  const double pmax = panel_max / density;
  std::vector<double> eta{c0};
  const double fine = std::min(w, panel_max) / density;
  double len = fine;
  while (eta.back() < R) {
    eta.push_back(std::min(R, eta.back() + len));
    len = eta.back() < c.fine_until ? fine : std::min(pmax, 1.5 * len);
  }
  if (eta.size() >= 3 && eta.back() - eta[eta.size() - 2] < 0.25 * len) eta.erase(eta.end() - 2);

  const cplx rot = std::polar(1.0, theta);
  Contour local;
  for (std::size_t k = 0; k + 1 < eta.size(); ++k)
    add_segment(local, cplx(eta[k], -w), cplx(eta[k + 1], -w));
  for (int k = 0; k < density; ++k)
    add_segment(local, cplx(R, -w + 2 * w * k / density), cplx(R, -w + 2 * w * (k + 1) / density));
  for (std::size_t k = eta.size() - 1; k > 0; --k)
    add_segment(local, cplx(eta[k], w), cplx(eta[k - 1], w));
  for (int k = 0; k < 2 * density; ++k)
    add_arc(local, c0, w, kPi / 2 + kPi * k / (2 * density), kPi / 2 + kPi * (k + 1) / (2 * density));
  for (std::size_t i = 0; i < local.nodes.size(); ++i) {
    c.nodes.push_back(rot * local.nodes[i]);
    c.weights.push_back(rot * local.weights[i]);
  }
  return c;
}

Contour build_loop(cplx center, double r, int n, std::span<const cplx> exclude,
                   bool require_upper) {
  if (!(r > 0) || n < 4) throw NumericalError("loop: radius must be positive and n >= 4");
  Contour c;
  c.kind = Contour::Kind::ClosedLoop;
  c.closed = true;
  c.center = center;
  c.radius = r;
  c.n = n;
  for (int k = 0; k < n; ++k) {
    const cplx e = std::polar(1.0, 2 * kPi * k / n);
    c.nodes.push_back(center + r * e);
    c.weights.push_back(I * r * e * (2 * kPi / n));
  }
  check_loop(c, exclude, require_upper, [&](cplx p) { return std::abs(p - center) <= r; });
  return c;
}

Contour build_segment_loop(cplx a, cplx b, double r, int panels_per_side,
                           std::span<const cplx> exclude, bool require_upper) {
  if (!(r > 0) || panels_per_side < 1 || a == b)
    throw NumericalError("segment loop: need r > 0, a != b and at least one panel");
  Contour c;
  c.kind = Contour::Kind::SegmentLoop;
  c.closed = true;
  c.center = a;
  c.seg_end = b;
  c.radius = r;
  c.n = panels_per_side;
  const cplx d = (b - a) / std::abs(b - a);
  const cplx nrm = -I * d;  // right-hand normal
  const double phi = std::arg(d);
  for (int k = 0; k < panels_per_side; ++k) {
    const cplx p0 = a + (b - a) * (double(k) / panels_per_side) + r * nrm;
    const cplx p1 = a + (b - a) * (double(k + 1) / panels_per_side) + r * nrm;
    add_segment(c, p0, p1);
  }
  const double side = std::abs(b - a) / panels_per_side;
  const int arc_pieces = std::max(2, static_cast<int>(std::ceil(kPi * r / side)));
  const auto cap = [&](cplx center, double from) {
    for (int k = 0; k < arc_pieces; ++k)
      add_arc(c, center, r, from + kPi * k / arc_pieces, from + kPi * (k + 1) / arc_pieces);
  };
  cap(b, phi - kPi / 2);
  for (int k = panels_per_side; k > 0; --k) {
    const cplx p0 = a + (b - a) * (double(k) / panels_per_side) - r * nrm;
    const cplx p1 = a + (b - a) * (double(k - 1) / panels_per_side) - r * nrm;
    add_segment(c, p0, p1);
  }
  cap(a, phi + kPi / 2);
  auto inside = [&](cplx p) {
    const double tt = std::clamp(((p - a) * std::conj(b - a)).real() / std::norm(b - a), 0.0, 1.0);
    return std::abs(p - (a + tt * (b - a))) <= r;
  };
  check_loop(c, exclude, require_upper, inside);
  return c;
}

Contour refined(const Contour& c) {
  switch (c.kind) {
    case Contour::Kind::RealLine: return build_real_line(c.R, 2 * c.n_panels);
    case Contour::Kind::RayNeighborhood:
      return build_ray_neighborhood(c.theta, c.c0, c.width, c.R, c.panel_max, 2 * c.n, c.fine_until);
    case Contour::Kind::ClosedLoop: return build_loop(c.center, c.radius, 2 * c.n, {}, false);
    case Contour::Kind::SegmentLoop:
      return build_segment_loop(c.center, c.seg_end, c.radius, 2 * c.n, {}, false);
  }
  return c;
}

cplx integrate(const Contour& c, const std::function<cplx(cplx)>& f) {
  std::vector<cplx> terms(c.nodes.size());
  for (std::size_t i = 0; i < c.nodes.size(); ++i) {
    const cplx v = f(c.nodes[i]);
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
      throw NumericalError(fmt::format("non-finite integrand at node {} ({:.6g}{:+.6g}i) of {}", i,
                                       c.nodes[i].real(), c.nodes[i].imag(), c.describe()));
    terms[i] = c.weights[i] * v;
  }
  return pairwise_sum(terms);
}

IntegralEstimate integrate_with_estimate(const Contour& c, const std::function<cplx(cplx)>& f) {
  const cplx coarse = integrate(c, f);
  const cplx fine = integrate(refined(c), f);
  return {fine, std::abs(fine - coarse)};
}

}  // namespace utm
