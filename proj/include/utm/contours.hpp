#ifndef UTM_CONTOURS_HPP
#define UTM_CONTOURS_HPP

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "utm/common.hpp"

namespace utm {

/// Oriented path with quadrature: integral of f d lambda ~ sum weights[i] * f(nodes[i]).
struct Contour {
  enum class Kind { RealLine, RayNeighborhood, ClosedLoop, SegmentLoop };
  Kind kind = Kind::RealLine;
  std::vector<cplx> nodes;
  std::vector<cplx> weights;
  bool closed = false;

  // Geometry used to build the contour (meaning depends on kind).
  double R = 0.0;
  int n_panels = 0;
  double theta = 0.0;
  double c0 = 0.0;
  double width = 0.0;
  double panel_max = 1.0;
  double fine_until = 0.0;
  cplx center = 0.0;
  cplx seg_end = 0.0;
  double radius = 0.0;
  int n = 0;

  std::size_t size() const { return nodes.size(); }
  std::string describe() const;
};

/// Gauss-Legendre panels on [-R, R], graded towards lambda = 0.
Contour build_real_line(double R, int n_panels);

/// Counterclockwise boundary of the width-w neighbourhood of the ray {eta e^{i theta}: eta >= c0},
/// truncated at |lambda| ~ R with a straight far cap. Side panels stay at length w up to radius
/// fine_until (negative: R), where singularities may sit on the ray, then grow up to panel_max.
/// `density` divides every panel length.
Contour build_ray_neighborhood(double theta, double c0, double w, double R,
                               double panel_max = 1.0, int density = 1, double fine_until = -1.0);

/// Counterclockwise circle with n trapezoidal nodes. Fails when the circle encloses a point of
/// `exclude` or leaves the upper half-plane (when require_upper is set).
Contour build_loop(cplx center, double r, int n, std::span<const cplx> exclude = {},
                   bool require_upper = true);

/// Counterclockwise stadium of radius r around the segment [a, b] (Gauss-Legendre panels).
Contour build_segment_loop(cplx a, cplx b, double r, int panels_per_side = 8,
                           std::span<const cplx> exclude = {}, bool require_upper = true);

/// Same geometry with twice the node density.
Contour refined(const Contour& c);

struct IntegralEstimate {
  cplx value;
  double error;
};

/// Sum of weights times values with fixed-order pairwise summation; throws on non-finite values.
cplx integrate(const Contour& c, const std::function<cplx(cplx)>& f);
/// Integral on the refined contour plus the change relative to the base contour.
IntegralEstimate integrate_with_estimate(const Contour& c, const std::function<cplx(cplx)>& f);

}  // namespace utm

#endif  // UTM_CONTOURS_HPP
