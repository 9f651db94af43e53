#ifndef UTM_ASSEMBLY_HPP
#define UTM_ASSEMBLY_HPP

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "utm/common.hpp"
#include "utm/contours.hpp"
#include "utm/dispersion.hpp"
#include "utm/expr.hpp"
#include "utm/grid.hpp"
#include "utm/poly.hpp"
#include "utm/transforms.hpp"

namespace utm {

/// One of the nine half-line problems: P u = f for x > 0, u(x,0) = u0(x), d^k u/dx^k (0,t) = g_k(t).
struct ProblemSpec {
  int family = 1;
  int nu = 1;
  std::vector<expr::Expression> coefficients;  // alpha, beta, gamma, delta (missing: 0)
  expr::Expression u0 = expr::num(0);          // in x
  expr::Expression f = expr::num(0);           // in x and t
  std::map<int, expr::Expression> boundary;    // k -> g_k(t)
  double T_max = 1.0;
};

/// Contour and quadrature settings. Zero means "choose automatically".
struct Numerics {
  double width_scale = 0.25;  // ray width w = width_scale * c0 * sin(pi / (2 nu))
  double width = 0.0;
  double loop_scale = 0.25;  // loop radius r = loop_scale * distance to the nearest other pole
  double loop_radius = 0.0;
  int loop_nodes = 128;
  double R_line = 0.0;
  double R_contour = 0.0;
  double line_panel = 1.0;     // upper bound for real-line panel lengths
  double contour_panel = 2.0;  // upper bound for ray-side panel lengths
  double tau_panel = 0.125;    // upper bound for time panels
  int tau_order = 8;
  int threads = 0;  // 0: UTM_THREADS or 1
  /// "ray": ray neighbourhoods (or loops around fixed poles); "loop": closed loops around the
  /// sampled pole segments for the time-dependent denominators.
  std::string geometry = "ray";
};

/// Thread count from the argument, then the UTM_THREADS environment variable, then 1.
int resolve_threads(int requested);

/// One boundary time transform: weight(tau) = A(tau) g_k'(tau) + B(tau) g_k(tau), multiplied by
/// the polynomial P(lambda) in the transformed equation.
struct BoundaryWeight {
  int k = 0;
  int order = 0;  // operator order it comes from (-1 when several mass terms merge)
  bool known = false;
  poly::Poly P;
  std::string label;
};

struct IntegralTerm {
  std::string contour;  // "real line" or "contours"
  std::string kind;     // u0, f, boundary, u0-mapped, f-mapped, boundary-mapped
  std::string argument;
};

struct ContourReport {
  std::string label;
  std::vector<std::string> maps;
  std::vector<cplx> nodes;
  std::vector<cplx> det_numeric;
  std::vector<cplx> det_closed;  // empty when no closed form is known
  std::string closed_form;
  double max_rel_mismatch = 0.0;
  double min_det_ratio = 0.0;  // min |det| / scale over nodes
  double multiplier_condition = 0.0;
  double max_image_imag = 0.0;  // max over maps and nodes of Im sigma(lambda)
  std::vector<std::string> dropped;
};

struct EliminationReport {
  std::vector<BoundaryWeight> weights;
  std::vector<ContourReport> contours;
};

class SolutionEvaluator {
public:
  SolutionEvaluator(const ProblemSpec& spec, const Numerics& num = {});

  const ProblemSpec& spec() const { return spec_; }
  const Numerics& numerics() const { return num_; }
  const DispersionModel& model() const { return *model_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  const std::vector<BoundaryWeight>& weights() const { return weights_; }
  std::vector<IntegralTerm> terms() const;

  /// Contours used for a batch whose smallest and largest x are given.
  std::vector<Contour> contours(double x_min, double x_max) const;
  Contour real_line(double x_min, double x_max) const;

  cplx evaluate(double x, double t) const;
  SolutionGrid evaluate_grid(const std::vector<double>& xs, const std::vector<double>& ts,
                             int threads = 0) const;
  EliminationReport elimination_report() const;

  /// Elimination at one contour node: u0_hat(sigma_m) enters with -rho[m], the forcing transform
  /// at sigma_m with -rho_f[m] and the known boundary transform q with kappa[q].
  struct NodeSystem {
    std::vector<cplx> sigma;
    std::vector<cplx> rho;
    std::vector<cplx> rho_f;
    std::vector<cplx> kappa;  // per weight (zero for eliminated weights)
    cplx det = 0.0;
    double det_scale = 1.0;
  };
  /// Elimination at lambda for the maps of contour j (tracked maps continue from their seeds).
  NodeSystem elimination_at(int contour, cplx lambda) const;

private:
  void build_weights();
  NodeSystem node_system(int contour, const std::vector<SymmetryMap>& maps, cplx lambda,
                         cplx* sigmas) const;

  ProblemSpec spec_;
  Numerics num_;
  std::shared_ptr<DispersionModel> model_;
  HalfLineProfile u0_, f_;
  std::vector<expr::Expression> g_, gp_;  // g_k and g_k' (zero when unknown)
  std::vector<BoundaryWeight> weights_;
  std::vector<std::string> warnings_;
};

/// Convenience wrapper.
inline SolutionEvaluator assemble(const ProblemSpec& spec, const Numerics& num = {}) {
  return SolutionEvaluator(spec, num);
}

}  // namespace utm

#endif  // UTM_ASSEMBLY_HPP
