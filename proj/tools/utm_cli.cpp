#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "utm/assembly.hpp"
#include "utm/config.hpp"
#include "utm/oracle.hpp"

namespace {

using json = nlohmann::json;
using utm::cplx;

enum ExitCode { kOk = 0, kConfig = 1, kNumerical = 2, kCompare = 3 };

struct Options {
  std::string config;
  int threads = 0;
  std::string out;
};

void require_grid(const utm::RunConfig& c) {
  if (c.xs.empty() || c.ts.empty())
    throw utm::ConfigError("output.xs and output.ts must list at least one point each");
}

std::string grid_text(const utm::SolutionGrid& g, const std::string& format) {
  if (format == "json") {
    json j;
    j["xs"] = g.xs;
    j["ts"] = g.ts;
    std::vector<double> re, im;
    for (const cplx& v : g.u) {
      re.push_back(v.real());
      im.push_back(v.imag());
    }
    j["re_u"] = re;
    j["im_u"] = im;
    j["layout"] = "x-major";
    return j.dump(1) + "\n";
  }
  std::string s = "x,t,re_u,im_u\n";
  for (std::size_t i = 0; i < g.xs.size(); ++i)
    for (std::size_t k = 0; k < g.ts.size(); ++k) {
      const cplx v = g.at(i, k);
      s += fmt::format("{},{},{},{}\n", g.xs[i], g.ts[k], v.real(), v.imag());
    }
  return s;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw utm::Error(fmt::format("cannot write '{}'", path));
  out << text;
}

/// Writes the grid to the output path (or stdout) and the JSON sidecar next to it.
void emit(const utm::RunConfig& c, const Options& opt, const utm::SolutionGrid& g,
          json sidecar) {
  const std::string path = opt.out.empty() ? c.output_path : opt.out;
  const std::string text = grid_text(g, c.format);
  sidecar["config"] = json::parse(utm::config_json(c));
  sidecar["scheme"] = g.scheme;
  sidecar["max_abs_imag_u"] = g.max_abs_imag();
  if (path.empty()) {
    std::fwrite(text.data(), 1, text.size(), stdout);
    return;
  }
  write_file(path, text);
  write_file(path + ".json", sidecar.dump(2) + "\n");
  std::fprintf(stderr, "wrote %s and %s.json\n", path.c_str(), path.c_str());
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

utm::SolutionGrid run_utm(const utm::RunConfig& c, const Options& opt, json& sidecar) {
  const auto t0 = std::chrono::steady_clock::now();
  utm::SolutionEvaluator ev(c.problem, c.numerics);
  for (const auto& w : ev.warnings()) std::fprintf(stderr, "warning: %s\n", w.c_str());
  const double x_min = *std::min_element(c.xs.begin(), c.xs.end());
  const double x_max = *std::max_element(c.xs.begin(), c.xs.end());
  if (x_min == 0.0) std::fprintf(stderr, "warning: x = 0 requested; boundary values are limits\n");
  utm::SolutionGrid g = ev.evaluate_grid(c.xs, c.ts, opt.threads);
  json contours = json::array();
  contours.push_back(ev.real_line(x_min, x_max).describe());
  for (const auto& k : ev.contours(x_min, x_max)) contours.push_back(k.describe());
  sidecar["contours"] = contours;
  sidecar["warnings"] = ev.warnings();
  sidecar["threads"] = utm::resolve_threads(opt.threads > 0 ? opt.threads : c.numerics.threads);
  sidecar["timing_seconds"] = seconds_since(t0);
  return g;
}

utm::SolutionGrid run_oracle(const utm::RunConfig& c, json& sidecar) {
  const auto t0 = std::chrono::steady_clock::now();
  utm::SolutionGrid g = utm::oracle::fd_reference(c.problem, c.xs, c.ts, c.oracle);
  sidecar["oracle"] = {{"h", c.oracle.h}, {"dt", c.oracle.dt}, {"X_max", c.oracle.X_max},
                       {"richardson_estimate", g.error_estimate}};
  sidecar["timing_seconds"] = seconds_since(t0);
  return g;
}

int cmd_solve(const Options& opt) {
  const utm::RunConfig c = utm::load_config(opt.config);
  require_grid(c);
  json sidecar;
  const auto g = run_utm(c, opt, sidecar);
  emit(c, opt, g, sidecar);
  return kOk;
}

int cmd_oracle(const Options& opt) {
  const utm::RunConfig c = utm::load_config(opt.config);
  require_grid(c);
  json sidecar;
  const auto g = run_oracle(c, sidecar);
  emit(c, opt, g, sidecar);
  return kOk;
}

int cmd_compare(const Options& opt) {
  const utm::RunConfig c = utm::load_config(opt.config);
  require_grid(c);
  json s1, s2;
  const auto u = run_utm(c, opt, s1);
  const auto fd = run_oracle(c, s2);
  double x_limit = c.oracle.X_max > 0 ? c.oracle.X_max / 2 : 15.0;
  const auto r = utm::oracle::compare(u, fd, x_limit, c.tolerance);

  std::printf("%10s %14s %14s %14s\n", "t", "max|utm-fd|", "max|fd|", "max|Im utm|");
  for (std::size_t k = 0; k < u.ts.size(); ++k) {
    double d = 0, s = 0, im = 0;
    for (std::size_t i = 0; i < u.xs.size(); ++i) {
      if (u.xs[i] > x_limit || u.xs[i] + u.ts[k] < 0.01) continue;
      d = std::max(d, std::abs(u.at(i, k) - fd.at(i, k)));
      s = std::max(s, std::abs(fd.at(i, k)));
      im = std::max(im, std::abs(u.at(i, k).imag()));
    }
    std::printf("%10.6g %14.6e %14.6e %14.6e\n", u.ts[k], d, s, im);
  }
  std::printf("relative Linf %.6e  relative L2 %.6e  points %d\n", r.linf, r.l2, r.points);
  std::printf("oracle Richardson estimate %.6e  tolerance %.6e\n", r.oracle_estimate,
              r.tolerance);
  std::printf("%s\n", r.pass ? "PASS" : "FAIL");
  if (!opt.out.empty() || !c.output_path.empty()) {
    json sidecar = {{"utm", s1}, {"oracle", s2}};
    sidecar["comparison"] = {{"linf", r.linf},   {"l2", r.l2},
                             {"points", r.points}, {"oracle_estimate", r.oracle_estimate},
                             {"tolerance", r.tolerance}, {"pass", r.pass}};
    emit(c, opt, u, sidecar);
  }
  return r.pass ? kOk : kCompare;
}

std::string zstr(cplx z) { return fmt::format("{:.10g}{:+.10g}i", z.real(), z.imag()); }

int cmd_analyze(const Options& opt) {
  const utm::RunConfig c = utm::load_config(opt.config);
  utm::SolutionEvaluator ev(c.problem, c.numerics);
  const utm::DispersionModel& m = ev.model();
  const auto& info = m.info();
  std::printf("family %d (%s)%s\n", info.family, info.name.c_str(),
              info.family == 9 ? fmt::format(", nu = {}", info.nu).c_str() : "");
  std::printf("%s\n", m.describe().c_str());
  std::printf("denominator: %s\n", m.factored() ? "time independent" : "time dependent");
  const auto ps = m.poles(0.0);
  std::printf("poles at t = 0:\n");
  for (cplx z : ps.all)
    std::printf("  %s%s\n", zstr(z).c_str(), z.imag() > 0 ? "  (upper)" : "");
  const auto& ref = m.reference_poles();
  std::printf("c0 = %.10g", ref.c0);
  if (ref.C0_finite)
    std::printf("  C0 = %.10g\n", ref.C0);
  else
    std::printf("  C0 = infinity\n");
  if (info.family == 7) {
    const auto chk = utm::validate_family7(m.coef(utm::kAlpha)(0), m.coef(utm::kBeta)(0),
                                           m.coef(utm::kGamma)(0));
    std::printf("resultant of w, w': %.10g (scale %.3g) %s\n", chk.value, chk.scale,
                chk.pass ? "nonzero" : "VANISHES");
  }
  std::printf("symmetry maps:\n");
  for (int j = 0; j < m.contour_count(); ++j)
    for (const auto& s : m.maps_for(j)) {
      std::printf("  contour %d: %s", j + 1, s.label.c_str());
      if (s.kind == utm::SymmetryMap::Kind::Tracked)
        std::printf("  [seed %s -> %s]", zstr(s.seed_lambda).c_str(), zstr(s.seed_sigma).c_str());
      std::printf("\n");
    }
  std::printf("boundary transforms (unknowns first):\n");
  for (const auto& w : ev.weights())
    std::printf("  %-12s k=%d %s\n", w.label.c_str(), w.k, w.known ? "given" : "eliminated");
  std::printf("integral terms:\n");
  for (const auto& t : ev.terms())
    std::printf("  %-10s %-16s at %s\n", t.contour.c_str(), t.kind.c_str(), t.argument.c_str());
  const auto rep = ev.elimination_report();
  for (const auto& cr : rep.contours) {
    std::printf("contour %s: %zu nodes\n", cr.label.c_str(), cr.nodes.size());
    std::printf("  min |det| / scale = %.3e, max Im sigma / (1+|sigma|) = %.3e\n",
                cr.min_det_ratio, cr.max_image_imag);
    if (!cr.closed_form.empty())
      std::printf("  closed-form determinant %s: max relative mismatch %.3e\n",
                  cr.closed_form.c_str(), cr.max_rel_mismatch);
    if (cr.multiplier_condition > 0)
      std::printf("  multiplier matrix condition number %.6g\n", cr.multiplier_condition);
    for (const auto& d : cr.dropped) std::printf("  dropped: %s\n", d.c_str());
  }
  for (const auto& w : ev.warnings()) std::printf("warning: %s\n", w.c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Half-line unified-transform solver for pseudo-parabolic families"};
  app.require_subcommand(1);
  Options opt;
  auto add = [&](const char* name, const char* help) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("config", opt.config, "JSON configuration file")->required();
    sub->add_option("--threads", opt.threads, "worker threads (default: UTM_THREADS or 1)")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--out", opt.out, "output path (overrides output.path)");
    return sub;
  };
  auto* solve = add("solve", "evaluate the transform solution on the output grid");
  auto* orc = add("oracle", "run the finite-difference reference on the output grid");
  auto* cmp = add("compare", "run both solvers and report the discrepancy");
  auto* ana = add("analyze", "print poles, symmetry maps and elimination diagnostics");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }
  try {
    if (solve->parsed()) return cmd_solve(opt);
    if (orc->parsed()) return cmd_oracle(opt);
    if (cmp->parsed()) return cmd_compare(opt);
    if (ana->parsed()) return cmd_analyze(opt);
  } catch (const utm::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const utm::AssumptionError& e) {
    std::fprintf(stderr, "invalid problem: %s\n", e.what());
    return kConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kNumerical;
  }
  return kConfig;
}
