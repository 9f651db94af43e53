#include "utm/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

namespace utm {

namespace {

using json = nlohmann::json;

const char* const kSlotNames[] = {"alpha", "beta", "gamma", "delta"};

void check_keys(const json& obj, const std::string& path, std::set<std::string> allowed) {
  if (!obj.is_object()) throw ConfigError(fmt::format("{}: expected an object", path));
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key))
      throw ConfigError(fmt::format("{}: unknown key '{}'", path, key));
}

double get_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(fmt::format("{}: expected a number", path));
  return v.get<double>();
}

int get_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) throw ConfigError(fmt::format("{}: expected an integer", path));
  return v.get<int>();
}

std::string get_string(const json& v, const std::string& path) {
  if (!v.is_string()) throw ConfigError(fmt::format("{}: expected a string", path));
  return v.get<std::string>();
}

expr::Expression get_expression(const std::string& text, const std::string& path) {
  try {
    return expr::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(fmt::format("{}: {}", path, e.what()));
  }
}

std::vector<double> get_points(const json& v, const std::string& path) {
  std::vector<double> out;
  if (v.is_array()) {
    for (std::size_t i = 0; i < v.size(); ++i)
      out.push_back(get_number(v[i], fmt::format("{}[{}]", path, i)));
  } else if (v.is_object()) {
    check_keys(v, path, {"linspace"});
    const json& ls = v.at("linspace");
    if (!ls.is_array() || ls.size() != 3)
      throw ConfigError(fmt::format("{}.linspace: expected [start, stop, count]", path));
    const double a = get_number(ls[0], path + ".linspace[0]");
    const double b = get_number(ls[1], path + ".linspace[1]");
    const int n = get_int(ls[2], path + ".linspace[2]");
    if (n < 1) throw ConfigError(fmt::format("{}.linspace: count must be positive", path));
    for (int i = 0; i < n; ++i) out.push_back(n == 1 ? a : a + (b - a) * i / (n - 1));
  } else {
    throw ConfigError(fmt::format("{}: expected an array or {{\"linspace\": [a, b, n]}}", path));
  }
  return out;
}

void parse_problem(const json& p, RunConfig& c) {
  check_keys(p, "problem",
             {"family", "nu", "coefficients", "u0", "f", "boundary", "T_max", "manufactured"});
  if (!p.contains("family")) throw ConfigError("problem.family: required");
  const json& fam = p.at("family");
  try {
    if (fam.is_number_integer())
      c.problem.family = fam.get<int>();
    else if (fam.is_string())
      c.problem.family = family_from_name(fam.get<std::string>());
    else
      throw ConfigError("expected an integer 1-9 or a family name");
    if (c.problem.family < 1 || c.problem.family > 9) throw ConfigError("expected 1-9");
  } catch (const Error& e) {
    throw ConfigError(fmt::format("problem.family: {}", e.what()));
  }
  if (p.contains("nu")) c.problem.nu = get_int(p.at("nu"), "problem.nu");
  if (p.contains("T_max")) c.problem.T_max = get_number(p.at("T_max"), "problem.T_max");
  if (!(c.problem.T_max > 0)) throw ConfigError("problem.T_max: must be positive");

  c.problem.coefficients.assign(4, expr::num(0));
  if (p.contains("coefficients")) {
    const json& co = p.at("coefficients");
    check_keys(co, "problem.coefficients", {"alpha", "beta", "gamma", "delta"});
    for (int s = 0; s < 4; ++s) {
      if (!co.contains(kSlotNames[s])) continue;
      const std::string path = fmt::format("problem.coefficients.{}", kSlotNames[s]);
      const std::string text = get_string(co.at(kSlotNames[s]), path);
      c.coefficient_text[kSlotNames[s]] = text;
      c.problem.coefficients[s] = get_expression(text, path);
    }
  }
  if (p.contains("u0")) c.u0_text = get_string(p.at("u0"), "problem.u0");
  if (p.contains("f")) c.f_text = get_string(p.at("f"), "problem.f");
  c.problem.u0 = get_expression(c.u0_text, "problem.u0");
  c.problem.f = get_expression(c.f_text, "problem.f");
  if (p.contains("manufactured"))
    c.manufactured_text = get_string(p.at("manufactured"), "problem.manufactured");

  if (p.contains("boundary")) {
    const json& b = p.at("boundary");
    if (b.is_array() && !c.manufactured_text.empty()) {
      for (std::size_t i = 0; i < b.size(); ++i) {
        const int k = get_int(b[i], fmt::format("problem.boundary[{}]", i));
        c.boundary_text[k] = "0";
        c.problem.boundary[k] = expr::num(0);
      }
    } else {
      if (!b.is_object())
        throw ConfigError(
            "problem.boundary: expected an object {\"g0\": ...} (or an order list with "
            "\"manufactured\")");
      for (const auto& [key, value] : b.items()) {
        const std::string path = "problem.boundary." + key;
        int k = -1;
        if (key.size() >= 2 && key[0] == 'g' &&
            key.find_first_not_of("0123456789", 1) == std::string::npos && key.size() <= 3)
          k = std::stoi(key.substr(1));
        if (k < 0) throw ConfigError(fmt::format("{}: keys must be g0, g1, ...", path));
        c.boundary_text[k] = get_string(value, path);
        c.problem.boundary[k] = get_expression(c.boundary_text[k], path);
      }
    }
  }
  if (!c.manufactured_text.empty()) {
    const auto us = get_expression(c.manufactured_text, "problem.manufactured");
    try {
      c.problem = oracle::manufactured_problem(c.problem, us);
    } catch (const std::exception& e) {
      throw ConfigError(fmt::format("problem.manufactured: {}", e.what()));
    }
  }
}

void parse_numerics(const json& n, RunConfig& c) {
  check_keys(n, "numerics",
             {"width_scale", "width", "loop_scale", "loop_radius", "loop_nodes", "R_line",
              "R_contour", "line_panel", "contour_panel", "tau_panel", "tau_order", "threads",
              "geometry", "oracle", "tolerance"});
  Numerics& m = c.numerics;
  auto num = [&](const char* key, double& dst) {
    if (n.contains(key)) dst = get_number(n.at(key), std::string("numerics.") + key);
  };
  auto integer = [&](const char* key, int& dst) {
    if (n.contains(key)) dst = get_int(n.at(key), std::string("numerics.") + key);
  };
  num("width_scale", m.width_scale);
  num("width", m.width);
  num("loop_scale", m.loop_scale);
  num("loop_radius", m.loop_radius);
  integer("loop_nodes", m.loop_nodes);
  num("R_line", m.R_line);
  num("R_contour", m.R_contour);
  num("line_panel", m.line_panel);
  num("contour_panel", m.contour_panel);
  num("tau_panel", m.tau_panel);
  integer("tau_order", m.tau_order);
  integer("threads", m.threads);
  num("tolerance", c.tolerance);
  if (n.contains("geometry")) {
    m.geometry = get_string(n.at("geometry"), "numerics.geometry");
    if (m.geometry != "ray" && m.geometry != "loop")
      throw ConfigError("numerics.geometry: expected \"ray\" or \"loop\"");
  }
  if (m.tau_order != 4 && m.tau_order != 8 && m.tau_order != 12 && m.tau_order != 16)
    throw ConfigError("numerics.tau_order: expected 4, 8, 12 or 16");
  if (!(m.width_scale > 0) || !(m.loop_scale > 0) || !(m.line_panel > 0) ||
      !(m.contour_panel > 0) || !(m.tau_panel > 0) || m.loop_nodes < 8)
    throw ConfigError("numerics: scales, panel lengths and node counts must be positive");
  if (n.contains("oracle")) {
    const json& o = n.at("oracle");
    check_keys(o, "numerics.oracle", {"h", "dt", "X_max"});
    if (o.contains("h")) c.oracle.h = get_number(o.at("h"), "numerics.oracle.h");
    if (o.contains("dt")) c.oracle.dt = get_number(o.at("dt"), "numerics.oracle.dt");
    if (o.contains("X_max")) c.oracle.X_max = get_number(o.at("X_max"), "numerics.oracle.X_max");
    if (!(c.oracle.h > 0) || !(c.oracle.dt > 0))
      throw ConfigError("numerics.oracle: h and dt must be positive");
  }
}

void parse_output(const json& o, RunConfig& c) {
  check_keys(o, "output", {"xs", "ts", "path", "format"});
  if (o.contains("xs")) c.xs = get_points(o.at("xs"), "output.xs");
  if (o.contains("ts")) c.ts = get_points(o.at("ts"), "output.ts");
  if (o.contains("path")) c.output_path = get_string(o.at("path"), "output.path");
  if (o.contains("format")) {
    c.format = get_string(o.at("format"), "output.format");
    if (c.format != "csv" && c.format != "json")
      throw ConfigError("output.format: expected \"csv\" or \"json\"");
  }
  for (double x : c.xs)
    if (!(x >= 0)) throw ConfigError("output.xs: values must be >= 0");
  for (double t : c.ts)
    if (!(t >= 0) || t > c.problem.T_max)
      throw ConfigError("output.ts: values must lie in [0, T_max]");
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text, nullptr, true, false);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string msg = e.what();
    if (const auto p = msg.find(" - "); p != std::string::npos) msg = msg.substr(p + 3);
    throw ConfigError(fmt::format("config syntax error at line {}, column {}: {}", line, col, msg));
  }
  check_keys(root, "config", {"problem", "numerics", "output"});
  RunConfig c;
  if (!root.contains("problem")) throw ConfigError("problem: required");
  parse_problem(root.at("problem"), c);
  if (root.contains("numerics")) parse_numerics(root.at("numerics"), c);
  if (root.contains("output")) parse_output(root.at("output"), c);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config file '{}'", path));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_json(const RunConfig& c, int indent) {
  json root;
  json& p = root["problem"];
  p["family"] = c.problem.family;
  p["nu"] = c.problem.nu;
  p["T_max"] = c.problem.T_max;
  p["coefficients"] = json::object();
  for (const auto& [k, v] : c.coefficient_text) p["coefficients"][k] = v;
  p["u0"] = c.u0_text;
  p["f"] = c.f_text;
  if (c.manufactured_text.empty()) {
    p["boundary"] = json::object();
    for (const auto& [k, v] : c.boundary_text) p["boundary"][fmt::format("g{}", k)] = v;
  } else {
    p["manufactured"] = c.manufactured_text;
    p["boundary"] = json::array();
    for (const auto& [k, v] : c.boundary_text) p["boundary"].push_back(k);
  }
  const Numerics& m = c.numerics;
  json& n = root["numerics"];
  n["width_scale"] = m.width_scale;
  n["width"] = m.width;
  n["loop_scale"] = m.loop_scale;
  n["loop_radius"] = m.loop_radius;
  n["loop_nodes"] = m.loop_nodes;
  n["R_line"] = m.R_line;
  n["R_contour"] = m.R_contour;
  n["line_panel"] = m.line_panel;
  n["contour_panel"] = m.contour_panel;
  n["tau_panel"] = m.tau_panel;
  n["tau_order"] = m.tau_order;
  n["threads"] = m.threads;
  n["geometry"] = m.geometry;
  n["tolerance"] = c.tolerance;
  n["oracle"] = {{"h", c.oracle.h}, {"dt", c.oracle.dt}, {"X_max", c.oracle.X_max}};
  json& o = root["output"];
  o["xs"] = c.xs;
  o["ts"] = c.ts;
  o["path"] = c.output_path;
  o["format"] = c.format;
  return root.dump(indent);
}

}  // namespace utm
