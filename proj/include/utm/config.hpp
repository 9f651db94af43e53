#ifndef UTM_CONFIG_HPP
#define UTM_CONFIG_HPP

#include <map>
#include <string>
#include <vector>

#include "utm/assembly.hpp"
#include "utm/oracle.hpp"

namespace utm {

/// Invalid configuration text or values; the message names the offending field.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Parsed run configuration. The *_text fields keep the original expression strings so the
/// configuration can be echoed faithfully.
struct RunConfig {
  ProblemSpec problem;
  std::map<std::string, std::string> coefficient_text;  // alpha, beta, gamma, delta
  std::string u0_text = "0";
  std::string f_text = "0";
  std::map<int, std::string> boundary_text;
  std::string manufactured_text;  // non-empty: u0, f and g_k derive from this u*(x,t)

  Numerics numerics;
  oracle::Settings oracle;
  double tolerance = -1.0;  // negative: max(1e-3, 3 * oracle estimate)

  std::vector<double> xs;
  std::vector<double> ts;
  std::string output_path;
  std::string format = "csv";
};

/// Parses strict JSON; errors carry line and column (syntax) or the field path (values).
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Canonical JSON text of the configuration; parse_config(config_json(c)) is equivalent to c.
std::string config_json(const RunConfig& c, int indent = 2);

}  // namespace utm

#endif  // UTM_CONFIG_HPP
