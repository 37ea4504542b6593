#pragma once

// Experiment runner behind the grushin command-line tool.

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace grushin::cli {

/// Syntax or validation problem in a config file; line() is 0 when the
/// offending value came from the built-in defaults.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& source, int line, const std::string& message);
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// Flat `key = value` text with `[section]` headers; `#` and `;` start comments.
class ConfigFile {
 public:
  static ConfigFile parse(const std::string& text, const std::string& source = "config");
  static ConfigFile load(const std::string& path);

  struct Entry {
    std::string value;
    int line = 0;
  };

  const std::string& source() const { return source_; }
  const std::string& text() const { return text_; }
  const std::map<std::string, Entry>& entries() const { return entries_; }
  const Entry* find(const std::string& key) const;

 private:
  std::string source_;
  std::string text_;
  std::map<std::string, Entry> entries_;  // "section.key"
};

struct Config {
  // [grid]
  double half_width = 1.0;
  int n = 65;
  // [problem]
  double gamma = 1.0;
  double delta = 1.0;
  double p = 2.0;
  // [singular]
  double k_growth = 4.0;
  double outer_tol = 1e-8;
  double inner_tol = 1e-10;
  // [branch]
  double lambda_start = 0.1;
  double lambda_growth = 1.5;
  double lambda_max = 1e3;
  int sweep_points = 10;
  double tol_lambda = 1e-4;
  double relative_tol = 0.02;
  int probe_attempts = 5;
  double probe_factor = 2.0;
  // [second]
  double lambda = 0.0;  // 0: lambda_fraction times the lower end of the bracket
  double lambda_fraction = 0.25;
  int nodes = 32;
  int max_sweeps = 400;
  double bubble_epsilon = 0.1;
  double bubble_x = 0.5;
  double bubble_y = 0.0;
  double bubble_radius = 0.2;
  int sobolev_n = 65;
  // [verify]
  std::vector<double> torsion_gammas{0.0, 0.5, 1.0, 2.0};
  std::vector<double> polar_gammas{0.5, 1.0, 2.0};
  std::vector<double> polar_alphas{0.0, 1.0, 2.0};
  std::vector<int> polar_resolutions{128, 256, 512, 1024, 2048};
  int polar_check_resolution = 512;
  double blowup_eps_max = 1e-2;
  double blowup_eps_min = 1e-4;
  int blowup_points = 6;
  std::vector<double> inequality_powers{1.5, 2.0, 3.0, 6.0};
  long inequality_samples = 100000;
  int property_nodes = 100;
  // [run]
  std::uint64_t seed = 20240601;
  int jobs = 1;

  /// Reads known keys, rejects unknown ones and validates ranges; errors
  /// name the key and its line.
  static Config from_file(const ConfigFile& file);
};

/// Text of the built-in configuration.
const std::string& default_config_text();

struct RunOptions {
  std::string subcommand;
  std::optional<std::string> config_path;
  std::optional<std::string> out_dir;  // beats GSL_OUT, which beats "grushin_out"
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;
};

/// Resolves the output directory: flag, then the GSL_OUT environment
/// variable, then "grushin_out".
std::string resolve_out_dir(const std::optional<std::string>& flag);

/// Runs one subcommand (torsion, singular, branch, second, verify).
/// Returns 0 when every requested check passes, 1 on solver failure or a
/// failed check, 2 on configuration errors.
int run(const RunOptions& options, std::ostream& out, std::ostream& err);

}  // namespace grushin::cli
