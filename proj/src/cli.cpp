#include "grushin/cli.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>

#include <Eigen/Core>
#include <boost/version.hpp>
#include <openssl/evp.h>

#include "grushin/continuation.hpp"
#include "grushin/csv.hpp"
#include "grushin/errors.hpp"
#include "grushin/linear_solver.hpp"
#include "grushin/multiplicity.hpp"
#include "grushin/singular.hpp"
#include "grushin/verification.hpp"

namespace grushin::cli {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string where(const std::string& source, int line) {
  return line > 0 ? source + ":" + std::to_string(line) : source + " (default)";
}

}  // namespace

ConfigError::ConfigError(const std::string& source, int line, const std::string& message)
    : std::runtime_error(where(source, line) + ": " + message), line_(line) {}

ConfigFile ConfigFile::parse(const std::string& text, const std::string& source) {
  ConfigFile cf;
  cf.source_ = source;
  cf.text_ = text;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto cut = raw.find_first_of("#;");
    std::string line = trim(cut == std::string::npos ? raw : raw.substr(0, cut));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) throw ConfigError(source, line_no, "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(source, line_no, "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(source, line_no, "empty key");
    if (section.empty()) throw ConfigError(source, line_no, "key '" + key + "' outside any [section]");
    if (value.empty()) throw ConfigError(source, line_no, "empty value for '" + section + "." + key + "'");
    const std::string full = section + "." + key;
    if (cf.entries_.count(full)) throw ConfigError(source, line_no, "duplicate key '" + full + "'");
    cf.entries_[full] = Entry{value, line_no};
  }
  return cf;
}

ConfigFile ConfigFile::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path, 0, "cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

const ConfigFile::Entry* ConfigFile::find(const std::string& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

namespace {

class Reader {
 public:
  explicit Reader(const ConfigFile& f) : f_(f) {}

  template <class T>
  void get(const std::string& key, T& target) {
    used_.insert(key);
    const auto* e = f_.find(key);
    if (!e) return;
    target = parse_value<T>(key, e->value, e->line);
  }

  template <class T>
  void get_list(const std::string& key, std::vector<T>& target) {
    used_.insert(key);
    const auto* e = f_.find(key);
    if (!e) return;
    target.clear();
    std::stringstream ss(e->value);
    std::string item;
    while (std::getline(ss, item, ',')) target.push_back(parse_value<T>(key, trim(item), e->line));
    if (target.empty()) throw ConfigError(f_.source(), e->line, "'" + key + "' needs at least one value");
  }

  void require(bool ok, const std::string& key, const std::string& what) const {
    if (ok) return;
    const auto* e = f_.find(key);
    throw ConfigError(f_.source(), e ? e->line : 0, "'" + key + "' " + what);
  }

  void reject_unknown() const {
    for (const auto& [key, e] : f_.entries()) {
      if (!used_.count(key)) throw ConfigError(f_.source(), e.line, "unknown key '" + key + "'");
    }
  }

 private:
  template <class T>
  T parse_value(const std::string& key, const std::string& text, int line) const {
    T v{};
    const char* b = text.data();
    const char* e = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || ptr != e) {
      throw ConfigError(f_.source(), line, "'" + key + "' is not a valid number: '" + text + "'");
    }
    if constexpr (std::is_floating_point_v<T>) {
      if (!std::isfinite(v)) throw ConfigError(f_.source(), line, "'" + key + "' must be finite");
    }
    return v;
  }

  const ConfigFile& f_;
  std::set<std::string> used_;
};

}  // namespace

Config Config::from_file(const ConfigFile& file) {
  Config c;
  Reader r(file);
  r.get("grid.half_width", c.half_width);
  r.get("grid.n", c.n);
  r.get("problem.gamma", c.gamma);
  r.get("problem.delta", c.delta);
  r.get("problem.p", c.p);
  r.get("singular.k_growth", c.k_growth);
  r.get("singular.outer_tol", c.outer_tol);
  r.get("singular.inner_tol", c.inner_tol);
  r.get("branch.lambda_start", c.lambda_start);
  r.get("branch.lambda_growth", c.lambda_growth);
  r.get("branch.lambda_max", c.lambda_max);
  r.get("branch.sweep_points", c.sweep_points);
  r.get("branch.tol_lambda", c.tol_lambda);
  r.get("branch.relative_tol", c.relative_tol);
  r.get("branch.probe_attempts", c.probe_attempts);
  r.get("branch.probe_factor", c.probe_factor);
  r.get("second.lambda", c.lambda);
  r.get("second.lambda_fraction", c.lambda_fraction);
  r.get("second.nodes", c.nodes);
  r.get("second.max_sweeps", c.max_sweeps);
  r.get("second.bubble_epsilon", c.bubble_epsilon);
  r.get("second.bubble_x", c.bubble_x);
  r.get("second.bubble_y", c.bubble_y);
  r.get("second.bubble_radius", c.bubble_radius);
  r.get("second.sobolev_n", c.sobolev_n);
  r.get_list("verify.torsion_gammas", c.torsion_gammas);
  r.get_list("verify.polar_gammas", c.polar_gammas);
  r.get_list("verify.polar_alphas", c.polar_alphas);
  r.get_list("verify.polar_resolutions", c.polar_resolutions);
  r.get("verify.polar_check_resolution", c.polar_check_resolution);
  r.get("verify.blowup_eps_max", c.blowup_eps_max);
  r.get("verify.blowup_eps_min", c.blowup_eps_min);
  r.get("verify.blowup_points", c.blowup_points);
  r.get_list("verify.inequality_powers", c.inequality_powers);
  r.get("verify.inequality_samples", c.inequality_samples);
  r.get("verify.property_nodes", c.property_nodes);
  r.get("run.seed", c.seed);
  r.get("run.jobs", c.jobs);
  r.reject_unknown();

  r.require(c.half_width > 0.0, "grid.half_width", "must be > 0");
  r.require(c.n >= 3, "grid.n", "must be >= 3");
  r.require(c.gamma >= 0.0, "problem.gamma", "must be >= 0");
  r.require(c.delta > 0.0, "problem.delta", "must be > 0");
  r.require(c.p >= 1.0, "problem.p", "must be >= 1");
  r.require(c.k_growth > 1.0, "singular.k_growth", "must be > 1");
  r.require(c.outer_tol > 0.0, "singular.outer_tol", "must be > 0");
  r.require(c.inner_tol > 0.0, "singular.inner_tol", "must be > 0");
  r.require(c.lambda_start > 0.0, "branch.lambda_start", "must be > 0");
  r.require(c.lambda_growth > 1.0, "branch.lambda_growth", "must be > 1");
  r.require(c.lambda_max > 0.0, "branch.lambda_max", "must be > 0");
  r.require(c.sweep_points >= 1, "branch.sweep_points", "must be >= 1");
  r.require(c.tol_lambda > 0.0, "branch.tol_lambda", "must be > 0");
  r.require(c.relative_tol >= 0.0, "branch.relative_tol", "must be >= 0");
  r.require(c.probe_attempts >= 1, "branch.probe_attempts", "must be >= 1");
  r.require(c.probe_factor > 1.0, "branch.probe_factor", "must be > 1");
  r.require(c.lambda >= 0.0, "second.lambda", "must be >= 0");
  r.require(c.lambda_fraction > 0.0 && c.lambda_fraction < 1.0, "second.lambda_fraction", "must lie in (0, 1)");
  r.require(c.nodes >= 3, "second.nodes", "must be >= 3");
  r.require(c.max_sweeps >= 1, "second.max_sweeps", "must be >= 1");
  r.require(c.bubble_epsilon > 0.0, "second.bubble_epsilon", "must be > 0");
  r.require(c.bubble_radius > 0.0, "second.bubble_radius", "must be > 0");
  r.require(c.sobolev_n >= 3, "second.sobolev_n", "must be >= 3");
  for (double g : c.torsion_gammas) r.require(g >= 0.0, "verify.torsion_gammas", "entries must be >= 0");
  for (double g : c.polar_gammas) r.require(g >= 0.0, "verify.polar_gammas", "entries must be >= 0");
  for (int res : c.polar_resolutions) r.require(res >= 2, "verify.polar_resolutions", "entries must be >= 2");
  r.require(c.polar_resolutions.size() >= 2, "verify.polar_resolutions", "needs at least two resolutions");
  r.require(std::is_sorted(c.polar_resolutions.begin(), c.polar_resolutions.end()), "verify.polar_resolutions",
            "must be increasing");
  r.require(c.polar_check_resolution >= 2, "verify.polar_check_resolution", "must be >= 2");
  r.require(c.blowup_eps_max > c.blowup_eps_min && c.blowup_eps_min > 0.0, "verify.blowup_eps_min",
            "must satisfy 0 < blowup_eps_min < blowup_eps_max");
  r.require(c.blowup_points >= 5, "verify.blowup_points", "must be >= 5");
  for (double p : c.inequality_powers) r.require(p > 1.0, "verify.inequality_powers", "entries must be > 1");
  r.require(c.inequality_samples >= 1, "verify.inequality_samples", "must be >= 1");
  r.require(c.property_nodes >= 1, "verify.property_nodes", "must be >= 1");
  r.require(c.jobs >= 1, "run.jobs", "must be >= 1");
  // The polar alphas need the smallest Q among the polar gammas.
  for (double a : c.polar_alphas) {
    for (double g : c.polar_gammas) r.require(a > -(2.0 + g), "verify.polar_alphas", "entries must exceed -Q");
  }
  return c;
}

const std::string& default_config_text() {
  static const std::string text = R"([grid]
half_width = 1
n = 65

[problem]
gamma = 1
delta = 1
p = 2

[singular]
k_growth = 4
outer_tol = 1e-8
inner_tol = 1e-10

[branch]
lambda_start = 0.1
lambda_growth = 1.5
lambda_max = 1000
sweep_points = 10
tol_lambda = 1e-4
relative_tol = 0.02
probe_attempts = 5
probe_factor = 2

[second]
lambda = 0            # 0 means lambda_fraction times the lower bracket end
lambda_fraction = 0.25
nodes = 32
max_sweeps = 400
bubble_epsilon = 0.1
bubble_x = 0.5
bubble_y = 0
bubble_radius = 0.2
sobolev_n = 65

[verify]
torsion_gammas = 0, 0.5, 1, 2
polar_gammas = 0.5, 1, 2
polar_alphas = 0, 1, 2
polar_resolutions = 128, 256, 512, 1024, 2048
polar_check_resolution = 512
blowup_eps_max = 1e-2
blowup_eps_min = 1e-4
blowup_points = 6
inequality_powers = 1.5, 2, 3, 6
inequality_samples = 100000
property_nodes = 100

[run]
seed = 20240601
jobs = 1
)";
  return text;
}

std::string resolve_out_dir(const std::optional<std::string>& flag) {
  if (flag && !flag->empty()) return *flag;
  if (const char* env = std::getenv("GSL_OUT"); env && *env) return env;
  return "grushin_out";
}

namespace {

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr);
  std::ostringstream ss;
  for (unsigned int i = 0; i < len; ++i) ss << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return ss.str();
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt(double v) { return format_double(v); }

void run_tasks(std::vector<std::function<void()>>& tasks, int jobs) {
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(tasks.size());
  auto worker = [&]() {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        tasks[i]();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int threads = std::min<int>(jobs, static_cast<int>(tasks.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

CheckReport finish(CheckReport rep) {
  bool any_fail = false, any_inconclusive = false, any_inapplicable = false;
  for (const auto& m : rep.metrics) {
    any_fail |= m.verdict == Verdict::Fail;
    any_inconclusive |= m.verdict == Verdict::Inconclusive;
    any_inapplicable |= m.verdict == Verdict::Inapplicable;
  }
  if (any_fail) {
    rep.verdict = Verdict::Fail;
  } else if (any_inconclusive) {
    rep.verdict = Verdict::Inconclusive;
  } else if (any_inapplicable && rep.verdict == Verdict::Pass) {
    rep.verdict = Verdict::Inapplicable;
  }
  return rep;
}

Metric upper_bound(const std::string& name, double value, double bound) {
  return {name, value, bound, value <= bound ? Verdict::Pass : Verdict::Fail};
}

Metric lower_bound(const std::string& name, double value, double bound) {
  return {name, value, bound, value >= bound ? Verdict::Pass : Verdict::Fail};
}

/// A self-test passes when the wrapped checker reported a failure.
CheckReport self_test(const std::string& check, const std::string& case_name, bool detected) {
  CheckReport rep;
  rep.check = check;
  rep.case_name = case_name;
  rep.metrics.push_back({"violation_detected", detected ? 1.0 : 0.0, 1.0, detected ? Verdict::Pass : Verdict::Fail});
  return finish(rep);
}

struct Plot {
  std::string kind;  // field, series, summary
  std::string x;
  std::vector<std::string> ys;
  bool logx = false;
  bool logy = false;
};

std::string py_list(const std::vector<std::string>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", '" : "'") + v[i] + "'";
  return s + "]";
}

std::string plot_script(const std::string& csv_name, const Plot& plot) {
  std::ostringstream py;
  py << "#!/usr/bin/env python3\n"
     << "import csv\nimport os\n\nimport matplotlib\nmatplotlib.use('Agg')\nimport matplotlib.pyplot as plt\n\n"
     << "HERE = os.path.dirname(os.path.abspath(__file__))\n"
     << "CSV = os.path.join(HERE, '" << csv_name << "')\n\n"
     << "with open(CSV) as f:\n    rows = list(csv.DictReader(line for line in f if not line.startswith('#')))\n\n"
     << "fig, ax = plt.subplots(figsize=(6, 4.5))\n";
  if (plot.kind == "field") {
    py << "x = [float(r['x']) for r in rows]\ny = [float(r['y']) for r in rows]\n"
       << "v = [float(r['value']) for r in rows]\n"
       << "t = ax.tricontourf(x, y, v, levels=30)\nfig.colorbar(t, ax=ax)\n"
       << "ax.set_xlabel('x')\nax.set_ylabel('y')\n";
  } else if (plot.kind == "summary") {
    py << "counts = {}\nfor r in rows:\n    if r['metric'] == 'overall':\n"
       << "        counts[r['verdict']] = counts.get(r['verdict'], 0) + 1\n"
       << "ax.bar(list(counts), list(counts.values()))\nax.set_ylabel('checks')\n";
  } else {
    py << "def num(s):\n    try:\n        return float(s)\n    except ValueError:\n        return float('nan')\n\n"
       << "x = [num(r['" << plot.x << "']) for r in rows]\n"
       << "for col in " << py_list(plot.ys) << ":\n"
       << "    ax.plot(x, [num(r[col]) for r in rows], marker='o', label=col)\n"
       << "ax.set_xlabel('" << plot.x << "')\nax.legend()\n";
    if (plot.logx) py << "ax.set_xscale('log')\n";
    if (plot.logy) py << "ax.set_yscale('log')\n";
  }
  py << "ax.set_title('" << csv_name << "')\nfig.tight_layout()\n"
     << "fig.savefig(os.path.splitext(CSV)[0] + '.png', dpi=120)\n";
  return py.str();
}

class Session {
 public:
  Session(const RunOptions& opts, Config cfg, const ConfigFile& file, std::ostream& out)
      : opts_(opts), cfg_(std::move(cfg)), file_(file), out_(out), dir_(resolve_out_dir(opts.out_dir)) {
    fs::create_directories(dir_);
  }

  const Config& cfg() const { return cfg_; }
  std::ostream& out() { return out_; }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void add_file(const std::string& name) { files_.push_back(name); }
  void add_csv(const std::string& name, const Plot& plot) {
    add_file(name);
    const std::string script = "plot_" + fs::path(name).stem().string() + ".py";
    std::ofstream(path(script), std::ios::binary) << plot_script(name, plot);
    add_file(script);
  }
  void note(const std::string& key, const std::string& value) { extra_.emplace_back(key, value); }

  void write_summary(const std::vector<CheckReport>& reports) {
    write_summary_csv(path("summary.csv"), reports);
    add_csv("summary.csv", Plot{"summary", "", {}, false, false});
    int counts[4] = {0, 0, 0, 0};
    for (const auto& r : reports) {
      ++counts[static_cast<int>(r.verdict)];
      out_ << std::left << std::setw(13) << to_string(r.verdict) << ' ' << r.check;
      if (!r.case_name.empty()) out_ << " [" << r.case_name << "]";
      if (!r.message.empty()) out_ << ": " << r.message;
      out_ << '\n';
    }
    out_ << "checks: " << reports.size() << "  pass " << counts[0] << "  fail " << counts[1] << "  inconclusive "
         << counts[2] << "  inapplicable " << counts[3] << '\n';
  }

  void write_manifest(int exit_code, double seconds) {
    std::ofstream m(path("manifest.txt"), std::ios::binary);
    m << "subcommand=" << opts_.subcommand << '\n'
      << "config_source=" << (opts_.config_path ? *opts_.config_path : std::string("builtin")) << '\n'
      << "config_sha256=" << sha256_hex(file_.text()) << '\n'
      << "seed=" << cfg_.seed << '\n'
      << "jobs=" << cfg_.jobs << '\n'
      << "version=" << "0.1.0" << '\n'
      << "compiler=" << __VERSION__ << '\n'
      << "eigen=" << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION << '\n'
      << "boost=" << BOOST_LIB_VERSION << '\n';
    for (const auto& [k, v] : extra_) m << k << '=' << v << '\n';
    for (const auto& f : files_) m << "file." << f << "=sha256:" << sha256_hex(read_file(dir_ / f)) << '\n';
    m << "wall_time_s=" << std::fixed << std::setprecision(3) << seconds << '\n' << "exit_code=" << exit_code << '\n';
  }

 private:
  const RunOptions& opts_;
  Config cfg_;
  const ConfigFile& file_;
  std::ostream& out_;
  fs::path dir_;
  std::vector<std::string> files_;
  std::vector<std::pair<std::string, std::string>> extra_;
};

/// Thrown by a subcommand when a solver stops without an answer.
struct SolverFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

bool any_failed(const std::vector<CheckReport>& reports) {
  return std::any_of(reports.begin(), reports.end(), [](const CheckReport& r) { return r.failed(); });
}

Grid2D problem_grid(const Config& c) { return Grid2D::square(c.half_width, c.n); }

SingularConfig singular_config(const Config& c) {
  SingularConfig sc;
  sc.delta = c.delta;
  sc.k_growth = c.k_growth;
  sc.outer_tol = c.outer_tol;
  sc.inner_tol = c.inner_tol;
  sc.validate();
  return sc;
}

ContinuationOptions continuation_options(const Config& c) {
  ContinuationOptions o;
  o.lambda_start = c.lambda_start;
  o.lambda_growth = c.lambda_growth;
  o.lambda_max = c.lambda_max;
  o.relative_tol = c.relative_tol;
  o.jobs = c.jobs;
  return o;
}

std::string gamma_case(double g) { return "gamma=" + fmt(g); }

// ---------------------------------------------------------------- torsion

int cmd_torsion(Session& s) {
  const Config& c = s.cfg();
  const Grid2D grid = problem_grid(c);
  const OperatorMatrix A(grid, c.gamma);
  const Field u1 = solve_torsion(A, 1e-12);
  write_field_csv(s.path("torsion.csv"), grid, u1);
  s.add_csv("torsion.csv", Plot{"field", "", {}, false, false});
  CheckReport rep = max_principle_check(A, u1, 1e-8);
  rep.case_name = gamma_case(c.gamma);
  rep.metrics.push_back({"sup_u1", sup_norm(u1.span()), 0.0, Verdict::Pass});
  s.write_summary({rep});
  return rep.verdict == Verdict::Pass ? 0 : 1;
}

// ---------------------------------------------------------------- singular

int cmd_singular(Session& s) {
  const Config& c = s.cfg();
  const Grid2D grid = problem_grid(c);
  const OperatorMatrix A(grid, c.gamma);
  const SingularConfig sc = singular_config(c);
  SingularSolution lo, up;
  try {
    lo = solve_purely_singular(A, sc, LadderStart::Lower);
    up = solve_purely_singular(A, sc, LadderStart::Upper);
  } catch (const ConvergenceError& e) {
    throw SolverFailure(std::string("purely singular ladder: ") + e.what());
  }
  write_field_csv(s.path("u0.csv"), grid, lo.u0);
  s.add_csv("u0.csv", Plot{"field", "", {}, false, false});
  write_ladder_csv(s.path("ladder.csv"), lo.trace);
  s.add_csv("ladder.csv", Plot{"series", "k", {"sup_increment", "residual"}, true, true});

  std::vector<CheckReport> reports;
  const double h = std::max(grid.hx(), grid.hy());
  const BarrierReport br = check_barriers(lo.u0, lo.box.lower, lo.box.upper, 5.0 * h);
  CheckReport barrier;
  barrier.check = "barrier_sandwich";
  barrier.case_name = gamma_case(c.gamma) + " delta=" + fmt(c.delta);
  barrier.metrics.push_back(upper_bound("max_lower_violation", br.max_lower_violation, 0.0));
  barrier.metrics.push_back(upper_bound("max_upper_violation", br.max_upper_violation, 0.0));
  reports.push_back(finish(barrier));

  CheckReport cmp = comparison_check(lo.u0, up.u0, 10.0 * c.outer_tol);
  cmp.case_name = barrier.case_name;
  reports.push_back(cmp);

  CheckReport ladder;
  ladder.check = "ladder_increments";
  ladder.case_name = barrier.case_name;
  const bool dec = increments_eventually_decreasing(lo.trace);
  ladder.metrics.push_back({"eventually_decreasing", dec ? 1.0 : 0.0, 1.0, dec ? Verdict::Pass : Verdict::Fail});
  ladder.metrics.push_back({"levels", static_cast<double>(lo.trace.size()), 0.0, Verdict::Pass});
  reports.push_back(finish(ladder));

  CheckReport mp = max_principle_check(A, lo.u0, 1e-8);
  mp.case_name = "u0 " + barrier.case_name;
  reports.push_back(mp);
  s.write_summary(reports);
  return any_failed(reports) ? 1 : 0;
}

// ---------------------------------------------------------------- branch

void note_bracket(Session& s, const LambdaBracket& b) {
  if (b.open) {
    s.note("lambda_star", "open");
    s.note("lambda_star_lo", fmt(b.lo));
  } else {
    s.note("lambda_star", "bracket");
    s.note("lambda_star_lo", fmt(b.lo));
    s.note("lambda_star_hi", fmt(b.hi));
  }
  if (!b.note.empty()) s.note("lambda_star_note", b.note);
}

int cmd_branch(Session& s) {
  const Config& c = s.cfg();
  const BranchProblem problem = BranchProblem::build(problem_grid(c), c.gamma, c.delta, c.p, singular_config(c));
  const ContinuationOptions opts = continuation_options(c);

  std::vector<double> lambdas;
  for (double l = c.lambda_start; l <= c.lambda_max && static_cast<int>(lambdas.size()) < c.sweep_points;
       l *= c.lambda_growth) {
    lambdas.push_back(l);
  }
  const Branch branch = sweep(problem, lambdas, true, opts);
  const LambdaBracket bracket = estimate_lambda_star(problem, c.tol_lambda, opts);
  write_branch_csv(s.path("branch.csv"), branch, &bracket);
  s.add_csv("branch.csv", Plot{"series", "lambda", {"energy_rel", "sup_norm"}, false, false});
  note_bracket(s, bracket);

  std::vector<CheckReport> reports;
  const std::string case_name = gamma_case(c.gamma) + " delta=" + fmt(c.delta) + " p=" + fmt(c.p);
  int converged = 0;
  double max_energy = -std::numeric_limits<double>::infinity();
  for (const auto& pt : branch.points) {
    if (!pt.converged) continue;
    ++converged;
    max_energy = std::max(max_energy, pt.energy_rel);
  }
  CheckReport first;
  first.check = "first_solution";
  first.case_name = case_name;
  if (lambdas.empty()) {
    first.metrics.push_back({"converged_points", 0.0, 1.0, Verdict::Inapplicable});
    first.message = "lambda_start exceeds lambda_max";
  } else if (converged == 0) {
    throw SolverFailure("no branch point converged (lambda_start = " + fmt(c.lambda_start) + ")");
  } else {
    first.metrics.push_back(lower_bound("converged_points", converged, 1.0));
    first.metrics.push_back({"max_energy_rel", max_energy, 0.0, max_energy < 0.0 ? Verdict::Pass : Verdict::Fail});
  }
  reports.push_back(finish(first));

  CheckReport mono;
  mono.check = "branch_monotone";
  mono.case_name = case_name;
  std::string detail;
  const bool ok = branch_is_monotone(branch, 1e-10, &detail);
  mono.metrics.push_back({"ordered_pairs", ok ? 1.0 : 0.0, 1.0, ok ? Verdict::Pass : Verdict::Fail});
  mono.message = detail;
  reports.push_back(finish(mono));

  CheckReport br;
  br.check = "lambda_star_bracket";
  br.case_name = case_name;
  if (bracket.open) {
    br.metrics.push_back({"lo", bracket.lo, 0.0, Verdict::Inapplicable});
    br.message = bracket.note.empty() ? "open bracket" : bracket.note;
    reports.push_back(finish(br));
  } else {
    const double allowed = std::max(c.tol_lambda, c.relative_tol * bracket.lo);
    br.metrics.push_back({"lo", bracket.lo, 0.0, Verdict::Pass});
    br.metrics.push_back({"hi", bracket.hi, 0.0, Verdict::Pass});
    br.metrics.push_back(upper_bound("width", bracket.width(), allowed));
    reports.push_back(finish(br));

    const double probe_lambda = c.probe_factor * bracket.hi;
    const NonexistenceReport probe = nonexistence_probe(problem, probe_lambda, c.probe_attempts, c.seed, opts);
    CheckReport nx;
    nx.check = "nonexistence_probe";
    nx.case_name = case_name + " lambda=" + fmt(probe_lambda);
    nx.metrics.push_back({"failed_attempts", static_cast<double>(probe.failures), static_cast<double>(probe.attempts),
                          probe.all_failed() ? Verdict::Pass : Verdict::Fail});
    reports.push_back(finish(nx));
  }
  s.write_summary(reports);
  return any_failed(reports) ? 1 : 0;
}

// ---------------------------------------------------------------- second

int cmd_second(Session& s) {
  const Config& c = s.cfg();
  const Grid2D grid = problem_grid(c);
  const BranchProblem problem = BranchProblem::build(grid, c.gamma, c.delta, c.p, singular_config(c));
  const ContinuationOptions opts = continuation_options(c);

  double lambda = c.lambda;
  if (lambda == 0.0) {
    const LambdaBracket bracket = estimate_lambda_star(problem, c.tol_lambda, opts);
    note_bracket(s, bracket);
    if (!(bracket.lo > 0.0)) throw SolverFailure("no converged lambda to scale from");
    lambda = c.lambda_fraction * bracket.lo;
  }
  s.note("lambda", fmt(lambda));
  const BranchPoint first = solve_branch_point(problem, lambda, grid.zeros(), opts);
  if (!first.converged) throw SolverFailure("first solution failed at lambda = " + fmt(lambda) + " (" + first.failure + ")");

  const EnergyFunctional F = problem.at(lambda);
  const GrushinParams& params = problem.params;
  const bool critical = params.has_critical_exponent() && std::abs(c.p - critical_power(params)) < 1e-12;
  Field direction = first.solution;
  if (critical) {
    BubbleSpec b;
    b.epsilon = c.bubble_epsilon;
    b.center = plane_point(c.bubble_x, c.bubble_y);
    b.cutoff_radius = c.bubble_radius;
    direction = sample_bubble(grid, params, b);
  }
  MountainPassOptions mo;
  mo.max_sweeps = c.max_sweeps;
  const MountainPassResult mp = mountain_pass(F, first.solution, direction, c.nodes, mo);

  write_field_csv(s.path("u_first.csv"), grid, first.solution);
  s.add_csv("u_first.csv", Plot{"field", "", {}, false, false});
  write_path_csv(s.path("path.csv"), mp.trace);
  s.add_csv("path.csv", Plot{"series", "node", {"energy"}, false, false});
  if (!mp.u_second.values().empty()) {
    write_field_csv(s.path("u_second.csv"), grid, mp.u_second);
    s.add_csv("u_second.csv", Plot{"field", "", {}, false, false});
  }

  std::vector<CheckReport> reports;
  CheckReport rep;
  rep.check = "second_solution";
  rep.case_name = gamma_case(c.gamma) + " delta=" + fmt(c.delta) + " p=" + fmt(c.p) + " lambda=" + fmt(lambda);
  rep.message = mp.report;
  rep.metrics.push_back({"found", mp.found ? 1.0 : 0.0, 1.0, mp.found ? Verdict::Pass : Verdict::Fail});
  rep.metrics.push_back({"distance", mp.distance, 1e-3, mp.distance > 1e-3 ? Verdict::Pass : Verdict::Fail});
  rep.metrics.push_back(upper_bound("residual", mp.residual, 10.0 * mo.tol));
  rep.metrics.push_back(lower_bound("min_excess", mp.min_excess, -1e-10));
  rep.metrics.push_back({"level", mp.level, 0.0, Verdict::Pass});
  rep.metrics.push_back({"first_energy", mp.first_energy, 0.0, Verdict::Pass});
  if (critical) {
    const Grid2D sg = Grid2D::square(c.half_width, c.sobolev_n);
    const double S = sobolev_constant(sg, c.gamma, params, 1e-9);
    const double threshold = pass_threshold(S, lambda, params);
    rep.metrics.push_back({"sobolev_estimate", S, 0.0, Verdict::Pass});
    rep.metrics.push_back(upper_bound("level_gap", mp.level - mp.first_energy, threshold));
  }
  reports.push_back(finish(rep));
  s.write_summary(reports);
  if (!mp.found) throw SolverFailure("mountain pass: " + mp.report);
  return any_failed(reports) ? 1 : 0;
}

// ---------------------------------------------------------------- verify

struct PolarRow {
  double gamma, alpha;
  int resolution;
  PolarResult result;
};

int cmd_verify(Session& s) {
  const Config& c = s.cfg();
  const Grid2D grid = problem_grid(c);
  std::vector<std::function<void()>> tasks;

  // Maximum principle on the torsion function.
  std::vector<CheckReport> torsion(c.torsion_gammas.size());
  CheckReport mp_self, mp_zero;
  for (std::size_t i = 0; i < c.torsion_gammas.size(); ++i) {
    tasks.push_back([&, i]() {
      const double g = c.torsion_gammas[i];
      const OperatorMatrix A(grid, g);
      torsion[i] = max_principle_check(A, solve_torsion(A, 1e-12), 1e-8);
      torsion[i].case_name = "torsion " + gamma_case(g);
    });
  }
  tasks.push_back([&]() {
    const OperatorMatrix A(grid, 1.0);
    mp_zero = max_principle_check(A, grid.zeros(), 1e-8);
    mp_zero.case_name = "zero field";
    Field u = solve_torsion(A, 1e-12);
    const std::size_t mid = grid.index(grid.nx() / 2, grid.ny() / 2);
    u[mid] = -0.1 * sup_norm(u.span());
    const CheckReport r = max_principle_check(A, u, 1e-8, {mid});
    mp_self = self_test("max_principle", "negative node self-test", r.verdict == Verdict::Fail);
  });

  // Comparison of the two ladders, G properties and the energy gradient.
  CheckReport cmp, cmp_self, props, grad;
  tasks.push_back([&]() {
    const OperatorMatrix A(grid, c.gamma);
    const SingularConfig sc = singular_config(c);
    const SingularSolution lo = solve_purely_singular(A, sc, LadderStart::Lower);
    const SingularSolution up = solve_purely_singular(A, sc, LadderStart::Upper);
    const double tol = 10.0 * c.outer_tol;
    const std::string name = gamma_case(c.gamma) + " delta=" + fmt(c.delta);
    cmp = comparison_check(lo.u0, up.u0, tol);
    cmp.case_name = name + " lower vs upper ladder";
    Field shifted = lo.u0;
    for (auto& v : shifted) v += 2.0 * tol;
    cmp_self = self_test("comparison", "shifted-by-2tol self-test", comparison_check(lo.u0, shifted, tol).failed());

    auto op = std::make_shared<const OperatorMatrix>(grid, c.gamma);
    auto nl = std::make_shared<const ShiftedNonlinearity>(lo.u0, c.delta);
    props = nonlinearity_property_check(*nl, c.property_nodes, c.seed);
    props.case_name = name;
    EnergyFunctional F{op, nl, 1.0, c.p, GrushinParams(c.gamma)};
    grad = gradient_consistency_check(F, 3, 5, c.seed + 1);
    grad.case_name = name + " p=" + fmt(c.p);
  });

  // Polar coordinates identity.
  std::vector<PolarRow> polar;
  for (double g : c.polar_gammas) {
    for (double a : c.polar_alphas) {
      for (int res : c.polar_resolutions) polar.push_back({g, a, res, {}});
      if (std::find(c.polar_resolutions.begin(), c.polar_resolutions.end(), c.polar_check_resolution) ==
          c.polar_resolutions.end()) {
        polar.push_back({g, a, c.polar_check_resolution, {}});
      }
    }
  }
  for (std::size_t i = 0; i < polar.size(); ++i) {
    tasks.push_back([&, i]() {
      PolarRow& row = polar[i];
      row.result = polar_identity_check(GrushinParams(row.gamma), row.alpha, 0.0, 1.0, row.resolution);
    });
  }

  // Blow-up scalings for gamma = 1 (q = 4) and gamma = 2 (q = 3).
  std::vector<double> eps;
  for (int k = 0; k < c.blowup_points; ++k) {
    eps.push_back(c.blowup_eps_max * std::pow(c.blowup_eps_min / c.blowup_eps_max, double(k) / (c.blowup_points - 1)));
  }
  struct BlowupCase {
    double gamma, q;
    BlowupReport report;
  };
  std::vector<BlowupCase> blowups{{1.0, 4.0, {}}, {2.0, 3.0, {}}};
  for (std::size_t i = 0; i < blowups.size(); ++i) {
    tasks.push_back([&, i]() {
      BubbleSpec b;
      b.center = plane_point(c.bubble_x, c.bubble_y);
      b.cutoff_radius = c.bubble_radius;
      BlowupOptions o;
      o.q = blowups[i].q;
      blowups[i].report = blowup_scaling_check(GrushinParams(blowups[i].gamma), b, eps, o);
    });
  }

  // Elementary inequality.
  std::vector<InequalityResult> ineq(c.inequality_powers.size());
  InequalityResult printed;
  for (std::size_t i = 0; i < ineq.size(); ++i) {
    tasks.push_back(
        [&, i]() { ineq[i] = elementary_inequality_check(c.inequality_powers[i], c.inequality_samples, c.seed + 2); });
  }
  tasks.push_back([&]() {
    printed = elementary_inequality_check(3.0, c.inequality_samples, c.seed + 2, InequalitySign::Printed);
  });

  run_tasks(tasks, c.jobs);

  std::vector<CheckReport> reports;
  for (auto& r : torsion) reports.push_back(r);
  reports.push_back(mp_zero);
  reports.push_back(mp_self);
  reports.push_back(cmp);
  reports.push_back(cmp_self);

  {
    CsvWriter csv(s.path("polar.csv"), {"gamma", "alpha", "resolution", "lhs", "rhs", "relative_error"});
    for (const auto& row : polar) {
      csv.cell(row.gamma).cell(row.alpha).cell(row.resolution).cell(row.result.lhs).cell(row.result.rhs);
      csv.cell(row.result.relative_error).end_row();
    }
  }
  s.add_csv("polar.csv", Plot{"series", "resolution", {"relative_error"}, true, true});
  for (double g : c.polar_gammas) {
    for (double a : c.polar_alphas) {
      CheckReport rep;
      rep.check = "polar_identity";
      rep.case_name = gamma_case(g) + " alpha=" + fmt(a);
      std::vector<double> res, err;
      double err_check = 0.0, lhs_check = 0.0;
      for (const auto& row : polar) {
        if (row.gamma != g || row.alpha != a) continue;
        if (row.resolution == c.polar_check_resolution) {
          err_check = row.result.relative_error;
          lhs_check = row.result.lhs;
        }
        if (std::find(c.polar_resolutions.begin(), c.polar_resolutions.end(), row.resolution) !=
            c.polar_resolutions.end()) {
          res.push_back(row.resolution);
          err.push_back(std::max(row.result.relative_error, 1e-300));
        }
      }
      rep.metrics.push_back(upper_bound("relative_error_at_" + std::to_string(c.polar_check_resolution), err_check, 0.01));
      rep.metrics.push_back(lower_bound("fitted_order", -loglog_slope(res, err), 0.9));
      reports.push_back(finish(rep));

      if (g == c.polar_gammas.front() && a == c.polar_alphas.front()) {
        // Dropping the factor Q from the closed form must be caught.
        const double Q = GrushinParams(g).Q();
        const double wrong = gauge_ball_volume(g) / (Q + a);
        reports.push_back(self_test("polar_identity", "missing-Q self-test",
                                    std::abs(lhs_check - wrong) / wrong > 0.01));
      }
    }
  }

  {
    CsvWriter csv(s.path("blowup.csv"), {"gamma", "q", "eps", "dirichlet", "critical_norm", "l2", "lq"});
    for (const auto& b : blowups) {
      for (std::size_t k = 0; k < eps.size(); ++k) {
        csv.cell(b.gamma).cell(b.q).cell(eps[k]);
        csv.cell(b.report.dirichlet.empty() ? std::nan("") : b.report.dirichlet[k]);
        csv.cell(b.report.critical_norm[k]).cell(b.report.l2[k]).cell(b.report.lq[k]).end_row();
      }
    }
  }
  s.add_csv("blowup.csv", Plot{"series", "eps", {"l2", "lq"}, true, true});
  for (const auto& b : blowups) {
    for (const auto& item : b.report.items) {
      CheckReport rep;
      rep.check = "blowup_scaling";
      rep.case_name = gamma_case(b.gamma) + " q=" + fmt(b.q) + " " + item.name;
      rep.metrics.push_back({"fitted_exponent", item.fitted, item.predicted, item.verdict});
      rep.message = item.note;
      reports.push_back(finish(rep));
    }
    const BlowupItem& crit = b.report.items[1];
    const double wrong = crit.predicted - 1.0;
    reports.push_back(self_test("blowup_scaling", gamma_case(b.gamma) + " shifted-exponent self-test",
                                std::abs(crit.fitted - wrong) > 0.15 * std::abs(wrong)));
  }

  for (std::size_t i = 0; i < ineq.size(); ++i) {
    CheckReport rep;
    rep.check = "elementary_inequality";
    rep.case_name = "p=" + fmt(ineq[i].p);
    if (ineq[i].p >= 2.0) {
      rep.metrics.push_back(upper_bound("violations", static_cast<double>(ineq[i].violations), 0.0));
      rep.metrics.push_back({"max_ratio", ineq[i].max_ratio, 1.0, Verdict::Pass});
    } else {
      rep.metrics.push_back({"C_p_estimate", ineq[i].max_ratio, 0.0, Verdict::Pass});
      rep.metrics.push_back({"C_p_doubled", ineq[i].max_ratio_doubled, 1.1 * ineq[i].max_ratio, ineq[i].verdict});
    }
    reports.push_back(finish(rep));
  }
  reports.push_back(self_test("elementary_inequality", "printed-sign self-test p=3", printed.verdict == Verdict::Fail));

  reports.push_back(props);
  reports.push_back(grad);
  s.write_summary(reports);
  return any_failed(reports) ? 1 : 0;
}

}  // namespace

int run(const RunOptions& options, std::ostream& out, std::ostream& err) {
  static const std::map<std::string, int (*)(Session&)> commands{
      {"torsion", cmd_torsion}, {"singular", cmd_singular}, {"branch", cmd_branch},
      {"second", cmd_second},   {"verify", cmd_verify}};
  auto it = commands.find(options.subcommand);
  if (it == commands.end()) {
    err << "unknown subcommand '" << options.subcommand << "'\n";
    return 2;
  }

  ConfigFile file;
  Config cfg;
  try {
    file = options.config_path ? ConfigFile::load(*options.config_path)
                               : ConfigFile::parse(default_config_text(), "builtin");
    cfg = Config::from_file(file);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  }
  if (options.jobs) {
    if (*options.jobs < 1) {
      err << "config error: --jobs must be >= 1\n";
      return 2;
    }
    cfg.jobs = *options.jobs;
  }
  if (options.seed) cfg.seed = *options.seed;

  const auto t0 = std::chrono::steady_clock::now();
  int code = 0;
  std::unique_ptr<Session> session;
  try {
    session = std::make_unique<Session>(options, cfg, file, out);
    code = it->second(*session);
  } catch (const SolverFailure& e) {
    err << "solver failure: " << e.what() << '\n';
    code = 1;
  } catch (const ConvergenceError& e) {
    err << "solver failure: " << e.what() << " (residual " << e.residual() << ")\n";
    code = 1;
  } catch (const InvalidParameter& e) {
    err << "config error: " << e.what() << '\n';
    code = 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    code = 1;
  }
  if (session) {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    session->write_manifest(code, secs);
  }
  return code;
}

}  // namespace grushin::cli
