#pragma once

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "zenmet/csv.hpp"
#include "zenmet/experiments.hpp"

namespace zenmet::cli {

/// Configuration mistakes (unknown key, bad number, invariant violation).
/// The process maps these to exit code 2; anything else that escapes a run
/// is a numerical/runtime failure and maps to 3.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Fully resolved run parameters.  omega0 is pinned to 1 and defines every
/// unit: gamma, eta-weighted rates and omega_c are in units of omega0, times
/// in 1/omega0.  "auto" values (beta, h) are resolved during parsing, so two
/// equal RunConfigs describe byte-identical runs.
struct RunConfig {
  double gamma = M_PI;
  double eta = 0.02;
  double omega_c = 300.0;
  double s = 1.0;
  double N = 100.0;
  bool beta_auto = true;  // auto: (2 sqrt(N))^-1, re-resolved per sweep row
  double beta = -1.0;
  double phi_coh = 0.0;
  double phi_sq = 0.0;
  bool h_auto = true;  // auto: min(0.02, 0.2/omega_c), re-resolved per sweep row
  double h = -1.0;
  double t_max = 100.0;
  std::string out = "zenmet_out.csv";
  int digits = 17;
  unsigned threads = 0;
  std::string axis = "omega_c";
  std::vector<double> axis_values;
  std::string target;

  bool operator==(const RunConfig&) const = default;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_number(const std::string& text) {
  std::string t = trim(text);
  if (t.empty()) return std::nullopt;
  const char* first = t.c_str();
  if (*first == '+') ++first;
  double v = 0.0;
  const auto res = std::from_chars(first, t.c_str() + t.size(), v);
  if (res.ec != std::errc{} || res.ptr != t.c_str() + t.size()) return std::nullopt;
  return v;
}

inline std::optional<long> parse_integer(const std::string& text) {
  std::string t = trim(text);
  if (t.empty()) return std::nullopt;
  long v = 0;
  const auto res = std::from_chars(t.c_str(), t.c_str() + t.size(), v);
  if (res.ec != std::errc{} || res.ptr != t.c_str() + t.size()) return std::nullopt;
  return v;
}

struct Assignment {
  std::string key;
  std::string value;
  std::string where;  // "" for flags, "line N" for file entries
};

inline std::string context(const Assignment& a) {
  return a.where.empty() ? "key " + a.key : "key " + a.key + " (" + a.where + ")";
}

inline double require_number(const Assignment& a) {
  const auto v = parse_number(a.value);
  if (!v) throw ConfigError(context(a) + ": unparsable number '" + a.value + "'");
  return *v;
}

inline void apply(RunConfig& cfg, const Assignment& a) {
  const std::string& k = a.key;
  if (k == "gamma") {
    cfg.gamma = require_number(a);
    if (!(1.0 + cfg.gamma > 0.0))
      throw ConfigError(context(a) + ": omega0 + gamma must stay positive");
  } else if (k == "eta") {
    cfg.eta = require_number(a);
    if (!(cfg.eta >= 0.0)) throw ConfigError(context(a) + ": eta must be >= 0");
  } else if (k == "omega_c") {
    cfg.omega_c = require_number(a);
    if (!(cfg.omega_c > 0.0)) throw ConfigError(context(a) + ": omega_c must be > 0");
  } else if (k == "s") {
    cfg.s = require_number(a);
    if (!(cfg.s > 0.0)) throw ConfigError(context(a) + ": s must be > 0");
  } else if (k == "N") {
    cfg.N = require_number(a);
    if (!(cfg.N > 0.0)) throw ConfigError(context(a) + ": N must be > 0");
  } else if (k == "beta") {
    if (trim(a.value) == "auto") {
      cfg.beta_auto = true;
      cfg.beta = -1.0;
    } else {
      cfg.beta = require_number(a);
      cfg.beta_auto = false;
      if (!(cfg.beta >= 0.0 && cfg.beta < 0.5))
        throw ConfigError(context(a) +
                          ": beta must lie in [0, 0.5); beta = 1/2 makes the mean signal "
                          "gamma-independent");
    }
  } else if (k == "phi_coh") {
    cfg.phi_coh = require_number(a);
  } else if (k == "phi_sq") {
    cfg.phi_sq = require_number(a);
  } else if (k == "h") {
    if (trim(a.value) == "auto") {
      cfg.h_auto = true;
      cfg.h = -1.0;
    } else {
      cfg.h = require_number(a);
      cfg.h_auto = false;
      if (!(cfg.h > 0.0)) throw ConfigError(context(a) + ": h must be > 0");
    }
  } else if (k == "t_max") {
    cfg.t_max = require_number(a);
    if (!(cfg.t_max > 0.0)) throw ConfigError(context(a) + ": t_max must be > 0");
  } else if (k == "out") {
    cfg.out = trim(a.value);
    if (cfg.out.empty()) throw ConfigError(context(a) + ": out must not be empty");
  } else if (k == "digits") {
    const auto v = parse_integer(a.value);
    if (!v || *v < 6 || *v > 17)
      throw ConfigError(context(a) + ": digits must be an integer in [6, 17]");
    cfg.digits = static_cast<int>(*v);
  } else if (k == "threads") {
    const auto v = parse_integer(a.value);
    if (!v || *v < 0) throw ConfigError(context(a) + ": threads must be >= 0");
    cfg.threads = static_cast<unsigned>(*v);
  } else if (k == "axis") {
    cfg.axis = trim(a.value);
    if (cfg.axis != "omega_c" && cfg.axis != "eta" && cfg.axis != "N" && cfg.axis != "t")
      throw ConfigError(context(a) + ": axis must be one of omega_c, eta, N, t");
  } else if (k == "values") {
    cfg.axis_values.clear();
    std::stringstream ss(a.value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto v = parse_number(item);
      if (!v) throw ConfigError(context(a) + ": unparsable number '" + trim(item) + "'");
      cfg.axis_values.push_back(*v);
    }
    if (cfg.axis_values.empty()) throw ConfigError(context(a) + ": empty value list");
    for (std::size_t i = 1; i < cfg.axis_values.size(); ++i)
      if (!(cfg.axis_values[i] > cfg.axis_values[i - 1]))
        throw ConfigError(context(a) + ": values must be strictly increasing");
  } else if (k == "target") {
    cfg.target = trim(a.value);
    if (cfg.target != "fig1b" && cfg.target != "fig2" && cfg.target != "fig3")
      throw ConfigError(context(a) + ": target must be one of fig1b, fig2, fig3");
  } else {
    throw ConfigError("unknown " + context(a));
  }
}

inline std::vector<Assignment> parse_file_text(const std::string& text) {
  std::vector<Assignment> out;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config file line " + std::to_string(line_no) +
                        ": expected 'key = value'");
    out.push_back({trim(line.substr(0, eq)), trim(line.substr(eq + 1)),
                   "line " + std::to_string(line_no)});
  }
  return out;
}

}  // namespace detail

/// Flags (`--key value`) override config-file entries, which override
/// defaults; ZM_THREADS overrides the threads key.  Unknown keys, unparsable
/// numbers and invariant violations raise ConfigError with the offending key
/// (and file line).  beta/h "auto" resolve to (2 sqrt(N))^-1 and
/// min(0.02, 0.2/omega_c).
inline RunConfig parse_config(const std::vector<std::string>& args,
                              const std::string* file_text = nullptr) {
  RunConfig cfg;

  // Pull --config out of the flag stream first; its entries apply below the
  // remaining flags.
  std::vector<detail::Assignment> flag_assignments;
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& tok = args[i];
    if (tok.rfind("--", 0) != 0)
      throw ConfigError("expected --key, got '" + tok + "'");
    std::string key = tok.substr(2);
    for (auto& ch : key)
      if (ch == '-') ch = '_';
    if (i + 1 >= args.size()) throw ConfigError("key " + key + ": missing value");
    const std::string& value = args[++i];
    if (key == "config") {
      config_path = value;
      continue;
    }
    flag_assignments.push_back({key, value, ""});
  }

  std::string file_content;
  if (file_text) file_content = *file_text;
  if (!config_path.empty()) {
    std::ifstream is(config_path);
    if (!is) throw ConfigError("cannot read config file '" + config_path + "'");
    std::stringstream buffer;
    buffer << is.rdbuf();
    file_content += buffer.str();
  }
  for (const auto& a : detail::parse_file_text(file_content)) detail::apply(cfg, a);
  for (const auto& a : flag_assignments) detail::apply(cfg, a);

  if (const char* env = std::getenv("ZM_THREADS")) {
    const auto v = detail::parse_integer(env);
    if (!v || *v < 0) throw ConfigError("ZM_THREADS must be a nonnegative integer");
    cfg.threads = static_cast<unsigned>(*v);
  }

  // Resolve the auto values and run the cross-field invariants once.
  if (cfg.beta_auto) {
    if (!(cfg.N > 1.0))
      throw ConfigError("key beta: beta = auto needs N > 1 so that (2 sqrt(N))^-1 < 1/2");
    cfg.beta = optimal_beta(cfg.N);
  }
  if (cfg.h_auto) cfg.h = std::min(0.02, 0.2 / cfg.omega_c);
  if (cfg.threads == 0) {
    cfg.threads = std::max(1u, std::thread::hardware_concurrency());
  }
  try {
    const ProbeSpec probe(1.0, cfg.gamma);
    const NoiseSpec noise(cfg.eta, cfg.omega_c, cfg.s);
    const InputState state(cfg.N, cfg.beta, cfg.phi_coh, cfg.phi_sq);
    (void)probe;
    (void)noise;
    (void)state;
  } catch (const std::domain_error& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
  return cfg;
}

namespace detail {

inline std::string join_values(const std::vector<double>& values, int digits) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += csv::format_double(values[i], digits);
  }
  return out;
}

inline std::vector<std::pair<std::string, std::string>> echo_pairs(const RunConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> echo;
  const int d = 17;  // the echo must round-trip exactly
  echo.emplace_back("gamma", csv::format_double(cfg.gamma, d));
  echo.emplace_back("eta", csv::format_double(cfg.eta, d));
  echo.emplace_back("omega_c", csv::format_double(cfg.omega_c, d));
  echo.emplace_back("s", csv::format_double(cfg.s, d));
  echo.emplace_back("N", csv::format_double(cfg.N, d));
  echo.emplace_back("beta", cfg.beta_auto ? "auto" : csv::format_double(cfg.beta, d));
  echo.emplace_back("phi_coh", csv::format_double(cfg.phi_coh, d));
  echo.emplace_back("phi_sq", csv::format_double(cfg.phi_sq, d));
  echo.emplace_back("h", cfg.h_auto ? "auto" : csv::format_double(cfg.h, d));
  echo.emplace_back("t_max", csv::format_double(cfg.t_max, d));
  echo.emplace_back("out", cfg.out);
  echo.emplace_back("digits", std::to_string(cfg.digits));
  echo.emplace_back("threads", std::to_string(cfg.threads));
  echo.emplace_back("axis", cfg.axis);
  if (!cfg.axis_values.empty()) echo.emplace_back("values", join_values(cfg.axis_values, d));
  if (!cfg.target.empty()) echo.emplace_back("target", cfg.target);
  return echo;
}

inline ReproduceSettings reproduce_settings(const RunConfig& cfg) {
  ReproduceSettings rs;
  rs.probe = ProbeSpec(1.0, cfg.gamma);
  rs.noise = NoiseSpec(cfg.eta, cfg.omega_c, cfg.s);
  rs.N = cfg.N;
  rs.beta = cfg.beta_auto ? -1.0 : cfg.beta;
  rs.phi_coh = cfg.phi_coh;
  rs.phi_sq = cfg.phi_sq;
  rs.h = cfg.h_auto ? -1.0 : cfg.h;
  rs.t_max = cfg.t_max;
  rs.threads = cfg.threads;
  return rs;
}

}  // namespace detail

/// Runs one subcommand and writes its CSV atomically to cfg.out.  Throws
/// ConfigError for configuration problems, other exceptions for numerical
/// failures; on any throw the output path is left untouched.
inline void run_subcommand(const std::string& name, const RunConfig& cfg) {
  const ProbeSpec probe(1.0, cfg.gamma);
  const NoiseSpec noise(cfg.eta, cfg.omega_c, cfg.s);
  std::vector<csv::Table> tables;

  if (name == "spectrum") {
    const double y0 = y_function(probe, noise, 0.0);
    const auto bound = find_bound_state(probe, noise);
    csv::Table t;
    t.name = "spectrum";
    t.columns = {"exists", "varpi_b", "Z", "y0"};
    t.rows.push_back({csv::format_bool(bound_state_exists(probe, noise)),
                      csv::format_double(bound ? bound->varpi_b
                                               : std::numeric_limits<double>::quiet_NaN(),
                                         cfg.digits),
                      csv::format_double(bound ? bound->Z
                                               : std::numeric_limits<double>::quiet_NaN(),
                                         cfg.digits),
                      csv::format_double(y0, cfg.digits)});
    tables.push_back(std::move(t));
  } else if (name == "dynamics") {
    const Trajectory traj = solve_c(probe, noise, cfg.t_max, cfg.h);
    csv::Table t;
    t.name = "dynamics";
    t.columns = {"t", "re_c", "im_c", "abs_c"};
    t.rows.reserve(traj.times.size());
    for (std::size_t i = 0; i < traj.times.size(); ++i)
      t.rows.push_back({csv::format_double(traj.times[i], cfg.digits),
                        csv::format_double(traj.c[i].real(), cfg.digits),
                        csv::format_double(traj.c[i].imag(), cfg.digits),
                        csv::format_double(std::abs(traj.c[i]), cfg.digits)});
    tables.push_back(std::move(t));
  } else if (name == "precision") {
    const Trajectory traj = solve_sensitivity(probe, noise, cfg.t_max, cfg.h);
    const InputState state(cfg.N, cfg.beta, cfg.phi_coh, cfg.phi_sq);
    PrecisionSeries series = delta_gamma_series(state, traj);
    annotate_local_minima(series);
    csv::Table t;
    t.name = "precision";
    t.columns = {"t", "mean_M", "delta_M", "delta_gamma"};
    t.rows.reserve(series.times.size());
    for (std::size_t i = 0; i < series.times.size(); ++i)
      t.rows.push_back({csv::format_double(series.times[i], cfg.digits),
                        csv::format_double(series.mean_M[i], cfg.digits),
                        csv::format_double(series.delta_M[i], cfg.digits),
                        csv::format_double(series.delta_gamma[i], cfg.digits)});
    tables.push_back(std::move(t));
    csv::Table footer;
    footer.name = "local_minima";
    footer.columns = {"t", "delta_gamma"};
    for (const auto& [tm, vm] : series.local_minima)
      footer.rows.push_back({csv::format_double(tm, cfg.digits),
                             csv::format_double(vm, cfg.digits)});
    tables.push_back(std::move(footer));
  } else if (name == "sweep") {
    if (cfg.axis_values.empty())
      throw ConfigError("sweep needs --values (comma-separated, strictly increasing)");
    SweepSettings sw;
    sw.axis = cfg.axis;
    sw.values = cfg.axis_values;
    sw.probe = probe;
    sw.noise = noise;
    sw.N = cfg.N;
    sw.beta = cfg.beta_auto ? -1.0 : cfg.beta;
    sw.phi_coh = cfg.phi_coh;
    sw.phi_sq = cfg.phi_sq;
    sw.h = cfg.h_auto ? -1.0 : cfg.h;
    sw.t_max = cfg.t_max;
    sw.with_precision = true;
    sw.threads = cfg.threads;
    csv::Table t = sweep_table(run_sweep(sw));
    t.columns[0] = cfg.axis;
    tables.push_back(std::move(t));
  } else if (name == "reproduce") {
    if (cfg.target.empty())
      throw ConfigError("reproduce needs a target: fig1b, fig2 or fig3");
    ReproduceSettings rs = detail::reproduce_settings(cfg);
    if (cfg.target == "fig1b") {
      rs.grid = cfg.axis_values;
      tables = reproduce_fig1b(rs);
    } else if (cfg.target == "fig2") {
      rs.omega_c_panels = cfg.axis_values;
      tables = reproduce_fig2(rs);
    } else {
      rs.grid = cfg.axis_values;
      tables = reproduce_fig3(rs);
    }
  } else {
    throw ConfigError("unknown subcommand '" + name + "'");
  }

  csv::write_atomic(cfg.out, "# zenmet subcommand: " + name + "\n" +
                                 csv::render(detail::echo_pairs(cfg), tables));
}

inline void print_usage(std::ostream& os) {
  os << "usage: zenmet <spectrum|dynamics|precision|sweep|reproduce [fig1b|fig2|fig3]> [--key value ...]\n"
        "keys: gamma eta omega-c s N beta phi-coh phi-sq h t-max out digits threads\n"
        "      axis values target config\n"
        "Defaults reproduce the bound-state working point (gamma=pi, eta=0.02,\n"
        "omega-c=300, s=1, N=100, beta=auto, h=auto, t-max=100).\n";
}

/// Process entry point used by the binary and the tests.  Exit codes:
/// 0 = complete CSV written, 2 = configuration error, 3 = numerical failure.
inline int main_impl(const std::vector<std::string>& args) {
  if (args.empty()) {
    print_usage(std::cerr);
    return 2;
  }
  if (args[0] == "--help" || args[0] == "-h" || args[0] == "help") {
    print_usage(std::cout);
    return 0;
  }
  const std::string name = args[0];
  std::vector<std::string> rest(args.begin() + 1, args.end());
  if (name == "reproduce" && !rest.empty() && rest[0].rfind("--", 0) != 0) {
    const std::string target = rest[0];
    rest.erase(rest.begin());
    rest.insert(rest.begin(), {"--target", target});
  }
  try {
    if (name != "spectrum" && name != "dynamics" && name != "precision" &&
        name != "sweep" && name != "reproduce")
      throw ConfigError("unknown subcommand '" + name + "'");
    const RunConfig cfg = parse_config(rest);
    run_subcommand(name, cfg);
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "zenmet: config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "zenmet: error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace zenmet::cli
