#pragma once

// Experiment configuration: INI-style sections of `key = value` lines.
// Comments start with '#' or ';' as the first non-blank character (a ';'
// later on the line belongs to the value, as in pattern literals). Every
// pattern is one `pattern = ...` line in [patterns]. Errors carry the line
// number and the section.key of the offending field.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "voterdyn/dynamics.hpp"
#include "voterdyn/errors.hpp"
#include "voterdyn/patterns.hpp"
#include "voterdyn/records.hpp"

namespace voterdyn {

/// The "k SE" rules and sample sizes used by the acceptance checks.
struct AcceptanceThresholds {
  double k_se = 3.0;
  double qq_min = 0.99;
  std::size_t min_replications = 200;      ///< refusal threshold for fclt-check
  std::size_t target_replications = 100000;  ///< per estimate_C run
  std::size_t bootstrap_draws = 500;
  std::size_t tightness_triples = 10;
  std::vector<double> weights;  ///< Wick weight vector; empty means all ones

  bool operator==(const AcceptanceThresholds&) const = default;
};

struct ExperimentConfig {
  ModelKind model = ModelKind::one_way;
  std::uint64_t seed = 1;
  std::size_t workers = 0;  ///< 0: $VOTERDYN_WORKERS or hardware
  std::size_t replications = 1000;
  std::string out = "out";
  std::vector<double> times{1.0};

  std::size_t n = 50;
  double p0 = 0.1;
  double gamma_mp = 0.33;
  double gamma_pm = 0.33;
  double pi_plus = 0.8;
  double pi_minus = 0.2;
  double q0 = 0.5;
  double beta = 0.66;
  double horizon = 1.0;
  double y0 = 0.0;

  std::vector<std::string> patterns;  ///< canonical literals

  std::vector<std::size_t> table_n{100, 200};
  int table_z = 3;

  double graphon_t = 1.0;
  std::size_t graphon_grid = 10;
  std::size_t graphon_min_count = 100;

  AcceptanceThresholds acceptance;

  bool operator==(const ExperimentConfig&) const = default;

  OneWayParams one_way() const {
    OneWayParams p;
    p.n = n;
    p.p0 = p0;
    p.gamma_mp = gamma_mp;
    p.gamma_pm = gamma_pm;
    p.pi_plus = pi_plus;
    p.pi_minus = pi_minus;
    p.q0 = q0;
    p.horizon = horizon;
    p.y0 = y0;
    return p;
  }
  TwoWayParams two_way() const {
    TwoWayParams p;
    p.n = n;
    p.p0 = p0;
    p.pi_plus = pi_plus;
    p.pi_minus = pi_minus;
    p.q0 = q0;
    p.beta = beta;
    p.horizon = horizon;
    return p;
  }
  std::vector<VoterPattern> parsed_patterns() const {
    std::vector<VoterPattern> out;
    for (const auto& s : patterns) out.push_back(parse_pattern(s));
    return out;
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, ',')) out.push_back(trim(item));
  if (out.size() == 1 && out.front().empty()) out.clear();
  return out;
}

class ConfigReader {
 public:
  ConfigReader(std::string field, std::string value, int line)
      : field_(std::move(field)), value_(std::move(value)), line_(line) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("field '" + field_ + "': " + what + ", got '" + value_ + "'", line_);
  }

  double real(const std::string& text) const {
    double x = 0.0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, x);
    if (ec != std::errc() || ptr != end || text.empty()) fail("expected a number");
    return x;
  }
  double real() const { return real(value_); }

  std::uint64_t count(const std::string& text) const {
    std::uint64_t x = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, x);
    if (ec != std::errc() || ptr != end || text.empty()) fail("expected a non-negative integer");
    return x;
  }
  std::uint64_t count() const { return count(value_); }

  std::vector<double> reals() const {
    std::vector<double> out;
    for (const auto& s : split_list(value_)) out.push_back(real(s));
    return out;
  }
  std::vector<std::size_t> counts() const {
    std::vector<std::size_t> out;
    for (const auto& s : split_list(value_)) out.push_back(count(s));
    return out;
  }
  const std::string& text() const { return value_; }

 private:
  std::string field_;
  std::string value_;
  int line_;
};

template <class T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ", ";
    if constexpr (std::is_floating_point_v<T>)
      out += format_double(xs[i]);
    else
      out += std::to_string(xs[i]);
  }
  return out;
}

}  // namespace detail

/// Checks cross-field invariants; `lines` maps field names to source lines.
inline void validate(const ExperimentConfig& c, const std::map<std::string, int>& lines = {}) {
  auto fail = [&](const std::string& field, const std::string& what) {
    const auto it = lines.find(field);
    throw ConfigError("field '" + field + "': " + what, it == lines.end() ? 0 : it->second);
  };
  try {
    if (c.model == ModelKind::one_way)
      c.one_way().validate();
    else
      c.two_way().validate();
  } catch (const RangeError& e) {
    fail("model", e.what());
  }
  if (c.replications < 1) fail("run.replications", "at least 1 replication is required");
  if (c.times.empty()) fail("run.times", "at least one checkpoint time is required");
  if (!std::is_sorted(c.times.begin(), c.times.end())) fail("run.times", "times must be sorted");
  if (c.times.front() < 0.0 || c.times.back() > c.horizon)
    fail("run.times", "times must lie in [0, horizon=" + format_double(c.horizon) + "]");
  for (const auto& s : c.patterns) {
    const auto h = parse_pattern(s);
    if (h.vertex_count() > kMaxSearchVertices)
      fail("patterns.pattern", "pattern '" + s + "' has more than " + std::to_string(kMaxSearchVertices) + " vertices");
  }
  if (c.table_z < 2) fail("two_way_table.z", "z must be at least 2");
  for (auto nn : c.table_n)
    for (const auto& s : c.patterns) {
      const auto v = parse_pattern(s).vertex_count();
      if (c.model == ModelKind::two_way && nn < static_cast<std::size_t>(c.table_z) * v)
        fail("two_way_table.n_values", "n=" + std::to_string(nn) + " is smaller than z*V(H)=" +
                                           std::to_string(c.table_z * v) + " for pattern '" + s + "'");
    }
  if (!(c.graphon_t > 0.0)) fail("graphon.t", "t must be positive");
  if (c.graphon_grid < 1) fail("graphon.grid", "grid must be at least 1");
  if (!(c.acceptance.k_se > 0.0)) fail("acceptance.k_se", "must be positive");
  if (c.acceptance.target_replications < 2) fail("acceptance.target_replications", "must be at least 2");
}

inline ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  c.patterns.clear();
  std::map<std::string, int> lines;
  std::string section;
  std::istringstream is(text);
  std::string raw;
  int line = 0;
  bool saw_patterns = false;
  while (std::getline(is, raw)) {
    ++line;
    const std::string s = detail::trim(raw);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s[0] == '[') {
      if (s.back() != ']') throw ConfigError("unterminated section header '" + s + "'", line);
      section = detail::trim(std::string_view(s).substr(1, s.size() - 2));
      static const std::vector<std::string> known{"run", "model", "patterns", "two_way_table", "graphon", "acceptance"};
      if (std::find(known.begin(), known.end(), section) == known.end())
        throw ConfigError("unknown section [" + section + "]", line);
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value', got '" + s + "'", line);
    if (section.empty()) throw ConfigError("key outside of any section", line);
    const std::string key = detail::trim(std::string_view(s).substr(0, eq));
    const std::string value = detail::trim(std::string_view(s).substr(eq + 1));
    const std::string field = section + "." + key;
    if (field != "patterns.pattern" && !lines.emplace(field, line).second)
      throw ConfigError("field '" + field + "' is set twice (first on line " + std::to_string(lines[field]) + ")", line);
    const detail::ConfigReader r(field, value, line);

    if (field == "run.model") {
      if (value == "one_way")
        c.model = ModelKind::one_way;
      else if (value == "two_way")
        c.model = ModelKind::two_way;
      else
        r.fail("expected one_way or two_way");
    } else if (field == "run.seed") {
      c.seed = r.count();
    } else if (field == "run.workers") {
      c.workers = r.count();
    } else if (field == "run.replications") {
      c.replications = r.count();
    } else if (field == "run.out") {
      if (value.empty()) r.fail("expected a directory");
      c.out = value;
    } else if (field == "run.times") {
      c.times = r.reals();
    } else if (field == "model.n") {
      c.n = r.count();
    } else if (field == "model.p0") {
      c.p0 = r.real();
    } else if (field == "model.gamma_mp") {
      c.gamma_mp = r.real();
    } else if (field == "model.gamma_pm") {
      c.gamma_pm = r.real();
    } else if (field == "model.pi_plus") {
      c.pi_plus = r.real();
    } else if (field == "model.pi_minus") {
      c.pi_minus = r.real();
    } else if (field == "model.q0") {
      c.q0 = r.real();
    } else if (field == "model.beta") {
      c.beta = r.real();
    } else if (field == "model.horizon") {
      c.horizon = r.real();
    } else if (field == "model.y0") {
      c.y0 = r.real();
    } else if (field == "patterns.pattern") {
      try {
        c.patterns.push_back(to_literal(parse_pattern(value)));
      } catch (const PatternError& e) {
        r.fail(e.what());
      }
      saw_patterns = true;
      lines.emplace(field, line);
    } else if (field == "two_way_table.n_values") {
      c.table_n = r.counts();
    } else if (field == "two_way_table.z") {
      c.table_z = static_cast<int>(r.count());
    } else if (field == "graphon.t") {
      c.graphon_t = r.real();
    } else if (field == "graphon.grid") {
      c.graphon_grid = r.count();
    } else if (field == "graphon.min_count") {
      c.graphon_min_count = r.count();
    } else if (field == "acceptance.k_se") {
      c.acceptance.k_se = r.real();
    } else if (field == "acceptance.qq_min") {
      c.acceptance.qq_min = r.real();
    } else if (field == "acceptance.min_replications") {
      c.acceptance.min_replications = r.count();
    } else if (field == "acceptance.target_replications") {
      c.acceptance.target_replications = r.count();
    } else if (field == "acceptance.bootstrap_draws") {
      c.acceptance.bootstrap_draws = r.count();
    } else if (field == "acceptance.tightness_triples") {
      c.acceptance.tightness_triples = r.count();
    } else if (field == "acceptance.weights") {
      c.acceptance.weights = r.reals();
    } else {
      throw ConfigError("unknown field '" + field + "'", line);
    }
  }
  if (!saw_patterns) c.patterns.push_back(to_literal(edge_pattern(Opinion::plus, Opinion::plus)));
  validate(c, lines);
  return c;
}

inline std::string serialize_config(const ExperimentConfig& c) {
  using detail::join;
  std::ostringstream os;
  os << "[run]\n"
     << "model = " << (c.model == ModelKind::one_way ? "one_way" : "two_way") << "\n"
     << "seed = " << c.seed << "\n"
     << "workers = " << c.workers << "\n"
     << "replications = " << c.replications << "\n"
     << "out = " << c.out << "\n"
     << "times = " << join(c.times) << "\n\n"
     << "[model]\n"
     << "n = " << c.n << "\n"
     << "p0 = " << format_double(c.p0) << "\n"
     << "gamma_mp = " << format_double(c.gamma_mp) << "\n"
     << "gamma_pm = " << format_double(c.gamma_pm) << "\n"
     << "pi_plus = " << format_double(c.pi_plus) << "\n"
     << "pi_minus = " << format_double(c.pi_minus) << "\n"
     << "q0 = " << format_double(c.q0) << "\n"
     << "beta = " << format_double(c.beta) << "\n"
     << "horizon = " << format_double(c.horizon) << "\n"
     << "y0 = " << format_double(c.y0) << "\n\n"
     << "[patterns]\n";
  for (const auto& p : c.patterns) os << "pattern = " << p << "\n";
  os << "\n[two_way_table]\n"
     << "n_values = " << join(c.table_n) << "\n"
     << "z = " << c.table_z << "\n\n"
     << "[graphon]\n"
     << "t = " << format_double(c.graphon_t) << "\n"
     << "grid = " << c.graphon_grid << "\n"
     << "min_count = " << c.graphon_min_count << "\n\n"
     << "[acceptance]\n"
     << "k_se = " << format_double(c.acceptance.k_se) << "\n"
     << "qq_min = " << format_double(c.acceptance.qq_min) << "\n"
     << "min_replications = " << c.acceptance.min_replications << "\n"
     << "target_replications = " << c.acceptance.target_replications << "\n"
     << "bootstrap_draws = " << c.acceptance.bootstrap_draws << "\n"
     << "tightness_triples = " << c.acceptance.tightness_triples << "\n"
     << "weights = " << join(c.acceptance.weights) << "\n";
  return os.str();
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace voterdyn
