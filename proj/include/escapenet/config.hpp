#pragma once

// Declarative experiment configuration: a sectioned key/value file is parsed,
// validated against every model and simulation invariant, and echoed into
// provenance. Errors cite file and line.

#include "escapenet/model.hpp"
#include "escapenet/stochastic.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace escapenet {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  // [network]
  int n_units = 2;
  TopologyKind topology = TopologyKind::two_node_bidirectional;
  double nu = 0.01;
  std::vector<double> betas = {0.0};  // a single value unless is_sweep
  bool is_sweep = false;
  CouplingKind coupling_kind = CouplingKind::gaussian_pulse;
  double x_c = 0.5;
  double sigma = 0.1;

  // [simulation]
  SimConfig sim;

  // [analysis]
  double bin_width = 50.0;
  std::vector<std::pair<int, int>> stats_pairs = {{1, 0}, {2, 1}};
  bool classify = true;  // key accepts true/false/auto; auto = (n_units == 2)
  int sample_trajectories = 0;
  double trajectory_t_max = 1000.0;

  // [output]
  std::string out_dir = "out";
  bool write_csv = true;
  bool write_json = true;

  // provenance
  std::string source_name = "<defaults>";
  std::string source_text;

  CouplingSpec coupling() const {
    return coupling_kind == CouplingKind::diffusive
               ? CouplingSpec::diffusive()
               : CouplingSpec::gaussian_pulse(x_c, sigma);
  }

  NetworkSpec network(double beta) const {
    return NetworkSpec{n_units, standard_topology(topology, n_units), beta,
                       UnitParams{nu}, coupling()};
  }
};

namespace detail {

struct ConfigValue {
  std::string text;
  int line = 0;
  bool used = false;
};

using ConfigSection = std::map<std::string, ConfigValue>;

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] inline void config_fail(const std::string& name, int line,
                                     const std::string& message) {
  throw ConfigError(name + ":" + std::to_string(line) + ": " + message);
}

class ConfigReader {
 public:
  ConfigReader(const std::string& text, std::string name)
      : name_(std::move(name)) {
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line_no = 0;
    int section_line = 0;
    while (std::getline(in, raw)) {
      ++line_no;
      const std::string line = trim(raw);
      if (line.empty() || line[0] == '#' || line[0] == ';') continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          config_fail(name_, line_no, "unterminated section header");
        section = trim(line.substr(1, line.size() - 2));
        section_line = line_no;
        if (!sections_.count(section))
          config_fail(name_, line_no, "unknown section [" + section + "]");
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        config_fail(name_, line_no, "expected key = value");
      if (section.empty())
        config_fail(name_, line_no, "key outside of any [section]");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty()) config_fail(name_, line_no, "empty key");
      auto [it, inserted] =
          sections_[section].emplace(key, ConfigValue{value, line_no});
      if (!inserted)
        config_fail(name_, line_no,
                    "duplicate key '" + key + "' (first set on line " +
                        std::to_string(it->second.line) + ")");
    }
    (void)section_line;
  }

  const std::string& name() const { return name_; }

  // Looks a key up and marks it consumed.
  ConfigValue* find(const std::string& section, const std::string& key) {
    auto& sec = sections_.at(section);
    const auto it = sec.find(key);
    if (it == sec.end()) return nullptr;
    it->second.used = true;
    return &it->second;
  }

  // Every key must have been consumed by a typed getter.
  void reject_unknown_keys() const {
    for (const auto& [section, keys] : sections_)
      for (const auto& [key, value] : keys)
        if (!value.used)
          config_fail(name_, value.line,
                      "unknown key '" + key + "' in section [" + section + "]");
  }

 private:
  std::map<std::string, ConfigSection> sections_ = {
      {"network", {}}, {"simulation", {}}, {"analysis", {}}, {"output", {}}};
  std::string name_;
};

inline double parse_double(const ConfigReader& r, const ConfigValue& v) {
  double out = 0.0;
  const char* b = v.text.data();
  const char* e = b + v.text.size();
  const auto res = std::from_chars(b, e, out);
  if (res.ec != std::errc{} || res.ptr != e)
    config_fail(r.name(), v.line, "expected a number, got '" + v.text + "'");
  return out;
}

template <typename Int>
inline Int parse_int(const ConfigReader& r, const ConfigValue& v) {
  Int out = 0;
  const char* b = v.text.data();
  const char* e = b + v.text.size();
  const auto res = std::from_chars(b, e, out);
  if (res.ec != std::errc{} || res.ptr != e)
    config_fail(r.name(), v.line, "expected an integer, got '" + v.text + "'");
  return out;
}

inline bool parse_bool(const ConfigReader& r, const ConfigValue& v) {
  if (v.text == "true") return true;
  if (v.text == "false") return false;
  config_fail(r.name(), v.line, "expected true or false, got '" + v.text + "'");
}

inline std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) parts.push_back(trim(item));
  return parts;
}

}  // namespace detail

// Parses and validates a config given as text; `name` labels error locations.
inline ExperimentConfig parse_config_text(const std::string& text,
                                          const std::string& name) {
  using detail::config_fail;
  detail::ConfigReader reader(text, name);
  ExperimentConfig cfg;
  cfg.source_name = name;
  cfg.source_text = text;

  // --- [network] ---
  if (auto* v = reader.find("network", "n")) {
    cfg.n_units = detail::parse_int<int>(reader, *v);
    if (cfg.n_units < 1) config_fail(name, v->line, "n must be >= 1");
  }
  if (auto* v = reader.find("network", "topology")) {
    if (v->text == "two_node_bidirectional")
      cfg.topology = TopologyKind::two_node_bidirectional;
    else if (v->text == "chain_unidirectional")
      cfg.topology = TopologyKind::chain_unidirectional;
    else
      config_fail(name, v->line,
                  "unknown topology '" + v->text +
                      "' (expected two_node_bidirectional or "
                      "chain_unidirectional)");
  }
  if (auto* v = reader.find("network", "nu")) {
    cfg.nu = detail::parse_double(reader, *v);
    if (!(cfg.nu > 0.0 && cfg.nu < 1.0))
      config_fail(name, v->line, "nu must lie in (0, 1)");
  }
  if (auto* v = reader.find("network", "coupling")) {
    if (v->text == "gaussian_pulse")
      cfg.coupling_kind = CouplingKind::gaussian_pulse;
    else if (v->text == "diffusive")
      cfg.coupling_kind = CouplingKind::diffusive;
    else
      config_fail(name, v->line,
                  "unknown coupling '" + v->text +
                      "' (expected gaussian_pulse or diffusive)");
  }
  if (auto* v = reader.find("network", "x_c"))
    cfg.x_c = detail::parse_double(reader, *v);
  if (auto* v = reader.find("network", "sigma")) {
    cfg.sigma = detail::parse_double(reader, *v);
    if (!(cfg.sigma > 0.0)) config_fail(name, v->line, "sigma must be positive");
  }
  {
    auto* beta = reader.find("network", "beta");
    auto* sweep = reader.find("network", "beta_sweep");
    if (beta && sweep)
      config_fail(name, sweep->line,
                  "specify either beta or beta_sweep, not both (beta set on "
                  "line " +
                      std::to_string(beta->line) + ")");
    if (beta) {
      cfg.betas = {detail::parse_double(reader, *beta)};
      if (cfg.betas[0] < 0.0)
        config_fail(name, beta->line, "beta must be non-negative");
    } else if (sweep) {
      cfg.betas.clear();
      const auto parts = detail::split_list(sweep->text);
      if (parts.empty())
        config_fail(name, sweep->line, "beta_sweep must not be empty");
      for (const auto& part : parts)
        cfg.betas.push_back(
            detail::parse_double(reader, {part, sweep->line}));
      cfg.is_sweep = true;
      if (cfg.betas.front() < 0.0)
        config_fail(name, sweep->line, "beta values must be non-negative");
      for (std::size_t i = 1; i < cfg.betas.size(); ++i)
        if (!(cfg.betas[i - 1] < cfg.betas[i]))
          config_fail(name, sweep->line,
                      "beta_sweep must be strictly increasing");
    }
  }

  // --- [simulation] ---
  if (auto* v = reader.find("simulation", "alpha")) {
    cfg.sim.alpha = detail::parse_double(reader, *v);
    if (cfg.sim.alpha < 0.0)
      config_fail(name, v->line, "alpha must be non-negative");
  }
  if (auto* v = reader.find("simulation", "dt")) {
    cfg.sim.dt = detail::parse_double(reader, *v);
    if (!(cfg.sim.dt > 0.0)) config_fail(name, v->line, "dt must be positive");
  }
  int h_line = 0;
  if (auto* v = reader.find("simulation", "h")) {
    cfg.sim.h_threshold = detail::parse_double(reader, *v);
    h_line = v->line;
  }
  if (auto* v = reader.find("simulation", "t_max")) {
    cfg.sim.t_max = detail::parse_double(reader, *v);
    if (!(cfg.sim.t_max > 0.0))
      config_fail(name, v->line, "t_max must be positive");
  }
  if (auto* v = reader.find("simulation", "n_realizations")) {
    cfg.sim.n_realizations = detail::parse_int<int>(reader, *v);
    if (cfg.sim.n_realizations < 1)
      config_fail(name, v->line, "n_realizations must be >= 1");
  }
  if (auto* v = reader.find("simulation", "master_seed"))
    cfg.sim.master_seed = detail::parse_int<std::uint64_t>(reader, *v);
  if (auto* v = reader.find("simulation", "record_snapshots"))
    cfg.sim.record_snapshots = detail::parse_bool(reader, *v);

  // --- [analysis] ---
  if (auto* v = reader.find("analysis", "bin_width")) {
    cfg.bin_width = detail::parse_double(reader, *v);
    if (!(cfg.bin_width > 0.0))
      config_fail(name, v->line, "bin_width must be positive");
  }
  std::optional<bool> classify_key;
  if (auto* v = reader.find("analysis", "classify")) {
    if (v->text != "auto") classify_key = detail::parse_bool(reader, *v);
  }
  cfg.classify = classify_key.value_or(cfg.n_units == 2);
  int pairs_line = 0;
  if (auto* v = reader.find("analysis", "stats_pairs")) {
    pairs_line = v->line;
    cfg.stats_pairs.clear();
    for (const auto& part : detail::split_list(v->text)) {
      const auto bar = part.find('|');
      if (bar == std::string::npos)
        config_fail(name, v->line,
                    "stats_pairs entries look like k|l, got '" + part + "'");
      const int k = detail::parse_int<int>(
          reader, {detail::trim(part.substr(0, bar)), v->line});
      const int l = detail::parse_int<int>(
          reader, {detail::trim(part.substr(bar + 1)), v->line});
      if (!(0 <= l && l < k))
        config_fail(name, v->line,
                    "stats_pairs entries need 0 <= l < k, got '" + part + "'");
      cfg.stats_pairs.emplace_back(k, l);
    }
    if (cfg.stats_pairs.empty())
      config_fail(name, v->line, "stats_pairs must not be empty");
  } else if (cfg.n_units == 1) {
    cfg.stats_pairs = {{1, 0}};
  }
  for (const auto& [k, l] : cfg.stats_pairs)
    if (k > cfg.n_units)
      config_fail(name, pairs_line,
                  "stats pair " + std::to_string(k) + "|" + std::to_string(l) +
                      " exceeds the network size n = " +
                      std::to_string(cfg.n_units));
  if (auto* v = reader.find("analysis", "sample_trajectories")) {
    cfg.sample_trajectories = detail::parse_int<int>(reader, *v);
    if (cfg.sample_trajectories < 0)
      config_fail(name, v->line, "sample_trajectories must be >= 0");
  }
  if (auto* v = reader.find("analysis", "trajectory_t_max")) {
    cfg.trajectory_t_max = detail::parse_double(reader, *v);
    if (!(cfg.trajectory_t_max > 0.0))
      config_fail(name, v->line, "trajectory_t_max must be positive");
  }

  // --- [output] ---
  if (auto* v = reader.find("output", "directory")) {
    if (v->text.empty()) config_fail(name, v->line, "directory must not be empty");
    cfg.out_dir = v->text;
  }
  if (auto* v = reader.find("output", "formats")) {
    cfg.write_csv = cfg.write_json = false;
    for (const auto& part : detail::split_list(v->text)) {
      if (part == "csv")
        cfg.write_csv = true;
      else if (part == "json")
        cfg.write_json = true;
      else
        config_fail(name, v->line,
                    "unknown format '" + part + "' (expected csv or json)");
    }
    if (!cfg.write_csv && !cfg.write_json)
      config_fail(name, v->line, "formats must name csv and/or json");
  }

  reader.reject_unknown_keys();

  // --- cross-key invariants, located as precisely as possible ---
  try {
    cfg.sim.validate(UnitParams{cfg.nu});
  } catch (const std::invalid_argument& e) {
    config_fail(name, h_line, e.what());
  }
  if (cfg.classify && !cfg.sim.record_snapshots)
    config_fail(name, 0,
                "classify = true needs record_snapshots = true (the split "
                "uses the first-escape snapshot)");
  try {
    (void)cfg.network(cfg.betas.front());  // n/topology/coupling consistency
  } catch (const std::invalid_argument& e) {
    config_fail(name, 0, e.what());
  }
  return cfg;
}

// Loads and validates a config file.
inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

}  // namespace escapenet
