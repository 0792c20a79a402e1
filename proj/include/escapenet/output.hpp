#pragma once

// Result persistence: CSV tables whose numeric payload is byte-reproducible
// (shortest round-trip decimal rendering, LF endings), and JSON for nested
// summaries and provenance. Timestamps appear only in provenance.json so
// every other file is byte-identical across reruns of the same config.

#include "escapenet/config.hpp"
#include "escapenet/version.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>
#include <vector>

#include "json.hpp"

namespace escapenet {

// Shortest decimal string that parses back to exactly the same double.
// NaN renders as an empty field (CSV convention for "not observed").
inline std::string format_double(double x) {
  if (std::isnan(x)) return "";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t hash = 0xCBF29CE484222325ull;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001B3ull;
  }
  return hash;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  for (int i = 15; i >= 0; --i) {
    buf[i] = "0123456789abcdef"[v & 0xF];
    v >>= 4;
  }
  buf[16] = '\0';
  return buf;
}

struct Provenance {
  std::string tool = "escapenet";
  std::string tool_version = version;
  std::uint64_t master_seed = 0;
  std::string config_name;
  std::string config_digest;  // fnv1a-64 of the config text, hex
  std::string config_echo;    // full config text (JSON only)

  static Provenance of(const ExperimentConfig& cfg) {
    Provenance p;
    p.master_seed = cfg.sim.master_seed;
    p.config_name = cfg.source_name;
    p.config_digest = hex64(fnv1a64(cfg.source_text));
    p.config_echo = cfg.source_text;
    return p;
  }

  // One-line form embedded in every tabular file; carries no timestamp so
  // the files stay byte-identical across reruns.
  std::string comment_line() const {
    return "# " + tool + " " + tool_version + " | seed=" +
           std::to_string(master_seed) + " | config=" + config_name +
           " | digest=" + config_digest;
  }
};

inline std::string utc_timestamp() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline nlohmann::json provenance_json(const Provenance& p) {
  return nlohmann::json{{"tool", p.tool},
                        {"version", p.tool_version},
                        {"master_seed", p.master_seed},
                        {"config_name", p.config_name},
                        {"config_digest", p.config_digest}};
}

// provenance.json: the only emitted file carrying a timestamp.
inline void write_provenance_file(const std::filesystem::path& dir,
                                  const Provenance& p) {
  nlohmann::json j = provenance_json(p);
  j["timestamp_utc"] = utc_timestamp();
  j["config_echo"] = p.config_echo;
  std::ofstream out(dir / "provenance.json", std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot write " +
                             (dir / "provenance.json").string());
  out << j.dump(2) << '\n';
}

inline std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n") == std::string_view::npos)
    return std::string(field);
  std::string quoted = "\"";
  for (char c : field) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

// Comma-separated, UTF-8, LF endings, mandatory header row, one leading
// provenance comment line.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const Provenance& provenance)
      : out_(path, std::ios::binary), path_(path.string()) {
    if (!out_) throw std::runtime_error("cannot write " + path_);
    out_ << provenance.comment_line() << '\n';
  }

  void header(std::initializer_list<std::string_view> columns) {
    bool first = true;
    for (const auto col : columns) {
      if (!first) out_ << ',';
      out_ << csv_escape(col);
      first = false;
    }
    out_ << '\n';
  }

  // Dynamic-width variants for tables whose column count depends on the
  // network size. Values are written as given; escaping still applies.
  void header_fields(const std::vector<std::string>& columns) {
    raw_row(columns);
  }

  void raw_row(const std::vector<std::string>& fields) {
    bool first = true;
    for (const auto& f : fields) {
      if (!first) out_ << ',';
      out_ << csv_escape(f);
      first = false;
    }
    out_ << '\n';
  }

  template <typename... Fields>
  void row(const Fields&... fields) {
    bool first = true;
    (write_field(fields, first), ...);
    out_ << '\n';
  }

  const std::string& path() const { return path_; }

 private:
  template <typename T>
  void write_field(const T& value, bool& first) {
    if (!first) out_ << ',';
    first = false;
    if constexpr (std::is_same_v<T, double>) {
      out_ << format_double(value);
    } else if constexpr (std::is_integral_v<T>) {
      out_ << value;
    } else {
      out_ << csv_escape(value);
    }
  }

  std::ofstream out_;
  std::string path_;
};

inline void write_json_file(const std::filesystem::path& path,
                            const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace escapenet
