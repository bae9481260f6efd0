#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "erasekit/error.hpp"

namespace erasekit {

using Json = nlohmann::ordered_json;

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// Audit report. Keys keep insertion order, so two runs with the same
/// config serialize identically apart from "generated_at".
class Report {
 public:
  explicit Report(std::string command);

  /// Fully resolved settings of the run.
  Json& config() { return config_; }
  const Json& config() const { return config_; }

  /// Records path and checksum of an input file.
  void add_input(const std::string& name, const std::filesystem::path& path);
  void add_metric(const std::string& name, double value, std::optional<double> p_value = std::nullopt);
  /// Free-form structured results (per-iteration logs, per-property rows).
  Json& details() { return details_; }
  void add_warnings(const Diagnostics& diagnostics);

  Json to_json() const;
  /// Metric rows: metric, value, p.
  std::string to_tsv() const;

  /// Writes <prefix>.json and <prefix>.tsv.
  void write(const std::filesystem::path& prefix) const;

 private:
  struct Metric {
    std::string name;
    double value;
    std::optional<double> p_value;
  };

  std::string command_;
  std::string generated_at_;
  Json config_ = Json::object();
  Json inputs_ = Json::object();
  std::vector<Metric> metrics_;
  Json details_ = Json::object();
  std::vector<std::string> warnings_;
};

/// Report JSON with the timestamp removed; for reproducibility checks.
std::string strip_timestamp(const std::string& report_json);

}  // namespace erasekit
