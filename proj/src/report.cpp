#include "erasekit/report.hpp"

#include <array>
#include <chrono>
#include <fstream>
#include <memory>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <openssl/evp.h>

#include "text_util.hpp"

namespace erasekit {

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("sha256 init failed");
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::string hex;
  for (unsigned i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

Report::Report(std::string command) : command_(std::move(command)) {
  const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  generated_at_ = fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(now)));
}

void Report::add_input(const std::string& name, const std::filesystem::path& path) {
  inputs_[name] = {{"path", path.string()}, {"sha256", sha256_file(path)}};
}

void Report::add_metric(const std::string& name, double value, std::optional<double> p_value) {
  metrics_.push_back({name, value, p_value});
}

void Report::add_warnings(const Diagnostics& diagnostics) {
  warnings_.insert(warnings_.end(), diagnostics.warnings().begin(), diagnostics.warnings().end());
}

Json Report::to_json() const {
  Json j;
  j["command"] = command_;
  j["generated_at"] = generated_at_;
  j["config"] = config_;
  j["inputs"] = inputs_;
  Json metrics = Json::array();
  for (const auto& m : metrics_) {
    Json row = {{"metric", m.name}, {"value", m.value}};
    row["p"] = m.p_value ? Json(*m.p_value) : Json(nullptr);
    metrics.push_back(std::move(row));
  }
  j["metrics"] = std::move(metrics);
  j["details"] = details_;
  j["warnings"] = warnings_;
  return j;
}

std::string Report::to_tsv() const {
  std::string out = "metric\tvalue\tp\n";
  for (const auto& m : metrics_)
    out += fmt::format("{}\t{:.17g}\t{}\n", m.name, m.value, m.p_value ? fmt::format("{:.17g}", *m.p_value) : "NA");
  return out;
}

void Report::write(const std::filesystem::path& prefix) const {
  auto json_path = prefix;
  json_path += ".json";
  auto tsv_path = prefix;
  tsv_path += ".tsv";
  if (prefix.has_parent_path()) std::filesystem::create_directories(prefix.parent_path());
  {
    auto out = detail::open_output(json_path);
    out << to_json().dump(2) << '\n';
    if (!out) throw Error("failed writing " + json_path.string());
  }
  auto out = detail::open_output(tsv_path);
  out << to_tsv();
  if (!out) throw Error("failed writing " + tsv_path.string());
}

std::string strip_timestamp(const std::string& report_json) {
  Json j = Json::parse(report_json);
  j.erase("generated_at");
  return j.dump(2);
}

}  // namespace erasekit
