#pragma once

#include <sys/wait.h>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <unistd.h>

#include "erasekit/embedding.hpp"

namespace testing_support {

/// Directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("erasekit_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Type-level space from (surface, vector) rows.
inline erasekit::EmbeddingSpace make_space(
    std::initializer_list<std::pair<std::string, std::vector<double>>> rows) {
  std::vector<erasekit::OccurrenceKey> keys;
  const auto d = static_cast<Eigen::Index>(rows.begin()->second.size());
  erasekit::Matrix m(static_cast<Eigen::Index>(rows.size()), d);
  Eigen::Index r = 0;
  for (const auto& [s, v] : rows) {
    keys.push_back(erasekit::OccurrenceKey::type(s));
    for (Eigen::Index j = 0; j < d; ++j) m(r, j) = v[static_cast<std::size_t>(j)];
    ++r;
  }
  return {std::move(keys), std::move(m)};
}

inline erasekit::Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  erasekit::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = g(rng);
  return m;
}

struct CliResult {
  int exit_code = -1;
  std::string output;
};

/// Runs the erasekit binary with stdout and stderr captured together.
inline CliResult run_cli(const std::string& args, const std::filesystem::path& cwd = {}) {
  std::string cmd;
  if (!cwd.empty()) cmd = "cd '" + cwd.string() + "' && ";
  cmd += std::string("'") + ERASEKIT_BINARY + "' " + args + " 2>&1";
  CliResult result;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return result;
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) result.output.append(buf, n);
  const int status = ::pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

}  // namespace testing_support
