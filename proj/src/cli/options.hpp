#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "erasekit/report.hpp"

namespace erasekit::cli {

/// Bad invocation (exit code 2).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Options of one subcommand. Values left unset on the command line can be
/// filled from a JSON config; the merged values are echoed into the report.
class OptionSet {
 public:
  explicit OptionSet(CLI::App* app) : app_(app) {}

  template <class T>
  CLI::Option* add(const std::string& name, T& var, const std::string& help, bool required = false) {
    auto* opt = app_->add_option("--" + name, var, help)->capture_default_str();
    fields_.push_back({name, opt, [&var] { return Json(var); }, required});
    return opt;
  }

  CLI::Option* add_list(const std::string& name, std::vector<std::string>& var, const std::string& help) {
    auto* opt = app_->add_option("--" + name, var, help)->delimiter(',')->capture_default_str();
    fields_.push_back({name, opt, [&var] { return Json(var); }, false});
    return opt;
  }

  CLI::Option* add_flag(const std::string& name, bool& var, const std::string& help) {
    auto* opt = app_->add_flag("--" + name, var, help);
    fields_.push_back({name, opt, [&var] { return Json(var); }, false});
    return opt;
  }

  /// Fills options not given on the command line. Unknown keys are an error.
  void apply_config(const Json& config);
  /// Throws UsageError naming the first missing required option.
  void check_required() const;
  bool given(const std::string& name) const;
  Json echo() const;

 private:
  struct Field {
    std::string name;
    CLI::Option* option;
    std::function<Json()> value;
    bool required;
  };

  CLI::App* app_;
  std::vector<Field> fields_;
};

/// Settings every subcommand has.
struct CommonOptions {
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string out;
};

class Command {
 public:
  virtual ~Command() = default;
  virtual const char* name() const = 0;
  virtual const char* description() const = 0;
  virtual void define(OptionSet& options) = 0;
  /// Runs the computation and fills the report (config echo excluded).
  virtual void execute(Report& report, const OptionSet& options) = 0;

  CommonOptions common;
};

std::vector<std::unique_ptr<Command>> make_commands();

}  // namespace erasekit::cli
