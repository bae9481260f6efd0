#include <fstream>
#include <iostream>

#include <fmt/format.h>

#include "erasekit/cli.hpp"
#include "options.hpp"

namespace erasekit::cli {

namespace {

std::vector<std::string> config_values(const std::string& key, const Json& value) {
  switch (value.type()) {
    case Json::value_t::null:
      return {};
    case Json::value_t::boolean:
      return {value.get<bool>() ? "true" : "false"};
    case Json::value_t::number_unsigned:
      return {std::to_string(value.get<std::uint64_t>())};
    case Json::value_t::number_integer:
      return {std::to_string(value.get<std::int64_t>())};
    case Json::value_t::number_float:
      return {fmt::format("{:.17g}", value.get<double>())};
    case Json::value_t::string:
      if (value.get<std::string>().empty()) return {};
      return {value.get<std::string>()};
    case Json::value_t::array: {
      std::vector<std::string> out;
      for (const auto& item : value) {
        auto v = config_values(key, item);
        out.insert(out.end(), v.begin(), v.end());
      }
      return out;
    }
    default:
      throw UsageError(fmt::format("config key '{}' has an unsupported value", key));
  }
}

/// A plain settings object, or an earlier report whose "config" is reused.
Json load_config(const std::string& path, const std::string& command) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw UsageError(fmt::format("config {} is not valid JSON: {}", path, e.what()));
  }
  if (!j.is_object()) throw UsageError("config " + path + " must be a JSON object");
  if (j.contains("command") && j.contains("config")) {
    if (j["command"] != command)
      throw UsageError(fmt::format("config {} is a '{}' report, not '{}'", path, j["command"].get<std::string>(),
                                   command));
    return j["config"];
  }
  return j;
}

}  // namespace

void OptionSet::apply_config(const Json& config) {
  for (const auto& [key, value] : config.items()) {
    auto it = std::find_if(fields_.begin(), fields_.end(), [&](const Field& f) { return f.name == key; });
    if (it == fields_.end()) throw UsageError(fmt::format("unknown config key '{}'", key));
    if (it->option->count() > 0) continue;
    auto values = config_values(key, value);
    if (values.empty()) continue;
    it->option->add_result(values);
    try {
      it->option->run_callback();
    } catch (const CLI::Error& e) {
      throw UsageError(fmt::format("config key '{}': {}", key, e.what()));
    }
  }
}

void OptionSet::check_required() const {
  for (const auto& f : fields_)
    if (f.required && f.option->count() == 0) throw UsageError(fmt::format("missing required option --{}", f.name));
}

bool OptionSet::given(const std::string& name) const {
  for (const auto& f : fields_)
    if (f.name == name) return f.option->count() > 0;
  return false;
}

Json OptionSet::echo() const {
  Json j = Json::object();
  for (const auto& f : fields_) j[f.name] = f.value();
  return j;
}

int run(int argc, char** argv) {
  CLI::App app{"Concept erasure and embedding audits"};
  app.name("erasekit");
  app.require_subcommand(1, 1);

  auto commands = make_commands();
  std::vector<std::unique_ptr<OptionSet>> options;
  std::vector<std::string> config_paths(commands.size());
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < commands.size(); ++i) {
    auto& cmd = *commands[i];
    auto* sub = app.add_subcommand(cmd.name(), cmd.description());
    auto set = std::make_unique<OptionSet>(sub);
    set->add("out", cmd.common.out, "Report prefix; writes <out>.json and <out>.tsv", true);
    set->add("seed", cmd.common.seed, "Seed for every random choice");
    set->add("threads", cmd.common.threads, "Worker cap")->check(CLI::PositiveNumber);
    sub->add_option("--config", config_paths[i], "JSON settings or an earlier report; flags take precedence");
    cmd.define(*set);
    subs.push_back(sub);
    options.push_back(std::move(set));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  std::size_t chosen = 0;
  while (chosen < subs.size() && !subs[chosen]->parsed()) ++chosen;
  auto& cmd = *commands[chosen];
  auto& set = *options[chosen];

  try {
    if (!config_paths[chosen].empty()) set.apply_config(load_config(config_paths[chosen], cmd.name()));
    set.check_required();
  } catch (const UsageError& e) {
    std::cerr << "erasekit " << cmd.name() << ": " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    Report report(cmd.name());
    report.config() = set.echo();
    cmd.execute(report, set);
    report.write(cmd.common.out);
    std::cout << report.to_tsv();
  } catch (const UsageError& e) {
    std::cerr << "erasekit " << cmd.name() << ": " << e.what() << '\n';
    return kExitUsage;
  } catch (const UnresolvedError& e) {
    std::cerr << "erasekit " << cmd.name() << ": " << e.what() << '\n';
    for (const auto& m : e.missing()) std::cerr << "  missing: " << m << '\n';
    return kExitComputation;
  } catch (const std::exception& e) {
    std::cerr << "erasekit " << cmd.name() << ": " << e.what() << '\n';
    return kExitComputation;
  }
  return kExitOk;
}

}  // namespace erasekit::cli
