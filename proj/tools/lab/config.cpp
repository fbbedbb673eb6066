#include "config.hpp"

#include <algorithm>
#include <filesystem>
#include <map>

#include "affine/io.hpp"

namespace affine::lab {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

enum class Kind { kNumber, kCount, kNumbers, kMatrix, kText, kPath };

struct Schema {
  bool needs_model;
  std::map<std::string, Kind> options;
  std::map<std::string, std::vector<std::string>> choices;  // allowed values of kText options
};

const Schema& schema(Command c) {
  static const std::map<Command, Schema> table = {
      {Command::kValidate, {true, {{"n_probe", Kind::kCount}, {"tol", Kind::kNumber}}, {}}},
      {Command::kRiccati,
       {true, {{"u", Kind::kMatrix}, {"T", Kind::kNumber}, {"tol", Kind::kNumber}, {"times", Kind::kNumbers}}, {}}},
      {Command::kStationary,
       {true,
        {{"tol", Kind::kNumber}, {"x0", Kind::kMatrix}, {"times", Kind::kNumbers}, {"p", Kind::kNumber}},
        {}}},
      {Command::kSimulate,
       {true,
        {{"x0", Kind::kMatrix}, {"times", Kind::kNumbers}, {"n_paths", Kind::kCount}, {"dt_max", Kind::kNumber}},
        {}}},
      {Command::kWdist,
       {false,
        {{"x0", Kind::kMatrix},
         {"times", Kind::kNumbers},
         {"n_paths", Kind::kCount},
         {"n_boot", Kind::kCount},
         {"p", Kind::kNumber},
         {"method", Kind::kText},
         {"epsilon", Kind::kNumber},
         {"dt_max", Kind::kNumber},
         {"a", Kind::kPath},
         {"b", Kind::kPath}},
        {{"method", {"exact", "sinkhorn"}}}}},
      {Command::kPrice,
       {true,
        {{"T", Kind::kNumber},
         {"T_hat", Kind::kNumber},
         {"strikes", Kind::kNumbers},
         {"regime", Kind::kText},
         {"method", Kind::kText},
         {"n_paths", Kind::kCount},
         {"dt", Kind::kNumber},
         {"x_dt_max", Kind::kNumber},
         {"alpha", Kind::kNumber},
         {"tol", Kind::kNumber}},
        {{"regime", {"start", "stationary", "both"}}, {"method", {"fourier", "mc", "both"}}}}},
      {Command::kSmile,
       {true,
        {{"taus", Kind::kNumbers},
         {"tau_units", Kind::kNumbers},
         {"T", Kind::kNumber},
         {"T_hat", Kind::kNumber},
         {"log_strikes", Kind::kNumbers},
         {"n_outer", Kind::kCount},
         {"x_dt_max", Kind::kNumber},
         {"tol", Kind::kNumber}},
        {}}},
      {Command::kReproduceAll, {false, {{"data_dir", Kind::kPath}, {"threads_alt", Kind::kNumbers}}, {}}},
  };
  return table.at(c);
}

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::kConfig, what); }

void check_kind(const std::string& key, const json& v, Kind kind, const Schema& s) {
  const std::string where = "options." + key;
  switch (kind) {
    case Kind::kNumber:
      if (!v.is_number()) config_error(where + " must be a number");
      break;
    case Kind::kCount:
      if (!v.is_number_unsigned() || v.get<std::uint64_t>() == 0) config_error(where + " must be a positive integer");
      break;
    case Kind::kNumbers:
      if (!v.is_array() || v.empty()) config_error(where + " must be a non-empty array of numbers");
      for (const auto& x : v) {
        if (!x.is_number()) config_error(where + " must be a non-empty array of numbers");
      }
      break;
    case Kind::kMatrix:
      if (!v.is_array() || v.empty()) config_error(where + " must be an array of rows");
      for (const auto& row : v) {
        if (!row.is_array() || row.size() != v.size()) config_error(where + " must be square");
        for (const auto& x : row) {
          if (!x.is_number()) config_error(where + " entries must be numbers");
        }
      }
      break;
    case Kind::kText:
    case Kind::kPath:
      if (!v.is_string()) config_error(where + " must be a string");
      if (auto it = s.choices.find(key); it != s.choices.end()) {
        const auto& allowed = it->second;
        if (std::find(allowed.begin(), allowed.end(), v.get<std::string>()) == allowed.end()) {
          std::string list;
          for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
          config_error(where + " must be one of " + list);
        }
      }
      break;
  }
}

std::string resolve(const std::string& base_dir, const std::string& p) {
  const fs::path path(p);
  if (path.is_absolute() || base_dir.empty()) return path.lexically_normal().string();
  return (fs::path(base_dir) / path).lexically_normal().string();
}

}  // namespace

const char* to_string(Command c) noexcept {
  switch (c) {
    case Command::kValidate: return "validate";
    case Command::kRiccati: return "riccati";
    case Command::kStationary: return "stationary";
    case Command::kSimulate: return "simulate";
    case Command::kWdist: return "wdist";
    case Command::kPrice: return "price";
    case Command::kSmile: return "smile";
    case Command::kReproduceAll: return "reproduce-all";
  }
  return "?";
}

std::optional<Command> parse_command(std::string_view name) {
  for (Command c : kAllCommands) {
    if (name == to_string(c)) return c;
  }
  return std::nullopt;
}

ExperimentConfig parse_config(std::string_view text, const std::string& base_dir, std::optional<Command> command) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    config_error(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) config_error("config must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (k != "command" && k != "model" && k != "seed" && k != "threads" && k != "output" && k != "options") {
      config_error("unknown key '" + k + "' in config");
    }
  }

  ExperimentConfig cfg;
  if (j.contains("command")) {
    if (!j["command"].is_string()) config_error("command must be a string");
    const auto named = parse_command(j["command"].get<std::string>());
    if (!named) config_error("unknown command '" + j["command"].get<std::string>() + "'");
    if (command && *command != *named) {
      config_error(std::string("config is for '") + to_string(*named) + "' but '" + to_string(*command) +
                   "' was requested");
    }
    cfg.command = *named;
  } else if (command) {
    cfg.command = *command;
  } else {
    config_error("no command given");
  }
  const Schema& s = schema(cfg.command);

  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) config_error("seed must be a non-negative integer");
    cfg.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("threads")) {
    if (!j["threads"].is_number_unsigned() || j["threads"].get<std::uint64_t>() == 0) {
      config_error("threads must be a positive integer");
    }
    cfg.threads = j["threads"].get<int>();
  }
  if (j.contains("output")) {
    if (!j["output"].is_string() || j["output"].get<std::string>().empty()) {
      config_error("output must be a non-empty file name");
    }
    cfg.output = j["output"].get<std::string>();
    if (fs::path(cfg.output).has_parent_path()) config_error("output is a file name; use --out for the directory");
  }
  if (j.contains("options")) {
    const json& o = j["options"];
    if (!o.is_object()) config_error("options must be an object");
    for (const auto& [k, v] : o.items()) {
      const auto it = s.options.find(k);
      if (it == s.options.end()) {
        config_error("unknown option '" + k + "' for " + to_string(cfg.command));
      }
      check_kind(k, v, it->second, s);
      cfg.options_[k] = it->second == Kind::kPath ? json(resolve(base_dir, v.get<std::string>())) : v;
    }
  }
  if (j.contains("model")) {
    if (!j["model"].is_string()) config_error("model must be a path");
    cfg.model_path = resolve(base_dir, j["model"].get<std::string>());
  }
  const bool file_mode = cfg.command == Command::kWdist && cfg.has("a") && cfg.has("b");
  if (cfg.command == Command::kWdist && cfg.has("a") != cfg.has("b")) config_error("wdist needs both 'a' and 'b'");
  if ((s.needs_model || (cfg.command == Command::kWdist && !file_mode)) && cfg.model_path.empty()) {
    config_error(std::string(to_string(cfg.command)) + " needs a model");
  }

  // Paths enter the hash through their file contents, not their spelling.
  json canon = j;
  canon.erase("threads");
  canon.erase("model");
  canon["command"] = to_string(cfg.command);
  if (!cfg.model_path.empty()) canon["model_fnv1a64"] = hex64(fnv1a64(read_text_file(cfg.model_path)));
  for (const auto& [k, kind] : s.options) {
    if (kind == Kind::kPath && cfg.has(k)) {
      const std::string p = cfg.options_[k].get<std::string>();
      canon["options"][k] = fs::is_regular_file(p) ? hex64(fnv1a64(read_text_file(p))) : std::string("dir");
    }
  }
  cfg.canonical_ = std::move(canon);
  return cfg;
}

ExperimentConfig load_config(const std::string& path, std::optional<Command> command) {
  return parse_config(read_text_file(path), fs::path(path).parent_path().string(), command);
}

ExperimentConfig default_config(Command command) {
  return parse_config("{}", "", command);
}

double ExperimentConfig::number(const std::string& key, double fallback) const {
  return has(key) ? options_.at(key).get<double>() : fallback;
}

std::size_t ExperimentConfig::count(const std::string& key, std::size_t fallback) const {
  return has(key) ? options_.at(key).get<std::size_t>() : fallback;
}

std::vector<double> ExperimentConfig::numbers(const std::string& key, std::vector<double> fallback) const {
  return has(key) ? options_.at(key).get<std::vector<double>>() : fallback;
}

std::string ExperimentConfig::text(const std::string& key, std::string fallback) const {
  return has(key) ? options_.at(key).get<std::string>() : fallback;
}

std::optional<Matrix> ExperimentConfig::matrix(const std::string& key, int n) const {
  if (!has(key)) return std::nullopt;
  const json& rows = options_.at(key);
  if (static_cast<int>(rows.size()) != n) {
    config_error("options." + key + " must be " + std::to_string(n) + " x " + std::to_string(n));
  }
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) m(i, k) = rows[i][k].get<double>();
  }
  return m;
}

std::uint64_t ExperimentConfig::hash() const {
  json c = canonical_;
  c.erase("seed");
  if (seed) c["seed"] = *seed;
  return fnv1a64(c.dump());
}

}  // namespace affine::lab
