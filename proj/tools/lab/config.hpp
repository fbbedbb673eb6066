#pragma once

// Experiment configuration for affine_lab.
//
//   {"command": "simulate", "model": "../data/ou_n2.json", "seed": 7, "threads": 4,
//    "output": "paths.csv", "options": {"x0": [[1, 0], [0, 1]], "times": [0.5, 1]}}
//
// "command" may be omitted when the subcommand supplies it. Relative paths
// resolve against the config file's directory. Every key, top level and in
// "options", is checked against the command's schema before anything runs.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "affine/cone.hpp"
#include "json.hpp"

namespace affine::lab {

enum class Command { kValidate, kRiccati, kStationary, kSimulate, kWdist, kPrice, kSmile, kReproduceAll };

inline constexpr Command kAllCommands[] = {Command::kValidate, Command::kRiccati, Command::kStationary,
                                           Command::kSimulate, Command::kWdist,   Command::kPrice,
                                           Command::kSmile,    Command::kReproduceAll};

const char* to_string(Command c) noexcept;
std::optional<Command> parse_command(std::string_view name);

class ExperimentConfig {
 public:
  Command command = Command::kValidate;
  std::string model_path;  // resolved; empty when the command needs none
  std::string output;      // file name inside the output directory
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;

  bool has(const std::string& key) const { return options_.contains(key); }
  double number(const std::string& key, double fallback) const;
  std::size_t count(const std::string& key, std::size_t fallback) const;
  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) const;
  std::string text(const std::string& key, std::string fallback) const;
  /// n x n matrix option, nested rows.
  std::optional<Matrix> matrix(const std::string& key, int n) const;

  std::uint64_t seed_or(std::uint64_t fallback) const { return seed.value_or(fallback); }

  /// FNV-1a of the canonical config (threads excluded) and the model file bytes.
  std::uint64_t hash() const;

  friend ExperimentConfig parse_config(std::string_view, const std::string&, std::optional<Command>);

 private:
  nlohmann::json options_ = nlohmann::json::object();
  nlohmann::json canonical_;
};

/// Throws Error(kConfig) on malformed JSON, unknown keys, wrong types, a
/// missing model, or a "command" that contradicts `command`.
ExperimentConfig parse_config(std::string_view text, const std::string& base_dir,
                              std::optional<Command> command = std::nullopt);
ExperimentConfig load_config(const std::string& path, std::optional<Command> command = std::nullopt);

/// Config for a command run without --config; fails if the command needs a model.
ExperimentConfig default_config(Command command);

}  // namespace affine::lab
