#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "affine/io.hpp"
#include "affine/parallel.hpp"
#include "commands.hpp"
#include "config.hpp"

using namespace affine;
using namespace affine::lab;
namespace fs = std::filesystem;

namespace {

const std::string kData = AFFINE_DATA_DIR;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("affine_lab_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ErrorCode config_code(const std::string& text, std::optional<Command> c = std::nullopt) {
  try {
    parse_config(text, kData, c);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "accepted: " << text;
  return ErrorCode::kInvalidArgument;
}

struct Outcome {
  int code;
  std::string csv;
  std::string out, err;
};

Outcome run_text(const std::string& text, const std::string& dir, std::optional<Command> c = std::nullopt) {
  const ExperimentConfig cfg = parse_config(text, kData, c);
  std::ostringstream out, err;
  Outcome o;
  o.code = run(cfg, dir, out, err);
  o.out = out.str();
  o.err = err.str();
  const fs::path file = fs::path(dir) / (cfg.output.empty() ? default_output(cfg.command) : cfg.output);
  if (fs::exists(file)) o.csv = read_text_file(file.string());
  return o;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST(Config, RejectsUnknownKeysAndBadTypes) {
  EXPECT_EQ(config_code(R"({"command": "validate", "model": "ou_n2.json", "sed": 1})"), ErrorCode::kConfig);
  EXPECT_EQ(config_code(R"({"command": "validate", "model": "ou_n2.json", "options": {"n_probes": 5}})"),
            ErrorCode::kConfig);
  EXPECT_EQ(config_code(R"({"command": "validate", "model": "ou_n2.json", "options": {"n_probe": -5}})"),
            ErrorCode::kConfig);
  EXPECT_EQ(config_code(R"({"command": "riccati", "model": "ou_n2.json", "options": {"u": [[1, 0]]}})"),
            ErrorCode::kConfig);
  EXPECT_EQ(config_code(R"({"command": "price", "model": "bns_desk.json", "options": {"method": "pde"}})"),
            ErrorCode::kConfig);
  EXPECT_EQ(config_code(R"({"command": "validate", "model": "ou_n2.json", "seed": "7"})"), ErrorCode::kConfig);
  EXPECT_EQ(config_code(R"({"command": "validate", "model": "ou_n2.json", "output": "a/b.csv"})"), ErrorCode::kConfig);
  EXPECT_EQ(config_code("[1, 2]"), ErrorCode::kConfig);
  EXPECT_EQ(config_code("{not json"), ErrorCode::kConfig);
}

TEST(Config, CommandAndModelChecks) {
  EXPECT_EQ(config_code(R"({"model": "ou_n2.json"})"), ErrorCode::kConfig);
  EXPECT_EQ(config_code(R"({"command": "fit", "model": "ou_n2.json"})"), ErrorCode::kConfig);
  EXPECT_EQ(config_code(R"({"command": "validate", "model": "ou_n2.json"})", Command::kPrice), ErrorCode::kConfig);
  EXPECT_EQ(config_code(R"({"command": "validate"})"), ErrorCode::kConfig);
  EXPECT_EQ(config_code(R"({"command": "wdist", "options": {"a": "x.csv"}})"), ErrorCode::kConfig);
  EXPECT_EQ(config_code(R"({"command": "validate", "model": "missing.json"})"), ErrorCode::kConfig);
  const ExperimentConfig c = parse_config(R"({"model": "ou_n2.json"})", kData, Command::kSimulate);
  EXPECT_EQ(c.command, Command::kSimulate);
  EXPECT_EQ(fs::path(c.model_path), fs::path(kData) / "ou_n2.json");
  EXPECT_NO_THROW(default_config(Command::kReproduceAll));
  EXPECT_THROW(default_config(Command::kValidate), Error);
}

TEST(Config, HashCoversContentNotSpellingOrThreads) {
  const auto h = [](const std::string& t) { return parse_config(t, kData).hash(); };
  const std::string base = R"({"command": "simulate", "model": "ou_n2.json", "seed": 3})";
  EXPECT_EQ(h(base), h(R"({"command": "simulate", "model": "./ou_n2.json", "seed": 3, "threads": 8})"));
  EXPECT_EQ(h(base), h(R"({"seed": 3, "model": "ou_n2.json", "command": "simulate"})"));
  EXPECT_NE(h(base), h(R"({"command": "simulate", "model": "ou_n2.json", "seed": 4})"));
  EXPECT_NE(h(base), h(R"({"command": "simulate", "model": "mu_n2.json", "seed": 3})"));
  ExperimentConfig c = parse_config(base, kData);
  const auto before = c.hash();
  c.seed = 4;
  EXPECT_EQ(c.hash(), h(R"({"command": "simulate", "model": "ou_n2.json", "seed": 4})"));
  EXPECT_NE(c.hash(), before);
}

TEST(Run, ValidateBundledOuPasses) {
  const auto dir = scratch("validate");
  const std::string text = R"({"command": "validate", "model": "ou_n2.json"})";
  const Outcome o = run_text(text, dir.string());
  EXPECT_EQ(o.code, kExitOk) << o.err;
  const auto ls = lines(o.csv);
  ASSERT_GE(ls.size(), 6u);
  EXPECT_EQ(ls[0], "# config-hash " + hex64(parse_config(text, kData).hash()));
  EXPECT_EQ(ls[1], "condition,pass,automatic,worst,detail");
  for (std::size_t i = 2; i < ls.size(); ++i) EXPECT_NE(ls[i].find(",1,"), std::string::npos) << ls[i];
}

TEST(Run, ValidateFailureExitsTwo) {
  const auto dir = scratch("validate_bad");
  std::ofstream(dir / "bad.json") << R"({"dim": 2, "b": [[0.5, 0], [0, 0.5]], "B": {"lyapunov": [[-0.5, 0], [0, -0.5]]},
    "m": [{"w": 2, "xi": [[0.3, 0.1], [0.1, 0.2]]}]})";
  const Outcome o = run_text(R"({"command": "validate", "model": ")" + (dir / "bad.json").string() + R"("})",
                             dir.string());
  EXPECT_EQ(o.code, kExitValidation);
  EXPECT_NE(o.csv.find("(ii) b - I_m in cone,0"), std::string::npos);
  // Commands that need an admissible model refuse it with a structured error.
  const Outcome r = run_text(R"({"command": "riccati", "model": ")" + (dir / "bad.json").string() + R"("})",
                             dir.string());
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_NE(r.err.find(R"("error":"NotValidated")"), std::string::npos) << r.err;
}

TEST(Run, RiccatiZeroArgumentIsZero) {
  const auto dir = scratch("riccati");
  const Outcome o = run_text(
      R"({"command": "riccati", "model": "mu_n2.json", "options": {"u": [[0, 0], [0, 0]], "times": [0, 0.5, 1, 3]}})",
      dir.string());
  ASSERT_EQ(o.code, kExitOk) << o.err;
  const auto ls = lines(o.csv);
  ASSERT_EQ(ls.size(), 6u);
  EXPECT_EQ(ls[1], "t,phi,psi_0,psi_1,psi_2");
  const std::vector<std::string> t{"0", "0.5", "1", "3"};
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(ls[i + 2], t[i] + ",0,0,0,0");
}

TEST(Run, SimulateIsByteIdenticalAcrossThreadCounts) {
  const std::string text =
      R"({"command": "simulate", "model": "mu_n2.json", "seed": 5, "options": {"times": [0.5, 1], "n_paths": 400}})";
  const auto dir = scratch("simulate");
  set_thread_count(1);
  const Outcome a = run_text(text, (dir / "a").string());
  set_thread_count(3);
  const Outcome b = run_text(text, (dir / "b").string());
  const Outcome c = run_text(text, (dir / "c").string());
  set_thread_count(1);
  ASSERT_EQ(a.code, kExitOk) << a.err;
  EXPECT_EQ(a.csv, b.csv);
  EXPECT_EQ(a.csv, c.csv);
  EXPECT_EQ(lines(a.csv)[1], "t,quantity,i,j,value,se");
}

TEST(Run, WdistBetweenShiftedClouds) {
  const auto dir = scratch("wdist");
  {
    std::ofstream a(dir / "a.csv"), b(dir / "b.csv");
    a << "x,y,z\n";
    b << "x,y,z\n";
    for (int i = 0; i < 16; ++i) {
      a << i * 0.1 << "," << (i % 4) * 0.2 << ",0\n";
      b << i * 0.1 + 0.3 << "," << (i % 4) * 0.2 << ",0.4\n";
    }
  }
  const Outcome o = run_text(R"({"command": "wdist", "options": {"a": ")" + (dir / "a.csv").string() + R"(", "b": ")" +
                                 (dir / "b.csv").string() + R"(", "n_boot": 5}})",
                             dir.string());
  ASSERT_EQ(o.code, kExitOk) << o.err;
  const auto ls = lines(o.csv);
  ASSERT_EQ(ls.size(), 3u);
  const std::string dist = ls[2].substr(ls[2].find("exact,") + 6);
  // A pure translation by (0.3, 0, 0.4) is optimal in W_2: distance 0.5.
  EXPECT_NEAR(std::stod(dist.substr(0, dist.find(','))), 0.5, 1e-12);
}

TEST(Run, SmileCsvHeader) {
  const auto dir = scratch("smile");
  const Outcome o = run_text(
      R"({"command": "smile", "model": "bns_desk.json", "seed": 2,
          "options": {"taus": [1, 4], "log_strikes": [0], "n_outer": 50}})",
      dir.string());
  ASSERT_EQ(o.code, kExitOk) << o.err;
  const auto ls = lines(o.csv);
  ASSERT_EQ(ls.size(), 5u);
  EXPECT_EQ(ls[1], "tau,T,T_hat,K,price,iv,se");
  EXPECT_EQ(ls[4].rfind("inf,", 0), 0u) << ls[4];
}

TEST(Run, NonSubcriticalModelIsAValidationFailure) {
  const auto dir = scratch("stationary_bad");
  std::ofstream(dir / "flat.json") << R"({"dim": 1, "b": [[1]], "B": [[0]]})";
  const Outcome o = run_text(R"({"command": "stationary", "model": ")" + (dir / "flat.json").string() + R"("})",
                             dir.string());
  EXPECT_EQ(o.code, kExitValidation);
  EXPECT_NE(o.err.find("NotSubcritical"), std::string::npos) << o.err;
  EXPECT_FALSE(fs::exists(dir / "stationary.csv"));
}
