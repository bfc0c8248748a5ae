#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "probs/eval.hpp"
#include "probs/training.hpp"

namespace probs::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitDivergence = 3,
  kExitCorruptCheckpoint = 4,
};

/// Invalid run configuration; the message names the offending field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct RunConfig {
  training::TrainConfig train;
  int eval_every = 1;
  int eval_games = 200;    // per baseline, must be even
  int ladder_games = 400;  // per baseline pair, must be even
  std::vector<std::string> eval_baselines{"random", "lookahead1", "lookahead2", "lookahead3"};
  std::filesystem::path output_dir = "run";

  nlohmann::json to_json() const;
};

/// Strict parse: every training field is required and unknown keys are
/// rejected. Optional keys: optimizer, workers, eval_every, eval_games,
/// ladder_games, eval_baselines, output_dir.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

/// Layout under output_dir:
///   config.json, ladder.json, metrics.jsonl, elo.csv, ckpt/iter_%05d.probs
std::filesystem::path checkpoint_path(const std::filesystem::path& run_dir, int iteration);

/// Fits the baseline ladder for a run, or loads `path` if it already exists.
eval::RatingTable ensure_ladder(const RunConfig& cfg, const std::filesystem::path& path);

struct TrainOptions {
  std::filesystem::path config;
  bool resume = false;
  bool dry_run = false;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::filesystem::path> output_dir;
};

struct EvalOptions {
  std::filesystem::path checkpoint;
  int games = 200;
  std::vector<std::string> baselines{"random", "lookahead1", "lookahead2", "lookahead3"};
  std::optional<std::filesystem::path> csv;
  std::optional<std::filesystem::path> ladder;
  int ladder_games = 400;
  std::uint64_t seed = 0;
  int workers = 1;
};

struct TournamentOptions {
  std::vector<std::string> baselines{"random", "lookahead1", "lookahead2", "lookahead3"};
  int games = 2000;
  Variant variant = Variant::kConnectFour;
  std::uint64_t seed = 0;
  int workers = 1;
  std::optional<std::filesystem::path> output;
};

struct PlayOptions {
  std::filesystem::path checkpoint;
  std::vector<int> moves;
  bool human_first = true;
  int expansions = 30;  // 0 plays straight from Q
  int max_depth = 3;
};

int cmd_train(const TrainOptions& opt, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalOptions& opt, std::ostream& out, std::ostream& err);
int cmd_tournament(const TournamentOptions& opt, std::ostream& out, std::ostream& err);
int cmd_play(const PlayOptions& opt, std::istream& in, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches to a subcommand.
int run_cli(int argc, char** argv);

}  // namespace probs::cli
