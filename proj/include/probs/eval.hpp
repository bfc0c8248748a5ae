#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "probs/agents.hpp"
#include "probs/games.hpp"

namespace probs::eval {

struct MatchResult {
  std::string player_a;
  std::string player_b;
  int games = 0;
  int wins_a = 0;
  int draws = 0;
  int wins_b = 0;

  /// Points for a, draws counting one half.
  double points_a() const { return wins_a + 0.5 * draws; }
  double score_a() const { return games == 0 ? 0.0 : points_a() / games; }
};

/// Plays `games` (must be even) games, a moving first in games 0, 2, 4, ...
/// Game i uses an rng derived from (seed, i), so the result is independent of
/// the worker count.
MatchResult play_match(const agents::Agent& a, const agents::Agent& b, int games, Variant variant,
                       std::uint64_t seed, int workers = 1);

/// Logistic Elo expectation of a scoring against b.
double expected_score(double r_a, double r_b);

inline constexpr double kAnchorRating = 1000.0;
inline constexpr double kClampRange = 1200.0;

struct RatingTable {
  std::map<std::string, double> ratings;
  std::string anchor = "random";
  /// Players whose maximum-likelihood rating diverged (all wins or all losses)
  /// and were pinned to anchor +/- kClampRange.
  std::vector<std::string> clamped;

  double at(const std::string& id) const;
  bool contains(const std::string& id) const { return ratings.count(id) != 0; }
};

/// Maximum-likelihood ratings under the logistic model with `fixed` players
/// held at their given ratings. Solved by per-player Newton coordinate ascent
/// until the largest log-likelihood gradient is below 1e-6 per Elo point.
/// Throws std::invalid_argument naming any player with no path of games to a
/// fixed player.
RatingTable fit_ratings_fixed(const std::vector<MatchResult>& results,
                              const std::map<std::string, double>& fixed, const std::string& anchor);

/// fit_ratings_fixed with only the anchor pinned.
RatingTable fit_ratings(const std::vector<MatchResult>& results, const std::string& anchor = "random",
                        double anchor_rating = kAnchorRating);

/// Round robin over `baselines` (every unordered pair once).
std::vector<MatchResult> round_robin(const std::vector<std::string>& baselines, int games_per_pair,
                                     Variant variant, std::uint64_t seed, int workers = 1);

struct CheckpointRating {
  double rating = kAnchorRating;
  bool clamped = false;
  int games = 0;
  std::vector<MatchResult> matches;  // checkpoint is player_a

  std::optional<double> score_vs(const std::string& baseline) const;
};

/// Plays `games_per_rung` games against each listed baseline and returns the
/// checkpoint's rating with the ladder's ratings held fixed.
CheckpointRating rate_checkpoint(const agents::Agent& checkpoint, const RatingTable& ladder,
                                 const std::vector<std::string>& baselines, int games_per_rung,
                                 Variant variant, std::uint64_t seed, int workers = 1);

nlohmann::json ladder_to_json(const RatingTable& t);
RatingTable ladder_from_json(const nlohmann::json& j);

inline constexpr const char* kEloCsvHeader =
    "iteration,rating,games,score_vs_random,score_vs_l1,score_vs_l2,score_vs_l3";

/// One CSV row; baselines that were not played leave their column empty.
std::string elo_csv_row(int iteration, const CheckpointRating& r);

/// Appends a row, writing the header first when the file is new or empty.
void append_elo_csv(const std::filesystem::path& path, int iteration, const CheckpointRating& r);

}  // namespace probs::eval
