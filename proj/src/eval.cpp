#include "probs/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

#include "probs/parallel.hpp"
#include "probs/rng.hpp"

namespace probs::eval {
namespace {

constexpr double kEloScale = 2.302585092994046 / 400.0;  // ln(10) / 400
constexpr double kGradientTolerance = 1e-6;
constexpr int kMaxRounds = 100000;

// +1 if the first mover won, -1 if the second won, 0 for a draw.
int play_game(const agents::Agent& first, const agents::Agent& second, Variant variant, Rng& rng) {
  GameState s = new_game(variant);
  const agents::Agent* movers[2] = {&first, &second};
  for (int turn = 0;; ++turn) {
    const Action a = movers[turn % 2]->act(s, rng);
    StepResult r = apply_action(s, a);
    if (r.done) return r.reward == 0 ? 0 : (turn % 2 == 0 ? 1 : -1);
    s = std::move(r.next_state);
  }
}

struct PairStats {
  double games = 0.0;
  double points = 0.0;  // for the lexicographically smaller id
};

}  // namespace

MatchResult play_match(const agents::Agent& a, const agents::Agent& b, int games, Variant variant,
                       std::uint64_t seed, int workers) {
  if (games <= 0 || games % 2 != 0) throw std::invalid_argument("play_match: games must be positive and even");
  std::vector<int> outcome(games);  // from a's perspective
  parallel_for(static_cast<std::size_t>(games), workers, [&](std::size_t i) {
    Rng rng = make_rng(seed, {i});
    const bool a_first = i % 2 == 0;
    const int first_result = a_first ? play_game(a, b, variant, rng) : play_game(b, a, variant, rng);
    outcome[i] = a_first ? first_result : -first_result;
  });
  MatchResult m{a.name(), b.name(), games, 0, 0, 0};
  for (int o : outcome) {
    if (o > 0) ++m.wins_a;
    else if (o < 0) ++m.wins_b;
    else ++m.draws;
  }
  return m;
}

// The weaker side is computed as the complement so that both directions sum
// to exactly 1 (1 - p is exact for p >= 0.5).
double expected_score(double r_a, double r_b) {
  if (r_a < r_b) return 1.0 - expected_score(r_b, r_a);
  return 1.0 / (1.0 + std::pow(10.0, (r_b - r_a) / 400.0));
}

double RatingTable::at(const std::string& id) const {
  auto it = ratings.find(id);
  if (it == ratings.end()) throw std::out_of_range("no rating for '" + id + "'");
  return it->second;
}

RatingTable fit_ratings_fixed(const std::vector<MatchResult>& results,
                              const std::map<std::string, double>& fixed, const std::string& anchor) {
  if (!fixed.count(anchor)) throw std::invalid_argument("anchor '" + anchor + "' is not among fixed ratings");
  std::map<std::pair<std::string, std::string>, PairStats> pairs;
  std::set<std::string> players;
  for (const auto& [id, r] : fixed) players.insert(id);
  for (const auto& m : results) {
    if (m.games <= 0) continue;
    if (m.player_a == m.player_b) continue;  // self-play carries no rating information
    players.insert(m.player_a);
    players.insert(m.player_b);
    const bool a_low = m.player_a < m.player_b;
    auto& ps = pairs[a_low ? std::make_pair(m.player_a, m.player_b) : std::make_pair(m.player_b, m.player_a)];
    ps.games += m.games;
    ps.points += a_low ? m.points_a() : m.games - m.points_a();
  }

  std::map<std::string, std::vector<std::string>> adj;
  for (const auto& [k, ps] : pairs) {
    adj[k.first].push_back(k.second);
    adj[k.second].push_back(k.first);
  }
  std::set<std::string> reached;
  std::vector<std::string> frontier;
  for (const auto& [id, r] : fixed) {
    reached.insert(id);
    frontier.push_back(id);
  }
  while (!frontier.empty()) {
    const std::string cur = frontier.back();
    frontier.pop_back();
    for (const auto& n : adj[cur]) {
      if (reached.insert(n).second) frontier.push_back(n);
    }
  }
  for (const auto& p : players) {
    if (!reached.count(p)) {
      throw std::invalid_argument("rating graph is disconnected: '" + p + "' has no games linking it to '" +
                                  anchor + "'");
    }
  }

  const double base = fixed.at(anchor);
  const double lo = base - kClampRange;
  const double hi = base + kClampRange;
  RatingTable t;
  t.anchor = anchor;
  std::vector<std::string> free_players;
  for (const auto& p : players) {
    auto it = fixed.find(p);
    t.ratings[p] = it != fixed.end() ? it->second : base;
    if (it == fixed.end()) free_players.push_back(p);
  }

  // Score-unit gradient and curvature of player p's log-likelihood.
  auto derivatives = [&](const std::string& p, double& grad, double& curv) {
    grad = 0.0;
    curv = 0.0;
    const double rp = t.ratings[p];
    for (const auto& [k, ps] : pairs) {
      const bool first = k.first == p;
      if (!first && k.second != p) continue;
      const std::string& q = first ? k.second : k.first;
      const double pts = first ? ps.points : ps.games - ps.points;
      const double e = expected_score(rp, t.ratings[q]);
      grad += pts - ps.games * e;
      curv += ps.games * e * (1.0 - e);
    }
  };

  for (int round = 0; round < kMaxRounds && !free_players.empty(); ++round) {
    double worst = 0.0;
    for (const auto& p : free_players) {
      double g = 0.0;
      double h = 0.0;
      derivatives(p, g, h);
      double& r = t.ratings[p];
      const bool pinned = (r <= lo && g < 0.0) || (r >= hi && g > 0.0);
      if (!pinned) worst = std::max(worst, std::abs(kEloScale * g));
      if (pinned || h <= 0.0) continue;
      const double step = std::clamp(g / (kEloScale * h), -400.0, 400.0);
      r = std::clamp(r + step, lo, hi);
    }
    if (worst < kGradientTolerance) break;
  }
  for (const auto& p : free_players) {
    const double r = t.ratings[p];
    if (r <= lo || r >= hi) t.clamped.push_back(p);
  }
  return t;
}

RatingTable fit_ratings(const std::vector<MatchResult>& results, const std::string& anchor, double anchor_rating) {
  return fit_ratings_fixed(results, {{anchor, anchor_rating}}, anchor);
}

std::vector<MatchResult> round_robin(const std::vector<std::string>& baselines, int games_per_pair,
                                     Variant variant, std::uint64_t seed, int workers) {
  std::vector<std::unique_ptr<agents::Agent>> agents;
  for (const auto& b : baselines) agents.push_back(agents::make_baseline(b));
  std::vector<MatchResult> out;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    for (std::size_t j = i + 1; j < agents.size(); ++j) {
      out.push_back(play_match(*agents[i], *agents[j], games_per_pair, variant, derive_seed(seed, {i, j}), workers));
    }
  }
  return out;
}

std::optional<double> CheckpointRating::score_vs(const std::string& baseline) const {
  for (const auto& m : matches) {
    if (m.player_b == baseline) return m.score_a();
  }
  return std::nullopt;
}

CheckpointRating rate_checkpoint(const agents::Agent& checkpoint, const RatingTable& ladder,
                                 const std::vector<std::string>& baselines, int games_per_rung,
                                 Variant variant, std::uint64_t seed, int workers) {
  if (baselines.empty()) throw std::invalid_argument("rate_checkpoint: no baselines");
  CheckpointRating out;
  std::map<std::string, double> fixed;
  fixed[ladder.anchor] = ladder.at(ladder.anchor);
  for (std::size_t i = 0; i < baselines.size(); ++i) {
    const auto opponent = agents::make_baseline(baselines[i]);
    fixed[baselines[i]] = ladder.at(baselines[i]);
    MatchResult m = play_match(checkpoint, *opponent, games_per_rung, variant, derive_seed(seed, {i}), workers);
    m.player_a = "checkpoint";
    out.games += m.games;
    out.matches.push_back(std::move(m));
  }
  const RatingTable fit = fit_ratings_fixed(out.matches, fixed, ladder.anchor);
  out.rating = fit.at("checkpoint");
  out.clamped = !fit.clamped.empty();
  return out;
}

nlohmann::json ladder_to_json(const RatingTable& t) {
  nlohmann::json j;
  j["anchor"] = t.anchor;
  j["ratings"] = t.ratings;
  j["clamped"] = t.clamped;
  return j;
}

RatingTable ladder_from_json(const nlohmann::json& j) {
  RatingTable t;
  t.anchor = j.at("anchor").get<std::string>();
  t.ratings = j.at("ratings").get<std::map<std::string, double>>();
  if (j.contains("clamped")) t.clamped = j.at("clamped").get<std::vector<std::string>>();
  if (!t.contains(t.anchor)) throw std::invalid_argument("ladder has no rating for its anchor");
  return t;
}

std::string elo_csv_row(int iteration, const CheckpointRating& r) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%d,%.2f,%d", iteration, r.rating, r.games);
  std::string row = buf;
  for (const char* b : {"random", "lookahead1", "lookahead2", "lookahead3"}) {
    row += ',';
    if (auto s = r.score_vs(b)) {
      std::snprintf(buf, sizeof buf, "%.4f", *s);
      row += buf;
    }
  }
  return row;
}

void append_elo_csv(const std::filesystem::path& path, int iteration, const CheckpointRating& r) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for appending");
  if (fresh) out << kEloCsvHeader << '\n';
  out << elo_csv_row(iteration, r) << '\n';
}

}  // namespace probs::eval
