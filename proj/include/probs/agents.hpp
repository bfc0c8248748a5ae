#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "probs/games.hpp"
#include "probs/nn.hpp"
#include "probs/rng.hpp"

namespace probs::agents {

/// Mixing weight and symmetric Dirichlet concentration for self-play noise.
struct ExplorationParams {
  float epsilon = 0.25F;
  float alpha = 0.5F;

  void validate() const;
};

/// Softmax of `q_values` over the columns set in `valid_mask`; zero elsewhere.
std::vector<double> softmax_over_valid(std::span<const float> q_values, std::uint32_t valid_mask);

/// Draws eta ~ Dir(alpha) over the valid columns via normalized Gamma draws.
std::vector<double> sample_dirichlet(std::uint32_t valid_mask, int columns, double alpha, Rng& rng);

/// (1 - eps) * softmax(q) + eps * eta, restricted to valid columns, then one
/// draw from that distribution. Noise is resampled on every call.
Action sample_probs_action(std::span<const float> q_values, std::uint32_t valid_mask,
                           const ExplorationParams& xp, Rng& rng);

/// Argmax over valid columns; ties go to the lowest column.
Action greedy_action(std::span<const float> q_values, std::uint32_t valid_mask);

Action random_action(const GameState& s, Rng& rng);

/// True if the side to move can force a win within `plies` plies, its own
/// next move counting as the first.
bool forced_win(const GameState& s, int plies);

enum class MoveClass : std::uint8_t { kWin, kUnknown, kLoss };

struct ClassifiedMove {
  Action action;
  MoveClass cls;
};

/// Depth-n lookahead classification of every valid move, the move itself being
/// ply 1. A move is a Win if it forces a win within n plies, a Loss if the
/// opponent can then force a win within the remaining n - 1, else Unknown.
/// So depth 1 only spots immediate wins and depth 2 also dodges immediate losses.
std::vector<ClassifiedMove> classify_moves(const GameState& s, int depth);

/// Uniform among Wins, else among Unknowns, else among Losses.
Action lookahead_action(const GameState& s, int depth, Rng& rng);

/// A match participant. Implementations are immutable and may be shared
/// across threads; all randomness comes from the caller's rng.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual Action act(const GameState& s, Rng& rng) const = 0;
  virtual std::string name() const = 0;
};

class RandomAgent final : public Agent {
 public:
  Action act(const GameState& s, Rng& rng) const override { return random_action(s, rng); }
  std::string name() const override { return "random"; }
};

class LookaheadAgent final : public Agent {
 public:
  explicit LookaheadAgent(int depth);
  Action act(const GameState& s, Rng& rng) const override { return lookahead_action(s, depth_, rng); }
  std::string name() const override { return "lookahead" + std::to_string(depth_); }
  int depth() const { return depth_; }

 private:
  int depth_;
};

/// Evaluation-time policy: argmax of Q over valid columns.
class GreedyQAgent final : public Agent {
 public:
  GreedyQAgent(const nn::QNet& q, std::string name = "probs") : q_(&q), name_(std::move(name)) {}
  Action act(const GameState& s, Rng& rng) const override;
  std::string name() const override { return name_; }

 private:
  const nn::QNet* q_;
  std::string name_;
};

/// Self-play policy: Dirichlet-mixed softmax sampling over Q.
class SampleQAgent final : public Agent {
 public:
  SampleQAgent(const nn::QNet& q, ExplorationParams xp) : q_(&q), xp_(xp) {}
  Action act(const GameState& s, Rng& rng) const override;
  std::string name() const override { return "probs_sample"; }

 private:
  const nn::QNet* q_;
  ExplorationParams xp_;
};

/// "random" or "lookahead1".."lookahead3".
std::unique_ptr<Agent> make_baseline(std::string_view name);

}  // namespace probs::agents
