#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "probs/agents.hpp"
#include "probs/checkpoint.hpp"
#include "probs/games.hpp"
#include "probs/nn.hpp"
#include "probs/search.hpp"

namespace probs::training {

struct TrainConfig {
  Variant variant = Variant::kConnectFour;
  nn::NetSize net = nn::NetSize::kSmall;
  int n_iter = 1;
  int n_episodes = 1;
  int n_turns = 100;
  search::SearchBudget budget{30, 3};
  std::size_t capacity = 100000;
  float epsilon = 0.25F;
  float alpha = 0.5F;
  float lr_v = 0.003F;
  float lr_q = 0.003F;
  int batch_size = 128;
  int v_epochs = 1;  // shuffled passes over D_V per iteration
  int q_epochs = 1;  // and over D_Q
  nn::OptimizerKind optimizer = nn::OptimizerKind::kSgd;
  std::uint64_t seed = 0;
  int workers = 1;

  /// Throws std::invalid_argument naming the first bad field.
  void validate() const;
  agents::ExplorationParams exploration() const { return {epsilon, alpha}; }
};

/// One self-play game. `final_reward` is the outcome from the perspective of
/// the side to move in the last stored state: -1 after a decisive final move
/// (the mover there has just lost), 0 for draws and truncated games.
struct Episode {
  std::vector<GameState> states;
  std::vector<int> actions;
  int final_reward = 0;
  bool truncated = false;
};

/// Whole-episode FIFO store bounded by total stored states.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 100000) : capacity_(capacity) {}

  /// Evicts the oldest episodes until the new one fits. An episode larger
  /// than the capacity is rejected with std::invalid_argument.
  void add(Episode ep);
  void clear();

  const std::deque<Episode>& episodes() const { return episodes_; }
  std::size_t state_count() const { return states_; }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return episodes_.empty(); }

 private:
  std::size_t capacity_;
  std::size_t states_ = 0;
  std::deque<Episode> episodes_;
};

struct ValueTarget {
  GameState state;
  float target = 0.0F;
};

struct QTarget {
  GameState state;
  std::vector<search::ActionValue> q;
};

/// Self-play with sample_probs_action for both sides, stopping at a terminal
/// state or after n_turns moves.
Episode play_episode(const nn::QNet& q, int n_turns, const agents::ExplorationParams& xp, Rng& rng,
                     Variant variant);

/// Target for s_T is final_reward; walking backwards the sign alternates.
std::vector<ValueTarget> assign_returns(const Episode& ep);

/// One beam search per stored non-terminal state, in (episode, state) order.
std::vector<QTarget> build_q_dataset(const ReplayBuffer& buffer, const nn::ValueNet& v, const nn::QNet& q,
                                     search::SearchBudget budget, int workers = 1);

nn::Batch make_value_batch(const std::vector<ValueTarget>& data, std::span<const std::size_t> idx,
                           int input_size);
nn::Batch make_q_batch(const std::vector<QTarget>& data, std::span<const std::size_t> idx, int input_size,
                       int actions);

struct IterationMetrics {
  int iteration = 0;
  double v_loss = 0.0;
  double q_loss = 0.0;
  int episodes = 0;
  double mean_episode_length = 0.0;
  int decisive = 0;
  int truncated = 0;
  std::size_t value_samples = 0;
  std::size_t q_samples = 0;
  double self_play_seconds = 0.0;
  double v_train_seconds = 0.0;
  double q_targets_seconds = 0.0;
  double q_train_seconds = 0.0;

  nlohmann::json to_json() const;
};

/// Owns V, Q, their optimizers and the iteration counter. All randomness is
/// derived from (seed, iteration, ...), so a restored trainer continues
/// exactly as an uninterrupted one.
class Trainer {
 public:
  explicit Trainer(TrainConfig cfg);

  /// Runs the next iteration: self-play, V epoch, Q targets with the updated V
  /// and pre-iteration Q, Q epoch, buffer clear.
  IterationMetrics run_iteration();

  int iteration() const { return iteration_; }
  const TrainConfig& config() const { return cfg_; }
  const nn::ValueNet& value_net() const { return v_; }
  const nn::QNet& q_net() const { return q_; }
  nn::ValueNet& value_net() { return v_; }
  nn::QNet& q_net() { return q_; }
  const ReplayBuffer& buffer() const { return buffer_; }

  Checkpoint snapshot() const;
  /// Restores networks, optimizer state and counters. The checkpoint must
  /// match this trainer's architecture and seed.
  void restore(const Checkpoint& c);

 private:
  TrainConfig cfg_;
  nn::ValueNet v_;
  nn::QNet q_;
  nn::Optimizer opt_v_;
  nn::Optimizer opt_q_;
  ReplayBuffer buffer_;
  int iteration_ = 0;
};

/// Mean self-play episode length (moves) of `episodes` games with the given Q.
double mean_self_play_length(const nn::QNet& q, const TrainConfig& cfg, int episodes, std::uint64_t seed);

}  // namespace probs::training
