#include "probs/agents.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace probs::agents {
namespace {

int pick_index(std::span<const double> weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  std::uniform_real_distribution<double> u(0.0, total);
  const double x = u(rng);
  double acc = 0.0;
  int last = -1;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last = static_cast<int>(i);
    if (x < acc) return last;
  }
  return last;
}

template <typename T>
const T& uniform_pick(const std::vector<T>& xs, Rng& rng) {
  std::uniform_int_distribution<std::size_t> d(0, xs.size() - 1);
  return xs[d(rng)];
}

}  // namespace

void ExplorationParams::validate() const {
  if (!(epsilon >= 0.0F && epsilon <= 1.0F)) throw std::invalid_argument("epsilon must lie in [0, 1]");
  if (!(alpha > 0.0F)) throw std::invalid_argument("alpha must be positive");
}

std::vector<double> softmax_over_valid(std::span<const float> q_values, std::uint32_t valid_mask) {
  std::vector<double> p(q_values.size(), 0.0);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < q_values.size(); ++a) {
    if (valid_mask >> a & 1U) mx = std::max(mx, static_cast<double>(q_values[a]));
  }
  double z = 0.0;
  for (std::size_t a = 0; a < q_values.size(); ++a) {
    if (!(valid_mask >> a & 1U)) continue;
    p[a] = std::exp(static_cast<double>(q_values[a]) - mx);
    z += p[a];
  }
  for (double& x : p) x /= z;
  return p;
}

std::vector<double> sample_dirichlet(std::uint32_t valid_mask, int columns, double alpha, Rng& rng) {
  std::vector<double> eta(columns, 0.0);
  std::gamma_distribution<double> gamma(alpha, 1.0);
  double total = 0.0;
  int valid = 0;
  for (int a = 0; a < columns; ++a) {
    if (!(valid_mask >> a & 1U)) continue;
    eta[a] = gamma(rng);
    total += eta[a];
    ++valid;
  }
  for (int a = 0; a < columns; ++a) {
    if (!(valid_mask >> a & 1U)) continue;
    // All draws can underflow for tiny alpha; fall back to uniform.
    eta[a] = total > 0.0 ? eta[a] / total : 1.0 / valid;
  }
  return eta;
}

Action sample_probs_action(std::span<const float> q_values, std::uint32_t valid_mask,
                           const ExplorationParams& xp, Rng& rng) {
  if (valid_mask == 0) throw ContractViolation("sample_probs_action: no valid action");
  std::vector<double> p = softmax_over_valid(q_values, valid_mask);
  if (xp.epsilon > 0.0F) {
    const auto eta = sample_dirichlet(valid_mask, static_cast<int>(q_values.size()), xp.alpha, rng);
    const double eps = xp.epsilon;
    for (std::size_t a = 0; a < p.size(); ++a) p[a] = (1.0 - eps) * p[a] + eps * eta[a];
  }
  return Action{pick_index(p, rng)};
}

Action greedy_action(std::span<const float> q_values, std::uint32_t valid_mask) {
  if (valid_mask == 0) throw ContractViolation("greedy_action: no valid action");
  int best = -1;
  for (std::size_t a = 0; a < q_values.size(); ++a) {
    if (!(valid_mask >> a & 1U)) continue;
    if (best < 0 || q_values[a] > q_values[best]) best = static_cast<int>(a);
  }
  return Action{best};
}

Action random_action(const GameState& s, Rng& rng) {
  const auto actions = valid_actions(s);
  if (actions.empty()) throw ContractViolation("random_action on a terminal state");
  return uniform_pick(actions, rng);
}

bool forced_win(const GameState& s, int plies) {
  if (plies <= 0 || s.is_terminal()) return false;
  const int cols = s.cols();
  for (int c = 0; c < cols; ++c) {
    if (s.height(c) < s.rows() && apply_action(s, Action{c}).reward == 1) return true;
  }
  if (plies < 3) return false;
  for (int c = 0; c < cols; ++c) {
    if (s.height(c) >= s.rows()) continue;
    const StepResult mine = apply_action(s, Action{c});
    if (mine.done) continue;
    const GameState& after = mine.next_state;
    bool every_reply_loses = true;
    for (int b = 0; b < cols && every_reply_loses; ++b) {
      if (after.height(b) >= after.rows()) continue;
      const StepResult theirs = apply_action(after, Action{b});
      every_reply_loses = !theirs.done && forced_win(theirs.next_state, plies - 2);
    }
    if (every_reply_loses) return true;
  }
  return false;
}

std::vector<ClassifiedMove> classify_moves(const GameState& s, int depth) {
  if (depth < 1) throw std::invalid_argument("lookahead depth must be >= 1");
  std::vector<ClassifiedMove> out;
  for (Action a : valid_actions(s)) {
    const StepResult r = apply_action(s, a);
    MoveClass cls = MoveClass::kUnknown;
    if (r.reward == 1) {
      cls = MoveClass::kWin;
    } else if (!r.done) {
      const GameState& after = r.next_state;
      bool forces = depth >= 3;
      for (Action b : forces ? valid_actions(after) : std::vector<Action>{}) {
        const StepResult reply = apply_action(after, b);
        if (reply.done || !forced_win(reply.next_state, depth - 2)) {
          forces = false;
          break;
        }
      }
      if (forces) {
        cls = MoveClass::kWin;
      } else if (forced_win(after, depth - 1)) {
        cls = MoveClass::kLoss;
      }
    }
    out.push_back(ClassifiedMove{a, cls});
  }
  return out;
}

Action lookahead_action(const GameState& s, int depth, Rng& rng) {
  const auto moves = classify_moves(s, depth);
  if (moves.empty()) throw ContractViolation("lookahead_action on a terminal state");
  for (MoveClass want : {MoveClass::kWin, MoveClass::kUnknown, MoveClass::kLoss}) {
    std::vector<Action> pool;
    for (const auto& m : moves) {
      if (m.cls == want) pool.push_back(m.action);
    }
    if (!pool.empty()) return uniform_pick(pool, rng);
  }
  return moves.front().action;
}

LookaheadAgent::LookaheadAgent(int depth) : depth_(depth) {
  if (depth < 1 || depth > 3) throw std::invalid_argument("lookahead depth must be 1, 2 or 3");
}

Action GreedyQAgent::act(const GameState& s, Rng& /*rng*/) const {
  std::array<float, kMaxActions> q{};
  q_->evaluate(s, std::span<float>(q.data(), s.cols()));
  return greedy_action(std::span<const float>(q.data(), s.cols()), valid_mask(s));
}

Action SampleQAgent::act(const GameState& s, Rng& rng) const {
  std::array<float, kMaxActions> q{};
  q_->evaluate(s, std::span<float>(q.data(), s.cols()));
  return sample_probs_action(std::span<const float>(q.data(), s.cols()), valid_mask(s), xp_, rng);
}

std::unique_ptr<Agent> make_baseline(std::string_view name) {
  if (name == "random") return std::make_unique<RandomAgent>();
  if (name == "lookahead1") return std::make_unique<LookaheadAgent>(1);
  if (name == "lookahead2") return std::make_unique<LookaheadAgent>(2);
  if (name == "lookahead3") return std::make_unique<LookaheadAgent>(3);
  throw std::invalid_argument("unknown baseline '" + std::string(name) + "'");
}

}  // namespace probs::agents
