#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "probs/games.hpp"
#include "probs/nn.hpp"

namespace probs::search {

/// State-value estimator used at the search frontier: V(s) from the side to
/// move's perspective.
class ValueFunction {
 public:
  virtual ~ValueFunction() = default;
  virtual float value(const GameState& s) const = 0;
  /// Batched form; the default loops over value().
  virtual void values(std::span<const GameState* const> states, std::span<float> out) const;
};

/// Per-column scores used as expansion priorities: Q(s, ·).
class ActionValueFunction {
 public:
  virtual ~ActionValueFunction() = default;
  /// `out` has one slot per column.
  virtual void q_values(const GameState& s, std::span<float> out) const = 0;
};

class NetValue final : public ValueFunction {
 public:
  explicit NetValue(const nn::ValueNet& net) : net_(&net) {}
  float value(const GameState& s) const override { return net_->evaluate(s); }

 private:
  const nn::ValueNet* net_;
};

class NetQ final : public ActionValueFunction {
 public:
  explicit NetQ(const nn::QNet& net) : net_(&net) {}
  void q_values(const GameState& s, std::span<float> out) const override { net_->evaluate(s, out); }

 private:
  const nn::QNet* net_;
};

class LambdaValue final : public ValueFunction {
 public:
  explicit LambdaValue(std::function<float(const GameState&)> fn) : fn_(std::move(fn)) {}
  float value(const GameState& s) const override { return fn_(s); }

 private:
  std::function<float(const GameState&)> fn_;
};

class LambdaQ final : public ActionValueFunction {
 public:
  explicit LambdaQ(std::function<void(const GameState&, std::span<float>)> fn) : fn_(std::move(fn)) {}
  void q_values(const GameState& s, std::span<float> out) const override { fn_(s, out); }

 private:
  std::function<void(const GameState&, std::span<float>)> fn_;
};

/// E: pop-and-expand steps. M: deepest level that may still be expanded.
struct SearchBudget {
  int expansions = 1;
  int max_depth = 1;

  /// Throws std::invalid_argument unless E >= 1 and M >= 1.
  void validate() const;
};

/// One tree entry. Children of a node occupy the contiguous index range
/// [first_child, first_child + num_children) and always follow their parent.
struct SearchNode {
  std::optional<float> value;
  GameState state;
  int first_child = -1;
  int num_children = 0;
  int action = -1;  // column that led here from the parent
  int depth = 0;
};

inline constexpr float kInfinitePriority = std::numeric_limits<float>::infinity();

struct BeamItem {
  float priority = 0.0F;
  int node_index = 0;
  int depth = 0;
};

struct ActionValue {
  Action action;
  float q = 0.0F;
};

/// Records the pop order of a search, for instrumentation.
struct SearchTrace {
  std::vector<BeamItem> pops;
};

/// Expansion phase only: builds the tree under the budget. Terminal children
/// get value = -reward at creation; everything else is left empty.
std::vector<SearchNode> expand_tree(const GameState& root, const ActionValueFunction& q,
                                    SearchBudget budget, SearchTrace* trace = nullptr);

/// Reverse pass: valueless childless nodes get V(state), internal nodes get
/// max over children of -child.value. Nodes that already hold a value keep it.
void backfill(std::vector<SearchNode>& tree, const ValueFunction& v);

/// (action, -child.value) for every child of tree[0].
std::vector<ActionValue> root_q_values(const std::vector<SearchNode>& tree);

/// Best-first beam search from `s`; returns a q-value for every valid action.
/// Throws ContractViolation on a terminal root.
std::vector<ActionValue> beam_search(const GameState& s, const ValueFunction& v,
                                     const ActionValueFunction& q, SearchBudget budget,
                                     SearchTrace* trace = nullptr);

/// Full-width negamax expanding every node at depth <= max_depth (root is
/// depth 0); deeper non-terminal nodes are valued by `v`. Same output contract
/// as beam_search.
std::vector<ActionValue> exhaustive_negamax(const GameState& s, const ValueFunction& v, int max_depth);

/// Indented text dump: one line per node with depth, action and value.
std::string dump_tree(const std::vector<SearchNode>& tree);

}  // namespace probs::search
