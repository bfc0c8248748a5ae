#include "probs/search.hpp"

#include <array>
#include <cstdio>
#include <queue>
#include <stdexcept>

namespace probs::search {
namespace {

// Max-heap on priority; equal priorities pop in insertion (node index) order.
struct BeamOrder {
  bool operator()(const BeamItem& a, const BeamItem& b) const {
    if (a.priority != b.priority) return a.priority < b.priority;
    return a.node_index > b.node_index;
  }
};

float negamax(const GameState& s, const ValueFunction& v, int depth, int max_depth) {
  if (depth > max_depth) return v.value(s);
  float best = -std::numeric_limits<float>::infinity();
  for (Action a : valid_actions(s)) {
    const StepResult r = apply_action(s, a);
    const float child = r.done ? -static_cast<float>(r.reward) : negamax(r.next_state, v, depth + 1, max_depth);
    best = std::max(best, -child);
  }
  return best;
}

}  // namespace

void ValueFunction::values(std::span<const GameState* const> states, std::span<float> out) const {
  for (std::size_t i = 0; i < states.size(); ++i) out[i] = value(*states[i]);
}

void SearchBudget::validate() const {
  if (expansions < 1) throw std::invalid_argument("search budget: expansions must be >= 1");
  if (max_depth < 1) throw std::invalid_argument("search budget: max_depth must be >= 1");
}

std::vector<SearchNode> expand_tree(const GameState& root, const ActionValueFunction& q,
                                    SearchBudget budget, SearchTrace* trace) {
  budget.validate();
  if (root.is_terminal()) throw ContractViolation("beam search from a terminal state");

  std::vector<SearchNode> tree;
  tree.reserve(1 + static_cast<std::size_t>(std::min(budget.expansions, 4096)) * root.cols());
  tree.push_back(SearchNode{std::nullopt, root, -1, 0, -1, 0});

  std::priority_queue<BeamItem, std::vector<BeamItem>, BeamOrder> beam;
  beam.push(BeamItem{kInfinitePriority, 0, 0});

  std::array<float, kMaxActions> action_values{};
  for (int expand = 0; expand < budget.expansions && !beam.empty(); ++expand) {
    const BeamItem item = beam.top();
    beam.pop();
    if (trace != nullptr) trace->pops.push_back(item);

    const GameState state = tree[item.node_index].state;
    const bool enqueue = item.depth < budget.max_depth;
    // Priorities are only read for non-root parents whose children get enqueued.
    if (enqueue && item.depth > 0) q.q_values(state, action_values);

    const int first = static_cast<int>(tree.size());
    int count = 0;
    for (int c = 0; c < state.cols(); ++c) {
      if (state.height(c) >= state.rows()) continue;
      StepResult r = apply_action(state, Action{c});
      const int child = static_cast<int>(tree.size());
      SearchNode node{std::nullopt, std::move(r.next_state), -1, 0, c, item.depth + 1};
      if (r.done) {
        node.value = -static_cast<float>(r.reward);
      } else if (enqueue) {
        const float priority = item.depth == 0 ? kInfinitePriority : action_values[c];
        beam.push(BeamItem{priority, child, item.depth + 1});
      }
      tree.push_back(std::move(node));
      ++count;
    }
    tree[item.node_index].first_child = first;
    tree[item.node_index].num_children = count;
  }
  return tree;
}

void backfill(std::vector<SearchNode>& tree, const ValueFunction& v) {
  std::vector<const GameState*> leaves;
  std::vector<int> leaf_index;
  for (std::size_t i = 0; i < tree.size(); ++i) {
    if (!tree[i].value && tree[i].num_children == 0) {
      leaves.push_back(&tree[i].state);
      leaf_index.push_back(static_cast<int>(i));
    }
  }
  std::vector<float> leaf_values(leaves.size());
  v.values(leaves, leaf_values);
  for (std::size_t k = 0; k < leaf_index.size(); ++k) tree[leaf_index[k]].value = leaf_values[k];

  for (std::size_t i = tree.size(); i-- > 0;) {
    SearchNode& n = tree[i];
    if (n.value) continue;
    float best = -std::numeric_limits<float>::infinity();
    for (int c = n.first_child; c < n.first_child + n.num_children; ++c) {
      best = std::max(best, -*tree[c].value);
    }
    n.value = best;
  }
}

std::vector<ActionValue> root_q_values(const std::vector<SearchNode>& tree) {
  std::vector<ActionValue> out;
  const SearchNode& root = tree.front();
  out.reserve(root.num_children);
  for (int c = root.first_child; c < root.first_child + root.num_children; ++c) {
    out.push_back(ActionValue{Action{tree[c].action}, -tree[c].value.value()});
  }
  return out;
}

std::vector<ActionValue> beam_search(const GameState& s, const ValueFunction& v,
                                     const ActionValueFunction& q, SearchBudget budget,
                                     SearchTrace* trace) {
  auto tree = expand_tree(s, q, budget, trace);
  backfill(tree, v);
  return root_q_values(tree);
}

std::vector<ActionValue> exhaustive_negamax(const GameState& s, const ValueFunction& v, int max_depth) {
  if (s.is_terminal()) throw ContractViolation("negamax from a terminal state");
  std::vector<ActionValue> out;
  for (Action a : valid_actions(s)) {
    const StepResult r = apply_action(s, a);
    const float child = r.done ? -static_cast<float>(r.reward) : negamax(r.next_state, v, 1, max_depth);
    out.push_back(ActionValue{a, -child});
  }
  return out;
}

std::string dump_tree(const std::vector<SearchNode>& tree) {
  std::string out;
  if (tree.empty()) return out;
  char line[96];
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    const SearchNode& n = tree[i];
    out.append(static_cast<std::size_t>(2 * n.depth), ' ');
    if (n.value) {
      std::snprintf(line, sizeof line, "[%d] action=%d depth=%d value=%.6f\n", i, n.action, n.depth, *n.value);
    } else {
      std::snprintf(line, sizeof line, "[%d] action=%d depth=%d value=-\n", i, n.action, n.depth);
    }
    out += line;
    for (int c = n.first_child + n.num_children - 1; c >= n.first_child && n.num_children > 0; --c) {
      stack.push_back(c);
    }
  }
  return out;
}

}  // namespace probs::search
