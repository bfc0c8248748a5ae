#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "probs/agents.hpp"
#include "probs/checkpoint.hpp"
#include "probs/eval.hpp"
#include "probs/games.hpp"
#include "probs/search.hpp"
#include "probs/training.hpp"

namespace py = pybind11;
using namespace probs;

namespace {

std::vector<std::pair<int, float>> as_pairs(const std::vector<search::ActionValue>& q) {
  std::vector<std::pair<int, float>> out;
  out.reserve(q.size());
  for (const auto& av : q) out.emplace_back(av.action.column, av.q);
  return out;
}

std::vector<int> columns(const std::vector<Action>& actions) {
  std::vector<int> out;
  for (Action a : actions) out.push_back(a.column);
  return out;
}

const char* player_char(Player p) {
  return p == Cell::kP1 ? "X" : p == Cell::kP2 ? "O" : "";
}

// Python callables are not safe to call from worker threads, so wrapped
// value functions always run single-threaded.
class PyValue final : public search::ValueFunction {
 public:
  explicit PyValue(py::function fn) : fn_(std::move(fn)) {}
  float value(const GameState& s) const override { return fn_(s).cast<float>(); }

 private:
  py::function fn_;
};

class PyQ final : public search::ActionValueFunction {
 public:
  explicit PyQ(py::function fn) : fn_(std::move(fn)) {}
  void q_values(const GameState& s, std::span<float> out) const override {
    const auto q = fn_(s).cast<std::vector<float>>();
    if (q.size() < static_cast<std::size_t>(s.cols())) throw std::invalid_argument("q function must score every column");
    std::fill(out.begin(), out.end(), 0.0F);
    std::copy_n(q.begin(), std::min(q.size(), out.size()), out.begin());
  }

 private:
  py::function fn_;
};

}  // namespace

PYBIND11_MODULE(_probs, m) {
  m.doc() = "Connect-K self-play core";

  py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_ValueError);
  py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_IOError);
  py::register_exception<nn::DivergenceError>(m, "DivergenceError", PyExc_ArithmeticError);

  py::enum_<Variant>(m, "Variant")
      .value("CONNECT_FOUR", Variant::kConnectFour)
      .value("CONNECT3_TEST", Variant::kConnect3Test);

  py::class_<GameState>(m, "GameState")
      .def_property_readonly("rows", &GameState::rows)
      .def_property_readonly("cols", &GameState::cols)
      .def_property_readonly("ply", &GameState::ply)
      .def_property_readonly("variant", &GameState::variant)
      .def_property_readonly("to_move", [](const GameState& s) { return player_char(s.to_move()); })
      .def_property_readonly("winner", [](const GameState& s) { return player_char(s.winner()); })
      .def("is_terminal", &GameState::is_terminal)
      .def("valid_actions", [](const GameState& s) { return columns(valid_actions(s)); })
      .def("play", [](const GameState& s, int col) {
        const auto r = apply_action(s, Action{col});
        return py::make_tuple(r.next_state, r.reward, r.done);
      }, py::arg("column"), "Returns (next_state, reward for the mover, done).")
      .def("encode", [](const GameState& s) { return encode(s).planes; })
      .def("__str__", [](const GameState& s) { return to_text(s); })
      .def("__eq__", [](const GameState& a, const GameState& b) { return a == b; })
      .def("__hash__", &GameState::hash);

  m.def("new_game", &new_game, py::arg("variant") = Variant::kConnectFour);
  m.def("from_text", [](const std::string& t, Variant v) { return from_text(t, v); }, py::arg("text"),
        py::arg("variant") = Variant::kConnectFour);
  m.def("play_moves", [](Variant v, const std::vector<int>& cols) { return play_moves(v, cols); },
        py::arg("variant"), py::arg("columns"));

  py::class_<nn::ValueNet>(m, "ValueNet")
      .def(py::init([](Variant v, const std::string& size, std::uint64_t seed) {
             return nn::ValueNet(v, nn::parse_net_size(size), seed);
           }),
           py::arg("variant") = Variant::kConnectFour, py::arg("size") = "small", py::arg("seed") = 0)
      .def("__call__", &nn::ValueNet::evaluate)
      .def_property_readonly("parameter_count", [](const nn::ValueNet& n) { return n.params().size(); });

  py::class_<nn::QNet>(m, "QNet")
      .def(py::init([](Variant v, const std::string& size, std::uint64_t seed) {
             return nn::QNet(v, nn::parse_net_size(size), seed);
           }),
           py::arg("variant") = Variant::kConnectFour, py::arg("size") = "small", py::arg("seed") = 0)
      .def("__call__", [](const nn::QNet& n, const GameState& s) { return n.evaluate(s); })
      .def_property_readonly("parameter_count", [](const nn::QNet& n) { return n.params().size(); });

  m.def("load_networks", [](const std::filesystem::path& path) {
    const Checkpoint c = read_checkpoint(path);
    return py::make_tuple(nn::ValueNet(c.network("value")), nn::QNet(c.network("q")), c.meta.dump());
  }, py::arg("path"), "Returns (value_net, q_net, meta_json) from a checkpoint file.");

  m.def("beam_search", [](const GameState& s, const nn::ValueNet& v, const nn::QNet& q, int expansions,
                          int max_depth) {
    return as_pairs(search::beam_search(s, search::NetValue(v), search::NetQ(q), {expansions, max_depth}));
  }, py::arg("state"), py::arg("value_net"), py::arg("q_net"), py::arg("expansions") = 30, py::arg("max_depth") = 3);

  m.def("beam_search_fn", [](const GameState& s, py::function v, py::function q, int expansions, int max_depth) {
    return as_pairs(search::beam_search(s, PyValue(std::move(v)), PyQ(std::move(q)), {expansions, max_depth}));
  }, py::arg("state"), py::arg("value"), py::arg("q"), py::arg("expansions") = 30, py::arg("max_depth") = 3,
     "Beam search with Python callables for V(state) and Q(state) -> list of per-column scores.");

  m.def("lookahead_action", [](const GameState& s, int depth, std::uint64_t seed) {
    Rng rng(seed);
    return agents::lookahead_action(s, depth, rng).column;
  }, py::arg("state"), py::arg("depth"), py::arg("seed") = 0);

  m.def("greedy_action", [](const nn::QNet& q, const GameState& s) {
    Rng unused(0);
    return agents::GreedyQAgent(q).act(s, unused).column;
  }, py::arg("q_net"), py::arg("state"));

  m.def("expected_score", &eval::expected_score, py::arg("r_a"), py::arg("r_b"));

  m.def("baseline_match", [](const std::string& a, const std::string& b, int games, Variant v,
                             std::uint64_t seed) {
    const auto pa = agents::make_baseline(a);
    const auto pb = agents::make_baseline(b);
    const auto r = eval::play_match(*pa, *pb, games, v, seed);
    return py::make_tuple(r.wins_a, r.draws, r.wins_b);
  }, py::arg("a"), py::arg("b"), py::arg("games"), py::arg("variant") = Variant::kConnectFour, py::arg("seed") = 0,
     "Returns (wins_a, draws, wins_b).");

  m.def("fit_ratings", [](const std::vector<std::tuple<std::string, std::string, int, int, int>>& records) {
    std::vector<eval::MatchResult> results;
    for (const auto& [a, b, wa, d, wb] : records) results.push_back({a, b, wa + d + wb, wa, d, wb});
    return eval::fit_ratings(results).ratings;
  }, py::arg("records"), "records: (a, b, wins_a, draws, wins_b); random is anchored at 1000.");

  py::class_<training::Trainer>(m, "Trainer")
      .def(py::init([](const std::string& config_json) {
             const auto j = nlohmann::json::parse(config_json);
             training::TrainConfig c;
             c.variant = parse_variant(j.value("game", std::string("connect_four")));
             c.net = nn::parse_net_size(j.value("network", std::string("small")));
             c.n_episodes = j.value("n_episodes", c.n_episodes);
             c.n_turns = j.value("n_turns", c.n_turns);
             c.budget.expansions = j.value("expansions", c.budget.expansions);
             c.budget.max_depth = j.value("max_depth", c.budget.max_depth);
             c.capacity = j.value("capacity", c.capacity);
             c.epsilon = j.value("epsilon", c.epsilon);
             c.alpha = j.value("alpha", c.alpha);
             c.lr_v = j.value("lr_v", c.lr_v);
             c.lr_q = j.value("lr_q", c.lr_q);
             c.batch_size = j.value("batch_size", c.batch_size);
             c.v_epochs = j.value("v_epochs", c.v_epochs);
             c.q_epochs = j.value("q_epochs", c.q_epochs);
             c.optimizer = nn::parse_optimizer(j.value("optimizer", std::string("sgd")));
             c.seed = j.value("seed", c.seed);
             c.workers = j.value("workers", c.workers);
             c.validate();
             return training::Trainer(c);
           }),
           py::arg("config_json") = "{}")
      .def("run_iteration", [](training::Trainer& t) {
        py::gil_scoped_release nogil;
        return t.run_iteration().to_json().dump();
      }, "Runs one iteration and returns its metrics as a JSON string.")
      .def_property_readonly("iteration", &training::Trainer::iteration)
      .def_property_readonly("value_net", [](const training::Trainer& t) { return t.value_net(); })
      .def_property_readonly("q_net", [](const training::Trainer& t) { return t.q_net(); })
      .def("save", [](const training::Trainer& t, const std::filesystem::path& p) {
        write_checkpoint(p, t.snapshot());
      }, py::arg("path"))
      .def("load", [](training::Trainer& t, const std::filesystem::path& p) { t.restore(read_checkpoint(p)); },
           py::arg("path"));
}
