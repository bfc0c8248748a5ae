#include "probs/training.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <numeric>
#include <stdexcept>

#include "probs/parallel.hpp"
#include "probs/rng.hpp"

namespace probs::training {
namespace {

// Rng stream tags.
constexpr std::uint64_t kInitValue = 1;
constexpr std::uint64_t kInitQ = 2;
constexpr std::uint64_t kSelfPlay = 3;
constexpr std::uint64_t kShuffleValue = 4;
constexpr std::uint64_t kShuffleQ = 5;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int input_size_of(Variant v) {
  const GameShape g = shape_of(v);
  return 2 * g.rows * g.cols;
}

// Shuffled single pass over `n` samples in minibatches; returns the mean loss.
template <typename MakeBatch>
double run_epoch(std::size_t n, int batch_size, Rng rng, nn::ParameterSet& p, nn::Optimizer& opt,
                 MakeBatch&& make_batch) {
  if (n == 0) return 0.0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  double total = 0.0;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t len = std::min<std::size_t>(batch_size, n - start);
    const nn::Batch b = make_batch(std::span<const std::size_t>(order.data() + start, len));
    total += nn::train_batch(p, b, opt);
    ++batches;
  }
  return total / static_cast<double>(batches);
}

}  // namespace

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* field, const char* what) {
    if (!ok) throw std::invalid_argument(std::string(field) + ": " + what);
  };
  require(n_iter > 0, "n_iter", "must be positive");
  require(n_episodes > 0, "n_episodes", "must be positive");
  require(n_turns > 0, "n_turns", "must be positive");
  require(budget.expansions > 0, "expansions", "must be positive");
  require(budget.max_depth > 0, "max_depth", "must be positive");
  require(capacity > 0, "capacity", "must be positive");
  require(epsilon >= 0.0F && epsilon <= 1.0F, "epsilon", "must lie in [0, 1]");
  require(alpha > 0.0F, "alpha", "must be positive");
  require(lr_v > 0.0F, "lr_v", "must be positive");
  require(lr_q > 0.0F, "lr_q", "must be positive");
  require(batch_size > 0, "batch_size", "must be positive");
  require(v_epochs > 0, "v_epochs", "must be positive");
  require(q_epochs > 0, "q_epochs", "must be positive");
  require(workers > 0, "workers", "must be positive");
}

void ReplayBuffer::add(Episode ep) {
  const std::size_t n = ep.states.size();
  if (n > capacity_) throw std::invalid_argument("episode larger than replay capacity");
  while (states_ + n > capacity_) {
    states_ -= episodes_.front().states.size();
    episodes_.pop_front();
  }
  states_ += n;
  episodes_.push_back(std::move(ep));
}

void ReplayBuffer::clear() {
  episodes_.clear();
  states_ = 0;
}

Episode play_episode(const nn::QNet& q, int n_turns, const agents::ExplorationParams& xp, Rng& rng,
                     Variant variant) {
  Episode ep;
  GameState s = new_game(variant);
  ep.states.push_back(s);
  std::array<float, kMaxActions> qv{};
  bool done = false;
  int last_reward = 0;
  for (int t = 0; t < n_turns && !done; ++t) {
    q.evaluate(s, std::span<float>(qv.data(), s.cols()));
    const Action a = agents::sample_probs_action(std::span<const float>(qv.data(), s.cols()), valid_mask(s), xp, rng);
    StepResult r = apply_action(s, a);
    ep.actions.push_back(a.column);
    done = r.done;
    last_reward = r.reward;
    s = std::move(r.next_state);
    ep.states.push_back(s);
  }
  ep.truncated = !done;
  ep.final_reward = done ? -last_reward : 0;
  return ep;
}

std::vector<ValueTarget> assign_returns(const Episode& ep) {
  std::vector<ValueTarget> out;
  out.reserve(ep.states.size());
  const std::size_t last = ep.states.size() - 1;
  for (std::size_t t = 0; t < ep.states.size(); ++t) {
    const bool same_parity = (last - t) % 2 == 0;
    const int sign = same_parity ? 1 : -1;
    out.push_back(ValueTarget{ep.states[t], static_cast<float>(sign * ep.final_reward)});
  }
  return out;
}

std::vector<QTarget> build_q_dataset(const ReplayBuffer& buffer, const nn::ValueNet& v, const nn::QNet& q,
                                     search::SearchBudget budget, int workers) {
  std::vector<const GameState*> states;
  for (const auto& ep : buffer.episodes()) {
    for (const auto& s : ep.states) {
      if (!s.is_terminal()) states.push_back(&s);
    }
  }
  std::vector<QTarget> out(states.size());
  const search::NetValue value_fn(v);
  const search::NetQ q_fn(q);
  parallel_for(states.size(), workers, [&](std::size_t i) {
    out[i] = QTarget{*states[i], search::beam_search(*states[i], value_fn, q_fn, budget)};
  });
  return out;
}

nn::Batch make_value_batch(const std::vector<ValueTarget>& data, std::span<const std::size_t> idx,
                           int input_size) {
  nn::Batch b(input_size, 1);
  std::vector<float> x(input_size);
  const float one = 1.0F;
  for (std::size_t i : idx) {
    encode_channels_last(data[i].state, x);
    b.add(x, std::span<const float>(&data[i].target, 1), std::span<const float>(&one, 1));
  }
  return b;
}

nn::Batch make_q_batch(const std::vector<QTarget>& data, std::span<const std::size_t> idx, int input_size,
                       int actions) {
  nn::Batch b(input_size, actions);
  std::vector<float> x(input_size);
  std::vector<float> t(actions);
  std::vector<float> m(actions);
  for (std::size_t i : idx) {
    encode_channels_last(data[i].state, x);
    std::fill(t.begin(), t.end(), 0.0F);
    std::fill(m.begin(), m.end(), 0.0F);
    for (const auto& av : data[i].q) {
      t[av.action.column] = av.q;
      m[av.action.column] = 1.0F;
    }
    b.add(x, t, m);
  }
  return b;
}

nlohmann::json IterationMetrics::to_json() const {
  return nlohmann::json{{"iteration", iteration},
                        {"v_loss", v_loss},
                        {"q_loss", q_loss},
                        {"episodes", episodes},
                        {"mean_episode_length", mean_episode_length},
                        {"decisive", decisive},
                        {"truncated", truncated},
                        {"value_samples", value_samples},
                        {"q_samples", q_samples},
                        {"wallclock",
                         {{"self_play", self_play_seconds},
                          {"v_train", v_train_seconds},
                          {"q_targets", q_targets_seconds},
                          {"q_train", q_train_seconds}}}};
}

Trainer::Trainer(TrainConfig cfg)
    : cfg_(std::move(cfg)),
      v_(cfg_.variant, cfg_.net, derive_seed(cfg_.seed, {kInitValue})),
      q_(cfg_.variant, cfg_.net, derive_seed(cfg_.seed, {kInitQ})),
      opt_v_(cfg_.optimizer, cfg_.lr_v, v_.params().size()),
      opt_q_(cfg_.optimizer, cfg_.lr_q, q_.params().size()),
      buffer_(cfg_.capacity) {
  cfg_.validate();
}

IterationMetrics Trainer::run_iteration() {
  using clock = std::chrono::steady_clock;
  const int it = ++iteration_;
  const auto iter_key = static_cast<std::uint64_t>(it);
  IterationMetrics m;
  m.iteration = it;
  m.episodes = cfg_.n_episodes;

  auto t0 = clock::now();
  std::vector<Episode> episodes(cfg_.n_episodes);
  const auto xp = cfg_.exploration();
  parallel_for(episodes.size(), cfg_.workers, [&](std::size_t e) {
    Rng rng = make_rng(cfg_.seed, {kSelfPlay, iter_key, e});
    episodes[e] = play_episode(q_, cfg_.n_turns, xp, rng, cfg_.variant);
  });
  std::size_t moves = 0;
  for (auto& ep : episodes) {
    moves += ep.actions.size();
    m.truncated += ep.truncated ? 1 : 0;
    m.decisive += ep.final_reward != 0 ? 1 : 0;
    buffer_.add(std::move(ep));
  }
  m.mean_episode_length = static_cast<double>(moves) / cfg_.n_episodes;
  m.self_play_seconds = seconds_since(t0);

  t0 = clock::now();
  std::vector<ValueTarget> value_data;
  for (const auto& ep : buffer_.episodes()) {
    auto targets = assign_returns(ep);
    value_data.insert(value_data.end(), targets.begin(), targets.end());
  }
  const int in_size = input_size_of(cfg_.variant);
  m.value_samples = value_data.size();
  // Reported losses are from the first pass, before the net has seen the data.
  for (int ep = 0; ep < cfg_.v_epochs; ++ep) {
    const double loss = run_epoch(value_data.size(), cfg_.batch_size,
                                  make_rng(cfg_.seed, {kShuffleValue, iter_key, std::uint64_t(ep)}), v_.params(),
                                  opt_v_, [&](std::span<const std::size_t> idx) {
                                    return make_value_batch(value_data, idx, in_size);
                                  });
    if (ep == 0) m.v_loss = loss;
  }
  m.v_train_seconds = seconds_since(t0);

  // Q is still the pre-iteration network here; V is already updated.
  t0 = clock::now();
  const auto q_data = build_q_dataset(buffer_, v_, q_, cfg_.budget, cfg_.workers);
  m.q_samples = q_data.size();
  m.q_targets_seconds = seconds_since(t0);

  t0 = clock::now();
  const int actions = q_.actions();
  for (int ep = 0; ep < cfg_.q_epochs; ++ep) {
    const double loss = run_epoch(q_data.size(), cfg_.batch_size,
                                  make_rng(cfg_.seed, {kShuffleQ, iter_key, std::uint64_t(ep)}), q_.params(), opt_q_,
                                  [&](std::span<const std::size_t> idx) {
                                    return make_q_batch(q_data, idx, in_size, actions);
                                  });
    if (ep == 0) m.q_loss = loss;
  }
  m.q_train_seconds = seconds_since(t0);

  buffer_.clear();
  return m;
}

Checkpoint Trainer::snapshot() const {
  Checkpoint c;
  c.meta["iteration"] = iteration_;
  c.meta["seed"] = cfg_.seed;
  c.meta["game"] = variant_name(cfg_.variant);
  c.meta["network"] = nn::net_size_name(cfg_.net);
  c.meta["optimizer"] = nn::optimizer_name(cfg_.optimizer);
  c.meta["optimizer_steps"] = {{"value", opt_v_.steps()}, {"q", opt_q_.steps()}};
  c.meta["parameter_counts"] = {{"value", v_.params().size()}, {"q", q_.params().size()}};
  c.add_network("value", v_.params());
  c.add_network("q", q_.params());
  if (cfg_.optimizer == nn::OptimizerKind::kAdam) {
    c.add_floats("value.adam_m", opt_v_.first_moment());
    c.add_floats("value.adam_v", opt_v_.second_moment());
    c.add_floats("q.adam_m", opt_q_.first_moment());
    c.add_floats("q.adam_v", opt_q_.second_moment());
  }
  return c;
}

void Trainer::restore(const Checkpoint& c) {
  const auto& meta = c.meta;
  if (meta.at("seed").get<std::uint64_t>() != cfg_.seed) {
    throw std::invalid_argument("checkpoint seed does not match the run config");
  }
  if (meta.at("game").get<std::string>() != variant_name(cfg_.variant) ||
      meta.at("network").get<std::string>() != nn::net_size_name(cfg_.net) ||
      meta.at("optimizer").get<std::string>() != nn::optimizer_name(cfg_.optimizer)) {
    throw std::invalid_argument("checkpoint game/network/optimizer do not match the run config");
  }
  nn::ValueNet v(c.network("value"));
  nn::QNet q(c.network("q"));
  if (v.params().layers != v_.params().layers || q.params().layers != q_.params().layers) {
    throw std::invalid_argument("checkpoint architecture does not match the run config");
  }
  v_ = std::move(v);
  q_ = std::move(q);
  opt_v_ = nn::Optimizer(cfg_.optimizer, cfg_.lr_v, v_.params().size());
  opt_q_ = nn::Optimizer(cfg_.optimizer, cfg_.lr_q, q_.params().size());
  opt_v_.set_steps(meta.at("optimizer_steps").at("value").get<std::uint64_t>());
  opt_q_.set_steps(meta.at("optimizer_steps").at("q").get<std::uint64_t>());
  if (cfg_.optimizer == nn::OptimizerKind::kAdam) {
    opt_v_.first_moment() = c.block("value.adam_m").data;
    opt_v_.second_moment() = c.block("value.adam_v").data;
    opt_q_.first_moment() = c.block("q.adam_m").data;
    opt_q_.second_moment() = c.block("q.adam_v").data;
  }
  iteration_ = meta.at("iteration").get<int>();
  buffer_.clear();
}

double mean_self_play_length(const nn::QNet& q, const TrainConfig& cfg, int episodes, std::uint64_t seed) {
  std::vector<std::size_t> lengths(episodes);
  const auto xp = cfg.exploration();
  parallel_for(lengths.size(), cfg.workers, [&](std::size_t e) {
    Rng rng = make_rng(seed, {e});
    lengths[e] = play_episode(q, cfg.n_turns, xp, rng, cfg.variant).actions.size();
  });
  return static_cast<double>(std::accumulate(lengths.begin(), lengths.end(), std::size_t{0})) / episodes;
}

}  // namespace probs::training
