// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.
//
//   probs_acceptance --config configs/connect4_desk.json --workdir DIR [--criteria 1,2,...] [--reuse-runs]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles/negamax.hpp"
#include "oracles/reference_net.hpp"
#include "probs/agents.hpp"
#include "probs/checkpoint.hpp"
#include "probs/cli.hpp"
#include "probs/eval.hpp"
#include "probs/search.hpp"
#include "probs/training.hpp"

using namespace probs;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Args {
  fs::path config;
  fs::path workdir = "acceptance_runs";
  std::set<int> criteria{1, 2, 3, 4, 5, 6, 7};
  bool reuse_runs = false;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// 1. Beam search with an unlimited budget equals exhaustive negamax.

Outcome oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<GameState> states;
  for (const auto& s : oracle::enumerate_reachable(Variant::kConnect3Test)) {
    if (!s.is_terminal()) states.push_back(s);
  }
  std::size_t compared = 0;
  std::size_t proven = 0;
  std::size_t mismatches = 0;
  double worst_ref = 0.0;
  for (std::uint64_t seed : {101ULL, 202ULL, 303ULL}) {
    const auto vf = oracle::random_v(seed);
    const search::LambdaValue v(vf);
    const search::LambdaQ q(oracle::random_q(seed));
    for (int m = 1; m <= 6; ++m) {
      for (const auto& s : states) {
        const auto beam = search::beam_search(s, v, q, {10000000, m});
        const auto full = search::exhaustive_negamax(s, v, m);
        const auto ref = oracle::negamax_root(s, m, vf);
        if (beam.size() != full.size()) {
          ++mismatches;
          continue;
        }
        for (std::size_t i = 0; i < beam.size(); ++i) {
          ++compared;
          const float b = beam[i].q;
          if (!(beam[i].action == full[i].action) || std::memcmp(&b, &full[i].q, sizeof b) != 0) ++mismatches;
          if (std::abs(b) == 1.0F) ++proven;
          worst_ref = std::max(worst_ref, std::abs(static_cast<double>(b) - ref[beam[i].action.column]));
        }
      }
    }
  }
  Outcome o;
  o.pass = mismatches == 0 && worst_ref <= 1e-6 && compared > 0;
  o.detail = std::to_string(states.size()) + " states x M=1..6 x 3 V: " + std::to_string(compared) +
             " q-values, " + std::to_string(mismatches) + " beam/negamax mismatches (" + std::to_string(proven) +
             " terminal-proven), max |beam - recursive oracle| " + fmt("%.2g", worst_ref) + ", " +
             fmt("%.0f", seconds_since(t0)) + "s";
  if (seconds_since(t0) > 600.0) {
    o.pass = false;
    o.detail += " (over 10 min)";
  }
  return o;
}

// ---------------------------------------------------------------------------
// 2. Analytic gradients against central finite differences.

nn::Batch game_batch(const std::vector<nn::LayerSpec>& layers, bool q_loss, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int in = layers.front().input_size();
  const int out = layers.back().output_size();
  nn::Batch b(in, out);
  std::uniform_real_distribution<float> u(-1.0F, 1.0F);
  while (static_cast<int>(b.count()) < n) {
    GameState s = new_game(Variant::kConnectFour);
    const int plies = 4 + static_cast<int>(rng() % 16);
    for (int i = 0; i < plies && !s.is_terminal(); ++i) {
      const auto acts = valid_actions(s);
      s = apply_action(s, acts[rng() % acts.size()]).next_state;
    }
    if (s.is_terminal()) continue;
    std::vector<float> x(in);
    encode_channels_last(s, x);
    std::vector<float> t(out), m(out);
    for (auto& v : t) v = u(rng);
    if (q_loss) {
      const auto mask = valid_mask(s);
      for (int a = 0; a < out; ++a) m[a] = ((mask >> a) & 1U) != 0 && (rng() % 3 != 0) ? 1.0F : 0.0F;
      m[valid_actions(s).front().column] = 1.0F;
    } else {
      std::fill(m.begin(), m.end(), 1.0F);
    }
    b.add(x, t, m);
  }
  return b;
}

nn::Batch random_batch(int in, int out, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.0F, 1.0F);
  nn::Batch b(in, out);
  for (int s = 0; s < n; ++s) {
    std::vector<float> x(in), t(out), m(out);
    for (auto& v : x) v = u(rng);
    for (auto& v : t) v = u(rng);
    for (int a = 0; a < out; ++a) m[a] = (a + s) % 3 == 2 ? 0.0F : 1.0F;
    b.add(x, t, m);
  }
  return b;
}

Outcome gradient_check() {
  const auto t0 = std::chrono::steady_clock::now();
  struct Case {
    std::string name;
    std::vector<nn::LayerSpec> layers;
    bool game_inputs;
    bool q_loss;
  };
  const std::vector<Case> cases{
      {"conv", {nn::LayerSpec::conv2d(4, 5, 2, 3, 3)}, false, true},
      {"dense", {nn::LayerSpec::dense(9, 4)}, false, true},
      {"leaky_relu", {nn::LayerSpec::dense(9, 6), nn::LayerSpec::leaky_relu(6)}, false, true},
      {"tanh", {nn::LayerSpec::dense(9, 1), nn::LayerSpec::tanh(1)}, false, false},
      {"small V net", nn::value_net_layers(Variant::kConnectFour, nn::NetSize::kSmall), true, false},
      {"small Q net", nn::q_net_layers(Variant::kConnectFour, nn::NetSize::kSmall), true, true},
  };
  bool ok = true;
  std::ostringstream detail;
  std::uint64_t seed = 1;
  for (const auto& c : cases) {
    nn::ParameterSet p = nn::init_params(c.layers, seed);
    std::mt19937_64 rng(seed + 100);
    std::uniform_real_distribution<float> u(-0.05F, 0.05F);
    for (auto& w : p.weights) w += u(rng);  // nonzero biases
    const nn::Batch b = c.game_inputs ? game_batch(c.layers, c.q_loss, 3, seed + 200)
                                      : random_batch(p.input_size(), p.output_size(), 5, seed + 200);
    const auto rep = oracle::finite_difference_check(p, b);
    const double skipped = static_cast<double>(rep.skipped_kinks) / static_cast<double>(p.size());
    const bool pass = rep.max_rel_error <= 1e-3 && skipped <= 0.05 && rep.checked > 0;
    ok = ok && pass;
    detail << c.name << " " << fmt("%.1e", rep.max_rel_error) << " (" << rep.checked << "/" << p.size();
    if (rep.skipped_kinks > 0) detail << ", " << rep.skipped_kinks << " kink";
    detail << "); ";
    ++seed;
  }
  const double secs = seconds_since(t0);
  detail << fmt("%.0f", secs) << "s";
  Outcome o;
  o.pass = ok && secs < 60.0;
  o.detail = "max relative error per case: " + detail.str();
  return o;
}

// ---------------------------------------------------------------------------
// 3. Baseline ladder ordering.

Outcome ladder_ordering() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<std::string> names{"random", "lookahead1", "lookahead2", "lookahead3"};
  const auto results = eval::round_robin(names, 2000, Variant::kConnectFour, 20240601);
  const auto table = eval::fit_ratings(results);
  double l1_vs_random = 0.0;
  for (const auto& m : results) {
    if (m.player_a == "lookahead1" && m.player_b == "random") l1_vs_random = m.score_a();
    if (m.player_a == "random" && m.player_b == "lookahead1") l1_vs_random = 1.0 - m.score_a();
  }
  bool increasing = true;
  for (std::size_t i = 1; i < names.size(); ++i) increasing = increasing && table.at(names[i]) > table.at(names[i - 1]);
  const bool band = std::abs(l1_vs_random - 0.74) <= 0.10;
  Outcome o;
  o.pass = increasing && band && table.clamped.empty() && seconds_since(t0) < 1800.0;
  std::ostringstream d;
  d << "ratings";
  for (const auto& n : names) d << " " << n << "=" << fmt("%.0f", table.at(n));
  d << "; lookahead1 vs random " << fmt("%.3f", l1_vs_random) << " (band 0.64..0.84); "
    << fmt("%.0f", seconds_since(t0)) << "s";
  o.detail = d.str();
  return o;
}

// ---------------------------------------------------------------------------
// 4, 6, 7. Desk-scale training runs.

struct RunInfo {
  fs::path dir;
  int exit_code = -1;
  double seconds = 0.0;
};

RunInfo train_run(const Args& args, const std::string& name, int workers) {
  RunInfo info;
  info.dir = args.workdir / name;
  const auto cfg = cli::load_run_config(args.config);
  const fs::path last = cli::checkpoint_path(info.dir, cfg.train.n_iter);
  if (args.reuse_runs && fs::exists(last)) {
    info.exit_code = 0;
    return info;
  }
  fs::remove_all(info.dir);
  fs::create_directories(args.workdir);
  cli::TrainOptions opt;
  opt.config = args.config;
  opt.workers = workers;
  opt.output_dir = info.dir;
  std::ofstream log(args.workdir / (name + ".log"));
  const auto t0 = std::chrono::steady_clock::now();
  info.exit_code = cli::cmd_train(opt, log, log);
  info.seconds = seconds_since(t0);
  return info;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<double> ranks(const std::vector<double>& x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = (static_cast<double>(i) + static_cast<double>(j)) / 2.0;
    i = j + 1;
  }
  return r;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / rx.size();
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / ry.size();
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

Outcome desk_learning(const Args& args, const RunInfo& run) {
  Outcome o;
  if (run.exit_code != 0) {
    o.detail = "training exited with code " + std::to_string(run.exit_code);
    return o;
  }
  const auto cfg = cli::load_run_config(args.config);
  const auto ckpt = read_checkpoint(cli::checkpoint_path(run.dir, cfg.train.n_iter));
  const nn::QNet q(ckpt.network("q"));
  const agents::GreedyQAgent agent(q);
  const agents::RandomAgent random;
  const agents::LookaheadAgent l1(1);
  const std::uint64_t seed = derive_seed(cfg.train.seed, {900});
  const auto vs_random = eval::play_match(agent, random, 400, cfg.train.variant, derive_seed(seed, {1}));
  const auto vs_l1 = eval::play_match(agent, l1, 400, cfg.train.variant, derive_seed(seed, {2}));
  const double win_random = static_cast<double>(vs_random.wins_a) / vs_random.games;
  const double win_l1 = static_cast<double>(vs_l1.wins_a) / vs_l1.games;

  std::vector<double> iters;
  std::vector<double> ratings;
  std::ifstream csv(run.dir / "elo.csv");
  std::string line;
  std::getline(csv, line);
  while (std::getline(csv, line)) {
    std::istringstream ls(line);
    std::string it;
    std::string rating;
    std::getline(ls, it, ',');
    std::getline(ls, rating, ',');
    iters.push_back(std::stod(it));
    ratings.push_back(std::stod(rating));
  }
  const double rho = iters.size() >= 3 ? spearman(iters, ratings) : 0.0;
  o.pass = win_random >= 0.90 && win_l1 >= 0.60 && rho >= 0.7;
  std::ostringstream d;
  d << "wins vs random " << fmt("%.3f", win_random) << " (need 0.90), wins vs lookahead1 " << fmt("%.3f", win_l1)
    << " (need 0.60), Elo Spearman " << fmt("%.3f", rho) << " over " << iters.size() << " points (need 0.70)";
  if (!ratings.empty()) d << ", final Elo " << fmt("%.0f", ratings.back());
  if (run.seconds > 0.0) d << ", " << fmt("%.0f", run.seconds) << "s";
  o.detail = d.str();
  return o;
}

Outcome determinism(const Args& args, const RunInfo& a, const RunInfo& b) {
  Outcome o;
  if (a.exit_code != 0 || b.exit_code != 0) {
    o.detail = "a training run failed";
    return o;
  }
  std::size_t files = 0;
  std::size_t differing = 0;
  for (const auto& e : fs::directory_iterator(a.dir / "ckpt")) {
    ++files;
    const fs::path other = b.dir / "ckpt" / e.path().filename();
    if (!fs::exists(other) || slurp(e.path()) != slurp(other)) ++differing;
  }
  std::size_t files_b = 0;
  for (const auto& e : fs::directory_iterator(b.dir / "ckpt")) files_b += e.is_regular_file() ? 1 : 0;
  const bool csv_same = slurp(a.dir / "elo.csv") == slurp(b.dir / "elo.csv");
  o.pass = differing == 0 && files == files_b && files > 0 && csv_same;
  o.detail = "workers 1 vs 8: " + std::to_string(files) + " checkpoints, " + std::to_string(differing) +
             " differ; elo.csv " + (csv_same ? "identical" : "differs");
  (void)args;
  return o;
}

Outcome episode_length(const Args& args, const RunInfo& run) {
  Outcome o;
  if (run.exit_code != 0) {
    o.detail = "training run failed";
    return o;
  }
  const auto cfg = cli::load_run_config(args.config);
  const auto ckpt = read_checkpoint(cli::checkpoint_path(run.dir, cfg.train.n_iter));
  const nn::QNet q(ckpt.network("q"));
  const double mean = training::mean_self_play_length(q, cfg.train, 1000, derive_seed(cfg.train.seed, {901}));
  o.pass = mean >= 12.0 && mean <= 30.0;
  o.detail = "mean self-play length " + fmt("%.2f", mean) + " plies over 1000 episodes (band 12..30)";
  return o;
}

// ---------------------------------------------------------------------------
// 5. Alternating-sign value targets.

Outcome alternating_targets() {
  const nn::QNet q(Variant::kConnectFour, nn::NetSize::kSmall, 5);
  Rng rng(55);
  std::size_t episodes = 0;
  std::size_t failures = 0;
  std::size_t truncated = 0;
  for (int i = 0; i < 2000; ++i) {
    const int cap = i % 4 == 0 ? 1 + static_cast<int>(rng() % 20) : 100;
    const auto ep = training::play_episode(q, cap, {0.25F, 0.5F}, rng, Variant::kConnectFour);
    const auto t = training::assign_returns(ep);
    ++episodes;
    bool ok = t.size() == ep.states.size();
    if (ep.truncated) {
      ++truncated;
      for (const auto& x : t) ok = ok && x.target == 0.0F;
    } else {
      ok = ok && t.back().target == static_cast<float>(ep.final_reward);
      // A decisive game's final state has the loser to move.
      if (ep.states.back().winner() != Cell::kEmpty) ok = ok && ep.final_reward == -1;
      for (std::size_t k = 1; k < t.size(); ++k) ok = ok && t[k].target == -t[k - 1].target;
    }
    failures += ok ? 0 : 1;
  }
  // Fixed example: five states, r_T = 1.
  training::Episode five;
  five.states.resize(5, new_game(Variant::kConnectFour));
  five.final_reward = 1;
  const auto t5 = training::assign_returns(five);
  const std::vector<float> want{1, -1, 1, -1, 1};
  for (int k = 0; k < 5; ++k) failures += t5[k].target == want[k] ? 0 : 1;
  Outcome o;
  o.pass = failures == 0 && truncated > 0;
  o.detail = std::to_string(episodes) + " episodes (" + std::to_string(truncated) + " truncated), " +
             std::to_string(failures) + " violations";
  return o;
}

Args parse_args(int argc, char** argv) {
  Args a;
  for (int i = 1; i < argc; ++i) {
    const std::string k = argv[i];
    auto next = [&]() -> std::string {
      if (i + 1 >= argc) throw std::invalid_argument("missing value for " + k);
      return argv[++i];
    };
    if (k == "--config") {
      a.config = next();
    } else if (k == "--workdir") {
      a.workdir = next();
    } else if (k == "--reuse-runs") {
      a.reuse_runs = true;
    } else if (k == "--criteria") {
      a.criteria.clear();
      std::stringstream ss(next());
      std::string tok;
      while (std::getline(ss, tok, ',')) a.criteria.insert(std::stoi(tok));
    } else {
      throw std::invalid_argument("unknown argument " + k);
    }
  }
  if (a.config.empty() && (a.criteria.count(4) || a.criteria.count(6) || a.criteria.count(7))) {
    throw std::invalid_argument("--config is required for criteria 4, 6 and 7");
  }
  return a;
}

}  // namespace

int main(int argc, char** argv) {
  Args args;
  try {
    args = parse_args(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }
  const std::map<int, std::string> titles{{1, "oracle equivalence"},   {2, "gradient correctness"},
                                          {3, "baseline ladder"},      {4, "desk-scale learning"},
                                          {5, "alternating-sign targets"}, {6, "determinism"},
                                          {7, "episode length"}};
  bool all = true;
  auto report = [&](int id, const Outcome& o) {
    std::cout << "criterion " << id << " (" << titles.at(id) << "): " << (o.pass ? "PASS" : "FAIL") << "  "
              << o.detail << std::endl;
    all = all && o.pass;
  };
  auto guarded = [&](int id, const std::function<Outcome()>& fn) {
    if (!args.criteria.count(id)) return;
    try {
      report(id, fn());
    } catch (const std::exception& e) {
      report(id, Outcome{false, std::string("exception: ") + e.what()});
    }
  };

  guarded(1, oracle_equivalence);
  guarded(2, gradient_check);
  guarded(3, ladder_ordering);
  guarded(5, alternating_targets);

  RunInfo w1;
  RunInfo w8;
  if (args.criteria.count(4) || args.criteria.count(6) || args.criteria.count(7)) {
    w1 = train_run(args, "run_w1", 1);
  }
  if (args.criteria.count(6)) w8 = train_run(args, "run_w8", 8);
  guarded(4, [&] { return desk_learning(args, w1); });
  guarded(6, [&] { return determinism(args, w1, w8); });
  guarded(7, [&] { return episode_length(args, w1); });
  return all ? 0 : 1;
}
