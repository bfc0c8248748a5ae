#include "probs/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "probs/agents.hpp"
#include "probs/checkpoint.hpp"
#include "probs/eval.hpp"
#include "probs/rng.hpp"
#include "probs/search.hpp"

namespace probs::cli {
namespace {

constexpr std::uint64_t kLadderStream = 101;
constexpr std::uint64_t kEvalStream = 102;

const std::set<std::string> kRequiredKeys{
    "game",     "network", "n_iter", "n_episodes", "n_turns", "expansions", "max_depth",
    "capacity", "epsilon", "alpha",  "lr_v",       "lr_q",    "batch_size", "seed"};
const std::set<std::string> kOptionalKeys{"optimizer",  "v_epochs",   "q_epochs",       "workers",   "eval_every",
                                          "eval_games", "ladder_games", "eval_baselines", "output_dir"};

const nlohmann::json& field(const nlohmann::json& j, const std::string& key) {
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(key, "missing required field");
  return *it;
}

int get_int(const nlohmann::json& j, const std::string& key) {
  const auto& v = field(j, key);
  if (!v.is_number_integer()) throw ConfigError(key, "expected an integer");
  return v.get<int>();
}

float get_float(const nlohmann::json& j, const std::string& key) {
  const auto& v = field(j, key);
  if (!v.is_number()) throw ConfigError(key, "expected a number");
  return v.get<float>();
}

std::string get_string(const nlohmann::json& j, const std::string& key) {
  const auto& v = field(j, key);
  if (!v.is_string()) throw ConfigError(key, "expected a string");
  return v.get<std::string>();
}

std::string format_rating(double r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", r);
  return buf;
}

std::string format_score(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", s);
  return buf;
}

void check_baselines(const std::vector<std::string>& names, const std::string& key) {
  if (names.empty()) throw ConfigError(key, "must list at least one baseline");
  for (const auto& b : names) {
    try {
      agents::make_baseline(b);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(key, e.what());
    }
  }
}

// Drops CSV rows past `max_iteration`; the header line is kept.
void truncate_csv(const std::filesystem::path& path, int max_iteration) {
  if (!std::filesystem::exists(path)) return;
  std::ifstream in(path);
  std::string kept;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) {
      kept += line + '\n';
      first = false;
      continue;
    }
    if (std::stoi(line.substr(0, line.find(','))) <= max_iteration) kept += line + '\n';
  }
  in.close();
  std::ofstream(path, std::ios::trunc) << kept;
}

void truncate_jsonl(const std::filesystem::path& path, int max_iteration) {
  if (!std::filesystem::exists(path)) return;
  std::ifstream in(path);
  std::string kept;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (nlohmann::json::parse(line).at("iteration").get<int>() <= max_iteration) kept += line + '\n';
  }
  in.close();
  std::ofstream(path, std::ios::trunc) << kept;
}

int latest_checkpoint(const std::filesystem::path& run_dir) {
  const auto dir = run_dir / "ckpt";
  int best = -1;
  if (!std::filesystem::exists(dir)) return best;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("iter_", 0) != 0 || e.path().extension() != ".probs") continue;
    best = std::max(best, std::stoi(name.substr(5, name.size() - 5 - 6)));
  }
  return best;
}

void evaluate_into_csv(const RunConfig& cfg, const eval::RatingTable& ladder, const nn::QNet& q, int iteration,
                       std::ostream& out) {
  const agents::GreedyQAgent agent(q);
  const auto r = eval::rate_checkpoint(agent, ladder, cfg.eval_baselines, cfg.eval_games, cfg.train.variant,
                                       derive_seed(cfg.train.seed, {kEvalStream, static_cast<std::uint64_t>(iteration)}),
                                       cfg.train.workers);
  eval::append_elo_csv(cfg.output_dir / "elo.csv", iteration, r);
  out << "eval iteration=" << iteration << " rating=" << format_rating(r.rating) << (r.clamped ? " (clamped)" : "");
  for (const auto& m : r.matches) out << " " << m.player_b << "=" << format_score(m.score_a());
  out << '\n';
}

}  // namespace

nlohmann::json RunConfig::to_json() const {
  const auto& t = train;
  return nlohmann::json{{"game", variant_name(t.variant)},
                        {"network", nn::net_size_name(t.net)},
                        {"n_iter", t.n_iter},
                        {"n_episodes", t.n_episodes},
                        {"n_turns", t.n_turns},
                        {"expansions", t.budget.expansions},
                        {"max_depth", t.budget.max_depth},
                        {"capacity", t.capacity},
                        {"epsilon", t.epsilon},
                        {"alpha", t.alpha},
                        {"lr_v", t.lr_v},
                        {"lr_q", t.lr_q},
                        {"batch_size", t.batch_size},
                        {"seed", t.seed},
                        {"optimizer", nn::optimizer_name(t.optimizer)},
                        {"v_epochs", t.v_epochs},
                        {"q_epochs", t.q_epochs},
                        {"workers", t.workers},
                        {"eval_every", eval_every},
                        {"eval_games", eval_games},
                        {"ladder_games", ladder_games},
                        {"eval_baselines", eval_baselines},
                        {"output_dir", output_dir.string()}};
}

RunConfig parse_run_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("<root>", "config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!kRequiredKeys.count(key) && !kOptionalKeys.count(key)) throw ConfigError(key, "unknown key");
  }
  for (const auto& key : kRequiredKeys) field(j, key);

  RunConfig c;
  auto& t = c.train;
  try {
    t.variant = parse_variant(get_string(j, "game"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError("game", e.what());
  }
  try {
    t.net = nn::parse_net_size(get_string(j, "network"));
  } catch (const nn::ConfigError& e) {
    throw ConfigError("network", e.what());
  }
  t.n_iter = get_int(j, "n_iter");
  t.n_episodes = get_int(j, "n_episodes");
  t.n_turns = get_int(j, "n_turns");
  t.budget.expansions = get_int(j, "expansions");
  t.budget.max_depth = get_int(j, "max_depth");
  const auto& cap = field(j, "capacity");
  if (!cap.is_number() || cap.get<double>() < 1.0 || cap.get<double>() != static_cast<double>(cap.get<std::int64_t>())) {
    throw ConfigError("capacity", "expected a positive whole number");
  }
  t.capacity = static_cast<std::size_t>(cap.get<std::int64_t>());
  t.epsilon = get_float(j, "epsilon");
  t.alpha = get_float(j, "alpha");
  t.lr_v = get_float(j, "lr_v");
  t.lr_q = get_float(j, "lr_q");
  t.batch_size = get_int(j, "batch_size");
  const auto& seed = field(j, "seed");
  if (!seed.is_number_integer() || (seed.is_number_integer() && !seed.is_number_unsigned() && seed.get<std::int64_t>() < 0)) {
    throw ConfigError("seed", "expected a non-negative integer");
  }
  t.seed = seed.get<std::uint64_t>();
  if (j.contains("optimizer")) {
    try {
      t.optimizer = nn::parse_optimizer(get_string(j, "optimizer"));
    } catch (const nn::ConfigError& e) {
      throw ConfigError("optimizer", e.what());
    }
  }
  if (j.contains("v_epochs")) t.v_epochs = get_int(j, "v_epochs");
  if (j.contains("q_epochs")) t.q_epochs = get_int(j, "q_epochs");
  if (j.contains("workers")) t.workers = get_int(j, "workers");
  if (j.contains("eval_every")) c.eval_every = get_int(j, "eval_every");
  if (j.contains("eval_games")) c.eval_games = get_int(j, "eval_games");
  if (j.contains("ladder_games")) c.ladder_games = get_int(j, "ladder_games");
  if (j.contains("eval_baselines")) {
    const auto& b = j.at("eval_baselines");
    if (!b.is_array()) throw ConfigError("eval_baselines", "expected an array of names");
    c.eval_baselines.clear();
    for (const auto& e : b) {
      if (!e.is_string()) throw ConfigError("eval_baselines", "expected an array of names");
      c.eval_baselines.push_back(e.get<std::string>());
    }
  }
  if (j.contains("output_dir")) c.output_dir = get_string(j, "output_dir");

  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    throw ConfigError(msg.substr(0, msg.find(':')), msg.substr(msg.find(':') + 2));
  }
  if (c.eval_every < 1) throw ConfigError("eval_every", "must be >= 1");
  if (c.eval_games < 2 || c.eval_games % 2 != 0) throw ConfigError("eval_games", "must be a positive even number");
  if (c.ladder_games < 2 || c.ladder_games % 2 != 0) {
    throw ConfigError("ladder_games", "must be a positive even number");
  }
  check_baselines(c.eval_baselines, "eval_baselines");
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("<file>", std::string("invalid JSON: ") + e.what());
  }
  return parse_run_config(j);
}

std::filesystem::path checkpoint_path(const std::filesystem::path& run_dir, int iteration) {
  char name[32];
  std::snprintf(name, sizeof name, "iter_%05d.probs", iteration);
  return run_dir / "ckpt" / name;
}

eval::RatingTable ensure_ladder(const RunConfig& cfg, const std::filesystem::path& path) {
  if (std::filesystem::exists(path)) {
    std::ifstream in(path);
    return eval::ladder_from_json(nlohmann::json::parse(in));
  }
  std::vector<std::string> names = cfg.eval_baselines;
  if (std::find(names.begin(), names.end(), "random") == names.end()) names.insert(names.begin(), "random");
  const auto results = eval::round_robin(names, cfg.ladder_games, cfg.train.variant,
                                         derive_seed(cfg.train.seed, {kLadderStream}), cfg.train.workers);
  const auto ladder = eval::fit_ratings(results, "random");
  std::ofstream(path) << eval::ladder_to_json(ladder).dump(2) << '\n';
  return ladder;
}

int cmd_train(const TrainOptions& opt, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  try {
    cfg = load_run_config(opt.config);
    if (opt.seed) cfg.train.seed = *opt.seed;
    if (opt.workers) {
      if (*opt.workers < 1) throw ConfigError("workers", "must be positive");
      cfg.train.workers = *opt.workers;
    }
    if (opt.output_dir) cfg.output_dir = *opt.output_dir;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  if (opt.dry_run) {
    out << cfg.to_json().dump(2) << '\n';
    return kExitOk;
  }

  const auto& dir = cfg.output_dir;
  training::Trainer trainer(cfg.train);
  const int existing = latest_checkpoint(dir);
  if (opt.resume && existing >= 0) {
    try {
      trainer.restore(read_checkpoint(checkpoint_path(dir, existing)));
    } catch (const CheckpointError& e) {
      err << e.what() << '\n';
      return kExitCorruptCheckpoint;
    } catch (const std::exception& e) {
      err << "cannot resume: " << e.what() << '\n';
      return kExitConfig;
    }
    truncate_csv(dir / "elo.csv", existing);
    truncate_jsonl(dir / "metrics.jsonl", existing);
    out << "resumed from iteration " << existing << '\n';
  } else if (existing >= 0) {
    err << "run directory '" << dir.string() << "' already holds checkpoints; pass --resume\n";
    return kExitConfig;
  } else {
    std::filesystem::create_directories(dir / "ckpt");
    std::filesystem::remove(dir / "elo.csv");
    std::filesystem::remove(dir / "metrics.jsonl");
  }
  std::ofstream(dir / "config.json") << cfg.to_json().dump(2) << '\n';

  const auto ladder = ensure_ladder(cfg, dir / "ladder.json");
  if (trainer.iteration() == 0) {
    write_checkpoint(checkpoint_path(dir, 0), trainer.snapshot());
    evaluate_into_csv(cfg, ladder, trainer.q_net(), 0, out);
  }

  while (trainer.iteration() < cfg.train.n_iter) {
    training::IterationMetrics m;
    try {
      m = trainer.run_iteration();
    } catch (const nn::DivergenceError& e) {
      err << "diverged at iteration " << trainer.iteration() << ": " << e.what() << '\n';
      return kExitDivergence;
    }
    write_checkpoint(checkpoint_path(dir, m.iteration), trainer.snapshot());
    std::ofstream(dir / "metrics.jsonl", std::ios::app) << m.to_json().dump() << '\n';
    out << "iteration " << m.iteration << " v_loss=" << m.v_loss << " q_loss=" << m.q_loss
        << " mean_len=" << m.mean_episode_length << '\n';
    if (m.iteration % cfg.eval_every == 0) evaluate_into_csv(cfg, ladder, trainer.q_net(), m.iteration, out);
    out.flush();
  }
  return kExitOk;
}

int cmd_eval(const EvalOptions& opt, std::ostream& out, std::ostream& err) {
  Checkpoint c;
  try {
    c = read_checkpoint(opt.checkpoint);
  } catch (const CheckpointError& e) {
    err << e.what() << '\n';
    return kExitCorruptCheckpoint;
  }
  RunConfig cfg;
  try {
    cfg.train.variant = parse_variant(c.meta.at("game").get<std::string>());
  } catch (const std::exception& e) {
    err << "checkpoint: cannot read game variant: " << e.what() << '\n';
    return kExitCorruptCheckpoint;
  }
  std::unique_ptr<nn::QNet> q;
  try {
    q = std::make_unique<nn::QNet>(c.network("q"));
  } catch (const std::exception& e) {
    err << e.what() << '\n';
    return kExitCorruptCheckpoint;
  }
  try {
    if (opt.games < 2 || opt.games % 2 != 0) throw ConfigError("games", "must be a positive even number");
    check_baselines(opt.baselines, "baselines");
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  cfg.train.seed = opt.seed;
  cfg.train.workers = opt.workers;
  cfg.eval_baselines = opt.baselines;
  cfg.eval_games = opt.games;
  cfg.ladder_games = opt.ladder_games;

  eval::RatingTable ladder;
  if (opt.ladder) {
    std::ifstream in(*opt.ladder);
    ladder = eval::ladder_from_json(nlohmann::json::parse(in));
  } else {
    std::vector<std::string> names = opt.baselines;
    if (std::find(names.begin(), names.end(), "random") == names.end()) names.insert(names.begin(), "random");
    ladder = eval::fit_ratings(eval::round_robin(names, opt.ladder_games, cfg.train.variant,
                                                 derive_seed(opt.seed, {kLadderStream}), opt.workers));
  }
  for (const auto& b : opt.baselines) {
    if (!ladder.contains(b)) {
      err << "config error: baselines: ladder has no rating for '" << b << "'\n";
      return kExitConfig;
    }
  }

  const agents::GreedyQAgent agent(*q);
  const int iteration = c.meta.value("iteration", 0);
  const auto r = eval::rate_checkpoint(agent, ladder, opt.baselines, opt.games, cfg.train.variant,
                                       derive_seed(opt.seed, {kEvalStream, static_cast<std::uint64_t>(iteration)}),
                                       opt.workers);
  out << "rating: " << format_rating(r.rating) << (r.clamped ? " (clamped)" : "") << '\n';
  for (const auto& m : r.matches) {
    out << "vs " << m.player_b << " (" << format_rating(ladder.at(m.player_b)) << "): score " << format_score(m.score_a())
        << "  W/D/L " << m.wins_a << "/" << m.draws << "/" << m.wins_b << '\n';
  }
  if (opt.csv) eval::append_elo_csv(*opt.csv, iteration, r);
  return kExitOk;
}

int cmd_tournament(const TournamentOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    if (opt.games < 2 || opt.games % 2 != 0) throw ConfigError("games", "must be a positive even number");
    check_baselines(opt.baselines, "baselines");
    if (std::find(opt.baselines.begin(), opt.baselines.end(), "random") == opt.baselines.end()) {
      throw ConfigError("baselines", "must include the 'random' anchor");
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  const auto results = eval::round_robin(opt.baselines, opt.games, opt.variant, derive_seed(opt.seed, {kLadderStream}),
                                         opt.workers);
  for (const auto& m : results) {
    out << m.player_a << " vs " << m.player_b << ": score " << format_score(m.score_a()) << "  W/D/L " << m.wins_a
        << "/" << m.draws << "/" << m.wins_b << '\n';
  }
  const auto ladder = eval::fit_ratings(results, "random");
  for (const auto& b : opt.baselines) out << b << ": " << format_rating(ladder.at(b)) << '\n';
  if (opt.output) std::ofstream(*opt.output) << eval::ladder_to_json(ladder).dump(2) << '\n';
  return kExitOk;
}

int cmd_play(const PlayOptions& opt, std::istream& in, std::ostream& out, std::ostream& err) {
  Checkpoint c;
  std::unique_ptr<nn::QNet> q;
  std::unique_ptr<nn::ValueNet> v;
  Variant variant = Variant::kConnectFour;
  try {
    c = read_checkpoint(opt.checkpoint);
    variant = parse_variant(c.meta.at("game").get<std::string>());
    q = std::make_unique<nn::QNet>(c.network("q"));
    v = std::make_unique<nn::ValueNet>(c.network("value"));
  } catch (const std::exception& e) {
    err << e.what() << '\n';
    return kExitCorruptCheckpoint;
  }
  GameState s = new_game(variant);
  for (int col : opt.moves) {
    if (!s.is_valid(Action{col})) {
      err << "config error: moves: column " << col << " is not playable at ply " << s.ply() << '\n';
      return kExitConfig;
    }
    s = apply_action(s, Action{col}).next_state;
  }
  const Player human = opt.human_first ? Cell::kP1 : Cell::kP2;
  const search::NetValue value_fn(*v);
  const search::NetQ q_fn(*q);

  auto agent_move = [&](const GameState& st) {
    if (opt.expansions <= 0) {
      return agents::greedy_action(q->evaluate(st), valid_mask(st));
    }
    const auto qv = search::beam_search(st, value_fn, q_fn, {opt.expansions, opt.max_depth});
    std::vector<float> scores(st.cols(), 0.0F);
    for (const auto& av : qv) scores[av.action.column] = av.q;
    return agents::greedy_action(scores, valid_mask(st));
  };

  while (!s.is_terminal()) {
    out << to_text(s);
    if (s.to_move() == human) {
      out << "column> " << std::flush;
      std::string line;
      if (!std::getline(in, line)) {
        out << "\nno input, exiting\n";
        return kExitOk;
      }
      int col = -1;
      std::istringstream parse(line);
      if (!(parse >> col) || !s.is_valid(Action{col})) {
        out << "invalid column '" << line << "', try again\n";
        continue;
      }
      s = apply_action(s, Action{col}).next_state;
    } else {
      const Action a = agent_move(s);
      out << "agent plays " << a.column << '\n';
      s = apply_action(s, a).next_state;
    }
  }
  out << to_text(s);
  if (s.winner() == Cell::kEmpty) {
    out << "result: draw\n";
  } else {
    out << "result: " << (s.winner() == Cell::kP1 ? 'X' : 'O') << " wins ("
        << (s.winner() == human ? "human" : "agent") << ")\n";
  }
  return kExitOk;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"probs: self-play training with beam-search targets"};
  app.require_subcommand(1);

  TrainOptions train;
  std::uint64_t train_seed = 0;
  int train_workers = 0;
  std::string train_out;
  auto* t = app.add_subcommand("train", "run self-play training from a JSON config");
  t->add_option("--config", train.config, "run config (JSON)")->required();
  t->add_flag("--resume", train.resume, "continue from the latest checkpoint in the run directory");
  t->add_flag("--dry-run", train.dry_run, "validate and print the resolved config only");
  auto* t_seed = t->add_option("--seed", train_seed, "override the config seed");
  auto* t_workers = t->add_option("--workers", train_workers, "override the worker count");
  auto* t_out = t->add_option("--output", train_out, "override the run directory");

  EvalOptions ev;
  std::string ev_csv;
  std::string ev_ladder;
  auto* e = app.add_subcommand("eval", "rate a checkpoint against the baseline ladder");
  e->add_option("--checkpoint", ev.checkpoint)->required();
  e->add_option("--games", ev.games, "games per baseline (even)");
  e->add_option("--baselines", ev.baselines, "comma-separated baseline names")->delimiter(',');
  auto* e_csv = e->add_option("--csv", ev_csv, "append the result row to this CSV");
  auto* e_ladder = e->add_option("--ladder", ev_ladder, "ladder JSON from `tournament --output`");
  e->add_option("--ladder-games", ev.ladder_games, "games per pair when fitting the ladder");
  e->add_option("--seed", ev.seed);
  e->add_option("--workers", ev.workers);

  TournamentOptions tour;
  std::string tour_game = "connect_four";
  std::string tour_out;
  auto* r = app.add_subcommand("tournament", "round robin among baseline agents");
  r->add_option("--games", tour.games, "games per pair (even)");
  r->add_option("--baselines", tour.baselines)->delimiter(',');
  r->add_option("--game", tour_game);
  auto* r_out = r->add_option("--output", tour_out, "write the fitted ladder JSON here");
  r->add_option("--seed", tour.seed);
  r->add_option("--workers", tour.workers);

  PlayOptions play;
  bool agent_first = false;
  auto* p = app.add_subcommand("play", "play against a checkpoint in the terminal");
  p->add_option("--checkpoint", play.checkpoint)->required();
  p->add_option("--moves", play.moves, "comma-separated opening columns")->delimiter(',');
  p->add_flag("--agent-first", agent_first, "let the agent play X");
  p->add_option("--expansions", play.expansions, "beam search expansions per agent move (0 = Q only)");
  p->add_option("--max-depth", play.max_depth);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (t->parsed()) {
    if (*t_seed) train.seed = train_seed;
    if (*t_workers) train.workers = train_workers;
    if (*t_out) train.output_dir = train_out;
    return cmd_train(train, std::cout, std::cerr);
  }
  if (e->parsed()) {
    if (*e_csv) ev.csv = ev_csv;
    if (*e_ladder) ev.ladder = ev_ladder;
    return cmd_eval(ev, std::cout, std::cerr);
  }
  if (r->parsed()) {
    try {
      tour.variant = parse_variant(tour_game);
    } catch (const std::invalid_argument& ex) {
      std::cerr << "config error: game: " << ex.what() << '\n';
      return kExitConfig;
    }
    if (*r_out) tour.output = tour_out;
    return cmd_tournament(tour, std::cout, std::cerr);
  }
  play.human_first = !agent_first;
  return cmd_play(play, std::cin, std::cout, std::cerr);
}

}  // namespace probs::cli
