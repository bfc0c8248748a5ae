#include <doctest.h>

#include <chrono>
#include <cmath>
#include <random>
#include <vector>

#include "oracles/reference_net.hpp"
#include "probs/games.hpp"
#include "probs/nn.hpp"

using namespace probs;
using namespace probs::nn;

namespace {

// Random inputs in [-1, 1]; targets in [-1, 1]; each mask entry kept with
// probability `keep` (at least one per sample).
Batch random_batch(int in, int out, int n, double keep, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.0F, 1.0F);
  std::bernoulli_distribution coin(keep);
  Batch b(in, out);
  for (int s = 0; s < n; ++s) {
    std::vector<float> x(in), t(out), m(out);
    for (auto& v : x) v = u(rng);
    for (auto& v : t) v = u(rng);
    for (auto& v : m) v = coin(rng) ? 1.0F : 0.0F;
    m[s % out] = 1.0F;
    b.add(x, t, m);
  }
  return b;
}

void check_gradients(std::vector<LayerSpec> layers, double keep, std::uint64_t seed) {
  ParameterSet p = init_params(layers, seed);
  // Nonzero biases so the bias gradients are exercised away from init.
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<float> u(-0.1F, 0.1F);
  for (auto& w : p.weights) w += u(rng);
  const Batch b = random_batch(p.input_size(), p.output_size(), 6, keep, seed + 2);
  const auto rep = oracle::finite_difference_check(p, b);
  INFO("checked " << rep.checked << " skipped " << rep.skipped_kinks << " worst index " << rep.worst_index);
  CHECK(rep.checked > 0);
  CHECK(rep.max_rel_error < 1e-3);
}

}  // namespace

TEST_SUITE("nn") {
  TEST_CASE("parameter counts") {
    CHECK(param_count(value_net_layers(Variant::kConnectFour, NetSize::kSmall)) == 9365);
    CHECK(param_count(q_net_layers(Variant::kConnectFour, NetSize::kSmall)) == 9431);
    const auto large = param_count(value_net_layers(Variant::kConnectFour, NetSize::kLarge));
    MESSAGE("large value net parameters: " << large);
    CHECK(large >= 90000);
    CHECK(large <= 110000);
    CHECK(LayerSpec::conv2d(6, 7, 2, 16, 3).param_count() == 3 * 3 * 2 * 16 + 16);
    CHECK(LayerSpec::dense(10, 7).param_count() == 77);
  }

  TEST_CASE("value range and determinism") {
    std::mt19937_64 rng(3);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const ValueNet v(Variant::kConnectFour, NetSize::kSmall, seed);
      GameState s = new_game(Variant::kConnectFour);
      for (int i = 0; i < 20 && !s.is_terminal(); ++i) {
        const float a = forward_value(v, encode(s));
        const float b = forward_value(v, encode(s));
        CHECK(a > -1.0F);
        CHECK(a < 1.0F);
        CHECK(a == b);
        CHECK(v.evaluate(s) == a);
        const auto acts = valid_actions(s);
        s = apply_action(s, acts[rng() % acts.size()]).next_state;
      }
    }
  }

  TEST_CASE("q output shape and determinism") {
    const QNet q(Variant::kConnectFour, NetSize::kSmall, 11);
    const auto x = encode(new_game(Variant::kConnectFour));
    const auto a = forward_q(q, x);
    CHECK(a.size() == 7);
    CHECK(a == forward_q(q, x));
    for (float v : a) CHECK(std::isfinite(v));
    const QNet q3(Variant::kConnect3Test, NetSize::kSmall, 11);
    CHECK(q3.evaluate(new_game(Variant::kConnect3Test)).size() == 4);
  }

  TEST_CASE("dimension mismatch is a configuration error") {
    const QNet q(Variant::kConnectFour, NetSize::kSmall, 1);
    std::vector<float> wrong(10), out(7);
    CHECK_THROWS_AS(forward(q.params(), wrong, out), ConfigError);
    const ValueNet v(Variant::kConnectFour, NetSize::kSmall, 1);
    CHECK_THROWS_AS(forward_value(v, encode(new_game(Variant::kConnect3Test))), ConfigError);
  }

  TEST_CASE("init reproducibility") {
    const auto layers = value_net_layers(Variant::kConnectFour, NetSize::kSmall);
    CHECK(init_params(layers, 5).weights == init_params(layers, 5).weights);
    CHECK(init_params(layers, 5).weights != init_params(layers, 6).weights);
  }

  TEST_CASE("overfit a single value sample") {
    ValueNet v(Variant::kConnectFour, NetSize::kSmall, 21);
    const std::vector<int> moves{3, 2, 4};
    const auto x = to_network_input(encode(play_moves(Variant::kConnectFour, moves)));
    Batch b(x.size(), 1);
    const float t = 0.7F;
    const float m = 1.0F;
    b.add(x, std::span<const float>(&t, 1), std::span<const float>(&m, 1));
    for (int i = 0; i < 2000; ++i) train_batch(v.params(), b, 0.01F);
    CHECK(std::abs(forward_value(v, encode(play_moves(Variant::kConnectFour, moves))) - 0.7F) < 0.01F);
  }

  TEST_CASE("masked q overfit touches only masked actions") {
    QNet q(Variant::kConnectFour, NetSize::kSmall, 22);
    const auto enc = encode(new_game(Variant::kConnectFour));
    const auto x = to_network_input(enc);
    const std::vector<float> t{0.5F, 0.0F, 0.0F, -0.25F, 0.0F, 0.0F, 0.0F};
    const std::vector<float> m{1.0F, 0.0F, 0.0F, 1.0F, 0.0F, 0.0F, 0.0F};
    Batch b(x.size(), 7);
    b.add(x, t, m);
    for (int i = 0; i < 2000; ++i) train_batch(q.params(), b, 0.01F);
    const auto y = forward_q(q, enc);
    CHECK(std::abs(y[0] - 0.5F) < 0.01F);
    CHECK(std::abs(y[3] + 0.25F) < 0.01F);
  }

  TEST_CASE("zero gradient when targets equal outputs") {
    QNet q(Variant::kConnectFour, NetSize::kSmall, 23);
    const auto enc = encode(new_game(Variant::kConnectFour));
    const auto x = to_network_input(enc);
    const auto y = forward_q(q, enc);
    const std::vector<float> m(7, 1.0F);
    Batch b(x.size(), 7);
    b.add(x, y, m);
    const auto before = q.params().weights;
    const float loss = train_batch(q.params(), b, 0.1F);
    CHECK(loss == 0.0F);
    CHECK(q.params().weights == before);
  }

  TEST_CASE("small steps never increase the loss") {
    ParameterSet p = init_params(value_net_layers(Variant::kConnect3Test, NetSize::kSmall), 24);
    Batch b = random_batch(p.input_size(), 1, 16, 1.0, 25);
    float prev = batch_loss(p, b);
    for (int i = 0; i < 200; ++i) {
      train_batch(p, b, 1e-3F);
      const float now = batch_loss(p, b);
      CHECK(now <= prev + 1e-7F);
      prev = now;
    }
  }

  TEST_CASE("divergence is detected") {
    ParameterSet p = init_params({LayerSpec::dense(2, 1)}, 1);
    Batch b(2, 1);
    const std::vector<float> x{1.0F, std::nanf("")};
    const float t = 0.0F;
    const float m = 1.0F;
    b.add(x, std::span<const float>(&t, 1), std::span<const float>(&m, 1));
    CHECK_THROWS_AS(train_batch(p, b, 0.1F), DivergenceError);
  }

  TEST_CASE("finite differences: each layer kind") {
    SUBCASE("conv") { check_gradients({LayerSpec::conv2d(3, 4, 2, 3, 3)}, 0.6, 31); }
    SUBCASE("dense") { check_gradients({LayerSpec::dense(7, 5)}, 0.6, 32); }
    SUBCASE("leaky relu") { check_gradients({LayerSpec::dense(7, 5), LayerSpec::leaky_relu(5)}, 0.6, 33); }
    SUBCASE("tanh") { check_gradients({LayerSpec::dense(7, 1), LayerSpec::tanh(1)}, 1.0, 34); }
  }

  TEST_CASE("finite differences: toy nets of about 100 weights") {
    SUBCASE("value loss") {
      check_gradients({LayerSpec::conv2d(2, 3, 2, 2, 3), LayerSpec::leaky_relu(12), LayerSpec::dense(12, 4),
                       LayerSpec::leaky_relu(4), LayerSpec::dense(4, 1), LayerSpec::tanh(1)},
                      1.0, 41);
    }
    SUBCASE("masked q loss") {
      check_gradients({LayerSpec::conv2d(2, 3, 2, 2, 3), LayerSpec::leaky_relu(12), LayerSpec::dense(12, 3),
                       LayerSpec::leaky_relu(3), LayerSpec::dense(3, 4)},
                      0.5, 42);
    }
  }

  TEST_CASE("optimizer steps are deterministic") {
    for (auto kind : {OptimizerKind::kSgd, OptimizerKind::kAdam}) {
      auto run = [&] {
        ParameterSet p = init_params(q_net_layers(Variant::kConnect3Test, NetSize::kSmall), 50);
        Optimizer opt(kind, 0.003F, p.size());
        const Batch b = random_batch(p.input_size(), p.output_size(), 32, 0.5, 51);
        for (int i = 0; i < 10; ++i) train_batch(p, b, opt);
        return p.weights;
      };
      CHECK(run() == run());
    }
  }

  TEST_CASE("forward throughput") {
    const ValueNet v(Variant::kConnectFour, NetSize::kSmall, 60);
    const auto s = play_moves(Variant::kConnectFour, std::vector<int>{3, 3, 4});
    const auto start = std::chrono::steady_clock::now();
    float sink = 0.0F;
    const int n = 20000;
    for (int i = 0; i < n; ++i) sink += v.evaluate(s);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    MESSAGE("value forward: " << n / secs << " states/s");
    CHECK(std::isfinite(sink));
    CHECK(n / secs >= 1e4);
  }
}
