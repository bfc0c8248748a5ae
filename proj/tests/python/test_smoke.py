import json

import pytest

import probs


def test_board_text_and_moves():
    s = probs.play_moves(probs.Variant.CONNECT_FOUR, [3, 3])
    assert str(s).splitlines()[-1] == "to_move: X"
    assert probs.from_text(str(s)) == s
    assert s.valid_actions() == list(range(7))
    with pytest.raises(ValueError):
        probs.play_moves(probs.Variant.CONNECT3_TEST, [0] * 5)


def test_winning_move_scores_one():
    s = probs.play_moves(probs.Variant.CONNECT_FOUR, [0, 6, 1, 6, 2, 5])
    q = dict(probs.beam_search(s, probs.ValueNet(seed=1), probs.QNet(seed=2)))
    assert q[3] == 1.0
    assert probs.lookahead_action(s, 1) == 3
    nxt, reward, done = s.play(3)
    assert (reward, done, nxt.winner) == (1, True, "X")


def test_python_callables_drive_search():
    s = probs.new_game(probs.Variant.CONNECT3_TEST)
    q = probs.beam_search_fn(s, lambda st: 0.0, lambda st: [0.0] * 4, expansions=5, max_depth=2)
    assert [a for a, _ in q] == [0, 1, 2, 3]
    assert all(v == 0.0 for _, v in q)


def test_ratings():
    assert probs.expected_score(1000, 1000) == 0.5
    r = probs.fit_ratings([("a", "random", 50, 0, 50)])
    assert r["random"] == 1000.0
    assert abs(r["a"] - 1000.0) < 1e-6
    wins, draws, losses = probs.baseline_match("lookahead2", "random", 40, seed=3)
    assert wins + draws + losses == 40
    assert wins > losses


def test_trainer_round_trip(tmp_path):
    cfg = {"game": "connect3_test", "n_episodes": 2, "expansions": 4, "max_depth": 2, "batch_size": 8, "seed": 4}
    t = probs.Trainer(json.dumps(cfg))
    m = json.loads(t.run_iteration())
    assert m["iteration"] == 1 == t.iteration
    path = tmp_path / "iter.probs"
    t.save(path)
    v, q, meta = probs.load_networks(path)
    assert json.loads(meta)["iteration"] == 1
    s = probs.new_game(probs.Variant.CONNECT3_TEST)
    assert v(s) == t.value_net(s)
    assert q(s) == t.q_net(s)
    path.write_bytes(b"nope")
    with pytest.raises(probs.CheckpointError):
        probs.load_networks(path)
