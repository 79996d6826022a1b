import math

import pytest

import p2pgrid


def small_learner():
    cfg = p2pgrid.default_config()
    cfg["learner"].update(lstm_hidden=4, actor_hidden=[8], critic_hidden=[8], epochs=1, buffer_episodes=1)
    return cfg


def test_version_and_defaults():
    assert p2pgrid.__version__ == "0.1.0"
    cfg = p2pgrid.default_config()
    assert len(cfg["fleet"]) == 4
    assert p2pgrid.config_hash(cfg) == p2pgrid.config_hash(None)


def test_bad_config_raises():
    with pytest.raises(p2pgrid.ConfigError, match="mechanism"):
        p2pgrid.simulate({"mechanism": "dutch"}, 1)
    with pytest.raises(p2pgrid.ConfigError):
        p2pgrid.Env({"learner": {"nope": 1}})


def test_clear_two_by_two():
    fills = p2pgrid.clear("jpq", [(1, 1.0, 5), (2, 0.8, 3), (3, -0.5, 4), (4, -0.9, 6)])
    assert len(fills) == 1
    assert fills[0]["buyer"] == 1 and fills[0]["seller"] == 3
    assert fills[0]["kwh"] == 4.0 and fills[0]["buyer_price"] == 0.75


def test_gae_and_loss():
    assert p2pgrid.gae([1.0, 1.0], [0.0, 0.0]) == pytest.approx([1.9025, 1.0])
    assert p2pgrid.actor_loss([2.0], [1.0], [0.0], 0.2, 0.0) == -1.2


def test_env_episode():
    env = p2pgrid.Env()
    obs = env.reset(3)
    assert env.num_agents == 4
    assert len(obs) == 4 and len(obs[0]) == 44
    steps = 0
    while not env.done:
        out = env.step([[0.0, 0.5, 1.0]] * 4)
        assert len(out["rewards"]) == 4
        assert all(math.isfinite(r) for r in out["rewards"])
        steps += 1
    assert steps == 24


def test_simulate_and_compare_are_deterministic():
    a = p2pgrid.simulate(None, 2)
    b = p2pgrid.simulate(None, 2)
    assert [m["reward"] for m in a] == [m["reward"] for m in b]
    assert all(m["max_balance_residual"] < 1e-9 for m in a)
    summary, deltas = p2pgrid.compare(None, ["jpq", "vvda"], 2)
    assert summary.startswith("mechanism,")
    assert deltas.count("\n") == 2


def test_train_writes_checkpoint(tmp_path):
    metrics = p2pgrid.train(small_learner(), 2, tmp_path)
    assert len(metrics) == 2
    assert (tmp_path / "checkpoint.json").exists()
    more = p2pgrid.train(small_learner(), 1, tmp_path, resume=True)
    assert more[0]["episode"] == 2
