import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from adrc_lagrangian.controller import ControllerConfig, ControllerMode, replay_lambda
from adrc_lagrangian.errors import ConfigError, DivergenceError, ParameterError
from adrc_lagrangian.reference import ReferenceParams
from adrc_lagrangian.surrogate import TheoryInputs, lf_envelope
from adrc_lagrangian.toycmdp import (
    SoftmaxPolicy,
    TabularCmdp,
    controller_for,
    exact_returns,
    load_cmdp,
    parse_cmdp,
    reference_instance,
    sample_episodes,
    train,
)
from oracles import monte_carlo_returns


@pytest.fixture(scope="module")
def chain3():
    return reference_instance("chain3")


@pytest.fixture(scope="module")
def risky():
    return reference_instance()


def value_iteration(cmdp, pi, sweeps=3000):
    """Policy evaluation by fixed-point iteration (independent of the linear solve)."""
    P = np.einsum("sa,sat->st", pi, cmdp.transition)
    r = (pi * cmdp.reward).sum(1)
    c = (pi * cmdp.cost).sum(1)
    v = np.zeros(cmdp.n_states)
    vc = np.zeros(cmdp.n_states)
    for _ in range(sweeps):
        v = r + cmdp.gamma * P @ v
        vc = c + cmdp.gamma * P @ vc
    return cmdp.mu @ v, cmdp.mu @ vc


def single_state(gamma=0.9, reward=1.0):
    return TabularCmdp(np.ones((1, 1, 1)), [[reward]], [[0.0]], [1.0], gamma, 1.0)


# -- instance ---------------------------------------------------------------


def test_reference_instance_shape(risky):
    assert (risky.n_states, risky.n_actions, risky.gamma, risky.d) == (6, 2, 0.9, 25.0)
    assert risky.cost_bound == pytest.approx(100.0)
    assert risky.name == "risky_chain"


def test_truncation_horizon(risky, chain3):
    for m in (risky, chain3):
        T = m.truncation_horizon
        scale = max(m.cost_bound, np.abs(m.reward).max() / (1 - m.gamma))
        assert m.gamma ** T * scale < 1e-6
        assert m.gamma ** (T - 2) * scale >= 1e-6


def test_arrays_are_read_only(risky):
    with pytest.raises(ValueError):
        risky.cost[0, 0] = 1.0


def test_unconstrained_optimum_violates(risky):
    walk = np.tile([1.0, 0.0], (6, 1))
    short = np.tile([0.0, 1.0], (6, 1))
    J_w, Jc_w = exact_returns(risky, walk)
    J_s, Jc_s = exact_returns(risky, short)
    assert Jc_w == 0.0 and J_s > J_w
    assert Jc_s > risky.d


@pytest.mark.parametrize(
    "kw",
    [
        dict(cost=[[-1.0]]),
        dict(transition=np.full((1, 1, 1), 0.5)),
        dict(mu=[0.5]),
        dict(gamma=1.0),
        dict(reward=[[math.nan]]),
        dict(reward=[[1.0, 2.0]]),
        dict(transition=np.ones((1, 1))),
    ],
)
def test_cmdp_validation(kw):
    base = dict(transition=np.ones((1, 1, 1)), reward=[[1.0]], cost=[[0.0]], mu=[1.0], gamma=0.9, d=1.0)
    base.update(kw)
    with pytest.raises(ParameterError):
        TabularCmdp(**base)


# -- parsing ----------------------------------------------------------------

GOOD = """
states 1
actions 1
gamma 0.5
d 1
mu 1
T 0 0 0 1
R 0 0 2   # comment
"""


def test_parse_minimal():
    m = parse_cmdp(GOOD, name="tiny")
    assert m.name == "tiny" and m.reward[0, 0] == 2.0 and m.cost[0, 0] == 0.0
    assert exact_returns(m, np.ones((1, 1))) == pytest.approx((4.0, 0.0))


@pytest.mark.parametrize(
    "text, match",
    [
        (GOOD + "X 1\n", "unknown directive"),
        (GOOD.replace("gamma 0.5\n", ""), "missing directive 'gamma'"),
        (GOOD.replace("mu 1", "mu 1 0"), "mu has 2 entries"),
        (GOOD + "R 0 zero 1\n", "malformed R"),
        (GOOD + "T 0 0\n", "malformed T"),
        (GOOD.replace("T 0 0 0 1", "T 0 0 0 0.5"), "summing to 1"),
        (GOOD.replace("states 1", "states one"), "malformed header"),
    ],
)
def test_parse_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_cmdp(text)


def test_load_from_file(tmp_path):
    p = tmp_path / "tiny.cmdp"
    p.write_text(GOOD)
    assert load_cmdp(p).name == "tiny"


def test_unknown_bundled_instance():
    with pytest.raises(ConfigError):
        reference_instance("nope")


# -- exact returns ----------------------------------------------------------


def test_zero_reward_gives_zero_return(risky):
    m = TabularCmdp(risky.transition, np.zeros((6, 2)), risky.cost, risky.mu, risky.gamma, risky.d)
    assert exact_returns(m, SoftmaxPolicy.uniform(m))[0] == 0.0


@pytest.mark.parametrize("gamma", [0.5, 0.9, 0.99])
def test_single_state_geometric_series(gamma):
    J, Jc = exact_returns(single_state(gamma), np.ones((1, 1)))
    assert J == pytest.approx(1.0 / (1.0 - gamma), rel=1e-12) and Jc == 0.0


def test_exact_matches_value_iteration(risky, chain3):
    rng = np.random.default_rng(5)
    for m in (risky, chain3):
        for _ in range(5):
            pi = SoftmaxPolicy(rng.normal(size=(m.n_states, m.n_actions))).probs()
            assert exact_returns(m, pi) == pytest.approx(value_iteration(m, pi), rel=1e-10, abs=1e-10)


@pytest.mark.parametrize("name, episodes", [("chain3", 10**6), ("risky_chain", 2 * 10**5)])
def test_exact_matches_monte_carlo(name, episodes):
    m = reference_instance(name)
    pi = SoftmaxPolicy(np.random.default_rng(1).normal(size=(m.n_states, m.n_actions))).probs()
    J, Jc = exact_returns(m, pi)
    mJ, mJc, seJ, seJc = monte_carlo_returns(
        m.transition, m.reward, m.cost, m.mu, m.gamma, pi, episodes, m.truncation_horizon, np.random.default_rng(2)
    )
    trunc = m.gamma ** m.truncation_horizon * m.cost_bound
    assert abs(mJ - J) <= 3 * seJ + trunc
    assert abs(mJc - Jc) <= 3 * seJc + trunc


def test_sampled_cost_is_unbiased(chain3):
    pi = SoftmaxPolicy.uniform(chain3).probs()
    _, Jc = exact_returns(chain3, pi)
    batch = sample_episodes(chain3, pi, 10**4, np.random.default_rng(9))
    Gc = batch.discounted_to_go(chain3.gamma, batch.costs)[0]
    assert abs(Gc.mean() - Jc) < 4 * Gc.std(ddof=1) / math.sqrt(Gc.size)


def test_hoeffding_radius_coverage(chain3):
    N, eta, trials = 32, 0.05, 400
    eps = lf_envelope(TheoryInputs(0.0, N, 1.0, chain3.cost_bound, chain3.gamma, 0.0, 1, eta)).eps_N
    pi = SoftmaxPolicy.uniform(chain3).probs()
    _, Jc = exact_returns(chain3, pi)
    rng = np.random.default_rng(11)
    hits = 0
    for _ in range(trials):
        b = sample_episodes(chain3, pi, N, rng)
        hits += abs(b.discounted_to_go(chain3.gamma, b.costs)[0].mean() - Jc) <= eps
    assert hits / trials >= 1 - eta


def test_sample_episodes_validation(chain3):
    with pytest.raises(ParameterError):
        sample_episodes(chain3, SoftmaxPolicy.uniform(chain3), 0, np.random.default_rng(0))
    b = sample_episodes(chain3, SoftmaxPolicy.uniform(chain3), 4, np.random.default_rng(0), horizon=7)
    assert b.states.shape == (7, 4) and b.costs.shape == (7, 4)
    assert np.all(b.states[0] != 2)  # mu puts no mass on state 2


@given(arrays(float, (4, 3), elements=st.floats(-40, 40)))
def test_policy_rows_are_distributions(logits):
    p = SoftmaxPolicy(logits).probs()
    assert np.all(p >= 0.0) and np.allclose(p.sum(1), 1.0, atol=1e-12)


def test_policy_validation():
    with pytest.raises(ParameterError):
        SoftmaxPolicy(np.zeros(3))
    with pytest.raises(ParameterError):
        SoftmaxPolicy(np.zeros((2, 2)), step_size=0.0)
    p = SoftmaxPolicy(np.zeros((2, 2)))
    q = p.copy()
    q.logits[0, 0] = 1.0
    assert p.logits[0, 0] == 0.0


# -- training ---------------------------------------------------------------


@pytest.mark.parametrize("mode", list(ControllerMode))
def test_in_loop_lambda_replays_offline(risky, mode):
    ctrl = controller_for(mode) if mode is not ControllerMode.ADRC_CONTINUOUS else ControllerConfig.raw(mode)
    log = train(risky, SoftmaxPolicy.uniform(risky, seed=4), ctrl, epochs=40, episodes_per_epoch=8)
    assert replay_lambda(ctrl, log.Jc_hat, log.reference) == log.lam


def test_training_is_deterministic(risky):
    ctrl = controller_for("adrc_algorithm1")
    a = train(risky, SoftmaxPolicy.uniform(risky, seed=2), ctrl, epochs=30, episodes_per_epoch=8)
    b = train(risky, SoftmaxPolicy.uniform(risky, seed=2), ctrl, epochs=30, episodes_per_epoch=8)
    assert a.to_csv() == b.to_csv()
    assert all(np.array_equal(x, y) for x, y in zip(a.episode_costs, b.episode_costs))
    c = train(risky, SoftmaxPolicy.uniform(risky, seed=3), ctrl, epochs=30, episodes_per_epoch=8)
    assert c.to_csv() != a.to_csv()


def test_adrc_reference_is_anchored_at_first_estimate(risky):
    log = train(risky, SoftmaxPolicy.uniform(risky), controller_for("adrc_algorithm1"), epochs=5, episodes_per_epoch=8)
    assert log.reference[0] == (log.Jc_hat[0], 0.0, log.reference[0][2])
    lag = train(risky, SoftmaxPolicy.uniform(risky), controller_for("classical_lag"), epochs=5, episodes_per_epoch=8)
    assert set(lag.reference) == {(25.0, 0.0, 0.0)}


def test_zero_cap_is_unconstrained_ascent(risky):
    ctrl = controller_for("classical_lag", lambda_max=0.0, lambda_init=0.0)
    start, end = [], []
    for seed in range(5):
        log = train(risky, SoftmaxPolicy.uniform(risky, seed=seed), ctrl, epochs=60, episodes_per_epoch=16)
        assert set(log.lam) == {0.0}
        start.append(log.J_exact[0])
        end.append(log.J_exact[-1])
    assert np.mean(end) > np.mean(start)


def test_log_contents(risky):
    log = train(risky, SoftmaxPolicy.uniform(risky), controller_for("pid_lag"), epochs=3, episodes_per_epoch=5)
    assert log.epochs == 3 and log.mode == "pid_lag" and log.seed == 0
    costs = log.all_episode_costs()
    assert len(costs.returns) == 15 and costs.d == 25.0
    lines = log.to_csv().splitlines()
    assert lines[0].split(",") == list(log.columns) and len(lines) == 4


def test_custom_reference(risky):
    ref = ReferenceParams(0.5, 20.0, 0.0)
    log = train(risky, SoftmaxPolicy.uniform(risky), controller_for("classical_lag"), ref, epochs=2, episodes_per_epoch=4)
    assert log.d == 20.0 and log.reference[0] == (20.0, 0.0, 0.0)


def test_divergent_logits_abort(risky):
    policy = SoftmaxPolicy.uniform(risky, step_size=1e4)
    with pytest.raises(DivergenceError, match="logits") as info:
        train(risky, policy, controller_for("classical_lag"), epochs=50, episodes_per_epoch=8)
    assert info.value.step is not None


def test_training_validation(risky):
    with pytest.raises(ParameterError):
        train(risky, SoftmaxPolicy.uniform(risky), controller_for("classical_lag"), epochs=0)
