import json

import numpy as np
import pytest

from latent_bandit.env import (
    Environment,
    NonErgodicChainError,
    RewardMatrix,
    TransitionMatrix,
    instance_from_dict,
    instance_to_dict,
    load_instance,
    make_environment,
    make_instance,
    make_transition_matrix,
    sample_instance,
    save_instance,
    stationary_distribution,
)

# Reward matrix of the four-state disambiguation example: rows are states,
# columns are arms.
EXAMPLE_MEANS = np.array([
    [0.4, 0.3],
    [0.4, 0.5],
    [0.6, 0.5],
    [0.6, 0.3],
])


def _example(p_stay, sigma, seed):
    from latent_bandit.env import Instance
    return Instance(4, 2, p_stay, sigma, seed, RewardMatrix(EXAMPLE_MEANS))


def test_transition_matrix_two_state_half():
    m = make_transition_matrix(2, 0.5)
    assert np.array_equal(m.probs, [[0.5, 0.5], [0.5, 0.5]])


def test_transition_matrix_single_state():
    m = make_transition_matrix(1, 0.99)
    assert np.array_equal(m.probs, [[1.0]])


def test_transition_matrix_uniform_off_diagonal():
    m = make_transition_matrix(4, 0.95)
    assert np.allclose(np.diag(m.probs), 0.95)
    off = m.probs[~np.eye(4, dtype=bool)]
    assert np.allclose(off, 0.05 / 3)
    assert np.allclose(m.probs.sum(axis=1), 1.0, atol=1e-12)


def test_transition_matrix_rejects_bad_args():
    with pytest.raises(ValueError):
        make_transition_matrix(0, 0.5)
    with pytest.raises(ValueError):
        make_transition_matrix(3, 1.5)
    with pytest.raises(ValueError):
        make_transition_matrix(3, -0.1)


def test_reward_matrix_validation():
    with pytest.raises(ValueError):
        RewardMatrix(np.array([[0.5, 1.2]]))
    with pytest.raises(ValueError):
        RewardMatrix(np.array([[-0.1]]))


def test_stationary_uniform_for_symmetric_construction():
    for s, p in [(2, 0.5), (5, 0.9), (10, 0.99)]:
        pi = stationary_distribution(make_transition_matrix(s, p))
        assert np.allclose(pi, np.full(s, 1.0 / s), atol=1e-10)


def test_stationary_two_state_hand_solved():
    # balance equation pi0 * 0.1 = pi1 * 0.3 gives (0.75, 0.25)
    pi = stationary_distribution(TransitionMatrix(np.array([[0.9, 0.1], [0.3, 0.7]])))
    assert np.allclose(pi, [0.75, 0.25], atol=1e-10)


def test_stationary_single_state():
    assert np.allclose(stationary_distribution(make_transition_matrix(1, 0.3)), [1.0])


def test_stationary_rejects_reducible_chain():
    with pytest.raises(NonErgodicChainError):
        stationary_distribution(make_transition_matrix(3, 1.0))


def test_sample_instance_range_and_determinism():
    a = sample_instance(6, 3, 42)
    b = sample_instance(6, 3, 42)
    c = sample_instance(6, 3, 43)
    assert a.means.min() >= 0.0 and a.means.max() <= 1.0
    assert np.array_equal(a.means, b.means)
    assert not np.array_equal(a.means, c.means)


def test_sample_instance_mean_close_to_half():
    means = sample_instance(100, 100, 7).means
    assert abs(means.mean() - 0.5) < 0.02


def test_step_single_reward_from_pre_transition_state():
    inst = _example(0.99, 0.0, 0)
    env = make_environment(inst, 5)
    env.current_state = 2
    out = env.step_single(0)
    assert out.reward == 0.6
    assert out.true_state == 2
    assert out.gap_of_played == pytest.approx(0.0)


def test_step_single_gap_definition():
    inst = make_instance(5, 3, 0.9, 0.1, 11)
    env = make_environment(inst, 3)
    for arm in range(3):
        env2 = make_environment(inst, 3)
        s = env2.current_state
        out = env2.step_single(arm)
        expected = inst.rewards.means[s].max() - inst.rewards.means[s, arm]
        assert out.gap_of_played == pytest.approx(expected)
        assert out.gap_of_played >= 0.0


def test_absorbing_chain_never_moves():
    inst = _example(1.0, 0.0, 0)
    env = make_environment(inst, 9)
    start = env.current_state
    for _ in range(1000):
        env.step_single(0)
    assert env.current_state == start


def test_step_dual_example_pair():
    inst = _example(0.99, 0.0, 0)
    env = make_environment(inst, 4)
    env.current_state = 1
    out = env.step_dual(0, 1)
    assert (out.reward_c, out.reward_t) == (0.4, 0.5)
    assert out.gap_c == pytest.approx(0.1)
    assert out.gap_t == pytest.approx(0.0)


def test_step_dual_same_arm_noiseless_equal():
    inst = _example(0.9, 0.0, 0)
    env = make_environment(inst, 4)
    out = env.step_dual(1, 1)
    assert out.reward_c == out.reward_t


def test_dual_noise_variance_doubled():
    inst = make_instance(1, 2, 0.5, 0.2, 3)
    env = make_environment(inst, 77)
    draws = np.array([env.step_dual(0, 0).reward_c for _ in range(10_000)])
    var = draws.var(ddof=1)
    assert abs(var - 2 * 0.2**2) / (2 * 0.2**2) < 0.1


def test_dual_noise_split_mode_keeps_single_unit_variance():
    inst = make_instance(1, 2, 0.5, 0.2, 3)
    env = make_environment(inst, 77, dual_noise_factor=1.0)
    draws = np.array([env.step_dual(0, 0).reward_c for _ in range(10_000)])
    assert abs(draws.var(ddof=1) - 0.2**2) / 0.2**2 < 0.1


def test_actions_never_influence_state_trajectory():
    inst = make_instance(6, 3, 0.8, 0.3, 21)
    env_a = make_environment(inst, 99)
    env_b = make_environment(inst, 99)
    env_c = make_environment(inst, 99)
    rng = np.random.default_rng(0)
    traj_a, traj_b, traj_c = [], [], []
    for _ in range(500):
        traj_a.append(env_a.step_single(int(rng.integers(3))).true_state)
        traj_b.append(env_b.step_single(0).true_state)
        traj_c.append(env_c.step_dual(1, 2).true_state)
    assert traj_a == traj_b == traj_c


def test_environment_determinism_bit_for_bit():
    inst = make_instance(3, 2, 0.9, 0.25, 5)
    rewards = []
    for _ in range(2):
        env = make_environment(inst, 31)
        rewards.append([env.step_single(t % 2).reward for t in range(200)])
    assert rewards[0] == rewards[1]


def test_invalid_arm_raises():
    inst = make_instance(2, 2, 0.9, 0.0, 1)
    env = make_environment(inst, 0)
    with pytest.raises(ValueError):
        env.step_single(2)
    with pytest.raises(ValueError):
        env.step_dual(0, 5)


def test_environment_rejects_negative_noise():
    inst = make_instance(2, 2, 0.9, 0.0, 1)
    with pytest.raises(ValueError):
        Environment(inst.rewards, inst.transition_matrix(), -0.1, 0)


def test_instance_json_round_trip(tmp_path):
    inst = make_instance(3, 2, 0.95, 0.05, 17)
    d = instance_to_dict(inst)
    assert set(d) == {"S", "K", "p_stay", "sigma", "seed", "means"}
    assert d["means"] == [float(x) for x in inst.rewards.means.ravel()]
    back = instance_from_dict(json.loads(json.dumps(d)))
    assert np.array_equal(back.rewards.means, inst.rewards.means)
    assert back.p_stay == inst.p_stay

    path = tmp_path / "instance.json"
    save_instance(inst, path)
    loaded = load_instance(path)
    assert np.array_equal(loaded.rewards.means, inst.rewards.means)
    assert (loaded.num_states, loaded.num_arms, loaded.seed) == (3, 2, 17)


def test_switch_rate_matches_one_minus_p_stay():
    inst = make_instance(8, 2, 0.9, 0.0, 2)
    env = make_environment(inst, 55)
    prev = env.current_state
    switches = 0
    n = 20_000
    for _ in range(n):
        env.step_single(0)
        switches += env.current_state != prev
        prev = env.current_state
    assert abs(switches / n - 0.1) < 0.01
