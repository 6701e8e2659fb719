import numpy as np
import pytest

from qppg import nets
from qppg.agents import (
    AgentConfig,
    NaturalPGAgent,
    PolicyGradientAgent,
    QDQNAgent,
    QNPGAgent,
    QPPGAgent,
    ReplayBuffer,
    Trajectory,
    TrajectoryStep,
    compute_returns,
    policy_gradient,
    select_action,
)
from qppg.envs import LinkAction, QuantumSingleQubitEnv
from qppg.fisher import BlockLayout, classical_fim, precondition_solve
from qppg.nets import ActionDistribution


def make_traj(rng, dim=10, steps=6):
    traj = Trajectory()
    for _ in range(steps):
        traj.steps.append(
            TrajectoryStep(
                obs=rng.standard_normal(3),
                action=0,
                logprob_grad=rng.standard_normal(dim),
                reward=float(rng.uniform()),
            )
        )
    return traj


class TestAgentConfig:
    def test_defaults(self):
        cfg = AgentConfig()
        assert cfg.alpha == 0.002
        assert cfg.gamma == 0.99
        assert cfg.xi == 0.1
        assert cfg.horizon == 10

    def test_validation(self):
        with pytest.raises(ValueError):
            AgentConfig(alpha=0.0)
        with pytest.raises(ValueError):
            AgentConfig(gamma=1.0)
        with pytest.raises(ValueError):
            AgentConfig(xi=-0.1)


class TestComputeReturns:
    def test_closed_form(self):
        rewards = [1.0, 2.0, 3.0]
        g = compute_returns(rewards, 0.5)
        assert np.allclose(g, [1 + 0.5 * (2 + 0.5 * 3), 2 + 0.5 * 3, 3.0])

    def test_matches_direct_sum(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            rewards = rng.standard_normal(rng.integers(1, 15))
            gamma = rng.uniform(0.1, 0.999)
            g = compute_returns(rewards, gamma)
            for t in range(len(rewards)):
                direct = sum(gamma ** (k - t) * rewards[k] for k in range(t, len(rewards)))
                assert g[t] == pytest.approx(direct, rel=1e-12)

    def test_gamma_zero_limit(self):
        assert np.allclose(compute_returns([3.0, 1.0, 4.0], 1e-300), [3.0, 1.0, 4.0])


class TestPolicyGradient:
    def test_weighting_identity(self):
        rng = np.random.default_rng(1)
        traj = make_traj(rng)
        grad = policy_gradient(traj, 0.9)
        expected = sum(
            g * s.logprob_grad
            for g, s in zip(compute_returns(traj.rewards(), 0.9), traj.steps)
        )
        assert np.allclose(grad, expected)

    def test_empty_trajectory(self):
        with pytest.raises(ValueError):
            policy_gradient(Trajectory(), 0.9)

    def test_two_armed_bandit_oracle(self):
        # Softmax bandit with rewards (1, 0): grad J w.r.t. the two logits is
        # exactly (p0 p1, -p0 p1). The Monte Carlo single-step REINFORCE
        # estimator must match in expectation.
        rng = np.random.default_rng(2)
        logits = np.array([0.4, -0.3])
        e = np.exp(logits - logits.max())
        probs = e / e.sum()
        acc = np.zeros(2)
        n = 200_000
        for a in rng.choice(2, size=n, p=probs):
            score = -probs.copy()
            score[a] += 1.0
            reward = 1.0 if a == 0 else 0.0
            acc += reward * score
        est = acc / n
        exact = np.array([probs[0] * probs[1], -probs[0] * probs[1]])
        assert np.allclose(est, exact, atol=0.005)


class TestSelectAction:
    def test_greedy_picks_argmax(self):
        dist = ActionDistribution(probs=np.array([0.1, 0.7, 0.2]))
        assert select_action(dist, "greedy", np.random.default_rng(0)) == 1

    def test_sample_frequencies(self):
        rng = np.random.default_rng(3)
        dist = ActionDistribution(probs=np.array([0.2, 0.5, 0.3]))
        counts = np.bincount(
            [select_action(dist, "sample", rng) for _ in range(50_000)], minlength=3
        )
        assert np.allclose(counts / 50_000, dist.probs, atol=0.01)

    def test_epsilon_greedy_limits(self):
        rng = np.random.default_rng(4)
        dist = ActionDistribution(probs=np.array([0.9, 0.1]))
        assert select_action(dist, "epsilon_greedy", rng, epsilon=0.0) == 0
        picks = [select_action(dist, "epsilon_greedy", rng, epsilon=1.0) for _ in range(10_000)]
        assert abs(np.mean(picks) - 0.5) < 0.02

    def test_gaussian_head(self):
        rng = np.random.default_rng(5)
        dist = ActionDistribution(probs=np.array([1.0]), mean=0.4, std=0.05)
        idx, power = select_action(dist, "greedy", rng)
        assert idx == 0 and power == 0.4
        draws = [select_action(dist, "sample", rng)[1] for _ in range(20_000)]
        assert np.mean(draws) == pytest.approx(0.4, abs=0.005)
        assert np.std(draws) == pytest.approx(0.05, rel=0.05)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            select_action(ActionDistribution(probs=np.array([1.0])), "softmax", np.random.default_rng(0))


class TestUpdateDirections:
    def _agent(self, cls, seed=0, **kw):
        return cls(3, 5, AgentConfig(), np.random.default_rng(seed), width=8, **kw)

    def test_cpg_direction_is_plain_gradient(self):
        rng = np.random.default_rng(6)
        agent = self._agent(PolicyGradientAgent)
        traj = make_traj(rng, dim=agent.theta.size)
        g = rng.standard_normal(agent.theta.size)
        assert np.array_equal(agent.direction(traj, g), g)

    def test_qppg_direction_solves_regularized_fim(self):
        rng = np.random.default_rng(7)
        agent = self._agent(QPPGAgent)
        traj = make_traj(rng, dim=agent.theta.size, steps=12)
        g = rng.standard_normal(agent.theta.size)
        d = agent.direction(traj, g)
        f = classical_fim(traj.grads())
        assert np.allclose((f + 0.1 * np.eye(f.shape[0])) @ d, g, atol=1e-8)

    def test_qnpg_single_block_equals_qppg(self):
        # Collapsing the layer partition to one all-parameter block makes the
        # block-diagonal update identical to the full preconditioned one.
        rng = np.random.default_rng(8)
        qnpg = self._agent(QNPGAgent, seed=1)
        qppg = self._agent(QPPGAgent, seed=1)
        d = qnpg.theta.size

        class FlatLayout:
            @staticmethod
            def block_layout():
                return BlockLayout((("all", 0, d),))

        traj = make_traj(rng, dim=d, steps=12)
        g = rng.standard_normal(d)
        full = qppg.direction(traj, g)
        qnpg.layout = FlatLayout()
        assert np.allclose(qnpg.direction(traj, g), full, atol=1e-10)

    def test_qnpg_block_structure(self):
        rng = np.random.default_rng(9)
        agent = self._agent(QNPGAgent)
        traj = make_traj(rng, dim=agent.theta.size, steps=12)
        g = rng.standard_normal(agent.theta.size)
        d = agent.direction(traj, g)
        grads = traj.grads()
        for _, start, length in agent.layout.block_layout().blocks:
            sl = slice(start, start + length)
            expected = precondition_solve(classical_fim(grads[:, sl]), 0.1, g[sl])
            assert np.allclose(d[sl], expected, atol=1e-8)

    def test_npg_uses_tiny_jitter_only(self):
        rng = np.random.default_rng(10)
        agent = self._agent(NaturalPGAgent)
        traj = make_traj(rng, dim=agent.theta.size, steps=12)
        g = rng.standard_normal(agent.theta.size)
        d = agent.direction(traj, g)
        f = classical_fim(traj.grads())
        assert np.allclose((f + 1e-6 * np.eye(f.shape[0])) @ d, g, atol=1e-6)

    def test_update_moves_by_alpha_times_direction(self):
        rng = np.random.default_rng(11)
        agent = self._agent(PolicyGradientAgent)
        traj = make_traj(rng, dim=agent.theta.size)
        before = agent.theta.copy()
        agent.update(traj)
        expected = before + agent.cfg.alpha * policy_gradient(traj, agent.cfg.gamma)
        assert np.allclose(agent.theta, expected)

    def test_update_rejects_nonfinite(self):
        rng = np.random.default_rng(12)
        agent = self._agent(PolicyGradientAgent)
        traj = make_traj(rng, dim=agent.theta.size)
        traj.steps[0].logprob_grad[0] = np.inf
        with pytest.raises(FloatingPointError):
            agent.update(traj)

    def test_qppg_improves_on_noiseless_env(self):
        # Sanity check the full loop: average reward over the last 30 of 120
        # episodes beats the first 30 on the noiseless single-qubit task.
        cfg = AgentConfig()
        rng = np.random.default_rng(42)
        env = QuantumSingleQubitEnv(noise_level=0.0, collapse_prob=0.0, seed=123)
        agent = QPPGAgent(env.obs_dim, env.n_actions, cfg, rng, width=16)
        totals = []
        for _ in range(120):
            obs = env.reset()
            traj = Trajectory()
            done = False
            while not done:
                net_a, env_a = agent.act(obs)
                _, grad = agent.score(obs, net_a)
                next_obs, r, done = env.step(env_a)
                traj.steps.append(TrajectoryStep(obs, net_a, grad, r))
                obs = next_obs
            agent.update(traj)
            totals.append(traj.total_reward())
        assert np.mean(totals[-30:]) > np.mean(totals[:30])


class TestHybridAgent:
    def test_env_action_maps_to_link_action(self):
        agent = PolicyGradientAgent(
            9, 3, AgentConfig(), np.random.default_rng(0), width=8, hybrid=True
        )
        action = agent.env_action((2, 1.7))
        assert isinstance(action, LinkAction)
        assert action.m == 64
        assert action.p == 1.0  # clipped to p_max

    def test_act_returns_pair(self):
        agent = PolicyGradientAgent(
            9, 3, AgentConfig(), np.random.default_rng(1), width=8, hybrid=True
        )
        net_a, env_a = agent.act(np.zeros(9))
        idx, power = net_a
        assert 0 <= idx < 3
        assert env_a.m in (4, 16, 64)
        assert 0.0 <= env_a.p <= 1.0


class TestReplayBuffer:
    def test_fifo_overwrite_property(self):
        buf = ReplayBuffer(capacity=100)
        for i in range(20_000):
            buf.push((i,))
        assert len(buf) == 100
        kept = sorted(t[0] for t in buf._data)
        assert kept == list(range(19_900, 20_000))

    def test_partial_fill(self):
        buf = ReplayBuffer(capacity=10)
        for i in range(4):
            buf.push((i,))
        assert len(buf) == 4
        assert sorted(t[0] for t in buf._data) == [0, 1, 2, 3]

    def test_sample_uniform(self):
        buf = ReplayBuffer(capacity=50)
        for i in range(50):
            buf.push((i,))
        rng = np.random.default_rng(13)
        draws = [t[0] for t in buf.sample(30_000, rng)]
        counts = np.bincount(draws, minlength=50)
        assert np.allclose(counts / 30_000, 1 / 50, atol=0.01)

    def test_invalid_capacity(self):
        with pytest.raises(ValueError):
            ReplayBuffer(0)


class TestQDQNAgent:
    def _agent(self, seed=0, **cfg_kw):
        return QDQNAgent(5, AgentConfig(**cfg_kw), np.random.default_rng(seed))

    def test_embed_init_range(self):
        agent = self._agent()
        embed = agent.layout.get(agent.theta, "embed")
        assert np.all(np.abs(embed) <= np.pi / 4)

    def test_epsilon_decay_schedule(self):
        agent = self._agent()
        assert agent.epsilon == 1.0
        for _ in range(3):
            agent.end_episode()
        assert agent.epsilon == pytest.approx(0.995**3)
        for _ in range(5000):
            agent.end_episode()
        assert agent.epsilon == 0.01

    def test_target_sync_every_ten_episodes(self):
        agent = self._agent()
        agent.theta = agent.theta + 1.0
        for _ in range(9):
            agent.end_episode()
        assert not np.allclose(agent.target_theta, agent.theta)
        agent.end_episode()
        assert np.array_equal(agent.target_theta, agent.theta)

    def test_no_training_before_batch_filled(self):
        agent = self._agent()
        before = agent.theta.copy()
        obs = np.zeros(3)
        for _ in range(agent.cfg.batch_size - 1):
            agent.observe(obs, 0, 1.0, obs, False)
        assert np.array_equal(agent.theta, before)
        agent.observe(obs, 0, 1.0, obs, False)
        assert not np.array_equal(agent.theta, before)

    def test_greedy_act_is_argmax(self):
        agent = self._agent(seed=3)
        obs = np.array([0.3, 0.4, 0.0])
        assert agent.act(obs, greedy=True) == int(np.argmax(agent.q_values(obs)))

    def test_training_reduces_td_error_on_fixed_transition(self):
        # A single repeated transition with done=True: the Q-value of the taken
        # action must move toward the observed reward.
        agent = self._agent(seed=4, alpha=0.05)
        obs = np.array([0.2, -0.1, 0.3])
        reward = 1.0
        err0 = abs(reward - agent.q_values(obs)[2])
        for _ in range(200):
            agent.observe(obs, 2, reward, obs, True)
        assert abs(reward - agent.q_values(obs)[2]) < err0
