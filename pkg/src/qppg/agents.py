"""The four learners: REINFORCE (CPG), block-diagonal natural PG (QNPG),
fully preconditioned QPPG, and a quantum-embedded DQN, plus the
unregularized natural-PG baseline used in the link-adaptation comparison.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nets
from .envs import MODULATION_ORDERS, LinkAction
from .fisher import classical_fim, precondition_solve
from .nets import ActionDistribution, ParamLayout


@dataclass
class AgentConfig:
    alpha: float = 0.002
    gamma: float = 0.99
    xi: float = 0.1
    horizon: int = 10
    epsilon_start: float = 1.0
    epsilon_end: float = 0.01
    epsilon_decay: float = 0.995
    target_sync: int = 10
    buffer_capacity: int = 10_000
    batch_size: int = 32

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("learning rate must be positive")
        if not 0 < self.gamma < 1:
            raise ValueError("discount must lie in (0, 1)")
        if self.xi <= 0:
            raise ValueError("regularization strength must be positive")


@dataclass
class TrajectoryStep:
    obs: np.ndarray
    action: object
    logprob_grad: np.ndarray
    reward: float


@dataclass
class Trajectory:
    steps: list[TrajectoryStep] = field(default_factory=list)

    def rewards(self) -> np.ndarray:
        return np.array([s.reward for s in self.steps])

    def grads(self) -> np.ndarray:
        return np.array([s.logprob_grad for s in self.steps])

    def total_reward(self) -> float:
        return float(self.rewards().sum())


def compute_returns(rewards, gamma: float) -> np.ndarray:
    """Discounted returns G_t by backward recursion."""
    g = 0.0
    out = np.empty(len(rewards))
    for t in range(len(rewards) - 1, -1, -1):
        g = rewards[t] + gamma * g
        out[t] = g
    return out


def policy_gradient(traj: Trajectory, gamma: float) -> np.ndarray:
    """Single-trajectory likelihood-ratio gradient estimate, no baseline."""
    if not traj.steps:
        raise ValueError("empty trajectory")
    returns = compute_returns(traj.rewards(), gamma)
    return returns @ traj.grads()


def select_action(
    dist: ActionDistribution,
    mode: str,
    rng: np.random.Generator,
    epsilon: float = 0.0,
):
    """Pick a discrete index (plus a power draw when the Gaussian head exists).

    Modes: "sample" (categorical / Gaussian draw), "greedy" (argmax, mean),
    "epsilon_greedy" (uniform with prob epsilon, else greedy).
    """
    n = dist.probs.shape[0]
    if mode == "sample":
        idx = int(rng.choice(n, p=dist.probs))
    elif mode == "greedy":
        idx = int(np.argmax(dist.probs))
    elif mode == "epsilon_greedy":
        idx = int(rng.integers(n)) if rng.random() < epsilon else int(np.argmax(dist.probs))
    else:
        raise ValueError(f"unknown selection mode {mode!r}")
    if dist.mean is None:
        return idx
    power = dist.mean if mode == "greedy" else float(rng.normal(dist.mean, dist.std))
    return idx, power


class PolicyGradientAgent:
    """REINFORCE (CPG): theta <- theta + alpha * grad J."""

    kind = "cpg"

    def __init__(
        self,
        obs_dim: int,
        n_actions: int,
        cfg: AgentConfig,
        rng: np.random.Generator,
        width: int = 16,
        hybrid: bool = False,
        p_bounds: tuple[float, float] = (0.0, 1.0),
    ):
        self.cfg = cfg
        self.rng = rng
        self.hybrid = hybrid
        self.p_bounds = p_bounds
        self.layout: ParamLayout = nets.policy_layout(obs_dim, width, n_actions, gaussian_head=hybrid)
        self.theta = nets.init_params(self.layout, rng)

    def distribution(self, obs) -> ActionDistribution:
        return nets.forward(self.theta, self.layout, np.asarray(obs, dtype=float))

    def act(self, obs, greedy: bool = False):
        """Returns (net_action, env_action)."""
        dist = self.distribution(obs)
        net_action = select_action(dist, "greedy" if greedy else "sample", self.rng)
        return net_action, self.env_action(net_action)

    def env_action(self, net_action):
        if not self.hybrid:
            return net_action
        idx, power = net_action
        lo, hi = self.p_bounds
        return LinkAction(m=MODULATION_ORDERS[idx], p=float(np.clip(power, lo, hi)))

    def score(self, obs, net_action):
        return nets.logprob_and_grad(self.theta, self.layout, np.asarray(obs, dtype=float), net_action)

    def direction(self, traj: Trajectory, grad_j: np.ndarray) -> np.ndarray:
        return grad_j

    def update(self, traj: Trajectory) -> None:
        grad_j = policy_gradient(traj, self.cfg.gamma)
        delta = self.cfg.alpha * self.direction(traj, grad_j)
        if not np.all(np.isfinite(delta)):
            raise FloatingPointError("non-finite policy update")
        self.theta = self.theta + delta


class QPPGAgent(PolicyGradientAgent):
    """Full information-matrix preconditioning with Tikhonov regularization.

    The agent-level metric is the empirical Fisher matrix of the trajectory's
    per-step score vectors, which equals the quantum Fisher information of the
    square-root (amplitude) embedding of the policy distribution.
    """

    kind = "qppg"

    def direction(self, traj, grad_j):
        f_hat = classical_fim(traj.grads())
        return precondition_solve(f_hat, self.cfg.xi, grad_j)


class QNPGAgent(PolicyGradientAgent):
    """Block-diagonal (per-layer) preconditioning; off-block coupling ignored."""

    kind = "qnpg"

    def direction(self, traj, grad_j):
        grads = traj.grads()
        out = np.empty_like(grad_j)
        for _, start, length in self.layout.block_layout().blocks:
            sl = slice(start, start + length)
            f_block = classical_fim(grads[:, sl])
            out[sl] = precondition_solve(f_block, self.cfg.xi, grad_j[sl])
        return out


class NaturalPGAgent(PolicyGradientAgent):
    """Classical natural PG without Tikhonov regularization (baseline).

    Uses a pseudo-inverse of the empirical Fisher matrix (tiny jitter for
    numerical safety only), so it lacks QPPG's stabilizing xi-term.
    """

    kind = "npg"
    jitter = 1e-6

    def direction(self, traj, grad_j):
        f_hat = classical_fim(traj.grads())
        return precondition_solve(f_hat, self.jitter, grad_j)


class ReplayBuffer:
    """FIFO ring buffer of (obs, action, reward, next_obs, done) transitions."""

    def __init__(self, capacity: int):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._data: list[tuple] = []
        self._next = 0

    def __len__(self) -> int:
        return len(self._data)

    def push(self, transition: tuple) -> None:
        if len(self._data) < self.capacity:
            self._data.append(transition)
        else:
            self._data[self._next] = transition
        self._next = (self._next + 1) % self.capacity

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[tuple]:
        idx = rng.integers(len(self._data), size=batch_size)
        return [self._data[i] for i in idx]


class QDQNAgent:
    """Value-based agent: quantum feature embedding, linear Q-head, replay
    buffer, target network and epsilon-greedy exploration.
    """

    kind = "qdqn"

    def __init__(self, n_actions: int, cfg: AgentConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.rng = rng
        self.layout = nets.qdqn_layout(n_actions)
        self.theta = nets.init_params(self.layout, rng)
        sl = self.layout.slices()["embed"]
        self.theta[sl] = rng.uniform(-np.pi / 4, np.pi / 4, size=nets.N_EMBED_PARAMS)
        self.target_theta = self.theta.copy()
        self.buffer = ReplayBuffer(cfg.buffer_capacity)
        self.epsilon = cfg.epsilon_start
        self.episodes_done = 0

    def q_values(self, obs, target: bool = False) -> np.ndarray:
        theta = self.target_theta if target else self.theta
        return nets.q_values(theta, self.layout, np.asarray(obs, dtype=float))

    def act(self, obs, greedy: bool = False) -> int:
        q = self.q_values(obs)
        if greedy:
            return int(np.argmax(q))
        if self.rng.random() < self.epsilon:
            return int(self.rng.integers(q.shape[0]))
        return int(np.argmax(q))

    def observe(self, obs, action: int, reward: float, next_obs, done: bool) -> None:
        self.buffer.push((np.asarray(obs, float), int(action), float(reward), np.asarray(next_obs, float), bool(done)))
        if len(self.buffer) >= self.cfg.batch_size:
            self._train_step()

    def _train_step(self) -> None:
        batch = self.buffer.sample(self.cfg.batch_size, self.rng)
        grad = np.zeros_like(self.theta)
        for obs, action, reward, next_obs, done in batch:
            target = reward
            if not done:
                target += self.cfg.gamma * float(np.max(self.q_values(next_obs, target=True)))
            q_sa = float(self.q_values(obs)[action])
            # d/dtheta (target - Q)^2 = -2 (target - Q) dQ/dtheta
            grad += -2.0 * (target - q_sa) * nets.q_value_grad(self.theta, self.layout, obs, action)
        grad /= len(batch)
        if not np.all(np.isfinite(grad)):
            raise FloatingPointError("non-finite Q-update")
        self.theta = self.theta - self.cfg.alpha * grad

    def end_episode(self) -> None:
        self.episodes_done += 1
        self.epsilon = max(self.cfg.epsilon_end, self.epsilon * self.cfg.epsilon_decay)
        if self.episodes_done % self.cfg.target_sync == 0:
            self.target_theta = self.theta.copy()
