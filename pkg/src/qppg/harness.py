"""Experiment orchestration: configs, multi-seed training, metrics
(episodes-to-success, robustness, ergodic capacity), and persistence.
"""

from __future__ import annotations

import dataclasses
import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agents import (
    AgentConfig,
    NaturalPGAgent,
    PolicyGradientAgent,
    QDQNAgent,
    QNPGAgent,
    QPPGAgent,
    Trajectory,
    TrajectoryStep,
)
from .envs import ClassicalTwoStateEnv, QuantumSingleQubitEnv, RayleighLinkEnv

DEFAULT_SEEDS = (42, 99, 123, 256, 512)
SUCCESS_THRESHOLD = 9.0
WINDOW = 25

ENV_KINDS = ("classical", "quantum", "link")
AGENT_KINDS = ("cpg", "qnpg", "qppg", "qdqn", "npg")


@dataclass
class ExperimentConfig:
    env: str = "quantum"
    agent: str = "qppg"
    episodes: int = 500
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    noise_level: float = 0.03
    noise_model: str = "trajectory"
    width: int = 16
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
    success_threshold: float = SUCCESS_THRESHOLD
    window: int = WINDOW
    n_antennas: int = 4
    pilot_snr_db: float = 10.0
    p_max: float = 1.0
    sigma2_low: float = 0.05
    sigma2_high: float = 0.2
    out_dir: str = "runs"

    def __post_init__(self):
        if self.env not in ENV_KINDS:
            raise ValueError(f"unknown env {self.env!r}")
        if self.agent not in AGENT_KINDS:
            raise ValueError(f"unknown agent {self.agent!r}")
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        if not self.seeds or len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be nonempty and distinct")

    def agent_config(self) -> AgentConfig:
        return AgentConfig(
            alpha=self.alpha,
            gamma=self.gamma,
            xi=self.xi,
            horizon=self.horizon,
            epsilon_start=self.epsilon_start,
            epsilon_end=self.epsilon_end,
            epsilon_decay=self.epsilon_decay,
            target_sync=self.target_sync,
            buffer_capacity=self.buffer_capacity,
            batch_size=self.batch_size,
        )


def _coerce(value: str, typ):
    if typ is int:
        return int(value)
    if typ is float:
        return float(value)
    if typ is str:
        return value
    if typ == tuple[int, ...]:
        return tuple(int(v) for v in value.split(",") if v.strip())
    raise TypeError(f"unsupported config field type {typ}")


def parse_config(path: str | Path, overrides: dict | None = None) -> ExperimentConfig:
    """Flat key = value config file; '#' starts a comment; unknown keys error."""
    hints = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    kwargs = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in hints:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        default = hints[key].default
        if key == "seeds":
            kwargs[key] = _coerce(value, tuple[int, ...])
        else:
            kwargs[key] = _coerce(value, type(default))
    if overrides:
        kwargs.update(overrides)
    return ExperimentConfig(**kwargs)


def make_env(cfg: ExperimentConfig, rng_seed=None):
    if cfg.env == "classical":
        return ClassicalTwoStateEnv(noise_prob=cfg.noise_level, horizon=cfg.horizon, seed=rng_seed)
    if cfg.env == "quantum":
        return QuantumSingleQubitEnv(
            noise_level=cfg.noise_level,
            noise_model=cfg.noise_model,
            horizon=cfg.horizon,
            seed=rng_seed,
        )
    return RayleighLinkEnv(
        n_antennas=cfg.n_antennas,
        pilot_snr_db=cfg.pilot_snr_db,
        p_max=cfg.p_max,
        sigma2_range=(cfg.sigma2_low, cfg.sigma2_high),
        horizon=cfg.horizon,
        seed=rng_seed,
    )


_PG_AGENTS = {
    "cpg": PolicyGradientAgent,
    "qnpg": QNPGAgent,
    "qppg": QPPGAgent,
    "npg": NaturalPGAgent,
}


def make_agent(cfg: ExperimentConfig, env, rng: np.random.Generator):
    acfg = cfg.agent_config()
    if cfg.agent == "qdqn":
        return QDQNAgent(env.n_actions, acfg, rng)
    cls = _PG_AGENTS[cfg.agent]
    return cls(
        env.obs_dim,
        env.n_actions,
        acfg,
        rng,
        width=cfg.width,
        hybrid=(cfg.env == "link"),
        p_bounds=(0.0, cfg.p_max),
    )


@dataclass
class RunRecord:
    seed: int
    rewards: list[float]
    moving_avg: list[float]
    episodes_to_success: int | None
    failed: bool = False
    robustness: dict[str, float] = field(default_factory=dict)


def collect_episode(env, agent, greedy: bool = False, learn: bool = True) -> Trajectory:
    obs = env.reset()
    traj = Trajectory()
    done = False
    while not done:
        net_action, env_action = agent.act(obs, greedy=greedy)
        grad = agent.score(obs, net_action)[1] if learn else np.zeros(0)
        next_obs, reward, done = env.step(env_action)
        traj.steps.append(TrajectoryStep(obs, net_action, grad, reward))
        obs = next_obs
    return traj


def _run_qdqn_episode(env, agent: QDQNAgent, learn: bool = True, greedy: bool = False) -> float:
    obs = env.reset()
    total, done = 0.0, False
    while not done:
        action = agent.act(obs, greedy=greedy)
        next_obs, reward, done = env.step(action)
        if learn:
            agent.observe(obs, action, reward, next_obs, done)
        total += reward
        obs = next_obs
    if learn:
        agent.end_episode()
    return total


def moving_average(series, window: int = WINDOW) -> np.ndarray:
    series = np.asarray(series, dtype=float)
    out = np.empty_like(series)
    csum = np.concatenate([[0.0], np.cumsum(series)])
    for i in range(len(series)):
        lo = max(0, i + 1 - window)
        out[i] = (csum[i + 1] - csum[lo]) / (i + 1 - lo)
    return out


def episodes_to_success(rewards, threshold: float = SUCCESS_THRESHOLD, window: int = WINDOW) -> int | None:
    """Smallest 1-based n >= window with mean(rewards[n-window .. n-1]) >= threshold."""
    r = np.asarray(rewards, dtype=float)
    if r.size == 0:
        raise ValueError("empty reward series")
    csum = np.concatenate([[0.0], np.cumsum(r)])
    for n in range(window, r.size + 1):
        if (csum[n] - csum[n - window]) / window >= threshold:
            return n
    return None


def train_one_seed(cfg: ExperimentConfig, seed: int):
    """Train a fresh agent on a fresh env; returns (RunRecord, agent)."""
    ss = np.random.SeedSequence(seed)
    env_ss, agent_ss = ss.spawn(2)
    env = make_env(cfg, rng_seed=env_ss)
    agent = make_agent(cfg, env, np.random.default_rng(agent_ss))
    rewards: list[float] = []
    failed = False
    for _ in range(cfg.episodes):
        try:
            if cfg.agent == "qdqn":
                total = _run_qdqn_episode(env, agent)
            else:
                traj = collect_episode(env, agent)
                agent.update(traj)
                total = traj.total_reward()
        except FloatingPointError:
            failed = True
            break
        rewards.append(total)
    if failed:
        rewards.extend([0.0] * (cfg.episodes - len(rewards)))
    record = RunRecord(
        seed=seed,
        rewards=[float(r) for r in rewards],
        moving_avg=[float(x) for x in moving_average(rewards, cfg.window)],
        episodes_to_success=(
            None if failed else episodes_to_success(rewards, cfg.success_threshold, cfg.window)
        ),
        failed=failed,
    )
    return record, agent


def run_training(cfg: ExperimentConfig) -> dict[int, RunRecord]:
    """Multi-seed training; deterministic per seed."""
    records = {}
    for seed in cfg.seeds:
        record, _ = train_one_seed(cfg, seed)
        records[seed] = record
    return records


def evaluate_policy(cfg: ExperimentConfig, agent, noise_level: float, episodes: int = 100,
                    threshold: float | None = None, eval_seed: int = 7_777) -> tuple[float, float]:
    """Greedy-action evaluation at a given noise level.

    Returns (success_fraction, mean_return). Environment stochasticity stays
    active; only the action selection is deterministic.
    """
    eval_cfg = dataclasses.replace(cfg, noise_level=noise_level)
    env = make_env(eval_cfg, rng_seed=eval_seed)
    threshold = cfg.success_threshold if threshold is None else threshold
    totals = []
    for _ in range(episodes):
        if cfg.agent == "qdqn":
            totals.append(_run_qdqn_episode(env, agent, learn=False, greedy=True))
        else:
            traj = collect_episode(env, agent, greedy=True, learn=False)
            totals.append(traj.total_reward())
    totals = np.array(totals)
    return float(np.mean(totals >= threshold)), float(totals.mean())


def ergodic_capacity(
    n_antennas: int = 4,
    p_max: float = 1.0,
    sigma2_range: tuple[float, float] = (0.05, 0.2),
    samples: int = 1_000_000,
    rng: np.random.Generator | None = None,
) -> tuple[float, float]:
    """Monte Carlo E[log2(1 + p_max ||h||^2 / sigma^2)]; returns (mean, stderr)."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(0) if rng is None else rng
    h = np.sqrt(0.5) * (
        rng.standard_normal((samples, n_antennas)) + 1j * rng.standard_normal((samples, n_antennas))
    )
    gain = np.sum(np.abs(h) ** 2, axis=1)
    sigma2 = rng.uniform(*sigma2_range, size=samples)
    cap = np.log2(1.0 + p_max * gain / sigma2)
    return float(cap.mean()), float(cap.std(ddof=1) / np.sqrt(samples))


def throughput_ceiling(
    n_antennas: int = 4,
    p_max: float = 1.0,
    sigma2_range: tuple[float, float] = (0.05, 0.2),
    pilot_snr_db: float = 10.0,
    thresholds_db: dict[int, float] | None = None,
    samples: int = 200_000,
    rng: np.random.Generator | None = None,
) -> float:
    """Expected per-slot throughput of the plug-in policy that picks the
    largest modulation whose threshold the estimated SNR clears (full power).

    This is the practical ceiling of the discrete-modulation scheme under
    noisy CSI; the Shannon ergodic capacity is not reachable by it.
    """
    from .envs import MODULATION_ORDERS, snr_threshold

    rng = np.random.default_rng(0) if rng is None else rng
    h = np.sqrt(0.5) * (
        rng.standard_normal((samples, n_antennas)) + 1j * rng.standard_normal((samples, n_antennas))
    )
    pilot_var = 10 ** (-pilot_snr_db / 10)
    e = np.sqrt(pilot_var / 2) * (
        rng.standard_normal((samples, n_antennas)) + 1j * rng.standard_normal((samples, n_antennas))
    )
    sigma2 = rng.uniform(*sigma2_range, size=samples)
    snr_true = p_max * np.sum(np.abs(h) ** 2, axis=1) / sigma2
    snr_est = p_max * np.sum(np.abs(h + e) ** 2, axis=1) / sigma2
    reward = np.zeros(samples)
    for m in MODULATION_ORDERS:
        th = 10 ** (snr_threshold(m, thresholds_db) / 10)
        reward = np.where(snr_est >= th, np.log2(m) * (snr_true >= th), reward)
    return float(reward.mean())


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def emit_csv(records: dict[int, RunRecord], path: str | Path) -> None:
    buf = io.StringIO()
    buf.write("seed,episode,reward,moving_avg\n")
    for seed in sorted(records):
        rec = records[seed]
        for i, (r, m) in enumerate(zip(rec.rewards, rec.moving_avg), 1):
            buf.write(f"{seed},{i},{r!r},{m!r}\n")
    Path(path).write_text(buf.getvalue())


def summarize(records: dict[int, RunRecord], episodes_cap: int | None = None) -> dict:
    """Mean/std/stderr aggregation of episodes-to-success and robustness."""
    per_seed = {str(s): records[s].episodes_to_success for s in sorted(records)}
    vals = [
        (v if v is not None else (episodes_cap if episodes_cap is not None else np.nan))
        for v in per_seed.values()
    ]
    vals = np.array(vals, dtype=float)
    finite = vals[np.isfinite(vals)]
    summary = {
        "episodes_to_success": {
            "per_seed": per_seed,
            "mean": float(finite.mean()) if finite.size else None,
            "std": float(finite.std(ddof=0)) if finite.size else None,
            "stderr": float(finite.std(ddof=0) / np.sqrt(finite.size)) if finite.size else None,
        },
        "failed_seeds": [s for s, rec in records.items() if rec.failed],
    }
    rob_levels = sorted({k for rec in records.values() for k in rec.robustness})
    if rob_levels:
        summary["robustness"] = {
            lvl: {
                "per_seed": {str(s): records[s].robustness.get(lvl) for s in sorted(records)},
                "mean": float(np.mean([records[s].robustness[lvl] for s in sorted(records)])),
            }
            for lvl in rob_levels
        }
    return summary


def emit_results(records: dict[int, RunRecord], fmt: str, path: str | Path,
                 episodes_cap: int | None = None) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if fmt == "csv":
            emit_csv(records, path)
        elif fmt == "json":
            path.write_text(json.dumps(summarize(records, episodes_cap), indent=2, sort_keys=True) + "\n")
        else:
            raise ValueError(f"unknown format {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
    return path


MAGIC = b"QPPGPARM"


def save_params(path: str | Path, layout, theta: np.ndarray, metadata: dict | None = None) -> None:
    """Binary format: magic | u32 header length | JSON header with (name, shape)
    entries | u64 element count | little-endian float64 data.
    """
    header = {"entries": [[name, list(shape)] for name, shape in layout.entries]}
    if metadata:
        header.update(metadata)
    blob = json.dumps(header).encode()
    data = np.asarray(theta, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<Q", len(theta)))
        fh.write(data)


def load_params(path: str | Path) -> tuple[dict, np.ndarray]:
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise ValueError(f"{path}: not a parameter file")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode())
        (count,) = struct.unpack("<Q", fh.read(8))
        theta = np.frombuffer(fh.read(count * 8), dtype="<f8").copy()
    expected = sum(int(np.prod(shape)) for _, shape in header["entries"])
    if expected != count:
        raise ValueError(f"{path}: header dimension {expected} != payload {count}")
    return header, theta
