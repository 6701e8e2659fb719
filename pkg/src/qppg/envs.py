"""The three task environments behind one gym-like interface:
reset(seed) -> observation, step(action) -> (observation, reward, done).

Each instance owns its RNG; independent instances are safe to run in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qubit
from .qubit import Gate, GateAction

HORIZON = 10
COLLAPSE_PROB = 0.1

GATE_ORDER = (Gate.RX, Gate.RY, Gate.RZ, Gate.H, Gate.I)


class ClassicalTwoStateEnv:
    """Two-state distribution steering: drive (p0, p1) to the target (0, 1).

    Actions 0..4 apply closed-form maps (shift, scale, rotate, flip, identity);
    reward is the Bhattacharyya fidelity to the target distribution.
    """

    obs_dim = 3
    n_actions = 5

    def __init__(self, noise_prob: float = 0.03, collapse_prob: float = COLLAPSE_PROB,
                 horizon: int = HORIZON, seed: int | None = None):
        self.noise_prob = noise_prob
        self.collapse_prob = collapse_prob
        self.horizon = horizon
        self.target = np.array([0.0, 1.0])
        self.rng = np.random.default_rng(seed)
        self.reset()

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        self.p = np.array([1.0, 0.0])
        self.m = 0
        self.t = 0
        return self._obs()

    def _obs(self) -> np.ndarray:
        return np.array([self.p[0], self.p[1], float(self.m)])

    def _apply_transform(self, a: int) -> None:
        p0, p1 = self.p
        if a == 0:  # shift
            p1 = min(1.0, p1 + 0.1)
        elif a == 1:  # scale
            p1 = min(1.0, 1.2 * p1)
        elif a == 2:  # rotate amplitudes by pi/8
            v = np.array([np.sqrt(p0), np.sqrt(p1)])
            c, s = np.cos(np.pi / 8), np.sin(np.pi / 8)
            v = np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])
            p1 = v[1] ** 2
        elif a == 3:  # flip
            p1 = p0
        elif a == 4:  # identity
            pass
        else:
            raise ValueError(f"invalid action {a}")
        self.p = np.array([1.0 - p1, p1])

    def step(self, action: int) -> tuple[np.ndarray, float, bool]:
        self._apply_transform(int(action))
        if self.rng.random() < self.noise_prob:
            if self.rng.random() < 0.5:
                self.p = self.p[::-1].copy()
            else:
                p1 = float(np.clip(self.p[1] + self.rng.uniform(-0.1, 0.1), 0.0, 1.0))
                self.p = np.array([1.0 - p1, p1])
        if self.rng.random() < self.collapse_prob:
            self.m = 1 if self.rng.random() < self.p[1] else 0
            self.p = np.array([1.0 - self.m, float(self.m)])
        reward = float(np.sum(np.sqrt(self.p * self.target)) ** 2)
        self.t += 1
        return self._obs(), reward, self.t >= self.horizon


class QuantumSingleQubitEnv:
    """Single-qubit steering |0> -> |1> under gate actions and Kraus noise.

    Actions 0..4 apply (Rx, Ry, Rz, H, I); rotations use a fixed pi/4 angle so
    the action space stays discrete. After the gate, the depolarizing,
    amplitude-damping and dephasing channels act at the configured level, then
    a projective collapse fires with probability 0.1. Reward is <1|rho|1>.

    noise_model="trajectory" samples one Kraus branch per channel (a quantum
    trajectory unraveling; states stay pure between collapses), while
    "density" applies the full deterministic CPTP maps.
    """

    obs_dim = 3
    n_actions = 5

    def __init__(
        self,
        noise_level: float = 0.03,
        noise_model: str = "trajectory",
        rotation_angle: float = np.pi / 4,
        collapse_prob: float = COLLAPSE_PROB,
        horizon: int = HORIZON,
        seed: int | None = None,
    ):
        if noise_model not in ("trajectory", "density"):
            raise ValueError(f"unknown noise model {noise_model!r}")
        self.noise_level = noise_level
        self.noise_model = noise_model
        self.rotation_angle = rotation_angle
        self.collapse_prob = collapse_prob
        self.horizon = horizon
        self.channels = tuple(
            qubit.make_channel(kind, noise_level) for kind in qubit.CHANNEL_KINDS
        )
        self.rng = np.random.default_rng(seed)
        self.reset()

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        self.rho = qubit.RHO0.copy()
        self.m = 0
        self.t = 0
        return self._obs()

    def _obs(self) -> np.ndarray:
        return np.array([self.rho[0, 0].real, self.rho[1, 1].real, float(self.m)])

    def step(self, action: int) -> tuple[np.ndarray, float, bool]:
        a = int(action)
        if not 0 <= a < self.n_actions:
            raise ValueError(f"invalid gate index {a}")
        gate = GATE_ORDER[a]
        angle = self.rotation_angle if gate in (Gate.RX, Gate.RY, Gate.RZ) else 0.0
        self.rho = qubit.apply_gate(self.rho, GateAction(gate, angle))
        if self.noise_level > 0:
            for ch in self.channels:
                if self.noise_model == "trajectory":
                    self.rho = qubit.sample_kraus(self.rho, ch, self.rng)
                else:
                    self.rho = qubit.apply_channel(self.rho, ch)
        if self.rng.random() < self.collapse_prob:
            self.m, self.rho = qubit.measure_collapse(self.rho, self.rng)
        reward = qubit.excited_population(self.rho)
        self.t += 1
        return self._obs(), reward, self.t >= self.horizon


MODULATION_ORDERS = (4, 16, 64)
SNR_THRESHOLDS_DB = {4: 9.8, 16: 16.5, 64: 22.5}


def snr_threshold(m: int, table: dict[int, float] | None = None) -> float:
    """SNR (dB) required for ~1e-3 uncoded symbol error rate with m-QAM."""
    table = SNR_THRESHOLDS_DB if table is None else table
    if m not in table:
        raise ValueError(f"unsupported modulation order {m}")
    return table[m]


@dataclass(frozen=True)
class LinkAction:
    m: int            # modulation order in {4, 16, 64}
    p: float          # transmit power, linear units in [p_min, p_max]


class RayleighLinkEnv:
    """Block-fading link adaptation with noisy pilot-based CSI.

    Per slot the true channel h ~ CN(0, I_N) is redrawn; the agent observes
    only the pilot estimate h_hat = h + e, e ~ CN(0, sigma_p^2 I). Reward is
    log2(m) when the true SNR p * ||h||^2 / sigma^2 clears the modulation's
    threshold, else 0.
    """

    n_actions = len(MODULATION_ORDERS)

    def __init__(
        self,
        n_antennas: int = 4,
        pilot_snr_db: float = 10.0,
        p_min: float = 0.0,
        p_max: float = 1.0,
        sigma2_range: tuple[float, float] = (0.05, 0.2),
        thresholds_db: dict[int, float] | None = None,
        horizon: int = HORIZON,
        seed: int | None = None,
    ):
        self.n = n_antennas
        self.obs_dim = 2 * n_antennas + 1
        self.pilot_var = 10 ** (-pilot_snr_db / 10)
        self.p_min, self.p_max = p_min, p_max
        self.sigma2_range = sigma2_range
        self.thresholds_db = dict(SNR_THRESHOLDS_DB if thresholds_db is None else thresholds_db)
        self.horizon = horizon
        self.rng = np.random.default_rng(seed)
        self.reset()

    def _draw_channel(self) -> None:
        scale = np.sqrt(0.5)
        self.h = scale * (self.rng.standard_normal(self.n) + 1j * self.rng.standard_normal(self.n))
        err_scale = np.sqrt(self.pilot_var / 2)
        e = err_scale * (self.rng.standard_normal(self.n) + 1j * self.rng.standard_normal(self.n))
        self.h_hat = self.h + e

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        self.sigma2 = float(self.rng.uniform(*self.sigma2_range))
        self.t = 0
        self._draw_channel()
        return self._obs()

    def _obs(self) -> np.ndarray:
        return np.concatenate([self.h_hat.real, self.h_hat.imag, [self.sigma2]])

    def step(self, action: LinkAction) -> tuple[np.ndarray, float, bool]:
        if action.m not in MODULATION_ORDERS:
            raise ValueError(f"invalid modulation order {action.m}")
        p = float(np.clip(action.p, self.p_min, self.p_max))
        snr = p * float(np.sum(np.abs(self.h) ** 2)) / self.sigma2
        snr_db = 10 * np.log10(snr) if snr > 0 else -np.inf
        reward = float(np.log2(action.m)) if snr_db >= snr_threshold(action.m, self.thresholds_db) else 0.0
        self.t += 1
        self._draw_channel()
        return self._obs(), reward, self.t >= self.horizon
