"""Exact single-qubit simulation: gates, Kraus noise channels, measurement.

Everything here operates on 2x2 complex density matrices. Pure states are
the rank-1 special case; noise channels in general produce mixed states.
All functions are pure (an explicit RNG is passed where sampling occurs).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

ATOL = 1e-12

I2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)

KET0 = np.array([1.0, 0.0], dtype=complex)
KET1 = np.array([0.0, 1.0], dtype=complex)
RHO0 = np.outer(KET0, KET0.conj())
RHO1 = np.outer(KET1, KET1.conj())


class Gate(str, Enum):
    RX = "rx"
    RY = "ry"
    RZ = "rz"
    H = "h"
    I = "i"


@dataclass(frozen=True)
class GateAction:
    gate: Gate
    angle: float = 0.0


def gate_matrix(action: GateAction) -> np.ndarray:
    """Unitary for a gate action. Rotations use R_a(t) = exp(-i t sigma_a / 2)."""
    theta = float(action.angle)
    if not np.isfinite(theta):
        raise ValueError(f"gate angle must be finite, got {theta!r}")
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    if action.gate == Gate.RX:
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if action.gate == Gate.RY:
        return np.array([[c, -s], [s, c]], dtype=complex)
    if action.gate == Gate.RZ:
        return np.array([[np.exp(-1j * theta / 2), 0], [0, np.exp(1j * theta / 2)]], dtype=complex)
    if action.gate == Gate.H:
        return HADAMARD.copy()
    return I2.copy()


def validate_state(rho: np.ndarray, atol: float = ATOL) -> None:
    """Raise ValueError unless rho is a valid qubit density matrix."""
    if rho.shape != (2, 2):
        raise ValueError(f"density matrix must be 2x2, got shape {rho.shape}")
    if not np.all(np.isfinite(rho.view(float))):
        raise ValueError("density matrix has non-finite entries")
    if np.max(np.abs(rho - rho.conj().T)) > atol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > atol or abs(np.trace(rho).imag) > atol:
        raise ValueError("density matrix trace differs from 1")
    evals = np.linalg.eigvalsh(rho)
    if evals.min() < -atol:
        raise ValueError(f"density matrix not PSD (min eigenvalue {evals.min():g})")


def pure_state(psi: np.ndarray) -> np.ndarray:
    """Density matrix |psi><psi| of a normalized state vector."""
    psi = np.asarray(psi, dtype=complex)
    n = np.linalg.norm(psi)
    if n == 0:
        raise ValueError("zero state vector")
    psi = psi / n
    return np.outer(psi, psi.conj())


def purity(rho: np.ndarray) -> float:
    return float(np.trace(rho @ rho).real)


def bloch_vector(rho: np.ndarray) -> np.ndarray:
    return np.array(
        [
            np.trace(rho @ SIGMA_X).real,
            np.trace(rho @ SIGMA_Y).real,
            np.trace(rho @ SIGMA_Z).real,
        ]
    )


def apply_gate(rho: np.ndarray, action: GateAction) -> np.ndarray:
    """U rho U-dagger; preserves trace, Hermiticity and purity."""
    validate_state(rho, atol=1e-9)
    u = gate_matrix(action)
    return u @ rho @ u.conj().T


@dataclass(frozen=True)
class KrausChannel:
    ops: tuple[np.ndarray, ...]
    kind: str
    rate: float

    def completeness_defect(self) -> float:
        s = sum(k.conj().T @ k for k in self.ops)
        return float(np.max(np.abs(s - I2)))


CHANNEL_KINDS = ("depolarizing", "amplitude_damping", "dephasing")


def make_channel(kind: str, rate: float) -> KrausChannel:
    """Kraus operators for the three standard single-qubit noise channels."""
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"channel rate must lie in [0, 1], got {rate}")
    if kind == "depolarizing":
        p = rate
        ops = (
            np.sqrt(1 - 3 * p / 4) * I2,
            np.sqrt(p / 4) * SIGMA_X,
            np.sqrt(p / 4) * SIGMA_Y,
            np.sqrt(p / 4) * SIGMA_Z,
        )
    elif kind == "amplitude_damping":
        g = rate
        ops = (
            np.array([[1, 0], [0, np.sqrt(1 - g)]], dtype=complex),
            np.array([[0, np.sqrt(g)], [0, 0]], dtype=complex),
        )
    elif kind == "dephasing":
        lam = rate
        ops = (np.sqrt(1 - lam) * I2, np.sqrt(lam) * SIGMA_Z)
    else:
        raise ValueError(f"unknown channel kind {kind!r}")
    ch = KrausChannel(ops=ops, kind=kind, rate=float(rate))
    assert ch.completeness_defect() <= 1e-12
    return ch


def apply_channel(rho: np.ndarray, channel: KrausChannel) -> np.ndarray:
    """Deterministic CPTP map: sum_k K rho K-dagger."""
    out = np.zeros((2, 2), dtype=complex)
    for k in channel.ops:
        out += k @ rho @ k.conj().T
    return out


def sample_kraus(rho: np.ndarray, channel: KrausChannel, rng: np.random.Generator) -> np.ndarray:
    """One stochastic trajectory branch of the channel.

    Samples Kraus operator k with probability tr(K rho K-dagger) and returns
    the renormalized branch state. Keeps pure states pure; averaging over
    branches recovers apply_channel.
    """
    probs = np.array([np.trace(k @ rho @ k.conj().T).real for k in channel.ops])
    probs = np.clip(probs, 0.0, None)
    total = probs.sum()
    if total <= 0:
        raise ValueError("channel branch probabilities sum to zero")
    probs /= total
    idx = rng.choice(len(channel.ops), p=probs)
    k = channel.ops[idx]
    out = k @ rho @ k.conj().T
    return out / np.trace(out).real


def measure_collapse(rho: np.ndarray, rng: np.random.Generator) -> tuple[int, np.ndarray]:
    """Projective computational-basis measurement with Born probabilities."""
    p1 = float(np.clip(rho[1, 1].real, 0.0, 1.0))
    outcome = 1 if rng.random() < p1 else 0
    return outcome, (RHO1.copy() if outcome else RHO0.copy())


def excited_population(rho: np.ndarray) -> float:
    """<1|rho|1>, the overlap with the target excited state."""
    val = rho[1, 1]
    if abs(val.imag) > 1e-12:
        raise ValueError("diagonal entry has non-negligible imaginary part")
    return float(np.clip(val.real, 0.0, 1.0))
