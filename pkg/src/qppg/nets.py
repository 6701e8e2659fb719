"""Small dense policy / value networks with hand-written reverse-mode gradients.

Parameters live in one flat vector; a ParamLayout maps named layers onto
slices of it (the same slices define the blocks used by block-diagonal
natural-gradient updates).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fisher import BlockLayout
from .qubit import KET0

STD_FLOOR = 1e-3


@dataclass(frozen=True)
class ParamLayout:
    """Named layer shapes mapped onto contiguous slices of a flat vector."""

    entries: tuple[tuple[str, tuple[int, ...]], ...]

    def __post_init__(self):
        # Cache the slice table; layouts are immutable and get() is hot.
        out, off = {}, 0
        for name, shape in self.entries:
            n = int(np.prod(shape))
            out[name] = slice(off, off + n)
            off += n
        object.__setattr__(self, "_slices", out)
        object.__setattr__(self, "_shapes", dict(self.entries))
        object.__setattr__(self, "_dim", off)

    @property
    def dim(self) -> int:
        return self._dim

    def slices(self) -> dict[str, slice]:
        return self._slices

    def get(self, theta: np.ndarray, name: str) -> np.ndarray:
        return theta[self._slices[name]].reshape(self._shapes[name])

    def block_layout(self) -> BlockLayout:
        blocks, off = [], 0
        for name, shape in self.entries:
            n = int(np.prod(shape))
            blocks.append((name, off, n))
            off += n
        return BlockLayout(tuple(blocks))


def policy_layout(obs_dim: int, width: int, n_actions: int, gaussian_head: bool = False) -> ParamLayout:
    entries = [
        ("W1", (width, obs_dim)),
        ("b1", (width,)),
        ("W2", (width, width)),
        ("b2", (width,)),
        ("W3", (n_actions, width)),
        ("b3", (n_actions,)),
    ]
    if gaussian_head:
        entries += [("w_mu", (width,)), ("b_mu", (1,)), ("w_sigma", (width,)), ("b_sigma", (1,))]
    return ParamLayout(tuple(entries))


def init_params(layout: ParamLayout, rng: np.random.Generator) -> np.ndarray:
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, zero biases."""
    theta = np.zeros(layout.dim)
    sls = layout.slices()
    for name, shape in layout.entries:
        if len(shape) == 2:
            bound = 1.0 / np.sqrt(shape[1])
            theta[sls[name]] = rng.uniform(-bound, bound, size=int(np.prod(shape)))
        elif name in ("w_mu", "w_sigma"):
            bound = 1.0 / np.sqrt(shape[0])
            theta[sls[name]] = rng.uniform(-bound, bound, size=shape[0])
        # biases stay zero
    return theta


@dataclass
class ActionDistribution:
    probs: np.ndarray
    mean: float | None = None
    std: float | None = None


def _softplus(x: float) -> float:
    return float(np.log1p(np.exp(-abs(x))) + max(x, 0.0))


def _trunk(theta: np.ndarray, layout: ParamLayout, obs: np.ndarray):
    w1, b1 = layout.get(theta, "W1"), layout.get(theta, "b1")
    w2, b2 = layout.get(theta, "W2"), layout.get(theta, "b2")
    if obs.shape[0] != w1.shape[1]:
        raise ValueError(f"observation length {obs.shape[0]} != input dim {w1.shape[1]}")
    z1 = w1 @ obs + b1
    h1 = np.maximum(z1, 0.0)
    z2 = w2 @ h1 + b2
    h2 = np.maximum(z2, 0.0)
    return z1, h1, z2, h2


def forward(theta: np.ndarray, layout: ParamLayout, obs: np.ndarray) -> ActionDistribution:
    """Policy distribution at an observation: softmax head plus optional Gaussian."""
    obs = np.asarray(obs, dtype=float)
    _, _, _, h2 = _trunk(theta, layout, obs)
    logits = layout.get(theta, "W3") @ h2 + layout.get(theta, "b3")
    logits = logits - logits.max()
    e = np.exp(logits)
    probs = e / e.sum()
    names = {name for name, _ in layout.entries}
    if "w_mu" in names:
        mu = float(layout.get(theta, "w_mu") @ h2 + layout.get(theta, "b_mu")[0])
        pre = float(layout.get(theta, "w_sigma") @ h2 + layout.get(theta, "b_sigma")[0])
        return ActionDistribution(probs=probs, mean=mu, std=_softplus(pre) + STD_FLOOR)
    return ActionDistribution(probs=probs)


def logprob_and_grad(
    theta: np.ndarray,
    layout: ParamLayout,
    obs: np.ndarray,
    action,
) -> tuple[float, np.ndarray]:
    """Exact log pi(a|s) and its gradient w.r.t. the flat parameter vector.

    For a plain categorical head `action` is an int; for the hybrid head it is
    (index, power) and the log-prob adds the unsquashed Gaussian density.
    """
    obs = np.asarray(obs, dtype=float)
    z1, h1, z2, h2 = _trunk(theta, layout, obs)
    w2, w3 = layout.get(theta, "W2"), layout.get(theta, "W3")
    logits = w3 @ h2 + layout.get(theta, "b3")
    shifted = logits - logits.max()
    e = np.exp(shifted)
    probs = e / e.sum()

    names = {name for name, _ in layout.entries}
    hybrid = "w_mu" in names
    if hybrid:
        idx, power = action
    else:
        idx = int(action)
    if not 0 <= idx < probs.shape[0]:
        raise ValueError(f"action index {idx} out of range")

    logp = float(shifted[idx] - np.log(e.sum()))
    dlogits = -probs
    dlogits[idx] += 1.0

    grad = np.zeros_like(theta)
    sls = layout.slices()
    grad[sls["W3"]] = np.outer(dlogits, h2).ravel()
    grad[sls["b3"]] = dlogits
    dh2 = w3.T @ dlogits

    if hybrid:
        w_mu, w_sigma = layout.get(theta, "w_mu"), layout.get(theta, "w_sigma")
        mu = float(w_mu @ h2 + layout.get(theta, "b_mu")[0])
        pre = float(w_sigma @ h2 + layout.get(theta, "b_sigma")[0])
        std = _softplus(pre) + STD_FLOOR
        z = (float(power) - mu) / std
        logp += float(-0.5 * z * z - np.log(std) - 0.5 * np.log(2 * np.pi))
        dmu = z / std
        dstd = (z * z - 1.0) / std
        dpre = dstd / (1.0 + np.exp(-pre))  # softplus'
        grad[sls["w_mu"]] = dmu * h2
        grad[sls["b_mu"]] = dmu
        grad[sls["w_sigma"]] = dpre * h2
        grad[sls["b_sigma"]] = dpre
        dh2 = dh2 + dmu * w_mu + dpre * w_sigma

    dz2 = dh2 * (z2 > 0)
    grad[sls["W2"]] = np.outer(dz2, h1).ravel()
    grad[sls["b2"]] = dz2
    dz1 = (w2.T @ dz2) * (z1 > 0)
    grad[sls["W1"]] = np.outer(dz1, obs).ravel()
    grad[sls["b1"]] = dz1
    return logp, grad


# ---------------------------------------------------------------------------
# Q-network: quantum feature embedding plus a classical linear head.
# ---------------------------------------------------------------------------

N_EMBED_PARAMS = 4  # two layers of (Ry, Rz) trainable angles
EMBED_DIM = 3       # Bloch-vector expectations


def qdqn_layout(n_actions: int) -> ParamLayout:
    return ParamLayout((("embed", (N_EMBED_PARAMS,)), ("Wq", (n_actions, EMBED_DIM)), ("bq", (n_actions,))))


def _rx(psi, theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([c * psi[0] - 1j * s * psi[1], -1j * s * psi[0] + c * psi[1]])


def _ry(psi, theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([c * psi[0] - s * psi[1], s * psi[0] + c * psi[1]])


def _rz(psi, theta):
    half = theta / 2
    return np.array([np.exp(-1j * half) * psi[0], np.exp(1j * half) * psi[1]])


def quantum_embed(obs: np.ndarray, embed_params: np.ndarray) -> np.ndarray:
    """Single-qubit feature map: angle-encode the observation, apply two
    trainable (Ry, Rz) layers, return the Bloch expectations (sx, sy, sz).

    The rotations are inlined closed forms of gate_matrix products; this
    function sits on the Q-DQN training hot path.
    """
    obs = np.asarray(obs, dtype=float)
    angles = np.zeros(3)
    n = min(3, obs.shape[0])
    angles[:n] = np.clip(np.pi * obs[:n], -np.pi, np.pi)
    psi = _rz(_ry(_rx(KET0, angles[0]), angles[1]), angles[2])
    p = np.asarray(embed_params, dtype=float)
    for layer in range(2):
        psi = _rz(_ry(psi, p[2 * layer]), p[2 * layer + 1])
    a, b = psi
    cross = a.conjugate() * b
    return np.array([2 * cross.real, 2 * cross.imag, abs(a) ** 2 - abs(b) ** 2])


def quantum_embed_jacobian(obs: np.ndarray, embed_params: np.ndarray) -> np.ndarray:
    """Parameter-shift Jacobian d f_Q / d embed_params, shape (3, 4)."""
    p = np.asarray(embed_params, dtype=float)
    jac = np.empty((EMBED_DIM, N_EMBED_PARAMS))
    for i in range(N_EMBED_PARAMS):
        shift = np.zeros_like(p)
        shift[i] = np.pi / 2
        jac[:, i] = 0.5 * (quantum_embed(obs, p + shift) - quantum_embed(obs, p - shift))
    return jac


def q_forward(theta: np.ndarray, layout: ParamLayout, features: np.ndarray) -> np.ndarray:
    """Linear Q-value head over a feature vector."""
    wq, bq = layout.get(theta, "Wq"), layout.get(theta, "bq")
    features = np.asarray(features, dtype=float)
    if features.shape[0] != wq.shape[1]:
        raise ValueError(f"feature length {features.shape[0]} != head input {wq.shape[1]}")
    return wq @ features + bq


def q_values(theta: np.ndarray, layout: ParamLayout, obs: np.ndarray) -> np.ndarray:
    """Q(s, .) through the quantum embedding and the linear head."""
    return q_forward(theta, layout, quantum_embed(obs, layout.get(theta, "embed")))


def q_value_grad(theta: np.ndarray, layout: ParamLayout, obs: np.ndarray, action: int) -> np.ndarray:
    """Gradient of Q(s, a) w.r.t. all trainable parameters."""
    embed = layout.get(theta, "embed")
    feats = quantum_embed(obs, embed)
    wq = layout.get(theta, "Wq")
    grad = np.zeros_like(theta)
    sls = layout.slices()
    dwq = np.zeros_like(wq)
    dwq[action] = feats
    grad[sls["Wq"]] = dwq.ravel()
    db = np.zeros(wq.shape[0])
    db[action] = 1.0
    grad[sls["bq"]] = db
    grad[sls["embed"]] = wq[action] @ quantum_embed_jacobian(obs, embed)
    return grad
