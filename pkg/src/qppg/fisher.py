"""Fisher information geometry: classical FIM, pure/mixed quantum Fisher
information, block-diagonal restriction, and regularized preconditioned solves.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse.linalg


class SolverError(RuntimeError):
    """Raised when an iterative solve fails to converge."""


def qfi_pure(psi: np.ndarray, dpsis: Sequence[np.ndarray]) -> np.ndarray:
    """Fubini-Study quantum Fisher information of a pure state family.

    G_ij = 4 Re[<d_i psi|d_j psi> - <d_i psi|psi><psi|d_j psi>].
    """
    psi = np.asarray(psi, dtype=complex)
    if abs(np.linalg.norm(psi) - 1.0) > 1e-10:
        raise ValueError("state vector is not normalized")
    d = len(dpsis)
    dmat = np.asarray(dpsis, dtype=complex)  # (d, dim)
    overlaps = dmat.conj() @ dmat.T          # <d_i|d_j>
    proj = dmat.conj() @ psi                 # <d_i|psi>
    g = 4.0 * np.real(overlaps - np.outer(proj, proj.conj()))
    return 0.5 * (g + g.T)


def qfi_sld(rho: np.ndarray, drhos: Sequence[np.ndarray], eig_cutoff: float = 1e-10) -> np.ndarray:
    """Mixed-state QFI via the symmetric logarithmic derivative.

    With rho = sum_k lam_k |k><k|,
    G_ij = sum_{k,l: lam_k+lam_l > cutoff} 2 Re[(drho_i)_kl (drho_j)_lk] / (lam_k+lam_l).
    """
    rho = np.asarray(rho, dtype=complex)
    evals, vecs = np.linalg.eigh(rho)
    if evals.min() < -1e-10:
        raise ValueError(f"rho is not PSD (min eigenvalue {evals.min():g})")
    d = len(drhos)
    # Derivatives in the eigenbasis.
    a = np.asarray([vecs.conj().T @ np.asarray(dr, dtype=complex) @ vecs for dr in drhos])
    denom = evals[:, None] + evals[None, :]
    mask = denom > eig_cutoff
    weight = np.where(mask, 2.0 / np.where(mask, denom, 1.0), 0.0)
    g = np.empty((d, d))
    for i in range(d):
        for j in range(i, d):
            val = np.sum(weight * np.real(a[i] * a[j].T))
            g[i, j] = g[j, i] = val
    return g


def classical_fim(grad_logprob_samples: Sequence[np.ndarray]) -> np.ndarray:
    """Empirical Fisher matrix: mean of outer products of score vectors."""
    if len(grad_logprob_samples) == 0:
        raise ValueError("need at least one score sample")
    g = np.asarray(grad_logprob_samples, dtype=float)
    if not np.all(np.isfinite(g)):
        raise ValueError("score samples contain non-finite values")
    return g.T @ g / g.shape[0]


def amplitude_embed(probs: np.ndarray) -> np.ndarray:
    """Map a probability vector to the unit vector with components sqrt(p_a)."""
    p = np.asarray(probs, dtype=float)
    if np.any(p < -1e-12):
        raise ValueError("negative probability")
    if abs(p.sum() - 1.0) > 1e-10:
        raise ValueError("probabilities do not sum to 1")
    return np.sqrt(np.clip(p, 0.0, None))


@dataclass(frozen=True)
class BlockLayout:
    """Ordered named blocks (name, start, length) partitioning [0, d)."""

    blocks: tuple[tuple[str, int, int], ...]

    @property
    def dim(self) -> int:
        return sum(length for _, _, length in self.blocks)

    def validate(self, d: int) -> None:
        covered = np.zeros(d, dtype=bool)
        for name, start, length in self.blocks:
            if start < 0 or length <= 0 or start + length > d:
                raise ValueError(f"block {name!r} [{start}, {start + length}) outside [0, {d})")
            if covered[start : start + length].any():
                raise ValueError(f"block {name!r} overlaps a previous block")
            covered[start : start + length] = True
        if not covered.all():
            raise ValueError("blocks do not cover the full parameter vector")


def block_diagonal_of(f: np.ndarray, layout: BlockLayout) -> np.ndarray:
    """Zero all entries outside the diagonal blocks of the layout."""
    d = f.shape[0]
    layout.validate(d)
    out = np.zeros_like(f)
    for _, start, length in layout.blocks:
        sl = slice(start, start + length)
        out[sl, sl] = f[sl, sl]
    return out


def precondition_solve(
    m: np.ndarray,
    xi: float,
    g: np.ndarray,
    method: str = "dense",
) -> np.ndarray:
    """Solve (M + xi I) x = g for symmetric PSD M and xi > 0."""
    if xi <= 0:
        raise ValueError("regularization strength must be positive")
    g = np.asarray(g, dtype=float)
    if not np.all(np.isfinite(g)):
        raise ValueError("right-hand side has non-finite entries")
    m = np.asarray(m, dtype=float)
    scale = max(np.abs(m).max(), 1.0)
    if np.max(np.abs(m - m.T)) > 1e-8 * scale:
        raise ValueError("matrix is not symmetric")
    m = 0.5 * (m + m.T)
    d = m.shape[0]
    a = m + xi * np.eye(d)
    if method == "dense":
        cho = scipy.linalg.cho_factor(a, lower=True)
        return scipy.linalg.cho_solve(cho, g)
    if method == "conjugate_gradient":
        op = scipy.sparse.linalg.LinearOperator((d, d), matvec=lambda v: a @ v, dtype=float)
        x, info = scipy.sparse.linalg.cg(op, g, rtol=1e-10, atol=0.0, maxiter=10 * d)
        if info != 0:
            raise SolverError(f"conjugate gradient did not converge (info={info})")
        resid = np.linalg.norm(a @ x - g)
        if resid > 1e-8 * max(np.linalg.norm(g), 1e-300):
            raise SolverError(f"conjugate gradient residual too large ({resid:g})")
        return x
    raise ValueError(f"unknown method {method!r}")


def finite_difference_tangents(
    f: Callable[[np.ndarray], np.ndarray],
    theta: np.ndarray,
    step: float = 1e-5,
) -> list[np.ndarray]:
    """Central-difference derivatives of f (vector or matrix valued) at theta."""
    theta = np.asarray(theta, dtype=float)
    out = []
    for i in range(theta.size):
        dt = np.zeros_like(theta)
        dt[i] = step
        out.append((f(theta + dt) - f(theta - dt)) / (2 * step))
    return out
