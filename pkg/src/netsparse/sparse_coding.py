"""Sparse recovery primitives: orthogonal matching pursuit and support-restricted
least squares.

Both operate on a dictionary ``D`` of shape ``(n, m)`` and return a
:class:`SparseCode` whose coefficient vector is exactly zero off its support.
Indices are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ._linalg import as_finite, pinv

# Relative threshold below which the residual counts as orthogonal to every
# remaining atom.
NO_PROGRESS_RTOL = 1e-12


@dataclass(frozen=True)
class SparseCode:
    coefficients: np.ndarray
    support: tuple[int, ...]

    def __post_init__(self):
        off = np.ones(self.coefficients.shape[0], dtype=bool)
        off[list(self.support)] = False
        if np.any(self.coefficients[off] != 0.0):
            raise ValueError("non-zero coefficient outside the support")

    @classmethod
    def zeros(cls, m: int) -> "SparseCode":
        return cls(np.zeros(m), ())

    @property
    def size(self) -> int:
        return len(self.support)

    def reconstruct(self, dictionary: np.ndarray) -> np.ndarray:
        return np.asarray(dictionary, dtype=float) @ self.coefficients


@dataclass
class OMPTrace:
    """Per-iteration record of an OMP run; entry 0 is the initial state."""

    supports: list[tuple[int, ...]] = field(default_factory=list)
    residuals: list[np.ndarray] = field(default_factory=list)
    exit_reason: str = ""

    @property
    def residual_norms(self) -> list[float]:
        return [float(np.linalg.norm(r)) for r in self.residuals]


def support_least_squares(
    dictionary: np.ndarray, support: Iterable[int], target: np.ndarray
) -> SparseCode:
    """Least-squares fit of ``target`` using only the columns in ``support``.

    Rank-deficient sub-dictionaries get the minimum-norm solution.
    """
    D = as_finite(dictionary, "dictionary")
    x = as_finite(target, "target")
    support = tuple(int(i) for i in support)
    m = D.shape[1]
    if D.shape[0] != x.shape[0]:
        raise ValueError(f"dictionary has {D.shape[0]} rows, target has {x.shape[0]}")
    if not support:
        return SparseCode.zeros(m)
    if min(support) < 0 or max(support) >= m:
        raise IndexError(f"support {support} outside 0..{m - 1}")
    coef = np.zeros(m)
    coef[list(support)] = pinv(D[:, support]) @ x
    return SparseCode(coef, support)


def omp(
    dictionary: np.ndarray,
    target: np.ndarray,
    residual_tol: float,
    max_iters: int | None = None,
    *,
    signed_correlation: bool = False,
    preferred: Sequence[int] | None = None,
    zero_tol: float = 1e-8,
    return_trace: bool = False,
):
    """Orthogonal matching pursuit.

    Selects ``argmax_i |D_i^T r| / ||D_i||`` over unselected, non-zero atoms
    (lowest index on ties), refits the support by least squares and repeats
    until ``||r|| < residual_tol``, ``max_iters`` atoms are selected (default
    ``min(n, m)``), or the residual is orthogonal to every remaining atom.

    With ``signed_correlation`` the selection drops the absolute value.
    ``preferred`` restricts the first selection phase to the given atoms; only
    if they cannot bring the residual under tolerance does selection continue
    over the whole dictionary.

    The least-squares refit is maintained through an incremental
    Gram-Schmidt factorisation of the selected atoms, so each iteration costs
    O(n m) rather than a fresh solve.
    """
    if not residual_tol > 0:
        raise ValueError("residual_tol must be positive")
    D = as_finite(dictionary, "dictionary")
    x = as_finite(target, "target")
    n, m = D.shape
    if x.shape != (n,):
        raise ValueError(f"target shape {x.shape} does not match dictionary rows {n}")
    if max_iters is None:
        max_iters = min(n, m)

    norms = np.linalg.norm(D, axis=0)
    selectable = norms > zero_tol
    safe_norms = np.where(selectable, norms, 1.0)

    phases = [selectable]
    if preferred is not None:
        pool = np.zeros(m, dtype=bool)
        pool[list(preferred)] = True
        phases.insert(0, pool & selectable)

    Q = np.zeros((n, max_iters))
    R = np.zeros((max_iters, max_iters))
    qtx = np.zeros(max_iters)
    chosen = np.zeros(m, dtype=bool)
    support: list[int] = []
    r = x.copy()
    trace = OMPTrace() if return_trace else None
    if trace is not None:
        trace.supports.append(())
        trace.residuals.append(r.copy())

    reason = "tolerance"
    for allowed in phases:
        while True:
            rnorm = float(np.linalg.norm(r))
            if rnorm < residual_tol:
                reason = "tolerance"
                break
            if len(support) >= max_iters:
                reason = "max_iters"
                break
            candidates = allowed & ~chosen
            if not candidates.any():
                reason = "exhausted"
                break
            corr = (D.T @ r) / safe_norms
            mag = np.where(candidates, np.abs(corr), -np.inf)
            if mag.max() <= NO_PROGRESS_RTOL * rnorm:
                reason = "no_progress"
                break
            score = mag if not signed_correlation else np.where(candidates, corr, -np.inf)
            i = int(np.argmax(score))

            j = len(support)
            d = D[:, i]
            Qj = Q[:, :j]
            h = Qj.T @ d
            v = d - Qj @ h
            h2 = Qj.T @ v  # second pass keeps Q orthonormal to working precision
            v -= Qj @ h2
            h += h2
            vnorm = float(np.linalg.norm(v))
            if vnorm <= NO_PROGRESS_RTOL * norms[i]:
                reason = "no_progress"
                break
            Q[:, j] = v / vnorm
            R[:j, j] = h
            R[j, j] = vnorm
            qtx[j] = Q[:, j] @ r
            r = r - Q[:, j] * qtx[j]
            chosen[i] = True
            support.append(i)
            if trace is not None:
                trace.supports.append(tuple(support))
                trace.residuals.append(r.copy())
        if reason == "tolerance" or reason == "max_iters":
            break

    s = len(support)
    coef = np.zeros(m)
    if s:
        coef[support] = _back_substitute(R[:s, :s], qtx[:s])
    code = SparseCode(coef, tuple(support))
    if trace is not None:
        trace.exit_reason = reason
        return code, trace
    return code


def _back_substitute(R: np.ndarray, b: np.ndarray) -> np.ndarray:
    s = b.shape[0]
    out = np.zeros(s)
    for i in range(s - 1, -1, -1):
        out[i] = (b[i] - R[i, i + 1:] @ out[i + 1:]) / R[i, i]
    return out
