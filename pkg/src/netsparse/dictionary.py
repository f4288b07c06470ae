"""Greedy alternating dictionary learning over a sliding training window."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._linalg import as_finite
from .errors import InsufficientHistory
from .sparse_coding import omp

ZERO_TOL = 1e-8


@dataclass(frozen=True)
class TrainingWindow:
    """Columns ``[x(k-Hb) .. x(k-1), A x(k-1) .. A^Hf x(k-1)]``."""

    columns: np.ndarray
    h_backward: int
    h_forward: int

    def __post_init__(self):
        if self.columns.ndim != 2 or self.columns.shape[1] != self.h_backward + self.h_forward:
            raise ValueError(
                f"window has shape {self.columns.shape}, expected "
                f"{self.h_backward + self.h_forward} columns"
            )

    @property
    def size(self) -> int:
        return self.columns.shape[1]


@dataclass(frozen=True)
class Dictionary:
    atoms: np.ndarray  # (n, m), active columns unit norm, the rest zero
    active_set: tuple[int, ...]
    code_matrix: np.ndarray  # (m, H), rescaled so atoms @ code_matrix is unchanged
    converged: bool = True
    iterations: int = 0
    omp_residuals: np.ndarray | None = None  # per window column, last coding pass
    omp_exits: tuple[str, ...] = ()

    @property
    def sparsity(self) -> int:
        return len(self.active_set)

    @property
    def n_atoms(self) -> int:
        return self.atoms.shape[1]

    @classmethod
    def empty(cls, n: int, m: int, h: int) -> "Dictionary":
        return cls(np.zeros((n, m)), (), np.zeros((m, h)))


def build_window(
    history: Sequence[np.ndarray], nominal_A: np.ndarray, h_backward: int, h_forward: int
) -> TrainingWindow:
    if h_backward < 0 or h_forward < 0 or h_backward + h_forward < 1:
        raise ValueError("need h_backward, h_forward >= 0 with at least one column")
    if len(history) < h_backward or (h_forward > 0 and len(history) == 0):
        raise InsufficientHistory(
            f"history has {len(history)} states, window needs {max(h_backward, 1)}"
        )
    A = np.asarray(nominal_A, dtype=float)
    cols = [np.asarray(v, dtype=float) for v in history[len(history) - h_backward:]] if h_backward else []
    if h_forward:
        v = np.asarray(history[-1], dtype=float)
        for _ in range(h_forward):
            v = A @ v
            cols.append(v)
    return TrainingWindow(np.column_stack(cols), h_backward, h_forward)


def dictionary_update(
    window_matrix: np.ndarray, codes: np.ndarray, ridge: float, form: str = "auto"
) -> np.ndarray:
    """Ridge-regularised least-squares dictionary ``X Y^T (Y Y^T + ridge I)^-1``.

    ``form="dual"`` evaluates the algebraically identical
    ``X (ridge I + Y^T Y)^-1 Y^T``; ``"auto"`` picks whichever inverts the
    smaller matrix.
    """
    if not ridge > 0:
        raise ValueError("ridge must be positive")
    X = np.asarray(window_matrix, dtype=float)
    Y = np.asarray(codes, dtype=float)
    m, h = Y.shape
    if X.shape[1] != h:
        raise ValueError(f"window has {X.shape[1]} columns, codes have {h}")
    if form == "auto":
        form = "primal" if m <= h else "dual"
    if form == "primal":
        G = Y @ Y.T + ridge * np.eye(m)
        # G symmetric: X Y^T G^-1 = (G^-1 Y X^T)^T
        return np.linalg.solve(G, Y @ X.T).T
    if form == "dual":
        G = ridge * np.eye(h) + Y.T @ Y
        return X @ np.linalg.solve(G, Y.T)
    raise ValueError(f"unknown form {form!r}")


def active_set(atoms: np.ndarray, zero_tol: float = ZERO_TOL) -> tuple[int, ...]:
    norms = np.linalg.norm(np.asarray(atoms, dtype=float), axis=0)
    return tuple(int(i) for i in np.flatnonzero(norms > zero_tol))


def default_omp_tol(n: int) -> float:
    return 1e-6 * math.sqrt(n)


def learn(
    window: TrainingWindow,
    atom_count: int,
    omp_tol: float | None = None,
    ridge: float = 1e-6,
    convergence_tol: float = 1e-6,
    max_outer_iters: int = 50,
    *,
    seed: int | Sequence[int] = 0,
    zero_tol: float = ZERO_TOL,
    atom_reuse: bool = True,
    signed_correlation: bool = False,
) -> Dictionary:
    """Alternate OMP coding of every window column with the ridge dictionary update.

    Initial atoms are the window columns themselves (plus a seeded Gaussian
    block when ``atom_count`` exceeds the window length), scaled to unit norm.
    The loop stops once successive dictionaries differ by less than
    ``convergence_tol`` in Frobenius norm, or after ``max_outer_iters``
    passes; the result then has ``converged=False``.

    With ``atom_reuse`` each column is first coded against the atoms already
    used by earlier columns in the same pass, and new atoms are only opened
    when those cannot reach ``omp_tol``. The active set then tracks the
    numerical rank of the window instead of growing to one atom per column.
    """
    X = as_finite(window.columns, "window")
    n, h = X.shape
    m = int(atom_count)
    if m < 1:
        raise ValueError("atom_count must be >= 1")
    if omp_tol is None:
        omp_tol = default_omp_tol(n)

    if m <= h:
        D = X[:, :m].copy()
    else:
        R = np.random.default_rng(seed).standard_normal((n, m - h))
        D = np.hstack([X, R])
    norms = np.linalg.norm(D, axis=0)
    D = np.where(norms > zero_tol, D / np.where(norms > zero_tol, norms, 1.0), 0.0)

    D_old = np.zeros_like(D)
    Y = np.zeros((m, h))
    residuals = np.linalg.norm(X, axis=0)
    exits: list[str] = ["tolerance" if r < omp_tol else "none" for r in residuals]
    iterations = 0
    while np.linalg.norm(D - D_old) >= convergence_tol and iterations < max_outer_iters:
        D_old = D
        Y = np.zeros((m, h))
        pool: list[int] = []
        exits = []
        for i in range(h):
            code, tr = omp(
                D_old,
                X[:, i],
                omp_tol,
                signed_correlation=signed_correlation,
                preferred=pool if atom_reuse else None,
                zero_tol=zero_tol,
                return_trace=True,
            )
            Y[:, i] = code.coefficients
            residuals[i] = np.linalg.norm(X[:, i] - D_old @ code.coefficients)
            exits.append(tr.exit_reason)
            for j in code.support:
                if j not in pool:
                    pool.append(j)
        D = dictionary_update(X, Y, ridge)
        iterations += 1
    converged = bool(np.linalg.norm(D - D_old) < convergence_tol)

    active = active_set(D, zero_tol)
    atoms = np.zeros_like(D)
    codes = np.zeros_like(Y)
    if active:
        idx = list(active)
        scale = np.linalg.norm(D[:, idx], axis=0)
        atoms[:, idx] = D[:, idx] / scale
        codes[idx] = Y[idx] * scale[:, None]
    return Dictionary(
        atoms=atoms,
        active_set=active,
        code_matrix=codes,
        converged=converged,
        iterations=iterations,
        omp_residuals=residuals.copy(),
        omp_exits=tuple(exits),
    )
