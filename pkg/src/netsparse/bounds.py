"""Analytical estimation-error bounds evaluated online from transmitter and
receiver snapshots.

All matrix norms are spectral norms; pseudo-inverses use a relative
singular-value cutoff of 1e-12.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Sequence

import numpy as np

from ._linalg import pinv, spectral_norm

UNIT_NORM_ATOL = 1e-12


@dataclass(frozen=True)
class BoundReport:
    delta_s: float
    delta_D: float
    delta_Dhat: float
    delta_XXhat: float
    pinv_factor_z: float
    pinv_factor_DY: float
    bound_tho0: float
    bound_tho1: float
    lemma3_bound: float | None = None
    corollary2_beta: float | None = None
    corollary2_gamma: float | None = None

    @property
    def model_mismatch(self) -> float:
        return self.delta_D + self.delta_Dhat + self.delta_XXhat

    def as_dict(self) -> dict[str, float | None]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def theorem1_bounds(
    X: np.ndarray,
    Y: np.ndarray,
    D: np.ndarray,
    z: np.ndarray,
    delta_s: float,
    x: np.ndarray,
    X_hat: np.ndarray,
    Y_hat: np.ndarray,
    D_hat: np.ndarray,
) -> BoundReport:
    """Error bounds from the transmitter factorisation ``(X, Y, D, z)`` and the
    receiver factorisation ``(X_hat, Y_hat, D_hat)``::

        tho0 = delta_s + (dD + dDhat + dXXhat) * ||Y^+ z||
        tho1 = delta_s + (dD + dDhat + dXXhat) * ||Y^+ D^+|| * (delta_s + ||x||)
    """
    delta_D = spectral_norm(D @ Y - X)
    delta_Dhat = spectral_norm(D_hat @ Y_hat - X_hat)
    delta_XXhat = spectral_norm(X - X_hat)
    Y_pinv = pinv(Y)
    pz = float(np.linalg.norm(Y_pinv @ z))
    pDY = spectral_norm(Y_pinv @ pinv(D))
    mismatch = delta_D + delta_Dhat + delta_XXhat
    return BoundReport(
        delta_s=float(delta_s),
        delta_D=delta_D,
        delta_Dhat=delta_Dhat,
        delta_XXhat=delta_XXhat,
        pinv_factor_z=pz,
        pinv_factor_DY=pDY,
        bound_tho0=float(delta_s) + mismatch * pz,
        bound_tho1=float(delta_s) + mismatch * pDY * (float(delta_s) + float(np.linalg.norm(x))),
    )


def bounds_from_snapshots(tx, rx) -> BoundReport:
    """:func:`theorem1_bounds` for a :class:`TxSnapshot` / :class:`RxSnapshot` pair."""
    return theorem1_bounds(
        tx.window,
        tx.dictionary.code_matrix,
        tx.dictionary.atoms,
        tx.code,
        tx.delta_s,
        tx.state,
        rx.window,
        rx.dictionary.code_matrix,
        rx.dictionary.atoms,
    )


def geometric_factor(norm_a: float, h_forward: int, form: str = "closed") -> float:
    """Weight on ``theta(k-1)^2`` contributed by the prediction columns.

    ``"closed"`` is the closed form ``(a - a^(Hf+2)) / (1 - a)``, i.e.
    ``sum_{i=1}^{Hf+1} a^i``; ``"partial"`` is ``sum_{i=1}^{Hf} a^i``. The
    closed form is undefined at ``a = 1``, where both forms fall back to the
    plain sum ``Hf`` (not the ``Hf + 1`` limit of the closed form).
    """
    a = float(norm_a)
    if form not in ("closed", "partial"):
        raise ValueError(f"unknown form {form!r}")
    if abs(a - 1.0) < UNIT_NORM_ATOL:
        return float(h_forward)
    if form == "closed":
        return (a - a ** (h_forward + 2)) / (1.0 - a)
    return sum(a**i for i in range(1, h_forward + 1))


def lemma3_bound(
    error_history: Sequence[float],
    norm_a: float,
    h_backward: int,
    h_forward: int,
    form: str = "closed",
) -> float:
    """Upper bound on ``||X(k) - X_hat(k)||`` from past error bounds.

    ``error_history[i-1]`` bounds ``||x(k-i) - x_hat(k-i)||``.

    * ``"closed"``: ``sqrt(g * th1^2 + sum_{i=2}^{Hb} th_i^2)`` with the closed-form ``g``
    * ``"partial"``: ``sqrt(sum_{i=1}^{Hb} th_i^2 + sum_{i=1}^{Hf} a^i th1^2)``
    * ``"closed_full"``: closed-form ``g`` with the backward sum starting at ``i=1``
    """
    need = max(h_backward, 1 if h_forward > 0 else 0)
    th = np.asarray(error_history, dtype=float)
    if th.shape[0] < need:
        raise ValueError(f"need {need} past error values, got {th.shape[0]}")
    if form not in ("closed", "partial", "closed_full"):
        raise ValueError(f"unknown form {form!r}")
    # a diverging recursive track legitimately reaches inf
    with np.errstate(over="ignore", invalid="ignore"):
        back = th[:h_backward] ** 2
        first = th[0] ** 2 if th.shape[0] else 0.0
        if form == "closed":
            total = geometric_factor(norm_a, h_forward, "closed") * first + back[1:].sum()
        elif form == "partial":
            total = back.sum() + geometric_factor(norm_a, h_forward, "partial") * first
        else:
            total = geometric_factor(norm_a, h_forward, "closed") * first + back.sum()
    return float(np.sqrt(max(total, 0.0)))


def corollary2_coefficients(
    delta_s: float,
    delta_D: float,
    delta_Dhat: float,
    pinv_factor_DY: float,
    x0_norm: float,
    norm_a: float,
    h_forward: int,
) -> tuple[float, float]:
    """``(beta(k), gamma(k))`` of the one-step recursion ``theta(k) <= beta + gamma theta(k-1)``."""
    scale = pinv_factor_DY * (delta_s + x0_norm)
    beta = delta_s + (delta_D + delta_Dhat) * scale
    gamma = float(np.sqrt(max(geometric_factor(norm_a, h_forward, "closed"), 0.0))) * scale
    return float(beta), float(gamma)


@dataclass(frozen=True)
class Corollary2Result:
    unrolled: np.ndarray
    contraction: float | None = None  # Gamma = max gamma, when < 1
    input_bound: float | None = None  # B = max beta
    steady_closed: np.ndarray | None = None  # B Gamma / (1 - Gamma) + Gamma^(k+1) theta0
    steady_geometric: np.ndarray | None = None  # B / (1 - Gamma) + Gamma^(k+1) theta0


def corollary2_recursion(
    beta_seq: Sequence[float], gamma_seq: Sequence[float], theta0: float
) -> Corollary2Result:
    """Unrolled ``sum_t [prod_{j>t} gamma(j)] beta(t) + [prod_{j<=k} gamma(j)] theta0``.

    When every ``gamma <= Gamma < 1`` the steady-state forms are returned as
    well. The closed form ``B Gamma/(1-Gamma)`` can fall below the unrolled
    sum; ``B/(1-Gamma)`` is the geometric-series bound that always dominates it.
    """
    beta = np.asarray(beta_seq, dtype=float)
    gamma = np.asarray(gamma_seq, dtype=float)
    if beta.shape != gamma.shape:
        raise ValueError("beta and gamma must have equal length")
    K = beta.shape[0]
    unrolled = np.empty(K)
    for k in range(K):
        total = 0.0
        for t in range(k + 1):
            total += np.prod(gamma[t + 1:k + 1]) * beta[t]
        unrolled[k] = total + np.prod(gamma[:k + 1]) * theta0
    if K == 0 or gamma.max() >= 1.0:
        return Corollary2Result(unrolled)
    G = float(gamma.max())
    B = float(beta.max())
    powers = G ** (np.arange(K) + 1.0)
    return Corollary2Result(
        unrolled=unrolled,
        contraction=G,
        input_bound=B,
        steady_closed=B * G / (1.0 - G) + powers * theta0,
        steady_geometric=B / (1.0 - G) + powers * theta0,
    )
