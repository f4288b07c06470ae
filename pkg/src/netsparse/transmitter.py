"""System-side encoder: learn the basis from true-state history and size the measurement."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .dictionary import Dictionary, build_window, learn
from .protocol import EncodeOutput, LinkParams, Mode, output_dimension
from .sparse_coding import support_least_squares


@dataclass(frozen=True)
class TxSnapshot:
    k: int
    window: np.ndarray
    dictionary: Dictionary
    code: np.ndarray
    delta_s: float
    state: np.ndarray


def learn_for_step(window, params: LinkParams, k: int, n: int) -> Dictionary:
    """Dictionary learning exactly as both link ends must run it for step ``k``."""
    return learn(
        window,
        params.atoms,
        omp_tol=params.resolved_omp_tol(n),
        ridge=params.ridge,
        convergence_tol=params.convergence_tol,
        max_outer_iters=params.max_outer_iters,
        seed=params.dictionary_seed(k),
        zero_tol=params.zero_tol,
        atom_reuse=params.atom_reuse,
        signed_correlation=params.omp_signed_correlation,
    )


@dataclass
class TransmitterState:
    params: LinkParams
    nominal_A: np.ndarray
    history: deque = field(init=False)
    dictionary: Dictionary | None = field(default=None, init=False)
    last: TxSnapshot | None = field(default=None, init=False)

    def __post_init__(self):
        self.nominal_A = np.asarray(self.nominal_A, dtype=float)
        self.history = deque(maxlen=max(self.params.h_backward, 1))

    @property
    def n(self) -> int:
        return self.nominal_A.shape[0]

    def encode_step(self, x_k: np.ndarray, k: int) -> EncodeOutput:
        """Full state during warm-up (``k < h_backward``) and on refresh steps;
        otherwise learn ``D(k)``, code ``x(k)`` on its active set and choose ``p(k)``.

        The returned compressed message has no payload yet: ``y(k)`` is formed
        by the network aggregation and attached with ``with_payload``.
        """
        x_k = np.asarray(x_k, dtype=float)
        p = self.params
        digest = p.digest()
        if k < p.h_backward or p.is_refresh_step(k):
            self.history.append(x_k.copy())
            self.last = None
            return EncodeOutput(k, Mode.FULL_STATE, self.n, payload=x_k.copy(), digest=digest)

        window = build_window(list(self.history), self.nominal_A, p.h_backward, p.h_forward)
        D = learn_for_step(window, p, k, self.n)
        code = support_least_squares(D.atoms, D.active_set, x_k)
        delta_s = float(np.linalg.norm(x_k - D.atoms @ code.coefficients))
        p_k = output_dimension(D.sparsity, p.oversampling, self.n)
        self.dictionary = D
        self.last = TxSnapshot(k, window.columns, D, code.coefficients, delta_s, x_k.copy())
        self.history.append(x_k.copy())
        return EncodeOutput(k, Mode.COMPRESSED, p_k, D.sparsity, delta_s, digest=digest)
