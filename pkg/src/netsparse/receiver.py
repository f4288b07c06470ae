"""Estimator-side decoder: learn the basis from past estimates and recover x(k) from y(k)."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .comm_graph import SeededMatrixGen
from .dictionary import Dictionary, build_window
from .errors import DimensionMismatch, SeedMismatch
from .protocol import EncodeOutput, LinkParams, Mode
from .sparse_coding import omp, support_least_squares
from .transmitter import learn_for_step

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RxSnapshot:
    k: int
    window: np.ndarray
    dictionary: Dictionary
    code: np.ndarray
    estimate: np.ndarray


@dataclass
class ReceiverState:
    params: LinkParams
    nominal_A: np.ndarray
    block_sizes: Sequence[int]
    est_history: deque = field(init=False)
    gen: SeededMatrixGen = field(init=False)
    dictionary: Dictionary | None = field(default=None, init=False)
    last: RxSnapshot | None = field(default=None, init=False)

    def __post_init__(self):
        self.nominal_A = np.asarray(self.nominal_A, dtype=float)
        self.block_sizes = tuple(int(b) for b in self.block_sizes)
        if sum(self.block_sizes) != self.nominal_A.shape[0]:
            raise DimensionMismatch("block sizes do not sum to the state dimension")
        self.est_history = deque(maxlen=max(self.params.h_backward, 1))
        self.gen = SeededMatrixGen(self.params.seed)

    @property
    def n(self) -> int:
        return self.nominal_A.shape[0]

    def check_digest(self, digest: bytes) -> None:
        if digest != self.params.digest():
            raise SeedMismatch(
                f"transmitter config digest {digest.hex()} != receiver {self.params.digest().hex()}"
            )

    def decode_step(self, k: int, msg: EncodeOutput) -> np.ndarray:
        self.check_digest(msg.digest)
        if msg.k != k:
            raise ValueError(f"message for step {msg.k} delivered at step {k}")
        payload = np.asarray(msg.payload, dtype=float)
        if msg.mode == Mode.FULL_STATE:
            if payload.shape != (self.n,):
                raise DimensionMismatch(f"full-state payload has {payload.shape[0]} entries, n={self.n}")
            self.est_history.append(payload.copy())
            self.last = None
            return payload.copy()

        if payload.shape != (msg.p,):
            raise DimensionMismatch(f"header p={msg.p} but payload has {payload.shape[0]} entries")
        p = self.params
        window = build_window(list(self.est_history), self.nominal_A, p.h_backward, p.h_forward)
        D = learn_for_step(window, p, k, self.n)
        C = self.gen.matrix(k, msg.p, self.block_sizes)
        if msg.p < D.sparsity:
            log.warning("step %d: p=%d < s_hat=%d, taking the minimum-norm solution", k, msg.p, D.sparsity)
        CD = C @ D.atoms
        if p.recovery == "omp":
            sub = list(D.active_set)
            z = np.zeros(D.n_atoms)
            if sub:
                code = omp(CD[:, sub], payload, p.resolved_omp_tol(msg.p), min(msg.p, len(sub)))
                z[sub] = code.coefficients
        else:
            z = support_least_squares(CD, D.active_set, payload).coefficients
        x_hat = D.atoms @ z
        self.dictionary = D
        self.last = RxSnapshot(k, window.columns, D, z, x_hat.copy())
        self.est_history.append(x_hat.copy())
        return x_hat
