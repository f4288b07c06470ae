"""Parameters shared by transmitter and receiver, and the wire format of one step.

A framed record is a little-endian header followed by float64 payload::

    int64 k | uint8 mode | uint32 p | uint32 s | 8-byte config digest | p x float64

``mode`` is 0 for a full-state frame (payload is ``x(k)``, ``p = n``) and 1
for a compressed frame (payload is ``y(k)``). ``s`` is the transmitter's
sparsity, zero for full-state frames.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
import struct
from dataclasses import asdict, dataclass, replace

import numpy as np

from .dictionary import default_omp_tol
from .errors import DimensionMismatch

HEADER = struct.Struct("<qBII8s")


class Mode(enum.IntEnum):
    FULL_STATE = 0
    COMPRESSED = 1


@dataclass(frozen=True)
class LinkParams:
    atoms: int = 30
    h_backward: int = 10
    h_forward: int = 5
    oversampling: float = 1.3
    omp_tol: float | None = None  # None: 1e-6 * sqrt(n)
    ridge: float = 1e-6
    convergence_tol: float = 1e-6
    max_outer_iters: int = 50
    zero_tol: float = 1e-8
    seed: int = 0
    atom_reuse: bool = True
    omp_signed_correlation: bool = False
    recovery: str = "lstsq"  # or "omp"
    refresh_period: int = 0  # >0: resend the full state every refresh_period compressed steps

    def __post_init__(self):
        if self.h_backward < 0 or self.h_forward < 0:
            raise ValueError("horizons must be non-negative")
        if self.atoms < 1:
            raise ValueError("atoms must be >= 1")
        if self.recovery not in ("lstsq", "omp"):
            raise ValueError(f"unknown recovery {self.recovery!r}")

    @property
    def horizon(self) -> int:
        return self.h_backward + self.h_forward

    def resolved_omp_tol(self, n: int) -> float:
        return self.omp_tol if self.omp_tol is not None else default_omp_tol(n)

    def digest(self) -> bytes:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).digest()[:8]

    def dictionary_seed(self, k: int) -> list[int]:
        # Gaussian filler atoms for step k; distinct from the measurement streams
        return [self.seed, k, 0x44494354]

    def is_refresh_step(self, k: int) -> bool:
        if self.refresh_period <= 0 or k < self.h_backward:
            return False
        return (k - self.h_backward) % (self.refresh_period + 1) == self.refresh_period

    def with_(self, **kw) -> "LinkParams":
        return replace(self, **kw)


def output_dimension(sparsity: int, oversampling: float, n: int) -> int:
    """``ceil(oversampling * s)`` clamped to ``[1, n]``."""
    # round first so 1.3 * 10 = 13.000000000000002 does not ceil to 14
    p = math.ceil(round(oversampling * sparsity, 9))
    return int(min(max(p, 1), n))


@dataclass(frozen=True)
class EncodeOutput:
    k: int
    mode: Mode
    p: int
    s: int = 0
    delta_s: float = 0.0
    payload: np.ndarray | None = None  # x(k), or y(k) once measured
    digest: bytes = b"\0" * 8

    def with_payload(self, payload: np.ndarray) -> "EncodeOutput":
        return replace(self, payload=np.asarray(payload, dtype=float))


def frame(msg: EncodeOutput) -> bytes:
    if msg.payload is None:
        raise ValueError("cannot frame a message without payload")
    payload = np.ascontiguousarray(msg.payload, dtype="<f8")
    if payload.shape != (msg.p,):
        raise DimensionMismatch(f"header p={msg.p} but payload has {payload.shape[0]} entries")
    return HEADER.pack(msg.k, int(msg.mode), msg.p, msg.s, msg.digest) + payload.tobytes()


def unframe(data: bytes) -> EncodeOutput:
    if len(data) < HEADER.size:
        raise DimensionMismatch("truncated frame header")
    k, mode, p, s, digest = HEADER.unpack_from(data)
    body = data[HEADER.size:]
    if len(body) != 8 * p:
        raise DimensionMismatch(f"header p={p} but frame carries {len(body) / 8:g} floats")
    payload = np.frombuffer(body, dtype="<f8").astype(float)
    return EncodeOutput(k=k, mode=Mode(mode), p=p, s=s, payload=payload, digest=digest)
