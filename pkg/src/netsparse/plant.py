"""Interconnected uncertain discrete-time LTI plant ``x(k+1) = (A + dA) x(k) + E w(k)``."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch


@dataclass(frozen=True)
class SystemModel:
    nominal_A: np.ndarray
    uncertainty_A: np.ndarray
    input_map_E: np.ndarray
    block_sizes: tuple[int, ...]
    initial_state: np.ndarray
    input_sizes: tuple[int, ...] | None = None

    def __post_init__(self):
        n = sum(self.block_sizes)
        if any(b < 1 for b in self.block_sizes):
            raise ValueError("block sizes must be positive")
        for name in ("nominal_A", "uncertainty_A"):
            if getattr(self, name).shape != (n, n):
                raise DimensionMismatch(f"{name} must be {n}x{n}")
        if self.initial_state.shape != (n,):
            raise DimensionMismatch(f"initial_state must have length {n}")
        E = self.input_map_E
        if self.input_sizes is None:
            object.__setattr__(self, "input_sizes", tuple(self.block_sizes))
        if E.shape != (n, sum(self.input_sizes)) or len(self.input_sizes) != len(self.block_sizes):
            raise DimensionMismatch("input_map_E does not conform to the block structure")
        mask = np.zeros(E.shape, dtype=bool)
        r = c = 0
        for nb, pb in zip(self.block_sizes, self.input_sizes):
            mask[r:r + nb, c:c + pb] = True
            r += nb
            c += pb
        if np.any(E[~mask] != 0.0):
            raise DimensionMismatch("input_map_E is not block-diagonal")

    @property
    def n(self) -> int:
        return self.nominal_A.shape[0]

    @property
    def subsystems(self) -> int:
        return len(self.block_sizes)

    @property
    def true_A(self) -> np.ndarray:
        return self.nominal_A + self.uncertainty_A

    def split(self, state: np.ndarray) -> list[np.ndarray]:
        """Per-subsystem slices of a stacked state vector."""
        return np.split(np.asarray(state), np.cumsum(self.block_sizes)[:-1])


# SeedSequence zero-pads its entropy, so [seed, 0] would replay the model
# stream default_rng(seed); the tag keeps input draws separate.
INPUT_STREAM_TAG = 0x494E5055


@dataclass
class InputProcess:
    """Unit-variance Gaussian inputs on the active subsystems (1-based), zero elsewhere.

    Draws for step ``k`` come from their own seeded stream, so ``sample(k)``
    is reproducible in any call order.
    """

    active_set: frozenset[int]
    seed: int
    input_sizes: tuple[int, ...] = field(default=())

    def __post_init__(self):
        self.active_set = frozenset(int(i) for i in self.active_set)
        bad = [i for i in self.active_set if not 1 <= i <= len(self.input_sizes)]
        if bad:
            raise ValueError(f"active inputs {sorted(bad)} outside 1..{len(self.input_sizes)}")

    def sample(self, k: int) -> np.ndarray:
        rng = np.random.default_rng([self.seed, k, INPUT_STREAM_TAG])
        draws = rng.standard_normal(sum(self.input_sizes))
        w = np.zeros_like(draws)
        start = 0
        for ell, size in enumerate(self.input_sizes, start=1):
            if ell in self.active_set:
                w[start:start + size] = draws[start:start + size]
            start += size
        return w


def step(model: SystemModel, state: np.ndarray, input: np.ndarray) -> np.ndarray:
    state = np.asarray(state, dtype=float)
    input = np.asarray(input, dtype=float)
    if state.shape != (model.n,):
        raise DimensionMismatch(f"state has shape {state.shape}, model has n={model.n}")
    if input.shape != (model.input_map_E.shape[1],):
        raise DimensionMismatch(f"input has shape {input.shape}")
    return model.true_A @ state + model.input_map_E @ input


def simulate(model: SystemModel, inputs: InputProcess, steps: int) -> np.ndarray:
    """States ``x(0) .. x(steps-1)`` as rows."""
    out = np.empty((steps, model.n))
    x = model.initial_state.copy()
    for k in range(steps):
        out[k] = x
        x = step(model, x, inputs.sample(k))
    return out


def consensus_matrix(L: int, alpha: float) -> np.ndarray:
    A = np.full((L, L), float(alpha))
    np.fill_diagonal(A, 1.0 - (L - 1) * alpha)
    return A


def build_consensus_model(
    L: int, alpha: float, uncertainty_fraction: float = 0.0, seed: int = 0
) -> SystemModel:
    """Consensus network ``x_l <- x_l + sum_j alpha_lj (x_j - x_l) + w_l``.

    Each off-diagonal coupling is perturbed once, uniformly within
    ``+-uncertainty_fraction * alpha``; the diagonal absorbs the row sum so
    every row of ``A + dA`` still sums to one. The initial state is standard
    normal.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    if uncertainty_fraction < 0:
        raise ValueError("uncertainty_fraction must be non-negative")
    rng = np.random.default_rng(seed)
    x0 = rng.standard_normal(L)
    A = consensus_matrix(L, alpha)
    dA = np.zeros((L, L))
    if uncertainty_fraction > 0 and L > 1:
        dA = rng.uniform(-uncertainty_fraction, uncertainty_fraction, (L, L)) * alpha
        np.fill_diagonal(dA, 0.0)
        np.fill_diagonal(dA, -dA.sum(axis=1))
    return SystemModel(
        nominal_A=A,
        uncertainty_A=dA,
        input_map_E=np.eye(L),
        block_sizes=(1,) * L,
        initial_state=x0,
    )
