import numpy as np

from .errors import NonFiniteInput

# Relative singular-value cutoff for every pseudo-inverse in the package.
PINV_RCOND = 1e-12


def as_finite(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput(f"{name} contains non-finite entries")
    return arr


def pinv(a: np.ndarray) -> np.ndarray:
    if a.size == 0:
        return np.zeros(a.shape[::-1])
    return np.linalg.pinv(a, rcond=PINV_RCOND)


def spectral_norm(a: np.ndarray) -> float:
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))
