"""Laplace mechanism for releasing label-count vectors under epsilon-DP.

Each count is treated as a sensitivity-1 query, so the noise scale is
``1 / epsilon``. Clamping and the all-zero fallback are post-processing and do
not weaken the guarantee.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .labelstats import LabelCounts


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise DomainError(f"epsilon must be positive, got {self.epsilon}")

    @property
    def scale(self) -> float:
        return 1.0 / self.epsilon


def laplace_from_uniform(u: np.ndarray | float, scale: float) -> np.ndarray | float:
    """Inverse CDF of the zero-mean Laplace distribution for ``u`` in (-0.5, 0.5)."""
    return -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def laplace_noise(scale: float, size: int | tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    """Draw ``size`` i.i.d. Laplace(0, scale) values, consuming one uniform per value."""
    if not scale > 0:
        raise DomainError(f"Laplace scale must be positive, got {scale}")
    u = rng.random(size) - 0.5
    # u == -0.5 has probability 2**-53 and would give an infinite draw
    while np.any(bad := u <= -0.5):
        u[bad] = rng.random(int(bad.sum())) - 0.5
    return laplace_from_uniform(u, scale)


def laplace_sample(scale: float, rng: np.random.Generator) -> float:
    return float(laplace_noise(scale, 1, rng)[0])


def privatize_counts(
    counts: LabelCounts, budget: PrivacyBudget, rng: np.random.Generator, clamp: bool = True
) -> LabelCounts | np.ndarray:
    """Add Lap(1/epsilon) noise to every component of ``counts``.

    Negative results are clamped to 0, and an all-zero vector is replaced by
    all ones so it can still be normalized. ``clamp=False`` returns the raw
    noised array instead (for statistical testing only).
    """
    noisy = counts.counts + laplace_noise(budget.scale, counts.num_classes, rng)
    if not clamp:
        return noisy
    noisy = np.maximum(noisy, 0.0)
    if not noisy.sum() > 0:
        noisy = np.ones_like(noisy)
    return LabelCounts(noisy, counts.client_id)
