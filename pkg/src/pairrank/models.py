"""Parametric preference models.

A worker comparing objects ``i`` and ``j`` prefers ``i`` with probability
``F(q_i - q_j)``, where ``F`` is a smooth, strictly increasing link with
``F(0) = 1/2`` and ``F(-x) = 1 - F(x)``.  Two links are provided:

* Thurstone: ``F(x) = Phi(x / sigma)``, the Gaussian cdf of the difference
  noise with standard deviation ``sigma``;
* BTL: the logistic function ``e^x / (1 + e^x)``.

All functions accept scalars or numpy arrays and broadcast.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from scipy import special

from .errors import DomainError

ArrayLike = npt.ArrayLike
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


class ModelKind(str, enum.Enum):
    THURSTONE = "thurstone"
    BTL = "btl"


@dataclass(frozen=True)
class PreferenceModel:
    """Link function ``F`` together with its parameters.

    Attributes:
        kind: Which family the link belongs to.
        sigma: Standard deviation of the difference noise (Thurstone only).
    """

    kind: ModelKind = ModelKind.THURSTONE
    sigma: float = 0.4

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ModelKind(self.kind))
        if self.kind is ModelKind.THURSTONE and not (np.isfinite(self.sigma) and self.sigma > 0):
            raise DomainError(f"sigma must be positive and finite, got {self.sigma}")

    @classmethod
    def thurstone(cls, sigma: float = 0.4) -> PreferenceModel:
        return cls(ModelKind.THURSTONE, sigma)

    @classmethod
    def btl(cls) -> PreferenceModel:
        return cls(ModelKind.BTL, 1.0)

    @classmethod
    def from_name(cls, name: str, sigma: float = 0.4) -> PreferenceModel:
        try:
            kind = ModelKind(name.lower())
        except ValueError:
            raise DomainError(f"unknown model {name!r}; expected 'thurstone' or 'btl'") from None
        return cls(kind, sigma if kind is ModelKind.THURSTONE else 1.0)

    def __str__(self) -> str:
        if self.kind is ModelKind.THURSTONE:
            return f"thurstone(sigma={self.sigma:g})"
        return "btl"


def _finite(delta: ArrayLike) -> np.ndarray:
    x = np.asarray(delta, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("quality difference must be finite")
    return x


def _unwrap(x: np.ndarray) -> np.ndarray | float:
    return float(x) if x.ndim == 0 else x


def preference_prob(model: PreferenceModel, delta: ArrayLike) -> np.ndarray | float:
    """Probability ``F(delta)`` that the first object is preferred."""
    x = _finite(delta)
    if model.kind is ModelKind.BTL:
        p = special.expit(x)
    else:
        p = special.ndtr(x / model.sigma)
    return _unwrap(p)


def log_preference_prob(model: PreferenceModel, delta: ArrayLike) -> np.ndarray | float:
    """``log F(delta)``, accurate far into both tails."""
    x = _finite(delta)
    if model.kind is ModelKind.BTL:
        return _unwrap(special.log_expit(x))
    return _unwrap(special.log_ndtr(x / model.sigma))


def inverse_preference(model: PreferenceModel, p: ArrayLike) -> np.ndarray | float:
    """Quality difference ``F^{-1}(p)``; ``p`` must lie strictly inside (0, 1)."""
    y = np.asarray(p, dtype=float)
    if not np.all((y > 0.0) & (y < 1.0)):
        raise DomainError("probability must lie strictly inside (0, 1); clamp before inverting")
    if model.kind is ModelKind.BTL:
        x = special.logit(y)
    else:
        x = model.sigma * special.ndtri(y)
    return _unwrap(x)


def prob_derivatives(
    model: PreferenceModel, delta: ArrayLike
) -> tuple[np.ndarray | float, np.ndarray | float, np.ndarray | float]:
    """Return ``(F, F', F'')`` evaluated at ``delta``."""
    x = _finite(delta)
    if model.kind is ModelKind.BTL:
        p = special.expit(x)
        # p(1-p) written via expit(-x) keeps precision in the tails
        pq = p * special.expit(-x)
        d1 = pq
        d2 = pq * (1.0 - 2.0 * p)
    else:
        z = x / model.sigma
        p = special.ndtr(z)
        d1 = _INV_SQRT_2PI * np.exp(-0.5 * z * z) / model.sigma
        d2 = -z / model.sigma * d1
    return _unwrap(p), _unwrap(d1), _unwrap(d2)


def inverse_derivative(model: PreferenceModel, p: ArrayLike) -> np.ndarray | float:
    """``dF^{-1}/dp`` at ``p``, i.e. ``1 / F'(F^{-1}(p))``."""
    x = np.asarray(inverse_preference(model, p))
    if model.kind is ModelKind.BTL:
        y = np.asarray(p, dtype=float)
        return _unwrap(1.0 / (y * (1.0 - y)))
    _, d1, _ = prob_derivatives(model, x)
    return _unwrap(1.0 / np.asarray(d1))


def sample_comparisons(
    model: PreferenceModel,
    delta: ArrayLike,
    trials: ArrayLike,
    rng: np.random.Generator,
) -> np.ndarray | int:
    """Number of times the first object wins out of ``trials`` comparisons.

    A single binomial draw per pair; only the win count enters the
    estimators, so individual worker answers are never materialised.
    """
    w = np.asarray(trials)
    if np.any(w < 0):
        raise DomainError("number of comparisons must be non-negative")
    p = np.asarray(preference_prob(model, delta))
    k = rng.binomial(w.astype(np.int64), p)
    return int(k) if np.ndim(k) == 0 else k
