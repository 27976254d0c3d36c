"""Kinetic intensity scoring from attention weights via fuzzy entropies.

Two entropies feed the score: a temporal one computed from the frame
attention and per-frame displacement magnitudes (inversely related to
motion speed), and a spatial one computed from the joint attention
(directly related to how many joints are engaged). The intensity score is
their ratio. Natural log throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidAttention, ZeroTemporalEntropy

DEFAULT_EPS = 1e-6
LOG_CLAMP = 1e-12
NORM_TOL = 1e-6


@dataclass
class KineticScore:
    h_temporal: float
    h_spatial: float
    intensity: float
    epsilon_used: bool = False


def _check_distribution(a: np.ndarray, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 1 or a.size == 0:
        raise InvalidAttention(f"{name} must be a non-empty vector")
    if np.any(a <= 0.0) or not np.all(np.isfinite(a)):
        raise InvalidAttention(f"{name} must be strictly positive and finite")
    if abs(a.sum() - 1.0) > NORM_TOL:
        raise InvalidAttention(f"{name} must sum to 1, got {a.sum():.9f}")
    return a


def temporal_fuzzy_entropy(a, d, eps: float = DEFAULT_EPS) -> float:
    """-sum_{t>=2} log(a_t) / max(d_t, eps).

    Frame 0 carries no displacement and is excluded from the sum.
    """
    a = _check_distribution(a, "temporal attention")
    d = np.asarray(d, dtype=np.float64)
    if d.shape != a.shape:
        raise InvalidAttention("attention and displacement lengths differ")
    if np.any(d < 0.0):
        raise InvalidAttention("displacements must be non-negative")
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    logs = np.log(np.clip(a[1:], LOG_CLAMP, None))
    return float(-np.sum(logs / np.maximum(d[1:], eps)))


def spatial_fuzzy_entropy(a, a_joint) -> float:
    """-sum_t a_t * sum_j a'_jt log a'_jt; lies in [0, log J]."""
    a = _check_distribution(a, "temporal attention")
    aj = np.asarray(a_joint, dtype=np.float64)
    if aj.ndim != 2 or aj.shape[1] != a.size:
        raise InvalidAttention(
            f"joint attention must be (J, T={a.size}), got {aj.shape}"
        )
    for t in range(aj.shape[1]):
        _check_distribution(aj[:, t], f"joint attention column {t}")
    logs = np.log(np.clip(aj, LOG_CLAMP, None))
    per_frame = -np.sum(aj * logs, axis=0)
    return float(np.sum(a * per_frame))


def intensity_score(a, a_joint, d, eps: float = DEFAULT_EPS) -> KineticScore:
    """Assemble the kinetic score I = h_spatial / h_temporal."""
    h_t = temporal_fuzzy_entropy(a, d, eps)
    h_s = spatial_fuzzy_entropy(a, a_joint)
    if h_t <= 0.0:
        raise ZeroTemporalEntropy("temporal fuzzy entropy is zero; unscorable sample")
    d = np.asarray(d, dtype=np.float64)
    return KineticScore(
        h_temporal=h_t,
        h_spatial=h_s,
        intensity=h_s / h_t,
        epsilon_used=bool(np.any(d[1:] < eps)),
    )
