"""Adaptive fuzzification of the intensity score and joint-attention patterns.

Keeps running statistics (mean intensity, mean cross-entropy gap) and two
collections of time-averaged, membership-weighted joint-attention vectors,
one per intensity category. Triangular membership functions centered on the
running means convert a sample's crisp intensity score and joint
distribution into mild/intense truth values, and every processed sample
updates the state so the memberships adapt online.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ColdStart, UndefinedCategory
from .kinetics import DEFAULT_EPS, KineticScore, intensity_score
from .skeleton import SkeletonSequence, displacement_magnitudes

SIGMA_FLOOR = 1e-3
LOG_CLAMP = 1e-12


def softmax(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(x - np.max(x))
    return e / e.sum()


@dataclass
class _RunningStat:
    """Welford accumulator: exact running mean plus variance aggregate."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def update(self, x: float):
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (x - self.mean)

    @property
    def std(self) -> float:
        return float(np.sqrt(self.m2 / self.count)) if self.count else 0.0


@dataclass
class FuzzifierState:
    intensity_stat: _RunningStat = field(default_factory=_RunningStat)
    delta_h_stat: _RunningStat = field(default_factory=_RunningStat)
    c_mild: list = field(default_factory=list)     # time-averaged mu-weighted vectors
    c_intense: list = field(default_factory=list)
    sigma_fixed: float | None = None
    sigma_prime_fixed: float | None = None
    eps: float = DEFAULT_EPS

    @property
    def mean_intensity(self) -> float:
        return self.intensity_stat.mean

    @property
    def intensity_count(self) -> int:
        return self.intensity_stat.count

    @property
    def mean_delta_h(self) -> float:
        return self.delta_h_stat.mean

    @property
    def delta_h_count(self) -> int:
        return self.delta_h_stat.count

    @property
    def sigma(self) -> float:
        if self.sigma_fixed is not None:
            return self.sigma_fixed
        return max(SIGMA_FLOOR, self.intensity_stat.std)

    @property
    def sigma_prime(self) -> float:
        if self.sigma_prime_fixed is not None:
            return self.sigma_prime_fixed
        return max(SIGMA_FLOOR, self.delta_h_stat.std)

    @property
    def p_mild(self) -> np.ndarray | None:
        if not self.c_mild:
            return None
        return softmax(np.mean(self.c_mild, axis=0))

    @property
    def p_intense(self) -> np.ndarray | None:
        if not self.c_intense:
            return None
        return softmax(np.mean(self.c_intense, axis=0))

    def to_dict(self) -> dict:
        return {
            "intensity_stat": vars(self.intensity_stat).copy(),
            "delta_h_stat": vars(self.delta_h_stat).copy(),
            "c_mild": [list(v) for v in self.c_mild],
            "c_intense": [list(v) for v in self.c_intense],
            "sigma_fixed": self.sigma_fixed,
            "sigma_prime_fixed": self.sigma_prime_fixed,
            "eps": self.eps,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FuzzifierState":
        return cls(
            intensity_stat=_RunningStat(**doc["intensity_stat"]),
            delta_h_stat=_RunningStat(**doc["delta_h_stat"]),
            c_mild=[np.array(v, dtype=np.float64) for v in doc["c_mild"]],
            c_intense=[np.array(v, dtype=np.float64) for v in doc["c_intense"]],
            sigma_fixed=doc["sigma_fixed"],
            sigma_prime_fixed=doc["sigma_prime_fixed"],
            eps=doc["eps"],
        )


@dataclass
class MembershipResult:
    mu_i_mild: float
    mu_i_intense: float
    mu_p_mild: np.ndarray    # per joint slot
    mu_p_intense: np.ndarray
    intensity: KineticScore
    q: np.ndarray


def fuzzify_intensity(intensity: float, state: FuzzifierState) -> tuple[float, float]:
    """Triangular memberships of I around the running mean; higher I => intense."""
    if state.intensity_count < 1:
        raise ColdStart("no intensity samples seen yet; mean undefined")
    dev = (intensity - state.mean_intensity) / state.sigma
    mu_intense = float(np.clip(0.5 + dev, 0.0, 1.0))
    mu_mild = float(np.clip(0.5 - dev, 0.0, 1.0))
    return mu_mild, mu_intense


def input_joint_distribution(a_joint: np.ndarray) -> np.ndarray:
    """Softmax of the time-averaged joint attention (a_joint is J x T)."""
    return softmax(np.mean(np.asarray(a_joint, dtype=np.float64), axis=1))


def update_joint_collections(sample_avg_attention: np.ndarray,
                             mu_i: tuple[float, float],
                             state: FuzzifierState) -> FuzzifierState:
    """Route the mu-weighted average attention into the matching category.

    Ties (mu_intense == mu_mild) go to mild. The category distributions are
    recomputed from the collections on access.
    """
    mu_mild, mu_intense = mu_i
    vec = np.asarray(sample_avg_attention, dtype=np.float64)
    if mu_intense <= mu_mild:
        state.c_mild.append(mu_mild * vec)
    else:
        state.c_intense.append(mu_intense * vec)
    return state


def fuzzify_joint_distribution(q: np.ndarray, state: FuzzifierState,
                               update: bool = True):
    """Per-joint memberships from the cross-entropy gap to the category dists.

    For joint j the gap is dH_j = -p_int_j log q_j + p_mld_j log q_j; larger
    gaps mean q sits farther from the intense reference, i.e. more mild. The
    running mean gap is updated joint by joint before each membership is
    evaluated, following the fuzzifier's inner loop.
    """
    p_mild, p_intense = state.p_mild, state.p_intense
    if p_mild is None or p_intense is None:
        raise UndefinedCategory("both category distributions must exist")
    q = np.asarray(q, dtype=np.float64)
    logs = np.log(np.clip(q, LOG_CLAMP, None))
    delta_h = -(p_intense - p_mild) * logs
    mu_mild = np.empty_like(q)
    mu_intense = np.empty_like(q)
    for j in range(q.size):
        if update:
            state.delta_h_stat.update(float(delta_h[j]))
        dev = (delta_h[j] - state.mean_delta_h) / state.sigma_prime
        mu_mild[j] = np.clip(0.5 + dev, 0.0, 1.0)
        mu_intense[j] = np.clip(0.5 - dev, 0.0, 1.0)
    return mu_mild, mu_intense


def fuzzify(attn, seq: SkeletonSequence, state: FuzzifierState,
            update: bool = True) -> MembershipResult:
    """Run the full fuzzification pass for one sample.

    Step order: intensity score -> running mean update -> intensity
    memberships -> category routing -> input joint distribution -> per-joint
    memberships. With update=False the state is left untouched (frozen
    evaluation against a snapshot); the state must already be seeded.
    """
    d = displacement_magnitudes(seq)
    score = intensity_score(attn.temporal, attn.joint, d, state.eps)
    if update:
        state.intensity_stat.update(score.intensity)
    mu_i = fuzzify_intensity(score.intensity, state)
    avg_attention = np.mean(np.asarray(attn.joint, dtype=np.float64), axis=1)
    if update:
        update_joint_collections(avg_attention, mu_i, state)
    q = input_joint_distribution(attn.joint)
    if state.p_mild is None or state.p_intense is None:
        # bootstrap: no reference distributions yet, maximal uncertainty
        mu_p_mild = np.full(q.size, 0.5)
        mu_p_intense = np.full(q.size, 0.5)
    else:
        mu_p_mild, mu_p_intense = fuzzify_joint_distribution(q, state, update=update)
    return MembershipResult(
        mu_i_mild=mu_i[0],
        mu_i_intense=mu_i[1],
        mu_p_mild=mu_p_mild,
        mu_p_intense=mu_p_intense,
        intensity=score,
        q=q,
    )
