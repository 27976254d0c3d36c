"""Fuzzy rule combination producing the final mild/intense decision.

Per-joint memberships are blended into an intermediate truth value by an
adaptive convex combination (weights alpha), then each intensity category's
final truth value is the AND-type blend (lambda-weighted t-norm/s-norm mix)
of the intensity-score membership and the intermediate value. The decision
is the argmax; ties resolve to mild and are flagged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateTraining
from .fuzzifier import MembershipResult

T_NORMS = ("min", "product")
S_NORMS = ("max", "probabilistic-sum")


@dataclass
class InferenceParams:
    alpha: np.ndarray                 # simplex weights over joint slots
    lambda_and: float = 0.5
    t_norm: str = "min"
    s_norm: str = "max"

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=np.float64)
        if np.any(self.alpha < 0) or abs(self.alpha.sum() - 1.0) > 1e-9:
            raise ValueError("alpha must lie on the probability simplex")
        if not 0.0 < self.lambda_and < 1.0:
            raise ValueError("lambda_and must be in (0, 1)")
        if self.t_norm not in T_NORMS or self.s_norm not in S_NORMS:
            raise ValueError(f"unknown norm tags {self.t_norm}/{self.s_norm}")

    @classmethod
    def uniform(cls, joint_count: int, **kw) -> "InferenceParams":
        return cls(alpha=np.full(joint_count, 1.0 / joint_count), **kw)

    def to_dict(self) -> dict:
        return {
            "alpha": list(self.alpha),
            "lambda_and": self.lambda_and,
            "t_norm": self.t_norm,
            "s_norm": self.s_norm,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "InferenceParams":
        return cls(alpha=np.array(doc["alpha"]), lambda_and=doc["lambda_and"],
                   t_norm=doc["t_norm"], s_norm=doc["s_norm"])


@dataclass
class InferenceResult:
    mu_p_mild: float
    mu_p_intense: float
    mu_y_mild: float
    mu_y_intense: float
    decision: str
    tie: bool
    intensity_score: float


def _tnorm(tag: str, a: float, b: float) -> float:
    return min(a, b) if tag == "min" else a * b


def _snorm(tag: str, a: float, b: float) -> float:
    return max(a, b) if tag == "max" else a + b - a * b


def intermediate_inference(mu_p_mild, mu_p_intense,
                           params: InferenceParams) -> tuple[float, float]:
    """Convex combination of the per-joint memberships with weights alpha."""
    return (
        float(np.dot(params.alpha, mu_p_mild)),
        float(np.dot(params.alpha, mu_p_intense)),
    )


def and_type(mu_a: float, mu_b: float, params: InferenceParams) -> float:
    """lambda * tnorm + (1 - lambda) * snorm of the two truth values."""
    lam = params.lambda_and
    return lam * _tnorm(params.t_norm, mu_a, mu_b) \
        + (1.0 - lam) * _snorm(params.s_norm, mu_a, mu_b)


def final_inference(membership: MembershipResult,
                    params: InferenceParams) -> InferenceResult:
    mu_p_mild, mu_p_intense = intermediate_inference(
        membership.mu_p_mild, membership.mu_p_intense, params)
    mu_y_mild = and_type(membership.mu_i_mild, mu_p_mild, params)
    mu_y_intense = and_type(membership.mu_i_intense, mu_p_intense, params)
    tie = mu_y_mild == mu_y_intense
    decision = "intense" if mu_y_intense > mu_y_mild else "mild"
    return InferenceResult(
        mu_p_mild=mu_p_mild,
        mu_p_intense=mu_p_intense,
        mu_y_mild=mu_y_mild,
        mu_y_intense=mu_y_intense,
        decision=decision,
        tie=tie,
        intensity_score=membership.intensity.intensity,
    )


@dataclass
class FitResult:
    params: InferenceParams
    losses: list = field(default_factory=list)
    history: list = field(default_factory=list)  # (alpha, lambda) per step


def _and_type_with_grads(tag_t, tag_s, lam, a, b):
    """AND-type value plus partials wrt b and lam (a is a constant input).

    min/max subgradient convention: ties pass the gradient to the first
    argument, so the b-derivative is 0 at a tie.
    """
    t = _tnorm(tag_t, a, b)
    s = _snorm(tag_s, a, b)
    if tag_t == "min":
        dt_db = 1.0 if b < a else 0.0
    else:
        dt_db = a
    if tag_s == "max":
        ds_db = 1.0 if b > a else 0.0
    else:
        ds_db = 1.0 - a
    value = lam * t + (1.0 - lam) * s
    dv_db = lam * dt_db + (1.0 - lam) * ds_db
    dv_dlam = t - s
    return value, dv_db, dv_dlam


def fit_params(training, init: InferenceParams, steps: int,
               lr: float = 0.5) -> FitResult:
    """Fit alpha and lambda by reparameterized gradient descent.

    training: list of (MembershipResult, intensity label) pairs. Minimizes
    the mean squared error between s = (mu_y_int - mu_y_mld + 1)/2 and the
    binary label (intense = 1). alpha lives on the simplex via softmax over
    free logits and lambda in (0,1) via a sigmoid, so the constraints hold
    at every step by construction. Returns the best parameters seen.
    """
    labels = {lab for _, lab in training}
    if labels <= {"mild"} or labels <= {"intense"}:
        raise DegenerateTraining("need at least one sample of each intensity")

    z = np.log(np.clip(init.alpha, 1e-12, None))
    w = math.log(init.lambda_and / (1.0 - init.lambda_and))
    tag_t, tag_s = init.t_norm, init.s_norm

    def current_params():
        e = np.exp(z - z.max())
        return InferenceParams(alpha=e / e.sum(),
                               lambda_and=1.0 / (1.0 + math.exp(-w)),
                               t_norm=tag_t, s_norm=tag_s)

    def loss_and_grads(params):
        alpha, lam = params.alpha, params.lambda_and
        total, g_alpha, g_lam = 0.0, np.zeros_like(alpha), 0.0
        for mem, label in training:
            y = 1.0 if label == "intense" else 0.0
            b_mld = float(np.dot(alpha, mem.mu_p_mild))
            b_int = float(np.dot(alpha, mem.mu_p_intense))
            v_mld, dv_mld_db, dv_mld_dlam = _and_type_with_grads(
                tag_t, tag_s, lam, mem.mu_i_mild, b_mld)
            v_int, dv_int_db, dv_int_dlam = _and_type_with_grads(
                tag_t, tag_s, lam, mem.mu_i_intense, b_int)
            s_val = (v_int - v_mld + 1.0) / 2.0
            err = s_val - y
            total += err * err
            coeff = 2.0 * err * 0.5
            g_alpha += coeff * (dv_int_db * mem.mu_p_intense
                                - dv_mld_db * mem.mu_p_mild)
            g_lam += coeff * (dv_int_dlam - dv_mld_dlam)
        n = len(training)
        return total / n, g_alpha / n, g_lam / n

    result = FitResult(params=current_params())
    best_loss = None
    for step in range(steps + 1):
        params = current_params()
        loss, g_alpha, g_lam = loss_and_grads(params)
        result.losses.append(loss)
        result.history.append((params.alpha.copy(), params.lambda_and))
        if best_loss is None or loss < best_loss:
            best_loss = loss
            result.params = params
        if step == steps:
            break
        # chain through the softmax / sigmoid reparameterizations
        z = z - lr * params.alpha * (g_alpha - float(np.dot(params.alpha, g_alpha)))
        w = w - lr * g_lam * params.lambda_and * (1.0 - params.lambda_and)
    return result
