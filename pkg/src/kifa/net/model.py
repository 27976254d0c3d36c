"""Recurrent network with joint and temporal attention, trained by hand-derived
gradients under a penalized cross-entropy loss.

The per-timestep loop lives in the core backend (compiled when available);
this module owns parameters, the temporal-attention/classifier head, the
loss, stochastic-gradient training, and the finite-difference gradient
checker that validates the analytic backward pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import EmptyClass, NonFiniteLoss, ShapeMismatch
from ..skeleton import ACTIONS, LabeledSample, SkeletonSequence
from . import _backend

LOG_CLAMP = 1e-12


@dataclass
class NetConfig:
    hidden_size: int = 64
    joint_embed_size: int = 16
    class_count: int = 5
    learning_rate: float = 1e-2
    epochs: int = 30
    grad_clip: float = 5.0
    penalty_max: float = 0.5
    penalty_ramp: int = 100
    seed: int = 0

    def __post_init__(self):
        if min(self.hidden_size, self.joint_embed_size, self.class_count) < 1:
            raise ValueError("sizes must be >= 1")
        if self.learning_rate <= 0 or self.penalty_max < 0:
            raise ValueError("learning_rate must be > 0 and penalty_max >= 0")

    def to_dict(self) -> dict:
        return vars(self).copy()

    @classmethod
    def from_dict(cls, doc: dict) -> "NetConfig":
        return cls(**doc)


@dataclass
class NetParams:
    arrays: dict
    slot_count: int

    def copy(self) -> "NetParams":
        return NetParams({k: v.copy() for k, v in self.arrays.items()},
                         self.slot_count)

    def names(self):
        return sorted(self.arrays)


@dataclass
class AttentionOutput:
    temporal: np.ndarray        # (T,)
    joint: np.ndarray           # (K, T), each column a distribution
    class_scores: np.ndarray    # (C,)
    hidden_states: np.ndarray   # (T, H)

    def validate(self, tol: float = 1e-9):
        assert abs(self.temporal.sum() - 1.0) <= tol and np.all(self.temporal > 0)
        col_sums = self.joint.sum(axis=0)
        assert np.all(np.abs(col_sums - 1.0) <= tol) and np.all(self.joint > 0)
        assert abs(self.class_scores.sum() - 1.0) <= tol


def _param_shapes(config: NetConfig, slot_count: int) -> dict:
    h, m, c = config.hidden_size, config.joint_embed_size, config.class_count
    return {
        "embed": ((slot_count, m, 3), 3),
        "attn_w": ((m, m), m),
        "attn_u": ((m, h), h),
        "attn_b": ((m,), m),
        "attn_v": ((m,), m),
        "lstm_wx": ((4 * h, m), m),
        "lstm_wh": ((4 * h, h), h),
        "lstm_b": ((4 * h,), h),
        "tattn_w": ((m, h), h),
        "tattn_b": ((m,), h),
        "tattn_v": ((m,), m),
        "cls_w": ((c, h), h),
        "cls_b": ((c,), h),
    }


def init_params(config: NetConfig, slot_count: int,
                rng: np.random.Generator) -> NetParams:
    """Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] for every array."""
    arrays = {}
    for name, (shape, fan_in) in _param_shapes(config, slot_count).items():
        bound = 1.0 / np.sqrt(fan_in)
        arrays[name] = rng.uniform(-bound, bound, size=shape)
    return NetParams(arrays, slot_count)


def _softmax(x):
    e = np.exp(x - np.max(x))
    return e / e.sum()


def forward_full(params: NetParams, seq: SkeletonSequence):
    """Full forward pass; returns (AttentionOutput, cache for backward)."""
    if seq.slot_count != params.slot_count:
        raise ShapeMismatch(
            f"sequence has {seq.slot_count} joint slots, params expect "
            f"{params.slot_count}")
    a = params.arrays
    X = np.ascontiguousarray(seq.coords)
    core = _backend.recurrent_forward(
        a["embed"], a["attn_w"], a["attn_u"], a["attn_b"], a["attn_v"],
        a["lstm_wx"], a["lstm_wh"], a["lstm_b"], X)
    h = core["h"]
    u2 = np.tanh(h @ a["tattn_w"].T + a["tattn_b"][None, :])
    st = u2 @ a["tattn_v"]
    temporal = _softmax(st)
    ctx = temporal @ h
    logits = a["cls_w"] @ ctx + a["cls_b"]
    scores = _softmax(logits)
    out = AttentionOutput(
        temporal=temporal,
        joint=core["aprime"].T,
        class_scores=scores,
        hidden_states=h,
    )
    cache = {"core": core, "X": X, "u2": u2, "ctx": ctx}
    return out, cache


def forward(params: NetParams, seq: SkeletonSequence) -> AttentionOutput:
    out, _ = forward_full(params, seq)
    return out


def penalized_loss(output: AttentionOutput, y: np.ndarray, q: np.ndarray,
                   p: np.ndarray | None, lambda_pen: float) -> float:
    """Classification cross-entropy plus lambda * H(p, q).

    The penalty cross-entropy is added (not subtracted): it is minimized
    when the input joint distribution q matches the category reference p.
    """
    loss = -float(np.dot(y, np.log(np.clip(output.class_scores, LOG_CLAMP, None))))
    if p is not None and lambda_pen > 0.0:
        loss += lambda_pen * -float(np.dot(p, np.log(np.clip(q, LOG_CLAMP, None))))
    return loss


def joint_distribution(output: AttentionOutput) -> np.ndarray:
    """Softmax of the time-averaged joint attention (the q of the penalty)."""
    return _softmax(np.mean(output.joint, axis=1))


def loss_and_grads(params: NetParams, seq: SkeletonSequence, label_idx: int,
                   p: np.ndarray | None = None, lambda_pen: float = 0.0):
    """Loss plus analytic gradients for every parameter array."""
    out, cache = forward_full(params, seq)
    a = params.arrays
    h, temporal, u2 = out.hidden_states, out.temporal, cache["u2"]
    T = h.shape[0]
    y = np.zeros(out.class_scores.size)
    y[label_idx] = 1.0
    q = joint_distribution(out)
    loss = penalized_loss(out, y, q, p, lambda_pen)

    # classifier
    dlogits = out.class_scores - y
    grads = {
        "cls_w": np.outer(dlogits, cache["ctx"]),
        "cls_b": dlogits,
    }
    dctx = a["cls_w"].T @ dlogits

    # temporal attention: ctx = sum_t a_t h_t, scores from tanh head
    dh_out = temporal[:, None] * dctx[None, :]
    da = h @ dctx
    dst = temporal * (da - float(temporal @ da))
    dpre2 = (dst[:, None] * a["tattn_v"][None, :]) * (1.0 - u2 * u2)
    grads["tattn_v"] = u2.T @ dst
    grads["tattn_w"] = dpre2.T @ h
    grads["tattn_b"] = dpre2.sum(axis=0)
    dh_out += dpre2 @ a["tattn_w"]

    # penalty path: q = softmax(mean_t a'_t)
    if p is not None and lambda_pen > 0.0:
        dmean = lambda_pen * (float(p.sum()) * q - p)
        daprime = np.repeat(dmean[None, :] / T, T, axis=0)
    else:
        daprime = np.zeros((T, params.slot_count))

    core_grads = _backend.recurrent_backward(
        a["embed"], a["attn_w"], a["attn_u"], a["attn_b"], a["attn_v"],
        a["lstm_wx"], a["lstm_wh"], a["lstm_b"], cache["X"], cache["core"],
        dh_out, daprime)
    grads.update(core_grads)
    return loss, grads, out


def _clip_grads(grads: dict, max_norm: float):
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return grads


def train(config: NetConfig, samples: list[LabeledSample],
          fuzzifier_feedback=None, initial_params: NetParams | None = None):
    """Stochastic gradient descent over the penalized loss.

    fuzzifier_feedback, when given, maps a LabeledSample to the category
    joint distribution p matching its intensity label (or None to skip the
    penalty for that sample). The penalty multiplier ramps linearly with
    the number of samples of the same action seen so far, capped at
    penalty_max after penalty_ramp samples. initial_params continues
    training from an existing parameter set instead of a fresh init.
    Deterministic given (config, samples) order.
    """
    if not samples:
        raise EmptyClass("no training samples")
    classes = ACTIONS[:config.class_count]
    present = {s.action for s in samples}
    missing = [c for c in classes if c not in present]
    if missing:
        raise EmptyClass(f"no samples for classes: {missing}")

    rng = np.random.default_rng(config.seed)
    if initial_params is not None:
        params = initial_params.copy()
    else:
        params = init_params(config, samples[0].sequence.slot_count, rng)
    label_of = {action: i for i, action in enumerate(classes)}
    seen = {action: 0 for action in classes}
    trace = []
    for _ in range(config.epochs):
        order = rng.permutation(len(samples))
        epoch_losses = []
        for i in order:
            sample = samples[int(i)]
            p = fuzzifier_feedback(sample) if fuzzifier_feedback else None
            n_a = seen[sample.action]
            lam = config.penalty_max * min(1.0, n_a / max(1, config.penalty_ramp))
            seen[sample.action] += 1
            loss, grads, _ = loss_and_grads(
                params, sample.sequence, label_of[sample.action],
                p=p, lambda_pen=lam if p is not None else 0.0)
            if not np.isfinite(loss):
                raise NonFiniteLoss(f"training diverged, loss={loss}")
            _clip_grads(grads, config.grad_clip)
            for name, g in grads.items():
                params.arrays[name] -= config.learning_rate * g
            epoch_losses.append(loss)
        trace.append(float(np.mean(epoch_losses)))
    return params, trace


def _loss_reference(arrays: dict, X: np.ndarray, label_idx: int,
                    p: np.ndarray, lambda_pen: float, dtype) -> float:
    """Loss via the pure-python core in an arbitrary float dtype.

    The finite-difference oracle evaluates this in extended precision so
    the numeric gradient is not drowned by float64 rounding of the loss.
    """
    from . import _core_py

    a = {k: v.astype(dtype) for k, v in arrays.items()}
    core = _core_py.recurrent_forward(
        a["embed"], a["attn_w"], a["attn_u"], a["attn_b"], a["attn_v"],
        a["lstm_wx"], a["lstm_wh"], a["lstm_b"], X.astype(dtype))
    h = core["h"]
    u2 = np.tanh(h @ a["tattn_w"].T + a["tattn_b"][None, :])
    st = u2 @ a["tattn_v"]
    ex = np.exp(st - st.max())
    temporal = ex / ex.sum()
    ctx = temporal @ h
    logits = a["cls_w"] @ ctx + a["cls_b"]
    el = np.exp(logits - logits.max())
    scores = el / el.sum()
    loss = -np.log(np.clip(scores[label_idx], LOG_CLAMP, None))
    mean_joint = np.mean(core["aprime"], axis=0)
    eq = np.exp(mean_joint - mean_joint.max())
    q = eq / eq.sum()
    loss = loss + lambda_pen * -(p.astype(dtype)
                                 @ np.log(np.clip(q, LOG_CLAMP, None)))
    return loss


def grad_check(config: NetConfig, seed: int, h: float = 1e-5,
               length: int = 5, slot_count: int = 4) -> float:
    """Max relative error of analytic vs central-difference gradients.

    Builds one small random instance (sequence, label, penalty target) and
    perturbs every parameter entry. The perturbed losses are evaluated in
    extended precision with the exact realized step as denominator, so the
    comparison measures the analytic gradients rather than float64 noise
    in the loss. Relative error is |g_a - g_n| / max(1e-8, |g_a| + |g_n|).
    """
    rng = np.random.default_rng(seed)
    coords = rng.normal(0.0, 1.0, size=(length, slot_count, 3))
    seq = SkeletonSequence(coords=coords, subject_count=1,
                           joint_count=slot_count, sequence_id="gradcheck")
    label = int(rng.integers(config.class_count))
    p = _softmax(rng.normal(size=slot_count))
    lam = 0.3
    params = init_params(config, slot_count, rng)

    _, grads, _ = loss_and_grads(params, seq, label, p=p, lambda_pen=lam)

    X = np.ascontiguousarray(seq.coords)
    fd_dtype = np.longdouble
    worst = 0.0
    for name in params.names():
        arr = params.arrays[name]
        ga = grads[name]
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = arr[idx]
            hi, lo = orig + h, orig - h
            arr[idx] = hi
            lp = _loss_reference(params.arrays, X, label, p, lam, fd_dtype)
            arr[idx] = lo
            lm = _loss_reference(params.arrays, X, label, p, lam, fd_dtype)
            arr[idx] = orig
            gn = float((lp - lm) / fd_dtype(hi - lo))
            rel = abs(ga[idx] - gn) / max(1e-8, abs(ga[idx]) + abs(gn))
            worst = max(worst, rel)
    return worst
