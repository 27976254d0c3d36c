"""End-to-end pipeline: sessions, evaluation harness, exports, bell fitting.

A session bundles the trained network, the adaptive fuzzifier state and the
fitted inference parameters. Training runs in two phases: plain action
recognition first, then penalty fine-tuning where the loss pulls each
sample's joint-attention distribution toward its intensity category's
reference distribution; the fuzzifier state is rebuilt with the final
network and the inference weights are fitted stage-wise on the training
memberships.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import net as netmod
from .errors import DegenerateData, DegenerateTraining, IoFailure
from .fuzzifier import FuzzifierState, fuzzify
from .inference import InferenceParams, final_inference, fit_params
from .kinetics import intensity_score
from .metrics import binary_report, multiclass_accuracy, multiclass_confusion
from .skeleton import (
    ACTIONS,
    DatasetManifest,
    LabeledSample,
    SkeletonSequence,
    displacement_magnitudes,
    load_samples,
    split_kfold,
)

SCHEMA_VERSION = 1
SESSION_FILE = "session.json"
CHECKPOINT_FILE = "net.ckpt"


@dataclass
class PipelineConfig:
    net: netmod.NetConfig = field(default_factory=netmod.NetConfig)
    sigma: float | None = None            # fixed spread overrides; None = running std
    sigma_prime: float | None = None
    t_norm: str = "min"
    s_norm: str = "max"
    penalty_epochs: int = 10
    fit_steps: int = 200
    fit_lr: float = 0.5
    eps: float = 1e-6

    def to_dict(self) -> dict:
        doc = {k: v for k, v in vars(self).items() if k != "net"}
        doc["net"] = self.net.to_dict()
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        doc = dict(doc)
        net = netmod.NetConfig.from_dict(doc.pop("net", {}))
        return cls(net=net, **doc)


@dataclass
class PipelineSession:
    net_params: netmod.NetParams
    config: PipelineConfig
    fuzzifier_state: FuzzifierState
    inference_params: InferenceParams
    manifest_ref: str = ""
    seed: int = 0


def _new_state(config: PipelineConfig) -> FuzzifierState:
    return FuzzifierState(sigma_fixed=config.sigma,
                          sigma_prime_fixed=config.sigma_prime,
                          eps=config.eps)


def _build_fuzzifier(params, samples, config: PipelineConfig) -> FuzzifierState:
    state = _new_state(config)
    for sample in samples:
        out = netmod.forward(params, sample.sequence)
        fuzzify(out, sample.sequence, state, update=True)
    return state


def train_session(samples: list[LabeledSample], config: PipelineConfig,
                  manifest_ref: str = "", seed: int | None = None):
    """Train the full pipeline on a labeled sample list.

    Returns (session, info) where info carries the per-epoch loss traces of
    both network phases and the inference fit.
    """
    seed = config.net.seed if seed is None else seed
    net_cfg = replace(config.net, seed=seed)
    params, trace1 = netmod.train(net_cfg, samples)
    info = {"pretrain_loss": trace1, "penalty_loss": [], "fit_loss": []}

    if config.penalty_epochs > 0 and net_cfg.penalty_max > 0:
        state = _build_fuzzifier(params, samples, config)
        p_mild, p_intense = state.p_mild, state.p_intense

        def feedback(sample):
            if sample.intensity == "mild":
                return p_mild
            if sample.intensity == "intense":
                return p_intense
            return None

        cfg2 = replace(net_cfg, seed=seed + 1, epochs=config.penalty_epochs)
        params, trace2 = netmod.train(cfg2, samples, fuzzifier_feedback=feedback,
                                      initial_params=params)
        info["penalty_loss"] = trace2

    state = _build_fuzzifier(params, samples, config)

    inference = InferenceParams.uniform(params.slot_count,
                                        t_norm=config.t_norm,
                                        s_norm=config.s_norm)
    training_pairs = []
    for sample in samples:
        if sample.intensity not in ("mild", "intense"):
            continue
        out = netmod.forward(params, sample.sequence)
        mem = fuzzify(out, sample.sequence, state, update=False)
        training_pairs.append((mem, sample.intensity))
    try:
        fit = fit_params(training_pairs, inference, config.fit_steps,
                         config.fit_lr)
        inference = fit.params
        info["fit_loss"] = fit.losses
    except DegenerateTraining:
        info["fit_loss"] = []  # single-intensity corpus; keep uniform weights

    session = PipelineSession(
        net_params=params,
        config=config,
        fuzzifier_state=state,
        inference_params=inference,
        manifest_ref=manifest_ref,
        seed=seed,
    )
    return session, info


def index_sample(session: PipelineSession, seq: SkeletonSequence,
                 frozen: bool = False) -> dict:
    """Run forward -> kinetics -> fuzzify -> inference on one sequence."""
    out = netmod.forward(session.net_params, seq)
    mem = fuzzify(out, seq, session.fuzzifier_state, update=not frozen)
    result = final_inference(mem, session.inference_params)
    action_idx = int(np.argmax(out.class_scores))
    return {
        "action": ACTIONS[action_idx],
        "action_confidence": float(out.class_scores[action_idx]),
        "intensity_index": result.decision,
        "mu_y_mild": result.mu_y_mild,
        "mu_y_intense": result.mu_y_intense,
        "intensity_score": result.intensity_score,
        "tie": result.tie,
        "epsilon_used": mem.intensity.epsilon_used,
    }


# ---------------------------------------------------------------------------
# session persistence

def save_session(session: PipelineSession, out_dir) -> None:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create session dir {out}: {exc}") from exc
    netmod.save_checkpoint(session.net_params, session.config.net,
                           session.seed, out / CHECKPOINT_FILE)
    doc = {
        "version": SCHEMA_VERSION,
        "seed": session.seed,
        "manifest": session.manifest_ref,
        "config": session.config.to_dict(),
        "fuzzifier_state": session.fuzzifier_state.to_dict(),
        "inference_params": session.inference_params.to_dict(),
    }
    try:
        (out / SESSION_FILE).write_text(
            json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write session {out}: {exc}") from exc


def load_session(session_dir) -> PipelineSession:
    d = Path(session_dir)
    try:
        doc = json.loads((d / SESSION_FILE).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise IoFailure(f"cannot read session {d}: {exc}") from exc
    params, _, seed = netmod.load_checkpoint(d / CHECKPOINT_FILE)
    return PipelineSession(
        net_params=params,
        config=PipelineConfig.from_dict(doc["config"]),
        fuzzifier_state=FuzzifierState.from_dict(doc["fuzzifier_state"]),
        inference_params=InferenceParams.from_dict(doc["inference_params"]),
        manifest_ref=doc["manifest"],
        seed=seed,
    )


# ---------------------------------------------------------------------------
# evaluation

def _kinetic_features(out, seq) -> np.ndarray:
    """Baseline features: time-averaged joint attention plus kinetic terms."""
    d = displacement_magnitudes(seq)
    score = intensity_score(out.temporal, out.joint, d)
    avg_joint = np.mean(out.joint, axis=1)
    return np.concatenate([avg_joint,
                           [score.intensity, score.h_spatial, score.h_temporal]])


def _logistic_fit(features: np.ndarray, labels: np.ndarray,
                  steps: int = 300, lr: float = 0.1):
    """Plain gradient-descent logistic regression on standardized features."""
    mean = features.mean(axis=0)
    std = np.where(features.std(axis=0) > 1e-12, features.std(axis=0), 1.0)
    xs = (features - mean) / std
    w = np.zeros(xs.shape[1])
    bias = 0.0
    n = xs.shape[0]
    for _ in range(steps):
        z = xs @ w + bias
        prob = 1.0 / (1.0 + np.exp(-z))
        err = prob - labels
        w -= lr * (xs.T @ err) / n
        bias -= lr * float(err.mean())
    return {"w": w, "bias": bias, "mean": mean, "std": std}


def _logistic_predict(model, feature: np.ndarray) -> str:
    x = (feature - model["mean"]) / model["std"]
    z = float(x @ model["w"] + model["bias"])
    return "intense" if z > 0 else "mild"


def run_cv(manifest: DatasetManifest, data_root, config: PipelineConfig,
           k: int, seed: int) -> dict:
    """Cross-validated evaluation of the fuzzy pipeline and logistic baseline.

    Per fold: train the pipeline on the training entries, then stream the
    held-out entries through it (the fuzzifier keeps adapting, matching the
    online procedure). The logistic baseline reuses the fold's trained
    network and replaces only the fuzzy stages. Returns raw predictions.
    """
    folds = split_kfold(manifest, k, seed)
    records = []
    for fold_idx, (train_entries, test_entries) in enumerate(folds):
        train_manifest_order = [e for e in manifest.entries if e in train_entries]
        train_samples = load_samples(
            DatasetManifest(entries=train_manifest_order, seed=manifest.seed),
            data_root)
        test_samples = load_samples(
            DatasetManifest(entries=test_entries, seed=manifest.seed), data_root)
        session, _ = train_session(train_samples, config,
                                   manifest_ref="", seed=config.net.seed)

        feats, labs = [], []
        for sample in train_samples:
            if sample.intensity not in ("mild", "intense"):
                continue
            out = netmod.forward(session.net_params, sample.sequence)
            feats.append(_kinetic_features(out, sample.sequence))
            labs.append(1.0 if sample.intensity == "intense" else 0.0)
        logistic = _logistic_fit(np.array(feats), np.array(labs))

        for sample in test_samples:
            out = netmod.forward(session.net_params, sample.sequence)
            action_pred = ACTIONS[int(np.argmax(out.class_scores))]
            mem = fuzzify(out, sample.sequence, session.fuzzifier_state,
                          update=True)
            fuzzy_pred = final_inference(mem, session.inference_params).decision
            baseline_pred = _logistic_predict(
                logistic, _kinetic_features(out, sample.sequence))
            records.append({
                "fold": fold_idx,
                "action": sample.action,
                "intensity": sample.intensity,
                "action_pred": action_pred,
                "fuzzy_pred": fuzzy_pred,
                "baseline_pred": baseline_pred,
            })
    return {"records": records, "folds": k, "seed": seed}


def _intensity_section(records, pred_key) -> dict:
    labeled = [r for r in records if r["intensity"] in ("mild", "intense")]
    overall = binary_report([r["intensity"] for r in labeled],
                            [r[pred_key] for r in labeled])
    per_action = {}
    for action in ACTIONS:
        rows = [r for r in labeled if r["action"] == action]
        if rows:
            per_action[action] = binary_report(
                [r["intensity"] for r in rows], [r[pred_key] for r in rows])
    return {"overall": overall, "per_action": per_action}


def build_report(cv: dict, method: str = "fuzzy") -> dict:
    """Assemble the JSON evaluation report from raw cross-validation records."""
    records = cv["records"]
    pred_key = "baseline_pred" if method == "baseline-logistic" else "fuzzy_pred"
    confusion = multiclass_confusion([r["action"] for r in records],
                                     [r["action_pred"] for r in records],
                                     ACTIONS)
    action_section = {
        "labels": list(ACTIONS),
        "confusion": confusion,
        "overall_accuracy": multiclass_accuracy(confusion),
        "per_action_accuracy": {},
    }
    for i, action in enumerate(ACTIONS):
        row_total = sum(confusion[i])
        if row_total:
            action_section["per_action_accuracy"][action] = \
                confusion[i][i] / row_total
    report = {
        "schema_version": SCHEMA_VERSION,
        "method": method,
        "seed": cv["seed"],
        "folds": cv["folds"],
        "action_recognition": action_section,
        "intensity": _intensity_section(records, pred_key),
    }
    if method == "baseline-logistic":
        fuzzy_acc = _intensity_section(records, "fuzzy_pred")["overall"]["accuracy"]
        report["fuzzy_minus_baseline_accuracy"] = \
            fuzzy_acc - report["intensity"]["overall"]["accuracy"]
    return report


def evaluate(manifest: DatasetManifest, data_root, config: PipelineConfig,
             k: int, seed: int, cv: dict | None = None) -> dict:
    cv = cv or run_cv(manifest, data_root, config, k, seed)
    return build_report(cv, method="fuzzy")


def baseline_evaluate(manifest: DatasetManifest, data_root,
                      config: PipelineConfig, k: int, seed: int,
                      cv: dict | None = None) -> dict:
    cv = cv or run_cv(manifest, data_root, config, k, seed)
    return build_report(cv, method="baseline-logistic")


# ---------------------------------------------------------------------------
# analysis exports

def _fmt(x: float) -> str:
    return f"{x:.17g}"


def export_attention(session: PipelineSession, seq: SkeletonSequence,
                     out_dir, force: bool = False) -> dict:
    """Write temporal.csv (t, a_t, d_t) and joint.csv (j, t, a_joint)."""
    out = Path(out_dir)
    temporal_path = out / "temporal.csv"
    joint_path = out / "joint.csv"
    if not force and (temporal_path.exists() or joint_path.exists()):
        raise IoFailure(f"refusing to overwrite existing exports in {out}")
    result = netmod.forward(session.net_params, seq)
    d = displacement_magnitudes(seq)
    try:
        out.mkdir(parents=True, exist_ok=True)
        lines = ["t,a_t,d_t"]
        for t, (a, dv) in enumerate(zip(result.temporal, d)):
            lines.append(f"{t},{_fmt(a)},{_fmt(dv)}")
        temporal_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        lines = ["j,t,a_joint"]
        for j in range(result.joint.shape[0]):
            for t in range(result.joint.shape[1]):
                lines.append(f"{j},{t},{_fmt(result.joint[j, t])}")
        joint_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write exports to {out}: {exc}") from exc
    return {"temporal": str(temporal_path), "joint": str(joint_path)}


@dataclass
class BellFit:
    center: float
    width: float
    slope: float
    residual: float

    def __call__(self, x):
        u = np.abs((np.asarray(x, dtype=np.float64) - self.center) / self.width)
        return 1.0 / (1.0 + u ** (2.0 * self.slope))


def fit_bell_membership(weights, scores, steps: int = 2000) -> BellFit:
    """Least-squares fit of the generalized bell 1/(1+|(x-c)/a|^(2b)).

    Gradient descent with backtracking from a moment-based init; width and
    slope are optimized in log space so they stay positive, and the fitted
    curve peaks at 1 at the center by construction.
    """
    x = np.asarray(weights, dtype=np.float64)
    s = np.asarray(scores, dtype=np.float64)
    if x.size < 3:
        raise DegenerateData("need at least 3 points")
    if np.ptp(x) <= 0.0:
        raise DegenerateData("all sample values are equal")

    wsum = s.sum()
    c = float((s @ x) / wsum) if wsum > 0 else float(x.mean())
    spread = float(np.sqrt(np.average((x - c) ** 2,
                                      weights=s if wsum > 0 else None)))
    log_a = np.log(max(spread, 1e-3))
    log_b = 0.0

    def residual_and_grads(c, log_a, log_b):
        a, b = np.exp(log_a), np.exp(log_b)
        u = (x - c) / a
        au = np.abs(u)
        nz = au > 1e-300
        g = np.zeros_like(au)
        g[nz] = au[nz] ** (2.0 * b)
        f = 1.0 / (1.0 + g)
        err = f - s
        res = float(err @ err)
        dfdg = -(f * f)
        common = 2.0 * err * dfdg
        dg_dc = np.zeros_like(g)
        dg_dc[nz] = -(2.0 * b / a) * au[nz] ** (2.0 * b - 1.0) * np.sign(u[nz])
        dg_dla = -2.0 * b * g
        dg_dlb = np.zeros_like(g)
        dg_dlb[nz] = 2.0 * b * g[nz] * np.log(au[nz])
        return res, float(common @ dg_dc), float(common @ dg_dla), \
            float(common @ dg_dlb)

    lr = 0.1
    res, gc, gla, glb = residual_and_grads(c, log_a, log_b)
    for _ in range(steps):
        while lr > 1e-12:
            c2 = c - lr * gc
            la2 = log_a - lr * gla
            lb2 = log_b - lr * glb
            res2, gc2, gla2, glb2 = residual_and_grads(c2, la2, lb2)
            if res2 <= res:
                break
            lr *= 0.5
        else:
            break
        c, log_a, log_b = c2, la2, lb2
        res, gc, gla, glb = res2, gc2, gla2, glb2
        lr *= 1.2
    return BellFit(center=c, width=float(np.exp(log_a)),
                   slope=float(np.exp(log_b)), residual=res)
