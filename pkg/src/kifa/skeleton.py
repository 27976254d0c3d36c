"""Skeleton sequence data model, CSV/JSON formats, normalization and k-fold splits.

A sequence holds T frames of S subjects x J joints x 3 coordinates. On disk a
sequence is a UTF-8 CSV with the header ``#kifa-skeleton v1,S=<s>,J=<j>`` and
one frame per row: frame index followed by x,y,z triples ordered subject-major
then joint-major. Floats are written with 17 significant digits so that
parse(serialize(seq)) round-trips bit-exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateScale,
    InsufficientSamples,
    IoFailure,
    MalformedRow,
    NonFiniteValue,
    TooShort,
)

ACTIONS = ("approaching", "punching", "kicking", "hugging", "pushing")
INTENSITIES = ("mild", "intense")
FORMAT_VERSION = 1

_HEADER_PREFIX = "#kifa-skeleton v1"


@dataclass
class Frame:
    """A single time step: S*J joint positions grouped subject-major."""

    index: int
    joints: np.ndarray  # (S*J, 3)


@dataclass
class SkeletonSequence:
    """T frames of S subjects with J joints each, normalized 3D coordinates."""

    coords: np.ndarray  # (T, S*J, 3) float64
    subject_count: int
    joint_count: int
    sequence_id: str = ""
    frame_indices: np.ndarray | None = None

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64)
        if self.frame_indices is None:
            self.frame_indices = np.arange(self.coords.shape[0])
        self.validate()

    @property
    def length(self) -> int:
        return self.coords.shape[0]

    @property
    def slot_count(self) -> int:
        """Total joint slots across subjects (the attention dimension)."""
        return self.subject_count * self.joint_count

    @property
    def frames(self) -> list[Frame]:
        return [Frame(int(i), c) for i, c in zip(self.frame_indices, self.coords)]

    def validate(self):
        t, k = self.coords.shape[0], self.subject_count * self.joint_count
        if t < 2:
            raise TooShort(f"sequence needs at least 2 frames, got {t}")
        if self.subject_count not in (1, 2):
            raise MalformedRow(f"subject_count must be 1 or 2, got {self.subject_count}")
        if self.coords.shape[1:] != (k, 3):
            raise MalformedRow(
                f"expected coords shaped (T, {k}, 3), got {self.coords.shape}"
            )
        if not np.all(np.isfinite(self.coords)):
            raise NonFiniteValue("sequence contains non-finite coordinates")
        if np.any(np.diff(self.frame_indices) <= 0):
            raise MalformedRow("frame indices must be strictly increasing")


@dataclass
class LabeledSample:
    sequence: SkeletonSequence
    action: str
    intensity: str = "unlabeled"

    def __post_init__(self):
        if self.action not in ACTIONS:
            raise ValueError(f"unknown action {self.action!r}")
        if self.intensity not in INTENSITIES + ("unlabeled",):
            raise ValueError(f"unknown intensity {self.intensity!r}")


@dataclass
class ManifestEntry:
    path: str
    action: str
    intensity: str


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry] = field(default_factory=list)
    seed: int = 0
    format_version: int = FORMAT_VERSION


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def serialize_sequence(seq: SkeletonSequence) -> str:
    lines = [f"{_HEADER_PREFIX},S={seq.subject_count},J={seq.joint_count}"]
    for idx, frame in zip(seq.frame_indices, seq.coords):
        lines.append(",".join([str(int(idx))] + [_fmt(v) for v in frame.ravel()]))
    return "\n".join(lines) + "\n"


def parse_sequence(raw_text: str, sequence_id: str = "") -> SkeletonSequence:
    """Parse the CSV sequence format; inverse of :func:`serialize_sequence`."""
    lines = [ln for ln in raw_text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith(_HEADER_PREFIX):
        raise MalformedRow("missing '#kifa-skeleton v1' header")
    header = lines[0].split(",")
    try:
        s = int(header[1].split("=")[1])
        j = int(header[2].split("=")[1])
    except (IndexError, ValueError) as exc:
        raise MalformedRow(f"bad header {lines[0]!r}") from exc
    k = s * j
    expected_cols = 1 + 3 * k
    indices, rows = [], []
    for ln in lines[1:]:
        cols = ln.split(",")
        if len(cols) != expected_cols:
            raise MalformedRow(
                f"row has {len(cols)} columns, expected {expected_cols}: {ln[:60]!r}"
            )
        try:
            indices.append(int(cols[0]))
            values = [float(c) for c in cols[1:]]
        except ValueError as exc:
            raise MalformedRow(f"unparseable number in row {ln[:60]!r}") from exc
        if not all(math.isfinite(v) for v in values):
            raise NonFiniteValue(f"non-finite coordinate in frame {cols[0]}")
        rows.append(np.array(values, dtype=np.float64).reshape(k, 3))
    if len(rows) < 2:
        raise TooShort(f"sequence needs at least 2 frames, got {len(rows)}")
    return SkeletonSequence(
        coords=np.stack(rows),
        subject_count=s,
        joint_count=j,
        sequence_id=sequence_id,
        frame_indices=np.array(indices),
    )


def load_sequence(path, sequence_id: str | None = None) -> SkeletonSequence:
    from pathlib import Path

    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read {p}: {exc}") from exc
    return parse_sequence(text, sequence_id if sequence_id is not None else p.stem)


def normalize_sequence(seq: SkeletonSequence, anchor_joint: int,
                       scale_pair: tuple[int, int]) -> SkeletonSequence:
    """Anchor each subject's anchor joint at the origin and rescale globally.

    The global scale is the frame-0 distance between the first subject's
    scale-pair joints, so a normalized sequence is a fixed point of this map.
    """
    j = seq.joint_count
    if anchor_joint >= j or max(scale_pair) >= j:
        raise IndexError("anchor/scale indices must be < joint_count")
    p0 = seq.coords[0, scale_pair[0]]
    p1 = seq.coords[0, scale_pair[1]]
    scale = float(np.linalg.norm(p0 - p1))
    if scale <= 0.0:
        raise DegenerateScale("scale-pair joints coincide in frame 0")
    coords = seq.coords.copy()
    for s in range(seq.subject_count):
        block = slice(s * j, (s + 1) * j)
        coords[:, block, :] -= coords[:, s * j + anchor_joint, :][:, None, :]
    coords /= scale
    return SkeletonSequence(
        coords=coords,
        subject_count=seq.subject_count,
        joint_count=seq.joint_count,
        sequence_id=seq.sequence_id,
        frame_indices=seq.frame_indices.copy(),
    )


def displacement_magnitudes(seq: SkeletonSequence) -> np.ndarray:
    """Per-frame motion magnitude, scaled by 1/sqrt(S*J); element 0 is 0."""
    diffs = np.diff(seq.coords, axis=0)  # (T-1, K, 3)
    mags = np.linalg.norm(diffs.reshape(diffs.shape[0], -1), axis=1)
    mags = mags / math.sqrt(seq.slot_count)
    return np.concatenate([[0.0], mags])


def split_kfold(manifest: DatasetManifest, k: int, seed: int):
    """Stratified k-fold split over (action, intensity) strata.

    Returns k (train, test) pairs of entry lists; test folds partition the
    manifest and each stratum is spread as evenly as possible across folds.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    strata: dict[tuple[str, str], list[ManifestEntry]] = {}
    for e in manifest.entries:
        strata.setdefault((e.action, e.intensity), []).append(e)
    rng = np.random.default_rng(seed)
    fold_tests: list[list[ManifestEntry]] = [[] for _ in range(k)]
    for key in sorted(strata):
        group = strata[key]
        if len(group) < k:
            raise InsufficientSamples(
                f"stratum {key} has {len(group)} samples, needs >= {k}"
            )
        order = rng.permutation(len(group))
        for pos, gi in enumerate(order):
            fold_tests[pos % k].append(group[gi])
    folds = []
    for i in range(k):
        test = fold_tests[i]
        test_ids = {id(e) for e in test}
        train = [e for e in manifest.entries if id(e) not in test_ids]
        folds.append((train, test))
    return folds


def save_manifest(manifest: DatasetManifest, path) -> None:
    doc = {
        "version": manifest.format_version,
        "seed": manifest.seed,
        "entries": [
            {"path": e.path, "action": e.action, "intensity": e.intensity}
            for e in manifest.entries
        ],
    }
    try:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(doc, f, indent=1)
            f.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write manifest {path}: {exc}") from exc


def load_manifest(path) -> DatasetManifest:
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise IoFailure(f"cannot read manifest {path}: {exc}") from exc
    return DatasetManifest(
        entries=[ManifestEntry(e["path"], e["action"], e["intensity"])
                 for e in doc["entries"]],
        seed=doc["seed"],
        format_version=doc["version"],
    )


def load_samples(manifest: DatasetManifest, root) -> list[LabeledSample]:
    """Resolve every manifest entry relative to root and load it."""
    from pathlib import Path

    rootp = Path(root)
    out = []
    for e in manifest.entries:
        seq = load_sequence(rootp / e.path)
        out.append(LabeledSample(sequence=seq, action=e.action, intensity=e.intensity))
    return out
