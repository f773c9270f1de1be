"""Shared domain types: datasets, class profiles, pair contexts, trained models.

All types are immutable after construction (frozen dataclasses over read-only
numpy arrays) and safe to share across threads. Model serialization is a
versioned JSON document ("cdf-model/1") whose reals carry 17 significant
digits so that save/load round-trips are exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .report import fmt_float
from .svm import KernelSpec, SvmModel

MODEL_FORMAT = "cdf-model/1"

SELECTION_MODES = ("ratio", "literal")
FEATURE_MODES = ("dual_kl", "scalar_kl", "elementwise_kl")


@dataclass(frozen=True)
class CdfConfig:
    """Knobs of the class-dependent feature pipeline.

    `b` and `b_prime` scale the pair-ratio means into the two selection
    thresholds. `pair_overrides` optionally maps a canonical class pair
    (x, y) to its own (b, b_prime).
    """

    b: float = 1.0
    b_prime: float = 1.0
    selection_mode: str = "ratio"
    feature_mode: str = "dual_kl"
    smoothing_eps: float = 1e-9
    kl_log_base: str = "natural"
    pair_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.b <= 0 or self.b_prime <= 0:
            raise ValueError("b and b_prime must be > 0")
        if self.smoothing_eps <= 0:
            raise ValueError("smoothing_eps must be > 0")
        if self.selection_mode not in SELECTION_MODES:
            raise ValueError(f"unknown selection_mode {self.selection_mode!r}")
        if self.feature_mode not in FEATURE_MODES:
            raise ValueError(f"unknown feature_mode {self.feature_mode!r}")
        if self.kl_log_base != "natural":
            raise ValueError("only the natural log base is supported")
        for (x, y), (b, bp) in self.pair_overrides.items():
            if not x < y:
                raise ValueError(f"override pair ({x},{y}) not in canonical order")
            if b <= 0 or bp <= 0:
                raise ValueError(f"override for pair ({x},{y}) must have b, b_prime > 0")

    def multipliers(self, class_x: int, class_y: int) -> tuple[float, float]:
        """The (b, b_prime) in effect for a pair, honoring overrides."""
        return self.pair_overrides.get((class_x, class_y), (self.b, self.b_prime))

    def __eq__(self, other) -> bool:
        if not isinstance(other, CdfConfig):
            return NotImplemented
        return (
            (self.b, self.b_prime) == (other.b, other.b_prime)
            and self.selection_mode == other.selection_mode
            and self.feature_mode == other.feature_mode
            and self.smoothing_eps == other.smoothing_eps
            and self.kl_log_base == other.kl_log_base
            and self.pair_overrides == other.pair_overrides
        )

    def __hash__(self):
        return hash((self.b, self.b_prime, self.selection_mode, self.feature_mode))


def _readonly(a, dtype=float) -> np.ndarray:
    out = np.asarray(a, dtype=dtype)
    out.setflags(write=False)
    return out


def _array_eq(a: np.ndarray, b: np.ndarray) -> bool:
    return a.shape == b.shape and np.array_equal(a, b)


@dataclass(frozen=True)
class Dataset:
    """A labeled sample collection with dense integer class ids.

    `samples[i]` is a 1-D vector of non-negative reals, `labels[i]` its class
    id in [0, num_classes). `class_index[c]` lists the sample indices of class
    c, and `label_names` keeps the original label strings as a side table.
    Construction does not reject invalid data; use `validate_dataset`.
    """

    samples: tuple
    labels: tuple
    num_classes: int
    dim: int
    class_index: tuple
    label_names: tuple

    @classmethod
    def from_arrays(cls, x, y, label_names=None) -> "Dataset":
        """Build a Dataset from a 2-D sample matrix and dense integer labels."""
        x = _readonly(x)
        if x.ndim != 2:
            raise ValueError(f"sample matrix must be 2-D, got ndim={x.ndim}")
        y = [int(v) for v in y]
        if len(y) != x.shape[0]:
            raise ValueError(f"{x.shape[0]} samples but {len(y)} labels")
        if label_names is not None:
            m = len(label_names)
        else:
            m = (max(y) + 1) if y else 0
            label_names = tuple(str(c) for c in range(m))
        index = tuple(
            tuple(i for i, lab in enumerate(y) if lab == c) for c in range(m)
        )
        samples = tuple(x[i] for i in range(x.shape[0]))
        return cls(
            samples=samples,
            labels=tuple(y),
            num_classes=m,
            dim=x.shape[1],
            class_index=index,
            label_names=tuple(label_names),
        )

    def __len__(self) -> int:
        return len(self.samples)

    def class_matrix(self, class_id: int) -> np.ndarray:
        """Stack all samples of one class into a 2-D array."""
        idx = self.class_index[class_id]
        return np.stack([self.samples[i] for i in idx]) if idx else np.empty((0, self.dim))

    def matrix(self) -> np.ndarray:
        """Stack all samples into a 2-D array in storage order."""
        if not self.samples:
            return np.empty((0, self.dim))
        return np.stack(self.samples)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.num_classes == other.num_classes
            and self.dim == other.dim
            and self.labels == other.labels
            and self.class_index == other.class_index
            and self.label_names == other.label_names
            and len(self.samples) == len(other.samples)
            and all(_array_eq(a, b) for a, b in zip(self.samples, other.samples))
        )


def validate_dataset(dataset: Dataset) -> list[str]:
    """Report every violated Dataset invariant; empty list means valid."""
    violations = []
    m = dataset.num_classes
    for i, vec in enumerate(dataset.samples):
        v = np.asarray(vec)
        if v.ndim != 1 or v.shape[0] != dataset.dim:
            violations.append(
                f"sample {i}: length {v.size} does not match dim {dataset.dim}"
            )
        if v.size and (not np.all(np.isfinite(v)) or np.any(v < 0)):
            violations.append(f"sample {i}: components must be finite and >= 0")
    for i, lab in enumerate(dataset.labels):
        if not 0 <= lab < m:
            violations.append(f"sample {i}: class id {lab} outside [0, {m})")
    seen = set(dataset.labels)
    for c in range(m):
        if c not in seen:
            violations.append(f"class {c} has no samples")
    return violations


@dataclass(frozen=True)
class ClassProfile:
    """Per-class sum and mean vectors over the class's samples."""

    class_id: int
    sum_vec: np.ndarray
    mean_vec: np.ndarray
    cardinality: int

    def __post_init__(self):
        object.__setattr__(self, "sum_vec", _readonly(self.sum_vec))
        object.__setattr__(self, "mean_vec", _readonly(self.mean_vec))
        if self.cardinality < 1:
            raise ValueError("cardinality must be >= 1")
        for name, v in (("sum_vec", self.sum_vec), ("mean_vec", self.mean_vec)):
            if not np.all(np.isfinite(v)) or np.any(v < 0):
                raise ValueError(f"{name} entries must be finite and >= 0")
        recon = self.mean_vec * self.cardinality
        scale = np.maximum(np.abs(self.sum_vec), 1.0)
        if np.any(np.abs(recon - self.sum_vec) > 1e-9 * scale):
            raise ValueError("mean_vec * cardinality does not reproduce sum_vec")

    def __eq__(self, other) -> bool:
        if not isinstance(other, ClassProfile):
            return NotImplemented
        return (
            self.class_id == other.class_id
            and self.cardinality == other.cardinality
            and _array_eq(self.sum_vec, other.sum_vec)
            and _array_eq(self.mean_vec, other.mean_vec)
        )


@dataclass(frozen=True)
class PairContext:
    """Ratio vector, thresholds and selected-index mask for one class pair.

    `ref_x` / `ref_y` are the two class mean profiles restricted to the mask
    and normalized to probability vectors; prediction reuses them so train
    and predict see identical references. `b` / `b_prime` are the threshold
    multipliers actually used for this pair (global config or per-pair
    override).
    """

    class_x: int
    class_y: int
    ratios: np.ndarray
    mu_xy: float
    mu_yx: float
    tau: float
    tau_prime: float
    mask: np.ndarray
    selection_mode: str
    smoothing_eps: float
    b: float
    b_prime: float
    fallback: bool
    ref_x: np.ndarray
    ref_y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "ratios", _readonly(self.ratios))
        object.__setattr__(self, "mask", _readonly(self.mask, dtype=np.int64))
        object.__setattr__(self, "ref_x", _readonly(self.ref_x))
        object.__setattr__(self, "ref_y", _readonly(self.ref_y))
        if not self.class_x < self.class_y:
            raise ValueError("pair must be in canonical order class_x < class_y")
        if self.tau != self.b * self.mu_xy or self.tau_prime != self.b_prime * self.mu_yx:
            raise ValueError("thresholds do not recompute from b * mu")
        if self.mask.size == 0:
            raise ValueError("mask must be non-empty")
        if np.any(np.diff(self.mask) <= 0):
            raise ValueError("mask must be strictly increasing")
        if not np.all(np.isfinite(self.ratios)) or np.any(self.ratios <= 0):
            raise ValueError("ratio entries must be finite and > 0")
        if self.smoothing_eps <= 0:
            raise ValueError("smoothing_eps must be > 0")

    def __eq__(self, other) -> bool:
        if not isinstance(other, PairContext):
            return NotImplemented
        return (
            (self.class_x, self.class_y) == (other.class_x, other.class_y)
            and (self.mu_xy, self.mu_yx) == (other.mu_xy, other.mu_yx)
            and (self.tau, self.tau_prime) == (other.tau, other.tau_prime)
            and (self.b, self.b_prime) == (other.b, other.b_prime)
            and self.selection_mode == other.selection_mode
            and self.smoothing_eps == other.smoothing_eps
            and self.fallback == other.fallback
            and _array_eq(self.ratios, other.ratios)
            and _array_eq(self.mask, other.mask)
            and _array_eq(self.ref_x, other.ref_x)
            and _array_eq(self.ref_y, other.ref_y)
        )


@dataclass(frozen=True)
class PairFeatureSet:
    """Extracted feature vectors and +/-1 labels for one class pair."""

    features: np.ndarray
    labels: np.ndarray
    feature_mode: str

    def __post_init__(self):
        object.__setattr__(self, "features", _readonly(self.features))
        object.__setattr__(self, "labels", _readonly(self.labels, dtype=np.int64))
        if self.feature_mode not in FEATURE_MODES:
            raise ValueError(f"unknown feature_mode {self.feature_mode!r}")
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features and labels must have equal length")
        if not np.all(np.isin(self.labels, (-1, 1))):
            raise ValueError("labels must be exactly +1 or -1")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("feature components must be finite")
        # Whole-divergence features are non-negative; elementwise terms are signed.
        if self.feature_mode in ("dual_kl", "scalar_kl") and np.any(self.features < 0):
            raise ValueError("KL feature components must be >= 0")

    def __eq__(self, other) -> bool:
        if not isinstance(other, PairFeatureSet):
            return NotImplemented
        return (
            self.feature_mode == other.feature_mode
            and _array_eq(self.features, other.features)
            and _array_eq(self.labels, other.labels)
        )


@dataclass(frozen=True)
class CdfModel:
    """The serializable artifact of training: per-pair contexts plus SVMs."""

    config: CdfConfig
    kernel: KernelSpec
    c: float
    tol: float
    max_passes: int
    seed: int
    num_classes: int
    dim: int
    label_names: tuple
    profiles: tuple
    pairs: tuple  # ((PairContext, SvmModel), ...) in (x, y) lexicographic order

    def __post_init__(self):
        m = self.num_classes
        expected = m * (m - 1) // 2
        if len(self.pairs) != expected:
            raise ValueError(f"expected {expected} pairs for {m} classes, got {len(self.pairs)}")
        for ctx, _ in self.pairs:
            if np.any(ctx.mask >= self.dim):
                raise ValueError(
                    f"pair ({ctx.class_x},{ctx.class_y}) mask exceeds dim {self.dim}"
                )

    def pair(self, class_x: int, class_y: int):
        """Look up the (context, svm) entry for an unordered class pair."""
        for ctx, svm in self.pairs:
            if (ctx.class_x, ctx.class_y) == (class_x, class_y):
                return ctx, svm
        raise KeyError(f"no pair ({class_x}, {class_y})")

    def __eq__(self, other) -> bool:
        if not isinstance(other, CdfModel):
            return NotImplemented
        return (
            self.config == other.config
            and self.kernel == other.kernel
            and (self.c, self.tol, self.max_passes, self.seed)
            == (other.c, other.tol, other.max_passes, other.seed)
            and (self.num_classes, self.dim) == (other.num_classes, other.dim)
            and self.label_names == other.label_names
            and self.profiles == other.profiles
            and len(self.pairs) == len(other.pairs)
            and all(
                ca == cb and sa == sb
                for (ca, sa), (cb, sb) in zip(self.pairs, other.pairs)
            )
        )


# --- serialization ---------------------------------------------------------

def _emit(value, out: list) -> None:
    # Deterministic JSON emitter; floats carry 17 significant digits.
    if isinstance(value, bool):
        out.append("true" if value else "false")
    elif isinstance(value, (int, np.integer)):
        out.append(str(int(value)))
    elif isinstance(value, (float, np.floating)):
        out.append(fmt_float(value))
    elif isinstance(value, str):
        out.append(json.dumps(value))
    elif value is None:
        out.append("null")
    elif isinstance(value, dict):
        out.append("{")
        for k, (key, item) in enumerate(value.items()):
            if k:
                out.append(",")
            out.append(json.dumps(key))
            out.append(":")
            _emit(item, out)
        out.append("}")
    elif isinstance(value, (list, tuple, np.ndarray)):
        out.append("[")
        for k, item in enumerate(value):
            if k:
                out.append(",")
            _emit(item, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(value).__name__}")


def _dumps(value) -> str:
    out: list = []
    _emit(value, out)
    return "".join(out)


def _kernel_doc(k: KernelSpec) -> dict:
    return {"kind": k.kind, "degree": k.degree, "gamma": k.gamma, "coef0": k.coef0}


def _kernel_from(doc: dict) -> KernelSpec:
    return KernelSpec(
        kind=doc["kind"], degree=doc["degree"], gamma=doc["gamma"], coef0=doc["coef0"]
    )


def model_to_json(model: CdfModel) -> str:
    """Serialize a trained model to the cdf-model/1 JSON document."""
    cfg = model.config
    doc = {
        "format": MODEL_FORMAT,
        "config": {
            "b": cfg.b,
            "b_prime": cfg.b_prime,
            "selection_mode": cfg.selection_mode,
            "feature_mode": cfg.feature_mode,
            "smoothing_eps": cfg.smoothing_eps,
            "kl_log_base": cfg.kl_log_base,
            "pair_overrides": [
                [x, y, b, bp] for (x, y), (b, bp) in sorted(cfg.pair_overrides.items())
            ],
        },
        "kernel": _kernel_doc(model.kernel),
        "c": model.c,
        "tol": model.tol,
        "max_passes": model.max_passes,
        "seed": model.seed,
        "num_classes": model.num_classes,
        "dim": model.dim,
        "label_names": list(model.label_names),
        "profiles": [
            {
                "class_id": p.class_id,
                "cardinality": p.cardinality,
                "sum_vec": p.sum_vec,
                "mean_vec": p.mean_vec,
            }
            for p in model.profiles
        ],
        "pairs": [
            {
                "class_x": ctx.class_x,
                "class_y": ctx.class_y,
                "ratios": ctx.ratios,
                "mu_xy": ctx.mu_xy,
                "mu_yx": ctx.mu_yx,
                "tau": ctx.tau,
                "tau_prime": ctx.tau_prime,
                "mask": ctx.mask,
                "selection_mode": ctx.selection_mode,
                "smoothing_eps": ctx.smoothing_eps,
                "b": ctx.b,
                "b_prime": ctx.b_prime,
                "fallback": ctx.fallback,
                "ref_x": ctx.ref_x,
                "ref_y": ctx.ref_y,
                "svm": {
                    "support_vectors": svm.support_vectors,
                    "coef": svm.coef,
                    "bias": svm.bias,
                    "kernel": _kernel_doc(svm.kernel),
                    "c": svm.c,
                    "iterations": svm.iterations,
                    "kkt_violation_max": svm.kkt_violation_max,
                },
            }
            for ctx, svm in model.pairs
        ],
    }
    return _dumps(doc)


def model_from_json(text: str) -> CdfModel:
    """Parse a cdf-model/1 JSON document back into a CdfModel."""
    doc = json.loads(text)
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"unsupported model format {doc.get('format')!r}")
    cdoc = doc["config"]
    cfg = CdfConfig(
        b=cdoc["b"],
        b_prime=cdoc["b_prime"],
        selection_mode=cdoc["selection_mode"],
        feature_mode=cdoc["feature_mode"],
        smoothing_eps=cdoc["smoothing_eps"],
        kl_log_base=cdoc["kl_log_base"],
        pair_overrides={
            (int(x), int(y)): (float(b), float(bp))
            for x, y, b, bp in cdoc.get("pair_overrides", [])
        },
    )
    profiles = tuple(
        ClassProfile(
            class_id=p["class_id"],
            sum_vec=np.asarray(p["sum_vec"], dtype=float),
            mean_vec=np.asarray(p["mean_vec"], dtype=float),
            cardinality=p["cardinality"],
        )
        for p in doc["profiles"]
    )
    pairs = []
    for e in doc["pairs"]:
        ctx = PairContext(
            class_x=e["class_x"],
            class_y=e["class_y"],
            ratios=np.asarray(e["ratios"], dtype=float),
            mu_xy=e["mu_xy"],
            mu_yx=e["mu_yx"],
            tau=e["tau"],
            tau_prime=e["tau_prime"],
            mask=np.asarray(e["mask"], dtype=np.int64),
            selection_mode=e["selection_mode"],
            smoothing_eps=e["smoothing_eps"],
            b=e["b"],
            b_prime=e["b_prime"],
            fallback=e["fallback"],
            ref_x=np.asarray(e["ref_x"], dtype=float),
            ref_y=np.asarray(e["ref_y"], dtype=float),
        )
        s = e["svm"]
        svm = SvmModel(
            support_vectors=np.asarray(s["support_vectors"], dtype=float),
            coef=np.asarray(s["coef"], dtype=float),
            bias=s["bias"],
            kernel=_kernel_from(s["kernel"]),
            c=s["c"],
            iterations=s["iterations"],
            kkt_violation_max=s["kkt_violation_max"],
        )
        pairs.append((ctx, svm))
    return CdfModel(
        config=cfg,
        kernel=_kernel_from(doc["kernel"]),
        c=doc["c"],
        tol=doc["tol"],
        max_passes=doc["max_passes"],
        seed=doc["seed"],
        num_classes=doc["num_classes"],
        dim=doc["dim"],
        label_names=tuple(doc["label_names"]),
        profiles=profiles,
        pairs=tuple(pairs),
    )
