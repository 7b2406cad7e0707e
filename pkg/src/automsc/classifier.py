"""Multinomial logistic regression over tf-idf rows, plus the ref1 baseline.

The trainer minimizes the summed softmax cross-entropy plus an L2 penalty
``||W||^2 / (2 C)`` on the weights (intercepts unpenalized) with the
limited-memory quasi-Newton loop in :mod:`automsc.optimize`, starting from
zero weights so training is fully deterministic.
"""

from __future__ import annotations

import hashlib
import json
import logging
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import IO, Sequence, Union

import numpy as np
import scipy.sparse as sp

from . import optimize
from .corpus import ArticleRecord, PredictionRecord
from .errors import (
    CorruptFile,
    DimensionMismatch,
    NoReferences,
    SingleClass,
    VersionMismatch,
)
from .features import (
    FeatureVector,
    MethodVariant,
    Vocabulary,
    encode,
    encode_matrix,
    fit_vocabulary,
    method_id,
    prepare_source,
    stack_feature_vectors,
)

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
_MAGIC = "AUTOMSC-MODEL"
REF1_METHOD = "ref1 "


@dataclass(frozen=True)
class Hyperparams:
    tolerance: float = 1e-4
    regularization_c: float = 1.0
    max_iterations: int = 100
    fit_intercept: bool = True
    lbfgs_memory: int = 10

    def __post_init__(self) -> None:
        if self.tolerance <= 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if self.regularization_c <= 0:
            raise ValueError(f"regularization_c must be positive, got {self.regularization_c}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.lbfgs_memory < 1:
            raise ValueError(f"lbfgs_memory must be >= 1, got {self.lbfgs_memory}")


@dataclass(eq=False)
class TrainedModel:
    """Weights, class list, and the featurization state needed to apply them."""

    classes: np.ndarray  # distinct subjects of the training set, ascending
    weights: np.ndarray  # (n_classes, |V|)
    intercepts: np.ndarray  # (n_classes,)
    vocabulary: Vocabulary
    variant: MethodVariant
    method_id: str
    metadata: dict = field(default_factory=dict)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    @property
    def strip_formulas(self) -> bool:
        return bool(self.metadata.get("strip_formulas", False))


def softmax_loss_grad(
    params: np.ndarray,
    X,
    y_idx: np.ndarray,
    n_classes: int,
    regularization_c: float,
    fit_intercept: bool,
) -> tuple[float, np.ndarray]:
    """Summed cross-entropy + ||W||^2/(2C) and its gradient, flattened.

    ``params`` is ``W.ravel()`` followed by the intercept vector when
    ``fit_intercept``. ``X`` may be a CSR matrix or a dense array.
    """
    n, dim = X.shape
    W = params[: n_classes * dim].reshape(n_classes, dim)
    logits = X @ W.T
    if fit_intercept:
        logits = logits + params[n_classes * dim :]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(n)
    loss = float(-(shifted[rows, y_idx] - log_norm).sum())
    loss += float((W * W).sum()) / (2.0 * regularization_c)

    P = np.exp(shifted - log_norm[:, None])
    P[rows, y_idx] -= 1.0
    grad_W = (X.T @ P).T + W / regularization_c
    if fit_intercept:
        grad = np.concatenate([np.asarray(grad_W).ravel(), P.sum(axis=0)])
    else:
        grad = np.asarray(grad_W).ravel()
    return loss, grad


def fit_softmax(
    X: sp.csr_matrix,
    subjects: np.ndarray,
    hyperparams: Hyperparams,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, optimize.MinimizeResult]:
    """Fit weights over a feature matrix; returns (classes, W, b, result)."""
    classes = np.unique(subjects)
    if len(classes) < 2:
        raise SingleClass(f"training needs >= 2 distinct subjects, got {len(classes)}")
    y_idx = np.searchsorted(classes, subjects)
    k, dim = len(classes), X.shape[1]

    x0 = np.zeros(k * dim + (k if hyperparams.fit_intercept else 0), dtype=np.float64)
    result = optimize.minimize_lbfgs(
        lambda p: softmax_loss_grad(p, X, y_idx, k, hyperparams.regularization_c, hyperparams.fit_intercept),
        x0,
        tolerance=hyperparams.tolerance,
        max_iterations=hyperparams.max_iterations,
        memory=hyperparams.lbfgs_memory,
    )
    W = result.x[: k * dim].reshape(k, dim)
    b = result.x[k * dim :] if hyperparams.fit_intercept else np.zeros(k, dtype=np.float64)
    return classes, W, b, result


def train(
    examples: Sequence[tuple[FeatureVector, int]],
    hyperparams: Hyperparams = Hyperparams(),
    *,
    vocabulary: Vocabulary,
    variant: MethodVariant,
    strip_formulas: bool = False,
) -> TrainedModel:
    """Train on encoded examples.

    Examples are put into a canonical order first, so any permutation of the
    same multiset yields a bit-identical model.
    """
    if not examples:
        raise SingleClass("training set is empty")
    dim = len(vocabulary)
    for vec, _ in examples:
        if vec.dim != dim:
            raise DimensionMismatch(f"feature dim {vec.dim} != vocabulary size {dim}")
    ordered = sorted(
        examples,
        key=lambda ex: (ex[1], ex[0].indices.tobytes(), ex[0].values.tobytes()),
    )
    X = stack_feature_vectors([vec for vec, _ in ordered], dim=dim)
    subjects = np.array([s for _, s in ordered], dtype=np.int64)
    classes, W, b, result = fit_softmax(X, subjects, hyperparams)
    if not result.converged:
        logger.info("training stopped without convergence: %s", result.status)
    return TrainedModel(
        classes=classes,
        weights=W,
        intercepts=b,
        vocabulary=vocabulary,
        variant=variant,
        method_id=method_id(variant),
        metadata={
            "format_version": FORMAT_VERSION,
            "model_version": "unsaved",
            "n_train": len(examples),
            "hyperparams": asdict(hyperparams),
            "strip_formulas": strip_formulas,
            "converged": result.converged,
            "n_iterations": result.n_iterations,
            "final_grad_max_norm": result.grad_max_norm,
        },
    )


def train_variant(
    articles: Sequence[ArticleRecord],
    v: MethodVariant,
    hyperparams: Hyperparams = Hyperparams(),
    *,
    strip_formulas: bool = False,
) -> TrainedModel:
    """Full pipeline: compose sources, fit the vocabulary, train the model."""
    sources = [prepare_source(a, v, strip_formulas) for a in articles]
    voc = fit_vocabulary(sources)
    X = encode_matrix(sources, voc)
    subjects = np.array([a.primary_subject for a in articles], dtype=np.int64)
    order = np.argsort([a.de for a in articles], kind="stable")
    classes, W, b, result = fit_softmax(X[order], subjects[order], hyperparams)
    if not result.converged:
        logger.info("training stopped without convergence: %s", result.status)
    return TrainedModel(
        classes=classes,
        weights=W,
        intercepts=b,
        vocabulary=voc,
        variant=v,
        method_id=method_id(v),
        metadata={
            "format_version": FORMAT_VERSION,
            "model_version": "unsaved",
            "n_train": len(articles),
            "hyperparams": asdict(hyperparams),
            "strip_formulas": strip_formulas,
            "converged": result.converged,
            "n_iterations": result.n_iterations,
            "final_grad_max_norm": result.grad_max_norm,
        },
    )


def class_probabilities(model: TrainedModel, x: FeatureVector) -> np.ndarray:
    """Softmax of ``W x + b``, aligned with ``model.classes``."""
    if x.dim != model.dim:
        raise DimensionMismatch(f"vector dim {x.dim} != model dim {model.dim}")
    logits = model.weights[:, x.indices] @ x.values + model.intercepts
    shifted = logits - logits.max()
    expd = np.exp(shifted)
    return expd / expd.sum()


def predict_proba(model: TrainedModel, x: FeatureVector) -> dict[int, float]:
    """Class distribution over subjects; values sum to 1."""
    p = class_probabilities(model, x)
    return {int(c): float(v) for c, v in zip(model.classes, p)}


def predict(model: TrainedModel, article: ArticleRecord) -> PredictionRecord:
    """Argmax prediction; ties break toward the smallest subject number."""
    source = prepare_source(article, model.variant, model.strip_formulas)
    x = encode(source, model.vocabulary)
    p = class_probabilities(model, x)
    best = int(np.argmax(p))  # first max -> smallest subject (classes ascend)
    return PredictionRecord(
        de=article.de,
        method=model.method_id,
        pos=1,
        coarse=int(model.classes[best]),
        score=float(p[best]),
    )


def ref1_vote(article: ArticleRecord) -> PredictionRecord:
    """Most frequent primary subject over all reference codes.

    Duplicate codes count individually; ties break toward the smallest
    subject. Score is the winning count over the total code count.
    """
    counts: Counter[int] = Counter(
        code.subject for ref in article.ref_mscs for code in ref
    )
    if not counts:
        raise NoReferences(f"article {article.de:08d} has no reference MSC codes")
    subject, wins = min(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    total = sum(counts.values())
    return PredictionRecord(
        de=article.de,
        method=REF1_METHOD,
        pos=1,
        coarse=subject,
        score=wins / total,
    )


# --- persistence ------------------------------------------------------------

Sink = Union[str, Path, IO[bytes]]


def save_model(model: TrainedModel, sink: Sink) -> None:
    """Versioned container: text magic + JSON header + raw little-endian block.

    The header records classes, vocabulary, variant, hyperparams, and a
    sha256 checksum over the binary weight payload.
    """
    payload = model.weights.astype("<f8").tobytes(order="C") + model.intercepts.astype("<f8").tobytes()
    header = {
        "classes": [int(c) for c in model.classes],
        "n_classes": model.n_classes,
        "n_features": model.dim,
        "variant": asdict(model.variant),
        "method_id": model.method_id,
        "vocabulary": {
            "terms": list(model.vocabulary.terms),
            "df": [int(d) for d in model.vocabulary.df],
            "n_docs": model.vocabulary.n_docs,
        },
        "metadata": _json_safe(model.metadata),
        "payload_bytes": len(payload),
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }
    header_bytes = json.dumps(header, ensure_ascii=False, sort_keys=True).encode("utf-8")
    blob = (
        f"{_MAGIC} {FORMAT_VERSION}\n".encode("ascii")
        + f"{len(header_bytes)}\n".encode("ascii")
        + header_bytes
        + payload
    )
    if isinstance(sink, (str, Path)):
        Path(sink).write_bytes(blob)
    else:
        sink.write(blob)


def load_model(source: Sink) -> TrainedModel:
    if isinstance(source, (str, Path)):
        blob = Path(source).read_bytes()
    else:
        blob = source.read()
    magic_end = blob.find(b"\n")
    if magic_end == -1 or not blob[:magic_end].startswith(_MAGIC.encode("ascii") + b" "):
        raise CorruptFile("not a model file (bad magic)")
    try:
        version = int(blob[len(_MAGIC) + 1 : magic_end])
    except ValueError:
        raise CorruptFile("unreadable format version") from None
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"model format version {version} unsupported (expected {FORMAT_VERSION})")
    len_end = blob.find(b"\n", magic_end + 1)
    if len_end == -1:
        raise CorruptFile("truncated header length")
    try:
        header_len = int(blob[magic_end + 1 : len_end])
    except ValueError:
        raise CorruptFile("unreadable header length") from None
    header_start = len_end + 1
    header_bytes = blob[header_start : header_start + header_len]
    if len(header_bytes) != header_len:
        raise CorruptFile("truncated header")
    try:
        header = json.loads(header_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptFile(f"unreadable header: {exc}") from exc

    payload = blob[header_start + header_len :]
    if len(payload) != header["payload_bytes"]:
        raise CorruptFile(
            f"payload is {len(payload)} bytes, header declares {header['payload_bytes']}"
        )
    if hashlib.sha256(payload).hexdigest() != header["payload_sha256"]:
        raise CorruptFile("payload checksum mismatch")

    k, dim = header["n_classes"], header["n_features"]
    weights_bytes = k * dim * 8
    weights = np.frombuffer(payload[:weights_bytes], dtype="<f8").reshape(k, dim).copy()
    intercepts = np.frombuffer(payload[weights_bytes:], dtype="<f8").copy()
    if len(intercepts) != k:
        raise CorruptFile(f"expected {k} intercepts, found {len(intercepts)}")
    voc = Vocabulary.from_counts(
        dict(zip(header["vocabulary"]["terms"], header["vocabulary"]["df"])),
        n_docs=header["vocabulary"]["n_docs"],
    )
    if len(voc) != dim:
        raise CorruptFile(f"vocabulary size {len(voc)} != feature dimension {dim}")
    metadata = dict(header["metadata"])
    metadata["model_version"] = header["payload_sha256"][:12]
    return TrainedModel(
        classes=np.array(header["classes"], dtype=np.int64),
        weights=weights,
        intercepts=intercepts,
        vocabulary=voc,
        variant=MethodVariant(**header["variant"]),
        method_id=header["method_id"],
        metadata=metadata,
    )


def _json_safe(value):
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value
