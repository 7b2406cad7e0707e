"""Sparse TF-IDF featurization.

Articles are reduced to plain strings per method variant (which of
title/text/reference-codes feed the model), tokenized into lowercase
alphanumeric unigrams, and encoded as L2-normalized tf-idf rows with
``idf(t) = ln((1 + n_docs) / (1 + df(t))) + 1``.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .corpus import ArticleRecord
from .errors import AutomscError


class EmptyCorpus(AutomscError):
    """Vocabulary fitting needs at least one document."""


@dataclass(frozen=True)
class MethodVariant:
    """Which article fields feed the classifier for one run id."""

    id: str
    uses_title: bool
    uses_text: bool
    uses_mscs: bool


VARIANTS: dict[str, MethodVariant] = {
    v.id: v
    for v in (
        MethodVariant("titer", uses_title=True, uses_text=True, uses_mscs=True),
        MethodVariant("refs", uses_title=False, uses_text=False, uses_mscs=True),
        MethodVariant("titls", uses_title=True, uses_text=False, uses_mscs=False),
        MethodVariant("texts", uses_title=False, uses_text=True, uses_mscs=False),
        MethodVariant("tite", uses_title=True, uses_text=True, uses_mscs=False),
        MethodVariant("tiref", uses_title=True, uses_text=False, uses_mscs=True),
        MethodVariant("teref", uses_title=False, uses_text=True, uses_mscs=True),
    )
}


def variant(name: str) -> MethodVariant:
    try:
        return VARIANTS[name]
    except KeyError:
        raise ValueError(f"unknown variant {name!r}; choose from {sorted(VARIANTS)}") from None


def method_id(v: MethodVariant) -> str:
    """Five-character run id: the variant name, space-padded."""
    return f"{v.id:<5}"


def compose_fields(title: str, text: str, mscs_field: str, v: MethodVariant) -> str:
    """Concatenate the enabled fields (title, text, mscs order, space-joined)."""
    parts = []
    if v.uses_title and title:
        parts.append(title)
    if v.uses_text and text:
        parts.append(text)
    if v.uses_mscs and mscs_field:
        parts.append(mscs_field)
    return " ".join(parts)


def compose_source(article: ArticleRecord, v: MethodVariant) -> str:
    return compose_fields(article.title, article.text, article.mscs_field, v)


def prepare_source(article: ArticleRecord, v: MethodVariant, strip_formulas: bool = False) -> str:
    """Compose the classifier input, optionally with TeX math removed first."""
    title, text = article.title, article.text
    if strip_formulas:
        title, text = strip_math(title), strip_math(text)
    return compose_fields(title, text, article.mscs_field, v)


_MATH_OPENERS = (("$$", "$$"), ("$", "$"), (r"\(", r"\)"), (r"\[", r"\]"))


def strip_math(s: str) -> str:
    """Replace each TeX math span with a single space.

    Handles ``$...$``, ``$$...$$``, ``\\(...\\)`` and ``\\[...\\]``; an
    unterminated opener strips to end-of-string. A backslash escapes the
    following character outside math mode, so ``\\$`` stays literal.
    """
    out: list[str] = []
    i, n = 0, len(s)
    while i < n:
        opener = None
        for op, cl in _MATH_OPENERS:
            if s.startswith(op, i):
                opener, closer = op, cl
                break
        if opener is not None:
            end = s.find(closer, i + len(opener))
            out.append(" ")
            if end == -1:
                break
            i = end + len(closer)
            continue
        if s[i] == "\\" and i + 1 < n:
            out.append(s[i : i + 2])
            i += 2
            continue
        out.append(s[i])
        i += 1
    return "".join(out)


# Unicode letters and digits, underscore excluded; length-1 runs are dropped.
_TOKEN_RE = re.compile(r"[^\W_]{2,}")


def tokenize(s: str) -> list[str]:
    """Lowercased alphanumeric unigrams of length >= 2, in document order."""
    return _TOKEN_RE.findall(s.lower())


@dataclass(frozen=True, eq=False)
class Vocabulary:
    """Term index with document frequencies and smoothed idf weights.

    Indices are dense and assigned in lexicographic term order, so fitting is
    deterministic for any document order.
    """

    terms: tuple[str, ...]
    index: dict[str, int]
    df: np.ndarray
    n_docs: int
    idf: np.ndarray

    @classmethod
    def from_counts(cls, df_by_term: dict[str, int], n_docs: int) -> "Vocabulary":
        terms = tuple(sorted(df_by_term))
        df = np.array([df_by_term[t] for t in terms], dtype=np.int64)
        idf = np.log((1.0 + n_docs) / (1.0 + df)) + 1.0
        return cls(terms=terms, index={t: i for i, t in enumerate(terms)}, df=df, n_docs=n_docs, idf=idf)

    def __len__(self) -> int:
        return len(self.terms)


def fit_vocabulary(docs: Iterable[str], min_df: int = 1) -> Vocabulary:
    """Collect tokens seen in at least ``min_df`` documents; df counts documents."""
    docs = list(docs)
    if not docs:
        raise EmptyCorpus("cannot fit a vocabulary on zero documents")
    df: Counter[str] = Counter()
    for doc in docs:
        df.update(set(tokenize(doc)))
    kept = {t: c for t, c in df.items() if c >= min_df}
    return Vocabulary.from_counts(kept, n_docs=len(docs))


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """One L2-normalized tf-idf row, stored sparsely (indices ascending)."""

    indices: np.ndarray
    values: np.ndarray
    dim: int

    @property
    def nnz(self) -> int:
        return len(self.indices)

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.dim, dtype=np.float64)
        dense[self.indices] = self.values
        return dense


def encode(doc: str, voc: Vocabulary) -> FeatureVector:
    """tf x idf over in-vocabulary tokens, L2-normalized; all-zero if none."""
    counts = Counter(t for t in tokenize(doc) if t in voc.index)
    if not counts:
        return FeatureVector(
            indices=np.empty(0, dtype=np.int64), values=np.empty(0, dtype=np.float64), dim=len(voc)
        )
    indices = np.array(sorted(voc.index[t] for t in counts), dtype=np.int64)
    tf = np.array([counts[voc.terms[i]] for i in indices], dtype=np.float64)
    values = tf * voc.idf[indices]
    values /= np.linalg.norm(values)
    return FeatureVector(indices=indices, values=values, dim=len(voc))


def encode_matrix(docs: Sequence[str], voc: Vocabulary) -> sp.csr_matrix:
    """Encode many documents into one CSR matrix of shape (n_docs, |V|)."""
    return stack_feature_vectors([encode(d, voc) for d in docs], dim=len(voc))


def stack_feature_vectors(vectors: Sequence[FeatureVector], dim: int | None = None) -> sp.csr_matrix:
    if dim is None:
        if not vectors:
            raise ValueError("cannot infer dimension from zero vectors")
        dim = vectors[0].dim
    for v in vectors:
        if v.dim != dim:
            raise ValueError(f"feature dimension mismatch: {v.dim} != {dim}")
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    np.cumsum([v.nnz for v in vectors], out=indptr[1:])
    if vectors:
        indices = np.concatenate([v.indices for v in vectors])
        data = np.concatenate([v.values for v in vectors])
    else:
        indices = np.empty(0, dtype=np.int64)
        data = np.empty(0, dtype=np.float64)
    return sp.csr_matrix((data, indices, indptr), shape=(len(vectors), dim))
