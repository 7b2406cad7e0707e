"""Shared fixtures and independent oracles used across the suite."""

from __future__ import annotations

import re

import numpy as np
import pytest
from hypothesis import settings

from automsc import classifier, features
from automsc.corpus import ArticleRecord, parse_msc_code

settings.register_profile("thorough", max_examples=300)

MSC_CODE_PATTERN = r"[0-9]{2}[A-Z-][0-9A-Zx]{2}"


def make_article(de, label, title="", text="", refs=()):
    """Article from plain strings: label and refs are raw MSC code strings."""
    return ArticleRecord(
        de=de,
        labels=(parse_msc_code(label),),
        title=title,
        text=text,
        ref_mscs=tuple(tuple(parse_msc_code(c) for c in ref) for ref in refs),
    )


def brute_force_class_metrics(truth, pred):
    """Per-record counting oracle: {class: (support, precision, recall, f1)}."""
    classes = sorted(set(truth) | set(pred))
    out = {}
    for c in classes:
        tp = sum(1 for t, p in zip(truth, pred) if t == c and p == c)
        fp = sum(1 for t, p in zip(truth, pred) if t != c and p == c)
        fn = sum(1 for t, p in zip(truth, pred) if t == c and p != c)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        out[c] = (tp + fn, precision, recall, f1)
    return out


def brute_force_weighted(per_class, min_class_size):
    """Weighted aggregation oracle over the dict from brute_force_class_metrics."""
    kept = {c: v for c, v in per_class.items() if v[0] >= min_class_size}
    if not kept:
        return None
    n = sum(v[0] for v in kept.values())
    return (
        sum(v[0] * v[1] for v in kept.values()) / n,
        sum(v[0] * v[2] for v in kept.values()) / n,
        sum(v[0] * v[3] for v in kept.values()) / n,
    )


_STRIP_TOKEN = re.compile(r"\$\$|\$|\\\(|\\\[|\\.", re.DOTALL)


def reference_strip_math(s):
    """Independent math-span remover built on regex scanning."""
    out = []
    i = 0
    while i < len(s):
        m = _STRIP_TOKEN.search(s, i)
        if m is None:
            out.append(s[i:])
            break
        out.append(s[i : m.start()])
        tok = m.group()
        closer = {"$$": "$$", "$": "$", "\\(": "\\)", "\\[": "\\]"}.get(tok)
        if closer is None:  # escaped character
            out.append(tok)
            i = m.end()
            continue
        out.append(" ")
        j = s.find(closer, m.end())
        i = len(s) if j == -1 else j + len(closer)
    return "".join(out)


def central_difference_gradient(fun, x, eps=1e-6):
    g = np.zeros_like(x)
    for i in range(len(x)):
        bump = np.zeros_like(x)
        bump[i] = eps
        g[i] = (fun(x + bump)[0] - fun(x - bump)[0]) / (2 * eps)
    return g


@pytest.fixture
def toy_model():
    """A refs-style model over two marker tokens, trained to separate 5 and 68."""
    docs = ["05a05", "05a05", "68b10", "68b10"]
    labels = [5, 5, 68, 68]
    voc = features.fit_vocabulary(docs)
    examples = [(features.encode(d, voc), s) for d, s in zip(docs, labels)]
    return classifier.train(
        examples,
        classifier.Hyperparams(),
        vocabulary=voc,
        variant=features.variant("refs"),
    )
