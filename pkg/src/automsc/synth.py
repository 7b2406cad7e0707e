"""Synthetic labeled corpora for experiments and end-to-end tests.

Each class plants marker tokens in the title and abstract with configurable
rates, and reference codes point at the true subject except for a flip
fraction that relabels a reference to a random other subject. Markers never
lie; the only error sources are marker absence and flipped references, so
reference signal > text signal > title signal can be dialed in directly.
"""

from __future__ import annotations

import random
from typing import Sequence

from .corpus import ArticleRecord, MscCode, parse_msc_code

DEFAULT_SUBJECTS = (5, 11, 20, 35, 46, 53, 60, 68, 81, 94)

_NOISE_WORDS = tuple(f"noise{i:02d}" for i in range(30))
_CODE_MIDS = "ABC"
_CODE_LEAVES = ("05", "10", "15")


def _subject_code(subject: int, rng: random.Random) -> MscCode:
    return parse_msc_code(f"{subject:02d}{rng.choice(_CODE_MIDS)}{rng.choice(_CODE_LEAVES)}")


def make_synthetic_corpus(
    n_articles: int,
    subjects: Sequence[int] = DEFAULT_SUBJECTS,
    seed: int = 0,
    *,
    ref_flip_rate: float = 0.2,
    title_marker_rate: float = 0.5,
    text_marker_rate: float = 0.85,
    include_math: bool = False,
) -> list[ArticleRecord]:
    """Balanced corpus (subjects assigned round-robin), deterministic per seed."""
    rng = random.Random(seed)
    records = []
    for i in range(n_articles):
        subject = subjects[i % len(subjects)]
        others = [s for s in subjects if s != subject]

        title_words = [rng.choice(_NOISE_WORDS) for _ in range(3 + rng.randrange(4))]
        if rng.random() < title_marker_rate:
            title_words.insert(rng.randrange(len(title_words) + 1), f"alpha{subject:02d}")
        title = " ".join(title_words)
        if include_math:
            title += f" $x_{{{rng.randrange(9)}}}$"

        text_words = [rng.choice(_NOISE_WORDS) for _ in range(15 + rng.randrange(10))]
        if rng.random() < text_marker_rate:
            for _ in range(1 + rng.randrange(3)):
                text_words.insert(rng.randrange(len(text_words) + 1), f"beta{subject:02d}")
        text = " ".join(text_words)
        if include_math:
            text += f" \\(\\lambda^{rng.randrange(9)}\\)"

        refs = []
        for _ in range(3 + rng.randrange(3)):
            flip = rng.random() < ref_flip_rate
            ref_subject = rng.choice(others) if flip and others else subject
            refs.append(tuple(_subject_code(ref_subject, rng) for _ in range(1 + rng.randrange(2))))

        records.append(
            ArticleRecord(
                de=10_000_001 + i,
                labels=(_subject_code(subject, rng),),
                title=title,
                text=text,
                ref_mscs=tuple(refs),
            )
        )
    return records


def make_separable_corpus(
    n_articles: int,
    subjects: Sequence[int] = DEFAULT_SUBJECTS[:4],
    seed: int = 0,
) -> list[ArticleRecord]:
    """Every article carries its class markers; a trained model is exact."""
    return make_synthetic_corpus(
        n_articles,
        subjects,
        seed,
        ref_flip_rate=0.0,
        title_marker_rate=1.0,
        text_marker_rate=1.0,
    )
