"""Article and prediction corpus formats.

Covers the 5-character MSC code grammar, the per-reference ``mscs`` field
encoding, article/prediction CSV round-tripping, and train/test splitting.
"""

from __future__ import annotations

import csv
import io
import logging
import random
import re
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Sequence, Union

from .errors import (
    CsvSyntax,
    DuplicateId,
    DuplicateKey,
    EmptyLabels,
    MalformedCode,
    MalformedField,
    UnknownId,
)

logger = logging.getLogger(__name__)

ARTICLE_HEADER = ("de", "labels", "title", "text", "mscs")
PREDICTION_HEADER = ("de", "method", "pos", "coarse", "fine", "score")

MAX_DE = 99_999_999

# positions 1-2: digits, position 3: uppercase letter or '-',
# positions 4-5: digit, uppercase letter, or literal 'x'
_CODE_RE = re.compile(r"[0-9]{2}[A-Z-][0-9A-Zx]{2}")

Source = Union[str, Path, IO[str], IO[bytes]]


@dataclass(frozen=True, order=True)
class MscCode:
    """A validated 5-character MSC code such as ``68T50`` or ``05-xx``."""

    raw: str

    @property
    def subject(self) -> int:
        """Two-digit coarse subject number (leading zeros allowed)."""
        return int(self.raw[:2])

    @property
    def mid(self) -> str:
        return self.raw[2]

    @property
    def leaf(self) -> str:
        return self.raw[3:]

    def __str__(self) -> str:
        return self.raw


def parse_msc_code(s: str) -> MscCode:
    """Validate ``s`` against the code grammar.

    The only normalization is uppercasing positions 3-5; a lowercase ``x``
    (the wildcard character) is preserved verbatim.
    """
    if len(s) != 5:
        raise MalformedCode(f"MSC code must have 5 characters, got {s!r}")
    normalized = s[:2] + "".join(c if c == "x" else c.upper() for c in s[2:])
    if not _CODE_RE.fullmatch(normalized):
        raise MalformedCode(f"not a valid MSC code: {s!r}")
    return MscCode(normalized)


def primary_subject(code: MscCode) -> int:
    """Coarse subject number of a code (its first two digits)."""
    return code.subject


def parse_ref_mscs(field: str, on_malformed: str = "raise") -> list[list[MscCode]]:
    """Decode the comma-separated per-reference code field.

    Each comma-separated segment holds the codes of one reference,
    concatenated without separators in fixed 5-character chunks.

    ``on_malformed`` is ``"raise"`` (reject the whole field) or ``"skip"``
    (drop the offending reference with a logged warning).
    """
    if on_malformed not in ("raise", "skip"):
        raise ValueError(f"on_malformed must be 'raise' or 'skip', got {on_malformed!r}")
    if field == "":
        return []
    refs: list[list[MscCode]] = []
    for segment in field.split(","):
        try:
            refs.append(_parse_segment(segment))
        except MalformedField as exc:
            if on_malformed == "skip":
                logger.warning("skipping malformed reference segment: %s", exc)
                continue
            raise
    return refs


def _parse_segment(segment: str) -> list[MscCode]:
    if len(segment) % 5 != 0:
        raise MalformedField(
            f"segment length {len(segment)} is not a multiple of 5: {segment!r}"
        )
    try:
        return [parse_msc_code(segment[i : i + 5]) for i in range(0, len(segment), 5)]
    except MalformedCode as exc:
        raise MalformedField(str(exc)) from exc


def encode_ref_mscs(refs: Sequence[Sequence[MscCode]]) -> str:
    """Inverse of :func:`parse_ref_mscs` for well-formed inputs."""
    return ",".join("".join(code.raw for code in ref) for ref in refs)


@dataclass(frozen=True)
class ArticleRecord:
    """One corpus row: id, gold labels, title, abstract, reference codes."""

    de: int
    labels: tuple[MscCode, ...]
    title: str
    text: str
    ref_mscs: tuple[tuple[MscCode, ...], ...] = ()

    def __post_init__(self) -> None:
        if not 0 <= self.de <= MAX_DE:
            raise ValueError(f"de must be an 8-digit id, got {self.de}")
        if not self.labels:
            raise EmptyLabels(f"article {self.de:08d} has no MSC labels")

    @property
    def primary_subject(self) -> int:
        return self.labels[0].subject

    @property
    def mscs_field(self) -> str:
        """Canonical serialized form of the reference codes."""
        return encode_ref_mscs(self.ref_mscs)


@dataclass(frozen=True)
class PredictionRecord:
    """One prediction row per the output contract (pos=1 for this task)."""

    de: int
    method: str
    pos: int
    coarse: int
    fine: MscCode | None = None
    score: float | None = None

    def __post_init__(self) -> None:
        if not 0 <= self.de <= MAX_DE:
            raise ValueError(f"de must be an 8-digit id, got {self.de}")
        if len(self.method) != 5:
            raise ValueError(f"method must be a 5-character run id, got {self.method!r}")
        if self.pos < 1:
            raise ValueError(f"pos must be a positive rank, got {self.pos}")
        if not 0 <= self.coarse <= 99:
            raise ValueError(f"coarse subject must be in 00-99, got {self.coarse}")
        if self.score is not None and not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0, 1], got {self.score}")

    @property
    def key(self) -> tuple[int, str, int]:
        return (self.de, self.method, self.pos)


def read_articles(source: Source, on_malformed_ref: str = "skip") -> list[ArticleRecord]:
    """Parse an article CSV (header ``de,labels,title,text,mscs``).

    Labels accept whitespace or comma separators; the first label is the
    primary one. Malformed reference segments are skipped with a warning by
    default; pass ``on_malformed_ref="raise"`` to reject the whole file.
    """
    with _open_text(source, "r") as fh:
        reader = csv.reader(fh)
        header = _read_header(reader, ARTICLE_HEADER)
        records: list[ArticleRecord] = []
        seen: set[int] = set()
        for row in _iter_rows(reader, len(header)):
            de = _parse_de(row[0], reader.line_num)
            if de in seen:
                raise DuplicateId(f"duplicate de {de:08d} at line {reader.line_num}")
            seen.add(de)
            label_parts = [p for p in re.split(r"[,\s]+", row[1]) if p]
            if not label_parts:
                raise EmptyLabels(f"article {de:08d} has no MSC labels (line {reader.line_num})")
            try:
                labels = tuple(parse_msc_code(p) for p in label_parts)
                refs = parse_ref_mscs(row[4], on_malformed=on_malformed_ref)
            except (MalformedCode, MalformedField) as exc:
                raise CsvSyntax(f"line {reader.line_num}: {exc}") from exc
            records.append(
                ArticleRecord(
                    de=de,
                    labels=labels,
                    title=row[2],
                    text=row[3],
                    ref_mscs=tuple(tuple(r) for r in refs),
                )
            )
    return records


def write_articles(records: Iterable[ArticleRecord], sink: Source) -> None:
    """Serialize articles so that :func:`read_articles` reproduces them."""
    with _open_text(sink, "w") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(ARTICLE_HEADER)
        for rec in records:
            writer.writerow(
                [
                    f"{rec.de:08d}",
                    " ".join(code.raw for code in rec.labels),
                    rec.title,
                    rec.text,
                    rec.mscs_field,
                ]
            )


def read_predictions(source: Source) -> list[PredictionRecord]:
    """Parse a prediction CSV (header ``de,method,pos,coarse,fine,score``)."""
    with _open_text(source, "r") as fh:
        reader = csv.reader(fh)
        header = _read_header(reader, PREDICTION_HEADER)
        records: list[PredictionRecord] = []
        seen: set[tuple[int, str, int]] = set()
        for row in _iter_rows(reader, len(header)):
            de = _parse_de(row[0], reader.line_num)
            try:
                rec = PredictionRecord(
                    de=de,
                    method=row[1],
                    pos=int(row[2]),
                    coarse=int(row[3]),
                    fine=parse_msc_code(row[4]) if row[4] else None,
                    score=float(row[5]) if row[5] else None,
                )
            except (ValueError, MalformedCode) as exc:
                raise CsvSyntax(f"line {reader.line_num}: {exc}") from exc
            if rec.key in seen:
                raise DuplicateKey(f"duplicate (de, method, pos) {rec.key} at line {reader.line_num}")
            seen.add(rec.key)
            records.append(rec)
    return records


def write_predictions(preds: Iterable[PredictionRecord], sink: Source) -> None:
    """Emit the prediction CSV; scores are printed with 6 decimal digits."""
    preds = list(preds)
    seen: set[tuple[int, str, int]] = set()
    for rec in preds:
        if rec.key in seen:
            raise DuplicateKey(f"duplicate (de, method, pos) {rec.key}")
        seen.add(rec.key)
    with _open_text(sink, "w") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(PREDICTION_HEADER)
        for rec in preds:
            writer.writerow(
                [
                    f"{rec.de:08d}",
                    rec.method,
                    rec.pos,
                    rec.coarse,
                    rec.fine.raw if rec.fine else "",
                    "" if rec.score is None else f"{rec.score:.6f}",
                ]
            )


# --- splitting --------------------------------------------------------------


@dataclass(frozen=True)
class HeldOutIds:
    """Split policy: the listed document ids form the test side."""

    test_ids: frozenset[int]


@dataclass(frozen=True)
class RandomFraction:
    """Split policy: a seeded random fraction of articles forms the test side."""

    fraction: float
    seed: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError(f"fraction must be in [0, 1], got {self.fraction}")


SplitPolicy = Union[HeldOutIds, RandomFraction]


@dataclass(frozen=True)
class CorpusSplit:
    train: tuple[ArticleRecord, ...]
    test: tuple[ArticleRecord, ...]
    policy: SplitPolicy


def split_corpus(records: Sequence[ArticleRecord], policy: SplitPolicy) -> CorpusSplit:
    """Partition a corpus deterministically; train and test are disjoint by de.

    Outputs are ordered by de so the split depends only on the record set
    and the policy, not on input order.
    """
    ordered = sorted(records, key=lambda r: r.de)
    if isinstance(policy, HeldOutIds):
        known = {r.de for r in ordered}
        missing = sorted(policy.test_ids - known)
        if missing:
            raise UnknownId(f"test ids absent from corpus: {missing[:5]}")
        test_ids = policy.test_ids
    elif isinstance(policy, RandomFraction):
        n_test = round(policy.fraction * len(ordered))
        rng = random.Random(policy.seed)
        test_ids = frozenset(rng.sample([r.de for r in ordered], n_test))
    else:
        raise TypeError(f"unknown split policy: {policy!r}")
    train = tuple(r for r in ordered if r.de not in test_ids)
    test = tuple(r for r in ordered if r.de in test_ids)
    return CorpusSplit(train=train, test=test, policy=policy)


# --- helpers ----------------------------------------------------------------


def _parse_de(field: str, line_num: int) -> int:
    try:
        de = int(field)
    except ValueError as exc:
        raise CsvSyntax(f"line {line_num}: de is not an integer: {field!r}") from exc
    if not 0 <= de <= MAX_DE:
        raise CsvSyntax(f"line {line_num}: de out of 8-digit range: {field!r}")
    return de


def _read_header(reader, expected: tuple[str, ...]) -> tuple[str, ...]:
    try:
        header = next(reader, None)
    except csv.Error as exc:
        raise CsvSyntax(f"line 1: {exc}") from exc
    if header is None or tuple(header) != expected:
        raise CsvSyntax(f"expected header {','.join(expected)!r}, got {header!r}")
    return expected


def _iter_rows(reader, width: int):
    while True:
        try:
            row = next(reader)
        except StopIteration:
            return
        except csv.Error as exc:
            raise CsvSyntax(f"line {reader.line_num}: {exc}") from exc
        if not row:
            continue
        if len(row) != width:
            raise CsvSyntax(f"line {reader.line_num}: expected {width} fields, got {len(row)}")
        yield row


@contextmanager
def _open_text(source: Source, mode: str):
    """Open a path for text I/O, or adapt an already-open file object.

    Binary streams are wrapped (and detached afterwards, leaving the caller's
    stream usable); text streams and paths behave as expected.
    """
    if isinstance(source, (str, Path)):
        with open(source, mode, encoding="utf-8", newline="") as fh:
            yield fh
        return
    if isinstance(source, (io.RawIOBase, io.BufferedIOBase)) or "b" in str(getattr(source, "mode", "")):
        wrapper = io.TextIOWrapper(source, encoding="utf-8", newline="")
        try:
            yield wrapper
        finally:
            wrapper.flush()
            wrapper.detach()
        return
    yield source
