"""Document storage, CSV/TSV/text import with field mapping, gazetteer
entity tagging, and shingle-based content deduplication."""
from __future__ import annotations

import csv
import datetime
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

ENTITY_KINDS = ("LOCATION", "PERSON", "ORGANIZATION", "OTHER")

MAPPING_TARGETS = ("id", "title", "body", "date")


class MappingError(ValueError):
    """Import mapping is structurally invalid."""


class CsvFormatError(ValueError):
    """Input file cannot be parsed as CSV at all (fatal)."""


@dataclass(frozen=True)
class EntitySpan:
    """Character span (Unicode scalar-value offsets) tagged with an entity kind."""

    start: int
    end: int
    kind: str
    surface: str

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise ValueError(f"invalid span [{self.start}, {self.end})")
        if self.kind not in ENTITY_KINDS:
            raise ValueError(f"unknown entity kind {self.kind!r}")


@dataclass(frozen=True)
class Document:
    """One text with metadata; the atomic analysis unit.

    Offsets anywhere in the system count Unicode scalar values of ``body``,
    never bytes.
    """

    id: str
    title: str = ""
    body: str = ""
    date: datetime.date | None = None
    metadata: dict[str, str] = field(default_factory=dict)
    entity_tags: tuple[EntitySpan, ...] = ()

    def __post_init__(self):
        for span in self.entity_tags:
            if span.end > len(self.body):
                raise ValueError(f"span end {span.end} beyond body length")
            if self.body[span.start:span.end] != span.surface:
                raise ValueError(f"span surface mismatch at {span.start}")


@dataclass(frozen=True)
class ImportMapping:
    """Maps source columns to document fields.

    Targets: ``id``, ``title``, ``body``, ``date`` or ``metadata:<field>``.
    Exactly one column must map to ``body``; ``id``, ``title`` and ``date``
    may each be mapped at most once.
    """

    columns: dict[str, str]
    date_format: str = "%Y-%m-%d"
    delimiter: str = ","

    def __post_init__(self):
        if len(self.delimiter) != 1:
            raise MappingError("delimiter must be a single character")
        counts = {t: 0 for t in MAPPING_TARGETS}
        for col, target in self.columns.items():
            if target in MAPPING_TARGETS:
                counts[target] += 1
            elif not (target.startswith("metadata:") and target[len("metadata:"):]):
                raise MappingError(f"column {col!r}: unknown target {target!r}")
        if counts["body"] != 1:
            raise MappingError("no body column" if counts["body"] == 0
                               else "multiple body columns")
        for t in ("id", "title", "date"):
            if counts[t] > 1:
                raise MappingError(f"multiple columns mapped to {t!r}")


@dataclass
class ImportReport:
    """Per-row outcome of an import run."""

    total_rows: int = 0
    accepted: int = 0
    rejected: list[tuple[int, str]] = field(default_factory=list)

    def to_text(self) -> str:
        lines = [f"rows: {self.total_rows}  accepted: {self.accepted}  "
                 f"rejected: {len(self.rejected)}"]
        for row, reason in self.rejected:
            lines.append(f"  row {row}: {reason}")
        return "\n".join(lines)

    def to_json(self) -> str:
        return json.dumps({
            "total_rows": self.total_rows,
            "accepted": self.accepted,
            "rejected": [{"row": r, "reason": why} for r, why in self.rejected],
        }, indent=2)


@dataclass(frozen=True)
class DuplicateGroup:
    """Documents whose shingle similarity reached the grouping threshold."""

    representative: str
    members: tuple[str, ...]
    similarity: dict[str, float]


def import_csv(path, mapping: ImportMapping) -> tuple[list[Document], ImportReport]:
    """Read a delimited file into Documents under the given mapping.

    Row-level problems (bad date, duplicate id, ragged row) reject the row
    and are recorded in the report; a file that does not parse as CSV at
    all raises :class:`CsvFormatError`.  When no id column is mapped, ids
    are synthesized as zero-padded data-row ordinals.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh, delimiter=mapping.delimiter, strict=True))
    except csv.Error as exc:
        raise CsvFormatError(f"malformed CSV: {exc}") from exc
    if not rows:
        raise CsvFormatError("empty file")

    header = rows[0]
    missing = [c for c in mapping.columns if c not in header]
    if missing:
        raise MappingError(f"mapped columns not in header: {missing}")
    col_idx = {col: header.index(col) for col in mapping.columns}

    docs: list[Document] = []
    report = ImportReport(total_rows=len(rows) - 1)
    seen_ids: set[str] = set()
    for ordinal, row in enumerate(rows[1:]):
        if len(row) != len(header):
            report.rejected.append((ordinal, "column count mismatch"))
            continue
        doc_id = None
        title = ""
        body = ""
        date = None
        metadata: dict[str, str] = {}
        reason = None
        for col, target in mapping.columns.items():
            value = row[col_idx[col]]
            if target == "id":
                doc_id = value
            elif target == "title":
                title = value
            elif target == "body":
                body = value
            elif target == "date":
                if value.strip() == "":
                    date = None
                else:
                    try:
                        date = datetime.datetime.strptime(
                            value, mapping.date_format).date()
                    except ValueError:
                        reason = "date parse"
            else:
                name = target[len("metadata:"):]
                if value != "":
                    metadata[name] = value
        if reason is not None:
            report.rejected.append((ordinal, reason))
            continue
        if doc_id is None:
            doc_id = f"{ordinal:06d}"
        if doc_id in seen_ids:
            report.rejected.append((ordinal, "duplicate id"))
            continue
        seen_ids.add(doc_id)
        docs.append(Document(id=doc_id, title=title, body=body, date=date,
                             metadata=metadata))
        report.accepted += 1
    return docs, report


def import_text_files(paths) -> tuple[list[Document], ImportReport]:
    """One Document per plain-text file; id is the file stem."""
    docs = []
    report = ImportReport(total_rows=len(paths))
    seen: set[str] = set()
    for ordinal, p in enumerate(paths):
        p = Path(p)
        doc_id = p.stem
        if doc_id in seen:
            report.rejected.append((ordinal, "duplicate id"))
            continue
        seen.add(doc_id)
        docs.append(Document(id=doc_id, title=p.stem,
                             body=p.read_text(encoding="utf-8")))
        report.accepted += 1
    return docs, report


def read_gazetteer(path) -> dict[str, str]:
    """Parse a ``surface<TAB>kind`` gazetteer file (UTF-8, one entry per line)."""
    gaz: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "\t" not in line:
            raise ValueError(f"gazetteer line {lineno}: expected surface<TAB>kind")
        surface, kind = line.split("\t", 1)
        kind = kind.strip().upper()
        if kind not in ENTITY_KINDS:
            raise ValueError(f"gazetteer line {lineno}: unknown kind {kind!r}")
        gaz[surface.strip()] = kind
    return gaz


def _is_word_char(c: str) -> bool:
    return c.isalnum() or c == "_"


def _lower_offsets_preserved(text: str) -> str:
    # str.lower() can change length for a handful of code points; fall back
    # to per-character lowering so offsets stay aligned with the original.
    lowered = text.lower()
    if len(lowered) == len(text):
        return lowered
    return "".join(c if len(c.lower()) != 1 else c.lower() for c in text)


def tag_entities(doc: Document, gazetteer: dict[str, str]) -> Document:
    """Tag every maximal gazetteer match in the body.

    Matching is case-insensitive, on token boundaries, longest surface
    first, scanning left to right; matched regions never overlap.  Existing
    tags are replaced.
    """
    entries = []
    for surface, kind in gazetteer.items():
        if not surface:
            raise ValueError("gazetteer keys must be non-empty")
        if kind not in ENTITY_KINDS:
            raise ValueError(f"unknown entity kind {kind!r}")
        entries.append((surface.lower(), kind))
    if not entries:
        return replace(doc, entity_tags=())
    entries.sort(key=lambda e: (-len(e[0]), e[0]))

    body = doc.body
    lowered = _lower_offsets_preserved(body)
    n = len(lowered)
    spans: list[EntitySpan] = []
    i = 0
    while i < n:
        at_boundary = _is_word_char(lowered[i]) and (
            i == 0 or not _is_word_char(lowered[i - 1]))
        if at_boundary:
            for surface, kind in entries:
                j = i + len(surface)
                if j <= n and lowered[i:j] == surface and (
                        j == n or not _is_word_char(lowered[j])):
                    spans.append(EntitySpan(i, j, kind, body[i:j]))
                    i = j
                    break
            else:
                i += 1
        else:
            i += 1
    return replace(doc, entity_tags=tuple(spans))


def shingle_set(body: str, size: int = 5) -> frozenset[tuple[str, ...]]:
    """Word-level shingles of the body, lowercased.

    Bodies shorter than ``size`` words contribute their whole word tuple as
    a single shingle so that unequal short texts do not collapse together.
    """
    words = body.lower().split()
    if not words:
        return frozenset()
    if len(words) < size:
        return frozenset([tuple(words)])
    return frozenset(tuple(words[i:i + size]) for i in range(len(words) - size + 1))


def jaccard(a: frozenset, b: frozenset) -> float:
    """Jaccard similarity; two equal (including empty) sets score 1.0."""
    if not a and not b:
        return 1.0
    union = len(a | b)
    if union == 0:
        return 1.0
    return len(a & b) / union


def deduplicate(corpus: list[Document], threshold: float) -> list[DuplicateGroup]:
    """Group near-duplicate documents by 5-shingle Jaccard similarity.

    Pairs at or above ``threshold`` are merged transitively, so groups are
    disjoint.  The representative is the lexicographically smallest id and
    similarities are reported against it.  Documents in no group are
    omitted.
    """
    if not corpus:
        raise ValueError("corpus is empty")
    if not (0.0 < threshold <= 1.0):
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")

    docs = sorted(corpus, key=lambda d: d.id)
    shingles = {d.id: shingle_set(d.body) for d in docs}
    ids = [d.id for d in docs]

    parent = {i: i for i in ids}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    for i in range(len(ids)):
        for j in range(i + 1, len(ids)):
            if jaccard(shingles[ids[i]], shingles[ids[j]]) >= threshold:
                union(ids[i], ids[j])

    clusters: dict[str, list[str]] = {}
    for doc_id in ids:
        clusters.setdefault(find(doc_id), []).append(doc_id)

    groups = []
    for rep, members in sorted(clusters.items()):
        if len(members) < 2:
            continue
        rep = min(members)
        sims = {m: jaccard(shingles[m], shingles[rep]) for m in members}
        groups.append(DuplicateGroup(representative=rep,
                                     members=tuple(sorted(members)),
                                     similarity=sims))
    return groups
