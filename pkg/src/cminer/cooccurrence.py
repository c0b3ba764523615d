"""Word frequency analysis, time series, and significance-scored
co-occurrence over sentence or document contexts.

Association measures over the 2x2 contingency table:

*  Dice         2*n_ab / (n_a + n_b)
*  PMI          ln(n_ab * N / (n_a * n_b))
*  log-likelihood   Dunning's G2 = 2 * sum O * ln(O / E), with 0*ln(0) := 0

Presence is counted once per context (binary occurrence), which keeps the
contingency table well-defined.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from .corpus import Document
from .pipeline import DocTermMatrix, Vocabulary, document_tokens

SENTENCE = "SENTENCE"
DOCUMENT = "DOCUMENT"
CONTEXT_UNITS = (SENTENCE, DOCUMENT)

DICE = "DICE"
PMI = "PMI"
LOGLIK = "LOGLIK"
MEASURES = (DICE, PMI, LOGLIK)

_SENTENCE_DELIMS = frozenset(".!?")


@dataclass(frozen=True)
class ContingencyCounts:
    """Binary per-context occurrence counts for one term pair."""

    n_ab: int
    n_a: int
    n_b: int
    n: int
    unit: str

    def __post_init__(self):
        if self.n_ab > min(self.n_a, self.n_b) or max(self.n_a, self.n_b) > self.n:
            raise ValueError("inconsistent contingency counts")


@dataclass(frozen=True)
class CooccurrencePair:
    a: str
    b: str
    counts: ContingencyCounts
    score: float


@dataclass
class CooccurrenceResult:
    """Ranked scored pairs; descending score, ties lexicographic by (a, b)."""

    measure: str
    unit: str
    pairs: list[CooccurrencePair]


@dataclass
class TimeSeries:
    """Per-period term counts; zero periods inside the range are explicit."""

    term: str
    granularity: str
    points: list[tuple[str, int, int]]
    excluded_undated: int


def sentence_spans(body: str) -> list[tuple[int, int]]:
    """Maximal segments split on '.', '!' and '?' (deliberately naive)."""
    spans = []
    start = 0
    for i, c in enumerate(body):
        if c in _SENTENCE_DELIMS:
            if i > start:
                spans.append((start, i))
            start = i + 1
    if start < len(body):
        spans.append((start, len(body)))
    return spans


def term_frequencies(dtm: DocTermMatrix, top_n: int) -> list[tuple[str, int, int]]:
    """Top terms by total count; ties lexicographic."""
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    totals = dtm.term_totals()
    dfs = dtm.term_doc_freq()
    order = sorted(range(len(dtm.vocab)),
                   key=lambda i: (-totals[i], dtm.vocab.terms[i]))
    return [(dtm.vocab.terms[i], int(totals[i]), int(dfs[i]))
            for i in order[:top_n]]


def _period_key(date, granularity: str) -> str:
    if granularity == "YEAR":
        return f"{date.year:04d}"
    return f"{date.year:04d}-{date.month:02d}"


def _period_range(first: str, last: str, granularity: str) -> list[str]:
    if granularity == "YEAR":
        return [f"{y:04d}" for y in range(int(first), int(last) + 1)]
    fy, fm = int(first[:4]), int(first[5:7])
    ly, lm = int(last[:4]), int(last[5:7])
    out = []
    y, m = fy, fm
    while (y, m) <= (ly, lm):
        out.append(f"{y:04d}-{m:02d}")
        m += 1
        if m > 12:
            y, m = y + 1, 1
    return out


def time_series(corpus: list[Document], vocab: Vocabulary, term: str,
                granularity: str = "YEAR") -> TimeSeries:
    """Occurrences of one vocabulary term over calendar periods.

    Dateless documents are excluded and counted in the report; zero-count
    periods between the first and last dated document are emitted.
    """
    if granularity not in ("YEAR", "MONTH"):
        raise ValueError("granularity must be YEAR or MONTH")
    if term not in vocab:
        raise KeyError(f"term {term!r} not in vocabulary")

    counts: Counter[str] = Counter()
    doc_counts: Counter[str] = Counter()
    undated = 0
    periods_seen = []
    for doc in corpus:
        if doc.date is None:
            undated += 1
            continue
        period = _period_key(doc.date, granularity)
        periods_seen.append(period)
        n = sum(1 for t in document_tokens(doc, vocab.params) if t.surface == term)
        if n:
            counts[period] += n
            doc_counts[period] += 1

    if not periods_seen:
        return TimeSeries(term=term, granularity=granularity, points=[],
                          excluded_undated=undated)
    points = [(p, counts.get(p, 0), doc_counts.get(p, 0))
              for p in _period_range(min(periods_seen), max(periods_seen), granularity)]
    return TimeSeries(term=term, granularity=granularity, points=points,
                      excluded_undated=undated)


def _contexts(corpus: list[Document], vocab: Vocabulary, unit: str):
    """Yield the set of vocabulary term indices present in each context."""
    for doc in corpus:
        tokens = document_tokens(doc, vocab.params)
        if unit == DOCUMENT:
            present = {vocab.index[t.surface] for t in tokens if t.surface in vocab.index}
            yield present
        else:
            for s_start, s_end in sentence_spans(doc.body):
                present = {vocab.index[t.surface] for t in tokens
                           if s_start <= t.start < s_end and t.surface in vocab.index}
                yield present


def dice_score(n_ab: int, n_a: int, n_b: int, n: int) -> float:
    return 2.0 * n_ab / (n_a + n_b)


def pmi_score(n_ab: int, n_a: int, n_b: int, n: int) -> float:
    return math.log((n_ab * n) / (n_a * n_b))


def loglik_score(n_ab: int, n_a: int, n_b: int, n: int) -> float:
    """Dunning's G2 over the 2x2 table, with the 0*ln(0) = 0 convention."""
    observed = (n_ab, n_a - n_ab, n_b - n_ab, n - n_a - n_b + n_ab)
    row = (n_a, n - n_a)
    col = (n_b, n - n_b)
    g2 = 0.0
    for i, o in enumerate(observed):
        e = row[i // 2] * col[i % 2] / n
        if o > 0 and e > 0:
            g2 += o * math.log(o / e)
    return 2.0 * g2


_SCORERS = {DICE: dice_score, PMI: pmi_score, LOGLIK: loglik_score}


def cooccurrences(corpus: list[Document], vocab: Vocabulary, unit: str,
                  measure: str, min_pair_count: int = 1,
                  top_n: int | None = None) -> CooccurrenceResult:
    """Score unordered term pairs by their per-context joint occurrence."""
    if unit not in CONTEXT_UNITS:
        raise ValueError(f"unknown context unit {unit!r}")
    if measure not in MEASURES:
        raise ValueError(f"unknown measure {measure!r}")
    if min_pair_count < 1:
        raise ValueError("min_pair_count must be >= 1")
    if len(vocab) < 2:
        raise ValueError("co-occurrence needs at least 2 vocabulary terms")

    term_count = Counter()
    pair_count = Counter()
    n_contexts = 0
    for present in _contexts(corpus, vocab, unit):
        n_contexts += 1
        ordered = sorted(present)
        term_count.update(ordered)
        for i in range(len(ordered)):
            for j in range(i + 1, len(ordered)):
                pair_count[(ordered[i], ordered[j])] += 1

    scorer = _SCORERS[measure]
    pairs = []
    for (ia, ib), n_ab in pair_count.items():
        if n_ab < min_pair_count:
            continue
        counts = ContingencyCounts(n_ab=n_ab, n_a=term_count[ia],
                                   n_b=term_count[ib], n=n_contexts, unit=unit)
        score = scorer(counts.n_ab, counts.n_a, counts.n_b, counts.n)
        # vocabulary indices are lexicographic, so ia < ib gives a < b
        pairs.append(CooccurrencePair(a=vocab.terms[ia], b=vocab.terms[ib],
                                      counts=counts, score=score))

    pairs.sort(key=lambda p: (-p.score, p.a, p.b))
    if top_n is not None:
        pairs = pairs[:top_n]
    return CooccurrenceResult(measure=measure, unit=unit, pairs=pairs)
