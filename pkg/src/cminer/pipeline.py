"""Parameterized preprocessing: tokenization, vocabulary construction and
the document-term matrix.

Filters compose in a fixed, documented order: length bounds, number
removal, stopwords, blacklist, whitelist, document-frequency pruning.
"""
from __future__ import annotations

import json
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .corpus import Document

FILTERED = -1

STOPWORD_LANGUAGES = ("en", "de")


class EmptyVocabularyError(ValueError):
    """Every term was removed; the parameterization is over-aggressive."""


@dataclass(frozen=True)
class AnalysisParams:
    """Full preprocessing parameterization for one analysis run.

    ``whitelist=None`` means no restriction; a non-None whitelist keeps only
    the listed terms.  ``consolidate_entities`` joins multi-word entity
    surfaces with ``_`` so they survive as single tokens.
    """

    ngram: int = 1
    min_char: int = 2
    max_char: int = 50
    lowercase: bool = True
    remove_stopwords: bool = False
    stopword_language: str = "en"
    remove_numbers: bool = False
    blacklist: frozenset[str] = frozenset()
    whitelist: frozenset[str] | None = None
    prune_min_df: float = 0.0
    prune_max_df: float = 1.0
    consolidate_entities: bool = False

    def __post_init__(self):
        if self.ngram not in (1, 2):
            raise ValueError("ngram must be 1 or 2")
        if self.min_char < 1:
            raise ValueError("min_char must be >= 1")
        if self.max_char < self.min_char:
            raise ValueError(
                f"max_char ({self.max_char}) < min_char ({self.min_char})")
        if not (0.0 <= self.prune_min_df < 1.0):
            raise ValueError("prune_min_df must be in [0, 1)")
        if not (0.0 < self.prune_max_df <= 1.0):
            raise ValueError("prune_max_df must be in (0, 1]")
        if self.prune_min_df >= self.prune_max_df:
            raise ValueError(
                f"prune_min_df ({self.prune_min_df}) must be < "
                f"prune_max_df ({self.prune_max_df})")
        if self.stopword_language not in STOPWORD_LANGUAGES:
            raise ValueError(f"no stopword list for {self.stopword_language!r}")
        object.__setattr__(self, "blacklist",
                           frozenset(t.lower() for t in self.blacklist))
        if self.whitelist is not None:
            object.__setattr__(self, "whitelist",
                               frozenset(t.lower() for t in self.whitelist))

    def to_json(self) -> str:
        d = {
            "ngram": self.ngram,
            "min_char": self.min_char,
            "max_char": self.max_char,
            "lowercase": self.lowercase,
            "remove_stopwords": self.remove_stopwords,
            "stopword_language": self.stopword_language,
            "remove_numbers": self.remove_numbers,
            "blacklist": sorted(self.blacklist),
            "whitelist": sorted(self.whitelist) if self.whitelist is not None else None,
            "prune_min_df": self.prune_min_df,
            "prune_max_df": self.prune_max_df,
            "consolidate_entities": self.consolidate_entities,
        }
        return json.dumps(d, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "AnalysisParams":
        d = json.loads(text)
        if "blacklist" in d:
            d["blacklist"] = frozenset(d["blacklist"])
        if d.get("whitelist") is not None:
            d["whitelist"] = frozenset(d["whitelist"])
        return cls(**d)


@dataclass(frozen=True)
class Token:
    """A surface form with its original body span (scalar-value offsets)."""

    start: int
    end: int
    surface: str


@dataclass
class Vocabulary:
    """Retained terms with contiguous indices assigned in lexicographic order."""

    terms: tuple[str, ...]
    doc_freq: np.ndarray
    n_docs: int
    params: AnalysisParams
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.index = {t: i for i, t in enumerate(self.terms)}

    def __len__(self):
        return len(self.terms)

    def __contains__(self, term: str) -> bool:
        return term in self.index


@dataclass
class DocTermMatrix:
    """Sparse per-document term counts plus the per-document token stream.

    Each stream entry is ``(start, end, term_index)``; tokens removed by the
    vocabulary filters appear with index ``FILTERED`` so highlighting can
    skip them while keeping positions.
    """

    vocab: Vocabulary
    doc_ids: tuple[str, ...]
    rows: list[dict[int, int]]
    streams: list[list[tuple[int, int, int]]]

    def __len__(self):
        return len(self.doc_ids)

    def row_index(self, doc_id: str) -> int:
        try:
            return self.doc_ids.index(doc_id)
        except ValueError:
            raise KeyError(f"document {doc_id!r} not in matrix") from None

    def doc_lengths(self) -> np.ndarray:
        return np.array([sum(r.values()) for r in self.rows], dtype=np.int64)

    def term_totals(self) -> np.ndarray:
        totals = np.zeros(len(self.vocab), dtype=np.int64)
        for row in self.rows:
            for idx, count in row.items():
                totals[idx] += count
        return totals

    def term_doc_freq(self) -> np.ndarray:
        dfs = np.zeros(len(self.vocab), dtype=np.int64)
        for row in self.rows:
            for idx in row:
                dfs[idx] += 1
        return dfs


def _is_punct(c: str) -> bool:
    return unicodedata.category(c).startswith("P")


def _unigrams(text: str, params: AnalysisParams) -> list[Token]:
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        j = i
        while j < n and not text[j].isspace():
            j += 1
        start, end = i, j
        while start < end and _is_punct(text[start]):
            start += 1
        while end > start and _is_punct(text[end - 1]):
            end -= 1
        if start < end:
            surface = text[start:end]
            if params.lowercase:
                surface = surface.lower()
            tokens.append(Token(start, end, surface))
        i = j
    return tokens


def _consolidate(tokens: list[Token], doc: Document) -> list[Token]:
    multiword = [s for s in doc.entity_tags if " " in s.surface]
    if not multiword:
        return tokens
    multiword.sort(key=lambda s: s.start)
    out: list[Token] = []
    i = 0
    for span in multiword:
        while i < len(tokens) and tokens[i].end <= span.start:
            out.append(tokens[i])
            i += 1
        merged = []
        while i < len(tokens) and tokens[i].start >= span.start and tokens[i].end <= span.end:
            merged.append(tokens[i])
            i += 1
        if len(merged) >= 2:
            out.append(Token(merged[0].start, merged[-1].end,
                             "_".join(t.surface for t in merged)))
        else:
            out.extend(merged)
    out.extend(tokens[i:])
    return out


def _with_bigrams(tokens: list[Token]) -> list[Token]:
    out = []
    for i, tok in enumerate(tokens):
        out.append(tok)
        if i + 1 < len(tokens):
            nxt = tokens[i + 1]
            out.append(Token(tok.start, nxt.end, f"{tok.surface}_{nxt.surface}"))
    return out


def tokenize(text: str, params: AnalysisParams) -> list[Token]:
    """Split on Unicode whitespace, strip edge punctuation, record spans.

    With ``ngram=2``, adjacent-pair tokens ``a_b`` are additionally emitted
    carrying the union span, interleaved in (start, end) order.
    """
    tokens = _unigrams(text, params)
    if params.ngram == 2:
        tokens = _with_bigrams(tokens)
    return tokens


def document_tokens(doc: Document, params: AnalysisParams) -> list[Token]:
    """Tokenize a document, honoring entity consolidation when enabled."""
    tokens = _unigrams(doc.body, params)
    if params.consolidate_entities and doc.entity_tags:
        tokens = _consolidate(tokens, doc)
    if params.ngram == 2:
        tokens = _with_bigrams(tokens)
    return tokens


def load_stopwords(language: str) -> frozenset[str]:
    if language not in STOPWORD_LANGUAGES:
        raise ValueError(f"no stopword list for {language!r}")
    text = resources.files("cminer.data.stopwords").joinpath(
        f"{language}.txt").read_text(encoding="utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


def read_wordlist(path) -> frozenset[str]:
    """Newline-delimited UTF-8 term list (black/whitelists)."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return frozenset(w.strip() for w in lines if w.strip())


def _is_number(term: str) -> bool:
    return bool(term) and all(c.isdigit() or c in ".," for c in term)


def build_vocabulary(corpus: list[Document], params: AnalysisParams) -> Vocabulary:
    """Apply the filter chain and index surviving terms lexicographically."""
    if not corpus:
        raise ValueError("corpus is empty")
    df: Counter[str] = Counter()
    for doc in corpus:
        df.update({t.surface for t in document_tokens(doc, params)})
    n_docs = len(corpus)

    stopwords = load_stopwords(params.stopword_language) if params.remove_stopwords else frozenset()

    retained = []
    for term in df:
        if not (params.min_char <= len(term) <= params.max_char):
            continue
        if params.remove_numbers and _is_number(term):
            continue
        if params.remove_stopwords and term.lower() in stopwords:
            continue
        if term.lower() in params.blacklist:
            continue
        if params.whitelist is not None and term.lower() not in params.whitelist:
            continue
        rel_df = df[term] / n_docs
        if rel_df < params.prune_min_df or rel_df > params.prune_max_df:
            continue
        retained.append(term)

    if not retained:
        raise EmptyVocabularyError(
            "no terms survive the current parameterization")
    retained.sort()
    return Vocabulary(terms=tuple(retained),
                      doc_freq=np.array([df[t] for t in retained], dtype=np.int64),
                      n_docs=n_docs,
                      params=params)


def build_dtm(corpus: list[Document], vocab: Vocabulary) -> DocTermMatrix:
    """Count vocabulary terms per document and record the token stream."""
    doc_ids = []
    rows = []
    streams = []
    for doc in corpus:
        counts: dict[int, int] = {}
        stream = []
        for tok in document_tokens(doc, vocab.params):
            idx = vocab.index.get(tok.surface, FILTERED)
            stream.append((tok.start, tok.end, idx))
            if idx != FILTERED:
                counts[idx] = counts.get(idx, 0) + 1
        doc_ids.append(doc.id)
        rows.append(dict(sorted(counts.items())))
        streams.append(stream)
    return DocTermMatrix(vocab=vocab, doc_ids=tuple(doc_ids),
                         rows=rows, streams=streams)


def blacklist_from_entities(corpus: list[Document], kinds: set[str]) -> frozenset[str]:
    """Lowercased token surfaces of every entity span with a kind in ``kinds``.

    Multi-word surfaces contribute each word and the ``_``-joined form, so
    the list works with and without entity consolidation.
    """
    params = AnalysisParams(min_char=1, lowercase=True)
    terms: set[str] = set()
    for doc in corpus:
        for span in doc.entity_tags:
            if span.kind not in kinds:
                continue
            words = [t.surface for t in _unigrams(span.surface, params)]
            terms.update(words)
            if len(words) > 1:
                terms.add("_".join(words))
    return frozenset(terms)
