"""LDA topic modeling via collapsed Gibbs sampling, with semantic
coherence, relevance-weighted top words, per-token highlighting for
qualitative validation, thematic filtering and metadata contrast.

Estimates come from the final sampler state:

*  theta[d, k] = (n_dk + alpha) / (n_d + K*alpha)
*  phi[k, w]   = (n_kw + beta)  / (n_k + V*beta)

Runs are fully deterministic given the seed, independent of whether the
numba-compiled or pure kernel path executed.
"""
from __future__ import annotations

import csv
import datetime
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import gammaln

from ._kernels import KERNELS, rng_state
from .corpus import Document
from .pipeline import (FILTERED, AnalysisParams, DocTermMatrix, Vocabulary)


class FitCancelled(RuntimeError):
    """Raised inside fit_lda when the caller's cancel hook fires."""


@dataclass(frozen=True)
class LdaConfig:
    """Sampler hyperparameters. ``alpha=None`` resolves to 50/K."""

    k: int
    alpha: float | None = None
    beta: float = 0.01
    iterations: int = 1000
    burn_in: int = 500
    seed: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.alpha is None:
            object.__setattr__(self, "alpha", 50.0 / self.k)
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if self.beta <= 0:
            raise ValueError("beta must be > 0")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not (0 <= self.burn_in < self.iterations):
            raise ValueError("burn_in must be < iterations")

    def to_dict(self) -> dict:
        return {"k": self.k, "alpha": self.alpha, "beta": self.beta,
                "iterations": self.iterations, "burn_in": self.burn_in,
                "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "LdaConfig":
        return cls(**d)


@dataclass(frozen=True)
class TopicLabel:
    topic: int
    label: str
    author: str
    timestamp: str


@dataclass(frozen=True)
class HighlightSpan:
    start: int
    end: int
    topic: int
    weight: float


@dataclass
class TopicModel:
    """Fitted sampler state plus derived estimates.

    Token arrays are flat in document order; ``doc_slices[d]`` addresses the
    tokens of document ``d``. ``dtm`` is attached when available so that
    highlighting can map assignments back to body spans.
    """

    config: LdaConfig
    vocab: Vocabulary
    doc_ids: tuple[str, ...]
    token_doc: np.ndarray
    token_term: np.ndarray
    z: np.ndarray
    doc_slices: list[tuple[int, int]]
    n_dk: np.ndarray
    n_kw: np.ndarray
    n_k: np.ndarray
    n_d: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    log_likelihood_trace: np.ndarray
    labels: dict[int, list[TopicLabel]] = field(default_factory=dict)
    dtm: DocTermMatrix | None = None

    @property
    def n_topics(self) -> int:
        return self.config.k

    def active_label(self, k: int) -> TopicLabel | None:
        history = self.labels.get(k)
        return history[-1] if history else None

    def recompute_counts(self):
        """Rebuild count tables from z; used for consistency checks."""
        K = self.config.k
        V = len(self.vocab)
        D = len(self.doc_ids)
        n_dk = np.zeros((D, K))
        n_kw = np.zeros((K, V))
        for i in range(self.z.shape[0]):
            n_dk[self.token_doc[i], self.z[i]] += 1.0
            n_kw[self.z[i], self.token_term[i]] += 1.0
        return n_dk, n_kw, n_kw.sum(axis=1), n_dk.sum(axis=1)


def _joint_log_likelihood(n_dk, n_kw, n_k, n_d, alpha, beta) -> float:
    # collapsed joint log p(w, z); finite for any count state
    D, K = n_dk.shape
    V = n_kw.shape[1]
    ll = K * (gammaln(V * beta) - V * gammaln(beta))
    ll += D * (gammaln(K * alpha) - K * gammaln(alpha))
    ll += gammaln(n_kw + beta).sum() - gammaln(n_k + V * beta).sum()
    ll += gammaln(n_dk + alpha).sum() - gammaln(n_d + K * alpha).sum()
    return float(ll)


def fit_lda(dtm: DocTermMatrix, config: LdaConfig, progress=None,
            cancel=None, kernels=None) -> TopicModel:
    """Run the collapsed Gibbs sampler over the matrix's token streams.

    ``progress(sweep, total, log_likelihood)`` is invoked after every sweep;
    ``cancel()`` returning true aborts with :class:`FitCancelled`.
    """
    if len(dtm) == 0:
        raise ValueError("document-term matrix is empty")
    kernels = kernels or KERNELS

    token_doc = []
    token_term = []
    doc_slices = []
    for d, stream in enumerate(dtm.streams):
        lo = len(token_doc)
        for _, _, idx in stream:
            if idx != FILTERED:
                token_doc.append(d)
                token_term.append(idx)
        doc_slices.append((lo, len(token_doc)))
    if not token_doc:
        raise ValueError("every token was filtered; nothing to model")

    V = len(dtm.vocab)
    K = config.k
    if V < K:
        warnings.warn(f"vocabulary size {V} is smaller than topic count {K}")

    token_doc = np.asarray(token_doc, dtype=np.int64)
    token_term = np.asarray(token_term, dtype=np.int64)
    D = len(dtm)
    z = np.zeros(token_doc.shape[0], dtype=np.int64)
    n_dk = np.zeros((D, K))
    n_kw = np.zeros((K, V))
    n_k = np.zeros(K)
    n_d = np.zeros(D)
    cumprobs = np.zeros(K)
    state = rng_state(config.seed)
    alpha, beta = config.alpha, config.beta

    trace = np.zeros(config.iterations + 1)
    with np.errstate(over="ignore"):
        kernels["init_assignments"](token_doc, token_term, z, n_dk, n_kw,
                                    n_k, n_d, alpha, beta, state, cumprobs)
        trace[0] = _joint_log_likelihood(n_dk, n_kw, n_k, n_d, alpha, beta)
        for sweep in range(1, config.iterations + 1):
            if cancel is not None and cancel():
                raise FitCancelled(f"cancelled at sweep {sweep}")
            kernels["gibbs_sweep"](token_doc, token_term, z, n_dk, n_kw,
                                   n_k, alpha, beta, state, cumprobs)
            trace[sweep] = _joint_log_likelihood(n_dk, n_kw, n_k, n_d,
                                                 alpha, beta)
            if progress is not None:
                progress(sweep, config.iterations, trace[sweep])

    theta = (n_dk + alpha) / (n_d[:, None] + K * alpha)
    phi = (n_kw + beta) / (n_k[:, None] + V * beta)
    return TopicModel(config=config, vocab=dtm.vocab, doc_ids=dtm.doc_ids,
                      token_doc=token_doc, token_term=token_term, z=z,
                      doc_slices=doc_slices, n_dk=n_dk, n_kw=n_kw, n_k=n_k,
                      n_d=n_d, theta=theta, phi=phi,
                      log_likelihood_trace=trace, dtm=dtm)


def fit_lda_restarts(dtm: DocTermMatrix, config: LdaConfig, restarts: int = 1,
                     progress=None, cancel=None, kernels=None) -> TopicModel:
    """Run independent chains seeded ``seed .. seed+restarts-1`` and keep the
    one with the highest final joint log-likelihood.

    Collapsed Gibbs freezes into local modes on multimodal corpora; a small
    restart budget with likelihood selection is the standard remedy. The
    returned model's config records the winning chain's seed, so persistence
    and reloads stay exact. Deterministic for a given (config, restarts).
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    best = None
    for chain in range(restarts):
        chain_config = LdaConfig(k=config.k, alpha=config.alpha,
                                 beta=config.beta,
                                 iterations=config.iterations,
                                 burn_in=config.burn_in,
                                 seed=config.seed + chain)
        model = fit_lda(dtm, chain_config, progress=progress, cancel=cancel,
                        kernels=kernels)
        if best is None or (model.log_likelihood_trace[-1]
                            > best.log_likelihood_trace[-1]):
            best = model
    return best


def top_words(model: TopicModel, k: int, n: int,
              lam: float = 1.0) -> list[tuple[str, float]]:
    """Relevance-ranked words for one topic.

    relevance(w) = lam * log(phi_kw) + (1 - lam) * log(phi_kw / p(w)) where
    p(w) is the empirical corpus term probability from the fitted counts.
    lam=1 is the plain phi ranking. Terms the sampler never saw rank last.
    """
    _check_topic(model, k)
    if n < 1:
        raise ValueError("n must be >= 1")
    if not (0.0 <= lam <= 1.0):
        raise ValueError("lambda must be in [0, 1]")
    phi_k = model.phi[k]
    counts = model.n_kw.sum(axis=0)
    total = counts.sum()
    with np.errstate(divide="ignore", invalid="ignore"):
        p_w = counts / total
        relevance = lam * np.log(phi_k) + (1.0 - lam) * np.log(phi_k / p_w)
    relevance = np.where(counts > 0, relevance, -np.inf)
    order = sorted(range(len(phi_k)),
                   key=lambda w: (-relevance[w], model.vocab.terms[w]))
    return [(model.vocab.terms[w], float(relevance[w])) for w in order[:n]]


@dataclass
class CoherenceResult:
    scores: list[float]
    top_words: list[list[str]]
    skipped: list[tuple[int, str]]


def coherence_umass(model: TopicModel, dtm: DocTermMatrix,
                    m: int) -> CoherenceResult:
    """UMass coherence of each topic's top-m words over the fitting matrix.

    C(k) = sum over ranked pairs (w_i, w_j), j < i, of
    log((D(w_i, w_j) + 1) / D(w_j)) with D the document (co-)frequency.
    Pairs whose D(w_j) is zero are skipped and reported.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if m > len(model.vocab):
        raise ValueError(f"m ({m}) exceeds vocabulary size ({len(model.vocab)})")

    doc_sets = [frozenset(row.keys()) for row in dtm.rows]
    df = dtm.term_doc_freq()

    def co_df(wa: int, wb: int) -> int:
        return sum(1 for s in doc_sets if wa in s and wb in s)

    scores = []
    tops = []
    skipped = []
    for k in range(model.config.k):
        words = [w for w, _ in top_words(model, k, m, lam=1.0)]
        idxs = [model.vocab.index[w] for w in words]
        tops.append(words)
        score = 0.0
        for i in range(1, len(idxs)):
            for j in range(i):
                if df[idxs[j]] == 0:
                    skipped.append((k, words[j]))
                    continue
                score += math.log((co_df(idxs[i], idxs[j]) + 1) / df[idxs[j]])
        scores.append(score)
    return CoherenceResult(scores=scores, top_words=tops, skipped=skipped)


def highlight(model: TopicModel, doc: Document, k: int,
              min_weight: float = 0.0) -> list[HighlightSpan]:
    """Spans of tokens assigned to topic ``k`` whose phi-derived weight
    reaches ``min_weight``; weight is phi_kw normalized by the topic's
    maximum so it lies in (0, 1]."""
    _check_topic(model, k)
    if model.dtm is None:
        raise ValueError("model has no attached document-term matrix")
    d = list(model.doc_ids).index(doc.id) if doc.id in model.doc_ids else None
    if d is None:
        raise KeyError(f"document {doc.id!r} was not in the fitted matrix")

    lo, _ = model.doc_slices[d]
    phi_k = model.phi[k]
    phi_max = phi_k.max()
    spans = []
    pos = lo
    for start, end, idx in model.dtm.streams[d]:
        if idx == FILTERED:
            continue
        if model.z[pos] == k:
            weight = float(phi_k[idx] / phi_max)
            if weight >= min_weight:
                spans.append(HighlightSpan(start=start, end=end, topic=k,
                                           weight=weight))
        pos += 1
    return _merge_overlaps(spans)


def _merge_overlaps(spans: list[HighlightSpan]) -> list[HighlightSpan]:
    # bigram tokens carry union spans, which can overlap their unigrams
    spans = sorted(spans, key=lambda s: (s.start, s.end))
    out: list[HighlightSpan] = []
    for s in spans:
        if out and s.start < out[-1].end:
            prev = out[-1]
            out[-1] = HighlightSpan(start=prev.start,
                                    end=max(prev.end, s.end),
                                    topic=prev.topic,
                                    weight=max(prev.weight, s.weight))
        else:
            out.append(s)
    return out


def filter_by_topic(model: TopicModel, k: int,
                    min_share: float = 0.0) -> list[tuple[str, float]]:
    """Documents whose topic share reaches ``min_share``, best first."""
    _check_topic(model, k)
    rows = [(model.doc_ids[d], float(model.theta[d, k]))
            for d in range(len(model.doc_ids))
            if model.theta[d, k] >= min_share]
    rows.sort(key=lambda r: (-r[1], r[0]))
    return rows


@dataclass
class MetadataContrast:
    field: str
    groups: dict[str, np.ndarray]
    sizes: dict[str, int]


def topic_by_metadata(model: TopicModel, corpus: list[Document],
                      field_name: str) -> MetadataContrast:
    """Arithmetic mean theta per metadata group; docs lacking the field
    form the group ``(missing)``."""
    by_id = {doc.id: doc for doc in corpus}
    sums: dict[str, np.ndarray] = {}
    sizes: dict[str, int] = {}
    present = 0
    for d, doc_id in enumerate(model.doc_ids):
        doc = by_id.get(doc_id)
        value = doc.metadata.get(field_name) if doc is not None else None
        if value is None:
            group = "(missing)"
        else:
            group = value
            present += 1
        if group not in sums:
            sums[group] = np.zeros(model.config.k)
            sizes[group] = 0
        sums[group] += model.theta[d]
        sizes[group] += 1
    if present == 0:
        raise ValueError(f"metadata field {field_name!r} on no document")
    groups = {g: sums[g] / sizes[g] for g in sorted(sums)}
    return MetadataContrast(field=field_name, groups=groups,
                            sizes={g: sizes[g] for g in sorted(sizes)})


def label_topic(model: TopicModel, k: int, label: str,
                author: str = "", timestamp: str | None = None) -> TopicLabel:
    """Attach a human label; the previous label stays in the history."""
    _check_topic(model, k)
    if not label:
        raise ValueError("label must be non-empty")
    if timestamp is None:
        timestamp = datetime.datetime.now(datetime.timezone.utc).isoformat()
    record = TopicLabel(topic=k, label=label, author=author, timestamp=timestamp)
    model.labels.setdefault(k, []).append(record)
    return record


def _check_topic(model: TopicModel, k: int):
    if not (0 <= k < model.config.k):
        raise IndexError(f"topic {k} out of range [0, {model.config.k})")


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def save_model(model: TopicModel, path) -> None:
    """Write the persistence directory: config.json, theta.csv, phi.csv,
    assignments.csv, labels.json. Repeated saves of the same state are
    byte-identical."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)

    meta = {
        "config": model.config.to_dict(),
        "doc_ids": list(model.doc_ids),
        "vocab": {
            "terms": list(model.vocab.terms),
            "doc_freq": [int(x) for x in model.vocab.doc_freq],
            "n_docs": model.vocab.n_docs,
            "params": json.loads(model.vocab.params.to_json()),
        },
        "log_likelihood_trace": [_fmt(x) for x in model.log_likelihood_trace],
    }
    _atomic_write(path / "config.json", json.dumps(meta, indent=2) + "\n")

    K = model.config.k
    lines = ["doc_id," + ",".join(f"topic_{k}" for k in range(K))]
    for d, doc_id in enumerate(model.doc_ids):
        lines.append(doc_id + "," + ",".join(_fmt(x) for x in model.theta[d]))
    _atomic_write(path / "theta.csv", "\n".join(lines) + "\n")

    lines = ["topic," + ",".join(model.vocab.terms)]
    for k in range(K):
        lines.append(str(k) + "," + ",".join(_fmt(x) for x in model.phi[k]))
    _atomic_write(path / "phi.csv", "\n".join(lines) + "\n")

    lines = ["doc_id,position,term_index,topic"]
    for d, doc_id in enumerate(model.doc_ids):
        lo, hi = model.doc_slices[d]
        for pos in range(lo, hi):
            lines.append(f"{doc_id},{pos - lo},{model.token_term[pos]},{model.z[pos]}")
    _atomic_write(path / "assignments.csv", "\n".join(lines) + "\n")

    labels = {str(k): [{"label": r.label, "author": r.author,
                        "timestamp": r.timestamp}
                       for r in history]
              for k, history in sorted(model.labels.items())}
    _atomic_write(path / "labels.json", json.dumps(labels, indent=2) + "\n")


def _atomic_write(path: Path, text: str):
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8", newline="\n")
    tmp.replace(path)


def load_model(path, dtm: DocTermMatrix | None = None) -> TopicModel:
    """Rebuild a model from its persistence directory.

    Counts are recomputed from the stored assignments and the stored
    theta/phi values are verified against them (to their 9-digit precision),
    so a corrupted directory fails loudly.
    """
    path = Path(path)
    meta = json.loads((path / "config.json").read_text(encoding="utf-8"))
    config = LdaConfig.from_dict(meta["config"])
    params = AnalysisParams.from_json(json.dumps(meta["vocab"]["params"]))
    vocab = Vocabulary(terms=tuple(meta["vocab"]["terms"]),
                       doc_freq=np.array(meta["vocab"]["doc_freq"], dtype=np.int64),
                       n_docs=meta["vocab"]["n_docs"], params=params)
    doc_ids = tuple(meta["doc_ids"])
    doc_pos = {doc_id: d for d, doc_id in enumerate(doc_ids)}

    token_doc, token_term, z_list = [], [], []
    per_doc: dict[int, list[tuple[int, int, int]]] = {d: [] for d in range(len(doc_ids))}
    with open(path / "assignments.csv", newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            d = doc_pos[row["doc_id"]]
            per_doc[d].append((int(row["position"]), int(row["term_index"]),
                               int(row["topic"])))
    doc_slices = []
    for d in range(len(doc_ids)):
        lo = len(token_doc)
        for _, term, topic in sorted(per_doc[d]):
            token_doc.append(d)
            token_term.append(term)
            z_list.append(topic)
        doc_slices.append((lo, len(token_doc)))

    token_doc = np.asarray(token_doc, dtype=np.int64)
    token_term = np.asarray(token_term, dtype=np.int64)
    z = np.asarray(z_list, dtype=np.int64)

    K, V, D = config.k, len(vocab), len(doc_ids)
    n_dk = np.zeros((D, K))
    n_kw = np.zeros((K, V))
    for i in range(z.shape[0]):
        n_dk[token_doc[i], z[i]] += 1.0
        n_kw[z[i], token_term[i]] += 1.0
    n_k = n_kw.sum(axis=1)
    n_d = n_dk.sum(axis=1)
    theta = (n_dk + config.alpha) / (n_d[:, None] + K * config.alpha)
    phi = (n_kw + config.beta) / (n_k[:, None] + V * config.beta)

    stored_theta = _read_matrix_csv(path / "theta.csv", D, K)
    stored_phi = _read_matrix_csv(path / "phi.csv", K, V)
    if not (np.allclose(theta, stored_theta, rtol=1e-8, atol=1e-12)
            and np.allclose(phi, stored_phi, rtol=1e-8, atol=1e-12)):
        raise ValueError(f"stored theta/phi inconsistent with assignments in {path}")

    labels_raw = json.loads((path / "labels.json").read_text(encoding="utf-8"))
    labels = {int(k): [TopicLabel(topic=int(k), label=r["label"],
                                  author=r["author"], timestamp=r["timestamp"])
                       for r in history]
              for k, history in labels_raw.items()}

    trace = np.array([float(x) for x in meta["log_likelihood_trace"]])
    return TopicModel(config=config, vocab=vocab, doc_ids=doc_ids,
                      token_doc=token_doc, token_term=token_term, z=z,
                      doc_slices=doc_slices, n_dk=n_dk, n_kw=n_kw, n_k=n_k,
                      n_d=n_d, theta=theta, phi=phi,
                      log_likelihood_trace=trace, labels=labels, dtm=dtm)


def _read_matrix_csv(path: Path, rows: int, cols: int) -> np.ndarray:
    out = np.zeros((rows, cols))
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for i, row in enumerate(reader):
            out[i] = [float(x) for x in row[1:]]
    return out
