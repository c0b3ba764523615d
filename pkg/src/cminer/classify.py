"""Supervised text classification with an active-learning coding loop.

The reference classifier is multinomial Naive Bayes with add-one smoothing:
deterministic, closed-form, and dependency-free. Query strategies cover the
standard uncertainty family (entropy, margin, least confidence) plus a
seeded random baseline.
"""
from __future__ import annotations

import datetime
import json
from dataclasses import dataclass, field

import numpy as np

from ._kernels import KERNELS, rng_state
from .corpus import Document
from .pipeline import DocTermMatrix, document_tokens

ENTROPY = "ENTROPY"
MARGIN = "MARGIN"
LEAST_CONFIDENCE = "LEAST_CONFIDENCE"
RANDOM = "RANDOM"
STRATEGIES = (ENTROPY, MARGIN, LEAST_CONFIDENCE, RANDOM)


@dataclass(frozen=True)
class Code:
    id: str
    name: str
    description: str = ""


@dataclass(frozen=True)
class Codebook:
    codes: tuple[Code, ...]

    def __post_init__(self):
        ids = [c.id for c in self.codes]
        if len(set(ids)) != len(ids):
            raise ValueError("code ids must be unique")

    def __len__(self):
        return len(self.codes)

    def __contains__(self, code_id: str) -> bool:
        return any(c.id == code_id for c in self.codes)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(c.id for c in self.codes)

    @classmethod
    def from_ids(cls, ids) -> "Codebook":
        return cls(codes=tuple(Code(id=i, name=i) for i in ids))


@dataclass
class NaiveBayesModel:
    """Log priors and add-one-smoothed log term likelihoods, in codebook order."""

    codebook: Codebook
    log_prior: np.ndarray
    log_likelihood: np.ndarray
    dtm: DocTermMatrix

    def posterior_from_counts(self, counts: dict[int, int]) -> np.ndarray:
        scores = self.log_prior.copy()
        for idx, count in counts.items():
            scores += count * self.log_likelihood[:, idx]
        scores -= scores.max()
        post = np.exp(scores)
        return post / post.sum()


@dataclass(frozen=True)
class LabelRecord:
    code: str
    author: str
    timestamp: str


@dataclass
class EvalReport:
    """Cross-validated per-class and averaged precision/recall/F1."""

    codes: tuple[str, ...]
    confusion: np.ndarray          # rows gold, cols predicted
    per_class: dict[str, tuple[float, float, float]]
    macro: tuple[float, float, float]
    micro: tuple[float, float, float]
    folds: int
    seed: int

    def to_json(self) -> str:
        return json.dumps({
            "codes": list(self.codes),
            "confusion": self.confusion.astype(int).tolist(),
            "per_class": {c: {"precision": p, "recall": r, "f1": f}
                          for c, (p, r, f) in self.per_class.items()},
            "macro": {"precision": self.macro[0], "recall": self.macro[1],
                      "f1": self.macro[2]},
            "micro": {"precision": self.micro[0], "recall": self.micro[1],
                      "f1": self.micro[2]},
            "folds": self.folds,
            "seed": self.seed,
        }, indent=2)

    def to_csv(self) -> str:
        lines = ["code,precision,recall,f1"]
        for c in self.codes:
            p, r, f = self.per_class[c]
            lines.append(f"{c},{p:.6f},{r:.6f},{f:.6f}")
        lines.append(f"macro,{self.macro[0]:.6f},{self.macro[1]:.6f},{self.macro[2]:.6f}")
        lines.append(f"micro,{self.micro[0]:.6f},{self.micro[1]:.6f},{self.micro[2]:.6f}")
        return "\n".join(lines) + "\n"


@dataclass
class CodingSession:
    """Single-coder labeling state over one corpus snapshot."""

    codebook: Codebook
    strategy: str
    seed: int
    queue: list[str]
    labeled: dict[str, LabelRecord] = field(default_factory=dict)
    classifier: NaiveBayesModel | None = None
    metrics_history: list[EvalReport] = field(default_factory=list)
    retrain_needed: bool = False
    model_version: int = 0
    _rng: np.ndarray = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self._rng is None:
            self._rng = rng_state(self.seed)


def train(dtm: DocTermMatrix, labeled: dict[str, str],
          codebook: Codebook | None = None) -> NaiveBayesModel:
    """Fit multinomial Naive Bayes with Laplace smoothing over the matrix
    vocabulary. Every codebook code needs at least one labeled document."""
    if codebook is None:
        codebook = Codebook.from_ids(sorted(set(labeled.values())))
    if len(codebook) < 2:
        raise ValueError("training needs at least 2 codes")
    empty = [c for c in codebook.ids
             if not any(code == c for code in labeled.values())]
    if empty:
        raise ValueError(f"codes with zero labeled documents: {empty}")
    unknown = sorted(set(labeled.values()) - set(codebook.ids))
    if unknown:
        raise ValueError(f"labels outside the codebook: {unknown}")

    C = len(codebook)
    V = len(dtm.vocab)
    class_of = {c: i for i, c in enumerate(codebook.ids)}
    doc_counts = np.zeros(C)
    term_counts = np.zeros((C, V))
    for doc_id, code in labeled.items():
        ci = class_of[code]
        doc_counts[ci] += 1
        for idx, count in dtm.rows[dtm.row_index(doc_id)].items():
            term_counts[ci, idx] += count

    log_prior = np.log(doc_counts / doc_counts.sum())
    log_likelihood = np.log((term_counts + 1.0)
                            / (term_counts.sum(axis=1, keepdims=True) + V))
    return NaiveBayesModel(codebook=codebook, log_prior=log_prior,
                           log_likelihood=log_likelihood, dtm=dtm)


def predict(model: NaiveBayesModel, doc: Document) -> tuple[str, dict[str, float]]:
    """Posterior over codes for one document; argmax with codebook-order
    tie-break. A document with no in-vocabulary tokens falls back to the
    class priors."""
    vocab = model.dtm.vocab
    counts: dict[int, int] = {}
    for tok in document_tokens(doc, vocab.params):
        idx = vocab.index.get(tok.surface)
        if idx is not None:
            counts[idx] = counts.get(idx, 0) + 1
    post = model.posterior_from_counts(counts)
    best = int(np.argmax(post))
    return model.codebook.ids[best], {c: float(post[i])
                                      for i, c in enumerate(model.codebook.ids)}


def _entropy(p: np.ndarray) -> float:
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def _margin(p: np.ndarray) -> float:
    top = np.sort(p)[::-1]
    return float(top[0] - top[1]) if p.shape[0] > 1 else 1.0


def select_query(strategy: str, candidates: list[str],
                 posteriors: dict[str, np.ndarray], rng) -> str:
    """Pick the next document to label; ties resolve to the smallest id."""
    ordered = sorted(candidates)
    if strategy == RANDOM:
        with np.errstate(over="ignore"):
            u = KERNELS["rng_next"](rng)
        return ordered[min(int(u * len(ordered)), len(ordered) - 1)]

    def criterion(doc_id: str) -> float:
        p = np.asarray(posteriors[doc_id], dtype=float)
        if strategy == ENTROPY:
            return -_entropy(p)           # minimized: most entropy first
        if strategy == MARGIN:
            return _margin(p)
        return float(p.max())             # LEAST_CONFIDENCE

    best = ordered[0]
    best_val = criterion(best)
    for doc_id in ordered[1:]:
        val = criterion(doc_id)
        if val < best_val:
            best, best_val = doc_id, val
    return best


def next_query(session: CodingSession,
               posteriors: dict[str, np.ndarray]) -> str:
    """Next document for the coder, by the session's query strategy."""
    if not session.queue:
        raise ValueError("query queue is empty")
    candidates = [d for d in session.queue if d in posteriors]
    if session.strategy != RANDOM and not candidates:
        raise ValueError("no posteriors for any queued document")
    if session.strategy == RANDOM:
        candidates = list(session.queue)
    return select_query(session.strategy, candidates, posteriors, session._rng)


def record_label(session: CodingSession, doc_id: str, code_id: str,
                 author: str = "", overwrite: bool = False,
                 timestamp: str | None = None) -> CodingSession:
    """Move a document from the queue into the labeled set."""
    if code_id not in session.codebook:
        raise ValueError(f"unknown code {code_id!r}")
    if doc_id in session.labeled and not overwrite:
        raise ValueError(f"{doc_id!r} already labeled; pass overwrite=True")
    if doc_id not in session.queue and doc_id not in session.labeled:
        raise ValueError(f"unknown document {doc_id!r}")
    if timestamp is None:
        timestamp = datetime.datetime.now(datetime.timezone.utc).isoformat()
    if doc_id in session.queue:
        session.queue.remove(doc_id)
    session.labeled[doc_id] = LabelRecord(code=code_id, author=author,
                                          timestamp=timestamp)
    session.retrain_needed = True
    return session


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    p = tp / (tp + fp) if tp + fp > 0 else 0.0
    r = tp / (tp + fn) if tp + fn > 0 else 0.0
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f


def report_from_confusion(confusion: np.ndarray, codes: tuple[str, ...],
                          folds: int = 0, seed: int = 0) -> EvalReport:
    """Precision/recall/F1 from an aggregated confusion matrix, with the
    stated zero-denominator conventions."""
    per_class = {}
    tp_total = fp_total = fn_total = 0
    for i, code in enumerate(codes):
        tp = int(confusion[i, i])
        fp = int(confusion[:, i].sum() - tp)
        fn = int(confusion[i, :].sum() - tp)
        per_class[code] = _prf(tp, fp, fn)
        tp_total += tp
        fp_total += fp
        fn_total += fn
    macro = tuple(float(np.mean([per_class[c][j] for c in codes]))
                  for j in range(3))
    micro = _prf(tp_total, fp_total, fn_total)
    return EvalReport(codes=codes, confusion=confusion, per_class=per_class,
                      macro=macro, micro=micro, folds=folds, seed=seed)


def evaluate(dtm: DocTermMatrix, labeled: dict[str, str], folds: int,
             seed: int, codebook: Codebook | None = None) -> EvalReport:
    """Stratified k-fold cross-validation of the Naive Bayes classifier.

    Stratification is keyed on sorted document ids, so the report does not
    depend on corpus order.
    """
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if codebook is None:
        codebook = Codebook.from_ids(sorted(set(labeled.values())))
    by_class: dict[str, list[str]] = {c: [] for c in codebook.ids}
    for doc_id in sorted(labeled):
        by_class[labeled[doc_id]].append(doc_id)
    too_small = [c for c, ids in by_class.items() if len(ids) < folds]
    if too_small:
        raise ValueError(
            f"classes with fewer than {folds} labeled documents: {too_small}")

    rng = np.random.default_rng(seed)
    fold_of: dict[str, int] = {}
    for code in codebook.ids:
        ids = list(by_class[code])
        rng.shuffle(ids)
        for i, doc_id in enumerate(ids):
            fold_of[doc_id] = i % folds

    class_index = {c: i for i, c in enumerate(codebook.ids)}
    confusion = np.zeros((len(codebook), len(codebook)))
    for f in range(folds):
        train_labels = {d: c for d, c in labeled.items() if fold_of[d] != f}
        model = train(dtm, train_labels, codebook)
        for doc_id in sorted(labeled):
            if fold_of[doc_id] != f:
                continue
            post = model.posterior_from_counts(dtm.rows[dtm.row_index(doc_id)])
            pred = int(np.argmax(post))
            confusion[class_index[labeled[doc_id]], pred] += 1
    return report_from_confusion(confusion, codebook.ids, folds=folds, seed=seed)


@dataclass
class SimulationResult:
    strategy: str
    seed: int
    holdout: tuple[str, ...]
    curve: list[tuple[int, float]]    # (labels used, holdout accuracy)

    def labels_to_accuracy(self, target: float) -> int | None:
        for n, acc in self.curve:
            if acc >= target:
                return n
        return None


def simulate_active_learning(dtm: DocTermMatrix, gold: dict[str, str],
                             strategy: str, budget: int, seed: int,
                             batch: int = 1,
                             codebook: Codebook | None = None) -> SimulationResult:
    """Replay an active-learning run against known labels.

    Starts from one seed label per class (first pool document in id order),
    then iterates query, reveal, retrain; accuracy is measured on a fixed
    30% stratified holdout drawn deterministically from ``seed``.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    if batch < 1:
        raise ValueError("batch must be >= 1")
    missing = [d for d in dtm.doc_ids if d not in gold]
    if missing:
        raise ValueError(f"gold labels missing for {len(missing)} documents")
    if codebook is None:
        codebook = Codebook.from_ids(sorted(set(gold.values())))

    by_class: dict[str, list[str]] = {c: [] for c in codebook.ids}
    for doc_id in sorted(dtm.doc_ids):
        by_class[gold[doc_id]].append(doc_id)

    rng = np.random.default_rng(seed)
    holdout: set[str] = set()
    for code in codebook.ids:
        ids = list(by_class[code])
        rng.shuffle(ids)
        n_hold = max(1, int(round(0.3 * len(ids))))
        holdout.update(ids[:n_hold])

    pool = [d for d in sorted(dtm.doc_ids) if d not in holdout]
    labeled: dict[str, str] = {}
    for code in codebook.ids:
        first = next((d for d in pool if gold[d] == code), None)
        if first is None:
            raise ValueError(f"no pool document for code {code!r}")
        labeled[first] = code
    if budget > len(pool) - len(labeled):
        raise ValueError("budget exhausts the unlabeled pool")

    holdout_sorted = tuple(sorted(holdout))
    query_rng = rng_state(seed)

    def holdout_accuracy(model: NaiveBayesModel) -> float:
        hits = 0
        for doc_id in holdout_sorted:
            post = model.posterior_from_counts(dtm.rows[dtm.row_index(doc_id)])
            if model.codebook.ids[int(np.argmax(post))] == gold[doc_id]:
                hits += 1
        return hits / len(holdout_sorted)

    model = train(dtm, labeled, codebook)
    curve = [(len(labeled), holdout_accuracy(model))]
    spent = 0
    while spent < budget:
        take = min(batch, budget - spent)
        for _ in range(take):
            candidates = [d for d in pool if d not in labeled]
            posteriors = {
                d: model.posterior_from_counts(dtm.rows[dtm.row_index(d)])
                for d in candidates}
            pick = select_query(strategy, candidates, posteriors, query_rng)
            labeled[pick] = gold[pick]
        spent += take
        model = train(dtm, labeled, codebook)
        curve.append((len(labeled), holdout_accuracy(model)))
    return SimulationResult(strategy=strategy, seed=seed,
                            holdout=holdout_sorted, curve=curve)
