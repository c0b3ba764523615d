"""HTTP/JSON service: projects, corpus snapshots, analyses as asynchronous
jobs, coding sessions and exports, persisted as a plain directory tree.

Persistence layout under the data directory::

    projects/<pid>/project.json
    projects/<pid>/corpus/<version>/documents.csv [+ entities.json]
    projects/<pid>/jobs/<jid>.json
    projects/<pid>/results/<jid>/payload.json [+ artifact files]
    projects/<pid>/models/<mid>/   (topic model persistence format)
    projects/<pid>/sessions/<sid>.json

Everything is inspectable and diffable; no database. Corpus snapshots are
immutable: an import creates a new version. On restart, jobs that were
RUNNING are marked FAILED with reason "interrupted".
"""
from __future__ import annotations

import json
import os
import threading
from collections import deque
from dataclasses import replace
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from . import classify, cooccurrence, interchange, pipeline, topics
from .corpus import Document, ImportMapping, deduplicate, import_csv, tag_entities
from .pipeline import AnalysisParams, build_dtm, build_vocabulary
from .topics import FitCancelled, LdaConfig

JOB_KINDS = ("IMPORT", "DEDUP", "COOC", "LDA", "EVAL", "SIMULATE", "EXPORT")
WRITER_KINDS = {"IMPORT"}

QUEUED = "QUEUED"
RUNNING = "RUNNING"
DONE = "DONE"
FAILED = "FAILED"
CANCELLED = "CANCELLED"


def _atomic_json(path: Path, obj) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")
    tmp.replace(path)


class Store:
    """Directory-tree persistence with serialized writers per project."""

    def __init__(self, root):
        self.root = Path(root)
        (self.root / "projects").mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()

    def project_dir(self, pid: str) -> Path:
        d = self.root / "projects" / pid
        if not d.exists():
            raise HTTPException(404, f"project {pid} not found")
        return d

    def create_project(self, name: str) -> str:
        with self._lock:
            existing = sorted((self.root / "projects").iterdir()) \
                if (self.root / "projects").exists() else []
            pid = f"p{len(existing) + 1:04d}"
            d = self.root / "projects" / pid
            for sub in ("corpus", "jobs", "results", "models", "sessions"):
                (d / sub).mkdir(parents=True)
            _atomic_json(d / "project.json",
                         {"id": pid, "name": name, "corpus_versions": []})
            return pid

    def project_meta(self, pid: str) -> dict:
        return json.loads((self.project_dir(pid) / "project.json")
                          .read_text(encoding="utf-8"))

    def save_corpus(self, pid: str, docs: list[Document]) -> str:
        with self._lock:
            meta = self.project_meta(pid)
            version = f"v{len(meta['corpus_versions']) + 1:04d}"
            vdir = self.project_dir(pid) / "corpus" / version
            vdir.mkdir(parents=True)
            interchange.export_corpus_csv(docs, vdir / "documents.csv")
            if any(d.entity_tags for d in docs):
                interchange.export_entities_json(docs, vdir / "entities.json")
            meta["corpus_versions"].append(version)
            _atomic_json(self.project_dir(pid) / "project.json", meta)
            return version

    def load_corpus(self, pid: str, version: str | None = None) -> tuple[list[Document], str]:
        meta = self.project_meta(pid)
        if not meta["corpus_versions"]:
            raise HTTPException(404, f"project {pid} has no corpus")
        version = version or meta["corpus_versions"][-1]
        vdir = self.project_dir(pid) / "corpus" / version
        if not vdir.exists():
            raise HTTPException(404, f"corpus version {version} not found")
        csv_path = vdir / "documents.csv"
        docs, _ = import_csv(csv_path, interchange.corpus_csv_mapping(csv_path))
        if (vdir / "entities.json").exists():
            docs = interchange.load_entities_json(docs, vdir / "entities.json")
        return docs, version


class JobManager:
    """Bounded worker pool; FIFO start order per project, one running
    writer job per project at a time."""

    def __init__(self, store: Store, app_state, max_workers: int = 2):
        self.store = store
        self.state = app_state
        self.cv = threading.Condition()
        self.jobs: dict[str, dict] = {}
        self.queues: dict[str, deque] = {}
        self.running_writers: set[str] = set()
        self.cancel_flags: dict[str, threading.Event] = {}
        self._seq = 0
        self._stop = False
        self.workers = [threading.Thread(target=self._worker, daemon=True)
                        for _ in range(max_workers)]
        for w in self.workers:
            w.start()

    def recover(self):
        """Mark jobs left over from a previous process as interrupted."""
        projects_dir = self.store.root / "projects"
        for pdir in sorted(projects_dir.iterdir()) if projects_dir.exists() else []:
            for jfile in sorted((pdir / "jobs").glob("*.json")):
                job = json.loads(jfile.read_text(encoding="utf-8"))
                if job["status"] == RUNNING:
                    job.update(status=FAILED, error="interrupted")
                    _atomic_json(jfile, job)
                elif job["status"] == QUEUED:
                    job.update(status=CANCELLED, error="interrupted before start")
                    _atomic_json(jfile, job)

    def submit(self, pid: str, kind: str, params: dict) -> str:
        with self.cv:
            self._seq += 1
            jid = f"j{self._seq:05d}"
            job = {"id": jid, "project": pid, "kind": kind, "status": QUEUED,
                   "progress": 0.0, "params": params, "result_id": None,
                   "error": None}
            self.jobs[jid] = job
            self._persist(job)
            self.queues.setdefault(pid, deque()).append(jid)
            self.cv.notify_all()
            return jid

    def get(self, pid: str, jid: str) -> dict:
        with self.cv:
            job = self.jobs.get(jid)
        if job is None:
            jfile = self.store.project_dir(pid) / "jobs" / f"{jid}.json"
            if not jfile.exists():
                raise HTTPException(404, f"job {jid} not found")
            return json.loads(jfile.read_text(encoding="utf-8"))
        if job["project"] != pid:
            raise HTTPException(404, f"job {jid} not found")
        return dict(job)

    def cancel(self, pid: str, jid: str) -> dict:
        with self.cv:
            job = self.jobs.get(jid)
            if job is None or job["project"] != pid:
                raise HTTPException(404, f"job {jid} not found")
            if job["status"] == QUEUED:
                self.queues[pid].remove(jid)
                job["status"] = CANCELLED
                self._persist(job)
            elif job["status"] == RUNNING:
                self.cancel_flags[jid].set()
            self.cv.notify_all()
            return dict(job)

    def _eligible(self) -> str | None:
        for pid, queue in self.queues.items():
            if not queue:
                continue
            jid = queue[0]
            kind = self.jobs[jid]["kind"]
            if kind in WRITER_KINDS and pid in self.running_writers:
                continue
            return jid
        return None

    def _worker(self):
        while True:
            with self.cv:
                jid = self._eligible()
                while jid is None and not self._stop:
                    self.cv.wait(timeout=0.5)
                    jid = self._eligible()
                if self._stop:
                    return
                job = self.jobs[jid]
                self.queues[job["project"]].popleft()
                if job["kind"] in WRITER_KINDS:
                    self.running_writers.add(job["project"])
                job["status"] = RUNNING
                self.cancel_flags[jid] = threading.Event()
                self._persist(job)
            try:
                payload = run_job(self.state, job, self.cancel_flags[jid])
                with self.cv:
                    job["status"] = DONE
                    job["progress"] = 1.0
                    job["result_id"] = jid
            except FitCancelled:
                with self.cv:
                    job["status"] = CANCELLED
            except Exception as exc:  # job errors become FAILED, not 500s
                with self.cv:
                    job["status"] = FAILED
                    job["error"] = str(exc)
            finally:
                with self.cv:
                    self.running_writers.discard(job["project"])
                    self._persist(job)
                    self.cv.notify_all()

    def _persist(self, job: dict):
        jdir = self.store.root / "projects" / job["project"] / "jobs"
        _atomic_json(jdir / f"{job['id']}.json", job)

    def update_progress(self, job: dict, fraction: float):
        job["progress"] = round(fraction, 4)

    def stop(self):
        with self.cv:
            self._stop = True
            self.cv.notify_all()


# --------------------------------------------------------------------------
# request models

class ProjectCreate(BaseModel):
    name: str


class MappingModel(BaseModel):
    columns: dict[str, str]
    date_format: str = "%Y-%m-%d"
    delimiter: str = ","


class ImportRequest(BaseModel):
    csv: str
    mapping: MappingModel
    gazetteer: dict[str, str] | None = None


class JobRequest(BaseModel):
    kind: str
    params: dict = Field(default_factory=dict)


class CodeModel(BaseModel):
    id: str
    name: str = ""
    description: str = ""


class SessionCreate(BaseModel):
    codebook: list[CodeModel]
    strategy: str = "ENTROPY"
    seed: int = 1
    corpus_version: str | None = None
    analysis_params: dict = Field(default_factory=dict)


class LabelRequest(BaseModel):
    doc: str
    code: str
    author: str = ""
    overwrite: bool = False
    model_version: int | None = None


class TopicLabelRequest(BaseModel):
    label: str
    author: str = ""


class ExportRequest(BaseModel):
    corpus_version: str | None = None
    model: str | None = None
    session: str | None = None
    result: str | None = None
    name: str = "export"
    seed: int = 0


def _validation_error(msg: str, *paths: str):
    raise HTTPException(422, detail=[{"loc": ["body", "params"] + list(paths),
                                      "msg": msg}])


def _analysis_params(raw: dict) -> AnalysisParams:
    try:
        if "blacklist" in raw:
            raw = dict(raw, blacklist=frozenset(raw["blacklist"]))
        if raw.get("whitelist") is not None:
            raw = dict(raw, whitelist=frozenset(raw["whitelist"]))
        return AnalysisParams(**raw)
    except (TypeError, ValueError) as exc:
        _validation_error(str(exc), "analysis_params")


def validate_job_params(kind: str, params: dict) -> None:
    if kind not in JOB_KINDS:
        _validation_error(f"unknown job kind {kind!r}", "kind")
    if kind == "IMPORT":
        if "csv" not in params or "mapping" not in params:
            _validation_error("IMPORT needs csv and mapping", "csv")
        try:
            ImportMapping(columns=params["mapping"].get("columns", {}),
                          date_format=params["mapping"].get("date_format", "%Y-%m-%d"),
                          delimiter=params["mapping"].get("delimiter", ","))
        except ValueError as exc:
            _validation_error(str(exc), "mapping")
    elif kind == "DEDUP":
        t = params.get("threshold", 0.9)
        if not (0 < t <= 1):
            _validation_error("threshold must be in (0, 1]", "threshold")
    elif kind == "COOC":
        _analysis_params(params.get("analysis_params", {}))
        if params.get("unit", "DOCUMENT") not in cooccurrence.CONTEXT_UNITS:
            _validation_error("unit must be SENTENCE or DOCUMENT", "unit")
        if params.get("measure", "DICE") not in cooccurrence.MEASURES:
            _validation_error("measure must be DICE, PMI or LOGLIK", "measure")
    elif kind == "LDA":
        _analysis_params(params.get("analysis_params", {}))
        try:
            LdaConfig(k=params.get("k", 10), alpha=params.get("alpha"),
                      beta=params.get("beta", 0.01),
                      iterations=params.get("iterations", 1000),
                      burn_in=params.get("burn_in", 500),
                      seed=params.get("seed", 1))
        except (TypeError, ValueError) as exc:
            _validation_error(str(exc), "lda")
    elif kind in ("EVAL", "SIMULATE"):
        _analysis_params(params.get("analysis_params", {}))
        key = "labels" if kind == "EVAL" else "gold"
        if not isinstance(params.get(key), dict) or not params.get(key):
            _validation_error(f"{kind} needs a non-empty {key} map", key)
        if kind == "SIMULATE" and params.get("strategy", "ENTROPY") not in classify.STRATEGIES:
            _validation_error("unknown strategy", "strategy")
    elif kind == "EXPORT":
        if "what" not in params:
            _validation_error("EXPORT needs 'what'", "what")


# --------------------------------------------------------------------------
# job execution

def _entity_kind_blacklist(docs, params: dict, analysis: AnalysisParams) -> AnalysisParams:
    kinds = params.get("blacklist_entity_kinds")
    if not kinds:
        return analysis
    extra = pipeline.blacklist_from_entities(docs, set(kinds))
    return replace(analysis, blacklist=frozenset(analysis.blacklist | extra))


def run_job(state, job: dict, cancel_flag: threading.Event):
    store: Store = state.store
    pid = job["project"]
    params = job["params"]
    kind = job["kind"]
    result_dir = store.project_dir(pid) / "results" / job["id"]
    result_dir.mkdir(parents=True, exist_ok=True)

    if kind == "IMPORT":
        m = params["mapping"]
        mapping = ImportMapping(columns=m["columns"],
                                date_format=m.get("date_format", "%Y-%m-%d"),
                                delimiter=m.get("delimiter", ","))
        tmp = result_dir / "upload.csv"
        tmp.write_text(params["csv"], encoding="utf-8")
        docs, report = import_csv(tmp, mapping)
        if params.get("gazetteer"):
            docs = [tag_entities(d, params["gazetteer"]) for d in docs]
        version = store.save_corpus(pid, docs)
        payload = {"kind": kind, "corpus_version": version,
                   "report": json.loads(report.to_json())}

    elif kind == "DEDUP":
        docs, version = store.load_corpus(pid, params.get("corpus_version"))
        groups = deduplicate(docs, params.get("threshold", 0.9))
        payload = {"kind": kind, "corpus_version": version,
                   "groups": [{"representative": g.representative,
                               "members": list(g.members),
                               "similarity": g.similarity} for g in groups]}

    elif kind == "COOC":
        docs, version = store.load_corpus(pid, params.get("corpus_version"))
        analysis = _analysis_params(params.get("analysis_params", {}))
        analysis = _entity_kind_blacklist(docs, params, analysis)
        vocab = build_vocabulary(docs, analysis)
        result = cooccurrence.cooccurrences(
            docs, vocab, params.get("unit", "DOCUMENT"),
            params.get("measure", "DICE"),
            params.get("min_pair_count", 1), params.get("top_n"))
        interchange.export_cooc_csv(result, result_dir / "cooc.csv")
        payload = {"kind": kind, "corpus_version": version,
                   "measure": result.measure, "unit": result.unit,
                   "artifact": "cooc.csv",
                   "pairs": [{"a": p.a, "b": p.b, "n_a": p.counts.n_a,
                              "n_b": p.counts.n_b, "n_ab": p.counts.n_ab,
                              "n": p.counts.n, "score": p.score}
                             for p in result.pairs]}

    elif kind == "LDA":
        docs, version = store.load_corpus(pid, params.get("corpus_version"))
        analysis = _analysis_params(params.get("analysis_params", {}))
        analysis = _entity_kind_blacklist(docs, params, analysis)
        vocab = build_vocabulary(docs, analysis)
        dtm = build_dtm(docs, vocab)
        config = LdaConfig(k=params.get("k", 10), alpha=params.get("alpha"),
                           beta=params.get("beta", 0.01),
                           iterations=params.get("iterations", 1000),
                           burn_in=params.get("burn_in", 500),
                           seed=params.get("seed", 1))

        def progress(sweep, total, ll):
            state.jobs.update_progress(job, sweep / total)

        model = topics.fit_lda_restarts(dtm, config,
                                        restarts=params.get("restarts", 1),
                                        progress=progress,
                                        cancel=cancel_flag.is_set)
        model_dir = store.project_dir(pid) / "models" / job["id"]
        topics.save_model(model, model_dir)
        summary = {str(k): [w for w, _ in topics.top_words(model, k, 10)]
                   for k in range(config.k)}
        payload = {"kind": kind, "corpus_version": version,
                   "model": job["id"], "k": config.k, "seed": config.seed,
                   "analysis_params": json.loads(analysis.to_json()),
                   "top_words": summary,
                   "final_log_likelihood": float(model.log_likelihood_trace[-1])}

    elif kind == "EVAL":
        docs, version = store.load_corpus(pid, params.get("corpus_version"))
        analysis = _analysis_params(params.get("analysis_params", {}))
        vocab = build_vocabulary(docs, analysis)
        dtm = build_dtm(docs, vocab)
        report = classify.evaluate(dtm, params["labels"],
                                   folds=params.get("folds", 5),
                                   seed=params.get("seed", 1))
        payload = {"kind": kind, "corpus_version": version,
                   "report": json.loads(report.to_json())}

    elif kind == "SIMULATE":
        docs, version = store.load_corpus(pid, params.get("corpus_version"))
        analysis = _analysis_params(params.get("analysis_params", {}))
        vocab = build_vocabulary(docs, analysis)
        dtm = build_dtm(docs, vocab)
        sim = classify.simulate_active_learning(
            dtm, params["gold"], params.get("strategy", "ENTROPY"),
            budget=params.get("budget", 10), seed=params.get("seed", 1))
        payload = {"kind": kind, "corpus_version": version,
                   "strategy": sim.strategy, "seed": sim.seed,
                   "curve": [{"labels": n, "accuracy": a} for n, a in sim.curve]}

    else:  # EXPORT
        payload = run_export(state, pid, params, result_dir)

    _atomic_json(result_dir / "payload.json", payload)
    return payload


def run_export(state, pid: str, params: dict, out_dir: Path) -> dict:
    store: Store = state.store
    what = params["what"]
    if what == "corpus_csv":
        docs, version = store.load_corpus(pid, params.get("corpus_version"))
        interchange.export_corpus_csv(docs, out_dir / "corpus.csv")
        return {"kind": "EXPORT", "what": what, "corpus_version": version,
                "artifact": "corpus.csv"}
    if what == "qdpx":
        docs, version = store.load_corpus(pid, params.get("corpus_version"))
        session = state.sessions.get(params.get("session"))
        if session is None:
            raise ValueError("qdpx export needs an existing session")
        project = interchange.qdpx_from_session(
            params.get("name", "project"), docs, session["session"],
            seed=params.get("seed", 0))
        interchange.export_qdpx(project, out_dir / "project.qdpx")
        return {"kind": "EXPORT", "what": what, "artifact": "project.qdpx"}
    if what in ("theta_csv", "phi_csv"):
        if not params.get("model"):
            raise ValueError(f"{what} export needs a model id")
        model = load_project_model(state, pid, params["model"])
        name = "theta.csv" if what == "theta_csv" else "phi.csv"
        fn = (interchange.export_theta_csv if what == "theta_csv"
              else interchange.export_phi_csv)
        fn(model, out_dir / name)
        return {"kind": "EXPORT", "what": what, "artifact": name}
    if what == "labels_csv":
        entry = state.sessions.get(params.get("session"))
        if entry is None:
            raise ValueError("labels export needs an existing session")
        interchange.export_labels_csv(entry["session"], out_dir / "labels.csv")
        return {"kind": "EXPORT", "what": what, "artifact": "labels.csv"}
    raise ValueError(f"unknown export {what!r}")


def load_project_model(state, pid: str, mid: str) -> topics.TopicModel:
    key = (pid, mid)
    with state.model_lock:
        if key in state.models:
            return state.models[key]
    mdir = state.store.project_dir(pid) / "models" / mid
    if not mdir.exists():
        raise HTTPException(404, f"model {mid} not found")
    model = topics.load_model(mdir)
    # rebuild the fitting matrix so highlighting has token spans
    payload_file = state.store.project_dir(pid) / "results" / mid / "payload.json"
    if payload_file.exists():
        payload = json.loads(payload_file.read_text(encoding="utf-8"))
        docs, _ = state.store.load_corpus(pid, payload.get("corpus_version"))
        model.dtm = build_dtm(docs, model.vocab)
    with state.model_lock:
        state.models[key] = model
    return model


# --------------------------------------------------------------------------
# sessions

def _session_dtm(state, pid: str, spec: dict):
    docs, version = state.store.load_corpus(pid, spec.get("corpus_version"))
    analysis = _analysis_params(spec.get("analysis_params", {}))
    vocab = build_vocabulary(docs, analysis)
    return docs, build_dtm(docs, vocab), version


def _persist_session(state, sid: str):
    entry = state.sessions[sid]
    session: classify.CodingSession = entry["session"]
    data = {
        "id": sid, "project": entry["project"],
        "corpus_version": entry["corpus_version"],
        "analysis_params": entry["analysis_params"],
        "strategy": session.strategy, "seed": session.seed,
        "codebook": [{"id": c.id, "name": c.name, "description": c.description}
                     for c in session.codebook.codes],
        "queue": list(session.queue),
        "labeled": {d: {"code": r.code, "author": r.author,
                        "timestamp": r.timestamp}
                    for d, r in sorted(session.labeled.items())},
        "model_version": session.model_version,
    }
    sdir = state.store.project_dir(entry["project"]) / "sessions"
    _atomic_json(sdir / f"{sid}.json", data)


def _maybe_retrain(entry) -> None:
    session: classify.CodingSession = entry["session"]
    codes_seen = {r.code for r in session.labeled.values()}
    if len(codes_seen) < len(session.codebook):
        return
    session.classifier = classify.train(entry["dtm"],
                                        {d: r.code for d, r in session.labeled.items()},
                                        session.codebook)
    session.model_version += 1
    session.retrain_needed = False


# --------------------------------------------------------------------------
# app

class _State:
    pass


def create_app(data_dir=None, max_workers: int = 2) -> FastAPI:
    data_dir = data_dir or os.environ.get("CM_DATA_DIR", "./cm-data")
    app = FastAPI(title="cminer service", version="0.1.0")
    state = _State()
    state.store = Store(data_dir)
    state.jobs = JobManager(state.store, state, max_workers=max_workers)
    state.jobs.recover()
    state.sessions = {}
    state.models = {}
    state.model_lock = threading.Lock()
    state.session_seq = 0
    app.state.cm = state

    @app.post("/projects")
    def create_project(req: ProjectCreate):
        pid = state.store.create_project(req.name)
        return {"id": pid, "name": req.name}

    @app.get("/projects/{pid}")
    def get_project(pid: str):
        return state.store.project_meta(pid)

    @app.post("/projects/{pid}/import")
    def import_corpus(pid: str, req: ImportRequest):
        state.store.project_dir(pid)
        tmpdir = state.store.project_dir(pid) / "corpus"
        tmp = tmpdir / ".upload.csv"
        tmp.write_text(req.csv, encoding="utf-8")
        try:
            mapping = ImportMapping(columns=req.mapping.columns,
                                    date_format=req.mapping.date_format,
                                    delimiter=req.mapping.delimiter)
            docs, report = import_csv(tmp, mapping)
        except ValueError as exc:
            raise HTTPException(422, detail=[{"loc": ["body", "mapping"],
                                              "msg": str(exc)}])
        finally:
            tmp.unlink(missing_ok=True)
        if req.gazetteer:
            docs = [tag_entities(d, req.gazetteer) for d in docs]
        version = state.store.save_corpus(pid, docs)
        return {"corpus_version": version,
                "report": json.loads(report.to_json())}

    @app.get("/projects/{pid}/documents/{doc_id}")
    def get_document(pid: str, doc_id: str, version: str | None = None):
        docs, version = state.store.load_corpus(pid, version)
        for doc in docs:
            if doc.id == doc_id:
                return {"id": doc.id, "title": doc.title, "body": doc.body,
                        "date": doc.date.isoformat() if doc.date else None,
                        "metadata": doc.metadata,
                        "entity_tags": [{"start": s.start, "end": s.end,
                                         "kind": s.kind, "surface": s.surface}
                                        for s in doc.entity_tags],
                        "corpus_version": version}
        raise HTTPException(404, f"document {doc_id} not found")

    @app.post("/projects/{pid}/jobs")
    def submit_job(pid: str, req: JobRequest):
        state.store.project_dir(pid)
        validate_job_params(req.kind, req.params)
        jid = state.jobs.submit(pid, req.kind, req.params)
        return {"id": jid, "status": QUEUED}

    @app.get("/projects/{pid}/jobs/{jid}")
    def get_job(pid: str, jid: str):
        job = state.jobs.get(pid, jid)
        return {k: job[k] for k in ("id", "kind", "status", "progress",
                                    "result_id", "error")}

    @app.delete("/projects/{pid}/jobs/{jid}")
    def cancel_job(pid: str, jid: str):
        job = state.jobs.cancel(pid, jid)
        return {"id": job["id"], "status": job["status"]}

    @app.get("/projects/{pid}/results/{rid}")
    def get_result(pid: str, rid: str):
        job = state.jobs.get(pid, rid)
        if job["status"] != DONE:
            raise HTTPException(409, f"job {rid} is {job['status']}, not DONE")
        payload_file = state.store.project_dir(pid) / "results" / rid / "payload.json"
        if not payload_file.exists():
            raise HTTPException(404, f"result {rid} not found")
        return json.loads(payload_file.read_text(encoding="utf-8"))

    @app.get("/projects/{pid}/results/{rid}/files/{name}")
    def get_result_file(pid: str, rid: str, name: str):
        path = state.store.project_dir(pid) / "results" / rid / name
        if not path.exists() or not path.is_file() or "/" in name:
            raise HTTPException(404, f"artifact {name} not found")
        media = "application/zip" if name.endswith((".qdpx", ".zip")) else "text/csv"
        return Response(content=path.read_bytes(), media_type=media)

    @app.post("/projects/{pid}/sessions")
    def create_session(pid: str, req: SessionCreate):
        if req.strategy not in classify.STRATEGIES:
            raise HTTPException(422, detail=[{"loc": ["body", "strategy"],
                                              "msg": "unknown strategy"}])
        if len(req.codebook) < 2:
            raise HTTPException(422, detail=[{"loc": ["body", "codebook"],
                                              "msg": "need at least 2 codes"}])
        docs, dtm, version = _session_dtm(state, pid, req.model_dump())
        codebook = classify.Codebook(codes=tuple(
            classify.Code(id=c.id, name=c.name or c.id,
                          description=c.description) for c in req.codebook))
        session = classify.CodingSession(
            codebook=codebook, strategy=req.strategy, seed=req.seed,
            queue=sorted(dtm.doc_ids))
        state.session_seq += 1
        sid = f"s{state.session_seq:04d}"
        state.sessions[sid] = {"session": session, "project": pid,
                               "dtm": dtm, "docs": {d.id: d for d in docs},
                               "corpus_version": version,
                               "analysis_params": req.analysis_params}
        _persist_session(state, sid)
        return {"id": sid, "queue_length": len(session.queue),
                "corpus_version": version}

    def _session_entry(sid: str) -> dict:
        entry = state.sessions.get(sid)
        if entry is None:
            raise HTTPException(404, f"session {sid} not found")
        return entry

    @app.post("/sessions/{sid}/labels")
    def post_label(sid: str, req: LabelRequest):
        entry = _session_entry(sid)
        session: classify.CodingSession = entry["session"]
        try:
            classify.record_label(session, req.doc, req.code,
                                  author=req.author, overwrite=req.overwrite)
        except ValueError as exc:
            raise HTTPException(422, detail=[{"loc": ["body"], "msg": str(exc)}])
        _maybe_retrain(entry)
        _persist_session(state, sid)
        return {"ok": True, "labeled": len(session.labeled),
                "queue_length": len(session.queue),
                "model_version": session.model_version}

    @app.get("/sessions/{sid}/next")
    def get_next(sid: str):
        entry = _session_entry(sid)
        session: classify.CodingSession = entry["session"]
        if not session.queue:
            raise HTTPException(404, "queue is empty")
        dtm = entry["dtm"]
        posterior = None
        if session.classifier is not None:
            posteriors = {
                d: session.classifier.posterior_from_counts(
                    dtm.rows[dtm.row_index(d)])
                for d in session.queue}
            doc_id = classify.next_query(session, posteriors)
            posterior = {c: float(p) for c, p in
                         zip(session.codebook.ids, posteriors[doc_id])}
        else:
            doc_id = sorted(session.queue)[0]
        doc = entry["docs"][doc_id]
        return {"doc_id": doc_id, "title": doc.title, "body": doc.body,
                "posterior": posterior,
                "model_version": session.model_version,
                "queue_length": len(session.queue)}

    @app.get("/sessions/{sid}/metrics")
    def get_metrics(sid: str, folds: int = 2, seed: int = 1):
        entry = _session_entry(sid)
        session: classify.CodingSession = entry["session"]
        labels = {d: r.code for d, r in session.labeled.items()}
        try:
            report = classify.evaluate(entry["dtm"], labels, folds=folds,
                                       seed=seed, codebook=session.codebook)
        except ValueError as exc:
            raise HTTPException(409, str(exc))
        session.metrics_history.append(report)
        return json.loads(report.to_json())

    @app.get("/projects/{pid}/models/{mid}/topics")
    def get_topics(pid: str, mid: str, top_n: int = 10, lam: float = 1.0):
        model = load_project_model(state, pid, mid)
        out = []
        for k in range(model.config.k):
            active = model.active_label(k)
            out.append({"topic": k,
                        "label": active.label if active else None,
                        "words": [{"term": w, "relevance": r}
                                  for w, r in topics.top_words(model, k, top_n, lam)]})
        return {"model": mid, "k": model.config.k, "topics": out}

    @app.post("/projects/{pid}/models/{mid}/topics/{k}/label")
    def post_topic_label(pid: str, mid: str, k: int, req: TopicLabelRequest):
        model = load_project_model(state, pid, mid)
        try:
            record = topics.label_topic(model, k, req.label, author=req.author)
        except (ValueError, IndexError) as exc:
            raise HTTPException(422, detail=[{"loc": ["body", "label"],
                                              "msg": str(exc)}])
        topics.save_model(model, state.store.project_dir(pid) / "models" / mid)
        return {"topic": k, "label": record.label, "author": record.author,
                "timestamp": record.timestamp}

    @app.get("/projects/{pid}/models/{mid}/topics/{k}/highlight/{doc_id}")
    def get_highlight(pid: str, mid: str, k: int, doc_id: str,
                      min_weight: float = 0.0):
        model = load_project_model(state, pid, mid)
        payload_file = state.store.project_dir(pid) / "results" / mid / "payload.json"
        version = None
        if payload_file.exists():
            version = json.loads(payload_file.read_text(encoding="utf-8")).get(
                "corpus_version")
        docs, _ = state.store.load_corpus(pid, version)
        doc = next((d for d in docs if d.id == doc_id), None)
        if doc is None:
            raise HTTPException(404, f"document {doc_id} not found")
        try:
            spans = topics.highlight(model, doc, k, min_weight=min_weight)
        except (KeyError, IndexError) as exc:
            raise HTTPException(404, str(exc))
        return {"doc_id": doc_id, "topic": k, "text": doc.body,
                "spans": [{"start": s.start, "end": s.end,
                           "weight": round(s.weight, 9)} for s in spans]}

    @app.post("/projects/{pid}/export/{fmt}")
    def export(pid: str, fmt: str, req: ExportRequest):
        out_dir = state.store.project_dir(pid) / "results" / f"export-{fmt}"
        out_dir.mkdir(parents=True, exist_ok=True)
        try:
            payload = run_export(state, pid,
                                 dict(req.model_dump(), what=fmt), out_dir)
        except ValueError as exc:
            raise HTTPException(422, detail=[{"loc": ["body"], "msg": str(exc)}])
        artifact = out_dir / payload["artifact"]
        media = ("application/zip" if payload["artifact"].endswith(".qdpx")
                 else "text/csv")
        return Response(content=artifact.read_bytes(), media_type=media,
                        headers={"X-Artifact": payload["artifact"]})

    ui_dir = os.environ.get("CM_UI_DIR")
    if ui_dir is None:
        candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        ui_dir = str(candidate) if candidate.exists() else None
    if ui_dir and Path(ui_dir).exists():
        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


def serve(port: int | None = None, data_dir=None, max_workers: int = 2):
    """Run the service under uvicorn (blocking)."""
    import uvicorn
    port = port or int(os.environ.get("CM_PORT", "8400"))
    app = create_app(data_dir=data_dir, max_workers=max_workers)
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")
