"""Export/import in CSV and a QDPX (zip + XML) interchange subset covering
codebooks, plain-text sources and coded text selections.

Every emitted file is byte-identical across repeated exports of the same
state: fixed column and archive entry order, fixed float formatting, fixed
zip timestamps, and guids derived deterministically from the project seed.
"""
from __future__ import annotations

import csv
import hashlib
import io
import re
import warnings
import zipfile
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path

from .cooccurrence import CooccurrenceResult
from .corpus import Document
from .classify import CodingSession
from .topics import TopicModel

_GUID_RE = re.compile(
    r"^[0-9a-f]{8}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{12}$")

_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


class QdpxError(ValueError):
    """QDPX archive or project is structurally invalid."""


@dataclass(frozen=True)
class QdpxCode:
    guid: str
    name: str


@dataclass(frozen=True)
class QdpxSource:
    guid: str
    document_id: str
    text: str


@dataclass(frozen=True)
class QdpxSelection:
    source_guid: str
    start: int
    end: int
    code_guid: str


@dataclass
class QdpxProject:
    name: str
    codebook: list[QdpxCode] = field(default_factory=list)
    sources: list[QdpxSource] = field(default_factory=list)
    selections: list[QdpxSelection] = field(default_factory=list)

    def validate(self):
        guids = [c.guid for c in self.codebook] + [s.guid for s in self.sources]
        for guid in guids:
            if not _GUID_RE.match(guid):
                raise QdpxError(f"malformed guid {guid}")
        if len(set(guids)) != len(guids):
            raise QdpxError("guids are not unique")
        code_guids = {c.guid for c in self.codebook}
        text_of = {s.guid: s.text for s in self.sources}
        for sel in self.selections:
            if sel.source_guid not in text_of:
                raise QdpxError(f"selection references unknown source {sel.source_guid}")
            if sel.code_guid not in code_guids:
                raise QdpxError(f"selection references unknown code {sel.code_guid}")
            if not (0 <= sel.start < sel.end <= len(text_of[sel.source_guid])):
                raise QdpxError(
                    f"selection [{sel.start},{sel.end}) out of range for "
                    f"source {sel.source_guid}")


def deterministic_guid(seed: int, kind: str, ordinal: int) -> str:
    """RFC-4122-shaped guid derived from (seed, kind, ordinal)."""
    digest = hashlib.sha256(f"{seed}:{kind}:{ordinal}".encode()).hexdigest()
    h = digest[:32]
    return (f"{h[:8]}-{h[8:12]}-4{h[13:16]}-"
            f"{'89ab'[int(h[16], 16) % 4]}{h[17:20]}-{h[20:32]}")


def _atomic_write_bytes(path: Path, data: bytes):
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(path)


def _atomic_write_text(path: Path, text: str):
    _atomic_write_bytes(path, text.encode("utf-8"))


def export_corpus_csv(corpus: list[Document], path) -> None:
    """Corpus as RFC-4180 CSV: ``id,title,date,body,<metadata sorted>``."""
    meta_fields = sorted({k for doc in corpus for k in doc.metadata})
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", "title", "date", "body"] + meta_fields)
    for doc in corpus:
        row = [doc.id, doc.title,
               doc.date.isoformat() if doc.date else "", doc.body]
        row += [doc.metadata.get(k, "") for k in meta_fields]
        writer.writerow(row)
    _atomic_write_text(Path(path), buf.getvalue())


def corpus_csv_mapping(path) -> "ImportMapping":
    """The inverse mapping for a file written by :func:`export_corpus_csv`."""
    from .corpus import ImportMapping
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh))
    columns = {}
    for col in header:
        if col in ("id", "title", "date", "body"):
            columns[col] = col
        else:
            columns[col] = f"metadata:{col}"
    return ImportMapping(columns=columns, date_format="%Y-%m-%d", delimiter=",")


def export_entities_json(corpus: list[Document], path) -> None:
    """Entity-tag sidecar for a corpus CSV (tags cannot live in the CSV)."""
    import json
    payload = {doc.id: [{"start": s.start, "end": s.end, "kind": s.kind,
                         "surface": s.surface} for s in doc.entity_tags]
               for doc in corpus if doc.entity_tags}
    _atomic_write_text(Path(path), json.dumps(payload, indent=2,
                                              sort_keys=True) + "\n")


def load_entities_json(corpus: list[Document], path) -> list[Document]:
    import json
    from dataclasses import replace
    from .corpus import EntitySpan
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    out = []
    for doc in corpus:
        spans = payload.get(doc.id)
        if spans:
            out.append(replace(doc, entity_tags=tuple(
                EntitySpan(start=s["start"], end=s["end"], kind=s["kind"],
                           surface=s["surface"]) for s in spans)))
        else:
            out.append(doc)
    return out


def export_qdpx(project: QdpxProject, path) -> None:
    """Write the archive: ``project.qde`` first, then ``sources/<guid>.txt``
    in guid order, all with fixed timestamps."""
    project.validate()

    root = ET.Element("Project", {"name": project.name})
    codes_el = ET.SubElement(ET.SubElement(root, "CodeBook"), "Codes")
    for code in project.codebook:
        ET.SubElement(codes_el, "Code", {"guid": code.guid, "name": code.name,
                                         "isCodable": "true"})
    sources_el = ET.SubElement(root, "Sources")
    by_source: dict[str, list[QdpxSelection]] = {}
    for i, sel in enumerate(project.selections):
        by_source.setdefault(sel.source_guid, []).append(sel)
    for source in project.sources:
        ts = ET.SubElement(sources_el, "TextSource",
                           {"guid": source.guid, "name": source.document_id,
                            "plainTextPath": f"internal://{source.guid}.txt"})
        content = ET.SubElement(ts, "PlainTextContent")
        content.text = source.text
        for j, sel in enumerate(by_source.get(source.guid, [])):
            sel_el = ET.SubElement(ts, "PlainTextSelection", {
                "guid": deterministic_guid(0, f"selection:{source.guid}", j),
                "startPosition": str(sel.start),
                "endPosition": str(sel.end)})
            coding = ET.SubElement(sel_el, "Coding")
            ET.SubElement(coding, "CodeRef", {"targetGUID": sel.code_guid})

    ET.indent(root)
    qde = (b'<?xml version="1.0" encoding="utf-8"?>\n'
           + ET.tostring(root, encoding="utf-8", xml_declaration=False))

    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_DEFLATED) as zf:
        info = zipfile.ZipInfo("project.qde", date_time=_ZIP_EPOCH)
        zf.writestr(info, qde)
        for source in sorted(project.sources, key=lambda s: s.guid):
            info = zipfile.ZipInfo(f"sources/{source.guid}.txt",
                                   date_time=_ZIP_EPOCH)
            zf.writestr(info, source.text.encode("utf-8"))
    _atomic_write_bytes(Path(path), buf.getvalue())


_KNOWN_TAGS = {"Project", "CodeBook", "Codes", "Code", "Sources", "TextSource",
               "PlainTextContent", "PlainTextSelection", "Coding", "CodeRef"}


def import_qdpx(path) -> QdpxProject:
    """Parse an archive back into a project.

    Unknown XML elements are ignored with a warning; selections with
    out-of-range offsets are rejected row-wise with a warning. A missing
    ``project.qde``, unparseable XML or a dangling CodeRef is fatal.
    """
    try:
        zf = zipfile.ZipFile(path)
    except zipfile.BadZipFile as exc:
        raise QdpxError(f"not a zip archive: {exc}") from exc
    with zf:
        if "project.qde" not in zf.namelist():
            raise QdpxError("missing project.qde")
        try:
            root = ET.fromstring(zf.read("project.qde"))
        except ET.ParseError as exc:
            raise QdpxError(f"malformed XML: {exc}") from exc

        for el in root.iter():
            if el.tag not in _KNOWN_TAGS:
                warnings.warn(f"ignoring unknown QDPX element <{el.tag}>")

        project = QdpxProject(name=root.get("name", ""))
        for code in root.iter("Code"):
            project.codebook.append(QdpxCode(guid=code.get("guid", ""),
                                             name=code.get("name", "")))
        code_guids = {c.guid for c in project.codebook}

        for ts in root.iter("TextSource"):
            guid = ts.get("guid", "")
            content = ts.find("PlainTextContent")
            if content is not None and content.text is not None:
                text = content.text
            else:
                sidecar = f"sources/{guid}.txt"
                text = (zf.read(sidecar).decode("utf-8")
                        if sidecar in zf.namelist() else "")
            project.sources.append(QdpxSource(guid=guid,
                                              document_id=ts.get("name", ""),
                                              text=text))
            for sel in ts.iter("PlainTextSelection"):
                start = int(sel.get("startPosition", "0"))
                end = int(sel.get("endPosition", "0"))
                ref = sel.find("./Coding/CodeRef")
                if ref is None:
                    warnings.warn(f"selection without CodeRef in source {guid}")
                    continue
                target = ref.get("targetGUID", "")
                if target not in code_guids:
                    raise QdpxError(f"dangling CodeRef {target}")
                if not (0 <= start < end <= len(text)):
                    warnings.warn(
                        f"rejecting out-of-range selection [{start},{end}) "
                        f"in source {guid}")
                    continue
                project.selections.append(QdpxSelection(
                    source_guid=guid, start=start, end=end, code_guid=target))
    return project


def qdpx_from_session(name: str, corpus: list[Document],
                      session: CodingSession, seed: int = 0) -> QdpxProject:
    """Project view of a coding session: whole-document selections carrying
    each document's code."""
    project = QdpxProject(name=name)
    code_guid = {}
    for i, code in enumerate(session.codebook.codes):
        guid = deterministic_guid(seed, "code", i)
        code_guid[code.id] = guid
        project.codebook.append(QdpxCode(guid=guid, name=code.name))
    source_guid = {}
    for i, doc in enumerate(corpus):
        guid = deterministic_guid(seed, "source", i)
        source_guid[doc.id] = guid
        project.sources.append(QdpxSource(guid=guid, document_id=doc.id,
                                          text=doc.body))
    for doc in corpus:
        record = session.labeled.get(doc.id)
        if record is not None and doc.body:
            project.selections.append(QdpxSelection(
                source_guid=source_guid[doc.id], start=0, end=len(doc.body),
                code_guid=code_guid[record.code]))
    return project


def export_cooc_csv(result: CooccurrenceResult, path) -> None:
    """Schema: ``term_a,term_b,n_a,n_b,n_ab,N,measure,score`` (6 decimals)."""
    lines = ["term_a,term_b,n_a,n_b,n_ab,N,measure,score"]
    for p in result.pairs:
        lines.append(f"{p.a},{p.b},{p.counts.n_a},{p.counts.n_b},"
                     f"{p.counts.n_ab},{p.counts.n},{result.measure},"
                     f"{p.score:.6f}")
    _atomic_write_text(Path(path), "\n".join(lines) + "\n")


def export_theta_csv(model: TopicModel, path) -> None:
    """Document-topic proportions with an id column, 9 significant digits."""
    lines = ["doc_id," + ",".join(f"topic_{k}" for k in range(model.config.k))]
    for d, doc_id in enumerate(model.doc_ids):
        lines.append(doc_id + "," + ",".join(f"{x:.9g}" for x in model.theta[d]))
    _atomic_write_text(Path(path), "\n".join(lines) + "\n")


def export_phi_csv(model: TopicModel, path) -> None:
    lines = ["topic," + ",".join(model.vocab.terms)]
    for k in range(model.config.k):
        lines.append(str(k) + "," + ",".join(f"{x:.9g}" for x in model.phi[k]))
    _atomic_write_text(Path(path), "\n".join(lines) + "\n")


def export_labels_csv(session: CodingSession, path) -> None:
    """Schema: ``doc_id,code_id,author,timestamp``, sorted by document id."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["doc_id", "code_id", "author", "timestamp"])
    for doc_id in sorted(session.labeled):
        record = session.labeled[doc_id]
        writer.writerow([doc_id, record.code, record.author, record.timestamp])
    _atomic_write_text(Path(path), buf.getvalue())


def read_labels_csv(path) -> dict[str, str]:
    """doc_id -> code_id from a labels CSV (extra columns ignored)."""
    labels = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            labels[row["doc_id"]] = row["code_id"]
    return labels
