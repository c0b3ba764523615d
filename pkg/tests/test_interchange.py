import datetime
import re
import zipfile

import numpy as np
import pytest

from cminer.classify import Codebook, CodingSession, LabelRecord
from cminer.cooccurrence import DICE, DOCUMENT, cooccurrences
from cminer.corpus import Document, import_csv
from cminer.datasets import make_two_topic_corpus
from cminer.interchange import (QdpxCode, QdpxError, QdpxProject,
                                QdpxSelection, QdpxSource, corpus_csv_mapping,
                                deterministic_guid, export_cooc_csv,
                                export_corpus_csv, export_labels_csv,
                                export_phi_csv, export_qdpx,
                                export_theta_csv, import_qdpx,
                                qdpx_from_session, read_labels_csv)
from cminer.pipeline import AnalysisParams, build_dtm, build_vocabulary
from cminer.topics import LdaConfig, fit_lda

GUID_RE = re.compile(
    r"^[0-9a-f]{8}-[0-9a-f]{4}-4[0-9a-f]{3}-[89ab][0-9a-f]{3}-[0-9a-f]{12}$")


@pytest.fixture
def mixed_corpus():
    return [
        Document(id="a", title="first", body="solar wind grid",
                 date=datetime.date(2015, 12, 12),
                 metadata={"country": "gm", "group": "annex1"}),
        Document(id="b", title='has "quotes", commas',
                 body='text with "quotes", commas,\nand a newline',
                 metadata={"country": "br"}),
        Document(id="c", title="", body="unicode: über straße"),
    ]


class TestCorpusCsv:
    def test_line_count(self, tmp_path, mixed_corpus):
        path = tmp_path / "corpus.csv"
        export_corpus_csv(mixed_corpus[:2], path)
        # RFC 4180: embedded newline stays inside quotes, so 3 physical
        # lines only once the quoted field is accounted for
        rows = path.read_text(encoding="utf-8")
        assert rows.count("\r") == 0
        with open(path, newline="", encoding="utf-8") as fh:
            import csv as _csv
            assert len(list(_csv.reader(fh))) == 3

    def test_rfc4180_quoting(self, tmp_path):
        docs = [Document(id="a", body='say "hi", ok')]
        path = tmp_path / "corpus.csv"
        export_corpus_csv(docs, path)
        raw = path.read_text(encoding="utf-8")
        assert '"say ""hi"", ok"' in raw

    def test_header_order_and_sorted_metadata(self, tmp_path, mixed_corpus):
        path = tmp_path / "corpus.csv"
        export_corpus_csv(mixed_corpus, path)
        header = path.read_text(encoding="utf-8").splitlines()[0]
        assert header == "id,title,date,body,country,group"

    def test_round_trip_field_identity(self, tmp_path, mixed_corpus):
        path = tmp_path / "corpus.csv"
        export_corpus_csv(mixed_corpus, path)
        docs, report = import_csv(path, corpus_csv_mapping(path))
        assert report.rejected == []
        assert len(docs) == len(mixed_corpus)
        for got, want in zip(docs, mixed_corpus):
            assert got.id == want.id
            assert got.title == want.title
            assert got.body == want.body
            assert got.date == want.date
            assert got.metadata == want.metadata

    def test_repeated_export_byte_identical(self, tmp_path, mixed_corpus):
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        export_corpus_csv(mixed_corpus, p1)
        export_corpus_csv(mixed_corpus, p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestDeterministicGuid:
    def test_rfc4122_shape(self):
        for i in range(50):
            assert GUID_RE.match(deterministic_guid(7, "code", i))

    def test_unique_and_reproducible(self):
        batch = {deterministic_guid(7, "source", i) for i in range(200)}
        assert len(batch) == 200
        assert deterministic_guid(7, "source", 3) == deterministic_guid(7, "source", 3)
        assert deterministic_guid(8, "source", 3) != deterministic_guid(7, "source", 3)


def small_project():
    codes = [QdpxCode(guid=deterministic_guid(1, "code", i), name=name)
             for i, name in enumerate(["funding", "risk"])]
    sources = [QdpxSource(guid=deterministic_guid(1, "source", i),
                          document_id=f"doc{i}", text=text)
               for i, text in enumerate(["alpha beta gamma",
                                         "delta epsilon",
                                         "zeta eta theta iota"])]
    selections = [
        QdpxSelection(sources[0].guid, 0, 5, codes[0].guid),
        QdpxSelection(sources[0].guid, 6, 10, codes[1].guid),
        QdpxSelection(sources[1].guid, 0, 5, codes[0].guid),
        QdpxSelection(sources[1].guid, 6, 13, codes[0].guid),
        QdpxSelection(sources[2].guid, 0, 4, codes[1].guid),
        QdpxSelection(sources[2].guid, 5, 8, codes[1].guid),
        QdpxSelection(sources[2].guid, 9, 14, codes[0].guid),
    ]
    return QdpxProject(name="fixture", codebook=codes, sources=sources,
                       selections=selections)


class TestQdpx:
    def test_empty_project_round_trip(self, tmp_path):
        path = tmp_path / "empty.qdpx"
        export_qdpx(QdpxProject(name="empty"), path)
        with zipfile.ZipFile(path) as zf:
            assert zf.namelist() == ["project.qde"]
        back = import_qdpx(path)
        assert back.name == "empty"
        assert back.codebook == [] and back.sources == []

    def test_single_selection_round_trip(self, tmp_path):
        code = QdpxCode(guid=deterministic_guid(0, "code", 0), name="c")
        source = QdpxSource(guid=deterministic_guid(0, "source", 0),
                            document_id="d", text="hello world")
        project = QdpxProject(name="one", codebook=[code], sources=[source],
                              selections=[QdpxSelection(source.guid, 0, 5,
                                                        code.guid)])
        path = tmp_path / "one.qdpx"
        export_qdpx(project, path)
        back = import_qdpx(path)
        assert back.codebook == project.codebook
        assert back.sources == project.sources
        assert back.selections == project.selections

    def test_three_source_fixture_round_trip(self, tmp_path):
        project = small_project()
        path = tmp_path / "fix.qdpx"
        export_qdpx(project, path)
        back = import_qdpx(path)
        assert back.name == project.name
        assert back.codebook == project.codebook
        assert back.sources == project.sources
        assert back.selections == project.selections

    def test_archive_layout_and_determinism(self, tmp_path):
        project = small_project()
        p1, p2 = tmp_path / "a.qdpx", tmp_path / "b.qdpx"
        export_qdpx(project, p1)
        export_qdpx(project, p2)
        assert p1.read_bytes() == p2.read_bytes()
        with zipfile.ZipFile(p1) as zf:
            names = zf.namelist()
        assert names[0] == "project.qde"
        assert names[1:] == sorted(
            f"sources/{s.guid}.txt" for s in project.sources)

    def test_sidecar_text_matches_embedded(self, tmp_path):
        project = small_project()
        path = tmp_path / "fix.qdpx"
        export_qdpx(project, path)
        with zipfile.ZipFile(path) as zf:
            for source in project.sources:
                assert zf.read(f"sources/{source.guid}.txt").decode() == source.text

    def test_missing_qde_fatal(self, tmp_path):
        path = tmp_path / "broken.qdpx"
        with zipfile.ZipFile(path, "w") as zf:
            zf.writestr("other.txt", "x")
        with pytest.raises(QdpxError, match="missing project.qde"):
            import_qdpx(path)

    def test_malformed_xml_fatal(self, tmp_path):
        path = tmp_path / "bad.qdpx"
        with zipfile.ZipFile(path, "w") as zf:
            zf.writestr("project.qde", "<Project><unclosed>")
        with pytest.raises(QdpxError, match="malformed XML"):
            import_qdpx(path)

    def test_dangling_coderef_fatal(self, tmp_path):
        path = tmp_path / "dangle.qdpx"
        qde = ('<Project name="p"><CodeBook><Codes/></CodeBook><Sources>'
               '<TextSource guid="s" name="d"><PlainTextContent>abc'
               '</PlainTextContent>'
               '<PlainTextSelection startPosition="0" endPosition="1">'
               '<Coding><CodeRef targetGUID="nope"/></Coding>'
               '</PlainTextSelection></TextSource></Sources></Project>')
        with zipfile.ZipFile(path, "w") as zf:
            zf.writestr("project.qde", qde)
        with pytest.raises(QdpxError, match="dangling CodeRef"):
            import_qdpx(path)

    def test_unknown_elements_warn_and_are_ignored(self, tmp_path):
        path = tmp_path / "extra.qdpx"
        qde = ('<Project name="p"><Memos><Memo guid="m"/></Memos>'
               '<CodeBook><Codes/></CodeBook><Sources/></Project>')
        with zipfile.ZipFile(path, "w") as zf:
            zf.writestr("project.qde", qde)
        with pytest.warns(UserWarning, match="unknown QDPX element"):
            project = import_qdpx(path)
        assert project.name == "p"

    def test_out_of_range_selection_rejected_row_wise(self, tmp_path):
        path = tmp_path / "range.qdpx"
        qde = ('<Project name="p"><CodeBook><Codes>'
               '<Code guid="c" name="x"/></Codes></CodeBook><Sources>'
               '<TextSource guid="s" name="d"><PlainTextContent>abc'
               '</PlainTextContent>'
               '<PlainTextSelection startPosition="0" endPosition="2">'
               '<Coding><CodeRef targetGUID="c"/></Coding>'
               '</PlainTextSelection>'
               '<PlainTextSelection startPosition="1" endPosition="99">'
               '<Coding><CodeRef targetGUID="c"/></Coding>'
               '</PlainTextSelection></TextSource></Sources></Project>')
        with zipfile.ZipFile(path, "w") as zf:
            zf.writestr("project.qde", qde)
        with pytest.warns(UserWarning, match="out-of-range"):
            project = import_qdpx(path)
        assert len(project.selections) == 1
        assert project.selections[0].end == 2

    def test_invalid_offsets_rejected_at_export(self, tmp_path):
        code = QdpxCode(guid=deterministic_guid(0, "code", 0), name="c")
        source = QdpxSource(guid=deterministic_guid(0, "source", 0),
                            document_id="d", text="ab")
        project = QdpxProject(name="bad", codebook=[code], sources=[source],
                              selections=[QdpxSelection(source.guid, 0, 99,
                                                        code.guid)])
        with pytest.raises(QdpxError, match="out of range"):
            export_qdpx(project, tmp_path / "x.qdpx")

    def test_session_projection_offsets_in_scalar_values(self, tmp_path):
        body = "straße über alles"
        docs = [Document(id="d0", body=body)]
        session = CodingSession(codebook=Codebook.from_ids(["a", "b"]),
                                strategy="ENTROPY", seed=1, queue=[])
        session.labeled["d0"] = LabelRecord(code="a", author="",
                                            timestamp="t")
        project = qdpx_from_session("p", docs, session, seed=0)
        assert project.selections[0].end == len(body)
        path = tmp_path / "u.qdpx"
        export_qdpx(project, path)
        back = import_qdpx(path)
        assert back.sources[0].text == body
        assert back.selections[0].end == len(body)


@pytest.fixture(scope="module")
def fitted():
    docs, _ = make_two_topic_corpus(n_docs=8, doc_len=15, seed=2)
    vocab = build_vocabulary(docs, AnalysisParams())
    dtm = build_dtm(docs, vocab)
    model = fit_lda(dtm, LdaConfig(k=3, alpha=0.2, beta=0.05, iterations=30,
                                   burn_in=10, seed=4))
    return docs, vocab, model


class TestTabularExports:
    def test_theta_shape(self, tmp_path, fitted):
        _, _, model = fitted
        path = tmp_path / "theta.csv"
        export_theta_csv(model, path)
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "doc_id,topic_0,topic_1,topic_2"
        assert len(lines) == 1 + 8
        assert all(len(l.split(",")) == 4 for l in lines[1:])

    def test_theta_reread_to_nine_significant_digits(self, tmp_path, fitted):
        _, _, model = fitted
        path = tmp_path / "theta.csv"
        export_theta_csv(model, path)
        for d, line in enumerate(path.read_text().splitlines()[1:]):
            values = np.array([float(x) for x in line.split(",")[1:]])
            assert np.allclose(values, model.theta[d], rtol=1e-8, atol=0)

    def test_phi_header_carries_terms(self, tmp_path, fitted):
        _, vocab, model = fitted
        path = tmp_path / "phi.csv"
        export_phi_csv(model, path)
        header = path.read_text().splitlines()[0]
        assert header == "topic," + ",".join(vocab.terms)

    def test_cooc_schema_and_six_decimals(self, tmp_path):
        docs = [Document(id=f"d{i}", body=b) for i, b in
                enumerate(["aa bb", "aa bb", "aa cc"])]
        vocab = build_vocabulary(docs, AnalysisParams())
        result = cooccurrences(docs, vocab, DOCUMENT, DICE)
        path = tmp_path / "cooc.csv"
        export_cooc_csv(result, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "term_a,term_b,n_a,n_b,n_ab,N,measure,score"
        assert lines[1] == "aa,bb,3,2,2,3,DICE,0.800000"

    def test_labels_csv_row_count_and_round_trip(self, tmp_path):
        session = CodingSession(codebook=Codebook.from_ids(["x", "y"]),
                                strategy="ENTROPY", seed=1, queue=[])
        for i in range(5):
            session.labeled[f"d{i}"] = LabelRecord(
                code="x" if i % 2 else "y", author="coder",
                timestamp="2020-01-01T00:00:00+00:00")
        path = tmp_path / "labels.csv"
        export_labels_csv(session, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "doc_id,code_id,author,timestamp"
        assert len(lines) == 1 + 5
        assert read_labels_csv(path) == {d: r.code
                                         for d, r in session.labeled.items()}
