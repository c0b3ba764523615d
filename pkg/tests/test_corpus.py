import datetime

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cminer.corpus import (CsvFormatError, Document, EntitySpan, ImportMapping,
                           MappingError, deduplicate, import_csv, jaccard,
                           read_gazetteer, shingle_set, tag_entities)


def write_csv(tmp_path, text, name="in.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestImportMapping:
    def test_missing_body_is_rejected(self):
        with pytest.raises(MappingError, match="no body column"):
            ImportMapping(columns={"country": "metadata:country"})

    def test_multiple_body_columns_rejected(self):
        with pytest.raises(MappingError, match="multiple body"):
            ImportMapping(columns={"a": "body", "b": "body"})

    def test_unknown_target_rejected(self):
        with pytest.raises(MappingError, match="unknown target"):
            ImportMapping(columns={"a": "body", "b": "bogus"})

    def test_duplicate_date_rejected(self):
        with pytest.raises(MappingError, match="mapped to 'date'"):
            ImportMapping(columns={"a": "body", "b": "date", "c": "date"})


class TestImportCsv:
    def test_three_rows_with_metadata(self, tmp_path):
        path = write_csv(tmp_path, "country,text\ngm,ndc one\nbr,ndc two\nfr,ndc three\n")
        mapping = ImportMapping(columns={"country": "metadata:country",
                                         "text": "body"})
        docs, report = import_csv(path, mapping)
        assert [d.id for d in docs] == ["000000", "000001", "000002"]
        assert [d.metadata["country"] for d in docs] == ["gm", "br", "fr"]
        assert report.accepted == 3 and not report.rejected

    def test_unmapped_columns_are_dropped(self, tmp_path):
        path = write_csv(tmp_path, "text,noise\nbody text,junk\n")
        docs, _ = import_csv(path, ImportMapping(columns={"text": "body"}))
        assert docs[0].metadata == {}

    def test_date_parse_and_row_reject(self, tmp_path):
        # third row's date does not match the declared format
        path = write_csv(tmp_path,
                         "date,text\n2015-12-12,a\n2016-01-02,b\n12/2015,c\n")
        mapping = ImportMapping(columns={"date": "date", "text": "body"},
                                date_format="%Y-%m-%d")
        docs, report = import_csv(path, mapping)
        assert [d.date for d in docs] == [datetime.date(2015, 12, 12),
                                          datetime.date(2016, 1, 2)]
        assert report.rejected == [(2, "date parse")]

    def test_duplicate_explicit_ids_rejected_row_wise(self, tmp_path):
        path = write_csv(tmp_path, "id,text\nx,a\nx,b\n")
        docs, report = import_csv(
            path, ImportMapping(columns={"id": "id", "text": "body"}))
        assert len(docs) == 1
        assert report.rejected == [(1, "duplicate id")]

    def test_empty_date_value_means_undated(self, tmp_path):
        path = write_csv(tmp_path, "date,text\n,a\n")
        docs, report = import_csv(
            path, ImportMapping(columns={"date": "date", "text": "body"}))
        assert docs[0].date is None and report.accepted == 1

    def test_malformed_csv_is_fatal(self, tmp_path):
        path = write_csv(tmp_path, 'text\n"unbalanced, quote "oops" here\n')
        with pytest.raises(CsvFormatError):
            import_csv(path, ImportMapping(columns={"text": "body"}))

    def test_mapped_column_missing_in_header(self, tmp_path):
        path = write_csv(tmp_path, "text\nhello\n")
        with pytest.raises(MappingError, match="not in header"):
            import_csv(path, ImportMapping(columns={"text": "body",
                                                    "gone": "title"}))


class TestTagEntities:
    def test_single_forced_match(self):
        doc = Document(id="a", body="The Gambia submitted its NDC")
        tagged = tag_entities(doc, {"gambia": "LOCATION"})
        assert tagged.entity_tags == (
            EntitySpan(start=4, end=10, kind="LOCATION", surface="Gambia"),)

    def test_longest_match_wins(self):
        doc = Document(id="a", body="in New York today")
        tagged = tag_entities(doc, {"new york": "LOCATION",
                                    "york": "LOCATION"})
        assert len(tagged.entity_tags) == 1
        assert tagged.entity_tags[0].surface == "New York"

    def test_token_boundaries_respected(self):
        doc = Document(id="a", body="Denmarkish is not Denmark")
        tagged = tag_entities(doc, {"denmark": "LOCATION"})
        assert [s.start for s in tagged.entity_tags] == [18]

    def test_existing_tags_replaced(self):
        doc = Document(id="a", body="Oslo",
                       entity_tags=(EntitySpan(0, 4, "OTHER", "Oslo"),))
        tagged = tag_entities(doc, {"oslo": "LOCATION"})
        assert tagged.entity_tags[0].kind == "LOCATION"

    def test_empty_gazetteer_yields_no_tags(self):
        doc = Document(id="a", body="anything")
        assert tag_entities(doc, {}).entity_tags == ()

    def test_surface_always_matches_body_slice(self):
        doc = Document(id="a", body="GIZ and CDKN support The Gambia")
        tagged = tag_entities(doc, {"giz": "ORGANIZATION",
                                    "cdkn": "ORGANIZATION",
                                    "the gambia": "LOCATION"})
        for span in tagged.entity_tags:
            assert doc.body[span.start:span.end] == span.surface

    def test_against_brute_force_oracle(self):
        gazetteer = {"gambia": "LOCATION", "giz": "ORGANIZATION",
                     "green climate fund": "ORGANIZATION", "banjul": "LOCATION"}
        bodies = [
            "The Gambia thanks GIZ and the Green Climate Fund",
            "Banjul hosts GIZ; the Gambia benefits",
            "no entities here at all",
            "gambia GAMBIA GaMbIa",
            "Green Climate Fund Green Climate Fund",
        ]

        def oracle(body):
            # all boundary-aligned matches, greedy longest-first left-to-right
            lowered = body.lower()

            def word(c):
                return c.isalnum() or c == "_"

            matches = []
            for surface in gazetteer:
                start = 0
                while True:
                    i = lowered.find(surface, start)
                    if i < 0:
                        break
                    j = i + len(surface)
                    left_ok = i == 0 or not word(lowered[i - 1])
                    right_ok = j == len(lowered) or not word(lowered[j])
                    if left_ok and right_ok:
                        matches.append((i, j))
                    start = i + 1
            matches.sort(key=lambda m: (m[0], -(m[1] - m[0])))
            chosen = []
            for i, j in matches:
                if not chosen or i >= chosen[-1][1]:
                    chosen.append((i, j))
            return chosen

        for body in bodies:
            doc = tag_entities(Document(id="x", body=body), gazetteer)
            assert [(s.start, s.end) for s in doc.entity_tags] == oracle(body)


class TestGazetteerFile:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "gaz.tsv"
        path.write_text("The Gambia\tLOCATION\nGIZ\tORGANIZATION\n",
                        encoding="utf-8")
        assert read_gazetteer(path) == {"The Gambia": "LOCATION",
                                        "GIZ": "ORGANIZATION"}

    def test_unknown_kind_rejected(self, tmp_path):
        path = tmp_path / "gaz.tsv"
        path.write_text("x\tCITY\n", encoding="utf-8")
        with pytest.raises(ValueError, match="unknown kind"):
            read_gazetteer(path)


LONG_A = "alpha beta gamma delta epsilon zeta eta theta iota kappa"
LONG_B = "one two three four five six seven eight nine ten"


class TestDeduplicate:
    def test_identical_bodies_group_with_similarity_one(self):
        docs = [Document(id="a", body=LONG_A), Document(id="b", body=LONG_A)]
        groups = deduplicate(docs, 0.9)
        assert len(groups) == 1
        assert groups[0].representative == "a"
        assert groups[0].members == ("a", "b")
        assert groups[0].similarity == {"a": 1.0, "b": 1.0}

    def test_disjoint_texts_yield_nothing(self):
        docs = [Document(id=str(i), body=body) for i, body in enumerate([
            LONG_A, LONG_B,
            "red orange yellow green blue indigo violet pink brown black",
            "cat dog bird fish horse cow sheep goat pig duck"])]
        assert deduplicate(docs, 0.5) == []

    def test_threshold_out_of_range(self):
        docs = [Document(id="a", body=LONG_A)]
        for bad in (0.0, -0.1, 1.5):
            with pytest.raises(ValueError):
                deduplicate(docs, bad)

    def test_against_exact_pairwise_oracle(self):
        near_a = LONG_A.replace("kappa", "lambda")
        docs = [
            Document(id="a", body=LONG_A),
            Document(id="b", body=near_a),
            Document(id="c", body=LONG_B),
            Document(id="d", body=LONG_A),
            Document(id="e", body="totally different words entirely here now yes ok fine sure"),
            Document(id="f", body=LONG_B + " extra"),
        ]
        threshold = 0.5
        groups = deduplicate(docs, threshold)

        # oracle: O(n^2) exact jaccard + transitive closure by repeated merge
        sets = {d.id: shingle_set(d.body) for d in docs}
        clusters = [{d.id} for d in docs]
        changed = True
        while changed:
            changed = False
            for i in range(len(clusters)):
                for j in range(i + 1, len(clusters)):
                    if any(jaccard(sets[x], sets[y]) >= threshold
                           for x in clusters[i] for y in clusters[j]):
                        clusters[i] |= clusters[j]
                        del clusters[j]
                        changed = True
                        break
                if changed:
                    break
        expected = sorted(tuple(sorted(c)) for c in clusters if len(c) > 1)
        assert [g.members for g in groups] == expected
        for g in groups:
            assert g.representative == min(g.members)
            for m in g.members:
                assert g.similarity[m] == pytest.approx(
                    jaccard(sets[m], sets[g.representative]))

    @given(st.permutations(list(range(6))))
    @settings(max_examples=20, deadline=None)
    def test_permutation_invariance(self, perm):
        bodies = [LONG_A, LONG_A.replace("kappa", "lambda"), LONG_B,
                  LONG_B + " extra", LONG_A, "misc words beyond any overlap"]
        docs = [Document(id=f"d{i}", body=bodies[i]) for i in range(6)]
        baseline = deduplicate(docs, 0.5)
        shuffled = deduplicate([docs[i] for i in perm], 0.5)
        assert [(g.representative, g.members) for g in baseline] == \
               [(g.representative, g.members) for g in shuffled]

    def test_threshold_one_groups_equal_shingle_sets(self):
        docs = [
            Document(id="a", body=LONG_A),
            Document(id="b", body=LONG_A),
            Document(id="c", body=LONG_A + " tail"),
            Document(id="d", body=LONG_B),
        ]
        groups = deduplicate(docs, 1.0)
        assert [g.members for g in groups] == [("a", "b")]

    def test_short_unequal_bodies_do_not_collapse(self):
        docs = [Document(id="a", body="fox"), Document(id="b", body="dog")]
        assert deduplicate(docs, 0.9) == []
