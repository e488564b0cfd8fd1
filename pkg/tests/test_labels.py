import pytest

from stf_ee.encoding import Vocab, pad_batch
from stf_ee.errors import EmptyInput
from stf_ee.labels import LabelSchema, bio_tagset, bio_to_spans, spans_to_bio


class TestLabelSchema:
    def test_tagsets_and_ids(self):
        schema = LabelSchema(("A", "B"), ("X", "Y", "Z"))
        assert schema.trigger_tags == ("O", "B-A", "I-A", "B-B", "I-B")
        assert schema.trigger_tags[0] == "O"
        assert schema.type_id("B") == 1
        assert schema.role_id("Z") == 2
        assert schema.role_id("O") == 3 == schema.role_o_id
        assert schema.role_name(3) == "O"

    def test_round_trip_dict(self):
        schema = LabelSchema(("A",), ("X", "Y"))
        assert LabelSchema.from_dict(schema.to_dict()) == schema

    def test_rejects_duplicates(self):
        with pytest.raises(ValueError):
            LabelSchema(("A", "A"), ("X",))


class TestBioConversion:
    TAGS = bio_tagset(("A", "B"))

    def test_spans_to_bio_and_back(self):
        spans = [(1, 3, "A"), (4, 5, "B")]
        tags = spans_to_bio(spans, 6, self.TAGS)
        assert bio_to_spans(tags, self.TAGS) == spans

    def test_overlap_keeps_first(self):
        tags = spans_to_bio([(1, 3, "A"), (2, 4, "B")], 5, self.TAGS)
        assert bio_to_spans(tags, self.TAGS) == [(1, 3, "A")]

    def test_span_reaching_end(self):
        tags = spans_to_bio([(3, 5, "B")], 5, self.TAGS)
        assert bio_to_spans(tags, self.TAGS) == [(3, 5, "B")]

    def test_adjacent_b_tags_split_spans(self):
        index = {t: i for i, t in enumerate(self.TAGS)}
        tags = [index["B-A"], index["B-A"], index["I-A"]]
        assert bio_to_spans(tags, self.TAGS) == [(0, 1, "A"), (1, 3, "A")]


class TestVocab:
    def test_build_sorted_and_stable(self):
        a = Vocab.build([["b", "a"], ["c", "a"]])
        b = Vocab.build([["c"], ["b"], ["a"]])
        assert a.itos == b.itos

    def test_unknown_maps_to_unk(self):
        vocab = Vocab.build([["known"]])
        known, unknown = vocab.encode(["known", "never-seen"])
        assert unknown == vocab.stoi["<unk>"]
        assert known != unknown

    def test_pad_batch_shapes(self):
        batch, lengths = pad_batch([[3, 4], [5]])
        assert batch.tolist() == [[3, 4], [5, 0]]
        assert lengths.tolist() == [2, 1]

    def test_pad_batch_rejects_empty(self):
        with pytest.raises(EmptyInput):
            pad_batch([])
        with pytest.raises(EmptyInput):
            pad_batch([[1], []])
