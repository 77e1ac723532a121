import io

import numpy as np
import pytest

from softctc import (
    ConfusionNetwork,
    ConfusionSet,
    Labeling,
    NBestList,
    PosteriorMatrix,
    Segment,
    ValidationError,
    Vocabulary,
    compile_cn,
    trivial_cn,
)
from softctc.io import (
    dump_target,
    read_cn,
    read_nbest,
    read_posteriors,
    write_cn,
    write_gradient,
    write_nbest,
    write_posteriors,
)

V = Vocabulary.from_characters("ab ")


def roundtrip_cn(cn, v, meta=None):
    buf = io.StringIO()
    write_cn(buf, cn, v, meta)
    buf.seek(0)
    return read_cn(buf, v)


class TestPosteriorRoundTrip:
    def test_values_survive_bit_for_bit(self):
        rng = np.random.default_rng(101)
        y = rng.dirichlet(np.full(4, 0.5), size=7)
        buf = io.StringIO()
        write_posteriors(buf, PosteriorMatrix(y), V)
        buf.seek(0)
        back, v2 = read_posteriors(buf)
        assert np.array_equal(back.frames, y)
        # the blank display is canonicalized; letters and index must survive
        assert v2.blank == V.blank
        assert [s for i, s in enumerate(v2.symbols) if i != v2.blank] == [
            s for i, s in enumerate(V.symbols) if i != V.blank
        ]

    def test_space_symbol_uses_reserved_token(self):
        buf = io.StringIO()
        write_posteriors(buf, PosteriorMatrix(np.full((1, 4), 0.25)), V)
        text = buf.getvalue()
        assert "<space>" in text.splitlines()[1]
        buf.seek(0)
        _, v2 = read_posteriors(buf)
        assert " " in v2.symbols

    def test_serialization_is_deterministic(self):
        y = PosteriorMatrix(np.random.default_rng(0).dirichlet([1, 1, 1, 1], size=3))
        a, b = io.StringIO(), io.StringIO()
        write_posteriors(a, y, V)
        write_posteriors(b, y, V)
        assert a.getvalue() == b.getvalue()

    def test_gradient_dump_keeps_negative_values(self):
        g = np.array([[-0.5, 0.0, 0.25, -1.0]])
        buf = io.StringIO()
        write_gradient(buf, g, V)
        assert "-0.5" in buf.getvalue()

    def test_rejects_wrong_header(self):
        with pytest.raises(ValidationError):
            read_posteriors(io.StringIO("# nbest v1\n"))

    def test_rejects_ragged_rows(self):
        text = "# posteriors v1\na b <space> <blank>\n0.25 0.25 0.5\n"
        with pytest.raises(ValidationError):
            read_posteriors(io.StringIO(text))

    def test_rejects_missing_blank_token(self):
        text = "# posteriors v1\na b c d\n0.25 0.25 0.25 0.25\n"
        with pytest.raises(ValidationError):
            read_posteriors(io.StringIO(text))

    def test_rejects_empty_body(self):
        with pytest.raises(ValidationError):
            read_posteriors(io.StringIO("# posteriors v1\na <blank>\n"))


class TestCnRoundTrip:
    def test_normalized_network_round_trips(self):
        cn = ConfusionNetwork(
            (
                ConfusionSet({0: 0.6, 1: 0.3}, 0.1),
                ConfusionSet({2: 1.0}),
            ),
            normalized=True,
        )
        back, v2, meta = roundtrip_cn(cn, V)
        assert back.normalized
        assert back.sets == cn.sets
        assert meta == {}

    def test_raw_network_keeps_total_score(self):
        cn = ConfusionNetwork(
            (ConfusionSet({0: 0.3}, 0.4),), normalized=False, total_score=0.7
        )
        back, _, _ = roundtrip_cn(cn, V)
        assert not back.normalized
        assert back.total_score == 0.7
        assert back.sets == cn.sets

    def test_metadata_round_trips(self):
        cn = ConfusionNetwork((ConfusionSet({0: 1.0}),), normalized=True)
        back, _, meta = roundtrip_cn(cn, V, meta={"line": "17", "source": "beam"})
        assert meta == {"line": "17", "source": "beam"}
        assert back.sets == cn.sets

    def test_without_vocabulary_symbols_come_from_the_file(self):
        cn = ConfusionNetwork((ConfusionSet({0: 0.5, 2: 0.5}),), normalized=True)
        buf = io.StringIO()
        write_cn(buf, cn, V)
        buf.seek(0)
        back, v2, _ = read_cn(buf)
        # first appearance order: "a" then "<space>", blank appended last
        assert v2.symbols == ("a", " ", "<blank>")
        assert back.sets[0].alternatives == {0: 0.5, 1: 0.5}

    def test_values_survive_bit_for_bit(self):
        rng = np.random.default_rng(103)
        raw = rng.dirichlet([1.0, 1.0, 1.0])
        cn = ConfusionNetwork(
            (ConfusionSet({0: raw[0], 1: raw[1]}, raw[2]),), normalized=True
        )
        back, _, _ = roundtrip_cn(cn, V)
        assert back.sets[0].alternatives[0] == raw[0]
        assert back.sets[0].alternatives[1] == raw[1]
        assert back.sets[0].null == raw[2]

    def test_serialization_is_byte_stable(self):
        cn = ConfusionNetwork(
            (ConfusionSet({1: 0.25, 0: 0.7}, 0.05),), normalized=True
        )
        a, b = io.StringIO(), io.StringIO()
        write_cn(a, cn, V)
        write_cn(b, cn, V)
        assert a.getvalue() == b.getvalue()

    def test_rejects_blank_in_a_set(self):
        text = "# confusion-network v1\nsets 1\nset <blank> 1.0\n"
        with pytest.raises(ValidationError):
            read_cn(io.StringIO(text), V)

    def test_rejects_unknown_symbol_against_vocabulary(self):
        text = "# confusion-network v1\nsets 1\nset z 1.0\n"
        with pytest.raises(ValidationError):
            read_cn(io.StringIO(text), V)

    def test_rejects_set_count_mismatch(self):
        text = "# confusion-network v1\nsets 2\nset a 1.0\n"
        with pytest.raises(ValidationError):
            read_cn(io.StringIO(text), V)

    def test_rejects_odd_token_count(self):
        text = "# confusion-network v1\nsets 1\nset a 0.5 b\n"
        with pytest.raises(ValidationError):
            read_cn(io.StringIO(text), V)

    def test_rejects_junk_normalized_flag(self):
        text = "# confusion-network v1\nnormalized yes\nsets 1\nset a 1.0\n"
        with pytest.raises(ValidationError):
            read_cn(io.StringIO(text), V)

    def test_rejects_bad_value(self):
        text = "# confusion-network v1\nsets 1\nset a one\n"
        with pytest.raises(ValidationError):
            read_cn(io.StringIO(text), V)


class TestNbestRoundTrip:
    def test_segment_groups_round_trip(self):
        groups = [
            (
                Segment(0, 3, confident=False),
                NBestList(((Labeling((0,)), 0.6), (Labeling((0, 1)), 0.4))),
            ),
            (
                Segment(3, 5, confident=True),
                NBestList(((Labeling((2,)), 1.0),)),
            ),
        ]
        buf = io.StringIO()
        write_nbest(buf, groups, V)
        buf.seek(0)
        back = read_nbest(buf, V)
        assert len(back) == 2
        for (seg, nbest), (seg2, nbest2) in zip(groups, back):
            assert seg2 == seg
            assert tuple(nbest2) == tuple(nbest)

    def test_headerless_single_list(self):
        text = "# nbest v1\n0.75 a b\n0.25 a\n"
        back = read_nbest(io.StringIO(text), V)
        assert len(back) == 1
        seg, nbest = back[0]
        assert seg is None
        assert nbest.entries[0] == (Labeling((0, 1)), 0.75)

    def test_empty_labeling_entry(self):
        text = "# nbest v1\n1.0\n"
        (_, nbest), = read_nbest(io.StringIO(text), V)
        assert nbest.entries[0][0].symbols == ()

    def test_rejects_empty_group(self):
        text = "# nbest v1\nsegment 0 2 confident\n"
        with pytest.raises(ValidationError):
            read_nbest(io.StringIO(text), V)

    def test_rejects_bad_weight(self):
        with pytest.raises(ValidationError):
            read_nbest(io.StringIO("# nbest v1\nheavy a\n"), V)

    def test_rejects_unknown_symbol(self):
        with pytest.raises(ValidationError):
            read_nbest(io.StringIO("# nbest v1\n1.0 z\n"), V)


class TestDumpTarget:
    def test_linear_chain_structure(self):
        target = compile_cn(trivial_cn(Labeling((0,))), V)
        text = dump_target(target, V)
        lines = text.splitlines()
        assert lines[0] == "# compiled-target v1"
        assert lines[1] == "states 3"
        assert "state 1 group 0 letter a" in lines
        assert any(ln.startswith("edges ") for ln in lines)
        # unit diagonal shows up as self edges
        assert "edge 0 0 1.0" in lines
        assert "edge 1 1 1.0" in lines

    def test_dump_is_deterministic(self):
        cn = ConfusionNetwork(
            (ConfusionSet({0: 0.6, 1: 0.4}), ConfusionSet({2: 0.9}, 0.1)),
            normalized=True,
        )
        target = compile_cn(cn, V)
        assert dump_target(target, V) == dump_target(target, V)

    def test_blank_states_use_the_reserved_token(self):
        target = compile_cn(trivial_cn(Labeling((0,))), V)
        assert "<blank>" in dump_target(target, V)
