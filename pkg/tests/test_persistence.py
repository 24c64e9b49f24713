import io
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from arttok import persistence as store
from arttok.assembly import make_projection, make_tables
from arttok.errors import EmptyInputError, FormatError, InvalidTokenError, NumericError
from arttok.probe import ProbeReport
from arttok.rvq import CodebookStack, QuantizationStats, TokenSequence


def f32(rng, *shape):
    return rng.normal(size=shape).astype(np.float32)


class TestFeatures:
    def test_round_trip(self, tmp_path):
        seq = f32(np.random.default_rng(0), 7, 5)
        store.write_features(seq, tmp_path / "a.artf")
        back = store.read_features(tmp_path / "a.artf")
        assert back.dtype == np.float32 and back.tobytes() == seq.tobytes()

    def test_layout(self):
        seq = np.array([[1.0, 2.0]], dtype=np.float32)
        data = store.features_to_bytes(seq)
        assert data == b"ARTF" + struct.pack("<IQI", 1, 1, 2) + struct.pack("<2f", 1.0, 2.0)

    def test_stream_sink(self):
        buf = io.BytesIO()
        store.write_features(np.ones((2, 3)), buf)
        assert store.read_features(io.BytesIO(buf.getvalue())).shape == (2, 3)

    def test_empty_rejected(self):
        with pytest.raises(EmptyInputError):
            store.features_to_bytes(np.zeros((0, 4)))

    def test_non_finite_rejected(self):
        with pytest.raises(NumericError):
            store.features_to_bytes(np.array([[np.nan]]))
        with pytest.raises(NumericError):
            store.features_to_bytes(np.array([[1e300]]))

    def test_truncated(self):
        data = store.features_to_bytes(np.ones((4, 3)))
        with pytest.raises(FormatError) as info:
            store.features_from_bytes(data[:-5])
        assert f"expected {len(data)} bytes" in str(info.value)
        assert f"file has {len(data) - 5}" in str(info.value)

    def test_bad_version(self):
        data = bytearray(store.features_to_bytes(np.ones((1, 1))))
        data[4] = 2
        with pytest.raises(FormatError, match="version"):
            store.features_from_bytes(bytes(data))

    def test_trailing_bytes(self):
        with pytest.raises(FormatError, match="trailing"):
            store.features_from_bytes(store.features_to_bytes(np.ones((1, 1))) + b"\0")


class TestCodebooks:
    def test_paper_scale_round_trip(self):
        stack = CodebookStack(f32(np.random.default_rng(1), 16, 1024, 768))
        data = store.codebooks_to_bytes(stack)
        assert len(data) == 20 + 4 * 16 * 1024 * 768
        back = store.codebooks_from_bytes(data)
        assert back.codebooks.tobytes() == stack.codebooks.tobytes()

    def test_single_layer(self, tmp_path):
        stack = CodebookStack(f32(np.random.default_rng(2), 1, 3, 2))
        store.write_codebook_stack(stack, tmp_path / "c.artc")
        assert store.read_codebook_stack(tmp_path / "c.artc") == stack

    def test_header_claims_more_layers(self):
        stack = CodebookStack(f32(np.random.default_rng(3), 2, 4, 3))
        data = bytearray(store.codebooks_to_bytes(stack))
        data[8:12] = struct.pack("<I", 3)
        with pytest.raises(FormatError, match="truncated"):
            store.codebooks_from_bytes(bytes(data))


class TestTokens:
    def test_round_trip(self):
        tokens = TokenSequence(np.random.default_rng(4).integers(0, 1024, size=(16, 33)), 1024)
        assert store.tokens_from_bytes(store.tokens_to_bytes(tokens)) == tokens

    def test_file_size(self):
        n, length = 16, 250
        tokens = TokenSequence(np.zeros((n, length), dtype=int), 1024)
        assert len(store.tokens_to_bytes(tokens)) == 24 + 4 * n * length

    def test_out_of_range_code_reported(self):
        tokens = TokenSequence(np.zeros((3, 6), dtype=int), 16)
        data = bytearray(store.tokens_to_bytes(tokens))
        offset = 24 + 4 * (1 * 6 + 4)
        data[offset:offset + 4] = struct.pack("<I", 16)
        with pytest.raises(InvalidTokenError) as info:
            store.tokens_from_bytes(bytes(data))
        assert (info.value.layer, info.value.position) == (1, 4)

    def test_zero_length_grid(self):
        tokens = TokenSequence(np.zeros((2, 0), dtype=int), 4)
        assert store.tokens_from_bytes(store.tokens_to_bytes(tokens)) == tokens


class TestEmbeddings:
    def test_round_trip_with_projection(self):
        tables = make_tables(3, 8, hidden=6, max_len=10, seed=1)
        proj = make_projection(4, 6, seed=1)
        back, back_proj = store.embeddings_from_bytes(store.embeddings_to_bytes(tables, proj))
        np.testing.assert_array_equal(back.per_layer_tables, tables.per_layer_tables.astype(np.float32))
        np.testing.assert_array_equal(back.positional_table, tables.positional_table.astype(np.float32))
        np.testing.assert_array_equal(back_proj.weight, proj.weight.astype(np.float32))

    def test_without_projection(self):
        tables = make_tables(1, 2, hidden=3, max_len=4, seed=0)
        _, proj = store.embeddings_from_bytes(store.embeddings_to_bytes(tables))
        assert proj is None


WRITERS = {
    "ARTF": lambda: store.features_to_bytes(np.ones((2, 2))),
    "ARTC": lambda: store.codebooks_to_bytes(CodebookStack(np.ones((1, 2, 2)))),
    "ARTT": lambda: store.tokens_to_bytes(TokenSequence(np.zeros((1, 2), dtype=int), 2)),
    "ARTE": lambda: store.embeddings_to_bytes(make_tables(1, 2, 2, 4)),
}
READERS = {
    "ARTF": store.features_from_bytes,
    "ARTC": store.codebooks_from_bytes,
    "ARTT": store.tokens_from_bytes,
    "ARTE": store.embeddings_from_bytes,
}


@pytest.mark.parametrize("written", sorted(WRITERS))
@pytest.mark.parametrize("reader", sorted(READERS))
def test_readers_reject_foreign_magic(written, reader):
    data = WRITERS[written]()
    if written == reader:
        READERS[reader](data)
    else:
        with pytest.raises(FormatError, match="bad magic") as info:
            READERS[reader](data)
        assert info.value.offset == 0


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 4), k=st.integers(1, 50), length=st.integers(0, 30), seed=st.integers(0, 2**32 - 1))
def test_token_round_trip_property(n, k, length, seed):
    tokens = TokenSequence(np.random.default_rng(seed).integers(0, k, size=(n, length)), k)
    assert store.tokens_from_bytes(store.tokens_to_bytes(tokens)) == tokens


@settings(max_examples=50, deadline=None)
@given(length=st.integers(1, 20), dim=st.integers(1, 9), seed=st.integers(0, 2**32 - 1))
def test_feature_round_trip_property(length, dim, seed):
    rng = np.random.default_rng(seed)
    seq = (rng.standard_cauchy(size=(length, dim)) * 1e3).astype(np.float32)
    a = store.features_to_bytes(seq)
    assert store.features_from_bytes(a).tobytes() == seq.tobytes()
    assert store.features_to_bytes(seq.copy()) == a


def test_reports_parse_back():
    report = ProbeReport([1, 2], 64, 0.9, [0.7, 0.8], [0.5, 0.3], [6.0, 12.0])
    fields = store.parse_report(store.format_probe_report(report))
    assert fields["layer_counts"] == "1,2"
    assert fields["bits_per_vector"] == "6.000000,12.000000"
    stats = QuantizationStats([4.0, 1.0, 0.25], 2.0, [1.0, 0.5])
    fields = store.parse_report(store.format_stats(stats))
    assert [float(e) for e in fields["per_layer_residual_energy"].split(",")] == [4.0, 1.0, 0.25]
    assert float(fields["residual_energy_ratio"]) == 0.0625


def test_atomic_write_leaves_no_temp(tmp_path):
    store.atomic_write_bytes(tmp_path / "x.bin", b"abc")
    assert [p.name for p in tmp_path.iterdir()] == ["x.bin"]
