"""Binary file formats and plain-text reports.

All binary formats are little-endian with no padding and start with a
4-byte ASCII magic followed by a u32 version (always 1). Byte layouts are
documented in FORMATS.md at the repository root.

Writers accept a path or a binary file object; writing to a path goes through
a temporary file in the same directory followed by an atomic rename.
"""

from __future__ import annotations

import io
import json
import os
import struct
import tempfile
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .assembly import ClapProjection, EmbeddingTableSet
from .errors import EmptyInputError, FormatError, NumericError, ShapeError
from .rvq import CodebookStack, QuantizationStats, TokenSequence

VERSION = 1
MAGIC_FEATURES = b"ARTF"
MAGIC_CODEBOOKS = b"ARTC"
MAGIC_TOKENS = b"ARTT"
MAGIC_EMBEDDINGS = b"ARTE"

_F32 = np.dtype("<f4")
_U32 = np.dtype("<u4")

# struct formats of the header fields after (magic, version)
_FEATURES_HEADER = struct.Struct("<QI")  # length, dim
_CODEBOOKS_HEADER = struct.Struct("<III")  # num_layers, codebook_size, dim
_TOKENS_HEADER = struct.Struct("<IQI")  # num_layers, length, codebook_size
_EMBEDDINGS_HEADER = struct.Struct("<IIIII")  # num_layers, rows, hidden, max_len, clap_dim


# -- low-level helpers -------------------------------------------------------

def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(data: bytes, sink) -> None:
    if isinstance(sink, (str, os.PathLike)):
        atomic_write_bytes(sink, data)
    else:
        sink.write(data)


def _slurp(source) -> bytes:
    if isinstance(source, (bytes, bytearray, memoryview)):
        return bytes(source)
    if isinstance(source, (str, os.PathLike)):
        return Path(source).read_bytes()
    return source.read()


def _f32_payload(arr, what: str) -> bytes:
    a = np.asarray(arr, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise NumericError(f"{what} contains NaN or Inf")
    with np.errstate(over="ignore"):
        f = a.astype(_F32)
    if not np.all(np.isfinite(f)):
        raise NumericError(f"{what} overflows 32-bit float range")
    return f.tobytes(order="C")


class _Reader:
    """Cursor over a byte buffer that reports offsets in its errors."""

    def __init__(self, data: bytes, magic: bytes, kind: str):
        self.data = data
        self.pos = 0
        self.kind = kind
        head = self.take(4, "magic")
        if head != magic:
            raise FormatError(f"bad magic {head!r} for {kind} file, expected {magic!r}", 0)
        (version,) = struct.unpack("<I", self.take(4, "version"))
        if version != VERSION:
            raise FormatError(f"unsupported {kind} version {version}, expected {VERSION}", 4)

    def take(self, n: int, what: str) -> bytes:
        end = self.pos + n
        if end > len(self.data):
            raise FormatError(
                f"truncated {self.kind} file while reading {what}: expected {end} bytes, "
                f"file has {len(self.data)}",
                len(self.data),
            )
        chunk = self.data[self.pos:end]
        self.pos = end
        return chunk

    def unpack(self, st: struct.Struct, what: str) -> tuple:
        return st.unpack(self.take(st.size, what))

    def array(self, dtype: np.dtype, shape: tuple, what: str) -> np.ndarray:
        count = int(np.prod(shape, dtype=np.int64))
        raw = self.take(count * dtype.itemsize, what)
        return np.frombuffer(raw, dtype=dtype).reshape(shape).copy()

    def finish(self) -> None:
        if self.pos != len(self.data):
            raise FormatError(
                f"{len(self.data) - self.pos} trailing bytes after {self.kind} payload: "
                f"expected {self.pos} bytes, file has {len(self.data)}",
                self.pos,
            )


def _preamble(magic: bytes) -> bytes:
    return magic + struct.pack("<I", VERSION)


# -- features ----------------------------------------------------------------

def features_to_bytes(seq) -> bytes:
    a = np.asarray(seq)
    if a.ndim != 2:
        raise ShapeError(f"feature sequence must be 2-D (L, D), got shape {a.shape}")
    length, dim = a.shape
    if length == 0:
        raise EmptyInputError("feature sequence must contain at least one vector")
    if dim == 0:
        raise ShapeError("feature vectors must have dimension >= 1")
    return _preamble(MAGIC_FEATURES) + _FEATURES_HEADER.pack(length, dim) + _f32_payload(a, "features")


def features_from_bytes(data: bytes) -> np.ndarray:
    r = _Reader(data, MAGIC_FEATURES, "feature")
    length, dim = r.unpack(_FEATURES_HEADER, "header")
    if length == 0 or dim == 0:
        raise FormatError(f"feature file declares empty shape ({length}, {dim})", 8)
    out = r.array(_F32, (length, dim), "payload")
    r.finish()
    return out


def write_features(seq, sink) -> None:
    """Write an ``(L, D)`` sequence as ARTF (float32, row-major)."""
    _emit(features_to_bytes(seq), sink)


def read_features(source) -> np.ndarray:
    """Read an ARTF file into a float32 ``(L, D)`` array."""
    return features_from_bytes(_slurp(source))


# -- codebook stacks ---------------------------------------------------------

def codebooks_to_bytes(stack: CodebookStack) -> bytes:
    n, k, d = stack.codebooks.shape
    return (_preamble(MAGIC_CODEBOOKS) + _CODEBOOKS_HEADER.pack(n, k, d)
            + _f32_payload(stack.codebooks, "codebook stack"))


def codebooks_from_bytes(data: bytes) -> CodebookStack:
    r = _Reader(data, MAGIC_CODEBOOKS, "codebook stack")
    n, k, d = r.unpack(_CODEBOOKS_HEADER, "header")
    if 0 in (n, k, d):
        raise FormatError(f"codebook stack declares empty shape ({n}, {k}, {d})", 8)
    books = r.array(_F32, (n, k, d), "payload")
    r.finish()
    return CodebookStack(books)


def write_codebook_stack(stack: CodebookStack, sink) -> None:
    _emit(codebooks_to_bytes(stack), sink)


def read_codebook_stack(source) -> CodebookStack:
    return codebooks_from_bytes(_slurp(source))


# -- token grids -------------------------------------------------------------

def tokens_to_bytes(tokens: TokenSequence) -> bytes:
    n, length = tokens.codes.shape
    if tokens.codebook_size > np.iinfo(np.uint32).max:
        raise ShapeError(f"codebook size {tokens.codebook_size} does not fit in u32")
    return (_preamble(MAGIC_TOKENS) + _TOKENS_HEADER.pack(n, length, tokens.codebook_size)
            + tokens.codes.astype(_U32).tobytes(order="C"))


def tokens_from_bytes(data: bytes) -> TokenSequence:
    """Parse ARTT; raises :class:`~arttok.errors.InvalidTokenError` naming the
    (layer, position) of the first code not below the declared alphabet."""
    r = _Reader(data, MAGIC_TOKENS, "token")
    n, length, k = r.unpack(_TOKENS_HEADER, "header")
    if n == 0 or k == 0:
        raise FormatError(f"token file declares num_layers={n}, codebook_size={k}", 8)
    codes = r.array(_U32, (n, length), "payload")
    r.finish()
    return TokenSequence(codes.astype(np.int64), k)


def write_tokens(tokens: TokenSequence, sink) -> None:
    _emit(tokens_to_bytes(tokens), sink)


def read_tokens(source) -> TokenSequence:
    return tokens_from_bytes(_slurp(source))


# -- embedding tables --------------------------------------------------------

def embeddings_to_bytes(tables: EmbeddingTableSet, proj: ClapProjection | None = None) -> bytes:
    n, rows, hidden = tables.per_layer_tables.shape
    clap_dim = 0
    parts = [
        _f32_payload(tables.per_layer_tables, "layer tables"),
        _f32_payload(tables.bos_embedding, "bos embedding"),
        _f32_payload(tables.eos_embedding, "eos embedding"),
        _f32_payload(tables.positional_table, "positional table"),
    ]
    if proj is not None:
        if proj.out_dim != hidden:
            raise ShapeError(f"projection output {proj.out_dim} does not match hidden size {hidden}")
        clap_dim = proj.in_dim
        parts += [_f32_payload(proj.weight, "projection weight"), _f32_payload(proj.bias, "projection bias")]
    header = _EMBEDDINGS_HEADER.pack(n, rows, hidden, tables.max_len, clap_dim)
    return _preamble(MAGIC_EMBEDDINGS) + header + b"".join(parts)


def embeddings_from_bytes(data: bytes) -> tuple[EmbeddingTableSet, ClapProjection | None]:
    r = _Reader(data, MAGIC_EMBEDDINGS, "embedding table")
    n, rows, hidden, max_len, clap_dim = r.unpack(_EMBEDDINGS_HEADER, "header")
    if 0 in (n, rows, hidden):
        raise FormatError(f"embedding file declares empty shape ({n}, {rows}, {hidden})", 8)
    tables = r.array(_F32, (n, rows, hidden), "layer tables")
    bos = r.array(_F32, (hidden,), "bos embedding")
    eos = r.array(_F32, (hidden,), "eos embedding")
    pos = r.array(_F32, (max_len, hidden), "positional table")
    proj = None
    if clap_dim:
        weight = r.array(_F32, (clap_dim, hidden), "projection weight")
        bias = r.array(_F32, (hidden,), "projection bias")
        proj = ClapProjection(weight, bias)
    r.finish()
    return EmbeddingTableSet(tables, bos, eos, pos), proj


def write_embedding_tables(tables: EmbeddingTableSet, sink, proj: ClapProjection | None = None) -> None:
    _emit(embeddings_to_bytes(tables, proj), sink)


def read_embedding_tables(source) -> tuple[EmbeddingTableSet, ClapProjection | None]:
    return embeddings_from_bytes(_slurp(source))


# -- text reports ------------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:.6f}"


def format_probe_report(report) -> str:
    """Human table followed by a ``key=value`` section that
    :func:`parse_report` reads back."""
    out = io.StringIO()
    out.write("# probe report\n")
    out.write(f"{'N':>4}  {'bits':>8}  {'quantized_acc':>13}  {'energy_ratio':>12}\n")
    for n, bits, acc, ratio in zip(report.layer_counts, report.bits_per_vector,
                                   report.quantized_accuracy, report.residual_energy_ratio):
        out.write(f"{n:>4}  {bits:>8.2f}  {acc:>13.6f}  {ratio:>12.6f}\n")
    out.write("\n[machine]\n")
    out.write(f"codebook_size={report.codebook_size}\n")
    out.write(f"raw_accuracy={_fmt(report.raw_accuracy)}\n")
    out.write("layer_counts=" + ",".join(str(n) for n in report.layer_counts) + "\n")
    out.write("bits_per_vector=" + ",".join(_fmt(b) for b in report.bits_per_vector) + "\n")
    out.write("quantized_accuracy=" + ",".join(_fmt(a) for a in report.quantized_accuracy) + "\n")
    out.write("residual_energy_ratio=" + ",".join(_fmt(e) for e in report.residual_energy_ratio) + "\n")
    return out.getvalue()


def probe_report_to_json(report) -> str:
    return json.dumps(asdict(report), indent=2, sort_keys=True) + "\n"


def format_stats(stats: QuantizationStats) -> str:
    out = io.StringIO()
    out.write("# quantization stats\n")
    out.write(f"{'stage':>8}  {'residual_energy':>18}  {'utilization':>11}\n")
    util = [None] + list(stats.codebook_utilization)
    for i, (e, u) in enumerate(zip(stats.per_layer_residual_energy, util)):
        stage = "input" if i == 0 else f"layer{i - 1}"
        out.write(f"{stage:>8}  {e:>18.6f}  {'' if u is None else f'{u:.4f}':>11}\n")
    out.write("\n[machine]\n")
    out.write(f"bits_per_vector={_fmt(stats.bits_per_vector)}\n")
    out.write("per_layer_residual_energy="
              + ",".join(repr(float(e)) for e in stats.per_layer_residual_energy) + "\n")
    out.write("codebook_utilization=" + ",".join(_fmt(u) for u in stats.codebook_utilization) + "\n")
    out.write(f"residual_energy_ratio={_fmt(stats.residual_energy_ratio)}\n")
    return out.getvalue()


def parse_report(text: str) -> dict[str, str]:
    """The ``key=value`` lines after the ``[machine]`` marker."""
    fields: dict[str, str] = {}
    in_machine = False
    for line in text.splitlines():
        line = line.strip()
        if line == "[machine]":
            in_machine = True
        elif in_machine and "=" in line:
            key, value = line.split("=", 1)
            fields[key] = value
    return fields
