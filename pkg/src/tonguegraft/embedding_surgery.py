"""Embedding matrix surgery: grow a matrix for grafted tokens by mean init.

Matrices travel in a small binary container (magic ``TGEM``, version, row and
column counts, then little-endian float32 data in row-major order).  A new
token's row is the arithmetic mean of its constituents' base rows, accumulated
in float64 and rounded once to float32; base rows are copied bit for bit.
``logit_consistency_check`` probes the result with random hidden vectors: the
base vocabulary must score identically, and every grafted token must score
the mean of its constituents' logits.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import TonguegraftError
from .vocab_expansion import AdditionSet

MAGIC = b"TGEM"
MATRIX_VERSION = 1
_HEADER = struct.Struct("<4sIQQ")


class MatrixError(TonguegraftError):
    """Base class for embedding matrix format errors."""


class MatrixMagicError(MatrixError):
    """The file does not start with the TGEM magic."""


class MatrixVersionError(MatrixError):
    """The container version is not supported."""


class MatrixSizeError(MatrixError):
    """The payload size disagrees with the header, or the header is truncated."""


class MatrixValueError(MatrixError):
    """The payload contains NaN or infinite values."""


@dataclass(frozen=True)
class EmbeddingMatrix:
    """A dense float32 matrix; row index is the token id."""

    data: np.ndarray

    def __post_init__(self) -> None:
        if self.data.ndim != 2:
            raise MatrixError(f"embedding matrix must be 2-D, got shape {self.data.shape}")
        if self.data.dtype != np.float32:
            raise MatrixError(f"embedding matrix must be float32, got {self.data.dtype}")
        if not np.isfinite(self.data).all():
            raise MatrixValueError("embedding matrix contains non-finite values")

    @property
    def rows(self) -> int:
        return int(self.data.shape[0])

    @property
    def dim(self) -> int:
        return int(self.data.shape[1])


def write_matrix(matrix: EmbeddingMatrix, path: str) -> None:
    """Write the TGEM container; refuses non-finite payloads."""
    if not np.isfinite(matrix.data).all():
        raise MatrixValueError("refusing to write non-finite values")
    payload = np.ascontiguousarray(matrix.data, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, MATRIX_VERSION, matrix.rows, matrix.dim))
        fh.write(payload)


def read_matrix(path: str) -> EmbeddingMatrix:
    """Read a TGEM container, checking magic, version, size, and finiteness."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4 or raw[:4] != MAGIC:
        raise MatrixMagicError(f"{path}: not a TGEM file")
    if len(raw) < _HEADER.size:
        raise MatrixSizeError(f"{path}: truncated header")
    _, version, rows, cols = _HEADER.unpack_from(raw)
    if version != MATRIX_VERSION:
        raise MatrixVersionError(f"{path}: unsupported version {version}")
    expected = rows * cols * 4
    payload = raw[_HEADER.size :]
    if len(payload) != expected:
        raise MatrixSizeError(
            f"{path}: payload is {len(payload)} bytes, header implies {expected}"
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(rows, cols).astype(np.float32)
    if not np.isfinite(data).all():
        raise MatrixValueError(f"{path}: payload contains non-finite values")
    return EmbeddingMatrix(data)


def mean_init(base: EmbeddingMatrix, addition: AdditionSet) -> EmbeddingMatrix:
    """Grow ``base`` by one mean-of-constituents row per addition entry.

    The first ``base.rows`` rows of the result are bit-identical to the
    input.  Each new row is the arithmetic mean of the constituent rows,
    accumulated in float64 and rounded to float32 once at the end.
    """
    if base.rows != addition.base_vocab_size:
        raise MatrixError(
            f"matrix has {base.rows} rows but the addition was built against "
            f"{addition.base_vocab_size}"
        )
    out = np.empty((base.rows + len(addition), base.dim), dtype=np.float32)
    out[: base.rows] = base.data
    for i, entry in enumerate(addition.entries):
        ids = np.asarray(entry.constituents)
        if ids.min() < 0 or ids.max() >= base.rows:
            raise MatrixError(
                f"constituent id out of range for {entry.token!r}: {entry.constituents}"
            )
        out[base.rows + i] = base.data[ids].astype(np.float64).mean(axis=0).astype(np.float32)
    return EmbeddingMatrix(out)


@dataclass(frozen=True)
class LogitCheckReport:
    """Outcome of the random-probe consistency check."""

    passed: bool
    trials: int
    seed: int
    tolerance: float
    max_base_deviation: float
    max_relative_deviation: float
    failures: tuple[tuple[int, str, float], ...]

    def lines(self) -> list[str]:
        out = [
            f"trials\t{self.trials}",
            f"seed\t{self.seed}",
            f"tolerance\t{self.tolerance:g}",
            f"max_base_deviation\t{self.max_base_deviation:g}",
            f"max_relative_deviation\t{self.max_relative_deviation:.3e}",
            f"passed\t{str(self.passed).lower()}",
        ]
        for row, token, dev in self.failures:
            out.append(f"fail\trow={row}\ttoken={token}\tdeviation={dev:.3e}")
        return out


def logit_consistency_check(
    base: EmbeddingMatrix,
    expanded: EmbeddingMatrix,
    addition: AdditionSet,
    trials: int = 100,
    seed: int = 0,
    tolerance: float = 1e-6,
) -> LogitCheckReport:
    """Probe both matrices with random hidden vectors and compare logits.

    For every probe, the base-vocabulary logits must be identical between the
    two matrices, and each grafted row's logit must equal the mean of its
    constituents' logits within ``tolerance`` (relative to the scale of the
    constituent logits, so near-zero expected values do not blow up the
    ratio).  Logits are computed in float64; the only rounding in play is the
    single float32 rounding of the stored row.
    """
    if base.dim != expanded.dim:
        raise MatrixError(f"dimension mismatch: {base.dim} vs {expanded.dim}")
    if expanded.rows != base.rows + len(addition):
        raise MatrixError(
            f"expanded matrix has {expanded.rows} rows, expected "
            f"{base.rows} + {len(addition)}"
        )
    if base.rows != addition.base_vocab_size:
        raise MatrixError(
            f"matrix has {base.rows} rows but the addition was built against "
            f"{addition.base_vocab_size}"
        )

    rng = np.random.default_rng(seed)
    hidden = rng.standard_normal((base.dim, trials))

    base64 = base.data.astype(np.float64)
    expanded64 = expanded.data.astype(np.float64)
    base_logits = base64 @ hidden
    prefix_logits = expanded64[: base.rows] @ hidden
    max_base_dev = float(np.abs(base_logits - prefix_logits).max(initial=0.0))

    max_rel = 0.0
    failures: list[tuple[int, str, float]] = []
    for i, entry in enumerate(addition.entries):
        row = base.rows + i
        got = expanded64[row] @ hidden
        member_logits = base_logits[list(entry.constituents)]
        want = member_logits.mean(axis=0)
        scale = np.maximum(np.abs(want), np.abs(member_logits).mean(axis=0))
        scale = np.maximum(scale, np.finfo(np.float64).tiny)
        rel = float((np.abs(got - want) / scale).max(initial=0.0))
        max_rel = max(max_rel, rel)
        if rel > tolerance:
            failures.append((row, entry.token, rel))

    passed = max_base_dev == 0.0 and not failures
    return LogitCheckReport(
        passed=passed,
        trials=trials,
        seed=seed,
        tolerance=tolerance,
        max_base_deviation=max_base_dev,
        max_relative_deviation=max_rel,
        failures=tuple(failures),
    )
