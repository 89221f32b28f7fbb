"""Response matrices, embedding indices, and their binary container format.

Container layout (little-endian):

    magic      4 bytes   b"BCRM" (response matrix) or b"BCEI" (embedding index)
    version    u32       currently 1
    flags      u8        BCRM: provenance (0 measured, 1 predicted); BCEI: 0
    n_rows     u64
    n_cols     u64
    row ids    n_rows x (u32 length + UTF-8 bytes)
    col ids    n_cols x (u32 length + UTF-8 bytes)   [BCRM only]
    values     row-major f32

Round trips are bit-exact. Malformed files raise :class:`MatrixFormatError`
with a stable ``code`` (bad_magic, bad_version, truncated, dim_overflow,
nonfinite).
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import MatrixFormatError
from .kernels import column_pearson

MAGIC_MATRIX = b"BCRM"
MAGIC_EMBEDDING = b"BCEI"
FORMAT_VERSION = 1

# Header dims beyond these cannot be a desk-scale file; reject before
# attempting a huge allocation.
_MAX_DIM = 1 << 40
_MAX_CELLS = 1 << 44

UNIT_NORM_TOL = 1e-6


class Provenance(str, Enum):
    MEASURED = "measured"
    PREDICTED = "predicted"


_PROVENANCE_CODE = {Provenance.MEASURED: 0, Provenance.PREDICTED: 1}
_CODE_PROVENANCE = {v: k for k, v in _PROVENANCE_CODE.items()}


@dataclass
class ResponseMatrix:
    """Dense images x voxels activation matrix (rows = images)."""

    image_ids: list[str]
    voxel_ids: list[str]
    values: np.ndarray
    provenance: Provenance = Provenance.PREDICTED

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float32)
        if self.values.shape != (len(self.image_ids), len(self.voxel_ids)):
            raise ValueError(
                f"values shape {self.values.shape} does not match "
                f"{len(self.image_ids)} images x {len(self.voxel_ids)} voxels"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("response matrix contains NaN or Inf")
        self.provenance = Provenance(self.provenance)

    @property
    def n_images(self) -> int:
        return len(self.image_ids)

    @property
    def n_voxels(self) -> int:
        return len(self.voxel_ids)

    def row_index(self, image_ids) -> np.ndarray:
        """Row positions for the given image ids (raises KeyError if absent)."""
        lookup = {im: i for i, im in enumerate(self.image_ids)}
        try:
            return np.array([lookup[i] for i in image_ids], dtype=np.intp)
        except KeyError as exc:
            raise KeyError(f"image id {exc.args[0]!r} not in matrix") from None

    def column_index(self, voxel_ids) -> np.ndarray:
        lookup = {v: i for i, v in enumerate(self.voxel_ids)}
        try:
            return np.array([lookup[v] for v in voxel_ids], dtype=np.intp)
        except KeyError as exc:
            raise KeyError(f"voxel id {exc.args[0]!r} not in matrix") from None

    def take_voxels(self, mask_or_ids) -> "ResponseMatrix":
        """Sub-matrix restricted to a boolean voxel mask or explicit id list."""
        if isinstance(mask_or_ids, np.ndarray) and mask_or_ids.dtype == bool:
            cols = np.flatnonzero(mask_or_ids)
            kept = [self.voxel_ids[c] for c in cols]
        else:
            kept = list(mask_or_ids)
            cols = self.column_index(kept)
        return ResponseMatrix(
            image_ids=list(self.image_ids),
            voxel_ids=kept,
            values=self.values[:, cols],
            provenance=self.provenance,
        )


@dataclass
class EmbeddingIndex:
    """Unit-normalized embedding rows keyed by image id or concept string."""

    ids: list[str]
    vectors: np.ndarray

    def __post_init__(self):
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float32)
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.ids):
            raise ValueError(
                f"vectors shape {self.vectors.shape} does not match {len(self.ids)} ids"
            )
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError("embedding index contains NaN or Inf")
        if len(self.ids):
            norms = np.linalg.norm(self.vectors.astype(np.float64), axis=1)
            bad = np.abs(norms - 1.0) > UNIT_NORM_TOL
            if np.any(bad):
                worst = self.ids[int(np.argmax(np.abs(norms - 1.0)))]
                raise ValueError(f"embedding rows must be unit-norm; offender: {worst!r}")

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass
class NormalizationStats:
    """Per-voxel population mean/std used for z-scoring, plus removed voxels."""

    voxel_ids: list[str]
    mean: np.ndarray
    std: np.ndarray
    dead_voxel_ids: list[str] = field(default_factory=list)


DEAD_VOXEL_STD = 1e-12


def zscore_normalize(m: ResponseMatrix) -> tuple[ResponseMatrix, NormalizationStats]:
    """Normalize each voxel across images to mean 0, population std 1.

    Voxels with population std below ``DEAD_VOXEL_STD`` carry no signal and
    are dropped; their ids are reported in the stats. Requires >= 2 images.
    """
    if m.n_images < 2:
        raise ValueError("insufficient images: z-scoring needs at least 2")
    values = m.values.astype(np.float64)
    mean = values.mean(axis=0)
    std = values.std(axis=0)  # population (divide by N)
    alive = std >= DEAD_VOXEL_STD
    dead_ids = [v for v, ok in zip(m.voxel_ids, alive) if not ok]
    kept_ids = [v for v, ok in zip(m.voxel_ids, alive) if ok]
    normalized = (values[:, alive] - mean[alive]) / std[alive]
    out = ResponseMatrix(
        image_ids=list(m.image_ids),
        voxel_ids=kept_ids,
        values=normalized.astype(np.float32),
        provenance=m.provenance,
    )
    stats = NormalizationStats(
        voxel_ids=kept_ids,
        mean=mean[alive],
        std=std[alive],
        dead_voxel_ids=dead_ids,
    )
    return out, stats


def pearson(x, y) -> float:
    """Sample Pearson correlation of two equal-length vectors.

    Raises ValueError for undefined cases (length < 2, length mismatch, or a
    constant input).
    """
    xa = np.asarray(x, dtype=np.float64).ravel()
    ya = np.asarray(y, dtype=np.float64).ravel()
    if xa.shape != ya.shape:
        raise ValueError(f"length mismatch: {xa.shape[0]} vs {ya.shape[0]}")
    if xa.shape[0] < 2:
        raise ValueError("need at least 2 samples")
    xc = xa - xa.mean()
    yc = ya - ya.mean()
    denom = np.sqrt((xc * xc).sum() * (yc * yc).sum())
    if denom == 0.0:
        raise ValueError("undefined correlation: constant input")
    return float(np.clip((xc * yc).sum() / denom, -1.0, 1.0))


def filter_voxels_by_reliability(
    pred: ResponseMatrix, meas: ResponseMatrix, threshold: float = 0.2
) -> np.ndarray:
    """Boolean mask of voxels whose predicted/measured correlation >= threshold.

    Both matrices must share image and voxel ids in identical order. Constant
    columns have no defined correlation and are excluded with a warning.
    """
    if pred.image_ids != meas.image_ids:
        raise ValueError("image ids differ between predicted and measured matrices")
    if pred.voxel_ids != meas.voxel_ids:
        raise ValueError("voxel ids differ between predicted and measured matrices")
    if pred.n_images < 2:
        raise ValueError("need at least 2 images to correlate")
    r = column_pearson(pred.values, meas.values)
    undefined = np.isnan(r)
    if np.any(undefined):
        warnings.warn(
            f"{int(undefined.sum())} voxel(s) with constant responses excluded "
            "from reliability filtering",
            stacklevel=2,
        )
    mask = np.zeros(pred.n_voxels, dtype=bool)
    defined = ~undefined
    mask[defined] = r[defined] >= threshold
    return mask


# --- binary container ------------------------------------------------------


class _Cursor:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise MatrixFormatError(
                "truncated",
                f"expected {n} more bytes at offset {self.pos}, file has "
                f"{len(self.data) - self.pos}",
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def u8(self) -> int:
        return self.take(1)[0]


def _write_id_table(fh, ids: list[str]) -> None:
    for s in ids:
        raw = s.encode("utf-8")
        fh.write(struct.pack("<I", len(raw)))
        fh.write(raw)


def _read_id_table(cur: _Cursor, n: int) -> list[str]:
    return [cur.take(cur.u32()).decode("utf-8") for _ in range(n)]


def _check_dims(n_rows: int, n_cols: int) -> None:
    if n_rows > _MAX_DIM or n_cols > _MAX_DIM or n_rows * n_cols > _MAX_CELLS:
        raise MatrixFormatError(
            "dim_overflow", f"header declares implausible dimensions {n_rows} x {n_cols}"
        )


def write_matrix(m: ResponseMatrix, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC_MATRIX)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<B", _PROVENANCE_CODE[m.provenance]))
        fh.write(struct.pack("<QQ", m.n_images, m.n_voxels))
        _write_id_table(fh, m.image_ids)
        _write_id_table(fh, m.voxel_ids)
        fh.write(np.ascontiguousarray(m.values, dtype="<f4").tobytes())


def read_matrix(path: str | Path) -> ResponseMatrix:
    cur = _Cursor(Path(path).read_bytes())
    magic = cur.take(4)
    if magic != MAGIC_MATRIX:
        raise MatrixFormatError("bad_magic", f"bad magic {magic!r}, expected {MAGIC_MATRIX!r}")
    version = cur.u32()
    if version != FORMAT_VERSION:
        raise MatrixFormatError("bad_version", f"unsupported version {version}")
    prov_code = cur.u8()
    if prov_code not in _CODE_PROVENANCE:
        raise MatrixFormatError("bad_version", f"unknown provenance code {prov_code}")
    n_rows = cur.u64()
    n_cols = cur.u64()
    _check_dims(n_rows, n_cols)
    image_ids = _read_id_table(cur, n_rows)
    voxel_ids = _read_id_table(cur, n_cols)
    payload = cur.take(n_rows * n_cols * 4)
    values = np.frombuffer(payload, dtype="<f4").reshape(n_rows, n_cols)
    if not np.all(np.isfinite(values)):
        raise MatrixFormatError("nonfinite", "payload contains NaN or Inf")
    return ResponseMatrix(
        image_ids=image_ids,
        voxel_ids=voxel_ids,
        values=values.copy(),
        provenance=_CODE_PROVENANCE[prov_code],
    )


def write_embedding_index(index: EmbeddingIndex, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC_EMBEDDING)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<B", 0))
        fh.write(struct.pack("<QQ", len(index.ids), index.dim))
        _write_id_table(fh, index.ids)
        fh.write(np.ascontiguousarray(index.vectors, dtype="<f4").tobytes())


def read_embedding_index(path: str | Path) -> EmbeddingIndex:
    cur = _Cursor(Path(path).read_bytes())
    magic = cur.take(4)
    if magic != MAGIC_EMBEDDING:
        raise MatrixFormatError(
            "bad_magic", f"bad magic {magic!r}, expected {MAGIC_EMBEDDING!r}"
        )
    version = cur.u32()
    if version != FORMAT_VERSION:
        raise MatrixFormatError("bad_version", f"unsupported version {version}")
    cur.u8()  # reserved flags byte
    n_rows = cur.u64()
    dim = cur.u64()
    _check_dims(n_rows, dim)
    ids = _read_id_table(cur, n_rows)
    payload = cur.take(n_rows * dim * 4)
    vectors = np.frombuffer(payload, dtype="<f4").reshape(n_rows, dim)
    if not np.all(np.isfinite(vectors)):
        raise MatrixFormatError("nonfinite", "payload contains NaN or Inf")
    try:
        return EmbeddingIndex(ids=ids, vectors=vectors.copy())
    except ValueError as exc:
        raise MatrixFormatError("nonfinite", str(exc)) from exc
