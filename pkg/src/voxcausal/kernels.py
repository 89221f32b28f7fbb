"""Hot numeric kernels: numba-jitted with a pure-numpy fallback.

The scoring stage spends nearly all its time in three column-wise loops:
mean of the k largest entries per voxel (hardest semantic negatives),
per-parent max gap (hardest counterfactual edit), and column-wise Pearson
(encoder reliability). Each has a numba ``@njit`` implementation and a
vectorized numpy one.

Backend selection happens once at import via the ``VOXCAUSAL_BACKEND``
environment variable: ``numpy`` forces the fallback, ``numba`` requires the
jitted path, unset/``auto`` uses numba when importable. Both backends agree
within normal float64 accumulation error (well under 1e-9 at the matrix
sizes this package targets); see ``benchmarks/bench_kernels.py`` for a
side-by-side timing comparison.
"""

from __future__ import annotations

import os

import numpy as np

_BACKEND_ENV = "VOXCAUSAL_BACKEND"


def _np_topk_col_mean(values: np.ndarray, k: int) -> np.ndarray:
    n_rows = values.shape[0]
    part = np.partition(values, n_rows - k, axis=0)
    return part[n_rows - k :, :].mean(axis=0)


def _np_grouped_max_gap(
    pos: np.ndarray, edits: np.ndarray, offsets: np.ndarray
) -> np.ndarray:
    # offsets is strictly increasing (every parent has >= 1 edit), so
    # reduceat segments are exactly the per-parent edit blocks.
    maxes = np.maximum.reduceat(edits, offsets[:-1], axis=0)
    return (pos - maxes).mean(axis=0)


def _np_column_pearson(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ac = a - a.mean(axis=0)
    bc = b - b.mean(axis=0)
    denom = np.sqrt((ac * ac).sum(axis=0) * (bc * bc).sum(axis=0))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = (ac * bc).sum(axis=0) / denom
    r[denom == 0.0] = np.nan
    return np.clip(r, -1.0, 1.0)


def _build_numba_kernels():
    from numba import njit

    @njit(cache=True)
    def topk_col_mean(values, k):  # pragma: no cover - exercised via dispatch
        n_rows, n_cols = values.shape
        out = np.empty(n_cols)
        buf = np.empty(n_rows)
        for c in range(n_cols):
            for r in range(n_rows):
                buf[r] = values[r, c]
            part = np.partition(buf, n_rows - k)
            acc = 0.0
            for r in range(n_rows - k, n_rows):
                acc += part[r]
            out[c] = acc / k
        return out

    @njit(cache=True)
    def grouped_max_gap(pos, edits, offsets):  # pragma: no cover
        n_parents, n_cols = pos.shape
        out = np.empty(n_cols)
        for c in range(n_cols):
            acc = 0.0
            for p in range(n_parents):
                hardest = edits[offsets[p], c]
                for e in range(offsets[p] + 1, offsets[p + 1]):
                    if edits[e, c] > hardest:
                        hardest = edits[e, c]
                acc += pos[p, c] - hardest
            out[c] = acc / n_parents
        return out

    @njit(cache=True)
    def column_pearson(a, b):  # pragma: no cover
        n_rows, n_cols = a.shape
        out = np.empty(n_cols)
        for c in range(n_cols):
            ma = 0.0
            mb = 0.0
            for r in range(n_rows):
                ma += a[r, c]
                mb += b[r, c]
            ma /= n_rows
            mb /= n_rows
            sab = 0.0
            saa = 0.0
            sbb = 0.0
            for r in range(n_rows):
                da = a[r, c] - ma
                db = b[r, c] - mb
                sab += da * db
                saa += da * da
                sbb += db * db
            denom = np.sqrt(saa * sbb)
            if denom == 0.0:
                out[c] = np.nan
            else:
                r_val = sab / denom
                out[c] = min(1.0, max(-1.0, r_val))
        return out

    return topk_col_mean, grouped_max_gap, column_pearson


def _select_backend() -> str:
    choice = os.environ.get(_BACKEND_ENV, "auto").strip().lower() or "auto"
    if choice in ("numpy", "np"):
        return "numpy"
    if choice == "numba":
        return "numba"
    if choice == "auto":
        try:
            import numba  # noqa: F401

            return "numba"
        except ImportError:
            return "numpy"
    raise ValueError(f"unknown {_BACKEND_ENV} value {choice!r} (expected numba/numpy/auto)")


_ACTIVE = _select_backend()
if _ACTIVE == "numba":
    _topk_impl, _gap_impl, _pearson_impl = _build_numba_kernels()
else:
    _topk_impl, _gap_impl, _pearson_impl = (
        _np_topk_col_mean,
        _np_grouped_max_gap,
        _np_column_pearson,
    )


def active_backend() -> str:
    """Name of the kernel backend chosen at import ('numba' or 'numpy')."""
    return _ACTIVE


def _as_f64_2d(x: np.ndarray, name: str) -> np.ndarray:
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def topk_col_mean(values: np.ndarray, k: int) -> np.ndarray:
    """Per-column mean of the ``k`` largest entries of ``values`` (rows x cols)."""
    arr = _as_f64_2d(values, "values")
    if not 1 <= k <= arr.shape[0]:
        raise ValueError(f"k must be in [1, {arr.shape[0]}], got {k}")
    return _topk_impl(arr, k)


def grouped_max_gap(pos: np.ndarray, edits: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Per-column mean over parents of (parent activation - max of its edits).

    ``offsets`` is a CSR-style int64 array of length n_parents+1 delimiting
    each parent's rows in ``edits``; every parent must own at least one edit.
    """
    pos_arr = _as_f64_2d(pos, "pos")
    edits_arr = _as_f64_2d(edits, "edits")
    off = np.ascontiguousarray(offsets, dtype=np.int64)
    if off.shape != (pos_arr.shape[0] + 1,):
        raise ValueError("offsets must have length n_parents + 1")
    if off[0] != 0 or off[-1] != edits_arr.shape[0]:
        raise ValueError("offsets must span the edits array")
    if np.any(np.diff(off) < 1):
        raise ValueError("every parent needs at least one edit row")
    if pos_arr.shape[1] != edits_arr.shape[1]:
        raise ValueError("pos and edits must share the column dimension")
    return _gap_impl(pos_arr, edits_arr, off)


def column_pearson(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Sample Pearson correlation per column; NaN where either column is constant."""
    a_arr = _as_f64_2d(a, "a")
    b_arr = _as_f64_2d(b, "b")
    if a_arr.shape != b_arr.shape:
        raise ValueError(f"shape mismatch: {a_arr.shape} vs {b_arr.shape}")
    if a_arr.shape[0] < 2:
        raise ValueError("need at least 2 rows for a correlation")
    return _pearson_impl(a_arr, b_arr)
