"""Snapshots, checkpoints and diagnostic time series.

Snapshot layout (version 1, all little-endian)::

    magic        8 bytes  b"MHDBFED\\0"
    version      u32
    N            u32
    L, nu, kappa, a, alpha, t   6 x f64
    field_count  u32      (2: u then b)
    layout       8 bytes  b"HALFKZ\\0\\0"
    meta_len     u32
    meta         meta_len bytes of UTF-8 JSON (producing command, step, ...)
    data         field_count x 3 x N x N x (N/2+1) complex128 as (re, im) f64 pairs,
                 C order over (component, kx, ky, kz): kz fastest, half spectrum only

Time series are comma-separated text with a single header row; floats are
written with 17 significant digits so they parse back bit-exactly, and an
absent metric (``b_crit_norm`` when alpha = 0) is an empty field.
"""

from __future__ import annotations

import json
import math
import os
import struct
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .diagnostics import MonitorRecord
from .rhs import PhysParams, State
from .spectral import SpectralVectorField, make_grid

MAGIC = b"MHDBFED\0"
VERSION = 1
LAYOUT = b"HALFKZ\0\0"
_HEADER = struct.Struct("<8sII6dI8sI")

COLUMNS = (
    "t,E,grad_u_sq,grad_b_sq,u_damp_norm,b_crit_norm,div_u_res,div_b_res,"
    "mean_ux,mean_uy,mean_uz,mean_bx,mean_by,mean_bz"
).split(",")

PathLike = Union[str, os.PathLike]


class SnapshotFormatError(ValueError):
    pass


class ResolutionMismatchError(SnapshotFormatError):
    pass


class ParameterMismatchError(SnapshotFormatError):
    pass


class TimeseriesFormatError(ValueError):
    pass


def write_snapshot(state: State, params: PhysParams, path: PathLike, metadata: Optional[dict] = None) -> None:
    g = state.grid
    meta = json.dumps(metadata or {}, sort_keys=True).encode()
    head = _HEADER.pack(
        MAGIC, VERSION, g.N, g.L, params.nu, params.kappa, params.a, params.alpha, float(state.t), 2, LAYOUT, len(meta)
    )
    data = np.concatenate([state.u_hat.c, state.b_hat.c]).astype("<c16", copy=False)
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(head)
        fh.write(meta)
        fh.write(data.tobytes(order="C"))
    os.replace(tmp, path)


def read_snapshot(
    path: PathLike,
    expect_N: Optional[int] = None,
    expect_params: Optional[PhysParams] = None,
    with_metadata: bool = False,
):
    """Return (State, PhysParams), plus the metadata dict when ``with_metadata``.

    ``expect_N`` / ``expect_params`` enforce strict restart matching: no
    implicit padding or truncation, parameters echoed exactly.
    """
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise SnapshotFormatError(f"{path}: truncated header")
    magic, version, N, L, nu, kappa, a, alpha, t, count, layout, mlen = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise SnapshotFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotFormatError(f"{path}: unsupported version {version}")
    if layout != LAYOUT or count != 2:
        raise SnapshotFormatError(f"{path}: unsupported layout {layout!r} with {count} fields")
    if expect_N is not None and N != expect_N:
        raise ResolutionMismatchError(f"{path}: snapshot has N={N}, context expects N={expect_N}")
    params = PhysParams(nu, kappa, a, alpha)
    if expect_params is not None and expect_params != params:
        raise ParameterMismatchError(f"{path}: snapshot parameters {params} differ from run {expect_params}")
    grid = make_grid(N, L)
    off = _HEADER.size + mlen
    nbytes = 2 * 3 * N * N * (N // 2 + 1) * 16
    if len(raw) != off + nbytes:
        raise SnapshotFormatError(f"{path}: expected {off + nbytes} bytes, found {len(raw)}")
    meta = json.loads(raw[_HEADER.size : off].decode()) if mlen else {}
    data = np.frombuffer(raw, dtype="<c16", offset=off).astype(np.complex128).reshape(6, *grid.shape)
    state = State(SpectralVectorField(data[:3].copy(), grid), SpectralVectorField(data[3:].copy(), grid), t)
    return (state, params, meta) if with_metadata else (state, params)


def _fmt(x: Optional[float]) -> str:
    return "" if x is None else format(float(x), ".17g")


def format_record(r: MonitorRecord) -> str:
    vals = [r.t, r.E, r.grad_u_sq, r.grad_b_sq, r.u_damp_norm, r.b_crit_norm, r.div_u_res, r.div_b_res]
    return ",".join(_fmt(v) for v in (*vals, *r.mean_u, *r.mean_b))


def append_timeseries(record: MonitorRecord, path: PathLike) -> None:
    path = Path(path)
    header = ",".join(COLUMNS)
    if path.exists() and path.stat().st_size > 0:
        with open(path) as fh:
            first = fh.readline().rstrip("\n")
        if first != header:
            raise TimeseriesFormatError(f"{path}: existing header {first!r} does not match {header!r}")
        with open(path, "a") as fh:
            fh.write(format_record(record) + "\n")
    else:
        with open(path, "w") as fh:
            fh.write(header + "\n" + format_record(record) + "\n")


def _parse(tok: str) -> Optional[float]:
    return None if tok == "" else float(tok)


def read_timeseries(path: PathLike) -> list[MonitorRecord]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != ",".join(COLUMNS):
        raise TimeseriesFormatError(f"{path}: missing or unexpected header")
    out = []
    for lineno, line in enumerate(lines[1:], start=2):
        toks = line.split(",")
        if len(toks) != len(COLUMNS):
            raise TimeseriesFormatError(f"{path}:{lineno}: expected {len(COLUMNS)} columns, got {len(toks)}")
        v = [_parse(x) for x in toks]
        if any(x is None for i, x in enumerate(v) if COLUMNS[i] != "b_crit_norm"):
            raise TimeseriesFormatError(f"{path}:{lineno}: empty required field")
        out.append(MonitorRecord(*v[:8], mean_u=tuple(v[8:11]), mean_b=tuple(v[11:14])))
    return out


def records_equal(a: MonitorRecord, b: MonitorRecord) -> bool:
    """Exact equality, treating NaN == NaN."""

    def eq(x, y):
        if x is None or y is None:
            return x is y
        return x == y or (math.isnan(x) and math.isnan(y))

    fa = [a.t, a.E, a.grad_u_sq, a.grad_b_sq, a.u_damp_norm, a.b_crit_norm, a.div_u_res, a.div_b_res, *a.mean_u, *a.mean_b]
    fb = [b.t, b.E, b.grad_u_sq, b.grad_b_sq, b.u_damp_norm, b.b_crit_norm, b.div_u_res, b.div_b_res, *b.mean_u, *b.mean_b]
    return all(eq(x, y) for x, y in zip(fa, fb))
