"""CSV readers and writers for datasets, histograms, distributions and
result tables.

Files may start with ``# key=value`` comment lines.  Datasets and histograms
record ``# k=<cells>`` there; readers check the rows against it.  Writers go
through a temporary file and an atomic rename, so a failed write never
leaves a partial file behind.
"""

from __future__ import annotations

import csv
import io as _io
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import BinnedDataset, HistogramLattice
from .synth import BinDistribution


class ParseError(ValueError):
    def __init__(self, path, line: int, msg: str):
        super().__init__(f"{path}:{line}: {msg}")
        self.path = path
        self.line = line


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _render(header: Sequence[str], rows: Iterable[Sequence], meta: dict | None = None) -> str:
    buf = _io.StringIO()
    for key, value in (meta or {}).items():
        buf.write(f"# {key}={value}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _read(path, header: Sequence[str]):
    """Return (meta, [(lineno, fields), ...])."""
    meta = {}
    rows = []
    seen_header = False
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body and not seen_header:
                key, _, value = body.partition("=")
                meta[key.strip()] = value.strip()
            continue
        fields = [f.strip() for f in next(csv.reader([line]))]
        if not seen_header:
            if fields != list(header):
                raise ParseError(path, lineno, f"expected header {','.join(header)!r}, got {line!r}")
            seen_header = True
            continue
        if len(fields) != len(header):
            raise ParseError(path, lineno, f"expected {len(header)} fields, got {len(fields)}")
        rows.append((lineno, fields))
    if not seen_header:
        raise ParseError(path, max(len(lines), 1), "file is empty or has no header")
    return meta, rows


def _int(path, lineno, text, what):
    try:
        return int(text)
    except ValueError:
        raise ParseError(path, lineno, f"{what} must be an integer, got {text!r}") from None


def _float(path, lineno, text, what):
    try:
        v = float(text)
    except ValueError:
        raise ParseError(path, lineno, f"{what} must be a number, got {text!r}") from None
    if not np.isfinite(v):
        raise ParseError(path, lineno, f"{what} must be finite, got {text!r}")
    return v


def _meta_k(path, meta):
    if "k" not in meta:
        return None
    try:
        return int(meta["k"])
    except ValueError:
        raise ParseError(path, 1, f"bad k in header: {meta['k']!r}") from None


# -- datasets ---------------------------------------------------------------


def store_dataset(data: BinnedDataset, path) -> None:
    atomic_write_text(path, _render(["bin"], ([int(b)] for b in data.bins), {"k": data.k}))


def load_dataset(path, k: int | None = None) -> BinnedDataset:
    meta, rows = _read(path, ["bin"])
    header_k = _meta_k(path, meta)
    if k is not None and header_k is not None and k != header_k:
        raise ParseError(path, 1, f"header declares k={header_k}, expected k={k}")
    k = k if k is not None else header_k
    if not rows:
        raise ParseError(path, 1, "dataset has no rows")
    bins = []
    for lineno, (text,) in rows:
        b = _int(path, lineno, text, "bin")
        if b < 0 or (k is not None and b >= k):
            raise ParseError(path, lineno, f"bin {b} outside [0, {k})")
        bins.append(b)
    if k is None:
        k = max(bins) + 1
    return BinnedDataset(np.array(bins), k)


# -- histograms ---------------------------------------------------------------


def store_histogram(hist: HistogramLattice, path) -> None:
    rows = ([j, int(c)] for j, c in enumerate(hist.counts))
    atomic_write_text(path, _render(["cell", "count"], rows, {"k": hist.k, "n": hist.n}))


def _cells(path, rows, header_k):
    for expected, (lineno, fields) in enumerate(rows):
        cell = _int(path, lineno, fields[0], "cell")
        if cell != expected:
            raise ParseError(path, lineno, f"expected cell {expected}, got {cell}")
    if not rows:
        raise ParseError(path, 1, "no rows")
    if header_k is not None and header_k != len(rows):
        raise ParseError(path, rows[-1][0], f"header declares k={header_k} but found {len(rows)} rows")


def load_histogram(path) -> HistogramLattice:
    meta, rows = _read(path, ["cell", "count"])
    _cells(path, rows, _meta_k(path, meta))
    counts = []
    for lineno, (_, text) in rows:
        c = _int(path, lineno, text, "count")
        if c < 0:
            raise ParseError(path, lineno, f"negative count {c}")
        counts.append(c)
    if sum(counts) < 1:
        raise ParseError(path, rows[-1][0], "histogram holds no observations")
    if "n" in meta and int(meta["n"]) != sum(counts):
        raise ParseError(path, 1, f"header declares n={meta['n']} but counts sum to {sum(counts)}")
    return HistogramLattice(np.array(counts))


# -- distributions -----------------------------------------------------------


def store_distribution(P: BinDistribution, path) -> None:
    rows = ([j, float(p)] for j, p in enumerate(P.probabilities))
    atomic_write_text(path, _render(["cell", "prob"], rows, {"k": P.k}))


def load_distribution(path) -> BinDistribution:
    meta, rows = _read(path, ["cell", "prob"])
    _cells(path, rows, _meta_k(path, meta))
    probs = [_float(path, lineno, text, "prob") for lineno, (_, text) in rows]
    try:
        return BinDistribution(np.array(probs))
    except ValueError as exc:
        raise ParseError(path, rows[-1][0], str(exc)) from None


# -- raw samples (scalar release input) ------------------------------------------


def load_sample(path) -> np.ndarray:
    _, rows = _read(path, ["x"])
    if not rows:
        raise ParseError(path, 1, "sample has no rows")
    return np.array([_float(path, lineno, text, "x") for lineno, (text,) in rows])


def store_sample(x, path) -> None:
    atomic_write_text(path, _render(["x"], ([float(v)] for v in np.asarray(x, dtype=float))))


# -- result tables ---------------------------------------------------------------

LOSS_HEADER = ("trial", "method", "l1_loss")
SWEEP_HEADER = ("param", "mean_risk", "std_error")


def render_loss_table(rows: Iterable[tuple[int, str, float]], meta: dict | None = None) -> str:
    return _render(LOSS_HEADER, ([int(t), m, float(v)] for t, m, v in rows), meta)


def store_loss_table(rows, path, meta: dict | None = None) -> None:
    atomic_write_text(path, render_loss_table(rows, meta))


def load_loss_table(path) -> list[tuple[int, str, float]]:
    _, rows = _read(path, LOSS_HEADER)
    return [
        (_int(path, ln, t, "trial"), m, _float(path, ln, v, "l1_loss")) for ln, (t, m, v) in rows
    ]


def store_sweep_table(rows, path, meta: dict | None = None) -> None:
    body = ([p, float(r), float(s)] for p, r, s in rows)
    atomic_write_text(path, _render(SWEEP_HEADER, body, meta))


def load_sweep_table(path) -> list[tuple[float, float, float]]:
    _, rows = _read(path, SWEEP_HEADER)
    out = []
    for ln, (p, r, s) in rows:
        out.append((_float(path, ln, p, "param"), _float(path, ln, r, "mean_risk"),
                    _float(path, ln, s, "std_error")))
    return out
