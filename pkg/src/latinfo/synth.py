"""Sample tables and the synthetic data generators.

Covers Gaussian families with planted block structure, XOR and COPY gates
with a tunable fraction of coupled rows, and the five-feature XOR target
used for feature selection.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import rng
from .divergence import GaussianSpec
from .lattice import SetPartition


class DataError(ValueError):
    """Malformed table: bad names, non-finite values, unparsable CSV."""


@dataclass(frozen=True, eq=False)
class SampleMatrix:
    """``n x d`` table of finite reals with unique column names."""

    columns: tuple[str, ...]
    values: np.ndarray
    provenance: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        cols = tuple(str(c) for c in self.columns)
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 2:
            raise DataError(f"values must be 2-D, got shape {vals.shape}")
        if vals.shape[1] != len(cols):
            raise DataError(f"{len(cols)} column names for {vals.shape[1]} columns")
        if len(set(cols)) != len(cols):
            raise DataError("column names must be unique")
        if vals.shape[0] < 1:
            raise DataError("need at least one row")
        if not np.all(np.isfinite(vals)):
            raise DataError("table contains non-finite values")
        vals.setflags(write=False)
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def column_index(self, names: Sequence[str]) -> list[int]:
        lookup = {c: i for i, c in enumerate(self.columns)}
        missing = [c for c in names if c not in lookup]
        if missing:
            raise DataError(f"unknown columns: {', '.join(missing)}")
        return [lookup[c] for c in names]

    def select(self, names: Sequence[str]) -> "SampleMatrix":
        idx = self.column_index(names)
        return SampleMatrix(tuple(names), self.values[:, idx], self.provenance)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.column_index([name])[0]]

    def equals(self, other: "SampleMatrix") -> bool:
        return self.columns == other.columns and np.array_equal(self.values, other.values)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.values:
            writer.writerow([repr(float(v)) for v in row])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    @classmethod
    def from_csv(cls, source) -> "SampleMatrix":
        """Parse a header-first comma-separated table of plain decimals.

        ``source`` is a path or an open text stream. Errors name the 1-based
        line and the column.
        """
        if hasattr(source, "read"):
            text = source.read()
        else:
            try:
                text = Path(source).read_text(encoding="utf-8")
            except (OSError, UnicodeDecodeError) as exc:
                raise DataError(f"cannot read {source}: {exc}") from exc
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        if not lines:
            raise DataError("empty input")
        header = [h.strip() for h in lines[0].rstrip("\r").split(",")]
        if any(not h for h in header):
            raise DataError("line 1: empty column name in header")
        rows = []
        for lineno, line in enumerate(lines[1:], start=2):
            line = line.rstrip("\r")
            if not line.strip():
                raise DataError(f"line {lineno}: blank line")
            cells = line.split(",")
            if len(cells) != len(header):
                raise DataError(f"line {lineno}: expected {len(header)} fields, got {len(cells)}")
            row = []
            for name, cell in zip(header, cells):
                try:
                    value = float(cell)
                except ValueError:
                    raise DataError(f"line {lineno}, column {name!r}: not a number: {cell!r}") from None
                if not math.isfinite(value):
                    raise DataError(f"line {lineno}, column {name!r}: non-finite value {cell!r}")
                row.append(value)
            rows.append(row)
        if not rows:
            raise DataError("no data rows")
        return cls(tuple(header), np.array(rows, dtype=float))


# Block structure of each covariance family, 0-based variable indices.
FAMILY_BLOCKS = {
    "sigma1": ((0,), (1,), (2,), (3,)),
    "sigma2": ((0,), (1, 2, 3)),
    "sigma3": ((0, 1), (2, 3)),
    "sigma4": ((0,), (1, 2, 3)),
    "sigma5": ((0, 1), (2, 3)),
    "sigma6": ((0,), (1,), (2, 3)),
}
# Families whose cross-block correlation is zero (planted factorisations).
FACTORISED_FAMILIES = ("sigma2", "sigma3")


def block_covariance(blocks, rho: float, cross: float = 0.0) -> np.ndarray:
    """Unit-diagonal covariance: ``rho`` inside blocks, ``cross`` between blocks."""
    d = sum(len(b) for b in blocks)
    cov = np.full((d, d), float(cross))
    for b in blocks:
        idx = np.ix_(b, b)
        cov[idx] = rho
    np.fill_diagonal(cov, 1.0)
    return cov


def sigma_family(name: str, rho: float, w0: float = 0.5) -> GaussianSpec:
    """Covariance families used in the d=4 experiments.

    ``sigma1`` is equicorrelated with all off-diagonal entries ``rho``.
    ``sigma2`` (1|234) and ``sigma3`` (12|34) are block diagonal with
    within-block correlation ``rho``, so the joint factorises for every rho.
    ``sigma4`` (1|234), ``sigma5`` (12|34) and ``sigma6`` (1|2|34) put ``rho``
    between blocks and ``rho + (1 - rho) * w0`` inside blocks: they factorise
    at rho = 0 and all tend to the all-ones matrix as rho -> 1.
    """
    if name not in FAMILY_BLOCKS:
        raise ValueError(f"unknown family {name!r}; choose from {sorted(FAMILY_BLOCKS)}")
    blocks = FAMILY_BLOCKS[name]
    if name == "sigma1":
        cov = block_covariance(((0, 1, 2, 3),), rho)
    elif name in FACTORISED_FAMILIES:
        cov = block_covariance(blocks, rho, 0.0)
    else:
        cov = block_covariance(blocks, rho + (1 - rho) * w0, rho)
    try:
        return GaussianSpec(cov)
    except ValueError as exc:
        raise ValueError(f"{name} is not positive definite at rho={rho}") from exc


def split_covariance(sizes: Sequence[int], rho: float) -> GaussianSpec:
    """Block-diagonal unit-diagonal covariance with blocks of the given sizes."""
    blocks, start = [], 0
    for s in sizes:
        blocks.append(tuple(range(start, start + s)))
        start += s
    return GaussianSpec(block_covariance(blocks, rho, 0.0))


def _names(prefix: str, d: int) -> tuple[str, ...]:
    return tuple(f"{prefix}{i + 1}" for i in range(d))


def sample_gaussian(spec: GaussianSpec, n: int, seed: int, columns=None) -> SampleMatrix:
    """``n`` zero-mean draws ``L z`` with ``L`` the Cholesky factor."""
    if n < 1:
        raise ValueError("n must be positive")
    chol = np.linalg.cholesky(spec.covariance)
    z = rng.stream(seed, "gaussian").standard_normal((n, spec.dim))
    cols = tuple(columns) if columns is not None else _names("X", spec.dim)
    return SampleMatrix(
        cols,
        z @ chol.T,
        {"generator": "gaussian", "params": {"n": n, "covariance": spec.covariance.tolist()}, "seed": seed},
    )


def _uniform(seed, label, n):
    return rng.stream(seed, label).uniform(0.0, 4.0, n)


def _check_coupled(n, coupled):
    if n < 1:
        raise ValueError("n must be positive")
    if not 0 <= coupled <= n:
        raise ValueError(f"coupled rows must lie in [0, {n}], got {coupled}")


def xor_gate(n: int, coupled: int, seed: int) -> SampleMatrix:
    """``Z = (W + X + Y) mod 4`` on the first ``coupled`` rows, independent elsewhere."""
    _check_coupled(n, coupled)
    w, x, y, z = (_uniform(seed, c, n) for c in "WXYZ")
    z[:coupled] = np.mod(w[:coupled] + x[:coupled] + y[:coupled], 4.0)
    return SampleMatrix(
        ("W", "X", "Y", "Z"),
        np.column_stack([w, x, y, z]),
        {"generator": "xor", "params": {"n": n, "coupled": coupled}, "seed": seed},
    )


def copy_gate(n: int, coupled: int, seed: int) -> SampleMatrix:
    """``W = X = Y = Z`` on the first ``coupled`` rows, independent uniforms elsewhere."""
    _check_coupled(n, coupled)
    w, x, y, z = (_uniform(seed, c, n) for c in "WXYZ")
    for col in (w, x, y):
        col[:coupled] = z[:coupled]
    return SampleMatrix(
        ("W", "X", "Y", "Z"),
        np.column_stack([w, x, y, z]),
        {"generator": "copy", "params": {"n": n, "coupled": coupled}, "seed": seed},
    )


def table1_dataset(n: int, seed: int) -> SampleMatrix:
    """``Y = (X1 + X2 + X3) mod 4`` plus an independent correlated pair ``X4, X5``."""
    if n < 100:
        raise ValueError(f"n must be at least 100, got {n}")
    x1, x2, x3 = (_uniform(seed, c, n) for c in ("X1", "X2", "X3"))
    y = np.mod(x1 + x2 + x3, 4.0)
    pair = np.linalg.cholesky(np.array([[1.0, 0.95], [0.95, 1.0]]))
    z = rng.stream(seed, "X45").standard_normal((n, 2)) @ pair.T
    return SampleMatrix(
        ("X1", "X2", "X3", "X4", "X5", "Y"),
        np.column_stack([x1, x2, x3, z[:, 0], z[:, 1], y]),
        {"generator": "table1", "params": {"n": n}, "seed": seed},
    )


def permute_columns(data: SampleMatrix, blocks: SetPartition, seed: int, *labels) -> SampleMatrix:
    """Shuffle rows blockwise: one shared permutation per block of columns.

    Within-block joint rows are kept, dependence between blocks is broken and
    every column keeps its exact multiset of values.
    """
    if blocks.d != data.d:
        raise DataError(f"partition of order {blocks.d} for {data.d} columns")
    out = np.empty_like(data.values)
    for j, block in enumerate(blocks.blocks):
        perm = rng.permutation(data.n, seed, "permute", *labels, blocks.rgs, j)
        out[:, block] = data.values[perm][:, block]
    return SampleMatrix(data.columns, out, data.provenance)


def provenance_json(data: SampleMatrix) -> str:
    return json.dumps(data.provenance or {}, sort_keys=True)
