"""Dynamic-programming core: last-passage times and log-partition functions.

Rectangle recursions are evaluated row by row with a max-plus (resp.
log-sum-exp) prefix scan, so a whole row costs O(1) numpy calls:

    T(i,j) = max(T(i-1,j), T(i,j-1)) + w(i,j)
           = W(i,j) + max_{k<=j} ( T(i-1,k) - W(i,k-1) ),   W = row prefix sums

and identically with (max, +) replaced by (logaddexp, +) for log Z at
inverse temperature beta.  All rectangle routines accept leading batch
dimensions.  Wedge last-passage uses steps (1,0), (0,1), (-1,1) with zero
boundary conditions on the wedge border.

Site (0,0) is the path origin; its weight is ignored unless
``include_origin`` is set (both conventions appear in the models: polymer
partition functions drop the origin weight, corner-growth times include the
weight at (1,1) which is the origin cell of its 1-indexed grid).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .env import WedgeRegion, WeightGrid

__all__ = [
    "RegionMismatchError",
    "NonMonotonePathError",
    "PassageField",
    "LogPartitionField",
    "LatticePath",
    "last_passage",
    "last_passage_terminal",
    "wedge_last_passage",
    "log_partition",
    "log_partition_terminal",
    "log_partition_total",
    "quenched_endpoint_distribution",
    "sample_quenched_path",
    "max_path_backtrace",
    "zero_temperature_gap",
    "path_rate_functional",
    "path_count",
]


class RegionMismatchError(ValueError):
    """Operation applied to an incompatible grid region."""


class NonMonotonePathError(ValueError):
    """Macroscopic path is not coordinatewise nondecreasing."""


def _grid_values(grid) -> np.ndarray:
    if isinstance(grid, WeightGrid):
        return grid.values
    return np.asarray(grid, dtype=float)


def path_count(m: int, n: int) -> int:
    """Number of up-right paths from (0,0) to (m,n)."""
    return math.comb(m + n, m)


@dataclass
class PassageField:
    """Last-passage times T over a region."""

    values: np.ndarray
    include_origin: bool = False
    kind: str = "rect"
    region: object = None

    def to_csv(self, path) -> None:
        rows = ["i,j,value"]
        if self.kind == "rect":
            I, J = self.values.shape
            for i in range(I):
                for j in range(J):
                    rows.append(f"{i},{j},{float(self.values[i, j])!r}")
        else:
            for j in range(1, self.values.shape[0] + 1):
                for col, i in enumerate(self.region.i_range(j)):
                    rows.append(f"{i},{j},{float(self.values[j - 1, col])!r}")
        Path(path).write_text("\n".join(rows) + "\n")

    def to_npz(self, path) -> None:
        np.savez_compressed(path, values=self.values)


@dataclass
class LogPartitionField:
    """log Z at inverse temperature beta over a rectangle."""

    values: np.ndarray
    beta: float
    include_origin: bool = False

    def to_csv(self, path) -> None:
        I, J = self.values.shape
        rows = ["i,j,log_z"]
        for i in range(I):
            for j in range(J):
                rows.append(f"{i},{j},{float(self.values[i, j])!r}")
        Path(path).write_text("\n".join(rows) + "\n")

    def to_npz(self, path) -> None:
        np.savez_compressed(path, values=self.values, beta=self.beta)


@dataclass
class LatticePath:
    """Ordered site list with a declared step set."""

    sites: list
    steps: str = "up-right"  # "up-right" | "wedge"
    tie_broken: bool = False

    _STEPSETS = {
        "up-right": {(1, 0), (0, 1)},
        "wedge": {(1, 0), (0, 1), (-1, 1)},
    }

    def __post_init__(self) -> None:
        allowed = self._STEPSETS[self.steps]
        for a, b in zip(self.sites, self.sites[1:]):
            d = (b[0] - a[0], b[1] - a[1])
            if d not in allowed:
                raise ValueError(f"step {d} not in the {self.steps} step set")

    def weight_along(self, grid, include_origin: bool = False) -> float:
        w = _grid_values(grid)
        sites = self.sites if include_origin else self.sites[1:]
        return float(sum(w[i, j] for i, j in sites))


def _rect_scan(w: np.ndarray, include_origin: bool, combine_accumulate) -> np.ndarray:
    """Shared row-scan driver over (..., I, J) weights."""
    w = np.asarray(w, dtype=float)
    I, J = w.shape[-2], w.shape[-1]
    out = np.empty_like(w)
    row_prefix = np.cumsum(w[..., 0, :], axis=-1)
    if not include_origin:
        row_prefix = row_prefix - w[..., 0, :1]
    out[..., 0, :] = row_prefix
    for i in range(1, I):
        pref = np.cumsum(w[..., i, :], axis=-1)
        # A[k] = T(i-1, k) - W(i, k-1) with W(i,-1) = 0.
        a = out[..., i - 1, :].copy()
        a[..., 1:] -= pref[..., :-1]
        out[..., i, :] = pref + combine_accumulate(a)
    return out


def last_passage(grid, include_origin: bool = False):
    """Last-passage times on a rectangle or wedge grid.

    Rectangles return a :class:`PassageField` whose values satisfy
    T(i,j) = max(T(i-1,j), T(i,j-1)) + w(i,j); wedge grids use the wedge
    recursion (see :func:`wedge_last_passage`).
    """
    if isinstance(grid, WeightGrid) and isinstance(grid.region, WedgeRegion):
        return wedge_last_passage(grid)
    w = _grid_values(grid)
    if w.ndim < 2:
        raise RegionMismatchError("rectangle grid must be at least 2-d")
    vals = _rect_scan(w, include_origin, lambda a: np.maximum.accumulate(a, axis=-1))
    return PassageField(vals, include_origin=include_origin, kind="rect",
                        region=grid.region if isinstance(grid, WeightGrid) else None)


def last_passage_terminal(w_batch: np.ndarray, include_origin: bool = False) -> np.ndarray:
    """Terminal T(I-1, J-1) per batch entry, keeping only one row in memory."""
    w = np.asarray(w_batch, dtype=float)
    I = w.shape[-2]
    prev = np.cumsum(w[..., 0, :], axis=-1)
    if not include_origin:
        prev = prev - w[..., 0, :1]
    for i in range(1, I):
        pref = np.cumsum(w[..., i, :], axis=-1)
        a = prev.copy()
        a[..., 1:] -= pref[..., :-1]
        prev = pref + np.maximum.accumulate(a, axis=-1)
    return prev[..., -1]


def wedge_last_passage(grid) -> PassageField:
    """Wedge last-passage times with steps (1,0), (0,1), (-1,1), zero boundary.

    Expects a WeightGrid over a :class:`WedgeRegion` (or a raw trapezoid
    array of the same layout).  Row j-1 of the output holds T(i, j) at
    column i + j - 1.
    """
    if isinstance(grid, WeightGrid):
        if not isinstance(grid.region, WedgeRegion):
            raise RegionMismatchError("wedge_last_passage needs a WedgeRegion grid")
        w = grid.values
        region = grid.region
    else:
        w = np.asarray(grid, dtype=float)
        region = WedgeRegion(w.shape[1] - w.shape[0], w.shape[0])
    rows, width = w.shape
    out = np.empty_like(w)
    prev = np.zeros(width)
    for r in range(rows):
        # For site (i, j) at column c: T(i, j-1) is column c-1 of the previous
        # row and T(i+1, j-1) is column c; off-wedge entries are boundary zeros.
        m = np.maximum(np.concatenate(([0.0], prev[:-1])), prev)
        pref = np.cumsum(w[r])
        a = m.copy()
        a[1:] -= pref[:-1]
        out[r] = pref + np.maximum.accumulate(a)
        prev = out[r]
    return PassageField(out, include_origin=True, kind="wedge", region=region)


def log_partition(grid, beta: float, include_origin: bool = False) -> LogPartitionField:
    """log Z(i,j) = beta*w(i,j) + logaddexp(log Z(i-1,j), log Z(i,j-1)).

    ``grid`` holds additive weights w; multiplicative weights Y enter as
    w = log Y with beta = 1.  All arithmetic stays in log space.
    """
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    w = _grid_values(grid)
    vals = _rect_scan(beta * w, include_origin, lambda a: np.logaddexp.accumulate(a, axis=-1))
    return LogPartitionField(vals, beta=beta, include_origin=include_origin)


def log_partition_terminal(w_batch: np.ndarray, beta: float, include_origin: bool = False) -> np.ndarray:
    """Terminal log Z per batch entry, keeping only one row in memory."""
    w = beta * np.asarray(w_batch, dtype=float)
    I = w.shape[-2]
    prev = np.cumsum(w[..., 0, :], axis=-1)
    if not include_origin:
        prev = prev - w[..., 0, :1]
    for i in range(1, I):
        pref = np.cumsum(w[..., i, :], axis=-1)
        a = prev.copy()
        a[..., 1:] -= pref[..., :-1]
        prev = pref + np.logaddexp.accumulate(a, axis=-1)
    return prev[..., -1]


def _level_sites(field_shape: tuple, m: int) -> list:
    I, J = field_shape
    return [(i, m - i) for i in range(max(0, m - J + 1), min(m, I - 1) + 1)]


def log_partition_total(field: LogPartitionField, m: int) -> float:
    """Free-endpoint value: logsumexp of log Z over endpoints with i + j = m."""
    sites = _level_sites(field.values.shape, m)
    if not sites:
        raise RegionMismatchError(f"level {m} does not intersect the field")
    vals = np.array([field.values[i, j] for i, j in sites])
    vmax = vals.max()
    return float(vmax + np.log(np.sum(np.exp(vals - vmax))))


def quenched_endpoint_distribution(field: LogPartitionField, m: int):
    """Endpoint law of the free-endpoint quenched measure at level m."""
    sites = _level_sites(field.values.shape, m)
    vals = np.array([field.values[i, j] for i, j in sites])
    vals -= vals.max()
    p = np.exp(vals)
    p /= p.sum()
    return sites, p


def _backward_step_prob(field: LogPartitionField, i: int, j: int) -> float:
    """P(predecessor of (i,j) is (i-1,j)) under the quenched measure."""
    if i == 0:
        return 0.0
    if j == 0:
        return 1.0
    d = field.values[i - 1, j] - field.values[i, j - 1]
    return 1.0 / (1.0 + np.exp(-d))


def sample_quenched_path(
    field: LogPartitionField,
    gen: np.random.Generator,
    endpoint: Optional[tuple] = None,
    level: Optional[int] = None,
) -> LatticePath:
    """Exact backward sampling of a path from the quenched polymer measure.

    With ``endpoint`` fixed, samples from the point-to-point measure; with
    ``level`` m, first draws the endpoint from the free-endpoint marginal.
    """
    if endpoint is None:
        if level is None:
            raise ValueError("need an endpoint or a level")
        sites, p = quenched_endpoint_distribution(field, level)
        endpoint = sites[gen.choice(len(sites), p=p)]
    i, j = endpoint
    rev = [(i, j)]
    while (i, j) != (0, 0):
        if gen.random() < _backward_step_prob(field, i, j):
            i -= 1
        else:
            j -= 1
        rev.append((i, j))
    return LatticePath(rev[::-1], steps="up-right")


def max_path_backtrace(field: PassageField, grid, endpoint: tuple) -> LatticePath:
    """Maximal path attaining T(endpoint); ties prefer the horizontal predecessor."""
    T = field.values
    i, j = endpoint
    rev = [(i, j)]
    tie = False
    while (i, j) != (0, 0):
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            if T[i - 1, j] == T[i, j - 1]:
                tie = True
            if T[i - 1, j] >= T[i, j - 1]:
                i -= 1
            else:
                j -= 1
        rev.append((i, j))
    return LatticePath(rev[::-1], steps="up-right", tie_broken=tie)


@dataclass
class GapRow:
    beta: float
    gap: float  # log Z / beta - T at the endpoint
    q_max_path: float  # quenched mass of the maximal path


def zero_temperature_gap(grid, endpoint: tuple, beta_list: Sequence[float]) -> list:
    """Per-beta diagnostics of the zero-temperature limit at one endpoint."""
    w = _grid_values(grid)
    T = last_passage(w).values[endpoint]
    rows = []
    for beta in beta_list:
        lz = log_partition(w, beta).values[endpoint]
        rows.append(GapRow(beta=beta, gap=lz / beta - T, q_max_path=float(np.exp(beta * T - lz))))
    return rows


def path_rate_functional(vertices: Sequence, p: Callable, free: bool = False) -> float:
    """Quenched path large-deviation rate of a piecewise-linear macroscopic path.

    For constrained endpoints the rate is p(end) - sum_j p(delta_j); with a
    free endpoint it is |end|_1 * p(1/2, 1/2) - sum_j p(delta_j).  Exactness
    for piecewise-linear paths follows from the 1-homogeneity of p.
    """
    verts = [np.asarray(v, dtype=float) for v in vertices]
    if len(verts) < 2:
        raise ValueError("need at least two vertices")
    total = 0.0
    for a, b in zip(verts, verts[1:]):
        d = b - a
        if np.any(d < -1e-12):
            raise NonMonotonePathError("path must be coordinatewise nondecreasing")
        total += p(*np.maximum(d, 0.0))
    end = verts[-1]
    if free:
        l1 = float(np.sum(end))
        return l1 * p(0.5, 0.5) - total
    return p(*end) - total
