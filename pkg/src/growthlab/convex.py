"""Convex analysis on explicit grids.

Legendre transforms f*(r) = sup_x {rx - f(x)}, infimal convolutions
(f [] g)(x) = inf_y {f(y) + g(x-y)}, and one-sided Cramer rate functions
J(a) = sup_{u>=0} {au - M(u)} / I(a) = sup_{u<=0} {au - M(u)}.

Grid functions may carry +inf sentinel values, but only at the edges of
their grids.  A transform always refers to the function restricted to its
declared domain (equivalently, extended by +inf outside it); closed-form
duals over all of R are recovered only in the limit of a growing domain.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "EmptyDomainError",
    "DivergenceError",
    "GridFunction",
    "LogMgf",
    "legendre",
    "inf_convolve",
    "cramer_one_sided",
    "golden_max",
]

INF = np.inf


class EmptyDomainError(ValueError):
    """Grid function has no finite values to transform."""


class DivergenceError(RuntimeError):
    """Supremum escapes to the boundary of the admissible domain."""


_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


def golden_max(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = 1e-11,
    max_iter: int = 200,
) -> tuple[float, float]:
    """Golden-section maximizer of a unimodal f on [lo, hi] -> (argmax, max)."""
    a, b = float(lo), float(hi)
    x1 = b - _INVPHI * (b - a)
    x2 = a + _INVPHI * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if b - a <= tol * (1.0 + abs(a) + abs(b)):
            break
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INVPHI * (b - a)
            f2 = f(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - _INVPHI * (b - a)
            f1 = f(x1)
    xm = 0.5 * (a + b)
    return xm, f(xm)


@dataclass
class GridFunction:
    """Real function tabulated on a strictly increasing grid.

    +inf entries mark points outside the effective domain and are allowed
    only at the edges of the grid.
    """

    xs: np.ndarray
    ys: np.ndarray
    domain_lo: float = field(default=np.nan)
    domain_hi: float = field(default=np.nan)

    def __post_init__(self) -> None:
        self.xs = np.asarray(self.xs, dtype=float)
        self.ys = np.asarray(self.ys, dtype=float)
        if self.xs.ndim != 1 or self.xs.shape != self.ys.shape or len(self.xs) < 2:
            raise ValueError("xs and ys must be 1-d arrays of equal length >= 2")
        if np.any(np.diff(self.xs) <= 0):
            raise ValueError("xs must be strictly increasing")
        finite = np.isfinite(self.ys)
        if not np.any(finite):
            raise EmptyDomainError("grid function is +inf everywhere")
        idx = np.nonzero(finite)[0]
        if np.any(~finite[idx[0] : idx[-1] + 1]):
            raise ValueError("+inf entries are allowed only at the grid edges")
        if np.isnan(self.domain_lo):
            self.domain_lo = float(self.xs[idx[0]])
        if np.isnan(self.domain_hi):
            self.domain_hi = float(self.xs[idx[-1]])

    @classmethod
    def from_callable(cls, f: Callable, lo: float, hi: float, n: int = 2001) -> "GridFunction":
        xs = np.linspace(lo, hi, n)
        ys = np.array([f(x) for x in xs], dtype=float)
        return cls(xs, ys)

    def __call__(self, x) -> np.ndarray:
        """Piecewise-linear evaluation; +inf outside the grid or on inf segments."""
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        out = np.full(x.shape, INF)
        inside = (x >= self.xs[0]) & (x <= self.xs[-1])
        if np.any(inside):
            xi = x[inside]
            k = np.clip(np.searchsorted(self.xs, xi, side="right") - 1, 0, len(self.xs) - 2)
            x0, x1 = self.xs[k], self.xs[k + 1]
            y0, y1 = self.ys[k], self.ys[k + 1]
            both = np.isfinite(y0) & np.isfinite(y1)
            with np.errstate(invalid="ignore"):
                lin = np.where(both, y0 + (y1 - y0) * (xi - x0) / (x1 - x0), INF)
            # A query exactly on a finite node is finite even if a neighbor is +inf.
            lin = np.where((xi == x0) & np.isfinite(y0), y0, lin)
            lin = np.where((xi == x1) & np.isfinite(y1), y1, lin)
            out[inside] = lin
        return float(out[0]) if scalar else out


@dataclass
class LogMgf:
    """Limiting log moment generating function M(u), finite on (-inf, u_max)."""

    fn: Callable[[float], float]
    u_max: float = INF

    def __post_init__(self) -> None:
        if abs(self.fn(0.0)) > 1e-9:
            raise ValueError("a log-mgf must satisfy M(0) = 0")

    def __call__(self, u: float) -> float:
        if u >= self.u_max:
            return INF
        return float(self.fn(u))


def legendre(f: GridFunction, slope_grid: np.ndarray) -> GridFunction:
    """Convex dual f*(r) = max over the grid of r x - f(x)."""
    rs = np.asarray(slope_grid, dtype=float)
    finite = np.isfinite(f.ys)
    if not np.any(finite):
        raise EmptyDomainError("cannot transform an everywhere-infinite function")
    xs, ys = f.xs[finite], f.ys[finite]
    vals = rs[:, None] * xs[None, :] - ys[None, :]
    return GridFunction(rs, np.max(vals, axis=1))


def inf_convolve(f: GridFunction, g: GridFunction, x_grid: np.ndarray) -> GridFunction:
    """Infimal convolution (f [] g)(x) = inf_y { f(y) + g(x - y) } on x_grid.

    The inf runs over f's grid points with g evaluated by linear interpolation
    (+inf outside g's domain).
    """
    xq = np.asarray(x_grid, dtype=float)
    finite = np.isfinite(f.ys)
    if not np.any(finite) or not np.any(np.isfinite(g.ys)):
        raise EmptyDomainError("inf_convolve requires finite values on both inputs")
    ys_f = f.ys[finite]
    xs_f = f.xs[finite]
    out = np.empty(len(xq))
    for i, x in enumerate(xq):
        gv = g(x - xs_f)
        out[i] = np.min(ys_f + gv)
    return GridFunction(xq, out)


def cramer_one_sided(M: LogMgf, a: float, side: str) -> float:
    """One-sided Cramer rate: sup over u >= 0 (upper) or u <= 0 (lower) of au - M(u)."""
    if side not in ("upper", "lower"):
        raise ValueError("side must be 'upper' or 'lower'")

    def h(u: float) -> float:
        m = M(u)
        return -INF if not np.isfinite(m) else a * u - m

    if side == "upper":
        if h(0.0) == -INF:
            raise DivergenceError("M not finite at 0")
        hi = M.u_max if np.isfinite(M.u_max) else 1.0
        if not np.isfinite(M.u_max):
            # Expand until the concave objective is decreasing at the right end.
            while h(hi) > h(0.9 * hi) and hi < 2.0**40:
                hi *= 2.0
            if hi >= 2.0**40:
                raise DivergenceError("upper one-sided supremum diverges")
            u_lo, u_hi = 0.0, hi
        else:
            u_lo, u_hi = 0.0, hi - 1e-9 * max(1.0, abs(hi))
            grid = np.linspace(u_lo, u_hi, 513)
            vals = np.array([h(u) for u in grid])
            k = int(np.argmax(vals))
            if k == len(grid) - 1 and vals[-1] > vals[-2] + 1e-12:
                raise DivergenceError("supremum attained at the divergence boundary u_max")
    else:
        lo = -1.0
        while h(lo) > h(0.9 * lo) and lo > -(2.0**40):
            lo *= 2.0
        if lo <= -(2.0**40):
            raise DivergenceError("lower one-sided supremum diverges")
        u_lo, u_hi = lo, 0.0

    _, val = golden_max(h, u_lo, u_hi)
    # u = 0 is always admissible (value 0 there), so the rate is >= 0.
    return max(val, h(u_lo), h(u_hi))
