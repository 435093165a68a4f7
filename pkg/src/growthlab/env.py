"""Reproducible random environments and the speed-function abstraction.

Two generation schemes coexist, both keyed by an :class:`RngSpec`:

* counter-based per-site draws for exponential weights and Poisson clock
  streams (``value = hash(seed, site, counter)``), so that coupled processes
  can consume identical randomness site by site and grids can be regenerated
  in parallel;
* a per-grid Philox stream, consumed in a fixed canonical site order, for
  gamma-distributed weights (rejection sampling draws a variable amount of
  randomness per site, which does not fit the counter scheme).

Either way a :class:`WeightGrid` is bit-reproducible from its metadata.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

__all__ = [
    "SpeedFunction",
    "RngSpec",
    "WeightGrid",
    "RectRegion",
    "WedgeRegion",
    "speed_at",
    "sample_exponential_grid",
    "sample_loggamma_grid",
    "sample_two_phase_corner",
    "exp_site_value",
    "uniform_site_value",
]

_GOLD = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _splitmix64(z: np.ndarray) -> np.ndarray:
    # uint64 wraparound is the point here.
    with np.errstate(over="ignore"):
        z = (z + _GOLD).astype(np.uint64)
        z ^= z >> np.uint64(30)
        z *= _MIX1
        z ^= z >> np.uint64(27)
        z *= _MIX2
        z ^= z >> np.uint64(31)
    return z


def _encode_int(v) -> np.ndarray:
    # Two's-complement mapping of (possibly negative) lattice indices to uint64.
    return np.asarray(v, dtype=np.int64).astype(np.uint64)


def uniform_site_value(seed: int, *counters) -> np.ndarray:
    """Deterministic uniform(0,1) value(s) keyed by (seed, counters...)."""
    arrays = [_encode_int(c) for c in counters]
    shape = np.broadcast_shapes(*(a.shape for a in arrays)) if arrays else ()
    h = _splitmix64(_encode_int(seed) + np.zeros(shape, dtype=np.uint64))
    for a in arrays:
        h = _splitmix64(h ^ np.broadcast_to(a, shape))
    return (h >> np.uint64(11)).astype(np.float64) * (2.0**-53)


_U64 = (1 << 64) - 1


def _splitmix64_int(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _U64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _U64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _U64
    return z ^ (z >> 31)


def uniform_site_scalar(seed: int, *counters) -> float:
    """Scalar twin of :func:`uniform_site_value`; bit-identical values."""
    h = _splitmix64_int(seed & _U64)
    for c in counters:
        h = _splitmix64_int(h ^ (int(c) & _U64))
    return (h >> 11) * 2.0**-53


def exp_site_value(seed: int, rate, *counters) -> np.ndarray:
    """Deterministic Exp(rate) value(s) keyed by (seed, counters...)."""
    if isinstance(rate, (float, np.floating)) and all(
        isinstance(c, (int, np.integer)) for c in counters
    ):
        return -math.log1p(-uniform_site_scalar(int(seed), *counters)) / float(rate)
    u = uniform_site_value(seed, *counters)
    return -np.log1p(-u) / np.asarray(rate, dtype=float)


@dataclass(frozen=True)
class RngSpec:
    """Keys a reproducible random stream: same pair, same stream."""

    base_seed: int
    stream_id: int = 0

    def stream(self, i: int) -> "RngSpec":
        return RngSpec(self.base_seed, i)

    def generator(self) -> np.random.Generator:
        key = np.array([self.base_seed, self.stream_id], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class SpeedFunction:
    """Piecewise-constant, lower-semicontinuous jump-rate profile c(x).

    ``piece_rates[m]`` applies on (breakpoints[m-1], breakpoints[m]); the value
    at a breakpoint is the min of the two adjacent rates.
    """

    breakpoints: tuple = ()
    piece_rates: tuple = (1.0,)

    def __post_init__(self) -> None:
        bps = tuple(float(b) for b in self.breakpoints)
        rates = tuple(float(r) for r in self.piece_rates)
        if len(rates) != len(bps) + 1:
            raise ValueError("need exactly one more rate than breakpoints")
        if any(r <= 0 for r in rates):
            raise ValueError("rates must be positive")
        if any(b2 <= b1 for b1, b2 in zip(bps, bps[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "piece_rates", rates)

    @classmethod
    def constant(cls, c: float) -> "SpeedFunction":
        return cls((), (c,))

    @classmethod
    def two_phase(cls, c1: float, c2: float) -> "SpeedFunction":
        """c1 on x < 0, c2 on x > 0, min(c1, c2) at the discontinuity."""
        return cls((0.0,), (c1, c2))

    @property
    def max_rate(self) -> float:
        return max(self.piece_rates)

    def __call__(self, x):
        return speed_at(self, x)

    def scaled(self, lam: float) -> "SpeedFunction":
        """Speed profile x -> c(x / lam) (breakpoints stretched by lam)."""
        return SpeedFunction(tuple(lam * b for b in self.breakpoints), self.piece_rates)


def speed_at(c: SpeedFunction, x):
    """Evaluate c at x; min of adjacent piece rates exactly at a breakpoint."""
    xs = np.asarray(x, dtype=float)
    scalar = xs.ndim == 0
    xs = np.atleast_1d(xs)
    bps = np.array(c.breakpoints)
    rates = np.array(c.piece_rates)
    if len(bps) == 0:
        out = np.full(xs.shape, rates[0])
    else:
        idx = np.searchsorted(bps, xs, side="right")
        out = rates[idx]
        for m, b in enumerate(bps):
            on = xs == b
            if np.any(on):
                out[on] = min(rates[m], rates[m + 1])
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class RectRegion:
    """Rectangle of lattice sites (i, j), 0 <= i <= m, 0 <= j <= n.

    ``values[i, j]`` carries the weight of site (i, j); the origin entry is a
    neutral placeholder when the origin weight is ignored.
    """

    m: int
    n: int

    @property
    def shape(self) -> tuple:
        return (self.m + 1, self.n + 1)


@dataclass(frozen=True)
class WedgeRegion:
    """Trapezoid of the wedge lattice L = {(i,j): j >= 1, i >= -j+1} that
    contains every admissible path to (u, v): row j holds i in
    [-j+1, u+v-j].  Stored as a (v, u+v) array; column k of row j is site
    i = -j + 1 + k.
    """

    u: int
    v: int

    def __post_init__(self) -> None:
        if self.v < 1 or self.u < -self.v + 1:
            raise ValueError("target (u, v) must lie in the wedge lattice")

    @property
    def shape(self) -> tuple:
        return (self.v, self.u + self.v)

    def i_range(self, j: int) -> range:
        return range(-j + 1, self.u + self.v - j + 1)

    def col(self, i: int, j: int) -> int:
        return i + j - 1


@dataclass
class WeightGrid:
    """Random environment values plus the metadata needed to regenerate them."""

    region: object
    values: np.ndarray
    distribution: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    stream_id: int = 0

    def rng(self) -> RngSpec:
        return RngSpec(self.seed, self.stream_id)

    def metadata(self) -> dict:
        region = {"kind": type(self.region).__name__}
        region.update({k: int(v) for k, v in vars(self.region).items()})
        return {
            "region": region,
            "distribution": self.distribution,
            "params": self.params,
            "seed": int(self.seed),
            "stream_id": int(self.stream_id),
        }

    def save(self, path) -> None:
        """Binary sidecar (<path>.npz) plus human-readable metadata (<path>.json)."""
        path = Path(path)
        np.savez_compressed(path.with_suffix(".npz"), values=self.values)
        path.with_suffix(".json").write_text(json.dumps(self.metadata(), indent=2))

    @classmethod
    def load(cls, path) -> "WeightGrid":
        path = Path(path)
        meta = json.loads(path.with_suffix(".json").read_text())
        values = np.load(path.with_suffix(".npz"))["values"]
        region_meta = dict(meta["region"])
        kind = region_meta.pop("kind")
        region = {"RectRegion": RectRegion, "WedgeRegion": WedgeRegion}[kind](**region_meta)
        return cls(region, values, meta["distribution"], meta["params"], meta["seed"], meta["stream_id"])

    def regenerate(self) -> "WeightGrid":
        """Rebuild the grid from metadata alone; bit-identical to the original."""
        rng = RngSpec(self.seed, self.stream_id)
        if self.distribution == "exponential-speed":
            c = SpeedFunction(tuple(self.params["breakpoints"]), tuple(self.params["piece_rates"]))
            return sample_exponential_grid(
                c, self.params["n"], self.params["shift"], self.region, rng
            )
        if self.distribution == "log-gamma":
            return sample_loggamma_grid(
                self.params["mu"], self.params["theta"], self.region.m, self.region.n,
                self.params["with_boundary"], rng,
            )
        if self.distribution == "two-phase-corner":
            return sample_two_phase_corner(
                self.params["c1"], self.params["c2"], self.params["m"], self.params["n"], rng
            )
        raise ValueError(f"unknown distribution tag {self.distribution!r}")


def sample_exponential_grid(
    c: SpeedFunction,
    n: int,
    shift: int,
    region,
    rng: RngSpec,
) -> WeightGrid:
    """Independent Exp(c((i - shift)/n)) weights per site, counter-based per site.

    On a rectangle, site (i, j) of ``region.shape``; on a wedge, the sites of
    :class:`WedgeRegion`.  The rate of site (i, j) is c((i - shift)/n).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if isinstance(region, RectRegion):
        ii = np.arange(region.m + 1)[:, None] * np.ones((1, region.n + 1), dtype=int)
        jj = np.ones((region.m + 1, 1), dtype=int) * np.arange(region.n + 1)[None, :]
    elif isinstance(region, WedgeRegion):
        rows, width = region.shape
        jj = np.arange(1, rows + 1)[:, None] * np.ones((1, width), dtype=int)
        ii = (-jj + 1) + np.arange(width)[None, :]
    else:
        raise ValueError("region must be a RectRegion or WedgeRegion")
    rates = speed_at(c, (ii - shift) / n)
    values = exp_site_value(rng.base_seed ^ rng.stream_id, rates, ii, jj)
    params = {
        "breakpoints": list(c.breakpoints),
        "piece_rates": list(c.piece_rates),
        "n": n,
        "shift": shift,
    }
    return WeightGrid(region, values, "exponential-speed", params, rng.base_seed, rng.stream_id)


def sample_loggamma_grid(
    mu: float,
    theta: Optional[float],
    m: int,
    n: int,
    with_boundary: bool,
    rng: RngSpec,
) -> WeightGrid:
    """Inverse-gamma polymer weights on a rectangle.

    Bulk sites (i >= 1, j >= 1) hold Y with Y^{-1} ~ Gamma(mu).  With the
    boundary flag, row j = 0 holds U with U^{-1} ~ Gamma(theta) and column
    i = 0 holds V with V^{-1} ~ Gamma(mu - theta); otherwise the axes carry
    bulk weights too.  The origin is the neutral value 1.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    if with_boundary and not (theta is not None and 0.0 < theta < mu):
        raise ValueError("theta must lie in (0, mu) when boundaries are requested")
    gen = rng.generator()
    region = RectRegion(m, n)
    values = np.empty(region.shape)
    values[0, 0] = 1.0
    values[1:, 1:] = 1.0 / gen.gamma(mu, size=(m, n))
    if with_boundary:
        values[1:, 0] = 1.0 / gen.gamma(theta, size=m)
        values[0, 1:] = 1.0 / gen.gamma(mu - theta, size=n)
    else:
        values[1:, 0] = 1.0 / gen.gamma(mu, size=m)
        values[0, 1:] = 1.0 / gen.gamma(mu, size=n)
    params = {"mu": mu, "theta": theta, "with_boundary": bool(with_boundary)}
    return WeightGrid(region, values, "log-gamma", params, rng.base_seed, rng.stream_id)


def sample_two_phase_corner(c1: float, c2: float, m: int, n: int, rng: RngSpec) -> WeightGrid:
    """Corner-growth rectangle with a diagonal rate boundary.

    Site (i, j), 1-indexed and stored at values[i-1, j-1], holds an Exp
    variable with rate c1 above the diagonal (i < j), c2 below it (i > j),
    and min(c1, c2) on it.
    """
    if c1 <= 0 or c2 <= 0:
        raise ValueError("rates must be positive")
    ii = np.arange(1, m + 1)[:, None] * np.ones((1, n), dtype=int)
    jj = np.ones((m, 1), dtype=int) * np.arange(1, n + 1)[None, :]
    rates = np.where(ii < jj, c1, np.where(ii > jj, c2, min(c1, c2)))
    values = exp_site_value(rng.base_seed ^ rng.stream_id, rates, ii, jj)
    params = {"c1": c1, "c2": c2, "m": m, "n": n}
    return WeightGrid(RectRegion(m - 1, n - 1), values, "two-phase-corner", params,
                      rng.base_seed, rng.stream_id)
