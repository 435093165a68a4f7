"""Special functions for the exactly solvable lattice models.

Everything downstream (stationary polymer free energies, Cramer rates,
large-deviation formulas) is built from four scalar functions: log Gamma,
digamma, trigamma, and the inverse of digamma, plus a bracketed scalar root
finder.  All four accept floats or numpy arrays and are accurate to ~1e-13:
arguments are shifted upward with the recurrences

    log Gamma(x) = log Gamma(x+1) - log(x)
    psi0(x)      = psi0(x+1) - 1/x
    psi1(x)      = psi1(x+1) + 1/x^2

until they exceed a threshold, after which a fixed-coefficient asymptotic
(Stirling-type) expansion is evaluated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

ArrayLike = Union[float, np.ndarray]

__all__ = [
    "DomainError",
    "NoSignChangeError",
    "IterationLimitError",
    "PrecisionPolicy",
    "Bracket",
    "log_gamma",
    "digamma",
    "trigamma",
    "inv_digamma",
    "solve_monotone_root",
]


class DomainError(ValueError):
    """Argument outside the mathematical domain of the function."""


class NoSignChangeError(ValueError):
    """Root bracket does not straddle a sign change."""


class IterationLimitError(RuntimeError):
    """Iterative solver exhausted its iteration budget."""


@dataclass(frozen=True)
class PrecisionPolicy:
    """Tolerances and iteration budget for the iterative solvers."""

    abs_tol: float = 1e-12
    rel_tol: float = 1e-12
    max_iter: int = 200

    def __post_init__(self) -> None:
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass(frozen=True)
class Bracket:
    """Interval [lo, hi] on which a target function changes sign."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not self.lo < self.hi:
            raise ValueError("bracket requires lo < hi")


_SHIFT = 10.0
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)

# Stirling-series coefficients B_{2n} / (2n (2n-1)) for log Gamma.
_LG_COEF = (
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
)

# Asymptotic tail coefficients of psi0(x) - log x + 1/(2x): powers x^{-2n}.
_PSI0_COEF = (
    -1.0 / 12.0,
    1.0 / 120.0,
    -1.0 / 252.0,
    1.0 / 240.0,
    -1.0 / 132.0,
    691.0 / 32760.0,
    -1.0 / 12.0,
)

# Asymptotic tail coefficients of psi1(x) - 1/x - 1/(2x^2): powers x^{-(2n+1)}.
_PSI1_COEF = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
)


def _validate_positive(x: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(x)):
        raise DomainError(f"{name} requires finite arguments")
    if np.any(x <= 0.0):
        raise DomainError(f"{name} requires x > 0")


def _even_poly(coef: tuple, inv_x2: np.ndarray) -> np.ndarray:
    acc = np.full_like(inv_x2, coef[-1])
    for c in coef[-2::-1]:
        acc = acc * inv_x2 + c
    return acc


def _as_array(x: ArrayLike) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _scalar_domain(x: float, name: str) -> float:
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise DomainError(f"{name} requires finite x > 0")
    return x


def _log_gamma_scalar(x: float) -> float:
    shift = 0.0
    while x < _SHIFT:
        shift += math.log(x)
        x += 1.0
    inv_x2 = 1.0 / (x * x)
    acc = _LG_COEF[-1]
    for c in _LG_COEF[-2::-1]:
        acc = acc * inv_x2 + c
    return (x - 0.5) * math.log(x) - x + _HALF_LOG_2PI + acc / x - shift


def _digamma_scalar(x: float) -> float:
    shift = 0.0
    while x < _SHIFT:
        shift += 1.0 / x
        x += 1.0
    inv_x2 = 1.0 / (x * x)
    acc = _PSI0_COEF[-1]
    for c in _PSI0_COEF[-2::-1]:
        acc = acc * inv_x2 + c
    return math.log(x) - 0.5 / x + acc * inv_x2 - shift


def _trigamma_scalar(x: float) -> float:
    shift = 0.0
    while x < _SHIFT:
        shift += 1.0 / (x * x)
        x += 1.0
    inv_x = 1.0 / x
    inv_x2 = inv_x * inv_x
    acc = _PSI1_COEF[-1]
    for c in _PSI1_COEF[-2::-1]:
        acc = acc * inv_x2 + c
    return inv_x + 0.5 * inv_x2 + acc * inv_x2 * inv_x + shift


def log_gamma(x: ArrayLike) -> ArrayLike:
    """Natural log of the Gamma function on (0, inf)."""
    if isinstance(x, (float, int)):
        return _log_gamma_scalar(_scalar_domain(x, "log_gamma"))
    arr, scalar = _as_array(x)
    _validate_positive(arr, "log_gamma")
    arr = np.atleast_1d(arr).copy()
    shift_acc = np.zeros_like(arr)
    # Upward recurrence log Gamma(x) = log Gamma(x + k) - sum log(x + i), with
    # one k for the whole array (valid for every entry, cheap for large ones).
    k = int(max(0.0, np.ceil(_SHIFT - arr.min())))
    for _ in range(k):
        shift_acc += np.log(arr)
        arr += 1.0
    inv_x2 = 1.0 / (arr * arr)
    tail = _even_poly(_LG_COEF, inv_x2) / arr
    out = (arr - 0.5) * np.log(arr) - arr + _HALF_LOG_2PI + tail - shift_acc
    return float(out[0]) if scalar else out.reshape(np.shape(x))


def digamma(x: ArrayLike) -> ArrayLike:
    """Digamma psi0 = (log Gamma)' on (0, inf); strictly increasing."""
    if isinstance(x, (float, int)):
        return _digamma_scalar(_scalar_domain(x, "digamma"))
    arr, scalar = _as_array(x)
    _validate_positive(arr, "digamma")
    arr = np.atleast_1d(arr).copy()
    shift_acc = np.zeros_like(arr)
    k = int(max(0.0, np.ceil(_SHIFT - arr.min())))
    for _ in range(k):
        shift_acc += 1.0 / arr
        arr += 1.0
    inv_x2 = 1.0 / (arr * arr)
    out = np.log(arr) - 0.5 / arr + _even_poly(_PSI0_COEF, inv_x2) * inv_x2
    out -= shift_acc
    return float(out[0]) if scalar else out.reshape(np.shape(x))


def trigamma(x: ArrayLike) -> ArrayLike:
    """Trigamma psi1 = psi0' on (0, inf); strictly positive and decreasing."""
    if isinstance(x, (float, int)):
        return _trigamma_scalar(_scalar_domain(x, "trigamma"))
    arr, scalar = _as_array(x)
    _validate_positive(arr, "trigamma")
    arr = np.atleast_1d(arr).copy()
    shift_acc = np.zeros_like(arr)
    # psi1(x) = psi1(x+1) + 1/x^2 keeps the 1/x^2 pole exact near zero.
    k = int(max(0.0, np.ceil(_SHIFT - arr.min())))
    for _ in range(k):
        shift_acc += 1.0 / (arr * arr)
        arr += 1.0
    inv_x = 1.0 / arr
    inv_x2 = inv_x * inv_x
    out = inv_x + 0.5 * inv_x2 + _even_poly(_PSI1_COEF, inv_x2) * inv_x2 * inv_x
    out += shift_acc
    return float(out[0]) if scalar else out.reshape(np.shape(x))


def inv_digamma(y: float, policy: PrecisionPolicy | None = None) -> float:
    """Unique x > 0 with psi0(x) = y, by safeguarded Newton iteration."""
    policy = policy or PrecisionPolicy()
    if not np.isfinite(y):
        raise DomainError("inv_digamma requires finite y")
    # Minka's initial guess: psi0(x) ~ log x for large x, ~ -1/x - gamma near 0.
    if y >= -2.22:
        x = math.exp(y) + 0.5
    else:
        x = -1.0 / (y + 0.5772156649015329)
    lo, hi = 0.0, math.inf
    for _ in range(policy.max_iter):
        f = digamma(x) - y
        if abs(f) <= policy.abs_tol:
            return x
        if f > 0.0:
            hi = x
        else:
            lo = x
        step = f / trigamma(x)
        x_new = x - step
        if not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi) if np.isfinite(hi) else 2.0 * x
        if abs(x_new - x) <= policy.abs_tol * (1.0 + abs(x)):
            x = x_new
            if abs(digamma(x) - y) <= max(policy.abs_tol, 1e-10 * (1.0 + abs(y))):
                return x
        x = x_new
    raise IterationLimitError(f"inv_digamma({y}) did not converge in {policy.max_iter} iterations")


def solve_monotone_root(
    f: Callable[[float], float],
    bracket: Bracket,
    policy: PrecisionPolicy | None = None,
) -> float:
    """Root of f on a sign-changing bracket, bisection with secant acceleration."""
    policy = policy or PrecisionPolicy()
    lo, hi = bracket.lo, bracket.hi
    flo, fhi = f(lo), f(hi)
    if not (np.isfinite(flo) and np.isfinite(fhi)):
        raise DomainError("f must be finite on the bracket endpoints")
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise NoSignChangeError(f"no sign change on [{lo}, {hi}]")
    for _ in range(policy.max_iter):
        if hi - lo <= policy.abs_tol:
            return 0.5 * (lo + hi)
        x = 0.5 * (lo + hi)
        if fhi != flo:
            secant = hi - fhi * (hi - lo) / (fhi - flo)
            margin = 0.01 * (hi - lo)
            if lo + margin < secant < hi - margin:
                x = secant
        fx = f(x)
        if abs(fx) <= policy.abs_tol:
            return x
        if np.sign(fx) == np.sign(flo):
            lo, flo = x, fx
        else:
            hi, fhi = x, fx
    raise IterationLimitError(f"root not located to tolerance in {policy.max_iter} iterations")
