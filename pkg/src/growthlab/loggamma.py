"""Exact formulas for the stationary inverse-gamma polymer.

Weights: bulk Y with Y^{-1} ~ Gamma(mu); stationary boundaries U^{-1} ~
Gamma(theta) on the horizontal axis and V^{-1} ~ Gamma(mu - theta) on the
vertical axis, 0 < theta < mu.  The module provides:

* the Burke propagation U' = Y(1 + U/V), V' = Y(1 + V/U) together with the
  dual variable X = (1/U + 1/V)^{-1} attached to the lattice site diagonally
  below-left of the cell (the triple (U', V', X) reproduces the boundary
  marginals along every down-right path);
* the stationary mean E log Z = -m psi0(theta) - n psi0(mu - theta);
* the point-to-point free energy p_mu(s,t), Cramer rate I_mu, boundary rate,
  and the upper-tail rate function

      J_{s,t}(r) = sup_{xi in [0, mu)} { r xi - G_{s,t}(xi) },
      G_{s,t}(xi) = inf_{xi < theta < mu} ( t L_theta(xi) - s L_{mu-theta}(-xi) ),

  with L_theta(xi) = log Gamma(theta - xi) - log Gamma(theta) the log-mgf of
  a single log-weight.  J is symmetric in (s, t); after ordering s <= t the
  inner infimum may be restricted to theta in [(mu + xi)/2, mu), where the
  inner objective is unimodal.
* the numerically transformed dual J* (an independent route, used by the
  exit-point decomposition identity check).
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .convex import golden_max
from .specfun import Bracket, digamma, log_gamma, solve_monotone_root, trigamma

__all__ = [
    "LogGammaParams",
    "RateQuery",
    "burke_cell",
    "burke_propagate",
    "stationary_mean_logZ",
    "log_weight_mgf",
    "free_energy",
    "cramer_rate",
    "boundary_rate",
    "point_rate",
    "free_endpoint_rate",
    "dual_rate",
    "kappa_star",
    "exit_decomposition_residual",
    "cube_root_expansion_exponent",
]

_EPS = 1e-6  # guard distance from lnGamma singularities
_XI_GRID = 512  # outer grid resolution for the rate-function supremum


@dataclass(frozen=True)
class LogGammaParams:
    mu: float
    theta: float

    def __post_init__(self) -> None:
        if not (0.0 < self.theta < self.mu):
            raise ValueError("need 0 < theta < mu")


@dataclass(frozen=True)
class RateQuery:
    """Point of evaluation for the rate functions and their duals."""

    s: float
    t: float
    r: float
    mu: float
    xi: float | None = None

    def __post_init__(self) -> None:
        if self.s < 0 or self.t < 0 or (self.s == 0 and self.t == 0):
            raise ValueError("need s, t >= 0 and (s,t) != (0,0)")
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.xi is not None and not (0.0 <= self.xi < self.mu):
            raise ValueError("xi must lie in [0, mu)")


def log_weight_mgf(theta, xi):
    """L_theta(xi) = log E exp(xi log Y) = logGamma(theta - xi) - logGamma(theta)."""
    return log_gamma(theta - xi) - log_gamma(theta)


def burke_cell(U: float, V: float, Y: float):
    """One propagation step: (U', V', X) from the south/west inputs and the bulk Y.

    X is built from the pre-update pair, X = (1/U + 1/V)^{-1}; it belongs to
    the site diagonally below-left of the cell.  The post-update pair always
    satisfies (1/U' + 1/V')^{-1} = Y identically.
    """
    if U <= 0 or V <= 0 or Y <= 0:
        raise ValueError("Burke propagation needs positive inputs")
    U2 = Y * (1.0 + U / V)
    V2 = Y * (1.0 + V / U)
    X = U * V / (U + V)
    return U2, V2, X


def burke_propagate(U_row: np.ndarray, V_col: np.ndarray, Y_bulk: np.ndarray):
    """Propagate the stationary structure through an m x n block.

    Parameters are the boundary weights U_{i,0} (length m), V_{0,j}
    (length n) and the bulk Y_{i,j} (shape (m, n)).  Returns

      U[i-1, j] = U_{i,j}   for 1 <= i <= m, 0 <= j <= n,
      V[i, j-1] = V_{i,j}   for 0 <= i <= m, 1 <= j <= n,
      X[i-1, j-1] = X_{i-1, j-1}  for 1 <= i <= m, 1 <= j <= n.
    """
    U_row = np.asarray(U_row, dtype=float)
    V_col = np.asarray(V_col, dtype=float)
    Y = np.asarray(Y_bulk, dtype=float)
    m, n = Y.shape
    if U_row.shape != (m,) or V_col.shape != (n,):
        raise ValueError("boundary arrays must match the bulk block")
    if np.any(U_row <= 0) or np.any(V_col <= 0) or np.any(Y <= 0):
        raise ValueError("Burke propagation needs positive inputs")
    U = np.empty((m, n + 1))
    V = np.empty((m + 1, n))
    X = np.empty((m, n))
    U[:, 0] = U_row
    V[0, :] = V_col
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            u_in = U[i - 1, j - 1]
            v_in = V[i - 1, j - 1]
            y = Y[i - 1, j - 1]
            U[i - 1, j] = y * (1.0 + u_in / v_in)
            V[i, j - 1] = y * (1.0 + v_in / u_in)
            X[i - 1, j - 1] = u_in * v_in / (u_in + v_in)
    return U, V, X


def stationary_mean_logZ(m: int, n: int, params: LogGammaParams) -> float:
    """E log Z^(theta)_{m,n} = -m psi0(theta) - n psi0(mu - theta)."""
    return -m * digamma(params.theta) - n * digamma(params.mu - params.theta) if m or n else 0.0


def free_energy(s: float, t: float, mu: float) -> float:
    """Point-to-point free energy p_mu(s,t).

    theta_{s,t} solves t psi1(mu - theta) = s psi1(theta); the value is
    -(s psi0(theta) + t psi0(mu - theta)).  On the axes the law of large
    numbers of a single row of i.i.d. log-weights gives -(s + t) psi0(mu).
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    if s < 0 or t < 0 or (s == 0 and t == 0):
        raise ValueError("need s, t >= 0, not both zero")
    if s == 0 or t == 0:
        return -(s + t) * digamma(mu)
    h = lambda th: t * trigamma(mu - th) - s * trigamma(th)
    lo, hi = _EPS * mu, (1.0 - _EPS) * mu
    while h(lo) > 0:
        lo *= 0.5
    while h(hi) < 0:
        hi = 0.5 * (hi + mu)
    theta = solve_monotone_root(h, Bracket(lo, hi))
    return -(s * digamma(theta) + t * digamma(mu - theta))


def cramer_rate(r: float, mu: float) -> float:
    """Cramer rate I_mu(r) of a single log-weight, via the inverse digamma."""
    from .specfun import inv_digamma

    x = inv_digamma(-r)
    return -r * x - log_gamma(x) + mu * r + log_gamma(mu)


def boundary_rate(x: float, r: float, mu: float) -> float:
    """Upper-tail rate of log Z along an axis of macroscopic length x."""
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x == 0.0:
        return r * mu if r >= 0 else 0.0
    if r < -x * digamma(mu):
        return 0.0
    return x * cramer_rate(r / x, mu)


def _inner_inf_vec(xi: np.ndarray, s: float, t: float, mu: float, iters: int = 60) -> np.ndarray:
    """G(xi) = inf_theta ( t L_theta(xi) - s L_{mu-theta}(-xi) ), vectorized.

    Requires s <= t so the minimizer lies in [(mu+xi)/2, mu); the objective is
    strictly unimodal there, so golden section applies componentwise.
    """
    xi = np.asarray(xi, dtype=float)

    def f(theta):
        return (t * (log_gamma(theta - xi) - log_gamma(theta))
                - s * (log_gamma(mu - theta + xi) - log_gamma(mu - theta)))

    # Upper guard relative to the gap mu - xi so the bracket never collapses
    # onto the lnGamma poles at theta = xi and theta = mu.
    hi = mu - np.minimum(1e-8, 0.25 * (mu - xi))
    lo = np.minimum(0.5 * (mu + xi), hi)
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    for _ in range(iters):
        x1 = hi - invphi * (hi - lo)
        x2 = lo + invphi * (hi - lo)
        keep_right = f(x1) > f(x2)  # minimizing: drop the larger side
        lo = np.where(keep_right, x1, lo)
        hi = np.where(keep_right, hi, x2)
    mid = 0.5 * (lo + hi)
    return f(mid)


@functools.lru_cache(maxsize=64)
def _g_grid(s: float, t: float, mu: float):
    """Cached (xi_grid, G values) for the outer supremum; s <= t enforced."""
    xi = np.linspace(0.0, mu - _EPS, _XI_GRID + 1)
    return xi, _inner_inf_vec(xi, s, t, mu)


def _g_scalar(xi: float, s: float, t: float, mu: float, iters: int = 50) -> float:
    """Scalar inner infimum; same bracket and method as the vectorized grid."""
    lg = log_gamma

    def f(theta: float) -> float:
        return (t * (lg(theta - xi) - lg(theta))
                - s * (lg(mu - theta + xi) - lg(mu - theta)))

    hi = mu - min(1e-8, 0.25 * (mu - xi))
    lo = min(0.5 * (mu + xi), hi)
    invphi = (5.0**0.5 - 1.0) / 2.0
    for _ in range(iters):
        x1 = hi - invphi * (hi - lo)
        x2 = lo + invphi * (hi - lo)
        if f(x1) > f(x2):
            lo = x1
        else:
            hi = x2
    return f(0.5 * (lo + hi))


def point_rate(s: float, t: float, r: float, mu: float) -> float:
    """Upper-tail rate J_{s,t}(r) of log Z_{(ns, nt)} for the bulk polymer.

    Nested optimization: inner infimum over theta by golden section on
    [(mu+xi)/2, mu), outer supremum over xi in [0, mu) on a grid followed by
    two local golden refinements.  Axis cases delegate to boundary_rate.
    """
    RateQuery(s, t, r, mu)
    if s == 0.0 or t == 0.0:
        return boundary_rate(s + t, r, mu)
    s, t = min(s, t), max(s, t)
    xi, g = _g_grid(s, t, mu)
    obj = r * xi - g
    k = int(np.argmax(obj))
    best = obj[k]
    lo = xi[max(k - 1, 0)]
    hi = xi[min(k + 1, len(xi) - 1)]
    for _ in range(2):
        x_ref, v_ref = golden_max(lambda x: r * x - _g_scalar(x, s, t, mu), lo, hi)
        best = max(best, v_ref)
        w = 0.25 * (hi - lo)
        lo, hi = max(0.0, x_ref - w), min(mu - _EPS, x_ref + w)
    return float(max(best, 0.0))


def free_endpoint_rate(s: float, r: float, mu: float) -> float:
    """Free-endpoint upper-tail rate: equals the symmetric point rate J_{s/2,s/2}."""
    if s <= 0:
        raise ValueError("s must be positive")
    return point_rate(0.5 * s, 0.5 * s, r, mu)


def _point_rate_on_grid(rs: np.ndarray, s: float, t: float, mu: float) -> np.ndarray:
    """J_{s,t} on an array of r values, using the cached outer grid only."""
    s, t = min(s, t), max(s, t)
    xi, g = _g_grid(s, t, mu)
    vals = rs[:, None] * xi[None, :] - g[None, :]
    return np.maximum(np.max(vals, axis=1), 0.0)


def dual_rate(s: float, t: float, xi: float, mu: float) -> float:
    """J*_{s,t}(xi) = sup_r { r xi - J_{s,t}(r) }, by numeric Legendre transform.

    Diverges for xi >= mu (raises).  Axis cases use the closed-form dual of the
    boundary rate, x L_mu(xi).
    """
    if not (0.0 <= xi < mu):
        raise ValueError("dual_rate requires 0 <= xi < mu")
    if s == 0.0 or t == 0.0:
        return (s + t) * float(log_weight_mgf(mu, xi))
    if xi == 0.0:
        return 0.0
    r0 = free_energy(s, t, mu)

    def h_vec(rs):
        return rs * xi - _point_rate_on_grid(rs, s, t, mu)

    span = 4.0
    while span < 2.0**24:
        rs = np.linspace(r0 - 1.0, r0 + span, 513)
        hv = h_vec(rs)
        k = int(np.argmax(hv))
        if k < len(rs) - 1:
            break
        span *= 2.0
    else:
        raise ValueError("dual_rate supremum did not localize; xi too close to mu")
    h = lambda r: float(h_vec(np.array([r]))[0])
    _, val = golden_max(h, rs[max(k - 1, 0)], rs[min(k + 1, len(rs) - 1)])
    return float(max(val, hv[k]))


def kappa_star(a: float, s: float, t: float, xi: float, mu: float, theta: float) -> float:
    """Dual of the boundary-exit rate kappa_a; +inf outside the admissible branch.

    For a in [-t, 0] and xi >= 0:  (t + a)(logGamma(mu - theta + xi) - logGamma(mu - theta));
    for a in (0, s] and 0 <= xi < theta:  t(...) + a(logGamma(theta - xi) - logGamma(theta)).
    """
    if not (-t <= a <= s):
        raise ValueError("a must lie in [-t, s]")
    if xi < 0:
        return np.inf
    h_term = log_gamma(mu - theta + xi) - log_gamma(mu - theta)
    if a <= 0:
        return (t + a) * h_term
    if xi >= theta:
        return np.inf
    d_term = log_gamma(theta - xi) - log_gamma(theta)
    return t * h_term + a * d_term


def exit_decomposition_residual(s: float, t: float, xi: float, theta: float, mu: float,
                                n_a: int = 33) -> float:
    """Gap in the exit-point decomposition identity

        s log G(theta-xi)/G(theta) - t log G(mu-theta+xi)/G(mu-theta)
            = sup_{a in [-t, s]} { a u(theta) + J*_{(s,t)-a}(xi) },

    where u(theta) is the log-mgf of the boundary weight on the side the
    polymer exits: L_{mu-theta}(-xi) for a <= 0 and L_theta(xi) for a > 0.
    J* terms come from the numeric dual, so a small residual is a genuine
    consistency check between the closed form and the nested optimization.
    """
    if not (0.0 <= xi < theta < mu):
        raise ValueError("need 0 <= xi < theta < mu")
    lhs = (s * (log_gamma(theta - xi) - log_gamma(theta))
           - t * (log_gamma(mu - theta + xi) - log_gamma(mu - theta)))
    u_neg = log_gamma(mu - theta + xi) - log_gamma(mu - theta)  # a <= 0 side
    u_pos = log_gamma(theta - xi) - log_gamma(theta)            # a > 0 side

    def value(a: float) -> float:
        if a <= 0:
            return a * u_neg + dual_rate(s, t + a, xi, mu)
        return a * u_pos + dual_rate(s - a, t, xi, mu)

    best = -np.inf
    for lo, hi in ((-t, 0.0), (0.0, s)):
        grid = np.linspace(lo, hi, n_a)
        vals = np.array([value(a) for a in grid])
        k = int(np.argmax(vals))
        best = max(best, vals[k])
        a_lo, a_hi = grid[max(k - 1, 0)], grid[min(k + 1, n_a - 1)]
        _, v = golden_max(value, a_lo, a_hi, tol=1e-9)
        best = max(best, v)
    return float(abs(lhs - best))


def cube_root_expansion_exponent(mu: float = 2.0, eps_lo: float = 1e-3, eps_hi: float = 1e-1,
                                 n_pts: int = 13):
    """Log-log slope of J_{1,1}(r0 + eps) near its zero r0 = -2 psi0(mu/2).

    Returns (slope, r_squared, r0).  The expansion order of the rate function
    at the edge of its zero set is 3/2, so the fitted slope should sit near
    1.5 over eps in [eps_lo, eps_hi].
    """
    from .mc import fit_power_exponent

    r0 = -2.0 * digamma(0.5 * mu)
    eps = np.logspace(np.log10(eps_lo), np.log10(eps_hi), n_pts)
    js = np.array([point_rate(1.0, 1.0, r0 + e, mu) for e in eps])
    slope, r2 = fit_power_exponent(eps, js)
    return slope, r2, r0
