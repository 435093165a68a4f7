"""Event-driven TASEP with site-dependent rates c(i/n).

Two exact realizations of the same graphical construction:

* a bulk engine that enumerates every Poisson ring in time order (generated
  in slabs, sorted, then replayed) - used for hydrodynamic-scale runs;
* a coupled engine driven by :class:`ClockStream`, whose per-site event
  times are counter-based and therefore shared verbatim between the height
  process z and the whole family of wedge processes xi^k (xi^k at site i
  reads the clock of site i + k) - used for the envelope identity and the
  passage-time couplings.

Height bookkeeping: eta_i = z_i - z_{i-1}, jumps decrease z_i by one, and
the current through i is J_i(t) = z_i(0) - z_i(t).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .env import RngSpec, SpeedFunction, exp_site_value, speed_at
from .lattice import wedge_last_passage
from .env import WedgeRegion, sample_exponential_grid
from .mc import ks_test_two_sample

__all__ = [
    "WindowOverflowError",
    "TasepTrajectory",
    "XiTrajectory",
    "ClockStream",
    "simulate",
    "occupation_measure",
    "simulate_xi",
    "envelope_check",
    "run_envelope_experiment",
    "EnvelopeReport",
    "lpp_coupling_check",
    "CouplingReport",
    "required_buffer",
]

_EVENT_CAP = 200_000_000


class WindowOverflowError(RuntimeError):
    """Simulation window too small for the light cone of the horizon."""


def required_buffer(max_rate: float, horizon_micro: float) -> int:
    """Site buffer beyond the observation window that makes truncation safe."""
    return int(math.ceil(4.0 * max_rate * horizon_micro)) + 64


def _initial_occupancy(initial, sites: np.ndarray, n: int, gen: np.random.Generator) -> np.ndarray:
    if isinstance(initial, str):
        if initial != "step":
            raise ValueError(f"unknown initial condition {initial!r}")
        return (sites < 0).astype(np.uint8)
    if callable(initial):
        probs = np.array([float(initial(i / n)) for i in sites])
        if np.any((probs < 0) | (probs > 1)):
            raise ValueError("profile densities must lie in [0, 1]")
        return (gen.random(len(sites)) < probs).astype(np.uint8)
    rho = float(initial)
    if not 0.0 <= rho <= 1.0:
        raise ValueError("Bernoulli density must lie in [0, 1]")
    return (gen.random(len(sites)) < rho).astype(np.uint8)


def _heights_from_eta(eta: np.ndarray, sites: np.ndarray) -> np.ndarray:
    """z_i with z anchored so that z_0 = 0 (or at the leftmost site if 0 is
    outside the window); increments z_i - z_{i-1} = eta_i."""
    z = np.cumsum(eta.astype(np.int64))
    if sites[0] <= 0 <= sites[-1]:
        anchor = z[np.searchsorted(sites, 0)]
    else:
        anchor = z[0]
    return z - anchor


@dataclass
class TasepTrajectory:
    """Snapshots of an exclusion run: occupancy, currents, heights."""

    n: int
    sites: np.ndarray  # all simulated sites (observation window + buffer)
    obs_lo: int
    obs_hi: int
    times: List[float]  # micro times of the snapshots
    etas: List[np.ndarray]
    currents: List[np.ndarray]  # cumulative J_i at each snapshot
    z0: np.ndarray  # initial heights, anchored at site 0

    def index_of_time(self, t_micro: float) -> int:
        for k, t in enumerate(self.times):
            if abs(t - t_micro) <= 1e-9 * max(1.0, abs(t_micro)):
                return k
        raise ValueError(f"no snapshot at micro time {t_micro}")

    def eta_at(self, t_micro: float) -> np.ndarray:
        return self.etas[self.index_of_time(t_micro)]

    def current_at(self, t_micro: float) -> np.ndarray:
        return self.currents[self.index_of_time(t_micro)]

    def heights_at(self, t_micro: float) -> np.ndarray:
        return self.z0 - self.current_at(t_micro)

    def to_csv(self, path, t_micro: float) -> None:
        k = self.index_of_time(t_micro)
        z = self.z0 - self.currents[k]
        rows = ["t,i,eta,z,J"]
        for idx, i in enumerate(self.sites):
            rows.append(f"{self.times[k]},{i},{int(self.etas[k][idx])},{int(z[idx])},{int(self.currents[k][idx])}")
        from pathlib import Path

        Path(path).write_text("\n".join(rows) + "\n")


def simulate(
    c: SpeedFunction,
    n: int,
    initial,
    horizon: float,
    window: Tuple[float, float],
    rng: RngSpec,
    snapshot_times: Sequence[float] = (),
    buffer_sites: Optional[int] = None,
) -> TasepTrajectory:
    """Exact TASEP run to macroscopic time ``horizon``.

    ``window`` is the macroscopic observation interval (a, b); the simulated
    lattice extends past it by a light-cone buffer.  ``initial`` is "step",
    a constant density, or a macroscopic profile rho0(x).  Snapshots are
    recorded at the given macroscopic times and at the horizon.
    """
    t_end = horizon * n
    a, b = window
    if not a < b:
        raise ValueError("window must satisfy a < b")
    need = required_buffer(c.max_rate, t_end)
    buf = need if buffer_sites is None else buffer_sites
    if buf < need:
        raise WindowOverflowError(
            f"buffer of {buf} sites cannot contain the light cone; need >= {need}"
        )
    lo = math.floor(n * a) - buf
    hi = math.ceil(n * b) + buf
    sites = np.arange(lo, hi + 1)
    rates = speed_at(c, sites / n)
    gen = rng.generator()
    eta0 = _initial_occupancy(initial, sites, n, gen)
    z0 = _heights_from_eta(eta0, sites)

    marks = sorted(set(float(t) * n for t in snapshot_times) | {0.0, t_end})
    if any(t < 0 or t > t_end + 1e-9 for t in marks):
        raise ValueError("snapshot times must lie in [0, horizon]")

    occ = eta0.astype(np.int64).tolist()
    jumps = [0] * len(sites)
    n_sites = len(sites)
    total_rate = float(rates.sum())
    slab = max(2_000_000 / max(total_rate, 1e-12), 1e-9)

    traj = TasepTrajectory(
        n=n, sites=sites, obs_lo=math.floor(n * a), obs_hi=math.ceil(n * b),
        times=[], etas=[], currents=[], z0=z0,
    )
    t0 = 0.0
    pending = list(marks)
    if pending and pending[0] == 0.0:
        traj.times.append(0.0)
        traj.etas.append(np.array(occ, dtype=np.uint8))
        traj.currents.append(np.zeros(n_sites, dtype=np.int64))
        pending.pop(0)

    events_done = 0
    while t0 < t_end - 1e-12:
        t1 = min(t0 + slab, t_end)
        if pending and pending[0] < t1 - 1e-12:
            t1 = pending[0]
        dt = t1 - t0
        counts = gen.poisson(rates * dt)
        total = int(counts.sum())
        events_done += total
        if events_done > _EVENT_CAP:
            raise WindowOverflowError("event cap exceeded; shrink the window or horizon")
        if total:
            ev_sites = np.repeat(np.arange(n_sites), counts)
            ev_times = t0 + dt * gen.random(total)
            order = np.argsort(ev_times, kind="stable")
            for s in ev_sites[order].tolist():
                if s + 1 < n_sites and occ[s] and not occ[s + 1]:
                    occ[s] = 0
                    occ[s + 1] = 1
                    jumps[s] += 1
        t0 = t1
        if pending and abs(t0 - pending[0]) <= 1e-12:
            traj.times.append(pending.pop(0))
            traj.etas.append(np.array(occ, dtype=np.uint8))
            traj.currents.append(np.array(jumps, dtype=np.int64))
    if not traj.times or abs(traj.times[-1] - t_end) > 1e-9:
        traj.times.append(t_end)
        traj.etas.append(np.array(occ, dtype=np.uint8))
        traj.currents.append(np.array(jumps, dtype=np.int64))
    return traj


def occupation_measure(traj: TasepTrajectory, a: float, b: float, t: float, n: int) -> float:
    """n^{-1} * number of particles in (na, nb] at micro time nt."""
    i_lo = math.floor(n * a) + 1
    i_hi = math.floor(n * b)
    if i_lo < traj.sites[0] or i_hi > traj.sites[-1]:
        raise ValueError("requested interval leaves the simulated window")
    eta = traj.eta_at(t * n)
    base = traj.sites[0]
    return float(np.sum(eta[i_lo - base : i_hi - base + 1])) / n


# ---------------------------------------------------------------------------
# Coupled, clock-stream-driven engine
# ---------------------------------------------------------------------------


@dataclass
class ClockStream:
    """Per-site Poisson clocks with counter-based, replayable event times.

    Gap k of site i is Exp(rate(i)) computed from (seed, i, k) alone, so any
    process holding the same stream sees bit-identical rings.
    """

    seed: int
    rate_of_site: Callable[[int], float]
    _state: Dict[int, Tuple[int, float]] = field(default_factory=dict)

    @classmethod
    def for_speed(cls, seed: int, c: SpeedFunction, n: int, shift: int = 0) -> "ClockStream":
        return cls(seed, lambda i: speed_at(c, (i + shift) / n))

    def gap(self, site: int, k: int) -> float:
        return float(exp_site_value(self.seed, self.rate_of_site(site), site, k))

    def first_time(self, site: int) -> float:
        t = self.gap(site, 0)
        self._state[site] = (1, t)
        return t

    def advance(self, site: int) -> float:
        k, t = self._state[site]
        t_next = t + self.gap(site, k)
        self._state[site] = (k + 1, t_next)
        return t_next

    def fresh(self) -> "ClockStream":
        return ClockStream(self.seed, self.rate_of_site)


class _ZConsumer:
    """Height process: ring at site i lowers z_i when eta_i = 1, eta_{i+1} = 0."""

    def __init__(self, sites: np.ndarray, z0: np.ndarray):
        self.sites = sites
        self.base = int(sites[0])
        self.z = z0.astype(np.int64).copy()
        self.z0 = z0.astype(np.int64).copy()
        self.boundary_blocked = False

    def ring(self, site: int, t: float) -> None:
        idx = site - self.base
        if idx < 0 or idx >= len(self.z):
            return
        left = self.z[idx - 1] if idx - 1 >= 0 else None
        right = self.z[idx + 1] if idx + 1 < len(self.z) else None
        if left is None or right is None:
            # An edge ring whose legality depends on a neighbor we do not
            # track; with a proper margin it never matters for the interior.
            self.boundary_blocked = True
            return
        if self.z[idx] - left == 1 and right == self.z[idx]:
            self.z[idx] -= 1


class _XiConsumer:
    """Wedge process xi^k; ring at clock site s drives xi at i = s - k."""

    def __init__(self, k: int, sites: np.ndarray):
        self.k = int(k)
        self.sites = sites
        self.base = int(sites[0])
        self.xi = np.maximum(0, -sites).astype(np.int64)
        self.jump_times: Dict[Tuple[int, int], float] = {}
        self.boundary_blocked = False

    def _neighbor(self, idx: int, off: int):
        j = idx + off
        if 0 <= j < len(self.xi):
            return int(self.xi[j])
        return None

    def ring(self, site: int, t: float) -> None:
        idx = (site - self.k) - self.base
        if idx < 0 or idx >= len(self.xi):
            return
        left = self._neighbor(idx, -1)
        right = self._neighbor(idx, +1)
        if left is None or right is None:
            self.boundary_blocked = True
            # Frozen wedge boundary: treat the missing neighbor by its
            # (never-jumping) initial value; conservative for the interior.
            i_here = self.sites[idx]
            left = left if left is not None else max(0, -(i_here - 1))
            right = right if right is not None else max(0, -(i_here + 1))
        if self.xi[idx] < left and self.xi[idx] <= right:
            self.xi[idx] += 1
            self.jump_times[(int(self.sites[idx]), int(self.xi[idx]))] = t


def _run_coupled(clocks: ClockStream, clock_sites: Sequence[int], consumers, horizon: float,
                 sample_times: Sequence[float], stop: Optional[Callable[[], bool]] = None):
    """Drive all consumers from one set of clock streams; snapshot everyone."""
    heap = [(clocks.first_time(s), s) for s in clock_sites]
    heapq.heapify(heap)
    samples = sorted(set(sample_times))
    snapshots = {id(c): [] for c in consumers}
    times_done = []

    def record(t):
        times_done.append(t)
        for c in consumers:
            arr = c.z if isinstance(c, _ZConsumer) else c.xi
            snapshots[id(c)].append(arr.copy())

    si = 0
    while heap:
        t, s = heapq.heappop(heap)
        if t > horizon or (stop is not None and stop()):
            break
        while si < len(samples) and samples[si] < t:
            record(samples[si])
            si += 1
        for c in consumers:
            c.ring(s, t)
        heapq.heappush(heap, (clocks.advance(s), s))
    while si < len(samples):
        record(samples[si])
        si += 1
    return times_done, snapshots


@dataclass
class XiTrajectory:
    k: int
    sites: np.ndarray
    times: List[float]
    snapshots: List[np.ndarray]
    passage_times: Dict[Tuple[int, int], float]  # L(i, j): first t with xi_i >= j

    def value_at(self, i: int, t: float) -> int:
        base = int(self.sites[0])
        for idx in range(len(self.times) - 1, -1, -1):
            if self.times[idx] <= t + 1e-12:
                return int(self.snapshots[idx][i - base])
        raise ValueError("no snapshot at or before the requested time")


def simulate_xi(
    k: int,
    c: SpeedFunction,
    n: int,
    horizon: float,
    window: Tuple[int, int],
    clocks: ClockStream,
    sample_times: Sequence[float] = (),
    until_level: Optional[Tuple[int, int]] = None,
) -> XiTrajectory:
    """Exact evolution of one wedge process xi^{n,k} on shared clocks.

    ``window`` bounds the xi site index i; the driving clocks live at i + k.
    The horizon is microscopic (clock time).  With ``until_level`` = (i, j)
    the run stops as soon as xi_i reaches level j (passage-time queries).
    """
    sites = np.arange(window[0], window[1] + 1)
    consumer = _XiConsumer(k, sites)
    clock_sites = [int(i) + k for i in sites]
    stop = None
    if until_level is not None:
        i_t, j_t = until_level
        stop = lambda: consumer.xi[i_t - int(sites[0])] >= j_t
    times, snaps = _run_coupled(clocks, clock_sites, [consumer], horizon,
                                sorted(set(sample_times) | {horizon}), stop=stop)
    return XiTrajectory(k=k, sites=sites, times=times, snapshots=snaps[id(consumer)],
                        passage_times=consumer.jump_times)


@dataclass
class EnvelopeReport:
    ok: bool
    n_sites: int
    n_times: int
    violations: list
    argmax_touched_boundary: bool

    def summary(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        return (f"exact equality: {status} ({self.n_sites} sites x {self.n_times} times, "
                f"{len(self.violations)} violations)")


def envelope_check(
    z_times: Sequence[float],
    z_snapshots: Sequence[np.ndarray],
    z_sites: np.ndarray,
    z0: np.ndarray,
    xi_by_k: Dict[int, Sequence[np.ndarray]],
    check_sites: Sequence[int],
) -> EnvelopeReport:
    """Verify z_i(t) = sup_k { z_k(0) - xi^k_{i-k}(t) } at every sampled time.

    ``xi_by_k[k]`` holds snapshots of xi^k on the same time grid, with xi^k
    covering site offsets i - k for all checked i.  Exact integer equality is
    required; any discrepancy is reported with its context.
    """
    base = int(z_sites[0])
    ks = sorted(xi_by_k)
    violations = []
    touched = False
    for ti, t in enumerate(z_times):
        for i in check_sites:
            best = None
            maximizers = []
            for k in ks:
                # xi^k is simulated on offsets (z_sites - k), so xi^k_{i-k}
                # sits at position i - base of its snapshot.
                val = int(z0[k - base] - xi_by_k[k][ti][i - base])
                if best is None or val > best:
                    best, maximizers = val, [k]
                elif val == best:
                    maximizers.append(k)
            if all(k in (ks[0], ks[-1]) for k in maximizers):
                touched = True
            z_val = int(z_snapshots[ti][i - base])
            if z_val != best:
                violations.append((t, i, z_val, best, maximizers[0]))
    return EnvelopeReport(
        ok=not violations,
        n_sites=len(check_sites),
        n_times=len(z_times),
        violations=violations[:32],
        argmax_touched_boundary=touched,
    )


def run_envelope_experiment(
    c: SpeedFunction,
    n: int,
    n_window: int,
    horizon: float,
    seed: int,
    initial="step",
    n_sample_times: int = 100,
    mismatch_clocks: bool = False,
) -> EnvelopeReport:
    """Couple z with the whole xi^k family on shared clocks and check the envelope.

    The observation window [0, n_window) is padded by a light-cone margin on
    both sides; every k in the padded range contributes to the supremum.  With
    ``mismatch_clocks`` the xi processes deliberately use different clocks
    (negative control: the identity must then fail).
    """
    margin = int(math.ceil(4 * c.max_rate * horizon)) + 16
    lo, hi = -margin, n_window - 1 + margin
    sites = np.arange(lo, hi + 1)
    gen = RngSpec(seed, 900).generator()
    eta0 = _initial_occupancy(initial, sites, n, gen)
    z0 = _heights_from_eta(eta0, sites)

    clocks = ClockStream.for_speed(seed, c, n)
    z_proc = _ZConsumer(sites, z0)
    xi_seed = seed + 1 if mismatch_clocks else seed
    xi_clocks = ClockStream.for_speed(xi_seed, c, n)
    xi_procs = {}
    for k in sites:
        # xi^k lives on offsets i - k; shifting the z-range by -k makes its
        # driving clock sites coincide with the z clock sites.
        xi_procs[int(k)] = _XiConsumer(int(k), sites - int(k))

    sample_times = list(np.linspace(0.0, horizon, n_sample_times))
    consumers = [z_proc] + list(xi_procs.values())
    if not mismatch_clocks:
        times, snaps = _run_coupled(clocks, [int(s) for s in sites], consumers, horizon, sample_times)
        z_snaps = snaps[id(z_proc)]
        xi_by_k = {k: snaps[id(p)] for k, p in xi_procs.items()}
    else:
        times, snaps_z = _run_coupled(clocks, [int(s) for s in sites], [z_proc], horizon, sample_times)
        _, snaps_xi = _run_coupled(xi_clocks, [int(s) for s in sites], list(xi_procs.values()),
                                   horizon, sample_times)
        z_snaps = snaps_z[id(z_proc)]
        xi_by_k = {k: snaps_xi[id(p)] for k, p in xi_procs.items()}

    # The valid comparison range: i - k must stay inside the common span for
    # every contributing k near i; checking the unpadded window is safe since
    # far-away k are dominated under the wedge initial condition.
    check = [i for i in range(0, n_window)]
    return envelope_check(times, z_snaps, sites, z0, xi_by_k, check)


# ---------------------------------------------------------------------------
# TASEP <-> last-passage coupling
# ---------------------------------------------------------------------------


@dataclass
class CouplingReport:
    m: int
    n_particles: int
    replicas: int
    ks_statistic: float
    p_value: float
    mean_dp: float
    mean_sim: float
    mean_diff: float
    pooled_stderr: float

    @property
    def means_compatible(self) -> bool:
        return abs(self.mean_diff) <= 3.0 * self.pooled_stderr

    def summary(self) -> str:
        return (f"T({self.m},{self.n_particles}): KS p = {self.p_value:.4f}, "
                f"mean diff = {self.mean_diff:.4f} +- {self.pooled_stderr:.4f}")


def _passage_time_step_ic(m: int, n_particles: int, clocks: ClockStream) -> float:
    """Time for particle ``n_particles`` (starting at -n_particles) to reach
    site m - n_particles under step initial data, by direct simulation."""
    lo, hi = -n_particles, m + 2
    sites = list(range(lo, hi + 1))
    occ = {i: (i < 0 and i >= -n_particles) for i in sites}
    label = {-j: j for j in range(1, n_particles + 1)}
    target_site = m - n_particles
    heap = [(clocks.first_time(s), s) for s in sites]
    heapq.heapify(heap)
    events = 0
    while heap:
        t, s = heapq.heappop(heap)
        events += 1
        if events > 10_000_000:
            raise RuntimeError("coupling run did not terminate")
        if occ.get(s, False) and not occ.get(s + 1, s + 1 > hi):
            occ[s] = False
            occ[s + 1] = True
            p = label.pop(s)
            label[s + 1] = p
            if p == n_particles and s + 1 == target_site:
                return t
        heapq.heappush(heap, (clocks.advance(s), s))
    raise RuntimeError("ran out of events before the hitting time")


def lpp_coupling_check(m: int, n_particles: int, replicas: int, base_seed: int) -> CouplingReport:
    """Distributional identity: G(m, n) vs the particle hitting time.

    Two independent samples of the same law - the corner-growth last-passage
    time G(m, n) with i.i.d. Exp(1) weights (origin weight included), and the
    simulated time for particle n to reach site m - n from step initial
    data - compared by a two-sample KS test and a mean difference.
    """
    from .lattice import last_passage_terminal

    gen = RngSpec(base_seed, 1).generator()
    w = gen.exponential(size=(replicas, m, n_particles))
    dp_samples = last_passage_terminal(w, include_origin=True)

    sim_samples = np.empty(replicas)
    for r in range(replicas):
        clocks = ClockStream(seed=(base_seed << 20) + 7 * r + 13, rate_of_site=lambda i: 1.0)
        sim_samples[r] = _passage_time_step_ic(m, n_particles, clocks)

    ks = ks_test_two_sample(dp_samples, sim_samples)
    pooled = math.sqrt(dp_samples.var(ddof=1) / replicas + sim_samples.var(ddof=1) / replicas)
    return CouplingReport(
        m=m, n_particles=n_particles, replicas=replicas,
        ks_statistic=ks.statistic, p_value=ks.p_value,
        mean_dp=float(dp_samples.mean()), mean_sim=float(sim_samples.mean()),
        mean_diff=float(dp_samples.mean() - sim_samples.mean()), pooled_stderr=float(pooled),
    )
