"""Variable-speed (VSRW) and constant-speed (CSRW) random walks.

Both walks jump from ``x`` to ``y`` with probability ``mu_xy / mu_x``.  The
VSRW holds at ``x`` for an exponential time of rate ``mu_x``, the CSRW for
an exponential time of rate 1.  On a free box the jump law is renormalised
over in-box neighbours (reflection).
"""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels, rng
from .environment import ConductanceField
from .errors import ContractError, ParameterError, ResourceError

VSRW = "VSRW"
CSRW = "CSRW"
KINDS = (VSRW, CSRW)

DEFAULT_MAX_EVENTS = 10**9

_threads = os.cpu_count() or 1


def set_threads(n: int | None) -> int:
    """Thread budget for batch simulation; None restores the available parallelism.

    Paths are split into contiguous chunks and each path keeps its own
    stream, so results do not depend on the budget.
    """
    global _threads
    if n is not None and n < 1:
        raise ParameterError("threads must be >= 1")
    _threads = n or (os.cpu_count() or 1)
    return _threads


def _chunked(call, n: int):
    """Run ``call(lo, hi)`` over path chunks and stitch the outputs; the last output is a status flag."""
    k = min(_threads, max(1, n // 256))
    if k <= 1:
        return call(0, n)
    bounds = np.linspace(0, n, k + 1).astype(np.int64)
    with ThreadPoolExecutor(k) as ex:
        parts = list(ex.map(lambda ab: call(int(ab[0]), int(ab[1])), zip(bounds[:-1], bounds[1:])))
    cols = list(zip(*parts))
    return (*(np.concatenate(c) for c in cols[:-1]), max(cols[-1]))


def _check_kind(kind: str) -> str:
    kind = kind.upper()
    if kind not in KINDS:
        raise ParameterError(f"kind must be one of {KINDS}, got {kind!r}")
    return kind


def hold_rates(field: ConductanceField, kind: str) -> np.ndarray:
    return np.asarray(field.mu_x) if _check_kind(kind) == VSRW else np.ones(field.n_sites)


@dataclass(frozen=True, eq=False)
class WalkPath:
    """An exact trajectory: visited sites with their holding times.

    The last hold is stored untruncated, so ``holds.sum() >= t_end``.
    """

    kind: str
    start: int
    sites: np.ndarray
    holds: np.ndarray
    t_end: float
    boundary: str = "torus"

    @property
    def enter_times(self) -> np.ndarray:
        out = np.empty(len(self.holds))
        out[0] = 0.0
        np.cumsum(self.holds[:-1], out=out[1:])
        return out

    @property
    def n_jumps(self) -> int:
        return len(self.sites) - 1


def simulate(field: ConductanceField, kind: str, x0, t_max: float, seed: int,
             max_events: int = DEFAULT_MAX_EVENTS) -> WalkPath:
    """Simulate one path of the VSRW or CSRW started at ``x0`` up to ``t_max``."""
    kind = _check_kind(kind)
    if not t_max > 0:
        raise ParameterError("t_max must be positive")
    x = field._site(x0)
    sites, holds, status = _kernels.simulate_path(
        field.lattice.nbr, field.nbr_mu, field.mu_x, hold_rates(field, kind),
        x, float(t_max), rng.master_u64(seed), 0, max_events,
    )
    if status:
        raise ResourceError(f"path exceeded max_events={max_events}", required=max_events)
    return WalkPath(kind, x, sites, holds, float(t_max), field.lattice.boundary)


def time_change(path: WalkPath, field: ConductanceField) -> WalkPath:
    """Map a VSRW path to the CSRW path with the same jump chain.

    The clock ``A_t = int_0^t mu_{X_s} ds`` turns a hold ``h`` at ``x`` into
    ``mu_x * h``; the new horizon is ``A_{t_end}``.
    """
    if path.kind != VSRW:
        raise ContractError(f"time_change needs a VSRW path, got {path.kind}")
    weights = field.mu_x[path.sites]
    holds = path.holds * weights
    enter = path.enter_times
    t_end = float(np.sum(holds[:-1]) + weights[-1] * (path.t_end - enter[-1]))
    return WalkPath(CSRW, path.start, path.sites.copy(), holds, t_end, path.boundary)


def clock(path: WalkPath, field: ConductanceField, t: float) -> float:
    """The additive functional ``A_t`` along a VSRW path."""
    enter = path.enter_times
    i = _index_at(path, t)
    w = field.mu_x[path.sites]
    return float(np.dot(w[:i], path.holds[:i]) + w[i] * (t - enter[i]))


def _index_at(path: WalkPath, t: float) -> int:
    if not 0 <= t <= path.t_end:
        raise ParameterError(f"t={t} outside [0, {path.t_end}]")
    return int(np.searchsorted(path.enter_times, t, side="right") - 1)


def position_at(path: WalkPath, t: float) -> int:
    """Site occupied at time ``t`` (right-continuous)."""
    return int(path.sites[_index_at(path, t)])


def exit_time(path: WalkPath, field: ConductanceField, center, R: int) -> float | None:
    """First time the graph distance from ``center`` reaches ``R``; None if never by ``t_end``."""
    if R < 1:
        raise ParameterError("R must be >= 1")
    lat = field.lattice
    c = np.asarray(lat.coords(field._site(center)))
    diff = np.abs(lat.displacement(c, lat.coords(path.sites))).sum(axis=1)
    hit = np.nonzero(diff >= R)[0]
    if len(hit) == 0:
        return None
    t = float(path.enter_times[hit[0]])
    return t if t <= path.t_end else None


def snapshot(path: WalkPath, step: float = 1.0) -> np.ndarray:
    """Positions at times 0, step, 2*step, ... up to ``t_end``."""
    if not step > 0:
        raise ParameterError("step must be positive")
    n = int(math.floor(path.t_end / step * (1 + 1e-12))) + 1
    grid = np.minimum(np.arange(n) * step, path.t_end)
    idx = np.searchsorted(path.enter_times, grid, side="right") - 1
    return path.sites[idx]


def write_path_csv(path_obj: WalkPath, field: ConductanceField, fh) -> None:
    w = csv.writer(fh)
    dim = field.dim
    w.writerow(["event_index", "t_enter"] + [f"x{k + 1}" for k in range(dim)])
    coords = field.lattice.coords(path_obj.sites)
    for i, (t, c) in enumerate(zip(path_obj.enter_times, coords)):
        w.writerow([i, repr(float(t)), *c.tolist()])


# -- batches ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Batch:
    """Positions of many independent paths on a common time grid."""

    kind: str
    starts: np.ndarray
    times: np.ndarray
    sites: np.ndarray  # (paths, times)
    disp: np.ndarray  # (paths, times, dim), unwrapped
    events: np.ndarray


def _steps(dim: int):
    slots = np.arange(2 * dim)
    return (slots // 2).astype(np.int64), np.where(slots % 2 == 1, 1, -1).astype(np.int64)


def heavy_partners(field: ConductanceField, ratio: float = 4.0, min_mu: float = 16.0) -> np.ndarray:
    """Slot of a dominating incident edge per site, or -1.

    A site gets a partner when its largest conductance is at least
    ``min_mu`` and at least ``ratio`` times the sum of the others.
    """
    out = np.full(field.n_sites, -1, dtype=np.int64)
    if any(s <= 2 for s in field.lattice.sides):
        return out
    nm = np.asarray(field.nbr_mu)
    best = np.argmax(nm, axis=1)
    top = nm[np.arange(field.n_sites), best]
    rest = field.mu_x - top
    sel = (top >= min_mu) & (top >= ratio * rest)
    out[sel] = best[sel]
    return out


def _starts(field: ConductanceField, starts, n_paths: int | None) -> np.ndarray:
    if isinstance(starts, (int, np.integer)) or (isinstance(starts, tuple) and n_paths is not None):
        x = field._site(starts)
        return np.full(n_paths, x, dtype=np.int64)
    arr = np.asarray(starts, dtype=np.int64)
    if arr.ndim != 1:
        raise ParameterError("starts must be a site, or a 1-d array of site indices")
    return arr


def observe(field: ConductanceField, kind: str, starts, times, seed: int, n_paths: int | None = None,
            collapse: bool = True, max_events: int = DEFAULT_MAX_EVENTS, offset: int = 0) -> Batch:
    """Run a batch of paths and record positions at ``times``.

    ``starts`` is either one site (with ``n_paths``) or an array of site
    indices.  Path ``i`` uses the stream ``(seed, offset + i)``.
    """
    kind = _check_kind(kind)
    st = _starts(field, starts, n_paths)
    times = np.asarray(times, dtype=np.float64)
    if np.any(np.diff(times) < 0) or np.any(times < 0):
        raise ParameterError("times must be non-negative and sorted")
    partner = heavy_partners(field) if collapse else np.full(field.n_sites, -1, dtype=np.int64)
    ax, sg = _steps(field.dim)
    rates, master = hold_rates(field, kind), rng.master_u64(seed)
    sites, disp, events, status = _chunked(lambda lo, hi: _kernels.observe_batch(
        field.lattice.nbr, field.nbr_mu, field.mu_x, rates, partner, ax, sg,
        st[lo:hi], times, master, offset + lo, max_events,
    ), len(st))
    if status:
        raise ResourceError(f"a path exceeded max_events={max_events}", required=max_events)
    return Batch(kind, st, times, sites, disp, events)


def first_passage(field: ConductanceField, kind: str, starts, t_max: float, r_max: int, seed: int,
                  n_paths: int | None = None, max_events: int = DEFAULT_MAX_EVENTS) -> np.ndarray:
    """``(paths, r_max + 1)`` first times the l1 displacement reaches each level."""
    kind = _check_kind(kind)
    st = _starts(field, starts, n_paths)
    ax, sg = _steps(field.dim)
    rates, master = hold_rates(field, kind), rng.master_u64(seed)
    out, status = _chunked(lambda lo, hi: _kernels.first_passage_batch(
        field.lattice.nbr, field.nbr_mu, field.mu_x, rates, ax, sg,
        st[lo:hi], float(t_max), int(r_max), master, lo, max_events,
    ), len(st))
    if status:
        raise ResourceError(f"a path exceeded max_events={max_events}", required=max_events)
    return out


def occupation_before_exit(field: ConductanceField, kind: str, starts, region, marked, t_max: float,
                           seed: int, n_paths: int | None = None,
                           max_events: int = DEFAULT_MAX_EVENTS):
    """Occupation time of ``marked`` sites before leaving ``region``; also the exit times."""
    kind = _check_kind(kind)
    st = _starts(field, starts, n_paths)
    rates, master = hold_rates(field, kind), rng.master_u64(seed)
    region = np.asarray(region, dtype=np.bool_)
    marked = np.asarray(marked, dtype=np.bool_)
    occ, ext, status = _chunked(lambda lo, hi: _kernels.occupation_batch(
        field.lattice.nbr, field.nbr_mu, field.mu_x, rates, region, marked,
        st[lo:hi], float(t_max), master, lo, max_events,
    ), len(st))
    if status:
        raise ResourceError(f"a path exceeded max_events={max_events}", required=max_events)
    return occ, ext
