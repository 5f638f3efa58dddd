"""Compiled hot loops for walk simulation.

Every path draws from its own SplitMix64 stream (see :mod:`rcmlab.rng`).
Within a plain event the first uniform sets the holding time by inverse
CDF and the second picks the jump, so the VSRW and the CSRW driven by the
same stream share their jump chain exactly.
"""
import numpy as np
from numba import njit

from .rng import next_gamma, next_uniform, path_state


@njit(cache=True)
def choose_slot(row_mu, total, u, skip):
    """Slot picked with probability proportional to ``row_mu`` (slot ``skip`` excluded)."""
    target = u * total
    acc = 0.0
    last = -1
    for s in range(row_mu.shape[0]):
        if s == skip or row_mu[s] <= 0.0:
            continue
        acc += row_mu[s]
        last = s
        if acc >= target:
            return s
    return last


@njit(cache=True)
def simulate_path(nbr, nbr_mu, mu_x, rate, x0, t_max, master, index, max_events):
    """Exact path up to ``t_max``; the final hold is kept untruncated.

    Returns ``(sites, holds, status)`` with ``status`` 0 on success and 1 if
    ``max_events`` was reached.
    """
    state = np.empty(1, dtype=np.uint64)
    state[0] = path_state(master, index)
    cap = 1024
    sites = np.empty(cap, dtype=np.int64)
    holds = np.empty(cap, dtype=np.float64)
    x = x0
    t = 0.0
    n = 0
    while True:
        if n == cap:
            cap *= 2
            s2 = np.empty(cap, dtype=np.int64)
            h2 = np.empty(cap, dtype=np.float64)
            s2[:n] = sites[:n]
            h2[:n] = holds[:n]
            sites, holds = s2, h2
        h = -np.log(next_uniform(state)) / rate[x]
        sites[n] = x
        holds[n] = h
        n += 1
        t += h
        if t >= t_max:
            return sites[:n], holds[:n], 0
        if n >= max_events:
            return sites[:n], holds[:n], 1
        s = choose_slot(nbr_mu[x], mu_x[x], next_uniform(state), -1)
        x = nbr[x, s]


@njit(cache=True)
def _pair_row_expm(tau, a, b, c, d):
    """Row 0 of exp(tau*[[a,b],[c,d]]) up to a common positive factor."""
    m = 0.5 * (a + d)
    h = 0.5 * (a - d)
    delta = np.sqrt(h * h + b * c)
    if delta * tau < 1e-12:
        g = 2.0 * tau
        e = 1.0
    else:
        g = -np.expm1(-2.0 * tau * delta) / delta
        e = np.exp(-2.0 * tau * delta)
    wx = (1.0 + e) + g * (a - m)
    wy = g * b
    return max(wx, 0.0), max(wy, 0.0)


@njit(cache=True, nogil=True)
def observe_batch(nbr, nbr_mu, mu_x, rate, partner, step_axis, step_sign,
                  starts, times, master, offset, max_events):
    """Positions of each path at the sorted observation ``times``.

    ``partner[x]`` is a neighbour slot whose edge dominates the site, or -1.
    When the walk sits at such a site the whole sojourn in the pair of
    endpoints is sampled at once: the number of internal back-and-forth
    jumps is geometric and the time spent is a sum of two gamma variables.
    If an observation time falls inside the sojourn, the state at that time
    is drawn from the pair's sub-generator conditioned on survival and the
    walk restarts there, which keeps the path law exact.

    Returns ``(sites, disp, events, status)``; ``disp`` is the unwrapped
    displacement from the start.
    """
    n_paths = starts.shape[0]
    n_obs = times.shape[0]
    dim = step_axis.max() + 1
    out_sites = np.empty((n_paths, n_obs), dtype=np.int64)
    out_disp = np.zeros((n_paths, n_obs, dim), dtype=np.int64)
    events = np.zeros(n_paths, dtype=np.int64)
    state = np.empty(1, dtype=np.uint64)
    disp = np.zeros(dim, dtype=np.int64)
    status = 0
    for p in range(n_paths):
        state[0] = path_state(master, offset + p)
        x = starts[p]
        t = 0.0
        disp[:] = 0
        k = 0
        while k < n_obs and times[k] <= 0.0:
            out_sites[p, k] = x
            k += 1
        nev = 0
        while k < n_obs:
            nev += 1
            if nev > max_events:
                status = 1
                break
            ps = partner[x]
            if ps >= 0:
                y = nbr[x, ps]
                K = nbr_mu[x, ps]
                back = ps ^ 1
                ax = mu_x[x] - K
                ay = mu_x[y] - K
                if ax < 0.0:
                    ax = 0.0
                if ay < 0.0:
                    ay = 0.0
                px = ax / mu_x[x]
                py = ay / mu_x[y]
                qx = K / mu_x[x]
                qy = K / mu_x[y]
                leave = px + py - px * py
                if leave > 0.0:
                    u = next_uniform(state)
                    cycles = 0.0
                    if leave < 1.0:
                        cycles = np.floor(np.log(u) / np.log1p(-leave))
                    exit_at_x = next_uniform(state) * leave <= px
                    nx = cycles + 1.0
                    ny = cycles if exit_at_x else cycles + 1.0
                    T = next_gamma(state, nx) / rate[x]
                    if ny > 0.0:
                        T += next_gamma(state, ny) / rate[y]
                    if t + T < times[k]:
                        t += T
                        if exit_at_x:
                            e = x
                            skip = ps
                        else:
                            e = y
                            skip = back
                            disp[step_axis[ps]] += step_sign[ps]
                        s = choose_slot(nbr_mu[e], mu_x[e] - K, next_uniform(state), skip)
                        disp[step_axis[s]] += step_sign[s]
                        x = nbr[e, s]
                        continue
                    # the sojourn covers the next observation time
                    wx, wy = _pair_row_expm(times[k] - t, -rate[x], rate[x] * qx, rate[y] * qy, -rate[y])
                    t = times[k]
                    if next_uniform(state) * (wx + wy) > wx:
                        disp[step_axis[ps]] += step_sign[ps]
                        x = y
                    while k < n_obs and times[k] <= t:
                        out_sites[p, k] = x
                        out_disp[p, k, :] = disp
                        k += 1
                    continue
            h = -np.log(next_uniform(state)) / rate[x]
            while k < n_obs and times[k] < t + h:
                out_sites[p, k] = x
                out_disp[p, k, :] = disp
                k += 1
            t += h
            if k >= n_obs:
                break
            s = choose_slot(nbr_mu[x], mu_x[x], next_uniform(state), -1)
            disp[step_axis[s]] += step_sign[s]
            x = nbr[x, s]
        events[p] = nev
        if status:
            break
    return out_sites, out_disp, events, status


@njit(cache=True, nogil=True)
def first_passage_batch(nbr, nbr_mu, mu_x, rate, step_axis, step_sign,
                        starts, t_max, r_max, master, offset, max_events):
    """First time the l1 displacement reaches each level 1..r_max (inf if not by t_max)."""
    n_paths = starts.shape[0]
    dim = step_axis.max() + 1
    out = np.full((n_paths, r_max + 1), np.inf)
    state = np.empty(1, dtype=np.uint64)
    disp = np.zeros(dim, dtype=np.int64)
    status = 0
    for p in range(n_paths):
        state[0] = path_state(master, offset + p)
        out[p, 0] = 0.0
        x = starts[p]
        t = 0.0
        disp[:] = 0
        level = 0
        nev = 0
        while True:
            nev += 1
            if nev > max_events:
                status = 1
                break
            t += -np.log(next_uniform(state)) / rate[x]
            if t >= t_max:
                break
            s = choose_slot(nbr_mu[x], mu_x[x], next_uniform(state), -1)
            disp[step_axis[s]] += step_sign[s]
            x = nbr[x, s]
            l1 = 0
            for j in range(dim):
                l1 += abs(disp[j])
            while level < l1 and level < r_max:
                level += 1
                out[p, level] = t
            if level >= r_max:
                break
        if status:
            break
    return out, status


@njit(cache=True, nogil=True)
def occupation_batch(nbr, nbr_mu, mu_x, rate, region, marked, starts, t_max,
                     master, offset, max_events):
    """Time spent on ``marked`` sites before leaving ``region`` (or ``t_max``).

    Returns ``(occupation, exit_time, status)``; ``exit_time`` is inf when
    the walk is still inside at ``t_max``.
    """
    n_paths = starts.shape[0]
    occ = np.zeros(n_paths)
    exit_t = np.full(n_paths, np.inf)
    state = np.empty(1, dtype=np.uint64)
    status = 0
    for p in range(n_paths):
        state[0] = path_state(master, offset + p)
        x = starts[p]
        t = 0.0
        nev = 0
        while True:
            nev += 1
            if nev > max_events:
                status = 1
                break
            h = -np.log(next_uniform(state)) / rate[x]
            if t + h >= t_max:
                if marked[x]:
                    occ[p] += t_max - t
                break
            t += h
            if marked[x]:
                occ[p] += h
            s = choose_slot(nbr_mu[x], mu_x[x], next_uniform(state), -1)
            x = nbr[x, s]
            if not region[x]:
                exit_t[p] = t
                break
        if status:
            break
    return occ, exit_t, status
