"""Lattices, conductance laws and random environments.

Sites of a box with sides ``(L_1, ..., L_d)`` are numbered in row-major
order (last axis fastest).  Edges are numbered lexicographically by
``(site, axis)`` where the edge ``(x, k)`` joins ``x`` and ``x + e_k``; on a
free box the edges leaving the box are skipped.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from . import rng
from .errors import ParameterError, UnsupportedOperationError

FORMAT_VERSION = 1
BOUNDARIES = ("torus", "free")


@dataclass(frozen=True)
class LatticeSpec:
    dim: int
    sides: tuple
    boundary: str = "torus"

    def __post_init__(self):
        sides = tuple(int(s) for s in self.sides)
        object.__setattr__(self, "sides", sides)
        if self.dim < 1:
            raise ParameterError(f"dim must be >= 1, got {self.dim}")
        if len(sides) != self.dim:
            raise ParameterError(f"expected {self.dim} sides, got {len(sides)}")
        if any(s < 2 for s in sides):
            raise ParameterError(f"every side must be >= 2, got {sides}")
        if self.boundary not in BOUNDARIES:
            raise ParameterError(f"boundary must be one of {BOUNDARIES}")
        if self.n_sites >= 2**62:
            raise ParameterError("lattice too large for int64 indexing")

    @classmethod
    def cube(cls, dim: int, side: int, boundary: str = "torus") -> "LatticeSpec":
        return cls(dim, (side,) * dim, boundary)

    @property
    def n_sites(self) -> int:
        return math.prod(self.sides)

    @property
    def n_edges(self) -> int:
        if self.boundary == "torus":
            return self.dim * self.n_sites
        return sum(
            (self.sides[k] - 1) * math.prod(s for j, s in enumerate(self.sides) if j != k)
            for k in range(self.dim)
        )

    @property
    def degree(self) -> int:
        return 2 * self.dim

    def index(self, x: Sequence[int]) -> int:
        x = tuple(int(c) for c in x)
        if len(x) != self.dim or any(c < 0 or c >= s for c, s in zip(x, self.sides)):
            raise IndexError(f"site {x} outside box {self.sides}")
        return int(np.ravel_multi_index(x, self.sides))

    def coords(self, i) -> np.ndarray:
        """Coordinates of site index(es) ``i`` (shape ``(..., dim)``)."""
        return np.stack(np.unravel_index(np.asarray(i), self.sides), axis=-1)

    def all_coords(self) -> np.ndarray:
        return self.coords(np.arange(self.n_sites))

    def center(self) -> tuple:
        return tuple(s // 2 for s in self.sides)

    def wrap(self, x: Sequence[int]) -> tuple:
        if self.boundary != "torus":
            raise UnsupportedOperationError("wrap is only defined on a torus")
        return tuple(int(c) % s for c, s in zip(x, self.sides))

    def displacement(self, x0, y):
        """Coordinate differences ``y - x0`` (minimal image on a torus)."""
        diff = np.asarray(y) - np.asarray(x0)
        if self.boundary == "torus":
            sides = np.asarray(self.sides)
            diff = (diff + sides // 2) % sides - sides // 2
        return diff

    def to_dict(self) -> dict:
        return {"dim": self.dim, "sides": list(self.sides), "boundary": self.boundary}

    @cached_property
    def _tables(self):
        return _build_tables(self)

    @property
    def edge_grid(self) -> np.ndarray:
        """``(n_sites, dim)`` edge index of ``(x, x + e_k)``, or -1 if absent."""
        return self._tables[0]

    @property
    def edge_ends(self) -> np.ndarray:
        """``(n_edges, 2)`` site indices of the two endpoints of each edge."""
        return self._tables[1]

    @property
    def edge_axis(self) -> np.ndarray:
        return self._tables[2]

    @property
    def nbr(self) -> np.ndarray:
        """``(n_sites, 2*dim)`` neighbour table, order axis-major, - then +; -1 if absent."""
        return self._tables[3]

    @property
    def nbr_edge(self) -> np.ndarray:
        return self._tables[4]


def _build_tables(lat: LatticeSpec):
    d, n = lat.dim, lat.n_sites
    coords = lat.all_coords()
    sides = np.asarray(lat.sides)
    grid_idx = np.arange(n).reshape(lat.sides)
    edge_exists = np.ones((n, d), dtype=bool)
    plus = np.empty((n, d), dtype=np.int64)
    minus = np.empty((n, d), dtype=np.int64)
    for k in range(d):
        plus[:, k] = np.roll(grid_idx, -1, axis=k).ravel()
        minus[:, k] = np.roll(grid_idx, 1, axis=k).ravel()
        if lat.boundary == "free":
            edge_exists[:, k] = coords[:, k] < sides[k] - 1
    edge_grid = np.full((n, d), -1, dtype=np.int64)
    edge_grid[edge_exists] = np.arange(int(edge_exists.sum()))
    src, ax = np.nonzero(edge_exists)
    edge_ends = np.stack([src, plus[src, ax]], axis=1)
    nbr = np.full((n, 2 * d), -1, dtype=np.int64)
    nbr_edge = np.full((n, 2 * d), -1, dtype=np.int64)
    for k in range(d):
        nbr[:, 2 * k + 1] = np.where(edge_exists[:, k], plus[:, k], -1)
        nbr_edge[:, 2 * k + 1] = edge_grid[:, k]
        back = minus[:, k]
        back_edge = edge_grid[back, k]
        nbr[:, 2 * k] = np.where(back_edge >= 0, back, -1)
        nbr_edge[:, 2 * k] = back_edge
    for arr in (edge_grid, edge_ends, nbr, nbr_edge):
        arr.setflags(write=False)
    return edge_grid, edge_ends, ax.astype(np.int64), nbr, nbr_edge


@dataclass(frozen=True)
class ConductanceLaw:
    """Law of a single conductance, always supported on ``[1, inf)``.

    ``kind`` is one of ``constant``, ``uniform``, ``pareto``, ``two_point``
    or ``explicit``; ``params`` holds the law parameters in the order of
    the string form, e.g. ``pareto:2`` or ``two_point:100,0.1``.
    """

    kind: str
    params: tuple = ()
    values: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        k, p = self.kind, self.params
        nparams = {"constant": 1, "uniform": 2, "pareto": 1, "two_point": 2, "explicit": 0}
        if k not in nparams:
            raise ParameterError(f"unknown conductance law {k!r}")
        if len(p) != nparams[k]:
            raise ParameterError(f"law {k} takes {nparams[k]} parameter(s), got {len(p)}")
        if k == "constant" and p[0] < 1:
            raise ParameterError("constant conductance must be >= 1")
        if k == "uniform" and (p[0] < 1 or p[1] < p[0]):
            raise ParameterError("uniform(a, b) needs 1 <= a <= b")
        if k == "pareto" and not p[0] > 0:
            raise ParameterError("pareto needs alpha > 0")
        if k == "two_point" and (p[0] < 1 or not 0 <= p[1] <= 1):
            raise ParameterError("two_point(K, p) needs K >= 1 and p in [0, 1]")
        if k == "explicit":
            if self.values is None:
                raise ParameterError("explicit law needs values")
            vals = np.asarray(self.values, dtype=np.float64)
            if np.any(~(vals >= 1)):
                raise ParameterError("explicit conductances must all be >= 1")
            object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, c: float = 1.0):
        return cls("constant", (c,))

    @classmethod
    def uniform(cls, a: float, b: float):
        return cls("uniform", (a, b))

    @classmethod
    def pareto(cls, alpha: float):
        return cls("pareto", (alpha,))

    @classmethod
    def two_point(cls, K: float, p: float):
        return cls("two_point", (K, p))

    @classmethod
    def explicit(cls, values):
        return cls("explicit", (), np.asarray(values, dtype=np.float64))

    @classmethod
    def parse(cls, text: str) -> "ConductanceLaw":
        """Parse ``kind[:p1[,p2]]``, e.g. ``pareto:0.5``."""
        kind, _, rest = text.strip().partition(":")
        params = tuple(float(v) for v in rest.split(",") if v.strip()) if rest else ()
        if kind == "constant" and not params:
            params = (1.0,)
        return cls(kind, params)

    def __str__(self):
        if not self.params:
            return self.kind
        return f"{self.kind}:" + ",".join(f"{p:g}" for p in self.params)

    @property
    def mean(self) -> float:
        k, p = self.kind, self.params
        if k == "constant":
            return p[0]
        if k == "uniform":
            return 0.5 * (p[0] + p[1])
        if k == "pareto":
            return p[0] / (p[0] - 1) if p[0] > 1 else math.inf
        if k == "two_point":
            return 1 + (p[0] - 1) * p[1]
        return float(np.mean(self.values))

    @property
    def variance(self) -> float:
        k, p = self.kind, self.params
        if k == "constant":
            return 0.0
        if k == "uniform":
            return (p[1] - p[0]) ** 2 / 12
        if k == "pareto":
            a = p[0]
            return a / ((a - 1) ** 2 * (a - 2)) if a > 2 else math.inf
        if k == "two_point":
            return (p[0] - 1) ** 2 * p[1] * (1 - p[1])
        return float(np.var(self.values))

    def sample(self, gen: np.random.Generator, n: int) -> np.ndarray:
        k, p = self.kind, self.params
        if k == "constant":
            return np.full(n, p[0])
        if k == "uniform":
            return gen.uniform(p[0], p[1], size=n) if p[1] > p[0] else np.full(n, p[0])
        if k == "pareto":
            # inverse CDF of P(mu > t) = t^-alpha on (0, 1]
            u = 1.0 - gen.random(n)
            return u ** (-1.0 / p[0])
        if k == "two_point":
            return np.where(gen.random(n) < p[1], p[0], 1.0)
        if len(self.values) != n:
            raise ParameterError(f"explicit law has {len(self.values)} values, lattice needs {n}")
        return self.values.copy()


@dataclass(frozen=True, eq=False)
class ConductanceField:
    """An environment: one conductance per undirected edge of a lattice."""

    lattice: LatticeSpec
    mu: np.ndarray
    law: ConductanceLaw
    seed: int = 0

    def __post_init__(self):
        mu = np.ascontiguousarray(self.mu, dtype=np.float64)
        if mu.shape != (self.lattice.n_edges,):
            raise ParameterError(f"expected {self.lattice.n_edges} conductances, got {mu.shape}")
        if np.any(~(mu >= 1)):
            raise ParameterError("conductances must be >= 1")
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)

    @property
    def dim(self) -> int:
        return self.lattice.dim

    @property
    def n_sites(self) -> int:
        return self.lattice.n_sites

    @cached_property
    def nbr_mu(self) -> np.ndarray:
        """``(n_sites, 2*dim)`` conductance of each neighbour slot, 0 if absent."""
        ne = self.lattice.nbr_edge
        out = np.where(ne >= 0, self.mu[np.maximum(ne, 0)], 0.0)
        out.setflags(write=False)
        return out

    @cached_property
    def mu_x(self) -> np.ndarray:
        """Vertex weights ``mu_x = sum_y mu_xy``."""
        out = self.nbr_mu.sum(axis=1)
        out.setflags(write=False)
        return out

    def jump_probs(self, x) -> np.ndarray:
        """``P(x, .)`` over the neighbour slots of site ``x``."""
        i = self._site(x)
        return self.nbr_mu[i] / self.mu_x[i]

    def conductance(self, x, y) -> float:
        """``mu_xy`` (0 if not adjacent; parallel edges on side-2 tori are summed)."""
        i, j = self._site(x), self._site(y)
        row = self.lattice.nbr[i]
        return float(self.nbr_mu[i][row == j].sum())

    def _site(self, x) -> int:
        if isinstance(x, (int, np.integer)):
            if not 0 <= x < self.n_sites:
                raise IndexError(f"site index {x} out of range")
            return int(x)
        return self.lattice.index(x)

    def with_mu(self, mu, law: ConductanceLaw | None = None) -> "ConductanceField":
        mu = np.asarray(mu, dtype=np.float64)
        return ConductanceField(self.lattice, mu, law or ConductanceLaw.explicit(mu), self.seed)

    def planted(self, edges: dict) -> "ConductanceField":
        """Copy with the given ``{edge_index: value}`` overrides."""
        mu = self.mu.copy()
        for e, v in edges.items():
            mu[e] = v
        return self.with_mu(mu)

    def edge_between(self, x, y) -> int:
        i, j = self._site(x), self._site(y)
        slots = np.nonzero(self.lattice.nbr[i] == j)[0]
        if len(slots) == 0:
            raise ParameterError(f"sites {x} and {y} are not adjacent")
        return int(self.lattice.nbr_edge[i, slots[0]])

    def __eq__(self, other):
        if not isinstance(other, ConductanceField):
            return NotImplemented
        return self.lattice == other.lattice and np.array_equal(self.mu, other.mu)

    __hash__ = None


def generate(lattice: LatticeSpec, law: ConductanceLaw, seed: int) -> ConductanceField:
    """Sample i.i.d. conductances from ``law`` on every edge of ``lattice``."""
    gen = rng.generator(seed, 0xE27)
    mu = law.sample(gen, lattice.n_edges)
    return ConductanceField(lattice, mu, law, int(seed))


def neighbors(field: ConductanceField, x) -> list:
    """``[(site, edge_index, mu), ...]`` in slot order (axis-major, - then +)."""
    i = field._site(x)
    lat = field.lattice
    out = []
    for slot in range(lat.degree):
        y = lat.nbr[i, slot]
        if y >= 0:
            e = int(lat.nbr_edge[i, slot])
            out.append((tuple(int(c) for c in lat.coords(y)), e, float(field.mu[e])))
    return out


def shift(field: ConductanceField, x: Sequence[int]) -> ConductanceField:
    """The translated environment ``T_x omega`` (torus only)."""
    lat = field.lattice
    if lat.boundary != "torus":
        raise UnsupportedOperationError("shift is only exact on a torus")
    if len(x) != lat.dim:
        raise ParameterError(f"shift vector needs {lat.dim} components")
    grid = field.mu.reshape(*lat.sides, lat.dim)
    out = np.roll(grid, [-int(c) for c in x], axis=tuple(range(lat.dim)))
    return ConductanceField(lat, out.reshape(-1), field.law, field.seed)


def empirical_mean_mu(field: ConductanceField) -> float:
    return float(np.mean(field.mu))


def save(field: ConductanceField, path) -> None:
    """Write the ``.rcmenv`` format: JSON header line, then little-endian float64 data."""
    header = {
        "format_version": FORMAT_VERSION,
        **field.lattice.to_dict(),
        "law": str(field.law),
        "seed": int(field.seed),
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(field.mu.astype("<f8").tobytes())


def load(path) -> ConductanceField:
    raw = Path(path).read_bytes()
    head, sep, body = raw.partition(b"\n")
    if not sep:
        raise ParameterError(f"{path}: missing header terminator")
    header = json.loads(head.decode("utf-8"))
    if header.get("format_version") != FORMAT_VERSION:
        raise ParameterError(f"{path}: unsupported format_version {header.get('format_version')}")
    lattice = LatticeSpec(header["dim"], tuple(header["sides"]), header["boundary"])
    mu = np.frombuffer(body, dtype="<f8").astype(np.float64)
    law_text = header["law"]
    law = ConductanceLaw.explicit(mu) if law_text == "explicit" else ConductanceLaw.parse(law_text)
    return ConductanceField(lattice, mu, law, header["seed"])
