"""Stochastic cellular automata on brickwork and cubic lattices.

The update rule is a conditional probability table: each new site value is
drawn as ``Bernoulli(P(1 | parent values))``.  On the brickwork lattice a
site has two parents in the previous row, with the pair shifting by the
row parity; on the cubic lattice a site has three parents along the three
negative lattice directions, with the body diagonal playing the role of
time.

Conventions used throughout the package:

* rows of a trajectory are indexed so that row ``k`` of the stored array
  is the state after ``k`` steps (row 0 is the initial condition),
* step ``s`` (producing array row ``s + 1``) reads parents at offsets
  ``{x, x+1}`` when ``s`` is even and ``{x-1, x}`` when ``s`` is odd,
  matching the vertex rows of :class:`LatticeSpec`,
* every Bernoulli draw is keyed by ``(seed, sample, step, site)`` through
  :mod:`dpq._mix`, so results do not depend on chunking or thread count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from . import _mix
from .errors import (
    OutOfRangeError,
    ShapeMismatchError,
    TooLargeError,
    UnsupportedParametersError,
)

__all__ = [
    "UpdateRule",
    "LatticeSpec",
    "TrajectoryEnsemble",
    "dk_rule",
    "dk_bond_line",
    "bond_dp_rule_2d",
    "step",
    "sample_trajectories",
    "enumerate_histories",
    "MAX_ENUM_HISTORIES",
    "SPECIAL_COMPACT_POINT",
]

MAX_ENUM_HISTORIES = 2**24
MAX_ENSEMBLE_BYTES = 2**31

# (p2, p3) point with compact clusters and a qualitatively different state
# structure; kept out of the sampled parameter range on purpose.
SPECIAL_COMPACT_POINT = (0.5, 1.0)


# ---------------------------------------------------------------------------
# rules


@dataclass(frozen=True)
class UpdateRule:
    """Conditional probability table P(child = 1 | parent bits).

    ``table[c]`` is indexed by the parent configuration read as a binary
    number, first parent in the most significant bit.  ``arity`` is 2 on
    the brickwork lattice and 3 on the cubic one.
    """

    table: tuple[float, ...]
    arity: int

    def __post_init__(self):
        if self.arity not in (2, 3):
            raise UnsupportedParametersError(f"arity must be 2 or 3, got {self.arity}")
        if len(self.table) != 1 << self.arity:
            raise ShapeMismatchError(
                f"table needs {1 << self.arity} entries for arity {self.arity}"
            )
        for idx, p in enumerate(self.table):
            if not (0.0 <= p <= 1.0):
                raise OutOfRangeError(f"table[{idx}] = {p!r} is not a probability")
        if self.arity == 2 and self.table[1] != self.table[2]:
            raise UnsupportedParametersError(
                "brickwork rules must satisfy P(1|01) == P(1|10)"
            )

    def as_array(self) -> np.ndarray:
        return np.asarray(self.table, dtype=np.float64)


def dk_rule(p1: float, p2: float, p3: float) -> UpdateRule:
    """Two-parent rule with P(1|00)=p1, P(1|01)=P(1|10)=p2, P(1|11)=p3.

    With p1 = 0 the all-empty row is absorbing.  The line p2 = p3 = p is
    the site flavor of directed percolation (critical near p = 0.7055).
    """
    return UpdateRule(table=(float(p1), float(p2), float(p2), float(p3)), arity=2)


def dk_bond_line(p2: float) -> UpdateRule:
    """Bond flavor of the two-parent rule: p1 = 0, p3 = p2 (2 - p2)."""
    if not (0.0 <= p2 <= 1.0):
        raise OutOfRangeError(f"p2 = {p2!r} is not a probability")
    return dk_rule(0.0, p2, p2 * (2.0 - p2))


def bond_dp_rule_2d(p: float) -> UpdateRule:
    """Three-parent bond rule: P(1 | k active parents) = 1 - (1 - p)**k."""
    if not (0.0 <= p <= 1.0):
        raise OutOfRangeError(f"p = {p!r} is not a probability")
    table = tuple(1.0 - (1.0 - p) ** bin(c).count("1") for c in range(8))
    return UpdateRule(table=table, arity=3)


# ---------------------------------------------------------------------------
# lattice geometry


@dataclass(frozen=True)
class LatticeSpec:
    """Lattice sizes, boundary conditions and derived edge indexing.

    ``brickwork2d`` lattices have ``Lx * Ly`` vertices; vertex ``(x, y)``
    in an even row feeds children ``(x, y+1)`` and ``(x+1, y+1)``, in an
    odd row ``(x-1, y+1)`` and ``(x, y+1)`` (x taken mod Lx when the x
    boundary is periodic).  Every vertex owns two outgoing edges, one per
    child slot, so a doubly periodic lattice carries ``2 * Lx * Ly`` edge
    qubits.  ``cubic3d`` lattices are used by the sampling scans only.
    """

    Lx: int
    Ly: int
    geometry: str = "brickwork2d"
    boundary_x: str = "periodic"
    boundary_y: str = "open"
    Lz: int = 0

    def __post_init__(self):
        if self.geometry not in ("brickwork2d", "cubic3d"):
            raise UnsupportedParametersError(f"unknown geometry {self.geometry!r}")
        if self.boundary_x not in ("periodic", "open"):
            raise UnsupportedParametersError(f"bad boundary_x {self.boundary_x!r}")
        if self.boundary_y not in ("periodic", "open"):
            raise UnsupportedParametersError(f"bad boundary_y {self.boundary_y!r}")
        if self.Lx < 1 or self.Ly < 1:
            raise OutOfRangeError("Lx and Ly must be positive")
        if self.geometry == "cubic3d" and self.Lz < 1:
            raise OutOfRangeError("cubic3d lattices need Lz >= 1")

    # -- vertex adjacency (brickwork) ------------------------------------

    def _wrap_x(self, x: int) -> int | None:
        if 0 <= x < self.Lx:
            return x
        if self.boundary_x == "periodic":
            return x % self.Lx
        return None

    def _wrap_y(self, y: int) -> int | None:
        if 0 <= y < self.Ly:
            return y
        if self.boundary_y == "periodic":
            return y % self.Ly
        return None

    def child(self, x: int, y: int, slot: int) -> tuple[int, int] | None:
        """Vertex fed by edge ``slot`` of vertex (x, y), or None off-lattice."""
        if slot not in (0, 1):
            raise OutOfRangeError("slot must be 0 or 1")
        dx = (0, 1)[slot] if y % 2 == 0 else (-1, 0)[slot]
        cx = self._wrap_x(x + dx)
        cy = self._wrap_y(y + 1)
        if cx is None or cy is None:
            return None
        return (cx, cy)

    def parents(self, x: int, y: int) -> list[tuple[int, int] | None]:
        """The two parent vertices of (x, y), west one first.

        Offsets follow the parity of the wrapped parent row, not of ``y``
        itself: the two agree everywhere except across the periodic seam
        of an odd-``Ly`` lattice, where consecutive rows share parity.
        """
        py = self._wrap_y(y - 1)
        if py is None:
            return [None, None]
        dxs = (0, 1) if py % 2 == 1 else (-1, 0)
        out: list[tuple[int, int] | None] = []
        for dx in dxs:
            px = self._wrap_x(x + dx)
            out.append(None if px is None else (px, py))
        return out

    def in_edge(self, x: int, y: int, which: int) -> int | None:
        """Edge index delivering parent ``which`` to vertex (x, y)."""
        parent = self.parents(x, y)[which]
        if parent is None:
            return None
        px, py = parent
        for slot in (0, 1):
            if self.child(px, py, slot) == (x, y):
                return self.edge_index(px, py, slot)
        raise RuntimeError("inconsistent adjacency")  # pragma: no cover

    # -- edge indexing ----------------------------------------------------

    @property
    def n_vertices(self) -> int:
        if self.geometry == "cubic3d":
            return self.Lx * self.Ly * self.Lz
        return self.Lx * self.Ly

    @property
    def n_edges(self) -> int:
        if self.geometry == "cubic3d":
            return 3 * self.n_vertices
        return 2 * self.n_vertices

    def edge_index(self, x: int, y: int, slot: int) -> int:
        """Stable bijective index of outgoing edge ``slot`` of vertex (x, y)."""
        if not (0 <= x < self.Lx and 0 <= y < self.Ly and slot in (0, 1)):
            raise OutOfRangeError(f"no edge ({x}, {y}, {slot}) on this lattice")
        return slot + 2 * (x + self.Lx * y)

    def vertex_of_edge(self, index: int) -> tuple[int, int, int]:
        """Inverse of :meth:`edge_index`: returns (x, y, slot)."""
        if not (0 <= index < self.n_edges):
            raise OutOfRangeError(f"edge index {index} out of range")
        slot = index % 2
        v = index // 2
        return (v % self.Lx, v // self.Lx, slot)

    def row_shape(self) -> tuple[int, ...]:
        if self.geometry == "cubic3d":
            return (self.Lx, self.Lz)
        return (self.Lx,)


def row_all_active(lattice: LatticeSpec) -> np.ndarray:
    return np.ones(lattice.row_shape(), dtype=np.uint8)


def row_all_empty(lattice: LatticeSpec) -> np.ndarray:
    return np.zeros(lattice.row_shape(), dtype=np.uint8)


def _check_row(row: np.ndarray, lattice: LatticeSpec) -> np.ndarray:
    row = np.asarray(row, dtype=np.uint8)
    if row.shape != lattice.row_shape():
        raise ShapeMismatchError(
            f"row shape {row.shape} does not match lattice {lattice.row_shape()}"
        )
    if np.any(row > 1):
        raise OutOfRangeError("row states must be 0/1 valued")
    return row


def _check_rule(rule: UpdateRule, lattice: LatticeSpec) -> None:
    need = 3 if lattice.geometry == "cubic3d" else 2
    if rule.arity != need:
        raise ShapeMismatchError(
            f"rule arity {rule.arity} does not match geometry {lattice.geometry!r}"
        )


# ---------------------------------------------------------------------------
# stochastic evolution


def _parent_codes_2d(row: np.ndarray, s: int, lattice: LatticeSpec) -> np.ndarray:
    """Parent pair of each site for step ``s``, encoded as 2*first + second."""
    if s % 2 == 0:
        first = row
        second = np.roll(row, -1)
        if lattice.boundary_x == "open":
            second = second.copy()
            second[-1] = 0
    else:
        first = np.roll(row, 1)
        second = row
        if lattice.boundary_x == "open":
            first = first.copy()
            first[0] = 0
    return (first.astype(np.int64) << 1) | second


def _parent_codes_3d(plane: np.ndarray, lattice: LatticeSpec) -> np.ndarray:
    """Parent triple codes on the cubic lattice, 4*a + 2*b + c.

    In plane coordinates the three negative lattice directions sit at
    (x-1, z), (x, z-1) and (x+1, z+1) of the previous plane.
    """
    a = np.roll(plane, 1, axis=0)
    b = np.roll(plane, 1, axis=1)
    c = np.roll(np.roll(plane, -1, axis=0), -1, axis=1)
    if lattice.boundary_x == "open":
        a = a.copy()
        a[0, :] = 0
        b = b.copy()
        b[:, 0] = 0
        c = c.copy()
        c[-1, :] = 0
        c[:, -1] = 0
    return (a.astype(np.int64) << 2) | (b.astype(np.int64) << 1) | c


def step(
    row: np.ndarray,
    rule: UpdateRule,
    lattice: LatticeSpec,
    rng_key: tuple[int, int, int],
) -> np.ndarray:
    """One stochastic update of a full row (or plane).

    ``rng_key`` is ``(seed, sample, step_index)``; the step index fixes
    both the brickwork parity and the RNG counters, so replaying a key
    reproduces the row bit for bit.
    """
    row = _check_row(row, lattice)
    _check_rule(rule, lattice)
    seed, sample, s = rng_key
    table = rule.as_array()
    key = _mix.stream_key(seed, sample)
    if lattice.geometry == "cubic3d":
        codes = _parent_codes_3d(row, lattice)
        xs, zs = np.meshgrid(
            np.arange(lattice.Lx), np.arange(lattice.Lz), indexing="ij"
        )
        u = _mix.uniform(key, _mix.plane_counter(s, xs, zs))
    else:
        codes = _parent_codes_2d(row, s, lattice)
        u = _mix.uniform(key, _mix.row_counter(s, np.arange(lattice.Lx)))
    return (u < table[codes]).astype(np.uint8)


@dataclass
class TrajectoryEnsemble:
    """Materialized batch of trajectories plus the metadata that made it."""

    lattice: LatticeSpec
    rule: UpdateRule
    seed: int
    trajectories: np.ndarray  # (n_samples, T+1, *row_shape), uint8
    weights: np.ndarray | None = None  # exact probabilities when enumerated

    @property
    def n_samples(self) -> int:
        return self.trajectories.shape[0]

    @property
    def n_steps(self) -> int:
        return self.trajectories.shape[1] - 1


def sample_trajectories(
    initial: np.ndarray,
    rule: UpdateRule,
    lattice: LatticeSpec,
    n_steps: int,
    n_samples: int,
    seed: int,
) -> TrajectoryEnsemble:
    """Monte Carlo batch of ``n_samples`` trajectories of ``n_steps`` steps.

    Sample ``i`` is a pure function of ``(seed, i)``: slicing the batch or
    re-running with a larger ``n_samples`` leaves earlier samples intact.
    """
    initial = _check_row(initial, lattice)
    _check_rule(rule, lattice)
    if n_steps < 0 or n_samples < 1:
        raise OutOfRangeError("need n_steps >= 0 and n_samples >= 1")
    shape = (n_samples, n_steps + 1) + lattice.row_shape()
    if np.prod(shape) > MAX_ENSEMBLE_BYTES:
        raise TooLargeError(
            f"ensemble of shape {shape} exceeds {MAX_ENSEMBLE_BYTES} bytes"
        )
    out = np.empty(shape, dtype=np.uint8)
    out[:, 0] = initial
    keys = _mix.stream_key(seed, np.arange(n_samples))
    table = rule.as_array()
    if lattice.geometry == "cubic3d":
        xs, zs = np.meshgrid(
            np.arange(lattice.Lx), np.arange(lattice.Lz), indexing="ij"
        )
        for s in range(n_steps):
            codes = np.stack(
                [_parent_codes_3d(out[i, s], lattice) for i in range(n_samples)]
            )
            u = _mix.uniform(
                keys[:, None, None], _mix.plane_counter(s, xs, zs)[None, :, :]
            )
            out[:, s + 1] = u < table[codes]
    else:
        counter_x = np.arange(lattice.Lx)
        for s in range(n_steps):
            prev = out[:, s]
            if s % 2 == 0:
                first = prev
                second = np.roll(prev, -1, axis=1)
                if lattice.boundary_x == "open":
                    second[:, -1] = 0
            else:
                first = np.roll(prev, 1, axis=1)
                second = prev
                if lattice.boundary_x == "open":
                    first[:, 0] = 0
            codes = (first.astype(np.int64) << 1) | second
            u = _mix.uniform(keys[:, None], _mix.row_counter(s, counter_x)[None, :])
            out[:, s + 1] = u < table[codes]
    return TrajectoryEnsemble(lattice=lattice, rule=rule, seed=seed, trajectories=out)


# ---------------------------------------------------------------------------
# exact enumeration (the oracle for everything stochastic)


def _next_rows(
    row: np.ndarray, s: int, rule: UpdateRule, lattice: LatticeSpec
) -> Iterator[tuple[np.ndarray, float]]:
    """All successor rows of ``row`` at step ``s`` with their probabilities."""
    table = rule.as_array()
    if lattice.geometry == "cubic3d":
        codes = _parent_codes_3d(row, lattice).ravel()
    else:
        codes = _parent_codes_2d(row, s, lattice)
    probs = table[codes]
    free = [i for i, p in enumerate(probs) if 0.0 < p < 1.0]
    base = (probs >= 1.0).astype(np.uint8)
    for nbits in range(1 << len(free)):
        child = base.copy()
        prob = 1.0
        for k, i in enumerate(free):
            if (nbits >> k) & 1:
                child[i] = 1
                prob *= probs[i]
            else:
                prob *= 1.0 - probs[i]
        yield child.reshape(lattice.row_shape()), prob


def enumerate_histories(
    initial: np.ndarray,
    rule: UpdateRule,
    lattice: LatticeSpec,
    n_steps: int,
    max_histories: int = MAX_ENUM_HISTORIES,
) -> tuple[np.ndarray, np.ndarray]:
    """Every trajectory of positive probability, with exact weights.

    Returns ``(histories, probabilities)`` where ``histories`` has shape
    ``(n_histories, n_steps + 1, *row_shape)``.  Probabilities of all
    histories from a fixed initial row sum to one.  Raises
    :class:`TooLargeError` instead of truncating when the count would
    exceed ``max_histories``.
    """
    initial = _check_row(initial, lattice)
    _check_rule(rule, lattice)
    if n_steps < 0:
        raise OutOfRangeError("n_steps must be >= 0")
    frontier: list[tuple[list[np.ndarray], float]] = [([initial], 1.0)]
    for s in range(n_steps):
        grown: list[tuple[list[np.ndarray], float]] = []
        for rows, prob in frontier:
            for child, p in _next_rows(rows[-1], s, rule, lattice):
                if p * prob > 0.0:
                    grown.append((rows + [child], prob * p))
            if len(grown) > max_histories:
                raise TooLargeError(
                    f"more than {max_histories} histories at step {s}"
                )
        frontier = grown
    histories = np.stack([np.stack(rows) for rows, _ in frontier])
    probs = np.array([p for _, p in frontier], dtype=np.float64)
    return histories, probs
