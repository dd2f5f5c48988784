"""Dimer-string quantum states on the doubly periodic brickwork lattice.

Configurations are sets of vertex-disjoint strands that advance one row
per step and close around the periodic y direction.  Every vertex has
either no active edges or exactly one active in-edge and one active
out-edge; the number of active qubits per y layer is the same in every
layer and counts the strands.  The state weighs a configuration by
``g`` per active edge, i.e. by the square root of its Boltzmann factor
in the underlying dimer model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .automata import LatticeSpec
from .errors import InvalidConfigError, OutOfRangeError, TooLargeError
from .observables import EstimatorSeries
from .qstate import Wavefunction

__all__ = [
    "WMatrix",
    "kasteleyn_w",
    "SIX_VERTEX",
    "StringConfig",
    "enumerate_string_configs",
    "string_number",
    "kasteleyn_state",
    "vac_overlap_curve",
    "MAX_ENUM_CONFIGS",
]

MAX_ENUM_CONFIGS = 1 << 24


@dataclass(frozen=True)
class WMatrix:
    """4x4 vertex weight over (incoming pair, outgoing pair).

    Pairs are coded 2*first + second, i.e. rows/columns run over
    00, 01, 10, 11.  Only the corner and middle-block entries may be
    nonzero: anything else would create string ends or branchings.
    """

    entries: tuple[tuple[float, float, float, float], ...]

    def __post_init__(self):
        if len(self.entries) != 4 or any(len(r) != 4 for r in self.entries):
            raise OutOfRangeError("vertex weights form a 4 x 4 matrix")
        for i in range(4):
            for j in range(4):
                allowed = (i == j == 0) or (i in (1, 2) and j in (1, 2)) \
                    or (i == j == 3)
                if not allowed and self.entries[i][j] != 0.0:
                    raise InvalidConfigError(
                        f"entry ({i}, {j}) breaks string continuity"
                    )

    def as_array(self) -> np.ndarray:
        return np.array(self.entries)


def kasteleyn_w(g: float) -> WMatrix:
    """Vertex weight of the dimer model: empty 1, pass-through g."""
    if not (0.0 <= g <= 1.0):
        raise OutOfRangeError(f"g = {g} must lie in [0, 1]")
    return WMatrix((
        (1.0, 0.0, 0.0, 0.0),
        (0.0, g, g, 0.0),
        (0.0, g, g, 0.0),
        (0.0, 0.0, 0.0, 0.0),
    ))


# critical point between the two toric-code phases; kept for reference
SIX_VERTEX = WMatrix((
    (1.0, 0.0, 0.0, 0.0),
    (0.0, 0.5 ** 0.5, 0.5 ** 0.5, 0.0),
    (0.0, 0.5 ** 0.5, 0.5 ** 0.5, 0.0),
    (0.0, 0.0, 0.0, 1.0),
))


@dataclass
class StringConfig:
    """Edge-qubit configuration of closed strands, with a count cache."""

    mask: int
    Lx: int
    Ly: int
    strings: int | None = None


def _lattice(Lx: int, Ly: int) -> LatticeSpec:
    return LatticeSpec(Lx=Lx, Ly=Ly, boundary_x="periodic", boundary_y="periodic")


def string_number(config: StringConfig) -> int:
    """Strands per y layer; validates closure along the way.

    Every vertex must have equal in- and out-degree, at most one each:
    a surplus out-edge is a branching, a surplus in-edge a merging, and
    a mismatch an open string end.
    """
    lattice = _lattice(config.Lx, config.Ly)
    if config.mask < 0 or config.mask >> lattice.n_edges:
        raise InvalidConfigError("configuration has bits outside the lattice")
    out_deg = {}
    in_deg = {}
    for y in range(config.Ly):
        for x in range(config.Lx):
            bits = [(config.mask >> lattice.edge_index(x, y, s)) & 1 for s in (0, 1)]
            if sum(bits) > 1:
                raise InvalidConfigError(f"string branches at vertex ({x}, {y})")
            out_deg[(x, y)] = sum(bits)
            for s in (0, 1):
                if bits[s]:
                    child = lattice.child(x, y, s)
                    in_deg[child] = in_deg.get(child, 0) + 1
    counts = []
    for y in range(config.Ly):
        row = 0
        for x in range(config.Lx):
            i = in_deg.get((x, y), 0)
            o = out_deg[(x, y)]
            if i > 1:
                raise InvalidConfigError(f"strings merge at vertex ({x}, {y})")
            if i != o:
                raise InvalidConfigError(f"open string end at vertex ({x}, {y})")
            row += o
        counts.append(row)
    if len(set(counts)) > 1:  # pragma: no cover - implied by the flow check
        raise InvalidConfigError("strand count differs between layers")
    config.strings = counts[0]
    return counts[0]


def _matchings(lattice: LatticeSpec, y: int, occupied: tuple[int, ...]):
    """All vertex-disjoint step assignments for the strands of row ``y``.

    Yields (next occupied columns, edge bits) pairs; steps follow the
    two outgoing slots of each vertex, targets must stay distinct.
    """
    results: list[tuple[tuple[int, ...], int]] = []

    def assign(k: int, used: set[int], bits: int):
        if k == len(occupied):
            results.append((tuple(sorted(used)), bits))
            return
        x = occupied[k]
        for slot in (0, 1):
            cx, _ = lattice.child(x, y, slot)
            if cx in used:
                continue
            used.add(cx)
            assign(k + 1, used, bits | (1 << lattice.edge_index(x, y, slot)))
            used.remove(cx)

    assign(0, set(), 0)
    return results


def enumerate_string_configs(Lx: int, Ly: int) -> list[StringConfig]:
    """Every closed non-touching strand configuration, vacuum included."""
    if Lx < 2 or Ly < 2:
        raise OutOfRangeError("enumeration needs Lx >= 2 and Ly >= 2")
    lattice = _lattice(Lx, Ly)
    configs: list[StringConfig] = []
    visited = 0
    for m in range(Lx + 1):
        for start in _column_subsets(Lx, m):
            stack = [(0, start, 0)]
            while stack:
                y, occ, mask = stack.pop()
                visited += 1
                if visited > MAX_ENUM_CONFIGS:
                    raise TooLargeError("string enumeration exceeds the cap")
                if y == Ly:
                    if occ == start:
                        configs.append(StringConfig(mask, Lx, Ly, strings=m))
                    continue
                for nxt, bits in _matchings(lattice, y, occ):
                    stack.append((y + 1, nxt, mask | bits))
    configs.sort(key=lambda c: c.mask)
    return configs


def _column_subsets(Lx: int, m: int):
    if m == 0:
        yield ()
        return
    from itertools import combinations

    yield from combinations(range(Lx), m)


def kasteleyn_state(g: float, Lx: int, Ly: int) -> Wavefunction:
    """Normalized superposition of strand configurations, weight g^edges."""
    if not (0.0 <= g <= 1.0):
        raise OutOfRangeError(f"g = {g} must lie in [0, 1]")
    configs = enumerate_string_configs(Lx, Ly)
    amps: dict[int, float] = {}
    for c in configs:
        n_edges = bin(c.mask).count("1")
        amps[c.mask] = g ** n_edges if n_edges else 1.0
    z = sum(a * a for a in amps.values())
    scale = 1.0 / math.sqrt(z)
    return Wavefunction(
        {mask: a * scale for mask, a in amps.items()}, lattice=_lattice(Lx, Ly)
    )


def vac_overlap_curve(
    g_list, sizes: list[tuple[int, int]]
) -> list[EstimatorSeries]:
    """Exact |<vac|psi(g)>|^2 = 1/Z over a g grid, one series per size."""
    gs = [float(g) for g in g_list]
    if any(not (0.0 <= g <= 1.0) for g in gs):
        raise OutOfRangeError("all g values must lie in [0, 1]")
    series = []
    for Lx, Ly in sizes:
        configs = enumerate_string_configs(Lx, Ly)
        edge_counts = np.array([bin(c.mask).count("1") for c in configs])
        overlaps = []
        for g in gs:
            weights = np.where(edge_counts > 0, float(g) ** (2 * edge_counts), 1.0)
            overlaps.append(1.0 / float(np.sum(weights)))
        series.append(
            EstimatorSeries(
                x=np.array(gs),
                values=np.array(overlaps),
                stderr=np.zeros(len(gs)),
                n_samples=1,
                x_label="g",
                meta={"Lx": Lx, "Ly": Ly, "quantity": "vac_overlap"},
            )
        )
    return series
