"""Two-region reduced density matrices, partial transpose and negativity.

Regions are x-intervals spanning the full periodic y direction (the type
has no y extent on purpose).  Density matrices are represented on the
product of the *observed* pattern bases of the two regions, never on the
full 2^n space: the states of interest are sparse superpositions, so the
patterns actually appearing in the wavefunction stay few even when the
regions contain many qubits.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import math

import numpy as np

from .automata import LatticeSpec
from .errors import (
    BadPartitionError,
    GeometryInfeasibleError,
    OutOfRangeError,
    RegionsOverlapError,
    TooLargeError,
    UnsupportedParametersError,
)
from .qstate import Wavefunction, build_one_string_state

__all__ = [
    "Region",
    "DensityMatrix",
    "reduced_density_matrix",
    "negativity",
    "w_state",
    "verify_negativity_bound",
    "MAX_RDM_DIM",
]

MAX_RDM_DIM = 1 << 14


@dataclass(frozen=True)
class Region:
    """Columns [start, start + width) of vertices, all rows, both edges."""

    start: int
    width: int

    def __post_init__(self):
        if self.width < 1:
            raise OutOfRangeError("region width must be >= 1")

    def columns(self, Lx: int) -> tuple[int, ...]:
        return tuple((self.start + i) % Lx for i in range(self.width))

    def overlaps(self, other: "Region", Lx: int) -> bool:
        return bool(set(self.columns(Lx)) & set(other.columns(Lx)))

    def edge_qubits(self, lattice: LatticeSpec) -> tuple[int, ...]:
        cols = self.columns(lattice.Lx)
        if len(set(cols)) != len(cols):
            raise OutOfRangeError("region wider than the lattice")
        out = []
        for y in range(lattice.Ly):
            for x in cols:
                out.append(lattice.edge_index(x, y, 0))
                out.append(lattice.edge_index(x, y, 1))
        return tuple(sorted(out))


class DensityMatrix:
    """Two-region reduced density matrix in the observed product basis.

    ``matrix[ia * dim_b + ib, ...]`` with ``ia`` indexing ``basis_a``
    (the region-A bit patterns that occur in the wavefunction) and
    likewise for B.
    """

    def __init__(self, qubits_a, qubits_b, basis_a, basis_b, matrix):
        self.qubits_a = tuple(qubits_a)
        self.qubits_b = tuple(qubits_b)
        self.basis_a = tuple(basis_a)
        self.basis_b = tuple(basis_b)
        self.matrix = matrix

    @property
    def dim_a(self) -> int:
        return len(self.basis_a)

    @property
    def dim_b(self) -> int:
        return len(self.basis_b)

    @cached_property
    def trace(self) -> float:
        return float(np.trace(self.matrix))

    def hermiticity_residual(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.T)))


def _pattern(config: int, qubits: tuple[int, ...]) -> int:
    out = 0
    for k, q in enumerate(qubits):
        out |= ((config >> q) & 1) << k
    return out


def _resolve_qubits(psi: Wavefunction, region) -> tuple[int, ...]:
    if isinstance(region, Region):
        if psi.lattice is None:
            raise UnsupportedParametersError(
                "regions need a wavefunction with lattice geometry"
            )
        return region.edge_qubits(psi.lattice)
    qubits = tuple(int(q) for q in region)
    if len(set(qubits)) != len(qubits):
        raise OutOfRangeError("duplicate qubit indices in region")
    for q in qubits:
        if not (0 <= q < psi.n_qubits):
            raise OutOfRangeError(f"qubit {q} out of range")
    return qubits


def reduced_density_matrix(
    psi: Wavefunction,
    A: Region | Sequence[int],
    B: Region | Sequence[int],
) -> DensityMatrix:
    """Trace out everything except the two regions.

    Works directly on the sparse support: configurations are grouped by
    their pattern outside A and B, and each group contributes one outer
    product.  The matrix lives on the observed-pattern product basis,
    whose size is capped at 2^14.
    """
    qa = _resolve_qubits(psi, A)
    qb = _resolve_qubits(psi, B)
    if set(qa) & set(qb):
        raise RegionsOverlapError("regions A and B share qubits")

    groups: dict[int, list[tuple[int, int, float]]] = {}
    seen_a: set[int] = set()
    seen_b: set[int] = set()
    clear_mask = 0
    for q in qa + qb:
        clear_mask |= 1 << q
    for config, amp in psi.amps.items():
        pa = _pattern(config, qa)
        pb = _pattern(config, qb)
        rest = config & ~clear_mask
        seen_a.add(pa)
        seen_b.add(pb)
        groups.setdefault(rest, []).append((pa, pb, amp))

    basis_a = tuple(sorted(seen_a))
    basis_b = tuple(sorted(seen_b))
    da, db = len(basis_a), len(basis_b)
    if da * db > MAX_RDM_DIM:
        raise TooLargeError(
            f"observed product basis {da} x {db} exceeds {MAX_RDM_DIM}"
        )
    index_a = {p: i for i, p in enumerate(basis_a)}
    index_b = {p: i for i, p in enumerate(basis_b)}

    rho = np.zeros((da * db, da * db))
    for entries in groups.values():
        v = np.zeros(da * db)
        for pa, pb, amp in entries:
            v[index_a[pa] * db + index_b[pb]] += amp
        rho += np.outer(v, v)
    norm2 = psi.norm() ** 2
    if norm2 <= 0.0:
        raise OutOfRangeError("cannot reduce a zero wavefunction")
    rho /= norm2
    return DensityMatrix(qa, qb, basis_a, basis_b, rho)


def negativity(rho: DensityMatrix, partition=None) -> float:
    """Absolute sum of the negative partial-transpose eigenvalues.

    Equals (trace norm of the partial transpose - 1)/2 at unit trace.
    ``partition``, when given, must reproduce the density matrix's own
    bipartition (either order); transposing A or B gives the same value.
    """
    transpose_b = True
    if partition is not None:
        first, second = (set(int(q) for q in side) for side in partition)
        if first == set(rho.qubits_a) and second == set(rho.qubits_b):
            transpose_b = True
        elif first == set(rho.qubits_b) and second == set(rho.qubits_a):
            transpose_b = False
        else:
            raise BadPartitionError(
                "partition does not match the density matrix's regions"
            )
    da, db = rho.dim_a, rho.dim_b
    m = rho.matrix.reshape(da, db, da, db)
    if transpose_b:
        m = m.transpose(0, 3, 2, 1)
    else:
        m = m.transpose(2, 1, 0, 3)
    eigs = np.linalg.eigvalsh(m.reshape(da * db, da * db))
    return float(-np.sum(eigs[eigs < 0.0]) + 0.0)


def w_state(L: int) -> Wavefunction:
    """Equal superposition of the L weight-one configurations."""
    if L < 3:
        raise OutOfRangeError("W state needs L >= 3")
    amp = 1.0 / math.sqrt(L)
    return Wavefunction({1 << i: amp for i in range(L)}, n_qubits=L)


def verify_negativity_bound(
    Lx: int, Ly: int, ell: int, d: int
) -> tuple[float, float, bool]:
    """Negativity of two width-ell regions of the one-string state.

    Places A at columns [0, ell) and B at [ell + d, 2 ell + d) on a
    doubly periodic Lx x Ly lattice and compares the negativity of
    their reduced density matrix against 1 / (Lx (Lx - 2)).
    """
    if ell <= Ly:
        raise GeometryInfeasibleError(
            f"regions must be wider than Ly (got ell = {ell}, Ly = {Ly})"
        )
    if d < 1:
        raise GeometryInfeasibleError("regions must be separated on both sides")
    if Lx - 2 * ell - d < 1:
        raise GeometryInfeasibleError(
            f"no room left around the regions: Lx - 2*ell - d = {Lx - 2 * ell - d}"
        )
    psi = build_one_string_state(Lx, Ly)
    rho = reduced_density_matrix(psi, Region(0, ell), Region(ell + d, ell))
    value = negativity(rho)
    bound = 1.0 / (Lx * (Lx - 2))
    return value, bound, bool(value >= bound - 1e-12)
