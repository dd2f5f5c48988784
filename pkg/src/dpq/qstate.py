"""Exact quantum states built from stochastic update rules.

A rule with conserved probability maps onto a local tensor whose virtual
legs copy the parent values and whose two outgoing legs broadcast the
child value; contracting a lattice of such tensors yields a state whose
amplitudes are square roots of trajectory probabilities.  This module
builds those tensors and states exactly (sparse, over the edge-qubit
basis) for lattices small enough to enumerate.

Edge-qubit convention (see :class:`dpq.automata.LatticeSpec`): vertex
``(x, y)`` owns the two outgoing edges ``edge_index(x, y, 0/1)``; both
carry the vertex output, i.e. the trajectory value of site ``x`` after
``y + 1`` update steps.  Bit ``e`` of a configuration key is the value
of edge ``e``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .automata import LatticeSpec, UpdateRule, enumerate_histories, _check_row
from .errors import (
    DegenerateStateError,
    NotFactorizableError,
    OutOfRangeError,
    ShapeMismatchError,
    TooLargeError,
    UnsupportedParametersError,
)

__all__ = [
    "LocalTensor",
    "Wavefunction",
    "MAX_SPARSE_ENTRIES",
    "build_dk_tensor",
    "check_isometry",
    "build_state_open",
    "build_state_periodic",
    "split_vac_gs",
    "build_one_string_state",
    "factorize_w",
]

MAX_SPARSE_ENTRIES = 2**26


# ---------------------------------------------------------------------------
# local tensor


@dataclass(frozen=True)
class LocalTensor:
    """Dense local tensor of an update-rule state.

    ``array`` is indexed ``(physical legs..., incoming legs..., outgoing
    legs...)``, with ``arity`` legs in each group.  For a valid rule the
    only nonzero entries are ``array[j.., j.., i..] = sqrt(P(i | j..))``
    with all outgoing legs equal: physical legs copy the incoming
    (parent) values and the outgoing legs broadcast the child value.
    """

    array: np.ndarray
    arity: int

    def __post_init__(self):
        expected = (2,) * (3 * self.arity)
        if self.array.shape != expected:
            raise ShapeMismatchError(
                f"tensor shape {self.array.shape} != {expected} for arity {self.arity}"
            )

    def as_matrix(self) -> np.ndarray:
        """Reshape to a matrix (physical+outgoing legs, incoming legs)."""
        m = 1 << self.arity
        a = np.moveaxis(
            self.array,
            list(range(self.arity, 2 * self.arity)),
            list(range(2 * self.arity, 3 * self.arity)),
        )
        return a.reshape(m * m, m)


def build_dk_tensor(rule: UpdateRule) -> LocalTensor:
    """Local tensor of ``rule``: entries sqrt(P(i|parents)) on the locked pattern."""
    k = rule.arity
    arr = np.zeros((2,) * (3 * k), dtype=np.float64)
    for code in range(1 << k):
        parents = tuple((code >> (k - 1 - b)) & 1 for b in range(k))
        p1 = rule.table[code]
        for out in (0, 1):
            amp = math.sqrt(p1 if out == 1 else 1.0 - p1)
            idx = parents + parents + (out,) * k
            arr[idx] = amp
    return LocalTensor(array=arr, arity=k)


def check_isometry(tensor: LocalTensor) -> float:
    """Max-norm deviation of the (physical+outgoing -> incoming) map from an isometry.

    A probability-conserving rule gives 0 up to roundoff; rescaling one
    probability column by ``c`` shifts the corresponding diagonal entry
    by ``1 - c**2``-ish amounts, so the residual measures the deficit.
    """
    m = tensor.as_matrix()
    gram = m.T @ m
    return float(np.max(np.abs(gram - np.eye(gram.shape[0]))))


# ---------------------------------------------------------------------------
# sparse wavefunctions


class Wavefunction:
    """Sparse real wavefunction over edge-qubit configurations.

    ``amps`` maps an integer bitmask (bit ``e`` = edge ``e``) to a real
    amplitude.  Instances should be treated as immutable; all operations
    return new objects.  ``lattice`` may be None for abstract qubit
    registers (e.g. the W state), in which case ``n_qubits`` is set
    explicitly.
    """

    __slots__ = ("lattice", "n_qubits", "amps", "_norm")

    def __init__(self, amps: dict[int, float], lattice: LatticeSpec | None = None,
                 n_qubits: int | None = None):
        if lattice is None and n_qubits is None:
            raise OutOfRangeError("need a lattice or an explicit qubit count")
        if len(amps) > MAX_SPARSE_ENTRIES:
            raise TooLargeError(
                f"{len(amps)} sparse entries exceed the cap {MAX_SPARSE_ENTRIES}"
            )
        self.lattice = lattice
        self.n_qubits = int(n_qubits if n_qubits is not None else lattice.n_edges)
        self.amps = {int(k): float(v) for k, v in amps.items() if v != 0.0}
        self._norm: float | None = None

    # -- basic algebra ----------------------------------------------------

    def norm(self) -> float:
        if self._norm is None:
            self._norm = math.sqrt(sum(a * a for a in self.amps.values()))
        return self._norm

    def normalized(self) -> "Wavefunction":
        n = self.norm()
        if n == 0.0:
            raise DegenerateStateError("cannot normalize the zero vector")
        return Wavefunction(
            {k: a / n for k, a in self.amps.items()},
            lattice=self.lattice,
            n_qubits=self.n_qubits,
        )

    def inner(self, other: "Wavefunction") -> float:
        if other.n_qubits != self.n_qubits:
            raise ShapeMismatchError("qubit counts differ")
        small, big = (self.amps, other.amps) if len(self.amps) <= len(other.amps) \
            else (other.amps, self.amps)
        return sum(a * big.get(k, 0.0) for k, a in small.items())

    def amplitude(self, config: int) -> float:
        return self.amps.get(int(config), 0.0)

    def diagonal_expectation(self, qubit: int) -> float:
        """<psi| n_qubit |psi> with n = (1 - Z)/2, i.e. the bit average."""
        if not (0 <= qubit < self.n_qubits):
            raise OutOfRangeError(f"qubit {qubit} out of range")
        return sum(a * a for k, a in self.amps.items() if (k >> qubit) & 1)

    def to_dense(self) -> np.ndarray:
        if self.n_qubits > 24:
            raise TooLargeError(f"refusing dense vector on {self.n_qubits} qubits")
        vec = np.zeros(1 << self.n_qubits)
        for k, a in self.amps.items():
            vec[k] = a
        return vec

    # -- text serialization (cross-language fixture format) ---------------

    def to_text(self) -> str:
        lines = [f"# qubits = {self.n_qubits}"]
        for k in sorted(self.amps):
            lines.append(f"{k:x} {self.amps[k]:.17g}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, lattice: LatticeSpec | None = None) -> "Wavefunction":
        n_qubits = None
        amps: dict[int, float] = {}
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].partition("=")
                if key.strip() == "qubits":
                    n_qubits = int(val)
                continue
            mask, amp = line.split()
            amps[int(mask, 16)] = float(amp)
        if n_qubits is None:
            raise ShapeMismatchError("missing '# qubits =' header")
        return cls(amps, lattice=lattice, n_qubits=n_qubits)


# ---------------------------------------------------------------------------
# state construction


def _edges_for_rows(lattice: LatticeSpec, rows: np.ndarray) -> int:
    """Bitmask of edge values given trajectory rows 1..Ly (vertex outputs).

    ``rows[y]`` (trajectory row ``y + 1``) holds the outputs of vertex
    row ``y``; both outgoing edges of a vertex carry its output.
    """
    mask = 0
    Lx = lattice.Lx
    for y in range(lattice.Ly):
        row = rows[y]
        for x in range(Lx):
            if row[x]:
                mask |= 1 << lattice.edge_index(x, y, 0)
                mask |= 1 << lattice.edge_index(x, y, 1)
    return mask


def build_state_open(rule: UpdateRule, lattice: LatticeSpec,
                     boundary: np.ndarray) -> Wavefunction:
    """State of an open-y lattice fed by a classical ``boundary`` row.

    Every trajectory contributes its edge configuration with amplitude
    sqrt(probability); distinct trajectories give distinct configurations,
    so the norm is exactly the total probability, i.e. 1.
    """
    if lattice.geometry != "brickwork2d":
        raise UnsupportedParametersError("exact states are built on brickwork2d only")
    if lattice.boundary_y != "open":
        raise UnsupportedParametersError("build_state_open needs an open y boundary")
    boundary = _check_row(boundary, lattice)
    histories, probs = enumerate_histories(boundary, rule, lattice, lattice.Ly)
    amps: dict[int, float] = {}
    for hist, p in zip(histories, probs):
        if p == 0.0:
            continue
        mask = _edges_for_rows(lattice, hist[1:])
        amps[mask] = amps.get(mask, 0.0) + math.sqrt(p)
    return Wavefunction(amps, lattice=lattice)


def _row_transition(rule: UpdateRule, lattice: LatticeSpec, y: int,
                    src: int, dst: int) -> float:
    """P(row ``dst`` | row ``src``) across vertex row ``y`` (periodic x).

    Parent offsets follow the parity of the wrapped parent row, which
    differs from the parity of ``y`` across the seam of an odd-``Ly``
    periodic lattice.
    """
    Lx = lattice.Lx
    table = rule.table
    prob = 1.0
    parent_parity = ((y - 1) % lattice.Ly) % 2
    for x in range(Lx):
        if parent_parity == 1:
            a = (src >> x) & 1
            b = (src >> ((x + 1) % Lx)) & 1
        else:
            a = (src >> ((x - 1) % Lx)) & 1
            b = (src >> x) & 1
        p1 = table[2 * a + b]
        out = (dst >> x) & 1
        prob *= p1 if out else 1.0 - p1
        if prob == 0.0:
            return 0.0
    return prob


def build_state_periodic(rule: UpdateRule, Lx: int, Ly: int) -> Wavefunction:
    """State of the doubly periodic lattice: sum over closed row sequences.

    The weight of a closed sequence s_0 -> s_1 -> ... -> s_Ly = s_0 is the
    product of row transition probabilities; its amplitude is the square
    root of the weight and the state is normalized at the end (the closed
    trajectory sum is not 1, unlike the open case).
    """
    if rule.arity != 2:
        raise UnsupportedParametersError("periodic construction is brickwork-only")
    if rule.table[0] != 0.0:
        warnings.warn(
            "P(1|00) > 0: the empty state is not disconnected and the "
            "vacuum/cluster decomposition is only approximate",
            stacklevel=2,
        )
    lattice = LatticeSpec(Lx=Lx, Ly=Ly, boundary_x="periodic", boundary_y="periodic")
    n_rows = 1 << Lx

    # depth-first search over row sequences with zero-probability pruning
    amps: dict[int, float] = {}
    visited = 0
    for s0 in range(n_rows):
        stack: list[tuple[int, int, float, tuple[int, ...]]] = [(0, s0, 1.0, ())]
        while stack:
            y, src, w, tail = stack.pop()
            visited += 1
            if visited > 1 << 24:
                raise TooLargeError("periodic trajectory enumeration exceeds the cap")
            if y == Ly:
                if src == s0:
                    rows = np.array(
                        [[(s >> x) & 1 for x in range(Lx)] for s in tail],
                        dtype=np.uint8,
                    )
                    mask = _edges_for_rows(lattice, rows)
                    amps[mask] = amps.get(mask, 0.0) + math.sqrt(w)
                continue
            for dst in range(n_rows):
                p = _row_transition(rule, lattice, y, src, dst)
                if p > 0.0:
                    stack.append((y + 1, dst, w * p, tail + (dst,)))
    return Wavefunction(amps, lattice=lattice).normalized()


def split_vac_gs(psi: Wavefunction) -> tuple[float, Wavefunction]:
    """Split off the all-empty component: psi = sqrt(w)|vac> + sqrt(1-w)|rest>.

    Returns ``(w, rest)`` with ``rest`` normalized and exactly orthogonal
    to the all-empty configuration.
    """
    c = psi.amplitude(0)
    rest = {k: a for k, a in psi.amps.items() if k != 0}
    if not rest:
        raise DegenerateStateError("state has no component besides the empty one")
    w = c * c
    gs = Wavefunction(rest, lattice=psi.lattice, n_qubits=psi.n_qubits).normalized()
    return (w, gs)


def one_string_paths(Lx: int, Ly: int) -> list[tuple[int, ...]]:
    """All single-site closed paths: x positions per row, child steps only.

    A path visits one vertex per row and closes around the periodic y
    direction (x winding allowed).  Used both by the state builder and as
    a counting oracle: the number of paths is Lx times the number of step
    sequences with net displacement divisible by Lx.
    """
    if Lx < 3:
        raise OutOfRangeError("single-string paths need Lx >= 3")
    if Ly < 2:
        raise OutOfRangeError("single-string paths need Ly >= 2")
    paths: list[tuple[int, ...]] = []
    for x0 in range(Lx):
        stack: list[tuple[int, tuple[int, ...]]] = [(x0, (x0,))]
        while stack:
            x, trail = stack.pop()
            y = len(trail) - 1
            if y == Ly:
                if x == x0:
                    paths.append(trail[:-1])
                continue
            steps = (0, 1) if y % 2 == 0 else (-1, 0)
            for dx in steps:
                stack.append(((x + dx) % Lx, trail + ((x + dx) % Lx,)))
    return paths


def build_one_string_state(Lx: int, Ly: int) -> Wavefunction:
    """Equal superposition of all single winding clusters (both edge copies lit)."""
    lattice = LatticeSpec(Lx=Lx, Ly=Ly, boundary_x="periodic", boundary_y="periodic")
    paths = one_string_paths(Lx, Ly)
    amp = 1.0 / math.sqrt(len(paths))
    amps: dict[int, float] = {}
    for path in paths:
        mask = 0
        for y, x in enumerate(path):
            mask |= 1 << lattice.edge_index(x, y, 0)
            mask |= 1 << lattice.edge_index(x, y, 1)
        amps[mask] = amps.get(mask, 0.0) + amp
    return Wavefunction(amps, lattice=lattice)


# ---------------------------------------------------------------------------
# plumbing factorization


def factorize_w(tensor: LocalTensor) -> np.ndarray:
    """Extract the 4x4 matrix W with tensor = (physical copies incoming) o W.

    Rows index the outgoing pair (00, 01, 10, 11), columns the incoming
    pair; W[(c,d), (a,b)] = tensor[a,b,a,b,c,d].  Raises NotFactorizable
    when any entry lives outside the copied-physical-leg pattern.
    """
    if tensor.arity != 2:
        raise UnsupportedParametersError("factorization is defined for arity 2")
    arr = tensor.array
    for j in range(2):
        for k in range(2):
            for a in range(2):
                for b in range(2):
                    if (j, k) != (a, b) and np.any(arr[j, k, a, b] != 0.0):
                        raise NotFactorizableError(
                            "physical legs do not copy the incoming pair"
                        )
    w = np.zeros((4, 4))
    for a in range(2):
        for b in range(2):
            for c in range(2):
                for d in range(2):
                    w[2 * c + d, 2 * a + b] = arr[a, b, a, b, c, d]
    # verify the reconstruction is exact
    rebuilt = np.zeros_like(arr)
    for a in range(2):
        for b in range(2):
            for c in range(2):
                for d in range(2):
                    rebuilt[a, b, a, b, c, d] = w[2 * c + d, 2 * a + b]
    if np.any(rebuilt != arr):
        raise NotFactorizableError("tensor is not of the plumbing form")
    return w
