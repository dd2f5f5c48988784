"""Parent Hamiltonian of the update-rule states on doubly periodic lattices.

The Hamiltonian is a sum of 8-qubit projectors, one per vertex.  A
projector acts off-diagonally only on the vertex's two outgoing edges
(the locked pair), projecting them onto the complement of an
environment-dependent superposition ``alpha|00> + beta|11>``; the six
environment qubits (the vertex's in-edges, the other in-edge of each
child and one out-edge of each child) are read diagonally.

When P(1|00) = 0 the coefficient pair can degenerate to (0, 0); the
projector is then defined by the limit P(1|00) -> 0, which selects the
branch whose configuration contains fewer spontaneous-creation events
("defects": an active locked pair above two empty in-edges).  In that
regime the total defect count is conserved on the locked subspace.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .automata import LatticeSpec, UpdateRule
from .errors import (
    LatticeTooSmallError,
    NoConvergenceError,
    NotBlockDiagonalError,
    OutOfRangeError,
    OverlappingSupportError,
    TooLargeError,
    UnsupportedParametersError,
)

__all__ = [
    "OperatorMatrix",
    "VertexEnvironment",
    "GroundSpace",
    "build_projector",
    "build_parent_hamiltonian",
    "defect_number",
    "locked_embedding",
    "ground_space",
    "sector_decompose",
    "MAX_HAMILTONIAN_QUBITS",
]

MAX_HAMILTONIAN_QUBITS = 20


@dataclass(frozen=True)
class OperatorMatrix:
    """Sparse Hermitian operator over edge-qubit basis states.

    Bit ``e`` of a basis index is the value of qubit ``e``.  ``qubits``
    is the number of qubits the matrix acts on; ``tags`` are free-form
    symmetry markers (e.g. ``"diagonal"``, ``"conserves-defects"``).
    ``lattice`` is carried when the operator belongs to a lattice.
    """

    qubits: int
    matrix: sp.csr_matrix
    tags: frozenset = frozenset()
    lattice: LatticeSpec | None = None

    def hermiticity_residual(self) -> float:
        d = self.matrix - self.matrix.T
        return 0.0 if d.nnz == 0 else float(np.max(np.abs(d.data)))

    def idempotency_residual(self) -> float:
        d = (self.matrix @ self.matrix - self.matrix).tocoo()
        return 0.0 if d.nnz == 0 else float(np.max(np.abs(d.data)))


@dataclass(frozen=True)
class VertexEnvironment:
    """The 8 edge qubits a vertex projector touches.

    ``i1, i2``: the vertex's outgoing (locked) pair; ``j1, j2``: its
    in-edges; ``j3, j4``: the other in-edge and one out-edge of the
    child reached through slot 0; ``j5, j6``: the same for slot 1.
    """

    i1: int
    i2: int
    j1: int
    j2: int
    j3: int
    j4: int
    j5: int
    j6: int

    def __post_init__(self):
        if len(set(self.as_tuple())) != 8:
            raise OverlappingSupportError(
                f"support qubits are not distinct: {self.as_tuple()}"
            )

    def as_tuple(self) -> tuple[int, ...]:
        return (self.i1, self.i2, self.j1, self.j2,
                self.j3, self.j4, self.j5, self.j6)

    @classmethod
    def from_lattice(cls, lattice: LatticeSpec, x: int, y: int) -> "VertexEnvironment":
        if lattice.boundary_x != "periodic" or lattice.boundary_y != "periodic":
            raise UnsupportedParametersError("projectors live on doubly periodic lattices")
        i1 = lattice.edge_index(x, y, 0)
        i2 = lattice.edge_index(x, y, 1)
        j1 = lattice.in_edge(x, y, 0)
        j2 = lattice.in_edge(x, y, 1)
        children = [lattice.child(x, y, slot) for slot in (0, 1)]
        others = []
        for slot, child in enumerate(children):
            cx, cy = child
            own = lattice.edge_index(x, y, slot)
            in_edges = [lattice.in_edge(cx, cy, w) for w in (0, 1)]
            if own not in in_edges:
                raise OverlappingSupportError("child does not list the vertex as parent")
            others.append(in_edges[1 - in_edges.index(own)])
        # one outgoing edge per child; the two chosen edges point toward the
        # children's shared grandchild so the support is mirror symmetric
        j4 = lattice.edge_index(children[0][0], children[0][1], 1)
        j6 = lattice.edge_index(children[1][0], children[1][1], 0)
        return cls(i1=i1, i2=i2, j1=j1, j2=j2,
                   j3=others[0], j4=j4, j5=others[1], j6=j6)


# ---------------------------------------------------------------------------
# the 8-qubit projector


def _branch_coefficient(rule: UpdateRule, center: int, env: tuple[int, ...]):
    """(residual, vanishing order in P(1|00)) of one projector branch.

    The branch amplitude is sqrt(P(center|j1 j2) P(j4|center j3)
    P(j6|j5 center)); each factor equal to P(1|00) contributes one power
    of p1, extracted symbolically so the p1 -> 0 limit is exact.
    """
    j1, j2, j3, j4, j5, j6 = env
    p1 = rule.table[0]
    triples = ((center, j1, j2), (j4, center, j3), (j6, j5, center))
    residual = 1.0
    order = 0
    for out, a, b in triples:
        code = 2 * a + b
        p = rule.table[code]
        if code == 0 and p == 0.0:
            if out == 1:
                order += 1          # factor is exactly p1
            # else factor is 1 - p1 = 1
            continue
        residual *= p if out == 1 else 1.0 - p
    return math.sqrt(residual), order


def _projector_block(rule: UpdateRule, env: tuple[int, ...]) -> np.ndarray:
    """4x4 block on the locked pair for a fixed diagonal environment."""
    a_res, a_ord = _branch_coefficient(rule, 0, env)
    b_res, b_ord = _branch_coefficient(rule, 1, env)
    if rule.table[0] == 0.0 and a_ord != b_ord:
        # fewer spontaneous creations wins in the limit
        alpha, beta = (1.0, 0.0) if a_ord < b_ord else (0.0, 1.0)
    else:
        norm = math.sqrt(a_res * a_res + b_res * b_res)
        alpha, beta = a_res / norm, b_res / norm
    block = np.eye(4)
    # basis order on (i1, i2): 00, 10, 01, 11 with i1 the low bit
    block[0, 0] -= alpha * alpha
    block[0, 3] -= alpha * beta
    block[3, 0] -= alpha * beta
    block[3, 3] -= beta * beta
    return block


def build_projector(rule: UpdateRule, env: VertexEnvironment) -> OperatorMatrix:
    """The vertex projector as an 8-qubit operator.

    Local qubit order is ``(i1, i2, j1, ..., j6)`` with i1 the least
    significant bit of the basis index.
    """
    if rule.arity != 2:
        raise UnsupportedParametersError("projectors are defined for two-parent rules")
    p1, p2, p3 = rule.table[0], rule.table[1], rule.table[3]
    if not (0.0 < p2 < 1.0) or not (0.0 < p3 < 1.0):
        raise UnsupportedParametersError(
            "p2 and p3 in {0, 1} make the projector discontinuous; rejected"
        )
    if not (0.0 <= p1 < 1.0):
        raise OutOfRangeError("P(1|00) must lie in [0, 1)")
    mat = np.zeros((256, 256))
    for packed in range(64):
        env_bits = tuple((packed >> m) & 1 for m in range(6))
        block = _projector_block(rule, env_bits)
        base = packed << 2
        for r in range(4):
            for c in range(4):
                if block[r, c] != 0.0:
                    mat[base + r, base + c] = block[r, c]
    return OperatorMatrix(qubits=8, matrix=sp.csr_matrix(mat))


def _lift(local: sp.csr_matrix, positions: tuple[int, ...], n: int) -> sp.coo_matrix:
    """Embed an operator on ``positions`` into the ``n``-qubit space."""
    others = [q for q in range(n) if q not in positions]
    spread = np.zeros(local.shape[0], dtype=np.int64)
    for bit, pos in enumerate(positions):
        spread |= ((np.arange(local.shape[0]) >> bit) & 1) << pos
    env = np.zeros(1 << len(others), dtype=np.int64)
    for bit, pos in enumerate(others):
        env |= ((np.arange(1 << len(others)) >> bit) & 1) << pos
    coo = local.tocoo()
    rows = (spread[coo.row][:, None] + env[None, :]).ravel()
    cols = (spread[coo.col][:, None] + env[None, :]).ravel()
    data = np.repeat(coo.data, env.size)
    return sp.coo_matrix((data, (rows, cols)), shape=(1 << n, 1 << n))


def _require_lattice(lattice: LatticeSpec, min_ly: int) -> None:
    if lattice.geometry != "brickwork2d":
        raise UnsupportedParametersError("operators are built on brickwork2d lattices")
    if lattice.boundary_x != "periodic" or lattice.boundary_y != "periodic":
        raise UnsupportedParametersError("operators need a doubly periodic lattice")
    if lattice.Lx < 3 or lattice.Ly < min_ly:
        raise LatticeTooSmallError(
            f"{lattice.Lx} x {lattice.Ly} is too small (need Lx >= 3, Ly >= {min_ly})"
        )
    if lattice.n_edges > MAX_HAMILTONIAN_QUBITS:
        raise TooLargeError(
            f"{lattice.n_edges} qubits exceed the cap {MAX_HAMILTONIAN_QUBITS}"
        )


def build_parent_hamiltonian(rule: UpdateRule, lattice: LatticeSpec) -> OperatorMatrix:
    """Sum of the vertex projectors over the whole lattice."""
    _require_lattice(lattice, min_ly=3)
    n = lattice.n_edges
    total = sp.coo_matrix((1 << n, 1 << n))
    for y in range(lattice.Ly):
        for x in range(lattice.Lx):
            env = VertexEnvironment.from_lattice(lattice, x, y)
            local = build_projector(rule, env)
            total = total + _lift(local.matrix, env.as_tuple(), n)
    tags = {"parent-hamiltonian"}
    if rule.table[0] == 0.0:
        tags.add("conserves-defects")
    return OperatorMatrix(qubits=n, matrix=total.tocsr(), tags=frozenset(tags),
                          lattice=lattice)


# ---------------------------------------------------------------------------
# defect counting and the locked subspace


def defect_number(lattice: LatticeSpec) -> OperatorMatrix:
    """Diagonal operator counting active locked pairs above empty in-edges."""
    if lattice.geometry != "brickwork2d":
        raise UnsupportedParametersError("operators are built on brickwork2d lattices")
    if lattice.boundary_x != "periodic" or lattice.boundary_y != "periodic":
        raise UnsupportedParametersError("operators need a doubly periodic lattice")
    if lattice.Lx < 2 or lattice.Ly < 2:
        raise LatticeTooSmallError("defect counting needs Lx >= 2 and Ly >= 2")
    if lattice.n_edges > MAX_HAMILTONIAN_QUBITS:
        raise TooLargeError(
            f"{lattice.n_edges} qubits exceed the cap {MAX_HAMILTONIAN_QUBITS}"
        )
    n = lattice.n_edges
    idx = np.arange(1 << n, dtype=np.int64)
    diag = np.zeros(1 << n)
    for y in range(lattice.Ly):
        for x in range(lattice.Lx):
            i1 = lattice.edge_index(x, y, 0)
            i2 = lattice.edge_index(x, y, 1)
            j1 = lattice.in_edge(x, y, 0)
            j2 = lattice.in_edge(x, y, 1)
            diag += (
                ((idx >> i1) & 1)
                * ((idx >> i2) & 1)
                * (1 - ((idx >> j1) & 1))
                * (1 - ((idx >> j2) & 1))
            ).astype(np.float64)
    return OperatorMatrix(qubits=n, matrix=sp.diags(diag).tocsr(),
                          tags=frozenset({"diagonal"}), lattice=lattice)


def locked_basis(lattice: LatticeSpec) -> np.ndarray:
    """Basis bitmasks of the subspace where each vertex's edge pair agrees."""
    nv = lattice.n_vertices
    if lattice.n_edges > MAX_HAMILTONIAN_QUBITS:
        raise TooLargeError("lattice too large for an explicit locked basis")
    masks = np.zeros(1 << nv, dtype=np.int64)
    for v in range(nv):
        x, y = v % lattice.Lx, v // lattice.Lx
        pair = (1 << lattice.edge_index(x, y, 0)) | (1 << lattice.edge_index(x, y, 1))
        masks |= ((np.arange(1 << nv, dtype=np.int64) >> v) & 1) * pair
    return masks


def locked_embedding(lattice: LatticeSpec) -> sp.csr_matrix:
    """Isometry from the locked subspace into the full edge-qubit space."""
    masks = locked_basis(lattice)
    n = lattice.n_edges
    return sp.csr_matrix(
        (np.ones(masks.size), (masks, np.arange(masks.size))),
        shape=(1 << n, masks.size),
    )


# ---------------------------------------------------------------------------
# spectra


@dataclass(frozen=True)
class GroundSpace:
    """Lowest eigenpairs with the kernel split off.

    ``ambiguous`` is set when the spectrum does not separate cleanly
    (no eigenvalue above the kernel tolerance was seen, or the first
    excited value is within a factor 1000 of the largest kernel value).
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray
    kernel_dim: int
    ambiguous: bool


def ground_space(H: OperatorMatrix, k: int = 6, tol: float = 1e-8) -> GroundSpace:
    """Lowest-k eigenpairs of a positive semidefinite sparse operator.

    Uses a block iterative solver (LOBPCG) with a fixed pseudorandom
    start block: the defect sectors of a parent Hamiltonian are exactly
    invariant, so a single-vector Lanczos run can converge to one copy
    of a degenerate kernel and silently miss the rest.  Tiny operators
    are diagonalized densely instead.
    """
    dim = H.matrix.shape[0]
    if not (1 <= k < dim - 1):
        raise OutOfRangeError(f"k = {k} is out of range for dimension {dim}")
    if dim <= 64 * k:
        vals, vecs = np.linalg.eigh(H.matrix.toarray())
        vals, vecs = vals[:k], vecs[:, :k]
    else:
        rng = np.random.default_rng(7)
        block = rng.standard_normal((dim, k))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # lobpcg reports loose pairs itself
            vals, vecs = spla.lobpcg(
                H.matrix, block, largest=False, tol=1e-8, maxiter=1000,
            )
        residual = H.matrix @ vecs - vecs * vals[None, :]
        worst = float(np.max(np.linalg.norm(residual, axis=0)))
        if not np.all(np.isfinite(vals)) or worst > 1e-5:
            raise NoConvergenceError(
                f"eigensolver did not converge: residual {worst:.3e}"
            )
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    kernel_dim = int(np.sum(vals < tol))
    if kernel_dim > 0:
        q, _ = np.linalg.qr(vecs[:, :kernel_dim])
        vecs = np.concatenate([q, vecs[:, kernel_dim:]], axis=1)
    if kernel_dim == k:
        ambiguous = True
    else:
        top_kernel = float(vals[kernel_dim - 1]) if kernel_dim else 0.0
        first_excited = float(vals[kernel_dim])
        ambiguous = first_excited < 1000.0 * max(top_kernel, 1e-11)
    return GroundSpace(eigenvalues=vals, vectors=vecs,
                       kernel_dim=kernel_dim, ambiguous=ambiguous)


def sector_decompose(H: OperatorMatrix | None, nd: OperatorMatrix) -> dict[int, int]:
    """Locked-basis dimensions per defect count.

    When ``H`` is given its commutator with the defect operator is
    checked on the locked subspace first (where both are defined); a
    residual above 1e-10 raises NotBlockDiagonal.
    """
    lattice = nd.lattice
    if lattice is None:
        raise UnsupportedParametersError("defect operator carries no lattice")
    masks = locked_basis(lattice)
    if H is not None:
        emb = locked_embedding(lattice)
        comm = H.matrix @ nd.matrix - nd.matrix @ H.matrix
        restricted = (emb.T @ comm @ emb).tocoo()
        resid = 0.0 if restricted.nnz == 0 else float(np.max(np.abs(restricted.data)))
        if resid > 1e-10:
            raise NotBlockDiagonalError(
                f"defect number is not conserved: residual {resid:.3e}"
            )
    diag = nd.matrix.diagonal()
    sectors: dict[int, int] = {}
    for m in masks:
        count = int(round(diag[m]))
        sectors[count] = sectors.get(count, 0) + 1
    return dict(sorted(sectors.items()))
