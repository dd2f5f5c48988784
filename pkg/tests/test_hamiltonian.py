"""Vertex projectors, the summed operator, and its kernel structure.

The heavyweight objects (two 18-qubit operators and their low spectra)
are module-scoped fixtures; everything else reuses them.  The dense
restriction to the locked subspace serves as the independent oracle for
the iterative eigensolver.
"""

import warnings

import numpy as np
import pytest
import scipy.sparse as sp

from dpq.automata import LatticeSpec, dk_rule
from dpq.errors import (
    LatticeTooSmallError,
    NotBlockDiagonalError,
    OutOfRangeError,
    OverlappingSupportError,
    TooLargeError,
    UnsupportedParametersError,
)
from dpq.hamiltonian import (
    MAX_HAMILTONIAN_QUBITS,
    OperatorMatrix,
    VertexEnvironment,
    build_parent_hamiltonian,
    build_projector,
    defect_number,
    ground_space,
    locked_basis,
    locked_embedding,
    sector_decompose,
)
from dpq.qstate import build_one_string_state, build_state_periodic

LAT3 = LatticeSpec(Lx=3, Ly=3, boundary_x="periodic", boundary_y="periodic")


@pytest.fixture(scope="module")
def h_conserving():
    return build_parent_hamiltonian(dk_rule(0.0, 0.7, 0.7), LAT3)


@pytest.fixture(scope="module")
def h_broken():
    return build_parent_hamiltonian(dk_rule(0.1, 0.7, 0.7), LAT3)


@pytest.fixture(scope="module")
def nd3():
    return defect_number(LAT3)


@pytest.fixture(scope="module")
def space_conserving(h_conserving):
    return ground_space(h_conserving)


@pytest.fixture(scope="module")
def space_broken(h_broken):
    return ground_space(h_broken)


# ---------------------------------------------------------------------------
# environments and single projectors


def test_environment_has_eight_distinct_qubits():
    for y in range(3):
        for x in range(3):
            env = VertexEnvironment.from_lattice(LAT3, x, y)
            qubits = env.as_tuple()
            assert len(qubits) == 8
            assert len(set(qubits)) == 8
            assert all(0 <= q < LAT3.n_edges for q in qubits)
            # own outgoing pair comes first
            assert env.i1 == LAT3.edge_index(x, y, 0)
            assert env.i2 == LAT3.edge_index(x, y, 1)


def test_environment_rejects_overlap():
    with pytest.raises(OverlappingSupportError):
        VertexEnvironment(i1=0, i2=0, j1=1, j2=2, j3=3, j4=4, j5=5, j6=6)


def test_environment_needs_double_periodicity():
    lat = LatticeSpec(Lx=3, Ly=3, boundary_x="periodic", boundary_y="open")
    with pytest.raises(UnsupportedParametersError):
        VertexEnvironment.from_lattice(lat, 0, 1)


def test_projector_is_hermitian_idempotent():
    env = VertexEnvironment.from_lattice(LAT3, 1, 1)
    for rule in (dk_rule(0.0, 0.7, 0.7), dk_rule(0.1, 0.7, 0.7),
                 dk_rule(0.0, 0.3, 0.9)):
        proj = build_projector(rule, env)
        assert proj.matrix.shape == (256, 256)
        assert proj.hermiticity_residual() <= 1e-12
        assert proj.idempotency_residual() <= 1e-12


def test_projector_parameter_domain():
    env = VertexEnvironment.from_lattice(LAT3, 0, 0)
    with pytest.raises(UnsupportedParametersError):
        build_projector(dk_rule(0.0, 1.0, 1.0), env)  # deterministic branch
    with pytest.raises(UnsupportedParametersError):
        build_projector(dk_rule(0.0, 0.0, 0.5), env)
    with pytest.raises(OutOfRangeError):
        build_projector(dk_rule(1.0, 0.7, 0.7), env)


def test_projector_continuous_at_vanishing_p1():
    # the branch bookkeeping at p1 = 0 must be the limit of small p1 > 0
    env = VertexEnvironment.from_lattice(LAT3, 2, 1)
    at_zero = build_projector(dk_rule(0.0, 0.7, 0.7), env).matrix.toarray()
    near_zero = build_projector(dk_rule(1e-9, 0.7, 0.7), env).matrix.toarray()
    assert np.max(np.abs(at_zero - near_zero)) < 1e-3


# ---------------------------------------------------------------------------
# assembled operator


def test_operator_metadata(h_conserving, h_broken):
    assert h_conserving.qubits == 18
    assert "parent-hamiltonian" in h_conserving.tags
    assert "conserves-defects" in h_conserving.tags
    assert "conserves-defects" not in h_broken.tags
    assert h_conserving.hermiticity_residual() <= 1e-12
    assert h_conserving.matrix.nnz == 870399
    assert h_broken.matrix.nnz == 1441792


def test_size_guards():
    small = LatticeSpec(Lx=3, Ly=2, boundary_x="periodic", boundary_y="periodic")
    with pytest.raises(LatticeTooSmallError):
        build_parent_hamiltonian(dk_rule(0.0, 0.7, 0.7), small)
    big = LatticeSpec(Lx=4, Ly=3, boundary_x="periodic", boundary_y="periodic")
    with pytest.raises(TooLargeError):
        build_parent_hamiltonian(dk_rule(0.0, 0.7, 0.7), big)
    # the diagonal counter works on the two-row lattice the operator rejects
    assert defect_number(small).qubits == 12
    assert MAX_HAMILTONIAN_QUBITS == 20


def test_annihilates_the_automaton_state(h_conserving):
    psi = build_state_periodic(dk_rule(0.0, 0.7, 0.7), 3, 3).to_dense()
    assert np.linalg.norm(h_conserving.matrix @ psi) <= 1e-10
    vac = np.zeros(1 << 18)
    vac[0] = 1.0
    assert np.linalg.norm(h_conserving.matrix @ vac) == 0.0


def test_annihilates_the_state_with_p1(h_broken):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        psi = build_state_periodic(dk_rule(0.1, 0.7, 0.7), 3, 3).to_dense()
    assert np.linalg.norm(h_broken.matrix @ psi) <= 1e-10


# ---------------------------------------------------------------------------
# locked subspace and defect counting


def test_locked_basis_structure():
    masks = locked_basis(LAT3)
    assert masks.size == 512  # one basis state per vertex configuration
    assert masks[0] == 0
    for mask in masks[:64]:
        for v in range(9):
            x, y = v % 3, v // 3
            b0 = (int(mask) >> LAT3.edge_index(x, y, 0)) & 1
            b1 = (int(mask) >> LAT3.edge_index(x, y, 1)) & 1
            assert b0 == b1
    emb = locked_embedding(LAT3)
    assert emb.shape == (1 << 18, 512)
    gram = (emb.T @ emb).toarray()
    np.testing.assert_array_equal(gram, np.eye(512))


def defects_oracle(vertex_config):
    """Count vertices that are active while both lattice parents are empty."""
    count = 0
    for v in range(9):
        x, y = v % 3, v // 3
        if not (vertex_config >> v) & 1:
            continue
        parents = LAT3.parents(x, y)
        if all(
            not (vertex_config >> (py * 3 + px)) & 1 for px, py in parents
        ):
            count += 1
    return count


def test_sector_table_against_bit_oracle(h_conserving, nd3):
    sectors = sector_decompose(h_conserving, nd3)
    expected: dict[int, int] = {}
    for config in range(512):
        d = defects_oracle(config)
        expected[d] = expected.get(d, 0) + 1
    assert sectors == expected
    assert sectors == {0: 128, 1: 216, 2: 144, 3: 24}


def test_commutator_vanishes_on_locked_subspace(h_conserving, nd3):
    emb = locked_embedding(LAT3)
    comm = h_conserving.matrix @ nd3.matrix - nd3.matrix @ h_conserving.matrix
    locked = (emb.T @ comm @ emb)
    assert abs(locked).max() <= 1e-12
    # on the full space the commutator is genuinely nonzero: the operator
    # moves weight through configurations with broken pairs
    assert abs(comm).max() > 0.4


def test_sector_decompose_rejects_nonconserving(h_broken, nd3):
    with pytest.raises(NotBlockDiagonalError):
        sector_decompose(h_broken, nd3)
    # without the operator the decomposition is purely combinatorial
    assert sector_decompose(None, nd3) == {0: 128, 1: 216, 2: 144, 3: 24}


# ---------------------------------------------------------------------------
# spectra: iterative solver vs. dense restriction


def dense_locked_spectrum(h, k=6):
    """Oracle: diagonalize the operator restricted to the locked subspace.

    The restriction is exact for these operators -- they never map a
    locked configuration onto an unlocked one (verified by the residual
    below), so the low spectrum of the restriction is the low spectrum.
    """
    emb = locked_embedding(LAT3)
    restricted = (emb.T @ h.matrix @ emb).toarray()
    leak = h.matrix @ emb - emb @ sp.csr_matrix(restricted)
    assert abs(leak).max() <= 1e-12
    vals, vecs = np.linalg.eigh(restricted)
    return vals[:k], emb @ vecs[:, :k]


def test_ground_space_matches_dense_oracle(h_conserving, space_conserving):
    vals, _ = dense_locked_spectrum(h_conserving)
    np.testing.assert_allclose(space_conserving.eigenvalues, vals, atol=1e-7)
    assert space_conserving.kernel_dim == 2
    assert not space_conserving.ambiguous
    # frozen spectrum of the conserving point
    assert space_conserving.eigenvalues[2] == pytest.approx(
        0.23406927473680297, abs=1e-7
    )
    assert space_conserving.eigenvalues[3] == pytest.approx(
        0.23406927473680297, abs=1e-7
    )
    assert space_conserving.eigenvalues[4] == pytest.approx(
        0.3269375528804034, abs=1e-7
    )


def test_kernel_spans_vacuum_and_automaton_state(space_conserving):
    kernel = space_conserving.vectors[:, :2]
    vac = np.zeros(1 << 18)
    vac[0] = 1.0
    psi = build_state_periodic(dk_rule(0.0, 0.7, 0.7), 3, 3).to_dense()
    for state in (vac, psi):
        c = kernel.T @ state
        assert float(c @ c) == pytest.approx(1.0, abs=1e-9)
    # the kernel basis is orthonormal
    np.testing.assert_allclose(kernel.T @ kernel, np.eye(2), atol=1e-10)


def test_broken_point_has_one_kernel_state(h_broken, space_broken, nd3):
    vals, _ = dense_locked_spectrum(h_broken)
    np.testing.assert_allclose(space_broken.eigenvalues, vals, atol=1e-7)
    assert space_broken.kernel_dim == 1
    assert space_broken.eigenvalues[1] == pytest.approx(
        0.042158299811009027, abs=1e-7
    )
    kern = space_broken.vectors[:, 0]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        psi = build_state_periodic(dk_rule(0.1, 0.7, 0.7), 3, 3).to_dense()
    assert abs(float(kern @ psi)) >= 1.0 - 1e-10
    # the lone kernel state keeps a finite vacuum share and carries defects
    assert float(kern[0] ** 2) == pytest.approx(0.28332306260051421, abs=1e-7)
    assert float(kern @ (nd3.matrix @ kern)) == pytest.approx(
        0.11305984432730887, abs=1e-7
    )


def test_one_string_state_is_not_in_the_kernel(space_conserving):
    kernel = space_conserving.vectors[:, :2]
    one = build_one_string_state(3, 3).to_dense()
    c = kernel.T @ one
    assert float(c @ c) == pytest.approx(0.09263607973807478, abs=1e-7)


def test_dense_fallback_path():
    # small operators take the exact eigh branch; a hand-built diagonal
    # matrix pins kernel splitting and the ambiguity flag
    diag = sp.diags([0.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).tocsr()
    op = OperatorMatrix(qubits=3, matrix=diag, tags=frozenset())
    space = ground_space(op, k=4)
    assert space.kernel_dim == 2
    assert not space.ambiguous
    np.testing.assert_allclose(space.eigenvalues, [0.0, 0.0, 1.0, 2.0], atol=1e-14)
    # k equal to the kernel dimension cannot certify the split
    space = ground_space(op, k=2)
    assert space.ambiguous
