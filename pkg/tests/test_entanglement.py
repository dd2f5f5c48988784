"""Reduced density matrices, partial-transpose negativity, cluster states."""

import math

import numpy as np
import pytest

from dpq.entanglement import (
    MAX_RDM_DIM,
    Region,
    negativity,
    reduced_density_matrix,
    verify_negativity_bound,
    w_state,
)
from dpq.errors import (
    BadPartitionError,
    GeometryInfeasibleError,
    OutOfRangeError,
    RegionsOverlapError,
    TooLargeError,
    UnsupportedParametersError,
)
from dpq.qstate import Wavefunction, build_one_string_state


# ---------------------------------------------------------------------------
# reduced density matrices


def test_w_state_pair_rdm_matches_hand_matrix():
    # tracing a W state down to two qubits leaves (L-2)/L on |00> and a
    # fully coherent single-excitation block
    L = 6
    rho = reduced_density_matrix(w_state(L), [0], [1])
    expected = np.array([
        [4 / 6, 0, 0, 0],
        [0, 1 / 6, 1 / 6, 0],
        [0, 1 / 6, 1 / 6, 0],
        [0, 0, 0, 0],
    ])
    np.testing.assert_allclose(rho.matrix, expected, atol=1e-14)
    assert rho.trace == pytest.approx(1.0, abs=1e-12)
    assert rho.hermiticity_residual() <= 1e-14
    assert rho.qubits_a == (0,) and rho.qubits_b == (1,)


def test_rdm_of_product_state():
    # |+>|+> has a rank-one RDM; negativity vanishes up to eigensolver
    # roundoff and never comes back with a negative sign (no -0.0)
    amps = {0b00: 0.5, 0b01: 0.5, 0b10: 0.5, 0b11: 0.5}
    psi = Wavefunction(amps, n_qubits=2)
    rho = reduced_density_matrix(psi, [0], [1])
    value = negativity(rho)
    assert abs(value) <= 1e-12
    assert math.copysign(1.0, value) == 1.0


def test_bell_pair_negativity():
    psi = Wavefunction({0b00: math.sqrt(0.5), 0b11: math.sqrt(0.5)}, n_qubits=2)
    rho = reduced_density_matrix(psi, [0], [1])
    assert negativity(rho) == pytest.approx(0.5, abs=1e-14)


def test_negativity_partition_argument():
    psi = w_state(5)
    rho = reduced_density_matrix(psi, [0, 1], [2])
    base = negativity(rho)
    assert negativity(rho, partition=((0, 1), (2,))) == pytest.approx(base, abs=1e-14)
    # transposing the other factor gives the same spectrum
    assert negativity(rho, partition=((2,), (0, 1))) == pytest.approx(base, abs=1e-14)
    with pytest.raises(BadPartitionError):
        negativity(rho, partition=((0,), (1, 2)))


def test_rdm_validation():
    psi = w_state(5)
    with pytest.raises(OutOfRangeError):
        reduced_density_matrix(psi, [0, 0], [1])
    with pytest.raises(OutOfRangeError):
        reduced_density_matrix(psi, [0], [7])
    with pytest.raises(UnsupportedParametersError):
        reduced_density_matrix(psi, Region(0, 1), Region(2, 1))  # no lattice
    # the size guard watches the observed pattern count, not the nominal
    # 2^width: a W state reduces cheaply at any width, a dense state not
    dense = Wavefunction({m: 1.0 for m in range(1 << 15)}, n_qubits=16).normalized()
    with pytest.raises(TooLargeError):
        reduced_density_matrix(dense, list(range(15)), [15])
    assert MAX_RDM_DIM == 1 << 14


# ---------------------------------------------------------------------------
# regions on the edge lattice


def test_region_columns_wrap():
    region = Region(start=6, width=3)
    assert region.columns(8) == (6, 7, 0)
    assert Region(0, 2).overlaps(Region(1, 2), 8)
    assert not Region(0, 2).overlaps(Region(3, 2), 8)
    assert Region(7, 2).overlaps(Region(0, 1), 8)  # across the seam
    with pytest.raises(OutOfRangeError):
        Region(0, 0)


def test_overlapping_regions_rejected():
    psi = build_one_string_state(8, 2)
    with pytest.raises(RegionsOverlapError):
        reduced_density_matrix(psi, Region(0, 3), Region(2, 3))


# ---------------------------------------------------------------------------
# the one-string negativity and its lower bound


def test_one_string_negativity_closed_form():
    # Lx = 8, Ly = 2, two width-3 regions one column apart: the partial
    # transpose has a single negative eigenvalue (1 - sqrt(26)) / 32
    value, bound, passed = verify_negativity_bound(8, 2, 3, 1)
    assert value == pytest.approx((math.sqrt(26) - 1) / 16, abs=1e-12)
    assert bound == pytest.approx(1.0 / (8 * 6), abs=1e-15)
    assert passed
    assert value >= 1.0 / 48


def test_one_string_negativity_distance_independent():
    values = [verify_negativity_bound(10, 2, 3, d)[0] for d in (1, 2, 3)]
    assert values[0] == pytest.approx(0.141547594742265, abs=1e-12)
    assert max(values) - min(values) <= 1e-10
    # strictly: the value is identical, not merely close
    assert values[0] == values[1] == values[2]


def test_negativity_bound_formula():
    # the guaranteed floor is 1 / (Lx (Lx - 2)), from the fraction of
    # string positions straddling the cut
    for Lx in (8, 10, 12):
        _, bound, _ = verify_negativity_bound(Lx, 2, 3, 1)
        assert bound == pytest.approx(1.0 / (Lx * (Lx - 2)), abs=1e-15)


def test_geometry_guards():
    with pytest.raises(GeometryInfeasibleError):
        verify_negativity_bound(8, 2, 2, 1)  # region not taller than Ly
    with pytest.raises(GeometryInfeasibleError):
        verify_negativity_bound(8, 2, 3, 0)
    with pytest.raises(GeometryInfeasibleError):
        verify_negativity_bound(8, 2, 3, 2)  # no room left of the seam


def test_negativity_grows_from_zero_with_region_separation_only():
    # sanity: regions that cannot both intersect one cluster decouple; a
    # single column against a single column at maximal distance still
    # shares the string, so the value stays positive
    value, _, _ = verify_negativity_bound(10, 2, 3, 2)
    assert value > 0.1
