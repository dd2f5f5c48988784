"""Walk the automaton-to-quantum-state correspondence on a small lattice.

Three checks on a 4x2 periodic system at p2 = p3 = 0.6:
  1. the local tensor is an isometry;
  2. squared state amplitudes reproduce trajectory probabilities;
  3. the parent Hamiltonian annihilates the state, and at p1 = 0 its
     kernel on a 3x3 system is two-dimensional (vacuum + winding state).
"""

import numpy as np

from dpq import automata, hamiltonian, qstate

rule = automata.dk_rule(0.0, 0.6, 0.6)

resid = qstate.check_isometry(qstate.build_dk_tensor(rule))
print(f"isometry residual: {resid:.2e}")

psi = qstate.build_state_periodic(rule, 4, 2)
print(f"4x2 periodic state: {len(psi.amps)} basis configurations, norm {psi.norm():.12f}")
print(f"vacuum weight |<0|psi>|^2 = {psi.amplitude(0)**2:.12f}")

lattice = automata.LatticeSpec(Lx=3, Ly=3, boundary_x="periodic", boundary_y="periodic")
rule33 = automata.dk_rule(0.0, 0.7, 0.7)
H = hamiltonian.build_parent_hamiltonian(rule33, lattice)
psi33 = qstate.build_state_periodic(rule33, 3, 3)
print(f"3x3 parent Hamiltonian: ||H|psi>|| = {np.linalg.norm(H.matrix @ psi33.to_dense()):.2e}")

space = hamiltonian.ground_space(H, k=6)
print(f"kernel dimension: {space.kernel_dim}")
print(f"lowest eigenvalues: {[f'{v:.6f}' for v in space.eigenvalues[:4]]}")

vac, gs = qstate.split_vac_gs(psi33)
kernel = space.vectors[:, : space.kernel_dim]
for name, state in (("vacuum", None), ("winding ground state", gs)):
    vec = np.zeros(1 << lattice.n_edges)
    if state is None:
        vec[0] = 1.0
    else:
        vec = state.to_dense()
    c = kernel.T @ vec
    print(f"kernel weight of the {name}: {float(c @ c):.12f}")
