"""Directed-percolation automata and the quantum states built from them.

The package has two halves that check each other:

* a stochastic half: probability-table automata, correlation estimators
  and scaling fits (:mod:`dpq.automata`, :mod:`dpq.observables`,
  :mod:`dpq.scaling`),
* an exact half: the trajectory-superposition wavefunctions, their parent
  Hamiltonian, entanglement measures and the dimer-model cousin
  (:mod:`dpq.qstate`, :mod:`dpq.hamiltonian`, :mod:`dpq.entanglement`,
  :mod:`dpq.kasteleyn`).

``python -m dpq`` exposes the command line driver.
"""

__version__ = "0.1.0"
