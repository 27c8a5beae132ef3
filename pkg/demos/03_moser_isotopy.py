"""
The Moser trick, numerically
============================

Two cohomologous symplectic forms on the torus are related by a
diffeomorphism.  The construction integrates the flow of the vector
field solving iota_X omega_t = -alpha along the linear path of forms;
a Gauss-Newton polish then pushes the sampled pullback residual down
to the discrete floor.
"""

import numpy as np

from scflab import moser as ms
from scflab.almost_kahler import (PerturbationTerm, build_perturbation,
                                  standard_flat)
from scflab.grid import PeriodicGrid, pullback, sup_norm

grid = PeriodicGrid(2, 16, "spectral")
ref = standard_flat(grid)
omega0 = ref.structure.omega

# an exact perturbation keeps the periods, so Moser applies
beta = build_perturbation(grid, [PerturbationTerm((1, 0), (0, 1), 0.008)])
omega1 = omega0 + beta

phi, report = ms.moser_isotopy(omega0, omega1, steps=32, return_report=True)
print("pullback residual  :", report.pullback_residual)
print("min Jacobian det   :", report.min_jacobian_det)
print("primitive sup norm :", report.primitive_sup)

# check the defining property directly
print("sup |phi^* omega1 - omega0| =",
      sup_norm(pullback(omega1, phi) - omega0))

# a harmonic (constant) perturbation changes the cohomology class and
# is correctly rejected
gamma = build_perturbation(grid, [PerturbationTerm((0, 0), (0, 1), 0.01,
                                                   "harmonic")])
try:
    ms.moser_isotopy(omega0, omega0 + gamma)
except ms.MoserError as exc:
    print("harmonic shift rejected:", exc)
