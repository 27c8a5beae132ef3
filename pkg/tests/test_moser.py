"""Moser isotopy: exactness, rejection of bad inputs, naturality."""

import numpy as np
import pytest

from scflab import curvature as cv
from scflab import moser as ms
from scflab.almost_kahler import (PerturbationTerm, build_perturbation,
                                  deform_J_along_path, standard_flat)
from scflab.grid import (PeriodicGrid, TensorField, fourier_eval, pullback,
                         sup_norm)

TWO_PI = 2.0 * np.pi


def _setup(dim=2, res=16):
    grid = PeriodicGrid(dim, res, "spectral")
    ref = standard_flat(grid)
    return grid, ref


def _perturbed_form(grid, ref, amp, slot=None, k=None):
    if slot is None:
        slot = (0, 2) if grid.dim == 4 else (0, 1)
    if k is None:
        k = (1,) + (0,) * (grid.dim - 1)
    beta = build_perturbation(grid, [PerturbationTerm(k, slot, amp)])
    return ref.structure.omega + beta


def test_identity_isotopy():
    grid, ref = _setup()
    phi = ms.moser_isotopy(ref.structure.omega, ref.structure.omega, steps=4)
    assert sup_norm(phi.displacement) < 1e-13


def test_exact_perturbation_t2():
    grid, ref = _setup(2, 16)
    omega1 = _perturbed_form(grid, ref, 0.05 / TWO_PI)
    phi, rep = ms.moser_isotopy(ref.structure.omega, omega1, steps=32,
                                return_report=True)
    assert rep.pullback_residual < 1e-8
    assert rep.min_jacobian_det > 0.9
    assert sup_norm(pullback(omega1, phi) - ref.structure.omega) < 1e-8


def test_literal_amplitude_example_t4():
    """amp = 0.05 directly (sup |omega' - omega| about 0.3): the branch
    refinement still reaches the discrete floor."""
    grid, ref = _setup(4, 16)
    omega1 = _perturbed_form(grid, ref, 0.05)
    phi, rep = ms.moser_isotopy(ref.structure.omega, omega1, steps=32,
                                return_report=True)
    assert rep.pullback_residual < 1e-6
    assert rep.min_jacobian_det > 0.5


def test_roundtrip_composition_t2():
    grid, ref = _setup(2, 16)
    omega0 = ref.structure.omega
    omega1 = _perturbed_form(grid, ref, 0.05 / TWO_PI)
    phi = ms.moser_isotopy(omega0, omega1, steps=32)     # phi^* w1 = w0
    psi = ms.moser_isotopy(omega1, omega0, steps=32)     # psi^* w0 = w1
    # compose: x -> psi(x) -> phi(psi(x)) should be the identity
    d = grid.dim
    pts = grid.points().reshape(-1, d)
    mid = np.mod(pts + psi.displacement.data.reshape(-1, d), 1.0)
    u_phi, _ = fourier_eval(grid, phi.displacement.data, mid)
    total = psi.displacement.data.reshape(-1, d) + u_phi
    err = np.max(np.abs(total - np.round(total)))
    assert err < 1e-5


def test_rejects_period_mismatch():
    grid, ref = _setup(2, 16)
    beta = build_perturbation(grid, [PerturbationTerm((0, 0), (0, 1), 0.02,
                                                      "harmonic")])
    with pytest.raises(ms.MoserError):
        ms.moser_isotopy(ref.structure.omega, ref.structure.omega + beta)


def test_rejects_zero_steps():
    grid, ref = _setup()
    with pytest.raises(ms.MoserError):
        ms.moser_isotopy(ref.structure.omega, ref.structure.omega, steps=0)


def test_pullback_structure_stays_compatible():
    grid, ref = _setup(4, 16)
    omega1 = _perturbed_form(grid, ref, 0.05 / TWO_PI)
    s = deform_J_along_path(ref.structure, omega1, steps=8)
    phi = ms.moser_isotopy(ref.structure.omega, omega1, steps=32)
    pulled = ms.pullback_structure(s, phi)
    from scflab.almost_kahler import compatibility_defect
    assert compatibility_defect(pulled) < 1e-9
    assert sup_norm(pulled.omega - ref.structure.omega) < 1e-6


def test_nijenhuis_naturality():
    grid, ref = _setup(4, 16)
    omega1 = _perturbed_form(grid, ref, 0.05 / TWO_PI)
    s = deform_J_along_path(ref.structure, omega1, steps=8)
    phi = ms.moser_isotopy(ref.structure.omega, omega1, steps=32)
    assert ms.nijenhuis_naturality_residual(s, phi) < 1e-9


def test_sup_N_is_diffeomorphism_invariant():
    grid, ref = _setup(4, 16)
    omega1 = _perturbed_form(grid, ref, 0.05 / TWO_PI)
    s = deform_J_along_path(ref.structure, omega1, steps=8)
    phi = ms.moser_isotopy(ref.structure.omega, omega1, steps=32)
    from scflab.grid import pullback_mixed_11
    n0 = sup_norm(cv.nijenhuis(s.J))
    n1 = sup_norm(cv.nijenhuis(pullback_mixed_11(s.J, phi)))
    assert abs(n0 - n1) < 1e-6 * max(1.0, n0)
