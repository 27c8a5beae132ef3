"""Compatible triples, polar retraction, path deformation, perturbations."""

import numpy as np
import pytest

from scflab.almost_kahler import (AlmostKahlerStructure, CompatibilityError,
                                  FlatCYReference, PerturbationTerm,
                                  build_perturbation, compatibility_defect,
                                  compatible_J_polar, deform_J_along_path,
                                  flat_components, metric_from, omega_from,
                                  perturbation_periods, standard_flat)
from scflab.grid import (GridFieldError, PeriodicGrid, TensorField,
                         constant_field, form_periods, sup_norm)

TWO_PI = 2.0 * np.pi


def _grid(dim=4, res=8):
    return PeriodicGrid(dim, res, "spectral")


# ---------------------------------------------------------------------------
# flat reference components
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("dim", [2, 4])
def test_flat_components_conventions(dim):
    g0, w0, j0 = flat_components(dim)
    assert np.array_equal(g0, np.eye(dim))
    for i in range(0, dim, 2):
        assert w0[i, i + 1] == 1.0 and w0[i + 1, i] == -1.0
        assert j0[i + 1, i] == 1.0 and j0[i, i + 1] == -1.0
    # g = omega J and J^2 = -Id
    assert np.array_equal(w0 @ j0, g0)
    assert np.array_equal(j0 @ j0, -np.eye(dim))


def test_standard_flat_validates(tolerance=1e-12):
    ref = standard_flat(_grid(4, 8))
    assert isinstance(ref, FlatCYReference)
    ref.validate()
    assert compatibility_defect(ref.structure) < tolerance


def test_metric_omega_roundtrip():
    ref = standard_flat(_grid(4, 8))
    s = ref.structure
    assert sup_norm(metric_from(s.omega, s.J) - s.g) < 1e-14
    assert sup_norm(omega_from(s.g, s.J) - s.omega) < 1e-14


# ---------------------------------------------------------------------------
# polar retraction
# ---------------------------------------------------------------------------

def test_polar_retraction_conformal_oracle():
    """On T^2 with omega = (1 + h) dx^dy and g_ref = Id, the calibrated
    compatible J is the standard rotation: A = g^{-1} omega is already
    (1 + h) J0 and the polar part drops the positive factor."""
    grid = _grid(2, 16)
    _, w0, j0 = flat_components(2)
    h = 0.1 * np.cos(TWO_PI * np.broadcast_to(grid.coords(0), grid.shape))
    data = (1.0 + h)[..., None, None] * w0
    omega = TensorField(grid, 0, 2, data, "antisym")
    gref = constant_field(grid, 0, 2, np.eye(2), "sym")
    j = compatible_J_polar(gref, omega)
    assert sup_norm(j - constant_field(grid, 1, 1, j0)) < 1e-12


def test_polar_retraction_general_properties():
    grid = _grid(4, 8)
    ref = standard_flat(grid)
    beta = build_perturbation(
        grid, [PerturbationTerm((1, 0, 0, 0), (0, 2), 0.02),
               PerturbationTerm((0, 1, 1, 0), (1, 3), 0.01)])
    omega = ref.structure.omega + beta
    j = compatible_J_polar(ref.structure.g, omega)
    jj = np.einsum('...ij,...jk->...ik', j.data, j.data)
    assert np.max(np.abs(jj + np.eye(4))) < 1e-12
    g = metric_from(omega, j)
    s = AlmostKahlerStructure(g, omega, j, check=False)
    assert compatibility_defect(s) < 1e-12
    # g is symmetric positive definite
    sym_defect = np.max(np.abs(g.data - np.swapaxes(g.data, -1, -2)))
    assert sym_defect < 1e-12
    eigs = np.linalg.eigvalsh(g.data.reshape(-1, 4, 4))
    assert np.min(eigs) > 0.5


def test_polar_retraction_rejects_degenerate_form():
    grid = _grid(2, 16)
    _, w0, _ = flat_components(2)
    h = np.broadcast_to(np.cos(TWO_PI * grid.coords(0)), grid.shape)
    data = (1.0 + 1.0 * h)[..., None, None] * w0   # vanishes at x = 1/2
    omega = TensorField(grid, 0, 2, data, "antisym")
    gref = constant_field(grid, 0, 2, np.eye(2), "sym")
    with pytest.raises(CompatibilityError):
        compatible_J_polar(gref, omega)


# ---------------------------------------------------------------------------
# path deformation
# ---------------------------------------------------------------------------

def test_deform_along_path_compatible_and_lipschitz():
    grid = _grid(4, 8)
    ref = standard_flat(grid)
    eps = 0.01
    beta = build_perturbation(grid, [PerturbationTerm((1, 0, 0, 0), (0, 2),
                                                      eps)])
    s = deform_J_along_path(ref.structure, ref.structure.omega + beta,
                            steps=16)
    assert compatibility_defect(s) < 1e-10
    assert sup_norm(s.omega - (ref.structure.omega + beta)) == 0.0
    # |J' - J0| <= C |omega' - omega0| with C of order one
    assert sup_norm(s.J - ref.structure.J) < 3.0 * sup_norm(beta)


def test_deform_path_step_refinement_converges():
    grid = _grid(4, 8)
    ref = standard_flat(grid)
    beta = build_perturbation(grid, [PerturbationTerm((1, 0, 0, 0), (0, 2),
                                                      0.02)])
    target = ref.structure.omega + beta
    s8 = deform_J_along_path(ref.structure, target, steps=8)
    s16 = deform_J_along_path(ref.structure, target, steps=16)
    s32 = deform_J_along_path(ref.structure, target, steps=32)
    d1 = sup_norm(s16.J - s8.J)
    d2 = sup_norm(s32.J - s16.J)
    assert d2 < 0.75 * d1


# ---------------------------------------------------------------------------
# perturbation builder
# ---------------------------------------------------------------------------

def test_exact_perturbation_closed_and_periodless():
    grid = _grid(4, 8)
    beta = build_perturbation(grid, [PerturbationTerm((1, 0, 0, 0), (0, 2),
                                                      0.05)])
    assert np.max(np.abs(perturbation_periods(beta))) < 1e-13
    # amplitude oracle: d(a sin(2 pi x0) dx2) peaks at 2 pi a
    assert abs(sup_norm(beta) - TWO_PI * 0.05) < 1e-12


def test_harmonic_perturbation_periods():
    grid = _grid(4, 8)
    beta = build_perturbation(grid, [PerturbationTerm((0, 0, 0, 0), (0, 2),
                                                      0.03, "harmonic")])
    periods = form_periods(beta)
    assert np.max(np.abs(periods)) == pytest.approx(0.03, abs=1e-14)
    assert sup_norm(beta) == pytest.approx(0.03, abs=1e-14)


def test_aliased_mode_rejected():
    grid = _grid(4, 8)
    with pytest.raises(GridFieldError):
        build_perturbation(grid, [PerturbationTerm((4, 0, 0, 0), (0, 2),
                                                   0.01)])


def test_bad_slot_and_kind_rejected():
    grid = _grid(4, 8)
    with pytest.raises(GridFieldError):
        build_perturbation(grid, [PerturbationTerm((1, 0, 0, 0), (0, 7),
                                                   0.01)])
    with pytest.raises(GridFieldError):
        build_perturbation(grid, [PerturbationTerm((1, 0, 0, 0), (0, 2),
                                                   0.01, "random")])


def test_structure_validation_catches_incompatible_triple():
    grid = _grid(4, 8)
    ref = standard_flat(grid)
    g_bad = constant_field(grid, 0, 2, 2.0 * np.eye(4), "sym")
    with pytest.raises(CompatibilityError):
        AlmostKahlerStructure(g_bad, ref.structure.omega, ref.structure.J,
                              check=True)
