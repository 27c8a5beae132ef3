"""Moser isotopy between cohomologous symplectic forms on the torus.

Given closed nondegenerate 2-forms with equal periods, the difference
is exact and the classical Moser construction produces a path of
diffeomorphisms carrying one form to the other.  The generating vector
field solves a pointwise linear system against the interpolated form
and the particle flow is integrated with RK4 through trigonometric
interpolation, so the only error sources are time discretization and
coefficient truncation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, lsmr

from . import curvature as cv
from .almost_kahler import AlmostKahlerStructure
from .grid import (DiffeoField, GridFieldError, PeriodicGrid, TensorField,
                   apply_diff, fourier_eval, form_periods, grad_data,
                   hodge_decompose_2form, pullback, pullback_mixed_11,
                   sup_norm)

log = logging.getLogger(__name__)

PERIOD_TOL = 1e-8


class MoserError(ValueError):
    """Non-cohomologous inputs or a degenerate interpolant."""


@dataclass
class MoserReport:
    steps: int
    pullback_residual: float
    min_jacobian_det: float
    min_interpolant_det: float
    primitive_sup: float


def _vector_field(omega_t: np.ndarray, alpha: np.ndarray, d: int):
    """Pointwise solve of iota_X omega_t = -alpha: X^m = -alpha_j W^{jm}."""
    shape = omega_t.shape[:-2]
    w = omega_t.reshape(-1, d, d)
    dets = np.linalg.det(w)
    if np.min(np.abs(dets)) < 1e-12:
        raise MoserError("degenerate interpolant")
    winv = np.linalg.inv(w)
    x = -np.einsum('pj,pjm->pm', alpha.reshape(-1, d), winv, optimize=True)
    return x.reshape(shape + (d,)), float(np.min(np.abs(dets)))


def _pullback_pieces(grid, omega1, u):
    """Sampled pullback data for the map x -> x + u(x).

    Returns (residual basis fields): omega1 at the mapped points, the
    Jacobian of the interpolated displacement, and the mapped points.
    """
    d = grid.dim
    pts = grid.points().reshape(grid.shape + (d,))
    mapped = np.mod(pts + u, 1.0).reshape(-1, d)
    w_at, _ = fourier_eval(grid, omega1.data, mapped)
    w_at = w_at.reshape(grid.shape + (d, d))
    jac = grad_data(grid, u).copy()             # (..., i, a) = del_i u^a
    idx = np.arange(d)
    jac[..., idx, idx] += 1.0                   # (..., i, a) = J^a_i
    return w_at, jac, mapped


def _refine_displacement(grid, omega0, omega1, u, target=1e-8,
                         max_newton=8, lsqr_iters=600):
    """Gauss-Newton polish of the sampled pullback residual.

    The time integration leaves a residual at the truncation level of
    the displacement's Fourier tail.  The sampled identity
    omega1(x + u) J J = omega0 is a system in the samples of u
    themselves, solved by matrix-free least-squares Newton steps.  For
    large perturbations the mean-zero branch is rank-deficient at the
    Nyquist bin; in that case the translation freedom of the Moser map
    is used: the same system sampled at half-cell offsets along a
    coordinate axis is solvable, so shifted branches are tried until
    one converges.
    """
    d = grid.dim
    npts = int(np.prod(grid.shape))
    dw = grad_data(grid, omega1.data)           # (..., c, a, b)

    def residual(uc):
        w_at, jac, mapped = _pullback_pieces(grid, omega1, uc)
        f = np.einsum('...ab,...ia,...jb->...ij', w_at, jac, jac,
                      optimize=True) - omega0.data
        return f, w_at, jac, mapped

    def gauss_newton(u0, pin_mean):
        uc = u0.copy()
        best = None
        for it in range(max_newton):
            f, w_at, jac, mapped = residual(uc)
            rnorm = float(np.max(np.abs(f)))
            if best is None or rnorm < best[0]:
                best = (rnorm, uc.copy())
            if rnorm <= target or rnorm > 10.0 * best[0]:
                break
            dw_at, _ = fourier_eval(grid, dw, mapped)
            dw_at = dw_at.reshape(grid.shape + (d, d, d))

            def matvec(x):
                v = x.reshape(grid.shape + (d,))
                dv = grad_data(grid, v)                   # (..., i, a)
                out = np.einsum('...cab,...c,...ia,...jb->...ij', dw_at, v,
                                jac, jac, optimize=True)
                out += np.einsum('...ab,...ia,...jb->...ij', w_at, dv, jac,
                                 optimize=True)
                out += np.einsum('...ab,...ia,...jb->...ij', w_at, jac, dv,
                                 optimize=True)
                return out.ravel()

            def rmatvec(y):
                gmat = y.reshape(grid.shape + (d, d))
                out = np.einsum('...cab,...ia,...jb,...ij->...c', dw_at,
                                jac, jac, gmat, optimize=True)
                m = np.einsum('...ab,...jb,...ij->...ia', w_at, jac, gmat,
                              optimize=True)
                m += np.einsum('...ab,...ia,...ij->...jb', w_at, jac, gmat,
                               optimize=True)
                # adjoint of v -> grad v: D antisymmetric, so D^T = -D
                for a in range(d):
                    out -= apply_diff(grid, m[..., a, :], a)
                return out.ravel()

            op = LinearOperator((d * d * npts, d * npts), matvec=matvec,
                                rmatvec=rmatvec)
            sol = lsmr(op, -f.ravel(), maxiter=lsqr_iters, atol=1e-13,
                       btol=1e-13)[0]
            delta = sol.reshape(grid.shape + (d,))
            if pin_mean:
                delta = delta - delta.reshape(-1, d).mean(axis=0)
            if np.max(np.abs(delta)) < 1e-16:
                break
            uc = uc + delta
        f, _, _, _ = residual(uc)
        rnorm = float(np.max(np.abs(f)))
        if rnorm < best[0]:
            best = (rnorm, uc)
        return best

    best = gauss_newton(u, pin_mean=False)
    if best[0] > target:
        # stalled on the mean-zero branch; walk the half-shift branches
        half = 1.0 / (2 * grid.res)
        pts = grid.points().reshape(grid.shape + (d,))
        for axis in range(d):
            for sign in (1.0, -1.0):
                shift = np.zeros(d)
                shift[axis] = sign * half
                moved = np.mod((pts + shift).reshape(-1, d), 1.0)
                u_s, _ = fourier_eval(grid, u, moved)
                u0 = u_s.reshape(grid.shape + (d,)) + shift
                cand = gauss_newton(u0, pin_mean=True)
                if cand[0] < best[0]:
                    best = cand
                if best[0] <= target:
                    break
            if best[0] <= target:
                break
    log.info("moser refinement: residual %.3e after polish", best[0])
    return best[1]


def moser_isotopy(omega0: TensorField, omega1: TensorField, steps: int = 32,
                  return_report: bool = False, refine: bool = True):
    """Diffeomorphism phi with pullback(omega1, phi) = omega0.

    RK4 over the linear path omega_t = omega0 + t (omega1 - omega0);
    particle positions start at the grid points, so the displacement is
    itself a grid field and the Jacobian can be tracked along the way.
    """
    grid = omega0.grid
    d = grid.dim
    if steps < 1:
        raise MoserError("steps must be >= 1")
    p0 = form_periods(omega0)
    p1 = form_periods(omega1)
    drift = float(np.max(np.abs(p1 - p0)))
    if drift > PERIOD_TOL:
        raise MoserError(f"not cohomologous: period mismatch {drift:.3e}")

    delta = omega1 - omega0
    harmonic, alpha = hodge_decompose_2form(delta)
    hsup = sup_norm(harmonic)
    if hsup > 1e-10:
        raise MoserError(f"not cohomologous: harmonic residue {hsup:.3e}")

    def x_field(t):
        wt = omega0.data + t * delta.data
        return _vector_field(wt, alpha.data, d)

    pts = grid.points().reshape(grid.shape + (d,))
    y = pts.copy()
    h = 1.0 / steps
    min_jac = np.inf
    min_det = np.inf

    def eval_x(t, positions):
        nonlocal min_det
        xf, det = x_field(t)
        min_det = min(min_det, det)
        vals, _ = fourier_eval(grid, xf, positions.reshape(-1, d))
        return vals.reshape(positions.shape)

    for n in range(steps):
        t = n * h
        k1 = eval_x(t, y)
        k2 = eval_x(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = eval_x(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = eval_x(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        du = grad_data(grid, y - pts)
        jac = np.swapaxes(du, -1, -2).copy()
        idx = np.arange(d)
        jac[..., idx, idx] += 1.0
        jmin = float(np.min(np.linalg.det(jac)))
        min_jac = min(min_jac, jmin)
        if jmin < 1e-6:
            raise MoserError(
                f"Jacobian degeneration at path time {t + h:.4f}: "
                f"min det {jmin:.3e}")

    u = y - pts
    if refine:
        u = _refine_displacement(grid, omega0, omega1, u)
    phi = DiffeoField(grid, TensorField(grid, 1, 0, u, check=False))
    min_jac = min(min_jac, float(np.min(phi.jacobian_det())))
    residual = sup_norm(pullback(omega1, phi) - omega0)
    log.info("moser_isotopy: %d steps, pullback residual %.3e, "
             "min jac det %.6f", steps, residual, min_jac)
    if return_report:
        return phi, MoserReport(steps, residual, min_jac, min_det,
                                sup_norm(alpha))
    return phi


def pullback_structure(s: AlmostKahlerStructure,
                       phi: DiffeoField) -> AlmostKahlerStructure:
    """Pull back a compatible triple; compatibility survives by naturality."""
    g = pullback(s.g, phi)
    w = pullback(s.omega, phi)
    j = pullback_mixed_11(s.J, phi)
    return AlmostKahlerStructure(g, w, j, check=True, tol=1e-6, dw_tol=1e-6)


def nijenhuis_naturality_residual(s: AlmostKahlerStructure,
                                  phi: DiffeoField) -> float:
    """sup |N(phi*J) - phi*(N(J))|; zero for exact pullbacks."""
    n_direct = cv.nijenhuis(pullback_mixed_11(s.J, phi))
    n_orig = cv.nijenhuis(s.J)
    grid = s.grid
    d = grid.dim
    # pull back the (1,2) tensor: one contravariant and two covariant slots
    vals, _ = fourier_eval(grid, n_orig.data, phi.mapped_points())
    vals = vals.reshape(grid.shape + (d, d, d))
    jac = phi.jacobian()
    jinv = np.linalg.inv(jac.reshape(-1, d, d)).reshape(jac.shape)
    pulled = np.einsum('...km,...mab,...ai,...bj->...kij', jinv, vals, jac,
                       jac, optimize=True)
    return sup_norm(n_direct.data - pulled)
