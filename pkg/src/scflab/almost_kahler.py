"""Almost Kahler structures (g, omega, J) on the flat torus.

Index conventions, fixed once and validated by the structure invariants:

  coordinates ordered (x_1, y_1, ..., x_n, y_n), axis 2i = x_i;
  omega0(dx_i, dy_i) = +1,  J0 dx_i = dy_i  (so J0^{2i+1}_{2i} = +1);
  g_ij = omega_ik J^k_j, equivalently omega_ij = -g_ik J^k_j.

With this convention the matrix whose polar part gives the compatible
almost complex structure is M = omega^{-1} g (not g^{-1} omega, which
lands on -J).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .grid import (GridFieldError, PeriodicGrid, TensorField, constant_field,
                   exterior_d_2form, form_periods, sup_norm)

log = logging.getLogger(__name__)


class CompatibilityError(ValueError):
    """A (metric, symplectic) pair with no compatible J, or broken invariants."""


def _mat(f: TensorField) -> np.ndarray:
    """Raw components as a (npoints, d, d) stack."""
    d = f.grid.dim
    return f.data.reshape(-1, d, d)


class AlmostKahlerStructure:
    """Compatible triple: metric g, symplectic form omega, complex structure J."""

    __slots__ = ("g", "omega", "J")

    def __init__(self, g: TensorField, omega: TensorField, J: TensorField,
                 check: bool = True, tol: float = 1e-10, dw_tol: float = 1e-8):
        self.g = g
        self.omega = omega
        self.J = J
        if check:
            self.validate(tol=tol, dw_tol=dw_tol)

    @property
    def grid(self) -> PeriodicGrid:
        return self.g.grid

    def validate(self, tol: float = 1e-10, dw_tol: float = 1e-8):
        if (self.g.p, self.g.q) != (0, 2) or (self.omega.p, self.omega.q) != (0, 2) \
                or (self.J.p, self.J.q) != (1, 1):
            raise CompatibilityError("wrong valences for (g, omega, J)")
        evs = np.linalg.eigvalsh(_mat(self.g))
        if np.min(evs) <= 0.0:
            raise CompatibilityError(
                f"metric not positive definite (min eigenvalue {np.min(evs):.3e})")
        dw = sup_norm(exterior_d_2form(self.omega))
        if dw > dw_tol:
            raise CompatibilityError(f"omega not closed: sup|d omega| = {dw:.3e}")
        defect = compatibility_defect(self)
        if defect > tol:
            raise CompatibilityError(f"compatibility defect {defect:.3e} > {tol:.1e}")

    def copy(self) -> "AlmostKahlerStructure":
        return AlmostKahlerStructure(self.g.copy(), self.omega.copy(),
                                     self.J.copy(), check=False)


@dataclass
class FlatCYReference:
    """The constant flat Kahler structure used as flow target and gauge background."""

    structure: AlmostKahlerStructure
    christoffel_ref: TensorField  # (1,2); zero for the standard flat structure

    @property
    def grid(self) -> PeriodicGrid:
        return self.structure.grid

    def validate(self, ricci_tol: float = 1e-10, nijenhuis_tol: float = 1e-12):
        from . import curvature
        n = curvature.nijenhuis(self.structure.J)
        if sup_norm(n) > nijenhuis_tol:
            raise CompatibilityError("reference J is not integrable")
        gamma = curvature.levi_civita(self.structure.g)
        bundle = curvature.riemann_ricci(self.structure.g, gamma)
        if sup_norm(bundle.ricci) > ricci_tol:
            raise CompatibilityError("reference metric is not Ricci-flat")


def flat_components(dim: int):
    """Constant (g0, omega0, J0) component matrices."""
    g0 = np.eye(dim)
    w0 = np.zeros((dim, dim))
    j0 = np.zeros((dim, dim))
    for i in range(dim // 2):
        x, y = 2 * i, 2 * i + 1
        w0[x, y], w0[y, x] = 1.0, -1.0
        j0[y, x], j0[x, y] = 1.0, -1.0  # J dx = dy, J dy = -dx
    return g0, w0, j0


def standard_flat(grid: PeriodicGrid) -> FlatCYReference:
    """The standard flat Calabi-Yau structure on the unit torus."""
    g0, w0, j0 = flat_components(grid.dim)
    g = constant_field(grid, 0, 2, g0, "sym")
    w = constant_field(grid, 0, 2, w0, "antisym")
    j = constant_field(grid, 1, 1, j0)
    structure = AlmostKahlerStructure(g, w, j)
    gamma = TensorField(grid, 1, 2,
                        np.zeros(grid.shape + (grid.dim,) * 3), check=False)
    return FlatCYReference(structure, gamma)


# ---------------------------------------------------------------------------
# compatibility algebra
# ---------------------------------------------------------------------------

def metric_from(omega: TensorField, J: TensorField) -> TensorField:
    """g_ij = omega_ik J^k_j."""
    data = np.einsum('...ik,...kj->...ij', omega.data, J.data)
    return TensorField(omega.grid, 0, 2, data, "sym", check=False)


def omega_from(g: TensorField, J: TensorField) -> TensorField:
    """omega_ij = -g_ik J^k_j."""
    data = -np.einsum('...ik,...kj->...ij', g.data, J.data)
    return TensorField(g.grid, 0, 2, data, "antisym", check=False)


def compatibility_defect(s: AlmostKahlerStructure) -> float:
    """Pointwise sup-entry defect of the three compatibility identities."""
    d = s.grid.dim
    gwj = s.g.data - np.einsum('...ik,...kj->...ij', s.omega.data, s.J.data)
    jj = np.einsum('...ik,...kj->...ij', s.J.data, s.J.data)
    jj[..., np.arange(d), np.arange(d)] += 1.0
    wjj = np.einsum('...kl,...ki,...lj->...ij', s.omega.data, s.J.data,
                    s.J.data) - s.omega.data
    per_point = (np.max(np.abs(gwj.reshape(-1, d * d)), axis=1)
                 + np.max(np.abs(jj.reshape(-1, d * d)), axis=1)
                 + np.max(np.abs(wjj.reshape(-1, d * d)), axis=1))
    return float(np.max(per_point))


def compatible_J_polar(g_ref: TensorField, omega: TensorField,
                       check_tol: float = 1e-10) -> TensorField:
    """Compatible almost complex structure by pointwise polar retraction.

    J is the isometry factor of M = omega^{-1} g_ref, computed through a
    symmetric eigendecomposition in the g_ref inner product.  The result
    squares to -Id, preserves omega, and omega J is positive definite.
    """
    d = g_ref.grid.dim
    g = _mat(g_ref)
    w = _mat(omega)

    evg, qg = np.linalg.eigh(g)
    if np.min(evg) <= 0.0:
        raise CompatibilityError("reference metric not positive definite")
    sq = np.sqrt(evg)
    gsq = np.einsum('xik,xk,xjk->xij', qg, sq, qg)
    gisq = np.einsum('xik,xk,xjk->xij', qg, 1.0 / sq, qg)

    try:
        winv = np.linalg.inv(w)
    except np.linalg.LinAlgError as exc:
        raise CompatibilityError("incompatible pair: omega degenerate") from exc
    m = winv @ g
    mhat = gsq @ m @ gisq
    s = -mhat @ mhat
    s = 0.5 * (s + np.swapaxes(s, -1, -2))
    evs, qs = np.linalg.eigh(s)
    if np.min(evs) <= 1e-14:
        raise CompatibilityError(
            "incompatible pair: -M^2 not positive definite "
            f"(min eigenvalue {np.min(evs):.3e})")
    sinv = np.einsum('xik,xk,xjk->xij', qs, evs**-0.5, qs)
    jhat = mhat @ sinv
    j = gisq @ jhat @ gsq

    jfield = TensorField(g_ref.grid, 1, 1,
                         j.reshape(g_ref.grid.shape + (d, d)), check=False)
    jj = j @ j
    jj[:, np.arange(d), np.arange(d)] += 1.0
    err = np.max(np.abs(jj))
    if err > check_tol:
        raise CompatibilityError(f"polar retraction failed: |J^2+Id| = {err:.3e}")
    return jfield


def deform_J_along_path(ref: AlmostKahlerStructure, omega_target: TensorField,
                        steps: int = 16) -> AlmostKahlerStructure:
    """Carry J along the linear path from ref.omega to omega_target.

    At each path node the previous metric calibrates a fresh polar
    retraction and the metric is rebuilt from the new pair, so the
    output triple is compatible by construction.
    """
    if steps < 1:
        raise GridFieldError("steps must be >= 1")
    g = ref.g
    j = ref.J
    w = ref.omega
    delta = omega_target - ref.omega
    for k in range(1, steps + 1):
        t = k / steps
        wt = ref.omega + t * delta
        try:
            j = compatible_J_polar(g, wt)
        except CompatibilityError as exc:
            raise CompatibilityError(
                f"degenerate interpolant at t = {t:.4f}: {exc}") from exc
        g = metric_from(wt, j)
        w = wt
    out = AlmostKahlerStructure(g, w, j, check=False)
    dj = sup_norm(j - ref.J)
    dw = sup_norm(delta)
    if dw > 0:
        log.info("deform_J_along_path: |J'-J| = %.3e, |omega'-omega| = %.3e, "
                 "ratio C = %.3f", dj, dw, dj / dw)
    return out


# ---------------------------------------------------------------------------
# perturbation builder
# ---------------------------------------------------------------------------

@dataclass
class PerturbationTerm:
    """One closed 2-form contribution.

    kind "exact": d(amp * sin(2 pi k.x) dx^{slot[1]}), slot[0] labels the
    dominant pairing axis.  kind "harmonic": amp * dx^{slot[0]} ^ dx^{slot[1]}.
    """

    k: tuple
    slot: tuple
    amp: float
    kind: str = "exact"


def build_perturbation(grid: PeriodicGrid, terms) -> TensorField:
    """Assemble a closed 2-form from exact and harmonic mode terms."""
    d = grid.dim
    data = np.zeros(grid.shape + (d, d))
    for term in terms:
        if term.kind not in ("exact", "harmonic"):
            raise GridFieldError(f"unknown perturbation kind {term.kind!r}")
        s0, s1 = term.slot
        if not (0 <= s0 < d and 0 <= s1 < d):
            raise GridFieldError(f"slot {term.slot} out of range")
        if term.kind == "harmonic":
            data[..., s0, s1] += term.amp
            data[..., s1, s0] -= term.amp
            continue
        k = np.asarray(term.k, dtype=np.int64)
        if k.shape != (d,):
            raise GridFieldError(f"mode vector {term.k} has wrong length")
        if np.max(np.abs(k)) >= grid.res // 2:
            raise GridFieldError(f"aliased mode {term.k} at res {grid.res}")
        phase = sum(k[a] * grid.coords(a) for a in range(d))
        cos = np.broadcast_to(np.cos(2 * np.pi * phase), grid.shape)
        # d(amp sin(2 pi k.x) dx^{s1}) = 2 pi amp k_i cos(2 pi k.x) dx^i ^ dx^{s1}
        for i in range(d):
            if k[i] == 0:
                continue
            contrib = 2 * np.pi * term.amp * k[i] * cos
            data[..., i, s1] += contrib
            data[..., s1, i] -= contrib
    out = TensorField(grid, 0, 2, data, "antisym")
    resid = sup_norm(exterior_d_2form(out))
    if resid > 1e-12:
        raise GridFieldError(f"perturbation not closed: {resid:.3e}")
    return out


def perturbation_periods(beta: TensorField) -> np.ndarray:
    return form_periods(beta)
