"""Connections, curvature tensors and the flow source terms.

Raw component layout (grid axes elided):

  metric derivative   dg[a, i, j]   = del_a g_ij
  Christoffel         gamma[k, i, j] with first lower slot = direction
  covariant dJ        DJ[a, m, j]   = D_a J^m_j
  Riemann             R[i, j, k, l] = R^i_jkl

Curvature of any connection uses the single coordinate formula

  R^i_jkl = del_k G^i_lj - del_l G^i_kj + G^i_km G^m_lj - G^i_lm G^m_kj,

valid for non-symmetric coefficients, so the Levi-Civita and Chern
branches share one code path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .almost_kahler import AlmostKahlerStructure, FlatCYReference
from .grid import TensorField, grad_data, sup_norm

EINS = dict(optimize=True)


class CurvatureError(ValueError):
    pass


@dataclass
class ConnectionCoeffs:
    gamma: TensorField          # (1,2)
    flavor: str                 # "levi-civita" | "chern"

    def validate(self, tol: float = 1e-12):
        if self.flavor == "levi-civita":
            g = self.gamma.data
            err = np.max(np.abs(g - np.swapaxes(g, -1, -2)))
            if err > tol:
                raise CurvatureError(
                    f"Levi-Civita coefficients not lower-symmetric: {err:.3e}")


@dataclass
class CurvatureBundle:
    riemann: TensorField = None          # (1,3)
    ricci: TensorField = None            # (0,2) sym
    chern_curvature: TensorField = None  # (1,3)
    chern_ricci: TensorField = None      # (0,2) antisym


def inverse_metric(g: TensorField) -> np.ndarray:
    d = g.grid.dim
    try:
        return np.linalg.inv(g.data.reshape(-1, d, d)).reshape(g.data.shape)
    except np.linalg.LinAlgError as exc:
        dets = np.linalg.det(g.data.reshape(-1, d, d))
        where = int(np.argmin(np.abs(dets)))
        raise CurvatureError(f"singular metric at grid point {where}") from exc


# ---------------------------------------------------------------------------
# Levi-Civita connection and its curvature
# ---------------------------------------------------------------------------

def levi_civita(g: TensorField) -> ConnectionCoeffs:
    """Christoffel symbols of a positive definite metric field."""
    ginv = inverse_metric(g)
    dg = grad_data(g.grid, g.data)
    # T_lij = del_i g_lj + del_j g_il - del_l g_ij
    t = (np.moveaxis(dg, [-3, -2, -1], [-2, -3, -1])
         + np.moveaxis(dg, [-3, -2, -1], [-1, -2, -3])
         - dg)
    gamma = 0.5 * np.einsum('...kl,...lij->...kij', ginv, t, **EINS)
    return ConnectionCoeffs(TensorField(g.grid, 1, 2, gamma, check=False),
                            "levi-civita")


def metric_compatibility_residual(g: TensorField, conn: ConnectionCoeffs) -> float:
    """sup |D_a g_ij| for the given connection."""
    dg = grad_data(g.grid, g.data)
    gm = conn.gamma.data
    cov = dg \
        - np.einsum('...mai,...mj->...aij', gm, g.data, **EINS) \
        - np.einsum('...maj,...im->...aij', gm, g.data, **EINS)
    return sup_norm(cov)


def curvature_of_connection(conn: ConnectionCoeffs) -> TensorField:
    """R^i_jkl of arbitrary (possibly torsionful) connection coefficients."""
    gm = conn.gamma.data
    grid = conn.gamma.grid
    dgm = grad_data(grid, gm)  # (..., p, i, k, j) = del_p G^i_kj
    # del_k G^i_lj - del_l G^i_kj
    r = np.einsum('...kilj->...ijkl', dgm) - np.einsum('...likj->...ijkl', dgm)
    r += np.einsum('...ikm,...mlj->...ijkl', gm, gm, **EINS)
    r -= np.einsum('...ilm,...mkj->...ijkl', gm, gm, **EINS)
    return TensorField(grid, 1, 3, r, check=False)


def riemann_ricci(g: TensorField, conn: ConnectionCoeffs) -> CurvatureBundle:
    """Riemann and Ricci tensors of the Levi-Civita connection."""
    riemann = curvature_of_connection(conn)
    ricci = np.einsum('...ijil->...jl', riemann.data)
    ricci = 0.5 * (ricci + np.swapaxes(ricci, -1, -2))
    return CurvatureBundle(
        riemann=riemann,
        ricci=TensorField(g.grid, 0, 2, ricci, "sym", check=False))


def scalar_curvature(g: TensorField, bundle: CurvatureBundle) -> TensorField:
    ginv = inverse_metric(g)
    s = np.einsum('...ij,...ij->...', ginv, bundle.ricci.data, **EINS)
    return TensorField(g.grid, 0, 0, s, check=False)


# ---------------------------------------------------------------------------
# almost complex machinery
# ---------------------------------------------------------------------------

def nijenhuis(J: TensorField) -> TensorField:
    """Integrability obstruction of J, antisymmetric in its lower slots."""
    dj = grad_data(J.grid, J.data)  # (..., a, k, j) = del_a J^k_j
    jd = J.data
    n = np.einsum('...mi,...mkj->...kij', jd, dj, **EINS)
    n -= np.einsum('...mj,...mki->...kij', jd, dj, **EINS)
    curl = np.einsum('...imj->...mij', dj) - np.einsum('...jmi->...mij', dj)
    n -= np.einsum('...km,...mij->...kij', jd, curl, **EINS)
    return TensorField(J.grid, 1, 2, n, check=False)


def covariant_derivative_J(J: TensorField, conn: ConnectionCoeffs) -> np.ndarray:
    """DJ[..., a, m, j] = D_a J^m_j."""
    dj = grad_data(J.grid, J.data)
    gm = conn.gamma.data
    return dj \
        + np.einsum('...map,...pj->...amj', gm, J.data, **EINS) \
        - np.einsum('...paj,...mp->...amj', gm, J.data, **EINS)


def chern_connection(s: AlmostKahlerStructure) -> ConnectionCoeffs:
    """Connection preserving both g and J: coefficients of D - (1/2) J (DJ)."""
    lc = levi_civita(s.g)
    dj = covariant_derivative_J(s.J, lc)
    gamma = lc.gamma.data - 0.5 * np.einsum('...km,...imj->...kij',
                                            s.J.data, dj, **EINS)
    return ConnectionCoeffs(TensorField(s.grid, 1, 2, gamma, check=False),
                            "chern")


def connection_preserves_J_residual(J: TensorField, conn: ConnectionCoeffs) -> float:
    return sup_norm(covariant_derivative_J(J, conn))


def chern_torsion_11_residual(s: AlmostKahlerStructure) -> float:
    """sup of the J-(1,1) part of the Chern torsion (should vanish)."""
    gm = chern_connection(s).gamma.data
    t = gm - np.swapaxes(gm, -1, -2)  # T^k_ij = G^k_ij - G^k_ji
    tjj = np.einsum('...kmn,...mi,...nj->...kij', t, s.J.data, s.J.data, **EINS)
    return sup_norm(0.5 * (t + tjj))


def chern_ricci(s: AlmostKahlerStructure,
                bundle: CurvatureBundle = None) -> TensorField:
    """Trace of the Chern curvature against J; a closed 2-form.

    On Kahler structures this equals twice the Ricci form Rc(J., .),
    matching the metric equation of the flow under compatibility.
    """
    conn = chern_connection(s)
    omega_c = curvature_of_connection(conn)
    p = np.einsum('...ijkl,...ji->...kl', omega_c.data, s.J.data, **EINS)
    p = 0.5 * (p - np.swapaxes(p, -1, -2))
    if bundle is not None:
        bundle.chern_curvature = omega_c
    return TensorField(s.grid, 0, 2, p, "antisym", check=False)


def ricci_form(s: AlmostKahlerStructure, ricci: TensorField) -> TensorField:
    """rho(X, Y) = Rc(JX, Y)."""
    rho = np.einsum('...mk,...ml->...kl', s.J.data, ricci.data, **EINS)
    return TensorField(s.grid, 0, 2, 0.5 * (rho - np.swapaxes(rho, -1, -2)),
                       "antisym", check=False)


# ---------------------------------------------------------------------------
# flow source terms
# ---------------------------------------------------------------------------

def flow_source_terms(s: AlmostKahlerStructure, lc: ConnectionCoeffs = None,
                      bundle: CurvatureBundle = None, dj: np.ndarray = None):
    """The quadratic first-order terms and the Ricci commutator.

    Returns (B1, B2, calN, calR) as TensorFields: two symmetric (0,2)
    contractions of DJ x DJ, the (1,1) cubic contraction, and the
    commutator of J with the Ricci endomorphism.
    """
    if lc is None:
        lc = levi_civita(s.g)
    if bundle is None:
        bundle = riemann_ricci(s.g, lc)
    if dj is None:
        dj = covariant_derivative_J(s.J, lc)
    g = s.g.data
    ginv = inverse_metric(s.g)
    grid = s.grid

    # A[a, k, n] = g_mn D_a J^m_k
    a = np.einsum('...mn,...amk->...akn', g, dj, **EINS)
    b1 = np.einsum('...kl,...ikn,...jnl->...ij', ginv, a, dj, **EINS)
    b2 = np.einsum('...kl,...kin,...lnj->...ij', ginv, a, dj, **EINS)
    b1 = 0.5 * (b1 + np.swapaxes(b1, -1, -2))
    b2 = 0.5 * (b2 + np.swapaxes(b2, -1, -2))

    # calN^j_i = g^jk g_mn g^pq D_p J^m_r J^r_i D_q J^n_k
    v = np.einsum('...pmr,...ri->...pmi', dj, s.J.data, **EINS)
    w = np.einsum('...pq,...qnk->...pnk', ginv, dj, **EINS)
    cn = np.einsum('...jk,...mn,...pmi,...pnk->...ji', ginv, g, v, w, **EINS)

    rcup = np.einsum('...jm,...mk->...jk', ginv, bundle.ricci.data, **EINS)
    cr = np.einsum('...ki,...jk->...ji', s.J.data, rcup, **EINS) \
        - np.einsum('...ki,...jk->...ji', rcup, s.J.data, **EINS)

    mk = lambda d, sym="none": TensorField(grid, 0, 2, d, sym, check=False)
    return (mk(b1, "sym"), mk(b2, "sym"),
            TensorField(grid, 1, 1, cn, check=False),
            TensorField(grid, 1, 1, cr, check=False))


def rough_laplacian_J(s: AlmostKahlerStructure, lc: ConnectionCoeffs = None,
                      dj: np.ndarray = None) -> TensorField:
    """g^pq D_p D_q J (the negative of the connection Laplacian D*D J)."""
    if lc is None:
        lc = levi_civita(s.g)
    if dj is None:
        dj = covariant_derivative_J(s.J, lc)
    gm = lc.gamma.data
    ginv = inverse_metric(s.g)
    ddj = grad_data(s.grid, dj)  # (..., p, q, m, k) = del_p (DJ)_{q m k}
    full = ddj \
        + np.einsum('...mpr,...qrk->...pqmk', gm, dj, **EINS) \
        - np.einsum('...rpq,...rmk->...pqmk', gm, dj, **EINS) \
        - np.einsum('...rpk,...qmr->...pqmk', gm, dj, **EINS)
    lap = np.einsum('...pq,...pqmk->...mk', ginv, full, **EINS)
    return TensorField(s.grid, 1, 1, lap, check=False)


# ---------------------------------------------------------------------------
# gauge vector field and Lie derivatives
# ---------------------------------------------------------------------------

def gauge_field(s: AlmostKahlerStructure, ref: FlatCYReference,
                lc: ConnectionCoeffs = None) -> TensorField:
    """X^k = g^ij (Gamma^k_ij - Gamma_ref^k_ij)."""
    if lc is None:
        lc = levi_civita(s.g)
    ginv = inverse_metric(s.g)
    diff = lc.gamma.data - ref.christoffel_ref.data
    x = np.einsum('...ij,...kij->...k', ginv, diff, **EINS)
    return TensorField(s.grid, 1, 0, x, check=False)


def gauge_field_alt(s: AlmostKahlerStructure, ref: FlatCYReference) -> TensorField:
    """The same vector field from omega^ij nabla^ref_i J^k_j.

    omega^ij is raised with the metric (equal to minus the matrix inverse
    of omega_ij for a compatible triple).
    """
    ginv = inverse_metric(s.g)
    winv = np.einsum('...ik,...kl,...lj->...ij', ginv, s.omega.data, ginv,
                     **EINS)
    gref = ref.christoffel_ref.data
    dj = grad_data(s.grid, s.J.data) \
        + np.einsum('...kap,...pj->...akj', gref, s.J.data, **EINS) \
        - np.einsum('...paj,...kp->...akj', gref, s.J.data, **EINS)
    x = np.einsum('...ij,...ikj->...k', winv, dj, **EINS)
    return TensorField(s.grid, 1, 0, x, check=False)


def gauge_equivalence_residual(s: AlmostKahlerStructure,
                               ref: FlatCYReference) -> float:
    return sup_norm(gauge_field(s, ref) - gauge_field_alt(s, ref))


def lie_derivative_g(x: TensorField, g: TensorField) -> TensorField:
    dg = grad_data(g.grid, g.data)
    dx = grad_data(g.grid, x.data)  # (..., a, k) = del_a X^k
    out = np.einsum('...k,...kij->...ij', x.data, dg, **EINS) \
        + np.einsum('...kj,...ik->...ij', g.data, dx, **EINS) \
        + np.einsum('...ik,...jk->...ij', g.data, dx, **EINS)
    return TensorField(g.grid, 0, 2, out, g.sym, check=False)


def lie_derivative_J(x: TensorField, J: TensorField) -> TensorField:
    dj = grad_data(J.grid, J.data)
    dx = grad_data(J.grid, x.data)
    out = np.einsum('...k,...kji->...ji', x.data, dj, **EINS) \
        - np.einsum('...ki,...kj->...ji', J.data, dx, **EINS) \
        + np.einsum('...jk,...ik->...ji', J.data, dx, **EINS)
    return TensorField(J.grid, 1, 1, out, check=False)
