"""Time integration of the curvature flow and its gauge-fixed variant.

The three evolution equations are integrated jointly with classical RK4
even though the triple is redundant; the omega equation carries the same
Lie-derivative gauge term as g and J so that compatibility is preserved
exactly at the PDE level and to discretization error by the integrator.
A polar re-projection guards against slow drift and is logged when it
fires.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from . import curvature as cv
from .almost_kahler import (AlmostKahlerStructure, FlatCYReference,
                            compatibility_defect, compatible_J_polar,
                            metric_from)
from .grid import (DiffeoField, PeriodicGrid, TensorField, exterior_d_2form,
                   form_periods, fourier_modes, grad_data, l2_norm, sup_norm)

log = logging.getLogger(__name__)

STABILITY_SIGMA = 0.5
DIFFUSION_CONSTANT = 2.0
PROJECTION_THRESHOLD = 1e-9
ABORT_DEFECT = 1e-5


class FlowAbort(RuntimeError):
    """Blow-up or invariant breach during time stepping."""

    def __init__(self, message, records=None):
        super().__init__(message)
        self.records = records or []


@dataclass
class FlowState:
    t: float
    s: AlmostKahlerStructure
    mode: str = "gauge-fixed"           # "scf" | "gauge-fixed"
    ref: FlatCYReference = None
    projections: int = 0

    def __post_init__(self):
        if self.mode not in ("scf", "gauge-fixed"):
            raise ValueError(f"unknown flow mode {self.mode!r}")
        if self.mode == "gauge-fixed" and self.ref is None:
            raise ValueError("gauge-fixed mode needs a reference structure")


@dataclass
class DiagnosticsRecord:
    t: float
    dt: float
    sup_N: float
    l2_N: float
    sup_Rc: float
    sup_domega: float
    compat_defect: float
    sup_rhs_g: float
    sup_rhs_omega: float
    sup_rhs_J: float
    sup_X: float
    periods: np.ndarray
    p_periods: np.ndarray
    dev_l2: float = 0.0                 # L2 of the mean-free part of g
    x_modes: tuple = None               # compressed gauge field, for de-gauging

    @property
    def sup_rhs(self) -> float:
        return max(self.sup_rhs_g, self.sup_rhs_omega, self.sup_rhs_J)


def max_symbol_eigenvalue(grid: PeriodicGrid,
                          c_diff: float = DIFFUSION_CONSTANT) -> float:
    """Stiffness bound 4 pi^2 (N/2)^2 dim c_diff of the principal part."""
    return 4.0 * np.pi**2 * (grid.res / 2) ** 2 * grid.dim * c_diff


def stable_dt(grid: PeriodicGrid, sigma: float = STABILITY_SIGMA,
              c_diff: float = DIFFUSION_CONSTANT) -> float:
    return sigma / max_symbol_eigenvalue(grid, c_diff)


# ---------------------------------------------------------------------------
# right-hand sides
# ---------------------------------------------------------------------------

#: "auto" uses the fused kernel whenever the gauge reference is flat
#: (zero Christoffel symbols); "reference" forces the plain numpy path.
RHS_IMPL = "auto"


def _ref_is_flat(ref: FlatCYReference) -> bool:
    return ref is None or not ref.christoffel_ref.data.any()


def _rhs_fast(s: AlmostKahlerStructure, gauged: bool):
    """Fused-kernel evaluation; matches the reference path to rounding.

    The connection-level fields (Christoffels, covariant DJ, Chern
    coefficients, gauge field) are assembled pointwise and then
    differentiated spectrally, exactly as the plain path does, so the
    two paths agree to rounding rather than merely to aliasing error.
    """
    from . import _kernels
    grid = s.grid
    d = grid.dim
    npts = grid.npoints
    gd, wd, jd = s.g.data, s.omega.data, s.J.data
    dg1 = grad_data(grid, gd)
    dw1 = grad_data(grid, wd)
    dj1 = grad_data(grid, jd)

    def flat(x, extra):
        return np.ascontiguousarray(x.reshape((npts,) + extra))

    # pointwise assembly as batched matmuls over the flattened grid
    gp = flat(gd, (d, d))
    jp = flat(jd, (d, d))
    dgp = flat(dg1, (d, d, d))
    djp = flat(dj1, (d, d, d))
    gi = np.linalg.inv(gp)
    t = (dgp.transpose(0, 2, 1, 3) + dgp.transpose(0, 3, 2, 1) - dgp)
    gam = 0.5 * np.matmul(gi, t.reshape(npts, d, d * d)).reshape(npts, d, d, d)
    # D_a J^m_j = del_a J + G[.,a,.] J - J G[.,a,.] with G_a = gam[:, a, :]
    ga = np.ascontiguousarray(gam.transpose(0, 2, 1, 3))  # [a, k, l]
    cdj = djp + np.matmul(ga, jp[:, None]) - np.matmul(jp[:, None], ga)
    gc = gam - 0.5 * np.matmul(jp[:, None], cdj.transpose(0, 1, 2, 3)) \
        .transpose(0, 2, 1, 3)
    dgam = grad_data(grid, gam.reshape(grid.shape + (d, d, d)))
    dcdj = grad_data(grid, cdj.reshape(grid.shape + (d, d, d)))
    dgc = grad_data(grid, gc.reshape(grid.shape + (d, d, d)))

    if gauged:
        xd = np.matmul(gam.reshape(npts, d, d * d),
                       gi.reshape(npts, d * d, 1))[..., 0]
        dxd = grad_data(grid, xd.reshape(grid.shape + (d,)))
    else:
        xd = np.zeros((npts, d))
        dxd = np.zeros(grid.shape + (d, d))

    kernel = _kernels.fused_rhs_d4 if d == 4 else _kernels.fused_rhs
    out_g, out_w, out_j = kernel(
        gp, flat(wd, (d, d)), jp,
        flat(gi, (d, d)), flat(gam, (d, d, d)), flat(cdj, (d, d, d)),
        flat(gc, (d, d, d)),
        dgp, flat(dw1, (d, d, d)), djp,
        flat(dgam, (d, d, d, d)), flat(dcdj, (d, d, d, d)),
        flat(dgc, (d, d, d, d)),
        flat(xd, (d,)), flat(dxd, (d, d)), gauged)
    shape = grid.shape + (d, d)
    x = TensorField(grid, 1, 0, xd.reshape(grid.shape + (d,)), check=False)
    return (out_g.reshape(shape), out_w.reshape(shape), out_j.reshape(shape),
            x if gauged else None)


def _rhs_arrays(s: AlmostKahlerStructure, ref: FlatCYReference, gauged: bool,
                want_diag: bool = False, impl: str = None):
    """Evolution arrays (dg, domega, dJ) plus shared intermediates."""
    impl = impl or RHS_IMPL
    if impl == "auto" and not want_diag and (not gauged or _ref_is_flat(ref)):
        impl = "fast"
    if impl == "fast":
        dg, dw, djt, x = _rhs_fast(s, gauged)
        return dg, dw, djt, {"gauge": x}
    return _rhs_reference(s, ref, gauged, want_diag)


def _rhs_reference(s: AlmostKahlerStructure, ref: FlatCYReference,
                   gauged: bool, want_diag: bool = False):
    lc = cv.levi_civita(s.g)
    bundle = cv.riemann_ricci(s.g, lc)
    dj = cv.covariant_derivative_J(s.J, lc)
    b1, b2, cn, cr = cv.flow_source_terms(s, lc, bundle, dj)
    p = cv.chern_ricci(s)
    lap = cv.rough_laplacian_J(s, lc, dj)

    dg = -2.0 * bundle.ricci.data + 0.5 * b1.data - b2.data
    dw = -p.data
    djt = lap.data + cn.data + cr.data

    x = None
    if gauged:
        x = cv.gauge_field(s, ref, lc)
        dg = dg + cv.lie_derivative_g(x, s.g).data
        dw = dw + cv.lie_derivative_g(x, s.omega).data
        djt = djt + cv.lie_derivative_J(x, s.J).data

    extras = {}
    if want_diag:
        extras["ricci"] = bundle.ricci
        extras["gauge"] = x
    return dg, dw, djt, extras


def scf_rhs(state: FlowState):
    """Ungauged flow: (dg, domega, dJ) as TensorFields."""
    dg, dw, dj, _ = _rhs_arrays(state.s, state.ref, gauged=False)
    return _wrap_rhs(state.s, dg, dw, dj)


def gf_scf_rhs(state: FlowState):
    """Gauge-fixed flow (Lie-derivative terms along the reference gauge field)."""
    dg, dw, dj, _ = _rhs_arrays(state.s, state.ref, gauged=True)
    return _wrap_rhs(state.s, dg, dw, dj)


def _wrap_rhs(s, dg, dw, dj):
    grid = s.grid
    return (TensorField(grid, 0, 2, 0.5 * (dg + np.swapaxes(dg, -1, -2)),
                        "sym", check=False),
            TensorField(grid, 0, 2, 0.5 * (dw - np.swapaxes(dw, -1, -2)),
                        "antisym", check=False),
            TensorField(grid, 1, 1, dj, check=False))


def _state_rhs(state: FlowState, want_diag: bool = False):
    return _rhs_arrays(state.s, state.ref, state.mode == "gauge-fixed",
                       want_diag)


# ---------------------------------------------------------------------------
# stepping
# ---------------------------------------------------------------------------

def _make_structure(grid, g, w, j) -> AlmostKahlerStructure:
    return AlmostKahlerStructure(
        TensorField(grid, 0, 2, 0.5 * (g + np.swapaxes(g, -1, -2)), "sym",
                    check=False),
        TensorField(grid, 0, 2, 0.5 * (w - np.swapaxes(w, -1, -2)), "antisym",
                    check=False),
        TensorField(grid, 1, 1, j, check=False),
        check=False)


def step(state: FlowState, dt: float) -> FlowState:
    """One classical RK4 step of the joint system, with drift projection."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    grid = state.s.grid
    g0, w0, j0 = state.s.g.data, state.s.omega.data, state.s.J.data

    def rhs(g, w, j):
        s = _make_structure(grid, g, w, j)
        return _rhs_arrays(s, state.ref, state.mode == "gauge-fixed")[:3]

    k1 = rhs(g0, w0, j0)
    k2 = rhs(g0 + 0.5 * dt * k1[0], w0 + 0.5 * dt * k1[1], j0 + 0.5 * dt * k1[2])
    k3 = rhs(g0 + 0.5 * dt * k2[0], w0 + 0.5 * dt * k2[1], j0 + 0.5 * dt * k2[2])
    k4 = rhs(g0 + dt * k3[0], w0 + dt * k3[1], j0 + dt * k3[2])

    sixth = dt / 6.0
    g = g0 + sixth * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    w = w0 + sixth * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    j = j0 + sixth * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])

    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(w))
            and np.all(np.isfinite(j))):
        raise FlowAbort("blow-up or dt too large: non-finite field after step")

    new = _make_structure(grid, g, w, j)
    projections = state.projections
    defect = compatibility_defect(new)
    if defect > ABORT_DEFECT:
        raise FlowAbort(
            f"blow-up or dt too large: compatibility defect {defect:.3e}")
    if defect > PROJECTION_THRESHOLD:
        jf = compatible_J_polar(new.g, new.omega)
        gf = metric_from(new.omega, jf)
        new = AlmostKahlerStructure(gf, new.omega, jf, check=False)
        projections += 1
        log.info("t=%.6f: re-projected onto compatible triples (defect %.3e)",
                 state.t + dt, defect)

    return FlowState(state.t + dt, new, state.mode, state.ref, projections)


def diagnostics(state: FlowState, dt: float,
                keep_gauge_modes: bool = False) -> DiagnosticsRecord:
    s = state.s
    dg, dw, dj, extras = _state_rhs(state, want_diag=True)
    n = cv.nijenhuis(s.J)
    p = cv.chern_ricci(s)
    x = extras["gauge"]
    if x is None and state.ref is not None:
        x = cv.gauge_field(s, state.ref)
    gdev = s.g.data - s.g.data.reshape(-1, *s.g.data.shape[s.grid.dim:]).mean(axis=0)
    return DiagnosticsRecord(
        t=state.t, dt=dt,
        sup_N=sup_norm(n), l2_N=l2_norm(n),
        sup_Rc=sup_norm(extras["ricci"]),
        sup_domega=sup_norm(exterior_d_2form(s.omega)),
        compat_defect=compatibility_defect(s),
        sup_rhs_g=float(np.max(np.abs(dg))),
        sup_rhs_omega=float(np.max(np.abs(dw))),
        sup_rhs_J=float(np.max(np.abs(dj))),
        sup_X=sup_norm(x) if x is not None else 0.0,
        periods=form_periods(s.omega),
        p_periods=form_periods(p),
        dev_l2=l2_norm(gdev),
        x_modes=(fourier_modes(s.grid, x.data, tol=1e-12)[:3]
                 if (keep_gauge_modes and x is not None) else None),
    )


def evolve(state: FlowState, t_max: float, rhs_tol: float,
           dt_user: float = None, sigma: float = STABILITY_SIGMA,
           c_diff: float = DIFFUSION_CONSTANT, diag_stride: int = 25,
           keep_gauge_modes: bool = False, validate_stride: int = 200,
           snapshot_cb=None):
    """March the flow until the right-hand side is small or time runs out.

    Returns (final_state, records, reason); reason is "rhs_tol" or "t_max".
    """
    dt_cap = stable_dt(state.s.grid, sigma, c_diff)
    if dt_user is not None and dt_user > 100.0 * dt_cap:
        raise FlowAbort(f"dt too large: requested {dt_user:.3e}, "
                        f"stability bound {dt_cap:.3e}")
    dt = min(dt_user, dt_cap) if dt_user is not None else dt_cap

    records = [diagnostics(state, dt, keep_gauge_modes)]
    if snapshot_cb:
        snapshot_cb(state, 0)
    if records[0].sup_rhs <= rhs_tol:
        return state, records, "rhs_tol"

    nstep = 0
    reason = "t_max"
    while state.t < t_max - 1e-14:
        try:
            state = step(state, min(dt, t_max - state.t))
        except FlowAbort as exc:
            raise FlowAbort(str(exc), records) from None
        nstep += 1
        if nstep % validate_stride == 0:
            state.s.validate(tol=1e-7, dw_tol=1e-7)
        if nstep % diag_stride == 0 or state.t >= t_max - 1e-14:
            rec = diagnostics(state, dt, keep_gauge_modes)
            records.append(rec)
            if snapshot_cb:
                snapshot_cb(state, nstep)
            if rec.sup_rhs <= rhs_tol:
                reason = "rhs_tol"
                break
    return state, records, reason


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------

def fit_decay_rate(records, observable: str, window):
    """Least-squares slope of log(observable) against t over a time window.

    Returns (rate, r_squared).  Mean-centered normal equations, so a
    re-implementation from the CSV agrees to rounding.
    """
    t0, t1 = window
    ts, ys = [], []
    for rec in records:
        if t0 <= rec.t <= t1:
            val = getattr(rec, observable)
            if val <= 0.0:
                raise ValueError(
                    f"non-positive {observable} at t={rec.t:.6f} in fit window")
            ts.append(rec.t)
            ys.append(np.log(val))
    if len(ts) < 2:
        raise ValueError("fit window contains fewer than two records")
    t = np.asarray(ts)
    y = np.asarray(ys)
    tm, ym = t - t.mean(), y - y.mean()
    rate = float(np.dot(tm, ym) / np.dot(tm, tm))
    resid = ym - rate * tm
    ss_tot = float(np.dot(ym, ym))
    r2 = 1.0 - float(np.dot(resid, resid)) / ss_tot if ss_tot > 0 else 1.0
    return rate, r2


# ---------------------------------------------------------------------------
# de-gauging
# ---------------------------------------------------------------------------

def _eval_modes(modes, points):
    from . import _kernels
    kvec, coeffs, weights = modes
    if len(kvec) == 0:
        return np.zeros(points.shape[:-1] + coeffs.shape[1:])
    ncomp = int(np.prod(coeffs.shape[1:]))
    cre = np.ascontiguousarray(np.real(coeffs).reshape(len(kvec), ncomp))
    cim = np.ascontiguousarray(np.imag(coeffs).reshape(len(kvec), ncomp))
    vals = _kernels.nudft_eval(kvec.astype(np.float64), cre, cim,
                               weights, np.ascontiguousarray(points))
    return vals.reshape(points.shape[:-1] + coeffs.shape[1:])


def degauge(records, grid: PeriodicGrid, substeps: int = 1) -> DiffeoField:
    """Diffeomorphism carrying gauge-fixed solutions back to the plain flow.

    Integrates the flow of -X(t) (gauge field history stored in the
    records) by RK4 from the initial to the final record time, with
    linear interpolation of X between records.
    """
    recs = [r for r in records if r.x_modes is not None]
    if len(recs) < 2:
        raise ValueError("need at least two records with stored gauge fields")
    times = np.array([r.t for r in recs])

    def x_at(t, pts):
        i = int(np.clip(np.searchsorted(times, t) - 1, 0, len(recs) - 2))
        t0, t1 = times[i], times[i + 1]
        lam = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
        v0 = _eval_modes(recs[i].x_modes, pts)
        v1 = _eval_modes(recs[i + 1].x_modes, pts)
        return -((1.0 - lam) * v0 + lam * v1)

    pts = grid.points()
    y = pts.copy()
    for i in range(len(recs) - 1):
        h = (times[i + 1] - times[i]) / substeps
        for j in range(substeps):
            t = times[i] + j * h
            k1 = x_at(t, y)
            k2 = x_at(t + 0.5 * h, np.mod(y + 0.5 * h * k1, 1.0))
            k3 = x_at(t + 0.5 * h, np.mod(y + 0.5 * h * k2, 1.0))
            k4 = x_at(t + h, np.mod(y + h * k3, 1.0))
            y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

    disp = (y - pts).reshape(grid.shape + (grid.dim,))
    return DiffeoField(grid, TensorField(grid, 1, 0, disp))


# ---------------------------------------------------------------------------
# CSV schema
# ---------------------------------------------------------------------------

def csv_header(dim: int):
    m = dim * (dim - 1) // 2
    return (["t", "dt", "sup_N", "l2_N", "sup_Rc", "sup_domega",
             "compat_defect", "sup_rhs_g", "sup_rhs_omega", "sup_rhs_J",
             "sup_X"]
            + [f"period_{i+1}" for i in range(m)]
            + [f"p_period_{i+1}" for i in range(m)])


def write_csv(path, records, dim: int):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(csv_header(dim))
        for r in records:
            writer.writerow(
                [repr(float(v)) for v in
                 [r.t, r.dt, r.sup_N, r.l2_N, r.sup_Rc, r.sup_domega,
                  r.compat_defect, r.sup_rhs_g, r.sup_rhs_omega, r.sup_rhs_J,
                  r.sup_X] + list(r.periods) + list(r.p_periods)])


def read_csv_records(path):
    """Records back from a diagnostics CSV (without gauge-field history)."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            periods = [float(v) for k, v in row.items()
                       if k.startswith("period_")]
            p_periods = [float(v) for k, v in row.items()
                         if k.startswith("p_period_")]
            out.append(DiagnosticsRecord(
                t=float(row["t"]), dt=float(row["dt"]),
                sup_N=float(row["sup_N"]), l2_N=float(row["l2_N"]),
                sup_Rc=float(row["sup_Rc"]),
                sup_domega=float(row["sup_domega"]),
                compat_defect=float(row["compat_defect"]),
                sup_rhs_g=float(row["sup_rhs_g"]),
                sup_rhs_omega=float(row["sup_rhs_omega"]),
                sup_rhs_J=float(row["sup_rhs_J"]),
                sup_X=float(row["sup_X"]),
                periods=np.array(periods), p_periods=np.array(p_periods)))
    return out
