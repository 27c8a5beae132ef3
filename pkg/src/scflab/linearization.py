"""Linearized gauge-fixed flow at the flat Calabi-Yau reference.

The two operators act on metric variations h (symmetric (0,2)) and
complex-structure variations K ((1,1) endomorphisms):

    L1(h) = Lap h + 2 R o h,   (R o h)_ij  = R_iklj h^kl
    L2(K) = Lap K + 2 R o K,   (R o K)^i_j = g^kl R^i_jlm J^m_k

with the componentwise Laplacian Lap = g0^ab del_a del_b of the
background metric.  The curvature terms are implemented generally but
vanish on the flat background, where the spectrum is the Fourier
ladder {-4 pi^2 |k|^2} and the kernel consists of constant tensors.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import curvature as cv
from .almost_kahler import FlatCYReference, flat_components
from .grid import (GridFieldError, PeriodicGrid, TensorField, apply_diff,
                   diff_matrix, sup_norm)

log = logging.getLogger(__name__)

POWER_ITERATION_CAP = 5000
RESIDUAL_TOL = 1e-6


class ConvergenceError(RuntimeError):
    """Power iteration hit the cap without reaching the residual target."""


@dataclass
class DeformationPair:
    """Metric and complex-structure variations (g-dot = h, J-dot = K)."""

    h: TensorField
    K: TensorField

    def validate(self, anticommuting: bool = False, tol: float = 1e-10):
        if (self.h.p, self.h.q) != (0, 2) or (self.K.p, self.K.q) != (1, 1):
            raise GridFieldError("wrong valences for (h, K)")
        asym = sup_norm(self.h.data - np.swapaxes(self.h.data, -1, -2))
        if asym > 1e-12:
            raise GridFieldError(f"h not symmetric: {asym:.3e}")
        if anticommuting:
            res = sup_norm(anticommutator_defect(self.K))
            if res > tol:
                raise GridFieldError(f"K does not anticommute with J0: {res:.3e}")


@lru_cache(maxsize=8)
def _second_diff_matrix(res: int, backend: str) -> np.ndarray:
    """Exact second-derivative matrix.

    Built from the full multiplier -4 pi^2 k^2 (Nyquist included) so the
    discrete operator has no spurious kernel beyond the constants; the
    squared first-derivative matrix would annihilate Nyquist modes.
    """
    if backend != "spectral":
        d = diff_matrix(res, backend)
        return d @ d
    k = np.fft.rfftfreq(res, d=1.0 / res)
    sym = -4.0 * np.pi**2 * k**2
    return np.fft.irfft(sym[:, None] * np.fft.rfft(np.eye(res), axis=0),
                        axis=0, n=res)


def _apply_second_diff(grid: PeriodicGrid, data: np.ndarray,
                       axis: int) -> np.ndarray:
    d2 = _second_diff_matrix(grid.res, grid.backend)
    data = np.ascontiguousarray(data)
    pre = int(np.prod(data.shape[:axis], dtype=np.int64))
    post = int(np.prod(data.shape[axis + 1:], dtype=np.int64))
    out = np.matmul(d2, data.reshape(pre, grid.res, post))
    return out.reshape(data.shape)


class LinearizedFlow:
    """L1 and L2 with background data precomputed once."""

    def __init__(self, ref: FlatCYReference):
        self.ref = ref
        self.grid = ref.grid
        s = ref.structure
        d = self.grid.dim
        g0 = s.g.data.reshape(-1, d, d)
        self._constant_metric = bool(np.max(np.abs(g0 - g0[0])) < 1e-14)
        self._ginv0 = np.linalg.inv(g0[0]) if self._constant_metric \
            else cv.inverse_metric(s.g)
        lc = cv.levi_civita(s.g)
        riem = cv.riemann_ricci(s.g, lc).riemann.data
        self._flat = bool(sup_norm(riem) < 1e-13)
        if not self._flat:
            # R_iklj with the first index lowered
            self._riem_low = np.einsum('...im,...mklj->...iklj', s.g.data,
                                       riem, optimize=True)
            self._riem_up = riem
        self._J0 = s.J.data

    def _laplacian(self, data: np.ndarray) -> np.ndarray:
        grid = self.grid
        if self._constant_metric:
            gi = self._ginv0
            out = np.zeros_like(data)
            for a in range(grid.dim):
                if gi[a, a] != 0.0:
                    out += gi[a, a] * _apply_second_diff(grid, data, a)
                for b in range(a + 1, grid.dim):
                    if gi[a, b] != 0.0:
                        mixed = apply_diff(grid, apply_diff(grid, data, a), b)
                        out += 2.0 * gi[a, b] * mixed
            return out
        out = np.zeros_like(data)
        for a in range(grid.dim):
            da = apply_diff(grid, data, a)
            for b in range(grid.dim):
                out += self._ginv0[..., a, b, None, None] \
                    * apply_diff(grid, da, b)
        return out

    def apply_L1(self, h: TensorField) -> TensorField:
        out = self._laplacian(h.data)
        if not self._flat:
            hup = np.einsum('...ik,...jl,...kl->...ij', self._ginv0,
                            self._ginv0, h.data, optimize=True)
            out = out + 2.0 * np.einsum('...iklj,...kl->...ij',
                                        self._riem_low, hup, optimize=True)
        return TensorField(h.grid, 0, 2,
                           0.5 * (out + np.swapaxes(out, -1, -2)), "sym",
                           check=False)

    def apply_L2(self, K: TensorField) -> TensorField:
        out = self._laplacian(K.data)
        if not self._flat:
            out = out + 2.0 * np.einsum('...kl,...ijlm,...mk->...ij',
                                        self._ginv0, self._riem_up, self._J0,
                                        optimize=True)
        return TensorField(K.grid, 1, 1, out, check=False)


def apply_L1(h: TensorField, ref: FlatCYReference) -> TensorField:
    return LinearizedFlow(ref).apply_L1(h)


def apply_L2(K: TensorField, ref: FlatCYReference) -> TensorField:
    return LinearizedFlow(ref).apply_L2(K)


# ---------------------------------------------------------------------------
# subspace projections
# ---------------------------------------------------------------------------

def anticommutator_defect(K: TensorField) -> np.ndarray:
    _, _, j0 = flat_components(K.grid.dim)
    return K.data @ j0 + j0 @ K.data


def project_anticommuting(K: TensorField) -> TensorField:
    """Projection onto endomorphisms anticommuting with the standard J0."""
    _, _, j0 = flat_components(K.grid.dim)
    data = 0.5 * (K.data + j0 @ K.data @ j0)
    return TensorField(K.grid, 1, 1, data, check=False)


def project_mean_zero(f: TensorField) -> TensorField:
    d = f.grid.dim
    mean = f.data.reshape(-1, *f.data.shape[d:]).mean(axis=0)
    return TensorField(f.grid, f.p, f.q, f.data - mean, f.sym, check=False)


def split_J_invariant(h: TensorField) -> tuple:
    """h = h_S + h_A: the J0-invariant part h_S(JX, JY) = h_S(X, Y)."""
    _, _, j0 = flat_components(h.grid.dim)
    hs = 0.5 * (h.data + np.einsum('ki,lj,...kl->...ij', j0, j0, h.data))
    ha = h.data - hs
    mk = lambda d: TensorField(h.grid, 0, 2, d, "sym", check=False)
    return mk(hs), mk(ha)


def symmetrize_02(data: np.ndarray) -> np.ndarray:
    return 0.5 * (data + np.swapaxes(data, -1, -2))


# ---------------------------------------------------------------------------
# matrix-free spectral analysis
# ---------------------------------------------------------------------------

def _op_setup(lin: LinearizedFlow, operator: str, subspace: str):
    grid = lin.grid
    d = grid.dim
    if operator == "L1":
        comp = (d, d)

        def apply(v):
            f = TensorField(grid, 0, 2, v, "sym", check=False)
            return lin.apply_L1(f).data

        def project(v):
            v = symmetrize_02(v)
            if subspace == "mean-zero":
                v = v - v.reshape(-1, d, d).mean(axis=0)
            return v
    elif operator == "L2":
        comp = (d, d)
        _, _, j0 = flat_components(d)

        def apply(v):
            f = TensorField(grid, 1, 1, v, check=False)
            return lin.apply_L2(f).data

        def project(v):
            if subspace == "anticommuting":
                v = 0.5 * (v + j0 @ v @ j0)
            elif subspace == "mean-zero":
                v = v - v.reshape(-1, d, d).mean(axis=0)
            return v
    else:
        raise ValueError(f"unknown operator {operator!r}")
    if subspace not in ("full", "mean-zero", "anticommuting"):
        raise ValueError(f"unknown subspace {subspace!r}")
    return comp, apply, project


def _dot(u, v) -> float:
    return float(np.sum(u * v))


def default_shift(grid: PeriodicGrid) -> float:
    return 1.1 * 4.0 * np.pi**2 * (grid.res / 2) ** 2 * grid.dim


def top_eigenvalue(ref: FlatCYReference, operator: str,
                   subspace: str = "full", tol: float = RESIDUAL_TOL,
                   cap: int = POWER_ITERATION_CAP, seed: int = 7):
    """Largest eigenvalue by shifted power iteration.

    Returns (lambda_max, residual, iterations).  The shift makes the
    spectrum positive so the iteration converges to the top of the
    original operator; the returned value undoes the shift.
    """
    lin = LinearizedFlow(ref)
    grid = lin.grid
    comp, apply, project = _op_setup(lin, operator, subspace)
    mu = default_shift(grid)
    rng = np.random.default_rng(seed)
    v = project(rng.standard_normal(grid.shape + comp))
    v /= np.sqrt(_dot(v, v))
    lam = 0.0
    res = np.inf
    for it in range(1, cap + 1):
        lv = apply(v)
        lam = _dot(lv, v)
        resid = lv - lam * v
        res = np.sqrt(_dot(resid, resid))
        if res <= tol:
            return lam, res, it
        w = project(lv + mu * v)
        v = w / np.sqrt(_dot(w, w))
    raise ConvergenceError(
        f"{operator}/{subspace}: residual {res:.3e} > {tol:.1e} "
        f"after {cap} iterations (last estimate {lam:.6e})")


def kernel_dimension(ref: FlatCYReference, operator: str,
                     subspace: str = "full", threshold: float = None,
                     block: int = None, max_iterations: int = 4000,
                     chunk: int = 50, seed: int = 11):
    """Number of eigenvalues in (-threshold, threshold] near the top.

    Block power iteration with orthonormalization, run in chunks until
    the Ritz values separate cleanly (gap at least ten thresholds and a
    count stable across two consecutive checks).  Raises if the cap is
    hit with the cluster still ill-separated.
    """
    lin = LinearizedFlow(ref)
    grid = lin.grid
    comp, apply, project = _op_setup(lin, operator, subspace)
    if threshold is None:
        threshold = 1e-4 * 4.0 * np.pi**2
    d = grid.dim
    if block is None:
        block = d * (d + 1) // 2 + 6 if operator == "L1" else d * d + 4
    mu = default_shift(grid)
    rng = np.random.default_rng(seed)

    vs = [project(rng.standard_normal(grid.shape + comp)) for _ in range(block)]
    basis = np.stack([v.ravel() for v in vs], axis=1)
    basis, _ = np.linalg.qr(basis)
    done = 0
    prev_inside = None
    prev_ritz = None
    gap = 0.0
    while done < max_iterations:
        for _ in range(chunk):
            cols = []
            for c in range(basis.shape[1]):
                v = basis[:, c].reshape(grid.shape + comp)
                w = project(apply(v) + mu * v)
                cols.append(w.ravel())
            basis, _ = np.linalg.qr(np.stack(cols, axis=1))
        done += chunk
        # Rayleigh-Ritz on the current block
        lcols = []
        for c in range(basis.shape[1]):
            v = basis[:, c].reshape(grid.shape + comp)
            lcols.append(project(apply(v)).ravel())
        lmat = basis.T @ np.stack(lcols, axis=1)
        ritz = np.linalg.eigvalsh(0.5 * (lmat + lmat.T))
        inside = int(np.sum((ritz > -threshold) & (ritz <= threshold)))
        below = ritz[ritz <= -threshold]
        if len(below) == 0:
            raise ConvergenceError(
                f"{operator}/{subspace}: block of {block} lies entirely in "
                "the near-kernel cluster; enlarge the block")
        gap = float(-np.max(below))
        settled = (prev_ritz is not None
                   and np.max(np.abs(ritz - prev_ritz)) < 0.1 * threshold)
        if gap >= 10.0 * threshold and inside == prev_inside and settled:
            return inside, gap
        prev_inside = inside
        prev_ritz = ritz
    raise ConvergenceError(
        f"{operator}/{subspace}: ill-separated cluster after "
        f"{max_iterations} iterations, gap {gap:.3e} vs threshold "
        f"{threshold:.3e}")


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def linearize_report(ref: FlatCYReference, kernel_ref: FlatCYReference = None,
                     tol: float = RESIDUAL_TOL):
    """Spectral summary rows for both operators.

    ``kernel_ref`` may point to a coarser grid for the kernel counts;
    eigenvalues use ``ref`` as stated.
    """
    if kernel_ref is None:
        kernel_ref = ref
    rows = []
    for operator, kernel_sub in (("L1", "full"), ("L2", "anticommuting")):
        lam, res, its = top_eigenvalue(ref, operator, "full", tol=tol)
        lam0, res0, its0 = top_eigenvalue(ref, operator, "mean-zero", tol=tol)
        dim, gap = kernel_dimension(kernel_ref, operator, kernel_sub)
        rows.append({"operator": operator, "subspace": "full",
                     "lambda_max": lam, "residual": res, "iterations": its,
                     "kernel_dim": dim})
        rows.append({"operator": operator, "subspace": "mean-zero",
                     "lambda_max": lam0, "residual": res0,
                     "iterations": its0, "kernel_dim": ""})
    return rows


def write_linearize_report(path_txt, path_csv, rows):
    cols = ["operator", "subspace", "lambda_max", "residual", "iterations",
            "kernel_dim"]
    with open(path_csv, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=cols)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    with open(path_txt, "w") as fh:
        fh.write("linearized operators at the flat Calabi-Yau reference\n")
        for row in rows:
            fh.write(f"{row['operator']:3s} {row['subspace']:10s} "
                     f"lambda_max={row['lambda_max']: .6e} "
                     f"residual={row['residual']:.2e} "
                     f"iterations={row['iterations']}")
            if row["kernel_dim"] != "":
                fh.write(f"  kernel_dim={row['kernel_dim']}")
            fh.write("\n")
