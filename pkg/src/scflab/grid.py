"""Periodic grids and real tensor fields on the unit flat torus.

The torus is [0,1)^d with d in {2, 4} and N points per axis (N a power of
two), so every wavenumber is an integer and spectral derivatives carry
factors of 2*pi exactly.  Fields store their components grid-major: an
array of shape (N,)*d + (d,)*(p+q), C-contiguous, so the per-point
matrices sit contiguously in memory.

Derivatives are applied as dense N x N differentiation matrices along one
grid axis.  For the spectral backend the matrix is the exact Fourier
differentiation matrix (Nyquist mode zeroed), so D @ D equals the true
second-derivative matrix on the resolved modes; the fd4 backend swaps in
the 4th-order central-difference circulant and everything downstream is
unchanged.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

SNAPSHOT_MAGIC = b"SCFFLD1"

_SYM_TAGS = ("none", "sym", "antisym")


class GridFieldError(ValueError):
    """Invalid field data or an operation precondition failure."""


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform periodic grid on [0,1)^dim with res points per axis."""

    dim: int
    res: int
    backend: str = "spectral"

    def __post_init__(self):
        if self.dim not in (2, 4):
            raise GridFieldError(f"dim must be 2 or 4, got {self.dim}")
        if self.res < 8 or (self.res & (self.res - 1)) != 0:
            raise GridFieldError(f"res must be a power of two >= 8, got {self.res}")
        if self.backend not in ("spectral", "fd4"):
            raise GridFieldError(f"unknown backend {self.backend!r}")

    @property
    def spacing(self) -> float:
        return 1.0 / self.res

    @property
    def npoints(self) -> int:
        return self.res**self.dim

    @property
    def shape(self) -> tuple:
        return (self.res,) * self.dim

    def axis_coords(self) -> np.ndarray:
        return np.arange(self.res) / self.res

    def coords(self, axis: int) -> np.ndarray:
        """Coordinate along one axis, broadcastable over the grid."""
        x = self.axis_coords()
        shape = [1] * self.dim
        shape[axis] = self.res
        return x.reshape(shape)

    def points(self) -> np.ndarray:
        """All grid points as an (npoints, dim) array, grid-major order."""
        mesh = np.meshgrid(*[self.axis_coords()] * self.dim, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


@lru_cache(maxsize=None)
def diff_matrix(res: int, backend: str) -> np.ndarray:
    """Dense one-axis differentiation matrix (d/dx on the unit circle)."""
    if backend == "spectral":
        k = np.fft.rfftfreq(res, d=1.0 / res)  # 0 .. res/2
        sym = 2j * np.pi * k
        sym[-1] = 0.0  # odd derivative of the Nyquist mode vanishes
        return np.fft.irfft(sym[:, None] * np.fft.rfft(np.eye(res), axis=0), axis=0)
    # 4th-order central differences on the periodic stencil
    h = 1.0 / res
    d = np.zeros((res, res))
    idx = np.arange(res)
    d[idx, (idx + 1) % res] = 8.0
    d[idx, (idx - 1) % res] = -8.0
    d[idx, (idx + 2) % res] = -1.0
    d[idx, (idx - 2) % res] = 1.0
    return d / (12.0 * h)


class TensorField:
    """Real tensor field of valence (p, q) over a PeriodicGrid.

    ``sym`` declares an exact (anti)symmetry of the last two index slots:
    one of "none", "sym", "antisym".  It is validated, not enforced.
    """

    __slots__ = ("grid", "p", "q", "data", "sym")

    def __init__(self, grid: PeriodicGrid, p: int, q: int, data: np.ndarray,
                 sym: str = "none", check: bool = True):
        rank = p + q
        if rank > 4:
            raise GridFieldError("total valence p+q must be <= 4")
        expected = grid.shape + (grid.dim,) * rank
        data = np.asarray(data, dtype=np.float64)
        if data.shape != expected:
            raise GridFieldError(f"data shape {data.shape} != expected {expected}")
        if sym not in _SYM_TAGS:
            raise GridFieldError(f"unknown symmetry tag {sym!r}")
        if sym != "none" and rank < 2:
            raise GridFieldError("symmetry tag needs at least two index slots")
        self.grid = grid
        self.p = p
        self.q = q
        self.data = data
        self.sym = sym
        if check:
            self.validate()

    @property
    def rank(self) -> int:
        return self.p + self.q

    def validate(self, tol: float = 1e-14):
        if not np.all(np.isfinite(self.data)):
            raise GridFieldError("non-finite entries in tensor field")
        if self.sym != "none":
            sgn = 1.0 if self.sym == "sym" else -1.0
            swapped = np.swapaxes(self.data, -1, -2)
            err = np.max(np.abs(self.data - sgn * swapped))
            scale = max(1.0, np.max(np.abs(self.data)))
            if err > tol * scale:
                raise GridFieldError(
                    f"declared {self.sym} symmetry violated by {err:.3e}")

    def copy(self) -> "TensorField":
        return TensorField(self.grid, self.p, self.q, self.data.copy(),
                           self.sym, check=False)

    def __add__(self, other: "TensorField") -> "TensorField":
        self._compat(other)
        sym = self.sym if self.sym == other.sym else "none"
        return TensorField(self.grid, self.p, self.q, self.data + other.data, sym)

    def __sub__(self, other: "TensorField") -> "TensorField":
        self._compat(other)
        sym = self.sym if self.sym == other.sym else "none"
        return TensorField(self.grid, self.p, self.q, self.data - other.data, sym)

    def __mul__(self, c) -> "TensorField":
        return TensorField(self.grid, self.p, self.q, self.data * float(c), self.sym)

    __rmul__ = __mul__

    def __neg__(self) -> "TensorField":
        return self * (-1.0)

    def _compat(self, other: "TensorField"):
        if self.grid != other.grid or (self.p, self.q) != (other.p, other.q):
            raise GridFieldError("tensor fields not compatible")


def scalar_field(grid: PeriodicGrid, values) -> TensorField:
    data = np.broadcast_to(np.asarray(values, dtype=np.float64), grid.shape).copy()
    return TensorField(grid, 0, 0, data)


def constant_field(grid: PeriodicGrid, p: int, q: int, comps: np.ndarray,
                   sym: str = "none") -> TensorField:
    comps = np.asarray(comps, dtype=np.float64)
    data = np.broadcast_to(comps, grid.shape + comps.shape).copy()
    return TensorField(grid, p, q, data, sym)


# ---------------------------------------------------------------------------
# differentiation / integration / norms
# ---------------------------------------------------------------------------

def apply_diff(grid: PeriodicGrid, data: np.ndarray, axis: int) -> np.ndarray:
    """Derivative of raw component data along one grid axis."""
    d = diff_matrix(grid.res, grid.backend)
    data = np.ascontiguousarray(data)
    pre = int(np.prod(data.shape[:axis], dtype=np.int64))
    post = int(np.prod(data.shape[axis + 1:], dtype=np.int64))
    view = data.reshape(pre, grid.res, post)
    out = np.matmul(d, view)  # batched over the leading block
    return out.reshape(data.shape)


def partial_derivative(f: TensorField, axis: int) -> TensorField:
    """Componentwise derivative along a grid axis (valence unchanged)."""
    if not 0 <= axis < f.grid.dim:
        raise GridFieldError(f"axis {axis} out of range for dim {f.grid.dim}")
    if not np.all(np.isfinite(f.data)):
        raise GridFieldError("non-finite entries in derivative input")
    return TensorField(f.grid, f.p, f.q, apply_diff(f.grid, f.data, axis),
                       f.sym, check=False)


def grad_data(grid: PeriodicGrid, data: np.ndarray) -> np.ndarray:
    """All first derivatives; new axis of length dim inserted after the grid."""
    dim = grid.dim
    out = np.empty(data.shape[:dim] + (dim,) + data.shape[dim:])
    sel = (slice(None),) * dim
    for a in range(dim):
        out[sel + (a,)] = apply_diff(grid, data, a)
    return out


def integrate(f: TensorField) -> float:
    """Integral of a scalar field over the unit-volume torus."""
    if f.rank != 0:
        raise GridFieldError("integrate expects a scalar (0,0) field")
    if not np.all(np.isfinite(f.data)):
        raise GridFieldError("non-finite entries")
    return float(np.mean(f.data))


def sup_norm(f) -> float:
    data = f.data if isinstance(f, TensorField) else np.asarray(f)
    return float(np.max(np.abs(data)))


def l2_norm(f) -> float:
    data = f.data if isinstance(f, TensorField) else np.asarray(f)
    return float(np.sqrt(np.mean(data * data)))


# ---------------------------------------------------------------------------
# differential forms
# ---------------------------------------------------------------------------

def exterior_d_1form(alpha: TensorField) -> TensorField:
    """d of a 1-form: (d a)_{ij} = del_i a_j - del_j a_i."""
    if (alpha.p, alpha.q) != (0, 1):
        raise GridFieldError("expected a (0,1) field")
    da = grad_data(alpha.grid, alpha.data)  # (..., i, j) = del_i a_j
    return TensorField(alpha.grid, 0, 2, da - np.swapaxes(da, -1, -2),
                       "antisym", check=False)


def exterior_d_2form(beta: TensorField) -> np.ndarray:
    """d of a 2-form as raw (..., i, j, k) data (cyclic sum of derivatives)."""
    if (beta.p, beta.q) != (0, 2) or beta.sym != "antisym":
        raise GridFieldError("expected an antisymmetric (0,2) field")
    db = grad_data(beta.grid, beta.data)  # (..., i, j, k) = del_i b_{jk}
    return db + np.moveaxis(db, [-3, -2, -1], [-2, -1, -3]) \
        + np.moveaxis(db, [-3, -2, -1], [-1, -3, -2])


def form_periods(beta: TensorField) -> np.ndarray:
    """Integrals of a closed 2-form over the coordinate 2-tori.

    One entry per axis pair (a, b), a < b, in lexicographic order; for a
    closed form this equals the grid mean of the (a, b) component.
    """
    d = beta.grid.dim
    mean = beta.data.reshape(-1, d, d).mean(axis=0)
    return np.array([mean[a, b] for a in range(d) for b in range(a + 1, d)])


def hodge_decompose_2form(beta: TensorField, closed_tol: float = 1e-8):
    """Split a closed 2-form into a constant part plus d(1-form).

    Returns (harmonic, primitive) with beta = harmonic + d primitive, the
    primitive chosen coexact (divergence-free), solved mode by mode in
    Fourier space.
    """
    if (beta.p, beta.q) != (0, 2) or beta.sym != "antisym":
        raise GridFieldError("expected an antisymmetric (0,2) field")
    grid = beta.grid
    d = grid.dim
    residual = sup_norm(exterior_d_2form(beta))
    if residual > closed_tol:
        raise GridFieldError(f"not closed: sup|d beta| = {residual:.3e}")

    axes = tuple(range(d))
    bhat = np.fft.fftn(beta.data, axes=axes)
    kvecs = np.meshgrid(*[np.fft.fftfreq(grid.res, d=1.0 / grid.res)] * d,
                        indexing="ij")
    k = np.stack(kvecs, axis=-1)  # (..., d) integer wavenumbers
    k2 = np.sum(k * k, axis=-1)
    k2safe = np.where(k2 == 0, 1.0, k2)

    # alpha_j = k_m bhat_{mj} / (2 pi i |k|^2), zero mode dropped
    num = np.einsum('...m,...mj->...j', k, bhat)
    ahat = num / (2j * np.pi * k2safe[..., None])
    ahat[(0,) * d] = 0.0

    harmonic_comps = np.real(bhat[(0,) * d]) / grid.npoints
    harmonic = constant_field(grid, 0, 2,
                              0.5 * (harmonic_comps - harmonic_comps.T),
                              "antisym")
    alpha = TensorField(grid, 0, 1,
                        np.real(np.fft.ifftn(ahat, axes=axes)), check=False)
    return harmonic, alpha


# ---------------------------------------------------------------------------
# trigonometric (off-grid) evaluation and pullback
# ---------------------------------------------------------------------------

def fourier_modes(grid: PeriodicGrid, data: np.ndarray, tol: float = 1e-13):
    """Significant Fourier modes of a componentwise field.

    Returns (kvecs, coeffs, weights, dropped) where the field value at x is
    sum_m weights[m] * Re(coeffs[m] * exp(2 pi i k_m . x)) per component
    and ``dropped`` is the sup-norm bound on the truncated part.
    """
    d = grid.dim
    comp_shape = data.shape[d:]
    fhat = np.fft.fftn(data, axes=tuple(range(d))) / grid.npoints
    flat = fhat.reshape(grid.npoints, -1)
    mags = np.max(np.abs(flat), axis=1)

    kax = np.fft.fftfreq(grid.res, d=1.0 / grid.res).astype(np.int64)
    mesh = np.meshgrid(*[kax] * d, indexing="ij")
    kvec = np.stack([m.ravel() for m in mesh], axis=-1)  # (npoints, d)

    # keep one representative of each conjugate pair: first nonzero k > 0
    lead = np.zeros(grid.npoints, dtype=np.int64)
    seen = np.zeros(grid.npoints, dtype=bool)
    for a in range(d):
        ka = kvec[:, a]
        upd = (~seen) & (ka != 0)
        lead[upd] = np.sign(ka[upd])
        seen |= ka != 0
    nyq = grid.res // 2
    self_conj = np.all((kvec == 0) | (kvec == -nyq), axis=1)
    half = self_conj | (lead > 0)

    scale = max(mags.max(), 1e-300)
    keep = half & (mags > tol * scale)
    drop = half & ~keep
    weights = np.where(self_conj[keep], 1.0, 2.0)
    dropped = float(np.sum(mags[drop] * np.where(self_conj[drop], 1.0, 2.0)))
    coeffs = flat[keep].reshape((-1,) + comp_shape)
    return kvec[keep], coeffs, weights, dropped


def fourier_eval(grid: PeriodicGrid, data: np.ndarray, points: np.ndarray,
                 tol: float = 1e-13):
    """Evaluate a field at arbitrary points by its trigonometric sum.

    Exact (up to coefficients below ``tol`` relative) for band-limited
    fields.  Returns (values, dropped_mass).
    """
    from . import _kernels
    kvec, coeffs, weights, dropped = fourier_modes(grid, data, tol)
    comp_shape = coeffs.shape[1:]
    ncomp = int(np.prod(comp_shape)) if comp_shape else 1
    cre = np.ascontiguousarray(np.real(coeffs).reshape(len(kvec), ncomp))
    cim = np.ascontiguousarray(np.imag(coeffs).reshape(len(kvec), ncomp))
    pts = np.ascontiguousarray(points, dtype=np.float64)
    vals = _kernels.nudft_eval(kvec.astype(np.float64), cre, cim,
                               weights, pts)
    return vals.reshape(points.shape[:-1] + comp_shape), dropped


@dataclass
class DiffeoField:
    """Torus diffeomorphism x -> x + u(x) mod 1 given by a periodic shift u."""

    grid: PeriodicGrid
    displacement: TensorField  # valence (1,0)

    def __post_init__(self):
        if (self.displacement.p, self.displacement.q) != (1, 0):
            raise GridFieldError("displacement must be a (1,0) field")
        if np.min(self.jacobian_det()) <= 0.0:
            raise GridFieldError("displacement Jacobian not orientation-preserving")

    def jacobian(self) -> np.ndarray:
        """(..., i, j) = del phi^i / del x^j = delta + del_j u^i."""
        du = grad_data(self.grid, self.displacement.data)  # (..., j, i)
        jac = np.swapaxes(du, -1, -2).copy()
        idx = np.arange(self.grid.dim)
        jac[..., idx, idx] += 1.0
        return jac

    def jacobian_det(self) -> np.ndarray:
        return np.linalg.det(self.jacobian())

    def mapped_points(self) -> np.ndarray:
        pts = self.grid.points() + self.displacement.data.reshape(-1, self.grid.dim)
        return np.mod(pts, 1.0)


def identity_diffeo(grid: PeriodicGrid) -> DiffeoField:
    zero = TensorField(grid, 1, 0, np.zeros(grid.shape + (grid.dim,)))
    return DiffeoField(grid, zero)


def pullback(f: TensorField, phi: DiffeoField, tol: float = 1e-13,
             warn_residual: float = 1e-9) -> TensorField:
    """Pullback of a covariant tensor field through a torus diffeomorphism.

    Components of f are evaluated at phi(x) by trigonometric interpolation
    and contracted with one Jacobian factor per covariant slot.
    """
    if f.p != 0:
        raise GridFieldError("pullback implemented for covariant fields")
    grid = f.grid
    vals, dropped = fourier_eval(grid, f.data, phi.mapped_points(), tol)
    vals = vals.reshape(grid.shape + (grid.dim,) * f.q)
    if dropped > warn_residual:
        import logging
        logging.getLogger(__name__).warning(
            "pullback interpolation residual %.3e (input not band-limited?)",
            dropped)
    jac = phi.jacobian().reshape(
        grid.shape + (1,) * (f.q - 1) + (grid.dim, grid.dim))
    out = vals
    for slot in range(f.q):
        out = np.moveaxis(out, grid.dim, -1)          # bring slot last
        out = np.einsum('...i,...ij->...j', out, jac)  # contract with J
    # slots cycled q times: order restored
    return TensorField(grid, 0, f.q, out, f.sym, check=False)


def pullback_mixed_11(f: TensorField, phi: DiffeoField,
                      tol: float = 1e-13) -> TensorField:
    """Pullback of a (1,1) field: J^-1 . f(phi(x)) . J per point."""
    if (f.p, f.q) != (1, 1):
        raise GridFieldError("expected a (1,1) field")
    grid = f.grid
    vals, _ = fourier_eval(grid, f.data, phi.mapped_points(), tol)
    vals = vals.reshape(grid.shape + (grid.dim, grid.dim))
    jac = phi.jacobian()
    jinv = np.linalg.inv(jac)
    out = np.einsum('...ai,...ij,...jb->...ab', jinv, vals, jac)
    return TensorField(grid, 1, 1, out, check=False)


# ---------------------------------------------------------------------------
# snapshot file format
# ---------------------------------------------------------------------------

_SYM_CODE = {"none": 0, "sym": 1, "antisym": 2}
_SYM_NAME = {v: k for k, v in _SYM_CODE.items()}


def save_field(path, f: TensorField):
    """Write a field snapshot: magic, header ints, little-endian float64."""
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(b"\x00")
        fh.write(struct.pack("<5I", f.grid.dim, f.grid.res, f.p, f.q,
                             _SYM_CODE[f.sym]))
        fh.write(np.ascontiguousarray(f.data, dtype="<f8").tobytes())


def load_field(path, backend: str = "spectral") -> TensorField:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic[:7] != SNAPSHOT_MAGIC:
            raise GridFieldError(f"bad snapshot magic {magic!r}")
        dim, res, p, q, sym = struct.unpack("<5I", fh.read(20))
        grid = PeriodicGrid(dim, res, backend)
        count = res**dim * dim**(p + q)
        data = np.frombuffer(fh.read(8 * count), dtype="<f8").reshape(
            grid.shape + (dim,) * (p + q))
        return TensorField(grid, p, q, data.copy(), _SYM_NAME[sym])
