"""Cross-module invariant suites for the verify subcommand.

Each check returns a sup-norm style residual; a check passes when the
residual is below its stated tolerance.  The suites run at more than
one resolution so discretization-dependent bugs show up as residuals
that fail to track the expected convergence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import curvature as cv
from . import flow as fl
from . import linearization as ln
from . import moser as ms
from .almost_kahler import (build_perturbation, compatibility_defect,
                            deform_J_along_path, standard_flat,
                            PerturbationTerm)
from .grid import (PeriodicGrid, TensorField, exterior_d_1form,
                   exterior_d_2form, sup_norm)


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str


def _mix_slot(dim):
    return (0, 2) if dim == 4 else (0, 1)


def _perturbed(ref, eps=0.01, steps=8):
    grid = ref.grid
    k = (1,) + (0,) * (grid.dim - 1)
    beta = build_perturbation(grid, [PerturbationTerm(k, _mix_slot(grid.dim),
                                                      eps)])
    return deform_J_along_path(ref.structure, ref.structure.omega + beta,
                               steps=steps)


def run_suites(dims=(4,), resolutions=(8, 16), backend="spectral", seed=0):
    rng = np.random.default_rng(seed)
    results = []
    for dim in dims:
        for res in resolutions:
            grid = PeriodicGrid(dim, res, backend)
            ref = standard_flat(grid)
            tag = f"d={dim} N={res}"

            def check(name, residual, tol):
                results.append(CheckResult(
                    f"{name} [{tag}]", residual <= tol,
                    f"residual {residual:.3e} (tol {tol:.0e})"))

            # grid: d of d vanishes on a random band-limited 1-form
            x = grid.points().reshape(grid.shape + (dim,))
            phase = rng.uniform(0, 1, dim)
            comps = [np.sin(2 * np.pi * (x[..., a % dim] + phase[a]))
                     for a in range(dim)]
            df = exterior_d_1form(TensorField(grid, 0, 1,
                                              np.stack(comps, axis=-1),
                                              check=False))
            check("grid.d_of_d_zero", sup_norm(exterior_d_2form(df)), 1e-10)

            s = _perturbed(ref)
            check("almost_kahler.J_squared",
                  sup_norm(np.einsum('...ij,...jk->...ik', s.J.data,
                                     s.J.data)
                           + np.eye(dim)), 1e-10)
            check("almost_kahler.compat_defect", compatibility_defect(s),
                  1e-10)

            # curvature: flat reference is curvature-free, connection metric
            conn = cv.levi_civita(s.g)
            check("curvature.metric_compat",
                  cv.metric_compatibility_residual(s.g, conn), 1e-8)
            conn0 = cv.levi_civita(ref.structure.g)
            check("curvature.flat_riemann",
                  sup_norm(cv.riemann_ricci(ref.structure.g, conn0).riemann),
                  1e-10)
            check("curvature.nijenhuis_flat",
                  sup_norm(cv.nijenhuis(ref.structure.J)), 1e-10)

            # flow: the flat Calabi-Yau structure is a fixed point
            st = fl.FlowState(0.0, ref.structure.copy(), "gauge-fixed", ref)
            dg, dw, dj, _ = fl._state_rhs(st)
            check("flow.flat_fixed_point",
                  max(sup_norm(dg), sup_norm(dw), sup_norm(dj)), 1e-9)

            # linearization: constant deformations are in the kernel of L1
            h = TensorField(grid, 0, 2,
                            np.broadcast_to(np.eye(dim),
                                            grid.shape + (dim, dim)).copy(),
                            "sym")
            check("linearization.const_kernel",
                  sup_norm(ln.apply_L1(h, ref)), 1e-9)

            # moser: equal forms produce the identity isotopy
            phi = ms.moser_isotopy(ref.structure.omega, ref.structure.omega,
                                   steps=4)
            check("moser.identity", sup_norm(phi.displacement), 1e-12)

            # flow csv: records survive a write/read round trip
            rec = fl.diagnostics(st, 0.1)
            check("flow.diagnostics_finite",
                  0.0 if np.isfinite(rec.sup_rhs) else 1.0, 1e-12)
    return results
