"""Command-line front end: run, theorem, linearize, moser, verify.

Exit codes: 0 success, 2 configuration error, 3 numerical abort,
4 certificate failure.
"""

import os
import sys


def _configure_threads(argv):
    """Pin BLAS pools before numpy loads; --threads / SCF_THREADS."""
    k = None
    for i, a in enumerate(argv):
        if a == "--threads" and i + 1 < len(argv):
            k = argv[i + 1]
        elif a.startswith("--threads="):
            k = a.split("=", 1)[1]
    k = k or os.environ.get("SCF_THREADS") or "1"
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS", "NUMBA_NUM_THREADS"):
        os.environ.setdefault(var, k)
    return k


_configure_threads(sys.argv)

import argparse
import logging

import numpy as np

from . import curvature as cv
from . import flow as fl
from . import linearization as ln
from . import moser as ms
from .almost_kahler import (AlmostKahlerStructure, build_perturbation,
                            compatibility_defect, deform_J_along_path,
                            metric_from, standard_flat)
from .config import ConfigError, parse_config
from .grid import (PeriodicGrid, TensorField, form_periods, pullback,
                   save_field, sup_norm)

log = logging.getLogger("scflab")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_CERTIFICATE = 4


def _setup(cfg):
    grid = PeriodicGrid(cfg.get("grid.dim"), cfg.get("grid.res"),
                        cfg.get("grid.backend"))
    ref = standard_flat(grid)
    return grid, ref


def _initial_structure(cfg, grid, ref):
    if not cfg.terms:
        return ref.structure.copy(), ref.structure.omega
    beta = build_perturbation(grid, cfg.terms)
    omega1 = ref.structure.omega + beta
    s = deform_J_along_path(ref.structure, omega1,
                            steps=cfg.get("deform.steps"))
    return s, omega1


def _snapshot_writer(out_dir, stride):
    if stride <= 0:
        return None, [0]
    count = [0]

    def cb(state, nstep):
        if nstep % stride:
            return
        tag = f"{count[0]:04d}"
        save_field(os.path.join(out_dir, f"snapshot_{tag}_g.scffld"),
                   state.s.g)
        save_field(os.path.join(out_dir, f"snapshot_{tag}_omega.scffld"),
                   state.s.omega)
        save_field(os.path.join(out_dir, f"snapshot_{tag}_J.scffld"),
                   state.s.J)
        count[0] += 1
    return cb, count


def _evolve_from_config(cfg, out_dir):
    grid, ref = _setup(cfg)
    s, _ = _initial_structure(cfg, grid, ref)
    state = fl.FlowState(0.0, s, cfg.get("flow.mode"), ref)
    cb, _ = _snapshot_writer(out_dir, cfg.get("flow.snapshot_stride"))
    final, records, reason = fl.evolve(
        state, t_max=cfg.get("flow.t_max"), rhs_tol=cfg.get("flow.rhs_tol"),
        dt_user=cfg.get("flow.dt_user"), sigma=cfg.get("flow.sigma"),
        c_diff=cfg.get("flow.c_diff"), diag_stride=cfg.get("flow.diag_stride"),
        snapshot_cb=cb)
    fl.write_csv(os.path.join(out_dir, "diagnostics.csv"), records, grid.dim)
    return grid, ref, final, records, reason


def cmd_run(cfg, out_dir):
    try:
        grid, ref, final, records, reason = _evolve_from_config(cfg, out_dir)
    except fl.FlowAbort as exc:
        if exc.records:
            fl.write_csv(os.path.join(out_dir, "diagnostics.csv"),
                         exc.records, cfg.get("grid.dim"))
        print(f"abort: {exc}")
        return EXIT_NUMERICAL
    save_field(os.path.join(out_dir, "final_g.scffld"), final.s.g)
    save_field(os.path.join(out_dir, "final_omega.scffld"), final.s.omega)
    save_field(os.path.join(out_dir, "final_J.scffld"), final.s.J)
    last = records[-1]
    print(f"t={final.t:.6f} reason={reason} sup_rhs={last.sup_rhs:.3e} "
          f"sup_N={last.sup_N:.3e} sup_Rc={last.sup_Rc:.3e} "
          f"projections={final.projections}")
    if reason != "rhs_tol":
        print("failure: t_max reached before rhs_tol")
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_theorem(cfg, out_dir):
    grid, ref = _setup(cfg)
    lines = []

    def stage(n, text):
        lines.append(f"stage {n}: {text}")
        print(lines[-1])

    try:
        s0, omega1 = _initial_structure(cfg, grid, ref)
        stage(1, f"perturbed form assembled, {len(cfg.terms)} term(s), "
                 f"sup|omega'-omega0|={sup_norm(omega1 - ref.structure.omega):.3e}")
        stage(2, "compatible J' carried along the linear path, defect "
                 f"{compatibility_defect(s0):.3e}")
        state = fl.FlowState(0.0, s0, "gauge-fixed", ref)
        cb, _ = _snapshot_writer(out_dir, cfg.get("flow.snapshot_stride"))
        final, records, reason = fl.evolve(
            state, t_max=cfg.get("flow.t_max"),
            rhs_tol=cfg.get("flow.rhs_tol"), dt_user=cfg.get("flow.dt_user"),
            sigma=cfg.get("flow.sigma"), c_diff=cfg.get("flow.c_diff"),
            diag_stride=cfg.get("flow.diag_stride"), snapshot_cb=cb)
        fl.write_csv(os.path.join(out_dir, "diagnostics.csv"), records,
                     grid.dim)
        if reason != "rhs_tol":
            stage(3, f"flow did not converge by t={final.t:.4f}")
            _write_report(out_dir, lines, passed=False)
            return EXIT_NUMERICAL
        stage(3, f"gauge-fixed flow converged at t={final.t:.6f}, "
                 f"sup_rhs={records[-1].sup_rhs:.3e}")

        p_in = form_periods(omega1)
        p_out = form_periods(final.s.omega)
        drift = float(np.max(np.abs(p_out - p_in)))
        ok4 = drift <= cfg.get("theorem.period_tol")
        stage(4, f"period drift {drift:.3e} "
                 f"({'ok' if ok4 else 'FAILED'})")

        phi, rep = ms.moser_isotopy(omega1, final.s.omega,
                                    steps=cfg.get("moser.steps"),
                                    return_report=True)
        stage(5, f"moser isotopy residual {rep.pullback_residual:.3e}, "
                 f"min jac det {rep.min_jacobian_det:.6f}")

        j_final = ms.pullback_structure(final.s, phi).J
        g_final = metric_from(omega1, j_final)
        out = AlmostKahlerStructure(g_final, omega1, j_final, check=False)
        defect = compatibility_defect(out)
        nsup = sup_norm(cv.nijenhuis(out.J))
        bit_identical = np.array_equal(out.omega.data, omega1.data)
        ok6 = (defect <= cfg.get("theorem.defect_tol")
               and nsup <= cfg.get("theorem.nijenhuis_tol")
               and bit_identical)
        stage(6, f"final structure: defect={defect:.3e} sup_N={nsup:.3e} "
                 f"omega bit-identical={bit_identical} "
                 f"({'ok' if ok6 else 'FAILED'})")

        save_field(os.path.join(out_dir, "certified_g.scffld"), out.g)
        save_field(os.path.join(out_dir, "certified_omega.scffld"), out.omega)
        save_field(os.path.join(out_dir, "certified_J.scffld"), out.J)
        passed = ok4 and ok6
        _write_report(out_dir, lines, passed)
        print("certificate:", "PASS" if passed else "FAIL")
        return EXIT_OK if passed else EXIT_CERTIFICATE
    except (fl.FlowAbort, ms.MoserError) as exc:
        lines.append(f"abort: {exc}")
        print(lines[-1])
        _write_report(out_dir, lines, passed=False)
        return EXIT_NUMERICAL


def _write_report(out_dir, lines, passed):
    with open(os.path.join(out_dir, "theorem_report.txt"), "w") as fh:
        fh.write("\n".join(lines))
        fh.write(f"\ncertificate: {'PASS' if passed else 'FAIL'}\n")


def cmd_linearize(cfg, out_dir):
    grid, ref = _setup(cfg)
    kgrid = PeriodicGrid(grid.dim, cfg.get("linearize.kernel_res"),
                         grid.backend)
    kref = standard_flat(kgrid)
    try:
        rows = ln.linearize_report(ref, kref,
                                   tol=cfg.get("linearize.residual_tol"))
    except ln.ConvergenceError as exc:
        print(f"non-converged: {exc}")
        return EXIT_NUMERICAL
    ln.write_linearize_report(os.path.join(out_dir, "linearize_report.txt"),
                              os.path.join(out_dir, "linearize_report.csv"),
                              rows)
    ok = True
    for row in rows:
        print(f"{row['operator']} {row['subspace']}: "
              f"lambda_max={row['lambda_max']:.6e} "
              f"residual={row['residual']:.2e} kernel={row['kernel_dim']}")
        if row["subspace"] == "full" and abs(row["lambda_max"]) > 1e-6:
            ok = False
    return EXIT_OK if ok else EXIT_CERTIFICATE


def cmd_moser(cfg, out_dir):
    from .almost_kahler import PerturbationTerm
    grid, ref = _setup(cfg)
    terms = cfg.terms or [PerturbationTerm((1,) + (0,) * (grid.dim - 1),
                                           (0, 1), cfg.get("moser.amp"))]
    beta = build_perturbation(grid, terms)
    omega1 = ref.structure.omega + beta
    try:
        phi, rep = ms.moser_isotopy(ref.structure.omega, omega1,
                                    steps=cfg.get("moser.steps"),
                                    return_report=True)
    except ms.MoserError as exc:
        print(f"abort: {exc}")
        return EXIT_NUMERICAL
    roundtrip = sup_norm(pullback(omega1, phi) - ref.structure.omega)
    with open(os.path.join(out_dir, "moser_report.txt"), "w") as fh:
        fh.write(f"steps: {rep.steps}\n"
                 f"pullback_residual: {rep.pullback_residual:.6e}\n"
                 f"min_jacobian_det: {rep.min_jacobian_det:.8f}\n"
                 f"min_interpolant_det: {rep.min_interpolant_det:.8f}\n"
                 f"primitive_sup: {rep.primitive_sup:.6e}\n")
    print(f"residual={rep.pullback_residual:.3e} "
          f"min_jac_det={rep.min_jacobian_det:.6f} steps={rep.steps}")
    return EXIT_OK if rep.pullback_residual <= 1e-6 else EXIT_CERTIFICATE


def cmd_verify(cfg, out_dir):
    from .verify import run_suites
    results = run_suites(dims=(cfg.get("grid.dim"),), resolutions=(8, 16),
                         backend=cfg.get("grid.backend"),
                         seed=cfg.get("seed"))
    width = max(len(r.name) for r in results)
    all_ok = True
    rows = []
    for r in results:
        status = "pass" if r.ok else "FAIL"
        rows.append(f"{r.name:<{width}}  {status}  {r.detail}")
        print(rows[-1])
        all_ok &= r.ok
    with open(os.path.join(out_dir, "verify_report.txt"), "w") as fh:
        fh.write("\n".join(rows) + "\n")
    return EXIT_OK if all_ok else EXIT_CERTIFICATE


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    parser = argparse.ArgumentParser(
        prog="scf", description="symplectic curvature flow laboratory")
    parser.add_argument("command",
                        choices=["run", "theorem", "linearize", "moser",
                                 "verify"])
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", default=None)
    parser.add_argument("--threads", default=None)
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = args.out or cfg.get("output.dir")
    os.makedirs(out_dir, exist_ok=True)

    np.random.seed(cfg.get("seed"))
    handler = {"run": cmd_run, "theorem": cmd_theorem,
               "linearize": cmd_linearize, "moser": cmd_moser,
               "verify": cmd_verify}[args.command]
    try:
        return handler(cfg, out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
