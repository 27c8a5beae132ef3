"""Flat key-value run configuration.

Format: one ``section.key = value`` per line, ``#`` comments, blank
lines ignored.  Unknown keys are errors so misconfiguration fails
loudly.  Perturbation terms are indexed: ``perturbation.1.k = 1,0,0,0``
and so on; the shared scale ``perturbation.epsilon`` multiplies every
amplitude.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

from .almost_kahler import PerturbationTerm

log = logging.getLogger(__name__)

EPSILON_BASIN_GUARD = 0.1


class ConfigError(ValueError):
    """Unparseable, unknown, or out-of-range configuration."""


def _parse_bool(s):
    if s.lower() in ("true", "yes", "1", "on"):
        return True
    if s.lower() in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"not a boolean: {s!r}")


def _parse_int_tuple(s):
    try:
        return tuple(int(p) for p in s.split(","))
    except ValueError as exc:
        raise ConfigError(f"not an integer list: {s!r}") from exc


# key -> (parser, default); None default means "unset"
_SCHEMA = {
    "grid.dim": (int, 4),
    "grid.res": (int, 16),
    "grid.backend": (str, "spectral"),
    "flow.mode": (str, "gauge-fixed"),
    "flow.dt_user": (float, None),
    "flow.sigma": (float, 0.5),
    "flow.c_diff": (float, 2.0),
    "flow.t_max": (float, 0.5),
    "flow.rhs_tol": (float, 1e-8),
    "flow.diag_stride": (int, 25),
    "flow.snapshot_stride": (int, 0),
    "perturbation.epsilon": (float, 1.0),
    "perturbation.allow_large": (_parse_bool, False),
    "deform.steps": (int, 16),
    "moser.steps": (int, 32),
    "moser.amp": (float, 0.05),
    "linearize.kernel_res": (int, 8),
    "linearize.residual_tol": (float, 1e-6),
    "theorem.defect_tol": (float, 1e-6),
    "theorem.nijenhuis_tol": (float, 1e-6),
    "theorem.period_tol": (float, 1e-6),
    "output.dir": (str, "."),
    "seed": (int, 0),
}

_PERT_KEY = re.compile(r"^perturbation\.(\d+)\.(k|slot|amp|kind)$")


@dataclass
class RunConfig:
    values: dict
    terms: list = field(default_factory=list)

    def __getattr__(self, name):
        key = name.replace("__", ".")
        if key in self.values:
            return self.values[key]
        raise AttributeError(name)

    def get(self, key):
        return self.values[key]


def parse_config(path) -> RunConfig:
    values = {k: v for k, (_, v) in _SCHEMA.items()}
    raw_terms = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, val = (p.strip() for p in line.split("=", 1))
            m = _PERT_KEY.match(key)
            if m:
                idx, fieldname = int(m.group(1)), m.group(2)
                raw_terms.setdefault(idx, {})[fieldname] = val
                continue
            if key not in _SCHEMA:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            parser = _SCHEMA[key][0]
            try:
                values[key] = parser(val)
            except (ValueError, ConfigError) as exc:
                raise ConfigError(
                    f"{path}:{lineno}: bad value for {key}: {exc}") from exc

    terms = []
    eps = values["perturbation.epsilon"]
    for idx in sorted(raw_terms):
        spec = raw_terms[idx]
        kind = spec.get("kind", "exact")
        if kind not in ("exact", "harmonic"):
            raise ConfigError(f"perturbation.{idx}.kind: unknown kind {kind!r}")
        if "amp" not in spec:
            raise ConfigError(f"perturbation.{idx}: missing amp")
        if "slot" not in spec:
            raise ConfigError(f"perturbation.{idx}: missing slot")
        try:
            amp = float(spec["amp"]) * eps
        except ValueError as exc:
            raise ConfigError(f"perturbation.{idx}.amp: {exc}") from exc
        k = _parse_int_tuple(spec["k"]) if "k" in spec else (0,) * values["grid.dim"]
        if kind == "exact" and "k" not in spec:
            raise ConfigError(f"perturbation.{idx}: exact term needs k")
        slot = _parse_int_tuple(spec["slot"])
        if len(slot) != 2:
            raise ConfigError(f"perturbation.{idx}.slot: need two indices")
        terms.append(PerturbationTerm(k, slot, amp, kind))

    _validate(values, terms)
    return RunConfig(values, terms)


def _validate(values, terms):
    if values["grid.dim"] not in (2, 4):
        raise ConfigError("grid.dim must be 2 or 4")
    res = values["grid.res"]
    if res < 8 or res & (res - 1):
        raise ConfigError("grid.res must be a power of two >= 8")
    if values["grid.backend"] not in ("spectral", "fd4"):
        raise ConfigError("grid.backend must be spectral or fd4")
    if values["flow.mode"] not in ("scf", "gauge-fixed"):
        raise ConfigError("flow.mode must be scf or gauge-fixed")
    for key in ("flow.sigma", "flow.c_diff", "flow.t_max", "flow.rhs_tol",
                "theorem.defect_tol", "theorem.nijenhuis_tol",
                "theorem.period_tol", "linearize.residual_tol"):
        if values[key] is not None and values[key] <= 0:
            raise ConfigError(f"{key} must be positive")
    if values["flow.dt_user"] is not None and values["flow.dt_user"] <= 0:
        raise ConfigError("flow.dt_user must be positive")
    scale = max((abs(t.amp) for t in terms), default=0.0)
    if scale > EPSILON_BASIN_GUARD:
        if not values["perturbation.allow_large"]:
            raise ConfigError(
                f"perturbation amplitude {scale:.3g} exceeds the basin guard "
                f"{EPSILON_BASIN_GUARD}; set perturbation.allow_large = true "
                "to proceed")
        log.warning("perturbation amplitude %.3g exceeds the basin guard %.2f;"
                    " convergence is not covered by the stability result",
                    scale, EPSILON_BASIN_GUARD)
