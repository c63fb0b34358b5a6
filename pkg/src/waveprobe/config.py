"""Experiment configuration: ``section.key = value`` lines, ``#`` comments.

Every key, its type and default is listed in ``SCHEMA``. Lists are comma
separated; frequency lists separate vectors with ``;``. Unknown keys,
repeated keys, type mismatches and out-of-range values are rejected with
the offending line number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


def _int(text):
    try:
        return int(text)
    except ValueError:
        raise ValueError(f"expected an integer, got {text!r}") from None


def _float(text):
    try:
        v = float(text)
    except ValueError:
        raise ValueError(f"expected a number, got {text!r}") from None
    if not math.isfinite(v):
        raise ValueError("value must be finite")
    return v


def _floats(text):
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise ValueError("expected a comma-separated list of numbers")
    return tuple(_float(p) for p in parts)


def _ints(text):
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise ValueError("expected a comma-separated list of integers")
    return tuple(_int(p) for p in parts)


def _vectors(text):
    if not text.strip():
        return ()
    return tuple(_floats(v) for v in text.split(";") if v.strip())


def _choice(*opts):
    def parse(text):
        if text not in opts:
            raise ValueError(f"expected one of {', '.join(opts)}, got {text!r}")
        return text
    return parse


def _text(text):
    return text


def _positive(v):
    vals = v if isinstance(v, tuple) else (v,)
    if any(x <= 0 for x in vals):
        return "must be > 0"
    return None


def _nonneg(v):
    vals = v if isinstance(v, tuple) else (v,)
    if any(x < 0 for x in vals):
        return "must be >= 0"
    return None


def _eps(v):
    return None if 0 < v <= 0.5 else "must lie in (0, 0.5]"


def _unit_interval(v):
    return None if 0 < v <= 1 else "must lie in (0, 1]"


def _space_dim(v):
    return None if v in (1, 2) else "must be 1 or 2"


def _at_least(n):
    def check(v):
        vals = v if isinstance(v, tuple) else (v,)
        return None if all(x >= n for x in vals) else f"must be >= {n}"
    return check


def _lambdas(v):
    vals = v if isinstance(v, tuple) else (v,)
    return None if all(x > 1 for x in vals) else "every lambda must exceed 1"


# key -> (parser, default, check, description)
SCHEMA = {
    "grid.n_space": (_int, 2, _space_dim, "space dimension (1 or 2)"),
    "grid.T": (_float, 1.0, _positive, "final time"),
    "grid.L": (_float, 1.0, _positive, "cube side"),
    "grid.nx": (_int, 32, _at_least(8), "spatial intervals per axis"),
    "grid.nt": (_int, 0, _nonneg, "time steps; 0 picks the CFL minimum"),
    "grid.cfl_safety": (_float, 1.0, _unit_interval, "fraction of the CFL limit"),
    "probe.omega0": (_floats, (1.0, 0.0), None, "centre direction of the cap"),
    "probe.epsilon": (_float, 0.1, _eps, "cap radius / control-set margin"),
    "probe.lambdas": (_floats, (4.0, 8.0, 16.0), _lambdas, "lambda ladder"),
    "probe.xi": (_vectors, (), None, "raw frequencies, projected per direction"),
    "probe.eta": (_floats, (-2.0, -1.0, 0.0, 1.0, 2.0), None,
                  "per-axis eta grid in units of pi; xi = (omega.eta, eta)"),
    "probe.omega_count": (_int, 9, _at_least(1), "directions sampled from the cap"),
    "probe.method": (_choice("damped_ibvp", "spacetime_lsq"), "damped_ibvp", None,
                     "vanishing probe construction"),
    "probe.steps_per_lambda": (_int, 16, _nonneg, "nt >= this * lambda along ladders"),
    "probe.nx_per_lambda": (_int, 0, _nonneg, "nx = this * lambda along ladders (0 keeps grid.nx)"),
    "potential.kind": (_choice("zero", "bump", "mode", "file"), "zero", None, "potential family"),
    "potential.amp": (_float, 1.0, None, "amplitude"),
    "potential.radius": (_float, 0.3, _positive, "bump radius"),
    "potential.center": (_floats, (0.5,), None, "bump centre (one value repeats per axis)"),
    "potential.time": (_choice("const", "sin"), "const", None, "bump time profile"),
    "potential.t_on": (_float, 0.0, None, "bump active from this time"),
    "potential.t_off": (_float, -1.0, None, "bump inactive from this time (<0: never)"),
    "potential.xi": (_floats, (math.pi, math.pi, 0.0), None, "mode frequency"),
    "potential.phase": (_float, 0.0, None, "mode phase"),
    "potential.path": (_text, "", None, "FieldFile for kind = file"),
    "run.seed": (_int, 0, _nonneg, "random seed"),
    "run.count": (_int, 20, _nonneg, "ensemble size / number of probes"),
    "run.variant": (_choice("c1a", "c1b", "tc2", "tc4"), "c1a", None, "Carleman variant"),
    "run.mu": (_float, 1e-3, _positive, "relative Tikhonov weight"),
    "run.refine": (_int, 0, _nonneg, "extra reconstruction passes with q1 = current estimate"),
    "run.basis": (_choice("union", "sampled", "lattice"), "union", None,
                  "fit modes: sampled frequencies, the pi-lattice box, or both"),
    "run.order": (_int, 1, _nonneg, "lattice box half-width in units of pi"),
    "run.backend": (_choice("auto", "cython", "python"), "auto", None, "stencil backend"),
    "run.study": (_choice("forward", "identity", "decaying"), "forward", None,
                  "convergence study"),
    "run.nx_list": (_ints, (16, 32, 64), _at_least(8), "grids for the convergence study"),
    "run.lambda": (_float, 8.0, _lambdas, "lambda for single-lambda runs"),
    "run.out": (_text, "", None, "output directory when --out is absent"),
    "tolerance.obstruction": (_float, 1e-12, _positive, "max data difference for hidden potentials"),
    "tolerance.identity": (_float, 5e-2, _positive, "identity mismatch gate"),
    "tolerance.order": (_float, 1.5, None, "minimum fitted convergence order"),
}


@dataclass
class ExperimentConfig:
    values: dict = field(default_factory=dict)
    explicit: frozenset = frozenset()

    def __getitem__(self, key):
        return self.values[key]

    def section(self, name: str) -> dict:
        pre = name + "."
        return {k[len(pre):]: v for k, v in self.values.items() if k.startswith(pre)}


def parse_config(text: str) -> ExperimentConfig:
    vals = {k: entry[1] for k, entry in SCHEMA.items()}
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'section.key = value', got {raw.strip()!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in seen:
            raise ConfigError(f"{key} already set on line {seen[key]}", lineno)
        parser, _, check, _ = SCHEMA[key]
        try:
            v = parser(value)
        except ValueError as e:
            raise ConfigError(f"{key}: {e}", lineno) from None
        msg = check(v) if check else None
        if msg:
            raise ConfigError(f"{key} = {value}: {msg}", lineno)
        vals[key] = v
        seen[key] = lineno
    _cross_checks(vals, seen)
    return ExperimentConfig(vals, frozenset(seen))


def _cross_checks(vals, seen):
    n = vals["grid.n_space"]
    line = seen.get("probe.omega0")
    if len(vals["probe.omega0"]) != n:
        raise ConfigError(f"probe.omega0 needs {n} components", line)
    if math.hypot(*vals["probe.omega0"]) == 0:
        raise ConfigError("probe.omega0 must be nonzero", line)
    for v in vals["probe.xi"]:
        if len(v) != n + 1:
            raise ConfigError(f"probe.xi vectors need {n + 1} components", seen.get("probe.xi"))
    if len(vals["potential.xi"]) != n + 1:
        raise ConfigError(f"potential.xi needs {n + 1} components", seen.get("potential.xi"))
    if len(vals["potential.center"]) not in (1, n):
        raise ConfigError(f"potential.center needs 1 or {n} components", seen.get("potential.center"))
    if vals["potential.kind"] == "file" and not vals["potential.path"]:
        raise ConfigError("potential.kind = file requires potential.path", seen.get("potential.kind"))


def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return "; ".join(_fmt_value(x) for x in v)
        return ", ".join(_fmt_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def normalize(cfg: ExperimentConfig) -> str:
    """Canonical text with every key spelled out; parse(normalize(c)) == c."""
    lines = []
    section = None
    for key in SCHEMA:
        sec = key.split(".", 1)[0]
        if sec != section:
            if section is not None:
                lines.append("")
            lines.append(f"# {sec}")
            section = sec
        lines.append(f"{key} = {_fmt_value(cfg.values[key])}")
    return "\n".join(lines) + "\n"
