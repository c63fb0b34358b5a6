"""Command-line runner: ``waveprobe <subcommand> --config <path> --out <dir> [--seed N]``.

Exit status: 0 ok, 2 configuration error, 3 numerical failure, 4 I/O error.
Errors print one line ``waveprobe: error kind=<kind> code=<n> message=<text>``
on stderr. All CSV numbers use shortest round-trip decimals, so identical
inputs give byte-identical outputs.
"""

from __future__ import annotations

import argparse
import csv
import io as _stringio
import math
import os
import sys

import numpy as np

from . import io as wio
from .carleman import carleman_ladder, random_admissible
from .config import ConfigError, ExperimentConfig, normalize, parse_config
from .go import build_decaying_go, build_vanishing_go, project_xi
from .grid import GridError, cap_sample, default_control_sets, make_grid, cfl_nt
from .ibvp import SolverError, boundary_operator
from .inversion import (
    SyntheticProvider,
    admissible_probes,
    fit_basis,
    fourier_reference,
    identity_check,
    obstruction_demo,
    plane_frequencies,
    reconstruct_refined,
    run_probe,
)
from .potentials import bump, mode
from .studies import (
    decaying_study,
    forward_study,
    identity_study,
    ladder_grid,
    loglog_slope,
    observed_order,
)

SUBCOMMANDS = ("forward", "go", "carleman", "probe", "reconstruct", "obstruct", "convergence")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


# ---------------------------------------------------------------- helpers


def _num(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return repr(float(v))


class Outputs:
    """Collects artifacts in memory; ``flush`` writes them in a fixed order."""

    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        self.files: dict[str, str] = {}

    def csv(self, name: str, header, rows) -> None:
        buf = _stringio.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_num(v) for v in r])
        self.files[name] = buf.getvalue()

    def text(self, name: str, text: str) -> None:
        self.files[name] = text

    def flush(self) -> None:
        os.makedirs(self.out_dir, exist_ok=True)
        for name in sorted(self.files):
            wio._write(os.path.join(self.out_dir, name), self.files[name])


def make_base_grid(cfg: ExperimentConfig):
    g = cfg.section("grid")
    nt = g["nt"] or cfl_nt(g["n_space"], g["T"], g["L"], g["nx"], g["cfl_safety"])
    return make_grid(g["n_space"], g["T"], g["L"], nt, g["nx"], g["cfl_safety"])


def make_potential(cfg: ExperimentConfig, grid):
    p = cfg.section("potential")
    kind = p["kind"]
    if kind == "zero":
        return np.zeros(grid.shape)
    if kind == "bump":
        t_off = None if p["t_off"] < 0 else p["t_off"]
        center = p["center"] * grid.n_space if len(p["center"]) == 1 else p["center"]
        return bump(grid, p["amp"], p["radius"], center, p["time"], p["t_on"], t_off)
    if kind == "mode":
        return mode(grid, p["xi"], p["amp"], p["phase"])
    fgrid, values = wio.load_field(p["path"])
    if fgrid.shape != grid.shape or np.iscomplexobj(values):
        raise ConfigError(f"potential file grid {fgrid.shape} does not match {grid.shape}")
    return values


def _rung(cfg, lam):
    g = cfg.section("grid")
    p = cfg.section("probe")
    return ladder_grid(g["n_space"], g["T"], g["L"], g["nx"], lam, p["steps_per_lambda"],
                       p["nx_per_lambda"], g["cfl_safety"])


def _raw_xis(cfg, n_space):
    xis = cfg["probe.xi"]
    if xis:
        return [np.array(x) for x in xis]
    return [np.array([0.0] * n_space + [math.pi / 2])]


def _backend(cfg):
    b = cfg["run.backend"]
    return None if b == "auto" else b


# ---------------------------------------------------------------- subcommands


def run_forward(cfg, out: Outputs, seed: int):
    grid = make_base_grid(cfg)
    ctrl = default_control_sets(grid, cfg["probe.omega0"], cfg["probe.epsilon"])
    q = make_potential(cfg, grid)
    g = admissible_probes(grid, ctrl, 1, seed)[0]
    ds = boundary_operator(grid, q, g, None, ctrl, cfg["potential.kind"], _backend(cfg))
    out.text("forward.wpd", wio.dump_dataset(ds))
    out.csv("forward.csv", ["quantity", "value"], [
        ("max_abs_neumann_G", float(np.max(np.abs(ds.neumann_G)))),
        ("max_abs_final_value", float(np.max(np.abs(ds.final_value)))),
        ("n_F", int(ds.F_facets.size)),
        ("n_G", int(ds.G_facets.size)),
    ])


def run_go(cfg, out: Outputs, seed: int):
    omega = np.asarray(cfg["probe.omega0"], float)
    omega = omega / np.linalg.norm(omega)
    lams = cfg["probe.lambdas"]
    rows, norms = [], {"decaying": [], "vanishing": []}
    method = cfg["probe.method"]
    for lam in lams:
        grid = _rung(cfg, lam)
        q = make_potential(cfg, grid)
        xi = project_xi(_raw_xis(cfg, grid.n_space)[0], omega)
        dec = build_decaying_go(grid, q, lam, omega, xi, backend=_backend(cfg))
        van = build_vanishing_go(grid, q, lam, omega, cfg["probe.epsilon"], method=method,
                                 backend=_backend(cfg))
        for sol in (dec, van):
            rows.append((sol.kind, sol.method, lam, grid.nx, grid.nt, sol.remainder_norm,
                         sol.residual_norm, sol.iterations))
            norms[sol.kind].append(sol.remainder_norm)
        tag = f"lam{_num(lam)}"
        out.text(f"go_decaying_remainder_{tag}.wpf", wio.dump_field(grid, dec.remainder))
        out.text(f"go_vanishing_remainder_{tag}.wpf", wio.dump_field(grid, np.real(van.remainder)))
    out.csv("go.csv", ["kind", "method", "lambda", "nx", "nt", "remainder_norm",
                       "residual_norm", "iterations"], rows)
    out.csv("go_slopes.csv", ["kind", "slope"],
            [(k, loglog_slope(lams, v)) for k, v in norms.items()])


def run_carleman(cfg, out: Outputs, seed: int):
    omega = np.asarray(cfg["probe.omega0"], float)
    omega = omega / np.linalg.norm(omega)
    lams = cfg["probe.lambdas"]
    variant = cfg["run.variant"]
    grids, ens, qs = [], [], []
    for lam in lams:
        grid = _rung(cfg, lam)
        q = make_potential(cfg, grid)
        grids.append(grid)
        qs.append(q)
        ens.append(random_admissible(grid, q, variant, seed, cfg["run.count"],
                                     backend=_backend(cfg)))
    summary = carleman_ladder(grids, ens, qs, omega, lams, variant)
    term_names = None
    rows = []
    for lam, reps in zip(lams, summary.reports):
        for i, r in enumerate(reps):
            if term_names is None:
                term_names = list(r.lhs_terms) + list(r.rhs_terms)
            terms = {**r.lhs_terms, **r.rhs_terms}
            rows.append([lam, i] + [terms[k] for k in term_names] + [r.lhs, r.rhs, r.ratio])
    if term_names is None:
        term_names = []
    out.csv("carleman_terms.csv", ["lambda", "member"] + term_names + ["lhs", "rhs", "ratio"], rows)
    out.csv("carleman.csv", ["lambda", "nx", "nt", "members", "sup_ratio"],
            [(lam, g.nx, g.nt, e.count, s) for lam, g, e, s in
             zip(lams, grids, ens, summary.sup_ratio)])


def run_probe_cmd(cfg, out: Outputs, seed: int):
    grid = make_base_grid(cfg)
    ctrl = default_control_sets(grid, cfg["probe.omega0"], cfg["probe.epsilon"])
    q = make_potential(cfg, grid)
    lam = cfg["run.lambda"]
    rows = []
    for raw in _raw_xis(cfg, grid.n_space):
        xi = project_xi(raw, ctrl.omega0)
        exp = run_probe(grid, None, q, lam, ctrl.omega0, xi, ctrl,
                        method=cfg["probe.method"], backend=_backend(cfg))
        ic = identity_check(exp)
        ref = fourier_reference(grid, q, xi)
        rows.append([lam, grid.nx, grid.nt] + [xi.xi[a] for a in range(grid.n_space + 1)]
                    + [ic.volume_side.real, ic.volume_side.imag, ic.boundary_side.real,
                       ic.boundary_side.imag, ic.mismatch, ref.real, ref.imag,
                       ic.mismatch <= cfg["tolerance.identity"]])
    xi_cols = [f"xi{a}" for a in range(grid.n_space + 1)]
    out.csv("probe.csv", ["lambda", "nx", "nt"] + xi_cols + [
        "volume_re", "volume_im", "boundary_re", "boundary_im", "mismatch",
        "reference_re", "reference_im", "within_tolerance"], rows)


def run_reconstruct(cfg, out: Outputs, seed: int):
    grid = make_base_grid(cfg)
    eps = cfg["probe.epsilon"]
    ctrl = default_control_sets(grid, cfg["probe.omega0"], eps)
    q = make_potential(cfg, grid)
    omegas = cap_sample(ctrl.omega0, eps, cfg["probe.omega_count"])
    eta = math.pi * np.asarray(cfg["probe.eta"])
    xi_lists = [plane_frequencies(w, eta) for w in omegas]
    provider = SyntheticProvider(grid, q, ctrl, cfg["potential.kind"], _backend(cfg))
    freqs = [x.xi for xs in xi_lists for x in xs]
    modes = fit_basis(cfg["run.basis"], grid.n_space, freqs, cfg["run.order"])
    rep = reconstruct_refined(grid, None, provider, omegas, xi_lists, cfg["run.lambda"],
                              cfg["run.mu"], ctrl, refine=cfg["run.refine"], truth=q,
                              backend=_backend(cfg), modes=modes)
    out.text("q_est.wpf", wio.dump_field(grid, rep.q_est))
    n = grid.n_space
    rows = []
    for s, r in zip(rep.samples, rep.residuals):
        ref = s.reference if s.reference is not None else complex(math.nan, math.nan)
        rows.append(list(s.omega) + list(s.xi.xi) + [s.estimate.real, s.estimate.imag,
                                                     ref.real, ref.imag, r])
    out.csv("reconstruct_samples.csv",
            [f"omega{a}" for a in range(n)] + [f"xi{a}" for a in range(n + 1)]
            + ["estimate_re", "estimate_im", "reference_re", "reference_im", "residual"], rows)
    out.csv("reconstruct.csv", ["lambda", "nx", "nt", "samples", "modes", "mu", "passes",
                                "relative_error", "unsampled_fraction", "residual_norm"],
            [(cfg["run.lambda"], grid.nx, grid.nt, len(rep.samples), len(rep.modes), rep.mu,
              rep.passes, rep.relative_error, rep.unsampled_fraction, rep.residual_norm)])


def run_obstruct(cfg, out: Outputs, seed: int):
    grid = make_base_grid(cfg)
    ctrl = default_control_sets(grid, cfg["probe.omega0"], cfg["probe.epsilon"])
    q = make_potential(cfg, grid)
    probes = admissible_probes(grid, ctrl, cfg["run.count"], seed)
    rep = obstruction_demo(grid, q, probes, ctrl, require_hidden=False, backend=_backend(cfg))
    out.csv("obstruct_probes.csv", ["probe", "difference"], list(enumerate(rep.per_probe)))
    out.csv("obstruct.csv", ["probes", "max_difference", "support_in_hidden_region",
                             "support_in_discrete_region", "within_tolerance"],
            [(len(probes), rep.max_difference, rep.support_in_hidden_region,
              rep.support_in_discrete_region,
              rep.max_difference <= cfg["tolerance.obstruction"])])


def run_convergence(cfg, out: Outputs, seed: int):
    study = cfg["run.study"]
    nxs = cfg["run.nx_list"]
    g = cfg.section("grid")
    backend = _backend(cfg)

    def q_fn(grid):
        return make_potential(cfg, grid)

    if study == "forward":
        rows = forward_study(nxs, g["n_space"], g["T"], g["L"], backend)
        label = "relative_l2_error"
    elif study == "identity":
        rows = identity_study(nxs, q_fn, cfg["run.lambda"], _raw_xis(cfg, g["n_space"])[0],
                              cfg["probe.omega0"], cfg["probe.epsilon"], g["T"], g["L"], backend)
        label = "mismatch"
    else:
        rows = decaying_study(nxs, q_fn, cfg["run.lambda"], _raw_xis(cfg, g["n_space"])[0],
                              cfg["probe.omega0"], g["T"], g["L"], backend)
        label = "relative_residual"
    out.csv("convergence.csv", ["study", "nx", "nt", label], [(study,) + tuple(r) for r in rows])
    order = observed_order(rows)
    out.csv("convergence_fit.csv", ["study", "order", "min_order", "passes"],
            [(study, order, cfg["tolerance.order"], order >= cfg["tolerance.order"])])


RUNNERS = {
    "forward": run_forward,
    "go": run_go,
    "carleman": run_carleman,
    "probe": run_probe_cmd,
    "reconstruct": run_reconstruct,
    "obstruct": run_obstruct,
    "convergence": run_convergence,
}


# ---------------------------------------------------------------- entry point


def run_subcommand(name: str, cfg: ExperimentConfig, out_dir: str, seed: int | None = None) -> None:
    if name not in RUNNERS:
        raise ConfigError(f"unknown subcommand {name!r}")
    seed = cfg["run.seed"] if seed is None else seed
    out = Outputs(out_dir)
    out.text("config.normalized", normalize(cfg))
    with np.errstate(over="raise", invalid="raise", divide="ignore"):
        RUNNERS[name](cfg, out, seed)
    out.flush()


def _fail(kind: str, code: int, msg) -> int:
    text = " ".join(str(msg).split())
    print(f"waveprobe: error kind={kind} code={code} message={text}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="waveprobe", description=__doc__.split("\n")[0])
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", required=True)
    ap.add_argument("--out", default=None)
    ap.add_argument("--seed", type=int, default=None)
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except (OSError, UnicodeDecodeError) as e:
        return _fail("io", EXIT_IO, e)
    try:
        cfg = parse_config(text)
        if args.seed is not None and args.seed < 0:
            raise ConfigError("--seed must be >= 0")
        out_dir = args.out or cfg["run.out"]
        if not out_dir:
            raise ConfigError("no output directory: pass --out or set run.out")
        run_subcommand(args.subcommand, cfg, out_dir, args.seed)
    except (ConfigError, GridError) as e:
        return _fail("config", EXIT_CONFIG, e)
    except (wio.FormatError, OSError) as e:
        return _fail("io", EXIT_IO, e)
    except (SolverError, FloatingPointError, np.linalg.LinAlgError, ArithmeticError) as e:
        return _fail("numerical", EXIT_NUMERIC, e)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
