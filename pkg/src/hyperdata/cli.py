"""Command-line front end.

Subcommands: check-dec | mass | perturb-strict | deform | wang | indicial | ode.
Each run writes a JSON report plus CSV series (and figures) into the output
directory.  Exit status: 0 on certified success, 2 on certification failure,
1 on usage/configuration errors.  A configuration document (key = value lines
with dotted keys, or a JSON object) can seed any option; explicit flags win.

Set HYPERDATA_THREADS to bound the worker threads used for concurrent shell
charges (default 1, serial).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from . import catalog, constraints, deformation, elliptic
from .errors import HyperdataError
from .fields import save_field
from .grid import build_grid
from .mass import mass_functional
from .reports import ReportWriter

SCHEMA_VERSION = 1

_USAGE_ERROR, _CERT_FAILURE = 1, 2


def _parse_config_file(path):
    text = open(path, "r", encoding="utf-8").read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        flat = {}

        def flatten(prefix, obj):
            for key, val in obj.items():
                name = f"{prefix}.{key}" if prefix else key
                if isinstance(val, dict):
                    flatten(name, val)
                else:
                    flat[name] = val

        flatten("", json.loads(text))
        return flat
    config = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"config line without '=': {line!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        config[key] = val
    return config


def _sphere_expr(expr, grid):
    """Sphere samples from 'c', 'x1:c', 'x2:c', 'x3:c' or sums 'a+x1:b'."""
    vals = np.zeros(grid.num_angular)
    for term in str(expr).split("+"):
        term = term.strip()
        if ":" in term:
            name, coeff = term.split(":")
            idx = {"x1": 0, "x2": 1, "x3": 2}[name.strip()]
            vals += float(coeff) * grid.sphere.x[idx]
        else:
            vals += float(term)
    return vals


def _build_data(args, grid):
    family = args.family
    if family == "hyperbolic":
        return catalog.hyperbolic_data(grid)
    if family == "adss":
        return catalog.adss_data(args.m, grid)
    if family == "wang":
        spec = catalog.WangSpec(m=_sphere_expr(args.wang_m, grid),
                                p_rr=_sphere_expr(args.wang_p_rr, grid))
        return catalog.wang_data(spec, grid)
    if family == "conf-hyp":
        return catalog.conf_hyp_data(_sphere_expr(args.v0, grid),
                                     _sphere_expr(args.y0, grid), grid)
    raise ValueError(f"unknown data family {family!r}")


def _base_report(args, seed):
    echo = {k: v for k, v in sorted(vars(args).items())
            if k not in ("func",) and not k.startswith("_")}
    return {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "command": args.command,
        "config": echo,
        "seed": seed,
        "timings": {},
    }


def _finish(writer, report, status, started):
    report["timings"]["total_seconds"] = time.time() - started
    report["status"] = "ok" if status == 0 else "certification-failed"
    writer.write_json("report.json", report)
    return status


def _cmd_mass(args, writer, report, grid, started):
    data = _build_data(args, grid)
    rep = mass_functional(data)
    report["results"] = {
        "masses": rep.masses, "errors": rep.errors,
        "normalization": rep.normalization, "tau": rep.tau,
        "radii": rep.radii, "extrapolated": rep.extrapolated,
    }
    writer.mass_csv(rep)
    writer.mass_figure(rep)
    return _finish(writer, report, 0, started)


def _cmd_check_dec(args, writer, report, grid, started):
    data = _build_data(args, grid)
    dec = constraints.check_dec(data, gamma=args.gamma, strict=args.strict)
    report["results"] = {
        "satisfied": dec.satisfied, "gamma": dec.gamma, "strict": dec.strict,
        "min_margin": dec.min_margin, "worst_radius": dec.worst_radius,
    }
    writer.margin_csv(grid, dec.margin_profile)
    writer.margin_figure(grid, dec.margin_profile, gamma=dec.gamma)
    return _finish(writer, report, 0 if dec.satisfied else _CERT_FAILURE, started)


def _save_result_fields(writer, result, grid):
    save_field(result.u, os.path.join(writer.outdir, "u.hypf"))
    save_field(result.Y, os.path.join(writer.outdir, "Y.hypf"))
    save_field(result.data.e, os.path.join(writer.outdir, "e.hypf"))
    save_field(result.data.pi, os.path.join(writer.outdir, "pi.hypf"))
    writer.written += [os.path.join(writer.outdir, name)
                       for name in ("u.hypf", "Y.hypf", "e.hypf", "pi.hypf")]


def _deformation_report(args, writer, report, grid, result, started, ok=True):
    dec = result.margin_report()
    report["results"] = {
        "t": result.t, "gamma": result.gamma,
        "certificates": result.certificates,
        "mass_before": result.mass_before, "mass_after": result.mass_after,
        "strict_dec": dec.satisfied, "min_margin": dec.min_margin,
    }
    writer.history_csv(result.history)
    writer.margin_csv(grid, dec.margin_profile)
    writer.residual_figure(result.history,
                           key="residual" if any("residual" in h for h in result.history)
                           else "min_margin")
    writer.margin_figure(grid, dec.margin_profile, gamma=result.gamma)
    _save_result_fields(writer, result, grid)
    return _finish(writer, report, 0 if (ok and dec.satisfied) else _CERT_FAILURE, started)


def _cmd_perturb_strict(args, writer, report, grid, started):
    data = _build_data(args, grid)
    result = deformation.perturb_to_strict_dec(data, epsilon=args.epsilon)
    return _deformation_report(args, writer, report, grid, result, started)


def _cmd_deform(args, writer, report, grid, started):
    data = _build_data(args, grid)
    if args.perturb_first:
        data = deformation.perturb_to_strict_dec(data, epsilon=args.epsilon).data
    result = deformation.deform_to_conformally_hyperbolic(
        data, lam=args.cutoff, tol=args.newton_tol)
    if result.expansion is not None:
        report["expansion"] = {
            "v0_mean": float(np.mean(result.expansion.v0)),
            "v_remainder_rate": result.expansion.v_remainder_rate,
        }
    return _deformation_report(args, writer, report, grid, result, started)


def _cmd_wang(args, writer, report, grid, started):
    data = _build_data(args, grid)
    result = deformation.perturb_wang(data, epsilon=args.epsilon)
    report["gauge"] = {"passes": result.gauge["passes"],
                       "residual_coefficient": result.gauge["residual_coefficient"]}
    return _deformation_report(args, writer, report, grid, result, started)


def _cmd_indicial(args, writer, report, grid, started):
    record = elliptic.indicial_exponents(args.op, args.n)
    report["results"] = {
        "kind": record.kind, "n": record.n,
        "indicial_radius": str(record.R),
        "components": {c.label: [str(c.delta_minus), str(c.delta_plus)]
                       for c in record.components},
    }
    return _finish(writer, report, 0, started)


def _cmd_ode(args, writer, report, grid, started):
    f = args.f_amplitude * np.exp(-args.f_rate * grid.r)
    problem = elliptic.OdeProblem(grid=grid, A=args.A, B=args.B, f=f,
                                  tail_rate=args.f_rate)
    u = elliptic.radial_ode_solve(problem, Lambda_minus=args.lambda_minus,
                                  Lambda_plus=args.lambda_plus)
    from .diagnostics import decay_fit
    from .fields import ScalarField

    fit = decay_fit(ScalarField(grid, np.broadcast_to(
        u[:, None], (grid.Nr, grid.num_angular)).copy()))
    report["results"] = {
        "delta_minus": problem.delta_minus, "delta_plus": problem.delta_plus,
        "fitted_rate": fit.rate, "fit_half_width": fit.half_width,
        "sup": float(np.max(np.abs(u))),
    }
    writer.write_csv("ode_solution.csv", ["r", "u"], list(zip(grid.r, u)))
    writer.radial_figure(grid.r, [u], ["u"], "|u(r)|", "ode_solution.png")
    return _finish(writer, report, 0, started)


_COMMANDS = {
    "mass": _cmd_mass,
    "check-dec": _cmd_check_dec,
    "perturb-strict": _cmd_perturb_strict,
    "deform": _cmd_deform,
    "wang": _cmd_wang,
    "indicial": _cmd_indicial,
    "ode": _cmd_ode,
}


def _add_grid_args(p):
    p.add_argument("--n", type=int, default=3, help="spatial dimension")
    p.add_argument("--r0", type=float, default=1.0, help="inner radius")
    p.add_argument("--rmax", type=float, default=12.0, help="outer truncation radius")
    p.add_argument("--nr", type=int, default=64, help="radial nodes")
    p.add_argument("--degree", type=int, default=8, help="spherical-harmonic degree L")


def _add_family_args(p):
    p.add_argument("--family", default="hyperbolic",
                   choices=["hyperbolic", "adss", "wang", "conf-hyp"])
    p.add_argument("--m", type=float, default=1.0, help="AdSS mass parameter")
    p.add_argument("--wang-m", default="0", help="Wang m coefficient (c or x1:c sums)")
    p.add_argument("--wang-p-rr", default="0", help="Wang p_rr coefficient")
    p.add_argument("--v0", default="0", help="conformal leading coefficient v0")
    p.add_argument("--y0", default="0", help="conformal leading coefficient (Y0)_r")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hyperdata",
        description="Asymptotically hyperbolic initial-data pipelines")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="configuration document (key=value or JSON)")
    common.add_argument("--output", default="hyperdata_out", help="output directory")
    common.add_argument("--seed", type=int, default=0, help="seed recorded in reports")
    common.add_argument("--no-figures", action="store_true",
                        help="skip figure rendering (CSV/JSON only)")

    for name, help_text in [
        ("mass", "mass functional via charge integrals"),
        ("check-dec", "dominant energy condition check"),
        ("perturb-strict", "strict-DEC perturbation pipeline"),
        ("deform", "conformally hyperbolic deformation"),
        ("wang", "Wang-gauge perturbation pipeline"),
    ]:
        p = sub.add_parser(name, parents=[common], help=help_text)
        _add_grid_args(p)
        _add_family_args(p)
        if name == "check-dec":
            p.add_argument("--strict", action="store_true")
            p.add_argument("--gamma", type=float, default=0.0)
        if name in ("perturb-strict", "deform", "wang"):
            p.add_argument("--epsilon", type=float, default=1e-2,
                           help="mass-drift tolerance")
        if name == "deform":
            p.add_argument("--cutoff", type=float, default=1.4,
                           help="gluing radius lambda")
            p.add_argument("--newton-tol", type=float, default=1e-7)
            p.add_argument("--perturb-first", action="store_true",
                           help="run the strict-DEC pipeline first")

    p = sub.add_parser("indicial", parents=[common], help="model-operator indicial data")
    p.add_argument("--op", default="scalar", choices=["scalar", "vector"])
    p.add_argument("--n", type=int, default=3)

    p = sub.add_parser("ode", parents=[common], help="radial ODE engine")
    _add_grid_args(p)
    p.add_argument("--A", type=float, default=2.0)
    p.add_argument("--B", type=float, default=-3.0)
    p.add_argument("--f-rate", type=float, default=5.0)
    p.add_argument("--f-amplitude", type=float, default=1.0)
    p.add_argument("--lambda-minus", type=float, default=0.0)
    p.add_argument("--lambda-plus", type=float, default=0.0)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and _USAGE_ERROR
    try:
        if args.config:
            overrides = _parse_config_file(args.config)
            if str(overrides.get("schema", SCHEMA_VERSION)) not in (str(SCHEMA_VERSION),):
                raise ValueError(f"unsupported config schema {overrides.get('schema')}")
            explicit = {a.split("=")[0].lstrip("-").replace("-", "_")
                        for a in (argv or sys.argv[1:]) if a.startswith("--")}
            for key, val in overrides.items():
                attr = key.split(".")[-1].replace("-", "_")
                if attr == "schema" or attr in explicit:
                    continue
                if hasattr(args, attr):
                    current = getattr(args, attr)
                    cast = type(current) if current is not None else str
                    setattr(args, attr, cast(val) if cast is not bool
                            else str(val).lower() in ("1", "true", "yes"))
    except (OSError, ValueError, KeyError) as exc:
        print(f"hyperdata: configuration error: {exc}", file=sys.stderr)
        return _USAGE_ERROR

    started = time.time()
    threads = os.environ.get("HYPERDATA_THREADS")
    if threads:
        os.environ.setdefault("OMP_NUM_THREADS", threads)
    writer = ReportWriter(args.output, figures=not args.no_figures)
    report = _base_report(args, args.seed)
    try:
        if args.command in ("indicial",):
            grid = None
        else:
            grid = build_grid(args.n, args.r0, args.rmax, args.nr, args.degree)
        return _COMMANDS[args.command](args, writer, report, grid, started)
    except HyperdataError as exc:
        report["error"] = {"type": type(exc).__name__, "message": str(exc)}
        _finish(writer, report, _CERT_FAILURE, started)
        print(f"hyperdata: {exc}", file=sys.stderr)
        return _CERT_FAILURE
    except (ValueError, KeyError) as exc:
        print(f"hyperdata: usage error: {exc}", file=sys.stderr)
        return _USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
