"""Experiment harness: one subcommand per pipeline, file outputs plus a manifest.

Exit codes: 0 success, 2 configuration error, 3 numeric failure (a
``diagnostic.json`` is written), 4 certificate or validation failure.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import math
import platform
import sys
from pathlib import Path
from typing import Callable, Dict, List

import numpy as np
import scipy

from . import __version__
from ._io import csv_text, json_text
from .config import ConfigError, config_hash, dump_config, load_config
from .flow import FlowSettings, StiffnessError, integrate
from .geom import (DomainError, IntegrationError, MagneticIntensity, MagneticSystem, UnitTangent,
                   flat_plane, half_plane, round_sphere, tanh_cylinder, wavy_plane)
from .hyperbolic import (HyperbolicCylinder, ShootingError, find_closed_orbit,
                         intertwining_sweep, mls_scaling_table, mls_table_csv)
from .stability import SamplerBox, anosov_certificate

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_FAILED = 0, 2, 3, 4
NUMERIC_ERRORS = (StiffnessError, ShootingError, IntegrationError, FloatingPointError)


class Outcome:
    """Artifacts produced by a subcommand and its exit status."""

    def __init__(self):
        self.files: Dict[str, str] = {}
        self.status = EXIT_OK
        self.message = ""

    def add(self, name: str, text: str):
        self.files[name] = text

    def fail(self, message: str, status: int = EXIT_FAILED):
        self.status = status
        self.message = message


def _burns_parts(cfg):
    from .examples.burns import BumpIntensity, BurnsProfile

    profile = BurnsProfile(delta=cfg["delta"], delta1=cfg["delta1"], delta2=cfg["delta2"],
                           delta3=cfg["delta3"], delta4=cfg["delta4"], epsilon=cfg["epsilon"],
                           a=cfg["a"], perturbed=cfg.get("perturbed", True))
    bump = BumpIntensity(delta2=cfg["delta2"], delta4=cfg["delta4"], epsilon=cfg["epsilon"],
                         height=cfg.get("bump_height", 0.5))
    return profile, bump


CHARTS = {"halfplane": half_plane, "flat": flat_plane, "sphere": round_sphere,
          "tanh": tanh_cylinder}


def run_simulate(cfg, args, out: Outcome):
    name = cfg["chart"]
    if name == "wavy":
        chart = wavy_plane(cfg["amplitude"])
    elif name in CHARTS:
        chart = CHARTS[name]()
    else:
        raise ConfigError(f"unknown chart {name!r}; choose from "
                          f"{', '.join(sorted([*CHARTS, 'wavy']))}")
    system = MagneticSystem(chart, MagneticIntensity.constant(cfg["b"]))
    settings = FlowSettings(horizon=cfg["horizon"], rel_tol=cfg["rel_tol"],
                            abs_tol=cfg["abs_tol"], sample_spacing=cfg["sample_spacing"])
    start = UnitTangent((cfg["p0"], cfg["q0"]), cfg["phi0"])
    traj = integrate(system, start, settings)
    out.add("trajectory.csv", traj.to_csv())
    if traj.exited:
        out.message = f"left the chart at t={traj.times[-1]:.17g}"


def run_mls(cfg, args, out: Outcome):
    rows = mls_scaling_table(cfg["ells"], cfg["bs"], winding=cfg["winding"])
    out.add("mls.csv", mls_table_csv(rows))
    bad = [r for r in rows if not r.converged]
    if bad:
        out.add("diagnostic.json", json_text({
            "error": "shooting did not converge",
            "rows": [{"ell": r.ell, "b": r.b, "residual": r.residual} for r in bad]}))
        out.fail(f"{len(bad)} rows did not converge", EXIT_NUMERIC)
        return
    worst = max(r.abs_err for r in rows)
    out.message = f"{len(rows)} rows, max abs_err {worst:.3e}"
    if worst >= cfg["tolerance"]:
        out.fail(f"max abs_err {worst:.3e} >= {cfg['tolerance']:g}")


def run_psl(cfg, args, out: Outcome):
    sweep = intertwining_sweep(cfg["n"], seed=cfg["seed"], t_max=cfg["t_max"])
    out.add("conjugacy.json", json_text(sweep))
    out.message = f"max residual {sweep['max_residual']:.3e}"
    if sweep["max_residual"] >= cfg["tolerance"] or not sweep["c0_is_identity"]:
        out.fail(out.message)


def run_burns_build(cfg, args, out: Outcome):
    from .examples.burns import build_burns_system, validation_report

    profile, bump = _burns_parts(cfg)
    report = validation_report(profile, bump, cfg["s_max"])
    if report["valid"]:
        burns = build_burns_system(profile, bump, (-cfg["s_max"], cfg["s_max"]))
        report["exactness"] = burns.exactness()
    out.add("validation.json", json_text(report))
    if report["valid"]:
        out.message = "all construction clauses hold"
    else:
        out.fail("failed clauses: " + ", ".join(report["failed"]))


def _pair(values, default):
    if not values:
        return default
    if len(values) != 2:
        raise ConfigError("ranges take exactly two numbers")
    return tuple(values)


def run_cert(cfg, args, out: Outcome):
    kind = cfg["system"]
    policy = cfg["u0_policy"] or None
    if kind == "burns":
        from .examples.burns import build_burns_system, burns_certificate_experiment

        profile, bump = _burns_parts(cfg)
        burns = build_burns_system(profile, bump)
        exp = burns_certificate_experiment(
            burns, n=cfg["n"], T=cfg["T"], H=cfg["H"], seed=cfg["seed"], threads=args.threads,
            band_samples=cfg["band_samples"], band_cap=cfg["band_cap"],
            reversal_samples=cfg["reversal_samples"], config=_public(cfg))
        out.add("certificate.json", exp.to_json())
        out.add("band.csv", exp.band_csv())
        out.message = exp.certificate.summary()
        if not exp.passed:
            out.fail(out.message)
        return
    if kind == "halfplane":
        system = MagneticSystem(half_plane(), MagneticIntensity.constant(cfg["b"]))
        box = SamplerBox(_pair(cfg["p_range"], (-1.0, 1.0)), _pair(cfg["q_range"], (0.5, 2.0)))
    elif kind == "flat":
        system = MagneticSystem(flat_plane(), MagneticIntensity.constant(cfg["b"]))
        box = SamplerBox(_pair(cfg["p_range"], (-1.0, 1.0)), _pair(cfg["q_range"], (-1.0, 1.0)))
    else:
        raise ConfigError(f"unknown system {kind!r}; choose burns, halfplane or flat")
    rep = anosov_certificate(system, box, cfg["T"], cfg["H"], cfg["n"], cfg["seed"],
                             u0_policy=policy, threads=args.threads, rel_tol=cfg["rel_tol"],
                             config=_public(cfg))
    out.add("certificate.json", rep.to_json())
    out.message = rep.summary()
    if not rep.passed:
        out.fail(out.message)


def run_length(cfg, args, out: Outcome):
    from .examples.cohomology import (half_plane_primitive, magnetic_length, orbit_curve,
                                      perturbed_curves, riemannian_length)

    cyl = HyperbolicCylinder(cfg["ell"])
    system = cyl.system(cfg["b"])
    orbit = find_closed_orbit(system, cyl, 1, UnitTangent((0.0, 1.0), math.pi / 2))
    prim = half_plane_primitive(system.chart, cfg["b"])
    ref = orbit_curve(orbit, cfg["n_samples"])
    L_ref = magnetic_length(prim, ref, ref)
    rows = [("reference", L_ref, L_ref, 0.0)]
    worst = math.inf
    for i, c in enumerate(perturbed_curves(orbit, cyl, cfg["count"], cfg["seed"],
                                           cfg["amplitude"], n_samples=cfg["n_samples"])):
        L = magnetic_length(prim, c, ref)
        worst = min(worst, L - L_ref)
        rows.append((i, riemannian_length(system.chart, c), L, L - L_ref))
    out.add("magnetic_length.csv",
            csv_text(["index", "riemannian_length", "magnetic_length", "excess"], rows))
    out.message = f"reference {L_ref:.12g}, min excess {worst:.3e}"
    if worst < -cfg["tolerance"]:
        out.fail(out.message)


COMMANDS: Dict[str, Callable] = {
    "simulate": run_simulate,
    "mls-scaling": run_mls,
    "psl-conjugacy": run_psl,
    "burns-build": run_burns_build,
    "anosov-cert": run_cert,
    "magnetic-length": run_length,
}

HELP = {
    "simulate": "integrate one magnetic geodesic and write trajectory.csv",
    "mls-scaling": "closed-orbit lengths on hyperbolic cylinders versus l/sqrt(1-b^2)",
    "psl-conjugacy": "seeded sweep of the b / -b intertwining identity",
    "burns-build": "validate the exact Anosov surface-of-revolution construction",
    "anosov-cert": "sampled Riccati certificate of the Anosov property",
    "magnetic-length": "magnetic length of perturbed closed orbits",
}


def _public(cfg):
    return {k: list(v) if isinstance(v, tuple) else v for k, v in sorted(cfg.items())}


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="magflow", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"magflow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", metavar="PATH", help="key = value file (schema = 1)")
        p.add_argument("--out", metavar="DIR", default=".", help="output directory")
        p.add_argument("--seed", type=int, help="overrides the config seed")
        p.add_argument("--threads", type=int, default=1, help="worker threads (certificate)")
    return parser


def main(argv: List[str] = None) -> int:
    args = build_parser().parse_args(argv)
    started = _now()
    try:
        cfg = load_config(args.config, args.command)
        if args.seed is not None:
            if "seed" not in cfg:
                raise ConfigError(f"{args.command} takes no seed")
            cfg["seed"] = args.seed
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    out = Outcome()
    out.add("config.txt", dump_config(cfg))
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            COMMANDS[args.command](cfg, args, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS + (DomainError,) as exc:
        out.add("diagnostic.json", json_text({"error": type(exc).__name__, "message": str(exc)}))
        out.fail(str(exc), EXIT_NUMERIC)
    except ValueError as exc:
        # construction errors and invalid parameters
        out.add("diagnostic.json", json_text({"error": type(exc).__name__, "message": str(exc)}))
        out.fail(str(exc), EXIT_FAILED)
    for name, text in out.files.items():
        (out_dir / name).write_text(text)
    manifest = {
        "schema": 1,
        "command": args.command,
        "config_hash": config_hash(args.command, _public(cfg)),
        "seed": cfg.get("seed"),
        "started": started,
        "finished": _now(),
        "artifacts": sorted(out.files),
        "exit_code": out.status,
        "versions": {"magflow": __version__, "numpy": np.__version__,
                     "scipy": scipy.__version__, "python": platform.python_version()},
    }
    (out_dir / "manifest.json").write_text(json_text(manifest))
    line = out.message or "done"
    print(f"{args.command}: {line}", file=sys.stdout if out.status == EXIT_OK else sys.stderr)
    return out.status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
