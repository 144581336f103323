"""Command line entry point: ``morpho1d <subcommand>``."""

from __future__ import annotations

import argparse
import itertools
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .chemistry import PicardDivergence, run_chem
from .io import emit_timeseries, load_experiment
from .mechanics import run_mech
from .params import ParameterError, parse_config_text, validate_parameters
from .stability import SYSTEMS, stability_verdict

log = logging.getLogger("morpho1d")

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2

_LOG_LEVELS = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


class UsageError(Exception):
    pass


def _setup_logging():
    level = os.environ.get("MORPHO_LOG", "quiet").lower()
    logging.basicConfig(
        level=_LOG_LEVELS.get(level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _parse_sets(pairs) -> dict[str, str]:
    out = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise UsageError(f"--set expects key=value, got {pair!r}")
        k, v = pair.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _read_config(path) -> str:
    if path is None:
        return ""
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None


def _experiment(args, kind):
    sets = _parse_sets(args.set)
    if getattr(args, "delta_c", None) is not None:
        sets["delta_c"] = str(args.delta_c)
    if kind == "chem":
        return load_experiment(_read_config(args.config), sets, 0.1, (200, 0.0, 1.0))
    return load_experiment(_read_config(args.config), sets, 0.01, (1000, 0.0, 5.0))


def cmd_check(args) -> int:
    text = _read_config(args.config)
    sets = _parse_sets(args.set)
    if args.delta_c is not None:
        sets["delta_c"] = str(args.delta_c)
    systems = args.system or ["chem-continuous"]
    numeric, _ = parse_config_text(text)
    if not any(s.startswith("mech") for s in systems):
        # mu and alpha do not enter the chemistry spectra.
        for key in ("mu", "alpha"):
            if key not in numeric and key not in sets:
                sets[key] = "1"
    exp = load_experiment(text, sets, 0.1, (200, 0.0, 1.0))
    p = exp.params
    domain = args.domain_size if args.domain_size is not None else exp.mesh.length
    h = args.h if args.h is not None else exp.mesh.h
    out_lines, reports = [], []
    for system in systems:
        rep = stability_verdict(p, system, h=h, domain_size=domain)
        reports.append(rep)
        out_lines.append(f"[{system}]")
        out_lines += rep.lines()
    out_lines.append("[parameters]")
    out_lines += validate_parameters(p, domain).lines()
    print("\n".join(out_lines))
    if args.out:
        target = Path(args.out) / "spectrum.ndjson"
        if target.exists() and not args.force:
            raise UsageError(f"{target} exists; use --force to overwrite")
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text("".join(r.ndjson() for r in reports), encoding="utf-8")
    return EXIT_OK


def _simulate(kind, exp, out, force):
    if kind == "mech":
        traj = run_mech(
            exp.params, exp.mesh, exp.mech_ic(), exp.dt, exp.t_end,
            sample_times=exp.sample_times, sample_every=exp.sample_every,
        )
    else:
        traj = run_chem(
            exp.params, exp.mesh, exp.chem_ic(), exp.dt, exp.t_end,
            settings=exp.picard, sample_times=exp.sample_times, sample_every=exp.sample_every,
        )
    files = emit_timeseries(traj, out, force=force)
    return traj, files


def cmd_simulate(args, kind) -> int:
    exp = _experiment(args, kind)
    out = Path(args.out or f"out-{kind}")
    traj, files = _simulate(kind, exp, out, args.force)
    last = traj.diagnostics[-1]
    print(f"wrote {len(files)} files to {out} (t_end={traj.final.t:g})")
    print(" ".join(f"{k}={v:.6g}" for k, v in last.items() if isinstance(v, float)))
    return EXIT_OK


def _sweep_point(job):
    kind, text, sets, out, force = job
    if kind == "chem":
        exp = load_experiment(text, sets, 0.1, (200, 0.0, 1.0))
    else:
        exp = load_experiment(text, sets, 0.01, (1000, 0.0, 5.0))
    _simulate(kind, exp, out, force)
    return str(out)


def cmd_sweep(args) -> int:
    text = _read_config(args.config)
    base = _parse_sets(args.set)
    axes = []
    for spec in args.grid or ():
        if "=" not in spec:
            raise UsageError(f"--grid expects key=v1,v2,..., got {spec!r}")
        key, values = spec.split("=", 1)
        vals = [v.strip() for v in values.split(",") if v.strip()]
        if not vals:
            raise UsageError(f"--grid {key} has no values")
        axes.append([(key.strip(), v) for v in vals])
    if not axes:
        raise UsageError("sweep needs at least one --grid axis")
    root = Path(args.out or "sweep")
    jobs = []
    for point in itertools.product(*axes):
        sets = dict(base)
        sets.update(point)
        name = "_".join(f"{k}={v}" for k, v in point)
        jobs.append((args.kind, text, sets, root / name, args.force))
    # Validate every point before any work starts.
    for kind, t, sets, out, force in jobs:
        _ = load_experiment(t, sets)
        if out.exists() and not force and any(out.iterdir()):
            raise UsageError(f"{out} exists; use --force to overwrite")
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            done = list(pool.map(_sweep_point, jobs))
    else:
        done = [_sweep_point(j) for j in jobs]
    for d in done:
        print(d)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_suite

    results = run_suite(quick=not args.full)
    failed = 0
    for r in results:
        print(f"{'PASS' if r['pass'] else 'FAIL'} {r['check']}: {r.get('detail', '')}")
        failed += not r["pass"]
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_DOMAIN


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="morpho1d", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, out=True):
        sp.add_argument("--config", metavar="PATH")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
        if out:
            sp.add_argument("--out", metavar="DIR")
            sp.add_argument("--force", action="store_true", help="overwrite existing output")

    sp = sub.add_parser("check", help="stability verdicts and thresholds")
    common(sp)
    sp.add_argument("--delta-c", type=float)
    sp.add_argument("--system", action="append", choices=SYSTEMS)
    sp.add_argument("--h", type=float, help="element length for discrete spectra")
    sp.add_argument("--domain-size", type=float)
    sp.set_defaults(func=cmd_check)

    for kind in ("mech", "chem"):
        sp = sub.add_parser(f"simulate-{kind}", help=f"run the {kind} solver from a config")
        common(sp)
        sp.add_argument("--delta-c", type=float)
        sp.set_defaults(func=lambda a, k=kind: cmd_simulate(a, k))

    sp = sub.add_parser("sweep", help="cartesian parameter sweep, one directory per point")
    common(sp)
    sp.add_argument("--kind", choices=("mech", "chem"), default="mech")
    sp.add_argument("--grid", action="append", metavar="KEY=V1,V2")
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("verify", help="oracle and invariant checks")
    sp.add_argument("--full", action="store_true", help="include the long-running checks")
    sp.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileExistsError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParameterError, PicardDivergence, FloatingPointError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
