"""Command-line front end: environments, walks, solvers and the named verification suites.

Exit codes: 0 success or pass, 1 suite failure, 2 usage error,
3 truncation or resource error.
"""
from __future__ import annotations

import argparse
import ast
import configparser
import contextlib
import csv
import json
import sys

from . import __version__, corrector, environment, heatkernel, metric, walk
from .errors import (
    ConfigurationError,
    ContractError,
    NumericalError,
    ParameterError,
    ResourceError,
    TruncationError,
    UnsupportedOperationError,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_RESOURCE = 0, 1, 2, 3

# suite parameter names that differ from the generic flag names
_PATHS_KEY = {"coupling": "n_paths", "shrinkage": "trials"}


def _literal(text: str):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def _coords(text: str | None):
    if text is None:
        return None
    return tuple(int(v) for v in text.split(","))


def _floats(text: str):
    return [float(v) for v in text.split(",")]


@contextlib.contextmanager
def _sink(path: str | None, mode: str = "w"):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, mode, newline="") as fh:
            yield fh


def _field(args) -> environment.ConductanceField:
    if args.env:
        return environment.load(args.env)
    lat = environment.LatticeSpec.cube(args.d, args.side, args.boundary)
    return environment.generate(lat, environment.ConductanceLaw.parse(args.law), args.seed)


def _site(field, text):
    c = _coords(text)
    return field.lattice.index(c) if c is not None else field.lattice.index(field.lattice.center())


# -- env ----------------------------------------------------------------------


def cmd_env(args) -> int:
    if args.env_cmd == "gen":
        lat = environment.LatticeSpec.cube(args.d, args.side, args.boundary)
        field = environment.generate(lat, environment.ConductanceLaw.parse(args.law), args.seed)
        environment.save(field, args.out)
    elif args.env_cmd == "info":
        field = environment.load(args.file)
        info = {
            "dim": field.dim,
            "sides": list(field.lattice.sides),
            "boundary": field.lattice.boundary,
            "n_sites": field.n_sites,
            "n_edges": field.lattice.n_edges,
            "law": str(field.law),
            "seed": int(field.seed),
            "mean_mu": environment.empirical_mean_mu(field),
        }
        print(json.dumps(info, sort_keys=True))
    else:
        field = environment.load(args.file)
        environment.save(environment.shift(field, _coords(args.by)), args.out)
    return EXIT_OK


# -- module commands ----------------------------------------------------------


def cmd_walk(args) -> int:
    field = _field(args)
    x0 = _site(field, args.start)
    if args.times is None:
        path = walk.simulate(field, args.kind, x0, args.t_max, args.seed)
        with _sink(args.out) as fh:
            walk.write_path_csv(path, field, fh)
        return EXIT_OK
    times = sorted(_floats(args.times))
    batch = walk.observe(field, args.kind, x0, times, args.seed, n_paths=args.paths)
    coords = field.lattice.coords(batch.sites.ravel()).reshape(batch.sites.shape + (field.dim,))
    with _sink(args.out) as fh:
        w = csv.writer(fh)
        w.writerow(["path", "t"] + [f"x{k + 1}" for k in range(field.dim)])
        for p in range(batch.sites.shape[0]):
            for i, t in enumerate(times):
                w.writerow([p, repr(t), *coords[p, i].tolist()])
    return EXIT_OK


def cmd_kernel(args) -> int:
    field = _field(args)
    times = sorted(_floats(args.times))
    kern = heatkernel.solve_kernel(field, _site(field, args.x0), times, tol=args.tol)
    _write_kernel(args.out, kern, field)
    return EXIT_OK


def _write_kernel(out, kern, field):
    if out is None or out == "-":
        coords = field.lattice.all_coords()
        w = csv.writer(sys.stdout)
        w.writerow([f"x{k + 1}" for k in range(field.dim)] + [f"q_t={t:g}" for t in kern.times])
        for i in range(field.n_sites):
            w.writerow([*coords[i].tolist(), *(repr(float(v)) for v in kern.values[:, i])])
    else:
        heatkernel.write_kernel_csv(out, kern, field)


def cmd_metric(args) -> int:
    field = _field(args)
    x0 = _site(field, args.x0)
    if args.out is None or args.out == "-":
        dg = metric.graph_distance(field.lattice, x0)
        df = metric.fpp_distances(field, x0, args.c_a).dist
        coords = field.lattice.all_coords()
        w = csv.writer(sys.stdout)
        w.writerow([f"x{k + 1}" for k in range(field.dim)] + ["d_graph", "d_fpp"])
        for i in range(field.n_sites):
            w.writerow([*coords[i].tolist(), int(dg[i]), repr(float(df[i]))])
    else:
        metric.write_distance_csv(args.out, field, x0, args.c_a)
    return EXIT_OK


def cmd_corrector(args) -> int:
    field = _field(args)
    corr = corrector.solve_corrector(field, tol=args.tol)
    est = corrector.sigma2_from_corrector(corr)
    if args.out:
        corrector.write_corrector_csv(args.out, corr)
    summary = {"sigma2": list(est.sigma2), "isotropic": est.isotropic, "method": est.method,
               "residual": corr.residual, "law": str(field.law), "sides": list(field.lattice.sides),
               "seed": int(field.seed)}
    with _sink(args.json) as fh:
        fh.write(json.dumps(summary, sort_keys=True) + "\n")
    return EXIT_OK


# -- verify -------------------------------------------------------------------


def suite_params(args) -> dict:
    """Config file section, then flags, then ``--set`` overrides."""
    params: dict = {}
    if args.config:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        if not cp.read(args.config):
            raise ConfigurationError(f"cannot read config file {args.config}")
        for section in ("common", args.suite):
            if cp.has_section(section):
                params.update({k: _literal(v) for k, v in cp.items(section)})
    flags = {"law": args.law, "side": args.side, "seed": args.seed, "d": args.d,
             _PATHS_KEY.get(args.suite, "paths"): args.paths}
    if args.K is not None:
        flags["K_list"] = [_literal(v) for v in args.K.split(",")]
    params.update({k: v for k, v in flags.items() if v is not None})
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigurationError(f"--set expects key=value, got {item!r}")
        params[key.strip()] = _literal(value.strip())
    return params


def cmd_verify(args) -> int:
    from .analysis import suites

    if args.suite not in suites.SUITES:
        print(f"unknown suite {args.suite!r}; choose from {', '.join(sorted(suites.SUITES))}", file=sys.stderr)
        return EXIT_USAGE
    params = suite_params(args)
    rep = suites.run(args.suite, params)
    if args.timestamp:
        rep.stamp()
    text = rep.to_json(with_timestamp=args.timestamp) + "\n"
    with _sink(args.out) as fh:
        fh.write(text)
    for line in rep.summary_lines():
        print(line, file=sys.stderr)
    print(f"{rep.suite}: {'PASS' if rep.passed else 'FAIL'}", file=sys.stderr)
    return EXIT_OK if rep.passed else EXIT_FAIL


# -- parser -------------------------------------------------------------------


def _add_field_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--env", help=".rcmenv file; otherwise a field is generated from the flags below")
    p.add_argument("--law", default="constant:1", help="law spec, e.g. pareto:2 or two_point:100,0.1")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--side", type=int, default=16)
    p.add_argument("--boundary", choices=("torus", "free"), default="torus")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rcmlab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"rcmlab {__version__}")
    ap.add_argument("--threads", type=int, default=None, help="thread budget (default: available CPUs)")
    sub = ap.add_subparsers(dest="command", required=True)

    env = sub.add_parser("env", help="create, inspect or shift .rcmenv files")
    esub = env.add_subparsers(dest="env_cmd", required=True)
    gen = esub.add_parser("gen")
    gen.add_argument("--law", required=True)
    gen.add_argument("--d", type=int, default=2)
    gen.add_argument("--side", type=int, required=True)
    gen.add_argument("--boundary", choices=("torus", "free"), default="torus")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    info = esub.add_parser("info")
    info.add_argument("file")
    sh = esub.add_parser("shift")
    sh.add_argument("file")
    sh.add_argument("--by", required=True, help="shift vector, e.g. 1,0 (write --by=-1,0 for negative entries)")
    sh.add_argument("--out", required=True)

    w = sub.add_parser("walk", help="simulate one path, or a batch observed at --times")
    _add_field_args(w)
    w.add_argument("--kind", choices=walk.KINDS, default=walk.VSRW)
    w.add_argument("--start", help="start coordinates (default: box centre)")
    w.add_argument("--t-max", type=float, default=10.0)
    w.add_argument("--times", help="observation times for a batch, e.g. 1,2,4")
    w.add_argument("--paths", type=int, default=1000)
    w.add_argument("--out")

    k = sub.add_parser("kernel", help="heat kernel by uniformization")
    _add_field_args(k)
    k.add_argument("--x0")
    k.add_argument("--times", required=True)
    k.add_argument("--tol", type=float, default=1e-9)
    k.add_argument("--out")

    m = sub.add_parser("metric", help="graph and first-passage distances from a site")
    _add_field_args(m)
    m.add_argument("--x0")
    m.add_argument("--c-a", type=float, default=1.0)
    m.add_argument("--out")

    c = sub.add_parser("corrector", help="periodic corrector and diffusivity")
    _add_field_args(c)
    c.add_argument("--tol", type=float, default=1e-10)
    c.add_argument("--out", help="corrector CSV")
    c.add_argument("--json", help="diffusivity JSON (default: stdout)")

    v = sub.add_parser("verify", help="run a named verification suite")
    v.add_argument("suite")
    v.add_argument("--config", help="INI file with a [common] section and one section per suite")
    v.add_argument("--law")
    v.add_argument("--K", help="trap depths, e.g. 1 or 10,100")
    v.add_argument("--side", type=int)
    v.add_argument("--seed", type=int)
    v.add_argument("--paths", type=int)
    v.add_argument("--d", type=int)
    v.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any suite parameter")
    v.add_argument("--out", help="report JSON path (default: stdout)")
    v.add_argument("--no-timestamp", dest="timestamp", action="store_false",
                   help="omit the timestamp so reruns are byte-identical")
    return ap


_COMMANDS = {"env": cmd_env, "walk": cmd_walk, "kernel": cmd_kernel, "metric": cmd_metric,
             "corrector": cmd_corrector, "verify": cmd_verify}


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    args.threads = walk.set_threads(args.threads)
    try:
        return _COMMANDS[args.command](args)
    except (TruncationError, ResourceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ParameterError, ConfigurationError, UnsupportedOperationError, ContractError, IndexError,
            OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
