"""Command-line front end.

    ribotide sweep --n1 100 --n2 200 --n3 100 --c 0.025
    ribotide convergence --c0 20
    ribotide profile --rho0 0.3 0.9
    ribotide tasep --rho0 0.1 0.5 --sweeps 20000
    ribotide limit --c0 20 --rho0 0.045

Every subcommand accepts ``--config FILE``, a flat JSON object whose keys
are the long flag names; flags given on the command line win. Exit codes:
0 success, 2 usage or range error, 3 solver failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

from . import experiments as ex
from .analytic import limit_exit_flow, limit_peak_density
from .core import DomainError, Engine, GeometryError, RibotideError, UorfGeometry
from .tasep import flow_curve

__all__ = ["RunConfig", "UsageError", "parse_config", "run", "main", "format_float"]

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4

SUBCOMMANDS = ("sweep", "convergence", "profile", "tasep", "limit")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# name -> (type, default, help, nargs)
_COMMON = {
    "output_dir": (str, ".", "directory for result files", None),
    "format": (str, "csv", "csv or json", None),
    "threads": (int, None, "worker threads (default: RIBOTIDE_THREADS or CPU count)", None),
}
_GEOMETRY = {
    "n1": (int, 100, "sites before the start codon", None),
    "n2": (int, 200, "sites from start to stop codon", None),
    "n3": (int, 100, "sites after the stop codon", None),
}
_OPTIONS: Dict[str, Dict[str, tuple]] = {
    "sweep": {
        **_GEOMETRY,
        "rho0": (float, list(ex.default_rho0_grid()), "upstream densities", "+"),
        "c": (float, list(ex.DEFAULT_C_VALUES), "conversion probabilities", "+"),
        "engines": (str, [e.value for e in Engine], "tasep, deterministic, limit", "+"),
        "sweeps": (int, 100_000, "TASEP sample sweeps per point", None),
        "burn_in": (int, None, "TASEP burn-in sweeps (default 20 * n_star)", None),
        "seed": (int, 0, "TASEP seed base", None),
    },
    "convergence": {
        "n1": (int, 100, "sites before the start codon", None),
        "n3": (int, 100, "sites after the stop codon", None),
        "c0": (float, 20.0, "scaled conversion rate, c = c0 / n2", None),
        "n2": (int, list(ex.DEFAULT_N2_LIST), "uORF lengths", "+"),
        "rho0": (float, list(ex.default_convergence_grid()), "upstream densities below 1/2", "+"),
    },
    "profile": {
        **_GEOMETRY,
        "rho0": (float, list(ex.DEFAULT_PROFILE_RHO0), "upstream densities", "+"),
        "c": (float, 0.025, "conversion probability", None),
    },
    "tasep": {
        **_GEOMETRY,
        "rho0": (float, list(ex.default_rho0_grid()), "upstream densities", "+"),
        "c": (float, 0.025, "conversion probability", None),
        "sweeps": (int, 100_000, "sample sweeps per point", None),
        "burn_in": (int, None, "burn-in sweeps (default 20 * n_star)", None),
        "seed": (int, 0, "seed base", None),
    },
    "limit": {
        "c0": (float, 20.0, "scaled conversion rate", None),
        "rho0": (float, [0.045], "upstream densities in (0, 1/2)", "+"),
    },
}


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    values: Dict[str, Any] = field(default_factory=dict)

    def __getattr__(self, name):
        try:
            return self.values[name]
        except KeyError:
            raise AttributeError(name) from None


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _build_parser() -> _Parser:
    parser = _Parser(prog="ribotide", description="uORF ribosome flow experiments")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    for cmd in SUBCOMMANDS:
        p = sub.add_parser(cmd)
        p.add_argument("--config", default=None, help="flat JSON file of flag values")
        for name, (typ, default, help_, nargs) in {**_OPTIONS[cmd], **_COMMON}.items():
            # defaults are applied after merging with the config file
            p.add_argument(_flag(name), dest=name, type=typ, nargs=nargs, default=None,
                           help=f"{help_} (default: {_short(default)})")
    return parser


def _short(value):
    if isinstance(value, list) and len(value) > 6:
        return f"{value[0]} .. {value[-1]} ({len(value)} values)"
    return value


def _load_config(path: str, cmd: str) -> Dict[str, Any]:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    known = {**_OPTIONS[cmd], **_COMMON}
    out = {}
    for key, value in data.items():
        name = key.replace("-", "_")
        if name not in known:
            raise UsageError(f"unknown config key {key!r} for {cmd}")
        typ, _, _, nargs = known[name]
        out[name] = _coerce(key, value, typ, nargs)
    return out


def _coerce(key, value, typ, nargs):
    def one(x):
        if typ is int and (isinstance(x, bool) or not isinstance(x, int)):
            raise UsageError(f"config key {key!r} must be an integer, got {x!r}")
        if typ is float and (isinstance(x, bool) or not isinstance(x, (int, float))):
            raise UsageError(f"config key {key!r} must be a number, got {x!r}")
        if typ is str and not isinstance(x, str):
            raise UsageError(f"config key {key!r} must be a string, got {x!r}")
        return typ(x)

    if value is None:
        return None
    if nargs == "+":
        items = value if isinstance(value, list) else [value]
        if not items:
            raise UsageError(f"config key {key!r} must not be empty")
        return [one(x) for x in items]
    return one(value)


def _check_range(name, value, lo, hi, lo_open=True, hi_open=True):
    ok = (value > lo if lo_open else value >= lo) and (value < hi if hi_open else value <= hi)
    if not ok or (isinstance(value, float) and math.isnan(value)):
        left = "(" if lo_open else "["
        right = ")" if hi_open else "]"
        raise UsageError(f"{_flag(name)}={value} outside legal range {left}{lo}, {hi}{right}")


def _validate(cmd: str, v: Dict[str, Any]):
    if v["format"] not in ("csv", "json"):
        raise UsageError(f"--format must be csv or json, got {v['format']!r}")
    if v["threads"] is not None and v["threads"] < 1:
        raise UsageError(f"--threads={v['threads']} outside legal range [1, inf)")
    for name in ("n1", "n3"):
        if name in v:
            _check_range(name, v[name], 1 if name == "n1" else 0, math.inf, lo_open=False)
    if cmd != "convergence" and "n2" in v:
        _check_range("n2", v["n2"], 2, math.inf, lo_open=False)
    rho_hi = 0.5 if cmd in ("convergence", "limit") else 1.0
    for r in v.get("rho0", []):
        _check_range("rho0", r, 0.0, rho_hi)
    cs = v.get("c")
    for c in cs if isinstance(cs, list) else ([cs] if cs is not None else []):
        _check_range("c", c, 0.0, 1.0)
    if "c0" in v:
        _check_range("c0", v["c0"], 0.0, math.inf)
    if cmd == "convergence":
        for n in v["n2"]:
            _check_range("n2", n, 2, math.inf, lo_open=False)
            _check_range("c0", v["c0"] / n, 0.0, 1.0)
        if any(b <= a for a, b in zip(v["n2"], v["n2"][1:])):
            raise UsageError("--n2 values must be strictly increasing")
    if cmd in ("sweep", "tasep", "profile"):
        rhos = v["rho0"]
        if cmd != "profile" and any(b <= a for a, b in zip(rhos, rhos[1:])):
            raise UsageError("--rho0 values must be strictly increasing")
    if "sweeps" in v:
        _check_range("sweeps", v["sweeps"], 1, math.inf, lo_open=False)
    if v.get("burn_in") is not None:
        _check_range("burn_in", v["burn_in"], 0, math.inf, lo_open=False)
    if "seed" in v:
        _check_range("seed", v["seed"], 0, 2**64, lo_open=False)
    if "engines" in v:
        for e in v["engines"]:
            if e not in [x.value for x in Engine]:
                raise UsageError(f"--engines: unknown engine {e!r} (choose from tasep, deterministic, limit)")


def parse_config(argv: Optional[Sequence[str]] = None) -> RunConfig:
    args = _build_parser().parse_args(argv)
    cmd = args.subcommand
    known = {**_OPTIONS[cmd], **_COMMON}
    values = {name: spec[1] for name, spec in known.items()}
    if args.config is not None:
        values.update(_load_config(args.config, cmd))
    for name in known:
        given = getattr(args, name)
        if given is not None:
            values[name] = given
    _validate(cmd, values)
    return RunConfig(cmd, values)


def format_float(x: Optional[float]) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "NA"
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    return format(float(x), ".17g")


def _json_value(x):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return None
    return x


def _render(header: List[str], rows: List[tuple], fmt: str) -> str:
    if fmt == "json":
        objs = [{k: _json_value(x) for k, x in zip(header, row)} for row in rows]
        return json.dumps(objs, indent=1) + "\n"
    lines = [",".join(header)]
    lines += [",".join(format_float(x) for x in row) for row in rows]
    return "\n".join(lines) + "\n"


def _write_atomic(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _geometry(v) -> UorfGeometry:
    return UorfGeometry(v["n1"], v["n2"], v["n3"])


def _run_sweep(v):
    spec = ex.SweepSpec(
        rho0_grid=tuple(v["rho0"]), c_values=tuple(v["c"]), geometry=_geometry(v),
        engines=tuple(v["engines"]), tasep_sweeps=v["sweeps"], seed=v["seed"],
        burn_in_sweeps=v["burn_in"],
    )
    rows = ex.figure3_sweep(spec, threads=v["threads"])
    header = ["rho0", "c", "j3_tasep", "se_tasep", "j3_det", "j3_limit"]
    table = [(r.rho0, r.c, r.j3_tasep, r.se_tasep, r.j3_det, r.j3_limit) for r in rows]
    errors = [f"rho0={r.rho0} c={r.c}: {r.error}" for r in rows if r.error]
    return [("exit_flow", header, table)], errors


def _run_convergence(v):
    rep = ex.figure4_convergence(c0=v["c0"], n2_list=v["n2"], rho0_grid=v["rho0"],
                                 n1=v["n1"], n3=v["n3"], threads=v["threads"])
    table = list(zip(rep.n2_values, rep.sup_errors))
    return [("convergence", ["n2", "sup_error"], table)], []


def _run_profile(v):
    out = []
    for t in ex.figure56_profiles(v["rho0"], c=v["c"], g=_geometry(v), threads=v["threads"]):
        table = [(int(n), a, b, f) for n, a, b, f in zip(t.n, t.rho_s, t.rho_e, t.flow_s)]
        out.append((f"profile_rho0={t.rho0!r}", ["n", "rho_s", "rho_e", "flow_s"], table))
        if t.limit_n is not None:
            lim = [(int(n), a, f) for n, a, f in zip(t.limit_n, t.limit_rho, t.limit_flow)]
            out.append((f"limit_profile_rho0={t.rho0!r}", ["n", "rho_star", "flow_star"], lim))
    return out, []


def _run_tasep(v):
    curve = flow_curve(v["rho0"], v["c"], _geometry(v), v["seed"], sample_sweeps=v["sweeps"],
                       burn_in_sweeps=v["burn_in"], threads=v["threads"])
    table = [(r, v["c"], j, se) for (r, j), se in zip(curve.points, curve.errors)]
    return [("tasep_flow", ["rho0", "c", "j3_tasep", "se_tasep"], table)], []


def _run_limit(v):
    c0 = v["c0"]
    table = [(r, c0, limit_exit_flow(r, c0), limit_peak_density(c0)) for r in v["rho0"]]
    for r, _, j, _ in table:
        print(f"j3_limit(rho0={r!r}, c0={c0!r}) = {format_float(j)}")
    return [("limit", ["rho0", "c0", "j3_limit", "peak_rho0"], table)], []


_RUNNERS = {
    "sweep": _run_sweep,
    "convergence": _run_convergence,
    "profile": _run_profile,
    "tasep": _run_tasep,
    "limit": _run_limit,
}


def run(config: RunConfig) -> int:
    v = config.values
    t0 = time.perf_counter()
    try:
        tables, errors = _RUNNERS[config.subcommand](v)
    except (GeometryError, DomainError) as exc:
        print(f"ribotide: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RibotideError as exc:
        print(f"ribotide: {config.subcommand} failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    n_rows = 0
    written = []
    try:
        for stem, header, rows in tables:
            path = os.path.join(v["output_dir"], f"{stem}.{v['format']}")
            _write_atomic(path, _render(header, rows, v["format"]))
            n_rows += len(rows)
            written.append(path)
    except OSError as exc:
        print(f"ribotide: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    elapsed = time.perf_counter() - t0
    print(f"{config.subcommand}: wrote {n_rows} rows to {', '.join(written)} in {elapsed:.2f} s")
    if errors:
        for msg in errors:
            print(f"ribotide: {msg}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        config = parse_config(argv)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
