"""Command-line front end: ``beamwander <command> --config FILE [--out FILE] [--seed N]``.

Every command writes one CSV table plus a JSON manifest with the resolved
parameters.  Config files are flat ``key = value`` lines; ``#`` starts a
comment and unknown keys are rejected.  Grids are written as a comma list,
``lin:start:stop:num`` or ``log:start:stop:num``.

Exit codes: 0 success, 1 usage or config error, 2 numerical failure,
3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import math
import platform
import sys
from importlib import metadata

import numpy as np
import scipy

from . import __version__
from .aperture import ApertureBeam, fit_approx_model, transmission_approx, transmission_exact
from .bell import PdcBellSetup, bell_scan
from .errors import BeamWanderError, ConvergenceError, DomainError, UndefinedCorrelationError
from .mc_verify import McReport, run_suite
from .pdtc import ConstantChannel, Pdtc, WanderStats
from .specfun import QuadratureSpec
from .squeezing import canonical_input, squeezing_vs_exceedance_scan

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_VERIFY = 0, 1, 2, 3

COMMANDS = ("transmission", "exceedance", "bell", "squeezing", "verify")


class ConfigError(BeamWanderError):
    """Malformed or unknown configuration entry."""


# -- value parsers ----------------------------------------------------------------


def parse_grid(text: str) -> np.ndarray:
    """``"0,0.5,1"``, ``"lin:0:3:301"`` or ``"log:1e-3:0.3:41"``."""
    text = text.strip()
    try:
        if text.startswith(("lin:", "log:")):
            kind, start, stop, num = text.split(":")
            start, stop, num = float(start), float(stop), int(num)
            if num < 1:
                raise ValueError
            if kind == "lin":
                return np.linspace(start, stop, num)
            if start <= 0 or stop <= 0:
                raise ConfigError(f"log grid needs positive end points: {text!r}")
            return np.geomspace(start, stop, num)
        values = np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise ConfigError(f"cannot parse grid {text!r}") from None
    if values.size == 0 or not np.all(np.isfinite(values)):
        raise ConfigError(f"grid {text!r} must contain finite numbers")
    return values


def _positive(v):
    x = float(v)
    if not (x > 0 and math.isfinite(x)):
        raise ConfigError(f"expected a positive number, got {v!r}")
    return x


def _nonnegative(v):
    x = float(v)
    if not (x >= 0 and math.isfinite(x)):
        raise ConfigError(f"expected a non-negative number, got {v!r}")
    return x


def _count(v):
    x = float(v)
    if not math.isfinite(x) or x != int(x):
        raise ConfigError(f"expected an integer, got {v!r}")
    x = int(x)
    if x < 1:
        raise ConfigError(f"expected a positive integer, got {v!r}")
    return x


def _seed(v):
    x = int(v)
    if not 0 <= x < 2**64:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {v!r}")
    return x


def _angles(v):
    vals = [float(a) for a in v.split(",")]
    if len(vals) != 4:
        raise ConfigError("angles needs four comma-separated values")
    return tuple(vals)


_COMMON = {
    "seed": (_seed, 0),
    "n_jobs": (_count, 1),
    "rel_tol": (_positive, 1e-12),
    "abs_tol": (_positive, 1e-300),
    "max_subdivisions": (_count, 4000),
}
_WANDER = {
    "w_over_a": (_positive, 1.1),
    "sigma_over_a": (_nonnegative, 28.5),
    "d_over_a": (_nonnegative, 0.0),
}
SCHEMA = {
    "transmission": {
        "w_over_a": (_positive, 1.0),
        "r_grid": (parse_grid, "lin:0:3:61"),
    },
    "exceedance": {
        "w_over_a": (_positive, 1.0),
        "sigma_over_a": (_nonnegative, 1.0),
        "d_over_a": (_nonnegative, 0.0),
        "t_grid": (parse_grid, "lin:0:1:101"),
    },
    "bell": {
        **_WANDER,
        "eta": (float, 0.125),
        "noise_n": (_nonnegative, 1e-5),
        "angles": (_angles, "0,0.39269908169872414,0.7853981633974483,1.1780972450961724"),
        "chi_grid": (parse_grid, "log:1e-3:0.3:41"),
    },
    "squeezing": {
        **_WANDER,
        "squeeze_db": (float, 6.0),
        "alpha": (_nonnegative, 10.0),
        "fock_cutoff": (_count, 400),
        "fbar_grid": (parse_grid, "log:1:1e-6:25"),
    },
    "verify": {
        **_WANDER,
        "n_samples": (_count, 1_000_000),
        "z_threshold": (_positive, 3.0),
    },
}


def parse_config(text: str, command: str) -> dict:
    """Parse ``key = value`` lines against the schema of ``command``.

    Missing keys take their defaults; the result holds parsed values.
    """
    schema = {**_COMMON, **SCHEMA[command]}
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in schema:
            raise ConfigError(f"line {lineno}: unknown key {key!r} for command {command!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    out = {}
    for key, (conv, default) in schema.items():
        value = raw.get(key, default)
        try:
            out[key] = conv(value) if isinstance(value, str) else value
        except ValueError:
            raise ConfigError(f"bad value for {key!r}: {value!r}") from None
    for key, value in out.items():
        if key.endswith("_grid"):
            steps = np.diff(value)
            if not (np.all(steps > 0) or np.all(steps < 0)):
                raise ConfigError(f"{key} must be strictly monotone")
    return out


# -- commands ---------------------------------------------------------------------


def _quadrature(cfg):
    return QuadratureSpec(cfg["abs_tol"], cfg["rel_tol"], cfg["max_subdivisions"])


def _channel(cfg):
    geom = ApertureBeam(1.0, cfg["w_over_a"])
    return Pdtc.from_geometry(geom, WanderStats(cfg["sigma_over_a"], cfg["d_over_a"]))


def cmd_transmission(cfg):
    geom = ApertureBeam(1.0, cfg["w_over_a"])
    if np.any(cfg["r_grid"] < 0):
        raise ConfigError("r_grid must be non-negative")
    model = fit_approx_model(geom)
    # the pointwise default tolerance is absolute in T^2 units
    spec = QuadratureSpec(max(cfg["abs_tol"], 1e-15), cfg["rel_tol"], cfg["max_subdivisions"])
    rows = [(r, transmission_exact(r, geom, spec), transmission_approx(r, model)) for r in cfg["r_grid"]]
    return ["r/a", "T2_exact", "T2_approx"], rows


def cmd_exceedance(cfg):
    p = _channel(cfg)
    spec = _quadrature(cfg)
    t_grid = cfg["t_grid"]
    if np.any(t_grid < 0) or np.any(t_grid > 1):
        raise ConfigError("t_grid values must lie in [0, 1]")
    rows = [(t, p.exceedance(t, "exact", spec), p.exceedance(t, "approx", spec)) for t in t_grid]
    return ["T", "Fbar_exact", "Fbar_approx"], rows


def cmd_bell(cfg):
    p = _channel(cfg)
    spec = _quadrature(cfg)
    const = ConstantChannel(math.sqrt(p.moment(2, spec)))
    setup = PdcBellSetup(0.0, cfg["eta"], cfg["noise_n"], cfg["angles"])
    grid = cfg["chi_grid"]
    fluct = bell_scan(setup, p, grid)
    flat = bell_scan(setup, const, grid)
    rows = [(chi, b_f, b_c) for (chi, b_f), (_, b_c) in zip(fluct, flat)]
    return ["chi", "B_fluct", "B_const"], rows


def cmd_squeezing(cfg):
    p = _channel(cfg)
    grid = cfg["fbar_grid"]
    if np.any(grid <= 0) or np.any(grid > 1):
        raise ConfigError("fbar_grid values must lie in (0, 1]")
    inp = canonical_input(cfg["squeeze_db"], cfg["alpha"], cfg["fock_cutoff"])
    rows = squeezing_vs_exceedance_scan(inp, p, grid, _quadrature(cfg))
    return ["fbar", "t_min", "quad_dB", "photon_dB"], [(r.fbar, r.t_min, r.quad_db, r.photon_db) for r in rows]


def cmd_verify(cfg):
    p = _channel(cfg)
    reports = run_suite(p, cfg["n_samples"], cfg["seed"], cfg["n_jobs"], z_threshold=cfg["z_threshold"])
    return list(McReport.FIELDS), [r.as_row() for r in reports]


HANDLERS = {
    "transmission": cmd_transmission,
    "exceedance": cmd_exceedance,
    "bell": cmd_bell,
    "squeezing": cmd_squeezing,
    "verify": cmd_verify,
}


# -- output ---------------------------------------------------------------------


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".16e")
    return str(v)


def format_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return [float(x) for x in v]
    if isinstance(v, tuple):
        return list(v)
    return v


def _tool_version():
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return __version__


def build_manifest(command, cfg, config_path, out_path, status):
    return {
        "tool": "beamwander",
        "version": _tool_version(),
        "command": command,
        "config_file": config_path,
        "output": out_path,
        "seed": cfg.get("seed"),
        "parameters": {k: _jsonable(v) for k, v in sorted(cfg.items())},
        "exit_status": status,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def make_parser():
    parser = _Parser(prog="beamwander", description="Beam-wandering channel calculations.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="key = value configuration file")
    parser.add_argument("--out", help="CSV output path (default: standard output)")
    parser.add_argument("--seed", type=int, help="overrides the seed in the config")
    parser.add_argument("--manifest", help="manifest path (default: OUT.manifest.json, or stderr)")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as fh:
            cfg = parse_config(fh.read(), args.command)
        if args.seed is not None:
            cfg["seed"] = _seed(str(args.seed))
    except (OSError, ConfigError, ValueError) as exc:
        print(f"beamwander: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    status = EXIT_OK
    try:
        header, rows = HANDLERS[args.command](cfg)
    except ConvergenceError as exc:
        print(f"beamwander: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, DomainError, UndefinedCorrelationError) as exc:
        print(f"beamwander: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.command == "verify" and any(row[-1] == "FAIL" for row in rows):
        status = EXIT_VERIFY

    text = format_csv(header, rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    manifest = json.dumps(build_manifest(args.command, cfg, args.config, args.out, status), indent=2)
    manifest_path = args.manifest or (f"{args.out}.manifest.json" if args.out else None)
    if manifest_path:
        with open(manifest_path, "w", encoding="utf-8") as fh:
            fh.write(manifest + "\n")
    else:
        print(manifest, file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
