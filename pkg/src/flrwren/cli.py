"""Batch command line front end.

Usage::

    flrwren SUBCOMMAND -c run.ini [-o OUTDIR]

with ``SUBCOMMAND`` one of ``modes``, ``coincidence``, ``fish``, ``sunset``,
``twopoint``, ``forests`` and ``symcheck``.  The configuration is an INI file;
unknown sections or keys are rejected.  Every output file starts with the
SHA-256 of the normalised configuration and the tolerances in effect.

Exit status: 0 success, 2 configuration error, 3 numerical tolerance
failure, 4 domain error.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .assembler import ConvolutionGrid, two_point
from .background import Background, DeSitter, Minkowski, PowerLaw, Tabulated
from .errors import AccuracyError, ConfigError, DomainError, UnsupportedExpression
from .forests import DiagramGraph, divergent_forests, forests_to_json
from .kernels import fish_kernel, sunset_kernel
from .modes import (ConformalVacuum, FieldParams, PositiveFrequency, make_k_grid,
                    solve_modes, wronskian)
from .propagators import coincidence_data
from .symcalc import identity_corpus

SUBCOMMANDS = ("modes", "coincidence", "fish", "sunset", "twopoint", "forests",
               "symcheck")

# section -> allowed keys
SCHEMA = {
    "background": {"kind", "hubble", "exponent", "tau_ref", "table"},
    "field": {"m", "xi", "lam", "M"},
    "state": {"kind", "tau0", "order"},
    "grid": {"tau_start", "tau_end", "step", "ramp_fraction", "tau_out", "k",
             "k_min", "k_pivot", "k_max", "n_log"},
    "tolerances": {"rtol", "atol", "wronskian_tol"},
    "output": {"directory", "formats"},
    "twopoint": {"order", "richardson", "window_check", "mu"},
    "kernel": {"tau1", "tau2"},
    "forests": {"graph"},
}


def fmt(x):
    """17 significant digits, enough for an exact round trip."""
    return f"{float(x):.17g}"


@dataclass
class RunConfig:
    """Validated run configuration."""

    sections: dict
    base: Path = Path(".")
    tolerances: dict = field(default_factory=dict)

    @classmethod
    def from_text(cls, text, base=Path(".")):
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse configuration: {exc}") from None
        sections = {}
        for name in parser.sections():
            if name not in SCHEMA:
                raise ConfigError(f"unknown section [{name}]")
            keys = dict(parser[name])
            unknown = set(keys) - SCHEMA[name]
            if unknown:
                raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(sorted(unknown))}")
            sections[name] = keys
        cfg = cls(sections, Path(base))
        cfg.tolerances = {
            "rtol": cfg.get_float("tolerances", "rtol", 1e-10),
            "atol": cfg.get_float("tolerances", "atol", 1e-12),
            "wronskian_tol": cfg.get_float("tolerances", "wronskian_tol", 1e-8),
        }
        if any(v <= 0 for v in cfg.tolerances.values()):
            raise ConfigError("tolerances must be positive")
        return cfg

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from None
        return cls.from_text(text, path.parent)

    # typed access ----------------------------------------------------------

    def get(self, section, key, default=None):
        return self.sections.get(section, {}).get(key, default)

    def get_float(self, section, key, default=None):
        raw = self.get(section, key)
        if raw is None:
            if default is None:
                raise ConfigError(f"missing [{section}] {key}")
            return default
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"[{section}] {key} = {raw!r} is not a number") from None

    def get_int(self, section, key, default=None):
        v = self.get_float(section, key, None if default is None else float(default))
        if v != int(v):
            raise ConfigError(f"[{section}] {key} must be an integer")
        return int(v)

    def get_bool(self, section, key, default=False):
        raw = self.get(section, key)
        if raw is None:
            return default
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a boolean")

    def get_list(self, section, key, default=None):
        raw = self.get(section, key)
        if raw is None:
            if default is None:
                raise ConfigError(f"missing [{section}] {key}")
            return list(default)
        try:
            return [float(x) for x in raw.replace(",", " ").split()]
        except ValueError:
            raise ConfigError(f"[{section}] {key} must be a list of numbers") from None

    def get_path(self, section, key):
        raw = self.get(section, key)
        if raw is None:
            raise ConfigError(f"missing [{section}] {key}")
        p = Path(raw)
        p = p if p.is_absolute() else self.base / p
        if not p.exists():
            raise ConfigError(f"[{section}] {key}: file {p} does not exist")
        return p

    def digest(self):
        canon = json.dumps({s: dict(sorted(k.items())) for s, k in sorted(self.sections.items())},
                           sort_keys=True)
        return hashlib.sha256(canon.encode()).hexdigest()

    def header(self, subcommand):
        return (f"flrwren {__version__} {subcommand} config_sha256={self.digest()} "
                f"tolerances={json.dumps(self.tolerances, sort_keys=True)}")

    # physics objects -------------------------------------------------------

    def background(self) -> Background:
        kind = self.get("background", "kind", "minkowski")
        if kind == "minkowski":
            return Minkowski()
        if kind == "de_sitter":
            return DeSitter(self.get_float("background", "hubble", 1.0))
        if kind == "power_law":
            return PowerLaw(self.get_float("background", "exponent"),
                            self.get_float("background", "tau_ref", 1.0))
        if kind == "tabulated":
            data = np.loadtxt(self.get_path("background", "table"), delimiter=",",
                              comments="#", ndmin=2)
            return Tabulated(tau_grid=tuple(data[:, 0]), a_values=tuple(data[:, 1]))
        raise ConfigError(f"unknown background kind {kind!r}")

    def field_params(self) -> FieldParams:
        return FieldParams(m=self.get_float("field", "m", 0.0),
                           xi=self.get_float("field", "xi", 1.0 / 6.0),
                           lam=self.get_float("field", "lam", 0.0),
                           M=self.get_float("field", "M", 1.0))

    def state(self):
        kind = self.get("state", "kind", "conformal_vacuum")
        if kind == "conformal_vacuum":
            return ConformalVacuum()
        if kind == "positive_frequency":
            return PositiveFrequency(self.get_float("state", "tau0"),
                                     self.get_int("state", "order", 0))
        raise ConfigError(f"unknown state kind {kind!r}")

    def window(self):
        start = self.get_float("grid", "tau_start")
        end = self.get_float("grid", "tau_end")
        if not end > start:
            raise ConfigError("[grid] window is empty (tau_end <= tau_start)")
        return start, end

    def time_grid(self):
        start, end = self.window()
        step = self.get_float("grid", "step")
        if step <= 0:
            raise ConfigError("[grid] step must be positive")
        n = int(np.ceil((end - start) / step - 1e-9))
        return np.linspace(start, end, n + 1)

    def momenta(self):
        if self.get("grid", "k") is not None:
            return np.asarray(self.get_list("grid", "k"), dtype=float)
        return make_k_grid(self.get_float("grid", "k_min"), self.get_float("grid", "k_pivot"),
                           self.get_float("grid", "k_max"),
                           n_log=self.get_int("grid", "n_log", 40))

    def output_dir(self, override=None):
        d = Path(override) if override else Path(self.get("output", "directory", "."))
        d = d if d.is_absolute() else (Path.cwd() / d if override else self.base / d)
        d.mkdir(parents=True, exist_ok=True)
        return d

    def formats(self):
        fm = {f.strip() for f in self.get("output", "formats", "csv,json").split(",") if f.strip()}
        bad = fm - {"csv", "json"}
        if bad:
            raise ConfigError(f"unknown output format(s) {sorted(bad)}")
        return fm


# --------------------------------------------------------------------------
# writers


def write_csv(path, header, columns, rows):
    with open(path, "w", newline="") as fh:
        fh.write(f"# {header}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(x) if isinstance(x, (float, np.floating)) else x for x in row])


def write_json(path, header, payload):
    doc = {"meta": {"header": header}, **payload}
    with open(path, "w") as fh:
        fh.write(json.dumps(doc, indent=1, sort_keys=True))
        fh.write("\n")


# --------------------------------------------------------------------------
# subcommands


def run_modes(cfg: RunConfig, out: Path):
    bg, fp, state = cfg.background(), cfg.field_params(), cfg.state()
    tau, ks = cfg.time_grid(), cfg.momenta()
    ms = solve_modes(bg, fp, state, ks, tau, **cfg.tolerances)
    rows = []
    for k in ms.k:
        mode = ms.mode(k)
        wr = wronskian(mode)
        for t, c, d, w in zip(mode.tau, mode.chi, mode.dchi, wr):
            rows.append((float(k), float(t), c.real, c.imag, d.real, d.imag,
                         float(w.imag - 1)))
    write_csv(out / "modes.csv", cfg.header("modes"),
              ["k", "tau", "re_chi", "im_chi", "re_dchi", "im_dchi", "wronskian_drift"], rows)
    return [out / "modes.csv"]


def run_coincidence(cfg: RunConfig, out: Path):
    bg, fp, state = cfg.background(), cfg.field_params(), cfg.state()
    start, _ = cfg.window()
    tau_out = sorted(cfg.get_list("grid", "tau_out"))
    tau = np.unique(np.concatenate([[start], tau_out]))
    ms = solve_modes(bg, fp, state, cfg.momenta(), tau, **cfg.tolerances)
    data = coincidence_data(bg, fp, ms, tau_out)
    write_csv(out / "coincidence.csv", cfg.header("coincidence"),
              ["tau", "v", "w", "mu"], data.to_csv_rows())
    return [out / "coincidence.csv"]


def _kernel_pairs(cfg):
    t1 = cfg.get_list("kernel", "tau1")
    t2 = cfg.get_list("kernel", "tau2")
    if len(t1) != len(t2):
        raise ConfigError("[kernel] tau1 and tau2 need the same length")
    return list(zip(t1, t2))


def run_kernel(cfg: RunConfig, out: Path, which):
    bg, fp = cfg.background(), cfg.field_params()
    build = fish_kernel if which == "fish" else sunset_kernel
    rows = []
    for k in cfg.momenta():
        kern = build(bg, fp.M, float(k))
        for t1, t2 in _kernel_pairs(cfg):
            loc = kern.local_coefficients(t1)
            c0 = complex(np.asarray(loc.get(0, 0)))
            c2 = complex(np.asarray(loc.get(2, 0)))
            sm = complex(kern.smooth(t1, t2)) if t1 != t2 else complex("nan")
            rows.append((float(k), t1, t2, sm.real, sm.imag, c0.real, c0.imag,
                         c2.real, c2.imag))
    path = out / f"{which}.csv"
    write_csv(path, cfg.header(which),
              ["k", "tau1", "tau2", "re_smooth", "im_smooth", "re_local0", "im_local0",
               "re_local2", "im_local2"], rows)
    return [path]


def run_twopoint(cfg: RunConfig, out: Path):
    bg, fp, state = cfg.background(), cfg.field_params(), cfg.state()
    start, end = cfg.window()
    grid = ConvolutionGrid(bg, start, end, cfg.get_float("grid", "step"),
                           tuple(cfg.momenta()),
                           cfg.get_float("grid", "ramp_fraction", 0.1))
    mu = cfg.get("twopoint", "mu")
    mu = None if mu is None else cfg.get_float("twopoint", "mu")
    res = two_point(cfg.get_int("twopoint", "order", 2), bg, fp, state, grid,
                    cfg.get_list("grid", "tau_out"), mu=mu,
                    richardson=cfg.get_bool("twopoint", "richardson", True),
                    window_check=cfg.get_bool("twopoint", "window_check", False))
    header = cfg.header("twopoint")
    written = []
    if "csv" in cfg.formats():
        rows = [r for d in res.results.values() for r in d.to_rows()]
        write_csv(out / "twopoint.csv", header,
                  ["diagram", "order", "tau1", "tau2", "k", "re", "im"], rows)
        written.append(out / "twopoint.csv")
    if "json" in cfg.formats():
        write_json(out / "twopoint.json", header, json.loads(res.to_json()))
        written.append(out / "twopoint.json")
    return written


def run_forests(cfg: RunConfig, out: Path, graph_path=None):
    path = Path(graph_path) if graph_path else cfg.get_path("forests", "graph")
    try:
        g = DiagramGraph.parse(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read graph {path}: {exc}") from None
    doc = json.loads(forests_to_json(g, divergent_forests(g)))
    write_json(out / "forests.json", cfg.header("forests"), doc)
    return [out / "forests.json"]


def run_symcheck(cfg: RunConfig, out: Path):
    checks = identity_corpus()
    doc = {"passed": all(c.passed for c in checks),
           "checks": [c.to_dict() for c in checks]}
    write_json(out / "symcheck.json", cfg.header("symcheck"), doc)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}")
    if not doc["passed"]:
        raise AccuracyError("symbolic identity corpus has failures")
    return [out / "symcheck.json"]


def build_parser():
    p = argparse.ArgumentParser(prog="flrwren", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp_ = sub.add_parser(name)
        sp_.add_argument("-c", "--config", required=name not in ("symcheck", "forests"),
                         help="INI run configuration")
        sp_.add_argument("-o", "--output-dir", help="override [output] directory")
        if name == "forests":
            sp_.add_argument("-g", "--graph", help="edge-list file ('i j multiplicity' lines)")
    return p


def run(command, cfg: RunConfig, output_dir=None, graph=None):
    out = cfg.output_dir(output_dir)
    if command == "modes":
        return run_modes(cfg, out)
    if command == "coincidence":
        return run_coincidence(cfg, out)
    if command in ("fish", "sunset"):
        return run_kernel(cfg, out, command)
    if command == "twopoint":
        return run_twopoint(cfg, out)
    if command == "forests":
        return run_forests(cfg, out, graph)
    if command == "symcheck":
        return run_symcheck(cfg, out)
    raise ConfigError(f"unknown subcommand {command!r}")


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig.from_text("")
        if args.command == "forests" and not args.graph and cfg.get("forests", "graph") is None:
            raise ConfigError("forests needs --graph or [forests] graph")
        for path in run(args.command, cfg, args.output_dir, getattr(args, "graph", None)):
            print(path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except AccuracyError as exc:
        extra = f" (achieved {exc.achieved})" if exc.achieved is not None else ""
        print(f"tolerance failure: {exc}{extra}", file=sys.stderr)
        return 3
    except (DomainError, UnsupportedExpression, LookupError) as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
