"""
Command-line front end
----------------------

``gch run|sweep|certify|selftest [--config PATH] [--out DIR] [--paper-literal] [--seed N]``

The configuration is a JSON object with dotted keys; nested objects are
flattened, so ``{"grid": {"N": 2048}}`` and ``{"grid.N": 2048}`` are
equivalent. Recognized keys and defaults:

* ``grid.L`` (40), ``grid.N`` (2048)
* ``solver.epsilon`` (0.01), ``solver.t_final`` (2), ``solver.cfl``,
  ``solver.dt_max``, ``solver.formulation``, ``solver.snapshot_stride``,
  ``solver.scheme``, ``solver.output_interval``, ``solver.blowup_ceiling``
* ``ic.kind`` (``peakon``), ``ic.params`` (``{"c": 0.5, "x0": 0}``),
  ``ic.mollify`` (true),
  ``ic.mollifier_width`` (``null`` couples the width to ``solver.epsilon``)
* ``checks.enabled`` (all six bounds; ``"entropy"`` may be added),
  ``checks.tolerance`` (1e-6)
* ``sweep.epsilons``, ``sweep.window``, ``sweep.mollifier_width``,
  ``sweep.test_mode``
* ``entropy.seed`` (42), ``entropy.n_bumps`` (12), ``entropy.delta`` (1e-3),
  ``entropy.kruzkov_levels`` ([-1, 0, 1]), ``entropy.paper_literal``
* ``certify.trajectory``: trajectory directory for ``certify``

Exit codes: 0 success, 1 a check failed, 2 configuration error, 3 blow-up.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

from gch import __version__
from gch.entropy import certify, pair_kruzkov_smooth, pair_quadratic, random_bumps
from gch.errors import BlowUpError, ConfigurationError
from gch.estimates import CHECKS, DEFAULT_TOLERANCE, InitialNorms, run_checks
from gch.grid import Grid
from gch.initialdata import make_initial_data, mollifier_kernel, mollify
from gch.io import read_json, sha256_file, write_json
from gch.solver import SolverConfig, load_trajectory, run, save_trajectory

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_BLOWUP = 3

DEFAULTS: Dict[str, Any] = {
    "grid.L": 40.0,
    "grid.N": 2048,
    "solver.epsilon": 0.01,
    "solver.t_final": 2.0,
    "ic.kind": "peakon",
    "ic.params": {"c": 0.5, "x0": 0.0},
    "ic.mollify": True,
    "ic.mollifier_width": None,
    "checks.enabled": list(CHECKS),
    "checks.tolerance": DEFAULT_TOLERANCE,
    "entropy.seed": 42,
    "entropy.n_bumps": 12,
    "entropy.delta": 1.0e-3,
    "entropy.kruzkov_levels": [-1.0, 0.0, 1.0],
    "entropy.paper_literal": False,
}

SWEEP_DEFAULTS: Dict[str, Any] = dict(DEFAULTS, **{"grid.N": 4096, "solver.t_final": 1.0})

SOLVER_KEYS = ("epsilon", "t_final", "cfl", "dt_max", "formulation", "snapshot_stride",
               "scheme", "output_interval", "blowup_ceiling")
SWEEP_KEYS = ("epsilons", "window", "mollifier_width", "test_mode")

KNOWN_KEYS = (set(DEFAULTS) | {f"solver.{k}" for k in SOLVER_KEYS}
              | {f"sweep.{k}" for k in SWEEP_KEYS} | {"certify.trajectory"})

# values of these keys are objects, not further sections
OPAQUE_KEYS = {"ic.params"}


# {{{ configuration

def flatten(data: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
    out = {}
    for key, value in data.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict) and name not in OPAQUE_KEYS:
            out.update(flatten(value, name + "."))
        else:
            out[name] = value
    return out


def load_config(path: Optional[str],
                defaults: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Read and flatten a configuration file, filling in *defaults*
    (:data:`DEFAULTS` if omitted).

    :raises ConfigurationError: for a missing or unreadable file and for
        unknown keys.
    """
    config = dict(DEFAULTS if defaults is None else defaults)
    if path is None:
        return config
    if not os.path.isfile(path):
        raise ConfigurationError(f"config file not found: {path}")
    try:
        raw = read_json(path)
    except (OSError, ValueError) as exc:
        raise ConfigurationError(f"cannot parse config file {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigurationError(f"config file {path} must hold a JSON object")

    flat = flatten(raw)
    unknown = sorted(set(flat) - KNOWN_KEYS)
    if unknown:
        raise ConfigurationError(f"unknown config keys in {path}: {', '.join(unknown)}")
    config.update(flat)
    return config


def build_grid(config: Dict[str, Any]) -> Grid:
    try:
        return Grid(float(config["grid.L"]), int(config["grid.N"]))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"bad grid settings: {exc}") from exc


def build_solver_config(config: Dict[str, Any]) -> SolverConfig:
    options = {k: config[f"solver.{k}"] for k in SOLVER_KEYS if f"solver.{k}" in config}
    try:
        return SolverConfig.from_dict(options)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"bad solver settings: {exc}") from exc


def build_initial_data(config: Dict[str, Any], grid: Grid, epsilon: float):
    """Return ``(u0, u_start)``: the raw data, whose norms enter the bounds,
    and the (mollified) field the solver starts from."""
    u0 = make_initial_data(str(config["ic.kind"]), config["ic.params"], grid)
    if not config["ic.mollify"]:
        return u0, u0
    width = config["ic.mollifier_width"]
    width = epsilon if width is None else float(width)
    return u0, mollify(u0, mollifier_kernel(width, grid))


def entropy_suite(config: Dict[str, Any], t_final: float):
    delta = float(config["entropy.delta"])
    pairs = [pair_quadratic()] + [pair_kruzkov_smooth(float(k), delta)
                                  for k in config["entropy.kruzkov_levels"]]
    bumps = random_bumps(int(config["entropy.n_bumps"]), t_final,
                         seed=int(config["entropy.seed"]))
    return pairs, bumps

# }}}


# {{{ manifest

@dataclass
class RunManifest:
    """Record of one CLI invocation. Every emitted file is listed with its
    SHA-256 digest; ``wall_clock`` is the only field that varies between
    identical invocations."""

    command: str
    config: Dict[str, Any]
    inputs: Dict[str, str] = field(default_factory=dict)
    outputs: Dict[str, str] = field(default_factory=dict)
    wall_clock: float = 0.0
    summary: Dict[str, Any] = field(default_factory=dict)

    def add_output(self, out_dir: str, path: str) -> None:
        rel = os.path.relpath(path, out_dir).replace(os.sep, "/")
        self.outputs[rel] = sha256_file(path)

    def add_tree(self, out_dir: str, directory: str) -> None:
        for root, dirs, files in os.walk(directory):
            dirs.sort()
            for name in sorted(files):
                self.add_output(out_dir, os.path.join(root, name))

    def write(self, out_dir: str) -> str:
        path = os.path.join(out_dir, "run_manifest.json")
        write_json({
            "command": self.command,
            "version": __version__,
            "config": self.config,
            "inputs": self.inputs,
            "outputs": dict(sorted(self.outputs.items())),
            "wall_clock": self.wall_clock,
            "summary": self.summary,
        }, path)
        return path

# }}}


# {{{ commands

def _inputs(config_path: Optional[str], config: Dict[str, Any]) -> Dict[str, str]:
    inputs = {}
    if config_path is not None:
        inputs["config"] = sha256_file(config_path)
    csv_path = (config.get("ic.params") or {}).get("path")
    if config.get("ic.kind") == "csv" and csv_path and os.path.isfile(csv_path):
        inputs["ic.csv"] = sha256_file(csv_path)
    return inputs


def cmd_run(config_path: Optional[str], out_dir: str,
            overrides: Dict[str, Any]) -> int:
    start = time.perf_counter()
    config = load_config(config_path)
    config.update(overrides)

    grid = build_grid(config)
    scfg = build_solver_config(config)
    u0, u_start = build_initial_data(config, grid, scfg.epsilon)

    enabled = list(config["checks.enabled"])
    want_entropy = "entropy" in enabled
    enabled = [c for c in enabled if c != "entropy"]
    tolerance = float(config["checks.tolerance"])
    # validate check names before the (long) run
    unknown = set(enabled) - set(CHECKS)
    if unknown:
        raise ConfigurationError(f"unknown checks: {sorted(unknown)}")

    os.makedirs(out_dir, exist_ok=True)
    manifest = RunManifest("run", config, _inputs(config_path, config))

    traj = run(u_start, scfg)

    traj_dir = os.path.join(out_dir, "trajectory")
    save_trajectory(traj, traj_dir)
    manifest.add_tree(out_dir, traj_dir)

    passed = True
    summary: Dict[str, Any] = {"checks": {}}
    if traj.formulation == "u":
        reports = run_checks(traj, InitialNorms.from_field(u0), enabled, tolerance)
        for name, rep in reports.items():
            stem = os.path.join(out_dir, f"bound_{name}")
            rep.write(stem)
            manifest.add_output(out_dir, stem + ".json")
            manifest.add_output(out_dir, stem + ".csv")
            summary["checks"][name] = {"passed": rep.passed,
                                       "min_relative_margin": rep.min_relative_margin()}
            passed &= rep.passed

        if want_entropy:
            pairs, bumps = entropy_suite(config, traj.t_final)
            cert = certify(traj, pairs, bumps, u0=u_start.values,
                           paper_literal=bool(config["entropy.paper_literal"]))
            path = os.path.join(out_dir, "certification.json")
            cert.write(path)
            manifest.add_output(out_dir, path)
            summary["checks"]["entropy"] = {"passed": cert.passed,
                                            "worst_margin": cert.worst_margin()}
            passed &= cert.passed
    elif enabled or want_entropy:
        summary["note"] = "checks are defined for u-trajectories; skipped for w"

    summary["passed"] = bool(passed)
    manifest.summary = summary
    manifest.wall_clock = time.perf_counter() - start
    manifest.write(out_dir)
    return EXIT_OK if passed else EXIT_CHECK_FAILED


def cmd_sweep(config_path: Optional[str], out_dir: str,
              overrides: Dict[str, Any]) -> int:
    from gch.sweep import DEFAULT_EPSILONS, DEFAULT_MOLLIFIER_WIDTH, SweepBlowUp, SweepConfig, run_sweep

    start = time.perf_counter()
    config = load_config(config_path, SWEEP_DEFAULTS)
    config.update(overrides)

    grid = build_grid(config)
    epsilons = tuple(config.get("sweep.epsilons", DEFAULT_EPSILONS))
    config["solver.epsilon"] = epsilons[0]
    base = build_solver_config(config)
    u0 = make_initial_data(str(config["ic.kind"]), config["ic.params"], grid)

    window = config.get("sweep.window", (-10.0, 10.0, 0.1, None))
    try:
        scfg = SweepConfig(
            epsilons=epsilons, base=base, window=tuple(window),
            mollifier_width=config.get("sweep.mollifier_width", DEFAULT_MOLLIFIER_WIDTH),
            test_mode=bool(config.get("sweep.test_mode", False)),
            entropy_seed=int(config["entropy.seed"]),
            n_bumps=int(config["entropy.n_bumps"]))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"bad sweep settings: {exc}") from exc

    os.makedirs(out_dir, exist_ok=True)
    manifest = RunManifest("sweep", config, _inputs(config_path, config))

    code = EXIT_OK
    try:
        report = run_sweep(u0, scfg)
    except SweepBlowUp as exc:
        report = exc.report
        code = EXIT_BLOWUP

    paths = report.write(out_dir)
    for key, path in sorted(paths.items()):
        if key.startswith("member_"):
            manifest.add_tree(out_dir, os.path.dirname(path))
        else:
            manifest.add_output(out_dir, path)

    manifest.summary = {"passed": report.passed, "monotone": report.monotone(),
                        "certified": report.certified, "aborted": report.aborted}
    manifest.wall_clock = time.perf_counter() - start
    manifest.write(out_dir)

    if code == EXIT_OK and not report.passed:
        code = EXIT_CHECK_FAILED
    return code


def cmd_certify(config_path: Optional[str], out_dir: str, overrides: Dict[str, Any],
                trajectory: Optional[str] = None) -> int:
    start = time.perf_counter()
    config = load_config(config_path)
    config.update(overrides)

    traj_dir = trajectory or config.get("certify.trajectory")
    if not traj_dir:
        raise ConfigurationError("certify needs a trajectory directory "
                                 "(--trajectory or certify.trajectory)")
    if not os.path.isdir(traj_dir):
        raise ConfigurationError(f"trajectory directory not found: {traj_dir}")
    traj = load_trajectory(traj_dir)

    pairs, bumps = entropy_suite(config, traj.t_final)
    cert = certify(traj, pairs, bumps,
                   paper_literal=bool(config["entropy.paper_literal"]))

    os.makedirs(out_dir, exist_ok=True)
    manifest = RunManifest("certify", config, _inputs(config_path, config))
    manifest.inputs["trajectory"] = sha256_file(os.path.join(traj_dir, "manifest.json"))
    path = os.path.join(out_dir, "certification.json")
    cert.write(path)
    manifest.add_output(out_dir, path)
    manifest.summary = {"passed": cert.passed, "worst_margin": cert.worst_margin()}
    manifest.wall_clock = time.perf_counter() - start
    manifest.write(out_dir)
    return EXIT_OK if cert.passed else EXIT_CHECK_FAILED


def cmd_selftest(quiet: bool = False) -> int:
    from gch.selftest import run_selftest

    results = run_selftest()
    for res in results:
        if not quiet:
            status = "PASS" if res.passed else "FAIL"
            line = f"{status} {res.name} ({res.seconds:.3f} s)"
            print(line + (f": {res.message}" if res.message else ""))
    failed = sum(not r.passed for r in results)
    if not quiet:
        print(f"{len(results) - failed}/{len(results)} passed")
    return EXIT_OK if failed == 0 else EXIT_CHECK_FAILED

# }}}


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gch", description="Vanishing-viscosity experiments for a "
        "nonlocal peakon equation of Camassa-Holm type.")
    parser.add_argument("command", choices=("run", "sweep", "certify", "selftest"))
    parser.add_argument("--config", metavar="PATH", help="JSON configuration file")
    parser.add_argument("--out", metavar="DIR", default="gch-out", help="output directory")
    parser.add_argument("--paper-literal", action="store_true",
                        help="use eta'(u0) instead of eta(u0) in the entropy initial term")
    parser.add_argument("--seed", type=int, metavar="N",
                        help="seed of the random test functions (entropy.seed)")
    parser.add_argument("--trajectory", metavar="DIR",
                        help="trajectory directory for 'certify'")
    parser.add_argument("--version", action="version", version=__version__)
    return parser


def main(argv: Optional[Sequence[str]] = None, quiet: bool = False) -> int:
    args = make_parser().parse_args(argv)

    overrides: Dict[str, Any] = {}
    if args.paper_literal:
        overrides["entropy.paper_literal"] = True
    if args.seed is not None:
        overrides["entropy.seed"] = args.seed

    def fail(code: int, message: str) -> int:
        if not quiet:
            print(f"gch {args.command}: {message}", file=sys.stderr)
        return code

    try:
        if args.command == "run":
            return cmd_run(args.config, args.out, overrides)
        if args.command == "sweep":
            return cmd_sweep(args.config, args.out, overrides)
        if args.command == "certify":
            return cmd_certify(args.config, args.out, overrides, args.trajectory)
        return cmd_selftest(quiet=quiet)
    except ConfigurationError as exc:
        return fail(EXIT_CONFIG, " ".join(str(exc).split()))
    except BlowUpError as exc:
        return fail(EXIT_BLOWUP, f"blow-up: {exc}")


if __name__ == "__main__":
    sys.exit(main())

# vim: foldmethod=marker
