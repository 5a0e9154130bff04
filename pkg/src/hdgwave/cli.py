"""Command-line front end: single solves, convergence studies, self-tests.

Configuration precedence is command line over config file over defaults.
Exit codes: 0 on success, 1 on runtime failure (solver or I/O), 2 when the
configuration or a solvability precondition is rejected.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from .local_solver import Assembler
from .mesh import load_mesh
from .projections import compute_theta
from .skeleton import ProblemData, energy_quantities, solve_problem
from .verify import (
    compute_errors,
    make_case,
    make_polynomial_case,
    run_study,
)


class ConfigError(ValueError):
    """Configuration that cannot be accepted (maps to exit code 2)."""


def _parse_complex_pair(text: str) -> complex:
    parts = text.split(",")
    if len(parts) != 2:
        raise ConfigError(f"expected complex value as 're,im', got '{text}'")
    try:
        return complex(float(parts[0]), float(parts[1]))
    except ValueError as exc:
        raise ConfigError(f"bad complex value '{text}': {exc}") from None


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got '{text}'")


@dataclass
class RunConfig:
    mode: str = "study"
    case: str = "acoustic61"
    mesh: str | None = None
    grid: int | None = None
    k: int = 1
    levels: int = 4
    s: complex = complex(2.0, -1.0)
    c: float = 1.0
    rho_e: float = 1.0
    rho_f: float = 1.0
    young: float = 1.0
    poisson: float = 0.3
    tau_e: float = 1.0
    tau_a: float = 1.0
    out: str | None = None
    dump_system: bool = False
    verbose: bool = False


# config-file key -> (RunConfig field, parser); CLI flags reuse the same keys
_KEYS: dict[str, tuple[str, object]] = {
    "case": ("case", str),
    "mesh": ("mesh", str),
    "grid": ("grid", int),
    "k": ("k", int),
    "levels": ("levels", int),
    "s": ("s", _parse_complex_pair),
    "c": ("c", float),
    "rhoE": ("rho_e", float),
    "rhoF": ("rho_f", float),
    "E": ("young", float),
    "nu": ("poisson", float),
    "tauE": ("tau_e", float),
    "tauA": ("tau_a", float),
    "out": ("out", str),
    "verbose": ("verbose", _parse_bool),
    "dump-system": ("dump_system", _parse_bool),
}


def load_config_file(path: str) -> dict[str, str]:
    pairs: dict[str, str] = {}
    try:
        with open(path, encoding="utf-8") as handle:
            for lineno, raw in enumerate(handle, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key=value")
                key, value = line.split("=", 1)
                pairs[key.strip()] = value.strip()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    return pairs


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hdgwave",
        description="Hybridized DG solver for time-harmonic fluid-solid waves",
    )
    parser.add_argument("mode", choices=("solve", "study", "selftest"))
    parser.add_argument("--case", help="acoustic61, elastic62, or coupled63")
    parser.add_argument("--mesh", help="mesh file to solve on (solve mode)")
    parser.add_argument("--grid", type=int, help="base cells per unit length")
    parser.add_argument("--k", type=int, help="polynomial degree")
    parser.add_argument("--levels", type=int, help="refinement levels (study)")
    parser.add_argument("--s", help="complex frequency as re,im")
    parser.add_argument("--c", type=float, help="sound speed")
    parser.add_argument("--rhoE", type=float, help="solid density")
    parser.add_argument("--rhoF", type=float, help="fluid density")
    parser.add_argument("--E", type=float, help="Young's modulus")
    parser.add_argument("--nu", type=float, help="Poisson ratio")
    parser.add_argument("--tauE", type=float, help="solid stabilization")
    parser.add_argument("--tauA", type=float, help="fluid stabilization")
    parser.add_argument("--out", help="output directory (or HDG_OUT_DIR)")
    parser.add_argument("--dump-system", action="store_true", default=None,
                        help="write matrix/rhs in Matrix Market format")
    parser.add_argument("--verbose", action="store_true", default=None)
    parser.add_argument("--config", help="key=value configuration file")
    return parser


_ARG_OF_KEY = {
    "case": "case", "mesh": "mesh", "grid": "grid", "k": "k",
    "levels": "levels", "s": "s", "c": "c", "rhoE": "rhoE", "rhoF": "rhoF",
    "E": "E", "nu": "nu", "tauE": "tauE", "tauA": "tauA", "out": "out",
    "verbose": "verbose", "dump-system": "dump_system",
}


def parse_config(ns: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(mode=ns.mode)
    if ns.config:
        for key, raw in load_config_file(ns.config).items():
            if key not in _KEYS:
                raise ConfigError(f"unknown config key '{key}'")
            field_name, parser_fn = _KEYS[key]
            try:
                setattr(cfg, field_name, parser_fn(raw))
            except ConfigError:
                raise
            except ValueError as exc:
                raise ConfigError(f"bad value for '{key}': {exc}") from None
    for key, (field_name, _) in _KEYS.items():
        value = getattr(ns, _ARG_OF_KEY[key])
        if value is None:
            continue
        if key == "s":
            value = _parse_complex_pair(value)
        setattr(cfg, field_name, value)
    if cfg.k < 1 or cfg.k > 6:
        raise ConfigError(f"degree k={cfg.k} outside the supported range 1..6")
    if cfg.levels < 1:
        raise ConfigError("levels must be at least 1")
    if cfg.grid is not None and cfg.grid < 1:
        raise ConfigError("grid must be a positive cell count")
    return cfg


def _case_from_config(cfg: RunConfig):
    return make_case(
        cfg.case,
        grid=cfg.grid,
        s=cfg.s,
        c=cfg.c,
        rho_e=cfg.rho_e,
        rho_f=cfg.rho_f,
        young=cfg.young,
        poisson=cfg.poisson,
        tau_e=cfg.tau_e,
        tau_a=cfg.tau_a,
    )


def _out_dir(cfg: RunConfig) -> str:
    path = cfg.out or os.environ.get("HDG_OUT_DIR") or "."
    os.makedirs(path, exist_ok=True)
    return path


def _mode_study(cfg: RunConfig, case) -> int:
    report = run_study(case, cfg.k, cfg.levels, verbose=cfg.verbose, log=print)
    out = _out_dir(cfg)
    csv_text = report.to_csv()
    with open(os.path.join(out, "report.csv"), "w", encoding="utf-8") as fh:
        fh.write(csv_text)
    with open(os.path.join(out, "report.json"), "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
    dat_name = f"plot_{case.name}_k{cfg.k}.dat"
    with open(os.path.join(out, dat_name), "w", encoding="utf-8") as fh:
        fh.write(report.to_dat())
    print(csv_text, end="")
    return 0


def _mode_solve(cfg: RunConfig, case) -> int:
    mesh = load_mesh(cfg.mesh) if cfg.mesh else case.mesh_at(0)
    assembler = Assembler(mesh, cfg.k, case.params)
    out = _out_dir(cfg)
    dump_prefix = os.path.join(out, "system") if cfg.dump_system else None
    solution, system = solve_problem(
        mesh, cfg.k, case.params, case.data,
        assembler=assembler, dump_prefix=dump_prefix,
    )
    errors = compute_errors(assembler, solution, case.exact)
    theta = compute_theta(assembler, solution, case.exact)
    print(f"case={case.name} k={cfg.k} elements={mesh.n_elements} "
          f"N={system.dofmap.n_dofs} h={mesh.h:.6e}")
    for name in sorted(errors):
        print(f"err_{name}={errors[name]:.6e}")
    print(f"theta={theta:.6e}")
    payload = {
        "case": case.name,
        "k": cfg.k,
        "N": system.dofmap.n_dofs,
        "h": mesh.h,
        "errors": errors,
        "theta": theta,
    }
    with open(os.path.join(out, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


def _mode_selftest(cfg: RunConfig) -> int:
    """Fast internal consistency checks; prints one PASS/FAIL line each."""
    failures = 0

    def check(label: str, fn) -> None:
        nonlocal failures
        try:
            fn()
            print(f"PASS {label}")
        except Exception as exc:  # noqa: BLE001 - report and count
            failures += 1
            print(f"FAIL {label}: {exc}")

    def poly(kind: str) -> None:
        case = make_polynomial_case(kind, 1)
        mesh = case.mesh_at(0)
        assembler = Assembler(mesh, 1, case.params)
        solution, _ = solve_problem(mesh, 1, case.params, case.data,
                                    assembler=assembler)
        errors = compute_errors(assembler, solution, case.exact)
        worst = max(errors.values())
        if worst > 1e-9:
            raise AssertionError(f"degree-1 polynomial error {worst:.3e}")

    def uniqueness() -> None:
        case = make_case("coupled63")
        mesh = case.mesh_at(0)
        assembler = Assembler(mesh, 1, case.params)
        solution, _ = solve_problem(mesh, 1, case.params, ProblemData(),
                                    assembler=assembler)
        top = max(np.abs(vec).max() if vec.size else 0.0
                  for vec in solution.volume.values())
        energies = energy_quantities(assembler, solution)
        if top > 1e-12 or max(energies.values()) > 1e-20:
            raise AssertionError(
                f"zero data gave |x|={top:.3e}, energies={energies}"
            )

    def monolithic_match() -> None:
        case = make_case("acoustic61")
        mesh = case.mesh_at(0)
        sol_a, _ = solve_problem(mesh, 1, case.params, case.data)
        sol_b, _ = solve_problem(mesh, 1, case.params, case.data,
                                 monolithic=True)
        num = np.linalg.norm(sol_a.dof_values - sol_b.dof_values)
        den = max(1.0, np.linalg.norm(sol_a.dof_values))
        if num / den > 1e-9:
            raise AssertionError(f"route mismatch {num / den:.3e}")

    check("polynomial consistency (fluid)", lambda: poly("acoustic"))
    check("polynomial consistency (solid)", lambda: poly("elastic"))
    check("polynomial consistency (coupled)", lambda: poly("coupled"))
    check("zero data implies zero solution", uniqueness)
    check("condensed matches monolithic", monolithic_match)
    if failures:
        print(f"{failures} check(s) failed")
        return 1
    print("all checks passed")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = parse_config(ns)
        if cfg.mode == "selftest":
            case = None
        else:
            case = _case_from_config(cfg)  # validates case name and parameters
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        if cfg.mode == "study":
            return _mode_study(cfg, case)
        if cfg.mode == "solve":
            return _mode_solve(cfg, case)
        return _mode_selftest(cfg)
    except Exception as exc:  # noqa: BLE001 - runtime failures map to exit 1
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
