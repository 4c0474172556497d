"""Batch front end.

    stokes-darcy <command> [--config FILE] [--set key=value ...] [--output-dir DIR]

Commands: solve, mms, micro-cell, micro-bl, sweep, check. Each command reads
its own section of the YAML config (``micro-cell`` reads ``micro_cell``);
``--set`` keys are dotted paths relative to that section, or to the top level
for ``output_dir``. Values are parsed as YAML scalars/lists.

Exit status: 0 success, 2 configuration error, 3 solver failure,
4 violated model invariant.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import Any, List, Literal, Optional, Tuple

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .geometry import BoundaryLayerStripe, GeometryError, UnitCellGeometry
from .grid import GridError, Rect, dump_field
from .io import report_text, write_csv, write_report
from .macro import (
    InterfaceCoefficients,
    InvariantError,
    PorousMediumParams,
    ProblemSpec,
    interface_flux,
    porous_boundary_outflux,
    solve_coupled,
)
from .microscale import (
    MicroscaleError,
    StripeSolver,
    admissible_offsets,
    solve_cell,
    sweep_interface,
    write_cell_csv,
)
from .mms import REFERENCE_ERRORS, MmsCase, run_convergence
from .sparse import SolverError
from .wellposedness import WellPosednessError, WellPosednessReport, check, sweep_C

log = logging.getLogger("stokes_darcy")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_INVARIANT = 4

INVARIANT_ERRORS = (InvariantError, GeometryError, GridError, MicroscaleError, WellPosednessError)


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# schema
# ---------------------------------------------------------------------------

class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class RectCfg(_Section):
    x0: float
    x1: float
    y0: float
    y1: float

    def rect(self) -> Rect:
        return Rect(self.x0, self.x1, self.y0, self.y1)


class CoefficientsCfg(_Section):
    eps: float = Field(0.1, description="scale separation parameter")
    N_tau: float = Field(-1 / math.pi, description="boundary-layer constant N_tau (< 0)")
    M_tau1: float = Field(-2e-6 * 1.05 / (math.pi * 0.01), description="boundary-layer constant M_tau1 (< 0)")
    N_s: float = Field(0.0, description="boundary-layer constant N_s (0 for isotropic media)")
    M_tau2: float = Field(0.0, description="boundary-layer constant M_tau2 (0 for isotropic media)")
    mode: Literal["generalised", "classical_bj"] = Field("generalised", description="tangential coupling")
    alpha_bj: Optional[float] = Field(None, description="Beavers-Joseph parameter (classical_bj mode)")
    isotropic: bool = Field(True, description="enforce N_s = M_tau2 = 0")

    def build(self) -> InterfaceCoefficients:
        return InterfaceCoefficients(**self.model_dump())


class DirichletSegment(_Section):
    side: Literal["left", "right", "bottom"]
    lo: float = Field(-math.inf, description="segment start along the side")
    hi: float = Field(math.inf, description="segment end along the side")


class SolveCfg(_Section):
    ff: RectCfg = Field(RectCfg(x0=0, x1=1, y0=0.5, y1=1), description="free-flow rectangle")
    pm: RectCfg = Field(RectCfg(x0=0, x1=1, y0=0, y1=0.5), description="porous rectangle below it")
    h: float = Field(1 / 16, description="grid step")
    k: float = Field(1e-6, description="intrinsic permeability")
    coefficients: CoefficientsCfg = CoefficientsCfg()
    lid_velocity: float = Field(1.0, description="tangential velocity of the top wall")
    force: Tuple[float, float] = Field((0.0, 0.0), description="constant body force in the free flow")
    pm_dirichlet: List[DirichletSegment] = Field(
        [DirichletSegment(side="bottom")], description="porous boundary segments with pressure data")
    pm_pressure: float = Field(0.0, description="pressure on the Dirichlet segments")
    tol: float = Field(1e-10, description="relative residual tolerance")
    dump: bool = Field(True, description="write the solution field CSV")


class MmsCfg(_Section):
    levels: List[int] = Field([8, 16, 32, 64, 128, 256], description="1/h for each level (must double)")
    k: float = Field(1e-6, description="permeability")
    eps: float = Field(0.1, description="scale separation parameter")
    tol: float = Field(1e-10, description="relative residual tolerance")
    workers: int = Field(1, ge=1, description="levels solved concurrently")

    @field_validator("levels")
    @classmethod
    def _doubling(cls, v):
        v = sorted(v)
        if not v:
            raise ValueError("at least one level is required")
        if any(b != 2 * a for a, b in zip(v, v[1:])):
            raise ValueError("levels must double (h halves between consecutive levels)")
        return v


class GeometryCfg(_Section):
    shape: Literal["circle", "square", "rhombus"] = Field("square", description="inclusion shape")
    d: float = Field(0.5, description="inclusion size (diameter, side or diagonal)")

    def build(self) -> UnitCellGeometry:
        return UnitCellGeometry(self.shape, self.d)


class CellCfg(_Section):
    geometry: GeometryCfg = GeometryCfg()
    h_micro: float = Field(1 / 64, description="microscale grid step")
    direction: Literal[0, 1] = Field(0, description="forcing direction e1 (0) or e2 (1)")
    extrapolate: bool = Field(True, description="also solve at 2h, 4h and report a Richardson value")
    tol: float = Field(1e-10, description="relative residual tolerance")


class BlCfg(_Section):
    geometry: GeometryCfg = GeometryCfg()
    h_micro: float = Field(1 / 64, description="microscale grid step")
    a: Optional[float] = Field(None, description="interface offset above the inclusions (default one grid step)")
    l: int = Field(4, ge=1, description="number of inclusions below the interface")
    tol: float = Field(1e-10, description="relative residual tolerance")


class SweepCfg(_Section):
    geometry: GeometryCfg = GeometryCfg()
    h_micro: float = Field(1 / 64, description="microscale grid step")
    l: int = Field(4, ge=1, description="number of inclusions below the interface")
    a_list: Optional[List[float]] = Field(None, description="interface offsets (default: count grid-aligned offsets)")
    count: int = Field(10, ge=1, description="number of offsets when a_list is not given")
    a_max: float = Field(0.4, description="largest offset when a_list is not given")
    workers: int = Field(1, ge=1, description="offsets solved concurrently")
    tol: float = Field(1e-10, description="relative residual tolerance")


class CheckCfg(_Section):
    k_tilde: float = Field(1e-4, description="non-dimensional permeability")
    N_tau: float = Field(-0.3183, description="boundary-layer constant N_tau")
    M_tau1: float = Field(-0.06398, description="boundary-layer constant M_tau1")
    C: float = Field(1.0, description="lumped analysis constant")
    C_sweep: List[float] = Field([], description="extra C values tabulated in check_sweep.csv")


class RunConfig(_Section):
    output_dir: str = Field("out", description="directory for CSV and report files")
    solve: SolveCfg = SolveCfg()
    mms: MmsCfg = MmsCfg()
    micro_cell: CellCfg = CellCfg()
    micro_bl: BlCfg = BlCfg()
    sweep: SweepCfg = SweepCfg()
    check: CheckCfg = CheckCfg()

    @model_validator(mode="after")
    def _outdir(self):
        if Path(self.output_dir).exists() and not Path(self.output_dir).is_dir():
            raise ValueError(f"output_dir {self.output_dir!r} exists and is not a directory")
        return self


COMMANDS = {
    "solve": ("solve", "coupled Stokes-Darcy solve: lid-driven free flow over a porous block"),
    "mms": ("mms", "manufactured-solution convergence study"),
    "micro-cell": ("micro_cell", "periodic cell problem and permeability"),
    "micro-bl": ("micro_bl", "boundary-layer constants N_tau and M_tau1 for one interface offset"),
    "sweep": ("sweep", "boundary-layer constants over a list of interface offsets"),
    "check": ("check", "well-posedness condition k_tilde > C R^2"),
}


def schema_help(model: type, prefix: str = "") -> List[str]:
    """One line per leaf field: dotted key, type, default, description."""
    lines = []
    for name, f in model.model_fields.items():
        ann = f.annotation
        if isinstance(ann, type) and issubclass(ann, BaseModel):
            lines.extend(schema_help(ann, prefix + name + "."))
            continue
        default = f.default
        if isinstance(default, BaseModel):
            default = default.model_dump()
        tname = ann.__name__ if isinstance(ann, type) else str(ann).replace("typing.", "")
        desc = f" - {f.description}" if f.description else ""
        lines.append(f"  {prefix}{name} ({tname}, default {default!r}){desc}")
    return lines


# ---------------------------------------------------------------------------
# config loading
# ---------------------------------------------------------------------------

def _set_path(tree: dict, dotted: str, value: Any) -> None:
    keys = dotted.split(".")
    node = tree
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"--set {dotted}: {k!r} is not a section")
    node[keys[-1]] = value


def load_config(path: Optional[str], section: str, overrides: List[str]) -> RunConfig:
    data: dict = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {path!r} does not exist")
        try:
            data = yaml.safe_load(p.read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must contain a mapping")
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigError(f"--set {key}: cannot parse value {raw!r}") from exc
        top = key.split(".", 1)[0]
        _set_path(data, key if top in RunConfig.model_fields else f"{section}.{key}", value)
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _emit(out: Path, name: str, items: dict) -> None:
    write_report(out / f"{name}_report.txt", items)
    sys.stdout.write(report_text(items))


def cmd_solve(cfg: SolveCfg, out: Path) -> None:
    ff, pm = cfg.ff.rect(), cfg.pm.rect()
    lid, top = cfg.lid_velocity, ff.y1
    fx, fy = cfg.force
    tiny = 1e-12 * max(1.0, abs(top))

    def wall_velocity(x, y):
        y = np.asarray(y, dtype=float)
        u = np.where(np.abs(y - top) < tiny, lid, 0.0) + 0.0 * np.asarray(x)
        return u, np.zeros_like(u)

    def force(x, y):
        z = np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)
        return z + fx, z + fy

    spec = ProblemSpec(
        ff_rect=ff, pm_rect=pm, h=cfg.h,
        coefficients=cfg.coefficients.build(),
        medium=PorousMediumParams(cfg.k),
        ff_velocity=wall_velocity,
        pm_dirichlet=tuple((s.side, s.lo, s.hi) for s in cfg.pm_dirichlet),
        pm_pressure=lambda x, y: np.full(np.shape(x), cfg.pm_pressure, dtype=float),
        force=force,
    )
    grid = spec.grid()
    fld, rep = solve_coupled(spec, grid, tol=cfg.tol)
    if cfg.dump:
        dump_field(grid, fld, out / "solve_field.csv")
    outflux = porous_boundary_outflux(spec, grid, fld)
    items = {
        "h": cfg.h, "n_unknowns": grid.n_unknowns, "mode": cfg.coefficients.mode,
        "residual": rep.residual, "solver": rep.kind, "refinements": rep.iterations,
        "interface_flux": interface_flux(grid, fld),
    }
    items.update({f"outflux_{k}": v for k, v in outflux.items()})
    _emit(out, "solve", items)


def cmd_mms(cfg: MmsCfg, out: Path) -> None:
    case = MmsCase(k=cfg.k, eps=cfg.eps)
    rep = run_convergence([1.0 / n for n in cfg.levels], tol=cfg.tol, case=case, workers=cfg.workers,
                          csv_path=out / "mms_convergence.csv")
    items = {"levels": len(rep.levels), "max_residual": max(l.residual for l in rep.levels)}
    default_case = case == MmsCase()
    for n, lev in zip(cfg.levels, rep.levels):
        if default_case and n in REFERENCE_ERRORS:
            for var, ref in zip(rep.VARS, REFERENCE_ERRORS[n]):
                items[f"ratio_to_reference_{var}_h1_{n}"] = lev.errors[var] / ref
    orders = rep.orders()
    if orders:
        for var in rep.VARS:
            items[f"min_rate_{var}"] = min(o[var] for o in orders)
            items[f"max_rate_{var}"] = max(o[var] for o in orders)
    _emit(out, "mms", items)


def cmd_micro_cell(cfg: CellCfg, out: Path) -> None:
    geom = cfg.geometry.build()
    sol = solve_cell(geom, cfg.h_micro, direction=cfg.direction, tol=cfg.tol, extrapolate=cfg.extrapolate)
    write_cell_csv(out / "cell.csv", sol)
    _emit(out, "cell", {
        "shape": geom.shape, "d": geom.d, "h": cfg.h_micro, "k_tilde": sol.k_tilde,
        "k_tilde_richardson": sol.k_tilde_richardson, "richardson_order": sol.richardson_order,
        "max_divergence": sol.max_divergence, "geometry_approximate": sol.approximate,
    })


def cmd_micro_bl(cfg: BlCfg, out: Path) -> None:
    geom = cfg.geometry.build()
    a = cfg.h_micro if cfg.a is None else cfg.a
    stripe = BoundaryLayerStripe(base=geom, a=a, l=cfg.l)
    cell = solve_cell(geom, cfg.h_micro, tol=cfg.tol, extrapolate=False)
    solver = StripeSolver(geom, cfg.h_micro, cfg.l)
    t = solver.t_problem(stripe, cfg.tol)
    beta = solver.beta_problem(stripe, cell, cfg.tol)
    R = beta.constant / (2 * t.constant)
    write_csv(out / "bl.csv", ("a", "N_tau", "M_tau1", "R"), [(a, t.constant, beta.constant, R)])
    _emit(out, "bl", {
        "shape": geom.shape, "d": geom.d, "h": cfg.h_micro, "l": cfg.l, "a": a,
        "interface_height": stripe.interface_height, "k_tilde": cell.k_tilde,
        "N_tau": t.constant, "M_tau1": beta.constant, "R": R,
        "M_tau1_porous_side": beta.lower_limit,
        "t_decay_ratio": t.decay_ratio, "beta_decay_ratio": beta.decay_ratio,
        "max_divergence": max(t.max_divergence, beta.max_divergence),
        "geometry_approximate": geom.approximate,
    })


def cmd_sweep(cfg: SweepCfg, out: Path) -> None:
    geom = cfg.geometry.build()
    a_list = cfg.a_list if cfg.a_list is not None else admissible_offsets(geom, cfg.h_micro, cfg.count, cfg.a_max)
    table = sweep_interface(geom, a_list, cfg.h_micro, l=cfg.l, tol=cfg.tol, workers=cfg.workers)
    table.write_csv(out / "sweep.csv")
    _emit(out, "sweep", {
        "shape": geom.shape, "d": geom.d, "h": cfg.h_micro, "l": cfg.l, "offsets": len(table.rows),
        "k_tilde": table.k_tilde, "R_monotone_in_a": table.monotone,
        "all_negative": all(r.N_tau < 0 and r.M_tau1 < 0 for r in table.rows),
        "geometry_approximate": geom.approximate,
    })


def cmd_check(cfg: CheckCfg, out: Path) -> None:
    rep = check(cfg.k_tilde, cfg.N_tau, cfg.M_tau1, cfg.C)
    rep.write(csv_path=out / "check.csv")
    if cfg.C_sweep:
        rows = [r.csv_row() for r in sweep_C(cfg.k_tilde, cfg.N_tau, cfg.M_tau1, cfg.C_sweep)]
        write_csv(out / "check_sweep.csv", WellPosednessReport.CSV_HEADER, rows)
    _emit(out, "check", rep.items())


HANDLERS = {
    "solve": cmd_solve, "mms": cmd_mms, "micro-cell": cmd_micro_cell,
    "micro-bl": cmd_micro_bl, "sweep": cmd_sweep, "check": cmd_check,
}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stokes-darcy", description="Stokes-Darcy toolkit with generalised interface conditions.",
        epilog="exit status: 0 ok, 2 config error, 3 solver failure, 4 invariant violation",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, (section, text) in COMMANDS.items():
        model = RunConfig.model_fields[section].annotation
        epilog = "\n".join(["config keys (section %r, or --set key=value):" % section]
                           + schema_help(model) + ["  output_dir (top level)"])
        p = sub.add_parser(name, help=text, description=text, epilog=epilog,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", "-c", help="YAML config file")
        p.add_argument("--set", "-s", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config value (repeatable)")
        p.add_argument("--output-dir", "-o", help="output directory (overrides output_dir)")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    section = COMMANDS[args.command][0]
    overrides = list(args.set)
    if args.output_dir is not None:
        overrides.append(f"output_dir={args.output_dir}")
    try:
        cfg = load_config(args.config, section, overrides)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    out = Path(cfg.output_dir)
    try:
        HANDLERS[args.command](getattr(cfg, section), out)
    except INVARIANT_ERRORS as exc:
        log.error("invariant violated: %s", exc)
        return EXIT_INVARIANT
    except SolverError as exc:
        log.error("solver failure: %s", exc)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
