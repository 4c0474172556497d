"""Manufactured-solution benchmark on the unit square with a horizontal interface at y = 0.5."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .grid import CoupledField, MacGrid, Rect, relative_l2_error
from .io import write_csv
from .macro import InterfaceCoefficients, PorousMediumParams, ProblemSpec, solve_coupled

SQ2 = math.sqrt(2.0) / 2.0
A = math.pi / 2.0

# Reference relative L2 errors for h = 1/8 ... 1/1024 (u, v, p_ff, p_pm).
REFERENCE_ERRORS = {
    8: (5.11e00, 1.35e00, 2.91e-03, 2.29e-03),
    16: (1.13e00, 2.81e-01, 7.66e-04, 5.98e-04),
    32: (2.73e-01, 6.68e-02, 1.98e-04, 1.54e-04),
    64: (6.76e-02, 1.64e-02, 5.09e-05, 3.91e-05),
    128: (1.68e-02, 4.09e-03, 1.29e-05, 1.00e-05),
    256: (4.21e-03, 1.02e-03, 3.28e-06, 2.52e-06),
    512: (1.05e-03, 2.54e-04, 8.22e-07, 6.33e-07),
    1024: (2.63e-04, 6.39e-05, 2.05e-07, 1.59e-07),
}


@dataclass(frozen=True)
class MmsCase:
    k: float = 1e-6
    eps: float = 0.1

    @property
    def N_tau(self) -> float:
        return -1.0 / math.pi

    @property
    def M_tau1(self) -> float:
        return -2.0 * self.k * (1.0 + 0.5 * self.eps) / (math.pi * self.eps**2)

    @property
    def N_s(self) -> float:
        return 0.0

    @property
    def M_tau2(self) -> float:
        return 0.0

    def coefficients(self) -> InterfaceCoefficients:
        return InterfaceCoefficients(eps=self.eps, N_tau=self.N_tau, M_tau1=self.M_tau1)


def exact_solution(x, y, case: MmsCase = MmsCase()):
    """(u, v, p_ff, p_pm) of the benchmark; formulas hold on all of R^2."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    e = np.exp(y - 0.5) / case.k
    u = np.sin(A * x) * np.cos(A * y)
    v = -np.cos(A * x) * np.sin(A * y)
    p_ff = SQ2 * np.cos(A * x) * (e - A)
    p_pm = SQ2 * np.cos(A * x) * e
    return u, v, p_ff, p_pm


def mms_forcing(x, y, case: MmsCase = MmsCase()):
    """(f_u, f_v, f_mass_ff, f_mass_pm) obtained by substituting the exact solution."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    u, v, _, _ = exact_solution(x, y, case)
    e = np.exp(y - 0.5)
    # -lap u = 2 A^2 u;  dp_ff/dx = -SQ2 A sin(Ax) (e/k - A)
    f_u = 2 * A**2 * u - SQ2 * A * np.sin(A * x) * (e / case.k - A)
    f_v = 2 * A**2 * v + SQ2 * np.cos(A * x) * e / case.k
    f_ff = np.zeros(np.broadcast(x, y).shape)
    f_pm = -SQ2 * np.cos(A * x) * e * (1.0 - A**2)
    return f_u, f_v, f_ff, f_pm


def mms_spec(h: float, case: MmsCase = MmsCase()) -> ProblemSpec:
    def velocity(x, y):
        u, v, _, _ = exact_solution(x, y, case)
        return u, v

    def force(x, y):
        f_u, f_v, _, _ = mms_forcing(x, y, case)
        return f_u, f_v

    return ProblemSpec(
        ff_rect=Rect(0.0, 1.0, 0.5, 1.0),
        pm_rect=Rect(0.0, 1.0, 0.0, 0.5),
        h=h,
        coefficients=case.coefficients(),
        medium=PorousMediumParams(case.k),
        ff_velocity=velocity,
        pm_dirichlet=(("left", -np.inf, np.inf), ("right", -np.inf, np.inf), ("bottom", -np.inf, np.inf)),
        pm_pressure=lambda x, y: exact_solution(x, y, case)[3],
        force=force,
        mass_ff=lambda x, y: mms_forcing(x, y, case)[2],
        mass_pm=lambda x, y: mms_forcing(x, y, case)[3],
    )


def sample_exact(grid: MacGrid, case: MmsCase = MmsCase()) -> CoupledField:
    """Exact solution at every unknown position, ghosts included."""
    parts = {}
    for n, var in enumerate(("u", "v", "p_ff", "p_pm")):
        X, Y = grid.coords(var)
        parts[var] = exact_solution(X, Y, case)[n]
    which = {"u_bot": 0, "u_top": 0, "v_left": 1, "v_right": 1,
             "pm_left": 3, "pm_right": 3, "pm_bot": 3, "pm_top": 3}
    ghosts = {}
    for block, n in which.items():
        x, y = grid.ghost_coords(block)
        ghosts[block] = exact_solution(x, y, case)[n]
    return CoupledField(ghosts=ghosts, **parts)


# -- continuous interface identities ------------------------------------------

def interface_residuals(x1, case: MmsCase = MmsCase(), relative: bool = False):
    """Residuals of mass, normal-stress and tangential conditions on y = 0.5.

    Uses closed-form derivatives of the exact solution; n = -e2, tau = e1.
    With ``relative`` each residual is divided by the largest term of its
    condition (at least 1), since p_pm is of size 1/k on the interface.
    """
    x1 = np.asarray(x1, dtype=float)
    y = 0.5
    u, v, p_ff, p_pm = exact_solution(x1, y, case)
    c, s = np.cos(A * x1), np.sin(A * x1)
    du_dy = -A * s * np.sin(A * y)
    dv_dy = -A * c * np.cos(A * y)
    dppm_dx = -SQ2 * A * s * np.exp(y - 0.5) / case.k
    dppm_dy = SQ2 * c * np.exp(y - 0.5) / case.k
    tTn = -du_dy  # tau . T n
    nTn = dv_dy - p_ff  # n . T n
    v_pm_n = case.k * dppm_dy  # v_pm . n with v_pm = -k grad p, n = -e2
    r_mass = -v - v_pm_n
    r_normal = p_pm - (-nTn - case.N_s * tTn)
    slip = case.eps * case.N_tau * tTn
    drag = case.eps**2 * (case.M_tau1 * dppm_dx + case.M_tau2 * dppm_dy)
    r_tangential = u - (slip + drag)
    if relative:
        def scale(*terms):
            return np.maximum(1.0, np.max(np.abs(np.broadcast_arrays(*terms)), axis=0))
        r_mass = r_mass / scale(v, v_pm_n)
        r_normal = r_normal / scale(p_pm, p_ff, dv_dy, case.N_s * tTn)
        r_tangential = r_tangential / scale(u, slip, drag)
    return r_mass, r_normal, r_tangential


# -- convergence study -------------------------------------------------------

@dataclass
class ConvergenceLevel:
    h: float
    errors: dict
    residual: float


@dataclass
class ConvergenceReport:
    levels: List[ConvergenceLevel] = field(default_factory=list)

    VARS = ("u", "v", "p_ff", "p_pm")

    def orders(self) -> List[dict]:
        """Observed order between each level and the previous one."""
        out = []
        for a, b in zip(self.levels, self.levels[1:]):
            r = math.log(a.h / b.h)
            out.append({v: math.log(a.errors[v] / b.errors[v]) / r for v in self.VARS})
        return out

    def rows(self):
        orders = [None] + self.orders()
        for n, (lev, o) in enumerate(zip(self.levels, orders)):
            rates = [math.nan] * 4 if o is None else [o[v] for v in self.VARS]
            yield [n, lev.h] + [lev.errors[v] for v in self.VARS] + rates

    HEADER = ("level", "h", "err_u", "err_v", "err_pff", "err_ppm", "rate_u", "rate_v", "rate_pff", "rate_ppm")

    def write_csv(self, path) -> None:
        write_csv(path, self.HEADER, self.rows())


def level_errors(h: float, case: MmsCase = MmsCase(), tol: float = 1e-10) -> ConvergenceLevel:
    spec = mms_spec(h, case)
    grid = spec.grid()
    fld, report = solve_coupled(spec, grid, tol=tol)
    ex = sample_exact(grid, case)
    errors = {v: relative_l2_error(getattr(fld, v), getattr(ex, v)) for v in ConvergenceReport.VARS}
    return ConvergenceLevel(h=h, errors=errors, residual=report.residual)


def run_convergence(levels: Sequence[float], tol: float = 1e-10, case: MmsCase = MmsCase(),
                    workers: int = 1, csv_path: Optional[str] = None) -> ConvergenceReport:
    """Solve the benchmark on each grid step and tabulate errors and orders."""
    levels = sorted((float(h) for h in levels), reverse=True)
    if not levels:
        raise ValueError("no levels given")
    for a, b in zip(levels, levels[1:]):
        if abs(a / b - 2.0) > 1e-9:
            raise ValueError("grid steps must halve between consecutive levels")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda h: level_errors(h, case, tol), levels))
    else:
        results = [level_errors(h, case, tol) for h in levels]
    report = ConvergenceReport(levels=results)
    if csv_path is not None:
        report.write_csv(csv_path)
    return report
