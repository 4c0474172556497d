"""Effective coefficients from pore geometry.

* permeability from the periodic unit-cell Stokes problem with body force e1;
* N_tau and M_tau1 from the two boundary-layer problems on the cut-off stripe,
  whose data are jumps of velocity and traction across the interface line.

All problems use the MAC discretisation on a fluid mask (cells marked solid
carry no pressure, faces touching a solid cell carry zero velocity). The
interface is a grid line; jumps enter the stencils of the two rows next to it:

    upper row bottom flux  = (u_up - u_low)/h - g/h + J/2
    lower row top flux     = (u_up - u_low)/h - g/h - J/2

for a velocity jump g = u+ - u- and a traction jump J = sigma+ - sigma-,
which is exact for fields that are linear on each side.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .geometry import (
    BoundaryLayerStripe,
    FluidMask,
    UnitCellGeometry,
    is_connected,
    rasterise,
)
from .io import write_csv
from .sparse import SolveReport, factorize, solve_factored


class MicroscaleError(ValueError):
    pass


@dataclass
class InterfaceJump:
    """Jump data on the grid line ``line`` (between rows line-1 and line).

    ``g1``/``J1`` are sampled at u-face x positions (x = i h), ``g2``/``J2`` at
    v-face positions (x = (i + 1/2) h). Jumps are upper minus lower values.
    """

    line: int
    g1: np.ndarray
    J1: np.ndarray
    g2: np.ndarray
    J2: np.ndarray


class MaskedStokes:
    """Steady Stokes ``-lap w + grad p = f, div w = 0`` on a fluid mask.

    ``kind="cell"``: periodic in both directions, pressure mean zero over the fluid.
    ``kind="stripe"``: periodic in x; no-slip at the bottom (data allowed),
    w2 = 0 and dw1/dy = 0 at the top; mean pressure zero on the bottom row.
    """

    def __init__(self, mask: FluidMask, kind: str):
        if kind not in ("cell", "stripe"):
            raise ValueError(kind)
        self.mask = mask
        self.kind = kind
        self.h = mask.h
        self.ny, self.nx = mask.shape
        ny, nx = self.ny, self.nx
        fl = mask.fluid
        self.nvrows = ny if kind == "cell" else ny + 1
        self.nu = ny * nx
        self.nv = self.nvrows * nx
        self.np_ = ny * nx
        self.n = self.nu + self.nv + self.np_ + 1
        left = np.roll(fl, 1, axis=1)
        self.u_active = fl & left
        if kind == "cell":
            self.v_active = fl & np.roll(fl, 1, axis=0)
        else:
            va = np.zeros((ny + 1, nx), dtype=bool)
            va[1:ny] = fl[1:] & fl[:-1]
            self.v_active = va
        self._lu = None
        self.A = self._assemble()

    # index helpers
    def iu(self, i, j):
        return (np.asarray(j) % self.ny) * self.nx + np.asarray(i) % self.nx

    def iv(self, i, j):
        j = np.asarray(j)
        if self.kind == "cell":
            j = j % self.ny
        return self.nu + j * self.nx + np.asarray(i) % self.nx

    def ip(self, i, j):
        return self.nu + self.nv + (np.asarray(j) % self.ny) * self.nx + np.asarray(i) % self.nx

    @property
    def ilam(self):
        return self.n - 1

    def _assemble(self):
        ny, nx, h = self.ny, self.nx, self.h
        fl = self.mask.fluid
        ih2 = 1.0 / h**2
        R, C, V = [], [], []

        def add(r, c, v):
            r, c, v = np.broadcast_arrays(np.asarray(r), np.asarray(c), np.asarray(v, dtype=float))
            R.append(r.ravel())
            C.append(c.ravel())
            V.append(v.ravel())

        # ---- u rows
        J, I = np.nonzero(self.u_active)
        r = self.iu(I, J)
        diag = np.full(I.size, 4 * ih2)
        for di in (-1, 1):  # normal neighbours: active or a wall-normal face (u = 0)
            nb_act = self.u_active[J, (I + di) % nx]
            add(r[nb_act], self.iu(I[nb_act] + di, J[nb_act]), -ih2)
        for dj in (-1, 1):  # tangential neighbours
            jn = J + dj
            if self.kind == "cell":
                inside = np.ones(I.size, dtype=bool)
                jw = jn % ny
            else:
                inside = (jn >= 0) & (jn < ny)
                jw = np.clip(jn, 0, ny - 1)
            nb_act = inside & self.u_active[jw, I]
            add(r[nb_act], self.iu(I[nb_act], jw[nb_act]), -ih2)
            both_solid = inside & ~fl[jw, (I - 1) % nx] & ~fl[jw, I]
            diag[both_solid] += ih2  # wall half a cell away: ghost = -u_P
            if self.kind == "stripe":
                if dj == -1:
                    diag[~inside] += ih2  # bottom no-slip, ghost = 2g - u_P
                else:
                    diag[~inside] -= ih2  # top dw1/dy = 0, ghost = u_P
        add(r, r, diag)
        add(r, self.ip(I, J), 1.0 / h)
        add(r, self.ip(I - 1, J), -1.0 / h)
        Ji, Ii = np.nonzero(~self.u_active)
        ri = self.iu(Ii, Ji)
        add(ri, ri, 1.0)

        # ---- v rows
        J, I = np.nonzero(self.v_active)
        r = self.iv(I, J)
        diag = np.full(I.size, 4 * ih2)
        for dj in (-1, 1):
            jn = J + dj
            if self.kind == "cell":
                jn = jn % ny
            nb_act = self.v_active[jn, I]
            add(r[nb_act], self.iv(I[nb_act], jn[nb_act]), -ih2)
        for di in (-1, 1):
            inb = (I + di) % nx
            nb_act = self.v_active[J, inb]
            add(r[nb_act], self.iv(inb[nb_act], J[nb_act]), -ih2)
            both_solid = ~fl[(J - 1) % ny, inb] & ~fl[J % ny, inb]
            diag[both_solid] += ih2
        add(r, r, diag)
        add(r, self.ip(I, J), 1.0 / h)
        add(r, self.ip(I, J - 1), -1.0 / h)
        Ji, Ii = np.nonzero(~self.v_active)
        ri = self.iv(Ii, Ji)
        add(ri, ri, 1.0)

        # ---- continuity (fluid cells) / dummy pressure (solid cells)
        J, I = np.nonzero(fl)
        r = self.ip(I, J)
        for ii, jj, s in ((I + 1, J, 1.0), (I, J, -1.0)):
            act = self.u_active[jj, ii % nx]
            add(r[act], self.iu(ii[act], jj[act]), s / h)
        for ii, jj, s in ((I, J + 1, 1.0), (I, J, -1.0)):
            jw = jj % ny if self.kind == "cell" else jj
            act = self.v_active[jw, ii]
            add(r[act], self.iv(ii[act], jw[act]), s / h)
        Js, Is = np.nonzero(~fl)
        rs = self.ip(Is, Js)
        add(rs, rs, 1.0)

        # ---- pressure normalisation via a Lagrange multiplier
        if self.kind == "cell":
            Jn, In = np.nonzero(fl)
        else:
            In = np.flatnonzero(fl[0])
            Jn = np.zeros_like(In)
        pn = self.ip(In, Jn)
        add(pn, self.ilam, 1.0)
        add(self.ilam, pn, 1.0)
        rows, cols, vals = (np.concatenate(x) for x in (R, C, V))
        A = sp.coo_matrix((vals, (rows, cols)), shape=(self.n, self.n)).tocsr()
        A.sum_duplicates()
        return A

    # ---- right-hand sides ---------------------------------------------------
    def rhs(self, force_u=None, force_v=None, jump: Optional[InterfaceJump] = None,
            bottom_u=None, bottom_v=None) -> np.ndarray:
        """Assemble b for body forces (per u/v face arrays), jump data and bottom velocity."""
        ny, nx, h = self.ny, self.nx, self.h
        b = np.zeros(self.n)
        if force_u is not None:
            fu = np.broadcast_to(force_u, (ny, nx))
            J, I = np.nonzero(self.u_active)
            b[self.iu(I, J)] += fu[J, I]
        if force_v is not None:
            fv = np.broadcast_to(force_v, (self.nvrows, nx))
            J, I = np.nonzero(self.v_active)
            b[self.iv(I, J)] += fv[J, I]
        if self.kind == "stripe" and bottom_u is not None:
            act = self.u_active[0]
            I = np.flatnonzero(act)
            b[self.iu(I, 0)] += 2.0 * np.asarray(bottom_u)[I] / h**2
        if self.kind == "stripe" and bottom_v is not None:
            I = np.arange(nx)
            b[self.iv(I, 0)] = np.asarray(bottom_v)
            # the bottom face enters the continuity of row 0 as a known flux
            fl0 = self.mask.fluid[0]
            b[self.ip(I[fl0], 0)] += np.asarray(bottom_v)[fl0] / h
            act = self.v_active[1]
            b[self.iv(I[act], 1)] += np.asarray(bottom_v)[act] / h**2
        if jump is not None:
            self._add_jump(b, jump)
        return b

    def _add_jump(self, b, jump: InterfaceJump):
        ny, nx, h = self.ny, self.nx, self.h
        m = jump.line
        if self.kind != "stripe" or not 1 <= m <= ny - 1:
            raise MicroscaleError("jump line must be an interior grid line of a stripe")
        I = np.arange(nx)
        if not (self.u_active[m].all() and self.u_active[m - 1].all() and self.v_active[m].all()):
            raise MicroscaleError("rows next to the interface must be entirely fluid")
        g1, J1, g2, J2 = (np.asarray(x, dtype=float) for x in (jump.g1, jump.J1, jump.g2, jump.J2))
        b[self.iu(I, m)] += g1 / h**2 - J1 / (2 * h)
        b[self.iu(I, m - 1)] += -g1 / h**2 - J1 / (2 * h)
        # v on the line is stored as its lower limit; the upper limit is v + g2
        lap_x = np.roll(g2, -1) - 2 * g2 + np.roll(g2, 1)
        b[self.iv(I, m)] += -J2 / h - g2 / h**2 + 0.5 * lap_x / h**2
        b[self.iv(I, m + 1)] += g2 / h**2
        b[self.ip(I, m)] += g2 / h

    # ---- solution -----------------------------------------------------------
    def factor(self):
        if self._lu is None:
            self._lu = factorize(self.A)
        return self._lu

    def solve(self, b, tol: float = 1e-10):
        self.factor()
        x, rep = solve_factored(self._lu, self.A, b, tol=tol)
        u = x[: self.nu].reshape(self.ny, self.nx)
        v = x[self.nu: self.nu + self.nv].reshape(self.nvrows, self.nx)
        p = x[self.nu + self.nv: self.nu + self.nv + self.np_].reshape(self.ny, self.nx)
        return u, v, p, rep

    def divergence(self, u, v, jump: Optional[InterfaceJump] = None) -> np.ndarray:
        """Discrete divergence per fluid cell (upper interface limit used above the line)."""
        h = self.h
        vv = v.copy() if self.kind == "stripe" else np.vstack([v, v[:1]])
        dv_top = vv[1:]
        dv_bot = vv[:-1].copy()
        if jump is not None:
            dv_bot[jump.line] += jump.g2
        div = (np.roll(u, -1, axis=1) - u + dv_top - dv_bot) / h
        return np.where(self.mask.fluid, div, 0.0)


# ---------------------------------------------------------------------------
# unit-cell problem
# ---------------------------------------------------------------------------

@dataclass
class CellSolution:
    geometry: UnitCellGeometry
    h: float
    w1: np.ndarray
    w2: np.ndarray
    pi: np.ndarray
    k_tilde: float
    max_divergence: float
    report: SolveReport
    k_tilde_richardson: Optional[float] = None
    richardson_order: Optional[float] = None

    @property
    def approximate(self) -> bool:
        return self.geometry.approximate


def _cell_solve(geom: UnitCellGeometry, h: float, direction: int, tol: float) -> CellSolution:
    mask = rasterise(geom, h)
    if mask.fluid.all():
        raise MicroscaleError(
            "cell has no solid inclusion: with constant forcing the periodic Stokes problem is "
            "incompatible (the force is not orthogonal to the constant velocity kernel)"
        )
    if not is_connected(mask):
        raise MicroscaleError("fluid part of the cell is not connected")
    ms = MaskedStokes(mask, "cell")
    fu, fv = (1.0, None) if direction == 0 else (None, 1.0)
    b = ms.rhs(force_u=fu, force_v=fv)
    u, v, p, rep = ms.solve(b, tol=tol)
    k = float((u if direction == 0 else v).sum() * h * h)
    div = float(np.abs(ms.divergence(u, v)).max())
    return CellSolution(geometry=geom, h=h, w1=u, w2=v, pi=p, k_tilde=k, max_divergence=div, report=rep)


def richardson(k_h: float, k_2h: float, k_4h: float):
    """Extrapolated value and observed order from three levels (None if not monotone)."""
    d1, d2 = k_2h - k_h, k_4h - k_2h
    if d1 == 0:
        return k_h, math.inf
    ratio = d2 / d1
    if not ratio > 1:
        return None, None
    p = math.log2(ratio)
    return k_h + (k_h - k_2h) / (2**p - 1), p


def solve_cell(geom: UnitCellGeometry, h: float, direction: int = 0, tol: float = 1e-10,
               extrapolate: bool = True) -> CellSolution:
    """Solve the periodic cell problem; ``k_tilde`` is the integral of the velocity.

    ``direction`` selects the forcing e1 (0) or e2 (1). With ``extrapolate``
    the problem is also solved at 2h and 4h and a Richardson value attached.
    """
    sol = _cell_solve(geom, h, direction, tol)
    if extrapolate:
        n = round(1 / h)
        if n % 4 == 0 and n // 4 >= 4:
            k2 = _cell_solve(geom, 2 * h, direction, tol).k_tilde
            k4 = _cell_solve(geom, 4 * h, direction, tol).k_tilde
            sol.k_tilde_richardson, sol.richardson_order = richardson(sol.k_tilde, k2, k4)
    return sol


def write_cell_csv(path, sol: CellSolution) -> None:
    kr = math.nan if sol.k_tilde_richardson is None else sol.k_tilde_richardson
    write_csv(path, ("shape", "d", "h", "k_tilde", "k_tilde_richardson", "geometry_approximate"),
              [(sol.geometry.shape, float(sol.geometry.d), float(sol.h), sol.k_tilde, kr, sol.approximate)])


# ---------------------------------------------------------------------------
# boundary-layer problems
# ---------------------------------------------------------------------------

@dataclass
class BoundaryLayerSolution:
    """Stripe solution. ``top_velocity`` measures the oscillating part left at the top row."""
    stripe: BoundaryLayerStripe
    h: float
    u: np.ndarray
    v: np.ndarray
    p: np.ndarray
    constant: float
    lower_limit: float
    top_velocity: float
    max_velocity: float
    max_divergence: float
    report: SolveReport
    far_field: float = 0.0

    @property
    def decay_ratio(self) -> float:
        return self.top_velocity / self.max_velocity if self.max_velocity > 0 else 0.0


class StripeSolver:
    """Factorised stripe operator, reusable for any interface position on the same mask."""

    def __init__(self, base: UnitCellGeometry, h: float, l: int = 4):
        # the mask does not depend on a; any admissible a builds the same stripe
        stripe = BoundaryLayerStripe(base=base, a=1.0, l=l)
        self.base, self.h, self.l = base, h, l
        self.mask = rasterise(stripe, h)
        self.ops = MaskedStokes(self.mask, "stripe")

    def line_index(self, stripe: BoundaryLayerStripe) -> int:
        if stripe.base != self.base or stripe.l != self.l:
            raise MicroscaleError("stripe geometry does not match the factorised solver")
        pos = (stripe.interface_height + self.l) / self.h
        m = int(round(pos))
        if abs(pos - m) > 1e-8:
            raise MicroscaleError(
                f"interface line y={stripe.interface_height:g} is not aligned with a grid line of step h={self.h:g}"
            )
        if not 1 <= m <= self.ops.ny - 1:
            raise MicroscaleError("interface line outside the stripe interior")
        return m

    def _finish(self, stripe, jump, b, tol):
        ms = self.ops
        u, v, p, rep = ms.solve(b, tol=tol)
        m, h = jump.line, self.h
        lower = (u[m] + u[m - 1] - jump.g1) / 2 - jump.J1 * h / 4
        upper = lower + jump.g1
        # the far field tends to a constant horizontal flow; what decays is the
        # oscillation around it
        far = float(u[-1].mean())
        top = float(max(np.abs(u[-1] - far).max(), np.abs(v[-2]).max()))
        vmax = float(max(np.abs(u - far).max(), np.abs(v).max()))
        div = float(np.abs(ms.divergence(u, v, jump)).max())
        return BoundaryLayerSolution(
            stripe=stripe, h=h, u=u, v=v, p=p,
            constant=float(upper.sum() * h), lower_limit=float(lower.sum() * h),
            top_velocity=top, max_velocity=vmax, max_divergence=div, report=rep, far_field=far,
        )

    def t_problem(self, stripe: BoundaryLayerStripe, tol: float = 1e-10) -> BoundaryLayerSolution:
        m = self.line_index(stripe)
        nx = self.ops.nx
        z = np.zeros(nx)
        jump = InterfaceJump(line=m, g1=z, J1=np.ones(nx), g2=z, J2=z)
        return self._finish(stripe, jump, self.ops.rhs(jump=jump), tol)

    def beta_jump(self, stripe: BoundaryLayerStripe, cell: Optional[CellSolution]) -> InterfaceJump:
        """Jump data -w and -(grad w - pi I) e2 sampled from the periodic cell solution."""
        m = self.line_index(stripe)
        nx = self.ops.nx
        if cell is None:
            z = np.zeros(nx)
            return InterfaceJump(line=m, g1=z, J1=z, g2=z, J2=z)
        if stripe.a >= 1.0 - stripe.d:
            raise MicroscaleError(
                "interface offset a must stay below 1 - d: above that the line cuts the "
                "periodic continuation of the inclusions, where the cell data vanish"
            )
        n = cell.w1.shape[0]
        if cell.w1.shape[1] != nx or abs(cell.h - self.h) > 1e-12:
            raise MicroscaleError("cell solution must be computed on the stripe grid step")
        # the line y = y_I sits on cell grid line mc (periodic extension)
        mc = m % n  # the stripe origin -l is an integer, so lines coincide modulo n
        above, below = mc % n, (mc - 1) % n
        h = self.h
        w1 = 0.5 * (cell.w1[above] + cell.w1[below])
        dw1 = (cell.w1[above] - cell.w1[below]) / h
        w2 = cell.w2[mc % n]
        dw2 = (cell.w2[(mc + 1) % n] - cell.w2[(mc - 1) % n]) / (2 * h)
        pi = 0.5 * (cell.pi[above] + cell.pi[below])
        return InterfaceJump(line=m, g1=-w1, J1=-dw1, g2=-w2, J2=-(dw2 - pi))

    def beta_problem(self, stripe: BoundaryLayerStripe, cell: Optional[CellSolution],
                     tol: float = 1e-10) -> BoundaryLayerSolution:
        jump = self.beta_jump(stripe, cell)
        return self._finish(stripe, jump, self.ops.rhs(jump=jump), tol)


def solve_bl_t(stripe: BoundaryLayerStripe, h: float, tol: float = 1e-10) -> BoundaryLayerSolution:
    """Traction-jump problem; ``constant`` is N_tau (velocity is continuous across the line)."""
    return StripeSolver(stripe.base, h, stripe.l).t_problem(stripe, tol)


def solve_bl_beta(stripe: BoundaryLayerStripe, cell: Optional[CellSolution], h: float,
                  tol: float = 1e-10) -> BoundaryLayerSolution:
    """Velocity/traction-jump problem driven by the cell solution; ``constant`` is M_tau1.

    The constant is the integral of the free-fluid-side limit; ``lower_limit``
    holds the porous-side value. ``cell=None`` injects zero jump data.
    """
    return StripeSolver(stripe.base, h, stripe.l).beta_problem(stripe, cell, tol)


# ---------------------------------------------------------------------------
# interface sweep
# ---------------------------------------------------------------------------

@dataclass
class SweepRow:
    a: float
    N_tau: float
    M_tau1: float

    @property
    def R(self) -> float:
        return self.M_tau1 / (2.0 * self.N_tau)


@dataclass
class SweepTable:
    geometry: UnitCellGeometry
    h: float
    l: int
    k_tilde: float
    rows: List[SweepRow] = field(default_factory=list)

    @property
    def monotone(self) -> Optional[bool]:
        """R strictly increasing in a (None for fewer than two rows)."""
        if len(self.rows) < 2:
            return None
        R = [r.R for r in self.rows]
        return all(b > a for a, b in zip(R, R[1:]))

    def write_csv(self, path) -> None:
        write_csv(path, ("a", "N_tau", "M_tau1", "R"),
                  [(r.a, r.N_tau, r.M_tau1, r.R) for r in self.rows])


def sweep_interface(geom: UnitCellGeometry, a_list: Sequence[float], h: float, l: int = 4,
                    tol: float = 1e-10, cell: Optional[CellSolution] = None,
                    workers: int = 1) -> SweepTable:
    """Boundary-layer constants and R = M_tau1/(2 N_tau) for each interface offset.

    All offsets share one factorisation; with ``workers > 1`` the right-hand
    sides are solved on a thread pool (rows stay in input order).
    """
    a_list = [float(a) for a in a_list]
    if not a_list:
        raise ValueError("empty interface list")
    if any(b <= a for a, b in zip(a_list, a_list[1:])):
        raise ValueError("interface offsets must be strictly increasing")
    if cell is None:
        cell = solve_cell(geom, h, extrapolate=False, tol=tol)
    solver = StripeSolver(geom, h, l)
    stripes = [BoundaryLayerStripe(base=geom, a=a, l=l) for a in a_list]
    solver.ops.factor()

    def one(st):
        t = solver.t_problem(st, tol)
        beta = solver.beta_problem(st, cell, tol)
        return SweepRow(a=st.a, N_tau=t.constant, M_tau1=beta.constant)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, stripes))
    else:
        rows = [one(st) for st in stripes]
    return SweepTable(geometry=geom, h=h, l=l, k_tilde=cell.k_tilde, rows=rows)


def admissible_offsets(geom: UnitCellGeometry, h: float, count: int, a_max: float = 0.4) -> List[float]:
    """``count`` grid-aligned offsets between a = h and ``a_max``, roughly equidistant.

    Offsets stay below 1 - d, where the line would enter the next inclusion
    of the periodic continuation.
    """
    a_max = min(a_max, 1.0 - geom.d - h)
    steps = int(math.floor(a_max / h + 1e-9))
    if steps < count:
        raise MicroscaleError("not enough grid lines for the requested number of offsets")
    idx = np.unique(np.round(np.linspace(1, steps, count)).astype(int))
    return [float(i * h) for i in idx]
