"""Monolithic staggered finite-volume solver for the coupled Stokes-Darcy problem.

Free flow (non-symmetric stress T = grad v - p I, so -div T = -lap v + grad p)::

    -lap v + grad p_ff = f,   div v = g_ff          in the free-flow box
    -div(k grad p_pm)   = g_pm                       in the porous box

Interface conditions on the horizontal line Gamma with n = -e2, tau = e1
(so tau.T.n = -du/dy and n.T.n = dv/dy - p_ff)::

    v_ff . n   = v_pm . n        ->  v_gamma = -k dp_pm/dy
    p_pm       = p_ff - dv/dy + N_s du/dy
    u_gamma    = A du/dy + B dp_pm/dx + C dp_pm/dy

with (A, B, C) = (-eps N_tau, eps^2 M1, eps^2 M2) for the generalised
conditions and (sqrt(k)/alpha_BJ, -k, 0) for classical Beavers-Joseph.

Every boundary or interface condition is written as its own equation for a
ghost unknown one half-cell outside the boundary, so each row of the system
is a pointwise second-order approximation of either a PDE or a boundary
condition. Eliminating the ghosts gives the classical compact stencils; the
solution is the same either way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .grid import CoupledField, GridError, MacGrid, Rect, build_grid
from .sparse import SparseSystem, solve


class InvariantError(ValueError):
    """A problem description violates a model invariant."""


@dataclass(frozen=True)
class InterfaceCoefficients:
    """Boundary-layer constants entering the interface conditions.

    ``mode`` is ``"generalised"`` or ``"classical_bj"``; in the classical mode
    only ``alpha_bj`` is used for the tangential condition.
    """

    eps: float
    N_tau: float
    M_tau1: float
    N_s: float = 0.0
    M_tau2: float = 0.0
    mode: str = "generalised"
    alpha_bj: Optional[float] = None
    isotropic: bool = True

    def __post_init__(self):
        if not self.eps > 0:
            raise InvariantError("scale separation eps must be positive")
        if self.mode == "generalised":
            if not self.N_tau < 0:
                raise InvariantError("generalised conditions require N_tau < 0")
            if not self.M_tau1 < 0:
                raise InvariantError("generalised conditions require M_tau1 < 0")
        elif self.mode == "classical_bj":
            if self.alpha_bj is None or not self.alpha_bj > 0:
                raise InvariantError("classical Beavers-Joseph mode requires alpha_bj > 0")
        else:
            raise InvariantError(f"unknown coupling mode {self.mode!r}")
        if self.isotropic and (self.N_s != 0.0 or self.M_tau2 != 0.0):
            raise InvariantError("isotropic medium requires N_s = 0 and M_tau2 = 0")

    def tangential(self, k: float) -> Tuple[float, float, float]:
        """(A, B, C) in u_gamma = A du/dy + B dp_pm/dx + C dp_pm/dy."""
        if self.mode == "classical_bj":
            return math.sqrt(k) / self.alpha_bj, -k, 0.0
        return -self.eps * self.N_tau, self.eps**2 * self.M_tau1, self.eps**2 * self.M_tau2


@dataclass(frozen=True)
class PorousMediumParams:
    """Isotropic intrinsic permeability K = k I."""

    k: float

    def __post_init__(self):
        if not self.k > 0:
            raise InvariantError("permeability must be positive")

    def k_tilde(self, eps: float) -> float:
        return self.k / eps**2

    @classmethod
    def from_k_tilde(cls, k_tilde: float, eps: float) -> "PorousMediumParams":
        return cls(k=eps**2 * k_tilde)


Field2 = Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]
Scalar = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _zero(x, y):
    return np.zeros(np.broadcast(x, y).shape)


def _zero2(x, y):
    z = _zero(x, y)
    return z, z


PM_SIDES = ("left", "right", "bottom")


@dataclass
class ProblemSpec:
    """Everything needed to assemble one coupled problem.

    ``pm_dirichlet`` lists ``(side, lo, hi)`` segments of the porous boundary
    (side in left/right/bottom, ``lo..hi`` along that side) carrying pressure
    data; every other external porous face is a flux (Neumann) face.
    Callables take and return numpy arrays.
    """

    ff_rect: Rect
    pm_rect: Rect
    h: float
    coefficients: InterfaceCoefficients
    medium: PorousMediumParams
    ff_velocity: Field2 = _zero2
    pm_dirichlet: Sequence[Tuple[str, float, float]] = (("bottom", -math.inf, math.inf),)
    pm_pressure: Scalar = _zero
    pm_flux: Scalar = _zero
    force: Field2 = _zero2
    mass_ff: Scalar = _zero
    mass_pm: Scalar = _zero

    def __post_init__(self):
        if not self.pm_dirichlet:
            raise InvariantError(
                "the Darcy boundary conditions require a non-empty pressure (Dirichlet) part "
                "Gamma_pm^D of the porous boundary; without it the pressure in both "
                "subdomains is determined only up to a constant"
            )
        for seg in self.pm_dirichlet:
            if seg[0] not in PM_SIDES:
                raise InvariantError(f"unknown porous boundary side {seg[0]!r}")

    def grid(self) -> MacGrid:
        return build_grid(self.ff_rect, self.pm_rect, self.h)


def pm_face_kinds(spec: ProblemSpec, grid: MacGrid) -> dict:
    """Boolean Dirichlet masks for the left/right/bottom porous boundary faces."""
    ny, nx, h = grid.ny_pm, grid.nx, grid.h
    along = {
        "left": grid.pm.y0 + (np.arange(ny) + 0.5) * h,
        "right": grid.pm.y0 + (np.arange(ny) + 0.5) * h,
        "bottom": grid.pm.x0 + (np.arange(nx) + 0.5) * h,
    }
    masks = {s: np.zeros(along[s].size, dtype=bool) for s in PM_SIDES}
    for side, lo, hi in spec.pm_dirichlet:
        masks[side] |= (along[side] >= lo) & (along[side] <= hi)
    if not any(m.any() for m in masks.values()):
        raise InvariantError(
            "no porous boundary face falls inside the Dirichlet segments; the pressure "
            "boundary must be non-empty"
        )
    return masks


@dataclass
class _Stencil:
    n: int
    rows: list = field(default_factory=list)
    cols: list = field(default_factory=list)
    vals: list = field(default_factory=list)

    def add(self, r, c, v):
        r, c, v = np.broadcast_arrays(np.asarray(r), np.asarray(c), np.asarray(v, dtype=float))
        self.rows.append(r.ravel())
        self.cols.append(c.ravel())
        self.vals.append(v.ravel())


def _build(spec: ProblemSpec, grid: MacGrid):
    """Return (rows, cols, vals, rhs) of the coupled system."""
    h, nx, nyf, nyp = grid.h, grid.nx, grid.ny_ff, grid.ny_pm
    if nyf < 2:
        raise GridError("free-flow box needs at least two cell rows")
    k = spec.medium.k
    coef = spec.coefficients
    A_t, B_t, C_t = coef.tangential(k)
    N_s = coef.N_s
    n = grid.n_unknowns
    st = _Stencil(n)
    rhs = np.zeros(n)
    U = lambda i, j: grid.index("u", i, j)  # noqa: E731
    V = lambda i, j: grid.index("v", i, j)  # noqa: E731
    Pf = lambda i, j: grid.index("p_ff", i, j)  # noqa: E731
    Pm = lambda i, j: grid.index("p_pm", i, j)  # noqa: E731
    G = grid.ghost_index
    ih2 = 1.0 / h**2
    x0, x1, yg, ytop = grid.ff.x0, grid.ff.x1, grid.y_gamma, grid.ff.y1

    # --- u: wall faces (strong Dirichlet) --------------------------------
    Xu, Yu = grid.coords("u")
    for i in (0, nx):
        j = np.arange(nyf)
        r = U(i, j)
        st.add(r, r, 1.0)
        rhs[r] = spec.ff_velocity(Xu[j, i], Yu[j, i])[0]

    # --- u: momentum at interior faces -----------------------------------
    I, J = np.meshgrid(np.arange(1, nx), np.arange(nyf))
    r = U(I, J)
    st.add(r, r, 4 * ih2)
    st.add(r, U(I - 1, J), -ih2)
    st.add(r, U(I + 1, J), -ih2)
    north = np.where(J < nyf - 1, U(I, np.minimum(J + 1, nyf - 1)), G("u_top", I - 1))
    south = np.where(J > 0, U(I, np.maximum(J - 1, 0)), G("u_bot", I - 1))
    st.add(r, north, -ih2)
    st.add(r, south, -ih2)
    st.add(r, Pf(I, J), 1.0 / h)
    st.add(r, Pf(I - 1, J), -1.0 / h)
    rhs[r] = spec.force(Xu[J, I], Yu[J, I])[0]

    # --- v: top wall (strong Dirichlet) ----------------------------------
    Xv, Yv = grid.coords("v")
    i = np.arange(nx)
    r = V(i, nyf)
    st.add(r, r, 1.0)
    rhs[r] = spec.ff_velocity(Xv[nyf, i], Yv[nyf, i])[1]

    # --- v: momentum at interior horizontal faces ------------------------
    if nyf > 1:
        I, J = np.meshgrid(np.arange(nx), np.arange(1, nyf))
        r = V(I, J)
        st.add(r, r, 4 * ih2)
        st.add(r, V(I, J + 1), -ih2)
        st.add(r, V(I, J - 1), -ih2)
        east = np.where(I < nx - 1, V(np.minimum(I + 1, nx - 1), J), G("v_right", J - 1))
        west = np.where(I > 0, V(np.maximum(I - 1, 0), J), G("v_left", J - 1))
        st.add(r, east, -ih2)
        st.add(r, west, -ih2)
        st.add(r, Pf(I, J), 1.0 / h)
        st.add(r, Pf(I, J - 1), -1.0 / h)
        rhs[r] = spec.force(Xv[J, I], Yv[J, I])[1]

    # --- v on the interface: normal-stress balance -----------------------
    # p_pm|G - p_ff|G + dv/dy|G - N_s du/dy|G = 0, one-sided second order
    i = np.arange(nx)
    r = V(i, 0)
    st.add(r, Pm(i, nyp - 1), 0.5)
    st.add(r, G("pm_top", i), 0.5)
    st.add(r, Pf(i, 0), -1.5)
    st.add(r, Pf(i, 1), 0.5)
    st.add(r, V(i, 0), -1.5 / h)
    st.add(r, V(i, 1), 2.0 / h)
    st.add(r, V(i, 2), -0.5 / h)
    if N_s != 0.0:
        # du/dy at cell-centre x = mean over the two adjacent u-faces
        for face in (i, i + 1):
            interior = (face > 0) & (face < nx)
            fi = face[interior]
            st.add(r[interior], U(fi, 0), -N_s * 0.5 / h)
            st.add(r[interior], G("u_bot", fi - 1), N_s * 0.5 / h)
            for fw in (0, nx):
                sel = face == fw
                if sel.any():
                    xw = x0 + fw * h
                    g0 = spec.ff_velocity(np.array(xw), np.array(yg))[0]
                    g1 = spec.ff_velocity(np.array(xw), np.array(yg + 0.5 * h))[0]
                    g2 = spec.ff_velocity(np.array(xw), np.array(yg + h))[0]
                    dudy = (-3 * g0 + 4 * g1 - g2) / h
                    rhs[r[sel]] += N_s * 0.5 * dudy

    # --- free-flow continuity --------------------------------------------
    I, J = np.meshgrid(np.arange(nx), np.arange(nyf))
    r = Pf(I, J)
    st.add(r, U(I + 1, J), 1.0 / h)
    st.add(r, U(I, J), -1.0 / h)
    st.add(r, V(I, J + 1), 1.0 / h)
    st.add(r, V(I, J), -1.0 / h)
    Xp, Yp = grid.coords("p_ff")
    rhs[r] = spec.mass_ff(Xp, Yp)

    # --- Darcy -------------------------------------------------------------
    I, J = np.meshgrid(np.arange(nx), np.arange(nyp))
    r = Pm(I, J)
    c = k * ih2
    st.add(r, r, 4 * c)
    st.add(r, np.where(I > 0, Pm(np.maximum(I - 1, 0), J), G("pm_left", J)), -c)
    st.add(r, np.where(I < nx - 1, Pm(np.minimum(I + 1, nx - 1), J), G("pm_right", J)), -c)
    st.add(r, np.where(J > 0, Pm(I, np.maximum(J - 1, 0)), G("pm_bot", I)), -c)
    st.add(r, np.where(J < nyp - 1, Pm(I, np.minimum(J + 1, nyp - 1)), G("pm_top", I)), -c)
    Xm, Ym = grid.coords("p_pm")
    rhs[r] = spec.mass_pm(Xm, Ym)

    # --- ghost rows: tangential interface condition ----------------------
    if nx > 1:
        i = np.arange(1, nx)
        r = G("u_bot", i - 1)
        st.add(r, r, 0.5 + A_t / h)
        st.add(r, U(i, 0), 0.5 - A_t / h)
        # dp_pm/dx and dp_pm/dy at (x_i, Gamma) from the interface pressures
        # (p_C + p_ghost)/2 of the two adjacent columns
        bx = -B_t / (2 * h)
        st.add(r, Pm(i, nyp - 1), bx)
        st.add(r, G("pm_top", i), bx)
        st.add(r, Pm(i - 1, nyp - 1), -bx)
        st.add(r, G("pm_top", i - 1), -bx)
        if C_t != 0.0:
            cy = -C_t / (2 * h)
            for col in (i, i - 1):
                st.add(r, G("pm_top", col), cy)
                st.add(r, Pm(col, nyp - 1), -cy)

        # --- ghost rows: top wall, tangential u ---------------------------
        r = G("u_top", i - 1)
        st.add(r, r, 0.5)
        st.add(r, U(i, nyf - 1), 0.5)
        rhs[r] = spec.ff_velocity(x0 + i * h, np.full(i.size, ytop))[0]

    # --- ghost rows: side walls, tangential v ----------------------------
    if nyf > 1:
        j = np.arange(1, nyf)
        yj = yg + j * h
        for block, col, xw in (("v_left", 0, x0), ("v_right", nx - 1, x1)):
            r = G(block, j - 1)
            st.add(r, r, 0.5)
            st.add(r, V(col, j), 0.5)
            rhs[r] = spec.ff_velocity(np.full(j.size, xw), yj)[1]

    # --- ghost rows: porous boundary --------------------------------------
    masks = pm_face_kinds(spec, grid)
    jj = np.arange(nyp)
    ii = np.arange(nx)
    ym = grid.pm.y0 + (jj + 0.5) * h
    xm = x0 + (ii + 0.5) * h
    faces = {
        "left": ("pm_left", Pm(0, jj), np.full(nyp, x0), ym),
        "right": ("pm_right", Pm(nx - 1, jj), np.full(nyp, x1), ym),
        "bottom": ("pm_bot", Pm(ii, 0), xm, np.full(nx, grid.pm.y0)),
    }
    for side, (block, inner, xf, yf) in faces.items():
        r = G(block, np.arange(inner.size))
        d = masks[side]
        # Dirichlet: (p_C + p_G)/2 = p_D
        st.add(r[d], r[d], 0.5)
        st.add(r[d], inner[d], 0.5)
        rhs[r[d]] = spec.pm_pressure(xf[d], yf[d])
        # Neumann: outward flux -k (p_G - p_C)/h = q
        nd = ~d
        st.add(r[nd], r[nd], -k / h)
        st.add(r[nd], inner[nd], k / h)
        rhs[r[nd]] = spec.pm_flux(xf[nd], yf[nd])

    # --- ghost rows: mass conservation across the interface ---------------
    r = G("pm_top", ii)
    st.add(r, r, -k / h)
    st.add(r, Pm(ii, nyp - 1), k / h)
    st.add(r, V(ii, 0), -1.0)

    rows = np.concatenate(st.rows).astype(np.int64)
    cols = np.concatenate(st.cols).astype(np.int64)
    vals = np.concatenate(st.vals)
    return rows, cols, vals, rhs


def assemble(spec: ProblemSpec, grid: Optional[MacGrid] = None) -> SparseSystem:
    """Assemble the monolithic coupled system (one equation per unknown)."""
    grid = grid or spec.grid()
    rows, cols, vals, rhs = _build(spec, grid)
    system = SparseSystem(grid.n_unknowns)
    system.add(rows, cols, vals)
    system.rhs[:] = rhs
    system.finalize()
    return system


def apply_operator(spec: ProblemSpec, grid: MacGrid, fld: CoupledField) -> np.ndarray:
    """Residual ``b - A x`` evaluated stencil by stencil (no matrix is formed)."""
    x = grid.pack(fld)
    rows, cols, vals, rhs = _build(spec, grid)
    ax = np.zeros(grid.n_unknowns)
    np.add.at(ax, rows, vals * x[cols])
    return rhs - ax


def solve_coupled(spec: ProblemSpec, grid: Optional[MacGrid] = None, tol: float = 1e-10):
    """Assemble and solve; returns ``(CoupledField, SolveReport)``."""
    grid = grid or spec.grid()
    system = assemble(spec, grid)
    x, report = solve(system, tol=tol)
    return grid.unpack(x), report


def interface_flux(grid: MacGrid, fld: CoupledField) -> float:
    """Net volume flux from the porous medium into the free flow through Gamma."""
    return float(np.sum(fld.v[0, :]) * grid.h)


def porous_boundary_outflux(spec: ProblemSpec, grid: MacGrid, fld: CoupledField) -> dict:
    """Outward volume flux through each external porous side, from the ghost values."""
    k = spec.medium.k
    out = {}
    inner = {
        "left": fld.p_pm[:, 0],
        "right": fld.p_pm[:, -1],
        "bottom": fld.p_pm[0, :],
    }
    for side, block in (("left", "pm_left"), ("right", "pm_right"), ("bottom", "pm_bot")):
        out[side] = float(np.sum(-k * (fld.ghosts[block] - inner[side])))  # (flux/h) * h
    return out
