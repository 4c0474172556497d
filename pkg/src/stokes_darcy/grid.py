"""Staggered (MAC) grid for the coupled free-flow / porous-medium domain.

Layout, with ``nx`` columns, ``ny_ff`` free-flow rows and ``ny_pm`` porous rows
(row index ``j`` counts upwards from the bottom of each subdomain)::

    u[j, i]     x = x0 + i*h,        y = y_gamma + (j + 1/2)*h   (ny_ff, nx + 1)
    v[j, i]     x = x0 + (i + 1/2)*h, y = y_gamma + j*h          (ny_ff + 1, nx)
    p_ff[j, i]  x = x0 + (i + 1/2)*h, y = y_gamma + (j + 1/2)*h  (ny_ff, nx)
    p_pm[j, i]  x = x0 + (i + 1/2)*h, y = y0_pm + (j + 1/2)*h    (ny_pm, nx)

``v[0, :]`` lives on the interface and is shared by both subdomains. Ghost
values (one layer outside each boundary that needs one) are extra unknowns
appended after the physical ones; each carries its own boundary-condition row.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

VARIABLES = ("u", "v", "p_ff", "p_pm")

# ghost block name -> (variable it extends, description)
GHOST_BLOCKS = (
    "u_bot",  # u below the interface, interior faces i = 1..nx-1
    "u_top",  # u above the top wall, interior faces i = 1..nx-1
    "v_left",  # v left of x0, rows j = 1..ny_ff-1
    "v_right",
    "pm_left",  # p_pm left of x0, rows j = 0..ny_pm-1
    "pm_right",
    "pm_bot",  # p_pm below the bottom, columns i = 0..nx-1
    "pm_top",  # p_pm above the interface, columns i = 0..nx-1
)


class GridError(ValueError):
    """Raised for non-conforming rectangles or a step that does not divide them."""


@dataclass(frozen=True)
class Rect:
    x0: float
    x1: float
    y0: float
    y1: float

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0


def _count(length: float, h: float, what: str) -> int:
    n = length / h
    m = int(round(n))
    if m < 1 or abs(n - m) > 1e-9 * max(1.0, n):
        raise GridError(f"grid step h={h!r} does not divide the {what} ({length!r})")
    return m


@dataclass(frozen=True)
class MacGrid:
    ff: Rect
    pm: Rect
    h: float
    nx: int
    ny_ff: int
    ny_pm: int
    offsets: Dict[str, int] = field(repr=False, compare=False)
    sizes: Dict[str, int] = field(repr=False, compare=False)

    # -- geometry ---------------------------------------------------------
    @property
    def x0(self) -> float:
        return self.ff.x0

    @property
    def y_gamma(self) -> float:
        return self.ff.y0

    @property
    def shapes(self) -> Dict[str, Tuple[int, int]]:
        return {
            "u": (self.ny_ff, self.nx + 1),
            "v": (self.ny_ff + 1, self.nx),
            "p_ff": (self.ny_ff, self.nx),
            "p_pm": (self.ny_pm, self.nx),
        }

    @property
    def n_unknowns(self) -> int:
        return sum(self.sizes.values())

    @property
    def n_physical(self) -> int:
        return sum(self.sizes[v] for v in VARIABLES)

    @property
    def n_interface_faces(self) -> int:
        return self.nx

    @property
    def interface_faces(self) -> np.ndarray:
        """Global indices of the v-unknowns on the interface, left to right."""
        return self.offsets["v"] + np.arange(self.nx)

    # -- index maps -------------------------------------------------------
    def index(self, var: str, i, j):
        """Global index of ``var`` at column ``i``, row ``j`` (vectorised)."""
        ny, nxv = self.shapes[var]
        i = np.asarray(i)
        j = np.asarray(j)
        if np.any((i < 0) | (i >= nxv) | (j < 0) | (j >= ny)):
            raise IndexError(f"{var} index out of range")
        return self.offsets[var] + j * nxv + i

    def ghost_index(self, block: str, k):
        k = np.asarray(k)
        if np.any((k < 0) | (k >= self.sizes[block])):
            raise IndexError(f"ghost {block} index out of range")
        return self.offsets[block] + k

    def locate(self, gidx: int) -> Tuple[str, int, int]:
        """Inverse of :meth:`index` / :meth:`ghost_index`: (block, i, j)."""
        for name, off in self.offsets.items():
            if off <= gidx < off + self.sizes[name]:
                local = gidx - off
                if name in self.shapes:
                    nxv = self.shapes[name][1]
                    return name, local % nxv, local // nxv
                return name, local, 0
        raise IndexError(gidx)

    def coords(self, var: str) -> Tuple[np.ndarray, np.ndarray]:
        """Meshgrid-style (X, Y) arrays of the sample positions of ``var``."""
        h, x0, yg = self.h, self.x0, self.y_gamma
        ny, nxv = self.shapes[var]
        i = np.arange(nxv)
        j = np.arange(ny)
        if var == "u":
            x, y = x0 + i * h, yg + (j + 0.5) * h
        elif var == "v":
            x, y = x0 + (i + 0.5) * h, yg + j * h
        elif var == "p_ff":
            x, y = x0 + (i + 0.5) * h, yg + (j + 0.5) * h
        elif var == "p_pm":
            x, y = x0 + (i + 0.5) * h, self.pm.y0 + (j + 0.5) * h
        else:
            raise KeyError(var)
        return np.meshgrid(x, y)

    def ghost_coords(self, block: str) -> Tuple[np.ndarray, np.ndarray]:
        h, x0, x1 = self.h, self.ff.x0, self.ff.x1
        yg, ytop, ybot = self.y_gamma, self.ff.y1, self.pm.y0
        if block in ("u_bot", "u_top"):
            x = x0 + np.arange(1, self.nx) * h
            y = np.full_like(x, yg - 0.5 * h if block == "u_bot" else ytop + 0.5 * h)
        elif block in ("v_left", "v_right"):
            y = yg + np.arange(1, self.ny_ff) * h
            x = np.full_like(y, x0 - 0.5 * h if block == "v_left" else x1 + 0.5 * h)
        elif block in ("pm_left", "pm_right"):
            y = ybot + (np.arange(self.ny_pm) + 0.5) * h
            x = np.full_like(y, x0 - 0.5 * h if block == "pm_left" else x1 + 0.5 * h)
        elif block in ("pm_bot", "pm_top"):
            x = x0 + (np.arange(self.nx) + 0.5) * h
            y = np.full_like(x, ybot - 0.5 * h if block == "pm_bot" else yg + 0.5 * h)
        else:
            raise KeyError(block)
        return x, y

    # -- field packing ----------------------------------------------------
    def pack(self, fld: "CoupledField") -> np.ndarray:
        x = np.zeros(self.n_unknowns)
        for var in VARIABLES:
            arr = np.asarray(getattr(fld, var), dtype=float)
            if arr.shape != self.shapes[var]:
                raise ValueError(f"{var} has shape {arr.shape}, grid expects {self.shapes[var]}")
            x[self.offsets[var]: self.offsets[var] + arr.size] = arr.ravel()
        for block in GHOST_BLOCKS:
            vals = fld.ghosts.get(block)
            if vals is not None:
                vals = np.asarray(vals, dtype=float)
                if vals.shape != (self.sizes[block],):
                    raise ValueError(f"ghost block {block} has wrong length")
                x[self.offsets[block]: self.offsets[block] + vals.size] = vals
        return x

    def unpack(self, x: np.ndarray) -> "CoupledField":
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_unknowns,):
            raise ValueError(f"vector of length {x.shape} does not match grid ({self.n_unknowns})")
        parts = {}
        for var in VARIABLES:
            off = self.offsets[var]
            parts[var] = x[off: off + self.sizes[var]].reshape(self.shapes[var]).copy()
        ghosts = {b: x[self.offsets[b]: self.offsets[b] + self.sizes[b]].copy() for b in GHOST_BLOCKS}
        return CoupledField(ghosts=ghosts, **parts)

    def zeros(self) -> "CoupledField":
        return self.unpack(np.zeros(self.n_unknowns))


def build_grid(ff_rect, pm_rect, h: float) -> MacGrid:
    """Build the conforming MAC grid for a free-flow box stacked on a porous box.

    Both rectangles are ``(x0, x1, y0, y1)`` tuples or :class:`Rect`. The
    free-flow box must sit directly on top of the porous box with identical
    horizontal extent, and ``h`` must divide every side.
    """
    ff = ff_rect if isinstance(ff_rect, Rect) else Rect(*map(float, ff_rect))
    pm = pm_rect if isinstance(pm_rect, Rect) else Rect(*map(float, pm_rect))
    if h <= 0:
        raise GridError("grid step must be positive")
    for name, r in (("free-flow", ff), ("porous", pm)):
        if r.width <= 0 or r.height <= 0:
            raise GridError(f"{name} rectangle is empty")
    tol = 1e-12 * max(1.0, abs(ff.x1), abs(ff.y1), abs(pm.y0))
    if abs(ff.x0 - pm.x0) > tol or abs(ff.x1 - pm.x1) > tol:
        raise GridError("rectangles must share the full interface: x-extents differ")
    if abs(ff.y0 - pm.y1) > tol:
        raise GridError("free-flow box must sit on top of the porous box (ff.y0 == pm.y1)")
    nx = _count(ff.width, h, "interface length")
    ny_ff = _count(ff.height, h, "free-flow height")
    ny_pm = _count(pm.height, h, "porous-medium height")

    sizes = {
        "u": ny_ff * (nx + 1),
        "v": (ny_ff + 1) * nx,
        "p_ff": ny_ff * nx,
        "p_pm": ny_pm * nx,
        "u_bot": nx - 1,
        "u_top": nx - 1,
        "v_left": ny_ff - 1,
        "v_right": ny_ff - 1,
        "pm_left": ny_pm,
        "pm_right": ny_pm,
        "pm_bot": nx,
        "pm_top": nx,
    }
    offsets, acc = {}, 0
    for name in VARIABLES + GHOST_BLOCKS:
        offsets[name] = acc
        acc += sizes[name]
    return MacGrid(ff=ff, pm=pm, h=float(h), nx=nx, ny_ff=ny_ff, ny_pm=ny_pm, offsets=offsets, sizes=sizes)


@dataclass
class CoupledField:
    """Discrete unknowns on a :class:`MacGrid` (arrays indexed ``[j, i]``)."""

    u: np.ndarray
    v: np.ndarray
    p_ff: np.ndarray
    p_pm: np.ndarray
    ghosts: Dict[str, np.ndarray] = field(default_factory=dict)

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(getattr(self, v))) for v in VARIABLES)


class ZeroNormError(ZeroDivisionError):
    """The reference field of a relative error has zero norm."""


def relative_l2_error(numeric, exact) -> float:
    """sqrt(sum((f - f_h)^2) / sum(f^2)) over samples of one staggered layout.

    On a uniform grid every sample carries the same midpoint-rule weight, so
    the weights cancel in the ratio.
    """
    numeric = np.asarray(numeric, dtype=float)
    exact = np.asarray(exact, dtype=float)
    if numeric.shape != exact.shape:
        raise ValueError(f"layout mismatch: {numeric.shape} vs {exact.shape}")
    denom = float(np.sum(exact**2))
    if denom == 0.0:
        raise ZeroNormError("exact field has zero L2 norm")
    return float(np.sqrt(np.sum((exact - numeric) ** 2) / denom))


@dataclass(frozen=True)
class DiscreteNorms:
    h: float
    errors: Dict[str, float]

    def __post_init__(self):
        if any(e < 0 for e in self.errors.values()):
            raise ValueError("errors must be non-negative")


def dump_field(grid: MacGrid, fld: CoupledField, path) -> None:
    """Write one ``variable,i,j,x,y,value`` record per physical unknown."""
    from .io import atomic_write_text

    lines = ["variable,i,j,x,y,value"]
    for var in VARIABLES:
        X, Y = grid.coords(var)
        arr = getattr(fld, var)
        ny, nxv = arr.shape
        for j in range(ny):
            for i in range(nxv):
                lines.append(f"{var},{i},{j},{X[j, i]:.12e},{Y[j, i]:.12e},{arr[j, i]:.12e}")
    atomic_write_text(path, "\n".join(lines) + "\n")
