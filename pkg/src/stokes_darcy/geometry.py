"""Pore-scale geometry: unit cells, boundary-layer stripes and their fluid masks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import ndimage

SHAPES = ("circle", "square", "rhombus")
TIE = 1e-12


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class UnitCellGeometry:
    """One solid inclusion centred at (0.5, 0.5) of the unit cell.

    ``d`` is the diameter (circle), side (square) or diagonal (rhombus, a
    square turned by 45 degrees). ``d == 0`` means an empty cell.
    """

    shape: str
    d: float

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise GeometryError(f"unknown inclusion shape {self.shape!r}; expected one of {SHAPES}")
        if not 0.0 <= self.d < 1.0:
            raise GeometryError("inclusion size d must lie in [0, 1)")

    def inside(self, x, y):
        """True where (x, y), taken relative to the cell, lies in the inclusion."""
        dx = np.abs(np.asarray(x) - 0.5)
        dy = np.abs(np.asarray(y) - 0.5)
        # points on the boundary count as fluid; the margin keeps round-off
        # from breaking mirror symmetry at such ties
        r = 0.5 * self.d - TIE
        if self.shape == "circle":
            return dx * dx + dy * dy < r * r
        if self.shape == "square":
            return (dx < r) & (dy < r)
        return dx + dy < r

    @property
    def area(self) -> float:
        if self.shape == "circle":
            return np.pi * self.d**2 / 4
        if self.shape == "square":
            return self.d**2
        return self.d**2 / 2

    @property
    def perimeter(self) -> float:
        if self.shape == "circle":
            return np.pi * self.d
        if self.shape == "square":
            return 4 * self.d
        return 2 * np.sqrt(2) * self.d

    @property
    def approximate(self) -> bool:
        """Stair-step masks only represent circles and rhombi approximately."""
        return self.shape != "square"


def interface_offset(a: float, d: float) -> float:
    """Height of the interface line a distance ``a`` above the top inclusion."""
    return a + (d - 1.0) / 2.0


@dataclass(frozen=True)
class BoundaryLayerStripe:
    """The stripe (0,1) x (-l, l) with ``l`` inclusions below the interface.

    Inclusion k (k = 1..l) is centred at (0.5, 0.5 - k); the interface is the
    line y = a + (d - 1)/2.
    """

    base: UnitCellGeometry
    a: float
    l: int = 4

    def __post_init__(self):
        if int(self.l) != self.l or self.l < 1:
            raise GeometryError("stripe depth l must be a positive integer")
        if not self.a > 0:
            raise GeometryError("interface must lie strictly above the inclusions (a > 0)")
        if not self.interface_height < self.l:
            raise GeometryError("interface lies outside the stripe")

    @property
    def d(self) -> float:
        return self.base.d

    @property
    def interface_height(self) -> float:
        return interface_offset(self.a, self.base.d)

    def inside(self, x, y):
        y = np.asarray(y)
        x = np.asarray(x)
        solid = np.zeros(np.broadcast(x, y).shape, dtype=bool)
        for k in range(1, self.l + 1):
            solid |= self.base.inside(x, y + k)
        return solid


def interface_height(stripe: BoundaryLayerStripe) -> float:
    return stripe.interface_height


@dataclass(frozen=True)
class FluidMask:
    """Cell-wise fluid flags on a uniform grid, ``fluid[j, i]`` with j counting up from ``y0``."""

    fluid: np.ndarray
    h: float
    y0: float = 0.0
    periodic_x: bool = True
    periodic_y: bool = False

    @property
    def shape(self):
        return self.fluid.shape

    @property
    def solid_fraction(self) -> float:
        return float(1.0 - self.fluid.mean())

    @property
    def solid_area(self) -> float:
        return float((~self.fluid).sum() * self.h**2)


def _cells(length: float, h: float, what: str) -> int:
    n = length / h
    m = int(round(n))
    if m < 1 or abs(n - m) > 1e-9 * max(n, 1.0):
        raise GeometryError(f"1/h must be an integer multiple for the {what} (got {what} length {length}, h={h})")
    return m


def rasterise(geom: Union[UnitCellGeometry, BoundaryLayerStripe], h: float) -> FluidMask:
    """Mark a cell solid iff its centre lies inside an inclusion."""
    if h <= 0:
        raise GeometryError("grid step must be positive")
    nx = _cells(1.0, h, "cell width")
    xc = (np.arange(nx) + 0.5) * h
    if isinstance(geom, UnitCellGeometry):
        ny = nx
        yc = (np.arange(ny) + 0.5) * h
        X, Y = np.meshgrid(xc, yc)
        solid = geom.inside(X, Y) if geom.d > 0 else np.zeros(X.shape, dtype=bool)
        return FluidMask(fluid=~solid, h=h, y0=0.0, periodic_x=True, periodic_y=True)
    if isinstance(geom, BoundaryLayerStripe):
        ny = _cells(2.0 * geom.l, h, "stripe height")
        yc = -geom.l + (np.arange(ny) + 0.5) * h
        X, Y = np.meshgrid(xc, yc)
        solid = geom.inside(X, Y) if geom.d > 0 else np.zeros(X.shape, dtype=bool)
        return FluidMask(fluid=~solid, h=h, y0=-float(geom.l), periodic_x=True, periodic_y=False)
    raise TypeError(f"cannot rasterise {type(geom).__name__}")


def is_connected(mask: FluidMask) -> bool:
    """Flood-fill connectivity of the fluid cells, honouring periodic wrap."""
    fluid = mask.fluid
    if not fluid.any():
        return False
    labels, n = ndimage.label(fluid)
    if n <= 1:
        return True
    parent = list(range(n + 1))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union_edges(a_lab, b_lab):
        for p, q in zip(a_lab, b_lab):
            if p and q:
                parent[find(p)] = find(q)

    if mask.periodic_x:
        union_edges(labels[:, 0], labels[:, -1])
    if mask.periodic_y:
        union_edges(labels[0, :], labels[-1, :])
    roots = {find(lab) for lab in range(1, n + 1)}
    return len(roots) == 1
