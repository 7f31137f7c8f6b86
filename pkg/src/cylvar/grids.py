"""Grids, fields and quadrature.

Scalar profiles u(r, z) live on a half-plane grid (cell-centred in r, node-centred
in z) carrying the cylindrical measure 2*pi*r dr dz. Vector fields live on a
Cartesian node grid covering the box [-L, L]^3.
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .parallel import reduce_sum


@dataclass(frozen=True)
class Grid2:
    """Half-plane grid on [0, r_max] x [-z_max, z_max]."""

    nr: int
    nz: int
    r_max: float = 12.0
    z_max: float = 12.0

    def __post_init__(self):
        if int(self.nr) != self.nr or self.nr < 2:
            raise ValueError(f"nr must be an integer >= 2, got {self.nr}")
        if int(self.nz) != self.nz or self.nz < 3:
            raise ValueError(f"nz must be an integer >= 3, got {self.nz}")
        if not (self.r_max > 0 and self.z_max > 0):
            raise ValueError("r_max and z_max must be positive")
        object.__setattr__(self, "nr", int(self.nr))
        object.__setattr__(self, "nz", int(self.nz))
        object.__setattr__(self, "r_max", float(self.r_max))
        object.__setattr__(self, "z_max", float(self.z_max))

    @property
    def dr(self):
        return self.r_max / self.nr

    @property
    def dz(self):
        return 2.0 * self.z_max / (self.nz - 1)

    @property
    def r(self):
        return (np.arange(self.nr) + 0.5) * self.dr

    @property
    def z(self):
        return -self.z_max + np.arange(self.nz) * self.dz

    def mesh(self):
        return np.meshgrid(self.r, self.z, indexing="ij")

    @property
    def weights(self):
        """Quadrature weights 2*pi*r_i*dr*dz, halved on the z end rows."""
        w = np.outer(2.0 * np.pi * self.r * self.dr * self.dz, np.ones(self.nz))
        w[:, 0] *= 0.5
        w[:, -1] *= 0.5
        return w

    def boundary_mask(self):
        mask = np.zeros((self.nr, self.nz), dtype=bool)
        mask[:, 0] = mask[:, -1] = True
        mask[-1, :] = True
        return mask

    def refine(self):
        return Grid2(2 * self.nr, 2 * (self.nz - 1) + 1, self.r_max, self.z_max)

    def describe(self):
        return {"nr": self.nr, "nz": self.nz, "rmax": self.r_max, "zmax": self.z_max}


@dataclass(frozen=True)
class Grid3:
    """Cartesian node grid on [-half_width, half_width]^3 with ``n`` nodes per axis."""

    n: int
    half_width: float = 12.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 5:
            raise ValueError(f"Grid3 needs n >= 5 nodes per axis, got {self.n}")
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "half_width", float(self.half_width))

    @property
    def h(self):
        return 2.0 * self.half_width / (self.n - 1)

    @property
    def x(self):
        return -self.half_width + np.arange(self.n) * self.h

    def mesh(self):
        return np.meshgrid(self.x, self.x, self.x, indexing="ij")

    def refine(self):
        return Grid3(2 * (self.n - 1) + 1, self.half_width)

    def interior(self, layers=1):
        s = slice(layers, self.n - layers)
        return (s, s, s)

    def describe(self):
        return {"n": self.n, "L": self.half_width}


def _frozen(arr):
    arr = np.array(arr, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid2
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.shape != (self.grid.nr, self.grid.nz):
            raise ValueError(f"values shape {vals.shape} does not match grid ({self.grid.nr}, {self.grid.nz})")
        if not np.all(np.isfinite(vals)):
            i, j = np.argwhere(~np.isfinite(vals))[0]
            raise ValueError(f"non-finite value at r={self.grid.r[i]!r}, z={self.grid.z[j]!r}")
        object.__setattr__(self, "values", vals)

    def boundary_max(self):
        return float(np.max(np.abs(self.values[self.grid.boundary_mask()])))

    def with_values(self, values):
        return ScalarField(self.grid, values)

    def __neg__(self):
        return ScalarField(self.grid, -self.values)


@dataclass(frozen=True, eq=False)
class VectorField3:
    grid: Grid3
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = _frozen(self.values)
        n = self.grid.n
        if vals.shape != (n, n, n, 3):
            raise ValueError(f"values shape {vals.shape} does not match grid ({n}, {n}, {n}, 3)")
        if not np.all(np.isfinite(vals)):
            raise ValueError("vector field has non-finite entries")
        object.__setattr__(self, "values", vals)

    def boundary_max(self):
        v = np.abs(self.values)
        return float(max(v[0].max(), v[-1].max(), v[:, 0].max(), v[:, -1].max(), v[:, :, 0].max(), v[:, :, -1].max()))

    def __add__(self, other):
        return VectorField3(self.grid, self.values + other.values)

    def __sub__(self, other):
        return VectorField3(self.grid, self.values - other.values)


def zero_boundary3(values):
    out = np.array(values, dtype=float, copy=True)
    out[0] = out[-1] = 0.0
    out[:, 0] = out[:, -1] = 0.0
    out[:, :, 0] = out[:, :, -1] = 0.0
    return out


def sample_scalar(expr, grid, force_boundary=True):
    """Sample ``expr(r, z)`` on ``grid``; the boundary ring is set to zero unless disabled."""
    R, Z = grid.mesh()
    vals = np.broadcast_to(np.asarray(expr(R, Z), dtype=float), R.shape).copy()
    bad = ~np.isfinite(vals)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise ValueError(f"expression is not finite at (r, z) = ({R[i, j]!r}, {Z[i, j]!r})")
    if force_boundary:
        vals[grid.boundary_mask()] = 0.0
    return ScalarField(grid, vals)


def sample_vector(expr, grid, force_boundary=True):
    """Sample ``expr(x1, x2, x3) -> (U1, U2, U3)`` on the box grid."""
    X1, X2, X3 = grid.mesh()
    comps = expr(X1, X2, X3)
    vals = np.stack([np.broadcast_to(np.asarray(c, dtype=float), X1.shape) for c in comps], axis=-1)
    if not np.all(np.isfinite(vals)):
        idx = tuple(np.argwhere(~np.isfinite(vals))[0][:3])
        raise ValueError(f"expression is not finite at x = ({X1[idx]!r}, {X2[idx]!r}, {X3[idx]!r})")
    if force_boundary:
        vals = zero_boundary3(vals)
    return VectorField3(grid, vals)


def integrate2(values, grid):
    """Cylindrical quadrature: sum of w_ij * v_ij."""
    v = np.asarray(values, dtype=float)
    if v.shape != (grid.nr, grid.nz):
        raise ValueError(f"values shape {v.shape} does not match grid")
    if not np.all(np.isfinite(v)):
        raise ValueError("integrate2 received non-finite values")
    return reduce_sum(grid.weights * v)


def integrate3(values, grid):
    """Midpoint-weight sum h^3 * sum over nodes; the outermost shell has weight zero."""
    v = np.asarray(values, dtype=float)
    n = grid.n
    if v.shape[:3] != (n, n, n):
        raise ValueError(f"values shape {v.shape} does not match grid")
    if not np.all(np.isfinite(v)):
        raise ValueError("integrate3 received non-finite values")
    return grid.h ** 3 * reduce_sum(v[grid.interior()])


def refine(grid):
    return grid.refine()


@dataclass(frozen=True, eq=False)
class InterpolantQuadrature:
    """Gauss rule for integrals of functions of the bilinear interpolant of a Grid2 field.

    ``P`` maps nodal values (raveled, all nodes) to the interpolant at the points;
    ``w`` carries the measure 2*pi*r dr dz and ``z`` the axial coordinate of each point.
    """

    P: sp.csr_matrix = field(repr=False)
    w: np.ndarray = field(repr=False)
    z: np.ndarray = field(repr=False)

    def integrate(self, values_at_points):
        return reduce_sum(self.w * values_at_points)


@lru_cache(maxsize=16)
def interpolant_quadrature(grid, points=4):
    """Quadrature of the bilinear interpolant, exact for its sixth power.

    Cells span neighbouring nodes; the strip between the axis and the first radial
    node uses the odd extension u(-r) = -u(r), so the interpolant vanishes on the axis.
    Four Gauss points per direction integrate the degree-7 integrands r * u^6 exactly.
    """
    gx, gw = np.polynomial.legendre.leggauss(points)
    nr, nz = grid.nr, grid.nz
    r = grid.r
    lo = np.concatenate([[0.0], r[:-1]])
    width = r - lo
    rq = 0.5 * (lo + r)[:, None] + 0.5 * width[:, None] * gx
    rw = 0.5 * width[:, None] * gw * 2.0 * np.pi * rq
    tr = (rq - lo[:, None]) / width[:, None]
    tz = 0.5 * (1.0 + gx)
    zw = 0.5 * grid.dz * gw
    K, J, IR, IZ = (a.ravel() for a in np.meshgrid(np.arange(nr), np.arange(nz - 1), np.arange(points),
                                                    np.arange(points), indexing="ij"))
    q = np.arange(K.size)
    T, S = tr[K, IR], tz[IZ]
    rows, cols, vals = [], [], []

    def add(mask, i, j, c):
        rows.append(q[mask])
        cols.append(i[mask] * nz + j[mask])
        vals.append(c[mask])

    axis, rest = K == 0, K > 0
    add(axis, K, J, T * (1.0 - S))
    add(axis, K, J + 1, T * S)
    add(rest, K - 1, J, (1.0 - T) * (1.0 - S))
    add(rest, K - 1, J + 1, (1.0 - T) * S)
    add(rest, K, J, T * (1.0 - S))
    add(rest, K, J + 1, T * S)
    P = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(q.size, nr * nz))
    zq = grid.z[J] + grid.dz * S
    w = rw[K, IR] * zw[IZ]
    for arr in (w, zq):
        arr.setflags(write=False)
    return InterpolantQuadrature(P, w, zq)
