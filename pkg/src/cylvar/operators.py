"""Discrete differential operators, the scalar/vector lift and the SO(2) machinery.

The cylindrical operator ``A = -Δ + a/r²`` acting on O(2)-invariant profiles is
assembled from face differences so that

    <A u, v>_w = sum_faces c (Δu)(Δv) + a * sum w u v / r²

holds exactly for the grid measure ``w``; the same quadratic form defines
``x_norm_sq``.
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import RectBivariateSpline

from . import kernels
from .grids import Grid2, Grid3, ScalarField, VectorField3, zero_boundary3
from .parallel import dot, map_ordered, pairwise_tree, reduce_sum


class ConvergenceError(RuntimeError):
    def __init__(self, message, iterations):
        super().__init__(message)
        self.iterations = iterations


def check_a(a):
    if not a > 0:
        raise ValueError(f"a>0 required for K=2 (the singular potential needs a > -((K-2)/2)^2 = 0); got a={a!r}")


# ---------------------------------------------------------------------------
# conjugate gradients


def pcg(matvec, b, precond=None, rtol=1e-10, maxiter=None, x0=None):
    """Preconditioned conjugate gradients for a symmetric positive definite system.

    Returns ``(x, iterations)``. Stops when ``|r| <= rtol * |b|``; raises
    :class:`ConvergenceError` after ``maxiter`` iterations.
    """
    b = np.asarray(b, dtype=float)
    if maxiter is None:
        maxiter = 10 * b.size
    bnorm = np.sqrt(dot(b, b))
    if bnorm == 0.0:
        return np.zeros_like(b), 0
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - matvec(x)
    z = precond(r) if precond is not None else r
    p = z.copy()
    rz = dot(r, z)
    for it in range(1, maxiter + 1):
        Ap = matvec(p)
        alpha = rz / dot(p, Ap)
        x += alpha * p
        r -= alpha * Ap
        if np.sqrt(dot(r, r)) <= rtol * bnorm:
            return x, it
        z = precond(r) if precond is not None else r
        rz_new = dot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceError(f"CG did not reach rtol={rtol:g} in {maxiter} iterations", maxiter)


# ---------------------------------------------------------------------------
# cylindrical operator


class CylOperator:
    """``-Δ + a/r²`` on the interior unknowns of a :class:`Grid2`.

    Unknowns are the nodes with ``i < nr-1`` and ``0 < j < nz-1``; the boundary
    ring is held at zero.
    """

    def __init__(self, grid, a):
        check_a(a)
        self.grid = grid
        self.a = float(a)
        nr, nz = grid.nr, grid.nz
        dr, dz = grid.dr, grid.dz
        r = grid.r
        self.c_r = 2.0 * np.pi * np.arange(1, nr) * dz
        self.c_z = 2.0 * np.pi * r * dr / dz
        self.potential_w = grid.weights / r[:, None] ** 2

        dr1 = sp.diags([-np.ones(nr - 1), np.ones(nr - 1)], [0, 1], shape=(nr - 1, nr))
        dz1 = sp.diags([-np.ones(nz - 1), np.ones(nz - 1)], [0, 1], shape=(nz - 1, nz))
        self._Dr = sp.kron(dr1, sp.identity(nz), format="csr")
        self._Dz = sp.kron(sp.identity(nr), dz1, format="csr")
        cr = np.repeat(self.c_r, nz)
        cz = np.repeat(self.c_z, nz - 1)
        full = (
            self._Dr.T @ sp.diags(cr) @ self._Dr
            + self._Dz.T @ sp.diags(cz) @ self._Dz
            + sp.diags(self.a * self.potential_w.ravel())
        )
        mask = np.zeros((nr, nz), dtype=bool)
        mask[: nr - 1, 1 : nz - 1] = True
        self.mask = mask
        self._index = np.flatnonzero(mask.ravel())
        self.K = full.tocsr()[self._index][:, self._index].tocsc()
        self.w = grid.weights.ravel()[self._index]
        self.size = self._index.size
        self._lu = None

    # vector <-> field
    def to_vec(self, u):
        vals = u.values if isinstance(u, ScalarField) else np.asarray(u)
        return vals.ravel()[self._index].copy()

    def to_field(self, vec):
        full = np.zeros(self.grid.nr * self.grid.nz)
        full[self._index] = vec
        return ScalarField(self.grid, full.reshape(self.grid.nr, self.grid.nz))

    def to_values(self, vec):
        full = np.zeros(self.grid.nr * self.grid.nz)
        full[self._index] = vec
        return full.reshape(self.grid.nr, self.grid.nz)

    # quadratic form
    def parts(self, values):
        """(radial gradient, axial gradient, potential) sums of the quadratic form."""
        v = np.asarray(values, dtype=float).ravel()
        nz = self.grid.nz
        dr_u = self._Dr @ v
        dz_u = self._Dz @ v
        radial = reduce_sum(np.repeat(self.c_r, nz) * dr_u**2)
        axial = reduce_sum(np.repeat(self.c_z, nz - 1) * dz_u**2)
        potential = self.a * reduce_sum(self.potential_w.ravel() * v**2)
        return radial, axial, potential

    def form(self, values):
        return float(pairwise_tree(self.parts(values)))

    def form_vec(self, vec):
        return dot(vec, self.K @ vec)

    def apply(self, vec):
        """``A u`` as a nodal field (``W^-1 K u``)."""
        return (self.K @ vec) / self.w

    @property
    def lu(self):
        if self._lu is None:
            self._lu = spla.splu(self.K)
        return self._lu

    def solve_stiffness(self, rhs, rtol=1e-10, preconditioner="lu", maxiter=None):
        """Solve ``K x = rhs`` by preconditioned CG; returns ``(x, iterations)``."""
        if preconditioner == "lu":
            precond = self.lu.solve
        elif preconditioner == "jacobi":
            d = self.K.diagonal()
            precond = lambda r: r / d  # noqa: E731
        elif preconditioner in (None, "none"):
            precond = None
        else:
            raise ValueError(f"unknown preconditioner {preconditioner!r}")
        return pcg(lambda x: self.K @ x, rhs, precond=precond, rtol=rtol, maxiter=maxiter)

    def riesz(self, residual, **kw):
        """Riesz representative psi of ``v -> <R, v>_w`` in the X inner product: ``A psi = R``."""
        return self.solve_stiffness(self.w * residual, **kw)


@lru_cache(maxsize=16)
def cyl_operator(grid, a):
    return CylOperator(grid, float(a))


def grad2(u):
    """(du/dr, du/dz): central differences inside, second-order one-sided at the edges."""
    g = u.grid
    du_dr = np.gradient(u.values, g.dr, axis=0, edge_order=2)
    du_dz = np.gradient(u.values, g.dz, axis=1, edge_order=2)
    return du_dr, du_dz


def x_norm_sq(u, a):
    """Discrete ``∫ |∇u|² + (a/r²) u² dx`` (cylindrical measure)."""
    return cyl_operator(u.grid, a).form(u.values)


# ---------------------------------------------------------------------------
# lift and restriction


@dataclass(frozen=True, eq=False)
class CylVectorField:
    """Cylindrical components of an SO-equivariant field sampled on a Grid2."""

    grid: Grid2
    comp_r: np.ndarray = field(repr=False)
    comp_theta: np.ndarray = field(repr=False)
    comp_z: np.ndarray = field(repr=False)

    def __post_init__(self):
        shape = (self.grid.nr, self.grid.nz)
        for name in ("comp_r", "comp_theta", "comp_z"):
            arr = np.array(getattr(self, name), dtype=float, copy=True)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def azimuthal(cls, u):
        zero = np.zeros_like(u.values)
        return cls(u.grid, zero, u.values, zero)


def _profile_spline(values, grid, odd):
    """Cubic spline of a profile reflected across the axis (odd or even in r)."""
    r = grid.r
    rr = np.concatenate([-r[::-1], r])
    sign = -1.0 if odd else 1.0
    vv = np.vstack([sign * values[::-1], values])
    return RectBivariateSpline(rr, grid.z, vv, kx=3, ky=3, s=0)


def _eval_profile(spline, grid, rho, z):
    out = np.zeros(rho.shape)
    inside = (rho <= grid.r[-1]) & (np.abs(z) <= grid.z_max)
    out[inside] = spline.ev(rho[inside], z[inside])
    return out


def from_cylindrical(cyl, grid3):
    """Assemble ``U = c_r e_rho + c_theta e_theta + c_z e_3`` on the box grid."""
    X1, X2, X3 = grid3.mesh()
    rho = np.hypot(X1, X2)
    safe = np.where(rho > 0, rho, 1.0)
    g2 = cyl.grid
    vals = np.zeros(X1.shape + (3,))
    if np.any(cyl.comp_theta):
        q = _eval_profile(_profile_spline(cyl.comp_theta, g2, odd=True), g2, rho, X3) / safe
        q[rho == 0] = 0.0
        vals[..., 0] -= X2 * q
        vals[..., 1] += X1 * q
    if np.any(cyl.comp_r):
        q = _eval_profile(_profile_spline(cyl.comp_r, g2, odd=True), g2, rho, X3) / safe
        q[rho == 0] = 0.0
        vals[..., 0] += X1 * q
        vals[..., 1] += X2 * q
    if np.any(cyl.comp_z):
        vals[..., 2] = _eval_profile(_profile_spline(cyl.comp_z, g2, odd=False), g2, rho, X3)
    return VectorField3(grid3, zero_boundary3(vals))


def lift(u, grid3):
    """``U(x) = u(rho, x3)/rho * (-x2, x1, 0)``; zero on the axis and on the box shell."""
    return from_cylindrical(CylVectorField.azimuthal(u), grid3)


def sample_points(U, pts):
    g = U.grid
    return kernels.trilinear(U.values, -g.half_width, g.h, pts)


def to_cylindrical(U, grid2):
    """Sample ``U`` on the half-plane x2 = 0, x1 = r >= 0."""
    R, Z = grid2.mesh()
    pts = np.stack([R.ravel(), np.zeros(R.size), Z.ravel()], axis=1)
    vals = sample_points(U, pts).reshape(grid2.nr, grid2.nz, 3)
    ring = grid2.boundary_mask()
    vals[ring] = 0.0
    return CylVectorField(grid2, vals[..., 0], vals[..., 1], vals[..., 2])


def azimuthal_fraction(U):
    """Share of ``sum |U|²`` carried by the rho and zeta parts."""
    U_rho, U_tau, U_zeta = decompose(U)
    total = reduce_sum(U.values**2)
    if total == 0.0:
        return 0.0
    return (reduce_sum(U_rho.values**2) + reduce_sum(U_zeta.values**2)) / total


def restrict(U, grid2, tol=1e-6):
    """Recover the profile ``u`` of an azimuthal field; rejects fields with rho/zeta content."""
    frac = azimuthal_fraction(U)
    if frac > tol:
        raise ValueError(f"field is not azimuthal: rho/zeta energy fraction {frac:.3e} exceeds {tol:g}")
    return ScalarField(grid2, to_cylindrical(U, grid2).comp_theta)


# ---------------------------------------------------------------------------
# 3D stencils


def _d(f, axis, h):
    """Central difference along ``axis`` on interior nodes; zero on the shell."""
    out = np.zeros_like(f)
    n = f.shape[axis]
    hi = [slice(1, -1)] * 3
    lo = [slice(1, -1)] * 3
    hi[axis] = slice(2, n)
    lo[axis] = slice(0, n - 2)
    out[1:-1, 1:-1, 1:-1] = (f[tuple(hi)] - f[tuple(lo)]) / (2.0 * h)
    return out


def curl3(U):
    v, h = U.values, U.grid.h
    c1 = _d(v[..., 2], 1, h) - _d(v[..., 1], 2, h)
    c2 = _d(v[..., 0], 2, h) - _d(v[..., 2], 0, h)
    c3 = _d(v[..., 1], 0, h) - _d(v[..., 0], 1, h)
    return VectorField3(U.grid, np.stack([c1, c2, c3], axis=-1))


def div3(U):
    v, h = U.values, U.grid.h
    return _d(v[..., 0], 0, h) + _d(v[..., 1], 1, h) + _d(v[..., 2], 2, h)


def grad3_sq(U):
    """Nodewise ``|∇U|²`` (sum over the nine central-difference partials)."""
    v, h = U.values, U.grid.h
    return sum(_d(v[..., c], k, h) ** 2 for c in range(3) for k in range(3))


def laplacian3(U):
    """Componentwise 7-point Laplacian on interior nodes."""
    v, h = U.values, U.grid.h
    out = np.zeros_like(v)
    c = v[1:-1, 1:-1, 1:-1]
    out[1:-1, 1:-1, 1:-1] = (
        v[2:, 1:-1, 1:-1] + v[:-2, 1:-1, 1:-1]
        + v[1:-1, 2:, 1:-1] + v[1:-1, :-2, 1:-1]
        + v[1:-1, 1:-1, 2:] + v[1:-1, 1:-1, :-2]
        - 6.0 * c
    ) / h**2
    return VectorField3(U.grid, out)


def curlcurl_minus_laplacian_defect(U):
    """Max over nodes two layers inside the box of ``|curl curl U + ΔU|`` (componentwise)."""
    cc = curl3(curl3(U)).values
    lap = laplacian3(U).values
    s = U.grid.interior(2)
    return float(np.max(np.abs((cc + lap)[s]))) if U.grid.n > 4 else 0.0


# ---------------------------------------------------------------------------
# rho / tau / zeta decomposition and SO(2) averaging


def decompose(U):
    """Pointwise split ``U = U_rho + U_tau + U_zeta``; on the axis U_rho = U_tau = 0."""
    X1, X2, _ = U.grid.mesh()
    v = U.values
    rho2 = X1**2 + X2**2
    safe = np.where(rho2 > 0, rho2, 1.0)
    a_rho = np.where(rho2 > 0, (v[..., 0] * X1 + v[..., 1] * X2) / safe, 0.0)
    a_tau = np.where(rho2 > 0, (-v[..., 0] * X2 + v[..., 1] * X1) / safe, 0.0)
    zero = np.zeros_like(X1)
    U_rho = np.stack([a_rho * X1, a_rho * X2, zero], axis=-1)
    U_tau = np.stack([-a_tau * X2, a_tau * X1, zero], axis=-1)
    U_zeta = np.stack([zero, zero, v[..., 2]], axis=-1)
    # on the axis the horizontal part has no rho/tau direction; keep it in zeta so the sum stays exact
    axis = rho2 == 0
    U_zeta[axis] = v[axis]
    g = U.grid
    return VectorField3(g, U_rho), VectorField3(g, U_tau), VectorField3(g, U_zeta)


def _angles(m):
    return 2.0 * np.pi * np.arange(m) / m


def haar_average(V, m=16):
    """``(1/m) sum_k g_k^T V(g_k x)`` over m equally spaced rotations about the x3-axis."""
    if m < 4:
        raise ValueError(f"haar_average needs m >= 4 angles, got {m}")
    g = V.grid
    terms = map_ordered(lambda al: kernels.rotate_pullback(V.values, -g.half_width, g.h, al), _angles(m))
    return VectorField3(g, pairwise_tree(terms) / m)


def rotation_mask(grid, layers=1):
    """Nodes whose whole SO(2) orbit stays ``layers`` nodes inside the box."""
    X1, X2, X3 = grid.mesh()
    lim = grid.half_width - layers * grid.h
    return (np.hypot(X1, X2) <= lim) & (np.abs(X3) <= lim)


def equivariance_defect(U, m=16):
    """Max over the m angles and admissible nodes of ``|g U(x) - U(g x)|``."""
    g = U.grid
    mask = rotation_mask(g)
    if not mask.any():
        return 0.0

    def one(alpha):
        pulled = kernels.rotate_pullback(U.values, -g.half_width, g.h, alpha)
        return float(np.max(np.linalg.norm((pulled - U.values)[mask], axis=-1)))

    return max(map_ordered(one, _angles(m)[1:]), default=0.0)
