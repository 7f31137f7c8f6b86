"""Energies J (scalar side) and E (vector side), first variations, fiber maps and the
mountain-pass test functions."""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq

from .grids import ScalarField, integrate2, integrate3, interpolant_quadrature
from .nonlinearity import Nonlinearity
from .operators import check_a, curl3, cyl_operator
from .parallel import dot, reduce_sum

ZERO = Nonlinearity("zero")
QUADRATURES = ("nodal", "interpolant")


@dataclass(frozen=True)
class EnergyBreakdown:
    quad: float
    nonlinear: float
    total: float

    @classmethod
    def of(cls, quad, nonlinear):
        return cls(float(quad), float(nonlinear), float(quad - nonlinear))


class Problem:
    """Discrete J on the interior unknowns of a grid, for fixed ``a`` and ``nl``.

    Vectors are in the unknown ordering of :class:`~cylvar.operators.CylOperator`.
    ``quadrature`` selects how ∫F(x, u) is discretised: ``"nodal"`` weights nodal
    values with the grid measure, ``"interpolant"`` integrates F of the bilinear
    interpolant exactly (see :func:`~cylvar.grids.interpolant_quadrature`).
    """

    def __init__(self, grid, a, nl, quadrature="nodal"):
        if quadrature not in QUADRATURES:
            raise ValueError(f"quadrature must be one of {', '.join(QUADRATURES)}, got {quadrature!r}")
        self.op = cyl_operator(grid, a)
        self.grid = grid
        self.a = float(a)
        self.nl = nl
        self.quadrature = quadrature
        _, Z = grid.mesh()
        self.z = self.op.to_vec(Z)
        self.w = self.op.w
        if quadrature == "interpolant":
            iq = interpolant_quadrature(grid)
            self._P = iq.P[:, self.op._index].tocsr()
            self._PT = self._P.T.tocsr()
            self._qw, self._qz = iq.w, iq.z
        else:
            self._P = None

    def at_points(self, v):
        """(values, weights, z) at the quadrature points of the nonlinear term."""
        if self._P is None:
            return v, self.w, self.z
        return self._P @ v, self._qw, self._qz

    def _gather(self, values_at_points):
        """Covector of ``v -> Σ_q c_q (P v)_q`` (identity for nodal quadrature)."""
        return values_at_points if self._P is None else self._PT @ values_at_points

    def quad(self, v):
        return 0.5 * self.op.form_vec(v)

    def nonlinear(self, v):
        x, w, z = self.at_points(v)
        return reduce_sum(w * self.nl.F(x, z))

    def energy(self, v):
        return EnergyBreakdown.of(self.quad(v), self.nonlinear(v))

    def J(self, v):
        return self.quad(v) - self.nonlinear(v)

    def residual(self, v):
        """Stiffness-weighted residual ``K v - ∫f(v)φ`` (the first variation as a covector)."""
        x, w, z = self.at_points(v)
        return self.op.K @ v - self._gather(w * self.nl.f(x, z))

    def nonlinear_jacobian(self, v):
        """Sparse second derivative of ∫F(x, v)."""
        x, w, z = self.at_points(v)
        d = sp.diags(w * self.nl.df(x, z))
        return d if self._P is None else (self._PT @ d @ self._P)

    def fiber_g(self, v, t):
        """g(t) = t² ||v||² - ∫ f(t v) t v = t d/dt J(t v)."""
        x, w, z = self.at_points(v)
        tx = t * x
        return t * t * self.op.form_vec(v) - reduce_sum(w * self.nl.f(tx, z) * tx)

    def nehari_root(self, v, rtol=1e-14):
        """Positive zero of the fiber derivative; None when g stays positive up to t = 2^200."""
        if self.op.form_vec(v) <= 0.0:
            raise ValueError("fiber map needs a nonzero field")
        hi = 1.0
        for _ in range(400):
            if self.fiber_g(v, hi) < 0.0:
                break
            hi *= 2.0
        else:
            return None
        lo = hi / 2.0
        for _ in range(2000):
            if self.fiber_g(v, lo) > 0.0:
                break
            hi = lo
            lo /= 2.0
        else:
            raise ValueError("fiber derivative negative for all small t: nonlinearity is not superquadratic at 0")
        return brentq(lambda t: self.fiber_g(v, t), lo, hi, xtol=1e-300, rtol=max(rtol, 1e-15), maxiter=500)


# ---------------------------------------------------------------------------
# energies


def energy_scalar(u, a, nl):
    """J(u) = ½ ||u||² - ∫ F(x, u) with the summation-by-parts quadratic form."""
    check_a(a)
    _, Z = u.grid.mesh()
    quad = 0.5 * cyl_operator(u.grid, a).form(u.values)
    nonlinear = integrate2(nl.F(u.values, Z), u.grid)
    return EnergyBreakdown.of(quad, nonlinear)


def energy_vector(U, nl):
    """E(U) = ½ ∫ |curl U|² - ∫ H(x, U) with H(x, U) = F(x, |U|)."""
    g = U.grid
    quad = 0.5 * integrate3(np.sum(curl3(U).values ** 2, axis=-1), g)
    _, _, X3 = g.mesh()
    nonlinear = integrate3(nl.F(np.linalg.norm(U.values, axis=-1), X3), g)
    return EnergyBreakdown.of(quad, nonlinear)


@dataclass(frozen=True)
class Gradient:
    riesz: ScalarField
    residual: ScalarField
    dual_norm: float
    iterations: int


def gradient_scalar(u, a, nl, rtol=1e-10, preconditioner="lu", maxiter=None):
    """Raw Euler-Lagrange residual ``R = A u - f(u)`` and its Riesz representative."""
    check_a(a)
    prob = Problem(u.grid, a, nl)
    v = prob.op.to_vec(u)
    cov = prob.residual(v)
    psi, iters = prob.op.solve_stiffness(cov, rtol=rtol, preconditioner=preconditioner, maxiter=maxiter)
    dual = float(np.sqrt(max(dot(psi, prob.op.K @ psi), 0.0)))
    return Gradient(prob.op.to_field(psi), prob.op.to_field(cov / prob.w), dual, iters)


def first_variation(u, v, a, nl):
    """J'(u) v = <R, v> in the grid measure."""
    prob = Problem(u.grid, a, nl)
    return dot(prob.op.to_vec(v), prob.residual(prob.op.to_vec(u)))


# ---------------------------------------------------------------------------
# fiber map


@dataclass(frozen=True)
class FiberProfile:
    ts: np.ndarray = field(repr=False)
    js: np.ndarray = field(repr=False)
    gs: np.ndarray = field(repr=False)
    root: float = None


def fiber_profile(u, a, nl, t_max=None, n_samples=64, rtol=1e-12):
    """Sample J(t u) and g(t) = t d/dt J(t u) on (0, t_max] and locate the Nehari root."""
    check_a(a)
    prob = Problem(u.grid, a, nl)
    v = prob.op.to_vec(u)
    if not np.any(v):
        raise ValueError("fiber map needs a nonzero field")
    root = prob.nehari_root(v, rtol=rtol)
    if t_max is None:
        t_max = 2.0 * root if root is not None else 1.0
    ts = t_max * np.arange(1, n_samples + 1) / n_samples
    gs = np.array([prob.fiber_g(v, t) for t in ts])
    js = np.array([prob.J(t * v) for t in ts])
    signs = np.sign(gs[gs != 0.0])
    changes = int(np.count_nonzero(np.diff(signs)))
    if changes > 1:
        raise ValueError(f"fiber derivative changes sign {changes} times on (0, {t_max:g}]: (F4) fails for this nonlinearity")
    if root is not None and root > t_max:
        root = None
    return FiberProfile(ts, js, gs, root)


# ---------------------------------------------------------------------------
# mountain-pass ring and scaling path


def ring_profile(t, u0, R):
    """φ_R: 0 on [0,1], affine up to u0 on [1,2], u0 on [2,R], affine down to 0 on [R,R+1]."""
    t = np.abs(np.asarray(t, dtype=float))
    rise = np.clip(t - 1.0, 0.0, 1.0)
    fall = np.clip(R + 1.0 - t, 0.0, 1.0)
    return u0 * np.minimum(rise, fall)


@dataclass(frozen=True)
class RingResult:
    w: ScalarField
    nonlinear: float
    z_gradient: float
    R: float

    @property
    def holds(self):
        """∫F(z, w) > ½ ∫|∇_z w|²."""
        return self.nonlinear > self.z_gradient


def mountain_pass_ring(u0, R, grid, nl, a=1.0):
    """Ring function w_R(r, z) = φ_R(r) φ_R(|z|) and the two sides of ∫F(z,w) > ½∫|∇_z w|²."""
    if R < 3:
        raise ValueError(f"ring radius R must be >= 3, got {R}")
    if grid.r_max < R + 1 or grid.z_max < R + 1:
        raise ValueError(
            f"grid [0,{grid.r_max:g}]x[-{grid.z_max:g},{grid.z_max:g}] does not contain the ring support [0,{R + 1:g}]x[-{R + 1:g},{R + 1:g}]"
        )
    Rg, Zg = grid.mesh()
    vals = ring_profile(Rg, u0, R) * ring_profile(Zg, u0, R)
    vals[grid.boundary_mask()] = 0.0
    w = ScalarField(grid, vals)
    _, axial, _ = cyl_operator(grid, a).parts(w.values)
    nonlinear = integrate2(nl.F(w.values, Zg), grid)
    return RingResult(w, float(nonlinear), float(0.5 * axial), float(R))


def smallest_ring_radius(u0, grid, nl, radii):
    """First R in ``radii`` (ascending) where the ring inequality holds strictly, else None."""
    for R in sorted(radii):
        if mountain_pass_ring(u0, R, grid, nl).holds:
            return R
    return None


@dataclass(frozen=True)
class ScalingPath:
    lambdas: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    A: float = 0.0
    B: float = 0.0


def scaling_parts(w, a, nl):
    """A = ∫|∇_r w|² + (a/r²) w² and B = ½∫|∇_z w|² - ∫F(z, w)."""
    check_a(a)
    radial, axial, potential = cyl_operator(w.grid, a).parts(w.values)
    _, Z = w.grid.mesh()
    return radial + potential, 0.5 * axial - integrate2(nl.F(w.values, Z), w.grid)


def scaling_path(w, a, nl, lambdas):
    """J(w(λ·, ·)) = ½A + λ⁻² B along the horizontal dilation path."""
    lam = np.asarray(lambdas, dtype=float)
    if np.any(lam <= 0):
        raise ValueError("scaling path needs positive lambdas")
    A, B = scaling_parts(w, a, nl)
    return ScalingPath(lam, 0.5 * A + B / lam**2, float(A), float(B))


def fiber_inequality(nl, u, t, z=0.0):
    """Pointwise ((t²-1)/2) f(z,u) u + F(z,u) - F(z,tu); nonpositive for every t >= 0 under (F4)."""
    u = np.asarray(u, dtype=float)
    t = np.asarray(t, dtype=float)
    return 0.5 * (t * t - 1.0) * nl.f(u, z) * u + nl.F(u, z) - nl.F(t * u, z)
