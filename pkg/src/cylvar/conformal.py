"""Stereographic projection, the conformal SO(2)xSO(2) action on vector fields and
Monte-Carlo checks of the change-of-variable identities on the 3-sphere.

The action of g = diag(g1, g2) (g1 rotates (xi1, xi2), g2 rotates (xi3, xi4)) is

    (T_g U)(x) = phi(x) / phi(y) * g1~^T U(y),    y = pi(g pi^{-1}(x)),

with phi(x) = sqrt(2 / (1 + |x|^2)) and g1~ the rotation of R^3 about the x3-axis by the
angle of g1. A field is SO(2)xSO(2)-symmetric exactly when T_g U = U for every g.
"""
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import map_coordinates

from . import kernels
from .functionals import energy_vector
from .grids import VectorField3, integrate3, sample_vector
from .nonlinearity import Nonlinearity
from .parallel import map_ordered, pairwise_tree, reduce_sum

TWO_PI = 2.0 * np.pi
S3_VOLUME = 2.0 * np.pi**2
POLE_TOL = 1e-12
UNIT_TOL = 1e-14


def _rng(seed):
    """Counter-based generator: a given seed gives the same stream on every platform."""
    return np.random.Generator(np.random.Philox(int(seed)))


# ---------------------------------------------------------------------------
# group elements and sphere points


@dataclass(frozen=True)
class GroupElement:
    alpha1: float = 0.0
    alpha2: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "alpha1", float(np.mod(self.alpha1, TWO_PI)))
        object.__setattr__(self, "alpha2", float(np.mod(self.alpha2, TWO_PI)))

    @property
    def is_identity(self):
        return self.alpha1 == 0.0 and self.alpha2 == 0.0

    def compose(self, other):
        """Group product; the group is abelian so the order does not matter."""
        return GroupElement(self.alpha1 + other.alpha1, self.alpha2 + other.alpha2)

    def inverse(self):
        return GroupElement(-self.alpha1, -self.alpha2)

    def matrix4(self):
        c1, s1 = np.cos(self.alpha1), np.sin(self.alpha1)
        c2, s2 = np.cos(self.alpha2), np.sin(self.alpha2)
        return np.array([[c1, -s1, 0.0, 0.0], [s1, c1, 0.0, 0.0], [0.0, 0.0, c2, -s2], [0.0, 0.0, s2, c2]])

    def rotation3(self):
        """g1~: the rotation of R^3 about the x3-axis by alpha1."""
        c1, s1 = np.cos(self.alpha1), np.sin(self.alpha1)
        return np.array([[c1, -s1, 0.0], [s1, c1, 0.0], [0.0, 0.0, 1.0]])


def angle_grid(m1, m2):
    """The m1 x m2 equally spaced group elements."""
    if m1 < 4 or m2 < 4:
        raise ValueError(f"angle grid needs m1, m2 >= 4, got {m1}, {m2}")
    return [GroupElement(TWO_PI * i / m1, TWO_PI * j / m2) for i in range(m1) for j in range(m2)]


@dataclass(frozen=True)
class SpherePoint:
    xi: np.ndarray

    def __post_init__(self):
        xi = np.array(self.xi, dtype=float).reshape(4)
        if abs(np.linalg.norm(xi) - 1.0) > UNIT_TOL * 10:
            raise ValueError(f"sphere point must have unit norm, |xi| = {np.linalg.norm(xi)!r}")
        xi.setflags(write=False)
        object.__setattr__(self, "xi", xi)


NORTH_POLE = np.array([0.0, 0.0, 0.0, 1.0])


def stereo(xi):
    """pi(xi) = (xi1, xi2, xi3) / (1 - xi4); accepts a SpherePoint or an array (..., 4)."""
    xi = np.asarray(xi.xi if isinstance(xi, SpherePoint) else xi, dtype=float)
    if xi.shape[-1] != 4:
        raise ValueError("stereo expects points with 4 coordinates")
    near = np.linalg.norm(xi - NORTH_POLE, axis=-1) <= POLE_TOL
    if np.any(near):
        raise ValueError("stereographic projection is undefined at the north pole Q = (0,0,0,1)")
    return xi[..., :3] / (1.0 - xi[..., 3:4])


def stereo_inv(x):
    """pi^{-1}(x) = (2x, |x|^2 - 1) / (|x|^2 + 1) for x of shape (..., 3)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 3:
        raise ValueError("stereo_inv expects points with 3 coordinates")
    s = np.sum(x * x, axis=-1, keepdims=True)
    return np.concatenate([2.0 * x, s - 1.0], axis=-1) / (s + 1.0)


def conformal_factor(x):
    """phi(x) = sqrt(2 / (1 + |x|^2))."""
    x = np.asarray(x, dtype=float)
    return np.sqrt(2.0 / (1.0 + np.sum(x * x, axis=-1)))


def transport(x, g):
    """y = pi(g pi^{-1}(x)); points sent to the north pole come back as inf."""
    eta = stereo_inv(x) @ g.matrix4().T
    denom = 1.0 - eta[..., 3:4]
    with np.errstate(divide="ignore", invalid="ignore"):
        y = eta[..., :3] / denom
    y[np.broadcast_to(denom <= POLE_TOL, y.shape)] = np.inf
    return y


# ---------------------------------------------------------------------------
# the action on vector fields


def _nodes(grid):
    X1, X2, X3 = grid.mesh()
    return np.stack([X1, X2, X3], axis=-1).reshape(-1, 3)


def _act_values(U, g, pts):
    """(T_g U) at ``pts``; values needed outside the box count as zero."""
    grid = U.grid
    y = transport(pts, g)
    finite = np.all(np.isfinite(y), axis=1)
    out = np.zeros((pts.shape[0], 3))
    vals = kernels.trilinear(U.values, -grid.half_width, grid.h, y[finite])
    scale = conformal_factor(pts[finite]) / conformal_factor(y[finite])
    # rows are g1~^T v, i.e. v @ g1~
    out[finite] = scale[:, None] * (vals @ g.rotation3())
    return out


def in_box_mask(grid, g, radius=None):
    """Nodes with |x| <= radius (default L/2) whose transported point stays in the box."""
    pts = _nodes(grid)
    radius = 0.5 * grid.half_width if radius is None else radius
    y = transport(pts, g)
    keep = np.linalg.norm(pts, axis=1) <= radius
    keep &= np.all(np.abs(y) <= grid.half_width, axis=1)
    return keep.reshape((grid.n,) * 3)


def group_act(U, g):
    """T_g U on the nodes of U's grid (trilinear interpolation, zero extension)."""
    if g.is_identity:
        return VectorField3(U.grid, U.values)
    vals = _act_values(U, g, _nodes(U.grid)).reshape(U.values.shape)
    return VectorField3(U.grid, vals)


def symmetry_defect(U, sample_gs, radius=None):
    """max_g of the relative L2 defect |T_g U - U| / |U| over the nodes of :func:`in_box_mask`."""
    if not np.any(U.values):
        return 0.0

    def one(g):
        mask = in_box_mask(U.grid, g, radius)
        if not mask.any():
            return 0.0
        diff = group_act(U, g).values[mask] - U.values[mask]
        ref = reduce_sum(U.values[mask] ** 2)
        return float(np.sqrt(reduce_sum(diff**2) / ref)) if ref > 0 else 0.0

    return max(map_ordered(one, list(sample_gs)), default=0.0)


def symmetrize(U, m1=8, m2=8):
    """Average of T_g U over the m1 x m2 angle grid."""
    gs = angle_grid(m1, m2)
    terms = map_ordered(lambda g: group_act(U, g).values, gs)
    return VectorField3(U.grid, pairwise_tree(terms) / len(gs))


def symmetric_reference(grid):
    """phi(x)^3 (-x2, x1, 0), an exactly SO(2)xSO(2)-symmetric field."""
    def expr(x1, x2, x3):
        ph3 = (2.0 / (1.0 + x1**2 + x2**2 + x3**2)) ** 1.5
        return -x2 * ph3, x1 * ph3, 0.0 * x3

    return sample_vector(expr, grid, force_boundary=False)


def noise_floor(grid, sample_gs, radius=None):
    """Symmetry defect of the exact reference field: pure interpolation error on this grid."""
    return symmetry_defect(symmetric_reference(grid), sample_gs, radius)


# ---------------------------------------------------------------------------
# Monte-Carlo identities on S^3


@dataclass(frozen=True)
class MCEstimate:
    value: float
    stderr: float

    def agrees(self, target, extra=0.0, sigmas=3.0):
        return abs(self.value - target) <= sigmas * self.stderr + extra


def uniform_sphere(n, seed=0):
    """``n`` uniform points on S^3 (normalised Gaussians)."""
    g = _rng(seed).standard_normal((int(n), 4))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def volume_check(n_samples=200_000, seed=0, df=3.0):
    """Importance-sampled ∫ phi^6 dx with a multivariate Student-t proposal (tail |x|^-6 like phi^6)."""
    from scipy.stats import multivariate_t

    dist = multivariate_t(loc=np.zeros(3), shape=np.eye(3), df=df)
    x = dist.rvs(size=int(n_samples), random_state=_rng(seed))
    ratio = conformal_factor(x) ** 6 / dist.pdf(x)
    return MCEstimate(float(np.mean(ratio)), float(np.std(ratio, ddof=1) / np.sqrt(ratio.size)))


@dataclass(frozen=True)
class L6Pair:
    r3: float
    s3: MCEstimate


def sample_cubic(U, pts):
    """Cubic-spline samples of U at ``pts`` (zero outside the box).

    |U|^6 magnifies relative interpolation error sixfold, so the sphere samples use
    cubic splines rather than the trilinear kernel of the group action.
    """
    grid = U.grid
    pts = np.asarray(pts, dtype=float)
    coords = ((pts + grid.half_width) / grid.h).T
    out = np.stack(
        [map_coordinates(U.values[..., c], coords, order=3, mode="constant", cval=0.0) for c in range(3)], axis=1
    )
    out[~np.all(np.abs(pts) <= grid.half_width, axis=1)] = 0.0
    return out


def l6_isometry_check(U, n_sphere_samples=200_000, seed=0):
    """(|U|_6^6 on the box grid, Monte-Carlo |V|_6^6 on S^3) with V(xi) = U(pi xi) / phi(pi xi)."""
    grid = U.grid
    r3 = integrate3(np.sum(U.values**2, axis=-1) ** 3, grid)
    if not np.any(U.values):
        return L6Pair(float(r3), MCEstimate(0.0, 0.0))
    xi = uniform_sphere(n_sphere_samples, seed)
    xi = xi[np.linalg.norm(xi - NORTH_POLE, axis=1) > POLE_TOL]
    x = stereo(xi)
    vals = sample_cubic(U, x)
    V6 = np.sum(vals**2, axis=1) ** 3 / conformal_factor(x) ** 6
    samples = S3_VOLUME * V6
    return L6Pair(float(r3), MCEstimate(float(np.mean(samples)), float(np.std(samples, ddof=1) / np.sqrt(samples.size))))


def energy_invariance_defect(U, sample_gs, nl=None):
    """max_g |E(T_g U) - E(U)| / |E(U)| for the critical nonlinearity (an empirical check)."""
    nl = nl if nl is not None else Nonlinearity.critical()
    base = energy_vector(U, nl).total
    if base == 0.0:
        return 0.0
    return max(abs(energy_vector(group_act(U, g), nl).total - base) / abs(base) for g in sample_gs)
