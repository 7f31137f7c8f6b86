"""Ground states on the Nehari set, the critical Rayleigh quotient, an odd-in-z
excited surrogate and a string-method bound for the mountain-pass level."""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .functionals import EnergyBreakdown, Problem, mountain_pass_ring, scaling_parts
from .grids import ScalarField
from .nonlinearity import HOLDS, Nonlinearity, check_assumptions
from .operators import check_a
from .parallel import dot, reduce_sum

log = logging.getLogger(__name__)

ARMIJO_C = 1e-4
MIN_STEP = 1e-14
COLLAPSE_NORM = 1e-12
# dual residual below which a safeguarded Newton correction is tried before each gradient step
NEWTON_SWITCH = 1e-2
# a unit step is the natural scale of a Riesz-preconditioned gradient; longer steps zig-zag
MAX_STEP = 1.0
# string method: stop when the path maximum moves less than stall_rtol (relative) over this many sweeps
STALL_SWEEPS = 20
SUBSAMPLES = 8
# critical quotient: below this scaled dual residual damped Newton steps take over from subspace steps
CRITICAL_NEWTON_SWITCH = 1e-3
NEWTON_HALVINGS = 12
# previous steps kept in the quotient's search subspace
SUBSPACE_HISTORY = 2
# relative eigenvalue cut-off when orthonormalising the search subspace
SUBSPACE_RCOND = 1e-12
# relative slack on the quotient when accepting a step (rounding of the normalisation)
QUOTIENT_SLACK = 1e-12
CRITICAL = Nonlinearity.critical()


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    max_iter: int = 500
    tol_residual: float = 1e-8
    step0: float = 1.0
    seed: int = 0
    normalize_mode: str = "nehari"
    positivity: bool = False
    k_nodes: int = 0

    def __post_init__(self):
        if not self.tol_residual > 0:
            raise ValueError("tol_residual must be positive")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError("max_iter must be an integer >= 1")
        if not self.step0 > 0:
            raise ValueError("step0 must be positive")
        if self.normalize_mode not in ("nehari", "l6_sphere"):
            raise ValueError(f"normalize_mode must be 'nehari' or 'l6_sphere', got {self.normalize_mode!r}")
        if self.k_nodes not in (0, 1):
            raise ValueError(f"k_nodes must be 0 or 1, got {self.k_nodes!r}")


@dataclass(frozen=True)
class SolveResult:
    u: ScalarField
    breakdown: EnergyBreakdown
    dual_residual: float
    iterations: int
    trace: np.ndarray = field(repr=False)
    converged: bool
    rayleigh: float = None
    label: str = "ground state"
    quadrature: str = "nodal"

    @property
    def J(self):
        return self.breakdown.total


# ---------------------------------------------------------------------------
# helpers


def initial_guess(grid, seed=0, odd=False):
    """r e^{-r²-z²}, with a seed-dependent width, centre and small smooth modulation for seed != 0."""
    R, Z = grid.mesh()
    if seed:
        rng = np.random.default_rng(seed)
        s = 1.0 + 0.2 * rng.uniform(-1.0, 1.0)
        z0 = 0.0 if odd else 0.3 * rng.uniform(-1.0, 1.0)
        c = rng.uniform(-0.2, 0.2, size=2)
        vals = R * np.exp(-(R**2 + (Z - z0) ** 2) / s**2) * (1.0 + c[0] * np.tanh(Z) + c[1] * np.tanh(R - 1.0))
    else:
        vals = R * np.exp(-(R**2) - Z**2)
    if odd:
        vals = vals * np.tanh(2.0 * Z) if seed else vals * Z
    vals[grid.boundary_mask()] = 0.0
    return ScalarField(grid, vals)


class _Constraint:
    """Sign/parity constraints applied to iterates (positivity and odd-in-z)."""

    def __init__(self, op, positivity, odd):
        self.op = op
        self.positivity = positivity
        self.odd = odd

    def __call__(self, v):
        if self.odd:
            vals = self.op.to_values(v)
            v = self.op.to_vec(0.5 * (vals - vals[:, ::-1]))
        if self.positivity:
            v = np.abs(v)
        return v


def _fix_sign(v):
    k = int(np.argmax(np.abs(v)))
    return -v if v[k] < 0 else v


def _dual(op, psi):
    return float(np.sqrt(max(dot(psi, op.K @ psi), 0.0)))


def _riesz(op, cov):
    psi, _ = op.solve_stiffness(cov, rtol=1e-12)
    return psi


def _newton_step(prob, v, constrain):
    """Newton correction for K v - W f(v) = 0 with the sparse Jacobian K - W f'(v)."""
    from scipy.sparse.linalg import splu

    jac = (prob.op.K - prob.nonlinear_jacobian(v)).tocsc()
    try:
        delta = splu(jac).solve(-prob.residual(v))
    except RuntimeError:
        return None
    if not np.all(np.isfinite(delta)):
        return None
    return constrain(v + delta)

# ---------------------------------------------------------------------------
# subcritical ground state


def _nehari_project(prob, v):
    if np.sqrt(max(prob.op.form_vec(v), 0.0)) < COLLAPSE_NORM:
        raise SolverError("iterate collapsed to 0 (norm below 1e-12): check (F3) and the initial guess")
    t = prob.nehari_root(v)
    if t is None:
        raise SolverError("fiber map has no critical point: (F3) fails for this nonlinearity, no Nehari projection")
    return t * v


def solve_ground_state(a, nl, grid, cfg=SolverConfig(), init=None, label="ground state"):
    """Riesz-gradient descent on the Nehari-reduced functional J(t*(v) v) with Armijo backtracking."""
    check_a(a)
    if nl.kind == "zero":
        raise SolverError("zero nonlinearity has no nontrivial critical point: (F3) fails")
    prob = Problem(grid, a, nl)
    op = prob.op
    constrain = _Constraint(op, cfg.positivity, cfg.k_nodes == 1)
    if init is None:
        init = initial_guess(grid, cfg.seed, odd=cfg.k_nodes == 1)
    v = _nehari_project(prob, constrain(op.to_vec(init)))
    J = prob.J(v)
    step = cfg.step0
    trace = []
    converged = False
    dual = np.inf
    it = 0
    for it in range(cfg.max_iter + 1):
        psi = _riesz(op, prob.residual(v))
        if cfg.k_nodes:
            psi = constrain(psi)
        dual = _dual(op, psi)
        trace.append((J, dual))
        if dual <= cfg.tol_residual:
            converged = True
            break
        if it == cfg.max_iter:
            break
        slack = 1e-13 * (abs(prob.quad(v)) + abs(prob.nonlinear(v)))
        if dual <= NEWTON_SWITCH:
            polished = _newton_step(prob, v, constrain)
            if polished is not None:
                polished = _nehari_project(prob, polished)
                J_pol = prob.J(polished)
                dual_pol = _dual(op, _riesz(op, prob.residual(polished)))
                # accept on sufficient decrease of J, or on a halved residual without an increase of J
                if J_pol <= J - ARMIJO_C * dual**2 or (J_pol <= J + slack and dual_pol < 0.5 * dual):
                    v, J = polished, J_pol
                    continue
        s = min(2.0 * step, MAX_STEP)
        while True:
            cand = _nehari_project(prob, constrain(v - s * psi))
            J_new = prob.J(cand)
            if J_new <= J - ARMIJO_C * s * dual**2 + slack:
                break
            s *= 0.5
            if s < MIN_STEP:
                log.warning("line search stalled at iteration %d (dual residual %.3e)", it, dual)
                cand = None
                break
        if cand is None:
            break
        v, J, step = cand, J_new, s
    v = _fix_sign(v)
    return SolveResult(
        op.to_field(v), prob.energy(v), dual, it, np.array(trace), converged, None,
        label if cfg.k_nodes == 0 else "odd-in-z surrogate",
    )


# ---------------------------------------------------------------------------
# critical case


def _l6(prob, v):
    """|v|_6 in the problem's quadrature (the critical F is u^6/6)."""
    return (6.0 * prob.nonlinear(v)) ** (1.0 / 6.0)


def _combine(columns, c):
    """Σ c_k columns[k] with a fixed summation order (no BLAS)."""
    out = c[0] * columns[0]
    for ck, col in zip(c[1:], columns[1:]):
        out = out + ck * col
    return out


def _subspace_step(prob, basis):
    """Minimise the Rayleigh quotient over span(basis), starting from basis[0].

    A locally optimal preconditioned step: with previous steps in the basis the
    iteration behaves like a conjugate-gradient method and crosses the nearly flat
    dilation direction of the scale-invariant quotient in a few steps. The basis is
    made orthonormal in the X inner product first (dropping dependent directions),
    so the small optimisation problem is well conditioned.
    """
    from scipy.optimize import minimize

    op = prob.op
    Kb = [op.K @ b for b in basis]
    G = np.array([[dot(bi, kj) for kj in Kb] for bi in basis])
    G = 0.5 * (G + G.T)
    lam, U = np.linalg.eigh(G)
    keep = lam > SUBSPACE_RCOND * lam[-1]
    T = U[:, keep] / np.sqrt(lam[keep])
    ortho = [_combine(basis, T[:, k]) for k in range(T.shape[1])]
    pts = [prob.at_points(b)[0] for b in ortho]
    _, w, _ = prob.at_points(basis[0])

    def value_and_grad(c):
        x = _combine(pts, c)
        x2 = x * x
        g5 = w * (x2 * x2 * x)
        n6 = reduce_sum(g5 * x)
        num = float(c @ c)
        dn6 = 6.0 * np.array([reduce_sum(g5 * p) for p in pts])
        val = num / n6 ** (1.0 / 3.0)
        grad = 2.0 * c / n6 ** (1.0 / 3.0) - num / 3.0 * n6 ** (-4.0 / 3.0) * dn6
        return val, grad

    # coordinates of basis[0] in the orthonormal basis
    c0 = np.array([dot(o, Kb[0]) for o in ortho])
    q0 = value_and_grad(c0)[0]
    res = minimize(value_and_grad, c0, jac=True, method="BFGS", options={"gtol": 1e-13 * q0 * np.sqrt(c0 @ c0), "maxiter": 200})
    if not res.fun < q0:
        return basis[0]
    return _combine(ortho, res.x)


def _damped_newton(prob, v, q, constrain):
    """Newton correction of the Nehari-scaled state t v (t = q^{1/4}), halved until the quotient does not rise.

    Close to the minimum the quotient changes only at second order in the residual,
    so a descent method stalls at rounding level; Newton on the Euler-Lagrange
    system keeps converging there. Returns the normalised iterate or None.
    """
    from scipy.sparse.linalg import splu

    t = q**0.25
    u = t * v
    jac = (prob.op.K - prob.nonlinear_jacobian(u)).tocsc()
    try:
        delta = splu(jac).solve(-prob.residual(u))
    except RuntimeError:
        return None
    if not np.all(np.isfinite(delta)):
        return None
    alpha = 1.0
    for _ in range(NEWTON_HALVINGS):
        trial = constrain(u + alpha * delta)
        n6 = _l6(prob, trial)
        if n6 > 0.0:
            trial = trial / n6
            if prob.op.form_vec(trial) <= q * (1.0 + QUOTIENT_SLACK):
                return trial
        alpha *= 0.5
    return None


def solve_critical(a, grid, cfg=SolverConfig(), init=None):
    """Minimise R(u) = ||u||² / |u|_6² on the sphere |u|_6 = 1, then scale onto the Nehari set.

    The scaled state t u with t = S^{1/4} has J = S^{3/2}/3. |u|_6 is integrated on
    the bilinear interpolant: nodal quadrature overweights single-node spikes, which
    pins the discrete minimiser at a few cells and makes S a lattice artefact, while
    the interpolant integral lets the minimiser spread to a resolved profile whose
    size is set by the box. Steps minimise R over span{v, ψ, previous step}; close to
    the minimum a Newton correction of the scaled state finishes the solve.
    """
    check_a(a)
    prob = Problem(grid, a, CRITICAL, quadrature="interpolant")
    op = prob.op
    constrain = _Constraint(op, cfg.positivity, cfg.k_nodes == 1)
    if init is None:
        init = initial_guess(grid, cfg.seed, odd=cfg.k_nodes == 1)
    v = constrain(op.to_vec(init))
    norm6 = _l6(prob, v)
    if norm6 == 0.0:
        raise SolverError("initial guess vanishes")
    v = v / norm6
    q = op.form_vec(v)
    history = []
    trace = []
    converged = False
    dual = np.inf
    it = 0
    for it in range(cfg.max_iter + 1):
        # on |v|_6 = 1 the quotient's covector is K v - q ∫v^5 φ
        cov = op.K @ v - q * (op.K @ v - prob.residual(v))
        psi = _riesz(op, cov)
        if cfg.k_nodes:
            psi = constrain(psi)
        res = _dual(op, psi)
        # dual residual of the Nehari-scaled state t v, t = q^{1/4}
        dual = q**0.25 * res
        trace.append((q**1.5 / 3.0, dual))
        if dual <= cfg.tol_residual:
            converged = True
            break
        if it == cfg.max_iter:
            break
        cand = None
        if dual <= CRITICAL_NEWTON_SWITCH:
            cand = _damped_newton(prob, v, q, constrain)
        if cand is None:
            basis = [v, psi] + [h for h in history if np.any(h)]
            cand = constrain(_subspace_step(prob, basis))
            cand = cand / _l6(prob, cand)
        q_new = op.form_vec(cand)
        if q_new > q * (1.0 + QUOTIENT_SLACK):
            log.warning("quotient step stalled at iteration %d (dual residual %.3e)", it, dual)
            break
        history = ([cand - v] + history)[:SUBSPACE_HISTORY]
        v, q = cand, q_new
    v = _fix_sign(v)
    t = q**0.25
    state = t * v
    # recompute the residual of the returned state itself
    dual = _dual(op, _riesz(op, prob.residual(state)))
    converged = converged and dual <= cfg.tol_residual
    return SolveResult(
        op.to_field(state), prob.energy(state), dual, it, np.array(trace), converged, float(q),
        "critical ground state" if cfg.k_nodes == 0 else "odd-in-z surrogate",
        quadrature="interpolant",
    )


def excited_symmetric_state(a, grid, cfg=SolverConfig(), k_nodes=1, nl=CRITICAL):
    """Odd-in-z surrogate for a higher critical level (k_nodes = 1); k_nodes = 0 is the ground state."""
    cfg = SolverConfig(cfg.max_iter, cfg.tol_residual, cfg.step0, cfg.seed, cfg.normalize_mode, cfg.positivity, k_nodes)
    if nl.kind == "critical":
        return solve_critical(a, grid, cfg)
    return solve_ground_state(a, nl, grid, cfg)


# ---------------------------------------------------------------------------
# mountain-pass level


@dataclass(frozen=True)
class MountainPassResult:
    level: float
    argmax: float
    endpoint_energy: float
    R: float
    lam: float
    u0: float
    sweeps: int
    knots: np.ndarray = field(repr=False)
    energies: np.ndarray = field(repr=False)
    converged: bool = False
    history: np.ndarray = field(default=None, repr=False)


def _ring_endpoint(grid, a, nl, u0, radii, lambdas):
    """First (R, λ) with J(w_R(λ r, z)) < 0 whose dilated support fits in the grid.

    The dilation formula ½A + λ⁻²B only screens candidates: a resampled ring is not the
    exact dilation of the sampled one, so the sign is confirmed on the resampled field.
    """
    from .functionals import energy_scalar, ring_profile

    Rg, Zg = grid.mesh()
    for R in radii:
        if grid.z_max < R + 1:
            break
        ring = mountain_pass_ring(u0, R, grid, nl, a)
        if not ring.holds:
            continue
        A, B = scaling_parts(ring.w, a, nl)
        for lam in lambdas:
            if (R + 1.0) / lam > grid.r_max or 0.5 * A + B / lam**2 >= 0:
                continue
            vals = ring_profile(lam * Rg, u0, R) * ring_profile(Zg, u0, R)
            vals[grid.boundary_mask()] = 0.0
            w = ScalarField(grid, vals)
            if energy_scalar(w, a, nl).total < 0:
                return R, lam, w
    return None


def _arclength_knots(path, op, m):
    seg = np.sqrt(np.maximum(np.einsum("ij,ij->i", np.diff(path, axis=0), (op.K @ np.diff(path, axis=0).T).T), 0.0))
    s = np.concatenate([[0.0], np.cumsum(seg)])
    target = np.linspace(0.0, s[-1], m + 1)
    out = np.empty((m + 1, path.shape[1]))
    for k, t in enumerate(target):
        j = min(int(np.searchsorted(s, t, side="right")) - 1, m - 1)
        frac = 0.0 if s[j + 1] == s[j] else (t - s[j]) / (s[j + 1] - s[j])
        out[k] = (1.0 - frac) * path[j] + frac * path[j + 1]
    out[0], out[-1] = path[0], path[-1]
    return out


def _batch_J(prob, X):
    """J for each row of X (row sums in a fixed order)."""
    KX = (prob.op.K @ X.T).T
    quad = 0.5 * np.sum(X * KX, axis=1)
    return quad - np.sum(prob.w * prob.nl.F(X, prob.z), axis=1)


def _path_max(prob, path, sub=8):
    """Maximum of J along the polyline; returns (value, path parameter in [0, 1]).

    The best of ``sub`` samples per segment is refined by a bounded scalar search, so
    knots cannot lower the measured maximum by hiding the peak between samples.
    """
    m = path.shape[0] - 1
    th = np.arange(sub) / sub
    X = (path[:-1, None, :] * (1.0 - th)[None, :, None] + path[1:, None, :] * th[None, :, None]).reshape(m * sub, -1)
    X = np.vstack([X, path[-1:]])
    vals = _batch_J(prob, X)
    k = int(np.argmax(vals))
    level, where = float(vals[k]), k / (m * sub)
    width = 1.0 / (m * sub)
    lo, hi = max(where - width, 0.0), min(where + width, 1.0)

    def point(s):
        pos = s * m
        j = min(int(pos), m - 1)
        t = pos - j
        return (1.0 - t) * path[j] + t * path[j + 1]

    opt = minimize_scalar(lambda s: -prob.J(point(s)), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-10 * width})
    if -opt.fun > level:
        level, where = float(-opt.fun), float(opt.x)
    return level, where


def mountain_pass_level_bound(a, nl, grid, cfg=SolverConfig(), u0=1.0, n_knots=32, radii=None,
                              lambdas=None, max_sweeps=3000, tol=1e-6, stall_rtol=1e-8):
    """Upper bound for the mountain-pass level from an optimised piecewise-linear path 0 -> w_R(λ·, ·).

    Each sweep locates the sub-sampled path maximum x* = (1-θ) φ_k + θ φ_(k+1) and moves the
    two adjacent knots by the chain-rule split of the Riesz gradient at x*. A step is kept
    only when the maximum over the neighbouring segments drops (Armijo, halving), so knots
    cannot slide off the ridge. The path is re-parametrised by X-arc length after every sweep.
    """
    check_a(a)
    report = check_assumptions(nl)
    if report.status("F5") != HOLDS:
        raise SolverError(f"mountain-pass bound needs (F5); battery verdict: {report.status('F5')}")
    radii = radii if radii is not None else [3, 4, 5, 6, 8, 10, 12, 16, 20]
    lambdas = lambdas if lambdas is not None else [1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.25, 0.2]
    found = _ring_endpoint(grid, a, nl, u0, radii, lambdas)
    if found is None:
        raise SolverError(
            f"no ring endpoint with negative energy for u0={u0} within R in {list(radii)}: the ring inequality fails for this nonlinearity and budget"
        )
    R, lam, w = found
    prob = Problem(grid, a, nl)
    op = prob.op
    end = op.to_vec(w)
    m = n_knots
    path = np.outer(np.linspace(0.0, 1.0, m + 1), end)
    converged = False
    sweep = 0
    history = []
    step = min(cfg.step0, MAX_STEP)
    for sweep in range(1, max_sweeps + 1):
        level, where = _path_max(prob, path, sub=SUBSAMPLES)
        pos = where * m
        k = min(int(pos), m - 1)
        theta = pos - k
        x_top = (1.0 - theta) * path[k] + theta * path[k + 1]
        psi = _riesz(op, prob.residual(x_top))
        gn2 = max(op.form_vec(psi), 0.0)
        history.append(level)
        # d level / d knot_j = weight_j * J'(x_top); only interior knots move
        weights = {j: wgt for j, wgt in ((k, 1.0 - theta), (k + 1, theta)) if 0 < j < m and wgt > 0}
        lo, hi = max(k - 1, 0), min(k + 3, m + 1)
        s = min(2.0 * step, MAX_STEP)
        accepted = False
        while s >= MIN_STEP:
            trial = path.copy()
            for j, wgt in weights.items():
                trial[j] = path[j] - s * wgt * psi
            local, _ = _path_max(prob, trial[lo:hi], sub=SUBSAMPLES)
            decrease = ARMIJO_C * s * gn2 * sum(wgt**2 for wgt in weights.values())
            if local <= level - decrease:
                path, step, accepted = trial, s, True
                break
            s *= 0.5
        path = _arclength_knots(path, op, m)
        if np.sqrt(gn2) <= tol or not accepted or (
            len(history) > STALL_SWEEPS and abs(history[-STALL_SWEEPS - 1] - history[-1]) <= stall_rtol * abs(history[-1])
        ):
            converged = np.sqrt(gn2) <= tol or accepted
            break
    level, where = _path_max(prob, path, sub=32)
    energies = np.array([prob.J(p) for p in path])
    return MountainPassResult(float(level), float(where), float(energies[-1]), float(R), float(lam), float(u0),
                              sweep, path, energies, converged, np.array(history))
