"""Nonlinearities f(x, u), their primitives F, the radial vector extension h and an
assumption battery for (F1)-(F5).

All evaluations are vectorised in ``u`` and broadcast against the axial coordinate
``z`` (the weight depends on z only, so every kind is O-invariant and does not
depend on the horizontal variable).
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.special import exp1

KINDS = ("power", "critical", "log_modified", "zero")
CRITICAL_EXPONENT = 6.0

LN2 = np.log(2.0)
# table of the log-modified primitive on [1, TABLE_END]; exact series beyond
TABLE_END = 10.0
TABLE_STEP = 1.0 / 2048
TAIL_TERMS = 24


@dataclass(frozen=True)
class Nonlinearity:
    """Tagged nonlinearity ``f(x, u) = Γ(z) f0(u)`` with ``Γ(z) = 1 + eps_weight sin²(πz)``.

    ``one_sided`` multiplies f by the indicator of ``u >= 0``.
    """

    kind: str
    p: float = None
    eps_weight: float = 0.0
    one_sided: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        if self.kind == "power":
            if self.p is None or not 2.0 < self.p < 6.0:
                raise ValueError(f"power kind needs 2 < p < 6, got p={self.p!r}")
        elif self.kind == "log_modified":
            if self.p is None or not 2.0 <= self.p < 6.0:
                raise ValueError(f"log_modified kind needs 2 <= p < 6, got p={self.p!r}")
        elif self.kind == "critical":
            object.__setattr__(self, "p", CRITICAL_EXPONENT)
        else:
            object.__setattr__(self, "p", None)
        if self.p is not None:
            object.__setattr__(self, "p", float(self.p))
        if not 0.0 <= self.eps_weight <= 0.5:
            raise ValueError(f"eps_weight must lie in [0, 1/2], got {self.eps_weight!r}")
        object.__setattr__(self, "eps_weight", float(self.eps_weight))

    @classmethod
    def power(cls, p, eps_weight=0.0):
        return cls("power", p, eps_weight)

    @classmethod
    def critical(cls):
        return cls("critical")

    @property
    def homogeneous_degree(self):
        """p when ``F(tu) = t^p F(u)`` exactly, else None."""
        if self.kind in ("power", "critical"):
            return self.p
        return None

    def describe(self):
        return {"kind": self.kind, "p": self.p, "eps_weight": self.eps_weight, "one_sided": self.one_sided}

    def weight(self, z):
        z = np.asarray(z, dtype=float)
        if self.eps_weight == 0.0:
            return np.ones_like(z)
        return 1.0 + self.eps_weight * np.sin(np.pi * z) ** 2

    def f(self, u, z=0.0):
        u = np.asarray(u, dtype=float)
        a = np.abs(u)
        if self.kind == "zero":
            val = np.zeros_like(u)
        elif self.kind == "power":
            val = a ** (self.p - 2.0) * u
        elif self.kind == "critical":
            val = a**4 * u
        else:
            val = _log_f(u, self.p)
        if self.one_sided:
            val = np.where(u >= 0, val, 0.0)
        return self.weight(z) * val

    def df(self, u, z=0.0):
        """∂f/∂u (used by the Newton polish of the solvers)."""
        u = np.asarray(u, dtype=float)
        a = np.abs(u)
        if self.kind == "zero":
            val = np.zeros_like(u)
        elif self.kind == "power":
            val = (self.p - 1.0) * a ** (self.p - 2.0)
        elif self.kind == "critical":
            val = 5.0 * a**4
        else:
            val = _log_df(a, self.p)
        if self.one_sided:
            val = np.where(u >= 0, val, 0.0)
        return self.weight(z) * val

    def F(self, u, z=0.0):
        u = np.asarray(u, dtype=float)
        a = np.abs(u)
        if self.kind == "zero":
            val = np.zeros_like(u)
        elif self.kind == "power":
            val = a**self.p / self.p
        elif self.kind == "critical":
            val = a**6 / 6.0
        else:
            val = _log_F(a, self.p)
        if self.one_sided:
            val = np.where(u >= 0, val, 0.0)
        return self.weight(z) * val


def _log_f(u, p):
    a = np.abs(u)
    with np.errstate(divide="ignore", invalid="ignore"):
        small = LN2 * a**4 * u / (1.0 - np.log(a))
        large = a ** (p - 2.0) * u * np.log1p(a)
    out = np.where(a >= 1.0, large, small)
    return np.where(a == 0.0, 0.0, out)


def _log_df(a, p):
    with np.errstate(divide="ignore", invalid="ignore"):
        ell = 1.0 - np.log(a)
        small = LN2 * a**4 * (5.0 / ell + 1.0 / ell**2)
        large = (p - 1.0) * a ** (p - 2.0) * np.log1p(a) + a ** (p - 1.0) / (1.0 + a)
    out = np.where(a >= 1.0, large, small)
    return np.where(a == 0.0, 0.0, out)


def _log_integrand(t, p):
    return t ** (p - 1.0) * np.log1p(t)


def _tail_antiderivative(t, p):
    """Antiderivative of ``t^(p-1) ln(1+t)`` for t > 1 from ln(1+t) = ln t + Σ (-1)^(k+1) t^-k / k."""
    t = np.asarray(t, dtype=float)
    lt = np.log(t)
    out = t**p * (lt / p - 1.0 / p**2)
    for k in range(1, TAIL_TERMS + 1):
        coef = (-1.0) ** (k + 1) / k
        if abs(p - k) < 1e-14:
            out = out + coef * lt
        else:
            out = out + coef * t ** (p - k) / (p - k)
    return out


@lru_cache(maxsize=8)
def _log_table(p):
    """(F(1), Hermite interpolant of F on [1, TABLE_END], F(TABLE_END))."""
    F1 = LN2 * np.exp(6.0) * exp1(6.0)
    nodes = 1.0 + TABLE_STEP * np.arange(int(round((TABLE_END - 1.0) / TABLE_STEP)) + 1)
    gx, gw = np.polynomial.legendre.leggauss(8)
    left, right = nodes[:-1], nodes[1:]
    half = 0.5 * (right - left)
    mid = 0.5 * (right + left)
    pts = mid[:, None] + half[:, None] * gx[None, :]
    panels = half * np.sum(_log_integrand(pts, p) * gw, axis=-1)
    values = F1 + np.concatenate([[0.0], np.cumsum(panels)])
    slopes = _log_integrand(nodes, p)
    return F1, CubicHermiteSpline(nodes, values, slopes), values[-1]


def _log_F(a, p):
    F1, spline, F_end = _log_table(p)
    out = np.zeros_like(a)
    small = (a > 0.0) & (a < 1.0)
    if small.any():
        # ∫_0^a ln2 t^5/(1 - ln t) dt = ln2 e^6 E1(6(1 - ln a))
        out[small] = LN2 * np.exp(6.0) * exp1(6.0 * (1.0 - np.log(a[small])))
    mid = (a >= 1.0) & (a <= TABLE_END)
    if mid.any():
        out[mid] = spline(a[mid])
    big = a > TABLE_END
    if big.any():
        out[big] = F_end + (_tail_antiderivative(a[big], p) - _tail_antiderivative(TABLE_END, p))
    return out


# ---------------------------------------------------------------------------
# pointwise entry points


def eval_f(nl, x, u):
    """f(x, u) with ``x = (r, z)``."""
    return nl.f(u, x[1])


def eval_F(nl, x, u):
    """F(x, u) = ∫_0^u f(x, t) dt with ``x = (r, z)``."""
    return nl.F(u, x[1])


def eval_h(nl, x, U):
    """Radial vector extension ``h(x, U) = f(x, |U|) U/|U|`` (and h(x, 0) = 0); ``x`` in R³."""
    x = np.asarray(x, dtype=float)
    U = np.asarray(U, dtype=float)
    norm = np.linalg.norm(U, axis=-1)
    safe = np.where(norm > 0, norm, 1.0)
    scale = np.where(norm > 0, nl.f(norm, x[..., 2]) / safe, 0.0)
    return scale[..., None] * U


def eval_H(nl, x, U):
    """H(x, U) = F(x, |U|) for the radial extension."""
    x = np.asarray(x, dtype=float)
    return nl.F(np.linalg.norm(np.asarray(U, dtype=float), axis=-1), x[..., 2])


# ---------------------------------------------------------------------------
# assumption battery

HOLDS = "holds_on_samples"
VIOLATED = "violated"
NOT_APPLICABLE = "not_applicable"
INCONCLUSIVE = "inconclusive"

LADDER_EXPONENTS = tuple(range(-8, 9))
TREND_RUNGS = 4
F4_GRID = np.logspace(-8, 8, 2001)
Z_SAMPLES = np.linspace(0.0, 1.0, 9)
F5_LIMIT_MARGIN = 1e-2


@dataclass(frozen=True)
class Verdict:
    status: str
    witness: dict = field(default_factory=dict)
    detail: str = ""


@dataclass(frozen=True)
class AssumptionReport:
    """Verdicts for (F1)-(F5).

    ``F2`` is the limit at infinity, ``F2_zero`` the limit at the origin; the
    original (F2) is their conjunction.
    """

    nonlinearity: dict
    verdicts: dict
    ladder: tuple = tuple(10.0**k for k in LADDER_EXPONENTS)
    thresholds: dict = field(default_factory=dict)
    gamma: float = None

    def status(self, name):
        return self.verdicts[name].status

    def holds(self, name):
        return self.verdicts[name].status == HOLDS

    def rows(self):
        for name, v in self.verdicts.items():
            yield name, v.status, ";".join(f"{k}={val!r}" for k, val in v.witness.items()), v.detail


def _trend(values, increasing):
    """+1 for a strict trend in the requested direction, -1 for the opposite or flat, 0 otherwise."""
    v = -np.asarray(values) if increasing else np.asarray(values)
    if np.all(np.diff(v) < 0):
        return 1
    if v[-1] >= v[0]:
        return -1
    return 0


def _ladder(sign, exps):
    return sign * 10.0 ** np.asarray(exps, dtype=float)


def _check_f2(nl, toward_zero):
    exps = [k for k in LADDER_EXPONENTS if k <= 0][::-1] if toward_zero else [k for k in LADDER_EXPONENTS if k >= 0]
    worst = None
    for sign in (1.0, -1.0):
        u = _ladder(sign, exps)
        ratio = np.max([np.abs(nl.f(u, z)) / np.abs(u) ** 5 for z in Z_SAMPLES], axis=0)
        tail = ratio[-TREND_RUNGS:]
        if np.all(tail == 0.0):
            continue
        t = _trend(tail, increasing=False)
        wit = {"u": float(u[-1]), "ratio": float(ratio[-1])}
        if t == -1:
            return Verdict(VIOLATED, wit, "sup_z |f|/|u|^5 does not decrease over the last ladder rungs")
        if t == 0:
            worst = Verdict(INCONCLUSIVE, wit, "non-monotone trend of |f|/|u|^5")
    return worst or Verdict(HOLDS, {}, "sup_z |f|/|u|^5 strictly decreasing over the last 4 rungs")


def _check_f3(nl):
    exps = [k for k in LADDER_EXPONENTS if k >= 0]
    worst = None
    for sign in (1.0, -1.0):
        u = _ladder(sign, exps)
        ratio = np.min([nl.F(u, z) / u**2 for z in Z_SAMPLES], axis=0)
        tail = ratio[-TREND_RUNGS:]
        t = _trend(tail, increasing=True)
        wit = {"u": float(u[-1]), "ratio": float(ratio[-1])}
        if t == -1:
            return Verdict(VIOLATED, wit, "inf_z F/u^2 does not increase over the last ladder rungs")
        if t == 0:
            worst = Verdict(INCONCLUSIVE, wit, "non-monotone trend of F/u^2")
    return worst or Verdict(HOLDS, {}, "inf_z F/u^2 strictly increasing over the last 4 rungs")


def _check_f4(nl, rtol=1e-12):
    for z in Z_SAMPLES:
        for u in (F4_GRID, -F4_GRID[::-1]):
            q = nl.f(u, z) / np.abs(u)
            drop = np.diff(q) < -rtol * np.maximum(np.abs(q[:-1]), np.abs(q[1:]))
            if drop.any():
                k = int(np.argmax(drop))
                return Verdict(
                    VIOLATED,
                    {"z": float(z), "u": float(u[k]), "u_next": float(u[k + 1])},
                    "f/|u| decreases between consecutive grid points",
                )
    return Verdict(HOLDS, {}, "f/|u| nondecreasing on a 2001-point log grid in [1e-8, 1e8], both signs")


def _f5_gamma(nl):
    """(sampled infimum of f u / F, extrapolated limit at infinity, witness u)."""
    u = np.concatenate([_ladder(1.0, LADDER_EXPONENTS), _ladder(-1.0, LADDER_EXPONENTS)])
    fu = nl.f(u) * u
    F = nl.F(u)
    pos = F > 0
    if not pos.any():
        return None, None, None
    ratio = fu[pos] / F[pos]
    k = int(np.argmin(ratio))
    inf_sample = float(ratio[k])
    # extrapolate ratio(u) = L + c / ln u through the two largest positive rungs
    big = np.array([1e7, 1e8])
    rb = nl.f(big) * big / nl.F(big)
    if np.all(nl.F(big) > 0):
        x = 1.0 / np.log(big)
        limit = float(rb[1] - (rb[1] - rb[0]) / (x[1] - x[0]) * x[1])
    else:
        limit = inf_sample
    return inf_sample, limit, float(u[pos][k])


def _check_f5(nl, gamma):
    u0s = np.concatenate([_ladder(1.0, LADDER_EXPONENTS), _ladder(-1.0, LADDER_EXPONENTS)])
    Fmin = np.min([nl.F(u0s, z) for z in Z_SAMPLES], axis=0)
    if not np.any(Fmin > 0):
        return Verdict(VIOLATED, {"u0": float(u0s[-1]), "F": float(Fmin[-1])}, "no u0 with inf_z F(z,u0) > 0"), None
    inf_sample, limit, wit_u = _f5_gamma(nl)
    # negative F on samples: need f u >= gamma F there too
    u = u0s
    fu = nl.f(u) * u
    F = nl.F(u)
    g_eff = min(inf_sample, limit)
    if gamma is None:
        if g_eff <= 2.0 + F5_LIMIT_MARGIN:
            wit = {"u": 1e8, "ratio_limit": limit, "ratio_inf": inf_sample}
            return Verdict(VIOLATED, wit, "f u / F tends to 2: no gamma > 2 works near infinity"), g_eff
        gamma_test = g_eff
    else:
        if not gamma > 2.0:
            raise ValueError(f"(F5) needs gamma > 2, got {gamma!r}")
        gamma_test = gamma
    bad = fu < gamma_test * F - 1e-12 * gamma_test * np.abs(F)
    if bad.any() or limit < gamma_test * (1.0 - 1e-9):
        k = int(np.argmax(bad)) if bad.any() else len(u) // 2 - 1
        wit = {"u": float(u[k]), "fu": float(fu[k]), "gammaF": float(gamma_test * F[k]), "ratio_limit": limit}
        return Verdict(VIOLATED, wit, f"f u < gamma F with gamma={gamma_test:.6g}"), g_eff
    return Verdict(HOLDS, {"gamma": float(gamma_test)}, "f u >= gamma F on the ladder and in the extrapolated limit"), g_eff


def _check_f1(nl):
    z = np.linspace(-3.0, 3.0, 61)
    if np.any(nl.weight(z + 1.0) != nl.weight(z)):
        # sin² is periodic analytically; rounding of z+1 can move the last bit
        if np.max(np.abs(nl.weight(z + 1.0) - nl.weight(z))) > 1e-14:
            return Verdict(VIOLATED, {"z": float(z[0])}, "weight is not 1-periodic in z")
    u = np.linspace(-5.0, 5.0, 41)
    if not nl.one_sided and np.any(nl.f(-u) != -nl.f(u)):
        return Verdict(VIOLATED, {"u": float(u[0])}, "f is not odd")
    return Verdict(HOLDS, {}, "continuous in u, O-invariant, 1-periodic in z")


def check_assumptions(nl, gamma=None):
    """Run the (F1)-(F5) battery on the ladder u = ±10^k, k = -8..8."""
    f5, g_eff = _check_f5(nl, gamma)
    verdicts = {
        "F1": _check_f1(nl),
        "F2": _check_f2(nl, toward_zero=False),
        "F2_zero": _check_f2(nl, toward_zero=True),
        "F3": _check_f3(nl),
        "F4": _check_f4(nl),
        "F5": f5,
    }
    thresholds = {
        "trend_rungs": TREND_RUNGS,
        "f4_grid_points": int(F4_GRID.size),
        "f5_limit_margin": F5_LIMIT_MARGIN,
    }
    return AssumptionReport(nl.describe(), verdicts, thresholds=thresholds, gamma=g_eff)
