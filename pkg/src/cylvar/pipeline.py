"""Solve and sweep pipelines behind the command line: config in, manifest and field dumps out."""
import io
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, kernels
from . import manifest as mf
from .config import ConfigError, validate
from .fieldio import FLOAT_FMT, atomic_write_text, write_scalar, write_vector
from .functionals import Problem, energy_vector
from .grids import Grid2, Grid3, integrate3
from .nonlinearity import Nonlinearity
from .operators import curl3, div3, grad3_sq, lift, x_norm_sq
from .parallel import deterministic, dot, map_ordered
from .solvers import (
    SolverConfig,
    SolverError,
    excited_symmetric_state,
    mountain_pass_level_bound,
    solve_critical,
    solve_ground_state,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_UNCONVERGED = 0, 1, 2, 3
MANIFEST = "manifest.json"
SCALAR_DUMP = "field_scalar.csv"
VECTOR_DUMP = "field_vector.csv"
TIMING = "timing.json"
SWEEP_PARAMS = ("a", "p", "resolution")


@dataclass(frozen=True)
class RunOutcome:
    manifest: dict
    exit_code: int
    out_dir: Path


def build_nonlinearity(cfg):
    if cfg.kind == "critical":
        return Nonlinearity.critical()
    if cfg.kind == "zero":
        return Nonlinearity("zero")
    return Nonlinearity(cfg.kind, cfg.p, cfg.eps_weight, cfg.one_sided)


def build_grids(cfg):
    return Grid2(cfg.nr, cfg.nz, cfg.rmax, cfg.zmax), Grid3(cfg.n3, cfg.L3)


def solver_config(cfg):
    mode = "l6_sphere" if cfg.mode == "critical" else "nehari"
    return SolverConfig(cfg.max_iter, cfg.tol, cfg.step0, cfg.seed, mode, cfg.positivity, cfg.k_nodes)


def config_echo(cfg):
    """{section: {key: value}} in schema order."""
    out = {}
    for key, value in cfg.items():
        section, name = key.split(".", 1)
        out.setdefault(section, {})[name] = value
    return out


def _identity_table(u, U, a):
    """Discrete ||u||², |∇U|² and |∇×U|² of the lifted state, with its divergence."""
    xn = x_norm_sq(u, a)
    gr = integrate3(grad3_sq(U), U.grid)
    cu = integrate3(np.sum(curl3(U).values ** 2, axis=-1), U.grid)
    peak = float(np.max(np.abs(U.values))) or 1.0
    scale = abs(xn) or 1.0
    return [
        {"check": "x_norm_sq", "value": xn},
        {"check": "grad3_integral", "value": gr},
        {"check": "curl3_integral", "value": cu},
        {"check": "grad_vs_x_norm_rel", "value": abs(gr - xn) / scale},
        {"check": "curl_vs_x_norm_rel", "value": abs(cu - xn) / scale},
        {"check": "div3_max_rel", "value": float(np.max(np.abs(div3(U)))) / peak},
    ]


def _solve(cfg, g2, nl):
    """Dispatch on the configured mode; returns (state, SolveResult-like dict, converged, extra)."""
    scfg = solver_config(cfg)
    if cfg.mode == "mountain_pass":
        res = mountain_pass_level_bound(cfg.a, nl, g2, scfg, u0=cfg.u0)
        m = res.knots.shape[0] - 1
        pos = res.argmax * m
        k = min(int(pos), m - 1)
        th = pos - k
        prob = Problem(g2, cfg.a, nl)
        vec = (1.0 - th) * res.knots[k] + th * res.knots[k + 1]
        state = prob.op.to_field(vec)
        psi, _ = prob.op.solve_stiffness(prob.residual(vec), rtol=1e-12)
        extra = {
            "level": res.level, "argmax": res.argmax, "endpoint_energy": res.endpoint_energy,
            "R": res.R, "lambda": res.lam, "u0": res.u0, "sweeps": res.sweeps,
        }
        dual = float(np.sqrt(max(dot(psi, prob.op.K @ psi), 0.0)))
        return state, {"label": "mountain-pass path maximum", "dual": dual, "iterations": res.sweeps,
                       "rayleigh": None, "quadrature": prob.quadrature}, res.converged, extra
    if cfg.k_nodes == 1:
        res = excited_symmetric_state(cfg.a, g2, scfg, 1, nl)
    elif cfg.mode == "critical":
        res = solve_critical(cfg.a, g2, scfg)
    else:
        res = solve_ground_state(cfg.a, nl, g2, scfg)
    info = {"label": res.label, "dual": res.dual_residual, "iterations": res.iterations,
            "rayleigh": res.rayleigh, "quadrature": res.quadrature}
    return res.u, info, res.converged, None


def run_solve(cfg, out_dir=None):
    """Run one configured solve, write manifest and dumps atomically, return the outcome."""
    validate(cfg)
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    start = time.perf_counter()
    g2, g3 = build_grids(cfg)
    nl = build_nonlinearity(cfg)
    state, info, converged, extra = _solve(cfg, g2, nl)
    U = lift(state, g3)
    prob = Problem(g2, cfg.a, nl, quadrature=info["quadrature"])
    jb = prob.energy(prob.op.to_vec(state))
    eb = energy_vector(U, nl)
    elapsed = time.perf_counter() - start
    det = deterministic()
    manifest = {
        "format_version": mf.FORMAT_VERSION,
        "command": "solve",
        "version": __version__,
        "label": info["label"],
        "config": config_echo(cfg),
        "grid": {"scalar": g2.describe(), "vector": g3.describe()},
        "nonlinearity": nl.describe(),
        "nonlinear_quadrature": info["quadrature"],
        "energies": {
            "J": jb.total, "J_quad": jb.quad, "J_nonlinear": jb.nonlinear,
            "E": eb.total, "E_quad": eb.quad, "E_nonlinear": eb.nonlinear,
            "J_minus_E_rel": abs(jb.total - eb.total) / abs(jb.total) if jb.total else None,
        },
        "dual_residual": info["dual"],
        "rayleigh": info["rayleigh"],
        "converged": bool(converged),
        "iterations": int(info["iterations"]),
        "mountain_pass": extra,
        "identities": _identity_table(state, U, cfg.a),
        "seed": cfg.seed,
        "deterministic": det,
        "kernel_backend": kernels.BACKEND,
        "wall_time": None if det else elapsed,
    }
    out.mkdir(parents=True, exist_ok=True)
    write_scalar(state, out / SCALAR_DUMP)
    write_vector(U, out / VECTOR_DUMP)
    if det:
        # timing is kept out of the manifest so deterministic manifests compare byte for byte
        mf.write({"wall_time": elapsed}, out / TIMING)
    mf.write(manifest, out / MANIFEST)
    return RunOutcome(manifest, EXIT_OK if converged else EXIT_UNCONVERGED, out)


# ---------------------------------------------------------------------------
# sweeps


def parse_values(text):
    items = [t.strip() for t in str(text).split(",") if t.strip()]
    if not items:
        raise ConfigError("sweep needs at least one value")
    try:
        return [float(t) for t in items]
    except ValueError as exc:
        raise ConfigError(f"sweep values must be numbers ({exc})") from None


def _sweep_config(cfg, param, value):
    if param == "a":
        return cfg.with_value("problem.a", value)
    if param == "p":
        return cfg.with_value("nonlinearity.p", value)
    if value != int(value) or value < 8:
        raise ConfigError(f"resolution values are radial cell counts >= 8, got {value!r}")
    nr = int(value)
    return cfg.with_value("grid.nr", nr).with_value("grid.nz", 2 * nr + 1)


def _value_label(value):
    return ("%d" % value) if value == int(value) else FLOAT_FMT % value


def run_sweep(cfg, param, values, out_dir=None):
    """One manifest per value plus ``sweep.csv``; returns (rows, exit code)."""
    if param not in SWEEP_PARAMS:
        raise ConfigError(f"unknown sweep parameter {param!r}; choose from {', '.join(SWEEP_PARAMS)}")
    if not values:
        raise ConfigError("sweep needs at least one value")
    base = Path(out_dir if out_dir is not None else cfg.out_dir) / f"sweep_{param}"
    if param == "resolution":
        values = sorted(values)

    def one(value):
        target = base / f"{param}={_value_label(value)}"
        try:
            sub = validate(_sweep_config(cfg, param, value))
            res = run_solve(sub, target)
        except (ConfigError, SolverError, ValueError) as exc:
            return {"param": value, "J": None, "rayleigh": None, "residual": None, "walltime": None,
                    "status": f"failed: {exc}".replace(",", ";")}
        m = res.manifest
        wall = m["wall_time"]
        status = "ok" if res.exit_code == EXIT_OK else "unconverged"
        return {"param": value, "J": m["energies"]["J"], "rayleigh": m["rayleigh"],
                "residual": m["dual_residual"], "walltime": wall, "status": status}

    rows = map_ordered(one, values)
    columns = ["param", "J", "rayleigh", "residual", "walltime", "status"]
    if param == "resolution":
        columns.append("richardson")
        prev = None
        for row in rows:
            row["richardson"] = None
            if prev is not None and row["J"] is not None and prev["J"] is not None:
                ratio = row["param"] / prev["param"]
                row["richardson"] = (row["J"] - prev["J"]) / (ratio**2 - 1.0)
            prev = row
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for row in rows:
        cells = []
        for c in columns:
            v = row[c]
            cells.append("" if v is None else (FLOAT_FMT % v if isinstance(v, float) else str(v)))
        buf.write(",".join(cells) + "\n")
    atomic_write_text(base / "sweep.csv", buf.getvalue())
    failed = any(row["status"] != "ok" for row in rows)
    return rows, EXIT_FAIL if failed else EXIT_OK


def lift_file(src, dst, n3=33, L3=None):
    from .fieldio import read_scalar

    u = read_scalar(src)
    L = u.grid.z_max if L3 is None else L3
    U = lift(u, Grid3(n3, L))
    write_vector(U, dst)
    return U
