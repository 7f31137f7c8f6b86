"""Flat ``section.key = value`` run configuration with line-level validation."""
from dataclasses import dataclass, replace
from pathlib import Path

MODES = ("subcritical", "critical", "mountain_pass")
KINDS = ("power", "critical", "log_modified", "zero")
MIN_GRID = 8


class ConfigError(ValueError):
    pass


def _int(text):
    value = float(text)
    if value != int(value):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(value)


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


# key -> (parser, default); None as default means "required" for a and kind only
SCHEMA = {
    "problem.a": (float, 1.0),
    "problem.mode": (str, "subcritical"),
    "problem.u0": (float, 1.0),
    "nonlinearity.kind": (str, "power"),
    "nonlinearity.p": (float, 4.0),
    "nonlinearity.eps_weight": (float, 0.0),
    "nonlinearity.one_sided": (_bool, False),
    "grid.nr": (_int, 64),
    "grid.nz": (_int, 129),
    "grid.rmax": (float, 12.0),
    "grid.zmax": (float, 12.0),
    "grid.n3": (_int, 33),
    "grid.L3": (float, 6.0),
    "solver.max_iter": (_int, 500),
    "solver.tol": (float, 1e-8),
    "solver.step0": (float, 1.0),
    "solver.seed": (_int, 0),
    "solver.positivity": (_bool, False),
    "solver.k_nodes": (_int, 0),
    "output.dir": (str, "out"),
}


@dataclass(frozen=True)
class Config:
    a: float = 1.0
    mode: str = "subcritical"
    u0: float = 1.0
    kind: str = "power"
    p: float = 4.0
    eps_weight: float = 0.0
    one_sided: bool = False
    nr: int = 64
    nz: int = 129
    rmax: float = 12.0
    zmax: float = 12.0
    n3: int = 33
    L3: float = 6.0
    max_iter: int = 500
    tol: float = 1e-8
    step0: float = 1.0
    seed: int = 0
    positivity: bool = False
    k_nodes: int = 0
    out_dir: str = "out"

    def items(self):
        """(dotted key, value) pairs in schema order, as echoed in manifests."""
        return [(key, getattr(self, _attr(key))) for key in SCHEMA]

    def with_value(self, key, value):
        return replace(self, **{_attr(key): value})

    def text(self):
        lines = []
        for key, value in self.items():
            if isinstance(value, bool):
                value = "true" if value else "false"
            elif isinstance(value, float):
                value = "%.17g" % value
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"


def _attr(key):
    return "out_dir" if key == "output.dir" else key.split(".", 1)[1]



def validate(cfg, lines=None):
    """Raise :class:`ConfigError` naming the offending line for any inconsistent setting."""
    lines = lines or {}

    def fail(key, msg):
        where = f"line {lines[key]}: " if key in lines else ""
        raise ConfigError(f"{where}{key}: {msg}")

    if not cfg.a > 0:
        fail("problem.a", f"a>0 required for K=2 (the singular potential a/r² must be positive), got {cfg.a!r}")
    if cfg.mode not in MODES:
        fail("problem.mode", f"must be one of {', '.join(MODES)}, got {cfg.mode!r}")
    if not cfg.u0 > 0:
        fail("problem.u0", "ring height u0 must be positive")
    if cfg.kind not in KINDS:
        fail("nonlinearity.kind", f"must be one of {', '.join(KINDS)}, got {cfg.kind!r}")
    if cfg.kind == "power" and not 2.0 < cfg.p < 6.0:
        fail("nonlinearity.p", f"power kind needs 2<p<6, got {cfg.p!r}")
    if cfg.kind == "log_modified" and not 2.0 <= cfg.p < 6.0:
        fail("nonlinearity.p", f"log_modified kind needs 2<=p<6, got {cfg.p!r}")
    if not 0.0 <= cfg.eps_weight <= 0.5:
        fail("nonlinearity.eps_weight", f"must lie in [0, 0.5], got {cfg.eps_weight!r}")
    if cfg.mode == "critical" and cfg.kind != "critical":
        fail("nonlinearity.kind", "critical mode needs kind = critical")
    if cfg.mode == "subcritical" and cfg.kind in ("critical", "zero"):
        fail("nonlinearity.kind", f"subcritical mode cannot use kind = {cfg.kind}")
    for key in ("grid.nr", "grid.n3"):
        if getattr(cfg, _attr(key)) < MIN_GRID:
            fail(key, f"grid size must be >= {MIN_GRID}")
    if cfg.nz < MIN_GRID or cfg.nz % 2 == 0:
        fail("grid.nz", f"must be odd and >= {MIN_GRID} (a node on z = 0), got {cfg.nz}")
    if cfg.n3 % 2 == 0:
        fail("grid.n3", f"must be odd (a node at the origin), got {cfg.n3}")
    for key in ("grid.rmax", "grid.zmax", "grid.L3"):
        if not getattr(cfg, _attr(key)) > 0:
            fail(key, "must be positive")
    if cfg.max_iter < 1:
        fail("solver.max_iter", "must be >= 1")
    if not cfg.tol > 0:
        fail("solver.tol", "must be positive")
    if not cfg.step0 > 0:
        fail("solver.step0", "must be positive")
    if cfg.seed < 0:
        fail("solver.seed", "must be >= 0")
    if cfg.k_nodes not in (0, 1):
        fail("solver.k_nodes", f"must be 0 or 1, got {cfg.k_nodes}")
    if cfg.positivity and cfg.k_nodes == 1:
        fail("solver.positivity", "positivity is incompatible with the odd-in-z state (k_nodes = 1)")
    return cfg


def parse_text(text, source="<config>"):
    values, lines = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}: line {lineno}: expected 'section.key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{source}: line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}: line {lineno}: duplicate key {key!r} (first set on line {lines[key]})")
        parser = SCHEMA[key][0]
        try:
            values[key] = parser(value)
        except ValueError as exc:
            raise ConfigError(f"{source}: line {lineno}: {key}: {exc}") from None
        lines[key] = lineno
    cfg = Config(**{_attr(k): v for k, v in values.items()})
    try:
        return validate(cfg, lines)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: cannot read config ({exc})") from None
    return parse_text(text, str(path))
