import json

import numpy as np
import pytest

from cylvar import manifest as mf
from cylvar.config import SCHEMA, Config, ConfigError, load, parse_text
from cylvar.fieldio import DumpFormatError, read_scalar, read_vector, write_scalar, write_vector
from cylvar.grids import Grid3, sample_scalar, sample_vector

from conftest import gaussian

GOOD = """
# subcritical ground state
problem.a = 2
problem.mode = subcritical
nonlinearity.kind = power
nonlinearity.p = 3.5   # inline comment
grid.nr = 16
grid.nz = 33
solver.positivity = yes
output.dir = runs/x
"""


def test_parse_good_config():
    cfg = parse_text(GOOD)
    assert cfg.a == 2.0 and cfg.p == 3.5 and cfg.nr == 16 and cfg.nz == 33
    assert cfg.positivity is True and cfg.out_dir == "runs/x"
    # untouched keys keep their defaults
    assert cfg.max_iter == Config().max_iter and cfg.L3 == Config().L3


def test_text_round_trip():
    cfg = parse_text(GOOD)
    assert parse_text(cfg.text()) == cfg
    assert [k for k, _ in cfg.items()] == list(SCHEMA)


def test_negative_a_names_the_line():
    with pytest.raises(ConfigError, match=r"line 2: problem.a: a>0 required for K=2"):
        parse_text("grid.nr = 16\nproblem.a = -1\n")


@pytest.mark.parametrize(
    "text, pattern",
    [
        ("problem.a = 1\nbogus.key = 3\n", r"line 2: unknown key 'bogus.key'"),
        ("grid.nr = 16\ngrid.nr = 32\n", r"line 2: duplicate key 'grid.nr' \(first set on line 1\)"),
        ("problem.a 1\n", r"line 1: expected 'section.key = value'"),
        ("grid.nr = 16.5\n", r"line 1: grid.nr: expected an integer"),
        ("solver.positivity = maybe\n", r"line 1: solver.positivity: expected a boolean"),
        ("nonlinearity.p = 6\n", r"line 1: nonlinearity.p: power kind needs 2<p<6"),
        ("\n\ngrid.nr = 4\n", r"line 3: grid.nr: grid size must be >= 8"),
        ("grid.nz = 64\n", r"line 1: grid.nz: must be odd"),
        ("problem.mode = critical\n", r"nonlinearity.kind: critical mode needs kind = critical"),
        ("solver.k_nodes = 1\nsolver.positivity = true\n", r"line 2: solver.positivity: positivity is incompatible"),
    ],
)
def test_config_errors(text, pattern):
    with pytest.raises(ConfigError, match=pattern):
        parse_text(text)


def test_load_reports_path(tmp_path):
    missing = tmp_path / "nope.cfg"
    with pytest.raises(ConfigError, match="cannot read config"):
        load(missing)
    path = tmp_path / "bad.cfg"
    path.write_text("problem.a = 0\n", encoding="utf-8")
    with pytest.raises(ConfigError, match=f"{path}: line 1"):
        load(path)


def test_manifest_floats_and_order():
    obj = {"z": 0.1, "a": [1, 2.5, None], "inf": float("inf"), "flag": np.bool_(True), "n": np.int64(3),
           "nested": {"pi": np.pi, "empty": {}, "list": []}}
    text = mf.dumps(obj)
    assert '"z": 0.10000000000000001' in text
    assert '"pi": 3.1415926535897931' in text
    assert list(json.loads(text)) == ["z", "a", "inf", "flag", "n", "nested"]
    back = json.loads(text)
    assert back["inf"] is None and back["flag"] is True and back["n"] == 3
    assert back["z"] == 0.1 and back["nested"]["pi"] == np.pi
    with pytest.raises(TypeError):
        mf.dumps({"bad": object()})


def test_manifest_write_read_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    obj = {"values": list(rng.standard_normal(50)), "format_version": mf.FORMAT_VERSION}
    path = tmp_path / "sub" / "m.json"
    mf.write(obj, path)
    assert mf.read(path) == obj
    # the temp file is renamed away
    assert [p.name for p in path.parent.iterdir()] == ["m.json"]


def test_field_dumps_round_trip(tmp_path, gauss_small):
    write_scalar(gauss_small, tmp_path / "u.csv")
    back = read_scalar(tmp_path / "u.csv")
    assert back.grid == gauss_small.grid
    np.testing.assert_array_equal(back.values, gauss_small.values)
    g3 = Grid3(9, 2.0)
    U = sample_vector(lambda a, b, c: (a * b, np.sin(c), a - c), g3)
    write_vector(U, tmp_path / "U.csv")
    back3 = read_vector(tmp_path / "U.csv")
    np.testing.assert_array_equal(back3.values, U.values)


def test_field_dump_errors(tmp_path, small_grid):
    u = sample_scalar(gaussian, small_grid)
    path = tmp_path / "u.csv"
    write_scalar(u, path)
    lines = path.read_text().splitlines()
    (tmp_path / "short.csv").write_text("\n".join(lines[:-5]) + "\n")
    with pytest.raises(DumpFormatError, match="data rows"):
        read_scalar(tmp_path / "short.csv")
    (tmp_path / "head.csv").write_text("# scalar nr=x\n" + "\n".join(lines[1:]))
    with pytest.raises(DumpFormatError, match="line 1"):
        read_scalar(tmp_path / "head.csv")
    (tmp_path / "empty.csv").write_text("")
    with pytest.raises(DumpFormatError, match="empty"):
        read_scalar(tmp_path / "empty.csv")
    with pytest.raises(DumpFormatError, match="vector header"):
        read_vector(path)
