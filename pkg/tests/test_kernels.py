"""The compiled kernels must agree with the numpy fallback."""
import os
import subprocess
import sys

import numpy as np
import pytest

from cylvar import _kernels_py, kernels

try:
    from cylvar import _kernels as compiled
except ImportError:  # pragma: no cover
    compiled = None

needs_ext = pytest.mark.skipif(compiled is None, reason="compiled extension not built")


def _data(n=9, c=3, seed=0):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, n, n, c)), -2.0, 0.5


def test_trilinear_reproduces_nodes_and_linear_fields():
    values, lo, h = _data()
    n = values.shape[0]
    idx = np.array([[0, 0, 0], [3, 4, 5], [n - 1, n - 1, n - 1]])
    out = kernels.trilinear(values, lo, h, lo + h * idx)
    assert np.allclose(out, values[idx[:, 0], idx[:, 1], idx[:, 2]])
    x = lo + h * np.arange(n)
    X = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1)
    lin = (X @ np.array([1.0, -2.0, 0.5]))[..., None]
    pts = np.random.default_rng(1).uniform(lo, lo + h * (n - 1), (50, 3))
    assert np.allclose(kernels.trilinear(lin, lo, h, pts)[:, 0], pts @ np.array([1.0, -2.0, 0.5]))


def test_trilinear_zero_outside():
    values, lo, h = _data()
    out = kernels.trilinear(values, lo, h, np.array([[100.0, 0.0, 0.0], [0.0, -2.5, 0.0]]))
    assert not np.any(out)


def test_rotate_pullback_identity_angle():
    values, lo, h = _data()
    assert np.allclose(kernels.rotate_pullback(values, lo, h, 0.0), values)


@needs_ext
def test_compiled_trilinear_matches_python():
    values, lo, h = _data(seed=3)
    pts = np.random.default_rng(4).uniform(-3.0, 3.0, (500, 3))
    a = compiled.trilinear(values, lo, h, pts)
    b = _kernels_py.trilinear(values, lo, h, pts)
    assert np.allclose(a, b, rtol=0, atol=1e-13)


@needs_ext
@pytest.mark.parametrize("alpha", [0.3, np.pi / 2, 2.0])
def test_compiled_rotate_pullback_matches_python(alpha):
    values, lo, h = _data(seed=5)
    a = compiled.rotate_pullback(values, lo, h, alpha)
    b = _kernels_py.rotate_pullback(values, lo, h, alpha)
    assert np.allclose(a, b, rtol=0, atol=1e-13)


def test_pure_fallback_selected_by_env():
    env = dict(os.environ, CYLVAR_PURE="1")
    out = subprocess.run([sys.executable, "-c", "from cylvar import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
