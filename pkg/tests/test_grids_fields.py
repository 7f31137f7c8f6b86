import numpy as np
import pytest

from cylvar.fieldio import DumpFormatError, read_scalar, read_vector, write_scalar, write_vector
from cylvar.grids import (
    Grid2,
    Grid3,
    ScalarField,
    VectorField3,
    integrate2,
    integrate3,
    refine,
    sample_scalar,
    sample_vector,
)

from conftest import gaussian

GAUSS2 = 0.5 * np.pi * np.sqrt(0.5 * np.pi)
GAUSS_L6 = 2.0 * np.pi / 432.0 * np.sqrt(np.pi / 6.0)


def test_grid2_coordinates_and_weights():
    g = Grid2(8, 9, 4.0, 2.0)
    assert np.allclose(g.r, (np.arange(8) + 0.5) * 0.5)
    assert g.r[0] > 0
    assert np.allclose(g.z, np.linspace(-2, 2, 9))
    w = g.weights
    assert np.isclose(w[3, 4], 2 * np.pi * g.r[3] * g.dr * g.dz)
    assert np.isclose(w[3, 0], 0.5 * w[3, 4]) and np.isclose(w[3, -1], 0.5 * w[3, 4])
    # sum of weights is the cylinder volume pi r^2 * 2 z (midpoint in r exact for r, trapezoid exact in z)
    assert np.isclose(w.sum(), np.pi * 16.0 * 4.0)


@pytest.mark.parametrize("args", [(1, 9), (8, 2), (8.5, 9), (8, 9, -1.0, 1.0)])
def test_grid2_rejects_bad_sizes(args):
    with pytest.raises(ValueError):
        Grid2(*args)


def test_grid3_rejects_bad_sizes():
    with pytest.raises(ValueError):
        Grid3(4)
    with pytest.raises(ValueError):
        Grid3(9, 0.0)


def test_refine():
    assert refine(Grid2(32, 33)) == Grid2(64, 65)
    assert refine(Grid3(33)) == Grid3(65)


def test_sample_scalar_boundary_and_finiteness():
    g = Grid2(32, 65, 6.0, 6.0)
    raw = sample_scalar(gaussian, g, force_boundary=False)
    assert raw.boundary_max() < 1e-12
    assert sample_scalar(gaussian, g).boundary_max() == 0.0
    assert not np.any(sample_scalar(lambda r, z: 0.0 * r, g).values)
    inv = sample_scalar(lambda r, z: 1.0 / r, g, force_boundary=False)
    assert np.all(np.isfinite(inv.values))
    with pytest.raises(ValueError, match="not finite"):
        sample_scalar(lambda r, z: np.full_like(r, np.inf), g)


def test_fields_reject_bad_shape_and_nan():
    g = Grid2(8, 9)
    with pytest.raises(ValueError):
        ScalarField(g, np.zeros((8, 8)))
    vals = np.zeros((8, 9))
    vals[2, 3] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        ScalarField(g, vals)
    with pytest.raises(ValueError):
        VectorField3(Grid3(5), np.zeros((5, 5, 5, 2)))


def test_fields_are_immutable():
    u = ScalarField(Grid2(8, 9), np.zeros((8, 9)))
    with pytest.raises(ValueError):
        u.values[0, 0] = 1.0


def test_integrate2_gaussian_converges_at_second_order():
    errs = []
    for nr in (24, 48, 96):
        g = Grid2(nr, 2 * nr + 1, 6.0, 6.0)
        R, Z = g.mesh()
        errs.append(abs(integrate2(np.exp(-2 * R * R - 2 * Z * Z), g) - GAUSS2))
    assert errs[-1] < 1e-3 * GAUSS2
    assert errs[0] / errs[1] >= 3.0 and errs[1] / errs[2] >= 3.0
    assert integrate2(np.zeros((96, 193)), Grid2(96, 193)) == 0.0


def test_integrate2_sixth_power_moment():
    g = Grid2(96, 193, 6.0, 6.0)
    u = sample_scalar(gaussian, g)
    assert abs(integrate2(u.values**6, g) / GAUSS_L6 - 1.0) < 1e-3


def test_integrate3_gaussian_and_volume():
    g = Grid3(65, 4.0)
    U = sample_vector(lambda x1, x2, x3: (-x2 * np.exp(-(x1**2 + x2**2 + x3**2)), x1 * np.exp(-(x1**2 + x2**2 + x3**2)), 0 * x3), g)
    # ∫ (x1² + x2²) e^{-2|x|²} dx = 2π (1/8) √(π/2); the same number as integrate2 of u² for u = r e^{-r²-z²}
    oracle = 0.25 * np.pi * np.sqrt(0.5 * np.pi)
    vec = integrate3(np.sum(U.values**2, axis=-1), g)
    assert abs(vec / oracle - 1.0) < 1e-3
    g2 = Grid2(96, 193, 4.0, 4.0)
    assert abs(integrate2(sample_scalar(gaussian, g2).values ** 2, g2) / vec - 1.0) < 2e-3
    unit = Grid3(41, 1.0)
    vol = integrate3(np.ones((41, 41, 41)), unit)
    # the zero-weight shell makes the volume (2 - 2h)^3, an O(h) deficit
    assert abs(vol - 8.0) < 12 * unit.h
    assert integrate3(np.zeros((41, 41, 41)), unit) == 0.0
    with pytest.raises(ValueError):
        integrate3(np.ones((5, 5, 5)), unit)


def test_scalar_dump_round_trip(tmp_path):
    g = Grid2(8, 17, 3.0, 2.5)
    u = sample_scalar(gaussian, g)
    write_scalar(u, tmp_path / "u.csv")
    back = read_scalar(tmp_path / "u.csv")
    assert back.grid == g
    assert np.array_equal(back.values, u.values)


def test_vector_dump_round_trip(tmp_path):
    g = Grid3(5, 1.5)
    rng = np.random.default_rng(0)
    U = VectorField3(g, rng.standard_normal((5, 5, 5, 3)))
    write_vector(U, tmp_path / "U.csv")
    back = read_vector(tmp_path / "U.csv")
    assert back.grid == g and np.array_equal(back.values, U.values)


def test_dump_errors(tmp_path):
    g = Grid2(8, 17)
    write_scalar(sample_scalar(gaussian, g), tmp_path / "u.csv")
    lines = (tmp_path / "u.csv").read_text().splitlines()
    (tmp_path / "trunc.csv").write_text("\n".join(lines[:20]) + "\n")
    with pytest.raises(DumpFormatError, match="data rows"):
        read_scalar(tmp_path / "trunc.csv")
    (tmp_path / "bad.csv").write_text("# scalar n=3\n")
    with pytest.raises(DumpFormatError, match="line 1"):
        read_scalar(tmp_path / "bad.csv")
    (tmp_path / "empty.csv").write_text("")
    with pytest.raises(DumpFormatError):
        read_scalar(tmp_path / "empty.csv")


def test_atomic_write_leaves_no_temp_files(tmp_path):
    g = Grid2(8, 17)
    write_scalar(sample_scalar(gaussian, g), tmp_path / "u.csv")
    assert sorted(p.name for p in tmp_path.iterdir()) == ["u.csv"]


def test_interpolant_quadrature_is_exact_for_powers_of_linear_fields():
    from cylvar.grids import interpolant_quadrature

    g = Grid2(16, 33, 4.0, 2.0)
    iq = interpolant_quadrature(g)
    R, Z = g.mesh()
    r_last = g.r[-1]
    # u = r is reproduced exactly by the interpolant, including the odd axis strip
    x = iq.P @ R.ravel()
    exact = 2.0 * np.pi * r_last**8 / 8.0 * (2.0 * g.z_max)
    assert iq.integrate(x**6) == pytest.approx(exact, rel=1e-13)
    # total measure of the covered region
    assert iq.integrate(np.ones_like(x)) == pytest.approx(np.pi * r_last**2 * 2.0 * g.z_max, rel=1e-14)
    # r z is bilinear, so its square integrates exactly too
    rz = iq.P @ (R * Z).ravel()
    exact_rz = 2.0 * np.pi * r_last**4 / 4.0 * 2.0 * g.z_max**3 / 3.0
    assert iq.integrate(rz**2) == pytest.approx(exact_rz, rel=1e-13)
    assert interpolant_quadrature(g) is iq
