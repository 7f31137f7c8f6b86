import numpy as np
import pytest
from scipy.integrate import quad

from cylvar.nonlinearity import (
    HOLDS,
    VIOLATED,
    Nonlinearity,
    check_assumptions,
    eval_f,
    eval_F,
    eval_h,
)

X = (1.0, 0.3)
KINDS = [
    Nonlinearity.power(4.0),
    Nonlinearity.power(3.5, eps_weight=0.3),
    Nonlinearity.critical(),
    Nonlinearity("log_modified", 3.0),
    Nonlinearity("log_modified", 2.0, eps_weight=0.5),
    Nonlinearity("zero"),
]


def _log_f_reference(t, p):
    a = abs(t)
    if a == 0.0:
        return 0.0
    if a >= 1.0:
        return a ** (p - 2) * t * np.log1p(a)
    return np.log(2.0) * a**4 * t / (1.0 - np.log(a))


@pytest.mark.parametrize("bad", [dict(kind="power", p=2.0), dict(kind="power", p=6.0),
                                 dict(kind="log_modified", p=1.5), dict(kind="power", p=4.0, eps_weight=0.6),
                                 dict(kind="cubic")])
def test_invalid_construction(bad):
    with pytest.raises(ValueError):
        Nonlinearity(**bad)


@pytest.mark.parametrize("nl", KINDS)
def test_zero_and_oddness(nl):
    assert eval_f(nl, X, 0.0) == 0.0
    assert eval_F(nl, X, 0.0) == 0.0
    u = np.linspace(-7.0, 7.0, 57)
    np.testing.assert_array_equal(eval_f(nl, X, -u), -eval_f(nl, X, u))


def test_pointwise_examples():
    assert eval_f(Nonlinearity.critical(), X, 2.0) == 32.0
    assert eval_F(Nonlinearity.critical(), X, 1.0) == pytest.approx(1.0 / 6.0, rel=1e-15)
    nl = Nonlinearity("log_modified", 3.0)
    # both branches give ln 2 at the seam
    assert eval_f(nl, X, 1.0) == pytest.approx(np.log(2.0), rel=1e-15)
    below = eval_f(nl, X, 1.0 - 1e-12)
    assert below == pytest.approx(np.log(2.0), rel=1e-10)


@pytest.mark.parametrize("p", [2.0, 3.0, 4.5])
def test_log_primitive_matches_quadrature(p):
    nl = Nonlinearity("log_modified", p)
    for u in (0.3, 1.0, 2.0, 7.5, 25.0):
        ref = quad(_log_f_reference, 0.0, min(u, 1.0), args=(p,), epsabs=1e-15, epsrel=1e-13, limit=200)[0]
        if u > 1.0:
            ref += quad(_log_f_reference, 1.0, u, args=(p,), epsabs=1e-15, epsrel=1e-13, limit=200)[0]
        got = float(eval_F(nl, (1.0, 0.0), u))
        assert abs(got - ref) <= 1e-12 * max(1.0, abs(ref)), (u, got, ref)


@pytest.mark.parametrize("nl", KINDS[:5])
def test_primitive_derivative_is_f(nl):
    u = np.concatenate([np.linspace(-10.0, -0.05, 80), np.linspace(0.05, 10.0, 80)])
    h = 1e-5 * np.maximum(1.0, np.abs(u))
    fd = (eval_F(nl, X, u + h) - eval_F(nl, X, u - h)) / (2 * h)
    f = eval_f(nl, X, u)
    np.testing.assert_allclose(fd, f, rtol=1e-6, atol=1e-10)


def test_weight_periodic_and_bounded():
    nl = Nonlinearity.power(4.0, eps_weight=0.5)
    z = np.linspace(-2.0, 2.0, 41)
    np.testing.assert_allclose(nl.weight(z + 1.0), nl.weight(z), rtol=0, atol=1e-15)
    w = nl.weight(np.linspace(0, 1, 1001))
    assert w.min() >= 1.0 and w.max() <= 1.5


def test_battery_critical_flags_f2_with_witness():
    rep = check_assumptions(Nonlinearity.critical())
    v = rep.verdicts["F2"]
    assert v.status == VIOLATED
    assert v.witness["ratio"] == pytest.approx(1.0)


def test_battery_power_four():
    rep = check_assumptions(Nonlinearity.power(4.0), gamma=4.0)
    for name in ("F1", "F2", "F3", "F4", "F5"):
        assert rep.holds(name), (name, rep.verdicts[name])
    # f/|u|^5 = |u|^-2 blows up at the origin: pure powers miss the small-u half of the limit
    assert rep.status("F2_zero") == VIOLATED


def test_log_modified_decays_at_origin():
    rep = check_assumptions(Nonlinearity("log_modified", 3.0))
    assert rep.holds("F2_zero") and rep.holds("F2") and rep.holds("F4")


def test_battery_log_modified_f5_threshold():
    assert check_assumptions(Nonlinearity("log_modified", 2.0)).status("F5") == VIOLATED
    assert check_assumptions(Nonlinearity("log_modified", 2.0), gamma=2.1).status("F5") == VIOLATED
    rep = check_assumptions(Nonlinearity("log_modified", 3.0))
    assert rep.status("F5") == HOLDS
    assert rep.gamma > 2.0


def test_battery_rejects_gamma_not_above_two():
    with pytest.raises(ValueError):
        check_assumptions(Nonlinearity.power(4.0), gamma=2.0)


def test_violations_carry_witnesses():
    for nl in KINDS:
        rep = check_assumptions(nl)
        for name, status, witness, _ in rep.rows():
            if status == VIOLATED:
                assert witness, (nl, name)


def test_h_examples_and_consistency():
    crit = Nonlinearity.critical()
    x = np.array([0.2, -0.4, 0.7])
    np.testing.assert_array_equal(eval_h(crit, x, np.zeros(3)), np.zeros(3))
    np.testing.assert_array_equal(eval_h(crit, x, np.array([0.0, 2.0, 0.0])), [0.0, 32.0, 0.0])
    rng = np.random.default_rng(5)
    nl = Nonlinearity("log_modified", 3.0, eps_weight=0.2)
    for _ in range(20):
        w = rng.standard_normal(3)
        w /= np.linalg.norm(w)
        alpha = rng.uniform(0.01, 5.0)
        got = eval_h(nl, x, alpha * w) @ w
        assert got == pytest.approx(float(nl.f(alpha, x[2])), rel=1e-14)


def test_h_equivariant_under_orthogonal_maps():
    from scipy.stats import ortho_group

    nl = Nonlinearity.power(3.5, eps_weight=0.4)
    rng = np.random.default_rng(11)
    x = np.array([0.3, 0.1, 0.45])
    gs = ortho_group.rvs(3, size=100, random_state=rng)
    U = rng.standard_normal(3) * 1.7
    hU = eval_h(nl, x, U)
    for g in gs:
        np.testing.assert_allclose(eval_h(nl, x, g @ U), g @ hU, rtol=1e-13, atol=1e-13)
