import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from protomech import functionals as fn
from protomech import proto

TWO_PI = 2 * np.pi
N = 64
X = np.arange(N) * TWO_PI / N


def ensemble(hbar=1.0, members=None):
    if members is None:
        members = ((1.0, np.sin(X), (1 + 0.5 * np.cos(X)) / TWO_PI),)
    return fn.EmergenceMomentum(tuple(members), hbar=hbar)


def random_ensemble(seed, hbar=0.8):
    rng = np.random.default_rng(seed)
    out = []
    w = rng.dirichlet([1, 1, 1])
    for wi in w:
        a = rng.normal(size=4) * 0.5
        S = a[0] * np.sin(X) + a[1] * np.cos(2 * X)
        rho = np.exp(a[2] * np.cos(X) + a[3] * np.sin(2 * X))
        out.append((wi, S, rho / (rho.sum() * TWO_PI / N)))
    return fn.EmergenceMomentum(tuple(out), hbar=hbar)


# parsing and classification


def test_parse_and_text_round_trip():
    F = fn.parse_functional("2.0 * p^2 + 1.0 * D1p^2")
    assert len(F.terms) == 2
    assert F.terms[0].factors == ((0, 2),)
    again = fn.parse_functional(F.to_text())
    assert again == F


def test_parse_merges_and_scientific():
    F = fn.parse_functional("1e+2 * p * p * x^2 + 3")
    assert F.terms[0].coeff == 100.0
    assert F.terms[0].factors == ((0, 2),)
    assert F.terms[0].x_power == 2
    assert F.terms[1].factors == ()


@pytest.mark.parametrize("bad", ["", "p +", "q^2", "2 * D1p^x", "p ^ 2 ^ 3"])
def test_parse_rejects(bad):
    with pytest.raises(ValueError):
        fn.parse_functional(bad)


@pytest.mark.parametrize("text,order", [("p^2", 1), ("p^2 + D1p^2", 2), ("D3p * p", 4), ("0", 1), ("x^3", 1)])
def test_classify_order(text, order):
    assert fn.classify_order(fn.parse_functional(text)) == order


@given(st.lists(st.integers(0, 5), min_size=1, max_size=4), st.lists(st.integers(0, 5), min_size=1, max_size=4))
def test_order_of_sum_is_max(a, b):
    fa = fn.parse_functional(" + ".join(f"D{d}p^2" for d in a))
    fb = fn.parse_functional(" + ".join(f"D{d}p" for d in b))
    assert fn.classify_order(fa + fb) == max(fn.classify_order(fa), fn.classify_order(fb))


def test_classical_iff_derivatives_irrelevant():
    J = ensemble(0.6)
    for text in ("p^2 + x * p", "p^3", "p^2 + D1p^2", "p * D2p"):
        F = fn.parse_functional(text)
        drop = fn.evaluate(F, J, hbar=0.0)  # D operators vanish at hbar = 0
        same = abs(fn.evaluate(F, J) - drop) <= 1e-14
        assert same == fn.is_classical(F)


# evaluation


def test_constant_functional_is_normalization():
    J = random_ensemble(0)
    assert abs(fn.evaluate(fn.parse_functional("1"), J) - 1) <= 1e-13
    assert abs(fn.normalization(J) - 1) <= 1e-13


def test_linear_momentum():
    J = ensemble(members=((1.0, 3 * X, np.full(N, 1 / TWO_PI)),))
    J = fn.EmergenceMomentum(J.members, windings=(3 * TWO_PI,))
    assert abs(fn.evaluate(fn.parse_functional("p"), J) - 3) <= 1e-12


def test_dp_squared_value():
    J = ensemble(members=((1.0, np.sin(X), np.full(N, 1 / TWO_PI)),))
    assert abs(fn.evaluate(fn.parse_functional("D1p^2"), J) - 0.5) <= 1e-12


def test_dp_squared_against_dense_quadrature():
    xd = np.arange(8192) * TWO_PI / 8192
    hbar = 0.7
    rho_d = (1 + 0.5 * np.cos(xd)) / TWO_PI
    dp_d = -hbar * hbar * np.sin(xd)  # p = hbar cos x
    oracle = float(np.sum(rho_d * dp_d**2) * TWO_PI / 8192)
    assert abs(fn.evaluate(fn.parse_functional("D1p^2"), ensemble(hbar)) - oracle) <= 1e-12


def test_ensemble_validation():
    with pytest.raises(ValueError, match="sum"):
        fn.EmergenceMomentum(((0.5, X, np.ones(N)),))
    with pytest.raises(ValueError):
        fn.EmergenceMomentum(((0.5, X, np.ones(N)), (0.5, X[:10], np.ones(10))))
    with pytest.raises(ValueError):
        fn.EmergenceMomentum(((1.0, X, -np.ones(N)),))
    with pytest.raises(ValueError):
        fn.EmergenceMomentum(())


# variational derivative


def test_variational_examples():
    rho = 1 + 0.5 * np.cos(X)
    p = np.cos(X)
    np.testing.assert_allclose(fn.variational_derivative(fn.parse_functional("p"), rho, p), 1.0, atol=1e-14)
    np.testing.assert_allclose(fn.variational_derivative(fn.parse_functional("0.5 * p^2"), rho, p), p, atol=1e-14)


def test_variational_dp_squared_closed_form():
    from protomech import spectral

    hbar = 0.9
    rho = 1 + 0.5 * np.cos(X)
    p = np.sin(X) + 0.3 * np.cos(2 * X)
    d = lambda f: spectral.derivative(f, TWO_PI)
    want = -(2 * hbar**2 / rho) * d(rho * d(p))
    got = fn.variational_derivative(fn.parse_functional("D1p^2"), rho, p, hbar=hbar)
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_variational_masks_zero_density():
    rho = np.maximum(np.cos(X), 0.0)
    out = fn.variational_derivative(fn.parse_functional("0.5 * p^2"), rho, np.ones(N))
    assert np.all(out[rho == 0] == 0)
    with pytest.raises(ValueError):
        fn.variational_derivative(fn.parse_functional("p"), np.zeros(N), np.ones(N))


CORPUS = ["p", "0.5 * p^2", "D1p^2", "p^3 + x * p", "p * D2p", "D1p^2 * p + D3p^2", "p^2 + D1p^2", "x^2 * D1p * p^2"]


@pytest.mark.parametrize("text", CORPUS)
def test_gateaux_property(text):
    F = fn.parse_functional(text)
    rng = np.random.default_rng(abs(hash(text)) % 2**32)
    hbar = 0.7
    rho = (1 + 0.5 * np.cos(X)) / TWO_PI
    p = hbar * (np.cos(X) - 0.4 * np.sin(2 * X))
    D = fn.variational_derivative(F, rho, p, hbar=hbar)
    for _ in range(20):
        a = rng.normal(size=5)
        dp = a[0] + a[1] * np.sin(X + a[2]) + a[3] * np.cos(2 * X) + a[4] * np.sin(3 * X)
        g = fn.gateaux_derivative(F, rho, p, dp, hbar=hbar)
        assert abs(g - np.sum(rho * dp * D) * TWO_PI / N) <= 1e-6 * (1 + abs(g))


def test_hat_operator_examples():
    rho = 1 + 0.5 * np.cos(X)
    p = np.cos(X)
    X_, U = fn.hat_operator(fn.parse_functional("2.5"), rho, p)
    assert not np.any(X_)
    np.testing.assert_allclose(U, 2.5)
    X_, U = fn.hat_operator(fn.parse_functional("p"), rho, p)
    np.testing.assert_allclose(X_, 1, atol=1e-14)
    np.testing.assert_allclose(U, 0, atol=1e-14)
    X_, U = fn.hat_operator(fn.parse_functional("0.5 * p^2"), rho, p)
    np.testing.assert_allclose(X_, p, atol=1e-14)
    np.testing.assert_allclose(U, -0.5 * p**2, atol=1e-14)


def test_null_lagrangian_examples():
    J = ensemble()
    assert fn.null_lagrangian_residual(fn.parse_functional("1"), J) <= 1e-14
    assert fn.null_lagrangian_residual(fn.parse_functional("0"), J) == 0.0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from(CORPUS))
def test_null_lagrangian_random_ensembles(seed, text):
    J = random_ensemble(seed)
    assert fn.null_lagrangian_residual(fn.parse_functional(text), J) <= 1e-10


# classical limit


def test_classical_limit_ratios():
    J = ensemble(0.8)
    for text, ratio in (("D1p^2", 4.0), ("p^2 + D2p^2", 16.0), ("D1p * D2p", 8.0)):
        a, b = fn.classical_limit_scaling(fn.parse_functional(text), J, [0.8, 0.4])
        assert abs(a / b - ratio) <= 1e-10
    a, b = (fn.evaluate(fn.parse_functional("p^2"), J, hb) for hb in (0.8, 0.4))
    assert abs(a / b - 1.0) <= 1e-14
    assert fn.classical_limit_scaling(fn.parse_functional("p^2"), J, [0.8]) == [0.0]


# normalization along the dynamics


def test_normalization_preserved_by_transport():
    h = proto.kinetic()
    states = [
        proto.ProtoState.from_fields(2 * X, 1 + 0.5 * np.cos(X), winding=2 * TWO_PI),
        proto.ProtoState.from_fields(-X, np.exp(np.sin(X)), winding=-TWO_PI),
    ]
    hist = [proto.run_proto(s, h, 1e-2, 30) for s in states]
    norms = [fn.normalization(fn.EmergenceMomentum.from_states([hh[i] for hh in hist], [0.3, 0.7])) for i in range(31)]
    assert np.ptp(norms) <= 1e-10
    assert abs(norms[0] - 1) <= 1e-13
