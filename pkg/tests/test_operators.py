import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from transmission_hjb.errors import ConfigurationError, InfeasibleError, UsageError
from transmission_hjb.operators import (
    FirstOrderOperator,
    SecondOrderOperator,
    SupportFunction,
    eval_first_order,
    eval_second_order,
    hopf_lax,
    pucci_minus,
    pucci_plus,
    support_value,
)

finite = st.floats(-5, 5, allow_nan=False)


def sym(n):
    return arrays(float, (n, n), elements=finite).map(lambda a: (a + a.T) / 2)


def brute_force_pucci(M, lam, Lam, rng, samples=500):
    """Max and min of -tr(A M) over sampled admissible A, including eigenbasis extremes."""
    n = M.shape[0]
    e, Q = np.linalg.eigh(M)
    best_hi, best_lo = -np.inf, np.inf
    for k in range(samples):
        if k < 2 ** n:
            d = np.array([lam if (k >> j) & 1 else Lam for j in range(n)])
        else:
            d = rng.uniform(lam, Lam, n)
        # random rotation for most samples, eigenbasis for the diagonal extremes
        if k < 2 ** n:
            B = Q
        else:
            B, _ = np.linalg.qr(rng.normal(size=(n, n)))
        A = B @ np.diag(d) @ B.T
        val = -np.trace(A @ M)
        best_hi, best_lo = max(best_hi, val), min(best_lo, val)
    return best_hi, best_lo


def test_pucci_zero_matrix():
    assert pucci_plus(np.zeros((2, 2)), 1, 2) == 0
    assert pucci_minus(np.zeros((2, 2)), 1, 2) == 0


def test_pucci_indefinite_diagonal():
    M = np.diag([1.0, -1.0])
    assert pucci_plus(M, 1, 2) == pytest.approx(1.0)
    assert pucci_minus(M, 1, 2) == pytest.approx(-1.0)


def test_pucci_identity():
    assert pucci_plus(np.eye(2), 1, 2) == pytest.approx(-2.0)
    assert pucci_minus(np.eye(2), 1, 2) == pytest.approx(-4.0)


def test_pucci_rejects_nonsymmetric():
    with pytest.raises(ValueError):
        pucci_plus(np.array([[0.0, 1.0], [0.0, 0.0]]), 1, 2)


def test_pucci_rejects_bad_ellipticity():
    with pytest.raises(ValueError):
        pucci_plus(np.eye(2), 2, 1)


@pytest.mark.parametrize("n", [2, 3])
def test_pucci_matches_brute_force(n, rng):
    for _ in range(100):
        M = rng.normal(size=(n, n))
        M = (M + M.T) / 2
        hi, lo = brute_force_pucci(M, 0.5, 1.5, rng)
        assert abs(pucci_plus(M, 0.5, 1.5) - hi) <= 1e-6
        assert abs(pucci_minus(M, 0.5, 1.5) - lo) <= 1e-6


@given(sym(3), st.floats(0.1, 2), st.floats(0, 2))
def test_pucci_antisymmetry_and_order(M, lam, extra):
    Lam = lam + extra
    assert pucci_plus(-M, lam, Lam) == pytest.approx(-pucci_minus(M, lam, Lam), abs=1e-9)
    assert pucci_plus(M, lam, Lam) >= pucci_minus(M, lam, Lam) - 1e-9


@given(sym(2), arrays(float, (2, 2), elements=finite))
def test_second_order_is_degenerate_elliptic(M, G):
    op = SecondOrderOperator(diffusion=0.5, rhs=1.0, lam=0.25, Lam=1.0)
    M2 = M + G @ G.T
    assert op.F(M2, np.zeros(2)) <= op.F(M, np.zeros(2)) + 1e-9
    # Pucci sandwich
    F0 = op.F(np.zeros((2, 2)), np.zeros(2))
    diff = op.F(M2, np.zeros(2)) - op.F(M, np.zeros(2))
    assert pucci_minus(M2 - M, op.lam, op.Lam) - 1e-9 <= diff <= pucci_plus(M2 - M, op.lam, op.Lam) + 1e-9
    assert F0 == 0


@given(st.floats(-3, 3), st.floats(0, 3))
def test_positional_part_increasing(z, d):
    op = SecondOrderOperator(diffusion=0.5, rhs=1.0, zeroth=0.7)
    assert op.f(z + d, np.zeros(2)) >= op.f(z, np.zeros(2))


def test_first_order_examples():
    H = FirstOrderOperator.eikonal()
    assert eval_first_order(H, [1, 0]) == 0
    assert eval_first_order(H, [0.6, 0.8], z=3.0, x=[1, 2]) == pytest.approx(0)
    assert eval_first_order(H, [3, 4]) == pytest.approx(4)


def test_shifted_eikonal_dimension_mismatch():
    H = FirstOrderOperator.shifted_eikonal([0.5, 0])
    with pytest.raises(UsageError):
        H([1.0, 0.0, 0.0])


@given(arrays(float, 2, elements=finite), st.floats(-2, 2), st.floats(0, 2))
def test_eikonal_is_proper_and_bounded(p, z, d):
    H = FirstOrderOperator.eikonal(1.3)
    assert H(p, z + d) >= H(p, z)
    if H(p, z) <= 0.2:
        assert np.linalg.norm(p) <= H.radius_bound(0.2) + 1e-12


def test_second_order_examples():
    op = SecondOrderOperator.half_neg_laplacian()
    assert eval_second_order(op, -2 * np.eye(1), [0]) == pytest.approx(0)
    assert eval_second_order(op, np.zeros((2, 2)), [0, 0]) == pytest.approx(-1)
    assert eval_second_order(op, np.diag([-2.0, -2.0]), [0, 0]) == pytest.approx(1)


def test_second_order_rejects_improper():
    with pytest.raises(ConfigurationError):
        SecondOrderOperator(zeroth=-1.0)


def sampled_support(center, radius, x, k=20000):
    th = np.linspace(0, 2 * np.pi, k, endpoint=False)
    pts = np.asarray(center) + radius * np.stack([np.cos(th), np.sin(th)], axis=1)
    proj = pts @ np.asarray(x)
    return proj.max(), proj.min()


def test_support_values():
    sf = SupportFunction(1, FirstOrderOperator.eikonal())
    assert support_value(sf, [0, -0.3]) == pytest.approx(0.3)
    shifted = SupportFunction(1, FirstOrderOperator.shifted_eikonal([0.5, 0]))
    hi, _ = sampled_support([0.5, 0], 1.0, [1, 0])
    assert support_value(shifted, [1, 0]) == pytest.approx(hi, abs=1e-6)
    assert hi == pytest.approx(1.5, abs=1e-6)
    gapped = SupportFunction(1, FirstOrderOperator.eikonal(), gap=0.25)
    hi, _ = sampled_support([0, 0], 0.75, [1, 0])
    assert support_value(gapped, [1, 0]) == pytest.approx(hi, abs=1e-6)


def test_empty_sublevel_set():
    with pytest.raises(InfeasibleError):
        support_value(SupportFunction(1, FirstOrderOperator.eikonal(), gap=2.0), [1, 0])


def test_custom_operator_matches_analytic():
    # an ellipse |(p1/2, p2)| <= 1, support function sqrt(4 x1^2 + x2^2)
    op = FirstOrderOperator.custom(lambda p, z, x: np.hypot(p[0] / 2, p[1]) - 1,
                                   interior_point=[0, 0], radius_fn=lambda lv, zb: 2 * (1 + lv))
    sp, sm = SupportFunction(1, op), SupportFunction(-1, op)
    for x in ([1, 0], [0, 1], [0.3, -0.7]):
        exact = np.hypot(2 * x[0], x[1])
        assert support_value(sp, x) == pytest.approx(exact, rel=1e-4)
        assert support_value(sm, x) == pytest.approx(-exact, rel=1e-4)


def test_custom_operator_one_dimensional_rays():
    op = FirstOrderOperator.custom(lambda p, z, x: abs(p[0] - 0.5) - 1,
                                   interior_point=[0.5], radius_fn=lambda lv, zb: 1.5 + lv)
    assert support_value(SupportFunction(1, op), [2.0]) == pytest.approx(3.0, abs=1e-8)
    assert support_value(SupportFunction(-1, op), [2.0]) == pytest.approx(-1.0, abs=1e-8)


@given(arrays(float, 2, elements=finite), st.floats(0.01, 10), st.sampled_from([1, -1]))
def test_support_one_homogeneous(x, s, sign):
    sf = SupportFunction(sign, FirstOrderOperator.shifted_eikonal([0.2, -0.4], 1.1))
    assert support_value(sf, s * x) == pytest.approx(s * support_value(sf, x), abs=1e-9)


@given(arrays(float, 2, elements=finite), st.floats(0, 0.5), st.floats(0, 0.4))
def test_support_order_and_gap_monotonicity(x, t1, dt):
    H = FirstOrderOperator.shifted_eikonal([0.3, 0.1])
    t2 = t1 + dt
    plus1, plus2 = SupportFunction(1, H, t1), SupportFunction(1, H, t2)
    minus1, minus2 = SupportFunction(-1, H, t1), SupportFunction(-1, H, t2)
    assert support_value(plus1, x) >= support_value(minus1, x) - 1e-12
    assert support_value(plus1, x) >= support_value(plus2, x) - 1e-12
    assert support_value(minus1, x) <= support_value(minus2, x) + 1e-12
    assert support_value(plus1, [0, 0]) == 0


def test_hopf_lax_zero_data():
    sf = SupportFunction(1, FirstOrderOperator.eikonal())
    res = hopf_lax(lambda y: np.zeros(len(y)), sf, [0, -0.3])
    assert res.value == pytest.approx(0.3, abs=2 * res.spacing)
    assert not res.at_window_edge


def test_hopf_lax_linear_data_touches_at_origin():
    sf = SupportFunction(1, FirstOrderOperator.eikonal())
    res = hopf_lax(lambda y: y[:, 0], sf, [0, 0], spacing=0.01, window=1.0)
    assert res.value == pytest.approx(0.0, abs=1e-12)


def test_hopf_lax_flags_window_edge():
    sf = SupportFunction(1, FirstOrderOperator.eikonal())
    res = hopf_lax(lambda y: -5 * y[:, 0], sf, [0, -0.1], spacing=0.01, window=0.5)
    assert res.at_window_edge


def test_hopf_lax_rejects_upper_side():
    sf = SupportFunction(1, FirstOrderOperator.eikonal())
    with pytest.raises(UsageError):
        hopf_lax(lambda y: np.zeros(len(y)), sf, [0, 0.3])


def test_hopf_lax_below_quadratic_data_extension():
    # data |y|^2 / (2 eps) + p0' y extended off the interface with a normal slope
    # steeper than the eikonal speed dominates the envelope near 0
    eps, p0 = 0.1, np.array([0.4, -2.0])
    sf = SupportFunction(1, FirstOrderOperator.eikonal())
    data = lambda y: y[:, 0] ** 2 / (2 * eps) + p0[0] * y[:, 0]  # noqa: E731
    for x in ([0.0, -0.05], [0.03, -0.02], [-0.04, -0.01], [0.0, 0.0]):
        psi = hopf_lax(data, sf, x, spacing=1e-4, window=0.5).value
        extension = x[0] ** 2 / (2 * eps) + p0 @ np.asarray(x)
        assert psi <= extension + 1e-4
