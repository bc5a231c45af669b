import numpy as np
import pytest

from lqdemix.prox import (
    fractional_constants,
    lq_penalty,
    lq_row_penalty,
    prox_group,
    prox_group_rows,
    prox_scalar,
    prox_vector,
)


def scalar_objective(x, t, q, eta):
    pen = float(x != 0.0) if q == 0.0 else np.abs(x) ** q
    return pen + 0.5 * eta * (x - t) ** 2


def grid_min_objective(t, q, eta, points=100_001):
    # dumb global scan over [-|t|, |t|]; independent of the Newton path
    grid = np.linspace(-abs(t), abs(t), points)
    pen = (grid != 0.0).astype(float) if q == 0.0 else np.abs(grid) ** q
    return float(np.min(pen + 0.5 * eta * (grid - t) ** 2))


def bisect_stationarity(t, q, eta, iters=200):
    # root of h(z) = q z^(q-1) + eta z - eta |t| on (beta, |t|)
    beta, _ = fractional_constants(q, eta)
    lo, hi = beta, abs(t)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if q * mid ** (q - 1.0) + eta * mid - eta * abs(t) < 0.0:
            lo = mid
        else:
            hi = mid
    return np.sign(t) * 0.5 * (lo + hi)


def group_objective(x, t, q, eta):
    nx = np.linalg.norm(x)
    pen = float(nx != 0.0) if q == 0.0 else nx**q
    return pen + 0.5 * eta * np.linalg.norm(np.asarray(x) - np.asarray(t)) ** 2


def group_alpha_oracle(t, q, eta, points=1_000_001):
    # brute-force scan over scalings alpha*t, alpha in [0, 1]
    r = np.linalg.norm(t)
    alpha = np.linspace(0.0, 1.0, points)
    pen = (alpha != 0.0).astype(float) if q == 0.0 else (r * alpha) ** q
    obj = pen + 0.5 * eta * r**2 * (alpha - 1.0) ** 2
    return alpha[int(np.argmin(obj))], float(np.min(obj))


class TestScalar:
    def test_hard_threshold_below(self):
        assert prox_scalar(0.5, q=0.0, eta=2.0) == 0.0

    def test_hard_threshold_above(self):
        assert prox_scalar(1.5, q=0.0, eta=2.0) == 1.5

    def test_hard_threshold_tie_resolves_to_zero(self):
        assert prox_scalar(1.0, q=0.0, eta=2.0) == 0.0

    def test_soft_threshold_closed_form(self):
        assert prox_scalar(3.0, q=1.0, eta=2.0) == 2.5
        assert prox_scalar(-3.0, q=1.0, eta=2.0) == -2.5
        assert prox_scalar(0.4, q=1.0, eta=2.0) == 0.0

    def test_fractional_constants(self):
        beta, tau = fractional_constants(q=0.5, eta=1.0)
        assert beta == pytest.approx(1.0)
        assert tau == pytest.approx(1.5)

    def test_fractional_matches_bisection(self):
        # q=0.5, eta=1, t=2: root of z + 0.5 z^(-1/2) = 2 on (1, 2)
        z = prox_scalar(2.0, q=0.5, eta=1.0)
        z_ref = bisect_stationarity(2.0, q=0.5, eta=1.0)
        assert z == pytest.approx(z_ref, abs=1e-10)
        assert z == pytest.approx(1.6054, abs=1e-4)
        # the stationary point is the global minimizer
        assert scalar_objective(z, 2.0, 0.5, 1.0) <= grid_min_objective(2.0, 0.5, 1.0) + 1e-8

    def test_fractional_tie_resolves_to_zero(self):
        _, tau = fractional_constants(q=0.5, eta=1.0)
        assert prox_scalar(tau, q=0.5, eta=1.0) == 0.0
        assert prox_scalar(np.nextafter(tau, 0.0), q=0.5, eta=1.0) == 0.0

    def test_odd_symmetry_and_shrinkage(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            t = rng.uniform(-10.0, 10.0)
            q = rng.choice([0.0, 0.2, 0.5, 2.0 / 3.0, 0.9, 1.0])
            eta = rng.uniform(0.1, 100.0)
            x = prox_scalar(t, q, eta)
            assert x == pytest.approx(-prox_scalar(-t, q, eta), abs=1e-14)
            assert abs(x) <= abs(t) + 1e-14

    def test_monotone_on_positive_axis(self):
        # nondecreasing away from the tie point
        for q in (0.0, 0.3, 0.5, 0.8, 1.0):
            ts = np.linspace(0.0, 6.0, 301)
            xs = np.array([prox_scalar(t, q, eta=1.7) for t in ts])
            assert np.all(np.diff(xs) >= -1e-10)

    def test_randomized_grid_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            t = rng.uniform(-10.0, 10.0)
            q = rng.choice([0.0, 0.2, 0.5, 2.0 / 3.0, 0.9, 1.0])
            eta = rng.uniform(0.1, 100.0)
            x = prox_scalar(t, q, eta)
            assert scalar_objective(x, t, q, eta) <= grid_min_objective(t, q, eta) + 1e-8

    def test_invalid_parameters(self):
        with pytest.raises(ValueError):
            prox_scalar(1.0, q=1.5, eta=1.0)
        with pytest.raises(ValueError):
            prox_scalar(1.0, q=-0.1, eta=1.0)
        with pytest.raises(ValueError):
            prox_scalar(1.0, q=0.5, eta=0.0)


class TestVector:
    def test_elementwise_soft(self):
        out = prox_vector(np.array([0.5, 3.0]), q=1.0, eta=2.0)
        np.testing.assert_allclose(out, [0.0, 2.5])

    def test_zero_vector(self):
        for q in (0.0, 0.5, 1.0):
            out = prox_vector(np.zeros(5), q=q, eta=3.0)
            np.testing.assert_array_equal(out, np.zeros(5))

    def test_matches_scalar(self):
        rng = np.random.default_rng(3)
        t = rng.uniform(-10, 10, size=50)
        for q in (0.0, 0.2, 0.5, 1.0):
            out = prox_vector(t, q, eta=2.3)
            ref = np.array([prox_scalar(ti, q, 2.3) for ti in t])
            np.testing.assert_array_equal(out, ref)

    def test_odd_symmetry_fractional(self):
        out = prox_vector(np.array([2.0, -2.0]), q=0.5, eta=1.0)
        assert out[0] == pytest.approx(1.6054, abs=1e-4)
        assert out[1] == -out[0]

    def test_matrix_input(self):
        t = np.array([[3.0, -3.0], [0.1, 0.0]])
        out = prox_vector(t, q=1.0, eta=2.0)
        np.testing.assert_allclose(out, [[2.5, -2.5], [0.0, 0.0]])


class TestGroup:
    def test_zero_input(self):
        np.testing.assert_array_equal(prox_group(np.zeros(4), q=0.5, eta=1.0), np.zeros(4))

    def test_q1_block_soft_threshold(self):
        out = prox_group(np.array([3.0, 4.0]), q=1.0, eta=1.0)
        np.testing.assert_allclose(out, [2.4, 3.2], rtol=1e-15)

    def test_q0_norm_threshold(self):
        t = np.array([0.9, 0.0])
        assert np.linalg.norm(t) < np.sqrt(2.0 / 2.0) + 1e-12
        np.testing.assert_array_equal(prox_group(t, q=0.0, eta=2.0), np.zeros(2))
        t2 = np.array([1.2, 0.0])
        np.testing.assert_array_equal(prox_group(t2, q=0.0, eta=2.0), t2)

    def test_fractional_matches_alpha_oracle(self):
        t = np.array([2.0, 0.0])
        out = prox_group(t, q=0.5, eta=1.0)
        alpha_ref, obj_ref = group_alpha_oracle(t, q=0.5, eta=1.0)
        assert out[1] == 0.0
        assert out[0] / t[0] == pytest.approx(alpha_ref, abs=1e-5)
        assert group_objective(out, t, 0.5, 1.0) <= obj_ref + 1e-8

    def test_randomized_alpha_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            ell = int(rng.integers(1, 9))
            t = rng.normal(0.0, 3.0, size=ell)
            q = rng.choice([0.0, 0.2, 0.5, 0.9, 1.0])
            eta = rng.uniform(0.1, 30.0)
            out = prox_group(t, q, eta)
            _, obj_ref = group_alpha_oracle(t, q, eta, points=100_001)
            assert group_objective(out, t, q, eta) <= obj_ref + 1e-8

    def test_output_parallel_to_input(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            t = rng.normal(size=int(rng.integers(1, 9)))
            out = prox_group(t, q=float(rng.uniform(0, 1)), eta=float(rng.uniform(0.1, 10)))
            proj = (out @ t) / (t @ t) * t
            assert np.linalg.norm(out - proj) <= 1e-12

    def test_group_of_one_matches_elementwise(self):
        rng = np.random.default_rng(13)
        for _ in range(100):
            t = float(rng.uniform(-5, 5))
            q = float(rng.choice([0.0, 0.3, 0.5, 1.0]))
            eta = float(rng.uniform(0.1, 10.0))
            g = prox_group(np.array([t]), q, eta)[0]
            e = prox_vector(np.array([t]), q, eta)[0]
            assert g == pytest.approx(e, abs=1e-12)

    def test_rows_match_per_row(self):
        rng = np.random.default_rng(17)
        t = rng.normal(size=(6, 3))
        for q in (0.0, 0.4, 1.0):
            rows = prox_group_rows(t, q, eta=0.8)
            ref = np.vstack([prox_group(t[i], q, 0.8) for i in range(6)])
            np.testing.assert_allclose(rows, ref, atol=1e-14)

    def test_tiny_norm_guard(self):
        t = np.full(3, 1e-320)
        np.testing.assert_array_equal(prox_group(t, q=0.5, eta=1.0), np.zeros(3))


class TestPenalties:
    def test_counting(self):
        assert lq_penalty(np.array([0.0, 1.0, -2.0]), q=0.0) == 2.0

    def test_l1(self):
        assert lq_penalty(np.array([1.0, -2.0]), q=1.0) == 3.0

    def test_fractional(self):
        assert lq_penalty(np.array([4.0]), q=0.5) == 2.0

    def test_rows(self):
        x = np.array([[3.0, 4.0], [0.0, 0.0]])
        assert lq_row_penalty(x, q=0.5) == pytest.approx(np.sqrt(5.0))
        assert lq_row_penalty(x, q=0.0) == 1.0
