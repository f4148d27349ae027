import numpy as np
import pytest
from hypothesis import example, given, settings, strategies as st

from ramimo.capacity import (
    RankZeroChannelError,
    capacity_given_orientations,
    capacity_with_covariance,
    eigenmode_transmission,
    max_capacity,
    max_capacity_batch,
    optimal_covariance,
    truncated_rank,
    water_fill,
)
from ramimo.geometry import sample_cap

from conftest import small_scenario
from oracles import random_covariance, random_simplex, water_fill_bisection

sig_list = st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=8)


def cmat(rng, m, n):
    return rng.normal(size=(m, n)) + 1j * rng.normal(size=(m, n))


class TestWaterFill:
    def test_single_mode(self):
        a = water_fill([1.0], 2.5, 0.3)
        assert a.powers[0] == 2.5
        assert a.water_level == pytest.approx(2.5 + 0.3)

    def test_symmetric(self):
        np.testing.assert_allclose(water_fill([1.0, 1.0], 4.0, 1.0).powers, [2.0, 2.0])

    def test_two_modes_oracle(self):
        # sigmas [2, 1], P = 1, noise = 1: inverse gains 0.25 and 1, mu = 1.125
        a = water_fill([2.0, 1.0], 1.0, 1.0)
        ref, mu = water_fill_bisection([2.0, 1.0], 1.0, 1.0)
        np.testing.assert_allclose(a.powers, ref, atol=1e-10)
        np.testing.assert_allclose(a.powers, [0.875, 0.125], atol=1e-15)
        assert a.water_level == pytest.approx(1.125)

    def test_weak_mode_inactive(self):
        a = water_fill([10.0, 0.01], 1.0, 1.0)
        assert a.powers[1] == 0 and a.active == 1

    def test_errors(self):
        with pytest.raises(RankZeroChannelError):
            water_fill([], 1.0, 1.0)
        with pytest.raises(ValueError):
            water_fill([1.0, 0.0], 1.0, 1.0)

    @given(sig_list, st.floats(1e-3, 1e3), st.floats(1e-3, 10))
    @example([0.0078125, 0.0078125], 1.968402439136014, 1.0)  # tied weak modes, mu ~ 1.6e4
    def test_invariants(self, s, P, noise):
        a = water_fill(s, P, noise)
        assert np.all(a.powers >= 0)
        assert abs(a.powers.sum() - P) <= 1e-10 * P
        # nonincreasing with sorted sigmas, up to the rounding of mu - noise/sigma^2
        assert np.all(np.diff(a.powers) <= 1e-12 * P + 4 * np.spacing(a.water_level))
        ref, mu = water_fill_bisection(s, P, noise)
        # p = mu - noise/sigma^2 cancels; allow for the resolution of mu itself
        np.testing.assert_allclose(a.powers, ref, rtol=0, atol=1e-10 * max(1.0, P) + 64 * np.spacing(mu))

    def test_dominates_random_allocations(self, rng):
        for _ in range(50):
            s = np.sort(rng.uniform(0.1, 3, 4))[::-1]
            a = water_fill(s, 2.0, 0.5)
            best = np.sum(np.log2(1 + s**2 * a.powers / 0.5))
            rand = random_simplex(rng, (1000, 4), 2.0)
            assert best >= np.max(np.sum(np.log2(1 + s**2 * rand / 0.5), axis=1)) - 1e-10


class TestRank:
    def test_examples(self):
        assert truncated_rank([1, 1e-18]) == 1
        assert truncated_rank([3, 2, 1]) == 3
        assert truncated_rank([0.0, 0.0]) == 0

    def test_los_long_range_is_low_rank(self):
        sc = small_scenario(D=0, distance=300.0)
        s = np.linalg.svd(np.asarray(capacity_given_orientations(sc, [0, 0, 1], [0, 0, 1]).channel), compute_uv=False)
        assert s[1] / s[0] < 1e-3


class TestCovariance:
    def test_miso_is_mrt(self, rng):
        h = cmat(rng, 1, 5)
        Q = optimal_covariance(h, 2.0, 0.1)
        hv = h[0].conj()
        np.testing.assert_allclose(Q, 2.0 * np.outer(hv, hv.conj()) / np.vdot(hv, hv).real, atol=1e-12)

    def test_identity_high_power(self):
        Q = optimal_covariance(np.eye(3), 300.0, 1.0)
        np.testing.assert_allclose(Q, 100.0 * np.eye(3), atol=1e-10)

    def test_invariants(self, rng):
        H = cmat(rng, 4, 3)
        Q = optimal_covariance(H, 1.5, 0.2)
        np.testing.assert_allclose(Q, Q.conj().T, atol=1e-10)
        w = np.linalg.eigvalsh(Q)
        assert w.min() >= -1e-10 * np.trace(Q).real
        assert np.trace(Q).real <= 1.5 * (1 + 1e-10)

    def test_dominates_random_covariances(self, rng):
        H = cmat(rng, 3, 3)
        best = capacity_with_covariance(H, optimal_covariance(H, 1.0, 0.5), 0.5)
        for _ in range(10_000 // 50):
            Q = random_covariance(rng, 3, 1.0)
            assert capacity_with_covariance(H, Q, 0.5) <= best + 1e-10

    def test_zero_matrix(self):
        with pytest.raises(RankZeroChannelError):
            optimal_covariance(np.zeros((2, 2)), 1.0, 1.0)
        assert max_capacity(np.zeros((2, 2)), 1.0, 1.0) == 0.0


class TestCapacity:
    def test_zero_covariance(self, rng):
        assert capacity_with_covariance(cmat(rng, 2, 3), np.zeros((3, 3)), 1.0) == 0.0

    def test_scalar(self):
        h = 0.3 - 0.4j
        assert capacity_with_covariance([[h]], [[2.0]], 0.1) == pytest.approx(np.log2(1 + 2 * 0.25 / 0.1))

    def test_non_psd_rejected(self, rng):
        with pytest.raises(ValueError):
            capacity_with_covariance(cmat(rng, 2, 2), np.diag([1.0, -1.0]), 1.0)

    def test_dimension_mismatch(self, rng):
        with pytest.raises(ValueError):
            capacity_with_covariance(cmat(rng, 2, 3), np.eye(2), 1.0)

    @settings(max_examples=50)
    @given(st.integers(0, 2**31), st.integers(1, 5), st.integers(1, 5))
    def test_determinant_identity(self, seed, m, n):
        rng = np.random.default_rng(seed)
        H = cmat(rng, m, n)
        Q = random_covariance(rng, n, 1.0)
        w, V = np.linalg.eigh(Q)
        Qh = (V * np.sqrt(np.clip(w, 0, None))) @ V.conj().T
        alt = np.linalg.slogdet(np.eye(n) + Qh @ H.conj().T @ H @ Qh / 0.3)[1] / np.log(2)
        assert capacity_with_covariance(H, Q, 0.3) == pytest.approx(alt, rel=1e-9, abs=1e-12)

    @settings(max_examples=50)
    @given(st.integers(0, 2**31), st.integers(1, 5), st.integers(1, 5))
    def test_duality(self, seed, m, n):
        rng = np.random.default_rng(seed)
        H = cmat(rng, m, n)
        assert max_capacity(H, 1.0, 0.2) == pytest.approx(max_capacity(H.conj().T, 1.0, 0.2), abs=1e-9)

    def test_monotone_in_power(self, rng):
        H = cmat(rng, 3, 3)
        Q = random_covariance(rng, 3, 1.0)
        vals = [capacity_with_covariance(H, s * Q, 1.0) for s in (0.1, 1, 10, 100)]
        assert np.all(np.diff(vals) > 0)

    def test_eigenmode_sum_matches_logdet(self, rng):
        H = cmat(rng, 4, 4)
        r = eigenmode_transmission(H, 1.0, 0.1)
        a = r.allocation
        assert r.capacity == pytest.approx(np.sum(np.log2(1 + r.singular_values**2 * a.powers / 0.1)), abs=1e-10)
        assert r.capacity == pytest.approx(capacity_with_covariance(H, r.covariance, 0.1), abs=1e-10)

    def test_batch(self, rng):
        H = cmat(rng, 6, 3, ) .reshape(2, 3, 3)
        np.testing.assert_allclose(max_capacity_batch(H, 1.0, 0.1), [max_capacity(h, 1.0, 0.1) for h in H], rtol=1e-13)


class TestGivenOrientations:
    def test_zero_channel(self):
        sc = small_scenario(D=0)
        r = capacity_given_orientations(sc.with_(tx_cap=sc.tx_cap), np.tile([0.0, 0.0, -1.0], (sc.n_tx, 1)), [0, 0, 1])
        assert r.capacity == 0.0

    def test_miso_formula(self):
        sc = small_scenario(n=(2, 2), m=(1, 1))
        rng = np.random.default_rng(1)
        ft = sample_cap(sc.tx_cap, rng, sc.n_tx)
        r = capacity_given_orientations(sc, ft, [0, 0, 1])
        h = r.channel[0]
        assert r.capacity == pytest.approx(np.log2(1 + sc.power_budget * np.vdot(h, h).real / sc.noise_power), abs=1e-10)

    def test_consistent_with_logdet(self, rng):
        sc = small_scenario(5)
        ft, fr = sample_cap(sc.tx_cap, rng, 4), sample_cap(sc.rx_cap, rng, 4)
        r = capacity_given_orientations(sc, ft, fr)
        assert r.capacity == pytest.approx(capacity_with_covariance(r.channel, r.covariance, sc.noise_power), abs=1e-10)
