import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ramimo import kernels
from ramimo.ao import _gram_factor, direct_inverse_gram
from ramimo.capacity import capacity_with_covariance
from ramimo.channel import assemble_channel
from ramimo.geometry import SphericalCap, cap_contains, sample_cap
from ramimo.orientation import (
    ElementProblem,
    FwConfig,
    build_receive_quadratic,
    build_transmit_quadratic,
    closed_form_p1,
    euclidean_gradient,
    frank_wolfe,
    p1_matrix,
    receive_effective_vector,
    receive_problem,
    solve_element,
    transmit_effective_vector,
    transmit_problem,
    utility,
)

from conftest import small_scenario
from oracles import central_difference, random_covariance


def random_psd(rng, n, rank=None):
    k = n if rank is None else rank
    A = rng.normal(size=(n, k)) + 1j * rng.normal(size=(n, k))
    return A @ A.conj().T


def feasible(rng, sc, count):
    return sample_cap(sc.tx_cap, rng, count)


class TestEffectiveVector:
    def test_receive_reproduces_row(self, rng):
        sc = small_scenario(2, p=1.5)
        ft, fr = feasible(rng, sc, sc.n_tx), feasible(rng, sc, sc.n_rx)
        H = assemble_channel(sc, ft, fr)
        for m in range(sc.n_rx):
            np.testing.assert_allclose(receive_effective_vector(sc, m, ft, fr[m]), H[m].conj(), rtol=1e-12, atol=1e-20)

    def test_transmit_reproduces_column(self, rng):
        sc = small_scenario(2, p=2.0)
        ft, fr = feasible(rng, sc, sc.n_tx), feasible(rng, sc, sc.n_rx)
        H = assemble_channel(sc, ft, fr)
        for n in range(sc.n_tx):
            np.testing.assert_allclose(transmit_effective_vector(sc, n, fr, ft[n]), H[:, n], rtol=1e-12, atol=1e-20)

    def test_all_clamped(self, small):
        v = receive_effective_vector(small, 0, np.tile([0, 0, 1.0], (small.n_tx, 1)), [0, 0, -1.0])
        assert np.all(v == 0)

    def test_aligned_single_path(self):
        sc = small_scenario(D=0)
        ft = np.tile([0, 0, 1.0], (sc.n_tx, 1))
        prob = receive_problem(sc, 0, ft)
        u = prob.w_los[1]
        v = prob.vector(u)
        assert v[1] == pytest.approx(prob.c_los[1], rel=1e-14)
        cos = prob.w_los @ u
        np.testing.assert_allclose(np.abs(v), np.abs(prob.c_los) * cos, rtol=1e-12)


class TestUtility:
    def test_examples(self, rng):
        v = rng.normal(size=4) + 1j * rng.normal(size=4)
        assert utility(v, np.eye(4)) == pytest.approx(np.vdot(v, v).real)
        assert utility(np.zeros(4), random_psd(rng, 4)) == 0.0

    def test_eigen_path(self, rng):
        B = random_psd(rng, 5)
        v = rng.normal(size=5) + 1j * rng.normal(size=5)
        w, U = np.linalg.eigh(B)
        assert utility(v, B) == pytest.approx(float(np.sum(w * np.abs(U.conj().T @ v) ** 2)), rel=1e-12)

    def test_dimension(self):
        with pytest.raises(ValueError):
            utility(np.ones(3), np.eye(2))


class TestGradient:
    @pytest.mark.parametrize("p", [1.0, 2.0, 2.5])
    def test_finite_difference(self, rng, p):
        sc = small_scenario(7, p=p)
        ft = feasible(rng, sc, sc.n_tx)
        B = random_psd(rng, sc.n_tx)
        for m in range(sc.n_rx):
            prob = receive_problem(sc, m, ft, B)
            for _ in range(10):
                f = sample_cap(SphericalCap(0.45), rng)
                g = euclidean_gradient(sc, m, ft, f, B)
                ref = central_difference(prob.utility, f)
                assert np.all(np.abs(g - ref) <= np.maximum(1e-5 * np.abs(ref), 1e-9 * max(1, np.abs(ref).max()))) or \
                    np.allclose(g, ref, rtol=1e-5, atol=1e-9 * np.abs(ref).max())

    def test_p_below_one_rejected(self, small, rng):
        sc = small.with_(pattern=type(small.pattern)(0.5))
        with pytest.raises(ValueError):
            euclidean_gradient(sc, 0, np.tile([0, 0, 1.0], (sc.n_tx, 1)), [0, 0, 1.0], np.eye(sc.n_tx))

    def test_zero_when_clamped(self, small):
        g = euclidean_gradient(small, 0, np.tile([0, 0, 1.0], (small.n_tx, 1)), [0, 0, -1.0], np.eye(small.n_tx))
        np.testing.assert_array_equal(g, 0)

    def test_single_path_direction(self, rng):
        u = np.array([0.3, -0.2, 0.9])
        u /= np.linalg.norm(u)
        c = 0.7 - 0.4j
        prob = ElementProblem(u[None, :], np.array([c]), np.zeros((0, 3)), np.zeros((1, 0)), 1.0, np.eye(3),
                              SphericalCap(np.pi / 6), np.array([[2.0 + 0j]]))
        f = np.array([0.1, 0.1, np.sqrt(0.98)])
        g = prob.gradient(f)
        np.testing.assert_allclose(g, 2 * 2.0 * abs(c) ** 2 * (u @ f) * u, rtol=1e-13)


class TestQuadratic:
    def test_identity(self, rng):
        U = np.linalg.qr(rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)))[0]
        np.testing.assert_allclose(build_receive_quadratic(U, np.ones(3), np.eye(3)), U @ U.conj().T, atol=1e-14)

    def test_rank_one(self, rng):
        U = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))[0]
        B = build_transmit_quadratic(U, [2.0, 0, 0, 0], random_psd(rng, 4))
        assert np.linalg.matrix_rank(B, tol=1e-10) == 1

    def test_hermitian(self, rng):
        U = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        B = build_receive_quadratic(U, np.diag(rng.uniform(0, 2, 4)), random_psd(rng, 4))
        assert np.max(np.abs(B - B.conj().T)) <= 1e-12 * np.abs(B).max()

    def test_dimension(self):
        with pytest.raises(ValueError):
            build_receive_quadratic(np.eye(3), np.ones(2), np.eye(2))

    def test_log_det_consistency(self, rng):
        # capacity splits as log det of the others plus log2(1 + utility / noise)
        sc = small_scenario(11)
        ft, fr = feasible(rng, sc, sc.n_tx), feasible(rng, sc, sc.n_rx)
        H = assemble_channel(sc, ft, fr)
        Q = random_covariance(rng, sc.n_tx, sc.power_budget)
        L = _gram_factor(Q)
        vecs = L.conj().T @ H.conj().T
        noise = sc.noise_power
        total = capacity_with_covariance(H, Q, noise)
        for m in range(sc.n_rx):
            P = direct_inverse_gram(vecs, m, noise)
            B = L @ P @ L.conj().T
            rest = -np.linalg.slogdet(P)[1] / np.log(2)
            u = receive_problem(sc, m, ft, B).utility(fr[m])
            assert rest + np.log2(1 + u / noise) == pytest.approx(total, abs=1e-9)


class TestClosedForm:
    def test_examples(self):
        np.testing.assert_allclose(closed_form_p1(np.diag([0, 0, 1.0]), np.eye(3), SphericalCap(0.1)), [0, 0, 1])
        assert closed_form_p1(np.diag([1.0, 0, 0]), np.eye(3), SphericalCap(np.pi / 6)) is None

    def test_sign_flip(self):
        f = closed_form_p1(np.diag([0, 0, 1.0]), np.diag([1.0, -1.0, -1.0]), SphericalCap(0.1))
        np.testing.assert_allclose(f, [0, 0, 1])


def interior_instance(seed):
    """p = 1 problem whose clamp is inactive on the whole cap and whose top eigenvector is interior."""
    rng = np.random.default_rng(seed)
    K = 3
    W = sample_cap(SphericalCap(0.35), rng, K + 2)
    w_los, w_sc = W[:K], W[K:]
    c_los = rng.normal(size=K) + 1j * rng.normal(size=K)
    c_sc = rng.normal(size=(K, 2)) + 1j * rng.normal(size=(K, 2))
    B = random_psd(rng, K)
    prob = ElementProblem(w_los, c_los, w_sc, c_sc, 1.0, np.eye(3), SphericalCap(np.pi / 6), B)
    return prob, rng


class TestFrankWolfe:
    def test_infeasible_init(self, rng):
        prob, _ = interior_instance(0)
        with pytest.raises(ValueError):
            frank_wolfe(prob.utility, prob.gradient, prob.cap, [1.0, 0, 0])

    def test_stationary_start(self):
        for seed in range(40):
            prob, _ = interior_instance(seed)
            f0 = closed_form_p1(p1_matrix(prob), prob.rotation, prob.cap)
            if f0 is None or np.min(prob.w_los @ f0) <= 0 or np.min(prob.w_sc @ f0) <= 0:
                continue
            f, tr = frank_wolfe(prob.utility, prob.gradient, prob.cap, f0)
            assert tr.iterations <= 2
            assert np.linalg.norm(f - f0) < 1e-6
            return
        pytest.fail("no interior instance found")

    def test_matches_closed_form(self):
        hits = 0
        for seed in range(60):
            prob, rng = interior_instance(seed)
            fc = closed_form_p1(p1_matrix(prob), prob.rotation, prob.cap)
            if fc is None or np.min(prob.w_los @ fc) <= 0 or np.min(prob.w_sc @ fc) <= 0:
                continue
            # angular error scales like sqrt(tol), so tighten the stop rule for a 1e-4 rad comparison
            f, _ = frank_wolfe(prob.utility, prob.gradient, prob.cap, sample_cap(prob.cap, rng), FwConfig(tol=1e-12))
            assert np.arccos(np.clip(f @ fc, -1, 1)) < 1e-4
            hits += 1
        assert hits >= 5

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.sampled_from([1.0, 1.5, 2.0, 3.0]))
    def test_monotone_and_feasible(self, seed, p):
        sc = small_scenario(seed % 50, p=p)
        rng = np.random.default_rng(seed)
        B = random_psd(rng, sc.n_tx)
        prob = receive_problem(sc, 0, feasible(rng, sc, sc.n_tx), B)
        seen = []

        def util(f):
            seen.append(np.array(f))
            return prob.utility(f)

        f0 = sample_cap(prob.cap, rng)
        f, tr = frank_wolfe(util, prob.gradient, prob.cap, f0)
        assert np.all(np.diff(tr.utilities) >= 0)
        assert tr.utilities[-1] >= tr.utilities[0]
        assert all(cap_contains(prob.cap, x) for x in seen)
        assert cap_contains(prob.cap, f) and abs(np.linalg.norm(f) - 1) < 1e-12


class TestSolveElement:
    def test_closed_form_never_worse(self, rng):
        sc = small_scenario(3)
        B = random_psd(rng, sc.n_tx)
        for m in range(sc.n_rx):
            prob = receive_problem(sc, m, feasible(rng, sc, sc.n_tx), B)
            init = sample_cap(prob.cap, rng)
            f, tr = solve_element(prob, init, FwConfig(), use_closed_form=True)
            assert prob.utility(f) >= prob.utility(init)

    def test_backends_agree(self, rng):
        sc = small_scenario(9, p=2.0)
        B = random_psd(rng, sc.n_tx)
        prob = receive_problem(sc, 1, feasible(rng, sc, sc.n_tx), B)
        init = sample_cap(prob.cap, rng)
        outs = [solve_element(prob, init, backend=be) for be in kernels.available_backends().values()]
        for f, tr in outs[1:]:
            np.testing.assert_allclose(f, outs[0][0], atol=1e-12)
            assert tr.iterations == outs[0][1].iterations

    def test_transmit_problem_weight_shape(self, small):
        with pytest.raises(ValueError):
            transmit_problem(small, 0, np.tile([0, 0, 1.0], (small.n_rx, 1)), np.eye(small.n_rx + 1))
