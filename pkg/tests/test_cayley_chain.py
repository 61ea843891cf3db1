import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmf import algebra as alg
from qmf import cayley_chain as cc
from qmf import kernels as kn
from qmf.algebra import LocalOperator
from qmf.graph import ROOT

from conftest import random_matrix

E11 = np.diag([1.0, 0.0])
E12 = np.array([[0.0, 1.0], [0.0, 0.0]])


def spec_for(name, beta, k=2):
    return cc.solve_chain(kn.kernel_matrix(name, beta), k, name=name, beta=beta)


def random_kernel(rng, beta=0.7):
    H = random_matrix(rng, 4, hermitian=True) / 4
    return alg.herm_exp(LocalOperator(("x", "y"), H), beta).matrix


# ------------------------------------------------------------------ solvers


@pytest.mark.parametrize("beta", [0.1, 0.2, 0.5, 1.0])
def test_solve_h_closed_forms(beta):
    hs = cc.solve_h(kn.hopping_kernel(beta), 2)
    assert abs(hs.alpha - math.cosh(beta) ** -4) < 1e-12
    ds = cc.solve_h(kn.diagonal_kernel(beta), 2)
    assert abs(ds.alpha - 4 / (math.exp(2 * beta) + 1) ** 2) < 1e-12


@pytest.mark.parametrize("name", kn.KERNELS)
def test_full_mode_agrees_with_scalar(name):
    K = kn.kernel_matrix(name, 0.5)
    a = cc.solve_h(K, 2, ansatz="scalar")
    b = cc.solve_h(K, 2, ansatz="full")
    assert np.allclose(a.h, b.h, atol=1e-10)
    assert b.residual <= 1e-10


@pytest.mark.parametrize("k", [1, 2, 3])
def test_beta_zero_any_order(k):
    h = cc.solve_h(np.eye(4), k)
    assert h.alpha == pytest.approx(1.0)
    w0 = cc.solve_w0(np.eye(4), h.h, k)
    assert np.allclose(w0, np.eye(2))


def test_w0_is_scaled_identity():
    for name in kn.KERNELS:
        for beta in (0.2, 1.0):
            s = spec_for(name, beta)
            assert np.allclose(s.w0, np.eye(2) / s.alpha, atol=1e-10)
            assert cc.residual_initial(s) <= 1e-10


def test_random_kernels_satisfy_boundary_equations(rng):
    for _ in range(10):
        s = cc.solve_chain(random_kernel(rng), 2)
        assert cc.residual_normalization(s) <= 1e-10
        assert cc.residual_boundary(s) <= 1e-10
        assert cc.compatibility_check(s, 0) <= 1e-8
        assert np.linalg.eigvalsh(s.h).min() > 0
        assert np.linalg.eigvalsh(s.w0).min() > 0


def test_solver_failures():
    # zero kernel: the boundary map collapses
    with pytest.raises(cc.SolverError):
        cc.solve_h(np.zeros((4, 4)), 2, ansatz="full")
    with pytest.raises(cc.SolverError):
        cc.solve_w0(np.eye(4), np.zeros((2, 2)), 2)


def test_spec_validation():
    s = spec_for("hopping", 0.5)
    with pytest.raises(cc.ChainError):
        s.with_w0(np.eye(2))  # violates the normalization
    with pytest.raises(cc.ChainError):
        cc.ChainSpec(2, s.K, -s.h, s.w0)


# ------------------------------------------------------------- phi_n / E_n


@pytest.mark.parametrize("name", kn.KERNELS)
def test_phi_n_is_a_state(name, rng):
    s = spec_for(name, 0.5)
    for n in (0, 1):
        ball = s.tree(n).ball(n)
        assert abs(cc.phi_n(s, n, alg.identity(ball)) - 1) < 1e-12
    for sup in ([ROOT], [ROOT, (1,)], [(1,), (2,)]):
        a = LocalOperator(tuple(sup), random_matrix(rng, 2 ** len(sup)))
        val = cc.phi_n(s, 1, a.H @ a)
        assert val.real >= -1e-12 and abs(val.imag) < 1e-10


def test_phi_n_trivial_kernel():
    s = spec_for("hopping", 0.0)
    for n in (0, 1, 2):
        assert abs(cc.phi_n(s, n, alg.matrix_unit((1,) * n, 1, 1)) - 0.5) < 1e-12


def test_phi_n_dense_and_network_agree(rng):
    s = spec_for("diagonal", 0.5)
    a = LocalOperator((ROOT, (1,)), random_matrix(rng, 4))
    assert abs(cc.phi_n(s, 1, a, "dense") - cc.phi_n(s, 1, a, "network")) < 1e-12


def test_phi_n_rejects_outside_support():
    s = spec_for("diagonal", 0.5)
    with pytest.raises(cc.ChainError):
        cc.phi_n(s, 0, alg.matrix_unit((1,), 1, 1))


@pytest.mark.parametrize("name", kn.KERNELS)
def test_quasi_conditional_expectation(name, rng):
    s = spec_for(name, 0.5)
    for n in (0, 1):
        ball1 = s.tree(n + 1).ball(n + 1)
        one = cc.quasi_cond_expectation(s, n, alg.identity(ball1))
        assert one.max_dev(alg.identity(one.support)) < 1e-12
        assert all(len(v) <= n for v in one.support)
    # module property with c on the ball of radius n - 1
    a = LocalOperator(((1,), (1, 1), (2, 2)), random_matrix(rng, 8))
    c = LocalOperator((ROOT,), random_matrix(rng, 2))
    lhs = cc.quasi_cond_expectation(s, 1, c @ a)
    rhs = c @ cc.quasi_cond_expectation(s, 1, a)
    assert lhs.max_dev(rhs) < 1e-10
    # positivity on a positive test operator
    p = LocalOperator(((1,), (1, 1)), random_matrix(rng, 4))
    out = cc.quasi_cond_expectation(s, 1, p.H @ p)
    assert np.linalg.eigvalsh(out.matrix).min() > -1e-10


def test_local_and_literal_E_agree(rng):
    s = spec_for("hopping", 0.5)
    a = LocalOperator(((1,), (2,)), random_matrix(rng, 4))
    loc = cc.quasi_cond_expectation(s, 0, a)
    lit = cc.quasi_cond_expectation(s, 0, a, literal=True)
    assert loc.max_dev(lit) < 1e-12
    b = LocalOperator(((1, 2),), random_matrix(rng, 2))
    loc = cc.quasi_cond_expectation(s, 1, b)
    lit = cc.quasi_cond_expectation(s, 1, b, literal=True)
    assert loc.max_dev(lit) < 1e-12


def test_level_one_observable_support_lands_on_parent():
    # E_n(a) for a on W_{n+1} lives on W_n
    s = spec_for("diagonal", 0.5)
    out = cc.quasi_cond_expectation(s, 1, alg.matrix_unit((2, 1), 1, 1))
    assert out.support == ((2,),)


def test_hopping_E_on_offdiagonal_unit():
    beta = 0.5
    s = spec_for("hopping", beta)
    out = cc.quasi_cond_expectation(s, 0, alg.matrix_unit((1,), 1, 2))
    expected = math.sinh(beta) / math.cosh(beta) ** 2
    assert np.allclose(out.matrix, expected * E12, atol=1e-12)


def test_chain_expect_paths(rng):
    for name in kn.KERNELS:
        s = spec_for(name, 0.5)
        assert abs(cc.chain_expect(s, alg.identity([ROOT, (1,)])) - 1) < 1e-12
        for sup in ([ROOT], [(2,)], [ROOT, (1,)], [(1,), (2,)], [(1, 1)]):
            a = LocalOperator(tuple(sup), random_matrix(rng, 2 ** len(sup)))
            n = max(len(v) for v in sup)
            assert abs(cc.chain_expect(s, a) - cc.phi_n(s, n, a)) < 1e-12 * max(1, abs(cc.phi_n(s, n, a)))
    s = spec_for("diagonal", 0.5)
    assert abs(cc.chain_expect(s, alg.matrix_unit(ROOT, 1, 2))) < 1e-14
    s = spec_for("hopping", 0.5)
    assert abs(cc.chain_expect(s, alg.matrix_unit(ROOT, 1, 1)) - cc.phi_n(s, 0, alg.matrix_unit(ROOT, 1, 1))) < 1e-12


# ----------------------------------------------------- compatibility, shifts


@pytest.mark.parametrize("name", kn.KERNELS)
@pytest.mark.parametrize("beta", [0.2, 0.5, 1.0])
def test_compatibility(name, beta):
    s = spec_for(name, beta)
    assert cc.compatibility_check(s, 0) <= 1e-10
    assert cc.compatibility_check(s, 1) <= 1e-10
    assert cc.local_step_residual(s) <= 1e-10


def test_compatibility_random_kernel(rng):
    s = cc.solve_chain(random_kernel(rng), 2)
    assert cc.compatibility_check(s, 1) <= 1e-8


@pytest.mark.parametrize("name", kn.KERNELS)
@pytest.mark.parametrize("beta", [0.0, 0.1, 0.5, 1.0])
def test_shift_invariance(name, beta, rng):
    s = spec_for(name, beta)
    samples = [E11, E12, random_matrix(rng, 2, hermitian=True), LocalOperator((ROOT, (1,)), random_matrix(rng, 4))]
    for i in (1, 2):
        assert cc.shift_invariance_check(s, i, samples) <= 1e-10


def test_shift_invariance_fails_for_wrong_w0():
    s = spec_for("hopping", 0.5)
    bad = s.with_w0(np.diag([1.5, 0.5]) / s.alpha)
    assert cc.residual_initial(bad) > 1e-3
    assert max(cc.shift_invariance_check(bad, i, [E11]) for i in (1, 2)) > 1e-3


def test_shift_twice():
    a = alg.matrix_unit((2,), 1, 1)
    assert cc.shift_observable(a, 1, times=2).support == ((1, 1, 2),)


# ------------------------------------------------------ transfer, clustering


@pytest.mark.parametrize("name", kn.KERNELS)
@pytest.mark.parametrize("beta", [0.2, 0.5, 1.0])
def test_transfer_matches_oracle(name, beta):
    s = spec_for(name, beta)
    T = cc.transfer_superoperator(s)
    orc = kn.analytic_oracle(name, beta)
    for key, m in orc.transfer.items():
        assert np.allclose(T.apply(kn._E[key]), m, atol=1e-12)
    assert np.allclose(T.apply(np.eye(2)), np.eye(2), atol=1e-12)


def test_transfer_closed_form_values():
    beta = 0.5
    T = cc.transfer_superoperator(spec_for("diagonal", beta))
    q = math.exp(2 * beta)
    assert np.allclose(T.apply(E11), (q * E11 + np.diag([0, 1])) / (q + 1))
    assert np.allclose(T.apply(E12), 0)
    T = cc.transfer_superoperator(spec_for("hopping", beta))
    assert np.allclose(T.apply(E11), np.eye(2) / 2)
    assert abs(T.rate - math.sinh(beta) / math.cosh(beta) ** 2) < 1e-12


def test_transfer_rate_bounded_by_half():
    for beta in np.linspace(0.05, 5, 30):
        T = cc.transfer_superoperator(spec_for("hopping", float(beta)))
        assert T.rate <= 0.5 + 1e-12


def test_transfer_trivial_kernel(rng):
    T = cc.transfer_superoperator(spec_for("diagonal", 0.0))
    b = random_matrix(rng, 2)
    assert np.allclose(T.apply(b), np.trace(b) / 2 * np.eye(2))


def test_transfer_positive_on_test_cone(rng):
    T = cc.transfer_superoperator(spec_for("hopping", 0.7))
    for _ in range(20):
        m = random_matrix(rng, 2)
        assert np.linalg.eigvalsh(T.apply(m @ m.conj().T)).min() > -1e-10


@pytest.mark.parametrize("name", kn.KERNELS)
def test_transfer_powers_equal_composed_E(name, rng):
    s = spec_for(name, 0.5)
    T = cc.transfer_superoperator(s)
    b = random_matrix(rng, 2)
    # a at level n + 1 on the first branch, pushed up through E_n, ..., E_1
    for n in (1, 2):
        op = alg.site_operator((1,) * (n + 1), b)
        for j in range(n, 0, -1):
            op = cc.quasi_cond_expectation(s, j, op, literal=(n == 1))
        expected = b
        for _ in range(n):
            expected = T.apply(expected)
        assert op.max_dev(alg.site_operator((1,), expected)) < 1e-10


@pytest.mark.parametrize("beta", [0.2, 0.5, 1.0])
def test_diagonal_clustering_rate(beta):
    r = cc.clustering_decay(spec_for("diagonal", beta), E11, E11, 12)
    for ratio in r.ratios[4:10]:
        assert abs(ratio - math.tanh(beta)) <= 1e-6 * math.tanh(beta)
    assert abs(r.rate - math.tanh(beta)) < 1e-12
    assert r.brute_force_max_dev <= 1e-9
    assert not r.flags


def test_hopping_clustering():
    s = spec_for("hopping", 0.2)
    r = cc.clustering_decay(s, E11, E11, 10)
    assert r.deltas[-1] < 1e-14
    a = np.array([[1.0, 1.0], [1.0, 0.0]])
    r = cc.clustering_decay(s, a, a, 12)
    assert r.deltas[-1] < r.deltas[0] * 1e-6
    assert abs(r.ratios[-1] - abs(r.eigenvalues[1])) < 1e-6
    assert r.brute_force_max_dev <= 1e-9


def test_clustering_identity_is_flat():
    r = cc.clustering_decay(spec_for("diagonal", 0.5), np.eye(2), E11, 6)
    assert np.all(r.deltas < 1e-14)


def test_clustering_table_rows():
    r = cc.clustering_decay(spec_for("diagonal", 0.5), E11, E11, 4, brute_force_upto=0)
    rows = r.table()
    assert [row["n"] for row in rows] == [1, 2, 3, 4]
    assert rows[0]["ratio"] is None


@settings(max_examples=20, deadline=None)
@given(st.floats(min_value=0.01, max_value=3.0), st.sampled_from(kn.KERNELS))
def test_unitality_and_state_normalization(beta, name):
    s = spec_for(name, beta)
    T = cc.transfer_superoperator(s)
    assert np.allclose(T.apply(np.eye(2)), np.eye(2), atol=1e-10)
    assert abs(cc.chain_expect(s, alg.identity([ROOT, (2,)])) - 1) < 1e-10
    assert cc.residual_boundary(s) < 1e-10
