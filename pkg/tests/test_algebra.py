import math
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from qmf import algebra as alg
from qmf.algebra import AlgebraError, LocalOperator
from qmf.graph import canonical_order

from conftest import random_matrix


def test_matrix_unit_and_mixed_radix():
    e = alg.matrix_unit((1,), 1, 2)
    assert e.matrix[0, 1] == 1 and np.count_nonzero(e.matrix) == 1
    v = alg.basis_vector([2, 1, 2], [(), (1,), (2,)])
    # last site fastest: (2,1,2) -> 1*4 + 0*2 + 1
    assert np.argmax(np.abs(v.amplitudes)) == 5


def test_legs_reordered_to_canonical():
    a = alg.site_operator((1,), np.diag([1, 2]))
    b = alg.site_operator((), np.array([[0, 1], [1, 0]]))
    ab = LocalOperator(((1,), ()), np.kron(a.matrix, b.matrix))
    assert ab.support == ((), (1,))
    assert np.allclose(ab.matrix, np.kron(b.matrix, a.matrix))


def test_embed_matches_kron(rng):
    a = LocalOperator(((1,),), random_matrix(rng, 2))
    big = alg.embed(a, [(), (1,), (2,)])
    ref = np.kron(np.kron(np.eye(2), a.matrix), np.eye(2))
    assert np.allclose(big.matrix, ref)


def _ptrace_bruteforce(m, d, n, keep_pos):
    """Normalized partial trace by explicit index sums."""
    dk = d ** len(keep_pos)
    out = np.zeros((dk, dk), dtype=complex)
    traced = [j for j in range(n) if j not in keep_pos]
    for r in product(range(d), repeat=len(keep_pos)):
        for c in product(range(d), repeat=len(keep_pos)):
            s = 0
            for t in product(range(d), repeat=len(traced)):
                ri, ci = [0] * n, [0] * n
                for p, v in zip(keep_pos, r):
                    ri[p] = v
                for p, v in zip(keep_pos, c):
                    ci[p] = v
                for p, v in zip(traced, t):
                    ri[p] = ci[p] = v
                s += m[np.ravel_multi_index(ri, (d,) * n), np.ravel_multi_index(ci, (d,) * n)]
            out[np.ravel_multi_index(r, (d,) * len(r)), np.ravel_multi_index(c, (d,) * len(c))] = s
    return out / d ** len(traced)


@pytest.mark.parametrize("keep", [[()], [(1,)], [(), (2,)], [(1,), (2,)]])
def test_normalized_partial_trace_oracle(rng, keep):
    sup = ((), (1,), (2,))
    a = LocalOperator(sup, random_matrix(rng, 8))
    got = alg.normalized_partial_trace(a, keep)
    pos = [sup.index(v) for v in canonical_order(keep)]
    assert np.allclose(got.matrix, _ptrace_bruteforce(a.matrix, 2, 3, pos), atol=1e-12)


def test_partial_trace_of_identity_is_identity():
    i = alg.identity([(), (1,), (2,)])
    assert np.allclose(alg.normalized_partial_trace(i, [(1,)]).matrix, np.eye(2))
    assert abs(alg.full_normalized_trace(i) - 1) < 1e-15


def _exp_series(m, beta, terms=40):
    out = np.eye(m.shape[0], dtype=complex)
    term = np.eye(m.shape[0], dtype=complex)
    for n in range(1, terms):
        term = term @ m * beta / n
        out = out + term
    return out


@pytest.mark.parametrize("beta", [0.1, 0.5, 1.0, 0.3 + 0.7j])
def test_herm_exp_power_series(rng, beta):
    h = random_matrix(rng, 4, hermitian=True) / 4
    got = alg.herm_exp(LocalOperator(("x", "y"), h), beta).matrix
    assert np.allclose(got, _exp_series(h, beta), atol=1e-12)


def test_herm_exp_rejects_non_hermitian(rng):
    with pytest.raises(AlgebraError):
        alg.herm_exp(LocalOperator(("x",), random_matrix(rng, 2)), 1.0)


def test_apply_and_expectation_match_dense(rng):
    sup = ((), (1,), (2,))
    v = alg.StateVector(sup, rng.normal(size=8) + 1j * rng.normal(size=8))
    a = LocalOperator(((), (2,)), random_matrix(rng, 4))
    dense = alg.embed(a, sup).matrix @ v.amplitudes
    assert np.allclose(alg.apply(a, v).amplitudes, dense)
    assert np.isclose(alg.expectation(v, a), np.vdot(v.amplitudes, dense))


def test_reduced_density_pairs_with_trace(rng):
    sup = ((), (1,), (2,))
    v = alg.StateVector(sup, rng.normal(size=8) + 1j * rng.normal(size=8))
    a = LocalOperator(((1,),), random_matrix(rng, 2))
    rho = alg.reduced_density(v, [(1,)])
    assert np.isclose(np.trace(rho.matrix @ a.matrix), alg.expectation(v, a))


def test_sandwich_reduced_matches_dense(rng):
    sites = ((), (1,), (2,), (1, 1))
    gates = [
        LocalOperator(((), (1,)), random_matrix(rng, 4)),
        LocalOperator(((1,), (1, 1)), random_matrix(rng, 4)),
        LocalOperator(((),), random_matrix(rng, 2)),
    ]
    P = alg.identity(sites)
    for g in gates:
        P = P @ g
    W = P.H @ P
    for keep in ([()], [(2,)], [(1,), (1, 1)]):
        dense = alg.normalized_partial_trace(W, keep).matrix * 2 ** (len(sites) - len(keep))
        assert np.allclose(alg.sandwich_reduced(gates, sites, keep), dense, atol=1e-10)


def test_operator_cap_is_enforced():
    a = alg.identity([(1,) * j for j in range(5)])
    b = alg.identity([(2,) * j for j in range(1, 6)])
    with pytest.raises(AlgebraError):
        alg.op_mul(a, b)


def test_json_round_trip(rng):
    a = LocalOperator(((), (1, 2)), random_matrix(rng, 4))
    b = LocalOperator.from_json(a.to_json())
    assert b.support == a.support and np.array_equal(a.matrix, b.matrix)
    v = alg.StateVector(((),), np.array([1, 1j]))
    w = alg.StateVector.from_json(v.to_json())
    assert np.array_equal(v.amplitudes, w.amplitudes)


finite = st.floats(min_value=-3, max_value=3, allow_nan=False)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (2, 4, 4), elements=finite), arrays(np.float64, (2, 2, 2), elements=finite))
def test_partial_trace_is_module_map(a, c):
    # Tr_y((c x 1) a) = c Tr_y(a) for c on the kept site
    A = LocalOperator(("x", "y"), a[0] + 1j * a[1])
    C = LocalOperator(("x",), c[0] + 1j * c[1])
    lhs = alg.normalized_partial_trace(C @ A, ["x"])
    rhs = C @ alg.normalized_partial_trace(A, ["x"])
    assert lhs.max_dev(rhs) < 1e-10


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (2, 4, 4), elements=finite))
def test_trace_is_tower(a):
    A = LocalOperator(("x", "y"), a[0] + 1j * a[1])
    once = alg.full_normalized_trace(A)
    twice = alg.full_normalized_trace(alg.normalized_partial_trace(A, ["y"]))
    assert math.isclose(abs(once - twice), 0, abs_tol=1e-12)
