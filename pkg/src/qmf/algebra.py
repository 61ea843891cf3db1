"""Dense operators and vectors on tensor products of ``d``-dimensional site spaces.

Every operator or vector carries an ordered ``support``.  Supports are always
in canonical vertex order (see :func:`qmf.graph.canonical_order`), and the
configuration index is mixed-radix with the *last* site varying fastest, so
``e_{(i1, ..., in)}`` sits at ``sum_m i_m d^(n-1-m)`` (0-based digits).

Traces are normalized: ``Tr(1) = 1`` and partial traces divide by the
dimension of the traced factor.  Matrix-unit indices are 1-based.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import opt_einsum

from .graph import canonical_key, canonical_order

ATOL = 1e-10
TRACE_ATOL = 1e-12
MAX_OPERATOR_SITES = 8
MAX_VECTOR_SITES = 16


class AlgebraError(ValueError):
    pass


def _as_support(support: Iterable) -> tuple:
    s = tuple(support)
    if len(set(s)) != len(s):
        raise AlgebraError(f"repeated site in support {s}")
    return s


@dataclass(frozen=True, eq=False)
class LocalOperator:
    """Operator on ``H_support`` as a ``d^n x d^n`` complex matrix, legs in canonical order."""

    support: tuple
    matrix: np.ndarray
    d: int = 2

    def __post_init__(self):
        s = _as_support(self.support)
        if s != canonical_order(s):
            # reorder legs into canonical order
            perm = [s.index(v) for v in canonical_order(s)]
            m = _permute_legs(np.asarray(self.matrix, dtype=complex), self.d, perm)
            object.__setattr__(self, "matrix", m)
            s = canonical_order(s)
        object.__setattr__(self, "support", s)
        m = np.asarray(self.matrix, dtype=complex)
        dim = self.d ** len(s)
        if m.shape != (dim, dim):
            raise AlgebraError(f"matrix shape {m.shape} does not match {len(s)} sites of dimension {self.d}")
        object.__setattr__(self, "matrix", m)

    @property
    def n_sites(self) -> int:
        return len(self.support)

    def __matmul__(self, other: "LocalOperator") -> "LocalOperator":
        return op_mul(self, other)

    def __add__(self, other: "LocalOperator") -> "LocalOperator":
        a, b = align(self, other)
        return LocalOperator(a.support, a.matrix + b.matrix, a.d)

    def __sub__(self, other: "LocalOperator") -> "LocalOperator":
        a, b = align(self, other)
        return LocalOperator(a.support, a.matrix - b.matrix, a.d)

    def __mul__(self, c) -> "LocalOperator":
        return LocalOperator(self.support, self.matrix * c, self.d)

    __rmul__ = __mul__

    @property
    def H(self) -> "LocalOperator":
        return op_adjoint(self)

    def allclose(self, other: "LocalOperator", atol: float = ATOL) -> bool:
        a, b = align(self, other)
        return bool(np.allclose(a.matrix, b.matrix, atol=atol, rtol=0))

    def max_dev(self, other: "LocalOperator") -> float:
        a, b = align(self, other)
        return float(np.max(np.abs(a.matrix - b.matrix))) if a.matrix.size else 0.0

    def to_json(self) -> dict:
        return {
            "support": [list(v) if isinstance(v, tuple) else v for v in self.support],
            "d": self.d,
            "re": self.matrix.real.ravel().tolist(),
            "im": self.matrix.imag.ravel().tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LocalOperator":
        support = tuple(tuple(v) if isinstance(v, list) else v for v in obj["support"])
        d = int(obj["d"])
        dim = d ** len(support)
        m = np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj.get("im", np.zeros(dim * dim)), dtype=float)
        return cls(support, m.reshape(dim, dim), d)


@dataclass(frozen=True, eq=False)
class StateVector:
    """Vector in ``H_support``; index = configuration in mixed radix, last site fastest."""

    support: tuple
    amplitudes: np.ndarray
    d: int = 2

    def __post_init__(self):
        s = _as_support(self.support)
        if s != canonical_order(s):
            raise AlgebraError("state vector support must be in canonical order")
        v = np.asarray(self.amplitudes, dtype=complex).ravel()
        if v.shape != (self.d ** len(s),):
            raise AlgebraError(f"vector length {v.shape[0]} does not match {len(s)} sites")
        object.__setattr__(self, "support", s)
        object.__setattr__(self, "amplitudes", v)

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((self.d,) * len(self.support))

    def norm2(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def to_json(self) -> dict:
        return {
            "support": [list(v) if isinstance(v, tuple) else v for v in self.support],
            "d": self.d,
            "re": self.amplitudes.real.tolist(),
            "im": self.amplitudes.imag.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "StateVector":
        support = tuple(tuple(v) if isinstance(v, list) else v for v in obj["support"])
        v = np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj.get("im", np.zeros(len(obj["re"]))), dtype=float)
        return cls(support, v, int(obj["d"]))


def _permute_legs(m: np.ndarray, d: int, perm: Sequence[int]) -> np.ndarray:
    """Reorder operator legs so that new leg ``j`` is old leg ``perm[j]``."""
    n = len(perm)
    if n == 0:
        return m
    t = m.reshape((d,) * (2 * n))
    t = t.transpose(list(perm) + [p + n for p in perm])
    return t.reshape(d**n, d**n)


def identity(support: Iterable, d: int = 2) -> LocalOperator:
    s = canonical_order(support)
    return LocalOperator(s, np.eye(d ** len(s), dtype=complex), d)


def scalar(c: complex, d: int = 2) -> LocalOperator:
    return LocalOperator((), np.array([[c]], dtype=complex), d)


def matrix_unit(x, i: int, j: int, d: int = 2) -> LocalOperator:
    """``e_ij`` at site ``x`` (1-based indices)."""
    if not (1 <= i <= d and 1 <= j <= d):
        raise AlgebraError(f"matrix unit indices ({i}, {j}) out of range for d={d}")
    m = np.zeros((d, d), dtype=complex)
    m[i - 1, j - 1] = 1.0
    return LocalOperator((x,), m, d)


def site_operator(x, m, d: int | None = None) -> LocalOperator:
    m = np.asarray(m, dtype=complex)
    return LocalOperator((x,), m, d or m.shape[0])


def kron_ops(*ops: LocalOperator) -> LocalOperator:
    """Tensor product of operators with disjoint supports."""
    d = ops[0].d
    support = ()
    m = np.eye(1, dtype=complex)
    for op in ops:
        if set(op.support) & set(support):
            raise AlgebraError("kron_ops needs disjoint supports")
        support = support + op.support
        m = np.kron(m, op.matrix)
    return LocalOperator(support, m, d)


def embed(a: LocalOperator, region: Iterable) -> LocalOperator:
    """``a`` tensored with the identity on ``region \\ support(a)``."""
    region = canonical_order(region)
    if not set(a.support) <= set(region):
        raise AlgebraError(f"support {a.support} not contained in region {region}")
    if region == a.support:
        return a
    rest = tuple(v for v in region if v not in a.support)
    m = np.kron(a.matrix, np.eye(a.d ** len(rest), dtype=complex))
    order = a.support + rest
    perm = [order.index(v) for v in region]
    return LocalOperator(region, _permute_legs(m, a.d, perm), a.d)


def align(a: LocalOperator, b: LocalOperator) -> tuple[LocalOperator, LocalOperator]:
    if a.d != b.d:
        raise AlgebraError(f"local dimensions differ: {a.d} vs {b.d}")
    u = canonical_order(a.support + b.support)
    if len(u) > MAX_OPERATOR_SITES:
        raise AlgebraError(f"union support of {len(u)} sites exceeds the dense operator cap")
    return embed(a, u), embed(b, u)


def op_mul(a: LocalOperator, b: LocalOperator) -> LocalOperator:
    a, b = align(a, b)
    return LocalOperator(a.support, a.matrix @ b.matrix, a.d)


def op_adjoint(a: LocalOperator) -> LocalOperator:
    return LocalOperator(a.support, a.matrix.conj().T, a.d)


def normalized_partial_trace(a: LocalOperator, keep: Iterable) -> LocalOperator:
    """Trace out ``support(a) \\ keep`` and divide by its dimension."""
    keep = canonical_order(keep)
    if not set(keep) <= set(a.support):
        raise AlgebraError(f"kept sites {keep} not contained in support {a.support}")
    n = a.n_sites
    traced = [j for j, v in enumerate(a.support) if v not in keep]
    kept = [j for j, v in enumerate(a.support) if v in keep]
    if not traced:
        return a
    t = a.matrix.reshape((a.d,) * (2 * n))
    rows = list(range(n))
    cols = [j + n for j in range(n)]
    for j in traced:
        cols[j] = rows[j]
    out = kept + [j + n for j in kept]
    r = np.einsum(t, rows + cols, out)
    dk = a.d ** len(kept)
    return LocalOperator(keep, r.reshape(dk, dk) / a.d ** len(traced), a.d)


def full_normalized_trace(a: LocalOperator) -> complex:
    return complex(np.trace(a.matrix) / a.matrix.shape[0])


def is_hermitian(a: LocalOperator | np.ndarray, atol: float = ATOL) -> bool:
    m = a.matrix if isinstance(a, LocalOperator) else np.asarray(a)
    return bool(np.allclose(m, m.conj().T, atol=atol, rtol=0))


def herm_exp(h: LocalOperator, beta: complex) -> LocalOperator:
    """``exp(beta * H)`` for Hermitian ``H`` via its eigendecomposition."""
    if not is_hermitian(h):
        raise AlgebraError("herm_exp requires a Hermitian generator")
    m = 0.5 * (h.matrix + h.matrix.conj().T)
    w, u = np.linalg.eigh(m)
    e = (u * np.exp(beta * w)) @ u.conj().T
    return LocalOperator(h.support, e, h.d)


def psd_sqrt(m: np.ndarray, atol: float = ATOL) -> np.ndarray:
    """Square root of a positive semidefinite matrix; raises if ``m`` is not PSD."""
    m = np.asarray(m, dtype=complex)
    if not np.allclose(m, m.conj().T, atol=atol, rtol=0):
        raise AlgebraError("matrix is not Hermitian")
    w, u = np.linalg.eigh(0.5 * (m + m.conj().T))
    if w.min() < -atol * max(1.0, abs(w).max()):
        raise AlgebraError(f"matrix is not positive semidefinite (min eigenvalue {w.min():.3e})")
    return (u * np.sqrt(np.clip(w, 0, None))) @ u.conj().T


def psd_inv_sqrt(m: np.ndarray, atol: float = ATOL) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    w, u = np.linalg.eigh(0.5 * (m + m.conj().T))
    if w.min() <= atol * max(1.0, abs(w).max()):
        raise AlgebraError("matrix is singular or not positive definite")
    return (u / np.sqrt(w)) @ u.conj().T


def basis_vector(config: dict | Sequence[int], support: Iterable, d: int = 2) -> StateVector:
    """``e_omega`` for the configuration ``omega`` (values 1..d) on ``support``."""
    s = canonical_order(support)
    vals = [config[v] for v in s] if isinstance(config, dict) else list(config)
    if len(vals) != len(s) or any(not 1 <= c <= d for c in vals):
        raise AlgebraError("configuration does not match support")
    idx = 0
    for c in vals:
        idx = idx * d + (c - 1)
    v = np.zeros(d ** len(s), dtype=complex)
    v[idx] = 1.0
    return StateVector(s, v, d)


def vec_inner(u: StateVector, v: StateVector) -> complex:
    """``<u, v>``, conjugate-linear in ``u``."""
    if u.support != v.support or u.d != v.d:
        raise AlgebraError("vectors live on different spaces")
    return complex(np.vdot(u.amplitudes, v.amplitudes))


def apply(a: LocalOperator, v: StateVector) -> StateVector:
    """Apply ``a`` (embedded into ``support(v)``) by contracting only its own legs."""
    if a.d != v.d:
        raise AlgebraError("local dimensions differ")
    if not set(a.support) <= set(v.support):
        raise AlgebraError(f"operator support {a.support} not inside vector support {v.support}")
    n = len(v.support)
    if a.n_sites == 0:
        return StateVector(v.support, a.matrix[0, 0] * v.amplitudes, v.d)
    pos = [v.support.index(x) for x in a.support]
    t = v.tensor()
    ta = a.matrix.reshape((a.d,) * (2 * a.n_sites))
    vin = list(range(n))
    new = [n + j for j in range(a.n_sites)]
    vout = list(vin)
    for j, p in enumerate(pos):
        vout[p] = new[j]
    r = np.einsum(ta, new + pos, t, vin, vout)
    return StateVector(v.support, r.ravel(), v.d)


def expectation(v: StateVector, a: LocalOperator) -> complex:
    return vec_inner(v, apply(a, v))


def reduced_density(v: StateVector, keep: Iterable) -> LocalOperator:
    """Unnormalized reduced operator ``Tr_{rest} |v><v|`` (ordinary, not normalized, trace)."""
    keep = canonical_order(keep)
    n = len(v.support)
    pos = [v.support.index(x) for x in keep]
    t = v.tensor()
    ket = list(range(n))
    bra = list(range(n))
    for j, p in enumerate(pos):
        bra[p] = n + j
    r = np.einsum(t, ket, t.conj(), bra, pos + [n + j for j in range(len(pos))])
    dk = v.d ** len(keep)
    return LocalOperator(keep, r.reshape(dk, dk), v.d)


def operator_basis(support: Iterable, d: int = 2):
    """Yield all product matrix units on ``support`` as ``(labels, operator)``."""
    s = canonical_order(support)
    dim = d ** len(s)
    for idx in range(dim * dim):
        r, c = divmod(idx, dim)
        m = np.zeros((dim, dim), dtype=complex)
        m[r, c] = 1.0
        yield (r, c), LocalOperator(s, m, d)


def sandwich_reduced(gates: Sequence[LocalOperator], sites: Sequence, keep: Iterable) -> np.ndarray:
    """``Tr_{sites \\ keep}(P^* P)`` for ``P = g_1 g_2 ... g_m``, by tensor-network contraction.

    Ordinary (unnormalized) partial trace; the dense product is never formed,
    so this reaches regions far beyond the dense operator cap.
    """
    sites = canonical_order(sites)
    keep = canonical_order(keep)
    if not gates:
        raise AlgebraError("empty gate list")
    d = gates[0].d
    chain = [op_adjoint(g) for g in reversed(gates)] + list(gates)
    counter = iter(range(10**9))
    first = {s: next(counter) for s in sites}
    cur = dict(first)
    operands = []
    for g in chain:
        if not set(g.support) <= set(sites):
            raise AlgebraError(f"gate support {g.support} outside sites")
        if g.n_sites == 0:
            operands += [g.matrix.reshape(()), []]
            continue
        rows = [cur[s] for s in g.support]
        cols = [next(counter) for _ in g.support]
        for s, c in zip(g.support, cols):
            cur[s] = c
        operands += [g.matrix.reshape((d,) * (2 * g.n_sites)), rows + cols]
    factor = 1.0
    for s in sites:
        if cur[s] == first[s]:
            if s in keep:
                c = next(counter)
                operands += [np.eye(d, dtype=complex), [first[s], c]]
                cur[s] = c
            else:
                factor *= d
    # close the trace on the complement
    rename = {cur[s]: first[s] for s in sites if s not in keep}
    operands = [
        [rename.get(i, i) for i in op] if isinstance(op, list) else op for op in operands
    ]
    out = [first[s] for s in keep] + [cur[s] for s in keep]
    r = opt_einsum.contract(*operands, out, optimize="greedy")
    dk = d ** len(keep)
    return factor * np.asarray(r).reshape(dk, dk)
