"""Entangled Markov fields built from per-edge amplitude matrices.

An amplitude field assigns to every edge ``{x, y}`` a ``d x d`` complex matrix
whose squared moduli are bi-stochastic.  Matrices are stored for the
canonically ordered pair ``(x, y)`` (on a rooted tree: ``(parent, child)``)
with the row index belonging to ``x``.  :meth:`AmplitudeField.amp` returns
the matrix for either orientation.

The state is ``phi(a) = <psi_L, a psi_L> / d`` for a large enough connected
region ``L``; :func:`emf_expect` takes ``L`` to be the double closure of the
support's connected hull and checks that one more boundary vertex does not
change the value.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from . import algebra as alg
from .algebra import LocalOperator, StateVector
from .graph import Graph, GraphError, Tree, canonical_key, canonical_order

BISTOCHASTIC_TOL = 1e-10
RANK_CUTOFF = 1e-10


class FieldError(ValueError):
    pass


class ConsistencyError(AssertionError):
    """An internal cross-check between two evaluations disagreed."""


def sinkhorn(m: np.ndarray, tol: float = 1e-15, max_iter: int = 10_000) -> np.ndarray:
    """Scale a strictly positive square matrix to a doubly stochastic one."""
    p = np.array(m, dtype=float)
    if np.any(p <= 0):
        raise ValueError("sinkhorn needs strictly positive entries")
    for _ in range(max_iter):
        p /= p.sum(axis=1, keepdims=True)
        p /= p.sum(axis=0, keepdims=True)
        if np.max(np.abs(p.sum(axis=1) - 1.0)) < tol:
            return p
    raise RuntimeError("sinkhorn iteration did not converge")


def random_amplitude(d: int, rng: np.random.Generator, phases: bool = True) -> np.ndarray:
    modulus2 = sinkhorn(rng.uniform(0.05, 1.0, size=(d, d)))
    psi = np.sqrt(modulus2).astype(complex)
    if phases:
        psi *= np.exp(2j * np.pi * rng.uniform(size=(d, d)))
    return psi


EXAMPLE_MATRIX = np.array([[1.0, np.sqrt(2.0)], [np.sqrt(2.0), 1.0]]) / np.sqrt(3.0)


@dataclass(frozen=True, eq=False)
class AmplitudeField:
    graph: Graph
    d: int
    amps: dict = field(repr=False)
    check: bool = True

    def __post_init__(self):
        amps = {}
        for (u, v), m in self.amps.items():
            m = np.asarray(m, dtype=complex)
            if m.shape != (self.d, self.d):
                raise FieldError(f"amplitude on {(u, v)} has shape {m.shape}")
            if not self.graph.adjacent(u, v):
                raise FieldError(f"{u!r} and {v!r} are not adjacent")
            if canonical_key(u) > canonical_key(v):
                u, v, m = v, u, m.T
            amps[(u, v)] = m
        missing = [e for e in self.graph.internal_edges(self.graph.vertices) if e not in amps]
        if missing:
            raise FieldError(f"edges without amplitudes: {missing[:4]}")
        object.__setattr__(self, "amps", amps)
        if self.check:
            for e, m in amps.items():
                p = np.abs(m) ** 2
                dev = max(np.max(np.abs(p.sum(0) - 1)), np.max(np.abs(p.sum(1) - 1)))
                if dev > BISTOCHASTIC_TOL:
                    raise FieldError(f"|psi|^2 on edge {e} is not bi-stochastic (deviation {dev:.2e})")

    def amp(self, x, y) -> np.ndarray:
        """Amplitude matrix with rows indexed by ``x`` and columns by ``y``."""
        if (x, y) in self.amps:
            return self.amps[(x, y)]
        if (y, x) in self.amps:
            return self.amps[(y, x)].T
        raise FieldError(f"no amplitude for edge {(x, y)}")

    def has_uniform_modulus(self, tol: float = BISTOCHASTIC_TOL) -> bool:
        return all(np.max(np.abs(np.abs(m) ** 2 - 1.0 / self.d)) <= tol for m in self.amps.values())

    @classmethod
    def constant(cls, graph: Graph, matrix, d: int | None = None) -> "AmplitudeField":
        m = np.asarray(matrix, dtype=complex)
        return cls(graph, d or m.shape[0], {e: m for e in graph.internal_edges(graph.vertices)})

    @classmethod
    def random(cls, graph: Graph, d: int, rng: np.random.Generator, phases: bool = True) -> "AmplitudeField":
        return cls(graph, d, {e: random_amplitude(d, rng, phases) for e in graph.internal_edges(graph.vertices)})

    @classmethod
    def uniform_modulus(cls, graph: Graph, d: int, rng: np.random.Generator | None = None,
                        signs_only: bool = False) -> "AmplitudeField":
        """Entries of modulus ``1/sqrt(d)``; random phases (or random signs) when ``rng`` is given."""
        amps = {}
        for e in graph.internal_edges(graph.vertices):
            if rng is None:
                ph = np.ones((d, d))
            elif signs_only:
                ph = rng.choice([-1.0, 1.0], size=(d, d))
            else:
                ph = np.exp(2j * np.pi * rng.uniform(size=(d, d)))
            amps[e] = ph / np.sqrt(d)
        return cls(graph, d, amps)

    @classmethod
    def example(cls, graph: Graph) -> "AmplitudeField":
        """``psi(1,1) = psi(2,2) = 1/sqrt(3)``, ``psi(1,2) = psi(2,1) = sqrt(2/3)`` on every edge."""
        return cls.constant(graph, EXAMPLE_MATRIX, 2)

    def to_json(self) -> dict:
        def enc(v):
            return list(v) if isinstance(v, tuple) else v

        return {
            "d": self.d,
            "edges": [
                {"parent": enc(u), "child": enc(v), "re": m.real.tolist(), "im": m.imag.tolist()}
                for (u, v), m in sorted(self.amps.items(), key=lambda kv: (canonical_key(kv[0][0]), canonical_key(kv[0][1])))
            ],
        }

    @classmethod
    def from_json(cls, graph: Graph, obj: dict) -> "AmplitudeField":
        def dec(v):
            return tuple(v) if isinstance(v, list) else v

        d = int(obj["d"])
        amps = {}
        for e in obj["edges"]:
            m = np.asarray(e["re"], dtype=float) + 1j * np.asarray(e.get("im", np.zeros((d, d))), dtype=float)
            amps[(dec(e["parent"]), dec(e["child"]))] = m
        return cls(graph, d, amps)


# ---------------------------------------------------------------- vectors


def _psi_tensor(field: AmplitudeField, region) -> tuple[tuple, np.ndarray]:
    region = canonical_order(region)
    if len(region) > alg.MAX_VECTOR_SITES:
        raise FieldError(f"region of {len(region)} sites exceeds the dense vector cap")
    n, d = len(region), field.d
    t = np.ones((d,) * n, dtype=complex)
    pos = {v: j for j, v in enumerate(region)}
    for u, v in field.graph.internal_edges(region):
        shape = [1] * n
        shape[pos[u]] = d
        shape[pos[v]] = d
        # pos[u] < pos[v] since internal_edges is canonically ordered
        t = t * field.amp(u, v).reshape(shape)
    return region, t


def psi_vector(field: AmplitudeField, region) -> StateVector:
    """``psi_L(omega) = prod over internal edges of psi_xy(omega_x, omega_y)``; ``L`` must be connected."""
    region = canonical_order(region)
    if not field.graph.is_connected(region):
        raise GraphError("psi_vector needs a non-empty connected region")
    region, t = _psi_tensor(field, region)
    return StateVector(region, t.ravel(), field.d)


def _expect_on(field: AmplitudeField, region, a: LocalOperator) -> complex:
    return alg.expectation(psi_vector(field, region), a) / field.d


def expectation_region(field: AmplitudeField, a: LocalOperator) -> tuple:
    """Double closure of the connected hull of ``support(a)``."""
    tree = field.graph
    if not isinstance(tree, Tree):
        raise FieldError("the entangled Markov field state is defined on trees only")
    if a.n_sites == 0:
        return ()
    hull = tree.connected_hull(a.support)
    return tree.closure(tree.closure(hull))


def emf_expect(field: AmplitudeField, a: LocalOperator, check: bool = True, atol: float = 1e-10) -> complex:
    """``phi(a)``; with ``check`` the value is recomputed with one extra boundary vertex."""
    if a.n_sites == 0:
        return complex(a.matrix[0, 0])
    region = expectation_region(field, a)
    val = _expect_on(field, region, a)
    if check:
        extra = field.graph.boundary(region)
        if extra:
            val2 = _expect_on(field, region + (extra[0],), a)
            scale = max(1.0, float(np.abs(a.matrix).max()))
            if abs(val2 - val) > atol * scale:
                raise ConsistencyError(f"volume dependence {abs(val2 - val):.2e} at {extra[0]!r}")
    return val


def reduced_density(field: AmplitudeField, sites) -> LocalOperator:
    """Density matrix of ``phi`` restricted to ``sites``: ``phi(a) = trace(rho a)``."""
    sites = canonical_order(sites)
    probe = alg.identity(sites, field.d)
    region = expectation_region(field, probe)
    v = psi_vector(field, region)
    rho = alg.reduced_density(v, sites)
    return LocalOperator(sites, rho.matrix / field.d, field.d)


# ------------------------------------------------------------- isometries


@dataclass(frozen=True, eq=False)
class BoundaryIsometry:
    """``V_(z|x): H_z -> H_z (x) H_x``, ``e_i(z) -> sum_j psi_zx(i, j) e_i(z) (x) e_j(x)``."""

    z: object
    x: object
    matrix: np.ndarray  # rows: canonical order of (z, x); columns: H_z
    d: int

    @property
    def out_support(self) -> tuple:
        return canonical_order((self.z, self.x))

    def apply_to(self, v: StateVector) -> StateVector:
        if self.z not in v.support or self.x in v.support:
            raise FieldError("isometry needs z inside and x outside the current support")
        n = len(v.support)
        new_support = canonical_order(v.support + (self.x,))
        t = v.tensor()
        zpos = v.support.index(self.z)
        vin = list(range(n))
        xi = n  # fresh label for the new leg
        out_labels = {s: j for j, s in enumerate(v.support)}
        out_labels[self.x] = xi
        zout = n + 1
        out_labels[self.z] = zout
        tv = self.matrix.reshape((self.d, self.d, self.d))
        if self.out_support[0] == self.z:
            vlab = [zout, xi, zpos]
        else:
            vlab = [xi, zout, zpos]
        res = np.einsum(tv, vlab, t, vin, [out_labels[s] for s in new_support])
        return StateVector(new_support, res.ravel(), v.d)


def boundary_isometry(field: AmplitudeField, z, x) -> BoundaryIsometry:
    if not field.graph.adjacent(z, x):
        raise FieldError(f"{x!r} is not adjacent to {z!r}")
    d = field.d
    psi = field.amp(z, x)  # rows: z, cols: x
    out = canonical_order((z, x))
    m = np.zeros((d * d, d), dtype=complex)
    for i in range(d):
        for j in range(d):
            row = i * d + j if out[0] == z else j * d + i
            m[row, i] = psi[i, j]
    return BoundaryIsometry(z, x, m, d)


def compose_isometries(field: AmplitudeField, z, xs) -> tuple[tuple, np.ndarray]:
    """Matrix of ``V_(z|x_m) ... V_(z|x_1)`` (``x_1`` applied first) on ``H_z``."""
    cols = []
    support = None
    for i in range(1, field.d + 1):
        v = alg.basis_vector([i], [z], field.d)
        for x in xs:
            v = boundary_isometry(field, z, x).apply_to(v)
        support = v.support
        cols.append(v.amplitudes)
    return support, np.stack(cols, axis=1)


def shell_isometry_matrix(field: AmplitudeField, region) -> tuple[tuple, np.ndarray]:
    """Product of all ``V_(x|y)``, ``x`` in ``region``, ``y`` in its boundary, as a dense matrix."""
    region = canonical_order(region)
    tree = field.graph
    pairs = [(tree.check_tree_property(region)[y], y) for y in tree.boundary(region)]
    dim = field.d ** len(region)
    cols = []
    out_support = None
    for idx in range(dim):
        e = np.zeros(dim, dtype=complex)
        e[idx] = 1.0
        v = StateVector(region, e, field.d)
        for z, y in pairs:
            v = boundary_isometry(field, z, y).apply_to(v)
        out_support = v.support
        cols.append(v.amplitudes)
    return out_support, np.stack(cols, axis=1)


def emf_as_chain(field: AmplitudeField, n_max: int, a: LocalOperator, method: str = "auto") -> complex:
    """``rho o E_1 o ... o E_{n_max}(a)`` with ``E_j(b) = V_j^* b V_j`` on balls ``B_1 = {root}``, ``B_{j+1} = closure(B_j)``.

    ``rho(b) = <sum_i e_i, b sum_j e_j> / d`` on the root.  ``method="heisenberg"``
    pulls ``a`` back through dense shell isometries (``B_{n_max+1}`` must fit the
    operator cap); ``"schroedinger"`` pushes ``sum_i e_i`` forward through the
    same isometries and pairs the result with ``a`` (vector cap).
    """
    tree = field.graph
    if not isinstance(tree, Tree):
        raise FieldError("emf_as_chain needs a rooted tree")
    balls = [(tree.root,)]
    for _ in range(n_max):
        balls.append(tree.closure(balls[-1]))
    # balls[j] is B_{j+1}
    if not set(a.support) <= set(balls[n_max - 1]):
        raise FieldError(f"observable support {a.support} must lie in B_{n_max}")
    top = len(balls[n_max])
    if method == "auto":
        method = "heisenberg" if top <= alg.MAX_OPERATOR_SITES else "schroedinger"
    if method == "heisenberg":
        if top > alg.MAX_OPERATOR_SITES:
            raise FieldError(f"B_{n_max + 1} has {top} sites; dense operator cap is {alg.MAX_OPERATOR_SITES}")
        b = alg.embed(a, balls[n_max]).matrix
        for j in range(n_max, 0, -1):
            out_support, V = shell_isometry_matrix(field, balls[j - 1])
            if out_support != balls[j]:
                raise ConsistencyError("shell isometry does not land on the next ball")
            b = V.conj().T @ b @ V
        return complex(b.sum() / field.d)
    if method == "schroedinger":
        if top > alg.MAX_VECTOR_SITES:
            raise FieldError(f"B_{n_max + 1} has {top} sites; vector cap is {alg.MAX_VECTOR_SITES}")
        v = StateVector((tree.root,), np.ones(field.d, dtype=complex), field.d)
        for j in range(1, n_max + 1):
            owner = tree.check_tree_property(balls[j - 1])
            for y in tree.boundary(balls[j - 1]):
                v = boundary_isometry(field, owner[y], y).apply_to(v)
        return alg.expectation(v, a) / field.d
    raise ValueError(f"unknown method {method!r}")


# -------------------------------------------- generalized Markov reconstruction


def gqms_reconstruct(field: AmplitudeField, a: LocalOperator, n: int) -> complex:
    """Evaluate ``phi(a)`` through boundary states and shell isometries conditioned on complements.

    Needs ``|psi_xy(i, j)|^2 = 1/d`` on every edge.  Start from the normalized
    product of star vectors on levels ``n+1 .. n+2`` and add shells ``n, ..., 0``
    with ``e_i(x_1..x_m) -> d^{(m-1)/2} sum_j prod_l psi_{y x_l}(j, i_l) e_j(y) (x) e_i``.
    """
    tree = field.graph
    if not isinstance(tree, Tree):
        raise FieldError("gqms_reconstruct needs a rooted tree")
    if not field.has_uniform_modulus():
        raise FieldError("generalized Markov reconstruction needs |psi(i, j)|^2 = 1/d on every edge")
    if any(len(v) > n for v in a.support):
        raise FieldError(f"observable support must lie within level {n}")
    if tree.depth < n + 2:
        raise FieldError(f"tree depth {tree.depth} < {n + 2}")
    d = field.d
    top = tuple(v for v in tree.vertices if n + 1 <= len(v) <= n + 2)
    stars = tree.sphere(n + 1)
    region, t = _psi_tensor(field, top)
    t = t * d ** (-len(stars) / 2)
    support = list(region)
    for level in range(n, -1, -1):
        for y in tree.sphere(level):
            kids = [x for x in tree.neighbors(y) if len(x) == level + 1]
            kids = canonical_order(kids)
            m = len(kids)
            # factor[j, i_1, ..., i_m] = d^{(m-1)/2} prod_l psi_{y x_l}(j, i_l)
            factor = np.full((d,) * (m + 1), d ** ((m - 1) / 2), dtype=complex)
            for l, x in enumerate(kids):
                shape = [1] * (m + 1)
                shape[0] = d
                shape[l + 1] = d
                factor = factor * field.amp(y, x).reshape(shape)
            nlab = len(support)
            labels = list(range(nlab))
            kid_labels = [support.index(x) for x in kids]
            new = nlab
            t = np.einsum(factor, [new] + kid_labels, t, labels, [new] + labels)
            support = [y] + support
        order = canonical_order(support)
        perm = [support.index(s) for s in order]
        t = t.transpose(perm)
        support = list(order)
    v = StateVector(tuple(support), t.ravel(), d)
    return alg.expectation(v, a)


# ---------------------------------------------------------- classicality


@dataclass
class ClassicalityReport:
    sites: tuple
    density: np.ndarray
    eigenvalues: np.ndarray
    rank: int
    product_deviation: float
    ppt: bool | None
    min_partial_transpose_eigenvalue: float | None
    site_marginals: dict

    def to_json(self) -> dict:
        return {
            "sites": [list(v) for v in self.sites],
            "rank": self.rank,
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "product_deviation": self.product_deviation,
            "ppt": self.ppt,
            "ppt_criterion": "partial-transpose positivity (external criterion, exact for 2x2)",
            "min_partial_transpose_eigenvalue": self.min_partial_transpose_eigenvalue,
            "site_marginals": self.site_marginals,
            "density_re": self.density.real.tolist(),
            "density_im": self.density.imag.tolist(),
        }


def matrix_rank(eigenvalues, cutoff: float = RANK_CUTOFF) -> int:
    ev = np.asarray(eigenvalues, dtype=float)
    return int(np.sum(ev > cutoff * ev.max())) if ev.size else 0


def product_deviation(rho: np.ndarray, d: int, n_left: int, n_right: int) -> float:
    """``max |phi(a b) - phi(a) phi(b)|`` over matrix units ``a`` (left block), ``b`` (right block)."""
    dl, dr = d**n_left, d**n_right
    r4 = rho.reshape(dl, dr, dl, dr)
    rl = np.einsum("ajbj->ab", r4)
    rr = np.einsum("iaib->ab", r4)
    # phi(e_rc x e_st) = rho[(c,t),(r,s)]
    joint = r4.transpose(0, 2, 1, 3)  # [c, r, t, s]
    prod_ = np.einsum("cr,ts->crts", rl, rr)
    return float(np.max(np.abs(joint - prod_)))


def partial_transpose(rho: np.ndarray, d: int) -> np.ndarray:
    """Partial transpose on the second factor of a two-site density matrix."""
    return rho.reshape(d, d, d, d).transpose(0, 3, 2, 1).reshape(d * d, d * d)


def path_segment(tree: Tree, n: int) -> tuple:
    """Levels ``1..n`` along the first branch, so both ends have a path neighbour outside."""
    seg = tuple((1,) * m for m in range(1, n + 1))
    need = (1,) * (n + 1)
    if need not in set(tree.vertices):
        raise FieldError(f"no path of {n + 2} vertices through the first branch")
    return seg


def classicality_report(field: AmplitudeField, n: int, sites=None) -> ClassicalityReport:
    tree = field.graph
    if sites is None:
        sites = path_segment(tree, n)
    sites = canonical_order(sites)
    d = field.d
    rho = reduced_density(field, sites).matrix
    ev = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[::-1]
    rank = matrix_rank(ev)
    pdev = product_deviation(rho, d, n // 2, n - n // 2) if n >= 2 else 0.0
    ppt = min_pt = None
    if n == 2:
        min_pt = float(np.linalg.eigvalsh(partial_transpose(rho, d)).min())
        ppt = min_pt >= -1e-12
    marg = alg.normalized_partial_trace(LocalOperator(sites, rho, d), [sites[0]]).matrix * d ** (n - 1)
    site_marginals = {f"e{i + 1}{j + 1}": complex(marg[j, i]).real for i in range(d) for j in range(d)}
    return ClassicalityReport(sites, rho, ev, rank, pdev, ppt, min_pt, site_marginals)


def norm_law_deviation(field: AmplitudeField, regions) -> float:
    """``max | ||psi_L||^2 - d |`` over the given regions (each connected, ``|L| >= 2``)."""
    dev = 0.0
    for r in regions:
        v = psi_vector(field, r)
        dev = max(dev, abs(v.norm2() - field.d))
    return dev


def brute_force_psi(field: AmplitudeField, region) -> dict:
    """Configuration -> amplitude by explicit enumeration (test oracle)."""
    region = canonical_order(region)
    edges = field.graph.internal_edges(region)
    out = {}
    for cfg in product(range(field.d), repeat=len(region)):
        w = dict(zip(region, cfg))
        amp = 1.0 + 0j
        for u, v in edges:
            amp *= field.amp(u, v)[w[u], w[v]]
        out[cfg] = amp
    return out
