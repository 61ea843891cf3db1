"""The full invariant suite behind ``qmf run`` in ``verify`` mode.

Each check reports a measured value, a tolerance and a comparison direction
(``le``: value must not exceed the tolerance; ``gt``: value must exceed it,
used by must-fail controls).  ``REFS`` tags every check with the statement of
the source it certifies, as required by the report schema.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import algebra as alg
from . import cayley_chain as cc
from . import emf
from . import kernels as kn
from .graph import ROOT, build_cayley, connected_subsets, cycle_graph, tree_from_edges

# check name -> reference label in the source text
REFS = {
    "norm_law": "Cor. 5.4",
    "volume_invariance": "Prop. 5.3",
    "example_phi_e11": "Sec. 5 example",
    "example_phi_e11_e11": "Sec. 5 example",
    "example_density_rank": "Sec. 5 example",
    "example_product_deviation": "Sec. 5 example",
    "isometry": "Prop. 5.5",
    "sibling_commutation": "Prop. 5.5",
    "isometry_extends_psi": "Prop. 5.5",
    "chain_equals_field": "Prop. 5.6",
    "gqms_equals_field": "Prop. 5.7",
    "non_tree_norm_failure": "Remark after Prop. 5.7",
    "hopping_closed_forms": "Sec. 7",
    "diagonal_closed_forms": "Sec. 8",
    "hopping_residuals": "Eqs. (6.1), (6.2), (initial); Sec. 7",
    "diagonal_residuals": "Eqs. (6.1), (6.2), (initial); Sec. 8",
    "hopping_transfer_traces": "Theorem 7.1 proof (off-diagonal trace corrected)",
    "diagonal_transfer_traces": "Theorem 8.1 proof",
    "compatibility": "Theorem 6.1",
    "compatibility_local_step": "Theorem 6.1 proof, Eq. (6.2)",
    "quasi_cond_unital": "Eq. (Fn)",
    "quasi_cond_module": "Eq. (4.1)",
    "chain_expect_equals_phi_n": "Eq. (mar1)",
    "hopping_shift_invariance": "Theorem 7.1",
    "diagonal_shift_invariance": "Theorem 8.1",
    "perturbed_w0_shift_failure": "Eq. (initial)",
    "diagonal_clustering_rate": "Theorem 8.1",
    "hopping_clustering_decay": "Theorem 7.1",
    "clustering_brute_force": "Eq. (ffinofx)",
    "residuals": "Eqs. (6.1), (6.2), (initial)",
    "shift_invariance": "Sec. 6, shift invariance after Eq. (initial)",
}

BETAS = (0.1, 0.2, 0.5, 1.0)
COMPAT_BETAS = (0.2, 0.5, 1.0)


@dataclass
class Check:
    name: str
    value: float
    tolerance: float
    comparison: str = "le"
    detail: dict | None = None

    @property
    def passed(self) -> bool:
        if not np.isfinite(self.value):
            return False
        return self.value <= self.tolerance if self.comparison == "le" else self.value > self.tolerance

    def to_json(self) -> dict:
        out = {
            "name": self.name,
            "ref": REFS.get(self.name, "invented"),
            "value": float(self.value),
            "tolerance": float(self.tolerance),
            "comparison": self.comparison,
            "passed": bool(self.passed),
        }
        if self.detail:
            out["detail"] = self.detail
        return out


def random_tree_edges(rng: np.random.Generator, n_vertices: int) -> list[tuple[int, int]]:
    """Random recursive tree: vertex ``j`` attaches to a uniformly chosen earlier vertex."""
    return [(int(rng.integers(0, j)), j) for j in range(1, n_vertices)]


def _random_op(rng, support, d=2, hermitian=False):
    n = d ** len(support)
    m = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    if hermitian:
        m = m + m.conj().T
    return alg.LocalOperator(tuple(support), m, d)


def _rel(x, y):
    return abs(x - y) / max(1.0, abs(y))


# ----------------------------------------------------------------- fields


def norm_law_check(rng, n_trees: int = 50, max_vertices: int = 10) -> Check:
    worst = 0.0
    regions = 0
    for _ in range(n_trees):
        nv = int(rng.integers(2, max_vertices + 1))
        tree = tree_from_edges(random_tree_edges(rng, nv), 0)
        field = emf.AmplitudeField.random(tree, 2, rng)
        rs = [r for r in connected_subsets(tree, nv) if len(r) >= 2]
        regions += len(rs)
        worst = max(worst, emf.norm_law_deviation(field, rs))
    return Check("norm_law", worst, 1e-10, detail={"trees": n_trees, "regions": regions})


def example_checks() -> list[Check]:
    tree = build_cayley(1, 7)
    f = emf.AmplitudeField.example(tree)
    e11 = alg.matrix_unit((1,), 1, 1)
    pair = alg.kron_ops(alg.matrix_unit((1,), 1, 1), alg.matrix_unit((1, 1), 1, 1))
    rep = emf.classicality_report(f, 2)
    return [
        Check("example_phi_e11", abs(emf.emf_expect(f, e11) - 0.5), 1e-12),
        Check("example_phi_e11_e11", abs(emf.emf_expect(f, pair) - 1 / 6), 1e-12),
        Check("example_density_rank", abs(rep.rank - 4), 0.0, detail={"rank": rep.rank}),
        Check("example_product_deviation", rep.product_deviation, 1 / 20, "gt"),
    ]


def isometry_checks(rng, n_fields: int = 20) -> list[Check]:
    tree = build_cayley(2, 3)
    iso = comm = ext = 0.0
    for _ in range(n_fields):
        f = emf.AmplitudeField.random(tree, 2, rng)
        for z in tree.ball(2):
            for x in tree.successors(z):
                V = emf.boundary_isometry(f, z, x).matrix
                iso = max(iso, float(np.max(np.abs(V.conj().T @ V - np.eye(2)))))
            x, y = tree.successors(z)
            s1, m1 = emf.compose_isometries(f, z, [x, y])
            s2, m2 = emf.compose_isometries(f, z, [y, x])
            comm = max(comm, float(np.max(np.abs(m1 - m2))))
        region = ((), (1,))
        v = emf.boundary_isometry(f, (1,), (1, 2)).apply_to(emf.psi_vector(f, region))
        w = emf.psi_vector(f, region + ((1, 2),))
        ext = max(ext, float(np.max(np.abs(v.amplitudes - w.amplitudes))))
    return [
        Check("isometry", iso, 1e-12),
        Check("sibling_commutation", comm, 1e-12),
        Check("isometry_extends_psi", ext, 1e-12),
    ]


def _sample_observables(rng, count: int):
    # generalized reconstruction at level 1 already needs 15 sites on Cayley(2)
    one = [(), (1,), (2,)]
    two = [((), (1,)), ((1,), (2,)), ((), (2,))]
    obs = []
    for j in range(count):
        sup = [one[j % len(one)]] if j % 2 == 0 else list(two[j % len(two)])
        obs.append(_random_op(rng, sup))
    return obs


def equivalence_checks(rng, count: int = 20) -> list[Check]:
    tree = build_cayley(2, 5)
    f = emf.AmplitudeField.random(tree, 2, rng)
    fu = emf.AmplitudeField.uniform_modulus(tree, 2, rng)
    dchain = dgq = dvol = 0.0
    for a in _sample_observables(rng, count):
        n = max(len(v) for v in a.support)
        direct = emf.emf_expect(f, a)
        dchain = max(dchain, _rel(emf.emf_as_chain(f, n + 1, a), direct))
        directu = emf.emf_expect(fu, a)
        dchain = max(dchain, _rel(emf.emf_as_chain(fu, n + 1, a), directu))
        dgq = max(dgq, _rel(emf.gqms_reconstruct(fu, a, max(n, 1)), directu))
        # one full extra shell around the evaluation region
        region = emf.expectation_region(f, a)
        bigger = tree.closure(region)
        if len(bigger) <= alg.MAX_VECTOR_SITES:
            dvol = max(dvol, _rel(emf._expect_on(f, bigger, a), direct))
    return [
        Check("chain_equals_field", dchain, 1e-10),
        Check("gqms_equals_field", dgq, 1e-10),
        Check("volume_invariance", dvol, 1e-10),
    ]


def non_tree_check() -> Check:
    c = cycle_graph(4)
    f = emf.AmplitudeField.constant(c, emf.EXAMPLE_MATRIX)
    dev = abs(emf.psi_vector(f, c.vertices).norm2() - 2)
    return Check("non_tree_norm_failure", dev, 1e-3, "gt")


# ----------------------------------------------------------------- chains


def _spec(name, beta):
    return cc.solve_chain(kn.kernel_matrix(name, beta), 2, name=name, beta=beta)


def kernel_checks(name: str, betas=BETAS) -> list[Check]:
    closed = resid = transfer = 0.0
    rows = []
    for beta in betas:
        orc = kn.analytic_oracle(name, beta)
        spec = _spec(name, beta)
        closed = max(closed, abs(spec.alpha - orc.alpha), float(np.max(np.abs(spec.w0 - orc.w0))))
        r = max(cc.residual_normalization(spec), cc.residual_boundary(spec), cc.residual_initial(spec))
        resid = max(resid, r)
        T = cc.transfer_superoperator(spec)
        for key, m in orc.transfer.items():
            transfer = max(transfer, float(np.max(np.abs(T.apply(kn._E[key]) - m))))
        rows.append({"beta": beta, "alpha": spec.alpha, "alpha_closed": orc.alpha})
    return [
        Check(f"{name}_closed_forms", closed, 1e-10, detail={"rows": rows}),
        Check(f"{name}_residuals", resid, 1e-10),
        Check(f"{name}_transfer_traces", transfer, 1e-10),
    ]


def compatibility_checks(betas=COMPAT_BETAS) -> list[Check]:
    dev = local = 0.0
    for name in kn.KERNELS:
        for beta in betas:
            spec = _spec(name, beta)
            for n in (0, 1):
                dev = max(dev, cc.compatibility_check(spec, n))
            local = max(local, cc.local_step_residual(spec))
    return [Check("compatibility", dev, 1e-10), Check("compatibility_local_step", local, 1e-10)]


def quasi_cond_checks(rng) -> list[Check]:
    unital = module = path = 0.0
    for name in kn.KERNELS:
        spec = _spec(name, 0.5)
        for n in (0, 1):
            ball1 = spec.tree(n + 1).ball(n + 1)
            one = cc.quasi_cond_expectation(spec, n, alg.identity(ball1))
            unital = max(unital, one.max_dev(alg.identity(one.support)))
        a = _random_op(rng, [(1,), (1, 1)])
        c = _random_op(rng, [ROOT])
        lhs = cc.quasi_cond_expectation(spec, 1, alg.op_mul(c, a))
        rhs = alg.op_mul(c, cc.quasi_cond_expectation(spec, 1, a))
        module = max(module, lhs.max_dev(rhs))
        for sup in ([()], [(1,)], [(), (2,)], [(1,), (2,)]):
            b = _random_op(rng, sup)
            n = max(len(v) for v in sup)
            path = max(path, _rel(cc.chain_expect(spec, b), cc.phi_n(spec, n, b)))
    return [
        Check("quasi_cond_unital", unital, 1e-12),
        Check("quasi_cond_module", module, 1e-10),
        Check("chain_expect_equals_phi_n", path, 1e-10),
    ]


def shift_checks(rng) -> list[Check]:
    out = []
    e11, e12 = np.diag([1.0, 0.0]), np.array([[0.0, 1.0], [0.0, 0.0]])
    for name in kn.KERNELS:
        dev = 0.0
        for beta in BETAS:
            spec = _spec(name, beta)
            samples = [e11, e12, _random_op(rng, [ROOT], hermitian=True).matrix,
                       _random_op(rng, [(), (1,)])]
            for i in (1, 2):
                dev = max(dev, cc.shift_invariance_check(spec, i, samples))
        out.append(Check(f"{name}_shift_invariance", dev, 1e-10))
    spec = _spec("hopping", 0.5)
    bad = spec.with_w0(np.diag([1.5, 0.5]) / spec.alpha)
    dev = max(cc.shift_invariance_check(bad, i, [e11]) for i in (1, 2))
    out.append(Check("perturbed_w0_shift_failure", dev, 1e-3, "gt"))
    return out


def clustering_checks(beta_diag: float = 0.5, beta_hop: float = 0.2, N: int = 12) -> tuple[list[Check], list[dict]]:
    e11 = np.diag([1.0, 0.0])
    a_hop = np.array([[1.0, 1.0], [1.0, 0.0]])
    rows = []
    spec_d = _spec("diagonal", beta_diag)
    rd = cc.clustering_decay(spec_d, e11, e11, N)
    ratio_dev = max(_rel(r, np.tanh(beta_diag)) for r in rd.ratios[4:10])
    spec_h = _spec("hopping", beta_hop)
    rh = cc.clustering_decay(spec_h, a_hop, a_hop, N)
    lam2 = float(np.abs(rh.eigenvalues[1]))
    hop_dev = max(abs(r - lam2) / lam2 for r in rh.ratios[4:10])
    for label, spec, res in (("diagonal", spec_d, rd), ("hopping", spec_h, rh)):
        for row in res.table():
            rows.append({"kernel": label, "beta": spec.beta, **row})
    checks = [
        Check("diagonal_clustering_rate", ratio_dev, 1e-6,
              detail={"rate": rd.rate, "tanh_beta": float(np.tanh(beta_diag)), "flags": rd.flags}),
        Check("hopping_clustering_decay", max(hop_dev, float(rh.deltas[-1] > rh.deltas[0])), 1e-6,
              detail={"rate": rh.rate, "second_eigenvalue": lam2, "flags": rh.flags}),
        Check("clustering_brute_force", max(rd.brute_force_max_dev, rh.brute_force_max_dev), 1e-9),
    ]
    return checks, rows


def run_suite(seed: int = 0) -> tuple[list[Check], list[dict]]:
    rng = np.random.default_rng(seed)
    checks = [norm_law_check(rng)]
    checks += example_checks()
    checks += isometry_checks(rng)
    checks += equivalence_checks(rng)
    checks.append(non_tree_check())
    for name in kn.KERNELS:
        checks += kernel_checks(name)
    checks += compatibility_checks()
    checks += quasi_cond_checks(rng)
    checks += shift_checks(rng)
    cl, rows = clustering_checks()
    checks += cl
    return checks, rows


__all__ = ["Check", "REFS", "run_suite", "random_tree_edges"]
