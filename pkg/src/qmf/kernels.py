"""The two explicit order-2 edge kernels and their closed forms.

``hopping``:  ``K = exp(beta H)`` with ``H = e12 (x) e21 + e21 (x) e12``.
``diagonal``: ``K = I + (e^beta - 1) P`` with ``P = e11 (x) e11 + e22 (x) e22``.

The closed forms here are the ground truth the numeric solvers in
:mod:`qmf.cayley_chain` are tested against; they never call those solvers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import algebra as alg

KERNELS = ("hopping", "diagonal")

_E = {(i, j): np.eye(2)[:, [i - 1]] @ np.eye(2)[[j - 1], :] for i in (1, 2) for j in (1, 2)}


def hopping_generator() -> np.ndarray:
    return np.kron(_E[1, 2], _E[2, 1]) + np.kron(_E[2, 1], _E[1, 2])


def diagonal_projector() -> np.ndarray:
    return np.kron(_E[1, 1], _E[1, 1]) + np.kron(_E[2, 2], _E[2, 2])


def _check_beta(beta, allow_complex: bool) -> complex | float:
    if isinstance(beta, complex) or np.iscomplexobj(beta):
        if not allow_complex and complex(beta).imag != 0:
            raise ValueError("complex beta requires allow_complex=True")
        if complex(beta).imag == 0:
            return float(complex(beta).real)
        return complex(beta)
    return float(beta)


def hopping_kernel(beta: float) -> np.ndarray:
    """Numeric ``exp(beta H)`` through the Hermitian eigendecomposition."""
    beta = _check_beta(beta, allow_complex=False)
    h = alg.LocalOperator(("x", "y"), hopping_generator(), 2)
    return alg.herm_exp(h, beta).matrix


def hopping_kernel_closed(beta: float) -> np.ndarray:
    h = hopping_generator()
    return np.eye(4) + math.sinh(beta) * h + (math.cosh(beta) - 1.0) * (h @ h)


def diagonal_kernel(beta, allow_complex: bool = False) -> np.ndarray:
    beta = _check_beta(beta, allow_complex)
    return np.eye(4, dtype=complex) + (np.exp(beta) - 1.0) * diagonal_projector()


def kernel_matrix(name: str, beta, allow_complex: bool = False) -> np.ndarray:
    if name == "hopping":
        if allow_complex and complex(beta).imag != 0:
            raise ValueError("the hopping kernel is defined for real beta only")
        return hopping_kernel(float(np.real(beta)))
    if name == "diagonal":
        return diagonal_kernel(beta, allow_complex)
    raise ValueError(f"unknown kernel {name!r}; expected one of {KERNELS}")


@dataclass
class KernelOracle:
    name: str
    beta: complex | float
    K: np.ndarray
    alpha: float
    h: np.ndarray
    w0: np.ndarray
    partial_trace_K2: float
    # Tr_x(K_<x,(x,1)> K_<x,(x,2)> e_ij^{(x,1)} K*_<x,(x,2)> K*_<x,(x,1)>), keyed by (i, j)
    traces: dict = field(default_factory=dict)

    @property
    def transfer(self) -> dict:
        """One-level transfer images ``T(e_ij)`` (the traces scaled by ``alpha``)."""
        return {key: self.alpha * m for key, m in self.traces.items()}


def analytic_oracle(name: str, beta, allow_complex: bool = False) -> KernelOracle:
    beta = _check_beta(beta, allow_complex)
    if name == "hopping":
        if isinstance(beta, complex):
            raise ValueError("the hopping kernel is defined for real beta only")
        c, s1 = math.cosh(beta), math.sinh(beta)
        alpha = c**-4
        traces = {
            (1, 1): (c**4 / 2) * np.eye(2),
            (2, 2): (c**4 / 2) * np.eye(2),
            # the off-diagonal images pick up sinh(beta), not sinh(2 beta)
            (1, 2): c**2 * s1 * _E[1, 2],
            (2, 1): c**2 * s1 * _E[2, 1],
        }
        return KernelOracle(
            name, beta, hopping_kernel_closed(beta), alpha, alpha * np.eye(2),
            np.eye(2) / alpha, c**2, traces,
        )
    if name == "diagonal":
        # |e^beta|^2 replaces e^{2 beta}; identical for real beta
        q = abs(np.exp(beta)) ** 2
        alpha = 4.0 / (q + 1.0) ** 2
        traces = {
            (1, 1): (q * (q + 1) / 4) * _E[1, 1] + ((q + 1) / 4) * _E[2, 2],
            (2, 2): ((q + 1) / 4) * _E[1, 1] + (q * (q + 1) / 4) * _E[2, 2],
            (1, 2): np.zeros((2, 2)),
            (2, 1): np.zeros((2, 2)),
        }
        return KernelOracle(
            name, beta, diagonal_kernel(beta, allow_complex), alpha, alpha * np.eye(2),
            np.eye(2) / alpha, (q + 1) / 2, traces,
        )
    raise ValueError(f"unknown kernel {name!r}; expected one of {KERNELS}")


def oracle_vs_numeric(name: str, betas, allow_complex: bool = False) -> dict:
    """Compare solver output and direct traces with the closed forms over a beta grid."""
    from . import cayley_chain as cc

    rows = []
    for beta in betas:
        orc = analytic_oracle(name, beta, allow_complex)
        K = kernel_matrix(name, beta, allow_complex)
        hsol = cc.solve_h(K, 2, ansatz="scalar")
        w0 = cc.solve_w0(K, hsol.h, 2)
        spec = cc.ChainSpec(k=2, K=K, h=hsol.h, w0=w0, alpha=hsol.alpha, name=name, beta=beta)
        T = cc.transfer_superoperator(spec)
        t_dev = max(
            float(np.max(np.abs(T.apply(_E[key]) - orc.transfer[key]))) for key in orc.traces
        )
        k2 = alg.LocalOperator(((), (1,)), K @ K.conj().T, 2)
        trk2 = alg.normalized_partial_trace(k2, [()]).matrix
        row = {
            "beta": beta if isinstance(beta, float) else str(beta),
            "alpha_numeric": hsol.alpha,
            "alpha_closed": orc.alpha,
            "alpha_dev": abs(hsol.alpha - orc.alpha),
            "w0_dev": float(np.max(np.abs(w0 - orc.w0))),
            "kernel_dev": float(np.max(np.abs(K - orc.K))),
            "partial_trace_K2_dev": float(np.max(np.abs(trk2 - orc.partial_trace_K2 * np.eye(2)))),
            "transfer_dev": t_dev,
            "residual_normalization": cc.residual_normalization(spec),
            "residual_boundary": cc.residual_boundary(spec),
            "residual_initial": cc.residual_initial(spec),
        }
        rows.append(row)
    keys = [k for k in rows[0] if k.endswith("_dev") or k.startswith("residual")] if rows else []
    return {
        "kernel": name,
        "rows": rows,
        "max_residual": max((r[k] for r in rows for k in keys), default=0.0),
    }
