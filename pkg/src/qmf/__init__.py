"""Quantum Markov fields on trees: entangled Markov fields and d-Markov chains on Cayley trees."""

from . import algebra, cayley_chain, emf, graph, kernels
from .algebra import LocalOperator, StateVector, matrix_unit
from .cayley_chain import ChainSpec, chain_expect, solve_chain, solve_h, solve_w0
from .emf import AmplitudeField, emf_expect, psi_vector
from .graph import Tree, build_cayley

__version__ = "0.1.0"

__all__ = [
    "algebra", "cayley_chain", "emf", "graph", "kernels",
    "LocalOperator", "StateVector", "matrix_unit",
    "ChainSpec", "chain_expect", "solve_chain", "solve_h", "solve_w0",
    "AmplitudeField", "emf_expect", "psi_vector",
    "Tree", "build_cayley",
]
