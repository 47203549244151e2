from dataclasses import dataclass

import numpy as np
import pytest

from qwscatter.oracles import build_diamond, random_corpus
from qwscatter.scattering import build_problem, taylor_coefficients
from qwscatter.walk_engine import entry_state, prepare

CORPUS_SEED = 20261017
CORPUS_SIZE = 100
N_MAX = 50


@dataclass
class CorpusEntry:
    graph: object
    left: object
    right: object
    U: object          # window operator for N_MAX steps
    series: object     # taylor coefficients of the left problem up to N_MAX

    @property
    def psi0(self):
        return entry_state(self.U.basis)


@pytest.fixture(scope="session")
def corpus():
    """The 100-graph random corpus with the expensive pieces precomputed."""
    out = []
    for graph in random_corpus(CORPUS_SEED, CORPUS_SIZE):
        left = build_problem(graph, "left")
        out.append(CorpusEntry(
            graph=graph,
            left=left,
            right=build_problem(graph, "right"),
            U=prepare(graph, N_MAX),
            series=taylor_coefficients(left, N_MAX),
        ))
    return out


@pytest.fixture(scope="session")
def diamond0():
    return build_diamond(0.0)


@pytest.fixture(scope="session")
def diamond0_problem(diamond0):
    return build_problem(diamond0, "left")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
