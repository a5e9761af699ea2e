import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from stoqease.hamiltonian import CoefficientGraph

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

# complex Pauli matrices, used only by the independent dense oracles below
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]])
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
S1 = np.eye(2, dtype=complex)


def op_string(ops: dict, n: int) -> np.ndarray:
    """Kronecker product with ``ops[k]`` on site ``k`` and identities elsewhere (site 0 leftmost)."""
    out = np.ones((1, 1), dtype=complex)
    for k in range(n):
        out = np.kron(out, ops.get(k, S1))
    return out


def dense_oracle(g: CoefficientGraph) -> np.ndarray:
    n = g.n_qubits
    H = np.zeros((2**n, 2**n), dtype=complex)
    for (i, j), v in g.a.items():
        H += v * op_string({i: SX, j: SX}, n)
    for (i, j), v in g.b.items():
        H += v * op_string({i: SY, j: SY}, n)
    for (i, j), v in g.c.items():
        H += v * op_string({i: SZ, j: SZ}, n)
    for (i, j), v in g.x.items():
        H += v * op_string({i: SX, j: SZ}, n)
    for i, v in g.alpha.items():
        H += v * op_string({i: SX}, n)
    for i, v in g.gamma.items():
        H += v * op_string({i: SZ}, n)
    assert np.allclose(H.imag, 0)
    return H.real


def random_graph(rng, n: int, max_degree: int = 4, density: float = 0.6) -> CoefficientGraph:
    """Random (2+1)-local coefficients on a graph with bounded degree."""
    deg = [0] * n
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < density and deg[i] < max_degree and deg[j] < max_degree:
                edges.append((i, j))
                deg[i] += 1
                deg[j] += 1

    def coef():
        return float(rng.normal()) if rng.random() < 0.7 else 0.0

    a = {e: coef() for e in edges}
    b = {e: coef() for e in edges}
    c = {e: coef() for e in edges}
    x = {}
    for i, j in edges:
        if rng.random() < 0.6:
            x[(i, j)] = coef()
        if rng.random() < 0.6:
            x[(j, i)] = coef()
    alpha = {i: coef() for i in range(n)}
    gamma = {i: coef() for i in range(n)}
    return CoefficientGraph(n, a, b, c, x, alpha, gamma)


def random_symmetric(rng, D: int) -> np.ndarray:
    A = rng.standard_normal((D, D))
    return (A + A.T) / 2


seeds = st.integers(0, 2**32 - 1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


_acceptance_lines: list[str] = []


def record_acceptance(line: str) -> None:
    _acceptance_lines.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
