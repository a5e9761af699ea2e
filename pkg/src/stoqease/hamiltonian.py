"""Dense real Hamiltonians: Pauli embeddings, translation-invariant chains,
(2+1)-local coefficient Hamiltonians, ladder models and on-site conjugation.

Basis convention: site 0 is the most significant factor of every Kronecker
product, i.e. for qubits the bit of site ``k`` in basis index ``s`` is
``(s >> (n - 1 - k)) & 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Mapping, Union

import numpy as np

DENSE_QUBIT_LIMIT = 14
SYMMETRY_RTOL = 1e-12
ORTHOGONALITY_TOL = 1e-8

PAULI = {
    "I": np.eye(2),
    "X": np.array([[0.0, 1.0], [1.0, 0.0]]),
    "Z": np.array([[1.0, 0.0], [0.0, -1.0]]),
}
# Y itself is imaginary; only the real product Y (x) Y is ever stored.
YY = np.array(
    [[0.0, 0.0, 0.0, -1.0], [0.0, 0.0, 1.0, 0.0], [0.0, 1.0, 0.0, 0.0], [-1.0, 0.0, 0.0, 0.0]]
)
HEISENBERG = np.kron(PAULI["X"], PAULI["X"]) + YY + np.kron(PAULI["Z"], PAULI["Z"])


def _check_symmetric(m: np.ndarray, what: str) -> None:
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    if np.max(np.abs(m - m.T), initial=0.0) > SYMMETRY_RTOL * scale:
        raise ValueError(f"{what} is not symmetric")


def _frozen(m) -> np.ndarray:
    arr = np.array(m, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DenseOperator:
    """Real symmetric matrix in the computational product basis."""

    matrix: np.ndarray
    local_dims: tuple[int, ...]

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if np.iscomplexobj(m):
            if np.max(np.abs(m.imag), initial=0.0) > 0:
                raise ValueError("DenseOperator must be real")
            m = m.real
        m = _frozen(m)
        dims = tuple(int(d) for d in self.local_dims)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {m.shape}")
        if any(d < 1 for d in dims) or int(np.prod(dims)) != m.shape[0]:
            raise ValueError(f"local_dims {dims} do not multiply to {m.shape[0]}")
        _check_symmetric(m, "DenseOperator")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "local_dims", dims)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_sites(self) -> int:
        return len(self.local_dims)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)

    @classmethod
    def qubits(cls, matrix) -> "DenseOperator":
        m = np.asarray(matrix, dtype=float)
        n = int(round(np.log2(m.shape[0])))
        if 2**n != m.shape[0]:
            raise ValueError(f"dimension {m.shape[0]} is not a power of two")
        return cls(m, (2,) * n)


Operator = Union[DenseOperator, np.ndarray]


def as_matrix(H: Operator) -> np.ndarray:
    return np.asarray(H, dtype=float)


@dataclass(frozen=True)
class TwoSiteTerm:
    """Nearest-neighbour interaction ``h`` acting on two ``d``-dimensional sites."""

    local_dim: int
    h: np.ndarray

    def __post_init__(self):
        h = _frozen(self.h)
        d = int(self.local_dim)
        if d < 1 or h.shape != (d * d, d * d):
            raise ValueError(f"term of shape {h.shape} does not match local_dim {d}")
        _check_symmetric(h, "TwoSiteTerm")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "local_dim", d)


@dataclass(frozen=True)
class ChainSpec:
    """Closed translation-invariant chain ``sum_i T_i(h)``; site n wraps to site 0."""

    n_sites: int
    term: TwoSiteTerm
    boundary: str = "closed"

    def __post_init__(self):
        if self.n_sites < 3:
            raise ValueError("a closed chain needs at least 3 sites")
        if self.boundary != "closed":
            raise ValueError("only closed boundary conditions are supported")


@dataclass(frozen=True)
class OrthogonalPoint:
    O: np.ndarray

    def __post_init__(self):
        O = _frozen(self.O)
        if O.ndim != 2 or O.shape[0] != O.shape[1]:
            raise ValueError("orthogonal matrix must be square")
        err = np.max(np.abs(O.T @ O - np.eye(O.shape[0])))
        if err > ORTHOGONALITY_TOL:
            raise ValueError(f"matrix is not orthogonal (max deviation {err:.3g})")
        object.__setattr__(self, "O", O)

    @property
    def dim(self) -> int:
        return self.O.shape[0]

    @classmethod
    def identity(cls, d: int) -> "OrthogonalPoint":
        return cls(np.eye(d))


def _pair(i: int, j: int) -> tuple[int, int]:
    i, j = int(i), int(j)
    if i == j:
        raise ValueError(f"self-loop on site {i}")
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class CoefficientGraph:
    """Coefficients of a real (2+1)-local qubit Hamiltonian

    ``sum_{i<j} a XX + b YY + c ZZ + sum_{(i,j)} x[i,j] X_i Z_j + sum_i alpha X_i + gamma Z_i``.

    ``a``, ``b``, ``c`` are keyed by unordered pairs (stored as ``i < j``);
    ``x`` is keyed by ordered pairs, ``x[i, j]`` weighting ``X_i Z_j``.
    """

    n_qubits: int
    a: Mapping[tuple[int, int], float] = field(default_factory=dict)
    b: Mapping[tuple[int, int], float] = field(default_factory=dict)
    c: Mapping[tuple[int, int], float] = field(default_factory=dict)
    x: Mapping[tuple[int, int], float] = field(default_factory=dict)
    alpha: Mapping[int, float] = field(default_factory=dict)
    gamma: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        n = int(self.n_qubits)
        if n < 1:
            raise ValueError("need at least one qubit")

        def site(k):
            k = int(k)
            if not 0 <= k < n:
                raise ValueError(f"site {k} out of range for {n} qubits")
            return k

        for name in ("a", "b", "c"):
            out: dict[tuple[int, int], float] = {}
            for (i, j), v in dict(getattr(self, name)).items():
                key = _pair(site(i), site(j))
                out[key] = out.get(key, 0.0) + float(v)
            object.__setattr__(self, name, out)
        xs: dict[tuple[int, int], float] = {}
        for (i, j), v in dict(self.x).items():
            if int(i) == int(j):
                raise ValueError(f"self-loop on site {i}")
            key = (site(i), site(j))
            xs[key] = xs.get(key, 0.0) + float(v)
        object.__setattr__(self, "x", xs)
        for name in ("alpha", "gamma"):
            fields_ = {site(k): float(v) for k, v in dict(getattr(self, name)).items()}
            object.__setattr__(self, name, fields_)
        object.__setattr__(self, "n_qubits", n)

    def edges(self) -> set[tuple[int, int]]:
        """Pairs carrying at least one nonzero two-body coefficient."""
        out = {k for m in (self.a, self.b, self.c) for k, v in m.items() if v != 0}
        out |= {_pair(i, j) for (i, j), v in self.x.items() if v != 0}
        return out

    def xz_neighbours(self, i: int) -> list[int]:
        return sorted(j for (k, j), v in self.x.items() if k == i and v != 0)

    def deg_xz(self, i: int) -> int:
        return len(self.xz_neighbours(i))

    def degree(self) -> int:
        deg = [0] * self.n_qubits
        for i, j in self.edges():
            deg[i] += 1
            deg[j] += 1
        return max(deg)


def _check_dense_size(n_qubits: int, limit: int) -> None:
    if n_qubits > limit:
        raise ValueError(f"{n_qubits} qubits exceed the dense limit of {limit}")


def kron_all(mats) -> np.ndarray:
    return reduce(np.kron, mats, np.eye(1))


def pauli_embed(label: str, site: int, n: int, d: int = 2) -> DenseOperator:
    """``A`` acting on ``site`` of an ``n``-qubit register, identity elsewhere."""
    if d != 2:
        raise ValueError("Pauli embedding is defined for qubits only")
    if label == "Y":
        raise ValueError("Pauli Y is imaginary; build real products such as Y_i Y_j instead")
    if label not in PAULI:
        raise ValueError(f"unknown Pauli label {label!r}")
    if not 0 <= site < n:
        raise ValueError(f"site {site} out of range for {n} sites")
    _check_dense_size(n, DENSE_QUBIT_LIMIT)
    mats = [np.eye(2)] * n
    mats[site] = PAULI[label]
    return DenseOperator(kron_all(mats), (2,) * n)


def embed_operator(op: np.ndarray, sites: tuple[int, ...], n: int, d: int) -> np.ndarray:
    """Place a ``d**k``-dimensional operator on arbitrary (ordered) ``sites``."""
    k = len(sites)
    if len(set(sites)) != k or any(not 0 <= s < n for s in sites):
        raise ValueError(f"invalid sites {sites} for {n} sites")
    full = np.kron(np.asarray(op, dtype=float), np.eye(d ** (n - k)))
    t = full.reshape((d,) * (2 * n))
    # axis p of `t` (p < k) belongs to site sites[p]; the rest fill the others in order
    rest = [s for s in range(n) if s not in sites]
    order = list(sites) + rest
    perm = np.argsort(order)
    t = t.transpose(list(perm) + [n + p for p in perm])
    return t.reshape(d**n, d**n)


def build_chain(spec: ChainSpec) -> DenseOperator:
    n, d = spec.n_sites, spec.term.local_dim
    if d**n > 2**DENSE_QUBIT_LIMIT:
        raise ValueError(f"chain dimension {d}**{n} exceeds the dense limit")
    h = spec.term.h
    H = np.zeros((d**n, d**n))
    for i in range(n - 1):
        H += np.kron(np.kron(np.eye(d**i), h), np.eye(d ** (n - i - 2)))
    H += embed_operator(h, (n - 1, 0), n, d)
    return DenseOperator(H, (d,) * n)


def _bits(n: int) -> np.ndarray:
    s = np.arange(2**n)
    return (s[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1


def build_coefficient_hamiltonian(
    g: CoefficientGraph, max_qubits: int = DENSE_QUBIT_LIMIT
) -> DenseOperator:
    n = g.n_qubits
    _check_dense_size(n, max_qubits)
    D = 2**n
    s = np.arange(D)
    bits = _bits(n)
    spin = 1 - 2 * bits  # (-1)**bit
    H = np.zeros((D, D))
    mask = lambda k: 1 << (n - 1 - k)  # noqa: E731

    diag = np.zeros(D)
    for (i, j), v in g.c.items():
        diag += v * spin[:, i] * spin[:, j]
    for i, v in g.gamma.items():
        diag += v * spin[:, i]
    H[s, s] += diag
    for (i, j), v in g.a.items():
        H[s ^ (mask(i) | mask(j)), s] += v
    for (i, j), v in g.b.items():
        # <s'| Y_i Y_j |s> = -(-1)**(s_i + s_j)
        H[s ^ (mask(i) | mask(j)), s] += -v * spin[:, i] * spin[:, j]
    for (i, j), v in g.x.items():
        H[s ^ mask(i), s] += v * spin[:, j]
    for i, v in g.alpha.items():
        H[s ^ mask(i), s] += v
    return DenseOperator(H, (2,) * n)


@dataclass(frozen=True)
class LadderParams:
    """Two-leg spin-1/2 ladder, grouped into rung dimers of local dimension 4.

    ``model="J0J1J2J3"`` takes couplings ``(J0, J1, J2, J3)``;
    ``model="FrustratedLadder"`` takes ``(J_par, J_perp, J_cross)``.
    """

    model: str
    couplings: tuple[float, ...]
    n_rungs: int = 4

    def __post_init__(self):
        expected = {"J0J1J2J3": 4, "FrustratedLadder": 3}
        if self.model not in expected:
            raise ValueError(f"unknown ladder model {self.model!r}")
        cs = tuple(float(c) for c in self.couplings)
        if len(cs) != expected[self.model]:
            raise ValueError(f"{self.model} takes {expected[self.model]} couplings")
        if any(c < 0 for c in cs):
            raise ValueError("ladder couplings must be non-negative (anti-ferromagnetic)")
        object.__setattr__(self, "couplings", cs)


def heisenberg_bond(i: int, j: int, n: int) -> np.ndarray:
    """``S_i . S_j = X_i X_j + Y_i Y_j + Z_i Z_j`` on ``n`` spins."""
    return embed_operator(HEISENBERG, (i, j), n, 2)


def build_ladder(params: LadderParams) -> ChainSpec:
    """Dimer chain for a ladder.

    Spins of one two-site term are ordered (lower_A, upper_A, lower_B, upper_B)
    for neighbouring rungs A, B. Rung-internal couplings are split in half
    between the two translated copies that contain the rung.
    """
    if params.model == "J0J1J2J3":
        j0, j1, j2, j3 = params.couplings
        h = (
            j0 * heisenberg_bond(0, 2, 4)
            + j1 * heisenberg_bond(1, 3, 4)
            + 0.5 * j2 * (heisenberg_bond(0, 1, 4) + heisenberg_bond(2, 3, 4))
            + j3 * heisenberg_bond(2, 1, 4)
        )
    else:
        jpar, jperp, jx = params.couplings
        h = (
            jpar * (heisenberg_bond(0, 2, 4) + heisenberg_bond(1, 3, 4))
            + 0.5 * jperp * (heisenberg_bond(0, 1, 4) + heisenberg_bond(2, 3, 4))
            + jx * (heisenberg_bond(0, 3, 4) + heisenberg_bond(2, 1, 4))
        )
    return ChainSpec(params.n_rungs, TwoSiteTerm(4, h))


def _orthogonal_matrix(O) -> np.ndarray:
    if isinstance(O, OrthogonalPoint):
        return O.O
    return OrthogonalPoint(np.asarray(O, dtype=float)).O


def conjugate_onsite(obj, O):
    """Apply ``O^{(x)n} (.) O^{T(x)n}`` to a term, a dense operator or a raw matrix.

    Raw matrices are treated as two-site terms when their size is ``d**2``
    and otherwise as ``n``-site operators with ``d**n`` rows.
    """
    Om = _orthogonal_matrix(O)
    d = Om.shape[0]
    if isinstance(obj, TwoSiteTerm):
        if obj.local_dim != d:
            raise ValueError(f"O has dimension {d}, term has local dimension {obj.local_dim}")
        C = np.kron(Om, Om)
        return TwoSiteTerm(d, C @ obj.h @ C.T)
    if isinstance(obj, DenseOperator):
        if any(ld != d for ld in obj.local_dims):
            raise ValueError(f"O has dimension {d}, operator has local dims {obj.local_dims}")
        return DenseOperator(_conjugate_tensor(obj.matrix, Om, obj.n_sites), obj.local_dims)
    m = np.asarray(obj, dtype=float)
    n = int(round(np.log(m.shape[0]) / np.log(d))) if d > 1 else 1
    if d**n != m.shape[0]:
        raise ValueError(f"matrix of size {m.shape[0]} is not a power of {d}")
    return _conjugate_tensor(m, Om, n)


def _conjugate_tensor(m: np.ndarray, O: np.ndarray, n: int) -> np.ndarray:
    # apply O on every row and column leg in turn; O(n d^{2n+1}) instead of forming O^{(x)n}
    d = O.shape[0]
    t = m.reshape((d,) * (2 * n))
    for axis in range(2 * n):
        t = np.moveaxis(np.tensordot(O, t, axes=([1], [axis])), 0, axis)
    return t.reshape(d**n, d**n)


def example_sign_free(n: int) -> DenseOperator:
    """``1 + sum_{i<j} -(X_i X_j - Y_i Y_j)/2 + sum_i X_i``.

    Every off-diagonal positive entry comes from a single-site X field, so
    nu_1 = n while closed world lines always cross an even number of them.
    """
    if n < 2:
        raise ValueError("need at least two qubits")
    g = CoefficientGraph(
        n,
        a={(i, j): -0.5 for i in range(n) for j in range(i + 1, n)},
        b={(i, j): 0.5 for i in range(n) for j in range(i + 1, n)},
        alpha={i: 1.0 for i in range(n)},
    )
    H = build_coefficient_hamiltonian(g).matrix + np.eye(2**n)
    return DenseOperator(H, (2,) * n)


def example_fine_tuned(a: float, b: float, beta: float, m: int) -> DenseOperator:
    """Two-qubit ``H_{a,b}`` whose transfer matrix at ``(beta, m)`` has entries ``1, a, -b``."""
    if a <= 0:
        raise ValueError("a must be positive")
    if b < a:
        raise ValueError("b must be at least a")
    if beta <= 0 or m < 1:
        raise ValueError("beta must be positive and m at least 1")
    X, Z, I = PAULI["X"], PAULI["Z"], PAULI["I"]
    XX = np.kron(X, X)
    inner = (
        np.kron(I, I)
        - np.kron(I, X)
        - 0.5 * (XX + YY)
        + 0.5 * ((a + b) * np.kron(X, Z) + (b - a) * np.kron(X, I))
    )
    return DenseOperator(m / beta * inner, (2, 2))


def haar_random_orthogonal(d: int, seed=None) -> OrthogonalPoint:
    """Haar-distributed element of O(d): QR of a Gaussian matrix with R's diagonal signs folded into Q."""
    if d < 1:
        raise ValueError("dimension must be positive")
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return OrthogonalPoint(q * signs)


def _positive_offdiagonal(m: np.ndarray) -> np.ndarray:
    out = np.where(m > 0, m, 0.0)
    np.fill_diagonal(out, 0.0)
    return out


def random_stoquastic_instance(d: int, seed=None) -> tuple[TwoSiteTerm, OrthogonalPoint]:
    """Random term known to be term-wise stoquastic in an on-site basis, scrambled by ``O_true``.

    Returns ``(h_scrambled, O_true)``; conjugating ``h_scrambled`` by ``O_true.T``
    recovers the stoquastic base term.
    """
    if d < 2:
        raise ValueError("local dimension must be at least 2")
    ss = np.random.SeedSequence(seed)
    s_spec, s_basis, s_onsite = ss.spawn(3)
    eig = np.random.default_rng(s_spec).uniform(-1.0, 1.0, d * d)
    Q = haar_random_orthogonal(d * d, s_basis).O
    h = (Q * eig) @ Q.T
    h = 0.5 * (h + h.T)
    h_base = h - _positive_offdiagonal(h)
    O_true = haar_random_orthogonal(d, s_onsite)
    return conjugate_onsite(TwoSiteTerm(d, h_base), O_true), O_true


def alpha_family(H: Operator, alpha: float) -> DenseOperator:
    """``(H - H_+ + alpha H_+) / ||H_+||_1``, whose nu_1 is ``alpha / D``."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    m = as_matrix(H)
    Hp = _positive_offdiagonal(m)
    norm = Hp.sum()
    if norm <= 0:
        raise ValueError("alpha family needs a non-stoquastic input")
    dims = H.local_dims if isinstance(H, DenseOperator) else (m.shape[0],)
    return DenseOperator((m - Hp + alpha * Hp) / norm, dims)
