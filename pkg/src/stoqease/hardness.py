"""MaxCut embedded into sign easing, with brute-force checks of the reduction.

A graph ``G`` becomes the qubit Hamiltonian

    H' = sum_{(i,j) in E} X_i X_j + C (Z_i Z_j - Z_i Z_k - Z_k Z_j)

with one ancilla ``k`` per edge. Flipping ``Z`` signs on the vertex qubits
maps ``X_i X_j`` to ``(-1)**(s_i + s_j) X_i X_j``, so the best Z-flip leaves
exactly the monochromatic edges of a cut non-stoquastic.

Single-qubit real Cliffords are written ``W**w X**x Z**z`` (``W`` the Hadamard)
and act on Paulis by

    X -> (-1)**z (Z if w else X)
    Z -> (-1)**x (X if w else Z)
    Y -> (-1)**(x + z + w) Y
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .hamiltonian import CoefficientGraph, _pair
from .measures import nu_p_closed_form_2local

ISING_VERTEX_CAP = 24
ORBIT_QUBIT_CAP = 8

PauliTerm = tuple[tuple[tuple[int, str], ...], float]


@dataclass(frozen=True)
class MaxCutInstance:
    n_vertices: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        if self.n_vertices < 1:
            raise ValueError("graph needs at least one vertex")
        norm = set()
        for i, j in self.edges:
            key = _pair(i, j)
            if key[0] < 0 or key[1] >= self.n_vertices:
                raise ValueError(f"edge {key} out of range")
            norm.add(key)
        object.__setattr__(self, "edges", frozenset(norm))

    @classmethod
    def from_edges(cls, edges, n_vertices: int | None = None) -> "MaxCutInstance":
        edges = [tuple(e) for e in edges]
        if n_vertices is None:
            n_vertices = 1 + max((max(e) for e in edges), default=-1)
        return cls(n_vertices, frozenset(edges))

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def degree(self) -> int:
        deg = [0] * self.n_vertices
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return max(deg)

    def is_connected(self) -> bool:
        seen, stack = {0}, [0]
        adj = {v: set() for v in range(self.n_vertices)}
        for i, j in self.edges:
            adj[i].add(j)
            adj[j].add(i)
        while stack:
            for u in adj[stack.pop()] - seen:
                seen.add(u)
                stack.append(u)
        return len(seen) == self.n_vertices


def parse_edge_list(text: str, n_vertices: int | None = None) -> MaxCutInstance:
    """One ``i j`` pair per line; blank lines and ``#`` comments ignored."""
    edges = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'i j', got {line!r}")
        edges.append((int(parts[0]), int(parts[1])))
    return MaxCutInstance.from_edges(edges, n_vertices)


@dataclass(frozen=True)
class EmbeddedInstance:
    base: MaxCutInstance
    C: float
    vertex_qubits: tuple[int, ...]
    ancilla_qubits: tuple[int, ...]  # ancilla of the k-th sorted edge
    hamiltonian: CoefficientGraph

    @property
    def n_qubits(self) -> int:
        return self.hamiltonian.n_qubits


def penalty_weight(g: MaxCutInstance, p: float = 1.0) -> float:
    """``4 deg(G)`` for nu_1; ``2**deg(G')`` (``= 4**deg(G)``) for the nu_p variants."""
    if p == 1:
        return 4.0 * g.degree()
    return float(2 ** (2 * g.degree()))


def embed_maxcut(g: MaxCutInstance, C: float | None = None, p: float = 1.0) -> EmbeddedInstance:
    if not g.edges:
        raise ValueError("MaxCut instance has no edges")
    C = penalty_weight(g, p) if C is None else float(C)
    v = g.n_vertices
    a, c = {}, {}
    ancillas = []
    for k, (i, j) in enumerate(g.sorted_edges()):
        anc = v + k
        ancillas.append(anc)
        a[(i, j)] = 1.0
        c[(i, j)] = C
        c[(i, anc)] = -C
        c[(j, anc)] = -C
    ham = CoefficientGraph(v + len(ancillas), a=a, c=c)
    return EmbeddedInstance(g, C, tuple(range(v)), tuple(ancillas), ham)


def _spin_configs(n: int, start: int, stop: int) -> np.ndarray:
    idx = np.arange(start, stop)
    return ((idx[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1).astype(np.int8)


def ising_energies(g: MaxCutInstance, s) -> np.ndarray:
    """``sum_{(i,j)} (-1)**(s_i + s_j)`` for one or many bit vectors."""
    s = np.atleast_2d(np.asarray(s))
    e = np.zeros(s.shape[0], dtype=np.int64)
    for i, j in g.edges:
        e += 1 - 2 * (s[:, i] ^ s[:, j])
    return e


def ising_ground_energy(g: MaxCutInstance) -> tuple[int, tuple[int, ...]]:
    """Exact Ising minimum; ties go to the lexicographically smallest configuration."""
    n = g.n_vertices
    if n > ISING_VERTEX_CAP:
        raise ValueError(f"{n} vertices exceeds the enumeration cap {ISING_VERTEX_CAP}")
    best, arg = None, None
    chunk = 1 << 18
    for start in range(0, 2**n, chunk):
        s = _spin_configs(n, start, min(2**n, start + chunk))
        e = ising_energies(g, s)
        k = int(np.argmin(e))
        if best is None or e[k] < best:
            best, arg = int(e[k]), tuple(int(b) for b in s[k])
    return best, arg


# --- Clifford conjugation --------------------------------------------------


@dataclass(frozen=True, order=True)
class CliffordAssignment:
    """Per-qubit bits of ``W**w X**x Z**z``; ordering is lexicographic in ``(w, x, z)``."""

    w: tuple[int, ...]
    x: tuple[int, ...]
    z: tuple[int, ...]

    def __post_init__(self):
        if not len(self.w) == len(self.x) == len(self.z):
            raise ValueError("w, x, z must have equal length")
        for bits in (self.w, self.x, self.z):
            if any(b not in (0, 1) for b in bits):
                raise ValueError("Clifford bits must be 0 or 1")

    @classmethod
    def zflip(cls, s, n_qubits: int) -> "CliffordAssignment":
        z = tuple(int(b) for b in s) + (0,) * (n_qubits - len(s))
        return cls((0,) * n_qubits, (0,) * n_qubits, z)

    def unitary(self, qubit: int) -> np.ndarray:
        W = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2)
        X = np.array([[0.0, 1.0], [1.0, 0.0]])
        Z = np.diag([1.0, -1.0])
        I = np.eye(2)
        return (
            (W if self.w[qubit] else I)
            @ (X if self.x[qubit] else I)
            @ (Z if self.z[qubit] else I)
        )


def pauli_terms(g: CoefficientGraph) -> list[PauliTerm]:
    terms: list[PauliTerm] = []
    for label, coeffs in (("X", g.a), ("Y", g.b), ("Z", g.c)):
        for (i, j), v in sorted(coeffs.items()):
            if v != 0:
                terms.append((((i, label), (j, label)), v))
    for (i, j), v in sorted(g.x.items()):
        if v != 0:
            terms.append((((i, "X"), (j, "Z")), v))
    for label, coeffs in (("X", g.alpha), ("Z", g.gamma)):
        for i, v in sorted(coeffs.items()):
            if v != 0:
                terms.append((((i, label),), v))
    return terms


def conjugate_pauli(label: str, w: int, x: int, z: int) -> tuple[int, str]:
    """``(sign exponent, new label)`` of ``C P C^T`` for ``C = W**w X**x Z**z``."""
    if label == "X":
        return z, ("Z" if w else "X")
    if label == "Z":
        return x, ("X" if w else "Z")
    if label == "Y":
        return (x + z + w) % 2, "Y"
    raise ValueError(f"unknown Pauli {label!r}")


def _collect(n: int, terms) -> CoefficientGraph:
    a, b, c, xs, alpha, gamma = {}, {}, {}, {}, {}, {}

    def add(m, key, v):
        m[key] = m.get(key, 0.0) + v

    for sites, v in terms:
        if len(sites) == 1:
            (i, p), = sites
            add(alpha if p == "X" else gamma, i, v)
            continue
        (i, p), (j, q) = sites
        if p == q:
            add({"X": a, "Y": b, "Z": c}[p], _pair(i, j), v)
        elif (p, q) == ("X", "Z"):
            add(xs, (i, j), v)
        elif (p, q) == ("Z", "X"):
            add(xs, (j, i), v)
        else:
            raise ValueError(f"term {p}{q} is not (2+1)-local")
    return CoefficientGraph(n, a, b, c, xs, alpha, gamma)


def clifford_conjugate(g: CoefficientGraph, assignment: CliffordAssignment) -> CoefficientGraph:
    """Symbolic conjugation of every coefficient; never forms a dense matrix."""
    if len(assignment.w) != g.n_qubits:
        raise ValueError("assignment length differs from the qubit count")
    out = []
    for sites, v in pauli_terms(g):
        sign = 0
        new = []
        for i, p in sites:
            e, q = conjugate_pauli(p, assignment.w[i], assignment.x[i], assignment.z[i])
            sign += e
            new.append((i, q))
        out.append((tuple(new), v * (-1) ** sign))
    return _collect(g.n_qubits, out)


def zflip_nu1(inst: EmbeddedInstance, s) -> float:
    """nu_1 of ``H'`` after ``Z**s`` on the vertex qubits (closed form)."""
    s = tuple(int(b) for b in s)
    if len(s) != inst.base.n_vertices:
        raise ValueError(f"need {inst.base.n_vertices} spins, got {len(s)}")
    assignment = CliffordAssignment.zflip(s, inst.n_qubits)
    return nu_p_closed_form_2local(clifford_conjugate(inst.hamiltonian, assignment))


def zflip_minimum(inst: EmbeddedInstance) -> tuple[float, tuple[int, ...]]:
    best, arg = None, None
    for s in itertools.product((0, 1), repeat=inst.base.n_vertices):
        val = zflip_nu1(inst, s)
        if best is None or val < best:
            best, arg = val, s
    return best, arg


def _check_cap(q: int, cap: int) -> None:
    if q > cap:
        raise ValueError(f"{q} qubits exceeds the Clifford-orbit cap {cap}")


def clifford_orbit_scan_slow(
    g: CoefficientGraph, p: float = 1.0, qubit_cap: int = 6
) -> tuple[float, CliffordAssignment]:
    """Reference scan: symbolic conjugation plus closed form, one assignment at a time."""
    q = g.n_qubits
    _check_cap(q, qubit_cap)
    best, arg = None, None
    for w in itertools.product((0, 1), repeat=q):
        for x in itertools.product((0, 1), repeat=q):
            for z in itertools.product((0, 1), repeat=q):
                A = CliffordAssignment(w, x, z)
                val = nu_p_closed_form_2local(clifford_conjugate(g, A), p)
                if best is None or val < best - 1e-12:
                    best, arg = val, A
    return best, arg


def _orbit_block(
    g: CoefficientGraph, w: tuple[int, ...], xb: np.ndarray, zb: np.ndarray, p: float
) -> np.ndarray:
    """Closed-form value for fixed Hadamard pattern ``w`` and every ``(x, z)`` at once."""
    q = g.n_qubits
    N = xb.shape[0]
    pair_xx: dict = {}
    pair_yy: dict = {}
    vertex_field: dict = {}
    vertex_xz: dict = {}
    for sites, v in pauli_terms(g):
        sign = np.zeros(N, dtype=np.int8)
        new = []
        for i, p_ in sites:
            if p_ == "X":
                sign ^= zb[:, i]
            elif p_ == "Z":
                sign ^= xb[:, i]
            else:
                sign ^= xb[:, i] ^ zb[:, i] ^ w[i]
            new.append((i, conjugate_pauli(p_, w[i], 0, 0)[1]))
        coeff = v * (1.0 - 2.0 * sign)
        if len(new) == 1:
            (i, lab), = new
            if lab == "X":
                vertex_field[i] = vertex_field.get(i, 0.0) + coeff
            continue
        (i, a), (j, b) = new
        if a == b == "X":
            key = _pair(i, j)
            pair_xx[key] = pair_xx.get(key, 0.0) + coeff
        elif a == b == "Y":
            key = _pair(i, j)
            pair_yy[key] = pair_yy.get(key, 0.0) + coeff
        elif (a, b) in (("X", "Z"), ("Z", "X")):
            xi, zj = (i, j) if a == "X" else (j, i)
            vertex_xz.setdefault(xi, {})
            vertex_xz[xi][zj] = vertex_xz[xi].get(zj, 0.0) + coeff

    total = np.zeros(N)
    for key in set(pair_xx) | set(pair_yy):
        a = pair_xx.get(key, 0.0) + np.zeros(N)
        b = pair_yy.get(key, 0.0) + np.zeros(N)
        total += 0.5 * (np.maximum(a + b, 0.0) ** p + np.maximum(a - b, 0.0) ** p)
    for i in range(q):
        field_ = vertex_field.get(i, 0.0) + np.zeros(N)
        nbrs = [c for c in vertex_xz.get(i, {}).values() if np.any(c != 0)]
        if not nbrs:
            total += np.maximum(field_, 0.0) ** p
            continue
        xs = np.stack([c + np.zeros(N) for c in nbrs], axis=1)
        signs = 1.0 - 2.0 * np.array(list(itertools.product((0, 1), repeat=len(nbrs))))
        sums = field_[:, None] + xs @ signs.T
        total += np.mean(np.maximum(sums, 0.0) ** p, axis=1)
    return total


def clifford_orbit_scan(
    g: CoefficientGraph, p: float = 1.0, qubit_cap: int = ORBIT_QUBIT_CAP, workers: int = 1
) -> tuple[float, CliffordAssignment]:
    """Exact minimum over all ``8**q`` real Clifford assignments.

    Hadamard patterns ``w`` are processed as independent blocks (optionally in
    parallel); inside a block all ``4**q`` sign patterns are vectorised. The
    minimiser is the lexicographically smallest ``(w, x, z)`` attaining the minimum.
    """
    q = g.n_qubits
    _check_cap(q, qubit_cap)
    idx = np.arange(4**q)
    shifts = (q - 1 - np.arange(q))[None, :]
    xb = ((idx[:, None] >> q) >> shifts & 1).astype(np.int8)
    zb = (idx[:, None] >> shifts & 1).astype(np.int8)
    ws = list(itertools.product((0, 1), repeat=q))

    def block(w):
        vals = _orbit_block(g, w, xb, zb, p)
        k = int(np.argmin(vals))
        return float(vals[k]), k

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(block, ws))
    else:
        results = [block(w) for w in ws]
    global_min = min(r[0] for r in results)
    for w, (val, k) in zip(ws, results):
        if val <= global_min + 1e-12:
            return val, CliffordAssignment(
                w, tuple(int(b) for b in xb[k]), tuple(int(b) for b in zb[k])
            )
    raise AssertionError("unreachable")


def clifford_orbit_min_nu1(
    inst: EmbeddedInstance, qubit_cap: int = ORBIT_QUBIT_CAP, workers: int = 1
) -> tuple[float, CliffordAssignment]:
    return clifford_orbit_scan(inst.hamiltonian, 1.0, qubit_cap, workers)


@dataclass(frozen=True)
class ReductionReport:
    n_vertices: int
    n_edges: int
    C: float
    ising_energy: int
    ising_argmin: tuple[int, ...]
    zflip_min: float
    zflip_argmin: tuple[int, ...]
    energy_identity: bool  # min Z-flip nu_1 == (lambda_min + e) / 2
    cut_correspondence: bool  # every s: nu_1 == (E(s) + e) / 2 == monochromatic edges
    clifford_min: float | None  # None when the orbit is beyond the cap
    clifford_matches_zflip: bool | None

    @property
    def passed(self) -> bool:
        return self.energy_identity and self.cut_correspondence and self.clifford_matches_zflip is not False


def verify_reduction(
    g: MaxCutInstance, qubit_cap: int = ORBIT_QUBIT_CAP, workers: int = 1
) -> ReductionReport:
    inst = embed_maxcut(g)
    e = len(g.edges)
    energy, s_min = ising_ground_energy(g)
    configs = list(itertools.product((0, 1), repeat=g.n_vertices))
    energies = ising_energies(g, np.array(configs, dtype=np.int8))
    values = [zflip_nu1(inst, s) for s in configs]
    mono = [sum(s[i] == s[j] for i, j in g.edges) for s in configs]
    cut_ok = all(
        v == (E + e) / 2 == m for v, E, m in zip(values, energies.tolist(), mono)
    )
    k = int(np.argmin(values))
    zmin, zarg = float(values[k]), configs[k]
    clif = None
    if inst.n_qubits <= qubit_cap:
        clif = clifford_orbit_min_nu1(inst, qubit_cap, workers)[0]
    return ReductionReport(
        n_vertices=g.n_vertices,
        n_edges=e,
        C=inst.C,
        ising_energy=energy,
        ising_argmin=s_min,
        zflip_min=zmin,
        zflip_argmin=tuple(zarg),
        energy_identity=zmin == (energy + e) / 2,
        cut_correspondence=cut_ok,
        clifford_min=clif,
        clifford_matches_zflip=None if clif is None else abs(clif - zmin) <= 1e-9,
    )


def connected_graphs(max_vertices: int) -> list[MaxCutInstance]:
    """All connected labelled simple graphs on 2..max_vertices vertices."""
    out = []
    for n in range(2, max_vertices + 1):
        pairs = list(itertools.combinations(range(n), 2))
        for mask in range(1, 2 ** len(pairs)):
            edges = [pairs[k] for k in range(len(pairs)) if mask >> k & 1]
            g = MaxCutInstance.from_edges(edges, n)
            if g.is_connected():
                out.append(g)
    return out
