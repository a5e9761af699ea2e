"""Non-stoquasticity measures: dense nu_p, the (2+1)-local closed form, the
sampled XZ-vertex estimator, and the translation-invariant effective measure
with its smooth surrogate."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hamiltonian import (
    CoefficientGraph,
    Operator,
    TwoSiteTerm,
    _positive_offdiagonal,
    as_matrix,
)

EXACT_XZ_DEGREE_CAP = 20


@dataclass(frozen=True)
class MeasureSpec:
    p: float = 1.0
    mode: str = "dense"
    alpha: float | None = None
    normalization: str = "per_dimension"

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("norm order p must be >= 1")
        if self.mode not in ("dense", "closed_form_2local", "effective_local", "smooth"):
            raise ValueError(f"unknown measure mode {self.mode!r}")
        if (self.mode == "smooth") != (self.alpha is not None):
            raise ValueError("alpha is required exactly when mode == 'smooth'")
        if self.alpha is not None and self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.normalization not in ("per_dimension", "raw_sum"):
            raise ValueError(f"unknown normalization {self.normalization!r}")


@dataclass(frozen=True)
class EstimatorBudget:
    epsilon: float
    delta: float
    seed: int | None = None

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")


def nonstoq_part(H: Operator) -> np.ndarray:
    """Positive off-diagonal entries of ``H``; everything else zeroed."""
    return _positive_offdiagonal(as_matrix(H))


def nu_p_dense(H: Operator, spec: MeasureSpec | None = None) -> float:
    spec = spec or MeasureSpec()
    m = as_matrix(H)
    norm = float(np.linalg.norm(nonstoq_part(m).ravel(), ord=spec.p))
    if spec.normalization == "per_dimension":
        return norm / m.shape[0]
    return norm


def is_stoquastic(H: Operator, tol: float = 0.0) -> bool:
    m = as_matrix(H)
    off = m - np.diag(np.diag(m))
    return bool(np.all(off <= tol))


def xz_pattern_sums(alpha: float, x) -> np.ndarray:
    """``alpha + sum_j (-1)**lam_j x_j`` for all ``2**k`` sign patterns ``lam``.

    Pattern order: ``lam`` read as a binary number with ``lam_1`` most significant.
    """
    sums = np.array([float(alpha)])
    for xj in np.asarray(x, dtype=float):
        sums = np.concatenate([sums + xj, sums - xj])
    # concatenation puts the last coefficient's sign in the top bit; reorder
    k = len(np.atleast_1d(x))
    if k > 1:
        sums = sums.reshape((2,) * k).transpose(tuple(range(k))[::-1]).ravel()
    return sums


def xz_vertex_value(alpha: float, x, p: float = 1.0) -> float:
    """``2**-k sum_lam max{alpha + sum_j (-1)**lam_j x_j, 0}**p`` by enumeration."""
    x = np.asarray(x, dtype=float)
    if len(x) > EXACT_XZ_DEGREE_CAP:
        raise ValueError(
            f"XZ degree {len(x)} exceeds the exact-evaluation cap {EXACT_XZ_DEGREE_CAP}"
        )
    sums = xz_pattern_sums(alpha, x)
    return float(np.mean(np.maximum(sums, 0.0) ** p))


def rademacher_sample_count(k: int, max_abs_x: float, budget: EstimatorBudget) -> int:
    """Samples needed for additive error ``epsilon`` with failure probability ``delta``."""
    n = 16 * k * max_abs_x**2 * math.log(2 / budget.delta) / budget.epsilon**2
    return max(1, math.ceil(n))


def nu1_xz_vertex_sampled(
    site_weights: tuple[float, list[float]], budget: EstimatorBudget
) -> tuple[float, int]:
    """Monte Carlo estimate of the XZ-vertex term via uniform Rademacher vectors.

    Returns ``(estimate, sample_count)``.
    """
    alpha, x = site_weights
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise ValueError("x_list must be nonempty")
    n = rademacher_sample_count(len(x), float(np.max(np.abs(x))), budget)
    rng = np.random.default_rng(budget.seed)
    total = 0.0
    chunk = max(1, min(n, 2**22 // max(1, len(x))))
    done = 0
    while done < n:
        b = min(chunk, n - done)
        sigma = 1.0 - 2.0 * rng.integers(0, 2, size=(b, len(x)))
        total += float(np.maximum(alpha + sigma @ x, 0.0).sum())
        done += b
    return total / n, n


def nu_p_closed_form_2local(
    g: CoefficientGraph,
    p: float = 1.0,
    budget: EstimatorBudget | None = None,
) -> float:
    """``D**-1 ||H_+||_p**p`` of a (2+1)-local Hamiltonian from its coefficients.

    For ``p = 1`` this is nu_1. Vertices whose XZ degree exceeds the exact cap
    are routed to the sampled estimator when a ``budget`` is given (``p = 1`` only).
    """
    total = 0.0
    for key in set(g.a) | set(g.b):
        a, b = g.a.get(key, 0.0), g.b.get(key, 0.0)
        total += 0.5 * (max(a + b, 0.0) ** p + max(a - b, 0.0) ** p)
    for i in range(g.n_qubits):
        nbrs = g.xz_neighbours(i)
        alpha = g.alpha.get(i, 0.0)
        xs = [g.x[(i, j)] for j in nbrs]
        if not xs:
            total += max(alpha, 0.0) ** p
        elif len(xs) <= EXACT_XZ_DEGREE_CAP:
            total += xz_vertex_value(alpha, xs, p)
        elif budget is not None and p == 1:
            total += nu1_xz_vertex_sampled((alpha, xs), budget)[0]
        else:
            raise ValueError(
                f"site {i} has XZ degree {len(xs)} > {EXACT_XZ_DEGREE_CAP}; "
                "pass an EstimatorBudget to sample it"
            )
    return total


def nu1_closed_form_2local(g: CoefficientGraph, budget: EstimatorBudget | None = None) -> float:
    return nu_p_closed_form_2local(g, 1.0, budget)


def xz_lower_bound_check(x_list) -> bool:
    """Enumerated ``sum_lam max{sum_j (-1)**lam_j x_j, 0} >= max_j |x_j| 2**(k-1)``."""
    x = np.asarray(x_list, dtype=float)
    if len(x) > EXACT_XZ_DEGREE_CAP:
        raise ValueError("too many coefficients to enumerate")
    lhs = float(np.maximum(xz_pattern_sums(0.0, x), 0.0).sum())
    rhs = float(np.max(np.abs(x))) * 2 ** (len(x) - 1)
    return lhs >= rhs * (1 - 1e-12)


def xz_lp_bound_check(x_list, p: float, degree: int | None = None) -> bool:
    """``sum_lam max{.,0}**p >= 2**(p (k - deg)) sum_j |x_j|**p`` with ``deg >= k``."""
    x = np.asarray(x_list, dtype=float)
    k = len(x)
    deg = k if degree is None else degree
    lhs = float((np.maximum(xz_pattern_sums(0.0, x), 0.0) ** p).sum())
    rhs = 2 ** (p * (k - deg)) * float((np.abs(x) ** p).sum())
    return lhs >= rhs * (1 - 1e-12)


# --- translation-invariant effective measure -------------------------------


def window_operator(h: np.ndarray, d: int) -> np.ndarray:
    """``h (x) 1 + 1 (x) h`` on three sites."""
    I = np.eye(d)
    return np.kron(h, I) + np.kron(I, h)


def window_mask(d: int) -> np.ndarray:
    """Boolean ``d**3 x d**3`` mask: bra ``(i1,i2,i3)``, ket ``(j1,j2,i3)`` with ``i2 != j2``."""
    _, i2, i3, _, j2, j3 = np.ix_(*[np.arange(d)] * 6)
    mask = np.broadcast_to((i2 != j2) & (i3 == j3), (d,) * 6)
    return mask.reshape(d**3, d**3)


def window_entries(h: np.ndarray, d: int) -> np.ndarray:
    return window_operator(h, d)[window_mask(d)]


def _term(term) -> tuple[np.ndarray, int]:
    if isinstance(term, TwoSiteTerm):
        return term.h, term.local_dim
    h = np.asarray(term, dtype=float)
    d = int(round(math.sqrt(h.shape[0])))
    if d * d != h.shape[0]:
        raise ValueError("two-site term must have d**2 rows")
    return h, d


def effective_local_nu1(term) -> float:
    """Effective local measure; the closed chain satisfies ``raw nu_1 = n d**(n-3) * value``."""
    h, d = _term(term)
    if d < 2:
        raise ValueError("local dimension must be at least 2")
    return float(np.maximum(window_entries(h, d), 0.0).sum())


def effective_local_nu_p_power(term, p: float = 2.0) -> float:
    h, d = _term(term)
    return float((np.maximum(window_entries(h, d), 0.0) ** p).sum())


def softplus_surrogate(x, alpha: float) -> np.ndarray:
    """``f_alpha(x) = x + log(1 + exp(-alpha x)) / alpha``, evaluated without overflow."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    x = np.asarray(x, dtype=float)
    z = alpha * x
    # beyond |alpha x| = 30 the correction is below double precision relative to max{x,0}
    out = np.where(z > 30, x, 0.0)
    mid = np.abs(z) <= 30
    out = np.where(mid, np.log1p(np.exp(np.where(mid, -z, 0.0))) / alpha + x, out)
    out = np.where(z < -30, np.exp(np.where(z < -30, z, 0.0)) / alpha, out)
    return out


def softplus_derivative(x, alpha: float) -> np.ndarray:
    """``f_alpha'(x) = 1 / (1 + exp(-alpha x))``, the logistic function."""
    z = np.clip(alpha * np.asarray(x, dtype=float), -700.0, 700.0)
    return 1.0 / (1.0 + np.exp(-z))


def smooth_nu1(term_window, alpha: float) -> float:
    """Smooth surrogate summed over the effective-window entries.

    ``term_window`` is a two-site term (``TwoSiteTerm`` or ``d**2 x d**2`` array)
    or a 1-D vector of already selected window entries.
    """
    arr = term_window.h if isinstance(term_window, TwoSiteTerm) else np.asarray(term_window)
    if arr.ndim == 1:
        entries = arr
    else:
        h, d = _term(term_window)
        entries = window_entries(h, d)
    return float(softplus_surrogate(entries, alpha).sum())
