"""Conjugate-gradient minimisation of the effective non-stoquasticity over O(d).

The variable is an on-site orthogonal ``O`` acting as ``h -> (O x O) h (O x O)^T``.
Steps follow the right-invariant geometry of the orthogonal group: the
Riemannian gradient is the skew matrix ``G = Gamma O^T - O Gamma^T`` and points
move along ``O <- expm(-mu H) O`` for a skew search direction ``H``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import expm

from .hamiltonian import OrthogonalPoint, TwoSiteTerm, haar_random_orthogonal
from .measures import softplus_derivative, softplus_surrogate, window_mask

log = logging.getLogger(__name__)

MEASURES = ("nu2_squared", "smooth_nu1", "nu1")
DEFAULT_ALPHA = {"random": 50.0, "jmodel": 100.0, "ladder": 40.0}
REORTHONORMALIZE_AT = 1e-10


@dataclass(frozen=True)
class ObjectiveSpec:
    term: TwoSiteTerm
    measure: str = "smooth_nu1"
    alpha: float | None = 50.0

    def __post_init__(self):
        if self.measure not in MEASURES:
            raise ValueError(f"unknown objective {self.measure!r}")
        if self.measure == "smooth_nu1" and (self.alpha is None or self.alpha <= 0):
            raise ValueError("smooth_nu1 needs a positive alpha")


@dataclass(frozen=True)
class LineSearchConfig:
    backtracking_factor: float = 0.5
    sufficient_decrease: float = 1e-4
    max_halvings: int = 40


@dataclass(frozen=True)
class OptimizerConfig:
    max_iters: int = 5000
    gradient_tolerance: float = 1e-8
    line_search: LineSearchConfig = field(default_factory=LineSearchConfig)
    restart_period: int | None = None  # None: d(d-1)/2
    init: str = "identity"  # identity | perturbed_identity | haar_random
    init_scale: float = 0.01
    alpha: float = 50.0
    hybrid: bool = True
    polish: bool = True
    seed: int | None = None

    def __post_init__(self):
        if self.max_iters < 0 or self.gradient_tolerance <= 0 or self.init_scale < 0:
            raise ValueError("iteration counts and tolerances must be positive")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.init not in ("identity", "perturbed_identity", "haar_random"):
            raise ValueError(f"unknown init {self.init!r}")


@dataclass
class OptimizerTrace:
    measure: str = ""
    values: list[float] = field(default_factory=list)
    grad_norms: list[float] = field(default_factory=list)
    steps: list[float] = field(default_factory=list)
    nu1_start: float = float("nan")
    nu1_end: float = float("nan")
    converged: bool = False
    restarts: int = 0
    branch: str = ""
    point: OrthogonalPoint | None = None
    branches: dict[str, "OptimizerTrace"] = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return len(self.steps)


class _Window:
    """Cached index structure of the three-site window for local dimension ``d``."""

    _cache: dict[int, "_Window"] = {}

    def __init__(self, d: int):
        self.d = d
        self.mask = window_mask(d)
        self.eye = np.eye(d)

    @classmethod
    def get(cls, d: int) -> "_Window":
        if d not in cls._cache:
            cls._cache[d] = cls(d)
        return cls._cache[d]

    def entries(self, h: np.ndarray) -> np.ndarray:
        W = np.kron(h, self.eye) + np.kron(self.eye, h)
        return W[self.mask]

    def term_gradient(self, weights: np.ndarray) -> np.ndarray:
        """Adjoint of ``h -> entries(h)``: pull window weights back onto ``h``."""
        d = self.d
        GW = np.zeros((d**3, d**3))
        GW[self.mask] = weights
        left = np.einsum("akbk->ab", GW.reshape(d * d, d, d * d, d))
        right = np.einsum("kakb->ab", GW.reshape(d, d * d, d, d * d))
        return left + right


def _rotated(h: np.ndarray, O: np.ndarray) -> np.ndarray:
    C = np.kron(O, O)
    return C @ h @ C.T


def _phi(w: np.ndarray, spec: ObjectiveSpec) -> float:
    if spec.measure == "nu2_squared":
        return float(np.sum(np.maximum(w, 0.0) ** 2))
    if spec.measure == "smooth_nu1":
        return float(np.sum(softplus_surrogate(w, spec.alpha)))
    return float(np.sum(np.maximum(w, 0.0)))


def _dphi(w: np.ndarray, spec: ObjectiveSpec) -> np.ndarray:
    if spec.measure == "nu2_squared":
        return 2.0 * np.maximum(w, 0.0)
    if spec.measure == "smooth_nu1":
        return softplus_derivative(w, spec.alpha)
    raise ValueError("the hard nu_1 objective is not differentiable")


def _as_array(O) -> np.ndarray:
    return O.O if isinstance(O, OrthogonalPoint) else np.asarray(O, dtype=float)


def _check_dims(O: np.ndarray, spec: ObjectiveSpec) -> None:
    if O.shape != (spec.term.local_dim, spec.term.local_dim):
        raise ValueError(
            f"O has shape {O.shape}, term has local dimension {spec.term.local_dim}"
        )


def objective_eval(O, spec: ObjectiveSpec) -> float:
    """Objective of the conjugated term; ``O`` need not be orthogonal (used by finite differences)."""
    Om = _as_array(O)
    _check_dims(Om, spec)
    win = _Window.get(spec.term.local_dim)
    return _phi(win.entries(_rotated(spec.term.h, Om)), spec)


def hard_nu1(O, term: TwoSiteTerm) -> float:
    return objective_eval(O, ObjectiveSpec(term, "nu1", None))


def _value_and_gradient(Om: np.ndarray, spec: ObjectiveSpec) -> tuple[float, np.ndarray, float]:
    """Objective, Euclidean gradient w.r.t. ``O`` and hard nu_1 at ``Om``."""
    d = spec.term.local_dim
    win = _Window.get(d)
    h = spec.term.h
    C = np.kron(Om, Om)
    w = win.entries(C @ h @ C.T)
    G_h = win.term_gradient(_dphi(w, spec))
    # d/dC tr(G_h^T C h C^T) for symmetric h
    G_C = (G_h + G_h.T) @ C @ h
    G4 = G_C.reshape(d, d, d, d)
    grad = np.einsum("kmln,mn->kl", G4, Om) + np.einsum("mknl,mn->kl", G4, Om)
    return _phi(w, spec), grad, float(np.sum(np.maximum(w, 0.0)))


def euclidean_gradient(O, spec: ObjectiveSpec) -> np.ndarray:
    Om = _as_array(O)
    _check_dims(Om, spec)
    return _value_and_gradient(Om, spec)[1]


def riemannian_gradient(O: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    return gamma @ O.T - O @ gamma.T


def _inner(A: np.ndarray, B: np.ndarray) -> float:
    return 0.5 * float(np.sum(A * B))


def skew_exp(A: np.ndarray) -> np.ndarray:
    """Matrix exponential of a skew-symmetric matrix (an exact rotation)."""
    if A.shape == (2, 2):
        t = A[1, 0]
        c, s = np.cos(t), np.sin(t)
        return np.array([[c, -s], [s, c]])
    return expm(A)


def _reorthonormalize(O: np.ndarray) -> np.ndarray:
    if np.max(np.abs(O.T @ O - np.eye(O.shape[0]))) <= REORTHONORMALIZE_AT:
        return O
    q, r = np.linalg.qr(O)
    return q * np.sign(np.diag(r))


@dataclass
class CGState:
    """Mutable iterate of one conjugate-gradient run."""

    O: np.ndarray
    value: float
    euclid: np.ndarray
    grad: np.ndarray  # Riemannian (skew) gradient
    direction: np.ndarray
    nu1: float
    step: float = 0.0
    since_restart: int = 0
    converged: bool = False
    restarted: bool = False


def _state_at(O: np.ndarray, spec: ObjectiveSpec) -> CGState:
    value, gamma, nu1 = _value_and_gradient(O, spec)
    G = riemannian_gradient(O, gamma)
    return CGState(O, value, gamma, G, G.copy(), nu1)


def _line_search(
    state: CGState, H: np.ndarray, spec: ObjectiveSpec, ls: LineSearchConfig
) -> tuple[float, np.ndarray, float] | None:
    """Armijo backtracking along ``mu -> expm(-mu H) O``; returns ``(mu, O_new, f_new)``."""
    f0 = state.value
    slope = -_inner(state.grad, H)  # d/dmu f(expm(-mu H) O) at mu = 0
    if slope >= 0:
        return None
    h_norm = np.linalg.norm(H)
    mu_max = np.pi / h_norm
    mu0 = state.step if state.step > 0 else 1.0 / h_norm
    mu0 = min(mu0, mu_max)

    def f(mu):
        On = skew_exp(-mu * H) @ state.O
        return objective_eval(On, spec), On

    f_trial, O_trial = f(mu0)
    # quadratic through f(0), f'(0) and f(mu0)
    curv = (f_trial - f0 - slope * mu0) / mu0**2
    mu = -slope / (2 * curv) if curv > 0 else 2 * mu0
    mu = float(min(max(mu, 1e-3 * mu0), 10 * mu0, mu_max))

    candidates = []
    if f_trial <= f0 + ls.sufficient_decrease * mu0 * slope:
        candidates.append((f_trial, mu0, O_trial))
    for _ in range(ls.max_halvings + 1):
        val, On = f(mu)
        if val <= f0 + ls.sufficient_decrease * mu * slope:
            candidates.append((val, mu, On))
            break
        mu *= ls.backtracking_factor
    if not candidates:
        return None
    val, mu, On = min(candidates, key=lambda c: c[0])
    return mu, On, val


def riemannian_step(
    state: CGState,
    spec: ObjectiveSpec,
    ls: LineSearchConfig | None = None,
    restart_period: int | None = None,
    tolerance: float = 1e-8,
) -> CGState:
    """One Polak-Ribiere+ conjugate-gradient step on O(d).

    Falls back to steepest descent if the conjugate direction fails the line
    search; if that fails too the returned state is flagged converged.
    """
    ls = ls or LineSearchConfig()
    d = state.O.shape[0]
    period = restart_period or max(1, d * (d - 1) // 2)
    g_norm = np.linalg.norm(state.grad)
    if g_norm < tolerance * (1 + abs(state.value)):
        return replace(state, converged=True, restarted=False)

    found = _line_search(state, state.direction, spec, ls)
    restarted = False
    if found is None and not np.array_equal(state.direction, state.grad):
        restarted = True
        found = _line_search(state, state.grad, spec, ls)
    if found is None:
        return replace(state, converged=True, restarted=restarted)
    mu, O_new, _ = found
    O_new = _reorthonormalize(O_new)
    new = _state_at(O_new, spec)
    direction = state.grad if restarted else state.direction
    since = 0 if restarted else state.since_restart
    gamma = _inner(new.grad - state.grad, new.grad) / max(_inner(state.grad, state.grad), 1e-300)
    gamma = max(gamma, 0.0)
    since += 1
    H_new = new.grad + gamma * direction
    if since >= period or _inner(H_new, new.grad) <= 0:
        H_new = new.grad.copy()
        since = 0
    new.direction = H_new
    new.step = mu
    new.since_restart = since
    new.restarted = restarted
    return new


def run_cg(
    O0: np.ndarray,
    spec: ObjectiveSpec,
    config: OptimizerConfig,
    best: list | None = None,
) -> tuple[np.ndarray, OptimizerTrace]:
    """Minimise ``spec`` from ``O0``. ``best`` (``[nu1, O]``) tracks the lowest hard nu_1 seen."""
    state = _state_at(np.array(O0, dtype=float), spec)
    trace = OptimizerTrace(measure=spec.measure, nu1_start=state.nu1)
    trace.values.append(state.value)
    trace.grad_norms.append(float(np.linalg.norm(state.grad)))
    if best is not None and state.nu1 < best[0]:
        best[0], best[1] = state.nu1, state.O
    for _ in range(config.max_iters):
        new = riemannian_step(
            state, spec, config.line_search, config.restart_period, config.gradient_tolerance
        )
        if new.converged:
            state = new
            break
        if new.value > state.value:
            raise AssertionError("accepted step increased the objective")
        trace.restarts += int(new.restarted)
        state = new
        trace.values.append(state.value)
        trace.grad_norms.append(float(np.linalg.norm(state.grad)))
        trace.steps.append(state.step)
        if best is not None and state.nu1 < best[0]:
            best[0], best[1] = state.nu1, state.O
    trace.converged = state.converged
    trace.nu1_end = state.nu1
    trace.point = OrthogonalPoint(state.O)
    return state.O, trace


def perturbed_identity(d: int, scale: float, seed=None) -> OrthogonalPoint:
    rng = np.random.default_rng(seed)
    K = rng.standard_normal((d, d))
    return OrthogonalPoint(skew_exp(scale * (K - K.T) / 2))


def initial_point(d: int, config: OptimizerConfig) -> np.ndarray:
    if config.init == "identity":
        return np.eye(d)
    if config.init == "perturbed_identity":
        return perturbed_identity(d, config.init_scale, config.seed).O
    return haar_random_orthogonal(d, config.seed).O


def optimize(
    term: TwoSiteTerm, config: OptimizerConfig | None = None, O0=None
) -> tuple[OrthogonalPoint, OptimizerTrace]:
    """Hybrid minimisation of the effective nu_1 of ``term``.

    Branch (a) pre-optimises nu_2 squared and continues with the smooth nu_1
    surrogate; branch (b) runs the surrogate directly from the same start.
    With ``polish`` each branch ends with a nu_2 squared descent from its
    smooth minimiser: the surrogate's minimum sits O(1/alpha) away from an
    exactly stoquastic point, and the squared measure pulls it back in.
    The returned point has the smallest hard effective nu_1 among the start
    point and every iterate of every stage, so it never does worse than
    either branch's final point.
    """
    config = config or OptimizerConfig()
    d = term.local_dim
    start = initial_point(d, config) if O0 is None else _as_array(O0)
    nu_start = hard_nu1(start, term)
    best = [nu_start, start]
    smooth = ObjectiveSpec(term, "smooth_nu1", config.alpha)

    squared = ObjectiveSpec(term, "nu2_squared", None)
    branches: dict[str, OptimizerTrace] = {}
    finals: dict[str, float] = {}

    def branch(name: str, O_from: np.ndarray) -> None:
        O_end, t = run_cg(O_from, smooth, config, best)
        t.branch = name
        branches[name] = t
        finals[name] = t.nu1_end
        if config.polish:
            _, t_pol = run_cg(O_end, squared, config, best)
            branches[name + "_polish"] = t_pol
            finals[name] = min(finals[name], t_pol.nu1_end)

    if config.hybrid:
        O_pre, t_pre = run_cg(start, squared, config, best)
        branches["a_pre"] = t_pre
        branch("a", O_pre)
    branch("b", start)

    nu_best, O_best = best
    assert nu_best <= min(finals.values()) + 1e-12
    # ties prefer branch (a) for determinism
    chosen = min(finals, key=lambda k: (finals[k], k != "a"))
    main = branches[chosen]
    trace = OptimizerTrace(
        measure="hybrid" if config.hybrid else "smooth_nu1",
        values=main.values,
        grad_norms=main.grad_norms,
        steps=main.steps,
        nu1_start=nu_start,
        nu1_end=nu_best,
        converged=all(t.converged for t in branches.values()),
        restarts=sum(t.restarts for t in branches.values()),
        branch=chosen,
        point=OrthogonalPoint(O_best),
        branches=branches,
    )
    log.debug("optimize d=%d: nu1 %.6g -> %.6g (branch %s)", d, nu_start, nu_best, chosen)
    return trace.point, trace
