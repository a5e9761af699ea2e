"""Experiment drivers behind the command line: configs, result rows, CSV and manifests."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import os
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np
import scipy
from scipy.stats import spearmanr

from . import __version__
from .hamiltonian import (
    ChainSpec,
    DenseOperator,
    LadderParams,
    TwoSiteTerm,
    build_chain,
    build_ladder,
    conjugate_onsite,
    example_fine_tuned,
    example_sign_free,
    random_stoquastic_instance,
)
from .hardness import MaxCutInstance, connected_graphs, embed_maxcut, parse_edge_list, verify_reduction
from .measures import MeasureSpec, effective_local_nu1, nu_p_closed_form_2local, nu_p_dense, smooth_nu1
from .optimizer import DEFAULT_ALPHA, LineSearchConfig, OptimizerConfig, hard_nu1, optimize
from .qmc import DegenerateSignError, QmcParams, SignStudyRow, average_sign, sign_vs_nonstoq_study

log = logging.getLogger(__name__)

EXPERIMENTS = (
    "benchmark_random",
    "jmodel_sweep",
    "ladder_sweep",
    "sign_study",
    "maxcut_verify",
    "embed_maxcut",
    "measure",
    "optimize",
    "avgsign",
)
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2
ZERO_LOG_SIGN = 1e-9
GAP = "NA"


class ConfigError(ValueError):
    """Invalid experiment configuration (exit code 1)."""


class NumericalFailure(ArithmeticError):
    """A quantity came out undefined or non-finite (exit code 2)."""


@dataclass(frozen=True)
class AxisSpec:
    name: str
    min: float
    max: float
    steps: int

    def __post_init__(self):
        if int(self.steps) != self.steps or self.steps < 1:
            raise ConfigError(f"axis {self.name!r}: steps must be a positive integer")
        if self.steps > 1 and not self.max > self.min:
            raise ConfigError(f"axis {self.name!r}: need max > min")
        object.__setattr__(self, "steps", int(self.steps))

    def values(self) -> np.ndarray:
        return np.linspace(self.min, self.max, self.steps)

    @classmethod
    def parse(cls, text: str) -> "AxisSpec":
        """``name=min:max:steps``."""
        try:
            name, rng = text.split("=", 1)
            lo, hi, steps = rng.split(":")
            return cls(name.strip(), float(lo), float(hi), int(steps))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad grid spec {text!r}; expected name=min:max:steps") from exc


SWEEP_AXES = {
    "ladder_sweep": (AxisSpec("J_perp", 0.0, 2.0, 21), AxisSpec("J_cross", 0.0, 2.0, 21)),
    "jmodel_sweep": (AxisSpec("J2", 0.0, 2.0, 21), AxisSpec("J3", 0.0, 2.0, 21)),
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    model: dict = field(default_factory=dict)
    grid: tuple[AxisSpec, ...] = ()
    qmc: QmcParams = field(default_factory=QmcParams)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    measure: MeasureSpec = field(default_factory=MeasureSpec)
    seed: int = 0
    n_restarts: int = 1
    n_instances: int = 100
    local_dim: int = 2
    n_sites: int = 5
    alpha_steps: int = 20
    graph: tuple[tuple[int, int], ...] = ()
    input_path: str | None = None
    out_dir: str = "results"
    threads: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        for name in ("n_restarts", "n_instances", "alpha_steps", "threads"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")
        if self.local_dim < 2:
            raise ConfigError("local_dim must be at least 2")
        if self.n_sites < 2:
            raise ConfigError("n_sites must be at least 2")
        if self.experiment in SWEEP_AXES and len(self.axes()) != 2:
            raise ConfigError("sweeps take exactly two grid axes")

    def axes(self) -> tuple[AxisSpec, ...]:
        if self.grid:
            return self.grid
        return SWEEP_AXES.get(self.experiment, ())

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["grid"] = [dataclasses.asdict(a) for a in self.axes()]
        d["graph"] = [list(e) for e in self.graph]
        return d


def _build(cls, data: dict | None, what: str):
    data = dict(data or {})
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown {what} keys: {sorted(unknown)}")
    try:
        return cls(**data)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {what}: {exc}") from exc


def config_from_dict(data: dict) -> ExperimentConfig:
    data = dict(data)
    if "experiment" not in data:
        raise ConfigError("config must name an experiment")
    opt = dict(data.pop("optimizer", {}) or {})
    if "line_search" in opt:
        opt["line_search"] = _build(LineSearchConfig, opt["line_search"], "line_search")
    if "alpha" not in opt:
        opt["alpha"] = _default_alpha(data.get("experiment"), data.get("model") or {})
    if "init" not in opt:
        # the identity is a stationary point of the symmetric ladder terms
        jmodel = data.get("experiment") == "jmodel_sweep" or (data.get("model") or {}).get("model") == "J0J1J2J3"
        opt["init"] = "haar_random" if jmodel else "perturbed_identity"
    data["optimizer"] = _build(OptimizerConfig, opt, "optimizer")
    data["qmc"] = _build(QmcParams, data.get("qmc"), "qmc")
    data["measure"] = _build(MeasureSpec, data.get("measure"), "measure")
    try:
        data["grid"] = tuple(
            a if isinstance(a, AxisSpec) else AxisSpec(**a) for a in data.get("grid", ())
        )
        data["graph"] = tuple(tuple(int(v) for v in e) for e in data.get("graph", ()))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid grid or graph: {exc}") from exc
    return _build(ExperimentConfig, data, "config")


def _default_alpha(experiment, model: dict) -> float:
    name = model.get("model", "")
    if experiment == "jmodel_sweep" or name == "J0J1J2J3":
        return DEFAULT_ALPHA["jmodel"]
    if experiment == "ladder_sweep" or name == "FrustratedLadder":
        return DEFAULT_ALPHA["ladder"]
    return DEFAULT_ALPHA["random"]


def point_seed(master: int, *coords: int) -> int:
    """Seed for one grid point; independent of execution order."""
    return int(np.random.SeedSequence([master, *coords]).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    coords: dict[str, Any]
    values: dict[str, Any]
    seed: int | None = None


# value columns per experiment; coordinates precede them, seed comes last
SCHEMAS = {
    "benchmark_random": (
        "nu1_before", "nu1_after", "nu1_ratio", "recovered", "sign_before", "sign_after", "iterations",
    ),
    "jmodel_sweep": (
        "nu1_before", "nu1_after", "nu1_ratio", "sign_before", "sign_after",
        "log_sign_before", "log_sign_after", "log_sign_ratio", "iterations",
    ),
    "sign_study": ("nu1", "sign", "log_inverse_sign"),
    "maxcut_verify": (
        "n_vertices", "n_edges", "C", "ising_energy", "zflip_min", "energy_identity",
        "cut_correspondence", "clifford_min", "clifford_matches",
    ),
    "embed_maxcut": ("coefficient",),
    "measure": ("nu", "stoquastic"),
    "avgsign": ("sign", "log_inverse_sign", "nu1"),
    "optimize": (
        "nu1_before", "nu1_after", "nu1_ratio", "effective_before", "effective_after",
        "sign_before", "sign_after", "iterations",
    ),
}
SCHEMAS["ladder_sweep"] = SCHEMAS["jmodel_sweep"]


@dataclass
class RunResult:
    config: ExperimentConfig
    rows: list[ResultRow]
    summary: dict = field(default_factory=dict)
    timings: list[float] = field(default_factory=list)
    failures: list[dict] = field(default_factory=list)
    extras: dict = field(default_factory=dict)  # e.g. the optimal orthogonal matrix

    @property
    def exit_code(self) -> int:
        return EXIT_NUMERICAL if self.failures else EXIT_OK


def _finite(x: float, what: str) -> float:
    if not math.isfinite(x):
        raise NumericalFailure(f"{what} is not finite ({x})")
    return float(x)


def _log_inverse(sign: float) -> float:
    if sign <= 0:
        raise NumericalFailure(f"average sign {sign:.3g} is not positive")
    return -math.log(sign)


def log_sign_ratio(before: float, after: float) -> float:
    """``after / before``; 1 when both vanish, ``inf`` when only ``before`` does."""
    if before <= ZERO_LOG_SIGN:
        return 1.0 if after <= ZERO_LOG_SIGN else math.inf
    return after / before


# --- model inputs ----------------------------------------------------------


def load_matrix(path: str) -> np.ndarray:
    try:
        m = np.loadtxt(path, ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read matrix file {path}: {exc}") from exc
    if m.shape[0] != m.shape[1]:
        raise ConfigError(f"matrix in {path} is not square")
    return m


def _qubit_dims(D: int) -> tuple[int, ...]:
    n = D.bit_length() - 1
    return (2,) * n if 2**n == D and n > 0 else (D,)


def dense_from_config(cfg: ExperimentConfig) -> DenseOperator:
    if cfg.input_path:
        m = load_matrix(cfg.input_path)
        try:
            return DenseOperator(m, _qubit_dims(m.shape[0]))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    model = dict(cfg.model)
    name = model.pop("model", None)
    try:
        if name == "example_sign_free":
            return example_sign_free(int(model.get("n", 3)))
        if name == "example_fine_tuned":
            return example_fine_tuned(
                float(model["a"]), float(model["b"]), cfg.qmc.beta, cfg.qmc.m
            )
        return build_chain(chain_from_config(cfg))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid model: {exc}") from exc


def term_from_model(model: dict, local_dim: int = 2) -> TwoSiteTerm:
    model = dict(model)
    name = model.pop("model", None)
    if name in ("J0J1J2J3", "FrustratedLadder"):
        params = LadderParams(name, tuple(model["couplings"]), int(model.get("n_rungs", 4)))
        return build_ladder(params).term
    if name == "random_stoquastic":
        return random_stoquastic_instance(int(model.get("d", local_dim)), model.get("seed", 0))[0]
    if name == "term":
        h = np.asarray(model["h"], dtype=float)
        return TwoSiteTerm(int(round(math.sqrt(h.shape[0]))), h)
    raise ConfigError(f"unknown model {name!r}")


def chain_from_config(cfg: ExperimentConfig) -> ChainSpec:
    """Closed chain for ``optimize``-type inputs: a term file or a model entry."""
    try:
        if cfg.input_path:
            h = load_matrix(cfg.input_path)
            d = int(round(math.sqrt(h.shape[0])))
            return ChainSpec(cfg.n_sites, TwoSiteTerm(d, h))
        model = cfg.model
        if model.get("model") in ("J0J1J2J3", "FrustratedLadder"):
            return build_ladder(
                LadderParams(model["model"], tuple(model["couplings"]), int(model.get("n_rungs", 4)))
            )
        return ChainSpec(cfg.n_sites, term_from_model(model, cfg.local_dim))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid model: {exc}") from exc


def graph_from_config(cfg: ExperimentConfig) -> MaxCutInstance:
    try:
        if cfg.input_path:
            return parse_edge_list(Path(cfg.input_path).read_text())
        if cfg.graph:
            return MaxCutInstance.from_edges(cfg.graph)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"invalid graph: {exc}") from exc
    raise ConfigError("no graph given (use 'graph' in the config or an edge-list file)")


# --- experiments -----------------------------------------------------------


def best_of_restarts(term: TwoSiteTerm, cfg: OptimizerConfig, seeds) -> tuple[Any, Any, int]:
    """Optimise from several seeded inits; keep the lowest hard effective nu_1."""
    best = None
    iters = 0
    for s in seeds:
        point, trace = optimize(term, dataclasses.replace(cfg, seed=int(s)))
        iters += sum(t.iterations for t in trace.branches.values())
        if best is None or trace.nu1_end < best[1].nu1_end:
            best = (point, trace)
    return best[0], best[1], iters


def benchmark_instance(d: int, seed: int, cfg: OptimizerConfig, n_sites: int = 3, qmc=None):
    """One recovery run on a random term that is stoquastic in a hidden on-site basis."""
    term, _ = random_stoquastic_instance(d, seed)
    point, trace = optimize(term, dataclasses.replace(cfg, seed=seed, init="haar_random"))
    before = effective_local_nu1(term)
    after = trace.nu1_end
    values = {
        "nu1_before": before,
        "nu1_after": after,
        "nu1_ratio": after / before if before > 0 else 1.0,
        "recovered": int(after <= 1e-5 * float(np.max(np.abs(term.h)))),
        "iterations": sum(t.iterations for t in trace.branches.values()),
    }
    if qmc is not None:
        H = build_chain(ChainSpec(n_sites, term))
        values["sign_before"] = average_sign(H, qmc)
        values["sign_after"] = average_sign(conjugate_onsite(H, point), qmc)
    return values


def _run_benchmark(cfg: ExperimentConfig, pool) -> RunResult:
    seeds = [point_seed(cfg.seed, k) for k in range(cfg.n_instances)]
    opt = cfg.optimizer

    def work(k):
        v = benchmark_instance(cfg.local_dim, seeds[k], opt, 3, cfg.qmc)
        return ResultRow("benchmark_random", {"d": cfg.local_dim, "instance": k}, v, seeds[k])

    res = _collect(cfg, pool, work, list(range(cfg.n_instances)))
    rec = [r.values["recovered"] for r in res.rows]
    res.summary = {
        "instances": len(rec),
        "recovered": int(sum(rec)),
        "success_rate": float(np.mean(rec)) if rec else math.nan,
        "threshold": "hard effective nu_1 <= 1e-5 max|h|",
    }
    return res


def _run_sweep(cfg: ExperimentConfig, pool) -> RunResult:
    ax, ay = cfg.axes()
    xs, ys = ax.values(), ay.values()
    model = dict(cfg.model)
    n_rungs = int(model.get("n_rungs", 4))
    ladder = cfg.experiment == "ladder_sweep"
    jpar = float(model.get("J_par", 1.0))
    J = float(model.get("J", 1.0))
    points = [(ix, iy) for ix in range(len(xs)) for iy in range(len(ys))]

    def work(p):
        ix, iy = p
        x, y = float(xs[ix]), float(ys[iy])
        if ladder:
            params = LadderParams("FrustratedLadder", (jpar, x * jpar, y * jpar), n_rungs)
        else:
            params = LadderParams("J0J1J2J3", (J, J, x * J, y * J), n_rungs)
        spec = build_ladder(params)
        seed = point_seed(cfg.seed, ix, iy)
        restart_seeds = [point_seed(seed, r) for r in range(cfg.n_restarts)]
        point, trace, iters = best_of_restarts(spec.term, cfg.optimizer, restart_seeds)
        H = build_chain(spec)
        H2 = conjugate_onsite(H, point)
        nb, na = nu_p_dense(H), nu_p_dense(H2)
        sb, sa = average_sign(H, cfg.qmc), average_sign(H2, cfg.qmc)
        lb, la = _log_inverse(sb), _log_inverse(sa)
        values = {
            "nu1_before": nb,
            "nu1_after": na,
            "nu1_ratio": na / nb if nb > 0 else 1.0,
            "sign_before": sb,
            "sign_after": sa,
            "log_sign_before": lb,
            "log_sign_after": la,
            "log_sign_ratio": log_sign_ratio(lb, la),
            "iterations": iters,
        }
        for k in ("nu1_before", "nu1_after", "sign_before", "sign_after"):
            _finite(values[k], k)
        return ResultRow(cfg.experiment, {ax.name: x, ay.name: y}, values, seed)

    return _collect(cfg, pool, work, points)


def random_gaussian_chain(n: int, seed) -> DenseOperator:
    """Closed qubit chain whose term is a symmetrised standard Gaussian 4x4 matrix."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((4, 4))
    return build_chain(ChainSpec(n, TwoSiteTerm(2, (A + A.T) / 2)))


def sign_study_instance(n: int, seed, alpha_steps: int, qmc: QmcParams):
    """Rows ``(alpha, nu_1, sign)`` along ``H_alpha`` with ``alpha`` in ``[0, 2**n]``."""
    H = random_gaussian_chain(n, seed)
    grid = np.linspace(0.0, 2.0**n, alpha_steps)
    if nu_p_dense(H) == 0:
        # already stoquastic: the family is undefined and every point is sign-free
        inv = 1.0 / average_sign(H, qmc)
        return [SignStudyRow(float(a), 0.0, inv) for a in grid]
    return sign_vs_nonstoq_study(H, grid, qmc)


def spearman_or_nan(a, b) -> float:
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        return math.nan
    return float(spearmanr(a, b)[0])


def _run_sign_study(cfg: ExperimentConfig, pool) -> RunResult:
    seeds = [point_seed(cfg.seed, k) for k in range(cfg.n_instances)]

    def work(k):
        study = sign_study_instance(cfg.n_sites, seeds[k], cfg.alpha_steps, cfg.qmc)
        rows = []
        for j, r in enumerate(study):
            sign = 1.0 / r.inverse_sign
            rows.append(
                ResultRow(
                    "sign_study",
                    {"instance": k, "alpha_index": j, "alpha": r.alpha},
                    {"nu1": r.nu1, "sign": sign, "log_inverse_sign": _log_inverse(sign)},
                    seeds[k],
                )
            )
        return rows

    res = _collect(cfg, pool, work, list(range(cfg.n_instances)), flatten=True)
    rhos = []
    for k in range(cfg.n_instances):
        rows = [r for r in res.rows if r.coords["instance"] == k]
        if rows:
            rhos.append(
                spearman_or_nan([r.values["nu1"] for r in rows], [r.values["log_inverse_sign"] for r in rows])
            )
    ok = [bool(r >= 0.9) for r in rhos]  # NaN (sign-free for every alpha) counts as a miss
    res.summary = {
        "spearman": [None if math.isnan(r) else r for r in rhos],
        "fraction_rho_ge_0.9": float(np.mean(ok)) if ok else math.nan,
    }
    return res


def _run_maxcut_verify(cfg: ExperimentConfig, pool) -> RunResult:
    if cfg.graph or cfg.input_path:
        graphs = [graph_from_config(cfg)]
    else:
        graphs = connected_graphs(int(cfg.model.get("max_vertices", 4)))
    cap = int(cfg.model.get("qubit_cap", 6))

    def work(k):
        g = graphs[k]
        rep = verify_reduction(g, qubit_cap=cap, workers=1)
        values = {
            "n_vertices": rep.n_vertices,
            "n_edges": rep.n_edges,
            "C": rep.C,
            "ising_energy": rep.ising_energy,
            "zflip_min": rep.zflip_min,
            "energy_identity": int(rep.energy_identity),
            "cut_correspondence": int(rep.cut_correspondence),
            "clifford_min": GAP if rep.clifford_min is None else rep.clifford_min,
            "clifford_matches": GAP if rep.clifford_matches_zflip is None else int(rep.clifford_matches_zflip),
        }
        edges = ";".join(f"{i}-{j}" for i, j in g.sorted_edges())
        return ResultRow("maxcut_verify", {"graph": k, "edges": edges}, values)

    res = _collect(cfg, pool, work, list(range(len(graphs))))
    res.summary = {
        "graphs": len(res.rows),
        "all_passed": all(
            r.values["energy_identity"] and r.values["cut_correspondence"] and r.values["clifford_matches"] != 0
            for r in res.rows
        ),
    }
    return res


def _run_embed(cfg: ExperimentConfig, pool) -> RunResult:
    g = graph_from_config(cfg)
    inst = embed_maxcut(g)
    ham = inst.hamiltonian
    rows = []
    for label, coeffs in (("XX", ham.a), ("ZZ", ham.c)):
        for (i, j), v in sorted(coeffs.items()):
            rows.append(ResultRow("embed_maxcut", {"term": label, "i": i, "j": j}, {"coefficient": v}))
    res = RunResult(cfg, rows)
    res.summary = {
        "n_qubits": inst.n_qubits,
        "C": inst.C,
        "vertex_qubits": list(inst.vertex_qubits),
        "ancilla_qubits": list(inst.ancilla_qubits),
        "nu1_computational": nu_p_closed_form_2local(ham),
    }
    return res


def _run_measure(cfg: ExperimentConfig, pool) -> RunResult:
    spec = cfg.measure
    if spec.mode in ("effective_local", "smooth"):
        term = chain_from_config(cfg).term
        nu = effective_local_nu1(term) if spec.mode == "effective_local" else smooth_nu1(term, spec.alpha)
        stoq = int(effective_local_nu1(term) == 0)
    else:
        H = dense_from_config(cfg)
        nu = nu_p_dense(H, MeasureSpec(spec.p, "dense", None, spec.normalization))
        stoq = int(nu == 0)
    return RunResult(cfg, [ResultRow("measure", {"mode": spec.mode, "p": spec.p}, {"nu": nu, "stoquastic": stoq})])


def _run_avgsign(cfg: ExperimentConfig, pool) -> RunResult:
    H = dense_from_config(cfg)
    s = average_sign(H, cfg.qmc)
    values = {
        "sign": s,
        "log_inverse_sign": -math.log(s) if s > 0 else math.inf,
        "nu1": nu_p_dense(H),
    }
    return RunResult(cfg, [ResultRow("avgsign", {"beta": cfg.qmc.beta, "m": cfg.qmc.m}, values)])


def _run_optimize(cfg: ExperimentConfig, pool) -> RunResult:
    spec = chain_from_config(cfg)
    term = spec.term
    seeds = [point_seed(cfg.seed, r) for r in range(cfg.n_restarts)]
    point, trace, iters = best_of_restarts(term, cfg.optimizer, seeds)
    values = {
        "effective_before": effective_local_nu1(term),
        "effective_after": hard_nu1(point, term),
        "iterations": iters,
    }
    D = term.local_dim**spec.n_sites
    if D <= 2**12:
        H = build_chain(spec)
        H2 = conjugate_onsite(H, point)
        values["nu1_before"], values["nu1_after"] = nu_p_dense(H), nu_p_dense(H2)
        values["sign_before"] = average_sign(H, cfg.qmc)
        values["sign_after"] = average_sign(H2, cfg.qmc)
    else:
        # closed chain: nu_1 = n d**(n-3) * effective / D
        scale = spec.n_sites * term.local_dim ** (spec.n_sites - 3) / D
        values["nu1_before"] = scale * values["effective_before"]
        values["nu1_after"] = scale * values["effective_after"]
        values["sign_before"] = values["sign_after"] = GAP
    nb = values["nu1_before"]
    values["nu1_ratio"] = values["nu1_after"] / nb if nb > 0 else 1.0
    res = RunResult(cfg, [ResultRow("optimize", {"n_sites": spec.n_sites, "d": term.local_dim}, values, seeds[0])])
    res.extras["orthogonal"] = point.O.tolist()
    res.summary = {"branch": trace.branch, "converged": trace.converged}
    return res


RUNNERS: dict[str, Callable] = {
    "benchmark_random": _run_benchmark,
    "jmodel_sweep": _run_sweep,
    "ladder_sweep": _run_sweep,
    "sign_study": _run_sign_study,
    "maxcut_verify": _run_maxcut_verify,
    "embed_maxcut": _run_embed,
    "measure": _run_measure,
    "avgsign": _run_avgsign,
    "optimize": _run_optimize,
}

NUMERICAL_ERRORS = (NumericalFailure, DegenerateSignError, FloatingPointError, np.linalg.LinAlgError)


def _collect(cfg, pool, work, items, flatten=False) -> RunResult:
    """Run ``work`` on every item, keeping rows in item order whatever the completion order."""

    def timed(item):
        t0 = time.perf_counter()
        try:
            out = work(item)
            err = None
        except NUMERICAL_ERRORS as exc:
            out, err = None, f"{type(exc).__name__}: {exc}"
        return out, err, time.perf_counter() - t0

    results = list(pool.map(timed, items)) if pool else [timed(i) for i in items]
    res = RunResult(cfg, [])
    for item, (out, err, dt) in zip(items, results):
        if err is not None:
            res.failures.append({"item": list(item) if isinstance(item, tuple) else item, "error": err})
            log.warning("point %s failed: %s", item, err)
            continue
        rows = out if flatten else [out]
        res.rows.extend(rows)
        res.timings.extend([dt / max(len(rows), 1)] * len(rows))
    return res


def run(config: ExperimentConfig) -> RunResult:
    """Run one experiment in memory. Numerical failures of single points are collected."""
    pool = ThreadPoolExecutor(config.threads) if config.threads > 1 else None
    try:
        return RUNNERS[config.experiment](config, pool)
    finally:
        if pool:
            pool.shutdown()


# --- outputs ---------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % (float(v) + 0.0)  # no negative zero
    return str(v)


def rows_to_csv(rows: list[ResultRow], experiment: str) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    coords = list(rows[0].coords) if rows else []
    cols = SCHEMAS[experiment]
    writer.writerow(["experiment", *coords, *cols, "seed"])
    for r in rows:
        writer.writerow(
            [r.experiment]
            + [_fmt(r.coords[c]) for c in coords]
            + [_fmt(r.values.get(c, GAP)) for c in cols]
            + ["" if r.seed is None else str(r.seed)]
        )
    return buf.getvalue()


def read_csv(path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def code_checksum() -> str:
    h = hashlib.sha256()
    for p in sorted(Path(__file__).parent.glob("*.py")):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return h.hexdigest()


def versions() -> dict[str, str]:
    return {
        "stoqease": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


def write_outputs(result: RunResult, out_dir) -> dict:
    """Write ``<experiment>.csv`` and ``manifest.json``; return the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = result.config
    name = cfg.experiment
    csv_text = rows_to_csv(result.rows, name)
    csv_path = out / f"{name}.csv"
    csv_path.write_text(csv_text)
    cfg_dict = cfg.to_dict()
    cfg_hash = sha256_text(json.dumps(cfg_dict, sort_keys=True))
    manifest = {
        "experiment": name,
        "config": cfg_dict,
        "config_sha256": cfg_hash,
        "code_sha256": code_checksum(),
        "versions": versions(),
        "seeds": {"master": cfg.seed, "rows": [r.seed for r in result.rows]},
        "checksums": {csv_path.name: sha256_text(csv_text)},
        "summary": result.summary,
        "failures": result.failures,
        "wall_time_s": result.timings,  # kept out of the CSV so reruns are bit-identical
        "exit_code": result.exit_code,
    }
    if result.extras:
        manifest["extras"] = result.extras
    mpath = out / f"{name}.manifest.json"
    if mpath.exists():
        try:
            old = json.loads(mpath.read_text())
        except (OSError, ValueError):
            old = {}
        if old.get("config_sha256") == cfg_hash and (
            old.get("checksums") != manifest["checksums"] or old.get("code_sha256") != manifest["code_sha256"]
        ):
            manifest["rerun_mismatch"] = {
                "previous_checksums": old.get("checksums"),
                "previous_code_sha256": old.get("code_sha256"),
            }
            log.warning("rerun of an identical config produced different outputs or code")
    mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_json_default) + "\n")
    return manifest


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def emit_plotdata(rows: list[ResultRow], axes: tuple[AxisSpec, AxisSpec], out_dir, observables) -> tuple[list[Path], int]:
    """One matrix file per observable: rows follow the first axis, columns the second.

    The header line holds the second axis values, each data line starts with
    the first axis value. Grid points without a row are written as ``NA`` and
    make the returned exit code nonzero.
    """
    ax, ay = axes
    xs, ys = ax.values(), ay.values()
    lookup = {}
    for r in rows:
        lookup[(_fmt(float(r.coords[ax.name])), _fmt(float(r.coords[ay.name])))] = r
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths, missing = [], 0
    for obs in observables:
        lines = [f"# {obs}; rows: {ax.name}, columns: {ay.name}", "\t".join([f"{ax.name}\\{ay.name}"] + [_fmt(float(y)) for y in ys])]
        for x in xs:
            cells = [_fmt(float(x))]
            for y in ys:
                r = lookup.get((_fmt(float(x)), _fmt(float(y))))
                if r is None or obs not in r.values:
                    cells.append(GAP)
                    missing += 1
                else:
                    cells.append(_fmt(r.values[obs]))
            lines.append("\t".join(cells))
        p = out / f"{obs}.dat"
        p.write_text("\n".join(lines) + "\n")
        paths.append(p)
    return paths, EXIT_NUMERICAL if missing else EXIT_OK


def load_plotdata(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Inverse of one ``emit_plotdata`` file: ``(x values, y values, matrix)``; gaps become NaN."""
    lines = [l for l in Path(path).read_text().splitlines() if l and not l.startswith("#")]
    ys = np.array([float(v) for v in lines[0].split("\t")[1:]])
    xs, mat = [], []
    for line in lines[1:]:
        cells = line.split("\t")
        xs.append(float(cells[0]))
        mat.append([math.nan if c == GAP else float(c) for c in cells[1:]])
    return np.array(xs), ys, np.array(mat)


def resolve_threads(flag: int | None) -> int:
    if flag is not None:
        return flag
    env = os.environ.get("STOQEASE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"STOQEASE_THREADS={env!r} is not an integer") from exc
    return 1
