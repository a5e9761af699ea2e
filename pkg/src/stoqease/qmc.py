"""Exact world-line QMC quantities from the transfer matrix ``T = 1 - beta H / m``.

Throughout, ``|T|`` is the *entrywise* absolute value, never the operator
absolute value.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .hamiltonian import DenseOperator, Operator, alpha_family, as_matrix, conjugate_onsite
from .measures import nu_p_dense

SIGN_ZERO_TOL = 1e-12


class DegenerateSignError(ArithmeticError):
    """``tr |T|**m`` vanishes to working precision; the average sign is undefined."""


class DiagonalConditionWarning(UserWarning):
    """Some diagonal entry of ``beta H / m`` exceeds 1."""


@dataclass(frozen=True)
class QmcParams:
    beta: float = 1.0
    m: int = 100

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if int(self.m) != self.m or self.m < 1:
            raise ValueError("m must be a positive integer")
        object.__setattr__(self, "m", int(self.m))


def transfer_matrix(H: Operator, params: QmcParams) -> np.ndarray:
    m = as_matrix(H)
    return np.eye(m.shape[0]) - (params.beta / params.m) * m


def diagonal_condition_holds(H: Operator, params: QmcParams) -> bool:
    """``diag(beta H / m) <= 1``, under which stoquastic paths carry positive weight."""
    return bool(np.all(np.diag(as_matrix(H)) * params.beta / params.m <= 1.0))


def _normalized_power_traces(T: np.ndarray, m: int) -> tuple[float, float, float]:
    """``(tr T**m / rho**m, tr |T|**m / rho**m, rho)`` with ``rho`` the spectral radius of ``|T|``."""
    lam = np.linalg.eigvalsh(T)
    lam_abs = np.linalg.eigvalsh(np.abs(T))
    rho = float(max(np.max(np.abs(lam_abs)), np.max(np.abs(lam))))
    if rho == 0.0:
        return 0.0, 0.0, 0.0
    num = float(np.sum((lam / rho) ** m))
    den = float(np.sum((lam_abs / rho) ** m))
    return num, den, rho


def average_sign(H: Operator, params: QmcParams) -> float:
    """``tr[T**m] / tr[|T|**m]`` via symmetric eigendecompositions."""
    if not diagonal_condition_holds(H, params):
        warnings.warn(
            "diag(beta H / m) exceeds 1; stoquastic paths may carry negative weight",
            DiagonalConditionWarning,
            stacklevel=2,
        )
    T = transfer_matrix(H, params)
    num, den, _ = _normalized_power_traces(T, params.m)
    if den <= 100 * np.finfo(float).eps * T.shape[0]:
        raise DegenerateSignError(
            f"tr|T|^m is {den:.3g} times rho^m; the average sign is numerically undefined"
        )
    return num / den


def sample_complexity_proxy(H: Operator, params: QmcParams) -> float:
    """Relative variance ``<sign>**-2 - 1``; ``inf`` when the sign vanishes."""
    s = average_sign(H, params)
    if abs(s) < SIGN_ZERO_TOL:
        return math.inf
    return max(s**-2 - 1.0, 0.0)


def log_inverse_sign(H: Operator, params: QmcParams) -> float:
    s = average_sign(H, params)
    if s <= 0:
        return math.inf
    return -math.log(s)


def negative_path_gap(H: Operator, params: QmcParams, O=None) -> tuple[float, float]:
    """``S = tr|T'|**m - tr T'**m`` in the rotated basis, and its one-negative-step part.

    ``T'`` is the transfer matrix conjugated by ``O`` on every site (``O=None``
    keeps the computational basis). The first-order term is
    ``2 m sum Delta_-(l1|l2) Delta_+**(m-1)(l2|l1)`` with
    ``Delta_pm = (|T'| pm T') / 2``.
    """
    Hm = H
    if O is not None:
        Hm = conjugate_onsite(H if isinstance(H, DenseOperator) else as_matrix(H), O)
    T = transfer_matrix(Hm, params)
    m = params.m
    lam = np.linalg.eigvalsh(T)
    lam_abs = np.linalg.eigvalsh(np.abs(T))
    S = float(np.sum(lam_abs**m) - np.sum(lam**m))
    d_plus = 0.5 * (np.abs(T) + T)
    d_minus = 0.5 * (np.abs(T) - T)
    P = np.linalg.matrix_power(d_plus, m - 1)
    first = float(2 * m * np.sum(d_minus * P.T))
    return S, first


@dataclass(frozen=True)
class SignStudyRow:
    alpha: float
    nu1: float
    inverse_sign: float


def sign_vs_nonstoq_study(
    H_base: Operator, alpha_grid, params: QmcParams
) -> list[SignStudyRow]:
    """Inverse average sign along the family ``H_alpha`` that scales only ``H_+``."""
    rows = []
    for alpha in alpha_grid:
        Ha = alpha_family(H_base, float(alpha))
        s = average_sign(Ha, params)
        rows.append(SignStudyRow(float(alpha), nu_p_dense(Ha), 1.0 / s if s != 0 else math.inf))
    return rows
