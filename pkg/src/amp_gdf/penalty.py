"""Scalar penalty machinery for l1, SCAD and MCP.

All three penalties admit a closed-form solution of the one-body problem

    theta_hat(w) = argmin_theta (theta - w)^2 / (2 sigma2) + J(theta)

written as ``theta_hat = V(w~) * S(w~)`` with the effective field ``w~ = w / sigma2``.
``V`` is the rescaled variance (local slope d theta_hat / d w~) that AMP feeds
back as ``v_i``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import CurvatureError, ZeroArgument

__all__ = [
    "Family",
    "PenaltySpec",
    "ProxResult",
    "Branch",
    "penalty_value",
    "penalty_subgradient",
    "prox",
    "prox_array",
    "branch_of",
    "transient_curvature",
]


class Family(str, enum.Enum):
    L1 = "l1"
    SCAD = "scad"
    MCP = "mcp"


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty family plus its parameters ``lam`` (threshold scale) and ``a``.

    ``a`` is ignored for l1; SCAD needs ``a > 2`` and MCP ``a > 1``.
    """

    family: Family
    lam: float
    a: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if self.family is Family.SCAD and not (self.a is not None and self.a > 2):
            raise ValueError(f"SCAD requires a > 2, got {self.a}")
        if self.family is Family.MCP and not (self.a is not None and self.a > 1):
            raise ValueError(f"MCP requires a > 1, got {self.a}")
        if self.family is Family.L1:
            object.__setattr__(self, "a", None)

    @classmethod
    def l1(cls, lam: float) -> "PenaltySpec":
        return cls(Family.L1, lam)

    @classmethod
    def scad(cls, lam: float, a: float = 3.7) -> "PenaltySpec":
        return cls(Family.SCAD, lam, a)

    @classmethod
    def mcp(cls, lam: float, a: float = 3.0) -> "PenaltySpec":
        return cls(Family.MCP, lam, a)

    def with_lam(self, lam: float) -> "PenaltySpec":
        return PenaltySpec(self.family, lam, self.a)

    @property
    def max_sigma2(self) -> float:
        """Upper bound (exclusive) on sigma2 for which the closed form is the global minimizer."""
        if self.family is Family.SCAD:
            return self.a - 1.0
        if self.family is Family.MCP:
            return self.a
        return math.inf


class ProxResult(NamedTuple):
    theta_hat: float
    s_value: float
    v_value: float


class Branch(enum.IntEnum):
    """Region of the estimator a nonzero coefficient lives in."""

    ZERO = 0
    SOFT = 1
    TRANSIENT = 2
    OLS = 3


def transient_curvature(spec: PenaltySpec) -> float:
    """Magnitude of the (negative) second derivative of J on the transient branch."""
    if spec.family is Family.SCAD:
        return 1.0 / (spec.a - 1.0)
    if spec.family is Family.MCP:
        return 1.0 / spec.a
    return 0.0


def _sgn(x):
    return np.sign(x)


def penalty_value(x, spec: PenaltySpec):
    """J(x; lambda, a). Accepts scalars or arrays; even and continuous in x."""
    ax = np.abs(np.asarray(x, dtype=float))
    lam = spec.lam
    if spec.family is Family.L1:
        out = lam * ax
    elif spec.family is Family.SCAD:
        a = spec.a
        out = np.where(
            ax <= lam,
            lam * ax,
            np.where(
                ax <= a * lam,
                -(ax**2 - 2 * a * lam * ax + lam**2) / (2 * (a - 1)),
                (a + 1) * lam**2 / 2,
            ),
        )
    else:
        a = spec.a
        out = np.where(ax <= a * lam, lam * ax - ax**2 / (2 * a), a * lam**2 / 2)
    return float(out) if out.ndim == 0 else out


def penalty_subgradient(x, spec: PenaltySpec):
    """dJ/dx at nonzero x (scalar or array)."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa == 0):
        raise ZeroArgument("subgradient of the penalty is set-valued at x = 0")
    ax = np.abs(xa)
    s = _sgn(xa)
    lam = spec.lam
    if spec.family is Family.L1:
        out = lam * s
    elif spec.family is Family.SCAD:
        a = spec.a
        out = np.where(
            ax <= lam,
            lam * s,
            np.where(ax <= a * lam, -(xa - a * lam * s) / (a - 1), 0.0),
        )
    else:
        a = spec.a
        out = np.where(ax <= a * lam, lam * s - xa / a, 0.0)
    return float(out) if out.ndim == 0 else out


def _check_sigma2(sigma2, spec: PenaltySpec):
    s2 = np.asarray(sigma2)
    if np.any(~(s2 > 0)):
        raise ValueError("sigma2 must be positive")
    if np.any(s2 >= spec.max_sigma2):
        raise CurvatureError(
            f"sigma2={float(np.max(s2)):.6g} >= {spec.max_sigma2:.6g}: one-body objective "
            f"is nonconvex on the transient branch of {spec.family.value}"
        )


def prox(w: float, sigma2: float, spec: PenaltySpec) -> ProxResult:
    """Closed-form solution of the scalar one-body problem.

    Parameters
    ----------
    w : float
        Training sample of the one-body problem.
    sigma2 : float
        Variance of the quadratic term; must stay below ``spec.max_sigma2``.
    spec : PenaltySpec

    Returns
    -------
    ProxResult
        ``theta_hat`` together with the branch's ``S`` and ``V`` evaluated at
        ``w / sigma2``. Branch ties go to the branch listed first in the case
        tables (soft threshold before transient before OLS).
    """
    _check_sigma2(sigma2, spec)
    wt = w / sigma2
    aw = abs(wt)
    sg = math.copysign(1.0, wt) if wt != 0 else 0.0
    lam = spec.lam
    inv = 1.0 / sigma2
    if spec.family is Family.L1:
        if aw > lam:
            s, v = wt - sg * lam, sigma2
        else:
            s, v = 0.0, 0.0
    elif spec.family is Family.SCAD:
        a = spec.a
        if lam < aw <= lam * (1 + inv):
            s, v = wt - sg * lam, sigma2
        elif lam * (1 + inv) < aw <= a * lam * inv:
            s, v = wt - sg * a * lam / (a - 1), 1.0 / (inv - 1.0 / (a - 1))
        elif aw > a * lam * inv and aw > lam:
            s, v = wt, sigma2
        else:
            s, v = 0.0, 0.0
    else:
        a = spec.a
        if lam < aw <= a * lam * inv:
            s, v = wt - sg * lam, 1.0 / (inv - 1.0 / a)
        elif aw > a * lam * inv and aw > lam:
            s, v = wt, sigma2
        else:
            s, v = 0.0, 0.0
    return ProxResult(v * s, s, v)


def prox_array(w, sigma2, spec: PenaltySpec):
    """Vectorized ``prox`` returning ``(theta_hat, v)`` arrays.

    Same branch logic as :func:`prox`; used inside AMP sweeps.
    """
    w = np.asarray(w, dtype=float)
    sigma2 = np.broadcast_to(np.asarray(sigma2, dtype=float), w.shape)
    _check_sigma2(sigma2, spec)
    wt = w / sigma2
    aw = np.abs(wt)
    sg = _sgn(wt)
    lam = spec.lam
    inv = 1.0 / sigma2
    active = aw > lam
    if spec.family is Family.L1:
        s = np.where(active, wt - sg * lam, 0.0)
        v = np.where(active, sigma2, 0.0)
        return v * s, v
    a = spec.a
    upper = aw > a * lam * inv
    if spec.family is Family.SCAD:
        soft = active & (aw <= lam * (1 + inv))
        trans = active & ~soft & ~upper
        v_t = 1.0 / (inv - 1.0 / (a - 1))
        s = np.where(soft, wt - sg * lam, np.where(trans, wt - sg * a * lam / (a - 1), wt))
        v = np.where(soft, sigma2, np.where(trans, v_t, sigma2))
    else:
        trans = active & ~upper
        v_t = 1.0 / (inv - 1.0 / a)
        s = np.where(trans, wt - sg * lam, wt)
        v = np.where(trans, v_t, sigma2)
    s = np.where(active, s, 0.0)
    v = np.where(active, v, 0.0)
    return v * s, v


def branch_of(x, spec: PenaltySpec) -> np.ndarray:
    """Classify coefficient values into :class:`Branch` codes by their magnitude."""
    ax = np.abs(np.asarray(x, dtype=float))
    lam = spec.lam
    out = np.full(ax.shape, Branch.ZERO, dtype=int)
    nz = ax > 0
    if spec.family is Family.L1:
        out[nz] = Branch.SOFT
    elif spec.family is Family.SCAD:
        out[nz & (ax <= lam)] = Branch.SOFT
        out[(ax > lam) & (ax <= spec.a * lam)] = Branch.TRANSIENT
        out[ax > spec.a * lam] = Branch.OLS
    else:
        out[nz & (ax <= spec.a * lam)] = Branch.TRANSIENT
        out[ax > spec.a * lam] = Branch.OLS
    return out
