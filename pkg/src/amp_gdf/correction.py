"""Correlation-aware correction of the rescaled variances on the AMP support.

After AMP converges, the problem is re-solved exactly on the support ``K`` with
the penalty linearized on the branch each coefficient occupies. The response of
``x_K`` to an infinitesimal field gives ``U = (A_K^T A_K - c Phi)^{-1}``, where
``c`` is the transient-branch curvature and ``Phi`` flags transient coefficients.
Its diagonal replaces the one-body variances when forming ``V`` and ``df``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .amp import RegressionInstance
from .errors import (
    EmptySupport,
    NegativeCorrectedVariance,
    ReclassificationLoop,
    SingularSystem,
)
from .penalty import Branch, Family, PenaltySpec, branch_of, transient_curvature

__all__ = [
    "SupportSystem",
    "CorrectionResult",
    "extract_support",
    "solve_support_system",
    "corrected_variances",
    "corrected_gdf",
    "corrected_estimate",
]

MAX_CONDITION = 1e12


@dataclass
class SupportSystem:
    K: np.ndarray
    A_K: np.ndarray
    x_K: np.ndarray
    psi: np.ndarray
    phi: np.ndarray
    U: np.ndarray
    passes: int = 1


@dataclass
class CorrectionResult:
    K: np.ndarray
    v_tilde: np.ndarray
    V_tilde: np.ndarray
    df2: float
    system: SupportSystem | None


def extract_support(a, support_tol: float = 1e-8) -> np.ndarray:
    """Ascending (0-based) indices with ``|a_i| > support_tol``."""
    if not support_tol > 0:
        raise ValueError("support_tol must be positive")
    return np.flatnonzero(np.abs(np.asarray(a, dtype=float)) > support_tol)


def _transient_offset(spec: PenaltySpec) -> float:
    # constant part of J' on the transient branch, multiplying sgn(x)
    if spec.family is Family.SCAD:
        return spec.a * spec.lam / (spec.a - 1.0)
    if spec.family is Family.MCP:
        return spec.lam
    return 0.0


def solve_support_system(
    inst: RegressionInstance,
    K,
    x_init,
    spec: PenaltySpec,
    *,
    max_reclassify: int = 20,
) -> SupportSystem:
    """Solve the stationarity condition restricted to ``K`` with branch-linearized J'.

    Branches and signs start from ``x_init``; if the solution lands on a
    different branch or flips a sign, the coefficients are re-classified from
    the solution and the system is solved again.
    """
    K = np.asarray(K, dtype=int)
    if K.size == 0:
        raise EmptySupport("support is empty")
    x_cur = np.asarray(x_init, dtype=float)
    if x_cur.shape != K.shape:
        raise ValueError("x_init must have one entry per support index")
    A_K = inst.A[:, K]
    if K.size > inst.M:
        raise SingularSystem(f"|K|={K.size} exceeds M={inst.M}")
    gram = A_K.T @ A_K
    Aty = A_K.T @ inst.y
    c = transient_curvature(spec)
    offset = _transient_offset(spec)
    for passes in range(1, max_reclassify + 1):
        branch = branch_of(x_cur, spec)
        sgn = np.sign(x_cur)
        psi = (branch == Branch.SOFT).astype(float)
        phi = (branch == Branch.TRANSIENT).astype(float)
        H = gram - c * np.diag(phi)
        evals, evecs = np.linalg.eigh(H)
        amin = np.min(np.abs(evals))
        if amin == 0 or np.max(np.abs(evals)) / amin > MAX_CONDITION:
            raise SingularSystem("penalized Gram matrix on the support is singular")
        rhs = Aty - spec.lam * psi * sgn - offset * phi * sgn
        x = evecs @ ((evecs.T @ rhs) / evals)
        consistent = np.array_equal(branch_of(x, spec), branch) and np.array_equal(np.sign(x), sgn)
        if consistent:
            U = (evecs / evals) @ evecs.T
            return SupportSystem(K, A_K, x, psi, phi, 0.5 * (U + U.T), passes)
        # exact zeros keep their previous sign so they stay on the support
        x_cur = np.where(x == 0, x_cur, x)
    raise ReclassificationLoop(f"branch assignment did not stabilize in {max_reclassify} passes")


def corrected_variances(sys: SupportSystem, spec: PenaltySpec | None = None) -> np.ndarray:
    """Corrected rescaled variances, the diagonal of ``U``."""
    v_tilde = np.diag(sys.U).copy()
    if np.any(v_tilde <= 0):
        raise NegativeCorrectedVariance("diag(U) has non-positive entries; restricted problem is unstable")
    return v_tilde


def corrected_gdf(A, K, v_tilde) -> float:
    """df2 = (1/M) sum_mu Vt_mu / (1 + Vt_mu), with Vt = (A_K ** 2) @ v_tilde."""
    A = np.asarray(A, dtype=float)
    K = np.asarray(K, dtype=int)
    if K.size == 0:
        return 0.0
    v_tilde = np.asarray(v_tilde, dtype=float)
    if np.any(v_tilde <= 0):
        raise NegativeCorrectedVariance("corrected variances must be positive")
    Vt = (A[:, K] ** 2) @ v_tilde
    return float(np.mean(Vt / (1.0 + Vt)))


def corrected_estimate(
    inst: RegressionInstance,
    a,
    spec: PenaltySpec,
    support_tol: float = 1e-8,
) -> CorrectionResult:
    """Support extraction, restricted solve, corrected variances and df2 in one call."""
    a = np.asarray(a, dtype=float)
    K = extract_support(a, support_tol)
    if K.size == 0:
        return CorrectionResult(K, np.zeros(0), np.zeros(inst.M), 0.0, None)
    sys = solve_support_system(inst, K, a[K], spec)
    v_tilde = corrected_variances(sys, spec)
    V_tilde = (sys.A_K**2) @ v_tilde
    return CorrectionResult(K, v_tilde, V_tilde, float(np.mean(V_tilde / (1.0 + V_tilde))), sys)
