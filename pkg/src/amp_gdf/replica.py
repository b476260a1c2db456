"""Replica-symmetric saddle point for the i.i.d. Gaussian ensemble.

Order parameters ``(Q, chi)`` and their conjugates ``(Q_hat, chi_hat)`` are
found by damped fixed-point iteration. ``chi`` uses the per-penalty erfc
closed forms. ``Q = E_z[x*(z)^2] / alpha`` is evaluated by adaptive
quadrature of the one-body solution, with ``x*`` the scalar prox at
``sigma2 = 1 / Q_hat`` and effective field ``sqrt(chi_hat) z``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import integrate
from scipy.special import erfc

from .errors import NoConvergence, UnstableRegion
from .penalty import Family, PenaltySpec, prox

__all__ = [
    "ReplicaInputs",
    "ReplicaOptions",
    "ReplicaFixedPoint",
    "replica_solve",
    "replica_gdf",
    "df_decomposition",
    "aic_gap",
    "second_moment",
]

DENOM_GUARD = 1e-6
_SQRT2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class ReplicaInputs:
    spec: PenaltySpec
    alpha: float
    sigma_y2: float = 1.0
    m_y: float = 0.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.sigma_y2 > 0:
            raise ValueError("sigma_y2 must be positive")


@dataclass(frozen=True)
class ReplicaOptions:
    tol: float = 1e-10
    max_iters: int = 20000
    damping: float = 0.5


@dataclass
class ReplicaFixedPoint:
    Q: float
    chi: float
    Q_hat: float
    chi_hat: float
    rho_hat: float
    gamma: float
    df: float
    converged: bool = True
    iters: int = 0


def _conjugates(Q, chi, inp: ReplicaInputs):
    Q_hat = 1.0 / (1.0 + chi)
    chi_hat = (Q + inp.sigma_y2 + inp.m_y**2) * Q_hat**2
    return Q_hat, chi_hat


def _transient_denominator(spec: PenaltySpec, Q_hat: float) -> float:
    if spec.family is Family.SCAD:
        return Q_hat * (spec.a - 1.0) - 1.0
    if spec.family is Family.MCP:
        return Q_hat * spec.a - 1.0
    return math.inf


def _rho_gamma(spec: PenaltySpec, alpha: float, Q_hat: float, chi_hat: float):
    s = math.sqrt(2.0 * chi_hat)
    lam = spec.lam
    rho = erfc(lam / s)
    if spec.family is Family.L1:
        return rho, 0.0
    upper = erfc(spec.a * lam * Q_hat / s)
    if spec.family is Family.SCAD:
        return rho, (erfc(lam * (Q_hat + 1.0) / s) - upper) / alpha
    return rho, (rho - upper) / alpha


def _chi_update(inp: ReplicaInputs, Q_hat: float, chi_hat: float) -> float:
    rho, gamma = _rho_gamma(inp.spec, inp.alpha, Q_hat, chi_hat)
    chi = rho / (inp.alpha * Q_hat)
    if inp.spec.family is not Family.L1:
        chi += gamma / (Q_hat * _transient_denominator(inp.spec, Q_hat))
    return chi


def second_moment(spec: PenaltySpec, Q_hat: float, chi_hat: float) -> float:
    """E_z[x*(z)^2] over z ~ N(0, 1) by adaptive quadrature.

    ``x*`` is piecewise linear in ``z`` with kinks at the branch boundaries of
    the effective field; the integral is split there and folded onto z > 0.
    """
    sigma2 = 1.0 / Q_hat
    root = math.sqrt(chi_hat)
    if root == 0.0:
        return 0.0
    lam = spec.lam
    # branch boundaries in the effective field w~ = sqrt(chi_hat) z
    fields = [lam]
    if spec.family is Family.SCAD:
        fields += [lam * (1.0 + Q_hat), spec.a * lam * Q_hat]
    elif spec.family is Family.MCP:
        fields += [spec.a * lam * Q_hat]
    cuts = sorted(f / root for f in fields)

    def integrand(z):
        x = prox(root * z * sigma2, sigma2, spec).theta_hat
        return x * x * math.exp(-0.5 * z * z) / _SQRT2PI

    total = 0.0
    edges = cuts + [math.inf]
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi <= lo:
            continue
        val, _ = integrate.quad(integrand, lo, hi, epsabs=1e-15, epsrel=1e-12, limit=200)
        total += val
    return 2.0 * total


def replica_solve(inp: ReplicaInputs, opts: ReplicaOptions | None = None) -> ReplicaFixedPoint:
    """Damped fixed-point iteration of the saddle-point equations.

    Raises
    ------
    UnstableRegion
        The transient-branch denominator ``Q_hat (a - 1) - 1`` (SCAD) or
        ``Q_hat a - 1`` (MCP) falls below the guard, or ``chi`` runs off.
    NoConvergence
        Budget exhausted; ``exc.last`` holds the final iterate.
    """
    opts = opts or ReplicaOptions()
    spec = inp.spec
    Q, chi = 0.0, 0.0
    d = opts.damping
    for it in range(1, opts.max_iters + 1):
        Q_hat, chi_hat = _conjugates(Q, chi, inp)
        if _transient_denominator(spec, Q_hat) < DENOM_GUARD:
            raise UnstableRegion(
                f"transient denominator vanished at lambda={spec.lam}", last=(Q, chi)
            )
        chi_new = _chi_update(inp, Q_hat, chi_hat)
        Q_new = second_moment(spec, Q_hat, chi_hat) / inp.alpha
        if not (math.isfinite(chi_new) and chi_new < 1e8):
            raise UnstableRegion(f"chi diverged at lambda={spec.lam}", last=(Q, chi))
        step = max(abs(Q_new - Q), abs(chi_new - chi))
        Q = d * Q + (1.0 - d) * Q_new
        chi = d * chi + (1.0 - d) * chi_new
        if step <= opts.tol:
            return _finish(Q, chi, inp, True, it)
    raise NoConvergence(
        f"replica iteration did not converge in {opts.max_iters} steps",
        last=_finish(Q, chi, inp, False, opts.max_iters),
    )


def _finish(Q, chi, inp, converged, iters) -> ReplicaFixedPoint:
    Q_hat, chi_hat = _conjugates(Q, chi, inp)
    rho, gamma = _rho_gamma(inp.spec, inp.alpha, Q_hat, chi_hat)
    return ReplicaFixedPoint(
        float(Q), float(chi), float(Q_hat), float(chi_hat), float(rho), float(gamma),
        float(chi / (1.0 + chi)), converged, iters,
    )


def replica_gdf(fp: ReplicaFixedPoint) -> float:
    return fp.chi / (1.0 + fp.chi)


def df_decomposition(fp: ReplicaFixedPoint, inp: ReplicaInputs) -> float:
    """rho_hat / alpha plus the transient contribution gamma / (Q_hat (a-1) - 1) or gamma / (Q_hat a - 1)."""
    base = fp.rho_hat / inp.alpha
    if inp.spec.family is Family.L1:
        return base
    return base + fp.gamma / _transient_denominator(inp.spec, fp.Q_hat)


def aic_gap(fp: ReplicaFixedPoint, spec: PenaltySpec, sigma_y2: float) -> float:
    """Transient-region excess gamma sigma_y^2 / (Q_hat (a-1) - 1) (SCAD) or / (Q_hat a - 1) (MCP).

    This equals ``sigma_y2 * (df - rho_hat / alpha)``; the C_p identity puts a
    factor 2 in front of it for the expected gap between prediction error and AIC.
    """
    if spec.family is Family.L1 or fp.gamma == 0.0:
        return 0.0
    return fp.gamma * sigma_y2 / _transient_denominator(spec, fp.Q_hat)
