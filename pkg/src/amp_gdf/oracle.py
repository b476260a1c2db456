"""Brute-force reference solvers used to validate the closed forms and AMP.

None of these routines share code paths with AMP beyond the penalty definition:
the scalar prox is checked against a dense grid search, AMP against cyclic
coordinate descent, and the AMP degrees of freedom against a finite-difference
divergence of the fit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .amp import AmpOptions, RegressionInstance, amp_solve, objective
from .errors import AmpGdfError, NoConvergence, SolverFailure
from .penalty import Branch, Family, PenaltySpec, penalty_value, prox

__all__ = [
    "OracleOptions",
    "grid_prox",
    "coordinate_descent_solve",
    "stein_divergence_fd",
]

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class OracleOptions:
    grid_halfwidth: float = 20.0
    grid_points: int = 4001
    refine_iters: int = 120
    fd_step: float | None = None
    cd_tol: float = 1e-12
    cd_max_sweeps: int = 100000

    def __post_init__(self):
        if self.grid_points < 1001:
            raise ValueError("grid_points must be >= 1001")
        if self.fd_step is not None and not self.fd_step > 0:
            raise ValueError("fd_step must be positive")


def _branch(t: float, spec: PenaltySpec) -> Branch:
    at = abs(t)
    if at == 0:
        return Branch.ZERO
    if spec.family is Family.L1:
        return Branch.SOFT
    if spec.family is Family.SCAD and at <= spec.lam:
        return Branch.SOFT
    return Branch.TRANSIENT if at <= spec.a * spec.lam else Branch.OLS


def _penalty_diff(t: float, t0: float, spec: PenaltySpec) -> float:
    """J(t) - J(t0) without cancellation when both points share a branch."""
    b, b0 = _branch(t, spec), _branch(t0, spec)
    same_sign = (t > 0) == (t0 > 0) and t != 0 and t0 != 0
    if b != b0 or not same_sign:
        return penalty_value(t, spec) - penalty_value(t0, spec)
    d_abs = math.copysign(1.0, t) * (t - t0)
    lam = spec.lam
    if b == Branch.SOFT:
        return lam * d_abs
    if b == Branch.OLS:
        return 0.0
    a = spec.a
    if spec.family is Family.SCAD:
        return -((t - t0) * (t + t0) - 2 * a * lam * d_abs) / (2 * (a - 1))
    return lam * d_abs - (t - t0) * (t + t0) / (2 * a)


def grid_prox(w: float, sigma2: float, spec: PenaltySpec, opts: OracleOptions | None = None) -> float:
    """Global minimizer of (theta - w)^2 / (2 sigma2) + J(theta) by exhaustive search.

    A dense symmetric grid (containing 0) locates the best cell; golden-section
    search on the objective measured relative to the best grid point refines it.
    """
    opts = opts or OracleOptions()
    half = max(opts.grid_halfwidth, 2.0 * abs(w) + 1.0)
    n = opts.grid_points | 1
    grid = np.linspace(-half, half, n)
    f = (grid - w) ** 2 / (2.0 * sigma2) + penalty_value(grid, spec)
    k = int(np.argmin(f))
    t0 = float(grid[k])

    def rel(t):
        return (t - t0) * (t + t0 - 2.0 * w) / (2.0 * sigma2) + _penalty_diff(t, t0, spec)

    lo = float(grid[max(k - 1, 0)])
    hi = float(grid[min(k + 1, n - 1)])
    c = hi - _INVPHI * (hi - lo)
    d = lo + _INVPHI * (hi - lo)
    fc, fd = rel(c), rel(d)
    for _ in range(opts.refine_iters):
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - _INVPHI * (hi - lo)
            fc = rel(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _INVPHI * (hi - lo)
            fd = rel(d)
        if hi - lo < 1e-14 * max(1.0, abs(t0)):
            break
    best = 0.5 * (lo + hi)
    # the kink at the origin is an isolated candidate golden section can only approach
    if lo <= 0.0 <= hi and rel(0.0) <= rel(best):
        best = 0.0
    return best


def coordinate_descent_solve(
    inst: RegressionInstance,
    spec: PenaltySpec,
    opts: OracleOptions | None = None,
    x0=None,
    history: list | None = None,
) -> np.ndarray:
    """Cyclic coordinate descent, each step an exact scalar prox.

    For coordinate ``i`` the one-body problem has ``sigma2 = 1 / ||A_i||^2`` and
    ``w = x_i + A_i^T r / ||A_i||^2`` (``r`` the current residual). Convex l1
    reaches the global minimum; SCAD/MCP stop at a coordinatewise stationary point.
    If ``history`` is a list, the objective after every sweep is appended.
    """
    opts = opts or OracleOptions()
    A = inst.A
    cols = np.ascontiguousarray(A.T)
    norms2 = np.einsum("ij,ij->i", cols, cols)
    x = np.zeros(inst.N) if x0 is None else np.array(x0, dtype=float)
    r = inst.y - A @ x
    for _ in range(opts.cd_max_sweeps):
        delta = 0.0
        for i in range(inst.N):
            ci = cols[i]
            z = x[i] + float(ci @ r) / norms2[i]
            new = prox(z, 1.0 / norms2[i], spec).theta_hat
            step = new - x[i]
            if step != 0.0:
                r -= step * ci
                x[i] = new
                delta = max(delta, abs(step))
        if history is not None:
            history.append(objective(inst, x, spec))
        if delta <= opts.cd_tol:
            return x
    raise NoConvergence(f"coordinate descent did not converge in {opts.cd_max_sweeps} sweeps", last=x)


def _fit(inst, spec, solver, warm, amp_opts, oracle_opts):
    """Return (y_hat, warm-start handle) or raise SolverFailure."""
    try:
        if solver == "amp":
            rep = amp_solve(inst, spec, amp_opts, init=warm)
            if not rep.converged:
                raise SolverFailure("AMP did not converge")
            return rep.y_hat, rep.state
        x = coordinate_descent_solve(inst, spec, oracle_opts, x0=warm)
        return inst.A @ x, x
    except SolverFailure:
        raise
    except AmpGdfError as exc:
        raise SolverFailure(str(exc)) from exc


def stein_divergence_fd(
    inst: RegressionInstance,
    spec: PenaltySpec,
    solver: str = "amp",
    fd_step: float | None = None,
    *,
    amp_opts: AmpOptions | None = None,
    oracle_opts: OracleOptions | None = None,
) -> float:
    """(1/M) sum_mu d y_hat_mu / d y_mu by central differences with warm starts.

    ``solver`` is ``"amp"`` or ``"cd"``. A coordinate whose perturbed solve fails
    falls back to a one-sided difference; if both sides fail, the whole
    estimate fails with :class:`SolverFailure`.
    """
    if solver not in ("amp", "cd"):
        raise ValueError("solver must be 'amp' or 'cd'")
    amp_opts = amp_opts or AmpOptions(tol=1e-11, max_sweeps=20000)
    oracle_opts = oracle_opts or OracleOptions()
    if fd_step is None:
        fd_step = oracle_opts.fd_step
    if fd_step is None:
        sd = float(np.std(inst.y))
        fd_step = 1e-4 * (sd if sd > 0 else 1.0)
    base_fit, warm = _fit(inst, spec, solver, None, amp_opts, oracle_opts)
    total = 0.0
    for mu in range(inst.M):
        sides = {}
        for sgn in (1.0, -1.0):
            y = inst.y.copy()
            y[mu] += sgn * fd_step
            try:
                fit, _ = _fit(inst.with_y(y), spec, solver, warm, amp_opts, oracle_opts)
                sides[sgn] = fit[mu]
            except SolverFailure:
                pass
        if len(sides) == 2:
            total += (sides[1.0] - sides[-1.0]) / (2.0 * fd_step)
        elif 1.0 in sides:
            total += (sides[1.0] - base_fit[mu]) / fd_step
        elif -1.0 in sides:
            total += (base_fit[mu] - sides[-1.0]) / fd_step
        else:
            raise SolverFailure(f"both perturbed solves failed at row {mu}")
    return float(total / inst.M)
