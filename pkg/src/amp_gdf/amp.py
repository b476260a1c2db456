"""AMP fixed-point iteration for penalized linear regression (zero-temperature limit)."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import CurvatureError, DimensionMismatch, NumericalDivergence
from .penalty import PenaltySpec, penalty_value, prox_array

__all__ = [
    "RegressionInstance",
    "AmpState",
    "AmpOptions",
    "FixedPointReport",
    "init_state",
    "amp_sweep",
    "amp_solve",
    "objective",
]

OVERFLOW_GUARD = 1e12


@dataclass(frozen=True)
class RegressionInstance:
    """Response ``y`` (M,), predictors ``A`` (M, N) and known response variance."""

    y: np.ndarray
    A: np.ndarray
    sigma_y2: float = 1.0

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        A = np.asarray(self.A, dtype=float)
        if A.ndim != 2 or y.ndim != 1:
            raise DimensionMismatch("A must be 2-D and y 1-D")
        if A.shape[0] != y.shape[0]:
            raise DimensionMismatch(f"A has {A.shape[0]} rows but y has length {y.shape[0]}")
        if A.shape[0] < 1 or A.shape[1] < 1:
            raise DimensionMismatch("need M >= 1 and N >= 1")
        if np.any(np.all(A == 0, axis=0)):
            raise ValueError("A has an all-zero column")
        if not self.sigma_y2 > 0:
            raise ValueError("sigma_y2 must be positive")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "A", A)

    @property
    def M(self) -> int:
        return self.A.shape[0]

    @property
    def N(self) -> int:
        return self.A.shape[1]

    def with_y(self, y) -> "RegressionInstance":
        return replace(self, y=np.asarray(y, dtype=float))


@dataclass
class AmpState:
    a: np.ndarray
    v: np.ndarray
    omega: np.ndarray
    V: np.ndarray
    R: np.ndarray
    Sigma2: np.ndarray
    iter: int = 0

    def copy(self) -> "AmpState":
        return AmpState(
            self.a.copy(), self.v.copy(), self.omega.copy(), self.V.copy(),
            self.R.copy(), self.Sigma2.copy(), self.iter,
        )


@dataclass
class AmpOptions:
    tol: float = 1e-8
    max_sweeps: int = 2000
    damping: float = 0.3
    # initial rescaled variance; 0 keeps the first effective variance at 1/||A_i||^2
    init_v: float = 0.0

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if not 0.0 <= self.damping < 1.0:
            raise ValueError("damping must lie in [0, 1)")


@dataclass
class FixedPointReport:
    state: AmpState
    converged: bool
    residual: float
    sweeps_used: int
    y_hat: np.ndarray = field(repr=False)


def init_state(inst: RegressionInstance, init_v: float = 0.0) -> AmpState:
    M, N = inst.A.shape
    return AmpState(
        a=np.zeros(N),
        v=np.full(N, float(init_v)),
        omega=inst.y.copy(),
        V=np.ones(M),
        R=np.zeros(N),
        Sigma2=np.ones(N),
    )


def objective(inst: RegressionInstance, x, spec: PenaltySpec) -> float:
    """0.5 ||y - A x||^2 + sum_i J(x_i)."""
    r = inst.y - inst.A @ x
    return 0.5 * float(r @ r) + float(np.sum(penalty_value(x, spec)))


def amp_sweep(
    state: AmpState,
    inst: RegressionInstance,
    spec: PenaltySpec,
    damping: float = 0.3,
    *,
    A2: np.ndarray | None = None,
) -> AmpState:
    """One synchronous AMP update; returns a new state.

    ``A2`` (elementwise square of ``A``) may be passed to avoid recomputing it.
    """
    A, y = inst.A, inst.y
    if state.a.shape != (inst.N,) or state.omega.shape != (inst.M,):
        raise DimensionMismatch("state does not match instance dimensions")
    if A2 is None:
        A2 = A * A
    # previous sweep's g_out, built from the omega and V stored in the state
    g_prev = (y - state.omega) / (1.0 + state.V)
    V = A2 @ state.v
    inv1V = 1.0 / (1.0 + V)
    Sigma2 = 1.0 / (A2.T @ inv1V)
    omega = A @ state.a - V * g_prev
    R = state.a + (A.T @ ((y - omega) * inv1V)) * Sigma2
    if not (np.all(np.isfinite(R)) and np.all(np.isfinite(Sigma2))):
        raise NumericalDivergence("non-finite AMP field")
    try:
        a_new, v_new = prox_array(R, Sigma2, spec)
    except CurvatureError as exc:
        raise NumericalDivergence(f"AMP left the convex one-body regime: {exc}") from exc
    a = damping * state.a + (1.0 - damping) * a_new
    v = damping * state.v + (1.0 - damping) * v_new
    if np.max(V, initial=0.0) > OVERFLOW_GUARD or np.max(np.abs(a), initial=0.0) > OVERFLOW_GUARD:
        raise NumericalDivergence("AMP variables exceeded the overflow guard")
    return AmpState(a, v, omega, V, R, Sigma2, state.iter + 1)


def amp_solve(
    inst: RegressionInstance,
    spec: PenaltySpec,
    opts: AmpOptions | None = None,
    init: AmpState | None = None,
) -> FixedPointReport:
    """Iterate :func:`amp_sweep` until the max-norm change of ``a`` is at most ``tol``.

    Non-convergence is reported through ``converged=False``; divergence raises
    :class:`NumericalDivergence`.
    """
    opts = opts or AmpOptions()
    state = init.copy() if init is not None else init_state(inst, opts.init_v)
    A2 = inst.A * inst.A
    residual = np.inf
    converged = False
    sweeps = 0
    for sweeps in range(1, opts.max_sweeps + 1):
        new = amp_sweep(state, inst, spec, opts.damping, A2=A2)
        residual = float(np.max(np.abs(new.a - state.a), initial=0.0))
        state = new
        if residual <= opts.tol:
            converged = True
            break
    return FixedPointReport(state, converged, residual, sweeps, inst.A @ state.a)
