"""Training error, AIC and AMP-based GDF / prediction-error estimators."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .amp import FixedPointReport, RegressionInstance
from .errors import AmpGdfError, DimensionMismatch, NegativeVariance
from .penalty import PenaltySpec

__all__ = [
    "GdfReport",
    "training_error",
    "gdf_amp",
    "gdf_amp_homogeneous",
    "aic",
    "prediction_error_estimate",
    "count_support",
    "gdf_report",
]

SUPPORT_TOL = 1e-8


@dataclass
class GdfReport:
    epsilon_train: float
    df1: float
    df1_homogeneous: float
    aic: float
    epsilon_pre_1: float
    l0: int
    lam: float
    a: float | None = None
    df2: float | None = None
    epsilon_pre_2: float | None = None
    df2_error: str | None = None

    def as_dict(self) -> dict:
        return asdict(self)


def training_error(y, y_hat) -> float:
    """(1/M) ||y - y_hat||^2."""
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if y.shape != y_hat.shape or y.ndim != 1 or y.size == 0:
        raise DimensionMismatch(f"shapes {y.shape} and {y_hat.shape} differ")
    r = y - y_hat
    return float(r @ r) / y.size


def _check_V(V) -> np.ndarray:
    V = np.asarray(V, dtype=float)
    if np.any(V < 0):
        raise NegativeVariance("V must be nonnegative")
    return V


def gdf_amp(V) -> float:
    """(1/M) sum_mu V_mu / (1 + V_mu)."""
    V = _check_V(V)
    return float(np.mean(V / (1.0 + V)))


def gdf_amp_homogeneous(V) -> float:
    """Vbar / (1 + Vbar) with Vbar the mean of V; valid when V is row-homogeneous."""
    Vbar = float(np.mean(_check_V(V)))
    return Vbar / (1.0 + Vbar)


def aic(epsilon_train: float, sigma_y2: float, l0: int, M: int) -> float:
    """AIC rescaled by sigma_y^2 / M: epsilon_train + 2 sigma_y^2 l0 / M."""
    if M < 1 or l0 < 0:
        raise ValueError("need M >= 1 and l0 >= 0")
    return epsilon_train + 2.0 * sigma_y2 * l0 / M


def prediction_error_estimate(epsilon_train: float, sigma_y2: float, df: float) -> float:
    """C_p-type estimate epsilon_train + 2 sigma_y^2 df."""
    return epsilon_train + 2.0 * sigma_y2 * df


def count_support(a, support_tol: float = SUPPORT_TOL) -> int:
    return int(np.count_nonzero(np.abs(a) > support_tol))


def gdf_report(
    inst: RegressionInstance,
    fp: FixedPointReport,
    spec: PenaltySpec,
    *,
    correct: bool = True,
    support_tol: float = SUPPORT_TOL,
) -> GdfReport:
    """Evaluate every estimator at an AMP fixed point.

    The corrected estimator needs the support-restricted solve; when that fails
    (singular system, unstable curvature) ``df2`` stays ``None`` and the reason
    lands in ``df2_error``.
    """
    from .correction import corrected_estimate

    V = (inst.A * inst.A) @ fp.state.v
    eps = training_error(inst.y, fp.y_hat)
    l0 = count_support(fp.state.a, support_tol)
    df1 = gdf_amp(V)
    rep = GdfReport(
        epsilon_train=eps,
        df1=df1,
        df1_homogeneous=gdf_amp_homogeneous(V),
        aic=aic(eps, inst.sigma_y2, l0, inst.M),
        epsilon_pre_1=prediction_error_estimate(eps, inst.sigma_y2, df1),
        l0=l0,
        lam=spec.lam,
        a=spec.a,
    )
    if correct:
        try:
            rep.df2 = corrected_estimate(inst, fp.state.a, spec, support_tol).df2
            rep.epsilon_pre_2 = prediction_error_estimate(eps, inst.sigma_y2, rep.df2)
        except AmpGdfError as exc:
            rep.df2_error = type(exc).__name__
    return rep
