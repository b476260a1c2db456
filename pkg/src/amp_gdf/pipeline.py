"""Data generation, preprocessing, and lambda/a sweeps with model selection."""

from __future__ import annotations

import csv
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .amp import AmpOptions, AmpState, RegressionInstance, amp_solve
from .errors import AmpGdfError, DimensionMismatch, ParseError, RankWarning
from .estimators import GdfReport, gdf_report
from .penalty import Family, PenaltySpec

__all__ = [
    "SyntheticConfig",
    "PreparedData",
    "PlantedSource",
    "EnsembleSource",
    "FixedSource",
    "SweepRow",
    "SweepResult",
    "gen_gaussian_ensemble",
    "gen_planted",
    "gen_correlated_table",
    "equicorrelated_design",
    "read_dataset_csv",
    "write_dataset_csv",
    "prepare_real_data",
    "sweep",
    "parse_grid",
    "worker_count",
]

CRITERIA = ("pred_est_1", "pred_est_2", "aic", "true_pred")


@dataclass
class SyntheticConfig:
    N: int
    M: int
    sigma_y2: float = 1.0
    seed: int = 0
    x0: np.ndarray | None = None
    sigma: float | None = None

    def __post_init__(self):
        if self.N < 1 or self.M < 1:
            raise ValueError("N and M must be >= 1")
        if not self.sigma_y2 > 0:
            raise ValueError("sigma_y2 must be positive")


def gen_gaussian_ensemble(cfg: SyntheticConfig, rng: np.random.Generator | None = None) -> RegressionInstance:
    """A_{mu i} ~ N(0, 1/M); y ~ N(0, sigma_y2), or ``A x0 + sigma xi`` when planted."""
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    A = rng.normal(0.0, 1.0 / math.sqrt(cfg.M), size=(cfg.M, cfg.N))
    if cfg.x0 is not None:
        sigma = math.sqrt(cfg.sigma_y2) if cfg.sigma is None else cfg.sigma
        y = A @ np.asarray(cfg.x0, dtype=float) + sigma * rng.standard_normal(cfg.M)
        return RegressionInstance(y, A, sigma**2)
    y = rng.normal(0.0, math.sqrt(cfg.sigma_y2), size=cfg.M)
    return RegressionInstance(y, A, cfg.sigma_y2)


def gen_planted(A, x0, sigma: float, seed) -> np.ndarray:
    """y* = A x0 + sigma xi with xi i.i.d. standard normal."""
    A = np.asarray(A, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    if A.ndim != 2 or x0.shape != (A.shape[1],):
        raise DimensionMismatch(f"A {A.shape} incompatible with x0 {x0.shape}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return A @ x0 + sigma * rng.standard_normal(A.shape[0])


def equicorrelated_design(M: int, N: int, rho: float, rng: np.random.Generator) -> np.ndarray:
    """Gaussian design with pairwise column correlation ``rho`` and entry variance 1/M."""
    if not 0.0 <= rho < 1.0:
        raise ValueError("rho must lie in [0, 1)")
    Z = rng.standard_normal((M, N))
    common = rng.standard_normal((M, 1))
    return (math.sqrt(1.0 - rho) * Z + math.sqrt(rho) * common) / math.sqrt(M)


def gen_correlated_table(
    seed: int,
    M: int = 302,
    N: int = 70,
    max_corr: float = 0.685,
    n_factors: int = 6,
) -> tuple[np.ndarray, np.ndarray]:
    """Synthetic stand-in for a socio-economic regression table.

    Predictors follow a latent-factor model (so they are correlated, with the
    largest absolute pairwise correlation capped at ``max_corr``) and carry
    heavy-ish tails; the response depends strongly on a handful of predictors
    and weakly on many. Returns raw (unstandardized) ``X`` (M, N) and ``y`` (M,).
    """
    rng = np.random.default_rng(seed)
    loadings = rng.normal(0.0, 1.0, size=(n_factors, N)) * rng.uniform(0.2, 0.9, size=N)
    scale = 1.0
    for _ in range(60):
        F = rng.standard_normal((M, n_factors))
        E = rng.standard_t(df=6, size=(M, N))
        X = scale * F @ loadings + E
        C = np.corrcoef(X, rowvar=False)
        np.fill_diagonal(C, 0.0)
        if np.max(np.abs(C)) < max_corr:
            break
        scale *= 0.85
    else:  # pragma: no cover - the shrink loop always terminates well before 60 passes
        raise RuntimeError("could not satisfy the correlation cap")
    X = X * rng.lognormal(0.0, 1.0, size=N) + rng.normal(0.0, 5.0, size=N)
    Xs = (X - X.mean(axis=0)) / X.std(axis=0)
    beta = np.zeros(N)
    strong = rng.choice(N, size=8, replace=False)
    beta[strong] = rng.choice([-1.0, 1.0], size=8) * rng.uniform(0.15, 0.45, size=8)
    weak = np.setdiff1d(np.arange(N), strong)
    beta[weak] = rng.normal(0.0, 0.03, size=weak.size)
    y = Xs @ beta + rng.normal(0.0, 0.75, size=M)
    return X, 10.0 + 3.0 * y


def write_dataset_csv(path, X, y, names=None) -> None:
    X = np.asarray(X, dtype=float)
    names = list(names) if names is not None else [f"x{i + 1}" for i in range(X.shape[1])]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(names + ["y"])
        for row, target in zip(X, y):
            w.writerow([repr(float(v)) for v in row] + [repr(float(target))])


def read_dataset_csv(path) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Header row, a ``y`` column for the response, every other column a predictor.

    Rows with a missing or non-numeric field are dropped.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise ParseError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    if "y" not in header:
        raise ParseError(f"{path} has no 'y' column")
    if len(header) < 2:
        raise ParseError(f"{path} has no predictor columns")
    iy = header.index("y")
    names = [h for i, h in enumerate(header) if i != iy]
    X, y = [], []
    for row in rows[1:]:
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(f"{path}: row with {len(row)} fields, expected {len(header)}")
        try:
            vals = [float(v) for v in row]
        except ValueError:
            continue
        if not all(math.isfinite(v) for v in vals):
            continue
        y.append(vals[iy])
        X.append([v for i, v in enumerate(vals) if i != iy])
    if not y:
        raise ParseError(f"{path} has no complete rows")
    return np.array(X), np.array(y), names


@dataclass
class PreparedData:
    inst: RegressionInstance
    x0: np.ndarray
    sigma_hat2: float
    support: np.ndarray
    x_ols: np.ndarray
    standardized: np.ndarray = field(repr=False)
    names: list[str] = field(default_factory=list)


def _standardize(X):
    sd = X.std(axis=0)
    if np.any(sd == 0):
        raise ParseError("constant column cannot be standardized")
    return (X - X.mean(axis=0)) / sd


def prepare_real_data(source, K: int, scale: str = "norm") -> PreparedData:
    """Standardize, fit OLS, and build the planted model of the real-data protocol.

    ``source`` is a CSV path or an ``(X, y)`` pair. Predictors and response are
    standardized to zero mean and unit variance (``standardized`` keeps that
    matrix). With ``scale="norm"`` the design handed to AMP is divided by
    ``sqrt(M)`` so that every column has unit norm, matching the 1/M entry
    variance AMP assumes; ``scale="variance"`` keeps unit-variance columns.
    """
    if isinstance(source, (str, os.PathLike)):
        X, y, names = read_dataset_csv(source)
    else:
        X, y = (np.asarray(v, dtype=float) for v in source)
        names = [f"x{i + 1}" for i in range(X.shape[1])]
    M, N = X.shape
    if not 0 <= K <= N:
        raise ValueError(f"K must lie in [0, {N}]")
    Z = _standardize(X)
    ys = _standardize(y[:, None])[:, 0]
    if scale == "norm":
        A = Z / math.sqrt(M)
    elif scale == "variance":
        A = Z
    else:
        raise ValueError("scale must be 'norm' or 'variance'")
    if M < N or np.linalg.matrix_rank(A) < N:
        warnings.warn("design is rank deficient; OLS uses the pseudo-inverse", RankWarning, stacklevel=2)
    x_ols = np.linalg.pinv(A) @ ys
    support = np.sort(np.argsort(-np.abs(x_ols), kind="stable")[:K])
    x0 = np.zeros(N)
    x0[support] = x_ols[support]
    r = ys - A @ x0
    sigma_hat2 = float(r @ r) / M
    inst = RegressionInstance(ys, A, sigma_hat2)
    return PreparedData(inst, x0, sigma_hat2, support, x_ols, Z, names)


# --------------------------------------------------------------------- sources


@dataclass
class PlantedSource:
    """Fixed design; training and test responses drawn as ``A x0 + sigma xi``."""

    A: np.ndarray
    x0: np.ndarray
    sigma: float

    def draw(self, rng) -> RegressionInstance:
        return RegressionInstance(gen_planted(self.A, self.x0, self.sigma, rng), self.A, self.sigma**2)

    def test_mean(self, inst: RegressionInstance):
        return inst.A @ self.x0

    @property
    def M(self) -> int:
        return self.A.shape[0]

    @property
    def noise_sd(self) -> float:
        return self.sigma


@dataclass
class EnsembleSource:
    """Fresh i.i.d. Gaussian design and null response for every training sample."""

    cfg: SyntheticConfig

    def draw(self, rng) -> RegressionInstance:
        return gen_gaussian_ensemble(self.cfg, rng)

    def test_mean(self, inst: RegressionInstance):
        if self.cfg.x0 is not None:
            return inst.A @ np.asarray(self.cfg.x0, dtype=float)
        return np.zeros(inst.M)

    @property
    def M(self) -> int:
        return self.cfg.M

    @property
    def noise_sd(self) -> float:
        if self.cfg.x0 is not None and self.cfg.sigma is not None:
            return self.cfg.sigma
        return math.sqrt(self.cfg.sigma_y2)


@dataclass
class FixedSource:
    """A single observed instance; no generative model, so no Monte-Carlo prediction error."""

    inst: RegressionInstance

    def draw(self, rng) -> RegressionInstance:
        return self.inst

    def test_mean(self, inst):
        return None

    @property
    def M(self) -> int:
        return self.inst.M

    @property
    def noise_sd(self) -> float:
        return math.sqrt(self.inst.sigma_y2)


# ---------------------------------------------------------------------- sweeps


@dataclass
class SweepRow:
    lam: float
    a: float | None
    epsilon_train: float = math.nan
    df1: float = math.nan
    df1h: float = math.nan
    df2: float = math.nan
    aic: float = math.nan
    pre_est1: float = math.nan
    pre_est2: float = math.nan
    pre_mc: float = math.nan
    l0: float = math.nan
    n_ok: int = 0
    n_fail: int = 0
    n_df2: int = 0
    status: str = "failed"


@dataclass
class SweepResult:
    rows: list[SweepRow]
    selected_by: dict
    config: dict = field(default_factory=dict)

    def row(self, lam: float, a: float | None = None) -> SweepRow:
        for r in self.rows:
            if math.isclose(r.lam, lam, abs_tol=1e-12) and (a is None or r.a == a):
                return r
        raise KeyError((lam, a))


_ROW_FIELDS = ("epsilon_train", "df1", "df1h", "df2", "aic", "pre_est1", "pre_est2", "pre_mc", "l0")
_CRITERION_FIELD = {"pred_est_1": "pre_est1", "pred_est_2": "pre_est2", "aic": "aic", "true_pred": "pre_mc"}


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("AMP_GDF_THREADS", "1")))
    except ValueError:
        return 1


def parse_grid(text: str) -> list[float]:
    """``start:step:stop`` (inclusive) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3 or parts[1] <= 0 or parts[2] < parts[0]:
            raise ValueError(f"bad grid {text!r}; expected start:step:stop with step > 0")
        start, step, stop = parts
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + k * step, 12) for k in range(n)]
    vals = [float(p) for p in text.split(",") if p.strip()]
    if not vals:
        raise ValueError("empty grid")
    return vals


def _test_moments(source, n_test: int, rng):
    if n_test <= 0:
        return None
    xi = rng.standard_normal((n_test, source.M))
    return xi.mean(axis=0), float(np.mean(np.sum(xi * xi, axis=1)))


def _mc_prediction_error(mean, y_hat, sd, moments) -> float:
    # sample average over test draws z_t = mean + sd xi_t of ||z_t - y_hat||^2 / M
    xi_bar, xi_sq = moments
    d = mean - y_hat
    return (float(d @ d) + 2.0 * sd * float(d @ xi_bar) + sd * sd * xi_sq) / d.size


def _run_sample(source, specs, train_seq, moments, amp_opts, correct, warm_start):
    """All lambdas (descending) for one training sample and one ``a``; returns list aligned with specs."""
    inst = source.draw(np.random.default_rng(train_seq))
    mean = source.test_mean(inst)
    out = []
    warm: AmpState | None = None
    for spec in specs:
        try:
            fp = amp_solve(inst, spec, amp_opts, init=warm if warm_start else None)
        except AmpGdfError:
            out.append(None)
            warm = None
            continue
        if not fp.converged:
            out.append(None)
            warm = None
            continue
        warm = fp.state
        rep = gdf_report(inst, fp, spec, correct=correct)
        pre_mc = math.nan
        if mean is not None and moments is not None:
            pre_mc = _mc_prediction_error(mean, fp.y_hat, source.noise_sd, moments)
        out.append((rep, pre_mc))
    return out


def _aggregate(lam, a, results) -> SweepRow:
    row = SweepRow(lam, a)
    oks = [r for r in results if r is not None]
    row.n_ok = len(oks)
    row.n_fail = len(results) - len(oks)
    if not oks:
        return row
    reps: list[GdfReport] = [r[0] for r in oks]
    row.epsilon_train = float(np.mean([r.epsilon_train for r in reps]))
    row.df1 = float(np.mean([r.df1 for r in reps]))
    row.df1h = float(np.mean([r.df1_homogeneous for r in reps]))
    row.aic = float(np.mean([r.aic for r in reps]))
    row.pre_est1 = float(np.mean([r.epsilon_pre_1 for r in reps]))
    row.l0 = float(np.mean([r.l0 for r in reps]))
    with2 = [r for r in reps if r.df2 is not None]
    row.n_df2 = len(with2)
    if with2:
        row.df2 = float(np.mean([r.df2 for r in with2]))
        row.pre_est2 = float(np.mean([r.epsilon_pre_2 for r in with2]))
    mc = [r[1] for r in oks if not math.isnan(r[1])]
    if mc:
        row.pre_mc = float(np.mean(mc))
    row.status = "ok" if row.n_fail == 0 else f"partial({row.n_ok}/{len(results)})"
    return row


def _select(rows: list[SweepRow]) -> dict:
    eligible = [r for r in rows if r.status == "ok"]
    selected = {}
    for crit in CRITERIA:
        attr = _CRITERION_FIELD[crit]
        cands = [r for r in eligible if not math.isnan(getattr(r, attr))]
        if crit == "pred_est_2":
            cands = [r for r in cands if r.n_df2 == r.n_ok]
        if cands:
            best = min(cands, key=lambda r: (getattr(r, attr), r.lam))
            selected[crit] = {"lambda": best.lam, "a": best.a}
    return selected


def sweep(
    source,
    family: Family | str,
    lambda_grid,
    a_grid=(None,),
    n_train: int = 1,
    n_test: int = 1000,
    *,
    seed: int = 0,
    amp_opts: AmpOptions | None = None,
    correct: bool = True,
    warm_start: bool = True,
    threads: int | None = None,
) -> SweepResult:
    """Run AMP over a (lambda, a) grid, average estimators over training draws, pick minimizers.

    Each training sample gets its own child seed and is reused across the whole
    grid; all grid points also share one set of test draws, so the curves are
    compared under common random numbers. Failed (diverged or non-converged)
    solves are counted per cell and never abort the sweep; only cells where
    every sample succeeded are eligible for selection.
    """
    family = Family(family)
    lambdas = sorted({float(l) for l in lambda_grid})
    if not lambdas:
        raise ValueError("lambda grid is empty")
    a_values = [None] if family is Family.L1 else [float(a) for a in a_grid if a is not None]
    if not a_values:
        raise ValueError("a grid is empty")
    if isinstance(source, FixedSource):
        n_train = 1
    amp_opts = amp_opts or AmpOptions()
    seq = np.random.SeedSequence(seed)
    children = seq.spawn(n_train + 1)
    moments = _test_moments(source, n_test, np.random.default_rng(children[-1]))
    desc = lambdas[::-1]

    jobs = []
    for a in a_values:
        specs = [PenaltySpec(family, lam, a) for lam in desc]
        for s in range(n_train):
            jobs.append((a, specs, children[s]))

    def work(job):
        a, specs, child = job
        return _run_sample(source, specs, child, moments, amp_opts, correct, warm_start)

    n_workers = threads if threads is not None else worker_count()
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            outputs = list(pool.map(work, jobs))
    else:
        outputs = [work(j) for j in jobs]

    rows = []
    for a in a_values:
        per_sample = [out for (ja, _, _), out in zip(jobs, outputs) if ja == a]
        for k, lam in enumerate(desc):
            rows.append(_aggregate(lam, a, [out[k] for out in per_sample]))
    rows.sort(key=lambda r: (r.a if r.a is not None else -1.0, r.lam))
    config = {
        "family": family.value,
        "lambdas": lambdas,
        "a_values": a_values,
        "n_train": n_train,
        "n_test": n_test,
        "seed": seed,
        "warm_start": warm_start,
        "amp": {"tol": amp_opts.tol, "max_sweeps": amp_opts.max_sweeps, "damping": amp_opts.damping},
    }
    return SweepResult(rows, _select(rows), config)


SWEEP_COLUMNS = (
    "lambda", "a", "epsilon_train", "df1", "df1h", "df2", "aic",
    "pre_est1", "pre_est2", "pre_mc", "l0", "status",
)


def write_sweep_csv(result: SweepResult, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_COLUMNS)
        for r in result.rows:
            vals = [r.lam, "" if r.a is None else r.a] + [getattr(r, f) for f in _ROW_FIELDS] + [r.status]
            w.writerow(["nan" if isinstance(v, float) and math.isnan(v) else v for v in vals])


def summary_dict(result: SweepResult) -> dict:
    return {"selected_by": result.selected_by, "config": result.config, "seed": result.config.get("seed")}


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
