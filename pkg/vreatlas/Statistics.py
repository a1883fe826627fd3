import logging
from typing import Callable, Dict, List, Literal, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy import stats
from scipy.special import expit

from vreatlas.Errors import CollinearityError, DataError, InvalidInputError, SeparationError

MAX_ITERATIONS = 100
LOGLIK_TOLERANCE = 1e-8
GRADIENT_TOLERANCE = 1e-8
# |beta| beyond this during Newton steps is taken as (quasi-)separation
SEPARATION_BOUND = 30.0

DISTANCE_FIELDS = ["dist_np_m", "dist_airport_m", "dist_spa_m", "dist_sac_m", "dist_ramsar_m"]
LOG_DISTANCE_COLUMNS = ["log_" + name[:-2] for name in DISTANCE_FIELDS]

COVARIATE_LABELS = {
    "const": "Constant",
    "scenicness": "Scenicness value",
    "n_turbines": "Number of turbines",
    "capacity_MW": "Capacity (MW)",
    "log_dist_np": "log distance to the closest National Park",
    "log_dist_airport": "log distance to the closest airport",
    "log_dist_spa": "log distance to the closest Special Protection Area",
    "log_dist_sac": "log distance to the closest Special Area of Conservation",
    "log_dist_ramsar": "log distance to the closest Ramsar area",
}

class PlanningRecord(BaseModel):
    """One planning application with its outcome and site covariates."""
    model_config = ConfigDict(frozen=True)

    technology: Literal["wind", "pv_ground"]
    year: int
    outcome: int
    scenicness: float = Field(ge=1, le=10)
    votes: int = Field(default=0, ge=0)
    n_turbines: Optional[int] = Field(default=None, ge=0)
    capacity_MW: float = Field(gt=0)
    dist_np_m: float = Field(gt=0)
    dist_airport_m: float = Field(gt=0)
    dist_spa_m: float = Field(gt=0)
    dist_sac_m: float = Field(gt=0)
    dist_ramsar_m: float = Field(gt=0)

    @field_validator("outcome")
    @classmethod
    def _binary(cls, v: int) -> int:
        if v not in (0, 1):
            raise ValueError(f"outcome must be 0 (rejected) or 1 (granted), got {v}")
        return v


class ModelSpec(BaseModel):
    """
    Covariate blocks of a planning-outcome model.

    level 1: scenicness only; 2: plus year fixed effects; 3: plus project
    size; 4: plus logged distances to protected sites and airports.
    """
    model_config = ConfigDict(frozen=True)

    level: int = Field(default=4, ge=1, le=4)
    technology: Literal["wind", "pv_ground"] = "wind"
    year_effects: Optional[bool] = None
    min_votes: int = Field(default=0, ge=0)

    @property
    def with_years(self) -> bool:
        return self.level >= 2 if self.year_effects is None else self.year_effects


class FitResult(BaseModel):
    link: Literal["logit", "probit"]
    columns: List[str]
    coefficients: List[float]
    std_errors: List[float]
    odds_ratios: List[float]
    or_std_errors: List[float]
    p_values: List[float]
    log_likelihood: float
    null_log_likelihood: float
    aic: float
    pseudo_r2: float
    n_obs: int
    iterations: int
    converged: bool
    year_effects: bool = False

    def coefficient(self, column: str) -> float:
        return self.coefficients[self.columns.index(column)]

    def std_error(self, column: str) -> float:
        return self.std_errors[self.columns.index(column)]

    def table(self) -> pd.DataFrame:
        return pd.DataFrame({
            "column": self.columns,
            "coef": self.coefficients,
            "se": self.std_errors,
            "odds_ratio": self.odds_ratios,
            "or_se": self.or_std_errors,
            "p_value": self.p_values,
        })


class OlsResult(BaseModel):
    columns: List[str]
    coefficients: List[float]
    std_errors: List[float]
    p_values: List[float]
    r_squared: float
    n_obs: int
    residuals: List[float]

    def coefficient(self, column: str) -> float:
        return self.coefficients[self.columns.index(column)]


def model_columns(level: int, technology: str) -> List[str]:
    """Covariates (besides the constant and year dummies) of model `level`."""
    columns = ["scenicness"]
    if level >= 3:
        columns += (["n_turbines"] if technology == "wind" else []) + ["capacity_MW"]
    if level >= 4:
        columns += LOG_DISTANCE_COLUMNS
    return columns

def records_frame(records: Sequence[PlanningRecord]) -> pd.DataFrame:
    """Planning records as a table with logged distances."""
    df = pd.DataFrame([r.model_dump() for r in records])
    if df.empty:
        return df
    for field, column in zip(DISTANCE_FIELDS, LOG_DISTANCE_COLUMNS):
        df[column] = np.log(df[field].astype(float))
    return df

def design_matrix(records: Sequence[PlanningRecord], spec: ModelSpec) -> Tuple[pd.DataFrame, np.ndarray]:
    """
    Builds the design matrix of one model: constant, covariates, year dummies.

    Records of the other technology and records with votes <= min_votes
    (when min_votes > 0) are dropped. The earliest year is the base level.

    Returns:
    - tuple: (X with a "const" column first, outcome vector).
    """
    df = records_frame([r for r in records if r.technology == spec.technology])
    if spec.min_votes and not df.empty:
        df = df[df["votes"] > spec.min_votes]
    if df.empty:
        raise InvalidInputError(f"no {spec.technology} records to fit")
    columns = model_columns(spec.level, spec.technology)
    if df[columns].isna().any().any():
        missing = [c for c in columns if df[c].isna().any()]
        raise DataError(f"covariate(s) {missing} missing for some {spec.technology} records")
    X = pd.DataFrame({"const": np.ones(len(df))}, index=df.index)
    X[columns] = df[columns].astype(float)
    if spec.with_years:
        years = sorted(df["year"].unique())
        for year in years[1:]:
            X[f"year_{year}"] = (df["year"] == year).astype(float)
    return X.reset_index(drop=True), df["outcome"].to_numpy(dtype=float)

def check_rank(X: pd.DataFrame) -> None:
    """Raises CollinearityError naming the first column that adds no rank."""
    values = X.to_numpy(dtype=float)
    rank = 0
    for j, column in enumerate(X.columns):
        new_rank = np.linalg.matrix_rank(values[:, : j + 1])
        if new_rank == rank:
            raise CollinearityError(f"column '{column}' is collinear with the preceding columns", column=column)
        rank = new_rank

def logit_loglike(beta: np.ndarray, X: np.ndarray, y: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray]:
    """Log-likelihood, gradient and Hessian of the logit model."""
    eta = X @ beta
    ll = float(np.sum(-y * np.logaddexp(0.0, -eta) - (1.0 - y) * np.logaddexp(0.0, eta)))
    p = expit(eta)
    grad = X.T @ (y - p)
    hess = -(X * (p * (1.0 - p))[:, None]).T @ X
    return ll, grad, hess

def probit_loglike(beta: np.ndarray, X: np.ndarray, y: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray]:
    """Log-likelihood, gradient and Hessian of the probit model."""
    eta = X @ beta
    q = 2.0 * y - 1.0
    log_cdf = stats.norm.logcdf(q * eta)
    ll = float(np.sum(log_cdf))
    lam = q * np.exp(stats.norm.logpdf(q * eta) - log_cdf)
    grad = X.T @ lam
    hess = -(X * (lam * (lam + eta))[:, None]).T @ X
    return ll, grad, hess

LINKS: Dict[str, Callable] = {"logit": logit_loglike, "probit": probit_loglike}

def _newton(loglike: Callable, X: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, float, np.ndarray, int, bool]:
    beta = np.zeros(X.shape[1])
    ll, grad, hess = loglike(beta, X, y)
    for iteration in range(1, MAX_ITERATIONS + 1):
        step = np.linalg.solve(-hess, grad)
        new_beta = beta + step
        new_ll, new_grad, new_hess = loglike(new_beta, X, y)
        # step halving keeps the likelihood from falling far from the optimum
        halvings = 0
        while new_ll < ll - 1e-12 and halvings < 30:
            step /= 2.0
            new_beta = beta + step
            new_ll, new_grad, new_hess = loglike(new_beta, X, y)
            halvings += 1
        if np.max(np.abs(new_beta)) > SEPARATION_BOUND:
            raise SeparationError(
                f"coefficients diverge (|beta| > {SEPARATION_BOUND:g}) at iteration {iteration}; outcomes are (quasi-)separated"
            )
        # only a full Newton step may stop on the likelihood change
        converged = np.max(np.abs(new_grad)) < GRADIENT_TOLERANCE or (halvings == 0 and abs(new_ll - ll) < LOGLIK_TOLERANCE)
        beta, ll, grad, hess = new_beta, new_ll, new_grad, new_hess
        if converged:
            return beta, ll, hess, iteration, True
    logging.warning(f"Newton iterations stopped after {MAX_ITERATIONS} steps without convergence")
    return beta, ll, hess, MAX_ITERATIONS, False

def _fit_binary(records: Sequence[PlanningRecord], spec: ModelSpec, link: str) -> FitResult:
    X_frame, y = design_matrix(records, spec)
    if y.min() == y.max():
        raise SeparationError(f"all {len(y)} outcomes are {int(y[0])}; the likelihood has no maximum")
    check_rank(X_frame)
    X = X_frame.to_numpy(dtype=float)
    beta, ll, hess, iterations, converged = _newton(LINKS[link], X, y)

    se = np.sqrt(np.diag(np.linalg.inv(-hess)))
    odds = np.exp(beta)
    p_values = 2.0 * stats.norm.sf(np.abs(beta / se))
    share = y.mean()
    ll_null = float(len(y) * (share * np.log(share) + (1.0 - share) * np.log(1.0 - share)))
    k = X.shape[1]
    logging.info(f"{link} model {spec.level} ({spec.technology}): logLik {ll:.4f} after {iterations} iteration(s)")
    return FitResult(
        link=link,
        columns=list(X_frame.columns),
        coefficients=beta.tolist(),
        std_errors=se.tolist(),
        odds_ratios=odds.tolist(),
        or_std_errors=(odds * se).tolist(),
        p_values=p_values.tolist(),
        log_likelihood=ll,
        null_log_likelihood=ll_null,
        aic=2.0 * k - 2.0 * ll,
        pseudo_r2=1.0 - ll / ll_null,
        n_obs=len(y),
        iterations=iterations,
        converged=converged,
        year_effects=spec.with_years,
    )

def fit_logit(records: Sequence[PlanningRecord], spec: ModelSpec = ModelSpec()) -> FitResult:
    """
    Maximum-likelihood logit of planning outcomes (granted = 1).

    Newton-Raphson with the observed information; standard errors come from
    its inverse at the optimum.

    Parameters:
    - records (list): PlanningRecord objects; other technologies are ignored.
    - spec (ModelSpec): Which covariate blocks to include.

    Returns:
    - FitResult: Coefficients, odds ratios, fit statistics.
    """
    return _fit_binary(records, spec, "logit")

def fit_probit(records: Sequence[PlanningRecord], spec: ModelSpec = ModelSpec()) -> FitResult:
    """Same as fit_logit with the normal link."""
    return _fit_binary(records, spec, "probit")

def fit_ols(y, X: pd.DataFrame, add_constant: bool = True) -> OlsResult:
    """
    Ordinary least squares by the normal equations.

    Parameters:
    - y (array): Response.
    - X (pd.DataFrame): Covariates; a "const" column is prepended when add_constant.

    Returns:
    - OlsResult: Coefficients with classical standard errors and R2.
    """
    y = np.asarray(y, dtype=float)
    X = X.astype(float).reset_index(drop=True)
    if add_constant:
        X.insert(0, "const", 1.0)
    n, k = X.shape
    if n <= k:
        raise InvalidInputError(f"OLS needs more rows than columns, got {n} x {k}")
    check_rank(X)
    values = X.to_numpy()
    xtx = values.T @ values
    beta = np.linalg.solve(xtx, values.T @ y)
    residuals = y - values @ beta
    rss = float(residuals @ residuals)
    centred = y - y.mean() if add_constant else y
    tss = float(centred @ centred)
    sigma2 = rss / (n - k)
    se = np.sqrt(np.diag(sigma2 * np.linalg.inv(xtx)))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(se > 0, beta / se, np.inf)
    return OlsResult(
        columns=list(X.columns),
        coefficients=beta.tolist(),
        std_errors=se.tolist(),
        p_values=(2.0 * stats.t.sf(np.abs(t), n - k)).tolist(),
        r_squared=1.0 - rss / tss if tss > 0 else 1.0,
        n_obs=n,
        residuals=residuals.tolist(),
    )

# Detailed land-use categories and the groups they are pooled into
LANDUSE_GROUPS: Dict[str, List[str]] = {
    "residential": ["residential"],
    "commercial": ["community_service", "industry_commerce", "defence"],
    "vacant_land": ["undeveloped", "vacant"],
    "other": ["unknown_developed", "minerals_landfill", "transport_utilities", "outdoor_recreation"],
    "agriculture_forest": ["agriculture", "forest_open_land_water", "residential_gardens"],
}
LANDUSE_CATEGORIES = [c for members in LANDUSE_GROUPS.values() for c in members]

def aggregate_landuse(shares: Union[Mapping[str, float], pd.DataFrame]) -> pd.DataFrame:
    """
    Pools the 13 detailed land-use shares into five groups.

    Parameters:
    - shares (dict or pd.DataFrame): Percent share per detailed category; a
      frame holds one region per row. Missing categories count as 0.

    Returns:
    - pd.DataFrame: One column per group in LANDUSE_GROUPS order.
    """
    df = pd.DataFrame([shares]) if isinstance(shares, Mapping) else shares
    unknown = [c for c in df.columns if c not in LANDUSE_CATEGORIES]
    if unknown:
        raise DataError(f"unknown land-use categories {unknown}")
    values = df.reindex(columns=LANDUSE_CATEGORIES, fill_value=0.0).astype(float)
    if (values < 0).any().any():
        raise DataError("land-use shares must be >= 0")
    return pd.DataFrame(
        {group: values[members].sum(axis=1) for group, members in LANDUSE_GROUPS.items()},
        index=df.index,
    )

def describe_shares(df: pd.DataFrame) -> pd.DataFrame:
    """Mean, standard deviation (n - 1), min and max of every column."""
    return pd.DataFrame({
        "mean": df.mean(),
        "std": df.std(ddof=1),
        "min": df.min(),
        "max": df.max(),
    })

def fit_deviation(deviation, grouped: pd.DataFrame, base: str = "vacant_land") -> OlsResult:
    """Regresses the deviation ratio on grouped land-use shares, leaving `base` out."""
    if base not in grouped.columns:
        raise InvalidInputError(f"base category '{base}' is not a column")
    return fit_ols(deviation, grouped.drop(columns=[base]))

def stars(p: float) -> str:
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.10:
        return "*"
    return ""

def fit_report(results: Sequence[FitResult], labels: Optional[Sequence[str]] = None) -> str:
    """
    Side-by-side text table of fitted models: odds ratio, stars and (SE).

    Year dummies are summarised by a yes/no row.
    """
    labels = list(labels) if labels else [f"Model {i + 1}" for i in range(len(results))]
    ordered: List[str] = []
    for result in results:
        for column in result.columns:
            if column != "const" and not column.startswith("year_") and column not in ordered:
                ordered.append(column)
    ordered.append("const")

    rows = []
    for column in ordered:
        cells = []
        for result in results:
            if column in result.columns:
                j = result.columns.index(column)
                cells.append(f"{result.odds_ratios[j]:.3f}{stars(result.p_values[j])} ({result.or_std_errors[j]:.3f})")
            else:
                cells.append("")
        rows.append([COVARIATE_LABELS.get(column, column)] + cells)
    rows.append(["Year fixed effect"] + ["yes" if r.year_effects else "no" for r in results])
    rows.append(["Number of observations"] + [f"{r.n_obs:,}" for r in results])
    rows.append(["AIC"] + [f"{r.aic:.2f}" for r in results])
    rows.append(["Log likelihood"] + [f"{r.log_likelihood:.2f}" for r in results])
    rows.append(["McFadden pseudo R2"] + [f"{r.pseudo_r2:.3f}" for r in results])

    header = [""] + labels
    widths = [max(len(str(row[i])) for row in rows + [header]) for i in range(len(header))]
    lines = ["  ".join(str(cell).ljust(w) for cell, w in zip(row, widths)).rstrip() for row in [header] + rows]
    lines.append("Odds ratios with standard errors in parentheses. *** p<0.01, ** p<0.05, * p<0.10.")
    return "\n".join(lines) + "\n"
