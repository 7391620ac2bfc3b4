"""
Regression models: OLS on log outcomes, NB2 negative binomial counts and
logistic trend indicators, with standard errors and fit statistics.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import linalg
from scipy.special import digamma, expit, gammaln, polygamma

from .config import MAX_ITERATIONS, REGRESSION_COVARIATES, THETA_BOUNDARY
from .exceptions import (
    ColumnMismatchError, ConvergenceError, DesignError, RankDeficientError, ZeroVarianceError,
)
from .stats import normal_quantile, normal_two_sided_p, t_quantile, t_two_sided_p

logger = logging.getLogger("vibrancy.glm")

INTERCEPT = "const"
SCORE_TOLERANCE = 1e-8
LOGLIK_TOLERANCE = 1e-10
# relative log-likelihood drop accepted as rounding noise near the optimum
LOGLIK_SLACK = 1e-12
# |linear predictor| beyond this means fitted probabilities of 0 or 1
SEPARATION_ETA = 25.0


class Family(str, Enum):
    OLS = "ols"
    NEGATIVE_BINOMIAL = "negbin"
    LOGISTIC = "logistic"


class Transform(str, Enum):
    IDENTITY = "identity"
    LOG = "log"


@dataclass(frozen=True)
class ModelSpec:
    """One regression: outcome (with transform), family and ordered predictors; the intercept is implicit."""
    name: str
    outcome: str
    family: Family
    predictors: Tuple[str, ...]
    transform: Transform = Transform.IDENTITY

    def __post_init__(self):
        if len(set(self.predictors)) != len(self.predictors):
            raise DesignError(f"Model {self.name}: predictor names must be distinct")
        if self.outcome in self.predictors:
            raise DesignError(f"Model {self.name}: outcome '{self.outcome}' is also a predictor")
        if INTERCEPT in self.predictors:
            raise DesignError(f"Model {self.name}: '{INTERCEPT}' is reserved for the intercept")

    @property
    def terms(self) -> List[str]:
        return list(self.predictors) + [INTERCEPT]


@dataclass
class FitResult:
    family: Family
    terms: List[str]
    coefficients: np.ndarray
    std_errors: np.ndarray
    test_statistics: np.ndarray
    p_values: np.ndarray
    vcov: np.ndarray
    n_obs: int
    df_resid: int
    statistic: str = "t"
    r_squared: Optional[float] = None
    adj_r_squared: Optional[float] = None
    log_likelihood: Optional[float] = None
    aic: Optional[float] = None
    rmse: Optional[float] = None
    theta: Optional[float] = None
    theta_se: Optional[float] = None
    theta_at_boundary: bool = False
    converged: bool = True
    iterations: int = 0

    @property
    def params(self) -> pd.Series:
        return pd.Series(self.coefficients, index=self.terms)

    def coefficient(self, term: str) -> float:
        return float(self.coefficients[self.terms.index(term)])

    def conf_int(self, level: float = 0.95) -> pd.DataFrame:
        """Wald intervals: t quantiles for OLS, normal quantiles otherwise."""
        q = 0.5 + level / 2.0
        mult = t_quantile(q, self.df_resid) if self.statistic == "t" else normal_quantile(q)
        return pd.DataFrame(
            {"lower": self.coefficients - mult * self.std_errors,
             "upper": self.coefficients + mult * self.std_errors},
            index=self.terms,
        )

    def summary_frame(self, level: float = 0.95) -> pd.DataFrame:
        ci = self.conf_int(level)
        return pd.DataFrame(
            {
                "estimate": self.coefficients,
                "std_error": self.std_errors,
                "statistic": self.test_statistics,
                "p_value": self.p_values,
                "ci_lower": ci["lower"].to_numpy(),
                "ci_upper": ci["upper"].to_numpy(),
                "stars": [significance_stars(p) for p in self.p_values],
            },
            index=pd.Index(self.terms, name="term"),
        )


@dataclass
class Design:
    """A design matrix with its outcome; unpacks as (X, y, row_ids)."""
    X: np.ndarray
    y: np.ndarray
    row_ids: List[str]
    columns: List[str]
    dropped: List[str] = field(default_factory=list)

    def __iter__(self) -> Iterator:
        return iter((self.X, self.y, self.row_ids))


def significance_stars(p: Optional[float]) -> str:
    """Conventional markers: + p<0.1, * p<0.05, ** p<0.01, *** p<0.001."""
    if p is None or not p == p:
        return ""
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    if p < 0.1:
        return "+"
    return ""


def add_derived_columns(table: pd.DataFrame) -> pd.DataFrame:
    """
    Add the transformed covariates used as regressors.

    log_income = ln(mean_income), log_population = ln(population) and
    area_1e6 = total_area * 1e-6; non-positive inputs give NaN.
    """
    frame = table.copy()
    if "mean_income" in frame and "log_income" not in frame:
        income = frame["mean_income"].astype(float)
        frame["log_income"] = np.log(income.where(income > 0))
    if "population" in frame and "log_population" not in frame:
        population = frame["population"].astype(float)
        frame["log_population"] = np.log(population.where(population > 0))
    if "total_area" in frame and "area_1e6" not in frame:
        frame["area_1e6"] = frame["total_area"].astype(float) * 1e-6
    return frame


def build_design(table: pd.DataFrame, spec: ModelSpec) -> Design:
    """
    Build the design matrix for a model.

    Rows with an undefined outcome or predictor are dropped and their ids
    reported. The intercept column is appended last.

    Args:
        table: frame indexed by blockgroup_id holding outcome and predictor columns
        spec: model specification

    Returns:
        Design: X (n x p+1), y, kept row ids, column names, dropped row ids
    """
    frame = add_derived_columns(table)
    needed = [spec.outcome] + list(spec.predictors)
    missing = [c for c in needed if c not in frame.columns]
    if missing:
        raise DesignError(f"Model {spec.name}: missing columns {', '.join(missing)}")

    data = frame[needed].astype(float)
    if spec.transform == Transform.LOG:
        outcome = data[spec.outcome]
        data[spec.outcome] = np.log(outcome.where(outcome > 0))
    complete = data.notna().all(axis=1) & np.isfinite(data).all(axis=1)
    dropped = [str(i) for i in data.index[~complete]]
    data = data[complete]
    if dropped:
        logger.debug(f"Model {spec.name}: dropped {len(dropped)} rows with undefined values")

    if data.empty:
        raise DesignError(f"Model {spec.name}: no rows with complete data")
    for column in spec.predictors:
        values = data[column].to_numpy()
        if np.ptp(values) == 0:
            raise ZeroVarianceError(column)

    X = np.column_stack([data[list(spec.predictors)].to_numpy(), np.ones(len(data))]) \
        if spec.predictors else np.ones((len(data), 1))
    return Design(
        X=X, y=data[spec.outcome].to_numpy(), row_ids=[str(i) for i in data.index],
        columns=spec.terms, dropped=dropped,
    )


def _terms(columns: Optional[Sequence[str]], p: int) -> List[str]:
    if columns is None:
        return [f"x{j}" for j in range(p)]
    if len(columns) != p:
        raise ColumnMismatchError(f"{len(columns)} column names for a {p}-column design")
    return list(columns)


def _has_intercept(X: np.ndarray) -> bool:
    return bool(np.any(np.all(X == 1.0, axis=0)))


def fit_ols(X: np.ndarray, y: np.ndarray, columns: Optional[Sequence[str]] = None) -> FitResult:
    """
    Ordinary least squares via QR decomposition with column pivoting.

    Args:
        X: design matrix (n x p) including the intercept column
        y: outcome
        columns: term names for X's columns

    Returns:
        FitResult: t statistics on n-p degrees of freedom, R², RMSE and Gaussian AIC (None for an exact fit)
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    terms = _terms(columns, p)
    if n <= p:
        raise DesignError(f"OLS needs more observations than parameters (n={n}, p={p})")

    Q, R, piv = linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = max(n, p) * np.finfo(float).eps * diag[0]
    rank = int(np.sum(diag > tol))
    if rank < p:
        raise RankDeficientError([terms[j] for j in sorted(piv[rank:])])

    beta = np.empty(p)
    beta[piv] = linalg.solve_triangular(R, Q.T @ y)
    resid = y - X @ beta
    rss = float(resid @ resid)
    df_resid = n - p
    sigma2 = rss / df_resid
    R_inv = linalg.solve_triangular(R, np.eye(p))
    unscaled = np.empty((p, p))
    unscaled[np.ix_(piv, piv)] = R_inv @ R_inv.T
    vcov = sigma2 * unscaled
    vcov = (vcov + vcov.T) / 2.0
    se = np.sqrt(np.diag(vcov))

    with np.errstate(divide="ignore", invalid="ignore"):
        t = beta / se
    t = np.where((se == 0) & (beta == 0), 0.0, t)
    p_values = np.array([t_two_sided_p(float(v), df_resid) for v in t])

    if _has_intercept(X):
        tss = float(np.sum((y - y.mean()) ** 2))
        dof_total = n - 1
    else:
        tss = float(y @ y)
        dof_total = n
    r2 = 1.0 - rss / tss if tss > 0 else float("nan")
    adj_r2 = 1.0 - (1.0 - r2) * dof_total / df_resid if tss > 0 else float("nan")
    # an exact fit has no finite Gaussian likelihood
    loglik = aic = None
    if rss > np.finfo(float).eps * float(y @ y):
        loglik = -0.5 * n * (math.log(2 * math.pi) + math.log(rss / n) + 1.0)
        aic = 2.0 * (p + 1) - 2.0 * loglik

    return FitResult(
        family=Family.OLS, terms=terms, coefficients=beta, std_errors=se, test_statistics=t,
        p_values=p_values, vcov=vcov, n_obs=n, df_resid=df_resid, statistic="t",
        r_squared=r2, adj_r_squared=adj_r2, log_likelihood=loglik,
        aic=aic, rmse=math.sqrt(rss / n), iterations=1,
    )


# ---------------------------------------------------------------------------
# Logistic regression
# ---------------------------------------------------------------------------

def logistic_loglik(beta: np.ndarray, X: np.ndarray, y: np.ndarray) -> float:
    eta = X @ beta
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def logistic_score(beta: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    return X.T @ (y - expit(X @ beta))


def _cho_solve(matrix: np.ndarray, rhs: np.ndarray, label: str, beta: np.ndarray, iteration: int) -> np.ndarray:
    try:
        return linalg.cho_solve(linalg.cho_factor(matrix), rhs)
    except linalg.LinAlgError:
        raise ConvergenceError(f"{label}: information matrix is singular", beta, iteration)


def _inverse(matrix: np.ndarray) -> np.ndarray:
    inv = linalg.cho_solve(linalg.cho_factor(matrix), np.eye(len(matrix)))
    return (inv + inv.T) / 2.0


def fit_logistic(
    X: np.ndarray,
    y: np.ndarray,
    columns: Optional[Sequence[str]] = None,
    max_iter: int = MAX_ITERATIONS,
    tol: float = SCORE_TOLERANCE,
) -> FitResult:
    """
    Logistic regression by Newton-Raphson (IRLS) with step halving.

    Converges when max |score| < tol or the relative log-likelihood change
    drops below 1e-10. Perfect or quasi-perfect separation raises
    ConvergenceError carrying the last iterate.

    Args:
        X: design matrix including the intercept column
        y: 0/1 outcome
        columns: term names for X's columns
        max_iter: Newton iteration limit
        tol: score tolerance

    Returns:
        FitResult: z statistics from the inverse Fisher information, log-likelihood and AIC
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    terms = _terms(columns, p)
    if not np.all((y == 0) | (y == 1)):
        raise DesignError("Logistic outcome must be 0/1")
    if y.min() == y.max():
        raise DesignError("Logistic outcome has no variation")

    beta = np.zeros(p)
    loglik = logistic_loglik(beta, X, y)
    converged = False
    iteration = 0
    for iteration in range(1, max_iter + 1):
        score = logistic_score(beta, X, y)
        if np.max(np.abs(score)) < tol:
            converged = True
            break
        mu = expit(X @ beta)
        info = X.T @ (X * (mu * (1.0 - mu))[:, None])
        step = _cho_solve(info, score, "Logistic fit", beta, iteration)

        candidate = beta + step
        new_loglik = logistic_loglik(candidate, X, y)
        halvings = 0
        while new_loglik < loglik and halvings < 30:
            step /= 2.0
            candidate = beta + step
            new_loglik = logistic_loglik(candidate, X, y)
            halvings += 1
        change = abs(new_loglik - loglik) / max(abs(loglik), 1e-300)
        beta, loglik = candidate, new_loglik
        if np.max(np.abs(X @ beta)) > SEPARATION_ETA:
            raise ConvergenceError("Logistic fit diverges: outcome is separated by the predictors", beta, iteration)
        if change < LOGLIK_TOLERANCE:
            converged = True
            break

    if not converged:
        raise ConvergenceError(f"Logistic fit did not converge in {max_iter} iterations", beta, iteration)
    logger.debug(f"Logistic fit converged in {iteration} iterations")

    mu = expit(X @ beta)
    info = X.T @ (X * (mu * (1.0 - mu))[:, None])
    try:
        vcov = _inverse(info)
    except linalg.LinAlgError:
        raise ConvergenceError("Logistic fit: information matrix is singular at the optimum", beta, iteration)
    se = np.sqrt(np.diag(vcov))
    z = beta / se
    return FitResult(
        family=Family.LOGISTIC, terms=terms, coefficients=beta, std_errors=se, test_statistics=z,
        p_values=np.array([normal_two_sided_p(float(v)) for v in z]), vcov=vcov,
        n_obs=n, df_resid=n - p, statistic="z", log_likelihood=loglik,
        aic=2.0 * p - 2.0 * loglik, converged=True, iterations=iteration,
    )


# ---------------------------------------------------------------------------
# Negative binomial (NB2: variance mu + mu^2 / theta)
# ---------------------------------------------------------------------------

def negbin_loglik(beta: np.ndarray, theta: float, X: np.ndarray, y: np.ndarray) -> float:
    mu = np.exp(X @ beta)
    return float(np.sum(
        gammaln(y + theta) - gammaln(theta) - gammaln(y + 1.0)
        + theta * (np.log(theta) - np.log(theta + mu))
        + y * (np.log(mu) - np.log(theta + mu))
    ))


def negbin_score(beta: np.ndarray, theta: float, X: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, float]:
    """Gradient of negbin_loglik with respect to beta and theta."""
    mu = np.exp(X @ beta)
    score_beta = X.T @ ((y - mu) / (1.0 + mu / theta))
    score_theta = float(np.sum(
        digamma(y + theta) - digamma(theta) + np.log(theta) + 1.0
        - np.log(theta + mu) - (y + theta) / (theta + mu)
    ))
    return score_beta, score_theta


def _theta_hessian(theta: float, mu: np.ndarray, y: np.ndarray) -> float:
    return float(np.sum(
        polygamma(1, y + theta) - polygamma(1, theta) + 1.0 / theta
        - 2.0 / (theta + mu) + (y + theta) / (theta + mu) ** 2
    ))


def _moment_theta(y: np.ndarray, mu: np.ndarray) -> float:
    excess = float(np.sum((y - mu) ** 2 - mu))
    if excess <= 0:
        return min(THETA_BOUNDARY, 1e4)
    return float(np.clip(np.sum(mu ** 2) / excess, 1e-3, THETA_BOUNDARY))


def _not_worse(new_loglik: float, loglik: float) -> bool:
    return new_loglik >= loglik - LOGLIK_SLACK * max(1.0, abs(loglik))


def _negbin_beta_step(
    beta: np.ndarray, theta: float, X: np.ndarray, y: np.ndarray, loglik: float, iteration: int
) -> Tuple[np.ndarray, float]:
    """One Fisher-scoring update of beta at fixed theta, halving until the likelihood does not drop."""
    mu = np.exp(X @ beta)
    weights = mu / (1.0 + mu / theta)
    score = X.T @ ((y - mu) / (1.0 + mu / theta))
    step = _cho_solve(X.T @ (X * weights[:, None]), score, "Negative binomial fit", beta, iteration)
    candidate = beta + step
    new_loglik = negbin_loglik(candidate, theta, X, y)
    halvings = 0
    while not _not_worse(new_loglik, loglik) and halvings < 30:
        step /= 2.0
        candidate = beta + step
        new_loglik = negbin_loglik(candidate, theta, X, y)
        halvings += 1
    if not _not_worse(new_loglik, loglik):
        return beta, loglik
    return candidate, new_loglik


def _negbin_theta_step(
    beta: np.ndarray, theta: float, X: np.ndarray, y: np.ndarray, loglik: float
) -> Tuple[float, float]:
    """One Newton update of u = ln(theta) at fixed beta, capped at the boundary."""
    mu = np.exp(X @ beta)
    _, score_theta = negbin_score(beta, theta, X, y)
    grad_u = theta * score_theta
    hess_u = theta * theta * _theta_hessian(theta, mu, y) + grad_u
    if hess_u < 0:
        step = float(np.clip(-grad_u / hess_u, -5.0, 5.0))
    else:
        step = math.copysign(1.0, grad_u)
    u = math.log(theta)
    max_u = math.log(THETA_BOUNDARY)
    for _ in range(30):
        candidate = math.exp(min(u + step, max_u))
        new_loglik = negbin_loglik(beta, candidate, X, y)
        if _not_worse(new_loglik, loglik):
            return candidate, new_loglik
        step /= 2.0
    return theta, loglik


def fit_negbin(
    X: np.ndarray,
    y: np.ndarray,
    columns: Optional[Sequence[str]] = None,
    max_iter: int = MAX_ITERATIONS,
    tol: float = SCORE_TOLERANCE,
) -> FitResult:
    """
    NB2 regression with log link by alternating optimization.

    Each round takes a Fisher-scoring step for beta at fixed theta and a Newton
    step in ln(theta) at fixed beta. Converges when the joint score falls
    below tol. A theta reaching 1e6 is the Poisson limit: the fit is reported
    converged with theta_at_boundary set.

    Args:
        X: design matrix including the intercept column
        y: non-negative integer counts
        columns: term names for X's columns

    Returns:
        FitResult: z statistics, log-likelihood, AIC (k = p + 1), theta and
        the log-scale RMSE over rows with y > 0
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    terms = _terms(columns, p)
    if np.any(y < 0) or np.any(y != np.floor(y)):
        raise DesignError("Negative binomial outcome must be non-negative integers")
    if y.min() == y.max():
        raise DesignError("Negative binomial outcome has no variation")

    # weighted least squares start on the working response of mu0 = (y + mean) / 2
    mu0 = (y + y.mean()) / 2.0
    beta, *_ = np.linalg.lstsq(X * np.sqrt(mu0)[:, None], np.log(mu0) * np.sqrt(mu0) + (y - mu0) / np.sqrt(mu0), rcond=None)
    theta = _moment_theta(y, np.exp(X @ beta))
    loglik = negbin_loglik(beta, theta, X, y)

    converged = False
    at_boundary = False
    iteration = 0
    for iteration in range(1, max_iter + 1):
        beta, loglik = _negbin_beta_step(beta, theta, X, y, loglik, iteration)
        if not at_boundary:
            theta, loglik = _negbin_theta_step(beta, theta, X, y, loglik)
            at_boundary = theta >= THETA_BOUNDARY * (1 - 1e-12)

        score_beta, score_theta = negbin_score(beta, theta, X, y)
        joint = float(np.max(np.abs(score_beta)))
        if not at_boundary:
            joint = max(joint, abs(theta * score_theta))
        if joint < tol:
            converged = True
            break
        if not np.all(np.isfinite(beta)):
            break

    if not converged:
        raise ConvergenceError(f"Negative binomial fit did not converge in {max_iter} iterations", beta, iteration)
    if at_boundary:
        logger.info(f"Negative binomial theta reached the boundary {THETA_BOUNDARY:g}; data are not overdispersed")
    logger.debug(f"Negative binomial fit converged in {iteration} rounds, theta={theta:.6g}")

    eta = X @ beta
    mu = np.exp(eta)
    weights = mu / (1.0 + mu / theta)
    try:
        vcov = _inverse(X.T @ (X * weights[:, None]))
    except linalg.LinAlgError:
        raise ConvergenceError("Negative binomial fit: information matrix is singular", beta, iteration)
    se = np.sqrt(np.diag(vcov))
    z = beta / se
    hess_theta = _theta_hessian(theta, mu, y)
    theta_se = math.sqrt(-1.0 / hess_theta) if not at_boundary and hess_theta < 0 else None
    positive = y > 0
    rmse = math.sqrt(float(np.mean((np.log(y[positive]) - eta[positive]) ** 2))) if positive.any() else None

    return FitResult(
        family=Family.NEGATIVE_BINOMIAL, terms=terms, coefficients=beta, std_errors=se,
        test_statistics=z, p_values=np.array([normal_two_sided_p(float(v)) for v in z]), vcov=vcov,
        n_obs=n, df_resid=n - p, statistic="z", log_likelihood=loglik,
        aic=2.0 * (p + 1) - 2.0 * loglik, rmse=rmse, theta=theta, theta_se=theta_se,
        theta_at_boundary=at_boundary, converged=True, iterations=iteration,
    )


def predict(fit: FitResult, X: Union[np.ndarray, pd.DataFrame]) -> np.ndarray:
    """
    Predictions on the response scale: Xb for OLS, inverse logit for logistic, exp for NB.

    A DataFrame is aligned to the fitted terms by name; an array must have one
    column per term.
    """
    if isinstance(X, pd.DataFrame):
        missing = [t for t in fit.terms if t not in X.columns]
        if missing:
            raise ColumnMismatchError(f"Prediction frame lacks columns {', '.join(missing)}")
        X = X[fit.terms].to_numpy(dtype=float)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != len(fit.terms):
        raise ColumnMismatchError(f"Expected {len(fit.terms)} columns, got {X.shape[1]}")
    eta = X @ fit.coefficients
    if fit.family == Family.LOGISTIC:
        return expit(eta)
    if fit.family == Family.NEGATIVE_BINOMIAL:
        return np.exp(eta)
    return eta


_FITTERS = {
    Family.OLS: fit_ols,
    Family.LOGISTIC: fit_logistic,
    Family.NEGATIVE_BINOMIAL: fit_negbin,
}


def fit_model(table: pd.DataFrame, spec: ModelSpec) -> Tuple[FitResult, Design]:
    """Build the design for spec and fit it with the family's fitter."""
    design = build_design(table, spec)
    fit = _FITTERS[spec.family](design.X, design.y, design.columns)
    return fit, design


# ---------------------------------------------------------------------------
# Model catalog
# ---------------------------------------------------------------------------

CRIME_OUTCOMES = ("crime_total", "crime_violent", "crime_nonviolent", "crime_vice")
VIBRANCY_PREDICTORS = ("n_events", "spontaneous_proportion")
TREND_DOMAINS = {"n_events": "permits", "spontaneous_proportion": "spontaneous_proportion"}


def regression_catalog() -> List[ModelSpec]:
    """
    Every regression the pipeline fits, in report order.

    For each crime outcome: OLS on the log count and NB2 on the count, each
    with the number of permits and with the spontaneous proportion as the
    vibrancy predictor. Then, per vibrancy measure, four logistic models for
    significant positive/negative trends in the vibrancy measure (crime trend
    indicators as predictors) and in total crime (vibrancy trend indicators as
    predictors).
    """
    specs: List[ModelSpec] = []
    for outcome in CRIME_OUTCOMES:
        for family, transform, prefix in (
            (Family.OLS, Transform.LOG, "ols_log"),
            (Family.NEGATIVE_BINOMIAL, Transform.IDENTITY, "negbin"),
        ):
            for measure in VIBRANCY_PREDICTORS:
                specs.append(ModelSpec(
                    name=f"{prefix}_{outcome}__{measure}", outcome=outcome, family=family,
                    predictors=(measure,) + REGRESSION_COVARIATES, transform=transform,
                ))

    for measure in VIBRANCY_PREDICTORS:
        domain = TREND_DOMAINS[measure]
        crime_flags = ("crime_total_positive", "crime_total_negative")
        vibrancy_flags = (f"{domain}_positive", f"{domain}_negative")
        for direction in ("positive", "negative"):
            specs.append(ModelSpec(
                name=f"logit_{domain}_{direction}", outcome=f"{domain}_{direction}",
                family=Family.LOGISTIC, predictors=REGRESSION_COVARIATES + crime_flags,
            ))
        for direction in ("positive", "negative"):
            specs.append(ModelSpec(
                name=f"logit_crime_total_{direction}__{domain}", outcome=f"crime_total_{direction}",
                family=Family.LOGISTIC, predictors=REGRESSION_COVARIATES + vibrancy_flags,
            ))
    return specs


def select_models(names: Union[str, Sequence[str]]) -> List[ModelSpec]:
    """Catalog entries by name; 'all' selects everything."""
    catalog = regression_catalog()
    if names == "all":
        return catalog
    by_name = {spec.name: spec for spec in catalog}
    unknown = [n for n in names if n not in by_name]
    if unknown:
        raise DesignError(f"Unknown regression models: {', '.join(unknown)}")
    return [by_name[n] for n in names]
