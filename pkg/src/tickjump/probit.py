"""Probit model of next-period jump occurrence.

Newton maximum likelihood with step halving, run on internally
standardized columns for conditioning and mapped back to the original
scale afterwards.  Tail-stable log Phi and inverse-Mills evaluations keep
the likelihood finite at extreme indices.  Standard errors come from the
inverse observed information.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import special, stats

from .errors import NonConvergence, RankDeficientDesign

logger = logging.getLogger(__name__)

# Covariates entering the model, in reporting order (levels, untransformed).
DEFAULT_COVARIATES = ("med_spread", "order_flow", "whale_ratio", "med_price", "rv", "nv")

FIXED_EFFECTS = ((2, "fe_mid"), (3, "fe_late"))


@dataclass(frozen=True)
class ProbitFit:
    column_names: tuple[str, ...]
    coefficients: np.ndarray
    std_errors: np.ndarray
    p_values: np.ndarray
    covariance: np.ndarray
    log_likelihood: float
    log_likelihood_null: float
    n_obs: int
    converged: bool
    iterations: int
    loglik_path: tuple[float, ...]
    design_means: np.ndarray  # sample-mean design row (intercept included)
    column_stds: np.ndarray  # per-column sample SDs (0 for the intercept)

    @property
    def n_params(self) -> int:
        return len(self.coefficients)


@dataclass(frozen=True)
class FitDiagnostics:
    pseudo_r2: float
    adjusted_pseudo_r2: float
    lr_statistic: float
    lr_df: int
    lr_pvalue: float


def probit_loglik(beta, X, y) -> float:
    """Sum of y log Phi(x beta) + (1 - y) log Phi(-x beta)."""
    eta = np.asarray(X, dtype=float) @ np.asarray(beta, dtype=float)
    y = np.asarray(y, dtype=float)
    return float(y @ special.log_ndtr(eta) + (1.0 - y) @ special.log_ndtr(-eta))


def _mills(eta: np.ndarray) -> np.ndarray:
    # phi/Phi via log-space difference, stable in the far left tail
    return np.exp(stats.norm.logpdf(eta) - special.log_ndtr(eta))


def probit_score(beta, X, y) -> np.ndarray:
    """Analytic gradient of probit_loglik in beta."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    eta = X @ np.asarray(beta, dtype=float)
    w = y * _mills(eta) - (1.0 - y) * _mills(-eta)
    return X.T @ w


def _observed_information(beta, X, y) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    eta = X @ np.asarray(beta, dtype=float)
    lam_p = _mills(eta)
    lam_m = _mills(-eta)
    # both contributions are positive: the probit log-likelihood is concave
    h = y * lam_p * (eta + lam_p) + (1.0 - y) * lam_m * (lam_m - eta)
    return (X * h[:, None]).T @ X


def build_design(
    features: pd.DataFrame,
    include_fixed_effects: bool = True,
    covariates: tuple[str, ...] = DEFAULT_COVARIATES,
) -> tuple[np.ndarray, np.ndarray, tuple[str, ...]]:
    """Design matrix, outcome vector and column names from a feature frame.

    Drops missing-flagged rows and rows with undefined covariates.
    Fixed-effect dummies that are constant over the estimation sample are
    dropped (they would duplicate the intercept or the zero column).
    """
    rows = features.loc[~features["missing"].astype(bool)]
    rows = rows.dropna(subset=list(covariates))
    if len(rows) == 0:
        raise RankDeficientDesign("no usable rows after dropping missing values")
    y = rows["jump_next"].to_numpy(dtype=float)

    columns = [np.ones(len(rows))]
    names = ["intercept"]
    if include_fixed_effects:
        sub = rows["subperiod"].to_numpy()
        for code, name in FIXED_EFFECTS:
            dummy = (sub == code).astype(float)
            if 0.0 < dummy.mean() < 1.0:
                columns.append(dummy)
                names.append(name)
            else:
                logger.info("dropping degenerate fixed effect %s", name)
    for name in covariates:
        columns.append(rows[name].to_numpy(dtype=float))
        names.append(name)
    X = np.column_stack(columns)
    if not np.all(np.isfinite(X)):
        raise RankDeficientDesign("design contains non-finite values")
    return X, y, tuple(names)


def fit_design(
    X: np.ndarray,
    y: np.ndarray,
    column_names: tuple[str, ...] | None = None,
    max_iter: int = 200,
    grad_tol: float = 1e-8,
) -> ProbitFit:
    """Newton MLE on a prepared design (first column must be the intercept)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, k = X.shape
    names = column_names or tuple(f"x{j}" for j in range(k))
    if len(names) != k:
        raise RankDeficientDesign(f"{k} columns but {len(names)} names")
    p_bar = y.mean()
    if p_bar in (0.0, 1.0):
        raise NonConvergence("outcome is constant; the likelihood has no maximum")

    means = X.mean(axis=0)
    stds = X.std(axis=0, ddof=0)
    if np.any(stds[1:] == 0.0):
        flat = [names[j] for j in range(1, k) if stds[j] == 0.0]
        raise RankDeficientDesign(f"constant columns: {', '.join(flat)}")
    Z = np.empty_like(X)
    Z[:, 0] = 1.0
    Z[:, 1:] = (X[:, 1:] - means[1:]) / stds[1:]
    if np.linalg.matrix_rank(Z) < k:
        raise RankDeficientDesign("design matrix is rank deficient")

    theta = np.zeros(k)
    theta[0] = special.ndtri(p_bar)
    ll = probit_loglik(theta, Z, y)
    path = [ll]
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        grad = probit_score(theta, Z, y)
        if float(np.max(np.abs(grad))) <= grad_tol:
            converged = True
            break
        info = _observed_information(theta, Z, y)
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError as exc:
            raise NonConvergence(f"singular information at iteration {iterations}") from exc
        # halve until the likelihood improves, tolerating float-level noise:
        # at the optimum a full Newton step moves ll by less than one ulp,
        # and gating on strict improvement would block the final contraction
        flat_tol = 8.0 * np.finfo(float).eps * (1.0 + abs(ll))
        scale = 1.0
        for _ in range(60):
            candidate = theta + scale * step
            ll_new = probit_loglik(candidate, Z, y)
            if ll_new >= ll - flat_tol:
                break
            scale *= 0.5
        else:
            raise NonConvergence(
                f"no likelihood improvement at iteration {iterations}; "
                "possible separation"
            )
        theta, ll = candidate, ll_new
        path.append(ll)
    if not converged:
        grad = probit_score(theta, Z, y)
        if float(np.max(np.abs(grad))) <= grad_tol:
            converged = True
    if not converged:
        raise NonConvergence(f"gradient norm above {grad_tol} after {iterations} iterations")

    # map estimates and covariance back to the original column scale
    J = np.eye(k)
    J[0, 1:] = -means[1:] / stds[1:]
    J[np.arange(1, k), np.arange(1, k)] = 1.0 / stds[1:]
    beta = J @ theta
    cov_theta = np.linalg.inv(_observed_information(theta, Z, y))
    cov = J @ cov_theta @ J.T
    cov = 0.5 * (cov + cov.T)
    se = np.sqrt(np.diag(cov))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = beta / se
    p_values = 2.0 * stats.norm.sf(np.abs(z))

    ll0 = n * (p_bar * math.log(p_bar) + (1.0 - p_bar) * math.log(1.0 - p_bar))
    return ProbitFit(
        column_names=tuple(names),
        coefficients=beta,
        std_errors=se,
        p_values=p_values,
        covariance=cov,
        log_likelihood=float(ll),
        log_likelihood_null=float(ll0),
        n_obs=n,
        converged=True,
        iterations=iterations,
        loglik_path=tuple(path),
        design_means=means,
        column_stds=np.concatenate(([0.0], X[:, 1:].std(axis=0, ddof=1))),
    )


def fit_probit(
    features: pd.DataFrame,
    include_fixed_effects: bool = True,
    covariates: tuple[str, ...] = DEFAULT_COVARIATES,
    max_iter: int = 200,
    grad_tol: float = 1e-8,
) -> ProbitFit:
    X, y, names = build_design(features, include_fixed_effects, covariates)
    return fit_design(X, y, names, max_iter=max_iter, grad_tol=grad_tol)


def marginal_probabilities(fit: ProbitFit, covariates=None) -> dict[str, float]:
    """Probability response to a one-SD covariate move from the sample mean.

    For covariate j: Phi(xbar beta + beta_j s_j) - Phi(xbar beta), with
    the design held at its sample means otherwise.  Fixed effects and the
    intercept get no marginal.
    """
    base_index = float(fit.design_means @ fit.coefficients)
    base = special.ndtr(base_index)
    wanted = covariates or [
        nm for nm in fit.column_names if nm not in ("intercept", "fe_mid", "fe_late")
    ]
    out: dict[str, float] = {}
    for name in wanted:
        j = fit.column_names.index(name)
        shifted = base_index + fit.coefficients[j] * fit.column_stds[j]
        out[name] = float(special.ndtr(shifted) - base)
    return out


def fit_diagnostics(fit: ProbitFit) -> FitDiagnostics:
    """McFadden pseudo-R2 (raw and parameter-penalized) and the LR test
    against the intercept-only model."""
    ll, ll0 = fit.log_likelihood, fit.log_likelihood_null
    k = fit.n_params
    lr = 2.0 * (ll - ll0)
    df = k - 1
    p = float(stats.chi2.sf(lr, df)) if df > 0 else 1.0
    return FitDiagnostics(
        pseudo_r2=1.0 - ll / ll0,
        adjusted_pseudo_r2=1.0 - (ll - k) / ll0,
        lr_statistic=lr,
        lr_df=df,
        lr_pvalue=p,
    )
