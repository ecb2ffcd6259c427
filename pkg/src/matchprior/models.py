"""Model families with analytic log-likelihood derivatives.

Each model exposes the per-observation log density together with its first,
second, and third parameter derivatives and the Fisher information for a
single observation.  All evaluators are pure functions of (data, theta) and
safe to share across threads.
"""

from __future__ import annotations

import csv
import threading
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import NonFiniteLogDensity, StepTooLarge


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


# ---------------------------------------------------------------------------
# data containers


@dataclass(frozen=True)
class Observation:
    """A single observation: response vector plus optional covariate row."""

    response: np.ndarray
    covariates: np.ndarray | None = None


@dataclass
class Dataset:
    """Stacked observations.  responses has shape (n, k); covariates (n, p) or None."""

    responses: np.ndarray
    covariates: np.ndarray | None = None

    def __post_init__(self):
        resp = np.asarray(self.responses, dtype=float)
        # a flat vector is n scalar observations, not one n-vector observation
        self.responses = resp[:, None] if resp.ndim == 1 else np.atleast_2d(resp)
        if self.responses.shape[0] < 1:
            raise ValueError("dataset needs at least one observation")
        if self.covariates is not None:
            cov = np.asarray(self.covariates, dtype=float)
            self.covariates = cov[:, None] if cov.ndim == 1 else np.atleast_2d(cov)
            if self.covariates.shape[0] != self.responses.shape[0]:
                raise ValueError("covariate rows do not match response rows")

    @property
    def n(self) -> int:
        return self.responses.shape[0]

    def observation(self, t: int) -> Observation:
        cov = None if self.covariates is None else self.covariates[t]
        return Observation(self.responses[t], cov)

    @classmethod
    def from_observations(cls, observations):
        if not observations:
            raise ValueError("dataset needs at least one observation")
        resp = np.vstack([np.atleast_1d(o.response) for o in observations])
        has_cov = [o.covariates is not None for o in observations]
        if any(has_cov) and not all(has_cov):
            raise ValueError("observations are structurally mixed")
        cov = None
        if all(has_cov):
            cov = np.vstack([np.atleast_1d(o.covariates) for o in observations])
        return cls(resp, cov)


def check_point(model, theta) -> np.ndarray:
    """Validate a parameter point against the model's dimension and open support."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.shape != (model.dim,):
        raise ValueError(f"expected parameter of length {model.dim}, got {theta.shape}")
    if not np.all(np.isfinite(theta)):
        raise ValueError("parameter has non-finite entries")
    if not model.in_support(theta):
        raise ValueError(f"parameter {theta} outside open support of {model.name}")
    return theta


# ---------------------------------------------------------------------------
# model contract


class ModelSpec:
    """Contract for a parametric family with analytic derivatives.

    Subclasses set dim, family, support (open boxes per coordinate) and
    implement the vectorized average derivatives over a Dataset.
    """

    dim: int
    family: str
    name: str = "model"

    # open interval per coordinate
    support: list[tuple[float, float]]

    def in_support(self, theta) -> bool:
        theta = np.atleast_1d(theta)
        if theta.shape[0] != self.dim:
            return False
        for v, (lo, hi) in zip(theta, self.support):
            if not (lo < v < hi) or not np.isfinite(v):
                return False
        return True

    # -- single observation interface -------------------------------------
    def log_density(self, obs: Observation, theta) -> float:
        return float(self.avg_loglik(_single(obs), theta))

    def grad_logp(self, obs: Observation, theta) -> np.ndarray:
        return self.avg_grad(_single(obs), theta)

    def hess_logp(self, obs: Observation, theta) -> np.ndarray:
        return self.avg_hess(_single(obs), theta)

    def third_logp(self, obs: Observation, theta) -> np.ndarray:
        return self.avg_third(_single(obs), theta)

    # -- vectorized interface (averages over the dataset) ------------------
    def avg_loglik(self, data: Dataset, theta) -> float:
        raise NotImplementedError

    def avg_grad(self, data: Dataset, theta) -> np.ndarray:
        raise NotImplementedError

    def avg_hess(self, data: Dataset, theta) -> np.ndarray:
        raise NotImplementedError

    def avg_third(self, data: Dataset, theta) -> np.ndarray:
        raise NotImplementedError

    # -- geometry hooks ----------------------------------------------------
    fisher_mode: str = "analytic"  # or "expectation-required"

    def fisher(self, theta) -> np.ndarray:
        raise NotImplementedError

    def fisher_grad(self, theta):
        """d x d x d array with entry [a, b, c] = d g_bc / d theta_a, or None."""
        return None

    def skewness(self, theta):
        """Analytic skewness tensor T_abc, or None if not available."""
        return None

    def sample(self, theta, n, rng) -> Dataset:
        raise NotImplementedError

    def default_init(self, data: Dataset) -> np.ndarray:
        """Deterministic method-of-moments style starting point."""
        raise NotImplementedError

    def per_obs_score_hess(self, data: Dataset, theta):
        """Per-observation scores (n, d) and Hessians (n, d, d).

        Generic fallback loops over observations; models override with a
        vectorized version where Monte Carlo geometry matters.
        """
        n, d = data.n, self.dim
        score = np.empty((n, d))
        hess = np.empty((n, d, d))
        for t in range(n):
            obs = data.observation(t)
            score[t] = self.grad_logp(obs, theta)
            hess[t] = self.hess_logp(obs, theta)
        return score, hess


def _single(obs: Observation) -> Dataset:
    return Dataset(np.atleast_2d(obs.response),
                   None if obs.covariates is None else np.atleast_2d(obs.covariates))


# ---------------------------------------------------------------------------
# concrete families


class GaussianKnownMeanPrecision(ModelSpec):
    """N(0, 1/theta) in the natural coordinate theta = 1/sigma^2.

    Natural exponential family with T(y) = -y^2/2 and psi(theta) = -(1/2) log theta.
    """

    dim = 1
    family = "exponential-family-natural"
    name = "gaussian-precision"
    support = [(0.0, np.inf)]

    def avg_loglik(self, data, theta):
        th = float(theta[0])
        y2 = np.mean(data.responses[:, 0] ** 2)
        return 0.5 * np.log(th) - 0.5 * th * y2 - 0.5 * np.log(2 * np.pi)

    def avg_grad(self, data, theta):
        th = float(theta[0])
        y2 = np.mean(data.responses[:, 0] ** 2)
        return np.array([0.5 / th - 0.5 * y2])

    def avg_hess(self, data, theta):
        th = float(theta[0])
        return np.array([[-0.5 / th**2]])

    def avg_third(self, data, theta):
        th = float(theta[0])
        return np.array([[[1.0 / th**3]]])

    def fisher(self, theta):
        th = float(theta[0])
        return np.array([[0.5 / th**2]])

    def fisher_grad(self, theta):
        th = float(theta[0])
        return np.array([[[-1.0 / th**3]]])

    def skewness(self, theta):
        # third cumulant of T(y): psi'''(theta)
        th = float(theta[0])
        return np.array([[[-1.0 / th**3]]])

    def sample(self, theta, n, rng):
        sd = 1.0 / np.sqrt(float(theta[0]))
        return Dataset(rng.normal(0.0, sd, size=(n, 1)))

    def default_init(self, data):
        y2 = np.mean(data.responses[:, 0] ** 2)
        return np.array([1.0 / max(y2, 1e-8)])


class PoissonSequence(ModelSpec):
    """d independent Poisson rates in mean coordinates lambda."""

    family = "exponential-family-mean"

    def __init__(self, dim=1):
        self.dim = dim
        self.name = f"poisson-seq-{dim}" if dim > 1 else "poisson"
        self.support = [(0.0, np.inf)] * dim

    def avg_loglik(self, data, theta):
        lam = np.asarray(theta, dtype=float)
        y = data.responses
        ll = y * np.log(lam) - lam - gammaln(y + 1.0)
        return float(np.mean(np.sum(ll, axis=1)))

    def avg_grad(self, data, theta):
        lam = np.asarray(theta, dtype=float)
        ybar = np.mean(data.responses, axis=0)
        return ybar / lam - 1.0

    def avg_hess(self, data, theta):
        lam = np.asarray(theta, dtype=float)
        ybar = np.mean(data.responses, axis=0)
        return np.diag(-ybar / lam**2)

    def avg_third(self, data, theta):
        lam = np.asarray(theta, dtype=float)
        ybar = np.mean(data.responses, axis=0)
        out = np.zeros((self.dim,) * 3)
        idx = np.arange(self.dim)
        out[idx, idx, idx] = 2.0 * ybar / lam**3
        return out

    def fisher(self, theta):
        lam = np.asarray(theta, dtype=float)
        return np.diag(1.0 / lam)

    def fisher_grad(self, theta):
        lam = np.asarray(theta, dtype=float)
        out = np.zeros((self.dim,) * 3)
        idx = np.arange(self.dim)
        out[idx, idx, idx] = -1.0 / lam**2
        return out

    def skewness(self, theta):
        lam = np.asarray(theta, dtype=float)
        out = np.zeros((self.dim,) * 3)
        idx = np.arange(self.dim)
        out[idx, idx, idx] = 1.0 / lam**2
        return out

    def sample(self, theta, n, rng):
        lam = np.asarray(theta, dtype=float)
        return Dataset(rng.poisson(lam, size=(n, self.dim)).astype(float))

    def default_init(self, data):
        ybar = np.mean(data.responses, axis=0)
        return np.maximum(ybar, 0.1)


class PoissonRate(PoissonSequence):
    """Single Poisson rate in the mean coordinate."""

    def __init__(self):
        super().__init__(dim=1)


class LogisticGLM(ModelSpec):
    """Bernoulli regression with the canonical logit link and fixed design."""

    family = "glm-canonical"

    def __init__(self, design):
        self.design = np.atleast_2d(np.asarray(design, dtype=float))
        self.dim = self.design.shape[1]
        self.name = f"logistic-{self.dim}"
        self.support = [(-np.inf, np.inf)] * self.dim

    @classmethod
    def from_dataset(cls, data: Dataset):
        if data.covariates is None:
            raise ValueError("logistic model requires covariates")
        return cls(data.covariates)

    def _design_for(self, data):
        if data.covariates is not None:
            return data.covariates
        if data.n != self.design.shape[0]:
            raise ValueError("dataset without covariates must match the stored design")
        return self.design

    def avg_loglik(self, data, theta):
        x = self._design_for(data)
        y = data.responses[:, 0]
        eta = x @ np.asarray(theta, dtype=float)
        # y*eta - log(1 + e^eta), computed stably
        return float(np.mean(y * eta - np.logaddexp(0.0, eta)))

    def avg_grad(self, data, theta):
        x = self._design_for(data)
        y = data.responses[:, 0]
        p = sigmoid(x @ np.asarray(theta, dtype=float))
        return x.T @ (y - p) / data.n

    def avg_hess(self, data, theta):
        x = self._design_for(data)
        p = sigmoid(x @ np.asarray(theta, dtype=float))
        w = p * (1.0 - p)
        return -(x.T * w) @ x / data.n

    def avg_third(self, data, theta):
        x = self._design_for(data)
        p = sigmoid(x @ np.asarray(theta, dtype=float))
        w = p * (1.0 - p) * (1.0 - 2.0 * p)
        return -np.einsum("i,ia,ib,ic->abc", w, x, x, x) / data.n

    def fisher(self, theta):
        x = self.design
        p = sigmoid(x @ np.asarray(theta, dtype=float))
        w = p * (1.0 - p)
        return (x.T * w) @ x / x.shape[0]

    def fisher_grad(self, theta):
        x = self.design
        p = sigmoid(x @ np.asarray(theta, dtype=float))
        w = p * (1.0 - p) * (1.0 - 2.0 * p)
        return np.einsum("i,ia,ib,ic->abc", w, x, x, x) / x.shape[0]

    def skewness(self, theta):
        return self.fisher_grad(theta)

    def sample(self, theta, n, rng):
        if n != self.design.shape[0]:
            raise ValueError("sample size must match the stored design")
        p = sigmoid(self.design @ np.asarray(theta, dtype=float))
        y = (rng.random(n) < p).astype(float)
        return Dataset(y[:, None], self.design)

    def default_init(self, data):
        return np.zeros(self.dim)


class MultivariateCauchyLocation(ModelSpec):
    """d-variate Cauchy with unknown location and identity scale matrix."""

    family = "cauchy-location"
    fisher_mode = "expectation-required"

    def __init__(self, dim, fisher_seed=20240901, fisher_draws=1_000_000):
        self.dim = dim
        self.name = f"cauchy-{dim}"
        self.support = [(-np.inf, np.inf)] * dim
        self._fisher_seed = fisher_seed
        self._fisher_draws = fisher_draws
        self._fisher_cache: dict = {}
        self._cache_lock = threading.Lock()

    def _log_const(self):
        d = self.dim
        return gammaln((d + 1) / 2.0) - gammaln(0.5) - d * np.log(np.pi)

    def avg_loglik(self, data, theta):
        u = data.responses - np.asarray(theta, dtype=float)
        r2 = np.sum(u * u, axis=1)
        return float(self._log_const()
                     - 0.5 * (self.dim + 1) * np.mean(np.log1p(r2)))

    def avg_grad(self, data, theta):
        u = data.responses - np.asarray(theta, dtype=float)
        denom = 1.0 + np.sum(u * u, axis=1)
        return (self.dim + 1) * np.mean(u / denom[:, None], axis=0)

    def avg_hess(self, data, theta):
        u = data.responses - np.asarray(theta, dtype=float)
        denom = 1.0 + np.sum(u * u, axis=1)
        eye = np.eye(self.dim)
        h = (-eye[None] * denom[:, None, None]
             + 2.0 * u[:, :, None] * u[:, None, :]) / denom[:, None, None] ** 2
        return (self.dim + 1) * np.mean(h, axis=0)

    def avg_third(self, data, theta):
        u = data.responses - np.asarray(theta, dtype=float)
        denom = 1.0 + np.sum(u * u, axis=1)
        eye = np.eye(self.dim)
        t1 = (eye[None, :, :, None] * u[:, None, None, :]
              + eye[None, :, None, :] * u[:, None, :, None]
              + eye[None, None, :, :] * u[:, :, None, None])
        uuu = u[:, :, None, None] * u[:, None, :, None] * u[:, None, None, :]
        t = -2.0 * t1 / denom[:, None, None, None] ** 2 \
            + 8.0 * uuu / denom[:, None, None, None] ** 3
        return (self.dim + 1) * np.mean(t, axis=0)

    def fisher(self, theta):
        # Monte Carlo expectation with a fixed internal seed, cached per point.
        key = tuple(np.round(np.asarray(theta, dtype=float), 10))
        with self._cache_lock:
            hit = self._fisher_cache.get(key)
        if hit is not None:
            return hit
        rng = np.random.default_rng(self._fisher_seed)
        data = self.sample(theta, self._fisher_draws, rng)
        u = data.responses - np.asarray(theta, dtype=float)
        denom = 1.0 + np.sum(u * u, axis=1)
        score = (self.dim + 1) * u / denom[:, None]
        g = score.T @ score / self._fisher_draws
        g = 0.5 * (g + g.T)
        with self._cache_lock:
            self._fisher_cache.setdefault(key, g)
        return g

    def sample(self, theta, n, rng):
        z = rng.normal(size=(n, self.dim))
        w = rng.chisquare(1.0, size=n)
        return Dataset(np.asarray(theta, dtype=float) + z / np.sqrt(w)[:, None])

    def per_obs_score_hess(self, data, theta):
        u = data.responses - np.asarray(theta, dtype=float)
        denom = 1.0 + np.sum(u * u, axis=1)
        score = (self.dim + 1) * u / denom[:, None]
        eye = np.eye(self.dim)
        hess = (self.dim + 1) * (
            -eye[None] * denom[:, None, None]
            + 2.0 * u[:, :, None] * u[:, None, :]) / denom[:, None, None] ** 2
        return score, hess

    def default_init(self, data):
        return np.median(data.responses, axis=0)


# ---------------------------------------------------------------------------
# module-level operations


def average_loglik(model: ModelSpec, data: Dataset, theta) -> float:
    """(1/n) sum of per-observation log densities."""
    theta = check_point(model, theta)
    with np.errstate(all="ignore"):
        val = model.avg_loglik(data, theta)
    if not np.isfinite(val):
        raise NonFiniteLogDensity(
            f"average log-likelihood is {val} at interior point {theta}")
    return float(val)


def third_derivative_tensor(model: ModelSpec, data: Dataset, theta) -> np.ndarray:
    """(1/n) sum of third log-density derivatives; fully symmetric rank-3 tensor."""
    theta = check_point(model, theta)
    t = model.avg_third(data, theta)
    if not np.all(np.isfinite(t)):
        raise NonFiniteLogDensity(f"third derivative tensor non-finite at {theta}")
    return t


def finite_diff_third(model: ModelSpec, data: Dataset, theta, h: float) -> np.ndarray:
    """Central finite differences of avg_hess; symmetrized fallback oracle."""
    theta = check_point(model, theta)
    if h <= 0:
        raise StepTooLarge(f"step h={h} must be positive")
    d = model.dim
    out = np.zeros((d, d, d))
    for a in range(d):
        up = theta.copy()
        dn = theta.copy()
        up[a] += h
        dn[a] -= h
        if not (model.in_support(up) and model.in_support(dn)):
            raise StepTooLarge(f"probe along coordinate {a} left the support")
        out[a] = (model.avg_hess(data, up) - model.avg_hess(data, dn)) / (2.0 * h)
    # symmetrize over all index orders
    sym = (out + out.transpose(1, 0, 2) + out.transpose(1, 2, 0)
           + out.transpose(0, 2, 1) + out.transpose(2, 0, 1)
           + out.transpose(2, 1, 0)) / 6.0
    return sym


# ---------------------------------------------------------------------------
# CSV ingestion


def load_dataset_csv(path) -> Dataset:
    """Load a dataset from a header CSV with y (or y1..yd) and x1..xk columns."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        ycols = [c for c in header if c == "y" or
                 (c.startswith("y") and c[1:].isdigit())]
        xcols = [c for c in header if c.startswith("x") and c[1:].isdigit()]
        if not ycols:
            raise ValueError("CSV needs a response column named y or y1..yd")
        ycols.sort(key=lambda c: int(c[1:]) if c[1:] else 0)
        xcols.sort(key=lambda c: int(c[1:]))
        ys, xs = [], []
        for row in reader:
            ys.append([float(row[c]) for c in ycols])
            if xcols:
                xs.append([float(row[c]) for c in xcols])
    return Dataset(np.array(ys), np.array(xs) if xs else None)


def load_banknote_csv(path) -> Dataset:
    """Load a headerless 5-column banknote-format CSV (4 features, 0/1 label)."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for line in csv.reader(fh):
            if not line:
                continue
            if len(line) != 5:
                raise ValueError("banknote format requires exactly 5 columns")
            rows.append([float(v) for v in line])
    arr = np.array(rows)
    return Dataset(arr[:, 4:5], arr[:, :4])
