"""Gaussian-process core: squared-exponential covariance, Gaussian entropy
and mutual information, posterior prediction and hyperparameter fitting.

Entropies and mutual information are in nats.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import NumericError
from .simplex import nelder_mead

LOG_2PI_E = math.log(2.0 * math.pi * math.e)

JITTER_START = 1e-10
JITTER_MAX = 1e-6


@dataclass(frozen=True)
class GpHyperparams:
    sigma_f: float
    sigma_n: float
    length_scales: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "length_scales", tuple(float(v) for v in self.length_scales))
        if not self.sigma_f > 0:
            raise ValueError(f"sigma_f must be positive, got {self.sigma_f}")
        if not self.sigma_n >= 0:
            raise ValueError(f"sigma_n must be non-negative, got {self.sigma_n}")
        if not self.length_scales or not all(ls > 0 for ls in self.length_scales):
            raise ValueError(f"length scales must be positive, got {self.length_scales}")

    def leveled(self, noise_factor: float, length_factor: float) -> "GpHyperparams":
        """Scaled copy: smaller noise, longer length scales for planning."""
        return replace(self, sigma_n=self.sigma_n * noise_factor,
                       length_scales=tuple(ls * length_factor for ls in self.length_scales))


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 2) if pts.size else np.zeros((0, 2))
    return pts


def kernel(p, q, h: GpHyperparams) -> float:
    """Anisotropic squared-exponential covariance between two points."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if not (p.shape == q.shape == (len(h.length_scales),)):
        raise ValueError("point and length-scale dimensions disagree")
    r = (p - q) / np.asarray(h.length_scales)
    return h.sigma_f ** 2 * math.exp(-0.5 * float(r @ r))


def cross_cov(a, b, h: GpHyperparams) -> np.ndarray:
    """Covariance matrix K[i, j] = kernel(a[i], b[j])."""
    ls = np.asarray(h.length_scales)
    a = _as_points(a) / ls
    b = _as_points(b) / ls
    d2 = (np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :] - 2.0 * a @ b.T)
    np.maximum(d2, 0.0, out=d2)
    return h.sigma_f ** 2 * np.exp(-0.5 * d2)


def gram(points, h: GpHyperparams, add_noise: bool = False) -> np.ndarray:
    pts = _as_points(points)
    ls = np.asarray(h.length_scales)
    diff = (pts[:, None, :] - pts[None, :, :]) / ls
    K = h.sigma_f ** 2 * np.exp(-0.5 * np.sum(diff * diff, axis=-1))
    if add_noise:
        K[np.diag_indices_from(K)] += h.sigma_n ** 2
    return K


def cholesky(K: np.ndarray, scale: float | None = None) -> np.ndarray:
    """Lower Cholesky factor, retrying with escalating diagonal jitter.

    Jitter starts at 1e-10 * scale and grows tenfold up to 1e-6 * scale;
    ``scale`` defaults to the mean diagonal (sigma_f^2 for a gram matrix).
    """
    K = np.asarray(K, dtype=float)
    if K.shape == (0, 0):
        return K.copy()
    try:
        return np.linalg.cholesky(K)
    except np.linalg.LinAlgError:
        pass
    if scale is None:
        scale = float(np.mean(np.diag(K)))
    jitter = JITTER_START * scale
    eye = np.eye(len(K))
    while jitter <= JITTER_MAX * scale * (1 + 1e-9):
        try:
            return np.linalg.cholesky(K + jitter * eye)
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise NumericError("matrix is not positive definite even after jitter")


def logdet(K: np.ndarray, scale: float | None = None) -> float:
    L = cholesky(K, scale)
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def entropy(K) -> float:
    """Differential entropy of N(mu, K): 0.5 * ln((2 pi e)^n det K)."""
    K = np.atleast_2d(np.asarray(K, dtype=float))
    n = len(K)
    return 0.5 * (n * LOG_2PI_E + logdet(K))


def mutual_information(K_joint, split) -> float:
    """I(X1; X2) = 0.5 * ln(det K1 det K2 / det K) for the index blocks in ``split``."""
    K = np.asarray(K_joint, dtype=float)
    i1 = np.asarray(split[0], dtype=int)
    i2 = np.asarray(split[1], dtype=int)
    n = len(K)
    idx = np.concatenate([i1, i2])
    if len(idx) != n or len(np.unique(idx)) != n or (n and (idx.min() < 0 or idx.max() >= n)):
        raise ValueError("split must partition the index set")
    if len(i1) == 0 or len(i2) == 0:
        return 0.0
    scale = float(np.mean(np.diag(K)))
    return 0.5 * (logdet(K[np.ix_(i1, i1)], scale) + logdet(K[np.ix_(i2, i2)], scale)
                  - logdet(K, scale))


@dataclass(frozen=True, eq=False)
class GpModel:
    mean_const: float
    hyper: GpHyperparams
    train_x: np.ndarray
    train_y: np.ndarray

    def __post_init__(self):
        x = _as_points(self.train_x).copy()
        y = np.asarray(self.train_y, dtype=float).reshape(-1).copy()
        if len(x) != len(y):
            raise ValueError("train_x and train_y lengths differ")
        if not (np.isfinite(x).all() and np.isfinite(y).all() and math.isfinite(self.mean_const)):
            raise ValueError("training data must be finite")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "train_x", x)
        object.__setattr__(self, "train_y", y)

    @classmethod
    def from_data(cls, x, y, hyper: GpHyperparams, prior_mean: float = 0.0) -> "GpModel":
        """Constant mean set to the sample mean of ``y`` (``prior_mean`` if empty)."""
        y = np.asarray(y, dtype=float).reshape(-1)
        mean = float(np.mean(y)) if len(y) else float(prior_mean)
        return cls(mean, hyper, x, y)

    def with_hyper(self, hyper: GpHyperparams) -> "GpModel":
        return replace(self, hyper=hyper)


@dataclass(frozen=True, eq=False)
class Posterior:
    mean: np.ndarray
    cov: np.ndarray

    @property
    def var(self) -> np.ndarray:
        return np.diag(self.cov).copy()


def _clamp_diag(cov: np.ndarray, sigma_f2: float) -> np.ndarray:
    d = np.diag(cov)
    if (d < -JITTER_MAX * sigma_f2).any():
        raise NumericError("posterior variance is significantly negative")
    cov[np.diag_indices_from(cov)] = np.maximum(d, 0.0)
    return cov


def _factor(model: GpModel):
    h = model.hyper
    K = gram(model.train_x, h, add_noise=True)
    return cholesky(K, h.sigma_f ** 2)


def predict(model: GpModel, query) -> Posterior:
    """Posterior mean and covariance at the query points."""
    q = _as_points(query)
    h = model.hyper
    K_oo = gram(q, h)
    if len(model.train_y) == 0:
        return Posterior(np.full(len(q), model.mean_const), K_oo)
    L = _factor(model)
    K_oi = cross_cov(q, model.train_x, h)
    alpha = cho_solve((L, True), model.train_y - model.mean_const)
    mean = model.mean_const + K_oi @ alpha
    V = solve_triangular(L, K_oi.T, lower=True)
    cov = K_oo - V.T @ V
    cov = 0.5 * (cov + cov.T)
    return Posterior(mean, _clamp_diag(cov, h.sigma_f ** 2))


PREDICT_CHUNK = 256


def predict_marginals(model: GpModel, query, threads: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance only, over fixed-size query chunks.

    Chunk boundaries do not depend on ``threads``, so the output is
    identical for any thread count.
    """
    q = _as_points(query)
    h = model.hyper
    if len(model.train_y) == 0:
        return np.full(len(q), model.mean_const), np.full(len(q), h.sigma_f ** 2)
    L = _factor(model)
    alpha = cho_solve((L, True), model.train_y - model.mean_const)

    def run(start):
        chunk = q[start:start + PREDICT_CHUNK]
        K_oi = cross_cov(chunk, model.train_x, h)
        V = solve_triangular(L, K_oi.T, lower=True)
        var = h.sigma_f ** 2 - np.sum(V * V, axis=0)
        return model.mean_const + K_oi @ alpha, np.maximum(var, 0.0)

    starts = range(0, len(q), PREDICT_CHUNK)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(s) for s in starts]
    if not parts:
        return np.zeros(0), np.zeros(0)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def log_marginal_likelihood(model: GpModel) -> float:
    """log N(y | m 1, K + sigma_n^2 I)."""
    n = len(model.train_y)
    if n == 0:
        raise ValueError("log marginal likelihood needs at least one training point")
    L = _factor(model)
    r = model.train_y - model.mean_const
    alpha = cho_solve((L, True), r)
    return float(-0.5 * r @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * n * math.log(2 * math.pi))


def fit_hyperparams(model: GpModel, init: GpHyperparams | None = None,
                    max_iter: int | None = None) -> GpHyperparams:
    """Maximize the log marginal likelihood over (log sigma_f, log length scales).

    The noise level is a sensor property and stays fixed. Returns ``init``
    unless the search found a strictly better likelihood.
    """
    if len(model.train_y) < 2:
        raise ValueError("hyperparameter fitting needs at least two training points")
    init = init or model.hyper
    sigma_n = init.sigma_n

    def unpack(theta):
        return GpHyperparams(float(math.exp(theta[0])), sigma_n,
                             tuple(float(math.exp(t)) for t in theta[1:]))

    def neg_lml(theta):
        if not np.all(np.abs(theta) < 700):
            return math.inf
        try:
            value = log_marginal_likelihood(model.with_hyper(unpack(theta)))
        except (NumericError, ValueError):
            return math.inf
        return -value if math.isfinite(value) else math.inf

    theta0 = np.log([init.sigma_f, *init.length_scales])
    base = neg_lml(theta0)
    res = nelder_mead(neg_lml, theta0, step=0.5, max_iter=max_iter)
    if not res.fun < base:
        return init
    return unpack(res.x)
