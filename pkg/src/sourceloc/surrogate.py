"""Gaussian-process regression over node-set indicators and expected improvement."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.stats import norm

from .spectral import gsg_gram

DEFAULT_NOISE = 1e-4
JITTER_LADDER = (0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)


class FactorizationError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True, eq=False)
class SurrogateModel:
    """A fitted GP with unit-variance GSG kernel and zero prior mean on standardized targets.

    Attributes
    ----------
    inputs : (n, d) array
        Training indicators.
    targets : (n,) array
        Targets in original units.
    length_scale : float
    noise_variance : (n,) array
        Diagonal noise actually added on the standardized scale, jitter included.
    y_mean, y_scale : float
        Target standardization, ``z = (y - y_mean) / y_scale``.
    """

    inputs: np.ndarray
    targets: np.ndarray
    length_scale: float
    noise_variance: np.ndarray
    y_mean: float
    y_scale: float
    chol: np.ndarray
    alpha: np.ndarray

    @property
    def n_train(self) -> int:
        return len(self.targets)

    def best_target(self) -> float:
        return float(self.targets.max())


@dataclass(frozen=True)
class AcquisitionResult:
    index: int
    ei: float


def median_length_scale(X: np.ndarray) -> float:
    """Median pairwise Euclidean distance between rows (1.0 if degenerate)."""
    X = np.asarray(X, dtype=np.float64)
    sq = (X * X).sum(1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * X @ X.T
    iu = np.triu_indices(len(X), k=1)
    d = np.sqrt(np.maximum(d2[iu], 0.0))
    med = float(np.median(d)) if d.size else 0.0
    return med if med > 0 else 1.0


def fit(
    inputs,
    targets,
    length_scale: float | None = None,
    noise=DEFAULT_NOISE,
    target_noise=None,
) -> SurrogateModel:
    """Fit the GP.

    ``noise`` is the observation-noise variance on the standardized scale,
    either a scalar or one value per training point. ``target_noise``, if
    given, replaces it with per-point variances in target units (e.g. the
    variance of a Monte-Carlo mean). When the Cholesky factorization fails,
    jitter is added in steps from 1e-8 up to 1e-4.
    """
    X = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    y = np.asarray(targets, dtype=np.float64).ravel()
    if len(X) != len(y):
        raise ValueError("inputs and targets differ in length")
    if len(np.unique(X, axis=0)) < 2:
        raise ValueError("need at least two distinct inputs")
    y_mean = float(y.mean())
    y_scale = float(y.std())
    if y_scale <= 0:
        y_scale = 1.0
    z = (y - y_mean) / y_scale

    if target_noise is not None:
        noise = np.asarray(target_noise, dtype=np.float64) / y_scale**2
    noise = np.broadcast_to(np.asarray(noise, dtype=np.float64), y.shape).copy()
    if (noise < 0).any():
        raise ValueError("noise variance must be nonnegative")
    if np.all(noise == 0):
        _check_conflicts(X, y)

    ls = median_length_scale(X) if length_scale is None else float(length_scale)
    if ls <= 0:
        raise ValueError("length_scale must be positive")

    K = gsg_gram(X, X, ls)
    for jitter in JITTER_LADDER:
        try:
            c = linalg.cholesky(K + np.diag(noise + jitter), lower=True)
        except linalg.LinAlgError:
            continue
        noise = noise + jitter
        break
    else:
        raise FactorizationError("kernel matrix is not positive definite even with jitter 1e-4")
    alpha = linalg.cho_solve((c, True), z)
    return SurrogateModel(X, y, ls, noise, y_mean, y_scale, c, alpha)


def _check_conflicts(X, y):
    _, inverse = np.unique(X, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    for group in np.unique(inverse):
        vals = y[inverse == group]
        if len(vals) > 1 and np.ptp(vals) > 0:
            raise FactorizationError(
                "duplicate inputs with conflicting targets cannot be interpolated without noise"
            )


def posterior(model: SurrogateModel, query):
    """Predictive mean and standard deviation of the latent function, in target units.

    ``query`` may be one indicator or a 2-D batch; batches return arrays.
    """
    Q = np.asarray(query, dtype=np.float64)
    single = Q.ndim == 1
    Q = np.atleast_2d(Q)
    if Q.shape[1] != model.inputs.shape[1]:
        raise ValueError(
            f"query dimension {Q.shape[1]} does not match training dimension {model.inputs.shape[1]}"
        )
    Ks = gsg_gram(Q, model.inputs, model.length_scale)
    mean_z = Ks @ model.alpha
    v = linalg.solve_triangular(model.chol, Ks.T, lower=True)
    var_z = np.maximum(1.0 - (v * v).sum(0), 0.0)
    mean = model.y_mean + model.y_scale * mean_z
    std = model.y_scale * np.sqrt(var_z)
    if single:
        return float(mean[0]), float(std[0])
    return mean, std


def ei_from_moments(mean, std, best):
    """Closed-form ``E[max(X - best, 0)]`` for ``X ~ N(mean, std^2)``."""
    mean = np.asarray(mean, dtype=np.float64)
    std = np.asarray(std, dtype=np.float64)
    d = mean - best
    safe = np.where(std > 0, std, 1.0)
    z = d / safe
    ei = d * norm.cdf(z) + safe * norm.pdf(z)
    ei = np.where(std > 0, ei, np.maximum(d, 0.0))
    ei = np.maximum(ei, 0.0)
    return float(ei) if ei.ndim == 0 else ei


def expected_improvement(model: SurrogateModel, query, best: float):
    mean, std = posterior(model, query)
    return ei_from_moments(mean, std, best)


def argmax_ei(model: SurrogateModel, batch, best: float) -> AcquisitionResult:
    """Position of the largest EI in ``batch``; the first one wins ties."""
    batch = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    if len(batch) == 0:
        raise ValueError("empty batch")
    ei = np.atleast_1d(expected_improvement(model, batch, best))
    idx = int(np.argmax(ei))
    return AcquisitionResult(idx, float(ei[idx]))
