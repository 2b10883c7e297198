"""Excursion-set volumes: Monte Carlo estimation, excursion probability
maps and the misclassification proxy used by the sequential criterion.

The volume of the excursion set {x : f(x) >= u} under an input
distribution mu equals the probability that a random input exceeds the
threshold; it is estimated by the indicator average over mu-samples.
Evaluators are vectorized: they take an (n, d) array of points and
return an (n,) array of values.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm, qmc

from .kriging import KrigingModel, Prediction, predict_many
from .seeding import rng_from

KINDS = ("gaussian_diag", "gaussian_full", "uniform_box")


@dataclass(frozen=True)
class InputDistribution:
    """The probability measure mu on the input space: sampler plus
    density.  Three kinds: diagonal Gaussian, full-covariance Gaussian,
    and a uniform box."""

    kind: str
    dimension: int
    mean: np.ndarray | None = None
    sd: np.ndarray | None = None
    cov: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown distribution kind {self.kind!r}")

    def _chol(self) -> np.ndarray:
        return np.linalg.cholesky(self.cov)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """n independent draws from mu, shape (n, d)."""
        if self.kind == "gaussian_diag":
            return self.mean + self.sd * rng.standard_normal((n, self.dimension))
        if self.kind == "gaussian_full":
            z = rng.standard_normal((n, self.dimension))
            return self.mean + z @ self._chol().T
        u = rng.random((n, self.dimension))
        return self.lower + (self.upper - self.lower) * u

    def density(self, X) -> np.ndarray:
        """mu-density at the rows of X."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.kind == "gaussian_diag":
            z = (X - self.mean) / self.sd
            lognorm = np.sum(np.log(self.sd)) + 0.5 * self.dimension * np.log(2 * np.pi)
            return np.exp(-0.5 * np.sum(z * z, axis=1) - lognorm)
        if self.kind == "gaussian_full":
            L = self._chol()
            z = np.linalg.solve(L, (X - self.mean).T).T
            logdet = np.sum(np.log(np.diag(L)))
            lognorm = logdet + 0.5 * self.dimension * np.log(2 * np.pi)
            return np.exp(-0.5 * np.sum(z * z, axis=1) - lognorm)
        inside = np.all((X >= self.lower) & (X <= self.upper), axis=1)
        vol = np.prod(self.upper - self.lower)
        return inside / vol

    def probe_points(self, n: int) -> np.ndarray:
        """Deterministic quasi-random probe set spread according to mu
        (Halton points pushed through the quantile transform)."""
        h = qmc.Halton(d=self.dimension, scramble=False)
        h.fast_forward(1)  # the first Halton point is the origin
        u = np.clip(h.random(n), 1e-12, 1 - 1e-12)
        if self.kind == "gaussian_diag":
            return self.mean + self.sd * norm.ppf(u)
        if self.kind == "gaussian_full":
            return self.mean + norm.ppf(u) @ self._chol().T
        return self.lower + (self.upper - self.lower) * u


def gaussian_diag(mean, sd) -> InputDistribution:
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    sd = np.atleast_1d(np.asarray(sd, dtype=float))
    if sd.shape != mean.shape or np.any(sd <= 0):
        raise ValueError("sd must match mean and be positive")
    return InputDistribution("gaussian_diag", len(mean), mean=mean, sd=sd)


def gaussian_full(mean, cov) -> InputDistribution:
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if cov.shape != (len(mean), len(mean)) or not np.allclose(cov, cov.T):
        raise ValueError("cov must be a symmetric matrix matching mean")
    if np.any(np.linalg.eigvalsh(cov) <= 0):
        raise ValueError("cov must be positive definite")
    return InputDistribution("gaussian_full", len(mean), mean=mean, cov=cov)


def uniform_box(lower, upper) -> InputDistribution:
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    if lower.shape != upper.shape or np.any(lower >= upper):
        raise ValueError("need lower < upper coordinatewise")
    return InputDistribution("uniform_box", len(lower), lower=lower, upper=upper)


@dataclass(frozen=True)
class ExcursionEstimate:
    """A Monte Carlo excursion-volume estimate and its standard error."""

    threshold: float
    volume: float
    std_error: float
    n_samples: int
    seed: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.volume <= 1.0:
            raise ValueError("volume must lie in [0, 1]")


def mc_volume(evaluator, u: float, mu: InputDistribution, n_samples: int,
              seed: int) -> ExcursionEstimate:
    """Indicator-average estimate of P{f(X) >= u}, X ~ mu.

    ``evaluator`` maps an (n, d) array of points to an (n,) array of
    values.  Deterministic given the seed; distinct seeds give
    independent sample streams.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = rng_from(seed, "mc-volume")
    X = mu.sample(n_samples, rng)
    vals = np.asarray(evaluator(X), dtype=float).ravel()
    bad = np.flatnonzero(~np.isfinite(vals))
    if bad.size:
        raise ValueError(f"evaluator returned a non-finite value at sample "
                         f"index {bad[0]}")
    v = float(np.mean(vals >= u))
    se = float(np.sqrt(v * (1.0 - v) / n_samples))
    return ExcursionEstimate(threshold=float(u), volume=v, std_error=se,
                             n_samples=n_samples, seed=seed)


def gaussian_tail(t) -> float:
    """Psi(t) = P{N(0,1) >= t}; Psi(+inf) = 0, Psi(-inf) = 1."""
    return norm.sf(t)


def excursion_probability(pred: Prediction, u: float) -> float:
    """P{xi(x) >= u} under the predictive law; the indicator of
    mean >= u in the degenerate zero-variance limit."""
    sd = np.sqrt(pred.variance)
    if sd == 0.0:
        return 1.0 if pred.mean >= u else 0.0
    return float(gaussian_tail((u - pred.mean) / sd))


def misclassification_proxy(pred: Prediction, u: float) -> float:
    """Psi(|u - mean| / sd): the approximate probability that thresholding
    the predictor misclassifies the point.  In [0, 1/2]; zero in the
    zero-variance limit; exactly 1/2 when the mean sits on the threshold."""
    sd = np.sqrt(pred.variance)
    if sd == 0.0:
        return 0.0
    return float(gaussian_tail(abs(u - pred.mean) / sd))


def plugin_volume(model: KrigingModel, u: float, mu: InputDistribution,
                  n_samples: int, seed: int) -> ExcursionEstimate:
    """Monte Carlo volume of the excursion set of the predictor mean."""
    return mc_volume(lambda X: predict_many(model, X)[0], u, mu, n_samples,
                     seed)


def estimates_to_csv(estimates, path) -> None:
    """Rows of u, volume, std_error, n_samples, seed."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["u", "volume", "std_error", "n_samples", "seed"])
        for e in estimates:
            w.writerow([repr(e.threshold), repr(e.volume), repr(e.std_error),
                        e.n_samples, "" if e.seed is None else e.seed])
