"""Intrinsic Kriging: saddle-point system assembly, prediction with error
variance, sequential design growth and fill distances.

The predictor weights (lambda_x, mu_x) solve the symmetric indefinite
system

    [ K + K_N   P' ] [ lambda_x ]   [ k_x ]
    [ P         0  ] [ mu_x     ] = [ p_x ]

with K the n x n generalized-covariance matrix, P the q x n polynomial
constraint matrix, k_x the covariance vector to the query and p_x the
monomials at the query.  The prediction mean is lambda_x . observations
and the error variance is k(0) - lambda_x . k_x - mu_x . p_x.

Models are immutable after construction: ``predict`` is pure and safe to
call concurrently; ``add_point`` returns a new model.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.spatial.distance import cdist

from .covariance import (
    GeneralizedCovariance,
    MonomialBasis,
    basis_matrix,
    gencov_matrix,
)
from .errors import DegenerateVariance, DuplicatePoint, SingularSystem, OrderMismatch

DUPLICATE_TOL = 1e-12


def _as_points(X, dim=None):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None] if dim is None or dim == 1 else X[None, :]
    if dim is not None and X.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got {X.shape[1]}")
    return X


@dataclass(frozen=True)
class DesignSet:
    """Evaluation points, observed values and an observation-noise
    covariance (zero matrix for exact observations)."""

    points: np.ndarray
    observations: np.ndarray
    noise_cov: np.ndarray | None = None

    def __post_init__(self):
        pts = _as_points(self.points)
        obs = np.asarray(self.observations, dtype=float).ravel()
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "observations", obs)
        if len(obs) != len(pts):
            raise ValueError("points and observations must have equal length")
        if self.noise_cov is not None:
            kn = np.asarray(self.noise_cov, dtype=float)
            if kn.shape != (len(pts), len(pts)):
                raise ValueError("noise_cov dimension does not match design size")
            if not np.allclose(kn, kn.T):
                raise ValueError("noise_cov must be symmetric")
            object.__setattr__(self, "noise_cov", kn)
        if self.is_noise_free and len(pts) > 1:
            d = cdist(pts, pts)
            d[np.diag_indices_from(d)] = np.inf
            if d.min() < DUPLICATE_TOL:
                raise SingularSystem("duplicate design points with zero noise")

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    @property
    def is_noise_free(self) -> bool:
        return self.noise_cov is None or not np.any(self.noise_cov)

    def add(self, x, y, check_duplicate=True) -> "DesignSet":
        x = np.asarray(x, dtype=float).ravel()
        if check_duplicate and self.is_noise_free:
            if cdist(self.points, x[None, :]).min() < DUPLICATE_TOL:
                raise DuplicatePoint(f"point {x} already in the design")
        kn = None
        if self.noise_cov is not None:
            kn = np.zeros((self.n + 1, self.n + 1))
            kn[: self.n, : self.n] = self.noise_cov
        return DesignSet(
            np.vstack([self.points, x[None, :]]),
            np.append(self.observations, float(y)),
            kn,
        )


def design_to_csv(design: DesignSet, path) -> None:
    """One row per point: x_1..x_d, f, and a noise-variance column when
    the design carries (diagonal) noise."""
    d = design.dimension
    with_noise = design.noise_cov is not None
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        header = [f"x_{i + 1}" for i in range(d)] + ["f"]
        if with_noise:
            header.append("noise_var")
        w.writerow(header)
        for i in range(design.n):
            row = [repr(v) for v in design.points[i]] + [repr(design.observations[i])]
            if with_noise:
                row.append(repr(design.noise_cov[i, i]))
            w.writerow(row)


def design_from_csv(path) -> DesignSet:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], rows[1:]
    with_noise = header[-1] == "noise_var"
    d = len(header) - 1 - int(with_noise)
    pts = np.array([[float(v) for v in r[:d]] for r in data])
    obs = np.array([float(r[d]) for r in data])
    kn = np.diag([float(r[d + 1]) for r in data]) if with_noise else None
    return DesignSet(pts, obs, kn)


@dataclass(frozen=True)
class Prediction:
    """Pointwise prediction: mean, clamped error variance, and optionally
    the prediction weights for diagnostics."""

    mean: float
    variance: float
    weights: np.ndarray | None = None

    @property
    def sd(self) -> float:
        return float(np.sqrt(self.variance))


class KrigingModel:
    """Factorized intrinsic-Kriging model over a design set.

    Construction validates unisolvency (n >= q and full column rank of the
    polynomial constraint matrix) and LU-factorizes the dense saddle
    matrix once; every later prediction is a pair of triangular solves.
    """

    def __init__(self, design: DesignSet, covariance: GeneralizedCovariance,
                 basis: MonomialBasis, jitter: float = 0.0):
        if basis.degree < covariance.cpd_order:
            raise OrderMismatch(
                f"basis degree {basis.degree} below covariance CPD order "
                f"{covariance.cpd_order}"
            )
        if design.dimension != basis.dimension:
            raise ValueError("design and basis dimensions differ")
        self.design = design
        self.covariance = covariance
        self.basis = basis
        self.jitter = float(jitter)
        n, q = design.n, basis.q
        if n < q:
            raise SingularSystem(
                f"{n} points cannot be unisolvent for {q} basis functions"
            )
        P = basis_matrix(basis, design.points)  # (q, n)
        if np.linalg.matrix_rank(P) < q:
            raise SingularSystem("polynomial constraint matrix is rank deficient")
        K = gencov_matrix(covariance, design.points, design.points)
        if design.noise_cov is not None:
            K = K + design.noise_cov
        if self.jitter:
            K = K + self.jitter * np.eye(n)
        A = np.zeros((n + q, n + q))
        A[:n, :n] = K
        A[:n, n:] = P.T
        A[n:, :n] = P
        self._P = P
        self._A = A
        try:
            self._lu = lu_factor(A)
        except np.linalg.LinAlgError as e:  # pragma: no cover - rank caught above
            raise SingularSystem(str(e)) from e
        if not np.all(np.isfinite(self._lu[0])) or np.any(
            np.abs(np.diag(self._lu[0])) < 1e-300
        ):
            raise SingularSystem("saddle system is numerically singular")
        self.diagnostics = {"variance_clamps": 0}
        self._weights_memo = {}  # query-batch key -> (W, rhs), small FIFO

    @property
    def n(self) -> int:
        return self.design.n

    @property
    def q(self) -> int:
        return self.basis.q

    @property
    def system_matrix(self) -> np.ndarray:
        return self._A

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return lu_solve(self._lu, rhs)

    def _variance_tol(self) -> float:
        return 1e-9 * max(abs(self.covariance.k0), self.covariance.scale)

    def query_rhs(self, X):
        """Right-hand sides [k_x; p_x] for query rows X: (n+q, m)."""
        X = _as_points(X, self.design.dimension)
        Kx = gencov_matrix(self.covariance, self.design.points, X)  # (n, m)
        Px = basis_matrix(self.basis, X)  # (q, m)
        return np.vstack([Kx, Px])

    def weights(self, X):
        """Solved weight columns for query rows X, memoized for reuse
        across repeated batch queries (the SUR loop hits the same
        candidate set once per hypothetical point)."""
        X = _as_points(X, self.design.dimension)
        key = (X.shape, X.tobytes())
        hit = self._weights_memo.get(key)
        if hit is not None:
            return hit
        rhs = self.query_rhs(X)
        W = self.solve(rhs)
        if len(self._weights_memo) >= 8:
            self._weights_memo.pop(next(iter(self._weights_memo)))
        self._weights_memo[key] = (W, rhs)
        return W, rhs

    def _clamp_variance(self, var):
        var = np.asarray(var, dtype=float)
        neg = var < 0.0
        if np.any(neg):
            self.diagnostics["variance_clamps"] += int(np.count_nonzero(neg))
        return np.where(neg, 0.0, var)


def build_model(design: DesignSet, cov: GeneralizedCovariance,
                basis: MonomialBasis, jitter: float = 0.0) -> KrigingModel:
    """Assemble and factorize the intrinsic-Kriging system for a design."""
    return KrigingModel(design, cov, basis, jitter=jitter)


def predict_many(model: KrigingModel, X):
    """Vectorized prediction at query rows X: (means, variances)."""
    W, rhs = model.weights(X)
    n = model.n
    means = model.design.observations @ W[:n]
    variances = model.covariance.k0 - np.sum(W * rhs, axis=0)
    return means, model._clamp_variance(variances)


def predict(model: KrigingModel, x) -> Prediction:
    """Prediction at a single point, with the weight vector attached."""
    x = np.asarray(x, dtype=float).ravel()[None, :]
    W, rhs = model.weights(x)
    n = model.n
    lam = W[:n, 0]
    mean = float(lam @ model.design.observations)
    var = model.covariance.k0 - float(W[:, 0] @ rhs[:, 0])
    if var < 0.0:
        model.diagnostics["variance_clamps"] += 1
        var = 0.0
    return Prediction(mean=mean, variance=float(var), weights=lam.copy())


def add_point(model: KrigingModel, x_new, y_new: float) -> KrigingModel:
    """New model over n+1 points; the factorization is rebuilt, which for
    the small designs this library targets is cheaper to maintain than a
    rank-one update."""
    x_new = np.asarray(x_new, dtype=float).ravel()
    design = model.design.add(x_new, y_new)
    return KrigingModel(design, model.covariance, model.basis, jitter=model.jitter)


class HypotheticalUpdate:
    """Prediction structure after a hypothetical observation at ``x_new``.

    Exposes the fact that the updated error variance does not depend on
    the not-yet-known value z, while the updated mean is affine in z.
    Implemented by block elimination of the bordered saddle system, which
    costs one extra solve against the existing factorization and then
    O(1) work per (query, z) pair.
    """

    def __init__(self, model: KrigingModel, x_new):
        x_new = np.asarray(x_new, dtype=float).ravel()
        if model.design.is_noise_free:
            if cdist(model.design.points, x_new[None, :]).min() < DUPLICATE_TOL:
                raise DuplicatePoint(f"point {x_new} already in the design")
        self.model = model
        self.x_new = x_new
        b = model.query_rhs(x_new[None, :])[:, 0]  # [k_c; p_c]
        s = model.solve(b)
        sigma2 = model.covariance.k0 - float(b @ s)
        if sigma2 <= model._variance_tol():
            raise DegenerateVariance(
                "zero predictive variance at the hypothetical point"
            )
        self._b = b
        self._sigma2_new = sigma2
        self._mean_new = float(s[: model.n] @ model.design.observations)

    @property
    def variance_at_new(self) -> float:
        """Current-model predictive variance at the hypothetical point."""
        return self._sigma2_new

    @property
    def mean_at_new(self) -> float:
        """Current-model predictive mean at the hypothetical point."""
        return self._mean_new

    def affine_profile(self, X):
        """(intercept, slope, variance) arrays over query rows X.

        The updated mean at x given hypothetical value z is
        intercept(x) + slope(x) * z; the updated variance is z-free.
        """
        model = self.model
        W, rhs = model.weights(X)
        n = model.n
        mean0 = model.design.observations @ W[:n]
        var0 = model.covariance.k0 - np.sum(W * rhs, axis=0)
        X = _as_points(X, model.design.dimension)
        k_new = gencov_matrix(model.covariance, self.x_new[None, :], X)[0]
        cross = k_new - self._b @ W  # posterior covariance cov_n(x, x_new)
        slope = cross / self._sigma2_new
        intercept = mean0 - slope * self._mean_new
        var1 = model._clamp_variance(var0 - cross**2 / self._sigma2_new)
        return intercept, slope, var1

    def variance_profile(self, x) -> float:
        """sigma^2_{n+1}(x): updated variance, independent of the value z."""
        x = np.asarray(x, dtype=float).ravel()
        _, _, var = self.affine_profile(x[None, :])
        return float(var[0])

    def mean_update(self, x, z: float) -> float:
        """xi_hat_{n+1}(x) given the hypothetical observation value z."""
        x = np.asarray(x, dtype=float).ravel()
        a, b, _ = self.affine_profile(x[None, :])
        return float(a[0] + b[0] * z)


def hypothetical_update(model: KrigingModel, x_new) -> HypotheticalUpdate:
    """Variance profile and value-affine mean update for a candidate
    observation location, without committing an observation."""
    return HypotheticalUpdate(model, x_new)


def factorization_residual(model: KrigingModel) -> float:
    """Relative error between the LU-reconstructed and assembled saddle
    matrices; a construction-quality diagnostic."""
    lu, piv = model._lu
    L = np.tril(lu, -1) + np.eye(lu.shape[0])
    U = np.triu(lu)
    M = L @ U
    for i in range(len(piv) - 1, -1, -1):
        M[[i, piv[i]], :] = M[[piv[i], i], :]
    denom = np.linalg.norm(model._A)
    return float(np.linalg.norm(M - model._A) / denom) if denom else 0.0


def fill_distance(points, domain, n_probe: int = 4096) -> float:
    """h_n = sup over the domain of the distance to the nearest point.

    ``domain`` is either a (lower, upper) box pair, probed with a
    deterministic grid of about ``n_probe`` points, or an object with a
    ``probe_points(n)`` method (an input distribution), probed with
    quasi-random samples.
    """
    points = _as_points(points)
    if len(points) == 0:
        raise ValueError("fill distance needs at least one point")
    d = points.shape[1]
    if hasattr(domain, "probe_points"):
        probes = domain.probe_points(n_probe)
    else:
        lower, upper = (np.asarray(v, dtype=float).ravel() for v in domain)
        m = max(3, int(round(n_probe ** (1.0 / d))))
        m += 1 - m % 2  # odd count keeps box midpoints on the probe grid
        axes = [np.linspace(lower[i], upper[i], m) for i in range(d)]
        mesh = np.meshgrid(*axes, indexing="ij")
        probes = np.stack([ax.ravel() for ax in mesh], axis=1)
    dists = cdist(probes, points).min(axis=1)
    return float(dists.max())
