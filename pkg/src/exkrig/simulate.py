"""Gaussian-process sample paths on finite grids.

Unconditional paths serve as test functions; conditional paths (given
observations) power the Monte Carlo selection oracle and the empirical
convergence experiments.

For a positive-definite covariance the grid Gram matrix is factorized
directly.  The intrinsic-only families (power-linear, cubic, polynomial)
have no pointwise covariance, so a representation is simulated instead:
the process is pinned to zero at q unisolvent grid points t_a via the
measure delta_x - sum_a L_a(x) delta_{t_a}, whose quadratic form is
non-negative by conditional positive definiteness.  Representations
differ only by a polynomial of basis degree, which intrinsic Kriging
filters out, so any pinned representation (plus a user trend) is as good
as another.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.linalg import qr
from scipy.spatial.distance import cdist

from .covariance import (
    GeneralizedCovariance,
    MonomialBasis,
    basis_matrix,
    covariance_to_text,
    gencov_matrix,
)
from .errors import SingularSystem
from .kriging import KrigingModel, _as_points, predict_many
from .seeding import rng_from

DEFAULT_JITTER = 1e-10


@dataclass(frozen=True)
class PathSample:
    """A sample-path realization on a finite grid, with enough provenance
    to reproduce it."""

    grid: np.ndarray
    values: np.ndarray
    provenance: dict

    def __post_init__(self):
        if len(self.grid) != len(self.values):
            raise ValueError("grid and values must have the same length")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("path values must be finite")


def _pin_indices(basis: MonomialBasis, grid: np.ndarray) -> np.ndarray:
    """q grid indices whose basis-evaluation submatrix is well conditioned
    (QR column pivoting), used to pin intrinsic representations."""
    P = basis_matrix(basis, grid)  # (q, n)
    _, _, piv = qr(P, pivoting=True, mode="economic")
    idx = piv[: basis.q]
    sub = P[:, idx]
    if np.linalg.matrix_rank(sub) < basis.q:
        raise SingularSystem("grid is not unisolvent for the basis")
    return np.sort(idx)


def representation_covariance(cov: GeneralizedCovariance, basis: MonomialBasis,
                              grid: np.ndarray):
    """A valid (positive semi-definite) covariance matrix on the grid for
    some representation of the intrinsic process with generalized
    covariance ``cov``.  Returns (matrix, pin_indices); pin_indices is
    None when the family is an ordinary covariance."""
    grid = _as_points(grid)
    K = gencov_matrix(cov, grid, grid)
    if cov.family == "matern":
        return K, None
    pins = _pin_indices(basis, grid)
    B = basis_matrix(basis, grid[pins])  # (q, q)
    Pg = basis_matrix(basis, grid)  # (q, n)
    L = np.linalg.solve(B, Pg)  # Lagrange weights, (q, n)
    Kp = K[pins][:, pins]  # (q, q)
    Kpg = K[pins, :]  # (q, n)
    C = K - L.T @ Kpg - Kpg.T @ L + L.T @ Kp @ L
    return 0.5 * (C + C.T), pins


def _grid_factor(cov, basis, grid, jitter):
    C, pins = representation_covariance(cov, basis, grid)
    try:
        root = np.linalg.cholesky(C + jitter * np.eye(len(C)))
    except np.linalg.LinAlgError as e:
        raise SingularSystem(
            "covariance factorization failed (near-duplicate grid points?); "
            "try a larger jitter"
        ) from e
    return root, pins


def sample_path(cov: GeneralizedCovariance, basis: MonomialBasis, trend_coeffs,
                grid, seed: int, jitter: float = DEFAULT_JITTER) -> PathSample:
    """One seeded sample path: polynomial trend plus a factorized-
    covariance transform of standard normal draws."""
    grid = _as_points(grid)
    trend_coeffs = np.zeros(basis.q) if trend_coeffs is None else (
        np.asarray(trend_coeffs, dtype=float).ravel())
    if trend_coeffs.shape != (basis.q,):
        raise ValueError(f"trend_coeffs must have length {basis.q}")
    root, pins = _grid_factor(cov, basis, grid, jitter)
    rng = rng_from(seed, "sample-path")
    z = rng.standard_normal(len(grid))
    trend = basis_matrix(basis, grid).T @ trend_coeffs
    values = trend + root @ z
    return PathSample(
        grid=grid,
        values=values,
        provenance={
            "covariance": covariance_to_text(cov),
            "basis_degree": basis.degree,
            "trend_coeffs": tuple(trend_coeffs),
            "seed": seed,
            "jitter": jitter,
            "pin_indices": None if pins is None else tuple(int(i) for i in pins),
        },
    )


def sample_path_matrix(cov: GeneralizedCovariance, basis: MonomialBasis,
                       grid, n_paths: int, seed: int,
                       jitter: float = DEFAULT_JITTER) -> np.ndarray:
    """(n_grid, n_paths) matrix of independent zero-trend sample paths
    sharing one covariance factorization; column j equals column j for
    any larger n_paths with the same seed."""
    grid = _as_points(grid)
    root, _ = _grid_factor(cov, basis, grid, jitter)
    rng = rng_from(seed, "path-matrix")
    # draw path-by-path so a prefix of columns is seed-stable
    return root @ rng.standard_normal((n_paths, len(grid))).T


def sample_conditional_paths(model: KrigingModel, grid, m: int,
                             seed: int, jitter: float = DEFAULT_JITTER):
    """m paths conditioned on the model's (noise-free) observations.

    Conditioning by Kriging: each copy is the predictor plus the residual
    of an unconditional path around its own Kriging interpolant,
    zeta(x) = xi_hat(x) + [xi_sim(x) - xi_hat_sim(x)], which passes
    through the observations exactly and has the right conditional first
    two moments.
    """
    if not model.design.is_noise_free:
        raise ValueError("conditional simulation requires a noise-free model")
    grid = _as_points(grid, model.design.dimension)
    design_pts = model.design.points
    # simulate on design + grid, reusing design rows for coinciding grid rows
    dup = cdist(grid, design_pts)
    nearest = dup.argmin(axis=1)
    is_dup = dup[np.arange(len(grid)), nearest] < 1e-12
    fresh = grid[~is_dup]
    union = np.vstack([design_pts, fresh])
    root, _ = _grid_factor(model.covariance, model.basis, union, jitter)
    rng = rng_from(seed, "conditional-paths")
    Z = rng.standard_normal((len(union), m))
    sims = root @ Z  # (n_union, m) unconditional, zero trend
    n = model.n
    sim_at_design = sims[:n]  # (n, m)
    grid_rows = np.empty((len(grid), m))
    grid_rows[~is_dup] = sims[n:]
    grid_rows[is_dup] = sim_at_design[nearest[is_dup]]
    W, _ = model.weights(grid)
    lam = W[:n]  # (n, n_grid) prediction weights
    mean_n = model.design.observations @ lam  # predictor on the grid
    sim_pred = lam.T @ sim_at_design  # (n_grid, m) interpolants of the sims
    values = mean_n[:, None] + grid_rows - sim_pred
    base = {
        "covariance": covariance_to_text(model.covariance),
        "basis_degree": model.basis.degree,
        "conditioned_on": n,
        "seed": seed,
        "jitter": jitter,
    }
    return [
        PathSample(grid=grid, values=values[:, i],
                   provenance={**base, "copy": i})
        for i in range(m)
    ]


def path_interpolator(path: PathSample):
    """Piecewise-linear interpolant of a 1-D path, constant beyond the
    grid ends; a convenient everywhere-defined test function."""
    if path.grid.shape[1] != 1:
        raise ValueError("interpolation is supported for 1-D paths only")
    x = path.grid[:, 0]
    order = np.argsort(x)
    xs, ys = x[order], path.values[order]

    def f(X):
        X = _as_points(X, 1)
        return np.interp(X[:, 0], xs, ys)

    return f


def paths_to_csv(paths, path) -> None:
    """Grid coordinates plus one value column per path copy."""
    if not paths:
        raise ValueError("no paths to export")
    grid = paths[0].grid
    d = grid.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x_{i + 1}" for i in range(d)]
                   + [f"value_{j + 1}" for j in range(len(paths))])
        for i in range(len(grid)):
            w.writerow([repr(v) for v in grid[i]]
                       + [repr(p.values[i]) for p in paths])
