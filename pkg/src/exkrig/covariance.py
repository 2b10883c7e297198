"""Stationary generalized covariances and polynomial mean bases.

A generalized covariance of order ``l`` is a symmetric function ``k(h)``
whose quadratic form is non-negative on every finite-support measure that
annihilates all polynomials of degree <= ``l``.  Ordinary covariances
(Matern) have order 0; the power-linear and cubic radial families are
intrinsically stationary only, which is exactly what intrinsic Kriging
needs a polynomial mean filter for.

All model objects here are immutable after construction and safe for
shared concurrent reads.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space
from scipy.spatial.distance import cdist

from .errors import OrderMismatch
from .seeding import rng_from

FAMILIES = ("matern", "power_linear", "cubic", "polynomial_gc")

MATERN_SMOOTHNESS = (0.5, 1.5, 2.5)


@dataclass(frozen=True)
class GeneralizedCovariance:
    """A stationary generalized covariance ``k(h)``.

    Parameters
    ----------
    family : str
        One of ``matern``, ``power_linear``, ``cubic``, ``polynomial_gc``.
    params : tuple of float
        Family parameters; see the factory functions below.
    cpd_order : int
        Minimal polynomial degree ``l`` such that the quadratic form of
        ``k`` is non-negative on measures annihilating degree-<=l
        polynomials.
    spectral_nu : float or None
        Algebraic decay exponent of the spectral density when the family
        has one (Matern); ``None`` otherwise.
    """

    family: str
    params: tuple
    cpd_order: int
    spectral_nu: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown covariance family {self.family!r}")
        if self.spectral_nu is not None and self.spectral_nu <= 0:
            raise ValueError("spectral_nu must be positive when present")

    @property
    def scale(self) -> float:
        """Magnitude of the covariance, used for relative tolerances."""
        if self.family == "polynomial_gc":
            return float(max(self.params))
        return float(self.params[0])

    @property
    def k0(self) -> float:
        """k(0); zero for the intrinsic-only families."""
        return float(self.k_radial(0.0))

    def k_radial(self, r):
        """Evaluate k at Euclidean distance(s) ``r`` (scalar or array)."""
        r = np.asarray(r, dtype=float)
        if self.family == "matern":
            scale, length, smoothness = self.params
            t = r / length
            if smoothness == 0.5:
                val = np.exp(-t)
            elif smoothness == 1.5:
                a = math.sqrt(3.0) * t
                val = (1.0 + a) * np.exp(-a)
            elif smoothness == 2.5:
                a = math.sqrt(5.0) * t
                val = (1.0 + a + a * a / 3.0) * np.exp(-a)
            else:  # pragma: no cover - rejected at construction
                raise ValueError("unsupported Matern smoothness")
            return scale * val
        if self.family == "power_linear":
            return -self.params[0] * r
        if self.family == "cubic":
            return self.params[0] * r**3
        # polynomial generalized covariance: sum_s (-1)^(s+1) b_s r^(2s+1)
        out = np.zeros_like(r)
        for s, b in enumerate(self.params):
            if b != 0.0:
                out += (-1.0) ** (s + 1) * b * r ** (2 * s + 1)
        return out


def matern(scale=1.0, length=1.0, smoothness=1.5, dim=1):
    """Matern covariance with half-integer smoothness 1/2, 3/2 or 5/2.

    ``dim`` fixes the ambient dimension so that the spectral decay
    exponent ``nu = smoothness + dim/2`` can be stored as a number.
    """
    if scale <= 0 or length <= 0:
        raise ValueError("scale and length must be positive")
    if smoothness not in MATERN_SMOOTHNESS:
        raise ValueError(f"smoothness must be one of {MATERN_SMOOTHNESS}")
    if dim < 1:
        raise ValueError("dim must be a positive integer")
    return GeneralizedCovariance(
        family="matern",
        params=(float(scale), float(length), float(smoothness)),
        cpd_order=0,
        spectral_nu=float(smoothness) + dim / 2.0,
    )


def power_linear(scale=1.0):
    """k(h) = -scale * ||h||, the classical order-0 generalized covariance."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    return GeneralizedCovariance("power_linear", (float(scale),), cpd_order=0)


def cubic(scale=1.0):
    """k(h) = scale * ||h||^3, conditionally positive definite of order 1."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    return GeneralizedCovariance("cubic", (float(scale),), cpd_order=1)


def polynomial_gc(coeffs):
    """Polynomial generalized covariance sum_s (-1)^(s+1) b_s ||h||^(2s+1).

    ``coeffs`` are the non-negative b_s for s = 0..S; the CPD order is the
    largest s with b_s > 0.
    """
    coeffs = tuple(float(b) for b in coeffs)
    if not coeffs or any(b < 0 for b in coeffs) or all(b == 0 for b in coeffs):
        raise ValueError("coeffs must be non-negative with at least one positive")
    order = max(s for s, b in enumerate(coeffs) if b > 0)
    return GeneralizedCovariance("polynomial_gc", coeffs, cpd_order=order)


def eval_gencov(model: GeneralizedCovariance, h) -> float:
    """k(h) for a single lag vector (or scalar in 1-D)."""
    h = np.atleast_1d(np.asarray(h, dtype=float))
    if not np.all(np.isfinite(h)):
        raise ValueError("lag vector must be finite")
    return float(model.k_radial(np.linalg.norm(h)))


def gencov_matrix(model: GeneralizedCovariance, X, Y) -> np.ndarray:
    """Matrix of k(x_i - y_j) for rows of X (n,d) and Y (m,d)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    return model.k_radial(cdist(X, Y))


def monomial_exponents(dimension: int, degree: int):
    """Multi-indexes |i| <= degree in graded lexicographic order.

    Grades run 0..degree; within a grade, tuples are in descending
    lexicographic order, so in 2-D degree 1 the order is
    (0,0), (1,0), (0,1) and evaluation starts with the constant 1.
    """
    exps = []
    for g in range(degree + 1):
        grade = [
            e
            for e in itertools.product(range(g, -1, -1), repeat=dimension)
            if sum(e) == g
        ]
        grade.sort(reverse=True)
        exps.extend(grade)
    return tuple(exps)


@dataclass(frozen=True)
class MonomialBasis:
    """All monomials x^i with |i| <= degree in dimension d.

    ``q = binomial(degree + d, d)`` basis functions; the evaluation order
    is fixed (graded lexicographic) so matrix layouts are deterministic.
    """

    dimension: int
    degree: int

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if self.degree < 0:
            raise ValueError("degree must be >= 0")

    @property
    def exponents(self):
        return monomial_exponents(self.dimension, self.degree)

    @property
    def q(self) -> int:
        return math.comb(self.degree + self.dimension, self.dimension)


def eval_basis(basis: MonomialBasis, x) -> np.ndarray:
    """Vector of all monomials at one point, length q, constant first."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (basis.dimension,):
        raise ValueError(f"expected a point of dimension {basis.dimension}")
    return basis_matrix(basis, x[None, :])[:, 0]


def basis_matrix(basis: MonomialBasis, X) -> np.ndarray:
    """q x n matrix of monomial values at the rows of X (n,d)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    exps = np.asarray(basis.exponents)  # (q, d)
    # power then product over coordinates; 0**0 == 1 handles the constant
    return np.prod(X[None, :, :] ** exps[:, None, :], axis=2)


@dataclass(frozen=True)
class CpdReport:
    """Outcome of a randomized conditional-positive-definiteness check."""

    passed: bool
    min_quadratic_form: float
    tolerance: float
    n_trials: int


def check_cpd(
    model: GeneralizedCovariance,
    basis: MonomialBasis,
    n_trials: int = 100,
    n_points: int = 30,
    rng_seed: int = 0,
) -> CpdReport:
    """Randomized check that k is CPD at the basis degree.

    For each trial, draws a random point set, projects a random coefficient
    vector onto the null space of the basis-evaluation matrix (so the
    measure annihilates all basis polynomials) and evaluates the quadratic
    form lambda' K lambda.  Returns a failure report, not an exception,
    if the form dips below -tolerance.
    """
    if basis.degree < model.cpd_order:
        raise OrderMismatch(
            f"basis degree {basis.degree} below CPD order {model.cpd_order}"
        )
    rng = rng_from(rng_seed, "cpd-check")
    worst = np.inf
    tol = 0.0
    for _ in range(n_trials):
        pts = rng.uniform(-1.0, 1.0, size=(n_points, basis.dimension))
        P = basis_matrix(basis, pts)
        N = null_space(P)
        if N.shape[1] == 0:
            continue
        w = rng.standard_normal(N.shape[1])
        lam = N @ w
        lam /= np.linalg.norm(lam)
        K = gencov_matrix(model, pts, pts)
        form = float(lam @ K @ lam)
        tol = max(tol, 1e-9 * max(model.scale, float(np.abs(K).max())))
        worst = min(worst, form)
    return CpdReport(
        passed=bool(worst >= -tol),
        min_quadratic_form=worst,
        tolerance=tol,
        n_trials=n_trials,
    )


def covariance_to_text(model: GeneralizedCovariance) -> str:
    """Serialize as 'family p1 p2 ...' with decimal-text numbers."""
    parts = [model.family] + [repr(float(p)) for p in model.params]
    if model.family == "matern":
        # dim is recoverable from spectral_nu = smoothness + dim/2
        dim = int(round(2 * (model.spectral_nu - model.params[2])))
        parts.append(repr(dim))
    return " ".join(parts)


def covariance_from_text(text: str) -> GeneralizedCovariance:
    """Inverse of :func:`covariance_to_text`."""
    parts = text.split()
    if not parts:
        raise ValueError("empty covariance description")
    family, raw = parts[0], [float(p) for p in parts[1:]]
    if family == "matern":
        if len(raw) != 4:
            raise ValueError("matern needs: scale length smoothness dim")
        return matern(raw[0], raw[1], raw[2], dim=int(raw[3]))
    if family == "power_linear":
        return power_linear(*raw)
    if family == "cubic":
        return cubic(*raw)
    if family == "polynomial_gc":
        return polynomial_gc(raw)
    raise ValueError(f"unknown covariance family {family!r}")
