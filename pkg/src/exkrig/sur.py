"""Stepwise uncertainty reduction: pick the next evaluation point to
shrink an upper bound on the mean-square error of the excursion-volume
estimate.

For a candidate x the criterion averages, over a fixed mu-sample
(y_1..y_l), the square root of the quantized expectation of the
misclassification proxy after a hypothetical observation at x:

    (1/l) sum_i ( sum_j P{bin j} * upsilon_after(y_i; z_j) )^(1/2)

where z_j are the levels of an equiprobable quantizer of the predictive
distribution at x, the updated mean at y_i is affine in z_j and the
updated variance does not depend on it.  The square root sits inside the
average over i (Minkowski form).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.stats import norm

from .covariance import GeneralizedCovariance, MonomialBasis
from .errors import DegenerateVariance, DuplicatePoint, ExhaustedCandidates
from .excursion import (
    ExcursionEstimate,
    InputDistribution,
    gaussian_tail,
    plugin_volume,
)
from .kriging import (
    DesignSet,
    KrigingModel,
    Prediction,
    add_point,
    build_model,
    hypothetical_update,
    predict,
    predict_many,
    _as_points,
)
from .seeding import derived_seed, rng_from
from .simulate import sample_conditional_paths

EXCLUSION_TOL = 1e-12


@dataclass(frozen=True)
class Quantizer:
    """Q strictly increasing levels with Q-1 interleaved bin edges."""

    levels: np.ndarray
    bin_edges: np.ndarray

    def __post_init__(self):
        levels = np.asarray(self.levels, dtype=float)
        edges = np.asarray(self.bin_edges, dtype=float)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "bin_edges", edges)
        if len(levels) < 2:
            raise ValueError("a quantizer needs at least two levels")
        if np.any(np.diff(levels) <= 0):
            raise ValueError("levels must be strictly increasing")
        if len(edges) != len(levels) - 1:
            raise ValueError("need exactly Q-1 bin edges")
        if np.any(edges <= levels[:-1]) or np.any(edges >= levels[1:]):
            raise ValueError("edges must interleave the levels")

    @property
    def size(self) -> int:
        return len(self.levels)


def make_quantizer(pred: Prediction, n_levels: int) -> Quantizer:
    """Equiprobable quantizer of the predictive Gaussian: the levels are
    the medians of Q equal-probability bins, so every bin carries mass
    exactly 1/Q."""
    if n_levels < 2:
        raise ValueError("n_levels must be >= 2")
    sd = float(np.sqrt(pred.variance))
    if sd == 0.0:
        raise DegenerateVariance("cannot quantize a zero-variance prediction")
    j = np.arange(1, n_levels + 1)
    levels = pred.mean + sd * norm.ppf((j - 0.5) / n_levels)
    edges = pred.mean + sd * norm.ppf(np.arange(1, n_levels) / n_levels)
    return Quantizer(levels=levels, bin_edges=edges)


def quantize(quantizer: Quantizer, h):
    """Map h onto the level grid: z_1 + sum_i (z_i - z_{i-1}) 1{h >= z_i},
    i.e. the largest level not exceeding h (clamped to z_1 below).
    Idempotent and monotone non-decreasing."""
    h = np.asarray(h, dtype=float)
    idx = np.searchsorted(quantizer.levels, h, side="right") - 1
    idx = np.clip(idx, 0, quantizer.size - 1)
    out = quantizer.levels[idx]
    return float(out) if np.isscalar(h) or h.ndim == 0 else out


def bin_probabilities(pred: Prediction, quantizer: Quantizer) -> np.ndarray:
    """Probability that Gaussian(mean, variance) falls in each of the Q
    bins delimited by the quantizer edges; sums to one."""
    sd = float(np.sqrt(pred.variance))
    if sd == 0.0:
        raise DegenerateVariance("bin probabilities need positive variance")
    edges = np.concatenate([[-np.inf], quantizer.bin_edges, [np.inf]])
    tails = gaussian_tail((edges - pred.mean) / sd)
    return np.maximum(tails[:-1] - tails[1:], 0.0)


class SurState:
    """Mutable state of the sequential loop: the current model, the fixed
    candidate set drawn from mu, the threshold, the quantizer size, the
    evaluation history and the indices of exhausted candidates."""

    def __init__(self, model: KrigingModel, candidates, threshold: float,
                 n_levels: int):
        if n_levels < 2:
            raise ValueError("n_levels must be >= 2")
        self.model = model
        self.candidates = _as_points(candidates, model.design.dimension)
        self.threshold = float(threshold)
        self.n_levels = int(n_levels)
        self.history = []
        self.excluded = set()
        for p in model.design.points:
            self._exclude_near(p)

    @property
    def n_candidates(self) -> int:
        return len(self.candidates)

    def active_indices(self) -> np.ndarray:
        return np.array(
            [i for i in range(self.n_candidates) if i not in self.excluded],
            dtype=int,
        )

    def _exclude_near(self, point) -> None:
        diff = self.candidates - np.asarray(point, dtype=float)[None, :]
        close = np.flatnonzero(np.linalg.norm(diff, axis=1) < EXCLUSION_TOL)
        self.excluded.update(int(i) for i in close)

    def observe(self, point, value: float, criterion_value: float) -> None:
        """Commit an evaluation: grow the model, record history, retire
        matching candidates."""
        self.model = add_point(self.model, point, value)
        self.history.append(
            (np.asarray(point, dtype=float).copy(), float(value),
             float(criterion_value))
        )
        self._exclude_near(point)


def criterion(state: SurState, candidate) -> float:
    """The quantized uncertainty-reduction criterion at one candidate.

    Returns +inf for a candidate with zero predictive variance (a known
    point carries no information)."""
    candidate = np.asarray(candidate, dtype=float).ravel()
    pred = predict(state.model, candidate)
    if pred.variance <= 0.0:
        return np.inf
    quant = make_quantizer(pred, state.n_levels)
    probs = bin_probabilities(pred, quant)
    try:
        hyp = hypothetical_update(state.model, candidate)
    except (DuplicatePoint, DegenerateVariance):
        return np.inf
    intercept, slope, var = hyp.affine_profile(state.candidates)
    sd = np.sqrt(var)
    means = intercept[:, None] + np.outer(slope, quant.levels)  # (l, Q)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.abs(state.threshold - means) / sd[:, None]
    upsilon = np.where(sd[:, None] > 0.0, gaussian_tail(t), 0.0)
    inner = upsilon @ probs
    return float(np.mean(np.sqrt(np.maximum(inner, 0.0))))


def select_next(state: SurState):
    """Argmin of the criterion over unevaluated candidates (ties broken by
    the lowest index), plus the full criterion profile for diagnostics."""
    active = state.active_indices()
    if len(active) == 0:
        raise ExhaustedCandidates("every candidate has been evaluated")
    profile = np.full(state.n_candidates, np.inf)
    for i in active:
        profile[i] = criterion(state, state.candidates[i])
    best = int(np.argmin(profile))
    return state.candidates[best].copy(), profile


@dataclass
class SurConfig:
    """Configuration of one sequential run."""

    threshold: float
    covariance: GeneralizedCovariance
    basis: MonomialBasis
    mu: InputDistribution
    n_levels: int = 20
    n_candidates: int = 800
    n_max: int = 10
    seed: int = 0
    stop_below: float | None = None
    volume_samples: int | None = None
    jitter: float = 0.0
    record_profiles: bool = False


@dataclass
class SurStep:
    """One row of a run trajectory."""

    n: int
    point: np.ndarray | None
    value: float | None
    criterion_min: float | None
    volume: ExcursionEstimate


@dataclass
class SurRun:
    steps: list
    state: SurState
    profiles: list = field(default_factory=list)


def run_sur(evaluator, initial_design: DesignSet, config: SurConfig) -> SurRun:
    """The full loop: select, evaluate, grow the model, re-estimate the
    plug-in volume; stops at ``n_max`` total evaluations or when the
    criterion minimum drops below ``stop_below``.

    The plug-in volume is re-estimated each iteration on one fixed,
    seed-derived Monte Carlo sample so that successive estimates differ
    only through the model.  Deterministic given the seed.
    """
    model = build_model(initial_design, config.covariance, config.basis,
                        jitter=config.jitter)
    cand = config.mu.sample(config.n_candidates,
                            rng_from(config.seed, "sur-candidates"))
    state = SurState(model, cand, config.threshold, config.n_levels)
    n_vol = config.volume_samples or config.n_candidates
    vol_seed = derived_seed(config.seed, "sur-plugin-volume")
    run = SurRun(steps=[], state=state)
    run.steps.append(SurStep(
        n=model.n, point=None, value=None, criterion_min=None,
        volume=plugin_volume(model, config.threshold, config.mu, n_vol,
                             vol_seed),
    ))
    while state.model.n < config.n_max:
        try:
            point, profile = select_next(state)
        except ExhaustedCandidates:
            break
        crit_min = float(profile.min())
        if not np.isfinite(crit_min):
            break  # nothing informative left to evaluate
        if config.record_profiles:
            run.profiles.append(profile)
        value = float(np.asarray(evaluator(point[None, :])).ravel()[0])
        state.observe(point, value, crit_min)
        run.steps.append(SurStep(
            n=state.model.n, point=point, value=value, criterion_min=crit_min,
            volume=plugin_volume(state.model, config.threshold, config.mu,
                                 n_vol, vol_seed),
        ))
        if config.stop_below is not None and crit_min < config.stop_below:
            break
    return run


def trajectory_to_csv(run: SurRun, path) -> None:
    """iteration, x_1..x_d, f, criterion_min, volume, std_error."""
    d = run.state.candidates.shape[1]
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration"] + [f"x_{i + 1}" for i in range(d)]
                   + ["f", "criterion_min", "volume", "std_error"])
        for it, s in enumerate(run.steps):
            xs = ([""] * d if s.point is None
                  else [repr(float(v)) for v in s.point])
            w.writerow(
                [it] + xs
                + ["" if s.value is None else repr(s.value),
                   "" if s.criterion_min is None else repr(s.criterion_min),
                   repr(s.volume.volume), repr(s.volume.std_error)]
            )


def criterion_oracle_mc(state: SurState, candidate, m: int, seed: int,
                        z_nodes: int = 16) -> float:
    """Monte Carlo reference for the criterion, for validation on small
    instances: average over m conditional residual paths of the squared
    change in discrete excursion volume over the candidate set, with the
    unknown observation value integrated by Gauss-Hermite quadrature over
    its predictive law.  Deliberately rebuilds a model per quadrature node
    instead of reusing the fast update path."""
    candidate = np.asarray(candidate, dtype=float).ravel()
    model = state.model
    S = state.candidates
    u = state.threshold
    pred_c = predict(model, candidate)
    sd_c = float(np.sqrt(pred_c.variance))
    if sd_c > 0.0:
        t, w = hermgauss(z_nodes)
        z_values = pred_c.mean + sd_c * np.sqrt(2.0) * t
        z_weights = w / np.sqrt(np.pi)
        aug = model.design.add(candidate, 0.0)
        node_models = [add_point(model, candidate, z) for z in z_values]
    else:
        z_weights = np.array([1.0])
        aug = model.design
        node_models = [model]
    zero_design = DesignSet(aug.points, np.zeros(aug.n))
    zero_model = build_model(zero_design, model.covariance, model.basis,
                             jitter=model.jitter)
    paths = sample_conditional_paths(zero_model, S, m, seed)
    residuals = np.column_stack([p.values for p in paths])  # (l, m)
    total = 0.0
    for wk, node_model in zip(z_weights, node_models):
        mean_s = predict_many(node_model, S)[0]
        vol_pred = float(np.mean(mean_s >= u))
        vols = np.mean(mean_s[:, None] + residuals >= u, axis=0)
        total += wk * float(np.mean((vols - vol_pred) ** 2))
    return total
