"""Expected-improvement acquisition and its maximisation over the space.

Everything is written in minimisation form: improvement means scoring below
the incumbent. EI and its gradient are analytic; maximisation runs batched
projected gradient ascent from the best of a seeded candidate sweep, then
snaps discrete dimensions and re-scores.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from boffin._validation import check_unit_coords
from boffin.gp import GaussianProcess
from boffin.space import Configuration, SearchSpace

# Seeded search budget: m random candidates plus one perturbed copy of every
# training input, then ascent from the top starts.
CANDIDATES_PER_DIM = 512
N_ASCENT_STARTS = 10
MAX_ASCENT_ITER = 100
PERTURB_SD = 0.05
_INITIAL_STEP = 0.1
_MIN_STEP = 1e-8

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class Incumbent:
    """Best evaluation seen so far (lower is better).

    Attributes:
        best_score: Minimum score over the history.
        best_config: Configuration achieving it.
        trial_index: Earliest trial index achieving the minimum.
    """

    best_score: float
    best_config: Configuration
    trial_index: int


@dataclass(frozen=True)
class Proposal:
    """Next configuration to evaluate.

    Attributes:
        u: Snapped unit-hypercube coordinates.
        config: decode(u), the discrete-feasible configuration.
        ei_value: Expected improvement re-scored at the snapped point.
    """

    u: np.ndarray
    config: Configuration
    ei_value: float


def _phi(z):
    return _INV_SQRT_2PI * np.exp(-0.5 * z * z)


def expected_improvement(mean, variance, incumbent_score):
    """Analytic expected improvement below the incumbent.

    For sigma > 0 returns (y' - mu) Phi(z) + sigma phi(z) with
    z = (y' - mu) / sigma; for sigma = 0 returns max(y' - mu, 0).

    Args:
        mean: Posterior mean(s), scalar or array.
        variance: Posterior variance(s), non-negative, same shape.
        incumbent_score: Best score so far, y'.

    Returns:
        EI value(s), always non-negative; scalar inputs give a float.
    """
    mean_arr = np.asarray(mean, dtype=float)
    var_arr = np.asarray(variance, dtype=float)
    if np.any(var_arr < 0.0):
        raise ValueError("variance must be non-negative")
    improve = incumbent_score - mean_arr
    sigma = np.sqrt(var_arr)
    safe_sigma = np.where(sigma > 0.0, sigma, 1.0)
    z = improve / safe_sigma
    ei = np.where(
        sigma > 0.0,
        improve * special.ndtr(z) + sigma * _phi(z),
        np.maximum(improve, 0.0),
    )
    ei = np.maximum(ei, 0.0)
    if np.isscalar(mean) or (np.ndim(mean) == 0 and np.ndim(variance) == 0):
        return float(ei)
    return ei


def _ei_and_grad(model: GaussianProcess, incumbent_score: float, U: np.ndarray):
    """Batched EI and its coordinate gradient via the posterior gradients.

    Rows where the clamped variance is exactly zero get a zero gradient.
    """
    mean, var, dmean, dvar = model.posterior_gradients(U)
    improve = incumbent_score - mean
    sigma = np.sqrt(var)
    pos = sigma > 0.0
    safe_sigma = np.where(pos, sigma, 1.0)
    z = improve / safe_sigma
    cdf = special.ndtr(z)
    pdf = _phi(z)
    ei = np.where(pos, improve * cdf + sigma * pdf, np.maximum(improve, 0.0))
    ei = np.maximum(ei, 0.0)
    # dEI/dx = -Phi(z) dmu/dx + phi(z) dsigma/dx, dsigma/dx = dvar/dx / (2 sigma)
    grad = -cdf[:, None] * dmean + (pdf / (2.0 * safe_sigma))[:, None] * dvar
    grad[~pos] = 0.0
    return ei, grad


def ei_gradient(model: GaussianProcess, incumbent_score: float, u) -> np.ndarray:
    """Gradient of EI(predict(u)) with respect to the coordinates of u.

    Args:
        model: Fitted surrogate.
        incumbent_score: Best score so far.
        u: Query point of shape (d,).

    Returns:
        Gradient array of shape (d,); zero where the variance clamps to 0.
    """
    arr = check_unit_coords(u, model.X_.shape[1])
    if arr.ndim != 1:
        raise ValueError(f"expected a single point, got shape {arr.shape}")
    _, grad = _ei_and_grad(model, incumbent_score, arr[None, :])
    return grad[0]


def _ascend(model: GaussianProcess, incumbent_score: float, starts: np.ndarray) -> np.ndarray:
    """Projected gradient ascent with per-row backtracking, batched.

    Each row keeps its own step size: a step that improves EI is kept and
    the step grows, otherwise the step halves; rows stop below the minimum
    step. At most MAX_ASCENT_ITER sweeps.
    """
    U = starts.copy()
    ei, grad = _ei_and_grad(model, incumbent_score, U)
    step = np.full(len(U), _INITIAL_STEP)
    for _ in range(MAX_ASCENT_ITER):
        active = step >= _MIN_STEP
        if not np.any(active):
            break
        trial = np.clip(U + step[:, None] * grad, 0.0, 1.0)
        trial_ei, trial_grad = _ei_and_grad(model, incumbent_score, trial)
        improved = active & (trial_ei > ei)
        U[improved] = trial[improved]
        ei[improved] = trial_ei[improved]
        grad[improved] = trial_grad[improved]
        step[improved] *= 2.0
        step[active & ~improved] *= 0.5
    return U


def maximize(
    model: GaussianProcess,
    space: SearchSpace,
    incumbent: Incumbent,
    rng_seed,
    exclude=None,
) -> Proposal:
    """Propose the next configuration by maximising expected improvement.

    Scores a seeded sweep of snapped candidates (uniform draws plus
    perturbed copies of the training inputs), ascends from the best starts,
    snaps the endpoints, and returns the best point of the combined pool,
    ties broken by the lowest pool index.

    Args:
        model: Fitted surrogate over the space's encoding.
        space: Search space; its dimension must match the model.
        incumbent: Current best evaluation.
        rng_seed: Integer seed, or a numpy Generator.
        exclude: Optional iterable of previously evaluated configurations.
            If the best point duplicates one of them exactly, the best
            non-duplicate pool entry is returned instead (the duplicate
            itself only when the whole pool is excluded).

    Returns:
        The proposal with its EI re-scored at the snapped coordinates.
    """
    d = space.dimension
    if model.X_.shape[1] != d:
        raise ValueError("model dimension does not match space dimension")
    if isinstance(rng_seed, np.random.Generator):
        rng = rng_seed
    else:
        rng = np.random.default_rng(rng_seed)
    uniform = rng.random((CANDIDATES_PER_DIM * d, d))
    perturbed = np.clip(
        model.X_ + rng.normal(0.0, PERTURB_SD, size=model.X_.shape), 0.0, 1.0
    )
    candidates = space.snap(np.vstack([uniform, perturbed]))
    mean, var = model.predict(candidates, return_var=True)
    ei_cand = expected_improvement(mean, var, incumbent.best_score)
    starts = candidates[np.argsort(-ei_cand, kind="stable")[:N_ASCENT_STARTS]]
    endpoints = space.snap(_ascend(model, incumbent.best_score, starts))
    mean_end, var_end = model.predict(endpoints, return_var=True)
    ei_end = expected_improvement(mean_end, var_end, incumbent.best_score)
    pool = np.vstack([candidates, endpoints])
    ei_pool = np.concatenate([np.atleast_1d(ei_cand), np.atleast_1d(ei_end)])
    order = np.argsort(-ei_pool, kind="stable")
    excluded_keys = set()
    if exclude is not None:
        excluded_keys = {tuple(c[name] for name in space.names) for c in exclude}
    fallback = None
    for idx in order:
        config = space.decode(pool[idx])
        if tuple(config[name] for name in space.names) in excluded_keys:
            if fallback is None:
                fallback = Proposal(u=pool[idx], config=config, ei_value=float(ei_pool[idx]))
            continue
        return Proposal(u=pool[idx], config=config, ei_value=float(ei_pool[idx]))
    return fallback  # every pool entry duplicates a previous trial


def incumbent_of(trials) -> Incumbent:
    """Build the incumbent from an iterable of (index, config, score) trials.

    Failed trials (score None or non-finite) are skipped; ties keep the
    earliest index.
    """
    best = None
    for index, config, score in trials:
        if score is None or not math.isfinite(score):
            continue
        if best is None or score < best.best_score:
            best = Incumbent(best_score=float(score), best_config=config, trial_index=index)
    if best is None:
        raise ValueError("no successful trials to take an incumbent from")
    return best
