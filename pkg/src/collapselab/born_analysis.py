"""Ensemble-level collapse observables.

Tracks the per-sector probabilities P_n (conserved by the jump dynamics),
the fraction of trajectories that have collapsed into each pointer sector,
and the distribution of the surviving component's phase among collapsed
trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError
from .hilbert import Ensemble, SectorMap

DEFAULT_COLLAPSE_EPS = 1e-3


def _sector_weights_by_member(e: Ensemble, sectors: SectorMap) -> np.ndarray:
    """(members, sectors) matrix of sector weights."""
    if len(e) == 0:
        raise PreconditionError("ensemble is empty")
    if sectors.dim != e.dim:
        raise PreconditionError("sector map dimension does not match the ensemble")
    probs = np.abs(e.states) ** 2
    out = np.empty((len(e), sectors.n_sectors))
    for n in range(sectors.n_sectors):
        out[:, n] = probs[:, sectors.indices(n)].sum(axis=1)
    return out


def _weighted_mean_and_error(values: np.ndarray, weights: np.ndarray):
    """Weighted mean of member statistics and its standard error.

    Members are independent, so the variance of the weighted mean is
    sum_k w_k^2 Var[x_k], estimated from the weighted scatter with the
    usual small-sample correction.
    """
    mean = weights @ values
    n = weights.size
    if n < 2:
        return mean, np.zeros_like(mean)
    resid2 = (values - mean) ** 2
    var = (weights**2) @ resid2 * (n / (n - 1))
    return mean, np.sqrt(var)


@dataclass(frozen=True)
class BornRecord:
    """Per-sector probabilities P_n over a time grid, with standard errors."""

    times: np.ndarray
    values: np.ndarray
    errors: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        s = np.asarray(self.errors, dtype=float)
        if v.shape != (t.size, s.shape[1]) or s.shape != v.shape:
            raise PreconditionError("record arrays must be (times, sectors)")
        row = np.abs(v.sum(axis=1) - 1.0).max()
        if row > 1e-10:
            raise PreconditionError(
                f"sector probabilities must sum to 1 at every time; residual {row!r}"
            )
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "errors", s)

    @property
    def n_sectors(self) -> int:
        return self.values.shape[1]


def born_probabilities(e: Ensemble, sectors: SectorMap):
    """Weighted ensemble averages of the sector weights, with standard errors."""
    g = _sector_weights_by_member(e, sectors)
    return _weighted_mean_and_error(g, e.weights)


def born_record(times, ensembles, sectors: SectorMap) -> BornRecord:
    """Assemble a BornRecord from ensembles sampled at the given times."""
    times = np.asarray(times, dtype=float)
    ensembles = list(ensembles)
    if times.size != len(ensembles):
        raise PreconditionError("one ensemble per time is required")
    values, errors = [], []
    for e in ensembles:
        v, s = born_probabilities(e, sectors)
        values.append(v)
        errors.append(s)
    return BornRecord(times=times, values=np.array(values), errors=np.array(errors))


@dataclass(frozen=True)
class CollapseStats:
    """Weight collapsed into each sector plus the uncollapsed remainder."""

    fractions: np.ndarray
    remainder: float
    threshold: float


def collapse_statistics(
    e: Ensemble, sectors: SectorMap, eps: float = DEFAULT_COLLAPSE_EPS
) -> CollapseStats:
    """Classify members as collapsed when one sector holds weight >= 1 - eps.

    A member is attributed to its heaviest sector only, so the fractions
    never double-count; the remainder is the weight still in superposition.
    """
    if not 0.0 < eps < 1.0:
        raise PreconditionError(f"threshold must be in (0, 1), got {eps}")
    g = _sector_weights_by_member(e, sectors)
    best = g.argmax(axis=1)
    collapsed = g[np.arange(len(e)), best] >= 1.0 - eps
    fractions = np.zeros(sectors.n_sectors)
    np.add.at(fractions, best[collapsed], e.weights[collapsed])
    return CollapseStats(
        fractions=fractions,
        remainder=float(1.0 - fractions.sum()),
        threshold=eps,
    )


@dataclass(frozen=True)
class PhaseProfile:
    """Weighted histogram over [0, 2 pi) of the surviving component's phase
    among members collapsed to one sector.  Empty (zero mass) when no member
    has collapsed there."""

    masses: np.ndarray
    edges: np.ndarray
    sector: int

    @property
    def total(self) -> float:
        return float(self.masses.sum())

    @property
    def empty(self) -> bool:
        return self.total == 0.0


def phase_profile(
    e: Ensemble,
    sectors: SectorMap,
    n: int,
    eps: float = DEFAULT_COLLAPSE_EPS,
    bins: int = 36,
) -> PhaseProfile:
    """Phase distribution of the dominant component within sector n.

    Jumps multiply amplitudes by nonnegative factors, so this phase is a
    frozen record of the initial one; the histogram diagnoses its spread.
    """
    if not 0.0 < eps < 1.0:
        raise PreconditionError(f"threshold must be in (0, 1), got {eps}")
    if bins < 1:
        raise PreconditionError("at least one histogram bin is required")
    sectors._check_label(n)
    g = _sector_weights_by_member(e, sectors)
    best = g.argmax(axis=1)
    mask = (best == n) & (g[np.arange(len(e)), best] >= 1.0 - eps)
    edges = np.linspace(0.0, 2.0 * np.pi, bins + 1)
    if not mask.any():
        return PhaseProfile(masses=np.zeros(bins), edges=edges, sector=n)
    idx = sectors.indices(n)
    sub = e.states[mask][:, idx]
    dominant = np.abs(sub).argmax(axis=1)
    theta = np.angle(sub[np.arange(sub.shape[0]), dominant]) % (2.0 * np.pi)
    masses, _ = np.histogram(theta, bins=edges, weights=e.weights[mask])
    return PhaseProfile(masses=masses, edges=edges, sector=n)
