"""Density matrices from trajectory ensembles and their autonomous evolution.

The ensemble density is rho_ij = sum_k w_k psi_ki psi_kj*.  For ring jump
models the exact one-jump average maps every bilinear psi_i psi_j* to
Lambda_ij psi_i psi_j* (the normalization factors cancel against the shift
distribution), so the density matrix evolves autonomously and entrywise:

    rho_ij(t) = rho_ij(0) exp(-rate (1 - Lambda_ij) t).

Diagonal entries are conserved; off-diagonals decay.  Because the density
evolution depends only on the density itself, two different ensembles with
the same density stay statistically indistinguishable, which is what rules
out signaling between remotely steered decompositions; the experiment here
checks that on simulated data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError
from .hilbert import Ensemble
from .jump_engine import JumpModel, evolve_ensemble, jump_probabilities

HERM_TOL = 1e-12
PSD_TOL = 1e-10


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive-semidefinite matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise PreconditionError("density matrix must be square")
        if np.abs(m - m.conj().T).max() > HERM_TOL:
            raise PreconditionError("density matrix must be Hermitian")
        if abs(np.trace(m).real - 1.0) > HERM_TOL or abs(np.trace(m).imag) > HERM_TOL:
            raise PreconditionError(f"trace must be 1, got {np.trace(m)!r}")
        lo = float(np.linalg.eigvalsh((m + m.conj().T) / 2).min())
        if lo < -PSD_TOL:
            raise PreconditionError(f"negative eigenvalue {lo!r}")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class LiftedGenerator:
    """Entrywise decay rates of the density matrix under a ring jump model.

    Entry (i, j) decays at -rate (1 - Lambda_ij) <= 0; the diagonal rates
    vanish because Lambda_ii = 1.
    """

    decay_rates: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.decay_rates, dtype=float)
        if r.ndim != 2 or r.shape[0] != r.shape[1]:
            raise PreconditionError("rate matrix must be square")
        if r.max() > 1e-12:
            raise PreconditionError("decay rates must be nonpositive")
        if np.abs(np.diag(r)).max() > 1e-12:
            raise PreconditionError("diagonal rates must vanish")
        object.__setattr__(self, "decay_rates", r)

    @property
    def dim(self) -> int:
        return self.decay_rates.shape[0]


def ensemble_density(e: Ensemble) -> DensityMatrix:
    """rho_ij = sum_k w_k psi_ki psi_kj* over the ensemble members."""
    if len(e) == 0:
        raise PreconditionError("ensemble is empty")
    rho = (e.states.T * e.weights) @ e.states.conj()
    rho = (rho + rho.conj().T) / 2.0
    return DensityMatrix(matrix=rho)


def _entry_standard_errors(e: Ensemble) -> np.ndarray:
    """Standard error of every density entry, combining real and imaginary
    scatter, without materializing the per-member bilinear tensor."""
    n = len(e)
    if n < 2:
        return np.zeros((e.dim, e.dim))
    w = e.weights
    w2 = w**2
    q = np.abs(e.states) ** 2
    rho = (e.states.T * w) @ e.states.conj()
    second = q.T @ (q * w2[:, None])  # sum_k w^2 |b_kij|^2
    cross = (e.states.T * w2) @ e.states.conj()  # sum_k w^2 b_kij
    var = second - 2.0 * (rho.conj() * cross).real + np.abs(rho) ** 2 * w2.sum()
    var = np.maximum(var, 0.0) * (n / (n - 1))
    return np.sqrt(var)


def lift_generator(model: JumpModel) -> LiftedGenerator:
    """Entrywise decay map induced by one jump model."""
    rates = -model.rate * (1.0 - model.overlap)
    return LiftedGenerator(decay_rates=rates)


def evolve_density(gen: LiftedGenerator, rho0: DensityMatrix, t: float) -> DensityMatrix:
    """Closed-form density at time t: entrywise exponential decay."""
    if t < 0:
        raise PreconditionError("time must be nonnegative")
    if gen.dim != rho0.dim:
        raise PreconditionError("generator and density dimensions differ")
    return DensityMatrix(matrix=rho0.matrix * np.exp(gen.decay_rates * t))


def jump_average_bilinears(model: JumpModel, psi) -> np.ndarray:
    """Exact one-jump average of every bilinear: sum_xi R^2 (J psi)(J psi)^dag.

    Sums over all shifts with nonzero probability, applying the normalized
    jump and reweighting by the shift distribution; no closed form is used,
    so this serves as the independent check that bilinears map to bilinears.
    """
    amplitudes = psi.amplitudes
    r2 = jump_probabilities(psi, model)
    d = model.dim
    idx = np.arange(d)
    shifted = model.weights[(idx[None, :] - idx[:, None]) % d]  # [xi, n]
    live = r2 > 0.0
    branches = shifted[live] * amplitudes[None, :]
    branches /= np.sqrt(np.sum(np.abs(branches) ** 2, axis=1))[:, None]
    weighted = branches * np.sqrt(r2[live])[:, None]
    return weighted.T @ weighted.conj()


@dataclass(frozen=True)
class DensityComparison:
    """Monte Carlo versus closed-form density along a time grid."""

    times: np.ndarray
    sampled: list
    analytic: list
    deviation: np.ndarray
    sigma: np.ndarray

    @property
    def max_deviation(self) -> np.ndarray:
        return self.deviation.max(axis=(1, 2))

    def within(self, n_sigma: float = 3.0) -> bool:
        return bool(np.all(self.deviation <= n_sigma * self.sigma + 1e-15))


def _sample_density_along(e: Ensemble, model: JumpModel, times, workers: int):
    times = np.asarray(times, dtype=float)
    if times.size == 0 or np.any(np.diff(times) <= 0) or times[0] < 0:
        raise PreconditionError("times must be strictly increasing and nonnegative")
    rhos, errs = [], []
    current, now = e, 0.0
    for t in times:
        current = evolve_ensemble(current, model, float(t - now), workers)
        now = float(t)
        rhos.append(ensemble_density(current))
        errs.append(_entry_standard_errors(current))
    return rhos, errs


def compare_mc_density(
    model: JumpModel,
    decomposition: Ensemble,
    times,
    n_per_member: int,
    workers: int = 1,
) -> DensityComparison:
    """Evolve a decomposition by Monte Carlo and compare its density with
    the entrywise closed form at each requested time."""
    if n_per_member < 1:
        raise PreconditionError("at least one trajectory per member is required")
    if len(decomposition) == 0:
        raise PreconditionError("ensemble is empty")
    rho0 = ensemble_density(decomposition)
    gen = lift_generator(model)
    e = decomposition.replicate(n_per_member)
    times = np.asarray(times, dtype=float)
    sampled, errs = _sample_density_along(e, model, times, workers)
    analytic = [evolve_density(gen, rho0, float(t)) for t in times]
    deviation = np.array(
        [np.abs(s.matrix - a.matrix) for s, a in zip(sampled, analytic)]
    )
    return DensityComparison(
        times=times,
        sampled=sampled,
        analytic=analytic,
        deviation=deviation,
        sigma=np.array(errs),
    )


@dataclass(frozen=True)
class GisinResult:
    """Entrywise distance between two evolving decompositions of one density."""

    times: np.ndarray
    distance: np.ndarray
    sigma: np.ndarray

    @property
    def max_distance(self) -> np.ndarray:
        return self.distance.max(axis=(1, 2))

    @property
    def sup_distance(self) -> float:
        return float(self.distance.max())

    def within(self, n_sigma: float = 3.0) -> bool:
        return bool(np.all(self.distance <= n_sigma * self.sigma + 1e-15))


def density_distance(a: Ensemble, b: Ensemble):
    """Entrywise |rho_A - rho_B| with the combined standard error."""
    diff = np.abs(ensemble_density(a).matrix - ensemble_density(b).matrix)
    sigma = np.sqrt(_entry_standard_errors(a) ** 2 + _entry_standard_errors(b) ** 2)
    return diff, sigma


def gisin_experiment(
    decomp_a: Ensemble,
    decomp_b: Ensemble,
    model: JumpModel,
    times,
    n_total: int,
    workers: int = 1,
) -> GisinResult:
    """Evolve two equal-density decompositions independently and report the
    entrywise distance of their densities over time.

    The decompositions must agree on the initial density to 1e-10 (the
    comparison is undefined otherwise) and must carry distinct master seeds
    so their noise is independent.
    """
    if len(decomp_a) == 0 or len(decomp_b) == 0:
        raise PreconditionError("ensemble is empty")
    if n_total < max(len(decomp_a), len(decomp_b)):
        raise PreconditionError("ensemble size must cover every member")
    rho_a = ensemble_density(decomp_a).matrix
    rho_b = ensemble_density(decomp_b).matrix
    gap = float(np.abs(rho_a - rho_b).max())
    if gap > 1e-10:
        raise PreconditionError(
            f"initial densities differ by {gap!r}; the comparison is undefined"
        )
    if decomp_a.seed == decomp_b.seed:
        raise PreconditionError("decompositions must carry distinct seeds")
    ea = decomp_a.replicate(n_total // len(decomp_a))
    eb = decomp_b.replicate(n_total // len(decomp_b))
    times = np.asarray(times, dtype=float)
    rhos_a, errs_a = _sample_density_along(ea, model, times, workers)
    rhos_b, errs_b = _sample_density_along(eb, model, times, workers)
    distance = np.array(
        [np.abs(x.matrix - y.matrix) for x, y in zip(rhos_a, rhos_b)]
    )
    sigma = np.sqrt(np.array(errs_a) ** 2 + np.array(errs_b) ** 2)
    return GisinResult(times=times, distance=distance, sigma=sigma)
