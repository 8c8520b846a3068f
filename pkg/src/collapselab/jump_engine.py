"""Quantum-jump dynamics on a periodic basis ring.

A jump multiplies the state by a shifted weight profile j(n - xi) and
renormalizes; the shift xi is drawn with probability

    R^2(psi, xi) = sum_n j(n - xi)^2 |psi_n|^2,

which sums to 1 over xi because the profile is normalized on the ring,
sum_xi j(xi)^2 = 1.  Jumps arrive as a Poisson process with rate ``rate``;
between jumps the state is a constant snapshot (no Hamiltonian drift).

Averaged over xi, the jump leaves every |psi_n|^2 unchanged (the collapse
probabilities are a martingale) while off-diagonal bilinears psi_n psi_m*
shrink by the overlap factor Lambda_{nm} = sum_xi j(n-xi) j(m-xi).
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError
from .hilbert import Ensemble, StateVector

PROB_TOL = 1e-12


@dataclass(frozen=True)
class JumpModel:
    """Jump rate plus localization profile on a ring of size d.

    ``weights`` is the profile j by offset, rescaled so sum j^2 = 1.
    ``overlap`` is the matrix Lambda_{nm} = sum_xi j(n-xi) j(m-xi): the
    average survival factor of the bilinear psi_n psi_m* under one jump.
    """

    rate: float
    weights: np.ndarray
    overlap: np.ndarray

    def __post_init__(self):
        if not self.rate > 0:
            raise PreconditionError(f"jump rate must be positive, got {self.rate}")
        j = np.asarray(self.weights, dtype=float)
        if j.ndim != 1 or j.size < 1 or np.any(j < 0) or not np.all(np.isfinite(j)):
            raise PreconditionError("profile must be a nonnegative finite 1-D sequence")
        if abs(float(np.sum(j**2)) - 1.0) > PROB_TOL:
            raise PreconditionError("profile must satisfy sum j^2 = 1 on the ring")
        lam = np.asarray(self.overlap, dtype=float)
        if lam.shape != (j.size, j.size):
            raise PreconditionError("overlap matrix shape does not match the profile")
        if (
            np.any(lam < -PROB_TOL)
            or np.any(lam > 1 + PROB_TOL)
            or np.max(np.abs(lam - lam.T)) > PROB_TOL
            or np.max(np.abs(np.diag(lam) - 1.0)) > PROB_TOL
        ):
            raise PreconditionError("overlap matrix must be symmetric with unit "
                                    "diagonal and entries in [0, 1]")
        object.__setattr__(self, "weights", j)
        object.__setattr__(self, "overlap", lam)
        # j(n - xi) table, indexed [xi, n]; its square's row xi is the
        # outcome distribution over n, so R^2 = table^2 @ |psi|^2.
        d = j.size
        shifts = (np.arange(d)[None, :] - np.arange(d)[:, None]) % d
        object.__setattr__(self, "_shift", j[shifts])
        object.__setattr__(self, "_shift_sq", j[shifts] ** 2)
        self.weights.setflags(write=False)
        self.overlap.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.weights.size

    def shifted_profile(self, xi: int) -> np.ndarray:
        """j(n - xi) as a vector over n."""
        return self._shift[xi]


def ring_model(weights, rate: float) -> JumpModel:
    """Jump model from a raw nonnegative profile already laid out on the ring.

    The profile is rescaled to sum j^2 = 1 and the overlap matrix is
    accumulated by the exact circulant sum Lambda_{nm} = sum_xi j(n-xi) j(m-xi).
    """
    j = np.asarray(weights, dtype=float)
    if j.ndim != 1 or j.size < 1:
        raise PreconditionError("profile must be a nonempty 1-D sequence")
    if np.any(j < 0) or not np.all(np.isfinite(j)):
        raise PreconditionError("profile entries must be nonnegative and finite")
    if not np.any(j > 0):
        raise PreconditionError("profile must have at least one positive entry")
    if not rate > 0:
        raise PreconditionError(f"jump rate must be positive, got {rate}")
    j = j / np.linalg.norm(j)
    d_idx = np.arange(j.size)
    shifted = j[(d_idx[None, :] - d_idx[:, None]) % j.size]  # [xi, n]
    overlap = shifted.T @ shifted
    # Clean rounding at the edges so the model invariants hold exactly.
    np.clip(overlap, 0.0, 1.0, out=overlap)
    np.fill_diagonal(overlap, 1.0)
    overlap = (overlap + overlap.T) / 2.0
    return JumpModel(rate=float(rate), weights=j, overlap=overlap)


def make_bell_jump(d: int, profile, rate: float) -> JumpModel:
    """Build a jump model from an offset profile wrapped onto a ring of size d.

    Offsets beyond the ring fold back periodically; the wrapped profile is
    rescaled so that sum_xi j^2 = 1 exactly, which makes the shift
    distribution R^2 normalized for every state.
    """
    if d < 1:
        raise PreconditionError("dimension must be >= 1")
    p = np.asarray(profile, dtype=float)
    if p.ndim != 1 or p.size < 1:
        raise PreconditionError("profile must be a nonempty 1-D sequence")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise PreconditionError("profile entries must be nonnegative and finite")
    j = np.zeros(d)
    np.add.at(j, np.arange(p.size) % d, p)
    return ring_model(j, rate)


def jump_probabilities(psi: StateVector, model: JumpModel) -> np.ndarray:
    """The shift distribution R^2(psi, xi) over all xi; sums to 1."""
    if psi.dim != model.dim:
        raise PreconditionError(
            f"state dimension {psi.dim} does not match model dimension {model.dim}"
        )
    r2 = model._shift_sq @ psi.probabilities()
    total = float(r2.sum())
    if abs(total - 1.0) > PROB_TOL:
        raise PreconditionError(f"shift probabilities sum to {total!r}, not 1")
    return r2


def sample_jump_parameter(psi: StateVector, model: JumpModel, rng: np.random.Generator) -> int:
    """Draw the localization center xi with probability R^2(psi, xi)."""
    r2 = jump_probabilities(psi, model)
    u = rng.random() * r2.sum()
    return int(np.searchsorted(np.cumsum(r2), u, side="right").clip(0, model.dim - 1))


def apply_jump(psi: StateVector, xi: int, model: JumpModel) -> StateVector:
    """Multiply by the profile centered at xi and renormalize.

    Component phases are untouched: the profile is real and nonnegative.
    """
    if psi.dim != model.dim:
        raise PreconditionError("state and model dimensions differ")
    if not 0 <= xi < model.dim:
        raise PreconditionError(f"shift {xi} out of range for dimension {model.dim}")
    raw = model.shifted_profile(xi) * psi.amplitudes
    norm = float(np.linalg.norm(raw))
    if norm == 0.0:
        raise PreconditionError(
            f"jump to zero-probability branch xi={xi}: R(psi, xi) = 0"
        )
    return StateVector(raw / norm)


def _trajectory_arrays(
    amps: np.ndarray, model: JumpModel, duration: float, rng: np.random.Generator
) -> tuple[np.ndarray, int]:
    """Hot loop of one trajectory on bare amplitude arrays.

    Performs exactly the operations of sample_jump_parameter followed by
    apply_jump per event (same arithmetic, same draw order), skipping the
    per-jump wrapper validation; the caller re-validates the final state.
    """
    scale = 1.0 / model.rate
    shift = model._shift
    shift_sq = model._shift_sq
    last = model.dim - 1
    jumps = 0
    t = rng.exponential(scale)
    while t <= duration:
        r2 = shift_sq @ (np.abs(amps) ** 2)
        u = rng.random() * r2.sum()
        xi = min(int(np.searchsorted(np.cumsum(r2), u, side="right")), last)
        raw = shift[xi] * amps
        amps = raw / np.linalg.norm(raw)
        jumps += 1
        t += rng.exponential(scale)
    return amps, jumps


def evolve_trajectory(
    psi0: StateVector, model: JumpModel, duration: float, rng: np.random.Generator
) -> tuple[StateVector, int]:
    """Run one trajectory for the given duration; return (state, jump count).

    Jump times are exponential inter-arrivals at the model rate; the state
    is constant between jumps, so only the jumps are executed.
    """
    if duration < 0:
        raise PreconditionError("duration must be nonnegative")
    if psi0.dim != model.dim:
        raise PreconditionError("state and model dimensions differ")
    amps, jumps = _trajectory_arrays(psi0.amplitudes, model, duration, rng)
    return (psi0 if jumps == 0 else StateVector(amps)), jumps


def member_rng(seed: int, generation: int, member: int) -> np.random.Generator:
    """Counter-based child stream for one ensemble member.

    Keyed by (master seed, generation, member index) so that re-evolving an
    ensemble never reuses a stream and results do not depend on how members
    are distributed over workers.
    """
    if not 0 <= member < 2**32:
        raise PreconditionError("member index out of the 32-bit key range")
    if not 0 <= generation < 2**32:
        raise PreconditionError("generation out of the 32-bit key range")
    key = np.array(
        [seed % (2**64), (generation << 32) | member], dtype=np.uint64
    )
    return np.random.Generator(np.random.Philox(key=key))


def _evolve_block(args):
    model, states, duration, seed, generation, start = args
    out = np.empty_like(states)
    counts = np.empty(states.shape[0], dtype=int)
    for k in range(states.shape[0]):
        rng = member_rng(seed, generation, start + k)
        out[k], counts[k] = _trajectory_arrays(states[k], model, duration, rng)
    return out, counts


def evolve_ensemble(
    ensemble: Ensemble, model: JumpModel, duration: float, workers: int = 1
) -> Ensemble:
    """Evolve every member for ``duration`` under its own child stream.

    Output member order equals input order and the result is a pure
    function of (ensemble, model, duration) regardless of worker count.
    Weights are untouched; jumps act on states only.
    """
    if len(ensemble) == 0:
        return ensemble
    if ensemble.dim != model.dim:
        raise PreconditionError("ensemble and model dimensions differ")
    if workers < 1:
        raise PreconditionError("worker count must be >= 1")
    n = len(ensemble)
    if workers == 1 or n < 2 * workers:
        out, _ = _evolve_block(
            (model, ensemble.states, duration, ensemble.seed, ensemble.generation, 0)
        )
    else:
        bounds = np.linspace(0, n, 4 * workers + 1, dtype=int)
        spans = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        blocks = [
            (model, ensemble.states[a:b], duration, ensemble.seed, ensemble.generation, a)
            for a, b in spans
        ]
        out = np.empty_like(ensemble.states)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for (a, b), (states, _) in zip(spans, pool.map(_evolve_block, blocks)):
                out[a:b] = states
    return Ensemble(
        out,
        ensemble.weights,
        ensemble.seed,
        ensemble.time + duration,
        ensemble.generation + 1,
    )


def jump_average(g, model: JumpModel, psi: StateVector) -> complex:
    """Exact one-jump average < g(J psi) > = sum_xi R^2(psi, xi) g(J_xi psi).

    The sum runs over every shift with nonzero probability; no sampling is
    involved, so identities hold to rounding.
    """
    r2 = jump_probabilities(psi, model)
    total = 0.0 + 0.0j
    for xi in np.flatnonzero(r2 > 0.0):
        total += r2[xi] * complex(g(apply_jump(psi, int(xi), model)))
    return complex(total)


@dataclass(frozen=True)
class LeftEigenReport:
    """Outcome of probing whether a statistic g is a left eigenfunction.

    ``ratios`` holds <g(J psi)> / g(psi) per usable probe (NaN where the
    probe was skipped because g vanished on it).  When the ratio is
    constant across probes it is the survival factor Lambda, and the
    statistic decays at rate(1 - Lambda); ``eigenvalue`` reports
    -rate * (1 - Lambda) from the mean ratio.
    """

    ratios: np.ndarray
    skipped: np.ndarray
    survival: complex
    eigenvalue: complex
    residual: float

    @property
    def n_used(self) -> int:
        return int((~self.skipped).sum())


def check_left_eigen(g, model: JumpModel, probes) -> LeftEigenReport:
    """Estimate the one-jump survival factor of g over a set of probe states."""
    probes = list(probes)
    if not probes:
        raise PreconditionError("at least one probe state is required")
    ratios = np.full(len(probes), np.nan, dtype=complex)
    skipped = np.zeros(len(probes), dtype=bool)
    for k, psi in enumerate(probes):
        value = complex(g(psi))
        if value == 0:
            skipped[k] = True
            continue
        ratios[k] = jump_average(g, model, psi) / value
    if skipped.all():
        raise PreconditionError("g vanished on every probe; no ratio available")
    used = ratios[~skipped]
    survival = complex(used.mean())
    residual = float(np.max(np.abs(used - survival))) if used.size > 1 else 0.0
    eigenvalue = -model.rate * (1.0 - survival)
    return LeftEigenReport(
        ratios=ratios,
        skipped=skipped,
        survival=survival,
        eigenvalue=eigenvalue,
        residual=residual,
    )
