"""State vectors, the unitary-invariant sampler, and sector bookkeeping.

A state is a normalized complex amplitude vector psi over a fixed basis of
dimension d.  Random states are drawn from the unique measure invariant
under unitary transformations (independent standard complex Gaussians,
normalized).  Sectors group basis indices into pointer outcomes; the weight
carried by a sector is the collapse probability it will be found with.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError

NORM_TOL = 1e-12
WEIGHT_TOL = 1e-12


def _as_readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class StateVector:
    """Normalized complex amplitudes over a fixed basis.

    The norm constraint sum_i |psi_i|^2 = 1 holds to 1e-12 for every
    instance; construct through :func:`normalize` for raw data.
    """

    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        if a.ndim != 1 or a.size < 1:
            raise PreconditionError("state vector must be a nonempty 1-D sequence")
        if not np.all(np.isfinite(a)):
            bad = int(np.flatnonzero(~np.isfinite(a))[0])
            raise PreconditionError(f"non-finite amplitude at index {bad}")
        norm2 = float(np.sum(np.abs(a) ** 2))
        if abs(norm2 - 1.0) > NORM_TOL:
            raise PreconditionError(
                f"amplitudes are not normalized: sum |psi_i|^2 = {norm2!r}"
            )
        object.__setattr__(self, "amplitudes", _as_readonly(a))

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def probabilities(self) -> np.ndarray:
        """|psi_i|^2 for every basis index."""
        return np.abs(self.amplitudes) ** 2


def normalize(raw) -> StateVector:
    """Scale a raw complex sequence onto the unit sphere, phases unchanged."""
    a = np.asarray(raw, dtype=complex)
    if a.ndim != 1 or a.size < 1:
        raise PreconditionError("input must be a nonempty 1-D sequence")
    if not np.all(np.isfinite(a)):
        bad = int(np.flatnonzero(~np.isfinite(a))[0])
        raise PreconditionError(f"non-finite amplitude at index {bad}: {a[bad]!r}")
    norm = float(np.linalg.norm(a))
    if norm == 0.0:
        raise PreconditionError("zero norm: all amplitudes vanish")
    return StateVector(a / norm)


def sample_uniform(d: int, rng: np.random.Generator) -> StateVector:
    """Draw a state from the unitary-invariant measure on dimension d.

    Independent standard complex Gaussians followed by normalization
    realize the invariant measure exactly in distribution.
    """
    if d < 1:
        raise PreconditionError("dimension must be >= 1")
    z = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return normalize(z)


@dataclass(frozen=True)
class SectorMap:
    """Assignment of basis indices to pointer sectors.

    ``labels[i]`` is the sector of basis index i; labels are contiguous
    0..S-1.  The within-sector index r of basis index i is its rank among
    the indices sharing its sector, in basis order.
    """

    labels: np.ndarray

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=int)
        if lab.ndim != 1 or lab.size < 1:
            raise PreconditionError("sector labels must be a nonempty 1-D sequence")
        present = np.unique(lab)
        if present[0] != 0 or present[-1] != present.size - 1:
            raise PreconditionError(
                f"sector labels must be contiguous 0..S-1, got {present.tolist()}"
            )
        object.__setattr__(self, "labels", _as_readonly(lab))

    @property
    def dim(self) -> int:
        return self.labels.size

    @property
    def n_sectors(self) -> int:
        return int(self.labels.max()) + 1

    def indices(self, n: int) -> np.ndarray:
        """Basis indices of sector n, in within-sector (r) order."""
        self._check_label(n)
        return np.flatnonzero(self.labels == n)

    def _check_label(self, n: int) -> None:
        if not 0 <= n < self.n_sectors:
            raise PreconditionError(
                f"unknown sector label {n}; valid labels are 0..{self.n_sectors - 1}"
            )

    @classmethod
    def singletons(cls, d: int) -> "SectorMap":
        """One sector per basis index."""
        return cls(np.arange(d))

    @classmethod
    def grouped(cls, d: int, group: int) -> "SectorMap":
        """Contiguous blocks of ``group`` indices per sector."""
        if d % group != 0:
            raise PreconditionError("group size must divide the dimension")
        return cls(np.repeat(np.arange(d // group), group))


def sector_weight(psi: StateVector, sectors: SectorMap, n: int) -> float:
    """Total probability sum_r |psi_{n,r}|^2 carried by sector n."""
    if sectors.dim != psi.dim:
        raise PreconditionError("sector map dimension does not match the state")
    idx = sectors.indices(n)
    return float(np.sum(np.abs(psi.amplitudes[idx]) ** 2))


def bilinear(psi: StateVector, i: int, j: int) -> complex:
    """The bilinear psi_i * conj(psi_j)."""
    d = psi.dim
    if not (0 <= i < d and 0 <= j < d):
        raise PreconditionError(f"index pair ({i}, {j}) out of range for dimension {d}")
    return complex(psi.amplitudes[i] * np.conj(psi.amplitudes[j]))


@dataclass(frozen=True)
class Ensemble:
    """Weighted collection of state vectors: the particle representation of
    a distribution over Hilbert space.

    ``states`` has one member per row; weights are nonnegative and sum to 1.
    ``seed`` is the master seed from which per-member child streams are
    derived; ``generation`` counts completed evolution passes so that
    successive passes never reuse a stream.  ``time`` is in units of the
    inverse jump rate.
    """

    states: np.ndarray
    weights: np.ndarray
    seed: int
    time: float = 0.0
    generation: int = 0

    def __post_init__(self):
        s = np.asarray(self.states, dtype=complex)
        w = np.asarray(self.weights, dtype=float)
        if s.ndim != 2:
            raise PreconditionError("states must be a (members, dim) array")
        if w.shape != (s.shape[0],):
            raise PreconditionError("one weight per member required")
        if s.shape[0] > 0:
            if np.any(w < 0):
                raise PreconditionError("weights must be nonnegative")
            if abs(float(w.sum()) - 1.0) > WEIGHT_TOL:
                raise PreconditionError(f"weights sum to {w.sum()!r}, not 1")
            norms = np.sum(np.abs(s) ** 2, axis=1)
            worst = int(np.argmax(np.abs(norms - 1.0)))
            if abs(norms[worst] - 1.0) > NORM_TOL:
                raise PreconditionError(
                    f"member {worst} is not normalized: |psi|^2 = {norms[worst]!r}"
                )
        object.__setattr__(self, "states", _as_readonly(s))
        object.__setattr__(self, "weights", _as_readonly(w))

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def member(self, k: int) -> StateVector:
        return StateVector(self.states[k])

    @classmethod
    def from_members(cls, members, seed: int, time: float = 0.0) -> "Ensemble":
        """Build from (StateVector, weight) pairs."""
        members = list(members)
        if not members:
            return cls(np.zeros((0, 0), dtype=complex), np.zeros(0), seed, time)
        states = np.stack([m.amplitudes for m, _ in members])
        weights = np.array([w for _, w in members], dtype=float)
        return cls(states, weights, seed, time)

    @classmethod
    def pure(cls, psi: StateVector, n: int, seed: int) -> "Ensemble":
        """n identical copies of one state, uniformly weighted."""
        if n < 1:
            raise PreconditionError("ensemble size must be >= 1")
        states = np.broadcast_to(psi.amplitudes, (n, psi.dim)).copy()
        return cls(states, np.full(n, 1.0 / n), seed)

    def replicate(self, copies: int) -> "Ensemble":
        """Duplicate every member ``copies`` times at 1/copies of its weight.

        The density matrix is preserved exactly; the copies give Monte Carlo
        resolution once each member evolves under its own stream.
        """
        if copies < 1:
            raise PreconditionError("copies must be >= 1")
        states = np.repeat(self.states, copies, axis=0)
        weights = np.repeat(self.weights / copies, copies)
        return Ensemble(states, weights, self.seed, self.time, self.generation)

    def reseeded(self, seed: int) -> "Ensemble":
        return Ensemble(self.states, self.weights, seed, self.time, self.generation)
