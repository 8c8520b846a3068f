"""Finite generator of the probability flow for a qubit under jumps.

Diagonal positive jumps freeze the relative phase of a two-level state, so
the distribution over states reduces to a density on the single coordinate
p = |psi_0|^2.  Each jump moves p to one of two branch images p'_xi(p) with
branch probability R^2_xi(p); at rate Gamma this induces a linear generator

    K = Gamma * (T - 1)

on densities over p, with T the one-jump transition operator.  This module
discretizes [0, 1] into bins whose midpoints include both endpoints, builds
K with a first-moment-exact deposit rule (which makes the collapse
probabilities exact left null vectors rather than approximate ones), and
provides the spectral analysis and propagation tools: a full left/right
eigendecomposition with biorthonormal pairs, the matrix-exponential
propagator, the late-time limit from the zero modes, and the one-parameter
closed form available when every decaying mode shares the same rate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DefectiveKernelError, PreconditionError, RunawayError
from .jump_engine import JumpModel

ZERO_MODE_TOL = 1e-8
DEFECT_TOL = 1e-8
COLUMN_TOL = 1e-12


@dataclass(frozen=True)
class JumpChain:
    """Closed-form branch maps of a qubit jump model on p = |psi_0|^2.

    Branch xi has probability r2(xi, p) = a_xi p + b_xi (1 - p) and image
    p'_xi(p) = a_xi p / r2(xi, p), with a_xi = j(0-xi)^2 and
    b_xi = j(1-xi)^2 on the two-point ring.  Both a and b sum to 1, which
    makes the branch probabilities normalized and the mean image equal to
    p (the martingale property) identically in p.
    """

    rate: float
    coeff_p: np.ndarray
    coeff_q: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.coeff_p, dtype=float)
        b = np.asarray(self.coeff_q, dtype=float)
        if not self.rate > 0:
            raise PreconditionError("chain rate must be positive")
        if a.shape != b.shape or a.ndim != 1:
            raise PreconditionError("branch coefficient arrays must match")
        if np.any(a < 0) or np.any(b < 0):
            raise PreconditionError("branch coefficients must be nonnegative")
        if abs(a.sum() - 1.0) > COLUMN_TOL or abs(b.sum() - 1.0) > COLUMN_TOL:
            raise PreconditionError("branch coefficients must each sum to 1")
        object.__setattr__(self, "coeff_p", a)
        object.__setattr__(self, "coeff_q", b)

    @property
    def n_branches(self) -> int:
        return self.coeff_p.size

    def branch_probability(self, xi: int, p) -> np.ndarray:
        """R^2 of branch xi as a function of p (vectorized)."""
        p = np.asarray(p, dtype=float)
        return self.coeff_p[xi] * p + self.coeff_q[xi] * (1.0 - p)

    def branch_map(self, xi: int, p) -> np.ndarray:
        """Branch image p' of branch xi; where the branch has zero
        probability the image is irrelevant and p is returned."""
        p = np.asarray(p, dtype=float)
        r2 = self.branch_probability(xi, p)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(r2 > 0.0, self.coeff_p[xi] * p / np.where(r2 > 0, r2, 1.0), p)
        return np.clip(out, 0.0, 1.0)


def reduce_qubit_model(model: JumpModel) -> JumpChain:
    """Project a two-level jump model onto the coordinate p = |psi_0|^2."""
    if model.dim != 2:
        raise PreconditionError(
            f"qubit reduction requires dimension 2, got {model.dim}"
        )
    j2 = model.weights**2
    # a_xi = j(0-xi)^2, b_xi = j(1-xi)^2 on the Z_2 ring
    coeff_p = np.array([j2[0], j2[1]])
    coeff_q = np.array([j2[1], j2[0]])
    return JumpChain(rate=model.rate, coeff_p=coeff_p, coeff_q=coeff_q)


def _midpoints(bins: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, bins)


def _edges(bins: int) -> np.ndarray:
    mid = _midpoints(bins)
    return np.concatenate([[0.0], (mid[:-1] + mid[1:]) / 2.0, [1.0]])


@dataclass(frozen=True)
class GeneratorMatrix:
    """Bin-space realization of the probability-flow generator.

    Columns are source bins and sum to zero (probability conservation);
    off-diagonal entries are nonnegative arrival rates.  ``rate`` is the
    jump rate setting the overall scale, used for tolerance scaling.
    """

    entries: np.ndarray
    edges: np.ndarray
    rate: float

    def __post_init__(self):
        k = np.asarray(self.entries, dtype=float)
        e = np.asarray(self.edges, dtype=float)
        if k.ndim != 2 or k.shape[0] != k.shape[1]:
            raise PreconditionError("generator must be square")
        if e.shape != (k.shape[0] + 1,):
            raise PreconditionError("edges must have one more entry than bins")
        if not np.all(np.isfinite(k)):
            raise PreconditionError("generator entries must be finite")
        scale = max(abs(self.rate), 1.0)
        col = np.abs(k.sum(axis=0)).max()
        if col > COLUMN_TOL * scale:
            raise PreconditionError(f"columns must sum to 0, worst residual {col!r}")
        off = k - np.diag(np.diag(k))
        if off.min() < -COLUMN_TOL * scale:
            raise PreconditionError("off-diagonal entries must be nonnegative")
        if np.diag(k).max() > COLUMN_TOL * scale:
            raise PreconditionError("diagonal entries must be nonpositive")
        object.__setattr__(self, "entries", k)
        object.__setattr__(self, "edges", e)

    @property
    def bins(self) -> int:
        return self.entries.shape[0]

    @property
    def midpoints(self) -> np.ndarray:
        return _midpoints(self.bins)


def _deposit(targets: np.ndarray, masses: np.ndarray, bins: int) -> np.ndarray:
    """Accumulate masses at positions in [0, 1] onto the bin nodes, split
    linearly between the two neighbors so the first moment is exact."""
    h = 1.0 / (bins - 1)
    idx = np.minimum((targets / h).astype(int), bins - 2)
    frac = targets / h - idx
    out = np.zeros(bins)
    np.add.at(out, idx, masses * (1.0 - frac))
    np.add.at(out, idx + 1, masses * frac)
    return out


def _transition_matrix(chain: JumpChain, bins: int) -> np.ndarray:
    """Column-stochastic one-jump transition T over bin nodes."""
    mid = _midpoints(bins)
    t = np.zeros((bins, bins))
    for k, p in enumerate(mid):
        for xi in range(chain.n_branches):
            mass = float(chain.branch_probability(xi, p))
            if mass <= 0.0:
                continue
            target = float(chain.branch_map(xi, p))
            t[:, k] += _deposit(np.array([target]), np.array([mass]), bins)
    return t


def build_generator(chain: JumpChain, bins: int) -> GeneratorMatrix:
    """Discretize the jump chain into the rate matrix Gamma * (T - 1)."""
    if bins < 3:
        raise PreconditionError("at least 3 bins are required")
    t = _transition_matrix(chain, bins)
    k = chain.rate * (t - np.eye(bins))
    return GeneratorMatrix(entries=k, edges=_edges(bins), rate=chain.rate)


def one_step_transition(chain: JumpChain, bins: int, dt: float) -> np.ndarray:
    """Exact finite-time transition matrix over one interval of length dt.

    Dresses powers of the one-jump operator T with Poisson weights for the
    number of jumps in dt; the series is truncated once the remaining tail
    weight drops below 1e-16.
    """
    if bins < 3:
        raise PreconditionError("at least 3 bins are required")
    if dt < 0:
        raise PreconditionError("time step must be nonnegative")
    t = _transition_matrix(chain, bins)
    mu = chain.rate * dt
    weight = np.exp(-mu)
    total = weight
    term = np.eye(bins)
    out = weight * term
    k = 0
    while 1.0 - total > 1e-16 and (k < mu or weight > 1e-18):
        k += 1
        weight *= mu / k
        term = t @ term
        out += weight * term
        total += weight
    return out


@dataclass(frozen=True)
class SpectralData:
    """Eigendecomposition of a generator with biorthonormal left/right pairs.

    ``eigenvalues[N]`` is the generator eigenvalue (minus the decay rate);
    ``right[:, N]`` and ``left[:, N]`` are the paired vectors, normalized so
    that left[:, M] . right[:, N] = delta_{MN} under the plain (unconjugated)
    dot product.  ``zero_modes`` flags eigenvalues within tolerance of zero.
    """

    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray
    zero_modes: np.ndarray
    rate: float

    @property
    def decay_rates(self) -> np.ndarray:
        return -self.eigenvalues

    @property
    def n_zero_modes(self) -> int:
        return int(self.zero_modes.sum())


def spectral_decompose(k: GeneratorMatrix) -> SpectralData:
    """Full eigendecomposition of a generator matrix.

    Left vectors are obtained by inverting the right eigenvector matrix,
    which enforces biorthonormality exactly.  A generator whose right
    eigenvectors do not span (merged eigenvalue structure) is reported as
    defective; the polynomial-in-time propagators of that case are not
    modeled here.
    """
    a = k.entries
    w, vr = scipy.linalg.eig(a)
    scale = max(float(np.abs(a).max()), 1e-300)
    cond = np.linalg.cond(vr)
    if not np.isfinite(cond) or cond > 1e12:
        raise DefectiveKernelError(
            f"right eigenvectors are numerically dependent (cond={cond:.2e}); "
            "eigenvalues have merged and the kernel is not diagonalizable"
        )
    left = np.linalg.inv(vr)
    resid = float(np.abs(vr @ (w[:, None] * left) - a).max()) / scale
    if resid > DEFECT_TOL:
        raise DefectiveKernelError(
            f"eigendecomposition reconstruction residual {resid:.2e} exceeds "
            f"{DEFECT_TOL}; kernel treated as defective (merged eigenvalues)"
        )
    order = np.lexsort((w.imag, -w.real))
    w = w[order]
    vr = vr[:, order]
    left = left[order, :]
    zero = np.abs(w) <= ZERO_MODE_TOL * max(k.rate, 1e-300)
    return SpectralData(
        eigenvalues=w,
        right=vr,
        left=left.T.copy(),
        zero_modes=zero,
        rate=k.rate,
    )


@dataclass(frozen=True)
class Propagator:
    """Finite-time transition matrix exp(K t) over bins."""

    matrix: np.ndarray
    time: float

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        col = np.abs(m.sum(axis=0) - 1.0).max()
        if col > 1e-10:
            raise PreconditionError(
                f"propagator columns must sum to 1, worst residual {col!r}"
            )
        if m.min() < -1e-12:
            raise PreconditionError("propagator entries must be nonnegative")
        object.__setattr__(self, "matrix", m)


def propagator(k: GeneratorMatrix, t: float) -> Propagator:
    """exp(K t) by scaling-and-squaring (Pade) matrix exponential."""
    if t < 0:
        raise PreconditionError("reverse evolution is undefined for this semigroup")
    return Propagator(matrix=scipy.linalg.expm(k.entries * t), time=t)


def propagate(k: GeneratorMatrix, p0, t: float) -> np.ndarray:
    """Evolve a bin distribution for time t; no renormalization is applied,
    conservation must hold on its own."""
    p0 = _check_distribution(p0, k.bins)
    return propagator(k, t).matrix @ p0


def _check_distribution(p0, bins: int) -> np.ndarray:
    p0 = np.asarray(p0, dtype=float)
    if p0.shape != (bins,):
        raise PreconditionError(f"distribution must have {bins} entries")
    if p0.min() < -1e-12:
        raise PreconditionError("distribution entries must be nonnegative")
    if abs(p0.sum() - 1.0) > 1e-10:
        raise PreconditionError(f"distribution must sum to 1, got {p0.sum()!r}")
    return p0


def limit_distribution(spec: SpectralData, p0) -> np.ndarray:
    """Late-time distribution: the zero-mode component of p0.

    Requires every non-zero mode to decay; a non-zero mode without positive
    decay rate means no limit exists.
    """
    if spec.n_zero_modes < 1:
        raise PreconditionError("no zero modes flagged; late-time limit undefined")
    p0 = _check_distribution(p0, spec.right.shape[0])
    decay = spec.decay_rates[~spec.zero_modes]
    tol = ZERO_MODE_TOL * max(spec.rate, 1e-300)
    if decay.size and decay.real.min() <= tol:
        worst = decay[np.argmin(decay.real)]
        raise RunawayError(
            f"non-zero mode with decay rate {worst} does not decay; "
            "no late-time limit exists"
        )
    f = spec.right[:, spec.zero_modes]
    g = spec.left[:, spec.zero_modes]
    out = f @ (g.T @ p0)
    if np.abs(out.imag).max() > 1e-10:
        raise RunawayError("zero-mode projection is not real")
    return out.real


def _check_biorthonormal(right: np.ndarray, left: np.ndarray, tol: float) -> None:
    gram = left.T @ right
    resid = np.abs(gram - np.eye(gram.shape[0]))
    if resid.max() > tol:
        m, n = np.unravel_index(int(resid.argmax()), resid.shape)
        raise PreconditionError(
            f"modes ({m}, {n}) are not biorthonormal: g_m . f_n = {gram[m, n]!r}"
        )


def _mode_matrix(modes) -> np.ndarray:
    """Stack mode vectors into real (bins, n_modes) columns.

    Accepts either a (bins, n_modes) array with modes as columns or a
    sequence of 1-D mode vectors.
    """
    if isinstance(modes, np.ndarray):
        arr = modes if modes.ndim == 2 else modes[:, None]
    else:
        arr = np.column_stack([np.asarray(v) for v in list(modes)])
    if np.iscomplexobj(arr):
        if np.abs(arr.imag).max() > 1e-10:
            raise PreconditionError("mode vectors must be real")
        arr = arr.real
    return arr.astype(float)


def build_equal_gap_kernel(right_modes, left_modes, lam: float, bins: int) -> GeneratorMatrix:
    """Generator with every decaying mode at the same rate lam:
    K = -lam (1 - sum_n f_n g_n^T) over the supplied zero modes."""
    f = _mode_matrix(right_modes)
    g = _mode_matrix(left_modes)
    if f.shape != g.shape or f.shape[0] != bins:
        raise PreconditionError("mode arrays must be (bins, n_modes) and match")
    if not lam > 0:
        raise PreconditionError("gap rate must be positive")
    _check_biorthonormal(f, g, 1e-10)
    k = -lam * (np.eye(bins) - f @ g.T)
    return GeneratorMatrix(entries=k, edges=_edges(bins), rate=lam)


def closed_form_equal_gap(p0, t: float, right_modes, left_modes, lam: float) -> np.ndarray:
    """Distribution at time t when all decaying modes share the rate lam:

        P(t) = exp(-lam t) P0 + (1 - exp(-lam t)) sum_n f_n (g_n . P0)
    """
    f = _mode_matrix(right_modes)
    g = _mode_matrix(left_modes)
    if f.shape != g.shape:
        raise PreconditionError("mode arrays must match")
    if not lam > 0:
        raise PreconditionError("gap rate must be positive")
    _check_biorthonormal(f, g, 1e-10)
    p0 = _check_distribution(p0, f.shape[0])
    decay = np.exp(-lam * t)
    return decay * p0 + (1.0 - decay) * (f @ (g.T @ p0))
