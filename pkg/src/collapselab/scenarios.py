"""Named scenario implementations behind the command-line runner.

Each runner turns a validated ScenarioConfig into numeric tables plus a
list of pass/fail checks; writing files and exit codes live in the CLI.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .born_analysis import born_probabilities, collapse_statistics
from .density_matrix import (
    compare_mc_density,
    density_distance,
    gisin_experiment,
)
from .grw import measure_localization, overlap_window_error, make_grw_model
from .hilbert import Ensemble, normalize, sector_weight
from .jump_engine import evolve_ensemble, make_bell_jump
from .markov_kernel import (
    build_equal_gap_kernel,
    build_generator,
    closed_form_equal_gap,
    one_step_transition,
    propagate,
    propagator,
    reduce_qubit_model,
    spectral_decompose,
)

ROUNDING_CUSHION = 1e-12


@dataclass
class Check:
    """One verified invariant: ``value`` against ``threshold`` with the
    comparison direction recorded in ``passed``."""

    name: str
    passed: bool
    value: float
    threshold: float


@dataclass
class RunResult:
    tables: dict = field(default_factory=dict)  # name -> (header, rows)
    checks: list = field(default_factory=list)

    def add_check(self, name: str, passed, value: float, threshold: float):
        self.checks.append(Check(name, bool(passed), float(value), float(threshold)))

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)


def run_collapse(cfg) -> RunResult:
    result = RunResult()
    sectors = cfg.sectors
    n_sectors = sectors.n_sectors
    reference = np.array(
        [sector_weight(cfg.initial, sectors, n) for n in range(n_sectors)]
    )
    e = Ensemble.pure(cfg.initial, cfg.ensemble_size, cfg.seed)
    born_rows, collapse_rows = [], []
    now = 0.0
    stats = None
    for t in cfg.times:
        e = evolve_ensemble(e, cfg.model, float(t - now), cfg.workers)
        now = float(t)
        values, errors = born_probabilities(e, sectors)
        born_rows.append([t, *values, *errors])
        stats = collapse_statistics(e, sectors, cfg.collapse_eps)
        collapse_rows.append([t, *stats.fractions, stats.remainder])
        result.add_check(
            f"born_sum_t{t:g}",
            abs(values.sum() - 1.0) <= 1e-10,
            abs(values.sum() - 1.0),
            1e-10,
        )
        for n in range(n_sectors):
            tol = 3 * errors[n] + ROUNDING_CUSHION
            result.add_check(
                f"born_constancy_s{n}_t{t:g}",
                abs(values[n] - reference[n]) <= tol,
                abs(values[n] - reference[n]),
                tol,
            )
    for n in range(n_sectors):
        sigma = np.sqrt(reference[n] * (1 - reference[n]) / cfg.ensemble_size)
        tol = 3 * sigma + stats.remainder + ROUNDING_CUSHION
        result.add_check(
            f"collapse_fraction_s{n}",
            abs(stats.fractions[n] - reference[n]) <= tol,
            abs(stats.fractions[n] - reference[n]),
            tol,
        )
    header = (
        ["time"]
        + [f"p{n}" for n in range(n_sectors)]
        + [f"se{n}" for n in range(n_sectors)]
    )
    result.tables["born"] = (header, born_rows)
    result.tables["collapse"] = (
        ["time"] + [f"fraction{n}" for n in range(n_sectors)] + ["remainder"],
        collapse_rows,
    )
    return result


def _random_chain(rng):
    c2 = rng.uniform(0.05, 0.95)
    rate = rng.uniform(0.5, 2.0)
    return reduce_qubit_model(
        make_bell_jump(2, np.array([np.sqrt(c2), np.sqrt(1 - c2)]), rate)
    )


def run_spectral(cfg) -> RunResult:
    result = RunResult()
    bins = cfg.kernel_bins
    rep_chain = reduce_qubit_model(cfg.model)
    rep_k = build_generator(rep_chain, bins)
    rep_spec = spectral_decompose(rep_k)
    result.tables["eigenvalues"] = (
        ["real", "imag", "zero_mode"],
        [
            [w.real, w.imag, int(z)]
            for w, z in zip(rep_spec.eigenvalues, rep_spec.zero_modes)
        ],
    )

    rng = np.random.default_rng(cfg.seed)
    chains = [rep_chain] + [_random_chain(rng) for _ in range(cfg.kernel_chains - 1)]
    rows = []
    worst = {
        "column_sums": 0.0,
        "born_left_null": 0.0,
        "biorthonormality": 0.0,
        "completeness": 0.0,
        "propagator_reconstruction": 0.0,
        "eigenvalue_real_part": -np.inf,
        "conjugation_closure": 0.0,
    }
    for idx, chain in enumerate(chains):
        k = build_generator(chain, bins)
        spec = spectral_decompose(k)
        p = k.midpoints
        scale = max(chain.rate, 1.0)
        col = float(np.abs(k.entries.sum(axis=0)).max()) / scale
        null = (
            max(np.abs(p @ k.entries).max(), np.abs((1 - p) @ k.entries).max()) / scale
        )
        gram = float(np.abs(spec.left.T @ spec.right - np.eye(bins)).max())
        comp = float(np.abs(spec.right @ spec.left.T - np.eye(bins)).max())
        recon = 0.0
        for t in cfg.reconstruction_times:
            approx = (spec.right * np.exp(spec.eigenvalues * t)) @ spec.left.T
            recon = max(recon, float(np.abs(approx - propagator(k, t).matrix).max()))
        re_max = float(spec.eigenvalues.real.max())
        conj = float(
            max(
                np.abs(spec.eigenvalues - np.conj(w)).min()
                for w in spec.eigenvalues
            )
        )
        rows.append([idx, chain.rate, col, null, gram, comp, recon, re_max, conj])
        worst["column_sums"] = max(worst["column_sums"], col)
        worst["born_left_null"] = max(worst["born_left_null"], null)
        worst["biorthonormality"] = max(worst["biorthonormality"], gram)
        worst["completeness"] = max(worst["completeness"], comp)
        worst["propagator_reconstruction"] = max(worst["propagator_reconstruction"], recon)
        worst["eigenvalue_real_part"] = max(worst["eigenvalue_real_part"], re_max)
        worst["conjugation_closure"] = max(worst["conjugation_closure"], conj)
    result.tables["structure"] = (
        [
            "chain",
            "rate",
            "column_sum_residual",
            "born_null_residual",
            "biorthonormality_residual",
            "completeness_residual",
            "reconstruction_residual",
            "max_real_eigenvalue",
            "conjugation_residual",
        ],
        rows,
    )
    for name, tol in [
        ("column_sums", 1e-12),
        ("born_left_null", 1e-12),
        ("biorthonormality", 1e-8),
        ("completeness", 1e-8),
        ("propagator_reconstruction", 1e-8),
        ("eigenvalue_real_part", 1e-10),
        ("conjugation_closure", 1e-8),
    ]:
        result.add_check(name, worst[name] <= tol, worst[name], tol)

    errors = []
    for dt in cfg.fd_steps:
        pi = one_step_transition(rep_chain, bins, dt / rep_chain.rate)
        step = dt / rep_chain.rate
        errors.append(float(np.abs((pi - np.eye(bins)) / step - rep_k.entries).max()))
    result.tables["fd"] = (
        ["step", "error"],
        [[dt, err] for dt, err in zip(cfg.fd_steps, errors)],
    )
    ratio = errors[0] / errors[1]
    expected = cfg.fd_steps[0] / cfg.fd_steps[1]
    result.add_check(
        "fd_first_order_ratio",
        expected / 2 <= ratio <= expected * 2,
        ratio,
        expected,
    )
    return result


def run_equal_gap(cfg) -> RunResult:
    result = RunResult()
    bins = cfg.kernel_bins
    chain = reduce_qubit_model(cfg.model)
    k = build_generator(chain, bins)
    spec = spectral_decompose(k)
    result.tables["eigenvalues"] = (
        ["real", "imag", "zero_mode"],
        [[w.real, w.imag, int(z)] for w, z in zip(spec.eigenvalues, spec.zero_modes)],
    )
    result.add_check("zero_mode_count", spec.n_zero_modes == 2, spec.n_zero_modes, 2)
    nonzero = spec.eigenvalues[~spec.zero_modes]
    gap_resid = float(np.abs(nonzero + chain.rate).max()) if nonzero.size else np.inf
    result.add_check("spectrum_gap_at_rate", gap_resid <= 1e-8, gap_resid, 1e-8)

    f = spec.right[:, spec.zero_modes]
    g = spec.left[:, spec.zero_modes]
    rebuilt = build_equal_gap_kernel(f, g, chain.rate, bins)
    rebuild_resid = float(np.abs(rebuilt.entries - k.entries).max())
    result.add_check("generator_rebuild", rebuild_resid <= 1e-10, rebuild_resid, 1e-10)

    rng = np.random.default_rng(cfg.seed)
    rows = []
    worst = 0.0
    for start in range(cfg.equalgap_starts):
        p0 = rng.random(bins)
        p0 /= p0.sum()
        for t in cfg.times:
            t = float(t) / chain.rate
            closed = closed_form_equal_gap(p0, t, f, g, chain.rate)
            direct = propagate(k, p0, t)
            diff = float(np.abs(closed - direct).max())
            rows.append([start, t, diff])
            worst = max(worst, diff)
    result.tables["closedform"] = (["start", "time", "max_abs_diff"], rows)
    result.add_check(
        "closed_form_vs_expm", worst <= cfg.equalgap_tolerance, worst, cfg.equalgap_tolerance
    )
    return result


def run_density(cfg) -> RunResult:
    result = RunResult()
    base = Ensemble.from_members([(cfg.initial, 1.0)], seed=cfg.seed)
    cmp = compare_mc_density(
        cfg.model, base, cfg.times, n_per_member=cfg.ensemble_size, workers=cfg.workers
    )
    rows = []
    for i, t in enumerate(cmp.times):
        mc01 = abs(cmp.sampled[i].matrix[0, 1])
        an01 = abs(cmp.analytic[i].matrix[0, 1])
        sig01 = cmp.sigma[i][0, 1]
        dev = cmp.deviation[i]
        sig = 3 * cmp.sigma[i] + ROUNDING_CUSHION
        ratio = float((dev / np.where(sig > 0, sig, np.inf)).max()) * 3.0
        rows.append([t, mc01, an01, sig01, float(dev.max())])
        result.add_check(
            f"density_3sigma_t{t:g}", bool(np.all(dev <= sig)), ratio, 3.0
        )
        diag_dev = float(np.abs(np.diag(dev)).max())
        diag_tol = 3 * float(np.abs(np.diag(cmp.sigma[i])).max()) + ROUNDING_CUSHION
        result.add_check(
            f"diagonal_drift_t{t:g}", diag_dev <= diag_tol, diag_dev, diag_tol
        )
    result.tables["density"] = (
        ["time", "offdiag_mc", "offdiag_analytic", "offdiag_sigma", "max_deviation"],
        rows,
    )
    return result


def _control_ensembles(seed: int):
    """Fixed pair with distinct densities: off-diagonal 0.4 versus 0."""
    plus = normalize([np.sqrt(0.5), np.sqrt(0.5)])
    minus = normalize([np.sqrt(0.5), -np.sqrt(0.5)])
    a = Ensemble.from_members([(plus, 0.9), (minus, 0.1)], seed=seed * 2 + 5)
    b = Ensemble.from_members(
        [(normalize([1.0, 0.0]), 0.5), (normalize([0.0, 1.0]), 0.5)], seed=seed * 2 + 6
    )
    return a, b


def run_gisin(cfg) -> RunResult:
    result = RunResult()
    outcome = gisin_experiment(
        cfg.decomp_a,
        cfg.decomp_b,
        cfg.model,
        cfg.times,
        n_total=cfg.ensemble_size,
        workers=cfg.workers,
    )
    rows = []
    for i, t in enumerate(outcome.times):
        dist = outcome.distance[i]
        band = 3 * outcome.sigma[i] + ROUNDING_CUSHION
        ratio = float((dist / np.where(band > 0, band, np.inf)).max()) * 3.0
        rows.append([t, float(dist.max()), float(outcome.sigma[i].max())])
        result.add_check(
            f"indistinguishable_t{t:g}", bool(np.all(dist <= band)), ratio, 3.0
        )
    result.tables["gisin"] = (["time", "max_distance", "max_sigma"], rows)

    if cfg.negative_control:
        from .errors import PreconditionError

        a, b = _control_ensembles(cfg.seed)
        rejected = False
        try:
            gisin_experiment(a, b, cfg.model, cfg.times, n_total=cfg.ensemble_size)
        except PreconditionError:
            rejected = True
        result.add_check("control_rejected", rejected, float(rejected), 1.0)
        copies = max(1, cfg.ensemble_size // len(a))
        diff, sigma = density_distance(a.replicate(copies), b.replicate(copies))
        detected = diff[0, 1] > 3 * sigma[0, 1]
        result.add_check(
            "control_detected", detected, float(diff[0, 1]), float(3 * sigma[0, 1])
        )
        result.tables["control"] = (
            ["entry", "distance", "three_sigma"],
            [["offdiag", float(diff[0, 1]), float(3 * sigma[0, 1])]],
        )
    return result


def run_grw(cfg) -> RunResult:
    result = RunResult()
    report = measure_localization(
        cfg.initial,
        cfg.grid,
        cfg.times,
        n_traj=cfg.ensemble_size,
        separations=cfg.separations,
        seed=cfg.seed,
        workers=cfg.workers,
    )
    rate_rows, pair_rows = [], []
    for pair in report.pairs:
        ratio = pair.fitted_rate / pair.analytic_rate if pair.fittable else np.nan
        rate_rows.append(
            [
                pair.separation,
                pair.fitted_rate,
                pair.fitted_se,
                pair.analytic_rate,
                ratio,
                int(pair.fittable),
            ]
        )
        for t, v, s in zip(report.times, pair.values, pair.errors):
            pair_rows.append([pair.separation, t, abs(v), s])
        result.add_check(
            f"rate_sep{pair.separation:g}",
            pair.fittable and abs(ratio - 1.0) <= cfg.rate_tolerance,
            abs(ratio - 1.0) if pair.fittable else np.inf,
            cfg.rate_tolerance,
        )
    result.tables["rates"] = (
        ["separation", "fitted_rate", "fitted_se", "analytic_rate", "ratio", "fittable"],
        rate_rows,
    )
    result.tables["pairs"] = (["separation", "time", "abs_value", "sigma"], pair_rows)
    result.tables["ipr"] = (
        ["time", "ipr", "ipr_sigma"],
        [[0.0, report.ipr_initial, 0.0]]
        + [[t, v, s] for t, v, s in zip(report.times, report.ipr, report.ipr_sigma)],
    )

    drift = report.max_diag_drift_sigmas
    result.add_check("diagonal_drift_sigmas", drift <= 3.0, drift, 3.0)
    growth = report.ipr[-1] - report.ipr_initial
    result.add_check(
        "localization_ipr_growth",
        growth > 3 * report.ipr_sigma[-1],
        growth,
        3 * float(report.ipr_sigma[-1]),
    )
    window = overlap_window_error(make_grw_model(cfg.grid), cfg.grid)
    result.add_check("overlap_closed_form", window <= 1e-6, window, 1e-6)
    return result


RUNNERS = {
    "collapse": run_collapse,
    "spectral": run_spectral,
    "equal-gap": run_equal_gap,
    "density": run_density,
    "gisin": run_gisin,
    "grw": run_grw,
}
