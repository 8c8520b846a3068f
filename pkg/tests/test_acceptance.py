"""Acceptance suite: every release criterion at its stated tolerance.

Each test prints one `[acceptance N] PASS/FAIL` line (visible with -s or in
failure output) and asserts the criterion exactly as specified.
"""

import filecmp
import time
from pathlib import Path

import numpy as np

from collapselab import (
    Ensemble,
    SectorMap,
    evolve_ensemble,
    make_bell_jump,
    normalize,
    sample_uniform,
)
from collapselab.born_analysis import born_probabilities, collapse_statistics
from collapselab.cli import run_scenario
from collapselab.density_matrix import (
    compare_mc_density,
    density_distance,
    gisin_experiment,
    jump_average_bilinears,
)
from collapselab.grw import (
    GrwGrid,
    gaussian_packet,
    make_grw_model,
    measure_localization,
    overlap_window_error,
)
from collapselab.markov_kernel import (
    build_generator,
    closed_form_equal_gap,
    one_step_transition,
    propagate,
    propagator,
    reduce_qubit_model,
    spectral_decompose,
)

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def verdict(n, label, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"[acceptance {n}] {status}: {label}" + (f" ({detail})" if detail else ""))
    assert ok, f"criterion {n} failed: {label} {detail}"


def soft_qubit(c2, rate=1.0):
    return make_bell_jump(2, [np.sqrt(c2), np.sqrt(1 - c2)], rate)


def test_criterion_1_born_rule():
    start = time.perf_counter()
    model = make_bell_jump(2, [1.0], 1.0)
    sectors = SectorMap.singletons(2)
    psi0 = normalize([np.sqrt(0.3), np.sqrt(0.7)])
    n = 20_000
    e = Ensemble.pure(psi0, n, seed=7)
    constancy_ok, now = True, 0.0
    for t in (0.0, 1.0, 5.0, 10.0):
        e = evolve_ensemble(e, model, t - now)
        now = t
        values, errors = born_probabilities(e, sectors)
        constancy_ok &= abs(values[0] - 0.3) <= 3 * errors[0] + 1e-12
    fraction = collapse_statistics(e, sectors, eps=1e-3).fractions[0]
    fraction_ok = abs(fraction - 0.3) <= 0.0097
    elapsed = time.perf_counter() - start
    verdict(
        1,
        "Born rule: projective qubit collapse fractions and P_n constancy",
        fraction_ok and constancy_ok and elapsed < 10.0,
        f"fraction={fraction:.4f}, runtime={elapsed:.1f}s",
    )


def test_criterion_2_equal_gap_closed_form():
    start = time.perf_counter()
    rate, bins = 1.0, 101
    chain = reduce_qubit_model(make_bell_jump(2, [1.0], rate))
    k = build_generator(chain, bins)
    spec = spectral_decompose(k)
    w = np.sort(spec.eigenvalues.real)[::-1]
    spectrum_ok = (
        spec.n_zero_modes == 2
        and np.abs(w[:2]).max() <= 1e-8
        and np.abs(w[2:] + rate).max() <= 1e-8
        and np.abs(spec.eigenvalues.imag).max() <= 1e-8
    )
    f = spec.right[:, spec.zero_modes]
    g = spec.left[:, spec.zero_modes]
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(10):
        p0 = rng.random(bins)
        p0 /= p0.sum()
        for t in (0.1 / rate, 1.0 / rate, 10.0 / rate):
            diff = np.abs(
                closed_form_equal_gap(p0, t, f, g, rate) - propagate(k, p0, t)
            ).max()
            worst = max(worst, float(diff))
    elapsed = time.perf_counter() - start
    verdict(
        2,
        "equal-rate closed form vs matrix exponential",
        spectrum_ok and worst <= 1e-8 and elapsed < 5.0,
        f"max diff={worst:.2e}, runtime={elapsed:.1f}s",
    )


def test_criterion_3_generator_structure():
    rng = np.random.default_rng(3)
    bins = 101
    ok = True
    for _ in range(20):
        c2 = rng.uniform(0.05, 0.95)
        rate = rng.uniform(0.5, 2.0)
        chain = reduce_qubit_model(soft_qubit(c2, rate))
        k = build_generator(chain, bins)
        spec = spectral_decompose(k)
        p = k.midpoints
        scale = max(rate, 1.0)
        ok &= np.abs(k.entries.sum(axis=0)).max() <= 1e-12 * scale
        ok &= np.abs(p @ k.entries).max() <= 1e-12 * scale
        ok &= np.abs((1 - p) @ k.entries).max() <= 1e-12 * scale
        ok &= np.abs(spec.left.T @ spec.right - np.eye(bins)).max() <= 1e-8
        ok &= np.abs(spec.right @ spec.left.T - np.eye(bins)).max() <= 1e-8
        for t in (0.3, 2.0):
            recon = (spec.right * np.exp(spec.eigenvalues * t)) @ spec.left.T
            ok &= np.abs(recon - propagator(k, t).matrix).max() <= 1e-8
        ok &= spec.eigenvalues.real.max() <= 1e-10
        ok &= max(
            np.abs(spec.eigenvalues - np.conj(w)).min() for w in spec.eigenvalues
        ) <= 1e-8
    verdict(3, "generator structure over 20 random qubit chains", bool(ok))


def test_criterion_4_lift_condition_oracle():
    grid = GrwGrid(points=128, spacing=0.25, alpha=1.0, omega=1.0)
    model = make_grw_model(grid)
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(100):
        psi = sample_uniform(128, rng)
        averaged = jump_average_bilinears(model, psi)
        outer = np.outer(psi.amplitudes, psi.amplitudes.conj())
        worst = max(worst, float(np.abs(averaged - model.overlap * outer).max()))
    verdict(
        4,
        "exact shift-sum maps bilinears through the overlap matrix",
        worst <= 1e-12,
        f"residual={worst:.2e}",
    )


def test_criterion_5_soft_collapse_density():
    start = time.perf_counter()
    model = soft_qubit(0.9, rate=1.0)
    psi0 = normalize([np.sqrt(0.5), np.sqrt(0.5)])
    base = Ensemble.from_members([(psi0, 1.0)], seed=5)
    times = (0.5, 1.0, 2.0)
    cmp = compare_mc_density(model, base, times, n_per_member=20_000)
    rho0_offdiag = 0.5
    ok = True
    for i, t in enumerate(times):
        analytic = rho0_offdiag * np.exp(-0.4 * t)
        assert abs(abs(cmp.analytic[i].matrix[0, 1]) - analytic) < 1e-12
        ok &= cmp.deviation[i][0, 1] <= 3 * cmp.sigma[i][0, 1] + 1e-12
        diag_dev = np.abs(np.diag(cmp.deviation[i])).max()
        ok &= diag_dev <= 3 * np.abs(np.diag(cmp.sigma[i])).max() + 1e-12
    elapsed = time.perf_counter() - start
    verdict(
        5,
        "soft-collapse off-diagonal decay at 0.4*rate with frozen diagonal",
        bool(ok) and elapsed < 30.0,
        f"runtime={elapsed:.1f}s",
    )


def test_criterion_6_grw_rates():
    start = time.perf_counter()
    grid = GrwGrid(points=128, spacing=0.25, alpha=1.0, omega=1.0)
    expected = {
        1.0: 1 - np.exp(-0.5),
        2.0: 1 - np.exp(-2.0),
    }
    assert abs(expected[1.0] - 0.393469) < 1e-6
    assert abs(expected[2.0] - 0.864665) < 1e-6
    psi0 = gaussian_packet(grid, width=4.0)
    report = measure_localization(
        psi0,
        grid,
        times=np.arange(1, 7) * 0.25,
        n_traj=20_000,
        separations=(1.0, 2.0),
        seed=6,
    )
    rates_ok = True
    details = []
    for pair in report.pairs:
        rel = abs(pair.fitted_rate / expected[pair.separation] - 1.0)
        rates_ok &= pair.fittable and rel <= 0.10
        details.append(f"sep {pair.separation:g}: fit={pair.fitted_rate:.4f}")
    diag_ok = report.max_diag_drift_sigmas <= 3.0
    overlap_ok = overlap_window_error(make_grw_model(grid), grid) <= 1e-6
    elapsed = time.perf_counter() - start
    verdict(
        6,
        "GRW off-diagonal decay rates, conserved diagonal, overlap closed form",
        bool(rates_ok and diag_ok and overlap_ok) and elapsed < 120.0,
        "; ".join(details) + f", runtime={elapsed:.1f}s",
    )


def test_criterion_7_gisin_no_signaling():
    model = make_bell_jump(2, [1.0], 1.0)
    a = Ensemble.from_members(
        [(normalize([1, 0]), 0.75), (normalize([0, 1]), 0.25)], seed=71
    )
    plus = normalize([np.sqrt(0.75), np.sqrt(0.25)])
    minus = normalize([np.sqrt(0.75), -np.sqrt(0.25)])
    b = Ensemble.from_members([(plus, 0.5), (minus, 0.5)], seed=72)
    times = np.linspace(0.0, 5.0, 6)
    result = gisin_experiment(a, b, model, times, n_total=20_000)
    equal_ok = result.within(3.0)
    # the 3 sigma band at this sample size sits near 0.012
    band_ok = float((3 * result.sigma).max()) < 0.02

    # negative control: distinct initial densities must be detected at t=0
    p = normalize([np.sqrt(0.5), np.sqrt(0.5)])
    m = normalize([np.sqrt(0.5), -np.sqrt(0.5)])
    ctrl_a = Ensemble.from_members([(p, 0.9), (m, 0.1)], seed=73).replicate(10_000)
    ctrl_b = Ensemble.from_members(
        [(normalize([1, 0]), 0.5), (normalize([0, 1]), 0.5)], seed=74
    ).replicate(10_000)
    diff, sigma = density_distance(ctrl_a, ctrl_b)
    control_ok = diff[0, 1] > 3 * sigma[0, 1]
    verdict(
        7,
        "equal-density decompositions indistinguishable, control detected",
        equal_ok and band_ok and control_ok,
        f"sup distance={result.sup_distance:.4f}, control={diff[0, 1]:.3f}",
    )


def test_criterion_8_finite_difference_kernel():
    chain = reduce_qubit_model(soft_qubit(0.8, rate=1.0))
    bins = 101
    k = build_generator(chain, bins)

    def fd_error(dt):
        pi = one_step_transition(chain, bins, dt)
        return np.abs((pi - np.eye(bins)) / dt - k.entries).max()

    ratio = fd_error(1e-2 / chain.rate) / fd_error(1e-3 / chain.rate)
    verdict(
        8,
        "one-step transition matrix reproduces the kernel at first order",
        5.0 <= ratio <= 20.0,
        f"error ratio={ratio:.2f}",
    )


def test_criterion_9_determinism(tmp_path):
    cfg = CONFIG_DIR / "collapse_born.toml"
    out1, out8, rerun = tmp_path / "w1", tmp_path / "w8", tmp_path / "rerun"
    assert run_scenario(cfg, out_dir=out1, workers=1) == 0
    assert run_scenario(cfg, out_dir=out8, workers=8) == 0
    assert run_scenario(cfg, out_dir=rerun, workers=1) == 0
    names = sorted(p.name for p in out1.iterdir())
    ok = names == sorted(p.name for p in out8.iterdir())
    for other in (out8, rerun):
        match, mismatch, errors = filecmp.cmpfiles(out1, other, names, shallow=False)
        ok &= not mismatch and not errors and len(match) == len(names)
    verdict(9, "byte-identical outputs across reruns and worker counts", bool(ok))
