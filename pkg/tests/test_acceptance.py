"""The ten acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line (with the measured numbers) in the
report printed at the end of the pytest run, then asserts. Criteria that
the mathematics does not allow at the stated tolerance stay red; the
numbers in their report lines show by how much they miss.
"""

import itertools
import math
import time

import numpy as np
import pytest
from scipy.special import erfc

from abcdetect.closed_form_1d import Packet1D
from abcdetect.detection_1d import (
    contrast_infinity,
    contrast_L,
    contrast_laplace_approx,
    p_abc_dollard,
    p_abc_time_integral,
    p_st_1d,
    p_st_deficit,
)
from abcdetect.pde_oracle import Grid1D, evolve_pair, evolve_robin, gaussian_on_grid, validate_closed_form
from abcdetect.scattering_2d import (
    Inclined,
    LShaped,
    Packet2D,
    angular_grid,
    dp_abc_dtheta_farfield,
    dp_abc_dtheta_finite_L,
    dp_st_dtheta,
    find_density_peaks,
    refine_peak,
    section_totals_lshaped,
)

from conftest import ACCEPTANCE_REPORT


def report(n, passed, text):
    ACCEPTANCE_REPORT.append(f"criterion {n:2d} [{'PASS' if passed else 'FAIL'}]: {text}")


def test_criterion_01_gaussian_st_probability():
    start = time.perf_counter()
    k0 = 20.0
    p = p_st_1d(Packet1D(k0))
    deficit = p_st_deficit(Packet1D(k0))
    asymptotic = math.exp(-k0 * k0) / (2.0 * k0 * math.sqrt(math.pi))
    rel = abs(deficit - asymptotic) / deficit
    elapsed = time.perf_counter() - start
    ok = p == 1.0 - 0.5 * erfc(k0) and rel < 0.01 and elapsed < 1.0
    report(1, ok, f"P_ST(20) = {p!r}, deficit {deficit:.6e} vs asymptotic {asymptotic:.6e} "
                  f"(rel. {rel:.2e} < 1e-2), {elapsed:.2f}s < 1s")
    assert p == 1.0 - 0.5 * erfc(k0)
    assert rel < 0.01
    assert elapsed < 1.0


def test_criterion_02_fig1_reproduction():
    start = time.perf_counter()
    packet = Packet1D(20.0)
    kappas = np.geomspace(1.0, 400.0, 41)
    # Re(beta) much larger than k0 + Im(beta) makes the closed form overflow;
    # the grid stops at 20
    re_betas = (0.0, 5.0, 10.0, 20.0)
    gaps, far = {}, {}
    for re, kap in itertools.product(re_betas, kappas):
        beta = complex(re, kap)
        c_inf = contrast_infinity(packet, beta)
        c_L = contrast_L(packet, beta, 2.0).contrast
        far[re, kap] = c_inf
        gaps[re, kap] = abs(c_L - c_inf)
    elapsed = time.perf_counter() - start
    curve = [far[0.0, k] for k in kappas]
    k_min = float(kappas[int(np.argmin(curve))])
    worst_key = max(gaps, key=gaps.get)
    n_ok = sum(g < 1e-3 for g in gaps.values())
    ok = 18.0 <= k_min <= 22.0 and n_ok == len(gaps) and elapsed < 120.0
    report(2, ok, f"argmin Im(beta) = {k_min:.3f} in [18, 22]; max |C_2 - C_inf| = "
                  f"{gaps[worst_key]:.3e} at beta = {complex(*worst_key)} (need < 1e-3; "
                  f"{n_ok}/{len(gaps)} points pass; 1/2 erfc(2) = {0.5 * erfc(2.0):.3e}), "
                  f"{elapsed:.1f}s < 120s")
    assert 18.0 <= k_min <= 22.0
    assert elapsed < 120.0
    assert max(gaps.values()) < 1e-3


def test_criterion_03_fig2_floor():
    start = time.perf_counter()
    k0, k1 = 5.0, 1000.0
    packet = Packet1D(k0, k1)
    kappas = np.geomspace(0.1, 1e4, 81)
    exact = np.array([contrast_infinity(packet, 1j * k) for k in kappas])
    floor = float(exact.min())
    track = [abs(contrast_laplace_approx(k0, k1, 1j * k) - contrast_infinity(packet, 1j * k))
             for k in np.geomspace(2.0, 200.0, 61)]
    elapsed = time.perf_counter() - start
    ok = 0.48 <= floor <= 0.52 and max(track) < 0.01 and elapsed < 120.0
    report(3, ok, f"min C_inf = {floor:.4f} in [0.48, 0.52]; max |approx - exact| on [2, 200] = "
                  f"{max(track):.2e} < 1e-2, {elapsed:.1f}s < 120s")
    assert 0.48 <= floor <= 0.52
    assert max(track) < 0.01
    assert elapsed < 120.0


@pytest.mark.slow
def test_criterion_04_closed_form_vs_pde_oracle():
    start = time.perf_counter()
    k0, beta, L, ts = 5.0, 5j, 10.0, [1.0, 2.0, 4.0]
    levels = [(2e-3, 4e-4), (1e-3, 2e-4), (5e-4, 1e-4)]
    errors = []
    for h, dt in levels:
        grid = Grid1D.for_packet(k0, L, ts[-1], h, dt)
        errors.append(validate_closed_form(k0, beta, L, grid, ts))
    elapsed = time.perf_counter() - start
    ratios = [a / b for a, b in zip(errors, errors[1:])]
    ok = errors[-1] < 1e-4 and all(3.5 < r < 4.5 for r in ratios) and elapsed < 300.0
    report(4, ok, "errors " + ", ".join(f"{e:.3e}" for e in errors)
           + f" at (h, dt) = {levels}; ratios " + ", ".join(f"{r:.2f}" for r in ratios)
           + f"; finest < 1e-4, {elapsed:.0f}s < 300s")
    assert errors[-1] < 1e-4
    assert all(3.5 < r < 4.5 for r in ratios)
    assert elapsed < 300.0


def test_criterion_05_dual_formula_identity():
    start = time.perf_counter()
    diffs = [abs(p_abc_time_integral(Packet1D(k0), 1j * kap, 10.0)
                 - p_abc_dollard(Packet1D(k0), 1j * kap, 10.0))
             for k0 in (2.0, 5.0, 10.0) for kap in (1.0, 5.0, 20.0)]
    elapsed = time.perf_counter() - start
    ok = max(diffs) < 1e-6 and elapsed < 60.0
    report(5, ok, f"max |time integral - momentum form| on 3x3 grid = {max(diffs):.2e} < 1e-6, "
                  f"{elapsed:.2f}s < 60s")
    assert max(diffs) < 1e-6
    assert elapsed < 60.0


def _random_state(rng, grid):
    x = grid.x
    psi = np.exp(-((x - rng.uniform(-2.0, 2.0)) / rng.uniform(0.7, 1.5)) ** 2 / 2.0
                 + 1j * rng.uniform(-3.0, 6.0) * x)
    psi[0] = 0.0
    return psi / math.sqrt(float(grid.norm2(psi)[0]))


def test_criterion_06_contractivity_and_norm_ledger():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    grid = Grid1D.for_packet(6.0, 5.0, 1.0, 0.01, 1e-3)
    growth = []
    for _ in range(10):
        norms, _ = evolve_pair(_random_state(rng, grid), _random_state(rng, grid), 2j, grid, 1.0)
        growth.append(float(np.max(np.diff(norms) / norms[:-1])))
    # norm lost per step versus dt * Im(beta)|psi(L)|^2 sampled at the step ends
    residuals = []
    dts = (2e-3, 1e-3, 5e-4)
    for dt in dts:
        g = Grid1D.for_packet(5.0, 6.0, 1.0, 2e-3, dt)
        _, led = evolve_robin(gaussian_on_grid(g, 5.0), 5j, g, 1.0)
        d = led.absorbed_density
        residuals.append(float(np.max(np.abs(-np.diff(led.norms) - 0.5 * dt * (d[1:] + d[:-1])))))
    orders = [math.log2(a / b) for a, b in zip(residuals, residuals[1:])]
    elapsed = time.perf_counter() - start
    ok = max(growth) <= 1e-14 and all(abs(o - 3.0) < 0.2 for o in orders) and elapsed < 60.0
    report(6, ok, f"max relative step growth of ||dpsi||^2 over 10 pairs = {max(growth):.2e} (<= 1e-14, i.e. no growth beyond rounding); "
                  "norm-loss residuals " + ", ".join(f"{r:.2e}" for r in residuals)
           + " -> observed order " + ", ".join(f"{o:.2f}" for o in orders)
           + f" (expect 3), {elapsed:.1f}s < 60s")
    assert max(growth) <= 1e-14
    assert all(abs(o - 3.0) < 0.2 for o in orders)
    assert elapsed < 60.0


def test_criterion_07_fig5_reproduction():
    start = time.perf_counter()
    p = Packet2D(-1.0, math.sqrt(3.0))
    beta = 2j
    deltas = (0.0, 0.1, -0.1, 0.2, -0.2)

    # (a) the ST density knows nothing about the screen orientation
    common = np.linspace(math.pi / 2 - 0.2 - math.pi + 0.01, math.pi / 2 - 0.2 - 0.01, 301)
    st = [dp_st_dtheta(p, common) for _ in deltas]
    st_identical = all(np.array_equal(st[0], s) for s in st[1:])

    # (b) far-field ABC curves: maxima
    peaks, marker_gap = {}, {}
    for da in deltas:
        alpha = math.pi / 2 + da
        geom = Inclined(alpha, 15.0)
        theta = angular_grid(geom, 721)
        dens = dp_abc_dtheta_farfield(p, theta, beta, alpha)
        peaks[da] = refine_peak(lambda th, a=alpha: dp_abc_dtheta_farfield(p, th, beta, a), theta, dens)
        # (c) L = 15 markers from the finite-L line integral against the far-field curve
        markers = angular_grid(geom, 61)
        finite = dp_abc_dtheta_finite_L(p, markers, beta, geom)
        marker_gap[da] = float(np.max(np.abs(finite - dp_abc_dtheta_farfield(p, markers, beta, alpha))))
    elapsed = time.perf_counter() - start

    height_diffs = {(a, b): abs(peaks[a][1] - peaks[b][1]) for a, b in itertools.combinations(deltas, 2)}
    place_diffs = {(a, b): abs(peaks[a][0] - peaks[b][0]) for a, b in itertools.combinations(deltas, 2)}
    closest = min(height_diffs, key=height_diffs.get)
    heights_ok = min(height_diffs.values()) > 0.05
    markers_ok = max(marker_gap.values()) < 1e-3
    ok = st_identical and heights_ok and markers_ok and elapsed < 300.0
    report(7, ok, f"ST identical across alpha: {st_identical}; peak heights "
           + ", ".join(f"{da:+.1f}: {peaks[da][1]:.4f}" for da in deltas)
           + f" -> smallest pairwise difference {height_diffs[closest]:.4f} for dalpha = {closest} "
           f"(need > 0.05; peak locations differ by >= {min(place_diffs.values()):.3f} rad); "
           "max |L=15 marker - far field| "
           + ", ".join(f"{da:+.1f}: {marker_gap[da]:.2e}" for da in deltas)
           + f" (need < 1e-3), {elapsed:.1f}s < 300s")
    assert st_identical
    assert elapsed < 300.0
    assert heights_ok
    assert markers_ok


def test_criterion_08_lshaped_screen():
    start = time.perf_counter()
    p = Packet2D(9.66, 2.59)
    beta = 2.59j
    geom = LShaped(50.0)
    theta = angular_grid(geom, 721)
    abc_peaks, _ = find_density_peaks(theta, dp_abc_dtheta_finite_L(p, theta, beta, geom))
    st_peaks, _ = find_density_peaks(theta, dp_st_dtheta(p, theta))
    vertical, horizontal = section_totals_lshaped(p, beta, 100.0)
    elapsed = time.perf_counter() - start
    ok = (len(abc_peaks) == 2 and len(st_peaks) == 1 and 0.63 <= vertical <= 0.69
          and 0.30 <= horizontal <= 0.36 and elapsed < 600.0)
    report(8, ok, f"ABC maxima at theta = {np.round(abc_peaks, 3).tolist()} (need 2), ST maxima "
                  f"{len(st_peaks)} (need 1); totals at L = 100: vertical {vertical:.4f} in [0.63, 0.69], "
                  f"horizontal {horizontal:.4f} in [0.30, 0.36], {elapsed:.1f}s < 600s")
    assert len(abc_peaks) == 2
    assert len(st_peaks) == 1
    assert 0.63 <= vertical <= 0.69
    assert 0.30 <= horizontal <= 0.36
    assert elapsed < 600.0


def test_criterion_09_neumann_and_dirichlet_limits():
    packet = Packet1D(5.0)
    values = {b: p_abc_time_integral(packet, b, 10.0) for b in (1e-8j, 1e6j)}
    ok = all(v < 1e-6 for v in values.values())
    report(9, ok, "P_ABC: " + ", ".join(f"beta = {b}: {v:.3e}" for b, v in values.items())
           + " (need < 1e-6; for large Im(beta) P_ABC ~ 4 k0 / Im(beta) = "
           f"{4 * 5.0 / 1e6:.1e})")
    assert values[1e-8j] < 1e-6
    assert values[1e6j] < 1e-6


def test_criterion_10_negative_momentum_vanishes():
    packet = Packet1D(-5.0)
    c_inf = contrast_infinity(packet, 5j)
    p_abc = p_abc_time_integral(packet, 5j, 10.0)
    ok = c_inf < 1e-6 and p_abc < 1e-6
    report(10, ok, f"k0 = -5, beta = 5i: C_inf = {c_inf:.2e}, P_ABC(L = 10) = {p_abc:.2e} (need < 1e-6)")
    assert c_inf < 1e-6
    assert p_abc < 1e-6
