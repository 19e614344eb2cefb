import math
import warnings

import numpy as np
import pytest

from bsq2d.estimates import (
    CubePartition,
    EstimateReport,
    QuadratureError,
    TruncationSensitivityWarning,
    _panel_quadrature,
    bandlimited_bump,
    bessel_kernel,
    decay_envelope,
    decay_scan,
    fit_power,
    j0_integral,
    local_smoothing_ratio,
    maximal_sum,
    maximal_time_scan,
    oscillatory_bound,
    oscillatory_integral,
    oscillatory_scan,
    psi_k,
    strichartz_exponent,
    strichartz_exponent_limit,
    strichartz_norm,
    strichartz_scaling,
    wrap_horizon,
)
from bsq2d.spectral import Grid2D, SpectralField, l2_norm

from oracles import j0, oscillatory_quad, radial_kernel_rotated


def plane_wave(grid: Grid2D, index, amp: float) -> SpectralField:
    c = np.zeros(grid.shape, dtype=complex)
    c[index[0] % grid.nx, index[1] % grid.ny] = amp
    return SpectralField(grid, c)


# --- exponents ------------------------------------------------------------------


def test_strichartz_exponent_at_zero():
    q, kappa = strichartz_exponent(0.0)
    assert abs(q - (7 + math.sqrt(13)) / 3) < 1e-12
    assert q == pytest.approx(3.53518, abs=1e-5)
    assert kappa == pytest.approx(0.42928, abs=1e-5)


@pytest.mark.parametrize("alpha", [0.0, 0.1, 0.2, 0.3, 0.4, 0.49])
def test_strichartz_exponent_solves_quadratic(alpha):
    q, kappa = strichartz_exponent(alpha)
    assert q > 2
    assert abs(3 * q * q - 2 * (7 - 2 * alpha) * q + 12) < 1e-12
    assert kappa == pytest.approx(0.5 + alpha / 2 - 1 / (4 * q), abs=1e-15)


def test_strichartz_limits_and_approach():
    q, kappa = strichartz_exponent_limit()
    assert abs(q - 2) < 1e-12 and abs(kappa - 0.625) < 1e-12
    deltas = np.array([1e-2, 1e-4, 1e-6])
    gaps = np.array([strichartz_exponent(0.5 - d)[0] - 2 for d in deltas])
    # double root: the gap closes like sqrt(delta)
    assert np.all(np.diff(gaps) < 0)
    assert fit_power(deltas, gaps)[0] == pytest.approx(0.5, abs=0.01)


@pytest.mark.parametrize("alpha", [-0.1, 0.5, 0.7])
def test_strichartz_exponent_rejects_out_of_range(alpha):
    with pytest.raises(ValueError):
        strichartz_exponent(alpha)


@pytest.mark.parametrize("beta", [0.0, 0.5, 1.0])
def test_decay_envelope_is_continuous_at_the_split(beta):
    eps = 0.04
    t0 = math.sqrt(eps)
    left, right = decay_envelope([t0 * (1 - 1e-12), t0 * (1 + 1e-12)], eps, beta)
    assert left == pytest.approx(right, rel=1e-9)


def test_fit_power_recovers_exact_law():
    x = np.geomspace(0.1, 10, 7)
    slope, res = fit_power(x, 3 * x**-0.75)
    assert slope == pytest.approx(-0.75, abs=1e-12) and res < 1e-12


def test_report_rejects_mismatched_arrays():
    with pytest.raises(ValueError):
        EstimateReport("x", {}, [1.0, 2.0], [1.0], [1.0, 2.0])


# --- grid helpers ----------------------------------------------------------------


@pytest.mark.parametrize("profile", ["flat", "gaussian"])
def test_bandlimited_bump_is_real_with_unit_l1(profile):
    g = Grid2D(64, 64, 32.0, 32.0)
    f = bandlimited_bump(g, 2.0, profile)
    u = f.to_physical()
    assert np.max(np.abs(u.imag)) < 1e-14
    assert np.sum(np.abs(u.real)) * g.cell_area == pytest.approx(1.0)
    with pytest.raises(ValueError):
        bandlimited_bump(g, 2.0, "box")


def test_wrap_horizon_for_single_mode():
    g = Grid2D(32, 32, 10.0, 10.0)
    f = plane_wave(g, (3, 0), 1.0)
    k2 = (2 * np.pi * 3 / 10.0) ** 2
    expected = 0.5 * math.hypot(10.0, 10.0) / abs(3 * 0.2 * k2 - 1)
    assert wrap_horizon(0.2, f) == pytest.approx(expected)
    assert wrap_horizon(0.2, SpectralField.zeros(g)) == np.inf


def test_cube_partition_exact_tiling():
    g = Grid2D(32, 32, 8.0, 8.0)
    cubes = CubePartition(g)
    assert cubes.shape == (8, 8)
    assert np.all(cubes.cell_counts == 16)
    assert cubes.sums(np.ones(g.shape)).sum() == g.nx * g.ny


def test_cube_partition_truncates_last_cube():
    g = Grid2D(34, 32, 8.5, 8.0)
    cubes = CubePartition(g)
    assert cubes.shape == (9, 8)
    counts = cubes.cell_counts.reshape(cubes.shape)
    assert np.all(counts[:-1] == 16) and np.all(counts[-1] == 8)
    assert counts.sum() == g.nx * g.ny


def test_single_cube_and_maxima():
    g = Grid2D(16, 16, 4.0, 4.0)
    one = CubePartition.single(g)
    assert one.count == 1
    v = np.arange(g.nx * g.ny, dtype=float).reshape(g.shape)
    assert one.maxima(v)[0] == v.max()
    with pytest.raises(ValueError):
        CubePartition(g, 0.0)


# --- decay ------------------------------------------------------------------------


def test_decay_scan_flags_samples_beyond_horizon():
    g = Grid2D(128, 128, 32.0, 32.0)
    u0 = bandlimited_bump(g, 3.0)
    horizon = wrap_horizon(1.0, u0)
    times = np.geomspace(horizon / 10, horizon * 4, 6)
    rep = decay_scan(1.0, 0.0, u0, times)
    assert np.array_equal(rep.trusted, times <= horizon)
    assert rep.parameters["l2_drift"] < 1e-12
    assert rep.parameters["horizon"] == pytest.approx(horizon)


def test_decay_scan_small_amplitude_slope():
    # eps = 1, flat band: sup norm falls like t^{-2/3} before the horizon
    g = Grid2D(1024, 1024, 64.0, 64.0)
    u0 = bandlimited_bump(g, 20.0)
    rep = decay_scan(1.0, 0.0, u0, np.geomspace(10**-2.5, 10**-2.2, 5))
    assert rep.trusted.all()
    assert rep.fitted["small_t"] == pytest.approx(-2 / 3, rel=0.1)


def test_decay_scan_rejects_bad_input():
    g = Grid2D(16, 16)
    f = bandlimited_bump(g, 1.0)
    with pytest.raises(ValueError):
        decay_scan(1.0, 0.0, f, [0.2, 0.1])
    with pytest.raises(ValueError):
        decay_scan(1.0, 1.5, f, [0.1, 0.2])


# --- Strichartz, local smoothing and maximal function ------------------------------


def test_strichartz_norm_of_plane_wave():
    # |U(t) e^{i xi x}| = 1, so the norm is |xi|^alpha T^{1/q}
    g = Grid2D(32, 32, 8.0, 8.0)
    amp, T, alpha = 0.7, 1.5, 0.3
    f = plane_wave(g, (2, 1), amp)
    q, _ = strichartz_exponent(alpha)
    xi = math.hypot(2 * np.pi * 2 / 8.0, 2 * np.pi / 8.0)
    rep = strichartz_norm(0.3, alpha, T, f)
    assert rep.parameters["norm"] == pytest.approx(amp * xi**alpha * T ** (1 / q), rel=1e-12)


def test_strichartz_scaling_of_plane_wave_is_flat():
    g = Grid2D(32, 32, 8.0, 8.0)
    rep = strichartz_scaling((1.0, 0.25, 1 / 16), 0.0, 1.0, plane_wave(g, (1, 0), 1.0))
    assert abs(rep.fitted["epsilon_exponent"]) < 1e-10
    assert rep.trusted.all() and rep.passed


def test_local_smoothing_of_high_plane_wave():
    # |xi| sqrt(eps) >= 2 puts the mode outside the cutoff, so the cube
    # integral is |xi|^2 amp^2 T per unit cube
    g = Grid2D(32, 32, 8.0, 8.0)
    amp, T, eps = 0.5, 0.8, 1.0
    f = plane_wave(g, (8, 0), amp)
    xi = 2 * np.pi * 8 / 8.0
    rep = local_smoothing_ratio(eps, T, f, CubePartition(g))
    assert rep.parameters["value"] == pytest.approx(xi * amp * math.sqrt(T), rel=1e-12)
    assert rep.parameters["ratio"] == pytest.approx(rep.parameters["value"] / (eps**-0.5 * l2_norm(f)))


def test_local_smoothing_removes_low_frequencies():
    g = Grid2D(32, 32, 8.0, 8.0)
    f = plane_wave(g, (1, 0), 1.0)
    assert local_smoothing_ratio(0.01, 1.0, f, CubePartition(g)).parameters["value"] == 0.0


def test_maximal_sum_of_plane_wave():
    g = Grid2D(32, 32, 8.0, 8.0)
    amp = 0.4
    cubes = CubePartition(g)
    rep = maximal_sum(0.25, 1.0, 2.0, plane_wave(g, (1, 1), amp), cubes)
    assert rep.parameters["value"] == pytest.approx(amp * math.sqrt(cubes.count), rel=1e-12)
    assert rep.parameters["n_times"] == 101


def test_maximal_sum_preconditions():
    g = Grid2D(16, 16, 4.0, 4.0)
    f = plane_wave(g, (1, 0), 1.0)
    cubes = CubePartition(g)
    with pytest.raises(ValueError):
        maximal_sum(0.25, 1.0, 1.5, f, cubes)
    with pytest.raises(ValueError):
        maximal_sum(0.5, 4.0, 2.0, f, cubes)
    with pytest.raises(ValueError):
        maximal_sum(0.25, 1.0, 2.0, f, cubes, n_samples=50)


def test_maximal_time_scan_spread_for_plane_wave():
    g = Grid2D(16, 16, 4.0, 4.0)
    rep = maximal_time_scan(0.25, (0.25, 0.5, 1.0), 2.0, plane_wave(g, (1, 0), 1.0), CubePartition(g))
    assert rep.fitted["spread"] == pytest.approx(2 / (1 + 0.25**0.25), rel=1e-12)
    assert abs(rep.fitted["T_exponent"]) < 1e-12
    assert rep.passed


# --- oscillatory integrals ----------------------------------------------------------


@pytest.mark.parametrize("k", [1, 2, 3])
def test_psi_k_partition_of_unity(k):
    s = np.linspace(2.0**k, 2.0 ** (k + 1), 41)
    assert np.allclose(psi_k(s, k) + psi_k(s, k + 1), 1.0, atol=1e-14)
    assert psi_k(2.0**k, k) == 1.0
    assert psi_k(2.0 ** (k - 1), k) == 0.0 and psi_k(2.0 ** (k + 1), k) == 0.0


@pytest.mark.parametrize(
    "eps_t, r, k",
    [(0.05, 0.0, 1), (0.5, 3.0, 2), (2.0, -5.0, 1), (0.5, -40.0, 3), (2.0, 200.0, 2), (0.05, -0.7, 3)],
)
def test_oscillatory_integral_matches_adaptive_quadrature(eps_t, r, k):
    got = oscillatory_integral(eps_t, r, k, atol=1e-11)
    want = oscillatory_quad(eps_t, r, k)
    assert abs(got - want) < 1e-8


def test_oscillatory_integral_rejects_bad_arguments():
    with pytest.raises(ValueError):
        oscillatory_integral(3.0, 1.0, 1)
    with pytest.raises(ValueError):
        oscillatory_integral(0.5, 1.0, -1)


def test_oscillatory_bound_regimes():
    k = 2
    assert oscillatory_bound(0.5, k) == 4.0
    assert oscillatory_bound(16.0, k) == pytest.approx(2.0 / 4.0)
    far = 24 * 16 * 2.0
    assert oscillatory_bound(far, k) == pytest.approx(far**-2)
    assert oscillatory_bound(-16.0, k) == oscillatory_bound(16.0, k)


def test_small_oscillatory_scan_passes():
    rep = oscillatory_scan(ks=(1, 2), eps_ts=(0.5,), n_mid=4)
    assert rep.passed
    assert rep.fitted["max_ratio"] <= 1.5 * rep.fitted["calibrated_constant"]


def test_panel_quadrature_reports_failure():
    with pytest.raises(QuadratureError):
        _panel_quadrature(lambda s: np.exp(1j * 1e4 * s * s), 0.0, 10.0, 1e-14, order=4, start=1, max_doublings=2)


# --- Bessel kernel --------------------------------------------------------------------


def test_j0_integral_matches_library():
    z = np.linspace(0, 200, 401)
    assert np.max(np.abs(j0_integral(z) - j0(z))) < 1e-13


@pytest.mark.parametrize("r, beta", [(0.0, 0.0), (0.5, 0.0), (2.0, 0.5), (1.0, 1.0)])
def test_bessel_kernel_matches_contour_rotation(r, beta):
    t, eps = 1.0, 0.1
    got = bessel_kernel(t, r, eps, beta, s_max=40.0)
    want = radial_kernel_rotated(t, r, eps, beta)
    assert abs(got - want) < 1e-6 * abs(want)


def test_bessel_kernel_truncation_warning():
    with pytest.warns(TruncationSensitivityWarning):
        bessel_kernel(1.0, 0.5, 0.1, 0.0, s_max=4.0, check_truncation=True)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        bessel_kernel(1.0, 0.5, 0.1, 0.0, s_max=40.0, check_truncation=True)


def test_bessel_kernel_rejects_negative_radius():
    with pytest.raises(ValueError):
        bessel_kernel(1.0, -1.0, 0.1, 0.0)
