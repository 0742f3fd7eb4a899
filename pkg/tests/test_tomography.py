import math

import numpy as np
import pytest

from cylwigner.cyl_core import AngleGrid, CylDensity, Window, density_from_pure, momentum_eigenstate, superposition
from cylwigner.tomography import (
    CharCoeffs,
    CoverageError,
    TomogramSet,
    char_coeff_zero,
    char_coeffs_direct,
    density_from_char,
    reconstruct_char,
    required_zetas,
    simulate_tomograms,
    wigner_from_char,
)
from cylwigner.wigner_map import ResolutionError, angle_density, wigner_grid

from conftest import random_density, random_state

TWO_PI = 2 * math.pi
INV2PI = 1 / TWO_PI


def displacement_dagger_trace(rho, ell, phi):
    """Tr[rho D(l, phi)^dagger] / 2pi with D built entry by entry (independent oracle)."""
    lo = rho.window.lo
    idx = np.arange(rho.window.size) + lo
    D = np.zeros((idx.size, idx.size), dtype=complex)
    for j, lp in enumerate(idx):
        i = lp + ell - lo
        if 0 <= i < idx.size:
            D[i, j] = np.exp(-1j * ell * phi / 2) * np.exp(-1j * lp * phi)
    return np.trace(rho.matrix @ D.conj().T) / TWO_PI


def test_vortex_tomograms_flat():
    for l0 in (-2, 0, 3):
        t = simulate_tomograms(momentum_eigenstate(l0), np.linspace(-2, 2, 9), AngleGrid(16))
        assert np.max(np.abs(t.probabilities - INV2PI)) < 1e-12


def test_zeta_zero_is_angle_marginal(rng):
    rho = random_density(rng, 5, lo=-2)
    grid = AngleGrid(20)
    t = simulate_tomograms(rho, [0.0], grid)
    np.testing.assert_allclose(t.probabilities[0], angle_density(rho, grid.points), atol=1e-14)
    t = simulate_tomograms(superposition(0, 1, 0.0), [0.0], grid)
    np.testing.assert_allclose(t.probabilities[0], INV2PI * (1 + np.cos(grid.points)), atol=1e-14)


def test_slices_normalised_and_positive(rng):
    rho = random_density(rng, 6)
    t = simulate_tomograms(rho)
    assert np.all(t.probabilities > -1e-12)
    np.testing.assert_allclose(t.probabilities.sum(axis=1) * t.phi_grid.weight, 1, atol=1e-12)
    with pytest.raises(ValueError):
        TomogramSet([0.0], AngleGrid(4), np.full((1, 4), 0.5))
    with pytest.raises(ValueError):
        TomogramSet([0.0], AngleGrid(4), np.array([[0.5, -0.1, 0.1, 0.136]]))


def test_char_coeff_zero_examples():
    grid = AngleGrid(12)
    phis = grid.points
    np.testing.assert_allclose(char_coeff_zero(momentum_eigenstate(2), grid), INV2PI * np.exp(2j * phis), atol=1e-15)
    mixed = CylDensity(np.eye(3) / 3, Window(-1, 1))
    np.testing.assert_allclose(char_coeff_zero(mixed, grid), (1 + 2 * np.cos(phis)) / (6 * math.pi), atol=1e-15)
    odd = AngleGrid(11)   # odd grids contain phi = 0
    i0 = int(np.argmin(np.abs(odd.points)))
    assert abs(odd.points[i0]) < 1e-15
    assert char_coeff_zero(superposition(0, 3, 1.0), odd)[i0] == pytest.approx(INV2PI, abs=1e-15)


def test_char_direct_matches_displacement_oracle(rng):
    rho = random_density(rng, 4, lo=-1)
    c = char_coeffs_direct(rho)
    for ell in (-3, -1, 0, 2):
        for k in (0, 3, 7):
            assert c.row(ell)[k] == pytest.approx(displacement_dagger_trace(rho, ell, c.phi_grid.points[k]), abs=1e-14)


def test_required_zetas():
    grid = AngleGrid(4)
    z = required_zetas(Window(-2, 2), grid)
    raw = {0.0} | {p / l for l in (-2, -1, 1, 2) for p in grid.points}
    assert len(z) == len(raw)
    assert np.all(np.diff(z) > 1e-12)


def test_vortex_reconstruction():
    t = simulate_tomograms(momentum_eigenstate(2))
    c = reconstruct_char(t)
    for ell in c.ells:
        if ell != 0:
            assert np.max(np.abs(c.row(ell))) < 1e-15
    w = wigner_from_char(c)
    ref = np.zeros_like(w.values)
    ref[list(w.ells).index(2)] = INV2PI
    assert np.max(np.abs(w.values - ref)) < 1e-12


def test_roundtrip_superposition():
    rho = density_from_pure(superposition(0, 1, math.pi / 3))
    c = reconstruct_char(simulate_tomograms(rho))
    d = char_coeffs_direct(rho, c.ell_window, c.phi_grid)
    assert np.max(np.abs(c.values - d.values)) < 1e-8
    assert c.hermiticity_residual() < 1e-10
    rho = density_from_pure(superposition(0, 2, 0.0))
    w = wigner_from_char(reconstruct_char(simulate_tomograms(rho)))
    assert np.max(np.abs(w.values - wigner_grid(rho, w.ell_window, w.angle_grid).values)) < 1e-6


@pytest.mark.parametrize("width", [2, 5, 9])
def test_roundtrip_random(rng, width):
    for _ in range(3):
        rho = random_density(rng, width, lo=int(rng.integers(-4, 2)))
        c = reconstruct_char(simulate_tomograms(rho))
        assert c.hermiticity_residual() < 1e-10
        assert np.max(np.abs(density_from_char(c).matrix - rho.matrix)) < 1e-8
        w = wigner_from_char(c, Window(rho.window.lo - 2, rho.window.hi + 2), AngleGrid(40))
        ref = wigner_grid(rho, w.ell_window, w.angle_grid)
        assert np.max(np.abs(w.values - ref.values)) < 1e-6


def test_coverage_error():
    rho = density_from_pure(superposition(0, 2, 0.0))
    t = simulate_tomograms(rho)
    dropped = TomogramSet(t.zeta_values[1:], t.phi_grid, t.probabilities[1:], t.support, t.ell_spectrum)
    with pytest.raises(CoverageError) as exc:
        reconstruct_char(dropped)
    assert exc.value.missing
    no_spectrum = TomogramSet(t.zeta_values, t.phi_grid, t.probabilities, t.support)
    with pytest.raises(CoverageError) as exc:
        reconstruct_char(no_spectrum)
    assert all(ell == 0 for ell, _ in exc.value.missing)


def test_resolution_error():
    rho = random_density(np.random.default_rng(1), 5)
    grid = AngleGrid(6)
    t = simulate_tomograms(rho, None, grid)
    with pytest.raises(ResolutionError):
        reconstruct_char(t)


def test_csv_roundtrips(rng):
    rho = random_density(rng, 3, lo=-1)
    t = simulate_tomograms(rho)
    back = TomogramSet.from_csv(t.to_csv(), t.spectrum_to_csv())
    np.testing.assert_array_equal(back.zeta_values, t.zeta_values)
    np.testing.assert_allclose(back.probabilities, t.probabilities, atol=1e-12)
    assert back.support == t.support
    assert t.to_csv().splitlines()[1] == "zeta,phi,p"
    c = reconstruct_char(back)
    assert np.max(np.abs(density_from_char(c).matrix - rho.matrix)) < 1e-8
    cc = CharCoeffs.from_csv(c.to_csv())
    np.testing.assert_allclose(cc.values, c.values, atol=1e-12)
    assert cc.support == c.support
    assert "ell,phi,re,im" in c.to_csv().splitlines()[:2]


def test_noise_is_seeded(rng):
    rho = random_density(rng, 3)
    a = simulate_tomograms(rho, shots=1000, seed=7)
    b = simulate_tomograms(rho, shots=1000, seed=7)
    np.testing.assert_array_equal(a.probabilities, b.probabilities)
    c = simulate_tomograms(rho, shots=1000, seed=8)
    assert not np.array_equal(a.probabilities, c.probabilities)


def noisy_error(rho, shots, seeds):
    ref = None
    errs = []
    for s in seeds:
        w = wigner_from_char(reconstruct_char(simulate_tomograms(rho, shots=shots, seed=s)))
        if ref is None:
            ref = wigner_grid(rho, w.ell_window, w.angle_grid).values
        errs.append(np.max(np.abs(w.values - ref)))
    return float(np.mean(errs))


def test_noise_scaling():
    rho = density_from_pure(random_state(np.random.default_rng(3), 7))
    errs = [noisy_error(rho, n, range(8)) for n in (10 ** 4, 10 ** 5, 10 ** 6)]
    scaled = [e * math.sqrt(n) for e, n in zip(errs, (1e4, 1e5, 1e6))]
    assert max(scaled) / min(scaled) < 2
