import math

import numpy as np
import pytest

from cylwigner.cyl_core import AngleGrid, Window, density_from_pure, momentum_eigenstate, superposition
from cylwigner.star_moyal import (
    BandLimitError,
    CylSymbol,
    HalfLattice,
    SeriesConvergenceError,
    apply_correspondence,
    delta_ell_shift,
    line_interpolate,
    moyal_bracket,
    operator_of,
    star_integral_form,
    star_product,
    symbol_of,
)
from cylwigner.wigner_map import sinc, wigner_grid

from conftest import random_density, random_hermitian

INV2PI = 1 / (2 * math.pi)


def rand_op(rng, d, width=None):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    if width is not None:
        n = np.arange(d)
        a[np.abs(n[:, None] - n[None, :]) > width] = 0
    return a


def L_op(win):
    return np.diag(win.ells.astype(complex))


def E_op(win):
    # E|l> = |l - 1>
    return np.eye(win.size, k=1, dtype=complex)


def kernel_w(rho, x, phi):
    """W at real l straight from the quantizer kernel (test oracle)."""
    lo = rho.window.lo
    idx = np.arange(rho.window.size) + lo
    total = 0j
    for i, n in enumerate(idx):
        for j, m in enumerate(idx):
            total += rho.matrix[i, j] * np.exp(-1j * (m - n) * phi) * sinc(x - (m + n) / 2)
    return (total / (2 * math.pi)).real


def test_identity_symbol():
    win = Window(-3, 3)
    s = symbol_of(np.eye(7), win)
    np.testing.assert_allclose(s.mode(0), INV2PI, atol=1e-15)
    assert max(np.max(np.abs(s.mode(m))) for m in range(1, s.band + 1)) < 1e-15


def test_eigenstate_symbol():
    win = Window(-2, 4)
    rho = density_from_pure(momentum_eigenstate(1)).padded(win)
    s = symbol_of(rho.matrix, win)
    grid = AngleGrid(16)
    ref = np.zeros((win.size, 16))
    ref[1 + 2] = INV2PI
    np.testing.assert_allclose(s.samples(grid).real, ref, atol=1e-15)


def test_symbol_roundtrip(rng):
    win = Window(-3, 3)
    for _ in range(5):
        a = random_hermitian(rng, 7)
        assert np.max(np.abs(operator_of(symbol_of(a, win)) - a)) < 1e-10
        b = rand_op(rng, 7)
        assert np.max(np.abs(operator_of(symbol_of(b, win)) - b)) < 1e-10


def test_symbol_matches_wigner(rng):
    rho = random_density(rng, 5, lo=-1)
    grid = AngleGrid(20)
    s = symbol_of(rho.matrix, rho.window)
    np.testing.assert_allclose(s.samples(grid).real, wigner_grid(rho, None, grid).values, atol=1e-14)


def test_band_limit_errors(rng):
    win = Window(0, 4)
    a = rand_op(rng, 5)
    with pytest.raises(BandLimitError):
        symbol_of(a, win, band=1)
    s = symbol_of(rand_op(rng, 5, width=1), win, band=1)
    assert s.band == 1
    with pytest.raises(BandLimitError):
        symbol_of(a, win).with_band(0)
    with pytest.raises(ValueError):
        symbol_of(a, Window(0, 3))


def test_real_symbol_conjugate_symmetry(rng):
    s = symbol_of(random_hermitian(rng, 6), Window(0, 5))
    for m in range(s.band + 1):
        np.testing.assert_allclose(s.mode(-m), np.conj(s.mode(m)), atol=1e-15)


def test_delta_shift_examples(rng):
    f = rng.normal(size=12) + 1j * rng.normal(size=12)
    np.testing.assert_allclose(delta_ell_shift(f, 0.0), f, atol=1e-15)
    np.testing.assert_allclose(delta_ell_shift(f, 1.0), np.roll(f, -1), atol=1e-14)
    padded = np.concatenate([np.zeros(3), f, np.zeros(3)])
    out = delta_ell_shift(padded, 1.0, mode="line")
    np.testing.assert_array_equal(out[:-1], padded[1:])
    for lam, mu in [(0.3, 0.45), (-1.7, 0.2), (0.5, 0.5)]:
        lhs = delta_ell_shift(delta_ell_shift(f, lam), mu)
        assert np.max(np.abs(lhs - delta_ell_shift(f, lam + mu))) < 1e-12
    two_d = rng.normal(size=(9, 4))
    np.testing.assert_allclose(delta_ell_shift(two_d, 0.4, axis=0)[:, 2], delta_ell_shift(two_d[:, 2], 0.4), atol=1e-15)
    with pytest.raises(ValueError):
        delta_ell_shift(f, 0.5, mode="bogus")


def test_half_shift_gives_half_integer_wigner():
    # integer-centred lines only: samples on the padded window carry the whole interpolant
    rho = density_from_pure(superposition(0, 2, 0.7))
    win = Window(-40, 40)
    grid = AngleGrid(12)
    rows = wigner_grid(rho, win, grid).values
    half = delta_ell_shift(rows, 0.5, axis=0, mode="line").real
    for i in (38, 40, 41, 43):
        for j in (0, 3, 7):
            assert half[i, j] == pytest.approx(kernel_w(rho, win.lo + i + 0.5, grid.points[j]), abs=1e-12)


def test_half_shift_general_state_converges():
    rho = density_from_pure(superposition(0, 1, 0.0))
    errs = []
    for width in (50, 200, 800):
        win = Window(-width, width)
        grid = AngleGrid(4)
        rows = wigner_grid(rho, win, grid).values
        half = delta_ell_shift(rows, 0.5, axis=0, mode="line").real
        errs.append(abs(half[width, 1] - kernel_w(rho, 0.5, grid.points[1])))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-3


def test_line_interpolate_derivative():
    nodes = np.arange(-4, 5)
    vals = np.exp(-0.3 * nodes ** 2)
    x = np.array([0.25, 1.5])
    h = 1e-5
    num = (line_interpolate(vals, nodes, x + h) - line_interpolate(vals, nodes, x - h)) / (2 * h)
    np.testing.assert_allclose(line_interpolate(vals, nodes, x, 1), num, atol=1e-8)


def test_star_examples(rng):
    win = Window(-2, 2)
    one = symbol_of(np.eye(5), win)
    for _ in range(3):
        a = symbol_of(rand_op(rng, 5), win)
        assert star_product(a, one).max_abs_diff(a) < 1e-12
        assert star_product(one, a).max_abs_diff(a) < 1e-12
    for _ in range(3):
        A, B = rand_op(rng, 5), rand_op(rng, 5)
        s = star_product(symbol_of(A, win), symbol_of(B, win))
        assert s.max_abs_diff(symbol_of(A @ B, win)) < 1e-8


def test_star_diagonal_is_pointwise(rng):
    win = Window(-3, 3)
    f, g = rng.normal(size=7), rng.normal(size=7)
    a, b = symbol_of(np.diag(f), win), symbol_of(np.diag(g), win)
    prod = star_product(a, b)
    np.testing.assert_allclose(prod.mode(0), 2 * math.pi * a.mode(0) * b.mode(0), atol=1e-14)
    np.testing.assert_allclose(a.mode(0), f * INV2PI, atol=1e-15)


def test_associativity(rng):
    for d in (5, 6, 7):
        win = Window(0, d - 1)
        a, b, c = (symbol_of(rand_op(rng, d), win) for _ in range(3))
        lhs = star_product(star_product(a, b), c)
        rhs = star_product(a, star_product(b, c))
        assert lhs.max_abs_diff(rhs) < 1e-8


def test_moyal(rng):
    win = Window(-3, 3)
    a = symbol_of(rand_op(rng, 7), win)
    assert np.max(np.abs(moyal_bracket(a, a).coeffs)) == 0
    L = L_op(win)
    assert np.max(np.abs(moyal_bracket(symbol_of(L, win), symbol_of(L @ L, win)).coeffs)) < 1e-14
    for d in (5, 7):
        w = Window(0, d - 1)
        A, B = rand_op(rng, d), rand_op(rng, d)
        got = moyal_bracket(symbol_of(A, w), symbol_of(B, w))
        assert got.max_abs_diff(symbol_of(-1j * (A @ B - B @ A), w)) < 1e-8
        assert got.max_abs_diff(moyal_bracket(symbol_of(B, w), symbol_of(A, w)) * -1) < 1e-12


def test_jacobi(rng):
    win = Window(0, 3)
    a, b, c = (symbol_of(random_hermitian(rng, 4), win) for _ in range(3))
    br = moyal_bracket
    total = br(a, br(b, c)) + br(b, br(c, a)) + br(c, br(a, b))
    assert np.max(np.abs(total.coeffs)) < 1e-6


def test_integral_form_cross_check(rng):
    # operators whose lines all have n + m even keep their symbol inside the window
    win = Window(-2, 2)
    n = np.arange(5)
    even = ((n[:, None] + n[None, :]) % 2) == 0
    grid = AngleGrid(16)
    for _ in range(3):
        A, B = rand_op(rng, 5) * even, rand_op(rng, 5) * even
        got = star_integral_form(symbol_of(A, win), symbol_of(B, win), grid)
        ref = symbol_of(A @ B, win).samples(grid)
        assert np.max(np.abs(got - ref)) < 1e-10


def small_band_pair(rng, band):
    win = Window(0, 2)
    return win, rand_op(rng, 3, band), rand_op(rng, 3, band)


def test_differential_low_band(rng):
    for _ in range(3):
        win, A, B = small_band_pair(rng, 1)
        a, b = symbol_of(A, win, band=1), symbol_of(B, win, band=1)
        diff = star_product(a, b, "differential", order=16, tol=1e-6)
        assert diff.max_abs_diff(star_product(a, b)) < 1e-6


def test_differential_band_two_needs_higher_order(rng):
    win, A, B = small_band_pair(rng, 2)
    a, b = symbol_of(A, win), symbol_of(B, win)
    with pytest.raises(SeriesConvergenceError):
        star_product(a, b, "differential")
    loose = star_product(a, b, "differential", order=12, tol=1.0)
    assert loose.max_abs_diff(star_product(a, b)) > 1e-6
    tight = star_product(a, b, "differential", order=24, tol=1e-6)
    assert tight.max_abs_diff(star_product(a, b)) < 1e-6


def test_star_mode_validation(rng):
    win = Window(0, 1)
    a = symbol_of(rand_op(rng, 2), win)
    with pytest.raises(ValueError):
        star_product(a, a, "bogus")
    with pytest.raises(ValueError):
        star_product(a, symbol_of(rand_op(rng, 3), Window(0, 2)))


def test_correspondence_examples(rng):
    win = Window(-3, 3)
    l0 = 1
    rho = density_from_pure(momentum_eigenstate(l0)).padded(win).matrix
    s = symbol_of(rho, win)
    assert apply_correspondence("L_left", s).max_abs_diff(s * l0) < 1e-14
    out = apply_correspondence("E_left", s)
    wide = Window(-4, 4)
    target = np.zeros((9, 9), dtype=complex)
    target[l0 - 1 + 4, l0 + 4] = 1
    assert out.max_abs_diff(symbol_of(target, wide)) < 1e-14
    with pytest.raises(ValueError):
        apply_correspondence("X_left", s)


@pytest.mark.parametrize("rule", ["L_left", "L_right", "E_left", "E_right"])
def test_correspondence_operator_oracle(rng, rule):
    rho = random_density(rng, 5, lo=-2)
    win = rho.window
    s = symbol_of(rho.matrix, win)
    if rule.startswith("L"):
        L = L_op(win)
        op = L @ rho.matrix if rule == "L_left" else rho.matrix @ L
        ref = symbol_of(op, win)
    else:
        wide = Window(win.lo - 1, win.hi + 1)
        E, R = E_op(wide), rho.padded(wide).matrix
        ref = symbol_of(E @ R if rule == "E_left" else R @ E, wide)
    assert apply_correspondence(rule, s).max_abs_diff(ref) < 1e-12


def test_correspondence_commutator(rng):
    rho = random_density(rng, 4, lo=0)
    s = symbol_of(rho.matrix, rho.window)
    L = L_op(rho.window)
    got = apply_correspondence("L_left", s) - apply_correspondence("L_right", s)
    assert got.max_abs_diff(symbol_of(L @ rho.matrix - rho.matrix @ L, rho.window)) < 1e-12


def test_half_lattice_roundtrip(rng):
    win = Window(-1, 3)
    A = rand_op(rng, 5)
    h = HalfLattice.from_matrix(A, win)
    np.testing.assert_allclose(h.to_matrix(), A, atol=1e-15)
    assert h.to_symbol().max_abs_diff(symbol_of(A, win)) < 1e-12
    assert isinstance(h.to_symbol(), CylSymbol)
