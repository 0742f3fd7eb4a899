"""Stratonovich-Weyl quantizer and Wigner functions on the cylinder.

The quantizer matrix elements have a closed form once the angle integral is
done analytically::

    <m| w(l, phi) |n> = exp(-i (m - n) phi) K(l - (m + n) / 2) / (2 pi)^2
    K(kappa) = int_{-pi}^{pi} exp(i kappa t) dt = 2 pi sinc(kappa)

``K`` is ``2 pi delta`` on integers and ``2 (-1)^j / (j + 1/2)`` on
half-integers ``kappa = j + 1/2``. Pairs with ``m + n`` even build the "even"
part of W (local in l); pairs with ``m + n`` odd build the "odd" part, whose
tails decay like ``1/l`` outside the density window.

A symbol is stored through its angular Fourier modes ``c_k(l)``
(``a(l, phi) = sum_k c_k(l) exp(i k phi)``) with ``k = n - m``. At the
half-integer lattice point ``x = (n + m)/2`` the band-limited continuation of
``c_k`` equals ``A[n, m] / (2 pi)``; :func:`matrix_from_modes` inverts the
finite kernel system to recover those values from integer-l data.
"""

from __future__ import annotations

import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import digamma, polygamma

from .cyl_core import (
    AngleGrid,
    CylDensity,
    CylState,
    DisplacementLabel,
    Window,
    WindowLike,
    as_window,
    density_from_pure,
    displacement_matrix,
    embed,
    trace_product,
)
from .special_fn import theta3

__all__ = [
    "NumericalValidationError",
    "ResolutionError",
    "WignerGrid",
    "QuantizerKernel",
    "kernel_weight",
    "sinc",
    "symbol_modes",
    "matrix_from_modes",
    "modes_from_samples",
    "samples_from_modes",
    "wigner_point",
    "wigner_point_angle_rep",
    "wigner_grid",
    "marginal_angle",
    "marginal_momentum",
    "quantizer_matrix",
    "density_from_wigner",
    "closed_form_superposition_wigner",
    "closed_form_coherent_wigner",
    "coherent_wigner_parts",
    "traciality",
    "angle_density",
]

TWO_PI = 2 * math.pi
IMAG_TOL = 1e-10
THREADS_ENV = "CYLWIGNER_THREADS"
ROW_CHUNK = 8


class NumericalValidationError(ArithmeticError):
    """A computed quantity broke a numerical invariant (reality, consistency)."""


class ResolutionError(ValueError):
    """The angle grid is too coarse for an exact band-limited transform."""


def sinc(x):
    """``np.sinc`` with exact zeros at nonzero integers (``sin(pi n)`` is not 0 in floating point)."""
    x = np.asarray(x, dtype=float)
    return np.where(x == np.rint(x), (x == 0).astype(float), np.sinc(x))


def kernel_weight(kappa):
    """``K(kappa) = int_{-pi}^{pi} exp(i kappa t) dt``."""
    return TWO_PI * sinc(kappa)


def _default_workers() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# symbol modes <-> matrices
# ---------------------------------------------------------------------------

def _diagonal_lines(matrix: np.ndarray, window: Window):
    """Yield ``(k, s, values)`` for each line ``n - m = k`` with ``s = n + m``."""
    d = window.size
    for k in range(-(d - 1), d):
        vals = np.diagonal(matrix, offset=-k)
        i = np.arange(vals.size)
        if k >= 0:
            n, m = window.lo + i + k, window.lo + i
        else:
            n, m = window.lo + i, window.lo + i - k
        yield k, n + m, vals


def symbol_modes(matrix: np.ndarray, window: WindowLike, ells) -> np.ndarray:
    """Fourier modes ``c_k(l) = Tr-kernel sum`` of ``Tr[A w(l, phi)]``.

    Returns an array of shape ``(len(ells), 2 d - 1)``; column ``j`` holds
    mode ``k = j - (d - 1)``.
    """
    win = as_window(window)
    ells = np.asarray(ells, dtype=float)
    d = win.size
    out = np.zeros((ells.size, 2 * d - 1), dtype=complex)
    for k, s, vals in _diagonal_lines(np.asarray(matrix), win):
        weights = kernel_weight(ells[:, None] - s[None, :] / 2.0)
        out[:, k + d - 1] = weights @ vals / TWO_PI**2
    return out


def matrix_from_modes(modes: np.ndarray, ells, window: WindowLike) -> np.ndarray:
    """Invert :func:`symbol_modes` for an operator living on ``window``.

    Each line ``n - m = k`` is recovered from the integer-l samples by a
    least-squares solve of the kernel system. The system is exactly
    determined or overdetermined whenever ``ells`` covers ``window``.
    """
    win = as_window(window)
    ells = np.asarray(ells, dtype=float)
    d = win.size
    K = (modes.shape[1] - 1) // 2
    mat = np.zeros((d, d), dtype=complex)
    for k in range(-(d - 1), d):
        if abs(k) > K:
            continue
        col = modes[:, k + K]
        nlen = d - abs(k)
        i = np.arange(nlen)
        if k >= 0:
            n, m = win.lo + i + k, win.lo + i
        else:
            n, m = win.lo + i, win.lo + i - k
        s = n + m
        if k % 2 == 0:
            # even lines sit on integer l = s/2: read them off directly
            idx = np.searchsorted(ells, s / 2)
            ok = (idx < ells.size) & (ells[np.minimum(idx, ells.size - 1)] == s / 2)
            if not ok.all():
                raise ValueError("sample window does not cover the operator window")
            vals = TWO_PI * col[idx]
        else:
            system = kernel_weight(ells[:, None] - s[None, :] / 2.0) / TWO_PI**2
            vals = np.linalg.lstsq(system, col, rcond=None)[0]
        mat[n - win.lo, m - win.lo] = vals
    return mat


def modes_from_samples(values: np.ndarray, grid: AngleGrid, K: int) -> np.ndarray:
    """Exact Fourier modes ``|k| <= K`` from midpoint samples (rows = l)."""
    if grid.n_phi < 2 * K + 1:
        raise ResolutionError(f"n_phi = {grid.n_phi} < {2 * K + 1} needed for {K} angular modes")
    k = np.arange(-K, K + 1)
    basis = np.exp(-1j * np.outer(grid.points, k))
    return np.asarray(values) @ basis / grid.n_phi


def samples_from_modes(modes: np.ndarray, grid: AngleGrid) -> np.ndarray:
    K = (modes.shape[1] - 1) // 2
    k = np.arange(-K, K + 1)
    return modes @ np.exp(1j * np.outer(k, grid.points))


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WignerGrid:
    """Samples ``W(l, phi_k)`` over an l window and a midpoint angle grid."""

    values: np.ndarray
    ell_window: Window
    angle_grid: AngleGrid

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, copy=True)
        win = as_window(self.ell_window)
        if vals.shape != (win.size, self.angle_grid.n_phi):
            raise ValueError(f"values shape {vals.shape} does not match grid")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "ell_window", win)

    @property
    def ells(self) -> np.ndarray:
        return self.ell_window.ells

    @property
    def phis(self) -> np.ndarray:
        return self.angle_grid.points

    def row(self, ell: int) -> np.ndarray:
        return self.values[ell - self.ell_window.lo]

    def normalization(self) -> float:
        return float(self.values.sum() * self.angle_grid.weight)

    def momentum_marginal(self) -> np.ndarray:
        return self.values.sum(axis=1) * self.angle_grid.weight

    def modes(self, K: int | None = None) -> np.ndarray:
        if K is None:
            K = self.ell_window.size - 1
        return modes_from_samples(self.values, self.angle_grid, K)

    # -- serialisation -----------------------------------------------------
    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("ell,phi,w\n")
        phis = self.phis
        for i, ell in enumerate(self.ells):
            for j, phi in enumerate(phis):
                buf.write(f"{ell},{phi:.12g},{self.values[i, j]:.12g}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "WignerGrid":
        lines = text.strip().splitlines()
        if lines[0].strip() != "ell,phi,w":
            raise ValueError(f"unexpected header {lines[0]!r}")
        rows = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]])
        ells = np.unique(rows[:, 0].astype(int))
        n_phi = rows.shape[0] // ells.size
        if ells.size * n_phi != rows.shape[0]:
            raise ValueError("ragged grid")
        grid = AngleGrid(n_phi)
        if not np.allclose(rows[:n_phi, 1], grid.points, atol=1e-10):
            raise ValueError("angles are not a midpoint grid")
        win = Window(ells[0], ells[-1])
        if ells.size != win.size:
            raise ValueError("l rows are not contiguous")
        return cls(rows[:, 2].reshape(ells.size, n_phi), win, grid)

    def to_json(self) -> str:
        return json.dumps(
            {
                "ell_window": [self.ell_window.lo, self.ell_window.hi],
                "phi_samples": [float(f"{p:.12g}") for p in self.phis],
                "values": [[float(f"{v:.12g}") for v in r] for r in self.values],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "WignerGrid":
        obj = json.loads(text)
        win = Window(*obj["ell_window"])
        grid = AngleGrid(len(obj["phi_samples"]))
        if not np.allclose(obj["phi_samples"], grid.points, atol=1e-10):
            raise ValueError("angles are not a midpoint grid")
        return cls(np.array(obj["values"], dtype=float), win, grid)


def _as_density(x) -> CylDensity:
    if isinstance(x, CylState):
        return density_from_pure(x)
    return x


def _real(values: np.ndarray, what: str = "W") -> np.ndarray:
    resid = float(np.max(np.abs(values.imag))) if values.size else 0.0
    if resid > IMAG_TOL:
        raise NumericalValidationError(f"{what} has imaginary residue {resid:.3e}")
    return values.real


def wigner_grid(
    rho,
    ell_window: WindowLike | None = None,
    angle_grid: AngleGrid | None = None,
    *,
    workers: int | None = None,
) -> WignerGrid:
    """Evaluate ``W(l, phi_k)`` on a grid. Rows are independent and may be threaded."""
    rho = _as_density(rho)
    win = rho.window if ell_window is None else as_window(ell_window)
    if angle_grid is None:
        angle_grid = AngleGrid(max(64, 4 * rho.window.size))
    workers = _default_workers() if workers is None else workers
    ells = win.ells

    def block(chunk):
        modes = symbol_modes(rho.matrix, rho.window, chunk)
        return samples_from_modes(modes, angle_grid)

    # fixed chunking keeps the floating-point path independent of the worker count
    chunks = [ells[i:i + ROW_CHUNK] for i in range(0, ells.size, ROW_CHUNK)]
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            vals = np.vstack(list(pool.map(block, chunks)))
    else:
        vals = np.vstack([block(c) for c in chunks])
    return WignerGrid(_real(vals), win, angle_grid)


def wigner_point(rho, ell: int, phi: float) -> float:
    """W(l, phi) from the even/odd split of the momentum-representation kernel.

    Even part: ``(1/2pi) sum_l' exp(-2 i l' phi) <l - l'|rho|l + l'>``.
    Odd part: ``(1/2pi^2) sum_{l', l''} (-1)^l'' / (l'' + 1/2)
    exp(-i (2 l' + 1) phi) <l + l'' - l'|rho|l + l'' + l' + 1>``.
    Both sums are finite because rho vanishes outside its window.
    """
    rho = _as_density(rho)
    lo, hi = rho.window
    width = hi - lo
    even = 0j
    for lp in range(-width, width + 1):
        even += np.exp(-2j * lp * phi) * rho.element(ell - lp, ell + lp)
    even /= TWO_PI

    # l' in [0, width) and its mirror; l'' chosen so both indices hit the window
    odd = 0j
    for lp in range(-width - 1, width + 1):
        phase = np.exp(-1j * (2 * lp + 1) * phi)
        lpp_min = max(lo - ell + lp, lo - ell - lp - 1)
        lpp_max = min(hi - ell + lp, hi - ell - lp - 1)
        for lpp in range(lpp_min, lpp_max + 1):
            elem = rho.element(ell + lpp - lp, ell + lpp + lp + 1)
            if elem:
                odd += (-1) ** (lpp % 2) / (lpp + 0.5) * phase * elem
    odd /= 2 * math.pi**2
    val = even + odd
    if abs(val.imag) > IMAG_TOL:
        raise NumericalValidationError(f"W({ell}, {phi}) has imaginary part {val.imag:.3e}")
    return float(val.real)


def wigner_point_angle_rep(psi: CylState, ell: int, phi: float, n_nodes: int | None = None) -> float:
    """W from the angle representation ``(1/2pi) int exp(i l t) Psi(phi - t/2) Psi*(phi + t/2) dt``.

    The integrand carries half-integer frequencies in ``t`` whenever ``n + m``
    is odd, so a periodic midpoint rule is not exact; Gauss-Legendre on
    ``(-pi, pi)`` converges geometrically for this entire integrand.
    """
    from .cyl_core import angle_wavefunction

    band = abs(ell) + max(abs(psi.window.lo), abs(psi.window.hi)) + psi.window.size
    if n_nodes is None:
        n_nodes = max(64, 2 * (2 * psi.window.size + 1), int(4 * band) + 32)
    x, wts = np.polynomial.legendre.leggauss(n_nodes)
    t = math.pi * x
    integrand = (
        np.exp(1j * ell * t)
        * angle_wavefunction(psi, phi - t / 2)
        * np.conj(angle_wavefunction(psi, phi + t / 2))
    )
    val = math.pi * np.dot(wts, integrand) / TWO_PI
    if abs(val.imag) > IMAG_TOL:
        raise NumericalValidationError(f"angle-representation W has imaginary part {val.imag:.3e}")
    return float(val.real)


# ---------------------------------------------------------------------------
# marginals
# ---------------------------------------------------------------------------

def _alt_tail(a):
    """``sum_{j >= 0} (-1)^j / (j + a)`` for ``a > 0``."""
    return 0.5 * (digamma((a + 1) / 2) - digamma(a / 2))


def _odd_row_tail(s, lo: int, hi: int):
    """``sum_{l outside [lo, hi]} K(l - s/2)`` for odd ``s`` with ``s/2`` inside."""
    s = np.asarray(s, dtype=float)
    up = hi + 1 - s / 2
    down = s / 2 - lo + 1
    return 2 * (np.sin(np.pi * up) * _alt_tail(up) + np.sin(np.pi * down) * _alt_tail(down))


def _pair_tail(x, y):
    """``sum_{j >= 0} 1 / ((j + x)(j + y))`` for ``x, y > 0``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    same = np.isclose(x, y)
    diff = np.where(same, 1.0, y - x)
    general = (digamma(y) - digamma(x)) / diff
    return np.where(same, polygamma(1, x), general)


def angle_density(rho, phi) -> np.ndarray:
    """``<phi|rho|phi>`` straight from the matrix elements."""
    rho = _as_density(rho)
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    v = np.exp(1j * np.outer(phi, rho.ells))
    vals = np.einsum("pn,nm,pm->p", v, rho.matrix, v.conj()) / TWO_PI
    return _real(vals, "angle density")


def marginal_angle(source, ell_window: WindowLike | None = None, angle_grid: AngleGrid | None = None) -> np.ndarray:
    """``sum_l W(l, phi_k)`` on the angle grid.

    Rows inside the window are summed from the grid; the rows outside carry
    only the odd part, whose alternating ``1/l`` tail is summed in closed form
    (digamma) from the odd lines of the underlying operator. For a
    :class:`WignerGrid` the operator is first recovered by exact inversion.
    """
    if isinstance(source, WignerGrid):
        grid = source
        rho_mat = density_from_wigner(grid, check=False).matrix
        rho_win = grid.ell_window
    else:
        rho = _as_density(source)
        grid = wigner_grid(rho, ell_window or rho.window, angle_grid)
        rho_mat, rho_win = rho.matrix, rho.window
    if not grid.ell_window.contains(rho_win):
        raise ValueError(f"grid window {grid.ell_window} must cover the density window {rho_win}")
    lo, hi = grid.ell_window
    total = grid.values.sum(axis=0).astype(complex)
    d = rho_win.size
    K = d - 1
    tail_modes = np.zeros(2 * K + 1, dtype=complex)
    for k, s, vals in _diagonal_lines(rho_mat, rho_win):
        if k % 2:
            tail_modes[k + K] = np.dot(_odd_row_tail(s, lo, hi), vals) / TWO_PI**2
    total += samples_from_modes(tail_modes[None, :], grid.angle_grid)[0]
    return _real(total, "angle marginal")


def marginal_momentum(source, angle_grid: AngleGrid | None = None) -> np.ndarray:
    """``int W(l, phi) dphi`` per row (midpoint rule, exact for band-limited W)."""
    if isinstance(source, WignerGrid):
        return source.momentum_marginal()
    rho = _as_density(source)
    grid = angle_grid or AngleGrid(2 * rho.window.size + 1)
    return wigner_grid(rho, rho.window, grid).momentum_marginal()


# ---------------------------------------------------------------------------
# quantizer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuantizerKernel:
    label: DisplacementLabel
    window: Window
    matrix: np.ndarray

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))


def _quantizer_direct(ell: int, phi: float, win: Window) -> np.ndarray:
    # sum over the momentum shift l' of the angle-integrated displacement
    mat = np.zeros((win.size, win.size), dtype=complex)
    n = win.ells
    for lp in range(-(win.size - 1), win.size):
        m = n + lp
        ok = (m >= win.lo) & (m <= win.hi)
        weight = kernel_weight(ell - lp / 2 - n[ok])
        mat[m[ok] - win.lo, n[ok] - win.lo] += np.exp(-1j * lp * phi) * weight
    return mat / TWO_PI**2


def quantizer_matrix(label, window: WindowLike, tol: float = 1e-10) -> QuantizerKernel:
    """``w(l, phi)`` on ``window`` built twice: directly and as ``D w(0,0) D^dagger``."""
    lab = label if isinstance(label, DisplacementLabel) else DisplacementLabel(*label)
    win = as_window(window)
    direct = _quantizer_direct(lab.ell, lab.phi, win)
    src = win.shifted(-lab.ell)
    disp = displacement_matrix(lab, src, win)
    covariant = disp @ _quantizer_direct(0, 0.0, src) @ disp.conj().T
    err = float(np.max(np.abs(direct - covariant)))
    if err > tol:
        raise NumericalValidationError(f"quantizer routes disagree by {err:.3e}")
    return QuantizerKernel(lab, win, direct)


# ---------------------------------------------------------------------------
# inversion
# ---------------------------------------------------------------------------

def density_from_wigner(grid: WignerGrid, window: WindowLike | None = None, *, check: bool = True) -> CylDensity:
    """Recover rho from ``W`` samples.

    The density window defaults to the grid's l window. Even lines are read
    off the rows directly; odd lines come from solving the finite kernel
    system, which is the exact finite-window form of
    ``rho = 2 pi sum_l int w(l, phi) W(l, phi) dphi``.
    """
    win = grid.ell_window if window is None else as_window(window)
    if not grid.ell_window.contains(win):
        raise ValueError(f"grid window {grid.ell_window} must cover density window {win}")
    K = win.size - 1
    modes = modes_from_samples(grid.values, grid.angle_grid, K)
    mat = matrix_from_modes(modes, grid.ells, win)
    return CylDensity(0.5 * (mat + mat.conj().T), win, check=check)


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def closed_form_superposition_wigner(ell1: int, ell2: int, phi0: float, ell: int, phi: float) -> float:
    """W of ``(|l1> + e^{i phi0}|l2>)/sqrt2``: even part plus the odd-sum correction."""
    c = math.cos(phi0 + (ell2 - ell1) * phi)
    s = ell1 + ell2
    even = (float(ell == ell1) + float(ell == ell2) + 2 * float(s == 2 * ell) * c) / (4 * math.pi)
    odd = 0.0
    if s % 2:
        odd = c * (-1) ** ((ell + (s - 1) // 2) % 2) / (s - 2 * ell) / math.pi**2
    return even + odd


def coherent_wigner_parts(ell0: int, phi0: float, ell: int, phi: float) -> tuple[float, float]:
    """Even and odd parts of the coherent-state Wigner function."""
    q = math.exp(-1.0)
    norm = theta3(0.0, q).real
    x = phi - phi0
    even = math.exp(-((ell - ell0) ** 2)) * theta3(x, q).real / (TWO_PI * norm)

    pref = np.exp(1j * x - 0.5) * theta3(x + 0.5j, q) / (2 * math.pi**2 * norm)
    series = 0.0
    j = 0
    # terms exp(-l'^2 - l') are symmetric about l' = -1/2; walk outward
    while True:
        added = 0.0
        for lp in {j, -j - 1}:
            term = math.exp(-lp * lp - lp) / (lp + ell0 - ell + 0.5)
            term *= (-1) ** ((lp - ell + ell0) % 2)
            series += term
            added = max(added, abs(term))
        if added < 1e-14 and j > 0:
            break
        j += 1
    odd = pref * series
    if abs(odd.imag) > IMAG_TOL:
        raise NumericalValidationError(f"odd coherent part has imaginary part {odd.imag:.3e}")
    return even, float(odd.real)


def closed_form_coherent_wigner(ell0: int, phi0: float, ell: int, phi: float) -> float:
    even, odd = coherent_wigner_parts(ell0, phi0, ell, phi)
    return even + odd


# ---------------------------------------------------------------------------
# traciality
# ---------------------------------------------------------------------------

def traciality(rho_a, rho_b, tol: float = 1e-8) -> float:
    """Phase-space overlap ``2 pi sum_l int W_a W_b dphi``, checked against ``Tr(rho_a rho_b)``.

    Rows inside the common window are integrated with an exact midpoint rule.
    Outside it only odd lines survive and the row sum of products of kernel
    weights is a digamma/trigamma closed form.
    """
    a, b = _as_density(rho_a), _as_density(rho_b)
    win = a.window.union(b.window)
    A, B = embed(a.matrix, a.window, win), embed(b.matrix, b.window, win)
    d = win.size
    grid = AngleGrid(4 * d + 1)
    wa = samples_from_modes(symbol_modes(A, win, win.ells), grid)
    wb = samples_from_modes(symbol_modes(B, win, win.ells), grid)
    inside = TWO_PI * grid.weight * np.sum(_real(wa) * _real(wb))

    lines_a = {k: (s, v) for k, s, v in _diagonal_lines(A, win) if k % 2}
    lines_b = {k: (s, v) for k, s, v in _diagonal_lines(B, win) if k % 2}
    tail = 0j
    for k, (sa, va) in lines_a.items():
        sb, vb = lines_b[-k]
        # kernel products share sign (-1)^((sa - sb)/2) once sin^2 = 1 is used
        sign = (-1.0) ** (((sa[:, None] - sb[None, :]) // 2) % 2)
        up = _pair_tail(win.hi + 1 - sa[:, None] / 2, win.hi + 1 - sb[None, :] / 2)
        down = _pair_tail(sa[:, None] / 2 - win.lo + 1, sb[None, :] / 2 - win.lo + 1)
        tail += va @ (4 * sign * (up + down)) @ vb
    # 2 pi * (2 pi sum_k c_k c_-k) with c = K-weighted lines / (2 pi)^2
    tail *= TWO_PI * TWO_PI / TWO_PI**4
    total = inside + tail.real
    exact = trace_product(a, b).real
    if abs(total - exact) > tol:
        raise NumericalValidationError(f"traciality mismatch: {total!r} vs Tr = {exact!r}")
    return float(total)
