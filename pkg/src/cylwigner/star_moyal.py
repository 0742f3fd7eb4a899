"""Symbols, star product, Moyal bracket and the delta_l interpolation.

Symbols live in the angular Fourier domain, ``a(l, phi) = sum_m c_m(l) e^{i m phi}``,
so ``d/dphi`` is exact. Shifts in ``l`` by non-integer amounts use the
band-limited interpolant: the integer samples of ``c_m`` are the Fourier
series of a function supported in ``(-pi, pi)``.

Operator products are exact on the *half-integer lattice*: mode ``k`` of
the symbol, continued to ``x = (n + m)/2`` with ``n - m = k``, equals
``A[n, m] / (2 pi)``. On that lattice

    (A B)  <->  2 pi sum_{k1 + k2 = k} c^A_{k1}(x + k2/2) c^B_{k2}(x - k1/2),

which is the closed exponential ``2 pi a exp(-(i/2) P) b`` of the cylinder
Poisson operator. :class:`HalfLattice` stores a symbol in this form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .cyl_core import AngleGrid, Window, WindowLike, as_window, embed
from .wigner_map import (
    TWO_PI,
    kernel_weight,
    sinc,
    matrix_from_modes,
    samples_from_modes,
    symbol_modes,
)

__all__ = [
    "BandLimitError",
    "SeriesConvergenceError",
    "CylSymbol",
    "HalfLattice",
    "symbol_of",
    "operator_of",
    "delta_ell_shift",
    "sinc_derivative",
    "line_interpolate",
    "star_product",
    "star_integral_form",
    "moyal_bracket",
    "apply_correspondence",
    "CORRESPONDENCE_RULES",
]

DEFAULT_ORDER = 12


class BandLimitError(ValueError):
    """Operator or symbol has angular modes beyond the declared band."""


class SeriesConvergenceError(ArithmeticError):
    """The differential star-product series has not settled at the requested order."""


@dataclass(frozen=True)
class CylSymbol:
    """Band-limited symbol on an l window: ``coeffs[i, m + M] = c_m(lo + i)``."""

    coeffs: np.ndarray
    window: Window

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex, copy=True)
        win = as_window(self.window)
        if c.ndim != 2 or c.shape[0] != win.size or c.shape[1] % 2 == 0:
            raise ValueError(f"coefficient shape {c.shape} does not fit window {win}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "window", win)

    @property
    def band(self) -> int:
        return (self.coeffs.shape[1] - 1) // 2

    @property
    def ells(self) -> np.ndarray:
        return self.window.ells

    def mode(self, m: int) -> np.ndarray:
        if abs(m) > self.band:
            return np.zeros(self.window.size, dtype=complex)
        return self.coeffs[:, m + self.band]

    def with_band(self, M: int) -> "CylSymbol":
        if M >= self.band:
            pad = M - self.band
            return CylSymbol(np.pad(self.coeffs, ((0, 0), (pad, pad))), self.window)
        cut = self.band - M
        dropped = np.concatenate([self.coeffs[:, :cut], self.coeffs[:, -cut:]], axis=1)
        if np.max(np.abs(dropped), initial=0.0) > 1e-12:
            raise BandLimitError(f"symbol has content above band {M}")
        return CylSymbol(self.coeffs[:, cut:-cut], self.window)

    def samples(self, grid: AngleGrid) -> np.ndarray:
        return samples_from_modes(self.coeffs, grid)

    def __add__(self, other: "CylSymbol") -> "CylSymbol":
        a, b = _common(self, other)
        return CylSymbol(a.coeffs + b.coeffs, a.window)

    def __sub__(self, other: "CylSymbol") -> "CylSymbol":
        a, b = _common(self, other)
        return CylSymbol(a.coeffs - b.coeffs, a.window)

    def __mul__(self, scalar) -> "CylSymbol":
        return CylSymbol(self.coeffs * scalar, self.window)

    __rmul__ = __mul__

    def max_abs_diff(self, other: "CylSymbol") -> float:
        a, b = _common(self, other)
        return float(np.max(np.abs(a.coeffs - b.coeffs)))


def _common(a: CylSymbol, b: CylSymbol) -> tuple[CylSymbol, CylSymbol]:
    if a.window != b.window:
        raise ValueError(f"symbols live on different windows {a.window} and {b.window}")
    M = max(a.band, b.band)
    return a.with_band(M), b.with_band(M)


def symbol_of(op_matrix: np.ndarray, window: WindowLike, band: int | None = None) -> CylSymbol:
    """``a(l, phi) = Tr[A w(l, phi)]`` sampled on the operator's own window."""
    win = as_window(window)
    op = np.asarray(op_matrix, dtype=complex)
    if op.shape != (win.size, win.size):
        raise ValueError(f"operator shape {op.shape} does not match window {win}")
    full = CylSymbol(symbol_modes(op, win, win.ells), win)
    if band is None:
        return full
    n = np.arange(win.size)
    wide = np.abs(n[:, None] - n[None, :]) > band
    if np.any(np.abs(op[wide]) > 1e-12):
        raise BandLimitError(f"operator has off-diagonal width beyond band {band}")
    return full.with_band(band)


def operator_of(symbol: CylSymbol) -> np.ndarray:
    """Inverse of :func:`symbol_of`: ``A = 2 pi sum_l int a(l, phi) w(l, phi) dphi``.

    Solved line by line on the finite window; exact when ``symbol`` is the
    symbol of an operator on that window.
    """
    K = symbol.window.size - 1
    sym = symbol if symbol.band >= K else symbol.with_band(K)
    modes = sym.coeffs[:, sym.band - K: sym.band + K + 1]
    return matrix_from_modes(modes, sym.ells, sym.window)


# ---------------------------------------------------------------------------
# delta_l
# ---------------------------------------------------------------------------

def delta_ell_shift(f, lam: float, *, axis: int = 0, mode: str = "periodic") -> np.ndarray:
    """``exp(lam delta_l) f``: continuous translation of samples ``f(l)``.

    ``mode="periodic"`` multiplies the discrete Fourier transform of the
    window by ``exp(i lam theta)``, ``theta`` in ``[-pi, pi)``. It is a
    one-parameter unitary group on the window (integer ``lam`` is a cyclic
    roll), so compositions add exactly. Pad with zeros to avoid wrap-around.

    ``mode="line"`` treats ``f`` as zero outside the window and evaluates the
    Shannon interpolant ``sum_l' f(l') sinc(l + lam - l')`` at the same points.
    """
    f = np.asarray(f, dtype=complex)
    f = np.moveaxis(f, axis, 0)
    n = f.shape[0]
    if mode == "periodic":
        theta = TWO_PI * np.fft.fftfreq(n)
        phase = np.exp(1j * lam * theta).reshape((n,) + (1,) * (f.ndim - 1))
        out = np.fft.ifft(phase * np.fft.fft(f, axis=0), axis=0)
    elif mode == "line":
        idx = np.arange(n)
        kern = sinc(idx[:, None] + lam - idx[None, :])
        out = np.tensordot(kern, f, axes=(1, 0))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return np.moveaxis(out, 0, axis)


@lru_cache(maxsize=64)
def _legendre(n: int):
    return np.polynomial.legendre.leggauss(n)


def sinc_derivative(y, order: int) -> np.ndarray:
    """``d^j/dy^j sinc(y) = (1/2pi) int_{-pi}^{pi} (i t)^j e^{i y t} dt``."""
    y = np.asarray(y, dtype=float)
    if order == 0:
        return sinc(y).astype(complex)
    n = max(48, int(math.pi * np.max(np.abs(y), initial=0.0)) + order + 48)
    x, w = _legendre(n)
    t = math.pi * x
    integrand = (1j * t) ** order * np.exp(1j * np.multiply.outer(y, t))
    return (integrand @ w) * math.pi / TWO_PI


def line_interpolate(values, nodes, x, order: int = 0) -> np.ndarray:
    """Value (or ``order``-th derivative) at ``x`` of the unit-spaced Shannon interpolant."""
    values = np.asarray(values, dtype=complex)
    y = np.subtract.outer(np.asarray(x, dtype=float), np.asarray(nodes, dtype=float))
    return sinc_derivative(y, order) @ values


# ---------------------------------------------------------------------------
# half-integer lattice
# ---------------------------------------------------------------------------

class HalfLattice:
    """Symbol modes on the lattice ``x = (n + m)/2``, ``k = n - m``, ``n, m`` in a window.

    ``vals[i, j]`` holds mode ``k = j - K`` at ``x = lo + i/2`` with
    ``K = size - 1``; entries whose parity does not match (``2x - k`` odd)
    or that fall outside the window stay zero.
    """

    def __init__(self, vals: np.ndarray, window: WindowLike):
        self.window = as_window(window)
        d = self.window.size
        if vals.shape != (2 * d - 1, 2 * d - 1):
            raise ValueError(f"lattice shape {vals.shape} does not match window {self.window}")
        self.vals = vals * self.valid_mask(self.window)

    @staticmethod
    def valid_mask(window: Window) -> np.ndarray:
        d = window.size
        i = np.arange(2 * d - 1)[:, None]
        k = np.arange(2 * d - 1)[None, :] - (d - 1)
        two_x = 2 * window.lo + i
        n2, m2 = two_x + k, two_x - k
        return ((n2 % 2) == 0) & (n2 >= 2 * window.lo) & (n2 <= 2 * window.hi) & (
            m2 >= 2 * window.lo) & (m2 <= 2 * window.hi)

    @property
    def K(self) -> int:
        return self.window.size - 1

    @property
    def xs(self) -> np.ndarray:
        return self.window.lo + 0.5 * np.arange(2 * self.window.size - 1)

    @property
    def ks(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1)

    @classmethod
    def from_matrix(cls, mat: np.ndarray, window: WindowLike) -> "HalfLattice":
        win = as_window(window)
        d = win.size
        vals = np.zeros((2 * d - 1, 2 * d - 1), dtype=complex)
        n = np.arange(d)[:, None]
        m = np.arange(d)[None, :]
        vals[(n + m).ravel(), (n - m + d - 1).ravel()] = (np.asarray(mat) / TWO_PI).ravel()
        return cls(vals, win)

    @classmethod
    def from_symbol(cls, symbol: CylSymbol) -> "HalfLattice":
        return cls.from_matrix(operator_of(symbol), symbol.window)

    def to_matrix(self) -> np.ndarray:
        d = self.window.size
        n = np.arange(d)[:, None]
        m = np.arange(d)[None, :]
        return TWO_PI * self.vals[n + m, n - m + d - 1]

    def to_modes(self, ells) -> np.ndarray:
        """Continue every mode from its lattice to integer ``l`` (exp(+-delta/2) on odd modes)."""
        ells = np.asarray(ells, dtype=float)
        kern = sinc(ells[:, None] - self.xs[None, :])
        return kern @ self.vals

    def to_symbol(self, ells_window: WindowLike | None = None) -> CylSymbol:
        win = self.window if ells_window is None else as_window(ells_window)
        return CylSymbol(self.to_modes(win.ells), win)

    def padded(self, window: WindowLike) -> "HalfLattice":
        win = as_window(window)
        return HalfLattice.from_matrix(embed(self.to_matrix(), self.window, win), win)

    def copy_with(self, vals: np.ndarray) -> "HalfLattice":
        return HalfLattice(vals, self.window)

    # -- phase-space operations (results are re-masked to the window) ------
    def shift_x(self, half_steps: int) -> np.ndarray:
        """``W(x + half_steps/2, .)`` as a raw array (zero beyond the window)."""
        out = np.zeros_like(self.vals)
        h = half_steps
        if h > 0:
            out[:-h] = self.vals[h:]
        elif h < 0:
            out[-h:] = self.vals[:h]
        else:
            out[:] = self.vals
        return out

    @staticmethod
    def shift_k(arr: np.ndarray, dk: int) -> np.ndarray:
        """Multiply by ``exp(i dk phi)`` (raw array, modes beyond K dropped)."""
        out = np.zeros_like(arr)
        if dk > 0:
            out[:, dk:] = arr[:, :-dk]
        elif dk < 0:
            out[:, :dk] = arr[:, -dk:]
        else:
            out[:] = arr
        return out

    def d_phi(self, arr: np.ndarray | None = None) -> np.ndarray:
        arr = self.vals if arr is None else arr
        return 1j * self.ks[None, :] * arr

    def times_x(self, arr: np.ndarray | None = None) -> np.ndarray:
        arr = self.vals if arr is None else arr
        return self.xs[:, None] * arr


# ---------------------------------------------------------------------------
# star product
# ---------------------------------------------------------------------------

def _lattice_lines(mat: np.ndarray, window: Window):
    """Per mode ``k``: lattice nodes ``x`` and values ``A[n, m] / 2pi``."""
    d = window.size
    lines = {}
    for k in range(-(d - 1), d):
        vals = np.diagonal(mat, offset=-k) / TWO_PI
        i = np.arange(vals.size)
        n = window.lo + i + max(k, 0)
        m = n - k
        lines[k] = ((n + m) / 2.0, vals)
    return lines


def _differential_star(a: CylSymbol, b: CylSymbol, order: int, tol: float) -> CylSymbol:
    win = a.window
    d = win.size
    A, B = operator_of(a), operator_of(b)
    la, lb = _lattice_lines(A, win), _lattice_lines(B, win)
    xs = win.lo + 0.5 * np.arange(2 * d - 1)
    # derivative tables: [k][j] -> values at every half-integer x
    da = {k: [line_interpolate(v, x, xs, j) for j in range(order + 1)] for k, (x, v) in la.items()}
    db = {k: [line_interpolate(v, x, xs, j) for j in range(order + 1)] for k, (x, v) in lb.items()}

    out = HalfLattice(np.zeros((2 * d - 1, 2 * d - 1), dtype=complex), win)
    total = np.zeros_like(out.vals)
    last = np.zeros_like(out.vals)
    binom = [[math.comb(n, j) for j in range(n + 1)] for n in range(order + 1)]
    for k in range(-(d - 1), d):
        for k1 in range(-(d - 1), d):
            k2 = k - k1
            if abs(k2) > d - 1:
                continue
            for n in range(order + 1):
                term = np.zeros(xs.size, dtype=complex)
                for j in range(n + 1):
                    coef = binom[n][j] * (k2 / 2) ** j * (-k1 / 2) ** (n - j)
                    if coef:
                        term += coef * da[k1][j] * db[k2][n - j]
                term /= math.factorial(n)
                total[:, k + d - 1] += term
                if n == order:
                    last[:, k + d - 1] += term
    mask = out.valid_mask(win)
    total *= TWO_PI * mask
    last *= TWO_PI * mask
    scale = max(np.max(np.abs(total)), 1e-300)
    if order > 0 and np.max(np.abs(last)) > tol * scale:
        raise SeriesConvergenceError(
            f"order-{order} term is {np.max(np.abs(last)) / scale:.2e} of the product; raise the order"
        )
    return HalfLattice(total, win).to_symbol()


def star_product(
    a: CylSymbol,
    b: CylSymbol,
    mode: str = "integral",
    *,
    order: int = DEFAULT_ORDER,
    tol: float = 1e-8,
) -> CylSymbol:
    """Symbol of the operator product.

    ``mode="integral"`` pulls both symbols back to operators and multiplies
    (exact). ``mode="differential"`` sums ``2 pi a exp(-(i/2) P) b`` to
    ``order``, with ``delta_l`` acting as the derivative of the band-limited
    interpolant and ``d/dphi`` on Fourier modes, evaluated on the half-integer
    lattice. A :class:`SeriesConvergenceError` is raised when the last term
    still exceeds ``tol`` relative to the result.
    """
    a, b = _common(a, b)
    if mode == "integral":
        return symbol_of(operator_of(a) @ operator_of(b), a.window)
    if mode == "differential":
        return _differential_star(a, b, order, tol)
    raise ValueError(f"unknown star-product mode {mode!r}")


def star_integral_form(a: CylSymbol, b: CylSymbol, grid: AngleGrid) -> np.ndarray:
    """The double-sum/double-integral star product, evaluated on ``grid``.

    Angle integrals are done in closed form per Fourier mode. ``l`` sums run
    over the symbols' window only, so the result is exact only for symbols
    supported there (operators with ``n + m`` even lines, i.e. even modes).
    Cross-check utility; the production path is :func:`star_product`.
    """
    a, b = _common(a, b)
    M = a.band
    ms = np.arange(-M, M + 1)
    lo, hi = a.window
    ells = a.ells
    shifts = np.arange(lo - hi, hi - lo + 1)
    # Ka[m, l''] = int exp(i(m/2 + l'') t) dt ; Kb[m, l'] = int exp(i(m/2 - l') t) dt
    Ka = kernel_weight(ms[:, None] / 2 + shifts[None, :])
    Kb = kernel_weight(ms[:, None] / 2 - shifts[None, :])
    out = np.zeros((ells.size, grid.n_phi), dtype=complex)
    phase = np.exp(1j * np.outer(ms, grid.points))
    for i, ell in enumerate(ells):
        fa = np.zeros((shifts.size, ms.size), dtype=complex)   # over l'
        fb = np.zeros((shifts.size, ms.size), dtype=complex)   # over l''
        tgt = ell + shifts
        ok = (tgt >= lo) & (tgt <= hi)
        fa[ok] = a.coeffs[tgt[ok] - lo]
        fb[ok] = b.coeffs[tgt[ok] - lo]
        # sum_{l', l''} [sum_m ca_m(l+l') e^{im phi} Ka(m, l'')] [sum_m' cb_m'(l+l'') e^{im' phi} Kb(m', l')]
        left = np.einsum("pm,mq,mj->pqj", fa, Ka, phase)    # p: l', q: l''
        right = np.einsum("qm,mp,mj->pqj", fb, Kb, phase)
        out[i] = np.einsum("pqj,pqj->j", left, right) / TWO_PI
    return out


def moyal_bracket(a: CylSymbol, b: CylSymbol, mode: str = "integral", **kw) -> CylSymbol:
    """``{a, b}_M = (a * b - b * a) / i``."""
    return (star_product(a, b, mode, **kw) - star_product(b, a, mode, **kw)) * (-1j)


# ---------------------------------------------------------------------------
# correspondence rules
# ---------------------------------------------------------------------------

def _rule_L_left(h: HalfLattice) -> np.ndarray:
    return h.times_x() - 0.5j * h.d_phi()


def _rule_L_right(h: HalfLattice) -> np.ndarray:
    return h.times_x() + 0.5j * h.d_phi()


def _rule_E_left(h: HalfLattice) -> np.ndarray:
    return HalfLattice.shift_k(h.shift_x(+1), -1)


def _rule_E_right(h: HalfLattice) -> np.ndarray:
    return HalfLattice.shift_k(h.shift_x(-1), -1)


CORRESPONDENCE_RULES = {
    "L_left": (_rule_L_left, 0),
    "L_right": (_rule_L_right, 0),
    "E_left": (_rule_E_left, 1),
    "E_right": (_rule_E_right, 1),
}


def apply_correspondence(rule: str, w: CylSymbol) -> CylSymbol:
    """Phase-space image of ``L rho``, ``rho L``, ``E rho`` or ``rho E``.

    ``L rho -> (l - (i/2) d/dphi) W``, ``rho L -> (l + (i/2) d/dphi) W``,
    ``E rho -> e^{-i phi} e^{+delta/2} W``, ``rho E -> e^{-i phi} e^{-delta/2} W``,
    applied on the half-integer lattice where the half shifts are exact and
    continued back to integer ``l``. The ``E`` rules move support by one unit,
    so their result lives on a window widened by one on each side.
    """
    try:
        fn, grow = CORRESPONDENCE_RULES[rule]
    except KeyError:
        raise ValueError(f"unknown rule {rule!r}; expected one of {sorted(CORRESPONDENCE_RULES)}") from None
    h = HalfLattice.from_symbol(w)
    if grow:
        h = h.padded(Window(w.window.lo - grow, w.window.hi + grow))
    return h.copy_with(fn(h)).to_symbol()
