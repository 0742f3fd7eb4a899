"""Tomography by L^2 rotations followed by angle measurements.

A slice at rotation ``zeta`` is the angle distribution of ``U rho U^dag`` with
``U = exp(i zeta L^2 / 2)``::

    p(phi, zeta) = (1/2pi) sum_{n,m} e^{i(n-m) phi} e^{i zeta (n^2 - m^2)/2} rho_nm

and the characteristic coefficients ``rho(l, phi) = Tr[rho D^dag(l, phi)] / 2pi``
follow from the single slice ``zeta = phi / l``::

    rho(l, phi) = (1/2pi) int e^{-i l phi'} p(phi', phi / l) dphi'.

The ``l = 0`` row is the Fourier transform of the angular-momentum spectrum,
which no angle measurement sees, so a :class:`TomogramSet` carries that
spectrum alongside the slices.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .cyl_core import AngleGrid, CylDensity, CylState, Window, WindowLike, as_window, density_from_pure
from .wigner_map import TWO_PI, NumericalValidationError, ResolutionError, WignerGrid, kernel_weight

__all__ = [
    "CoverageError",
    "TomogramSet",
    "CharCoeffs",
    "ZETA_TOL",
    "required_zetas",
    "simulate_tomograms",
    "char_coeff_zero",
    "char_coeffs_direct",
    "reconstruct_char",
    "wigner_from_char",
    "density_from_char",
]

ZETA_TOL = 1e-12
PROB_NORM_TOL = 1e-8
PROB_NEG_TOL = 1e-12


class CoverageError(ValueError):
    """The tomogram set lacks a rotation needed for some ``(l, phi_k)``."""

    def __init__(self, missing, message=None):
        self.missing = list(missing)
        shown = ", ".join(f"({l}, {k})" for l, k in self.missing[:8])
        more = "" if len(self.missing) <= 8 else f" and {len(self.missing) - 8} more"
        super().__init__(message or f"no tomogram for (l, phi index) pairs: {shown}{more}")


def _as_density(x) -> CylDensity:
    return density_from_pure(x) if isinstance(x, CylState) else x


def _read_support(lines: list[str]) -> tuple[Window | None, list[str]]:
    support = None
    body = []
    for ln in lines:
        if ln.startswith("#"):
            parts = ln[1:].split()
            if parts and parts[0] == "support":
                support = Window(int(parts[1]), int(parts[2]))
        elif ln.strip():
            body.append(ln)
    return support, body


@dataclass(frozen=True)
class TomogramSet:
    """Angle distributions ``probabilities[j, k] = p(phi_k, zeta_j)``.

    ``ell_spectrum`` (optional) is the measured angular-momentum distribution
    over ``support``; it fixes the ``l = 0`` characteristic row.
    """

    zeta_values: np.ndarray
    phi_grid: AngleGrid
    probabilities: np.ndarray
    support: Window | None = None
    ell_spectrum: np.ndarray | None = None

    def __post_init__(self):
        z = np.array(self.zeta_values, dtype=float).ravel()
        p = np.array(self.probabilities, dtype=float)
        if p.shape != (z.size, self.phi_grid.n_phi):
            raise ValueError(f"probabilities shape {p.shape} does not match {z.size} slices x {self.phi_grid.n_phi} angles")
        if p.size and p.min() < -PROB_NEG_TOL:
            raise ValueError(f"negative probability {p.min():.3e}")
        norms = p.sum(axis=1) * self.phi_grid.weight
        if z.size and np.max(np.abs(norms - 1.0)) > PROB_NORM_TOL:
            raise ValueError(f"slice normalisation off by {np.max(np.abs(norms - 1.0)):.3e}")
        for a in (z, p):
            a.setflags(write=False)
        object.__setattr__(self, "zeta_values", z)
        object.__setattr__(self, "probabilities", p)
        if self.support is not None:
            object.__setattr__(self, "support", as_window(self.support))
        if self.ell_spectrum is not None:
            s = np.array(self.ell_spectrum, dtype=float)
            if self.support is None or s.shape != (self.support.size,):
                raise ValueError("ell_spectrum needs a support window of matching size")
            s.setflags(write=False)
            object.__setattr__(self, "ell_spectrum", s)

    def slice_index(self, zeta: float) -> int | None:
        d = np.abs(self.zeta_values - zeta)
        j = int(np.argmin(d)) if d.size else -1
        return j if j >= 0 and d[j] <= ZETA_TOL else None

    def to_csv(self) -> str:
        buf = io.StringIO()
        if self.support is not None:
            buf.write(f"# support {self.support.lo} {self.support.hi}\n")
        buf.write("zeta,phi,p\n")
        for j, z in enumerate(self.zeta_values):
            for k, phi in enumerate(self.phi_grid.points):
                buf.write(f"{z:.17g},{phi:.12g},{self.probabilities[j, k]:.12g}\n")
        return buf.getvalue()

    def spectrum_to_csv(self) -> str:
        if self.ell_spectrum is None:
            raise ValueError("no angular-momentum spectrum recorded")
        lines = ["ell,p"] + [f"{l},{p:.12g}" for l, p in zip(self.support.ells, self.ell_spectrum)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str, spectrum_csv: str | None = None) -> "TomogramSet":
        support, body = _read_support(text.splitlines())
        if body[0].strip() != "zeta,phi,p":
            raise ValueError(f"unexpected header {body[0]!r}")
        rows = np.array([[float(x) for x in ln.split(",")] for ln in body[1:]])
        zetas = np.array(list(dict.fromkeys(rows[:, 0])))
        n_phi = rows.shape[0] // zetas.size
        grid = AngleGrid(n_phi)
        if not np.allclose(rows[:n_phi, 1], grid.points, atol=1e-10):
            raise ValueError("angles are not a midpoint grid")
        spectrum = None
        if spectrum_csv is not None:
            sl = [ln for ln in spectrum_csv.strip().splitlines() if ln.strip()]
            if sl[0].strip() != "ell,p":
                raise ValueError(f"unexpected header {sl[0]!r}")
            sp = np.array([[float(x) for x in ln.split(",")] for ln in sl[1:]])
            ells = sp[:, 0].astype(int)
            sw = Window(int(ells[0]), int(ells[-1]))
            support = sw if support is None else support
            spectrum = np.zeros(support.size)
            spectrum[ells - support.lo] = sp[:, 1]
        return cls(zetas, grid, rows[:, 2].reshape(zetas.size, n_phi), support, spectrum)


@dataclass(frozen=True)
class CharCoeffs:
    """``values[i, k] = rho(ell_window.lo + i, phi_k)`` for a state supported on ``support``."""

    values: np.ndarray
    ell_window: Window
    phi_grid: AngleGrid
    support: Window

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        win = as_window(self.ell_window)
        if v.shape != (win.size, self.phi_grid.n_phi):
            raise ValueError(f"values shape {v.shape} does not match grid")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "ell_window", win)
        object.__setattr__(self, "support", as_window(self.support))

    @property
    def ells(self) -> np.ndarray:
        return self.ell_window.ells

    def row(self, ell: int) -> np.ndarray:
        return self.values[ell - self.ell_window.lo]

    def hermiticity_residual(self) -> float:
        """``max |rho(-l, -phi) - conj rho(l, phi)|`` over rows whose mirror is present."""
        worst = 0.0
        for ell in self.ells:
            if self.ell_window.lo <= -ell <= self.ell_window.hi:
                worst = max(worst, float(np.max(np.abs(self.row(-ell)[::-1] - np.conj(self.row(ell))))))
        return worst

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# support {self.support.lo} {self.support.hi}\n")
        buf.write("ell,phi,re,im\n")
        for i, ell in enumerate(self.ells):
            for k, phi in enumerate(self.phi_grid.points):
                c = self.values[i, k]
                buf.write(f"{ell},{phi:.12g},{c.real:.12g},{c.imag:.12g}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "CharCoeffs":
        support, body = _read_support(text.splitlines())
        if body[0].strip() != "ell,phi,re,im":
            raise ValueError(f"unexpected header {body[0]!r}")
        rows = np.array([[float(x) for x in ln.split(",")] for ln in body[1:]])
        ells = np.unique(rows[:, 0].astype(int))
        n_phi = rows.shape[0] // ells.size
        grid = AngleGrid(n_phi)
        win = Window(int(ells[0]), int(ells[-1]))
        if support is None:
            raise ValueError("missing '# support lo hi' line")
        vals = (rows[:, 2] + 1j * rows[:, 3]).reshape(ells.size, n_phi)
        return cls(vals, win, grid, support)


# ---------------------------------------------------------------------------
# forward model
# ---------------------------------------------------------------------------

def required_zetas(ell_window: WindowLike, phi_grid: AngleGrid) -> np.ndarray:
    """Sorted rotations ``{0} U {phi_k / l : l != 0}``, merged within 1e-12."""
    win = as_window(ell_window)
    ells = win.ells[win.ells != 0]
    raw = np.concatenate([[0.0], (phi_grid.points[None, :] / ells[:, None]).ravel()])
    raw.sort()
    keep = [raw[0]]
    for z in raw[1:]:
        if z - keep[-1] > ZETA_TOL:
            keep.append(z)
    return np.array(keep)


def _char_window(support: Window) -> Window:
    return Window(-(support.size - 1), support.size - 1)


def simulate_tomograms(
    rho,
    zeta_values=None,
    phi_grid: AngleGrid | None = None,
    *,
    shots: int | None = None,
    seed=None,
) -> TomogramSet:
    """Exact (or sampled) tomograms of ``rho``.

    ``zeta_values`` defaults to :func:`required_zetas` for the full
    characteristic window of ``rho``. With ``shots`` set, each slice and the
    angular-momentum spectrum are replaced by multinomial frequency estimates
    from ``shots`` counts; ``seed`` feeds :func:`numpy.random.default_rng`.
    """
    rho = _as_density(rho)
    win = rho.window
    if phi_grid is None:
        phi_grid = AngleGrid(2 * win.size + 2)
    if zeta_values is None:
        zeta_values = required_zetas(_char_window(win), phi_grid)
    zeta = np.asarray(zeta_values, dtype=float).ravel()
    ells = win.ells.astype(float)
    # conjugated density per slice: rho_nm exp(i zeta (n^2 - m^2)/2)
    q = 0.5 * (ells[:, None] ** 2 - ells[None, :] ** 2)
    ket = np.exp(1j * np.outer(phi_grid.points, ells)) / np.sqrt(TWO_PI)   # <phi_k|l>
    probs = np.empty((zeta.size, phi_grid.n_phi))
    for j, z in enumerate(zeta):
        r = rho.matrix * np.exp(1j * z * q)
        vals = np.einsum("kn,nm,km->k", ket, r, ket.conj())
        probs[j] = vals.real
    spectrum = np.clip(rho.populations(), 0.0, None)
    if shots is not None:
        rng = np.random.default_rng(seed)
        w = phi_grid.weight
        for j in range(zeta.size):
            pk = np.clip(probs[j], 0.0, None) * w
            counts = rng.multinomial(shots, pk / pk.sum())
            probs[j] = counts / (shots * w)
        counts = rng.multinomial(shots, spectrum / spectrum.sum())
        spectrum = counts / shots
    return TomogramSet(zeta, phi_grid, probs, win, spectrum)


def char_coeffs_direct(rho, ell_window: WindowLike | None = None, phi_grid: AngleGrid | None = None) -> CharCoeffs:
    """``rho(l, phi) = (1/2pi) sum_m rho_{m+l, m} e^{i(m + l/2) phi}`` straight from the matrix."""
    rho = _as_density(rho)
    win = rho.window
    cw = _char_window(win) if ell_window is None else as_window(ell_window)
    if phi_grid is None:
        phi_grid = AngleGrid(2 * win.size + 2)
    phis = phi_grid.points
    out = np.zeros((cw.size, phis.size), dtype=complex)
    for i, ell in enumerate(cw.ells):
        line = np.diagonal(rho.matrix, offset=-ell)      # rho_{m+l, m}
        if line.size == 0:
            continue
        m = win.lo + max(-ell, 0) + np.arange(line.size)
        out[i] = np.exp(1j * np.outer(phis, m + ell / 2)) @ line / TWO_PI
    return CharCoeffs(out, cw, phi_grid, win)


def char_coeff_zero(source, phi_grid: AngleGrid | None = None) -> np.ndarray:
    """``rho(0, phi_k) = (1/2pi) sum_l e^{i l phi_k} P(l)`` from a density or a measured spectrum."""
    if isinstance(source, TomogramSet):
        if source.ell_spectrum is None:
            raise CoverageError([], "the l = 0 row needs the angular-momentum spectrum, which this set lacks")
        spectrum, win = source.ell_spectrum, source.support
        phi_grid = source.phi_grid if phi_grid is None else phi_grid
    else:
        rho = _as_density(source)
        spectrum, win = rho.populations(), rho.window
        phi_grid = AngleGrid(2 * win.size + 2) if phi_grid is None else phi_grid
    return np.exp(1j * np.outer(phi_grid.points, win.ells)) @ spectrum / TWO_PI


# ---------------------------------------------------------------------------
# inversion
# ---------------------------------------------------------------------------

def reconstruct_char(
    tomograms: TomogramSet,
    ell_window: WindowLike | None = None,
    support: WindowLike | None = None,
) -> CharCoeffs:
    """Characteristic coefficients from tomograms by one angle quadrature per point.

    Coverage of every ``(l, phi_k)`` pair is checked before any integration.
    The midpoint rule is exact when ``n_phi > 2 (d - 1)`` for support width ``d``.
    """
    sup = as_window(support) if support is not None else tomograms.support
    if sup is None:
        raise ValueError("support window unknown; pass support=")
    cw = _char_window(sup) if ell_window is None else as_window(ell_window)
    grid = tomograms.phi_grid
    if grid.n_phi <= 2 * (sup.size - 1):
        raise ResolutionError(f"n_phi = {grid.n_phi} must exceed {2 * (sup.size - 1)} for support width {sup.size}")
    slot = np.full((cw.size, grid.n_phi), -1, dtype=int)
    missing = []
    for i, ell in enumerate(cw.ells):
        if ell == 0:
            continue
        for k, phi in enumerate(grid.points):
            j = tomograms.slice_index(phi / ell)
            if j is None:
                missing.append((int(ell), k))
            else:
                slot[i, k] = j
    if cw.lo <= 0 <= cw.hi and tomograms.ell_spectrum is None:
        missing.extend((0, k) for k in range(grid.n_phi))
    if missing:
        raise CoverageError(missing)

    phis = grid.points
    out = np.zeros((cw.size, grid.n_phi), dtype=complex)
    for i, ell in enumerate(cw.ells):
        if ell == 0:
            out[i] = char_coeff_zero(tomograms)
            continue
        kern = np.exp(-1j * ell * phis) * grid.weight / TWO_PI
        out[i] = tomograms.probabilities[slot[i]] @ kern
    return CharCoeffs(out, cw, grid, sup)


def _line_coeffs(coeffs: CharCoeffs) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Per ``l``: indices ``m`` and ``rho_{m+l, m} / 2pi`` via the exact midpoint DFT."""
    sup = coeffs.support
    grid = coeffs.phi_grid
    if grid.n_phi < sup.size:
        raise ResolutionError(f"n_phi = {grid.n_phi} < support width {sup.size}")
    if not coeffs.ell_window.contains(_char_window(sup)):
        raise ValueError(f"char window {coeffs.ell_window} must cover {_char_window(sup)}")
    phis = grid.points
    out = {}
    for ell in range(-(sup.size - 1), sup.size):
        m = np.arange(sup.lo + max(-ell, 0), sup.hi - max(ell, 0) + 1)
        g = coeffs.row(ell) * np.exp(-0.5j * ell * phis)
        out[ell] = (m, np.exp(-1j * np.outer(m, phis)) @ g / grid.n_phi)
    return out


def density_from_char(coeffs: CharCoeffs, *, check: bool = True) -> CylDensity:
    """``rho = sum_l int rho(l, phi) D(l, phi) dphi``, done line by line in closed form."""
    sup = coeffs.support
    mat = np.zeros((sup.size, sup.size), dtype=complex)
    for ell, (m, a) in _line_coeffs(coeffs).items():
        mat[m + ell - sup.lo, m - sup.lo] = TWO_PI * a
    return CylDensity(0.5 * (mat + mat.conj().T), sup, check=check)


def wigner_from_char(
    coeffs: CharCoeffs,
    ell_window: WindowLike | None = None,
    angle_grid: AngleGrid | None = None,
) -> WignerGrid:
    """``W(l, phi) = (1/2pi) sum_l' int e^{i(l' phi - l phi')} rho(l', phi') dphi'``.

    After removing the half-integer phase ``e^{i l' phi'/2}`` each row is a
    trigonometric polynomial; its coefficients come from the midpoint DFT and
    the ``phi'`` integral is done analytically.
    """
    win = coeffs.support if ell_window is None else as_window(ell_window)
    grid = coeffs.phi_grid if angle_grid is None else angle_grid
    ells = win.ells
    out = np.zeros((ells.size, grid.n_phi), dtype=complex)
    for lp, (m, a) in _line_coeffs(coeffs).items():
        # int e^{-i l phi'} e^{i (m + l'/2) phi'} dphi' = K(m + l'/2 - l)
        weights = kernel_weight(m[None, :] + lp / 2 - ells[:, None]) @ a
        out += np.outer(weights, np.exp(1j * lp * grid.points)) / TWO_PI
    resid = float(np.max(np.abs(out.imag)))
    if resid > 1e-10:
        raise NumericalValidationError(f"reconstructed W has imaginary residue {resid:.3e}")
    return WignerGrid(out.real, win, grid)
