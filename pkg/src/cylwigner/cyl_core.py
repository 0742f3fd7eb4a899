"""States, density matrices and displacement operators on the cylinder S^1 x Z.

Everything here works in the angular-momentum basis ``|l>`` restricted to a
finite integer window ``[lo, hi]``. Amplitudes outside the window are zero by
construction, which keeps every sum in the library exactly finite.

Conventions
-----------
* angle states ``|phi> = (2 pi)^(-1/2) sum_l exp(-i l phi) |l>``
* ``U(phi) = exp(-i phi L)``, ``V(l) = exp(i l phi_op)`` (raises l)
* ``D(l, phi) = exp(-i l phi / 2) V(l) U(phi)`` with ``phi`` in ``(-pi, pi]``
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

__all__ = [
    "WindowOverflowError",
    "Window",
    "CylState",
    "CylDensity",
    "DisplacementLabel",
    "AngleGrid",
    "reduce_angle",
    "angle_wavefunction",
    "momentum_eigenstate",
    "superposition",
    "displacement_matrix",
    "displace",
    "parity_reflect",
    "density_from_pure",
    "trace_product",
    "embed",
]

NORM_TOL = 1e-12
PSD_TOL = 1e-10


class WindowOverflowError(ValueError):
    """A displacement pushed amplitude outside the requested window."""


@dataclass(frozen=True)
class Window:
    """Closed integer window ``[lo, hi]`` of angular-momentum indices."""

    lo: int
    hi: int

    def __post_init__(self):
        object.__setattr__(self, "lo", int(self.lo))
        object.__setattr__(self, "hi", int(self.hi))
        if self.hi < self.lo:
            raise ValueError(f"empty window [{self.lo}, {self.hi}]")

    @classmethod
    def symmetric(cls, l_max: int) -> "Window":
        return cls(-l_max, l_max)

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1

    @property
    def ells(self) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1)

    def contains(self, other: "Window") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def union(self, other: "Window") -> "Window":
        return Window(min(self.lo, other.lo), max(self.hi, other.hi))

    def shifted(self, dl: int) -> "Window":
        return Window(self.lo + dl, self.hi + dl)

    def __iter__(self):
        yield self.lo
        yield self.hi


WindowLike = Union[Window, tuple, list]


def as_window(w: WindowLike) -> Window:
    if isinstance(w, Window):
        return w
    lo, hi = w
    return Window(lo, hi)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


def reduce_angle(phi: float) -> float:
    """Map ``phi`` into the canonical window ``(-pi, pi]``."""
    r = math.fmod(phi + math.pi, 2 * math.pi)
    if r <= 0.0:
        r += 2 * math.pi
    return r - math.pi


@dataclass(frozen=True)
class CylState:
    """Pure state with finite support: amplitudes ``Psi_l`` for ``l`` in ``window``."""

    amplitudes: np.ndarray
    window: Window

    def __post_init__(self):
        amps = _frozen(np.ravel(self.amplitudes))
        win = as_window(self.window)
        if amps.size != win.size:
            raise ValueError(f"{amps.size} amplitudes for window of size {win.size}")
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "window", win)

    @classmethod
    def from_dict(cls, amps: dict) -> "CylState":
        ells = sorted(amps)
        win = Window(ells[0], ells[-1])
        vec = np.zeros(win.size, dtype=complex)
        for l, a in amps.items():
            vec[l - win.lo] = a
        return cls(vec, win)

    @property
    def ells(self) -> np.ndarray:
        return self.window.ells

    def amplitude(self, ell: int) -> complex:
        if self.window.lo <= ell <= self.window.hi:
            return complex(self.amplitudes[ell - self.window.lo])
        return 0j

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return abs(self.norm() ** 2 - 1.0) < tol

    def normalized(self) -> "CylState":
        return CylState(self.amplitudes / self.norm(), self.window)

    def padded(self, window: WindowLike) -> "CylState":
        return CylState(embed(self.amplitudes, self.window, as_window(window)), window)

    def overlap(self, other: "CylState") -> complex:
        """``<self|other>``."""
        win = self.window.union(other.window)
        a = embed(self.amplitudes, self.window, win)
        b = embed(other.amplitudes, other.window, win)
        return complex(np.vdot(a, b))


@dataclass(frozen=True)
class CylDensity:
    """Density matrix ``rho[l, l']`` over ``window x window``."""

    matrix: np.ndarray
    window: Window
    check: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=complex, copy=True)
        win = as_window(self.window)
        if mat.shape != (win.size, win.size):
            raise ValueError(f"matrix shape {mat.shape} does not match window {win}")
        if self.check:
            # Hermitian part is enforced exactly; deviations beyond rounding are an error.
            if not np.allclose(mat, mat.conj().T, atol=1e-10, rtol=0):
                raise ValueError("density matrix is not Hermitian")
            mat = 0.5 * (mat + mat.conj().T)
            tr = np.trace(mat).real
            if abs(tr - 1.0) > NORM_TOL * max(1, win.size):
                raise ValueError(f"density matrix has trace {tr!r}, expected 1")
            if np.linalg.eigvalsh(mat).min() < -PSD_TOL:
                raise ValueError("density matrix has negative eigenvalues")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "window", win)

    @property
    def ells(self) -> np.ndarray:
        return self.window.ells

    def element(self, l1: int, l2: int) -> complex:
        lo, hi = self.window
        if lo <= l1 <= hi and lo <= l2 <= hi:
            return complex(self.matrix[l1 - lo, l2 - lo])
        return 0j

    def padded(self, window: WindowLike) -> "CylDensity":
        win = as_window(window)
        return CylDensity(embed(self.matrix, self.window, win), win, check=False)

    def populations(self) -> np.ndarray:
        return self.matrix.diagonal().real.copy()


def embed(arr: np.ndarray, src: Window, dst: Window) -> np.ndarray:
    """Zero-pad (vector or square matrix) ``arr`` from window ``src`` into ``dst``."""
    src, dst = as_window(src), as_window(dst)
    if not dst.contains(src):
        raise WindowOverflowError(f"window {src} does not fit inside {dst}")
    off = src.lo - dst.lo
    sl = slice(off, off + src.size)
    if arr.ndim == 1:
        out = np.zeros(dst.size, dtype=complex)
        out[sl] = arr
    else:
        out = np.zeros((dst.size, dst.size), dtype=complex)
        out[sl, sl] = arr
    return out


@dataclass(frozen=True)
class DisplacementLabel:
    """Phase-space point ``(l, phi)``; ``phi`` is reduced to ``(-pi, pi]``."""

    ell: int
    phi: float

    def __post_init__(self):
        object.__setattr__(self, "ell", int(self.ell))
        object.__setattr__(self, "phi", reduce_angle(float(self.phi)))

    def inverse(self) -> "DisplacementLabel":
        return DisplacementLabel(-self.ell, -self.phi)


@dataclass(frozen=True)
class AngleGrid:
    """Uniform midpoint grid ``phi_k = -pi + 2 pi (k + 1/2) / n_phi``."""

    n_phi: int

    def __post_init__(self):
        if int(self.n_phi) < 2:
            raise ValueError("n_phi must be >= 2")
        object.__setattr__(self, "n_phi", int(self.n_phi))

    @property
    def points(self) -> np.ndarray:
        k = np.arange(self.n_phi)
        return -np.pi + 2 * np.pi * (k + 0.5) / self.n_phi

    @property
    def weight(self) -> float:
        return 2 * np.pi / self.n_phi


def angle_wavefunction(state: CylState, phi) -> complex | np.ndarray:
    """``Psi(phi) = (2 pi)^(-1/2) sum_l exp(i l phi) Psi_l``; vectorised over ``phi``."""
    phi = np.asarray(phi, dtype=float)
    phases = np.exp(1j * np.multiply.outer(phi, state.ells))
    out = phases @ state.amplitudes / math.sqrt(2 * math.pi)
    return complex(out) if out.ndim == 0 else out


def momentum_eigenstate(ell0: int) -> CylState:
    return CylState(np.array([1.0 + 0j]), Window(ell0, ell0))


def superposition(ell1: int, ell2: int, phi0: float) -> CylState:
    """``(|l1> + exp(i phi0) |l2>) / sqrt 2``."""
    if ell1 == ell2:
        raise ValueError("superposition needs two distinct angular momenta")
    s = 1 / math.sqrt(2)
    return CylState.from_dict({ell1: s, ell2: s * np.exp(1j * phi0)})


def _label(label, reduce: bool) -> tuple[int, float]:
    if isinstance(label, DisplacementLabel):
        return label.ell, label.phi
    ell, phi = label
    if reduce:
        lab = DisplacementLabel(ell, phi)
        return lab.ell, lab.phi
    return int(ell), float(phi)


def displacement_matrix(
    label,
    window: WindowLike,
    out_window: WindowLike | None = None,
    *,
    truncate: bool = False,
    reduce: bool = True,
) -> np.ndarray:
    """Matrix of ``D(l, phi)`` from ``window`` to ``out_window`` (default: same).

    ``<l''|D(l, phi)|l'> = exp(-i l phi / 2) exp(-i l' phi) delta(l'', l' + l)``.

    With ``truncate=False`` a column whose image leaves ``out_window`` raises
    :class:`WindowOverflowError`; ``truncate=True`` returns the compression
    instead. ``reduce=False`` keeps a raw tuple angle unreduced, which exposes
    the ``(-1)^l`` jump across the seam.
    """
    ell, phi = _label(label, reduce)
    src = as_window(window)
    dst = src if out_window is None else as_window(out_window)
    cols = src.ells
    rows = cols + ell
    inside = (rows >= dst.lo) & (rows <= dst.hi)
    if not truncate and not inside.all():
        raise WindowOverflowError(
            f"shift by {ell} maps {src} outside {dst}; pad the window or pass truncate=True"
        )
    mat = np.zeros((dst.size, src.size), dtype=complex)
    c = np.nonzero(inside)[0]
    mat[rows[c] - dst.lo, c] = np.exp(-0.5j * ell * phi - 1j * cols[c] * phi)
    return mat


def displace(
    state: CylState,
    label,
    window: WindowLike | None = None,
    *,
    auto_pad: bool = False,
) -> CylState:
    """Apply ``D(l, phi)``. The support moves by ``l``.

    If ``window`` is given the result must fit in it; otherwise a
    :class:`WindowOverflowError` is raised unless ``auto_pad`` widens it.
    """
    ell, phi = _label(label, True)
    target = state.window.shifted(ell)
    mat = displacement_matrix((ell, phi), state.window, target)
    out = CylState(mat @ state.amplitudes, target)
    if window is None:
        return out
    win = as_window(window)
    if not win.contains(target):
        if not auto_pad:
            raise WindowOverflowError(f"displaced support {target} leaves window {win}")
        win = win.union(target)
    return out.padded(win)


def parity_reflect(x):
    """``P = sum_l |l><-l|``: ``l -> -l`` for states, ``rho[l, l'] -> rho[-l, -l']``."""
    win = Window(-x.window.hi, -x.window.lo)
    if isinstance(x, CylState):
        return CylState(x.amplitudes[::-1], win)
    if isinstance(x, CylDensity):
        return CylDensity(x.matrix[::-1, ::-1], win, check=False)
    raise TypeError(f"cannot reflect {type(x).__name__}")


def density_from_pure(state: CylState) -> CylDensity:
    psi = state.amplitudes
    return CylDensity(np.outer(psi, psi.conj()), state.window, check=state.is_normalized())


def trace_product(a: CylDensity, b: CylDensity) -> complex:
    win = a.window.union(b.window)
    return complex(np.sum(embed(a.matrix, a.window, win) * embed(b.matrix, b.window, win).T))
