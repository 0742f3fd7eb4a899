"""Jacobi theta_3 and the theta-function coherent states of the cylinder."""

from __future__ import annotations

import math

import numpy as np

from .cyl_core import CylState, Window, WindowLike, as_window, displace

__all__ = [
    "DEFAULT_L_MAX",
    "theta3",
    "theta3_norm",
    "fiducial_state",
    "coherent_state",
]

DEFAULT_L_MAX = 16
SERIES_TOL = 1e-14


def theta3(z, q) -> complex:
    r"""Third Jacobi theta function in nome form.

    .. math:: \vartheta_3(z|q) = 1 + 2 \sum_{k \ge 1} q^{k^2} \cos(2 k z)

    Terms are added until ``|q|^{k^2} exp(2 k |Im z|)`` drops below 1e-14.
    No modular transformation is applied; for the nomes used on the cylinder
    (``|q| <= e^{-1/2}``) the plain series converges in a handful of terms.

    Parameters
    ----------
    z : complex
        Argument.
    q : complex
        Nome, ``|q| < 1``.
    """
    z = complex(z)
    q = complex(q)
    aq = abs(q)
    if aq >= 1.0:
        raise ValueError(f"theta3 needs |q| < 1, got |q| = {aq}")
    total = 1.0 + 0j
    if aq == 0.0:
        return total
    growth = abs(z.imag)
    log_q = math.log(aq)
    k = 1
    while True:
        bound = math.exp(k * k * log_q + 2 * k * growth)
        if bound < SERIES_TOL:
            break
        total += 2 * q ** (k * k) * np.cos(2 * k * z)
        k += 1
        if k > 10_000:
            raise RuntimeError("theta3 series failed to converge")
    return complex(total)


def theta3_norm() -> float:
    """``theta3(0 | 1/e) = sum_l exp(-l^2)``, the fiducial normalisation."""
    return theta3(0.0, math.exp(-1.0)).real


def fiducial_state(l_max: int = DEFAULT_L_MAX) -> CylState:
    """Fiducial vector ``Psi_0`` with ``<l|Psi_0> = exp(-l^2/2) / sqrt(theta3(0|1/e))``.

    These are the Fourier coefficients of
    ``(2 pi)^(-1/2) theta3(phi/2 | e^{-1/2}) / sqrt(theta3(0 | e^{-1}))``.
    """
    ells = np.arange(-l_max, l_max + 1)
    amps = np.exp(-0.5 * ells.astype(float) ** 2) / math.sqrt(theta3_norm())
    return CylState(amps, Window(-l_max, l_max))


def coherent_state(
    ell0: int,
    phi0: float,
    window: WindowLike | None = None,
    l_max: int = DEFAULT_L_MAX,
) -> CylState:
    """``|l0, phi0> = D(l0, phi0) |Psi_0>`` truncated to ``[l0 - l_max, l0 + l_max]``."""
    needed = Window(ell0 - l_max, ell0 + l_max)
    state = displace(fiducial_state(l_max), (ell0, phi0))
    if window is None:
        return state
    win = as_window(window)
    if not win.contains(needed):
        raise ValueError(f"window {win} does not cover coherent-state support {needed}")
    return state.padded(win)
