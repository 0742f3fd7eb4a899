"""Fast invariant checks behind ``cylwigner selftest``."""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .cyl_core import AngleGrid, CylState, Window, density_from_pure, displace, momentum_eigenstate, parity_reflect
from .dynamics import PendulumConfig, evolve_schrodinger, evolve_wigner_transport
from .special_fn import coherent_state, theta3_norm
from .star_moyal import moyal_bracket, star_product, symbol_of
from .tomography import reconstruct_char, simulate_tomograms, wigner_from_char
from .wigner_map import angle_density, density_from_wigner, marginal_angle, traciality, wigner_grid, wigner_point

__all__ = ["CheckResult", "CHECKS", "run_selftest", "summary"]


@dataclass
class CheckResult:
    name: str
    passed: bool
    error: float
    tol: float
    seconds: float


def _random_state(rng, d: int, lo: int) -> CylState:
    a = rng.normal(size=d) + 1j * rng.normal(size=d)
    return CylState(a / np.linalg.norm(a), Window(lo, lo + d - 1))


def _eigenstate(rng) -> float:
    grid = AngleGrid(64)
    w = wigner_grid(momentum_eigenstate(2), Window(-4, 6), grid)
    ref = np.zeros_like(w.values)
    ref[2 + 4] = 1 / (2 * math.pi)
    return float(np.max(np.abs(w.values - ref)))


def _coherent_marginal(rng) -> float:
    w = wigner_grid(coherent_state(0, 0.0), None, AngleGrid(80))
    return abs(w.momentum_marginal()[16] - 1 / theta3_norm())


def _marginals(rng) -> float:
    psi = _random_state(rng, 5, -2)
    grid = AngleGrid(32)
    w = wigner_grid(psi, None, grid)
    e1 = abs(w.normalization() - 1)
    e2 = np.max(np.abs(w.momentum_marginal() - np.abs(psi.amplitudes) ** 2))
    e3 = np.max(np.abs(marginal_angle(w) - angle_density(psi, grid.points)))
    return float(max(e1, e2, e3))


def _roundtrip(rng) -> float:
    rho = density_from_pure(_random_state(rng, 6, -1))
    back = density_from_wigner(wigner_grid(rho, None, AngleGrid(32)))
    return float(np.max(np.abs(back.matrix - rho.matrix)))


def _traciality(rng) -> float:
    rho = density_from_pure(_random_state(rng, 5, 0))
    return abs(traciality(rho, rho) - 1.0)


def _covariance(rng) -> float:
    psi = _random_state(rng, 4, 0)
    moved = displace(psi, (3, 0.7))
    mirrored = parity_reflect(psi)
    errs = []
    for ell in range(-3, 6):
        for phi in (-2.0, 0.3, 1.9):
            errs.append(abs(wigner_point(moved, ell + 3, phi + 0.7) - wigner_point(psi, ell, phi)))
        errs.append(abs(wigner_point(mirrored, -ell, -0.4) - wigner_point(psi, ell, 0.4)))
    return float(max(errs))


def _star(rng) -> float:
    win = Window(-2, 2)
    a = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    b = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    sa, sb = symbol_of(a, win), symbol_of(b, win)
    e1 = star_product(sa, sb).max_abs_diff(symbol_of(a @ b, win))
    e2 = moyal_bracket(sa, sb).max_abs_diff(symbol_of(-1j * (a @ b - b @ a), win))
    return max(e1, e2)


def _transport(rng) -> float:
    psi = coherent_state(0, 0.0)
    cfg = PendulumConfig(0.5, None, 1e-3, 0.1)
    grid = AngleGrid(72)
    exact = wigner_grid(evolve_schrodinger(psi, cfg), None, grid)
    moved = evolve_wigner_transport(wigner_grid(psi, None, grid), cfg)
    return float(np.max(np.abs(exact.values - moved.values)))


def _tomography(rng) -> float:
    rho = density_from_pure(_random_state(rng, 5, -2))
    coeffs = reconstruct_char(simulate_tomograms(rho))
    w = wigner_from_char(coeffs)
    return float(np.max(np.abs(w.values - wigner_grid(rho, w.ell_window, w.angle_grid).values)))


CHECKS: list[tuple[str, Callable, float]] = [
    ("eigenstate_wigner", _eigenstate, 1e-12),
    ("coherent_momentum_marginal", _coherent_marginal, 1e-9),
    ("normalization_and_marginals", _marginals, 1e-8),
    ("density_wigner_roundtrip", _roundtrip, 1e-8),
    ("traciality", _traciality, 1e-8),
    ("displacement_parity_covariance", _covariance, 1e-10),
    ("star_product_and_bracket", _star, 1e-8),
    ("transport_vs_schrodinger", _transport, 1e-4),
    ("tomography_roundtrip", _tomography, 1e-6),
]


def run_selftest(seed: int = 0) -> list[CheckResult]:
    """Run every check; an exception counts as a failure with infinite error."""
    out = []
    for name, fn, tol in CHECKS:
        rng = np.random.default_rng(seed)
        t0 = time.perf_counter()
        try:
            err = float(fn(rng))
        except Exception:  # reported, not raised: the summary must list every check
            err = math.inf
        out.append(CheckResult(name, err <= tol, err, tol, time.perf_counter() - t0))
    return out


def summary(results: list[CheckResult]) -> dict:
    return {
        "passed": all(r.passed for r in results),
        "checks": [{**asdict(r), "error": r.error if math.isfinite(r.error) else None} for r in results],
    }
