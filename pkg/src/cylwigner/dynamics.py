"""Quantum pendulum ``H = L^2/2 + (lam/2)(E + E^dag)`` in phase space.

Three integrators:

* :func:`evolve_schrodinger`: dense ``expm(-i H dt)`` on the l window, the
  reference everything else is checked against;
* :func:`evolve_wigner_transport`: the exact phase-space equation

      dW/dt = -x dW/dphi - lam sin(phi) [W(x + 1/2, phi) - W(x - 1/2, phi)]

  stepped with RK4 on the half-integer lattice ``x`` (see
  :class:`~cylwigner.star_moyal.HalfLattice`), where the half shifts are exact;
* :func:`evolve_semiclassical`: the first-order truncation, i.e. transport of
  W along the classical flow ``phi' = l``, ``l' = lam sin(phi)``.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm

from .cyl_core import AngleGrid, CylState, Window, WindowLike, as_window, density_from_pure
from .star_moyal import HalfLattice
from .wigner_map import (
    TWO_PI,
    NumericalValidationError,
    WignerGrid,
    density_from_wigner,
    modes_from_samples,
    samples_from_modes,
    sinc,
    wigner_grid,
)

__all__ = [
    "BoundaryLeakError",
    "StepSizeError",
    "PendulumConfig",
    "Trajectory",
    "Snapshot",
    "hamiltonian_matrix",
    "hamiltonian_symbol",
    "classical_energy",
    "evolve_schrodinger",
    "transport_generator",
    "evolve_wigner_transport",
    "classical_trajectory",
    "evolve_semiclassical",
    "run",
    "snapshots_to_csv",
    "snapshots_from_csv",
]

LEAK_TOL = 1e-8
CONSERVATION_TOL = 1e-10
DRIFT_TOL = 1e-8
METHODS = ("schrodinger", "wigner_exact", "semiclassical")
CONVENTIONS = ("calibrated", "printed")


class BoundaryLeakError(ArithmeticError):
    """Population reached the edge of the l window."""


class StepSizeError(ValueError):
    """Time step too large for the integrator (CFL bound or energy drift)."""


@dataclass(frozen=True)
class PendulumConfig:
    lam: float
    window: Window | None = None
    dt: float = 1e-3
    t_final: float = 1.0
    method: str = "schrodinger"
    save_every: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t_final < 0:
            raise ValueError(f"t_final must be non-negative, got {self.t_final}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.window is not None:
            object.__setattr__(self, "window", as_window(self.window))

    @property
    def n_steps(self) -> int:
        n = int(round(self.t_final / self.dt))
        if not math.isclose(n * self.dt, self.t_final, rel_tol=1e-9, abs_tol=1e-12):
            raise ValueError(f"t_final = {self.t_final} is not a multiple of dt = {self.dt}")
        return n


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    ell: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        phi = np.angle(np.exp(1j * np.asarray(self.phi, dtype=float)))
        phi = np.where(phi == -math.pi, math.pi, phi)
        object.__setattr__(self, "phi", phi)


@dataclass(frozen=True)
class Snapshot:
    t: float
    grid: WignerGrid


def _window_for(obj, config: PendulumConfig) -> Window:
    win = obj.window if hasattr(obj, "window") else obj.ell_window
    if config.window is None:
        return win
    if not config.window.contains(win):
        raise ValueError(f"config window {config.window} does not cover the state window {win}")
    return config.window


def hamiltonian_matrix(config: PendulumConfig, window: WindowLike | None = None) -> np.ndarray:
    """Tridiagonal: ``l^2/2`` on the diagonal, ``lam/2`` on both off-diagonals."""
    win = as_window(window if window is not None else config.window)
    ells = win.ells.astype(float)
    off = np.full(win.size - 1, 0.5 * config.lam)
    return np.diag(0.5 * ells ** 2) + np.diag(off, 1) + np.diag(off, -1)


def hamiltonian_symbol(ell, phi, lam: float):
    """``h(l, phi) = (l^2/2 + lam cos(phi)) / (2 pi)``."""
    ell = np.asarray(ell, dtype=float)
    return (0.5 * ell ** 2 + lam * np.cos(phi)) / TWO_PI


def classical_energy(ell, phi, lam: float, convention: str = "calibrated"):
    """Conserved quantity of the classical flow: ``l^2/2 + c lam cos(phi)``, ``c = 1`` or ``2``."""
    c = 1.0 if convention == "calibrated" else 2.0
    return 0.5 * np.asarray(ell) ** 2 + c * lam * np.cos(phi)


# ---------------------------------------------------------------------------
# Schroedinger reference
# ---------------------------------------------------------------------------

def _edge_population(vec: np.ndarray) -> float:
    return float(max(abs(vec[0]) ** 2, abs(vec[-1]) ** 2))


def evolve_schrodinger(
    state: CylState,
    config: PendulumConfig,
    *,
    callback: Callable[[int, CylState], None] | None = None,
) -> CylState:
    """Evolve ``psi`` by repeated application of ``expm(-i H dt)``.

    Norm and energy are checked against their initial values after the run;
    any drift above 1e-10 raises :class:`NumericalValidationError`.
    """
    win = _window_for(state, config)
    psi = state.padded(win).amplitudes.copy()
    H = hamiltonian_matrix(config, win)
    U = expm(-1j * H * config.dt)
    norm0 = float(np.vdot(psi, psi).real)
    e0 = float(np.vdot(psi, H @ psi).real)
    # at lam = 0 H is diagonal and the window is invariant: nothing can leak
    monitor = config.lam != 0
    if monitor and _edge_population(psi) > LEAK_TOL:
        raise BoundaryLeakError(f"initial edge population {_edge_population(psi):.2e} exceeds {LEAK_TOL}")
    for step in range(1, config.n_steps + 1):
        psi = U @ psi
        edge = _edge_population(psi)
        if monitor and edge > LEAK_TOL:
            raise BoundaryLeakError(
                f"edge population {edge:.2e} at t = {step * config.dt:.6g}; widen the window"
            )
        if callback is not None:
            callback(step, CylState(psi, win))
    norm = float(np.vdot(psi, psi).real)
    energy = float(np.vdot(psi, H @ psi).real)
    if abs(norm - norm0) > CONSERVATION_TOL:
        raise NumericalValidationError(f"norm drifted by {norm - norm0:.2e}")
    if abs(energy - e0) > CONSERVATION_TOL * max(1.0, abs(e0)):
        raise NumericalValidationError(f"energy drifted by {energy - e0:.2e}")
    return CylState(psi, win)


# ---------------------------------------------------------------------------
# exact phase-space transport
# ---------------------------------------------------------------------------

def transport_generator(lattice: HalfLattice, lam: float) -> Callable[[np.ndarray], np.ndarray]:
    """Right-hand side of the transport equation on lattice mode values.

    In modes, ``-x dW/dphi -> -i k x c_k`` and
    ``-lam sin(phi) [W(x+1/2) - W(x-1/2)]`` couples ``k +- 1`` at ``x +- 1/2``.
    """
    xk = lattice.xs[:, None] * lattice.ks[None, :]
    mask = HalfLattice.valid_mask(lattice.window)

    def shift_x(v, h):
        out = np.zeros_like(v)
        if h > 0:
            out[:-h] = v[h:]
        else:
            out[-h:] = v[:h]
        return out

    sk = HalfLattice.shift_k

    def rhs(v: np.ndarray) -> np.ndarray:
        up, down = shift_x(v, 1), shift_x(v, -1)
        diff = up - down                                  # W(x+1/2) - W(x-1/2)
        # sin(phi) f -> (f e^{i phi} - f e^{-i phi}) / 2i
        sin_term = (sk(diff, 1) - sk(diff, -1)) / 2j
        return (-1j * xk * v - lam * sin_term) * mask

    return rhs


def _spectral_radius(lattice: HalfLattice, lam: float) -> float:
    mask = HalfLattice.valid_mask(lattice.window)
    xk = np.abs(lattice.xs[:, None] * lattice.ks[None, :])
    return float(np.max(xk[mask])) + 2 * abs(lam)


def _rk4(rhs, v, dt):
    k1 = rhs(v)
    k2 = rhs(v + 0.5 * dt * k1)
    k3 = rhs(v + 0.5 * dt * k2)
    k4 = rhs(v + dt * k3)
    return v + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _lattice_to_grid(lat: HalfLattice, like: WignerGrid) -> WignerGrid:
    modes = lat.to_modes(like.ells)
    vals = samples_from_modes(modes, like.angle_grid)
    resid = float(np.max(np.abs(vals.imag)))
    if resid > 1e-10:
        raise NumericalValidationError(f"transported W has imaginary residue {resid:.3e}")
    return WignerGrid(vals.real, like.ell_window, like.angle_grid)


def _edge_weight(lat: HalfLattice) -> float:
    mat = lat.to_matrix()
    return float(max(abs(mat[0, 0]), abs(mat[-1, -1])))


def _lift(initial, config: PendulumConfig, angle_grid: AngleGrid | None):
    """Half-integer lattice of the initial W and the grid to sample results on."""
    if isinstance(initial, WignerGrid):
        win = _window_for(initial, config)
        like = initial if win == initial.ell_window else _pad_grid(initial, win)
        if angle_grid is not None:
            like = WignerGrid(np.zeros((win.size, angle_grid.n_phi)), win, angle_grid)
        mat = density_from_wigner(initial, check=False).padded(win).matrix
    else:
        rho = density_from_pure(initial) if isinstance(initial, CylState) else initial
        win = _window_for(rho, config)
        mat = rho.padded(win).matrix
        grid = angle_grid if angle_grid is not None else AngleGrid(max(64, 4 * win.size))
        like = WignerGrid(np.zeros((win.size, grid.n_phi)), win, grid)
    return HalfLattice.from_matrix(mat, win), like


def evolve_wigner_transport(
    initial,
    config: PendulumConfig,
    *,
    angle_grid: AngleGrid | None = None,
    callback: Callable[[int, WignerGrid], None] | None = None,
) -> WignerGrid:
    """RK4 integration of the exact Wigner transport equation.

    ``initial`` is a :class:`WignerGrid` (lifted to the half-integer lattice
    by exact inversion) or a state/density (lifted directly). Results are
    sampled on the initial grid, or on ``angle_grid`` when given. Steps with
    ``spectral radius * dt > 1`` are rejected. ``callback(step, grid)`` is
    called for step 0 and after every step.
    """
    lat, like = _lift(initial, config, angle_grid)
    radius = _spectral_radius(lat, config.lam)
    if radius * config.dt > 1.0:
        raise StepSizeError(
            f"spectral radius {radius:.4g} x dt {config.dt:.3g} > 1; use dt <= {1.0 / radius:.3g}"
        )
    rhs = transport_generator(lat, config.lam)
    v = lat.vals
    norm0 = v[:, lat.K].sum()
    if callback is not None:
        callback(0, _lattice_to_grid(lat, like))
    for step in range(1, config.n_steps + 1):
        v = _rk4(rhs, v, config.dt)
        cur = lat.copy_with(v)
        if config.lam != 0 and _edge_weight(cur) > LEAK_TOL:
            raise BoundaryLeakError(f"edge population reached {_edge_weight(cur):.2e} at t = {step * config.dt:.6g}")
        if callback is not None:
            callback(step, _lattice_to_grid(cur, like))
    drift = abs(v[:, lat.K].sum() - norm0) * TWO_PI
    if drift > DRIFT_TOL * max(1.0, config.t_final):
        raise NumericalValidationError(f"normalisation drifted by {drift:.2e}")
    return _lattice_to_grid(lat.copy_with(v), like)


def _pad_grid(grid: WignerGrid, win: Window) -> WignerGrid:
    rho = density_from_wigner(grid, check=False)
    return wigner_grid(rho.padded(win), win, grid.angle_grid)


# ---------------------------------------------------------------------------
# classical flow and semiclassical transport
# ---------------------------------------------------------------------------

def _flow(convention: str, lam: float):
    if convention == "calibrated":
        return lambda ell, phi: (lam * np.sin(phi), ell)
    if convention == "printed":
        return lambda ell, phi: (-2 * lam * np.sin(phi), -ell)
    raise ValueError(f"unknown convention {convention!r}; expected one of {CONVENTIONS}")


def _integrate_flow(ell, phi, lam, dt, n_steps, convention, save=None):
    """RK4 for the characteristic equations, vectorised over starting points.

    Returns final ``(ell, phi)`` and, if ``save`` is set, the states every
    ``save`` steps. ``dt`` may be negative for backward integration.
    """
    f = _flow(convention, lam)
    ell = np.array(ell, dtype=float)
    phi = np.array(phi, dtype=float)
    e0 = classical_energy(ell, phi, lam, convention)
    out = [(ell.copy(), phi.copy())] if save else None
    for step in range(1, n_steps + 1):
        a1, b1 = f(ell, phi)
        a2, b2 = f(ell + 0.5 * dt * a1, phi + 0.5 * dt * b1)
        a3, b3 = f(ell + 0.5 * dt * a2, phi + 0.5 * dt * b2)
        a4, b4 = f(ell + dt * a3, phi + dt * b3)
        ell = ell + dt / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
        phi = phi + dt / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
        if save and step % save == 0:
            out.append((ell.copy(), phi.copy()))
    t = abs(dt) * n_steps
    drift = float(np.max(np.abs(classical_energy(ell, phi, lam, convention) - e0), initial=0.0))
    if t > 0 and drift / max(t, 1.0) > DRIFT_TOL:
        raise StepSizeError(f"classical energy drift {drift:.2e} over t = {t:.4g}; reduce dt")
    return ell, phi, out


def classical_trajectory(
    ell0: float,
    phi0: float,
    config: PendulumConfig,
    *,
    convention: str = "calibrated",
    save_every: int = 1,
) -> Trajectory:
    """Classical pendulum orbit from ``(l0, phi0)``.

    ``convention="calibrated"``: ``phi' = l``, ``l' = lam sin(phi)``, the flow
    generated by the symbol ``l^2/2 + lam cos(phi)``.
    ``convention="printed"``: ``phi' = -l``, ``l' = -2 lam sin(phi)``.
    """
    n = config.n_steps
    _, _, saved = _integrate_flow(ell0, phi0, config.lam, config.dt, n, convention, save=save_every)
    times = config.dt * save_every * np.arange(len(saved))
    return Trajectory(times, np.array([s[0] for s in saved]), np.array([s[1] for s in saved]))


def _continuous_lattice(vals: np.ndarray, xs: np.ndarray, ks: np.ndarray, x, phi) -> np.ndarray:
    """``W_lat(x, phi)`` at arbitrary points: per-mode Shannon continuation from its own lattice."""
    x = np.asarray(x, dtype=float)
    phi = np.asarray(phi, dtype=float)
    out = np.zeros(x.shape, dtype=complex)
    xi = np.rint(2 * xs).astype(int)
    for j, k in enumerate(ks):
        col = vals[:, j]
        sel = (xi - k) % 2 == 0
        nodes, v = xs[sel], col[sel]
        if not np.any(v):
            continue
        c = sinc(x[..., None] - nodes) @ v
        out += c * np.exp(1j * k * phi)
    return out


def evolve_semiclassical(
    grid: WignerGrid,
    config: PendulumConfig,
    *,
    convention: str = "calibrated",
    n_phi: int | None = None,
) -> WignerGrid:
    """Transport W along classical characteristics: ``W(z, t) = W0(Phi_{-t}(z))``.

    Characteristics are traced back from every half-integer lattice point
    ``x`` and angle node, the initial W is evaluated there through its
    band-limited continuation, and the result is re-projected onto lattice
    modes before sampling at integer l. Exact for ``lam = 0``; for
    ``lam != 0`` the neglected terms are third order in the l shift and the
    error falls as ``|l0|`` grows.
    """
    win = _window_for(grid, config)
    if win != grid.ell_window:
        grid = _pad_grid(grid, win)
    rho = density_from_wigner(grid, check=False)
    lat = HalfLattice.from_matrix(rho.matrix, win)
    K = lat.K
    fine = AngleGrid(n_phi if n_phi is not None else 4 * K + 4)
    X, P = np.meshgrid(lat.xs, fine.points, indexing="ij")
    x0, p0, _ = _integrate_flow(X, P, config.lam, -config.dt, config.n_steps, convention)
    w0 = _continuous_lattice(lat.vals, lat.xs, lat.ks, x0, p0)
    modes = modes_from_samples(w0, fine, K)
    return _lattice_to_grid(lat.copy_with(modes), grid)


# ---------------------------------------------------------------------------
# driver and snapshot I/O
# ---------------------------------------------------------------------------

def run(initial, config: PendulumConfig, angle_grid: AngleGrid | None = None) -> list[Snapshot]:
    """Evolve ``initial`` (state or density) with ``config.method``; snapshots every ``save_every`` steps.

    The first snapshot is ``t = 0``; the last is ``t_final``.
    """
    rho = density_from_pure(initial) if isinstance(initial, CylState) else initial
    win = _window_for(rho, config)
    rho = rho.padded(win)
    grid0 = wigner_grid(rho, win, angle_grid)
    every = config.save_every or config.n_steps or 1
    snaps = [Snapshot(0.0, grid0)]

    def keep(step, grid):
        if step % every == 0 or step == config.n_steps:
            snaps.append(Snapshot(step * config.dt, grid))

    if config.method == "schrodinger":
        if not isinstance(initial, CylState):
            raise ValueError("schrodinger method needs a pure state")
        def on_step(step, st):
            if step % every == 0 or step == config.n_steps:
                keep(step, wigner_grid(st, win, grid0.angle_grid))

        evolve_schrodinger(initial.padded(win), config, callback=on_step)
    elif config.method == "wigner_exact":
        snaps.clear()
        evolve_wigner_transport(rho, config, angle_grid=grid0.angle_grid, callback=keep)
    else:
        for step in sorted({*range(every, config.n_steps + 1, every), config.n_steps} - {0}):
            sub = PendulumConfig(config.lam, win, config.dt, step * config.dt, config.method)
            snaps.append(Snapshot(step * config.dt, evolve_semiclassical(grid0, sub)))
    return snaps


def snapshots_to_csv(snaps: Sequence[Snapshot]) -> str:
    buf = io.StringIO()
    buf.write("t,ell,phi,w\n")
    for s in snaps:
        for i, ell in enumerate(s.grid.ells):
            for j, phi in enumerate(s.grid.phis):
                buf.write(f"{s.t:.12g},{ell},{phi:.12g},{s.grid.values[i, j]:.12g}\n")
    return buf.getvalue()


def snapshots_from_csv(text: str) -> list[Snapshot]:
    lines = text.strip().splitlines()
    if lines[0].strip() != "t,ell,phi,w":
        raise ValueError(f"unexpected header {lines[0]!r}")
    rows = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]])
    out = []
    for t in dict.fromkeys(rows[:, 0]):
        block = rows[rows[:, 0] == t]
        body = "ell,phi,w\n" + "\n".join(f"{int(r[1])},{float(r[2])!r},{float(r[3])!r}" for r in block)
        out.append(Snapshot(float(t), WignerGrid.from_csv(body)))
    return out
