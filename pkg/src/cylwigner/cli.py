"""Command-line driver: ``cylwigner {wigner,evolve,tomo,selftest}``.

Settings come from built-in defaults, then an optional ``key = value`` file
(``--config``), then flags. Keys are the long flag names with dashes turned
into underscores (``--state-file`` -> ``state_file``; ``--lambda`` -> ``lambda``).
A ``command`` key in the file selects the subcommand when none is given.

Exit codes: 0 ok, 1 selftest failure, 2 configuration error,
3 numerical-validation failure, 4 tomographic coverage error.
Set ``CYLWIGNER_THREADS`` to thread the Wigner grid evaluation.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
from pathlib import Path

import numpy as np

from .cyl_core import AngleGrid, CylState, Window, momentum_eigenstate, superposition
from .dynamics import METHODS, PendulumConfig, StepSizeError, run, snapshots_to_csv
from .special_fn import coherent_state
from .tomography import (
    CoverageError,
    density_from_char,
    reconstruct_char,
    simulate_tomograms,
    wigner_from_char,
)
from .wigner_map import marginal_angle, wigner_grid

__all__ = ["main", "ConfigError", "load_config", "build_state"]

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC, EXIT_COVERAGE = 0, 1, 2, 3, 4
COMMANDS = ("wigner", "evolve", "tomo", "selftest")
STATE_KINDS = ("eigenstate", "coherent", "superposition", "file")


class ConfigError(ValueError):
    pass


def _bool(s) -> bool:
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _opt_int(s):
    return None if s is None or str(s).strip().lower() in ("", "none") else int(s)


def _choice(options):
    def conv(s):
        if s not in options:
            raise ValueError(f"{s!r} not in {options}")
        return s
    return conv


# key -> (converter, default)
SCHEMA = {
    "state": (_choice(STATE_KINDS), "coherent"),
    "l0": (int, 0),
    "phi0": (float, 0.0),
    "l1": (int, 0),
    "l2": (int, 1),
    "theta": (float, 0.0),
    "state_file": (str, None),
    "lmin": (_opt_int, None),
    "lmax": (_opt_int, None),
    "nphi": (_opt_int, None),
    "out": (str, "."),
    "format": (_choice(("csv", "json")), "csv"),
    "seed": (int, 0),
    "lambda": (float, 0.0),
    "t": (float, 1.0),
    "dt": (float, 1e-3),
    "method": (_choice(METHODS), "wigner_exact"),
    "save_every": (int, 0),
    "shots": (_opt_int, None),
    "roundtrip": (_bool, False),
}


def load_config(path: str | os.PathLike) -> dict:
    """Parse a flat ``key = value`` file (``#`` comments) into a dict of strings."""
    text = Path(path).read_text()
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        cp.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    raw = {k.replace("-", "_"): v for k, v in cp["run"].items()}
    unknown = set(raw) - set(SCHEMA) - {"command"}
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    return raw


def _resolve(file_cfg: dict, flags: dict) -> dict:
    cfg = {k: default for k, (_, default) in SCHEMA.items()}
    for src in (file_cfg, flags):
        for k, v in src.items():
            if k == "command":
                continue
            conv = SCHEMA[k][0]
            try:
                cfg[k] = conv(v) if v is not None else None
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {k}: {exc}") from None
    return cfg


def _read_state_file(path: str) -> CylState:
    """CSV ``ell,re,im`` or JSON ``{"ell": [...], "re": [...], "im": [...]}``."""
    p = Path(path)
    text = p.read_text()
    if p.suffix == ".json":
        obj = json.loads(text)
        ells, re_, im_ = obj["ell"], obj["re"], obj["im"]
    else:
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        if lines[0].replace(" ", "") != "ell,re,im":
            raise ConfigError(f"{path}: expected header 'ell,re,im'")
        rows = [ln.split(",") for ln in lines[1:]]
        ells = [int(r[0]) for r in rows]
        re_ = [float(r[1]) for r in rows]
        im_ = [float(r[2]) for r in rows]
    state = CylState.from_dict({l: complex(a, b) for l, a, b in zip(ells, re_, im_)})
    if abs(state.norm() - 1.0) > 1e-6:
        raise ConfigError(f"{path}: state norm {state.norm():.8f} is not 1")
    return state.normalized()


def build_state(cfg: dict) -> CylState:
    kind = cfg["state"]
    if kind == "eigenstate":
        state = momentum_eigenstate(cfg["l0"])
    elif kind == "coherent":
        state = coherent_state(cfg["l0"], cfg["phi0"])
    elif kind == "superposition":
        state = superposition(cfg["l1"], cfg["l2"], cfg["theta"])
    else:
        if not cfg["state_file"]:
            raise ConfigError("state = file needs state_file")
        state = _read_state_file(cfg["state_file"])
    lo = state.window.lo if cfg["lmin"] is None else cfg["lmin"]
    hi = state.window.hi if cfg["lmax"] is None else cfg["lmax"]
    win = Window(lo, hi)
    if not win.contains(state.window):
        raise ConfigError(f"window {win} does not cover the state support {state.window}")
    return state.padded(win)


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _outdir(cfg) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str) -> None:
    path.write_text(text)
    print(f"wrote {path}")


def _pairs_csv(header: str, xs, ys, int_x: bool = False) -> str:
    fmt = "{:d},{:.12g}" if int_x else "{:.12g},{:.12g}"
    return "\n".join([header] + [fmt.format(x, y) for x, y in zip(xs, ys)]) + "\n"


def _report_grid(grid) -> None:
    vals = grid.values
    print(f"min W = {vals.min():.12g}  max W = {vals.max():.12g}")
    neg = np.argwhere(vals < -1e-12)
    if neg.size == 0:
        print("no negative cells")
        return
    ells = sorted({int(grid.ells[i]) for i, _ in neg})
    phis = np.abs(grid.phis[neg[:, 1]])
    print(f"negative cells: {len(neg)} at ell in {ells}, |phi| in [{phis.min():.4f}, {phis.max():.4f}]")
    i, j = np.unravel_index(np.argmin(vals), vals.shape)
    print(f"most negative at ell = {grid.ells[i]}, phi = {grid.phis[j]:.6f}")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_wigner(cfg: dict) -> int:
    state = build_state(cfg)
    grid = wigner_grid(state, None, AngleGrid(cfg["nphi"] or 128))
    out = _outdir(cfg)
    if cfg["format"] == "json":
        _write(out / "wigner.json", grid.to_json() + "\n")
    else:
        _write(out / "wigner.csv", grid.to_csv())
    _write(out / "marginal_ell.csv", _pairs_csv("ell,p", grid.ells, grid.momentum_marginal(), int_x=True))
    _write(out / "marginal_phi.csv", _pairs_csv("phi,p", grid.phis, marginal_angle(grid)))
    _report_grid(grid)
    return EXIT_OK


def cmd_evolve(cfg: dict) -> int:
    state = build_state(cfg)
    pc = PendulumConfig(cfg["lambda"], state.window, cfg["dt"], cfg["t"], cfg["method"], cfg["save_every"])
    snaps = run(state, pc, AngleGrid(cfg["nphi"] or 128))
    out = _outdir(cfg)
    if cfg["format"] == "json":
        obj = {"snapshots": [{"t": float(f"{s.t:.12g}"), "grid": json.loads(s.grid.to_json())} for s in snaps]}
        _write(out / "evolve.json", json.dumps(obj) + "\n")
    else:
        _write(out / "evolve.csv", snapshots_to_csv(snaps))
    first, last = snaps[0].grid, snaps[-1].grid
    print(f"snapshots: {len(snaps)}  t_final = {snaps[-1].t:.12g}")
    print(f"normalisation {last.normalization():.12g}  max |W(t) - W(0)| = {np.max(np.abs(last.values - first.values)):.3e}")
    return EXIT_OK


def cmd_tomo(cfg: dict) -> int:
    state = build_state(cfg)
    nphi = cfg["nphi"] or 2 * state.window.size + 2
    tomos = simulate_tomograms(state, None, AngleGrid(nphi), shots=cfg["shots"], seed=cfg["seed"])
    coeffs = reconstruct_char(tomos)
    rec = wigner_from_char(coeffs)
    out = _outdir(cfg)
    _write(out / "tomograms.csv", tomos.to_csv())
    _write(out / "spectrum.csv", tomos.spectrum_to_csv())
    _write(out / "char.csv", coeffs.to_csv())
    if cfg["format"] == "json":
        _write(out / "wigner_reconstructed.json", rec.to_json() + "\n")
    else:
        _write(out / "wigner_reconstructed.csv", rec.to_csv())
    print(f"slices: {len(tomos.zeta_values)}  angles: {nphi}")
    if cfg["roundtrip"]:
        exact = wigner_grid(state, rec.ell_window, rec.angle_grid)
        rho = density_from_char(coeffs, check=cfg["shots"] is None)
        w_err = float(np.max(np.abs(rec.values - exact.values)))
        target = np.outer(state.amplitudes, state.amplitudes.conj())
        r_err = float(np.max(np.abs(rho.matrix - target)))
        print(f"max reconstruction error: wigner {w_err:.3e}  density {r_err:.3e}")
    return EXIT_OK


def cmd_selftest(cfg: dict) -> int:
    from .selftest import run_selftest, summary

    results = run_selftest(cfg["seed"])
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name} error={r.error:.3e} tol={r.tol:.0e}")
    rep = summary(results)
    print(json.dumps({"passed": rep["passed"], "failed": [c["name"] for c in rep["checks"] if not c["passed"]]}))
    return EXIT_OK if rep["passed"] else EXIT_FAIL


HANDLERS = {"wigner": cmd_wigner, "evolve": cmd_evolve, "tomo": cmd_tomo, "selftest": cmd_selftest}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    state = argparse.ArgumentParser(add_help=False, argument_default=S)
    g = state.add_argument_group("state")
    g.add_argument("--state", choices=STATE_KINDS)
    g.add_argument("--l0")
    g.add_argument("--phi0")
    g.add_argument("--l1")
    g.add_argument("--l2")
    g.add_argument("--theta")
    g.add_argument("--state-file", dest="state_file")
    g.add_argument("--lmin", help="lower edge of the l window (default: state support)")
    g.add_argument("--lmax", help="upper edge of the l window")
    o = state.add_argument_group("output")
    o.add_argument("--nphi", help="angle samples")
    o.add_argument("--out", help="output directory")
    o.add_argument("--format", choices=("csv", "json"))
    o.add_argument("--seed")

    p = argparse.ArgumentParser(prog="cylwigner", description="Wigner functions on the cylinder")
    p.add_argument("-c", "--config", help="key = value settings file; flags override it")
    sub = p.add_subparsers(dest="command")
    sub.add_parser("wigner", parents=[state], help="Wigner grid and marginals", argument_default=S)
    ev = sub.add_parser("evolve", parents=[state], help="pendulum dynamics", argument_default=S)
    ev.add_argument("--lambda", dest="lambda")
    ev.add_argument("--t")
    ev.add_argument("--dt")
    ev.add_argument("--method", choices=METHODS)
    ev.add_argument("--save-every", dest="save_every")
    tm = sub.add_parser("tomo", parents=[state], help="simulate and invert tomograms", argument_default=S)
    tm.add_argument("--shots", help="counts per slice (noiseless if unset)")
    tm.add_argument("--roundtrip", action="store_const", const="true", help="report reconstruction error")
    st = sub.add_parser("selftest", help="run the invariant suite", argument_default=S)
    st.add_argument("--seed")
    return p


def main(argv=None) -> int:
    parser = _parser()
    args = vars(parser.parse_args(argv))
    cfg_path = args.pop("config", None)
    command = args.pop("command", None)
    try:
        file_cfg = load_config(cfg_path) if cfg_path else {}
        command = command or file_cfg.get("command")
        if command not in COMMANDS:
            raise ConfigError(f"no command given (expected one of {COMMANDS})")
        cfg = _resolve(file_cfg, args)
        return HANDLERS[command](cfg)
    except CoverageError as exc:
        print(f"coverage error: {exc}", file=sys.stderr)
        return EXIT_COVERAGE
    except (ArithmeticError, StepSizeError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
