"""Command-line entry point.

Usage::

    cavsim <subcommand> [--flag value ...] [--config FILE] [-o OUTPUT]

Settings resolve as built-in defaults, then ``--config`` file, then flags.
Rates and times are in natural units (kappa = 1) except for ``budget``,
which takes rate/2pi in MHz. Every output is comma-separated text with
``#`` provenance comments; the ``argv`` comment reproduces the run.

Exit status: 0 success, 2 usage error, 3 numerical failure, 4 settle window
exceeded.
"""

from __future__ import annotations

import argparse
import logging
import math
import shlex
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import experiments as ex
from .errors import (
    CavsimError,
    InvalidArgumentError,
    NumericalFailure,
    SettleWindowExceeded,
    UsageError,
)
from .params import LOSS_MODELS, AtomLabel, CavityParams
from .protocols import (
    PHI_AI,
    PhotonQubit,
    cpf_atom_photon,
    cpf_photon_photon,
    conditional_fidelity,
    gate_phase_table,
    product_state,
    qnd_parity,
    qnd_photon_number,
    qnd_total_number,
)
from .pulse import PulseSpec, make_gaussian_pulse, pulse_grid
from .scattering import reflect
from .spectral import rcoeff_table, reflect_spectral
from .tables import SweepTable, rows_table

log = logging.getLogger("cavsim")

SUBCOMMANDS = (
    "reflect", "rcoeff", "gate", "qnd", "parity",
    "fig2a", "fig2b", "fig2c", "stability", "budget", "converge",
)
EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_SETTLE = 0, 2, 3, 4

# subcommands whose natural pulse duration differs from 240/kappa
DEFAULT_T = {"fig2a": 120.0, "fig2c": 120.0, "budget": 120.0}


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    g: float = 3.0
    gamma: float = 1.0
    delta: float = 0.0
    kappa: float = 1.0
    T: float | None = None
    loss_model: str = "standard_decay"
    solver: str = "time"
    atom: int = 1
    mode: str = "ideal"
    input: str | None = None
    total: bool = False
    output: str = "-"
    dt: float | None = None
    settle: float = 15.0
    T_list: str | None = None
    g_list: str | None = None
    levels: int = 3
    omega_min: float = -5.0
    omega_max: float = 5.0
    n_omega: int = 201
    kappa_mhz: float = 8.0
    gamma_mhz: float = 5.2
    g_mhz: float = 25.0

    @property
    def params(self) -> CavityParams:
        return CavityParams(
            g=self.g, gamma_s=self.gamma, delta=self.delta, kappa=self.kappa, loss_model=self.loss_model
        )

    @property
    def duration(self) -> float:
        return self.T if self.T is not None else DEFAULT_T.get(self.subcommand, 240.0)

    def to_argv(self) -> list:
        """Flags that reproduce this config through :func:`parse_args`."""
        argv = [self.subcommand]
        for f in fields(self):
            if f.name == "subcommand":
                continue
            value = getattr(self, f.name)
            if value is None:
                continue
            flag = _FLAG_OF[f.name]
            if isinstance(value, bool):
                argv.append(flag if value else f"--no-{flag[2:]}")
            elif isinstance(value, float):
                argv += [flag, repr(value)]
            else:
                argv += [flag, str(value)]
        return argv


def _nonneg_float(text):
    v = _float(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be nonnegative, got {text!r}")
    return v


def _pos_float(text):
    v = _float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text!r}")
    return v


def _float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed number {text!r}")
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"must be finite, got {text!r}")
    return v


def _int(text):
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed integer {text!r}")


def _pos_int(text):
    v = _int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text!r}")
    return v


def _float_list(text):
    try:
        vals = [float(x) for x in str(text).replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed number list {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return " ".join(repr(v) for v in vals)


# dest -> (flag, type, choices)
_OPTIONS = {
    "g": ("--g", _nonneg_float, None),
    "gamma": ("--gamma", _nonneg_float, None),
    "delta": ("--delta", _float, None),
    "kappa": ("--kappa", _pos_float, None),
    "T": ("--T", _pos_float, None),
    "loss_model": ("--loss-model", str, LOSS_MODELS),
    "solver": ("--solver", str, ("time", "spectral", "both")),
    "atom": ("--atom", _int, (0, 1)),
    "mode": ("--mode", str, ("ideal", "simulated")),
    "input": ("--input", str, None),
    "output": ("--output", str, None),
    "dt": ("--dt", _pos_float, None),
    "settle": ("--settle", _pos_float, None),
    "T_list": ("--T-list", _float_list, None),
    "g_list": ("--g-list", _float_list, None),
    "levels": ("--levels", _pos_int, None),
    "omega_min": ("--omega-min", _float, None),
    "omega_max": ("--omega-max", _float, None),
    "n_omega": ("--n-omega", _pos_int, None),
    "kappa_mhz": ("--kappa-mhz", _pos_float, None),
    "gamma_mhz": ("--gamma-mhz", _nonneg_float, None),
    "g_mhz": ("--g-mhz", _nonneg_float, None),
}
_FLAG_OF = {k: v[0] for k, v in _OPTIONS.items()} | {"total": "--total"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cavsim", description=__doc__.split("\n\n")[0],
                argument_default=argparse.SUPPRESS)
    p.add_argument("subcommand", help=", ".join(SUBCOMMANDS))
    p.add_argument("--config", help="flat 'key = value' file; flags override it")
    for dest, (flag, typ, choices) in _OPTIONS.items():
        names = [flag, "-o"] if dest == "output" else [flag]
        p.add_argument(*names, dest=dest, type=typ, choices=choices)
    p.add_argument("--total", dest="total", action=argparse.BooleanOptionalAction,
                   help="qnd: measure total photon number (double bounce with flip)")
    return p


def read_config(path) -> dict:
    """Parse a flat ``key = value`` file (``#`` comments) into typed settings."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path!r}: {exc.strerror}")
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        value = value.strip()
        if not sep or not key:
            raise UsageError(f"{path}:{n}: expected 'key = value', got {raw.strip()!r}")
        if key == "total":
            if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise UsageError(f"{path}:{n}: bad boolean {value!r} for 'total'")
            out[key] = value.lower() in ("true", "1", "yes")
            continue
        if key not in _OPTIONS:
            raise UsageError(f"{path}:{n}: unknown key {key!r}")
        _, typ, choices = _OPTIONS[key]
        try:
            v = typ(value)
        except argparse.ArgumentTypeError as exc:
            raise UsageError(f"{path}:{n}: {key}: {exc}")
        if choices is not None and v not in choices:
            raise UsageError(f"{path}:{n}: {key} must be one of {choices}, got {value!r}")
        out[key] = v
    return out


def parse_args(argv) -> RunConfig:
    ns = vars(build_parser().parse_args(list(argv)))
    sub = ns.pop("subcommand")
    if sub not in SUBCOMMANDS:
        raise UsageError(f"unknown subcommand {sub!r} (choose from {', '.join(SUBCOMMANDS)})")
    settings = {}
    if "config" in ns:
        settings.update(read_config(ns.pop("config")))
    settings.update(ns)
    if settings.get("output", "-") == "":
        raise UsageError("output path must be nonempty")
    return RunConfig(subcommand=sub, **settings)


def _shape(cfg: RunConfig, params_list):
    T = cfg.duration
    if cfg.dt is not None:
        grid = pulse_grid(T, cfg.dt, cfg.settle)
    else:
        grid = ex.default_grid(T, params_list, cfg.settle)
    return make_gaussian_pulse(PulseSpec(T), grid)


_PHOTON = {"h": PhotonQubit.h, "v": PhotonQubit.v, "d": PhotonQubit.diagonal, "vac": PhotonQubit.vacuum}


def _photons(spec: str | None, shape, allow_vac=False):
    if not spec:
        raise UsageError("--input is required for this subcommand")
    if allow_vac and spec == "vac":
        return [PhotonQubit.vacuum(shape)]
    if any(ch not in "hvd" for ch in spec):
        raise UsageError(f"--input must use the letters h, v, d; got {spec!r}")
    return [_PHOTON[ch](shape) for ch in spec]


def _run_reflect(cfg):
    p = cfg.params
    f = _shape(cfg, p)
    atom = AtomLabel(cfg.atom)
    cols = {"t": f.grid.centers}
    summary = {}
    solvers = ("time", "spectral") if cfg.solver == "both" else (cfg.solver,)
    for s in solvers:
        r = reflect(f, atom, p) if s == "time" else reflect_spectral(f, atom, p)
        suffix = "" if s == solvers[0] else "_spectral"
        cols["re" + suffix] = r.out.samples.real
        cols["im" + suffix] = r.out.samples.imag
        summary.update({
            f"{s}.loss_prob": r.loss_prob,
            f"{s}.residual_excitation": r.residual_excitation,
            f"{s}.conditional_phase": r.conditional_phase,
            f"{s}.overlap_abs": abs(r.overlap),
        })
    return SweepTable("reflect", cols, ex._provenance(p, f.grid, T=cfg.duration), summary)


def _run_rcoeff(cfg):
    w = np.linspace(cfg.omega_min, cfg.omega_max, cfg.n_omega)
    return SweepTable("rcoeff", rcoeff_table(w, AtomLabel(cfg.atom), cfg.params),
                      ex._provenance(cfg.params, atom=cfg.atom))


def _run_gate(cfg):
    solver = _solver_single(cfg)
    p = cfg.params
    shape = _shape(cfg, p)
    photons = _photons(cfg.input or "hh", shape)
    if len(photons) not in (1, 2):
        raise UsageError("gate --input takes one (atom-photon) or two (photon-photon) letters")
    psi = product_state(PHI_AI, photons)
    if len(photons) == 1:
        actual = cpf_atom_photon(psi, 0, p, cfg.mode, solver)
        ideal = cpf_atom_photon(psi, 0, mode="ideal")
        report = conditional_fidelity(actual, ideal, reference=psi)
    else:
        actual, report = cpf_photon_photon(psi, p, cfg.mode, solver=solver)
    rows = [(k, v) for k, v in report.rows() if not k.startswith("phase_")]
    rows.append(("process_fidelity", report.process_fidelity))
    phases = gate_phase_table(shape, len(photons), p, cfg.mode, solver)
    rows += [(f"phase_{k}", v) for k, v in phases.items()]
    rows.append(("bookkeeping_error", actual.bookkeeping_error()))
    return rows_table("gate", rows, ex._provenance(p, shape.grid, T=cfg.duration))


def _run_qnd(cfg):
    p = cfg.params
    shape = _shape(cfg, p)
    photons = _photons(cfg.input or "h", shape, allow_vac=True)
    if len(photons) != 1:
        raise UsageError("qnd --input takes a single letter (h, v, d) or 'vac'")
    fn = qnd_total_number if cfg.total else qnd_photon_number
    res = fn(photons[0], p, cfg.mode, _solver_single(cfg))
    if cfg.total:
        rows = [("P_n0", res.probabilities[0]), ("P_n1", res.probabilities[1])]
    else:
        rows = [("P_0", res.probabilities["0"]), ("P_1", res.probabilities["1"])]
    rows.append(("lost", res.lost))
    return rows_table("qnd", rows, ex._provenance(p, shape.grid, T=cfg.duration))


def _run_parity(cfg):
    p = cfg.params
    shape = _shape(cfg, p)
    res = qnd_parity(_photons(cfg.input or "hh", shape), p, cfg.mode, _solver_single(cfg))
    rows = [("P_even", res.probabilities["even"]), ("P_odd", res.probabilities["odd"]), ("lost", res.lost)]
    return rows_table("parity", rows, ex._provenance(p, shape.grid, T=cfg.duration))


def _solver_single(cfg):
    if cfg.solver == "both":
        raise UsageError(f"--solver both is not available for {cfg.subcommand}")
    return cfg.solver


def _floats(text):
    return [float(x) for x in text.split()]


def _run_fig2a(cfg):
    return ex.fig2a_shapes(cfg.params, cfg.duration, _solver_single(cfg))


def _run_fig2b(cfg):
    T_list = _floats(cfg.T_list) if cfg.T_list else ex.FIG2B_T
    return ex.fig2b_fidelity_vs_T(T_list, cfg.params, _solver_single(cfg))


def _run_fig2c(cfg):
    g_list = _floats(cfg.g_list) if cfg.g_list else None
    table, _ = ex.fig2c_loss_vs_g(g_list, cfg.gamma, cfg.delta, cfg.duration, cfg.loss_model, cfg.settle)
    return table


def _run_stability(cfg):
    g_list = _floats(cfg.g_list) if cfg.g_list else None
    return ex.phase_shape_stability(g_list, cfg.gamma, cfg.delta, cfg.duration, _solver_single(cfg))


def _run_budget(cfg):
    return ex.leakage_budget(cfg.kappa_mhz, cfg.gamma_mhz, cfg.g_mhz, cfg.duration)


def _run_converge(cfg):
    if cfg.levels < 2:
        raise UsageError("--levels must be >= 2")
    return ex.convergence_study(cfg.params, cfg.duration, cfg.levels)


_DISPATCH = {
    "reflect": _run_reflect, "rcoeff": _run_rcoeff, "gate": _run_gate, "qnd": _run_qnd,
    "parity": _run_parity, "fig2a": _run_fig2a, "fig2b": _run_fig2b, "fig2c": _run_fig2c,
    "stability": _run_stability, "budget": _run_budget, "converge": _run_converge,
}


def execute(cfg: RunConfig) -> SweepTable:
    """Run a config and return its table with the ``argv`` provenance attached."""
    table = _DISPATCH[cfg.subcommand](cfg)
    table.params = {"argv": shlex.join(cfg.to_argv()), **table.params}
    return table


def run(cfg: RunConfig) -> int:
    try:
        table = execute(cfg)
    except UsageError as exc:
        print(f"cavsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SettleWindowExceeded as exc:
        print(f"cavsim: settle window exceeded: {exc}", file=sys.stderr)
        return EXIT_SETTLE
    except NumericalFailure as exc:
        print(f"cavsim: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InvalidArgumentError, CavsimError) as exc:
        print(f"cavsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        table.write(cfg.output)
    except OSError as exc:
        print(f"cavsim: cannot write {cfg.output!r}: {exc.strerror}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s")
    try:
        cfg = parse_args(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        print(f"cavsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return run(cfg)


if __name__ == "__main__":
    raise SystemExit(main())
