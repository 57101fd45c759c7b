"""Command-line experiment runner.

    dssid simulate   --config CFG --out series.csv
    dssid freqresp   --config CFG --out response.csv
    dssid fit-linear --config CFG --in response.csv --out params.json
    dssid dss        --config CFG --out results/ [--in series.csv]
    dssid lissajous  --config CFG --out curve.csv [--in series.csv]

Exit status: 0 on success, 1 on validation or I/O errors, 2 on numerical
failures.  Errors go to stderr.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import io
from .config import ExperimentConfig, load_config
from .dss import curve_sup_error, dss_run, function_sup_error, lissajous_baseline
from .errors import ConfigurationError, NumericalError, ValidationError
from .fit import fit_linear_freq, fit_linear_freq3
from .harmonic import sweep_frequency_response
from .sim import SimOptions, generate_signal, simulate

logger = logging.getLogger("dssid")


def _require(cfg: ExperimentConfig, *names: str) -> None:
    for name in names:
        if getattr(cfg, name) is None:
            raise ConfigurationError(f"config.{name}: required for this command")


def _measurement(cfg: ExperimentConfig, in_path: Path | None):
    """(u, x) from a time-series file (data mode) or a fresh simulation."""
    source = in_path or cfg.input
    if source is not None:
        if cfg.plant is not None and in_path is None:
            raise ConfigurationError("config: give either 'plant' or 'input', not both")
        return io.read_timeseries(source)
    if cfg.plant is None:
        raise ConfigurationError("config: needs 'plant' (synthetic mode) or 'input' / --in (data mode)")
    _require(cfg, "signal", "sim")
    u = generate_signal(cfg.signal, cfg.sim)
    x = simulate(cfg.plant, cfg.signal, cfg.sim)
    return u, x


def _sweep(cfg: ExperimentConfig):
    _require(cfg, "plant", "sim")
    if not cfg.frequencies:
        raise ConfigurationError("config.frequencies: at least one frequency is required")
    opts = replace(cfg.sim, seed=cfg.seed + 1)
    return sweep_frequency_response(cfg.plant, cfg.frequencies, opts, amplitude=cfg.sweep_amplitude)


def cmd_simulate(cfg: ExperimentConfig, args) -> None:
    _require(cfg, "plant", "signal", "sim")
    u, x = _measurement(cfg, None)
    io.write_timeseries(args.out, u, x)


def cmd_freqresp(cfg: ExperimentConfig, args) -> None:
    io.write_freqresp(args.out, _sweep(cfg))


def cmd_fit_linear(cfg: ExperimentConfig, args) -> None:
    source = args.inp or cfg.freqresp
    if source is None:
        raise ConfigurationError("fit-linear needs a frequency-response table via --in or config.freqresp")
    points = io.read_freqresp(source)
    if cfg.dss.order == 3:
        A, B, C, D = fit_linear_freq3(points)
        out = {"order": 3, "A": A, "B": B, "C": C, "D": D}
    else:
        p = fit_linear_freq(points)
        out = {"order": 2, "A": p.A, "B": p.B, "C": p.C}
    io.write_json(args.out, out)


def cmd_dss(cfg: ExperimentConfig, args) -> None:
    u, x = _measurement(cfg, args.inp)
    if cfg.freqresp is not None:
        points = io.read_freqresp(cfg.freqresp)
    elif cfg.dss.start is not None:
        points = None
    else:
        points = _sweep(cfg)
    plant, curve, state = dss_run(u, x, points, cfg.dss)
    out = Path(args.out)
    io.write_json(out / "model.json", io.model_dict(plant, state))
    io.write_curve(out / "static_curve.csv", curve)
    io.write_history(out / "history.csv", state)
    io.atomic_write(out / "report.txt", _report(cfg, plant, curve, state))


def _report(cfg, plant, curve, state) -> str:
    names = ["A", "B", "C"][: state.order]
    lines = [
        "DSS identification report",
        f"order: {plant.order}",
        f"iterations: {state.n}",
        f"converged: {state.converged}",
        f"residual: {io.fmt(state.residual)}",
    ]
    lines += [f"{n}: {io.fmt(v)}" for n, v in zip(names, state.linear)]
    lines.append("f coeffs: " + ", ".join(io.fmt(c) for c in plant.f.coeffs))
    lines.append(f"x_max: {io.fmt(plant.f.x_max)}")
    if cfg.plant is not None and cfg.plant.order == plant.order:
        truth = cfg.plant
        lines.append("truth comparison:")
        for n, est, ref in zip(names, state.linear, truth.coeffs):
            lines.append(f"  {n} relative error: {abs(est - ref) / abs(ref):.3e}")
        lines.append(f"  static curve sup error (FS): {curve_sup_error(curve, truth.f):.3e}")
        lines.append(f"  identified f sup error (FS): {function_sup_error(plant.f, truth.f):.3e}")
    lines.append("history (n, coefficients, residual):")
    for h in state.history:
        lines.append(f"  {h.n} " + " ".join(io.fmt(c) for c in h.linear) + f" {io.fmt(h.residual)}")
    return "\n".join(lines) + "\n"


def cmd_lissajous(cfg: ExperimentConfig, args) -> None:
    u, x = _measurement(cfg, args.inp)
    io.write_curve(args.out, lissajous_baseline((u, x)))


COMMANDS = {
    "simulate": cmd_simulate,
    "freqresp": cmd_freqresp,
    "fit-linear": cmd_fit_linear,
    "dss": cmd_dss,
    "lissajous": cmd_lissajous,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dssid", description="Quasilinear plant identification (DSS).")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, type=Path, help="experiment config (JSON)")
    parser.add_argument("--out", type=Path, help="output file (directory for 'dss')")
    parser.add_argument("--in", dest="inp", type=Path, help="input data file (data mode)")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    logging.getLogger("numba").setLevel(logging.WARNING)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
            if cfg.sim is not None:
                cfg.sim = replace(cfg.sim, seed=args.seed)
        if args.out is None:
            raise ConfigurationError("--out is required")
        COMMANDS[args.command](cfg, args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
