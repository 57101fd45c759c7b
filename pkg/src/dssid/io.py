"""CSV and JSON readers/writers for time series, frequency responses and results.

Floats go out with 17 significant digits so every double survives a round
trip.  Writes are atomic: temp file in the target directory, then rename.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .dss import DssState, StaticCurve
from .errors import ValidationError
from .harmonic import FrequencyResponsePoint
from .model import Nonlinearity, PlantModel
from .sim import TimeSeries

TS_HEADER = ["t", "u", "x"]
FR_HEADER = ["omega", "gain_re", "gain_im", "amplitude", "phase"]
CURVE_HEADER = ["x", "u", "source"]


def fmt(v: float) -> str:
    return format(float(v), ".17g")


def atomic_write(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _read_rows(path, header) -> list[list[str]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != header:
        raise ValidationError(f"{path}: expected header {','.join(header)!r}")
    return rows[1:]


def _floats(path, rows, ncols) -> np.ndarray:
    try:
        data = np.array([[float(v) for v in r[:ncols]] for r in rows], dtype=float)
    except (ValueError, IndexError) as exc:
        raise ValidationError(f"{path}: malformed numeric row ({exc})") from exc
    if data.size == 0:
        raise ValidationError(f"{path}: no data rows")
    return data.reshape(-1, ncols)


# --- time series ---------------------------------------------------------------------


def write_timeseries(path, u: TimeSeries, x: TimeSeries) -> None:
    u.check_grid(x)
    rows = ((fmt(t), fmt(a), fmt(b)) for t, a, b in zip(u.t, u.values, x.values))
    atomic_write(path, _csv_text(TS_HEADER, rows))


def read_timeseries(path) -> tuple[TimeSeries, TimeSeries]:
    data = _floats(path, _read_rows(path, TS_HEADER), 3)
    t = data[:, 0]
    if t.size < 2:
        raise ValidationError(f"{path}: need at least two samples")
    dt = t[1] - t[0]
    if not dt > 0 or np.max(np.abs(np.diff(t) - dt)) > 1e-9 * max(dt, abs(t[-1])):
        raise ValidationError(f"{path}: samples are not uniformly spaced")
    return TimeSeries(t[0], dt, data[:, 1]), TimeSeries(t[0], dt, data[:, 2])


# --- frequency response ------------------------------------------------------------


def write_freqresp(path, points) -> None:
    rows = (
        (fmt(p.omega), fmt(p.gain.real), fmt(p.gain.imag), fmt(p.amplitude), fmt(p.phase)) for p in points
    )
    atomic_write(path, _csv_text(FR_HEADER, rows))


def read_freqresp(path) -> list[FrequencyResponsePoint]:
    data = _floats(path, _read_rows(path, FR_HEADER), 5)
    return [FrequencyResponsePoint(w, complex(re, im)) for w, re, im, *_ in data]


# --- static curve ------------------------------------------------------------------


def write_curve(path, curve: StaticCurve) -> None:
    rows = ((fmt(x), fmt(u), curve.source) for x, u in curve.points)
    atomic_write(path, _csv_text(CURVE_HEADER, rows))


def read_curve(path) -> StaticCurve:
    rows = _read_rows(path, CURVE_HEADER)
    data = _floats(path, rows, 2)
    sources = {r[2] for r in rows}
    if len(sources) != 1:
        raise ValidationError(f"{path}: mixed curve sources {sorted(sources)}")
    return StaticCurve(tuple(map(tuple, data.tolist())), sources.pop())


# --- models ------------------------------------------------------------------------


def model_dict(plant: PlantModel, state: DssState | None = None) -> dict:
    out: dict = {"order": plant.order, "A": plant.linear.A, "B": plant.linear.B}
    if plant.order == 3:
        out["C"] = plant.linear.C
    out["f"] = {"family": plant.f.family, "coeffs": list(plant.f.coeffs), "x_max": plant.f.x_max}
    if state is not None:
        out["diagnostics"] = {
            "iterations": state.n,
            "residual": state.residual,
            "converged": state.converged,
        }
    return out


def write_json(path, obj) -> None:
    atomic_write(path, json.dumps(obj, indent=2) + "\n")


def plant_from_dict(d: dict) -> PlantModel:
    f = Nonlinearity(tuple(d["f"]["coeffs"]), x_max=d["f"].get("x_max", 1.0), family=d["f"].get("family", "ODD_POLY"))
    if d["order"] == 3:
        return PlantModel.third_order(d["A"], d["B"], d["C"], f)
    return PlantModel.second_order(d["A"], d["B"], f)


def read_model(path) -> PlantModel:
    with open(path) as fh:
        return plant_from_dict(json.load(fh))


def write_history(path, state: DssState) -> None:
    names = ["A", "B", "C"][: state.order]
    rows = ([str(h.n), *map(fmt, h.linear), fmt(h.residual)] for h in state.history)
    atomic_write(path, _csv_text(["n", *names, "residual"], rows))
