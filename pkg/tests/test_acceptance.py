"""End-to-end acceptance checks against synthetic ground-truth plants.

Run with ``pytest tests/test_acceptance.py -s`` to see one line per criterion
as it finishes; the same lines are repeated in the terminal summary.
"""

import json
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from conftest import BATTERY, TRUTH, cached_experiment, freq_points, identification_record, report
from dssid.dss import (
    DssConfig,
    DssState,
    curve_sup_error,
    dss_init,
    dss_run,
    dss_run_third_order,
    dss_step,
    function_sup_error,
    identification_signal,
    lissajous_baseline,
    static_curve,
)
from dssid.fit import fit_linear_freq
from dssid.harmonic import FrequencyResponsePoint, eval_transfer, sweep_frequency_response
from dssid.model import LinearParams, Nonlinearity, PlantModel
from dssid.sim import HARMONIC, SignalSpec, SimOptions, generate_signal, simulate

CONFIG = DssConfig(x_max=1.0)


def rel(a, b):
    return float(np.max(np.abs(np.asarray(a, float) - b) / np.abs(b)))


def test_criterion_1_frequency_analysis():
    plant = PlantModel.second_order(1.0, 2.0, 1.0)
    omegas = np.geomspace(0.1, 10.0, 24)
    start = time.perf_counter()
    points = sweep_frequency_response(plant, omegas, SimOptions(0.01, 1.0))
    elapsed = time.perf_counter() - start
    worst = max(abs(p.gain - eval_transfer(plant.linear, p.omega)) / abs(eval_transfer(plant.linear, p.omega)) for p in points)
    ok = worst <= 1e-3 and elapsed < 10
    report(1, "frequency-analysis exactness", ok, f"max rel gain error {worst:.2e} (tol 1e-3), {elapsed:.2f}s (limit 10s)")


def test_criterion_2_linear_frequency_fit():
    truth = np.array([1.0, 2.0, 1.0])
    lin = LinearParams(*truth)
    start = time.perf_counter()
    exact = {}
    for n, omegas in ((2, [0.5, 2.0]), (3, [0.5, 1.0, 2.0]), (8, np.geomspace(0.2, 5.0, 8))):
        p = fit_linear_freq([FrequencyResponsePoint(w, eval_transfer(lin, w)) for w in omegas])
        exact[n] = rel(p.as_tuple(), truth)
    omegas = np.geomspace(0.2, 5.0, 8)
    gains = np.array([eval_transfer(lin, w) for w in omegas])
    noisy = []
    for seed in range(100):
        rng = np.random.default_rng(seed)
        xi = (rng.standard_normal(8) + 1j * rng.standard_normal(8)) / math.sqrt(2)
        p = fit_linear_freq([FrequencyResponsePoint(w, g) for w, g in zip(omegas, gains * (1 + 0.01 * xi))])
        noisy.append(rel(p.as_tuple(), truth))
    elapsed = time.perf_counter() - start
    med = float(np.median(noisy))
    ok = max(exact.values()) <= 1e-6 and med <= 0.05 and elapsed < 5
    detail = ", ".join(f"N={n} err {e:.1e}" for n, e in exact.items())
    report(2, "frequency-fit recovery", ok, f"{detail} (tol 1e-6); noisy median {med:.2%} (tol 5%); {elapsed:.2f}s")


def test_criterion_3_dss_noiseless():
    plant, u, x, pts = cached_experiment(0)
    start = time.perf_counter()
    ident, curve, state = dss_run(u, x, pts, CONFIG)
    elapsed = time.perf_counter() - start
    e_ab = rel((state.A, state.B), (1.0, 2.0))
    e_curve = curve_sup_error(curve, plant.f)
    e_f = function_sup_error(ident.f, plant.f)
    ok = state.converged and state.n <= 10 and e_ab <= 0.02 and max(e_curve, e_f) <= 0.02 and elapsed < 30
    report(
        3,
        "DSS noiseless recovery",
        ok,
        f"converged={state.converged} n={state.n} (<=10), A/B err {e_ab:.1e} (tol 2%), "
        f"curve sup err {e_curve:.1e}, f sup err {e_f:.1e} (tol 2% FS), {elapsed:.1f}s",
    )


@pytest.mark.slow
def test_criterion_4_noise_robustness():
    ab, static, curve_err = [], [], []
    for seed in range(20):
        u, x = identification_record(TRUTH, noise_sigma=0.01, seed=seed)
        pts = freq_points(TRUTH, noise_sigma=0.01, seed=1000 + seed)
        ident, curve, state = dss_run(u, x, pts, CONFIG)
        ab.append(rel((state.A, state.B), (1.0, 2.0)))
        static.append(function_sup_error(ident.f, TRUTH.f))
        curve_err.append(curve_sup_error(curve, TRUTH.f))
    m_ab, m_s, m_c = (float(np.median(v)) for v in (ab, static, curve_err))
    ok = m_ab <= 0.05 and max(m_s, m_c) <= 0.05
    report(4, "DSS noise robustness", ok, f"20 seeds, median A/B err {m_ab:.2%}, median static sup err {m_s:.2%} FS, curve {m_c:.2%} FS (tol 5%)")


def test_criterion_5_first_step_low_frequency():
    errors = []
    for i, plant in enumerate(BATTERY):
        wn = plant.natural_frequency
        omega = wn / 100
        period = 2 * math.pi / omega
        dt = period / 4000
        spec = SignalSpec(HARMONIC, amplitude=float(plant.f(1.0)), frequency=omega / (2 * math.pi))
        opts = SimOptions(dt, period)
        u, x = generate_signal(spec, opts), simulate(plant, spec, opts)
        cfg = DssConfig(x_max=1.0, substeps=opts.substeps(plant))
        s1 = dss_step(dss_init(u, x, cached_experiment(i)[3], cfg), u, x, cfg)
        errors.append(curve_sup_error(static_curve(s1, u, x), plant.f))
    worst = max(errors)
    report(5, "first-step adequacy at w_nat/100", worst <= 0.05, "n=1 curve sup err per plant " + ", ".join(f"{e:.1e}" for e in errors) + " (tol 5% FS)")


def test_criterion_6_beats_lissajous():
    rows = []
    for i, plant in enumerate(BATTERY):
        wn = plant.natural_frequency
        period = 2 * math.pi / wn
        spec = SignalSpec(HARMONIC, amplitude=float(plant.f(1.0)), frequency=wn / (2 * math.pi))
        opts = SimOptions(period / 1000, 2 * period)
        u, x = generate_signal(spec, opts), simulate(plant, spec, opts)
        cfg = DssConfig(x_max=1.0, substeps=opts.substeps(plant))
        _, curve, _ = dss_run(u, x, cached_experiment(i)[3], cfg)
        rows.append((curve_sup_error(curve, plant.f), curve_sup_error(lissajous_baseline((u, x)), plant.f)))
    ok = all(d < l for d, l in rows)
    report(6, "DSS beats Lissajous on 2-period tests", ok, "; ".join(f"dss {d:.3f} vs liss {l:.3f}" for d, l in rows))


def test_criterion_7_fixed_point_and_descent():
    moves, descent = [], []
    for i in range(len(BATTERY)):
        plant, u, x, pts = cached_experiment(i)
        at_truth = DssState(0, plant.coeffs, plant.f, 0.0)
        nxt = dss_step(at_truth, u, x, CONFIG)
        moves.append(max(rel(nxt.linear, plant.coeffs), function_sup_error(nxt.f, plant.f)))
        _, _, state = dss_run(u, x, pts, CONFIG)
        res = [h.residual for h in state.history]
        descent.append(state.converged and all(b < a for a, b in zip(res, res[1:])))
    ok = max(moves) < 1e-3 and all(descent)
    report(
        7,
        "fixed point and residual descent",
        ok,
        f"max move at truth {max(moves):.1e} (tol 1e-3); strictly decreasing+converged {sum(descent)}/{len(descent)}",
    )


def test_criterion_8_third_order():
    plant = PlantModel.third_order(0.1, 1.0, 2.0, Nonlinearity((1.0, 0.1)))
    start = time.perf_counter()
    u, x = identification_record(plant)
    pts = sweep_frequency_response(plant, [0.3, 1.0, 3.0], SimOptions(0.01, 1.0), amplitude=0.5)
    ident, curve, state = dss_run_third_order(u, x, DssConfig(order=3, x_max=1.0), pts)
    elapsed = time.perf_counter() - start
    e_p = rel(state.linear, (0.1, 1.0, 2.0))
    e_s = max(curve_sup_error(curve, plant.f), function_sup_error(ident.f, plant.f))
    ok = e_p <= 0.05 and e_s <= 0.03 and elapsed < 60
    report(8, "third-order recovery", ok, f"converged={state.converged} n={state.n}, param err {e_p:.1e} (tol 5%), static sup err {e_s:.1e} (tol 3% FS), {elapsed:.1f}s")


def _cli(*args):
    return subprocess.run([sys.executable, "-m", "dssid.cli", *map(str, args)], capture_output=True, text=True)


@pytest.mark.slow
def test_criterion_9_cli_determinism(tmp_path):
    cfg = json.loads(open("configs/demo_dss.json").read())
    cfg["sim"]["noise_sigma"] = 0.01
    cfg_path = tmp_path / "noisy.json"
    cfg_path.write_text(json.dumps(cfg))
    outputs = {}
    for run in ("a", "b"):
        d = tmp_path / run
        for cmd, out in (("simulate", d / "series.csv"), ("freqresp", d / "response.csv"), ("lissajous", d / "curve.csv"), ("dss", d / "dss")):
            proc = _cli(cmd, "--config", cfg_path, "--out", out)
            assert proc.returncode == 0, proc.stderr
        outputs[run] = {p.relative_to(d): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}
    same = outputs["a"] == outputs["b"] and len(outputs["a"]) == 7
    report(9, "CLI determinism", same, f"{len(outputs['a'])} files compared across two invocations, identical={same}")
