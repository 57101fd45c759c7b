"""Identification of quasilinear plants ``A x'' + B x' + f(x) = u``.

Harmonic analysis and least-squares fits give the linear part; the DSS
iteration recovers the static characteristic ``f`` from short tests by
correcting the measured response with the model's own simulated dynamics.
"""

from .dss import DssConfig, DssState, StaticCurve, dss_init, dss_run, dss_run_third_order, dss_step, lissajous_baseline
from .fit import FitWindow, fit_linear_freq, fit_monotone, fit_time_domain, minimize, refit_AB
from .harmonic import AnalysisWindow, eval_transfer, measured_gain, settle_window, sweep_frequency_response
from .model import LinearParams, Nonlinearity, PlantModel, check_stability
from .sim import SignalSpec, SimOptions, TimeSeries, generate_signal, simulate

__version__ = "0.1.0"

__all__ = [
    "AnalysisWindow",
    "DssConfig",
    "DssState",
    "FitWindow",
    "LinearParams",
    "Nonlinearity",
    "PlantModel",
    "SignalSpec",
    "SimOptions",
    "StaticCurve",
    "TimeSeries",
    "check_stability",
    "dss_init",
    "dss_run",
    "dss_run_third_order",
    "dss_step",
    "eval_transfer",
    "fit_linear_freq",
    "fit_monotone",
    "fit_time_domain",
    "generate_signal",
    "lissajous_baseline",
    "measured_gain",
    "minimize",
    "refit_AB",
    "settle_window",
    "simulate",
    "sweep_frequency_response",
]
