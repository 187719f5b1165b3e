"""Model adapters: the four fits (beat envelope, kick ratio, temperature, bimolecular decay)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import erf

from . import bath
from .fitting import FitConfig, FitProblem, FitResult, Parameter, least_squares
from .rotor import KickCalibration, RotorBasis, ld_amplitude_ratio

# ---------------------------------------------------------------- beat envelope


def beat_envelope_model(t_ps, p, offsets_thz):
    """|sum_k c_k exp(2 pi i d_k t)| exp(-t/tau); p = (tau_ns, c_1..c_K)."""
    tau, c = p[0], np.asarray(p[1:])
    phasor = np.exp(2j * np.pi * np.outer(t_ps, offsets_thz)) @ c
    return np.abs(phasor) * np.exp(-np.asarray(t_ps) / (tau * 1e3))


def beat_envelope_jacobian(t_ps, p, offsets_thz):
    tau, c = p[0], np.asarray(p[1:])
    t = np.asarray(t_ps, dtype=float)
    E = np.exp(2j * np.pi * np.outer(t, offsets_thz))
    S = E @ c
    mag = np.abs(S)
    decay = np.exp(-t / (tau * 1e3))
    J = np.empty((t.size, len(p)))
    J[:, 0] = mag * decay * t / (tau**2 * 1e3)
    safe = np.where(mag > 0, mag, 1.0)
    J[:, 1:] = (np.real(np.conj(S)[:, None] * E) / safe[:, None]) * decay[:, None]
    return J


def beat_trace_model(t_ps, p, frequencies_thz):
    """Decaying beat trace sum_k c_k cos(2 pi nu_k t) exp(-t/tau)."""
    tau, c = p[0], np.asarray(p[1:])
    return (np.cos(2 * np.pi * np.outer(t_ps, frequencies_thz)) @ c) * np.exp(-np.asarray(t_ps) / (tau * 1e3))


@dataclass
class SpinBeatFit:
    tau_ns: float
    tau_err_ns: float
    weights: np.ndarray
    linewidth_ghz: float
    result: FitResult


def fit_spin_beating(
    times_ps,
    amplitudes,
    frequencies_thz: Sequence[float],
    tau0_ns: float = 1.0,
    tau_bounds: tuple[float, float] = (0.05, 50.0),
    weight_bound: float = 10.0,
    sigma=None,
    config: FitConfig = FitConfig(restarts=16, seed=0),
) -> SpinBeatFit:
    """Fit the decaying fine-structure beat envelope of a coarse amplitude series.

    Weights are determined up to an overall sign; the result is returned with
    the largest weight positive.  The linewidth is 1/(pi tau).
    """
    t = np.asarray(times_ps, dtype=float)
    y = np.asarray(amplitudes, dtype=float)
    nu = np.asarray(frequencies_thz, dtype=float)
    offsets = nu - nu.mean()
    flags = []
    if np.ptp(y) <= 1e-12 * max(np.max(np.abs(y)), 1e-300):
        flags.append("non-identifiable: constant amplitude series")
    scale = float(np.max(np.abs(y))) or 1.0
    params = [Parameter("tau_ns", tau0_ns, *tau_bounds)]
    params += [
        Parameter(f"c{k + 1}", 1.0 / len(nu), -weight_bound, weight_bound) for k in range(len(nu))
    ]
    problem = FitProblem(
        model=lambda x, p: beat_envelope_model(x, p, offsets) * scale,
        jacobian=lambda x, p: beat_envelope_jacobian(x, p, offsets) * scale,
        x=t,
        y=y,
        parameters=params,
        sigma=sigma,
        name="spin-beat",
    )
    res = least_squares(problem, config)
    res.flags.extend(flags)
    c = res.values[1:] * scale
    if c[np.argmax(np.abs(c))] < 0:
        c = -c
    tau = res["tau_ns"]
    return SpinBeatFit(tau, res.sigma("tau_ns"), c, 1.0 / (math.pi * tau), res)


# ---------------------------------------------------------------- temperature


TEMPERATURE_MODELS = ("equilibrium", "literal", "integrated")


def temperature_model(table: bath.BathTable, model: str, t_ps: float):
    """Forward model LD(T) for p = (sigma_A2, w_nm, ld0)."""

    def f(T, p):
        sigma, w, ld0 = p
        if model == "equilibrium":
            return bath.ld_equilibrium(table, T, t_ps, sigma, ld0)
        return bath.ld_nonequilibrium(table, T, t_ps, sigma, w, ld0, variant=model)

    return f


def temperature_jacobian(table: bath.BathTable, model: str, t_ps: float):
    def jac(T, p):
        sigma, w, ld0 = p
        props = table.interpolate(T)
        ld = temperature_model(table, model, t_ps)(T, p)
        X = -np.log(ld / ld0)
        J = np.zeros((np.size(T), 3))
        J[:, 0] = -ld * X / sigma
        J[:, 2] = ld / ld0
        if model == "literal":
            travel = props.u2_mps * t_ps * 1e-3
            J[:, 1] = -ld * X * 2 * travel**2 / w**3
        elif model == "integrated":
            a = props.u2_mps * 1e-3 / w
            at = a * t_ps
            g = np.where(at > 1e-6, 0.5 * math.sqrt(math.pi) * erf(at) / np.where(a > 0, a, 1), t_ps)
            dg_da = np.where(
                at > 1e-6,
                (t_ps * np.exp(-(at**2)) - g) / np.where(a > 0, a, 1),
                -2 * a * t_ps**3 / 3,
            )
            dX_dg = X / g
            J[:, 1] = -ld * dX_dg * dg_da * (-a / w)
        return J

    return jac


@dataclass
class TemperatureFit:
    model: str
    sigma_A2: float
    w_nm: float | None
    ld0: float
    result: FitResult
    gamma_T: np.ndarray = field(default_factory=lambda: np.array([]))
    gamma_ghz: np.ndarray = field(default_factory=lambda: np.array([]))


def fit_temperature(
    T,
    ld,
    t_ps: float = 850.0,
    model: str = "literal",
    table: bath.BathTable | None = None,
    fit_ld0: bool = False,
    ld0: float = 1.0,
    sigma0_A2: float = 0.01,
    w0_nm: float = 30.0,
    sigma=None,
    config: FitConfig = FitConfig(restarts=8, seed=0),
    curve_points: int = 200,
) -> TemperatureFit:
    """Fit LD(T) at a fixed delay with the equilibrium or a non-equilibrium model.

    The reported decoherence rate curve is gamma_eq(T) for the equilibrium
    model and the instantaneous n_neq sigma u1 at ``t_ps`` otherwise.
    """
    if model not in TEMPERATURE_MODELS:
        raise ValueError(f"unknown model {model!r}; expected one of {TEMPERATURE_MODELS}")
    if t_ps <= 0:
        raise ValueError("t_fixed must be positive")
    table = table or bath.default_table()
    T = np.asarray(T, dtype=float)
    table.interpolate(T)  # range check
    params = [
        Parameter("sigma_A2", sigma0_A2, 1e-6, 10.0),
        Parameter("w_nm", w0_nm, 0.5, 1e4, fixed=(model == "equilibrium")),
        Parameter("ld0", ld0, 1e-6, 1e6, fixed=not fit_ld0),
    ]
    problem = FitProblem(
        model=temperature_model(table, model, t_ps),
        jacobian=temperature_jacobian(table, model, t_ps),
        x=T,
        y=ld,
        parameters=params,
        sigma=sigma,
        name=f"temperature-{model}",
    )
    res = least_squares(problem, config)
    lo, hi = table.T_range
    Tg = np.linspace(max(lo, T.min()), min(hi, T.max()), curve_points)
    if model == "equilibrium":
        gam = bath.gamma_equilibrium(table, Tg, res["sigma_A2"])
        w = None
    else:
        gam = bath.gamma_nonequilibrium(table, Tg, t_ps, res["sigma_A2"], res["w_nm"])
        w = res["w_nm"]
    return TemperatureFit(model, res["sigma_A2"], w, res["ld0"], res, Tg, gam)


# ---------------------------------------------------------------- kick ratio


def kick_ratio_model(basis: RotorBasis):
    """Ratio model for p = (p3, f5, P_per_uJ) with p5 = f5 * p3."""

    def f(E, p):
        p3, f5, k = p
        p5 = f5 * p3
        mix = {1: 1.0 - p3 - p5, 3: p3, 5: p5}
        return ld_amplitude_ratio(E, mix, KickCalibration(k), basis)

    return f


@dataclass
class KickRatioFit:
    p3: float
    p5: float
    P_per_uJ: float
    p3_err: float
    p5_err: float
    result: FitResult


def fit_kick_ratio(
    energies_uJ,
    ratios,
    p3_0: float = 0.01,
    f5_0: float = 0.1,
    scale0: float | None = None,
    fit_scale: bool = True,
    basis: RotorBasis = RotorBasis(n_max=15),
    sigma=None,
    config: FitConfig = FitConfig(restarts=4, seed=0),
    p3_max: float = 0.5,
) -> KickRatioFit:
    """Fit prior N=3 and N=5 populations (and the energy->P scale) to LD_35/LD_13 vs energy.

    p5 is parameterized as a fraction of p3, so 0 <= p5 <= p3 holds by construction.
    """
    E = np.asarray(energies_uJ, dtype=float)
    if E.size < 4:
        raise ValueError("need at least four energy points")
    if scale0 is None:
        from .rotor import default_calibration

        scale0 = default_calibration().P_per_uJ
    params = [
        Parameter("p3", p3_0, 0.0, p3_max),
        Parameter("f5", f5_0, 0.0, 1.0),
        Parameter("P_per_uJ", scale0, 0.05, 5.0, fixed=not fit_scale),
    ]
    problem = FitProblem(
        model=kick_ratio_model(basis), x=E, y=ratios, parameters=params, sigma=sigma, name="kick-ratio"
    )
    res = least_squares(problem, config)
    p3, f5 = res["p3"], res["f5"]
    cov = res.covariance
    # p5 = f5 p3, first-order error propagation
    grad = np.array([f5, p3, 0.0])
    var5 = float(grad @ cov @ grad) if np.all(np.isfinite(cov)) else np.nan
    rel = [res.sigma(n) / max(abs(res[n]), 1e-12) for n in ("p3",)]
    if any(r > 1.0 for r in rel) and not any(f.startswith("non-identifiable") for f in res.flags):
        res.flags.append("weakly identified: relative uncertainty of p3 above 100%")
    return KickRatioFit(p3, f5 * p3, res["P_per_uJ"], res.sigma("p3"), math.sqrt(max(var5, 0.0)), res)


# ---------------------------------------------------------------- bimolecular decay


def bimolecular_model(table: bath.BathTable, t_delay_s: float, K_ref: float, T_ref: float):
    """Intensity model for p = (N0 in 1e13 cm^-3, scale)."""

    def f(T, p):
        n0, s = p
        params = bath.AnnihilationParams(n0 * 1e13, K_ref, T_ref)
        return s * bath.bimolecular_density(table, t_delay_s, T, params) / 1e13

    return f


def bimolecular_jacobian(table: bath.BathTable, t_delay_s: float, K_ref: float, T_ref: float):
    def jac(T, p):
        n0, s = p
        K = bath.annihilation_rate(table, T, bath.AnnihilationParams(1.0, K_ref, T_ref))
        x = K * 1e13 * t_delay_s
        denom = 1.0 + x * n0
        J = np.empty((np.size(T), 2))
        J[:, 0] = s / denom**2
        J[:, 1] = n0 / denom
        return J

    return jac


@dataclass
class BimolecularFit:
    N0_cm3: float
    N0_err_cm3: float
    scale: float
    result: FitResult


def fit_bimolecular(
    T,
    intensity,
    t_delay_ms: float = 1.0,
    K_ref_cm3_s: float = 5e-11,
    T_ref_K: float = 1.5,
    table: bath.BathTable | None = None,
    fit_scale: bool = False,
    N0_guess_cm3: float = 1e13,
    sigma=None,
    config: FitConfig = FitConfig(restarts=2, seed=0),
) -> BimolecularFit:
    """Fit N0 to intensity(T) = scale * N(t_delay; T) / 1e13 (intensity in units of 1e13 cm^-3)."""
    table = table or bath.default_table()
    T = np.asarray(T, dtype=float)
    table.interpolate(T)
    t_s = t_delay_ms * 1e-3
    params = [
        Parameter("N0_1e13", N0_guess_cm3 / 1e13, 1e-4, 1e4),
        Parameter("scale", 1.0, 1e-9, 1e9, fixed=not fit_scale),
    ]
    problem = FitProblem(
        model=bimolecular_model(table, t_s, K_ref_cm3_s, T_ref_K),
        jacobian=bimolecular_jacobian(table, t_s, K_ref_cm3_s, T_ref_K),
        x=T,
        y=intensity,
        parameters=params,
        sigma=sigma,
        name="bimolecular",
    )
    res = least_squares(problem, config)
    return BimolecularFit(res["N0_1e13"] * 1e13, res.sigma("N0_1e13") * 1e13, res["scale"], res)
