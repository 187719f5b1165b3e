"""Command implementations and the figure recipes built on them.

Every function here is a pure function of (RunConfig, input files, seed): it
writes its outputs under ``out_dir`` and returns an Outcome listing them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import bath, io
from .config import RunConfig
from .finestructure import SPLITTING_SCALE_GHZ, allowed_pairs, splitting_ghz
from .fits import (
    TEMPERATURE_MODELS,
    beat_envelope_model,
    bimolecular_model,
    fit_bimolecular,
    fit_kick_ratio,
    fit_spin_beating,
    fit_temperature,
    kick_ratio_model,
    temperature_model,
)
from .fitting import FitResult
from .rotor import (
    Ensemble,
    TruncationError,
    WavePacket,
    apply_impulsive_kick,
    ld_amplitude_ratio,
)
from .signal import (
    LDTrace,
    fourier_spectrum,
    line_components,
    scan_amplitudes,
    synthesize_ld,
    VibrationalBranch,
    uniform_grid,
)

KICK_HEADER = ("energy_uJ", "P", "pop_N1", "pop_N3", "pop_N5", "coh13_re", "coh13_im", "coh35_re", "coh35_im")
DATA_HEADERS = {
    "fig2a-ratio": ("energy_uJ", "ratio"),
    "fig2b-beat": ("t_ps", "amplitude"),
    "fig3-temperature": ("T_K", "ld"),
    "figS2b-bimolecular": ("T_K", "intensity"),
}


@dataclass
class Outcome:
    files: list[Path] = field(default_factory=list)
    converged: bool = True
    summary: dict = field(default_factory=dict)


def _meta(cfg: RunConfig, seed: int, **extra) -> dict[str, str]:
    return io.provenance(cfg.digest(), seed, **extra)


# ---------------------------------------------------------------- simulate-kick


def kick_rows(cfg: RunConfig, energies=None) -> list[tuple]:
    basis = cfg.rotor_basis()
    basis.require(1, 3, 5)
    cal = cfg.calibration()
    mixture = cfg.initial_mixture()
    energies = cfg.pulse.energies_uJ if energies is None else energies
    rows = []
    for E in energies:
        if E < 0:
            raise ValueError(f"kick energy must be non-negative, got {E}")
        P = float(cal.strength(E))
        ens = Ensemble.isotropic(basis, mixture).map(lambda psi: apply_impulsive_kick(psi, P))
        pops = ens.populations()
        c13, c35 = ens.coherence(1), ens.coherence(3)
        rows.append((float(E), P, pops[1], pops[3], pops[5], c13.real, c13.imag, c35.real, c35.imag))
    return rows


def cmd_simulate_kick(cfg: RunConfig, out_dir, seed: int, energies=None) -> Outcome:
    rows = kick_rows(cfg, energies)
    cal = cfg.calibration()
    path = io.write_csv(
        Path(out_dir) / "kick.csv", KICK_HEADER, rows, _meta(cfg, seed, P_per_uJ=cal.P_per_uJ)
    )
    return Outcome([path], True, {"P_per_uJ": cal.P_per_uJ, "rows": len(rows)})


# ---------------------------------------------------------------- synthesize / spectrum


def signal_components(cfg: RunConfig, include_35: bool | None = None, branches=None):
    const = cfg.constants()
    branches = cfg.branches() if branches is None else branches
    comps = line_components(const, 1, cfg.signal.line_weights, branches)
    if cfg.signal.include_35 if include_35 is None else include_35:
        comps += line_components(const, 3, cfg.signal.line35_weights, branches, scale=cfg.signal.line35_scale)
    return comps


def spectrum_targets(cfg: RunConfig, include_35: bool | None = None) -> dict[str, float]:
    const = cfg.constants()
    targets = {}
    for br in cfg.branches():
        targets[f"LD13_v{br.v}"] = const.line_thz(1, br.v)
        if cfg.signal.include_35 if include_35 is None else include_35:
            targets[f"LD35_v{br.v}"] = const.line_thz(3, br.v)
    return targets


def _write_spectrum(cfg: RunConfig, trace: LDTrace, out_dir: Path, seed: int, targets) -> tuple[list[Path], dict]:
    spec = fourier_spectrum(trace, cfg.signal.window, cfg.signal.zero_pad, targets=targets)
    meta = _meta(cfg, seed, resolution_thz=spec.resolution_thz, window=cfg.signal.window)
    files = [
        io.write_spectrum(out_dir / "spectrum.csv", spec.frequencies, spec.amplitudes, meta=meta),
        io.write_peaks(out_dir / "peaks.csv", spec.peaks, meta=meta),
    ]
    found = {p.label: p.frequency_thz for p in spec.peaks if p.label}
    return files, {"resolution_thz": spec.resolution_thz, "peaks": found}


def cmd_synthesize(cfg: RunConfig, out_dir, seed: int, include_35: bool | None = None) -> Outcome:
    out_dir = Path(out_dir)
    comps = signal_components(cfg, include_35)
    times = uniform_grid(cfg.signal.t_end_ps, cfg.signal.dt_ps)
    rng = np.random.default_rng(seed)
    trace = synthesize_ld(comps, cfg.signal.tau_ns, times, cfg.signal.noise_sigma, rng)
    files = [io.write_trace(out_dir / "trace.csv", trace, _meta(cfg, seed, tau_ns=cfg.signal.tau_ns))]
    more, summary = _write_spectrum(cfg, trace, out_dir, seed, spectrum_targets(cfg, include_35))
    return Outcome(files + more, True, summary)


def cmd_spectrum(cfg: RunConfig, trace_path, out_dir, seed: int) -> Outcome:
    trace = io.read_trace(trace_path)
    files, summary = _write_spectrum(cfg, trace, Path(out_dir), seed, spectrum_targets(cfg))
    return Outcome(files, True, summary)


# ---------------------------------------------------------------- fits


def _fit_items(res: FitResult) -> dict:
    return {
        "parameters": {n: float(v) for n, v in zip(res.names, res.values)},
        "uncertainties": {n: float(u) for n, u in zip(res.names, res.uncertainties)},
        "residual_rms": res.residual_rms,
        "converged": res.converged,
        "iterations": res.iterations,
        "restarts": res.restarts_used,
        "message": res.message,
        "flags": "; ".join(res.flags) or "none",
    }


def _load_data(recipe: str, data_path):
    header = DATA_HEADERS[recipe]
    _, _, cols = io.read_csv(data_path, header)
    return cols[header[0]], cols[header[1]]


def _noise(rng, scale, n):
    return rng.normal(0.0, 1.0, n) * scale if scale > 0 else np.zeros(n)


def _fit_kick_ratio(cfg: RunConfig, out_dir: Path, seed: int, data_path=None) -> Outcome:
    basis = cfg.rotor_basis()
    cal = cfg.calibration()
    kr = cfg.kick_ratio
    files = []
    if data_path is None:
        E = np.asarray(kr.energies_uJ, dtype=float)
        truth = {1: 1.0 - kr.p3 - kr.p5, 3: kr.p3, 5: kr.p5}
        y = ld_amplitude_ratio(E, truth, cal, basis)
        y = y * (1.0 + _noise(np.random.default_rng(seed), kr.noise_rel, E.size))
        files.append(io.write_csv(out_dir / "data.csv", DATA_HEADERS["fig2a-ratio"], zip(E, y), _meta(cfg, seed)))
    else:
        E, y = _load_data("fig2a-ratio", data_path)
    fit = fit_kick_ratio(
        E, y, scale0=cal.P_per_uJ, fit_scale=kr.fit_scale, basis=basis, config=cfg.fit_config(min(cfg.fit.restarts, 4))
    )
    Eg = np.linspace(0.05, max(float(np.max(E)), 0.1), 60)
    model = kick_ratio_model(basis)(Eg, fit.result.values)
    pure = ld_amplitude_ratio(Eg, {1: 1.0}, cal, basis)
    files.append(
        io.write_csv(out_dir / "curve.csv", ("energy_uJ", "ratio_model", "ratio_pure_N1"), zip(Eg, model, pure), _meta(cfg, seed))
    )
    items = {
        "recipe": "fig2a-ratio",
        "model": "impulsive kick of an isotropic N=1/3/5 mixture",
        **_fit_items(fit.result),
        "derived": {"p5": fit.p5, "p5_err": fit.p5_err},
    }
    files.append(io.write_report(out_dir / "report.txt", items, _meta(cfg, seed)))
    return Outcome(files, fit.result.converged, {"p3": fit.p3, "p5": fit.p5, "P_per_uJ": fit.P_per_uJ})


def _fit_beat(cfg: RunConfig, out_dir: Path, seed: int, data_path=None) -> Outcome:
    const = cfg.constants()
    comps = line_components(const, 1, cfg.signal.line_weights, [VibrationalBranch(0, 1.0)])
    freqs = [c.frequency_thz for c in comps]
    sc = cfg.scan
    files = []
    if data_path is None:
        starts = np.arange(0.0, sc.t_max_ps - sc.window_ps + 1e-9, sc.coarse_step_ps)
        sigma = sc.noise_rel * sum(abs(c.amplitude) for c in comps)
        rng = np.random.default_rng(seed)
        t, y = scan_amplitudes(comps, cfg.signal.tau_ns, starts, const.line_thz(1), sc.window_ps, sc.fine_dt_ps, sigma, rng)
        files.append(io.write_csv(out_dir / "data.csv", DATA_HEADERS["fig2b-beat"], zip(t, y), _meta(cfg, seed)))
    else:
        t, y = _load_data("fig2b-beat", data_path)
    fit = fit_spin_beating(t, y, freqs, config=cfg.fit_config(max(cfg.fit.restarts, 16)))
    tg = np.linspace(0.0, float(np.max(t)), 400)
    offsets = np.asarray(freqs) - np.mean(freqs)
    curve = beat_envelope_model(tg, np.concatenate([[fit.tau_ns], fit.weights]), offsets)
    files.append(io.write_csv(out_dir / "curve.csv", ("t_ps", "amplitude_model"), zip(tg, curve), _meta(cfg, seed)))
    # first interior minimum of the fitted envelope
    inner = np.where((curve[1:-1] < curve[:-2]) & (curve[1:-1] <= curve[2:]))[0]
    t_min = float(tg[inner[0] + 1]) if inner.size else float("nan")
    items = {
        "recipe": "fig2b-beat",
        "model": "decaying |sum_k c_k exp(2 pi i nu_k t)| envelope, v=0 fine-structure pairs",
        **_fit_items(fit.result),
        "derived": {
            "tau_ns": fit.tau_ns,
            "tau_err_ns": fit.tau_err_ns,
            "linewidth_ghz": fit.linewidth_ghz,
            "first_minimum_ps": t_min,
            "beat_frequencies_thz": freqs,
        },
    }
    files.append(io.write_report(out_dir / "report.txt", items, _meta(cfg, seed)))
    return Outcome(files, fit.result.converged, {"tau_ns": fit.tau_ns, "first_minimum_ps": t_min})


def operative_temperature(table: bath.BathTable, T_lo: float, T_hi: float) -> float:
    """Temperature of the second-sound maximum inside [T_lo, T_hi]."""
    Tg = np.linspace(T_lo, T_hi, 2001)
    return float(Tg[int(np.argmax(table.interpolate(Tg).u2_mps))])


def _fit_temperature(cfg: RunConfig, out_dir: Path, seed: int, data_path=None) -> Outcome:
    b = cfg.bath
    table = cfg.bath_table()
    files = []
    if data_path is None:
        T = np.linspace(b.T_min_K, b.T_max_K, b.n_points)
        truth = temperature_model(table, b.variant, b.t_fixed_ps)(T, (b.sigma_A2, b.w_nm, 1.0))
        y = truth * (1.0 + _noise(np.random.default_rng(seed), b.noise_rel, T.size))
        files.append(io.write_csv(out_dir / "data.csv", DATA_HEADERS["fig3-temperature"], zip(T, y), _meta(cfg, seed)))
    else:
        T, y = _load_data("fig3-temperature", data_path)
    fits = {
        m: fit_temperature(T, y, b.t_fixed_ps, m, table, config=cfg.fit_config())
        for m in TEMPERATURE_MODELS
    }
    Tg = fits["literal"].gamma_T
    cols, header = [Tg], ["T_K"]
    for m, f in fits.items():
        cols.append(temperature_model(table, m, b.t_fixed_ps)(Tg, f.result.values))
        header.append(f"ld_{m}")
    for m, f in fits.items():
        cols.append(f.gamma_ghz)
        header.append(f"gamma_{m}_ghz")
    files.append(io.write_csv(out_dir / "curve.csv", header, zip(*cols), _meta(cfg, seed)))
    T_op = operative_temperature(table, float(np.min(T)), float(np.max(T)))
    u2_op = float(table.interpolate(T_op).u2_mps)
    items = {
        "recipe": "fig3-temperature",
        "t_fixed_ps": b.t_fixed_ps,
        "generating_variant": b.variant if data_path is None else "external data",
    }
    for m, f in fits.items():
        items[m] = _fit_items(f.result)
    items["best_variant"] = min(fits, key=lambda m: fits[m].result.residual_rms)
    items["second_sound"] = {
        "operative_T_K": T_op,
        "u2_mps": u2_op,
        "distance_nm": u2_op * b.t_fixed_ps * 1e-3,
    }
    files.append(io.write_report(out_dir / "report.txt", items, _meta(cfg, seed)))
    summary = {m: (f.sigma_A2, f.w_nm, f.result.residual_rms) for m, f in fits.items()}
    return Outcome(files, all(f.result.converged for f in fits.values()), summary)


def _fit_bimolecular(cfg: RunConfig, out_dir: Path, seed: int, data_path=None) -> Outcome:
    a = cfg.annihilation
    table = cfg.bath_table()
    t_s = a.t_delay_ms * 1e-3
    files = []
    if data_path is None:
        T = np.linspace(a.T_min_K, a.T_max_K, a.n_points)
        truth = bimolecular_model(table, t_s, a.K_ref_cm3_s, a.T_ref_K)(T, (a.N0_cm3 / 1e13, 1.0))
        y = truth * (1.0 + _noise(np.random.default_rng(seed), a.noise_rel, T.size))
        files.append(io.write_csv(out_dir / "data.csv", DATA_HEADERS["figS2b-bimolecular"], zip(T, y), _meta(cfg, seed)))
    else:
        T, y = _load_data("figS2b-bimolecular", data_path)
    fit = fit_bimolecular(
        T, y, a.t_delay_ms, a.K_ref_cm3_s, a.T_ref_K, table, fit_scale=a.fit_scale, config=cfg.fit_config(min(cfg.fit.restarts, 2))
    )
    Tg = np.linspace(float(np.min(T)), float(np.max(T)), 100)
    curve = bimolecular_model(table, t_s, a.K_ref_cm3_s, a.T_ref_K)(Tg, fit.result.values)
    files.append(io.write_csv(out_dir / "curve.csv", ("T_K", "intensity_model"), zip(Tg, curve), _meta(cfg, seed)))
    sep_nm = (fit.N0_cm3 ** (-1.0 / 3.0)) * 1e7
    items = {
        "recipe": "figS2b-bimolecular",
        "model": "N(t) = N0 / (1 + K(T) N0 t), K from thermal roton density",
        **_fit_items(fit.result),
        "derived": {
            "N0_cm3": fit.N0_cm3,
            "N0_err_cm3": fit.N0_err_cm3,
            "mean_separation_nm": sep_nm,
            "intensity_monotone_in_T": bool(np.all(np.diff(curve) > 0)),
        },
    }
    files.append(io.write_report(out_dir / "report.txt", items, _meta(cfg, seed)))
    return Outcome(files, fit.result.converged, {"N0_cm3": fit.N0_cm3})


FITTERS: dict[str, Callable[..., Outcome]] = {
    "fig2a-ratio": _fit_kick_ratio,
    "fig2b-beat": _fit_beat,
    "fig3-temperature": _fit_temperature,
    "figS2b-bimolecular": _fit_bimolecular,
}


def cmd_fit(cfg: RunConfig, recipe: str, out_dir, seed: int, data_path=None) -> Outcome:
    if recipe not in FITTERS:
        raise ValueError(f"unknown fit recipe {recipe!r}; choose from {', '.join(FITTERS)}")
    return FITTERS[recipe](cfg, Path(out_dir), seed, data_path)


# ---------------------------------------------------------------- validate


@dataclass
class Check:
    name: str
    status: str  # PASS, WARN or FAIL
    detail: str


def cmd_validate(cfg: RunConfig) -> list[Check]:
    checks = []
    try:
        table = cfg.bath_table(strict=False)
        problems = table.violations()
        if problems:
            checks += [Check("bath-table", "FAIL", p) for p in problems]
        else:
            T_op = operative_temperature(table, *table.T_range)
            checks.append(Check("bath-table", "PASS", f"{len(table.T_K)} rows, u2 maximum at {T_op:.3f} K"))
    except bath.BathTableError as exc:
        checks.append(Check("bath-table", "FAIL", str(exc)))

    const = cfg.constants()
    for N in (1, 3):
        s = splitting_ghz(N, const)
        if s > SPLITTING_SCALE_GHZ:
            checks.append(
                Check(f"splitting-N{N}", "WARN", f"{s:.2f} GHz exceeds {SPLITTING_SCALE_GHZ} GHz; expected scale is ~2 GHz")
            )
        else:
            checks.append(Check(f"splitting-N{N}", "PASS", f"{s:.3f} GHz"))
    n_pairs = len(allowed_pairs(1, 3))
    if len(cfg.signal.line_weights) != n_pairs:
        checks.append(Check("line-weights", "FAIL", f"{len(cfg.signal.line_weights)} weights for {n_pairs} pairs"))

    basis = cfg.rotor_basis()
    if basis.n_max < 7:
        checks.append(Check("basis", "FAIL", f"n_max={basis.n_max} cannot hold N=5 plus one coupling step"))
    else:
        E_max = max(cfg.pulse.energies_uJ + cfg.kick_ratio.energies_uJ)
        P = float(cfg.calibration().strength(E_max))
        try:
            for N0, p in cfg.initial_mixture().items():
                if p > 0:
                    apply_impulsive_kick(WavePacket.eigenstate(basis, N0, 0), P)
            checks.append(Check("basis", "PASS", f"n_max={basis.n_max} holds P={P:.3f} ({E_max} uJ)"))
        except TruncationError as exc:
            checks.append(Check("basis", "FAIL", str(exc)))
    return checks


def format_checks(checks: list[Check]) -> str:
    return "\n".join(f"{c.status:4s}  {c.name}: {c.detail}" for c in checks) + "\n"


# ---------------------------------------------------------------- recipes


@dataclass(frozen=True)
class FigureRecipe:
    name: str
    description: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    run: Callable[[RunConfig, Path, int], Outcome]


def _fig1b(cfg: RunConfig, out_dir: Path, seed: int) -> Outcome:
    # both lines, so the spectrum shows the 1-3 and 3-5 peaks together
    return cmd_synthesize(cfg, out_dir, seed, include_35=True)


def _fit_recipe(name):
    return lambda cfg, out_dir, seed: cmd_fit(cfg, name, out_dir, seed)


RECIPES: dict[str, FigureRecipe] = {
    r.name: r
    for r in (
        FigureRecipe(
            "fig1b-spectrum",
            "LD trace and its Fourier spectrum, with the N=3->5 line included",
            ("molecule", "signal"),
            ("trace.csv", "spectrum.csv", "peaks.csv"),
            _fig1b,
        ),
        FigureRecipe(
            "fig2a-ratio",
            "LD_35/LD_13 against kick energy, fit of prior N=3/5 populations",
            ("molecule", "basis", "pulse", "kick_ratio", "fit"),
            ("data.csv", "curve.csv", "report.txt"),
            _fit_recipe("fig2a-ratio"),
        ),
        FigureRecipe(
            "fig2b-beat",
            "coarse-scan LD_13 amplitude with the fine-structure beat fit",
            ("molecule", "signal", "scan", "fit"),
            ("data.csv", "curve.csv", "report.txt"),
            _fit_recipe("fig2b-beat"),
        ),
        FigureRecipe(
            "fig3-temperature",
            "LD at fixed delay against bath temperature, all three decoherence models",
            ("bath", "fit"),
            ("data.csv", "curve.csv", "report.txt"),
            _fit_recipe("fig3-temperature"),
        ),
        FigureRecipe(
            "figS2b-bimolecular",
            "late-delay intensity against temperature, bimolecular fit of N0",
            ("bath", "annihilation", "fit"),
            ("data.csv", "curve.csv", "report.txt"),
            _fit_recipe("figS2b-bimolecular"),
        ),
    )
}


def run_recipe(cfg: RunConfig, name: str, out_dir, seed: int) -> Outcome:
    if name not in RECIPES:
        raise ValueError(f"unknown recipe {name!r}; choose from {', '.join(RECIPES)}")
    recipe = RECIPES[name]
    outcome = recipe.run(cfg, Path(out_dir), seed)
    produced = {p.name for p in outcome.files}
    missing = [f for f in recipe.outputs if f not in produced]
    if missing:
        raise RuntimeError(f"recipe {name} did not produce {', '.join(missing)}")
    return outcome
