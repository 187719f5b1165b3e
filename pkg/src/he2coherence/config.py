"""Run configuration: a TOML file of unit-tagged keys, validated against a fixed schema."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .bath import BathTable, read_bath_table
from .fitting import FitConfig
from .rotor import KickCalibration, MoleculeConstants, RotorBasis, calibrate_energy_scale
from .signal import VibrationalBranch


class ConfigError(ValueError):
    """Invalid configuration; message carries file path and key."""


class ConfigParseError(ConfigError):
    """Config file is not valid TOML."""


@dataclass
class MoleculeSection:
    B_thz: list[float] = field(default_factory=lambda: [0.227167, 0.220497, 0.213827])
    D_thz: list[float] = field(default_factory=lambda: [1.19e-5, 1.19e-5, 1.19e-5])
    delta_alpha_A3: float = 35.1
    lambda_ss_ghz: float = -2.20
    gamma_sr_ghz: float = -0.04


@dataclass
class BasisSection:
    n_max: int = 11
    parity: str = "odd"


@dataclass
class PulseSection:
    energies_uJ: list[float] = field(default_factory=lambda: [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5])
    duration_fwhm_fs: float = 70.0
    P_per_uJ: float = 0.0  # 0 -> calibrate against the population anchors
    calibration_energy_uJ: float = 3.5
    calibration_pop3: float = 0.15
    calibration_pop5: float = 0.02
    initial_p3: float = 0.0
    initial_p5: float = 0.0


@dataclass
class SignalSection:
    line_weights: list[float] = field(default_factory=lambda: [0.13, 0.10, 0.31, 1.0, 0.68])
    line35_weights: list[float] = field(default_factory=lambda: [1.0, 1.0, 1.0, 1.0, 1.0])
    line35_scale: float = 0.05
    include_35: bool = False
    branch_v: list[int] = field(default_factory=lambda: [0, 1, 2])
    branch_weights: list[float] = field(default_factory=lambda: [1.0, 1.0, 1.0])
    tau_ns: float = 1.0
    t_end_ps: float = 400.0
    dt_ps: float = 0.05
    window: str = "hann"
    zero_pad: int = 4
    noise_sigma: float = 0.0


@dataclass
class ScanSection:
    t_max_ps: float = 1650.0
    coarse_step_ps: float = 25.0
    window_ps: float = 20.0
    fine_dt_ps: float = 0.02
    noise_rel: float = 0.01


@dataclass
class BathSection:
    table: str = ""
    sigma_A2: float = 0.025
    w_nm: float = 22.0
    t_fixed_ps: float = 850.0
    variant: str = "literal"
    T_min_K: float = 1.4
    T_max_K: float = 2.15
    n_points: int = 30
    noise_rel: float = 0.05


@dataclass
class AnnihilationSection:
    N0_cm3: float = 1.9e13
    K_ref_cm3_s: float = 5e-11
    T_ref_K: float = 1.5
    t_delay_ms: float = 1.0
    T_min_K: float = 1.4
    T_max_K: float = 2.1
    n_points: int = 15
    noise_rel: float = 0.02
    fit_scale: bool = False


@dataclass
class KickRatioSection:
    energies_uJ: list[float] = field(default_factory=lambda: [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5])
    p3: float = 0.005
    p5: float = 0.0005
    noise_rel: float = 0.0
    fit_scale: bool = True


@dataclass
class FitSection:
    tol: float = 1e-12
    max_iter: int = 200
    restarts: int = 8
    seed: int = 0


@dataclass
class OutputSection:
    dir: str = "out"


SECTIONS = {
    "molecule": MoleculeSection,
    "basis": BasisSection,
    "pulse": PulseSection,
    "signal": SignalSection,
    "scan": ScanSection,
    "bath": BathSection,
    "annihilation": AnnihilationSection,
    "kick_ratio": KickRatioSection,
    "fit": FitSection,
    "output": OutputSection,
}

_POSITIVE = {
    "delta_alpha_A3", "n_max", "duration_fwhm_fs", "calibration_energy_uJ", "tau_ns", "t_end_ps",
    "dt_ps", "zero_pad", "t_max_ps", "coarse_step_ps", "window_ps", "fine_dt_ps", "sigma_A2", "w_nm",
    "t_fixed_ps", "T_min_K", "T_max_K", "n_points", "N0_cm3", "K_ref_cm3_s", "T_ref_K", "t_delay_ms",
    "tol", "max_iter",
}
_NON_NEGATIVE = {
    "P_per_uJ", "initial_p3", "initial_p5", "line35_scale", "noise_sigma", "noise_rel", "p3", "p5",
    "restarts", "seed",
}


@dataclass
class RunConfig:
    molecule: MoleculeSection = field(default_factory=MoleculeSection)
    basis: BasisSection = field(default_factory=BasisSection)
    pulse: PulseSection = field(default_factory=PulseSection)
    signal: SignalSection = field(default_factory=SignalSection)
    scan: ScanSection = field(default_factory=ScanSection)
    bath: BathSection = field(default_factory=BathSection)
    annihilation: AnnihilationSection = field(default_factory=AnnihilationSection)
    kick_ratio: KickRatioSection = field(default_factory=KickRatioSection)
    fit: FitSection = field(default_factory=FitSection)
    output: OutputSection = field(default_factory=OutputSection)
    source: str = "<defaults>"

    # ---- derived objects
    def constants(self) -> MoleculeConstants:
        m = self.molecule
        return MoleculeConstants(tuple(m.B_thz), tuple(m.D_thz), m.delta_alpha_A3, m.lambda_ss_ghz, m.gamma_sr_ghz)

    def rotor_basis(self) -> RotorBasis:
        return RotorBasis(self.basis.n_max, self.basis.parity)

    def bath_table(self, strict: bool = True) -> BathTable:
        return read_bath_table(self.bath.table or None, strict=strict)

    def fit_config(self, restarts: int | None = None) -> FitConfig:
        f = self.fit
        return FitConfig(tol=f.tol, max_iter=f.max_iter, restarts=f.restarts if restarts is None else restarts, seed=f.seed)

    def calibration(self) -> KickCalibration:
        p = self.pulse
        if p.P_per_uJ > 0:
            return KickCalibration(p.P_per_uJ)
        return calibrate_energy_scale(p.calibration_energy_uJ, p.calibration_pop3, p.calibration_pop5)

    def branches(self) -> list[VibrationalBranch]:
        return [VibrationalBranch(v, w) for v, w in zip(self.signal.branch_v, self.signal.branch_weights)]

    def initial_mixture(self) -> dict[int, float]:
        p3, p5 = self.pulse.initial_p3, self.pulse.initial_p5
        return {1: 1.0 - p3 - p5, 3: p3, 5: p5}

    def to_dict(self) -> dict[str, Any]:
        return {name: asdict(getattr(self, name)) for name in SECTIONS}

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def set(self, dotted: str, raw: str) -> None:
        """Override one key from a ``section.key=value`` string (value parsed as TOML)."""
        try:
            section, key = dotted.split(".", 1)
        except ValueError:
            raise ConfigError(f"override {dotted!r} must look like section.key") from None
        try:
            value = tomllib.loads(f"v = {raw}")["v"]
        except tomllib.TOMLDecodeError:
            value = raw
        _assign(self, section, key, value, "--set")
        self.validate()

    def validate(self) -> None:
        where = self.source
        for name in SECTIONS:
            sec = getattr(self, name)
            for f in fields(sec):
                val = getattr(sec, f.name)
                vals = val if isinstance(val, list) else [val]
                if f.name in _POSITIVE and any(not (isinstance(v, (int, float)) and v > 0) for v in vals):
                    raise ConfigError(f"{where}: [{name}] {f.name} must be positive, got {val}")
                if f.name in _NON_NEGATIVE and any(not (isinstance(v, (int, float)) and v >= 0) for v in vals):
                    raise ConfigError(f"{where}: [{name}] {f.name} must be non-negative, got {val}")
        try:
            self.constants()
            self.rotor_basis()
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from None
        if not self.signal.line_weights:
            raise ConfigError(f"{where}: [signal] line_weights is empty; no beat components to synthesize")
        if len(self.signal.line_weights) != 5 or len(self.signal.line35_weights) != 5:
            raise ConfigError(f"{where}: [signal] line weights need one entry per allowed pair (5)")
        if len(self.signal.branch_v) != len(self.signal.branch_weights) or not self.signal.branch_v:
            raise ConfigError(f"{where}: [signal] branch_v and branch_weights must be non-empty and equal length")
        if any(v < 0 or v >= len(self.molecule.B_thz) for v in self.signal.branch_v):
            raise ConfigError(f"{where}: [signal] branch_v refers to a level without B_thz")
        if self.signal.window not in ("hann", "none"):
            raise ConfigError(f"{where}: [signal] window must be 'hann' or 'none'")
        if self.bath.variant not in ("literal", "integrated"):
            raise ConfigError(f"{where}: [bath] variant must be 'literal' or 'integrated'")
        if self.bath.table and not Path(self.bath.table).is_file():
            raise ConfigError(f"{where}: [bath] table file {self.bath.table!r} does not exist")
        if self.pulse.initial_p3 + self.pulse.initial_p5 >= 1:
            raise ConfigError(f"{where}: [pulse] initial_p3 + initial_p5 must stay below 1")
        if any(e < 0 for e in self.pulse.energies_uJ):
            raise ConfigError(f"{where}: [pulse] energies_uJ must be non-negative")


def _assign(cfg: RunConfig, section: str, key: str, value, where: str) -> None:
    if section not in SECTIONS:
        raise ConfigError(f"{where}: unknown section [{section}]")
    sec = getattr(cfg, section)
    types = {f.name: f.type for f in fields(sec)}
    if key not in types:
        raise ConfigError(f"{where}: unknown key {key!r} in [{section}]")
    current = getattr(sec, key)
    setattr(sec, key, _coerce(value, current, f"{where}: [{section}] {key}"))


def _coerce(value, current, ctx):
    if isinstance(current, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{ctx} expects true/false, got {value!r}")
        return value
    if isinstance(current, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{ctx} expects an integer, got {value!r}")
        return value
    if isinstance(current, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{ctx} expects a number, got {value!r}")
        return float(value)
    if isinstance(current, str):
        if not isinstance(value, str):
            raise ConfigError(f"{ctx} expects a string, got {value!r}")
        return value
    if isinstance(current, list):
        if not isinstance(value, list):
            raise ConfigError(f"{ctx} expects a list, got {value!r}")
        proto = current[0] if current else 0.0
        return [_coerce(v, proto, ctx) for v in value]
    raise ConfigError(f"{ctx}: unsupported type")


def load_config(path: str | Path | None = None) -> RunConfig:
    """Defaults overlaid with the TOML file at ``path`` (if any)."""
    cfg = RunConfig()
    if path is None:
        return cfg
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text("utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"{path}: config file not found") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigParseError(f"{path}: {exc}") from None
    cfg.source = str(path)
    for section, table in data.items():
        if not isinstance(table, dict):
            raise ConfigError(f"{path}: top-level key {section!r} must be a [section]")
        for key, value in table.items():
            _assign(cfg, section, key, value, str(path))
    if cfg.bath.table and not Path(cfg.bath.table).is_absolute():
        cfg.bath.table = str((path.parent / cfg.bath.table).resolve())
    cfg.validate()
    return cfg


def default_config_path() -> Path:
    return Path(str(resources.files("he2coherence").joinpath("data/default.toml")))
