"""He II property table and bath-coupling models for rotational decoherence.

Unit conventions: temperatures in K, densities in cm^-3, sound speeds in m/s,
cross sections in A^2, pulse widths in nm, delays in ps, rates in GHz (1/ns).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import erf

T_LAMBDA = 2.1768
COLUMNS = ("T_K", "density_cm3", "normal_fraction", "u1_mps", "u2_mps", "roton_gap_K")
_PROPS = COLUMNS[1:]


class BathTableError(ValueError):
    pass


class TemperatureRangeError(ValueError):
    pass


@dataclass
class BathProperties:
    T: np.ndarray | float
    density_cm3: np.ndarray | float
    normal_fraction: np.ndarray | float
    u1_mps: np.ndarray | float
    u2_mps: np.ndarray | float
    roton_gap_K: np.ndarray | float

    @property
    def normal_density_cm3(self):
        return self.density_cm3 * self.normal_fraction


@dataclass
class BathTable:
    T_K: np.ndarray
    density_cm3: np.ndarray
    normal_fraction: np.ndarray
    u1_mps: np.ndarray
    u2_mps: np.ndarray
    roton_gap_K: np.ndarray
    provenance: list[str] = field(default_factory=list)

    def __post_init__(self):
        for name in COLUMNS:
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        n = len(self.T_K)
        if any(len(getattr(self, name)) != n for name in COLUMNS):
            raise BathTableError("all table columns must have equal length")
        self._interp = None

    def violations(self) -> list[str]:
        """Invariant violations, one message per failed check.

        Row numbers count data rows from 1, as in ``read_bath_table`` errors.
        """
        out = []
        T = self.T_K
        bad = np.where(np.diff(T) <= 0)[0]
        if len(bad):
            out.append(f"T_K not strictly increasing at data row {int(bad[0]) + 2} (T={T[bad[0] + 1]})")
        if len(T) == 0 or T.min() > 1.3 or T.max() < 2.17:
            out.append("table must cover at least [1.3, 2.17] K")
        nf = self.normal_fraction
        if np.any((nf < 0) | (nf > 1)):
            row = int(np.where((nf < 0) | (nf > 1))[0][0])
            out.append(f"normal_fraction outside [0, 1] at data row {row + 1}")
        below = T <= T_LAMBDA
        dec = np.where(np.diff(nf[below]) < 0)[0]
        if len(dec):
            out.append(f"normal_fraction decreases at data row {int(dec[0]) + 2}")
        if np.any(self.density_cm3 <= 0) or np.any(self.u1_mps <= 0) or np.any(self.u2_mps < 0):
            out.append("densities and sound speeds must be positive")
        if not out:
            Tg = np.linspace(T[0], T[-1], 2001)
            u2 = self.interpolate(Tg).u2_mps
            T_max = Tg[int(np.argmax(u2))]
            if not 1.4 < T_max < 1.8:
                out.append(f"u2 maximum at {T_max:.3f} K, expected inside (1.4, 1.8) K")
        return out

    @property
    def T_range(self) -> tuple[float, float]:
        return float(self.T_K[0]), float(self.T_K[-1])

    def interpolate(self, T) -> BathProperties:
        """Shape-preserving (PCHIP) interpolation; no extrapolation."""
        T_arr = np.asarray(T, dtype=float)
        lo, hi = self.T_range
        if np.any(T_arr < lo - 1e-12) or np.any(T_arr > hi + 1e-12):
            raise TemperatureRangeError(f"T={T} outside table range [{lo}, {hi}] K")
        if self._interp is None:
            self._interp = {name: PchipInterpolator(self.T_K, getattr(self, name)) for name in _PROPS}
        vals = {name: self._interp[name](np.clip(T_arr, lo, hi)) for name in _PROPS}
        if T_arr.ndim == 0:
            vals = {k: float(v) for k, v in vals.items()}
            return BathProperties(float(T_arr), **vals)
        return BathProperties(T_arr, **vals)


def interpolate(table: BathTable, T) -> BathProperties:
    return table.interpolate(T)


def read_bath_table(path: str | Path | None = None, strict: bool = True) -> BathTable:
    """Read a bath CSV (``#`` provenance lines, then a mandatory header)."""
    if path is None:
        text = resources.files("he2coherence").joinpath("data/he_ii_svp.csv").read_text("utf-8")
        source = "he2coherence/data/he_ii_svp.csv"
    else:
        text = Path(path).read_text("utf-8")
        source = str(path)
    lines = text.splitlines()
    provenance = [ln[1:].strip() for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if ln.strip() and not ln.startswith("#")]
    rows = list(csv.reader(body))
    if not rows or tuple(h.strip() for h in rows[0]) != COLUMNS:
        raise BathTableError(f"{source}: header must be {','.join(COLUMNS)}")
    data = []
    for k, row in enumerate(rows[1:], start=1):
        if len(row) != len(COLUMNS):
            raise BathTableError(f"{source}: data row {k} has {len(row)} fields")
        try:
            data.append([float(x) for x in row])
        except ValueError as exc:
            raise BathTableError(f"{source}: data row {k}: {exc}") from None
    arr = np.array(data, dtype=float)
    table = BathTable(*arr.T, provenance=provenance)
    if strict:
        problems = table.violations()
        if problems:
            raise BathTableError(f"{source}: " + "; ".join(problems))
    return table


_DEFAULT: BathTable | None = None


def default_table() -> BathTable:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = read_bath_table()
    return _DEFAULT


def _rate_ghz(density_cm3, sigma_A2, u1_mps):
    # cm^-3 -> m^-3, A^2 -> m^2, s^-1 -> GHz
    return density_cm3 * 1e6 * sigma_A2 * 1e-20 * u1_mps * 1e-9


def gamma_equilibrium(table: BathTable, T, sigma_A2: float):
    """Kinematic decoherence rate N_n^eq sigma u1 (GHz)."""
    p = table.interpolate(T)
    return _rate_ghz(p.normal_density_cm3, sigma_A2, p.u1_mps)


def ld_equilibrium(table: BathTable, T, t_ps, sigma_A2: float, ld0: float = 1.0):
    return ld0 * np.exp(-gamma_equilibrium(table, T, sigma_A2) * np.asarray(t_ps) * 1e-3)


def n_neq(table: BathTable, T, t_ps, w_nm: float):
    """Normal density at the molecule while a Gaussian second-sound pulse moves away."""
    if w_nm <= 0:
        raise ValueError("pulse width must be positive")
    p = table.interpolate(T)
    travel_nm = p.u2_mps * np.asarray(t_ps) * 1e-3
    return p.density_cm3 * np.exp(-((travel_nm / w_nm) ** 2))


def gamma_nonequilibrium(table: BathTable, T, t_ps, sigma_A2: float, w_nm: float):
    """Instantaneous rate n_neq(T, t) sigma u1 (GHz)."""
    p = table.interpolate(T)
    return _rate_ghz(n_neq(table, T, t_ps, w_nm), sigma_A2, p.u1_mps)


def _integrated_density_cm3_ps(table: BathTable, T, t_ps, w_nm: float):
    """Integral of n_neq over [0, t] in cm^-3 ps (closed form through erf)."""
    p = table.interpolate(T)
    t = np.asarray(t_ps, dtype=float)
    a = p.u2_mps * 1e-3 / w_nm  # 1/ps
    a_safe = np.where(a > 0, a, 1.0)
    integral = np.where(
        a * t > 1e-6,
        0.5 * math.sqrt(math.pi) * erf(a_safe * t) / a_safe,
        t * (1.0 - (a * t) ** 2 / 3.0),
    )
    return p.density_cm3 * integral


VARIANTS = ("literal", "integrated")


def ld_nonequilibrium(
    table: BathTable, T, t_ps, sigma_A2: float, w_nm: float, ld0: float = 1.0, variant: str = "literal"
):
    """LD amplitude with the equilibrium normal density replaced by the second-sound pulse.

    ``literal`` uses exp(-n_neq(T, t) sigma u1 t); ``integrated`` uses the
    time integral of the instantaneous rate, exp(-sigma u1 int_0^t n_neq dt').
    """
    p = table.interpolate(T)
    t = np.asarray(t_ps, dtype=float)
    if variant == "literal":
        exponent = gamma_nonequilibrium(table, T, t, sigma_A2, w_nm) * t * 1e-3
    elif variant == "integrated":
        exponent = _rate_ghz(_integrated_density_cm3_ps(table, T, t, w_nm), sigma_A2, p.u1_mps) * 1e-3
    else:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    return ld0 * np.exp(-exponent)


def roton_density_factor(table: BathTable, T):
    """sqrt(T) exp(-Delta(T)/T), proportional to the thermal roton density."""
    T_arr = np.asarray(T, dtype=float)
    gap = table.interpolate(T_arr).roton_gap_K
    return np.sqrt(T_arr) * np.exp(-gap / T_arr)


@dataclass(frozen=True)
class AnnihilationParams:
    N0_cm3: float = 1.9e13
    K_ref_cm3_s: float = 5e-11
    T_ref_K: float = 1.5

    def __post_init__(self):
        if min(self.N0_cm3, self.K_ref_cm3_s, self.T_ref_K) <= 0:
            raise ValueError("annihilation parameters must be positive")


def annihilation_rate(table: BathTable, T, params: AnnihilationParams):
    """K(T) = K_ref n_rot(T_ref) / n_rot(T) (cm^3/s)."""
    return params.K_ref_cm3_s * roton_density_factor(table, params.T_ref_K) / roton_density_factor(table, T)


def bimolecular_density(table: BathTable, t_s, T, params: AnnihilationParams):
    """N(t) = N0 / (1 + K(T) N0 t)."""
    t = np.asarray(t_s, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be non-negative")
    K = annihilation_rate(table, T, params)
    return params.N0_cm3 / (1.0 + K * params.N0_cm3 * t)


def separation_and_displacement(density_cm3: float, D_cm2_s: float, t_s: float) -> tuple[float, float]:
    """Mean intermolecular separation density^(-1/3) and 3-D rms displacement sqrt(6 D t), in nm."""
    if density_cm3 <= 0 or D_cm2_s < 0 or t_s < 0:
        raise ValueError("inputs must be positive")
    sep_nm = density_cm3 ** (-1.0 / 3.0) * 1e7
    disp_nm = math.sqrt(6.0 * D_cm2_s * t_s) * 1e7
    return sep_nm, disp_nm
