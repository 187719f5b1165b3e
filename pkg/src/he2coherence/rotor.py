"""Rigid-rotor wave packets of He2* driven by a linearly polarized kick pulse.

Units: time in ps (pulse durations in fs where noted), rotational constants in
THz, rotational energies carried internally as angular frequencies (rad/ps)
with hbar = 1.  The kick couples |N, M> to |N +- 2, M> through cos^2(theta);
every M is an independent block, which is how all propagators are organized.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy import constants as sc
from scipy.optimize import minimize_scalar

from .angular import cos2_element

GAUSS_AREA = math.sqrt(math.pi / (4.0 * math.log(2.0)))  # integral of exp(-4ln2 t^2/fwhm^2) / fwhm


class TruncationError(RuntimeError):
    """Population reached the top of the rotor basis."""


class IntegrationError(RuntimeError):
    """Time stepping was too coarse for the requested propagation."""


class PulseError(ValueError):
    """Inconsistent or incomplete kick-pulse parameterization."""


@dataclass(frozen=True)
class MoleculeConstants:
    """Rotational, fine-structure and polarizability constants of a linear molecule.

    B_thz[v] and D_thz[v] are per vibrational level.  The defaults describe the
    a-state of He2*; see ``data/default.toml`` for their origin.
    """

    B_thz: tuple[float, ...] = (0.227167, 0.220497, 0.213827)
    D_thz: tuple[float, ...] = (1.19e-5, 1.19e-5, 1.19e-5)
    delta_alpha_A3: float = 35.1
    lambda_ss_ghz: float = -2.20
    gamma_sr_ghz: float = -0.04

    def __post_init__(self):
        B = tuple(float(b) for b in self.B_thz)
        object.__setattr__(self, "B_thz", B)
        D = tuple(float(d) for d in self.D_thz) if self.D_thz else (0.0,) * len(B)
        if len(D) == 1 and len(B) > 1:
            D = D * len(B)
        object.__setattr__(self, "D_thz", D)
        if not B or B[0] <= 0:
            raise ValueError("B_0 must be positive")
        if any(b2 >= b1 for b1, b2 in zip(B, B[1:])):
            raise ValueError(f"B_v must decrease with v, got {B}")
        if len(D) != len(B):
            raise ValueError("D_thz must have one entry per vibrational level")
        if any(d < 0 for d in D):
            raise ValueError("centrifugal constants must be non-negative")
        if self.delta_alpha_A3 <= 0:
            raise ValueError("delta_alpha must be positive")

    def term_thz(self, N, v: int = 0):
        """Field-free rotational term value B N(N+1) - D [N(N+1)]^2 in THz."""
        x = np.asarray(N) * (np.asarray(N) + 1)
        return self.B_thz[v] * x - self.D_thz[v] * x**2

    def line_thz(self, N: int, v: int = 0) -> float:
        """Spin-free N -> N+2 coherence frequency."""
        return float(self.term_thz(N + 2, v) - self.term_thz(N, v))


@dataclass(frozen=True)
class RotorBasis:
    n_max: int = 11
    parity: str = "odd"  # "odd" or "all"

    def __post_init__(self):
        if self.parity not in ("odd", "all"):
            raise ValueError(f"parity must be 'odd' or 'all', got {self.parity!r}")
        if self.n_max < (1 if self.parity == "odd" else 0):
            raise ValueError("empty basis")
        if self.parity == "odd" and self.n_max % 2 == 0:
            raise ValueError("odd-parity basis needs an odd n_max")

    @property
    def n_values(self) -> tuple[int, ...]:
        start, step = (1, 2) if self.parity == "odd" else (0, 1)
        return tuple(range(start, self.n_max + 1, step))

    @property
    def states(self) -> tuple[tuple[int, int], ...]:
        return _states(self)

    @property
    def size(self) -> int:
        return len(self.states)

    def index(self, N: int, M: int) -> int:
        try:
            return _index_map(self)[(N, M)]
        except KeyError:
            raise KeyError(f"|N={N}, M={M}> is not in {self}") from None

    def m_values(self) -> range:
        return range(-self.n_max, self.n_max + 1)

    def block(self, M: int) -> tuple[np.ndarray, np.ndarray]:
        """(N values, global indices) of the states with projection M."""
        return _block(self, M)

    def require(self, *Ns: int) -> None:
        for N in Ns:
            if N not in self.n_values:
                raise ValueError(f"N={N} not contained in basis {self}")


@lru_cache(maxsize=None)
def _states(basis: RotorBasis):
    return tuple((N, M) for N in basis.n_values for M in range(-N, N + 1))


@lru_cache(maxsize=None)
def _index_map(basis: RotorBasis):
    return {s: i for i, s in enumerate(_states(basis))}


@lru_cache(maxsize=None)
def _block(basis: RotorBasis, M: int):
    Ns = [N for N in basis.n_values if N >= abs(M)]
    idx = [_index_map(basis)[(N, M)] for N in Ns]
    return np.array(Ns, dtype=int), np.array(idx, dtype=int)


@lru_cache(maxsize=None)
def _cos2_block(basis: RotorBasis, M: int) -> np.ndarray:
    Ns, _ = _block(basis, M)
    return np.array([[cos2_element(a, M, b, M) for b in Ns] for a in Ns])


@lru_cache(maxsize=None)
def _cos2_eig(basis: RotorBasis, M: int):
    return np.linalg.eigh(_cos2_block(basis, M))


def cos2_matrix(basis: RotorBasis) -> np.ndarray:
    """Dense <N', M'| cos^2 theta |N, M> over the whole basis."""
    C = np.zeros((basis.size, basis.size))
    for M in basis.m_values():
        _, idx = basis.block(M)
        C[np.ix_(idx, idx)] = _cos2_block(basis, M)
    return C


@dataclass
class WavePacket:
    basis: RotorBasis
    amplitudes: np.ndarray
    t_ref: float = 0.0  # ps

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (self.basis.size,):
            raise ValueError(
                f"expected {self.basis.size} amplitudes, got shape {self.amplitudes.shape}"
            )

    @classmethod
    def eigenstate(cls, basis: RotorBasis, N: int, M: int = 0) -> "WavePacket":
        c = np.zeros(basis.size, dtype=complex)
        c[basis.index(N, M)] = 1.0
        return cls(basis, c)

    @property
    def norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def amplitude(self, N: int, M: int) -> complex:
        return complex(self.amplitudes[self.basis.index(N, M)])


@dataclass(frozen=True)
class KickPulse:
    """Gaussian (in intensity) kick pulse.

    Either ``strength`` (the dimensionless kick strength P) is given directly,
    or it is derived from peak intensity and duration.  ``energy_uJ`` together
    with ``waist_um`` allows a consistency check against the peak intensity.
    """

    energy_uJ: float | None = None
    peak_intensity_W_cm2: float | None = None
    duration_fwhm_fs: float = 70.0
    waist_um: float | None = None
    polarization_angle: float = 0.0
    envelope: str = "gaussian"
    strength: float | None = None
    rel_tol: float = 0.1

    def __post_init__(self):
        if self.envelope != "gaussian":
            raise PulseError(f"unsupported envelope {self.envelope!r}")
        for name in ("energy_uJ", "peak_intensity_W_cm2", "waist_um", "strength"):
            val = getattr(self, name)
            if val is not None and val < 0:
                raise PulseError(f"{name} must be non-negative, got {val}")
        if self.duration_fwhm_fs <= 0:
            raise PulseError("duration must be positive")

    @property
    def fluence_J_cm2(self) -> float:
        return self.peak_intensity_W_cm2 * self.duration_fwhm_fs * 1e-15 * GAUSS_AREA

    def intensity_from_energy(self) -> float:
        """Peak intensity (W/cm^2) of a Gaussian beam with 1/e^2 radius ``waist_um``."""
        area_cm2 = math.pi * (self.waist_um * 1e-4) ** 2 / 2.0
        return self.energy_uJ * 1e-6 / (self.duration_fwhm_fs * 1e-15 * GAUSS_AREA * area_cm2)


def kick_strength(pulse: KickPulse, constants: MoleculeConstants) -> float:
    """Dimensionless kick strength P = Delta alpha * integral(E^2 dt) / (4 hbar).

    In polarizability-volume units this is P = 2 pi Delta alpha' F / (hbar c).
    """
    if pulse.strength is not None:
        return float(pulse.strength)
    if pulse.energy_uJ == 0 or pulse.peak_intensity_W_cm2 == 0:
        return 0.0
    intensity = pulse.peak_intensity_W_cm2
    if pulse.energy_uJ is not None and pulse.waist_um is not None:
        derived = pulse.intensity_from_energy()
        if intensity is None:
            intensity = derived
        elif abs(derived - intensity) > pulse.rel_tol * intensity:
            raise PulseError(
                f"energy {pulse.energy_uJ} uJ over a {pulse.waist_um} um waist and "
                f"{pulse.duration_fwhm_fs} fs implies {derived:.3e} W/cm^2, "
                f"but peak_intensity is {intensity:.3e} W/cm^2"
            )
    if intensity is None:
        raise PulseError("need peak intensity, energy with waist, or an explicit strength")
    fluence_SI = intensity * 1e4 * pulse.duration_fwhm_fs * 1e-15 * GAUSS_AREA
    dalpha_SI = constants.delta_alpha_A3 * 1e-30
    return 2.0 * math.pi * dalpha_SI * fluence_SI / (sc.hbar * sc.c)


def _top_shell_population(basis: RotorBasis, amps: np.ndarray) -> float:
    top = basis.n_values[-1]
    return float(sum(abs(amps[basis.index(top, M)]) ** 2 for M in range(-top, top + 1)))


def _check_leakage(basis: RotorBasis, amps: np.ndarray, limit: float) -> None:
    leak = _top_shell_population(basis, amps)
    if leak > limit:
        raise TruncationError(
            f"population {leak:.2e} in N={basis.n_max} exceeds {limit:.0e}; increase n_max"
        )


def kick_propagator_block(basis: RotorBasis, M: int, P: float) -> np.ndarray:
    """exp(i P cos^2 theta) restricted to the M block."""
    w, V = _cos2_eig(basis, M)
    return (V * np.exp(1j * P * w)) @ V.T


def apply_impulsive_kick(psi: WavePacket, P: float, leakage_limit: float = 1e-6) -> WavePacket:
    """Sudden-limit kick: psi -> exp(i P cos^2 theta) psi."""
    basis = psi.basis
    out = np.zeros_like(psi.amplitudes)
    for M in basis.m_values():
        _, idx = basis.block(M)
        c = psi.amplitudes[idx]
        if not np.any(c):
            continue
        out[idx] = kick_propagator_block(basis, M, P) @ c
    _check_leakage(basis, out, leakage_limit)
    return WavePacket(basis, out, psi.t_ref)


def rotational_frequencies(basis: RotorBasis, constants: MoleculeConstants, v: int = 0) -> np.ndarray:
    """Angular frequencies (rad/ps) of every basis state."""
    Ns = np.array([N for N, _ in basis.states])
    return 2.0 * np.pi * constants.term_thz(Ns, v)


def free_evolve(psi: WavePacket, constants: MoleculeConstants, t: float, v: int = 0) -> WavePacket:
    """Field-free evolution by t ps."""
    w = rotational_frequencies(psi.basis, constants, v)
    return WavePacket(psi.basis, psi.amplitudes * np.exp(-1j * w * t), psi.t_ref + t)


def evolve_tdse(
    psi: WavePacket,
    pulse: KickPulse,
    constants: MoleculeConstants,
    dt: float | None = None,
    *,
    strength: float | None = None,
    span: float = 4.0,
    v: int = 0,
    norm_tol: float = 1e-8,
    leakage_limit: float = 1e-6,
) -> WavePacket:
    """Propagate through a finite Gaussian pulse with the exponential midpoint rule.

    The pulse is centred ``span`` FWHM after ``psi.t_ref`` and the propagation
    covers 2*span FWHM.  ``dt`` is in fs.  The kick strength is taken from
    ``strength`` when given, otherwise from ``kick_strength(pulse, ...)``.
    """
    basis = psi.basis
    fwhm = pulse.duration_fwhm_fs * 1e-3  # ps
    P = kick_strength(pulse, constants) if strength is None else float(strength)
    w_states = rotational_frequencies(basis, constants, v)
    w_max = float(np.max(np.abs(w_states)))
    if dt is None:
        dt_ps = min(fwhm / 40.0, 0.25 / max(w_max, 1e-12))
    else:
        dt_ps = dt * 1e-3
        if dt_ps > fwhm / 20.0:
            raise IntegrationError(f"dt={dt} fs gives fewer than 20 steps per FWHM")
        if w_max * dt_ps > 0.5:
            raise IntegrationError(
                f"dt={dt} fs: fastest rotational phase advances {w_max * dt_ps:.2f} rad per step"
            )
    total = 2.0 * span * fwhm
    n_steps = int(math.ceil(total / dt_ps))
    dt_ps = total / n_steps
    t0 = span * fwhm
    mids = (np.arange(n_steps) + 0.5) * dt_ps
    rate = P * np.exp(-4.0 * math.log(2.0) * (mids - t0) ** 2 / fwhm**2) / (fwhm * GAUSS_AREA)

    out = psi.amplitudes.copy()
    for M in basis.m_values():
        Ns, idx = basis.block(M)
        c = out[idx]
        if not np.any(c):
            continue
        E = np.diag(w_states[idx])
        C = _cos2_block(basis, M)
        for r in rate:
            lam, V = np.linalg.eigh(E - r * C)
            c = V @ (np.exp(-1j * lam * dt_ps) * (V.conj().T @ c))
        out[idx] = c
    drift = abs(np.vdot(out, out).real - psi.norm)
    if drift > norm_tol:
        raise IntegrationError(f"norm drift {drift:.2e} exceeds {norm_tol:.0e}")
    _check_leakage(basis, out, leakage_limit)
    return WavePacket(basis, out, psi.t_ref + total)


def populations(psi: WavePacket) -> dict[int, float]:
    pops = {N: 0.0 for N in psi.basis.n_values}
    for (N, _), c in zip(psi.basis.states, psi.amplitudes):
        pops[N] += abs(c) ** 2
    return pops


def coherence(psi: WavePacket, N: int) -> complex:
    """sum_M c_{N,M} conj(c_{N+2,M})."""
    psi.basis.require(N, N + 2)
    return complex(
        sum(psi.amplitude(N, M) * np.conj(psi.amplitude(N + 2, M)) for M in range(-N, N + 1))
    )


@dataclass
class Ensemble:
    """Incoherent mixture of pure rotor states, as (weight, WavePacket) members."""

    members: list[tuple[float, WavePacket]] = field(default_factory=list)

    @classmethod
    def isotropic(cls, basis: RotorBasis, mixture: dict[int, float]) -> "Ensemble":
        """Each N level with weight p_N spread evenly over its 2N+1 M sublevels."""
        total = sum(mixture.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"mixture weights sum to {total}, not 1")
        if any(p < 0 for p in mixture.values()):
            raise ValueError("mixture weights must be non-negative")
        members = []
        for N, p in sorted(mixture.items()):
            if p == 0:
                continue
            for M in range(-N, N + 1):
                members.append((p / (2 * N + 1), WavePacket.eigenstate(basis, N, M)))
        return cls(members)

    def map(self, fn) -> "Ensemble":
        return Ensemble([(w, fn(psi)) for w, psi in self.members])

    def populations(self) -> dict[int, float]:
        out: dict[int, float] = {}
        for w, psi in self.members:
            for N, p in populations(psi).items():
                out[N] = out.get(N, 0.0) + w * p
        return out

    def coherence(self, N: int) -> complex:
        return sum((w * coherence(psi, N) for w, psi in self.members), 0j)


def ensemble_kick_coherences(
    basis: RotorBasis, mixture: dict[int, float], P: float, lines: Sequence[int] = (1, 3)
) -> dict[int, complex]:
    """Post-kick ensemble coherences for an isotropic mixture, block-wise.

    Same result as ``Ensemble.isotropic(...).map(kick).coherence(N)`` but each
    M block is propagated once for all initial N.
    """
    out = {N: 0j for N in lines}
    for M in basis.m_values():
        Ns, _ = basis.block(M)
        pos = {int(n): i for i, n in enumerate(Ns)}
        U = None
        for N0, p in mixture.items():
            if p == 0 or N0 not in pos:
                continue
            if U is None:
                U = kick_propagator_block(basis, M, P)
            col = U[:, pos[N0]]
            w = p / (2 * N0 + 1)
            for N in lines:
                if N in pos and N + 2 in pos:
                    out[N] += w * col[pos[N]] * np.conj(col[pos[N + 2]])
    return out


@dataclass(frozen=True)
class KickCalibration:
    """Linear map from kick energy (uJ) to kick strength P."""

    P_per_uJ: float

    def strength(self, energy_uJ):
        return self.P_per_uJ * np.asarray(energy_uJ, dtype=float)


def kick_populations(basis: RotorBasis, mixture: dict[int, float], P: float) -> dict[int, float]:
    ens = Ensemble.isotropic(basis, mixture).map(lambda psi: apply_impulsive_kick(psi, P, np.inf))
    return ens.populations()


def calibrate_energy_scale(
    energy_uJ: float = 3.5,
    pop3: float = 0.15,
    pop5: float = 0.02,
    basis: RotorBasis = RotorBasis(n_max=15),
    bounds: tuple[float, float] = (0.5, 5.0),
) -> KickCalibration:
    """Fit P_per_uJ so a kick of ``energy_uJ`` from N=1 matches both population anchors.

    The mismatch is measured in log space so the 15% and 2% anchors carry equal weight.
    """

    def cost(P):
        pops = kick_populations(basis, {1: 1.0}, P)
        return math.log(pops[3] / pop3) ** 2 + math.log(pops[5] / pop5) ** 2

    res = minimize_scalar(cost, bounds=bounds, method="bounded", options={"xatol": 1e-10})
    return KickCalibration(float(res.x) / energy_uJ)


@lru_cache(maxsize=None)
def default_calibration() -> KickCalibration:
    return calibrate_energy_scale()


def ld_amplitude_ratio(
    energies_uJ: Iterable[float],
    mixture: dict[int, float] | None = None,
    calibration: KickCalibration | None = None,
    basis: RotorBasis = RotorBasis(n_max=15),
    zero_tol: float = 1e-14,
) -> np.ndarray:
    """|LD_{3,5}| / |LD_{1,3}| right after the kick, one value per energy.

    Energies whose (1,3) coherence vanishes give NaN with a RuntimeWarning.
    """
    mixture = {1: 1.0} if mixture is None else dict(mixture)
    total = sum(mixture.values())
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"mixture weights sum to {total}, not 1")
    calibration = calibration or default_calibration()
    basis.require(1, 3, 5)
    out = []
    for E in energies_uJ:
        if E < 0:
            raise ValueError(f"kick energy must be non-negative, got {E}")
        coh = ensemble_kick_coherences(basis, mixture, float(calibration.strength(E)))
        if abs(coh[1]) <= zero_tol:
            warnings.warn(f"LD_1,3 coherence vanishes at {E} uJ; ratio undefined", RuntimeWarning)
            out.append(np.nan)
        else:
            out.append(abs(coh[3]) / abs(coh[1]))
    return np.array(out)
