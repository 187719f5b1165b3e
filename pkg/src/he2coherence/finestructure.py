"""Spin-rotation / spin-spin fine structure of a 3-Sigma state and LD beat frequencies.

Effective Hamiltonian in the Hund's case (b) basis |N, S=1, J>:

    H = B N(N+1) - D [N(N+1)]^2 + gamma N.S + (2/3) lambda (3 S_z^2 - S^2)

gamma N.S is diagonal; the spin-spin term also couples N = J-1 with N = J+1.
Offsets are reported in GHz relative to the spin-free term value of N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .angular import wigner_3j, wigner_6j
from .rotor import MoleculeConstants

SPLITTING_SCALE_GHZ = 10.0


@dataclass(frozen=True)
class FineLevel:
    N: int
    J: int
    offset_ghz: float


@dataclass(frozen=True)
class TransitionPair:
    J1: int
    J2: int
    N1: int = 1
    N2: int = 3
    beat_thz: float = float("nan")
    weight: float = 1.0


def _term_ghz(constants: MoleculeConstants, N: int, v: int) -> float:
    return 1e3 * float(constants.term_thz(N, v))


def _spin_rotation(J: int, N: int) -> float:
    return 0.5 * (J * (J + 1) - N * (N + 1) - 2)


def spin_spin_element(n_bra: int, n_ket: int, J: int) -> float:
    """<N' S=1 J| (2/3)(3 S_z^2 - S^2) |N S=1 J> via the tensor product formula (lambda = 1)."""
    S = 1
    reduced_c = (-1) ** n_bra * math.sqrt((2 * n_ket + 1) * (2 * n_bra + 1)) * wigner_3j(
        n_bra, 2, n_ket, 0, 0, 0
    )
    reduced_s = math.sqrt(5.0)  # <S=1|| T^2(S, S) ||S=1>
    return (
        (2.0 / 3.0)
        * math.sqrt(6.0)
        * (-1) ** (n_ket + S + J)
        * wigner_6j(J, S, n_bra, 2, n_ket, S)
        * reduced_c
        * reduced_s
    )


def j_block(J: int, constants: MoleculeConstants, v: int = 0) -> tuple[list[int], np.ndarray]:
    """Full case (b) Hamiltonian block of total angular momentum J, in GHz."""
    Ns = [N for N in (J - 1, J, J + 1) if N >= 0 and abs(N - J) <= 1]
    lam, gam = constants.lambda_ss_ghz, constants.gamma_sr_ghz
    H = np.zeros((len(Ns), len(Ns)))
    for i, a in enumerate(Ns):
        for k, b in enumerate(Ns):
            H[i, k] = lam * spin_spin_element(a, b, J)
            if i == k:
                H[i, k] += _term_ghz(constants, a, v) + gam * _spin_rotation(J, a)
    return Ns, H


def _levels_by_diagonalization(N: int, constants: MoleculeConstants, v: int) -> dict[int, float]:
    out = {}
    for J in (N - 1, N, N + 1):
        if J < 0:
            continue
        Ns, H = j_block(J, constants, v)
        # the N = J state has opposite parity and stays uncoupled; the J-1/J+1 pair mixes
        same_parity = [i for i, n in enumerate(Ns) if (n - N) % 2 == 0]
        sub = H[np.ix_(same_parity, same_parity)]
        vals = np.linalg.eigvalsh(sub)
        order = [Ns[i] for i in same_parity]
        # eigenvalues ordered like the diagonal when B >> lambda
        pos = sorted(range(len(order)), key=lambda i: sub[i, i]).index(order.index(N))
        out[J] = float(vals[pos]) - _term_ghz(constants, N, v)
    return out


def _levels_closed_form(N: int, constants: MoleculeConstants, v: int) -> dict[int, float]:
    lam, gam = constants.lambda_ss_ghz, constants.gamma_sr_ghz
    term = lambda n: _term_ghz(constants, n, v)  # noqa: E731

    def pair(J):
        # (N=J-1, N=J+1) block: returns (lower, upper) eigenvalue
        lo = term(J - 1) + gam * (J - 1) - 2 * lam * (J - 1) / (3 * (2 * J + 1))
        hi = term(J + 1) - gam * (J + 2) - 2 * lam * (J + 2) / (3 * (2 * J + 1))
        off = 2 * lam * math.sqrt(J * (J + 1)) / (2 * J + 1)
        mean, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        root = math.copysign(math.sqrt(half * half + off * off), half)
        return mean - root, mean + root

    levels = {N: 2 * lam / 3 - gam}
    levels[N + 1] = pair(N + 1)[0] - term(N)
    if N == 1:
        # J = 0 has no N = -1 partner
        levels[0] = -2 * gam - 4 * lam / 3
    else:
        levels[N - 1] = pair(N - 1)[1] - term(N)
    return levels


def fine_levels(N: int, constants: MoleculeConstants, v: int = 0, method: str = "closed") -> list[FineLevel]:
    """The three J = N-1, N, N+1 levels of rotational level N (odd N only)."""
    if N < 1 or N % 2 == 0:
        raise ValueError(f"N={N} is not in the odd-N manifold")
    if method == "closed":
        offs = _levels_closed_form(N, constants, v)
    elif method == "diag":
        offs = _levels_by_diagonalization(N, constants, v)
    else:
        raise ValueError(f"unknown method {method!r}")
    return [FineLevel(N, J, offs[J]) for J in sorted(offs)]


def reachable(J1: int, J2: int) -> bool:
    """Two two-photon steps with Delta J in {0, +-2} through a shared intermediate J."""
    return any(
        abs(J1 - Jd) in (0, 2) and abs(J2 - Jd) in (0, 2) for Jd in range(max(0, min(J1, J2) - 2), max(J1, J2) + 3)
    )


def allowed_pairs(N1: int, N2: int) -> list[TransitionPair]:
    if N2 != N1 + 2:
        raise ValueError(f"coherence pairs need N2 = N1 + 2, got ({N1}, {N2})")
    if N1 < 1 or N1 % 2 == 0:
        raise ValueError(f"N1={N1} is not in the odd-N manifold")
    J1s = [J for J in (N1 - 1, N1, N1 + 1) if J >= 0]
    J2s = [N2 - 1, N2, N2 + 1]
    return [TransitionPair(a, b, N1, N2) for a, b in product(J1s, J2s) if reachable(a, b)]


def beat_frequencies(
    pairs: list[TransitionPair], constants: MoleculeConstants, v: int = 0
) -> list[TransitionPair]:
    """Attach nu^k = [E(N2, J2) - E(N1, J1)] / h (THz) to each pair."""
    out = []
    for p in pairs:
        lo = {lv.J: lv.offset_ghz for lv in fine_levels(p.N1, constants, v)}
        hi = {lv.J: lv.offset_ghz for lv in fine_levels(p.N2, constants, v)}
        if p.J1 not in lo or p.J2 not in hi:
            raise ValueError(f"pair ({p.J1}, {p.J2}) inconsistent with N=({p.N1}, {p.N2})")
        nu = constants.line_thz(p.N1, v) + 1e-3 * (hi[p.J2] - lo[p.J1])
        out.append(TransitionPair(p.J1, p.J2, p.N1, p.N2, nu, p.weight))
    return out


def line_pairs(N1: int, constants: MoleculeConstants, v: int = 0, weights=None) -> list[TransitionPair]:
    """Allowed pairs of the (N1, N1+2) line with beat frequencies and weights."""
    pairs = allowed_pairs(N1, N1 + 2)
    if weights is not None:
        if len(weights) != len(pairs):
            raise ValueError(f"{len(pairs)} pairs but {len(weights)} weights")
        pairs = [TransitionPair(p.J1, p.J2, p.N1, p.N2, p.beat_thz, float(w)) for p, w in zip(pairs, weights)]
    return beat_frequencies(pairs, constants, v)


def splitting_ghz(N: int, constants: MoleculeConstants, v: int = 0) -> float:
    """Spread (max - min) of the fine-structure offsets of level N."""
    offs = [lv.offset_ghz for lv in fine_levels(N, constants, v)]
    return max(offs) - min(offs)
