"""Wigner 3j/6j symbols and cos^2(theta) matrix elements in the |N, M> basis."""

from functools import lru_cache
from math import factorial, sqrt


def _tri(a, b, c):
    if a + b < c or a + c < b or b + c < a:
        return None
    return factorial(a + b - c) * factorial(a - b + c) * factorial(-a + b + c) / factorial(a + b + c + 1)


@lru_cache(maxsize=None)
def wigner_3j(j1: int, j2: int, j3: int, m1: int, m2: int, m3: int) -> float:
    """Racah formula for integer arguments."""
    if m1 + m2 + m3 != 0:
        return 0.0
    if abs(m1) > j1 or abs(m2) > j2 or abs(m3) > j3:
        return 0.0
    delta = _tri(j1, j2, j3)
    if delta is None:
        return 0.0
    pref = sqrt(
        delta
        * factorial(j1 + m1) * factorial(j1 - m1)
        * factorial(j2 + m2) * factorial(j2 - m2)
        * factorial(j3 + m3) * factorial(j3 - m3)
    )
    kmin = max(0, j2 - j3 - m1, j1 - j3 + m2)
    kmax = min(j1 + j2 - j3, j1 - m1, j2 + m2)
    total = 0.0
    for k in range(kmin, kmax + 1):
        total += (-1) ** k / (
            factorial(k)
            * factorial(j1 + j2 - j3 - k)
            * factorial(j1 - m1 - k)
            * factorial(j2 + m2 - k)
            * factorial(j3 - j2 + m1 + k)
            * factorial(j3 - j1 - m2 + k)
        )
    return (-1) ** (j1 - j2 - m3) * pref * total


@lru_cache(maxsize=None)
def wigner_6j(j1: int, j2: int, j3: int, j4: int, j5: int, j6: int) -> float:
    """{j1 j2 j3; j4 j5 j6} for integer arguments."""
    triads = ((j1, j2, j3), (j1, j5, j6), (j4, j2, j6), (j4, j5, j3))
    deltas = [_tri(*t) for t in triads]
    if any(d is None for d in deltas):
        return 0.0
    pref = sqrt(deltas[0] * deltas[1] * deltas[2] * deltas[3])
    sums = [sum(t) for t in triads]
    kmin = max(sums)
    kmax = min(j1 + j2 + j4 + j5, j2 + j3 + j5 + j6, j3 + j1 + j6 + j4)
    total = 0.0
    for k in range(kmin, kmax + 1):
        total += (-1) ** k * factorial(k + 1) / (
            factorial(k - sums[0])
            * factorial(k - sums[1])
            * factorial(k - sums[2])
            * factorial(k - sums[3])
            * factorial(j1 + j2 + j4 + j5 - k)
            * factorial(j2 + j3 + j5 + j6 - k)
            * factorial(j3 + j1 + j6 + j4 - k)
        )
    return pref * total


def p2_element(n_bra: int, m_bra: int, n_ket: int, m_ket: int) -> float:
    """<N', M'| P_2(cos theta) |N, M>."""
    if m_bra != m_ket:
        return 0.0
    n_bra, n_ket, m = int(n_bra), int(n_ket), int(m_ket)
    return (
        (-1) ** m
        * sqrt((2 * n_bra + 1) * (2 * n_ket + 1))
        * wigner_3j(n_bra, 2, n_ket, 0, 0, 0)
        * wigner_3j(n_bra, 2, n_ket, -m, 0, m)
    )


def cos2_element(n_bra: int, m_bra: int, n_ket: int, m_ket: int) -> float:
    """<N', M'| cos^2 theta |N, M> = delta/3 + (2/3) <P_2>."""
    if m_bra != m_ket:
        return 0.0
    diag = 1.0 / 3.0 if n_bra == n_ket else 0.0
    return diag + 2.0 / 3.0 * p2_element(n_bra, m_bra, n_ket, m_ket)
