"""Independent reference implementations used only by the tests.

Everything here is deliberately written from first principles (series,
brute-force matrices, matrix exponentials) and stays independent of the
code paths it checks.
"""

import math

import numpy as np
import scipy.linalg as sla


def laguerre_series(n: int, k: int, x: float) -> float:
    """L_n^(k)(x) as the explicit finite sum in exact rational arithmetic."""
    from fractions import Fraction

    xf = Fraction(x)
    total = Fraction(0)
    for j in range(n + 1):
        total += Fraction(math.comb(n + k, n - j)) * (-xf) ** j / math.factorial(j)
    return float(total)


def bessel_series(order: int, x: float) -> float:
    """J_order(x) by the ascending power series (small |x| only)."""
    order = abs(order)
    total = 0.0
    term_log = order * math.log(x / 2.0) - math.lgamma(order + 1) if x > 0 else None
    if x == 0.0:
        return 1.0 if order == 0 else 0.0
    term = math.exp(term_log)
    total = term
    j = 0
    while True:
        j += 1
        term *= -(x / 2.0) ** 2 / (j * (j + order))
        total += term
        if abs(term) < 1e-18 * abs(total) or j > 400:
            break
    return total


def bessel_miller(order: int, x: float) -> float:
    """J_order(x) by Miller's downward recurrence with sum normalization."""
    order = abs(order)
    if x == 0.0:
        return 1.0 if order == 0 else 0.0
    m_start = 2 * ((max(order, int(x)) + int(40 + 10 * math.sqrt(max(order, int(x))))) // 2 + 1)
    jp, j = 0.0, 1e-300
    norm = 0.0
    result = 0.0
    for m in range(m_start, 0, -1):
        jm = (2.0 * m / x) * j - jp
        jp, j = j, jm
        if abs(j) > 1e250:
            j *= 1e-250
            jp *= 1e-250
            norm *= 1e-250
            result *= 1e-250
        if m - 1 == order:
            result = j
        if (m - 1) % 2 == 0 and m - 1 > 0:
            norm += 2.0 * j
    norm += j
    return result / norm


def bessel_reference(order: int, x: float) -> float:
    sign = 1.0
    if order < 0:
        order = -order
        sign = -1.0 if order % 2 else 1.0
    if x < 0:
        raise ValueError("x must be >= 0")
    val = bessel_series(order, x) if x <= 12.0 else bessel_miller(order, x)
    return sign * val


def mode_function_element(n: int, k: int, eta: float, dphi: float, dim: int = 90) -> float:
    """<n| cos(eta (a + a^dag) + dphi) |n+k> by brute-force diagonalization."""
    a = np.diag(np.sqrt(np.arange(1, dim)), 1)
    x = eta * (a + a.T)
    evals, vecs = np.linalg.eigh(x)
    gmat = vecs @ np.diag(np.cos(evals + dphi)) @ vecs.T
    return float(gmat[n, n + k])


def displacement_element(n: int, m: int, beta: complex, dim: int = 80) -> complex:
    """<n| exp(beta a^dag - beta* a) |m> via the matrix exponential."""
    a = np.diag(np.sqrt(np.arange(1, dim)), 1).astype(complex)
    d = sla.expm(beta * a.conj().T - np.conj(beta) * a)
    return complex(d[n, m])


def partial_trace_vib(state, n_vib: int) -> np.ndarray:
    """Motional density matrix of a sparse composite pure state."""
    buckets = {}
    for (i, m, n), amp in state.amplitudes.items():
        vec = buckets.setdefault((i, m), np.zeros(n_vib, dtype=complex))
        vec[n] += amp
    rho = np.zeros((n_vib, n_vib), dtype=complex)
    for vec in buckets.values():
        rho += np.outer(vec, vec.conj())
    return rho


def random_density_matrix(rng, dim: int) -> np.ndarray:
    """Trace-one positive matrix from a Ginibre draw."""
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real
