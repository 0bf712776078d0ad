"""Shared Fock-space machinery for the vibronic sideband model.

Holds the physical parameter record, generalized Laguerre / Bessel special
functions, the diagonal sideband coupling f_k(n; eta), the nonlinear
k-quantum Rabi frequency, and coherent-state amplitude vectors with an
explicit truncation policy.  Everything here is a pure function; factorial
ratios and Poisson weights are evaluated in log space so that pump
occupations of order 1e4 stay finite.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sp_special

from .errors import TruncationTooSmall

__all__ = [
    "ModelParams",
    "TruncationPolicy",
    "ComplexAmplitudeVector",
    "laguerre",
    "bessel_j",
    "coupling_f",
    "rabi_frequency",
    "coherent_vector",
    "suggest_truncation",
    "log_factorial_ratio",
    "poisson_weights",
    "poisson_tail",
]


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of the vibronic model, in units of |kappa|.

    k            sideband order (non-negative integer)
    eta          Lamb-Dicke parameter (> 0)
    delta_phi    standing-wave phase (radians)
    delta_omega_tilde  pump-sideband mismatch scaled by |kappa|
    nu_tilde     trap frequency scaled by |kappa|
    omega21_tilde electronic transition frequency scaled by |kappa|
    arg_kappa    coupling phase, fixed to 0
    """

    k: int
    eta: float
    delta_phi: float = 0.0
    delta_omega_tilde: float = 0.0
    nu_tilde: float = 0.0
    omega21_tilde: float = 0.0
    arg_kappa: float = 0.0

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 0:
            raise ValueError(f"k must be a non-negative integer, got {self.k}")
        object.__setattr__(self, "k", int(self.k))
        if not self.eta > 0:
            raise ValueError(f"eta must be > 0, got {self.eta}")
        if not math.isfinite(self.delta_omega_tilde):
            raise ValueError("delta_omega_tilde must be finite")
        if self.arg_kappa != 0.0:
            raise ValueError("arg_kappa is fixed to 0 in this model")


@dataclass(frozen=True)
class TruncationPolicy:
    """Fock cutoffs and the probability mass allowed to be discarded."""

    n_max_motion: int | None = None
    m_max_pump: int | None = None
    tail_epsilon: float = 1e-12

    def __post_init__(self):
        if not (0.0 < self.tail_epsilon < 1.0):
            raise ValueError("tail_epsilon must lie in (0, 1)")


@dataclass(frozen=True)
class ComplexAmplitudeVector:
    """Amplitudes over Fock numbers 0..N plus the discarded tail mass."""

    entries: np.ndarray
    tail_mass: float

    def norm_defect(self) -> float:
        return abs(float(np.sum(np.abs(self.entries) ** 2)) + self.tail_mass - 1.0)


def log_factorial_ratio(num: int, den: int) -> float:
    """log(num! / den!) via lgamma; safe for arguments well beyond 1e4."""
    return math.lgamma(num + 1) - math.lgamma(den + 1)


def laguerre(n: int, k: int, x):
    """Generalized Laguerre polynomial L_n^(k)(x) by forward recurrence.

    Accepts scalar or ndarray x. The upward n-recurrence is well behaved for
    the small arguments (x = eta^2 <= 0.1) and the filter arguments
    (x <= (2w)^2) used here.
    """
    if n < 0 or k < 0:
        raise ValueError("n and k must be non-negative")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if n == 0:
        return prev if prev.ndim else float(prev)
    cur = 1.0 + k - x
    for j in range(1, n):
        prev, cur = cur, ((2 * j + k + 1 - x) * cur - (j + k) * prev) / (j + 1)
    return cur if cur.ndim else float(cur)


def bessel_j(order: int, x):
    """Bessel function of the first kind J_order(x), integer order.

    Negative orders use J_{-n}(x) = (-1)^n J_n(x). Accepts scalar or array x.
    """
    order = int(order)
    sign = 1.0
    if order < 0:
        order = -order
        sign = -1.0 if order % 2 else 1.0
    out = sign * sp_special.jv(order, np.asarray(x, dtype=float))
    return out if out.ndim else float(out)


def coupling_f(n: int, params: ModelParams) -> complex:
    """Diagonal sideband coupling f_k(n; eta) = <n| f_k(a^dag a; eta) |n>.

    f_k(n; eta) = (1/2) e^{i d_phi - eta^2/2} (i eta)^k n!/(n+k)! L_n^(k)(eta^2)
    plus the complex conjugate of that term, so the value is always real
    (returned as complex for interface uniformity).
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    k, eta = params.k, params.eta
    log_ratio = -log_factorial_ratio(n + k, n)  # log(n!/(n+k)!)
    term = (
        0.5
        * cmath.exp(1j * params.delta_phi - eta**2 / 2.0 + log_ratio)
        * (1j * eta) ** k
        * laguerre(n, k, eta**2)
    )
    return term + term.conjugate()


def _coupling_f_array(n_max: int, params: ModelParams) -> np.ndarray:
    """f_k(n; eta) for n = 0..n_max as a real array."""
    k, eta = params.k, params.eta
    ns = np.arange(n_max + 1)
    log_ratio = sp_special.gammaln(ns + 1) - sp_special.gammaln(ns + k + 1)
    lag = np.array([laguerre(int(n), k, eta**2) for n in ns])
    scale = math.exp(-(eta**2) / 2.0) * eta**k * math.cos(params.delta_phi + k * math.pi / 2.0)
    return scale * np.exp(log_ratio) * lag


def rabi_frequency(m: int, n: int, params: ModelParams) -> complex:
    """Nonlinear k-quantum Rabi frequency in units of |kappa|.

    Omega_mn = 2 sqrt(m+1) f_k(n; eta) sqrt((n+k)!/n!), with the coupling
    phase fixed to arg(kappa) = 0.
    """
    if m < 0 or n < 0:
        raise ValueError("m and n must be non-negative")
    root_ratio = math.exp(0.5 * log_factorial_ratio(n + params.k, n))
    return 2.0 * math.sqrt(m + 1.0) * coupling_f(n, params) * root_ratio


def coupling_root_array(n_max: int, params: ModelParams) -> np.ndarray:
    """f_k(n; eta) * sqrt((n+k)!/n!) for n = 0..n_max (half of Omega_0n)."""
    ns = np.arange(n_max + 1)
    log_root = 0.5 * (sp_special.gammaln(ns + params.k + 1) - sp_special.gammaln(ns + 1))
    return _coupling_f_array(n_max, params) * np.exp(log_root)


def poisson_log_pmf(j: np.ndarray, lam: float) -> np.ndarray:
    if lam == 0.0:
        return np.where(j == 0, 0.0, -np.inf)
    return -lam + j * math.log(lam) - sp_special.gammaln(j + 1)


def poisson_tail(n: int, lam: float) -> float:
    """Probability mass of Poisson(lam) strictly above n, summed smallest-first."""
    if lam == 0.0:
        return 0.0
    j_hi = _poisson_upper(lam)
    if n >= j_hi:
        return 0.0
    js = np.arange(n + 1, j_hi + 1)
    pmf = np.exp(poisson_log_pmf(js, lam))
    return float(np.sum(pmf[::-1]))


def _poisson_upper(lam: float) -> int:
    return int(math.ceil(lam + 14.0 * math.sqrt(lam) + 40.0))


def poisson_weights(lam: float, weight_floor: float | None = None):
    """Poisson(lam) weights above a relative floor.

    Returns (j0, weights, discarded) where weights[i] is the pmf at j0 + i.
    The floor defaults to 1e-16 divided by the provisional window length so
    that the discarded mass stays far below any observable tolerance.
    """
    if lam == 0.0:
        return 0, np.array([1.0]), 0.0
    j_hi = _poisson_upper(lam)
    js = np.arange(0, j_hi + 1)
    pmf = np.exp(poisson_log_pmf(js, lam))
    if weight_floor is None:
        weight_floor = 1e-16 / len(js)
    keep = np.nonzero(pmf > weight_floor)[0]
    j0, j1 = int(keep[0]), int(keep[-1])
    weights = pmf[j0 : j1 + 1]
    discarded = max(0.0, 1.0 - float(np.sum(weights[::-1])))
    return j0, weights, discarded


def suggest_truncation(alpha0_abs: float, tail_epsilon: float) -> int:
    """Smallest cutoff N whose Poisson(|alpha0|^2) mass above N is < tail_epsilon."""
    if not (0.0 < tail_epsilon < 1.0):
        raise ValueError("tail_epsilon must lie in (0, 1)")
    lam = float(alpha0_abs) ** 2
    if lam == 0.0:
        return 0
    j_hi = _poisson_upper(lam)
    js = np.arange(0, j_hi + 2)
    pmf = np.exp(poisson_log_pmf(js, lam))
    # tail[N] = sum of pmf above N, accumulated from the small end
    tails = np.cumsum(pmf[::-1])[::-1]
    below = np.nonzero(tails[1:] < tail_epsilon)[0]
    if len(below) == 0:
        raise TruncationTooSmall(
            f"no cutoff below {j_hi} reaches tail mass {tail_epsilon}"
        )
    return int(below[0])


def coherent_vector(alpha0: complex, policy: TruncationPolicy) -> ComplexAmplitudeVector:
    """Coherent-state amplitudes e^{-|a0|^2/2} a0^n / sqrt(n!) up to the policy cutoff.

    Raises TruncationTooSmall when the requested cutoff discards more than
    policy.tail_epsilon of the probability mass.
    """
    alpha0 = complex(alpha0)
    a_abs = abs(alpha0)
    n_max = policy.n_max_motion
    if n_max is None:
        n_max = suggest_truncation(a_abs, policy.tail_epsilon)
    tail = poisson_tail(n_max, a_abs**2)
    if tail > policy.tail_epsilon:
        raise TruncationTooSmall(
            f"cutoff {n_max} leaves tail mass {tail:.3e} > {policy.tail_epsilon:.3e}"
        )
    ns = np.arange(n_max + 1)
    if a_abs == 0.0:
        mag = np.zeros(n_max + 1)
        mag[0] = 1.0
    else:
        mag = np.exp(-0.5 * a_abs**2 + ns * math.log(a_abs) - 0.5 * sp_special.gammaln(ns + 1))
    phase = np.exp(1j * ns * cmath.phase(alpha0)) if alpha0 != 0 else np.ones(n_max + 1)
    return ComplexAmplitudeVector(entries=mag * phase, tail_mass=tail)
