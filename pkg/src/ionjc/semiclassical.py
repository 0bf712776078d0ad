"""Classical-pump sideband model in scaled units.

The interaction-picture Hamiltonian oscillates as e^{-i r tau} with the
scaled mismatch r, so evolution requires time ordering.  This module
provides the numerically time-ordered propagation (adaptive embedded
Runge-Kutta on the Schroedinger equation) and the closed-form solution
obtained when the ordering prescription is dropped, i.e. when the
exponential of the plainly integrated Hamiltonian is used instead.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import StepFailure, TruncationTooSmall
from .fock_core import (
    ModelParams,
    TruncationPolicy,
    coherent_vector,
    coupling_root_array,
    poisson_log_pmf,
    poisson_tail,
    suggest_truncation,
)

__all__ = [
    "ScaledTime",
    "VibronicState",
    "PropagationResult",
    "OrderingDivergence",
    "h_function",
    "h_over_r",
    "interaction_generator",
    "propagate_time_ordered",
    "propagate_dense",
    "sigma22_no_ordering",
    "compare_ordering",
    "ground_coherent_state",
]

DEFAULT_TOL = 1e-10


@dataclass(frozen=True)
class ScaledTime:
    """Dimensionless time window: tau = |kappa beta_cl| t, mismatch r."""

    tau: float
    tau0: float = 0.0
    r: float = 0.0

    def __post_init__(self):
        if self.tau < self.tau0:
            raise ValueError("tau must be >= tau0")


@dataclass
class VibronicState:
    """Amplitudes over |1, n> and |2, n> for n = 0..cutoff."""

    amp_ground: np.ndarray
    amp_excited: np.ndarray
    cutoff: int

    def __post_init__(self):
        self.amp_ground = np.asarray(self.amp_ground, dtype=complex)
        self.amp_excited = np.asarray(self.amp_excited, dtype=complex)
        if len(self.amp_ground) != self.cutoff + 1 or len(self.amp_excited) != self.cutoff + 1:
            raise ValueError("amplitude arrays must have length cutoff + 1")

    def norm(self) -> float:
        return math.sqrt(
            float(np.sum(np.abs(self.amp_ground) ** 2) + np.sum(np.abs(self.amp_excited) ** 2))
        )

    def sigma22(self) -> float:
        return float(np.sum(np.abs(self.amp_excited) ** 2))


def ground_coherent_state(alpha0: complex, params: ModelParams,
                          policy: TruncationPolicy | None = None) -> VibronicState:
    """|1, alpha0>: electronic ground state, coherent motion, truncated."""
    policy = policy or TruncationPolicy()
    vec = coherent_vector(alpha0, policy)
    n_max = len(vec.entries) - 1
    return VibronicState(
        amp_ground=vec.entries.copy(),
        amp_excited=np.zeros(n_max + 1, dtype=complex),
        cutoff=n_max,
    )


def h_function(st: ScaledTime) -> complex:
    """h(tau) = i (e^{-i r tau} - e^{-i r tau0})."""
    return 1j * (cmath.exp(-1j * st.r * st.tau) - cmath.exp(-1j * st.r * st.tau0))


def h_over_r(st: ScaledTime) -> complex:
    """h(tau)/r with the removable r -> 0 limit (tau - tau0) implemented.

    Uses h(tau) = 2 e^{-i r (tau+tau0)/2} sin(r (tau-tau0)/2), so the r = 0
    branch returns tau - tau0 exactly.
    """
    dt = st.tau - st.tau0
    if st.r == 0.0:
        return complex(dt)
    return cmath.exp(-1j * st.r * (st.tau + st.tau0) / 2.0) * 2.0 * math.sin(st.r * dt / 2.0) / st.r


def interaction_generator(t_scaled: float, r: float, params: ModelParams,
                          cutoff: int) -> np.ndarray:
    """Interaction-picture Hamiltonian at scaled time tau, in units of |kappa beta_cl|.

    Basis ordering: |1,0>..|1,N>, |2,0>..|2,N|.  The only nonzero elements
    couple <2, n| to |1, n+k> with e^{-i r tau} f_k(n; eta) sqrt((n+k)!/n!).
    """
    if cutoff < params.k:
        raise ValueError("cutoff must be at least the sideband order k")
    n_pairs = cutoff - params.k + 1
    g = coupling_root_array(n_pairs - 1, params)
    dim = 2 * (cutoff + 1)
    h = np.zeros((dim, dim), dtype=complex)
    phase = cmath.exp(-1j * r * t_scaled)
    for n in range(n_pairs):
        row = (cutoff + 1) + n          # |2, n>
        col = n + params.k              # |1, n+k>
        h[row, col] = phase * g[n]
        h[col, row] = np.conj(phase * g[n])
    return h


@dataclass
class PropagationResult:
    """Sampled time-ordered evolution on a tau grid."""

    taus: np.ndarray
    amp_ground: np.ndarray   # shape (T, N+1)
    amp_excited: np.ndarray  # shape (T, N+1)
    cutoff: int
    norm_drift: float
    tol: float

    def state_at(self, i: int) -> VibronicState:
        return VibronicState(self.amp_ground[i].copy(), self.amp_excited[i].copy(), self.cutoff)

    def sigma22(self) -> np.ndarray:
        return np.sum(np.abs(self.amp_excited) ** 2, axis=1)


class _DenseSolution:
    """Wraps the integrator's dense output for evaluation at arbitrary tau."""

    def __init__(self, sol, cutoff: int, tol: float):
        self._sol = sol
        self.cutoff = cutoff
        self.tol = tol

    def amplitudes(self, taus: np.ndarray):
        y = self._sol.sol(np.asarray(taus, dtype=float))
        n = self.cutoff + 1
        return y[:n].T, y[n:].T

    def sigma22(self, taus) -> np.ndarray:
        _, exc = self.amplitudes(np.atleast_1d(np.asarray(taus, dtype=float)))
        return np.sum(np.abs(exc) ** 2, axis=1)


def _solve_dense(psi0: VibronicState, r: float, tau0: float, tau1: float,
                 params: ModelParams, tol: float) -> _DenseSolution:
    n = psi0.cutoff + 1
    k = params.k
    n_pairs = psi0.cutoff - k + 1
    if n_pairs < 1:
        raise ValueError("cutoff must be at least the sideband order k")
    g = coupling_root_array(n_pairs - 1, params)

    def rhs(tau, y):
        gnd, exc = y[:n], y[n:]
        dy = np.zeros_like(y)
        ph = cmath.exp(-1j * r * tau)
        dy[n : n + n_pairs] = -1j * ph * g * gnd[k : k + n_pairs]
        dy[k : k + n_pairs] = -1j * np.conj(ph) * g * exc[:n_pairs]
        return dy

    y0 = np.concatenate([psi0.amp_ground, psi0.amp_excited]).astype(complex)
    sol = solve_ivp(
        rhs,
        (tau0, tau1),
        y0,
        method="DOP853",
        rtol=tol,
        atol=tol,
        dense_output=True,
    )
    if not sol.success:
        raise StepFailure(sol.message)
    return _DenseSolution(sol, psi0.cutoff, tol)


def propagate_dense(psi0: VibronicState, st: ScaledTime, params: ModelParams,
                    tol: float = DEFAULT_TOL) -> _DenseSolution:
    """Time-ordered propagation returning a dense interpolant over [tau0, tau]."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    return _solve_dense(psi0, st.r, st.tau0, st.tau, params, tol)


def propagate_time_ordered(psi0: VibronicState, st: ScaledTime, params: ModelParams,
                           tol: float = DEFAULT_TOL, n_points: int = 2000,
                           taus: np.ndarray | None = None) -> PropagationResult:
    """Solve i d|psi>/dtau = H(tau) |psi| on a tau grid with adaptive stepping.

    The local error per step is controlled at `tol`; the returned result
    records the worst norm drift over the sampled grid.
    """
    dense = propagate_dense(psi0, st, params, tol)
    if taus is None:
        taus = np.linspace(st.tau0, st.tau, n_points)
    else:
        taus = np.asarray(taus, dtype=float)
    gnd, exc = dense.amplitudes(taus)
    norms = np.sqrt(np.sum(np.abs(gnd) ** 2, axis=1) + np.sum(np.abs(exc) ** 2, axis=1))
    drift = float(np.max(np.abs(norms - psi0.norm())))
    return PropagationResult(
        taus=taus,
        amp_ground=gnd,
        amp_excited=exc,
        cutoff=psi0.cutoff,
        norm_drift=drift,
        tol=tol,
    )


def sigma22_no_ordering(tau, alpha0: complex, params: ModelParams, st: ScaledTime,
                        policy: TruncationPolicy | None = None):
    """Excited-state population of the integrated-exponential (no-ordering) propagator.

    Starting from |1, alpha0> at tau0, evaluates the four-fold dressed sign
    sum with eigenfrequencies +/- |f_k(n) h(tau)| / r * sqrt((n+k)!/n!) and
    Poisson weights at n + k.  Scalar or array tau.
    """
    policy = policy or TruncationPolicy()
    taus = np.atleast_1d(np.asarray(tau, dtype=float))
    scalar_in = np.isscalar(tau) or np.asarray(tau).ndim == 0

    k = params.k
    lam = abs(alpha0) ** 2
    n_max = policy.n_max_motion
    if n_max is None:
        n_max = suggest_truncation(abs(alpha0), policy.tail_epsilon)
    else:
        if poisson_tail(n_max, lam) > policy.tail_epsilon:
            raise TruncationTooSmall(
                f"n_max_motion={n_max} leaves more than {policy.tail_epsilon} mass"
            )
    n_blocks = n_max - k + 1
    if n_blocks < 1:
        return 0.0 if scalar_in else np.zeros_like(taus)

    ns = np.arange(n_blocks)
    if lam == 0.0:
        weights = np.zeros(n_blocks)
        if k == 0:
            weights[0] = 1.0
    else:
        weights = np.exp(poisson_log_pmf(ns + k, lam))
    g = coupling_root_array(n_blocks - 1, params)  # f_k(n) sqrt((n+k)!/n!)

    h_vals = np.array([h_function(ScaledTime(t, st.tau0, st.r)) for t in taus])
    if st.r == 0.0:
        habs_over_r = taus - st.tau0
    else:
        habs_over_r = np.abs(h_vals) / st.r
    # omega_n^sigma(tau) = sigma * |f_k(n) h| / r * sqrt((n+k)!/n!)
    omega_p = np.abs(g)[None, :] * habs_over_r[:, None]
    theta = np.angle(h_vals)[:, None] + np.angle(g + 0j)[None, :]
    alpha_p = np.exp(-1j * theta)
    alpha_m = -alpha_p

    total = np.zeros((len(taus), n_blocks), dtype=complex)
    for sig, a_sig, w_sig in ((+1, alpha_p, omega_p), (-1, alpha_m, -omega_p)):
        for sigp, a_sigp, w_sigp in ((+1, alpha_p, omega_p), (-1, alpha_m, -omega_p)):
            total += np.exp(1j * (w_sig - w_sigp)) * np.conj(a_sigp) * a_sig
    out = 0.25 * np.real(total) @ weights
    return float(out[0]) if scalar_in else out


@dataclass
class OrderingDivergence:
    """Gap between time-ordered and no-ordering excited-state populations."""

    taus: np.ndarray
    sigma22_ordered: np.ndarray
    sigma22_no_ordering: np.ndarray
    sup_distance: float
    threshold: float
    first_crossing_tau: float | None = None
    gaps: np.ndarray = field(default=None, repr=False)


def compare_ordering(params: ModelParams, alpha0: complex, st: ScaledTime,
                     taus: np.ndarray | None = None, threshold: float = 0.1,
                     tol: float = DEFAULT_TOL, n_points: int = 2000,
                     policy: TruncationPolicy | None = None) -> OrderingDivergence:
    """Run both solvers from |1, alpha0> and report their sup-norm distance."""
    policy = policy or TruncationPolicy()
    psi0 = ground_coherent_state(alpha0, params, policy)
    result = propagate_time_ordered(psi0, st, params, tol=tol, n_points=n_points, taus=taus)
    s_ord = result.sigma22()
    s_no = sigma22_no_ordering(result.taus, alpha0, params, st, policy)
    gaps = np.abs(s_ord - s_no)
    sup = float(np.max(gaps))
    crossing = None
    above = np.nonzero(gaps > threshold)[0]
    if len(above) > 0:
        crossing = float(result.taus[above[0]])
    return OrderingDivergence(
        taus=result.taus,
        sigma22_ordered=s_ord,
        sigma22_no_ordering=s_no,
        sup_distance=sup,
        threshold=threshold,
        first_crossing_tau=crossing,
        gaps=gaps,
    )
