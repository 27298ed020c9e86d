"""Single k = 0 mode: truncated-Fock exact diagonalization and squeezed-vacuum analytics."""

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import linalg, optimize
from scipy.integrate import cumulative_trapezoid
from scipy.special import gammaln, logsumexp

from nh_spinwave.backend.config import Config
from nh_spinwave.backend.models import Flavor, ModelParams, SqueezeParams
from nh_spinwave.backend.lattice import bosonic_coeffs
from nh_spinwave.backend.dynamics import DivergenceReport, propagate_modes
from nh_spinwave.backend.logger import GLOBAL_LOGGER as log
from nh_spinwave.backend.exception.custom_exception import DomainError, NumericalFailure

NORM_FLOOR = 1e-300


@dataclass(frozen=True)
class FockVector:
    amplitudes: np.ndarray

    @property
    def n_max(self) -> int:
        return len(self.amplitudes) - 1

    def norm(self) -> float:
        return float(np.sqrt(np.vdot(self.amplitudes, self.amplitudes).real))

    def normalized(self) -> "FockVector":
        return FockVector(self.amplitudes / self.norm())

    def overlap(self, other: "FockVector") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True)
class ModeSeries:
    """Correlators of the single mode along a run.

    ``log_norm`` is log of the squared norm of the unnormalised state;
    ``n2`` is <n n>. ``states`` is only filled by the exact evolution.
    """

    times: np.ndarray
    g: np.ndarray
    f: np.ndarray
    n2: np.ndarray
    log_norm: np.ndarray
    states: Optional[np.ndarray] = None
    divergence: Optional[DivergenceReport] = None

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "t": self.times,
                "G": self.g,
                "Re_F": self.f.real,
                "Im_F": self.f.imag,
                "norm_log": self.log_norm,
            }
        )


# ------------------------------------------------------------------
# OPERATORS
# ------------------------------------------------------------------
def annihilation(n_max: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), k=1).astype(complex)


def single_mode_coeffs(params: ModelParams) -> Tuple[complex, complex]:
    coeffs = bosonic_coeffs(params, np.zeros(params.dimension))
    return complex(coeffs.a), complex(coeffs.b)


def build_single_mode_hamiltonian(params: ModelParams, n_max: int = Config.N_MAX) -> np.ndarray:
    """(A/2)(a^dag a + a a^dag) + (B/2)(a^dag a^dag + a a) - (i gamma'/2)(a^dag a)^2 on |0>..|n_max>."""
    if n_max < 4:
        raise DomainError(f"n_max must be at least 4 (got {n_max})")

    A, B = single_mode_coeffs(params)
    n = np.arange(n_max + 1, dtype=float)
    a = annihilation(n_max)
    adag = a.T

    H = 0.5 * A * np.diag(2.0 * n + 1.0) + 0.5 * B * (adag @ adag + a @ a)
    H = H - 0.5j * params.gamma_prime * np.diag(n * n)
    return H


# ------------------------------------------------------------------
# SQUEEZED VACUUM
# ------------------------------------------------------------------
def _smsv_log_weights(r: float, n: np.ndarray) -> np.ndarray:
    """log of |<2n|SMSV>|^2 * cosh(r), without the phase."""
    return 2.0 * n * math.log(math.tanh(r)) + gammaln(2 * n + 1) - 2.0 * gammaln(n + 1) - 2.0 * n * math.log(2.0)


def squeezed_vacuum(squeeze: SqueezeParams, n_max: int = Config.N_MAX) -> FockVector:
    amplitudes = np.zeros(n_max + 1, dtype=complex)
    if squeeze.r == 0.0:
        amplitudes[0] = 1.0
        return FockVector(amplitudes)

    n = np.arange(n_max // 2 + 1)
    magnitude = np.exp(0.5 * _smsv_log_weights(squeeze.r, n))
    amplitudes[2 * n] = magnitude * (-np.exp(1j * squeeze.phi)) ** n / math.sqrt(math.cosh(squeeze.r))
    return FockVector(amplitudes).normalized()


def norm_series(
    squeeze: SqueezeParams,
    gamma: float,
    gamma_prime: float,
    t: float,
    n_terms: int = 200,
) -> float:
    """Squared norm of exp(-i H_s t)|SMSV> for H_s = (i gamma/2) n - (i gamma'/2) n^2.

    Terms are summed in log space; the sum is truncated after ``n_terms``
    pairs and may be inf where the infinite series diverges.
    """
    if squeeze.r == 0.0:
        return 1.0
    n = np.arange(n_terms, dtype=float)
    log_terms = _smsv_log_weights(squeeze.r, n) + 2.0 * gamma * n * t - 4.0 * gamma_prime * n * n * t
    return float(np.exp(logsumexp(log_terms) - math.log(math.cosh(squeeze.r))))


def norm_series_converges(squeeze: SqueezeParams, gamma: float, t: float) -> bool:
    return math.tanh(squeeze.r) * math.exp(gamma * t) < 1.0


def divergence_time(squeeze: SqueezeParams, gamma: float) -> float:
    """t_f = ln(1 / tanh r) / gamma; inf for an unsqueezed state."""
    if gamma <= 0.0:
        raise DomainError(f"Divergence time needs gamma > 0 (got {gamma})")
    if squeeze.r == 0.0:
        return math.inf
    return math.log(1.0 / math.tanh(squeeze.r)) / gamma


# ------------------------------------------------------------------
# GROUND STATE
# ------------------------------------------------------------------
def ground_state_hermitian(params: ModelParams, n_max: int = Config.N_MAX) -> Tuple[FockVector, SqueezeParams]:
    if params.gamma != 0.0 or params.gamma_prime != 0.0:
        raise DomainError("The ground state is taken in the Hermitian model (gamma = gamma_prime = 0)")
    A, B = single_mode_coeffs(params)
    if not abs(B / A) < 1.0:
        raise DomainError(f"|B/A| = {abs(B / A)} >= 1: the single-mode Hamiltonian has no ground state")

    H = build_single_mode_hamiltonian(params, n_max)
    try:
        _, vectors = linalg.eigh(H)
    except linalg.LinAlgError as e:
        log.error("Single-mode eigensolve failed", n_max=n_max, error=str(e))
        raise NumericalFailure("Single-mode eigensolve failed", e) from e

    vec = vectors[:, 0].astype(complex)
    if vec[0] == 0:
        raise NumericalFailure("Ground state has no vacuum component")
    vec = vec * (np.conj(vec[0]) / abs(vec[0]))
    # H never mixes parities; odd entries are eigensolver rounding
    vec[1::2] = 0.0
    vec = vec / np.linalg.norm(vec)

    ratio = vec[2] / vec[0]
    tanh_r = math.sqrt(2.0) * abs(ratio)
    if tanh_r >= 1.0:
        raise NumericalFailure(f"Amplitude ratio gives tanh r = {tanh_r} >= 1")
    phi = float(np.angle(-ratio)) if ratio != 0 else 0.0
    squeeze = SqueezeParams(r=math.atanh(tanh_r), phi=phi)

    log.info("Single-mode ground state found", r=squeeze.r, phi=squeeze.phi, n_max=n_max)
    return FockVector(vec), squeeze


# ------------------------------------------------------------------
# EXACT EVOLUTION
# ------------------------------------------------------------------
def _moments(psi: np.ndarray, a: np.ndarray) -> Tuple[float, complex, float]:
    probs = psi.real**2 + psi.imag**2
    n = np.arange(len(psi), dtype=float)
    g = float(np.dot(n, probs))
    n2 = float(np.dot(n * n, probs))
    f = complex(np.vdot(psi, a @ (a @ psi)))
    return g, f, n2


def _step(H: np.ndarray, psi: np.ndarray, tau: float) -> Tuple[np.ndarray, float]:
    """Propagate by tau and renormalise; returns the state and log of the squared norm gained."""
    psi = linalg.expm(-1j * tau * H) @ psi
    norm2 = float(np.vdot(psi, psi).real)
    if not np.isfinite(norm2) or norm2 < NORM_FLOOR:
        log.error("Norm underflow in exact evolution", norm2=norm2, tau=tau)
        raise NumericalFailure(f"State norm left the representable range (|psi|^2 = {norm2})")
    return psi / math.sqrt(norm2), math.log(norm2)


def evolve_ed(H: np.ndarray, psi0: FockVector, times: Sequence[float]) -> ModeSeries:
    """Normalised non-unitary evolution by dense matrix exponentials, one per sample interval."""
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) <= 0):
        raise DomainError("Sample times must be strictly ascending")

    a = annihilation(len(psi0.amplitudes) - 1)
    psi = psi0.normalized().amplitudes
    states = np.empty((len(times), len(psi)), dtype=complex)
    g = np.empty(len(times))
    n2 = np.empty(len(times))
    f = np.empty(len(times), dtype=complex)
    log_norm = np.zeros(len(times))

    for i, t in enumerate(times):
        if i:
            psi, gained = _step(H, psi, t - times[i - 1])
            log_norm[i] = log_norm[i - 1] + gained
        states[i] = psi
        g[i], f[i], n2[i] = _moments(psi, a)

    log.info("Exact single-mode evolution completed", samples=len(times), g_final=float(g[-1]))
    return ModeSeries(times=times, g=g, f=f, n2=n2, log_norm=log_norm, states=states)


def evolve_eom(
    params: ModelParams,
    psi0: FockVector,
    times: Sequence[float],
    dt: float = Config.DT,
    cap: float = Config.DIVERGENCE_CAP,
) -> ModeSeries:
    """Single-mode spin-wave equations started from <n> and <aa> of ``psi0``."""
    if params.gamma_prime != 0.0:
        raise DomainError("The quadratic equations of motion have no quartic term; use the exact engine")
    times = np.asarray(times, dtype=float)
    A, B = single_mode_coeffs(params)
    g0, f0, _ = _moments(psi0.normalized().amplitudes, annihilation(psi0.n_max))

    f, g, divergence = propagate_modes(Flavor.BOSONIC, A, B, f0, g0, times, dt, cap)
    f, g = f[:, 0], g[:, 0]
    n2 = (g + 2.0 * g * g + f.real**2 + f.imag**2).real
    # d/dt log|psi|^2 = 2 Im<H>, with Im<H> = Im(A) (G + 1/2) for real B
    growth = 2.0 * A.imag * (g.real + 0.5)
    log_norm = cumulative_trapezoid(growth, times[: len(g)], initial=0.0)

    if divergence is not None:
        log.warning("Single-mode equations diverged", **divergence.as_dict())
    return ModeSeries(
        times=times[: len(g)],
        g=g.real,
        f=f,
        n2=n2,
        log_norm=log_norm,
        divergence=divergence,
    )


def nonlinearity_onset(
    H: np.ndarray,
    psi0: FockVector,
    gamma: float,
    gamma_prime: float,
    times: Sequence[float],
) -> Optional[float]:
    """First time with gamma <n> <= gamma' <n n> along the evolution under ``H``.

    ``H`` is the Hamiltonian without the quartic term. The crossing is
    bracketed by the samples and refined with Brent's method; None when it
    is not reached inside ``times``.
    """
    if gamma_prime <= 0.0:
        raise DomainError(f"gamma_prime must be positive (got {gamma_prime})")

    series = evolve_ed(H, psi0, times)
    margin = gamma * series.g - gamma_prime * series.n2
    crossed = np.flatnonzero(margin <= 0.0)
    if crossed.size == 0:
        log.info("Nonlinearity onset not reached", gamma=gamma, gamma_prime=gamma_prime, t_end=float(series.times[-1]))
        return None

    i = int(crossed[0])
    if i == 0:
        return float(series.times[0])

    a = annihilation(len(psi0.amplitudes) - 1)
    start = series.states[i - 1]

    def margin_at(tau: float) -> float:
        if tau == 0.0:
            return float(margin[i - 1])
        psi, _ = _step(H, start, tau)
        g, _, n2 = _moments(psi, a)
        return gamma * g - gamma_prime * n2

    interval = float(series.times[i] - series.times[i - 1])
    tau = optimize.brentq(margin_at, 0.0, interval, xtol=1e-10)
    onset = float(series.times[i - 1] + tau)
    log.info("Nonlinearity onset located", gamma=gamma, gamma_prime=gamma_prime, onset=onset)
    return onset
