"""Closed-form model of a Walsh-modulated spin-dependent-force gate.

All frequencies are angular (rad/s) and all times are seconds. The drive
phase ``phi_m`` only contributes a global phase to the displacement and is
ignored by the fidelity formulas.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError
from .walsh import build_sequence

TWO_PI = 2.0 * math.pi
_SERIES_THRESHOLD = 1e-6


@dataclass(frozen=True)
class GateParams:
    """Physical parameters of one gate execution.

    Attributes
    ----------
    omega : float
        Sideband Rabi rate, rad/s.
    delta : float
        Symmetric detuning from the sidebands, rad/s.
    delta_error : float
        Unintended shift of the detuning, rad/s.
    gate_time : float
        Total sequence duration, s.
    nbar : float
        Mean thermal occupation of the bus mode.
    walsh_index : int
        Dyadic-ordered Walsh index modulating the spin phase.
    ion_count : int
        1 or 2.
    """

    omega: float
    delta: float
    gate_time: float
    delta_error: float = 0.0
    nbar: float = 0.0
    walsh_index: int = 0
    ion_count: int = 1
    phi_s: float = 0.0
    phi_m: float = 0.0

    def __post_init__(self):
        if not self.gate_time > 0:
            raise DomainError(f"gate_time must be positive, got {self.gate_time}")
        if self.omega < 0:
            raise DomainError("omega must be non-negative")
        if self.nbar < 0:
            raise DomainError("nbar must be non-negative")
        if self.ion_count not in (1, 2):
            raise DomainError(f"ion_count must be 1 or 2, got {self.ion_count}")
        if self.walsh_index < 0:
            raise DomainError("walsh_index must be non-negative")
        object.__setattr__(self, "phi_s", math.fmod(self.phi_s, TWO_PI) % TWO_PI)
        object.__setattr__(self, "phi_m", math.fmod(self.phi_m, TWO_PI) % TWO_PI)

    @property
    def total_detuning(self) -> float:
        return self.delta + self.delta_error

    def replace(self, **changes) -> "GateParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class SegmentDecomposition:
    boundaries: tuple[float, ...]
    signs: tuple[int, ...]

    @property
    def durations(self) -> np.ndarray:
        return np.diff(np.asarray(self.boundaries))


@dataclass(frozen=True)
class DisplacementResult:
    alpha: complex
    phi_geom: float
    entangling_phase: float
    residual_magnitude_sq: float


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    alpha_up: np.ndarray
    alpha_down: np.ndarray = field(repr=False)

    @property
    def samples(self):
        return list(zip(self.times.tolist(), self.alpha_up.tolist(), self.alpha_down.tolist()))


def segment_decompose(k: int, gate_time: float) -> SegmentDecomposition:
    if not gate_time > 0:
        raise DomainError("gate_time must be positive")
    seq = build_sequence(k)
    bounds = [0.0] + [float(sp) * gate_time for sp in seq.switch_points] + [gate_time]
    return SegmentDecomposition(tuple(bounds), tuple(seq.segment_signs()))


def _phase_integral(omega: float, start, length):
    """int_start^{start+length} e^{-i omega t} dt, stable for small omega*length.

    Written as e^{-i omega start} * length * g(omega*length) with
    g(z) = (1 - e^{-iz})/(iz) = (sin z - 2i sin^2(z/2))/z.
    """
    start = np.asarray(start, dtype=float)
    length = np.asarray(length, dtype=float)
    z = omega * length
    small = np.abs(z) < _SERIES_THRESHOLD
    zs = np.where(small, 1.0, z)
    g = np.where(
        small,
        1 - 1j * z / 2 - z**2 / 6 + 1j * z**3 / 24,
        (np.sin(zs) - 2j * np.sin(zs / 2) ** 2) / zs,
    )
    return np.exp(-1j * omega * start) * length * g


def _segment_phasors(seg: SegmentDecomposition, omega: float) -> np.ndarray:
    b = np.asarray(seg.boundaries)
    return np.asarray(seg.signs) * _phase_integral(omega, b[:-1], np.diff(b))


def walsh_fourier(k: int, theta: float) -> complex:
    """int_0^1 W(k, x) e^{-i theta x} dx via the binary-digit factorisation.

    W(k, x) = prod_j (-1)^{b_(j-1) x_j} over the binary digits x_j of x, so the
    integral splits into prod_j (1 +- e^{-i theta / 2^j}) times the integral
    over the remainder cell. Each factor is 2cos or 2i sin of a half angle,
    which keeps full relative precision near closure where the plain segment
    sum cancels catastrophically.
    """
    digits = k.bit_length()
    cell = 2.0**-digits
    value = complex(_phase_integral(theta, 0.0, cell))
    for j in range(1, digits + 1):
        half = theta / 2.0 ** (j + 1)
        if (k >> (j - 1)) & 1:
            value *= 2j * math.sin(half) * complex(math.cos(half), -math.sin(half))
        else:
            value *= 2.0 * math.cos(half) * complex(math.cos(half), -math.sin(half))
    return value


def alpha_k_segments(params: GateParams) -> complex:
    """Same as alpha_k, summed segment by segment (loses precision near closure)."""
    seg = segment_decompose(params.walsh_index, params.gate_time)
    total = np.sum(_segment_phasors(seg, params.total_detuning))
    return complex(0.5 * params.omega * total * np.exp(1j * params.phi_m))


def alpha_k(params: GateParams) -> complex:
    """Residual displacement (Omega/2) int_0^tg W(k, t/tg) e^{-i(delta+Delta)t} dt."""
    tg = params.gate_time
    core = walsh_fourier(params.walsh_index, params.total_detuning * tg)
    return 0.5 * params.omega * tg * core * complex(math.cos(params.phi_m), math.sin(params.phi_m))


def _loop_area(delta: float, length: np.ndarray) -> np.ndarray:
    # (L - sin(delta L)/delta)/delta == L^2 (z - sin z)/z^2 with z = delta L
    z = delta * length
    small = np.abs(z) < 1e-3
    zs = np.where(small, 1.0, z)
    h = np.where(small, z / 6 - z**3 / 120 + z**5 / 5040, (zs - np.sin(zs)) / zs**2)
    return length**2 * h


def phi_k(params: GateParams, include_error: bool = False) -> float:
    """Geometric phase sum Phi_k(t_g) in s^2; multiply by Omega^2 for radians.

    The sum runs over the actual Walsh segments. The cross terms
    Im[phi_i^* phi_j] (i > j) use phasors phi_i = s_i int e^{-i delta t} over
    segment i, and each segment adds its own loop area
    (L_i - sin(delta L_i)/delta)/delta. At closure this reduces to t_g/delta.

    With ``include_error`` the oscillation frequency is delta + Delta rather
    than delta.
    """
    d = params.total_detuning if include_error else params.delta
    if d == 0:
        raise DomainError("Phi_k is singular at zero detuning; use the oracle")
    seg = segment_decompose(params.walsh_index, params.gate_time)
    phasors = _segment_phasors(seg, d)
    prior = np.concatenate(([0j], np.cumsum(phasors)[:-1]))
    cross = float(np.sum(np.imag(np.conj(phasors) * prior)))
    return cross + float(np.sum(_loop_area(d, seg.durations)))


def entangling_phase(params: GateParams, include_error: bool = False) -> float:
    return params.omega**2 * phi_k(params, include_error)


def displacement(params: GateParams, include_error: bool = False) -> DisplacementResult:
    a = alpha_k(params)
    try:
        phi = phi_k(params, include_error)
    except DomainError:
        phi = math.nan
    return DisplacementResult(
        alpha=a,
        phi_geom=phi,
        entangling_phase=params.omega**2 * phi,
        residual_magnitude_sq=abs(2 * a) ** 2,
    )


def _thermal_exponent(params: GateParams) -> float:
    return (params.nbar + 0.5) * abs(2 * alpha_k(params)) ** 2


def fidelity_one_ion(params: GateParams) -> float:
    """Spin-revival probability 1/2 (1 + exp[-(nbar + 1/2)|2 alpha_k|^2])."""
    if params.ion_count != 1:
        raise DomainError("fidelity_one_ion requires ion_count == 1")
    return 0.5 * (1.0 + math.exp(-_thermal_exponent(params)))


def infidelity_one_ion(params: GateParams) -> float:
    """1 - fidelity_one_ion, computed without cancellation."""
    if params.ion_count != 1:
        raise DomainError("infidelity_one_ion requires ion_count == 1")
    return -0.5 * math.expm1(-_thermal_exponent(params))


def fidelity_two_ion(params: GateParams, include_error: bool = False) -> float:
    """Bell-state fidelity 1/4 |exp[-(nbar + 1/2)|2 alpha_k|^2] + i exp(-i Omega^2 Phi_k)|^2."""
    if params.ion_count != 2:
        raise DomainError("fidelity_two_ion requires ion_count == 2")
    if params.delta == 0:
        raise DomainError("fidelity_two_ion is undefined at zero detuning")
    c = math.exp(-_thermal_exponent(params))
    chi = entangling_phase(params, include_error)
    return 0.25 * abs(c + 1j * np.exp(-1j * chi)) ** 2


def trajectory(params: GateParams, n_samples: int) -> Trajectory:
    """Running displacement alpha(t) of the spin-up branch at uniform times."""
    if n_samples < 2:
        raise DomainError("n_samples must be >= 2")
    seg = segment_decompose(params.walsh_index, params.gate_time)
    omega = params.total_detuning
    times = np.linspace(0.0, params.gate_time, n_samples)
    bounds = np.asarray(seg.boundaries)
    signs = np.asarray(seg.signs)
    full = _segment_phasors(seg, omega)
    cumulative = np.concatenate(([0j], np.cumsum(full)))
    idx = np.clip(np.searchsorted(bounds, times, side="right") - 1, 0, len(signs) - 1)
    partial = signs[idx] * _phase_integral(omega, bounds[idx], times - bounds[idx])
    up = 0.5 * params.omega * np.exp(1j * params.phi_m) * (cumulative[idx] + partial)
    up[0] = 0.0
    up[-1] = alpha_k(params)
    return Trajectory(times=times, alpha_up=up, alpha_down=0.0 - up)


def gaussian_overlap(q: float, dx: float) -> float:
    """Overlap of a Gaussian wavepacket with its momentum-kicked copy."""
    if not dx > 0:
        raise DomainError("dx must be positive")
    return math.exp(-0.5 * (q * dx) ** 2)


def plan_gate(n: int, omega: float) -> tuple[float, float]:
    """Shortest fully entangling gate using W(2^n - 1): returns (t_g, delta)."""
    if not omega > 0:
        raise DomainError("omega must be positive")
    if n < 0:
        raise DomainError("order n must be non-negative")
    gate_time = 2 ** (n / 2) * math.pi / omega
    delta = 2 ** (n + 1) * math.pi / gate_time
    check = GateParams(omega=omega, delta=delta, gate_time=gate_time, walsh_index=2**n - 1, ion_count=2)
    phase = entangling_phase(check)
    if abs(phase - math.pi / 2) > 1e-9:
        raise RuntimeError(f"planned gate has entangling phase {phase}, expected pi/2")
    return gate_time, delta


def planned_params(n: int, omega: float, **overrides) -> GateParams:
    gate_time, delta = plan_gate(n, omega)
    base = dict(omega=omega, delta=delta, gate_time=gate_time, walsh_index=2**n - 1, ion_count=2)
    base.update(overrides)
    return GateParams(**base)
