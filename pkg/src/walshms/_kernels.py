"""Inner loops of the brute-force propagator.

Two interchangeable implementations of the same fourth-order Gauss-Legendre
stepper live here: a numba-compiled loop kernel and a vectorised numpy
fallback. ``WALSHMS_BACKEND=numpy`` (or a missing numba install) selects the
fallback; anything else uses numba.

State arrays have shape ``(n_spin, n_fock, n_cols)``: spin index first
(bit ``N-1-i`` set means ion ``i`` is up), Fock level second, and one column
per independent initial state.

The Hamiltonian applied is

    H(t) = w (Omega/2) sum_i (sigma_+^i e^{i(phi_s + eps t)} + h.c.)
                     (a e^{i(phi_m - omega t)} + h.c.)

with ``w = +-1`` the Walsh sign of the current segment.
"""
from __future__ import annotations

import math
import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

_SQ3 = math.sqrt(3.0)
C1 = 0.5 - _SQ3 / 6.0
C2 = 0.5 + _SQ3 / 6.0
A11 = 0.25
A12 = 0.25 - _SQ3 / 6.0
A21 = 0.25 + _SQ3 / 6.0
A22 = 0.25

STAGE_TOL = 1e-15
MAX_STAGE_ITER = 80

STATUS_OK = 0
STATUS_STAGE_DIVERGED = 1


def default_backend() -> str:
    name = os.environ.get("WALSHMS_BACKEND", "numba").strip().lower()
    if name == "numpy" or not HAVE_NUMBA:
        return "numpy"
    return "numba"


# ---------------------------------------------------------------- numpy path


def _rhs_numpy(y, t, w, half_rabi, omega, phi_m, phi_s, eps, sqrt_n, n_ions):
    ca = w * half_rabi * complex(math.cos(phi_m - omega * t), math.sin(phi_m - omega * t))
    cs = complex(math.cos(phi_s + eps * t), math.sin(phi_s + eps * t))
    tmp = np.zeros_like(y)
    tmp[:, :-1, :] = ca * sqrt_n[1:, None] * y[:, 1:, :]
    tmp[:, 1:, :] += np.conj(ca) * sqrt_n[1:, None] * y[:, :-1, :]
    out = np.zeros_like(y)
    idx = np.arange(y.shape[0])
    for i in range(n_ions):
        mask = 1 << (n_ions - 1 - i)
        up = (idx & mask) != 0
        coef = np.where(up, cs, np.conj(cs))
        out += coef[:, None, None] * tmp[idx ^ mask]
    return -1j * out


def _top_population_numpy(psi):
    top = np.abs(psi[:, -2:, :]) ** 2
    return float(np.max(np.sum(top, axis=(0, 1))))


def evolve_segment_numpy(psi, t0, h, n_steps, w, half_rabi, omega, phi_m, phi_s, eps, n_ions):
    """Advance ``psi`` in place by ``n_steps`` Gauss-Legendre steps of size ``h``.

    Returns ``(status, max_top_population)``.
    """
    sqrt_n = np.sqrt(np.arange(psi.shape[1], dtype=np.float64))
    args = (w, half_rabi, omega, phi_m, phi_s, eps, sqrt_n, n_ions)
    top_max = _top_population_numpy(psi)
    for step in range(n_steps):
        t = t0 + step * h
        k1 = _rhs_numpy(psi, t + C1 * h, *args)
        k2 = _rhs_numpy(psi, t + C2 * h, *args)
        scale = max(float(np.max(np.abs(psi))), 1e-300)
        converged = False
        for _ in range(MAX_STAGE_ITER):
            k1n = _rhs_numpy(psi + h * (A11 * k1 + A12 * k2), t + C1 * h, *args)
            k2n = _rhs_numpy(psi + h * (A21 * k1n + A22 * k2), t + C2 * h, *args)
            change = h * max(float(np.max(np.abs(k1n - k1))), float(np.max(np.abs(k2n - k2))))
            k1, k2 = k1n, k2n
            if change <= STAGE_TOL * scale:
                converged = True
                break
        if not converged:
            return STATUS_STAGE_DIVERGED, top_max
        psi += 0.5 * h * (k1 + k2)
        top_max = max(top_max, _top_population_numpy(psi))
    return STATUS_OK, top_max


# ---------------------------------------------------------------- numba path

if HAVE_NUMBA:

    @numba.njit(cache=True, nogil=True)
    def _rhs_numba(y, out, tmp, t, w, half_rabi, omega, phi_m, phi_s, eps, sqrt_n, n_ions):
        n_spin, n_fock, n_cols = y.shape
        ca = w * half_rabi * complex(math.cos(phi_m - omega * t), math.sin(phi_m - omega * t))
        cac = ca.conjugate()
        cs = complex(math.cos(phi_s + eps * t), math.sin(phi_s + eps * t))
        # -i folded into the spin coefficients
        up = complex(cs.imag, -cs.real)
        down = complex(-cs.imag, -cs.real)
        for s in range(n_spin):
            for n in range(n_fock):
                lo = cac * sqrt_n[n] if n > 0 else 0j
                hi = ca * sqrt_n[n + 1] if n + 1 < n_fock else 0j
                for c in range(n_cols):
                    acc = 0j
                    if n + 1 < n_fock:
                        acc += hi * y[s, n + 1, c]
                    if n > 0:
                        acc += lo * y[s, n - 1, c]
                    tmp[s, n, c] = acc
        for s in range(n_spin):
            first = True
            for i in range(n_ions):
                mask = 1 << (n_ions - 1 - i)
                coef = up if (s & mask) != 0 else down
                src = s ^ mask
                for n in range(n_fock):
                    for c in range(n_cols):
                        if first:
                            out[s, n, c] = coef * tmp[src, n, c]
                        else:
                            out[s, n, c] += coef * tmp[src, n, c]
                first = False

    @numba.njit(cache=True, nogil=True)
    def _top_population_numba(psi):
        n_spin, n_fock, n_cols = psi.shape
        best = 0.0
        for c in range(n_cols):
            acc = 0.0
            for s in range(n_spin):
                for n in range(max(n_fock - 2, 0), n_fock):
                    v = psi[s, n, c]
                    acc += v.real * v.real + v.imag * v.imag
            if acc > best:
                best = acc
        return best

    @numba.njit(cache=True, nogil=True)
    def evolve_segment_numba(psi, t0, h, n_steps, w, half_rabi, omega, phi_m, phi_s, eps, n_ions):
        n_spin, n_fock, n_cols = psi.shape
        sqrt_n = np.sqrt(np.arange(n_fock).astype(np.float64))
        k1 = np.empty_like(psi)
        k2 = np.empty_like(psi)
        k1n = np.empty_like(psi)
        k2n = np.empty_like(psi)
        ytmp = np.empty_like(psi)
        tmp = np.empty_like(psi)
        top_max = _top_population_numba(psi)
        for step in range(n_steps):
            t = t0 + step * h
            _rhs_numba(psi, k1, tmp, t + C1 * h, w, half_rabi, omega, phi_m, phi_s, eps, sqrt_n, n_ions)
            _rhs_numba(psi, k2, tmp, t + C2 * h, w, half_rabi, omega, phi_m, phi_s, eps, sqrt_n, n_ions)
            scale2 = 1e-300
            for s in range(n_spin):
                for n in range(n_fock):
                    for c in range(n_cols):
                        v = psi[s, n, c]
                        a = v.real * v.real + v.imag * v.imag
                        if a > scale2:
                            scale2 = a
            limit = (STAGE_TOL / h) ** 2 * scale2
            converged = False
            for _ in range(MAX_STAGE_ITER):
                for s in range(n_spin):
                    for n in range(n_fock):
                        for c in range(n_cols):
                            ytmp[s, n, c] = psi[s, n, c] + h * (A11 * k1[s, n, c] + A12 * k2[s, n, c])
                _rhs_numba(ytmp, k1n, tmp, t + C1 * h, w, half_rabi, omega, phi_m, phi_s, eps, sqrt_n, n_ions)
                for s in range(n_spin):
                    for n in range(n_fock):
                        for c in range(n_cols):
                            ytmp[s, n, c] = psi[s, n, c] + h * (A21 * k1n[s, n, c] + A22 * k2[s, n, c])
                _rhs_numba(ytmp, k2n, tmp, t + C2 * h, w, half_rabi, omega, phi_m, phi_s, eps, sqrt_n, n_ions)
                change = 0.0
                for s in range(n_spin):
                    for n in range(n_fock):
                        for c in range(n_cols):
                            e1 = k1n[s, n, c] - k1[s, n, c]
                            e2 = k2n[s, n, c] - k2[s, n, c]
                            d1 = e1.real * e1.real + e1.imag * e1.imag
                            d2 = e2.real * e2.real + e2.imag * e2.imag
                            if d1 > change:
                                change = d1
                            if d2 > change:
                                change = d2
                            k1[s, n, c] = k1n[s, n, c]
                            k2[s, n, c] = k2n[s, n, c]
                if change <= limit:
                    converged = True
                    break
            if not converged:
                return STATUS_STAGE_DIVERGED, top_max
            for s in range(n_spin):
                for n in range(n_fock):
                    for c in range(n_cols):
                        psi[s, n, c] += 0.5 * h * (k1[s, n, c] + k2[s, n, c])
            top = _top_population_numba(psi)
            if top > top_max:
                top_max = top
        return STATUS_OK, top_max

else:  # pragma: no cover
    evolve_segment_numba = evolve_segment_numpy


def get_segment_kernel(backend: str | None = None):
    backend = backend or default_backend()
    if backend == "numba":
        return evolve_segment_numba
    if backend == "numpy":
        return evolve_segment_numpy
    raise ValueError(f"unknown backend {backend!r}")
