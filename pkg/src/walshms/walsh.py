"""Rademacher and dyadic-ordered Walsh functions on the unit interval.

Switch points are kept as exact dyadic rationals. Values at a switch point
follow the right-limit convention, so every Walsh function is constant on
half-open segments ``[s_i, s_{i+1})``.
"""
from __future__ import annotations

import cmath
import functools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .errors import DomainError

MAX_INDEX = 2**20


@functools.total_ordering
@dataclass(frozen=True, eq=False)
class DyadicRational:
    """Exact number ``numerator / 2**log2_denominator`` in ``[0, 1]``."""

    numerator: int
    log2_denominator: int

    def __post_init__(self):
        num, exp = int(self.numerator), int(self.log2_denominator)
        if num < 0 or exp < 0:
            raise DomainError("numerator and log2_denominator must be non-negative")
        if num > (1 << exp):
            raise DomainError(f"{num}/2^{exp} lies outside [0, 1]")
        if num == 0:
            exp = 0
        else:
            shift = min((num & -num).bit_length() - 1, exp)
            num >>= shift
            exp -= shift
        object.__setattr__(self, "numerator", num)
        object.__setattr__(self, "log2_denominator", exp)

    @classmethod
    def from_fraction(cls, value) -> "DyadicRational":
        frac = Fraction(value)
        den = frac.denominator
        if den & (den - 1):
            raise DomainError(f"{value} is not a dyadic rational")
        return cls(frac.numerator, den.bit_length() - 1)

    def _key(self, other: "DyadicRational") -> tuple[int, int]:
        e = max(self.log2_denominator, other.log2_denominator)
        return (
            self.numerator << (e - self.log2_denominator),
            other.numerator << (e - other.log2_denominator),
        )

    def __eq__(self, other):
        if not isinstance(other, DyadicRational):
            return NotImplemented
        return (self.numerator, self.log2_denominator) == (
            other.numerator,
            other.log2_denominator,
        )

    def __lt__(self, other):
        if not isinstance(other, DyadicRational):
            return NotImplemented
        a, b = self._key(other)
        return a < b

    def __hash__(self):
        return hash((self.numerator, self.log2_denominator))

    def __float__(self):
        return math.ldexp(self.numerator, -self.log2_denominator)

    def to_fraction(self) -> Fraction:
        return Fraction(self.numerator, 1 << self.log2_denominator)

    def half(self) -> "DyadicRational":
        return DyadicRational(self.numerator, self.log2_denominator + 1)

    def __repr__(self):
        return f"DyadicRational({self.numerator}/2^{self.log2_denominator})"


def _check_x(x) -> None:
    if not 0 <= x < 1:
        raise DomainError(f"x={x!r} outside [0, 1)")


def rademacher(n: int, x) -> int:
    """sign[sin(2^n pi x)] with the right-limit value at grid zeros."""
    if n < 1:
        raise DomainError(f"Rademacher order must be >= 1, got {n}")
    _check_x(x)
    # x * 2**n is exact for binary floats and for Fractions
    return 1 if math.floor(x * (1 << n)) % 2 == 0 else -1


def walsh_value(k: int, x) -> int:
    """Dyadic-ordered Walsh function: product of R(i+1, x) over set bits i of k."""
    if k < 0:
        raise DomainError("Walsh index must be non-negative")
    _check_x(x)
    sign = 1
    i = 0
    while k >> i:
        if (k >> i) & 1:
            sign *= rademacher(i + 1, x)
        i += 1
    return sign


def _grid_signs(k: int) -> np.ndarray:
    """Signs of W(k, .) on the 2^(m+1) cells of its natural dyadic grid."""
    if k == 0:
        return np.ones(1, dtype=np.int64)
    m = k.bit_length() - 1
    cells = np.arange(1 << (m + 1), dtype=np.int64)
    parity = np.zeros_like(cells)
    for i in range(m + 1):
        if (k >> i) & 1:
            # R(i+1) flips every 2^(m-i) cells
            parity ^= (cells >> (m - i)) & 1
    return 1 - 2 * parity


@dataclass(frozen=True)
class WalshSequence:
    """Piecewise-constant +-1 schedule W(k, x) on [0, 1)."""

    index_k: int
    switch_points: tuple[DyadicRational, ...]
    initial_sign: int = 1

    @property
    def n_segments(self) -> int:
        return len(self.switch_points) + 1

    def boundaries(self) -> list[DyadicRational]:
        return [DyadicRational(0, 0), *self.switch_points, DyadicRational(1, 0)]

    def segment_signs(self) -> list[int]:
        return [self.initial_sign * (-1) ** i for i in range(self.n_segments)]

    def segments(self) -> Iterator[tuple[DyadicRational, DyadicRational, int]]:
        b = self.boundaries()
        for i, s in enumerate(self.segment_signs()):
            yield b[i], b[i + 1], s

    def value(self, x) -> int:
        _check_x(x)
        # right-limit: count switch points <= x
        count = 0
        for sp in self.switch_points:
            if float(sp) <= x:
                count += 1
            else:
                break
        return self.initial_sign * (-1) ** count

    @property
    def sequency(self) -> int:
        return len(self.switch_points)


@functools.lru_cache(maxsize=256)
def build_sequence(k: int) -> WalshSequence:
    """Exact switch points of W(k, .)."""
    if not 0 <= k < MAX_INDEX:
        raise DomainError(f"Walsh index must lie in [0, 2^20), got {k}")
    signs = _grid_signs(k)
    exp = (k.bit_length() - 1) + 1 if k else 0
    flips = np.nonzero(signs[1:] != signs[:-1])[0] + 1
    points = tuple(DyadicRational(int(j), exp) for j in flips)
    return WalshSequence(index_k=k, switch_points=points, initial_sign=int(signs[0]))


def inner_product(j: int, k: int) -> Fraction:
    """Exact integral of W(j, x) W(k, x) over [0, 1)."""
    a, b = _grid_signs(j), _grid_signs(k)
    n = max(len(a), len(b))
    a = np.repeat(a, n // len(a))
    b = np.repeat(b, n // len(b))
    return Fraction(int(np.sum(a * b)), n)


def orthonormality_defect(max_index: int = 31) -> int:
    """Number of pairs (j, k) with j, k <= max_index violating orthonormality."""
    bad = 0
    for j in range(max_index + 1):
        for k in range(max_index + 1):
            if inner_product(j, k) != (1 if j == k else 0):
                bad += 1
    return bad


def _monomial_exp_antiderivative(l: int, omega: float, x: float) -> complex:
    # d/dx of e^{iwx} sum_j (-1)^j l!/(l-j)! x^(l-j) / (iw)^(j+1) is x^l e^{iwx}
    iw = 1j * omega
    total = 0j
    coeff = 1.0
    for j in range(l + 1):
        total += (-1) ** j * coeff * x ** (l - j) / iw ** (j + 1)
        coeff *= l - j
    return cmath.exp(iw * x) * total


def walsh_moment(k: int, l: int, omega: float) -> complex:
    """Closed-form integral of W(k, x) x^l e^{i omega x} over [0, 1)."""
    if omega == 0:
        return sum(
            s * (float(b) ** (l + 1) - float(a) ** (l + 1)) / (l + 1)
            for a, b, s in build_sequence(k).segments()
        )
    total = 0j
    for a, b, s in build_sequence(k).segments():
        total += s * (
            _monomial_exp_antiderivative(l, omega, float(b))
            - _monomial_exp_antiderivative(l, omega, float(a))
        )
    return total


def verify_identity(n: int, l: int, sign: int = 1) -> float:
    """Residual |int_0^1 W(2^n-1, x) e^{+-i 2^(n+1) pi x} x^l dx|.

    Vanishes (to rounding) whenever ``l <= n``; larger ``l`` is allowed so the
    breakdown of the identity can be inspected.
    """
    if not 1 <= n <= 10:
        raise DomainError(f"order n must lie in [1, 10], got {n}")
    if l < 0:
        raise DomainError("monomial degree must be non-negative")
    omega = sign * 2 ** (n + 1) * math.pi
    return abs(walsh_moment(2**n - 1, l, omega))


def switch_times(k: int, gate_time: float) -> list[float]:
    """Switch points of W(k, t/t_g) converted to seconds."""
    return [float(sp) * gate_time for sp in build_sequence(k).switch_points]


def walsh_samples(k: int, x: Sequence[float]) -> np.ndarray:
    """Vectorised walsh_value over an array of points in [0, 1)."""
    x = np.asarray(x, dtype=float)
    if np.any((x < 0) | (x >= 1)):
        raise DomainError("sample points must lie in [0, 1)")
    signs = _grid_signs(k)
    cells = np.floor(x * len(signs)).astype(np.int64)
    return signs[cells]
