import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from walshms.errors import DomainError
from walshms.walsh import (
    DyadicRational,
    build_sequence,
    inner_product,
    orthonormality_defect,
    rademacher,
    verify_identity,
    walsh_moment,
    walsh_value,
)

D = DyadicRational


# ---------------------------------------------------------------- DyadicRational


def test_dyadic_canonical_form():
    assert D(2, 2) == D(1, 1)
    assert D(2, 2).numerator == 1 and D(2, 2).log2_denominator == 1
    assert D(0, 5) == D(0, 0)
    assert hash(D(4, 3)) == hash(D(1, 1))


def test_dyadic_ordering_is_exact():
    assert D(1, 2) < D(1, 1) < D(3, 2)
    assert D(1, 60) > D(0, 0)
    assert D.from_fraction(Fraction(3, 8)).to_fraction() == Fraction(3, 8)


@pytest.mark.parametrize("num,log2", [(3, 1), (-1, 2)])
def test_dyadic_rejects_outside_unit_interval(num, log2):
    with pytest.raises(DomainError):
        D(num, log2)


# ---------------------------------------------------------------- rademacher / walsh_value


@pytest.mark.parametrize(
    "n,x,expected",
    [(1, 0.25, 1), (2, 0.3, -1), (2, 0.5, 1)],
)
def test_rademacher_examples(n, x, expected):
    assert rademacher(n, x) == expected


def test_rademacher_matches_sine_off_grid():
    xs = np.linspace(0.001, 0.999, 257)
    for n in range(1, 6):
        for x in xs:
            s = math.sin(2**n * math.pi * x)
            if abs(s) > 1e-9:
                assert rademacher(n, x) == (1 if s > 0 else -1)


@pytest.mark.parametrize("n,x", [(0, 0.5), (1, 1.0), (1, -0.1), (-2, 0.3)])
def test_rademacher_domain(n, x):
    with pytest.raises(DomainError):
        rademacher(n, x)


def test_walsh_value_examples():
    assert walsh_value(1, 0.25) == 1
    assert walsh_value(1, 0.75) == -1
    assert walsh_value(0, 0.9) == 1
    assert walsh_value(3, 0.3) == -1
    assert walsh_value(3, 0.3) == rademacher(1, 0.3) * rademacher(2, 0.3)


def test_walsh_value_domain():
    with pytest.raises(DomainError):
        walsh_value(3, 1.0)


# ---------------------------------------------------------------- build_sequence


def test_build_sequence_examples():
    assert build_sequence(0).switch_points == ()
    assert build_sequence(1).switch_points == (D(1, 1),)
    assert build_sequence(3).switch_points == (D(1, 2), D(3, 2))


def test_build_sequence_invariants():
    for k in range(64):
        seq = build_sequence(k)
        m = max(k.bit_length() - 1, 0)
        assert seq.initial_sign == 1
        assert all(sp.log2_denominator <= m + 1 for sp in seq.switch_points)
        assert list(seq.switch_points) == sorted(seq.switch_points)
        signs = seq.segment_signs()
        assert signs[0] == 1
        assert all(a == -b for a, b in zip(signs, signs[1:]))
        assert seq.sequency == len(seq.switch_points)


def test_consistency_with_pointwise_values():
    xs = (np.arange(4096) + 0.5) / 4096
    for k in (0, 1, 2, 3, 5, 7, 12, 15, 31, 63):
        seq = build_sequence(k)
        assert all(seq.value(x) == walsh_value(k, x) for x in xs)


def test_right_limit_at_switch_points():
    seq = build_sequence(7)
    for sp, sign in zip(seq.switch_points, seq.segment_signs()[1:]):
        assert walsh_value(7, float(sp)) == sign


@pytest.mark.parametrize("n", range(1, 6))
def test_recursion(n):
    low = build_sequence(2**n - 1).switch_points
    high = build_sequence(2 ** (n + 1) - 1).switch_points
    # the midpoint is a switch only when the lower sequence ends on +1, since
    # the second half starts with the flipped sign -1
    ends_up = build_sequence(2**n - 1).segment_signs()[-1] == 1
    expected = (
        {s.half() for s in low}
        | ({D(1, 1)} if ends_up else set())
        | {D.from_fraction(Fraction(1, 2) + s.to_fraction() / 2) for s in low}
    )
    assert set(high) == expected


@pytest.mark.parametrize("n", range(1, 6))
def test_recursion_pointwise(n):
    k, big = 2**n - 1, 2 ** (n + 1) - 1
    for x in (np.arange(512) + 0.5) / 1024:
        assert walsh_value(big, x) == walsh_value(k, 2 * x)
        assert walsh_value(big, x + 0.5) == -walsh_value(k, 2 * x)


def test_index_cap():
    with pytest.raises(DomainError):
        build_sequence(2**20)


# ---------------------------------------------------------------- orthonormality


def test_orthonormality_exact():
    assert orthonormality_defect(31) == 0
    assert inner_product(5, 5) == 1
    assert inner_product(3, 6) == 0
    assert isinstance(inner_product(3, 6), Fraction)


@given(st.integers(0, 255), st.integers(0, 255))
def test_orthonormality_property(j, k):
    assert inner_product(j, k) == (1 if j == k else 0)


# ---------------------------------------------------------------- identity


@pytest.mark.parametrize("n,l", [(1, 1), (3, 2)])
def test_identity_examples(n, l):
    assert verify_identity(n, l) <= 1e-12


def test_identity_suite():
    for n in range(1, 7):
        for l in range(n + 1):
            assert verify_identity(n, l) <= 1e-12, (n, l)
            assert verify_identity(n, l, sign=-1) <= 1e-12, (n, l)


# frozen from an independent 40-digit mpmath quadrature of the segment integrals
VI_2_3 = 0.0074603879574325939


def test_identity_breaks_above_order():
    r = verify_identity(2, 3)
    assert r == pytest.approx(VI_2_3, rel=1e-12)


def test_identity_breaks_against_mpmath():
    with mpmath.workdps(30):
        w = 8 * mpmath.pi
        f = lambda x: x**3 * mpmath.e ** (1j * w * x)  # noqa: E731
        v = mpmath.quad(f, [0, 0.25]) - mpmath.quad(f, [0.25, 0.75]) + mpmath.quad(f, [0.75, 1])
    assert verify_identity(2, 3) == pytest.approx(float(abs(v)), rel=1e-12)


def test_walsh_moment_against_quadrature():
    # general index and frequency, checked segment by segment with mpmath
    k, l, omega = 6, 2, 3.7
    total = 0
    with mpmath.workdps(25):
        for a, b, s in build_sequence(k).segments():
            total += s * mpmath.quad(lambda x: x**l * mpmath.e ** (1j * omega * x), [float(a), float(b)])
    assert abs(walsh_moment(k, l, omega) - complex(total)) < 1e-13


def test_identity_domain():
    with pytest.raises(DomainError):
        verify_identity(0, 0)
    with pytest.raises(DomainError):
        verify_identity(11, 0)
