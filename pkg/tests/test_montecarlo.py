import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))
from conftest import P_N1  # noqa: E402

from zerovar.ensemble import (
    basis_values,
    chebyshev,
    jacobi_recurrence,
    leading_coefficients,
    legendre,
    load_recurrence,
    save_recurrence,
)
from zerovar.equilibrium import omega_mass
from zerovar.errors import CapacityError, DomainError, UnsupportedError
from zerovar.kacrice import expected_zeros
from zerovar.montecarlo import (
    GridConfig,
    coefficient_block,
    count_zeros_grid,
    histogram_moments,
    monic_jacobi_rational,
    sample_coefficients,
    simulate,
    sturm_chain,
    sturm_count,
    to_monomial,
    zero_brackets,
    zero_grid,
)

LEG = legendre(100)
CHEB = chebyshev(900)


def test_sampling_deterministic():
    a = sample_coefficients(7, 12, 10)
    b = sample_coefficients(7, 12, 10)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, sample_coefficients(7, 13, 10))
    assert not np.array_equal(a, sample_coefficients(8, 12, 10))
    assert np.array_equal(coefficient_block(7, 10, 14, 10)[2], a)


def test_sampling_moments_and_independence():
    N = 100_000
    block = coefficient_block(3, 0, N, 1)
    a0 = block[:, 0]
    assert abs(a0.mean()) < 4 / math.sqrt(N)
    assert abs(a0.var(ddof=1) - 1) < 0.02
    # coefficient j of sample i vs sample i + 1
    r = np.corrcoef(a0[:-1], a0[1:])[0, 1]
    assert abs(r) < 4 / math.sqrt(N)
    assert abs(np.corrcoef(block[:, 0], block[:, 1])[0, 1]) < 4 / math.sqrt(N)


def test_sampling_domain():
    with pytest.raises(DomainError):
        sample_coefficients(1, -1, 3)
    with pytest.raises(DomainError):
        sample_coefficients(1, 0, -1)


def test_grid_layout():
    x = zero_grid(50, -0.5, 0.5, 8)
    assert x.size == math.ceil(8 * 50 * (1 / 3) * math.pi) + 2
    assert x[0] == -0.5 and x[-1] == 0.5
    assert np.all(np.diff(x) > 0)
    theta = np.arccos(x)
    np.testing.assert_allclose(np.diff(theta), np.diff(theta)[0], rtol=1e-9)


def test_count_examples():
    assert count_zeros_grid(LEG, 0, [1.0], -0.5, 0.5) == 0
    assert count_zeros_grid(LEG, 3, [1.0, 0, 0, 0], -0.5, 0.5) == 0
    assert count_zeros_grid(LEG, 1, [0.0, 1.0], -0.5, 0.5) == 1
    # p_2 of Legendre vanishes at +-1/sqrt(3)
    assert count_zeros_grid(LEG, 2, [0.0, 0.0, 1.0], -0.9, 0.9) == 2
    assert count_zeros_grid(LEG, 2, [0.0, 0.0, 1.0], -0.5, 0.5) == 0
    assert count_zeros_grid(CHEB, 30, np.eye(31)[30], -0.999, 0.999) == 30


def test_brackets_are_tight():
    coeffs = np.eye(6)[5]
    br = zero_brackets(LEG, 5, coeffs, -0.99, 0.99)
    roots = np.sort(np.polynomial.legendre.legroots(np.eye(6)[5]))
    assert len(br) == 5
    for (lo, hi), r in zip(br, roots):
        assert hi - lo <= 2e-13
        assert lo - 1e-15 <= r <= hi + 1e-15


def test_count_wrong_length():
    with pytest.raises(DomainError):
        count_zeros_grid(LEG, 3, [1.0, 2.0], -0.5, 0.5)


def test_exact_zero_grid_value_warns():
    # p_1 vanishes exactly at the right endpoint, which the grid hits exactly
    with pytest.warns(RuntimeWarning):
        assert count_zeros_grid(LEG, 1, [0.0, 1.0], -0.5, 0.0) == 1
    # a root at the left endpoint is not counted, matching (a, b]
    with pytest.warns(RuntimeWarning):
        assert count_zeros_grid(LEG, 1, [0.0, 1.0], 0.0, 0.5) == 0


def test_sturm_examples():
    assert sturm_count([Fraction(-1, 4), 0, 1], -1, 1) == 2
    assert sturm_count([0, -1, 0, 1], Fraction(-1, 2), 2) == 2
    # half-open convention: a root at the right end counts, at the left end not
    assert sturm_count([0, -1, 0, 1], 0, 1) == 1
    assert sturm_count([0, -1, 0, 1], -1, 0) == 1
    # repeated roots count once
    assert sturm_count([1, -2, 1], 0, 2) == 1
    assert sturm_count([0, 0, 1, -2, 1], -1, 2) == 2
    assert sturm_count([5], -1, 1) == 0
    assert sturm_count([1, 0, 1], -10, 10) == 0


def test_sturm_degree_cap_and_domain():
    with pytest.raises(CapacityError):
        sturm_count([1] * 32, 0, 1)
    sturm_count([1] * 31, 0, 1)
    with pytest.raises(DomainError):
        sturm_count([0, 1], 1, 0)


def test_sturm_chain_is_integer():
    chain = sturm_chain([Fraction(1, 3), Fraction(-5, 7), 0, 1])
    assert all(isinstance(c, int) for p in chain for c in p)


def _isolation_count(coeffs, a, b):
    """Distinct roots in (a, b] from sympy's exact isolating intervals."""
    x = sympy.Symbol("x")
    p = sympy.Poly(list(reversed(coeffs)), x).sqf_part()

    def sign(t):
        return sympy.sign(p.eval(sympy.Rational(t.numerator, t.denominator)))

    count = 0
    for (lo, hi), _ in p.intervals():
        lo, hi = Fraction(str(lo)), Fraction(str(hi))
        if lo == hi:
            count += a < lo <= b
            continue
        while sign(lo) == 0 or sign(hi) == 0:
            # an endpoint is a neighbouring rational root, listed on its own
            r = p.refine_root(sympy.Rational(str(lo)), sympy.Rational(str(hi)), eps=(hi - lo) / 4)
            lo, hi = Fraction(str(r[0])), Fraction(str(r[1]))
        # exactly one simple root inside (lo, hi); place it against a and b
        def below(t):
            if t <= lo:
                return False
            if t >= hi:
                return True
            s = sign(t)
            return s == 0 or s == sign(hi)  # root <= t

        count += (not below(a)) and below(b)
    return count


@pytest.mark.parametrize("seed", range(8))
def test_sturm_against_sympy_isolation(seed):
    rng = np.random.default_rng(seed)
    coeffs = [int(c) for c in rng.integers(-20, 21, 16)]
    coeffs[-1] = coeffs[-1] or 1
    if seed % 2:
        # force repeated and rational roots at 1 and -1
        coeffs = [int(c) for c in np.polynomial.polynomial.polymul(coeffs[:12], [1, 0, -2, 0, 1])]
    assert len(coeffs) == 16
    for a, b in [(-3, 3), (Fraction(-1, 2), Fraction(7, 3)), (-100, 0), (0, 1), (-1, 1)]:
        a, b = Fraction(a), Fraction(b)
        assert sturm_count(coeffs, a, b) == _isolation_count(coeffs, a, b)


def test_monic_recurrence_matches_table():
    for alpha, beta in [(0, 0), (-0.5, -0.5), (2, 0.5), (Fraction(1, 3), Fraction(-1, 4))]:
        a, b2 = monic_jacobi_rational(alpha, beta, 20)
        t = jacobi_recurrence(float(alpha), float(beta), 25)
        np.testing.assert_allclose([float(v) for v in a], t.a[:20], atol=1e-14)
        np.testing.assert_allclose([float(v) for v in b2], t.b[:19] ** 2, rtol=1e-13)


def test_to_monomial_matches_float_evaluation():
    rng = np.random.default_rng(11)
    for table in (LEG, jacobi_recurrence(1.5, -0.5, 30), chebyshev(30)):
        n = 12
        c = rng.standard_normal(n + 1)
        mono = to_monomial(table, n, c)
        x = np.linspace(-0.9, 0.9, 7)
        ref = c @ basis_values(table, n, x, 0)[0]
        got = [float(sum(m * Fraction(float(xi)) ** k for k, m in enumerate(mono))) for xi in x]
        np.testing.assert_allclose(got, ref, rtol=1e-10, atol=1e-10)
        assert float(mono[-1]) == pytest.approx(c[-1] * leading_coefficients(table, n)[-1], rel=1e-15)


def test_to_monomial_needs_jacobi(tmp_path):
    path = tmp_path / "rec.txt"
    save_recurrence(LEG, path)
    with pytest.raises(UnsupportedError):
        to_monomial(load_recurrence(path), 3, [1.0, 0, 0, 0])


def test_grid_matches_sturm_small_sample():
    rng = np.random.default_rng(2)
    for i in range(40):
        n = int(rng.integers(1, 21))
        c = sample_coefficients(99, i, n)
        a, b = -0.7, 0.8
        exact = sturm_count(to_monomial(LEG, n, c), Fraction(a), Fraction(b))
        assert count_zeros_grid(LEG, n, c, a, b) == exact


def test_simulate_degree_one():
    r = simulate(LEG, 1, -0.5, 0.5, 100_000, 7)
    assert r.mean == pytest.approx(0.4543, abs=0.005)
    assert r.variance == pytest.approx(0.2479, abs=0.004)
    assert abs(r.mean - P_N1) <= 4 * r.mean_stderr
    assert abs(r.variance - P_N1 * (1 - P_N1)) <= 4 * r.variance_stderr
    assert set(r.histogram) <= {0, 1}


def test_report_invariants():
    r = simulate(CHEB, 25, -0.6, 0.9, 3000, 5, GridConfig(batch=128, threads=2))
    assert sum(r.histogram.values()) == r.samples == 3000
    assert max(r.histogram) <= 25
    total, mean, var, _, _ = histogram_moments(r.histogram)
    assert (total, mean, var) == (r.samples, r.mean, r.variance)
    d = r.as_dict()
    assert d["config"]["threads"] == 2 and d["config"]["grid_per_wavelength"] == 8
    assert all(isinstance(k, str) for k in d["histogram"])
    assert r.complete


def test_simulate_independent_of_threads_and_batch():
    base = simulate(CHEB, 40, -0.5, 0.5, 2000, 11, GridConfig(threads=1, batch=256))
    for cfg in (GridConfig(threads=4, batch=256), GridConfig(threads=3, batch=37), GridConfig(threads=1, batch=2000)):
        other = simulate(CHEB, 40, -0.5, 0.5, 2000, 11, cfg)
        assert other.histogram == base.histogram
        assert other.mean == base.mean and other.variance == base.variance


def test_simulate_time_cap():
    r = simulate(CHEB, 40, -0.5, 0.5, 5000, 1, GridConfig(max_seconds=0.0, threads=1))
    assert not r.complete
    assert r.samples < 5000


def test_simulate_domain():
    with pytest.raises(DomainError):
        simulate(LEG, 3, -0.5, 0.5, 1, 0)
    with pytest.raises(DomainError):
        simulate(LEG, 3, 0.5, 0.5, 10, 0)


def test_grid_sufficiency():
    a = simulate(CHEB, 200, -0.5, 0.5, 2000, 3, GridConfig(grid_per_wavelength=8))
    b = simulate(CHEB, 200, -0.5, 0.5, 2000, 3, GridConfig(grid_per_wavelength=16))
    assert abs(a.mean - b.mean) < 1e-3 * b.mean


def test_mean_matches_expectation_n50():
    r = simulate(LEG, 50, -0.5, 0.5, 100_000, 7)
    assert abs(r.mean - expected_zeros(LEG, 50, -0.5, 0.5)) <= 3 * r.mean_stderr


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 60), st.integers(0, 2**63))
def test_counts_bounded_by_degree(n, seed):
    r = simulate(LEG, n, -0.99, 0.99, 16, seed, GridConfig(threads=1))
    assert max(r.histogram) <= n


@pytest.mark.slow
def test_chebyshev_full_interval_mean():
    r = simulate(CHEB, 800, -0.99, 0.99, 20_000, 7)
    target = omega_mass(-0.99, 0.99) / math.sqrt(3)
    assert r.mean / 800 == pytest.approx(target, rel=0.02)
