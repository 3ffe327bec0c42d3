"""Bulk-scaling limits: the sinc kernel, the determinant functions F, G, H,
the correlation defect Xi and the variance constant c.

Near ``u = 0`` the determinants cancel to high order (``1 - S^2 ~ u^2``,
``G, H ~ u^4``, ``G + H ~ u^6``, ``F ~ u^8``), so for ``|u| <= u0`` every
quantity is taken from exact power series with the leading powers factored
out.  Series are generated in ``t = pi u``, where all coefficients are
rational.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import ConsistencyError, DomainError
from .quadrature import GK15_NODES, GK15_WEIGHTS, G7_WEIGHTS_ON_GK15

PI = math.pi
SERIES_THRESHOLD = 0.25
SERIES_ORDER = 48  # highest power of t kept
ASIN_TOL = 1e-10
INV_SQRT3 = 1.0 / math.sqrt(3.0)


# --------------------------------------------------------------------------
# exact truncated power series in t


def _mul(p, q, order=SERIES_ORDER):
    out = [Fraction(0)] * (order + 1)
    for i, pi_ in enumerate(p):
        if pi_ == 0:
            continue
        for j in range(min(len(q), order + 1 - i)):
            if q[j]:
                out[i + j] += pi_ * q[j]
    return out


def _add(*ps):
    n = max(len(p) for p in ps)
    return [sum((p[i] for p in ps if i < len(p)), Fraction(0)) for i in range(n)]


def _scale(p, c):
    return [c * v for v in p]


def _deriv(p):
    return [i * p[i] for i in range(1, len(p))] + [Fraction(0)]


def _det(mat):
    """Cofactor expansion over truncated series (small matrices only)."""
    n = len(mat)
    if n == 1:
        return mat[0][0]
    total = [Fraction(0)]
    for j in range(n):
        if not any(mat[0][j]):
            continue
        minor = [row[:j] + row[j + 1:] for row in mat[1:]]
        term = _mul(mat[0][j], _det(minor))
        total = _add(total, term if j % 2 == 0 else _scale(term, -1))
    return total


@dataclass(frozen=True)
class _Reduced:
    """``value(t) = t**power * poly(t**2)``, poly given by float coefficients."""

    power: int
    coeffs: np.ndarray  # ascending powers of t**2

    def poly(self, z):
        return np.polynomial.polynomial.polyval(z, self.coeffs)


def _reduce(p) -> _Reduced:
    v = next(i for i, c in enumerate(p) if c != 0)
    rest = p[v:]
    if any(rest[i] for i in range(1, len(rest), 2)):
        raise AssertionError("series is expected to be even after reduction")
    return _Reduced(v, np.array([float(c) for c in rest[::2]]))


@lru_cache(maxsize=None)
def _series():
    N = SERIES_ORDER
    S = [Fraction(0)] * (N + 1)
    for k in range(N // 2 + 1):
        S[2 * k] = Fraction((-1) ** k, math.factorial(2 * k + 1))
    S1 = _deriv(S)
    S2 = _deriv(S1)
    one = [Fraction(1)] + [Fraction(0)] * N
    zero = [Fraction(0)] * (N + 1)
    third = _scale(one, Fraction(1, 3))  # -S''(0) in t units
    neg = lambda p: _scale(p, -1)  # noqa: E731
    SS = _mul(S, S)
    one_minus = _add(one, neg(SS))
    F = _det([
        [one, S, zero, S1],
        [S, one, neg(S1), zero],
        [zero, neg(S1), third, neg(S2)],
        [S1, zero, neg(S2), third],
    ])
    G = _add(_mul(third, one_minus), neg(_mul(S1, S1)))
    H = _add(neg(_mul(S2, one_minus)), neg(_mul(S, _mul(S1, S1))))
    return {
        "S": _reduce(S),
        "S1": _reduce(S1),
        "S2": _reduce(S2),
        "one_minus_S2": _reduce(one_minus),
        "F": _reduce(F),
        "G": _reduce(G),
        "H": _reduce(H),
        "GpH": _reduce(_add(G, H)),
    }


# --------------------------------------------------------------------------
# tau table


def tau(r: int, s: int) -> Fraction:
    """Diagonal limit coefficients of the scaled derivative kernels."""
    if r < 0 or s < 0:
        raise DomainError("tau needs non-negative orders")
    if (r + s) % 2:
        return Fraction(0)
    sign = -1 if abs(r - s) // 2 % 2 else 1
    return Fraction(sign, r + s + 1)


def tau_table(max_order: int = 2) -> dict[tuple[int, int], Fraction]:
    return {(r, s): tau(r, s) for r in range(max_order + 1) for s in range(max_order + 1)}


# --------------------------------------------------------------------------
# pointwise evaluation


@dataclass(frozen=True)
class UniversalEval:
    u: float
    S: float
    S1: float
    S2: float
    F: float
    G: float
    H: float
    one_minus_S2: float
    Xi: Optional[float]
    branch: str


def _sinc_direct(u):
    t = PI * u
    s, c = np.sin(t), np.cos(t)
    S = s / t
    S1 = PI * (t * c - s) / t**2
    S2 = PI**2 * ((2 - t * t) * s - 2 * t * c) / t**3
    return S, S1, S2


def _sinc_series(u):
    ser = _series()
    t = PI * u
    z = t * t
    S = ser["S"].poly(z)
    S1 = PI * t * ser["S1"].poly(z)
    S2 = PI**2 * ser["S2"].poly(z)
    return S, S1, S2


def sinc_eval(u, series_threshold: float = SERIES_THRESHOLD):
    """``(S(u), S'(u), S''(u))`` for the sinc kernel ``sin(pi u)/(pi u)``."""
    ua = np.asarray(u, dtype=float)
    near = np.abs(ua) <= series_threshold
    safe = np.where(near, 1.0, ua)
    Sd = _sinc_direct(safe)
    Ss = _sinc_series(np.where(near, ua, 0.0))
    out = tuple(np.where(near, s, d) for s, d in zip(Ss, Sd))
    if ua.ndim == 0:
        return tuple(float(v) for v in out)
    return out


def _fgh_direct(u):
    """Determinants by LU elimination, u-units."""
    S, S1, S2 = _sinc_direct(u)
    c = PI**2 / 3
    z = np.zeros_like(S)
    o = np.ones_like(S)
    cc = np.full_like(S, c)
    Fm = np.stack([
        np.stack([o, S, z, S1], -1),
        np.stack([S, o, -S1, z], -1),
        np.stack([z, -S1, cc, -S2], -1),
        np.stack([S1, z, -S2, cc], -1),
    ], -2)
    Gm = np.stack([
        np.stack([o, S, -S1], -1),
        np.stack([S, o, z], -1),
        np.stack([-S1, z, cc], -1),
    ], -2)
    Hm = np.stack([
        np.stack([o, S, z], -1),
        np.stack([S, o, -S1], -1),
        np.stack([S1, z, -S2], -1),
    ], -2)
    return S, S1, S2, np.linalg.det(Fm), np.linalg.det(Gm), np.linalg.det(Hm), 1 - S * S


def _fgh_series(u):
    ser = _series()
    S, S1, S2 = _sinc_series(u)
    t = PI * u
    z = t * t
    F = PI**4 * t**8 * ser["F"].poly(z)
    G = PI**2 * t**4 * ser["G"].poly(z)
    H = PI**2 * t**4 * ser["H"].poly(z)
    om = t * t * ser["one_minus_S2"].poly(z)
    return S, S1, S2, F, G, H, om


def fgh_eval(u: float, series_threshold: float = SERIES_THRESHOLD) -> UniversalEval:
    u = float(u)
    if abs(u) <= series_threshold:
        vals, branch = _fgh_series(np.float64(u)), "series"
    else:
        vals, branch = _fgh_direct(np.array(u)), "direct"
    S, S1, S2, F, G, H, om = (float(v) for v in vals)
    return UniversalEval(u, S, S1, S2, F, G, H, om, None, branch)


def _asin_checked(r):
    r = np.asarray(r, dtype=float)
    bad = np.abs(r) > 1 + ASIN_TOL
    if np.any(bad):
        raise ConsistencyError(
            f"arcsin argument {float(r[bad].flat[0])!r} outside [-1, 1]"
        )
    return np.arcsin(np.clip(r, -1.0, 1.0))


def _xi_direct(u):
    _, _, _, F, G, H, om = _fgh_direct(u)
    F = np.where((F < 0) & (F > -1e-12), 0.0, F)
    if np.any(F < 0):
        raise ConsistencyError("F(u) negative beyond rounding")
    br = np.sqrt(F) / om + H / om**1.5 * _asin_checked(H / G)
    return br / PI**2 - 1.0 / 3.0


def _xi_series(u):
    ser = _series()
    t = np.abs(PI * u)
    z = t * t
    A = ser["one_minus_S2"].poly(z)
    Fr = ser["F"].poly(z)
    Gr = ser["G"].poly(z)
    Hr = ser["H"].poly(z)
    # 1 + H/G = (G + H)/G, kept exact so that arcsin near -1 stays accurate
    eps = z * ser["GpH"].poly(z) / Gr
    if np.any(eps < -ASIN_TOL) or np.any(eps > 2 + ASIN_TOL):
        raise ConsistencyError("H/G outside [-1, 1] in series branch")
    asin_hg = -PI / 2 + 2 * np.arcsin(np.sqrt(np.clip(eps, 0.0, 2.0) / 2))
    # Xi is pi-free in t units: sqrt(F_t)/(1-S^2) + H_t asin(H/G)/(1-S^2)^1.5
    return z * np.sqrt(Fr) / A + t * Hr / A**1.5 * asin_hg - 1.0 / 3.0


def xi(u, series_threshold: float = SERIES_THRESHOLD):
    """Limiting scaled correlation defect Xi(u); accepts arrays.

    Xi(0) is the limit -1/3: both bracketed terms vanish at 0 (the first
    like u^2, the second like |u|).
    """
    ua = np.asarray(u, dtype=float)
    near = np.abs(ua) <= series_threshold
    out = np.empty_like(ua)
    if np.any(near):
        out[near] = _xi_series(ua[near])
    if np.any(~near):
        out[~near] = _xi_direct(ua[~near])
    return float(out) if ua.ndim == 0 else out


def universal_eval(u: float, series_threshold: float = SERIES_THRESHOLD) -> UniversalEval:
    ev = fgh_eval(u, series_threshold)
    return UniversalEval(
        ev.u, ev.S, ev.S1, ev.S2, ev.F, ev.G, ev.H, ev.one_minus_S2,
        xi(u, series_threshold), ev.branch,
    )


# --------------------------------------------------------------------------
# the constant c


@dataclass(frozen=True)
class ConstantResult:
    c: float
    quadrature_value: float
    tail_estimate: float
    error_bound: float
    window: float
    series_threshold: float
    tol: float
    tail_amplitude: float
    panels: int
    evals: int
    converged: bool

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _gk_panels(f, left, right):
    """Kronrod value and |K15 - G7| estimate on each panel."""
    half = 0.5 * (right - left)
    mid = 0.5 * (right + left)
    x = mid[:, None] + half[:, None] * GK15_NODES[None, :]
    fx = f(x.ravel()).reshape(x.shape)
    k = half * (fx @ GK15_WEIGHTS)
    g = half * (fx @ G7_WEIGHTS_ON_GK15)
    return k, np.abs(k - g)


def universal_constant(
    window: float = 1000.0,
    series_threshold: float = SERIES_THRESHOLD,
    tol: float = 1e-10,
    max_depth: int = 12,
) -> ConstantResult:
    """``c = integral of Xi over the real line + 1/sqrt(3)``.

    Xi is even, so twice the integral over ``[0, U]`` is taken with adaptive
    Gauss-Kronrod panels no wider than 1/4.  The part beyond ``U`` is
    modelled as ``A/u^2``, with ``A`` fitted by least squares to the
    unit-interval integrals over ``[U/2, U]`` (these average out the period-1
    oscillation); the tail then integrates to ``2A/U``.
    """
    U = float(window)
    if U < 100:
        raise DomainError("window must be at least 100")
    if not 0 < series_threshold <= 0.5:
        raise DomainError("series threshold must lie in (0, 1/2]")
    if U != int(U):
        raise DomainError("window must be a whole number")
    f = lambda v: xi(v, series_threshold)  # noqa: E731

    nb = int(4 * U)
    edges = np.arange(nb + 1) / 4.0
    left, right = edges[:-1], edges[1:]
    vals, errs = _gk_panels(f, left, right)
    # accepted contributions, kept per base panel for the unit-interval averages
    owner = np.arange(nb)
    acc_val = np.zeros(nb)
    acc_err = np.zeros(nb)
    evals = 15 * nb
    depth = 0
    budget = tol / (2 * U)  # per unit length, for the half-line integral
    while True:
        width = right - left
        ok = errs <= np.maximum(budget * width, 1e-15 * np.abs(vals))
        if depth >= max_depth:
            ok[:] = True
        np.add.at(acc_val, owner[ok], vals[ok])
        np.add.at(acc_err, owner[ok], errs[ok])
        if ok.all():
            break
        l, r, o = left[~ok], right[~ok], owner[~ok]
        m = 0.5 * (l + r)
        left = np.concatenate([l, m])
        right = np.concatenate([m, r])
        owner = np.concatenate([o, o])
        vals, errs = _gk_panels(f, left, right)
        evals += 15 * left.size
        depth += 1

    half_integral = math.fsum(acc_val)
    quad_err = 2 * math.fsum(acc_err)
    unit = acc_val.reshape(-1, 4).sum(axis=1)  # integral over [k, k+1]
    k = np.arange(int(U) // 2, int(U), dtype=float)
    w = 1.0 / k - 1.0 / (k + 1.0)
    mk = unit[int(U) // 2: int(U)]
    A = float(np.dot(w, mk) / np.dot(w, w))
    tail = 2 * A / U
    integral = 2 * half_integral
    error_bound = quad_err + 0.5 * abs(tail)
    return ConstantResult(
        c=integral + tail + INV_SQRT3,
        quadrature_value=integral,
        tail_estimate=tail,
        error_bound=error_bound,
        window=U,
        series_threshold=series_threshold,
        tol=tol,
        tail_amplitude=A,
        panels=int(nb),
        evals=int(evals),
        converged=bool(quad_err <= tol),
    )
