"""One- and two-point intensities of real zeros of ``G_n = sum a_j p_j``.

Convention: ``E[N_n([a, b])] = integral of rho1 over [a, b]`` with
``rho1 = (1/pi) sqrt(K11/K - (K01/K)^2)``, i.e. no extra 1/pi in front of
the integral.  This is the normalisation under which the expected count of
a random Legendre polynomial on [-1, 1] grows like n/sqrt(3) and under
which ``E[N(N-1)]`` is the double integral of rho2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ensemble import RecurrenceTable, basis_values
from .equilibrium import omega_density
from .errors import ConsistencyError, DegenerateError, DomainError
from .kernels import DEGENERACY_FACTOR, EPS, PairFactors, factor_columns

PI = math.pi
CLAMP_TOL = 1e-12
# pair-evaluation chunk: number of (point, degree) cells per work array
_CHUNK_CELLS = 1 << 21


@dataclass(frozen=True)
class IntensityPair:
    rho1_x: float
    rho1_y: float
    rho2: float
    defect: float
    psi_x: float
    psi_y: float


def _rho1_from_sums(K, K01, K11):
    psi = K11 * K - K01 * K01
    scale = K11 * K
    bad = psi < -CLAMP_TOL * scale
    if np.any(bad):
        raise ConsistencyError("negative rho1 radicand beyond rounding")
    psi = np.maximum(psi, 0.0)
    return np.sqrt(psi) / (PI * K), psi


def rho1_many(table: RecurrenceTable, n: int, x) -> np.ndarray:
    """Vectorised one-point intensity of the degree-n ensemble."""
    if n < 0:
        raise DomainError("degree must be non-negative")
    x = np.asarray(x, dtype=float)
    if n == 0:
        return np.zeros_like(x)
    B = basis_values(table, n, x, 1)
    rho, _ = _rho1_from_sums(
        np.einsum("j...,j...->...", B[0], B[0]),
        np.einsum("j...,j...->...", B[0], B[1]),
        np.einsum("j...,j...->...", B[1], B[1]),
    )
    return rho


def rho1(table: RecurrenceTable, n: int, x: float) -> float:
    """Expected number of zeros per unit length at x."""
    return float(rho1_many(table, n, float(x)))


def psi(table: RecurrenceTable, n: int, x: float) -> float:
    B = basis_values(table, n, float(x), 1)
    K, K01, K11 = B[0] @ B[0], B[0] @ B[1], B[1] @ B[1]
    return float(K11 * K - K01 * K01)


def _rho2_from_factors(f: PairFactors):
    r11, r22, r33, r34, r44 = np.broadcast_arrays(f.r11, f.r22, f.r33, f.r34, f.r44)
    h = np.hypot(r34, r44)
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.where(h > 0, r34 / h, 0.0)
        val = r33 * (r44 + r34 * np.arcsin(corr)) / (PI**2 * r11 * r22)
    return val


def pair_intensities(table: RecurrenceTable, n: int, x, y, check: bool = True):
    """rho1(x), rho1(y), rho2(x, y) for many pairs at once.

    ``x`` may be a scalar shared by all ``y``.  Returns a dict of arrays with
    keys ``rho1_x``, ``rho1_y``, ``rho2``, ``defect`` and ``delta_ratio``
    (discriminant over ``K(x,x) K(y,y)``).  With ``check`` set, pairs whose
    discriminant falls under the degeneracy threshold raise
    :class:`DegenerateError`.
    """
    if n < 1:
        raise DomainError("two-point intensity needs degree >= 1")
    table.check_degree(n)
    x = np.asarray(x, dtype=float)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    shared = x.ndim == 0
    if not shared:
        x, y = np.broadcast_arrays(np.atleast_1d(x), y)
    m = n + 1
    out = {k: np.empty(y.shape) for k in ("rho1_x", "rho1_y", "rho2", "delta_ratio")}
    flat_y = y.ravel()
    flat_x = None if shared else x.ravel()
    if shared:
        Bx = basis_values(table, n, float(x), 1)
        rx, _ = _rho1_from_sums(Bx[0] @ Bx[0], Bx[0] @ Bx[1], Bx[1] @ Bx[1])
        Kxx = Bx[0] @ Bx[0]
    step = max(1, _CHUNK_CELLS // m)
    for lo in range(0, flat_y.size, step):
        sl = slice(lo, min(lo + step, flat_y.size))
        By = basis_values(table, n, flat_y[sl], 1)
        Kyy = np.einsum("ij,ij->j", By[0], By[0])
        ry, _ = _rho1_from_sums(
            Kyy,
            np.einsum("ij,ij->j", By[0], By[1]),
            np.einsum("ij,ij->j", By[1], By[1]),
        )
        if shared:
            px, dx, rxs, Kx = Bx[0], Bx[1], rx, Kxx
        else:
            Bxs = basis_values(table, n, flat_x[sl], 1)
            px, dx = Bxs[0], Bxs[1]
            Kx = np.einsum("ij,ij->j", px, px)
            rxs, _ = _rho1_from_sums(Kx, np.einsum("ij,ij->j", px, dx), np.einsum("ij,ij->j", dx, dx))
        f = factor_columns(px, By[0], dx, By[1])
        out["delta_ratio"].ravel()[sl] = f.delta / (Kx * Kyy)
        out["rho2"].ravel()[sl] = _rho2_from_factors(f)
        out["rho1_x"].ravel()[sl] = rxs
        out["rho1_y"].ravel()[sl] = ry
    if check and np.any(out["delta_ratio"] <= DEGENERACY_FACTOR * EPS):
        raise DegenerateError("point pair too close for unscaled evaluation")
    out["defect"] = out["rho2"] - out["rho1_x"] * out["rho1_y"]
    return out


def rho2(table: RecurrenceTable, n: int, x: float, y: float) -> IntensityPair:
    """Two-point intensity and the correlation defect at (x, y)."""
    if x == y:
        raise DegenerateError("rho2 needs distinct points")
    res = pair_intensities(table, n, float(x), np.array([float(y)]))
    return IntensityPair(
        rho1_x=float(res["rho1_x"][0]),
        rho1_y=float(res["rho1_y"][0]),
        rho2=float(res["rho2"][0]),
        defect=float(res["defect"][0]),
        psi_x=psi(table, n, x),
        psi_y=psi(table, n, y),
    )


def rho2_determinant_form(table: RecurrenceTable, n: int, x: float, y: float) -> float:
    """rho2 assembled from the kernel-sum determinants.

    Reference route: ``sqrt(det Omega) = sqrt(det Sigma / Delta)`` and
    ``Omega`` from bordered determinants.  Accurate away from the diagonal
    only; used to cross-check :func:`rho2`.
    """
    from .kernels import correlation_matrices, kernel_block

    cm = correlation_matrices(kernel_block(table, n + 1, x, y))
    det_ratio = cm.det_sigma / cm.delta
    if det_ratio < 0:
        if det_ratio < -1e-10 * cm.omega11 * cm.omega22:
            raise ConsistencyError("det Sigma / Delta negative beyond rounding")
        det_ratio = 0.0
    denom = math.sqrt(cm.omega11 * cm.omega22)
    r = cm.omega12 / denom if denom > 0 else 0.0
    if abs(r) > 1 + 1e-10:
        raise ConsistencyError(f"arcsin argument {r!r} outside [-1, 1]")
    r = min(1.0, max(-1.0, r))
    return (math.sqrt(det_ratio) + cm.omega12 * math.asin(r)) / (PI**2 * math.sqrt(cm.delta))


def scaled_defect_many(table: RecurrenceTable, n: int, x: float, u) -> np.ndarray:
    """``(n omega(x))^-2 [rho2 - rho1 rho1]`` at ``y = x + u / (n omega(x))``."""
    if not -1 < x < 1:
        raise DomainError("x must lie in (-1, 1)")
    u = np.asarray(u, dtype=float)
    if np.any(u == 0):
        raise DomainError("scaled separation must be non-zero")
    scale = n * omega_density(x)
    y = x + u / scale
    if np.any(np.abs(y) >= 1):
        raise DomainError("scaled partner point leaves (-1, 1)")
    res = pair_intensities(table, n, x, y.ravel())
    return (res["defect"] / scale**2).reshape(u.shape)


def scaled_defect(table: RecurrenceTable, n: int, x: float, u: float) -> float:
    return float(scaled_defect_many(table, n, x, np.array([u]))[0])
