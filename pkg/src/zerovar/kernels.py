"""Reproducing kernels, the covariance matrix of (G(x), G(y), G'(x), G'(y))
and the conditional covariance of the derivatives given two zeros.

Orders are always the number of summed terms ``m``: ``K_m(x, y)`` sums
``p_j(x) p_j(y)`` over ``j < m``.  A degree-n ensemble uses ``m = n + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ensemble import RecurrenceTable, basis_values
from .errors import DegenerateError, DomainError

EPS = np.finfo(float).eps
DEGENERACY_FACTOR = 1e3


@dataclass(frozen=True)
class KernelBlock:
    """Kernel values at one point pair.

    ``Krs = K_m^{(r,s)}(x, y)``.  The diagonal quantities at x and at y are
    carried too, since the covariance matrix needs them.
    """

    m: int
    x: float
    y: float
    K: float
    K01: float
    K10: float
    K11: float
    K20: float
    K02: float
    Kxx: float
    Kyy: float
    K01xx: float
    K01yy: float
    K11xx: float
    K11yy: float

    def swapped(self) -> "KernelBlock":
        return KernelBlock(
            self.m, self.y, self.x, self.K, self.K10, self.K01, self.K11,
            self.K02, self.K20, self.Kyy, self.Kxx, self.K01yy, self.K01xx,
            self.K11yy, self.K11xx,
        )


@dataclass(frozen=True)
class CorrelationMatrices:
    delta: float
    sigma: np.ndarray
    omega11: float
    omega12: float
    omega22: float
    det_sigma: float

    @property
    def det_omega(self) -> float:
        return self.omega11 * self.omega22 - self.omega12**2


def _check_order(table: RecurrenceTable, m: int) -> None:
    if m < 1:
        raise DomainError(f"kernel order must be >= 1, got {m}")
    table.check_degree(m - 1)


def kernel_block(table: RecurrenceTable, m: int, x: float, y: float) -> KernelBlock:
    """All six kernel entries at (x, y) by direct summation of basis values."""
    _check_order(table, m)
    B = basis_values(table, m - 1, np.array([x, y], dtype=float), 2)
    px, py = B[:, :, 0], B[:, :, 1]

    def k(r, s, u, v):
        return float(np.dot(u[r], v[s]))

    return KernelBlock(
        m=m, x=float(x), y=float(y),
        K=k(0, 0, px, py), K01=k(0, 1, px, py), K10=k(1, 0, px, py),
        K11=k(1, 1, px, py), K20=k(2, 0, px, py), K02=k(0, 2, px, py),
        Kxx=k(0, 0, px, px), Kyy=k(0, 0, py, py),
        K01xx=k(0, 1, px, px), K01yy=k(0, 1, py, py),
        K11xx=k(1, 1, px, px), K11yy=k(1, 1, py, py),
    )


def kernel_matrix(table: RecurrenceTable, m: int, xs, ys, r: int = 0, s: int = 0) -> np.ndarray:
    """``K_m^{(r,s)}(xs[i], ys[j])`` on a tensor grid."""
    _check_order(table, m)
    d = max(r, s)
    Bx = basis_values(table, m - 1, np.asarray(xs, dtype=float), d)
    By = basis_values(table, m - 1, np.asarray(ys, dtype=float), d)
    return Bx[r].T @ By[s]


def cd_kernel(table: RecurrenceTable, m: int, x: float, y: float) -> float:
    """``K_m(x, y)`` by the Christoffel-Darboux formula (x != y)."""
    _check_order(table, m)
    table.check_degree(m)
    if abs(x - y) < 1e-12:
        raise DegenerateError("Christoffel-Darboux needs |x - y| >= 1e-12")
    P = basis_values(table, m, np.array([x, y], dtype=float), 0)[0]
    num = P[m, 0] * P[m - 1, 1] - P[m - 1, 0] * P[m, 1]
    return float(table.b[m - 1] * num / (x - y))


def sigma_matrix(block: KernelBlock) -> np.ndarray:
    """4x4 covariance of (G(x), G(y), G'(x), G'(y))."""
    b = block
    return np.array([
        [b.Kxx, b.K, b.K01xx, b.K01],
        [b.K, b.Kyy, b.K10, b.K01yy],
        [b.K01xx, b.K10, b.K11xx, b.K11],
        [b.K01, b.K01yy, b.K11, b.K11yy],
    ])


def correlation_matrices(block: KernelBlock) -> CorrelationMatrices:
    """Discriminant, covariance matrix and conditional covariance.

    The conditional covariance entries are bordered 3x3 determinants of the
    covariance matrix divided by the discriminant; the determinant of the
    full matrix is taken by LU elimination with partial pivoting.
    """
    sigma = sigma_matrix(block)
    delta = block.Kxx * block.Kyy - block.K**2
    if delta <= DEGENERACY_FACTOR * EPS * block.Kxx * block.Kyy:
        raise DegenerateError(
            f"discriminant {delta:.3e} at x={block.x}, y={block.y} is below the "
            "degeneracy threshold; use the scaled evaluation"
        )
    idx = np.ix_
    d11 = np.linalg.det(sigma[idx([0, 1, 2], [0, 1, 2])])
    d22 = np.linalg.det(sigma[idx([0, 1, 3], [0, 1, 3])])
    d12 = np.linalg.det(sigma[idx([0, 1, 2], [0, 1, 3])])
    return CorrelationMatrices(
        delta=delta,
        sigma=sigma,
        omega11=d11 / delta,
        omega12=d12 / delta,
        omega22=d22 / delta,
        det_sigma=float(np.linalg.det(sigma)),
    )


def omega_direct(block: KernelBlock) -> tuple[float, float, float]:
    """Conditional covariance by the explicit subtractive formulas.

    Kept for comparison with :func:`correlation_matrices`; it cancels
    catastrophically as the points approach each other.
    """
    b = block
    delta = b.Kxx * b.Kyy - b.K**2
    kxx, kyy, kxy = b.Kxx, b.Kyy, b.K
    dxx, dyx, dxy, dyy = b.K01xx, b.K10, b.K01, b.K01yy  # K01(x,x), K01(y,x), ...
    o11 = b.K11xx - (kyy * dxx**2 - 2 * kxy * dxx * dyx + kxx * dyx**2) / delta
    o22 = b.K11yy - (kyy * dxy**2 - 2 * kxy * dxy * dyy + kxx * dyy**2) / delta
    o12 = b.K11 - (
        kyy * dxx * dxy - kxy * dxy * dyx - kxy * dxx * dyy + kxx * dyx * dyy
    ) / delta
    return o11, o12, o22


@dataclass(frozen=True)
class PairFactors:
    """Triangular factor of the basis columns ``[p(x), p(y), p'(x), p'(y)]``.

    With ``R`` upper triangular, ``R^T R`` equals the covariance matrix, so
    ``sqrt(Delta) = r11 r22`` and the conditional covariance is
    ``[[r33^2, r33 r34], [r33 r34, r34^2 + r44^2]]``.  Working from the
    factor keeps every derived quantity non-negative and loses only
    O(eps / u^3) relative accuracy at scaled separation ``u``, where forming
    the covariance matrix first loses O(eps / u^8).
    """

    r11: np.ndarray
    r22: np.ndarray
    r33: np.ndarray
    r34: np.ndarray
    r44: np.ndarray

    @property
    def delta(self):
        return (self.r11 * self.r22) ** 2

    @property
    def omega11(self):
        return self.r33**2

    @property
    def omega12(self):
        return self.r33 * self.r34

    @property
    def omega22(self):
        return self.r34**2 + self.r44**2

    @property
    def det_omega(self):
        return (self.r33 * self.r44) ** 2

    @property
    def det_sigma(self):
        return (self.r11 * self.r22 * self.r33 * self.r44) ** 2


def _cdot(u, v):
    return (u * v).sum(axis=0)


def _project_out(w, q):
    # two passes of classical Gram-Schmidt ("twice is enough")
    for _ in range(2):
        w = w - q * _cdot(q, w)
    return w


def factor_columns(px, py, dx, dy) -> PairFactors:
    """Orthogonal factorisation of stacked column sets.

    Arguments have shape ``(m,)`` or ``(m, N)`` and broadcast against each
    other; the leading axis is the polynomial index.
    """
    px, py, dx, dy = (
        np.asarray(v, dtype=float).reshape(len(v), -1) for v in (px, py, dx, dy)
    )
    m = px.shape[0]
    tiny = 8.0 * m * EPS

    r11 = np.sqrt(_cdot(px, px))
    q1 = px / r11
    w2 = _project_out(py, q1)
    r22 = np.sqrt(_cdot(w2, w2))
    with np.errstate(invalid="ignore", divide="ignore"):
        q2 = np.where(r22 > 0, w2 / r22, 0.0)

    w3 = _project_out(_project_out(dx, q1), q2)
    w4 = _project_out(_project_out(dy, q1), q2)
    dxn = np.sqrt(_cdot(dx, dx))
    dyn = np.sqrt(_cdot(dy, dy))
    r33 = np.sqrt(_cdot(w3, w3))
    r33 = np.where(r33 > tiny * dxn, r33, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        q3 = np.where(r33 > 0, w3 / np.where(r33 > 0, r33, 1.0), 0.0)
    r34 = _cdot(q3, w4)
    w4 = w4 - q3 * r34
    c = _cdot(q3, w4)
    r34 = r34 + c
    w4 = w4 - q3 * c
    r44 = np.sqrt(_cdot(w4, w4))
    r44 = np.where(r44 > tiny * dyn, r44, 0.0)
    return PairFactors(r11, r22, r33, r34, r44)


def pair_factors(table: RecurrenceTable, m: int, x, y) -> PairFactors:
    """:func:`factor_columns` for the order-m basis at point pairs (x, y)."""
    _check_order(table, m)
    Bx = basis_values(table, m - 1, x, 1)
    By = basis_values(table, m - 1, y, 1)
    return factor_columns(Bx[0], By[0], Bx[1], By[1])
