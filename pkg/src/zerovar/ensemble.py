"""Orthonormal polynomial ensembles defined by three-term recurrences.

A table stores ``a_0..a_{m-1}`` and ``b_1..b_m`` together with ``p0``, the
constant value of the degree-0 polynomial, so that

    b_{k+1} p_{k+1}(x) = (x - a_k) p_k(x) - b_k p_{k-1}(x),   p_{-1} = 0.

Measures are not normalised: ``p0 = mu(R)**-0.5`` carries the total mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.special import gammaln, roots_jacobi

from .errors import CapacityError, DomainError, ParseError, UnsupportedError

__all__ = [
    "RecurrenceTable",
    "BasisValues",
    "jacobi_recurrence",
    "legendre",
    "chebyshev",
    "load_recurrence",
    "save_recurrence",
    "parse_ensemble",
    "basis_values",
    "eval_basis",
    "leading_coefficients",
    "jacobi_mass",
    "orthonormality_residual",
]


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class RecurrenceTable:
    """Recurrence coefficients of an orthonormal family.

    Attributes
    ----------
    a : ndarray, shape (m,)
        Diagonal coefficients ``a_0..a_{m-1}``.
    b : ndarray, shape (m,)
        Off-diagonal coefficients ``b_1..b_m`` (``b[k-1]`` holds ``b_k``).
    p0 : float
        Value of the degree-0 orthonormal polynomial.
    kind : {"jacobi", "custom"}
    alpha, beta : float or None
        Jacobi exponents of the weight ``(1-x)**alpha (1+x)**beta``.
    """

    a: np.ndarray
    b: np.ndarray
    p0: float
    kind: str = "custom"
    alpha: Optional[float] = None
    beta: Optional[float] = None
    name: str = field(default="")

    def __post_init__(self):
        a = _frozen(self.a)
        b = _frozen(self.b)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "p0", float(self.p0))
        if a.ndim != 1 or a.shape != b.shape or a.size < 1:
            raise DomainError("a and b must be non-empty vectors of equal length")
        if not np.all(np.isfinite(a)) or not np.all(np.isfinite(b)):
            raise DomainError("recurrence coefficients must be finite")
        if np.any(b <= 0):
            k = int(np.argmax(b <= 0)) + 1
            raise DomainError(f"b_{k} = {b[k - 1]!r} is not positive")
        if not (self.p0 > 0 and math.isfinite(self.p0)):
            raise DomainError("p0 must be a finite positive number")
        if self.kind not in ("jacobi", "custom"):
            raise DomainError(f"unknown table kind {self.kind!r}")
        if not self.name:
            label = (
                f"jacobi:{self.alpha:g}:{self.beta:g}"
                if self.kind == "jacobi"
                else "custom"
            )
            object.__setattr__(self, "name", label)

    @property
    def capacity(self) -> int:
        """Highest degree that can be evaluated."""
        return int(self.a.size)

    def check_degree(self, n: int) -> None:
        if n < 0:
            raise DomainError(f"degree must be non-negative, got {n}")
        if n > self.capacity:
            raise CapacityError(
                f"degree {n} exceeds table capacity {self.capacity}"
            )

    def same_coefficients(self, other: "RecurrenceTable", tol: float = 0.0) -> bool:
        m = min(self.capacity, other.capacity)
        return (
            abs(self.p0 - other.p0) <= tol * max(1.0, abs(self.p0))
            and np.allclose(self.a[:m], other.a[:m], rtol=tol, atol=tol)
            and np.allclose(self.b[:m], other.b[:m], rtol=tol, atol=tol)
        )

    def __repr__(self) -> str:
        return f"RecurrenceTable({self.name}, capacity={self.capacity})"


@dataclass(frozen=True)
class BasisValues:
    """``values[j, r] = p_j^{(r)}(x)`` for ``0 <= j <= n``."""

    n: int
    max_deriv: int
    x: float
    values: np.ndarray


def jacobi_mass(alpha: float, beta: float) -> float:
    """Total mass of ``(1-x)**alpha (1+x)**beta`` on [-1, 1]."""
    return math.exp(
        (alpha + beta + 1) * math.log(2.0)
        + gammaln(alpha + 1)
        + gammaln(beta + 1)
        - gammaln(alpha + beta + 2)
    )


def jacobi_recurrence(alpha: float, beta: float, m: int) -> RecurrenceTable:
    """Orthonormal recurrence for the Jacobi weight on [-1, 1].

    Uses the closed-form coefficients; the k = 0 and k = 1 entries are the
    analytic limits so that ``alpha + beta`` in {0, -1} needs no special
    casing by the caller.
    """
    alpha = float(alpha)
    beta = float(beta)
    if not (alpha > -1 and beta > -1):
        raise DomainError(f"Jacobi parameters must exceed -1, got ({alpha}, {beta})")
    if int(m) != m or m < 1:
        raise DomainError(f"capacity must be a positive integer, got {m}")
    m = int(m)
    s = alpha + beta
    k = np.arange(m, dtype=float)
    a = np.empty(m)
    a[0] = (beta - alpha) / (s + 2)
    if m > 1:
        kk = k[1:]
        a[1:] = (beta * beta - alpha * alpha) / ((2 * kk + s) * (2 * kk + s + 2))
    b = np.empty(m)
    b[0] = 2.0 / (s + 2) * math.sqrt((1 + alpha) * (1 + beta) / (s + 3))
    if m > 1:
        kk = np.arange(2, m + 1, dtype=float)
        num = kk * (kk + alpha) * (kk + beta) * (kk + s)
        den = (2 * kk + s - 1) * (2 * kk + s + 1)
        b[1:] = 2.0 / (2 * kk + s) * np.sqrt(num / den)
    p0 = 1.0 / math.sqrt(jacobi_mass(alpha, beta))
    return RecurrenceTable(a, b, p0, kind="jacobi", alpha=alpha, beta=beta)


def legendre(m: int) -> RecurrenceTable:
    return jacobi_recurrence(0.0, 0.0, m)


def chebyshev(m: int) -> RecurrenceTable:
    """First-kind Chebyshev family, weight ``1/sqrt(1-x^2)``."""
    return jacobi_recurrence(-0.5, -0.5, m)


def _strip_comment(line: str) -> str:
    return line.split("#", 1)[0].strip()


def load_recurrence(path) -> RecurrenceTable:
    """Read a custom recurrence file.

    Format: first non-comment line ``p0 <value>``, then rows
    ``<k> <a_k> <b_{k+1}>`` with k = 0, 1, 2, ... ; ``#`` starts a comment.
    """
    path = Path(path)
    p0 = None
    a, b = [], []
    try:
        fh = path.open(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}", None) from None
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            line = _strip_comment(raw)
            if not line:
                continue
            fields = line.split()
            if p0 is None:
                if len(fields) != 2 or fields[0] != "p0":
                    raise ParseError("expected 'p0 <value>' header", lineno)
                p0 = _parse_float(fields[1], lineno)
                if not (p0 > 0 and math.isfinite(p0)):
                    raise ParseError(f"p0 must be positive, got {fields[1]}", lineno)
                continue
            if len(fields) != 3:
                raise ParseError(f"expected 3 fields, got {len(fields)}", lineno)
            try:
                k = int(fields[0])
            except ValueError:
                raise ParseError(f"row index {fields[0]!r} is not an integer", lineno)
            if k != len(a):
                raise ParseError(f"row index {k} out of sequence (expected {len(a)})", lineno)
            ak = _parse_float(fields[1], lineno)
            bk = _parse_float(fields[2], lineno)
            if not math.isfinite(ak):
                raise ParseError(f"a_{k} is not finite", lineno)
            if not (bk > 0 and math.isfinite(bk)):
                raise ParseError(f"b_{k + 1} = {fields[2]} must be positive", lineno)
            a.append(ak)
            b.append(bk)
    if p0 is None:
        raise ParseError(f"{path}: missing 'p0' header", None)
    if not a:
        raise ParseError(f"{path}: no recurrence rows", None)
    return RecurrenceTable(a, b, p0, kind="custom", name=f"file:{path}")


def _parse_float(token: str, lineno: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise ParseError(f"cannot parse number {token!r}", lineno) from None


def save_recurrence(table: RecurrenceTable, path) -> None:
    lines = [f"# {table.name}", f"p0 {float(table.p0)!r}"]
    lines += [f"{k} {float(ak)!r} {float(bk)!r}" for k, (ak, bk) in enumerate(zip(table.a, table.b))]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def parse_ensemble(spec: str, m: int) -> RecurrenceTable:
    """Build a table from ``jacobi:<alpha>:<beta>``, ``legendre``,
    ``chebyshev`` or ``file:<path>`` (a bare path also works)."""
    if spec == "legendre":
        return legendre(m)
    if spec == "chebyshev":
        return chebyshev(m)
    if spec.startswith("jacobi:"):
        parts = spec.split(":")
        if len(parts) != 3:
            raise DomainError(f"expected jacobi:<alpha>:<beta>, got {spec!r}")
        try:
            alpha, beta = float(parts[1]), float(parts[2])
        except ValueError:
            raise DomainError(f"bad Jacobi parameters in {spec!r}") from None
        return jacobi_recurrence(alpha, beta, m)
    path = spec[5:] if spec.startswith("file:") else spec
    table = load_recurrence(path)
    if table.capacity < m:
        raise CapacityError(f"{path} supports degree {table.capacity}, need {m}")
    return table


def basis_values(table: RecurrenceTable, n: int, x, max_deriv: int = 0) -> np.ndarray:
    """Vectorised basis evaluation.

    Returns an array of shape ``(max_deriv + 1, n + 1) + shape(x)`` with
    entry ``[r, j]`` equal to ``p_j^{(r)}(x)``, propagated jointly through
    the differentiated recurrence.
    """
    table.check_degree(n)
    if max_deriv not in (0, 1, 2):
        raise DomainError(f"max_deriv must be 0, 1 or 2, got {max_deriv}")
    x = np.asarray(x, dtype=float)
    out = np.zeros((max_deriv + 1, n + 1) + x.shape)
    out[0, 0] = table.p0
    if n == 0:
        return out
    a, b = table.a, table.b
    out[0, 1] = (x - a[0]) * table.p0 / b[0]
    if max_deriv >= 1:
        out[1, 1] = table.p0 / b[0]
    for k in range(1, n):
        t = x - a[k]
        inv = 1.0 / b[k]
        bk = b[k - 1]
        out[0, k + 1] = (t * out[0, k] - bk * out[0, k - 1]) * inv
        if max_deriv >= 1:
            out[1, k + 1] = (t * out[1, k] + out[0, k] - bk * out[1, k - 1]) * inv
        if max_deriv >= 2:
            out[2, k + 1] = (t * out[2, k] + 2.0 * out[1, k] - bk * out[2, k - 1]) * inv
    return out


def eval_basis(table: RecurrenceTable, n: int, x: float, max_deriv: int = 0) -> BasisValues:
    vals = basis_values(table, n, float(x), max_deriv)
    return BasisValues(n=n, max_deriv=max_deriv, x=float(x), values=np.ascontiguousarray(vals.T))


def leading_coefficients(table: RecurrenceTable, n: int) -> np.ndarray:
    """``gamma_0..gamma_n`` with ``gamma_k = p0 / (b_1 ... b_k)``."""
    table.check_degree(n)
    return table.p0 / np.concatenate(([1.0], np.cumprod(table.b[:n])))


def orthonormality_residual(table: RecurrenceTable, n: int, nodes: int | None = None) -> float:
    """Max deviation of the Gram matrix of ``p_0..p_n`` from the identity.

    Only Jacobi tables qualify.  With ``x = cos(2t)`` the weighted integrand
    becomes ``t**(2 alpha + 1) (pi/2 - t)**(2 beta + 1)`` times a smooth
    factor; each half of ``[0, pi/2]`` is then integrated with a Gauss-Jacobi
    rule absorbing the algebraic endpoint factor on its side.
    """
    if table.kind != "jacobi":
        raise UnsupportedError("orthonormality_residual needs a built-in Jacobi table")
    table.check_degree(n)
    alpha, beta = table.alpha, table.beta
    ea, eb = 2 * alpha + 1, 2 * beta + 1
    q = nodes or (n + 40)
    half = math.pi / 4
    ts, ws = [], []

    # left half [0, pi/4]: weight t**ea
    s, w = roots_jacobi(q, 0.0, ea)
    t = half * (1 + s) / 2
    ts.append(t)
    ws.append(w * (half / 2) ** (ea + 1) * _sinc_pow(t, ea) * np.cos(t) ** eb)
    # right half [pi/4, pi/2]: weight (pi/2 - t)**eb
    s, w = roots_jacobi(q, 0.0, eb)
    r = half * (1 + s) / 2
    t = math.pi / 2 - r
    ts.append(t)
    ws.append(w * (half / 2) ** (eb + 1) * _sinc_pow(r, eb) * np.sin(t) ** ea)

    t = np.concatenate(ts)
    w = np.concatenate(ws) * 2.0 ** (alpha + beta + 2)
    P = basis_values(table, n, np.cos(2 * t), 0)[0]
    gram = (P * w) @ P.T
    return float(np.max(np.abs(gram - np.eye(n + 1))))


def _sinc_pow(t: np.ndarray, e: float) -> np.ndarray:
    # (sin t / t) ** e, well defined at t = 0
    return np.sinc(t / math.pi) ** e
