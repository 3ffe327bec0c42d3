"""Monte Carlo zero counts for ``G_n = sum a_j p_j`` with iid N(0, 1)
coefficients, plus an exact Sturm-chain counter used as an oracle.

Every sample draws its coefficients from its own counter-based stream keyed
by ``(seed, sample_index)``, so a report depends only on its configuration and
never on batching or the number of worker threads.
"""

from __future__ import annotations

import math
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .ensemble import RecurrenceTable, basis_values, leading_coefficients
from .equilibrium import check_interval, omega_mass
from .errors import CapacityError, DomainError, UnsupportedError

THREADS_ENV = "ZEROVAR_THREADS"
STURM_MAX_DEGREE = 30
BISECT_WIDTH = 1e-13
_MASK64 = (1 << 64) - 1


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise DomainError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


def sample_coefficients(seed: int, sample_index: int, n: int) -> np.ndarray:
    """The n + 1 standard Gaussian coefficients of one sample.

    The Philox key packs ``seed`` (low 64 bits) and ``sample_index`` (high
    64 bits), giving every sample its own stream.
    """
    if n < 0:
        raise DomainError("degree must be non-negative")
    if sample_index < 0 or sample_index > _MASK64:
        raise DomainError("sample_index must fit in 64 bits")
    key = (int(seed) & _MASK64) | (int(sample_index) << 64)
    return np.random.Generator(np.random.Philox(key=key)).standard_normal(n + 1)


def coefficient_block(seed: int, start: int, stop: int, n: int) -> np.ndarray:
    return np.stack([sample_coefficients(seed, i, n) for i in range(start, stop)])


# ---------------------------------------------------------------- grid counter


def zero_grid(n: int, a: float, b: float, grid_per_wavelength: int = 8) -> np.ndarray:
    """Ascending points ``cos(theta)`` with theta uniform over [acos b, acos a]."""
    check_interval(a, b)
    if grid_per_wavelength < 1:
        raise DomainError("grid_per_wavelength must be >= 1")
    count = math.ceil(grid_per_wavelength * max(n, 1) * omega_mass(a, b) * math.pi) + 2
    theta = np.linspace(math.acos(a), math.acos(b), count)
    x = np.cos(theta)
    x[0], x[-1] = a, b
    return x


def _nudge_zeros(values: np.ndarray) -> np.ndarray:
    zero = values == 0.0
    if np.any(zero):
        warnings.warn(
            f"{int(zero.sum())} grid value(s) exactly zero; moved by one ulp",
            RuntimeWarning,
            stacklevel=3,
        )
        values = np.where(zero, np.nextafter(0.0, 1.0), values)
    return values


def _sign_changes(values: np.ndarray) -> np.ndarray:
    s = np.signbit(values)
    return (s[..., 1:] != s[..., :-1]).sum(axis=-1)


def _bisect(f, lo: float, hi: float, flo: float) -> tuple[float, float]:
    while hi - lo > BISECT_WIDTH:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid)
        if fm == 0.0:
            return mid, mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return lo, hi


def zero_brackets(
    table: RecurrenceTable, n: int, coeffs, a: float, b: float, grid_per_wavelength: int = 8
) -> list[tuple[float, float]]:
    """Brackets of width at most 1e-13 around each sign change of G_n in [a, b]."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (n + 1,):
        raise DomainError(f"expected {n + 1} coefficients, got shape {coeffs.shape}")
    table.check_degree(n)
    x = zero_grid(n, a, b, grid_per_wavelength)
    values = _nudge_zeros(coeffs @ basis_values(table, n, x, 0)[0])

    def f(t):
        return float(coeffs @ basis_values(table, n, t, 0)[0])

    flips = np.nonzero(np.signbit(values[1:]) != np.signbit(values[:-1]))[0]
    return [_bisect(f, x[i], x[i + 1], values[i]) for i in flips]


def count_zeros_grid(
    table: RecurrenceTable, n: int, coeffs, a: float, b: float, grid_per_wavelength: int = 8
) -> int:
    """Number of sign changes of G_n on the theta-uniform grid over [a, b]."""
    return len(zero_brackets(table, n, coeffs, a, b, grid_per_wavelength))


# ---------------------------------------------------------------- exact oracle


def _trim(p):
    p = list(p)
    while p and p[-1] == 0:
        p.pop()
    return p


def _primitive(p):
    g = 0
    for c in p:
        g = math.gcd(g, c)
    return [c // g for c in p] if g > 1 else p


def _scaled_rem(f, g):
    """Remainder of f by g times a positive constant (integer coefficients)."""
    f = list(f)
    lg = g[-1]
    scale, sign = abs(lg), 1 if lg > 0 else -1
    while len(f) >= len(g):
        shift = len(f) - len(g)
        lf = f[-1]
        f = [scale * c for c in f]
        for i, d in enumerate(g):
            f[shift + i] -= sign * lf * d
        f = _primitive(_trim(f))
    return f


def _integer_poly(coeffs):
    p = _trim(Fraction(c) for c in coeffs)
    den = 1
    for c in p:
        den = den * c.denominator // math.gcd(den, c.denominator)
    return _primitive([int(c * den) for c in p])


def _derivative(p):
    return [i * c for i, c in enumerate(p)][1:]


def _homogeneous_value(p, x: Fraction) -> int:
    """``den^deg * p(num / den)``, which has the sign of ``p(x)``."""
    num, den = x.numerator, x.denominator
    acc, power = 0, 1
    for c in reversed(p):
        acc = acc * num + c * power
        power *= den
    return acc


def _variations(chain, x: Fraction) -> int:
    signs = [v for v in (_homogeneous_value(p, x) for p in chain) if v != 0]
    return sum((u > 0) != (v > 0) for u, v in zip(signs, signs[1:]))


def sturm_chain(coeffs) -> list[list[int]]:
    """Sturm chain of the square-free part of a polynomial.

    ``coeffs`` are ascending and exact (ints or Fractions); the chain is kept
    in primitive integer form, every remainder scaled by a positive factor.
    """
    p = _integer_poly(coeffs)
    if not p:
        raise DomainError("zero polynomial has no finite root count")
    if len(p) - 1 > STURM_MAX_DEGREE:
        raise CapacityError(f"degree {len(p) - 1} exceeds the exact-count cap {STURM_MAX_DEGREE}")
    if len(p) == 1:
        return [p]
    chain = [p, _primitive(_derivative(p))]
    while len(chain[-1]) > 1:
        r = _scaled_rem(chain[-2], chain[-1])
        if not r:
            break
        chain.append([-c for c in r])
    if len(chain[-1]) > 1:
        # repeated roots: the chain ends at gcd(p, p'); divide it out of every member
        g = [Fraction(c) for c in chain[-1]]
        return sturm_chain(_exact_quotient([Fraction(c) for c in p], g))
    return chain


def _exact_quotient(num, den):
    num = list(num)
    q = [Fraction(0)] * (len(num) - len(den) + 1)
    while len(num) >= len(den):
        shift = len(num) - len(den)
        factor = num[-1] / den[-1]
        q[shift] = factor
        for i, d in enumerate(den):
            num[shift + i] -= factor * d
        num = _trim(num)
    return q


def sturm_count(coeffs, a, b) -> int:
    """Exact number of distinct real roots in (a, b].

    ``coeffs`` are ascending monomial coefficients (anything ``Fraction``
    accepts); ``a`` and ``b`` are converted exactly as well.
    """
    a, b = Fraction(a), Fraction(b)
    if not a < b:
        raise DomainError("need a < b")
    chain = sturm_chain(coeffs)
    if len(chain) == 1:
        return 0
    return _variations(chain, a) - _variations(chain, b)


def monic_jacobi_rational(alpha, beta, n: int):
    """Exact monic recurrence ``x pi_k - pi_{k+1} = a_k pi_k + b_k^2 pi_{k-1}``.

    Returns lists ``a[0..n-1]`` and ``b2[1..n-1]`` (``b2[k-1] = b_k^2``) of
    Fractions for rational Jacobi parameters.
    """
    al, be = Fraction(alpha), Fraction(beta)
    s = al + be
    a, b2 = [], []
    for k in range(n):
        if k == 0:
            a.append((be - al) / (s + 2))
        else:
            a.append((be * be - al * al) / ((2 * k + s) * (2 * k + s + 2)))
    for k in range(1, n):
        if k == 1:
            b2.append(4 * (1 + al) * (1 + be) / ((s + 2) ** 2 * (s + 3)))
        else:
            t = 2 * k + s
            b2.append(4 * k * (k + al) * (k + be) * (k + s) / (t * t * (t - 1) * (t + 1)))
    return a, b2


def to_monomial(table: RecurrenceTable, n: int, coeffs) -> list[Fraction]:
    """Ascending monomial coefficients of ``sum coeffs[j] p_j``.

    Only built-in Jacobi tables are supported.  Each ``coeffs[j] gamma_j`` is
    rounded once to a double and then carried exactly; the monic polynomials
    come from the exact rational recurrence.
    """
    if table.kind != "jacobi":
        raise UnsupportedError("exact conversion needs a Jacobi table")
    table.check_degree(n)
    coeffs = np.asarray(coeffs, dtype=float)
    gamma = leading_coefficients(table, n)
    weights = [Fraction(float(c)) for c in coeffs * gamma]
    a, b2 = monic_jacobi_rational(table.alpha, table.beta, n + 1)
    out = [Fraction(0)] * (n + 1)
    prev, cur = [], [Fraction(1)]
    for j in range(n + 1):
        for i, c in enumerate(cur):
            out[i] += weights[j] * c
        if j == n:
            break
        nxt = [Fraction(0)] + cur
        for i, c in enumerate(cur):
            nxt[i] -= a[j] * c
        if j >= 1:
            for i, c in enumerate(prev):
                nxt[i] -= b2[j - 1] * c
        prev, cur = cur, nxt
    return out


# ---------------------------------------------------------------- simulation


@dataclass(frozen=True)
class GridConfig:
    grid_per_wavelength: int = 8
    batch: int = 256
    threads: int | None = None
    max_seconds: float | None = None


@dataclass
class SimulationReport:
    ensemble: str
    n: int
    a: float
    b: float
    samples: int
    seed: int
    mean: float
    variance: float
    variance_stderr: float
    mean_stderr: float
    histogram: dict[int, int]
    grid_points: int
    config: dict = field(default_factory=dict)
    complete: bool = True

    def as_dict(self) -> dict:
        d = asdict(self)
        d["histogram"] = {str(k): v for k, v in sorted(self.histogram.items())}
        return d


def histogram_moments(histogram: dict[int, int]) -> tuple[int, float, float, float, float]:
    """(count, mean, unbiased variance, stderr of mean, stderr of variance)."""
    total = sum(histogram.values())
    if total < 2:
        raise DomainError("need at least two samples")
    mean = math.fsum(k * f for k, f in histogram.items()) / total
    m2 = math.fsum(f * (k - mean) ** 2 for k, f in histogram.items()) / total
    m4 = math.fsum(f * (k - mean) ** 4 for k, f in histogram.items()) / total
    var = m2 * total / (total - 1)
    # large-sample standard error of the sample variance
    var_se = math.sqrt(max(m4 - (total - 3) / (total - 1) * var * var, 0.0) / total)
    return total, mean, var, math.sqrt(var / total), var_se


def simulate(
    table: RecurrenceTable,
    n: int,
    a: float,
    b: float,
    samples: int,
    seed: int,
    grid: GridConfig | None = None,
) -> SimulationReport:
    """Zero-count statistics of ``samples`` independent draws of G_n on [a, b]."""
    grid = grid or GridConfig()
    if samples < 2:
        raise DomainError("need at least two samples")
    if n < 0:
        raise DomainError("degree must be non-negative")
    table.check_degree(n)
    check_interval(a, b)
    if a == b:
        raise DomainError("need a < b")
    x = zero_grid(n, a, b, grid.grid_per_wavelength)
    basis_t = np.ascontiguousarray(basis_values(table, n, x, 0)[0])  # (n+1, N)
    threads = grid.threads or default_threads()
    starts = list(range(0, samples, grid.batch))
    deadline = None if grid.max_seconds is None else time.monotonic() + grid.max_seconds

    def run(start):
        if deadline is not None and time.monotonic() > deadline:
            return None
        stop = min(start + grid.batch, samples)
        values = _nudge_zeros(coefficient_block(seed, start, stop, n) @ basis_t)
        return _sign_changes(values)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            blocks = list(pool.map(run, starts))
    else:
        blocks = [run(s) for s in starts]
    done = [blk for blk in blocks if blk is not None]
    complete = len(done) == len(blocks)
    counts = np.concatenate(done) if done else np.zeros(0, dtype=int)
    hist = {int(k): int(v) for k, v in enumerate(np.bincount(counts)) if v}
    total, mean, var, mean_se, var_se = (
        histogram_moments(hist) if counts.size >= 2 else (counts.size, math.nan, math.nan, math.nan, math.nan)
    )
    return SimulationReport(
        ensemble=table.name,
        n=n,
        a=a,
        b=b,
        samples=int(total),
        seed=int(seed),
        mean=mean,
        variance=var,
        variance_stderr=var_se,
        mean_stderr=mean_se,
        histogram=hist,
        grid_points=int(x.size),
        config={
            "grid_per_wavelength": grid.grid_per_wavelength,
            "batch": grid.batch,
            "threads": threads,
            "max_seconds": grid.max_seconds,
            "requested_samples": samples,
            "rng": "philox-4x64, key = seed | sample_index << 64",
        },
        complete=complete,
    )
