"""Equilibrium (arcsine) density of [-1, 1] and its interval masses."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class IntervalMass:
    a: float
    b: float
    mass: float


def omega_density(x):
    """``1 / (pi sqrt(1 - x^2))``; accepts scalars or arrays."""
    xa = np.asarray(x, dtype=float)
    if np.any(np.abs(xa) >= 1) or np.any(~np.isfinite(xa)):
        raise DomainError("omega_density needs |x| < 1")
    val = 1.0 / (math.pi * np.sqrt((1.0 - xa) * (1.0 + xa)))
    return float(val) if np.ndim(x) == 0 else val


def check_interval(a: float, b: float, closed: bool = True) -> None:
    lo_ok = a >= -1 if closed else a > -1
    hi_ok = b <= 1 if closed else b < 1
    if not (math.isfinite(a) and math.isfinite(b)) or not (lo_ok and hi_ok):
        raise DomainError(f"interval ({a}, {b}) not inside [-1, 1]")
    if not a < b:
        raise DomainError(f"interval endpoints out of order: ({a}, {b})")


def omega_mass(a: float, b: float) -> float:
    """Equilibrium mass of [a, b]: ``(arcsin b - arcsin a) / pi``."""
    check_interval(a, b)
    return (math.asin(b) - math.asin(a)) / math.pi


def interval_mass(a: float, b: float) -> IntervalMass:
    return IntervalMass(a, b, omega_mass(a, b))
