"""Finite-n expectation and variance of zero counts from the Kac-Rice
intensities, and the large-n prediction ``n c omega([a, b])``.

Variance is ``int int (rho2 - rho1 rho1) dx dy + int rho1 dx``.  For every
outer node x the inner y-range is cut at ``x`` (where the integrand has a
kink) and at ``x -+ Lambda / (n omega(x))``; pairs closer than that are the
central part, the rest the tail.  Inner nodes live on one global y-grid of
Gauss-Kronrod panels at most half a local wavelength wide, so kernel sums for
all pairs come from matrix products; only the panels holding a cut point get
fresh nodes.  Pairs within one scaled unit of the diagonal are re-evaluated
through the orthogonal factorisation, which stays accurate where the
kernel-sum formulas cancel.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .ensemble import RecurrenceTable, basis_values
from .equilibrium import check_interval, omega_density, omega_mass
from .errors import DomainError
from .intensity import PI, _rho1_from_sums, _rho2_from_factors, pair_intensities, rho1_many
from .kernels import factor_columns
from .quadrature import G7_WEIGHTS_ON_GK15, GK15_NODES, GK15_WEIGHTS, split_edges

_NODE_COUNT = GK15_NODES.size


@dataclass(frozen=True)
class VarianceQuadratureConfig:
    """Quadrature settings for :func:`variance`.

    ``lam`` is the central/tail split in scaled units; ``eta`` only feeds the
    ``inner_part`` diagnostic.  Panel widths are in local wavelengths
    ``1 / (n omega)`` at the interval's largest density.
    """

    lam: float = 30.0
    eta: float = 0.05
    panel_target: float = 1e-3
    max_evals: int = 2_000_000_000
    tail_width: float = 0.5
    outer_width: float = 1.0
    near_u: float = 1.0
    block_cells: int = 1_500_000

    def __post_init__(self):
        if not (0 < self.eta < self.lam):
            raise DomainError("need 0 < eta < lambda")
        if self.panel_target <= 0 or self.tail_width <= 0 or self.outer_width <= 0:
            raise DomainError("tolerances and widths must be positive")
        if self.max_evals < 1:
            raise DomainError("max_evals must be positive")


@dataclass(frozen=True)
class VarianceResult:
    variance: float
    expectation: float
    central_part: float
    tail_part: float
    diagonal_part: float
    inner_part: float
    error_estimate: float
    evals: int
    complete: bool

    def as_dict(self) -> dict:
        return asdict(self)


def _check_open_interval(a: float, b: float) -> None:
    check_interval(a, b)
    if a <= -1 or b >= 1:
        raise DomainError("interval must lie strictly inside (-1, 1)")


def _gk_rule(edges):
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * GK15_NODES).ravel()
    wk = (half[:, None] * GK15_WEIGHTS).ravel()
    wg = (half[:, None] * G7_WEIGHTS_ON_GK15).ravel()
    return x, wk, wg


def expected_zeros(
    table: RecurrenceTable, n: int, a: float, b: float, tol: float = 1e-10, max_panels: int = 200_000
) -> float:
    """Expected number of zeros in [a, b]: adaptive Gauss-Kronrod on rho1."""
    if a == b:
        return 0.0
    _check_open_interval(a, b)
    table.check_degree(n)
    if n == 0:
        return 0.0
    s_max = n * max(omega_density(a), omega_density(b))
    edges = split_edges(a, b, 1.0 / s_max)
    left, right = edges[:-1], edges[1:]
    total_parts = []
    while left.size:
        half = 0.5 * (right - left)
        mid = 0.5 * (right + left)
        xs = mid[:, None] + half[:, None] * GK15_NODES
        f = rho1_many(table, n, xs)
        k = half * (f @ GK15_WEIGHTS)
        g = half * (f @ G7_WEIGHTS_ON_GK15)
        est = abs(math.fsum(total_parts) + k.sum())
        ok = np.abs(k - g) <= tol * max(est, 1e-300) * (right - left) / (b - a)
        total_parts.extend(k[ok].tolist())
        if ok.all() or len(total_parts) + 2 * (~ok).sum() > max_panels:
            total_parts.extend(k[~ok].tolist())
            break
        l, r = left[~ok], right[~ok]
        m = 0.5 * (l + r)
        left, right = np.concatenate([l, m]), np.concatenate([m, r])
    return math.fsum(total_parts)


def asymptotic_variance(a: float, b: float, c: float) -> float:
    """Limit of Var / n: ``c`` times the equilibrium mass of [a, b]."""
    return c * omega_mass(a, b)


def _split_panels(x, cuts, y_edges, a, b):
    """Panels of the global y-grid that hold a cut point, and their pieces."""
    split = {}
    for c in cuts:
        if not (a < c < b):
            continue
        k = int(np.searchsorted(y_edges, c, side="right")) - 1
        k = min(max(k, 0), y_edges.size - 2)
        lo, hi = y_edges[k], y_edges[k + 1]
        if c - lo <= 1e-14 * (hi - lo) or hi - c <= 1e-14 * (hi - lo):
            continue
        split.setdefault(k, [lo, hi]).append(c)
    return {k: sorted(v) for k, v in split.items()}


class _Grid:
    """Basis data on the global inner grid."""

    def __init__(self, table, n, edges):
        self.edges = edges
        self.y, self.wk, self.wg = _gk_rule(edges)
        self.panels = edges.size - 1
        B = basis_values(table, n, self.y, 1)
        self.P, self.D = B[0], B[1]
        self.K = np.einsum("ij,ij->j", self.P, self.P)
        self.K01 = np.einsum("ij,ij->j", self.P, self.D)
        self.K11 = np.einsum("ij,ij->j", self.D, self.D)
        self.rho1, _ = _rho1_from_sums(self.K, self.K01, self.K11)


def _sum_route_rho2(Kxx, dxx, K11xx, g, Kxy, dxy, dyx, K11xy):
    """rho2 from kernel sums (far from the diagonal only)."""
    Kyy, dyy, K11yy = g.K[None, :], g.K01[None, :], g.K11[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        delta = Kxx * Kyy - Kxy * Kxy
        o11 = K11xx - (Kyy * dxx**2 - 2 * Kxy * dxx * dyx + Kxx * dyx**2) / delta
        o22 = K11yy - (Kyy * dxy**2 - 2 * Kxy * dxy * dyy + Kxx * dyy**2) / delta
        o12 = K11xy - (Kyy * dxx * dxy - Kxy * dxy * dyx - Kxy * dxx * dyy + Kxx * dyx * dyy) / delta
        det = np.maximum(o11 * o22 - o12 * o12, 0.0)
        prod = np.sqrt(np.maximum(o11, 0.0) * np.maximum(o22, 0.0))
        corr = np.clip(np.where(prod > 0, o12 / prod, 0.0), -1.0, 1.0)
        val = (np.sqrt(det) + o12 * np.arcsin(corr)) / (PI**2 * np.sqrt(delta))
    return val


def _inner_block(table, n, X, grid, cfg, a, b):
    """Inner integrals for a batch of outer nodes.

    Returns arrays (central, tail, inner_eta, err, evals) over X.
    """
    bx = X.size
    s = n * omega_density(X)
    L = cfg.lam / s
    BX = basis_values(table, n, X, 1)
    PX, DX = BX[0], BX[1]
    Kxx = np.einsum("ij,ij->j", PX, PX)[:, None]
    dxx = np.einsum("ij,ij->j", PX, DX)[:, None]
    K11xx = np.einsum("ij,ij->j", DX, DX)[:, None]
    rho1x, _ = _rho1_from_sums(Kxx[:, 0], dxx[:, 0], K11xx[:, 0])

    Kxy = PX.T @ grid.P
    dxy = PX.T @ grid.D  # K01(x, y)
    dyx = DX.T @ grid.P  # K01(y, x)
    K11xy = DX.T @ grid.D
    rho2 = _sum_route_rho2(Kxx, dxx, K11xx, grid, Kxy, dxy, dyx, K11xy)
    del Kxy, dxy, dyx, K11xy

    dist = grid.y[None, :] - X[:, None]
    u = dist * s[:, None]
    near = np.abs(u) < cfg.near_u
    ii, jj = np.nonzero(near)
    if ii.size:
        f = factor_columns(PX[:, ii], grid.P[:, jj], DX[:, ii], grid.D[:, jj])
        rho2[ii, jj] = _rho2_from_factors(f)
    defect = rho2 - rho1x[:, None] * grid.rho1[None, :]

    include = np.ones_like(defect, dtype=bool)
    fresh_x, fresh_y, fresh_wk, fresh_wg, fresh_row, fresh_pan = [], [], [], [], [], []
    pan_id = 0
    for i in range(bx):
        split = _split_panels(X[i], (X[i], X[i] - L[i], X[i] + L[i]), grid.edges, a, b)
        for k, pts in split.items():
            include[i, k * _NODE_COUNT:(k + 1) * _NODE_COUNT] = False
            for lo, hi in zip(pts[:-1], pts[1:]):
                yy, wk, wg = _gk_rule(np.array([lo, hi]))
                fresh_x.append(np.full(_NODE_COUNT, X[i]))
                fresh_y.append(yy)
                fresh_wk.append(wk)
                fresh_wg.append(wg)
                fresh_row.append(np.full(_NODE_COUNT, i))
                fresh_pan.append(np.full(_NODE_COUNT, pan_id))
                pan_id += 1

    central_mask = np.abs(dist) < L[:, None]
    eta_mask = np.abs(u) < cfg.eta
    fk = np.where(include, defect, 0.0)
    central = (fk * central_mask) @ grid.wk
    tail = (fk * ~central_mask) @ grid.wk
    inner_eta = (fk * eta_mask) @ grid.wk
    diff = (fk * (grid.wk - grid.wg)).reshape(bx, grid.panels, _NODE_COUNT).sum(-1)
    err = np.abs(diff).sum(-1)
    evals = int(include.sum())

    if fresh_x:
        fx = np.concatenate(fresh_x)
        fy = np.concatenate(fresh_y)
        wk = np.concatenate(fresh_wk)
        wg = np.concatenate(fresh_wg)
        row = np.concatenate(fresh_row)
        pan = np.concatenate(fresh_pan)
        res = pair_intensities(table, n, fx, fy, check=False)
        fd = res["defect"]
        # classify each fresh sub-panel by its midpoint; cuts sit on sub-panel edges
        mids = np.bincount(pan, weights=fy) / _NODE_COUNT
        is_central = np.abs(mids[pan] - fx) < L[row]
        central += np.bincount(row, weights=fd * wk * is_central, minlength=bx)
        tail += np.bincount(row, weights=fd * wk * ~is_central, minlength=bx)
        inner_eta += np.bincount(row, weights=fd * wk * (np.abs(fy - fx) * s[row] < cfg.eta), minlength=bx)
        perr = np.abs(np.bincount(pan, weights=fd * (wk - wg)))
        err += np.bincount(row[::_NODE_COUNT], weights=perr, minlength=bx)
        evals += fx.size
    return central, tail, inner_eta, err, rho1x, evals


def variance(
    table: RecurrenceTable,
    n: int,
    a: float,
    b: float,
    cfg: VarianceQuadratureConfig | None = None,
) -> VarianceResult:
    """Variance of the number of zeros of the degree-n ensemble in [a, b]."""
    cfg = cfg or VarianceQuadratureConfig()
    _check_open_interval(a, b)
    if n < 1:
        raise DomainError("variance needs degree >= 1")
    table.check_degree(n)
    s_max = n * max(omega_density(a), omega_density(b))
    grid = _Grid(table, n, split_edges(a, b, cfg.tail_width / s_max))

    edges = split_edges(a, b, cfg.outer_width / s_max)
    left, right = edges[:-1], edges[1:]
    acc = {k: [] for k in ("central", "tail", "eta", "diag", "err")}
    evals = 0
    complete = True
    total_guess = None
    while left.size:
        half = 0.5 * (right - left)
        mid = 0.5 * (right + left)
        X = (mid[:, None] + half[:, None] * GK15_NODES).ravel()
        cols = {k: np.empty(X.size) for k in ("central", "tail", "eta", "err", "rho1")}
        step = max(1, cfg.block_cells // max(grid.y.size, 1))
        for lo in range(0, X.size, step):
            sl = slice(lo, lo + step)
            c_, t_, e_, r_, rho_, ev = _inner_block(table, n, X[sl], grid, cfg, a, b)
            cols["central"][sl], cols["tail"][sl], cols["eta"][sl] = c_, t_, e_
            cols["err"][sl], cols["rho1"][sl] = r_, rho_
            evals += ev
        shape = (left.size, _NODE_COUNT)
        wk = half[:, None] * GK15_WEIGHTS
        wg = half[:, None] * G7_WEIGHTS_ON_GK15
        integrand = (cols["central"] + cols["tail"] + cols["rho1"]).reshape(shape)
        pk = (integrand * wk).sum(1)
        perr = np.abs(pk - (integrand * wg).sum(1)) + (cols["err"].reshape(shape) * wk).sum(1)
        parts = {
            "central": (cols["central"].reshape(shape) * wk).sum(1),
            "tail": (cols["tail"].reshape(shape) * wk).sum(1),
            "eta": (cols["eta"].reshape(shape) * wk).sum(1),
            "diag": (cols["rho1"].reshape(shape) * wk).sum(1),
        }
        if total_guess is None:
            total_guess = abs(pk.sum())
        budget = cfg.panel_target * max(total_guess, 1e-12) * (right - left) / (b - a)
        ok = perr <= budget
        out_of_budget = evals >= cfg.max_evals
        if out_of_budget and not ok.all():
            complete = False
            ok[:] = True
        for key in ("central", "tail", "eta", "diag"):
            acc[key].extend(parts[key][ok].tolist())
        acc["err"].extend(perr[ok].tolist())
        if ok.all():
            break
        l, r = left[~ok], right[~ok]
        m = 0.5 * (l + r)
        left, right = np.concatenate([l, m]), np.concatenate([m, r])

    central = math.fsum(acc["central"])
    tail = math.fsum(acc["tail"])
    diag = math.fsum(acc["diag"])
    return VarianceResult(
        variance=central + tail + diag,
        expectation=diag,
        central_part=central,
        tail_part=tail,
        diagonal_part=diag,
        inner_part=math.fsum(acc["eta"]),
        error_estimate=math.fsum(acc["err"]),
        evals=evals,
        complete=complete,
    )
