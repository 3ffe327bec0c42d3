"""Fixed panel rules shared by the integrators."""

from __future__ import annotations

import math

import numpy as np

# 15-point Kronrod extension of the 7-point Gauss rule on [-1, 1] (QUADPACK)
_XGK = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
]
_WGK = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
]
_WG = {
    1: 0.129484966168869693270611432679082,
    3: 0.279705391489276667901467771423780,
    5: 0.381830050505118944950369775488975,
    7: 0.417959183673469387755102040816327,
}


def _symmetric(half_nodes, half_weights):
    nodes = np.array([-v for v in half_nodes[:-1]] + half_nodes[::-1])
    weights = np.array(half_weights[:-1] + half_weights[::-1])
    return nodes, weights


GK15_NODES, GK15_WEIGHTS = _symmetric(_XGK, _WGK)
G7_WEIGHTS_ON_GK15 = _symmetric(_XGK, [_WG.get(i, 0.0) for i in range(8)])[1]


def gauss_legendre(order: int):
    """Gauss-Legendre nodes and weights on [-1, 1]."""
    return np.polynomial.legendre.leggauss(order)


def panel_nodes(edges, nodes, weights):
    """Map a reference rule onto consecutive panels.

    Returns flattened abscissae and weights for the panels delimited by
    ``edges`` (monotone, length P + 1).
    """
    edges = np.asarray(edges, dtype=float)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = mid[:, None] + half[:, None] * nodes[None, :]
    w = half[:, None] * weights[None, :]
    return x.ravel(), w.ravel()


def split_edges(lo: float, hi: float, max_width: float):
    """Equal panels covering [lo, hi] with width at most ``max_width``."""
    if hi <= lo:
        return np.array([lo])
    count = max(1, math.ceil((hi - lo) / max_width - 1e-12))
    return np.linspace(lo, hi, count + 1)


def pairwise_sum(values) -> float:
    """Exactly rounded sum, independent of ordering."""
    return math.fsum(np.ravel(values).tolist())
