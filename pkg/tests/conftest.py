import math

import mpmath as mp
import pytest

from zerovar.ensemble import chebyshev, jacobi_recurrence, legendre

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def leg():
    return legendre(2100)


@pytest.fixture(scope="session")
def cheb():
    return chebyshev(2100)


@pytest.fixture(scope="session")
def jac():
    return jacobi_recurrence(0.5, 1.5, 300)


def record(criterion: int, ok: bool, detail: str) -> None:
    line = f"CRITERION {criterion}: {'PASS' if ok else 'FAIL'} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


# high-precision oracles -------------------------------------------------


def mp_basis(table, n, x, dps=50):
    """p_j, p_j', p_j'' at x by the recurrence in mpmath arithmetic.

    The recurrence coefficients are the table's doubles, so this checks the
    floating-point summation, not the coefficient formulas.
    """
    with mp.workdps(dps):
        x = mp.mpf(x)
        a = [mp.mpf(float(v)) for v in table.a[:n]]
        b = [mp.mpf(float(v)) for v in table.b[:n]]
        P = [[mp.mpf(table.p0), mp.mpf(0), mp.mpf(0)]]
        prev = [mp.mpf(0)] * 3
        for k in range(n):
            cur = P[-1]
            bk = b[k - 1] if k else mp.mpf(0)
            nxt = [
                ((x - a[k]) * cur[0] - bk * prev[0]) / b[k],
                ((x - a[k]) * cur[1] + cur[0] - bk * prev[1]) / b[k],
                ((x - a[k]) * cur[2] + 2 * cur[1] - bk * prev[2]) / b[k],
            ]
            prev = cur
            P.append(nxt)
        return P


def mp_rho2(table, n, x, y, dps=60):
    """rho2(x, y) from kernel sums in high precision."""
    with mp.workdps(dps):
        px = mp_basis(table, n, x, dps)
        py = mp_basis(table, n, y, dps)

        def k(u, r, v, s):
            return mp.fsum(u[j][r] * v[j][s] for j in range(n + 1))

        sig = mp.matrix([
            [k(px, 0, px, 0), k(px, 0, py, 0), k(px, 0, px, 1), k(px, 0, py, 1)],
            [k(py, 0, px, 0), k(py, 0, py, 0), k(py, 0, px, 1), k(py, 0, py, 1)],
            [k(px, 1, px, 0), k(px, 1, py, 0), k(px, 1, px, 1), k(px, 1, py, 1)],
            [k(py, 1, px, 0), k(py, 1, py, 0), k(py, 1, px, 1), k(py, 1, py, 1)],
        ])
        A = sig[0:2, 0:2]
        B = sig[0:2, 2:4]
        Cm = sig[2:4, 2:4]
        om = Cm - B.T * mp.inverse(A) * B
        delta = mp.det(A)
        det = om[0, 0] * om[1, 1] - om[0, 1] ** 2
        det = max(det, mp.mpf(0))
        r = om[0, 1] / mp.sqrt(om[0, 0] * om[1, 1])
        val = (mp.sqrt(det) + om[0, 1] * mp.asin(r)) / (mp.pi**2 * mp.sqrt(delta))
        rho = [mp.sqrt(k(p, 1, p, 1) / k(p, 0, p, 0) - (k(p, 0, p, 1) / k(p, 0, p, 0)) ** 2) / mp.pi
               for p in (px, py)]
        return float(val), float(val - rho[0] * rho[1]), (om, delta, sig)


def mp_xi(u, dps=50):
    """Xi(u) from the determinant definitions in high precision."""
    with mp.workdps(dps):
        u = mp.mpf(u)
        S = lambda v: mp.sin(mp.pi * v) / (mp.pi * v)  # noqa: E731
        s0 = S(u)
        s1 = mp.diff(S, u, 1)
        s2 = mp.diff(S, u, 2)
        c = mp.pi**2 / 3
        F = mp.det(mp.matrix([[1, s0, 0, s1], [s0, 1, -s1, 0], [0, -s1, c, -s2], [s1, 0, -s2, c]]))
        G = mp.det(mp.matrix([[1, s0, -s1], [s0, 1, 0], [-s1, 0, c]]))
        H = mp.det(mp.matrix([[1, s0, 0], [s0, 1, -s1], [s1, 0, -s2]]))
        om = 1 - s0**2
        val = (mp.sqrt(F) / om + H / om ** mp.mpf(1.5) * mp.asin(H / G)) / mp.pi**2 - mp.mpf(1) / 3
        return float(val), (float(F), float(G), float(H))


# probability that the degree-1 Legendre ensemble vanishes in [-1/2, 1/2]
P_N1 = (2 / math.pi) * math.atan(math.sqrt(3) / 2)
