"""The group SL(2,R) x R^2d, its theta lattice Gamma, and the cusp majorant Psi.

Elements are pairs (M, xi) with (M, xi)(M', xi') = (M M', xi + M xi'); M acts
on xi = (x, y) in R^d x R^d by (a x + b y, c x + d y). In Iwasawa
coordinates M = n(u) Phi^(-log v) R(phi) with tau = u + i v = M.i.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def n_minus(u):
    return np.array([[1.0, u], [0.0, 1.0]])


def phi_flow(t):
    """Phi^t = diag(e^(-t/2), e^(t/2))."""
    return np.diag([math.exp(-t / 2), math.exp(t / 2)])


def rotation(phi):
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, -s], [s, c]])


def iwasawa_matrix(tau, phi=0.0):
    u, v = tau.real, tau.imag
    return n_minus(u) @ phi_flow(-math.log(v)) @ rotation(phi)


def iwasawa(M):
    """(tau, phi) with M = n(u) Phi^(-log v) R(phi), tau = u + i v."""
    a, b, c, d = M[0, 0], M[0, 1], M[1, 0], M[1, 1]
    den = c * c + d * d
    v = 1.0 / den
    u = (a * c + b * d) / den
    phi = math.atan2(c, d)
    return complex(u, v), phi


@dataclass(frozen=True, eq=False)
class GroupElement:
    M: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "M", np.asarray(self.M, float).reshape(2, 2))
        object.__setattr__(self, "xi", np.asarray(self.xi, float).ravel())

    @classmethod
    def from_coords(cls, tau, phi=0.0, xi=None, d=None):
        if xi is None:
            xi = np.zeros(2 * (d or 1))
        return cls(iwasawa_matrix(complex(tau), phi), xi)

    @property
    def d(self):
        return self.xi.size // 2

    @property
    def coords(self):
        return iwasawa(self.M)

    @property
    def tau(self):
        return self.coords[0]

    @property
    def phi(self):
        return self.coords[1]

    @property
    def x(self):
        return self.xi[:self.d]

    @property
    def y(self):
        return self.xi[self.d:]

    def act(self, xi):
        """M acting on (x, y)."""
        d = self.d
        x, y = xi[:d], xi[d:]
        (a, b), (c, dd) = self.M
        return np.r_[a * x + b * y, c * x + dd * y]

    def inverse(self):
        (a, b), (c, dd) = self.M
        Mi = np.array([[dd, -b], [-c, a]])  # det M = 1
        return GroupElement(Mi, -GroupElement(Mi, self.xi).act(self.xi))


def group_mul(g: GroupElement, h: GroupElement) -> GroupElement:
    return GroupElement(g.M @ h.M, g.xi + g.act(h.xi))


@dataclass(frozen=True)
class GammaElement:
    """(gamma, (ab s, cd s) + m) with gamma in SL(2,Z), s = (1/2, ..., 1/2)."""

    gamma: tuple
    m: tuple

    @property
    def d(self):
        return len(self.m) // 2

    def element(self) -> GroupElement:
        (a, b), (c, dd) = self.gamma
        d = self.d
        shift = np.r_[np.full(d, 0.5 * a * b), np.full(d, 0.5 * c * dd)]
        return GroupElement(np.array(self.gamma, float), shift + np.asarray(self.m, float))


def gamma_T(d):
    return GammaElement(((1, 1), (0, 1)), (0,) * (2 * d))


def gamma_S(d):
    return GammaElement(((0, -1), (1, 0)), (0,) * (2 * d))


def reduce_to_fundamental(g: GroupElement, max_steps=10_000):
    """Return (gamma, g0) with g = gamma g0, gamma in Gamma and g0 in the
    standard fundamental domain (|Re tau0| <= 1/2, |tau0| >= 1) with the
    translation part reduced to [-1/2, 1/2)^2d."""
    d = g.d
    tau = complex(g.tau)
    delta = np.array([[1, 0], [0, 1]], dtype=object)
    for _ in range(max_steps):
        n = round(tau.real)
        if n:
            tau -= n
            delta = np.array([[1, -n], [0, 1]], dtype=object) @ delta
        if abs(tau) < 1 - 1e-14:
            tau = -1 / tau
            delta = np.array([[0, -1], [1, 0]], dtype=object) @ delta
        else:
            break
    (a, b), (c, dd) = delta
    shift = np.r_[np.full(d, 0.5 * float(a * b % 2)), np.full(d, 0.5 * float(c * dd % 2))]
    D = np.array(delta, dtype=float)
    # the product delta M cancels about log10(1/v) digits; do it in extended precision
    Dl = np.array(delta, dtype=np.longdouble)
    M0 = (Dl @ g.M.astype(np.longdouble)).astype(float)
    x, y = g.x.astype(np.longdouble), g.y.astype(np.longdouble)
    xi0 = np.r_[Dl[0, 0] * x + Dl[0, 1] * y, Dl[1, 0] * x + Dl[1, 1] * y]
    xi0 = (xi0 + shift.astype(np.longdouble))
    k = np.floor(xi0 + 0.5)
    xi0 = (xi0 - k).astype(float)
    k = k.astype(float)
    # gamma' = (delta, shift - k) lies in Gamma (shift matches (ab s, cd s) mod Z^2d)
    gp = GroupElement(D, shift - k)
    return gp.inverse(), GroupElement(M0, xi0)


def in_fundamental_domain(tau, tol=1e-12):
    return abs(tau.real) <= 0.5 + tol and abs(tau) >= 1 - tol


# --- cusp majorant ------------------------------------------------------

def coprime_cosets(tau, vmin):
    """Bottom rows (c, d), one per pair +-(c, d), with Im(gamma tau) >= vmin."""
    u, v = tau.real, tau.imag
    out = []
    if v >= vmin:
        out.append((0, 1))
    cmax = int(math.floor(1.0 / math.sqrt(v * vmin))) if vmin > 0 else 0
    bound = v / vmin
    for c in range(1, cmax + 1):
        rem = bound - (c * v) ** 2
        if rem < 0:
            continue
        half = math.sqrt(rem)
        for dd in range(int(math.ceil(-c * u - half)), int(math.floor(-c * u + half)) + 1):
            if math.gcd(c, dd) == 1:
                out.append((c, dd))
    return out


def x_count(tau, R):
    """X_R(tau) = #{gamma in Gamma_inf \\ SL(2,Z): Im(gamma tau) >= R}."""
    return 2 * len(coprime_cosets(tau, R))


def default_fbar(T):
    return lambda z: (1.0 + np.linalg.norm(z, axis=-1)) ** (-2 * T)


def psi_beta(tau, xi, R, beta, fbar=None, T=None, zmax=12.0):
    """Psi^beta_{R,f}(tau, xi) = sum over gamma with v_gamma >= R of
    v_gamma^(beta d/2) sum_m f((y_gamma + m) v_gamma^(1/2)),

    y_gamma = c x + d y. Pairs +-(c, d) are summed once and doubled, which is
    exact for even f.
    """
    tau = complex(tau)
    xi = np.asarray(xi, float)
    d = xi.size // 2
    if T is None:
        T = d + 1
    if fbar is None:
        fbar = default_fbar(T)
    x, y = xi[:d], xi[d:]
    total = 0.0
    for c, dd in coprime_cosets(tau, R):
        vg = tau.imag / abs(c * tau + dd) ** 2
        yg = c * x + dd * y
        yg = yg - np.round(yg)
        M = int(math.ceil(zmax / math.sqrt(vg))) + 1
        ax = np.arange(-M, M + 1)
        grid = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), -1).reshape(-1, d)
        total += 2 * vg ** (beta * d / 2) * np.sum(fbar((yg + grid) * math.sqrt(vg)))
    return float(total)
