"""Limiting transport objects: the golden-rule kernel, energy-shell
integrals and the pairings <L_0(t) a, b>, <L_2(t) a, b>.

The collision kernel is

    Sigma_2(y, y') = 8 pi^2 delta(|y|^2 - |y'|^2) |W^(y - y')|^2,

and shell integrals use the co-area formula
int h(y') delta(|y'|^2 - |y|^2) dy' = |y|^(d-2) / 2 int_{S^(d-1)} h(|y| w) dw.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .lattice import det_sum
from .phasespace import free_evolve_symbol, hs_pairing
from .symbolcalc import ComplexGaussian, SymbolPair, potential_fourier

EIGHT_PI2 = 8 * np.pi ** 2


@dataclass(frozen=True)
class ShellQuadrature:
    """Nodes and weights on the unit sphere S^(d-1); weights sum to its area."""

    d: int
    nodes: np.ndarray
    weights: np.ndarray

    @classmethod
    def default(cls, d, n=None):
        """d = 2: n uniform angles (default 64), exact for trigonometric
        degree n - 1. d = 3: Gauss-Legendre in cos(theta) with n nodes
        (default 16) times 2n uniform azimuths, exact to degree 2n - 1."""
        if d == 2:
            n = 64 if n is None else n
            th = 2 * np.pi * np.arange(n) / n
            return cls(2, np.column_stack([np.cos(th), np.sin(th)]), np.full(n, 2 * np.pi / n))
        if d == 3:
            n = 16 if n is None else n
            z, wz = np.polynomial.legendre.leggauss(n)
            ph = np.pi * np.arange(2 * n) / n
            Z, P = np.meshgrid(z, ph, indexing="ij")
            s = np.sqrt(1 - Z ** 2)
            nodes = np.column_stack([(s * np.cos(P)).ravel(), (s * np.sin(P)).ravel(), Z.ravel()])
            w = np.outer(wz, np.full(2 * n, np.pi / n)).ravel()
            return cls(3, nodes, w)
        raise ValueError("shell quadrature is provided for d = 2 and d = 3")

    @property
    def area(self):
        return float(math.fsum(self.weights))


def sphere_area(d):
    return 2 * math.pi ** (d / 2) / math.gamma(d / 2)


def shell_integral(h, y, quad: ShellQuadrature | None = None):
    """int h(y') delta(|y'|^2 - |y|^2) dy' for h vectorised over rows of y'."""
    y = np.asarray(y, float)
    d = y.size
    quad = quad or ShellQuadrature.default(d)
    rho = float(np.linalg.norm(y))
    if rho == 0.0:
        if d == 2:
            warnings.warn("degenerate shell |y| = 0 in d = 2; taking 0", RuntimeWarning)
        return 0.0
    vals = np.asarray(h(rho * quad.nodes))
    return 0.5 * rho ** (d - 2) * det_sum(quad.weights * vals)


def sigma2_density(y, yp, W_hat=None, tol=1e-9):
    """8 pi^2 |W^(y - y')|^2, the density of Sigma_2 with respect to the shell
    measure. y and y' must have equal length."""
    y = np.asarray(y, float)
    yp = np.asarray(yp, float)
    ny, nyp = np.linalg.norm(y, axis=-1), np.linalg.norm(yp, axis=-1)
    if np.any(np.abs(ny - nyp) > tol * np.maximum(1.0, ny)):
        raise ValueError("sigma2_density needs |y| = |y'|")
    W_hat = W_hat or (lambda z: potential_fourier(1.0, z))
    return EIGHT_PI2 * np.abs(W_hat(y - yp)) ** 2


# --- pairings ----------------------------------------------------------

def L0_pairing(t, pair: SymbolPair):
    """<L_0(t) a, b> = int a(x - t y, y) conj(b(x, y))."""
    return hs_pairing(free_evolve_symbol(pair.a, t, pair.d), pair.b)


def _gain_kernel(pair: SymbolPair, t, s):
    """(y, y') -> int a(x - s y - (t - s) y', y') conj(b(x, y)) dx."""
    d = pair.d
    I, Z = np.eye(d), np.zeros((d, d))
    Aa = np.block([[I, -s * I, -(t - s) * I], [Z, Z, I]])
    Ab = np.block([[I, Z, Z], [Z, I, Z]])
    g = pair.a.pullback(Aa) * pair.b.conj().pullback(Ab)
    return g.integrate_out(range(d))


def _loss_kernel(pair: SymbolPair, t):
    """y -> int a(x - t y, y) conj(b(x, y)) dx."""
    d = pair.d
    g = free_evolve_symbol(pair.a, t, d) * pair.b.conj()
    return g.integrate_out(range(d))


def _radial_extent(g: ComplexGaussian, d, eps=1e-18):
    """Radius beyond which |g(y, .)| is below eps of its peak in y."""
    R = g.M.real[:d, :d]
    lam = np.linalg.eigvalsh(R).min()
    center = np.linalg.solve(g.M.real, g.w.real)[:d] / (2 * np.pi)
    return float(np.linalg.norm(center) + math.sqrt(math.log(1 / eps) / (math.pi * lam)))


def L2_pairing(t, pair: SymbolPair, W_hat=None, s_order=16, radial_order=64,
               quad: ShellQuadrature | None = None):
    """<L_2(t) a, b> with

        L_2(t) a(x, y) = int_0^t int Sigma_2(y, y') [a(x - s y - (t - s) y', y') - a(x - t y, y)] dy' ds.

    s by Gauss-Legendre, y by radial Gauss-Legendre times the shell rule,
    y' on the shell |y'| = |y|, x in closed form.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    d = pair.d
    quad = quad or ShellQuadrature.default(d)
    W_hat = W_hat or (lambda z: potential_fourier(1.0, z))
    loss = _loss_kernel(pair, t)
    rmax = _radial_extent(loss, d)
    xr, wr = np.polynomial.legendre.leggauss(radial_order)
    rho = 0.5 * rmax * (xr + 1)
    wrho = 0.5 * rmax * wr * rho ** (d - 1)
    xs, ws = np.polynomial.legendre.leggauss(s_order)
    ss = 0.5 * t * (xs + 1)
    wss = 0.5 * t * ws
    gains = [_gain_kernel(pair, t, s) for s in ss]
    om = quad.nodes
    terms = []
    for rk, wk in zip(rho, wrho):
        if rk == 0:
            continue
        Y = rk * om                                      # outer y on the sphere of radius rk
        Yp = Y                                           # y' runs over the same sphere
        # sigma on all (y, y') node pairs
        diff = Y[:, None, :] - Yp[None, :, :]
        sig = EIGHT_PI2 * np.abs(W_hat(diff)) ** 2
        shell_w = 0.5 * rk ** (d - 2) * quad.weights     # co-area weights in y'
        pairs = np.concatenate([np.repeat(Y, len(Yp), 0), np.tile(Yp, (len(Y), 1))], 1)
        gain = sum(w * g(pairs).reshape(len(Y), len(Yp)) for w, g in zip(wss, gains))
        lossv = loss(Y)
        inner = (sig * (gain - t * lossv[:, None])) @ shell_w
        terms.append(wk * (quad.weights @ inner))
    return det_sum(np.array(terms))


def shell_pair_integral(f: ComplexGaussian, d, quad: ShellQuadrature | None = None,
                        epsabs=1e-14, epsrel=1e-11):
    """int int f(y1, y2) delta(|y1|^2 - |y2|^2) dy1 dy2
    = 1/2 int_0^inf rho^(2d-3) int int f(rho w1, rho w2) dw1 dw2 drho,
    with the radial integral by adaptive quadrature."""
    quad = quad or ShellQuadrature.default(d)
    om, w = quad.nodes, quad.weights
    n = len(om)
    P = np.concatenate([np.repeat(om, n, 0), np.tile(om, (n, 1))], 1)
    W2 = np.outer(w, w).ravel()

    def radial(rho, part):
        v = 0.5 * rho ** (2 * d - 3) * np.dot(W2, f(rho * P))
        return v.real if part == 0 else v.imag

    rmax = _radial_extent(f, 2 * d)
    re = integrate.quad(radial, 0, rmax, args=(0,), epsabs=epsabs, epsrel=epsrel, limit=200)[0]
    im = integrate.quad(radial, 0, rmax, args=(1,), epsabs=epsabs, epsrel=epsrel, limit=200)[0]
    return complex(re, im)


def corollary_pairing(t, pair: SymbolPair, evolved=True, W_hat=None, quad=None, s_points=None):
    """Second-order limit in pair-shell form,

        2 (2 pi)^2 int_0^t int |W^(y2 - y1)|^2 delta(|y1|^2 - |y2|^2)
            [a(x - (t - s) y1 - s y2, y1) - a(x - t y2, y2)] conj(b(x, y2)) dx dy1 dy2 ds,

    (evolved=False drops the free transport: a(x - s(y2 - y1), y1) - a(x, y2)).
    The s integral is adaptive over the pair-shell integral; an independent
    route to L2_pairing when evolved=True.
    """
    d = pair.d
    I, Z = np.eye(d), np.zeros((d, d))
    What = ComplexGaussian.isotropic(d) if W_hat is None else W_hat
    # |W^(y2 - y1)|^2 as a Gaussian in (y1, y2)
    Wd = What.pullback(np.hstack([-I, I]))
    W2 = Wd * Wd.conj()
    bb = pair.b.conj()

    def term(s, loss):
        # Gaussian in (x, y1, y2) then x integrated out
        if loss:
            Aa = np.block([[I, Z, -(t if evolved else 0.0) * I], [Z, Z, I]])
        elif evolved:
            Aa = np.block([[I, -(t - s) * I, -s * I], [Z, I, Z]])
        else:
            Aa = np.block([[I, s * I, -s * I], [Z, I, Z]])
        Ab = np.block([[I, Z, Z], [Z, Z, I]])
        g = (pair.a.pullback(Aa) * bb.pullback(Ab)).integrate_out(range(d)) * W2
        return shell_pair_integral(g, d, quad)

    def gain(s, part):
        v = term(s, False)
        return v.real if part == 0 else v.imag

    re = integrate.quad(gain, 0, t, args=(0,), epsabs=1e-13, epsrel=1e-10)[0]
    im = integrate.quad(gain, 0, t, args=(1,), epsabs=1e-13, epsrel=1e-10)[0]
    loss = t * term(0.0, True)
    return 2 * (2 * np.pi) ** 2 * (complex(re, im) - loss)


def collision_balance(a_y: ComplexGaussian, y, W_hat=None, quad=None):
    """Gain and loss of the golden-rule collision operator at momentum y,
    int Sigma_2(y, y') a(y') dy' and a(y) int Sigma_2(y, y') dy'."""
    y = np.asarray(y, float)
    W_hat = W_hat or (lambda z: potential_fourier(1.0, z))
    sig = lambda yp: EIGHT_PI2 * np.abs(W_hat(y - yp)) ** 2
    gain = shell_integral(lambda yp: sig(yp) * a_y(yp), y, quad)
    loss = a_y(y) * shell_integral(sig, y, quad)
    return gain, loss
