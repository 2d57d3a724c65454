"""Bloch-fibre pairings, the brute-force matrix propagator and Diophantine screens."""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np

from .lattice import det_sum, lattice_sum
from .phasespace import ScalingParams, bg_rescale
from .symbolcalc import ComplexGaussian, SymbolPair, cg_partial_fourier, potential_fourier

ALPHA_PRESETS = {
    2: (math.sqrt(2) % 1, math.sqrt(3) % 1),
    3: (math.sqrt(2) % 1, math.sqrt(3) % 1, math.sqrt(5) % 1),
}


@dataclass(frozen=True)
class QuasiMomentum:
    alpha: tuple
    kappa_hat: float = float("nan")
    independent: bool = True

    @classmethod
    def preset(cls, d):
        a = ALPHA_PRESETS[d]
        k, ind = diophantine_estimate(a)
        return cls(tuple(a), k, ind)

    @classmethod
    def from_alpha(cls, alpha, q_max=10_000):
        k, ind = diophantine_estimate(alpha, q_max)
        return cls(tuple(float(x) for x in alpha), k, ind)

    @property
    def vec(self):
        return np.asarray(self.alpha, dtype=float)


@dataclass(frozen=True)
class LatticeWindow:
    """Lattice points m with |m + alpha - center| <= radius."""

    center: tuple
    radius: float
    eps_trunc: float = 1e-12

    @classmethod
    def default(cls, params: ScalingParams, sigma_max=1.0, p=None, eps=1e-12):
        p = np.zeros(params.d) if p is None else np.asarray(p, float)
        rad = (sigma_max / params.h) * math.sqrt(math.log(1 / eps) / math.pi) \
            + np.linalg.norm(p) / params.h + 5
        return cls(tuple(p / params.h), float(rad), eps)

    def points(self, alpha):
        alpha = np.asarray(alpha, float)
        c = np.asarray(self.center, float) - alpha
        d = alpha.size
        R = int(math.ceil(self.radius)) + 1
        axes = [np.arange(math.floor(ci) - R, math.ceil(ci) + R + 1) for ci in c]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, d)
        keep = np.sum((grid - c) ** 2, axis=1) <= self.radius ** 2
        return grid[keep]


def weyl_kernel(A: ComplexGaussian, d: int) -> ComplexGaussian:
    """Momentum kernel A^(y, y') = A~(y - y', (y + y')/2) as a Gaussian in (y, y')."""
    At = cg_partial_fourier(A, d, "first")
    I = np.eye(d)
    P = np.block([[I, -I], [0.5 * I, 0.5 * I]])
    return At.pullback(P)


def bloch_pairing(A: ComplexGaussian, B: ComplexGaussian, alpha, window=None, eps=1e-17):
    """<Pi_alpha Op(A), Op(B)>_HS = sum_m int A^(m+alpha, y) conj(B^(m+alpha, y)) dy.

    A and B are the (already rescaled, if desired) symbols. Without a window
    the lattice sum is taken to relative precision eps.
    """
    d = A.n // 2
    alpha = np.asarray(alpha, float)
    KA, KB = weyl_kernel(A, d), weyl_kernel(B, d)
    g = (KA * KB.conj()).integrate_out(range(d, 2 * d))
    g = g.pullback(np.eye(d), alpha)
    if window is None:
        val, _ = lattice_sum(g, eps)
        return val
    pts = window.points(alpha) if isinstance(window, LatticeWindow) else np.asarray(window)
    if len(pts) == 0:
        return 0j
    return det_sum(g(pts.astype(float)))


def _hamiltonian(pts, beta, params: ScalingParams):
    r, d = params.r, params.d
    k = pts + beta
    H = np.diag(0.5 * np.sum(k ** 2, axis=1))
    if params.lam != 0.0:
        diff = pts[:, None, :] - pts[None, :, :]
        H = H + params.lam_micro * r ** d * potential_fourier(r, diff.astype(float))
    return H


def _propagator(pts, beta, params):
    E, V = np.linalg.eigh(_hamiltonian(pts, beta, params))
    ph = np.exp(-2j * np.pi * E * params.micro_time)
    return (V * ph) @ V.T


@dataclass
class OracleResult:
    value: complex
    boundary_mass: float
    n_points: int
    eta_nodes: int


def matrix_oracle(pair: SymbolPair, params: ScalingParams, alpha, window=None,
                  eta_order=12, eta_scale=None):
    """Brute-force Tr[Pi_alpha U A U^dag B^dag] for the rescaled symbols.

    U = exp(-2 pi i H t') on the fibre lattice, with
    H = |m + alpha|^2 / 2 delta + (lam / h^2) r^d W^(r (m - m')) and
    t' = t h r^(1-d). The second operator lives on the neighbouring fibres
    alpha - r^(d-1) eta; the eta integral is done by Gauss-Hermite quadrature
    matched to the Gaussian decay of the symbols.
    """
    d = params.d
    alpha = np.asarray(alpha, float)
    A = bg_rescale(pair.a, params)
    B = bg_rescale(pair.b, params)
    KA, KB = weyl_kernel(A, d), weyl_kernel(B, d)
    if window is None:
        window = LatticeWindow.default(params)
    pts = window.points(alpha)
    N = len(pts)
    rho = params.rho

    if eta_scale is None:
        pa = np.mean(np.diag(cg_partial_fourier(pair.a, d).M.real[:d, :d]))
        pb = np.mean(np.diag(cg_partial_fourier(pair.b, d).M.real[:d, :d]))
        eta_scale = pa + pb
    x, wx = np.polynomial.hermite.hermgauss(eta_order)
    s = math.sqrt(math.pi * eta_scale)
    nodes1, w1 = x / s, wx / s
    grids = np.meshgrid(*([nodes1] * d), indexing="ij")
    etas = np.stack([g.ravel() for g in grids], -1)
    wts = np.prod(np.stack(np.meshgrid(*([w1] * d), indexing="ij"), -1).reshape(-1, d), axis=1)
    wts = wts * np.exp(math.pi * eta_scale * np.sum(etas ** 2, axis=1))

    Ua = _propagator(pts, alpha, params)
    ya = (pts + alpha).astype(float)
    terms = []
    for eta, wt in zip(etas, wts):
        beta = alpha - rho * eta
        yb = (pts + beta).astype(float)
        Dd = KA(np.concatenate([ya, yb], axis=1))
        Bm = KB(np.concatenate([np.repeat(ya, N, 0), np.tile(yb, (N, 1))], axis=1)).reshape(N, N)
        Ub = _propagator(pts, beta, params)
        X = Bm.conj() @ Ub.conj()
        terms.append(wt * np.sum(Dd * np.sum(Ua * X, axis=0)))
    value = rho ** d * det_sum(np.array(terms))

    dist = np.linalg.norm(ya - np.asarray(window.center), axis=1)
    edge = dist > window.radius - 1.5
    wcol = np.abs(KA(np.concatenate([ya, ya], axis=1)))
    bm = float(np.sum(wcol * np.sum(np.abs(Ua[edge]) ** 2, axis=0)) / np.sum(wcol))
    return OracleResult(value, bm, N, len(etas))


def diophantine_estimate(alpha, q_max=10_000):
    """Empirical Diophantine type and a rational-independence screen.

    The type is read off the best simultaneous approximations: with
    delta(q) = max_j ||q alpha_j||, records q_k of running minima satisfy
    delta ~ q^-(kappa-1). Returns (kappa_hat, independent); kappa_hat is inf
    if some q <= q_max makes q alpha integral.
    """
    a = np.asarray(alpha, dtype=float).ravel()
    d = a.size
    q = np.arange(1, q_max + 1, dtype=float)
    qa = np.outer(q, a)
    delta = np.max(np.abs(qa - np.round(qa)), axis=1)
    independent = _rationally_independent(a)
    if np.any(delta < 1e-9 * q):
        return float("inf"), False
    run = np.minimum.accumulate(delta)
    rec = np.flatnonzero(np.r_[True, run[1:] < run[:-1]])
    rec = rec[q[rec] >= 5]
    if rec.size < 3:
        return 1 + 1 / d, independent
    slope = np.polyfit(np.log(q[rec]), np.log(delta[rec]), 1)[0]
    return float(max(1 - slope, 1 + 1 / d)), independent


def _rationally_independent(a, maxcoeff=200, tol=1e-12):
    with mpmath.workdps(30):
        rel = mpmath.pslq([mpmath.mpf(1)] + [mpmath.mpf(float(x)) for x in a],
                          tol=tol, maxcoeff=maxcoeff, maxsteps=10_000)
    return rel is None
