"""Phase-space symbols: Boltzmann-Grad rescaling, free transport, pairings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .symbolcalc import ComplexGaussian


@dataclass(frozen=True)
class ScalingParams:
    """Dimension d, scatterer radius r, semiclassical parameter h, coupling lam,
    macroscopic time t. By default h = r."""

    d: int
    r: float
    h: float | None = None
    lam: float = 0.0
    t: float = 0.0

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("d must be at least 2")
        if not (0 < self.r < 1):
            raise ValueError("r must lie in (0, 1)")
        if self.h is None:
            object.__setattr__(self, "h", float(self.r))
        if self.h <= 0:
            raise ValueError("h must be positive")

    @property
    def rho(self):
        """r^(d-1), the spatial scale of the rescaled symbols."""
        return self.r ** (self.d - 1)

    @property
    def micro_time(self):
        """Time argument of the unscaled propagator, t h r^(1-d)."""
        return self.t * self.h * self.r ** (1 - self.d)

    @property
    def lam_micro(self):
        """Coupling of the unscaled Hamiltonian, lam / h^2."""
        return self.lam / self.h ** 2


@dataclass(frozen=True)
class WavepacketSpec:
    """Initial wave packet phi(x) = exp(-pi |x|^2 / s^2) carried at momentum p,
    averaged against the momentum weight w(p) = exp(-pi |p - p0|^2 / sp^2)."""

    d: int
    width: float = 1.0
    p0: tuple = ()
    pwidth: float = 1.0

    def momentum(self):
        return np.zeros(self.d) if len(self.p0) == 0 else np.asarray(self.p0, float)


def bg_rescale(a: ComplexGaussian, params: ScalingParams) -> ComplexGaussian:
    """D a(x, y) = r^(d(d-1)/2) h^(d/2) a(r^(d-1) x, h y); an L2 isometry."""
    d, r, h = params.d, params.r, params.h
    S = np.diag(np.r_[np.full(d, r ** (d - 1)), np.full(d, h)])
    g = a.pullback(S) * (r ** (d * (d - 1) / 2) * h ** (d / 2))
    return g.checked()


def free_evolve_symbol(a: ComplexGaussian, t: float, d: int | None = None) -> ComplexGaussian:
    """Free transport (x, y) -> a(x - t y, y)."""
    d = a.n // 2 if d is None else d
    T = np.eye(2 * d)
    T[:d, d:] = -t * np.eye(d)
    return a.pullback(T).checked()


def hs_pairing(a: ComplexGaussian, b: ComplexGaussian) -> complex:
    """<a, b> = int a conj(b) dx dy."""
    return (a * b.conj()).integral()


def wavepacket_symbol(spec: WavepacketSpec) -> ComplexGaussian:
    """a(x, y) = |phi(x)|^2 w(y) for the Gaussian packet and momentum weight."""
    d = spec.d
    M = np.diag(np.r_[np.full(d, 2 / spec.width ** 2), np.full(d, 1 / spec.pwidth ** 2)])
    p0 = spec.momentum()
    w = np.r_[np.zeros(d), 2 * np.pi * p0 / spec.pwidth ** 2]
    c = (2 / spec.width ** 2) ** (d / 2) * np.exp(-np.pi * p0 @ p0 / spec.pwidth ** 2)
    return ComplexGaussian(2 * d, c, M, w)


def wavepacket_expectation(spec: WavepacketSpec, b: ComplexGaussian, params: ScalingParams,
                           t: float = 0.0) -> complex:
    """r^(-d(d-1)/2) h^(-d/2) int <f_p(t), Op(D b) f_p(t)> w(p) dp at zero coupling,

    for the packets f_p(x) = r^(d(d-1)/2) phi(r^(d-1) x) e(p.x / h). Free
    evolution is exact on Weyl symbols, so f_p(t) is handled by pairing f_p
    with Op(D L_0(-t) b). All integrals are Gaussian: the variables are
    (X, z, xi, p) with the Wigner transform int conj f(X + z/2) f(X - z/2) e(z.xi) dz.
    """
    d, r, h = params.d, params.r, params.h
    rho, s = params.rho, spec.width
    I, Z = np.eye(d), np.zeros((d, d))
    n = 4 * d
    cf2 = r ** (d * (d - 1)) * (2 / s ** 2) ** (d / 2)
    M = np.zeros((n, n))
    M[:d, :d] = 2 * rho ** 2 / s ** 2 * I
    M[d:2 * d, d:2 * d] = 0.5 * rho ** 2 / s ** 2 * I
    G = ComplexGaussian.raw(n, cf2, M, np.zeros(n))
    # phase e(z.xi - z.p / h)
    S = np.zeros((n, n))
    S[d:2 * d, 2 * d:3 * d] = S[2 * d:3 * d, d:2 * d] = I
    S[d:2 * d, 3 * d:] = S[3 * d:, d:2 * d] = -I / h
    G = G.with_phase(S=S)
    Db = bg_rescale(free_evolve_symbol(b, -t, d), params)
    G = G * Db.embed(n, np.r_[np.arange(d), np.arange(2 * d, 3 * d)])
    p0 = spec.momentum()
    wp = ComplexGaussian(d, np.exp(-np.pi * p0 @ p0 / spec.pwidth ** 2), I / spec.pwidth ** 2,
                         2 * np.pi * p0 / spec.pwidth ** 2)
    G = G * wp.embed(n, np.arange(3 * d, 4 * d))
    return G.integral() / (r ** (d * (d - 1) / 2) * h ** (d / 2))


def symbol_l2_norm(a: ComplexGaussian) -> float:
    return float(np.sqrt(hs_pairing(a, a).real))
