"""Duhamel expansion of the Bloch-projected pairing in the coupling.

The terms I_{l,n}(s) are lattice sums over (m_1, ..., m_n) in Z^(nd) of an
eta-integral. For Gaussian observables and potential the integrand is a
complex Gaussian in (m_1, ..., m_n, eta) for fixed times, so the eta
integral is exact and only the lattice sum and the time integrals are
numerical.

Pairings are with conj(b): the second symbol entering the trace formulas
is b_I = conj(b).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import cheaper_side, det_sum, union_window, window_size
from .phasespace import ScalingParams
from .symbolcalc import ComplexGaussian, SymbolPair, cg_partial_fourier

TWO_PI_I = 2j * np.pi


@dataclass
class DuhamelValue:
    value: complex
    tail: float = 0.0
    meta: dict = field(default_factory=dict)


def fourier(f: ComplexGaussian) -> ComplexGaussian:
    """Full Fourier transform fhat(y) = int f(x) e(-x.y) dx."""
    n = f.n
    ext = f.embed(2 * n, np.arange(n))
    S = np.zeros((2 * n, 2 * n))
    S[:n, n:] = S[n:, :n] = -np.eye(n)
    return ext.with_phase(S=S).integrate_out(range(n))


def default_potential(d):
    """W(x) = exp(-pi |x|^2)."""
    return ComplexGaussian.isotropic(d)


class _Builder:
    """Assembles Gaussian factors on z = (m_1, ..., m_n, eta) in R^((n+1)d)."""

    def __init__(self, n, d):
        self.n, self.d = n, d
        self.dim = (n + 1) * d
        self.g = ComplexGaussian.raw(self.dim, 1.0, np.zeros((self.dim,) * 2), np.zeros(self.dim))

    def lin(self, coefs):
        """d x dim matrix sum_k coef_k E_k, block k = 0..n-1 for m, n for eta."""
        A = np.zeros((self.d, self.dim))
        for k, c in coefs.items():
            A[:, k * self.d:(k + 1) * self.d] += c * np.eye(self.d)
        return A

    def mul(self, f: ComplexGaussian, A, b=None):
        self.g = self.g * f.pullback(A, b)

    def phase(self, coef, A, shift):
        """e(coef |A z + shift|^2 / 2)."""
        if coef == 0:
            return
        q = ComplexGaussian.raw(self.d, 1.0, -1j * coef * np.eye(self.d), np.zeros(self.d))
        self.mul(q, A, shift)


def _i_term_gaussian(l, n, s, at, bt, What, params: ScalingParams, alpha):
    """Integrand of I_{l,n}(s) as a Gaussian in (m_1..m_n, eta), prefactor included."""
    d, r, h = params.d, params.r, params.h
    rho = params.rho
    B = _Builder(n, d)
    E = n  # eta block
    al = np.asarray(alpha, float)
    s = list(s) + [0.0]
    # the two symbol factors
    ja = l - 1 if 1 <= l < n else n - 1
    jb = n - 1
    A_a = np.vstack([B.lin({E: -1.0}), h * B.lin({ja: 1.0, E: 0.5 * rho})])
    A_b = np.vstack([B.lin({E: 1.0}), h * B.lin({jb: 1.0, E: 0.5 * rho})])
    shift2 = np.r_[np.zeros(d), h * al]
    B.mul(at, A_a, shift2)
    B.mul(bt, A_b, shift2)

    def Wf(i, j):
        A = B.lin({i: 1.0}) - B.lin({j: 1.0})
        B.mul(What, r * A)

    def T_minus(lo, hi, with_eta):
        for j in range(lo, hi + 1):
            # e((s_j - s_{j+1}) |y + m_j|^2 / 2) W^(r(m_j - m_{j+1}))
            coefs = {j - 1: 1.0}
            if with_eta:
                coefs[E] = rho
            B.phase(s[j - 1] - s[j], B.lin(coefs), al)
            Wf(j - 1, j)

    mn = n - 1
    if 1 <= l < n:
        B.phase(-s[0], B.lin({mn: 1.0}), al)
        Wf(mn, 0)
        T_minus(1, l - 1, False)
        B.phase(s[l - 1], B.lin({l - 1: 1.0}), al)
        B.phase(-s[l], B.lin({l - 1: 1.0, E: rho}), al)
        Wf(l - 1, l)
        T_minus(l + 1, n - 1, True)
        B.phase(s[n - 1], B.lin({mn: 1.0, E: rho}), al)
    elif l == n:
        B.phase(-s[0], B.lin({mn: 1.0}), al)
        Wf(mn, 0)
        T_minus(1, n - 1, False)
        B.phase(s[n - 1], B.lin({mn: 1.0}), al)
    else:  # l == 0 < n
        B.phase(-s[0], B.lin({mn: 1.0, E: rho}), al)
        Wf(mn, 0)
        T_minus(1, n - 1, True)
        B.phase(s[n - 1], B.lin({mn: 1.0, E: rho}), al)
    return B.g * (r ** (n * d) * h ** d)


def _i00_gaussian(at, bt, params, alpha):
    d, h, rho = params.d, params.h, params.rho
    B = _Builder(1, d)
    A_a = np.vstack([B.lin({1: -1.0}), h * B.lin({0: 1.0, 1: 0.5 * rho})])
    A_b = np.vstack([B.lin({1: 1.0}), h * B.lin({0: 1.0, 1: 0.5 * rho})])
    shift2 = np.r_[np.zeros(d), h * np.asarray(alpha, float)]
    B.mul(at, A_a, shift2)
    B.mul(bt, A_b, shift2)
    return B.g * h ** d


class DuhamelSetup:
    """Fourier data shared by all I_{l,n} evaluations for one configuration."""

    def __init__(self, pair: SymbolPair, params: ScalingParams, alpha, W=None, eps=1e-16):
        self.pair, self.params = pair, params
        self.alpha = np.asarray(alpha, float)
        d = params.d
        self.at = cg_partial_fourier(pair.a, d, "first")
        self.bt = cg_partial_fourier(pair.b.conj(), d, "first")
        self.W = default_potential(d) if W is None else W
        self.What = fourier(self.W)
        self.eps = eps

    def gaussian(self, l, n, s=()):
        if n == 0:
            return _i00_gaussian(self.at, self.bt, self.params, self.alpha)
        return _i_term_gaussian(l, n, s, self.at, self.bt, self.What, self.params, self.alpha)


def _eta_reduce(g: ComplexGaussian, n, d):
    return g.integrate_out(range(n * d, (n + 1) * d))


def _monomials(pts):
    m = pts.astype(float)
    k = m.shape[1]
    cols = [np.ones(len(m))]
    cols += [m[:, i] for i in range(k)]
    cols += [m[:, i] * m[:, j] for i in range(k) for j in range(i, k)]
    return np.column_stack(cols)


def _coef_vector(g: ComplexGaussian):
    k = g.n
    c = [np.log(g.c)]
    c += list(g.w)
    for i in range(k):
        for j in range(i, k):
            c.append(-np.pi * (g.M[i, i] if i == j else 2 * g.M[i, j]))
    return np.array(c, dtype=complex)


def lattice_sum_many(gs, eps=1e-16, block=64, chunk=1 << 15):
    """sum_m g_k(m) for a family of Gaussians. Returns (values, tail).

    Each Gaussian is summed on the cheaper of its primal and Poisson-dual
    side. Members are sorted by window size and processed in fixed blocks
    over the union of their windows, so the result is independent of any
    outer partitioning.
    """
    hs = [cheaper_side(g) for g in gs]
    order = np.argsort([window_size(h) for h in hs], kind="stable")
    vals = np.zeros(len(hs), complex)
    tail = 0.0
    for b0 in range(0, len(hs), block):
        idx = order[b0:b0 + block]
        members = [hs[i] for i in idx]
        pts, tb = union_window(members, eps)
        tail = max(tail, tb)
        C = np.column_stack([_coef_vector(h) for h in members])
        parts = [np.sum(np.exp(_monomials(pts[k:k + chunk]) @ C), axis=0)
                 for k in range(0, len(pts), chunk)]
        for j, i in enumerate(idx):
            vals[i] = complex(math.fsum(p[j].real for p in parts),
                              math.fsum(p[j].imag for p in parts))
    return vals, tail


def eval_I00(setup: DuhamelSetup) -> DuhamelValue:
    """I_{0,0}: the Bloch pairing of the rescaled symbols in eta form."""
    d = setup.params.d
    g = _eta_reduce(setup.gaussian(0, 0), 1, d)
    vals, tail = lattice_sum_many([g], setup.eps)
    return DuhamelValue(vals[0], tail, {"n": 0})


def eval_I1(setup: DuhamelSetup, l, s1) -> DuhamelValue:
    d = setup.params.d
    s1 = np.atleast_1d(np.asarray(s1, float))
    gs = [_eta_reduce(setup.gaussian(l, 1, (s,)), 1, d) for s in s1]
    vals, tail = lattice_sum_many(gs, setup.eps)
    return DuhamelValue(vals if len(vals) > 1 else vals[0], tail, {"n": 1, "l": l})


def eval_I2(setup: DuhamelSetup, l, s1, s2) -> DuhamelValue:
    """I_{l,2}(s1, s2); l = '+' gives I_{2,2} for s1 <= s2 and I_{0,2} otherwise."""
    d = setup.params.d
    s1 = np.atleast_1d(np.asarray(s1, float))
    s2 = np.atleast_1d(np.asarray(s2, float))
    s1, s2 = np.broadcast_arrays(s1, s2)
    gs = []
    for a, b in zip(s1, s2):
        ll = l if l != "+" else (2 if a <= b else 0)
        gs.append(_eta_reduce(setup.gaussian(ll, 2, (a, b)), 2, d))
    vals, tail = lattice_sum_many(gs, setup.eps)
    return DuhamelValue(vals if len(vals) > 1 else vals[0], tail, {"n": 2, "l": l})


# --- time quadrature ---------------------------------------------------

def gl_panels(a, b, n_panels, order=8, grade_at=None, grade_to=None):
    """Composite Gauss-Legendre nodes on [a, b]; optionally graded
    geometrically towards the endpoint grade_at down to width grade_to."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = list(np.linspace(a, b, n_panels + 1))
    if grade_at is not None and grade_to is not None:
        first = (b - a) / n_panels
        extra = []
        width = first / 2
        while width > grade_to:
            extra.append(width)
            width /= 2
        if grade_at == a:
            inner = [a + wd for wd in extra]
            edges = [a] + sorted(inner) + edges[1:]
        else:
            inner = [b - wd for wd in extra]
            edges = edges[:-1] + sorted(inner) + [b]
    edges = np.array(edges)
    lo, hi = edges[:-1], edges[1:]
    nodes = (0.5 * (hi - lo)[:, None] * x + 0.5 * (hi + lo)[:, None]).ravel()
    wts = (0.5 * (hi - lo)[:, None] * w).ravel()
    return nodes, wts


def _frequency(setup: DuhamelSetup):
    """Largest phase rate |m + alpha|^2 / 2 over the momentum support."""
    p = setup.params
    Ry = setup.pair.a.M.real[p.d:, p.d:]
    sig = 1 / math.sqrt(np.linalg.eigvalsh(Ry).min())
    ymax = sig * math.sqrt(math.log(1 / setup.eps) / (2 * math.pi)) + 1
    return 0.5 * (ymax / p.h) ** 2


def _time_rule(setup, T, order, panels):
    if panels is None:
        panels = max(4, int(math.ceil(2 * T * _frequency(setup) / order)))
    r2 = setup.params.r ** 2
    return gl_panels(0.0, T, panels, order, grade_at=0.0, grade_to=min(r2, T / 8))


def assemble_Q(setup: DuhamelSetup, n: int, t: float, method="direct",
               order=8, panels=None, inner=8, **kw) -> DuhamelValue:
    """Coefficient Q_n of lam^n (macroscopic coupling, carries h^(-2n)) in

        < Pi_alpha U_lam(T) U_0(-T) Op(D a) U_0(T) U_lam(-T), Op(D b) >,

    with T = t h r^(1-d), i.e. the interaction picture. Pass L_0(t) a to
    compare with the plain propagated pairing.
    """
    p = setup.params
    T = t * p.h * p.r ** (1 - p.d)
    if n == 0:
        return eval_I00(setup)
    if method == "theta":
        if n != 2:
            raise ValueError("the theta route is implemented for n = 2")
        from .theta import q2_theta
        return q2_theta(setup, t, **kw)
    if n == 1:
        s, w = gl_panels(0.0, T, 1 if panels is None else panels, order)
        v11 = eval_I1(setup, 1, s)
        v01 = eval_I1(setup, 0, s)
        tot = det_sum(w * (np.atleast_1d(v01.value) - np.atleast_1d(v11.value)))
        val = TWO_PI_I * tot / p.h ** 2
        return DuhamelValue(val, (v11.tail + v01.tail) * T, {"n": 1})
    if n != 2:
        raise ValueError("direct route implemented for n <= 2")
    u, wu = _time_rule(setup, T, order, panels)
    xi, wi = np.polynomial.legendre.leggauss(inner)
    # l = 2 region s1 < s2 and l = 0 region s2 < s1, parametrised by u = |s2 - s1|
    # and the left point in [0, T - u]
    S1, S2, WW = [], [], []
    for uk, wk in zip(u, wu):
        L = T - uk
        lo = 0.5 * L * (xi + 1)
        S1.append(lo)
        S2.append(lo + uk)
        WW.append(wk * 0.5 * L * wi)
    S1, S2, WW = map(np.concatenate, (S1, S2, WW))
    v22 = eval_I2(setup, 2, S1, S2)
    v02 = eval_I2(setup, 0, S2, S1)
    # l = 1 on the full box in (u1 = s1 - s2, u2 = s1 + s2), Jacobian 1/2
    A1, A2, W1 = [], [], []
    for uk, wk in zip(np.r_[-u[::-1], u], np.r_[wu[::-1], wu]):
        lo, hi = abs(uk), 2 * T - abs(uk)
        u2 = 0.5 * (hi - lo) * xi + 0.5 * (hi + lo)
        A1.append(0.5 * (uk + u2))
        A2.append(0.5 * (u2 - uk))
        W1.append(0.5 * wk * 0.5 * (hi - lo) * wi)
    A1, A2, W1 = map(np.concatenate, (A1, A2, W1))
    v12 = eval_I2(setup, 1, A1, A2)
    i22 = det_sum(WW * v22.value)
    i02 = det_sum(WW * v02.value)
    i12 = det_sum(W1 * v12.value)
    val = (TWO_PI_I ** 2) * (i02 - i12 + i22) / p.h ** 4
    tail = (v22.tail + v02.tail + v12.tail) * T * T
    return DuhamelValue(val, tail, {"n": 2, "I22": i22, "I02": i02, "I12": i12,
                                    "nodes": len(S1) + len(A1)})
