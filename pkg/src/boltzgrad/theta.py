"""Theta sums on SL(2,R) x R^2d and their horocycle averages.

    Theta_f(u + iv, phi, (x, y)) = v^(d/2) sum_{m1, m2} f_phi(v^(1/2)(m1 - y), v^(1/2)(m2 - y))
                                   e(u (|m1 - y|^2 - |m2 - y|^2) / 2 + x.(m1 - m2)).

Evaluation first moves g into the fundamental domain of Gamma, where the
sum has O(1) significant terms; the rotation angle picked up on the way is
absorbed into f_phi, computed exactly for Gaussian f.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .lattice import det_sum, lattice_sum
from .modular import GroupElement, iwasawa, reduce_to_fundamental
from .symbolcalc import ComplexGaussian, cg_metaplectic

TWO_PI_I = 2j * np.pi


def _phase_J(u, d):
    """exp(i pi u (|z1|^2 - |z2|^2)) as a raw Gaussian on R^2d."""
    J = np.diag(np.r_[np.ones(d), -np.ones(d)])
    return ComplexGaussian.raw(2 * d, 1.0, -1j * u * J, np.zeros(2 * d))


def _theta_gaussian(f: ComplexGaussian, g0: GroupElement, d: int):
    """The summand of Theta_f(g0) as a Gaussian in m = (m1, m2)."""
    tau, phi = iwasawa(g0.M)
    u, v = tau.real, tau.imag
    fp = cg_metaplectic(f, phi, d)
    x0, y0 = g0.x, g0.y
    Y = np.r_[y0, y0]
    sv = math.sqrt(v)
    G = fp.pullback(sv * np.eye(2 * d), -sv * Y)
    G = G * _phase_J(u, d).pullback(np.eye(2 * d), -Y)
    G = G.with_phase(v=np.r_[x0, -x0])
    return G * v ** (d / 2)


def theta_eval(f: ComplexGaussian, g: GroupElement, reduce=True, eps=1e-17):
    """Theta_f(g) for a Gaussian f on R^d x R^d. Returns (value, tail)."""
    d = g.d
    g0 = reduce_to_fundamental(g)[1] if reduce else g
    G = _theta_gaussian(f, g0, d)
    return lattice_sum(G, eps)


def theta_diagonal(f: ComplexGaussian, g: GroupElement, eps=1e-17):
    """Leading part v^(d/2) sum_m f_phi((m - y) v^(1/2), (m - y) v^(1/2)) for large v."""
    d = g.d
    tau, phi = iwasawa(g.M)
    v = tau.imag
    fp = cg_metaplectic(f, phi, d)
    sv = math.sqrt(v)
    A = np.vstack([sv * np.eye(d), sv * np.eye(d)])
    G = fp.pullback(A, -sv * np.r_[g.y, g.y]) * v ** (d / 2)
    return lattice_sum(G, eps)


# --- eta-integrated theta sums ------------------------------------------

def _theta_joint_gaussian(f: ComplexGaussian, g0: GroupElement, d: int, r: float):
    """Summand of Theta_{f(., eta)}(g0 (1, (0, r^d eta / 2))) as a Gaussian in
    (m1, m2, eta); f lives on (y1, y2, eta)."""
    tau, phi = iwasawa(g0.M)
    u, v = tau.real, tau.imag
    fp = cg_metaplectic(f, phi, d)
    b0, d0 = g0.M[0, 1], g0.M[1, 1]
    kap = 0.5 * r ** d * d0
    bet = 0.5 * r ** d * b0
    x0, y0 = g0.x, g0.y
    I = np.eye(d)
    Z = np.zeros((d, d))
    sv = math.sqrt(v)
    # z = (sv (m1 - y0 - kap eta), sv (m2 - y0 - kap eta), eta)
    A = np.block([[sv * I, Z, -sv * kap * I], [Z, sv * I, -sv * kap * I], [Z, Z, I]])
    bvec = np.r_[-sv * y0, -sv * y0, np.zeros(d)]
    G = fp.pullback(A, bvec)
    P = np.block([[I, Z, -kap * I], [Z, I, -kap * I]])
    G = G * _phase_J(u, d).pullback(P, -np.r_[y0, y0])
    S = np.zeros((3 * d, 3 * d))
    S[2 * d:, :d] = S[:d, 2 * d:] = bet * I
    S[2 * d:, d:2 * d] = S[d:2 * d, 2 * d:] = -bet * I
    G = G.with_phase(S=S, v=np.r_[x0, -x0, np.zeros(d)])
    G = G * v ** (d / 2)
    return G.integrate_out(range(2 * d, 3 * d))


def theta_F(components, g: GroupElement, r: float, reduce=True, eps=1e-16):
    """F_r(g) = int Theta_{f(., eta)}(g (1, (0, r^d eta / 2))) d eta for a
    mixture f = sum_k w_k f_k of Gaussians on (y1, y2, eta).

    Returns (value, tail)."""
    d = g.d
    g0 = reduce_to_fundamental(g)[1] if reduce else g
    val, tail = 0j, 0.0
    for wk, fk in components:
        s, t = lattice_sum(_theta_joint_gaussian(fk, g0, d, r), eps)
        val += wk * s
        tail += abs(wk) * t
    return val, tail


# --- test functions ------------------------------------------------------

@dataclass
class ThetaTestFunction:
    """f(y1, y2, u, eta) as an envelope in u times a mixture of Gaussians.

    ``builder(u)`` returns a list of (weight, ComplexGaussian on R^3d in the
    variables (y1, y2, eta)); ``envelope(u)`` is a compactly supported weight.
    """

    builder: Callable
    d: int
    kind: str = "generic"
    envelope: Callable | None = None
    support: tuple = (-np.inf, np.inf)

    def components(self, u):
        env = 1.0 if self.envelope is None else self.envelope(u)
        if env == 0.0:
            return []
        return [(env * w, g) for w, g in self.builder(u)]

    def slice(self, u, eta):
        """Components at fixed (u, eta), as Gaussians in (y1, y2)."""
        d = self.d
        A = np.vstack([np.eye(2 * d), np.zeros((d, 2 * d))])
        b = np.r_[np.zeros(2 * d), np.asarray(eta, float)]
        return [(w, g.pullback(A, b)) for w, g in self.components(u)]

    def __call__(self, y1, y2, u, eta):
        z = np.r_[np.ravel(y1), np.ravel(y2), np.ravel(eta)]
        return sum(w * g(z) for w, g in self.components(u))


def separable_family(f: ComplexGaussian, u_width=1.0, eta_width=1.0):
    """f(y1, y2) exp(-pi u^2 / u_width^2) exp(-pi |eta|^2 / eta_width^2)."""
    d = f.n // 2
    eta = ComplexGaussian(d, 1.0, np.eye(d) / eta_width ** 2, np.zeros(d))
    g = f.embed(3 * d, range(2 * d)) * eta.embed(3 * d, range(2 * d, 3 * d))
    return ThetaTestFunction(lambda u: [(1.0, g)], d, "generic",
                             lambda u: math.exp(-math.pi * u * u / u_width ** 2))


def _ywhat(What, d, sign_first):
    """W^(y2 - y1) (sign_first=-1) as a Gaussian on (y1, y2, eta)."""
    I = np.eye(d)
    A = np.hstack([sign_first * I, -sign_first * I, np.zeros((d, d))])
    return What.pullback(A)


def build_order2_testfunction(setup, t: float, kind="light", inner_order=12):
    """Test functions turning the time-integrated second-order terms into
    horocycle integrals of theta sums.

    light:  e((u + |u|)(y2 - y1).eta / 2) (t - |u|) |W^(y2 - y1)|^2 a~(eta, y2) b~(-eta, y2)
    light2: (1/2) int_{|u|}^{2t-|u|} e((u - u')eta.(y2 - y1)/2) du'
            |W^(y1 - y2)|^2 a~(eta, y1) b~(-eta, y2)
    with b~ the transform of conj(b). The u' integral is Gauss-Legendre.
    """
    d = setup.params.d
    at, bt, What = setup.at, setup.bt, setup.What
    I = np.eye(d)
    Z = np.zeros((d, d))
    W2 = _ywhat(What, d, -1.0) * _ywhat(What, d, 1.0)
    a_y2 = at.pullback(np.block([[Z, Z, I], [Z, I, Z]]))
    a_y1 = at.pullback(np.block([[Z, Z, I], [I, Z, Z]]))
    b_y2 = bt.pullback(np.block([[Z, Z, -I], [Z, I, Z]]))

    def bilinear(c):
        """e(c (y2 - y1).eta)."""
        S = np.zeros((3 * d, 3 * d))
        S[:d, 2 * d:] = S[2 * d:, :d] = -c * I
        S[d:2 * d, 2 * d:] = S[2 * d:, d:2 * d] = c * I
        return S

    if kind == "light":
        base = W2 * a_y2 * b_y2

        def builder(u):
            return [(1.0, base.with_phase(S=bilinear(0.5 * (u + abs(u)))))]

        def envelope(u):
            return t - abs(u) if abs(u) <= t else 0.0
    elif kind == "light2":
        base = W2 * a_y1 * b_y2
        xg, wg = np.polynomial.legendre.leggauss(inner_order)

        def builder(u):
            lo, hi = abs(u), 2 * t - abs(u)
            nodes = 0.5 * (hi - lo) * xg + 0.5 * (hi + lo)
            wts = 0.5 * (hi - lo) * wg
            return [(0.5 * wk, base.with_phase(S=bilinear(0.5 * (u - uk))))
                    for uk, wk in zip(nodes, wts)]

        def envelope(u):
            return 1.0 if abs(u) <= t else 0.0
    else:
        raise ValueError("kind must be 'light' or 'light2'")
    return ThetaTestFunction(builder, d, "order2-" + kind, envelope, (-t, t))


def horocycle_rule(T, r, order=8, panel=None):
    """Composite Gauss-Legendre on [-T, T], symmetric, graded towards u = 0
    down to width r^2; the regular panel width defaults to r^2."""
    from .duhamel import gl_panels
    if panel is None:
        panel = r * r
    n = max(2, int(math.ceil(T / panel)))
    x, w = gl_panels(0.0, T, n, order, grade_at=0.0, grade_to=r * r / 8)
    return np.r_[-x[::-1], x], np.r_[w[::-1], w]


def q2_theta(setup, t, order=8, panel=None, inner_order=12, eps=1e-16):
    """Second-order coefficient Q_2 from horocycle integrals of theta sums.

    With T = r^(2-d) t and g_u = (u + i r^2, 0, (0, -alpha)),
    int int I_{+,2} = r^(d+2) int_{-T}^{T} F_r(g_u, r^(d-2) u) du (light),
    int int I_{1,2} = the same with the light2 test function, and
    Q_2 = h^-4 (2 pi i)^2 [int int I_{+,2} - int int I_{1,2}].
    """
    from .duhamel import DuhamelValue
    p = setup.params
    if abs(p.h - p.r) > 1e-15:
        raise ValueError("the theta route needs h = r")
    d, r = p.d, p.r
    f1 = build_order2_testfunction(setup, t, "light")
    f2 = build_order2_testfunction(setup, t, "light2", inner_order)
    T = r ** (2 - d) * t
    us, ws = horocycle_rule(T, r, order, panel)
    alpha = setup.alpha
    vals1, vals2 = [], []
    tail = 0.0
    for u in us:
        g = GroupElement.from_coords(complex(u, r * r), 0.0, np.r_[np.zeros(d), -alpha])
        g0 = reduce_to_fundamental(g)[1]
        up = r ** (d - 2) * u
        a1, t1 = theta_F(f1.components(up), g0, r, reduce=False, eps=eps)
        a2, t2 = theta_F(f2.components(up), g0, r, reduce=False, eps=eps)
        vals1.append(a1)
        vals2.append(a2)
        tail = max(tail, t1 + t2)
    ip = r ** (d + 2) * det_sum(ws * np.array(vals1))
    i1 = r ** (d + 2) * det_sum(ws * np.array(vals2))
    val = (TWO_PI_I ** 2) * (ip - i1) / p.h ** 4
    return DuhamelValue(val, tail * 2 * T * r ** (d + 2) / p.h ** 4,
                        {"n": 2, "Iplus": ip, "I12": i1, "nodes": len(us), "method": "theta"})


# --- horocycle means -----------------------------------------------------

@dataclass
class HorocycleExperiment:
    d: int
    r: float
    alpha: tuple
    w_support: tuple = (-1.0, 1.0)
    sigma: int | None = None
    order: int = 8
    meta: dict = field(default_factory=dict)


def horocycle_nodes(exp: HorocycleExperiment, panel=None):
    """Quadrature nodes in u for r^sigma int ... w(r^sigma u) du: composite
    Gauss-Legendre split at 0 and graded dyadically towards it down to r^2/8."""
    from .duhamel import gl_panels
    r = exp.r
    sigma = exp.d - 2 if exp.sigma is None else exp.sigma
    lo, hi = exp.w_support
    scale = r ** (-sigma)
    a, b = lo * scale, hi * scale
    panel = r * r if panel is None else panel
    nodes, wts = [], []
    for p0, p1 in ((a, min(b, 0.0)), (max(a, 0.0), b)):
        if p1 <= p0:
            continue
        n = max(2, int(math.ceil((p1 - p0) / panel)))
        grade = 0.0 if 0.0 in (p0, p1) else None
        x, w = gl_panels(p0, p1, n, exp.order, grade_at=grade,
                         grade_to=None if grade is None else r * r / 8)
        nodes.append(x)
        wts.append(w)
    if not nodes:
        return np.zeros(0), np.zeros(0), sigma
    return np.concatenate(nodes), np.concatenate(wts), sigma


def horocycle_mean(f, exp: HorocycleExperiment, panel=None, eps=1e-15):
    """r^sigma int Theta_f((u + i r^2, 0, (0, alpha)), r^sigma u) w(r^sigma u) du
    with w the indicator of exp.w_support; sigma defaults to d - 2.

    f is a Gaussian on R^2d, or a ThetaTestFunction, in which case Theta is
    replaced by the eta-integrated F_r. Returns (value, tail)."""
    d, r = exp.d, exp.r
    nodes, wts, sigma = horocycle_nodes(exp, panel)
    alpha = np.asarray(exp.alpha, float)
    vals = np.zeros(len(nodes), complex)
    tail = 0.0
    for k, u in enumerate(nodes):
        g = GroupElement.from_coords(complex(u, r * r), 0.0, np.r_[np.zeros(d), alpha])
        if isinstance(f, ThetaTestFunction):
            comps = f.components(r ** sigma * u)
            if not comps:
                continue
            vals[k], tk = theta_F(comps, g, r, eps=eps)
        else:
            vals[k], tk = theta_eval(f, g, eps=eps)
        tail = max(tail, tk)
    val = r ** sigma * det_sum(wts * vals)
    span = float(np.sum(wts))
    return val, tail * span * r ** sigma


def theta_limit(f, d: int, w0=1.0, w_support=(-1.0, 1.0), quad=None, u_order=64):
    """Limit of the horocycle mean for w the indicator of w_support:

        2 w(0) int int f delta(|y1|^2 - |y2|^2) + int f(y, y) dy int w

    for a Gaussian f. For a ThetaTestFunction the shell term uses f(., ., 0, eta)
    and the diagonal term int f(y, y, u, eta) w(u) dy du deta, with the
    eta integrals in closed form and u by Gauss-Legendre on the support."""
    from .boltzmann import shell_pair_integral
    diag_map = np.vstack([np.eye(d), np.eye(d)])
    lo, hi = w_support
    if isinstance(f, ThetaTestFunction):
        eta = range(2 * d, 3 * d)
        shell = sum(w * shell_pair_integral(g.integrate_out(eta), d, quad)
                    for w, g in f.components(0.0)) if lo < 0 < hi else 0.0
        A = np.block([[np.eye(d), np.zeros((d, d))], [np.eye(d), np.zeros((d, d))],
                      [np.zeros((d, d)), np.eye(d)]])
        a, b = max(lo, f.support[0]), min(hi, f.support[1])
        if not (np.isfinite(a) and np.isfinite(b)):
            raise ValueError("w or the envelope must have bounded support")
        x, wx = np.polynomial.legendre.leggauss(u_order)
        us, wu = 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * wx
        diag = det_sum(np.array([wk * sum(w * g.pullback(A).integral() for w, g in f.components(uk))
                                 for uk, wk in zip(us, wu)]))
        return 2 * w0 * shell + diag
    shell = shell_pair_integral(f, d, quad) if w0 != 0 else 0.0
    diag = f.pullback(diag_map).integral()
    return 2 * w0 * shell + diag * (hi - lo)


def theta_eval_higher(f: ComplexGaussian, gs, eps=1e-17):
    """Theta^(k)_f(g_1, ..., g_k) for f on R^(dk) x R^(dk), by direct summation.

    Variables are ordered (y_1, ..., y_k, y'_1, ..., y'_k); the rotation phi_j
    acts on the pair (y_j, y'_j). Returns (value, tail).
    """
    k = len(gs)
    d = gs[0].d
    n = 2 * d * k
    # order the variables pair by pair: (y_1, y'_1, y_2, y'_2, ...)
    perm = np.concatenate([np.r_[np.arange(j * d, (j + 1) * d),
                                 np.arange((k + j) * d, (k + j + 1) * d)] for j in range(k)])
    G = f.permute(perm)
    scale = np.empty(n)
    shift = np.empty(n)
    Mph = np.zeros((n, n), complex)
    lin = np.zeros(n)
    pref = 1.0
    for j, g in enumerate(gs):
        tau, phi = iwasawa(g.M)
        u, v = tau.real, tau.imag
        # rotate block j to the front, transform, rotate back
        order = np.r_[np.arange(2 * d * j, 2 * d * (j + 1)),
                      np.delete(np.arange(n), np.arange(2 * d * j, 2 * d * (j + 1)))]
        back = np.argsort(order)
        G = cg_metaplectic(G.permute(order), phi, d).permute(back)
        blk = slice(2 * d * j, 2 * d * (j + 1))
        scale[blk] = math.sqrt(v)
        shift[blk] = np.r_[g.y, g.y]
        Mph[blk, blk] = -1j * u * np.diag(np.r_[np.ones(d), -np.ones(d)])
        lin[blk] = np.r_[g.x, -g.x]
        pref *= v ** (d / 2)
    G = G.pullback(np.diag(scale), -scale * shift)
    G = G * ComplexGaussian.raw(n, 1.0, Mph, np.zeros(n)).pullback(np.eye(n), -shift)
    G = G.with_phase(v=lin) * pref
    return lattice_sum(G, eps)
