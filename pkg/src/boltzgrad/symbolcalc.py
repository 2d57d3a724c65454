"""Exact calculus of complex Gaussians.

A complex Gaussian on R^n is

    f(z) = c * exp(-pi z^T M z + w^T z),

with M complex symmetric. Products, linear pullbacks, partial Fourier
transforms, the phase-space rotations f -> f_phi and integration over a
block of variables all stay inside this class and are carried out in
closed form. Everything else in the package is built on these operations.

Conventions: e(z) = exp(2 pi i z), fhat(y) = int e(-y.x) f(x) dx.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI_I = 2j * np.pi


def e(z):
    """exp(2 pi i z)."""
    return np.exp(TWO_PI_I * np.asarray(z))


def sqrt_det(M):
    """det(M)^(1/2) as a product of principal square roots of eigenvalues.

    This is the analytic branch on {Re M > 0}; eigenvalues of such M lie in
    the right half plane.
    """
    if M.shape[0] == 0:
        return 1.0 + 0j
    lam = np.linalg.eigvals(M)
    return np.prod(np.sqrt(lam.astype(complex)))


def _is_posdef(A, tol=0.0):
    if A.shape[0] == 0:
        return True
    ev = np.linalg.eigvalsh(0.5 * (A + A.T))
    return bool(ev.min() > tol)


@dataclass(frozen=True, eq=False)
class ComplexGaussian:
    """c * exp(-pi z^T M z + w^T z) on R^n.

    ``check=True`` enforces M symmetric with Re M positive definite, which is
    what makes the function integrable. Intermediate objects (kernels, phase
    factors) are built with ``check=False``.
    """

    n: int
    c: complex
    M: np.ndarray
    w: np.ndarray
    check: bool = True

    def __post_init__(self):
        M = np.array(self.M, dtype=complex).reshape(self.n, self.n)
        w = np.array(self.w, dtype=complex).reshape(self.n)
        M = 0.5 * (M + M.T)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "c", complex(self.c))
        if self.check and not _is_posdef(M.real):
            raise ValueError("Re M must be positive definite")

    # construction -------------------------------------------------------
    @classmethod
    def isotropic(cls, n, c=1.0):
        """exp(-pi |z|^2)."""
        return cls(n, c, np.eye(n), np.zeros(n))

    @classmethod
    def raw(cls, n, c, M, w):
        return cls(n, c, M, w, check=False)

    def checked(self):
        return ComplexGaussian(self.n, self.c, self.M, self.w, check=True)

    # evaluation ---------------------------------------------------------
    def log_eval(self, z):
        z = np.asarray(z, dtype=complex)
        if z.ndim == 0:
            z = z.reshape(1)
        quad = np.einsum("...i,ij,...j->...", z, self.M, z)
        return np.log(self.c) - np.pi * quad + z @ self.w

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        if self.n == 1 and (z.ndim == 0 or z.shape[-1] != 1):
            z = z[..., None]
        quad = np.einsum("...i,ij,...j->...", z, self.M, z)
        return self.c * np.exp(-np.pi * quad + z @ self.w)

    def is_integrable(self):
        return _is_posdef(self.M.real)

    def integral(self):
        """Closed-form integral over R^n."""
        if not self.is_integrable():
            raise ValueError("Re M must be positive definite to integrate")
        if self.n == 0:
            return self.c
        Minv_w = np.linalg.solve(self.M, self.w)
        return self.c / sqrt_det(self.M) * np.exp(self.w @ Minv_w / (4 * np.pi))

    # algebra ------------------------------------------------------------
    def conj(self):
        return ComplexGaussian(self.n, np.conj(self.c), self.M.conj(), self.w.conj(), self.check)

    def __mul__(self, other):
        if isinstance(other, ComplexGaussian):
            if other.n != self.n:
                raise ValueError("dimension mismatch")
            return ComplexGaussian(self.n, self.c * other.c, self.M + other.M,
                                   self.w + other.w, check=False)
        return ComplexGaussian(self.n, self.c * other, self.M, self.w, self.check)

    __rmul__ = __mul__

    def pullback(self, A, b=None):
        """z -> f(A z + b) for A of shape (n, k); result lives on R^k."""
        A = np.asarray(A, dtype=complex).reshape(self.n, -1)
        k = A.shape[1]
        b = np.zeros(self.n) if b is None else np.asarray(b, dtype=complex)
        M = A.T @ self.M @ A
        w = A.T @ self.w - 2 * np.pi * A.T @ (self.M @ b)
        c = self.c * np.exp(-np.pi * b @ self.M @ b + self.w @ b)
        return ComplexGaussian(k, c, M, w, check=False)

    def embed(self, n_total, idx):
        """Same function viewed on R^n_total, depending only on coordinates idx."""
        idx = np.asarray(idx)
        M = np.zeros((n_total, n_total), complex)
        w = np.zeros(n_total, complex)
        M[np.ix_(idx, idx)] = self.M
        w[idx] = self.w
        return ComplexGaussian(n_total, self.c, M, w, check=False)

    def with_phase(self, S=None, v=None):
        """Multiply by e(z^T S z / 2 + v^T z) for real symmetric S, real v."""
        M = self.M.copy()
        w = self.w.copy()
        if S is not None:
            M = M - 1j * np.asarray(S)
        if v is not None:
            w = w + TWO_PI_I * np.asarray(v)
        return ComplexGaussian(self.n, self.c, M, w, check=False)

    def permute(self, order):
        """Reorder variables: new z_k = old z_order[k]."""
        order = np.asarray(order)
        return ComplexGaussian(self.n, self.c, self.M[np.ix_(order, order)],
                               self.w[order], check=False)

    def integrate_out(self, idx):
        """Integrate over the coordinates in idx; the others keep their order."""
        idx = np.asarray(sorted(idx), dtype=int)
        keep = np.array([k for k in range(self.n) if k not in set(idx.tolist())], dtype=int)
        Muu = self.M[np.ix_(idx, idx)]
        if not _is_posdef(Muu.real):
            raise ValueError("integrated block must have Re M positive definite")
        Muz = self.M[np.ix_(idx, keep)]
        Mzz = self.M[np.ix_(keep, keep)]
        wu, wz = self.w[idx], self.w[keep]
        X = np.linalg.solve(Muu, np.column_stack([Muz, wu]))
        Minv_Muz, Minv_wu = X[:, :-1], X[:, -1]
        M = Mzz - Muz.T @ Minv_Muz
        w = wz - Muz.T @ Minv_wu
        c = self.c / sqrt_det(Muu) * np.exp(wu @ Minv_wu / (4 * np.pi))
        return ComplexGaussian(len(keep), c, M, w, check=False)


@dataclass(frozen=True)
class SymbolPair:
    """Observables a, b on R^d x R^d, variables ordered (x, y)."""

    a: ComplexGaussian
    b: ComplexGaussian
    d: int

    def __post_init__(self):
        if self.a.n != 2 * self.d or self.b.n != 2 * self.d:
            raise ValueError("symbols must live on R^(2d)")

    @classmethod
    def isotropic(cls, d):
        g = ComplexGaussian.isotropic(2 * d)
        return cls(g, g, d)


def cg_eval(f: ComplexGaussian, z):
    """Pointwise value f(z); z may be complex and batched on the last axis."""
    return f(z)


def cg_integral(f: ComplexGaussian):
    """c det(M)^(-1/2) exp(w^T M^-1 w / (4 pi))."""
    return f.integral()


def cg_partial_fourier(f: ComplexGaussian, d: int, block: str = "first"):
    """Fourier transform in one d-block of a function on R^d x R^d.

    block='first' gives a~(eta, y) = int a(x, y) e(-x.eta) dx with result
    variables (eta, y); block='second' transforms y and returns (x, eta).
    """
    if f.n != 2 * d:
        raise ValueError("expected a function on R^(2d)")
    if block not in ("first", "second"):
        raise ValueError("block must be 'first' or 'second'")
    # variables of the extended function: (x, y, eta)
    ext = f.embed(3 * d, np.arange(2 * d))
    t = 0 if block == "first" else d
    S = np.zeros((3 * d, 3 * d))
    I = np.eye(d)
    S[t:t + d, 2 * d:] = -I
    S[2 * d:, t:t + d] = -I
    g = ext.with_phase(S=S).integrate_out(range(t, t + d))
    if block == "first":
        g = g.permute(list(range(d, 2 * d)) + list(range(d)))
    return g.checked() if g.is_integrable() else g


def _rotation_step(f: ComplexGaussian, phi: float, d: int):
    n = f.n
    s, co = np.sin(phi), np.cos(phi)
    # extended variables: (y1, y2, passive, x1, x2) with f on (x1, x2, passive)
    p = n - 2 * d
    order_f = list(range(n, n + 2 * d)) + list(range(2 * d, n))
    ext = f.embed(n + 2 * d, order_f)
    S = np.zeros((n + 2 * d, n + 2 * d))
    I = np.eye(d)
    y1, y2 = slice(0, d), slice(d, 2 * d)
    x1, x2 = slice(n, n + d), slice(n + d, n + 2 * d)
    S[y1, y1] = S[x1, x1] = co / s * I
    S[y2, y2] = S[x2, x2] = -co / s * I
    S[y1, x1] = S[x1, y1] = -I / s
    S[y2, x2] = S[x2, y2] = I / s
    g = ext.with_phase(S=S).integrate_out(range(n, n + 2 * d))
    del p
    return g * (abs(s) ** (-d))


def cg_metaplectic(f: ComplexGaussian, phi: float, d: int | None = None):
    """The rotated test function f_phi on R^d x R^d.

    f_phi = f for phi = 0 mod 2 pi, f(-., -.) for phi = pi mod 2 pi, and
    otherwise int G_phi(y, x) f(x) dx with the product kernel
    |sin phi|^-d e([(|y1|^2 + |x1|^2 - |y2|^2 - |x2|^2) cos/2 - y1.x1 + y2.x2] / sin).
    Extra trailing variables of f (beyond 2d) are carried along untouched.
    """
    if d is None:
        d = f.n // 2
    phi = float(np.remainder(phi, 2 * np.pi))
    if phi == 0.0:
        return f
    if phi == np.pi:
        n = f.n
        P = np.eye(n)
        P[:2 * d, :2 * d] *= -1
        return f.pullback(P).checked() if f.check else f.pullback(P)
    if abs(np.sin(phi)) >= 0.5:
        g = _rotation_step(f, phi, d)
    else:
        g = _rotation_step(_rotation_step(f, phi - np.pi / 2, d), np.pi / 2, d)
    return g.checked() if g.is_integrable() else g


def potential_fourier(s, y):
    """W^(s y) for the default single-site potential W(x) = exp(-pi |x|^2)."""
    y = np.asarray(y, dtype=float)
    if y.ndim == 0:
        y = y.reshape(1)
    return np.exp(-np.pi * s ** 2 * np.sum(y ** 2, axis=-1))
