"""Gaussian lattice sums and deterministic summation."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaincc

from .symbolcalc import ComplexGaussian, sqrt_det

BLOCK = 1 << 15


def det_sum(values, block: int = BLOCK) -> complex:
    """Order-fixed compensated sum.

    Blocks of fixed size are summed pairwise by numpy and the block sums are
    combined with math.fsum, so the result does not depend on how the caller
    partitioned work across threads.
    """
    v = np.asarray(values).ravel()
    if v.size == 0:
        return 0j
    parts = [np.sum(v[k:k + block]) for k in range(0, v.size, block)]
    re = math.fsum(float(np.real(p)) for p in parts)
    im = math.fsum(float(np.imag(p)) for p in parts)
    return complex(re, im)


def ellipsoid_points(R, center, radius2, return_q=False):
    """Integer points m with (m - center)^T R (m - center) <= radius2, and
    optionally the values of that quadratic form."""
    R = np.asarray(R, dtype=float)
    n = R.shape[0]
    center = np.asarray(center, dtype=float)
    L = np.linalg.cholesky(0.5 * (R + R.T))
    pts = np.zeros((1, 0), dtype=np.int64)
    used = np.zeros(1)
    for i in range(n - 1, -1, -1):
        lii = L[i, i]
        if pts.shape[1]:
            dev = pts - center[i + 1:]
            shift = dev @ (L[i + 1:, i] / lii)
        else:
            shift = np.zeros(pts.shape[0])
        c = center[i] - shift
        rem = np.maximum(radius2 - used, 0.0)
        rad = np.sqrt(rem) / lii
        lo = np.ceil(c - rad).astype(np.int64)
        hi = np.floor(c + rad).astype(np.int64)
        cnt = np.maximum(hi - lo + 1, 0)
        tot = int(cnt.sum())
        if tot == 0:
            pts = np.zeros((0, n), dtype=np.int64)
            return (pts, np.zeros(0)) if return_q else pts
        rep = np.repeat(np.arange(pts.shape[0]), cnt)
        offs = np.arange(tot) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        mi = lo[rep] + offs
        used = used[rep] + (lii * (mi - c[rep])) ** 2
        pts = np.column_stack([mi, pts[rep]])
    return (pts, used) if return_q else pts


def lattice_window(g: ComplexGaussian, eps: float = 1e-17):
    """Points carrying all but a relative eps of sum_m |g(m)|, and a tail estimate.

    With q(m) = (m - c)^T Re M (m - c), the window is q <= rho^2 = L / pi.
    The continuous Gaussian tail underestimates the first excluded lattice
    points, so those are summed exactly over a shell reaching past rho by
    at least the diagonal of the unit cell; the continuous tail covers
    the rest.
    """
    R = g.M.real
    b = g.w.real
    center = np.linalg.solve(R, b) / (2 * np.pi)
    Lcut = math.log(1.0 / eps) + 0.5 * g.n
    rho2 = Lcut / np.pi
    diag = math.sqrt(g.n * np.linalg.eigvalsh(R).max())
    shell = max(1.0, diag * (diag + 2 * math.sqrt(rho2)))
    pts, q = ellipsoid_points(R, center, rho2 + shell, return_q=True)
    inside = q <= rho2
    peak = abs(g.c) * math.exp(float(np.pi * center @ R @ center))
    far = gammaincc(0.5 * g.n, np.pi * (rho2 + shell)) / math.sqrt(np.linalg.det(R))
    tail = peak * (float(np.sum(np.exp(-np.pi * q[~inside]))) + far)
    return pts[inside], center, tail


def lattice_sum(g: ComplexGaussian, eps: float = 1e-17, chunk: int = 1 << 18):
    """sum over m in Z^n of g(m), with an estimate of the neglected tail."""
    if not g.is_integrable():
        raise ValueError("lattice sum needs Re M positive definite")
    if g.c == 0:
        return 0j, 0.0
    pts, _, tail = lattice_window(g, eps)
    parts = []
    logc = np.log(g.c)
    for k in range(0, pts.shape[0], chunk):
        m = pts[k:k + chunk].astype(float)
        expo = logc - np.pi * np.einsum("ki,ij,kj->k", m, g.M, m) + m @ g.w
        parts.append(np.exp(expo))
    val = det_sum(np.concatenate(parts)) if parts else 0j
    return val, tail


def poisson_dual(g: ComplexGaussian) -> ComplexGaussian:
    """The Fourier transform k -> int g(x) e(-k.x) dx, so that
    sum_m g(m) = sum_k dual(g)(k)."""
    Mi = np.linalg.inv(g.M)
    Miw = Mi @ g.w
    c = g.c / sqrt_det(g.M) * np.exp(g.w @ Miw / (4 * np.pi))
    return ComplexGaussian.raw(g.n, c, 0.5 * (Mi + Mi.T), -1j * Miw)


def window_size(g: ComplexGaussian) -> float:
    """Rough number of lattice points the primal sum of g needs, up to a
    dimension-dependent constant."""
    return float(np.linalg.det(g.M.real) ** -0.5)


def cheaper_side(g: ComplexGaussian) -> ComplexGaussian:
    """g or its Poisson dual, whichever has the smaller window."""
    h = poisson_dual(g)
    if h.is_integrable() and window_size(h) < window_size(g):
        return h
    return g


def union_window(gs, eps: float = 1e-17):
    """Union of the windows of several Gaussians, in lexicographic order,
    with the largest of the individual tail bounds."""
    pts, tails = [], []
    for g in gs:
        p, _, t = lattice_window(g, eps)
        pts.append(p)
        tails.append(t)
    allp = np.concatenate(pts) if pts else np.zeros((0, gs[0].n), np.int64)
    if len(gs) > 1 and len(allp):
        # unique rows through a mixed-radix int64 key; the decoded rows come
        # out in lexicographic order
        lo = allp.min(axis=0)
        ext = allp.max(axis=0) - lo + 1
        stride = np.r_[np.cumprod(ext[::-1])[::-1][1:], 1].astype(np.int64)
        keys = np.unique((allp - lo) @ stride)
        allp = np.empty((len(keys), allp.shape[1]), np.int64)
        for i, st in enumerate(stride):
            allp[:, i], keys = np.divmod(keys, st)
        allp += lo
    return allp, max(tails)
