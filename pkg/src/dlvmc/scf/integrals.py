"""One- and two-electron integrals over contracted s/p Gaussians.

McMurchie-Davidson Hermite expansion, vectorized over primitive pairs.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .basis import UnsupportedBasisError, build_basis

_SERIES_CUTOFF = 1e-8


def boys_f0(t):
    """Zeroth-order Boys function ``F0(t) = int_0^1 exp(-t u^2) du``."""
    if t < 0:
        raise ValueError(f"Boys function undefined for t={t} < 0")
    if t < _SERIES_CUTOFF:
        return 1.0 - t / 3.0 + t * t / 10.0
    x = math.sqrt(t)
    return 0.5 * math.sqrt(math.pi / t) * math.erf(x)


def boys(n, t):
    """Vectorized ``F_n(t)`` for ``n >= 0`` and array ``t >= 0``."""
    t = np.asarray(t, dtype=np.float64)
    small = t < 1e-6
    ts = np.where(small, 1.0, t)
    a = n + 0.5
    big = special.gamma(a) * special.gammainc(a, ts) / (2.0 * ts ** a)
    series = 1.0 / (2 * n + 1) - t / (2 * n + 3) + t * t / (2 * (2 * n + 5))
    return np.where(small, series, big)


def _hermite_e(i, j, t, q_ab, a, b):
    """Hermite expansion coefficient E^{ij}_t for one Cartesian direction."""
    p = a + b
    mu = a * b / p
    if t < 0 or t > i + j:
        return np.zeros(np.broadcast(a, b).shape)
    if i == j == t == 0:
        return np.exp(-mu * q_ab * q_ab) * np.ones_like(p)
    if j == 0:
        return (_hermite_e(i - 1, j, t - 1, q_ab, a, b) / (2 * p)
                - mu * q_ab / a * _hermite_e(i - 1, j, t, q_ab, a, b)
                + (t + 1) * _hermite_e(i - 1, j, t + 1, q_ab, a, b))
    return (_hermite_e(i, j - 1, t - 1, q_ab, a, b) / (2 * p)
            + mu * q_ab / b * _hermite_e(i, j - 1, t, q_ab, a, b)
            + (t + 1) * _hermite_e(i, j - 1, t + 1, q_ab, a, b))


def _hermite_r(tmax, umax, vmax, p, pc):
    """Table ``R[t, u, v]`` of Hermite Coulomb integrals (n = 0) for arrays ``p``, ``pc``."""
    x, y, z = pc[..., 0], pc[..., 1], pc[..., 2]
    rr = x * x + y * y + z * z
    nmax = tmax + umax + vmax
    fn = [(-2 * p) ** n * boys(n, p * rr) for n in range(nmax + 1)]
    memo = {}

    def r(t, u, v, n):
        key = (t, u, v, n)
        if key in memo:
            return memo[key]
        if t < 0 or u < 0 or v < 0:
            val = 0.0
        elif t == u == v == 0:
            val = fn[n]
        elif t > 0:
            val = (t - 1) * r(t - 2, u, v, n + 1) + x * r(t - 1, u, v, n + 1)
        elif u > 0:
            val = (u - 1) * r(t, u - 2, v, n + 1) + y * r(t, u - 1, v, n + 1)
        else:
            val = (v - 1) * r(t, u, v - 2, n + 1) + z * r(t, u, v - 1, n + 1)
        memo[key] = val
        return val

    return {(t, u, v): r(t, u, v, 0)
            for t in range(tmax + 1) for u in range(umax + 1) for v in range(vmax + 1)}


@dataclass
class _Pair:
    """Primitive-pair data for a product of two contracted functions."""
    p: np.ndarray         # (Ka, Kb) combined exponents
    center: np.ndarray    # (Ka, Kb, 3) Gaussian product centers
    coef: np.ndarray      # (Ka, Kb) contraction weights
    e: tuple              # per direction: list of E^{ij}_t arrays
    lmn: tuple            # summed Cartesian powers


def _make_pair(fa, fb):
    a = fa.exponents[:, None]
    b = fb.exponents[None, :]
    p = a + b
    center = (a[..., None] * fa.center + b[..., None] * fb.center) / p[..., None]
    q = fa.center - fb.center
    e = tuple([_hermite_e(fa.lmn[d], fb.lmn[d], t, q[d], a, b)
               for t in range(fa.lmn[d] + fb.lmn[d] + 1)] for d in range(3))
    coef = fa.coefs[:, None] * fb.coefs[None, :]
    lmn = tuple(fa.lmn[d] + fb.lmn[d] for d in range(3))
    return _Pair(p, center, coef, e, lmn)


def _overlap_prim(a, lmn_a, ca, b, lmn_b, cb):
    """Primitive overlap arrays for shifted angular momenta (used by kinetic)."""
    if min(lmn_a) < 0 or min(lmn_b) < 0:
        return np.zeros(np.broadcast(a, b).shape)
    p = a + b
    out = (np.pi / p) ** 1.5
    for d in range(3):
        out = out * _hermite_e(lmn_a[d], lmn_b[d], 0, ca[d] - cb[d], a, b)
    return out


def _kinetic(fa, fb):
    a = fa.exponents[:, None]
    b = fb.exponents[None, :]
    l2 = fb.lmn
    ov = lambda shift: _overlap_prim(a, fa.lmn, fa.center, b,
                                     tuple(l2[d] + shift[d] for d in range(3)), fb.center)
    term0 = b * (2 * sum(l2) + 3) * ov((0, 0, 0))
    term1 = -2 * b * b * (ov((2, 0, 0)) + ov((0, 2, 0)) + ov((0, 0, 2)))
    term2 = -0.5 * (l2[0] * (l2[0] - 1) * ov((-2, 0, 0)) + l2[1] * (l2[1] - 1) * ov((0, -2, 0))
                    + l2[2] * (l2[2] - 1) * ov((0, 0, -2)))
    return float(np.sum(fa.coefs[:, None] * fb.coefs[None, :] * (term0 + term1 + term2)))


def _nuclear(pair, centers, charges):
    lx, ly, lz = pair.lmn
    total = np.zeros_like(pair.p)
    for c, z in zip(centers, charges):
        rtab = _hermite_r(lx, ly, lz, pair.p, pair.center - c)
        acc = np.zeros_like(pair.p)
        for t, u, v in itertools.product(range(lx + 1), range(ly + 1), range(lz + 1)):
            acc = acc + pair.e[0][t] * pair.e[1][u] * pair.e[2][v] * rtab[(t, u, v)]
        total = total - z * acc
    return float(np.sum(pair.coef * 2 * np.pi / pair.p * total))


def _eri(pab, pcd):
    p = pab.p[:, :, None, None]
    q = pcd.p[None, None, :, :]
    alpha = p * q / (p + q)
    pq = pab.center[:, :, None, None, :] - pcd.center[None, None, :, :, :]
    lx, ly, lz = (pab.lmn[d] + pcd.lmn[d] for d in range(3))
    rtab = _hermite_r(lx, ly, lz, alpha, pq)
    acc = 0.0
    for t, u, v in itertools.product(*(range(n + 1) for n in pab.lmn)):
        eab = (pab.e[0][t] * pab.e[1][u] * pab.e[2][v])[:, :, None, None]
        for tau, nu, phi in itertools.product(*(range(n + 1) for n in pcd.lmn)):
            ecd = (pcd.e[0][tau] * pcd.e[1][nu] * pcd.e[2][phi])[None, None]
            sign = -1.0 if (tau + nu + phi) % 2 else 1.0
            acc = acc + sign * eab * ecd * rtab[(t + tau, u + nu, v + phi)]
    pref = 2 * np.pi ** 2.5 / (p * q * np.sqrt(p + q))
    w = pab.coef[:, :, None, None] * pcd.coef[None, None]
    return float(np.sum(w * pref * acc))


@dataclass
class IntegralTables:
    """AO integral matrices in bohr/hartree atomic units.

    ``eri[i, j, k, l] = (ij|kl)`` in chemists' notation, filled with all eight
    permutational images of each unique quartet.
    """
    S: np.ndarray
    T: np.ndarray
    V: np.ndarray
    eri: np.ndarray
    basis: list
    basis_name: str
    e_nuc: float

    @property
    def n_ao(self):
        return len(self.basis)

    @property
    def hcore(self):
        return self.T + self.V


def compute_integrals(mol, basis="sto-6g"):
    """Overlap, kinetic, nuclear-attraction and electron-repulsion tables for ``mol``."""
    funcs = build_basis(mol, basis) if isinstance(basis, str) else list(basis)
    if any(f.l > 1 for f in funcs):
        raise UnsupportedBasisError("only s and p functions are supported")
    name = basis if isinstance(basis, str) else "custom"
    n = len(funcs)
    S = np.zeros((n, n))
    T = np.zeros((n, n))
    V = np.zeros((n, n))
    pairs = {}
    for i in range(n):
        for j in range(i + 1):
            pr = _make_pair(funcs[i], funcs[j])
            pairs[i, j] = pr
            ov = pr.coef * (np.pi / pr.p) ** 1.5 * pr.e[0][0] * pr.e[1][0] * pr.e[2][0]
            S[i, j] = S[j, i] = float(np.sum(ov))
            T[i, j] = T[j, i] = _kinetic(funcs[i], funcs[j])
            V[i, j] = V[j, i] = _nuclear(pr, mol.positions, mol.charges)
    eri = np.zeros((n, n, n, n))
    keys = list(pairs)
    for a, (i, j) in enumerate(keys):
        for k, l in keys[:a + 1]:
            val = _eri(pairs[i, j], pairs[k, l])
            for (w, x, y, z) in ((i, j, k, l), (j, i, k, l), (i, j, l, k), (j, i, l, k),
                                 (k, l, i, j), (l, k, i, j), (k, l, j, i), (l, k, j, i)):
                eri[w, x, y, z] = val
    return IntegralTables(S, T, V, eri, funcs, name, mol.nuclear_repulsion())
