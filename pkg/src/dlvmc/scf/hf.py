"""Spin-unrestricted Hartree-Fock with damped density mixing."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .integrals import IntegralTables, compute_integrals

log = logging.getLogger(__name__)


class LinearDependenceError(np.linalg.LinAlgError):
    pass


@dataclass
class ScfResult:
    """Converged (or last) UHF iterate.

    ``coeffs`` and ``orbital_energies`` are per spin channel ``(up, dn)`` and hold
    all molecular orbitals; the first ``n_up`` / ``n_dn`` columns are occupied.
    """
    coeffs: tuple
    orbital_energies: tuple
    density_up: np.ndarray
    density_dn: np.ndarray
    energy: float
    converged: bool
    n_iter: int
    n_up: int
    n_dn: int
    tables: IntegralTables = field(repr=False)
    energy_history: list = field(default_factory=list, repr=False)
    trace_history: list = field(default_factory=list, repr=False)

    @property
    def density(self):
        """Total AO density matrix ``D = D_up + D_dn``."""
        return self.density_up + self.density_dn

    @property
    def basis(self):
        return self.tables.basis

    @property
    def overlap(self):
        return self.tables.S

    def occupied(self, spin):
        c = self.coeffs[0 if spin == "up" else 1]
        return c[:, :self.n_up if spin == "up" else self.n_dn]


def orthogonalizer(S, threshold=1e-8):
    """Canonical orthogonalization ``X`` with ``X.T S X = 1``."""
    s, U = np.linalg.eigh(S)
    if s[0] < -threshold:
        raise LinearDependenceError(f"overlap matrix not positive semidefinite (min eig {s[0]:.3e})")
    keep = s > threshold
    if not np.any(keep):
        raise LinearDependenceError("overlap matrix is singular")
    return U[:, keep] / np.sqrt(s[keep])


def _fock(h, eri, d_tot, d_spin):
    j = np.einsum("ijkl,kl->ij", eri, d_tot)
    k = np.einsum("ikjl,kl->ij", eri, d_spin)
    return h + j - k


def _diag(f, X, n_occ):
    e, c = np.linalg.eigh(X.T @ f @ X)
    c = X @ c
    occ = c[:, :n_occ]
    return e, c, occ @ occ.T


def run_scf(tables, mol, max_iter=500, density_mix=0.5, tol=1e-8, energy_tol=1e-10):
    """UHF with fixed ``(n_up, n_dn)`` occupation.

    Converged when ``max|dD| < tol`` and ``|dE| < energy_tol``. A result is
    returned either way; check ``converged``.
    """
    X = orthogonalizer(tables.S)
    if X.shape[1] < mol.n_up:
        raise LinearDependenceError(
            f"only {X.shape[1]} independent AOs for {mol.n_up} spin-up electrons")
    h = tables.hcore
    _, c_up, d_up = _diag(h, X, mol.n_up)
    _, c_dn, d_dn = _diag(h, X, mol.n_dn)
    e_old = np.inf
    energies, traces = [], []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        d_tot = d_up + d_dn
        f_up = _fock(h, tables.eri, d_tot, d_up)
        f_dn = _fock(h, tables.eri, d_tot, d_dn)
        energy = 0.5 * (np.sum((h + f_up) * d_up) + np.sum((h + f_dn) * d_dn)) + tables.e_nuc
        energies.append(float(energy))
        traces.append(float(np.sum(d_tot * tables.S)))
        eps_up, c_up, new_up = _diag(f_up, X, mol.n_up)
        eps_dn, c_dn, new_dn = _diag(f_dn, X, mol.n_dn)
        delta = max(np.abs(new_up - d_up).max(), np.abs(new_dn - d_dn).max())
        if delta < tol and abs(energy - e_old) < energy_tol:
            converged = True
            d_up, d_dn = new_up, new_dn
            break
        d_up = (1 - density_mix) * d_up + density_mix * new_up
        d_dn = (1 - density_mix) * d_dn + density_mix * new_dn
        e_old = energy
    if not converged:
        log.warning("SCF not converged after %d iterations", max_iter)
    return ScfResult((c_up, c_dn), (eps_up, eps_dn), d_up, d_dn, energies[-1], converged, it,
                     mol.n_up, mol.n_dn, tables, energies, traces)


def pack_basis(basis):
    """Padded arrays describing a basis, usable by :func:`ao_values` under numpy or jax."""
    kmax = max(len(f.exponents) for f in basis)
    n = len(basis)
    centers = np.array([f.center for f in basis])
    lmn = np.array([f.lmn for f in basis], dtype=np.int64)
    exps = np.ones((n, kmax))
    coefs = np.zeros((n, kmax))
    for i, f in enumerate(basis):
        exps[i, :len(f.exponents)] = f.exponents
        coefs[i, :len(f.coefs)] = f.coefs
    return centers, lmn, exps, coefs


def ao_values(packed, points, xp=np):
    """AO values at ``points`` of shape ``(..., 3)``; returns ``(..., n_ao)``."""
    centers, lmn, exps, coefs = packed
    d = points[..., None, :] - centers
    r2 = xp.sum(d * d, axis=-1)
    radial = xp.sum(coefs * xp.exp(-exps * r2[..., None]), axis=-1)
    ang = xp.prod(xp.where(lmn == 1, d, 1.0), axis=-1)
    return ang * radial


def eval_orbitals(scf, points):
    """Occupied orbital values ``(up, dn)`` at points ``(M, 3)``, each ``(M, n_occ)``."""
    pts = np.asarray(points, dtype=np.float64)
    ao = ao_values(pack_basis(scf.basis), pts)
    return ao @ scf.occupied("up"), ao @ scf.occupied("dn")


class HartreeFock(BaseEstimator):
    """Minimal-basis UHF as an estimator: ``fit(mol)`` then ``predict(points)``."""

    def __init__(self, basis="sto-6g", max_iter=500, density_mix=0.5, tol=1e-8):
        self.basis = basis
        self.max_iter = max_iter
        self.density_mix = density_mix
        self.tol = tol

    def fit(self, mol, y=None):
        tables = compute_integrals(mol, self.basis)
        self.result_ = run_scf(tables, mol, self.max_iter, self.density_mix, self.tol)
        self.energy_ = self.result_.energy
        return self

    def predict(self, points):
        check_is_fitted(self, "result_")
        return eval_orbitals(self.result_, points)
