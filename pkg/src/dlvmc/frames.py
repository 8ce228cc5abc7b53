"""Per-nucleus local coordinate frames from the p-block of the HF density matrix."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .scf.basis import p_indices


class FrameError(RuntimeError):
    pass


class MissingPShellError(LookupError):
    pass


@dataclass(frozen=True)
class FrameSet:
    """``axes[J]`` holds the local axes of nucleus J as columns (right-handed).

    Local components of a vector ``x`` are ``axes[J].T @ x``.
    """
    axes: np.ndarray         # (n_nuc, 3, 3)
    eigenvalues: np.ndarray  # (n_nuc, 3), descending; NaN where no p-block
    degenerate: np.ndarray   # (n_nuc, 2) bool: (ev0~ev1, ev1~ev2)

    @classmethod
    def identity(cls, n_nuc):
        return cls(np.tile(np.eye(3), (n_nuc, 1, 1)), np.full((n_nuc, 3), np.nan),
                   np.zeros((n_nuc, 2), dtype=bool))

    def rotated(self, rotation):
        """Frames transformed as ``Q @ U_J`` (what a rotated molecule should give)."""
        return FrameSet(np.einsum("ab,jbc->jac", rotation, self.axes), self.eigenvalues,
                        self.degenerate)

    def dumps(self):
        rows = []
        for J, (u, ev) in enumerate(zip(self.axes, self.eigenvalues)):
            vals = " ".join(f"{v:.17g}" for v in list(u.ravel()) + list(ev))
            rows.append(f"{J} {vals}")
        return "# nucleus U00 U01 U02 U10 U11 U12 U20 U21 U22 ev0 ev1 ev2\n" + "\n".join(rows) + "\n"


def p_block(scf, atom):
    """3x3 block of the total density matrix over the p functions of ``atom``."""
    idx = p_indices(scf.basis, atom)
    if idx is None:
        raise MissingPShellError(f"nucleus {atom} has no p shell")
    d = scf.density[np.ix_(idx, idx)]
    return 0.5 * (d + d.T)


def _align_pair(vecs, reference):
    """Rotate a 2D eigen-subspace so its first vector follows the best-projected reference axis."""
    proj = vecs.T @ reference                   # (2, 3)
    norms = np.linalg.norm(proj, axis=0)
    a = int(np.argmax(norms))
    if norms[a] < 1e-12:
        return vecs
    first = vecs @ (proj[:, a] / norms[a])
    second = vecs @ np.array([-proj[1, a], proj[0, a]]) / norms[a]
    rest = [b for b in np.argsort(-norms, kind="stable") if b != a]
    for b in rest:
        s = second @ reference[:, b]
        if abs(s) > 1e-12:
            second = second * np.sign(s)
            break
    return np.stack([first, second], axis=1)


def _fix_signs(axes, directions, tol=1e-6):
    """Orient each axis along its first non-orthogonal neighbor direction; last free axis by det."""
    axes = axes.copy()
    free = []
    for k in range(3):
        for d in directions:
            s = axes[:, k] @ d
            if abs(s) > tol:
                axes[:, k] *= np.sign(s)
                break
        else:
            free.append(k)
    if free and np.linalg.det(axes) < 0:
        axes[:, free[-1]] *= -1
    elif not free and np.linalg.det(axes) < 0:
        raise FrameError("sign convention produced a left-handed frame")
    return axes


def compute_frames(scf, mol, tol_degenerate=1e-6):
    """Local axes for every nucleus.

    Eigenvectors of the p-block are sorted by descending eigenvalue and oriented
    toward neighboring nuclei (nearest first). Degenerate pairs are rotated to
    best overlap the axes of the previous nucleus (global axes for the first).
    Nuclei without p functions copy the frame of the nearest nucleus that has
    one. A single nucleus gets the identity.
    """
    n = mol.n_nuc
    if n == 1:
        return FrameSet.identity(1)
    if not scf.converged:
        raise FrameError("frames require a converged SCF")
    pos = mol.positions
    dist = np.linalg.norm(pos[:, None] - pos[None], axis=-1)
    axes = np.tile(np.eye(3), (n, 1, 1))
    evals = np.full((n, 3), np.nan)
    degen = np.zeros((n, 2), dtype=bool)
    has_p = np.zeros(n, dtype=bool)
    reference = np.eye(3)
    for J in range(n):
        try:
            block = p_block(scf, J)
        except MissingPShellError:
            continue
        has_p[J] = True
        w, v = np.linalg.eigh(block)
        order = np.argsort(-w, kind="stable")
        w, v = w[order], v[:, order]
        evals[J] = w
        degen[J] = [w[0] - w[1] < tol_degenerate, w[1] - w[2] < tol_degenerate]
        if degen[J].all():
            v = reference.copy()
        elif degen[J, 0]:
            v[:, :2] = _align_pair(v[:, :2], reference)
        elif degen[J, 1]:
            v[:, 1:] = _align_pair(v[:, 1:], reference)
        others = [K for K in np.argsort(dist[J], kind="stable") if K != J]
        directions = [(pos[K] - pos[J]) / dist[J, K] for K in others]
        if not degen[J].all():
            v = _fix_signs(v, directions)
        axes[J] = v
        reference = v
    if has_p.any():
        for J in np.flatnonzero(~has_p):
            cand = [K for K in np.argsort(dist[J], kind="stable") if has_p[K]]
            axes[J] = axes[cand[0]]
    return FrameSet(axes, evals, degen)


class LocalFrames(BaseEstimator):
    """Estimator wrapper: ``fit(mol, scf=...)`` stores ``frames_``."""

    def __init__(self, tol_degenerate=1e-6):
        self.tol_degenerate = tol_degenerate

    def fit(self, mol, scf=None):
        if scf is None and mol.n_nuc > 1:
            from .scf.hf import HartreeFock
            scf = HartreeFock().fit(mol).result_
        self.frames_ = compute_frames(scf, mol, self.tol_degenerate)
        return self

    def transform(self, vectors):
        """Local components of per-nucleus vectors ``(..., n_nuc, 3)``."""
        check_is_fitted(self, "frames_")
        return np.einsum("jab,...ja->...jb", self.frames_.axes, vectors)
