"""Contracted Cartesian Gaussian basis functions (s and p shells only)."""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

_FILES = {"sto-3g": "sto3g.json", "sto-6g": "sto6g.json"}
_P_COMPONENTS = ((1, 0, 0), (0, 1, 0), (0, 0, 1))


class UnsupportedBasisError(ValueError):
    """Raised for elements or angular momenta outside the embedded s/p tables."""


@dataclass(frozen=True)
class BasisFunction:
    center: np.ndarray   # bohr
    lmn: tuple           # Cartesian powers
    exponents: np.ndarray
    coefs: np.ndarray    # contraction coefficients incl. primitive normalization
    atom: int
    shell: int           # shell index within the atom

    @property
    def l(self):
        return sum(self.lmn)


@lru_cache(maxsize=None)
def load_basis_table(name="sto-6g"):
    """Return ``{Z: [(l, exponents, coefficients), ...]}`` for an embedded basis."""
    key = name.lower()
    if key not in _FILES:
        raise UnsupportedBasisError(f"unknown basis {name!r}; available: {sorted(_FILES)}")
    raw = json.loads(resources.files("dlvmc.data").joinpath(_FILES[key]).read_text())
    return {int(z): [(sh["l"], tuple(sh["exponents"]), tuple(sh["coefficients"])) for sh in shells]
            for z, shells in raw.items()}


def _double_factorial(n):
    return 1 if n <= 0 else n * _double_factorial(n - 2)


def primitive_norm(alpha, lmn):
    l, m, n = lmn
    big_l = l + m + n
    return ((2 * alpha / np.pi) ** 0.75 * (4 * alpha) ** (big_l / 2)
            / np.sqrt(_double_factorial(2 * l - 1) * _double_factorial(2 * m - 1)
                      * _double_factorial(2 * n - 1)))


def _normalize(exps, coefs, lmn):
    c = coefs * primitive_norm(exps, lmn)
    # self-overlap of the contraction; exact for a single Cartesian component
    big_l = sum(lmn)
    p = exps[:, None] + exps[None, :]
    fac = np.prod([_double_factorial(2 * k - 1) for k in lmn])
    s = np.sum(c[:, None] * c[None, :] * fac * (np.pi / p) ** 1.5 / (2 * p) ** big_l)
    return c / np.sqrt(s)


def build_basis(mol, name="sto-6g"):
    """Expand ``mol`` into a list of normalized :class:`BasisFunction`."""
    table = load_basis_table(name)
    funcs = []
    for atom, (z, center) in enumerate(zip(mol.charges, mol.positions)):
        z = int(z)
        if z not in table:
            raise UnsupportedBasisError(f"no {name} data for Z={z}")
        shells = table[z]
        if any(l > 1 for l, _, _ in shells):
            raise UnsupportedBasisError(
                f"{name} for Z={z} needs d functions; only s/p shells are supported")
        for ishell, (l, exps, coefs) in enumerate(shells):
            exps = np.asarray(exps, dtype=np.float64)
            comps = [(0, 0, 0)] if l == 0 else _P_COMPONENTS
            for lmn in comps:
                funcs.append(BasisFunction(np.array(center, dtype=np.float64), lmn, exps,
                                           _normalize(exps, np.asarray(coefs), lmn), atom, ishell))
    return funcs


def p_indices(basis, atom):
    """AO indices ``(px, py, pz)`` of the outermost p shell on ``atom``, or None."""
    shells = {}
    for i, f in enumerate(basis):
        if f.atom == atom and f.l == 1:
            shells.setdefault(f.shell, []).append(i)
    if not shells:
        return None
    return tuple(shells[max(shells)])
