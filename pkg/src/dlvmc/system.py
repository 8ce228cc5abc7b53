"""Molecules in atomic units and XYZ geometry parsing."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

ANGSTROM_TO_BOHR = 1.8897259886

ELEMENTS = (
    "H", "He",
    "Li", "Be", "B", "C", "N", "O", "F", "Ne",
    "Na", "Mg", "Al", "Si", "P", "S", "Cl", "Ar",
    "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn",
    "Ga", "Ge", "As", "Se", "Br", "Kr",
)
CHARGES = {sym: z for z, sym in enumerate(ELEMENTS, start=1)}


class GeometryError(ValueError):
    """Malformed geometry input."""


class UnsupportedElementError(GeometryError):
    pass


def default_spin_assignment(n_el):
    """Minimal spin polarization: ``(ceil(n/2), floor(n/2))``."""
    if n_el < 1:
        raise ValueError(f"n_el must be positive, got {n_el}")
    return (n_el + 1) // 2, n_el // 2


@dataclass(frozen=True)
class Molecule:
    """Fixed nuclei plus electron count and spin split.

    Positions are in bohr. Spin-up electrons occupy indices ``0..n_up-1``.
    """

    positions: np.ndarray
    charges: np.ndarray
    n_up: int
    n_dn: int
    symbols: tuple = field(default=())

    def __post_init__(self):
        pos = np.array(self.positions, dtype=np.float64).reshape(-1, 3)
        z = np.array(self.charges, dtype=np.int64).reshape(-1)
        if len(pos) != len(z) or len(z) == 0:
            raise GeometryError("positions and charges must have equal, nonzero length")
        if np.any(z < 1):
            raise GeometryError("nuclear charges must be >= 1")
        if not np.all(np.isfinite(pos)):
            raise GeometryError("nuclear positions must be finite")
        if len(z) > 1:
            d = np.linalg.norm(pos[:, None] - pos[None], axis=-1)
            if np.any(d[np.triu_indices(len(z), 1)] == 0.0):
                raise GeometryError("nuclear positions must be pairwise distinct")
        if self.n_dn < 0 or self.n_up < self.n_dn or self.n_up + self.n_dn < 1:
            raise GeometryError(
                f"invalid spin split n_up={self.n_up}, n_dn={self.n_dn} (need n_up >= n_dn >= 0)")
        pos.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "charges", z)
        if not self.symbols:
            object.__setattr__(self, "symbols", tuple(ELEMENTS[c - 1] for c in z))

    @classmethod
    def from_atoms(cls, atoms, charge=0, spin=None):
        """Build from ``[(symbol, (x, y, z)), ...]`` in bohr.

        ``spin`` is ``n_up - n_dn``; defaults to minimal polarization.
        """
        symbols = [a[0] for a in atoms]
        z = []
        for s in symbols:
            if s not in CHARGES:
                raise UnsupportedElementError(f"unsupported element {s!r}")
            z.append(CHARGES[s])
        n_el = sum(z) - charge
        if n_el < 1:
            raise GeometryError(f"molecule with charge {charge} has no electrons")
        if spin is None:
            n_up, n_dn = default_spin_assignment(n_el)
        else:
            if spin < 0 or (n_el - spin) % 2:
                raise GeometryError(f"spin {spin} incompatible with {n_el} electrons")
            n_up, n_dn = (n_el + spin) // 2, (n_el - spin) // 2
        return cls(np.array([a[1] for a in atoms], dtype=np.float64), np.array(z),
                   n_up, n_dn, tuple(symbols))

    @property
    def n_el(self):
        return self.n_up + self.n_dn

    @property
    def n_nuc(self):
        return len(self.charges)

    @property
    def spins(self):
        """Boolean array, True for spin-up electrons."""
        return np.arange(self.n_el) < self.n_up

    def nuclear_repulsion(self):
        e = 0.0
        for i in range(self.n_nuc):
            for j in range(i):
                e += self.charges[i] * self.charges[j] / np.linalg.norm(
                    self.positions[i] - self.positions[j])
        return float(e)

    def rotated(self, rotation, center=None):
        """Copy with nuclei rotated by the 3x3 matrix ``rotation`` about ``center``."""
        c = np.zeros(3) if center is None else np.asarray(center)
        pos = (self.positions - c) @ np.asarray(rotation).T + c
        return Molecule(pos, self.charges, self.n_up, self.n_dn, self.symbols)

    def translated(self, shift):
        return Molecule(self.positions + np.asarray(shift), self.charges, self.n_up,
                        self.n_dn, self.symbols)


def parse_geometry(text, unit="bohr", charge=0, spin=None):
    """Parse an XYZ listing into a :class:`Molecule`.

    The first line holds the atom count, the second is a free comment, and each
    following line is ``SYMBOL x y z``.
    """
    if unit not in ("bohr", "angstrom"):
        raise GeometryError(f"unknown unit {unit!r}")
    scale = ANGSTROM_TO_BOHR if unit == "angstrom" else 1.0
    lines = text.splitlines()
    if not lines:
        raise GeometryError("line 1: empty geometry")
    try:
        count = int(lines[0].strip())
    except ValueError:
        raise GeometryError(f"line 1: expected atom count, got {lines[0]!r}") from None
    if count < 1:
        raise GeometryError("line 1: atom count must be positive")
    body = lines[2:]
    atoms = []
    for lineno, line in enumerate(body, start=3):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 4:
            raise GeometryError(f"line {lineno}: expected 'SYMBOL x y z', got {line!r}")
        sym = parts[0].capitalize()
        if sym not in CHARGES:
            raise UnsupportedElementError(f"line {lineno}: unsupported element {parts[0]!r}")
        try:
            xyz = [float(v) * scale for v in parts[1:]]
        except ValueError:
            raise GeometryError(f"line {lineno}: non-numeric coordinate in {line!r}") from None
        if not all(math.isfinite(v) for v in xyz):
            raise GeometryError(f"line {lineno}: non-finite coordinate")
        atoms.append((sym, xyz))
    if len(atoms) != count:
        raise GeometryError(f"line 1: declared {count} atoms, found {len(atoms)}")
    return Molecule.from_atoms(atoms, charge=charge, spin=spin)


def emit_geometry(mol, comment="", unit="bohr"):
    """Inverse of :func:`parse_geometry`; coordinates written with full precision."""
    scale = 1.0 / ANGSTROM_TO_BOHR if unit == "angstrom" else 1.0
    out = [str(mol.n_nuc), comment]
    for sym, p in zip(mol.symbols, mol.positions):
        out.append(f"{sym} " + " ".join(repr(float(v * scale)) for v in p))
    return "\n".join(out) + "\n"


def read_geometry(path, unit="bohr", charge=0, spin=None):
    with open(path, encoding="utf-8") as fh:
        return parse_geometry(fh.read(), unit=unit, charge=charge, spin=spin)
