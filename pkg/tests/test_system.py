import numpy as np
import pytest

from dlvmc.system import (ANGSTROM_TO_BOHR, GeometryError, Molecule, UnsupportedElementError,
                          default_spin_assignment, emit_geometry, parse_geometry, read_geometry)


def test_hydrogen_atom():
    mol = parse_geometry("1\n\nH 0 0 0")
    assert mol.n_nuc == 1 and mol.charges.tolist() == [1]
    assert (mol.n_el, mol.n_up, mol.n_dn) == (1, 1, 0)


def test_nitrogen_dimer():
    mol = parse_geometry("2\n\nN 0 0 0\nN 0 0 2.068")
    assert mol.charges.tolist() == [7, 7]
    assert (mol.n_el, mol.n_up, mol.n_dn) == (14, 7, 7)
    assert mol.positions[1, 2] == 2.068


def test_angstrom_conversion():
    mol = parse_geometry("1\n\nO 0 0 0.529177", unit="angstrom")
    np.testing.assert_allclose(mol.positions[0], [0.0, 0.0, 1.0], atol=1e-5)


@pytest.mark.parametrize("n_el,expected", [(1, (1, 0)), (14, (7, 7)), (3, (2, 1)), (2, (1, 1))])
def test_default_spin(n_el, expected):
    assert default_spin_assignment(n_el) == expected


def test_default_spin_rejects_zero():
    with pytest.raises(ValueError):
        default_spin_assignment(0)


def test_round_trip():
    text = "3\nwater-ish\nO 0.1 -0.2 0.3\nH 1.234567890123 0 0\nH -0.5 1.1 1e-3\n"
    mol = parse_geometry(text)
    again = parse_geometry(emit_geometry(mol, "copy"))
    assert np.max(np.abs(again.positions - mol.positions)) <= 1e-12
    assert again.symbols == mol.symbols


def test_round_trip_angstrom():
    mol = parse_geometry("2\n\nLi 0 0 0\nH 0 0 1.6", unit="angstrom")
    again = parse_geometry(emit_geometry(mol, unit="angstrom"), unit="angstrom")
    np.testing.assert_allclose(again.positions, mol.positions, atol=1e-12)


def test_unit_flags_differ_by_constant():
    text = "2\n\nC 0.3 -1.7 2.2\nO 1 2 3"
    bohr = parse_geometry(text, unit="bohr")
    ang = parse_geometry(text, unit="angstrom")
    np.testing.assert_allclose(ang.positions, bohr.positions * ANGSTROM_TO_BOHR, rtol=0, atol=1e-15)


@pytest.mark.parametrize("text,line", [
    ("x\n\nH 0 0 0", 1),
    ("2\n\nH 0 0 0\nH 0 0", 4),
    ("1\n\nH 0 zero 0", 3),
    ("2\n\nH 0 0 0", 1),
])
def test_malformed_reports_line(text, line):
    with pytest.raises(GeometryError, match=f"line {line}"):
        parse_geometry(text)


def test_unknown_element():
    with pytest.raises(UnsupportedElementError, match="line 3"):
        parse_geometry("1\n\nXx 0 0 0")
    with pytest.raises(UnsupportedElementError):
        parse_geometry("1\n\nRb 0 0 0")


def test_invariants_enforced():
    with pytest.raises(GeometryError):
        Molecule(np.zeros((2, 3)), [1, 1], 1, 1)
    with pytest.raises(GeometryError):
        Molecule(np.zeros((1, 3)), [0], 1, 0)
    with pytest.raises(GeometryError):
        Molecule(np.zeros((1, 3)), [2], 0, 2)


def test_charge_and_spin_overrides():
    mol = parse_geometry("1\n\nLi 0 0 0", charge=1)
    assert (mol.n_up, mol.n_dn) == (1, 1)
    mol = parse_geometry("1\n\nN 0 0 0", spin=3)
    assert (mol.n_up, mol.n_dn) == (5, 2)
    with pytest.raises(GeometryError):
        parse_geometry("1\n\nN 0 0 0", spin=2)


def test_nuclear_repulsion_and_rotation():
    mol = Molecule.from_atoms([("H", (0, 0, -1.0)), ("H", (0, 0, 1.0))])
    assert mol.nuclear_repulsion() == 0.5
    q = np.array([[0.0, -1, 0], [1, 0, 0], [0, 0, 1]])
    assert mol.rotated(q).nuclear_repulsion() == pytest.approx(0.5, abs=1e-15)
    np.testing.assert_allclose(mol.translated([1, 2, 3]).positions[0], [1, 2, 2])


def test_read_geometry(tmp_path):
    p = tmp_path / "h2.xyz"
    p.write_text("2\n\nH 0 0 0\nH 0 0 1.4\n", encoding="utf-8")
    assert read_geometry(p).n_el == 2
