"""Tripos mol2 reader/writer producing a small molecular graph."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

from .errors import Mol2FieldError, Mol2FormatError, Mol2ReferenceError

# fmt: off
ELEMENTS = frozenset("""
H He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Sc Ti V Cr Mn Fe Co Ni Cu
Zn Ga Ge As Se Br Kr Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag Cd In Sn Sb Te I Xe Cs Ba
La Ce Pr Nd Pm Sm Eu Gd Tb Dy Ho Er Tm Yb Lu Hf Ta W Re Os Ir Pt Au Hg Tl Pb Bi
Po At Rn Fr Ra Ac Th Pa U Np Pu Am Cm Bk Cf Es Fm Md No Lr Rf Db Sg Bh Hs Mt Ds
Rg Cn Nh Fl Mc Lv Ts Og D
""".split())
# fmt: on

BOND_ORDERS = frozenset({"1", "2", "3", "am", "ar", "du", "un", "nc"})


@dataclass(frozen=True)
class Atom:
    id: int
    element: str
    sybyl_type: str
    position: tuple[float, float, float]
    partial_charge: float
    is_hydrogen: bool
    name: str = ""
    subst_id: int = 1
    subst_name: str = "UNL"


@dataclass(frozen=True)
class Bond:
    a: int
    b: int
    order_label: str


@dataclass(eq=False)
class Molecule:
    atoms: list[Atom] = field(default_factory=list)
    bonds: list[Bond] = field(default_factory=list)
    name: str = ""

    def __eq__(self, other):
        if not isinstance(other, Molecule):
            return NotImplemented
        return (self.name, self.atoms, self.bonds) == (other.name, other.atoms, other.bonds)

    @cached_property
    def atom_by_id(self) -> dict[int, Atom]:
        return {a.id: a for a in self.atoms}

    @cached_property
    def adjacency(self) -> dict[int, list[tuple[int, str]]]:
        """Map atom id -> list of (neighbor id, bond order label)."""
        adj: dict[int, list[tuple[int, str]]] = {a.id: [] for a in self.atoms}
        for bond in self.bonds:
            adj[bond.a].append((bond.b, bond.order_label))
            adj[bond.b].append((bond.a, bond.order_label))
        return adj

    def neighbors(self, atom_id: int) -> list[Atom]:
        table = self.atom_by_id
        return [table[j] for j, _ in self.adjacency[atom_id]]


def element_from_sybyl(sybyl_type: str) -> str:
    """Element symbol from the part of a sybyl type before the first dot.

    Raises ``ValueError`` for dummy atoms, lone pairs and unknown symbols.
    """
    raw = sybyl_type.split(".", 1)[0]
    if not raw:
        raise ValueError(f"empty element in atom type {sybyl_type!r}")
    symbol = raw[0].upper() + raw[1:].lower()
    if symbol in ("Du", "Lp"):
        raise ValueError(f"dummy/lone-pair atom type {sybyl_type!r} is not supported")
    if symbol not in ELEMENTS:
        raise ValueError(f"unknown element in atom type {sybyl_type!r}")
    return symbol


def _float(token: str, what: str, lineno: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise Mol2FieldError(f"non-numeric {what} {token!r}", lineno) from None
    if not math.isfinite(value):
        raise Mol2FieldError(f"non-finite {what} {token!r}", lineno)
    return value


def _int(token: str, what: str, lineno: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise Mol2FieldError(f"non-integer {what} {token!r}", lineno) from None


def _parse_atom(tokens: list[str], lineno: int) -> Atom:
    if len(tokens) < 6:
        raise Mol2FieldError(f"ATOM record needs at least 6 fields, got {len(tokens)}", lineno)
    atom_id = _int(tokens[0], "atom id", lineno)
    if atom_id < 1:
        raise Mol2FieldError(f"atom id must be positive, got {atom_id}", lineno)
    x = _float(tokens[2], "x coordinate", lineno)
    y = _float(tokens[3], "y coordinate", lineno)
    z = _float(tokens[4], "z coordinate", lineno)
    sybyl = tokens[5]
    try:
        element = element_from_sybyl(sybyl)
    except ValueError as exc:
        raise Mol2FieldError(str(exc), lineno) from None
    subst_id = _int(tokens[6], "substructure id", lineno) if len(tokens) > 6 else 1
    subst_name = tokens[7] if len(tokens) > 7 else "UNL"
    charge = _float(tokens[8], "partial charge", lineno) if len(tokens) > 8 else 0.0
    return Atom(
        id=atom_id,
        element=element,
        sybyl_type=sybyl,
        position=(x, y, z),
        partial_charge=charge,
        is_hydrogen=element in ("H", "D"),
        name=tokens[1],
        subst_id=subst_id,
        subst_name=subst_name,
    )


def parse_mol2(text: bytes | str) -> Molecule:
    """Parse the first ``@<TRIPOS>MOLECULE`` block of a mol2 file."""
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise Mol2FormatError(f"input is not UTF-8 text: {exc}") from None

    section = None
    name = None
    seen_molecule = False
    seen_atom_section = False
    atoms: list[Atom] = []
    bond_records: list[tuple[int, int, str, int]] = []

    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("@<TRIPOS>"):
            section = stripped[len("@<TRIPOS>"):].upper()
            if section == "MOLECULE":
                if seen_molecule:
                    warnings.warn("mol2 input holds several molecules; only the first is read")
                    break
                seen_molecule = True
            elif section == "ATOM":
                seen_atom_section = True
            continue
        if not stripped or stripped.startswith("#"):
            continue
        if section == "MOLECULE" and name is None:
            name = stripped
        elif section == "ATOM":
            atoms.append(_parse_atom(stripped.split(), lineno))
        elif section == "BOND":
            tokens = stripped.split()
            if len(tokens) < 4:
                raise Mol2FieldError(f"BOND record needs 4 fields, got {len(tokens)}", lineno)
            a = _int(tokens[1], "bond origin", lineno)
            b = _int(tokens[2], "bond target", lineno)
            order = tokens[3].lower()
            if order not in BOND_ORDERS:
                raise Mol2FieldError(f"unknown bond type {tokens[3]!r}", lineno)
            bond_records.append((a, b, order, lineno))

    if not seen_atom_section:
        raise Mol2FormatError("missing @<TRIPOS>ATOM section")

    ids = set()
    for atom in atoms:
        if atom.id in ids:
            raise Mol2ReferenceError(f"duplicate atom id {atom.id}")
        ids.add(atom.id)

    bonds = []
    pairs = set()
    for a, b, order, lineno in bond_records:
        if a not in ids or b not in ids:
            missing = a if a not in ids else b
            raise Mol2ReferenceError(f"line {lineno}: bond references unknown atom id {missing}")
        if a == b:
            raise Mol2ReferenceError(f"line {lineno}: bond from atom {a} to itself")
        key = (min(a, b), max(a, b))
        if key in pairs:
            raise Mol2ReferenceError(f"line {lineno}: duplicate bond between atoms {a} and {b}")
        pairs.add(key)
        bonds.append(Bond(a, b, order))

    return Molecule(atoms=atoms, bonds=bonds, name=name or "")


def read_mol2(path) -> Molecule:
    with open(path, "rb") as fh:
        return parse_mol2(fh.read())


def write_mol2(mol: Molecule) -> str:
    """Serialize ``mol`` so that :func:`parse_mol2` returns an equal molecule."""
    lines = [
        "@<TRIPOS>MOLECULE",
        mol.name or "****",
        f"{len(mol.atoms)} {len(mol.bonds)} 0 0 0",
        "SMALL",
        "USER_CHARGES",
        "",
        "@<TRIPOS>ATOM",
    ]
    for atom in mol.atoms:
        x, y, z = atom.position
        lines.append(
            f"{atom.id} {atom.name or atom.element} {x!r} {y!r} {z!r} {atom.sybyl_type} "
            f"{atom.subst_id} {atom.subst_name} {atom.partial_charge!r}"
        )
    lines.append("@<TRIPOS>BOND")
    for i, bond in enumerate(mol.bonds, start=1):
        lines.append(f"{i} {bond.a} {bond.b} {bond.order_label}")
    return "\n".join(lines) + "\n"


def heavy_atoms(mol: Molecule) -> list[Atom]:
    return [a for a in mol.atoms if not a.is_hydrogen]


def all_charges(mols: Iterable[Molecule], heavy_only: bool = True) -> list[float]:
    out = []
    for mol in mols:
        atoms = heavy_atoms(mol) if heavy_only else mol.atoms
        out.extend(a.partial_charge for a in atoms)
    return out
