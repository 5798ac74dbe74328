"""Per-atom 19-channel feature vectors for protein and ligand heavy atoms.

Channel order::

    0-8   atom type one-hot: B, C, N, O, P, S, Se, halogen, metal
    9     hyb (1, 2 or 3)
    10    heavy_valence
    11    hetero_valence
    12-16 hydrophobic, aromatic, acceptor, donor, ring
    17    partialcharge (divided by the training-set charge std)
    18    moltype (+1 ligand, -1 protein)

The five property bits are simple graph rules rather than SMARTS matches; each
rule is a separate function so alternatives can be dropped in.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import DegenerateScalerError
from .mol2 import Atom, Molecule, heavy_atoms

FEATURE_NAMES = (
    "B", "C", "N", "O", "P", "S", "Se", "halogen", "metal",
    "hyb", "heavy_valence", "hetero_valence",
    "hydrophobic", "aromatic", "acceptor", "donor", "ring",
    "partialcharge", "moltype",
)
N_FEATURES = len(FEATURE_NAMES)
HYB, HEAVY_VALENCE, HETERO_VALENCE = 9, 10, 11
HYDROPHOBIC, AROMATIC, ACCEPTOR, DONOR, RING = 12, 13, 14, 15, 16
PARTIALCHARGE, MOLTYPE = 17, 18

HALOGENS = frozenset({"F", "Cl", "Br", "I", "At"})
# fmt: off
METALS = frozenset("""
Li Na K Rb Cs Fr Be Mg Ca Sr Ba Ra Al Ga In Sn Tl Pb Bi Nh Fl Mc Lv
Sc Ti V Cr Mn Fe Co Ni Cu Zn Y Zr Nb Mo Tc Ru Rh Pd Ag Cd
Hf Ta W Re Os Ir Pt Au Hg Rf Db Sg Bh Hs Mt Ds Rg Cn
La Ce Pr Nd Pm Sm Eu Gd Tb Dy Ho Er Tm Yb Lu
Ac Th Pa U Np Pu Am Cm Bk Cf Es Fm Md No Lr
""".split())
# fmt: on
_TYPE_INDEX = {"B": 0, "C": 1, "N": 2, "O": 3, "P": 4, "S": 5, "Se": 6}
_SP2_SUFFIXES = frozenset({"ar", "am", "pl3", "cat", "co2"})


class FeaturizedAtom(NamedTuple):
    position: np.ndarray
    features: np.ndarray


@dataclass
class AtomCloud:
    """Columnar storage for featurized atoms: ``coords`` (N, 3), ``features`` (N, 19)."""

    coords: np.ndarray
    features: np.ndarray

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64).reshape(-1, 3)
        self.features = np.asarray(self.features, dtype=np.float64).reshape(-1, N_FEATURES)
        if len(self.coords) != len(self.features):
            raise ValueError("coords and features disagree on atom count")

    def __len__(self) -> int:
        return len(self.coords)

    def __iter__(self) -> Iterator[FeaturizedAtom]:
        for pos, feat in zip(self.coords, self.features):
            yield FeaturizedAtom(pos, feat)

    @property
    def ligand_mask(self) -> np.ndarray:
        return self.features[:, MOLTYPE] > 0

    def subset(self, mask) -> "AtomCloud":
        return AtomCloud(self.coords[mask], self.features[mask])

    @classmethod
    def empty(cls) -> "AtomCloud":
        return cls(np.zeros((0, 3)), np.zeros((0, N_FEATURES)))

    @classmethod
    def concat(cls, clouds: Sequence["AtomCloud"]) -> "AtomCloud":
        if not clouds:
            return cls.empty()
        return cls(np.concatenate([c.coords for c in clouds]),
                   np.concatenate([c.features for c in clouds]))


@dataclass(frozen=True)
class ChargeScaler:
    std: float

    def __post_init__(self):
        if not self.std > 0:
            raise DegenerateScalerError(f"charge scaler std must be positive, got {self.std}")


def fit_charge_scaler(charges) -> ChargeScaler:
    """Population standard deviation of raw partial charges."""
    values = np.asarray(list(charges), dtype=np.float64)
    if values.size < 2:
        raise DegenerateScalerError("need at least two charges to fit a scaler")
    std = float(values.std())
    if std == 0.0:
        raise DegenerateScalerError("all charges are equal; scaler std would be zero")
    return ChargeScaler(std)


def atom_type_index(element: str) -> int | None:
    if element in _TYPE_INDEX:
        return _TYPE_INDEX[element]
    if element in HALOGENS:
        return 7
    if element in METALS:
        return 8
    return None


def hybridization(atom: Atom, m: Molecule | None = None) -> int:
    _, _, suffix = atom.sybyl_type.partition(".")
    suffix = suffix.lower()
    if suffix.isdigit():
        return min(max(int(suffix), 1), 3)
    if suffix in _SP2_SUFFIXES:
        return 2
    return 3


def heavy_valence(atom: Atom, m: Molecule) -> int:
    return sum(1 for n in m.neighbors(atom.id) if not n.is_hydrogen)


def hetero_valence(atom: Atom, m: Molecule) -> int:
    return sum(1 for n in m.neighbors(atom.id) if n.element not in ("C", "H", "D"))


def is_hydrophobic(atom: Atom, m: Molecule) -> bool:
    return atom.element == "C" and all(n.element in ("C", "H", "D") for n in m.neighbors(atom.id))


def is_aromatic(atom: Atom, m: Molecule) -> bool:
    if atom.sybyl_type.lower().endswith(".ar"):
        return True
    return any(order == "ar" for _, order in m.adjacency[atom.id])


def is_acceptor(atom: Atom, m: Molecule) -> bool:
    if atom.element == "O":
        return True
    return atom.element == "N" and heavy_valence(atom, m) <= 2


def is_donor(atom: Atom, m: Molecule) -> bool:
    return atom.element in ("N", "O") and any(n.is_hydrogen for n in m.neighbors(atom.id))


def ring_atoms(m: Molecule) -> set[int]:
    """Atoms lying on at least one cycle, i.e. touching a non-bridge edge."""
    adj = {a.id: [j for j, _ in m.adjacency[a.id]] for a in m.atoms}
    disc: dict[int, int] = {}
    low: dict[int, int] = {}
    bridges: set[tuple[int, int]] = set()
    counter = 0
    for root in adj:
        if root in disc:
            continue
        disc[root] = low[root] = counter
        counter += 1
        # (node, parent, neighbor iterator); skip the parent edge once so
        # parallel edges would still count as a cycle
        stack = [(root, None, iter(adj[root]))]
        while stack:
            node, parent, it = stack[-1]
            advanced = False
            for nxt in it:
                if nxt == parent:
                    parent = None
                    stack[-1] = (node, parent, it)
                    continue
                if nxt in disc:
                    low[node] = min(low[node], disc[nxt])
                else:
                    disc[nxt] = low[nxt] = counter
                    counter += 1
                    stack.append((nxt, node, iter(adj[nxt])))
                    advanced = True
                    break
            if advanced:
                continue
            stack.pop()
            if stack:
                up = stack[-1][0]
                low[up] = min(low[up], low[node])
                if low[node] > disc[up]:
                    bridges.add((min(up, node), max(up, node)))

    on_cycle = set()
    for bond in m.bonds:
        if (min(bond.a, bond.b), max(bond.a, bond.b)) not in bridges:
            on_cycle.add(bond.a)
            on_cycle.add(bond.b)
    return on_cycle


def property_bits(atom: Atom, m: Molecule, rings: set[int] | None = None) -> tuple[int, int, int, int, int]:
    if rings is None:
        rings = ring_atoms(m)
    return (
        int(is_hydrophobic(atom, m)),
        int(is_aromatic(atom, m)),
        int(is_acceptor(atom, m)),
        int(is_donor(atom, m)),
        int(atom.id in rings),
    )


def featurize_molecule(m: Molecule, moltype: int, scaler: ChargeScaler) -> AtomCloud:
    atoms = heavy_atoms(m)
    rings = ring_atoms(m)
    coords = np.zeros((len(atoms), 3))
    feats = np.zeros((len(atoms), N_FEATURES))
    for i, atom in enumerate(atoms):
        coords[i] = atom.position
        t = atom_type_index(atom.element)
        if t is not None:
            feats[i, t] = 1.0
        feats[i, HYB] = hybridization(atom, m)
        feats[i, HEAVY_VALENCE] = heavy_valence(atom, m)
        feats[i, HETERO_VALENCE] = hetero_valence(atom, m)
        feats[i, HYDROPHOBIC:RING + 1] = property_bits(atom, m, rings)
        feats[i, PARTIALCHARGE] = atom.partial_charge / scaler.std
        feats[i, MOLTYPE] = moltype
    return AtomCloud(coords, feats)


def featurize_complex(protein: Molecule, ligand: Molecule, scaler: ChargeScaler) -> AtomCloud:
    """Ligand heavy atoms (moltype +1) followed by protein heavy atoms (moltype -1)."""
    return AtomCloud.concat([
        featurize_molecule(ligand, 1, scaler),
        featurize_molecule(protein, -1, scaler),
    ])
