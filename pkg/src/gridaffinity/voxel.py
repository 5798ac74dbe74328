"""Cropping, discretization and cube-rotation augmentation of atom clouds."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .errors import EmptyLigandError, ShapeError
from .features import N_FEATURES, AtomCloud

BOX_SIZE = 20.0
RESOLUTION = 1.0
OCCLUSION_BOX = 5.0
OCCLUSION_STEP = 3.0


@dataclass
class Grid:
    data: np.ndarray
    label: Optional[float] = None
    id: str = ""

    def __post_init__(self):
        if self.data.ndim != 4:
            raise ShapeError(f"grid must be rank 4, got shape {self.data.shape}")


@dataclass(frozen=True)
class CubeRotation:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.int64)
        if m.shape != (3, 3) or not np.array_equal(m.T @ m, np.eye(3, dtype=np.int64)) \
                or round(np.linalg.det(m)) != 1:
            raise ValueError(f"not a proper cube rotation:\n{m}")
        object.__setattr__(self, "matrix", m)

    def __eq__(self, other):
        return isinstance(other, CubeRotation) and np.array_equal(self.matrix, other.matrix)

    def __hash__(self):
        return hash(self.matrix.tobytes())

    def __matmul__(self, other: "CubeRotation") -> "CubeRotation":
        return CubeRotation(self.matrix @ other.matrix)

    def inverse(self) -> "CubeRotation":
        return CubeRotation(self.matrix.T)


def _axis_quarter_turn(axis: int) -> np.ndarray:
    m = np.zeros((3, 3), dtype=np.int64)
    i, j = [k for k in range(3) if k != axis]
    m[axis, axis] = 1
    m[i, j] = -1
    m[j, i] = 1
    return m


ROT_X90 = _axis_quarter_turn(0)
ROT_Y90 = _axis_quarter_turn(1)
ROT_Z90 = _axis_quarter_turn(2)
ROT_X180 = ROT_X90 @ ROT_X90


def cube_rotations() -> list[CubeRotation]:
    """The 24 proper rotations of the cube, identity first.

    Built by closing {I} under left-multiplication with quarter turns about
    x, y and z (breadth-first), so the order is deterministic.
    """
    gens = (ROT_X90, ROT_Y90, ROT_Z90)
    found = [np.eye(3, dtype=np.int64)]
    seen = {found[0].tobytes()}
    frontier = list(found)
    while frontier:
        nxt = []
        for m in frontier:
            for g in gens:
                prod = g @ m
                key = prod.tobytes()
                if key not in seen:
                    seen.add(key)
                    found.append(prod)
                    nxt.append(prod)
        frontier = nxt
    return [CubeRotation(m) for m in found]


def rotation_index(r: CubeRotation) -> int:
    return cube_rotations().index(r)


def round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def ligand_centroid(atoms: AtomCloud) -> np.ndarray:
    mask = atoms.ligand_mask
    if not mask.any():
        raise EmptyLigandError("no ligand atoms (moltype +1) to center the box on")
    return atoms.coords[mask].mean(axis=0)


def grid_points(box_size: float = BOX_SIZE, resolution: float = RESOLUTION) -> int:
    return int(round(box_size / resolution)) + 1


def grid_offsets(atoms: AtomCloud, center, resolution: float = RESOLUTION) -> np.ndarray:
    """Rounded integer offsets of each atom from ``center`` in grid units."""
    rel = (atoms.coords - np.asarray(center, dtype=np.float64)) / resolution
    return round_half_away(rel).astype(np.int64)


def voxelize(atoms: AtomCloud, center, box_size: float = BOX_SIZE,
             resolution: float = RESOLUTION, dtype=np.float64) -> Grid:
    """Deposit atom features on an (n, n, n, 19) grid centered on ``center``.

    Colliding atoms have their features summed; atoms outside the box are
    dropped.
    """
    center = np.asarray(center, dtype=np.float64)
    if not np.all(np.isfinite(center)):
        raise ValueError("box center must be finite")
    n = grid_points(box_size, resolution)
    half = (n - 1) // 2
    idx = grid_offsets(atoms, center, resolution) + half
    inside = np.all((idx >= 0) & (idx < n), axis=1)
    data = np.zeros((n, n, n, N_FEATURES), dtype=dtype)
    if inside.any():
        kernels.scatter_add(data, np.ascontiguousarray(idx[inside]),
                            np.ascontiguousarray(atoms.features[inside], dtype=dtype))
    return Grid(data)


def crop_count(atoms: AtomCloud, center, box_size: float = BOX_SIZE,
               resolution: float = RESOLUTION) -> int:
    """Number of atoms that fall inside the box."""
    n = grid_points(box_size, resolution)
    idx = grid_offsets(atoms, center, resolution) + (n - 1) // 2
    return int(np.all((idx >= 0) & (idx < n), axis=1).sum())


def rotate_atoms(atoms: AtomCloud, center, r: CubeRotation) -> AtomCloud:
    center = np.asarray(center, dtype=np.float64)
    coords = (atoms.coords - center) @ r.matrix.T.astype(np.float64) + center
    return AtomCloud(coords, atoms.features.copy())


def rotate_grid(data: np.ndarray, r: CubeRotation) -> np.ndarray:
    """Permute the spatial axes of a cubic (n, n, n, ...) array by ``r``.

    Cell i moves to r @ (i - c) + c with c the cube center, so for odd n the
    central cell is fixed. Works for any n, which is needed to align pooled
    activations.
    """
    n = data.shape[0]
    if data.shape[1] != n or data.shape[2] != n:
        raise ShapeError(f"rotate_grid needs a cubic array, got {data.shape}")
    # twice the center keeps arithmetic integral for even n
    ii = np.indices((n, n, n)).reshape(3, -1)
    rel2 = 2 * ii - (n - 1)
    dst = (r.matrix @ rel2 + (n - 1)) // 2
    out = np.empty_like(data)
    out[dst[0], dst[1], dst[2]] = data[ii[0], ii[1], ii[2]]
    return out


def occlusion_origins(box_size: float = BOX_SIZE, step: float = OCCLUSION_STEP,
                      occl_box: float = OCCLUSION_BOX) -> np.ndarray:
    """Low corners (offsets from center) of the sliding deletion box, shape (k^3, 3)."""
    lo = -box_size / 2
    count = int(np.floor((box_size - occl_box + step) / step)) + 1
    starts = lo + step * np.arange(count)
    return np.array(list(itertools.product(starts, starts, starts)), dtype=np.float64)


def occlusion_variants(atoms: AtomCloud, center, box_size: float = BOX_SIZE,
                       resolution: float = RESOLUTION, step: float = OCCLUSION_STEP,
                       occl_box: float = OCCLUSION_BOX):
    """Yield ``(box_origin, corrupted_atoms)`` for every deletion-box position.

    Membership uses each atom's rounded grid offset, so the boxes tile every
    grid cell. With the default 20 A box the sweep has 7^3 = 343 positions.
    """
    offsets = grid_offsets(atoms, center, resolution) * resolution
    out = []
    for origin in occlusion_origins(box_size, step, occl_box):
        inside = np.all((offsets >= origin) & (offsets < origin + occl_box), axis=1)
        out.append((origin, atoms.subset(~inside)))
    return out
