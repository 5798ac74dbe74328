import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gridaffinity.errors import EmptyLigandError
from gridaffinity.features import N_FEATURES, AtomCloud
from gridaffinity.voxel import (ROT_X180, ROT_Z90, CubeRotation, cube_rotations, grid_offsets,
                                ligand_centroid, occlusion_origins, occlusion_variants,
                                rotate_atoms, rotate_grid, round_half_away, voxelize)

from conftest import random_cloud


def cloud(coords, moltype=1, feats=None):
    coords = np.asarray(coords, dtype=float).reshape(-1, 3)
    if feats is None:
        feats = np.zeros((len(coords), N_FEATURES))
        feats[:, 1] = 1
    feats = np.array(feats, dtype=float)
    feats[:, 18] = moltype
    return AtomCloud(coords, feats)


def test_centroid():
    np.testing.assert_array_equal(ligand_centroid(cloud([[1, 2, 3]])), [1, 2, 3])
    np.testing.assert_array_equal(ligand_centroid(cloud([[0, 0, 0], [2, 0, 0]])), [1, 0, 0])
    with pytest.raises(EmptyLigandError):
        ligand_centroid(cloud([[0, 0, 0]], moltype=-1))


def test_centroid_ignores_protein():
    atoms = AtomCloud.concat([cloud([[2, 2, 2]]), cloud([[100, 0, 0]], moltype=-1)])
    np.testing.assert_array_equal(ligand_centroid(atoms), [2, 2, 2])


def test_round_half_away():
    np.testing.assert_array_equal(round_half_away(np.array([0.5, -0.5, 1.5, -2.5, 0.49, -0.51])),
                                  [1, -1, 2, -3, 0, -1])


def test_atom_at_center_lands_in_middle_cell():
    c = np.array([3.3, -1.2, 7.0])
    grid = voxelize(cloud([c]), c)
    assert grid.data.shape == (21, 21, 21, 19)
    nz = np.argwhere(grid.data[..., 1])
    assert nz.tolist() == [[10, 10, 10]]


def test_atom_beyond_edge_cropped():
    grid = voxelize(cloud([[10.6, 0, 0]]), np.zeros(3))
    assert not grid.data.any()
    grid = voxelize(cloud([[10.4, 0, 0]]), np.zeros(3))
    assert grid.data[20, 10, 10, 1] == 1


def test_collisions_add():
    feats = np.zeros((2, N_FEATURES))
    feats[0, 1] = 1
    feats[1, 2] = 1
    feats[:, 17] = [0.25, 0.5]
    grid = voxelize(cloud([[0.2, 0, 0], [-0.3, 0, 0]], feats=feats), np.zeros(3))
    cell = grid.data[10, 10, 10]
    assert cell[1] == 1 and cell[2] == 1 and cell[17] == 0.75 and cell[18] == 2
    assert np.count_nonzero(grid.data.any(axis=-1)) == 1


def test_mass_conservation(rng):
    for _ in range(20):
        atoms = random_cloud(rng, n_prot=80, spread=14)
        c = ligand_centroid(atoms)
        grid = voxelize(atoms, c)
        inside = np.all(np.abs(grid_offsets(atoms, c)) <= 10, axis=1)
        np.testing.assert_allclose(grid.data.sum(axis=(0, 1, 2)),
                                   atoms.features[inside].sum(axis=0), atol=1e-9)


def test_permutation_invariance(rng):
    atoms = random_cloud(rng, n_prot=60)
    c = ligand_centroid(atoms)
    perm = rng.permutation(len(atoms))
    a = voxelize(atoms, c).data
    b = voxelize(atoms.subset(perm), c).data
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_cube_rotation_group():
    rots = cube_rotations()
    assert len(rots) == 24
    assert len({r.matrix.tobytes() for r in rots}) == 24
    assert np.array_equal(rots[0].matrix, np.eye(3))
    keys = {r.matrix.tobytes() for r in rots}
    for a, b in itertools.product(rots, rots):
        assert (a @ b).matrix.tobytes() in keys
    for r in rots:
        assert np.array_equal(r.matrix.T @ r.matrix, np.eye(3))
        assert round(np.linalg.det(r.matrix)) == 1
        assert set(np.unique(r.matrix)) <= {-1, 0, 1}
        assert r.inverse().matrix.tobytes() in keys


def test_cube_rotation_rejects_reflection():
    with pytest.raises(ValueError):
        CubeRotation(np.diag([-1, 1, 1]))


def test_rotate_atoms():
    c = np.array([1.0, 2.0, 3.0])
    atoms = cloud([c + [1, 0, 0]])
    ident = cube_rotations()[0]
    np.testing.assert_array_equal(rotate_atoms(atoms, c, ident).coords, atoms.coords)
    out = rotate_atoms(atoms, c, CubeRotation(ROT_Z90))
    np.testing.assert_allclose(out.coords[0] - c, [0, 1, 0], atol=1e-15)


def test_rotate_then_inverse(rng):
    atoms = random_cloud(rng)
    c = ligand_centroid(atoms)
    for r in cube_rotations():
        back = rotate_atoms(rotate_atoms(atoms, c, r), c, r.inverse())
        np.testing.assert_allclose(back.coords, atoms.coords, atol=1e-12)
        np.testing.assert_array_equal(back.features, atoms.features)


@pytest.mark.parametrize("n", [1, 2, 5, 6, 11, 21])
def test_rotate_grid_is_group_action(n, rng):
    data = rng.normal(size=(n, n, n, 2))
    rots = cube_rotations()
    for a, b in [(rots[3], rots[7]), (rots[11], rots[23]), (rots[5], rots[5].inverse())]:
        np.testing.assert_array_equal(rotate_grid(rotate_grid(data, b), a), rotate_grid(data, a @ b))


def test_voxelize_equivariance(rng):
    for _ in range(10):
        atoms = random_cloud(rng)
        c = ligand_centroid(atoms)
        base = voxelize(atoms, c).data
        for r in cube_rotations():
            np.testing.assert_array_equal(voxelize(rotate_atoms(atoms, c, r), c).data,
                                          rotate_grid(base, r))


def test_occlusion_origins():
    o = occlusion_origins()
    assert o.shape == (343, 3)
    assert sorted(set(o[:, 0])) == [-10, -7, -4, -1, 2, 5, 8]


def test_occlusion_variants(rng):
    atoms = random_cloud(rng, n_prot=120, spread=12)
    c = ligand_centroid(atoms)
    variants = occlusion_variants(atoms, c)
    assert len(variants) == 343
    inbox = np.all(np.abs(grid_offsets(atoms, c)) <= 10, axis=1)
    removed = np.zeros(len(atoms), dtype=bool)
    for origin, corrupted in variants:
        kept = {tuple(x) for x in corrupted.coords}
        removed |= np.array([tuple(x) not in kept for x in atoms.coords])
    assert removed[inbox].all()


def test_occlusion_empty_box_leaves_atoms():
    atoms = cloud([[0.0, 0.0, 0.0]])
    variants = occlusion_variants(atoms, np.zeros(3))
    untouched = [a for _, a in variants if len(a) == 1]
    assert len(untouched) == 343 - 8  # the cell (0,0,0) lies in 2 boxes per axis
    for a in untouched:
        np.testing.assert_array_equal(a.coords, atoms.coords)


def test_occlusion_coverage_per_axis():
    # interval arithmetic: integer offsets -10..10 covered by [lo, lo + 5)
    covered = set()
    for lo in (-10, -7, -4, -1, 2, 5, 8):
        covered |= set(range(lo, lo + 5))
    assert set(range(-10, 11)) <= covered


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(*[st.floats(-12, 12, allow_nan=False)] * 3), min_size=1, max_size=30),
       st.integers(0, 23))
def test_equivariance_property(points, k):
    atoms = cloud(points)
    c = ligand_centroid(atoms)
    r = cube_rotations()[k]
    np.testing.assert_array_equal(voxelize(rotate_atoms(atoms, c, r), c).data,
                                  rotate_grid(voxelize(atoms, c).data, r))
