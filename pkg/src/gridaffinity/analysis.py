"""Interpretability studies on a trained network, emitted as plain tables."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import DatasetRecord
from .features import FEATURE_NAMES
from .nn.network import Network, forward
from .training import grid_box_size, predict_grids, record_grid
from .voxel import (ROT_X180, CubeRotation, cube_rotations, ligand_centroid,
                    occlusion_variants, rotate_atoms, rotate_grid, voxelize)

DEFAULT_SECOND_ORIENTATION = CubeRotation(ROT_X180)


@dataclass(frozen=True)
class ChannelWeightRange:
    channel: str
    min: float
    q1: float
    median: float
    q3: float
    max: float


@dataclass(frozen=True)
class OcclusionResult:
    box_origin: tuple[float, float, float]
    prediction: float
    drop: float


@dataclass
class OcclusionScan:
    baseline: float
    results: list[OcclusionResult]

    def top(self, k: int = 10) -> list[OcclusionResult]:
        """The ``k`` variants with the largest drop (ties keep sweep order)."""
        order = sorted(range(len(self.results)), key=lambda i: -self.results[i].drop)
        return [self.results[i] for i in order[:k]]


@dataclass(frozen=True)
class LayerDistance:
    layer: str
    distance_aligned: float
    distance_raw: float


@dataclass(frozen=True)
class StabilityRow:
    id: str
    predictions: tuple[float, ...]
    mean: float
    std: float


def feature_importance(net: Network) -> list[ChannelWeightRange]:
    """Spread of first-conv-layer weights attached to each input channel."""
    w = net.params["conv1.w"].astype(np.float64)
    out = []
    for c, name in enumerate(FEATURE_NAMES[: w.shape[3]]):
        vals = w[:, :, :, c, :].ravel()
        q = np.percentile(vals, [0, 25, 50, 75, 100])
        out.append(ChannelWeightRange(name, *(float(v) for v in q)))
    return out


def occlusion_scan(net: Network, record: DatasetRecord,
                   rotation: CubeRotation | None = None) -> OcclusionScan:
    """Predict the complex with each 5 A deletion box removed.

    ``drop`` is baseline minus corrupted prediction (signed).
    """
    center = ligand_centroid(record.atoms)
    atoms = record.atoms if rotation is None else rotate_atoms(record.atoms, center, rotation)
    box = grid_box_size(net)
    dtype = net.config.np_dtype
    baseline_grid = voxelize(atoms, center, box_size=box, dtype=dtype).data
    baseline = float(predict_grids(net, [baseline_grid])[0])
    variants = occlusion_variants(atoms, center, box_size=box)
    grids = [voxelize(a, center, box_size=box, dtype=dtype).data for _, a in variants]
    preds = predict_grids(net, grids)
    results = [OcclusionResult(tuple(float(v) for v in origin), float(p), baseline - float(p))
               for (origin, _), p in zip(variants, preds)]
    return OcclusionScan(baseline, results)


def cosine_distance(a, b) -> float:
    """1 - cos(a, b); NaN when either vector has zero norm."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return float("nan")
    return float(np.clip(1.0 - (a @ b) / (na * nb), 0.0, 2.0))


def hidden_layers(net: Network) -> list[str]:
    return [f"conv{i}" for i in range(1, net.n_conv + 1)] + \
           [f"fc{i}" for i in range(1, net.n_dense + 1)]


def activation_comparison(net: Network, record: DatasetRecord,
                          rot_a: CubeRotation | None = None,
                          rot_b: CubeRotation | None = None) -> list[LayerDistance]:
    """Per-layer cosine distance between activations for two orientations.

    Conv activations of the second orientation are rotated back into the
    first orientation's frame before the aligned distance is taken.
    """
    identity = cube_rotations()[0]
    rot_a = rot_a or identity
    rot_b = rot_b or DEFAULT_SECOND_ORIENTATION
    center = ligand_centroid(record.atoms)
    traces = []
    for rot in (rot_a, rot_b):
        grid = record_grid(net, record, rot, center)
        _, cache = forward(net, grid, training=False, trace=True)
        traces.append(cache["trace"])
    back = rot_a @ rot_b.inverse()
    out = []
    for layer in hidden_layers(net):
        a, b = traces[0][layer][0], traces[1][layer][0]
        raw = cosine_distance(a, b)
        aligned = cosine_distance(a, rotate_grid(b, back)) if layer.startswith("conv") else raw
        out.append(LayerDistance(layer, aligned, raw))
    return out


def rotation_stability(net: Network, records: Sequence[DatasetRecord]) -> list[StabilityRow]:
    """Predictions for all 24 cube rotations of each record (identity first)."""
    rots = cube_rotations()
    rows = []
    for rec in records:
        center = ligand_centroid(rec.atoms)
        preds = predict_grids(net, [record_grid(net, rec, r, center) for r in rots])
        rows.append(StabilityRow(rec.id, tuple(float(p) for p in preds),
                                 float(preds.mean()), float(preds.std())))
    return rows


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def _fmt(x: float) -> str:
    return repr(float(x))


def write_importance_csv(rows: Sequence[ChannelWeightRange], path) -> None:
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["channel", "min", "q1", "median", "q3", "max"])
        for r in rows:
            w.writerow([r.channel, _fmt(r.min), _fmt(r.q1), _fmt(r.median), _fmt(r.q3), _fmt(r.max)])


def write_occlusion_csv(scan: OcclusionScan, path) -> None:
    """Baseline row (empty coordinates, drop 0) followed by one row per variant."""
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["x", "y", "z", "prediction", "drop"])
        w.writerow(["", "", "", _fmt(scan.baseline), _fmt(0.0)])
        for r in scan.results:
            w.writerow([*(_fmt(v) for v in r.box_origin), _fmt(r.prediction), _fmt(r.drop)])


def write_activation_csv(rows: Sequence[LayerDistance], path) -> None:
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["layer", "distance_aligned", "distance_raw"])
        for r in rows:
            w.writerow([r.layer, _fmt(r.distance_aligned), _fmt(r.distance_raw)])


def write_stability_csv(rows: Sequence[StabilityRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["id", *(f"rot{i}" for i in range(24)), "mean", "std"])
        for r in rows:
            w.writerow([r.id, *(_fmt(p) for p in r.predictions), _fmt(r.mean), _fmt(r.std)])
