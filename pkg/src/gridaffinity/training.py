"""Mini-batch scheduling, the epoch loop and batch prediction."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dataset import DatasetRecord
from .errors import ConfigMismatchError, MissingLabelError, ShapeError
from .features import N_FEATURES
from .metrics import rmse
from .nn.network import Network, adam_step, loss_and_gradients, predict as net_predict
from .voxel import CubeRotation, cube_rotations, ligand_centroid, rotate_atoms, voxelize

log = logging.getLogger(__name__)

# One grid per forward: BLAS rounding can depend on batch size, and identical
# grids must give bit-identical predictions wherever they are evaluated.
PREDICT_CHUNK = 1


def make_batches(n_records: int, batch_size: int = 5, rng: np.random.Generator | None = None):
    """Shuffle indices and cut them into batches.

    A trailing group smaller than ``batch_size`` is merged into the previous
    batch, so 11906 records in batches of 5 give 2380 batches of 5 and one
    of 6. With fewer records than ``batch_size`` there is a single batch.
    """
    if n_records < 1:
        raise ValueError("need at least one record")
    order = rng.permutation(n_records) if rng is not None else np.arange(n_records)
    n_full = n_records // batch_size
    if n_full == 0:
        return [order]
    batches = [order[i * batch_size:(i + 1) * batch_size] for i in range(n_full)]
    rest = order[n_full * batch_size:]
    if len(rest):
        batches[-1] = np.concatenate([batches[-1], rest])
    return batches


def _check_compatible(net: Network):
    shape = net.config.input_shape
    if shape[3] != N_FEATURES or not shape[0] == shape[1] == shape[2]:
        raise ShapeError(f"network input {shape} is not a cubic {N_FEATURES}-channel grid")


def grid_box_size(net: Network, resolution: float = 1.0) -> float:
    return (net.config.input_shape[0] - 1) * resolution


def record_grid(net: Network, rec: DatasetRecord, rotation: CubeRotation | None = None,
                center=None) -> np.ndarray:
    """Voxelize one record (optionally rotated about its ligand centroid) for ``net``."""
    if center is None:
        center = ligand_centroid(rec.atoms)
    atoms = rec.atoms if rotation is None else rotate_atoms(rec.atoms, center, rotation)
    return voxelize(atoms, center, box_size=grid_box_size(net),
                    dtype=net.config.np_dtype).data


def predict_grids(net: Network, grids: Sequence[np.ndarray]) -> np.ndarray:
    out = np.empty(len(grids))
    for start in range(0, len(grids), PREDICT_CHUNK):
        chunk = grids[start:start + PREDICT_CHUNK]
        out[start:start + len(chunk)] = net_predict(net, np.stack(chunk))
    return out


def predict(net: Network, records: Sequence[DatasetRecord],
            charge_std: float | None = None) -> list[tuple[str, float]]:
    """Original-orientation, inference-mode predictions in record order."""
    if charge_std is not None and net.charge_std is not None \
            and not math.isclose(charge_std, net.charge_std, rel_tol=1e-12):
        raise ConfigMismatchError(
            f"dataset charge std {charge_std!r} differs from checkpoint's {net.charge_std!r}")
    _check_compatible(net)
    records = list(records)
    if not records:
        return []
    preds = predict_grids(net, [record_grid(net, r) for r in records])
    return [(r.id, float(p)) for r, p in zip(records, preds)]


@dataclass
class EpochLog:
    epoch: int
    train_rmse: float
    val_rmse: float


@dataclass
class TrainResult:
    best: Network
    best_epoch: int
    log: list[EpochLog] = field(default_factory=list)
    steps: int = 0


def _labels(records):
    for r in records:
        if r.affinity is None or not math.isfinite(r.affinity):
            raise MissingLabelError(f"record {r.id} has no affinity")
    return np.array([r.affinity for r in records])


def _eval_rmse(net, records, centers):
    grids = [record_grid(net, r, center=c) for r, c in zip(records, centers)]
    return rmse(_labels(records), predict_grids(net, grids))


def train(net: Network, train_records: Sequence[DatasetRecord],
          val_records: Sequence[DatasetRecord], epochs: int = 20,
          rng: np.random.Generator | None = None, batch_size: int = 5,
          schedule: str = "expanded", rotations: Sequence[CubeRotation] | None = None,
          on_epoch: Callable[[EpochLog], None] | None = None) -> TrainResult:
    """Train ``net`` in place and return a copy of the epoch with the lowest validation RMSE.

    ``schedule="expanded"`` shuffles all (record, rotation) pairs of an epoch
    jointly and batches those; ``schedule="per-batch"`` batches records and
    feeds every rotation of each batch's records in one optimizer step.
    RMSE in the log is computed on original orientations only.
    """
    train_records = list(train_records)
    val_records = list(val_records)
    if not train_records or not val_records:
        raise ValueError("training and validation sets must be non-empty")
    if schedule not in ("expanded", "per-batch"):
        raise ValueError(f"unknown schedule {schedule!r}")
    if rng is None:
        rng = np.random.default_rng(0)
    _check_compatible(net)
    rots = list(rotations) if rotations is not None else cube_rotations()
    y_train = _labels(train_records)
    _labels(val_records)
    train_centers = [ligand_centroid(r.atoms) for r in train_records]
    val_centers = [ligand_centroid(r.atoms) for r in val_records]

    def grid_for(i, k):
        return record_grid(net, train_records[i], rots[k], train_centers[i])

    result = TrainResult(best=net.copy(), best_epoch=0)
    best_val = math.inf
    n_rot = len(rots)
    for epoch in range(1, epochs + 1):
        if schedule == "expanded":
            pairs = [(i, k) for i in range(len(train_records)) for k in range(n_rot)]
            batches = [[pairs[j] for j in b] for b in make_batches(len(pairs), batch_size, rng)]
        else:
            batches = [[(int(i), k) for i in b for k in range(n_rot)]
                       for b in make_batches(len(train_records), batch_size, rng)]
        for batch in batches:
            grids = np.stack([grid_for(i, k) for i, k in batch])
            _, grads = loss_and_gradients(net, grids, y_train[[i for i, _ in batch]], rng)
            adam_step(net, grads)
            result.steps += 1
        entry = EpochLog(epoch, _eval_rmse(net, train_records, train_centers),
                         _eval_rmse(net, val_records, val_centers))
        result.log.append(entry)
        log.info("epoch %d: train RMSE %.4f, validation RMSE %.4f",
                 epoch, entry.train_rmse, entry.val_rmse)
        if on_epoch is not None:
            on_epoch(entry)
        if entry.val_rmse < best_val:
            best_val = entry.val_rmse
            result.best = net.copy()
            result.best_epoch = epoch
    return result


def write_epoch_log(entries: Sequence[EpochLog], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "train_rmse", "val_rmse"])
        for e in entries:
            writer.writerow([e.epoch, repr(float(e.train_rmse)), repr(float(e.val_rmse))])
