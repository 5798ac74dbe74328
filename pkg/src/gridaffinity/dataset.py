"""Featurized-complex dataset container ("PFDS") and split manifests.

PFDS layout, little-endian::

    4s   magic b"PFDS"
    u32  version (1)
    f64  charge-scaler std
    u32  record count, then per record:
         u16 id length + UTF-8 id
         u8  1 if labeled else 0
         f64 affinity (NaN when unlabeled)
         u32 atom count
         atom count x 22 f64: x, y, z followed by the 19 features
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from .binio import Reader, pack, pack_array, pack_string
from .errors import ContainerFormatError, ManifestError
from .features import N_FEATURES, AtomCloud

MAGIC = b"PFDS"
VERSION = 1
_ROW = 3 + N_FEATURES


@dataclass
class DatasetRecord:
    id: str
    atoms: AtomCloud
    affinity: Optional[float] = None

    @property
    def labeled(self) -> bool:
        return self.affinity is not None

    def __eq__(self, other):
        if not isinstance(other, DatasetRecord):
            return NotImplemented
        same_label = (self.affinity == other.affinity) or (
            self.affinity is not None and other.affinity is not None
            and math.isnan(self.affinity) and math.isnan(other.affinity))
        return (self.id == other.id and same_label
                and np.array_equal(self.atoms.coords, other.atoms.coords)
                and np.array_equal(self.atoms.features, other.atoms.features))


@dataclass
class Dataset:
    records: list[DatasetRecord]
    charge_std: float

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[DatasetRecord]:
        return iter(self.records)

    @property
    def labeled(self) -> bool:
        return bool(self.records) and all(r.labeled for r in self.records)

    def by_id(self) -> dict[str, DatasetRecord]:
        return {r.id: r for r in self.records}

    def select(self, ids) -> list[DatasetRecord]:
        table = self.by_id()
        missing = [i for i in ids if i not in table]
        if missing:
            raise ManifestError(f"ids not in dataset: {', '.join(missing)}")
        return [table[i] for i in ids]


def dumps_dataset(records, charge_std: float) -> bytes:
    records = list(records)
    parts = [MAGIC, pack("I", VERSION), pack("d", float(charge_std)), pack("I", len(records))]
    for rec in records:
        parts.append(pack_string(rec.id))
        labeled = rec.affinity is not None
        parts.append(pack("Bd", int(labeled), float(rec.affinity) if labeled else math.nan))
        parts.append(pack("I", len(rec.atoms)))
        parts.append(pack_array(np.hstack([rec.atoms.coords, rec.atoms.features]), "f8"))
    return b"".join(parts)


def loads_dataset(data: bytes) -> Dataset:
    r = Reader(data, "dataset")
    magic = bytes(r.take(4))
    if magic != MAGIC:
        raise ContainerFormatError(f"not a dataset: magic {magic!r}, expected {MAGIC!r}")
    version = r.unpack("I")
    if version != VERSION:
        raise ContainerFormatError(f"unsupported dataset version {version}")
    std = r.unpack("d")
    records = []
    for _ in range(r.unpack("I")):
        rid = r.string()
        labeled, affinity = r.unpack("Bd")
        n = r.unpack("I")
        rows = r.array((n, _ROW), "f8")
        records.append(DatasetRecord(rid, AtomCloud(rows[:, :3], rows[:, 3:]),
                                     affinity if labeled else None))
    if not r.at_end():
        raise ContainerFormatError("trailing bytes after dataset payload")
    return Dataset(records, std)


def write_dataset(records, path, charge_std: float) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(dumps_dataset(records, charge_std))
    os.replace(tmp, path)


def read_dataset(path) -> Dataset:
    with open(path, "rb") as fh:
        return loads_dataset(fh.read())


def read_manifest(path) -> list[str]:
    """One id per line; blank lines and ``#`` comments are ignored."""
    ids = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            ids.append(line)
    return ids


@dataclass
class SplitManifest:
    train: list[str]
    validation: list[str]
    test: dict[str, list[str]] = field(default_factory=dict)

    def __post_init__(self):
        named = {"train": self.train, "validation": self.validation,
                 **{f"test:{k}": v for k, v in self.test.items()}}
        seen: dict[str, str] = {}
        for subset, ids in named.items():
            for i in ids:
                if i in seen and seen[i] != subset:
                    raise ManifestError(f"id {i} appears in both {seen[i]} and {subset}")
                seen[i] = subset

    @classmethod
    def from_files(cls, train, validation, tests: dict | None = None) -> "SplitManifest":
        return cls(read_manifest(train), read_manifest(validation),
                   {k: read_manifest(v) for k, v in (tests or {}).items()})
