"""Labeled feature-vector datasets: validation, on-disk formats, task splits.

Binary feature file layout (all little-endian, no padding)::

    "HCF1"  magic, 4 bytes
    u32     format version (1)
    u32     feature dimension d
    u64     record count
    records: [u64 fish_id][u64 frame_id][u16 group_id][u16 species_id][d x f32]

The CSV twin has header ``fish_id,frame_id,group_id,species_id,f0..f{d-1}``
with features printed at 9 significant digits (exact for float32).

Datasets are immutable column stores; any number of readers may share one.
"""

from __future__ import annotations

import csv
import struct
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    CorruptionError,
    DuplicateClassError,
    FormatError,
    ParseError,
    TaxonomyError,
    ValidationError,
)
from .taxonomy import Taxonomy

MAGIC = b"HCF1"
FORMAT_VERSION = 1
_HEADER_STRUCT = struct.Struct("<4sIIQ")


@dataclass(frozen=True)
class FeatureRecord:
    """One frame of one fish track, with both taxonomy labels."""

    fish_id: int
    frame_id: int
    group_id: int
    species_id: int
    feature: np.ndarray  # float32, shape (d,)

    @property
    def key(self) -> tuple[int, int]:
        """Physical identity of the frame; used for memory deduplication."""
        return (self.fish_id, self.frame_id)


@dataclass(frozen=True)
class Dataset:
    """Immutable column store of FeatureRecords sharing one taxonomy."""

    dim: int
    fish_id: np.ndarray  # uint64 (n,)
    frame_id: np.ndarray  # uint64 (n,)
    group_id: np.ndarray  # uint16 (n,)
    species_id: np.ndarray  # uint16 (n,)
    features: np.ndarray  # float32 (n, d)
    taxonomy: Taxonomy

    def __len__(self) -> int:
        return self.features.shape[0]

    def record(self, i: int) -> FeatureRecord:
        return FeatureRecord(
            fish_id=int(self.fish_id[i]),
            frame_id=int(self.frame_id[i]),
            group_id=int(self.group_id[i]),
            species_id=int(self.species_id[i]),
            feature=self.features[i].copy(),
        )

    def records(self):
        for i in range(len(self)):
            yield self.record(i)

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices)
        if idx.size == 0:
            idx = np.zeros(0, dtype=np.int64)
        return Dataset(
            dim=self.dim,
            fish_id=self.fish_id[idx],
            frame_id=self.frame_id[idx],
            group_id=self.group_id[idx],
            species_id=self.species_id[idx],
            features=self.features[idx],
            taxonomy=self.taxonomy,
        )

    def species_set(self) -> set[int]:
        return set(int(s) for s in np.unique(self.species_id)) if len(self) else set()

    def group_set(self) -> set[int]:
        return set(int(g) for g in np.unique(self.group_id)) if len(self) else set()

    def validate(self, allow_empty: bool = False) -> "Dataset":
        n = len(self)
        if n == 0:
            if allow_empty:
                return self
            raise ValidationError("dataset is empty")
        if self.features.shape != (n, self.dim):
            raise ValidationError("feature matrix shape disagrees with header dimension")
        if not np.all(np.isfinite(self.features)):
            raise ValidationError("non-finite feature component")
        tax = self.taxonomy
        if int(self.species_id.max(initial=0)) >= tax.num_species:
            bad = int(self.species_id.max())
            raise TaxonomyError(f"species id {bad} not in taxonomy")
        parents = np.asarray(tax.species_group, dtype=np.int64)
        expect = parents[self.species_id.astype(np.int64)]
        if not np.array_equal(expect, self.group_id.astype(np.int64)):
            i = int(np.nonzero(expect != self.group_id.astype(np.int64))[0][0])
            raise TaxonomyError(
                f"record {i}: group_id {int(self.group_id[i])} does not match "
                f"taxonomy parent {int(expect[i])} of species {int(self.species_id[i])}"
            )
        return self

    @classmethod
    def from_records(cls, records, dim: int, taxonomy: Taxonomy) -> "Dataset":
        records = list(records)
        feats = np.zeros((len(records), dim), dtype=np.float32)
        fish = np.zeros(len(records), dtype=np.uint64)
        frame = np.zeros(len(records), dtype=np.uint64)
        group = np.zeros(len(records), dtype=np.uint16)
        species = np.zeros(len(records), dtype=np.uint16)
        for i, r in enumerate(records):
            f = np.asarray(r.feature, dtype=np.float32)
            if f.shape != (dim,):
                raise ValidationError(
                    f"record {i}: feature dimension {f.shape} != ({dim},)"
                )
            feats[i] = f
            fish[i] = r.fish_id
            frame[i] = r.frame_id
            group[i] = r.group_id
            species[i] = r.species_id
        return cls(dim, fish, frame, group, species, feats, taxonomy)


def concat(datasets) -> Dataset:
    """Concatenate datasets sharing a taxonomy and dimension, in order."""
    ds = [d for d in datasets]
    if not ds:
        raise ValidationError("nothing to concatenate")
    first = ds[0]
    for d in ds[1:]:
        if d.dim != first.dim:
            raise ValidationError("dimension mismatch in concatenation")
        if d.taxonomy != first.taxonomy:
            raise ValidationError("taxonomy mismatch in concatenation")
    return Dataset(
        dim=first.dim,
        fish_id=np.concatenate([d.fish_id for d in ds]),
        frame_id=np.concatenate([d.frame_id for d in ds]),
        group_id=np.concatenate([d.group_id for d in ds]),
        species_id=np.concatenate([d.species_id for d in ds]),
        features=np.concatenate([d.features for d in ds], axis=0),
        taxonomy=first.taxonomy,
    )


def _record_dtype(dim: int) -> np.dtype:
    return np.dtype(
        [
            ("fish_id", "<u8"),
            ("frame_id", "<u8"),
            ("group_id", "<u2"),
            ("species_id", "<u2"),
            ("feature", "<f4", (dim,)),
        ]
    )


def save_binary(ds: Dataset, path) -> None:
    ds.validate()
    if ds.taxonomy.num_species > 0xFFFF or ds.taxonomy.num_groups > 0xFFFF:
        raise ValidationError("label ids exceed the u16 wire range")
    packed = np.zeros(len(ds), dtype=_record_dtype(ds.dim))
    packed["fish_id"] = ds.fish_id
    packed["frame_id"] = ds.frame_id
    packed["group_id"] = ds.group_id
    packed["species_id"] = ds.species_id
    packed["feature"] = ds.features
    with open(path, "wb") as fh:
        fh.write(_HEADER_STRUCT.pack(MAGIC, FORMAT_VERSION, ds.dim, len(ds)))
        fh.write(packed.tobytes())


def load_binary(path, taxonomy: Taxonomy) -> Dataset:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER_STRUCT.size or raw[:4] != MAGIC:
        raise FormatError(f"{path}: missing {MAGIC.decode()} header")
    magic, version, dim, count = _HEADER_STRUCT.unpack_from(raw, 0)
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    if dim == 0:
        raise FormatError(f"{path}: zero feature dimension")
    body = raw[_HEADER_STRUCT.size :]
    dtype = _record_dtype(dim)
    if len(body) != count * dtype.itemsize:
        raise CorruptionError(
            f"{path}: body holds {len(body)} bytes, header implies "
            f"{count * dtype.itemsize} ({count} records of {dtype.itemsize} bytes)"
        )
    packed = np.frombuffer(body, dtype=dtype)
    ds = Dataset(
        dim=int(dim),
        fish_id=packed["fish_id"].copy(),
        frame_id=packed["frame_id"].copy(),
        group_id=packed["group_id"].copy(),
        species_id=packed["species_id"].copy(),
        features=packed["feature"].reshape(count, dim).copy(),
        taxonomy=taxonomy,
    )
    return ds.validate()


_CSV_LABELS = ["fish_id", "frame_id", "group_id", "species_id"]


def save_csv(ds: Dataset, path) -> None:
    ds.validate()
    header = _CSV_LABELS + [f"f{j}" for j in range(ds.dim)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in range(len(ds)):
            row = [
                int(ds.fish_id[i]),
                int(ds.frame_id[i]),
                int(ds.group_id[i]),
                int(ds.species_id[i]),
            ]
            # %.9g is exact for float32 round-trips
            row += [f"{float(v):.9g}" for v in ds.features[i]]
            writer.writerow(row)


def load_csv(path, taxonomy: Taxonomy) -> Dataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty CSV") from None
        expected = _CSV_LABELS + [f"f{j}" for j in range(len(header) - 4)]
        if len(header) < 5 or header != expected:
            missing = [c for c in _CSV_LABELS if c not in header]
            if missing:
                raise FormatError(f"{path}: missing column(s) {missing}")
            raise FormatError(f"{path}: header must be fish_id,frame_id,group_id,species_id,f0..")
        dim = len(header) - 4
        fish, frame, group, species, feats = [], [], [], [], []
        for rownum, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise FormatError(f"{path}: row {rownum} has {len(row)} cells, expected {len(header)}")
            try:
                fish.append(int(row[0]))
                frame.append(int(row[1]))
                group.append(int(row[2]))
                species.append(int(row[3]))
            except ValueError as exc:
                raise ParseError(f"{path}: row {rownum}: bad label cell ({exc})") from None
            try:
                feats.append([float(v) for v in row[4:]])
            except ValueError:
                raise ParseError(f"{path}: row {rownum}: non-numeric feature cell") from None
        sid = np.asarray(species, dtype=np.int64)
        if len(sid) and sid.max() >= taxonomy.num_species:
            bad = int(np.nonzero(sid >= taxonomy.num_species)[0][0])
            raise TaxonomyError(
                f"{path}: row {bad + 2}: species id {int(sid[bad])} not in taxonomy"
            )
        ds = Dataset(
            dim=dim,
            fish_id=np.asarray(fish, dtype=np.uint64),
            frame_id=np.asarray(frame, dtype=np.uint64),
            group_id=np.asarray(group, dtype=np.uint16),
            species_id=np.asarray(species, dtype=np.uint16),
            features=np.asarray(feats, dtype=np.float32).reshape(len(fish), dim),
            taxonomy=taxonomy,
        )
        return ds.validate()


@dataclass(frozen=True)
class TaskStream:
    """Ordered, class-disjoint training tasks over one taxonomy.

    Member datasets may be empty (a vacuous task is legal mid-stream); the
    species sets of distinct tasks never overlap.
    """

    tasks: tuple[Dataset, ...]
    taxonomy: Taxonomy

    def __post_init__(self):
        seen: set[int] = set()
        for t, ds in enumerate(self.tasks):
            sp = ds.species_set()
            if sp & seen:
                raise DuplicateClassError(
                    f"task {t + 1} repeats species {sorted(sp & seen)} from an earlier task"
                )
            seen |= sp
            if ds.taxonomy != self.taxonomy:
                raise ValidationError(f"task {t + 1} uses a different taxonomy")

    def __len__(self) -> int:
        return len(self.tasks)

    def __iter__(self):
        return iter(self.tasks)

    def species_of_task(self, t: int) -> set[int]:
        return self.tasks[t].species_set()


def partition_tasks(ds: Dataset, num_tasks: int, seed: int) -> TaskStream:
    """Split a dataset into class-disjoint tasks, species-evenly per group.

    Within each group the species are shuffled (seeded) and dealt round-robin
    to tasks, so task sizes per group differ by at most one species. A group
    with fewer species than tasks keeps all of them in the first task. All
    frames of a species travel together.
    """
    if num_tasks < 1:
        raise ValidationError("num_tasks must be >= 1")
    ds.validate()
    rng = np.random.default_rng(seed)
    tax = ds.taxonomy
    assignment: dict[int, int] = {}  # species -> task index
    any_split = False
    for g in range(tax.num_groups):
        members = [s for s in tax.species_of(g) if s in ds.species_set()]
        if not members:
            continue
        if len(members) < num_tasks:
            for s in members:
                assignment[s] = 0
            continue
        any_split = True
        order = [members[i] for i in rng.permutation(len(members))]
        for i, s in enumerate(order):
            assignment[s] = i % num_tasks
    if num_tasks > 1 and not any_split:
        warnings.warn(
            "every group has fewer species than num_tasks; "
            "the stream degenerates to a single effective task",
            stacklevel=2,
        )
    task_of_species = np.full(tax.num_species, -1, dtype=np.int64)
    for s, t in assignment.items():
        task_of_species[s] = t
    owner = task_of_species[ds.species_id.astype(np.int64)]
    tasks = tuple(
        ds.subset(np.nonzero(owner == t)[0]) for t in range(num_tasks)
    )
    return TaskStream(tasks=tasks, taxonomy=tax)
