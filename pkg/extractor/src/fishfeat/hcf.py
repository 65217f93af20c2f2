"""Writers for the feature-file pair the training engine reads.

Binary layout: a 20-byte header ``<4sIIQ`` = (magic ``HCF1``, version 1,
feature dim, record count), then one packed little-endian record per
image: fish u64, frame u64, group u16, species u16, ``dim`` float32
values. The sidecar is the ``taxonomy 1`` text format. The engine's own
saver must reproduce our bytes exactly; that round trip is covered by
the integration tests.
"""

import struct
from pathlib import Path

import numpy as np

MAGIC = b"HCF1"
VERSION = 1
HEADER = struct.Struct("<4sIIQ")
RECORD_PREFIX = struct.Struct("<QQHH")


def write_features(path, dim: int, rows) -> int:
    """Write (fish, frame, group, species, vector) tuples; returns count."""
    rows = list(rows)
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, VERSION, dim, len(rows)))
        for fish, frame, group, species, vec in rows:
            vec = np.ascontiguousarray(vec, dtype="<f4")
            if vec.shape != (dim,):
                raise ValueError(f"feature of shape {vec.shape}, expected ({dim},)")
            fh.write(RECORD_PREFIX.pack(fish, frame, group, species))
            fh.write(vec.tobytes())
    return len(rows)


def write_taxonomy(path, group_names, species_names, species_group):
    lines = ["taxonomy 1"]
    for g, name in enumerate(group_names):
        lines.append(f"group {g} {name}")
    for s, name in enumerate(species_names):
        lines.append(f"species {s} {name} {species_group[s]}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def sidecar(path) -> Path:
    return Path(path).with_suffix(".tax")
