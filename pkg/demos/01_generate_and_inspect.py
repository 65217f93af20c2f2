"""Make a small synthetic corpus, look inside it, and round-trip it to disk.

Every demo in this directory is a plain script: run it from the repo root
with ``python3 demos/01_generate_and_inspect.py``.
"""

import tempfile
from pathlib import Path

import numpy as np

from hierlearn.features import load_binary, save_binary
from hierlearn.synth import PRESETS, generate, split_by_track
from hierlearn.taxonomy import Taxonomy

spec = PRESETS["tiny"]
ds, taxonomy = generate(spec)

print(f"spec: {spec}")
print(f"dataset: {len(ds)} frames, dim {ds.dim}")
print()

# the label space is a two-level tree: species nest under groups
for g, gname in enumerate(taxonomy.group_names):
    kids = ", ".join(taxonomy.species_names[s] for s in taxonomy.species_of(g))
    print(f"  {gname}: {kids}")
print()

# frames come in tracks: one fish id filmed over consecutive frames
fish = np.unique(ds.fish_id)
print(f"{fish.size} tracks; frames per track:",
      {int(f): int(np.sum(ds.fish_id == f)) for f in fish[:4]}, "...")
r = ds.record(0)
print(f"first record: fish {r.fish_id} frame {r.frame_id}"
      f" -> {taxonomy.species_names[r.species_id]}"
      f" (feature head {np.round(r.feature[:3], 3)})")
print()

# hold out whole tracks, never single frames, so test fish are unseen
train, test = split_by_track(ds, 0.25, seed=spec.seed + 1)
print(f"split: {len(train)} train frames, {len(test)} test frames,"
      f" no shared fish: {set(map(int, train.fish_id)).isdisjoint(set(map(int, test.fish_id)))}")

# the on-disk form is a little-endian packed binary plus a text sidecar
with tempfile.TemporaryDirectory() as tmp:
    feat = Path(tmp) / "train.feat"
    tax = Path(tmp) / "train.tax"
    save_binary(train, feat)
    taxonomy.save(tax)
    back = load_binary(feat, Taxonomy.load(tax))
    print(f"round trip through {feat.name}: {feat.stat().st_size} bytes,"
          f" identical = {np.array_equal(back.features, train.features)}")
