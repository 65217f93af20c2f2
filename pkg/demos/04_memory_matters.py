"""Same stream twice: with the rehearsal memory on, and with it off.

Without remembered frames, every coarse refit and every fine-bank
expansion sees only the newest task, so the one-vs-rest problems lose
their old positives and the old classes collapse. The memory is small -
1800 exemplars plus 200 hard frames, while the stream delivers close to
3000 - but it is enough to keep the old decision boundaries pinned down.
"""

import warnings
from dataclasses import replace

from hierlearn.features import partition_tasks
from hierlearn.metrics import format_table
from hierlearn.synth import PRESETS, generate, split_by_track
from hierlearn.trainer import TrainConfig, run_stream

spec = replace(PRESETS["fish31"], seed=42)
ds, taxonomy = generate(spec)
train, test = split_by_track(ds, 0.25, seed=43)
stream = partition_tasks(train, 3, seed=44)

cfg = TrainConfig(hard_budget=200, exemplar_budget=1800, seed=45)
print("training with memory ...")
_, _, with_mem = run_stream(stream, cfg, test)

print("training without ...")
with warnings.catch_warnings(record=True) as notes:
    warnings.simplefilter("always")
    _, _, without = run_stream(
        stream, replace(cfg, hard_budget=0, exemplar_budget=0), test
    )
print(f"(the no-memory run warned {len(notes)} times about stale classifier banks)")

print()
print(format_table([
    ("memory", with_mem.summaries[-1].report),
    ("no memory", without.summaries[-1].report),
]))

print()
a = with_mem.forgetting
b = without.forgetting
print(f"old-cohort final fine accuracy: {a.final_old_fine():.1f} with memory,"
      f" {b.final_old_fine():.1f} without")
print(f"mean forgetting:                {a.mean_forgetting():.1f} with memory,"
      f" {b.mean_forgetting():.1f} without")
