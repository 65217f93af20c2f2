"""Shared builders and one small end-to-end training run.

The session-scoped fixtures are read-only by convention: tests that need to
mutate a model or a store build their own.
"""

import numpy as np
import pytest

import hierlearn as hl


def flat_taxonomy(sizes=(2, 2)):
    """A taxonomy with len(sizes) groups holding sizes[g] species each."""
    groups = tuple(f"G{g}" for g in range(len(sizes)))
    species = []
    parents = []
    for g, k in enumerate(sizes):
        for j in range(k):
            species.append(f"G{g}S{j}")
            parents.append(g)
    return hl.Taxonomy(groups, tuple(species), tuple(parents))


def make_dataset(tax, rows, dim=2):
    """Build a Dataset from (fish, frame, species, feature...) tuples."""
    recs = [
        hl.FeatureRecord(
            fish_id=fish,
            frame_id=frame,
            group_id=tax.parent(species),
            species_id=species,
            feature=np.asarray(feat, dtype=np.float32),
        )
        for fish, frame, species, feat in rows
    ]
    return hl.Dataset.from_records(recs, dim=dim, taxonomy=tax)


def mk_svm(weights, bias=0.0, identity=None):
    """Hand-built SVM with the fixed calibration map conf(m) = 1/(1+e^-m)."""
    return hl.CalibratedSvm(
        weights=np.asarray(weights, dtype=np.float64), bias=float(bias), identity=identity
    )


@pytest.fixture(scope="session")
def tiny_corpus():
    ds, tax = hl.generate(hl.PRESETS["tiny"])
    train, test = hl.split_by_track(ds, 0.25, seed=1)
    return ds, tax, train, test


@pytest.fixture(scope="session")
def tiny_run(tiny_corpus):
    _, _, train, test = tiny_corpus
    stream = hl.partition_tasks(train, 2, seed=3)
    cfg = hl.TrainConfig(hard_budget=12, exemplar_budget=24, seed=5)
    model, store, report = hl.run_stream(stream, cfg, test)
    return {
        "train": train,
        "test": test,
        "stream": stream,
        "cfg": cfg,
        "model": model,
        "store": store,
        "report": report,
    }
