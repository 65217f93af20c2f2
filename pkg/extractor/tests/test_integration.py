"""The written file pair feeds the training package unmodified.

The byte-level promises of the writers are covered in test_hcf and
test_extract; this file checks the consuming side of the contract:
hierlearn loads the pair exactly as written, round-trips the feature
file byte-for-byte through its own writer, and trains on it end to end.
"""

import numpy as np
import pytest

hierlearn = pytest.importorskip("hierlearn")

from fishfeat.hcf import sidecar  # noqa: E402


@pytest.fixture(scope="module")
def loaded(extracted):
    job, _ = extracted
    tax = hierlearn.Taxonomy.load(sidecar(job.out))
    return job, hierlearn.load_binary(job.out, tax)


def test_pair_loads_and_validates(loaded):
    _, ds = loaded
    assert len(ds) == 10
    assert ds.features.shape == (10, 512)
    assert ds.taxonomy == hierlearn.Taxonomy(
        group_names=("benthic", "pelagic"),
        species_names=("flounder", "skate", "herring", "mackerel"),
        species_group=(0, 0, 1, 1),
    )
    assert list(ds.fish_id) == [0, 0, 1, 1, 2, 2, 3, 3, 4, 4]
    assert list(ds.species_id) == [0, 0, 1, 1, 2, 2, 3, 3, 3, 3]
    assert [ds.taxonomy.parent(s) for s in ds.species_id] == list(ds.group_id)


def test_feature_file_round_trips_byte_exactly(loaded, tmp_path):
    job, ds = loaded
    back = tmp_path / "back.feat"
    hierlearn.save_binary(ds, back)
    assert back.read_bytes() == job.out.read_bytes()


def test_trains_a_model_end_to_end(loaded):
    _, ds = loaded
    stream = hierlearn.TaskStream(tasks=(ds,), taxonomy=ds.taxonomy)
    cfg = hierlearn.TrainConfig(hard_budget=4, exemplar_budget=8, seed=1)
    model, store, report = hierlearn.run_stream(stream, cfg)
    assert len(report.summaries) == 1

    groups, gconf, species, sconf = model.predict_batch(ds.features)
    assert [ds.taxonomy.parent(int(s)) for s in species] == list(groups)
    assert np.all((gconf >= 0) & (gconf <= 1) & (sconf >= 0) & (sconf <= 1))

    rep = hierlearn.evaluate(model, ds)
    assert rep.n_frames == 10 and rep.n_tracks == 5
    assert rep.img_f <= rep.img_c
