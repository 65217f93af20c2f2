"""Shared fixtures: a small labeled image tree and one extraction of it.

The tree is the 10-image shape used across the files: two groups, four
species, five fish tracks of two frames each. Session-scoped fixtures
are treated as read-only by every test.
"""

import numpy as np
import pytest
from PIL import Image

from fishfeat import ExtractJob, extract

# group -> species -> fish ids; two frames per fish = 10 images
TREE_SHAPE = {
    "benthic": {"flounder": [0], "skate": [1]},
    "pelagic": {"herring": [2], "mackerel": [3, 4]},
}


def write_image(path, seed):
    rng = np.random.default_rng(seed)
    base = rng.integers(60, 200, size=3)
    noise = rng.integers(-50, 50, size=(64, 64, 3))
    arr = np.clip(base[None, None, :] + noise, 0, 255).astype(np.uint8)
    Image.fromarray(arr).save(path)


def build_tree(root, shape=TREE_SHAPE, frames=2):
    for group, species_map in shape.items():
        for species, fishes in species_map.items():
            for fish in fishes:
                d = root / group / species / str(fish)
                d.mkdir(parents=True)
                for frame in range(frames):
                    write_image(d / f"{frame}.png", seed=fish * 101 + frame)
    return root


@pytest.fixture(scope="session")
def image_tree(tmp_path_factory):
    return build_tree(tmp_path_factory.mktemp("tree"))


@pytest.fixture(scope="session")
def extracted(tmp_path_factory, image_tree):
    """(job, summary) for one resnet18 pass over the session tree."""
    out = tmp_path_factory.mktemp("features") / "fixture.feat"
    job = ExtractJob(root=image_tree, out=out, backbone="resnet18", batch_size=4)
    return job, extract(job)
