"""Synthetic hierarchical feature data: groups are well-separated
super-clusters, species are sub-clusters inside them, and frames come in
tracks (several noisy views of one individual) so that video-level voting
has something to vote over.

Geometry knobs: group centers are at least ``group_sep`` apart, species
centers within a group at least ``species_sep`` apart (and within
``group_sep / 4`` of the group center, so groups stay separated at the
species level too), and every frame is its species center plus isotropic
Gaussian noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GenerationError, ValidationError
from .features import Dataset
from .taxonomy import Taxonomy

_PLACEMENT_TRIES = 4000  # rejection-sampling attempts per center


@dataclass(frozen=True)
class SynthSpec:
    dim: int
    species_per_group: tuple[int, ...]
    tracks_per_species: int
    frames_per_track: int
    group_sep: float
    species_sep: float
    noise: float
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "species_per_group", tuple(self.species_per_group))
        if self.dim < 1 or self.tracks_per_species < 1 or self.frames_per_track < 1:
            raise ValidationError("dim and per-species counts must be >= 1")
        if not self.species_per_group or min(self.species_per_group) < 1:
            raise ValidationError("need at least one species in every group")
        if not (self.group_sep > self.species_sep > 0):
            raise ValidationError("separations must satisfy group_sep > species_sep > 0")
        if not self.noise > 0:
            raise ValidationError("noise must be > 0")

    @property
    def num_groups(self) -> int:
        return len(self.species_per_group)

    @property
    def num_species(self) -> int:
        return sum(self.species_per_group)


PRESETS: dict[str, SynthSpec] = {
    # shape of the motivating fish problem: 6 groups, 31 species, two of
    # them too small to split across tasks
    "fish31": SynthSpec(
        dim=16,
        species_per_group=(4, 2, 2, 8, 8, 7),
        tracks_per_species=16,
        frames_per_track=8,
        group_sep=10.0,
        species_sep=2.4,
        noise=1.0,
    ),
    # smallest shape that still exercises both hierarchy levels
    "tiny": SynthSpec(
        dim=4,
        species_per_group=(2, 2),
        tracks_per_species=4,
        frames_per_track=3,
        group_sep=8.0,
        species_sep=2.0,
        noise=0.6,
    ),
}


def _place_apart(rng, count, min_dist, propose, what) -> np.ndarray:
    """Rejection-sample ``count`` points pairwise >= min_dist apart."""
    centers: list[np.ndarray] = []
    for _ in range(count):
        for _ in range(_PLACEMENT_TRIES):
            cand = propose(rng)
            if all(np.linalg.norm(cand - c) >= min_dist for c in centers):
                centers.append(cand)
                break
        else:
            raise GenerationError(
                f"could not place {count} {what} at separation {min_dist};"
                " increase dim or lower the separation"
            )
    return np.stack(centers)


def _taxonomy_for(spec: SynthSpec) -> Taxonomy:
    group_names = tuple(f"group{g:02d}" for g in range(spec.num_groups))
    species_names, species_group = [], []
    for g, k in enumerate(spec.species_per_group):
        for j in range(k):
            species_names.append(f"g{g:02d}s{j:02d}")
            species_group.append(g)
    return Taxonomy(group_names, tuple(species_names), tuple(species_group))


def generate_with_centers(spec: SynthSpec) -> tuple[Dataset, Taxonomy, np.ndarray]:
    """Like :func:`generate` but also returns the species centers (one row
    per species id) so statistical checks can compare against the truth."""
    rng = np.random.default_rng(spec.seed)
    taxonomy = _taxonomy_for(spec)
    # group centers in a cube that scales with how many we must fit
    half = spec.group_sep * max(1.0, spec.num_groups ** (1.0 / spec.dim))
    group_centers = _place_apart(
        rng,
        spec.num_groups,
        spec.group_sep,
        lambda r: r.uniform(-half, half, spec.dim),
        "group centers",
    )
    radius = spec.group_sep / 4.0
    if spec.species_sep > 2.0 * radius:
        raise GenerationError(
            "species_sep exceeds the within-group placement diameter;"
            " raise group_sep or lower species_sep"
        )

    def in_ball(r):
        v = r.standard_normal(spec.dim)
        v *= radius * r.uniform() ** (1.0 / spec.dim) / np.linalg.norm(v)
        return v

    species_centers = np.empty((spec.num_species, spec.dim))
    s = 0
    for g, k in enumerate(spec.species_per_group):
        local = _place_apart(
            rng,
            k,
            spec.species_sep,
            lambda r: group_centers[g] + in_ball(r),
            f"species centers in group {g}",
        )
        species_centers[s : s + k] = local
        s += k
    frames = spec.tracks_per_species * spec.frames_per_track
    n = spec.num_species * frames
    fish_id = np.empty(n, dtype=np.uint64)
    frame_id = np.empty(n, dtype=np.uint64)
    species_id = np.empty(n, dtype=np.uint16)
    features = np.empty((n, spec.dim), dtype=np.float32)
    row = 0
    fish = 0
    for sp in range(spec.num_species):
        for _ in range(spec.tracks_per_species):
            for fr in range(spec.frames_per_track):
                fish_id[row] = fish
                frame_id[row] = fr
                species_id[row] = sp
                noise = rng.standard_normal(spec.dim) * spec.noise
                features[row] = (species_centers[sp] + noise).astype(np.float32)
                row += 1
            fish += 1
    group_id = np.array([taxonomy.parent(int(sp)) for sp in species_id], dtype=np.uint16)
    ds = Dataset(
        dim=spec.dim,
        fish_id=fish_id,
        frame_id=frame_id,
        group_id=group_id,
        species_id=species_id,
        features=features,
        taxonomy=taxonomy,
    ).validate()
    return ds, taxonomy, species_centers


def generate(spec: SynthSpec) -> tuple[Dataset, Taxonomy]:
    """Generate a dataset and its taxonomy; deterministic per seed."""
    ds, taxonomy, _ = generate_with_centers(spec)
    return ds, taxonomy


def split_by_track(ds: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Hold out whole tracks per species for testing.

    Every species keeps at least one track on each side, so both splits
    cover the full label set; species with a single track are rejected.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValidationError("test_fraction must be strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    test_rows: list[np.ndarray] = []
    train_rows: list[np.ndarray] = []
    for sp in sorted(ds.species_set()):
        sp_rows = np.nonzero(ds.species_id == sp)[0]
        tracks = np.unique(ds.fish_id[sp_rows])
        if tracks.size < 2:
            raise ValidationError(
                f"species {sp} has a single track; cannot split by track"
            )
        n_test = int(round(test_fraction * tracks.size))
        n_test = min(max(n_test, 1), tracks.size - 1)
        shuffled = rng.permutation(tracks)
        held = set(shuffled[:n_test].tolist())
        in_test = np.isin(ds.fish_id[sp_rows], sorted(held))
        test_rows.append(sp_rows[in_test])
        train_rows.append(sp_rows[~in_test])
    train = ds.subset(np.sort(np.concatenate(train_rows)))
    test = ds.subset(np.sort(np.concatenate(test_rows)))
    return train, test
