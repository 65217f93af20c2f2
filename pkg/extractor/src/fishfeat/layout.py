"""Walk a labeled image tree into rows ready for extraction.

The directory convention encodes all four labels with no manifest:

    root/<group>/<species>/<fish_id>/<frame_id>.<ext>

Group and species folders are names; ids are assigned densely from the
sorted folder names (species group-major, so siblings get consecutive
ids). Fish folders and frame stems must be non-negative integers - they
become the track and frame ids in the output file. A fish is one track
of one animal, so the same fish id may not appear under two species.
"""

import warnings
from dataclasses import dataclass
from pathlib import Path

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")


class LayoutError(Exception):
    """The image tree does not follow the folder convention."""


@dataclass(frozen=True)
class ImageRow:
    path: Path
    fish_id: int
    frame_id: int
    group_id: int
    species_id: int


@dataclass(frozen=True)
class Scan:
    rows: tuple[ImageRow, ...]  # sorted by (fish_id, frame_id)
    group_names: tuple[str, ...]
    species_names: tuple[str, ...]
    species_group: tuple[int, ...]  # parent group id per species id


def _subdirs(path: Path) -> list[Path]:
    out = []
    for p in sorted(path.iterdir()):
        if p.name.startswith("."):
            continue
        if p.is_dir():
            out.append(p)
        else:
            warnings.warn(f"ignoring stray file {p}")
    return out


def _id_dir(path: Path, what: str) -> int:
    if not path.name.isdigit():
        raise LayoutError(f"{what} folder {path} must be a non-negative integer")
    return int(path.name)


def scan_tree(root) -> Scan:
    root = Path(root)
    if not root.is_dir():
        raise LayoutError(f"{root} is not a directory")
    groups = _subdirs(root)
    if not groups:
        raise LayoutError(f"{root} holds no group folders")

    group_names: list[str] = []
    species_names: list[str] = []
    species_group: list[int] = []
    rows: list[ImageRow] = []
    fish_species: dict[int, int] = {}
    seen_frames: set[tuple[int, int]] = set()

    for g, gdir in enumerate(groups):
        group_names.append(gdir.name)
        species_dirs = _subdirs(gdir)
        if not species_dirs:
            warnings.warn(f"group folder {gdir} holds no species")
        for sdir in species_dirs:
            y = len(species_names)
            species_names.append(sdir.name)
            species_group.append(g)
            count = 0
            for fdir in _subdirs(sdir):
                fish = _id_dir(fdir, "fish")
                if fish_species.setdefault(fish, y) != y:
                    raise LayoutError(f"fish {fish} appears under two species")
                for img in sorted(fdir.iterdir()):
                    if img.suffix.lower() not in IMAGE_SUFFIXES:
                        warnings.warn(f"ignoring non-image file {img}")
                        continue
                    if not img.stem.isdigit():
                        raise LayoutError(f"frame file {img} must be named <frame_id>.<ext>")
                    frame = int(img.stem)
                    if (fish, frame) in seen_frames:
                        raise LayoutError(f"frame {frame} of fish {fish} appears twice")
                    seen_frames.add((fish, frame))
                    rows.append(ImageRow(img, fish, frame, g, y))
                    count += 1
            if count == 0:
                warnings.warn(f"species folder {sdir} has no images;"
                              " it still gets a taxonomy entry")

    if not rows:
        raise LayoutError(f"no images found under {root}")
    rows.sort(key=lambda r: (r.fish_id, r.frame_id))
    return Scan(
        rows=tuple(rows),
        group_names=tuple(group_names),
        species_names=tuple(species_names),
        species_group=tuple(species_group),
    )
