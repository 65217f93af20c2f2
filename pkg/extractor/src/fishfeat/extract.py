"""The extraction pipeline: image tree -> frozen backbone -> feature file."""

import warnings
from dataclasses import dataclass
from pathlib import Path

import torch
from PIL import Image

from .backbones import PREPROCESS, build, embedding_dim, weights_checksum
from .hcf import sidecar, write_features, write_taxonomy
from .layout import scan_tree


@dataclass(frozen=True)
class ExtractJob:
    root: Path
    out: Path
    backbone: str = "resnet18"
    batch_size: int = 16
    device: str = "cpu"
    weights: Path | None = None

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")


@dataclass(frozen=True)
class ExtractSummary:
    written: int
    skipped: int
    dim: int
    checksum: str  # of the backbone weights; verified unchanged by the run


def _decode(path: Path):
    try:
        with Image.open(path) as img:
            return img.convert("RGB")
    except (OSError, ValueError) as exc:
        warnings.warn(f"skipping undecodable image {path}: {exc}")
        return None


def extract(job: ExtractJob) -> ExtractSummary:
    """Embed every image in the tree and write the feature file + sidecar.

    Undecodable images are skipped (with a warning each); everything else
    comes out as one record, appended in (fish_id, frame_id) order. The
    backbone runs in eval mode under no_grad, so its weights are bit-wise
    untouched and the output is deterministic for a given device.
    """
    scan = scan_tree(job.root)
    net = build(job.backbone, weights=job.weights, device=job.device)
    dim = embedding_dim(job.backbone)
    checksum = weights_checksum(net)

    records = []
    skipped = 0
    batch_rows, batch_imgs = [], []

    def flush():
        if not batch_rows:
            return
        stack = torch.stack(batch_imgs).to(job.device)
        with torch.no_grad():
            emb = net(stack)
        emb = emb.detach().cpu().numpy()
        if emb.shape != (len(batch_rows), dim):
            raise RuntimeError(
                f"backbone {job.backbone} returned shape {emb.shape},"
                f" expected ({len(batch_rows)}, {dim})"
            )
        for row, vec in zip(batch_rows, emb):
            records.append((row.fish_id, row.frame_id, row.group_id, row.species_id, vec))
        batch_rows.clear()
        batch_imgs.clear()

    for row in scan.rows:
        img = _decode(row.path)
        if img is None:
            skipped += 1
            continue
        batch_rows.append(row)
        batch_imgs.append(PREPROCESS(img))
        if len(batch_rows) == job.batch_size:
            flush()
    flush()

    if not records:
        raise RuntimeError(f"every image under {job.root} failed to decode")
    if weights_checksum(net) != checksum:
        raise RuntimeError("backbone weights changed during extraction")
    written = write_features(job.out, dim, records)
    write_taxonomy(sidecar(job.out), scan.group_names, scan.species_names, scan.species_group)
    return ExtractSummary(written=written, skipped=skipped, dim=dim, checksum=checksum)
