"""Image- and video-level accuracy at both hierarchy levels, plus the
per-cohort breakdown used to quantify forgetting.

Image metrics are fractions of frames; video metrics are fractions of fish
tracks, scored on the majority-vote prediction. Fine correctness always
requires the species to match — a track routed to the wrong group is wrong
at the species level too.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TaxonomyError, ValidationError
from .features import Dataset, TaskStream
from .hierarchy import HierarchicalModel

METRIC_COLUMNS = ("img_C", "img_F", "video_C", "video_F")


@dataclass(frozen=True, eq=False)
class EvalReport:
    img_c: float  # % frames with the group right
    img_f: float  # % frames with the species right
    video_c: float  # % tracks with the group right
    video_f: float  # % tracks with the species right
    n_frames: int
    n_tracks: int
    group_confusion: np.ndarray  # (G, G) counts, rows true, cols predicted
    species_img_f: dict[int, float]  # per true species, over its frames
    cohort_img_f: tuple[float | None, ...] = ()  # per cohort, None if absent

    def metrics(self) -> tuple[float, float, float, float]:
        return (self.img_c, self.img_f, self.video_c, self.video_f)


def evaluate(
    model: HierarchicalModel,
    test: Dataset,
    cohorts: tuple[frozenset, ...] | None = None,
) -> EvalReport:
    """Score the model on every frame and every track of ``test``.

    ``cohorts`` optionally lists species sets (one per training task); the
    report then carries fine accuracy restricted to each cohort's frames.
    Test species the model has never seen simply score as wrong.
    """
    test.validate()
    if test.taxonomy != model.taxonomy:
        raise TaxonomyError("test set was built against a different taxonomy")
    g_pred, _, s_pred, _ = model.predict_batch(test.features)
    g_true = test.group_id.astype(np.int64)
    s_true = test.species_id.astype(np.int64)
    frame_g_ok = g_pred == g_true
    frame_s_ok = s_pred == s_true
    n = len(test)
    tracks = np.unique(test.fish_id)
    video_g_ok = video_s_ok = 0
    for fish in tracks:
        rows = np.nonzero(test.fish_id == fish)[0]
        tg = int(g_true[rows[0]])
        ts = int(s_true[rows[0]])
        if not (g_true[rows] == tg).all() or not (s_true[rows] == ts).all():
            raise ValidationError(f"track {int(fish)} mixes labels")
        pred = model.predict_video(test.features[rows])
        video_g_ok += int(pred.group_id == tg)
        video_s_ok += int(pred.species_id == ts)
    ngroups = model.taxonomy.num_groups
    confusion = np.zeros((ngroups, ngroups), dtype=np.int64)
    np.add.at(confusion, (g_true, g_pred), 1)
    species_img_f = {}
    for sp in sorted(test.species_set()):
        sel = s_true == sp
        species_img_f[sp] = 100.0 * float(frame_s_ok[sel].mean())
    cohort_img_f: tuple[float | None, ...] = ()
    if cohorts is not None:
        vals = []
        for cohort in cohorts:
            sel = np.isin(s_true, sorted(cohort))
            vals.append(100.0 * float(frame_s_ok[sel].mean()) if sel.any() else None)
        cohort_img_f = tuple(vals)
    return EvalReport(
        img_c=100.0 * float(frame_g_ok.mean()),
        img_f=100.0 * float(frame_s_ok.mean()),
        video_c=100.0 * video_g_ok / tracks.size,
        video_f=100.0 * video_s_ok / tracks.size,
        n_frames=n,
        n_tracks=int(tracks.size),
        group_confusion=confusion,
        species_img_f=species_img_f,
        cohort_img_f=cohort_img_f,
    )


@dataclass(frozen=True)
class CohortRow:
    """Fine accuracy of one task's classes, tracked from their arrival on."""

    task: int  # 0-based task that introduced these species
    species: tuple[int, ...]
    trajectory: tuple[float, ...]  # cohort img_F after tasks task..T-1

    @property
    def final(self) -> float:
        return self.trajectory[-1]

    @property
    def forgetting(self) -> float:
        return max(self.trajectory) - self.trajectory[-1]


@dataclass(frozen=True)
class ForgettingTable:
    rows: tuple[CohortRow, ...]

    def mean_forgetting(self) -> float:
        return float(np.mean([r.forgetting for r in self.rows]))

    def final_old_fine(self) -> float:
        """Mean final fine accuracy over every cohort but the last."""
        old = [r.final for r in self.rows if r.task < max(r2.task for r2 in self.rows)]
        if not old:
            raise ValidationError("no old cohorts (single-task table)")
        return float(np.mean(old))


def forgetting_breakdown(reports: list[EvalReport], stream: TaskStream) -> ForgettingTable:
    """Assemble per-cohort accuracy trajectories from per-task reports.

    ``reports[t]`` must be the evaluation run right after task ``t``, with
    ``cohort_img_f`` computed against this stream's cohorts.
    """
    if len(reports) < 2:
        raise ValidationError("need evaluations from at least two tasks")
    if len(reports) != len(stream):
        raise ValidationError(
            f"{len(reports)} reports for {len(stream)} tasks"
        )
    rows = []
    for t in range(len(stream)):
        species = tuple(sorted(stream.species_of_task(t)))
        if not species:
            continue  # vacuous task has no cohort
        traj = []
        for rep in reports[t:]:
            if len(rep.cohort_img_f) != len(stream):
                raise ValidationError("report lacks per-cohort accuracies")
            v = rep.cohort_img_f[t]
            if v is None:
                raise ValidationError(f"cohort {t} absent from the test set")
            traj.append(v)
        rows.append(CohortRow(task=t, species=species, trajectory=tuple(traj)))
    return ForgettingTable(rows=tuple(rows))


def format_table(rows: list[tuple[str, EvalReport]]) -> str:
    """Aligned text table, one row per labeled report, percentages to one
    decimal place."""
    if not rows:
        raise ValidationError("no rows to format")
    label_w = max(len("run"), max(len(label) for label, _ in rows))
    header = "run".ljust(label_w) + "".join(c.rjust(9) for c in METRIC_COLUMNS)
    lines = [header]
    for label, rep in rows:
        cells = "".join(f"{v:9.1f}" for v in rep.metrics())
        lines.append(label.ljust(label_w) + cells)
    return "\n".join(lines)


def format_report(rep: EvalReport, taxonomy=None) -> str:
    """Multi-line human-readable summary of one evaluation."""
    lines = [
        f"frames {rep.n_frames} tracks {rep.n_tracks}",
        "  ".join(f"{c} {v:.1f}" for c, v in zip(METRIC_COLUMNS, rep.metrics())),
    ]
    lines.append("group confusion (rows true, cols predicted):")
    for g in range(rep.group_confusion.shape[0]):
        name = taxonomy.group_names[g] if taxonomy is not None else str(g)
        counts = " ".join(f"{int(v):5d}" for v in rep.group_confusion[g])
        lines.append(f"  {name:>12} {counts}")
    lines.append("per-species fine accuracy:")
    for sp, v in sorted(rep.species_img_f.items()):
        name = taxonomy.species_names[sp] if taxonomy is not None else str(sp)
        lines.append(f"  {name:>12} {v:.1f}")
    return "\n".join(lines)
