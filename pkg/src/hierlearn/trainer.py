"""End-to-end incremental protocol: per task, train the banks on task data
plus replayed memory, then refresh the memory.

Per task the order is fixed: (1) assemble the training view (task frames
plus everything the memory holds), (2) refit the coarse bank on the view,
(3) expand the fine bank of every group that got new species, (4) pick hard
cases from the task's own frames using the just-trained banks, (5) herd
exemplars for each new class, (6) rebalance the memory. Everything is
deterministic under a fixed seed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, fields

import numpy as np

from . import svm as _svm
from .errors import DegenerateProblemError, FormatError, HierlearnError, ValidationError
from .features import Dataset, TaskStream, concat
from .hierarchy import HierarchicalModel
from .memory import MemoryStore, herd_select, select_hard_cases
from .metrics import EvalReport, ForgettingTable, evaluate, forgetting_breakdown

REPORT_HEADER = "hclreport 1"

# seed-mixing tags so the coarse pass, each fine expansion, and each task
# draw from unrelated solver streams
_COARSE_PHASE = 11
_FINE_PHASE = 12


@dataclass(frozen=True)
class TrainConfig:
    hard_budget: int = 200
    exemplar_budget: int = 1800
    svm_c: float = 1.0
    svm_tol: float = 1e-6
    max_iter: int = 10000
    seed: int = 0

    def __post_init__(self):
        if self.hard_budget < 0 or self.exemplar_budget < 0:
            raise ValidationError("budgets must be >= 0")
        if not (self.svm_c > 0 and self.svm_tol > 0 and self.max_iter >= 1):
            raise ValidationError("solver hyperparameters must be positive")

    def solver_params(self) -> _svm.SolverParams:
        return _svm.SolverParams(c=self.svm_c, tol=self.svm_tol, max_iter=self.max_iter)

    @classmethod
    def from_file(cls, path) -> "TrainConfig":
        """Read key=value lines; '#' starts a comment, unknown keys fail."""
        typed = {f.name: f.type for f in fields(cls)}
        values = {}
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise FormatError(f"{path}:{lineno}: expected key=value")
                key, _, val = line.partition("=")
                key, val = key.strip(), val.strip()
                if key not in typed:
                    raise FormatError(f"{path}:{lineno}: unknown key {key!r}")
                try:
                    values[key] = int(val) if typed[key] == "int" else float(val)
                except ValueError:
                    raise FormatError(f"{path}:{lineno}: bad value for {key}") from None
        return cls(**values)


@dataclass(frozen=True)
class TaskSummary:
    task: int  # 1-based
    new_species: tuple[int, ...]
    view_frames: int
    memory_hard: int
    memory_exemplars: int
    report: EvalReport | None


@dataclass(frozen=True)
class TrainReport:
    summaries: tuple[TaskSummary, ...]
    cohorts: tuple[frozenset, ...]
    forgetting: ForgettingTable | None


def run_stream(
    stream: TaskStream,
    cfg: TrainConfig,
    test: Dataset | None = None,
) -> tuple[HierarchicalModel, MemoryStore, TrainReport]:
    """Run the incremental protocol over the whole stream.

    When ``test`` is given the model is evaluated after every task (with
    per-cohort accuracies), which is what the forgetting table is built
    from. The final model answers over all species seen so far, with no
    notion of which task introduced them.
    """
    if len(stream) == 0:
        raise ValidationError("empty task stream")
    model = HierarchicalModel(stream.taxonomy)
    store = MemoryStore(cfg.hard_budget, cfg.exemplar_budget)
    params = cfg.solver_params()
    cohorts = tuple(frozenset(stream.species_of_task(t)) for t in range(len(stream)))
    summaries: list[TaskSummary] = []
    for t, task in enumerate(stream):
        try:
            summaries.append(
                _run_task(model, store, task, t, params, cfg, cohorts, test)
            )
        except HierlearnError as exc:
            raise type(exc)(f"task {t + 1}: {exc}") from exc
    forgetting = None
    reports = [s.report for s in summaries]
    if len(summaries) >= 2 and all(r is not None for r in reports):
        forgetting = forgetting_breakdown(reports, stream)
    return model, store, TrainReport(tuple(summaries), cohorts, forgetting)


def _run_task(model, store, task, t, params, cfg, cohorts, test) -> TaskSummary:
    if len(task) == 0:
        warnings.warn(f"task {t + 1} is empty; nothing to train", stacklevel=2)
        report = None
        if test is not None and model.groups():
            report = evaluate(model, test, cohorts)
        return TaskSummary(
            task=t + 1,
            new_species=(),
            view_frames=0,
            memory_hard=store.num_hard(),
            memory_exemplars=store.num_exemplars(),
            report=report,
        )
    memory_records = store.training_view()
    replay = None
    if memory_records:
        replay = Dataset.from_records(memory_records, task.dim, task.taxonomy)
        view = concat([task, replay])
    else:
        view = task
    if len(view.group_set()) >= 2:
        model.train_coarse(view, params, seed=_svm.mix_seed(cfg.seed, _COARSE_PHASE, t))
    elif model.groups():
        warnings.warn(
            f"task {t + 1} view covers one group; keeping the coarse bank",
            stacklevel=2,
        )
    else:
        raise DegenerateProblemError(
            "first trainable task covers a single group; the coarse bank"
            " needs at least two"
        )
    new_species = sorted(task.species_set() - model.seen_species)
    by_group: dict[int, list[int]] = {}
    for s in new_species:
        by_group.setdefault(task.taxonomy.parent(s), []).append(s)
    for g in sorted(by_group):
        model.expand_fine(
            g, task, replay, params, seed=_svm.mix_seed(cfg.seed, _FINE_PHASE, t, g)
        )
    quotas = store.hard_quotas(model.svm_identities())
    new_hard = select_hard_cases(model, task, quotas)
    planned = store.exemplar_quotas(store.classes() + new_species)
    new_exemplars = {}
    feats = np.asarray(task.features, dtype=np.float64)
    for y in new_species:
        rows = np.nonzero(task.species_id == y)[0]
        room = min(planned[y], rows.size)
        if room < 1:
            new_exemplars[y] = []
            continue
        picks = herd_select(feats[rows], room)
        new_exemplars[y] = [task.record(int(rows[p])) for p in picks]
    store.rebalance(model.svm_identities(), new_hard, new_exemplars)
    report = evaluate(model, test, cohorts) if test is not None else None
    return TaskSummary(
        task=t + 1,
        new_species=tuple(new_species),
        view_frames=len(view),
        memory_hard=store.num_hard(),
        memory_exemplars=store.num_exemplars(),
        report=report,
    )


def run_joint_oracle(
    stream: TaskStream,
    cfg: TrainConfig,
    test: Dataset | None = None,
) -> tuple[HierarchicalModel, MemoryStore, TrainReport]:
    """Train once on all tasks pooled — the upper-bound comparator."""
    joint = concat(list(stream))
    single = TaskStream(tasks=(joint,), taxonomy=stream.taxonomy)
    return run_stream(single, cfg, test)


def report_lines(tr: TrainReport, cfg: TrainConfig) -> list[str]:
    """Serialize a training report, stable under re-runs of the same seed.

    Holds configuration, per-task class arrivals, memory occupancy, and
    metrics; deliberately nothing wall-clock so identical runs match byte
    for byte.
    """
    lines = [
        REPORT_HEADER,
        f"seed {cfg.seed}",
        f"budgets {cfg.hard_budget} {cfg.exemplar_budget}",
        f"svm {repr(cfg.svm_c)} {repr(cfg.svm_tol)} {cfg.max_iter}",
        f"tasks {len(tr.summaries)}",
    ]
    for s in tr.summaries:
        lines.append(f"task {s.task}")
        lines.append("new " + " ".join(str(v) for v in (len(s.new_species), *s.new_species)))
        lines.append(f"view {s.view_frames}")
        lines.append(f"memory {s.memory_hard} {s.memory_exemplars}")
        if s.report is None:
            lines.append("metrics -")
        else:
            lines.append("metrics " + " ".join(repr(v) for v in s.report.metrics()))
            cells = [
                "-" if v is None else repr(v) for v in s.report.cohort_img_f
            ]
            lines.append("cohorts " + " ".join(cells))
    if tr.forgetting is not None:
        lines.append("forgetting")
        for row in tr.forgetting.rows:
            lines.append(
                f"cohort {row.task} final {repr(row.final)} drop {repr(row.forgetting)}"
            )
        lines.append(f"mean {repr(tr.forgetting.mean_forgetting())}")
    lines.append("end")
    return lines


def save_report(tr: TrainReport, cfg: TrainConfig, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(report_lines(tr, cfg)) + "\n")
