"""Fixed-budget rehearsal memory: hard cases near SVM decision boundaries
plus per-class exemplar lists chosen by greedy mean-matching (herding).

Two global budgets are fixed at construction: ``hard_budget`` frames split
evenly across all active SVMs, and ``exemplar_budget`` frames split evenly
across all classes seen so far. As classes accumulate, per-class quotas
shrink and every exemplar list is truncated — never reordered — so each
list stays a prefix of its original selection order.

The store mutates only inside :meth:`MemoryStore.rebalance`; every other
method is a read. Between rebalances the budgets hold unconditionally.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .features import Dataset, FeatureRecord
from .hierarchy import HierarchicalModel

SNAPSHOT_HEADER = "hclmemory 1"

SvmId = tuple[str, int]  # ("coarse", group_id) | ("fine", species_id)


@dataclass(frozen=True)
class HardCase:
    """A frame kept because some SVM was least sure about its true side."""

    record: FeatureRecord
    svm: SvmId
    confidence: float  # true-side confidence at selection time; never rescored


@dataclass(frozen=True)
class Exemplar:
    """A frame kept as a class prototype; rank 1 is the most important."""

    record: FeatureRecord
    species: int
    rank: int

    def __post_init__(self):
        if self.rank < 1:
            raise ValidationError("exemplar rank is 1-based")


def herd_select(features, count: int) -> np.ndarray:
    """Greedy mean-matching selection; returns row indices in pick order.

    Pick k is the row minimizing the distance between the class mean and
    the mean of the k rows picked so far. Rows are never picked twice, and
    equal distances resolve to the lowest row index. Truncating the result
    to any shorter count gives exactly the shorter selection (prefix
    property), which is what lets later budget cuts keep the best rows.
    """
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 2 or f.shape[0] < 1:
        raise ValidationError("need a non-empty (n, d) feature matrix")
    if count < 1:
        raise ValidationError("selection count must be >= 1")
    n = f.shape[0]
    if count > n:
        warnings.warn(f"requested {count} exemplars from {n} rows; clamping", stacklevel=2)
        count = n
    mu = f.mean(axis=0)
    total = np.zeros(f.shape[1])
    taken = np.zeros(n, dtype=bool)
    picks = np.empty(count, dtype=np.int64)
    for k in range(1, count + 1):
        diff = mu[None, :] - (total[None, :] + f) / k
        d2 = (diff * diff).sum(axis=1)
        d2[taken] = np.inf
        i = int(np.argmin(d2))  # first minimum -> lowest index on ties
        picks[k - 1] = i
        taken[i] = True
        total += f[i]
    return picks


def equal_split(budget: int, keys: list) -> dict:
    """Split ``budget`` whole units over ``keys``; earlier keys absorb the
    remainder (one extra each)."""
    if budget < 0:
        raise ValidationError("budget must be >= 0")
    k = len(keys)
    if k == 0:
        return {}
    base, rem = divmod(budget, k)
    return {key: base + (1 if i < rem else 0) for i, key in enumerate(keys)}


def select_hard_cases(
    model: HierarchicalModel, data: Dataset, quotas: dict[SvmId, int]
) -> list[HardCase]:
    """Pick, per SVM, the frames with the lowest true-side confidence.

    Coarse SVMs consider every frame; a fine SVM considers only its own
    group's frames. The true side of a frame is "positive" when the frame's
    label is the SVM's class, so positives are scored by their confidence
    and negatives by one minus it. Each SVM keeps its quota of lowest
    scores (ties broken by fish then frame id); the union is deduplicated
    by physical frame, first-claiming SVM wins.
    """
    if len(data) == 0 or not quotas:
        return []
    feats = np.asarray(data.features, dtype=np.float64)
    pool: list[HardCase] = []
    claimed: set[tuple[int, int]] = set()
    for ident in model.svm_identities():
        quota = quotas.get(ident, 0)
        if quota <= 0:
            continue
        kind, cid = ident
        if kind == "coarse":
            rows = np.arange(len(data))
            positive = data.group_id == cid
            svm = model.coarse_bank[cid]
        else:
            g = model.taxonomy.parent(cid)
            rows = np.nonzero(data.group_id == g)[0]
            positive = data.species_id[rows] == cid
            svm = model.fine_banks[g][cid]
        if rows.size == 0:
            continue
        conf = svm.confidences(feats[rows])
        true_side = np.where(positive, conf, 1.0 - conf)
        order = np.lexsort((data.frame_id[rows], data.fish_id[rows], true_side))
        for j in order[:quota]:
            rec = data.record(int(rows[j]))
            if rec.key in claimed:
                continue
            claimed.add(rec.key)
            pool.append(HardCase(record=rec, svm=ident, confidence=float(true_side[j])))
    return pool


class MemoryStore:
    """Rehearsal memory with hard-case and exemplar budgets fixed for life."""

    def __init__(self, hard_budget: int, exemplar_budget: int):
        if hard_budget < 0 or exemplar_budget < 0:
            raise ValidationError("budgets must be >= 0")
        self.hard_budget = int(hard_budget)
        self.exemplar_budget = int(exemplar_budget)
        self._hard: dict[SvmId, list[HardCase]] = {}
        self._exemplars: dict[int, list[Exemplar]] = {}
        self._svm_order: list[SvmId] = []

    # -- read side ---------------------------------------------------------

    def classes(self) -> list[int]:
        return sorted(self._exemplars)

    def exemplars_of(self, species: int) -> list[Exemplar]:
        return list(self._exemplars.get(species, ()))

    def hard_cases_of(self, svm: SvmId) -> list[HardCase]:
        return list(self._hard.get(svm, ()))

    def num_exemplars(self) -> int:
        return sum(len(v) for v in self._exemplars.values())

    def num_hard(self) -> int:
        return len(self.hard_pool())

    def exemplar_quotas(self, class_ids: list[int]) -> dict[int, int]:
        return equal_split(self.exemplar_budget, sorted(class_ids))

    def hard_quotas(self, svm_ids: list[SvmId]) -> dict[SvmId, int]:
        return equal_split(self.hard_budget, list(svm_ids))

    def hard_pool(self) -> list[HardCase]:
        """Deduplicated hard cases, in SVM order then score order."""
        seen: set[tuple[int, int]] = set()
        pool = []
        for ident in self._svm_order:
            for hc in self._hard.get(ident, ()):
                if hc.record.key in seen:
                    continue
                seen.add(hc.record.key)
                pool.append(hc)
        return pool

    def training_view(self) -> list[FeatureRecord]:
        """All remembered frames as plain labeled records, one per physical
        frame (exemplars win duplicates), sorted by (fish, frame)."""
        by_key: dict[tuple[int, int], FeatureRecord] = {}
        for y in self.classes():
            for ex in self._exemplars[y]:
                by_key.setdefault(ex.record.key, ex.record)
        for hc in self.hard_pool():
            by_key.setdefault(hc.record.key, hc.record)
        return [by_key[k] for k in sorted(by_key)]

    # -- the single mutator -------------------------------------------------

    def rebalance(
        self,
        svm_ids: list[SvmId],
        new_hard: list[HardCase] = (),
        new_exemplars: dict[int, list[FeatureRecord]] | None = None,
    ):
        """Admit a task's new memory content and re-split both budgets.

        ``svm_ids`` is the full bank roster (quota split order); ``new_hard``
        comes from :func:`select_hard_cases`; ``new_exemplars`` maps each new
        class to records in herding order (an empty list registers a class
        that arrived when the budget left it no room — it still dilutes the
        split). Old hard-case lists keep their stored scores and compete
        with the new ones; exemplar lists are truncated to the recomputed
        per-class quota, never reordered.
        """
        roster = list(svm_ids)
        missing = [i for i in self._svm_order if i not in roster]
        if missing:
            raise ValidationError(f"rebalance dropped active SVMs: {missing}")
        for hc in new_hard:
            if hc.svm not in roster:
                raise ValidationError(f"hard case for unknown SVM {hc.svm}")
        new_exemplars = dict(new_exemplars or {})
        for y in new_exemplars:
            if y in self._exemplars:
                raise ValidationError(f"class {y} was already admitted")
        # hard cases: merge, re-sort by stored score, dedup, cut to quota
        merged: dict[SvmId, list[HardCase]] = {i: list(self._hard.get(i, ())) for i in roster}
        for hc in new_hard:
            merged[hc.svm].append(hc)
        quotas = self.hard_quotas(roster)
        self._hard = {}
        for ident in roster:
            cases = sorted(
                merged[ident],
                key=lambda h: (h.confidence, h.record.fish_id, h.record.frame_id),
            )
            kept, seen = [], set()
            for hc in cases:
                if hc.record.key in seen:
                    continue
                seen.add(hc.record.key)
                kept.append(hc)
            self._hard[ident] = kept[: quotas[ident]]
        self._svm_order = roster
        # exemplars: admit new lists, then truncate everyone to the new quota
        for y, recs in sorted(new_exemplars.items()):
            self._exemplars[y] = [
                Exemplar(record=r, species=y, rank=k + 1) for k, r in enumerate(recs)
            ]
        equotas = self.exemplar_quotas(self.classes())
        for y in self.classes():
            self._exemplars[y] = self._exemplars[y][: equotas[y]]

    # -- snapshot ------------------------------------------------------------

    def to_lines(self) -> list[str]:
        lines = [SNAPSHOT_HEADER, f"budgets {self.hard_budget} {self.exemplar_budget}"]
        lines.append(f"svms {len(self._svm_order)}")
        hquotas = self.hard_quotas(self._svm_order)
        for ident in self._svm_order:
            kind, cid = ident
            lines.append(f"q {kind} {cid} {hquotas[ident]} {len(self._hard.get(ident, ()))}")
        classes = self.classes()
        equotas = self.exemplar_quotas(classes)
        lines.append(f"classes {len(classes)}")
        for y in classes:
            lines.append(f"q species {y} {equotas[y]} {len(self._exemplars[y])}")
        hard = [hc for ident in self._svm_order for hc in self._hard.get(ident, ())]
        lines.append(f"hard {len(hard)}")
        for hc in hard:
            r = hc.record
            lines.append(
                f"h {hc.svm[0]} {hc.svm[1]} {r.fish_id} {r.frame_id}"
                f" {r.group_id} {r.species_id} {repr(hc.confidence)}"
            )
        total = self.num_exemplars()
        lines.append(f"exemplars {total}")
        for y in classes:
            for ex in self._exemplars[y]:
                r = ex.record
                lines.append(f"e {y} {ex.rank} {r.fish_id} {r.frame_id} {r.group_id} {r.species_id}")
        return lines

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(self.to_lines()) + "\n")
