"""Two-level one-vs-all SVM banks: a coarse bank routes to a group, that
group's fine bank picks the species.

The model grows class-incrementally: ``train_coarse`` (re)fits every group
SVM from whatever data is passed in, ``expand_fine`` adds species SVMs for
one group without touching any other group's bank. Prediction always takes
coarse-then-fine; a frame routed to a group with a single known species
inherits the group decision (and its confidence) directly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import svm as _svm
from .errors import (
    DegenerateProblemError,
    DuplicateClassError,
    FormatError,
    TaxonomyError,
    ValidationError,
)
from .features import Dataset
from .taxonomy import Taxonomy

MODEL_HEADER = "hclmodel 1"

# domain tags keep coarse/fine solver seeds from colliding per id
_COARSE_TAG = 1
_FINE_TAG = 2


@dataclass(frozen=True)
class HierPrediction:
    group_id: int
    group_confidence: float
    species_id: int
    species_confidence: float


def _stack_rows(features: np.ndarray, extra: list[np.ndarray]) -> np.ndarray:
    if not extra:
        return features
    return np.concatenate([features] + extra, axis=0)


class HierarchicalModel:
    """Mutable container for the coarse bank and the per-group fine banks."""

    def __init__(self, taxonomy: Taxonomy):
        self.taxonomy = taxonomy
        self.coarse_bank: dict[int, _svm.CalibratedSvm] = {}
        self.fine_banks: dict[int, dict[int, _svm.CalibratedSvm]] = {}
        self.seen_species: set[int] = set()
        self._dim: int | None = None

    # -- introspection ---------------------------------------------------

    @property
    def dim(self) -> int | None:
        return self._dim

    def groups(self) -> list[int]:
        return sorted(self.coarse_bank)

    def seen_of_group(self, group_id: int) -> list[int]:
        return sorted(
            s for s in self.seen_species if self.taxonomy.parent(s) == group_id
        )

    def svm_identities(self) -> list[tuple[str, int]]:
        out: list[tuple[str, int]] = [("coarse", g) for g in self.groups()]
        for g in self.groups():
            out.extend(("fine", s) for s in sorted(self.fine_banks.get(g, {})))
        return out

    def num_svms(self) -> int:
        return len(self.coarse_bank) + sum(len(b) for b in self.fine_banks.values())

    def _check_dim(self, d: int):
        if self._dim is None:
            self._dim = int(d)
        elif self._dim != d:
            raise ValidationError(f"feature dimension {d} != model dimension {self._dim}")

    # -- training --------------------------------------------------------

    def train_coarse(
        self,
        data: Dataset,
        params: _svm.SolverParams = _svm.SolverParams(),
        seed: int = 0,
    ):
        """Refit the whole coarse bank (one-vs-all per group present in data)."""
        if data.taxonomy != self.taxonomy:
            raise TaxonomyError("dataset was built against a different taxonomy")
        self._check_dim(data.dim)
        x = np.asarray(data.features, dtype=np.float64)
        present = sorted(data.group_set())
        if len(present) < 2:
            only = present[0] if present else None
            raise DegenerateProblemError(
                f"coarse bank needs rows from at least two groups (got {only})"
            )
        for g in present:
            y = np.where(data.group_id == g, 1.0, -1.0)
            npos = int((y > 0).sum())
            nneg = y.shape[0] - npos
            pw = (nneg / npos) if params.class_weighted else 1.0
            prob = _svm.SvmProblem(x, y, c=params.c, pos_weight=pw, neg_weight=1.0)
            model = _svm.train(
                prob,
                tol=params.tol,
                max_iter=params.max_iter,
                seed=_svm.mix_seed(seed, _COARSE_TAG, g),
                identity=("coarse", g),
            )
            self.coarse_bank[g] = _svm.calibrate(model, x, y)

    def expand_fine(
        self,
        group_id: int,
        new_data: Dataset,
        replay: Dataset | None = None,
        params: _svm.SolverParams = _svm.SolverParams(),
        seed: int = 0,
    ):
        """Add this group's newly arrived species and refit its fine bank.

        ``new_data`` holds the arriving species' frames and ``replay`` the
        remembered frames of previously seen classes; rows from other
        groups are ignored in both. Every same-group SVM is refit against
        the enlarged sibling set; other groups' banks are left untouched —
        byte-identical on disk.
        """
        if not 0 <= group_id < self.taxonomy.num_groups:
            raise TaxonomyError(f"unknown group id {group_id}")
        for ds in (new_data,) if replay is None else (new_data, replay):
            if ds.taxonomy != self.taxonomy:
                raise TaxonomyError("dataset was built against a different taxonomy")
            self._check_dim(ds.dim)
        mask = new_data.group_id == group_id
        if not mask.any():
            raise ValidationError(f"no rows for group {group_id} in expansion data")
        new_species = sorted(int(s) for s in np.unique(new_data.species_id[mask]))
        stale = [s for s in new_species if s in self.seen_species]
        if stale:
            raise DuplicateClassError(
                f"species {stale} were already seen; pass replayed frames"
                " via the replay dataset"
            )
        for s in new_species:
            if self.taxonomy.parent(s) != group_id:
                raise TaxonomyError(
                    f"species {s} belongs to group {self.taxonomy.parent(s)},"
                    f" not {group_id}"
                )
        x_parts = [np.asarray(new_data.features[mask], dtype=np.float64)]
        sp_parts = [new_data.species_id[mask]]
        if replay is not None and len(replay):
            rmask = replay.group_id == group_id
            unseen = set(int(s) for s in np.unique(replay.species_id[rmask])) - self.seen_species
            if unseen:
                raise ValidationError(
                    f"replay contains never-seen species {sorted(unseen)}"
                )
            if rmask.any():
                x_parts.append(np.asarray(replay.features[rmask], dtype=np.float64))
                sp_parts.append(replay.species_id[rmask])
        self.seen_species.update(new_species)
        known = self.seen_of_group(group_id)
        bank = self.fine_banks.setdefault(group_id, {})
        if len(known) < 2:
            return  # single-species group: routing passes the group decision through
        x = np.concatenate(x_parts, axis=0)
        sp = np.concatenate(sp_parts)
        for s in known:
            y = np.where(sp == s, 1.0, -1.0)
            npos = int((y > 0).sum())
            nneg = y.shape[0] - npos
            if npos == 0 or nneg == 0:
                if s in bank:
                    warnings.warn(
                        f"species {s} absent from this view; keeping its previous SVM",
                        stacklevel=2,
                    )
                    continue
                warnings.warn(
                    f"species {s} has a one-sided view; installing a zero-margin SVM",
                    stacklevel=2,
                )
                bank[s] = _svm.CalibratedSvm(
                    weights=np.zeros(self._dim), bias=0.0, identity=("fine", s)
                )
                continue
            pw = (nneg / npos) if params.class_weighted else 1.0
            prob = _svm.SvmProblem(x, y, c=params.c, pos_weight=pw, neg_weight=1.0)
            model = _svm.train(
                prob,
                tol=params.tol,
                max_iter=params.max_iter,
                seed=_svm.mix_seed(seed, _FINE_TAG, s),
                identity=("fine", s),
            )
            bank[s] = _svm.calibrate(model, x, y)

    # -- prediction ------------------------------------------------------

    def _require_trained(self):
        if not self.coarse_bank or not self.seen_species:
            raise ValidationError("model has no trained SVMs yet")

    def predict_batch(self, xs) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Coarse-then-fine decisions for a feature matrix.

        Returns (group_ids, group_confidences, species_ids,
        species_confidences), one entry per row. Argmax ties break to the
        lowest class id (numpy argmax keeps the first maximum; columns are
        ordered by id).
        """
        self._require_trained()
        xs = np.asarray(xs, dtype=np.float64)
        if xs.ndim != 2 or xs.shape[1] != self._dim:
            raise ValidationError(f"expected (n, {self._dim}) matrix, got {xs.shape}")
        n = xs.shape[0]
        groups = self.groups()
        gconf = np.empty((n, len(groups)))
        for col, g in enumerate(groups):
            gconf[:, col] = self.coarse_bank[g].confidences(xs)
        gcol = np.argmax(gconf, axis=1)
        group_ids = np.asarray(groups, dtype=np.int64)[gcol]
        group_conf = gconf[np.arange(n), gcol]
        species_ids = np.empty(n, dtype=np.int64)
        species_conf = np.empty(n)
        for col, g in enumerate(groups):
            rows = np.nonzero(gcol == col)[0]
            if rows.size == 0:
                continue
            known = self.seen_of_group(g)
            if not known:
                raise ValidationError(f"group {g} has a coarse SVM but no species")
            if len(known) == 1:
                species_ids[rows] = known[0]
                species_conf[rows] = group_conf[rows]
                continue
            bank = self.fine_banks[g]
            sconf = np.empty((rows.size, len(known)))
            for scol, s in enumerate(known):
                sconf[:, scol] = bank[s].confidences(xs[rows])
            scolmax = np.argmax(sconf, axis=1)
            species_ids[rows] = np.asarray(known, dtype=np.int64)[scolmax]
            species_conf[rows] = sconf[np.arange(rows.size), scolmax]
        return group_ids, group_conf, species_ids, species_conf

    def predict_image(self, x) -> HierPrediction:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1:
            raise ValidationError("predict_image takes a single feature vector")
        g, gc, s, sc = self.predict_batch(x[None, :])
        return HierPrediction(int(g[0]), float(gc[0]), int(s[0]), float(sc[0]))

    def predict_video(self, frames) -> HierPrediction:
        """Majority vote over per-frame decisions.

        The modal group wins first (ties: higher mean group confidence, then
        lower id). Species are then voted among the frames that chose the
        modal group, with the same tie policy on the species votes. Reported
        confidences are means over the frames behind each decision.
        """
        frames = np.asarray(frames, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[0] < 1:
            raise ValidationError("predict_video takes a non-empty (k, d) matrix")
        g, gc, s, sc = self.predict_batch(frames)
        win_g = _vote(g, gc)
        in_modal = g == win_g
        win_s = _vote(s[in_modal], sc[in_modal])
        return HierPrediction(
            group_id=int(win_g),
            group_confidence=float(gc[in_modal].mean()),
            species_id=int(win_s),
            species_confidence=float(sc[in_modal & (s == win_s)].mean()),
        )

    # -- persistence -----------------------------------------------------

    def to_lines(self) -> list[str]:
        self._require_trained()
        t = self.taxonomy
        lines = [MODEL_HEADER, f"dim {self._dim}"]
        lines.append(f"groups {t.num_groups}")
        for g, name in enumerate(t.group_names):
            lines.append(f"g {g} {name}")
        lines.append(f"species {t.num_species}")
        for s, name in enumerate(t.species_names):
            lines.append(f"s {s} {name} {t.parent(s)}")
        seen = sorted(self.seen_species)
        lines.append("seen " + " ".join(str(s) for s in [len(seen)] + seen))
        lines.append(f"coarse {len(self.coarse_bank)}")
        for g in self.groups():
            lines.extend(_svm_lines(f"c {g}", self.coarse_bank[g]))
        fine = [(s, g) for g in self.groups() for s in sorted(self.fine_banks.get(g, {}))]
        lines.append(f"fine {len(fine)}")
        for s, g in fine:
            lines.extend(_svm_lines(f"f {s} {g}", self.fine_banks[g][s]))
        return lines

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(self.to_lines()) + "\n")

    @classmethod
    def from_lines(cls, lines: list[str]) -> "HierarchicalModel":
        cur = _Cursor(lines)
        if cur.take() != MODEL_HEADER:
            raise FormatError(f"expected '{MODEL_HEADER}' header")
        dim = _int(cur.fields("dim", 1)[0])
        if dim < 1:
            raise FormatError("dim must be >= 1")
        ngroups = _int(cur.fields("groups", 1)[0])
        group_names = []
        for g in range(ngroups):
            f = cur.fields("g", 2)
            if _int(f[0]) != g:
                raise FormatError(f"group ids must be dense, got {f[0]} at {g}")
            group_names.append(f[1])
        nspecies = _int(cur.fields("species", 1)[0])
        species_names, species_group = [], []
        for s in range(nspecies):
            f = cur.fields("s", 3)
            if _int(f[0]) != s:
                raise FormatError(f"species ids must be dense, got {f[0]} at {s}")
            species_names.append(f[1])
            species_group.append(_int(f[2]))
        taxonomy = Taxonomy(tuple(group_names), tuple(species_names), tuple(species_group))
        seen_fields = cur.take().split()
        if len(seen_fields) < 2 or seen_fields[0] != "seen":
            raise FormatError("expected 'seen' line")
        nseen = _int(seen_fields[1])
        seen = [_int(v) for v in seen_fields[2:]]
        if len(seen) != nseen:
            raise FormatError("seen count does not match the listed ids")
        model = cls(taxonomy)
        model._dim = dim
        model.seen_species = set(seen)
        ncoarse = _int(cur.fields("coarse", 1)[0])
        for _ in range(ncoarse):
            f = cur.fields("c", 1)
            g = _int(f[0])
            if not 0 <= g < ngroups:
                raise FormatError(f"coarse SVM for unknown group {g}")
            model.coarse_bank[g] = _svm_from_cursor(cur, dim, ("coarse", g))
        nfine = _int(cur.fields("fine", 1)[0])
        for _ in range(nfine):
            f = cur.fields("f", 2)
            s, g = _int(f[0]), _int(f[1])
            if not 0 <= s < nspecies or taxonomy.parent(s) != g:
                raise FormatError(f"fine SVM ({s}, {g}) contradicts the taxonomy")
            model.fine_banks.setdefault(g, {})[s] = _svm_from_cursor(cur, dim, ("fine", s))
        if cur.remaining():
            raise FormatError("trailing content after the fine bank")
        for s in model.seen_species:
            if not 0 <= s < nspecies:
                raise FormatError(f"seen species {s} not in the taxonomy")
        return model

    @classmethod
    def load(cls, path) -> "HierarchicalModel":
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        return cls.from_lines(lines)


def _vote(ids: np.ndarray, conf: np.ndarray) -> int:
    """Winner of a majority vote: count, then mean confidence, then low id."""
    best = None
    for v in np.unique(ids):  # unique() is sorted, so low id wins residual ties
        sel = ids == v
        key = (int(sel.sum()), float(conf[sel].mean()))
        if best is None or key > best[0]:
            best = (key, int(v))
    return best[1]


def _svm_lines(head: str, model: _svm.CalibratedSvm) -> list[str]:
    w = " ".join(repr(float(v)) for v in model.weights)
    return [
        head,
        f"w {model.dim} {w}",
        f"b {repr(model.bias)}",
        f"ab {repr(model.cal_a)} {repr(model.cal_b)}",
    ]


def _int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise FormatError(f"expected an integer, got {text!r}") from None


class _Cursor:
    def __init__(self, lines: list[str]):
        self._lines = lines
        self._pos = 0

    def take(self) -> str:
        if self._pos >= len(self._lines):
            raise FormatError("unexpected end of model file")
        line = self._lines[self._pos]
        self._pos += 1
        return line

    def fields(self, tag: str, count: int) -> list[str]:
        parts = self.take().split()
        if not parts or parts[0] != tag or len(parts) != count + 1:
            raise FormatError(f"expected '{tag}' line with {count} fields")
        return parts[1:]

    def remaining(self) -> bool:
        return self._pos < len(self._lines)


def _svm_from_cursor(cur: _Cursor, dim: int, identity: tuple[str, int]) -> _svm.CalibratedSvm:
    wparts = cur.take().split()
    if len(wparts) != dim + 2 or wparts[0] != "w" or _int(wparts[1]) != dim:
        raise FormatError("malformed weight line")
    try:
        weights = np.array([float(v) for v in wparts[2:]], dtype=np.float64)
        bias = float(cur.fields("b", 1)[0])
        a, b = (float(v) for v in cur.fields("ab", 2))
    except ValueError as exc:
        raise FormatError(f"non-numeric model coefficient: {exc}") from None
    if not np.all(np.isfinite(weights)) or not np.isfinite(bias):
        raise FormatError("non-finite model coefficient")
    return _svm.CalibratedSvm(weights=weights, bias=bias, cal_a=a, cal_b=b, identity=identity)
