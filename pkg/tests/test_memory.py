import math

import numpy as np
import pytest

import hierlearn as hl
from hierlearn import HardCase, MemoryStore, ValidationError, equal_split, herd_select
from hierlearn.memory import select_hard_cases

from conftest import flat_taxonomy, make_dataset, mk_svm
from test_hierarchy import manual_model


def greedy_reference(f, count):
    """Brute-force mean-matching selection with explicit loops."""
    f = np.asarray(f, dtype=np.float64)
    n, d = f.shape
    mu = f.mean(axis=0)
    total = np.zeros(d)
    chosen = []
    for k in range(1, count + 1):
        best_i, best_d = -1, None
        for i in range(n):
            if i in chosen:
                continue
            dist = 0.0
            for j in range(d):
                v = mu[j] - (total[j] + f[i, j]) / k
                dist += v * v
            if best_d is None or dist < best_d:
                best_i, best_d = i, dist
        chosen.append(best_i)
        total = total + f[best_i]
    return chosen


# -- herding ------------------------------------------------------------------


def test_three_point_herding_by_hand():
    # mean is (1, 0); the centered point goes first, then the tie at
    # distance 0.5 resolves to the lower row index
    f = np.array([[0.0, 0.0], [2.0, 0.0], [1.0, 0.0]])
    assert herd_select(f, 2).tolist() == [2, 0]
    assert herd_select(f, 3).tolist() == [2, 0, 1]


def test_singleton_input():
    assert herd_select(np.array([[3.5]]), 1).tolist() == [0]


def test_herding_matches_the_reference():
    rng = np.random.default_rng(0)
    for _ in range(25):
        n = int(rng.integers(1, 11))
        d = int(rng.integers(1, 5))
        f = rng.normal(size=(n, d))
        for count in range(1, n + 1):
            assert herd_select(f, count).tolist() == greedy_reference(f, count)


def test_herding_prefix_property():
    rng = np.random.default_rng(1)
    for _ in range(10):
        f = rng.normal(size=(12, 3))
        full = herd_select(f, 12).tolist()
        for count in range(1, 12):
            assert herd_select(f, count).tolist() == full[:count]


def test_herding_clamps_with_a_warning():
    f = np.array([[0.0], [1.0]])
    with pytest.warns(UserWarning, match="clamping"):
        picks = herd_select(f, 5)
    assert sorted(picks.tolist()) == [0, 1]


def test_herding_input_validation():
    with pytest.raises(ValidationError):
        herd_select(np.zeros((0, 2)), 1)
    with pytest.raises(ValidationError):
        herd_select(np.zeros((3, 2)), 0)
    with pytest.raises(ValidationError):
        herd_select(np.zeros(3), 1)


# -- budget arithmetic ----------------------------------------------------------


def test_equal_split_examples():
    assert equal_split(10, ["a"]) == {"a": 10}
    assert equal_split(10, list(range(20))) == {i: 1 if i < 10 else 0 for i in range(20)}
    split = equal_split(1800, list(range(31)))
    assert split[0] == 59 and split[1] == 59 and split[2] == 58
    assert sorted(set(split.values())) == [58, 59]
    assert sum(split.values()) == 1800
    assert equal_split(0, ["a", "b"]) == {"a": 0, "b": 0}
    assert equal_split(7, []) == {}
    with pytest.raises(ValidationError):
        equal_split(-1, ["a"])


def test_quotas_shrink_monotonically_as_classes_arrive():
    store = MemoryStore(hard_budget=0, exemplar_budget=100)
    prev = None
    for k in range(1, 30):
        quotas = store.exemplar_quotas(list(range(k)))
        if prev is not None:
            assert all(quotas[y] <= prev[y] for y in prev)
        prev = quotas


# -- hard-case selection --------------------------------------------------------


def hard_case_fixture():
    """One coarse SVM on a 1-d line with hand-placed confidences."""
    tax = flat_taxonomy((1, 1))
    model = manual_model(tax, 1, {0: mk_svm([1.0]), 1: mk_svm([-1.0])})

    def logit(p):
        return math.log(p / (1.0 - p))

    # group-0 rows whose group-0 confidence is exactly .9 .9 .1 .2
    rows = [(i, 0, 0, (logit(p),)) for i, p in enumerate((0.9, 0.9, 0.1, 0.2))]
    data = make_dataset(tax, rows, dim=1)
    return model, data


def test_lowest_true_side_confidence_wins():
    model, data = hard_case_fixture()
    pool = select_hard_cases(model, data, {("coarse", 0): 2})
    assert [hc.record.fish_id for hc in pool] == [2, 3]
    assert [round(hc.confidence, 6) for hc in pool] == [0.1, 0.2]
    assert all(hc.svm == ("coarse", 0) for hc in pool)


def test_negative_rows_score_by_one_minus_confidence():
    tax = flat_taxonomy((1, 1))
    model = manual_model(tax, 1, {0: mk_svm([1.0]), 1: mk_svm([-1.0])})
    # a group-1 row that the group-0 SVM finds confidently negative
    data = make_dataset(tax, [(0, 0, 0, (-4.0,)), (1, 0, 1, (-4.0,))], dim=1)
    pool = select_hard_cases(model, data, {("coarse", 0): 2})
    by_fish = {hc.record.fish_id: hc for hc in pool}
    # fish 0 is a positive at conf sigma(-4); fish 1 a negative at 1-sigma(-4)
    assert by_fish[0].confidence == pytest.approx(1.0 / (1.0 + math.exp(4.0)))
    assert by_fish[1].confidence == pytest.approx(1.0 - 1.0 / (1.0 + math.exp(4.0)))
    assert pool[0].record.fish_id == 0  # sorted by score, positive is harder


def test_fine_svms_only_see_their_group():
    tax = flat_taxonomy((2, 1))
    model = manual_model(
        tax,
        2,
        {0: mk_svm([1.0, 0.0]), 1: mk_svm([-1.0, 0.0])},
        fine={0: {0: mk_svm([0.0, 1.0]), 1: mk_svm([0.0, -1.0])}},
    )
    rows = [
        (0, 0, 0, (1.0, 0.1)),  # group 0, barely species 0
        (1, 0, 2, (-1.0, 0.0)),  # group 1: invisible to the fine SVMs
    ]
    data = make_dataset(tax, rows, dim=2)
    pool = select_hard_cases(model, data, {("fine", 0): 5, ("fine", 1): 5})
    assert {hc.record.fish_id for hc in pool} == {0}


def test_duplicate_claims_resolve_to_the_first_svm():
    model, data = hard_case_fixture()
    pool = select_hard_cases(model, data, {("coarse", 0): 2, ("coarse", 1): 4})
    claims = {}
    for hc in pool:
        key = hc.record.key
        assert key not in claims
        claims[key] = hc.svm
    # every frame claimed once; the coarse-0 picks kept their claimant
    assert claims[(2, 0)] == ("coarse", 0)
    assert claims[(3, 0)] == ("coarse", 0)
    assert len(pool) == 4


def test_zero_quota_selects_nothing():
    model, data = hard_case_fixture()
    assert select_hard_cases(model, data, {}) == []
    assert select_hard_cases(model, data, {("coarse", 0): 0}) == []


# -- the store ------------------------------------------------------------------


def record(fish, frame=0, species=0, group=0, dim=2, value=None):
    feat = np.full(dim, float(fish) if value is None else value, dtype=np.float32)
    return hl.FeatureRecord(fish, frame, group, species, feat)


def test_rebalance_respects_both_budgets():
    store = MemoryStore(hard_budget=3, exemplar_budget=4)
    svms = [("coarse", 0), ("coarse", 1)]
    hard = [
        HardCase(record(i), ("coarse", i % 2), confidence=0.1 * i) for i in range(6)
    ]
    store.rebalance(svms, hard, {0: [record(10), record(11), record(12)]})
    assert store.num_hard() <= 3
    assert store.num_exemplars() <= 4
    assert store.classes() == [0]
    assert [ex.rank for ex in store.exemplars_of(0)] == [1, 2, 3]
    # second task: class 1 arrives, quotas drop to 2 each, prefixes survive
    old = [ex.record.fish_id for ex in store.exemplars_of(0)]
    store.rebalance(svms, [], {1: [record(20), record(21)]})
    assert store.num_exemplars() <= 4
    assert [ex.record.fish_id for ex in store.exemplars_of(0)] == old[:2]
    assert [ex.record.fish_id for ex in store.exemplars_of(1)] == [20, 21]


def test_hard_lists_keep_the_lowest_scores():
    store = MemoryStore(hard_budget=2, exemplar_budget=0)
    ident = [("coarse", 0)]
    first = [
        HardCase(record(0), ident[0], 0.5),
        HardCase(record(1), ident[0], 0.3),
    ]
    store.rebalance(ident, first)
    harder = [HardCase(record(2), ident[0], 0.1)]
    store.rebalance(ident, harder)
    kept = store.hard_cases_of(ident[0])
    assert [hc.record.fish_id for hc in kept] == [2, 1]  # 0.1 then 0.3


def test_rebalance_rejects_inconsistent_input():
    store = MemoryStore(hard_budget=2, exemplar_budget=2)
    store.rebalance([("coarse", 0)], [], {0: [record(0)]})
    with pytest.raises(ValidationError):
        store.rebalance([], [])  # roster must stay a superset
    with pytest.raises(ValidationError):
        store.rebalance([("coarse", 0)], [HardCase(record(1), ("fine", 9), 0.2)])
    with pytest.raises(ValidationError):
        store.rebalance([("coarse", 0)], [], {0: [record(2)]})  # class re-admitted
    with pytest.raises(ValidationError):
        MemoryStore(-1, 0)


def test_zero_quota_classes_still_dilute_the_split():
    store = MemoryStore(hard_budget=0, exemplar_budget=3)
    store.rebalance([], [], {0: [record(0), record(1), record(2)]})
    assert store.num_exemplars() == 3
    # two more classes arrive; one gets quota 1, and class 2's empty list
    # still counts toward the divisor
    store.rebalance([], [], {1: [record(10)], 2: []})
    assert store.classes() == [0, 1, 2]
    assert [len(store.exemplars_of(y)) for y in (0, 1, 2)] == [1, 1, 0]


def test_training_view_deduplicates_by_frame():
    store = MemoryStore(hard_budget=4, exemplar_budget=4)
    shared = record(5, 0, species=0)
    store.rebalance(
        [("coarse", 0)],
        [HardCase(shared, ("coarse", 0), 0.2), HardCase(record(6), ("coarse", 0), 0.4)],
        {0: [shared, record(7)]},
    )
    view = store.training_view()
    keys = [r.key for r in view]
    assert len(keys) == len(set(keys)) == 3
    assert keys == sorted(keys)
    assert store.num_hard() + store.num_exemplars() >= len(view)


def test_snapshot_is_stable_and_complete():
    store = MemoryStore(hard_budget=2, exemplar_budget=2)
    store.rebalance(
        [("coarse", 0)],
        [HardCase(record(1), ("coarse", 0), 0.25)],
        {0: [record(2)], 1: [record(3)]},
    )
    lines = store.to_lines()
    assert lines[0] == "hclmemory 1"
    assert lines[1] == "budgets 2 2"
    assert lines == store.to_lines()  # deterministic
    assert any(ln.startswith("h coarse 0 1 0") for ln in lines)
    assert sum(1 for ln in lines if ln.startswith("e ")) == store.num_exemplars()


def test_snapshot_file_round_trip_text(tmp_path):
    store = MemoryStore(hard_budget=1, exemplar_budget=1)
    store.rebalance([("coarse", 0)], [HardCase(record(1), ("coarse", 0), 1 / 3)])
    path = tmp_path / "mem.txt"
    store.save(path)
    text = path.read_text()
    assert text.endswith("\n")
    assert repr(1 / 3) in text  # float stored with full precision
