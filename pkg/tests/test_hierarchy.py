import math

import numpy as np
import pytest

import hierlearn as hl
from hierlearn import (
    DegenerateProblemError,
    DuplicateClassError,
    FormatError,
    HierarchicalModel,
    SolverParams,
    TaxonomyError,
    ValidationError,
)
from hierlearn.hierarchy import _svm_lines

from conftest import flat_taxonomy, make_dataset, mk_svm


def manual_model(tax, dim, coarse, fine=None, seen=None):
    """Assemble a model from hand-built SVMs (no training involved)."""
    m = HierarchicalModel(tax)
    m._dim = dim
    m.coarse_bank.update(coarse)
    for g, bank in (fine or {}).items():
        m.fine_banks[g] = dict(bank)
    if seen is None:
        seen = set()
        for g in coarse:
            bank = (fine or {}).get(g)
            seen |= set(bank) if bank else set(tax.species_of(g))
    m.seen_species.update(seen)
    return m


def two_group_line():
    """Two single-species groups split by the sign of the only feature."""
    tax = flat_taxonomy((1, 1))
    return manual_model(
        tax, 1, {0: mk_svm([1.0]), 1: mk_svm([-1.0])}
    )


def grouped_plane():
    """dim 2: coord 0 separates the groups, coord 1 the species of group 0."""
    tax = flat_taxonomy((2, 1))
    return manual_model(
        tax,
        2,
        {0: mk_svm([1.0, 0.0]), 1: mk_svm([-1.0, 0.0])},
        fine={0: {0: mk_svm([0.0, 1.0]), 1: mk_svm([0.0, -1.0])}},
    )


def sigma(m):
    return 1.0 / (1.0 + math.exp(-m))


# -- image-level decisions ----------------------------------------------------


def test_boundary_tie_routes_to_the_lowest_group():
    m = two_group_line()
    p = m.predict_image([0.0])
    assert p.group_id == 0 and p.species_id == 0
    assert p.group_confidence == pytest.approx(0.5)
    # single-species group: the species decision is the group decision
    assert p.species_confidence == p.group_confidence


def test_pass_through_groups_inherit_the_group_confidence():
    m = two_group_line()
    p = m.predict_image([-2.0])
    assert p.group_id == 1 and p.species_id == 1
    assert p.group_confidence == pytest.approx(sigma(2.0))
    assert p.species_confidence == p.group_confidence


def test_fine_stage_only_consults_the_winning_group():
    m = grouped_plane()
    p = m.predict_image([1.0, -3.0])
    assert (p.group_id, p.species_id) == (0, 1)
    assert p.species_confidence == pytest.approx(sigma(3.0))
    p = m.predict_image([-1.0, 99.0])  # coord 1 is irrelevant in group 1
    assert (p.group_id, p.species_id) == (1, 2)


def test_batch_matches_a_bruteforce_argmax_oracle(tiny_run):
    model = tiny_run["model"]
    rng = np.random.default_rng(17)
    pts = rng.normal(scale=4.0, size=(500, model.dim))
    g_pred, g_conf, s_pred, s_conf = model.predict_batch(pts)
    for i in range(500):
        x = pts[i]
        best_g, best_gc = None, -1.0
        for g in model.groups():  # ascending id: strict > keeps the lowest
            svm = model.coarse_bank[g]
            margin = sum(float(svm.weights[j]) * float(x[j]) for j in range(model.dim))
            margin += svm.bias
            conf = 1.0 / (1.0 + math.exp(svm.cal_a * margin + svm.cal_b))
            if conf > best_gc:
                best_g, best_gc = g, conf
        assert g_pred[i] == best_g
        assert g_conf[i] == pytest.approx(best_gc, rel=1e-9)
        known = model.seen_of_group(best_g)
        if len(known) == 1:
            assert s_pred[i] == known[0] and s_conf[i] == g_conf[i]
            continue
        best_s, best_sc = None, -1.0
        for s in known:
            svm = model.fine_banks[best_g][s]
            margin = sum(float(svm.weights[j]) * float(x[j]) for j in range(model.dim))
            margin += svm.bias
            conf = 1.0 / (1.0 + math.exp(svm.cal_a * margin + svm.cal_b))
            if conf > best_sc:
                best_s, best_sc = s, conf
        assert s_pred[i] == best_s
        assert s_conf[i] == pytest.approx(best_sc, rel=1e-9)


def test_argmax_survives_feature_rescaling_without_biases():
    # every margin scales linearly when b=0, and the calibrated map is
    # monotone, so uniform rescaling cannot change any argmax
    rng = np.random.default_rng(3)
    tax = flat_taxonomy((2, 2, 1))
    coarse = {g: mk_svm(rng.normal(size=3)) for g in range(3)}
    fine = {
        0: {0: mk_svm(rng.normal(size=3)), 1: mk_svm(rng.normal(size=3))},
        1: {2: mk_svm(rng.normal(size=3)), 3: mk_svm(rng.normal(size=3))},
    }
    m = manual_model(tax, 3, coarse, fine)
    pts = rng.normal(size=(200, 3))
    g0, _, s0, _ = m.predict_batch(pts)
    for scale in (0.5, 2.0, 7.0):
        g, _, s, _ = m.predict_batch(scale * pts)
        assert np.array_equal(g, g0) and np.array_equal(s, s0)


# -- video-level decisions ----------------------------------------------------


def test_video_majority_wins():
    m = grouped_plane()
    frames = np.array([[1.0, 1.0], [1.0, 2.0], [1.0, -1.0]])
    p = m.predict_video(frames)  # species votes: 0, 0, 1
    assert (p.group_id, p.species_id) == (0, 0)
    assert p.species_confidence == pytest.approx((sigma(1.0) + sigma(2.0)) / 2)
    assert p.group_confidence == pytest.approx(sigma(1.0))


def test_video_group_vote_excludes_minority_frames():
    m = grouped_plane()
    frames = np.array([[1.0, 1.0], [1.0, 1.0], [-4.0, 1.0]])
    p = m.predict_video(frames)
    assert p.group_id == 0
    # the stray group-1 frame contributes to neither confidence
    assert p.group_confidence == pytest.approx(sigma(1.0))
    assert p.species_id == 0


def test_video_vote_tie_takes_higher_mean_confidence():
    m = grouped_plane()
    frames = np.array([[1.0, 2.0], [1.0, 2.0], [1.0, -1.0], [1.0, -1.0]])
    p = m.predict_video(frames)  # 2-2 split; species 0 is more confident
    assert p.species_id == 0
    frames = np.array([[1.0, 1.0], [1.0, 1.0], [1.0, -2.0], [1.0, -2.0]])
    p = m.predict_video(frames)  # now species 1 is, and it beats the lower id
    assert p.species_id == 1
    assert p.species_confidence == pytest.approx(sigma(2.0))


def test_video_full_tie_takes_the_lowest_id():
    m = grouped_plane()
    frames = np.array([[1.0, 1.0], [1.0, 1.0], [1.0, -1.0], [1.0, -1.0]])
    assert m.predict_video(frames).species_id == 0
    m2 = two_group_line()
    p = m2.predict_video(np.array([[1.0], [-1.0]]))  # 1-1 group tie, equal conf
    assert p.group_id == 0


def test_single_frame_video_equals_the_image_decision(tiny_run):
    model = tiny_run["model"]
    test = tiny_run["test"]
    for i in (0, 3, 7):
        x = test.features[i].astype(np.float64)
        img = model.predict_image(x)
        vid = model.predict_video(x[None, :])
        assert img == vid


def test_video_is_invariant_to_frame_order(tiny_run):
    model = tiny_run["model"]
    rng = np.random.default_rng(5)
    frames = rng.normal(scale=3.0, size=(9, model.dim))
    base = model.predict_video(frames)
    for _ in range(4):
        p = model.predict_video(frames[rng.permutation(9)])
        assert (p.group_id, p.species_id) == (base.group_id, base.species_id)
        assert p.group_confidence == pytest.approx(base.group_confidence, rel=1e-12)
        assert p.species_confidence == pytest.approx(base.species_confidence, rel=1e-12)


def test_predict_input_validation(tiny_run):
    model = tiny_run["model"]
    with pytest.raises(ValidationError):
        model.predict_image(np.zeros((2, model.dim)))
    with pytest.raises(ValidationError):
        model.predict_video(np.zeros((0, model.dim)))
    with pytest.raises(ValidationError):
        model.predict_batch(np.zeros((3, model.dim + 1)))
    with pytest.raises(ValidationError):
        HierarchicalModel(flat_taxonomy()).predict_image(np.zeros(2))


# -- training flow ------------------------------------------------------------


def line_data(tax, species_at, n=6, dim=2, fish_base=0):
    """n frames per species, tightly clustered at the given 2-d centers."""
    rows = []
    fish = fish_base
    for s, center in species_at.items():
        for k in range(n):
            jitter = 0.01 * ((k % 3) - 1)
            rows.append((fish, k, s, (center[0] + jitter, center[1] + jitter)))
        fish += 1
    return make_dataset(tax, rows, dim=dim)


def test_train_coarse_covers_every_present_group(tiny_run):
    train = tiny_run["train"]
    model = HierarchicalModel(train.taxonomy)
    model.train_coarse(train, seed=0)
    assert model.groups() == sorted(train.group_set())
    for g in model.groups():
        svm = model.coarse_bank[g]
        assert svm.identity == ("coarse", g)
        assert svm.fit is not None and svm.fit.converged
        assert svm.cal_a < 0


def test_train_coarse_is_seed_deterministic(tiny_run):
    train = tiny_run["train"]
    a = HierarchicalModel(train.taxonomy)
    b = HierarchicalModel(train.taxonomy)
    a.train_coarse(train, seed=9)
    b.train_coarse(train, seed=9)
    for g in a.groups():
        assert np.array_equal(a.coarse_bank[g].weights, b.coarse_bank[g].weights)
        assert a.coarse_bank[g].bias == b.coarse_bank[g].bias


def test_train_coarse_needs_two_groups():
    tax = flat_taxonomy((2, 2))
    ds = line_data(tax, {0: (0.0, 0.0), 1: (1.0, 1.0)})
    with pytest.raises(DegenerateProblemError):
        HierarchicalModel(tax).train_coarse(ds)


def test_expand_fine_lifecycle():
    tax = flat_taxonomy((2, 1))
    model = HierarchicalModel(tax)
    coarse = line_data(tax, {0: (-3.0, 0.0), 2: (3.0, 0.0)})
    model.train_coarse(coarse)
    # first arrival: a single species makes the group pass-through
    model.expand_fine(0, line_data(tax, {0: (-3.0, -2.0)}))
    assert model.seen_species == {0}
    assert model.fine_banks.get(0, {}) == {}
    assert model.predict_image([-3.0, -2.0]).species_id == 0
    # second arrival brings a sibling; old class rows come in as replay
    model.expand_fine(
        0,
        line_data(tax, {1: (-3.0, 2.0)}, fish_base=10),
        replay=line_data(tax, {0: (-3.0, -2.0)}),
    )
    assert model.seen_species == {0, 1}
    assert sorted(model.fine_banks[0]) == [0, 1]
    assert model.predict_image([-3.0, -2.0]).species_id == 0
    assert model.predict_image([-3.0, 2.0]).species_id == 1
    assert ("fine", 0) in model.svm_identities()


def test_expand_fine_rejects_bad_input():
    tax = flat_taxonomy((2, 1))
    model = HierarchicalModel(tax)
    model.train_coarse(line_data(tax, {0: (-3.0, 0.0), 2: (3.0, 0.0)}))
    s0 = line_data(tax, {0: (-3.0, -2.0)})
    model.expand_fine(0, s0)
    with pytest.raises(DuplicateClassError):
        model.expand_fine(0, s0)  # species 0 was already seen
    with pytest.raises(TaxonomyError):
        model.expand_fine(99, s0)
    with pytest.raises(ValidationError):
        model.expand_fine(1, s0)  # no group-1 rows in the data
    with pytest.raises(ValidationError):
        # replay may only carry classes the model has already seen
        model.expand_fine(
            0, line_data(tax, {1: (-3.0, 2.0)}), replay=line_data(tax, {1: (-3.0, 2.0)})
        )


def test_expand_fine_leaves_other_groups_byte_identical():
    tax = flat_taxonomy((3, 2))
    model = HierarchicalModel(tax)
    centers = {0: (-4.0, 0.0), 3: (4.0, 2.0), 4: (4.0, -2.0)}
    model.train_coarse(line_data(tax, centers))
    model.expand_fine(0, line_data(tax, {0: (-4.0, -1.0)}))
    model.expand_fine(1, line_data(tax, {3: (4.0, 2.0), 4: (4.0, -2.0)}, fish_base=5))
    before = {s: _svm_lines("f", model.fine_banks[1][s]) for s in (3, 4)}
    coarse_before = _svm_lines("c", model.coarse_bank[1])
    model.expand_fine(
        0,
        line_data(tax, {1: (-4.0, 1.0)}, fish_base=9),
        replay=line_data(tax, {0: (-4.0, -1.0)}),
    )
    for s in (3, 4):
        assert _svm_lines("f", model.fine_banks[1][s]) == before[s]
    assert _svm_lines("c", model.coarse_bank[1]) == coarse_before
    assert sorted(model.fine_banks[0]) == [0, 1]


# -- persistence --------------------------------------------------------------


def test_model_file_round_trip(tmp_path, tiny_run):
    model = tiny_run["model"]
    path = tmp_path / "m.txt"
    model.save(path)
    back = hl.HierarchicalModel.load(path)
    assert back.to_lines() == model.to_lines()
    assert back.taxonomy == model.taxonomy
    assert back.seen_species == model.seen_species
    rng = np.random.default_rng(2)
    pts = rng.normal(size=(40, model.dim))
    for a, b in zip(model.predict_batch(pts), back.predict_batch(pts)):
        assert np.array_equal(a, b)  # repr round-trip keeps every bit


def test_model_lines_reject_corruption(tiny_run):
    good = tiny_run["model"].to_lines()

    def broken(mutate):
        lines = list(good)
        mutate(lines)
        with pytest.raises(FormatError):
            HierarchicalModel.from_lines(lines)

    broken(lambda l: l.__setitem__(0, "hclmodel 9"))
    broken(lambda l: l.pop())  # truncated
    broken(lambda l: l.append("junk"))  # trailing content
    broken(lambda l: l.__setitem__(2, "groups zero"))
    # corrupt one stored weight
    widx = next(i for i, ln in enumerate(good) if ln.startswith("w "))
    broken(lambda l: l.__setitem__(widx, "w abc 0.0"))
    broken(lambda l: l.__setitem__(widx, good[widx].replace(" ", " inf ", 1)))


def test_untrained_model_cannot_serialize():
    with pytest.raises(ValidationError):
        HierarchicalModel(flat_taxonomy()).to_lines()
