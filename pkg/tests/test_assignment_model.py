import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from jointseg.assignment_model import (APPEAR, CONTINUATION, DISAPPEAR, END, MERGE, SPLIT, CostModel,
                                       CostParams, build_constraints, enumerate_assignments,
                                       likelihood_term, set_difference_mean_corrected)
from jointseg.component_forest import ComponentForest, Hypothesis, build_forest, stack_forests
from jointseg.image_model import SegmentationParams
from jointseg.segmentation import parametric_sweep
from oracles import likelihood, sym_diff_shifted

SHAPE = (12, 12)


def _hyp(hid, z, cells, shape=SHAPE):
    pix = np.array(sorted(r * shape[1] + c for r, c in cells), dtype=np.int64)
    return Hypothesis(hid, z, pix, shape, 0.0)


def _forest(slices, parents=None, shape=SHAPE):
    """``slices`` is a list (per slice) of lists of cell sets."""
    hyps, parent, hid = {}, {}, 0
    for z, cells in enumerate(slices):
        for c in cells:
            hyps[hid] = _hyp(hid, z, c, shape)
            parent[hid] = None
            hid += 1
    parent.update(parents or {})
    return ComponentForest(shape, len(slices), hyps, parent)


def _square(r, c, n=2):
    return {(r + i, c + j) for i in range(n) for j in range(n)}


def _model(forest, params, seed=0):
    rng = np.random.default_rng(seed)
    probs = rng.uniform(0.05, 0.95, (forest.depth,) + forest.shape)
    image = rng.uniform(0, 1, (forest.depth,) + forest.shape)
    return CostModel(forest, probs, image, 0.2, params), probs, image


def test_likelihood_single_pixel_data_part():
    probs = np.full((3, 3), 0.9)
    image = np.zeros((3, 3))
    mask = np.zeros((3, 3), bool)
    mask[1, 1] = True
    boundary = 4 + 4 / math.sqrt(2)
    assert likelihood_term(mask, probs, image, 0.1) == pytest.approx(math.log(0.1) - math.log(0.9) + boundary)
    assert math.log(0.1) - math.log(0.9) == pytest.approx(-2.1972, abs=1e-4)


def test_likelihood_neutral_probability_counts_boundary_weights():
    probs = np.full((6, 6), 0.5)
    image = np.zeros((6, 6))
    cells = _square(2, 2)
    # a 2x2 block has 8 axial and 12 diagonal pairs leaving it
    expected = likelihood(cells, probs, image, 0.1)
    got = likelihood_term(np.array([[r, c] for r, c in cells]), probs, image, 0.1)
    assert got == pytest.approx(expected)
    assert got == pytest.approx(8 * 1 + 12 / math.sqrt(2))


def test_likelihood_of_whole_neutral_slice_is_zero():
    probs = np.full((4, 4), 0.5)
    assert likelihood_term(np.ones((4, 4), bool), probs, np.random.default_rng(0).uniform(size=(4, 4)), 0.1) == 0


@given(st.integers(0, 10**6), st.floats(0.05, 0.5))
def test_likelihood_matches_loop_oracle(seed, sigma):
    rng = np.random.default_rng(seed)
    probs = rng.uniform(0.01, 0.99, (7, 7))
    image = rng.uniform(0, 1, (7, 7))
    mask = rng.uniform(size=(7, 7)) < 0.4
    if not mask.any():
        mask[3, 3] = True
    cells = {tuple(map(int, rc)) for rc in np.argwhere(mask)}
    assert likelihood_term(mask, probs, image, sigma) == pytest.approx(likelihood(cells, probs, image, sigma))


def test_set_difference_examples():
    a = _square(1, 1, 3)
    b = {(r + 5, c + 4) for r, c in a}
    assert set_difference_mean_corrected(_hyp(0, 0, a), _hyp(1, 0, b)) == 0
    one = {(4, 4)}
    two = {(4, 4), (4, 5)}
    assert set_difference_mean_corrected(_hyp(0, 0, one), _hyp(1, 0, two)) == 1
    assert set_difference_mean_corrected(_hyp(0, 0, a), _hyp(1, 0, a)) == 0
    with pytest.raises(ValueError):
        set_difference_mean_corrected(np.zeros((0, 2)), np.array([[1, 1]]))


@given(st.integers(0, 10**6))
def test_set_difference_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    a = {tuple(map(int, rc)) for rc in rng.integers(0, 9, (rng.integers(1, 12), 2))}
    b = {tuple(map(int, rc)) for rc in rng.integers(0, 9, (rng.integers(1, 12), 2))}
    got = set_difference_mean_corrected(np.array(sorted(a)), np.array(sorted(b)))
    assert got == sym_diff_shifted(a, b)


def test_continuation_examples():
    sq = _square(3, 3)
    f = _forest([[sq], [sq]])
    zero_l = CostParams(theta_l=0, theta_p=1, theta_s=1, theta_bp=1, theta_bs=1, theta_e=1)
    cm, _, _ = _model(f, zero_l)
    assert cm.continuation(0, 1) == 0
    f = _forest([[sq], [{(r + 3, c) for r, c in sq}]])
    only_p = CostParams(theta_l=0, theta_p=1, theta_s=0, theta_bp=0, theta_bs=0, theta_e=0)
    cm, _, _ = _model(f, only_p)
    assert cm.continuation(0, 1) == pytest.approx(9.0)
    cm, _, _ = _model(f, CostParams(0, 0, 0, 0, 0, 0))
    assert cm.continuation(0, 1) == 0


def test_continuation_likelihood_is_summed_per_slice():
    f = _forest([[_square(2, 2)], [_square(2, 3)]])
    params = CostParams(theta_l=1.0, theta_p=0.0, theta_s=0.0, theta_bp=0, theta_bs=0, theta_e=0)
    cm, probs, image = _model(f, params)
    want = (likelihood(_square(2, 2), probs[0], image[0], 0.2)
            + likelihood(_square(2, 3), probs[1], image[1], 0.2))
    assert cm.continuation(0, 1) == pytest.approx(want)


def test_continuation_preconditions():
    f = _forest([[_square(0, 0)], [_square(9, 9)]])
    cm, _, _ = _model(f, CostParams(d_max=3.0))
    with pytest.raises(ValueError):
        cm.continuation(0, 1)
    f = _forest([[_square(0, 0), _square(5, 5)]])
    cm, _, _ = _model(f, CostParams())
    with pytest.raises(ValueError):
        cm.continuation(0, 1)


def test_concentric_congruent_split_is_free():
    parent = {(r, c) for r in range(3, 5) for c in range(2, 8)}
    left = {(r, c) for r in range(3, 5) for c in range(2, 5)}
    right = {(r, c) for r in range(3, 5) for c in range(5, 8)}
    f = _forest([[parent], [left, right]])
    cm, _, _ = _model(f, CostParams(theta_l=0, theta_p=5, theta_s=5, theta_bp=5, theta_bs=5, theta_e=5))
    assert cm.split(0, 1, 2) == 0


def test_merge_mirrors_split():
    a = _square(2, 2)
    b = _square(2, 6)
    ab = _square(2, 3, 3)
    params = CostParams(theta_l=0.7, theta_p=0.3, theta_s=0.2, theta_bp=0.4, theta_bs=0.05, theta_e=0.1)
    split_f = _forest([[ab], [a, b]])
    merge_f = _forest([[a, b], [ab]])
    rng = np.random.default_rng(5)
    probs = rng.uniform(0.05, 0.95, (2,) + SHAPE)
    image = rng.uniform(0, 1, (2,) + SHAPE)
    cs = CostModel(split_f, probs, image, 0.2, params)
    cm = CostModel(merge_f, probs[::-1], image[::-1], 0.2, params)
    assert cm.merge(0, 1, 2) == pytest.approx(cs.split(0, 1, 2), abs=1e-12)


@given(st.integers(0, 10**6))
def test_split_matches_term_by_term_oracle(seed):
    rng = np.random.default_rng(seed)
    r0, c0 = rng.integers(2, 6, 2)
    i_cells = _square(int(r0), int(c0), 3)
    j_cells = _square(int(r0) - 1, int(c0) - 1, 2)
    k_cells = _square(int(r0) + 2, int(c0) + 2, 2)
    f = _forest([[i_cells], [j_cells, k_cells]])
    th = rng.uniform(0, 2, 6)
    params = CostParams(*th)
    cm, probs, image = _model(f, params, seed)
    union = j_cells | k_cells
    d = np.mean(list(i_cells), axis=0) - np.mean(list(union), axis=0)
    want = (th[0] * (likelihood(i_cells, probs[0], image[0], 0.2) + likelihood(union, probs[1], image[1], 0.2))
            + th[3] * float(d @ d) + th[4] * sym_diff_shifted(i_cells, union) ** 2)
    assert cm.split(0, 1, 2) == pytest.approx(want)
    assert cm.split(0, 2, 1) == pytest.approx(cm.split(0, 1, 2), abs=1e-12)


def test_split_rejects_overlapping_targets():
    f = _forest([[_square(2, 2)], [_square(2, 2), _square(2, 3)]])
    cm, _, _ = _model(f, CostParams())
    with pytest.raises(ValueError):
        cm.split(0, 1, 2)


def test_end_cost_examples():
    f = _forest([[_square(1, 1)], [_square(1, 1)]])
    cm, _, _ = _model(f, CostParams(theta_l=0, theta_e=1))
    assert cm.end(0, APPEAR) == 16
    cm, _, _ = _model(f, CostParams(theta_l=0, theta_e=0))
    assert cm.end(0, DISAPPEAR) == 0


def test_free_boundary_only_at_stack_ends():
    f = _forest([[_square(1, 1)], [_square(1, 1)], [_square(1, 1)]])
    cm, _, _ = _model(f, CostParams(theta_l=0, theta_e=1, free_boundary=True))
    assert cm.end(0, APPEAR) == 0 and cm.end(0, DISAPPEAR) == 16
    assert cm.end(1, APPEAR) == cm.end(1, DISAPPEAR) == 16
    assert cm.end(2, DISAPPEAR) == 0 and cm.end(2, APPEAR) == 16


def test_cost_params_validation():
    with pytest.raises(ValueError):
        CostParams(theta_s=-1)
    with pytest.raises(ValueError):
        CostParams(d_max=0)


def test_single_hypothesis_has_two_variables():
    f = _forest([[_square(1, 1)]])
    cm, _, _ = _model(f, CostParams())
    v = enumerate_assignments(f, cm)
    assert [x.kind for x in v] == [APPEAR, DISAPPEAR]
    assert v[0].sources == (END,) and v[1].targets == (END,)


def test_two_slices_one_hypothesis_each():
    f = _forest([[_square(1, 1)], [_square(2, 2)]])
    cm, _, _ = _model(f, CostParams())
    v = enumerate_assignments(f, cm)
    assert len(v) == 5
    assert sorted(x.kind for x in v) == sorted([APPEAR, APPEAR, DISAPPEAR, DISAPPEAR, CONTINUATION])


def test_far_hypotheses_are_not_linked():
    f = _forest([[_square(0, 0)], [_square(9, 9), _square(0, 9)]])
    cm, _, _ = _model(f, CostParams(d_max=5.0))
    kinds = {x.kind for x in enumerate_assignments(f, cm)}
    assert kinds == {APPEAR, DISAPPEAR}


def test_appear_and_disappear_costs_agree():
    f = _forest([[_square(1, 1), _square(6, 6)], [_square(2, 2)]])
    cm, _, _ = _model(f, CostParams(theta_e=0.3))
    v = enumerate_assignments(f, cm)
    app = {x.targets[0]: x.cost for x in v if x.kind == APPEAR}
    dis = {x.sources[0]: x.cost for x in v if x.kind == DISAPPEAR}
    assert app == dis


def test_isolated_hypothesis_constraints():
    f = _forest([[_square(1, 1)]])
    cm, _, _ = _model(f, CostParams())
    v = enumerate_assignments(f, cm)
    cs = build_constraints(f, v)
    assert cs.path_rows == [[0]]
    assert cs.flow_rows == [(0, [0], [1])]
    p = cs.to_problem([x.cost for x in v])
    assert p.feasible(np.array([1, 1])) and not p.feasible(np.array([1, 0]))


def test_parent_and_child_share_a_path_row():
    outer = _square(1, 1, 4)
    inner = _square(2, 2, 2)
    f = _forest([[outer, inner]], parents={1: 0})
    cm, _, _ = _model(f, CostParams())
    v = enumerate_assignments(f, cm)
    cs = build_constraints(f, v)
    appear = {x.targets[0]: x.index for x in v if x.kind == APPEAR}
    assert cs.path_rows == [sorted([appear[0], appear[1]])]


def test_dangling_variable_rejected():
    from jointseg.assignment_model import AssignmentVariable
    f = _forest([[_square(1, 1)]])
    with pytest.raises(KeyError):
        build_constraints(f, [AssignmentVariable(0, APPEAR, (END,), (7,), 0.0)])


def _sweep_forest(seed, depth=3, size=14):
    rng = np.random.default_rng(seed)
    forests = []
    for _ in range(depth):
        probs = rng.uniform(0.02, 0.98, (size, size))
        for _ in range(2):
            probs = (probs + np.roll(probs, 1, 0) + np.roll(probs, 1, 1)) / 3
        sweep = parametric_sweep(probs, rng.uniform(size=(size, size)), SegmentationParams(1, 0.3, 0.2),
                                 lambdas=np.linspace(1.0, -1.0, 5))
        forests.append(build_forest(sweep))
    return stack_forests(forests), rng


@given(st.integers(0, 10**6))
def test_random_system_structure(seed):
    f, rng = _sweep_forest(seed)
    probs = rng.uniform(0.05, 0.95, (f.depth,) + f.shape)
    image = rng.uniform(size=(f.depth,) + f.shape)
    params = CostParams(*rng.uniform(0, 1, 6), d_max=6.0)
    cm = CostModel(f, probs, image, 0.2, params)
    v = enumerate_assignments(f, cm)
    assert [x.index for x in v] == list(range(len(v)))
    assert all(math.isfinite(x.cost) for x in v)
    keys = [(x.kind, x.sources, x.targets) for x in v]
    assert len(set(keys)) == len(keys)
    for x in v:
        hs = [f[h] for h in x.hypotheses]
        if x.kind == CONTINUATION:
            assert hs[1].slice == hs[0].slice + 1
        if x.kind in (SPLIT, MERGE):
            assert len(set(x.hypotheses)) == 3 and not f.related(*(x.targets if x.kind == SPLIT else x.sources))
        for a in hs:
            for b in hs:
                if a.slice != b.slice:
                    assert np.hypot(*(a.centroid - b.centroid)) <= params.d_max + 1e-9
    cs = build_constraints(f, v)
    incoming = {h: {x.index for x in v if h in x.targets} for h in f.hyps}
    # hypotheses sharing a path row are exactly the overlapping ones
    for i in f.hyps:
        for j in f.hyps:
            if i < j and f[i].slice == f[j].slice:
                together = any(incoming[i] <= set(r) and incoming[j] <= set(r) for r in cs.path_rows)
                assert together == f[i].overlaps(f[j])
    for h, inc, out in cs.flow_rows:
        assert set(inc) == incoming[h]
        assert set(out) == {x.index for x in v if h in x.sources}


def test_split_targets_swapped_cost_equal_on_random_forest():
    f, rng = _sweep_forest(11)
    probs = rng.uniform(0.05, 0.95, (f.depth,) + f.shape)
    image = rng.uniform(size=(f.depth,) + f.shape)
    cm = CostModel(f, probs, image, 0.2, CostParams(0.5, 0.5, 0.5, 0.5, 0.5, 0.5, d_max=8))
    for x in enumerate_assignments(f, cm):
        if x.kind == SPLIT:
            i, (j, k) = x.sources[0], x.targets
            assert cm.split(i, k, j) == pytest.approx(x.cost, abs=1e-12)
