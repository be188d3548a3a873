import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog

from jointseg import ilp_io
from jointseg.ilp_solver import (BRUTE_FORCE_LIMIT, IlpProblem, InfeasibleError, Row, _lp_result, blocks,
                                 brute_force_ilp, lp_relax, solve_ilp)
from jointseg.image_model import DataError


def _row(idx, coef, rel, rhs):
    return Row(np.array(idx), np.array(coef, dtype=float), rel, rhs)


def random_problem(rng, m, n_rows=None):
    """Rows shaped like the assignment program: 0/1 packing rows and +-1 balance rows."""
    c = np.round(rng.normal(0, 2, m), 3)
    rows = []
    for _ in range(rng.integers(1, m + 2) if n_rows is None else n_rows):
        k = int(rng.integers(1, min(m, 5) + 1))
        idx = np.sort(rng.choice(m, k, replace=False))
        if rng.uniform() < 0.5:
            rows.append(Row(idx, np.ones(k), "le", 1.0))
        else:
            rows.append(Row(idx, rng.choice([-1.0, 1.0], k), "eq", float(rng.integers(0, 2))))
    return IlpProblem(c, rows)


def test_box_only_lp():
    x, bound = lp_relax(IlpProblem([-1.0, 2.0]))
    assert np.allclose(x, [1, 0]) and bound == pytest.approx(-1)


def test_packing_row_lp():
    p = IlpProblem([-1.0, -1.0], [_row([0, 1], [1, 1], "le", 1)])
    x, bound = lp_relax(p)
    assert bound == pytest.approx(-1)
    assert x.sum() == pytest.approx(1) and p.feasible(x)


def test_nonnegative_costs_give_zero():
    p = IlpProblem([1.0, 0.5, 2.0], [_row([0, 1], [1, -1], "eq", 0), _row([1, 2], [1, 1], "le", 1)])
    x, bound = lp_relax(p)
    assert np.allclose(x, 0) and bound == 0


def test_lp_infeasible():
    p = IlpProblem([0.0], [_row([0], [1], "eq", 2)])
    with pytest.raises(InfeasibleError):
        lp_relax(p)


def test_solve_examples():
    s = solve_ilp(IlpProblem([-1.0, -2.0], [_row([0, 1], [1, 1], "le", 1)]))
    assert list(s.assignment) == [0, 1] and s.objective == -2 and s.status == "optimal"
    s = solve_ilp(IlpProblem([-3.0, 1.0], [_row([0, 1], [1, -1], "eq", 0)]))
    assert list(s.assignment) == [1, 1] and s.objective == -2
    s = solve_ilp(IlpProblem(np.zeros(0)))
    assert s.objective == 0 and s.status == "optimal" and s.assignment.size == 0


def test_brute_force_examples():
    s = brute_force_ilp(IlpProblem([0.0]))
    assert list(s.assignment) == [0] and s.status == "optimal"
    contradiction = IlpProblem([1.0], [_row([0], [1], "eq", 0), _row([0], [1], "eq", 1)])
    assert brute_force_ilp(contradiction).status == "infeasible"
    assert solve_ilp(contradiction).status == "infeasible"
    with pytest.raises(ValueError):
        brute_force_ilp(IlpProblem(np.zeros(BRUTE_FORCE_LIMIT + 1)))


def test_fractional_root_needs_branching():
    # odd cycle of pairwise packing rows: LP optimum is all one half
    rows = [_row([i, (i + 1) % 3], [1, 1], "le", 1) for i in range(3)]
    p = IlpProblem([-1.0, -1.0, -1.0], rows)
    x, bound = lp_relax(p)
    assert bound == pytest.approx(-1.5)
    s = solve_ilp(p)
    assert s.objective == -1 and s.node_count > 0
    assert list(s.assignment) == list(brute_force_ilp(p).assignment)


def test_ties_resolve_lexicographically():
    p = IlpProblem([-1.0, -1.0, -1.0], [_row([0, 1, 2], [1, 1, 1], "le", 1)])
    assert list(solve_ilp(p).assignment) == [0, 0, 1]
    assert list(brute_force_ilp(p).assignment) == [0, 0, 1]


def test_blocks_split_independent_parts():
    p = IlpProblem(np.zeros(5), [_row([0, 3], [1, 1], "le", 1), _row([1], [1], "le", 1)])
    assert [list(b) for b in blocks(p)] == [[0, 3], [1], [2], [4]]


@given(st.integers(0, 10**6), st.integers(1, 12))
def test_solver_matches_brute_force(seed, m):
    p = random_problem(np.random.default_rng(seed), m)
    got, want = solve_ilp(p), brute_force_ilp(p)
    assert got.status == want.status
    if want.status == "optimal":
        assert got.objective == want.objective
        assert p.feasible(got.assignment) and p.feasible(want.assignment)
        assert list(got.assignment) == list(want.assignment)


@given(st.integers(0, 10**6), st.integers(1, 14))
def test_lp_bound_below_ilp(seed, m):
    p = random_problem(np.random.default_rng(seed), m)
    s = solve_ilp(p)
    if s.status != "optimal":
        return
    x, bound = lp_relax(p)
    assert bound <= s.objective + 1e-9
    assert p.feasible(x, tol=1e-7)
    assert np.all(x >= -1e-9) and np.all(x <= 1 + 1e-9)
    if np.allclose(x, np.round(x), atol=1e-9):
        assert s.objective == pytest.approx(bound, abs=1e-9) and s.node_count == 0


@given(st.integers(0, 10**6))
def test_solver_is_deterministic(seed):
    p = random_problem(np.random.default_rng(seed), 14)
    a, b = solve_ilp(p), solve_ilp(p)
    assert list(a.assignment) == list(b.assignment)
    assert a.node_count == b.node_count and a.objective == b.objective


def test_row_validation():
    with pytest.raises(ValueError):
        Row(np.array([0, 1]), np.array([1.0]), "le", 1)
    with pytest.raises(ValueError):
        Row(np.array([0]), np.array([1.0]), "ge", 1)
    with pytest.raises(ValueError):
        IlpProblem([0.0], [_row([1], [1], "le", 1)])


def test_text_format_round_trip():
    p = IlpProblem([-1.5, 0.0, 0.1 + 0.2], [_row([0, 1], [1, 1], "le", 1), _row([0, 2], [1, -1], "eq", 0)])
    text = ilp_io.dumps(p)
    assert text == ("vars 3\nvar 0 -1.5\nvar 1 0.0\nvar 2 0.30000000000000004\n"
                    "row le 1.0 0:1.0 1:1.0\nrow eq 0.0 0:1.0 2:-1.0\n")
    q = ilp_io.loads(text)
    assert np.array_equal(q.c, p.c) and ilp_io.dumps(q) == text


@given(st.integers(0, 10**6))
def test_text_format_preserves_solutions(seed):
    p = random_problem(np.random.default_rng(seed), 9)
    q = ilp_io.loads(ilp_io.dumps(p))
    assert solve_ilp(q).objective == solve_ilp(p).objective or solve_ilp(p).status == "infeasible"


@pytest.mark.parametrize("text", ["", "var 0 1.0\n", "vars 2\nvar 5 1.0\n", "vars 1\nrow ge 1 0:1\n",
                                  "vars 1\nrow le 1 3:1\n", "vars 1\nfoo\n", "vars x\n"])
def test_text_format_errors(text):
    with pytest.raises(DataError):
        ilp_io.loads(text)


def test_text_format_comments_and_annotations():
    p = ilp_io.loads("# header\nvars 2\nvar 0 -1.0 appear E>0  # note\nvar 1 2.0 disappear 0>E\nrow le 1 0:1\n")
    assert list(p.c) == [-1.0, 2.0] and len(p.rows) == 1


def _linprog(p, lower, upper):
    a, eq, b = p.matrix()
    a = a.toarray()
    res = linprog(p.c, A_ub=a[~eq] if (~eq).any() else None, b_ub=b[~eq] if (~eq).any() else None,
                  A_eq=a[eq] if eq.any() else None, b_eq=b[eq] if eq.any() else None,
                  bounds=list(zip(lower, upper)), method="highs")
    return res


@given(st.integers(0, 10**6), st.integers(1, 30))
def test_lp_value_matches_independent_solver(seed, m):
    rng = np.random.default_rng(seed)
    p = random_problem(rng, m)
    # random partial fixings, as inside branch-and-bound
    lower, upper = np.zeros(m), np.ones(m)
    fix = rng.uniform(size=m) < 0.2
    val = rng.integers(0, 2, m).astype(float)
    lower[fix] = upper[fix] = val[fix]
    ref = _linprog(p, lower, upper)
    try:
        res = _lp_result(p, lower, upper)
    except InfeasibleError:
        assert ref.status == 2
        return
    assert ref.status == 0
    assert res.objective == pytest.approx(ref.fun, abs=1e-7)
    assert p.feasible(res.x, 1e-7)
    assert np.all(res.x >= lower - 1e-9) and np.all(res.x <= upper + 1e-9)
    # reduced costs certify optimality: nonbasic at lower >= 0, at upper <= 0
    d, nb = res.reduced_costs, ~res.basic & (upper > lower)
    assert np.all(d[nb & (res.x <= lower + 1e-9)] >= -1e-7)
    assert np.all(d[nb & (res.x >= upper - 1e-9)] <= 1e-7)


def test_lp_value_on_assignment_problem():
    from jointseg.config import PipelineConfig
    from jointseg.pipeline import build_model, load_inputs
    from jointseg.synthetic_data import SyntheticSpec

    cfg = PipelineConfig(synthetic=SyntheticSpec(seed=2, leak_prob=0.5, separation=2.0), lambda_n_count=12)
    p = build_model(cfg, load_inputs(cfg)).problem
    lower, upper = np.zeros(p.m), np.ones(p.m)
    res = _lp_result(p, lower, upper)
    assert res.objective == pytest.approx(_linprog(p, lower, upper).fun, abs=1e-7)
