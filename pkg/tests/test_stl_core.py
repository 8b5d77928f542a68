import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import corpus
from stlccp.formula import (Always, And, Eventually, FormulaError, Or, Pred,
                            Predicate, Until, depth, formula_length, from_json,
                            to_json)
from stlccp.parser import ParseError, parse_formula
from stlccp.robustness import (HorizonError, Trajectory, eval_robustness_orig,
                               eval_robustness_rev, satisfies)
from stlccp.smoothers import ExactMin, LseMin, Mellowmin
from stlccp.tree import NodeKind, build_tree, eval_tree, tree_stats

MU = Pred(Predicate((1.0,), 1.0, "mu"))          # x <= 1
X = Trajectory.from_states([[0.0], [0.5], [2.0]])
CORPUS = corpus(200, seed=11)


def pred1(label, n=1):
    return Pred(Predicate((1.0,) + (0.0,) * (n - 1), 0.0, label))


# formula length ------------------------------------------------------------

def test_formula_length_examples():
    assert formula_length(MU) == 0
    assert formula_length(Always(0, 5, MU)) == 5
    assert formula_length(And((Always(1, 3, MU), Eventually(0, 7, MU)))) == 7
    assert formula_length(Until(1, 4, Always(0, 2, MU), MU)) == 6


def test_interval_validation():
    with pytest.raises(FormulaError):
        Always(3, 1, MU)
    with pytest.raises(FormulaError):
        Eventually(-1, 2, MU)


def test_json_round_trip():
    for f, _ in CORPUS[:50]:
        assert from_json(json.loads(json.dumps(to_json(f)))) == f


# parser --------------------------------------------------------------------

def test_parse_always():
    f = parse_formula("G[0,5] (x0 <= 1.0)", 1)
    assert isinstance(f, Always) and (f.t1, f.t2) == (0, 5)
    assert f.arg.pred.a == (1.0,) and f.arg.pred.b == 1.0


def test_parse_precedence():
    names = {"A": pred1("A"), "B": pred1("B")}
    f = parse_formula("F[0,10] A | B", 1, names=names)
    assert isinstance(f, Or)
    assert f.args[0] == Eventually(0, 10, names["A"]) and f.args[1] == names["B"]
    g = parse_formula("A & B | A", 1, names=names)
    assert isinstance(g, Or) and isinstance(g.args[0], And)


def test_parse_until():
    names = {"A": pred1("A"), "B": pred1("B")}
    assert parse_formula("A U[0,4] B", 1, names=names) == Until(0, 4, names["A"], names["B"])


def test_parse_ge_and_negation():
    f = parse_formula("x0 >= 2", 1)
    assert f.pred.a == (-1.0,) and f.pred.b == -2.0
    g = parse_formula("!(x0 <= 2)", 1)
    assert g.pred.a == (-1.0,) and g.pred.b == -2.0


def test_parse_regions_and_horizon_symbol():
    from stlccp.scenarios import Region, region_inside, region_outside
    r = Region("R", 0, 1, 0, 1)
    regions = {"R": (region_inside(r, 2), region_outside(r, 2))}
    f = parse_formula("G[0,T] outside(R) & F[0,T-2] inside(R)", 2,
                      regions=regions, horizon=8)
    assert f.args[0] == Always(0, 8, region_outside(r, 2))
    assert f.args[1] == Eventually(0, 6, region_inside(r, 2))
    assert parse_formula("!inside(R)", 2, regions=regions) == region_outside(r, 2)


@pytest.mark.parametrize("text", ["G[0,5 x0 <= 1", "x0 <=", "G[3,1] x0 <= 1",
                                  "inside(Q)", "x5 <= 1", "A U[0,2]", ""])
def test_parse_errors(text):
    with pytest.raises(ParseError):
        parse_formula(text, 1, names={"A": pred1("A")}, regions={})


def test_parse_error_has_position():
    with pytest.raises(ParseError) as exc:
        parse_formula("x0 <= 1 & & x0 >= 0", 1)
    assert exc.value.pos is not None


# robustness ----------------------------------------------------------------

def test_orig_examples():
    assert eval_robustness_orig(Always(0, 2, MU), X) == -1.0
    assert eval_robustness_orig(Eventually(0, 2, MU), X) == 1.0
    assert eval_robustness_orig(MU, X) == 1.0


def test_rev_examples():
    assert eval_robustness_rev(Always(0, 2, MU), X, 0, ExactMin()) == 1.0
    assert eval_robustness_rev(Eventually(0, 2, MU), X, 0, ExactMin()) == -1.0


def test_horizon_error():
    with pytest.raises(HorizonError):
        eval_robustness_orig(Always(0, 3, MU), X)
    with pytest.raises(HorizonError):
        eval_robustness_rev(Always(0, 1, MU), X, t=2)


def test_nonpositive_k_rejected():
    with pytest.raises(ValueError):
        eval_robustness_rev(Eventually(0, 2, MU), X, 0, Mellowmin(0.0))


def test_until_standard_semantics():
    # phi1 = x <= 1 holds at t = 0, 1; phi2 = x >= 2 first holds at t = 2
    phi2 = Pred(Predicate((-1.0,), -2.0))
    f = Until(0, 2, MU, phi2)
    rho = eval_robustness_orig(f, X)
    # max over t' of min(rho2(t'), min_{t''<=t'} rho1(t'')) = min(0, 1, 0.5, -1) at t'=2
    expect = max(min(-2.0, 1.0), min(-1.5, 1.0, 0.5), min(0.0, 1.0, 0.5, -1.0))
    assert rho == expect


def test_until_modes_differ_somewhere():
    rng = np.random.default_rng(0)
    f = Until(0, 3, Pred(Predicate((1.0,), 0.0)), Pred(Predicate((-1.0,), 0.0)))
    diffs = 0
    for _ in range(50):
        tr = Trajectory.from_states(rng.normal(size=(4, 1)))
        diffs += eval_robustness_orig(f, tr) != eval_robustness_orig(f, tr, until="literal")
    assert diffs > 0


def test_rev_is_negated_orig_on_corpus():
    for f, tr in CORPUS:
        for until in ("standard", "literal"):
            assert eval_robustness_rev(f, tr, 0, ExactMin(), until) == \
                -eval_robustness_orig(f, tr, 0, until)


def test_soundness_and_completeness_against_boolean_checker():
    for f, tr in CORPUS:
        rho = eval_robustness_orig(f, tr)
        sat = satisfies(f, tr)
        if rho > 0:
            assert sat
        if rho < 0:
            assert not sat
        if sat:
            assert rho >= 0


@pytest.mark.parametrize("k", [1.0, 10.0, 1000.0])
def test_mellow_over_approximates_rev(k):
    for f, tr in CORPUS:
        assert eval_robustness_rev(f, tr, 0, Mellowmin(k)) >= eval_robustness_rev(f, tr) - 1e-12


@pytest.mark.parametrize("k", [10.0, 1000.0])
def test_mellow_error_bound_depth_arity(k):
    for f, tr in CORPUS:
        s = tree_stats(build_tree(f))
        exact = eval_robustness_rev(f, tr)
        smooth = eval_robustness_rev(f, tr, 0, Mellowmin(k))
        if s.max_min_arity:
            assert smooth - exact <= s.min_depth * np.log(s.max_min_arity) / k + 1e-12


def test_lse_under_approximates_rev():
    for f, tr in CORPUS[:50]:
        assert eval_robustness_rev(f, tr, 0, LseMin(10.0)) <= eval_robustness_rev(f, tr) + 1e-12


def test_boundary_counts_as_satisfied():
    tr = Trajectory.from_states([[1.0]])
    assert eval_robustness_orig(MU, tr) == 0.0
    assert satisfies(MU, tr)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=4, max_size=4), st.floats(-3, 3))
def test_translation_on_predicates(xs, c):
    # shifting the threshold by c shifts the robustness of a temporal formula by c
    tr = Trajectory.from_states(np.array(xs)[:, None])
    f0 = Eventually(0, 2, Always(0, 1, Pred(Predicate((1.0,), 0.0))))
    f1 = Eventually(0, 2, Always(0, 1, Pred(Predicate((1.0,), c))))
    assert np.isclose(eval_robustness_orig(f1, tr), eval_robustness_orig(f0, tr) + c)


# trees ---------------------------------------------------------------------

def fig2(T, n=1):
    A, B, C, D, E, F = (pred1(c, n) for c in "ABCDEF")
    return And((And((Or((A, Eventually(1, T, B))), Always(1, T, C))),
                Or((And((D, E)), F))))


def test_fig2_tree_counts():
    for T in (3, 5, 20):
        tree = build_tree(fig2(T))
        s = tree_stats(tree)
        assert s.n_disj == 3 and s.n_leaves == 2 * T + 4
        kinds = [n.kind for n in tree.walk() if not n.is_leaf]
        # the always-node over C is a max node of its own, so four max nodes
        assert kinds.count(NodeKind.MAX) == 4 and kinds.count(NodeKind.MIN) == 3


def test_leaf_and_always_trees():
    tree = build_tree(MU, t0=2)
    assert tree.is_leaf and tree.t == 2
    tr = build_tree(Always(0, 2, MU))
    assert tr.kind is NodeKind.MAX and tr.steps == (0, 1, 2)
    assert [c.t for c in tr.children] == [0, 1, 2]
    assert tree_stats(tree).n_disj == 0 and tree_stats(tree).n_leaves == 1


def test_tree_eval_matches_semantics():
    for f, tr in CORPUS:
        for until in ("standard", "literal"):
            tree = build_tree(f, until=until)
            assert eval_tree(tree, tr.states) == eval_robustness_rev(f, tr, 0, ExactMin(), until)
            assert np.isclose(eval_tree(tree, tr.states, Mellowmin(10.0)),
                              eval_robustness_rev(f, tr, 0, Mellowmin(10.0), until),
                              rtol=0, atol=1e-12)


def test_leaf_counts_additive():
    for f, _ in CORPUS[:60]:
        tree = build_tree(f)
        s = tree_stats(tree)
        if not tree.is_leaf:
            ids = {id(n): i for i, n in enumerate(tree.walk())}
            assert sum(s.leaf_count_per_node[ids[id(c)]] for c in tree.children) == \
                s.leaf_count_per_node[0] == s.n_leaves


def test_build_tree_horizon_check():
    with pytest.raises(HorizonError):
        build_tree(Always(0, 5, MU), horizon=4)


def test_depth_bound_in_corpus():
    assert max(depth(f) for f, _ in CORPUS) <= 4
    assert max(tr.horizon for _, tr in CORPUS) <= 12
