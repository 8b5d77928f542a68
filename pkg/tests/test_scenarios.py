import numpy as np
import pytest

from stlccp.formula import And, Eventually, Or, formula_length
from stlccp.pipeline import prepare
from stlccp.robustness import HorizonError, Trajectory, eval_robustness_rev
from stlccp.scenarios import (BUNDLED, Region, ScenarioError, build_scenario_spec,
                              bundled, from_dict, load, loads, region_inside,
                              region_outside, resolve, save, to_dict)
from stlccp.cli import read_trajectory_csv
from stlccp.robustness import eval_robustness_orig
from stlccp.scenarios import data_path
from stlccp.systems import Box, double_integrator
from stlccp.tree import tree_stats

UNIT = Region("U", 0.0, 1.0, 0.0, 1.0)


def at(px, py):
    return Trajectory.from_states([[px, py, 0.0, 0.0]], 2)


def test_double_integrator():
    s = double_integrator()
    assert np.array_equal(s.A, [[1, 0, 1, 0], [0, 1, 0, 1], [0, 0, 1, 0], [0, 0, 0, 1]])
    assert np.array_equal(s.B, [[0, 0], [0, 0], [1, 0], [0, 1]])
    assert np.array_equal(s.step([0, 0, 1, 0], [0, 0]), [1, 0, 1, 0])
    assert np.array_equal(s.step([0, 0, 0, 0], [1, 0]), [0, 0, 1, 0])


def test_region_margins():
    assert eval_robustness_rev(region_inside(UNIT), at(0.5, 0.5)) == -0.5
    assert eval_robustness_rev(region_inside(UNIT), at(2.0, 0.5)) == 1.0
    assert eval_robustness_rev(region_outside(UNIT), at(2.0, 0.5)) == -1.0
    assert eval_robustness_rev(region_inside(UNIT), at(1.0, 0.5)) == 0.0


def test_region_validation():
    with pytest.raises(ScenarioError):
        Region("bad", 1.0, 0.0, 0.0, 1.0)
    with pytest.raises(ScenarioError):
        Region("bad", 0.0, 1.0, 0.0, 1.0, "Lake")


def test_many_target_structure():
    s = bundled("many_target").with_horizon(30)
    f = build_scenario_spec(s)
    assert isinstance(f, And) and len(f.args) == 6
    for g in f.args[:5]:
        assert isinstance(g, Or) and all(isinstance(e, Eventually) and (e.t1, e.t2) == (0, 30)
                                         for e in g.args)
    assert f.args[5].t2 == 30


def test_two_target_nesting():
    s = bundled("two_target").with_horizon(10)
    f = build_scenario_spec(s)
    ev = f.args[0]
    assert isinstance(ev, Eventually) and (ev.t1, ev.t2) == (0, 5)
    assert all((a.t1, a.t2) == (0, 5) for a in ev.arg.args)
    assert formula_length(f) == 10
    with pytest.raises(HorizonError):
        build_scenario_spec(s.with_horizon(5))


def test_door_puzzle_uses_until():
    from stlccp.formula import Until
    f = build_scenario_spec(bundled("door_puzzle"))
    assert sum(isinstance(a, Until) for a in f.args) == 2


def test_custom_template_passthrough():
    from stlccp.parser import parse_formula
    d = to_dict(bundled("two_target"))
    d.update(template="custom", formula="F[0,T] inside(G) & G[0,T] outside(O)", T=12)
    s = from_dict(d)
    regions = {r.name: (region_inside(r), region_outside(r)) for r in s.regions}
    assert build_scenario_spec(s) == parse_formula(s.formula, 4, regions=regions, horizon=12)


def test_missing_region_and_bad_files(tmp_path):
    d = to_dict(bundled("two_target"))
    d["regions"] = [r for r in d["regions"] if r["name"] != "G"]
    with pytest.raises(ScenarioError):
        build_scenario_spec(from_dict(d))
    with pytest.raises(ScenarioError):
        loads("{not json")
    with pytest.raises(ScenarioError):
        loads("[1, 2]")
    with pytest.raises(ScenarioError):
        from_dict({"template": "two_target"})
    with pytest.raises(ScenarioError):
        resolve(str(tmp_path / "nope.json"))


@pytest.mark.parametrize("name", BUNDLED)
def test_round_trip(name, tmp_path):
    s = bundled(name)
    save(s, tmp_path / "s.json")
    assert load(tmp_path / "s.json") == s
    assert resolve(name) == s and resolve(f"{name}.json") == s


@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_defaults(name):
    s = bundled(name)
    Q, R, wq = s.quad_cost
    assert np.array_equal(Q, np.diag([0, 0, 1, 1])) and np.array_equal(R, np.eye(2)) and wq == 0.001
    assert s.bounds == Box((0, 0, -2, -2), (10, 10, 2, 2), (-1, -1), (1, 1))
    assert s.x0[2:] == (0.0, 0.0) and s.pin_mask.all()


@pytest.mark.parametrize("name", BUNDLED)
def test_concave_count_matches_formula(name):
    prep = prepare(bundled(name))
    # disjunctive nodes counted independently of the decomposition
    assert len(prep.program.concave_constraints) == tree_stats(prep.tree).n_disj > 0


@pytest.mark.parametrize("name", BUNDLED)
def test_witness_satisfies(name):
    s = bundled(name)
    traj = read_trajectory_csv(data_path(f"{name}_witness.csv"), 4, 2)
    assert traj.horizon == s.T
    assert eval_robustness_orig(build_scenario_spec(s), traj) >= 0
    assert s.bounds.contains(traj.states, traj.inputs)
    assert np.allclose(s.system.rollout(s.x0, traj.inputs), traj.states, atol=1e-6)


def test_free_velocity_mask():
    d = to_dict(bundled("two_target"))
    d["pin_velocity"] = False
    s = from_dict(d)
    assert s.pin_mask.tolist() == [True, True, False, False]
    prep = prepare(s)
    assert prep.program.eq_origin.count("init") == 2
