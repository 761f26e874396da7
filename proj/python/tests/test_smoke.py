import json
import math
import pathlib

import pytest

import mvplan

SCENARIOS = pathlib.Path(__file__).resolve().parents[2] / "data" / "scenarios"


def test_load_scenario_fills_defaults():
    sc = mvplan.load_scenario(SCENARIOS / "freeway_2av.json")
    assert sc["id"] == "freeway_2av"
    again = mvplan.load_scenario(sc)
    assert again == sc


def test_bad_scenario_raises():
    with pytest.raises(mvplan.MvplanError):
        mvplan.load_scenario(SCENARIOS / "missing.json")
    with pytest.raises(mvplan.MvplanError):
        mvplan.load_scenario("{not json")


def test_decide_two_vehicles():
    out = mvplan.decide(SCENARIOS / "freeway_2av.json", seed=1)
    assert len(out["vehicles"]) == 2
    assert all(len(v["actions"]) == 7 for v in out["vehicles"])
    assert out == mvplan.decide(SCENARIOS / "freeway_2av.json", seed=1)


def test_pruning_shrinks_the_root():
    a = mvplan.decide(SCENARIOS / "freeway_2av.json", iterations=200)
    b = mvplan.decide(SCENARIOS / "freeway_2av.json", iterations=200, pruning=False)
    assert a["root_combinations"] < b["root_combinations"]


def test_simulate_lone_vehicle():
    run = mvplan.simulate(SCENARIOS / "single_vehicle.json", seed=0, mode="decision-only")
    assert run["metrics"]["success"] is True
    assert run["metrics"]["mode"] == "decision-only"
    assert {"tick", "vehicle_id", "x", "y"} <= set(run["rows"][0])
    again = mvplan.simulate(SCENARIOS / "single_vehicle.json", seed=0, mode="decision-only")
    assert again["log_csv"] == run["log_csv"]


def test_unknown_mode():
    with pytest.raises(mvplan.MvplanError):
        mvplan.simulate(SCENARIOS / "single_vehicle.json", mode="fast")


def test_weights():
    w = mvplan.default_weights()
    assert set(w) >= {"aggressive", "normal", "conservative"}
    json.dumps(w)


def test_geometry_helpers():
    assert mvplan.fit_quintic([0, 0, 0], [1, 0, 0], 1.0) == pytest.approx([0, 0, 0, 10, -15, 6], abs=1e-9)
    assert mvplan.flow_reward([1.0, 0.0], [0.0, 0.0]) == pytest.approx(0.5)
    path = mvplan.ReferencePath([[0, 0], [100, 0]])
    assert path.length == pytest.approx(100.0)
    x, y, v, theta = path.to_cartesian(40.0, 3.5, s_dot=10.0)
    s, d, s_dot, d_dot = path.to_frenet(x, y, v, theta)
    assert (s, d) == pytest.approx((40.0, 3.5))
    assert math.isclose(s_dot, 10.0)
