import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hndpv import benders, costs
from hndpv.bnc import OPTIMAL
from hndpv.costs import Assignment
from hndpv.general import (
    build_gbsp, conservation_rhs, extract_general_cut, general_oracle, routable, separate_general,
    solve_general,
)
from hndpv.instance import CapacityMode, Instance, NetworkMode, VehicleConfig, euclidean, random_instance
from hndpv.lp import Infeasible, Optimal, is_certificate, solve


def relay_instance():
    """Three hubs on a line; two flows into the far hub consolidate best through the middle one."""
    coords = np.array([[0, 0], [5, 0.5], [10, 0], [0, 0.1], [10, 0.1]], float)
    w = np.zeros((5, 5))
    w[3, 4] = 100
    w[1, 4] = 100
    w[4, 3] = 50
    return Instance(
        flow=w, distance=euclidean(coords), fixed_cost=np.full(3, 10.0), capacity=np.full(3, np.inf),
        vehicle=VehicleConfig(600, 100, 100, 260), coords=coords, hub_candidates=(0, 1, 2),
        network=NetworkMode.GENERAL, name="relay",
    )


def t3_point(t3):
    return Assignment((0, 1, 1)).x_matrix(t3)


def test_gbsp_dimensions(t3):
    sub = build_gbsp(t3_point(t3), np.zeros((3, 3)), t3.flow, 100)
    assert sub.lp.num_rows == 9 + 9
    assert sub.lp.num_cols == 3 * 9
    np.testing.assert_allclose(sub.rhs.sum(axis=0), 0)
    assert sub.rhs[0, 0] == 110


def test_gbsp_feasible_with_large_fleet(t3):
    sub = build_gbsp(t3_point(t3), np.full((3, 3), 1e6), t3.flow, 100)
    assert isinstance(solve(sub.lp), Optimal)


def test_single_hub_always_feasible(t3):
    sub = build_gbsp(Assignment((1, 1, 1)).x_matrix(t3), np.zeros((3, 3)), t3.flow, 100)
    assert isinstance(solve(sub.lp), Optimal)


def test_gbsp_infeasible_cut(t3):
    t3g = t3.replace(network=NetworkMode.GENERAL)
    M = benders.build_master(t3g)
    x = t3_point(t3)
    y = np.zeros((3, 3))
    sub = build_gbsp(x, y, t3.flow, 100)
    out = solve(sub.lp)
    assert isinstance(out, Infeasible)
    cut = extract_general_cut(M, sub, out.farkas, x, y)
    assert cut.lhs(M.point(x, [y])) > 1e-6
    doubled = extract_general_cut(M, sub, 2 * out.farkas, x, y)
    np.testing.assert_allclose(doubled.val, cut.val)
    # every routable completion satisfies the cut
    for a in costs.feasible_assignments(t3):
        assert cut.lhs(M.completion_point(a)) <= 1e-6


def test_forged_ray_rejected(t3):
    from hndpv.lp import NumericalFailure
    M = benders.build_master(t3.replace(network=NetworkMode.GENERAL))
    x = t3_point(t3)
    y = np.zeros((3, 3))
    sub = build_gbsp(x, y, t3.flow, 100)
    with pytest.raises(NumericalFailure):
        extract_general_cut(M, sub, np.ones(sub.lp.num_rows), x, y)


def test_separate_feasible_returns_none(t3):
    M = benders.build_master(t3.replace(network=NetworkMode.GENERAL))
    x = t3_point(t3)
    y = np.array([[0, 2, 0], [1, 0, 0], [0, 0, 0]], float)
    assert separate_general(M, x, y) is None


def test_t3_general_not_worse(t3):
    r = solve_general(t3.replace(network=NetworkMode.GENERAL))
    assert r.status == OPTIMAL and r.TC <= 1750 + 1e-6


def test_relay_instance_uses_intermediate_hub():
    inst = relay_instance()
    complete = costs.brute_force_oracle(inst)
    ref = general_oracle(inst)
    r = solve_general(inst)
    assert r.status == OPTIMAL
    assert r.TC == pytest.approx(ref.TC, rel=1e-9)
    assert r.TC < complete.TC - 1
    assert r.incumbent.metrics.veh1 == 3


def test_routable_direct_fleet(t3):
    x = t3_point(t3)
    y = np.array([[0, 2, 0], [1, 0, 0], [0, 0, 0]])
    assert routable(x, y, t3.flow, 100)
    assert not routable(x, np.zeros((3, 3), int), t3.flow, 100)


@settings(max_examples=25, deadline=None)
@given(st.integers(3, 5), st.integers(0, 2**31 - 1), st.data())
def test_conservation_rhs_balances(n, seed, data):
    inst = random_instance(n, np.random.default_rng(seed), CapacityMode.UNCAPACITATED, "L1")
    hubs = sorted(data.draw(st.sets(st.integers(0, n - 1), min_size=1)))
    a = Assignment(tuple(i if i in hubs else data.draw(st.sampled_from(hubs)) for i in range(n)))
    rhs = conservation_rhs(a.x_matrix(inst), inst.flow)
    np.testing.assert_allclose(rhs.sum(axis=0), 0, atol=1e-9)
