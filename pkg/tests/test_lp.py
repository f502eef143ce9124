import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from hndpv.lp import (
    INF, Infeasible, LinearProgram, Optimal, Unbounded, clean_ray, farkas_margin, is_certificate,
    optimality_residuals, solve,
)


def test_simple_optimum_and_duals():
    # min -x - y  s.t. x + y <= 1, x <= 0.7
    lp = LinearProgram([0, 0], [INF, INF], [-1, -2])
    lp.add_rows([([0, 1], [1, 1], "<=", 1.0), ([0], [1], "<=", 0.7)])
    out = solve(lp)
    assert isinstance(out, Optimal)
    assert out.objective == pytest.approx(-2.0)
    assert out.duals[0] == pytest.approx(-2.0)
    res = optimality_residuals(lp, out)
    assert res["primal"] < 1e-9 and res["gap"] < 1e-9


def test_farkas_sign_convention():
    lp = LinearProgram([0], [INF], [0])
    lp.add_rows([([0], [1], "<=", 1.0), ([0], [1], ">=", 2.0)])
    out = solve(lp)
    assert isinstance(out, Infeasible)
    y = out.farkas / np.abs(out.farkas).max()
    assert y[0] < 0 < y[1]
    assert farkas_margin(lp, y) == pytest.approx(1.0)
    assert is_certificate(lp, 2 * y)
    assert not is_certificate(lp, -y)


def test_bound_infeasibility_certificate():
    # x + y >= 3 with 0 <= x, y <= 1
    lp = LinearProgram([0, 0], [1, 1], [1, 1])
    lp.add_rows([([0, 1], [1, 1], ">=", 3.0)])
    out = solve(lp)
    assert isinstance(out, Infeasible) and is_certificate(lp, out.farkas)


def test_unbounded():
    lp = LinearProgram([0], [INF], [-1])
    assert isinstance(solve(lp), Unbounded)


def test_warm_resolve_after_rows_and_bounds():
    lp = LinearProgram([0, 0], [4, 4], [-1, -1])
    assert solve(lp).objective == pytest.approx(-8)
    lp.add_rows([([0, 1], [1, 2], "<=", 4.0)])
    assert solve(lp).objective == pytest.approx(-4)
    lp.set_bounds(np.array([0.0, 1.0]), np.array([4.0, 4.0]))
    assert solve(lp).objective == pytest.approx(-3)


def test_lp_text_dump():
    lp = LinearProgram([0], [1], [1], names=["x"])
    lp.add_rows([([0], [1], ">=", 0.5)])
    text = lp.to_lp_text()
    assert "Minimize" in text and "x >= 0.5" in text


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_random_lps_agree_with_scipy(n, m, seed):
    rng = np.random.default_rng(seed)
    A = rng.integers(-3, 4, size=(m, n)).astype(float)
    b = rng.integers(-4, 6, size=m).astype(float)
    c = rng.integers(-3, 4, size=n).astype(float)
    ub = rng.integers(1, 4, size=n).astype(float)
    senses = rng.choice(["<=", ">=", "="], size=m, p=[0.5, 0.3, 0.2])
    lp = LinearProgram(np.zeros(n), ub, c)
    lp.add_rows([(list(range(n)), A[r].tolist(), senses[r], b[r]) for r in range(m)])
    out = solve(lp)
    A_ub = [A[r] if s == "<=" else -A[r] for r, s in enumerate(senses) if s != "="]
    b_ub = [b[r] if s == "<=" else -b[r] for r, s in enumerate(senses) if s != "="]
    A_eq = [A[r] for r, s in enumerate(senses) if s == "="]
    b_eq = [b[r] for r, s in enumerate(senses) if s == "="]
    ref = linprog(c, A_ub=np.array(A_ub) if A_ub else None, b_ub=b_ub or None,
                  A_eq=np.array(A_eq) if A_eq else None, b_eq=b_eq or None,
                  bounds=list(zip(np.zeros(n), ub)), method="highs")
    if ref.status == 2:
        assert isinstance(out, Infeasible)
        assert is_certificate(lp, out.farkas)
    else:
        assert ref.status == 0
        assert isinstance(out, Optimal)
        assert out.objective == pytest.approx(ref.fun, abs=1e-7)
        res = optimality_residuals(lp, out)
        assert res["primal"] < 1e-7 and res["dual"] < 1e-7


def test_clean_ray_drops_only_roundoff():
    # x <= 1 and x >= 2: y = (-1, 1) proves infeasibility; a third <= row gets a stray multiplier
    lp = LinearProgram([0], [INF], [0])
    lp.add_rows([([0], [1], "<=", 1.0), ([0], [1], ">=", 2.0), ([0], [1], "<=", 5.0)])
    y = np.array([-1.0, 1.0, 1e-13])
    assert farkas_margin(lp, y) == -np.inf
    assert is_certificate(lp, clean_ray(lp, y))
    assert not is_certificate(lp, clean_ray(lp, np.array([-1.0, 1.0, 1e-3])))
