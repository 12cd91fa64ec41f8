import itertools
import re

import numpy as np
import pytest

from wellbeing_policy.errors import DomainError, GridTooLargeError
from wellbeing_policy.mabs import AgentConfig, PolicyParams, simulate_year
from wellbeing_policy.sensors import HOURS_PER_YEAR
from wellbeing_policy.sweep import (
    DEFAULT_GRID,
    AxisRange,
    SweepGrid,
    candidates_csv_text,
    evaluate_all,
    generate_grid,
    read_candidates_csv,
    shares_from_scores,
    ternary_arrays,
    ternary_coords,
    ternary_svg,
    write_candidates_csv,
)

CFG = AgentConfig()


@pytest.fixture(scope="module")
def profiles():
    rng = np.random.default_rng(21)
    hours = np.arange(HOURS_PER_YEAR) % 24
    pv = np.where((hours > 6) & (hours < 18), rng.uniform(0.2, 0.8, HOURS_PER_YEAR), 0.0)
    hy = rng.uniform(2.0, 5.0, HOURS_PER_YEAR)
    dem = 15.0 + 5.0 * rng.random(HOURS_PER_YEAR)
    return pv, hy, dem


def small_grid(n_pv=5, n_hy=5, n_b=4):
    return SweepGrid(AxisRange(0, 10 * (n_pv - 1), 10), AxisRange(0, n_hy - 1, 1), AxisRange(0, 20 * (n_b - 1), 20))


def test_axis_values():
    a = AxisRange(0.0, 78.0, 2.0)
    assert a.count == 40 and a.values()[-1] == 78.0
    assert AxisRange(0.0, 1.0, 0.1).count == 11
    with pytest.raises(DomainError):
        AxisRange(0.0, 1.0, -1.0)
    with pytest.raises(DomainError):
        AxisRange(2.0, 1.0, 1.0)


def test_singleton_grid():
    g = SweepGrid(AxisRange(5, 5, 1), AxisRange(2, 2, 1), AxisRange(0, 0, 1))
    assert generate_grid(g) == [PolicyParams(5.0, 2.0, 0.0, 1)]


def test_default_grid_size():
    assert DEFAULT_GRID.size == 20_000
    assert len(generate_grid(DEFAULT_GRID)) == 20_000


def test_two_by_two_by_two_enumeration():
    g = SweepGrid(AxisRange(0, 1, 1), AxisRange(10, 20, 10), AxisRange(5, 6, 1))
    got = [(c.pv_capacity, c.hydro_drop, c.battery_capacity, c.k) for c in generate_grid(g)]
    want = [(a, b, c, k) for k, (a, b, c) in enumerate(itertools.product([0, 1], [10, 20], [5, 6]), start=1)]
    assert got == want


def test_grid_limit():
    g = SweepGrid(AxisRange(0, 99, 1), AxisRange(0, 99, 1), AxisRange(0, 9, 1), max_candidates=50_000)
    with pytest.raises(GridTooLargeError):
        generate_grid(g)


def test_singleton_evaluation_matches_direct(profiles):
    p = PolicyParams(30.0, 3.0, 40.0, 1)
    cset = evaluate_all([p], *profiles, CFG)
    assert cset.indices(1) == simulate_year(p, *profiles, CFG)


def test_parallel_equals_serial_bytes(profiles):
    grid = small_grid()
    assert grid.size == 100
    serial = evaluate_all(grid, *profiles, CFG, workers=1)
    parallel = evaluate_all(grid, *profiles, CFG, workers=3, chunk_size=7)
    assert candidates_csv_text(serial) == candidates_csv_text(parallel)


def test_zero_candidate_is_now(profiles):
    cset = evaluate_all(small_grid(2, 2, 2), *profiles, CFG)
    now = cset.indices(1)
    assert cset.params(1) == PolicyParams(0.0, 0.0, 0.0, 1)
    assert now.utilization_u == 0.0 and now.circulation_d == 0.0
    assert now.cost_p == pytest.approx(27.0 * profiles[2].sum(), rel=1e-12)


def test_candidate_order_follows_k(profiles):
    cands = [PolicyParams(10.0, 1.0, 0.0, 3), PolicyParams(0.0, 0.0, 0.0, 1), PolicyParams(5.0, 0.0, 0.0, 2)]
    cset = evaluate_all(cands, *profiles, CFG)
    assert list(cset.k) == [1, 2, 3]
    assert cset.params(3).pv_capacity == 10.0
    with pytest.raises(DomainError):
        evaluate_all([PolicyParams(k=1), PolicyParams(k=1)], *profiles, CFG)


def test_csv_roundtrip_exact(tmp_path, profiles):
    cset = evaluate_all(small_grid(3, 2, 2), *profiles, CFG)
    write_candidates_csv(cset, tmp_path / "c.csv")
    back = read_candidates_csv(tmp_path / "c.csv")
    assert candidates_csv_text(back) == candidates_csv_text(cset)
    raw = (tmp_path / "c.csv").read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")


# ternary ------------------------------------------------------------------------

def test_zero_u_and_d_is_economic_vertex():
    s, e, c, fb = ternary_arrays([100.0, 200.0], [0.0, 0.5], [0.0, 0.5])
    assert (s[0], e[0], c[0]) == (0.0, 0.0, 1.0)
    assert not fb.any()


def test_equal_scores_centroid():
    assert shares_from_scores(0.4, 0.4, 0.4) == pytest.approx((1 / 3, 1 / 3, 1 / 3))
    assert shares_from_scores(0.0, 0.0, 0.0) == (1 / 3, 1 / 3, 1 / 3)


def test_hand_normalization():
    assert shares_from_scores(0.2, 0.4, 0.4) == pytest.approx((0.2, 0.4, 0.4), abs=1e-15)


def test_ternary_definition():
    cost = np.array([100.0, 400.0])
    s, e, c, _ = ternary_arrays(cost, [0.5, 1.0], [0.25, 0.5])
    # scores: (d, u, pmin/p) = (0.25, 0.5, 1) and (0.5, 1, 0.25)
    np.testing.assert_allclose([s[0], e[0], c[0]], np.array([0.25, 0.5, 1.0]) / 1.75)
    np.testing.assert_allclose([s[1], e[1], c[1]], np.array([0.5, 1.0, 0.25]) / 1.75)


def test_ternary_points(profiles):
    cset = evaluate_all(small_grid(2, 2, 1), *profiles, CFG)
    pts = ternary_coords(cset)
    assert [p.k for p in pts] == [1, 2, 3, 4]
    for p in pts:
        assert p.social + p.ecological + p.economic == pytest.approx(1.0, abs=1e-12)


def test_svg_is_deterministic_with_four_decimals(tmp_path, profiles):
    cset = evaluate_all(small_grid(3, 3, 1), *profiles, CFG)
    write_candidates_csv(cset, tmp_path / "c.csv")
    a = ternary_svg(cset, {"Type A": 2, "Type B": 5}, "t")
    b = ternary_svg(read_candidates_csv(tmp_path / "c.csv"), {"Type B": 5, "Type A": 2}, "t")
    assert a == b
    nums = re.findall(r'c[xy]="([-0-9.]+)"', a)
    assert nums and all(re.fullmatch(r"-?\d+\.\d{4}", n) for n in nums)
    assert a.count("<circle") == len(cset) + 2
    assert 'data-label="Type A"' in a

