import numpy as np
import pytest

from swarm_agents.exceptions import GridError
from swarm_agents.spatial_index import (
    bench_scaling,
    brute_force_pairs,
    build,
    loglog_slope,
    near_pairs,
    slopes,
)


def random_positions(seed, n=200, side=15.0):
    return np.random.default_rng(seed).uniform(0.0, side, size=(n, 2))


@pytest.mark.parametrize("seed", range(25))
def test_near_pairs_match_brute_force(seed):
    positions = random_positions(seed)
    grid = build(positions, 1.0)
    assert near_pairs(grid, 1.0) == brute_force_pairs(positions, 1.0)


def test_cutoff_smaller_than_cell():
    positions = random_positions(0)
    assert near_pairs(build(positions, 2.0), 1.0) == brute_force_pairs(positions, 1.0)


def test_every_agent_in_exactly_one_cell():
    positions = random_positions(1)
    grid = build(positions, 1.0)
    members = sorted(i for cell in grid.cells.values() for i in cell)
    assert members == list(range(len(positions)))
    assert sum(grid.occupancy().values()) == len(positions)
    assert grid.cell_of(positions[0]) in grid.cells


def test_rebuilding_gives_the_same_grid():
    positions = random_positions(2)
    first = build(positions, 1.0)
    second = build(first.positions, 1.0)
    assert second.cells == first.cells
    assert second.bounds == first.bounds
    assert near_pairs(second, 1.0) == near_pairs(first, 1.0)


def test_negative_coordinates_and_boundary_distance():
    positions = np.array([[-0.5, -0.5], [0.5, -0.5], [5.0, 5.0]])
    assert near_pairs(build(positions, 1.0), 1.0) == [(0, 1)]


def test_empty_and_single():
    assert near_pairs(build(np.zeros((0, 2)), 1.0), 1.0) == []
    assert near_pairs(build(np.array([[1.0, 1.0]]), 1.0), 1.0) == []


@pytest.mark.parametrize("cell", [0.0, -1.0])
def test_non_positive_cell_rejected(cell):
    with pytest.raises(GridError):
        build(random_positions(0), cell)


def test_cell_smaller_than_diameter_rejected():
    with pytest.raises(GridError):
        build(random_positions(0), 0.8, radii=[0.5, 0.5])


def test_cutoff_larger_than_cell_rejected():
    with pytest.raises(GridError):
        near_pairs(build(random_positions(0), 1.0), 1.5)


def test_loglog_slope_recovers_exponent():
    sizes = [100, 200, 400, 800]
    assert loglog_slope(sizes, [3.0 * n ** 2 for n in sizes]) == pytest.approx(2.0)
    assert loglog_slope(sizes, [7.0 * n for n in sizes]) == pytest.approx(1.0)


def test_bench_rows_and_slopes():
    rows = bench_scaling([64, 128], repetitions=1)
    assert {(row.n, row.method) for row in rows} == {(64, "grid"), (64, "naive"), (128, "grid"), (128, "naive")}
    assert set(slopes(rows)) == {"grid", "naive"}


@pytest.mark.slow
def test_oracle_agreement_on_many_configurations():
    for seed in range(1000):
        positions = random_positions(seed, n=120, side=12.0)
        assert near_pairs(build(positions, 1.0), 1.0) == brute_force_pairs(positions, 1.0)


@pytest.mark.slow
def test_scaling_exponents():
    fitted = slopes(bench_scaling([1000, 2000, 4000, 8000, 16000, 32000], repetitions=3))
    assert fitted["naive"] >= 1.7
    assert fitted["grid"] <= 1.3
