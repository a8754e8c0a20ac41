from __future__ import annotations

import pytest

import lotforge as lf
from lotforge.engine import validate_layout
from lotforge.grid import Cell, FieldParams, GridSpec, Mode
from lotforge.oracle import (InstanceTooLarge, UnsupportedInstance,
                             brute_force_one_way, brute_force_two_way)

R2 = FieldParams(1, 2, 2)
R2_ONE = FieldParams(1, 2, 1)


class TestTwoWayOracle:
    def test_fully_blocked_except_entrance(self):
        blocked = [(r, c) for r in range(3) for c in range(4)
                   if (r, c) not in ((0, 0), (0, 1), (1, 0), (1, 1))]
        grid = GridSpec(mu=3, nu=4, blocked=blocked, entrances=[(0, 0)])
        result = brute_force_two_way(grid, R2)
        assert result.optimum == 0
        assert result.witness.drive == frozenset({Cell(0, 0)})

    def test_hand_solved_3x4(self):
        grid = GridSpec(mu=3, nu=4, entrances=[(0, 0)])
        result = brute_force_two_way(grid, R2)
        assert result.optimum == 3

    def test_2x3_open_grid(self):
        grid = GridSpec(mu=2, nu=3, entrances=[(0, 0)])
        result = brute_force_two_way(grid, R2)
        # entrance footprint covers a 2x2 block; the last column holds one
        # vertical stall accessible... verified by the MIP in the acceptance
        # suite; here we pin determinism and witness validity.
        again = brute_force_two_way(grid, R2)
        assert result.optimum == again.optimum
        assert result.witness == again.witness
        assert validate_layout(result.witness, grid, R2).ok

    def test_blocking_never_helps(self):
        base = GridSpec(mu=3, nu=4, entrances=[(0, 0)])
        more = GridSpec(mu=3, nu=4, blocked=[(2, 2)], entrances=[(0, 0)])
        assert (brute_force_two_way(more, R2).optimum
                <= brute_force_two_way(base, R2).optimum)

    def test_existing_drives_forced_active(self):
        grid = GridSpec(mu=3, nu=4, existing_drive=[(1, 2)], entrances=[(0, 0)])
        result = brute_force_two_way(grid, R2)
        assert Cell(1, 2) in result.witness.drive

    def test_guards(self):
        grid = GridSpec(mu=7, nu=7, entrances=[(0, 0)])
        with pytest.raises(InstanceTooLarge):
            brute_force_two_way(grid, R2)

    def test_multi_entrance_unsupported(self):
        grid = GridSpec(mu=3, nu=4, entrances=[(0, 0), (0, 2)])
        with pytest.raises(UnsupportedInstance):
            brute_force_two_way(grid, R2)

    def test_mode_mismatch(self):
        grid = GridSpec(mu=3, nu=3, entrances=[(0, 0)], exits=[(2, 0)], mode=Mode.ONE_WAY)
        with pytest.raises(UnsupportedInstance):
            brute_force_two_way(grid, R2_ONE)


class TestOneWayOracle:
    def test_hand_solved_column(self):
        grid = GridSpec(mu=3, nu=3, entrances=[(0, 0)], exits=[(2, 0)], mode=Mode.ONE_WAY)
        result = brute_force_one_way(grid, R2_ONE)
        assert result.optimum == 3
        assert result.witness.directions  # carries a direction assignment
        assert validate_layout(result.witness, grid, R2_ONE).ok

    def test_corridor_with_removed_arc_is_infeasible(self):
        grid = GridSpec(mu=1, nu=2, entrances=[(0, 0)], exits=[(0, 1)], mode=Mode.ONE_WAY)
        result = brute_force_one_way(grid, R2_ONE)
        assert result.optimum is None
        assert result.witness is None

    def test_1x4_corridor_has_no_stalls(self):
        grid = GridSpec(mu=1, nu=4, entrances=[(0, 0)], exits=[(0, 3)], mode=Mode.ONE_WAY)
        result = brute_force_one_way(grid, R2_ONE)
        assert result.optimum == 0
        assert result.witness.drive == frozenset(
            {Cell(0, 0), Cell(0, 1), Cell(0, 2), Cell(0, 3)})

    def test_no_parking_anchors_means_zero(self):
        grid = GridSpec(mu=2, nu=2, entrances=[(0, 0)], exits=[(1, 1)], mode=Mode.ONE_WAY)
        result = brute_force_one_way(grid, R2_ONE)
        assert result.optimum == 0

    def test_guard(self):
        grid = GridSpec(mu=4, nu=4, entrances=[(0, 0)], exits=[(0, 1)], mode=Mode.ONE_WAY)
        with pytest.raises(InstanceTooLarge):
            brute_force_one_way(grid, R2_ONE)  # 16 drive anchors > 14

    def test_witnesses_validate_across_seeds(self):
        for seed in range(8):
            grid, params = lf.generate_instance(3, 4, 0.15, mode=Mode.ONE_WAY, seed=seed)
            result = brute_force_one_way(grid, params)
            if result.witness is None:
                continue
            assert validate_layout(result.witness, grid, params).ok
            assert result.explored > 0
