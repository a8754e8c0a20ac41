from __future__ import annotations

import math

import pytest

import lotforge as lf
from lotforge.engine import (BudgetNonPositive, EngineInternalError, summarize_rows,
                             validate_layout)
from lotforge.formulations import (FormulationKind, MultiEntrance, TurnRestriction,
                                   Variant)
from lotforge.grid import Cell, FieldParams, GridSpec, Mode
from lotforge.model import Layout, SolveStatus

R2 = FieldParams(1, 2, 2)
R2_ONE = FieldParams(1, 2, 1)
ALL_KINDS = [FormulationKind(variant=v) for v in Variant]


class TestSolveInstance:
    def test_budget_must_be_positive(self):
        grid = GridSpec(mu=3, nu=3, entrances=[(0, 0)])
        with pytest.raises(BudgetNonPositive):
            lf.solve_instance(grid, R2, ALL_KINDS[0], budget=0)

    def test_fully_blocked_except_entrance(self):
        blocked = [(r, c) for r in range(3) for c in range(4) if (r, c) not in
                   ((0, 0), (0, 1), (1, 0), (1, 1))]
        grid = GridSpec(mu=3, nu=4, blocked=blocked, entrances=[(0, 0)])
        for kind in ALL_KINDS:
            result = lf.solve_instance(grid, R2, kind, budget=30)
            assert result.status is SolveStatus.OPTIMAL
            assert result.lower_bound == 0
            assert result.upper_bound == 0

    def test_hand_solved_3x4(self):
        grid = GridSpec(mu=3, nu=4, entrances=[(0, 0)])
        for kind in ALL_KINDS:
            result = lf.solve_instance(grid, R2, kind, budget=60)
            assert result.status is SolveStatus.OPTIMAL
            assert result.lower_bound == 3
            assert result.gap == 0.0

    def test_hand_solved_one_way_column(self):
        grid = GridSpec(mu=3, nu=3, entrances=[(0, 0)], exits=[(2, 0)], mode=Mode.ONE_WAY)
        for kind in ALL_KINDS:
            result = lf.solve_instance(grid, R2_ONE, kind, budget=60)
            assert result.status is SolveStatus.OPTIMAL
            assert result.lower_bound == 3

    def test_infeasible_one_way_corridor(self):
        grid = GridSpec(mu=1, nu=2, entrances=[(0, 0)], exits=[(0, 1)], mode=Mode.ONE_WAY)
        for kind in ALL_KINDS:
            result = lf.solve_instance(grid, R2_ONE, kind, budget=30)
            assert result.status is SolveStatus.INFEASIBLE

    def test_every_layout_validates(self):
        for seed in range(6):
            for mode in (Mode.TWO_WAY, Mode.ONE_WAY):
                grid, params = lf.generate_instance(4, 4, 0.15, mode=mode, seed=seed)
                for kind in ALL_KINDS:
                    result = lf.solve_instance(grid, params, kind, budget=60)
                    if result.layout is None:
                        continue
                    report = validate_layout(result.layout, grid, params)
                    assert report.ok, report.violations

    def test_agreement_across_kinds(self):
        for seed in (11, 12, 13):
            grid, params = lf.generate_instance(5, 4, 0.2, seed=seed)
            values = {lf.solve_instance(grid, params, k, budget=60).lower_bound
                      for k in ALL_KINDS}
            assert len(values) == 1

    def test_cut_round_log_records(self):
        records = []
        grid, params = lf.generate_instance(8, 8, 0.15, mode=Mode.ONE_WAY, seed=3)
        lf.solve_instance(grid, params, FormulationKind(variant=Variant.CUT),
                          budget=120, log=records.append)
        for rec in records:
            assert set(rec) == {"round", "cuts_added", "lb", "ub", "elapsed_s"}
        rounds = [r["round"] for r in records]
        assert rounds == sorted(rounds)
        ubs = [r["ub"] for r in records if r["ub"] is not None]
        assert all(b >= a - 1e-6 for a, b in zip(ubs[1:], ubs[:-1]))  # non-increasing


class TestValidateLayout:
    def test_empty_layout_with_entrance_is_valid(self):
        grid = GridSpec(mu=3, nu=4, entrances=[(0, 0)])
        layout = Layout(park0=frozenset(), park90=frozenset(),
                        drive=frozenset({Cell(0, 0)}))
        assert validate_layout(layout, grid, R2).ok

    def test_disconnected_drives_flagged(self):
        grid = GridSpec(mu=3, nu=6, entrances=[(0, 0)])
        layout = Layout(park0=frozenset({Cell(2, 2)}), park90=frozenset(),
                        drive=frozenset({Cell(0, 0), Cell(0, 3)}))
        report = validate_layout(layout, grid, R2)
        assert any("reaches no entrance" in v for v in report.violations)

    def test_one_way_backtracking_layout_flagged(self):
        # a bare out-and-back stub: reaching the exit requires reusing the lane
        grid = GridSpec(mu=1, nu=4, entrances=[(0, 0)], exits=[(0, 1)], mode=Mode.ONE_WAY)
        layout = Layout(park0=frozenset(), park90=frozenset(),
                        drive=frozenset({Cell(0, 0), Cell(0, 1), Cell(0, 2)}),
                        directions=frozenset({(Cell(0, 2), Cell(0, 1)),
                                              (Cell(0, 1), Cell(0, 0))}))
        report = validate_layout(layout, grid, R2_ONE)
        assert not report.ok

    def test_missing_fixed_drive_flagged(self):
        grid = GridSpec(mu=3, nu=4, existing_drive=[(1, 2)], entrances=[(0, 0)])
        layout = Layout(park0=frozenset(), park90=frozenset(),
                        drive=frozenset({Cell(0, 0)}))
        report = validate_layout(layout, grid, R2)
        assert any("fixed drive" in v for v in report.violations)

    def test_parking_over_drive_flagged(self):
        grid = GridSpec(mu=3, nu=4, entrances=[(0, 0)])
        layout = Layout(park0=frozenset({Cell(0, 1)}), park90=frozenset(),
                        drive=frozenset({Cell(0, 0)}))
        report = validate_layout(layout, grid, R2)
        assert any("both parking and driving" in v for v in report.violations)

    def test_inaccessible_parking_flagged(self):
        grid = GridSpec(mu=3, nu=6, entrances=[(0, 0)])
        layout = Layout(park0=frozenset({Cell(2, 4)}), park90=frozenset(),
                        drive=frozenset({Cell(0, 0)}))
        report = validate_layout(layout, grid, R2)
        assert any("no active drive neighbor" in v for v in report.violations)

    def test_anti_parallel_directions_flagged(self):
        grid = GridSpec(mu=1, nu=4, entrances=[(0, 0)], exits=[(0, 3)], mode=Mode.ONE_WAY)
        drive = frozenset({Cell(0, 0), Cell(0, 1), Cell(0, 2), Cell(0, 3)})
        z = {(Cell(0, 1), Cell(0, 0)), (Cell(0, 2), Cell(0, 1)), (Cell(0, 1), Cell(0, 2)),
             (Cell(0, 3), Cell(0, 2))}
        layout = Layout(park0=frozenset(), park90=frozenset(), drive=drive,
                        directions=frozenset(z))
        report = validate_layout(layout, grid, R2_ONE)
        assert any("anti-parallel" in v for v in report.violations)

    def test_flow_unrealizable_directions_flagged(self):
        # every cell reaches the entrance and is reached from the exit, but the
        # exit's single unit cannot feed two outgoing arcs
        grid = GridSpec(mu=2, nu=2, entrances=[(0, 0)], exits=[(1, 1)], mode=Mode.ONE_WAY)
        drive = frozenset({Cell(0, 0), Cell(0, 1), Cell(1, 0), Cell(1, 1)})
        z = {(Cell(1, 1), Cell(0, 1)), (Cell(1, 1), Cell(1, 0)),
             (Cell(0, 1), Cell(0, 0)), (Cell(1, 0), Cell(0, 0))}
        layout = Layout(park0=frozenset(), park90=frozenset(), drive=drive,
                        directions=frozenset(z))
        report = validate_layout(layout, grid, R2_ONE)
        assert any("commodity" in v for v in report.violations)


class TestTurnAndMultiEntrance:
    def test_turn_restrictions_never_increase_optimum(self):
        grid, params = lf.generate_instance(6, 6, 0.1, seed=5)
        base = lf.solve_instance(grid, params, FormulationKind(variant=Variant.CUT),
                                 budget=120)
        restricted = lf.solve_instance(
            grid, params,
            FormulationKind(variant=Variant.CUT, turn=TurnRestriction.UNIFORM),
            budget=120)
        assert base.status is SolveStatus.OPTIMAL
        assert restricted.status is SolveStatus.OPTIMAL
        assert restricted.lower_bound <= base.lower_bound
        report = validate_layout(restricted.layout, grid, params,
                                 turn=TurnRestriction.UNIFORM)
        assert report.ok

    def test_disjoint_admits_at_least_connected(self):
        grid = GridSpec(mu=5, nu=7, blocked=[(r, 3) for r in range(5)],
                        entrances=[(0, 0), (0, 5)])
        connected = lf.solve_instance(
            grid, R2, FormulationKind(variant=Variant.FLOW,
                                      multi_entrance=MultiEntrance.CONNECTED), budget=60)
        disjoint = lf.solve_instance(
            grid, R2, FormulationKind(variant=Variant.FLOW,
                                      multi_entrance=MultiEntrance.DISJOINT), budget=60)
        # the wall makes the connected variant infeasible while the disjoint
        # variant fills both halves
        assert connected.status is SolveStatus.INFEASIBLE
        assert disjoint.status is SolveStatus.OPTIMAL
        assert disjoint.lower_bound > 0

    def test_disjoint_beats_connected_when_both_feasible(self):
        grid = GridSpec(mu=4, nu=7, blocked=[(1, 3)],
                        entrances=[(0, 0), (0, 5)])
        results = {}
        for option in (MultiEntrance.CONNECTED, MultiEntrance.DISJOINT):
            for variant in (Variant.FLOW, Variant.CUT):
                r = lf.solve_instance(grid, R2,
                                      FormulationKind(variant=variant, multi_entrance=option),
                                      budget=120)
                assert r.status is SolveStatus.OPTIMAL
                results.setdefault(option, set()).add(r.lower_bound)
        assert len(results[MultiEntrance.CONNECTED]) == 1
        assert len(results[MultiEntrance.DISJOINT]) == 1
        assert max(results[MultiEntrance.DISJOINT]) >= max(results[MultiEntrance.CONNECTED])

    def test_one_way_multi_entrance_disjoint(self):
        grid = GridSpec(mu=5, nu=7, blocked=[(r, 3) for r in range(5)],
                        entrances=[(0, 0), (0, 4)], exits=[(1, 0), (0, 6)],
                        mode=Mode.ONE_WAY)
        r = lf.solve_instance(grid, R2_ONE,
                              FormulationKind(variant=Variant.CUT,
                                              multi_entrance=MultiEntrance.DISJOINT),
                              budget=120)
        assert r.status is SolveStatus.OPTIMAL
        report = validate_layout(r.layout, grid, R2_ONE,
                                 multi_entrance=MultiEntrance.DISJOINT)
        assert report.ok


class TestSummaries:
    def test_group_partition(self):
        grid, params = lf.generate_instance(4, 4, 0.1, seed=2)
        rows = lf.compare_formulations([("a", grid, params)], ALL_KINDS, budget=60)
        assert len(rows) == 3
        summary = summarize_rows(rows)
        assert {s["group"] for s in summary} == {"I"}
        assert all(s["count"] == 1 for s in summary)
