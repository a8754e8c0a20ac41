from __future__ import annotations

import itertools

import pytest

from lotforge.formulations import FormulationKind, Variant, build_model
from lotforge.grid import (Cell, FieldParams, GridSpec, Mode, build_drive_graph,
                           compute_anchor_sets, connected_components)
from lotforge.model import Layout, VarKind, dir_z_var, drive_var, park0_var
from lotforge.separation import (CutContainsHeavyArc, Dinic, NoSeparatorExists,
                                 SeparationError, bidirectional_hop_inequalities,
                                 dead_end_prevention, forward_hop_inequalities,
                                 lower_bounded_flow_feasible, min_vertex_cut,
                                 min_weighted_edge_cut, reverse_hop_inequalities,
                                 separate_flow_deficit, separate_one_way,
                                 separate_two_way)

R2 = FieldParams(1, 2, 2)


def graph_for(grid, params):
    anchors = compute_anchor_sets(grid, params)
    return anchors, build_drive_graph(anchors, grid)


def open_two_way(mu, nu, entrance=(0, 0), **kw):
    return GridSpec(mu=mu, nu=nu, entrances=[entrance], **kw)


class TestDinic:
    def test_classic_network(self):
        net = Dinic(6)
        for u, v, c in ((0, 1, 3), (0, 2, 3), (1, 2, 2), (1, 3, 3),
                        (2, 4, 2), (3, 4, 4), (3, 5, 2), (4, 5, 2)):
            net.add_edge(u, v, c)
        assert net.max_flow(0, 5) == 4

    def test_disconnected(self):
        net = Dinic(2)
        assert net.max_flow(0, 1) == 0


class TestMinVertexCut:
    def test_single_articulation_node(self):
        # anchors form a 3-path on a 2x4 grid; the middle anchor is the cut
        grid = open_two_way(2, 4)
        anchors, graph = graph_for(grid, R2)
        sep = min_vertex_cut(graph, [Cell(0, 0)], [Cell(0, 2)])
        assert sep.cut_nodes == frozenset({Cell(0, 1)})
        assert sep.far_side == frozenset({Cell(0, 2)})

    def test_opposite_corners_of_open_grid(self):
        grid = open_two_way(4, 4)  # 3x3 anchor grid
        anchors, graph = graph_for(grid, R2)
        sep = min_vertex_cut(graph, [Cell(0, 0)], [Cell(2, 2)])
        assert len(sep.cut_nodes) == 2

    def test_adjacent_seeds_have_no_separator(self):
        grid = open_two_way(2, 4)
        anchors, graph = graph_for(grid, R2)
        with pytest.raises(NoSeparatorExists):
            min_vertex_cut(graph, [Cell(0, 0)], [Cell(0, 1)])

    def test_menger_on_small_graphs(self):
        # minimum cut size equals the brute-force minimum over all node subsets
        grid = open_two_way(5, 5, blocked=[(2, 2)])
        anchors, graph = graph_for(grid, FieldParams(1, 1, 1, ) if False else R2)
        source, sink = Cell(0, 0), Cell(3, 3)
        sep = min_vertex_cut(graph, [source], [sink])
        middle = sorted(graph.nodes - {source, sink})

        def disconnects(subset):
            remaining = graph.nodes - set(subset)
            if source not in remaining or sink not in remaining:
                return False
            comps = connected_components(remaining, graph.undirected_neighbors)
            return not any(source in c and sink in c for c in comps)

        brute = None
        for size in range(0, 4):
            for subset in itertools.combinations(middle, size):
                if disconnects(subset):
                    brute = size
                    break
            if brute is not None:
                break
        assert brute == len(sep.cut_nodes)


class TestMinWeightedEdgeCut:
    def one_way_graph(self):
        grid = GridSpec(mu=3, nu=5, entrances=[(0, 0)], exits=[(1, 0)], mode=Mode.ONE_WAY)
        return graph_for(grid, FieldParams(1, 2, 1))

    def test_single_bridging_arc(self):
        grid = GridSpec(mu=1, nu=5, entrances=[(0, 0)], exits=[(0, 1)], mode=Mode.ONE_WAY)
        anchors, graph = graph_for(grid, FieldParams(1, 2, 1))
        cut = min_weighted_edge_cut(graph, frozenset(), [Cell(0, 4)], [Cell(0, 2)], big_m=len(graph.arcs))
        assert cut.cut_arcs == frozenset({(Cell(0, 4), Cell(0, 3))})

    def test_avoids_active_arcs(self):
        anchors, graph = self.one_way_graph()
        # price the direct west arcs out of the cut; the light cut goes around
        z_active = frozenset({(Cell(2, 2), Cell(2, 1))})
        cut = min_weighted_edge_cut(graph, z_active, [Cell(2, 2)], [Cell(2, 0)],
                                    big_m=len(graph.arcs))
        assert not (cut.cut_arcs & z_active)
        assert cut.cut_arcs

    def test_heavy_cut_detected(self):
        grid = GridSpec(mu=1, nu=5, entrances=[(0, 0)], exits=[(0, 1)], mode=Mode.ONE_WAY)
        anchors, graph = graph_for(grid, FieldParams(1, 2, 1))
        z_active = frozenset({(Cell(0, 4), Cell(0, 3)), (Cell(0, 3), Cell(0, 2))})
        with pytest.raises(CutContainsHeavyArc):
            min_weighted_edge_cut(graph, z_active, [Cell(0, 4)], [Cell(0, 2)],
                                  big_m=len(graph.arcs))


class TestHopInequalities:
    def fig6_setup(self):
        # Open 12x12 lot with one blocked cell so the depth-3 strengthening at
        # (5,3) matches the published example sets exactly.
        grid = open_two_way(12, 12, entrance=(0, 5), blocked=[(4, 0)])
        return graph_for(grid, R2)

    def test_depth_one_is_neighbor_bound(self):
        anchors, graph = self.fig6_setup()
        cons = forward_hop_inequalities(graph, anchors, [Cell(0, 5)], frozenset({Cell(0, 5)}))
        target = [c for c in cons
                  if (1.0, drive_var(Cell(5, 3))) in c.terms
                  and {v for coeff, v in c.terms if coeff == -1.0}
                  == {drive_var(Cell(5, 2)), drive_var(Cell(4, 3)),
                      drive_var(Cell(5, 4)), drive_var(Cell(6, 3))}]
        assert len(target) == 1
        assert all(coeff == 1.0 for coeff, v in target[0].terms
                   if v.kind is not VarKind.DRIVE)

    def test_depth_three_strengthening_matches_example(self):
        anchors, graph = self.fig6_setup()
        cons = forward_hop_inequalities(graph, anchors, [Cell(0, 5)], frozenset({Cell(0, 5)}))
        ring3 = {Cell(2, 3), Cell(3, 2), Cell(3, 4), Cell(4, 1), Cell(4, 5),
                 Cell(5, 0), Cell(5, 6), Cell(6, 1), Cell(6, 5), Cell(7, 2),
                 Cell(7, 4), Cell(8, 3), Cell(2, 3)}
        target = None
        for c in cons:
            lhs = {v for coeff, v in c.terms if coeff == 1.0}
            rhs = {v.key for coeff, v in c.terms if coeff == -1.0}
            if drive_var(Cell(5, 3)) in lhs and rhs == ring3 - {Cell(2, 3)} | {Cell(2, 3)}:
                target = lhs
        assert target is not None
        assert target == {drive_var(Cell(5, 3)), park0_var(Cell(5, 2)),
                          park0_var(Cell(5, 3)),
                          next(iter({v for v in target if v.kind is VarKind.PARK90}))}
        park90 = {v.key for v in target if v.kind is VarKind.PARK90}
        assert park90 == {Cell(5, 3)}

    def test_entrance_emits_no_forward_rows(self):
        anchors, graph = self.fig6_setup()
        cons = forward_hop_inequalities(graph, anchors, [Cell(0, 5)], frozenset({Cell(0, 5)}))
        for c in cons:
            lhs_drives = [v for coeff, v in c.terms if coeff == 1.0 and v.kind is VarKind.DRIVE]
            assert lhs_drives != [drive_var(Cell(0, 5))]

    def test_reverse_rings_fix_unreachable_island(self):
        # two islands of drive anchors; the entrance-free island is forced off
        grid = GridSpec(mu=2, nu=7, blocked=[(0, 3), (1, 3)], entrances=[(0, 0)])
        anchors, graph = graph_for(grid, R2)
        cons = reverse_hop_inequalities(graph, anchors, [Cell(0, 0)], frozenset({Cell(0, 0)}))
        forced_zero = {c.terms[0][1].key for c in cons
                       if all(coeff == 1.0 for coeff, _ in c.terms) and c.rhs == 0.0}
        assert {Cell(0, 4), Cell(0, 5)} <= forced_zero

    def test_vacuous_rings_with_fixed_drives_skipped(self):
        grid = open_two_way(5, 5)
        anchors, graph = graph_for(grid, R2)
        fixed = frozenset({Cell(0, 0)})
        cons = bidirectional_hop_inequalities(graph, anchors, [Cell(0, 0)], fixed)
        for c in cons:
            rhs = {v.key for coeff, v in c.terms if coeff == -1.0}
            assert not (rhs & fixed)

    def test_lazy_split_thresholds(self):
        grid = open_two_way(9, 9)
        anchors, graph = graph_for(grid, R2)
        cons = bidirectional_hop_inequalities(graph, anchors, [Cell(0, 0)],
                                              frozenset({Cell(0, 0)}),
                                              regular_max_hop=2, regular_max_rhs=3)
        assert any(c.lazy for c in cons) and any(not c.lazy for c in cons)


class TestDeadEndPrevention:
    def test_leaf_cell_forced_off(self):
        grid = GridSpec(mu=2, nu=4, blocked=[(0, 1), (0, 3)], entrances=[(1, 0)],
                        exits=[(1, 3)], mode=Mode.ONE_WAY)
        anchors, graph = graph_for(grid, FieldParams(1, 2, 1))
        cons = dead_end_prevention(graph, {Cell(1, 0)}, {Cell(1, 3)})
        # (0,0) hangs off (1,0) with a single neighbor
        assert any(c.terms == ((1.0, drive_var(Cell(0, 0))),) and c.sense == "<=" and c.rhs == 0
                   for c in cons)

    def test_terminals_exempt(self):
        grid = GridSpec(mu=1, nu=3, entrances=[(0, 0)], exits=[(0, 2)], mode=Mode.ONE_WAY)
        anchors, graph = graph_for(grid, FieldParams(1, 2, 1))
        cons = dead_end_prevention(graph, {Cell(0, 0)}, {Cell(0, 2)})
        for c in cons:
            assert c.terms != ((1.0, drive_var(Cell(0, 0))),)
            assert c.terms != ((1.0, drive_var(Cell(0, 2))),)
        # entrance needs no outgoing arc: no out-degree row on it
        for c in cons:
            zs = [v for _, v in c.terms if v.kind is VarKind.DIR_Z]
            ys = [v for coeff, v in c.terms if v.kind is VarKind.DRIVE and coeff == -1.0]
            if zs and ys == [drive_var(Cell(0, 0))]:
                assert all(v.key[1] == Cell(0, 0) for v in zs)  # incoming only


class TestSeparateTwoWay:
    def test_connected_incumbent_yields_nothing(self):
        grid = open_two_way(4, 5)
        anchors, graph = graph_for(grid, R2)
        layout = Layout(park0=frozenset(), park90=frozenset(),
                        drive=frozenset({Cell(0, 0), Cell(0, 1)}))
        assert separate_two_way(layout, graph, anchors, [Cell(0, 0)]) == []

    def test_disconnected_component_cut(self):
        grid = open_two_way(4, 6)
        anchors, graph = graph_for(grid, R2)
        stranded = {Cell(2, 3), Cell(2, 4)}
        layout = Layout(park0=frozenset(), park90=frozenset(),
                        drive=frozenset({Cell(0, 0)} | stranded))
        cuts = separate_two_way(layout, graph, anchors, [Cell(0, 0)])
        assert len(cuts) == len(stranded)
        values = {drive_var(c): 1.0 for c in layout.drive}
        for cut in cuts:
            assert not cut.satisfied_by(values)

    def test_single_cell_component_bounded_by_neighbors(self):
        grid = open_two_way(4, 6)
        anchors, graph = graph_for(grid, R2)
        lone = Cell(2, 4)
        layout = Layout(park0=frozenset(), park90=frozenset(),
                        drive=frozenset({Cell(0, 0), lone}))
        cuts = separate_two_way(layout, graph, anchors, [Cell(0, 0)])
        assert len(cuts) == 1
        rhs = {v.key for coeff, v in cuts[0].terms if coeff == -1.0}
        assert rhs == set(graph.undirected_neighbors(lone))

    def test_three_component_incumbent_gets_batches(self):
        grid = open_two_way(6, 8)
        anchors, graph = graph_for(grid, R2)
        comp_a = {Cell(2, 3)}
        comp_b = {Cell(4, 6), Cell(4, 5)}
        layout = Layout(park0=frozenset(), park90=frozenset(),
                        drive=frozenset({Cell(0, 0)} | comp_a | comp_b))
        cuts = separate_two_way(layout, graph, anchors, [Cell(0, 0)])
        assert len(cuts) == len(comp_a) + len(comp_b)


class TestSeparateOneWay:
    def one_way(self, mu=4, nu=6):
        grid = GridSpec(mu=mu, nu=nu, entrances=[(0, 0)], exits=[(1, 0)], mode=Mode.ONE_WAY)
        anchors = compute_anchor_sets(grid, FieldParams(1, 2, 1))
        return grid, anchors, build_drive_graph(anchors, grid)

    def feasible_layout(self, grid):
        # entrance (0,0), exit (1,0): ring 0,0 <- 0,1 <- 1,1 <- 1,0
        drive = {Cell(0, 0), Cell(0, 1), Cell(1, 1), Cell(1, 0)}
        z = {(Cell(1, 0), Cell(1, 1)), (Cell(1, 1), Cell(0, 1)), (Cell(0, 1), Cell(0, 0))}
        return Layout(park0=frozenset(), park90=frozenset(), drive=frozenset(drive),
                      directions=frozenset(z))

    def test_feasible_incumbent_yields_nothing(self):
        grid, anchors, graph = self.one_way()
        layout = self.feasible_layout(grid)
        assert separate_one_way(layout, graph, anchors, [Cell(0, 0)], [Cell(1, 0)],
                                big_m=len(graph.arcs)) == []
        assert separate_flow_deficit(layout, graph, [Cell(0, 0)], [Cell(1, 0)],
                                     big_m=len(graph.nodes) - 1) == []

    def test_stranded_cycle_cut(self):
        grid, anchors, graph = self.one_way()
        base = self.feasible_layout(grid)
        cyc = [Cell(2, 3), Cell(2, 4), Cell(3, 4), Cell(3, 3)]
        z = set(base.directions) | {(cyc[0], cyc[1]), (cyc[1], cyc[2]),
                                    (cyc[2], cyc[3]), (cyc[3], cyc[0])}
        layout = Layout(park0=frozenset(), park90=frozenset(),
                        drive=base.drive | frozenset(cyc), directions=frozenset(z))
        cuts = separate_one_way(layout, graph, anchors, [Cell(0, 0)], [Cell(1, 0)],
                                big_m=len(graph.arcs))
        assert len(cuts) == 2 * len(cyc)  # entrance-side and exit-side batches
        values = {drive_var(c): 1.0 for c in layout.drive}
        values.update({dir_z_var(a): 1.0 for a in layout.directions})
        for cut in cuts:
            assert not cut.satisfied_by(values)
            rhs_z = [v for coeff, v in cut.terms if v.kind is VarKind.DIR_Z and coeff == -1.0]
            assert rhs_z  # bounded by crossing direction arcs

    def test_flow_deficit_cut_for_double_exit_branch(self):
        # both exit out-arcs carry the single exit unit: reachability holds but
        # the entrance commodity cannot exist
        grid = GridSpec(mu=2, nu=2, entrances=[(0, 0)], exits=[(1, 1)], mode=Mode.ONE_WAY)
        anchors = compute_anchor_sets(grid, FieldParams(1, 2, 1))
        graph = build_drive_graph(anchors, grid)
        drive = frozenset(graph.nodes)
        z = {(Cell(1, 1), Cell(0, 1)), (Cell(1, 1), Cell(1, 0)),
             (Cell(0, 1), Cell(0, 0)), (Cell(1, 0), Cell(0, 0))}
        layout = Layout(park0=frozenset(), park90=frozenset(), drive=drive,
                        directions=frozenset(z))
        assert separate_one_way(layout, graph, anchors, [Cell(0, 0)], [Cell(1, 1)],
                                big_m=len(graph.arcs)) == []
        cuts = separate_flow_deficit(layout, graph, [Cell(0, 0)], [Cell(1, 1)],
                                     big_m=len(graph.nodes) - 1)
        assert cuts
        values = {drive_var(c): 1.0 for c in drive}
        values.update({dir_z_var(a): 1.0 for a in z})
        for cut in cuts:
            assert not cut.satisfied_by(values)


class TestLowerBoundedFlow:
    def test_path_is_feasible(self):
        a, b, c = Cell(0, 0), Cell(0, 1), Cell(0, 2)
        ok, _ = lower_bounded_flow_feasible(
            [a, b, c], [(c, b, 1, 10), (b, a, 1, 10)], {a: -2, b: 1, c: 1})
        assert ok

    def test_double_branch_from_unit_source_is_infeasible(self):
        a, b, c, d = Cell(0, 0), Cell(0, 1), Cell(1, 0), Cell(1, 1)
        arcs = [(d, b, 1, 10), (d, c, 1, 10), (b, a, 1, 10), (c, a, 1, 10)]
        ok, reach = lower_bounded_flow_feasible([a, b, c, d], arcs,
                                                {a: -3, b: 1, c: 1, d: 1})
        assert not ok
        assert d not in reach  # the violated set certifies the deficit
