import textwrap

import pytest

from conftest import connected_topology
from meshroute.bbbc import BbbcConfig
from meshroute.fuzzy import default_system
from meshroute.oracle import dijkstra
from meshroute.sim import (
    ConfigError,
    RoutingTable,
    ScenarioConfig,
    _rounds,
    compare_with_oracle,
    comparison_to_csv,
    cost_all_links,
    load_scenario_config,
    records_to_csv,
    run_scenario,
)
from meshroute.topology import ChurnEvent, Node, generate_random_topology, loads

LINE_TEXT = """\
wmn v1 3 500 500 0
node 1 0 0 1 250
node 2 200 0 1 250
node 3 400 0 1 250
edge 1 2 0.8 10 2
edge 2 3 0.6 20 4
"""

FAST = BbbcConfig(10, 20)


def line_scenario(**kw):
    return ScenarioConfig(topology=loads(LINE_TEXT), pairs=((1, 3),), bbbc=FAST, **kw)


class TestCostAllLinks:
    def test_costs_every_link_in_unit_interval(self, fis):
        topo = generate_random_topology(30, (500, 500), 250, seed=1)
        costed = cost_all_links(topo, fis)
        assert costed.is_costed and not topo.is_costed
        for u, v, _ in costed.iter_edges():
            assert 0 < costed.cost(u, v) < 1

    def test_idempotent(self, fis):
        topo = generate_random_topology(30, (500, 500), 250, seed=1)
        once = cost_all_links(topo, fis)
        twice = cost_all_links(once, fis)
        assert {e: l.cost for e, l in once.edges.items()} == {e: l.cost for e, l in twice.edges.items()}

    def test_weaker_endpoint_drives_cost(self, fis):
        strong = loads(LINE_TEXT)
        weak = strong.with_energies({2: 0.2})
        a, b = cost_all_links(strong, fis), cost_all_links(weak, fis)
        assert b.cost(1, 2) > a.cost(1, 2)
        assert b.cost(2, 3) > a.cost(2, 3)


class TestRunScenario:
    def test_two_nodes_one_epoch(self):
        cfg = ScenarioConfig(topology=loads("wmn v1 2 500 500 0\nnode 1 0 0 1 250\nnode 2 100 0 1 250\nedge 1 2 0.5 10 1\n"), bbbc=FAST)
        records, table = run_scenario(cfg)
        assert [r.path for r in records] == [(1, 2)]
        assert table.get(1, 2)[0].nodes == (1, 2)

    def test_disconnect_then_rejoin(self):
        cfg = line_scenario(
            epochs=3,
            schedule=(ChurnEvent("leave", 2, 2), ChurnEvent("join", Node(4, 200, 100), 3)),
        )
        records, table = run_scenario(cfg)
        assert [r.epoch for r in records] == [1, 2, 3]
        assert records[0].path == (1, 2, 3)
        assert not records[1].reachable and records[1].path_label() == "unreachable"
        assert records[2].path == (1, 4, 3)
        assert table.get(1, 3)[1] == 3

    def test_unreachable_clears_route(self):
        cfg = line_scenario(epochs=2, schedule=(ChurnEvent("leave", 2, 2),))
        _, table = run_scenario(cfg)
        assert table.get(1, 3) is None

    def test_deterministic(self):
        cfg = ScenarioConfig(n=30, epochs=4, joins_per_epoch=2, leaves_per_epoch=2, bbbc=FAST, seed=5)
        a, _ = run_scenario(cfg)
        b, _ = run_scenario(cfg)
        assert records_to_csv(a, timing=False) == records_to_csv(b, timing=False)
        c, _ = run_scenario(ScenarioConfig(n=30, epochs=4, joins_per_epoch=2, leaves_per_epoch=2, bbbc=FAST, seed=6))
        assert records_to_csv(a, timing=False) != records_to_csv(c, timing=False)

    def test_records_valid_against_own_snapshot(self):
        cfg = ScenarioConfig(n=40, epochs=5, joins_per_epoch=3, leaves_per_epoch=3, bbbc=FAST, seed=2,
                             pairs=((1, 40), (2, 39)))
        for snap, records, paths in _rounds(cfg, default_system()):
            assert snap.epoch == records[0].epoch
            snap.validate()
            for rec, path in zip(records, paths):
                if path is not None:
                    path.validate(snap, rec.source, rec.terminal)
                    assert rec.nodes == len(snap)

    def test_protected_nodes_survive_churn(self):
        cfg = ScenarioConfig(n=15, epochs=8, leaves_per_epoch=3, joins_per_epoch=1, bbbc=FAST, seed=1,
                             pairs=((1, 15), (3, 7)))
        sizes = []
        for snap, _, _ in _rounds(cfg, default_system()):
            assert {1, 15, 3, 7} <= set(snap.nodes)
            sizes.append(len(snap))
        # three leave and one joins per epoch until only the protected four and the newest joiner are left
        assert sizes == [15, 13, 11, 9, 7, 5, 5, 5]

    def test_random_joins_leave_scheduled_ids_free(self):
        late = Node(31, 100, 100)
        cfg = ScenarioConfig(n=30, epochs=4, joins_per_epoch=2, bbbc=FAST, seed=4,
                             schedule=(ChurnEvent("join", late, 4),))
        snaps = [snap for snap, _, _ in _rounds(cfg, default_system())]
        assert 31 not in snaps[2] and snaps[3].nodes[31] == late
        assert sorted(snaps[3].nodes)[-7:] == [31, 32, 33, 34, 35, 36, 37]

    def test_energy_drains_along_used_paths(self, fis):
        cfg = line_scenario(epochs=3, energy_drain=0.1)
        costs = [recs[0].cost for _, recs, _ in _rounds(cfg, fis)]
        assert costs[0] < costs[1] < costs[2]
        flat = [recs[0].cost for _, recs, _ in _rounds(line_scenario(epochs=3, energy_drain=0.0), fis)]
        assert flat[0] == flat[1] == flat[2]


class TestConfigValidation:
    @pytest.mark.parametrize(
        "kwargs,match",
        [
            (dict(epochs=0), "epochs"),
            (dict(pairs=((1, 1),)), "source equals terminal"),
            (dict(pairs=((1, 99),)), "not in the initial"),
            (dict(epochs=2, schedule=(ChurnEvent("leave", 1, 2),)), "live source"),
            (dict(epochs=2, schedule=(ChurnEvent("leave", 5, 3),)), "outside"),
            (dict(leaves_per_epoch=-1), "churn"),
            (dict(energy_drain=2.0), "energy_drain"),
        ],
    )
    def test_rejects(self, kwargs, match):
        with pytest.raises(ConfigError, match=match):
            run_scenario(ScenarioConfig(n=10, bbbc=FAST, **kwargs))


class TestCompare:
    def test_gaps_non_negative(self):
        rows = compare_with_oracle(ScenarioConfig(n=30, epochs=4, joins_per_epoch=1, leaves_per_epoch=1,
                                                  bbbc=FAST, seed=3))
        for r in rows:
            if r.gap is not None:
                assert r.gap >= 0

    def test_two_node_gap_zero(self):
        cfg = ScenarioConfig(topology=loads("wmn v1 2 500 500 0\nnode 1 0 0 1 250\nnode 2 100 0 1 250\nedge 1 2 0.5 10 1\n"), bbbc=FAST)
        (row,) = compare_with_oracle(cfg)
        assert row.gap == 0.0

    def test_small_instances_mostly_exact(self):
        zero = total = 0
        for seed in range(20):
            n = 5 + seed % 5
            topo = connected_topology(n, seed)
            for r in compare_with_oracle(ScenarioConfig(topology=topo, bbbc=BbbcConfig(20, 100), seed=seed)):
                total += 1
                zero += r.gap == 0
        assert zero >= 0.95 * total

    def test_large_report_well_formed(self):
        rows = compare_with_oracle(ScenarioConfig(n=100, area=(1000, 1000), bbbc=FAST, seed=4))
        text = comparison_to_csv(rows, timing=False)
        lines = text.splitlines()
        assert lines[0] == "epoch,source,terminal,bbbc_cost,dijkstra_cost,gap,bbbc_sec,dijkstra_sec"
        assert len(lines) == 2
        assert lines[1].endswith(",0,0")


def test_routing_table():
    table = RoutingTable()
    assert table.get(1, 2) is None
    table.update(1, 2, None, 1)
    assert table.get(1, 2) is None


def test_records_csv_format():
    records, _ = run_scenario(line_scenario(epochs=2, schedule=(ChurnEvent("leave", 2, 2),)))
    lines = records_to_csv(records, timing=False).splitlines()
    assert lines[0] == "epoch,nodes,generations,path_cost,time_sec,path"
    assert lines[1].startswith("1,3,20,0.") and lines[1].endswith(",0,1-2-3")
    assert lines[2] == "2,2,0,,0,unreachable"


class TestScenarioFile:
    def test_full_file(self, tmp_path):
        (tmp_path / "line.wmn").write_text(LINE_TEXT)
        cfg_path = tmp_path / "s.cfg"
        cfg_path.write_text(textwrap.dedent("""\
            # churn example
            topology = line.wmn
            pairs = 1-3
            epochs = 3
            population = 8
            generations = 15   # short run
            energy_drain = 0.05
            seed = 12
            leave = 2:2
            join = 3:4:200:100:0.9
            """))
        cfg = load_scenario_config(cfg_path)
        assert cfg.pairs == ((1, 3),) and cfg.epochs == 3 and cfg.seed == 12
        assert cfg.bbbc.population_size == 8 and cfg.bbbc.max_generations == 15 and cfg.bbbc.seed == 12
        assert cfg.schedule[1].node == Node(4, 200, 100, 0.9, 250)
        records, _ = run_scenario(cfg)
        assert [r.path_label() for r in records] == ["1-2-3", "unreachable", "1-4-3"]
        assert load_scenario_config(cfg_path, seed=99).seed == 99

    def test_generated_topology_keys(self, tmp_path):
        p = tmp_path / "g.cfg"
        p.write_text("n=12\nwidth=800\nheight=600\nthroughput=0.2,0.9\njoins_per_epoch=1\n")
        cfg = load_scenario_config(p)
        assert cfg.n == 12 and cfg.area == (800.0, 600.0)
        assert cfg.distributions.throughput == (0.2, 0.9)

    @pytest.mark.parametrize("body,match", [
        ("n 12\n", "key=value"),
        ("colour=blue\n", "unknown key"),
        ("n=twelve\n", "line 1"),
        ("join=1:4\n", "line 1"),
        ("population=1\n", "population_size"),
    ])
    def test_errors(self, tmp_path, body, match):
        p = tmp_path / "bad.cfg"
        p.write_text(body)
        with pytest.raises(ConfigError, match=match):
            load_scenario_config(p)


def test_oracle_agrees_on_first_epoch_snapshot(fis):
    cfg = ScenarioConfig(n=25, bbbc=BbbcConfig(seed=0), seed=7)
    rows = compare_with_oracle(cfg, fis)
    topo = cost_all_links(generate_random_topology(25, (500, 500), 250, 7), fis)
    assert rows[0].dijkstra_cost == dijkstra(topo, 1, 25).cost
