import json

import pytest

from fixroute.attack import SILENCE
from fixroute.errors import ConfigurationError
from fixroute.fileio import dump_attacks, dump_topology, parse_attacks, parse_topology
from fixroute.graph import Mode, hierarchy_depth, validate
from fixroute.harness import (bad_gadget_scenario, commercial_instance_for_depth, initial_configs,
                              random_commercial_instance, random_shortest_path_instance, run_experiment)
from fixroute.harness.experiment import (audit_witnesses, build_scenario, rerun_cell, run_cell, sweep,
                                         write_repro_bundle)


def _shape(sc):
    return (sorted(sc.graph.nodes), [(e.u, e.v, e.kind) for e in sc.graph.edges], sorted(sc.graph.attackers),
            {a: dict(x.announcements) for a, x in sc.attacks.items()})


class TestGenerators:
    def test_same_seed_same_instance(self):
        assert _shape(random_shortest_path_instance(7, 2, seed=5)) == _shape(random_shortest_path_instance(7, 2, seed=5))
        assert _shape(random_commercial_instance(3, 3, 1, 9)) == _shape(random_commercial_instance(3, 3, 1, 9))

    def test_different_seeds_differ(self):
        shapes = {str(_shape(random_shortest_path_instance(8, 1, seed=s))) for s in range(10)}
        assert len(shapes) > 1

    @pytest.mark.parametrize("seed", range(20))
    def test_commercial_instances_validate(self, seed):
        sc = random_commercial_instance(1 + seed % 5, 3, seed % 3, seed)
        assert validate(sc.graph, Mode.COMMERCIAL).ok

    @pytest.mark.parametrize("depth", range(5))
    def test_depth_targets(self, depth):
        for seed in range(10):
            sc = commercial_instance_for_depth(depth, seed % 3, seed)
            assert hierarchy_depth(sc.graph) == depth
            assert sc.bound == 2 * depth + 1

    def test_single_level_depth(self):
        sc = random_commercial_instance(1, 3, 0, 0)
        assert sc.meta["depth"] <= 1 and sc.bound <= 3

    def test_five_levels(self):
        sc = commercial_instance_for_depth(4, 0, 3)
        assert sc.meta["depth"] == 4 and sc.bound == 9

    def test_attackers_and_sizes(self):
        sc = random_shortest_path_instance(5, 3, seed=1)
        assert len(sc.graph.attackers) == 3 and sc.bound == 5
        with pytest.raises(ConfigurationError):
            random_shortest_path_instance(3, 4)
        with pytest.raises(ConfigurationError):
            random_shortest_path_instance(40)

    def test_attack_routes_are_announcements_from_attacker(self):
        sc = random_shortest_path_instance(9, 3, seed=2)
        d = sc.graph.destination
        for a, att in sc.attacks.items():
            for nb, seq in att.announcements.items():
                assert sc.graph.has_edge(a, nb)
                if seq is not SILENCE:
                    assert seq[0] == a and seq[-1] == d

    def test_initial_configs(self):
        sc = random_shortest_path_instance(6, 2, seed=4)
        cfgs = initial_configs(sc.graph, sc.attacks, 4)
        assert [c.name for c in cfgs] == ["empty", "random", "short-claims"]
        for c in cfgs[1:]:
            for i, sel in c.selected.items():
                assert not sel or sel[0] == i

    def test_round_trip_through_text(self):
        sc = random_commercial_instance(3, 3, 1, 2)
        g = parse_topology(dump_topology(sc.graph))
        assert sorted((e.u, e.v, e.kind) for e in g.edges) == sorted((e.u, e.v, e.kind) for e in sc.graph.edges)
        att = parse_attacks(dump_attacks(sc.attacks, sc.graph), g)
        assert {a: x.announcements for a, x in att.items()} == {a: x.announcements for a, x in sc.attacks.items()}


class TestExperiment:
    def test_clean_gadget(self):
        rep = run_experiment(bad_gadget_scenario(attacked=False), range(50))
        assert rep.ok and len(rep.cells) == 50
        assert all(c.final[n] == (n, 6) for c in rep.cells for n in (1, 2, 3))

    def test_attacked_gadget_oscillates(self):
        sc = bad_gadget_scenario(attacked=True)
        for ci in range(len(sc.configs)):
            c = run_cell(sc, 0, ci)
            assert c.ok, c.failures
            assert c.oscillation["cycle_length"] >= 2
            assert set(c.oscillation["nodes"]) == {1, 2, 3}

    def test_cell_checks(self):
        sc = random_shortest_path_instance(6, 1, seed=3)
        rep = run_experiment(sc, [3], determinism=True, synchronous_check=True)
        assert rep.ok
        for c in rep.cells:
            assert c.oracle_match and c.deterministic and c.probe_stable
            assert c.convergence_round <= 6

    def test_sweep_and_rerun(self, tmp_path):
        rep = sweep("gr", [2], [1], range(3))
        assert rep.ok and len(rep.cells) == 9
        cell = rep.cells[4]
        again = rerun_cell(cell)
        assert again.digest == cell.digest
        sc = build_scenario("gr", 2, 1, cell.seed)
        out = write_repro_bundle(sc, cell, tmp_path)
        assert {p.name for p in out.iterdir()} >= {"topology.txt", "attacks.txt", "cell.json", "rerun.sh"}
        rec = json.loads((out / "cell.json").read_text())
        assert rec["digest"] == cell.digest
        g = parse_topology((out / "topology.txt").read_text())
        assert len(g.edges) == len(sc.graph.edges)

    def test_report_ndjson(self, tmp_path):
        rep = sweep("sp", [3], [0], range(2))
        p = tmp_path / "r.ndjson"
        rep.write_ndjson(p)
        lines = [json.loads(x) for x in p.read_text().splitlines()]
        assert lines[-1]["summary"]["cells"] == 6
        assert all("digest" in x for x in lines[:-1])

    def test_sweep_skips_impossible_attacker_counts(self):
        rep = sweep("sp", [3], [4], range(2))
        assert not rep.cells and not rep.ok

    def test_witness_audit(self):
        audit = None
        for seed in range(10):
            audit = audit_witnesses(commercial_instance_for_depth(3, seed % 3, seed), audit)
        assert audit.ok and audit.checked > 0
