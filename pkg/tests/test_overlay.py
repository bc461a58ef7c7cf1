"""Overlay: identities, routing, super-peers, coordinated transactions."""
from __future__ import annotations

import networkx as nx
import pytest

from c3sim.engine import RngStream
from c3sim.ledger import Transfer
from c3sim.overlay import (
    ID_BITS,
    DuplicateJoin,
    EmptyRegion,
    NodeRecord,
    NoQuorum,
    Overlay,
    OverlayConfig,
    Unreachable,
    UnknownNode,
    generate_identity,
)
from c3sim.resources import ResourceVector

from conftest import chain_overlay, clique_overlay, nid, small_ledger


class TestIdentity:
    def test_same_stream_state_same_id(self):
        a = generate_identity(RngStream(5, "identity"))
        b = generate_identity(RngStream(5, "identity"))
        assert a.node_id == b.node_id
        assert a.public_key == b.public_key

    def test_id_fits_in_256_bits(self):
        assert ID_BITS == 256
        ident = generate_identity(RngStream(5, "identity"))
        assert 0 <= ident.node_id.value < 1 << 256

    def test_hundred_thousand_draws_all_distinct(self):
        rng = RngStream(5, "identity")
        seen = {generate_identity(rng).node_id for _ in range(100_000)}
        assert len(seen) == 100_000


class TestMembership:
    def test_join_then_leave_restores_edges(self):
        overlay, ids = clique_overlay(5)
        before = {n: dict(overlay.adj[n]) for n in ids}
        extra = nid(99)
        overlay.add_record(NodeRecord(extra, "main", ResourceVector(1, 1, 1)))
        overlay.join(extra, 3)
        assert overlay.adj[extra]
        overlay.leave(extra, 4)
        assert overlay.adj[extra] == {}
        assert not overlay.is_online(extra)
        assert {n: dict(overlay.adj[n]) for n in ids} == before

    def test_duplicate_join_and_unknown_leave(self):
        overlay, ids = clique_overlay(3)
        with pytest.raises(DuplicateJoin):
            overlay.join(ids[0], 1)
        overlay.leave(ids[0], 1)
        with pytest.raises(UnknownNode):
            overlay.leave(ids[0], 2)
        with pytest.raises(UnknownNode):
            overlay.join(nid(12345), 1)

    def test_leave_outside_dvsp_touches_only_neighbor_fingerprints(self):
        overlay, ids = clique_overlay(6, m_target=3,
                                      joined_at=[0, 1, 2, 3, 4, 5])
        vsp = overlay.form_dvsp("main", 10)
        assert set(vsp.members) == set(ids[:3])
        outsider = ids[5]
        fp_before = {n: overlay.fingerprint(n) for n in ids}
        overlay.leave(outsider, 11)
        assert overlay.dvsp("main") is vsp
        assert overlay.maintenance(12) == []  # quorum intact, size still met
        assert overlay.dvsp("main").epoch == vsp.epoch
        for n in ids[:5]:
            assert overlay.fingerprint(n) != fp_before[n]  # clique neighbors

    def test_dvsp_member_leave_increments_epoch_next_round(self):
        overlay, ids = clique_overlay(6, m_target=3,
                                      joined_at=[0, 1, 2, 3, 4, 5])
        vsp = overlay.form_dvsp("main", 10)
        overlay.leave(vsp.members[0], 11)
        reformed = overlay.maintenance(12)
        assert len(reformed) == 1
        assert reformed[0].epoch == vsp.epoch + 1
        assert len(reformed[0].members) == 3


class TestRouting:
    def test_two_hop_latencies_5_and_7_deliver_plus_12(self):
        overlay, ids = chain_overlay([5, 7])
        graph = nx.Graph()
        for a in overlay.adj:
            for b, w in overlay.adj[a].items():
                graph.add_edge(a, b, weight=w)
        oracle = nx.dijkstra_path_length(graph, ids[0], ids[2])
        assert oracle == 12
        assert overlay.route(ids[0], ids[2]) == 12

    def test_route_to_self_is_zero(self):
        overlay, ids = chain_overlay([5, 7])
        assert overlay.route(ids[1], ids[1]) == 0
        assert overlay.route(ids[1], ids[1], size=10_000) == 0

    def test_route_to_offline_node_unreachable(self):
        overlay, ids = chain_overlay([5, 7])
        overlay.leave(ids[2], 1)
        with pytest.raises(Unreachable):
            overlay.route(ids[0], ids[2])

    def test_partition_unreachable(self):
        # Middle node down severs the only path.
        overlay, ids = chain_overlay([5, 7])
        overlay.leave(ids[1], 1)
        with pytest.raises(Unreachable):
            overlay.route(ids[0], ids[2])
        assert not overlay.reachable(ids[0], ids[2])

    def test_transfer_term_uses_bottleneck_bandwidth(self):
        # Links carry min(10,40)=10 and min(40,40)=40; bottleneck 10.
        overlay, ids = chain_overlay([5, 7], bandwidths=[10, 40, 40])
        assert overlay.route(ids[0], ids[2]) == 12
        assert overlay.route(ids[0], ids[2], size=25) == 12 + 3  # ceil(25/10)
        assert overlay.route(ids[0], ids[2], size=1) == 12 + 1

    def test_route_agrees_with_networkx_on_built_topology(self):
        cfg = OverlayConfig(degree=4, min_degree=3, inter_region_links=2,
                            intra_latency=5, inter_latency=50, m_target=3)
        overlay = Overlay(cfg, RngStream(17, "overlay"))
        ids = [nid(i + 1) for i in range(36)]
        for i, node in enumerate(ids):
            region = ("a", "b", "c")[i % 3]
            overlay.add_record(NodeRecord(node, region,
                                          ResourceVector(4, 100, 20)))
            overlay.join(node, 0)
        overlay.build(0)
        graph = nx.Graph()
        for a in overlay.adj:
            for b, w in overlay.adj[a].items():
                graph.add_edge(a, b, weight=w)
        for src in ids[::5]:
            oracle = nx.single_source_dijkstra_path_length(graph, src)
            for dst in ids[::7]:
                assert overlay.route(src, dst) == oracle[dst]

    def test_single_node_removal_never_partitions_after_repair(self):
        cfg = OverlayConfig(degree=6, min_degree=3, inter_region_links=3,
                            m_target=3)
        overlay = Overlay(cfg, RngStream(23, "overlay"))
        ids = [nid(i + 1) for i in range(24)]
        for i, node in enumerate(ids):
            overlay.add_record(NodeRecord(node, ("a", "b")[i % 2],
                                          ResourceVector(4, 100, 20)))
            overlay.join(node, 0)
        overlay.build(0)
        for victim in ids[:8]:
            overlay.leave(victim, 1)
            overlay.maintenance(1)
            alive = overlay.online_nodes()
            root = alive[0]
            assert all(overlay.reachable(root, n) for n in alive)
            overlay.join(victim, 2)
            overlay.maintenance(2)


class TestFingerprints:
    def test_identical_neighbor_sets_identical_fingerprints(self):
        cfg = OverlayConfig(degree=3, min_degree=1, inter_region_links=0)
        overlay = Overlay(cfg, RngStream(7, "overlay"))
        center, leaves = nid(1), [nid(i) for i in (2, 3, 4, 5)]
        for i, node in enumerate([center] + leaves):
            overlay.add_record(NodeRecord(node, f"r{i}",
                                          ResourceVector(1, 1, 1)))
            overlay.join(node, 0)
        for leaf in leaves:
            overlay.add_link(center, leaf, 5)
        prints = {leaf: overlay.fingerprint(leaf) for leaf in leaves}
        assert len(set(prints.values())) == 1

    def test_neighbor_change_changes_fingerprint(self):
        overlay, ids = clique_overlay(4)
        before = overlay.fingerprint(ids[0])
        assert overlay.fingerprint(ids[0]) == before  # stable when idle
        overlay.leave(ids[1], 1)
        assert overlay.fingerprint(ids[0]) != before


class TestSuperPeers:
    def test_single_node_region_clamps_to_size_one(self):
        overlay, ids = clique_overlay(1, m_target=5)
        vsp = overlay.form_dvsp("main", 0)
        assert vsp.members == (ids[0],)
        assert vsp.quorum == 1

    def test_empty_region_raises(self):
        overlay, ids = clique_overlay(2)
        with pytest.raises(EmptyRegion):
            overlay.form_dvsp("nowhere", 0)
        overlay.leave(ids[0], 1)
        overlay.leave(ids[1], 1)
        with pytest.raises(EmptyRegion):
            overlay.form_dvsp("main", 2)

    def test_members_are_longest_uptime_ties_by_id(self):
        overlay, ids = clique_overlay(5, m_target=3,
                                      joined_at=[0, 10, 5, 3, 5])
        vsp = overlay.form_dvsp("main", 20)
        # online_since 0 < 3 < 5, tie at 5 broken by ascending id (node 3).
        assert vsp.members == (ids[0], ids[3], ids[2])

    def test_kill_floor_half_members_reforms_full_within_two_rounds(self):
        overlay, ids = clique_overlay(9, m_target=5,
                                      joined_at=list(range(9)))
        vsp = overlay.form_dvsp("main", 10)
        for member in vsp.members[: len(vsp.members) // 2]:
            overlay.leave(member, 11)
        rounds = 0
        for now in (12, 13):
            rounds += 1
            overlay.maintenance(now)
            current = overlay.dvsp("main")
            if current.epoch > vsp.epoch and len(current.members) == 5:
                break
        assert rounds <= 2
        current = overlay.dvsp("main")
        assert current.epoch == vsp.epoch + 1
        assert len(current.members) == 5
        assert all(overlay.is_online(m) for m in current.members)


class TestTransactions:
    @staticmethod
    def _fixture():
        overlay, ids = clique_overlay(4, m_target=3, joined_at=[0, 1, 2, 3])
        overlay.form_dvsp("main", 5)
        ledger = small_ledger([(ids[0], 10), (ids[1], 0), (ids[2], 0)])
        return overlay, ids, ledger

    def test_empty_op_list_commits_without_state_change(self):
        overlay, ids, ledger = self._fixture()
        snapshot = ledger.balances_by_label()
        result = overlay.execute_transaction("main", [], ledger, 6)
        assert result.committed
        assert ledger.balances_by_label() == snapshot
        assert ledger.log == []

    def test_offline_receiver_aborts_with_balances_unchanged(self):
        overlay, ids, ledger = self._fixture()
        overlay.leave(ids[1], 6)
        snapshot = ledger.balances_by_label()
        ops = [Transfer(0, ids[0], ids[1], 4, "pay")]
        result = overlay.execute_transaction("main", ops, ledger, 7)
        assert not result.committed
        assert result.reason.startswith("participant-offline")
        assert ledger.balances_by_label() == snapshot
        assert ledger.log == []

    def test_credit_violation_in_op_3_rolls_back_ops_1_and_2(self):
        overlay, ids, ledger = self._fixture()
        snapshot = ledger.balances_by_label()
        ops = [
            Transfer(0, ids[0], ids[1], 4, "one"),
            Transfer(0, ids[1], ids[2], 2, "two"),
            Transfer(0, ids[2], ids[0], 50, "three"),  # c would go to -48
        ]
        result = overlay.execute_transaction("main", ops, ledger, 7)
        assert not result.committed
        assert result.reason == "CreditLimitExceeded"
        assert ledger.balances_by_label() == snapshot
        assert ledger.log == []

    def test_full_batch_applies_atomically(self):
        overlay, ids, ledger = self._fixture()
        ops = [
            Transfer(0, ids[0], ids[1], 4, "one"),
            Transfer(0, ids[1], ids[2], 2, "two"),
        ]
        result = overlay.execute_transaction("main", ops, ledger, 7)
        assert result.committed
        assert ledger.balance(ids[0]) == 6
        assert ledger.balance(ids[1]) == 2
        assert ledger.balance(ids[2]) == 2
        assert len(ledger.log) == 2
        assert all(row.at == 7 for row in ledger.log)

    def test_lost_quorum_raises(self):
        overlay, ids, ledger = self._fixture()
        vsp = overlay.dvsp("main")
        for member in vsp.members[: vsp.quorum]:
            overlay.leave(member, 6)
        with pytest.raises(NoQuorum):
            overlay.execute_transaction("main", [], ledger, 7)
        with pytest.raises(NoQuorum):
            overlay.execute_transaction("unknown-region", [], ledger, 7)
