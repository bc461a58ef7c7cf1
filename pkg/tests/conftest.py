"""Shared builders: scripted overlays, flat-priced markets, tiny ledgers.

Fixtures here favour exact control over realism. Chains put every node in
its own region so no automatic wiring happens and tests own every edge;
cliques give a fully connected single region for placement and DVSP work.
"""
from __future__ import annotations

from fractions import Fraction

from c3sim.engine import RngStream
from c3sim.ledger import Ledger, MarketConfig, MarketPrice
from c3sim.overlay import NodeId, NodeRecord, Overlay, OverlayConfig
from c3sim.resources import ResourceVector


def nid(i: int) -> NodeId:
    return NodeId(i)


def flat_market(price: int = 1, minting: bool = False,
                p_max: int = 1000) -> MarketPrice:
    p = Fraction(price)
    return MarketPrice(
        {"compute": p, "storage": p, "bandwidth": p},
        MarketConfig(p_min=Fraction(1), p_max=Fraction(p_max), minting=minting),
    )


def chain_overlay(latencies, bandwidths=None, m_target=3):
    """Path graph over nodes 1..n, one region each, explicit link latencies."""
    n = len(latencies) + 1
    bw = bandwidths or [1000] * n
    cfg = OverlayConfig(degree=2, min_degree=1, inter_region_links=0,
                        m_target=m_target)
    overlay = Overlay(cfg, RngStream(7, "overlay"))
    ids = [nid(i + 1) for i in range(n)]
    for i, node in enumerate(ids):
        overlay.add_record(NodeRecord(node, f"r{i}",
                                      ResourceVector(10, 1000, bw[i])))
        overlay.join(node, 0)
    for i, latency in enumerate(latencies):
        overlay.add_link(ids[i], ids[i + 1], latency)
    return overlay, ids


def clique_overlay(n, region="main", m_target=3, joined_at=None,
                   compute=10, storage=10**6, bandwidth=1000):
    """n nodes in one region, every pair wired at the intra latency."""
    cfg = OverlayConfig(degree=max(3, n - 1), min_degree=1,
                        inter_region_links=0, m_target=m_target)
    overlay = Overlay(cfg, RngStream(7, "overlay"))
    ids = [nid(i + 1) for i in range(n)]
    for i, node in enumerate(ids):
        overlay.add_record(NodeRecord(
            node, region, ResourceVector(compute, storage, bandwidth)))
        overlay.join(node, joined_at[i] if joined_at else 0)
    overlay.build(0)
    return overlay, ids


def small_ledger(accounts, market=None) -> Ledger:
    ledger = Ledger(market or flat_market())
    for owner, balance, *rest in accounts:
        ledger.open_account(owner, balance, rest[0] if rest else 0)
    return ledger
