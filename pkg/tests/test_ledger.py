"""Currency: transfers, batches, market prices, settlements, audits."""
from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from c3sim.ledger import (
    BURN,
    MINT,
    CreditLimitExceeded,
    Ledger,
    MarketConfig,
    MarketPrice,
    Transfer,
    UnknownAccount,
)
from c3sim.resources import ResourceVector

from conftest import flat_market, small_ledger


class TestTransfers:
    def test_zero_amount_is_a_logged_noop(self):
        ledger = small_ledger([("a", 10), ("b", 0)])
        ledger.transfer("a", "b", 0, "ping", at=1)
        assert ledger.balance("a") == 10
        assert ledger.balance("b") == 0
        assert len(ledger.log) == 1

    def test_ten_transfers_four_totals_unchanged(self):
        ledger = small_ledger([("a", 10), ("b", 0)])
        total_before = ledger.total_balance()
        ledger.transfer("a", "b", 4, "pay", at=1)
        assert ledger.balance("a") == 6
        assert ledger.balance("b") == 4
        assert ledger.total_balance() == total_before

    def test_credit_limit_blocks_and_leaves_state_alone(self):
        ledger = small_ledger([("a", 0, 5), ("b", 0)])
        with pytest.raises(CreditLimitExceeded):
            ledger.transfer("a", "b", 6, "pay", at=1)
        assert ledger.balance("a") == 0
        assert ledger.balance("b") == 0
        assert ledger.log == []
        ledger.transfer("a", "b", 5, "pay", at=2)  # exactly at the floor
        assert ledger.balance("a") == -5
        assert ledger.credit_floor_ok()

    def test_unknown_account_raises(self):
        ledger = small_ledger([("a", 10)])
        with pytest.raises(UnknownAccount):
            ledger.transfer("a", "ghost", 1, "pay", at=1)
        with pytest.raises(UnknownAccount):
            ledger.transfer("ghost", "a", 1, "pay", at=1)

    def test_negative_amount_rejected(self):
        ledger = small_ledger([("a", 10), ("b", 0)])
        with pytest.raises(ValueError):
            ledger.transfer("a", "b", -1, "pay", at=1)


class TestBatches:
    def test_batch_applies_all_rows_with_one_stamp(self):
        ledger = small_ledger([("a", 10), ("b", 0), ("c", 0)])
        rows = ledger.apply_batch(
            [Transfer(0, "a", "b", 3, "x"), Transfer(0, "b", "c", 3, "y")],
            at=9)
        assert [r.at for r in rows] == [9, 9]
        assert (ledger.balance("a"), ledger.balance("b"),
                ledger.balance("c")) == (7, 0, 3)

    def test_batch_checks_staged_balances_not_just_current(self):
        # b starts at 0 but receives 3 in the same batch, then spends 2.
        ledger = small_ledger([("a", 10), ("b", 0), ("c", 0)])
        ledger.apply_batch(
            [Transfer(0, "a", "b", 3, "x"), Transfer(0, "b", "c", 2, "y")],
            at=1)
        assert ledger.balance("b") == 1

    def test_failed_batch_changes_nothing(self):
        ledger = small_ledger([("a", 10), ("b", 0)])
        with pytest.raises(CreditLimitExceeded):
            ledger.apply_batch(
                [Transfer(0, "a", "b", 3, "x"), Transfer(0, "b", "a", 9, "y")],
                at=1)
        assert ledger.balance("a") == 10
        assert ledger.balance("b") == 0
        assert ledger.log == []

    @given(st.lists(
        st.tuples(st.sampled_from(["a", "b", "c"]),
                  st.sampled_from(["a", "b", "c"]),
                  st.integers(min_value=0, max_value=30)),
        min_size=1, max_size=8))
    @settings(max_examples=150, deadline=None)
    def test_batch_is_all_or_nothing(self, raw_ops):
        ledger = small_ledger([("a", 20, 5), ("b", 0, 0), ("c", 3, 10)])
        ops = [Transfer(0, s, d, amt, "w") for s, d, amt in raw_ops if s != d]
        before = ledger.balances_by_label()
        naive = dict(before)
        for op in ops:  # independent oracle: plain dict arithmetic
            naive[op.src] -= op.amount
            naive[op.dst] += op.amount
        try:
            ledger.apply_batch(ops, at=1)
        except (CreditLimitExceeded, ValueError):
            assert ledger.balances_by_label() == before
            assert ledger.log == []
        else:
            assert ledger.balances_by_label() == naive
        assert ledger.conservation_drift() == 0


class TestPrices:
    def test_demand_equals_supply_price_unchanged(self):
        market = flat_market(price=10)
        market.update(ResourceVector(5, 5, 5), ResourceVector(5, 5, 5))
        assert market.prices["compute"] == Fraction(10)
        assert market.prices["storage"] == Fraction(10)
        assert market.prices["bandwidth"] == Fraction(10)

    def test_demand_four_times_supply_doubles_price(self):
        # sqrt(4) = 2 exactly, p_max=100 leaves room: 10 -> 20.
        market = MarketPrice(
            {k: Fraction(10) for k in ("compute", "storage", "bandwidth")},
            MarketConfig(alpha=0.5, p_min=Fraction(1), p_max=Fraction(100)))
        market.update(ResourceVector(8, 8, 8), ResourceVector(2, 2, 2))
        assert market.prices["compute"] == Fraction(20)

    def test_zero_demand_walks_to_p_min(self):
        market = flat_market(price=700)
        for _ in range(3):
            market.update(ResourceVector(), ResourceVector(5, 5, 5))
        assert market.prices["compute"] == market.config.p_min

    def test_zero_supply_pegs_to_p_max(self):
        market = flat_market(price=10)
        market.update(ResourceVector(5, 5, 5), ResourceVector(0, 1, 1))
        assert market.prices["compute"] == market.config.p_max
        assert market.prices["storage"] < market.config.p_max

    def test_clamped_at_p_max(self):
        market = flat_market(price=900)
        market.update(ResourceVector(10**6, 0, 0), ResourceVector(1, 1, 1))
        assert market.prices["compute"] == market.config.p_max

    def test_initial_price_outside_bounds_rejected(self):
        with pytest.raises(ValueError):
            MarketPrice({k: Fraction(0) for k in ("compute", "storage",
                                                  "bandwidth")},
                        MarketConfig())

    @given(st.lists(st.tuples(st.integers(0, 50), st.integers(0, 50)),
                    min_size=1, max_size=40))
    @settings(max_examples=100, deadline=None)
    def test_bounds_hold_and_sequence_is_deterministic(self, series):
        runs = []
        for _ in range(2):
            market = flat_market(price=10)
            seen = []
            for demand, supply in series:
                market.update(ResourceVector(demand, demand, demand),
                              ResourceVector(supply, supply, supply))
                price = market.prices["compute"]
                assert market.config.p_min <= price <= market.config.p_max
                seen.append(price)
            runs.append(seen)
        assert runs[0] == runs[1]

    def test_value_of_rounds_up_against_the_payer(self):
        market = flat_market(price=2)
        assert market.value_of(ResourceVector(compute=3)) == 6
        assert market.value_of(ResourceVector()) == 0
        market.prices["compute"] = Fraction(3, 2)
        assert market.value_of(ResourceVector(compute=1)) == 2  # ceil(1.5)


class TestSettlements:
    def test_subsidy_covers_gross_requester_pays_zero(self):
        ledger = small_ledger([("req", 0), ("host", 0), ("dev", 100)])
        rows = ledger.settlement_rows("req", "host", "dev", gross=5,
                                      subsidy=9, at=3)
        ledger.apply_batch(rows, at=3)
        assert ledger.balance("req") == 0
        assert ledger.balance("host") == 5
        assert ledger.balance("dev") == 95

    def test_partial_subsidy_splits_the_debit(self):
        ledger = small_ledger([("req", 10), ("host", 0), ("dev", 100)])
        rows = ledger.settlement_rows("req", "host", "dev", gross=5,
                                      subsidy=2, at=3, tag="41")
        assert {r.reason for r in rows} == {"service-payment:41",
                                            "subsidy:41"}
        ledger.apply_batch(rows, at=3)
        assert ledger.balance("req") == 7
        assert ledger.balance("host") == 5
        assert ledger.balance("dev") == 98

    def test_requester_debit_equals_host_credit_in_zero_sum(self):
        ledger = small_ledger([("req", 50), ("host", 0), ("dev", 50)])
        rows = ledger.settlement_rows("req", "host", "dev", gross=9,
                                      subsidy=4, at=1)
        ledger.apply_batch(rows, at=1)
        paid = (50 - ledger.balance("req")) + (50 - ledger.balance("dev"))
        assert paid == ledger.balance("host") == 9
        assert ledger.conservation_drift() == 0

    def test_zero_gross_yields_no_rows(self):
        ledger = small_ledger([("req", 10), ("host", 0)])
        assert ledger.settlement_rows("req", "host", None, 0, 0, at=1) == []

    def test_minting_routes_payment_to_burn_and_reward_from_mint(self):
        ledger = small_ledger([("req", 50), ("host", 0), ("dev", 50)],
                              market=flat_market(minting=True))
        rows = ledger.settlement_rows("req", "host", "dev", gross=6,
                                      subsidy=2, at=1)
        assert [(r.src, r.dst) for r in rows] == [
            ("req", BURN), ("dev", BURN), (MINT, "host")]
        ledger.apply_batch(rows, at=1)
        assert ledger.balance("host") == 6
        assert ledger.minted == 6
        assert ledger.burned == 6
        assert ledger.conservation_drift() == 0

    def test_hosting_reward_three_compute_at_price_two_is_six(self):
        ledger = small_ledger([("host", 0)], market=flat_market(
            price=2, minting=True))
        row = ledger.settle_hosting_reward("host", ResourceVector(compute=3),
                                           at=4)
        assert row.amount == 6
        assert ledger.balance("host") == 6

    def test_zero_consumption_zero_reward(self):
        ledger = small_ledger([("host", 0)], market=flat_market(minting=True))
        assert ledger.settle_hosting_reward("host", ResourceVector(), at=4) is None
        assert ledger.log == []


class TestAudits:
    @given(st.lists(
        st.tuples(st.sampled_from(["a", "b", "c", MINT]),
                  st.sampled_from(["a", "b", "c", BURN]),
                  st.integers(min_value=0, max_value=25)),
        min_size=0, max_size=30))
    @settings(max_examples=150, deadline=None)
    def test_replay_reproduces_final_balances(self, raw_ops):
        ledger = small_ledger([("a", 30, 5), ("b", 10, 0), ("c", 0, 8)])
        for src, dst, amount in raw_ops:
            if src == dst:
                continue
            try:
                ledger.transfer(src, dst, amount, "w", at=1)
            except CreditLimitExceeded:
                pass
            assert ledger.credit_floor_ok()
        replayed = Ledger.replay(ledger.log, ledger.opening_by_label())
        assert replayed == ledger.balances_by_label()
        assert ledger.conservation_drift() == 0

    def test_drift_definition_tracks_mint_and_burn(self):
        ledger = small_ledger([("a", 10)], market=flat_market(minting=True))
        ledger.transfer(MINT, "a", 7, "hosting-reward", at=1)
        ledger.transfer("a", BURN, 2, "service-payment", at=2)
        assert ledger.total_balance() == 15
        assert ledger.minted == 7
        assert ledger.burned == 2
        assert ledger.conservation_drift() == 0
