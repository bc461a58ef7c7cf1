"""Community currency: accounts, transfers, market prices, settlements.

Balances are integers and every movement is an append-only log row, so a run
can be audited by replaying the log against the opening balances. Transfers
against insufficient credit raise and change nothing; batches apply all rows
or none. The default economy is zero-sum (service payments move existing
units); a minting policy can be switched on, in which case rewards enter as
rows from the reserved account "mint" and payments leave through "burn", and
the conservation audit accounts for both.

Prices are exact rationals. The demand-response update multiplies by
(demand/supply)**alpha and is snapped to denominator 10**6 before clamping
into [p_min, p_max], which keeps the arithmetic exact while the exponent is
irrational. Zero supply pegs a price to p_max; zero demand walks it down to
p_min.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from fractions import Fraction

from .overlay import NodeId
from .resources import RESOURCE_KINDS, ResourceVector

logger = logging.getLogger(__name__)

MINT = "mint"
BURN = "burn"
PRICE_SNAP = 10 ** 6

AccountKey = NodeId | str


class LedgerError(Exception):
    pass


class UnknownAccount(LedgerError):
    pass


class CreditLimitExceeded(LedgerError):
    pass


class ZeroSupply(LedgerError):
    pass


def account_label(key: AccountKey) -> str:
    return key.short if isinstance(key, NodeId) else key


@dataclass(slots=True)
class Account:
    owner: AccountKey
    balance: int
    credit_limit: int = 0


@dataclass(frozen=True, slots=True)
class Transfer:
    at: int
    src: AccountKey
    dst: AccountKey
    amount: int
    reason: str


@dataclass(frozen=True, slots=True)
class MarketConfig:
    alpha: float = 0.5
    p_min: Fraction = Fraction(1)
    p_max: Fraction = Fraction(1000)
    minting: bool = False


class MarketPrice:
    """Per-resource unit prices under the damped demand/supply rule."""

    def __init__(self, initial: dict[str, Fraction], config: MarketConfig):
        for kind in RESOURCE_KINDS:
            if not config.p_min <= initial[kind] <= config.p_max:
                raise ValueError(f"initial {kind} price outside [p_min, p_max]")
        self.prices: dict[str, Fraction] = dict(initial)
        self.config = config

    def update(self, demand: ResourceVector, supply: ResourceVector) -> None:
        for kind in RESOURCE_KINDS:
            self.prices[kind] = self._step(self.prices[kind],
                                           demand.get(kind), supply.get(kind))

    def _step(self, price: Fraction, demand: int, supply: int) -> Fraction:
        cfg = self.config
        if supply <= 0:
            return cfg.p_max
        ratio = demand / supply
        if cfg.alpha == 0.5:
            factor = math.sqrt(ratio)
        else:
            factor = ratio ** cfg.alpha
        raw = float(price) * factor
        snapped = Fraction(round(raw * PRICE_SNAP), PRICE_SNAP)
        return min(max(snapped, cfg.p_min), cfg.p_max)

    def value_of(self, amounts: ResourceVector) -> int:
        """Currency owed for the amounts at current prices, rounded up."""
        total = sum((self.prices[k] * amounts.get(k) for k in RESOURCE_KINDS),
                    Fraction(0))
        return -(-total.numerator // total.denominator) if total > 0 else 0


class Ledger:
    def __init__(self, market: MarketPrice):
        self.market = market
        self.accounts: dict[AccountKey, Account] = {}
        self.log: list[Transfer] = []
        # keyed by owner, not display label: drift must not depend on labels
        self.opening_balances: dict[AccountKey, int] = {}
        self.minted = 0
        self.burned = 0

    # -- accounts -------------------------------------------------------------

    def open_account(self, owner: AccountKey, balance: int = 0,
                     credit_limit: int = 0) -> Account:
        if owner in self.accounts or owner in (MINT, BURN):
            raise LedgerError(f"account exists: {account_label(owner)}")
        if credit_limit < 0:
            raise ValueError("credit limit must be non-negative")
        acct = Account(owner, balance, credit_limit)
        self.accounts[owner] = acct
        self.opening_balances[owner] = balance
        return acct

    def balance(self, owner: AccountKey) -> int:
        return self._account(owner).balance

    def can_cover(self, owner: AccountKey, amount: int) -> bool:
        acct = self._account(owner)
        return acct.balance - amount >= -acct.credit_limit

    def _account(self, owner: AccountKey) -> Account:
        try:
            return self.accounts[owner]
        except KeyError:
            raise UnknownAccount(account_label(owner)) from None

    # -- transfers ------------------------------------------------------------

    def transfer(self, src: AccountKey, dst: AccountKey, amount: int,
                 reason: str, at: int) -> Transfer:
        row = Transfer(at, src, dst, amount, reason)
        self._check(row, {})
        self._apply(row)
        return row

    def apply_batch(self, ops: list[Transfer], at: int) -> list[Transfer]:
        """All rows or none: stage every balance change, then commit."""
        staged: dict[AccountKey, int] = {}
        stamped = [replace(op, at=at) for op in ops]
        for row in stamped:
            self._check(row, staged)
            if row.src != MINT:
                staged[row.src] = staged.get(row.src, 0) - row.amount
            if row.dst != BURN:
                staged[row.dst] = staged.get(row.dst, 0) + row.amount
        for row in stamped:
            self._apply(row)
        return stamped

    def _check(self, row: Transfer, staged: dict[AccountKey, int]) -> None:
        if row.amount < 0:
            raise ValueError("transfer amount must be non-negative")
        if row.dst != BURN:
            self._account(row.dst)
        if row.src != MINT:
            acct = self._account(row.src)
            effective = acct.balance + staged.get(row.src, 0) - row.amount
            if effective < -acct.credit_limit:
                raise CreditLimitExceeded(
                    f"{account_label(row.src)}: {effective} < -{acct.credit_limit}")

    def _apply(self, row: Transfer) -> None:
        if row.src == MINT:
            self.minted += row.amount
        else:
            self.accounts[row.src].balance -= row.amount
        if row.dst == BURN:
            self.burned += row.amount
        else:
            self.accounts[row.dst].balance += row.amount
        self.log.append(row)

    # -- service settlements ----------------------------------------------------

    def settlement_rows(self, requester: AccountKey, host: AccountKey,
                        developer: AccountKey | None, gross: int,
                        subsidy: int, at: int, tag: str = "") -> list[Transfer]:
        """Rows moving `gross` to the host, subsidised up to `subsidy`.

        Requester pays gross minus the subsidy part, the developer account
        covers the rest, the host always receives gross. Under minting the
        payments burn and the reward is minted instead. A non-empty tag is
        appended to each reason so audits can regroup the rows per request.
        """
        if gross <= 0:
            return []
        suffix = f":{tag}" if tag else ""
        part = min(subsidy, gross) if developer is not None else 0
        pay_to = BURN if self.market.config.minting else host
        rows = []
        if gross - part > 0:
            rows.append(Transfer(at, requester, pay_to, gross - part,
                                 f"service-payment{suffix}"))
        if part > 0:
            rows.append(Transfer(at, developer, pay_to, part, f"subsidy{suffix}"))
        if self.market.config.minting:
            rows.append(Transfer(at, MINT, host, gross, f"hosting-reward{suffix}"))
        return rows

    def settle_hosting_reward(self, host: AccountKey, consumed: ResourceVector,
                              at: int) -> Transfer | None:
        """Value the consumed amounts and credit the host per minting policy."""
        reward = self.market.value_of(consumed)
        if reward <= 0:
            return None
        if not self.market.config.minting:
            raise LedgerError("hosting rewards are transfer-settled in zero-sum mode")
        return self.transfer(MINT, host, reward, "hosting-reward", at)

    # -- audits ---------------------------------------------------------------

    def total_balance(self) -> int:
        return sum(a.balance for a in self.accounts.values())

    def conservation_drift(self) -> int:
        """Zero iff balances equal openings plus mint minus burn."""
        opening = sum(self.opening_balances.values())
        return self.total_balance() - (opening + self.minted - self.burned)

    def credit_floor_ok(self) -> bool:
        return all(a.balance >= -a.credit_limit for a in self.accounts.values())

    @staticmethod
    def replay(rows, opening: dict[str, int]) -> dict[str, int]:
        """Rebuild balances from log rows; the audit path for conservation."""
        balances = dict(opening)
        for row in rows:
            src = row.src if isinstance(row.src, str) else row.src.short
            dst = row.dst if isinstance(row.dst, str) else row.dst.short
            if src != MINT:
                balances[src] -= row.amount
            if dst != BURN:
                balances[dst] += row.amount
        return balances

    def balances_by_label(self) -> dict[str, int]:
        return {account_label(k): a.balance for k, a in self.accounts.items()}

    def opening_by_label(self) -> dict[str, int]:
        return {account_label(k): v for k, v in self.opening_balances.items()}
