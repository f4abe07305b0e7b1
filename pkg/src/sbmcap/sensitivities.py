"""Bump-and-revalue delta sensitivities.

Spot classes use a one-sided 1% relative bump:

    s = [V(1.01 x) - V(x)] / 0.01

GIRR uses a one-sided 1 basis point absolute bump per standard tenor:

    s_t = [V(z + 1bp tent at t) - V(z)] / 0.0001

where the tent is the piecewise-linear hat function that is 1 at the bumped
grid tenor, 0 at the adjacent grid tenors, and flat outside the grid ends.
The tents over all grid tenors sum to 1 everywhere, so the tenor deltas of a
bond add up to its parallel-bump delta (exactly, for flows on grid dates).

For linear spot instruments the relative bump recovers the position value:
10,000 XOM shares at 110 give s = 1,100,000, the position's dollar value.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, replace

from .portfolio import (
    Bond,
    CashEquity,
    CommodityFuture,
    FXPosition,
    Instrument,
    IssuerInfo,
    MarketData,
    Portfolio,
    PortfolioError,
    ZeroCurve,
    assign_bucket,
    value,
)
from .rulebook import RiskClass, Rulebook, RulebookError

# One-sided bump sizes; deltas are scaled back to per-unit terms.
REL_BUMP = 0.01
GIRR_BUMP = 0.0001


class SensitivityError(Exception):
    """One or more positions failed; carries every issue, not just the first."""

    def __init__(self, issues: list["InstrumentIssue"]):
        self.issues = tuple(issues)
        lines = ", ".join(str(i) for i in self.issues)
        super().__init__(f"{len(self.issues)} position(s) failed: {lines}")


@dataclass(frozen=True)
class InstrumentIssue:
    """Where in the portfolio a computation failed and why."""

    index: int
    stage: str
    message: str

    def __str__(self) -> str:
        return f"position {self.index} ({self.stage}): {self.message}"


@dataclass(frozen=True)
class RiskFactorKey:
    """Identity of one delta risk factor.

    ``tenor`` is present exactly for GIRR factors; spot factors carry None.
    """

    risk_class: RiskClass
    bucket: int
    name: str
    tenor: float | None = None

    def __post_init__(self) -> None:
        if (self.tenor is not None) != (self.risk_class is RiskClass.GIRR):
            raise ValueError("tenor must be set for GIRR factors and only for GIRR factors")

    def factor_ref(self) -> tuple[str, float | None]:
        """(name, tenor) pair used by rulebook correlation lookups."""
        return (self.name, self.tenor)

    def sort_key(self) -> tuple[str, int, str, float]:
        return (self.risk_class.value, self.bucket, self.name, self.tenor if self.tenor is not None else -1.0)


@dataclass(frozen=True)
class SensitivityRecord:
    key: RiskFactorKey
    value: float


def equity_delta(instr: CashEquity, md: MarketData, bucket: int) -> SensitivityRecord:
    """Delta to the issuer's spot price from a 1% relative bump."""
    base = value(instr, md)
    price = md.equity_price(instr.issuer_id)
    bumped_md = replace(md, equity_prices={**md.equity_prices, instr.issuer_id: price * (1.0 + REL_BUMP)})
    s = (value(instr, bumped_md) - base) / REL_BUMP
    key = RiskFactorKey(risk_class=RiskClass.EQUITY, bucket=bucket, name=instr.issuer_id)
    return SensitivityRecord(key=key, value=s)


def fx_delta(instr: FXPosition, md: MarketData, bucket: int) -> SensitivityRecord:
    """Delta to the foreign currency's spot against the reporting currency."""
    base = value(instr, md)
    spot = md.fx_spot(instr.foreign_currency)
    bumped_md = replace(md, fx_spots={**md.fx_spots, instr.foreign_currency: spot * (1.0 + REL_BUMP)})
    s = (value(instr, bumped_md) - base) / REL_BUMP
    key = RiskFactorKey(risk_class=RiskClass.FX, bucket=bucket, name=instr.foreign_currency)
    return SensitivityRecord(key=key, value=s)


def commodity_delta(instr: CommodityFuture, md: MarketData, bucket: int) -> SensitivityRecord:
    """Delta to the commodity spot price from a 1% relative bump."""
    base = value(instr, md)
    price = md.commodity_price(instr.commodity_id)
    bumped_md = replace(md, commodity_prices={**md.commodity_prices, instr.commodity_id: price * (1.0 + REL_BUMP)})
    s = (value(instr, bumped_md) - base) / REL_BUMP
    key = RiskFactorKey(risk_class=RiskClass.COMMODITY, bucket=bucket, name=instr.commodity_id)
    return SensitivityRecord(key=key, value=s)


def girr_deltas(instr: Bond, md: MarketData, grid: tuple[float, ...], bucket: int) -> list[SensitivityRecord]:
    """Per-tenor curve deltas of a bond.

    One record per standard tenor whose 1bp tent bump moves the bond value;
    tenors the bond has no exposure to are dropped.
    """
    base = value(instr, md)
    records: list[SensitivityRecord] = []
    for tenor in grid:
        bumped = value(instr, replace(md, zero_curve=tent_bumped_curve(md.zero_curve, grid, tenor, GIRR_BUMP)))
        s = (bumped - base) / GIRR_BUMP
        if s == 0.0:
            continue
        key = RiskFactorKey(risk_class=RiskClass.GIRR, bucket=bucket, name=instr.currency, tenor=tenor)
        records.append(SensitivityRecord(key=key, value=s))
    return records


def tent_bumped_curve(curve: ZeroCurve, grid: tuple[float, ...], tenor: float, size: float) -> ZeroCurve:
    """Curve shifted by ``size`` times the hat function centered at ``tenor``.

    Both the base curve and the tent are piecewise linear, so their sum is
    represented exactly on the union of the curve pillars and the grid.
    """
    if tenor not in grid:
        raise ValueError(f"tenor {tenor} is not on the grid")
    knots = sorted(set(curve.tenors) | set(grid))
    rates = tuple(curve.rate(t) + size * _tent_weight(grid, tenor, t) for t in knots)
    return ZeroCurve(tuple(knots), rates)


def _tent_weight(grid: tuple[float, ...], tenor: float, t: float) -> float:
    # Hat function: 1 at the bumped tenor, 0 at neighbouring grid tenors,
    # flat beyond the grid ends. Weights across all tenors sum to 1.
    i = grid.index(tenor)
    if t <= grid[0]:
        return 1.0 if i == 0 else 0.0
    if t >= grid[-1]:
        return 1.0 if i == len(grid) - 1 else 0.0
    if t == tenor:
        return 1.0
    if i > 0 and grid[i - 1] < t < tenor:
        return (t - grid[i - 1]) / (tenor - grid[i - 1])
    if i < len(grid) - 1 and tenor < t < grid[i + 1]:
        return (grid[i + 1] - t) / (grid[i + 1] - tenor)
    return 0.0


def collect_sensitivities(
    p: Portfolio,
    md: MarketData,
    registry: dict[str, IssuerInfo],
    rb: Rulebook,
) -> list[SensitivityRecord]:
    """All delta sensitivities of a portfolio, netted per risk factor.

    Every position is attempted; failures are gathered and raised together as
    a SensitivityError tagged with position index and stage.
    """
    raw: list[SensitivityRecord] = []
    issues: list[InstrumentIssue] = []
    for index, instr in enumerate(p.positions):
        stage = "classification"
        try:
            if isinstance(instr, CashEquity):
                bucket = assign_bucket(instr, registry, rb)
                stage = "valuation"
                raw.append(equity_delta(instr, md, bucket))
            elif isinstance(instr, FXPosition):
                bucket = rb.currency_bucket(RiskClass.FX, instr.foreign_currency).bucket_id
                stage = "valuation"
                raw.append(fx_delta(instr, md, bucket))
            elif isinstance(instr, CommodityFuture):
                bucket = assign_bucket(instr, registry, rb)
                stage = "valuation"
                raw.append(commodity_delta(instr, md, bucket))
            elif isinstance(instr, Bond):
                bucket = rb.currency_bucket(RiskClass.GIRR, instr.currency).bucket_id
                stage = "valuation"
                raw.extend(girr_deltas(instr, md, rb.tenor_grid, bucket))
            else:
                issues.append(InstrumentIssue(index, "classification", f"unsupported type {type(instr).__name__}"))
        except (PortfolioError, RulebookError, ValueError) as exc:
            issues.append(InstrumentIssue(index, stage, str(exc)))
    if issues:
        raise SensitivityError(issues)
    return net_records(raw)


def net_records(records: list[SensitivityRecord]) -> list[SensitivityRecord]:
    """Sum sensitivities that share a risk factor key, deterministically ordered."""
    grouped: dict[RiskFactorKey, list[float]] = defaultdict(list)
    for rec in records:
        grouped[rec.key].append(rec.value)
    netted = [SensitivityRecord(key=key, value=math.fsum(values)) for key, values in grouped.items()]
    netted.sort(key=lambda rec: rec.key.sort_key())
    return netted
