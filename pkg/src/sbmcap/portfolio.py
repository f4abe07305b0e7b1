"""Portfolio instruments, market data, file loaders, and valuation.

Four linear instrument types are supported: fixed-coupon bonds in the
reporting currency, cash equities, FX spot positions, and commodity futures
(valued as a linear spot proxy, no carry). Valuation is intentionally plain
so that bump-and-revalue sensitivities stay transparent.

Conventions:
  - Bond discounting uses annual compounding, DF(t) = (1 + z(t)) ** -t, with
    piecewise-linear interpolation of zero rates between pillars and flat
    extrapolation outside (extrapolation beyond the last pillar warns).
  - Coupon dates run backwards from maturity in steps of 1/frequency, so the
    final flow falls exactly at maturity.
  - FX positions are signed notionals of the foreign currency; positive means
    long the foreign currency against the reporting currency.
"""

from __future__ import annotations

import bisect
import csv
import io
import json
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Union

from .rulebook import RiskClass, Rulebook, RulebookQueryError

CSV_COLUMNS = ("type", "issuer_or_id", "quantity", "unit", "coupon", "maturity", "frequency", "currency", "sign")

# Cash flows closer to valuation than this are treated as already paid.
_TIME_EPS = 1e-9


class PortfolioError(Exception):
    """Base class for portfolio problems."""


class PortfolioParseError(PortfolioError):
    """A portfolio file row could not be parsed; message names the location."""


class MarketDataError(PortfolioError):
    """Valuation needs a quote or curve the market snapshot does not have."""


class BucketAssignmentError(PortfolioError):
    """An instrument cannot be mapped to any rulebook bucket."""


class CurveExtrapolationWarning(UserWarning):
    """A cash flow fell outside the pillar range; flat extrapolation used."""


class ResidualBucketWarning(UserWarning):
    """An instrument fell through to a residual bucket."""


@dataclass(frozen=True)
class Bond:
    """Fixed-coupon bullet bond in the reporting currency."""

    notional: float
    coupon_rate: float
    maturity: float
    frequency: int
    currency: str
    label: str = ""

    def __post_init__(self) -> None:
        if self.maturity <= 0:
            raise PortfolioParseError(f"bond maturity must be positive, got {self.maturity}")
        if self.frequency not in (1, 2, 4):
            raise PortfolioParseError(f"bond frequency must be 1, 2 or 4, got {self.frequency}")

    def cash_flows(self) -> list[tuple[float, float]]:
        """(time, amount) pairs, coupon dates counted back from maturity."""
        flows: list[tuple[float, float]] = []
        coupon = self.notional * self.coupon_rate / self.frequency
        t = self.maturity
        while t > _TIME_EPS:
            flows.append((t, coupon))
            t -= 1.0 / self.frequency
        flows.reverse()
        if flows:
            t_final, amount = flows[-1]
            flows[-1] = (t_final, amount + self.notional)
        return flows


@dataclass(frozen=True)
class CashEquity:
    issuer_id: str
    shares: float


@dataclass(frozen=True)
class FXPosition:
    foreign_currency: str
    signed_notional: float


@dataclass(frozen=True)
class CommodityFuture:
    commodity_id: str
    quantity: float
    unit: str


Instrument = Union[Bond, CashEquity, FXPosition, CommodityFuture]


@dataclass(frozen=True)
class Portfolio:
    positions: tuple[Instrument, ...]
    as_of: str | None = None


@dataclass(frozen=True)
class IssuerInfo:
    """Classification attributes for a single equity issuer."""

    issuer_id: str
    sector: str
    economy: str
    size: str
    name: str = ""


@dataclass(frozen=True)
class ZeroCurve:
    """Piecewise-linear zero curve with flat extrapolation."""

    tenors: tuple[float, ...]
    rates: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.tenors) != len(self.rates):
            raise MarketDataError("zero curve tenors and rates differ in length")
        if any(a >= b for a, b in zip(self.tenors, self.tenors[1:])):
            raise MarketDataError("zero curve tenors must be strictly increasing")

    def rate(self, t: float) -> float:
        if not self.tenors:
            raise MarketDataError("zero curve is empty")
        if t <= self.tenors[0]:
            return self.rates[0]
        if t >= self.tenors[-1]:
            if t > self.tenors[-1]:
                warnings.warn(
                    f"zero rate at t={t:g} beyond last pillar {self.tenors[-1]:g}, extrapolating flat",
                    CurveExtrapolationWarning,
                    stacklevel=2,
                )
            return self.rates[-1]
        i = bisect.bisect_right(self.tenors, t)
        t0, t1 = self.tenors[i - 1], self.tenors[i]
        r0, r1 = self.rates[i - 1], self.rates[i]
        return r0 + (r1 - r0) * (t - t0) / (t1 - t0)

    def discount_factor(self, t: float) -> float:
        # Annual compounding: DF(t) = (1 + z(t)) ** -t.
        return (1.0 + self.rate(t)) ** -t

    def parallel_bumped(self, size: float) -> "ZeroCurve":
        return ZeroCurve(self.tenors, tuple(r + size for r in self.rates))


@dataclass(frozen=True)
class MarketData:
    """Market snapshot: spot quotes plus one reporting-currency zero curve."""

    reporting_currency: str
    equity_prices: dict[str, float] = field(default_factory=dict)
    fx_spots: dict[str, float] = field(default_factory=dict)
    commodity_prices: dict[str, float] = field(default_factory=dict)
    zero_curve: ZeroCurve = ZeroCurve((), ())
    as_of: str | None = None

    def equity_price(self, issuer_id: str) -> float:
        try:
            return self.equity_prices[issuer_id]
        except KeyError:
            raise MarketDataError(f"no equity price for issuer {issuer_id!r}") from None

    def fx_spot(self, currency: str) -> float:
        """Price of one unit of ``currency`` in the reporting currency."""
        if currency == self.reporting_currency:
            return 1.0
        try:
            return self.fx_spots[currency]
        except KeyError:
            raise MarketDataError(f"no FX spot for currency {currency!r}") from None

    def commodity_price(self, commodity_id: str) -> float:
        try:
            return self.commodity_prices[commodity_id]
        except KeyError:
            raise MarketDataError(f"no commodity price for {commodity_id!r}") from None


def value(instr: Instrument, md: MarketData) -> float:
    """Present value of one position in the reporting currency."""
    if isinstance(instr, Bond):
        if instr.currency != md.reporting_currency:
            raise MarketDataError(
                f"bond denominated in {instr.currency}, but only the {md.reporting_currency} curve is available"
            )
        return sum(amount * md.zero_curve.discount_factor(t) for t, amount in instr.cash_flows())
    if isinstance(instr, CashEquity):
        return instr.shares * md.equity_price(instr.issuer_id)
    if isinstance(instr, FXPosition):
        if instr.foreign_currency == md.reporting_currency:
            raise MarketDataError("FX position must be against a non-reporting currency")
        return instr.signed_notional * md.fx_spot(instr.foreign_currency)
    if isinstance(instr, CommodityFuture):
        return instr.quantity * md.commodity_price(instr.commodity_id)
    raise PortfolioError(f"cannot value instrument of type {type(instr).__name__}")


def assign_bucket(instr: Instrument, registry: dict[str, IssuerInfo], rb: Rulebook) -> int:
    """Rulebook bucket id for an equity or commodity instrument.

    Unmatched instruments fall through to the residual bucket with a warning
    when the rulebook defines one, otherwise raise BucketAssignmentError.
    """
    if isinstance(instr, CashEquity):
        info = registry.get(instr.issuer_id)
        if info is None:
            return _residual_or_error(rb, RiskClass.EQUITY, f"issuer {instr.issuer_id!r} not in registry")
        for b in rb.buckets_for(RiskClass.EQUITY):
            if b.residual:
                continue
            if b.economy != info.economy or b.size != info.size:
                continue
            if b.sectors is None or info.sector in b.sectors:
                return b.bucket_id
        return _residual_or_error(
            rb,
            RiskClass.EQUITY,
            f"issuer {instr.issuer_id!r} ({info.economy}/{info.size}/{info.sector}) matches no equity bucket",
        )
    if isinstance(instr, CommodityFuture):
        for b in rb.buckets_for(RiskClass.COMMODITY):
            if instr.commodity_id in b.commodities:
                return b.bucket_id
        return _residual_or_error(rb, RiskClass.COMMODITY, f"commodity {instr.commodity_id!r} matches no bucket")
    raise BucketAssignmentError(f"bucket assignment applies to equities and commodities, not {type(instr).__name__}")


def _residual_or_error(rb: Rulebook, risk_class: RiskClass, why: str) -> int:
    residual = rb.residual_bucket(risk_class)
    if residual is None:
        raise BucketAssignmentError(f"{why}, and the rulebook has no {risk_class.value} residual bucket")
    warnings.warn(f"{why}; assigned to residual bucket {residual.bucket_id}", ResidualBucketWarning, stacklevel=2)
    return residual.bucket_id


# -- file loaders -----------------------------------------------------------


def load_market_data(path: str | Path) -> MarketData:
    data = _read_json(path)
    curve_raw = data.get("zero_curve", [])
    try:
        tenors = tuple(float(p[0]) for p in curve_raw)
        rates = tuple(float(p[1]) for p in curve_raw)
    except (TypeError, ValueError, IndexError):
        raise PortfolioParseError(f"{path}: zero_curve must be a list of [tenor, rate] pairs") from None
    try:
        return MarketData(
            reporting_currency=str(data["reporting_currency"]),
            equity_prices={str(k): float(v) for k, v in data.get("equity_prices", {}).items()},
            fx_spots={str(k): float(v) for k, v in data.get("fx_spots", {}).items()},
            commodity_prices={str(k): float(v) for k, v in data.get("commodity_prices", {}).items()},
            zero_curve=ZeroCurve(tenors, rates),
            as_of=data.get("as_of"),
        )
    except KeyError as exc:
        raise PortfolioParseError(f"{path}: missing market data field {exc}") from None
    except (TypeError, ValueError) as exc:
        raise PortfolioParseError(f"{path}: {exc}") from None


def load_registry(path: str | Path) -> dict[str, IssuerInfo]:
    """Issuer registry as a dict keyed by issuer id."""
    data = _read_json(path)
    registry: dict[str, IssuerInfo] = {}
    for pos, row in enumerate(data.get("issuers", [])):
        try:
            info = IssuerInfo(
                issuer_id=str(row["issuer_id"]),
                sector=str(row["sector"]),
                economy=str(row["economy"]),
                size=str(row["size"]),
                name=str(row.get("name", "")),
            )
        except (KeyError, TypeError) as exc:
            raise PortfolioParseError(f"{path}: issuers[{pos}]: missing field {exc}") from None
        if info.issuer_id in registry:
            raise PortfolioParseError(f"{path}: duplicate issuer_id {info.issuer_id!r}")
        registry[info.issuer_id] = info
    return registry


def load_portfolio(path: str | Path) -> Portfolio:
    """Load a portfolio from CSV or JSON (decided by file extension)."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        return _portfolio_from_json(path)
    return _portfolio_from_csv(path)


def _portfolio_from_json(path: Path) -> Portfolio:
    data = _read_json(path)
    positions: list[Instrument] = []
    for pos, row in enumerate(data.get("positions", [])):
        where = f"{path}: positions[{pos}]"
        if not isinstance(row, dict) or "type" not in row:
            raise PortfolioParseError(f"{where}: each position needs a 'type' field")
        try:
            positions.append(instrument_from_dict(row))
        except PortfolioParseError as exc:
            raise PortfolioParseError(f"{where}: {exc}") from None
        except (KeyError, TypeError, ValueError) as exc:
            raise PortfolioParseError(f"{where}: {exc}") from None
    return Portfolio(positions=tuple(positions), as_of=data.get("as_of"))


def instrument_from_dict(row: dict[str, Any]) -> Instrument:
    """Parse one position from its JSON-schema row."""
    kind = row["type"]
    if kind == "bond":
        return Bond(
            notional=float(row["notional"]),
            coupon_rate=float(row.get("coupon_rate", 0.0)),
            maturity=float(row["maturity"]),
            frequency=int(row.get("frequency", 2)),
            currency=str(row["currency"]),
            label=str(row.get("id", "")),
        )
    if kind == "equity":
        return CashEquity(issuer_id=str(row["issuer_id"]), shares=float(row["shares"]))
    if kind == "fx":
        return FXPosition(foreign_currency=str(row["currency"]), signed_notional=float(row["notional"]))
    if kind == "commodity":
        return CommodityFuture(
            commodity_id=str(row["commodity_id"]),
            quantity=float(row["quantity"]),
            unit=str(row.get("unit", "")),
        )
    raise PortfolioParseError(f"unknown position type {kind!r}")


def _portfolio_from_csv(path: Path) -> Portfolio:
    text = Path(path).read_text(encoding="utf-8")
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        return Portfolio(positions=())
    missing = [c for c in CSV_COLUMNS if c not in reader.fieldnames]
    if missing:
        raise PortfolioParseError(f"{path}: header missing column(s) {missing}")
    positions: list[Instrument] = []
    for row in reader:
        line = reader.line_num
        try:
            positions.append(_instrument_from_csv_row(row))
        except PortfolioParseError as exc:
            raise PortfolioParseError(f"{path}: line {line}: {exc}") from None
        except (TypeError, ValueError) as exc:
            raise PortfolioParseError(f"{path}: line {line}: {exc}") from None
    return Portfolio(positions=tuple(positions))


def _instrument_from_csv_row(row: dict[str, str]) -> Instrument:
    kind = (row.get("type") or "").strip().lower()
    ident = (row.get("issuer_or_id") or "").strip()
    quantity = _required_float(row, "quantity")
    sign = (row.get("sign") or "").strip()
    if sign not in ("", "+", "-"):
        raise PortfolioParseError(f"sign must be '+', '-' or empty, got {sign!r}")
    signed = -quantity if sign == "-" else quantity
    if kind == "bond":
        coupon_raw = (row.get("coupon") or "").strip()
        frequency_raw = (row.get("frequency") or "").strip()
        return Bond(
            notional=signed,
            coupon_rate=float(coupon_raw) if coupon_raw else 0.0,
            maturity=_required_float(row, "maturity"),
            frequency=int(float(frequency_raw)) if frequency_raw else 2,
            currency=_required_str(row, "currency"),
            label=ident,
        )
    if kind == "equity":
        if not ident:
            raise PortfolioParseError("equity rows need an issuer id in issuer_or_id")
        return CashEquity(issuer_id=ident, shares=signed)
    if kind == "fx":
        return FXPosition(foreign_currency=_required_str(row, "currency"), signed_notional=signed)
    if kind == "commodity":
        if not ident:
            raise PortfolioParseError("commodity rows need a commodity id in issuer_or_id")
        return CommodityFuture(commodity_id=ident, quantity=signed, unit=(row.get("unit") or "").strip())
    raise PortfolioParseError(f"unknown position type {kind!r}")


def instrument_to_dict(instr: Instrument) -> dict[str, Any]:
    """JSON-schema row for one position (inverse of instrument_from_dict)."""
    if isinstance(instr, Bond):
        row: dict[str, Any] = {
            "type": "bond",
            "notional": instr.notional,
            "coupon_rate": instr.coupon_rate,
            "maturity": instr.maturity,
            "frequency": instr.frequency,
            "currency": instr.currency,
        }
        if instr.label:
            row["id"] = instr.label
        return row
    if isinstance(instr, CashEquity):
        return {"type": "equity", "issuer_id": instr.issuer_id, "shares": instr.shares}
    if isinstance(instr, FXPosition):
        return {"type": "fx", "currency": instr.foreign_currency, "notional": instr.signed_notional}
    if isinstance(instr, CommodityFuture):
        return {"type": "commodity", "commodity_id": instr.commodity_id, "quantity": instr.quantity, "unit": instr.unit}
    raise PortfolioError(f"cannot serialize instrument of type {type(instr).__name__}")


def portfolio_to_dict(p: Portfolio) -> dict[str, Any]:
    """JSON-schema view of a portfolio (inverse of the JSON loader)."""
    out: dict[str, Any] = {"schema_version": 1, "positions": [instrument_to_dict(i) for i in p.positions]}
    if p.as_of is not None:
        out["as_of"] = p.as_of
    return out


def with_curve(md: MarketData, curve: ZeroCurve) -> MarketData:
    return replace(md, zero_curve=curve)


def _required_float(row: dict[str, str], column: str) -> float:
    raw = (row.get(column) or "").strip()
    if not raw:
        raise PortfolioParseError(f"column {column!r} is required for this row type")
    return float(raw)


def _required_str(row: dict[str, str], column: str) -> str:
    raw = (row.get(column) or "").strip()
    if not raw:
        raise PortfolioParseError(f"column {column!r} is required for this row type")
    return raw


def _read_json(path: str | Path) -> dict[str, Any]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise PortfolioParseError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise PortfolioParseError(f"{path}: top level must be a JSON object")
    return data
