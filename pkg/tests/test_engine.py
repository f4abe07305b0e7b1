"""End-to-end capital computation and report rendering."""

from __future__ import annotations

import csv
import io
import math

import pytest

from sbmcap.engine import (
    ReportFormatError,
    compute_capital,
    parse_report,
    render_report,
    report_from_dict,
)
from sbmcap.portfolio import CashEquity, IssuerInfo, MarketData, Portfolio
from sbmcap.rulebook import CorrelationScenario, RiskClass, rulebook_from_dict
from sbmcap.sensitivities import SensitivityError

MEDIUM = CorrelationScenario.MEDIUM
REL_TOL = 1e-12


class TestComputeCapital:
    def test_equity_case_study_medium(self, rb, equity_portfolio, market, registry):
        report = compute_capital(equity_portfolio, market, registry, rb, scenario=MEDIUM)
        assert report.scenario_mode == "medium"
        assert list(report.scenarios) == ["medium"]
        oracle = math.sqrt(440_000.0**2 + 59_500.0**2 + 2 * 0.15 * 440_000.0 * 59_500.0)
        assert report.total_capital == pytest.approx(oracle, rel=REL_TOL)
        equity = report.scenarios["medium"].classes["equity"]
        assert equity.charge == report.total_capital
        assert [b.bucket for b in equity.buckets] == [6, 7]

    def test_envelope_takes_max_scenario(self, rb, reference_portfolio, market, registry):
        report = compute_capital(reference_portfolio, market, registry, rb)
        assert report.scenario_mode == "envelope"
        totals = [sc.total for sc in report.scenarios.values()]
        assert len(totals) == 3
        assert report.total_capital == max(totals)

    def test_scenario_totals_are_class_sums(self, rb, reference_portfolio, market, registry):
        report = compute_capital(reference_portfolio, market, registry, rb)
        for sc in report.scenarios.values():
            assert sc.total == pytest.approx(math.fsum(c.charge for c in sc.classes.values()), rel=REL_TOL)
            assert set(sc.classes) == {"girr", "equity", "fx", "commodity"}

    def test_class_filter_matches_subset_portfolio(self, rb, reference_portfolio, equity_portfolio, market, registry):
        filtered = compute_capital(reference_portfolio, market, registry, rb, scenario=MEDIUM, classes=[RiskClass.EQUITY])
        subset = compute_capital(equity_portfolio, market, registry, rb, scenario=MEDIUM)
        unfiltered = compute_capital(reference_portfolio, market, registry, rb, scenario=MEDIUM)
        assert filtered.total_capital == subset.total_capital
        assert filtered.total_capital == unfiltered.scenarios["medium"].classes["equity"].charge
        assert set(filtered.scenarios["medium"].classes) == {"equity"}

    def test_empty_portfolio_gives_zero_capital(self, rb, market, registry):
        report = compute_capital(Portfolio(positions=()), market, registry, rb)
        assert report.total_capital == 0.0
        assert all(sc.classes == {} for sc in report.scenarios.values())
        assert all(sc.total == 0.0 for sc in report.scenarios.values())

    def test_adding_same_sign_position_in_bucket_increases_charge(self, rb, market, registry):
        # T and BA both land in equity bucket 6 with positive sensitivities.
        small = Portfolio(positions=(CashEquity("T", 10_000),))
        bigger = Portfolio(positions=(CashEquity("T", 10_000), CashEquity("BA", 1_000)))
        small_report = compute_capital(small, market, registry, rb, scenario=MEDIUM)
        bigger_report = compute_capital(bigger, market, registry, rb, scenario=MEDIUM)
        assert bigger_report.total_capital > small_report.total_capital
        (bucket,) = bigger_report.scenarios["medium"].classes["equity"].buckets
        assert bucket.bucket == 6 and len(bucket.factors) == 2

    def test_instrument_failures_propagate(self, rb, market, registry):
        registry_plus = {**registry, "NOPRICE": IssuerInfo("NOPRICE", "energy", "advanced", "large")}
        p = Portfolio(positions=(CashEquity("NOPRICE", 1),))
        with pytest.raises(SensitivityError) as excinfo:
            compute_capital(p, market, registry_plus, rb)
        assert excinfo.value.issues[0].index == 0

    def test_as_of_prefers_portfolio_then_market(self, rb, market, registry, fixtures_dir):
        from dataclasses import replace

        from sbmcap.portfolio import load_portfolio

        dated = replace(load_portfolio(fixtures_dir / "portfolio.json"), as_of="2024-07-15")
        report = compute_capital(dated, market, registry, rb, scenario=MEDIUM)
        assert report.as_of == "2024-07-15"
        csv_portfolio = load_portfolio(fixtures_dir / "portfolio.csv")
        assert csv_portfolio.as_of is None
        report_csv = compute_capital(csv_portfolio, market, registry, rb, scenario=MEDIUM)
        assert report_csv.as_of == market.as_of == "2024-06-28"

    def test_report_carries_rulebook_version(self, rb, equity_portfolio, market, registry):
        report = compute_capital(equity_portfolio, market, registry, rb, scenario=MEDIUM)
        assert report.rulebook_version == rb.version
        assert report.reporting_currency == "USD"

    def test_audit_trail_has_all_intermediates(self, rb, equity_portfolio, market, registry):
        report = compute_capital(equity_portfolio, market, registry, rb, scenario=MEDIUM)
        equity = report.scenarios["medium"].classes["equity"]
        b7 = next(b for b in equity.buckets if b.bucket == 7)
        (xom,) = b7.factors
        assert xom.name == "XOM"
        assert xom.risk_weight == 0.40
        assert xom.weighted_sensitivity == pytest.approx(440_000.0, rel=REL_TOL)
        assert equity.cross_correlations == ((6, 7, 0.15),)


@pytest.fixture()
def fallback_setup():
    rb = rulebook_from_dict(
        {
            "schema_version": 1,
            "version": "fallback-lab",
            "tenor_grid": [1.0],
            "buckets": [
                {"risk_class": "equity", "id": 1, "description": "A", "economy": "advanced", "size": "large",
                 "sectors": ["energy"], "risk_weight": 0.5},
                {"risk_class": "equity", "id": 2, "description": "B", "economy": "advanced", "size": "large",
                 "sectors": ["technology"], "risk_weight": 0.5},
            ],
            "intra_correlations": {"equity": {"1": 0.0, "2": 0.0}},
            "cross_correlations": {"equity": {"default": 0.8}},
        }
    )
    registry = {
        "E1": IssuerInfo("E1", "energy", "advanced", "large"),
        "E2": IssuerInfo("E2", "energy", "advanced", "large"),
        "T1": IssuerInfo("T1", "technology", "advanced", "large"),
        "T2": IssuerInfo("T2", "technology", "advanced", "large"),
    }
    md = MarketData(reporting_currency="USD", equity_prices={k: 10.0 for k in registry})
    p = Portfolio(positions=(
        CashEquity("E1", 100), CashEquity("E2", 100),
        CashEquity("T1", -100), CashEquity("T2", -100),
    ))
    return rb, registry, md, p


class TestFallbackReporting:
    def test_fallback_is_flagged_and_warned(self, fallback_setup):
        rb, registry, md, p = fallback_setup
        report = compute_capital(p, md, registry, rb, scenario=MEDIUM)
        equity = report.scenarios["medium"].classes["equity"]
        assert equity.fallback_engaged
        assert any("clamped" in w for w in report.warnings)
        for b in equity.buckets:
            assert abs(b.s_b_effective) <= b.k_b * (1 + 1e-15)

    def test_fallback_charge_matches_hand_calculation(self, fallback_setup):
        rb, registry, md, p = fallback_setup
        report = compute_capital(p, md, registry, rb, scenario=MEDIUM)
        k = math.sqrt(2.0) * 500.0
        expected = math.sqrt(2 * k * k + 2 * 0.8 * k * -k)
        assert report.scenarios["medium"].classes["equity"].charge == pytest.approx(expected, rel=REL_TOL)


class TestRendering:
    def test_hierarchical_round_trip(self, rb, reference_portfolio, market, registry):
        report = compute_capital(reference_portfolio, market, registry, rb)
        text = render_report(report, "hierarchical")
        assert parse_report(text) == report

    def test_dict_round_trip(self, rb, equity_portfolio, market, registry):
        report = compute_capital(equity_portfolio, market, registry, rb, scenario=MEDIUM)
        assert report_from_dict(report.to_dict()) == report

    def test_rendering_is_deterministic(self, rb, reference_portfolio, market, registry):
        a = render_report(compute_capital(reference_portfolio, market, registry, rb), "hierarchical")
        b = render_report(compute_capital(reference_portfolio, market, registry, rb), "hierarchical")
        assert a == b

    def test_tabular_has_one_row_per_scenario_class_bucket(self, rb, reference_portfolio, market, registry):
        report = compute_capital(reference_portfolio, market, registry, rb)
        rows = list(csv.DictReader(io.StringIO(render_report(report, "tabular"))))
        expected = sum(len(cls.buckets) for sc in report.scenarios.values() for cls in sc.classes.values())
        assert len(rows) == expected
        sample = next(r for r in rows if r["scenario"] == "medium" and r["risk_class"] == "equity" and r["bucket"] == "7")
        assert float(sample["k_b"]) == pytest.approx(440_000.0, rel=REL_TOL)

    def test_human_format_mentions_requirement_and_warnings(self, fallback_setup):
        rb, registry, md, p = fallback_setup
        report = compute_capital(p, md, registry, rb, scenario=MEDIUM)
        text = render_report(report, "human")
        assert "Capital requirement:" in text
        assert "clamped" in text

    def test_unknown_format_rejected(self, rb, equity_portfolio, market, registry):
        report = compute_capital(equity_portfolio, market, registry, rb, scenario=MEDIUM)
        with pytest.raises(ReportFormatError, match="unknown report format"):
            render_report(report, "yaml")

    def test_parse_report_rejects_non_reports(self):
        with pytest.raises(ReportFormatError):
            parse_report("not json at all")
        with pytest.raises(ReportFormatError):
            parse_report('{"some": "object"}')
