"""End-to-end comparison of the analysis against the brute-force oracle."""

import pytest

from xdd_wcet.analysis import Analyzer, PathStep, analyze
from xdd_wcet.config import AnalysisConfig
from xdd_wcet.crosscheck import CrossCheckReport, Mismatch, cross_validate, path_total
from xdd_wcet.pipeline import load_preset
from xdd_wcet.program import parse_program
from tests.programs import CORPUS, contention, loop, pipeline_variant


@pytest.mark.parametrize("name", sorted(CORPUS))
def test_corpus_matches_oracle(name):
    """Every (path, configuration) total equals the oracle's."""
    report = cross_validate(parse_program(CORPUS[name]()), load_preset("teaching"))
    assert report.exact
    assert report.ok, [m.describe() for m in report.mismatches + report.bound_violations]
    assert report.pairs > 0


@pytest.mark.parametrize("name", ["diamond", "loop", "contention", "contention_split"])
def test_private_bus_matches_oracle(name):
    """Without a shared bus misses cost the miss latency."""
    report = cross_validate(parse_program(CORPUS[name]()), pipeline_variant(bus={"shared": False}))
    assert report.ok, [m.describe() for m in report.mismatches]


@pytest.mark.parametrize("window", [0, 1, 2])
def test_window_sizes_match_oracle(window):
    """Smaller windows are modelled identically on both sides."""
    config = AnalysisConfig(contention_window=window)
    report = cross_validate(parse_program(contention()), load_preset("teaching"), config)
    assert report.ok, [m.describe() for m in report.mismatches]


def test_experimental_pipeline():
    """The wide pipeline with functional units agrees as well."""
    report = cross_validate(parse_program(CORPUS["nested"]()), load_preset("experimental"))
    assert report.ok, [m.describe() for m in report.mismatches]


def test_forced_cap_is_an_upper_bound():
    """With generations merged early the analysis only bounds the oracle."""
    report = cross_validate(parse_program(loop(bound=3)), load_preset("teaching"), AnalysisConfig(max_gen=0))
    assert not report.exact
    assert report.ok


def test_path_total():
    """Bases of all but the last block plus the last raw time."""
    analyzer = Analyzer(parse_program(loop()), load_preset("teaching"))
    s = analyzer.store
    e = s.event("h:i0:data", 1)
    steps = [PathStep("pre", s.leaf(4), s.leaf(4)), PathStep("h", s.leaf(10), s.indicator(e, 6, 15))]
    assert path_total(analyzer, steps, frozenset()) == 10
    assert path_total(analyzer, steps, frozenset({("h:i0:data", 1)})) == 19


def test_path_total_with_event_dependent_bases():
    """Each base is evaluated under the configuration, not taken at its worst leaf."""
    analyzer = Analyzer(parse_program(loop()), load_preset("teaching"))
    s = analyzer.store
    e0, e1 = s.event("h:i0:data", 0), s.event("h:i0:data", 1)
    steps = [
        PathStep("h", s.indicator(e1, 5, 12), s.indicator(e1, 5, 12)),
        PathStep("h", s.indicator(e0, 5, 12), s.indicator(e0, 5, 12)),
        PathStep("post", s.leaf(3), s.leaf(3)),
    ]
    assert path_total(analyzer, steps, frozenset()) == 13
    assert path_total(analyzer, steps, frozenset({("h:i0:data", 1)})) == 20
    assert path_total(analyzer, steps, frozenset({("h:i0:data", 0), ("h:i0:data", 1)})) == 27


@pytest.mark.parametrize("name", ["sample", "diamond", "loop", "contention"])
def test_fixpoint_wcet_bounds_every_path(name):
    """The block WCETs of the fixpoint add up to at least every oracle total."""
    cfg = parse_program(CORPUS[name]())
    result = analyze(cfg, load_preset("teaching"))
    report = cross_validate(cfg, load_preset("teaching"), result=result)
    assert not report.bound_violations, [m.describe() for m in report.bound_violations]


def test_underestimated_block_time_is_reported():
    """A fixpoint result whose block time is too small fails the bound check."""
    cfg = parse_program(CORPUS["sample"]())
    result = analyze(cfg, load_preset("teaching"))
    result.blocks["b0"].timing.times = [result.store.leaf(1)]
    report = cross_validate(cfg, load_preset("teaching"), result=result)
    assert not report.mismatches
    assert report.bound_violations
    assert not report.ok
    assert report.bound_violations[0].analysis == 1


def test_report_describes_mismatches():
    """A mismatch names the path, the active events and both totals."""
    report = CrossCheckReport(paths=1, pairs=1)
    assert report.ok
    report.mismatches.append(Mismatch(("a", "b"), frozenset({("x", 0)}), 10, 12))
    assert not report.ok
    assert report.mismatches[0].describe() == "a>b {x[0]}: oracle 10, analysis 12"
