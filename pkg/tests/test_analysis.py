import pytest

from qbdrank.analysis import (DEFAULT_BIN_EDGES, LengthBins,
                              length_score_correlation,
                              retrieval_probability_by_length,
                              truncation_sweep, unit_size_sweep,
                              write_bins_csv, write_correlation_csv,
                              write_sweep_csv)
from qbdrank.corpus import Qrels
from qbdrank.errors import ConfigError, DataError
from qbdrank.pipeline import PipelineConfig
from qbdrank.tune import Objective

from conftest import make_planted_corpus


def test_default_bin_edges():
    assert DEFAULT_BIN_EDGES[0] == 0
    assert DEFAULT_BIN_EDGES[-1] == 10000
    assert len(DEFAULT_BIN_EDGES) == 11


def test_length_bins_locate():
    bins = LengthBins(edges=(0, 10, 20))
    assert bins.locate(0) == 0
    assert bins.locate(9) == 0
    assert bins.locate(10) == 1
    assert bins.locate(20) is None
    assert bins.locate(-1) is None


def test_length_bins_validation():
    with pytest.raises(ConfigError):
        LengthBins(edges=(5,))
    with pytest.raises(ConfigError):
        LengthBins(edges=(0, 0, 10))


def test_correlation_perfectly_linear():
    run = {"q": [("a", 1.0), ("b", 2.0), ("c", 3.0)]}
    lengths = {"a": 10, "b": 20, "c": 30}
    assert length_score_correlation(run, lengths) == pytest.approx(1.0)
    neg = {"q": [("a", 3.0), ("b", 2.0), ("c", 1.0)]}
    assert length_score_correlation(neg, lengths) == pytest.approx(-1.0)


def test_correlation_zero_variance_raises():
    run = {"q": [("a", 1.0), ("b", 1.0)]}
    with pytest.raises(DataError):
        length_score_correlation(run, {"a": 10, "b": 20})


def test_correlation_per_query_mean():
    run = {
        "q1": [("a", 1.0), ("b", 2.0)],
        "q2": [("a", 2.0), ("b", 1.0)],
    }
    lengths = {"a": 10, "b": 20}
    pooled_free = length_score_correlation(run, lengths, per_query_mean=True)
    assert pooled_free == pytest.approx(0.0, abs=1e-9)


def test_retrieval_probability_fixture():
    # six judged docs in two bins; relevant short docs retrieved, long not
    qrels = Qrels()
    lengths = {}
    for i, (did, length, grade) in enumerate([
        ("s1", 5, 1), ("s2", 6, 1), ("s3", 7, 0),
        ("l1", 15, 1), ("l2", 16, 0), ("l3", 17, 0),
    ]):
        qrels.add("q", did, grade)
        lengths[did] = length
    run = {"q": [("s1", 3.0), ("s2", 2.0), ("x", 1.0)]}
    rows = retrieval_probability_by_length(run, qrels, lengths,
                                           LengthBins(edges=(0, 10, 20)), k=5)
    assert rows[0] == (0, 10, pytest.approx(2 / 3), pytest.approx(1.0))
    assert rows[1] == (10, 20, pytest.approx(1 / 3), pytest.approx(0.0))


def test_retrieval_probability_empty_bins_are_none():
    qrels = Qrels()
    qrels.add("q", "a", 1)
    rows = retrieval_probability_by_length({"q": [("a", 1.0)]}, qrels, {"a": 5},
                                           LengthBins(edges=(0, 10, 20)), k=5)
    assert rows[1] == (10, 20, None, None)


def test_write_csv_schemas(tmp_path):
    bins_path = tmp_path / "bins.csv"
    write_bins_csv([(0, 10, 0.5, None)], bins_path)
    lines = bins_path.read_text().strip().splitlines()
    assert lines[0] == "bin_lo,bin_hi,p_rel,p_ret"
    assert lines[1] == "0,10,0.500000,"

    corr_path = tmp_path / "corr.csv"
    write_correlation_csv([("rprs-freq", "synthetic", -0.05)], corr_path)
    lines = corr_path.read_text().strip().splitlines()
    assert lines[0] == "model,dataset,r"
    assert lines[1] == "rprs-freq,synthetic,-0.050000"

    sweep_path = tmp_path / "sweep.csv"
    write_sweep_csv([("256", 0.25), ("sentence", 0.5)], "f1@5", sweep_path)
    lines = sweep_path.read_text().strip().splitlines()
    assert lines[0] == "x,metric,value"
    assert lines[1] == "256,f1@5,0.250000"
    assert lines[2] == "sentence,f1@5,0.500000"


def test_truncation_sweep_rows():
    docs, queries, qrels = make_planted_corpus(seed=7, n_docs=16, n_queries=2)
    config = PipelineConfig(dim=16, first_stage_depth=16, depth=10,
                            objective=Objective("map", 5))
    rows = truncation_sweep(queries, docs, qrels, [64, 1024], config)
    assert [x for x, _v in rows] == ["64", "1024"]
    assert all(0.0 <= v <= 1.0 for _x, v in rows)


def test_unit_size_sweep_appends_sentence_row():
    docs, queries, qrels = make_planted_corpus(seed=7, n_docs=16, n_queries=2)
    config = PipelineConfig(dim=16, first_stage_depth=16, depth=10,
                            objective=Objective("map", 5))
    rows = unit_size_sweep(queries, docs, qrels, [16, 64], config)
    assert [x for x, _v in rows] == ["16", "64", "sentence"]
