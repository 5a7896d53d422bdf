from simulcascade.config import preset
from simulcascade.fixtures import make_fixture
from simulcascade.sweep import evaluate_run, format_table, grid_points, rows_to_jsonl, sweep


def test_single_point_equals_direct_run():
    sc = make_fixture("greetings")
    base = preset("en-de-low", seed=7)
    (row,) = sweep(sc, base, {"mcs": [3]})
    direct = evaluate_run(sc, base)
    assert (row.bleu, row.stream_laal_ms) == (direct.bleu, direct.stream_laal_ms)


def test_low_regime_point_is_echoed():
    sc = make_fixture("greetings")
    rows = sweep(sc, preset("en-de-high"), {"mud_ms": [100], "vpt": [0.5], "msd_ms": [500], "mcs": [3]})
    assert rows[0].point == {"mud_ms": 100, "vpt": 0.5, "msd_ms": 500, "mcs": 3}
    assert "0.5 |    500 |   3" in format_table(rows)
    assert '"msd_ms": 500' in rows_to_jsonl(rows)


def test_bad_point_does_not_stop_sweep():
    sc = make_fixture("greetings")
    rows = sweep(sc, preset("en-de-low"), {"vpt": [2.0, 0.5]})
    assert rows[0].error and "ConfigError" in rows[0].error
    assert rows[1].error is None and rows[1].bleu is not None


def test_grid_order_and_parallel_agree():
    sc = make_fixture("greetings")
    grid = {"mcs": [1, 3], "msd_ms": [500, 1000]}
    assert grid_points(grid) == [
        {"msd_ms": 500, "mcs": 1}, {"msd_ms": 500, "mcs": 3}, {"msd_ms": 1000, "mcs": 1}, {"msd_ms": 1000, "mcs": 3},
    ]
    serial = sweep(sc, preset("en-de-low", seed=7), grid)
    parallel = sweep(sc, preset("en-de-low", seed=7), grid, jobs=2)
    assert [r.to_dict() for r in serial] == [r.to_dict() for r in parallel]
