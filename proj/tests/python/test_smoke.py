import csv
import math
import random

import numpy as np
import pytest

import vistat


def write_sine(path, rows=300, noise=0.1, seed=0):
    rng = random.Random(seed)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["date", "open", "high", "low", "close", "volume"])
        for i in range(rows):
            c = 10 + math.sin(2 * math.pi * i / 40) + rng.gauss(0, noise)
            y, rest = divmod(i, 336)
            m, d = divmod(rest, 28)
            w.writerow([f"{2000 + y:04d}-{m + 1:02d}-{d + 1:02d}", c, c + 0.1, c - 0.1, c, 1000])


def test_visibility_graph_examples():
    assert vistat.build_vg([3, 1, 2]).edges() == [(0, 1), (0, 2), (1, 2)]
    g = vistat.build_vg([1, 3, 1, 3, 1])
    assert vistat.degree_stats(g)["degrees"] == [1, 3, 2, 3, 1]
    d = vistat.build_vg([1, 3, 1, 3, 1], directed=True)
    assert d.directed and d.edge_count() == 5
    a = g.dense()
    assert isinstance(a, np.ndarray) and a.shape == (5, 5)
    assert np.array_equal(a, a.T)


def test_fast_scan_matches_bruteforce_and_affine_invariance():
    rng = np.random.default_rng(3)
    for _ in range(30):
        s = rng.normal(size=int(rng.integers(3, 40))).tolist()
        g = vistat.build_vg(s)
        assert g == vistat.build_vg_bruteforce(s)
        assert g == vistat.build_vg([2.5 * x - 7 for x in s])
        assert vistat.is_connected(g)


def test_generators():
    assert set(vistat.degree_stats(vistat.gen_regular(100, 30))["degrees"]) == {30}
    assert vistat.degree_stats(vistat.gen_small_world(100, 10, 0.1, 1))["mean"] == 10.0


def test_normalization_round_trip():
    z, mu, sd = vistat.rolling_normalize([1, 2, 3, 4], 3)
    assert z[0] == pytest.approx(1.2247, abs=1e-4)
    assert vistat.denormalize(z[0], mu[0], sd[0]) == pytest.approx(3.0)
    with pytest.raises(vistat.DegenerateError):
        vistat.rolling_normalize([5, 5, 5], 3)
    assert vistat.split(10) == ((0, 6), (6, 8), (8, 10))


def test_metrics():
    assert vistat.rmse([0, 0], [3, 4]) == pytest.approx(3.5355, abs=1e-4)
    assert vistat.mase([1, 2, 4], [1, 3, 3]) == pytest.approx(0.4444, abs=1e-4)
    assert vistat.mape([2, 4], [1, 5]) == pytest.approx(0.375)
    with pytest.raises(vistat.DegenerateError):
        vistat.mase([3, 3, 3], [1, 2, 3])
    with pytest.raises(vistat.InputError):
        vistat.rmse([1, 2], [1])


def test_statistical_tests():
    base = [1.0 + 0.01 * u for u in range(1, 91)]
    var = [1.0] * 90
    w = vistat.wilcoxon(base, var)
    assert abs(w["statistic"]) == pytest.approx(8.2385, abs=1e-3)
    assert w["decision"] == "reject"
    s = vistat.sign_test(base, var)
    assert s["wins"] == 90 and s["decision"] == "reject"
    t = vistat.paired_t([2, 3, 4], [1, 1, 1])
    assert t["statistic"] == pytest.approx(3.464, abs=1e-3)
    assert vistat.critical_value("t", 0.975, 89) == pytest.approx(1.98698, abs=1e-5)


def test_rank_friedman_nemenyi():
    ranks = [5.71, 7.50, 8.21, 4.86, 13.74, 6.05, 15.75, 14.07,
             5.34, 6.91, 8.07, 4.74, 13.60, 7.60, 12.56, 1.23]
    f = vistat.friedman(ranks, 90)
    assert abs(f["statistic"] - 1041) / 1041 < 0.01
    assert f["decision"] == "reject"
    n = vistat.nemenyi(ranks, 90, 3.523)
    assert n["critical_difference"] == pytest.approx(2.500, abs=5e-3)
    r, avg = vistat.rank_matrix(np.array([[0.3, 0.1, 0.2], [0.1, 0.1, 0.3]]))
    assert r.tolist() == [[3, 1, 2], [1.5, 1.5, 3]]
    assert avg.tolist() == [2.25, 1.25, 2.5]


def test_train_and_evaluate(tmp_path):
    path = tmp_path / "SINE.csv"
    write_sine(path)
    runs = [vistat.train([str(path)], str(tmp_path / name), cell="rnn", epochs=20, seed=4) for name in ("a", "b")]
    first, second = runs[0][0], runs[1][0]
    assert open(first["checkpoint"]).read() == open(second["checkpoint"]).read()
    history = first["history"]
    assert min(v for _, _, v in history[1:]) < history[0][2]
    ev = vistat.evaluate(first["checkpoint"], str(path))
    assert ev["algorithm"] == "tg-rnn" and ev["horizon"] == 1
    assert ev["M"] == len(ev["predicted"]) > 0
    assert ev["rmse"] >= ev["mae"] >= 0


def test_errors_map_to_python_exceptions(tmp_path):
    with pytest.raises(vistat.InputError):
        vistat.load_ohlcv(str(tmp_path / "missing.csv"))
    assert issubclass(vistat.InputError, vistat.VistatError)
    assert "desk" in vistat.presets()
