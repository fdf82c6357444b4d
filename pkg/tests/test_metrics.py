import numpy as np
import pytest

from ecfc.errors import ContractError, UndefinedMetricError
from ecfc.metrics import mae, mape, report
from oracles import brute_mae, brute_mape


def test_mae_hand_example():
    assert mae([100, 200], [90, 220]) == 15.0


def test_mape_hand_example():
    assert mape([100, 200], [110, 180]) == (pytest.approx(10.0, rel=1e-15), 0)


def test_identity_is_zero():
    a = [3.0, 4.0]
    assert mae(a, a) == 0.0 and mape(a, a)[0] == 0.0


def test_zero_target_excluded_and_counted():
    assert mape([0.0, 100.0], [5.0, 100.0], zero_floor=0.0) == (0.0, 1)


def test_all_excluded_is_error_not_nan():
    with pytest.raises(UndefinedMetricError):
        mape([0.0, 0.0], [1.0, 2.0])


def test_shape_errors():
    with pytest.raises(ContractError):
        mae([1.0], [1.0, 2.0])
    with pytest.raises(ContractError):
        mae([], [])


def test_symmetry_and_asymmetry():
    a, p = [100.0, 50.0], [80.0, 70.0]
    assert mae(a, p) == mae(p, a)
    assert mape(a, p)[0] != mape(p, a)[0]


def test_permutation_and_scale():
    rng = np.random.default_rng(1)
    a, p = rng.uniform(1, 100, 50), rng.uniform(1, 100, 50)
    perm = rng.permutation(50)
    assert mae(a[perm], p[perm]) == pytest.approx(mae(a, p), rel=1e-14)
    assert mae(3 * a, 3 * p) == pytest.approx(3 * mae(a, p), rel=1e-14)
    assert mape(3 * a, 3 * p)[0] == pytest.approx(mape(a, p)[0], rel=1e-14)


def test_report_counts():
    r = report([0.0, 10.0, 20.0], [1.0, 11.0, 18.0])
    assert (r.n_points, r.n_excluded) == (2, 1)
    assert r.mae == pytest.approx(4.0 / 3)
    assert r.mape == pytest.approx(10.0)


def test_agrees_with_brute_force():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        n = int(rng.integers(1, 40))
        a = rng.uniform(0, 500, n)
        a[rng.random(n) < 0.1] = 0.0
        a[0] = max(a[0], 1.0)
        p = rng.uniform(0, 500, n)
        assert mae(a, p) == pytest.approx(brute_mae(a.tolist(), p.tolist()), rel=1e-12)
        got, excluded = mape(a, p)
        want, want_excluded = brute_mape(a.tolist(), p.tolist(), 1e-9)
        assert got == pytest.approx(want, rel=1e-12) and excluded == want_excluded
