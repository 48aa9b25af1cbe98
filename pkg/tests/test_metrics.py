import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wavepinn.metrics import evaluate, rmae, rrmse

vectors = st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=20).filter(lambda v: any(abs(x) > 1e-3 for x in v))


def test_identity():
    ref = [1.0, -2.0, 3.5]
    assert rmae(ref, ref) == 0.0 and rrmse(ref, ref) == 0.0


def test_homogeneity():
    ref = np.array([1.0, 2.0, -4.0, 0.5])
    assert math.isclose(rmae(1.1 * ref, ref), 0.1, rel_tol=1e-14)
    assert math.isclose(rrmse(1.1 * ref, ref), 0.1, rel_tol=1e-14)


def test_hand_computed():
    assert rmae([1, 1], [1, 3]) == 0.5


def test_zero_predictor():
    assert rrmse([0, 0], [3, 4]) == 1.0


def test_errors():
    with pytest.raises(ValueError):
        rmae([1.0], [0.0])
    with pytest.raises(ValueError):
        rrmse([1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        rrmse([], [])


@given(vectors, st.floats(0.01, 100).flatmap(lambda c: st.sampled_from([c, -c])))
def test_scale_invariance(ref, c):
    ref = np.array(ref)
    pred = ref[::-1] + 0.3
    assert math.isclose(rmae(c * pred, c * ref), rmae(pred, ref), rel_tol=1e-12)
    assert math.isclose(rrmse(c * pred, c * ref), rrmse(pred, ref), rel_tol=1e-12)


@given(vectors)
def test_zero_predictor_property(ref):
    assert math.isclose(rrmse(np.zeros(len(ref)), ref), 1.0, rel_tol=1e-14)


@given(vectors)
def test_zero_iff_equal(ref):
    ref = np.array(ref)
    pred = ref.copy()
    assert rrmse(pred, ref) == 0.0
    pred[0] += 1.0
    assert rrmse(pred, ref) > 0 and rmae(pred, ref) > 0


def test_evaluate_bundle():
    res = evaluate([[1.0, 1.0]], [1.0, 3.0])
    assert res.n_points == 2 and res.rmae == 0.5
    assert set(res.to_dict()) == {"rmae", "rrmse", "n_points"}
