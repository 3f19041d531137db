import numpy as np
import pytest
from sklearn.base import clone

from episcan import Block, EpidemicChangeDetector, WeightSpec


def planted_field(seed=0, shift=3.0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((12, 12))
    x[3:9, 2:7] += shift
    return x


def test_fit_sets_attributes():
    det = EpidemicChangeDetector(bandwidth=2, n_bootstrap=49, random_state=0)
    out = det.fit(planted_field())
    assert out is det
    assert isinstance(det.statistic_, float)
    assert isinstance(det.change_set_, Block)
    assert det.shape_ == (12, 12)
    assert det.reject_ and det.p_value_ <= 0.05
    assert det.report_.decision == "reject"


def test_predict_mask_matches_change_set():
    det = EpidemicChangeDetector(bandwidth=2, n_bootstrap=49, random_state=0)
    det.fit(planted_field())
    mask = det.predict()
    assert mask.shape == (12, 12)
    assert mask.dtype == bool
    expected = np.zeros((12, 12), dtype=bool)
    expected[det.change_set_.slices()] = True
    assert np.array_equal(mask, expected)
    assert np.array_equal(det.score_samples(), expected.astype(float))


def test_predict_before_fit_raises():
    det = EpidemicChangeDetector()
    with pytest.raises(RuntimeError, match="not fitted"):
        det.predict()


def test_get_set_params_round_trip():
    det = EpidemicChangeDetector(statistic="mean", kernel="ma", bandwidth=4,
                                 alpha=0.1, n_bootstrap=99)
    params = det.get_params()
    assert params["statistic"] == "mean"
    assert params["kernel"] == "ma"
    det2 = EpidemicChangeDetector().set_params(**params)
    assert det2.get_params() == params


def test_clone_preserves_params():
    det = EpidemicChangeDetector(bandwidth=3, alpha=0.1, random_state=7)
    cloned = clone(det)
    assert cloned.get_params() == det.get_params()


def test_reproducible_with_random_state():
    x = planted_field(seed=3, shift=0.0)
    d1 = EpidemicChangeDetector(bandwidth=2, n_bootstrap=29, random_state=5).fit(x)
    d2 = EpidemicChangeDetector(bandwidth=2, n_bootstrap=29, random_state=5).fit(x)
    assert d1.statistic_ == d2.statistic_
    assert d1.threshold_ == d2.threshold_
    assert d1.change_set_ == d2.change_set_


def test_random_state_none_records_seed():
    det = EpidemicChangeDetector(bandwidth=2, n_bootstrap=9).fit(planted_field())
    assert isinstance(det.report_.seed, int)


def test_vector_observations_via_field_dims():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((8, 8, 2))
    det = EpidemicChangeDetector(statistic="mean", bandwidth=2, n_bootstrap=19,
                                 field_dims=2, random_state=0)
    det.fit(x)
    assert det.shape_ == (8, 8)


def test_input_validation_errors():
    det = EpidemicChangeDetector()
    with pytest.raises(ValueError, match="non-finite"):
        det.fit(np.array([[1.0, np.nan], [0.0, 1.0]]))
    with pytest.raises(ValueError, match="at least 2"):
        det.fit(np.ones((1, 5)))


def test_custom_weight_components():
    x = planted_field(seed=2)
    det = EpidemicChangeDetector(bandwidth=2, n_bootstrap=29, random_state=0,
                                 weight=WeightSpec.gaussian(0.0, 5.0))
    det.fit(x)
    assert det.report_.weight.components[0].scale == 5.0


def test_null_field_usually_retains():
    rng = np.random.default_rng(4)
    det = EpidemicChangeDetector(bandwidth=2, n_bootstrap=99, alpha=0.05,
                                 random_state=0)
    det.fit(rng.standard_normal((10, 10)))
    assert det.p_value_ > 0.01
