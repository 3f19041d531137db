import numpy as np
import pytest

from episcan import (
    Block,
    ConfigError,
    KernelSpec,
    MeanAssignment,
    MemoryCapError,
    ObservationField,
    WeightSpec,
    estimate_change_set,
    evaluate_block_gram,
    gram_euclidean,
    gram_indicator_cvm,
    lrv_estimate,
    scan_gram,
    scan_mean_change,
)
from episcan.scan import _lrv_weighted
from episcan.simulate import inject_mean_change

from _oracles import brute_scan_mean, loop_lrv


def test_hand_example_d1_n2():
    # x = (0, 1): Q((0,1]) = Q((1,2]) = 0.25, Q((0,2]) = 0
    f = ObservationField.from_array(np.array([0.0, 1.0]))
    g = gram_euclidean(f)
    r = scan_gram(g, kind="mean")
    assert r.max_squared == pytest.approx(0.125, rel=1e-12)
    assert r.statistic == pytest.approx(0.3536, abs=5e-5)
    assert evaluate_block_gram(g, Block((0,), (1,))) == pytest.approx(0.125, rel=1e-12)
    assert evaluate_block_gram(g, Block((1,), (2,))) == pytest.approx(0.125, rel=1e-12)
    assert evaluate_block_gram(g, Block((0,), (2,))) == pytest.approx(0.0, abs=1e-15)


def test_constant_field_scores_zero():
    f = ObservationField.from_array(np.zeros((3, 3)), d=2)
    r = scan_mean_change(f)
    assert r.statistic == 0.0
    g = gram_indicator_cvm(ObservationField.from_array(np.full((3, 3), 0.3), d=2),
                           WeightSpec.gaussian(0.0, 1.0))
    r2 = scan_gram(g, kind="cvm")
    assert r2.statistic <= 1e-10


def test_full_block_scores_zero():
    rng = np.random.default_rng(0)
    f = ObservationField.from_array(rng.standard_normal((4, 4)), d=2)
    g = gram_euclidean(f)
    assert abs(evaluate_block_gram(g, Block((0, 0), (4, 4)))) <= 1e-12


def test_scan_agrees_with_oracles():
    rng = np.random.default_rng(1)
    for d, n in [(1, 5), (1, 7), (2, 3), (2, 4)]:
        for _ in range(5):
            f = ObservationField.from_array(rng.standard_normal((n,) * d + (2,)), d=d)
            ms, argmax = brute_scan_mean(f)
            r_mean = scan_mean_change(f)
            r_gram = scan_gram(gram_euclidean(f), kind="mean")
            for r in (r_mean, r_gram):
                assert np.isclose(r.max_squared, ms, rtol=1e-9, atol=1e-12)
                assert r.argmax == argmax


def test_scan_handles_unequal_sides_and_d3():
    rng = np.random.default_rng(15)
    for dims in [(3, 5), (2, 3, 4)]:
        f = ObservationField.from_array(rng.standard_normal(dims), d=len(dims))
        sq, blk = brute_scan_mean(f)
        r = scan_mean_change(f)
        assert np.isclose(r.max_squared, sq, rtol=1e-9)
        assert r.argmax == blk
        r2 = scan_gram(gram_euclidean(f), kind="mean")
        assert np.isclose(r2.max_squared, sq, rtol=1e-9)
        assert r2.argmax == blk


def test_scan_gram_equals_scan_mean_change():
    rng = np.random.default_rng(2)
    f = ObservationField.from_array(rng.standard_normal((4, 4, 2)), d=2)
    r1 = scan_mean_change(f)
    r2 = scan_gram(gram_euclidean(f), kind="mean")
    assert np.isclose(r1.statistic, r2.statistic, rtol=1e-9)
    assert r1.argmax == r2.argmax


def test_translation_invariance():
    rng = np.random.default_rng(3)
    f = ObservationField.from_array(rng.standard_normal((5, 5, 2)), d=2)
    shifted = ObservationField.from_array(f.data + np.array([100.0, -40.0]),
                                          d=2)
    r1 = scan_mean_change(f)
    r2 = scan_mean_change(shifted)
    assert np.isclose(r1.statistic, r2.statistic, rtol=1e-9)
    assert r1.argmax == r2.argmax


def test_scale_equivariance():
    rng = np.random.default_rng(4)
    f = ObservationField.from_array(rng.standard_normal((5, 5)), d=2)
    r1 = scan_mean_change(f)
    r2 = scan_mean_change(ObservationField.from_array(3.0 * f.data, d=2))
    assert np.isclose(r2.statistic, 3.0 * r1.statistic, rtol=1e-12)
    assert r1.argmax == r2.argmax


def test_tie_break_prefers_lex_smaller():
    # exact tie between the two unit blocks of x = (1, -1)
    f = ObservationField.from_array(np.array([1.0, -1.0]))
    r = scan_mean_change(f)
    assert r.argmax == Block((0,), (1,))


def test_argmax_reproduces_max():
    rng = np.random.default_rng(5)
    f = ObservationField.from_array(rng.standard_normal((5, 5)), d=2)
    g = gram_indicator_cvm(f, WeightSpec.gaussian(100.0, 1000.0))
    r = scan_gram(g, kind="cvm")
    assert np.isclose(evaluate_block_gram(g, r.argmax), r.max_squared,
                      rtol=1e-12, atol=1e-18)


def test_volume_bounds_respected():
    rng = np.random.default_rng(6)
    f = ObservationField.from_array(rng.standard_normal((5, 5)), d=2)
    g = gram_euclidean(f)
    r = scan_gram(g, kind="mean", volume_bounds=(5, 20))
    assert 5 <= r.argmax.volume <= 20
    assert r.n_blocks_evaluated < scan_gram(g, kind="mean").n_blocks_evaluated
    with pytest.raises(ConfigError):
        scan_gram(g, kind="mean", volume_bounds=(26, 30))


def test_block_count_reported():
    rng = np.random.default_rng(7)
    f = ObservationField.from_array(rng.standard_normal((4, 4)), d=2)
    r = scan_mean_change(f)
    assert r.n_blocks_evaluated == 100


def test_plant_and_recover_change_set():
    rng = np.random.default_rng(8)
    base = ObservationField.from_array(0.01 * rng.standard_normal((30, 30)), d=2)
    planted = inject_mean_change(base, 5.0, ((0.2, 0.3), (0.6, 0.55)))
    r = scan_mean_change(planted)
    assert estimate_change_set(r) == Block((6, 9), (18, 16))


def test_scanner_buffer_reuse_is_clean():
    # repeated scans through one scanner must match fresh scans exactly
    from episcan.scan import GramScanner

    rng = np.random.default_rng(16)
    f1 = ObservationField.from_array(rng.standard_normal((4, 4)), d=2)
    f2 = ObservationField.from_array(rng.standard_normal((4, 4)), d=2)
    scanner = GramScanner(f1.shape)
    for f in (f1, f2, f1):
        g = gram_euclidean(f)
        reused = scanner.scan_gram(g, "mean")
        fresh = scan_gram(g, kind="mean")
        assert reused.max_squared == fresh.max_squared
        assert reused.argmax == fresh.argmax


def test_tiled_fallback_matches_fast_path():
    rng = np.random.default_rng(9)
    f = ObservationField.from_array(rng.standard_normal((4, 4)), d=2)
    g = gram_euclidean(f)
    fast = scan_gram(g, kind="cvm")
    with pytest.warns(RuntimeWarning, match="tiled"):
        slow = scan_gram(g, kind="cvm", memory_cap=1000)
    assert np.isclose(slow.max_squared, fast.max_squared, rtol=1e-12)
    assert slow.argmax == fast.argmax
    assert slow.n_blocks_evaluated == fast.n_blocks_evaluated


def test_tiled_fallback_d1_and_bounds():
    rng = np.random.default_rng(10)
    f = ObservationField.from_array(rng.standard_normal((7,)), d=1)
    g = gram_euclidean(f)
    fast = scan_gram(g, kind="mean", volume_bounds=(2, 5))
    with pytest.warns(RuntimeWarning):
        slow = scan_gram(g, kind="mean", volume_bounds=(2, 5), memory_cap=100)
    assert np.isclose(slow.statistic, fast.statistic, rtol=1e-12)
    assert slow.argmax == fast.argmax


def test_fallback_can_be_forbidden():
    rng = np.random.default_rng(11)
    f = ObservationField.from_array(rng.standard_normal((4, 4)), d=2)
    g = gram_euclidean(f)
    with pytest.raises(MemoryCapError):
        scan_gram(g, kind="cvm", memory_cap=1000, allow_fallback=False)


def test_lrv_constant_field_is_zero():
    f = ObservationField.from_array(np.full((4, 4), 2.5), d=2)
    est = lrv_estimate(f, KernelSpec("ma", 2), Block((0, 0), (4, 4)))
    assert np.abs(est).max() <= 1e-25


def test_lrv_matches_loop_oracle():
    rng = np.random.default_rng(12)
    f = ObservationField.from_array(rng.standard_normal((3, 3, 2)), d=2)
    spec = KernelSpec("ar", 2)
    from episcan import kernel_value

    assignment = MeanAssignment.global_mean()
    pts = f.points()
    centered = pts - pts.mean(axis=0)
    for block in [Block((0, 0), (3, 3)), Block((1, 0), (3, 2))]:
        expected = loop_lrv(f, lambda h: kernel_value(spec, h), block, centered)
        got = lrv_estimate(f, spec, block, assignment)
        np.testing.assert_allclose(got, expected, rtol=1e-10, atol=1e-14)


def test_lrv_zero_lag_kernel_is_covariance():
    rng = np.random.default_rng(13)
    f = ObservationField.from_array(rng.standard_normal((6, 6, 2)), d=2)
    block = Block((0, 0), (6, 6))
    got = _lrv_weighted(f, lambda h: 1.0 if not any(h) else 0.0, block,
                        MeanAssignment.global_mean())
    pts = f.points()
    centered = pts - pts.mean(axis=0)
    np.testing.assert_allclose(got, (centered.T @ centered) / 36, rtol=1e-12)


def test_lrv_rejects_degenerate_block():
    f = ObservationField.from_array(np.zeros((3, 3)), d=2)
    with pytest.raises(ConfigError):
        lrv_estimate(f, KernelSpec("ma", 2), Block((0, 0), (1, 1)))


def test_lrv_two_group_centering():
    rng = np.random.default_rng(14)
    f = ObservationField.from_array(rng.standard_normal((4, 4)), d=2)
    block = Block((0, 0), (2, 2))
    assignment = MeanAssignment.two_group(block)
    pts = f.points()
    labels = assignment.labels(f.shape)
    centered = pts.copy()
    for a in (0, 1):
        centered[labels == a] -= pts[labels == a].mean(axis=0)
    expected = loop_lrv(f, lambda h: 1.0 if not any(h) else 0.0, block, centered)
    got = _lrv_weighted(f, lambda h: 1.0 if not any(h) else 0.0, block, assignment)
    np.testing.assert_allclose(got, expected, rtol=1e-12)
