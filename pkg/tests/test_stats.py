import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcsde.pathtracer.render import PathSample
from mcsde.pathtracer.stats import PixelStats, welford_update
from mcsde.rng import CounterRng


def _two_pass(d, s):
    d = np.asarray(d)
    s = np.asarray(s)
    n = d.shape[0]
    out = {
        "mean_d": d.mean(axis=0),
        "mean_s": s.mean(axis=0),
        "var_d": d.var(axis=0, ddof=1) if n >= 2 else None,
        "var_s": s.var(axis=0, ddof=1) if n >= 2 else None,
    }
    if n >= 2:
        out["cov_ds"] = np.sum(
            (d - d.mean(axis=0)) * (s - s.mean(axis=0)), axis=0
        ) / (n - 1)
    return out


def _stream(d, s):
    stats = PixelStats.zeros(())
    for k in range(d.shape[0]):
        stats.update(d[k], s[k])
    return stats


def test_single_sample_mean_and_undefined_variance():
    stats = PixelStats.zeros(())
    stats.update(np.array([1.0, 2.0, 3.0]), np.array([0.5, 0.5, 0.5]))
    assert np.array_equal(stats.mean_d, [1.0, 2.0, 3.0])
    assert np.all(np.isnan(stats.var_d))


def test_hand_computed_pair():
    # scalar diffuse channel samples {1, 3}: mean 2, variance 2
    d = np.array([[1.0, 0.0, 0.0], [3.0, 0.0, 0.0]])
    s = np.zeros((2, 3))
    stats = _stream(d, s)
    assert stats.mean_d[0] == 2.0
    assert stats.var_d[0] == 2.0


def test_streaming_matches_two_pass_large():
    rng = CounterRng(77)
    n = 10_000
    d = rng.normal(np.arange(n * 3).reshape(n, 3)) * 2.0 + 1.0
    s = rng.normal(np.arange(n * 3).reshape(n, 3) + 50_000) * 0.5 + d * 0.3
    stats = _stream(d, s)
    ref = _two_pass(d, s)
    for mine, theirs in [
        (stats.mean_d, ref["mean_d"]),
        (stats.mean_s, ref["mean_s"]),
        (stats.var_d, ref["var_d"]),
        (stats.var_s, ref["var_s"]),
        (stats.cov_ds, ref["cov_ds"]),
    ]:
        assert np.allclose(mine, theirs, rtol=1e-10, atol=1e-14)


def test_correlation_bounded():
    rng = CounterRng(5)
    n = 500
    d = rng.normal(np.arange(n * 3).reshape(n, 3))
    s = d * 0.99 + 0.01 * rng.normal(np.arange(n * 3).reshape(n, 3) + 9_000)
    stats = _stream(d, s)
    corr = stats.cov_ds / np.sqrt(stats.var_d * stats.var_s)
    assert np.all(np.abs(corr) <= 1.0 + 1e-12)


@given(
    st.lists(
        st.tuples(
            st.floats(-1e3, 1e3, allow_nan=False),
            st.floats(-1e3, 1e3, allow_nan=False),
        ),
        min_size=2,
        max_size=60,
    )
)
@settings(max_examples=150, deadline=None)
def test_streaming_equals_two_pass_property(pairs):
    d = np.array([[a, 0.0, 0.0] for a, _ in pairs])
    s = np.array([[b, 0.0, 0.0] for _, b in pairs])
    stats = _stream(d, s)
    ref = _two_pass(d, s)
    scale = max(1.0, float(np.max(np.abs(d))), float(np.max(np.abs(s)))) ** 2
    assert abs(stats.mean_d[0] - ref["mean_d"][0]) <= 1e-9 * max(1.0, abs(ref["mean_d"][0]))
    assert abs(stats.var_d[0] - ref["var_d"][0]) <= 1e-9 * scale
    assert abs(stats.cov_ds[0] - ref["cov_ds"][0]) <= 1e-9 * scale


def test_merge_equals_sequential_and_is_associative():
    rng = CounterRng(13)
    n = 300
    d = rng.normal(np.arange(n * 3).reshape(n, 3)) + 2.0
    s = rng.normal(np.arange(n * 3).reshape(n, 3) + 7_777)
    whole = _stream(d, s)
    a, b, c = _stream(d[:50], s[:50]), _stream(d[50:120], s[50:120]), _stream(d[120:], s[120:])
    left = a.merge(b).merge(c)
    right = a.merge(b.merge(c))
    for part in (left, right):
        assert part.n == whole.n
        assert np.allclose(part.mean_d, whole.mean_d, rtol=1e-12)
        assert np.allclose(part.var_d, whole.var_d, rtol=1e-10)
        assert np.allclose(part.cov_ds, whole.cov_ds, rtol=1e-10)


def test_merge_with_empty_is_identity():
    rng = CounterRng(3)
    d = rng.normal(np.arange(30).reshape(10, 3))
    s = rng.normal(np.arange(30).reshape(10, 3) + 100)
    stats = _stream(d, s)
    merged = PixelStats.zeros(()).merge(stats)
    assert np.array_equal(merged.mean_d, stats.mean_d)
    assert np.array_equal(merged.m2_s, stats.m2_s)


def test_functional_welford_update_leaves_input_untouched():
    base = PixelStats.zeros(())
    sample = PathSample(f_diffuse=np.ones(3), f_specular=np.zeros(3))
    out = welford_update(base, sample)
    assert base.n == 0
    assert out.n == 1
    assert np.array_equal(out.mean_d, np.ones(3))


def test_rejects_nonfinite_samples():
    stats = PixelStats.zeros(())
    with pytest.raises(ValueError):
        stats.update(np.array([np.inf, 0, 0]), np.zeros(3))
