
import numpy as np
import pytest
from hypothesis import given, strategies as st

from perforated.errors import NonPositiveDt
from perforated.rng import INIT_STREAM_BIT, NormalStream, normal, wiener_increment


def test_moments():
    z = NormalStream(123, 0).normals(1_000_000)
    assert abs(z.mean()) < 4e-3
    assert abs(z.var() - 1) < 6e-3


def test_determinism():
    a = [normal(NormalStream(7, 3)) for _ in range(1)]
    s1, s2 = NormalStream(7, 3), NormalStream(7, 3)
    assert [s1.normal() for _ in range(100)] == [s2.normal() for _ in range(100)]
    assert a[0] == NormalStream(7, 3).normal()


def test_wiener_unit_step_is_normal():
    assert wiener_increment(NormalStream(1, 2), 1.0) == NormalStream(1, 2).normal()
    with pytest.raises(NonPositiveDt):
        wiener_increment(NormalStream(1), 0.0)
    with pytest.raises(NonPositiveDt):
        NormalStream(1).wiener_increments(-1.0, 3)


def test_increment_variance():
    dw = NormalStream(5, 1).wiener_increments(0.01, 1_000_000)
    assert dw.var() == pytest.approx(0.01, rel=0.01)


def test_path_variance():
    T, n = 1.0, 100
    ends = np.array([NormalStream(9, p).wiener_increments(T / n, n).sum() for p in range(1000)])
    assert ends.var() == pytest.approx(T, rel=0.1)


def test_streams_uncorrelated():
    a = NormalStream(11, 0).normals(100_000)
    b = NormalStream(11, 1).normals(100_000)
    c = NormalStream(11, 1 | INIT_STREAM_BIT).normals(100_000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.01
    assert abs(np.corrcoef(b, c)[0, 1]) < 0.01


@given(st.integers(0, 2**64 - 1), st.integers(0, 1000), st.lists(st.integers(0, 9), min_size=1, max_size=8))
def test_block_size_independence(seed, stream, sizes):
    whole = NormalStream(seed, stream).normals(sum(sizes))
    s = NormalStream(seed, stream)
    parts = np.concatenate([s.normals(k) for k in sizes])
    assert np.array_equal(whole, parts)


@given(st.integers(0, 1000), st.sampled_from([2, 4]))
def test_substeps_share_the_path(seed, k):
    coarse = NormalStream(seed, 0).wiener_increments(0.1, 10, substeps=k)
    fine = NormalStream(seed, 0).wiener_increments(0.1 / k, 10 * k)
    assert np.allclose(coarse, fine.reshape(10, k).sum(axis=1), rtol=1e-12, atol=1e-15)
