from __future__ import annotations

import numpy as np
import pytest
from scipy import stats

from merwlab import rng


def test_frozen_stream():
    # frozen on first release; any change to the mixer breaks reproducibility
    u = rng.uniforms(0, [0, 1], [0, 1, 2])
    np.testing.assert_array_equal(
        u,
        [
            [0.11703298039315357, 0.7306908801127456, 0.1535359223484286],
            [0.706917358893174, 0.7892389680769654, 0.9808693142273984],
        ],
    )


def test_draw_is_pure_function_of_key():
    a = rng.uniforms(42, [5], [100])[0, 0]
    b = rng.uniforms(42, np.arange(10), np.arange(200))[5, 100]
    assert a == b


def test_seeds_and_replicas_differ():
    base = rng.uniforms(1, [0], np.arange(64))
    assert not np.array_equal(base, rng.uniforms(2, [0], np.arange(64)))
    assert not np.array_equal(base, rng.uniforms(1, [1], np.arange(64)))


def test_uniformity_and_range():
    u = rng.uniforms(3, np.arange(100), np.arange(2000)).ravel()
    assert u.min() >= 0 and u.max() < 1
    assert stats.kstest(u, "uniform").pvalue > 1e-3


def test_replica_streams_uncorrelated():
    u = rng.uniforms(9, [0, 1], np.arange(200_000))
    assert abs(np.corrcoef(u[0], u[1])[0, 1]) < 0.01
    lag = np.corrcoef(u[0, :-1], u[0, 1:])[0, 1]
    assert abs(lag) < 0.01


def test_negative_seed_refused():
    with pytest.raises(ValueError):
        rng.seed_u64(-1)
    assert rng.seed_u64(2**64 + 3) == np.uint64(3)
