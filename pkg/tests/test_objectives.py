import math

import numpy as np
import pytest
import torch
from hypothesis import given
from hypothesis import strategies as st

from carbonlens.objectives import MetricError, mae, mape, mape_loss, rmsle, rmsle_loss


def loop_metrics(p, g, m):
    # plain scalar loops, no vectorized numpy
    n, sl, sp, sa = 0, 0.0, 0.0, 0.0
    for pi, gi, mi in zip(p.ravel().tolist(), g.ravel().tolist(), m.ravel().tolist()):
        if not mi:
            continue
        n += 1
        sl += (math.log(pi + 1) - math.log(gi + 1)) ** 2
        sp += abs((gi + 1) - (pi + 1)) / (gi + 1)
        sa += abs(pi - gi)
    return math.sqrt(sl / n), 100.0 * sp / n, sa / n


def test_hand_values():
    assert rmsle([math.e - 1], [0.0]) == pytest.approx(1.0, abs=1e-9)
    assert mape([1.0], [0.0]) == pytest.approx(100.0, abs=1e-9)
    assert mape([0.0], [1.0]) == pytest.approx(50.0, abs=1e-9)
    assert rmsle([math.e - 1, 3.0], [0.0, 3.0]) == pytest.approx(math.sqrt(0.5), abs=1e-9)
    assert mae([2.0, 5.0], [1.0, 1.0]) == pytest.approx(2.5, abs=1e-12)


def test_identity_is_zero(rng):
    g = rng.random((8, 8)) * 50
    assert rmsle(g, g) == 0 and mape(g, g) == 0 and mae(g, g) == 0


def test_against_loop_oracle():
    rng = np.random.default_rng(99)
    for _ in range(100):
        shape = tuple(rng.integers(1, 12, size=2))
        p = rng.exponential(20, shape)
        g = rng.exponential(20, shape) * (rng.random(shape) > 0.3)
        m = rng.random(shape) > 0.4
        m.flat[0] = True
        want = loop_metrics(p, g, m)
        got = (rmsle(p, g, m), mape(p, g, m), mae(p, g, m))
        for a, b in zip(got, want):
            assert a == pytest.approx(b, rel=1e-6)


def test_mask_ignores_invalid_pixels():
    p = np.array([1.0, -5.0])
    g = np.array([1.0, 1e9])
    assert rmsle(p, g, [1, 0]) == 0.0


def test_errors():
    with pytest.raises(MetricError):
        rmsle([1.0], [1.0], [0])
    with pytest.raises(MetricError):
        mape([-1.0], [1.0])
    with pytest.raises(MetricError):
        mae([1.0, 2.0], [1.0])


def test_overestimation_penalised_less():
    rng = np.random.default_rng(2)
    violations = 0
    for _ in range(1000):
        g = rng.uniform(0, 100)
        d = rng.uniform(0, g) or g
        if not rmsle([g + d], [g]) < rmsle([g - d], [g]):
            violations += 1
    assert violations == 0


@given(st.floats(1e-3, 100), st.floats(1e-3, 1.0))
def test_overestimation_property(g, frac):
    d = g * frac
    assert rmsle([g + d], [g]) < rmsle([g - d], [g])


def test_rmsle_loss_is_tile_mean(rng):
    p = rng.random((3, 1, 4, 4)) * 10
    g = rng.random((3, 1, 4, 4)) * 10
    m = rng.random((3, 1, 4, 4)) > 0.3
    m[2] = False
    loss = rmsle_loss(torch.tensor(p), torch.tensor(g), torch.tensor(m))
    want = np.mean([rmsle(p[b], g[b], m[b]) for b in range(2)])
    assert float(loss) == pytest.approx(want, rel=1e-6)
    loss = mape_loss(torch.tensor(p), torch.tensor(g), torch.tensor(m))
    assert float(loss) == pytest.approx(np.mean([mape(p[b], g[b], m[b]) for b in range(2)]))
