import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from madirl.autodiff import Adam, clip_grad_norm, global_grad_norm, parameter
from madirl.errors import ConfigError, ShapeError


def test_adam_first_step_hand_value():
    # step 1 with grad 1: bias correction gives m_hat = v_hat = 1
    p = parameter(np.array([0.0]))
    p.grad = np.array([1.0])
    Adam([p], lr=0.001).step()
    assert p.values[0] == pytest.approx(-0.001, abs=1e-6)


def test_adam_zero_grad_leaves_params_and_increments_t():
    p = parameter(np.array([1.5, -2.0]))
    opt = Adam([p], lr=0.001)
    p.grad = np.zeros(2)
    opt.step()
    np.testing.assert_array_equal(p.values, [1.5, -2.0])
    assert opt.t == 1


def test_adam_two_steps_move_against_grad_sign():
    p = parameter(np.array([0.0, 0.0]))
    opt = Adam([p], lr=0.01)
    hist = [p.values.copy()]
    for _ in range(2):
        p.grad = np.array([1.0, -1.0])
        opt.step()
        hist.append(p.values.copy())
    assert hist[1][0] > hist[2][0] and hist[0][0] > hist[1][0]
    assert hist[1][1] < hist[2][1] and hist[0][1] < hist[1][1]


def test_adam_shape_mismatch():
    p = parameter(np.zeros(3))
    p.grad = np.zeros(4)
    with pytest.raises(ShapeError):
        Adam([p], lr=0.001).step()


def test_clip_grad_norm_scales_to_unit():
    g = np.array([3.0, 4.0])
    norm = clip_grad_norm([g], 1.0)
    assert norm == pytest.approx(5.0)
    np.testing.assert_allclose(g, [0.6, 0.8], atol=1e-12)


def test_clip_grad_norm_below_threshold_untouched():
    g = np.array([0.3, 0.4])
    norm = clip_grad_norm([g], 1.0)
    assert norm == pytest.approx(0.5)
    np.testing.assert_array_equal(g, [0.3, 0.4])


def test_clip_post_norm_is_min_of_norm_and_max():
    rng = np.random.default_rng(0)
    for _ in range(20):
        grads = [rng.normal(size=s) for s in [(3, 2), (4,), (2, 2, 2)]]
        pre = global_grad_norm(grads)
        clip_grad_norm(grads, 1.0)
        assert global_grad_norm(grads) == pytest.approx(min(pre, 1.0), abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=1, max_size=12),
       st.floats(0.01, 50))
def test_clip_is_idempotent(values, max_norm):
    g = np.array(values, dtype=np.float64)
    clip_grad_norm([g], max_norm)
    once = g.copy()
    clip_grad_norm([g], max_norm)
    np.testing.assert_allclose(g, once, atol=1e-12)


def test_clip_rejects_nonpositive_max():
    with pytest.raises(ConfigError):
        clip_grad_norm([np.ones(2)], 0.0)
