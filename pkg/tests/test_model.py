import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mfm.loss import LossConfig, TargetArea
from mfm.masking import MaskKind, MaskShape, build_mask, corrupt_image
from mfm.model import (CheckpointError, Model, ModelConfig, _chain_loss, backward, encode, forward, grad_check,
                       init_model, kink_margin, loss_and_grads, load_checkpoint, relative_error, save_checkpoint)

SMALL = ModelConfig(in_channels=3, widths=(4, 6), kernel_size=3, seed=0)


def test_default_parameter_count():
    # (27*16 + 16) + (144*32 + 32) + (288*32 + 32) + (32*3 + 3)
    cfg = ModelConfig()
    assert cfg.parameter_count() == 448 + 4640 + 9248 + 99 == 14435
    assert init_model(cfg).parameter_count() == 14435


@given(st.sampled_from([1, 3]), st.lists(st.integers(1, 8), min_size=1, max_size=4), st.sampled_from([1, 3, 5]))
def test_parameter_count_is_shape_formula(c, widths, k):
    cfg = ModelConfig(c, tuple(widths), k)
    expected, c_in = 0, c
    for c_out in widths:
        expected += k * k * c_in * c_out + c_out
        c_in = c_out
    expected += c_in * c + c
    assert cfg.parameter_count() == expected == init_model(cfg).parameter_count()


def test_init_determinism_and_bounds():
    a, b = init_model(ModelConfig(seed=3)), init_model(ModelConfig(seed=3))
    assert all(np.array_equal(x, y) for x, y in zip(a.params, b.params))
    assert not np.array_equal(a.params[0], init_model(ModelConfig(seed=4)).params[0])
    for wt, bias in zip(a.weights, a.biases):
        fan_in = wt.shape[0] * wt.shape[1] * wt.shape[2]
        assert np.abs(wt).max() <= np.sqrt(6.0 / fan_in)
        assert not bias.any()


@pytest.mark.parametrize("kwargs", [dict(in_channels=2), dict(widths=()), dict(widths=(4, 0)),
                                    dict(kernel_size=4), dict(seed=-1)])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        ModelConfig(**kwargs)


@pytest.mark.parametrize("size", [8, 16, 32])
def test_shape_preserved(size, rng):
    model = init_model(ModelConfig())
    pred, _ = forward(model, rng.uniform(size=(2, size, size, 3)))
    assert pred.shape == (2, size, size, 3)


def test_zero_weights_give_zero_output(rng):
    model = init_model(ModelConfig())
    model.params = [np.zeros_like(p) for p in model.params]
    pred, _ = forward(model, rng.uniform(size=(1, 8, 8, 3)))
    assert not pred.any()


def test_scalar_chain_by_hand():
    model = init_model(ModelConfig(in_channels=1, widths=(1,), kernel_size=1))
    model.params = [np.full((1, 1, 1, 1), 2.0), np.array([-0.5]), np.full((1, 1, 1, 1), 3.0), np.array([0.25])]
    pred, cache = forward(model, np.full((1, 1, 1, 1), 0.75))
    assert pred.item() == 3.0 * max(2.0 * 0.75 - 0.5, 0.0) + 0.25
    grads = backward(model, cache, np.ones((1, 1, 1, 1)))
    assert [g.item() for g in grads] == [3.0 * 0.75, 3.0, 1.0, 1.0]
    pred, cache = forward(model, np.full((1, 1, 1, 1), 0.25))  # pre-activation exactly 0
    assert pred.item() == 0.25
    assert backward(model, cache, np.ones((1, 1, 1, 1)))[0].item() == 0.0


def test_forward_matches_direct_convolution(rng):
    model = init_model(ModelConfig(in_channels=1, widths=(2,), kernel_size=3, seed=5))
    x = rng.normal(size=(1, 5, 6, 1))
    feats, _, _ = encode(model, x)
    wt, b = model.params[0], model.params[1]
    xp = np.pad(x[0, :, :, 0], 1)
    for i in range(5):
        for j in range(6):
            for o in range(2):
                expected = max(np.sum(xp[i:i + 3, j:j + 3] * wt[:, :, 0, o]) + b[o], 0.0)
                assert feats[0, i, j, o] == pytest.approx(expected, abs=1e-12)


def test_backward_matches_finite_differences(rng):
    model = init_model(ModelConfig(3, (4, 8, 8), 3, seed=1))
    for p in model.biases:
        p[:] = rng.normal(scale=0.1, size=p.shape)
    x = rng.uniform(size=(2, 8, 8, 3))
    seed = rng.normal(size=(2, 8, 8, 3))
    _, cache = forward(model, x)
    analytic = backward(model, cache, seed)
    h = 1e-5
    worst = 0.0
    for p, g in zip(model.params, analytic):
        numeric = np.empty_like(p)
        flat = p.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = np.sum(forward(model, x)[0] * seed)
            flat[i] = orig - h
            down = np.sum(forward(model, x)[0] * seed)
            flat[i] = orig
            numeric.reshape(-1)[i] = (up - down) / (2 * h)
        worst = max(worst, relative_error(g, numeric))
    assert worst <= 1e-4


def test_backward_linearity_and_zero(rng):
    model = init_model(SMALL)
    _, cache = forward(model, rng.uniform(size=(2, 6, 6, 3)))
    g = rng.normal(size=(2, 6, 6, 3))
    one = backward(model, cache, g)
    two = backward(model, cache, 2 * g)
    assert all(np.array_equal(2 * a, b) for a, b in zip(one, two))
    assert not any(z.any() for z in backward(model, cache, np.zeros_like(g)))
    with pytest.raises(ValueError):
        backward(model, cache, np.zeros((1, 6, 6, 3)))


def test_input_validation():
    with pytest.raises(ValueError):
        forward(init_model(SMALL), np.zeros((1, 4, 4, 1)))


def test_determinism(rng):
    x = rng.uniform(size=(2, 8, 8, 3))
    a, _ = forward(init_model(SMALL), x)
    b, _ = forward(init_model(SMALL), x)
    assert np.array_equal(a, b)


def _random_instance(rng):
    cfg = ModelConfig(int(rng.choice([1, 3])), (int(rng.integers(2, 5)), int(rng.integers(2, 5))), 3,
                      seed=int(rng.integers(1 << 30)))
    model = init_model(cfg)
    for b in model.biases:
        b[:] = rng.normal(scale=0.05, size=b.shape)
    size = int(rng.integers(5, 9))
    image = rng.uniform(size=(size, size, cfg.in_channels))
    mask = build_mask(MaskShape(rng.choice([s.value for s in MaskShape])), int(rng.integers(1, 3)),
                      MaskKind.LOW_PASS if rng.random() < 0.5 else MaskKind.HIGH_PASS, size, size)
    if kink_margin(model, corrupt_image(image, mask)[None]) <= 1e-3:
        return _random_instance(rng)
    return model, image, mask


@pytest.mark.parametrize("gamma,tol", [(2.0, 1e-4), (1.0, 1e-3)])
def test_grad_check_suite(gamma, tol):
    rng = np.random.default_rng(int(gamma))
    errors = []
    for i in range(25):
        model, image, mask = _random_instance(rng)
        area = TargetArea.FULL if i % 5 == 0 else TargetArea.MASKED
        errors.append(grad_check(model, image, LossConfig(gamma, target_area=area), mask))
    assert max(errors) <= tol


def test_grad_check_at_minimum(rng):
    # identity network: one width-1 layer passing a positive pixel through unchanged
    model = init_model(ModelConfig(1, (1,), 1))
    model.params = [np.ones((1, 1, 1, 1)), np.zeros(1), np.ones((1, 1, 1, 1)), np.zeros(1)]
    image = rng.uniform(0.1, 1.0, size=(6, 6, 1))
    mask = build_mask(MaskShape.CIRCLE, 2, MaskKind.LOW_PASS, 6, 6)
    cfg = LossConfig(2.0, target_area=TargetArea.FULL)
    loss, grads = loss_and_grads(model, image[None], image[None], None, cfg)
    assert loss == 0.0 and max(np.abs(g).max() for g in grads) <= 1e-6
    h = 1e-5
    for p, g in zip(model.params, grads):
        flat = p.reshape(-1)
        orig = flat[0]
        flat[0] = orig + h
        up = _chain_loss(model, image[None], image[None], None, cfg)
        flat[0] = orig - h
        down = _chain_loss(model, image[None], image[None], None, cfg)
        flat[0] = orig
        assert abs((up - down) / (2 * h) - g.reshape(-1)[0]) <= 1e-6
    # a masked-only loss on the same instance is also at its minimum
    assert loss_and_grads(model, image[None], image[None], mask.bits, LossConfig(2.0))[0] == 0.0


def test_relative_error_floor():
    assert relative_error(np.array([1.0, 0.0]), np.array([1.0, 1e-12])) < 1e-5
    assert relative_error(np.array([2.0]), np.array([1.0])) == 0.5
    assert relative_error(np.array([]), np.array([])) == 0.0


def test_checkpoint_round_trip(tmp_path, rng):
    model = init_model(ModelConfig(1, (3, 5), 5, seed=2 ** 40))
    path = tmp_path / "m.bin"
    save_checkpoint(model, path)
    loaded = load_checkpoint(path)
    assert loaded.config == model.config
    assert all(np.array_equal(a, b) for a, b in zip(loaded.params, model.params))
    data = path.read_bytes()
    assert data[:4] == b"MFM1"
    assert struct.unpack_from("<IIqI", data, 4) == (1, 5, 2 ** 40, 2)
    assert struct.unpack_from("<2I", data, 24) == (3, 5)
    assert len(data) == 32 + 8 * model.parameter_count()
    assert struct.unpack_from("<d", data, 32)[0] == model.params[0].reshape(-1)[0]


@pytest.mark.parametrize("mutate", [lambda d: b"XXXX" + d[4:], lambda d: d[:-8], lambda d: d + b"\0",
                                    lambda d: d[:10]])
def test_checkpoint_errors(tmp_path, mutate):
    path = tmp_path / "m.bin"
    save_checkpoint(init_model(SMALL), path)
    path.write_bytes(mutate(path.read_bytes()))
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_model_copy_is_deep():
    model = init_model(SMALL)
    clone = model.copy()
    clone.params[0][...] = 0
    assert model.params[0].any()
    assert isinstance(clone, Model)


def test_kink_margin_detects_near_zero_preactivation():
    model = init_model(ModelConfig(1, (1,), 1))
    model.params = [np.ones((1, 1, 1, 1)), np.array([-0.5]), np.ones((1, 1, 1, 1)), np.zeros(1)]
    assert kink_margin(model, np.full((1, 2, 2, 1), 0.5 + 1e-7)) == pytest.approx(1e-7)
    # straddling the kink breaks the finite-difference oracle, which is why checks avoid it
    cfg = LossConfig(2.0, target_area=TargetArea.FULL)
    image = np.full((2, 2, 1), 0.5 + 1e-7)
    assert grad_check(model, image, cfg, None, target=np.zeros((2, 2, 1))) > 1e-2
