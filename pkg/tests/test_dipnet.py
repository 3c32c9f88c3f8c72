import numpy as np
import pytest

from oracles import downsample_2d
from oscdip import layers
from oscdip.dipnet import (
    DivergenceError,
    Generator,
    NetConfig,
    TaskSpec,
    backward_step,
    energy,
    energy_grad,
    forward,
    load_checkpoint,
    loss_and_grad,
    net_init,
    save_checkpoint,
)
from oscdip.imagecore import ImageError
from oscdip.noisegen import gen_gaussian_pn, gen_sinusoid_pn

MINI = NetConfig(input_channels=2, channels_per_level=(2, 3), skip_channels=(1, 1), output_channels=3, seed=1)


def make_task(kind, rng, size=8):
    if kind == "super-resolve":
        return TaskSpec(kind, rng.uniform(size=(3, size // 4, size // 4)), gen_gaussian_pn((3, size, size), seed=2), factor=4)
    if kind == "inpaint":
        mask = (rng.uniform(size=(size, size)) > 0.3).astype(float)
        return TaskSpec(kind, rng.uniform(size=(3, size, size)), gen_sinusoid_pn((3, size, size), seed=2), mask=mask)
    return TaskSpec(kind, rng.uniform(size=(3, size, size)), gen_gaussian_pn((3, size, size), seed=2))


def finite_difference(f, x, eps):
    g = np.zeros_like(x)
    for k in range(x.size):
        xp = x.copy()
        xp.flat[k] += eps
        xm = x.copy()
        xm.flat[k] -= eps
        g.flat[k] = (f(xp) - f(xm)) / (2 * eps)
    return g


def rel_err(a, b):
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-12)


# -- layers -------------------------------------------------------------------


def naive_conv(x, w, b, stride):
    k = w.shape[-1]
    p = k // 2
    xp = np.pad(x, ((0, 0), (p, p), (p, p)), mode="reflect") if p else x
    h_out = (x.shape[1] + stride - 1) // stride
    w_out = (x.shape[2] + stride - 1) // stride
    out = np.zeros((w.shape[0], h_out, w_out))
    for o in range(w.shape[0]):
        for r in range(h_out):
            for c in range(w_out):
                patch = xp[:, r * stride : r * stride + k, c * stride : c * stride + k]
                out[o, r, c] = np.sum(patch * w[o]) + b[o]
    return out


@pytest.mark.parametrize("k,stride", [(3, 1), (3, 2), (1, 1)])
def test_conv_matches_loops(k, stride, rng):
    x = rng.normal(size=(3, 8, 8))
    w = rng.normal(size=(4, 3, k, k))
    b = rng.normal(size=4)
    y, _ = layers.conv2d(x, w, b, stride)
    np.testing.assert_allclose(y, naive_conv(x, w, b, stride), atol=1e-12)


@pytest.mark.parametrize("stride", [1, 2])
def test_conv_backward_adjoint(stride, rng):
    x = rng.normal(size=(2, 8, 8))
    w = rng.normal(size=(3, 2, 3, 3))
    b = rng.normal(size=3)
    y, cache = layers.conv2d(x, w, b, stride)
    dy = rng.normal(size=y.shape)
    dx, dw, db = layers.conv2d_backward(dy, w, cache)
    f = lambda xx: np.vdot(layers.conv2d(xx, w, b, stride)[0], dy)  # noqa: E731
    assert np.max(rel_err(dx, finite_difference(f, x, 1e-2))) < 1e-8
    fw = lambda ww: np.vdot(layers.conv2d(x, ww, b, stride)[0], dy)  # noqa: E731
    assert np.max(rel_err(dw, finite_difference(fw, w, 1e-2))) < 1e-8
    np.testing.assert_allclose(db, dy.sum(axis=(1, 2)))


def test_reflect_pad_adjoint(rng):
    x = rng.normal(size=(2, 5, 6))
    g = rng.normal(size=(2, 7, 8))
    assert np.vdot(layers.reflect_pad(x, 1), g) == pytest.approx(np.vdot(x, layers.reflect_pad_backward(g, 1)), rel=1e-12)


def test_upsample_adjoint(rng):
    x = rng.normal(size=(2, 3, 4))
    g = rng.normal(size=(2, 6, 8))
    up = layers.upsample2(x)
    np.testing.assert_array_equal(up[:, ::2, ::2], x)
    assert np.vdot(up, g) == pytest.approx(np.vdot(x, layers.upsample2_backward(g)), rel=1e-12)


def test_sigmoid_and_leaky():
    assert layers.sigmoid(np.array([0.0]))[0] == 0.5
    y, pos = layers.leaky_relu(np.array([-2.0, 3.0]))
    np.testing.assert_array_equal(y, [-2.0 * layers.LEAKY_SLOPE, 3.0])
    np.testing.assert_array_equal(layers.leaky_relu_backward(np.ones(2), pos), [layers.LEAKY_SLOPE, 1.0])


# -- energies -----------------------------------------------------------------


def test_energy_zero_cases(rng):
    t = make_task("denoise", rng)
    assert energy(t.x0 + t.pn.values, t) == 0.0
    t = make_task("inpaint", rng)
    x = t.x0 + t.pn.values + rng.normal(size=t.x0.shape) * (1 - t.mask)
    assert energy(x, t) == 0.0


def test_inpaint_off_mask_invariance(rng):
    t = make_task("inpaint", rng)
    x = rng.uniform(size=t.x0.shape)
    assert energy(x + 5 * (1 - t.mask), t) == energy(x, t)


def test_sr_energy_against_oracle(rng):
    t = make_task("super-resolve", rng)
    x = rng.uniform(size=(3, 8, 8))
    target = t.x0 + downsample_2d(t.pn.values, 4)
    expected = np.sum((downsample_2d(x, 4) - target) ** 2)
    assert energy(x, t) == pytest.approx(expected, rel=1e-9)


@pytest.mark.parametrize("kind", ["denoise", "super-resolve", "inpaint"])
def test_energy_gradient_wrt_output(kind, rng):
    t = make_task(kind, rng)
    x = rng.uniform(size=(3, 8, 8))
    _, g = energy_grad(x, t)
    num = finite_difference(lambda xx: energy(xx, t), x, 1e-3)
    big = np.abs(g) > 1e-8
    assert np.max(rel_err(g[big], num[big])) <= 1e-4
    assert np.all(np.abs(num[~big]) < 1e-8)


def test_energy_shape_mismatch(rng):
    t = make_task("denoise", rng)
    with pytest.raises(ImageError):
        energy(np.zeros((3, 4, 4)), t)


# -- network ------------------------------------------------------------------


def param_count(cfg):
    """Closed-form count for the documented layout."""
    n = 0
    cin = cfg.input_channels
    for ch, sk in zip(cfg.channels_per_level, cfg.skip_channels):
        n += (cin * sk + sk) + (cin * ch * 9 + ch) + (ch * ch * 9 + ch)
        cin = ch
    for ch, sk in reversed(list(zip(cfg.channels_per_level, cfg.skip_channels))):
        n += ((cin + sk) * ch * 9 + ch) + (ch * ch + ch)
        cin = ch
    return n + cin * cfg.output_channels + cfg.output_channels


@pytest.mark.parametrize("cfg", [MINI, NetConfig()])
def test_parameter_count(cfg):
    assert cfg.num_parameters() == param_count(cfg) == Generator(cfg).size


def test_mini_is_small():
    assert MINI.num_parameters() <= 500


@pytest.mark.parametrize("kind", ["denoise", "super-resolve", "inpaint"])
def test_full_gradient_check(kind, rng):
    st = net_init(MINI, (3, 8, 8))
    t = make_task(kind, rng)
    _, _, g = loss_and_grad(st, t)
    f = lambda p: energy(st.net.forward(p, st.z)[0], t)  # noqa: E731
    num = finite_difference(f, st.params, 1e-5)
    assert np.max(rel_err(g, num)) <= 1e-3


def test_forward_properties():
    st = net_init(NetConfig(seed=3), (3, 32, 32))
    x = forward(st)
    assert x.shape == (3, 32, 32)
    assert np.all((x > 0) & (x < 1))
    np.testing.assert_array_equal(x, forward(st))


def test_final_layer_linearity():
    st = net_init(MINI, (3, 8, 8))
    _, logits, _ = st.net.forward(st.params, st.z)
    doubled = st.params.copy()
    for name in ("out.w", "out.b"):
        doubled[st.net.slices[name][0]] *= 2
    _, logits2, _ = st.net.forward(doubled, st.z)
    np.testing.assert_allclose(logits2, 2 * logits, rtol=1e-12, atol=1e-15)


def test_init_shape_rules():
    with pytest.raises(ValueError):
        net_init(NetConfig(), (3, 36, 36))
    with pytest.raises(ValueError):
        net_init(NetConfig(), (3, 8, 8))
    with pytest.raises(ValueError):
        net_init(NetConfig(output_channels=1), (3, 32, 32))


def test_lr_zero_keeps_params(rng):
    st = net_init(MINI, (3, 8, 8))
    t = make_task("denoise", rng)
    before = st.params.copy()
    _, x1, l1 = backward_step(st, t, lr=0.0)
    _, x2, l2 = backward_step(st, t, lr=0.0)
    np.testing.assert_array_equal(st.params, before)
    assert l1 == l2
    np.testing.assert_array_equal(x1, x2)


def test_returns_pre_update_image(rng):
    st = net_init(MINI, (3, 8, 8))
    t = make_task("denoise", rng)
    x_before = forward(st)
    _, x, _ = backward_step(st, t, lr=0.01)
    np.testing.assert_array_equal(x, x_before)
    assert not np.array_equal(forward(st), x_before)


def test_divergence_detected(rng):
    st = net_init(MINI, (3, 8, 8))
    t = make_task("denoise", rng)
    st.params[:] = np.nan
    with pytest.raises(DivergenceError):
        backward_step(st, t)


def test_determinism(rng):
    t = make_task("denoise", rng, size=16)
    runs = []
    for _ in range(2):
        st = net_init(NetConfig(channels_per_level=(4, 8), skip_channels=(2, 2), seed=5), (3, 16, 16))
        runs.append([backward_step(st, t, 0.01)[1] for _ in range(15)])
    for a, b in zip(*runs):
        np.testing.assert_array_equal(a, b)


def test_checkpoint_round_trip(tmp_path, rng):
    st = net_init(MINI, (3, 8, 8))
    t = make_task("denoise", rng)
    for _ in range(3):
        backward_step(st, t)
    path = tmp_path / "ck.bin"
    save_checkpoint(st, path)
    fresh = net_init(MINI, (3, 8, 8))
    load_checkpoint(path, fresh)
    np.testing.assert_array_equal(fresh.params, st.params)
    other = net_init(NetConfig(), (3, 32, 32))
    with pytest.raises(ValueError):
        load_checkpoint(path, other)


@pytest.mark.slow
def test_loss_trend_on_smooth_target():
    yy, xx = np.mgrid[0:32, 0:32] / 31.0
    smooth = np.stack([0.2 + 0.6 * xx, 0.5 + 0.3 * np.sin(3 * yy), 0.3 + 0.4 * xx * yy])
    t = TaskSpec("denoise", smooth, gen_gaussian_pn((3, 32, 32), seed=1))
    st = net_init(NetConfig(seed=2), (3, 32, 32))
    losses = [backward_step(st, t, lr=0.002)[2] for _ in range(1000)]
    means = np.array(losses).reshape(10, 100).mean(axis=1)
    assert np.all(np.diff(means) <= 0), means
