"""A small encoder-decoder generator trained on a single image.

The network maps a frozen noise tensor ``z`` to an image. Its parameters live
in one flat float64 vector so the Adam moments and the checkpoint format are
plain vectors too. Gradients are computed by a hand-written backward pass
(see :mod:`oscdip.layers`).

Layout for ``depth`` levels, ``k = 0 .. depth-1``::

    skip_k = lrelu(conv1x1(enc_k))                      # resolution of enc_k
    enc_{k+1} = lrelu(conv3x3(lrelu(conv3x3/2(enc_k)))) # half resolution
    dec = enc_depth
    for k = depth-1 .. 0:
        dec = lrelu(conv1x1(lrelu(conv3x3(cat(up2(dec), skip_k)))))
    out = sigmoid(conv1x1(dec))
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field

import numpy as np

from . import layers
from .degrade import lanczos_downsample, lanczos_downsample_adjoint
from .imagecore import ImageError
from .noisegen import PseudoNoise

TASK_KINDS = ("denoise", "super-resolve", "inpaint")

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

_CKPT_MAGIC = b"OSCDIPCK"
_CKPT_VERSION = 1


class DivergenceError(RuntimeError):
    """Raised when the loss becomes NaN or infinite."""


@dataclass
class NetConfig:
    input_channels: int = 8
    channels_per_level: tuple[int, ...] = (16, 32, 64)
    skip_channels: tuple[int, ...] = (4, 4, 4)
    output_channels: int = 3
    seed: int = 0

    @property
    def depth(self) -> int:
        return len(self.channels_per_level)

    def validate(self) -> None:
        if self.depth < 1:
            raise ValueError("need at least one encoder level")
        if len(self.skip_channels) != self.depth:
            raise ValueError("skip_channels must have one entry per level")
        if min(self.channels_per_level) < 1 or min(self.skip_channels) < 1:
            raise ValueError("channel counts must be positive")
        if self.input_channels < 1 or self.output_channels not in (1, 3):
            raise ValueError("bad input/output channel count")

    def layer_shapes(self) -> list[tuple[str, tuple[int, ...]]]:
        """Ordered ``(name, shape)`` list of every weight and bias."""
        shapes: list[tuple[str, tuple[int, ...]]] = []

        def conv(name, cin, cout, k):
            shapes.append((name + ".w", (cout, cin, k, k)))
            shapes.append((name + ".b", (cout,)))

        ch, sk = self.channels_per_level, self.skip_channels
        cin = self.input_channels
        for k in range(self.depth):
            conv(f"skip{k}", cin, sk[k], 1)
            conv(f"down{k}", cin, ch[k], 3)
            conv(f"enc{k}", ch[k], ch[k], 3)
            cin = ch[k]
        for k in reversed(range(self.depth)):
            conv(f"dec{k}", cin + sk[k], ch[k], 3)
            conv(f"mix{k}", ch[k], ch[k], 1)
            cin = ch[k]
        conv("out", cin, self.output_channels, 1)
        return shapes

    def num_parameters(self) -> int:
        return sum(int(np.prod(s)) for _, s in self.layer_shapes())


@dataclass
class TaskSpec:
    """A corrupted observation plus the energy to minimize against it.

    ``x0`` has the restored-image shape for denoising and inpainting and the
    low-resolution shape for super-resolution.
    """

    kind: str
    x0: np.ndarray
    pn: PseudoNoise
    factor: int | None = None
    mask: np.ndarray | None = None
    target: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ValueError(f"unknown task {self.kind!r}")
        self.x0 = np.asarray(self.x0, dtype=np.float64)
        c, h, w = self.pn.shape
        if self.kind == "super-resolve":
            if self.factor is None:
                raise ValueError("super-resolution needs a factor")
            if self.x0.shape != (c, h // self.factor, w // self.factor) or h % self.factor or w % self.factor:
                raise ImageError(f"x0 {self.x0.shape} inconsistent with output {self.pn.shape} / {self.factor}")
            self.target = self.x0 + lanczos_downsample(self.pn.values, self.factor)
        else:
            if self.x0.shape != self.pn.shape:
                raise ImageError(f"x0 shape {self.x0.shape} does not match pseudo-noise {self.pn.shape}")
            self.target = self.x0 + self.pn.values
        if self.kind == "inpaint":
            if self.mask is None:
                raise ValueError("inpainting needs a mask")
            if self.mask.shape != (h, w):
                raise ImageError(f"mask shape {self.mask.shape} does not match {(h, w)}")
            self.mask = np.asarray(self.mask, dtype=np.float64)

    @property
    def output_shape(self) -> tuple[int, int, int]:
        return self.pn.shape


def residual(x: np.ndarray, task: TaskSpec) -> np.ndarray:
    if task.kind == "denoise":
        return x - task.target
    if task.kind == "super-resolve":
        return lanczos_downsample(x, task.factor) - task.target
    return (x - task.target) * task.mask


def energy(x: np.ndarray, task: TaskSpec) -> float:
    """Squared-norm data term of the task against ``x0 + pn``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != task.output_shape:
        raise ImageError(f"image shape {x.shape} does not match task output {task.output_shape}")
    r = residual(x, task)
    return float(np.sum(r * r))


def energy_grad(x: np.ndarray, task: TaskSpec) -> tuple[float, np.ndarray]:
    """Energy and its gradient with respect to ``x``."""
    r = residual(x, task)
    loss = float(np.sum(r * r))
    if task.kind == "super-resolve":
        grad = 2.0 * lanczos_downsample_adjoint(r, task.factor, x.shape)
    else:
        # The mask is binary, so r is already restricted to its support.
        grad = 2.0 * r
    return loss, grad


class Generator:
    """Stateless network definition; parameters are passed in as a flat vector."""

    def __init__(self, cfg: NetConfig):
        cfg.validate()
        self.cfg = cfg
        self.shapes = cfg.layer_shapes()
        self.slices: dict[str, tuple[slice, tuple[int, ...]]] = {}
        offset = 0
        for name, shape in self.shapes:
            n = int(np.prod(shape))
            self.slices[name] = (slice(offset, offset + n), shape)
            offset += n
        self.size = offset

    def unpack(self, theta: np.ndarray) -> dict[str, np.ndarray]:
        return {name: theta[sl].reshape(shape) for name, (sl, shape) in self.slices.items()}

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        theta = np.zeros(self.size)
        gain = 2.0 / (1.0 + layers.LEAKY_SLOPE**2)
        for name, (sl, shape) in self.slices.items():
            if name.endswith(".w"):
                fan_in = shape[1] * shape[2] * shape[3]
                theta[sl] = rng.normal(0.0, np.sqrt(gain / fan_in), size=sl.stop - sl.start)
        return theta

    def forward(self, theta: np.ndarray, z: np.ndarray, *, keep_cache: bool = False):
        """Return ``(image, logits, cache)``; ``cache`` is None unless requested."""
        p = self.unpack(theta)
        cache = [] if keep_cache else None

        def conv(name, x, stride=1):
            y, c = layers.conv2d(x, p[name + ".w"], p[name + ".b"], stride)
            a, pos = layers.leaky_relu(y)
            if keep_cache:
                cache.append((name, c, pos))
            return a

        skips = []
        h = z
        for k in range(self.cfg.depth):
            skips.append(conv(f"skip{k}", h))
            h = conv(f"down{k}", h, stride=2)
            h = conv(f"enc{k}", h)
        for k in reversed(range(self.cfg.depth)):
            h = np.concatenate([layers.upsample2(h), skips[k]], axis=0)
            h = conv(f"dec{k}", h)
            h = conv(f"mix{k}", h)
        logits, c = layers.conv2d(h, p["out.w"], p["out.b"])
        if keep_cache:
            cache.append(("out", c, None))
        return layers.sigmoid(logits), logits, cache

    def backward(self, theta: np.ndarray, out: np.ndarray, cache, dout: np.ndarray) -> np.ndarray:
        """Gradient of a scalar with respect to ``theta`` given ``d scalar / d out``."""
        p = self.unpack(theta)
        grad = np.zeros(self.size)
        stack = list(cache)

        def put(name, dw, db):
            grad[self.slices[name + ".w"][0]] = dw.ravel()
            grad[self.slices[name + ".b"][0]] = db

        def conv_back(name, dy):
            got, c, pos = stack.pop()
            assert got == name, (got, name)
            dy = layers.leaky_relu_backward(dy, pos)
            dx, dw, db = layers.conv2d_backward(dy, p[name + ".w"], c)
            put(name, dw, db)
            return dx

        _, c, _ = stack.pop()
        dlogits = dout * out * (1.0 - out)
        dh, dw, db = layers.conv2d_backward(dlogits, p["out.w"], c)
        put("out", dw, db)

        dskips = [None] * self.cfg.depth
        for k in range(self.cfg.depth):
            dh = conv_back(f"mix{k}", dh)
            dh = conv_back(f"dec{k}", dh)
            n_up = dh.shape[0] - self.cfg.skip_channels[k]
            dskips[k] = dh[n_up:]
            dh = layers.upsample2_backward(dh[:n_up])
        for k in reversed(range(self.cfg.depth)):
            dh = conv_back(f"enc{k}", dh)
            dh = conv_back(f"down{k}", dh)
            dh = dh + conv_back(f"skip{k}", dskips[k])
        assert not stack
        return grad


@dataclass
class TrainState:
    net: Generator
    params: np.ndarray
    m: np.ndarray
    v: np.ndarray
    z: np.ndarray
    step: int = 0
    seed: int = 0

    def forward(self) -> np.ndarray:
        return forward(self)


def net_init(cfg: NetConfig, target_shape) -> TrainState:
    """Build a generator for ``target_shape`` with He-scaled random weights.

    Height and width must be multiples of ``2 ** depth`` and at least twice
    that, so the coarsest feature map stays reflect-paddable.
    """
    c, h, w = (int(s) for s in target_shape)
    if c != cfg.output_channels:
        raise ValueError(f"target has {c} channels but config outputs {cfg.output_channels}")
    scale = 2**cfg.depth
    if h % scale or w % scale or h < 2 * scale or w < 2 * scale:
        raise ValueError(f"image size {h}x{w} must be a multiple of {scale} and at least {2 * scale}")
    net = Generator(cfg)
    seq_params, seq_z = np.random.SeedSequence(cfg.seed).spawn(2)
    params = net.init_params(np.random.Generator(np.random.PCG64(seq_params)))
    z = np.random.Generator(np.random.PCG64(seq_z)).uniform(0.0, 0.1, size=(cfg.input_channels, h, w))
    z.setflags(write=False)
    return TrainState(net=net, params=params, m=np.zeros_like(params), v=np.zeros_like(params), z=z, seed=cfg.seed)


def forward(state: TrainState) -> np.ndarray:
    out, _, _ = state.net.forward(state.params, state.z)
    return out


def loss_and_grad(state: TrainState, task: TaskSpec, params: np.ndarray | None = None):
    """Return ``(x, loss, d loss / d params)`` at ``params`` (default: current)."""
    theta = state.params if params is None else params
    out, _, cache = state.net.forward(theta, state.z, keep_cache=True)
    loss, dout = energy_grad(out, task)
    return out, loss, state.net.backward(theta, out, cache, dout)


def backward_step(state: TrainState, task: TaskSpec, lr: float = 0.01):
    """One Adam step on the task energy.

    Updates ``state`` in place and returns ``(state, x_i, loss)`` where ``x_i``
    is the image produced *before* the update.
    """
    x, loss, g = loss_and_grad(state, task)
    if not np.isfinite(loss):
        raise DivergenceError(f"non-finite loss {loss} at step {state.step + 1}; learning rate {lr} may be too high")
    state.step += 1
    t = state.step
    state.m *= ADAM_BETA1
    state.m += (1.0 - ADAM_BETA1) * g
    state.v *= ADAM_BETA2
    state.v += (1.0 - ADAM_BETA2) * g * g
    m_hat = state.m / (1.0 - ADAM_BETA1**t)
    v_hat = state.v / (1.0 - ADAM_BETA2**t)
    state.params -= lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
    return state, x, loss


def save_checkpoint(state: TrainState, path: str | os.PathLike) -> None:
    """Write the parameter vector with a header: magic, version, layer shapes."""
    shapes = [s for _, s in state.net.shapes]
    header = bytearray(_CKPT_MAGIC)
    header += struct.pack("<HI", _CKPT_VERSION, len(shapes))
    for s in shapes:
        header += struct.pack("<B", len(s)) + struct.pack(f"<{len(s)}I", *s)
    with open(path, "wb") as fh:
        fh.write(bytes(header))
        fh.write(np.asarray(state.params, dtype="<f8").tobytes())


def load_checkpoint(path: str | os.PathLike, state: TrainState) -> None:
    """Load parameters saved by :func:`save_checkpoint` into ``state``."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if not raw.startswith(_CKPT_MAGIC):
        raise ValueError(f"{path}: not a checkpoint")
    offset = len(_CKPT_MAGIC)
    version, n = struct.unpack_from("<HI", raw, offset)
    if version != _CKPT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    offset += 6
    shapes = []
    for _ in range(n):
        (ndim,) = struct.unpack_from("<B", raw, offset)
        shapes.append(struct.unpack_from(f"<{ndim}I", raw, offset + 1))
        offset += 1 + 4 * ndim
    if shapes != [s for _, s in state.net.shapes]:
        raise ValueError(f"{path}: layer shapes do not match the network")
    state.params[:] = np.frombuffer(raw, dtype="<f8", count=state.net.size, offset=offset)
