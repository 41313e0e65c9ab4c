"""Loss-function streams with gradient / Hessian-vector-product oracles.

Each stream yields one LossOracle per step, deterministically from
(seed, step), so a run can be replayed bit-identically — the perturbation
oracles in `verify` depend on this common-random-numbers property.
Nonstationarity comes in two flavours: quadratic streams whose hidden optimum
jumps every `switch_period` steps, and an MLP classification stream whose
label permutation switches. The MLP uses tanh (a smooth activation is
mandatory for the finite-difference gradient checks; ReLU kinks would break
them at desk scale).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .blocks import as_vector, derive_rng
from .errors import CapabilityError, ConfigError, NumericError

NOISY_QUADRATIC = "noisy_quadratic"
DRIFTING_QUADRATIC = "drifting_quadratic"
IDBD_FEATURES = "idbd_features"
MLP_CLASSIFICATION = "mlp_classification"

_KINDS = (NOISY_QUADRATIC, DRIFTING_QUADRATIC, IDBD_FEATURES, MLP_CLASSIFICATION)

# rng sub-stream tags
_TAG_SHAPE, _TAG_SAMPLE, _TAG_TARGET, _TAG_INIT = 0, 1, 2, 3

MLP_HVP_EPS = 1e-5


class LossOracle:
    """One timestep's loss: value, gradient, and optional second-order access."""

    def __init__(self, value, grad, hvp=None, hessian=None, hessian_diag=None):
        self._value = value
        self._grad = grad
        self._hvp = hvp
        self._hessian = hessian
        self._hessian_diag = hessian_diag

    def value(self, w) -> float:
        return float(self._value(as_vector(w)))

    def grad(self, w) -> np.ndarray:
        return self._grad(as_vector(w))

    @property
    def has_hvp(self) -> bool:
        return self._hvp is not None

    @property
    def has_hessian(self) -> bool:
        return self._hessian is not None

    def hvp(self, w, v) -> np.ndarray:
        if self._hvp is None:
            raise CapabilityError("oracle does not provide Hessian-vector products")
        return self._hvp(as_vector(w), as_vector(v))

    def hessian(self, w) -> np.ndarray:
        if self._hessian is None:
            raise CapabilityError("oracle does not provide a dense Hessian")
        return self._hessian(as_vector(w))

    def hessian_diag(self, w) -> np.ndarray:
        if self._hessian_diag is not None:
            return self._hessian_diag(as_vector(w))
        if self._hessian is not None:
            return np.diag(self._hessian(as_vector(w))).copy()
        raise CapabilityError("oracle does not provide a Hessian diagonal")


@dataclass(frozen=True)
class StreamConfig:
    kind: str
    dimension: int
    noise: float = 0.0
    switch_period: int = 0  # 0 = stationary
    seed: int = 0
    # mlp_classification only; `dimension` is the input dimension there
    hidden: int = 8
    classes: int = 2
    batch_size: int = 1

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown stream kind {self.kind!r}")
        if self.dimension < 1:
            raise ConfigError("dimension must be >= 1")
        if self.switch_period < 0:
            raise ConfigError("switch_period must be >= 0")
        if self.noise < 0:
            raise ConfigError("noise must be >= 0")
        if self.kind == MLP_CLASSIFICATION and (self.hidden < 1 or self.classes < 2 or self.batch_size < 1):
            raise ConfigError("mlp stream needs hidden >= 1, classes >= 2, batch_size >= 1")


def make_stream(config: StreamConfig, seed: int | None = None):
    """Build the stream for a config; `seed` overrides config.seed when given."""
    if seed is not None:
        config = StreamConfig(**{**config.__dict__, "seed": int(seed)})
    cls = {
        NOISY_QUADRATIC: NoisyQuadraticStream,
        DRIFTING_QUADRATIC: DriftingQuadraticStream,
        IDBD_FEATURES: IdbdFeaturesStream,
        MLP_CLASSIFICATION: MlpClassificationStream,
    }[config.kind]
    return cls(config)


class _StreamBase:
    def __init__(self, config: StreamConfig):
        self.config = config

    @property
    def dim(self) -> int:
        """Length of the weight vector the stream's losses act on."""
        return self.config.dimension

    def epoch(self, t: int) -> int:
        p = self.config.switch_period
        return 0 if p == 0 else t // p

    def is_switch(self, t: int) -> bool:
        p = self.config.switch_period
        return p > 0 and t > 0 and t % p == 0

    def next_loss(self, t: int) -> LossOracle:
        raise NotImplementedError

    def initial_weights(self) -> np.ndarray:
        raise NotImplementedError


def _quadratic_oracle(A: np.ndarray, c: np.ndarray) -> LossOracle:
    # f(w) = 0.5 (w-c)^T A (w-c); constant Hessian, exact everything
    def value(w):
        d = w - c
        return 0.5 * d @ (A @ d)

    return LossOracle(
        value=value,
        grad=lambda w: A @ (w - c),
        hvp=lambda w, v: A @ v,
        hessian=lambda w: A,
        hessian_diag=lambda w: np.diag(A).copy(),
    )


class NoisyQuadraticStream(_StreamBase):
    """Stationary quadratic with a fixed hidden optimum and per-step noisy center."""

    def __init__(self, config: StreamConfig):
        super().__init__(config)
        n = config.dimension
        rng = derive_rng(config.seed, _TAG_SHAPE)
        M = rng.normal(size=(n, n))
        self.A = M @ M.T / n + 0.5 * np.eye(n)
        self.w_star = rng.normal(size=n)

    def hidden_target(self, t: int) -> np.ndarray:
        return self.w_star

    def next_loss(self, t: int) -> LossOracle:
        c = self.w_star
        if self.config.noise > 0:
            c = c + self.config.noise * derive_rng(self.config.seed, _TAG_SAMPLE, t).normal(size=c.size)
        return _quadratic_oracle(self.A, c)

    def initial_weights(self) -> np.ndarray:
        return derive_rng(self.config.seed, _TAG_INIT).normal(size=self.dim)


class DriftingQuadraticStream(NoisyQuadraticStream):
    """Quadratic whose hidden optimum jumps at every multiple of switch_period."""

    def hidden_target(self, t: int) -> np.ndarray:
        if self.config.switch_period == 0:
            return self.w_star
        return derive_rng(self.config.seed, _TAG_TARGET, self.epoch(t)).normal(size=self.dim)

    def next_loss(self, t: int) -> LossOracle:
        c = self.hidden_target(t)
        if self.config.noise > 0:
            c = c + self.config.noise * derive_rng(self.config.seed, _TAG_SAMPLE, t).normal(size=c.size)
        return _quadratic_oracle(self.A, c)


class IdbdFeaturesStream(_StreamBase):
    """Scalar-target regression losses f_t(w) = 0.5 (a_t . w - b_t)^2.

    Half of the hidden weights are relevant (+-1), the rest are zero; with a
    switch period the relevant signs are redrawn each epoch.
    """

    def __init__(self, config: StreamConfig):
        super().__init__(config)
        self._base_target = self._draw_target(derive_rng(config.seed, _TAG_SHAPE))

    def _draw_target(self, rng) -> np.ndarray:
        n = self.dim
        w = np.zeros(n)
        n_rel = max(1, n // 2)
        w[:n_rel] = rng.choice([-1.0, 1.0], size=n_rel)
        return w

    def hidden_target(self, t: int) -> np.ndarray:
        if self.config.switch_period == 0 or self.epoch(t) == 0:
            return self._base_target
        return self._draw_target(derive_rng(self.config.seed, _TAG_TARGET, self.epoch(t)))

    def features(self, t: int) -> tuple[np.ndarray, float]:
        rng = derive_rng(self.config.seed, _TAG_SAMPLE, t)
        a = rng.normal(size=self.dim)
        b = float(a @ self.hidden_target(t))
        if self.config.noise > 0:
            b += self.config.noise * rng.normal()
        return a, b

    def next_loss(self, t: int) -> LossOracle:
        a, b = self.features(t)

        def value(w):
            r = a @ w - b
            return 0.5 * r * r

        return LossOracle(
            value=value,
            grad=lambda w: (a @ w - b) * a,
            hvp=lambda w, v: (a @ v) * a,
            hessian=lambda w: np.outer(a, a),
            hessian_diag=lambda w: a * a,
        )

    def initial_weights(self) -> np.ndarray:
        return np.zeros(self.dim)


@dataclass(frozen=True)
class MlpShape:
    """Fixed two-layer fully-connected net: tanh hidden layer, softmax output."""

    d_in: int
    hidden: int
    classes: int

    @property
    def param_dim(self) -> int:
        return self.hidden * self.d_in + self.hidden + self.classes * self.hidden + self.classes

    def unpack(self, w: np.ndarray):
        h, d, c = self.hidden, self.d_in, self.classes
        i = 0
        W1 = w[i:i + h * d].reshape(h, d); i += h * d
        b1 = w[i:i + h]; i += h
        W2 = w[i:i + c * h].reshape(c, h); i += c * h
        b2 = w[i:i + c]
        return W1, b1, W2, b2


def _softmax_ce(logits: np.ndarray, y: np.ndarray):
    z = logits - logits.max(axis=1, keepdims=True)
    ez = np.exp(z)
    probs = ez / ez.sum(axis=1, keepdims=True)
    nll = -np.log(probs[np.arange(y.size), y] + 1e-300)
    return float(nll.mean()), probs


def mlp_loss(shape: MlpShape, X: np.ndarray, y: np.ndarray) -> LossOracle:
    """Mean softmax cross-entropy of the 2-layer net on one minibatch.

    value/grad are exact via backpropagation; hvp is a central finite
    difference of the gradient with step eps*(1+|v|_inf), eps=1e-5 — exactness
    is only needed on the quadratic streams.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[1] != shape.d_in or X.shape[0] != y.size:
        raise ConfigError("minibatch does not match the network shape")

    def forward(w):
        W1, b1, W2, b2 = shape.unpack(as_vector(w, shape.param_dim))
        a1 = np.tanh(X @ W1.T + b1)
        logits = a1 @ W2.T + b2
        if not np.isfinite(logits).all():
            raise NumericError("non-finite activations in the MLP forward pass")
        return a1, logits

    def value(w):
        _, logits = forward(w)
        loss, _ = _softmax_ce(logits, y)
        return loss

    def grad(w):
        W1, b1, W2, b2 = shape.unpack(as_vector(w, shape.param_dim))
        a1, logits = forward(w)
        _, probs = _softmax_ce(logits, y)
        B = y.size
        dlogits = probs.copy()
        dlogits[np.arange(B), y] -= 1.0
        dlogits /= B
        dW2 = dlogits.T @ a1
        db2 = dlogits.sum(axis=0)
        da1 = dlogits @ W2
        dz1 = da1 * (1.0 - a1 * a1)
        dW1 = dz1.T @ X
        db1 = dz1.sum(axis=0)
        return np.concatenate([dW1.ravel(), db1, dW2.ravel(), db2])

    def hvp(w, v):
        s = MLP_HVP_EPS * (1.0 + np.abs(v).max(initial=0.0))
        return (grad(w + s * v) - grad(w - s * v)) / (2.0 * s)

    return LossOracle(value=value, grad=grad, hvp=hvp)


class MlpClassificationStream(_StreamBase):
    """Gaussian-cluster classification through the 2-layer net.

    `dimension` is the input dimension; the engine-facing weight dimension is
    shape.param_dim. Nonstationarity is a label permutation redrawn each epoch.
    """

    def __init__(self, config: StreamConfig):
        super().__init__(config)
        self.shape = MlpShape(config.dimension, config.hidden, config.classes)
        rng = derive_rng(config.seed, _TAG_SHAPE)
        # well-separated class means, O(1) coordinates
        self.means = rng.normal(size=(config.classes, config.dimension))
        self.means *= 2.0 / np.sqrt(config.dimension)

    @property
    def dim(self) -> int:
        return self.shape.param_dim

    def label_permutation(self, t: int) -> np.ndarray:
        k = self.epoch(t)
        if k == 0:
            return np.arange(self.config.classes)
        return derive_rng(self.config.seed, _TAG_TARGET, k).permutation(self.config.classes)

    def minibatch(self, t: int):
        rng = derive_rng(self.config.seed, _TAG_SAMPLE, t)
        B = self.config.batch_size
        y_raw = rng.integers(0, self.config.classes, size=B)
        X = self.means[y_raw] + self.config.noise * rng.normal(size=(B, self.config.dimension))
        y = self.label_permutation(t)[y_raw]
        return X, y

    def next_loss(self, t: int) -> LossOracle:
        X, y = self.minibatch(t)
        return mlp_loss(self.shape, X, y)

    def initial_weights(self) -> np.ndarray:
        rng = derive_rng(self.config.seed, _TAG_INIT)
        s = self.shape
        W1 = rng.normal(size=(s.hidden, s.d_in)) / np.sqrt(s.d_in)
        b1 = np.zeros(s.hidden)
        W2 = rng.normal(size=(s.classes, s.hidden)) / np.sqrt(s.hidden)
        b2 = np.zeros(s.classes)
        return np.concatenate([W1.ravel(), b1, W2.ravel(), b2])
