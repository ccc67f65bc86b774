"""The reversible generator and its adversarial training loop.

The generator is two square dense layers: LeakyReLU after the first,
Sigmoid (or ClipSigmoid in counter-intuitive preprocessing mode) after the
second. With equal input/hidden/output dimensions and full-rank weights the
whole map from noise to normalized amounts is a bijection, so decoding is
literally running it backwards:

    forward:  x -> W1 x + b1 -> LeakyReLU -> W2 h + b2 -> act2 -> y -> amount
    inverse:  amount -> y -> logit -> W2^-1 (. - b2) -> LeakyReLU^-1
                     -> W1^-1 (. - b1) -> x

Biases are subtracted before the inverse matrices are applied; the
round-trip identity does not hold otherwise.

Training alternates one discriminator step and one generator step per
batch, plain SGD, and stops when the tracked loss has not reached a new
minimum for ``patience`` consecutive epochs or at the epoch cap. Given the
same seed, data, and config, the final parameters are bit-identical across
runs on one platform. A trained GeneratorModel is immutable; generate and
invert are pure and safe to call concurrently.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import NormalizationParams, denormalize
from .errors import (
    ActivationDomainError,
    FlatSegmentOutputError,
    InitError,
    ModelFormatError,
    NormalizationRangeError,
    ShapeError,
    SingularMatrixError,
    TrainingError,
)
from .nncore import (
    ClipSigmoid,
    ConvStack,
    DenseLayer,
    LeakyReLU,
    Rng,
    Sigmoid,
    activation_from_spec,
    activation_to_spec,
    array_to_hex,
    bce_grad,
    discriminator_loss,
    f64_to_hex,
    generator_loss,
    hex_to_array,
    hex_to_f64,
    invert_matrix,
    max_residual,
)

MODEL_FORMAT = "fieldsteg.generator"
MODEL_VERSION = 1
MAX_INIT_REDRAWS = 10


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for one training run.

    mode "rgan" filters nothing numerically but uses plain Sigmoid and a
    patience of 5; mode "ccrgan" uses ClipSigmoid, decays the learning rate
    by 0.9 every two epochs, and waits 10 epochs before giving up. theta
    may be the string "auto", which resolves to (min/max)^2 of the corpus.
    """

    mode: str = "ccrgan"
    dims: int = 64
    batch_size: int = 10
    lr: float = 1e-3
    lr_decay: float = 0.9
    lr_decay_every: int = 2
    patience: int | None = None
    max_epochs: int = 500
    seed: int = 0
    alpha: float = 0.3
    theta: float | str = 1e-20
    stop_metric: str = "generator"

    def __post_init__(self):
        if self.mode not in ("rgan", "ccrgan"):
            raise ValueError(f"mode must be 'rgan' or 'ccrgan', got {self.mode!r}")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.patience is not None and self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.stop_metric not in ("generator", "discriminator", "sum"):
            raise ValueError(f"unknown stop_metric {self.stop_metric!r}")

    @property
    def effective_patience(self) -> int:
        if self.patience is not None:
            return self.patience
        return 10 if self.mode == "ccrgan" else 5

    def resolve_theta(self, norm: NormalizationParams) -> float:
        if self.theta == "auto":
            return float((norm.min_x / norm.max_x) ** 2)
        return float(self.theta)


@dataclass
class TrainReport:
    """Per-epoch losses and the stop condition of one run."""

    generator_losses: list[float] = field(default_factory=list)
    discriminator_losses: list[float] = field(default_factory=list)
    learning_rates: list[float] = field(default_factory=list)
    stop_reason: str = ""
    epochs_run: int = 0
    final_residual: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "generator_losses": self.generator_losses,
            "discriminator_losses": self.discriminator_losses,
            "learning_rates": self.learning_rates,
            "stop_reason": self.stop_reason,
            "epochs_run": self.epochs_run,
            "final_residual": self.final_residual,
        }


@dataclass(frozen=True)
class InvertibilityReport:
    residual_w1: float
    residual_w2: float

    @property
    def max_residual(self) -> float:
        return max(self.residual_w1, self.residual_w2)


class GeneratorModel:
    """Frozen invertible generator plus its normalization parameters.

    Weight inverses are computed once at construction (raising
    SingularMatrixError if either layer is rank-deficient), after which the
    model is immutable and safe to share across threads.
    """

    def __init__(self, layer1: DenseLayer, act1: LeakyReLU, layer2: DenseLayer,
                 act2, norm: NormalizationParams, mode: str = "ccrgan"):
        if layer1.in_dim != layer1.out_dim or layer2.in_dim != layer2.out_dim:
            raise ShapeError("generator layers must be square")
        if layer1.out_dim != layer2.in_dim:
            raise ShapeError("hidden dimension mismatch between layers")
        if not isinstance(act2, (Sigmoid, ClipSigmoid)):
            raise ValueError("output activation must be Sigmoid or ClipSigmoid")
        self.layer1 = layer1
        self.act1 = act1
        self.layer2 = layer2
        self.act2 = act2
        self.norm = norm
        self.mode = mode
        self._w1_inv = invert_matrix(layer1.weights)
        self._w2_inv = invert_matrix(layer2.weights)

    @property
    def dims(self) -> int:
        return self.layer1.in_dim

    def generate(self, noise: np.ndarray) -> np.ndarray:
        """Map noise in [-1, 1] to decimal amounts (pre-rounding).

        Raises FlatSegmentOutputError if any output lands on the
        ClipSigmoid floor; such a vector has no preimage and the caller
        must resample its padding.
        """
        x = np.asarray(noise, dtype=np.float64)
        if x.shape[-1] != self.dims:
            raise ShapeError(f"noise length {x.shape[-1]} != dims {self.dims}")
        if np.any(np.abs(x) > 1.0):
            raise ValueError("noise entries must lie in [-1, 1]")
        h = self.act1.forward(self.layer1.forward(x))
        z2 = self.layer2.forward(h)
        y = self.act2.forward(z2)
        if isinstance(self.act2, ClipSigmoid) and np.any(y <= self.act2.theta):
            raise FlatSegmentOutputError(
                "generator output hit the clip floor; value is irreversible"
            )
        return denormalize(y, self.norm)

    def invert(self, amounts: np.ndarray) -> np.ndarray:
        """Recover the input noise from (typically rounded) amounts.

        Amounts must lie inside [min_x, max_x]; an amount equal to either
        end normalizes to exactly 0 or 1 where the logit is undefined, and
        in clip mode a normalized value at or below the floor is rejected
        as having no preimage.
        """
        a = np.asarray(amounts, dtype=np.float64)
        if a.shape[-1] != self.dims:
            raise ShapeError(f"amount vector length {a.shape[-1]} != dims {self.dims}")
        if np.any(a < self.norm.min_x) or np.any(a > self.norm.max_x):
            raise NormalizationRangeError(
                f"amount outside [{self.norm.min_x}, {self.norm.max_x}]"
            )
        span = self.norm.span
        num = a - self.norm.min_x
        complement = self.norm.max_x - a
        if np.any(num == 0.0) or np.any(complement == 0.0):
            raise ActivationDomainError(
                "normalized amount is exactly 0 or 1; logit undefined"
            )
        y = num / span
        if isinstance(self.act2, ClipSigmoid) and np.any(y <= self.act2.theta):
            raise FlatSegmentOutputError(
                "normalized amount at or below the clip floor; no preimage"
            )
        # both logs keep full relative precision at their own end of the range
        z2 = np.log(num / span) - np.log(complement / span)
        h = (z2 - self.layer2.biases) @ self._w2_inv.T
        z1 = self.act1.inverse(h)
        return (z1 - self.layer1.biases) @ self._w1_inv.T

    def check_invertible(self) -> InvertibilityReport:
        """Multiply-back residuals of both weight inverses, computed fresh."""
        r1 = max_residual(self.layer1.weights, invert_matrix(self.layer1.weights))
        r2 = max_residual(self.layer2.weights, invert_matrix(self.layer2.weights))
        return InvertibilityReport(r1, r2)


def check_invertible(model: GeneratorModel) -> InvertibilityReport:
    return model.check_invertible()


def _draw_generator_layers(dims: int, rng: Rng):
    """Fresh full-rank square layers, re-drawing at most MAX_INIT_REDRAWS times."""
    last_error = None
    for _ in range(MAX_INIT_REDRAWS):
        l1 = DenseLayer.init(dims, dims, rng)
        l2 = DenseLayer.init(dims, dims, rng)
        try:
            invert_matrix(l1.weights)
            invert_matrix(l2.weights)
            return l1, l2
        except SingularMatrixError as exc:
            last_error = exc
    raise InitError(f"no full-rank init after {MAX_INIT_REDRAWS} redraws: {last_error}")


def init_models(config: TrainConfig, norm: NormalizationParams,
                rng: Rng | None = None):
    """Seeded, deterministic (GeneratorModel, ConvStack) pair.

    Draw order is fixed (generator layer 1, layer 2, then the
    discriminator stack) so the same seed always yields the same bits.
    """
    rng = rng if rng is not None else Rng(config.seed)
    l1, l2 = _draw_generator_layers(config.dims, rng)
    act2 = ClipSigmoid(config.resolve_theta(norm)) if config.mode == "ccrgan" else Sigmoid()
    gen = GeneratorModel(l1, LeakyReLU(config.alpha), l2, act2, norm, mode=config.mode)
    disc = ConvStack.init(config.dims, rng)
    return gen, disc


class GeneratorNet:
    """Mutable generator used during training; frozen into a GeneratorModel
    when training finishes. Gradients come from the hand-written chain rule
    (output activation, dense, hidden activation, dense) and updates are
    plain SGD."""

    def __init__(self, l1: DenseLayer, act1: LeakyReLU, l2: DenseLayer, act2):
        self.l1, self.act1, self.l2, self.act2 = l1, act1, l2, act2

    def forward(self, x):
        z1 = self.l1.forward(x)
        h = self.act1.forward(z1)
        z2 = self.l2.forward(h)
        y = self.act2.forward(z2)
        return y, (x, z1, h, z2, y)

    def backward(self, dy, cache):
        """Parameter gradients (dw1, db1, dw2, db2) for upstream dJ/dy."""
        x, z1, h, z2, y = cache
        dz2 = dy * self.act2.grad(z2, y)
        dh, dw2, db2 = self.l2.backward(h, dz2)
        dz1 = dh * self.act1.grad(z1, None)
        _, dw1, db1 = self.l1.backward(x, dz1)
        return dw1, db1, dw2, db2

    def apply_grads(self, grads, lr):
        dw1, db1, dw2, db2 = grads
        self.l1.weights -= lr * dw1
        self.l1.biases -= lr * db1
        self.l2.weights -= lr * dw2
        self.l2.biases -= lr * db2

    def backward_update(self, dy, cache, lr):
        self.apply_grads(self.backward(dy, cache), lr)

    def parameters(self):
        return [self.l1.weights, self.l1.biases, self.l2.weights, self.l2.biases]

    def finite(self) -> bool:
        return self.l1.finite() and self.l2.finite()


def train(config: TrainConfig, batches: np.ndarray, norm: NormalizationParams,
          rng: Rng | None = None):
    """Adversarial training on pre-grouped normalized vectors.

    ``batches`` is the (n_vectors, dims) array from dataset.group_batches.
    Per batch: one discriminator step on real and fake halves, then one
    generator step on fresh noise. Returns (GeneratorModel, TrainReport).
    """
    vectors = np.asarray(batches, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[1] != config.dims:
        raise ShapeError(f"expected (n, {config.dims}) batches, got {vectors.shape}")
    rng = rng if rng is not None else Rng(config.seed)

    l1, l2 = _draw_generator_layers(config.dims, rng)
    act2 = ClipSigmoid(config.resolve_theta(norm)) if config.mode == "ccrgan" else Sigmoid()
    gen = GeneratorNet(l1, LeakyReLU(config.alpha), l2, act2)
    disc = ConvStack.init(config.dims, rng)

    n_batches = vectors.shape[0] // config.batch_size
    if n_batches == 0:
        raise TrainingError(
            f"need at least {config.batch_size} vectors, got {vectors.shape[0]}"
        )

    report = TrainReport()
    best = np.inf
    stale = 0
    stop_reason = "cap"
    for epoch in range(config.max_epochs):
        if config.mode == "ccrgan":
            lr = config.lr * config.lr_decay ** (epoch // config.lr_decay_every)
        else:
            lr = config.lr
        gen_losses = []
        disc_losses = []
        for b in range(n_batches):
            real = vectors[b * config.batch_size:(b + 1) * config.batch_size]

            # discriminator step: fakes are constants here
            z = rng.uniform(-1.0, 1.0, size=(config.batch_size, config.dims))
            fake, _ = gen.forward(z)
            scores_real, cache_real = disc.forward(real)
            scores_fake, cache_fake = disc.forward(fake)
            disc_losses.append(discriminator_loss(scores_real, scores_fake))
            _, grads_real = disc.backward(
                0.5 * bce_grad(scores_real, np.ones_like(scores_real)), cache_real)
            _, grads_fake = disc.backward(
                0.5 * bce_grad(scores_fake, np.zeros_like(scores_fake)), cache_fake)
            disc.apply_grads(grads_real, lr)
            disc.apply_grads(grads_fake, lr)

            # generator step: push fresh fakes toward the real label
            z = rng.uniform(-1.0, 1.0, size=(config.batch_size, config.dims))
            fake, gen_cache = gen.forward(z)
            scores, cache = disc.forward(fake)
            gen_losses.append(generator_loss(scores))
            dfake, _ = disc.backward(
                bce_grad(scores, np.ones_like(scores)), cache)
            gen.backward_update(dfake, gen_cache, lr)

        g_loss = float(np.mean(gen_losses))
        d_loss = float(np.mean(disc_losses))
        report.generator_losses.append(g_loss)
        report.discriminator_losses.append(d_loss)
        report.learning_rates.append(lr)
        report.epochs_run = epoch + 1

        if not (np.isfinite(g_loss) and np.isfinite(d_loss)):
            report.stop_reason = "non-finite loss"
            raise TrainingError(f"non-finite loss at epoch {epoch}", report=report)
        if not (gen.finite() and disc.finite()):
            report.stop_reason = "non-finite parameters"
            raise TrainingError(f"non-finite parameters at epoch {epoch}", report=report)

        tracked = {"generator": g_loss, "discriminator": d_loss,
                   "sum": g_loss + d_loss}[config.stop_metric]
        if tracked < best:
            best = tracked
            stale = 0
        else:
            stale += 1
            if stale >= config.effective_patience:
                stop_reason = "patience"
                break

    report.stop_reason = stop_reason
    try:
        model = GeneratorModel(gen.l1, gen.act1, gen.l2, gen.act2, norm,
                               mode=config.mode)
    except SingularMatrixError as exc:
        report.stop_reason = "singular"
        raise TrainingError(f"trained generator is singular: {exc}", report=report)
    report.final_residual = model.check_invertible().max_residual
    return model, report


def save_model(model: GeneratorModel, path) -> None:
    """Versioned JSON with every float64 as a 16-hex-digit bit pattern.

    Field order: format, version, mode, dims, act1, act2, w1, b1, w2, b2,
    norm. Weight arrays are row-major.
    """
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "mode": model.mode,
        "dims": model.dims,
        "act1": {"kind": model.act1.name, "alpha": f64_to_hex(model.act1.alpha)},
        "act2": _act2_spec(model.act2),
        "w1": array_to_hex(model.layer1.weights),
        "b1": array_to_hex(model.layer1.biases),
        "w2": array_to_hex(model.layer2.weights),
        "b2": array_to_hex(model.layer2.biases),
        "norm": {
            "min_x": f64_to_hex(model.norm.min_x),
            "max_x": f64_to_hex(model.norm.max_x),
            "group_width": model.norm.group_width,
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def _act2_spec(act2) -> dict:
    spec = activation_to_spec(act2)
    if "theta" in spec:
        spec["theta"] = f64_to_hex(spec["theta"])
    return spec


def load_model(path) -> GeneratorModel:
    """Bit-exact inverse of save_model; raises ModelFormatError on damage."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"corrupt model file {path}: {exc}")
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ModelFormatError(f"{path} is not a {MODEL_FORMAT} file")
    if doc.get("version") != MODEL_VERSION:
        raise ModelFormatError(
            f"unsupported model version {doc.get('version')!r}, "
            f"expected {MODEL_VERSION}"
        )
    try:
        dims = int(doc["dims"])
        l1 = DenseLayer(hex_to_array(doc["w1"], (dims, dims)),
                        hex_to_array(doc["b1"], (dims,)))
        l2 = DenseLayer(hex_to_array(doc["w2"], (dims, dims)),
                        hex_to_array(doc["b2"], (dims,)))
        act1 = LeakyReLU(hex_to_f64(doc["act1"]["alpha"]))
        act2_spec = dict(doc["act2"])
        if "theta" in act2_spec:
            act2_spec["theta"] = hex_to_f64(act2_spec["theta"])
        act2 = activation_from_spec(act2_spec)
        norm = NormalizationParams(
            hex_to_f64(doc["norm"]["min_x"]),
            hex_to_f64(doc["norm"]["max_x"]),
            int(doc["norm"]["group_width"]),
        )
        mode = doc.get("mode", "ccrgan")
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model file {path}: {exc}")
    return GeneratorModel(l1, act1, l2, act2, norm, mode=mode)


def clone_config(config: TrainConfig, **overrides) -> TrainConfig:
    return replace(config, **overrides)
