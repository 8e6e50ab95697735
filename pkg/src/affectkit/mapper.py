"""Desk-scale affect-semantic mapper: forward pass, exact reverse-mode
gradients, a decoupled-weight-decay adaptive optimizer with linear warmup,
and a deterministic training loop.

Architecture: a GELU-activated MLP trunk shared by three heads.  The local
and global heads emit flat vectors reshaped into N tokens of width d_L and
d_G respectively; a small affect read-out head predicts (valence, arousal)
through tanh, so predictions always land in [-1, 1]^2.

The reconstruction term of the composite objective belongs to an external
generator and is out of scope here; the loop accepts an externally
supplied gradient with respect to the emitted tokens per sample, and
contributes nothing for that term when none is given.  Everything that is
computed in-engine (affect consistency and semantic grounding) is
differentiated analytically and checked against central finite
differences.

All math is float64.  GELU uses the exact error-function form, not the
tanh approximation, so activations are reproducible across
implementations to ~1e-16.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import erf

from .core import VaPoint
from .errors import ConfigError, NumericError, ShapeMismatchError
from .grounding import attribute_weights, grounding_loss_and_grad
from .ingest import AffectDatabase, GaussianTable

SQRT2 = math.sqrt(2.0)
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def gelu(x: np.ndarray) -> np.ndarray:
    """Exact GELU: x * Phi(x) with the Gaussian CDF via erf."""
    x = np.asarray(x, dtype=np.float64)
    return 0.5 * x * (1.0 + erf(x / SQRT2))


def gelu_grad(x: np.ndarray) -> np.ndarray:
    """d/dx GELU = Phi(x) + x * phi(x)."""
    x = np.asarray(x, dtype=np.float64)
    cdf = 0.5 * (1.0 + erf(x / SQRT2))
    pdf = INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return cdf + x * pdf


@dataclass(frozen=True)
class MapperConfig:
    """Hyperparameters of the mapper and its training loop.

    Defaults follow the ablation optima: 4 output tokens, loss weights
    alpha 0.1 / beta 0.5, lr 3e-5 with 300-step warmup, weight decay 1e-2.
    The global token width is configurable (default 1280) and never baked
    into file formats.
    """

    input_dim: int = 768
    token_count: int = 4
    local_dim: int = 768
    global_dim: int = 1280
    hidden_dims: tuple[int, ...] = (1024, 1024)
    alpha: float = 0.1
    beta: float = 0.5
    learning_rate: float = 3e-5
    weight_decay: float = 1e-2
    warmup_steps: int = 300
    seed: int = 0
    train_steps: int = 2000
    batch_size: int = 1
    logit_scale: float = 10.0
    pooling: str = "mean"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        for name in ("input_dim", "token_count", "local_dim", "global_dim",
                     "warmup_steps", "train_steps", "batch_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if any(h < 1 for h in self.hidden_dims) or not self.hidden_dims:
            raise ConfigError("hidden_dims must be a nonempty tuple of positive ints")
        if self.alpha < 0.0 or self.beta < 0.0:
            raise ConfigError("alpha and beta must be nonnegative")
        if self.learning_rate <= 0.0 or self.weight_decay < 0.0:
            raise ConfigError("learning_rate must be > 0 and weight_decay >= 0")


class MapperParams:
    """All weight matrices and bias vectors, in declared layer order.

    Order: trunk layers (weight, bias each), then the local, global, and
    affect heads.  The order is the serialization contract for
    checkpoints and the alignment contract for optimizer state.
    """

    def __init__(self, trunk, local, global_head, affect):
        self.trunk = [(np.asarray(w, dtype=np.float64), np.asarray(b, dtype=np.float64))
                      for w, b in trunk]
        self.local = tuple(np.asarray(a, dtype=np.float64) for a in local)
        self.global_head = tuple(np.asarray(a, dtype=np.float64) for a in global_head)
        self.affect = tuple(np.asarray(a, dtype=np.float64) for a in affect)

    def named(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for i, (w, b) in enumerate(self.trunk):
            out.append((f"trunk.{i}.weight", w))
            out.append((f"trunk.{i}.bias", b))
        out.append(("local.weight", self.local[0]))
        out.append(("local.bias", self.local[1]))
        out.append(("global.weight", self.global_head[0]))
        out.append(("global.bias", self.global_head[1]))
        out.append(("affect.weight", self.affect[0]))
        out.append(("affect.bias", self.affect[1]))
        return out

    def arrays(self) -> list[np.ndarray]:
        return [a for _, a in self.named()]

    def size(self) -> int:
        return sum(a.size for a in self.arrays())

    def copy(self) -> "MapperParams":
        return MapperParams([(w.copy(), b.copy()) for w, b in self.trunk],
                            tuple(a.copy() for a in self.local),
                            tuple(a.copy() for a in self.global_head),
                            tuple(a.copy() for a in self.affect))

    def flatten(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def load_flat(self, theta: np.ndarray) -> None:
        pos = 0
        for a in self.arrays():
            a[...] = theta[pos:pos + a.size].reshape(a.shape)
            pos += a.size
        if pos != theta.size:
            raise ShapeMismatchError("flat vector size does not match parameter count")

    def quantize_float32(self) -> None:
        """Round every entry to its nearest float32 value (in place).

        Checkpoints store float32 blocks; quantizing once makes the
        in-memory parameters, the file, and any reload agree bit-exactly.
        """
        for a in self.arrays():
            a[...] = a.astype(np.float32).astype(np.float64)

    def zeros_like(self) -> "MapperParams":
        return MapperParams([(np.zeros_like(w), np.zeros_like(b)) for w, b in self.trunk],
                            tuple(np.zeros_like(a) for a in self.local),
                            tuple(np.zeros_like(a) for a in self.global_head),
                            tuple(np.zeros_like(a) for a in self.affect))


def _uniform_fan_in(rng: np.random.Generator, out_dim: int, in_dim: int):
    bound = 1.0 / math.sqrt(in_dim)
    w = rng.uniform(-bound, bound, size=(out_dim, in_dim))
    b = rng.uniform(-bound, bound, size=(out_dim,))
    return w, b


def init_params(config: MapperConfig) -> MapperParams:
    """Fan-in-scaled uniform initialization, fully determined by config.seed."""
    rng = np.random.default_rng(config.seed)
    trunk = []
    prev = config.input_dim
    for h in config.hidden_dims:
        trunk.append(_uniform_fan_in(rng, h, prev))
        prev = h
    local = _uniform_fan_in(rng, config.token_count * config.local_dim, prev)
    global_head = _uniform_fan_in(rng, config.token_count * config.global_dim, prev)
    affect = _uniform_fan_in(rng, 2, prev)
    return MapperParams(trunk, local, global_head, affect)


# ---------------------------------------------------------------------------
# Forward / losses
# ---------------------------------------------------------------------------

def _forward_cache(f_emo: np.ndarray, params: MapperParams, config: MapperConfig):
    a = f_emo
    zs, acts = [], [a]
    for w, b in params.trunk:
        z = w @ a + b
        a = gelu(z)
        zs.append(z)
        acts.append(a)
    h = a
    out_local = params.local[0] @ h + params.local[1]
    out_global = params.global_head[0] @ h + params.global_head[1]
    va_raw = params.affect[0] @ h + params.affect[1]
    va_hat = np.tanh(va_raw)
    s_local = out_local.reshape(config.token_count, config.local_dim)
    s_global = out_global.reshape(config.token_count, config.global_dim)
    return {"zs": zs, "acts": acts, "h": h, "s_local": s_local,
            "s_global": s_global, "va_raw": va_raw, "va_hat": va_hat}


def mapper_forward(f_emo, params: MapperParams, config: MapperConfig):
    """Map one affect feature to (local tokens, global tokens, predicted VA)."""
    f = np.asarray(f_emo, dtype=np.float64)
    if f.shape != (config.input_dim,):
        raise ShapeMismatchError(
            f"affect feature must have shape ({config.input_dim},), got {f.shape}")
    if not np.all(np.isfinite(f)):
        raise NumericError("affect feature contains non-finite entries")
    cache = _forward_cache(f, params, config)
    if not (np.all(np.isfinite(cache["s_local"])) and np.all(np.isfinite(cache["s_global"]))
            and np.all(np.isfinite(cache["va_hat"]))):
        raise NumericError("forward pass produced non-finite activations")
    va = VaPoint(float(cache["va_hat"][0]), float(cache["va_hat"][1]))
    return cache["s_local"], cache["s_global"], va


def affect_loss(va_hat: VaPoint, va_gt: VaPoint) -> float:
    """Squared Euclidean distance between predicted and ground-truth VA."""
    dv = va_hat.valence - va_gt.valence
    da = va_hat.arousal - va_gt.arousal
    return dv * dv + da * da


def total_loss(l_rec: float, l_aff: float, l_sg: float,
               alpha: float, beta: float) -> float:
    """Composite objective: reconstruction + alpha * affect + beta * grounding."""
    return l_rec + alpha * l_aff + beta * l_sg


# ---------------------------------------------------------------------------
# Training samples and reverse mode
# ---------------------------------------------------------------------------

@dataclass
class MapperSample:
    """One training example.

    Grounding supervision (attribute embeddings, labels, weights) is
    optional; so are externally supplied reconstruction gradients with
    respect to the emitted token matrices.
    """

    affect_feature: np.ndarray
    va: VaPoint
    attr_embeddings: np.ndarray | None = None   # (K, global_dim)
    multi_hot: np.ndarray | None = None         # (K,)
    weights: np.ndarray | None = None           # (K,)
    rec_grad_local: np.ndarray | None = None    # (N, local_dim)
    rec_grad_global: np.ndarray | None = None   # (N, global_dim)


def _sample_losses_and_head_grads(sample, cache, config):
    """Per-sample loss terms plus gradients w.r.t. the three head outputs."""
    va_hat = cache["va_hat"]
    gt = np.array([sample.va.valence, sample.va.arousal])
    diff = va_hat - gt
    l_aff = float(diff @ diff)
    d_va_raw = config.alpha * 2.0 * diff * (1.0 - va_hat * va_hat)

    l_sg = 0.0
    d_global = np.zeros_like(cache["s_global"])
    if sample.attr_embeddings is not None:
        l_sg, g = grounding_loss_and_grad(
            cache["s_global"], sample.attr_embeddings, sample.multi_hot,
            sample.weights, config.logit_scale, config.pooling)
        d_global = config.beta * g
    if sample.rec_grad_global is not None:
        d_global = d_global + np.asarray(sample.rec_grad_global, dtype=np.float64)

    d_local = np.zeros_like(cache["s_local"])
    if sample.rec_grad_local is not None:
        d_local = d_local + np.asarray(sample.rec_grad_local, dtype=np.float64)
    return l_aff, l_sg, d_va_raw, d_local, d_global


def backward(batch, params: MapperParams, config: MapperConfig):
    """Average gradient of alpha*L_aff + beta*L_sg over a batch.

    Externally supplied reconstruction gradients (dL_rec/ds per sample)
    are chained in when present.  Returns (grads, l_aff_mean, l_sg_mean)
    with grads shaped exactly like params.
    """
    if not batch:
        raise ConfigError("backward needs a nonempty batch")
    grads = params.zeros_like()
    l_aff_sum = 0.0
    l_sg_sum = 0.0
    for sample in batch:
        f = np.asarray(sample.affect_feature, dtype=np.float64)
        cache = _forward_cache(f, params, config)
        l_aff, l_sg, d_va_raw, d_local, d_global = \
            _sample_losses_and_head_grads(sample, cache, config)
        l_aff_sum += l_aff
        l_sg_sum += l_sg

        h = cache["h"]
        d_out_local = d_local.ravel()
        d_out_global = d_global.ravel()

        grads.local[0][...] += np.outer(d_out_local, h)
        grads.local[1][...] += d_out_local
        grads.global_head[0][...] += np.outer(d_out_global, h)
        grads.global_head[1][...] += d_out_global
        grads.affect[0][...] += np.outer(d_va_raw, h)
        grads.affect[1][...] += d_va_raw

        dh = (params.local[0].T @ d_out_local
              + params.global_head[0].T @ d_out_global
              + params.affect[0].T @ d_va_raw)
        for i in range(len(params.trunk) - 1, -1, -1):
            w, _ = params.trunk[i]
            dz = dh * gelu_grad(cache["zs"][i])
            grads.trunk[i][0][...] += np.outer(dz, cache["acts"][i])
            grads.trunk[i][1][...] += dz
            dh = w.T @ dz

    n = float(len(batch))
    for a in grads.arrays():
        a /= n
    return grads, l_aff_sum / n, l_sg_sum / n


def batch_objective(batch, params: MapperParams, config: MapperConfig) -> float:
    """The scalar the in-engine gradients differentiate: alpha*L_aff + beta*L_sg, batch mean."""
    l_aff, l_sg = 0.0, 0.0
    for sample in batch:
        f = np.asarray(sample.affect_feature, dtype=np.float64)
        cache = _forward_cache(f, params, config)
        gt = np.array([sample.va.valence, sample.va.arousal])
        diff = cache["va_hat"] - gt
        l_aff += float(diff @ diff)
        if sample.attr_embeddings is not None:
            l, _ = grounding_loss_and_grad(
                cache["s_global"], sample.attr_embeddings, sample.multi_hot,
                sample.weights, config.logit_scale, config.pooling)
            l_sg += l
    n = len(batch)
    return config.alpha * l_aff / n + config.beta * l_sg / n


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------

class AdamWState:
    """First/second moment accumulators aligned with MapperParams order."""

    def __init__(self, params: MapperParams):
        self.m = [np.zeros_like(a) for a in params.arrays()]
        self.v = [np.zeros_like(a) for a in params.arrays()]


def warmup_lr(step_index: int, config: MapperConfig) -> float:
    """Linear warmup: lr * min(1, (step+1)/warmup_steps); constant afterwards."""
    return config.learning_rate * min(1.0, (step_index + 1) / config.warmup_steps)


def optimizer_step(params: MapperParams, grads: MapperParams, state: AdamWState,
                   step_index: int, config: MapperConfig) -> MapperParams:
    """One decoupled-weight-decay adaptive-moment update (in place).

    param <- param - lr_t * m_hat / (sqrt(v_hat) + eps) - lr_t * wd * param
    with bias-corrected moments and the warmup-scheduled lr_t.
    """
    lr_t = warmup_lr(step_index, config)
    t = step_index + 1
    b1, b2, eps = config.adam_beta1, config.adam_beta2, config.adam_eps
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for p, g, m, v in zip(params.arrays(), grads.arrays(), state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / c1
        v_hat = v / c2
        p -= lr_t * (m_hat / (np.sqrt(v_hat) + eps)) + lr_t * config.weight_decay * p
    return params


# ---------------------------------------------------------------------------
# Gradient check
# ---------------------------------------------------------------------------

def gradient_check(params: MapperParams, batch, config: MapperConfig,
                   h: float = 1e-5) -> float:
    """Max relative error of backward against central finite differences.

    relative error = |ga - gf| / max(|ga|, |gf|, 1e-12), over every
    parameter entry.  Restricted to small instances to stay tractable.
    """
    if params.size() > 10_000:
        raise ConfigError(f"gradient_check is for tiny instances (<= 1e4 params), "
                          f"got {params.size()}")
    grads, _, _ = backward(batch, params, config)
    g_analytic = grads.flatten()
    theta = params.flatten()
    probe = params.copy()
    g_fd = np.empty_like(theta)
    for i in range(theta.size):
        orig = theta[i]
        theta[i] = orig + h
        probe.load_flat(theta)
        lp = batch_objective(batch, probe, config)
        theta[i] = orig - h
        probe.load_flat(theta)
        lm = batch_objective(batch, probe, config)
        theta[i] = orig
        g_fd[i] = (lp - lm) / (2.0 * h)
    probe.load_flat(theta)
    denom = np.maximum(np.maximum(np.abs(g_analytic), np.abs(g_fd)), 1e-12)
    return float(np.max(np.abs(g_analytic - g_fd) / denom))


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StepRecord:
    step: int
    l_aff: float
    l_sg: float
    l_total: float
    learning_rate: float
    gradient_norm: float


@dataclass
class TrainingHistory:
    steps: list[StepRecord] = field(default_factory=list)

    def append(self, rec: StepRecord) -> None:
        if self.steps and rec.step <= self.steps[-1].step:
            raise ValueError("step records must be strictly increasing")
        self.steps.append(rec)

    def __len__(self) -> int:
        return len(self.steps)


def build_samples(db: AffectDatabase, gaussians: GaussianTable | None,
                  attribute_embeddings: np.ndarray | None,
                  config: MapperConfig) -> list[MapperSample]:
    """Turn database records into training samples.

    Every record must carry an affect feature of config.input_dim.  When
    attribute embeddings are given (one unit row per catalog attribute),
    grounding supervision is attached with Gaussian-kernel weights at the
    record's own VA annotation; attributes without a fitted Gaussian get
    weight 0.
    """
    samples = []
    catalog = db.attribute_catalog
    use_grounding = attribute_embeddings is not None and len(catalog) > 0
    if use_grounding:
        attribute_embeddings = np.asarray(attribute_embeddings, dtype=np.float64)
        if attribute_embeddings.shape != (len(catalog), config.global_dim):
            raise ConfigError(
                f"attribute embeddings must have shape ({len(catalog)}, "
                f"{config.global_dim}), got {attribute_embeddings.shape}")
        if gaussians is None:
            gaussians = GaussianTable()
    for rec in db.records:
        if rec.affect_feature is None:
            raise ConfigError(f"record {rec.id!r} has no affect_feature; training needs one")
        f = np.asarray(rec.affect_feature, dtype=np.float64)
        if f.shape != (config.input_dim,):
            raise ConfigError(
                f"record {rec.id!r} affect_feature has shape {f.shape}, "
                f"expected ({config.input_dim},)")
        if use_grounding:
            w = attribute_weights(rec.va, gaussians, catalog).weights
            samples.append(MapperSample(f, rec.va, attribute_embeddings,
                                        db.multi_hot(rec), w))
        else:
            samples.append(MapperSample(f, rec.va))
    return samples


def train(db: AffectDatabase, gaussians: GaussianTable | None,
          attribute_embeddings: np.ndarray | None,
          config: MapperConfig) -> tuple[MapperParams, TrainingHistory]:
    """Deterministic training run; returns the final parameters and history.

    Sample order is a seeded per-epoch permutation; two runs with the same
    config produce bit-identical histories and parameters.  The returned
    parameters are quantized to float32-representable values so that the
    checkpoint file round-trips bit-exactly.
    """
    samples = build_samples(db, gaussians, attribute_embeddings, config)
    rng = np.random.default_rng(config.seed)
    params = init_params(config)
    state = AdamWState(params)
    history = TrainingHistory()

    order = rng.permutation(len(samples))
    pos = 0
    for step in range(config.train_steps):
        batch = []
        for _ in range(config.batch_size):
            if pos >= len(order):
                order = rng.permutation(len(samples))
                pos = 0
            batch.append(samples[int(order[pos])])
            pos += 1
        grads, l_aff, l_sg = backward(batch, params, config)
        gnorm = math.sqrt(sum(float(np.sum(a * a)) for a in grads.arrays()))
        optimizer_step(params, grads, state, step, config)
        history.append(StepRecord(
            step=step, l_aff=l_aff, l_sg=l_sg,
            l_total=total_loss(0.0, l_aff, l_sg, config.alpha, config.beta),
            learning_rate=warmup_lr(step, config), gradient_norm=gnorm))

    params.quantize_float32()
    return params, history


def mean_affect_loss(params: MapperParams, config: MapperConfig, samples) -> float:
    """Mean squared VA error of the read-out head over a sample list."""
    total = 0.0
    for s in samples:
        cache = _forward_cache(np.asarray(s.affect_feature, dtype=np.float64), params, config)
        gt = np.array([s.va.valence, s.va.arousal])
        diff = cache["va_hat"] - gt
        total += float(diff @ diff)
    return total / len(samples)


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

CHECKPOINT_FORMAT = "affectkit-mapper/v1"


def save_checkpoint(path, params: MapperParams, config: MapperConfig, step: int) -> None:
    """JSON manifest line (config, layer shapes, seed, step) + float32 block."""
    named = params.named()
    manifest = {
        "format": CHECKPOINT_FORMAT,
        "config": asdict(config),
        "layers": [{"name": n, "shape": list(a.shape)} for n, a in named],
        "seed": config.seed,
        "step": int(step),
        "dtype": "float32",
    }
    block = np.concatenate([a.ravel() for _, a in named])
    with open(path, "wb") as fh:
        fh.write(json.dumps(manifest, separators=(",", ":")).encode("utf-8"))
        fh.write(b"\n")
        fh.write(block.astype("<f4").tobytes())


def load_checkpoint(path) -> tuple[MapperParams, MapperConfig, int]:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        manifest = json.loads(header_line.decode("utf-8"))
        raw = fh.read()
    if manifest.get("format") != CHECKPOINT_FORMAT:
        raise ConfigError(f"{path}: not a mapper checkpoint")
    cfg_dict = dict(manifest["config"])
    cfg_dict["hidden_dims"] = tuple(cfg_dict["hidden_dims"])
    config = MapperConfig(**cfg_dict)
    flat = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    params = init_params(config)
    expected = sum(int(np.prod(layer["shape"])) for layer in manifest["layers"])
    if flat.size != expected or expected != params.size():
        raise ShapeMismatchError(f"{path}: parameter block size mismatch")
    for (name, arr), layer in zip(params.named(), manifest["layers"]):
        if name != layer["name"] or list(arr.shape) != list(layer["shape"]):
            raise ShapeMismatchError(f"{path}: layer {layer['name']} does not match config")
    params.load_flat(flat)
    return params, config, int(manifest["step"])
