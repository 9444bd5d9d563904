"""Desk-scale verification: pipeline statistics, a linear probe trainer,
the RMS calibration error metric, and a throughput benchmark.

The probe is softmax regression over raw pixels scaled to [0, 1].  It is a
deliberately small stand-in whose job is to prove the augmentation pipeline
feeds a learner correct, finite, reproducible batches — not to reproduce any
deep-network accuracy.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .augment import AugmentationSpec, apply_augmentation
from .compositor import YonaConfig, yona_apply, yona_apply_traced
from .errors import DivergenceError
from .image import Axis, ImageTensor, noise_bytes
from .rng import SeedSpec, derive_image_streams, derive_stream


# --------------------------------------------------------------------------
# Pipeline statistics

@dataclass
class StatsReport:
    masked_fraction_mean: float
    axis_height_frequency: float
    piece1_masked_frequency: float
    mean_abs_pixel_delta: float
    sample_count: int

    def to_text(self) -> str:
        return (f"sample_count={self.sample_count}\n"
                f"masked_fraction_mean={self.masked_fraction_mean:.6f}\n"
                f"axis_height_frequency={self.axis_height_frequency:.6f}\n"
                f"piece1_masked_frequency={self.piece1_masked_frequency:.6f}\n"
                f"mean_abs_pixel_delta={self.mean_abs_pixel_delta:.6f}\n")


def collect_stats(records, aug: AugmentationSpec,
                  yona_config: YonaConfig | None, seed: int,
                  n_samples: int) -> StatsReport:
    """Run the pipeline with an instrumented compositor and tally the coin
    outcomes.  The masked fraction is verified independently per image by
    replaying the noise stream and checking the masked region matches it."""
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    records = list(records)
    if not records:
        raise ValueError("collect_stats needs at least one record")
    height_hits = 0
    first_hits = 0
    masked_total = 0.0
    delta_total = 0.0
    for i in range(n_samples):
        image = records[i % len(records)].image
        structure, augment, noise = derive_image_streams(seed, i)
        if yona_config is None:
            out = apply_augmentation(aug, image, augment)
            delta_total += float(np.mean(np.abs(
                out.array.astype(np.int16) - image.array.astype(np.int16))))
            continue
        out, trace = yona_apply_traced(image, aug, yona_config, structure,
                                       augment, noise)
        # independent check: replay the noise stream and confirm the masked
        # region carries exactly those bytes
        _, _, replay = derive_image_streams(seed, i)
        expected = noise_bytes(yona_config.noise, trace.masked_byte_count,
                               replay)
        region = _masked_region(out.array, trace)
        if not np.array_equal(region.reshape(-1), expected):
            raise AssertionError(
                f"sample {i}: masked region does not replay from the noise "
                f"stream")
        masked_total += trace.masked_byte_count / image.array.size
        height_hits += trace.axis is Axis.HEIGHT
        first_hits += trace.masked_first
        delta_total += float(np.mean(np.abs(
            out.array.astype(np.int16) - image.array.astype(np.int16))))
    if yona_config is None:
        return StatsReport(0.0, 0.0, 0.0, delta_total / n_samples, n_samples)
    return StatsReport(
        masked_fraction_mean=masked_total / n_samples,
        axis_height_frequency=height_hits / n_samples,
        piece1_masked_frequency=first_hits / n_samples,
        mean_abs_pixel_delta=delta_total / n_samples,
        sample_count=n_samples)


def _masked_region(arr: np.ndarray, trace) -> np.ndarray:
    if trace.axis is Axis.HEIGHT:
        if trace.masked_first:
            return arr[:, :trace.boundary, :]
        return arr[:, trace.boundary:, :]
    if trace.masked_first:
        return arr[:, :, :trace.boundary]
    return arr[:, :, trace.boundary:]


# --------------------------------------------------------------------------
# Linear probe

@dataclass
class ProbeModel:
    """Softmax regression: logits = pixels/255 @ weights.T + bias."""

    weights: np.ndarray  # (num_classes, input_dim)
    bias: np.ndarray     # (num_classes,)

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def input_dim(self) -> int:
        return self.weights.shape[1]

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        return _softmax(features @ self.weights.T + self.bias)


@dataclass(frozen=True)
class PredictionRecord:
    """One scored prediction: max-softmax confidence plus correctness."""

    confidence: float
    correct: bool

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(
                f"confidence must be in [0, 1], got {self.confidence}")


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def probe_loss(weights: np.ndarray, bias: np.ndarray, features: np.ndarray,
               labels: np.ndarray) -> float:
    """Mean softmax cross-entropy of a batch."""
    logits = features @ weights.T + bias
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    return float(-log_probs[np.arange(len(labels)), labels].mean())


def probe_gradients(weights: np.ndarray, bias: np.ndarray,
                    features: np.ndarray, labels: np.ndarray
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradients of :func:`probe_loss` w.r.t. weights and bias."""
    probs = _softmax(features @ weights.T + bias)
    probs[np.arange(len(labels)), labels] -= 1.0
    probs /= len(labels)
    return probs.T @ features, probs.sum(axis=0)


def _features(image: ImageTensor) -> np.ndarray:
    return image.array.reshape(-1).astype(np.float64) / 255.0


def train_linear_probe(train_records, aug: AugmentationSpec | None,
                       yona_config: YonaConfig | None, epochs: int,
                       lr: float, momentum: float, batch_size: int,
                       seed: int) -> tuple[ProbeModel, list[float]]:
    """Mini-batch SGD with momentum on softmax cross-entropy.

    The augmentation (plain or composited) is re-applied fresh to every
    image on every epoch.  Returns the model plus the loss history: entry 0
    is the pre-training loss and entry e the loss after epoch e, both
    measured on the un-augmented training set.  Raises DivergenceError if
    any batch produces a non-finite loss.
    """
    records = list(train_records)
    if not records:
        raise ValueError("training needs at least one record")
    labels = np.array([r.fine_label for r in records], dtype=np.int64)
    classes = np.unique(labels)
    if classes.size < 2:
        raise ValueError("training needs at least two classes present")
    num_classes = int(classes.max()) + 1
    clean = np.stack([_features(r.image) for r in records])
    dim = clean.shape[1]

    weights = np.zeros((num_classes, dim))
    bias = np.zeros(num_classes)
    vel_w = np.zeros_like(weights)
    vel_b = np.zeros_like(bias)
    shuffle_rng = derive_stream(SeedSpec(seed, 0xB07C4))

    losses = [probe_loss(weights, bias, clean, labels)]
    n = len(records)
    plain_identity = aug is None or aug.kind == "identity"
    spec = aug if aug is not None else AugmentationSpec(kind="identity")
    for epoch in range(epochs):
        if plain_identity and yona_config is None:
            epoch_features = clean
        else:
            rows = []
            for i, record in enumerate(records):
                structure, augment, noise = derive_image_streams(
                    seed, epoch * n + i)
                if yona_config is None:
                    img = apply_augmentation(spec, record.image, augment)
                else:
                    img = yona_apply(record.image, spec, yona_config,
                                     structure, augment, noise)
                rows.append(_features(img))
            epoch_features = np.stack(rows)
        order = np.arange(n)
        for i in range(n - 1, 0, -1):  # Fisher-Yates on the probe stream
            j = shuffle_rng.next_index(i + 1)
            order[i], order[j] = order[j], order[i]
        for start in range(0, n, batch_size):
            batch = order[start:start + batch_size]
            x, y = epoch_features[batch], labels[batch]
            loss = probe_loss(weights, bias, x, y)
            if not np.isfinite(loss):
                raise DivergenceError(
                    f"non-finite loss in epoch {epoch}, batch starting at "
                    f"{start}")
            grad_w, grad_b = probe_gradients(weights, bias, x, y)
            vel_w = momentum * vel_w + grad_w
            vel_b = momentum * vel_b + grad_b
            weights = weights - lr * vel_w
            bias = bias - lr * vel_b
        losses.append(probe_loss(weights, bias, clean, labels))
    return ProbeModel(weights=weights, bias=bias), losses


def evaluate_probe(model: ProbeModel, records) -> list[PredictionRecord]:
    """Score records into (confidence, correct) prediction pairs."""
    records = list(records)
    features = np.stack([_features(r.image) for r in records])
    labels = np.array([r.fine_label for r in records])
    probs = model.predict_proba(features)
    predicted = probs.argmax(axis=1)
    confidence = probs.max(axis=1)
    return [PredictionRecord(float(c), bool(p == t))
            for c, p, t in zip(confidence, predicted, labels)]


# --------------------------------------------------------------------------
# Calibration

def rms_calibration_error(predictions, num_bins: int = 15) -> float:
    """Root-mean-square gap between per-bin confidence and accuracy, on the
    percent scale.

    Bins are adaptive (equal count).  Predictions are ordered by
    (confidence, correctness) before binning so the result is invariant
    under permutation of the input, including ties.
    """
    preds = list(predictions)
    if num_bins < 1:
        raise ValueError(f"num_bins must be >= 1, got {num_bins}")
    if len(preds) < num_bins:
        raise ValueError(
            f"need at least num_bins={num_bins} predictions, got {len(preds)}")
    preds.sort(key=lambda p: (p.confidence, p.correct))
    n = len(preds)
    conf = np.array([p.confidence for p in preds])
    correct = np.array([p.correct for p in preds], dtype=np.float64)
    total = 0.0
    for b in range(num_bins):
        lo = (b * n) // num_bins
        hi = ((b + 1) * n) // num_bins
        gap = conf[lo:hi].mean() - correct[lo:hi].mean()
        total += (hi - lo) * gap * gap
    return float(np.sqrt(total / n)) * 100.0


# --------------------------------------------------------------------------
# Throughput benchmark

@dataclass
class BenchmarkResult:
    plain_ns_per_image: float
    yona_ns_per_image: float
    ratio: float

    def to_text(self) -> str:
        return (f"plain_ns_per_image={self.plain_ns_per_image:.0f}\n"
                f"yona_ns_per_image={self.yona_ns_per_image:.0f}\n"
                f"ratio={self.ratio:.3f}\n")


def benchmark_throughput(aug: AugmentationSpec, yona_config: YonaConfig,
                         image_dims: tuple[int, int, int] = (3, 32, 32),
                         n_iterations: int = 10_000,
                         seed: int = 0) -> BenchmarkResult:
    """Median per-image latency of the bare augmentation vs the composited
    pipeline wrapping it, on one in-memory image.

    The two operations are timed interleaved (one of each per iteration) so
    clock-speed drift hits both sides equally, and the ratio comes from
    paired medians.  Warm-up iterations (10% of the run, at least 100) are
    excluded.  Streams are long-lived across iterations, so the numbers
    measure the operations themselves, not stream derivation.
    """
    if n_iterations < 100:
        raise ValueError(
            f"n_iterations must be >= 100, got {n_iterations}")
    c, h, w = image_dims
    pixels = derive_stream(SeedSpec(seed, 0xBE7C)).fill_bytes(c * h * w)
    image = ImageTensor(pixels.reshape(c, h, w).copy())
    warmup = max(100, n_iterations // 10)

    plain_rng = derive_stream(SeedSpec(seed, 1))
    structure = derive_stream(SeedSpec(seed, 2))
    augment = derive_stream(SeedSpec(seed, 3))
    noise = derive_stream(SeedSpec(seed, 4))

    for _ in range(warmup):
        apply_augmentation(aug, image, plain_rng)
        yona_apply(image, aug, yona_config, structure, augment, noise)

    plain_samples = np.empty(n_iterations)
    yona_samples = np.empty(n_iterations)
    clock = time.perf_counter_ns
    for i in range(n_iterations):
        t0 = clock()
        apply_augmentation(aug, image, plain_rng)
        t1 = clock()
        yona_apply(image, aug, yona_config, structure, augment, noise)
        t2 = clock()
        plain_samples[i] = t1 - t0
        yona_samples[i] = t2 - t1

    plain_ns = float(np.median(plain_samples))
    yona_ns = float(np.median(yona_samples))
    return BenchmarkResult(plain_ns_per_image=plain_ns,
                           yona_ns_per_image=yona_ns,
                           ratio=yona_ns / plain_ns if plain_ns > 0
                           else float("inf"))
