"""Deterministic patch-masking image augmentation engine.

The core pipeline cuts an image in two along a coin-chosen axis, replaces
one piece with noise, augments the other, and reassembles them.  Everything
is driven by pinned, splittable random streams, so augmented datasets are
bit-reproducible across platforms, processes, and worker counts.
"""

from .augment import (AugmentationSpec, PolicyTable, PrimitiveOp,
                      apply_augmentation, apply_primitive, auto_augment,
                      color_jitter, cutout, default_cifar10_policy,
                      default_spec, grid_transform, hflip, load_policy,
                      rand_augment, random_erasing, vflip)
from .compositor import (YonaConfig, YonaTrace, yoco_apply, yona_apply,
                         yona_apply_fraction, yona_apply_traced)
from .dataset import (CifarRecord, DatasetManifest, fnv1a_64, read_cifar,
                      read_png, write_augmented_dataset, write_cifar,
                      write_png)
from .errors import (CorruptRecordError, DivergenceError, FormatError,
                     GeometryError, UnsupportedAugmentationError)
from .evalstats import (BenchmarkResult, PredictionRecord, ProbeModel,
                        StatsReport, benchmark_throughput, collect_stats,
                        evaluate_probe, rms_calibration_error,
                        train_linear_probe)
from .image import (Axis, ConstantNoise, GaussianNoise, ImageTensor, Piece,
                    UniformNoise, concat, cut, cut_at, mask_noise)
from .rng import (RngStream, SeedSpec, derive_image_streams, derive_stream,
                  image_stream_label)

__version__ = "0.1.0"
