"""Patch-level compositors.

``yona_apply`` bisects an image along a coin-chosen axis, replaces one piece
with noise, augments the other piece as if it were a standalone image, and
reassembles the two in their original spatial order.  ``yoco_apply`` is the
comparison compositor: no masking, the augmentation runs independently on
both halves.

Randomness contract per composition (default config):

* structure stream: one axis draw then one side draw, in that order;
* augment stream: whatever the augmentation itself consumes;
* noise stream: bytes for the masked piece only.

Holding two of the three streams fixed and varying the third never touches
the bytes owned by the others.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .augment import AugmentationSpec, _augment_arr
from .errors import GeometryError
from .image import (Axis, ImageTensor, NoiseKind, UniformNoise, noise_bytes,
                    round_half_up)
from .rng import RngStream

AXIS_RANDOM = "random"
AXIS_FIXED_HEIGHT = "height"
AXIS_FIXED_WIDTH = "width"

MASKED_RANDOM = "random"
MASKED_FIRST = "first"
MASKED_SECOND = "second"

REGION_PIECE = "piece"
REGION_IMAGE = "image"


@dataclass(frozen=True)
class YonaConfig:
    """Compositor policy.  The defaults reproduce the standard method:
    mask half the image, with the cut axis and the masked side each decided
    by a fair coin."""

    mask_fraction: float = 0.5
    axis_policy: str = AXIS_RANDOM
    noise: NoiseKind = field(default_factory=UniformNoise)
    masked_piece_policy: str = MASKED_RANDOM
    region_reference: str = REGION_PIECE

    def __post_init__(self):
        if not 0.0 < self.mask_fraction < 1.0:
            raise ValueError(
                f"mask_fraction must be in (0, 1), got {self.mask_fraction}")
        if self.axis_policy not in (AXIS_RANDOM, AXIS_FIXED_HEIGHT,
                                    AXIS_FIXED_WIDTH):
            raise ValueError(f"unknown axis policy {self.axis_policy!r}")
        if self.masked_piece_policy not in (MASKED_RANDOM, MASKED_FIRST,
                                            MASKED_SECOND):
            raise ValueError(
                f"unknown masked piece policy {self.masked_piece_policy!r}")
        if self.region_reference not in (REGION_PIECE, REGION_IMAGE):
            raise ValueError(
                f"unknown region reference {self.region_reference!r}")
        # hot-path support: precomputed dispatch flag plus a per-shape
        # geometry memo (both invisible to equality/repr)
        object.__setattr__(
            self, "_coin_uniform_path",
            self.axis_policy == AXIS_RANDOM
            and self.masked_piece_policy == MASKED_RANDOM
            and type(self.noise) is UniformNoise)
        object.__setattr__(self, "_geometry_memo", {})

    def _geometry(self, shape: tuple[int, int, int]):
        """Per-shape composition geometry, computed once per (C, H, W).

        Entry ``(height_cut << 1) | masked_first`` holds ``(masked_bytes,
        mask_shape, aug_slice, concat_dim, boundary, masked_extent)``, or a
        GeometryError to raise if that axis cannot host the mask fraction.
        """
        channels, height, width = shape
        if height < 2 or width < 2:
            raise GeometryError(
                f"image {shape} is too small to cut along both axes")
        entries = []
        for height_cut in (False, True):
            extent = height if height_cut else width
            k = int(self.mask_fraction * extent + 0.5)  # round half up
            if not 1 <= k <= extent - 1:
                # raised only if this axis is actually selected
                entries.extend([GeometryError(
                    f"mask fraction {self.mask_fraction} of extent {extent} "
                    f"leaves no pixels on one side")] * 2)
                continue
            for masked_first in (False, True):
                boundary = k if masked_first else extent - k
                if height_cut:
                    masked_bytes = channels * k * width
                    mask_shape = (channels, k, width)
                    aug_slice = (np.s_[:, boundary:, :] if masked_first
                                 else np.s_[:, :boundary, :])
                    concat_dim = 1
                else:
                    masked_bytes = channels * height * k
                    mask_shape = (channels, height, k)
                    aug_slice = (np.s_[:, :, boundary:] if masked_first
                                 else np.s_[:, :, :boundary])
                    concat_dim = 2
                entries.append((masked_bytes, mask_shape, aug_slice,
                                concat_dim, boundary, k))
        ref_hw = (height, width) if self.region_reference == REGION_IMAGE \
            else None
        geom = (tuple(entries), ref_hw)
        self._geometry_memo[shape] = geom
        return geom


@dataclass(frozen=True)
class YonaTrace:
    """What one composition actually did (for statistics and verification)."""

    axis: Axis
    masked_first: bool
    boundary: int
    masked_extent: int
    masked_byte_count: int


def _compose(image: ImageTensor, aug: AugmentationSpec, config: YonaConfig,
             structure_rng: RngStream, augment_rng: RngStream,
             noise_rng: RngStream, want_trace: bool):
    arr = image.array
    shape = arr.shape

    # structure coins: axis first, then masked side; draws at exactly 0.5
    # take the first branch.  Fixed policies skip their draw.
    axis_policy = config.axis_policy
    side_policy = config.masked_piece_policy
    if axis_policy == AXIS_RANDOM and side_policy == MASKED_RANDOM:
        height_cut, masked_first = structure_rng.next_coin_pair()
    else:
        if axis_policy == AXIS_RANDOM:
            height_cut = structure_rng.next_unit_uniform() <= 0.5
        else:
            height_cut = axis_policy == AXIS_FIXED_HEIGHT
        if side_policy == MASKED_RANDOM:
            masked_first = structure_rng.next_unit_uniform() <= 0.5
        else:
            masked_first = side_policy == MASKED_FIRST

    geometry = config._geometry_memo.get(shape)
    if geometry is None:
        geometry = config._geometry(shape)
    entries, ref_hw = geometry
    entry = entries[(height_cut << 1) | masked_first]
    if type(entry) is GeometryError:
        raise entry
    masked_bytes, mask_shape, aug_slice, concat_dim, boundary, \
        masked_extent = entry

    kind = config.noise
    if type(kind) is UniformNoise:
        masked_part = noise_rng.fill_bytes(masked_bytes).reshape(mask_shape)
    else:
        masked_part = noise_bytes(kind, masked_bytes,
                                  noise_rng).reshape(mask_shape)
    augmented_part = _augment_arr(aug, arr[aug_slice], augment_rng, ref_hw)
    if masked_first:
        out = np.concatenate((masked_part, augmented_part), axis=concat_dim)
    else:
        out = np.concatenate((augmented_part, masked_part), axis=concat_dim)
    result = ImageTensor(out)
    if not want_trace:
        return result
    axis = Axis.HEIGHT if height_cut else Axis.WIDTH
    return result, YonaTrace(axis=axis, masked_first=masked_first,
                             boundary=boundary, masked_extent=masked_extent,
                             masked_byte_count=masked_bytes)


def yona_apply_traced(image: ImageTensor, aug: AugmentationSpec,
                      config: YonaConfig, structure_rng: RngStream,
                      augment_rng: RngStream, noise_rng: RngStream
                      ) -> tuple[ImageTensor, YonaTrace]:
    """`yona_apply` plus a trace of the structural choices taken."""
    return _compose(image, aug, config, structure_rng, augment_rng,
                    noise_rng, True)


def yona_apply(image: ImageTensor, aug: AugmentationSpec, config: YonaConfig,
               structure_rng: RngStream, augment_rng: RngStream,
               noise_rng: RngStream) -> ImageTensor:
    """Cut, mask one piece with noise, augment the other, reassemble.

    For the default configuration (random axis, random side, uniform noise)
    this runs a fused fast path that is byte-identical to the traced
    composition; the equivalence is pinned by tests.
    """
    if config._coin_uniform_path:
        arr = image.array
        height_cut, masked_first = structure_rng.next_coin_pair()
        geometry = config._geometry_memo.get(arr.shape)
        if geometry is None:
            geometry = config._geometry(arr.shape)
        entries, ref_hw = geometry
        entry = entries[(height_cut << 1) | masked_first]
        if type(entry) is GeometryError:
            raise entry
        masked_bytes, mask_shape, aug_slice, concat_dim = entry[:4]
        # inlined tape fast path (same bytes as fill_bytes)
        tape = noise_rng._tape
        pos = noise_rng._tape_pos
        if tape is not None and masked_bytes <= tape.shape[0] - pos:
            noise_rng._tape_pos = pos + masked_bytes
            masked_part = tape[pos:pos + masked_bytes].reshape(mask_shape)
        else:
            masked_part = noise_rng.fill_bytes(masked_bytes).reshape(
                mask_shape)
        augmented_part = _augment_arr(aug, arr[aug_slice], augment_rng,
                                      ref_hw)
        if masked_first:
            out = np.concatenate((masked_part, augmented_part),
                                 axis=concat_dim)
        else:
            out = np.concatenate((augmented_part, masked_part),
                                 axis=concat_dim)
        return ImageTensor(out)
    return _compose(image, aug, config, structure_rng, augment_rng,
                    noise_rng, False)


def yona_apply_fraction(image: ImageTensor, aug: AugmentationSpec,
                        fraction: float, structure_rng: RngStream,
                        augment_rng: RngStream, noise_rng: RngStream,
                        config: YonaConfig | None = None) -> ImageTensor:
    """`yona_apply` with the masked piece covering ``fraction`` of the cut
    axis; the side the masked block occupies is still coin-chosen."""
    base = config if config is not None else YonaConfig()
    return yona_apply(image, aug, replace(base, mask_fraction=fraction),
                      structure_rng, augment_rng, noise_rng)


def yoco_apply(image: ImageTensor, aug: AugmentationSpec,
               structure_rng: RngStream, augment_rng: RngStream
               ) -> ImageTensor:
    """Comparison compositor: bisect, augment each half independently on a
    forked sub-stream, reassemble.  No masking."""
    arr = image.array
    channels, height, width = arr.shape
    if height < 2 or width < 2:
        raise GeometryError(
            f"image {arr.shape} is too small to cut along both axes")
    axis = Axis.HEIGHT if structure_rng.next_unit_uniform() <= 0.5 \
        else Axis.WIDTH
    extent = height if axis is Axis.HEIGHT else width
    boundary = round_half_up(0.5 * extent)
    first_rng = augment_rng.split(0)
    second_rng = augment_rng.split(1)
    if axis is Axis.HEIGHT:
        first, second = np.s_[:, :boundary, :], np.s_[:, boundary:, :]
    else:
        first, second = np.s_[:, :, :boundary], np.s_[:, :, boundary:]
    out = np.empty(arr.shape, dtype=np.uint8)
    out[first] = _augment_arr(aug, arr[first], first_rng)
    out[second] = _augment_arr(aug, arr[second], second_rng)
    return ImageTensor(out)
