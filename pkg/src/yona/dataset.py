"""Dataset ingestion and emission.

CIFAR-10/100 binary archives are both the input and the output format, so
augmented datasets feed any external trainer unchanged:

* CIFAR-10 record: ``[label u8][1024 R][1024 G][1024 B]``, row-major planes;
* CIFAR-100 record: ``[coarse u8][fine u8][3072 pixel bytes]``.

PNG support is a minimal self-contained codec (8-bit grayscale/RGB,
non-interlaced) so previews round-trip losslessly without extra
dependencies.  Manifests are flat ``key=value`` text with a 64-bit FNV-1a
content digest over all emitted record bytes.
"""

from __future__ import annotations

import os
import struct
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .augment import AugmentationSpec, apply_augmentation
from .compositor import YonaConfig, yona_apply
from .errors import CorruptRecordError, FormatError
from .image import ImageTensor
from .rng import derive_image_streams

CIFAR10 = "cifar10"
CIFAR100 = "cifar100"

_RECORD_BYTES = {CIFAR10: 3073, CIFAR100: 3074}
_LABEL_LIMIT = {CIFAR10: 10, CIFAR100: 100}
_COARSE_LIMIT = 20
_PIXELS = 3072  # 3 x 32 x 32

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a_64(data: bytes, value: int = FNV_OFFSET) -> int:
    """64-bit FNV-1a over a byte string; pass ``value`` to chain chunks."""
    for byte in data:
        value = ((value ^ byte) * FNV_PRIME) & _MASK64
    return value


@dataclass
class CifarRecord:
    """One labelled 3x32x32 image; ``coarse_label`` is None for CIFAR-10."""

    fine_label: int
    image: ImageTensor
    coarse_label: int | None = None


def read_cifar(path, variant: str) -> list[CifarRecord]:
    """Parse a CIFAR binary batch file into records, validating labels.

    Raises FormatError (with the byte offset of the first incomplete record)
    on truncation and CorruptRecordError on out-of-range labels.
    """
    if variant not in _RECORD_BYTES:
        raise ValueError(f"unknown dataset variant {variant!r}")
    record_size = _RECORD_BYTES[variant]
    with open(path, "rb") as fh:
        blob = fh.read()
    complete = len(blob) // record_size
    if len(blob) % record_size != 0:
        raise FormatError(
            f"{path}: file length {len(blob)} is not a multiple of the "
            f"{record_size}-byte record size",
            offset=complete * record_size)
    if complete == 0:
        return []
    table = np.frombuffer(blob, dtype=np.uint8).reshape(complete, record_size)
    label_col = 1 if variant == CIFAR100 else 0
    fine = table[:, label_col]
    bad = np.nonzero(fine >= _LABEL_LIMIT[variant])[0]
    if bad.size:
        i = int(bad[0])
        raise CorruptRecordError(
            f"{path}: record {i} has fine label {int(fine[i])}, valid range "
            f"is [0, {_LABEL_LIMIT[variant] - 1}]",
            offset=i * record_size)
    if variant == CIFAR100:
        coarse = table[:, 0]
        bad = np.nonzero(coarse >= _COARSE_LIMIT)[0]
        if bad.size:
            i = int(bad[0])
            raise CorruptRecordError(
                f"{path}: record {i} has coarse label {int(coarse[i])}, "
                f"valid range is [0, {_COARSE_LIMIT - 1}]",
                offset=i * record_size)
    pixels = table[:, record_size - _PIXELS:].reshape(complete, 3, 32, 32)
    records = []
    for i in range(complete):
        records.append(CifarRecord(
            fine_label=int(fine[i]),
            image=ImageTensor(pixels[i]),
            coarse_label=int(table[i, 0]) if variant == CIFAR100 else None))
    return records


def _record_bytes(record: CifarRecord, variant: str) -> bytes:
    pixel = record.image.to_bytes()
    if len(pixel) != _PIXELS:
        raise FormatError(
            f"record image shape {record.image.shape} is not 3x32x32")
    if variant == CIFAR100:
        coarse = record.coarse_label if record.coarse_label is not None else 0
        return bytes((coarse, record.fine_label)) + pixel
    return bytes((record.fine_label,)) + pixel


def write_cifar(records, path, variant: str) -> None:
    """Serialize records back into the CIFAR binary batch layout."""
    with open(path, "wb") as fh:
        for record in records:
            fh.write(_record_bytes(record, variant))


# --------------------------------------------------------------------------
# Manifests

@dataclass
class DatasetManifest:
    dataset: str
    count: int
    seed: int
    augmentation: str
    yona: str
    digest: int

    def to_text(self) -> str:
        return (f"dataset={self.dataset}\n"
                f"count={self.count}\n"
                f"seed={self.seed}\n"
                f"augmentation={self.augmentation}\n"
                f"yona={self.yona}\n"
                f"digest={self.digest:016x}\n")

    @classmethod
    def from_text(cls, text: str) -> "DatasetManifest":
        fields = {}
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            fields[key] = value
        return cls(dataset=fields["dataset"], count=int(fields["count"]),
                   seed=int(fields["seed"]),
                   augmentation=fields["augmentation"], yona=fields["yona"],
                   digest=int(fields["digest"], 16))


def describe_augmentation(spec: AugmentationSpec) -> str:
    parts = [spec.kind, f"p:{spec.apply_probability:g}"]
    if spec.kind == "jitter":
        parts.append(f"bcsh:{spec.brightness:g}/{spec.contrast:g}/"
                     f"{spec.saturation:g}/{spec.hue:g}")
    elif spec.kind == "erasing":
        parts.append(f"scale:{spec.erase_scale[0]:g}-{spec.erase_scale[1]:g}")
        parts.append(f"ratio:{spec.erase_ratio[0]:g}-{spec.erase_ratio[1]:g}")
    elif spec.kind == "cutout":
        parts.append(f"area:{spec.cutout_area_fraction:g}")
    elif spec.kind == "grid":
        parts.append(f"grid:{spec.grid_rows}x{spec.grid_cols}")
    elif spec.kind == "randaug":
        parts.append(f"n:{spec.randaug_num_ops}")
        parts.append(f"m:{spec.randaug_magnitude:g}")
    return ",".join(parts)


def describe_yona(config: YonaConfig | None) -> str:
    if config is None:
        return "off"
    noise = type(config.noise).__name__
    return (f"fraction:{config.mask_fraction:g},axis:{config.axis_policy},"
            f"side:{config.masked_piece_policy},noise:{noise}")


# --------------------------------------------------------------------------
# Augmented dataset emission

def _augment_record(record: CifarRecord, aug: AugmentationSpec,
                    yona_config: YonaConfig | None, seed: int,
                    index: int) -> ImageTensor:
    structure, augment, noise = derive_image_streams(seed, index)
    if yona_config is None:
        return apply_augmentation(aug, record.image, augment)
    return yona_apply(record.image, aug, yona_config, structure, augment,
                      noise)


def write_augmented_dataset(records, aug: AugmentationSpec,
                            yona_config: YonaConfig | None, seed: int,
                            out_dir, variant: str | None = None,
                            workers: int = 1) -> DatasetManifest:
    """Augment every record and emit a CIFAR-layout file plus a manifest.

    Labels pass through untouched; pixel bytes are produced from per-record
    streams derived from (seed, record index), so output bytes do not depend
    on ``workers`` or scheduling.  Returns the manifest (also written to
    ``out_dir/manifest.txt`` next to ``out_dir/augmented.bin``).
    """
    records = list(records)
    if variant is None:
        variant = CIFAR100 if records and records[0].coarse_label is not None \
            else CIFAR10
    record_size = _RECORD_BYTES[variant]
    out = bytearray(len(records) * record_size)

    def emit(index: int) -> None:
        record = records[index]
        image = _augment_record(record, aug, yona_config, seed, index)
        augmented = CifarRecord(fine_label=record.fine_label, image=image,
                                coarse_label=record.coarse_label)
        start = index * record_size
        out[start:start + record_size] = _record_bytes(augmented, variant)

    if workers <= 1:
        for i in range(len(records)):
            emit(i)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(emit, range(len(records))))

    payload = bytes(out)
    os.makedirs(out_dir, exist_ok=True)
    data_path = os.path.join(out_dir, "augmented.bin")
    with open(data_path, "wb") as fh:
        fh.write(payload)
    manifest = DatasetManifest(
        dataset=variant, count=len(records), seed=seed,
        augmentation=describe_augmentation(aug),
        yona=describe_yona(yona_config), digest=fnv1a_64(payload))
    with open(os.path.join(out_dir, "manifest.txt"), "w",
              encoding="utf-8") as fh:
        fh.write(manifest.to_text())
    return manifest


# --------------------------------------------------------------------------
# PNG codec (8-bit grayscale / RGB, non-interlaced)

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


def _chunk(tag: bytes, body: bytes) -> bytes:
    return (struct.pack(">I", len(body)) + tag + body
            + struct.pack(">I", zlib.crc32(tag + body) & 0xFFFFFFFF))


def write_png(image: ImageTensor, path) -> None:
    """Encode losslessly; 1-channel images become grayscale PNGs."""
    channels = image.channels
    if channels not in (1, 3):
        raise FormatError(
            f"PNG export supports 1 or 3 channels, got {channels}")
    height, width = image.height, image.width
    color_type = 0 if channels == 1 else 2
    interleaved = np.ascontiguousarray(image.array.transpose(1, 2, 0))
    rows = bytearray()
    stride = width * channels
    flat = interleaved.reshape(height, stride)
    for y in range(height):
        rows.append(0)  # filter type None
        rows += flat[y].tobytes()
    header = struct.pack(">IIBBBBB", width, height, 8, color_type, 0, 0, 0)
    payload = (_PNG_SIGNATURE + _chunk(b"IHDR", header)
               + _chunk(b"IDAT", zlib.compress(bytes(rows), 6))
               + _chunk(b"IEND", b""))
    with open(path, "wb") as fh:
        fh.write(payload)


def _paeth(a: int, b: int, c: int) -> int:
    p = a + b - c
    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
    if pa <= pb and pa <= pc:
        return a
    if pb <= pc:
        return b
    return c


def _unfilter(raw: bytes, height: int, stride: int, bpp: int) -> bytearray:
    out = bytearray(height * stride)
    pos = 0
    for y in range(height):
        if pos >= len(raw):
            raise FormatError("PNG pixel data ends early", offset=pos)
        ftype = raw[pos]
        pos += 1
        line = raw[pos:pos + stride]
        if len(line) < stride:
            raise FormatError("PNG pixel data ends early", offset=pos)
        pos += stride
        row_start = y * stride
        prev_start = row_start - stride
        if ftype == 0:
            out[row_start:row_start + stride] = line
        elif ftype == 1:
            for x in range(stride):
                left = out[row_start + x - bpp] if x >= bpp else 0
                out[row_start + x] = (line[x] + left) & 0xFF
        elif ftype == 2:
            for x in range(stride):
                up = out[prev_start + x] if y > 0 else 0
                out[row_start + x] = (line[x] + up) & 0xFF
        elif ftype == 3:
            for x in range(stride):
                left = out[row_start + x - bpp] if x >= bpp else 0
                up = out[prev_start + x] if y > 0 else 0
                out[row_start + x] = (line[x] + (left + up) // 2) & 0xFF
        elif ftype == 4:
            for x in range(stride):
                left = out[row_start + x - bpp] if x >= bpp else 0
                up = out[prev_start + x] if y > 0 else 0
                diag = out[prev_start + x - bpp] if (y > 0 and x >= bpp) else 0
                out[row_start + x] = (line[x] + _paeth(left, up, diag)) & 0xFF
        else:
            raise FormatError(f"unknown PNG filter type {ftype}", offset=pos)
    return out


def read_png(path) -> ImageTensor:
    """Decode an 8-bit grayscale or RGB non-interlaced PNG."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != _PNG_SIGNATURE:
        raise FormatError(f"{path}: not a PNG file", offset=0)
    pos = 8
    header = None
    idat = bytearray()
    while pos + 8 <= len(blob):
        length = struct.unpack(">I", blob[pos:pos + 4])[0]
        tag = blob[pos + 4:pos + 8]
        body = blob[pos + 8:pos + 8 + length]
        if len(body) != length:
            raise FormatError(f"{path}: truncated chunk {tag!r}", offset=pos)
        crc = struct.unpack(
            ">I", blob[pos + 8 + length:pos + 12 + length])[0]
        if crc != (zlib.crc32(tag + body) & 0xFFFFFFFF):
            raise FormatError(f"{path}: CRC mismatch in {tag!r}", offset=pos)
        if tag == b"IHDR":
            header = struct.unpack(">IIBBBBB", body)
        elif tag == b"IDAT":
            idat += body
        elif tag == b"IEND":
            break
        pos += 12 + length
    if header is None:
        raise FormatError(f"{path}: missing IHDR", offset=8)
    width, height, depth, color_type, _, _, interlace = header
    if depth != 8 or interlace != 0 or color_type not in (0, 2):
        raise FormatError(
            f"{path}: unsupported PNG (depth={depth}, color={color_type}, "
            f"interlace={interlace})")
    channels = 1 if color_type == 0 else 3
    stride = width * channels
    try:
        raw = zlib.decompress(bytes(idat))
    except zlib.error as exc:
        raise FormatError(f"{path}: corrupt pixel data ({exc})") from exc
    pixels = _unfilter(raw, height, stride, channels)
    arr = np.frombuffer(bytes(pixels), dtype=np.uint8).reshape(
        height, width, channels)
    return ImageTensor(np.ascontiguousarray(arr.transpose(2, 0, 1)))
