"""Image, mask and saliency types plus the pixel-level primitives.

Everything downstream (oracles, explainers, metrics) is built on the
three value types defined here.  All arrays are row-major, intensities
live in [0, 1], and instances are frozen with read-only buffers so they
can be shared freely across worker threads.
"""

from __future__ import annotations

import struct
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from PIL import Image as PilImage

from .errors import DimensionMismatch, EmptyMask, InvalidParams

_OFFSETS_4 = ((-1, 0), (1, 0), (0, -1), (0, 1))
_OFFSETS_8 = _OFFSETS_4 + ((-1, -1), (-1, 1), (1, -1), (1, 1))


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Image:
    """Classifier input: (H, W, C) float64 intensities in [0, 1], C in {1, 3}."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise InvalidParams(f"image must be (H, W, 1|3), got shape {arr.shape}")
        if arr.size == 0:
            raise InvalidParams("image must be non-empty")
        if not np.isfinite(arr).all() or arr.min() < 0.0 or arr.max() > 1.0:
            raise InvalidParams("image intensities must be finite and in [0, 1]")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[0], self.data.shape[1]


@dataclass(frozen=True)
class BinaryMask:
    """(H, W) boolean grid; used for explanations and ground-truth masks."""

    bits: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.bits)
        if arr.ndim != 2 or arr.size == 0:
            raise InvalidParams(f"mask must be 2-D and non-empty, got shape {arr.shape}")
        object.__setattr__(self, "bits", _freeze(arr.astype(bool)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.bits.shape

    @property
    def area(self) -> int:
        return int(self.bits.sum())

    def is_empty(self) -> bool:
        return not self.bits.any()


@dataclass(frozen=True)
class SaliencyMap:
    """(H, W) real-valued importance landscape; all values finite."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2 or arr.size == 0:
            raise InvalidParams(f"saliency must be 2-D and non-empty, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise InvalidParams("saliency values must be finite")
        object.__setattr__(self, "values", _freeze(arr))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class Region:
    """One connected component: member pixels, their centroid and area."""

    pixels: np.ndarray  # (N, 2) int rows of (row, col), sorted row-major
    centroid: tuple[float, float]
    area: int

    def to_mask(self, shape: tuple[int, int]) -> BinaryMask:
        bits = np.zeros(shape, dtype=bool)
        bits[self.pixels[:, 0], self.pixels[:, 1]] = True
        return BinaryMask(bits)


@dataclass(frozen=True)
class Occlusion:
    """How to fill the hidden part of an image.

    kind: "zero" | "global-mean" | "segment-mean" | "blur".
    segment-mean needs a label grid; blur needs an odd window size.
    """

    kind: str = "zero"
    window: int = 0
    segment_labels: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("zero", "global-mean", "segment-mean", "blur"):
            raise InvalidParams(f"unknown occlusion kind {self.kind!r}")
        if self.kind == "blur" and (self.window < 1 or self.window % 2 == 0):
            raise InvalidParams("blur window must be odd and >= 1")
        if self.kind == "segment-mean" and self.segment_labels is None:
            raise InvalidParams("segment-mean occlusion needs segment labels")

    @classmethod
    def zero(cls) -> "Occlusion":
        return cls("zero")

    @classmethod
    def global_mean(cls) -> "Occlusion":
        return cls("global-mean")

    @classmethod
    def segment_mean(cls, labels: np.ndarray) -> "Occlusion":
        return cls("segment-mean", segment_labels=np.asarray(labels))

    @classmethod
    def blur(cls, window: int) -> "Occlusion":
        return cls("blur", window=window)


def connected_components(mask: BinaryMask, connectivity: int = 8) -> list[Region]:
    """Decompose a mask into maximal connected regions.

    Regions are returned ordered by their smallest row-major pixel index,
    with each region's pixel list in row-major order.  An empty mask
    yields an empty list.
    """
    if connectivity not in (4, 8):
        raise InvalidParams(f"connectivity must be 4 or 8, got {connectivity}")
    offsets = _OFFSETS_4 if connectivity == 4 else _OFFSETS_8
    bits = mask.bits
    h, w = bits.shape
    visited = np.zeros_like(bits)
    regions: list[Region] = []
    set_rows, set_cols = np.nonzero(bits)
    for sr, sc in zip(set_rows.tolist(), set_cols.tolist()):
        if visited[sr, sc]:
            continue
        visited[sr, sc] = True
        queue = deque([(sr, sc)])
        members = []
        while queue:
            r, c = queue.popleft()
            members.append((r, c))
            for dr, dc in offsets:
                nr, nc = r + dr, c + dc
                if 0 <= nr < h and 0 <= nc < w and bits[nr, nc] and not visited[nr, nc]:
                    visited[nr, nc] = True
                    queue.append((nr, nc))
        pixels = np.array(sorted(members), dtype=np.int64)
        cen = (float(pixels[:, 0].mean()), float(pixels[:, 1].mean()))
        regions.append(Region(pixels=_freeze(pixels), centroid=cen, area=len(members)))
    return regions


def centroid(mask: BinaryMask) -> tuple[float, float]:
    """Arithmetic mean of the set pixels' (row, col) coordinates."""
    rows, cols = np.nonzero(mask.bits)
    if rows.size == 0:
        raise EmptyMask("centroid of an all-false mask is undefined")
    return float(rows.mean()), float(cols.mean())


def box_blur(image: Image, window: int) -> np.ndarray:
    """Normalized box filter; edge pixels average over the truncated window.

    Separable: each output value is the mean of the in-bounds window
    rectangle, computed exactly via per-axis cumulative sums.
    """
    if window < 1 or window > min(image.height, image.width):
        raise InvalidParams("blur window must satisfy 1 <= w <= min(H, W)")
    half = window // 2

    def axis_mean(arr: np.ndarray, axis: int) -> np.ndarray:
        n = arr.shape[axis]
        csum = np.cumsum(arr, axis=axis)
        csum = np.concatenate([np.zeros_like(np.take(csum, [0], axis=axis)), csum], axis=axis)
        idx = np.arange(n)
        lo = np.maximum(idx - half, 0)
        hi = np.minimum(idx + half + 1, n)
        total = np.take(csum, hi, axis=axis) - np.take(csum, lo, axis=axis)
        shape = [1] * arr.ndim
        shape[axis] = n
        return total / (hi - lo).reshape(shape)

    return axis_mean(axis_mean(image.data, 0), 1)


def occlusion_fill(image: Image, strategy: Occlusion,
                   visible: np.ndarray | None = None) -> np.ndarray:
    """The (H, W, C) replacement values an occlusion would paint in.

    For global-mean the fill is the per-channel mean over the visible
    pixels (so re-occluding an occluded image is a no-op); with nothing
    visible it degenerates to the whole-image mean.  zero / segment-mean
    / blur fills do not depend on the mask and can be precomputed once
    per image.
    """
    h, w, c = image.data.shape
    if strategy.kind == "zero":
        return np.zeros((h, w, c))
    if strategy.kind == "blur":
        window = min(strategy.window, min(h, w))
        return box_blur(image, window if window % 2 == 1 else window - 1)
    if strategy.kind == "segment-mean":
        labels = strategy.segment_labels
        if labels is None or labels.shape != (h, w):
            raise DimensionMismatch("segment labels must match the image shape")
        flat = labels.reshape(-1)
        k = int(flat.max()) + 1
        fill = np.empty((h * w, c))
        for ch in range(c):
            sums = np.bincount(flat, weights=image.data[:, :, ch].reshape(-1), minlength=k)
            counts = np.bincount(flat, minlength=k)
            fill[:, ch] = (sums / np.maximum(counts, 1))[flat]
        return fill.reshape(h, w, c)
    # global-mean
    if visible is None:
        weights = np.ones((h, w))
    else:
        weights = visible.astype(np.float64)
    total = weights.sum()
    if total == 0:
        mean = image.data.reshape(-1, c).mean(axis=0)
    else:
        mean = (image.data * weights[:, :, None]).reshape(-1, c).sum(axis=0) / total
    return np.broadcast_to(mean, (h, w, c)).copy()


def apply_occlusion(image: Image, keep: BinaryMask, strategy: Occlusion) -> Image:
    """Keep the masked-true pixels, replace everything else per strategy."""
    if keep.shape != image.shape:
        raise DimensionMismatch(f"keep mask {keep.shape} vs image {image.shape}")
    fill = occlusion_fill(image, strategy, visible=keep.bits)
    out = np.where(keep.bits[:, :, None], image.data, fill)
    return Image(np.clip(out, 0.0, 1.0))


def blend_occlusion(image: Image, weights: np.ndarray, strategy: Occlusion) -> Image:
    """Soft variant used for interpolated masks: out = w*img + (1-w)*fill."""
    if weights.shape != image.shape:
        raise DimensionMismatch(f"weights {weights.shape} vs image {image.shape}")
    fill = occlusion_fill(image, strategy, visible=weights)
    w3 = weights[:, :, None]
    out = w3 * image.data + (1.0 - w3) * fill
    return Image(np.clip(out, 0.0, 1.0))


# --- file formats -----------------------------------------------------------

_SALIENCY_MAGIC = b"MRXS"


def load_image(path) -> Image:
    """Read an 8-bit grayscale or RGB PNG into unit-interval intensities."""
    with PilImage.open(path) as img:
        if img.mode in ("1", "L", "LA", "I", "I;16"):
            img = img.convert("L")
        elif img.mode != "RGB":
            img = img.convert("RGB")
        arr = np.asarray(img, dtype=np.float64) / 255.0
    return Image(arr)


def save_image(image: Image, path) -> None:
    arr = np.round(image.data * 255.0).astype(np.uint8)
    if image.channels == 1:
        PilImage.fromarray(arr[:, :, 0], mode="L").save(path, format="PNG")
    else:
        PilImage.fromarray(arr, mode="RGB").save(path, format="PNG")


def load_mask(path) -> BinaryMask:
    """Read a mask PNG: any nonzero pixel counts as true."""
    with PilImage.open(path) as img:
        arr = np.asarray(img.convert("L"))
    return BinaryMask(arr > 0)


def save_mask(mask: BinaryMask, path) -> None:
    arr = np.where(mask.bits, 255, 0).astype(np.uint8)
    PilImage.fromarray(arr, mode="L").save(path, format="PNG")


def save_saliency(saliency: SaliencyMap, path) -> None:
    """Binary grid format: magic 'MRXS', uint32 H, uint32 W, float32 values (LE)."""
    h, w = saliency.shape
    with open(path, "wb") as fh:
        fh.write(_SALIENCY_MAGIC)
        fh.write(struct.pack("<II", h, w))
        fh.write(saliency.values.astype("<f4").tobytes())


def load_saliency(path) -> SaliencyMap:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _SALIENCY_MAGIC:
            raise InvalidParams(f"not a saliency grid file: bad magic {magic!r}")
        h, w = struct.unpack("<II", fh.read(8))
        data = np.frombuffer(fh.read(4 * h * w), dtype="<f4").reshape(h, w)
    return SaliencyMap(data.astype(np.float64))


_HEAT_STOPS = [
    (0.00, (10, 10, 70)),
    (0.35, (30, 110, 235)),
    (0.65, (250, 200, 40)),
    (1.00, (210, 30, 20)),
]


def heat_png(saliency: SaliencyMap, path) -> None:
    """Render a saliency map as a color PNG (min-max normalized)."""
    vals = saliency.values
    lo, hi = float(vals.min()), float(vals.max())
    t = np.zeros_like(vals) if hi == lo else (vals - lo) / (hi - lo)
    rgb = np.zeros(vals.shape + (3,), dtype=np.float64)
    for (t0, c0), (t1, c1) in zip(_HEAT_STOPS[:-1], _HEAT_STOPS[1:]):
        seg = np.clip((t - t0) / (t1 - t0), 0.0, 1.0)
        mask = (t >= t0) if t0 > 0 else np.ones_like(t, dtype=bool)
        for ch in range(3):
            rgb[..., ch] = np.where(mask, c0[ch] + seg * (c1[ch] - c0[ch]), rgb[..., ch])
    PilImage.fromarray(np.round(rgb).astype(np.uint8), mode="RGB").save(path, format="PNG")
