"""Perturbation machinery: random soft masks, superpixels, coalitions, quad splits.

Every generator here is a pure function of (seed, index) via mrxai.rng,
so replaying a run or splitting it across workers by index range yields
byte-identical output.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import InvalidParams, RectTooSmall
from .imaging import Image, SaliencyMap, _freeze

Rect = tuple[int, int, int, int]  # (row0, col0, row1, col1), half-open


# --- RISE-style interpolated masks -------------------------------------------

@dataclass(frozen=True)
class RiseMaskParams:
    grid: int = 8          # cells per side
    keep_prob: float = 0.1  # Bernoulli on-probability per cell
    count: int = 2000
    seed: int = 0

    def __post_init__(self):
        if self.grid < 1:
            raise InvalidParams("grid must be >= 1")
        if not 0.0 <= self.keep_prob <= 1.0:
            raise InvalidParams("keep_prob must be in [0, 1]")
        if self.count < 1:
            raise InvalidParams("count must be >= 1")


def _bilinear_rows(n_out: int, n_in: int) -> np.ndarray:
    """(n_out, n_in) interpolation matrix, half-pixel centers, edge clamped."""
    mat = np.zeros((n_out, n_in))
    if n_in == 1:
        mat[:, 0] = 1.0
        return mat
    src = (np.arange(n_out) + 0.5) * n_in / n_out - 0.5
    src = np.clip(src, 0.0, n_in - 1.0)
    base = np.minimum(src.astype(int), n_in - 2)
    frac = src - base
    mat[np.arange(n_out), base] = 1.0 - frac
    mat[np.arange(n_out), base + 1] = frac
    return mat


def _rise_draw(params: RiseMaskParams, index: int, cell_h: int, cell_w: int):
    gen = rng.stream(params.seed, rng.RISE_MASKS, index)
    cells = gen.random((params.grid, params.grid)) < params.keep_prob
    off_r = int(gen.integers(0, cell_h))
    off_c = int(gen.integers(0, cell_w))
    return cells.astype(np.float64), off_r, off_c


def rise_mask(params: RiseMaskParams, shape: tuple[int, int], index: int) -> SaliencyMap:
    """Mask #index alone; identical to the corresponding rise_masks element."""
    h, w = shape
    cell_h, cell_w = math.ceil(h / params.grid), math.ceil(w / params.grid)
    rows = _bilinear_rows(h + cell_h, params.grid)
    cols = _bilinear_rows(w + cell_w, params.grid)
    cells, off_r, off_c = _rise_draw(params, index, cell_h, cell_w)
    up = rows @ (cells @ cols.T)  # association matches the batch path bit-for-bit
    return SaliencyMap(up[off_r:off_r + h, off_c:off_c + w])


def rise_masks(params: RiseMaskParams, shape: tuple[int, int]) -> list[SaliencyMap]:
    """All params.count masks: Bernoulli grids, bilinearly upsampled to
    (H + ceil(H/s), W + ceil(W/s)), cropped at a random per-mask offset."""
    h, w = shape
    if h < 1 or w < 1:
        raise InvalidParams("mask shape must be positive")
    cell_h, cell_w = math.ceil(h / params.grid), math.ceil(w / params.grid)
    rows = _bilinear_rows(h + cell_h, params.grid)
    cols = _bilinear_rows(w + cell_w, params.grid)
    grids = np.empty((params.count, params.grid, params.grid))
    offsets = np.empty((params.count, 2), dtype=int)
    for i in range(params.count):
        grids[i], offsets[i, 0], offsets[i, 1] = _rise_draw(params, i, cell_h, cell_w)
    upsampled = rows @ (grids @ cols.T)  # (N, H+ch, W+cw)
    out = []
    for i in range(params.count):
        r0, c0 = offsets[i]
        out.append(SaliencyMap(upsampled[i, r0:r0 + h, c0:c0 + w]))
    return out


# --- superpixel segmentation --------------------------------------------------

@dataclass(frozen=True)
class Segmentation:
    """Partition of the image plane into k labelled, 4-connected segments."""

    labels: np.ndarray  # (H, W) ids in [0, k)
    k: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 2 or labels.size == 0:
            raise InvalidParams("labels must be a non-empty 2-D grid")
        present = np.unique(labels)
        if present[0] != 0 or present[-1] != self.k - 1 or len(present) != self.k:
            raise InvalidParams("segment ids must be exactly 0..k-1, all non-empty")
        if _count_fragments(labels) != self.k:
            raise InvalidParams("every segment must be 4-connected")
        object.__setattr__(self, "labels", _freeze(labels))

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    def member_mask(self, on: np.ndarray) -> np.ndarray:
        """(H, W) bool of pixels whose segment is flagged on."""
        on = np.asarray(on, dtype=bool)
        if on.shape != (self.k,):
            raise InvalidParams(f"coalition length {on.shape} != k={self.k}")
        return on[self.labels]


def _count_fragments(labels: np.ndarray) -> int:
    return len(_fragments(labels))


def _fragments(labels: np.ndarray) -> list[tuple[int, np.ndarray]]:
    """4-connected same-label fragments in raster discovery order."""
    h, w = labels.shape
    seen = np.zeros((h, w), dtype=bool)
    frags = []
    for start in range(h * w):
        sr, sc = divmod(start, w)
        if seen[sr, sc]:
            continue
        lab = labels[sr, sc]
        seen[sr, sc] = True
        queue = deque([(sr, sc)])
        members = []
        while queue:
            r, c = queue.popleft()
            members.append((r, c))
            for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                if 0 <= nr < h and 0 <= nc < w and not seen[nr, nc] and labels[nr, nc] == lab:
                    seen[nr, nc] = True
                    queue.append((nr, nc))
        frags.append((int(lab), np.array(members, dtype=np.int64)))
    return frags


def _grid_shape(target_k: int, h: int, w: int) -> tuple[int, int]:
    """Factor pair (rows, cols) of target_k best matching the image aspect."""
    best = None
    for gr in range(1, target_k + 1):
        if target_k % gr:
            continue
        gc = target_k // gr
        if gr > h or gc > w:
            continue
        cost = abs(math.log(gr / gc) - math.log(h / w))
        if best is None or cost < best[0]:
            best = (cost, gr, gc)
    if best is None:
        raise InvalidParams(f"cannot tile {h}x{w} with {target_k} grid cells")
    return best[1], best[2]


def _grid_labels(h: int, w: int, gr: int, gc: int) -> np.ndarray:
    row_ids = np.repeat(np.arange(gr), [len(b) for b in np.array_split(np.arange(h), gr)])
    col_ids = np.repeat(np.arange(gc), [len(b) for b in np.array_split(np.arange(w), gc)])
    return row_ids[:, None] * gc + col_ids[None, :]


def segment_image(image: Image, target_k: int, seed: int = 0,
                  compactness: float = 0.1, max_iters: int = 10) -> Segmentation:
    """Cluster pixels on (intensity, position) into ~target_k superpixels.

    Initialization is a regular grid of exactly target_k tiles, k-means
    runs on features (channels..., row*m/S, col*m/S) with S the expected
    cell side, and a post-pass re-attaches orphaned fragments to the
    adjacent segment of closest mean intensity so every segment ends up
    4-connected.  On a constant image the grid is a k-means fixed point,
    so the output is exactly the initial tiling.
    """
    h, w = image.shape
    if not 1 <= target_k <= h * w:
        raise InvalidParams(f"target_k must be in [1, {h * w}]")
    gr, gc = _grid_shape(target_k, h, w)
    labels = _grid_labels(h, w, gr, gc).reshape(-1)

    cell = math.sqrt(h * w / target_k)
    sw = compactness / cell
    rr, cc = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    feats = np.concatenate(
        [image.data.reshape(h * w, -1), rr.reshape(-1, 1) * sw, cc.reshape(-1, 1) * sw],
        axis=1)

    centers = np.zeros((target_k, feats.shape[1]))
    for _ in range(max_iters):
        for j in range(target_k):
            members = feats[labels == j]
            if len(members):
                centers[j] = members.mean(axis=0)
        dist = (feats * feats).sum(1)[:, None] - 2.0 * feats @ centers.T \
            + (centers * centers).sum(1)[None, :]
        new_labels = dist.argmin(axis=1)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels

    labels2d = _connectify(labels.reshape(h, w), image)
    # compact surviving ids to 0..k-1, ascending
    present = np.unique(labels2d)
    remap = np.zeros(int(present.max()) + 1, dtype=np.int64)
    remap[present] = np.arange(len(present))
    return Segmentation(labels=remap[labels2d], k=len(present))


def _connectify(labels: np.ndarray, image: Image) -> np.ndarray:
    """Merge every non-largest fragment of each label into an adjacent,
    already-connected segment with the closest mean intensity."""
    h, w = labels.shape
    gray = image.data.mean(axis=2)
    frags = _fragments(labels)

    cluster_mean = {}
    for lab in np.unique(labels):
        cluster_mean[int(lab)] = float(gray[labels == lab].mean())

    largest: dict[int, int] = {}
    for fi, (lab, px) in enumerate(frags):
        if lab not in largest or len(px) > len(frags[largest[lab]][1]):
            largest[lab] = fi

    frag_id = np.empty((h, w), dtype=np.int64)
    for fi, (_, px) in enumerate(frags):
        frag_id[px[:, 0], px[:, 1]] = fi

    final = {fi: lab for lab, fi in largest.items()}
    out = labels.copy()
    pending = deque(fi for fi in range(len(frags)) if fi not in final)
    while pending:
        stalled = len(pending)
        for _ in range(stalled):
            fi = pending.popleft()
            lab, px = frags[fi]
            cands = set()
            for r, c in px:
                for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                    if 0 <= nr < h and 0 <= nc < w:
                        nf = frag_id[nr, nc]
                        if nf != fi and nf in final:
                            cands.add(final[nf])
            if not cands:
                pending.append(fi)
                continue
            own = float(gray[px[:, 0], px[:, 1]].mean())
            target = min(cands, key=lambda lb: (abs(cluster_mean[lb] - own), lb))
            final[fi] = target
            out[px[:, 0], px[:, 1]] = target
        if len(pending) == stalled:  # cannot happen on a connected grid; guard anyway
            fi = pending.popleft()
            lab, px = frags[fi]
            final[fi] = lab
            if largest.get(lab) != fi:
                out[px[:, 0], px[:, 1]] = lab
    return out


# --- coalition sampling --------------------------------------------------------

def shapley_kernel_weights(k: int) -> np.ndarray:
    """Normalized coalition-size weights (k-1)/(C(k,z)*z*(k-z)) for z=1..k-1."""
    if k < 2:
        raise InvalidParams("kernel weights need k >= 2")
    raw = np.array([(k - 1) / (math.comb(k, z) * z * (k - z)) for z in range(1, k)])
    return raw / raw.sum()


def coalition_samples(k: int, n: int, seed: int = 0,
                      scheme: str = "uniform") -> np.ndarray:
    """(n, k) boolean coalition matrix; rows 0 and 1 are all-off and all-on.

    uniform: each remaining bit is Bernoulli(0.5).  shapley-kernel:
    coalition size is drawn from the Shapley kernel weights, members
    uniformly without replacement (k=1 degenerates to uniform bits).
    """
    if k < 1 or n < 1:
        raise InvalidParams("k and n must be >= 1")
    if scheme not in ("uniform", "shapley-kernel"):
        raise InvalidParams(f"unknown coalition scheme {scheme!r}")
    out = np.zeros((n, k), dtype=bool)
    if n >= 2:
        out[1] = True
    kernel_cdf = None
    if scheme == "shapley-kernel" and k >= 2:
        kernel_cdf = np.cumsum(shapley_kernel_weights(k))
    for i in range(2, n):
        gen = rng.stream(seed, rng.COALITIONS, i)
        if kernel_cdf is None:
            out[i] = gen.random(k) < 0.5
        else:
            z = 1 + int(np.searchsorted(kernel_cdf, gen.random(), side="right"))
            z = min(z, k - 1)
            out[i, gen.permutation(k)[:z]] = True
    return out


# --- recursive rectangle partition ---------------------------------------------

@dataclass(frozen=True)
class Partition:
    parent: Rect
    parts: tuple[Rect, Rect, Rect, Rect]

    def __post_init__(self):
        pr0, pc0, pr1, pc1 = self.parent
        area = sum((r1 - r0) * (c1 - c0) for r0, c0, r1, c1 in self.parts)
        if area != (pr1 - pr0) * (pc1 - pc0):
            raise InvalidParams("parts must tile the parent exactly")
        if any(r1 <= r0 or c1 <= c0 for r0, c0, r1, c1 in self.parts):
            raise InvalidParams("every part needs at least one pixel")


def rex_partition(rect: Rect, seed: int) -> Partition:
    """Split a rectangle into 4 tiles at a uniformly random interior point."""
    r0, c0, r1, c1 = rect
    if r1 - r0 < 2 or c1 - c0 < 2:
        raise RectTooSmall(f"cannot split {rect}: need at least 2x2")
    gen = rng.stream(seed, rng.PARTITION, 0)
    sr = int(gen.integers(r0 + 1, r1))
    sc = int(gen.integers(c0 + 1, c1))
    return Partition(parent=rect, parts=(
        (r0, c0, sr, sc), (r0, sc, sr, c1), (sr, c0, r1, sc), (sr, sc, r1, c1)))
