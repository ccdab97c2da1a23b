"""Shared fixtures: band segmentations and coalition-decoding oracles.

The game oracles reconstruct which segments a mutant kept by looking at
band intensities (zero occlusion darkens an off band below the decode
threshold), which lets tests drive the explainers with an arbitrary
coalition -> value game.
"""

import numpy as np
import pytest

from mrxai.imaging import Image
from mrxai.mutants import Segmentation
from mrxai.oracle import Oracle, Prediction

POS = "tumor"
NEG = "no_tumor"
BAND_ROWS = 2
BAND_WIDTH = 4
BASE_INTENSITY = 0.6
DECODE_THRESHOLD = 0.3


def band_setup(k: int) -> tuple[Image, Segmentation]:
    """k horizontal bands, each BAND_ROWS x BAND_WIDTH at a bright base level."""
    labels = np.repeat(np.arange(k), BAND_ROWS)[:, None] * np.ones((1, BAND_WIDTH), int)
    seg = Segmentation(labels=labels.astype(int), k=k)
    image = Image(np.full((k * BAND_ROWS, BAND_WIDTH, 1), BASE_INTENSITY))
    return image, seg


def decode_coalition(image: Image, k: int) -> tuple[bool, ...]:
    return tuple(
        float(image.data[i * BAND_ROWS:(i + 1) * BAND_ROWS, :, 0].mean()) > DECODE_THRESHOLD
        for i in range(k))


class GameOracle(Oracle):
    """Confidence equals game(coalition); the label never changes.

    Use with zero occlusion so the coalition decodes exactly.  Suitable
    for value-driven explainers (saliency, attribution); not for
    label-equality checks.
    """

    def __init__(self, k: int, game):
        super().__init__()
        self.k = k
        self.game = game

    def _classify(self, image: Image) -> Prediction:
        value = float(self.game(decode_coalition(image, self.k)))
        return Prediction(POS, min(max(value, 0.0), 1.0))


class LabelOracle(Oracle):
    """Label flips on a coalition predicate; confidence is always 1."""

    def __init__(self, k: int, predicate):
        super().__init__()
        self.k = k
        self.predicate = predicate

    def _classify(self, image: Image) -> Prediction:
        if self.predicate(decode_coalition(image, self.k)):
            return Prediction(POS, 1.0)
        return Prediction(NEG, 1.0)


def brute_force_shapley(game, k: int) -> np.ndarray:
    """Independent enumeration oracle: the textbook factorial-weighted sum
    over all coalitions, via itertools rather than bitmask arithmetic."""
    from itertools import combinations
    from math import factorial

    players = list(range(k))
    phi = np.zeros(k)
    for i in players:
        others = [j for j in players if j != i]
        for size in range(k):
            weight = factorial(size) * factorial(k - size - 1) / factorial(k)
            for subset in combinations(others, size):
                base = tuple(j in subset for j in players)
                with_i = tuple(j in subset or j == i for j in players)
                phi[i] += weight * (game(with_i) - game(base))
    return phi


@pytest.fixture
def blob_image():
    """64x64 background 0.05 with a 12x12 bright square at rows/cols 20..31."""
    data = np.full((64, 64, 1), 0.05)
    data[20:32, 20:32, 0] = 0.92
    return Image(data)
